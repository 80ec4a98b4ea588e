use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::path::Path;

use log::warn;

use super::table::{RatingRecord, RatingsTable};
use crate::error::{Error, Result};

/// What to do when a `(user, item)` pair appears more than once in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DuplicatePolicy {
    /// Fail with both line numbers.
    #[default]
    Reject,
    /// Keep the last occurrence and log how many were overwritten.
    KeepLast,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub duplicates: DuplicatePolicy,
}

struct Collector {
    records: Vec<RatingRecord>,
    lines: Vec<usize>,
    seen: HashMap<(String, String), usize>,
    policy: DuplicatePolicy,
    overwritten: usize,
}

impl Collector {
    fn new(policy: DuplicatePolicy) -> Self {
        Collector {
            records: Vec::new(),
            lines: Vec::new(),
            seen: HashMap::new(),
            policy,
            overwritten: 0,
        }
    }

    fn push(&mut self, line: usize, record: RatingRecord) -> Result<()> {
        match self.seen.entry((record.user.clone(), record.item.clone())) {
            Entry::Vacant(slot) => {
                slot.insert(self.records.len());
                self.records.push(record);
                self.lines.push(line);
            }
            Entry::Occupied(slot) => {
                let at = *slot.get();
                match self.policy {
                    DuplicatePolicy::Reject => {
                        return Err(Error::DuplicatePair {
                            user: record.user,
                            item: record.item,
                            first_line: self.lines[at],
                            second_line: line,
                        })
                    }
                    DuplicatePolicy::KeepLast => {
                        self.records[at] = record;
                        self.lines[at] = line;
                        self.overwritten += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<RatingsTable> {
        if self.overwritten > 0 {
            warn!(
                "{} duplicate (user, item) ratings replaced by a later occurrence",
                self.overwritten
            );
        }
        RatingsTable::from_records(self.records)
    }
}

fn parse_value(line: usize, field: &str) -> Result<f64> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("rating {field:?} is not a number")))?;
    if !value.is_finite() {
        return Err(Error::parse(
            line,
            format!("rating {field:?} is not finite"),
        ));
    }
    Ok(value)
}

fn parse_timestamp(line: usize, field: &str) -> Result<Option<i64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::parse(line, format!("timestamp {field:?} is not an integer")))
}

fn parse_id(line: usize, what: &str, field: &str) -> Result<String> {
    let field = field.trim();
    if field.is_empty() {
        return Err(Error::parse(line, format!("empty {what} id")));
    }
    Ok(field.to_owned())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a MovieLens 1M style `UserID::MovieID::Rating::Timestamp` file.
///
/// Blank lines are ignored; duplicate pairs are rejected.
pub fn parse_movielens(path: impl AsRef<Path>) -> Result<RatingsTable> {
    let text = read(path.as_ref())?;
    parse_movielens_str(&text)
}

pub(crate) fn parse_movielens_str(text: &str) -> Result<RatingsTable> {
    let mut out = Collector::new(DuplicatePolicy::Reject);
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split("::").collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line,
                format!("expected 4 `::`-separated fields, found {}", fields.len()),
            ));
        }
        out.push(
            line,
            RatingRecord {
                user: parse_id(line, "user", fields[0])?,
                item: parse_id(line, "item", fields[1])?,
                value: parse_value(line, fields[2])?,
                timestamp: parse_timestamp(line, fields[3])?,
            },
        )?;
    }
    out.finish()
}

/// Parses a comma-separated `user,item,rating[,timestamp]` file, rejecting
/// duplicate pairs.
pub fn parse_generic_csv(path: impl AsRef<Path>, has_header: bool) -> Result<RatingsTable> {
    parse_generic_csv_with(
        path,
        CsvOptions {
            has_header,
            duplicates: DuplicatePolicy::Reject,
        },
    )
}

pub fn parse_generic_csv_with(path: impl AsRef<Path>, options: CsvOptions) -> Result<RatingsTable> {
    let text = read(path.as_ref())?;
    parse_csv_str(&text, options)
}

pub(crate) fn parse_csv_str(text: &str, options: CsvOptions) -> Result<RatingsTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Collector::new(options.duplicates);
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 3 && row.len() != 4 {
            return Err(Error::parse(
                line,
                format!("expected 3 or 4 fields, found {}", row.len()),
            ));
        }
        out.push(
            line,
            RatingRecord {
                user: parse_id(line, "user", &row[0])?,
                item: parse_id(line, "item", &row[1])?,
                value: parse_value(line, &row[2])?,
                timestamp: match row.get(3) {
                    Some(f) => parse_timestamp(line, f)?,
                    None => None,
                },
            },
        )?;
    }
    out.finish()
}

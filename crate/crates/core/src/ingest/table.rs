use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use indexmap::IndexSet;

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};

/// One interaction as it appears in a source file.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub user: String,
    pub item: String,
    pub value: f64,
    /// Carried through to the canonical CSV; no algorithm reads it.
    pub timestamp: Option<i64>,
}

/// A densely indexed interaction stored inside a [`RatingsTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
    pub timestamp: Option<i64>,
}

/// External id ↔ dense index map.
///
/// Ids are kept in natural order: ids that parse as unsigned integers sort
/// numerically and before any non-numeric id, which sort lexicographically.
/// Dense indices are therefore a pure function of the id set.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    ids: IndexSet<String>,
}

pub(crate) fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl Vocab {
    /// Builds a vocabulary from an arbitrary collection of ids.
    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        ids.sort_by(|a, b| natural_cmp(a, b));
        ids.dedup();
        Vocab {
            ids: ids.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.ids.get_index_of(id).map(|i| i as u32)
    }

    pub fn name(&self, index: u32) -> &str {
        self.ids
            .get_index(index as usize)
            .map(String::as_str)
            .unwrap_or("<unknown>")
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.ids.len() == other.ids.len() && self.ids.iter().eq(other.ids.iter())
    }
}

/// Immutable interaction table with dense user and item indices.
///
/// Ratings are sorted by `(user, item)` and no pair occurs twice. Tables
/// produced by [`kfold_split`](super::kfold_split) share the parent's
/// vocabularies, so a fold's train and test halves agree on dense ids even
/// when some catalog item has no rating in one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    ratings: Vec<Rating>,
    users: Arc<Vocab>,
    items: Arc<Vocab>,
    // ratings[user_offsets[u]..user_offsets[u + 1]] belong to user u
    user_offsets: Vec<usize>,
}

impl RatingsTable {
    /// Builds a table from records whose `(user, item)` pairs are unique.
    pub fn from_records(records: Vec<RatingRecord>) -> Result<Self> {
        let users = Vocab::from_ids(records.iter().map(|r| r.user.as_str()));
        let items = Vocab::from_ids(records.iter().map(|r| r.item.as_str()));
        let ratings = records
            .into_iter()
            .map(|r| Rating {
                user: UserId(users.index_of(&r.user).expect("user in vocab")),
                item: ItemId(items.index_of(&r.item).expect("item in vocab")),
                value: r.value,
                timestamp: r.timestamp,
            })
            .collect();
        Self::from_parts(ratings, Arc::new(users), Arc::new(items))
    }

    /// Builds a table over existing vocabularies. Ratings are sorted;
    /// duplicate pairs are rejected.
    pub fn from_parts(
        mut ratings: Vec<Rating>,
        users: Arc<Vocab>,
        items: Arc<Vocab>,
    ) -> Result<Self> {
        ratings.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = ratings
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::Config(format!(
                "duplicate pair ({}, {}) in table",
                users.name(w[0].user.0),
                items.name(w[0].item.0)
            )));
        }
        let mut user_offsets = vec![0usize; users.len() + 1];
        for r in &ratings {
            user_offsets[r.user.index() + 1] += 1;
        }
        for u in 0..users.len() {
            user_offsets[u + 1] += user_offsets[u];
        }
        Ok(RatingsTable {
            ratings,
            users,
            items,
            user_offsets,
        })
    }

    /// Maps this table onto other vocabularies by external id, dropping
    /// ratings whose user or item is unknown there. Returns the number dropped.
    pub fn reindex(&self, users: Arc<Vocab>, items: Arc<Vocab>) -> Result<(RatingsTable, usize)> {
        let mut dropped = 0;
        let mut ratings = Vec::with_capacity(self.ratings.len());
        for r in &self.ratings {
            match (
                users.index_of(self.user_name(r.user)),
                items.index_of(self.item_name(r.item)),
            ) {
                (Some(u), Some(i)) => ratings.push(Rating {
                    user: UserId(u),
                    item: ItemId(i),
                    ..*r
                }),
                _ => dropped += 1,
            }
        }
        Ok((RatingsTable::from_parts(ratings, users, items)?, dropped))
    }

    /// Reindexes two tables onto the union of their vocabularies.
    ///
    /// A fold's train and test halves written to disk and read back separately
    /// recover the fold's dense ids this way, provided every catalog item
    /// appears in one of them.
    pub fn align(a: &RatingsTable, b: &RatingsTable) -> Result<(RatingsTable, RatingsTable)> {
        let users = Arc::new(Vocab::from_ids(a.users.iter().chain(b.users.iter())));
        let items = Arc::new(Vocab::from_ids(a.items.iter().chain(b.items.iter())));
        let (a, _) = a.reindex(users.clone(), items.clone())?;
        let (b, _) = b.reindex(users, items)?;
        Ok((a, b))
    }

    pub fn empty() -> Self {
        RatingsTable {
            ratings: Vec::new(),
            users: Arc::default(),
            items: Arc::default(),
            user_offsets: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// Number of users in the vocabulary.
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Number of items in the vocabulary.
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Number of distinct users with at least one rating in this table.
    pub fn n_active_users(&self) -> usize {
        self.user_offsets.windows(2).filter(|w| w[1] > w[0]).count()
    }

    /// Number of distinct items with at least one rating in this table.
    pub fn n_active_items(&self) -> usize {
        let mut seen = vec![false; self.n_items()];
        for r in &self.ratings {
            seen[r.item.index()] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn users(&self) -> &Arc<Vocab> {
        &self.users
    }

    pub fn items(&self) -> &Arc<Vocab> {
        &self.items
    }

    pub fn user_id(&self, external: &str) -> Option<UserId> {
        self.users.index_of(external).map(UserId)
    }

    pub fn item_id(&self, external: &str) -> Option<ItemId> {
        self.items.index_of(external).map(ItemId)
    }

    pub fn user_name(&self, user: UserId) -> &str {
        self.users.name(user.0)
    }

    pub fn item_name(&self, item: ItemId) -> &str {
        self.items.name(item.0)
    }

    /// All ratings of `user`, sorted by item.
    pub fn user_ratings(&self, user: UserId) -> &[Rating] {
        let u = user.index();
        if u + 1 >= self.user_offsets.len() {
            return &[];
        }
        &self.ratings[self.user_offsets[u]..self.user_offsets[u + 1]]
    }

    /// Items rated by `user`, ascending.
    pub fn profile(&self, user: UserId) -> impl Iterator<Item = ItemId> + '_ {
        self.user_ratings(user).iter().map(|r| r.item)
    }

    pub fn contains(&self, user: UserId, item: ItemId) -> bool {
        self.user_ratings(user)
            .binary_search_by_key(&item, |r| r.item)
            .is_ok()
    }

    /// Users with at least one rating, ascending.
    pub fn active_users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.user_offsets
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] > w[0])
            .map(|(u, _)| UserId(u as u32))
    }

    /// Owned records in table order.
    pub fn records(&self) -> impl Iterator<Item = RatingRecord> + '_ {
        self.ratings.iter().map(|r| RatingRecord {
            user: self.user_name(r.user).to_owned(),
            item: self.item_name(r.item).to_owned(),
            value: r.value,
            timestamp: r.timestamp,
        })
    }

    /// Writes the canonical `user_id,item_id,rating,timestamp` CSV.
    pub fn write_canonical<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["user_id", "item_id", "rating", "timestamp"])?;
        for r in &self.ratings {
            let ts = r.timestamp.map(|t| t.to_string()).unwrap_or_default();
            out.write_record([
                self.user_name(r.user),
                self.item_name(r.item),
                &r.value.to_string(),
                &ts,
            ])?;
        }
        out.flush()
            .map_err(|e| Error::io("<canonical csv writer>", e))?;
        Ok(())
    }

    pub fn write_canonical_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_canonical(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(u: &str, i: &str, v: f64) -> RatingRecord {
        RatingRecord {
            user: u.into(),
            item: i.into(),
            value: v,
            timestamp: None,
        }
    }

    #[test]
    fn natural_order_puts_numbers_first_and_numerically() {
        let v = Vocab::from_ids(["10", "b", "2", "a", "1"]);
        assert_eq!(v.iter().collect::<Vec<_>>(), ["1", "2", "10", "a", "b"]);
        assert_eq!(v.index_of("10"), Some(2));
    }

    #[test]
    fn profiles_are_sorted_and_contiguous() {
        let t = RatingsTable::from_records(vec![
            rec("2", "b", 1.0),
            rec("1", "c", 2.0),
            rec("1", "a", 3.0),
        ])
        .unwrap();
        assert_eq!(t.n_users(), 2);
        assert_eq!(t.n_items(), 3);
        let u1 = t.user_id("1").unwrap();
        let names: Vec<_> = t.profile(u1).map(|i| t.item_name(i)).collect();
        assert_eq!(names, ["a", "c"]);
        assert!(t.contains(u1, t.item_id("a").unwrap()));
        assert!(!t.contains(u1, t.item_id("b").unwrap()));
    }

    #[test]
    fn duplicate_pairs_are_rejected() {
        let err = RatingsTable::from_records(vec![rec("1", "a", 1.0), rec("1", "a", 2.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn canonical_csv_has_header_and_sorted_rows() {
        let t = RatingsTable::from_records(vec![
            RatingRecord {
                timestamp: Some(7),
                ..rec("10", "x", 4.5)
            },
            rec("9", "y", 3.0),
        ])
        .unwrap();
        let mut buf = Vec::new();
        t.write_canonical(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "user_id,item_id,rating,timestamp\n9,y,3,\n10,x,4.5,7\n"
        );
    }
}

//! Base recommender: a pairwise-loss factor model and top-N candidate
//! generation with per-list score normalization.

mod checkpoint;
mod rank_als;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use rank_als::{objective, train, train_with_report, FactorModel, Hyperparams, TrainReport};

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::ingest::RatingsTable;
use crate::scalar::Scalar;

/// Anything that can score the whole catalog for a user.
///
/// The re-ranker only sees [`CandidateList`]s, so any scorer works as a
/// baseline.
pub trait Scorer<T: Scalar>: Sync {
    fn n_users(&self) -> usize;

    fn n_items(&self) -> usize;

    /// Whether `item` may be recommended at all.
    fn is_eligible(&self, _item: ItemId) -> bool {
        true
    }

    /// One score per catalog item, indexed by dense item id.
    fn score_items(&self, user: UserId) -> Result<Vec<T>>;
}

/// A user's top-N items from the base recommender.
///
/// `norm_scores` is empty until [`normalize_scores`] runs; it holds P(v|u).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateList<T> {
    pub user: UserId,
    pub items: Vec<ItemId>,
    pub raw_scores: Vec<T>,
    pub norm_scores: Vec<T>,
}

impl<T: Scalar> CandidateList<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm_scores.len() == self.items.len()
    }
}

fn by_score_then_id<T: Scalar>(a: &(ItemId, T), b: &(ItemId, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// The `n` best eligible items outside `exclude`, by score descending and
/// item id ascending among ties.
pub fn top_n<T: Scalar, S: Scorer<T> + ?Sized>(
    scorer: &S,
    user: UserId,
    n: usize,
    exclude: &BTreeSet<ItemId>,
) -> Result<CandidateList<T>> {
    if n == 0 {
        return Err(Error::Config("candidate depth must be at least 1".into()));
    }
    let scores = scorer.score_items(user)?;
    let mut eligible: Vec<(ItemId, T)> = scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| (ItemId(i as u32), s))
        .filter(|(i, _)| scorer.is_eligible(*i) && !exclude.contains(i))
        .collect();
    if eligible.len() > n {
        eligible.select_nth_unstable_by(n - 1, by_score_then_id);
        eligible.truncate(n);
    }
    eligible.sort_by(by_score_then_id);
    let (items, raw_scores) = eligible.into_iter().unzip();
    Ok(CandidateList {
        user,
        items,
        raw_scores,
        norm_scores: Vec::new(),
    })
}

/// Candidate lists for every user active in `train`, excluding each user's
/// training items. Users are processed in parallel; output is in user order.
pub fn generate_candidates<T: Scalar, S: Scorer<T> + ?Sized>(
    scorer: &S,
    train: &RatingsTable,
    depth: usize,
    normalization: ScoreNormalization,
) -> Result<Vec<CandidateList<T>>> {
    use rayon::prelude::*;
    let users: Vec<UserId> = train.active_users().collect();
    users
        .into_par_iter()
        .map(|u| {
            let exclude: BTreeSet<ItemId> = train.profile(u).collect();
            top_n(scorer, u, depth, &exclude).map(|c| normalize_with(c, normalization))
        })
        .collect()
}

/// How raw scores become P(v|u).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreNormalization {
    /// `(s − min) / (max − min)` within the list; all ones when flat.
    #[default]
    MinMax,
    /// `exp(s − max) / Σ exp(s − max)` within the list.
    Softmax,
}

/// Min-max normalization within the list.
pub fn normalize_scores<T: Scalar>(list: CandidateList<T>) -> CandidateList<T> {
    normalize_with(list, ScoreNormalization::MinMax)
}

pub fn normalize_with<T: Scalar>(
    mut list: CandidateList<T>,
    normalization: ScoreNormalization,
) -> CandidateList<T> {
    let raw = &list.raw_scores;
    if raw.is_empty() {
        list.norm_scores.clear();
        return list;
    }
    let max = raw.iter().copied().fold(T::neg_infinity(), T::max);
    let min = raw.iter().copied().fold(T::infinity(), T::min);
    list.norm_scores = match normalization {
        ScoreNormalization::MinMax => {
            if max > min {
                let range = max - min;
                raw.iter().map(|&s| (s - min) / range).collect()
            } else {
                vec![T::one(); raw.len()]
            }
        }
        ScoreNormalization::Softmax => {
            let exp: Vec<T> = raw.iter().map(|&s| (s - max).exp()).collect();
            let total: T = exp.iter().copied().sum();
            exp.into_iter().map(|e| e / total).collect()
        }
    };
    list
}

/// Writes `user_id,rank,item_id,raw_score,norm_score` rows, rank from 1.
pub fn write_candidates<T: Scalar, W: Write>(
    lists: &[CandidateList<T>],
    table: &RatingsTable,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["user_id", "rank", "item_id", "raw_score", "norm_score"])?;
    for list in lists {
        for (pos, &item) in list.items.iter().enumerate() {
            let norm = list
                .norm_scores
                .get(pos)
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.write_record([
                table.user_name(list.user),
                &(pos + 1).to_string(),
                table.item_name(item),
                &list.raw_scores[pos].to_string(),
                &norm,
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<candidates csv>", e))?;
    Ok(())
}

/// Reads lists written by [`write_candidates`], resolving ids against `table`.
pub fn read_candidates<T: Scalar, R: Read>(
    reader: R,
    table: &RatingsTable,
) -> Result<Vec<CandidateList<T>>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut lists: Vec<CandidateList<T>> = Vec::new();
    for (n, row) in input.records().enumerate() {
        let row = row?;
        let line = n + 2;
        if row.len() != 5 {
            return Err(Error::parse(line, "expected 5 candidate fields"));
        }
        let user = table
            .user_id(&row[0])
            .ok_or_else(|| Error::parse(line, format!("unknown user {:?}", &row[0])))?;
        let item = table
            .item_id(&row[2])
            .ok_or_else(|| Error::parse(line, format!("unknown item {:?}", &row[2])))?;
        let number = |field: &str| -> Result<T> {
            field
                .parse::<f64>()
                .map(T::of)
                .map_err(|_| Error::parse(line, format!("bad score {field:?}")))
        };
        let raw = number(&row[3])?;
        let norm = if row[4].is_empty() {
            None
        } else {
            Some(number(&row[4])?)
        };
        match lists.last_mut() {
            Some(last) if last.user == user => {
                last.items.push(item);
                last.raw_scores.push(raw);
                last.norm_scores.extend(norm);
            }
            _ => lists.push(CandidateList {
                user,
                items: vec![item],
                raw_scores: vec![raw],
                norm_scores: norm.into_iter().collect(),
            }),
        }
    }
    Ok(lists)
}

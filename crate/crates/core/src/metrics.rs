//! Ranking accuracy and popularity-bias metrics over a set of top-k lists.

use std::collections::{BTreeMap, BTreeSet};

use log::info;

use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::ingest::RatingsTable;
use crate::popularity::{ItemPopularity, PopularityPartition};
use crate::scalar::Scalar;

/// One recommendation list per user; all lists share the same length.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecommendationLog {
    lists: BTreeMap<UserId, Vec<ItemId>>,
}

impl RecommendationLog {
    pub fn new<I>(lists: I) -> Result<Self>
    where
        I: IntoIterator<Item = (UserId, Vec<ItemId>)>,
    {
        let lists: BTreeMap<UserId, Vec<ItemId>> = lists.into_iter().collect();
        let mut len = None;
        for (user, list) in &lists {
            if *len.get_or_insert(list.len()) != list.len() {
                return Err(Error::Config(format!(
                    "list of {user} has length {}, expected {}",
                    list.len(),
                    len.unwrap_or(0)
                )));
            }
            let distinct: BTreeSet<_> = list.iter().collect();
            if distinct.len() != list.len() {
                return Err(Error::Config(format!("list of {user} repeats an item")));
            }
        }
        Ok(RecommendationLog { lists })
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Common list length, zero for an empty log.
    pub fn list_len(&self) -> usize {
        self.lists.values().next().map_or(0, Vec::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, &[ItemId])> {
        self.lists.iter().map(|(&u, l)| (u, l.as_slice()))
    }

    pub fn get(&self, user: UserId) -> Option<&[ItemId]> {
        self.lists.get(&user).map(Vec::as_slice)
    }

    /// Keeps only users for which `keep` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(UserId) -> bool) {
        self.lists.retain(|&u, _| keep(u));
    }
}

fn nonempty(log: &RecommendationLog) -> Result<()> {
    if log.is_empty() {
        Err(Error::EmptyLog)
    } else {
        Ok(())
    }
}

fn mean_over_users<T: Scalar>(log: &RecommendationLog, per_user: impl Fn(&[ItemId]) -> T) -> T {
    let total: T = log.iter().map(|(_, l)| per_user(l)).sum();
    total / T::of_count(log.len())
}

/// Average recommendation popularity: mean φ per list, averaged over users.
pub fn arp<T: Scalar>(log: &RecommendationLog, phi: &ItemPopularity) -> Result<T> {
    nonempty(log)?;
    Ok(mean_over_users(log, |list| {
        let sum: u64 = list.iter().map(|i| phi.get(i).copied().unwrap_or(0)).sum();
        T::of(sum as f64) / T::of_count(list.len())
    }))
}

/// Average share of long-tail items per list.
pub fn aplt<T: Scalar>(log: &RecommendationLog, long_tail: &BTreeSet<ItemId>) -> Result<T> {
    nonempty(log)?;
    Ok(mean_over_users(log, |list| {
        let hits = list.iter().filter(|i| long_tail.contains(i)).count();
        T::of_count(hits) / T::of_count(list.len())
    }))
}

/// Average number of long-tail items per list.
pub fn aclt_literal<T: Scalar>(log: &RecommendationLog, long_tail: &BTreeSet<ItemId>) -> Result<T> {
    nonempty(log)?;
    Ok(mean_over_users(log, |list| {
        T::of_count(list.iter().filter(|i| long_tail.contains(i)).count())
    }))
}

/// Share of the long-tail catalog recommended to at least one user.
pub fn lt_coverage<T: Scalar>(log: &RecommendationLog, long_tail: &BTreeSet<ItemId>) -> Result<T> {
    if long_tail.is_empty() {
        return Err(Error::EmptyLongTail);
    }
    let covered: BTreeSet<ItemId> = log
        .iter()
        .flat_map(|(_, l)| l.iter().copied())
        .filter(|i| long_tail.contains(i))
        .collect();
    Ok(T::of_count(covered.len()) / T::of_count(long_tail.len()))
}

/// Mean NDCG@k with binary relevance from the test table. Users without
/// test ratings are skipped.
pub fn ndcg_at_k<T: Scalar>(log: &RecommendationLog, test: &RatingsTable, k: usize) -> Result<T> {
    nonempty(log)?;
    let discount = |rank: usize| T::one() / T::of_count(rank + 1).log2();
    let mut total = T::zero();
    let mut counted = 0usize;
    for (user, list) in log.iter() {
        let relevant = test.user_ratings(user).len();
        if relevant == 0 {
            continue;
        }
        let dcg: T = list
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, &i)| test.contains(user, i))
            .map(|(r, _)| discount(r + 1))
            .sum();
        let ideal: T = (1..=relevant.min(k)).map(discount).sum();
        total += dcg / ideal;
        counted += 1;
    }
    let skipped = log.len() - counted;
    if skipped > 0 {
        info!("ndcg: skipped {skipped} users without test ratings");
    }
    if counted == 0 {
        return Err(Error::EmptyLog);
    }
    Ok(total / T::of_count(counted))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport<T> {
    pub ndcg: T,
    pub arp: T,
    pub aplt: T,
    pub aclt_literal: T,
    pub lt_coverage: T,
    pub n_users: usize,
}

/// Computes every metric over the users of `log` that have test ratings.
pub fn evaluate<T: Scalar>(
    log: &RecommendationLog,
    partition: &PopularityPartition,
    test: &RatingsTable,
    k: usize,
) -> Result<MetricsReport<T>> {
    let mut log = log.clone();
    let before = log.len();
    log.retain(|u| !test.user_ratings(u).is_empty());
    if log.len() < before {
        info!(
            "evaluate: {} users without test ratings left out",
            before - log.len()
        );
    }
    let tail = partition.long_tail();
    Ok(MetricsReport {
        ndcg: ndcg_at_k(&log, test, k)?,
        arp: arp(&log, partition.phi())?,
        aplt: aplt(&log, tail)?,
        aclt_literal: aclt_literal(&log, tail)?,
        lt_coverage: lt_coverage(&log, tail)?,
        n_users: log.len(),
    })
}

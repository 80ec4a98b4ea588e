//! Item popularity, the short-head / long-tail split and per-user category
//! propensities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::ItemId;
use crate::ingest::{RatingsTable, Vocab};
use crate::scalar::Scalar;

/// φ: number of training ratings per item. Items without ratings are absent.
pub type ItemPopularity = BTreeMap<ItemId, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Γ′, the popular items covering the head share of ratings.
    ShortHead,
    /// Γ, everything else.
    LongTail,
}

impl Category {
    pub const ALL: [Category; 2] = [Category::LongTail, Category::ShortHead];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ShortHead => "short_head",
            Category::LongTail => "long_tail",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn item_popularity(train: &RatingsTable) -> ItemPopularity {
    let mut phi = ItemPopularity::new();
    for r in train.ratings() {
        *phi.entry(r.item).or_insert(0) += 1;
    }
    phi
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityPartition {
    phi: ItemPopularity,
    short_head: BTreeSet<ItemId>,
    long_tail: BTreeSet<ItemId>,
    head_ratio: f64,
    threshold: u64,
}

/// Splits the items of `phi` into short head and long tail.
///
/// Items are ranked by φ descending, ties by ascending item id; the short
/// head is the shortest prefix whose cumulative φ reaches
/// `head_ratio · Σφ`.
pub fn partition_items(phi: &ItemPopularity, head_ratio: f64) -> Result<PopularityPartition> {
    if phi.is_empty() {
        return Err(Error::Config(
            "cannot partition an empty popularity map".into(),
        ));
    }
    if !(head_ratio > 0.0 && head_ratio < 1.0) {
        return Err(Error::Config(format!(
            "head ratio must lie in (0, 1), got {head_ratio}"
        )));
    }
    let mut ranked: Vec<(ItemId, u64)> = phi.iter().map(|(&i, &c)| (i, c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let total: u64 = ranked.iter().map(|(_, c)| c).sum();
    let target = head_ratio * total as f64;
    let mut cumulative = 0u64;
    let mut head_len = ranked.len();
    for (n, (_, c)) in ranked.iter().enumerate() {
        cumulative += c;
        if cumulative as f64 >= target {
            head_len = n + 1;
            break;
        }
    }
    let threshold = ranked[head_len - 1].1;
    Ok(PopularityPartition {
        phi: phi.clone(),
        short_head: ranked[..head_len].iter().map(|(i, _)| *i).collect(),
        long_tail: ranked[head_len..].iter().map(|(i, _)| *i).collect(),
        head_ratio,
        threshold,
    })
}

impl PopularityPartition {
    pub fn phi(&self) -> &ItemPopularity {
        &self.phi
    }

    /// φ(item), zero for items never rated in training.
    pub fn popularity(&self, item: ItemId) -> u64 {
        self.phi.get(&item).copied().unwrap_or(0)
    }

    pub fn short_head(&self) -> &BTreeSet<ItemId> {
        &self.short_head
    }

    pub fn long_tail(&self) -> &BTreeSet<ItemId> {
        &self.long_tail
    }

    pub fn head_ratio(&self) -> f64 {
        self.head_ratio
    }

    /// Minimum φ among short-head items.
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// Membership is by set, not by comparing against the threshold: items
    /// tied with the boundary item may sit on either side. Items unknown to
    /// the partition are long-tail.
    pub fn category(&self, item: ItemId) -> Category {
        if self.short_head.contains(&item) {
            Category::ShortHead
        } else {
            Category::LongTail
        }
    }

    pub fn is_long_tail(&self, item: ItemId) -> bool {
        self.category(item) == Category::LongTail
    }

    /// Writes `item_id,phi,category` rows in item order.
    pub fn write_csv<W: Write>(&self, items: &Vocab, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["item_id", "phi", "category"])?;
        for (&item, &count) in &self.phi {
            out.write_record([
                items.name(item.0),
                &count.to_string(),
                self.category(item).as_str(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<popularity csv>", e))?;
        Ok(())
    }
}

/// P(d|u) for the two categories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserPropensity<T> {
    pub p_long_tail: T,
    pub p_short_head: T,
}

impl<T: Scalar> UserPropensity<T> {
    pub fn of(&self, category: Category) -> T {
        match category {
            Category::LongTail => self.p_long_tail,
            Category::ShortHead => self.p_short_head,
        }
    }
}

/// Fraction of a training profile in each category. Items outside the
/// partition are ignored entirely.
pub fn user_propensity<T: Scalar>(
    profile: impl IntoIterator<Item = ItemId>,
    partition: &PopularityPartition,
) -> Result<UserPropensity<T>> {
    let (mut known, mut tail) = (0usize, 0usize);
    for item in profile {
        if partition.short_head.contains(&item) {
            known += 1;
        } else if partition.long_tail.contains(&item) {
            known += 1;
            tail += 1;
        }
    }
    if known == 0 {
        return Err(Error::EmptyProfile);
    }
    let p_long_tail = T::of_count(tail) / T::of_count(known);
    Ok(UserPropensity {
        p_long_tail,
        p_short_head: T::one() - p_long_tail,
    })
}

//! Personalized xQuAD re-ranking over the short-head / long-tail categories.
//!
//! For a candidate `v` the greedy criterion is
//!
//! ```text
//! score(v) = (1 − λ)·P(v|u) + λ · Σ_c P(c|u) · P(v|c) · coverage(c, S)
//! ```
//!
//! `P(v|c)` is a membership indicator, so the sum keeps only `v`'s own
//! category. `coverage` is the product term over the already selected list
//! `S`: Binary gives 1 until `S` holds an item of `c`, then 0; Smooth gives
//! the share of `S` outside `c`.

use std::cmp::Ordering;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::CandidateList;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::ingest::RatingsTable;
use crate::popularity::{Category, PopularityPartition, UserPropensity};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Binary,
    Smooth,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Binary, Variant::Smooth];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Binary => "binary",
            Variant::Smooth => "smooth",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(Variant::Binary),
            "smooth" => Ok(Variant::Smooth),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// How Smooth turns the category share of `S` into a coverage factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothForm {
    /// `1 − k_c/|S|`
    #[default]
    SingleFactor,
    /// `(1 − k_c/|S|)^|S|`, the per-item product with a constant factor.
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig<T> {
    pub lambda: T,
    pub variant: Variant,
    pub k: usize,
    pub candidate_depth: usize,
    pub smooth_form: SmoothForm,
}

impl<T: Scalar> RerankConfig<T> {
    pub fn new(lambda: T, variant: Variant) -> Self {
        RerankConfig {
            lambda,
            variant,
            k: 10,
            candidate_depth: 100,
            smooth_form: SmoothForm::default(),
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_candidate_depth(mut self, depth: usize) -> Self {
        self.candidate_depth = depth;
        self
    }

    pub fn with_smooth_form(mut self, form: SmoothForm) -> Self {
        self.smooth_form = form;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= T::zero() && self.lambda <= T::one()) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.k == 0 || self.k > self.candidate_depth {
            return Err(Error::Config(format!(
                "need 1 <= k <= candidate depth, got k={} depth={}",
                self.k, self.candidate_depth
            )));
        }
        Ok(())
    }
}

/// The partially built output list and its per-category counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RerankState {
    selected: Vec<ItemId>,
    long_tail: usize,
    short_head: usize,
}

impl RerankState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, item: ItemId, category: Category) {
        debug_assert!(!self.selected.contains(&item));
        self.selected.push(item);
        match category {
            Category::LongTail => self.long_tail += 1,
            Category::ShortHead => self.short_head += 1,
        }
    }

    pub fn selected(&self) -> &[ItemId] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn count(&self, category: Category) -> usize {
        match category {
            Category::LongTail => self.long_tail,
            Category::ShortHead => self.short_head,
        }
    }
}

pub fn category_membership(item: ItemId, partition: &PopularityPartition) -> Category {
    partition.category(item)
}

/// How much `category` is still uncovered by `state`, in `[0, 1]`.
pub fn coverage_factor<T: Scalar>(
    category: Category,
    state: &RerankState,
    variant: Variant,
    smooth_form: SmoothForm,
) -> T {
    if state.is_empty() {
        return T::one();
    }
    let covered = state.count(category);
    match variant {
        Variant::Binary => {
            if covered == 0 {
                T::one()
            } else {
                T::zero()
            }
        }
        Variant::Smooth => {
            let share = T::of_count(covered) / T::of_count(state.len());
            let factor = T::one() - share;
            match smooth_form {
                SmoothForm::SingleFactor => factor,
                SmoothForm::Product => factor.powi(state.len() as i32),
            }
        }
    }
}

/// Greedy criterion for one candidate of the given category.
pub fn xquad_score<T: Scalar>(
    category: Category,
    norm_score: T,
    propensity: &UserPropensity<T>,
    state: &RerankState,
    config: &RerankConfig<T>,
) -> T {
    let coverage = coverage_factor::<T>(category, state, config.variant, config.smooth_form);
    let lambda = config.lambda;
    (T::one() - lambda) * norm_score + lambda * (propensity.of(category) * coverage)
}

/// A re-ranked top-k list.
#[derive(Debug, Clone, PartialEq)]
pub struct Reranked<T> {
    pub user: UserId,
    pub items: Vec<ItemId>,
    pub categories: Vec<Category>,
    /// Criterion value at the step each item was selected.
    pub scores: Vec<T>,
}

/// Builds the top-k list greedily. Ties on the criterion go to the higher
/// normalized base score, then to the earlier candidate.
pub fn rerank<T: Scalar>(
    candidates: &CandidateList<T>,
    partition: &PopularityPartition,
    propensity: &UserPropensity<T>,
    config: &RerankConfig<T>,
) -> Result<Reranked<T>> {
    config.validate()?;
    if !candidates.is_normalized() {
        return Err(Error::MissingNormScores(candidates.user));
    }
    let pool = candidates.len().min(config.candidate_depth);
    if pool < config.k {
        return Err(Error::TooFewCandidates {
            user: candidates.user.to_string(),
            available: pool,
            requested: config.k,
        });
    }
    let categories: Vec<Category> = candidates.items[..pool]
        .iter()
        .map(|&i| category_membership(i, partition))
        .collect();
    let mut remaining: Vec<usize> = (0..pool).collect();
    let mut state = RerankState::new();
    let mut out = Reranked {
        user: candidates.user,
        items: Vec::with_capacity(config.k),
        categories: Vec::with_capacity(config.k),
        scores: Vec::with_capacity(config.k),
    };
    while state.len() < config.k {
        let mut best: Option<(usize, T)> = None;
        for (slot, &idx) in remaining.iter().enumerate() {
            let norm = candidates.norm_scores[idx];
            let score = xquad_score(categories[idx], norm, propensity, &state, config);
            let better = match best {
                None => true,
                Some((b, best_score)) => match score.partial_cmp(&best_score) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => norm > candidates.norm_scores[remaining[b]],
                    _ => false,
                },
            };
            if better {
                best = Some((slot, score));
            }
        }
        let (slot, score) = best.expect("pool holds at least k candidates");
        let idx = remaining.remove(slot);
        let item = candidates.items[idx];
        state.push(item, categories[idx]);
        out.items.push(item);
        out.categories.push(categories[idx]);
        out.scores.push(score);
    }
    Ok(out)
}

/// Writes `user_id,rank,item_id,category,xquad_score` rows, rank from 1.
pub fn write_reranked<T: Scalar, W: Write>(
    lists: &[Reranked<T>],
    table: &RatingsTable,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["user_id", "rank", "item_id", "category", "xquad_score"])?;
    for list in lists {
        for (pos, &item) in list.items.iter().enumerate() {
            out.write_record([
                table.user_name(list.user),
                &(pos + 1).to_string(),
                table.item_name(item),
                list.categories[pos].as_str(),
                &list.scores[pos].to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io("<reranked csv>", e))?;
    Ok(())
}

/// Reads lists written by [`write_reranked`]. Rows of one user must be
/// contiguous and in rank order.
pub fn read_reranked<T: Scalar, R: Read>(
    reader: R,
    table: &RatingsTable,
) -> Result<Vec<Reranked<T>>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut lists: Vec<Reranked<T>> = Vec::new();
    for (n, row) in input.records().enumerate() {
        let row = row?;
        let line = n + 2;
        if row.len() != 5 {
            return Err(Error::parse(line, "expected 5 re-ranked fields"));
        }
        let user = table
            .user_id(&row[0])
            .ok_or_else(|| Error::parse(line, format!("unknown user {:?}", &row[0])))?;
        let item = table
            .item_id(&row[2])
            .ok_or_else(|| Error::parse(line, format!("unknown item {:?}", &row[2])))?;
        let category = match &row[3] {
            "long_tail" => Category::LongTail,
            "short_head" => Category::ShortHead,
            other => return Err(Error::parse(line, format!("unknown category {other:?}"))),
        };
        let score = row[4]
            .parse::<f64>()
            .map(T::of)
            .map_err(|_| Error::parse(line, format!("bad score {:?}", &row[4])))?;
        if !matches!(lists.last(), Some(last) if last.user == user) {
            lists.push(Reranked {
                user,
                items: vec![],
                categories: vec![],
                scores: vec![],
            });
        }
        let last = lists.last_mut().expect("just pushed");
        last.items.push(item);
        last.categories.push(category);
        last.scores.push(score);
    }
    Ok(lists)
}

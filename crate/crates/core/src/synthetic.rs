//! Deterministic synthetic rating data with a planted popularity skew.
//!
//! Items are split into a popular head and a long tail; each user draws most
//! ratings from the head and a personal share from the tail, with a mild
//! preference for one of a few item clusters so a factor model has signal
//! to learn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{RatingRecord, RatingsTable};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    /// Fraction of items in the planted head.
    pub head_items: f64,
    /// Mean share of a user's ratings drawn from the head.
    pub head_share: f64,
    pub clusters: usize,
    /// Weight multiplier for items in a user's preferred cluster.
    pub affinity: f64,
    /// Exponent of the Zipf-like weights inside each segment.
    pub zipf: f64,
    pub min_profile: usize,
    pub max_profile: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            users: 200,
            items: 100,
            head_items: 0.2,
            head_share: 0.8,
            clusters: 4,
            affinity: 4.0,
            zipf: 0.6,
            min_profile: 8,
            max_profile: 20,
            seed: 7,
        }
    }
}

pub fn planted_popularity(spec: &SyntheticSpec) -> RatingsTable {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_head = ((spec.items as f64 * spec.head_items).round() as usize).clamp(1, spec.items - 1);
    let cluster_of: Vec<usize> = (0..spec.items).map(|i| i % spec.clusters.max(1)).collect();
    // Zipf-like weights inside each segment
    let weight = |rank: usize| 1.0 / (rank as f64 + 1.0).powf(spec.zipf);

    let mut records = Vec::new();
    for u in 0..spec.users {
        let liked = rng.gen_range(0..spec.clusters.max(1));
        let tail_share = ((1.0 - spec.head_share) * rng.gen_range(0.2..1.8)).clamp(0.02, 0.9);
        let n = rng
            .gen_range(spec.min_profile..=spec.max_profile)
            .min(spec.items);
        let affinity = |i: usize| {
            if cluster_of[i] == liked {
                spec.affinity
            } else {
                1.0
            }
        };
        let mut weights: Vec<f64> = (0..spec.items)
            .map(|i| {
                let rank = if i < n_head { i } else { i - n_head };
                weight(rank) * affinity(i)
            })
            .collect();
        for _ in 0..n {
            let head_mass: f64 = weights[..n_head].iter().sum();
            let tail_mass: f64 = weights[n_head..].iter().sum();
            let from_tail = match (head_mass > 0.0, tail_mass > 0.0) {
                (false, false) => break,
                (true, false) => false,
                (false, true) => true,
                (true, true) => rng.gen_bool(tail_share),
            };
            let (lo, hi, mass) = if from_tail {
                (n_head, spec.items, tail_mass)
            } else {
                (0, n_head, head_mass)
            };
            let mut target = rng.gen_range(0.0..mass);
            let mut item = hi - 1;
            for (i, &w) in weights.iter().enumerate().take(hi).skip(lo) {
                if w > 0.0 && target < w {
                    item = i;
                    break;
                }
                target -= w;
            }
            while weights[item] == 0.0 {
                item -= 1;
            }
            // sampling without replacement
            weights[item] = 0.0;
            records.push(RatingRecord {
                user: format!("{}", u + 1),
                item: format!("{}", item + 1),
                value: rng.gen_range(1..=5) as f64,
                timestamp: None,
            });
        }
    }
    RatingsTable::from_records(records).expect("generated pairs are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::popularity::{item_popularity, partition_items};

    #[test]
    fn deterministic_and_skewed() {
        let spec = SyntheticSpec::default();
        let a = planted_popularity(&spec);
        assert_eq!(a, planted_popularity(&spec));
        assert_eq!(a.n_users(), 200);
        for u in a.active_users() {
            assert!(a.user_ratings(u).len() >= spec.min_profile);
        }
        let p = partition_items(&item_popularity(&a), 0.8).unwrap();
        // the planted head should cover roughly the head share of ratings
        let head = p.short_head().len();
        assert!(head < a.n_items() / 2, "head size {head}");
    }
}

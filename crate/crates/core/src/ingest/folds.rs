use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::table::RatingsTable;
use crate::error::{Error, Result};

/// One cross-validation fold. Both halves share the parent's vocabularies.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: RatingsTable,
    pub test: RatingsTable,
}

/// Per-user stratified k-fold split.
///
/// Each user's ratings are shuffled and dealt round-robin, from a random
/// starting fold, so every user contributes `⌊n/k⌋` or `⌈n/k⌉` test ratings
/// to each fold.
pub fn kfold_split(table: &RatingsTable, k_folds: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k_folds < 2 {
        return Err(Error::Config(format!(
            "k_folds must be at least 2, got {k_folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; table.len()];
    let mut offset = 0;
    for u in 0..table.n_users() {
        let user = crate::ids::UserId(u as u32);
        let n = table.user_ratings(user).len();
        if n < k_folds {
            return Err(Error::TooFewRatings {
                user: table.user_name(user).to_owned(),
                count: n,
                folds: k_folds,
            });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let start = rng.gen_range(0..k_folds);
        for (pos, &j) in order.iter().enumerate() {
            assignment[offset + j] = (start + pos) % k_folds;
        }
        offset += n;
    }

    (0..k_folds)
        .map(|fold_id| {
            let mut train = Vec::with_capacity(table.len());
            let mut test = Vec::new();
            for (r, &f) in table.ratings().iter().zip(&assignment) {
                if f == fold_id {
                    test.push(*r);
                } else {
                    train.push(*r);
                }
            }
            Ok(FoldSplit {
                fold_id,
                train: RatingsTable::from_parts(
                    train,
                    table.users().clone(),
                    table.items().clone(),
                )?,
                test: RatingsTable::from_parts(test, table.users().clone(), table.items().clone())?,
            })
        })
        .collect()
}

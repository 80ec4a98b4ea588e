use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::table::{Rating, RatingsTable, Vocab};
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};

/// Order in which the user and item count thresholds are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterOrder {
    /// Drop sparse users, then sparse items, one pass each.
    #[default]
    UsersThenItems,
    /// Drop sparse items, then sparse users, one pass each.
    ItemsThenUsers,
    /// Alternate both filters until nothing changes (k-core).
    UntilStable,
}

fn drop_sparse_users(ratings: Vec<Rating>, n_users: usize, min: usize) -> Vec<Rating> {
    let mut counts = vec![0usize; n_users];
    for r in &ratings {
        counts[r.user.index()] += 1;
    }
    ratings
        .into_iter()
        .filter(|r| counts[r.user.index()] >= min)
        .collect()
}

fn drop_sparse_items(ratings: Vec<Rating>, n_items: usize, min: usize) -> Vec<Rating> {
    let mut counts = vec![0usize; n_items];
    for r in &ratings {
        counts[r.item.index()] += 1;
    }
    ratings
        .into_iter()
        .filter(|r| counts[r.item.index()] >= min)
        .collect()
}

/// Removes users with fewer than `min_user_ratings` ratings and items with
/// fewer than `min_item_ratings`, then re-densifies both vocabularies.
///
/// With the single-pass orders each threshold is evaluated once, on the
/// output of the preceding step, so the second filter can push some
/// survivors of the first below its threshold. Only
/// [`FilterOrder::UntilStable`] guarantees both thresholds on the result.
pub fn filter_table(
    table: &RatingsTable,
    min_user_ratings: usize,
    min_item_ratings: usize,
    order: FilterOrder,
) -> Result<RatingsTable> {
    let (nu, ni) = (table.n_users(), table.n_items());
    let mut ratings = table.ratings().to_vec();
    match order {
        FilterOrder::UsersThenItems => {
            ratings = drop_sparse_users(ratings, nu, min_user_ratings);
            ratings = drop_sparse_items(ratings, ni, min_item_ratings);
        }
        FilterOrder::ItemsThenUsers => {
            ratings = drop_sparse_items(ratings, ni, min_item_ratings);
            ratings = drop_sparse_users(ratings, nu, min_user_ratings);
        }
        FilterOrder::UntilStable => loop {
            let before = ratings.len();
            ratings = drop_sparse_users(ratings, nu, min_user_ratings);
            ratings = drop_sparse_items(ratings, ni, min_item_ratings);
            if ratings.len() == before {
                break;
            }
        },
    }
    if ratings.is_empty() {
        return Err(Error::EmptyResult {
            min_user: min_user_ratings,
            min_item: min_item_ratings,
        });
    }
    redensify(table, ratings)
}

/// Rebuilds vocabularies containing only ids that still have ratings.
pub(crate) fn redensify(parent: &RatingsTable, ratings: Vec<Rating>) -> Result<RatingsTable> {
    let mut user_map = vec![u32::MAX; parent.n_users()];
    let mut item_map = vec![u32::MAX; parent.n_items()];
    for r in &ratings {
        user_map[r.user.index()] = 0;
        item_map[r.item.index()] = 0;
    }
    // parent vocab is already in natural order, so assigning in index order keeps it
    let mut next = 0;
    for slot in user_map.iter_mut().filter(|s| **s == 0) {
        *slot = next;
        next += 1;
    }
    next = 0;
    for slot in item_map.iter_mut().filter(|s| **s == 0) {
        *slot = next;
        next += 1;
    }
    let users = Vocab::from_ids(
        (0..parent.n_users())
            .filter(|&u| user_map[u] != u32::MAX)
            .map(|u| parent.users().name(u as u32)),
    );
    let items = Vocab::from_ids(
        (0..parent.n_items())
            .filter(|&i| item_map[i] != u32::MAX)
            .map(|i| parent.items().name(i as u32)),
    );
    let ratings = ratings
        .into_iter()
        .map(|r| Rating {
            user: UserId(user_map[r.user.index()]),
            item: ItemId(item_map[r.item.index()]),
            ..r
        })
        .collect();
    RatingsTable::from_parts(ratings, Arc::new(users), Arc::new(items))
}

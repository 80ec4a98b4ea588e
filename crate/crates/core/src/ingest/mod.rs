//! Rating ingestion: parsing raw dumps, distant-tail filtering and
//! per-user stratified cross-validation folds.

mod filter;
mod folds;
mod parse;
mod table;

pub use filter::{filter_table, FilterOrder};
pub use folds::{kfold_split, FoldSplit};
pub use parse::{
    parse_generic_csv, parse_generic_csv_with, parse_movielens, CsvOptions, DuplicatePolicy,
};
pub use table::{Rating, RatingRecord, RatingsTable, Vocab};

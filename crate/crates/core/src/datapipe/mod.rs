//! Dataset ingestion, leakage-safe preprocessing and stratified sampling.

mod dataset;
pub mod lingspam;
pub mod nslkdd;
mod split;
pub mod synthetic;
pub mod tfidf;

pub use dataset::{DatasetSplit, Part};
pub use lingspam::{load_lingspam, LingSpam};
pub use nslkdd::{load_nslkdd, CategoricalEncoder, NslKdd, TabularTransformer};
pub use split::{class_weights, largest_remainder, select_eval_subset, stratified_folds, stratified_holdout};
pub use tfidf::{TfidfConfig, TfidfVectorizer};

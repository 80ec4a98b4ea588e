use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{Hyperparams, ScoreNormalization};
use crate::error::{Error, Result};
use crate::ingest::{
    parse_generic_csv_with, parse_movielens, CsvOptions, DuplicatePolicy, FilterOrder, RatingsTable,
};
use crate::rerank::{SmoothForm, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// `UserID::MovieID::Rating::Timestamp`
    #[default]
    Movielens,
    /// `user,item,rating[,timestamp]`, optional header row
    Csv,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "movielens" => Ok(DatasetFormat::Movielens),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

/// Everything that determines a run. Keys mirror the CLI flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub format: DatasetFormat,
    /// Label for the `dataset` column; defaults to the dataset file stem.
    pub name: Option<String>,
    pub min_user_ratings: usize,
    pub min_item_ratings: usize,
    pub filter_order: FilterOrder,
    pub head_ratio: f64,
    pub folds: usize,
    pub seed: u64,
    pub factors: usize,
    pub regularization: f64,
    pub iterations: usize,
    pub candidates: usize,
    pub topk: usize,
    pub lambdas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub smooth_form: SmoothForm,
    pub score_normalization: ScoreNormalization,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        ExperimentConfig {
            dataset: PathBuf::new(),
            format: DatasetFormat::default(),
            name: None,
            min_user_ratings: 20,
            min_item_ratings: 20,
            filter_order: FilterOrder::default(),
            head_ratio: 0.8,
            folds: 5,
            seed: hp.seed,
            factors: hp.factors,
            regularization: hp.regularization,
            iterations: hp.iterations,
            candidates: 100,
            topk: 10,
            lambdas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            variants: Variant::ALL.to_vec(),
            smooth_form: SmoothForm::default(),
            score_normalization: ScoreNormalization::default(),
            out: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            factors: self.factors,
            regularization: self.regularization,
            iterations: self.iterations,
            seed: self.seed,
        }
    }

    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if let Some(l) = self.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return fail(format!("lambda {l} outside [0, 1]"));
        }
        if self.lambdas.is_empty() || self.variants.is_empty() {
            return fail("need at least one lambda and one variant".into());
        }
        if !(self.head_ratio > 0.0 && self.head_ratio < 1.0) {
            return fail(format!("head ratio {} outside (0, 1)", self.head_ratio));
        }
        if self.folds < 2 {
            return fail(format!("need at least 2 folds, got {}", self.folds));
        }
        if self.topk == 0 || self.topk > self.candidates {
            return fail(format!(
                "need 1 <= topk <= candidates, got {} and {}",
                self.topk, self.candidates
            ));
        }
        if self.factors == 0 {
            return fail("factors must be at least 1".into());
        }
        Ok(())
    }
}

fn looks_like_header(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| l.split(',').nth(2))
        .is_some_and(|f| f.trim().parse::<f64>().is_err())
}

/// Parses a dataset file. CSV headers are detected from the first row;
/// duplicate CSV pairs keep their last occurrence.
pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<RatingsTable> {
    let path = path.as_ref();
    match format {
        DatasetFormat::Movielens => parse_movielens(path),
        DatasetFormat::Csv => {
            let mut head = String::new();
            {
                use std::io::BufRead;
                let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let mut reader = std::io::BufReader::new(file);
                while head.trim().is_empty() {
                    if reader
                        .read_line(&mut head)
                        .map_err(|e| Error::io(path, e))?
                        == 0
                    {
                        break;
                    }
                }
            }
            parse_generic_csv_with(
                path,
                CsvOptions {
                    has_header: looks_like_header(&head),
                    duplicates: DuplicatePolicy::KeepLast,
                },
            )
        }
    }
}

use std::path::PathBuf;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use super::config::{load_dataset, ExperimentConfig};
use super::manifest::{DatasetCounts, FoldPartition, RunManifest, StageTiming};
use super::report::{aggregate, write_rows, MetricRow, BASELINE_VARIANT};
use crate::baseline::{generate_candidates, train, CandidateList};
use crate::error::{Error, Result};
use crate::ids::UserId;
use crate::ingest::{filter_table, kfold_split, FoldSplit, RatingsTable};
use crate::metrics::{evaluate, RecommendationLog};
use crate::popularity::{
    item_popularity, partition_items, user_propensity, PopularityPartition, UserPropensity,
};
use crate::rerank::{rerank, RerankConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Per-fold rows: for each fold the baseline row, then variants × λ.
    pub rows: Vec<MetricRow>,
    /// Cross-fold means in the same group order.
    pub means: Vec<MetricRow>,
    pub manifest: RunManifest,
}

impl ExperimentOutput {
    /// Per-fold rows followed by mean rows.
    pub fn all_rows(&self) -> Vec<MetricRow> {
        self.rows.iter().chain(&self.means).cloned().collect()
    }
}

struct Timer<'a> {
    manifest: &'a mut RunManifest,
}

impl Timer<'_> {
    fn time<R>(&mut self, fold: Option<usize>, stage: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.manifest.timings.push(StageTiming {
            fold,
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs the configured experiment in `f64`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with::<f64>(config)
}

pub fn run_experiment_with<T: Scalar>(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut manifest = RunManifest::new(config);
    let mut rows = Vec::new();
    match run_into::<T>(config, &mut manifest, &mut rows) {
        Ok(means) => {
            manifest.complete = true;
            Ok(ExperimentOutput {
                rows,
                means,
                manifest,
            })
        }
        Err(e) => Err(e),
    }
}

/// Runs and writes `results.csv` and `manifest.json` under `config.out`.
///
/// On failure the rows finished so far and a manifest flagged incomplete are
/// still written before the error is returned.
pub fn run_to_dir(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let out: PathBuf = config.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut manifest = RunManifest::new(config);
    let mut rows = Vec::new();
    let result = run_into::<f64>(config, &mut manifest, &mut rows);
    let results_path = out.join("results.csv");
    let file = std::fs::File::create(&results_path).map_err(|e| Error::io(&results_path, e))?;
    match result {
        Ok(means) => {
            manifest.complete = true;
            let all: Vec<MetricRow> = rows.iter().chain(&means).cloned().collect();
            write_rows(&all, std::io::BufWriter::new(file))?;
            manifest.write(out.join("manifest.json"))?;
            Ok(ExperimentOutput {
                rows,
                means,
                manifest,
            })
        }
        Err(e) => {
            write_rows(&rows, std::io::BufWriter::new(file))?;
            manifest.error = Some(e.to_string());
            manifest.write(out.join("manifest.json"))?;
            Err(e)
        }
    }
}

fn run_into<T: Scalar>(
    config: &ExperimentConfig,
    manifest: &mut RunManifest,
    rows: &mut Vec<MetricRow>,
) -> Result<Vec<MetricRow>> {
    config.validate()?;
    let name = config.dataset_name();
    let mut timer = Timer { manifest };

    let raw = timer.time(None, "load", || {
        load_dataset(&config.dataset, config.format)
    })?;
    let table = timer.time(None, "filter", || {
        filter_table(
            &raw,
            config.min_user_ratings,
            config.min_item_ratings,
            config.filter_order,
        )
    })?;
    timer.manifest.counts = DatasetCounts {
        raw_ratings: raw.len(),
        raw_users: raw.n_users(),
        raw_items: raw.n_items(),
        ratings: table.len(),
        users: table.n_users(),
        items: table.n_items(),
    };
    info!(
        "{name}: {} ratings / {} users / {} items after filtering ({} raw)",
        table.len(),
        table.n_users(),
        table.n_items(),
        raw.len()
    );
    drop(raw);
    let folds = timer.time(None, "split", || {
        kfold_split(&table, config.folds, config.seed)
    })?;

    for fold in &folds {
        let id = fold.fold_id;
        let fold_rows = run_fold::<T>(config, &name, fold, &mut timer)?;
        rows.extend(fold_rows);
        info!("{name}: fold {id} done");
    }
    aggregate(rows)
}

fn run_fold<T: Scalar>(
    config: &ExperimentConfig,
    name: &str,
    fold: &FoldSplit,
    timer: &mut Timer<'_>,
) -> Result<Vec<MetricRow>> {
    let id = fold.fold_id;
    let partition = timer
        .time(Some(id), "partition", || {
            partition_items(&item_popularity(&fold.train), config.head_ratio)
        })
        .map_err(|e| e.in_stage("partition", id))?;
    timer.manifest.partitions.push(FoldPartition {
        fold: id,
        threshold: partition.threshold(),
        short_head_items: partition.short_head().len(),
        long_tail_items: partition.long_tail().len(),
        train_ratings: fold.train.len(),
        test_ratings: fold.test.len(),
    });

    let model = timer
        .time(Some(id), "train", || {
            train::<T>(&fold.train, &config.hyperparams())
        })
        .map_err(|e| e.in_stage("train", id))?;
    let candidates = timer
        .time(Some(id), "candidates", || {
            generate_candidates(
                &model,
                &fold.train,
                config.candidates,
                config.score_normalization,
            )
        })
        .map_err(|e| e.in_stage("candidates", id))?;
    let propensities: Vec<UserPropensity<T>> = candidates
        .iter()
        .map(|c| user_propensity(fold.train.profile(c.user), &partition))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("propensity", id))?;

    let mut rows = Vec::new();
    let base_log = baseline_log(&candidates, config.topk)
        .and_then(|log| evaluate::<T>(&log, &partition, &fold.test, config.topk))
        .map_err(|e| e.in_stage("evaluate", id))?;
    rows.push(MetricRow::from_report(
        name,
        id,
        BASELINE_VARIANT,
        None,
        &base_log,
    ));

    for &variant in &config.variants {
        for &lambda in &config.lambdas {
            let rerank_config = RerankConfig::new(T::of(lambda), variant)
                .with_k(config.topk)
                .with_candidate_depth(config.candidates)
                .with_smooth_form(config.smooth_form);
            let log = timer
                .time(Some(id), "rerank", || {
                    rerank_all(
                        &candidates,
                        &propensities,
                        &partition,
                        &rerank_config,
                        &fold.train,
                    )
                })
                .map_err(|e| e.in_stage("rerank", id))?;
            let report = evaluate::<T>(&log, &partition, &fold.test, config.topk)
                .map_err(|e| e.in_stage("evaluate", id))?;
            rows.push(MetricRow::from_report(
                name,
                id,
                variant.as_str(),
                Some(lambda),
                &report,
            ));
        }
    }
    Ok(rows)
}

/// The first `k` candidates of every user, without re-ranking.
pub(crate) fn baseline_log<T: Scalar>(
    candidates: &[CandidateList<T>],
    k: usize,
) -> Result<RecommendationLog> {
    RecommendationLog::new(
        candidates
            .iter()
            .map(|c| (c.user, c.items.iter().take(k).copied().collect())),
    )
}

pub(crate) fn rerank_all<T: Scalar>(
    candidates: &[CandidateList<T>],
    propensities: &[UserPropensity<T>],
    partition: &PopularityPartition,
    config: &RerankConfig<T>,
    train_table: &RatingsTable,
) -> Result<RecommendationLog> {
    let lists: Vec<(UserId, Vec<crate::ids::ItemId>)> = candidates
        .par_iter()
        .zip(propensities)
        .map(|(c, p)| {
            rerank(c, partition, p, config)
                .map(|r| (r.user, r.items))
                .map_err(|e| match e {
                    Error::TooFewCandidates {
                        available,
                        requested,
                        ..
                    } => Error::TooFewCandidates {
                        user: train_table.user_name(c.user).to_string(),
                        available,
                        requested,
                    },
                    other => other,
                })
        })
        .collect::<Result<_>>()?;
    RecommendationLog::new(lists)
}

use std::path::Path;

use poprerank::experiment::{
    run_experiment, run_experiment_with, run_to_dir, DatasetFormat, ExperimentConfig, MetricRow,
    RunManifest, BASELINE_VARIANT, MEAN_FOLD,
};
use poprerank::ingest::{filter_table, parse_generic_csv};
use poprerank::rerank::Variant;
use poprerank::synthetic::{planted_popularity, SyntheticSpec};

fn config(dir: &Path) -> ExperimentConfig {
    let data = dir.join("planted.csv");
    planted_popularity(&SyntheticSpec::default())
        .write_canonical_file(&data)
        .unwrap();
    ExperimentConfig {
        dataset: data,
        format: DatasetFormat::Csv,
        min_user_ratings: 5,
        min_item_ratings: 5,
        // ten factors memorize a catalog this small
        factors: 4,
        iterations: 8,
        lambdas: vec![0.0, 0.5, 0.8],
        out: dir.join("out"),
        ..ExperimentConfig::default()
    }
}

fn find<'a>(
    rows: &'a [MetricRow],
    fold: &str,
    variant: &str,
    lambda: Option<f64>,
) -> &'a MetricRow {
    rows.iter()
        .find(|r| r.fold == fold && r.variant == variant && r.lambda == lambda)
        .unwrap()
}

fn same_metrics(a: &MetricRow, b: &MetricRow) -> bool {
    (
        a.ndcg,
        a.arp,
        a.aplt,
        a.aclt_literal,
        a.lt_coverage,
        a.n_users,
    ) == (
        b.ndcg,
        b.arp,
        b.aplt,
        b.aclt_literal,
        b.lt_coverage,
        b.n_users,
    )
}

#[test]
fn lambda_zero_rows_equal_baseline_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(dir.path())).unwrap();
    assert_eq!(out.rows.len(), 5 * (1 + 2 * 3));
    for fold in 0..5 {
        let f = fold.to_string();
        let base = find(&out.rows, &f, BASELINE_VARIANT, None);
        for v in Variant::ALL {
            assert!(same_metrics(
                base,
                find(&out.rows, &f, v.as_str(), Some(0.0))
            ));
        }
    }
}

#[test]
fn long_tail_share_grows_with_lambda_on_planted_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(dir.path())).unwrap();
    for v in Variant::ALL {
        let lo = find(&out.means, MEAN_FOLD, v.as_str(), Some(0.0));
        let hi = find(&out.means, MEAN_FOLD, v.as_str(), Some(0.8));
        assert!(hi.aplt > lo.aplt, "{v}: {} vs {}", hi.aplt, lo.aplt);
    }
}

#[test]
fn manifest_counts_match_filter() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    let out = run_to_dir(&c).unwrap();
    let manifest = RunManifest::read(c.out.join("manifest.json")).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.counts, out.manifest.counts);
    let raw = parse_generic_csv(&c.dataset, true).unwrap();
    let filtered = filter_table(&raw, 5, 5, c.filter_order).unwrap();
    assert_eq!(
        (
            manifest.counts.ratings,
            manifest.counts.users,
            manifest.counts.items
        ),
        (filtered.len(), filtered.n_users(), filtered.n_items())
    );
    assert_eq!(manifest.partitions.len(), 5);
    let total: usize = manifest.partitions.iter().map(|p| p.test_ratings).sum();
    assert_eq!(total, filtered.len());

    let text = std::fs::read_to_string(c.out.join("results.csv")).unwrap();
    assert!(text.starts_with(
        "dataset,fold,variant,lambda,ndcg,arp,aplt,aclt_literal,lt_coverage,n_users\n"
    ));
    assert_eq!(text.lines().count(), 1 + out.rows.len() + out.means.len());
}

#[test]
fn failed_run_leaves_incomplete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        min_user_ratings: 1000,
        ..config(dir.path())
    };
    assert!(run_to_dir(&c).is_err());
    let manifest = RunManifest::read(c.out.join("manifest.json")).unwrap();
    assert!(!manifest.complete);
    assert!(manifest.error.is_some());
}

#[test]
fn f32_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment_with::<f32>(&config(dir.path())).unwrap();
    for row in &out.means {
        assert!((0.0..=1.0).contains(&row.ndcg));
        assert!((0.0..=1.0).contains(&row.aplt));
    }
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use poprerank::baseline::{
    generate_candidates, read_candidates, train, write_candidates, write_checkpoint,
};
use poprerank::experiment::{
    load_dataset, run_to_dir, write_rows, DatasetFormat, ExperimentConfig, MetricRow,
};
use poprerank::ingest::{filter_table, kfold_split, RatingsTable};
use poprerank::metrics::{evaluate, RecommendationLog};
use poprerank::popularity::{item_popularity, partition_items, user_propensity};
use poprerank::rerank::{rerank, write_reranked, RerankConfig, Variant};
use poprerank::{ItemId, UserId};

#[derive(Parser)]
#[command(
    name = "poprerank",
    version,
    about = "Popularity-aware xQuAD re-ranking experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter and split a dataset into canonical CSVs.
    Prep(Opts),
    /// Train the baseline on a train CSV and write a checkpoint and candidates.
    Train(Opts),
    /// Re-rank a candidates file for every variant and lambda.
    Rerank(Opts),
    /// Score a recommendation list file.
    Eval(Opts),
    /// Full cross-validated sweep.
    Run(Opts),
}

#[derive(Args)]
struct Opts {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    format: Option<DatasetFormat>,
    /// Dataset label used in result rows.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    min_user_ratings: Option<usize>,
    #[arg(long)]
    min_item_ratings: Option<usize>,
    #[arg(long)]
    head_ratio: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    /// Candidate list depth.
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    factors: Option<usize>,
    #[arg(long)]
    regularization: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,

    /// Train split in canonical CSV form.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test split in canonical CSV form.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Candidates file (`rerank`) or list file (`eval`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fold label written into metric rows.
    #[arg(long)]
    fold: Option<String>,
    /// Variant label written into metric rows.
    #[arg(long)]
    variant: Option<String>,
    /// Lambda written into metric rows.
    #[arg(long)]
    lambda: Option<f64>,
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $g:ident),* $(,)?) => {
                $(if let Some(v) = &self.$f { c.$g = v.clone(); })*
            };
        }
        set!(
            dataset => dataset,
            format => format,
            min_user_ratings => min_user_ratings,
            min_item_ratings => min_item_ratings,
            head_ratio => head_ratio,
            folds => folds,
            seed => seed,
            lambdas => lambdas,
            variants => variants,
            candidates => candidates,
            topk => topk,
            factors => factors,
            regularization => regularization,
            iterations => iterations,
            out => out,
        );
        if self.name.is_some() {
            c.name = self.name.clone();
        }
        Ok(c)
    }

    fn path<'a>(&'a self, p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        p.as_deref()
            .with_context(|| format!("--{flag} is required"))
    }

    /// Train and optional test tables on a shared vocabulary.
    fn tables(&self, need_test: bool) -> Result<(RatingsTable, Option<RatingsTable>)> {
        let train_path = self.path(&self.train, "train")?;
        let train = load_dataset(train_path, DatasetFormat::Csv)
            .with_context(|| format!("reading {}", train_path.display()))?;
        let test = match &self.test {
            Some(p) => Some(
                load_dataset(p, DatasetFormat::Csv)
                    .with_context(|| format!("reading {}", p.display()))?,
            ),
            None if need_test => bail!("--test is required"),
            None => None,
        };
        Ok(match test {
            Some(test) => {
                let (a, b) = RatingsTable::align(&train, &test)?;
                (a, Some(b))
            }
            None => (train, None),
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn prep(opts: &Opts) -> Result<()> {
    let c = opts.config()?;
    let raw = load_dataset(&c.dataset, c.format)
        .with_context(|| format!("reading {}", c.dataset.display()))?;
    let table = filter_table(&raw, c.min_user_ratings, c.min_item_ratings, c.filter_order)?;
    println!(
        "{} ratings / {} users / {} items ({} ratings before filtering)",
        table.len(),
        table.n_users(),
        table.n_items(),
        raw.len()
    );
    std::fs::create_dir_all(&c.out)?;
    table.write_canonical_file(c.out.join("filtered.csv"))?;
    for fold in kfold_split(&table, c.folds, c.seed)? {
        let dir = c.out.join(format!("fold{}", fold.fold_id));
        std::fs::create_dir_all(&dir)?;
        fold.train.write_canonical_file(dir.join("train.csv"))?;
        fold.test.write_canonical_file(dir.join("test.csv"))?;
    }
    info!("wrote {} folds under {}", c.folds, c.out.display());
    Ok(())
}

fn train_cmd(opts: &Opts) -> Result<()> {
    let c = opts.config()?;
    let (table, _) = opts.tables(false)?;
    let model = train::<f64>(&table, &c.hyperparams())?;
    write_checkpoint(&model, &table, create(&c.out.join("model.csv"))?)?;
    let lists = generate_candidates(&model, &table, c.candidates, c.score_normalization)?;
    write_candidates(&lists, &table, create(&c.out.join("candidates.csv"))?)?;
    info!(
        "wrote model and {} candidate lists to {}",
        lists.len(),
        c.out.display()
    );
    Ok(())
}

fn rerank_cmd(opts: &Opts) -> Result<()> {
    let c = opts.config()?;
    c.validate()?;
    let (table, _) = opts.tables(false)?;
    let input = opts.path(&opts.input, "input")?;
    let lists = read_candidates::<f64, _>(BufReader::new(File::open(input)?), &table)?;
    let partition = partition_items(&item_popularity(&table), c.head_ratio)?;
    let propensities = lists
        .iter()
        .map(|l| user_propensity(table.profile(l.user), &partition))
        .collect::<poprerank::Result<Vec<_>>>()?;
    for &variant in &c.variants {
        for &lambda in &c.lambdas {
            let config = RerankConfig::new(lambda, variant)
                .with_k(c.topk)
                .with_candidate_depth(c.candidates)
                .with_smooth_form(c.smooth_form);
            let out = lists
                .iter()
                .zip(&propensities)
                .map(|(l, p)| rerank(l, &partition, p, &config))
                .collect::<poprerank::Result<Vec<_>>>()?;
            let path = c.out.join(format!("reranked-{variant}-{lambda}.csv"));
            write_reranked(&out, &table, create(&path)?)?;
        }
    }
    Ok(())
}

/// Reads any `user_id,rank,item_id,...` file into a log of its first `k` items.
fn read_lists(path: &Path, table: &RatingsTable, k: usize) -> Result<RecommendationLog> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no {name} column", path.display()))
    };
    let (user_col, rank_col, item_col) = (col("user_id")?, col("rank")?, col("item_id")?);
    let mut lists: BTreeMap<UserId, Vec<(usize, ItemId)>> = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let user = table
            .user_id(&row[user_col])
            .with_context(|| format!("unknown user {}", &row[user_col]))?;
        let item = table
            .item_id(&row[item_col])
            .with_context(|| format!("unknown item {}", &row[item_col]))?;
        let rank: usize = row[rank_col].parse().context("bad rank")?;
        lists.entry(user).or_default().push((rank, item));
    }
    Ok(RecommendationLog::new(lists.into_iter().map(
        |(u, mut v)| {
            v.sort_unstable();
            (u, v.into_iter().take(k).map(|(_, i)| i).collect())
        },
    ))?)
}

fn eval_cmd(opts: &Opts) -> Result<()> {
    let c = opts.config()?;
    let (train, test) = opts.tables(true)?;
    let test = test.expect("required above");
    let input = opts.path(&opts.input, "input")?;
    let log = read_lists(input, &train, c.topk)?;
    let partition = partition_items(&item_popularity(&train), c.head_ratio)?;
    let report = evaluate::<f64>(&log, &partition, &test, c.topk)?;
    let variant = opts.variant.clone().unwrap_or_else(|| {
        input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let row = MetricRow {
        fold: opts.fold.clone().unwrap_or_else(|| "0".into()),
        ..MetricRow::from_report(&c.dataset_name(), 0, &variant, opts.lambda, &report)
    };
    std::fs::create_dir_all(&c.out)?;
    write_rows(&[row], create(&c.out.join("metrics.csv"))?)?;
    Ok(())
}

fn run_cmd(opts: &Opts) -> Result<()> {
    let c = opts.config()?;
    let out = run_to_dir(&c)?;
    println!(
        "{} rows ({} folds) written to {}",
        out.rows.len() + out.means.len(),
        c.folds,
        c.out.join("results.csv").display()
    );
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Prep(o) => prep(o),
        Command::Train(o) => train_cmd(o),
        Command::Rerank(o) => rerank_cmd(o),
        Command::Eval(o) => eval_cmd(o),
        Command::Run(o) => run_cmd(o),
    }
}

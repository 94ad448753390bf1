use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rrr_ann::bench::{
    self, brute_force_knn, cached_ground_truth, gnuplot_script, load_fvecs, load_ivecs, mean_recall, timed_queries,
    write_fvecs, write_ivecs, Dataset, SweepGrid, SynthKind,
};
use rrr_ann::{
    Error, ErrorCategory, IndexConfig, LocalTrain, Metric, QueryParams, RrrIndex, ScoringMode, TrainSource,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "rrrann", version, about = "Build, query and benchmark reduced-rank regression ANN indexes")]
struct Cli {
    /// Worker threads for building, ground truth and batch work. Timed query
    /// loops always run on one thread.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from an .fvecs corpus.
    Build(BuildArgs),
    /// Compute exact nearest neighbors into an .ivecs file.
    Gt(GtArgs),
    /// Query an index and report recall and throughput.
    Query(QueryArgs),
    /// Run a parameter sweep and write a CSV report.
    Sweep(SweepArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Number of clusters (default scales with the corpus size).
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Reduced dimension; 0 disables reduction.
    #[arg(long)]
    reduced_dim: Option<usize>,
    #[arg(long)]
    no_rerank: bool,
    #[arg(long)]
    no_quantize: bool,
    /// Quantize every row, including the leading one.
    #[arg(long)]
    no_mixed_precision: bool,
    /// Balanced clustering with this maximum cluster size difference.
    #[arg(long, value_name = "DELTA")]
    balanced: Option<usize>,
    /// Training queries: an .fvecs file, or `corpus`.
    #[arg(long, default_value = "corpus")]
    train: String,
    /// `routed` or `cluster`.
    #[arg(long, default_value = "routed")]
    train_local: String,
    /// Clusters each training query is routed to.
    #[arg(long)]
    train_w: Option<usize>,
    /// Score with exact inner products instead of regression models.
    #[arg(long)]
    exact_ivf: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GtArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value = "euclidean")]
    metric: Metric,
    /// Output path (default: cached next to the corpus).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long)]
    w: usize,
    #[arg(long)]
    t: usize,
    #[arg(long)]
    no_rerank: bool,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Append a one-row summary in the sweep CSV format.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the returned ids as .ivecs.
    #[arg(long)]
    results: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Ground truth (default: cached next to the corpus).
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    csv: PathBuf,
    /// Also write a gnuplot script plotting the CSV.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    d: usize,
    /// `gaussian`, `clustered[:BLOBS]` or `shifted`.
    #[arg(long, default_value = "gaussian")]
    kind: String,
    /// Training queries written with `--kind shifted`.
    #[arg(long, default_value_t = 0)]
    train: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes PREFIX.base.fvecs, PREFIX.query.fvecs and,
    /// for shifted data, PREFIX.train.fvecs.
    #[arg(long)]
    out: PathBuf,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

fn build(a: BuildArgs) -> Result<(), Error> {
    let corpus = load_fvecs(&a.data)?;
    if corpus.rows() == 0 {
        return Err(Error::Data(format!("{} holds no vectors", a.data.display())));
    }
    let mut cfg = IndexConfig::for_corpus(a.metric, &corpus).with_seed(a.seed);
    if let Some(l) = a.clusters {
        cfg.clusters = l;
    }
    if let Some(s) = a.reduced_dim {
        cfg.rrr.reduced_dim = (s > 0).then_some(s);
        cfg.rrr.rank = cfg.rrr.rank.min(if s > 0 { s } else { corpus.cols() });
    }
    if let Some(r) = a.rank {
        cfg.rrr.rank = r;
    }
    if let Some(w) = a.train_w {
        cfg.rrr.train_w = w;
    }
    cfg.rerank = !a.no_rerank;
    cfg.rrr.quantize = !a.no_quantize;
    cfg.rrr.mixed_precision = !a.no_mixed_precision;
    cfg.balance = a.balanced;
    if a.exact_ivf {
        cfg.scoring_mode = ScoringMode::ExactIvf;
    }
    cfg.rrr.local_train = match a.train_local.as_str() {
        "routed" => LocalTrain::Routed,
        "cluster" => LocalTrain::ClusterOnly,
        other => return Err(Error::Param(format!("unknown --train-local '{other}'"))),
    };
    let train = if a.train == "corpus" {
        None
    } else {
        cfg.rrr.train_source = TrainSource::QuerySample;
        Some(load_fvecs(&a.train)?)
    };

    let index = RrrIndex::build(&corpus, train.as_ref(), &cfg)?;
    let (bytes, fp) = index.serialize_with_footprint();
    std::fs::write(&a.out, &bytes)?;
    println!(
        "built {} points, {} clusters, dim {} -> {}, {} bytes ({} model, {} corpus) to {}",
        index.len(),
        index.num_clusters(),
        index.dim(),
        index.layout().input_dim,
        fp.total(),
        fp.model_bytes(),
        fp.corpus,
        a.out.display()
    );
    Ok(())
}

fn gt(a: GtArgs) -> Result<(), Error> {
    let corpus = load_fvecs(&a.data)?;
    let queries = load_fvecs(&a.queries)?;
    let (truth, path) = match a.out {
        Some(out) => {
            let truth = brute_force_knn(&corpus, &queries, a.k, a.metric)?;
            write_ivecs(&out, &truth)?;
            (truth, out)
        }
        None => (
            cached_ground_truth(&a.data, &corpus, &queries, a.k, a.metric)?,
            bench::ground_truth_path(&a.data, a.k, a.metric),
        ),
    };
    println!("{} queries, k = {}, written to {}", truth.len(), a.k, path.display());
    Ok(())
}

fn query(a: QueryArgs) -> Result<(), Error> {
    let index = RrrIndex::load(&a.index)?;
    let queries = load_fvecs(&a.queries)?;
    let params = QueryParams {
        k: a.k,
        w: a.w,
        t: a.t,
        rerank: !a.no_rerank,
    };
    let (ids, elapsed) = timed_queries(&index, &queries, &params, a.repeats)?;
    let n = queries.rows().max(1) as f64;
    let secs = elapsed.as_secs_f64().max(1e-12);
    let recall = match &a.gt {
        Some(path) => {
            let truth = load_ivecs(path)?;
            if truth.len() != queries.rows() || truth.iter().any(|t| t.len() < a.k) {
                return Err(Error::Data(format!(
                    "{} does not hold {} neighbors for each of {} queries",
                    path.display(),
                    a.k,
                    queries.rows()
                )));
            }
            Some(mean_recall(&ids, &truth, a.k))
        }
        None => None,
    };
    match recall {
        Some(r) => println!("recall@{} {r:.4}, {:.1} QPS, {:.1} us/query", a.k, n / secs, secs * 1e6 / n),
        None => println!("{:.1} QPS, {:.1} us/query", n / secs, secs * 1e6 / n),
    }
    if let Some(path) = &a.results {
        write_ivecs(path, &ids)?;
    }
    if let Some(path) = &a.csv {
        let lay = index.layout();
        let row = bench::SweepRow {
            clusters: index.num_clusters(),
            reduced_dim: if lay.input_dim < lay.dim { lay.input_dim } else { 0 },
            rank: lay.rank,
            quantized: lay.quantized,
            w: a.w,
            t: a.t,
            k: a.k,
            recall: recall.unwrap_or(f32::NAN),
            mean_latency_us: secs * 1e6 / n,
            qps: n / secs,
            index_bytes: std::fs::metadata(&a.index)?.len() as usize,
            error: None,
        };
        let csv = bench::SweepReport { rows: vec![row] }.to_csv();
        if path.exists() {
            let body = csv.split_once('\n').map_or("", |(_, rest)| rest);
            let mut existing = std::fs::read_to_string(path)?;
            existing.push_str(body);
            std::fs::write(path, existing)?;
        } else {
            std::fs::write(path, csv)?;
        }
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Error> {
    let grid = SweepGrid::from_toml(&std::fs::read_to_string(&a.grid)?)?;
    let corpus = load_fvecs(&a.data)?;
    let queries = load_fvecs(&a.queries)?;
    let truth = match &a.gt {
        Some(p) => load_ivecs(p)?,
        None => cached_ground_truth(&a.data, &corpus, &queries, grid.k, grid.metric)?,
    };
    let ds = Dataset {
        corpus,
        queries,
        train: None,
        metric: grid.metric,
        ground_truth: Some(truth),
    };
    let report = bench::sweep(&ds, &grid, a.repeats)?;
    report.write_csv(&a.csv)?;
    if let Some(script) = &a.gnuplot {
        let png = a.csv.with_extension("png");
        std::fs::write(script, gnuplot_script(&a.csv.to_string_lossy(), &png.to_string_lossy()))?;
    }
    let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} rows written to {} ({failed} failed)", report.rows.len(), a.csv.display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Error> {
    if a.d == 0 {
        return Err(Error::Param("--d must be at least 1".into()));
    }
    let ds = if a.kind == "shifted" {
        bench::synth_shifted(a.m, a.q, a.train, a.d, a.seed)
    } else {
        bench::synth_dataset(a.m, a.q, a.d, a.kind.parse::<SynthKind>()?, a.seed)
    };
    write_fvecs(with_suffix(&a.out, ".base.fvecs"), &ds.corpus)?;
    write_fvecs(with_suffix(&a.out, ".query.fvecs"), &ds.queries)?;
    if let Some(t) = &ds.train {
        write_fvecs(with_suffix(&a.out, ".train.fvecs"), t)?;
    }
    println!("wrote {} base and {} query vectors of dimension {}", a.m, a.q, a.d);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_INTERNAL);
    }
    let result = match cli.command {
        Command::Build(a) => build(a),
        Command::Gt(a) => gt(a),
        Command::Query(a) => query(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Usage => EXIT_USAGE,
                ErrorCategory::Data => EXIT_DATA,
                ErrorCategory::Internal => EXIT_INTERNAL,
            })
        }
    }
}

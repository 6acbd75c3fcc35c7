//! The `sscd` command-line surface.
//!
//! Every command is a pure function of its input files and flags: re-running
//! with identical inputs produces byte-identical outputs. Exit codes are a
//! stable scripting contract: 0 success, 1 usage error, 2 data error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::descriptor::{
    fit_whitening, match_heatmap, principal_spectrum, whitening_dimension_sweep, DescriptorSet,
};
use crate::error::{Error, Result};
use crate::eval::{distance_histograms, knn_search, EvalReport, Metric};
use crate::io::{
    load_descriptors, read_candidates, read_ground_truth, save_biased, save_descriptors,
    write_bias_table, write_candidates, write_heatmap, write_histograms, write_history,
    write_pr_points, write_spectrum, write_sweep_results, RunConfig,
};
use crate::scorenorm::{
    apply_bias_to_candidates, background_biases, extend_references, integrate_bias,
    score_normalization_sweep, ScoreNormConfig,
};
use crate::toy::{probe_descriptors, train, TrainHistory};

#[derive(Debug, Parser)]
#[command(
    name = "sscd",
    version,
    about = "Copy-detection descriptor toolkit: toy training, descriptor postprocessing, exact retrieval, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the synthetic benchmark and write history, probe descriptors,
    /// and a run manifest.
    ToyTrain(ToyTrainArgs),
    /// Fit PCA whitening on one descriptor file and apply it to another.
    Postprocess(PostprocessArgs),
    /// Exhaustive k-NN search; writes a candidates CSV.
    Search(SearchArgs),
    /// Background-set similarity normalization: bias tables, rescored
    /// candidates, integrated-bias descriptors, or the parameter sweep.
    ScoreNormalize(ScoreNormalizeArgs),
    /// Compute retrieval metrics from candidates + ground truth; prints the
    /// report as JSON.
    Evaluate(EvaluateArgs),
    /// Principal-value spectrum and effective rank of a descriptor file.
    Spectrum(SpectrumArgs),
    /// Positive/negative squared-distance histograms.
    Histogram(HistogramArgs),
    /// Per-location match heatmap against a global descriptor.
    Heatmap(HeatmapArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    /// Inner product (cosine on unit vectors).
    Ip,
    /// Negated squared L2 distance.
    L2,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Ip => Metric::InnerProduct,
            MetricArg::L2 => Metric::L2,
        }
    }
}

#[derive(Debug, Args)]
pub struct ToyTrainArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Comma-separated entropy weights; one run per value in
    /// `lambda_<value>/` subdirectories, plus a sweep summary CSV.
    #[arg(long)]
    pub lambda_sweep: Option<String>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    /// Descriptor file the whitening is fit on.
    #[arg(long)]
    pub fit: PathBuf,
    /// Descriptor file the whitening is applied to.
    #[arg(long)]
    pub apply: PathBuf,
    /// Output dimension; defaults to the full descriptor size.
    #[arg(long)]
    pub pca_dim: Option<usize>,
    /// Eigenvalue regularization.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// L2-normalize inputs before whitening (trunk-feature baseline
    /// protocol).
    #[arg(long)]
    pub normalize_before: bool,
    /// Skip the final L2 normalization.
    #[arg(long)]
    pub no_renormalize: bool,
    /// Emit one output per candidate dimension {d, 3/4 d, d/2, d/4, ...};
    /// `--out` is then a directory.
    #[arg(long)]
    pub sweep: bool,
    /// Output descriptor file (or directory with --sweep).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(short, long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Ip)]
    pub metric: MetricArg,
    /// Output candidates CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreNormalizeArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub background: PathBuf,
    /// First background neighbor rank.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Last background neighbor rank.
    #[arg(long, default_value_t = 3)]
    pub n_end: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Candidates CSV to rescore (writes `--out`).
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Rescored candidates CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-query bias table CSV.
    #[arg(long)]
    pub bias_out: Option<PathBuf>,
    /// Reference descriptor file (for --extended-refs-out and --sweep).
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Write queries with the bias integrated as an extra coordinate.
    #[arg(long)]
    pub biased_queries_out: Option<PathBuf>,
    /// Write references extended with the constant-1 coordinate.
    #[arg(long)]
    pub extended_refs_out: Option<PathBuf>,
    /// Run the (n, n_end, beta) grid sweep; requires --refs, --gt and
    /// --sweep-out.
    #[arg(long)]
    pub sweep: bool,
    /// Ground-truth CSV for the sweep.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Candidates per query for the sweep's retrieval stage.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Largest neighbor rank in the sweep grid.
    #[arg(long, default_value_t = 5)]
    pub sweep_n_max: usize,
    /// Comma-separated beta values for the sweep grid.
    #[arg(long, default_value = "0.5,0.75,1.0,1.25,1.5")]
    pub sweep_betas: String,
    /// Sweep results CSV (n, n_end, beta, micro_ap).
    #[arg(long)]
    pub sweep_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Also write the PR curve CSV.
    #[arg(long)]
    pub pr_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Also write the principal values as CSV.
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Grid descriptor file with height x width rows, row-major.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub width: usize,
    /// Descriptor file holding the global descriptor.
    #[arg(long)]
    pub global: PathBuf,
    /// Id of the global descriptor when the file holds several.
    #[arg(long)]
    pub global_id: Option<String>,
    /// Output CSV (height rows of width similarities).
    #[arg(long)]
    pub out: PathBuf,
}

/// Dispatch a parsed command. Human-readable output (the evaluate/spectrum
/// JSON reports) goes to `out`.
pub fn run_command(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::ToyTrain(args) => toy_train(args),
        Command::Postprocess(args) => postprocess(args),
        Command::Search(args) => search(args),
        Command::ScoreNormalize(args) => score_normalize(args),
        Command::Evaluate(args) => evaluate(args, out),
        Command::Spectrum(args) => spectrum(args, out),
        Command::Histogram(args) => histogram(args),
        Command::Heatmap(args) => heatmap(args),
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
}

fn write_manifest(dir: &Path, config: &RunConfig) -> Result<()> {
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: config.train.seed,
        config,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

fn run_one_training(dir: &Path, config: &RunConfig) -> Result<TrainHistory> {
    fs::create_dir_all(dir)?;
    let train_config = config.train.to_train_config();
    let (encoder, history) = train(&train_config)?;
    write_history(dir.join("history.csv"), &history)?;
    let (refs, queries) = probe_descriptors(&train_config, &encoder)?;
    let probe = DescriptorSet::concat(&refs, &queries)?;
    save_descriptors(dir.join("probe.desc"), &probe)?;
    write_manifest(dir, config)?;
    Ok(history)
}

pub fn toy_train(args: &ToyTrainArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    config.train.to_train_config().validate()?;

    match &args.lambda_sweep {
        None => {
            run_one_training(&args.out_dir, &config)?;
        }
        Some(list) => {
            let lambdas = parse_f64_list(list, "lambda-sweep")?;
            fs::create_dir_all(&args.out_dir)?;
            let mut summary = Vec::new();
            for &lambda in &lambdas {
                let mut cell = config.clone();
                cell.train.lambda = lambda;
                let dir = args.out_dir.join(format!("lambda_{lambda}"));
                let history = run_one_training(&dir, &cell)?;
                summary.push((lambda, history));
            }
            let mut w = std::io::BufWriter::new(fs::File::create(
                args.out_dir.join("sweep_summary.csv"),
            )?);
            writeln!(w, "lambda,micro_ap,recall_at_1,mrr,effective_rank")?;
            for (lambda, h) in &summary {
                let p = &h.final_probe;
                writeln!(
                    w,
                    "{lambda},{},{},{},{}",
                    p.micro_ap, p.recall_at_1, p.mrr, p.effective_rank
                )?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn postprocess(args: &PostprocessArgs) -> Result<()> {
    let fit_set = load_descriptors(&args.fit)?.set;
    let apply_set = load_descriptors(&args.apply)?.set;
    let renormalize = !args.no_renormalize;

    if args.sweep {
        fs::create_dir_all(&args.out)?;
        for dim in whitening_dimension_sweep(fit_set.dim()) {
            let transform = fit_whitening(&fit_set, dim, args.epsilon)?;
            let out = transform.apply_protocol(&apply_set, args.normalize_before, renormalize)?;
            save_descriptors(args.out.join(format!("whitened_{dim}.desc")), &out)?;
        }
        return Ok(());
    }

    let dim = args.pca_dim.unwrap_or(fit_set.dim());
    let transform = fit_whitening(&fit_set, dim, args.epsilon)?;
    let out = transform.apply_protocol(&apply_set, args.normalize_before, renormalize)?;
    save_descriptors(&args.out, &out)?;
    Ok(())
}

pub fn search(args: &SearchArgs) -> Result<()> {
    let queries = load_descriptors(&args.queries)?.set;
    let refs = load_descriptors(&args.refs)?.set;
    let candidates = knn_search(&queries, &refs, args.k, args.metric.into())?;
    write_candidates(&args.out, &candidates)?;
    Ok(())
}

pub fn score_normalize(args: &ScoreNormalizeArgs) -> Result<()> {
    let queries = load_descriptors(&args.queries)?.set;
    let background = load_descriptors(&args.background)?.set;

    if args.sweep {
        let refs_path = args.refs.as_ref().ok_or_else(|| usage("--sweep needs --refs"))?;
        let gt_path = args.gt.as_ref().ok_or_else(|| usage("--sweep needs --gt"))?;
        let out = args
            .sweep_out
            .as_ref()
            .ok_or_else(|| usage("--sweep needs --sweep-out"))?;
        let refs = load_descriptors(refs_path)?.set;
        let gt = read_ground_truth(gt_path)?;
        let betas = parse_f64_list(&args.sweep_betas, "sweep-betas")?;
        let cells = score_normalization_sweep(
            &queries,
            &refs,
            &background,
            &gt,
            args.k,
            args.sweep_n_max,
            &betas,
        )?;
        let rows: Vec<(usize, usize, f64, f64)> = cells
            .iter()
            .map(|c| (c.n, c.n_end, c.beta, c.micro_ap))
            .collect();
        write_sweep_results(out, &rows)?;
        return Ok(());
    }

    let cfg = ScoreNormConfig {
        n: args.n,
        n_end: args.n_end,
        beta: args.beta,
    };
    let biases = background_biases(&queries, &background, &cfg)?;

    if let Some(path) = &args.bias_out {
        write_bias_table(path, queries.ids(), &biases)?;
    }
    if let Some(candidates_path) = &args.candidates {
        let out = args
            .out
            .as_ref()
            .ok_or_else(|| usage("--candidates needs --out"))?;
        let raw = read_candidates(candidates_path)?;
        let rescored = apply_bias_to_candidates(&raw, queries.ids(), &biases)?;
        write_candidates(out, &rescored)?;
    }
    if let Some(path) = &args.biased_queries_out {
        save_biased(path, &integrate_bias(&queries, &biases)?)?;
    }
    if let Some(path) = &args.extended_refs_out {
        let refs_path = args
            .refs
            .as_ref()
            .ok_or_else(|| usage("--extended-refs-out needs --refs"))?;
        let refs = load_descriptors(refs_path)?.set;
        save_biased(path, &extend_references(&refs)?)?;
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let candidates = read_candidates(&args.candidates)?;
    let gt = read_ground_truth(&args.gt)?;
    let report = EvalReport::from_candidates(&candidates, &gt);
    if let Some(path) = &args.pr_out {
        write_pr_points(path, &report.pr_points)?;
    }
    let printed = EvalReport {
        pr_points: Vec::new(),
        ..report
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&printed)?)?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumJson {
    principal_values: Vec<f64>,
    effective_rank: f64,
    max_min_ratio: f64,
}

pub fn spectrum(args: &SpectrumArgs, out: &mut dyn Write) -> Result<()> {
    let set = load_descriptors(&args.input)?.set;
    let report = principal_spectrum(&set)?;
    if let Some(path) = &args.csv_out {
        write_spectrum(path, &report)?;
    }
    let json = SpectrumJson {
        principal_values: report.principal_values.to_vec(),
        effective_rank: report.effective_rank,
        max_min_ratio: report.max_min_ratio,
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&json)?)?;
    Ok(())
}

pub fn histogram(args: &HistogramArgs) -> Result<()> {
    let queries = load_descriptors(&args.queries)?.set;
    let refs = load_descriptors(&args.refs)?.set;
    let gt = read_ground_truth(&args.gt)?;
    let (positive, negative) = distance_histograms(&queries, &refs, &gt, args.bins)?;
    write_histograms(&args.out, &positive, &negative)?;
    Ok(())
}

pub fn heatmap(args: &HeatmapArgs) -> Result<()> {
    let grid = load_descriptors(&args.grid)?.set;
    let global_set = load_descriptors(&args.global)?.set;
    let row = match &args.global_id {
        Some(id) => global_set.index_of(id).ok_or_else(|| Error::InvalidParameter {
            name: "global_id",
            reason: format!("id {id:?} not found in {}", args.global.display()),
        })?,
        None => {
            if global_set.count() != 1 {
                return Err(usage(
                    "global file holds several descriptors; pick one with --global-id",
                ));
            }
            0
        }
    };
    let global = global_set.row(row).to_owned();
    let map = match_heatmap(&grid, args.height, args.width, &global)?;
    write_heatmap(&args.out, &map)?;
    Ok(())
}

fn usage(message: &str) -> Error {
    Error::InvalidParameter {
        name: "arguments",
        reason: message.to_string(),
    }
}

fn parse_f64_list(list: &str, name: &'static str) -> Result<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter {
                name,
                reason: format!("bad number {s:?}"),
            })
        })
        .collect()
}

//! Command-line driver for the projection pursuit diagnostics
//! pipeline: simulate data, run an optimiser, sweep a seed grid, and
//! render diagnostics from trace files.
//!
//! Errors exit with code 1 and print one JSON line to stderr; argument
//! mistakes exit with clap's usage code 2. Relative output paths can
//! be redirected with the `PPDIAG_OUT` environment variable.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use ppdiag::diagnostics::{
    basis_space_tour, interp_trace, pca_embed, search_summary, torus_background, write_interp_csv,
};
use ppdiag::indexes::index_by_name;
use ppdiag::linalg::Matrix;
use ppdiag::manifold::geodesic_distance;
use ppdiag::optimizers::{optimize, polish_from, OptimizerConfig, RunResult};
use ppdiag::render::{
    render_embedding, render_search, render_space_tour, render_trace, EmbedOptions, TourPointRole,
};
use ppdiag::rng::seeded;
use ppdiag::simdata::{boa5, boa6, generate, theoretical_best, Dataset};
use ppdiag::trace::{self, Format, Method, TraceLog};

#[derive(Parser)]
#[command(name = "ppdiag", version, about = "Projection pursuit optimisation diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Run one optimisation and write its trace.
    Optimize(OptimizeArgs),
    /// Run a seed-by-alpha-by-method grid and summarize it.
    Sweep(SweepArgs),
    /// Render diagnostics from existing trace files.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// full10, boa5, or boa6.
    #[arg(long)]
    dataset: String,
    /// Observations to draw.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Input dataset CSV (as written by `simulate`).
    #[arg(long)]
    data: PathBuf,
    /// holes or kolmogorov.
    #[arg(long)]
    index: String,
    /// crs, sa, or pd.
    #[arg(long)]
    method: Option<String>,
    /// Projection dimension (1 or 2).
    #[arg(long)]
    d: Option<usize>,
    /// JSON file with optimiser settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace output path (.csv or .jsonl).
    #[arg(long)]
    trace_out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha0: Option<f64>,
    /// Refine the final basis with the polish stage afterwards.
    #[arg(long)]
    polish: bool,
    /// Disable leg interruption regardless of method defaults.
    #[arg(long)]
    no_interrupt: bool,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Inclusive seed range, written lo..hi.
    #[arg(long, default_value = "1..20")]
    seeds: String,
    /// Comma-separated neighbourhood sizes.
    #[arg(long, default_value = "0.5,0.7")]
    alpha0: String,
    /// Comma-separated methods.
    #[arg(long, default_value = "crs,sa")]
    methods: String,
    /// Dataset to simulate per seed.
    #[arg(long, default_value = "boa6")]
    dataset: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value = "kolmogorov")]
    index: String,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Optional base configuration applied to every run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Concurrent runs (defaults to the number of cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for traces and summary.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Glob matching trace files, e.g. "runs/*.csv".
    #[arg(long)]
    traces: String,
    /// search, trace, pca, tour, or torus.
    #[arg(long)]
    kind: String,
    /// Draw anchor and search bases in embedding views.
    #[arg(long)]
    details: bool,
    /// Write animation frames instead of a single file.
    #[arg(long)]
    animate: bool,
    /// Iterations with at most this many tries draw raw points.
    #[arg(long, default_value_t = 15)]
    cutoff: usize,
    /// Animation checkpoint count.
    #[arg(long, default_value_t = 10)]
    checkpoints: usize,
    /// Tour frame count.
    #[arg(long, default_value_t = 30)]
    frames: usize,
    /// Background bases for embedding and tour context.
    #[arg(long, default_value_t = 1000)]
    background: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Optimize(args) => run_optimize(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Diagnose(args) => run_diagnose(args),
    };
    if let Err(e) = outcome {
        eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
        std::process::exit(1);
    }
}

/// Redirects relative output paths under $PPDIAG_OUT when set.
fn out_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os("PPDIAG_OUT") {
        Some(base) => PathBuf::from(base).join(p),
        None => p.to_path_buf(),
    }
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(())
}

fn simulate_dataset(name: &str, n: usize, seed: u64) -> anyhow::Result<Dataset> {
    match name {
        "full10" => Ok(generate(n, seed)?),
        "boa5" => Ok(boa5(n, seed)?),
        "boa6" => Ok(boa6(n, seed)?),
        other => bail!("unknown dataset '{other}', expected full10, boa5, or boa6"),
    }
}

fn parse_method(name: &str) -> anyhow::Result<Method> {
    match name {
        "crs" => Ok(Method::Crs),
        "sa" => Ok(Method::Sa),
        "pd" => Ok(Method::Pd),
        other => bail!("unknown method '{other}', expected crs, sa, or pd"),
    }
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let ds = simulate_dataset(&args.dataset, args.n, args.seed)?;
    let out = out_path(&args.out);
    ensure_parent(&out)?;
    ds.write_csv_file(&out)?;
    println!("dataset={} n={} seed={} out={}", args.dataset, args.n, args.seed, out.display());
    Ok(())
}

fn load_config(path: Option<&Path>) -> anyhow::Result<OptimizerConfig> {
    match path {
        None => Ok(OptimizerConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Binds the dataset's known optimum (if any) so embeddings can mark
/// it, then writes the trace and its metadata sidecar.
fn write_trace(log: &mut TraceLog, dataset: &str, path: &Path) -> anyhow::Result<()> {
    let (p, d) = (log.metadata().p, log.metadata().d);
    if let Ok(theo) = theoretical_best(dataset, d) {
        if theo.p() == p {
            log.bind_theoretical(theo)?;
        }
    }
    ensure_parent(path)?;
    trace::serialize(log, path, Format::from_path(path)?)?;
    Ok(())
}

fn run_optimize(args: OptimizeArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(m) = &args.method {
        cfg.method = parse_method(m)?;
    }
    if let Some(d) = args.d {
        cfg.d = d;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(alpha0) = args.alpha0 {
        cfg.alpha0 = alpha0;
    }
    if args.no_interrupt {
        cfg.interrupt = Some(false);
    }
    cfg.validate()?;

    if args.dump_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }

    let ds = Dataset::read_csv_file(&args.data)
        .with_context(|| format!("reading dataset {}", args.data.display()))?;
    let index = index_by_name(&args.index)?;
    let result = optimize(ds.values(), index.as_ref(), &cfg)?;

    let trace_out = out_path(&args.trace_out);
    let mut log = result.trace.clone();
    write_trace(&mut log, ds.name(), &trace_out)?;
    println!(
        "method={} final_index={} iterations={} terminated_by={} trace={}",
        method_name(cfg.method),
        result.final_index,
        result.iterations,
        result.terminated_by,
        trace_out.display()
    );

    if args.polish {
        let polished = polish_from(ds.values(), index.as_ref(), &result.final_basis, &cfg)?;
        let polish_out = polish_path(&trace_out);
        let mut log = polished.trace.clone();
        write_trace(&mut log, ds.name(), &polish_out)?;
        println!(
            "method=polish final_index={} iterations={} terminated_by={} trace={}",
            polished.final_index,
            polished.iterations,
            polished.terminated_by,
            polish_out.display()
        );
    }
    Ok(())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Crs => "crs",
        Method::Sa => "sa",
        Method::Pd => "pd",
        Method::Polish => "polish",
    }
}

/// trace.csv -> trace.polish.csv
fn polish_path(trace_out: &Path) -> PathBuf {
    let ext = trace_out.extension().and_then(|e| e.to_str()).unwrap_or("csv");
    trace_out.with_extension(format!("polish.{ext}"))
}

fn parse_seed_range(text: &str) -> anyhow::Result<Vec<u64>> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("seed range must be written lo..hi, got '{text}'"))?;
    let lo: u64 = lo.trim().parse().context("seed range start")?;
    let hi: u64 = hi.trim().trim_start_matches('=').parse().context("seed range end")?;
    if hi < lo {
        bail!("empty seed range {lo}..{hi}");
    }
    Ok((lo..=hi).collect())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|e| anyhow!("bad {what} '{s}': {e}")))
        .collect()
}

struct SweepRun {
    method: Method,
    alpha0: f64,
    seed: u64,
    file: String,
    result: RunResult,
    dist_theoretical: Option<f64>,
}

fn run_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let seeds = parse_seed_range(&args.seeds)?;
    let alphas: Vec<f64> = parse_list(&args.alpha0, "alpha0")?;
    let methods: Vec<Method> =
        parse_list::<String>(&args.methods, "method")?
            .iter()
            .map(|m| parse_method(m))
            .collect::<anyhow::Result<_>>()?;
    let base = load_config(args.config.as_deref())?;
    let out_dir = out_path(&args.out);
    std::fs::create_dir_all(&out_dir)?;

    let mut grid: Vec<(Method, f64, u64)> = Vec::new();
    for &method in &methods {
        for &alpha0 in &alphas {
            for &seed in &seeds {
                grid.push((method, alpha0, seed));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    let runs: Vec<anyhow::Result<SweepRun>> = pool.install(|| {
        grid.par_iter()
            .map(|&(method, alpha0, seed)| {
                let ds = simulate_dataset(&args.dataset, args.n, seed)?;
                let cfg = OptimizerConfig {
                    method,
                    alpha0,
                    seed,
                    d: args.d,
                    ..base.clone()
                };
                cfg.validate()?;
                let index = index_by_name(&args.index)?;
                let result = optimize(ds.values(), index.as_ref(), &cfg)?;
                let file = format!(
                    "trace_{}_a{}_s{:03}.csv",
                    method_name(method),
                    alpha0,
                    seed
                );
                let mut log = result.trace.clone();
                write_trace(&mut log, ds.name(), &out_dir.join(&file))?;
                let dist_theoretical = theoretical_best(&args.dataset, args.d)
                    .ok()
                    .and_then(|theo| geodesic_distance(&result.final_basis, &theo).ok());
                Ok(SweepRun { method, alpha0, seed, file, result, dist_theoretical })
            })
            .collect()
    });

    let mut rows: Vec<SweepRun> = runs.into_iter().collect::<anyhow::Result<_>>()?;
    rows.sort_by(|a, b| {
        method_name(a.method)
            .cmp(method_name(b.method))
            .then(a.alpha0.total_cmp(&b.alpha0))
            .then(a.seed.cmp(&b.seed))
    });

    let summary = out_dir.join("summary.csv");
    let mut w = String::new();
    w.push_str("method,alpha0,seed,final_index,dist_theoretical,run_length,iterations,terminated_by,trace\n");
    for r in &rows {
        w.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            method_name(r.method),
            r.alpha0,
            r.seed,
            trace::fmt_float(r.result.final_index),
            r.dist_theoretical.map(trace::fmt_float).unwrap_or_default(),
            r.result.trace.records().len(),
            r.result.iterations,
            r.result.terminated_by,
            r.file
        ));
    }
    std::fs::write(&summary, w)?;
    println!("runs={} summary={}", rows.len(), summary.display());
    Ok(())
}

fn load_traces(pattern: &str) -> anyhow::Result<Vec<(PathBuf, TraceLog)>> {
    let mut out = Vec::new();
    for entry in glob::glob(pattern).context("parsing trace glob")? {
        let path = entry.context("listing trace files")?;
        // Sidecars match *.json globs; only real trace files load here.
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("jsonl") => {}
            _ => continue,
        }
        let log = trace::deserialize(&path)
            .with_context(|| format!("loading trace {}", path.display()))?;
        out.push((path, log));
    }
    if out.is_empty() {
        bail!("no trace files match '{pattern}'");
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string()
}

fn run_diagnose(args: DiagnoseArgs) -> anyhow::Result<()> {
    let traces = load_traces(&args.traces)?;
    let out_dir = out_path(&args.out);
    std::fs::create_dir_all(&out_dir)?;

    match args.kind.as_str() {
        "search" => {
            for (path, log) in &traces {
                let summary = search_summary(log, args.cutoff)?;
                let stem = stem_of(path);
                render_search(&summary, &out_dir.join(format!("search_{stem}.svg")))?;
                let mut csv = Vec::new();
                summary.write_csv(&mut csv)?;
                std::fs::write(out_dir.join(format!("search_{stem}.csv")), csv)?;
            }
        }
        "trace" => {
            let series: Vec<_> = traces.iter().map(|(_, log)| interp_trace(log)).collect();
            render_trace(&series, &out_dir.join("trace.svg"))?;
            for ((path, _), points) in traces.iter().zip(&series) {
                let mut csv = Vec::new();
                write_interp_csv(points, &mut csv)?;
                std::fs::write(out_dir.join(format!("trace_{}.csv", stem_of(path))), csv)?;
            }
        }
        "pca" => {
            let logs: Vec<&TraceLog> = traces.iter().map(|(_, log)| log).collect();
            let mut rng = seeded(0);
            let embedding = pca_embed(&logs, args.background, &mut rng)?;
            let opts = EmbedOptions {
                details: args.details,
                animate: args.animate,
                checkpoints: args.checkpoints,
            };
            let target: PathBuf = if args.animate {
                out_dir.join("embedding_frames")
            } else {
                out_dir.join("embedding.svg")
            };
            render_embedding(&embedding, &opts, &target)?;
            let mut csv = Vec::new();
            embedding.write_csv(&mut csv)?;
            std::fs::write(out_dir.join("embedding.csv"), csv)?;
        }
        "tour" | "torus" => {
            let (p, d) = {
                let meta = traces[0].1.metadata();
                (meta.p, meta.d)
            };
            let q = p * d;
            let mut rng = seeded(0);
            let mut flat: Vec<Vec<f64>> = Vec::new();
            let mut roles: Vec<TourPointRole> = Vec::new();
            if args.kind == "tour" {
                for (li, (_, log)) in traces.iter().enumerate() {
                    let method = log.records().first().map(|r| r.method).unwrap_or(Method::Crs);
                    for r in log.records() {
                        flat.push(r.basis.flatten());
                        roles.push(TourPointRole::Path { log: li, method });
                    }
                }
            }
            // Torus views need 2-column frames; reuse the trace shape
            // for the plain tour background.
            let background = if args.kind == "torus" {
                torus_background(p.max(3), args.background.max(1), &mut rng)?
            } else {
                let mut m = Matrix::zeros(args.background.max(1), q);
                for i in 0..m.rows() {
                    let b = ppdiag::manifold::random_basis(p, d, &mut rng)?;
                    for (c, v) in b.flatten().into_iter().enumerate() {
                        m.set(i, c, v);
                    }
                }
                m
            };
            let cols = if args.kind == "torus" { background.cols() } else { q };
            let mut points = Matrix::zeros(flat.len() + background.rows(), cols);
            for (i, row) in flat.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    points.set(i, c, *v);
                }
            }
            for i in 0..background.rows() {
                for c in 0..background.cols() {
                    points.set(flat.len() + i, c, background.get(i, c));
                }
                roles.push(TourPointRole::Background);
            }
            let frames = basis_space_tour(&points, args.frames, &mut rng)?;
            let dir = out_dir.join(args.kind.as_str());
            render_space_tour(&frames, &roles, &dir)?;
        }
        other => bail!("unknown diagnostic kind '{other}', expected search, trace, pca, tour, or torus"),
    }
    println!("kind={} traces={} out={}", args.kind, traces.len(), out_dir.display());
    Ok(())
}

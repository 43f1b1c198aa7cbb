//! The `qdep` command line.
//!
//! Exit codes: 0 success, 2 input error, 3 configuration error (including
//! domain errors and unimplemented models), 4 cache error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bet::max_bet_select;
use crate::cache::{Cache, Origin};
use crate::copula::CheckerboardCopula;
use crate::dependence::{q_surface, DyadicGrid};
use crate::diagram::{classify, CellClass, DiagramSources, CELLS};
use crate::error::{QdepError, Result};
use crate::global_test::{critical_value, run_test, StatisticKind, TestConfig};
use crate::io::{parse_columns, qsurface_csv, read_sample, sha256_hex};
use crate::models::{power, ModelSpec, PowerEstimate};
use crate::ranks::{pseudo_observations, PseudoSample};
use crate::render::{bet_overlay_svg, diagram_svg, qsurface_svg};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_CACHE_DIR: &str = ".qdep-cache";

#[derive(Debug, Parser)]
#[command(name = "qdep", version, about = "Quantile dependence surfaces, dependence diagrams and rank tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate barriers and null samples into the cache.
    Calibrate(CalibrateArgs),
    /// Quantile dependence surface and dependence diagram of a CSV sample.
    Analyze(AnalyzeArgs),
    /// Global independence test.
    Test(TestArgs),
    /// Monte Carlo power of a test under a benchmark model.
    Power(PowerArgs),
    /// Depth-2 symmetry statistics and Max BET pattern selection.
    Bet(BetArgs),
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    /// Calibration cache; QDEP_CACHE_DIR takes precedence.
    #[arg(long, default_value = DEFAULT_CACHE_DIR)]
    pub cache_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Two columns by one-based index or header name, e.g. `1,3` or `x,y`.
    #[arg(long)]
    pub cols: Option<String>,
    /// Seed for breaking ties; defaults to --seed.
    #[arg(long)]
    pub tie_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub n: usize,
    /// Grid size 2^(s+1) - 1; defaults to the largest such value not above n.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_side: f64,
    #[arg(long, default_value_t = 0.95)]
    pub t_frac: f64,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha_side: f64,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
    /// Calibration seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write diagram.svg and qsurface.svg.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "tn")]
    pub stat: StatisticKind,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub t_frac: f64,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the JSON result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Model id such as SR3, BM1(0.3) or FRECHET(0.5).
    #[arg(long)]
    pub model: ModelSpec,
    #[arg(long, default_value_t = 128)]
    pub n: usize,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value = "tn")]
    pub stat: StatisticKind,
    #[arg(long, default_value_t = 0.95)]
    pub t_frac: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
    /// Seed of the simulated data sets.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Seed of the null calibration; defaults to --seed.
    #[arg(long)]
    pub null_seed: Option<u64>,
    /// Print the CSV header line first.
    #[arg(long)]
    pub header: bool,
    /// Write the run manifest to this file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Args)]
pub struct BetArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 100_000)]
    pub runs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the pattern overlay SVG here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub cache: CacheArgs,
}

pub fn exit_code(err: &QdepError) -> i32 {
    match err {
        QdepError::InvalidSample(_) | QdepError::InvalidData(_) | QdepError::Input(_) => 2,
        QdepError::Domain(_) | QdepError::Configuration(_) | QdepError::NotImplemented(_) => 3,
        QdepError::Cache(_) => 4,
    }
}

/// Provenance record written next to (or embedded in) every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub seeds: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return t;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    fn new(command: &str, config: Value, seeds: Value, input: Option<InputDigest>) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            seeds,
            input,
            outputs: Vec::new(),
            timestamp: timestamp(),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| QdepError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| QdepError::Input(format!("cannot write {}: {e}", path.display())))
}

fn origin_name(o: Origin) -> &'static str {
    match o {
        Origin::Cached => "cached",
        Origin::Computed => "computed",
    }
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

fn resolve_grid(d: Option<usize>, n: usize) -> Result<DyadicGrid> {
    match d {
        Some(d) => DyadicGrid::from_size(d),
        None => Ok(DyadicGrid::default_for(n)),
    }
}

/// Diagrams need at least one grid point per decile, so the default grid
/// has at least 15 points.
fn resolve_diagram_grid(d: Option<usize>, n: usize) -> Result<DyadicGrid> {
    match d {
        Some(_) => resolve_grid(d, n),
        None => Ok(DyadicGrid::new(DyadicGrid::default_for(n).depth().max(3))?),
    }
}

struct Loaded {
    pseudo: PseudoSample,
    digest: InputDigest,
    tie_seed: u64,
}

fn load(input: &InputArgs, seed: u64) -> Result<Loaded> {
    let bytes = fs::read(&input.input)
        .map_err(|e| QdepError::Input(format!("cannot read {}: {e}", input.input.display())))?;
    let cols = input.cols.as_deref().map(parse_columns).transpose()?;
    let sample = read_sample(&input.input, cols.as_deref())?;
    if sample.dim() != 2 {
        return Err(QdepError::Input(format!("select exactly 2 columns, got {}", sample.dim())));
    }
    let tie_seed = input.tie_seed.unwrap_or(seed);
    Ok(Loaded {
        pseudo: pseudo_observations(&sample, tie_seed)?,
        digest: InputDigest {
            path: input.input.display().to_string(),
            sha256: sha256_hex(&bytes),
        },
        tie_seed,
    })
}

fn calibrate(a: &CalibrateArgs) -> Result<String> {
    let grid = resolve_grid(a.d, a.n)?;
    let cache = Cache::from_env_or(&a.cache.cache_dir);
    let config = TestConfig::new(a.n, grid.size(), a.t_frac, a.runs, a.seed)?;
    let (_, b_origin) = cache.barriers(a.n, grid.depth(), a.alpha_side, a.runs, a.seed)?;
    let kinds = [StatisticKind::Tn, StatisticKind::Vn, StatisticKind::MaxBet];
    let nulls = cache.null_samples(&config, &kinds)?;

    let b_path = cache.barrier_path(a.n, grid.depth(), a.alpha_side, a.runs, a.seed)?;
    let mut manifest = RunManifest::new(
        "calibrate",
        json!({"n": a.n, "d": grid.size(), "alpha_side": a.alpha_side, "t_frac": a.t_frac,
               "runs": a.runs, "cache_dir": cache.root().display().to_string()}),
        json!({"seed": a.seed}),
        None,
    );
    manifest.outputs.push(b_path.display().to_string());
    let mut null_info = Vec::new();
    for (sample, origin) in &nulls {
        let path = cache.null_path(&config, sample.kind)?;
        manifest.outputs.push(path.display().to_string());
        let q = |p: f64| critical_value(sample, 1.0 - p);
        null_info.push(json!({
            "kind": sample.kind,
            "path": path.display().to_string(),
            "origin": origin_name(*origin),
            "quantiles": {"0.90": q(0.90)?, "0.95": q(0.95)?, "0.99": q(0.99)?},
        }));
    }
    to_json(&json!({
        "barriers": {"path": b_path.display().to_string(), "origin": origin_name(b_origin)},
        "nulls": null_info,
        "manifest": manifest,
    }))
}

fn analyze(a: &AnalyzeArgs) -> Result<String> {
    let data = load(&a.input, a.seed)?;
    let n = data.pseudo.n();
    let grid = resolve_diagram_grid(a.d, n)?;
    let cache = Cache::from_env_or(&a.cache.cache_dir);
    let surface = q_surface(&CheckerboardCopula::new(&data.pseudo), &grid)?;
    let (barriers, origin) = cache.barriers(n, grid.depth(), a.alpha_side, a.runs, a.seed)?;
    let b_path = cache.barrier_path(n, grid.depth(), a.alpha_side, a.runs, a.seed)?;
    let mut diagram = classify(&surface, &barriers)?;
    diagram.sources = Some(DiagramSources {
        qsurface: "qsurface.csv".into(),
        barriers: file_name(&b_path),
        manifest: "manifest.json".into(),
    });

    fs::create_dir_all(&a.out_dir)
        .map_err(|e| QdepError::Input(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let mut outputs = vec![
        ("qsurface.csv", qsurface_csv(&surface)),
        ("diagram.json", diagram.to_json()? + "\n"),
    ];
    if a.svg {
        outputs.push(("diagram.svg", diagram_svg(&diagram)));
        outputs.push(("qsurface.svg", qsurface_svg(&surface)));
    }
    let mut manifest = RunManifest::new(
        "analyze",
        json!({"n": n, "d": grid.size(), "alpha_side": a.alpha_side, "runs": a.runs,
               "cols": a.input.cols, "cache_dir": cache.root().display().to_string(),
               "barriers": file_name(&b_path), "barriers_origin": origin_name(origin)}),
        json!({"seed": a.seed, "tie_seed": data.tie_seed}),
        Some(data.digest),
    );
    for (name, text) in &outputs {
        write_file(&a.out_dir.join(name), text)?;
        manifest.outputs.push(name.to_string());
    }
    write_file(&a.out_dir.join("manifest.json"), &to_json(&manifest)?)?;

    let counts: Vec<Value> = [CellClass::White, CellClass::Blue, CellClass::Pink, CellClass::Mixed]
        .into_iter()
        .map(|c| json!({"class": c, "cells": diagram.count(c)}))
        .collect();
    to_json(&json!({"out_dir": a.out_dir.display().to_string(), "cells": CELLS * CELLS, "classes": counts}))
}

fn test(a: &TestArgs) -> Result<String> {
    let data = load(&a.input, a.seed)?;
    let n = data.pseudo.n();
    let grid = resolve_grid(a.d, n)?;
    let config = TestConfig::new(n, grid.size(), a.t_frac, a.runs, a.seed)?;
    let cache = Cache::from_env_or(&a.cache.cache_dir);
    let (null, origin) = cache.null_sample(&config, a.stat)?;
    let result = run_test(&data.pseudo, &null)?;
    let mut manifest = RunManifest::new(
        "test",
        json!({"stat": a.stat, "n": n, "d": grid.size(), "t_frac": a.t_frac, "runs": a.runs,
               "cols": a.input.cols, "cache_dir": cache.root().display().to_string(),
               "null_origin": origin_name(origin)}),
        json!({"seed": a.seed, "tie_seed": data.tie_seed}),
        Some(data.digest),
    );
    if let Some(out) = &a.out {
        manifest.outputs.push(out.display().to_string());
    }
    let text = to_json(&json!({
        "statistic": result.statistic,
        "p_value": result.p_value,
        "stat": result.kind,
        "config": result.config,
        "manifest": manifest,
    }))?;
    emit(a.out.as_deref(), text)
}

fn emit(out: Option<&Path>, text: String) -> Result<String> {
    match out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn power_cmd(a: &PowerArgs) -> Result<String> {
    a.model.validate()?;
    let grid = resolve_grid(a.d, a.n)?;
    let null_seed = a.null_seed.unwrap_or(a.seed);
    let config = TestConfig::new(a.n, grid.size(), a.t_frac, a.runs, null_seed)?;
    let cache = Cache::from_env_or(&a.cache.cache_dir);
    let (null, origin) = cache.null_sample(&config, a.stat)?;
    let est = power(a.model, &null, a.alpha, a.reps, a.seed)?;
    if let Some(path) = &a.manifest {
        let manifest = RunManifest::new(
            "power",
            json!({"model": est.model, "stat": a.stat, "n": a.n, "d": grid.size(), "t_frac": a.t_frac,
                   "alpha": a.alpha, "reps": a.reps, "runs": a.runs,
                   "cache_dir": cache.root().display().to_string(), "null_origin": origin_name(origin)}),
            json!({"seed": a.seed, "null_seed": null_seed}),
            None,
        );
        write_file(path, &to_json(&manifest)?)?;
    }
    let mut text = String::new();
    if a.header {
        text.push_str(PowerEstimate::CSV_HEADER);
        text.push('\n');
    }
    text.push_str(&est.csv_row());
    text.push('\n');
    Ok(text)
}

fn bet_cmd(a: &BetArgs) -> Result<String> {
    let data = load(&a.input, a.seed)?;
    let n = data.pseudo.n();
    let grid = DyadicGrid::default_for(n);
    let config = TestConfig::new(n, grid.size(), 0.95, a.runs, a.seed)?;
    let cache = Cache::from_env_or(&a.cache.cache_dir);
    let (null, origin) = cache.null_sample(&config, StatisticKind::MaxBet)?;
    let selection = max_bet_select(&data.pseudo, &null)?;
    let mut manifest = RunManifest::new(
        "bet",
        json!({"n": n, "runs": a.runs, "cols": a.input.cols,
               "cache_dir": cache.root().display().to_string(), "null_origin": origin_name(origin)}),
        json!({"seed": a.seed, "tie_seed": data.tie_seed}),
        Some(data.digest),
    );
    if let Some(path) = &a.svg {
        write_file(path, &bet_overlay_svg(&data.pseudo, &selection)?)?;
        manifest.outputs.push(path.display().to_string());
    }
    if let Some(out) = &a.out {
        manifest.outputs.push(out.display().to_string());
    }
    let text = to_json(&json!({
        "s_matrix": selection.s_matrix,
        "selected": {
            "index": selection.index,
            "sign": selection.sign,
            "statistic": selection.statistic,
            "w": selection.w,
            "zhang_label": selection.zhang_label,
        },
        "p_value": selection.p_value,
        "p_value_convention": selection.p_value_convention,
        "manifest": manifest,
    }))?;
    emit(a.out.as_deref(), text)
}

pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Analyze(a) => analyze(a),
        Command::Test(a) => test(a),
        Command::Power(a) => power_cmd(a),
        Command::Bet(a) => bet_cmd(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("qdep: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&QdepError::Input("x".into())), 2);
        assert_eq!(exit_code(&QdepError::InvalidSample("x".into())), 2);
        assert_eq!(exit_code(&QdepError::Configuration("x".into())), 3);
        assert_eq!(exit_code(&QdepError::NotImplemented("x".into())), 3);
        assert_eq!(exit_code(&QdepError::Cache("x".into())), 4);
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from(["qdep", "power", "--model", "BM1(0.3)", "--n", "64"]).unwrap();
        match cli.command {
            Command::Power(p) => {
                assert_eq!(p.model, ModelSpec::Bm1 { rho: 0.3 });
                assert_eq!(p.stat, StatisticKind::Tn);
                assert_eq!(p.runs, 100_000);
            }
            _ => panic!(),
        }
        assert!(Cli::try_parse_from(["qdep", "test", "--input", "x.csv", "--stat", "zz"]).is_err());
    }

    #[test]
    fn diagram_grid_defaults() {
        assert_eq!(resolve_diagram_grid(None, 8).unwrap().size(), 15);
        assert_eq!(resolve_diagram_grid(None, 128).unwrap().size(), 127);
        assert!(resolve_diagram_grid(Some(64), 128).is_err());
    }
}

//! Reproducible runs: single chains, field sweeps with a critical reference
//! run, and the fit report built from their tables.
//!
//! Every chain draws from `stream_rng(master_seed, stream)` with
//! `stream = command code << 48 | chain index`. In a sweep the field points
//! come first (`point · replicas + replica`), the critical run last.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    read_csv, write_csv, write_json, Accumulator, ClusterTail, Direction, OneArm, ResultRow,
    RhoDiag, RhoTable, Sigma0, TailTable,
};
use crate::fit::{
    consistency_report, plan_h_sweep, write_plot_data, FitCuts, FitOptions, LawReport, Report,
};
use crate::mc::{stream_rng, Algorithm, ChainState, RunPlan};
use crate::model::{total_magnetization, Boundary, LatticeSpec, ModelParams, BETA_C};
use crate::stats::Estimate;

pub const MANIFEST_FILE: &str = "manifest.json";
/// `fit` shares its directory with the sweep, so its manifest has its own name.
pub const FIT_MANIFEST_FILE: &str = "fit-manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Sample,
    Sweep,
    Fit,
    Report,
}

impl Command {
    fn code(self) -> u64 {
        match self {
            Command::Verify => 1,
            Command::Sample => 2,
            Command::Sweep => 3,
            Command::Fit => 4,
            Command::Report => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Sample => "sample",
            Command::Sweep => "sweep",
            Command::Fit => "fit",
            Command::Report => "report",
        }
    }
}

/// Generator stream of chain `index` of a command.
pub fn chain_stream(command: Command, index: u64) -> u64 {
    command.code() << 48 | index
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::InvalidParameter(format!("unknown format '{s}'"))),
        }
    }
}

/// Writes `<stem>.csv` and/or `<stem>.json`; returns the file names.
pub fn write_table(
    dir: &Path,
    stem: &str,
    rows: &[ResultRow],
    format: OutputFormat,
) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if format != OutputFormat::Json {
        let name = format!("{stem}.csv");
        write_csv(rows, fs::File::create(dir.join(&name))?)?;
        out.push(name);
    }
    if format != OutputFormat::Csv {
        let name = format!("{stem}.json");
        write_json(rows, fs::File::create(dir.join(&name))?)?;
        out.push(name);
    }
    Ok(out)
}

/// Field geometry of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Torus,
    Box,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Shape::Torus),
            "box" => Ok(Shape::Box),
            _ => Err(Error::InvalidParameter(format!("unknown geometry '{s}'"))),
        }
    }
}

pub fn make_spec(shape: Shape, half_width: usize, boundary: Boundary) -> Result<LatticeSpec> {
    match shape {
        Shape::Torus => LatticeSpec::torus(half_width),
        Shape::Box => Ok(LatticeSpec::square_box(half_width, boundary)),
    }
}

/// `manifest.json`: everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: Command,
    pub code_version: String,
    pub master_seed: u64,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub incomplete: bool,
}

impl Manifest {
    pub fn new<C: Serialize>(command: Command, master_seed: u64, config: &C) -> Result<Self> {
        Ok(Manifest {
            manifest_version: MANIFEST_VERSION,
            command,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            config: serde_json::to_value(config)?,
            outputs: Vec::new(),
            incomplete: false,
        })
    }

    /// Writes to `dir/manifest.json`, or `dir/fit-manifest.json` for fits.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let name = if self.command == Command::Fit {
            FIT_MANIFEST_FILE
        } else {
            MANIFEST_FILE
        };
        fs::write(dir.join(name), text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(Error::InvalidParameter(format!(
                "manifest version {} is not supported",
                m.manifest_version
            )));
        }
        Ok(m)
    }

    pub fn config_as<C: for<'de> Deserialize<'de>>(&self) -> Result<C> {
        Ok(serde_json::from_value(self.config.clone())?)
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// One chain at a fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub half_width: usize,
    pub geometry: Shape,
    pub boundary: Boundary,
    pub beta: f64,
    pub h: f64,
    pub algorithm: Algorithm,
    pub master_seed: u64,
    pub therm: u64,
    pub sweeps: u64,
    pub every: u64,
    /// Not recorded in manifests, so a replay may write elsewhere.
    #[serde(skip, default = "default_out")]
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    /// Continue from this checkpoint instead of a cold start.
    pub resume: Option<PathBuf>,
    /// Write the final chain state here.
    pub checkpoint: Option<PathBuf>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            half_width: 8,
            geometry: Shape::Torus,
            boundary: Boundary::Plus,
            beta: BETA_C,
            h: 0.0,
            algorithm: Algorithm::SwendsenWang,
            master_seed: 0,
            therm: 1000,
            sweeps: 10_000,
            every: 1,
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
            resume: None,
            checkpoint: None,
        }
    }
}

/// Runs one chain and writes `results.{csv,json}` with `sigma0`, `M`, `M2`
/// and `energy` rows.
pub fn run_sample(cfg: &SampleConfig) -> Result<Manifest> {
    let mut state = match &cfg.resume {
        Some(path) => ChainState::load(std::io::BufReader::new(fs::File::open(path)?))?,
        None => {
            let spec = make_spec(cfg.geometry, cfg.half_width, cfg.boundary)?;
            let params = ModelParams::new(cfg.beta, cfg.h)?;
            ChainState::new(
                spec,
                params,
                stream_rng(cfg.master_seed, chain_stream(Command::Sample, 0)),
            )
        }
    };
    let plan = RunPlan::new(cfg.algorithm, cfg.therm, cfg.sweeps).every(cfg.every);
    let (mut s0, mut m, mut m2, mut en) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    state.drive(&plan, false, |s| {
        s0.push(Sigma0::value_of(s));
        let mag = total_magnetization(s.spins) as f64;
        m.push(mag);
        m2.push(mag * mag);
        en.push(crate::model::energy(s.spins, s.spec()).expect("sample matches lattice") as f64);
    })?;
    if s0.is_empty() {
        return Err(Error::InvalidParameter(
            "no measurements: sweeps < every".into(),
        ));
    }
    let spec = *state.spec();
    let p = *state.params();
    let rows: Vec<ResultRow> = [("sigma0", &s0), ("M", &m), ("M2", &m2), ("energy", &en)]
        .iter()
        .map(|(name, xs)| ResultRow::new(name, &spec, p.beta, p.h, 0.0, &Estimate::from_series(xs)))
        .collect();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut manifest = Manifest::new(Command::Sample, cfg.master_seed, cfg)?;
    manifest.outputs = write_table(&cfg.output_dir, "results", &rows, cfg.format)?;
    if let Some(path) = &cfg.checkpoint {
        state.save(std::io::BufWriter::new(fs::File::create(path)?))?;
    }
    manifest.write(&cfg.output_dir)?;
    Ok(manifest)
}

/// The h = 0 torus run that measures `ρ`, the one-arm probability and the
/// cluster tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalConfig {
    pub half_width: usize,
    pub algorithm: Algorithm,
    pub therm: u64,
    pub sweeps: u64,
    pub every: u64,
    /// Origins per axis for the one-arm average.
    pub origins_per_axis: usize,
}

impl CriticalConfig {
    /// Every separation up to `L/2`.
    pub fn separations(&self) -> Vec<usize> {
        (1..=(self.half_width / 2).max(1)).collect()
    }

    /// Dyadic radii `4, 8, …` up to `L/2`.
    pub fn radii(&self) -> Vec<usize> {
        dyadic(4, (self.half_width / 2).max(4))
    }

    /// Dyadic sizes `4, 8, …` up to `L^{15/8} / 4`.
    pub fn sizes(&self) -> Vec<usize> {
        let top = (self.half_width as f64).powf(15.0 / 8.0) / 4.0;
        dyadic(4, (top as usize).max(8))
    }
}

fn dyadic(from: usize, to: usize) -> Vec<usize> {
    std::iter::successors(Some(from), |&x| Some(2 * x))
        .take_while(|&x| x <= to)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalTables {
    pub spec: LatticeSpec,
    pub rho: RhoTable,
    pub one_arm: Vec<(usize, Estimate)>,
    pub tail: TailTable,
    pub sweeps_done: u64,
}

impl CriticalTables {
    pub fn rows(&self) -> (Vec<ResultRow>, Vec<ResultRow>, Vec<ResultRow>) {
        let row = |name: &str, x: usize, e: &Estimate| {
            ResultRow::new(name, &self.spec, BETA_C, 0.0, x as f64, e)
        };
        (
            self.rho
                .entries
                .iter()
                .map(|(n, e)| row("rho", *n, e))
                .collect(),
            self.one_arm
                .iter()
                .map(|(r, e)| row("one_arm", *r, e))
                .collect(),
            self.tail
                .entries
                .iter()
                .map(|(m, e)| row("cluster_tail", *m, e))
                .collect(),
        )
    }
}

pub fn run_critical(cfg: &CriticalConfig, master_seed: u64, stream: u64) -> Result<CriticalTables> {
    let spec = LatticeSpec::torus(cfg.half_width)?;
    let mut rho = RhoDiag::new(&spec, &cfg.separations())?;
    let mut arm = OneArm::new(&spec, &cfg.radii(), cfg.origins_per_axis)?;
    let mut tail = ClusterTail::new(&cfg.sizes())?;
    let mut state = ChainState::new(
        spec,
        ModelParams::critical(0.0)?,
        stream_rng(master_seed, stream),
    );
    let plan = RunPlan::new(cfg.algorithm, cfg.therm, cfg.sweeps).every(cfg.every);
    state.drive(&plan, true, |s| {
        rho.observe(s);
        arm.observe(s);
        tail.observe(s);
    })?;
    Ok(CriticalTables {
        spec,
        rho: rho.finish()?,
        one_arm: arm.finish()?,
        tail: tail.finish()?,
        sweeps_done: plan.n_therm + plan.n_measure,
    })
}

/// `⟨σ₀⟩` from one chain.
pub fn run_field_point(
    spec: LatticeSpec,
    h: f64,
    algorithm: Algorithm,
    therm: u64,
    sweeps: u64,
    every: u64,
    master_seed: u64,
    stream: u64,
) -> Result<Estimate> {
    let mut state = ChainState::new(
        spec,
        ModelParams::critical(h)?,
        stream_rng(master_seed, stream),
    );
    let mut acc = Sigma0::new();
    state.drive(
        &RunPlan::new(algorithm, therm, sweeps).every(every),
        false,
        |s| acc.observe(s),
    )?;
    acc.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub h_grid: Vec<f64>,
    pub safety: f64,
    /// Uses this half-width at every field instead of the planned one.
    #[serde(default)]
    pub half_width: Option<usize>,
    pub geometry: Shape,
    pub boundary: Boundary,
    pub algorithm: Algorithm,
    pub master_seed: u64,
    pub therm: u64,
    /// Measurement sweeps per field chain.
    pub sweeps: u64,
    pub every: u64,
    pub replicas: usize,
    /// Total sweep budget over all chains; unlimited if absent.
    pub budget: Option<u64>,
    /// Critical reference run; skipped if absent.
    pub critical: Option<CriticalConfig>,
    /// Not recorded in manifests, so a replay may write elsewhere.
    #[serde(skip, default = "default_out")]
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            h_grid: vec![0.064, 0.032, 0.016, 0.008, 0.004, 0.002],
            safety: 4.0,
            half_width: None,
            geometry: Shape::Torus,
            boundary: Boundary::Plus,
            algorithm: Algorithm::SwendsenWang,
            master_seed: 0,
            therm: 500,
            sweeps: 4000,
            every: 1,
            replicas: 1,
            budget: None,
            critical: Some(CriticalConfig {
                half_width: 64,
                algorithm: Algorithm::SwendsenWang,
                therm: 500,
                sweeps: 4000,
                every: 1,
                origins_per_axis: 8,
            }),
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum ChainJob {
    Field {
        point: usize,
        h: f64,
        half_width: usize,
        therm: u64,
        sweeps: u64,
    },
    Critical {
        cfg: CriticalConfig,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum ChainOutput {
    Field { point: usize, sigma0: Estimate },
    Critical(Box<CriticalTables>),
}

/// Sweep results with the rows written to disk.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub manifest: Manifest,
    /// `(h, L, ⟨σ₀⟩)` for every completed field point.
    pub sigma0: Vec<(f64, usize, Estimate)>,
    pub critical: Option<CriticalTables>,
}

/// Cuts the planned chains to the budget, in chain order. Returns the jobs
/// and whether anything was cut.
fn budget_jobs(planned: Vec<(u64, ChainJob)>, budget: Option<u64>) -> (Vec<(u64, ChainJob)>, bool) {
    let Some(mut left) = budget else {
        return (planned, false);
    };
    let mut out = Vec::new();
    let mut cut = false;
    for (index, job) in planned {
        let (therm, sweeps) = match &job {
            ChainJob::Field { therm, sweeps, .. } => (*therm, *sweeps),
            ChainJob::Critical { cfg } => (cfg.therm, cfg.sweeps),
        };
        if therm + sweeps <= left {
            left -= therm + sweeps;
            out.push((index, job));
            continue;
        }
        cut = true;
        if left <= therm {
            continue;
        }
        let allowed = left - therm;
        left = 0;
        let job = match job {
            ChainJob::Field {
                point,
                h,
                half_width,
                ..
            } => ChainJob::Field {
                point,
                h,
                half_width,
                therm,
                sweeps: allowed,
            },
            ChainJob::Critical { mut cfg } => {
                cfg.sweeps = allowed;
                ChainJob::Critical { cfg }
            }
        };
        out.push((index, job));
    }
    (out, cut)
}

fn chain_cache(dir: &Path, index: u64) -> PathBuf {
    dir.join("chains").join(format!("chain-{index:04}.json"))
}

/// Plans the lattice sizes, runs all chains (in parallel, collected in chain
/// order), and writes `sigma0`, `rho`, `one_arm` and `cluster_tail` tables
/// plus the manifest. With `resume`, chains cached under `chains/` are
/// reused.
pub fn run_sweep(cfg: &SweepConfig, resume: bool) -> Result<SweepOutput> {
    if cfg.replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be positive".into()));
    }
    let mut plan = plan_h_sweep(&cfg.h_grid, cfg.safety)?;
    if let Some(l) = cfg.half_width {
        plan.iter_mut().for_each(|p| p.1 = l);
    }
    let mut planned = Vec::new();
    for (point, &(h, l)) in plan.iter().enumerate() {
        for r in 0..cfg.replicas {
            planned.push((
                (point * cfg.replicas + r) as u64,
                ChainJob::Field {
                    point,
                    h,
                    half_width: l,
                    therm: cfg.therm,
                    sweeps: cfg.sweeps,
                },
            ));
        }
    }
    if let Some(c) = &cfg.critical {
        planned.push((
            (plan.len() * cfg.replicas) as u64,
            ChainJob::Critical { cfg: c.clone() },
        ));
    }
    let (jobs, incomplete) = budget_jobs(planned, cfg.budget);
    if incomplete {
        log::warn!("sweep budget exhausted: results are incomplete");
    }
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir.join("chains"))?;

    let outputs: Vec<Result<ChainOutput>> = jobs
        .par_iter()
        .map(|(index, job)| {
            let cache = chain_cache(dir, *index);
            if resume && cache.exists() {
                let cached: (ChainJob, ChainOutput) =
                    serde_json::from_str(&fs::read_to_string(&cache)?)?;
                if cached.0 == *job {
                    return Ok(cached.1);
                }
            }
            let stream = chain_stream(Command::Sweep, *index);
            let out = match job {
                ChainJob::Field {
                    point,
                    h,
                    half_width,
                    therm,
                    sweeps,
                } => {
                    let spec = make_spec(cfg.geometry, *half_width, cfg.boundary)?;
                    let e = run_field_point(
                        spec,
                        *h,
                        cfg.algorithm,
                        *therm,
                        *sweeps,
                        cfg.every,
                        cfg.master_seed,
                        stream,
                    )?;
                    ChainOutput::Field {
                        point: *point,
                        sigma0: e,
                    }
                }
                ChainJob::Critical { cfg: c } => {
                    ChainOutput::Critical(Box::new(run_critical(c, cfg.master_seed, stream)?))
                }
            };
            fs::write(&cache, serde_json::to_string(&(job, &out))?)?;
            Ok(out)
        })
        .collect();

    let mut per_point: BTreeMap<usize, Estimate> = BTreeMap::new();
    let mut critical = None;
    for o in outputs {
        match o? {
            ChainOutput::Field { point, sigma0 } => {
                per_point
                    .entry(point)
                    .and_modify(|e| *e = e.merge(&sigma0))
                    .or_insert(sigma0);
            }
            ChainOutput::Critical(t) => critical = Some(*t),
        }
    }
    let sigma0: Vec<(f64, usize, Estimate)> = per_point
        .into_iter()
        .map(|(p, e)| (plan[p].0, plan[p].1, e))
        .collect();

    let mut manifest = Manifest::new(Command::Sweep, cfg.master_seed, cfg)?;
    manifest.incomplete = incomplete;
    let rows: Vec<ResultRow> = sigma0
        .iter()
        .map(|&(h, l, e)| {
            let spec = make_spec(cfg.geometry, l, cfg.boundary).expect("planned size");
            ResultRow::new("sigma0", &spec, BETA_C, h, 0.0, &e)
        })
        .collect();
    manifest
        .outputs
        .extend(write_table(dir, "sigma0", &rows, cfg.format)?);
    if let Some(t) = &critical {
        let (rho, arm, tail) = t.rows();
        manifest
            .outputs
            .extend(write_table(dir, "rho", &rho, cfg.format)?);
        manifest
            .outputs
            .extend(write_table(dir, "one_arm", &arm, cfg.format)?);
        manifest
            .outputs
            .extend(write_table(dir, "cluster_tail", &tail, cfg.format)?);
    }
    manifest.write(dir)?;
    Ok(SweepOutput {
        manifest,
        sigma0,
        critical,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Not recorded either; a replay reads the tables next to its manifest.
    #[serde(skip, default = "default_out")]
    pub input_dir: PathBuf,
    #[serde(skip, default = "default_out")]
    pub output_dir: PathBuf,
    pub cuts: FitCuts,
    pub options: FitOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            input_dir: PathBuf::from("out"),
            output_dir: PathBuf::from("out"),
            cuts: FitCuts::default(),
            options: FitOptions::default(),
        }
    }
}

/// Expected exponents and the accepted bands.
pub const TARGET_MAGNETIZATION: (f64, f64) = (1.0 / 15.0, 0.02);
pub const TARGET_RHO: (f64, f64) = (-0.25, 0.04);
pub const TARGET_ONE_ARM: (f64, f64) = (-0.125, 0.03);
pub const TARGET_TAIL: (f64, f64) = (-1.0 / 15.0, 0.03);

fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    read_csv(file).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        e => e,
    })
}

fn points(rows: &[ResultRow], observable: &str, min_x: f64) -> Vec<(f64, Estimate)> {
    rows.iter()
        .filter(|r| r.observable == observable && r.x >= min_x)
        .map(|r| (r.x, r.estimate()))
        .collect()
}

/// Rebuilds the two-point table from `rho` rows.
pub fn rho_table(rows: &[ResultRow]) -> Result<RhoTable> {
    RhoTable::new(
        Direction::Diagonal,
        rows.iter()
            .filter(|r| r.observable == "rho")
            .map(|r| (r.x as usize, r.estimate()))
            .collect(),
    )
}

/// Field fit, two-point fit, and (when present) one-arm and tail fits plus
/// the consistency report.
pub fn build_report(
    sigma0: &[(f64, Estimate)],
    rho: &RhoTable,
    one_arm: &[(f64, Estimate)],
    tail: &[(f64, Estimate)],
    cuts: &FitCuts,
    opts: &FitOptions,
) -> Result<Report> {
    let mut report = Report {
        cuts: Some(*cuts),
        ..Report::default()
    };
    let mut add =
        |name: &str, target: (f64, f64), pts: Vec<(f64, Estimate)>, ci: bool| -> Result<()> {
            if pts.len() < 3 {
                report.skipped.push((
                    name.to_string(),
                    format!("{} points left after cuts, need 3", pts.len()),
                ));
                return Ok(());
            }
            let law = LawReport::new(name, target.0, target.1, pts, opts)?;
            report.laws.push(if ci { law.require_ci() } else { law });
            Ok(())
        };
    let kept = sigma0
        .iter()
        .copied()
        .filter(|p| cuts.keep_field(rho, p.0))
        .collect();
    add("magnetization", TARGET_MAGNETIZATION, kept, true)?;
    let rho_pts = rho
        .entries
        .iter()
        .filter(|e| e.0 >= cuts.min_separation && e.0 <= cuts.max_separation)
        .map(|e| (e.0 as f64, e.1))
        .collect();
    add("rho", TARGET_RHO, rho_pts, false)?;
    let arm = one_arm
        .iter()
        .copied()
        .filter(|p| p.0 >= cuts.min_radius as f64)
        .collect();
    add("one_arm", TARGET_ONE_ARM, arm, false)?;
    let tail = tail
        .iter()
        .copied()
        .filter(|p| p.0 >= cuts.min_cluster_size as f64)
        .collect();
    add("cluster_tail", TARGET_TAIL, tail, false)?;
    report.consistency = Some(consistency_report(sigma0, rho)?);
    Ok(report)
}

/// Reads the sweep tables from `input_dir`, writes `report.txt`,
/// `report.json` and `fit_<law>.dat` to `output_dir`.
pub fn run_fit(cfg: &FitConfig) -> Result<(Report, Manifest)> {
    let dir = &cfg.input_dir;
    let sigma_rows = read_rows(&dir.join("sigma0.csv"))?;
    let rho_rows = read_rows(&dir.join("rho.csv"))?;
    let optional = |name: &str| -> Result<Vec<ResultRow>> {
        let p = dir.join(name);
        if p.exists() {
            read_rows(&p)
        } else {
            Ok(Vec::new())
        }
    };
    let arm_rows = optional("one_arm.csv")?;
    let tail_rows = optional("cluster_tail.csv")?;
    let sigma0: Vec<(f64, Estimate)> = sigma_rows
        .iter()
        .filter(|r| r.observable == "sigma0")
        .map(|r| (r.h, r.estimate()))
        .collect();
    let rho = rho_table(&rho_rows)?;
    let report = build_report(
        &sigma0,
        &rho,
        &points(&arm_rows, "one_arm", 0.0),
        &points(&tail_rows, "cluster_tail", 0.0),
        &cfg.cuts,
        &cfg.options,
    )?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let mut manifest = Manifest::new(Command::Fit, cfg.options.seed, cfg)?;
    fs::write(out.join("report.txt"), report.to_text())?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    fs::write(out.join("report.json"), json)?;
    manifest.outputs = vec!["report.txt".into(), "report.json".into()];
    for law in &report.laws {
        let name = format!("fit_{}.dat", law.name);
        write_plot_data(&law.points, fs::File::create(out.join(&name))?)?;
        manifest.outputs.push(name);
    }
    manifest.write(out)?;
    Ok((report, manifest))
}

/// Renders a stored `report.json`.
pub fn load_report(dir: &Path) -> Result<Report> {
    Ok(serde_json::from_str(&fs::read_to_string(
        dir.join("report.json"),
    )?)?)
}

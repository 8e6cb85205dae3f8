//! Command-line front end.
//!
//! Settings come from flags, then the `--config` INI file (the command's own
//! section, then `[run]`), then built-in defaults. Exit codes: 0 success,
//! 1 verification or fit failure, 2 usage or configuration error.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ini::Ini;
use serde::Serialize;

use crate::error::Error;
use crate::exact::WeightedGraph;
use crate::fit::{FitCuts, FitOptions};
use crate::mc::Algorithm;
use crate::model::{Boundary, BETA_C};
use crate::pipeline::{
    load_report, run_fit, run_sample, run_sweep, Command, CriticalConfig, FitConfig, Manifest,
    OutputFormat, SampleConfig, Shape, SweepConfig, FIT_MANIFEST_FILE,
};
use crate::verify::{run_verify, VerifyConfig};

/// Printing that tolerates a closed stdout, as in `isingfield fit | head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say_raw {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "isingfield",
    version,
    about = "Critical 2D Ising magnetization in a small field"
)]
struct Cli {
    /// INI file with [run], [verify], [sample], [sweep] and [fit] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Exact property suites on small graphs.
    Verify(VerifyArgs),
    /// A single Markov chain.
    Sample(SampleArgs),
    /// Field sweep plus the h = 0 reference run.
    Sweep(SweepArgs),
    /// Power-law fits of the sweep tables.
    Fit(FitArgs),
    /// Print a stored fit report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or both.
    #[arg(long)]
    format: Option<OutputFormat>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    tolerance: Option<f64>,
    /// Number of random graphs.
    #[arg(long)]
    graphs: Option<usize>,
    /// Extra graph files, checked after the random ones.
    #[arg(long = "graph")]
    graph_files: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Half-width L; the lattice side is 2L+1.
    #[arg(long = "L")]
    l: Option<usize>,
    /// torus or box.
    #[arg(long)]
    geometry: Option<Shape>,
    /// plus or free (boxes only).
    #[arg(long)]
    boundary: Option<Boundary>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// heatbath, wolff or sw.
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    therm: Option<u64>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    every: Option<u64>,
    /// Write the final chain state here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from a checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated fields.
    #[arg(long, value_delimiter = ',')]
    h_grid: Option<Vec<f64>>,
    #[arg(long)]
    safety: Option<f64>,
    /// Fixed half-width for every field instead of the planned one.
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    geometry: Option<Shape>,
    #[arg(long)]
    boundary: Option<Boundary>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    therm: Option<u64>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    every: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Total sweeps over all chains.
    #[arg(long)]
    budget: Option<u64>,
    /// Half-width of the h = 0 torus run.
    #[arg(long = "critical-L")]
    critical_l: Option<usize>,
    #[arg(long)]
    critical_therm: Option<u64>,
    #[arg(long)]
    critical_sweeps: Option<u64>,
    /// Origins per axis for the one-arm average.
    #[arg(long)]
    origins: Option<usize>,
    /// Skip the h = 0 run.
    #[arg(long)]
    no_critical: bool,
    /// Reuse chains cached in the output directory.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Directory holding the sweep tables.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long)]
    min_separation: Option<usize>,
    #[arg(long)]
    max_separation: Option<usize>,
    #[arg(long)]
    min_correlation_length: Option<usize>,
    #[arg(long)]
    min_radius: Option<usize>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory holding report.json.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

/// Failure that maps to an exit code.
#[derive(Debug)]
enum Exit {
    Usage(String),
    Failed(String),
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        Exit::Usage(e.to_string())
    }
}

/// Flag, then config file, then default.
struct Layers {
    ini: Option<Ini>,
    section: &'static str,
}

impl Layers {
    fn raw(&self, key: &str) -> Option<&str> {
        let ini = self.ini.as_ref()?;
        let alt = key.replace('-', "_");
        [self.section, "run"].iter().find_map(|s| {
            let p = ini.section(Some(*s))?;
            p.get(key).or_else(|| p.get(&alt))
        })
    }

    fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Exit>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .trim()
                .parse()
                .map(Some)
                .map_err(|e| Exit::Usage(format!("config key '{key}': {e}"))),
        }
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Exit>
    where
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn list(&self, flag: Option<Vec<f64>>, key: &str, default: Vec<f64>) -> Result<Vec<f64>, Exit> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| Exit::Usage(format!("config key '{key}': {e}"))),
        }
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool, Exit> {
        Ok(flag || self.opt(None::<bool>, key)?.unwrap_or(false))
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Exit::Failed(msg)) => {
            eprintln!("{msg}");
            EXIT_FAILED
        }
        Err(Exit::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Exit> {
    let ini = match &cli.config {
        Some(p) => {
            Some(Ini::load_from_file(p).map_err(|e| Exit::Usage(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    let layers = |section| Layers {
        ini: ini.clone(),
        section,
    };
    match cli.command {
        Cmd::Verify(a) => verify(a, &layers("verify")),
        Cmd::Sample(a) => sample(a, &layers("sample")),
        Cmd::Sweep(a) => sweep(a, &layers("sweep")),
        Cmd::Fit(a) => fit(a, &layers("fit")),
        Cmd::Report(a) => report(a, &layers("report")),
    }
}

fn replay<C: for<'de> serde::Deserialize<'de>>(path: &Path, command: Command) -> Result<C, Exit> {
    let m = Manifest::read(path)?;
    if m.command != command {
        return Err(Exit::Usage(format!(
            "{} was written by '{}', not '{}'",
            path.display(),
            m.command.name(),
            command.name()
        )));
    }
    Ok(m.config_as()?)
}

/// Replays go next to the manifest unless `--out` says otherwise.
fn replay_dir(manifest: &Path, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default())
}

#[derive(Serialize)]
struct VerifyRecord {
    n_graphs: usize,
    seed: u64,
    tolerance: f64,
    graph_files: Vec<PathBuf>,
}

fn verify(a: VerifyArgs, l: &Layers) -> Result<(), Exit> {
    let defaults = VerifyConfig::default();
    let mut extra = Vec::new();
    for p in &a.graph_files {
        let text =
            fs::read_to_string(p).map_err(|e| Exit::Usage(format!("{}: {e}", p.display())))?;
        let g: WeightedGraph = text
            .parse()
            .map_err(|e: Error| Exit::Usage(format!("{}: {e}", p.display())))?;
        extra.push(g);
    }
    let cfg = VerifyConfig {
        n_graphs: l.get(a.graphs, "graphs", defaults.n_graphs)?,
        seed: l.get(a.common.seed, "seed", defaults.seed)?,
        tolerance: l.get(a.tolerance, "tolerance", defaults.tolerance)?,
        extra_graphs: extra,
    };
    if !(cfg.tolerance >= 0.0) {
        return Err(Exit::Usage("tolerance must be non-negative".into()));
    }
    let out: PathBuf = l.get(a.common.out, "out", PathBuf::from("out"))?;
    let report = run_verify(&cfg)?;
    for s in &report.suites {
        say!(
            "{:<15} {:>7} checks  {}",
            s.name,
            s.checks,
            if s.passed() {
                "ok".to_string()
            } else {
                format!("{} violations", s.violations.len())
            }
        );
    }
    fs::create_dir_all(&out).map_err(Error::from)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    json.push('\n');
    fs::write(out.join("verify.json"), json).map_err(Error::from)?;
    let record = VerifyRecord {
        n_graphs: cfg.n_graphs,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
        graph_files: a.graph_files,
    };
    let mut manifest = Manifest::new(Command::Verify, cfg.seed, &record)?;
    manifest.outputs = vec!["verify.json".into()];
    manifest.write(&out)?;
    if report.passed() {
        Ok(())
    } else {
        let failures: Vec<_> = report.violations().collect();
        say!(
            "{}",
            serde_json::to_string_pretty(&failures).map_err(Error::from)?
        );
        Err(Exit::Failed(format!(
            "verify: {} violations",
            failures.len()
        )))
    }
}

fn sample(a: SampleArgs, l: &Layers) -> Result<(), Exit> {
    let cfg = if let Some(m) = &a.manifest {
        let mut c: SampleConfig = replay(m, Command::Sample)?;
        c.output_dir = replay_dir(m, a.common.out);
        c
    } else {
        let d = SampleConfig::default();
        SampleConfig {
            half_width: l.get(a.l, "L", d.half_width)?,
            geometry: l.get(a.geometry, "geometry", d.geometry)?,
            boundary: l.get(a.boundary, "boundary", d.boundary)?,
            beta: l.get(a.beta, "beta", BETA_C)?,
            h: l.get(a.h, "h", d.h)?,
            algorithm: l.get(a.algo, "algo", d.algorithm)?,
            master_seed: l.get(a.common.seed, "seed", d.master_seed)?,
            therm: l.get(a.therm, "therm", d.therm)?,
            sweeps: l.get(a.sweeps, "sweeps", d.sweeps)?,
            every: l.get(a.every, "every", d.every)?,
            output_dir: l.get(a.common.out, "out", d.output_dir)?,
            format: l.get(a.common.format, "format", d.format)?,
            resume: l.opt(a.resume, "resume")?,
            checkpoint: l.opt(a.checkpoint, "checkpoint")?,
        }
    };
    let m = run_sample(&cfg)?;
    say!(
        "wrote {} to {}",
        m.outputs.join(", "),
        cfg.output_dir.display()
    );
    Ok(())
}

fn sweep(a: SweepArgs, l: &Layers) -> Result<(), Exit> {
    let resume = l.flag(a.resume, "resume")?;
    let cfg = if let Some(m) = &a.manifest {
        let mut c: SweepConfig = replay(m, Command::Sweep)?;
        c.output_dir = replay_dir(m, a.common.out);
        c
    } else {
        let d = SweepConfig::default();
        let dc = d.critical.clone().expect("default has a critical run");
        let critical = if l.flag(a.no_critical, "no-critical")? {
            None
        } else {
            Some(CriticalConfig {
                half_width: l.get(a.critical_l, "critical-L", dc.half_width)?,
                algorithm: l.get(a.algo, "algo", dc.algorithm)?,
                therm: l.get(a.critical_therm, "critical-therm", dc.therm)?,
                sweeps: l.get(a.critical_sweeps, "critical-sweeps", dc.sweeps)?,
                every: l.get(a.every, "every", dc.every)?,
                origins_per_axis: l.get(a.origins, "origins", dc.origins_per_axis)?,
            })
        };
        SweepConfig {
            h_grid: l.list(a.h_grid, "h-grid", d.h_grid)?,
            safety: l.get(a.safety, "safety", d.safety)?,
            half_width: l.opt(a.l, "L")?,
            geometry: l.get(a.geometry, "geometry", d.geometry)?,
            boundary: l.get(a.boundary, "boundary", d.boundary)?,
            algorithm: l.get(a.algo, "algo", d.algorithm)?,
            master_seed: l.get(a.common.seed, "seed", d.master_seed)?,
            therm: l.get(a.therm, "therm", d.therm)?,
            sweeps: l.get(a.sweeps, "sweeps", d.sweeps)?,
            every: l.get(a.every, "every", d.every)?,
            replicas: l.get(a.replicas, "replicas", d.replicas)?,
            budget: l.opt(a.budget, "budget")?,
            critical,
            output_dir: l.get(a.common.out, "out", d.output_dir)?,
            format: l.get(a.common.format, "format", d.format)?,
        }
    };
    let out = run_sweep(&cfg, resume)?;
    for (h, half, e) in &out.sigma0 {
        say!(
            "h = {h:<8} L = {half:<5} sigma0 = {:.6} ± {:.6}",
            e.value,
            e.stderr
        );
    }
    if out.manifest.incomplete {
        eprintln!(
            "warning: budget exhausted, results in {} are incomplete",
            cfg.output_dir.display()
        );
    }
    say!(
        "wrote {} to {}",
        out.manifest.outputs.join(", "),
        cfg.output_dir.display()
    );
    Ok(())
}

fn fit(a: FitArgs, l: &Layers) -> Result<(), Exit> {
    let cfg = if let Some(m) = &a.manifest {
        let mut c: FitConfig = replay(m, Command::Fit)?;
        c.input_dir = replay_dir(m, a.input);
        c.output_dir = replay_dir(m, a.out);
        c
    } else {
        let dc = FitCuts::default();
        let dopt = FitOptions::default();
        let input: PathBuf = l.get(a.input, "input", PathBuf::from("out"))?;
        FitConfig {
            output_dir: l.get(a.out, "out", input.clone())?,
            input_dir: input,
            cuts: FitCuts {
                min_separation: l.get(a.min_separation, "min-separation", dc.min_separation)?,
                max_separation: l.get(a.max_separation, "max-separation", dc.max_separation)?,
                min_correlation_length: l.get(
                    a.min_correlation_length,
                    "min-correlation-length",
                    dc.min_correlation_length,
                )?,
                min_radius: l.get(a.min_radius, "min-radius", dc.min_radius)?,
                min_cluster_size: l.get(
                    a.min_cluster_size,
                    "min-cluster-size",
                    dc.min_cluster_size,
                )?,
            },
            options: FitOptions {
                n_bootstrap: l.get(a.bootstrap, "bootstrap", dopt.n_bootstrap)?,
                seed: l.get(a.seed, "seed", dopt.seed)?,
                level: dopt.level,
            },
        }
    };
    let (report, _) = run_fit(&cfg)?;
    say_raw!("{}", report.to_text());
    if report.passed() {
        Ok(())
    } else {
        Err(Exit::Failed(
            "fit: at least one law outside its band".into(),
        ))
    }
}

fn report(a: ReportArgs, l: &Layers) -> Result<(), Exit> {
    let dir: PathBuf = l.get(a.input, "input", PathBuf::from("out"))?;
    let r = load_report(&dir)
        .map_err(|e| Exit::Usage(format!("{}: {e}", dir.join("report.json").display())))?;
    if a.json {
        say!("{}", serde_json::to_string_pretty(&r).map_err(Error::from)?);
    } else {
        say_raw!("{}", r.to_text());
        let manifest = dir.join(FIT_MANIFEST_FILE);
        if let Ok(m) = Manifest::read(&manifest) {
            say!(
                "({} {}, seed {})",
                m.command.name(),
                m.code_version,
                m.master_seed
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layers(text: &str, section: &'static str) -> Layers {
        Layers {
            ini: Some(Ini::load_from_str(text).unwrap()),
            section,
        }
    }

    #[test]
    fn flags_beat_file_beats_default() {
        let l = layers(
            "[run]\nseed = 7\n[sweep]\nsafety = 2.5\nh_grid = 0.5, 0.25\n",
            "sweep",
        );
        assert_eq!(l.get(None, "seed", 0u64).unwrap(), 7);
        assert_eq!(l.get(Some(9), "seed", 0u64).unwrap(), 9);
        assert_eq!(l.get(None, "safety", 4.0).unwrap(), 2.5);
        assert_eq!(l.get(None, "replicas", 3usize).unwrap(), 3);
        assert_eq!(l.list(None, "h-grid", vec![]).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn bad_config_value_is_a_usage_error() {
        let l = layers("[sample]\nalgo = metropolis\n", "sample");
        assert!(matches!(
            l.get(None, "algo", Algorithm::Wolff),
            Err(Exit::Usage(_))
        ));
    }

    #[test]
    fn parse_errors_exit_2() {
        assert_eq!(run(["isingfield", "frobnicate"]), EXIT_USAGE);
        assert_eq!(
            run(["isingfield", "sample", "--algo", "metropolis"]),
            EXIT_USAGE
        );
        assert_eq!(run(["isingfield", "--help"]), EXIT_OK);
    }
}

//! A small end-to-end run: field sweep with its reference run, fits and the
//! consistency table, then a replay from the manifest.

use std::path::Path;

use isingfield::fit::{FitCuts, FitOptions};
use isingfield::mc::Algorithm;
use isingfield::pipeline::{
    run_fit, run_sweep, CriticalConfig, FitConfig, Manifest, SweepConfig, MANIFEST_FILE,
};

fn main() -> isingfield::Result<()> {
    let out = Path::new("target/field_sweep");
    let cfg = SweepConfig {
        h_grid: vec![0.064, 0.032, 0.016, 0.008],
        safety: 2.0,
        sweeps: 1000,
        therm: 200,
        critical: Some(CriticalConfig {
            half_width: 32,
            algorithm: Algorithm::SwendsenWang,
            therm: 200,
            sweeps: 1000,
            every: 1,
            origins_per_axis: 4,
        }),
        output_dir: out.to_path_buf(),
        ..SweepConfig::default()
    };
    let sweep = run_sweep(&cfg, false)?;
    for (h, l, e) in &sweep.sigma0 {
        println!(
            "h = {h:<6} L = {l:<4} <s0> = {:.4} ± {:.4}",
            e.value, e.stderr
        );
    }

    let fit = FitConfig {
        input_dir: out.to_path_buf(),
        output_dir: out.to_path_buf(),
        cuts: FitCuts {
            min_correlation_length: 4,
            max_separation: 8,
            min_radius: 4,
            ..FitCuts::default()
        },
        options: FitOptions::default(),
    };
    let (report, _) = run_fit(&fit)?;
    print!("{}", report.to_text());

    let manifest = Manifest::read(&out.join(MANIFEST_FILE))?;
    let mut again: SweepConfig = manifest.config_as()?;
    again.output_dir = out.join("replay");
    run_sweep(&again, false)?;
    let same = ["sigma0.csv", "rho.csv", MANIFEST_FILE]
        .iter()
        .all(|f| std::fs::read(out.join(f)).ok() == std::fs::read(again.output_dir.join(f)).ok());
    println!("replay identical: {same}");
    Ok(())
}

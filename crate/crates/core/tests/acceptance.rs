//! Acceptance run: one PASS/FAIL line per criterion and a summary. A FAIL
//! exits nonzero only with ACCEPTANCE_STRICT=1. Criteria 4 to 7 and 9 share
//! one sweep.

use std::fs;
use std::path::Path;
use std::time::Instant;

use isingfield::estimators::{spread, Accumulator, GhostAvoidance, MagnetizationMoments};
use isingfield::exact::{exact_moments, exact_rc_connectivity, magnetizations, WeightedGraph};
use isingfield::fit::{FitCuts, FitOptions, LawReport, Report};
use isingfield::mc::{stream_rng, Algorithm, ChainState, RunPlan};
use isingfield::pipeline::{
    build_report, run_field_point, run_fit, run_sweep, CriticalConfig, FitConfig, Manifest, Shape,
    SweepConfig, MANIFEST_FILE,
};
use isingfield::stats::Estimate;
use isingfield::verify::{ghs_suite, kappa3_suite, suite_graphs, VerifyConfig};
use isingfield::{Boundary, LatticeSpec, ModelParams, BETA_C};

const SEED: u64 = 20_260_415;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {} {name}: {} ({secs:.1} s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.passed {
            failures += 1;
        }
    };

    report(1, "GHS and kappa3 on random ferromagnets", &mut ghs);
    report(
        2,
        "Edwards-Sokal identity on small grids",
        &mut edwards_sokal,
    );
    report(3, "samplers against exact plus boxes", &mut samplers);

    let t = Instant::now();
    let sweep = main_sweep(dir.path());
    println!("(shared sweep: {:.1} s)", t.elapsed().as_secs_f64());
    report(4, "two-point exponent", &mut || law(&sweep, "rho"));
    report(5, "one-arm exponent", &mut || law(&sweep, "one_arm"));
    report(6, "cluster-tail exponent", &mut || {
        law(&sweep, "cluster_tail")
    });
    report(7, "magnetization exponent", &mut || {
        law(&sweep, "magnetization")
    });
    report(8, "moment bounds on plus boxes", &mut moments);
    report(9, "consistency and torus vs plus box", &mut || {
        consistency(&sweep)
    });
    report(10, "ghost-avoidance decay", &mut ghost_avoidance);
    report(11, "replay from manifest", &mut || determinism(dir.path()));

    if failures == 0 {
        println!("all criteria passed");
        return;
    }
    println!("{failures} of 11 criteria failed");
    // a failing criterion is a result, not a broken build; set
    // ACCEPTANCE_STRICT=1 to turn it into a nonzero exit
    if std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}

fn ghs() -> Outcome {
    let cfg = VerifyConfig {
        n_graphs: 200,
        seed: SEED,
        ..VerifyConfig::default()
    };
    let graphs = suite_graphs(&cfg);
    let frozen = graphs
        .iter()
        .filter(|g| g.free_vertices().len() < g.n_vertices())
        .count();
    let ok_shape = graphs.iter().all(|g| {
        g.n_vertices() <= 5
            && g.edges().iter().all(|e| (0.0..=2.0).contains(&e.coupling))
            && (0..g.n_vertices()).all(|v| (0.0..=2.0).contains(&g.field(v)))
    });
    let g = ghs_suite(&graphs, 1e-10).expect("ghs suite");
    let k = kappa3_suite(&graphs, 1e-10).expect("kappa3 suite");
    outcome(
        ok_shape && g.passed() && k.passed() && frozen > 0,
        format!(
            "{} graphs ({frozen} with frozen vertices), {} triples and {} cumulants, {} violations",
            graphs.len(),
            g.checks,
            k.checks,
            g.violations.len() + k.violations.len()
        ),
    )
}

fn edwards_sokal() -> Outcome {
    let mut worst = 0.0f64;
    for (cols, rows) in [(1, 1), (2, 2), (2, 3)] {
        for h in [0.1, 0.5] {
            let g = WeightedGraph::grid(cols, rows, h).expect("grid");
            let m = magnetizations(&g, BETA_C).expect("enumeration");
            for (x, mx) in m.iter().enumerate() {
                let p = exact_rc_connectivity(&g, BETA_C, 0.0, x).expect("random-cluster sum");
                worst = worst.max((mx - p).abs());
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("largest |<s_x> - P(x <-> g)| = {worst:.1e}"),
    )
}

fn samplers() -> Outcome {
    let mut worst = 0.0f64;
    let mut checks = 0;
    let mut stream = 0;
    for spec in [
        LatticeSpec::square_box(1, Boundary::Plus),
        LatticeSpec::box_with_side(4, Boundary::Plus).expect("4x4 box"),
    ] {
        for h in [0.0, 0.2, 0.5] {
            let g = WeightedGraph::from_lattice(&spec, h).expect("graph");
            let exact_m = exact_moments(&g, BETA_C).expect("moments").mean_m;
            let exact_s0 = magnetizations(&g, BETA_C).expect("magnetizations")[spec.origin()];
            for algo in Algorithm::ALL {
                let params = ModelParams::critical(h).expect("params");
                let mut state = ChainState::new(spec, params, stream_rng(SEED, stream));
                stream += 1;
                let mut acc = MagnetizationMoments::new();
                let mut s0 = Vec::new();
                state
                    .drive(&RunPlan::new(algo, 2000, 100_000), false, |s| {
                        acc.observe(s);
                        s0.push(s.spins.get(spec.origin()) as f64);
                    })
                    .expect("chain");
                let (m, _) = acc.finish().expect("moments");
                let s0 = Estimate::from_series(&s0);
                for (e, exact) in [(m, exact_m), (s0, exact_s0)] {
                    worst = worst.max(((e.value - exact) / e.stderr).abs());
                    checks += 1;
                }
            }
        }
    }
    outcome(
        worst <= 4.0,
        format!("{checks} comparisons, largest deviation {worst:.2} standard errors"),
    )
}

struct Shared {
    report: Report,
}

fn main_sweep(dir: &Path) -> Shared {
    let cfg = SweepConfig {
        h_grid: vec![0.064, 0.032, 0.016, 0.008, 0.004, 0.002],
        safety: 4.0,
        geometry: Shape::Torus,
        algorithm: Algorithm::SwendsenWang,
        master_seed: SEED,
        therm: 500,
        sweeps: 4000,
        critical: Some(CriticalConfig {
            half_width: 128,
            algorithm: Algorithm::SwendsenWang,
            therm: 500,
            sweeps: 6000,
            every: 1,
            origins_per_axis: 8,
        }),
        output_dir: dir.join("sweep"),
        ..SweepConfig::default()
    };
    let out = run_sweep(&cfg, false).expect("sweep");
    let t = out.critical.expect("critical run");
    let sigma0: Vec<(f64, Estimate)> = out.sigma0.iter().map(|&(h, _, e)| (h, e)).collect();
    for (h, l, e) in &out.sigma0 {
        println!(
            "    h = {h:<6} L = {l:<4} <s0> = {:.5} ± {:.5}",
            e.value, e.stderr
        );
    }
    let arm: Vec<_> = t.one_arm.iter().map(|&(r, e)| (r as f64, e)).collect();
    let tail: Vec<_> = t.tail.entries.iter().map(|&(m, e)| (m as f64, e)).collect();
    let report = build_report(
        &sigma0,
        &t.rho,
        &arm,
        &tail,
        &FitCuts::default(),
        &FitOptions::default(),
    )
    .expect("fit report");
    for line in report.to_text().lines() {
        println!("    {line}");
    }
    Shared { report }
}

fn find<'a>(s: &'a Shared, name: &str) -> Option<&'a LawReport> {
    s.report.laws.iter().find(|l| l.name == name)
}

fn law(s: &Shared, name: &str) -> Outcome {
    match find(s, name) {
        None => outcome(false, format!("no {name} fit")),
        Some(l) => {
            let (lo, hi) = l.fit.exponent_ci;
            let x = |p: &(f64, Estimate)| p.0;
            outcome(
                l.passed(),
                format!(
                    "exponent {:.4} [{lo:.4}, {hi:.4}] over x in [{}, {}] ({} points), target {:.4} ± {}{}",
                    l.fit.exponent,
                    l.points.first().map_or(0.0, x),
                    l.points.last().map_or(0.0, x),
                    l.points.len(),
                    l.target,
                    l.tolerance,
                    if l.ci_required { ", interval must cover it" } else { "" }
                ),
            )
        }
    }
}

fn moments() -> Outcome {
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (k, l) in [8usize, 16, 32, 64].into_iter().enumerate() {
        let spec = LatticeSpec::square_box(l, Boundary::Plus);
        let mut state = ChainState::new(
            spec,
            ModelParams::critical(0.0).expect("params"),
            stream_rng(SEED, 100 + k as u64),
        );
        let mut acc = MagnetizationMoments::new();
        state
            .drive(
                &RunPlan::new(Algorithm::SwendsenWang, 500, 4000),
                false,
                |s| acc.observe(s),
            )
            .expect("chain");
        let (m, m2) = acc.finish().expect("moments");
        let lf = l as f64;
        first.push(m.value / lf.powf(15.0 / 8.0));
        second.push(m2.value / lf.powf(15.0 / 4.0));
    }
    let (a, b) = (
        spread(first.iter().copied()),
        spread(second.iter().copied()),
    );
    outcome(
        a <= 3.0 && b <= 3.0,
        format!(
            "<M>/L^(15/8) = {first:.3?} (spread {a:.3}), <M^2>/L^(15/4) = {second:.3?} (spread {b:.3}), limit 3"
        ),
    )
}

fn consistency(s: &Shared) -> Outcome {
    let Some(c) = &s.report.consistency else {
        return outcome(false, "no consistency report");
    };
    let h = 0.05;
    let l = 64;
    let run = |spec, k: u64| {
        run_field_point(
            spec,
            h,
            Algorithm::SwendsenWang,
            500,
            4000,
            1,
            SEED,
            200 + k,
        )
        .expect("field chain")
    };
    let torus = run(LatticeSpec::torus(l).expect("torus"), 0);
    let plus = run(LatticeSpec::square_box(l, Boundary::Plus), 1);
    let rel = (torus.value - plus.value).abs() / plus.value;
    outcome(
        !c.flagged && c.spread_rho <= 5.0 && c.spread_hl2 <= 5.0 && rel <= 0.10,
        format!(
            "spreads {:.3} and {:.3} (limit 5); L = {l}, h = {h}: torus {:.4} vs plus box {:.4}, differ by {:.2}% (limit 10%)",
            c.spread_rho,
            c.spread_hl2,
            torus.value,
            plus.value,
            100.0 * rel
        ),
    )
}

fn ghost_avoidance() -> Outcome {
    let h = 0.01;
    let spec = LatticeSpec::torus(47).expect("torus");
    let ms: Vec<usize> = (0..8).map(|k| 1 << k).collect();
    let mut acc = GhostAvoidance::new(&ms).expect("sizes");
    let mut state = ChainState::new(
        spec,
        ModelParams::critical(h).expect("params"),
        stream_rng(SEED, 300),
    );
    state
        .drive(
            &RunPlan::new(Algorithm::SwendsenWang, 500, 4000),
            true,
            |s| acc.observe(s),
        )
        .expect("chain");
    let table = acc.finish().expect("conditional probabilities");
    let mut ok = true;
    let mut parts = Vec::new();
    for w in table.windows(2) {
        let (a, b) = (w[0].1.value, w[1].1.value);
        if a.value <= 0.0 || b.value <= 0.0 {
            ok = false;
            parts.push(format!("M = {}: zero estimate", w[1].0));
            continue;
        }
        let r = b.value / a.value;
        let sr = r * ((a.stderr / a.value).powi(2) + (b.stderr / b.value).powi(2)).sqrt();
        ok &= r + sr < 1.0;
        parts.push(format!("{}->{}: {r:.3}±{sr:.3}", w[0].0, w[1].0));
    }
    outcome(
        ok,
        format!(
            "h = {h}, ratios P(avoid | |C| >= 2M) / P(avoid | |C| >= M): {}",
            parts.join(", ")
        ),
    )
}

fn determinism(root: &Path) -> Outcome {
    let first = root.join("replay-a");
    let second = root.join("replay-b");
    let cfg = SweepConfig {
        h_grid: vec![0.1, 0.05, 0.025],
        safety: 2.0,
        master_seed: SEED,
        therm: 100,
        sweeps: 500,
        replicas: 2,
        critical: Some(CriticalConfig {
            half_width: 24,
            algorithm: Algorithm::SwendsenWang,
            therm: 100,
            sweeps: 500,
            every: 1,
            origins_per_axis: 2,
        }),
        output_dir: first.clone(),
        ..SweepConfig::default()
    };
    let fit = |dir: &Path| FitConfig {
        input_dir: dir.to_path_buf(),
        output_dir: dir.to_path_buf(),
        cuts: FitCuts {
            min_correlation_length: 1,
            max_separation: 12,
            min_radius: 4,
            ..FitCuts::default()
        },
        options: FitOptions::default(),
    };
    run_sweep(&cfg, false).expect("sweep");
    let _ = run_fit(&fit(&first));
    let manifest = Manifest::read(&first.join(MANIFEST_FILE)).expect("manifest");
    let mut again: SweepConfig = manifest.config_as().expect("recorded config");
    again.output_dir = second.clone();
    run_sweep(&again, false).expect("replayed sweep");
    let _ = run_fit(&fit(&second));
    let mut names: Vec<String> = fs::read_dir(&first)
        .expect("listing")
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(first.join(n)).ok() != fs::read(second.join(n)).ok())
        .collect();
    outcome(
        differing.is_empty() && names.len() >= 10,
        format!(
            "{} files compared, {} differ {:?}",
            names.len(),
            differing.len(),
            differing
        ),
    )
}

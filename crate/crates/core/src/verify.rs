//! Exact property suites on small ferromagnetic graphs.

use serde::Serialize;

use crate::error::Result;
use crate::exact::{
    conditional_ghost_edge_prob, exact_moments, exact_rc_connectivity, ghs_lhs, magnetizations,
    WeightedGraph,
};
use crate::mc::stream_rng;
use crate::model::{bond_probability, BETA_C};

/// Inverse temperature used on random graphs; couplings carry the scale.
const RANDOM_BETA: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub n_graphs: usize,
    pub seed: u64,
    /// Allowed excess over each inequality or identity.
    pub tolerance: f64,
    /// Graphs checked in addition to the random ones.
    pub extra_graphs: Vec<WeightedGraph>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n_graphs: 200,
            seed: 0,
            tolerance: 1e-10,
            extra_graphs: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub suite: &'static str,
    pub detail: String,
    /// Amount by which the check failed, before the tolerance.
    pub excess: f64,
    /// The offending graph in the text format, if any.
    pub graph: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub violations: Vec<Violation>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            checks: 0,
            violations: Vec::new(),
        }
    }

    /// Records `excess ≤ tol`.
    fn check(
        &mut self,
        excess: f64,
        tol: f64,
        detail: impl FnOnce() -> String,
        graph: Option<&WeightedGraph>,
    ) {
        self.checks += 1;
        if !(excess <= tol) {
            self.violations.push(Violation {
                suite: self.name,
                detail: detail(),
                excess,
                graph: graph.map(|g| g.to_string()),
            });
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub tolerance: f64,
    pub n_graphs: usize,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation> {
        self.suites.iter().flat_map(|s| &s.violations)
    }
}

/// The graphs a run covers: `n_graphs` seeded random ferromagnets, then the
/// extra graphs.
pub fn suite_graphs(cfg: &VerifyConfig) -> Vec<WeightedGraph> {
    let mut out: Vec<WeightedGraph> = (0..cfg.n_graphs)
        .map(|k| WeightedGraph::random_ferromagnet(&mut stream_rng(cfg.seed, k as u64)))
        .collect();
    out.extend(cfg.extra_graphs.iter().cloned());
    out
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let graphs = suite_graphs(cfg);
    let tol = cfg.tolerance;
    let suites = vec![
        ghs_suite(&graphs, tol)?,
        kappa3_suite(&graphs, tol)?,
        edwards_sokal_suite(&graphs, tol)?,
        finite_energy_suite(tol)?,
        monotonicity_suite(&graphs, tol)?,
    ];
    Ok(VerifyReport {
        tolerance: tol,
        n_graphs: graphs.len(),
        suites,
    })
}

/// The three-point combination is non-positive for every triple of free
/// vertices, repeats included.
pub fn ghs_suite(graphs: &[WeightedGraph], tol: f64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("ghs");
    for g in graphs {
        let free = g.free_vertices();
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate().skip(a) {
                for &k in &free[b..] {
                    let v = ghs_lhs(g, RANDOM_BETA, i, j, k)?;
                    r.check(v, tol, || format!("ghs({i}, {j}, {k}) = {v:e}"), Some(g));
                }
            }
        }
    }
    Ok(r)
}

/// Third cumulant of the free magnetization is non-positive.
pub fn kappa3_suite(graphs: &[WeightedGraph], tol: f64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("kappa3");
    for g in graphs {
        let k3 = exact_moments(g, RANDOM_BETA)?.kappa3;
        r.check(k3, tol, || format!("kappa3 = {k3:e}"), Some(g));
    }
    Ok(r)
}

/// Spin magnetization equals the random-cluster probability of joining the
/// ghost, on small grids at `β_c` and on the random graphs.
pub fn edwards_sokal_suite(graphs: &[WeightedGraph], tol: f64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("edwards-sokal");
    let mut cases = Vec::new();
    for (cols, rows) in [(1, 1), (2, 2), (2, 3)] {
        for h in [0.1, 0.5] {
            cases.push((WeightedGraph::grid(cols, rows, h)?, BETA_C));
        }
    }
    cases.extend(graphs.iter().map(|g| (g.clone(), RANDOM_BETA)));
    for (g, beta) in &cases {
        let m = magnetizations(g, *beta)?;
        for (x, &mx) in m.iter().enumerate() {
            let p = exact_rc_connectivity(g, *beta, 0.0, x)?;
            let d = (mx - p).abs();
            r.check(
                d,
                tol,
                || format!("vertex {x}: <s> = {mx} but P(x <-> g) = {p}"),
                Some(g),
            );
        }
    }
    Ok(r)
}

/// A closed ghost edge with unconnected endpoints opens with probability at
/// least `0.9 h` for `h ≤ 0.1`, and the single-vertex random-cluster sum
/// reproduces `tanh h`.
pub fn finite_energy_suite(tol: f64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("finite-energy");
    for k in 1..=100 {
        let h = 0.001 * k as f64;
        let p = bond_probability(h);
        let lo = conditional_ghost_edge_prob(p, false);
        let hi = conditional_ghost_edge_prob(p, true);
        r.check(0.9 * h - lo, tol, || format!("h = {h}: {lo} < 0.9 h"), None);
        r.check(
            lo - hi,
            tol,
            || format!("h = {h}: unconnected {lo} > connected {hi}"),
            None,
        );
        let mut g = WeightedGraph::new(1)?;
        g.set_field(0, h)?;
        let rc = exact_rc_connectivity(&g, BETA_C, 0.0, 0)?;
        let d = (rc - lo).abs().max((rc - h.tanh()).abs());
        r.check(
            d,
            tol,
            || format!("h = {h}: single vertex {rc} vs tanh {}", h.tanh()),
            Some(&g),
        );
    }
    Ok(r)
}

/// Magnetizations do not decrease when every free field grows.
pub fn monotonicity_suite(graphs: &[WeightedGraph], tol: f64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("h-monotonicity");
    for g in graphs {
        let mut prev = exact_moments(g, RANDOM_BETA)?.mean_m;
        let mut prev_site = magnetizations(g, RANDOM_BETA)?;
        for step in 1..=8 {
            let dh = 0.125 * step as f64;
            let shifted = g.shifted(dh);
            let m = exact_moments(&shifted, RANDOM_BETA)?.mean_m;
            r.check(
                prev - m,
                tol,
                || format!("mean M drops at dh = {dh}: {prev} -> {m}"),
                Some(g),
            );
            let site = magnetizations(&shifted, RANDOM_BETA)?;
            for (x, (&a, &b)) in prev_site.iter().zip(&site).enumerate() {
                r.check(
                    a - b,
                    tol,
                    || format!("<s_{x}> drops at dh = {dh}: {a} -> {b}"),
                    Some(g),
                );
            }
            prev = m;
            prev_site = site;
        }
    }
    Ok(r)
}

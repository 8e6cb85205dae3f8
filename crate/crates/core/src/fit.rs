//! Power-law fits, sweep planning and the field-scaling consistency report.

use std::fmt::{self, Write as _};
use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{correlation_length, spread, RhoTable};
use crate::mc::stream_rng;
use crate::stats::Estimate;

/// Fewest bootstrap resamples accepted.
pub const MIN_BOOTSTRAP: usize = 1000;

/// `y ≈ amplitude · x^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub amplitude: f64,
    /// Bootstrap percentile interval; always contains `exponent`.
    pub exponent_ci: (f64, f64),
    pub n_points: usize,
    /// Reduced chi-square of the log residuals.
    pub quality: f64,
}

impl PowerLawFit {
    /// Interval membership, with rounding slack so a collapsed interval on
    /// exact data still contains its own exponent.
    pub fn contains(&self, exponent: f64) -> bool {
        let eps = 1e-12 * exponent.abs().max(1.0);
        self.exponent_ci.0 - eps <= exponent && exponent <= self.exponent_ci.1 + eps
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * x.powf(self.exponent)
    }
}

impl fmt::Display for PowerLawFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "exponent {:.5} [{:.5}, {:.5}], amplitude {:.5}, chi2/dof {:.3}, {} points",
            self.exponent,
            self.exponent_ci.0,
            self.exponent_ci.1,
            self.amplitude,
            self.quality,
            self.n_points
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_bootstrap: usize,
    pub seed: u64,
    /// Coverage of the percentile interval.
    pub level: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_bootstrap: 2000,
            seed: 0x5eed,
            level: 0.95,
        }
    }
}

struct LogData {
    u: Vec<f64>,
    v: Vec<f64>,
    sigma: Vec<f64>,
    w: Vec<f64>,
}

fn log_data(points: &[(f64, Estimate)]) -> Result<LogData> {
    if points.len() < 3 {
        return Err(Error::EmptyInput(
            "a power-law fit needs at least three points",
        ));
    }
    for (x, y) in points {
        if !(*x > 0.0 && x.is_finite()) || !(y.value > 0.0 && y.value.is_finite()) {
            return Err(Error::OutOfRange(format!(
                "power-law fit needs positive data, got ({x}, {})",
                y.value
            )));
        }
    }
    let u: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let v: Vec<f64> = points.iter().map(|p| p.1.value.ln()).collect();
    let sigma: Vec<f64> = points
        .iter()
        .map(|p| {
            let s = p.1.stderr / p.1.value;
            if s.is_finite() && s > 0.0 {
                s
            } else {
                0.0
            }
        })
        .collect();
    // zero-error points get the smallest error present, or all weigh the same
    let floor = sigma
        .iter()
        .copied()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let w = sigma
        .iter()
        .map(|&s| {
            if s > 0.0 {
                1.0 / (s * s)
            } else if floor.is_finite() {
                1.0 / (floor * floor)
            } else {
                1.0
            }
        })
        .collect();
    Ok(LogData { u, v, sigma, w })
}

/// Weighted least squares `v = a + b u`; returns `(b, a)`.
fn wls(u: &[f64], v: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let ub = u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let vb = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((&ui, &vi), &wi) in u.iter().zip(v).zip(w) {
        sxx += wi * (ui - ub) * (ui - ub);
        sxy += wi * (ui - ub) * (vi - vb);
    }
    if sxx <= 1e-300 * sw {
        return Err(Error::Degenerate("all abscissae are equal"));
    }
    let b = sxy / sxx;
    Ok((b, vb - b * ub))
}

pub fn fit_power_law(points: &[(f64, Estimate)]) -> Result<PowerLawFit> {
    fit_power_law_with(points, &FitOptions::default())
}

/// Weighted least squares on `(ln x, ln y)` with weights `(y/σ_y)²`. The
/// interval comes from refits of log-normally perturbed `y`; resample `k`
/// draws from stream `k` of the seed.
pub fn fit_power_law_with(points: &[(f64, Estimate)], opts: &FitOptions) -> Result<PowerLawFit> {
    if opts.n_bootstrap < MIN_BOOTSTRAP {
        return Err(Error::InvalidParameter(format!(
            "{} bootstrap resamples, at least {MIN_BOOTSTRAP} required",
            opts.n_bootstrap
        )));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence level {}",
            opts.level
        )));
    }
    let d = log_data(points)?;
    let (b, a) = wls(&d.u, &d.v, &d.w)?;
    let n = points.len();
    let chi2: f64 =
        d.u.iter()
            .zip(&d.v)
            .zip(&d.w)
            .map(|((&u, &v), &w)| w * (v - a - b * u).powi(2))
            .sum();
    let quality = chi2 / (n - 2) as f64;

    let ci = if d.sigma.iter().all(|&s| s == 0.0) {
        (b, b)
    } else {
        let mut slopes = Vec::with_capacity(opts.n_bootstrap);
        let mut v = vec![0.0; n];
        for k in 0..opts.n_bootstrap {
            let mut rng = stream_rng(opts.seed, k as u64);
            for (i, vi) in v.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *vi = d.v[i] + d.sigma[i] * z;
            }
            slopes.push(wls(&d.u, &v, &d.w)?.0);
        }
        slopes.sort_by(f64::total_cmp);
        let tail = (1.0 - opts.level) / 2.0;
        (
            percentile(&slopes, tail).min(b),
            percentile(&slopes, 1.0 - tail).max(b),
        )
    };
    Ok(PowerLawFit {
        exponent: b,
        amplitude: a.exp(),
        exponent_ci: ci,
        n_points: n,
        quality,
    })
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Lattice half-width `⌈safety · h^{-8/15}⌉` for each field.
pub fn plan_h_sweep(h_grid: &[f64], safety: f64) -> Result<Vec<(f64, usize)>> {
    if h_grid.is_empty() {
        return Err(Error::EmptyInput("field grid"));
    }
    if !(safety >= 1.0 && safety.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "safety factor {safety} must be at least 1"
        )));
    }
    h_grid
        .iter()
        .map(|&h| {
            if !(h > 0.0 && h <= 1.0) {
                return Err(Error::OutOfRange(format!("field {h} outside (0, 1]")));
            }
            let l = safety * h.powf(-8.0 / 15.0);
            Ok((h, ((l * (1.0 - 1e-12)).ceil() as usize).max(1)))
        })
        .collect()
}

/// Fit windows that drop the sizes where lattice effects dominate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitCuts {
    /// Separation window of two-point fits.
    pub min_separation: usize,
    pub max_separation: usize,
    /// Fields with `L(h)` below this are dropped from field fits.
    pub min_correlation_length: usize,
    /// Smallest radius kept in one-arm fits.
    pub min_radius: usize,
    /// Smallest size kept in cluster-tail fits.
    pub min_cluster_size: usize,
}

impl Default for FitCuts {
    fn default() -> Self {
        FitCuts {
            min_separation: 4,
            max_separation: 32,
            min_correlation_length: 8,
            min_radius: 8,
            min_cluster_size: 16,
        }
    }
}

impl FitCuts {
    /// Keeps `h` whose `L(h)` is at least the cut; fields whose `L(h)` is
    /// beyond the table are kept (they are far from the lattice scale).
    pub fn keep_field(&self, rho: &RhoTable, h: f64) -> bool {
        match correlation_length(rho, h) {
            Ok(l) => l >= self.min_correlation_length,
            Err(_) => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub h: f64,
    pub correlation_length: usize,
    pub sigma0: Estimate,
    pub rho_at_length: f64,
    /// `⟨σ₀⟩ / √ρ(L(h))`.
    pub ratio_rho: f64,
    /// `⟨σ₀⟩ · h · L(h)²`.
    pub ratio_hl2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    pub spread_rho: f64,
    pub spread_hl2: f64,
    pub max_spread: f64,
    pub flagged: bool,
}

/// Largest accepted max/min spread of the consistency ratios.
pub const CONSISTENCY_SPREAD: f64 = 5.0;

/// Compares `⟨σ₀⟩(h)` with `√ρ(L(h))` and `1/(h L(h)²)`.
pub fn consistency_report(sigma0: &[(f64, Estimate)], rho: &RhoTable) -> Result<ConsistencyReport> {
    if sigma0.is_empty() {
        return Err(Error::EmptyInput(
            "no field values overlap the two-point table",
        ));
    }
    let mut rows = Vec::with_capacity(sigma0.len());
    for &(h, s) in sigma0 {
        let l = correlation_length(rho, h)?;
        let r = rho.interpolate(l as f64)?;
        rows.push(ConsistencyRow {
            h,
            correlation_length: l,
            sigma0: s,
            rho_at_length: r,
            ratio_rho: s.value / r.sqrt(),
            ratio_hl2: s.value * h * (l * l) as f64,
        });
    }
    let spread_rho = spread(rows.iter().map(|r| r.ratio_rho));
    let spread_hl2 = spread(rows.iter().map(|r| r.ratio_hl2));
    Ok(ConsistencyReport {
        flagged: !(spread_rho <= CONSISTENCY_SPREAD && spread_hl2 <= CONSISTENCY_SPREAD),
        rows,
        spread_rho,
        spread_hl2,
        max_spread: CONSISTENCY_SPREAD,
    })
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>10} {:>6} {:>10} {:>10} {:>12} {:>12}",
            "h", "L(h)", "sigma0", "rho(L)", "s/sqrt(rho)", "s*h*L^2"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>10.5} {:>6} {:>10.5} {:>10.5} {:>12.5} {:>12.5}",
                r.h,
                r.correlation_length,
                r.sigma0.value,
                r.rho_at_length,
                r.ratio_rho,
                r.ratio_hl2
            )?;
        }
        write!(
            f,
            "spread {:.3} and {:.3} (limit {}){}",
            self.spread_rho,
            self.spread_hl2,
            self.max_spread,
            if self.flagged { ", FLAGGED" } else { "" }
        )
    }
}

/// Whitespace-separated `x y yerr` lines under a `#` header.
pub fn write_plot_data<W: Write>(points: &[(f64, Estimate)], mut w: W) -> Result<()> {
    writeln!(w, "# x y yerr")?;
    for (x, y) in points {
        writeln!(w, "{x:e} {:e} {:e}", y.value, y.stderr)?;
    }
    Ok(())
}

/// One fitted law against its expected exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LawReport {
    pub name: String,
    pub target: f64,
    /// Half-width of the accepted band around `target`.
    pub tolerance: f64,
    pub fit: PowerLawFit,
    pub points: Vec<(f64, Estimate)>,
    /// Whether passing also needs the confidence interval to cover `target`.
    #[serde(default)]
    pub ci_required: bool,
}

impl LawReport {
    pub fn new(
        name: &str,
        target: f64,
        tolerance: f64,
        points: Vec<(f64, Estimate)>,
        opts: &FitOptions,
    ) -> Result<Self> {
        let fit = fit_power_law_with(&points, opts)?;
        Ok(LawReport {
            name: name.to_string(),
            target,
            tolerance,
            fit,
            points,
            ci_required: false,
        })
    }

    pub fn require_ci(mut self) -> Self {
        self.ci_required = true;
        self
    }

    pub fn within_tolerance(&self) -> bool {
        (self.fit.exponent - self.target).abs() <= self.tolerance
    }

    pub fn passed(&self) -> bool {
        self.within_tolerance() && (!self.ci_required || self.fit.contains(self.target))
    }
}

/// Everything `fit` and `report` print.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub laws: Vec<LawReport>,
    pub consistency: Option<ConsistencyReport>,
    pub cuts: Option<FitCuts>,
    /// Laws left unfitted, with the reason.
    #[serde(default)]
    pub skipped: Vec<(String, String)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.skipped.is_empty()
            && self.laws.iter().all(LawReport::passed)
            && self.consistency.as_ref().is_none_or(|c| !c.flagged)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(c) = &self.cuts {
            let _ = writeln!(
                s,
                "cuts: separations {} <= n <= {}, fields with L(h) >= {}, radii R >= {}, sizes M >= {}",
                c.min_separation, c.max_separation, c.min_correlation_length, c.min_radius, c.min_cluster_size
            );
        }
        for law in &self.laws {
            let _ = writeln!(
                s,
                "{:<12} target {:+.5} ± {:.3}: {} -> {}",
                law.name,
                law.target,
                law.tolerance,
                law.fit,
                if law.passed() { "ok" } else { "FAIL" }
            );
        }
        for (name, why) in &self.skipped {
            let _ = writeln!(s, "{name:<12} skipped: {why} -> FAIL");
        }
        if let Some(c) = &self.consistency {
            let _ = writeln!(s, "{c}");
        }
        s
    }
}

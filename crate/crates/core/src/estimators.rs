//! Observables measured on sampled configurations.
//!
//! Each estimator is a fold: [`Accumulator::observe`] takes one sample,
//! [`Accumulator::merge`] concatenates the per-sample records of another
//! accumulator of the same shape, and [`Accumulator::finish`] turns the
//! records into estimates.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::{check_radius, circuit_event, label_clusters, BondConfig, Explorer, LabelMode};
use crate::mc::Sample;
use crate::model::{total_magnetization, Geometry, LatticeSpec};
use crate::stats::{ratio_estimate, Estimate};

/// Conditional estimates based on fewer hits than this are flagged.
pub const MIN_CONDITIONING_HITS: u64 = 200;

pub trait Accumulator {
    type Output;
    fn observe(&mut self, sample: &Sample<'_>);
    /// Appends the records of `other`, which must have the same shape.
    fn merge(&mut self, other: Self);
    fn finish(&self) -> Result<Self::Output>;
}

fn series_estimate(xs: &[f64]) -> Result<Estimate> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("no samples observed"));
    }
    Ok(Estimate::from_series(xs))
}

fn merge_columns(a: &mut [Vec<f64>], b: Vec<Vec<f64>>) {
    assert_eq!(a.len(), b.len(), "merging accumulators of different shape");
    for (x, y) in a.iter_mut().zip(b) {
        x.extend(y);
    }
}

/// `⟨σ₀⟩`: the volume average `M/|Λ|` on the torus, the origin spin on a box.
#[derive(Clone, Debug, Default)]
pub struct Sigma0 {
    series: Vec<f64>,
}

impl Sigma0 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value_of(sample: &Sample<'_>) -> f64 {
        let spec = sample.spec();
        if spec.is_torus() {
            total_magnetization(sample.spins) as f64 / spec.n_sites() as f64
        } else {
            sample.spins.get(spec.origin()) as f64
        }
    }
}

impl Accumulator for Sigma0 {
    type Output = Estimate;

    fn observe(&mut self, sample: &Sample<'_>) {
        self.series.push(Self::value_of(sample));
    }

    fn merge(&mut self, other: Self) {
        self.series.extend(other.series);
    }

    fn finish(&self) -> Result<Estimate> {
        series_estimate(&self.series)
    }
}

/// `⟨M⟩` and `⟨M²⟩` of the total magnetization.
#[derive(Clone, Debug, Default)]
pub struct MagnetizationMoments {
    m: Vec<f64>,
    m2: Vec<f64>,
}

impl MagnetizationMoments {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Accumulator for MagnetizationMoments {
    type Output = (Estimate, Estimate);

    fn observe(&mut self, sample: &Sample<'_>) {
        let m = total_magnetization(sample.spins) as f64;
        self.m.push(m);
        self.m2.push(m * m);
    }

    fn merge(&mut self, other: Self) {
        self.m.extend(other.m);
        self.m2.extend(other.m2);
    }

    fn finish(&self) -> Result<(Estimate, Estimate)> {
        Ok((series_estimate(&self.m)?, series_estimate(&self.m2)?))
    }
}

/// Displacement used for the two-point function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `(n, n)`, the one used by [`correlation_length`].
    Diagonal,
    /// `(n, 0)`.
    Axis,
}

/// Two-point function at the separations of a table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoTable {
    pub direction: Direction,
    pub entries: Vec<(usize, Estimate)>,
}

impl RhoTable {
    pub fn new(direction: Direction, mut entries: Vec<(usize, Estimate)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("two-point table"));
        }
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(
                "repeated separation in two-point table".into(),
            ));
        }
        Ok(RhoTable { direction, entries })
    }

    pub fn get(&self, n: usize) -> Option<&Estimate> {
        self.entries.iter().find(|e| e.0 == n).map(|e| &e.1)
    }

    /// Pairs of consecutive entries whose increase exceeds `k` combined
    /// standard errors.
    pub fn monotonicity_violations(&self, k: f64) -> Vec<(usize, usize)> {
        monotone_violations(&self.entries, k)
    }

    /// `ρ(x)` for real `x` between table entries, linear in `ln x`/`ln ρ`.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        let (first, last) = (
            self.entries[0].0 as f64,
            self.entries.last().unwrap().0 as f64,
        );
        if !(x >= first && x <= last) {
            return Err(Error::OutOfRange(format!(
                "separation {x} outside the table range [{first}, {last}]"
            )));
        }
        let k = self.entries.partition_point(|e| (e.0 as f64) < x);
        let (n1, e1) = self.entries[k];
        let rho1 = positive(e1.value, n1)?;
        if n1 as f64 == x || k == 0 {
            return Ok(rho1);
        }
        let (n0, e0) = self.entries[k - 1];
        let rho0 = positive(e0.value, n0)?;
        if n0 == 0 {
            let t = x / n1 as f64;
            return Ok(rho0 * (rho1 / rho0).powf(t));
        }
        let t = (x / n0 as f64).ln() / (n1 as f64 / n0 as f64).ln();
        Ok((rho0.ln() + t * (rho1.ln() - rho0.ln())).exp())
    }
}

fn positive(v: f64, n: usize) -> Result<f64> {
    if v > 0.0 {
        Ok(v.min(1.0))
    } else {
        Err(Error::OutOfRange(format!(
            "non-positive two-point value at n = {n}"
        )))
    }
}

fn monotone_violations(entries: &[(usize, Estimate)], k: f64) -> Vec<(usize, usize)> {
    entries
        .windows(2)
        .filter(|w| w[1].1.value - w[0].1.value > k * w[0].1.stderr.hypot(w[1].1.stderr))
        .map(|w| (w[0].0, w[1].0))
        .collect()
}

/// Translation-averaged `⟨σ_0 σ_(n,n)⟩` (or `⟨σ_0 σ_(n,0)⟩`) on the torus.
#[derive(Clone, Debug)]
pub struct RhoDiag {
    direction: Direction,
    ns: Vec<usize>,
    series: Vec<Vec<f64>>,
}

impl RhoDiag {
    pub fn new(spec: &LatticeSpec, ns: &[usize]) -> Result<Self> {
        Self::with_direction(spec, ns, Direction::Diagonal)
    }

    pub fn with_direction(spec: &LatticeSpec, ns: &[usize], direction: Direction) -> Result<Self> {
        if !spec.is_torus() {
            return Err(Error::InvalidParameter(
                "two-point averages need a torus".into(),
            ));
        }
        if ns.is_empty() {
            return Err(Error::EmptyInput("separation list"));
        }
        let half = spec.side() / 2;
        if let Some(&n) = ns.iter().find(|&&n| n > half) {
            return Err(Error::OutOfRange(format!(
                "separation {n} exceeds half the torus side {half}"
            )));
        }
        Ok(RhoDiag {
            direction,
            ns: ns.to_vec(),
            series: vec![Vec::new(); ns.len()],
        })
    }

    /// Average of `σ_x σ_{x+(n,dy)}` over all `x`, where `dy` is `n` or 0.
    pub fn spin_product(spins: &[i8], side: usize, n: usize, direction: Direction) -> f64 {
        let dy = match direction {
            Direction::Diagonal => n,
            Direction::Axis => 0,
        };
        let mut total: i64 = 0;
        for r in 0..side {
            let a = &spins[r * side..(r + 1) * side];
            let r2 = (r + dy) % side;
            let b = &spins[r2 * side..(r2 + 1) * side];
            let n = n % side;
            let head: i32 = a[..side - n]
                .iter()
                .zip(&b[n..])
                .map(|(&x, &y)| (x * y) as i32)
                .sum();
            let tail: i32 = a[side - n..]
                .iter()
                .zip(&b[..n])
                .map(|(&x, &y)| (x * y) as i32)
                .sum();
            total += (head + tail) as i64;
        }
        total as f64 / (side * side) as f64
    }
}

impl Accumulator for RhoDiag {
    type Output = RhoTable;

    fn observe(&mut self, sample: &Sample<'_>) {
        let side = sample.spec().side();
        let spins = sample.spins.spins();
        for (&n, xs) in self.ns.iter().zip(self.series.iter_mut()) {
            xs.push(Self::spin_product(spins, side, n, self.direction));
        }
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.ns, other.ns);
        merge_columns(&mut self.series, other.series);
    }

    fn finish(&self) -> Result<RhoTable> {
        let entries = self
            .ns
            .iter()
            .zip(&self.series)
            .map(|(&n, xs)| Ok((n, series_estimate(xs)?)))
            .collect::<Result<Vec<_>>>()?;
        RhoTable::new(self.direction, entries)
    }
}

/// Origins for translation averages: the origin on a box, an evenly spaced
/// `k × k` grid on the torus.
pub fn averaging_origins(spec: &LatticeSpec, per_axis: usize) -> Vec<usize> {
    if !spec.is_torus() || per_axis <= 1 {
        return vec![spec.origin()];
    }
    let side = spec.side();
    let k = per_axis.min(side);
    let mut out = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            out.push(spec.index(i * side / k, j * side / k));
        }
    }
    out
}

/// One-arm probability `P(0 ↔ ∂Λ_R)` for plane-only clusters, averaged over
/// a set of origins.
#[derive(Clone, Debug)]
pub struct OneArm {
    rs: Vec<usize>,
    origins: Vec<usize>,
    explorer: Explorer,
    series: Vec<Vec<f64>>,
}

impl OneArm {
    pub fn new(spec: &LatticeSpec, rs: &[usize], origins_per_axis: usize) -> Result<Self> {
        if rs.is_empty() {
            return Err(Error::EmptyInput("radius list"));
        }
        for &r in rs {
            check_radius(spec, r)?;
        }
        Ok(OneArm {
            rs: rs.to_vec(),
            origins: averaging_origins(spec, origins_per_axis),
            explorer: Explorer::new(spec.n_sites()),
            series: vec![Vec::new(); rs.len()],
        })
    }

    /// Fraction of origins joined to the boundary of their `Λ_R`, per radius.
    pub fn fractions(&mut self, bonds: &BondConfig, sample: &Sample<'_>) -> Vec<f64> {
        let rmax = *self.rs.iter().max().unwrap();
        let mut counts = vec![0usize; self.rs.len()];
        for &o in &self.origins {
            let reach = self.explorer.reach(bonds, sample.lattice, o, rmax);
            for (c, &r) in counts.iter_mut().zip(&self.rs) {
                *c += (reach >= r) as usize;
            }
        }
        counts
            .iter()
            .map(|&c| c as f64 / self.origins.len() as f64)
            .collect()
    }
}

impl Accumulator for OneArm {
    type Output = Vec<(usize, Estimate)>;

    fn observe(&mut self, sample: &Sample<'_>) {
        let f = self.fractions(sample.bonds(), sample);
        for (xs, v) in self.series.iter_mut().zip(f) {
            xs.push(v);
        }
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.rs, other.rs);
        merge_columns(&mut self.series, other.series);
    }

    fn finish(&self) -> Result<Vec<(usize, Estimate)>> {
        self.rs
            .iter()
            .zip(&self.series)
            .map(|(&r, xs)| Ok((r, series_estimate(xs)?)))
            .collect()
    }
}

/// Tail of the plane cluster size, `P(|C(ω₀)| ≥ M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub entries: Vec<(usize, Estimate)>,
}

impl TailTable {
    pub fn monotonicity_violations(&self, k: f64) -> Vec<(usize, usize)> {
        monotone_violations(&self.entries, k)
    }
}

/// Cluster-size tail. On the torus each sample contributes the fraction of
/// sites whose cluster has at least `M` sites; on a box, the indicator for
/// the origin's cluster.
#[derive(Clone, Debug)]
pub struct ClusterTail {
    ms: Vec<usize>,
    series: Vec<Vec<f64>>,
}

impl ClusterTail {
    pub fn new(ms: &[usize]) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::EmptyInput("size list"));
        }
        if ms.contains(&0) {
            return Err(Error::InvalidParameter("cluster sizes start at 1".into()));
        }
        let mut ms = ms.to_vec();
        ms.sort_unstable();
        ms.dedup();
        Ok(ClusterTail {
            series: vec![Vec::new(); ms.len()],
            ms,
        })
    }

    /// Per-threshold contributions of one bond configuration.
    pub fn contributions(&self, bonds: &BondConfig) -> Vec<f64> {
        let spec = bonds.spec();
        let labels = label_clusters(bonds, LabelMode::PlaneOnly);
        if spec.is_torus() {
            // sizes sorted once, then a single pass per threshold
            let mut sizes: Vec<usize> = labels.cluster_sizes().map(|(_, s)| s).collect();
            sizes.sort_unstable();
            let v = spec.n_sites() as f64;
            let mut suffix = vec![0usize; sizes.len() + 1];
            for k in (0..sizes.len()).rev() {
                suffix[k] = suffix[k + 1] + sizes[k];
            }
            self.ms
                .iter()
                .map(|&m| suffix[sizes.partition_point(|&s| s < m)] as f64 / v)
                .collect()
        } else {
            let s = labels.cluster_size(spec.origin());
            self.ms.iter().map(|&m| (s >= m) as u8 as f64).collect()
        }
    }
}

impl Accumulator for ClusterTail {
    type Output = TailTable;

    fn observe(&mut self, sample: &Sample<'_>) {
        let c = self.contributions(sample.bonds());
        for (xs, v) in self.series.iter_mut().zip(c) {
            xs.push(v);
        }
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.ms, other.ms);
        merge_columns(&mut self.series, other.series);
    }

    fn finish(&self) -> Result<TailTable> {
        let entries = self
            .ms
            .iter()
            .zip(&self.series)
            .map(|(&m, xs)| Ok((m, series_estimate(xs)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TailTable { entries })
    }
}

/// Conditional moments with their hit count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    pub first: Estimate,
    pub second: Estimate,
    pub hits: u64,
    /// Fewer than [`MIN_CONDITIONING_HITS`] samples met the condition.
    pub low_statistics: bool,
}

/// `N = |C(ω₀) ∩ Λ_R|` conditioned on `{0 ↔ ∂Λ_R} ∩ C_R`, together with the
/// unconditioned `E[N² 1{0 ↔ ∂Λ_R}] = Σ_{x,y ∈ Λ_R} P(0↔x, 0↔y, 0↔∂Λ_R)`.
///
/// The circuit event is rare at criticality (of order 10⁻⁴ for `R ≤ 16`), so
/// [`ConditionalN::arm_only`] offers the same moments conditioned on
/// `0 ↔ ∂Λ_R` alone.
#[derive(Clone, Debug)]
pub struct ConditionalN {
    r: usize,
    require_circuit: bool,
    explorer: Explorer,
    indicator: Vec<f64>,
    n1: Vec<f64>,
    n2: Vec<f64>,
    arm_n2: Vec<f64>,
}

impl ConditionalN {
    pub fn new(spec: &LatticeSpec, r: usize) -> Result<Self> {
        if r < 2 || r % 2 == 1 {
            return Err(Error::OutOfRange(format!(
                "radius {r} must be even and at least 2"
            )));
        }
        check_radius(spec, r)?;
        Ok(ConditionalN {
            r,
            require_circuit: true,
            explorer: Explorer::new(spec.n_sites()),
            indicator: Vec::new(),
            n1: Vec::new(),
            n2: Vec::new(),
            arm_n2: Vec::new(),
        })
    }

    pub fn arm_only(spec: &LatticeSpec, r: usize) -> Result<Self> {
        let mut c = Self::new(spec, r)?;
        c.require_circuit = false;
        Ok(c)
    }

    /// `(N, 0 ↔ ∂Λ_R, C_R)` for one bond configuration; `C_R` is reported
    /// as true without a search in arm-only mode.
    pub fn inspect(&mut self, bonds: &BondConfig, sample: &Sample<'_>) -> (usize, bool, bool) {
        let spec = bonds.spec();
        let o = spec.origin();
        let labels = label_clusters(bonds, LabelMode::PlaneOnly);
        let own = labels.label(o);
        let r = self.r as i64;
        let mut n = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let x = spec.offset(o, dx, dy).expect("radius checked");
                n += (labels.label(x) == own) as usize;
            }
        }
        let arm = self.explorer.reach(bonds, sample.lattice, o, self.r) >= self.r;
        let circuit =
            !self.require_circuit || circuit_event(bonds, self.r).expect("radius checked");
        (n, arm, circuit)
    }

    /// `E[N² 1{0 ↔ ∂Λ_R}]`.
    pub fn three_point_sum(&self) -> Result<Estimate> {
        series_estimate(&self.arm_n2)
    }
}

impl Accumulator for ConditionalN {
    type Output = ConditionalMoments;

    fn observe(&mut self, sample: &Sample<'_>) {
        let (n, arm, circuit) = self.inspect(sample.bonds(), sample);
        let n = n as f64;
        let hit = (arm && circuit) as u8 as f64;
        self.indicator.push(hit);
        self.n1.push(hit * n);
        self.n2.push(hit * n * n);
        self.arm_n2.push(arm as u8 as f64 * n * n);
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.r, other.r);
        self.indicator.extend(other.indicator);
        self.n1.extend(other.n1);
        self.n2.extend(other.n2);
        self.arm_n2.extend(other.arm_n2);
    }

    fn finish(&self) -> Result<ConditionalMoments> {
        let first = ratio_estimate(&self.n1, &self.indicator).ok_or(Error::NoConditioningHits)?;
        let second = ratio_estimate(&self.n2, &self.indicator).ok_or(Error::NoConditioningHits)?;
        let hits = first.n_samples;
        let low_statistics = hits < MIN_CONDITIONING_HITS;
        if low_statistics {
            log::warn!("conditional moments at R = {} rest on {hits} hits", self.r);
        }
        Ok(ConditionalMoments {
            first,
            second,
            hits,
            low_statistics,
        })
    }
}

/// A conditional probability with its hit count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    pub value: Estimate,
    pub low_statistics: bool,
}

/// `P(0 ↮ g | |C(ω₀)| ≥ M)` where `C(ω₀)` is the plane cluster of the
/// origin. On the torus every site serves as origin, weighted by cluster size.
#[derive(Clone, Debug)]
pub struct GhostAvoidance {
    ms: Vec<usize>,
    num: Vec<Vec<f64>>,
    den: Vec<Vec<f64>>,
}

impl GhostAvoidance {
    pub fn new(ms: &[usize]) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::EmptyInput("size list"));
        }
        Ok(GhostAvoidance {
            ms: ms.to_vec(),
            num: vec![Vec::new(); ms.len()],
            den: vec![Vec::new(); ms.len()],
        })
    }

    /// `(avoiding, total)` site weights per threshold.
    pub fn contributions(&self, bonds: &BondConfig) -> Vec<(f64, f64)> {
        let spec = bonds.spec();
        let labels = label_clusters(bonds, LabelMode::PlaneOnly);
        let n = spec.n_sites();
        let mut touched = vec![false; n];
        for (site, &g) in bonds.ghost_bonds().iter().enumerate() {
            if g {
                touched[labels.label(site) as usize] = true;
            }
        }
        if spec.is_torus() {
            let clusters: Vec<(usize, bool)> = labels
                .cluster_sizes()
                .map(|(root, s)| (s, !touched[root as usize]))
                .collect();
            let v = n as f64;
            self.ms
                .iter()
                .map(|&m| {
                    let (mut a, mut t) = (0usize, 0usize);
                    for &(s, avoid) in &clusters {
                        if s >= m {
                            t += s;
                            a += if avoid { s } else { 0 };
                        }
                    }
                    (a as f64 / v, t as f64 / v)
                })
                .collect()
        } else {
            let o = spec.origin();
            let s = labels.cluster_size(o);
            let avoid = !touched[labels.label(o) as usize];
            self.ms
                .iter()
                .map(|&m| {
                    let big = (s >= m) as u8 as f64;
                    (big * avoid as u8 as f64, big)
                })
                .collect()
        }
    }
}

impl Accumulator for GhostAvoidance {
    type Output = Vec<(usize, Conditional)>;

    fn observe(&mut self, sample: &Sample<'_>) {
        let c = self.contributions(sample.bonds());
        for ((a, t), (num, den)) in c
            .into_iter()
            .zip(self.num.iter_mut().zip(self.den.iter_mut()))
        {
            num.push(a);
            den.push(t);
        }
    }

    fn merge(&mut self, other: Self) {
        assert_eq!(self.ms, other.ms);
        merge_columns(&mut self.num, other.num);
        merge_columns(&mut self.den, other.den);
    }

    fn finish(&self) -> Result<Vec<(usize, Conditional)>> {
        self.ms
            .iter()
            .zip(self.num.iter().zip(&self.den))
            .map(|(&m, (num, den))| {
                let value = ratio_estimate(num, den).ok_or(Error::NoConditioningHits)?;
                Ok((
                    m,
                    Conditional {
                        value,
                        low_statistics: value.n_samples < MIN_CONDITIONING_HITS,
                    },
                ))
            })
            .collect()
    }
}

/// `S(R) / (R⁴ π(R)³)` for three-point sums `S(R)` and one-arm
/// probabilities `π(R)` at matching radii, with the max/min spread.
pub fn dyadic_sum_ratios(
    sums: &[(usize, Estimate)],
    one_arm: &[(usize, Estimate)],
) -> Result<(Vec<(usize, f64)>, f64)> {
    let mut out = Vec::new();
    for &(r, s) in sums {
        let p = one_arm
            .iter()
            .find(|e| e.0 == r)
            .ok_or_else(|| Error::OutOfRange(format!("no one-arm value at R = {r}")))?
            .1
            .value;
        if p <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "one-arm probability vanishes at R = {r}"
            )));
        }
        out.push((r, s.value / ((r as f64).powi(4) * p.powi(3))));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("three-point sums"));
    }
    let spread = spread(out.iter().map(|e| e.1));
    Ok((out, spread))
}

/// `max / min` of positive values; infinite if any value is not positive.
pub fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Relative slack when comparing `L²√ρ(L)` with `1/h`, so that exact
/// solutions are not lost to rounding.
const THRESHOLD_SLACK: f64 = 1e-12;

/// `L(h) = inf{L ≥ 1 : L² √ρ(L) ≥ 1/h}` with `ρ` interpolated between the
/// table entries. Sizes with `L² < 1/h` fail whatever `ρ ≤ 1` is, so they
/// need no table entry.
pub fn correlation_length(rho: &RhoTable, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "field {h} must be positive"
        )));
    }
    let target = (1.0 - THRESHOLD_SLACK) / h;
    let last = rho.entries.last().unwrap().0;
    let mut l = (target.sqrt().ceil() as usize).max(1);
    while l <= last {
        let r = rho.interpolate(l as f64)?;
        if (l * l) as f64 * r.sqrt() >= target {
            return Ok(l);
        }
        l += 1;
    }
    Err(Error::OutOfRange(format!(
        "threshold 1/h = {:.4} not reached within the table (n ≤ {last})",
        1.0 / h
    )))
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub observable: String,
    pub geometry: String,
    /// Half-width of the lattice (side / 2, rounded down).
    #[serde(rename = "L")]
    pub l: usize,
    pub beta: f64,
    pub h: f64,
    /// Free coordinate of the observable (separation, radius, size); 0 if none.
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub tau_int: f64,
}

impl ResultRow {
    pub fn new(
        observable: &str,
        spec: &LatticeSpec,
        beta: f64,
        h: f64,
        x: f64,
        e: &Estimate,
    ) -> Self {
        let geometry = match spec.geometry() {
            Geometry::Torus => "torus".to_string(),
            g => format!("{}-box", g.boundary().map_or("free", |b| b.name())),
        };
        ResultRow {
            observable: observable.to_string(),
            geometry,
            l: spec.side() / 2,
            beta,
            h,
            x,
            value: e.value,
            stderr: e.stderr,
            n: e.n_samples,
            tau_int: e.tau_int,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.value, self.stderr, self.n, self.tau_int)
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "observable",
    "geometry",
    "L",
    "beta",
    "h",
    "x",
    "value",
    "stderr",
    "n",
    "tau_int",
];

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a results table; errors carry the 1-based line number.
pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected columns {}", CSV_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rd.deserialize() {
        let row: ResultRow = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        out.push(row);
    }
    Ok(out)
}

/// JSON document `{"columns": [...], "rows": [...]}` with the CSV fields.
pub fn write_json<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    #[derive(Serialize)]
    struct Doc<'a> {
        columns: [&'static str; 10],
        rows: &'a [ResultRow],
    }
    serde_json::to_writer_pretty(
        &mut w,
        &Doc {
            columns: CSV_COLUMNS,
            rows,
        },
    )?;
    writeln!(w)?;
    Ok(())
}

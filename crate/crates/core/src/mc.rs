//! Markov chains for the Ising measure at `(β, h)`: heat-bath, and
//! Swendsen–Wang / Wolff cluster dynamics on the ghost-extended graph.
//!
//! The plus boundary acts as an extra field `β` on boundary sites, so those
//! sites bond to the ghost with probability `1 - e^{-2(h + β)}`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fk::{sample_bonds_into, BondConfig, UnionFind};
use crate::model::{bond_probability, Lattice, LatticeSpec, ModelParams, SpinConfig, NO_SITE};
use crate::stats::Estimate;

/// Per-chain generator: ChaCha8 keyed by `seed_from_u64(master_seed)` on
/// stream `index`. Distinct indices give independent streams.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Heatbath,
    Wolff,
    SwendsenWang,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Heatbath,
        Algorithm::Wolff,
        Algorithm::SwendsenWang,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Heatbath => "heatbath",
            Algorithm::Wolff => "wolff",
            Algorithm::SwendsenWang => "swendsen_wang",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heatbath" => Ok(Algorithm::Heatbath),
            "wolff" => Ok(Algorithm::Wolff),
            "swendsen_wang" | "sw" => Ok(Algorithm::SwendsenWang),
            _ => Err(Error::InvalidParameter(format!("unknown algorithm '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub n_therm: u64,
    pub n_measure: u64,
    pub measure_every: u64,
    pub algorithm: Algorithm,
}

impl RunPlan {
    pub fn new(algorithm: Algorithm, n_therm: u64, n_measure: u64) -> Self {
        RunPlan {
            n_therm,
            n_measure,
            measure_every: 1,
            algorithm,
        }
    }

    pub fn every(mut self, k: u64) -> Self {
        self.measure_every = k;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_measure == 0 {
            return Err(Error::InvalidParameter("n_measure must be positive".into()));
        }
        if self.measure_every == 0 {
            return Err(Error::InvalidParameter(
                "measure_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a measurement may look at.
pub struct Sample<'a> {
    pub lattice: &'a Lattice,
    pub params: &'a ModelParams,
    pub spins: &'a SpinConfig,
    bonds: Option<&'a BondConfig>,
}

impl<'a> Sample<'a> {
    pub fn new(
        lattice: &'a Lattice,
        params: &'a ModelParams,
        spins: &'a SpinConfig,
        bonds: Option<&'a BondConfig>,
    ) -> Self {
        Sample {
            lattice,
            params,
            spins,
            bonds,
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.lattice.spec()
    }

    /// Edwards–Sokal bonds paired with these spins.
    ///
    /// Panics if the driver was not asked for bonds.
    pub fn bonds(&self) -> &'a BondConfig {
        self.bonds.expect("bonds were not requested for this run")
    }

    pub fn try_bonds(&self) -> Option<&'a BondConfig> {
        self.bonds
    }
}

type MeasureFn = dyn Fn(&Sample<'_>) -> f64 + Send + Sync;

/// A named scalar function of a sample.
pub struct Observable {
    pub name: String,
    pub needs_bonds: bool,
    f: Box<MeasureFn>,
}

impl Observable {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Sample<'_>) -> f64 + Send + Sync + 'static,
    {
        Observable {
            name: name.into(),
            needs_bonds: false,
            f: Box::new(f),
        }
    }

    pub fn with_bonds<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Sample<'_>) -> f64 + Send + Sync + 'static,
    {
        Observable {
            name: name.into(),
            needs_bonds: true,
            f: Box::new(f),
        }
    }

    pub fn eval(&self, s: &Sample<'_>) -> f64 {
        (self.f)(s)
    }
}

pub struct ChainState {
    lattice: Lattice,
    params: ModelParams,
    config: SpinConfig,
    rng: ChaCha8Rng,
    sweep_count: u64,
    /// Wolff calibration totals: `(sweeps, updates, sites visited)`.
    wolff_calib: (u64, u64, u64),
    /// Ghost-bond probability per site.
    ghost_p: Vec<f64>,
    /// Heat-bath `P(σ = +)` indexed by `[plus-boundary][m + 4]`.
    heat: [[f64; 9]; 2],
    bonds: BondConfig,
    bonds_fresh: bool,
    uf: UnionFind,
    color: Vec<i8>,
    stamp: Vec<u32>,
    epoch: u32,
    stack: Vec<u32>,
}

impl ChainState {
    /// Cold (all-plus) start.
    pub fn new(spec: LatticeSpec, params: ModelParams, rng: ChaCha8Rng) -> Self {
        let config = SpinConfig::all_plus(&spec);
        Self::with_config(spec, params, config, rng).expect("config built for spec")
    }

    pub fn with_config(
        spec: LatticeSpec,
        params: ModelParams,
        config: SpinConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if config.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_sites(),
                found: config.len(),
            });
        }
        let lattice = spec.build();
        let n = spec.n_sites();
        let ghost_p = lattice
            .site_fields(&params)
            .into_iter()
            .map(bond_probability)
            .collect();
        let mut heat = [[0.0; 9]; 2];
        for (b, row) in heat.iter_mut().enumerate() {
            for (k, p) in row.iter_mut().enumerate() {
                let m = k as f64 - 4.0;
                let f = params.h + if b == 1 { params.beta } else { 0.0 };
                *p = 1.0 / (1.0 + (-2.0 * (params.beta * m + f)).exp());
            }
        }
        Ok(ChainState {
            lattice,
            params,
            config,
            rng,
            sweep_count: 0,
            wolff_calib: (0, 0, 0),
            ghost_p,
            heat,
            bonds: BondConfig::closed(&spec),
            bonds_fresh: false,
            uf: UnionFind::new(n + 1),
            color: vec![0; n + 1],
            stamp: vec![0; n],
            epoch: 0,
            stack: Vec::new(),
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        self.lattice.spec()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SpinConfig {
        &self.config
    }

    pub fn sweep_count(&self) -> u64 {
        self.sweep_count
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Heat-bath probability of `σ_x = +` given the rest.
    pub fn heatbath_probability(&self, site: usize) -> f64 {
        let m = self.neighbor_sum(site);
        self.heat[self.lattice.plus_boundary(site) as usize][(m + 4) as usize]
    }

    #[inline]
    fn neighbor_sum(&self, site: usize) -> i32 {
        let s = self.config.spins();
        self.lattice
            .neighbors(site)
            .iter()
            .filter(|&&t| t != NO_SITE)
            .map(|&t| s[t as usize] as i32)
            .sum()
    }

    /// One row-major sweep of exact single-site conditional updates.
    pub fn heatbath_sweep(&mut self) {
        for site in 0..self.lattice.n_sites() {
            let p = self.heatbath_probability(site);
            let up = self.rng.random::<f64>() < p;
            self.config.set(site, up);
        }
        self.bonds_fresh = false;
        self.sweep_count += 1;
    }

    /// Edwards–Sokal alternation: bonds from spins, then a fresh uniform sign
    /// per cluster, except the ghost's cluster which is `+`.
    pub fn swendsen_wang_update(&mut self) {
        let n = self.lattice.n_sites();
        sample_bonds_into(
            &self.lattice,
            &self.config,
            &self.params,
            &mut self.rng,
            &mut self.bonds,
        );
        let uf = &mut self.uf;
        uf.reset();
        let spec = *self.lattice.spec();
        for site in 0..n {
            let nb = self.lattice.neighbors(site);
            if self.bonds.plane(site, crate::model::Axis::X) {
                uf.union(site, nb[0] as usize);
            }
            if self.bonds.plane(site, crate::model::Axis::Y) {
                uf.union(site, nb[2] as usize);
            }
            if self.bonds.ghost(site) {
                uf.union(site, n);
            }
        }
        debug_assert_eq!(spec.n_sites(), n);
        let ghost_root = uf.find(n);
        self.color.iter_mut().for_each(|c| *c = 0);
        self.color[ghost_root] = 1;
        for site in 0..n {
            let r = uf.find(site);
            if self.color[r] == 0 {
                self.color[r] = if self.rng.random::<bool>() { 1 } else { -1 };
            }
            self.config.set(site, self.color[r] > 0);
        }
        self.bonds_fresh = true;
        self.sweep_count += 1;
    }

    /// Grows one cluster from a uniformly chosen site; flips it unless it
    /// reaches the ghost. Returns the number of sites visited.
    pub fn wolff_update(&mut self) -> usize {
        let n = self.lattice.n_sites();
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        let seed = self.rng.random_range(0..n);
        let s0 = self.config.get(seed);
        let p = self.params.p_bond;
        self.stack.clear();
        self.stack.push(seed as u32);
        self.stamp[seed] = self.epoch;
        let mut members = 1usize;
        let mut head = 0;
        let mut hit_ghost = false;
        while head < self.stack.len() {
            let site = self.stack[head] as usize;
            head += 1;
            if s0 > 0 {
                let pg = self.ghost_p[site];
                if pg > 0.0 && self.rng.random::<f64>() < pg {
                    hit_ghost = true;
                    break;
                }
            }
            for &t in self.lattice.neighbors(site) {
                if t == NO_SITE {
                    continue;
                }
                let t = t as usize;
                if self.stamp[t] == self.epoch || self.config.get(t) != s0 {
                    continue;
                }
                if self.rng.random::<f64>() < p {
                    self.stamp[t] = self.epoch;
                    self.stack.push(t as u32);
                    members += 1;
                }
            }
        }
        if !hit_ghost {
            for &s in &self.stack {
                self.config.flip(s as usize);
            }
        }
        self.bonds_fresh = false;
        members
    }

    /// One lattice volume of Wolff work. The first [`WOLFF_CALIBRATION`]
    /// sweeps grow clusters until `|Λ|` sites were visited; later sweeps run
    /// the fixed number of updates this took on average, so that measurement
    /// times do not depend on the clusters drawn.
    pub fn wolff_sweep(&mut self) {
        let n = self.lattice.n_sites() as u64;
        let (sweeps, updates, visited) = self.wolff_calib;
        if sweeps < WOLFF_CALIBRATION {
            let (mut work, mut k) = (0, 0);
            while work < n {
                work += self.wolff_update() as u64;
                k += 1;
            }
            self.wolff_calib = (sweeps + 1, updates + k, visited + work);
        } else {
            let k = (n * updates).div_ceil(visited).max(1);
            for _ in 0..k {
                self.wolff_update();
            }
        }
        self.sweep_count += 1;
    }

    /// Updates per Wolff sweep once calibrated.
    pub fn wolff_updates_per_sweep(&self) -> Option<u64> {
        let (sweeps, updates, visited) = self.wolff_calib;
        (sweeps >= WOLFF_CALIBRATION).then(|| {
            (self.lattice.n_sites() as u64 * updates)
                .div_ceil(visited)
                .max(1)
        })
    }

    pub fn sweep(&mut self, algorithm: Algorithm) {
        match algorithm {
            Algorithm::Heatbath => self.heatbath_sweep(),
            Algorithm::Wolff => self.wolff_sweep(),
            Algorithm::SwendsenWang => self.swendsen_wang_update(),
        }
    }

    /// Bonds paired with the current spins: the last Swendsen–Wang bonds if
    /// still valid, otherwise a fresh conditional draw.
    pub fn current_bonds(&mut self) -> &BondConfig {
        if !self.bonds_fresh {
            sample_bonds_into(
                &self.lattice,
                &self.config,
                &self.params,
                &mut self.rng,
                &mut self.bonds,
            );
            self.bonds_fresh = true;
        }
        &self.bonds
    }

    pub fn sample(&mut self, with_bonds: bool) -> Sample<'_> {
        if with_bonds {
            self.current_bonds();
        }
        Sample {
            lattice: &self.lattice,
            params: &self.params,
            spins: &self.config,
            bonds: with_bonds.then_some(&self.bonds),
        }
    }

    /// Thermalizes, then calls `measure` every `measure_every` sweeps.
    pub fn drive<F>(&mut self, plan: &RunPlan, with_bonds: bool, mut measure: F) -> Result<()>
    where
        F: FnMut(&Sample<'_>),
    {
        plan.validate()?;
        for _ in 0..plan.n_therm {
            self.sweep(plan.algorithm);
        }
        for i in 0..plan.n_measure {
            self.sweep(plan.algorithm);
            if (i + 1) % plan.measure_every == 0 {
                let s = self.sample(with_bonds);
                measure(&s);
            }
        }
        Ok(())
    }

    /// Writes a versioned checkpoint: a header line, a JSON line with the
    /// lattice, parameters, generator state and sweep count, then the spin
    /// configuration bytes.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = CheckpointMeta {
            spec: *self.spec(),
            params: self.params,
            rng_seed: self
                .rng
                .get_seed()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect(),
            rng_stream: self.rng.get_stream(),
            rng_word_pos: self.rng.get_word_pos().to_string(),
            sweep_count: self.sweep_count,
            wolff_calib: self.wolff_calib,
        };
        writeln!(w, "{CHECKPOINT_HEADER}")?;
        serde_json::to_writer(&mut w, &meta)?;
        writeln!(w)?;
        self.config.write_to(self.spec(), &mut w)?;
        Ok(())
    }

    pub fn load<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != CHECKPOINT_HEADER {
            return Err(Error::Checkpoint(format!(
                "unrecognised header '{}'",
                line.trim_end()
            )));
        }
        line.clear();
        r.read_line(&mut line)?;
        let meta: CheckpointMeta = serde_json::from_str(&line)?;
        let (spec, config) = SpinConfig::read_from(&mut r)?;
        if spec != meta.spec {
            return Err(Error::Checkpoint(
                "spin block disagrees with header lattice".into(),
            ));
        }
        let mut seed = [0u8; 32];
        if meta.rng_seed.len() != 64 {
            return Err(Error::Checkpoint("bad generator seed".into()));
        }
        for (k, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&meta.rng_seed[2 * k..2 * k + 2], 16)
                .map_err(|_| Error::Checkpoint("bad generator seed".into()))?;
        }
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(meta.rng_stream);
        let pos: u128 = meta
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Checkpoint("bad generator position".into()))?;
        rng.set_word_pos(pos);
        let params = ModelParams::new(meta.params.beta, meta.params.h)?;
        let mut state = ChainState::with_config(spec, params, config, rng)?;
        state.sweep_count = meta.sweep_count;
        state.wolff_calib = meta.wolff_calib;
        Ok(state)
    }
}

/// Sweeps spent calibrating the number of Wolff updates per sweep.
pub const WOLFF_CALIBRATION: u64 = 20;

pub const CHECKPOINT_HEADER: &str = "isingfield-checkpoint v1";

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    spec: LatticeSpec,
    params: ModelParams,
    rng_seed: String,
    rng_stream: u64,
    rng_word_pos: String,
    sweep_count: u64,
    wolff_calib: (u64, u64, u64),
}

/// Runs a chain and returns one [`Estimate`] per observable, keyed by name.
pub fn run_chain(
    plan: &RunPlan,
    state: &mut ChainState,
    observables: &[Observable],
) -> Result<BTreeMap<String, Estimate>> {
    let with_bonds = observables.iter().any(|o| o.needs_bonds);
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); observables.len()];
    state.drive(plan, with_bonds, |s| {
        for (o, xs) in observables.iter().zip(series.iter_mut()) {
            xs.push(o.eval(s));
        }
    })?;
    if series.first().is_some_and(|xs| xs.is_empty()) {
        return Err(Error::InvalidParameter(
            "plan produced no measurements (n_measure < measure_every)".into(),
        ));
    }
    let mut out = BTreeMap::new();
    for (o, xs) in observables.iter().zip(&series) {
        let e = Estimate::from_series(xs);
        // τ_int is in measurement units; the plan spaces them measure_every sweeps apart
        let tau_sweeps = e.tau_int * plan.measure_every as f64;
        if (plan.n_therm as f64) < 10.0 * tau_sweeps {
            log::warn!(
                "{}: n_therm = {} is below 10 tau_int = {:.1} sweeps",
                o.name,
                plan.n_therm,
                10.0 * tau_sweeps
            );
        }
        out.insert(o.name.clone(), e);
    }
    Ok(out)
}

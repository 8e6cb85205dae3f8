//! Lattices, model parameters and spin configurations.
//!
//! Sites are indexed row-major. For a box of half-width `L` the side is
//! `2L + 1` and site `(x, y)` with `x, y ∈ [-L, L]` lives at index
//! `(y + L) * side + (x + L)`; the origin is the central site. Even sides are
//! also accepted (small exact-comparison boxes such as 4×4); their origin is
//! the site at row and column `side / 2`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical inverse temperature of the square-lattice Ising model, `½ ln(1 + √2)`.
pub const BETA_C: f64 = 0.440_686_793_509_771_5;

/// `½ ln(1 + √2)` evaluated at runtime; agrees with [`BETA_C`] to machine precision.
pub fn beta_critical() -> f64 {
    0.5 * (1.0 + std::f64::consts::SQRT_2).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Unit field on every site of the outer layer.
    Plus,
    Free,
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Plus => "plus",
            Boundary::Free => "free",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(Boundary::Plus),
            "free" => Ok(Boundary::Free),
            _ => Err(Error::InvalidParameter(format!("unknown boundary '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Box(Boundary),
    Torus,
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Box(_) => "box",
            Geometry::Torus => "torus",
        }
    }

    pub fn boundary(&self) -> Option<Boundary> {
        match self {
            Geometry::Box(b) => Some(*b),
            Geometry::Torus => None,
        }
    }
}

/// Forward lattice directions used to index plane edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    side: usize,
    geometry: Geometry,
}

impl LatticeSpec {
    /// The box `[-L, L]²` with the given boundary condition.
    pub fn square_box(half_width: usize, boundary: Boundary) -> Self {
        LatticeSpec {
            side: 2 * half_width + 1,
            geometry: Geometry::Box(boundary),
        }
    }

    /// Box with an arbitrary side length, including even sides.
    pub fn box_with_side(side: usize, boundary: Boundary) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidParameter("box side must be positive".into()));
        }
        Ok(LatticeSpec {
            side,
            geometry: Geometry::Box(boundary),
        })
    }

    /// Periodic `(2L + 1)²` torus. Requires `L ≥ 1`.
    pub fn torus(half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::InvalidParameter(
                "torus half-width must be at least 1".into(),
            ));
        }
        Ok(LatticeSpec {
            side: 2 * half_width + 1,
            geometry: Geometry::Torus,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// `L` for odd sides, `None` for even boxes.
    pub fn half_width(&self) -> Option<usize> {
        (self.side % 2 == 1).then_some(self.side / 2)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn is_torus(&self) -> bool {
        self.geometry == Geometry::Torus
    }

    pub fn boundary(&self) -> Option<Boundary> {
        self.geometry.boundary()
    }

    pub fn n_sites(&self) -> usize {
        self.side * self.side
    }

    pub fn origin(&self) -> usize {
        let c = self.side / 2;
        c * self.side + c
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.side + col
    }

    /// `(col, row)` of a site.
    pub fn col_row(&self, site: usize) -> (usize, usize) {
        (site % self.side, site / self.side)
    }

    /// Coordinates relative to the origin.
    pub fn coords(&self, site: usize) -> (i64, i64) {
        let (c, r) = self.col_row(site);
        let o = (self.side / 2) as i64;
        (c as i64 - o, r as i64 - o)
    }

    /// Site at an offset from `site`; wraps on the torus, `None` off the box.
    pub fn offset(&self, site: usize, dx: i64, dy: i64) -> Option<usize> {
        let (c, r) = self.col_row(site);
        let n = self.side as i64;
        let (mut c, mut r) = (c as i64 + dx, r as i64 + dy);
        if self.is_torus() {
            c = c.rem_euclid(n);
            r = r.rem_euclid(n);
        } else if c < 0 || r < 0 || c >= n || r >= n {
            return None;
        }
        Some(self.index(c as usize, r as usize))
    }

    /// Forward neighbour along `axis`, if the edge exists.
    #[inline]
    pub fn forward(&self, site: usize, axis: Axis) -> Option<usize> {
        let n = self.side;
        let (c, r) = (site % n, site / n);
        match (axis, self.is_torus()) {
            (Axis::X, true) => Some(r * n + (c + 1) % n),
            (Axis::Y, true) => Some(((r + 1) % n) * n + c),
            (Axis::X, false) => (c + 1 < n).then_some(site + 1),
            (Axis::Y, false) => (r + 1 < n).then_some(site + n),
        }
    }

    /// True for sites of the outer layer of a box (never on the torus).
    pub fn on_boundary(&self, site: usize) -> bool {
        if self.is_torus() {
            return false;
        }
        let (c, r) = self.col_row(site);
        c == 0 || r == 0 || c + 1 == self.side || r + 1 == self.side
    }

    /// 1 on sites carrying the plus-boundary field, 0 elsewhere.
    pub fn boundary_field(&self, site: usize) -> f64 {
        if self.boundary() == Some(Boundary::Plus) && self.on_boundary(site) {
            1.0
        } else {
            0.0
        }
    }

    /// Number of plane edges, each counted once.
    pub fn n_edges(&self) -> usize {
        if self.is_torus() {
            2 * self.n_sites()
        } else {
            2 * self.side * (self.side - 1)
        }
    }

    /// Builds the neighbour tables used by the samplers.
    pub fn build(&self) -> Lattice {
        Lattice::new(*self)
    }
}

pub const NO_SITE: u32 = u32::MAX;

/// A [`LatticeSpec`] with precomputed neighbour lists and boundary fields.
#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    neighbors: Vec<[u32; 4]>,
    boundary: Vec<bool>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Self {
        let n = spec.n_sites();
        let mut neighbors = vec![[NO_SITE; 4]; n];
        for (site, nb) in neighbors.iter_mut().enumerate() {
            let steps = [(1, 0), (-1, 0), (0, 1), (0, -1)];
            for (slot, (dx, dy)) in nb.iter_mut().zip(steps) {
                if let Some(t) = spec.offset(site, dx, dy) {
                    *slot = t as u32;
                }
            }
        }
        let boundary = (0..n)
            .map(|s| spec.boundary() == Some(Boundary::Plus) && spec.on_boundary(s))
            .collect();
        Lattice {
            spec,
            neighbors,
            boundary,
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.neighbors.len()
    }

    /// Up to four neighbours; missing ones are [`NO_SITE`].
    #[inline]
    pub fn neighbors(&self, site: usize) -> &[u32; 4] {
        &self.neighbors[site]
    }

    #[inline]
    pub fn plus_boundary(&self, site: usize) -> bool {
        self.boundary[site]
    }

    /// Total field `h + β·b_x` felt by each site.
    pub fn site_fields(&self, params: &ModelParams) -> Vec<f64> {
        self.boundary
            .iter()
            .map(|&b| params.h + if b { params.beta } else { 0.0 })
            .collect()
    }
}

/// Inverse temperature, external field and the derived Edwards–Sokal bond
/// probabilities `p_bond = 1 - e^{-2β}`, `p_ghost = 1 - e^{-2h}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub h: f64,
    pub p_bond: f64,
    pub p_ghost: f64,
}

impl ModelParams {
    pub fn new(beta: f64, h: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta}")));
        }
        if !(h >= 0.0) || h.is_nan() {
            return Err(Error::InvalidParameter(format!("h = {h}")));
        }
        Ok(ModelParams {
            beta,
            h,
            p_bond: bond_probability(beta),
            p_ghost: bond_probability(h),
        })
    }

    pub fn critical(h: f64) -> Result<Self> {
        Self::new(BETA_C, h)
    }
}

/// Edwards–Sokal probability `1 - e^{-2K}` for an edge of strength `K`.
#[inline]
pub fn bond_probability(coupling: f64) -> f64 {
    -(-2.0 * coupling).exp_m1()
}

/// One ±1 spin per site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn all_plus(spec: &LatticeSpec) -> Self {
        SpinConfig {
            spins: vec![1; spec.n_sites()],
        }
    }

    pub fn all_minus(spec: &LatticeSpec) -> Self {
        SpinConfig {
            spins: vec![-1; spec.n_sites()],
        }
    }

    pub fn from_spins(spec: &LatticeSpec, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_sites(),
                found: spins.len(),
            });
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad));
        }
        Ok(SpinConfig { spins })
    }

    /// Checkerboard with the corner `(col 0, row 0)` set to `+1`.
    pub fn checkerboard(spec: &LatticeSpec) -> Self {
        let spins = (0..spec.n_sites())
            .map(|s| {
                let (c, r) = spec.col_row(s);
                if (c + r) % 2 == 0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        SpinConfig { spins }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    #[inline]
    pub fn get(&self, site: usize) -> i8 {
        self.spins[site]
    }

    #[inline]
    pub fn set(&mut self, site: usize, up: bool) {
        self.spins[site] = if up { 1 } else { -1 };
    }

    #[inline]
    pub fn flip(&mut self, site: usize) {
        self.spins[site] = -self.spins[site];
    }

    pub fn flipped(&self) -> Self {
        SpinConfig {
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }

    fn check(&self, spec: &LatticeSpec) -> Result<()> {
        if self.spins.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_sites(),
                found: self.spins.len(),
            });
        }
        Ok(())
    }

    /// Writes `side` (u32 LE), geometry tag, boundary tag, then one signed
    /// byte per site in row-major order.
    pub fn write_to<W: Write>(&self, spec: &LatticeSpec, mut w: W) -> Result<()> {
        self.check(spec)?;
        w.write_all(&(spec.side() as u32).to_le_bytes())?;
        let (g, b) = geometry_tags(spec.geometry());
        w.write_all(&[g, b])?;
        let bytes: Vec<u8> = self.spins.iter().map(|&s| s as u8).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<(LatticeSpec, SpinConfig)> {
        let mut side = [0u8; 4];
        r.read_exact(&mut side)?;
        let side = u32::from_le_bytes(side) as usize;
        let mut tags = [0u8; 2];
        r.read_exact(&mut tags)?;
        let geometry = geometry_from_tags(tags[0], tags[1])?;
        let spec = match geometry {
            Geometry::Torus => {
                if side % 2 == 0 {
                    return Err(Error::Checkpoint(format!("even torus side {side}")));
                }
                LatticeSpec::torus(side / 2)?
            }
            Geometry::Box(b) => LatticeSpec::box_with_side(side, b)?,
        };
        let mut bytes = vec![0u8; spec.n_sites()];
        r.read_exact(&mut bytes)?;
        let spins = bytes.into_iter().map(|b| b as i8).collect();
        let config = SpinConfig::from_spins(&spec, spins)?;
        Ok((spec, config))
    }
}

fn geometry_tags(g: Geometry) -> (u8, u8) {
    match g {
        Geometry::Box(Boundary::Free) => (0, 0),
        Geometry::Box(Boundary::Plus) => (0, 1),
        Geometry::Torus => (1, 2),
    }
}

fn geometry_from_tags(g: u8, b: u8) -> Result<Geometry> {
    match (g, b) {
        (0, 0) => Ok(Geometry::Box(Boundary::Free)),
        (0, 1) => Ok(Geometry::Box(Boundary::Plus)),
        (1, 2) => Ok(Geometry::Torus),
        _ => Err(Error::Checkpoint(format!(
            "unknown geometry tags ({g}, {b})"
        ))),
    }
}

/// `E_L(σ) = -Σ_{x~y} σ_x σ_y - Σ_{x∈∂Λ} σ_x`; the boundary sum is present
/// only for the plus boundary condition.
pub fn energy(config: &SpinConfig, spec: &LatticeSpec) -> Result<i64> {
    config.check(spec)?;
    let s = config.spins();
    let mut e = 0i64;
    for site in 0..spec.n_sites() {
        for axis in [Axis::X, Axis::Y] {
            if let Some(t) = spec.forward(site, axis) {
                e -= (s[site] * s[t]) as i64;
            }
        }
        if spec.boundary_field(site) > 0.0 {
            e -= s[site] as i64;
        }
    }
    Ok(e)
}

/// `M(σ) = Σ_x σ_x`.
pub fn total_magnetization(config: &SpinConfig) -> i64 {
    config.spins().iter().map(|&s| s as i64).sum()
}

//! Bond configurations of the ghost-extended lattice and their connectivity.
//!
//! Plane bond `2·site + axis` joins `site` to its forward neighbour along
//! `axis`; on a box the forward bonds of the last column/row do not exist and
//! stay closed. Ghost bond `site` joins the site to the ghost vertex.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{
    bond_probability, Axis, Lattice, LatticeSpec, ModelParams, SpinConfig, NO_SITE,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BondConfig {
    spec: LatticeSpec,
    plane: Vec<bool>,
    ghost: Vec<bool>,
}

impl BondConfig {
    pub fn closed(spec: &LatticeSpec) -> Self {
        BondConfig {
            spec: *spec,
            plane: vec![false; 2 * spec.n_sites()],
            ghost: vec![false; spec.n_sites()],
        }
    }

    /// Every plane bond open, every ghost bond closed.
    pub fn all_open(spec: &LatticeSpec) -> Self {
        let mut b = BondConfig::closed(spec);
        for site in 0..spec.n_sites() {
            for axis in [Axis::X, Axis::Y] {
                if spec.forward(site, axis).is_some() {
                    b.plane[2 * site + axis as usize] = true;
                }
            }
        }
        b
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    #[inline]
    pub fn plane(&self, site: usize, axis: Axis) -> bool {
        self.plane[2 * site + axis as usize]
    }

    /// Opens or closes a plane bond; fails if the edge does not exist.
    pub fn set_plane(&mut self, site: usize, axis: Axis, open: bool) -> Result<()> {
        if self.spec.forward(site, axis).is_none() {
            return Err(Error::OutOfRange(format!(
                "no {axis:?} edge at site {site}"
            )));
        }
        self.plane[2 * site + axis as usize] = open;
        Ok(())
    }

    #[inline]
    pub fn ghost(&self, site: usize) -> bool {
        self.ghost[site]
    }

    pub fn set_ghost(&mut self, site: usize, open: bool) {
        self.ghost[site] = open;
    }

    pub fn ghost_bonds(&self) -> &[bool] {
        &self.ghost
    }

    pub fn n_open_plane(&self) -> usize {
        self.plane.iter().filter(|&&b| b).count()
    }

    /// Open plane bond between `a` and the site at offset `(dx, dy)` with
    /// `|dx| + |dy| = 1`.
    fn open_step(&self, a: usize, dx: i64, dy: i64) -> Option<usize> {
        let b = self.spec.offset(a, dx, dy)?;
        let open = match (dx, dy) {
            (1, 0) => self.plane(a, Axis::X),
            (-1, 0) => self.plane(b, Axis::X),
            (0, 1) => self.plane(a, Axis::Y),
            (0, -1) => self.plane(b, Axis::Y),
            _ => unreachable!(),
        };
        open.then_some(b)
    }

    /// Open plane neighbours using a prebuilt lattice; order `+x, -x, +y, -y`.
    #[inline]
    pub fn open_neighbors(&self, lattice: &Lattice, site: usize) -> [u32; 4] {
        let nb = lattice.neighbors(site);
        let mut out = [NO_SITE; 4];
        if nb[0] != NO_SITE && self.plane[2 * site] {
            out[0] = nb[0];
        }
        if nb[1] != NO_SITE && self.plane[2 * nb[1] as usize] {
            out[1] = nb[1];
        }
        if nb[2] != NO_SITE && self.plane[2 * site + 1] {
            out[2] = nb[2];
        }
        if nb[3] != NO_SITE && self.plane[2 * nb[3] as usize + 1] {
            out[3] = nb[3];
        }
        out
    }
}

/// Conditional Edwards–Sokal step: equal-spin neighbours bond with
/// `p_bond`, plus sites bond to the ghost with `1 - e^{-2(h + β b_x)}`
/// where `b_x` marks plus-boundary sites. Unequal pairs stay closed.
pub fn sample_bonds_from_spins<R: Rng>(
    lattice: &Lattice,
    config: &SpinConfig,
    params: &ModelParams,
    rng: &mut R,
) -> BondConfig {
    let mut bonds = BondConfig::closed(lattice.spec());
    sample_bonds_into(lattice, config, params, rng, &mut bonds);
    bonds
}

pub(crate) fn sample_bonds_into<R: Rng>(
    lattice: &Lattice,
    config: &SpinConfig,
    params: &ModelParams,
    rng: &mut R,
    bonds: &mut BondConfig,
) {
    let s = config.spins();
    let p = params.p_bond;
    let p_field = params.p_ghost;
    let p_edge = bond_probability(params.h + params.beta);
    for site in 0..lattice.n_sites() {
        let nb = lattice.neighbors(site);
        let si = s[site];
        for (k, &t) in [nb[0], nb[2]].iter().enumerate() {
            bonds.plane[2 * site + k] =
                t != NO_SITE && si == s[t as usize] && p > 0.0 && rng.random::<f64>() < p;
        }
        let pg = if lattice.plus_boundary(site) {
            p_edge
        } else {
            p_field
        };
        bonds.ghost[site] = si > 0 && pg > 0.0 && rng.random::<f64>() < pg;
    }
}

/// Disjoint sets with union by size and path compression.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.iter_mut().for_each(|s| *s = 1);
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    #[inline]
    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let gp = self.parent[self.parent[x] as usize];
            self.parent[x] = gp;
            x = gp as usize;
        }
        x
    }

    #[inline]
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    /// Plane bonds only: the cluster `C(ω)`.
    PlaneOnly,
    /// Plane and ghost bonds.
    Extended,
}

/// Partition of the sites into open clusters.
#[derive(Clone, Debug)]
pub struct ClusterLabels {
    mode: LabelMode,
    origin: usize,
    label: Vec<u32>,
    ghost_root: Option<u32>,
    /// Site count per root; zero for non-roots.
    sizes: Vec<u32>,
}

impl ClusterLabels {
    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn n_sites(&self) -> usize {
        self.label.len()
    }

    #[inline]
    pub fn label(&self, site: usize) -> u32 {
        self.label[site]
    }

    pub fn labels(&self) -> &[u32] {
        &self.label
    }

    /// Root of the ghost's cluster (extended mode only).
    pub fn ghost_root(&self) -> Option<u32> {
        self.ghost_root
    }

    /// Number of lattice sites in the cluster of `site`.
    #[inline]
    pub fn cluster_size(&self, site: usize) -> usize {
        self.sizes[self.label[site] as usize] as usize
    }

    /// Sizes of all clusters, by root, in increasing root order.
    pub fn cluster_sizes(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(r, &s)| (r as u32, s as usize))
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.label[a] == self.label[b]
    }
}

pub fn label_clusters(bonds: &BondConfig, mode: LabelMode) -> ClusterLabels {
    let n = bonds.spec.n_sites();
    let mut uf = UnionFind::new(n + 1);
    label_with(bonds, mode, &mut uf)
}

pub(crate) fn label_with(bonds: &BondConfig, mode: LabelMode, uf: &mut UnionFind) -> ClusterLabels {
    let spec = &bonds.spec;
    let n = spec.n_sites();
    debug_assert_eq!(uf.len(), n + 1);
    uf.reset();
    for site in 0..n {
        for axis in [Axis::X, Axis::Y] {
            if bonds.plane(site, axis) {
                let t = spec
                    .forward(site, axis)
                    .expect("open bond on a missing edge");
                uf.union(site, t);
            }
        }
        if mode == LabelMode::Extended && bonds.ghost[site] {
            uf.union(site, n);
        }
    }
    let mut label = vec![0u32; n];
    let mut sizes = vec![0u32; n + 1];
    for (site, l) in label.iter_mut().enumerate() {
        let r = uf.find(site);
        *l = r as u32;
        sizes[r] += 1;
    }
    let ghost_root = (mode == LabelMode::Extended).then(|| uf.find(n) as u32);
    ClusterLabels {
        mode,
        origin: spec.origin(),
        label,
        ghost_root,
        sizes,
    }
}

pub fn origin_cluster_size(labels: &ClusterLabels) -> usize {
    labels.cluster_size(labels.origin)
}

/// Whether `site` shares the ghost's cluster.
pub fn ghost_connected(labels: &ClusterLabels, site: usize) -> Result<bool> {
    match labels.ghost_root {
        Some(g) => Ok(labels.label[site] == g),
        None => Err(Error::PlaneOnlyLabels),
    }
}

pub(crate) fn check_radius(spec: &LatticeSpec, r: usize) -> Result<()> {
    let max = (spec.side() - 1) / 2;
    if r > max {
        return Err(Error::OutOfRange(format!(
            "radius {r} exceeds the largest box {max} that fits around the origin"
        )));
    }
    Ok(())
}

/// Breadth-first explorer with a stamp array, reusable across searches.
#[derive(Clone, Debug)]
pub struct Explorer {
    stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<(usize, i32, i32)>,
}

impl Explorer {
    pub fn new(n_sites: usize) -> Self {
        Explorer {
            stamp: vec![0; n_sites],
            epoch: 0,
            queue: Vec::new(),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Largest `‖x - origin‖∞` reached by an open plane path from `origin`
    /// that stays inside `origin + Λ_rmax`. Stops early once `rmax` is reached.
    pub fn reach(
        &mut self,
        bonds: &BondConfig,
        lattice: &Lattice,
        origin: usize,
        rmax: usize,
    ) -> usize {
        self.next_epoch();
        let rmax = rmax as i32;
        self.queue.clear();
        self.queue.push((origin, 0, 0));
        self.stamp[origin] = self.epoch;
        let mut best = 0;
        let mut head = 0;
        while head < self.queue.len() {
            let (site, x, y) = self.queue[head];
            head += 1;
            let d = x.abs().max(y.abs());
            if d > best {
                best = d;
                if best >= rmax {
                    break;
                }
            }
            let nb = bonds.open_neighbors(lattice, site);
            let steps = [(1, 0), (-1, 0), (0, 1), (0, -1)];
            for (&t, (dx, dy)) in nb.iter().zip(steps) {
                if t == NO_SITE {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx.abs() > rmax || ny.abs() > rmax || self.stamp[t as usize] == self.epoch {
                    continue;
                }
                self.stamp[t as usize] = self.epoch;
                self.queue.push((t as usize, nx, ny));
            }
        }
        best as usize
    }
}

/// `0 ↔ ∂Λ_R`: an open plane path joins the origin to a site at sup-norm
/// distance `R`.
pub fn crossing_event(bonds: &BondConfig, r: usize) -> Result<bool> {
    let spec = bonds.spec;
    check_radius(&spec, r)?;
    if r == 0 {
        return Ok(true);
    }
    let origin = spec.origin();
    let mut seen = std::collections::HashSet::new();
    let mut queue = std::collections::VecDeque::new();
    seen.insert((0i64, 0i64));
    queue.push_back((origin, 0i64, 0i64));
    let r = r as i64;
    while let Some((site, x, y)) = queue.pop_front() {
        if x.abs().max(y.abs()) == r {
            return Ok(true);
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx.abs() > r || ny.abs() > r || seen.contains(&(nx, ny)) {
                continue;
            }
            if let Some(t) = bonds.open_step(site, dx, dy) {
                seen.insert((nx, ny));
                queue.push_back((t, nx, ny));
            }
        }
    }
    Ok(false)
}

/// The circuit event `C_R`: an open circuit made of bonds between sites of
/// the annulus `Λ_R ∖ Λ_{R/2}` (sites with `R/2 < ‖x‖∞ ≤ R`) surrounds
/// `Λ_{R/2}`. Decided by duality: no circuit exists iff a dual path that only
/// crosses bonds which are not open annulus bonds leads from the central
/// face to the outer ring of faces.
pub fn circuit_event(bonds: &BondConfig, r: usize) -> Result<bool> {
    let spec = bonds.spec;
    if r < 2 || r % 2 == 1 {
        return Err(Error::OutOfRange(format!(
            "circuit radius {r} must be even and at least 2"
        )));
    }
    check_radius(&spec, r)?;
    let origin = spec.origin();
    let (inner, outer) = ((r / 2) as i64, r as i64);
    let in_annulus = |x: i64, y: i64| {
        let d = x.abs().max(y.abs());
        d > inner && d <= outer
    };
    let site_at = |x: i64, y: i64| spec.offset(origin, x, y).expect("inside checked radius");
    // primal bond from (x, y) to (x + ax, y + ay) is an open annulus bond
    let blocks = |x: i64, y: i64, axis: Axis| {
        let (x2, y2) = match axis {
            Axis::X => (x + 1, y),
            Axis::Y => (x, y + 1),
        };
        in_annulus(x, y) && in_annulus(x2, y2) && bonds.plane(site_at(x, y), axis)
    };
    // faces (i, j) with corners (i..=i+1, j..=j+1), i, j ∈ [-outer-1, outer]
    let lo = -outer - 1;
    let width = (2 * outer + 2) as usize;
    let idx = |i: i64, j: i64| ((j - lo) as usize) * width + (i - lo) as usize;
    let mut seen = vec![false; width * width];
    let mut stack = vec![(0i64, 0i64)];
    seen[idx(0, 0)] = true;
    while let Some((i, j)) = stack.pop() {
        if i == lo || j == lo || i == outer || j == outer {
            return Ok(false);
        }
        // right: crosses the vertical bond (i+1, j)-(i+1, j+1)
        let moves = [
            (i + 1, j, blocks(i + 1, j, Axis::Y)),
            (i - 1, j, blocks(i, j, Axis::Y)),
            (i, j + 1, blocks(i, j + 1, Axis::X)),
            (i, j - 1, blocks(i, j, Axis::X)),
        ];
        for (ni, nj, blocked) in moves {
            if !blocked && !seen[idx(ni, nj)] {
                seen[idx(ni, nj)] = true;
                stack.push((ni, nj));
            }
        }
    }
    Ok(true)
}

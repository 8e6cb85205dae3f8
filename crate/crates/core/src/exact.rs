//! Exact enumeration on small ferromagnetic graphs.
//!
//! Spin sums run over the free (non-frozen) vertices with Boltzmann weight
//! `exp(β Σ_e J_e σ_i σ_j + Σ_v h_v σ_v)`; frozen vertices carry spin `+1`.
//! Random-cluster sums run over the bonds of the ghost-extended graph with
//! weight `Π p^{open} (1-p)^{closed} · 2^{#clusters}`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{bond_probability, Axis, Boundary, LatticeSpec};

/// Largest number of free spins the spin enumeration accepts.
pub const MAX_FREE_SPINS: usize = 26;
/// Largest number of random (0 < p < 1) bonds the random-cluster enumeration accepts.
pub const MAX_RC_EDGES: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

/// Ferromagnetic graph with non-negative site fields and an optional set of
/// vertices frozen to `+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    fields: Vec<f64>,
    frozen: Vec<bool>,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n_vertices: usize) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex".into(),
            ));
        }
        Ok(WeightedGraph {
            fields: vec![0.0; n_vertices],
            frozen: vec![false; n_vertices],
            edges: Vec::new(),
        })
    }

    /// `cols × rows` free-boundary grid with unit couplings and uniform field.
    pub fn grid(cols: usize, rows: usize, field: f64) -> Result<Self> {
        let mut g = WeightedGraph::new(cols * rows)?;
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    g.add_edge(v, v + 1, 1.0)?;
                }
                if r + 1 < rows {
                    g.add_edge(v, v + cols, 1.0)?;
                }
                g.set_field(v, field)?;
            }
        }
        Ok(g)
    }

    /// The lattice model as a graph. Sites keep their lattice indices; a plus
    /// boundary becomes one extra frozen vertex joined with unit coupling to
    /// every boundary site.
    pub fn from_lattice(spec: &LatticeSpec, h: f64) -> Result<Self> {
        let n = spec.n_sites();
        let plus = spec.boundary() == Some(Boundary::Plus);
        let mut g = WeightedGraph::new(n + plus as usize)?;
        for site in 0..n {
            g.set_field(site, h)?;
            for axis in [Axis::X, Axis::Y] {
                if let Some(t) = spec.forward(site, axis) {
                    g.add_edge(site, t, 1.0)?;
                }
            }
        }
        if plus {
            g.freeze(n)?;
            for site in (0..n).filter(|&s| spec.on_boundary(s)) {
                g.add_edge(site, n, 1.0)?;
            }
        }
        Ok(g)
    }

    pub fn n_vertices(&self) -> usize {
        self.fields.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn field(&self, v: usize) -> f64 {
        self.fields[v]
    }

    pub fn is_frozen(&self, v: usize) -> bool {
        self.frozen[v]
    }

    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&v| !self.frozen[v])
            .collect()
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n_vertices() {
            Err(Error::UnknownVertex(v))
        } else {
            Ok(())
        }
    }

    pub fn add_edge(&mut self, i: usize, j: usize, coupling: f64) -> Result<()> {
        self.check_vertex(i)?;
        self.check_vertex(j)?;
        if i == j {
            return Err(Error::InvalidParameter(format!("self-loop at vertex {i}")));
        }
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coupling J = {coupling} on edge ({i}, {j}) must be finite and non-negative"
            )));
        }
        self.edges.push(Edge { i, j, coupling });
        Ok(())
    }

    pub fn set_field(&mut self, v: usize, h: f64) -> Result<()> {
        self.check_vertex(v)?;
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "field h = {h} at vertex {v} must be finite and non-negative"
            )));
        }
        self.fields[v] = h;
        Ok(())
    }

    pub fn freeze(&mut self, v: usize) -> Result<()> {
        self.check_vertex(v)?;
        self.frozen[v] = true;
        Ok(())
    }

    /// Copy with `dh` added to the field of every free vertex.
    pub fn shifted(&self, dh: f64) -> Self {
        let mut g = self.clone();
        for (f, &fz) in g.fields.iter_mut().zip(&self.frozen) {
            if !fz {
                *f += dh;
            }
        }
        g
    }

    /// Random ferromagnetic graph: 3–5 vertices, each edge present with
    /// probability ½, `J ~ U[0, 2]`, `h ~ U[0, 2]`, and in 10% of draws a
    /// random non-empty frozen set that leaves at least one vertex free.
    pub fn random_ferromagnet<R: Rng>(rng: &mut R) -> Self {
        let n = rng.random_range(3..=5);
        let mut g = WeightedGraph::new(n).expect("n >= 3");
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    let c = rng.random_range(0.0..2.0);
                    g.add_edge(i, j, c).expect("valid edge");
                }
            }
            let h = rng.random_range(0.0..2.0);
            g.set_field(i, h).expect("valid field");
        }
        if rng.random_bool(0.1) {
            let k = rng.random_range(1..n);
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for &v in &order[..k] {
                g.freeze(v).expect("in range");
            }
        }
        g
    }
}

impl fmt::Display for WeightedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in 0..self.n_vertices() {
            write!(f, "vertex {v} h={}", self.fields[v])?;
            if self.frozen[v] {
                write!(f, " frozen")?;
            }
            writeln!(f)?;
        }
        for e in &self.edges {
            writeln!(f, "edge {} {} J={}", e.i, e.j, e.coupling)?;
        }
        Ok(())
    }
}

/// Parses the plain-text graph format, one record per line:
///
/// ```text
/// vertex <id> h=<val> [frozen]
/// edge <i> <j> J=<val>
/// ghost <i> p=<val>
/// ```
///
/// Blank lines and `#` comments are ignored. Vertex ids must be contiguous
/// from 0. A `ghost` record adds the field `-½ ln(1 - p)` to the vertex (a
/// ghost bond of probability `p`); `p = 1` freezes it.
impl FromStr for WeightedGraph {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut vertices: Vec<(f64, bool)> = Vec::new();
        let mut edges: Vec<(usize, usize, usize, f64)> = Vec::new();
        let mut ghosts: Vec<(usize, usize, f64)> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line, msg };
            let toks: Vec<&str> = content.split_whitespace().collect();
            match toks[0] {
                "vertex" => {
                    let id = parse_index(toks.get(1), line)?;
                    if id != vertices.len() {
                        return Err(perr(format!(
                            "expected vertex id {}, got {id}",
                            vertices.len()
                        )));
                    }
                    let mut h = 0.0;
                    let mut frozen = false;
                    for t in &toks[2..] {
                        if let Some(v) = t.strip_prefix("h=") {
                            h = parse_real(v, line)?;
                        } else if *t == "frozen" {
                            frozen = true;
                        } else {
                            return Err(perr(format!("unexpected token '{t}'")));
                        }
                    }
                    if !(h >= 0.0 && h.is_finite()) {
                        return Err(perr(format!("field h={h} must be finite and non-negative")));
                    }
                    vertices.push((h, frozen));
                }
                "edge" => {
                    let i = parse_index(toks.get(1), line)?;
                    let j = parse_index(toks.get(2), line)?;
                    let c = toks
                        .get(3)
                        .and_then(|t| t.strip_prefix("J="))
                        .ok_or_else(|| perr("missing J=<val>".into()))?;
                    let c = parse_real(c, line)?;
                    if !(c >= 0.0 && c.is_finite()) {
                        return Err(perr(format!(
                            "coupling J={c} violates the ferromagnetic precondition J >= 0"
                        )));
                    }
                    edges.push((line, i, j, c));
                }
                "ghost" => {
                    let i = parse_index(toks.get(1), line)?;
                    let p = toks
                        .get(2)
                        .and_then(|t| t.strip_prefix("p="))
                        .ok_or_else(|| perr("missing p=<val>".into()))?;
                    let p = parse_real(p, line)?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(perr(format!("ghost probability p={p} outside [0, 1]")));
                    }
                    ghosts.push((line, i, p));
                }
                other => return Err(perr(format!("unknown record '{other}'"))),
            }
        }
        if vertices.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "no vertex records".into(),
            });
        }
        let mut g = WeightedGraph::new(vertices.len())?;
        for (v, (h, frozen)) in vertices.into_iter().enumerate() {
            g.set_field(v, h)?;
            if frozen {
                g.freeze(v)?;
            }
        }
        for (line, i, j, c) in edges {
            g.add_edge(i, j, c).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        for (line, i, p) in ghosts {
            let wrap = |e: Error| Error::Parse {
                line,
                msg: e.to_string(),
            };
            g.check_vertex(i).map_err(wrap)?;
            if p == 1.0 {
                g.freeze(i).map_err(wrap)?;
            } else {
                let h = g.fields[i] - 0.5 * (-p).ln_1p();
                g.set_field(i, h).map_err(wrap)?;
            }
        }
        Ok(g)
    }
}

fn parse_index(tok: Option<&&str>, line: usize) -> Result<usize> {
    let t = tok.ok_or_else(|| Error::Parse {
        line,
        msg: "missing vertex id".into(),
    })?;
    t.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad vertex id '{t}'"),
    })
}

fn parse_real(t: &str, line: usize) -> Result<f64> {
    t.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number '{t}'"),
    })
}

/// Free-spin view of a graph prepared for Gray-code enumeration.
struct SpinSystem {
    n: usize,
    free: Vec<usize>,
    /// Effective field on each free vertex (own field plus frozen neighbours).
    field: Vec<f64>,
    /// Couplings among free vertices, as positions in `free`.
    adj: Vec<Vec<(usize, f64)>>,
    /// Log-weight contributed by frozen–frozen edges.
    constant: f64,
}

impl SpinSystem {
    fn new(g: &WeightedGraph, beta: f64) -> Result<Self> {
        let free = g.free_vertices();
        if free.len() > MAX_FREE_SPINS {
            return Err(Error::EnumerationCap {
                what: "free spins",
                count: free.len(),
                cap: MAX_FREE_SPINS,
            });
        }
        let mut pos = vec![usize::MAX; g.n_vertices()];
        for (k, &v) in free.iter().enumerate() {
            pos[v] = k;
        }
        let mut field: Vec<f64> = free.iter().map(|&v| g.fields[v]).collect();
        let mut adj = vec![Vec::new(); free.len()];
        let mut constant = 0.0;
        for e in &g.edges {
            let k = beta * e.coupling;
            match (g.frozen[e.i], g.frozen[e.j]) {
                (true, true) => constant += k,
                (true, false) => field[pos[e.j]] += k,
                (false, true) => field[pos[e.i]] += k,
                (false, false) => {
                    adj[pos[e.i]].push((pos[e.j], k));
                    adj[pos[e.j]].push((pos[e.i], k));
                }
            }
        }
        Ok(SpinSystem {
            n: g.n_vertices(),
            free,
            field,
            adj,
            constant,
        })
    }

    /// Log-weight of the all-plus state, the maximum for ferromagnets.
    fn max_log_weight(&self) -> f64 {
        let pair: f64 = self.adj.iter().flatten().map(|(_, k)| k).sum::<f64>() / 2.0;
        self.field.iter().sum::<f64>() + pair
    }

    /// Visits every free-spin configuration with its weight relative to the
    /// all-plus state. `spins` is indexed by graph vertex; frozen entries are +1.
    /// Returns `log` of the normalising shift.
    fn enumerate<F: FnMut(&[i8], f64, i64)>(&self, mut visit: F) -> f64 {
        let m = self.free.len();
        let mut spins = vec![1i8; self.n];
        for &v in &self.free {
            spins[v] = -1;
        }
        let shift = self.max_log_weight();
        let mut local = vec![-1i8; m];
        // all-minus log-weight
        let mut lw = -self.field.iter().sum::<f64>()
            + self.adj.iter().flatten().map(|(_, k)| k).sum::<f64>() / 2.0;
        let mut mag = -(m as i64);
        visit(&spins, (lw - shift).exp(), mag);
        for step in 1u64..(1u64 << m) {
            let k = step.trailing_zeros() as usize;
            let s = local[k] as f64;
            let nb: f64 = self.adj[k].iter().map(|&(u, c)| c * local[u] as f64).sum();
            lw -= 2.0 * s * (self.field[k] + nb);
            local[k] = -local[k];
            spins[self.free[k]] = local[k];
            mag += 2 * local[k] as i64;
            visit(&spins, (lw - shift).exp(), mag);
        }
        shift + self.constant
    }
}

/// Moments of the free-spin magnetization `M = Σ_{v∉K} σ_v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactMoments {
    pub log_z: f64,
    pub mean_m: f64,
    pub var_m: f64,
    /// `⟨M³⟩ - 3⟨M⟩⟨M²⟩ + 2⟨M⟩³`, equal to `∂³_h log Z` under a uniform field shift.
    pub kappa3: f64,
}

pub fn log_partition(g: &WeightedGraph, beta: f64) -> Result<f64> {
    let sys = SpinSystem::new(g, beta)?;
    let mut z = 0.0;
    let shift = sys.enumerate(|_, w, _| z += w);
    Ok(shift + z.ln())
}

pub fn exact_moments(g: &WeightedGraph, beta: f64) -> Result<ExactMoments> {
    let sys = SpinSystem::new(g, beta)?;
    let mut s = [0.0f64; 4];
    let shift = sys.enumerate(|_, w, m| {
        let m = m as f64;
        s[0] += w;
        s[1] += w * m;
        s[2] += w * m * m;
        s[3] += w * m * m * m;
    });
    let m1 = s[1] / s[0];
    let m2 = s[2] / s[0];
    let m3 = s[3] / s[0];
    Ok(ExactMoments {
        log_z: shift + s[0].ln(),
        mean_m: m1,
        var_m: (m2 - m1 * m1).max(0.0),
        kappa3: m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1,
    })
}

/// `⟨Π_{v ∈ vertices} σ_v⟩`; frozen vertices contribute `+1`.
pub fn correlation(g: &WeightedGraph, beta: f64, vertices: &[usize]) -> Result<f64> {
    for &v in vertices {
        g.check_vertex(v)?;
    }
    let sys = SpinSystem::new(g, beta)?;
    let (mut z, mut acc) = (0.0, 0.0);
    sys.enumerate(|spins, w, _| {
        let p: i8 = vertices.iter().map(|&v| spins[v]).product();
        z += w;
        acc += w * p as f64;
    });
    Ok(acc / z)
}

/// Single-site magnetizations `⟨σ_v⟩` for every vertex.
pub fn magnetizations(g: &WeightedGraph, beta: f64) -> Result<Vec<f64>> {
    let sys = SpinSystem::new(g, beta)?;
    let mut z = 0.0;
    let mut acc = vec![0.0; g.n_vertices()];
    sys.enumerate(|spins, w, _| {
        z += w;
        for (a, &s) in acc.iter_mut().zip(spins) {
            *a += w * s as f64;
        }
    });
    Ok(acc.into_iter().map(|a| a / z).collect())
}

pub fn exact_two_point(g: &WeightedGraph, beta: f64, x: usize, y: usize) -> Result<f64> {
    if x == y {
        g.check_vertex(x)?;
        return Ok(1.0);
    }
    correlation(g, beta, &[x, y])
}

/// The GHS combination
/// `⟨σᵢσⱼσₖ⟩ - ⟨σᵢ⟩⟨σⱼσₖ⟩ - ⟨σⱼ⟩⟨σᵢσₖ⟩ - ⟨σₖ⟩⟨σᵢσⱼ⟩ + 2⟨σᵢ⟩⟨σⱼ⟩⟨σₖ⟩`,
/// non-positive for ferromagnets with non-negative fields.
pub fn ghs_lhs(g: &WeightedGraph, beta: f64, i: usize, j: usize, k: usize) -> Result<f64> {
    for v in [i, j, k] {
        g.check_vertex(v)?;
        if g.is_frozen(v) {
            return Err(Error::FrozenVertex(v));
        }
    }
    let sys = SpinSystem::new(g, beta)?;
    let mut s = [0.0f64; 8];
    sys.enumerate(|sp, w, _| {
        let (a, b, c) = (sp[i] as f64, sp[j] as f64, sp[k] as f64);
        s[0] += w;
        s[1] += w * a;
        s[2] += w * b;
        s[3] += w * c;
        s[4] += w * b * c;
        s[5] += w * a * c;
        s[6] += w * a * b;
        s[7] += w * a * b * c;
    });
    let e: Vec<f64> = s.iter().map(|x| x / s[0]).collect();
    let (mi, mj, mk) = (e[1], e[2], e[3]);
    Ok(e[7] - (mi * e[4] + mj * e[5] + mk * e[6]) + 2.0 * mi * mj * mk)
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when two components were merged.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// `P(x ↔ ghost)` in the q = 2 random-cluster model on the ghost-extended
/// graph: plane bonds open with `1 - e^{-2βJ}`, vertex `v` joined to the ghost
/// with `1 - e^{-2(h_v + h)}`, frozen vertices wired to the ghost. The ghost
/// is counted as an ordinary vertex when counting clusters.
pub fn exact_rc_connectivity(g: &WeightedGraph, beta: f64, h: f64, x: usize) -> Result<f64> {
    g.check_vertex(x)?;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("h = {h}")));
    }
    let n = g.n_vertices();
    let ghost = n;
    let mut fixed_open = Vec::new();
    let mut random: Vec<(usize, usize, f64)> = Vec::new();
    let mut classify = |a: usize, b: usize, p: f64| {
        if p >= 1.0 {
            fixed_open.push((a, b));
        } else if p > 0.0 {
            random.push((a, b, p));
        }
    };
    for e in &g.edges {
        classify(e.i, e.j, bond_probability(beta * e.coupling));
    }
    for v in 0..n {
        if g.is_frozen(v) {
            classify(v, ghost, 1.0);
        } else {
            classify(v, ghost, bond_probability(g.fields[v] + h));
        }
    }
    if random.len() > MAX_RC_EDGES {
        return Err(Error::EnumerationCap {
            what: "random-cluster bonds",
            count: random.len(),
            cap: MAX_RC_EDGES,
        });
    }
    let m = random.len();
    let (mut total, mut hit) = (0.0f64, 0.0f64);
    let mut dsu = Dsu::new(n + 1);
    for mask in 0u64..(1u64 << m) {
        dsu.parent.iter_mut().enumerate().for_each(|(i, p)| *p = i);
        let mut clusters = n + 1;
        let mut w = 1.0;
        for &(a, b) in &fixed_open {
            clusters -= dsu.union(a, b) as usize;
        }
        for (k, &(a, b, p)) in random.iter().enumerate() {
            if mask >> k & 1 == 1 {
                w *= p;
                clusters -= dsu.union(a, b) as usize;
            } else {
                w *= 1.0 - p;
            }
        }
        w *= (clusters as f64).exp2();
        total += w;
        if dsu.find(x) == dsu.find(ghost) {
            hit += w;
        }
    }
    Ok(hit / total)
}

/// Probability that a single q = 2 random-cluster bond of weight `p` is open
/// given all other bonds: `p` when its endpoints are already connected,
/// otherwise `p / (p + 2(1 - p))`.
pub fn conditional_ghost_edge_prob(p_ghost: f64, connected: bool) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_ghost));
    if connected {
        p_ghost
    } else {
        p_ghost / (p_ghost + 2.0 * (1.0 - p_ghost))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BETA_C;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(h: f64) -> WeightedGraph {
        let mut g = WeightedGraph::new(1).unwrap();
        g.set_field(0, h).unwrap();
        g
    }

    /// Straight double loop over `2^n` states without Gray codes or shifts.
    fn brute_log_z(g: &WeightedGraph, beta: f64) -> f64 {
        let n = g.n_vertices();
        let free = g.free_vertices();
        let mut z = 0.0;
        for mask in 0u32..(1 << free.len()) {
            let mut s = vec![1.0f64; n];
            for (k, &v) in free.iter().enumerate() {
                s[v] = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
            }
            let mut lw = 0.0;
            for e in g.edges() {
                lw += beta * e.coupling * s[e.i] * s[e.j];
            }
            for &v in &free {
                lw += g.field(v) * s[v];
            }
            z += lw.exp();
        }
        z.ln()
    }

    #[test]
    fn log_partition_small_cases() {
        let h: f64 = 0.37;
        let lz = log_partition(&single(h), 1.0).unwrap();
        assert!((lz - (2.0 * h.cosh()).ln()).abs() < 1e-14);

        let b: f64 = 0.8;
        let mut two = WeightedGraph::new(2).unwrap();
        two.add_edge(0, 1, 1.0).unwrap();
        let want = (2.0 * b.exp() + 2.0 * (-b).exp()).ln();
        assert!((log_partition(&two, b).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn four_cycle_partition_function() {
        let mut g = WeightedGraph::new(4).unwrap();
        for i in 0..4 {
            g.add_edge(i, (i + 1) % 4, 1.0).unwrap();
        }
        let b = BETA_C;
        let brute = brute_log_z(&g, b);
        let closed = (2.0 * (4.0 * b).exp() + 12.0 + 2.0 * (-4.0 * b).exp()).ln();
        assert!((brute - closed).abs() < 1e-13);
        assert!((log_partition(&g, b).unwrap() - closed).abs() < 1e-13);
    }

    #[test]
    fn gray_code_matches_brute_force_with_frozen() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let g = WeightedGraph::random_ferromagnet(&mut rng);
            let a = log_partition(&g, 0.7).unwrap();
            let b = brute_log_z(&g, 0.7);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}\n{g}");
        }
    }

    #[test]
    fn single_spin_moments() {
        let h: f64 = 0.6;
        let t = h.tanh();
        let m = exact_moments(&single(h), 1.0).unwrap();
        assert!((m.mean_m - t).abs() < 1e-14);
        assert!((m.var_m - (1.0 - t * t)).abs() < 1e-14);
        assert!((m.kappa3 + 2.0 * t * (1.0 - t * t)).abs() < 1e-14);
        let lhs = ghs_lhs(&single(h), 1.0, 0, 0, 0).unwrap();
        assert!((lhs + 2.0 * t * (1.0 - t * t)).abs() < 1e-14);
    }

    #[test]
    fn zero_field_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut g = WeightedGraph::random_ferromagnet(&mut rng);
            g.frozen.iter_mut().for_each(|f| *f = false);
            g.fields.iter_mut().for_each(|f| *f = 0.0);
            let m = exact_moments(&g, 1.0).unwrap();
            assert!(m.mean_m.abs() < 1e-12);
            assert!(m.kappa3.abs() < 1e-12);
            assert!(ghs_lhs(&g, 1.0, 0, 1, 2).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn moments_match_finite_differences_on_plus_box() {
        let spec = LatticeSpec::square_box(1, Boundary::Plus);
        let g = WeightedGraph::from_lattice(&spec, 0.2).unwrap();
        let m = exact_moments(&g, BETA_C).unwrap();
        let f = |x: f64| log_partition(&g.shifted(x), BETA_C).unwrap();
        let d = 1e-4;
        let (fm1, f0, f1) = (f(-d), f(0.0), f(d));
        let d1 = (f1 - fm1) / (2.0 * d);
        let d2 = (f1 - 2.0 * f0 + fm1) / (d * d);
        assert!((m.mean_m - d1).abs() < 1e-6, "{} {}", m.mean_m, d1);
        assert!((m.var_m - d2).abs() < 1e-5 * m.var_m, "{} {}", m.var_m, d2);
        // third differences need a wider step to stay above rounding noise
        let d = 2e-3;
        let d3 = (f(2.0 * d) - 2.0 * f(d) + 2.0 * f(-d) - f(-2.0 * d)) / (2.0 * d * d * d);
        assert!(
            (m.kappa3 - d3).abs() < 1e-4 * m.kappa3.abs().max(1.0),
            "{} {}",
            m.kappa3,
            d3
        );
        assert!((m.log_z - f0).abs() < 1e-14);
    }

    #[test]
    fn two_point_checks() {
        let mut two = WeightedGraph::new(2).unwrap();
        two.add_edge(0, 1, 1.0).unwrap();
        let b: f64 = 0.9;
        assert!((exact_two_point(&two, b, 0, 1).unwrap() - b.tanh()).abs() < 1e-14);
        assert_eq!(exact_two_point(&two, b, 1, 1).unwrap(), 1.0);
    }

    #[test]
    fn two_point_equals_fk_connectivity_on_free_3x3() {
        // at h = 0, <σxσy> = P(x <-> y); computed here by bond enumeration
        let g = WeightedGraph::grid(3, 3, 0.0).unwrap();
        let (x, y) = (4, 8);
        let spin = exact_two_point(&g, BETA_C, x, y).unwrap();
        let p = bond_probability(BETA_C);
        let edges = g.edges().to_vec();
        let (mut total, mut hit) = (0.0, 0.0);
        for mask in 0u32..(1 << edges.len()) {
            let mut dsu = Dsu::new(9);
            let mut clusters = 9;
            let mut w = 1.0;
            for (k, e) in edges.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    w *= p;
                    clusters -= dsu.union(e.i, e.j) as usize;
                } else {
                    w *= 1.0 - p;
                }
            }
            w *= 2f64.powi(clusters as i32);
            total += w;
            if dsu.find(x) == dsu.find(y) {
                hit += w;
            }
        }
        assert!((spin - hit / total).abs() < 1e-10);
    }

    #[test]
    fn rc_single_vertex_is_tanh() {
        for h in [0.0, 0.1, 0.5, 2.0] {
            let g = single(0.0);
            let p = exact_rc_connectivity(&g, 1.0, h, 0).unwrap();
            let ph = bond_probability(h);
            assert!((p - h.tanh()).abs() < 1e-14);
            assert!((p - ph / (ph + 2.0 * (1.0 - ph))).abs() < 1e-14);
        }
    }

    #[test]
    fn rc_matches_spins_on_2x2() {
        let g = WeightedGraph::grid(2, 2, 0.0).unwrap();
        let spin = magnetizations(&g.shifted(0.5), BETA_C).unwrap()[0];
        let rc = exact_rc_connectivity(&g, BETA_C, 0.5, 0).unwrap();
        assert!((spin - rc).abs() < 1e-10);
    }

    #[test]
    fn rc_matches_spins_with_frozen_boundary() {
        let spec = LatticeSpec::square_box(1, Boundary::Plus);
        let g = WeightedGraph::from_lattice(&spec, 0.0).unwrap();
        let spin = magnetizations(&g, BETA_C).unwrap();
        for x in [0, 4] {
            let rc = exact_rc_connectivity(&g, BETA_C, 0.0, x).unwrap();
            assert!((spin[x] - rc).abs() < 1e-10, "{x}: {} vs {rc}", spin[x]);
        }
    }

    #[test]
    fn ghs_rejects_frozen() {
        let mut g = WeightedGraph::grid(2, 1, 0.1).unwrap();
        g.freeze(1).unwrap();
        assert!(matches!(
            ghs_lhs(&g, 1.0, 0, 1, 0),
            Err(Error::FrozenVertex(1))
        ));
    }

    #[test]
    fn enumeration_caps() {
        let g = WeightedGraph::grid(9, 3, 0.1).unwrap();
        assert!(matches!(
            log_partition(&g, 1.0),
            Err(Error::EnumerationCap { count: 27, .. })
        ));
        let g = WeightedGraph::grid(4, 4, 0.1).unwrap();
        assert!(matches!(
            exact_rc_connectivity(&g, 1.0, 0.0, 0),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn conditional_probabilities() {
        for c in [true, false] {
            assert_eq!(conditional_ghost_edge_prob(0.0, c), 0.0);
            assert_eq!(conditional_ghost_edge_prob(1.0, c), 1.0);
        }
        let p = bond_probability(0.1);
        let q = conditional_ghost_edge_prob(p, false);
        assert!((q - p / (p + 2.0 * (1.0 - p))).abs() < 1e-16);
        assert!(q >= 0.09);
    }

    #[test]
    fn conditional_probability_from_cluster_weights() {
        // vertex a with an open ghost bond, edge e = (a, b), and the ghost
        // bond of b whose conditional law we compute from raw weights.
        let p = 0.3;
        // b's ghost bond, given e closed: b isolated from ghost cluster
        // open: clusters {a,b?..}: with e closed, open ghost bond joins b → 1 cluster, closed → 2
        let open = p * 2f64.powi(1);
        let closed = (1.0 - p) * 2f64.powi(2);
        assert!((open / (open + closed) - conditional_ghost_edge_prob(p, false)).abs() < 1e-15);
        // given e open, b already connected to the ghost: cluster count unchanged
        let open = p * 2f64.powi(1);
        let closed = (1.0 - p) * 2f64.powi(1);
        assert!((open / (open + closed) - conditional_ghost_edge_prob(p, true)).abs() < 1e-15);
    }

    #[test]
    fn parse_graph_file() {
        let text = "# triangle\nvertex 0 h=0.5\nvertex 1 h=0\nvertex 2 frozen\n\
                    edge 0 1 J=1.5\nedge 1 2 J=0.25\nghost 1 p=0.5\n";
        let g: WeightedGraph = text.parse().unwrap();
        assert_eq!(g.n_vertices(), 3);
        assert!(g.is_frozen(2));
        assert!((g.field(1) - 0.5 * 2f64.ln()).abs() < 1e-15);
        let round: WeightedGraph = g.to_string().parse().unwrap();
        assert_eq!(round, g);
    }

    #[test]
    fn parse_rejects_negative_coupling() {
        let text = "vertex 0 h=0.1\nvertex 1 h=0.1\nedge 0 1 J=-1\n";
        match text.parse::<WeightedGraph>() {
            Err(Error::Parse { line: 3, msg }) => assert!(msg.contains("J >= 0")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            "vertex 0\nbogus 1\n".parse::<WeightedGraph>(),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn ghs_holds_on_random_graphs(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = WeightedGraph::random_ferromagnet(&mut rng);
                let free = g.free_vertices();
                for &i in &free {
                    for &j in &free {
                        for &k in &free {
                            prop_assert!(ghs_lhs(&g, 1.0, i, j, k).unwrap() <= 1e-10);
                        }
                    }
                }
                prop_assert!(exact_moments(&g, 1.0).unwrap().kappa3 <= 1e-10);
            }

            #[test]
            fn mean_magnetization_increases_with_field(seed in any::<u64>(), dh in 0.0f64..0.5) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = WeightedGraph::random_ferromagnet(&mut rng);
                let a = exact_moments(&g, 1.0).unwrap().mean_m;
                let b = exact_moments(&g.shifted(dh), 1.0).unwrap().mean_m;
                prop_assert!(b >= a - 1e-12);
            }
        }
    }
}

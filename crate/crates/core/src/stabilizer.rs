//! Binary symplectic stabilizer tableaus and the measured cluster state.
//!
//! Measuring every bulk qubit of a cluster state in `Y` (plaquette site) or
//! `Z` (single-site term) leaves the unmeasured edge in a stabilizer state
//! whose entanglement tracks the boundary symmetry entropy of the matching
//! X-shaped plaquette realization.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BitVec};
use crate::lattice::{Edge, Model, Realization, Topology};
use crate::symmetry::SymmetryTableau;

/// Hermitian Pauli string `(-1)^sign * prod_j P_j`, with `(x, z) = (1, 1)`
/// standing for `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Pauli {
    pub x: BitVec,
    pub z: BitVec,
    pub sign: bool,
}

impl Pauli {
    pub fn identity(n: usize) -> Self {
        Self {
            x: BitVec::zeros(n),
            z: BitVec::zeros(n),
            sign: false,
        }
    }

    pub fn single(n: usize, qubit: usize, op: char) -> Result<Self> {
        let mut p = Self::identity(n);
        match op {
            'X' => p.x.set(qubit, true),
            'Y' => {
                p.x.set(qubit, true);
                p.z.set(qubit, true);
            }
            'Z' => p.z.set(qubit, true),
            'I' => {}
            other => return Err(Error::Config(format!("not a Pauli operator: {other:?}"))),
        }
        Ok(p)
    }

    /// Parses strings such as `+XIZY` or `-ZZ`.
    pub fn parse(s: &str) -> Result<Self> {
        let (sign, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let n = body.chars().count();
        let mut p = Self::identity(n);
        for (k, ch) in body.chars().enumerate() {
            let q = Self::single(n, k, ch)?;
            p.x.xor_assign(&q.x);
            p.z.xor_assign(&q.z);
        }
        p.sign = sign;
        Ok(p)
    }

    pub fn n_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn weight(&self) -> usize {
        (0..self.n_qubits())
            .filter(|&q| self.x.get(q) || self.z.get(q))
            .count()
    }

    /// True if the two operators anticommute.
    pub fn anticommutes(&self, other: &Pauli) -> bool {
        self.x.dot(&other.z) ^ self.z.dot(&other.x)
    }

    /// In-place product `self <- self * other` for commuting operators,
    /// keeping track of the sign.
    pub fn mul_assign(&mut self, other: &Pauli) {
        // Phase exponent of i accumulated qubit by qubit.
        let mut phase: i32 = 0;
        for q in 0..self.n_qubits() {
            phase += phase_exponent(other.x.get(q), other.z.get(q), self.x.get(q), self.z.get(q));
        }
        let total = (2 * i32::from(self.sign) + 2 * i32::from(other.sign) + phase).rem_euclid(4);
        debug_assert!(total % 2 == 0, "product of anticommuting operators");
        self.sign = total == 2;
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
    }
}

impl std::fmt::Display for Pauli {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(if self.sign { "-" } else { "+" })?;
        for q in 0..self.n_qubits() {
            f.write_str(match (self.x.get(q), self.z.get(q)) {
                (false, false) => "I",
                (true, false) => "X",
                (true, true) => "Y",
                (false, true) => "Z",
            })?;
        }
        Ok(())
    }
}

/// Exponent of `i` picked up when the single-qubit Pauli `(x1, z1)` is
/// multiplied onto `(x2, z2)`.
fn phase_exponent(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x2, z2) = (i32::from(x2), i32::from(z2));
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    gens: Vec<Pauli>,
}

/// Edge conditions of a cluster-state patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Patch {
    Open,
    /// Periodic along the first (horizontal) direction.
    Cylinder,
    Torus,
}

impl StabilizerTableau {
    pub fn new(n: usize, gens: Vec<Pauli>) -> Result<Self> {
        if gens.iter().any(|g| g.n_qubits() != n) {
            return Err(Error::ShapeMismatch(
                "generator length differs from qubit count".into(),
            ));
        }
        Ok(Self { n, gens })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[Pauli] {
        &self.gens
    }

    /// Generators stacked as `[x | z]` rows.
    pub fn symplectic_matrix(&self) -> BinMatrix {
        let mut m = BinMatrix::zeros(self.gens.len(), 2 * self.n);
        for (r, g) in self.gens.iter().enumerate() {
            for q in g.x.ones() {
                m.set(r, q, true);
            }
            for q in g.z.ones() {
                m.set(r, self.n + q, true);
            }
        }
        m
    }

    pub fn rank(&self) -> usize {
        self.symplectic_matrix().rank()
    }

    pub fn is_abelian(&self) -> bool {
        self.gens
            .iter()
            .enumerate()
            .all(|(a, g)| self.gens[a + 1..].iter().all(|h| !g.anticommutes(h)))
    }

    /// Measures `obs`. If some generators anticommute with it, the first of
    /// them is replaced by `obs` with a random outcome sign and the others
    /// are multiplied by it; otherwise the state is unchanged.
    pub fn measure<R: Rng + ?Sized>(&mut self, obs: &Pauli, rng: &mut R) {
        let hits: Vec<usize> = (0..self.gens.len())
            .filter(|&k| self.gens[k].anticommutes(obs))
            .collect();
        let Some((&first, rest)) = hits.split_first() else {
            return;
        };
        let pivot = self.gens[first].clone();
        for &k in rest {
            self.gens[k].mul_assign(&pivot);
        }
        let mut o = obs.clone();
        o.sign = rng.random();
        self.gens[first] = o;
    }

    /// Entanglement entropy of `region` in bits, for a pure state.
    pub fn entanglement_entropy(&self, region: &[usize]) -> f64 {
        let mut inside = vec![false; self.n];
        for &q in region {
            inside[q] = true;
        }
        let rest: Vec<usize> = (0..self.n).filter(|&q| !inside[q]).collect();
        let m = self.symplectic_matrix();
        let proj_rank = |qs: &[usize]| {
            if qs.is_empty() {
                return 0;
            }
            let cols: Vec<usize> = qs
                .iter()
                .copied()
                .chain(qs.iter().map(|q| q + self.n))
                .collect();
            m.restrict_columns(&cols).rank()
        };
        let total = m.rank();
        0.5 * (proj_rank(region) + proj_rank(&rest)) as f64 - 0.5 * total as f64
    }
}

fn cluster_neighbors(lx: usize, ly: usize, patch: Patch, i: usize, j: usize) -> Vec<usize> {
    let wrap_x = matches!(patch, Patch::Cylinder | Patch::Torus);
    let wrap_y = patch == Patch::Torus;
    let mut out = Vec::with_capacity(4);
    let mut push = |a: Option<usize>, b: Option<usize>| {
        if let (Some(a), Some(b)) = (a, b) {
            let s = b * lx + a;
            if s != j * lx + i && !out.contains(&s) {
                out.push(s);
            }
        }
    };
    let step = |v: usize, len: usize, wrap: bool, up: bool| -> Option<usize> {
        match (up, wrap) {
            (true, _) if v + 1 < len => Some(v + 1),
            (true, true) => Some(0),
            (false, _) if v > 0 => Some(v - 1),
            (false, true) => Some(len - 1),
            _ => None,
        }
    };
    push(step(i, lx, wrap_x, false), Some(j));
    push(step(i, lx, wrap_x, true), Some(j));
    push(Some(i), step(j, ly, wrap_y, false));
    push(Some(i), step(j, ly, wrap_y, true));
    out
}

/// Cluster state on an `lx x ly` grid, qubit `(i, j)` at index `j*lx + i`:
/// one generator `X_s prod Z_nbr` per site.
pub fn build_cluster_state(lx: usize, ly: usize, patch: Patch) -> StabilizerTableau {
    let n = lx * ly;
    let gens = (0..n)
        .map(|s| {
            let (i, j) = (s % lx, s / lx);
            let mut g = Pauli::identity(n);
            g.x.set(s, true);
            for t in cluster_neighbors(lx, ly, patch, i, j) {
                g.z.set(t, true);
            }
            g
        })
        .collect();
    StabilizerTableau { n, gens }
}

/// `P[i][j] = 1` iff observable `i` anticommutes with generator `j`.
pub fn commutator_matrix(t: &StabilizerTableau, observables: &[Pauli]) -> Result<BinMatrix> {
    if observables.iter().any(|o| o.n_qubits() != t.n) {
        return Err(Error::ShapeMismatch(
            "observable length differs from qubit count".into(),
        ));
    }
    Ok(BinMatrix::from_fn(
        observables.len(),
        t.gens.len(),
        |i, j| observables[i].anticommutes(&t.gens[j]),
    ))
}

/// Measures the observables in order.
pub fn measure_all<R: Rng + ?Sized>(
    t: &StabilizerTableau,
    observables: &[Pauli],
    rng: &mut R,
) -> StabilizerTableau {
    let mut out = t.clone();
    for o in observables {
        out.measure(o, rng);
    }
    out
}

/// Post-measurement group built directly: the observables together with
/// every product of pre-measurement generators commuting with all of them,
/// i.e. one product per nullspace vector of the commutator matrix. Signs
/// are left positive.
pub fn induced_generators(
    t: &StabilizerTableau,
    observables: &[Pauli],
) -> Result<StabilizerTableau> {
    let p = commutator_matrix(t, observables)?;
    let null = p.nullspace();
    let mut gens: Vec<Pauli> = observables.to_vec();
    for k in 0..null.cols() {
        let mut g = Pauli::identity(t.n);
        for j in null.column(k).ones() {
            g.mul_assign(&t.gens[j]);
        }
        g.sign = false;
        gens.push(g);
    }
    for g in &mut gens {
        g.sign = false;
    }
    StabilizerTableau::new(t.n, gens)
}

/// Single-qubit observable per measured site of an X-shaped cylinder:
/// `Y` on plaquette sites and `Z` on single-site terms in the bulk layers,
/// plus `Z` on the bottom layer when that edge is fixed. Sites are listed in
/// ascending order, matching the rows of the parity-check matrix.
pub fn measurement_pattern(r: &Realization) -> Result<Vec<(usize, char)>> {
    let g = &r.geometry;
    if g.model != Model::Rxpm || g.topology != Topology::Cylinder || r.boundary.top != Edge::Free {
        return Err(Error::WrongTopology {
            expected: "X-shaped-model cylinder with a free top edge".into(),
            found: format!("{} {} (top {})", g.model, g.topology, r.boundary.top),
        });
    }
    let mut out = Vec::new();
    for s in 0..g.n_sites() {
        let tau = g.coords(s).1;
        if tau >= 1 && tau + 1 < g.height {
            out.push((s, if r.is_plaquette(s) { 'Y' } else { 'Z' }));
        } else if tau + 1 == g.height && r.boundary.bottom == Edge::Fixed {
            out.push((s, 'Z'));
        }
    }
    Ok(out)
}

/// Entropy comparison for one top-edge interval.
#[derive(Clone, Debug, Serialize)]
pub struct IntervalCheck {
    pub start: usize,
    pub len: usize,
    pub entanglement: f64,
    pub half_symmetry_entropy: f64,
    pub bound: usize,
}

impl IntervalCheck {
    pub fn deviation(&self) -> f64 {
        (self.entanglement - self.half_symmetry_entropy).abs()
    }

    pub fn holds(&self) -> bool {
        self.deviation() <= self.bound as f64
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub parity_matches: bool,
    pub intervals: Vec<IntervalCheck>,
}

impl EquivalenceReport {
    pub fn holds(&self) -> bool {
        self.parity_matches && self.intervals.iter().all(IntervalCheck::holds)
    }

    pub fn max_deviation(&self) -> f64 {
        self.intervals
            .iter()
            .map(IntervalCheck::deviation)
            .fold(0.0, f64::max)
    }
}

/// Endpoint count of the top-edge interval `[start, start + len)` on a ring
/// of `width` sites: 2 for a proper interval, 0 for the whole ring.
pub fn interval_endpoints(len: usize, width: usize) -> usize {
    if len == 0 || len == width {
        0
    } else {
        2
    }
}

/// Compares the measured cluster state with the symmetry group of the same
/// X-shaped realization on every contiguous top-edge interval.
pub fn check_equivalence<R: Rng + ?Sized>(
    r: &Realization,
    rng: &mut R,
) -> Result<EquivalenceReport> {
    let pattern = measurement_pattern(r)?;
    let g = &r.geometry;
    let n = g.n_sites();
    let cluster = build_cluster_state(g.width, g.height, Patch::Cylinder);
    let observables = pattern
        .iter()
        .map(|&(s, op)| Pauli::single(n, s, op))
        .collect::<Result<Vec<_>>>()?;
    let parity_matches = commutator_matrix(&cluster, &observables)? == r.parity_matrix();
    let post = measure_all(&cluster, &observables, rng);
    let group = SymmetryTableau::from_realization(r).boundary_group(&r.boundary_sites());

    let mut intervals = Vec::new();
    for start in 0..g.width {
        for len in 1..g.width {
            let top_row: Vec<usize> = (start..start + len)
                .map(|i| g.site(i % g.width, 0))
                .collect();
            let segment: Vec<usize> = g
                .top_layers()
                .into_iter()
                .flat_map(|t| (start..start + len).map(move |i| g.site(i % g.width, t)))
                .collect();
            intervals.push(IntervalCheck {
                start,
                len,
                entanglement: post.entanglement_entropy(&top_row),
                half_symmetry_entropy: 0.5 * group.sym_entropy(&segment)? as f64,
                bound: interval_endpoints(len, g.width),
            });
        }
    }
    Ok(EquivalenceReport {
        parity_matches,
        intervals,
    })
}

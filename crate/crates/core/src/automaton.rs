//! Layer-by-layer evolution of symmetry generators.
//!
//! On a cylinder every symmetry is fixed by its values on the free top edge
//! plus one fresh spin for every single-site term met by the X-shaped
//! model. Evolving the top-edge basis downwards therefore reproduces the
//! boundary group of the static lattice without solving the full parity
//! system.
//!
//! * Triangular model: `x'[i] = x[i] + x[i+1]` at plaquette sites and 0 at
//!   single-site terms (rule 18 when every site is a plaquette).
//! * X-shaped model: `x'[i] = x[i-1] + x[i] + x[i+1] + x_prev[i]` at
//!   plaquette sites. A single-site term at `(i, tau)` demands `x[i] = 0`
//!   and frees the spin at `(i, tau + 1)`.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BitVec};
use crate::lattice::{bernoulli, Edge, Geometry, Model, Realization, Topology};
use crate::symmetry::{BoundaryGroup, Snapshot};

const WORD_BITS: usize = 64;

#[inline]
fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
}

#[inline]
fn flip_bit(words: &mut [u64], i: usize) {
    words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
}

/// `dst[i] = src[(i + 1) mod width]`.
fn shift_next(src: &[u64], dst: &mut [u64], width: usize) {
    let n = src.len();
    for k in 0..n {
        dst[k] = (src[k] >> 1) | if k + 1 < n { src[k + 1] << 63 } else { 0 };
    }
    dst[(width - 1) / WORD_BITS] |= (src[0] & 1) << ((width - 1) % WORD_BITS);
}

/// `dst[i] = src[(i - 1) mod width]`.
fn shift_prev(src: &[u64], dst: &mut [u64], width: usize) {
    let n = src.len();
    for k in 0..n {
        dst[k] = (src[k] << 1) | if k > 0 { src[k - 1] >> 63 } else { 0 };
    }
    dst[n - 1] &= tail_mask(width);
    dst[0] |= u64::from(get_bit(src, width - 1));
}

/// One deterministic triangular-model step under plaquette mask `mask`.
pub fn triangular_step(x: &BitVec, mask: &BitVec) -> BitVec {
    let width = x.len();
    let mut next = vec![0u64; x.words().len()];
    shift_next(x.words(), &mut next, width);
    for ((n, a), m) in next.iter_mut().zip(x.words()).zip(mask.words()) {
        *n = (*n ^ a) & m;
    }
    BitVec::from_words(next, width)
}

/// One deterministic X-shaped-model step from layers `(prev, cur)` under
/// plaquette mask `mask`; returns the next layer.
pub fn x_step(prev: &BitVec, cur: &BitVec, mask: &BitVec) -> BitVec {
    let width = cur.len();
    let wl = cur.words().len();
    let mut left = vec![0u64; wl];
    let mut right = vec![0u64; wl];
    shift_prev(cur.words(), &mut left, width);
    shift_next(cur.words(), &mut right, width);
    let words = (0..wl)
        .map(|k| (prev.words()[k] ^ left[k] ^ cur.words()[k] ^ right[k]) & mask.words()[k])
        .collect();
    BitVec::from_words(words, width)
}

/// Inverse of an impurity-free X-shaped step: recovers the layer before
/// `cur` from `(cur, next)`.
pub fn x_unstep(cur: &BitVec, next: &BitVec) -> BitVec {
    let all = BitVec::from_indices(cur.len(), 0..cur.len());
    // x_prev = next + x[i-1] + x[i] + x[i+1], the same map with roles swapped.
    x_step(next, cur, &all)
}

/// Evolving generator set. Each generator carries its initial-edge bits,
/// the last one (triangular) or two (X-shaped) layers, and optionally its
/// whole space-time history.
#[derive(Clone, Debug)]
pub struct CaState {
    model: Model,
    width: usize,
    layer: usize,
    wl: usize,
    init_bits: usize,
    wi: usize,
    cur_off: usize,
    key_words: usize,
    history: Option<usize>,
    gens: Vec<Vec<u64>>,
    bulk: Vec<Vec<u64>>,
    impurities: Vec<(usize, usize)>,
    last_removed: usize,
    dimension: usize,
}

impl CaState {
    /// Starts from the free top edge: one generator per edge spin. With
    /// `history = Some(height)` every generator also records its support on
    /// a `width x height` lattice.
    pub fn new(model: Model, width: usize, history: Option<usize>) -> Self {
        let wl = width.div_ceil(WORD_BITS);
        let depth = model.edge_depth();
        let init_bits = depth * width;
        let wi = init_bits.div_ceil(WORD_BITS);
        let prev_words = if model == Model::Rxpm { wl } else { 0 };
        let cur_off = wi + prev_words;
        let key_words = cur_off + wl;
        let hist_words = history.map_or(0, |h| (h * width).div_ceil(WORD_BITS));
        let mut gens = Vec::with_capacity(init_bits);
        for k in 0..init_bits {
            let mut g = vec![0u64; key_words + hist_words];
            flip_bit(&mut g, k);
            let (layer, i) = (k / width, k % width);
            let off = if layer + 1 == depth { cur_off } else { wi };
            flip_bit(&mut g[off..], i);
            if history.is_some() {
                flip_bit(&mut g[key_words..], k);
            }
            gens.push(g);
        }
        Self {
            model,
            width,
            layer: depth - 1,
            wl,
            init_bits,
            wi,
            cur_off,
            key_words,
            history,
            gens,
            bulk: Vec::new(),
            impurities: Vec::new(),
            last_removed: 0,
            dimension: init_bits,
        }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Index of the most recent layer.
    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn n_generators(&self) -> usize {
        self.gens.len()
    }

    /// Single-site terms consumed so far, as `(column, layer)`.
    pub fn impurities(&self) -> &[(usize, usize)] {
        &self.impurities
    }

    /// Log2 of the order of the full symmetry group of the lattice built
    /// so far, bulk generators included.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Generators removed by impurity constraints during the last step.
    pub fn last_removed(&self) -> usize {
        self.last_removed
    }

    fn section(&self, g: &[u64], off: usize) -> BitVec {
        BitVec::from_words(g[off..off + self.wl].to_vec(), self.width)
    }

    /// Current layer of every generator.
    pub fn current_layers(&self) -> Vec<BitVec> {
        self.gens
            .iter()
            .map(|g| self.section(g, self.cur_off))
            .collect()
    }

    /// Previous layer of every generator (X-shaped model only).
    pub fn previous_layers(&self) -> Vec<BitVec> {
        assert_eq!(
            self.model,
            Model::Rxpm,
            "only the X-shaped model keeps two layers"
        );
        self.gens.iter().map(|g| self.section(g, self.wi)).collect()
    }

    /// Initial-edge bits of every generator.
    pub fn initial_bits(&self) -> Vec<BitVec> {
        self.gens
            .iter()
            .map(|g| BitVec::from_words(g[..self.wi].to_vec(), self.init_bits))
            .collect()
    }

    /// Advances every generator by one layer under the plaquette mask of
    /// the governing layer: the new layer for the triangular model, the
    /// current layer for the X-shaped one.
    pub fn step_with_mask(&mut self, mask: &BitVec) {
        assert_eq!(mask.len(), self.width, "mask width mismatch");
        self.last_removed = 0;
        match self.model {
            Model::Rtpm => self.step_triangular(mask),
            Model::Rxpm => self.step_x(mask),
        }
        self.layer += 1;
        if self.gens.len() > self.key_bits() {
            self.compact();
        }
    }

    fn key_bits(&self) -> usize {
        self.init_bits + self.width * self.model.edge_depth()
    }

    fn record(&self, g: &mut [u64], layer: usize) {
        let Some(h) = self.history else { return };
        assert!(layer < h, "history height {h} exceeded");
        let (key, hist) = g.split_at_mut(self.key_words);
        let cur = &key[self.cur_off..self.cur_off + self.wl];
        for i in 0..self.width {
            if get_bit(cur, i) {
                flip_bit(hist, layer * self.width + i);
            }
        }
    }

    fn step_triangular(&mut self, mask: &BitVec) {
        let (off, wl, width) = (self.cur_off, self.wl, self.width);
        let mut next = vec![0u64; wl];
        let new_layer = self.layer + 1;
        let mut gens = std::mem::take(&mut self.gens);
        for g in &mut gens {
            let cur = &mut g[off..off + wl];
            shift_next(cur, &mut next, width);
            for k in 0..wl {
                cur[k] = (cur[k] ^ next[k]) & mask.words()[k];
            }
            self.record(g, new_layer);
        }
        self.gens = gens;
    }

    fn step_x(&mut self, mask: &BitVec) {
        let (prev_off, off, wl, width) = (self.wi, self.cur_off, self.wl, self.width);
        let tau = self.layer;
        let impurities: Vec<usize> = (0..width).filter(|&i| !mask.get(i)).collect();
        for &i in &impurities {
            let violating: Vec<usize> = (0..self.gens.len())
                .filter(|&k| get_bit(&self.gens[k][off..], i))
                .collect();
            if let Some((&first, rest)) = violating.split_first() {
                let pivot = self.gens[first].clone();
                for &k in rest {
                    for (a, b) in self.gens[k].iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
                self.gens.remove(first);
                self.last_removed += 1;
                self.dimension -= 1;
            }
            self.impurities.push((i, tau));
        }
        let mut left = vec![0u64; wl];
        let mut right = vec![0u64; wl];
        let mut gens = std::mem::take(&mut self.gens);
        for g in &mut gens {
            shift_prev(&g[off..off + wl], &mut left, width);
            shift_next(&g[off..off + wl], &mut right, width);
            for k in 0..wl {
                let cur = g[off + k];
                let next = (g[prev_off + k] ^ left[k] ^ cur ^ right[k]) & mask.words()[k];
                g[prev_off + k] = cur;
                g[off + k] = next;
            }
            self.record(g, tau + 1);
        }
        let hist_words = self.history.map_or(0, |h| (h * width).div_ceil(WORD_BITS));
        self.dimension += impurities.len();
        for &i in &impurities {
            let mut g = vec![0u64; self.key_words + hist_words];
            flip_bit(&mut g[off..], i);
            self.record(&mut g, tau + 1);
            gens.push(g);
        }
        self.gens = gens;
    }

    /// Row-reduces the generators on their key bits and discards the ones
    /// that vanished on both the initial edge and the live layers. Those
    /// can never revive; with history on they are kept as bulk generators.
    pub fn compact(&mut self) {
        let kw = self.key_words;
        let mut rank = 0;
        for word in 0..kw {
            for bit in 0..WORD_BITS {
                if rank == self.gens.len() {
                    break;
                }
                let mask = 1u64 << bit;
                let Some(p) = (rank..self.gens.len()).find(|&r| self.gens[r][word] & mask != 0)
                else {
                    continue;
                };
                self.gens.swap(rank, p);
                let (head, tail) = self.gens.split_at_mut(rank + 1);
                let pivot = &head[rank];
                for g in tail.iter_mut() {
                    if g[word] & mask != 0 {
                        for (a, b) in g.iter_mut().zip(pivot) {
                            *a ^= b;
                        }
                    }
                }
                rank += 1;
            }
        }
        let dead = self.gens.split_off(rank);
        if self.history.is_some() {
            self.bulk
                .extend(dead.into_iter().filter(|g| g[kw..].iter().any(|&w| w != 0)));
        }
    }

    /// Independent generators as `(T0 | T_final)`: initial-edge bits and
    /// the final one or two layers.
    pub fn tableau(&mut self, geometry: Geometry) -> DynamicBoundaryTableau {
        self.compact();
        let n = self.gens.len();
        let final_layers = self.model.edge_depth();
        let mut t0 = BinMatrix::zeros(n, self.init_bits);
        let mut tt = BinMatrix::zeros(n, final_layers * self.width);
        for (r, g) in self.gens.iter().enumerate() {
            for c in 0..self.init_bits {
                if get_bit(g, c) {
                    t0.set(r, c, true);
                }
            }
            let layers: &[usize] = if final_layers == 2 {
                &[self.wi, self.cur_off]
            } else {
                &[self.cur_off]
            };
            for (l, &off) in layers.iter().enumerate() {
                for i in 0..self.width {
                    if get_bit(&g[off..], i) {
                        tt.set(r, l * self.width + i, true);
                    }
                }
            }
        }
        DynamicBoundaryTableau {
            geometry,
            t0,
            t_final: tt,
            group_dim: self.dimension,
        }
    }

    /// Histories of the live generators and of the discarded bulk ones.
    fn histories(&self) -> (Vec<&[u64]>, Vec<&[u64]>) {
        let kw = self.key_words;
        (
            self.gens.iter().map(|g| &g[kw..]).collect(),
            self.bulk.iter().map(|g| &g[kw..]).collect(),
        )
    }
}

fn sample_mask<R: RngCore + ?Sized>(width: usize, p: f64, rng: &mut R) -> BitVec {
    BitVec::from_indices(width, (0..width).filter(|_| bernoulli(rng.next_u64(), p)))
}

/// Samples a fresh disorder layer (plaquette with probability `p3`) and
/// advances a triangular-model state through it.
pub fn pca_step_rtpm<R: Rng + ?Sized>(state: &mut CaState, p3: f64, rng: &mut R) -> BitVec {
    assert_eq!(
        state.model(),
        Model::Rtpm,
        "triangular-model state expected"
    );
    let mask = sample_mask(state.width(), p3, rng);
    state.step_with_mask(&mask);
    mask
}

/// Samples a fresh disorder layer (plaquette with probability `p5`) and
/// advances an X-shaped-model state through it, impurities included.
pub fn cawri_step_rxpm<R: Rng + ?Sized>(state: &mut CaState, p5: f64, rng: &mut R) -> BitVec {
    assert_eq!(state.model(), Model::Rxpm, "X-shaped-model state expected");
    let mask = sample_mask(state.width(), p5, rng);
    state.step_with_mask(&mask);
    mask
}

/// Boundary group of a cylinder obtained from the dynamics: one row per
/// generator, columns split into the initial edge and the final layer(s).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicBoundaryTableau {
    pub geometry: Geometry,
    pub t0: BinMatrix,
    pub t_final: BinMatrix,
    /// Log2 of the full group order with a free bottom edge.
    pub group_dim: usize,
}

impl DynamicBoundaryTableau {
    pub fn combined(&self) -> BinMatrix {
        self.t0.hstack(&self.t_final).expect("equal row counts")
    }

    /// Initial-edge parts of the generators that vanish on the outermost
    /// final layer.
    pub fn apply_fixed_boundary(&self) -> BinMatrix {
        let width = self.geometry.width;
        let n0 = self.t0.cols();
        let total = n0 + self.t_final.cols();
        let targets: Vec<usize> = (total - width..total).collect();
        let (kept, _) = self.combined().zero_block_reduce(&targets);
        kept.restrict_columns(&(0..n0).collect::<Vec<_>>())
    }

    /// Boundary group for a free top edge and the given bottom edge.
    pub fn boundary_group(&self, bottom: Edge) -> BoundaryGroup {
        let g = &self.geometry;
        match bottom {
            Edge::Fixed => BoundaryGroup::new(g.top_sites(), self.apply_fixed_boundary()),
            Edge::Free => {
                let mut sites = g.top_sites();
                sites.extend(g.bottom_sites());
                let mut seen = std::collections::HashSet::new();
                let keep: Vec<usize> = (0..sites.len())
                    .filter(|&k| seen.insert(sites[k]))
                    .collect();
                let sites = keep.iter().map(|&k| sites[k]).collect();
                BoundaryGroup::new(sites, self.combined().restrict_columns(&keep))
            }
        }
    }

    /// Log2 of the ground-state degeneracy for the given bottom edge.
    pub fn config_entropy(&self, bottom: Edge) -> usize {
        match bottom {
            Edge::Free => self.group_dim,
            Edge::Fixed => {
                let n = self.t_final.cols();
                let w = self.geometry.width;
                self.group_dim
                    - self
                        .t_final
                        .restrict_columns(&(n - w..n).collect::<Vec<_>>())
                        .rank()
            }
        }
    }

    /// `rank T0 + rank T_final - rank (T0 | T_final)`.
    pub fn top_bottom_mutual_info(&self) -> Result<usize> {
        let g = &self.geometry;
        if g.height < 2 * g.model.edge_depth() {
            return Err(Error::InvalidGeometry(format!(
                "height {} leaves no gap between the edges",
                g.height
            )));
        }
        Ok(self.t0.rank() + self.t_final.rank() - self.combined().rank())
    }
}

fn check_dynamics_input(r: &Realization) -> Result<()> {
    if r.geometry.topology != Topology::Cylinder {
        return Err(Error::WrongTopology {
            expected: "cylinder".into(),
            found: r.geometry.topology.to_string(),
        });
    }
    if r.boundary.top != Edge::Free {
        return Err(Error::WrongTopology {
            expected: "free top edge".into(),
            found: "fixed top edge".into(),
        });
    }
    Ok(())
}

fn layer_mask(r: &Realization, tau: usize) -> BitVec {
    let g = &r.geometry;
    BitVec::from_indices(
        g.width,
        (0..g.width).filter(|&i| r.is_plaquette(g.site(i, tau))),
    )
}

/// Masks governing each step, in order.
fn step_layers(g: &Geometry) -> std::ops::Range<usize> {
    match g.model {
        Model::Rtpm => 1..g.height,
        Model::Rxpm => 1..g.height - 1,
    }
}

fn evolve(r: &Realization, history: bool) -> Result<CaState> {
    check_dynamics_input(r)?;
    let g = &r.geometry;
    let mut state = CaState::new(g.model, g.width, history.then_some(g.height));
    for tau in step_layers(g) {
        state.step_with_mask(&layer_mask(r, tau));
    }
    Ok(state)
}

/// Evolves the top-edge generators of a cylinder realization down to the
/// bottom edge.
pub fn run_dynamics(r: &Realization) -> Result<DynamicBoundaryTableau> {
    Ok(evolve(r, false)?.tableau(r.geometry))
}

/// As [`run_dynamics`], also returning a space-time snapshot with one
/// sampled boundary generator drawn from `rng`.
pub fn run_dynamics_with_snapshot<R: Rng + ?Sized>(
    r: &Realization,
    rng: &mut R,
) -> Result<(DynamicBoundaryTableau, Snapshot)> {
    let mut state = evolve(r, true)?;
    let tableau = state.tableau(r.geometry);
    let g = &r.geometry;
    let n = g.n_sites();
    let key = tableau.combined();
    let kc = key.cols();
    let (live, bulk) = state.histories();
    let mut m = BinMatrix::zeros(live.len() + bulk.len(), kc + n);
    for r_ in 0..key.rows() {
        for c in 0..kc {
            if key.get(r_, c) {
                m.set(r_, c, true);
            }
        }
    }
    for (k, h) in live.iter().chain(&bulk).enumerate() {
        for s in 0..n {
            if get_bit(h, s) {
                m.set(k, kc + s, true);
            }
        }
    }
    let (touching, rest) = match r.boundary.bottom {
        Edge::Free => m.block_split(&(0..kc).collect::<Vec<_>>()),
        Edge::Fixed => {
            let outer: Vec<usize> = (kc - g.width..kc).collect();
            let (_, allowed) = m.block_split(&outer);
            allowed.block_split(&(0..tableau.t0.cols()).collect::<Vec<_>>())
        }
    };
    let site_cols: Vec<usize> = (kc..kc + n).collect();
    let touching = touching.restrict_columns(&site_cols);
    let rest = rest.restrict_columns(&site_cols);
    let sample = touching.transpose().random_combination(rng, true).ok();
    let snapshot = Snapshot::from_parts(
        g.width,
        g.height,
        sample.as_ref(),
        (0..rest.rows()).map(|k| rest.row(k)),
        (0..touching.rows()).map(|k| touching.row(k)),
    );
    Ok((tableau, snapshot))
}

/// State of the evolution after one step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerStat {
    pub layer: usize,
    /// Independent operators alive on the last one or two layers.
    pub live_rank: usize,
    /// Operators connecting the top edge to the current layer.
    pub connected: usize,
    pub dimension: usize,
    pub impurities: usize,
}

/// Runs the dynamics of a cylinder realization and records a
/// [`LayerStat`] after every step.
pub fn layer_profile(r: &Realization) -> Result<Vec<LayerStat>> {
    check_dynamics_input(r)?;
    let g = &r.geometry;
    let mut state = CaState::new(g.model, g.width, None);
    let mut out = Vec::new();
    for tau in step_layers(g) {
        state.step_with_mask(&layer_mask(r, tau));
        let t = state.tableau(*g);
        let live_rank = t.t_final.rank();
        out.push(LayerStat {
            layer: state.layer(),
            live_rank,
            connected: t.t0.rank() + live_rank - t.combined().rank(),
            dimension: state.dimension(),
            impurities: state.impurities().len(),
        });
    }
    Ok(out)
}

/// Configuration entropy of a triangular-model torus by transfer: the
/// ground states are the fixed points of the full-period layer map `A`, so
/// the entropy is `L - rank(A + I)`.
pub fn rtpm_torus_config_entropy(r: &Realization) -> Result<usize> {
    let g = &r.geometry;
    if g.model != Model::Rtpm || g.topology != Topology::Torus {
        return Err(Error::WrongTopology {
            expected: "triangular-model torus".into(),
            found: format!("{} {}", g.model, g.topology),
        });
    }
    let masks: Vec<BitVec> = (1..g.height).chain([0]).map(|t| layer_mask(r, t)).collect();
    let mut rows: Vec<BitVec> = (0..g.width)
        .map(|i| BitVec::from_indices(g.width, [i]))
        .collect();
    for mask in &masks {
        for x in rows.iter_mut() {
            *x = triangular_step(x, mask);
        }
    }
    for (i, x) in rows.iter_mut().enumerate() {
        x.flip(i);
    }
    Ok(g.width - BinMatrix::from_rows(g.width, &rows).rank())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::symmetry::SymmetryTableau;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> BitVec {
        BitVec::from_indices(n, (0..n).filter(|_| rng.random()))
    }

    #[test]
    fn shifts_wrap_around() {
        for width in [3, 5, 64, 65, 130] {
            let x = BitVec::from_indices(width, [0, width - 1]);
            let mut next = vec![0u64; x.words().len()];
            shift_next(x.words(), &mut next, width);
            let y = BitVec::from_words(next, width);
            assert_eq!(y.ones().collect::<Vec<_>>(), vec![width - 2, width - 1]);
            let mut prev = vec![0u64; x.words().len()];
            shift_prev(x.words(), &mut prev, width);
            let z = BitVec::from_words(prev, width);
            assert_eq!(z.ones().collect::<Vec<_>>(), vec![0, 1]);
        }
    }

    #[test]
    fn sierpinski_from_single_seed() {
        let width = 200;
        let all = BitVec::from_indices(width, 0..width);
        let mut x = BitVec::from_indices(width, [100]);
        for tau in 1..=64u32 {
            x = triangular_step(&x, &all);
            assert_eq!(x.count_ones(), 1 << tau.count_ones());
            for i in 0..width {
                let k = 100usize.wrapping_sub(i);
                let expected = k <= tau as usize && (k & tau as usize) == k;
                assert_eq!(x.get(i), expected, "tau {tau} site {i}");
            }
        }
    }

    #[test]
    fn p_zero_kills_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = CaState::new(Model::Rtpm, 9, None);
        pca_step_rtpm(&mut s, 0.0, &mut rng);
        assert!(s.current_layers().iter().all(|x| x.is_zero()));
    }

    #[test]
    fn adjacent_seeds_superpose() {
        let all = BitVec::from_indices(40, 0..40);
        let mut a = BitVec::from_indices(40, [10]);
        let mut b = BitVec::from_indices(40, [11]);
        let mut ab = BitVec::from_indices(40, [10, 11]);
        for _ in 0..20 {
            a = triangular_step(&a, &all);
            b = triangular_step(&b, &all);
            ab = triangular_step(&ab, &all);
            let mut sum = a.clone();
            sum.xor_assign(&b);
            assert_eq!(ab, sum);
        }
    }

    #[test]
    fn x_step_is_reversible_without_impurities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &width in &[3, 7, 64, 65] {
            let all = BitVec::from_indices(width, 0..width);
            let (p0, c0) = (random_bits(&mut rng, width), random_bits(&mut rng, width));
            let (mut p, mut c) = (p0.clone(), c0.clone());
            for _ in 0..30 {
                let n = x_step(&p, &c, &all);
                p = c;
                c = n;
            }
            for _ in 0..30 {
                let before = x_unstep(&p, &c);
                c = p;
                p = before;
            }
            assert_eq!((p, c), (p0, c0));
        }
    }

    #[test]
    fn impurity_removals_are_counted() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = CaState::new(Model::Rxpm, 8, None);
        for _ in 0..12 {
            let before = s.n_generators();
            let mask = cawri_step_rxpm(&mut s, 0.6, &mut rng);
            let fresh = 8 - mask.count_ones();
            // Compaction may only shrink the count further.
            assert!(s.n_generators() <= before + fresh - s.last_removed());
        }
    }

    #[test]
    fn impurity_on_satisfied_generators_changes_nothing() {
        // Only layer 0 bits set: current layer is all zero, so an impurity
        // everywhere removes nothing and injects fresh spins.
        let mut s = CaState::new(Model::Rxpm, 5, None);
        s.gens.retain(|g| get_bit(g, 0) || get_bit(g, 1));
        let before = s.n_generators();
        s.step_with_mask(&BitVec::zeros(5));
        assert_eq!(s.last_removed(), 0);
        assert_eq!(s.n_generators(), before + 5);
    }

    fn static_boundary(r: &Realization) -> BoundaryGroup {
        SymmetryTableau::from_realization(r).boundary_group(&r.boundary_sites())
    }

    #[test]
    fn dynamics_matches_static_solver() {
        for (model, seed) in [(Model::Rtpm, 1u64), (Model::Rxpm, 2), (Model::Rxpm, 3)] {
            for bc in [Boundary::FREE, Boundary::FIXED_BOTTOM] {
                for p in [0.0, 0.4, 0.75, 1.0] {
                    let g = Geometry::cylinder(model, 6, 6).unwrap();
                    let r = Realization::sample(g, bc, p, seed).unwrap();
                    let dt = run_dynamics(&r).unwrap();
                    assert_eq!(
                        dt.config_entropy(bc.bottom),
                        SymmetryTableau::from_realization(&r).config_entropy()
                    );
                    let dynamic = dt.boundary_group(bc.bottom);
                    let stat = static_boundary(&r);
                    assert_eq!(dynamic.log_size(), stat.log_size(), "{model} {bc:?} {p}");
                    for start in 0..6 {
                        for len in 1..6 {
                            let seg: Vec<usize> = g
                                .top_layers()
                                .into_iter()
                                .flat_map(|t| (start..start + len).map(move |i| g.site(i % 6, t)))
                                .collect();
                            assert_eq!(
                                dynamic.sym_entropy(&seg).unwrap(),
                                stat.sym_entropy(&seg).unwrap()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn torus_transfer_matches_static() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let l = rng.random_range(2..9);
            let h = rng.random_range(2..12);
            let p = rng.random();
            let g = Geometry::torus(Model::Rtpm, l, h).unwrap();
            let r = Realization::sample(g, Boundary::FREE, p, rng.random()).unwrap();
            assert_eq!(
                rtpm_torus_config_entropy(&r).unwrap(),
                SymmetryTableau::from_realization(&r).config_entropy()
            );
        }
    }

    #[test]
    fn fixed_boundary_edge_cases() {
        let g = Geometry::cylinder(Model::Rtpm, 4, 2).unwrap();
        let zero = DynamicBoundaryTableau {
            geometry: g,
            t0: BinMatrix::identity(4),
            t_final: BinMatrix::zeros(4, 4),
            group_dim: 4,
        };
        assert_eq!(zero.apply_fixed_boundary().rank(), 4);
        let full = DynamicBoundaryTableau {
            geometry: g,
            t0: BinMatrix::identity(4),
            t_final: BinMatrix::identity(4),
            group_dim: 4,
        };
        assert_eq!(full.apply_fixed_boundary().rank(), 0);
    }

    #[test]
    fn p_zero_dynamics() {
        let g = Geometry::cylinder(Model::Rxpm, 5, 6).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 0.0, 0).unwrap();
        let t = run_dynamics(&r).unwrap();
        // Only the spins freed on the last layer survive there.
        assert_eq!(t.t_final.rank(), 5);
        assert_eq!(t.top_bottom_mutual_info().unwrap(), 0);
    }

    #[test]
    fn snapshot_from_dynamics() {
        let g = Geometry::cylinder(Model::Rxpm, 8, 10).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 0.8, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (t, snap) = run_dynamics_with_snapshot(&r, &mut rng).unwrap();
        assert_eq!(t, run_dynamics(&r).unwrap());
        let text = snap.to_string();
        assert_eq!(text.lines().count(), 10);
        assert!(text.contains('B'));
    }

    #[test]
    fn layer_profile_ends_at_the_tableau() {
        for model in [Model::Rtpm, Model::Rxpm] {
            let g = Geometry::cylinder(model, 8, 9).unwrap();
            let r = Realization::sample(g, Boundary::FREE, 0.8, 4).unwrap();
            let profile = layer_profile(&r).unwrap();
            let last = profile.last().unwrap();
            assert_eq!(last.layer, 8);
            let t = run_dynamics(&r).unwrap();
            assert_eq!(last.connected, t.top_bottom_mutual_info().unwrap());
            assert_eq!(last.dimension, t.group_dim);
            assert!(profile.windows(2).all(|w| w[1].impurities >= w[0].impurities));
        }
    }
}

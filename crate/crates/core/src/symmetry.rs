//! Spin-flip symmetry groups and the rank-based entropies built on them.
//!
//! Every quantity here is an exact integer number of bits: a difference of
//! GF(2) ranks of sub-tableaus.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::{BinMatrix, BitVec, IncrementalBasis};
use crate::lattice::{Edge, Geometry, Realization, Topology};

/// Basis of the ground-state symmetry group: an `N x M` matrix whose
/// columns are independent spin-flip generators and whose rows are sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryTableau {
    t: BinMatrix,
}

impl SymmetryTableau {
    /// Solves `P x = 0` for the parity-check matrix `p`.
    pub fn solve(p: &BinMatrix) -> Self {
        Self { t: p.nullspace() }
    }

    pub fn from_realization(r: &Realization) -> Self {
        Self::solve(&r.parity_matrix())
    }

    pub fn from_matrix(t: BinMatrix) -> Self {
        Self { t }
    }

    pub fn matrix(&self) -> &BinMatrix {
        &self.t
    }

    pub fn n_sites(&self) -> usize {
        self.t.rows()
    }

    pub fn n_generators(&self) -> usize {
        self.t.cols()
    }

    /// Log2 of the ground-state degeneracy.
    pub fn config_entropy(&self) -> usize {
        self.t.cols()
    }

    /// Rank of the generators restricted to `sites`.
    pub fn region_rank(&self, sites: &[usize]) -> usize {
        if sites.is_empty() {
            return 0;
        }
        self.t.select_rows(sites).rank()
    }

    fn complement(&self, sites: &[usize]) -> Vec<usize> {
        let mut inside = vec![false; self.n_sites()];
        for &s in sites {
            inside[s] = true;
        }
        (0..self.n_sites()).filter(|&s| !inside[s]).collect()
    }

    /// Number of generators irreducibly shared by `a` and its complement.
    pub fn sym_entropy(&self, a: &[usize]) -> usize {
        let b = self.complement(a);
        self.region_rank(a) + self.region_rank(&b) - self.config_entropy()
    }

    /// Number of generators with support on both `a` and `b`, conditioned
    /// on the rest of the lattice.
    pub fn sym_mutual_info_cond(&self, a: &[usize], b: &[usize]) -> Result<usize> {
        let ab = disjoint_union(a, b, self.n_sites())?;
        Ok(self.region_rank(a) + self.region_rank(b) - self.region_rank(&ab))
    }

    /// Boundary quotient group: the generators projected onto `sites`.
    pub fn boundary_group(&self, sites: &[usize]) -> BoundaryGroup {
        BoundaryGroup::new(sites.to_vec(), self.t.select_rows(sites).transpose())
    }

    /// Mean Hamming weight of uniformly drawn non-identity group elements,
    /// as a fraction of the site count.
    pub fn operator_size<R: Rng + ?Sized>(&self, rng: &mut R, n_samples: usize) -> Result<f64> {
        if n_samples == 0 {
            return Err(Error::Config(
                "operator size needs at least one sample".into(),
            ));
        }
        let mut total = 0usize;
        for _ in 0..n_samples {
            total += self.t.random_combination(rng, true)?.count_ones();
        }
        Ok(total as f64 / (n_samples * self.n_sites()) as f64)
    }
}

fn disjoint_union(a: &[usize], b: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut seen = vec![false; n];
    for &s in a {
        seen[s] = true;
    }
    for &s in b {
        if seen[s] {
            return Err(Error::OverlappingRegions { site: s });
        }
    }
    Ok(a.iter().chain(b).copied().collect())
}

/// Generators of a boundary group, oriented with one row per generator and
/// one column per boundary site. `sites[k]` is the lattice site of column
/// `k`. Rows may be redundant; all quantities are ranks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryGroup {
    sites: Vec<usize>,
    gens: BinMatrix,
    column_of: std::collections::HashMap<usize, usize>,
}

impl BoundaryGroup {
    pub fn new(sites: Vec<usize>, gens: BinMatrix) -> Self {
        assert_eq!(sites.len(), gens.cols(), "one column per boundary site");
        let column_of = sites.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        Self {
            sites,
            gens,
            column_of,
        }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn generators(&self) -> &BinMatrix {
        &self.gens
    }

    /// Log2 of the group order.
    pub fn log_size(&self) -> usize {
        self.gens.rank()
    }

    fn columns(&self, region: &[usize]) -> Result<Vec<usize>> {
        region
            .iter()
            .map(|s| {
                self.column_of
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::InvalidRegion {
                        name: format!("site {s}"),
                        reason: "not a boundary site".into(),
                    })
            })
            .collect()
    }

    pub fn rank_on(&self, region: &[usize]) -> Result<usize> {
        let cols = self.columns(region)?;
        Ok(if cols.is_empty() {
            0
        } else {
            self.gens.restrict_columns(&cols).rank()
        })
    }

    fn complement(&self, region: &[usize]) -> Result<Vec<usize>> {
        let cols = self.columns(region)?;
        let mut inside = vec![false; self.sites.len()];
        for c in cols {
            inside[c] = true;
        }
        Ok((0..self.sites.len())
            .filter(|&k| !inside[k])
            .map(|k| self.sites[k])
            .collect())
    }

    /// Boundary symmetry entropy of `a` against the rest of the boundary.
    pub fn sym_entropy(&self, a: &[usize]) -> Result<usize> {
        let b = self.complement(a)?;
        Ok(self.rank_on(a)? + self.rank_on(&b)? - self.log_size())
    }

    /// Boundary mutual information `S(A) + S(B) - S(AB)` of two disjoint
    /// boundary regions.
    pub fn mutual_info(&self, a: &[usize], b: &[usize]) -> Result<usize> {
        let n = self.sites.iter().max().map_or(0, |m| m + 1);
        let ab = disjoint_union(a, b, n)?;
        Ok(self.sym_entropy(a)? + self.sym_entropy(b)? - self.sym_entropy(&ab)?)
    }

    /// `rank(top) + rank(bottom) - rank(all)`: generators connecting two
    /// disjoint parts of the boundary.
    pub fn rank_mutual_info(&self, a: &[usize], b: &[usize]) -> Result<usize> {
        let n = self.sites.iter().max().map_or(0, |m| m + 1);
        let ab = disjoint_union(a, b, n)?;
        Ok(self.rank_on(a)? + self.rank_on(b)? - self.rank_on(&ab)?)
    }
}

/// Sites of a boundary group split into a ring of columns (the top edge)
/// and everything else.
pub struct Ring<'a> {
    group: &'a BoundaryGroup,
    columns: Vec<BitVec>,
    ring: Vec<Vec<usize>>,
    rest: Vec<usize>,
    total: usize,
}

impl<'a> Ring<'a> {
    /// `ring[i]` lists the boundary sites at ring position `i`; all other
    /// boundary sites form the fixed remainder.
    pub fn new(group: &'a BoundaryGroup, ring: Vec<Vec<usize>>) -> Result<Self> {
        let cols_t = group.gens.transpose();
        let columns = (0..cols_t.rows()).map(|c| cols_t.row(c)).collect();
        let ring: Vec<Vec<usize>> = ring
            .into_iter()
            .map(|sites| group.columns(&sites))
            .collect::<Result<_>>()?;
        let mut used = vec![false; group.sites.len()];
        for c in ring.iter().flatten() {
            used[*c] = true;
        }
        let rest = (0..group.sites.len()).filter(|&c| !used[c]).collect();
        Ok(Self {
            group,
            columns,
            ring,
            rest,
            total: group.log_size(),
        })
    }

    fn basis(&self) -> IncrementalBasis {
        IncrementalBasis::new(self.group.gens.rows())
    }

    fn insert_position(&self, basis: &mut IncrementalBasis, i: usize) {
        for &c in &self.ring[i % self.ring.len()] {
            basis.insert(self.columns[c].clone());
        }
    }

    fn rest_basis(&self) -> IncrementalBasis {
        let mut b = self.basis();
        for &c in &self.rest {
            b.insert(self.columns[c].clone());
        }
        b
    }

    /// `table[s][len]`: boundary symmetry entropy of ring positions
    /// `s..s+len` (mod ring length), for `len` in `0..=L`.
    pub fn interval_entropies(&self) -> Vec<Vec<usize>> {
        let l = self.ring.len();
        (0..l)
            .map(|s| {
                let mut inside = vec![0; l + 1];
                let mut b = self.basis();
                for (len, slot) in inside.iter_mut().enumerate().skip(1) {
                    self.insert_position(&mut b, s + len - 1);
                    *slot = b.rank();
                }
                let mut outside = vec![0; l + 1];
                let mut b = self.rest_basis();
                outside[l] = b.rank();
                for len in (0..l).rev() {
                    self.insert_position(&mut b, s + len);
                    outside[len] = b.rank();
                }
                (0..=l)
                    .map(|k| inside[k] + outside[k] - self.total)
                    .collect()
            })
            .collect()
    }

    /// `table[s][len]`: boundary mutual information between positions
    /// `s..s+len` and the antipodal interval starting at `s + L/2`, for
    /// `len` in `0..=L/2`.
    pub fn antipodal_mutual_info(&self) -> Vec<Vec<usize>> {
        let l = self.ring.len();
        let h = l / 2;
        let single = self.interval_entropies();
        (0..l)
            .map(|s| {
                let mut inside = vec![0; h + 1];
                let mut b = self.basis();
                for (len, slot) in inside.iter_mut().enumerate().skip(1) {
                    self.insert_position(&mut b, s + len - 1);
                    self.insert_position(&mut b, s + h + len - 1);
                    *slot = b.rank();
                }
                let mut outside = vec![0; h + 1];
                let mut b = self.rest_basis();
                // Gaps [s+len, s+h) and [s+h+len, s+L) grow as len shrinks.
                for k in h..l {
                    if k >= 2 * h {
                        self.insert_position(&mut b, s + k);
                    }
                }
                outside[h] = b.rank();
                for len in (0..h).rev() {
                    self.insert_position(&mut b, s + len);
                    self.insert_position(&mut b, s + h + len);
                    outside[len] = b.rank();
                }
                (0..=h)
                    .map(|len| {
                        let joint = inside[len] + outside[len] - self.total;
                        single[s][len] + single[(s + h) % l][len] - joint
                    })
                    .collect()
            })
            .collect()
    }
}

/// Generators crossing from the top edge to the bottom edge of a cylinder
/// with two free edges.
pub fn top_bottom_mutual_info(r: &Realization, t: &SymmetryTableau) -> Result<usize> {
    let g = &r.geometry;
    require_free_cylinder(g, r.boundary.top, r.boundary.bottom)?;
    let group = t.boundary_group(&r.boundary_sites());
    group.rank_mutual_info(&g.top_sites(), &g.bottom_sites())
}

pub(crate) fn require_free_cylinder(g: &Geometry, top: Edge, bottom: Edge) -> Result<()> {
    if g.topology != Topology::Cylinder {
        return Err(Error::WrongTopology {
            expected: "cylinder with two free edges".into(),
            found: g.topology.to_string(),
        });
    }
    if top != Edge::Free || bottom != Edge::Free {
        return Err(Error::WrongTopology {
            expected: "cylinder with two free edges".into(),
            found: format!("top {top}, bottom {bottom}"),
        });
    }
    Ok(())
}

/// Space-time picture of symmetry operators, one character per site.
///
/// * `B`: support of one sampled boundary generator
/// * `O`: union support of generators living entirely in the bulk
/// * `G`: union support of the boundary group
/// * `.`: none of the above
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub width: usize,
    pub height: usize,
    cells: Vec<u8>,
}

impl Snapshot {
    /// Builds the picture from full-lattice generator rows, split by whether
    /// they touch the boundary.
    pub fn from_parts(
        width: usize,
        height: usize,
        sampled: Option<&BitVec>,
        bulk: impl IntoIterator<Item = BitVec>,
        boundary: impl IntoIterator<Item = BitVec>,
    ) -> Self {
        let mut cells = vec![b'.'; width * height];
        let mut paint = |v: &BitVec, ch: u8| {
            for s in v.ones() {
                let rank = |c: u8| match c {
                    b'B' => 3,
                    b'O' => 2,
                    b'G' => 1,
                    _ => 0,
                };
                if rank(ch) > rank(cells[s]) {
                    cells[s] = ch;
                }
            }
        };
        for v in boundary {
            paint(&v, b'G');
        }
        for v in bulk {
            paint(&v, b'O');
        }
        if let Some(v) = sampled {
            paint(v, b'B');
        }
        Self {
            width,
            height,
            cells,
        }
    }

    /// Snapshot of the static group of `r`. On a torus every generator
    /// counts as a boundary generator.
    pub fn from_static<R: Rng + ?Sized>(r: &Realization, t: &SymmetryTableau, rng: &mut R) -> Self {
        let g = &r.geometry;
        let rows = t.matrix().transpose();
        let bd = r.boundary_sites();
        let (touching, bulk) = if g.topology == Topology::Torus {
            (rows.rref().matrix, BinMatrix::zeros(0, g.n_sites()))
        } else {
            rows.block_split(&bd)
        };
        let sample = touching.transpose().random_combination(rng, true).ok();
        Self::from_parts(
            g.width,
            g.height,
            sample.as_ref(),
            (0..bulk.rows()).map(|k| bulk.row(k)),
            (0..touching.rows()).map(|k| touching.row(k)),
        )
    }

    pub fn cell(&self, i: usize, tau: usize) -> char {
        self.cells[tau * self.width + i] as char
    }
}

impl fmt::Display for Snapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.width) {
            f.write_str(std::str::from_utf8(row).expect("ascii cells"))?;
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, Model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// All elements of the column span of `t`, as site bitmasks.
    fn span(t: &BinMatrix) -> Vec<u64> {
        let n = t.rows();
        let cols: Vec<u64> = (0..t.cols())
            .map(|c| (0..n).filter(|&r| t.get(r, c)).fold(0, |m, r| m | 1 << r))
            .collect();
        let mut out: Vec<u64> = (0u64..1 << cols.len())
            .map(|a| {
                (0..cols.len())
                    .filter(|&k| a >> k & 1 == 1)
                    .fold(0, |m, k| m ^ cols[k])
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn log2_count(elements: &[u64], within: u64) -> usize {
        let k = elements.iter().filter(|&&e| e & !within == 0).count();
        assert!(k.is_power_of_two());
        k.trailing_zeros() as usize
    }

    fn mask(sites: &[usize]) -> u64 {
        sites.iter().fold(0, |m, &s| m | 1 << s)
    }

    #[test]
    fn trivial_groups() {
        let t = SymmetryTableau::solve(&BinMatrix::identity(6));
        assert_eq!(t.config_entropy(), 0);
        let t = SymmetryTableau::solve(&BinMatrix::zeros(3, 6));
        assert_eq!(t.config_entropy(), 6);
        assert_eq!(t.sym_entropy(&[]), 0);
        assert_eq!(t.sym_entropy(&[0, 1, 2, 3, 4, 5]), 0);
    }

    #[test]
    fn entropies_match_span_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let n = 12;
            let m = rng.random_range(1..=8);
            let t = SymmetryTableau::from_matrix(BinMatrix::from_fn(n, m, |_, _| rng.random()));
            let elems = span(t.matrix());
            let full = (1u64 << n) - 1;
            let log_g = log2_count(&elems, full);
            assert_eq!(log_g, t.matrix().rank());

            let a: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
            let abar = t.complement(&a);
            // log|G / (G_A G_Abar)|
            let expected = log_g - log2_count(&elems, mask(&a)) - log2_count(&elems, mask(&abar));
            let sym = t.region_rank(&a) + t.region_rank(&abar) - log_g;
            assert_eq!(sym, expected);

            let b: Vec<usize> = abar
                .iter()
                .copied()
                .filter(|_| rng.random_bool(0.5))
                .collect();
            let ab: Vec<usize> = a.iter().chain(&b).copied().collect();
            // log|G| - log|G_bar(A)| counts the rank on A.
            let rank = |s: &[usize]| log_g - log2_count(&elems, full & !mask(s));
            let mi = rank(&a) + rank(&b) - rank(&ab);
            assert_eq!(t.sym_mutual_info_cond(&a, &b).unwrap(), mi);
            assert!(mi <= rank(&a).min(rank(&b)));
        }
    }

    #[test]
    fn overlap_is_rejected() {
        let t = SymmetryTableau::solve(&BinMatrix::zeros(1, 4));
        assert!(matches!(
            t.sym_mutual_info_cond(&[0, 1], &[1, 2]),
            Err(Error::OverlappingRegions { site: 1 })
        ));
        assert_eq!(t.sym_mutual_info_cond(&[0, 1], &[]).unwrap(), 0);
    }

    #[test]
    fn ground_state_count_rtpm_torus() {
        let g = Geometry::torus(Model::Rtpm, 4, 4).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 0.9, 5).unwrap();
        let p = r.parity_matrix();
        let t = SymmetryTableau::from_realization(&r);
        let count = (0u32..1 << 16)
            .filter(|&x| {
                let v = BitVec::from_indices(16, (0..16).filter(|&k| x >> k & 1 == 1));
                p.mul_vec(&v).is_zero()
            })
            .count();
        assert_eq!(count, 1 << t.config_entropy());
    }

    #[test]
    fn boundary_group_rank_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t = SymmetryTableau::from_matrix(BinMatrix::from_fn(12, 7, |r, _| {
                r < 9 && rng.random_bool(0.3)
            }));
            let bd: Vec<usize> = vec![0, 1, 2, 3, 10];
            let group = t.boundary_group(&bd);
            let elems = span(t.matrix());
            let log_g = log2_count(&elems, (1 << 12) - 1);
            let bulk = log2_count(&elems, ((1 << 12) - 1) & !mask(&bd));
            assert_eq!(group.log_size(), log_g - bulk);
            assert_eq!(group.sym_entropy(&bd).unwrap(), 0);
        }
        let t = SymmetryTableau::from_matrix(BinMatrix::identity(5));
        assert_eq!(t.boundary_group(&[0, 1, 2, 3, 4]).log_size(), 5);
        assert_eq!(t.boundary_group(&[]).log_size(), 0);
    }

    #[test]
    fn boundary_mutual_info_with_empty_region() {
        let t = SymmetryTableau::from_matrix(BinMatrix::from_fn(6, 3, |r, c| (r + c) % 2 == 0));
        let group = t.boundary_group(&[0, 1, 2, 3]);
        assert_eq!(group.mutual_info(&[0], &[]).unwrap(), 0);
        assert!(group.rank_on(&[5]).is_err());
    }

    #[test]
    fn ring_tables_match_direct_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for l in [5usize, 6, 7] {
            // Two ring layers plus three extra sites.
            let n = 2 * l + 3;
            let t =
                SymmetryTableau::from_matrix(BinMatrix::from_fn(n, 9, |_, _| rng.random_bool(0.3)));
            let all: Vec<usize> = (0..n).collect();
            let group = t.boundary_group(&all);
            let ring: Vec<Vec<usize>> = (0..l).map(|i| vec![i, l + i]).collect();
            let r = Ring::new(&group, ring.clone()).unwrap();
            let interval = |s: usize, len: usize| -> Vec<usize> {
                (s..s + len).flat_map(|i| ring[i % l].clone()).collect()
            };
            let single = r.interval_entropies();
            let mi = r.antipodal_mutual_info();
            for (s, (row, mi_row)) in single.iter().zip(&mi).enumerate() {
                for (len, v) in row.iter().enumerate() {
                    assert_eq!(*v, group.sym_entropy(&interval(s, len)).unwrap());
                }
                for (len, v) in mi_row.iter().enumerate() {
                    let expected = group
                        .mutual_info(&interval(s, len), &interval(s + l / 2, len))
                        .unwrap();
                    assert_eq!(*v, expected, "l {l} s {s} len {len}");
                }
            }
        }
    }

    #[test]
    fn top_bottom_requires_free_cylinder() {
        let g = Geometry::torus(Model::Rtpm, 4, 4).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 0.5, 0).unwrap();
        let t = SymmetryTableau::from_realization(&r);
        assert!(top_bottom_mutual_info(&r, &t).is_err());

        let g = Geometry::cylinder(Model::Rtpm, 4, 4).unwrap();
        let r = Realization::sample(g, Boundary::FIXED_BOTTOM, 0.5, 0).unwrap();
        let t = SymmetryTableau::from_realization(&r);
        assert!(top_bottom_mutual_info(&r, &t).is_err());

        let r = Realization::sample(g, Boundary::FREE, 0.0, 0).unwrap();
        let t = SymmetryTableau::from_realization(&r);
        assert_eq!(top_bottom_mutual_info(&r, &t).unwrap(), 0);
    }

    #[test]
    fn operator_size_small_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = SymmetryTableau::from_matrix("1\n1\n0\n1\n0\n".parse().unwrap());
        assert_eq!(one.operator_size(&mut rng, 10).unwrap(), 3.0 / 5.0);

        // Disjoint weights 2 and 3: elements of weight 2, 3 and 5.
        let two = SymmetryTableau::from_matrix("10\n10\n01\n01\n01\n00\n".parse().unwrap());
        let n = 30000;
        let got = two.operator_size(&mut rng, n).unwrap();
        let exact = (2.0 + 3.0 + 5.0) / (3.0 * 6.0);
        assert!((got - exact).abs() < 0.01, "{got} vs {exact}");

        let none = SymmetryTableau::from_matrix(BinMatrix::zeros(4, 0));
        assert!(matches!(
            none.operator_size(&mut rng, 1),
            Err(Error::TrivialGroup)
        ));
    }

    #[test]
    fn static_snapshot_marks() {
        let g = Geometry::cylinder(Model::Rtpm, 6, 5).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 1.0, 0).unwrap();
        let t = SymmetryTableau::from_realization(&r);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let snap = Snapshot::from_static(&r, &t, &mut rng);
        let text = snap.to_string();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.len() == 6));
        assert!(text.contains('B'));
        assert!(!text.contains('O'));
    }
}

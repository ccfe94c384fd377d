//! Lattice geometry, disorder sampling, parity-check assembly and named
//! site regions.
//!
//! Sites are indexed row-major by layer: `(i, tau) -> tau * width + i`.
//! The horizontal direction is always periodic.
//!
//! Triangular terms are anchored at their head: the term at `(i, tau)`
//! covers `(i, tau)`, `(i, tau - 1)` and `(i + 1, tau - 1)`, so a plaquette
//! fixes the spin at the head to `x[i] + x[i + 1]` of the layer above.
//! X-shaped terms are centred: the term at `(i, tau)` covers the centre and
//! its four neighbours, and governs the step from layer `tau` to `tau + 1`.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BinMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Three-body triangular plaquettes.
    Rtpm,
    /// Five-body X-shaped plaquettes.
    Rxpm,
}

impl Model {
    /// Number of layers that make up a free edge.
    pub fn edge_depth(self) -> usize {
        match self {
            Model::Rtpm => 1,
            Model::Rxpm => 2,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Rtpm => "rtpm",
            Model::Rxpm => "rxpm",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rtpm" => Ok(Model::Rtpm),
            "rxpm" => Ok(Model::Rxpm),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Torus,
    /// Periodic horizontally, open vertically.
    Cylinder,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Torus => "torus",
            Topology::Cylinder => "cylinder",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "torus" => Ok(Topology::Torus),
            "cylinder" => Ok(Topology::Cylinder),
            other => Err(Error::Config(format!("unknown topology `{other}`"))),
        }
    }
}

/// Condition on one open edge. `Fixed` pins every spin of the outermost
/// layer to +1, i.e. bit value 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    #[default]
    Free,
    Fixed,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Edge::Free => "free",
            Edge::Fixed => "fixed",
        })
    }
}

impl FromStr for Edge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "free" => Ok(Edge::Free),
            "fixed" => Ok(Edge::Fixed),
            other => Err(Error::Config(format!("unknown edge condition `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Boundary {
    pub top: Edge,
    pub bottom: Edge,
}

impl Boundary {
    pub const FREE: Boundary = Boundary {
        top: Edge::Free,
        bottom: Edge::Free,
    };
    pub const FIXED_BOTTOM: Boundary = Boundary {
        top: Edge::Free,
        bottom: Edge::Fixed,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub model: Model,
    pub width: usize,
    pub height: usize,
    pub topology: Topology,
}

impl Geometry {
    pub fn new(model: Model, width: usize, height: usize, topology: Topology) -> Result<Self> {
        let min = match model {
            Model::Rtpm => 2,
            Model::Rxpm => 3,
        };
        if width < min || height < min {
            return Err(Error::InvalidGeometry(format!(
                "{model} needs width and height of at least {min}, got {width}x{height}"
            )));
        }
        Ok(Self {
            model,
            width,
            height,
            topology,
        })
    }

    pub fn torus(model: Model, width: usize, height: usize) -> Result<Self> {
        Self::new(model, width, height, Topology::Torus)
    }

    pub fn cylinder(model: Model, width: usize, height: usize) -> Result<Self> {
        Self::new(model, width, height, Topology::Cylinder)
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn site(&self, i: usize, tau: usize) -> usize {
        debug_assert!(i < self.width && tau < self.height);
        tau * self.width + i
    }

    #[inline]
    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.width, site / self.width)
    }

    #[inline]
    pub fn right(&self, i: usize) -> usize {
        (i + 1) % self.width
    }

    #[inline]
    pub fn left(&self, i: usize) -> usize {
        (i + self.width - 1) % self.width
    }

    pub fn layer_sites(&self, tau: usize) -> Vec<usize> {
        (0..self.width).map(|i| self.site(i, tau)).collect()
    }

    /// Layers forming the top edge of a cylinder.
    pub fn top_layers(&self) -> Vec<usize> {
        (0..self.model.edge_depth()).collect()
    }

    /// Layers forming the bottom edge of a cylinder.
    pub fn bottom_layers(&self) -> Vec<usize> {
        (self.height - self.model.edge_depth()..self.height).collect()
    }

    pub fn top_sites(&self) -> Vec<usize> {
        self.top_layers()
            .into_iter()
            .flat_map(|t| self.layer_sites(t))
            .collect()
    }

    pub fn bottom_sites(&self) -> Vec<usize> {
        self.bottom_layers()
            .into_iter()
            .flat_map(|t| self.layer_sites(t))
            .collect()
    }

    /// Whether the term anchored at `site` enters the constraint set.
    pub fn term_active(&self, site: usize) -> bool {
        if self.topology == Topology::Torus {
            return true;
        }
        let (_, tau) = self.coords(site);
        match self.model {
            Model::Rtpm => tau >= 1,
            Model::Rxpm => tau >= 1 && tau + 1 < self.height,
        }
    }

    /// Sites covered by a plaquette term anchored at `site`.
    pub fn plaquette_support(&self, site: usize) -> Vec<usize> {
        let (i, tau) = self.coords(site);
        let up = (tau + self.height - 1) % self.height;
        match self.model {
            Model::Rtpm => vec![site, self.site(i, up), self.site(self.right(i), up)],
            Model::Rxpm => {
                let down = (tau + 1) % self.height;
                vec![
                    self.site(i, up),
                    self.site(self.left(i), tau),
                    site,
                    self.site(self.right(i), tau),
                    self.site(i, down),
                ]
            }
        }
    }
}

/// Height `round(width^z)` of an anisotropic lattice.
pub fn anisotropic_height(width: usize, z: f64) -> usize {
    (width as f64).powf(z).round() as usize
}

/// One disorder realization: which sites host a plaquette and which a
/// single-site term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub geometry: Geometry,
    pub boundary: Boundary,
    pub p: f64,
    pub seed: u64,
    plaquette: Vec<bool>,
}

/// Bernoulli draw from one 64-bit word, using its top 53 bits.
#[inline]
pub(crate) fn bernoulli(word: u64, p: f64) -> bool {
    ((word >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < p
}

fn check_setup(geometry: &Geometry, boundary: Boundary, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
    }
    if geometry.topology == Topology::Torus && boundary != Boundary::FREE {
        return Err(Error::InvalidGeometry(
            "a torus has no edges to fix".to_string(),
        ));
    }
    Ok(())
}

impl Realization {
    /// Samples every site independently: plaquette with probability `p`.
    /// Site `k` consumes the `k`-th 64-bit output of a ChaCha8 stream keyed
    /// by `seed`.
    pub fn sample(geometry: Geometry, boundary: Boundary, p: f64, seed: u64) -> Result<Self> {
        check_setup(&geometry, boundary, p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plaquette = (0..geometry.n_sites())
            .map(|_| bernoulli(rng.next_u64(), p))
            .collect();
        Ok(Self {
            geometry,
            boundary,
            p,
            seed,
            plaquette,
        })
    }

    /// Realization with an explicit term map (`true` = plaquette).
    pub fn from_terms(
        geometry: Geometry,
        boundary: Boundary,
        plaquette: Vec<bool>,
    ) -> Result<Self> {
        check_setup(&geometry, boundary, 0.0)?;
        if plaquette.len() != geometry.n_sites() {
            return Err(Error::ShapeMismatch(format!(
                "{} terms for {} sites",
                plaquette.len(),
                geometry.n_sites()
            )));
        }
        let p = plaquette.iter().filter(|b| **b).count() as f64 / plaquette.len() as f64;
        Ok(Self {
            geometry,
            boundary,
            p,
            seed: 0,
            plaquette,
        })
    }

    #[inline]
    pub fn is_plaquette(&self, site: usize) -> bool {
        self.plaquette[site]
    }

    pub fn terms(&self) -> &[bool] {
        &self.plaquette
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    /// Layers pinned to zero by fixed edges.
    fn pinned_layer(&self, tau: usize) -> bool {
        let g = &self.geometry;
        g.topology == Topology::Cylinder
            && ((self.boundary.top == Edge::Fixed && tau == 0)
                || (self.boundary.bottom == Edge::Fixed && tau + 1 == g.height))
    }

    /// Row supports of the parity-check matrix, in site order. A site emits
    /// its term row if the term is active, then a pin row if its layer is
    /// fixed.
    pub fn constraint_supports(&self) -> Vec<Vec<usize>> {
        let g = &self.geometry;
        let mut rows = Vec::new();
        for s in 0..g.n_sites() {
            if g.term_active(s) {
                rows.push(if self.plaquette[s] {
                    g.plaquette_support(s)
                } else {
                    vec![s]
                });
            }
            if self.pinned_layer(g.coords(s).1) {
                rows.push(vec![s]);
            }
        }
        rows
    }

    pub fn parity_matrix(&self) -> BinMatrix {
        BinMatrix::from_row_supports(self.n_sites(), &self.constraint_supports())
    }

    /// Sites belonging to free edges; empty on a torus.
    pub fn boundary_sites(&self) -> Vec<usize> {
        let g = &self.geometry;
        if g.topology == Topology::Torus {
            return Vec::new();
        }
        let mut sites = Vec::new();
        if self.boundary.top == Edge::Free {
            sites.extend(g.top_sites());
        }
        if self.boundary.bottom == Edge::Free {
            sites.extend(g.bottom_sites());
        }
        sites.sort_unstable();
        sites.dedup();
        sites
    }
}

/// Replay format:
///
/// ```text
/// model rxpm
/// width 4
/// height 3
/// topology cylinder
/// top free
/// bottom fixed
/// p 0.5
/// seed 7
/// terms
/// 1011
/// 0110
/// 1111
/// ```
///
/// Each term line is one layer, `1` for a plaquette and `0` for a
/// single-site term.
impl fmt::Display for Realization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.geometry;
        writeln!(f, "model {}", g.model)?;
        writeln!(f, "width {}", g.width)?;
        writeln!(f, "height {}", g.height)?;
        writeln!(f, "topology {}", g.topology)?;
        writeln!(f, "top {}", self.boundary.top)?;
        writeln!(f, "bottom {}", self.boundary.bottom)?;
        writeln!(f, "p {}", self.p)?;
        writeln!(f, "seed {}", self.seed)?;
        writeln!(f, "terms")?;
        for row in self.plaquette.chunks(g.width) {
            for &b in row {
                f.write_str(if b { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for Realization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        let mut lines = s.lines().enumerate();
        let parse_err = |line: usize, reason: String| Error::Parse { line, reason };
        for (n, line) in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "terms" {
                break;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| parse_err(n + 1, format!("expected `key value`, got `{line}`")))?;
            fields.insert(key.to_string(), (n + 1, value.trim().to_string()));
        }
        let get = |key: &str| -> Result<(usize, String)> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| parse_err(0, format!("missing field `{key}`")))
        };
        fn num<T: FromStr>(line: usize, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("bad number `{v}`"),
            })
        }
        let model: Model = get("model")?.1.parse()?;
        let (lw, w) = get("width")?;
        let (lh, h) = get("height")?;
        let topology: Topology = get("topology")?.1.parse()?;
        let top: Edge = get("top")?.1.parse()?;
        let bottom: Edge = get("bottom")?.1.parse()?;
        let (lp, p) = get("p")?;
        let (ls, seed) = get("seed")?;
        let geometry = Geometry::new(model, num(lw, &w)?, num(lh, &h)?, topology)?;
        let mut plaquette = Vec::with_capacity(geometry.n_sites());
        for (n, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.len() != geometry.width {
                return Err(parse_err(
                    n + 1,
                    format!(
                        "layer has {} terms, expected {}",
                        line.len(),
                        geometry.width
                    ),
                ));
            }
            for ch in line.chars() {
                plaquette.push(match ch {
                    '1' => true,
                    '0' => false,
                    c => return Err(parse_err(n + 1, format!("unexpected character {c:?}"))),
                });
            }
        }
        let mut r = Realization::from_terms(geometry, Boundary { top, bottom }, plaquette)?;
        r.p = num(lp, &p)?;
        r.seed = num(ls, &seed)?;
        Ok(r)
    }
}

/// Recipe for a named set of sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    /// Two full-height strips of `width` columns starting at columns 0 and
    /// `L/2`.
    AntipodalPair {
        width: usize,
    },
    /// Full-height strip of columns `[0, width)`.
    VerticalStrip {
        width: usize,
    },
    BoundaryTop,
    BoundaryBottom,
    /// Top-edge columns `start, start+1, ..., start+len-1` (mod L).
    BoundarySegment {
        start: usize,
        len: usize,
    },
    /// Top-edge columns `[0, L/2)`.
    BoundaryHalf,
    /// Two top-edge segments of `width` columns at 0 and `L/2`.
    BoundaryAntipodal {
        width: usize,
    },
}

impl fmt::Display for RegionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RegionSpec::AntipodalPair { width } => write!(f, "antipodal:{width}"),
            RegionSpec::VerticalStrip { width } => write!(f, "strip:{width}"),
            RegionSpec::BoundaryTop => f.write_str("top"),
            RegionSpec::BoundaryBottom => f.write_str("bottom"),
            RegionSpec::BoundarySegment { start, len } => write!(f, "segment:{start}:{len}"),
            RegionSpec::BoundaryHalf => f.write_str("half"),
            RegionSpec::BoundaryAntipodal { width } => write!(f, "bd-antipodal:{width}"),
        }
    }
}

impl FromStr for RegionSpec {
    type Err = Error;

    /// Parses the `Display` form, e.g. `antipodal:2` or `segment:0:8`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("bad region spec `{s}`"));
        let arg = |k: usize| -> Result<usize> {
            parts.get(k).ok_or_else(bad)?.parse().map_err(|_| bad())
        };
        let spec = match parts[0] {
            "antipodal" => RegionSpec::AntipodalPair { width: arg(1)? },
            "strip" => RegionSpec::VerticalStrip { width: arg(1)? },
            "top" => RegionSpec::BoundaryTop,
            "bottom" => RegionSpec::BoundaryBottom,
            "segment" => RegionSpec::BoundarySegment {
                start: arg(1)?,
                len: arg(2)?,
            },
            "half" => RegionSpec::BoundaryHalf,
            "bd-antipodal" => RegionSpec::BoundaryAntipodal { width: arg(1)? },
            _ => return Err(bad()),
        };
        let expected = match spec {
            RegionSpec::BoundaryTop | RegionSpec::BoundaryBottom | RegionSpec::BoundaryHalf => 1,
            RegionSpec::BoundarySegment { .. } => 3,
            _ => 2,
        };
        if parts.len() != expected {
            return Err(bad());
        }
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub sites: Vec<usize>,
}

impl Region {
    pub fn new(name: impl Into<String>, mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self {
            name: name.into(),
            sites,
        }
    }

    /// Sites of `n_sites` not in this region.
    pub fn complement(&self, n_sites: usize) -> Vec<usize> {
        let mut inside = vec![false; n_sites];
        for &s in &self.sites {
            inside[s] = true;
        }
        (0..n_sites).filter(|&s| !inside[s]).collect()
    }
}

fn columns_region(
    g: &Geometry,
    name: String,
    columns: impl Iterator<Item = usize> + Clone,
) -> Region {
    let sites = (0..g.height)
        .flat_map(|t| columns.clone().map(move |i| (i, t)))
        .map(|(i, t)| g.site(i % g.width, t))
        .collect();
    Region::new(name, sites)
}

fn top_segment(g: &Geometry, name: String, start: usize, len: usize) -> Region {
    let sites = g
        .top_layers()
        .into_iter()
        .flat_map(|t| (start..start + len).map(move |i| (i, t)))
        .map(|(i, t)| g.site(i % g.width, t))
        .collect();
    Region::new(name, sites)
}

/// Builds the region(s) described by `spec`. Pair specs return two
/// disjoint regions named `A` and `B`; the others return one region `A`.
pub fn named_regions(g: &Geometry, spec: RegionSpec) -> Result<Vec<Region>> {
    let invalid = |reason: String| Error::InvalidRegion {
        name: spec.to_string(),
        reason,
    };
    let needs_cylinder = || -> Result<()> {
        if g.topology != Topology::Cylinder {
            return Err(Error::WrongTopology {
                expected: "cylinder".into(),
                found: g.topology.to_string(),
            });
        }
        Ok(())
    };
    let half = g.width / 2;
    match spec {
        RegionSpec::AntipodalPair { width } | RegionSpec::BoundaryAntipodal { width } => {
            if width == 0 || width > half {
                return Err(invalid(format!(
                    "strip width must be in 1..={half} for width {}",
                    g.width
                )));
            }
            if matches!(spec, RegionSpec::AntipodalPair { .. }) {
                Ok(vec![
                    columns_region(g, "A".into(), 0..width),
                    columns_region(g, "B".into(), half..half + width),
                ])
            } else {
                needs_cylinder()?;
                Ok(vec![
                    top_segment(g, "A".into(), 0, width),
                    top_segment(g, "B".into(), half, width),
                ])
            }
        }
        RegionSpec::VerticalStrip { width } => {
            if width > g.width {
                return Err(invalid(format!(
                    "strip wider than lattice width {}",
                    g.width
                )));
            }
            Ok(vec![columns_region(g, "A".into(), 0..width)])
        }
        RegionSpec::BoundaryTop => {
            needs_cylinder()?;
            Ok(vec![Region::new("A", g.top_sites())])
        }
        RegionSpec::BoundaryBottom => {
            needs_cylinder()?;
            Ok(vec![Region::new("A", g.bottom_sites())])
        }
        RegionSpec::BoundarySegment { start, len } => {
            needs_cylinder()?;
            if start >= g.width || len > g.width {
                return Err(invalid(format!(
                    "segment must start below and span at most {}",
                    g.width
                )));
            }
            Ok(vec![top_segment(g, "A".into(), start, len)])
        }
        RegionSpec::BoundaryHalf => {
            needs_cylinder()?;
            Ok(vec![top_segment(g, "A".into(), 0, half)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_ground_states(p: &BinMatrix) -> usize {
        let n = p.cols();
        (0u64..1 << n)
            .filter(|&x| {
                let v = crate::gf2::BitVec::from_indices(n, (0..n).filter(|&k| x >> k & 1 == 1));
                p.mul_vec(&v).is_zero()
            })
            .count()
    }

    #[test]
    fn p_one_and_zero_are_deterministic() {
        let g = Geometry::torus(Model::Rtpm, 5, 7).unwrap();
        let all = Realization::sample(g, Boundary::FREE, 1.0, 3).unwrap();
        assert!(all.terms().iter().all(|&b| b));
        let none = Realization::sample(g, Boundary::FREE, 0.0, 3).unwrap();
        assert!(none.terms().iter().all(|&b| !b));
    }

    #[test]
    fn plaquette_fraction_is_binomial() {
        let g = Geometry::torus(Model::Rxpm, 32, 32).unwrap();
        let n = g.n_sites() as f64;
        let sigma = (n * 0.25).sqrt();
        for seed in 0..20 {
            let r = Realization::sample(g, Boundary::FREE, 0.5, seed).unwrap();
            let k = r.terms().iter().filter(|b| **b).count() as f64;
            assert!((k - n / 2.0).abs() < 5.0 * sigma, "seed {seed}: {k}");
        }
    }

    #[test]
    fn p_zero_torus_is_identity() {
        for model in [Model::Rtpm, Model::Rxpm] {
            let g = Geometry::torus(model, 4, 5).unwrap();
            let r = Realization::sample(g, Boundary::FREE, 0.0, 1).unwrap();
            assert_eq!(r.parity_matrix(), BinMatrix::identity(20));
        }
    }

    #[test]
    fn rtpm_full_torus_rank_matches_enumeration() {
        let g = Geometry::torus(Model::Rtpm, 4, 4).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 1.0, 0).unwrap();
        let p = r.parity_matrix();
        assert_eq!(count_ground_states(&p), 1 << (16 - p.rank()));
    }

    #[test]
    fn rxpm_full_torus_is_five_regular() {
        let g = Geometry::torus(Model::Rxpm, 3, 3).unwrap();
        let p = Realization::sample(g, Boundary::FREE, 1.0, 0)
            .unwrap()
            .parity_matrix();
        for r in 0..p.rows() {
            assert_eq!(p.row_weight(r), 5);
        }
        for c in 0..p.cols() {
            assert_eq!(p.column(c).count_ones(), 5);
        }
    }

    #[test]
    fn row_counts_and_weights() {
        let g = Geometry::cylinder(Model::Rtpm, 6, 5).unwrap();
        let r = Realization::sample(g, Boundary::FREE, 0.6, 9).unwrap();
        let p = r.parity_matrix();
        assert_eq!(p.rows(), 6 * 4);
        for k in 0..p.rows() {
            assert!([1, 3].contains(&p.row_weight(k)));
        }
        let fixed = Realization::sample(g, Boundary::FIXED_BOTTOM, 0.6, 9).unwrap();
        assert_eq!(fixed.parity_matrix().rows(), 6 * 4 + 6);

        let g = Geometry::cylinder(Model::Rxpm, 6, 5).unwrap();
        let p = Realization::sample(g, Boundary::FREE, 0.6, 9)
            .unwrap()
            .parity_matrix();
        assert_eq!(p.rows(), 6 * 3);
        for k in 0..p.rows() {
            assert!([1, 5].contains(&p.row_weight(k)));
        }
    }

    #[test]
    fn rtpm_plaquette_matches_update_rule() {
        // Head at (2, 1): constraint x(2,1) = x(2,0) + x(3,0).
        let g = Geometry::cylinder(Model::Rtpm, 4, 2).unwrap();
        let mut terms = vec![false; 8];
        terms[g.site(2, 1)] = true;
        let r = Realization::from_terms(g, Boundary::FREE, terms).unwrap();
        let supports = r.constraint_supports();
        assert!(supports.contains(&vec![g.site(2, 1), g.site(2, 0), g.site(3, 0)]));
    }

    #[test]
    fn same_seed_same_matrix() {
        let g = Geometry::cylinder(Model::Rxpm, 8, 6).unwrap();
        let a = Realization::sample(g, Boundary::FIXED_BOTTOM, 0.7, 42).unwrap();
        let b = Realization::sample(g, Boundary::FIXED_BOTTOM, 0.7, 42).unwrap();
        assert_eq!(a.parity_matrix(), b.parity_matrix());
    }

    #[test]
    fn small_geometries_rejected() {
        assert!(Geometry::torus(Model::Rtpm, 1, 4).is_err());
        assert!(Geometry::torus(Model::Rxpm, 2, 4).is_err());
        assert!(Geometry::cylinder(Model::Rxpm, 4, 2).is_err());
        let g = Geometry::torus(Model::Rtpm, 4, 4).unwrap();
        assert!(Realization::sample(g, Boundary::FIXED_BOTTOM, 0.5, 0).is_err());
        assert!(Realization::sample(g, Boundary::FREE, 1.5, 0).is_err());
    }

    #[test]
    fn replay_round_trip() {
        let g = Geometry::cylinder(Model::Rxpm, 5, 4).unwrap();
        let r = Realization::sample(g, Boundary::FIXED_BOTTOM, 0.35, 77).unwrap();
        let back: Realization = r.to_string().parse().unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn regions() {
        let g = Geometry::cylinder(Model::Rtpm, 16, 4).unwrap();
        let half = named_regions(&g, RegionSpec::BoundaryHalf).unwrap();
        assert_eq!(half[0].sites, (0..8).collect::<Vec<_>>());

        let t = Geometry::torus(Model::Rtpm, 8, 3).unwrap();
        let pair = named_regions(&t, RegionSpec::AntipodalPair { width: 1 }).unwrap();
        assert_eq!(pair[0].sites, vec![0, 8, 16]);
        assert_eq!(pair[1].sites, vec![4, 12, 20]);

        let all = named_regions(&t, RegionSpec::VerticalStrip { width: 8 }).unwrap();
        assert_eq!(all[0].sites.len(), t.n_sites());
        assert!(all[0].complement(t.n_sites()).is_empty());

        assert!(named_regions(&t, RegionSpec::VerticalStrip { width: 9 }).is_err());
        assert!(named_regions(&t, RegionSpec::BoundaryHalf).is_err());

        let x = Geometry::cylinder(Model::Rxpm, 6, 5).unwrap();
        let seg = named_regions(&x, RegionSpec::BoundarySegment { start: 5, len: 2 }).unwrap();
        assert_eq!(seg[0].sites, vec![0, 5, 6, 11]);
    }

    #[test]
    fn region_spec_round_trip() {
        for s in [
            "antipodal:2",
            "strip:4",
            "top",
            "bottom",
            "segment:1:3",
            "half",
            "bd-antipodal:1",
        ] {
            assert_eq!(s.parse::<RegionSpec>().unwrap().to_string(), s);
        }
        assert!("segment:1".parse::<RegionSpec>().is_err());
        assert!("blob".parse::<RegionSpec>().is_err());
    }
}

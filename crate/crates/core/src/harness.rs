//! Disorder-averaged parameter sweeps.
//!
//! A sweep visits every `(L, L_tau, p)` cell of a [`SweepConfig`], draws
//! independent realizations, evaluates the requested observables and
//! reduces them to `(mean, se, n)` rows. Realization seeds depend only on
//! the base seed, the cell and the replicate index, so results do not
//! depend on scheduling or thread count.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{rtpm_torus_config_entropy, run_dynamics};
use crate::error::{Error, Result};
use crate::lattice::{
    named_regions, Boundary, Edge, Geometry, Model, Realization, RegionSpec, Topology,
};
use crate::symmetry::{BoundaryGroup, Ring, SymmetryTableau};

/// Named observable evaluated on every realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Configuration entropy.
    Scf,
    /// Conditional symmetry mutual information of two antipodal strips.
    SymiAntipodal,
    /// Symmetry entropy of a vertical strip.
    SymsStrip,
    /// Mean operator size fraction.
    Opsize,
    /// Generators connecting the top and bottom edges of a cylinder.
    TopbottomMi,
    /// Boundary symmetry entropy of half the top edge.
    BdHalfEntropy,
    /// Boundary mutual information of antipodal top-edge segments.
    BdMiAntipodal,
    /// Boundary symmetry entropy for every top-edge interval length.
    BdSymsProfile,
    /// Antipodal boundary mutual information for every segment length.
    BdMiProfile,
}

impl Observable {
    pub const ALL: [Observable; 9] = [
        Observable::Scf,
        Observable::SymiAntipodal,
        Observable::SymsStrip,
        Observable::Opsize,
        Observable::TopbottomMi,
        Observable::BdHalfEntropy,
        Observable::BdMiAntipodal,
        Observable::BdSymsProfile,
        Observable::BdMiProfile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Scf => "scf",
            Observable::SymiAntipodal => "symi_antipodal",
            Observable::SymsStrip => "syms_strip",
            Observable::Opsize => "opsize",
            Observable::TopbottomMi => "topbottom_mi",
            Observable::BdHalfEntropy => "bd_half_entropy",
            Observable::BdMiAntipodal => "bd_mi_antipodal",
            Observable::BdSymsProfile => "bd_syms_profile",
            Observable::BdMiProfile => "bd_mi_profile",
        }
    }

    fn needs_boundary(self) -> bool {
        matches!(
            self,
            Observable::TopbottomMi
                | Observable::BdHalfEntropy
                | Observable::BdMiAntipodal
                | Observable::BdSymsProfile
                | Observable::BdMiProfile
        )
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Observable::ALL.iter().map(|o| o.name()).collect();
                Error::Config(format!(
                    "unknown observable `{s}` (known: {})",
                    names.join(", ")
                ))
            })
    }
}

/// How lattice heights follow from widths. Every rule may yield several
/// heights per width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HeightRule {
    /// `L_tau = round(r * L)` for each ratio.
    Ratio { ratios: Vec<f64> },
    /// `L_tau = round(s * L^z)` for each scale.
    Power {
        z: f64,
        #[serde(default = "unit_scale")]
        scales: Vec<f64>,
    },
    /// The same heights for every width.
    Explicit { heights: Vec<usize> },
}

fn unit_scale() -> Vec<f64> {
    vec![1.0]
}

impl Default for HeightRule {
    fn default() -> Self {
        HeightRule::Ratio { ratios: vec![1.0] }
    }
}

impl HeightRule {
    /// Distinct heights for width `width`, ascending.
    pub fn heights(&self, width: usize) -> Vec<usize> {
        let l = width as f64;
        let mut out: Vec<usize> = match self {
            HeightRule::Ratio { ratios } => {
                ratios.iter().map(|r| (r * l).round() as usize).collect()
            }
            HeightRule::Power { z, scales } => scales
                .iter()
                .map(|s| (s * l.powf(*z)).round() as usize)
                .collect(),
            HeightRule::Explicit { heights } => heights.clone(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Region sizes used by the observables. Unset values take per-width
/// defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionParams {
    /// Strip width of each antipodal strip (default 1 triangular, 2 X-shaped).
    pub antipodal_width: Option<usize>,
    /// Vertical strip width (default `L/2`).
    pub strip_width: Option<usize>,
    /// Boundary segment width for antipodal boundary MI (default `max(L/8, 1)`).
    pub bd_width: Option<usize>,
    /// Samples per realization for the operator size (default 64).
    pub opsize_samples: Option<usize>,
}

impl RegionParams {
    fn antipodal_width(&self, model: Model) -> usize {
        self.antipodal_width.unwrap_or(match model {
            Model::Rtpm => 1,
            Model::Rxpm => 2,
        })
    }

    fn strip_width(&self, width: usize) -> usize {
        self.strip_width.unwrap_or(width / 2)
    }

    fn bd_width(&self, width: usize) -> usize {
        self.bd_width.unwrap_or((width / 8).max(1))
    }

    fn opsize_samples(&self) -> usize {
        self.opsize_samples.unwrap_or(64)
    }
}

/// Sweep definition, usually read from a TOML file:
///
/// ```toml
/// model = "rtpm"
/// topology = "torus"
/// sizes = [8, 12, 16]
/// height = { rule = "power", z = 1.697 }
/// p = [0.75, 0.8, 0.85]
/// realizations = 1000
/// base_seed = 7
/// observables = ["scf", "symi_antipodal"]
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: Model,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub top: Edge,
    #[serde(default)]
    pub bottom: Edge,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub height: HeightRule,
    pub p: Vec<f64>,
    pub realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Index of the first replicate; lets split runs be merged later.
    #[serde(default)]
    pub first_replicate: u64,
    pub observables: Vec<Observable>,
    #[serde(default)]
    pub regions: RegionParams,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn boundary(&self) -> Boundary {
        Boundary {
            top: self.top,
            bottom: self.bottom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.p.is_empty() || self.observables.is_empty() {
            return Err(Error::Config(
                "sizes, p and observables must be non-empty".into(),
            ));
        }
        if let Some(p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("probability {p} outside [0, 1]")));
        }
        if self.topology == Topology::Torus && self.boundary() != Boundary::FREE {
            return Err(Error::Config("a torus has no edges to fix".into()));
        }
        for cell in self.cells() {
            Geometry::new(self.model, cell.width, cell.height, self.topology)?;
        }
        Ok(())
    }

    /// Every `(L, L_tau, p)` cell, widths outermost.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &width in &self.sizes {
            for height in self.height.heights(width) {
                for &p in &self.p {
                    out.push(Cell { width, height, p });
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub width: usize,
    pub height: usize,
    pub p: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stable hash of the sweep family and the cell.
fn cell_hash(cfg: &SweepConfig, cell: Cell) -> u64 {
    let words = [
        cfg.model as u64,
        cfg.topology as u64,
        cfg.top as u64,
        cfg.bottom as u64,
        cell.width as u64,
        cell.height as u64,
        cell.p.to_bits(),
    ];
    words.iter().fold(0x5EED, |h, &w| splitmix64(h ^ w))
}

/// Seed of replicate `replicate` of `cell`.
pub fn realization_seed(cfg: &SweepConfig, cell: Cell, replicate: u64) -> u64 {
    splitmix64(cfg.base_seed ^ splitmix64(cell_hash(cfg, cell) ^ splitmix64(replicate)))
}

fn boundary_group_of(r: &Realization, static_t: &Option<SymmetryTableau>) -> Result<BoundaryGroup> {
    let g = &r.geometry;
    if g.topology != Topology::Cylinder || r.boundary.top != Edge::Free {
        return Err(Error::WrongTopology {
            expected: "cylinder with a free top edge".into(),
            found: format!("{} with top {}", g.topology, r.boundary.top),
        });
    }
    if let (Edge::Free, Some(t)) = (r.boundary.bottom, static_t) {
        return Ok(t.boundary_group(&r.boundary_sites()));
    }
    Ok(run_dynamics(r)?.boundary_group(r.boundary.bottom))
}

fn top_ring(g: &Geometry) -> Vec<Vec<usize>> {
    (0..g.width)
        .map(|i| g.top_layers().into_iter().map(|t| g.site(i, t)).collect())
        .collect()
}

fn translation_mean(table: &[Vec<usize>], len: usize) -> f64 {
    table.iter().map(|row| row[len] as f64).sum::<f64>() / table.len() as f64
}

/// Evaluates `observables` on one realization. Profile observables yield
/// one value per region size, named `bd_syms@LA` and `bd_mi@len`.
///
/// Boundary observables on cylinders come from the layer-by-layer dynamics;
/// boundary profiles are averaged over all translations of the interval.
pub fn evaluate(
    r: &Realization,
    observables: &[Observable],
    params: &RegionParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(String, f64)>> {
    let g = r.geometry;
    let mut out = Vec::new();
    let mut static_t: Option<SymmetryTableau> = None;
    let needs_static = observables.iter().any(|o| {
        matches!(
            o,
            Observable::SymiAntipodal | Observable::SymsStrip | Observable::Opsize
        ) || (*o == Observable::Scf && g.topology == Topology::Torus && g.model == Model::Rxpm)
    });
    if needs_static {
        static_t = Some(SymmetryTableau::from_realization(r));
    }
    let mut group: Option<BoundaryGroup> = None;
    let mut dynamics = None;
    for &obs in observables {
        if obs.needs_boundary() && group.is_none() && obs != Observable::TopbottomMi {
            group = Some(boundary_group_of(r, &static_t)?);
        }
        match obs {
            Observable::Scf => {
                let v = match (g.topology, g.model) {
                    (Topology::Torus, Model::Rtpm) => rtpm_torus_config_entropy(r)?,
                    (Topology::Cylinder, _) if r.boundary.top == Edge::Free => {
                        if dynamics.is_none() {
                            dynamics = Some(run_dynamics(r)?);
                        }
                        dynamics
                            .as_ref()
                            .expect("set")
                            .config_entropy(r.boundary.bottom)
                    }
                    _ => static_t
                        .get_or_insert_with(|| SymmetryTableau::from_realization(r))
                        .config_entropy(),
                };
                out.push((obs.name().to_string(), v as f64));
            }
            Observable::SymiAntipodal => {
                let t = static_t.as_ref().expect("static tableau");
                let regions = named_regions(
                    &g,
                    RegionSpec::AntipodalPair {
                        width: params.antipodal_width(g.model),
                    },
                )?;
                let v = t.sym_mutual_info_cond(&regions[0].sites, &regions[1].sites)?;
                out.push((obs.name().to_string(), v as f64));
            }
            Observable::SymsStrip => {
                let t = static_t.as_ref().expect("static tableau");
                let regions = named_regions(
                    &g,
                    RegionSpec::VerticalStrip {
                        width: params.strip_width(g.width),
                    },
                )?;
                out.push((
                    obs.name().to_string(),
                    t.sym_entropy(&regions[0].sites) as f64,
                ));
            }
            Observable::Opsize => {
                let t = static_t.as_ref().expect("static tableau");
                // A trivial group has no non-identity operator; it counts as size 0.
                let v = if t.n_generators() == 0 {
                    0.0
                } else {
                    t.operator_size(rng, params.opsize_samples())?
                };
                out.push((obs.name().to_string(), v));
            }
            Observable::TopbottomMi => {
                if r.boundary != Boundary::FREE || g.topology != Topology::Cylinder {
                    return Err(Error::WrongTopology {
                        expected: "cylinder with two free edges".into(),
                        found: format!(
                            "{} with top {}, bottom {}",
                            g.topology, r.boundary.top, r.boundary.bottom
                        ),
                    });
                }
                if dynamics.is_none() {
                    dynamics = Some(run_dynamics(r)?);
                }
                let v = dynamics.as_ref().expect("set").top_bottom_mutual_info()?;
                out.push((obs.name().to_string(), v as f64));
            }
            Observable::BdHalfEntropy | Observable::BdSymsProfile => {
                let group = group.as_ref().expect("boundary group");
                let table = Ring::new(group, top_ring(&g))?.interval_entropies();
                if obs == Observable::BdHalfEntropy {
                    out.push((
                        obs.name().to_string(),
                        translation_mean(&table, g.width / 2),
                    ));
                } else {
                    for la in 1..g.width {
                        out.push((format!("bd_syms@{la}"), translation_mean(&table, la)));
                    }
                }
            }
            Observable::BdMiAntipodal | Observable::BdMiProfile => {
                let group = group.as_ref().expect("boundary group");
                let table = Ring::new(group, top_ring(&g))?.antipodal_mutual_info();
                if obs == Observable::BdMiAntipodal {
                    let w = params.bd_width(g.width).min(g.width / 2);
                    out.push((obs.name().to_string(), translation_mean(&table, w)));
                } else {
                    for len in 1..=g.width / 2 {
                        out.push((format!("bd_mi@{len}"), translation_mean(&table, len)));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One aggregated observable in one cell. `seed0..seed1` is the range of
/// replicate indices that contributed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: Model,
    #[serde(rename = "L")]
    pub width: usize,
    #[serde(rename = "Ltau")]
    pub height: usize,
    pub p: f64,
    pub obs: String,
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub seed0: u64,
    pub seed1: u64,
    pub secs: f64,
}

impl ResultRow {
    fn key(&self) -> (Model, usize, usize, u64, String) {
        (
            self.model,
            self.width,
            self.height,
            self.p.to_bits(),
            self.obs.clone(),
        )
    }

    /// Sample variance recovered from `(se, n)`.
    fn variance(&self) -> f64 {
        self.se * self.se * self.n as f64
    }
}

/// Mean and standard error `s / sqrt(n)`; the error is 0 for one sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

const CSV_HEADER: [&str; 11] = [
    "model", "L", "Ltau", "p", "obs", "mean", "se", "n", "seed0", "seed1", "secs",
];

impl ResultTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.write_csv_with_comments(w, &[])
    }

    /// Writes `# `-prefixed comment lines before the header.
    pub fn write_csv_with_comments<W: Write>(&self, mut w: W, comments: &[String]) -> Result<()> {
        for line in comments {
            for part in line.lines() {
                writeln!(w, "# {part}")?;
            }
        }
        let mut out = csv::Writer::from_writer(w);
        if self.rows.is_empty() {
            out.write_record(CSV_HEADER)?;
        }
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header {}", CSV_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(k + 2, |p| p.line() as usize);
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |name: &str| Error::Parse {
                line,
                reason: format!(
                    "bad {name} `{}`",
                    field(CSV_HEADER.iter().position(|h| *h == name).unwrap_or(0))
                ),
            };
            // Parsed with `str::parse` so floats round-trip exactly.
            let num = |i: usize| field(i).parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
            let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(CSV_HEADER[i]));
            rows.push(ResultRow {
                model: field(0).parse()?,
                width: int(1)? as usize,
                height: int(2)? as usize,
                p: num(3)?,
                obs: field(4).to_string(),
                mean: num(5)?,
                se: num(6)?,
                n: int(7)? as usize,
                seed0: int(8)?,
                seed1: int(9)?,
                secs: num(10)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.rows)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self {
            rows: serde_json::from_str(text)?,
        })
    }

    /// Copy with all wall times zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut t = self.clone();
        for row in &mut t.rows {
            row.secs = 0.0;
        }
        t
    }

    /// Rows of observable `obs`.
    pub fn observable<'a>(&'a self, obs: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.obs == obs)
    }

    /// Pools tables row by row. Rows of the same `(model, L, Ltau, p, obs)`
    /// combine as one run over the union of their replicates, which must
    /// be disjoint.
    pub fn merge<'a>(tables: impl IntoIterator<Item = &'a ResultTable>) -> Result<Self> {
        let mut order: Vec<(Model, usize, usize, u64, String)> = Vec::new();
        let mut groups: HashMap<(Model, usize, usize, u64, String), Vec<ResultRow>> =
            HashMap::new();
        for table in tables {
            for row in &table.rows {
                let key = row.key();
                let group = groups.entry(key.clone()).or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                });
                if let Some(other) = group
                    .iter()
                    .find(|o| row.seed0 < o.seed1 && o.seed0 < row.seed1)
                {
                    return Err(Error::Config(format!(
                        "overlapping replicates {}..{} and {}..{} for {} at L={} Ltau={} p={}",
                        row.seed0,
                        row.seed1,
                        other.seed0,
                        other.seed1,
                        row.obs,
                        row.width,
                        row.height,
                        row.p
                    )));
                }
                group.push(row.clone());
            }
        }
        let rows = order.into_iter().map(|key| pool(&groups[&key])).collect();
        Ok(Self { rows })
    }
}

fn pool(parts: &[ResultRow]) -> ResultRow {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let n: usize = parts.iter().map(|r| r.n).sum();
    let nf = n as f64;
    let mean = parts.iter().map(|r| r.mean * r.n as f64).sum::<f64>() / nf;
    // Within-part plus between-part sums of squares.
    let ss: f64 = parts
        .iter()
        .map(|r| (r.n as f64 - 1.0) * r.variance() + r.n as f64 * (r.mean - mean).powi(2))
        .sum();
    let se = if n < 2 {
        0.0
    } else {
        (ss / (nf - 1.0) / nf).sqrt()
    };
    ResultRow {
        mean,
        se,
        n,
        seed0: parts.iter().map(|r| r.seed0).min().expect("non-empty"),
        seed1: parts.iter().map(|r| r.seed1).max().expect("non-empty"),
        secs: parts.iter().map(|r| r.secs).sum(),
        ..parts[0].clone()
    }
}

struct TaskOutput {
    values: Vec<(String, f64)>,
    secs: f64,
}

fn run_task(cfg: &SweepConfig, cell: Cell, replicate: u64) -> Result<TaskOutput> {
    let start = Instant::now();
    let seed = realization_seed(cfg, cell, replicate);
    let g = Geometry::new(cfg.model, cell.width, cell.height, cfg.topology)?;
    let r = Realization::sample(g, cfg.boundary(), cell.p, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let values = evaluate(&r, &cfg.observables, &cfg.regions, &mut rng).map_err(|e| {
        Error::Config(format!(
            "cell L={} Ltau={} p={} replicate {replicate}: {e}",
            cell.width, cell.height, cell.p
        ))
    })?;
    Ok(TaskOutput {
        values,
        secs: start.elapsed().as_secs_f64(),
    })
}

/// Sets the number of sweep worker threads. Only the first call takes
/// effect.
#[cfg(feature = "parallel")]
pub fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Runs every cell of the sweep. Any failing realization aborts the sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let cells = cfg.cells();
    let reps = cfg.realizations as u64;
    let tasks: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..reps).map(move |k| (c, cfg.first_replicate + k)))
        .collect();
    let run = |&(c, k): &(usize, u64)| run_task(cfg, cells[c], k);
    #[cfg(feature = "parallel")]
    let outputs: Vec<Result<TaskOutput>> = {
        use rayon::prelude::*;
        tasks.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Vec<Result<TaskOutput>> = tasks.iter().map(run).collect();

    let mut rows = Vec::new();
    let mut outputs = outputs.into_iter();
    for cell in &cells {
        let chunk: Vec<TaskOutput> = outputs
            .by_ref()
            .take(cfg.realizations)
            .collect::<Result<_>>()?;
        let names: Vec<&str> = chunk[0].values.iter().map(|(n, _)| n.as_str()).collect();
        let secs: f64 = chunk.iter().map(|t| t.secs).sum();
        for (j, name) in names.iter().enumerate() {
            let samples: Vec<f64> = chunk.iter().map(|t| t.values[j].1).collect();
            let (mean, se) = mean_and_se(&samples);
            rows.push(ResultRow {
                model: cfg.model,
                width: cell.width,
                height: cell.height,
                p: cell.p,
                obs: name.to_string(),
                mean,
                se,
                n: samples.len(),
                seed0: cfg.first_replicate,
                seed1: cfg.first_replicate + reps,
                secs: secs / names.len() as f64,
            });
        }
    }
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(obs: &[Observable]) -> SweepConfig {
        SweepConfig {
            model: Model::Rtpm,
            topology: Topology::Cylinder,
            top: Edge::Free,
            bottom: Edge::Free,
            sizes: vec![4, 6],
            height: HeightRule::Ratio { ratios: vec![1.0] },
            p: vec![0.5, 0.9],
            realizations: 6,
            base_seed: 11,
            first_replicate: 0,
            observables: obs.to_vec(),
            regions: RegionParams::default(),
        }
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            model = "rxpm"
            sizes = [8]
            height = { rule = "power", z = 1.0 }
            p = [0.5]
            realizations = 3
            observables = ["scf", "symi_antipodal"]
        "#;
        let cfg = SweepConfig::from_toml(text).unwrap();
        assert_eq!(cfg.topology, Topology::Torus);
        assert_eq!(cfg.height.heights(8), vec![8]);
        assert_eq!(cfg.regions.antipodal_width(cfg.model), 2);
        let again = SweepConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = config(&[Observable::Scf]);
        cfg.realizations = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = config(&[Observable::Scf]);
        cfg.p = vec![1.2];
        assert!(cfg.validate().is_err());
        let mut cfg = config(&[Observable::Scf]);
        cfg.topology = Topology::Torus;
        cfg.bottom = Edge::Fixed;
        assert!(cfg.validate().is_err());
        assert!(SweepConfig::from_toml("model = \"rtpm\"\nbogus = 1").is_err());
        assert!("nonsense".parse::<Observable>().is_err());
    }

    #[test]
    fn single_realization_has_zero_error() {
        let mut cfg = config(&[Observable::Scf]);
        cfg.sizes = vec![4];
        cfg.p = vec![0.5];
        cfg.realizations = 1;
        let t = run_sweep(&cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].n, 1);
        assert_eq!(t.rows[0].se, 0.0);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let cfg = config(&[
            Observable::Scf,
            Observable::TopbottomMi,
            Observable::BdMiProfile,
        ]);
        let a = run_sweep(&cfg).unwrap().without_timing();
        let b = run_sweep(&cfg).unwrap().without_timing();
        assert_eq!(a, b);
        assert_eq!(a.observable("bd_mi@2").count(), 4);
    }

    #[test]
    fn seeds_are_distinct_across_cells_and_replicates() {
        let cfg = config(&[Observable::Scf]);
        let mut seen = std::collections::HashSet::new();
        for cell in cfg.cells() {
            for k in 0..200 {
                assert!(seen.insert(realization_seed(&cfg, cell, k)));
            }
        }
    }

    #[test]
    fn sweep_matches_direct_evaluation() {
        let cfg = config(&[Observable::Scf, Observable::BdHalfEntropy]);
        let t = run_sweep(&cfg).unwrap();
        let cell = cfg.cells()[1];
        let mut scf = Vec::new();
        let mut half = Vec::new();
        for k in 0..cfg.realizations as u64 {
            let g = Geometry::cylinder(cfg.model, cell.width, cell.height).unwrap();
            let r = Realization::sample(g, Boundary::FREE, cell.p, realization_seed(&cfg, cell, k))
                .unwrap();
            let tab = SymmetryTableau::from_realization(&r);
            scf.push(tab.config_entropy() as f64);
            let group = tab.boundary_group(&r.boundary_sites());
            let vals: Vec<f64> = (0..g.width)
                .map(|s| {
                    let a: Vec<usize> = (s..s + g.width / 2)
                        .map(|i| g.site(i % g.width, 0))
                        .collect();
                    group.sym_entropy(&a).unwrap() as f64
                })
                .collect();
            half.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        let row = |obs: &str| {
            t.rows
                .iter()
                .find(|r| r.obs == obs && r.width == cell.width && r.p == cell.p)
                .unwrap()
                .clone()
        };
        let (m, se) = mean_and_se(&scf);
        assert_eq!((row("scf").mean, row("scf").se), (m, se));
        assert!((row("bd_half_entropy").mean - mean_and_se(&half).0).abs() < 1e-12);
    }

    #[test]
    fn static_and_dynamic_boundary_paths_agree() {
        let mut cfg = config(&[Observable::BdSymsProfile, Observable::BdMiAntipodal]);
        cfg.model = Model::Rxpm;
        cfg.sizes = vec![6];
        cfg.bottom = Edge::Fixed;
        for cell in cfg.cells() {
            for k in 0..4 {
                let g = Geometry::cylinder(cfg.model, cell.width, cell.height).unwrap();
                let r =
                    Realization::sample(g, cfg.boundary(), cell.p, realization_seed(&cfg, cell, k))
                        .unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let dynamic = evaluate(&r, &cfg.observables, &cfg.regions, &mut rng).unwrap();
                let tab = SymmetryTableau::from_realization(&r);
                let group = tab.boundary_group(&r.boundary_sites());
                let ring = Ring::new(&group, top_ring(&g)).unwrap();
                let table = ring.interval_entropies();
                for la in 1..g.width {
                    let (name, v) = &dynamic[la - 1];
                    assert_eq!(name, &format!("bd_syms@{la}"));
                    assert_eq!(*v, translation_mean(&table, la));
                }
            }
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let t = run_sweep(&config(&[Observable::Scf, Observable::Opsize])).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("model,L,Ltau,p,obs,mean,se,n,seed0,seed1,secs\n"));
        assert_eq!(ResultTable::read_csv(&buf[..]).unwrap(), t);
        assert_eq!(ResultTable::from_json(&t.to_json().unwrap()).unwrap(), t);
        let mut commented = Vec::new();
        t.write_csv_with_comments(&mut commented, &["rpm sweep\nseed 11".into()]).unwrap();
        assert!(commented.starts_with(b"# rpm sweep\n# seed 11\nmodel,"));
        assert_eq!(ResultTable::read_csv(&commented[..]).unwrap(), t);
        let mut empty = Vec::new();
        ResultTable::default().write_csv(&mut empty).unwrap();
        assert_eq!(
            ResultTable::read_csv(&empty[..]).unwrap(),
            ResultTable::default()
        );
    }

    #[test]
    fn merge_of_halves_equals_full_run() {
        let mut cfg = config(&[Observable::Scf, Observable::TopbottomMi]);
        cfg.realizations = 10;
        let full = run_sweep(&cfg).unwrap();
        cfg.realizations = 5;
        let first = run_sweep(&cfg).unwrap();
        cfg.first_replicate = 5;
        let second = run_sweep(&cfg).unwrap();
        let merged = ResultTable::merge([&first, &second]).unwrap();
        assert_eq!(merged.rows.len(), full.rows.len());
        for (m, f) in merged.rows.iter().zip(&full.rows) {
            assert_eq!((m.n, m.seed0, m.seed1), (f.n, f.seed0, f.seed1));
            assert!((m.mean - f.mean).abs() < 1e-12);
            assert!((m.se - f.se).abs() < 1e-12);
        }
        assert_eq!(
            ResultTable::merge([&full, &ResultTable::default()]).unwrap(),
            full
        );
        assert!(ResultTable::merge([&first, &first]).is_err());
    }

    #[test]
    fn pooled_variance_matches_concatenated_samples() {
        let a = [1.0, 4.0, 2.0];
        let b = [7.0, 3.0, 3.0, 0.5];
        let row = |v: &[f64], s0: u64| {
            let (mean, se) = mean_and_se(v);
            ResultRow {
                model: Model::Rtpm,
                width: 4,
                height: 4,
                p: 0.5,
                obs: "x".into(),
                mean,
                se,
                n: v.len(),
                seed0: s0,
                seed1: s0 + v.len() as u64,
                secs: 0.0,
            }
        };
        let pooled = pool(&[row(&a, 0), row(&b, 3)]);
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let (m, se) = mean_and_se(&all);
        assert!((pooled.mean - m).abs() < 1e-12);
        assert!((pooled.se - se).abs() < 1e-12);
    }

    #[test]
    fn failing_cells_abort_the_sweep() {
        let mut cfg = config(&[Observable::TopbottomMi]);
        cfg.bottom = Edge::Fixed;
        assert!(run_sweep(&cfg).is_err());
    }
}

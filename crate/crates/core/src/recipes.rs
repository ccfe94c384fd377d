//! Scaled-down reproductions of the figures and the exponent table.
//!
//! Figure ids follow the order of the figures in the source article. Each
//! recipe has two scales: `smoke` (seconds, for tests) and `desk` (the
//! sizes and ensemble sizes used by the acceptance suite).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::automaton::run_dynamics_with_snapshot;
use crate::error::{Error, Result};
use crate::harness::{run_sweep, HeightRule, Observable, RegionParams, ResultTable, SweepConfig};
use crate::lattice::{Boundary, Edge, Geometry, Model, Realization, Topology};
use crate::scaling::{
    antipodal_cross_ratio, dynamic_points, estimate_crossing, fit_collapse, fit_dynamic_collapse,
    fit_log_sin, fit_power_tail, profile, series_by_size, write_plot_files, CollapseOptions,
    DynamicOptions, LogBase, PlotSpec,
};

pub const BASE_SEED: u64 = 0x5EED_0743;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Smoke,
    Desk,
}

impl FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Scale::Smoke),
            "desk" => Ok(Scale::Desk),
            _ => Err(Error::Config(format!("unknown scale `{s}` (smoke, desk)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Smoke => "smoke",
            Scale::Desk => "desk",
        })
    }
}

#[derive(Clone, Copy, Debug)]
enum Analysis {
    Plot(Observable),
    Crossing(Observable),
    Collapse { obs: Observable, p0: f64, nu0: f64 },
    Density,
    /// `z: Some(_)` fixes the dynamical exponent; the free fit is still
    /// reported alongside.
    Dynamic { obs: Observable, p: f64, z: Option<f64> },
    Boundary { p: f64 },
}

#[derive(Clone, Copy, Debug)]
enum Plan {
    Sweep {
        config: fn(Scale) -> SweepConfig,
        analysis: Analysis,
    },
    Snapshots {
        model: Model,
        bottom: Edge,
        ps: &'static [f64],
    },
    Group(&'static [&'static str]),
    Table,
}

pub struct Recipe {
    pub id: &'static str,
    pub title: &'static str,
    plan: Plan,
}

impl fmt::Debug for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Recipe").field("id", &self.id).finish()
    }
}

fn pick<T>(scale: Scale, smoke: T, desk: T) -> T {
    match scale {
        Scale::Smoke => smoke,
        Scale::Desk => desk,
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| ((lo + step * k as f64) * 1e6).round() / 1e6).collect()
}

fn base(model: Model, observables: Vec<Observable>) -> SweepConfig {
    SweepConfig {
        model,
        topology: Topology::Torus,
        top: Edge::Free,
        bottom: Edge::Free,
        sizes: vec![],
        height: HeightRule::Ratio { ratios: vec![1.0] },
        p: vec![],
        realizations: 0,
        base_seed: BASE_SEED,
        first_replicate: 0,
        observables,
        regions: RegionParams::default(),
    }
}

const Z_TRIANGULAR: f64 = 1.697;

fn opsize(model: Model, s: Scale) -> SweepConfig {
    SweepConfig {
        sizes: pick(s, vec![4, 6], vec![8, 12, 16]),
        p: pick(s, vec![0.6, 0.8, 1.0], grid(0.5, 1.0, 0.05)),
        realizations: pick(s, 8, 200),
        ..base(model, vec![Observable::Opsize])
    }
}

fn opsize_rtpm(s: Scale) -> SweepConfig {
    opsize(Model::Rtpm, s)
}

fn opsize_rxpm(s: Scale) -> SweepConfig {
    opsize(Model::Rxpm, s)
}

fn rtpm_torus(s: Scale) -> SweepConfig {
    SweepConfig {
        sizes: pick(s, vec![4, 6], vec![8, 12, 16]),
        height: HeightRule::Power {
            z: Z_TRIANGULAR,
            scales: vec![1.0],
        },
        p: pick(
            s,
            vec![0.7, 0.8, 0.9],
            vec![0.70, 0.72, 0.74, 0.76, 0.78, 0.79, 0.80, 0.81, 0.82, 0.83, 0.84, 0.86, 0.88, 0.90],
        ),
        realizations: pick(s, 16, 1000),
        ..base(Model::Rtpm, vec![Observable::Scf, Observable::SymiAntipodal])
    }
}

fn rxpm_scf(s: Scale) -> SweepConfig {
    SweepConfig {
        sizes: pick(s, vec![4, 6], vec![8, 16, 24]),
        p: pick(
            s,
            vec![0.5, 0.9],
            vec![0.3, 0.4, 0.5, 0.6, 0.65, 0.7, 0.72, 0.74, 0.76, 0.78, 0.8, 0.85, 0.9],
        ),
        realizations: pick(s, 16, 500),
        ..base(Model::Rxpm, vec![Observable::Scf])
    }
}

fn rxpm_symi(s: Scale) -> SweepConfig {
    SweepConfig {
        sizes: pick(s, vec![6, 8], vec![12, 16, 24]),
        p: pick(s, vec![0.6, 0.75, 0.9], grid(0.60, 0.84, 0.02)),
        realizations: pick(s, 16, 500),
        ..base(Model::Rxpm, vec![Observable::SymiAntipodal])
    }
}

fn rxpm_strip(s: Scale) -> SweepConfig {
    SweepConfig {
        sizes: pick(s, vec![4, 8], vec![8, 16, 24]),
        p: pick(s, vec![0.5, 0.9], grid(0.3, 1.0, 0.05)),
        realizations: pick(s, 8, 200),
        ..base(Model::Rxpm, vec![Observable::SymsStrip])
    }
}

fn rtpm_topbottom(s: Scale) -> SweepConfig {
    SweepConfig {
        topology: Topology::Cylinder,
        sizes: pick(s, vec![4, 8], vec![8, 16, 32]),
        height: HeightRule::Power {
            z: Z_TRIANGULAR,
            scales: pick(
                s,
                vec![0.2, 0.8, 3.2],
                vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2],
            ),
        },
        p: pick(s, vec![0.81], vec![0.75, 0.81, 0.9]),
        realizations: pick(s, 16, 500),
        ..base(Model::Rtpm, vec![Observable::TopbottomMi])
    }
}

fn rxpm_topbottom(s: Scale) -> SweepConfig {
    SweepConfig {
        topology: Topology::Cylinder,
        sizes: pick(s, vec![12, 16], vec![16, 32]),
        height: HeightRule::Ratio {
            ratios: pick(
                s,
                vec![0.25, 0.5, 1.0, 2.0, 3.0],
                vec![0.25, 0.375, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0],
            ),
        },
        p: vec![0.743],
        realizations: pick(s, 16, 500),
        ..base(Model::Rxpm, vec![Observable::TopbottomMi])
    }
}

fn rtpm_boundary(s: Scale) -> SweepConfig {
    SweepConfig {
        topology: Topology::Cylinder,
        bottom: Edge::Fixed,
        sizes: pick(s, vec![8, 16], vec![8, 16, 32]),
        height: HeightRule::Power {
            z: Z_TRIANGULAR,
            scales: vec![1.0],
        },
        p: pick(s, vec![0.7, 0.8, 0.9], grid(0.70, 0.90, 0.02)),
        realizations: pick(s, 16, 300),
        ..base(
            Model::Rtpm,
            vec![Observable::BdMiAntipodal, Observable::BdHalfEntropy],
        )
    }
}

fn rxpm_boundary_transition(s: Scale) -> SweepConfig {
    SweepConfig {
        topology: Topology::Cylinder,
        bottom: Edge::Fixed,
        sizes: pick(s, vec![8, 16], vec![16, 32, 64]),
        height: HeightRule::Ratio { ratios: vec![2.0] },
        p: pick(s, vec![0.6, 0.75, 0.9], grid(0.60, 0.90, 0.02)),
        realizations: pick(s, 16, 200),
        ..base(
            Model::Rxpm,
            vec![Observable::BdHalfEntropy, Observable::BdMiAntipodal],
        )
    }
}

fn rxpm_boundary_critical(s: Scale) -> SweepConfig {
    SweepConfig {
        topology: Topology::Cylinder,
        bottom: Edge::Fixed,
        sizes: pick(s, vec![16], vec![32, 64]),
        height: HeightRule::Ratio { ratios: vec![2.0] },
        p: vec![0.743],
        realizations: pick(s, 16, 500),
        ..base(
            Model::Rxpm,
            vec![Observable::BdSymsProfile, Observable::BdMiProfile],
        )
    }
}

pub static RECIPES: &[Recipe] = &[
    Recipe {
        id: "fig3a",
        title: "operator size, triangular model",
        plan: Plan::Sweep {
            config: opsize_rtpm,
            analysis: Analysis::Plot(Observable::Opsize),
        },
    },
    Recipe {
        id: "fig3b",
        title: "operator size, X model",
        plan: Plan::Sweep {
            config: opsize_rxpm,
            analysis: Analysis::Plot(Observable::Opsize),
        },
    },
    Recipe {
        id: "fig3",
        title: "operator size",
        plan: Plan::Group(&["fig3a", "fig3b"]),
    },
    Recipe {
        id: "fig4a",
        title: "configuration entropy crossing, triangular model",
        plan: Plan::Sweep {
            config: rtpm_torus,
            analysis: Analysis::Crossing(Observable::Scf),
        },
    },
    Recipe {
        id: "fig4b",
        title: "configuration entropy collapse, triangular model",
        plan: Plan::Sweep {
            config: rtpm_torus,
            analysis: Analysis::Collapse {
                obs: Observable::Scf,
                p0: 0.81,
                nu0: 1.21,
            },
        },
    },
    Recipe {
        id: "fig4c",
        title: "configuration entropy density, X model",
        plan: Plan::Sweep {
            config: rxpm_scf,
            analysis: Analysis::Density,
        },
    },
    Recipe {
        id: "fig4d",
        title: "configuration entropy collapse, X model",
        plan: Plan::Sweep {
            config: rxpm_scf,
            analysis: Analysis::Collapse {
                obs: Observable::Scf,
                p0: 0.743,
                nu0: 1.3,
            },
        },
    },
    Recipe {
        id: "fig4",
        title: "configuration entropy",
        plan: Plan::Group(&["fig4a", "fig4b", "fig4c", "fig4d"]),
    },
    Recipe {
        id: "fig5b",
        title: "antipodal symmetry mutual information collapse, triangular model",
        plan: Plan::Sweep {
            config: rtpm_torus,
            analysis: Analysis::Collapse {
                obs: Observable::SymiAntipodal,
                p0: 0.81,
                nu0: 1.21,
            },
        },
    },
    Recipe {
        id: "fig5d",
        title: "antipodal symmetry mutual information collapse, X model",
        plan: Plan::Sweep {
            config: rxpm_symi,
            analysis: Analysis::Collapse {
                obs: Observable::SymiAntipodal,
                p0: 0.743,
                nu0: 1.3,
            },
        },
    },
    Recipe {
        id: "fig5",
        title: "antipodal symmetry mutual information",
        plan: Plan::Group(&["fig5b", "fig5d"]),
    },
    Recipe {
        id: "fig6",
        title: "strip symmetry entropy, X model",
        plan: Plan::Sweep {
            config: rxpm_strip,
            analysis: Analysis::Plot(Observable::SymsStrip),
        },
    },
    Recipe {
        id: "fig10",
        title: "automaton snapshots, triangular model, free edges",
        plan: Plan::Snapshots {
            model: Model::Rtpm,
            bottom: Edge::Free,
            ps: &[0.9, 0.81, 0.75],
        },
    },
    Recipe {
        id: "fig12",
        title: "top-bottom symmetry mutual information, triangular model",
        plan: Plan::Sweep {
            config: rtpm_topbottom,
            analysis: Analysis::Dynamic {
                obs: Observable::TopbottomMi,
                p: 0.81,
                z: None,
            },
        },
    },
    Recipe {
        id: "fig13",
        title: "automaton snapshots, X model, free edges",
        plan: Plan::Snapshots {
            model: Model::Rxpm,
            bottom: Edge::Free,
            ps: &[0.8, 0.743, 0.7],
        },
    },
    Recipe {
        id: "fig15",
        title: "top-bottom symmetry mutual information, X model",
        plan: Plan::Sweep {
            config: rxpm_topbottom,
            analysis: Analysis::Dynamic {
                obs: Observable::TopbottomMi,
                p: 0.743,
                z: Some(1.0),
            },
        },
    },
    Recipe {
        id: "fig17",
        title: "automaton snapshots, triangular model, fixed bottom",
        plan: Plan::Snapshots {
            model: Model::Rtpm,
            bottom: Edge::Fixed,
            ps: &[0.9, 0.81, 0.75],
        },
    },
    Recipe {
        id: "fig18",
        title: "boundary transition, triangular model",
        plan: Plan::Sweep {
            config: rtpm_boundary,
            analysis: Analysis::Collapse {
                obs: Observable::BdMiAntipodal,
                p0: 0.81,
                nu0: 2.43,
            },
        },
    },
    Recipe {
        id: "fig20",
        title: "automaton snapshots, X model, fixed bottom",
        plan: Plan::Snapshots {
            model: Model::Rxpm,
            bottom: Edge::Fixed,
            ps: &[0.8, 0.743, 0.7],
        },
    },
    Recipe {
        id: "fig21",
        title: "boundary half entropy, X model",
        plan: Plan::Sweep {
            config: rxpm_boundary_transition,
            analysis: Analysis::Plot(Observable::BdHalfEntropy),
        },
    },
    Recipe {
        id: "fig22",
        title: "boundary mutual information collapse, X model",
        plan: Plan::Sweep {
            config: rxpm_boundary_transition,
            analysis: Analysis::Collapse {
                obs: Observable::BdMiAntipodal,
                p0: 0.743,
                nu0: 1.3,
            },
        },
    },
    Recipe {
        id: "fig23",
        title: "boundary criticality, X model",
        plan: Plan::Sweep {
            config: rxpm_boundary_critical,
            analysis: Analysis::Boundary { p: 0.743 },
        },
    },
    Recipe {
        id: "fig19",
        title: "boundary transition and criticality, X model",
        plan: Plan::Group(&["fig21", "fig22", "fig23"]),
    },
    Recipe {
        id: "table1",
        title: "critical exponents of the X model boundary",
        plan: Plan::Table,
    },
];

pub fn find(id: &str) -> Result<&'static Recipe> {
    RECIPES.iter().find(|r| r.id == id).ok_or_else(|| {
        let ids: Vec<&str> = RECIPES.iter().map(|r| r.id).collect();
        Error::Config(format!("unknown recipe `{id}`; known: {}", ids.join(", ")))
    })
}

/// Sweep configuration of a sweep-based recipe.
pub fn config(recipe: &Recipe, scale: Scale) -> Option<SweepConfig> {
    match recipe.plan {
        Plan::Sweep { config, .. } => Some(config(scale)),
        _ => None,
    }
}

/// Runs `recipe`, writing its data, plot scripts and report into `out_dir`.
/// Returns the report.
pub fn run(recipe: &Recipe, scale: Scale, out_dir: &Path, meta: &Value) -> Result<Value> {
    fs::create_dir_all(out_dir)?;
    let report = match recipe.plan {
        Plan::Sweep { config, analysis } => {
            let cfg = config(scale);
            let table = run_sweep(&cfg)?;
            let header = serde_json::to_string(&json!({ "meta": meta, "config": cfg }))?;
            table.write_csv_with_comments(
                fs::File::create(out_dir.join(format!("{}.csv", recipe.id)))?,
                &[header],
            )?;
            // A failed fit still leaves the data and a raw plot behind.
            let (fit, plot) = analyze(analysis, &table, &cfg).unwrap_or_else(|e| {
                (json!({ "error": e.to_string() }), raw_plot(&table, cfg.observables[0]))
            });
            let mut files = vec![format!("{}.csv", recipe.id)];
            files.extend(write_plot_files(out_dir, &format!("{}_plot", recipe.id), &plot)?);
            json!({ "id": recipe.id, "title": recipe.title, "scale": scale, "files": files, "fit": fit })
        }
        Plan::Snapshots { model, bottom, ps } => snapshots(recipe, scale, out_dir, model, bottom, ps)?,
        Plan::Group(ids) => {
            let parts = ids
                .iter()
                .map(|id| run(find(id)?, scale, out_dir, meta))
                .collect::<Result<Vec<_>>>()?;
            json!({ "id": recipe.id, "title": recipe.title, "scale": scale, "parts": parts })
        }
        Plan::Table => table1(scale, out_dir, meta)?,
    };
    fs::write(
        out_dir.join(format!("{}_report.json", recipe.id)),
        serde_json::to_string_pretty(&json!({ "meta": meta, "report": report }))?,
    )?;
    Ok(report)
}

fn raw_plot(table: &ResultTable, obs: Observable) -> PlotSpec {
    PlotSpec::scatter(
        obs.name(),
        "p",
        obs.name(),
        table
            .observable(obs.name())
            .map(|r| (r.width as f64, r.p, r.mean))
            .collect(),
    )
}

fn analyze(a: Analysis, table: &ResultTable, cfg: &SweepConfig) -> Result<(Value, PlotSpec)> {
    let scatter = |obs: Observable| raw_plot(table, obs);
    Ok(match a {
        Analysis::Plot(obs) => (Value::Null, scatter(obs)),
        Analysis::Crossing(obs) => {
            let c = estimate_crossing(&series_by_size(table, obs.name())?, 100, BASE_SEED)?;
            (json!(c), scatter(obs))
        }
        Analysis::Collapse { obs, p0, nu0 } => {
            let f = fit_collapse(
                &series_by_size(table, obs.name())?,
                p0,
                nu0,
                &CollapseOptions::default(),
            )?;
            let plot = PlotSpec::scatter(
                &format!("{} collapse", obs.name()),
                "(p - p_c) L^{1/nu}",
                obs.name(),
                f.points.iter().map(|p| (p.size, p.x, p.y)).collect(),
            );
            (json!(f), plot)
        }
        Analysis::Density => {
            let rows: Vec<Value> = table
                .observable(Observable::Scf.name())
                .map(|r| {
                    let area = (r.width * r.height) as f64;
                    json!({ "L": r.width, "p": r.p, "density": r.mean / area, "se": r.se / area })
                })
                .collect();
            let plot = PlotSpec::scatter(
                "configuration entropy density",
                "p",
                "S_cf / (L L_tau)",
                table
                    .observable(Observable::Scf.name())
                    .map(|r| (r.width as f64, r.p, r.mean / (r.width * r.height) as f64))
                    .collect(),
            );
            (json!({ "density": rows }), plot)
        }
        Analysis::Dynamic { obs, p, z } => {
            let pts = dynamic_points(table, obs.name(), p);
            let f = fit_dynamic_collapse(
                &pts,
                &DynamicOptions {
                    fixed_z: z,
                    ..Default::default()
                },
            )?;
            let mut report = json!(f);
            if z.is_some() {
                report["free_z"] = match fit_dynamic_collapse(&pts, &DynamicOptions::default()) {
                    Ok(free) => json!(free.z),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
            let plot = PlotSpec {
                log_x: true,
                log_y: true,
                ..PlotSpec::scatter(
                    &format!("{} dynamical collapse", obs.name()),
                    "L_tau / L^z",
                    obs.name(),
                    f.points.iter().map(|p| (p.size, p.x, p.y)).collect(),
                )
            };
            (report, plot)
        }
        Analysis::Boundary { p } => {
            let mut fits = Vec::new();
            let mut points = Vec::new();
            for &l in &cfg.sizes {
                let b = boundary_fits(table, l, p, 100, BASE_SEED)?;
                points.extend(
                    profile(table, "bd_syms", l, p)
                        .into_iter()
                        .map(|(a, y, _)| (l as f64, crate::scaling::chord(a, 0.0, l as f64), y)),
                );
                fits.push(b);
            }
            let plot = PlotSpec {
                log_x: true,
                ..PlotSpec::scatter(
                    "boundary symmetry entropy",
                    "(L/pi) sin(pi L_A / L)",
                    "symS_A",
                    points,
                )
            };
            (json!(fits), plot)
        }
    })
}

/// Log-sin and cross-ratio fits of the boundary profiles at one width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFits {
    pub width: usize,
    /// Coefficient of the natural log over `la_min <= L_A <= L - la_min`.
    pub c: f64,
    pub c_err: f64,
    /// Same window, base-2 log.
    pub c_log2: f64,
    /// Natural-log coefficient over every `L_A`.
    pub c_all: f64,
    pub la_min: usize,
    pub delta: f64,
    pub delta_err: f64,
    /// Cross-ratio window of the power-law fit.
    pub chi_max: f64,
    pub n_power: usize,
}

const CHI_MAX: f64 = 0.5;

/// Shortest segment in the log-sin window: short segments carry lattice
/// corrections.
pub fn log_sin_cutoff(width: usize) -> usize {
    (width / 8).max(1)
}

fn fit_profiles(syms: &[(f64, f64)], mi: &[(f64, f64)], width: f64) -> Result<(f64, f64, f64, usize)> {
    let cut = log_sin_cutoff(width as usize) as f64;
    let (la, y): (Vec<f64>, Vec<f64>) = syms
        .iter()
        .filter(|q| q.0 >= cut && q.0 <= width - cut)
        .map(|q| (q.0, q.1))
        .unzip();
    let c = fit_log_sin(&la, &y, width, LogBase::E)?.c;
    let c2 = fit_log_sin(&la, &y, width, LogBase::Two)?.c;
    let pos: Vec<(f64, f64)> = mi
        .iter()
        .filter(|q| q.1 > 0.0)
        .map(|q| antipodal_cross_ratio(q.0, width).map(|chi| (chi, q.1)))
        .collect::<Result<_>>()?;
    let chi: Vec<f64> = pos.iter().map(|q| q.0).collect();
    let v: Vec<f64> = pos.iter().map(|q| q.1).collect();
    let pf = fit_power_tail(&chi, &v, CHI_MAX)?;
    Ok((c, c2, pf.delta, pf.n))
}

/// Boundary criticality fits at width `l`, with parametric-bootstrap
/// errors over `n_boot` redraws of the profile means.
pub fn boundary_fits(table: &ResultTable, l: usize, p: f64, n_boot: usize, seed: u64) -> Result<BoundaryFits> {
    let syms = profile(table, "bd_syms", l, p);
    let mi = profile(table, "bd_mi", l, p);
    let strip = |v: &[(f64, f64, f64)]| v.iter().map(|q| (q.0, q.1)).collect::<Vec<_>>();
    let (c, c2, delta, n) = fit_profiles(&strip(&syms), &strip(&mi), l as f64)?;
    let c_all = fit_log_sin(
        &syms.iter().map(|q| q.0).collect::<Vec<_>>(),
        &syms.iter().map(|q| q.1).collect::<Vec<_>>(),
        l as f64,
        LogBase::E,
    )?
    .c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |v: &[(f64, f64, f64)]| -> Vec<(f64, f64)> {
        v.iter()
            .map(|q| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (q.0, q.1 + q.2 * z)
            })
            .collect()
    };
    let (mut cs, mut ds) = (Vec::new(), Vec::new());
    for _ in 0..n_boot {
        let (s, m) = (draw(&syms), draw(&mi));
        if let Ok((cb, _, db, _)) = fit_profiles(&s, &m, l as f64) {
            cs.push(cb);
            ds.push(db);
        }
    }
    Ok(BoundaryFits {
        width: l,
        c,
        c_err: std_dev(&cs),
        c_log2: c2,
        c_all,
        la_min: log_sin_cutoff(l),
        delta,
        delta_err: std_dev(&ds),
        chi_max: CHI_MAX,
        n_power: n,
    })
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn snapshots(
    recipe: &Recipe,
    scale: Scale,
    out_dir: &Path,
    model: Model,
    bottom: Edge,
    ps: &[f64],
) -> Result<Value> {
    let (width, height) = pick(scale, (16, 24), (64, 128));
    let mut files = Vec::new();
    for (k, &p) in ps.iter().enumerate() {
        let g = Geometry::new(model, width, height, Topology::Cylinder)?;
        let r = Realization::sample(g, Boundary { top: Edge::Free, bottom }, p, BASE_SEED + k as u64)?;
        let mut rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
        let (_, snap) = run_dynamics_with_snapshot(&r, &mut rng)?;
        let name = format!("{}_p{p}.txt", recipe.id);
        fs::write(out_dir.join(&name), snap.to_string())?;
        files.push(name);
    }
    Ok(json!({
        "id": recipe.id, "title": recipe.title, "scale": scale, "files": files,
        "legend": { "B": "sampled generator", "G": "boundary group support", "O": "bulk-only support", ".": "empty" },
    }))
}

fn table1(scale: Scale, out_dir: &Path, meta: &Value) -> Result<Value> {
    let nu = run(find("fig5d")?, scale, out_dir, meta)?;
    let dyn_ = run(find("fig15")?, scale, out_dir, meta)?;
    let bd = run(find("fig23")?, scale, out_dir, meta)?;
    let largest = bd["fit"]
        .as_array()
        .and_then(|v| v.last())
        .cloned()
        .unwrap_or(Value::Null);
    let entry = |v: &Value, e: &Value| json!({ "value": v, "err": e });
    let rows = json!({
        "z": entry(&dyn_["fit"]["z"], &dyn_["fit"]["z_err"]),
        "h0": entry(&dyn_["fit"]["h0"], &dyn_["fit"]["h0_err"]),
        "h1": entry(&dyn_["fit"]["h1"], &dyn_["fit"]["h1_err"]),
        "nu": entry(&nu["fit"]["nu"], &nu["fit"]["nu_err"]),
        "p_c": entry(&nu["fit"]["p_c"], &nu["fit"]["p_c_err"]),
        "c": entry(&largest["c"], &largest["c_err"]),
        "delta": entry(&largest["delta"], &largest["delta_err"]),
    });
    let mut text = String::from("quantity,value,err\n");
    for k in ["z", "h0", "h1", "nu", "p_c", "c", "delta"] {
        text.push_str(&format!("{k},{},{}\n", rows[k]["value"], rows[k]["err"]));
    }
    fs::write(out_dir.join("table1.csv"), text)?;
    Ok(json!({ "id": "table1", "scale": scale, "exponents": rows, "files": ["table1.csv"] }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_unique_and_groups_resolve() {
        let mut ids: Vec<&str> = RECIPES.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        let n = ids.len();
        ids.dedup();
        assert_eq!(ids.len(), n);
        for r in RECIPES {
            if let Plan::Group(members) = r.plan {
                for m in members {
                    assert!(find(m).is_ok(), "{m}");
                }
            }
        }
    }

    #[test]
    fn unknown_id_lists_known_ids() {
        let e = find("fig99").unwrap_err().to_string();
        assert!(e.contains("fig4b") && e.contains("table1"));
    }

    #[test]
    fn every_sweep_config_is_valid() {
        for r in RECIPES {
            for s in [Scale::Smoke, Scale::Desk] {
                if let Some(c) = config(r, s) {
                    c.validate().unwrap_or_else(|e| panic!("{} {s}: {e}", r.id));
                }
            }
        }
    }

    #[test]
    fn smoke_run_writes_artifacts() {
        let dir = std::env::temp_dir().join(format!("recipe-smoke-{}", std::process::id()));
        let report = run(find("fig4a").unwrap(), Scale::Smoke, &dir, &json!({})).unwrap();
        for f in report["files"].as_array().unwrap() {
            assert!(dir.join(f.as_str().unwrap()).exists(), "{f}");
        }
        assert!(dir.join("fig4a_report.json").exists());
        let snap = run(find("fig13").unwrap(), Scale::Smoke, &dir, &json!({})).unwrap();
        let text = fs::read_to_string(dir.join(snap["files"][0].as_str().unwrap())).unwrap();
        assert_eq!(text.lines().count(), 24);
        assert!(text.lines().all(|l| l.len() == 16));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn boundary_fits_recover_exact_profiles() {
        use crate::harness::ResultRow;
        let l = 32usize;
        let mut rows = Vec::new();
        let mut push = |obs: String, mean: f64| {
            rows.push(ResultRow {
                model: Model::Rxpm,
                width: l,
                height: 64,
                p: 0.743,
                obs,
                mean,
                se: 0.0,
                n: 1,
                seed0: 0,
                seed1: 1,
                secs: 0.0,
            })
        };
        for a in 1..l {
            let y = 3.0 * crate::scaling::chord(a as f64, 0.0, l as f64).ln() + 1.0;
            push(format!("bd_syms@{a}"), y);
        }
        for len in 1..=l / 2 {
            let chi = antipodal_cross_ratio(len as f64, l as f64).unwrap();
            push(format!("bd_mi@{len}"), 5.0 * chi * chi);
        }
        let t = ResultTable { rows };
        let b = boundary_fits(&t, l, 0.743, 5, 1).unwrap();
        assert!((b.c - 3.0).abs() < 1e-9, "{b:?}");
        assert!((b.c_log2 - 3.0 * std::f64::consts::LN_2).abs() < 1e-9);
        assert!((b.c_all - 3.0).abs() < 1e-9 && b.la_min == 4);
        assert!((b.delta - 2.0).abs() < 1e-9);
        assert_eq!(b.c_err, 0.0);
    }
}

//! `rpm fit`: scaling fits of sweep CSV files.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use plaquette::harness::ResultTable;
use plaquette::scaling::{
    dynamic_points, estimate_crossing, fit_collapse, fit_dynamic_collapse, fit_log_sin, fit_power_tail,
    profile, series_by_size, write_plot_files, CollapseOptions, DynamicOptions, LogBase, PlotSpec,
    antipodal_cross_ratio,
};
use serde::Serialize;
use serde_json::json;

use crate::{metadata, print_json, usage, CliError};

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// Sweep CSV files; rows are pooled across files.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Directory for scaled data and plot scripts.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    boot: usize,
    #[arg(long, default_value_t = 1)]
    boot_seed: u64,
    #[command(subcommand)]
    kind: FitKind,
}

#[derive(Subcommand, Debug, Serialize)]
enum FitKind {
    /// Crossing point of the curves for different sizes.
    Crossing {
        #[arg(long)]
        obs: String,
    },
    /// Collapse onto f((p - p_c) L^{1/nu}).
    Collapse {
        #[arg(long)]
        obs: String,
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        nu0: f64,
    },
    /// Collapse onto h(L_tau / L^z) with early and late fits.
    Dynamic {
        #[arg(long)]
        obs: String,
        #[arg(long)]
        p: f64,
        /// Fixes z instead of fitting it.
        #[arg(long)]
        z: Option<f64>,
        #[arg(long, default_value_t = 0.3)]
        early_max: f64,
        #[arg(long, default_value_t = 1.5)]
        late_min: f64,
    },
    /// c log[(L/pi) sin(pi L_A / L)] + b over `bd_syms@LA` rows.
    Logsin {
        #[arg(long = "L")]
        width: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value = "bd_syms")]
        prefix: String,
        #[arg(long, default_value = "e")]
        base: LogBase,
        /// Fits only `la_min <= L_A <= L - la_min`.
        #[arg(long, default_value_t = 1)]
        la_min: usize,
    },
    /// Power law in the antipodal cross-ratio over `bd_mi@len` rows.
    Power {
        #[arg(long = "L")]
        width: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value = "bd_mi")]
        prefix: String,
        #[arg(long, default_value_t = 0.5)]
        chi_max: f64,
    },
}

fn load(inputs: &[PathBuf]) -> Result<ResultTable, CliError> {
    let tables = inputs
        .iter()
        .map(|p| ResultTable::read_csv(fs::File::open(p)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResultTable::merge(&tables)?)
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let table = load(&a.inputs)?;
    let (report, plot) = match &a.kind {
        FitKind::Crossing { obs } => {
            let c = estimate_crossing(&series_by_size(&table, obs)?, a.boot, a.boot_seed)?;
            (json!(c), None)
        }
        FitKind::Collapse { obs, p0, nu0 } => {
            let opts = CollapseOptions {
                n_boot: a.boot,
                seed: a.boot_seed,
                ..Default::default()
            };
            let f = fit_collapse(&series_by_size(&table, obs)?, *p0, *nu0, &opts)?;
            let plot = PlotSpec::scatter(
                &format!("{obs} collapse"),
                "(p - p_c) L^{1/nu}",
                obs,
                f.points.iter().map(|p| (p.size, p.x, p.y)).collect(),
            );
            (json!(f), Some(plot))
        }
        FitKind::Dynamic { obs, p, z, early_max, late_min } => {
            if early_max >= late_min {
                return Err(usage("--early-max must be below --late-min"));
            }
            let opts = DynamicOptions {
                early_max: *early_max,
                late_min: *late_min,
                fixed_z: *z,
                n_boot: a.boot,
                seed: a.boot_seed,
                ..Default::default()
            };
            let f = fit_dynamic_collapse(&dynamic_points(&table, obs, *p), &opts)?;
            let mut plot = PlotSpec::scatter(
                &format!("{obs} dynamical collapse"),
                "L_tau / L^z",
                obs,
                f.points.iter().map(|p| (p.size, p.x, p.y)).collect(),
            );
            plot.log_x = true;
            plot.log_y = true;
            (json!(f), Some(plot))
        }
        FitKind::Logsin { width, p, prefix, base, la_min } => {
            let cut = *la_min as f64;
            let pts: Vec<_> = profile(&table, prefix, *width, *p)
                .into_iter()
                .filter(|q| q.0 >= cut && q.0 <= *width as f64 - cut)
                .collect();
            let la: Vec<f64> = pts.iter().map(|q| q.0).collect();
            let y: Vec<f64> = pts.iter().map(|q| q.1).collect();
            let f = fit_log_sin(&la, &y, *width as f64, *base)?;
            let plot = PlotSpec::scatter(
                "boundary symmetry entropy",
                "(L/pi) sin(pi L_A / L)",
                prefix,
                pts.iter()
                    .map(|q| (*width as f64, plaquette::scaling::chord(q.0, 0.0, *width as f64), q.1))
                    .collect(),
            );
            (json!(f), Some(PlotSpec { log_x: true, ..plot }))
        }
        FitKind::Power { width, p, prefix, chi_max } => {
            // Zero means carry no information on a log scale.
            let pts: Vec<_> = profile(&table, prefix, *width, *p)
                .into_iter()
                .filter(|q| q.1 > 0.0)
                .collect();
            let chi: Vec<f64> = pts
                .iter()
                .map(|q| antipodal_cross_ratio(q.0, *width as f64))
                .collect::<Result<_, _>>()?;
            let y: Vec<f64> = pts.iter().map(|q| q.1).collect();
            let f = fit_power_tail(&chi, &y, *chi_max)?;
            let plot = PlotSpec::scatter(
                "boundary mutual information",
                "cross-ratio",
                prefix,
                chi.iter().zip(&y).map(|(c, v)| (*width as f64, *c, *v)).collect(),
            );
            (json!(f), Some(PlotSpec { log_x: true, log_y: true, ..plot }))
        }
    };
    let mut files = Vec::new();
    if let (Some(dir), Some(plot)) = (&a.out_dir, &plot) {
        fs::create_dir_all(dir)?;
        files = write_plot_files(dir, "fit", plot)?;
    }
    print_json(&json!({
        "meta": metadata("fit", a, json!({ "bootstrap": a.boot_seed })),
        "report": report,
        "files": files,
    }))
}

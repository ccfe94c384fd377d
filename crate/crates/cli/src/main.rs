//! `rpm`: command-line driver for random plaquette model simulations.

mod fit;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plaquette::automaton::{layer_profile, run_dynamics, run_dynamics_with_snapshot};
use plaquette::harness::{evaluate, run_sweep, set_threads, Observable, RegionParams, SweepConfig};
use plaquette::lattice::{Boundary, Edge, Geometry, Model, Realization, Topology};
use plaquette::recipes::{self, Scale};
use plaquette::stabilizer::check_equivalence;
use plaquette::symmetry::{Snapshot, SymmetryTableau};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "rpm", version, about = "Random plaquette models over GF(2)")]
struct Cli {
    /// Worker threads for sweeps (default: one per core).
    #[arg(long, global = true, env = "RPM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact observables of one disorder realization.
    Sample(SampleArgs),
    /// Disorder-averaged sweep described by a TOML file.
    Sweep(SweepArgs),
    /// Layer-by-layer automaton run on a cylinder.
    Dynamics(DynamicsArgs),
    /// Space-time picture of symmetry operators.
    Snapshot(SnapshotArgs),
    /// Stabilizer cross-check of the measured cluster state.
    Xcheck(XcheckArgs),
    /// Finite-size-scaling fits of sweep results.
    Fit(fit::FitArgs),
    /// Scaled-down reproduction of a figure or table.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug, Serialize)]
struct LatticeArgs {
    #[arg(long, default_value = "rtpm")]
    model: Model,
    /// Lattice width.
    #[arg(long = "L")]
    width: Option<usize>,
    /// Lattice height (default: the width).
    #[arg(long = "Ltau")]
    height: Option<usize>,
    #[arg(long, default_value = "torus")]
    topology: Topology,
    #[arg(long, default_value = "free")]
    top: Edge,
    #[arg(long, default_value = "free")]
    bottom: Edge,
    /// Plaquette probability.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replays a realization saved with `--save` instead of sampling one.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Saves the realization in replay format.
    #[arg(long)]
    save: Option<PathBuf>,
}

impl LatticeArgs {
    fn realization(&self) -> Result<Realization, CliError> {
        let r = match &self.replay {
            Some(path) => fs::read_to_string(path)?.parse::<Realization>()?,
            None => {
                let width = self.width.ok_or_else(|| usage("--L is required without --replay"))?;
                let p = self.p.ok_or_else(|| usage("--p is required without --replay"))?;
                let height = self.height.unwrap_or(width);
                let g = Geometry::new(self.model, width, height, self.topology).map_err(usage_err)?;
                let boundary = Boundary {
                    top: self.top,
                    bottom: self.bottom,
                };
                Realization::sample(g, boundary, p, self.seed).map_err(usage_err)?
            }
        };
        if let Some(path) = &self.save {
            fs::write(path, r.to_string())?;
        }
        Ok(r)
    }
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Comma-separated observables.
    #[arg(long = "obs", value_delimiter = ',', default_value = "scf")]
    observables: Vec<Observable>,
    #[arg(long)]
    antipodal_width: Option<usize>,
    #[arg(long)]
    strip_width: Option<usize>,
    #[arg(long)]
    bd_width: Option<usize>,
    #[arg(long)]
    opsize_samples: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Sweep configuration file.
    #[arg(long)]
    config: PathBuf,
    /// CSV output (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional JSON output.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Overrides the realization count.
    #[arg(long)]
    realizations: Option<usize>,
    /// Overrides the first replicate index.
    #[arg(long)]
    first_replicate: Option<u64>,
}

#[derive(Args, Debug, Serialize)]
struct DynamicsArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Prints per-layer statistics.
    #[arg(long)]
    profile: bool,
    /// Writes a space-time snapshot to this file.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SnapshotArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Seed for the sampled operator.
    #[arg(long, default_value_t = 0)]
    operator_seed: u64,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct XcheckArgs {
    #[command(flatten)]
    lattice: LatticeArgs,
    /// Seed for measurement outcomes.
    #[arg(long, default_value_t = 0)]
    outcome_seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ReproduceArgs {
    /// Figure or table id; `list` prints the known ids.
    id: String,
    #[arg(long, default_value = "smoke")]
    scale: Scale,
    #[arg(long, default_value = "reproduce")]
    out_dir: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
}

impl From<plaquette::Error> for CliError {
    fn from(e: plaquette::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.to_string())
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn usage_err(e: plaquette::Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Metadata attached to every output.
pub fn metadata(command: &str, args: &impl Serialize, seeds: Value) -> Value {
    json!({
        "tool": "rpm",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "seeds": seeds,
    })
}

pub fn print_json(v: &Value) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(plaquette::Error::from)?;
    writeln!(out).map_err(plaquette::Error::from)?;
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<(), CliError> {
    let r = a.lattice.realization()?;
    let params = RegionParams {
        antipodal_width: a.antipodal_width,
        strip_width: a.strip_width,
        bd_width: a.bd_width,
        opsize_samples: a.opsize_samples,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let values = evaluate(&r, &a.observables, &params, &mut rng)?;
    let map: serde_json::Map<String, Value> = values.into_iter().map(|(k, v)| (k, json!(v))).collect();
    print_json(&json!({
        "meta": metadata("sample", a, json!({ "disorder": r.seed })),
        "lattice": { "model": r.geometry.model, "L": r.geometry.width, "Ltau": r.geometry.height,
                     "topology": r.geometry.topology, "top": r.boundary.top, "bottom": r.boundary.bottom, "p": r.p },
        "values": map,
    }))
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config)?;
    let mut cfg = SweepConfig::from_toml(&text).map_err(usage_err)?;
    if let Some(n) = a.realizations {
        cfg.realizations = n;
    }
    if let Some(k) = a.first_replicate {
        cfg.first_replicate = k;
    }
    cfg.validate().map_err(usage_err)?;
    let table = run_sweep(&cfg)?;
    let meta = metadata(
        "sweep",
        &json!({ "flags": a, "config": cfg }),
        json!({ "base_seed": cfg.base_seed, "replicates": [cfg.first_replicate, cfg.first_replicate + cfg.realizations as u64] }),
    );
    let comments = vec![serde_json::to_string(&meta).map_err(plaquette::Error::from)?];
    match &a.out {
        Some(path) => table.write_csv_with_comments(fs::File::create(path)?, &comments)?,
        None => table.write_csv_with_comments(std::io::stdout().lock(), &comments)?,
    }
    if let Some(path) = &a.json {
        let v = json!({ "meta": meta, "rows": table.rows });
        fs::write(path, serde_json::to_string_pretty(&v).map_err(plaquette::Error::from)?)?;
    }
    Ok(())
}

fn require_cylinder(r: &Realization) -> Result<(), CliError> {
    if r.geometry.topology != Topology::Cylinder || r.boundary.top != Edge::Free {
        return Err(usage("dynamics needs --topology cylinder with a free top edge"));
    }
    Ok(())
}

fn cmd_dynamics(a: &DynamicsArgs) -> Result<(), CliError> {
    let r = a.lattice.realization()?;
    require_cylinder(&r)?;
    let t = match &a.snapshot {
        Some(path) => {
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed ^ 0x5A5A);
            let (t, snap) = run_dynamics_with_snapshot(&r, &mut rng)?;
            fs::write(path, snap.to_string())?;
            t
        }
        None => run_dynamics(&r)?,
    };
    let group = t.boundary_group(r.boundary.bottom);
    let mut result = json!({
        "group_dim": t.group_dim,
        "config_entropy": t.config_entropy(r.boundary.bottom),
        "boundary_log_size": group.log_size(),
    });
    if r.boundary.bottom == Edge::Free && r.geometry.height >= 2 * r.geometry.model.edge_depth() {
        result["topbottom_mi"] = json!(t.top_bottom_mutual_info()?);
    }
    if a.profile {
        result["profile"] = json!(layer_profile(&r)?);
    }
    print_json(&json!({
        "meta": metadata("dynamics", a, json!({ "disorder": r.seed })),
        "result": result,
    }))
}

fn cmd_snapshot(a: &SnapshotArgs) -> Result<(), CliError> {
    let r = a.lattice.realization()?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.operator_seed);
    let snap: Snapshot = if r.geometry.topology == Topology::Cylinder && r.boundary.top == Edge::Free {
        run_dynamics_with_snapshot(&r, &mut rng)?.1
    } else {
        let t = SymmetryTableau::from_realization(&r);
        Snapshot::from_static(&r, &t, &mut rng)
    };
    let meta = metadata("snapshot", a, json!({ "disorder": r.seed, "operator": a.operator_seed }));
    let text = format!("# {}\n{snap}", serde_json::to_string(&meta).map_err(plaquette::Error::from)?);
    match &a.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_xcheck(a: &XcheckArgs) -> Result<(), CliError> {
    let r = a.lattice.realization()?;
    if r.geometry.model != Model::Rxpm || r.geometry.topology != Topology::Cylinder {
        return Err(usage("xcheck needs --model rxpm --topology cylinder"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.outcome_seed);
    let report = check_equivalence(&r, &mut rng)?;
    let holds = report.holds();
    print_json(&json!({
        "meta": metadata("xcheck", a, json!({ "disorder": r.seed, "outcomes": a.outcome_seed })),
        "holds": holds,
        "max_deviation": report.max_deviation(),
        "report": report,
    }))?;
    if holds {
        Ok(())
    } else {
        Err(CliError::Compute("equivalence bound violated".into()))
    }
}

fn cmd_reproduce(a: &ReproduceArgs) -> Result<(), CliError> {
    if a.id == "list" {
        for r in recipes::RECIPES {
            println!("{:8} {}", r.id, r.title);
        }
        return Ok(());
    }
    let recipe = recipes::find(&a.id).map_err(usage_err)?;
    fs::create_dir_all(&a.out_dir)?;
    let meta = metadata("reproduce", a, json!({ "base_seed": recipes::BASE_SEED }));
    let report = recipes::run(recipe, a.scale, &a.out_dir, &meta)?;
    print_json(&json!({ "meta": meta, "report": report }))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        set_threads(n)?;
    }
    match &cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Dynamics(a) => cmd_dynamics(a),
        Command::Snapshot(a) => cmd_snapshot(a),
        Command::Xcheck(a) => cmd_xcheck(a),
        Command::Fit(a) => fit::cmd_fit(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

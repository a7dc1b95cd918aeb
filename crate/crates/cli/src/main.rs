mod format;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use pnl_acm::bnb::NodeRecord;
use pnl_acm::scene::OutlierModel;
use pnl_acm::verify::verify_bounds;
use pnl_acm::{generate_scene, solve, BranchOrder, SceneConfig, SolverConfig};

use crate::format::{read_json, write_json, CorrespondenceFile, GroundTruthFile, ResultFile};

#[derive(Parser)]
#[command(
    name = "pnl",
    version,
    about = "Globally optimal rotation search for line correspondences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene and write its correspondences and ground truth.
    Simulate(SimulateArgs),
    /// Find the rotation with maximum consensus for a correspondence file.
    Solve(SolveArgs),
    /// Compare the closed-form h1/h2 bounds against a dense grid.
    VerifyBounds(VerifyArgs),
    /// Solve a batch of synthetic scenes and print one CSV row per run.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    lines: usize,
    #[arg(long, default_value_t = 0.5, value_parser = unit_ratio)]
    outlier_ratio: f64,
    /// Standard deviation of the normal perturbation, degrees.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    noise_deg: f64,
    #[arg(long, value_enum, default_value_t = OutlierArg::Uniform)]
    outlier_model: OutlierArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Correspondence file to write.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth file to write.
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Args)]
struct SolverArgs {
    /// Inlier threshold on |residual|.
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    min_edge: f64,
    #[arg(long, default_value_t = 1_000_000, value_parser = positive_usize)]
    max_nodes: usize,
    #[arg(long, value_enum, default_value_t = BranchArg::SplitLongest)]
    branch_order: BranchArg,
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    workers: usize,
    /// Node budget of the search inside each minimum-size cube; 0 stops at min-edge.
    #[arg(long, default_value_t = 4096)]
    leaf_budget: usize,
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    leaf_floor: f64,
}

impl SolverArgs {
    fn config(&self, record_nodes: bool) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            min_edge: self.min_edge,
            max_nodes: self.max_nodes,
            branch_order: self.branch_order.into(),
            workers: self.workers,
            leaf_budget: self.leaf_budget,
            leaf_floor: self.leaf_floor.min(self.min_edge),
            record_nodes,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Correspondence file to read.
    #[arg(long)]
    input: PathBuf,
    /// Result file to write.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-node CSV log.
    #[arg(long)]
    node_log: Option<PathBuf>,
    /// Write zero for all timings so reruns produce identical files.
    #[arg(long)]
    no_timing: bool,
    /// Ground-truth file; the rotation error is logged at info level.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 1000, value_parser = positive_usize)]
    trials: usize,
    /// Oracle samples per cube side.
    #[arg(long, default_value_t = 2000, value_parser = grid_size)]
    grid: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutlierArg {
    Uniform,
    Mismatch,
}

impl From<OutlierArg> for OutlierModel {
    fn from(a: OutlierArg) -> Self {
        match a {
            OutlierArg::Uniform => OutlierModel::Uniform,
            OutlierArg::Mismatch => OutlierModel::Mismatch,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    SplitLongest,
    Quadrisect,
}

impl From<BranchArg> for BranchOrder {
    fn from(a: BranchArg) -> Self {
        match a {
            BranchArg::SplitLongest => BranchOrder::SplitLongest,
            BranchArg::Quadrisect => BranchOrder::Quadrisect,
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|x| {
        if x > 0.0 {
            Ok(x)
        } else {
            Err("must be > 0".into())
        }
    })
}

fn non_negative(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|x| {
        if x >= 0.0 {
            Ok(x)
        } else {
            Err("must be >= 0".into())
        }
    })
}

fn unit_ratio(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|x| {
        if (0.0..=1.0).contains(&x) {
            Ok(x)
        } else {
            Err("must be in [0, 1]".into())
        }
    })
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be >= 1".into()),
        Ok(n) => Ok(n),
        Err(_) => Err(format!("`{s}` is not a positive integer")),
    }
}

fn grid_size(s: &str) -> Result<usize, String> {
    positive_usize(s).and_then(|n| {
        if n >= 2 {
            Ok(n)
        } else {
            Err("must be >= 2".into())
        }
    })
}

fn scene_config(args: &SceneArgs, seed: u64) -> SceneConfig {
    let mut cfg = SceneConfig::new(
        args.lines,
        args.outlier_ratio,
        args.noise_deg.to_radians(),
        seed,
    );
    cfg.outlier_model = args.outlier_model.into();
    cfg
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let scene = generate_scene(&scene_config(&args.scene, args.seed))?;
    info!(
        "generated {} lines, {} inliers",
        scene.lines.len(),
        scene.ground_truth.inlier_count()
    );
    write_json(
        &args.out,
        &CorrespondenceFile::from_correspondences(&scene.correspondences()),
    )?;
    write_json(&args.gt, &GroundTruthFile::from(&scene.ground_truth))
}

fn write_node_log(path: &Path, nodes: &[NodeRecord], timing: bool) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "node,depth,alpha_lo,alpha_hi,phi_lo,phi_hi,lower,upper,t_ms"
    )?;
    for r in nodes {
        let t = if timing { r.t_ms } else { 0.0 };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.node,
            r.depth,
            r.cube.alpha_lo,
            r.cube.alpha_hi,
            r.cube.phi_lo,
            r.cube.phi_hi,
            r.lower,
            r.upper,
            t
        )?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let doc: CorrespondenceFile = read_json(&args.input)?;
    let data = doc.to_correspondences()?;
    let cfg = args.solver.config(args.node_log.is_some());
    debug!("solver config {cfg:?}");
    let result = solve(&data, &cfg)?;
    info!(
        "consensus {} upper {} after {} nodes ({:?})",
        result.consensus,
        result.upper_bound_global,
        result.stats.nodes_expanded,
        result.stats.termination
    );
    if let Some(path) = &args.gt {
        let gt: GroundTruthFile = read_json(path)?;
        info!(
            "rotation error {:e} rad",
            result.rotation.angle_to(&gt.rotation()?)
        );
    }
    write_json(&args.out, &ResultFile::new(&result, !args.no_timing))?;
    if let Some(path) = &args.node_log {
        write_node_log(path, &result.nodes, !args.no_timing)?;
    }
    Ok(())
}

/// Returns whether the bounds passed.
fn cmd_verify_bounds(args: &VerifyArgs) -> Result<bool> {
    let report = verify_bounds(args.trials, args.grid, args.seed);
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(path) = &args.out {
        write_json(path, &report)?;
    }
    if !report.passed {
        eprintln!(
            "soundness violation {:e} exceeds tolerance",
            report.max_violation
        );
    }
    Ok(report.passed)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let cfg = args.solver.config(false);
    println!(
        "seed,lines,outlier_ratio,inliers,consensus,gap,rotation_error,nodes,termination,time_ms"
    );
    for seed in args.seed..args.seed + args.runs as u64 {
        let scene = generate_scene(&scene_config(&args.scene, seed))?;
        let result = solve(&scene.correspondences(), &cfg)?;
        let err = result.rotation.angle_to(&scene.ground_truth.rotation);
        println!(
            "{seed},{},{},{},{},{},{err:e},{},{:?},{:.3}",
            args.scene.lines,
            args.scene.outlier_ratio,
            scene.ground_truth.inlier_count(),
            result.consensus,
            result.gap,
            result.stats.nodes_expanded,
            result.stats.termination,
            result.stats.wall_time.as_secs_f64() * 1e3
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PNL_LOG", "off")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::Solve(a) => cmd_solve(a).map(|_| true),
        Command::VerifyBounds(a) => cmd_verify_bounds(a),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dualarm_pipeline::experiments::{optimizer_summary, run, run_optimize};
use dualarm_pipeline::{data, Mode, Result, Scenario};
use dualarm_shape::{
    build_shape_space, estimate_initial_pose, estimate_upright_pose, infer_latent, warp_grasp_poses, CpdParams,
    GraspPoses, InferenceParams, PointCloud, ShapeSpace,
};
use nalgebra::Vector3;
use serde_json::json;

#[derive(Parser)]
#[command(name = "dualarm", version, about = "Dual-arm pick and lift experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct BenchmarkArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Report JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; trial k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Zero all wall-clock fields so reruns compare byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One optimizer run of a lift scenario.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        closure: Switch,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Wall-clock budget, seconds.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pose estimation, shape registration, goal resolution and reaching.
    Pick(BenchmarkArgs),
    /// Seeded lifts with closure disabled and enabled.
    LiftComparison(BenchmarkArgs),
    /// Lift with fixed end-effector orientations.
    BarLift(BenchmarkArgs),
    /// Registers training clouds to a canonical cloud and extracts a shape space.
    BuildShapespace {
        #[arg(long)]
        canonical: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        training: Vec<PathBuf>,
        /// Grasp annotation in the canonical frame.
        #[arg(long)]
        grasps: Option<PathBuf>,
        #[arg(long, default_value_t = dualarm_shape::DEFAULT_COMPONENTS)]
        components: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fits a shape space to an observed cloud and prints warped grasps.
    Infer {
        #[arg(long)]
        shape_space: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        /// Treat the object as resting upright on a horizontal surface.
        #[arg(long)]
        upright: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes the synthetic robot, scenes, clouds, shape space and scenarios.
    GenerateData {
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(path, text)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn benchmark(args: &BenchmarkArgs, mode: Mode) -> Result<()> {
    let mut scenario = Scenario::load(&args.scenario)?;
    if scenario.mode != mode {
        return Err(dualarm_pipeline::Error::Scenario(format!(
            "{} holds a {} scenario",
            args.scenario.display(),
            scenario.mode
        )));
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
        scenario.seeds = None;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(dualarm_pipeline::Error::Scenario("trial count must be at least 1".into()));
        }
        if scenario.seeds.as_ref().is_some_and(|s| s.len() < trials) {
            scenario.seeds = None;
        }
        scenario.trials = trials;
    }
    let mut report = run(&scenario)?;
    if args.no_timing {
        report = report.without_timing();
    }
    print!("{}", report.table());
    if let Some(out) = &args.out {
        emit(&report.to_json(), Some(out))?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Optimize {
            scenario,
            closure,
            seed,
            budget,
            report,
        } => {
            let mut scenario = Scenario::load(&scenario)?;
            if let Some(b) = budget {
                scenario.optimizer.budget = b;
                scenario.optimizer.validate()?;
            }
            let result = run_optimize(&scenario, matches!(closure, Switch::On), seed)?;
            println!(
                "success {} in {:.3} s, {} iterations, {} restarts, max t_dev {:.4} m, max o_dev {:.4} rad",
                result.success,
                result.wall_time,
                result.iterations,
                result.restarts,
                result.max_t_dev(),
                result.max_o_dev()
            );
            if let Some(path) = report {
                let body = json!({
                    "result": result,
                    "summary": optimizer_summary(&result),
                });
                emit(&serde_json::to_string_pretty(&body).expect("report serializes"), Some(&path))?;
            }
        }
        Command::Pick(args) => benchmark(&args, Mode::Pick)?,
        Command::LiftComparison(args) => benchmark(&args, Mode::LiftComparison)?,
        Command::BarLift(args) => benchmark(&args, Mode::BarLift)?,
        Command::BuildShapespace {
            canonical,
            training,
            grasps,
            components,
            out,
        } => {
            let canonical = PointCloud::load(&canonical)?;
            let training = training
                .iter()
                .map(PointCloud::load)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let grasps = match grasps {
                Some(path) => GraspPoses::load(path)?,
                None => GraspPoses::default(),
            };
            let space = build_shape_space(&canonical, &training, components, &CpdParams::default(), grasps)?;
            space.save(&out)?;
            println!(
                "{} components, variances {:?}",
                space.dim(),
                space.variances().iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
            );
        }
        Command::Infer {
            shape_space,
            cloud,
            upright,
            out,
        } => {
            let space = ShapeSpace::load(&shape_space)?;
            let observed = PointCloud::load(&cloud)?;
            let (pose, params) = if upright {
                let up = Vector3::z();
                let params = InferenceParams {
                    rotation_axis: Some(up.into()),
                    ..InferenceParams::default()
                };
                (estimate_upright_pose(&observed, &space, &up)?, params)
            } else {
                (estimate_initial_pose(&observed, &space)?, InferenceParams::default())
            };
            let latent = infer_latent(&space, &observed, &pose, &params)?;
            let field = space.field(latent.coordinates.as_slice())?;
            let grasps = warp_grasp_poses(&field, space.grasps()).transformed(&latent.alignment);
            let body = json!({
                "coordinates": latent.coordinates.as_slice(),
                "alignment": latent.alignment,
                "residual": latent.residual,
                "converged": latent.converged,
                "iterations": latent.iterations,
                "grasps": grasps,
            });
            emit(&serde_json::to_string_pretty(&body).expect("result serializes"), out.as_deref())?;
        }
        Command::GenerateData { out } => {
            data::generate(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use bwkit_cli::checks::Suite;
use bwkit_cli::commands::{self, DistMethod, GenOptions, ObjectiveKind, Route};
use bwkit_cli::io::{to_json, write_atomic};
use bwkit_core::{FixedPointOptions, SetDistanceOptions, SolverSettings};
use clap::{Args, Parser, Subcommand};

/// Bures-Wasserstein distances, set distances, barycenters and BW-ball
/// constrained programs on positive-definite matrices.
#[derive(Parser)]
#[command(name = "bwkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolverArgs {
    /// Feasibility and gap tolerance of the SDP solver.
    #[arg(long, global = true, env = "BWKIT_SOLVER_TOL")]
    solver_tol: Option<f64>,
    /// Interior-point iteration cap.
    #[arg(long, global = true)]
    solver_max_iter: Option<usize>,
}

impl SolverArgs {
    fn settings(&self) -> Result<SolverSettings, String> {
        let mut s = SolverSettings::default();
        if let Some(tol) = self.solver_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(format!("solver tolerance must lie in (0, 1), got {tol}"));
            }
            s = s.with_tolerance(tol);
        }
        if let Some(it) = self.solver_max_iter {
            s.max_iterations = it;
        }
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Command {
    /// BW distance between two matrix files.
    Dist {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = DistMethod::Both)]
        method: DistMethod,
    },
    /// BW distance between two convex sets by alternating minimization.
    SetDist {
        spec_a: PathBuf,
        spec_b: PathBuf,
        /// Starting point in the first set.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = SetDistanceOptions::default().tol)]
        tol: f64,
        #[arg(long, default_value_t = SetDistanceOptions::default().max_iter)]
        max_iter: usize,
    },
    /// Weighted barycenter of the matrices listed in a problem file.
    Barycenter {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = Route::Both)]
        route: Route,
        /// Fixed-point stopping tolerance.
        #[arg(long, default_value_t = FixedPointOptions::default().tol)]
        fp_tol: f64,
        #[arg(long, default_value_t = FixedPointOptions::default().max_iter)]
        fp_max_iter: usize,
    },
    /// Minimize an objective inside the intersection of BW balls.
    BallSolve {
        balls: PathBuf,
        /// Optional convex set the solution must also lie in.
        base_set: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ObjectiveKind::Frobenius)]
        objective: ObjectiveKind,
        /// Coefficient matrix C of the linear objective Tr(C X).
        #[arg(long)]
        coef: Option<PathBuf>,
    },
    /// Write seeded random positive-definite matrices.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100.0)]
        cond: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run an invariant suite.
    Check {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let settings = match cli.solver.settings() {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let report = match cli.command {
        Command::Dist { a, b, method } => commands::dist(&a, &b, method, &settings),
        Command::SetDist {
            spec_a,
            spec_b,
            init,
            tol,
            max_iter,
        } => commands::set_dist(
            &spec_a,
            &spec_b,
            init.as_deref(),
            &SetDistanceOptions { tol, max_iter },
            &settings,
        ),
        Command::Barycenter {
            problem,
            route,
            fp_tol,
            fp_max_iter,
        } => commands::barycenter(
            &problem,
            route,
            &FixedPointOptions {
                tol: fp_tol,
                max_iter: fp_max_iter,
            },
            &settings,
        ),
        Command::BallSolve {
            balls,
            base_set,
            objective,
            coef,
        } => commands::ball_solve(objective, coef.as_deref(), &balls, base_set.as_deref(), &settings),
        Command::Gen {
            n,
            seed,
            cond,
            count,
            out_dir,
        } => commands::gen(
            &GenOptions {
                n,
                seed,
                cond,
                count,
                out_dir,
            },
            &settings,
        ),
        Command::Check { suite, seed } => commands::check(suite, seed, &settings),
    };
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    let text = to_json(&report);
    match &cli.out {
        Some(path) => {
            if let Err(e) = write_atomic(path, &text) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(report.exit_code() as u8)
}

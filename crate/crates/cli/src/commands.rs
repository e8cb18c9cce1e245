//! Subcommand implementations. Each returns a [`RunReport`]; nothing is
//! printed here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bwkit_core::programs::BALL_SOUNDNESS_TOLERANCE;
use bwkit_core::random::random_pd;
use bwkit_core::{
    bw_distance_squared, eig_sym, fixed_point_barycenter, set_distance, solve_ball_constrained, solve_barycenter_sdp,
    solve_distance, BarycenterProblem, BarycenterResult, FixedPointOptions, ObjectiveSpec, SetDistanceOptions,
    SolverSettings, SymmetricMatrix,
};
use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::checks::{self, Suite};
use crate::error::CliError;
use crate::io::{to_json, Loader, MatrixFile};
use crate::report::{Check, RunReport, SettingsRecord};

/// `|sdp - closed| <= SDP_RELATIVE_TOLERANCE * (1 + closed)`
pub const SDP_RELATIVE_TOLERANCE: f64 = 1e-5;
/// `||K^T K - B||_F <= TIGHTNESS_TOLERANCE * (1 + ||B||_F)`
pub const TIGHTNESS_TOLERANCE: f64 = 1e-4;
/// Closed-form cross-check of a set distance.
pub const SET_DISTANCE_TOLERANCE: f64 = 1e-4;
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-6;
/// Allowed rise between consecutive alternating-minimization values.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;
pub const PSD_TOLERANCE: f64 = 1e-7;
/// The two barycenter routes must reach the same objective within this.
pub const ROUTE_OBJECTIVE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistMethod {
    Closed,
    Sdp,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Sdp,
    Fp,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveKind {
    Frobenius,
    Trace,
    Linear,
}

/// What a command produced before it is wrapped into a report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    pub settings: BTreeMap<String, Value>,
    /// Set when the command finished but did not reach its goal, e.g. an
    /// iteration cap. The report then carries status `solver_failure`.
    pub incomplete: Option<String>,
}

pub fn run(
    command: &str,
    settings: &SolverSettings,
    body: impl FnOnce(&mut Loader) -> Result<Outcome, CliError>,
) -> RunReport {
    let start = Instant::now();
    let mut loader = Loader::default();
    let outcome = body(&mut loader);
    let mut record = SettingsRecord::new(settings);
    let (result, checks, status, error) = match outcome {
        Ok(o) => {
            record.extra = o.settings;
            let failed: Vec<&str> = o.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let (status, error) = if !failed.is_empty() {
                (
                    "validation_failed",
                    Some(format!("checks failed: {}", failed.join(", "))),
                )
            } else if let Some(msg) = o.incomplete {
                ("solver_failure", Some(msg))
            } else {
                ("ok", None)
            };
            (o.result, o.checks, status, error)
        }
        Err(e) => (Value::Null, Vec::new(), e.status(), Some(e.to_string())),
    };
    RunReport {
        command: command.to_owned(),
        inputs: loader.inputs,
        settings: record,
        result,
        checks,
        status: status.to_owned(),
        error,
        duration_seconds: start.elapsed().as_secs_f64(),
    }
}

fn matrix_json(m: &SymmetricMatrix, name: &str) -> Value {
    serde_json::to_value(MatrixFile::from_symmetric(m, Some(name))).expect("matrix serializes")
}

fn rectangular_json(m: &nalgebra::DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    json!({"rows": m.nrows(), "cols": m.ncols(), "entries": rows})
}

fn psd_check(name: &str, x: &SymmetricMatrix) -> Result<Check, CliError> {
    let min = eig_sym(x)?.min_eigenvalue();
    Ok(Check::at_most(name, (-min).max(0.0), PSD_TOLERANCE))
}

pub fn dist(a: &Path, b: &Path, method: DistMethod, settings: &SolverSettings) -> RunReport {
    run("dist", settings, |ld| {
        let a = ld.pd_matrix("a", a)?;
        let b = ld.pd_matrix("b", b)?;
        // The closed form is always computed: it validates the SDP value.
        let closed = bw_distance_squared(&a, &b)?;
        let mut result = json!({
            "method": format!("{method:?}").to_lowercase(),
            "closed_form": {
                "distance_squared": closed.distance_squared,
                "distance": closed.distance,
                "fidelity_term": closed.fidelity_term,
                "clamped": closed.clamped,
            },
        });
        let mut checks = Vec::new();
        if method != DistMethod::Closed {
            let sdp = solve_distance(&a, &b, settings)?;
            let deviation = (sdp.distance_squared - closed.distance_squared).abs();
            result["sdp"] = json!({
                "distance_squared": sdp.distance_squared,
                "coupling": rectangular_json(&sdp.coupling),
                "tightness_residual": sdp.tightness_residual,
                "fidelity_estimate": sdp.fidelity_estimate,
                "solver_gap": sdp.solver_gap,
                "iterations": sdp.iterations,
            });
            result["deviation"] = json!(deviation);
            checks.push(Check::at_most(
                "sdp_vs_closed_form",
                deviation,
                SDP_RELATIVE_TOLERANCE * (1.0 + closed.distance_squared),
            ));
            checks.push(Check::at_most(
                "tightness_residual",
                sdp.tightness_residual,
                TIGHTNESS_TOLERANCE * (1.0 + b.frobenius_norm()),
            ));
        }
        Ok(Outcome {
            result,
            checks,
            ..Outcome::default()
        })
    })
}

pub fn set_dist(
    spec_a: &Path,
    spec_b: &Path,
    init: Option<&Path>,
    options: &SetDistanceOptions,
    settings: &SolverSettings,
) -> RunReport {
    run("set-dist", settings, |ld| {
        let sa = ld.set_spec("set_a", spec_a)?;
        let sb = ld.set_spec("set_b", spec_b)?;
        let init = init.map(|p| ld.matrix("init", p)).transpose()?;
        let r = set_distance(&sa, &sb, init.as_ref(), options, settings)?;
        let rise = r
            .objective_history
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0_f64, f64::max);
        let checks = vec![
            Check::at_most(
                "closed_form_deviation",
                r.closed_form_deviation(),
                SET_DISTANCE_TOLERANCE,
            ),
            Check::at_most("witness_a_membership", sa.violation(&r.witness_a), MEMBERSHIP_TOLERANCE),
            Check::at_most("witness_b_membership", sb.violation(&r.witness_b), MEMBERSHIP_TOLERANCE),
            Check::at_most("history_rise", rise, MONOTONICITY_TOLERANCE),
        ];
        let result = json!({
            "distance_squared": r.distance_squared,
            "closed_form_distance_squared": r.closed_form_distance_squared,
            "witness_a": matrix_json(&r.witness_a, "witness_a"),
            "witness_b": matrix_json(&r.witness_b, "witness_b"),
            "iterations": r.iterations,
            "converged": r.converged,
            "objective_history": r.objective_history,
            "certified_history": r.certified_history,
        });
        let settings = BTreeMap::from([
            ("tol".to_owned(), json!(options.tol)),
            ("max_iter".to_owned(), json!(options.max_iter)),
        ]);
        Ok(Outcome {
            result,
            checks,
            settings,
            incomplete: (!r.converged).then(|| format!("no convergence in {} iterations", r.iterations)),
        })
    })
}

fn barycenter_json(r: &BarycenterResult) -> Value {
    json!({
        "x": matrix_json(&r.x, r.route.as_str()),
        "objective": r.objective,
        "solver_objective": r.solver_objective,
        "iterations": r.iterations,
        "residual": r.residual,
        "converged": r.converged,
    })
}

fn barycenter_checks(p: &BarycenterProblem, r: &BarycenterResult, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let route = r.route.as_str();
    checks.push(psd_check(&format!("{route}_psd"), &r.x)?);
    if let Some(v) = r.solver_objective {
        // the solver's value is an upper bound that is tight at the optimum
        checks.push(Check::at_most(
            format!("{route}_solver_vs_closed_form"),
            (v - r.objective).abs(),
            SDP_RELATIVE_TOLERANCE * (1.0 + r.objective.abs()),
        ));
    }
    let recomputed = p.objective(&r.x)?;
    checks.push(Check::at_most(
        format!("{route}_objective_recomputed"),
        (recomputed - r.objective).abs(),
        SDP_RELATIVE_TOLERANCE * (1.0 + recomputed.abs()),
    ));
    Ok(())
}

pub fn barycenter(
    problem: &Path,
    route: Route,
    fp_options: &FixedPointOptions,
    settings: &SolverSettings,
) -> RunReport {
    run("barycenter", settings, |ld| {
        let p = ld.barycenter(problem)?;
        let mut result = json!({"route": format!("{route:?}").to_lowercase()});
        let mut checks = Vec::new();
        let mut incomplete = None;
        let sdp = match route {
            Route::Sdp | Route::Both => Some(solve_barycenter_sdp(&p, settings)?),
            Route::Fp => None,
        };
        let fp = match route {
            Route::Fp | Route::Both => Some(fixed_point_barycenter(&p, None, fp_options)?),
            Route::Sdp => None,
        };
        if let Some(r) = &sdp {
            barycenter_checks(&p, r, &mut checks)?;
            result["sdp"] = barycenter_json(r);
        }
        if let Some(r) = &fp {
            barycenter_checks(&p, r, &mut checks)?;
            result["fixed_point"] = barycenter_json(r);
            if !r.converged {
                incomplete = Some(format!("fixed point did not converge in {} iterations", r.iterations));
            }
        }
        if let (Some(s), Some(f)) = (&sdp, &fp) {
            result["max_entry_deviation"] = json!(s.x.max_abs_diff(&f.x));
            let gap = (s.objective - f.objective).abs();
            result["objective_deviation"] = json!(gap);
            checks.push(Check::at_most(
                "route_objective_deviation",
                gap,
                ROUTE_OBJECTIVE_TOLERANCE,
            ));
        }
        let settings = BTreeMap::from([
            ("fixed_point_tol".to_owned(), json!(fp_options.tol)),
            ("fixed_point_max_iter".to_owned(), json!(fp_options.max_iter)),
        ]);
        Ok(Outcome {
            result,
            checks,
            settings,
            incomplete,
        })
    })
}

pub fn ball_solve(
    objective: ObjectiveKind,
    linear_coef: Option<&Path>,
    balls: &Path,
    base_set: Option<&Path>,
    settings: &SolverSettings,
) -> RunReport {
    run("ball-solve", settings, |ld| {
        let objective = match (objective, linear_coef) {
            (ObjectiveKind::Frobenius, None) => ObjectiveSpec::FrobeniusNorm,
            (ObjectiveKind::Trace, None) => ObjectiveSpec::Trace,
            (ObjectiveKind::Linear, Some(p)) => ObjectiveSpec::Linear(ld.matrix("objective", p)?),
            (ObjectiveKind::Linear, None) => {
                return Err(CliError::Input("the linear objective needs --coef".into()));
            }
            (_, Some(_)) => return Err(CliError::Input("--coef only applies to the linear objective".into())),
        };
        let balls = ld.balls(balls)?;
        let base = base_set.map(|p| ld.set_spec("base_set", p)).transpose()?;
        let r = solve_ball_constrained(&objective, base.as_ref(), &balls, settings)?;
        let mut checks = vec![psd_check("psd", &r.x)?];
        for (i, (ball, d2)) in balls.iter().zip(&r.ball_distances).enumerate() {
            checks.push(Check::at_most(
                format!("ball_{}_excess", i + 1),
                d2 - ball.radius_squared,
                BALL_SOUNDNESS_TOLERANCE,
            ));
        }
        if let Some(s) = &base {
            checks.push(Check::at_most(
                "base_set_membership",
                s.violation(&r.x),
                MEMBERSHIP_TOLERANCE,
            ));
        }
        let result = json!({
            "objective": objective.name(),
            "x": matrix_json(&r.x, "x"),
            "value": r.value,
            "solver_value": r.solver_value,
            "ball_distances_squared": r.ball_distances,
            "radii_squared": balls.iter().map(|b| b.radius_squared).collect::<Vec<_>>(),
            "iterations": r.iterations,
        });
        Ok(Outcome {
            result,
            checks,
            ..Outcome::default()
        })
    })
}

pub struct GenOptions {
    pub n: usize,
    pub seed: u64,
    pub cond: f64,
    pub count: usize,
    pub out_dir: PathBuf,
}

/// Writes `matrix_000.json`, `matrix_001.json`, ... into `out_dir`.
pub fn gen(opts: &GenOptions, settings: &SolverSettings) -> RunReport {
    run("gen", settings, |_| {
        if opts.count == 0 {
            return Err(CliError::Input("count must be at least 1".into()));
        }
        fs::create_dir_all(&opts.out_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", opts.out_dir.display())))?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut files = Vec::with_capacity(opts.count);
        let mut checks = Vec::with_capacity(opts.count);
        for i in 0..opts.count {
            let m = random_pd(opts.n, opts.cond, &mut rng)?;
            let name = format!("matrix_{i:03}");
            let path = opts.out_dir.join(format!("{name}.json"));
            crate::io::write_atomic(&path, &to_json(&MatrixFile::from_symmetric(&m, Some(&name))))?;
            let e = eig_sym(&m)?;
            // the realized condition number may exceed the target only by round-off
            checks.push(Check::at_most(
                format!("{name}_condition"),
                e.max_eigenvalue() / e.min_eigenvalue(),
                opts.cond * (1.0 + 1e-9),
            ));
            files.push(path.display().to_string());
        }
        let settings = BTreeMap::from([
            ("n".to_owned(), json!(opts.n)),
            ("seed".to_owned(), json!(opts.seed)),
            ("cond".to_owned(), json!(opts.cond)),
            ("count".to_owned(), json!(opts.count)),
        ]);
        Ok(Outcome {
            result: json!({"files": files}),
            checks,
            settings,
            incomplete: None,
        })
    })
}

pub fn check(suite: Suite, seed: u64, settings: &SolverSettings) -> RunReport {
    run("check", settings, |_| {
        let checks = checks::run_suite(suite, seed, settings)?;
        let passed = checks.iter().filter(|c| c.passed).count();
        Ok(Outcome {
            result: json!({"suite": suite.as_str(), "passed": passed, "total": checks.len()}),
            checks,
            settings: BTreeMap::from([("seed".to_owned(), json!(seed))]),
            incomplete: None,
        })
    })
}

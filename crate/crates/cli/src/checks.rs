//! Invariant suites run by `bwkit check` and by the acceptance tests.
//!
//! Each property is reported once, as its worst value over all instances.

use bwkit_core::random::{random_orthogonal, random_pd};
use bwkit_core::{
    bw_distance_squared, fixed_point_barycenter, set_distance, solve_ball_constrained, solve_barycenter_sdp,
    solve_distance, solve_lemma, ConvexSetSpec, CouplingPlacement, FixedPointOptions, ObjectiveSpec, PdMatrix,
    SetDistanceOptions, SolverSettings, SymmetricMatrix,
};
use clap::ValueEnum;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::report::Check;
use crate::table1::{self, Table1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Metric,
    Lemma,
    Table1,
}

impl Suite {
    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Metric => "metric",
            Suite::Lemma => "lemma",
            Suite::Table1 => "table1",
        }
    }
}

pub fn run_suite(suite: Suite, seed: u64, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    match suite {
        Suite::Metric => metric_checks(200, seed),
        Suite::Lemma => lemma_checks(20, seed, settings),
        Suite::Table1 => table1_checks(&table1::bundled(), settings),
    }
}

/// Worst value of one property over a run.
struct Worst(f64);

impl Worst {
    fn new() -> Self {
        Worst(f64::NEG_INFINITY)
    }

    fn see(&mut self, v: f64) {
        // NaN must fail the check, so it wins
        if v.is_nan() || v > self.0 {
            self.0 = v;
        }
    }
}

fn random_cond<R: Rng>(rng: &mut R, max_log10: f64) -> f64 {
    10f64.powf(rng.random::<f64>() * max_log10)
}

/// Symmetry, identity, triangle inequality, trace lower bound and the
/// diagonal formula on `count` seeded instances with `n` in 2..=8.
pub fn metric_checks(count: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sym, mut ident, mut tri, mut lower, mut diag) =
        (Worst::new(), Worst::new(), Worst::new(), Worst::new(), Worst::new());
    for i in 0..count {
        let n = 2 + i % 7;
        let cond = random_cond(&mut rng, 3.0);
        let a = random_pd(n, cond, &mut rng)?;
        let b = random_pd(n, cond, &mut rng)?.scaled(random_cond(&mut rng, 2.0))?;
        let c = random_pd(n, cond, &mut rng)?;
        let d = |x: &PdMatrix, y: &PdMatrix| bw_distance_squared(x, y).map(|r| r.distance_squared);
        let (ab, ba) = (d(&a, &b)?, d(&b, &a)?);
        sym.see((ab - ba).abs() / (1.0 + ab));
        ident.see(d(&a, &a)? / a.trace());
        tri.see(d(&a, &c)?.sqrt() - ab.sqrt() - d(&b, &c)?.sqrt());
        lower.see((a.trace().sqrt() - b.trace().sqrt()).powi(2) - ab);
        let da: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..50.0)).collect();
        let db: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..50.0)).collect();
        let want: f64 = da.iter().zip(&db).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
        let pa = PdMatrix::new(SymmetricMatrix::from_diagonal(&da))?;
        let pb = PdMatrix::new(SymmetricMatrix::from_diagonal(&db))?;
        diag.see((d(&pa, &pb)? - want).abs() / (1.0 + want));
    }
    Ok(vec![
        Check::at_most("symmetry", sym.0, 1e-9),
        Check::at_most("identity", ident.0, 1e-9),
        Check::at_most("triangle_inequality", tri.0, 1e-7),
        Check::at_most("trace_lower_bound", lower.0, 1e-9),
        Check::at_most("diagonal_reduction", diag.0, 1e-9),
    ])
}

/// Tightness of the orthogonal relaxation: the SDP optimum equals the
/// nuclear norm and the maximizer is orthogonal. With a PD weight `G` the
/// optimum is `||sqrt(G) K||_*` or `||K sqrt(G)||_*` depending on where the
/// coupling sits in the block.
pub fn lemma_checks(count: usize, seed: u64, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut value, mut orth, mut lower, mut upper) = (Worst::new(), Worst::new(), Worst::new(), Worst::new());
    for i in 0..count {
        let n = 2 + i % 5;
        let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let r = solve_lemma(&k, &PdMatrix::identity(n), CouplingPlacement::Lower, settings)?;
        value.see((r.value - r.nuclear_norm).abs());
        orth.see(r.tightness_residual);
        let g = random_pd(n, 100.0, &mut rng)?;
        let r = solve_lemma(&k, &g, CouplingPlacement::Lower, settings)?;
        lower.see((r.value - r.nuclear_norm).abs());
        let r = solve_lemma(&k, &g, CouplingPlacement::Upper, settings)?;
        upper.see((r.value - r.nuclear_norm).abs());
    }
    Ok(vec![
        Check::at_most("value_equals_nuclear_norm", value.0, 1e-6),
        Check::at_most("maximizer_is_orthogonal", orth.0, 1e-5),
        Check::at_most("weighted_lower_equals_norm_sqrt_g_k", lower.0, 1e-6),
        Check::at_most("weighted_upper_equals_norm_k_sqrt_g", upper.0, 1e-6),
    ])
}

/// SDP distance against the closed form on `count` seeded pairs with `n` in
/// 2..=6 and condition numbers up to 1e4.
pub fn sdp_equivalence_checks(count: usize, seed: u64, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dev, mut tight, mut fid) = (Worst::new(), Worst::new(), Worst::new());
    for i in 0..count {
        let n = 2 + i % 5;
        let a = random_pd(n, random_cond(&mut rng, 4.0), &mut rng)?;
        let b = random_pd(n, random_cond(&mut rng, 4.0), &mut rng)?;
        let closed = bw_distance_squared(&a, &b)?;
        let sdp = solve_distance(&a, &b, settings)?;
        dev.see((sdp.distance_squared - closed.distance_squared).abs() / (1.0 + closed.distance_squared));
        tight.see(sdp.tightness_residual / (1.0 + b.frobenius_norm()));
        fid.see((sdp.fidelity_estimate - closed.fidelity_term).abs() / closed.fidelity_term);
    }
    Ok(vec![
        Check::at_most("sdp_vs_closed_form", dev.0, 1e-5),
        Check::at_most("tightness_residual", tight.0, 1e-4),
        Check::at_most("fidelity_recovered", fid.0, 1e-5),
    ])
}

/// Closed-form re-validation of `count` seeded ball-constrained solves.
///
/// Each instance minimizes a random linear objective over one or two balls
/// whose centers lie close enough for the intersection to be nonempty.
pub fn ball_soundness_checks(count: usize, seed: u64, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excess = Worst::new();
    for i in 0..count {
        let n = 2 + i % 4;
        let a = random_pd(n, 20.0, &mut rng)?;
        let mut balls = vec![bwkit_core::BwBall::new(a.clone(), rng.random_range(0.1..2.0))?];
        if i % 2 == 1 {
            let q = random_orthogonal(n, &mut rng);
            let b = PdMatrix::new(a.congruence(&q))?;
            let r2 = bw_distance_squared(&a, &b)?.distance_squared + 0.5;
            balls.push(bwkit_core::BwBall::new(b, r2)?);
        }
        let c = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let objective = match i % 3 {
            0 => ObjectiveSpec::FrobeniusNorm,
            1 => ObjectiveSpec::Trace,
            _ => ObjectiveSpec::Linear(SymmetricMatrix::from_average(c)),
        };
        let r = solve_ball_constrained(&objective, None, &balls, settings)?;
        for (ball, d2) in balls.iter().zip(&r.ball_distances) {
            excess.see(d2 - ball.radius_squared);
        }
    }
    Ok(vec![Check::at_most("closed_form_ball_excess", excess.0, 1e-3)])
}

pub fn table1_barycenter_checks(t: &Table1, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let case = &t.barycenter;
    let p = case.problem()?;
    let sdp = solve_barycenter_sdp(&p, settings)?;
    let fp = fixed_point_barycenter(&p, None, &FixedPointOptions::default())?;
    Ok(vec![
        Check::at_most("barycenter_sdp_vs_reference", sdp.x.max_abs_diff(&case.x_opt), 1e-3),
        Check::at_most(
            "barycenter_fixed_point_vs_reference",
            fp.x.max_abs_diff(&case.x_fp),
            1e-3,
        ),
        Check::at_most("barycenter_route_deviation", sdp.x.max_abs_diff(&fp.x), 2e-3),
    ])
}

pub fn table1_set_checks(t: &Table1, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let case = &t.sets;
    let sa = ConvexSetSpec::trace_equals(case.dimension, case.trace_a);
    let sb = ConvexSetSpec::trace_equals(case.dimension, case.trace_b);
    let opts = SetDistanceOptions::default();
    let want = (case.trace_b.sqrt() - case.trace_a.sqrt()).powi(2);
    let r = set_distance(&sa, &sb, None, &opts, settings)?;
    let ratio = case.trace_b / case.trace_a;
    // Started from the reference trace-1 witness, the loop should stay there
    // and pair it with the reference trace-2 witness.
    let from_reference = set_distance(&sa, &sb, Some(&case.witness_a), &opts, settings)?;
    let unconverged = [&r, &from_reference].iter().filter(|r| !r.converged).count();
    Ok(vec![
        Check::at_most("set_distance_unconverged_runs", unconverged as f64, 0.0),
        Check::at_most("set_distance_vs_trace_bound", (r.distance_squared - want).abs(), 1e-3),
        Check::at_most(
            "set_witnesses_proportional",
            r.witness_b.max_abs_diff(&r.witness_a.scaled(ratio)),
            1e-3,
        ),
        Check::at_most(
            "set_distance_from_reference_start",
            (from_reference.distance_squared - want).abs(),
            1e-3,
        ),
        Check::at_most(
            "set_witness_vs_reference",
            from_reference.witness_b.max_abs_diff(&case.witness_b),
            1e-3,
        ),
    ])
}

pub fn table1_ball_checks(t: &Table1, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let case = &t.ball;
    let r = solve_ball_constrained(
        &ObjectiveSpec::FrobeniusNorm,
        None,
        std::slice::from_ref(&case.ball),
        settings,
    )?;
    Ok(vec![
        Check::at_most("ball_solution_vs_reference", r.x.max_abs_diff(&case.x), 1e-2),
        Check::at_most(
            "ball_constraint_active",
            (r.ball_distances[0] - case.ball.radius_squared).abs(),
            2e-2,
        ),
    ])
}

pub fn table1_checks(t: &Table1, settings: &SolverSettings) -> Result<Vec<Check>, CliError> {
    let mut checks = table1_barycenter_checks(t, settings)?;
    checks.extend(table1_set_checks(t, settings)?);
    checks.extend(table1_ball_checks(t, settings)?);
    Ok(checks)
}

//! Homogeneous self-dual primal-dual interior-point method for
//!
//! ```text
//!   minimize    c'x
//!   subject to  G x + s = h,  A x = b,  s in K
//! ```
//!
//! with dual `maximize -h'z - b'y  s.t.  G'z + A'y + c = 0, z in K`.
//! Search directions use Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector; the KKT system is reduced to a dense
//! `(n + p) x (n + p)` saddle-point system.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::cone::{
    add_identity, embed_diag, max_step_unscaled, sinv_diag, sprod, sprod_diag, ConeDims, DirectionSpectrum, ScaleOp,
    Scaling,
};
use crate::solution::{SdpStatus, SolverSettings};

const STEP_FRACTION: f64 = 0.99;
const SIGMA_EXPONENT: i32 = 3;
/// Cap on pure centering steps taken once the stopping test passes. The last
/// predictor-corrector iterate can sit far from the central path, leaving
/// primal matrices accurate only to about the square root of the gap.
const CENTERING_STEPS: usize = 8;
/// Centering stops early once every `lambda_i^2` is within this relative
/// distance of `mu`.
const CENTRALITY_TOLERANCE: f64 = 1e-3;
/// Abandon the run once the merit function exceeds its best value by this factor.
const STALL_FACTOR: f64 = 1e3;

/// A conic program in standard form.
#[derive(Debug, Clone)]
pub(crate) struct ConeProgram {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub dims: ConeDims,
}

#[derive(Debug, Clone)]
#[allow(dead_code)]
pub(crate) struct ConeResult {
    pub status: SdpStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub iterations: usize,
}

/// Factored KKT system for one scaling.
///
/// Solves
/// ```text
///   [ 0  A'  G'   ] [ ux        ]   [ bx ]
///   [ A  0   0    ] [ uy        ] = [ by ]
///   [ G  0  -W'W  ] [ W^{-1} uz ]   [ bz ]
/// ```
/// returning `(ux, uy, uz)`. The scaled form
/// `[[0, A', Gs'], [A, 0, 0], [Gs, 0, -I]]` with `Gs = W^{-T} G` is factored
/// directly rather than through the normal equations `Gs' Gs`, which would
/// square its condition number.
struct Kkt<'a> {
    prog: &'a ConeProgram,
    scaling: &'a Scaling,
    lu: LU<f64, Dyn, Dyn>,
}

impl<'a> Kkt<'a> {
    fn factor(prog: &'a ConeProgram, scaling: &'a Scaling) -> Option<Self> {
        let n = prog.c.len();
        let p = prog.b.len();
        let m = prog.dims.len();
        let gs = scaling.apply_columns(&prog.dims, &prog.g, ScaleOp::WInvTrans);
        let mut k = DMatrix::zeros(n + p + m, n + p + m);
        k.view_mut((n, 0), (p, n)).copy_from(&prog.a);
        k.view_mut((0, n), (n, p)).copy_from(&prog.a.transpose());
        k.view_mut((n + p, 0), (m, n)).copy_from(&gs);
        k.view_mut((0, n + p), (n, m)).copy_from(&gs.transpose());
        k.view_mut((n + p, n + p), (m, m)).fill_diagonal(-1.0);
        let lu = k.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self { prog, scaling, lu })
    }

    fn solve(&self, x: &mut DVector<f64>, y: &mut DVector<f64>, z: &mut DVector<f64>) -> Option<()> {
        let n = x.len();
        let p = y.len();
        let m = z.len();
        let wz = self.scaling.apply(&self.prog.dims, z, ScaleOp::WInvTrans);
        let mut rhs = DVector::zeros(n + p + m);
        rhs.rows_mut(0, n).copy_from(x);
        rhs.rows_mut(n, p).copy_from(y);
        rhs.rows_mut(n + p, m).copy_from(&wz);
        let sol = self.lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        x.copy_from(&sol.rows(0, n));
        y.copy_from(&sol.rows(n, p));
        z.copy_from(&sol.rows(n + p, m));
        Some(())
    }
}

/// Right-hand side / solution of the full homogeneous Newton system.
#[derive(Clone)]
struct Newton {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    tau: f64,
    s: DVector<f64>,
    kappa: f64,
}

impl Newton {
    fn axpy(&mut self, alpha: f64, other: &Newton) {
        self.x.axpy(alpha, &other.x, 1.0);
        self.y.axpy(alpha, &other.y, 1.0);
        self.z.axpy(alpha, &other.z, 1.0);
        self.s.axpy(alpha, &other.s, 1.0);
        self.tau += alpha * other.tau;
        self.kappa += alpha * other.kappa;
    }
}

/// Per-iteration data for solving the homogeneous Newton system.
struct NewtonSystem<'a> {
    prog: &'a ConeProgram,
    kkt: Kkt<'a>,
    lambda: &'a DVector<f64>,
    lambda_g: f64,
    dg: f64,
    x1: DVector<f64>,
    y1: DVector<f64>,
    z1: DVector<f64>,
    th: DVector<f64>,
    refinement: usize,
}

impl<'a> NewtonSystem<'a> {
    fn new(
        prog: &'a ConeProgram,
        scaling: &'a Scaling,
        lambda: &'a DVector<f64>,
        lambda_g: f64,
        dg: f64,
        refinement: usize,
    ) -> Option<Self> {
        let kkt = Kkt::factor(prog, scaling)?;
        let dgi = 1.0 / dg;
        let mut x1 = -&prog.c;
        let mut y1 = prog.b.clone();
        let mut z1 = prog.h.clone();
        kkt.solve(&mut x1, &mut y1, &mut z1)?;
        x1 *= dgi;
        y1 *= dgi;
        z1 *= dgi;
        let th = scaling.apply(&prog.dims, &prog.h, ScaleOp::WInvTrans);
        Some(Self {
            prog,
            kkt,
            lambda,
            lambda_g,
            dg,
            x1,
            y1,
            z1,
            th,
            refinement,
        })
    }

    /// Solves
    /// ```text
    ///   [ 0        ]   [  0   A'  G'  c ] [ ux        ]     [ bx   ]
    ///   [ 0        ]   [ -A   0   0   b ] [ uy        ]     [ by   ]
    ///   [ W'us     ] - [ -G   0   0   h ] [ W^{-1}uz  ] = - [ bz   ]
    ///   [ dg ukap  ]   [ -c' -b' -h'  0 ] [ utau / dg ]     [ btau ]
    ///
    ///   lambda o (uz + us) = -bs,   lambda_g (utau + ukappa) = -bkappa
    /// ```
    /// in place.
    fn solve_no_refinement(&self, u: &mut Newton) -> Option<()> {
        let dims = &self.prog.dims;
        let dgi = 1.0 / self.dg;
        u.y.neg_mut();
        u.s = -sinv_diag(dims, self.lambda, &u.s);
        let ws = self.kkt.scaling.apply(dims, &u.s, ScaleOp::WTrans);
        u.z += ws;
        u.z.neg_mut();
        self.kkt.solve(&mut u.x, &mut u.y, &mut u.z)?;

        u.kappa = -u.kappa / self.lambda_g;
        u.tau += u.kappa / dgi;
        u.tau = dgi * (u.tau + self.prog.c.dot(&u.x) + self.prog.b.dot(&u.y) + self.th.dot(&u.z))
            / (1.0 + self.z1.norm_squared());
        u.x.axpy(u.tau, &self.x1, 1.0);
        u.y.axpy(u.tau, &self.y1, 1.0);
        u.z.axpy(u.tau, &self.z1, 1.0);
        u.s -= &u.z;
        u.kappa -= u.tau;
        Some(())
    }

    /// Residual of the system above at `u`, expressed as a right-hand side.
    fn residual(&self, u: &Newton, rhs: &Newton) -> Newton {
        let prog = self.prog;
        let dims = &prog.dims;
        let scaling = self.kkt.scaling;
        let mut v = rhs.clone();
        let wz = scaling.apply(dims, &u.z, ScaleOp::WInv);
        v.x -= prog.a.tr_mul(&u.y);
        v.x -= prog.g.tr_mul(&wz);
        v.x.axpy(-u.tau / self.dg, &prog.c, 1.0);

        v.y += &prog.a * &u.x;
        v.y.axpy(-u.tau / self.dg, &prog.b, 1.0);

        v.z += &prog.g * &u.x;
        v.z.axpy(-u.tau / self.dg, &prog.h, 1.0);
        v.z += scaling.apply(dims, &u.s, ScaleOp::WTrans);

        v.tau += self.dg * u.kappa + prog.c.dot(&u.x) + prog.b.dot(&u.y) + prog.h.dot(&wz);
        v.s += sprod_diag(dims, self.lambda, &(&u.s + &u.z));
        v.kappa += self.lambda_g * (u.tau + u.kappa);
        v
    }

    fn solve(&self, u: &mut Newton) -> Option<()> {
        let rhs = u.clone();
        self.solve_no_refinement(u)?;
        for _ in 0..self.refinement {
            let mut corr = self.residual(u, &rhs);
            self.solve_no_refinement(&mut corr)?;
            u.axpy(1.0, &corr);
        }
        Some(())
    }
}

pub(crate) fn solve(prog: &ConeProgram, settings: &SolverSettings) -> ConeResult {
    let dims = &prog.dims;
    let n = prog.c.len();
    let p = prog.b.len();
    let cdim = dims.len();
    let degree = dims.degree() as f64;

    let failure = |x: DVector<f64>, y: DVector<f64>, s: DVector<f64>, z: DVector<f64>, iterations| ConeResult {
        status: SdpStatus::NumericalFailure,
        x,
        y,
        s,
        z,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        relative_gap: f64::INFINITY,
        iterations,
    };

    let resx0 = prog.c.norm().max(1.0);
    let resy0 = prog.b.norm().max(1.0);
    let resz0 = prog.h.norm().max(1.0);

    // Starting point from two least-squares problems with identity scaling.
    let identity = Scaling::identity(dims);
    let kkt0 = match Kkt::factor(prog, &identity) {
        Some(k) => k,
        None => {
            log::debug!("initial KKT matrix is singular; check for unconstrained variables");
            return failure(
                DVector::zeros(n),
                DVector::zeros(p),
                DVector::zeros(cdim),
                DVector::zeros(cdim),
                0,
            );
        }
    };
    let mut x = DVector::zeros(n);
    let mut dy = prog.b.clone();
    let mut s = prog.h.clone();
    let mut dx = -&prog.c;
    let mut y = DVector::zeros(p);
    let mut z = DVector::zeros(cdim);
    if kkt0.solve(&mut x, &mut dy, &mut s).is_none() || kkt0.solve(&mut dx, &mut y, &mut z).is_none() {
        return failure(x, y, s, z, 0);
    }
    s.neg_mut();
    drop(kkt0);

    let ts = max_step_unscaled(dims, &s);
    let tz = max_step_unscaled(dims, &z);
    if ts >= -1e-8 * s.norm().max(1.0) {
        add_identity(dims, &mut s, 1.0 + ts);
    }
    if tz >= -1e-8 * z.norm().max(1.0) {
        add_identity(dims, &mut z, 1.0 + tz);
    }
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;

    let mut scaling: Option<(Scaling, DVector<f64>)> = None;
    let mut best: Option<ConeResult> = None;
    let mut best_merit = f64::INFINITY;
    let mut dg = 1.0;
    let mut lambda_g = 1.0;
    let mut centering_left = CENTERING_STEPS;
    let mut converged: Option<ConeResult> = None;

    for iter in 0..=settings.max_iterations {
        // Residuals.
        let hrx = -(prog.a.tr_mul(&y) + prog.g.tr_mul(&z));
        let rx = &hrx - &prog.c * tau;
        let hresx = hrx.norm();
        let resx = rx.norm() / tau;

        let hry = &prog.a * &x;
        let ry = &hry - &prog.b * tau;
        let hresy = hry.norm();
        let resy = ry.norm() / tau;

        let hrz = &s + &prog.g * &x;
        let rz = &hrz - &prog.h * tau;
        let hresz = hrz.norm();
        let resz = rz.norm() / tau;

        let cx = prog.c.dot(&x);
        let by = prog.b.dot(&y);
        let hz = prog.h.dot(&z);
        let rt = kappa + cx + by + hz;

        let gap = s.dot(&z) / (tau * tau);
        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        let pres = (resy / resy0).max(resz / resz0);
        let dres = resx / resx0;
        let pinfres = if hz + by < 0.0 {
            Some(hresx / resx0 / (-hz - by))
        } else {
            None
        };
        let dinfres = if cx < 0.0 {
            Some((hresy / resy0).max(hresz / resz0) / (-cx))
        } else {
            None
        };

        log::debug!(
            "iter {iter:3}  pcost {pcost:+.8e}  dcost {dcost:+.8e}  gap {gap:.2e}  pres {pres:.2e}  dres {dres:.2e}  k/t {:.2e}",
            kappa / tau
        );

        let result = |status: SdpStatus, xs: f64, zs: f64| ConeResult {
            status,
            x: &x / xs,
            y: &y / zs,
            s: &s / xs,
            z: &z / zs,
            primal_objective: pcost,
            dual_objective: dcost,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            relative_gap: relgap,
            iterations: iter,
        };

        let merit = pres.max(dres).max(gap.min(relgap).max(0.0));
        if merit < best_merit {
            best_merit = merit;
            best = Some(result(SdpStatus::NumericalFailure, tau, tau));
        } else if iter > 5 && merit > STALL_FACTOR * best_merit {
            log::debug!("iterates deteriorated at iteration {iter}; returning the best one");
            return best.unwrap_or_else(|| result(SdpStatus::NumericalFailure, tau, tau));
        }
        let centering = if pres <= settings.feasibility_tolerance
            && dres <= settings.feasibility_tolerance
            && (gap <= settings.gap_tolerance || relgap <= settings.gap_tolerance)
        {
            let done = result(SdpStatus::Optimal, tau, tau);
            if centering_left == 0 {
                return done;
            }
            centering_left -= 1;
            converged = Some(done);
            true
        } else if let Some(done) = converged.take() {
            return done;
        } else {
            false
        };

        let fail = |best: Option<ConeResult>| {
            converged
                .clone()
                .or(best)
                .unwrap_or_else(|| result(SdpStatus::NumericalFailure, tau, tau))
        };
        if let Some(r) = pinfres {
            if r <= settings.feasibility_tolerance {
                return result(SdpStatus::Infeasible, 1.0, -hz - by);
            }
        }
        if let Some(r) = dinfres {
            if r <= settings.feasibility_tolerance {
                return result(SdpStatus::Unbounded, -cx, 1.0);
            }
        }
        if iter == settings.max_iterations {
            log::debug!("iteration limit reached");
            return fail(best);
        }

        if scaling.is_none() {
            match Scaling::compute(dims, &s, &z) {
                Some(sc) => scaling = Some(sc),
                None => return fail(best),
            }
            dg = (kappa / tau).sqrt();
            lambda_g = (tau * kappa).sqrt();
        }
        let (w, lambda) = scaling.as_mut().expect("scaling initialised above");
        let lambda_sq = lambda.component_mul(lambda);
        let mu = (lambda.norm_squared() + lambda_g * lambda_g) / (degree + 1.0);
        if centering {
            let off = lambda_sq
                .iter()
                .chain(std::iter::once(&(lambda_g * lambda_g)))
                .fold(0.0_f64, |acc, l| acc.max((l - mu).abs()));
            if off <= CENTRALITY_TOLERANCE * mu {
                return converged.take().expect("set when centering starts");
            }
        }

        let sys = match NewtonSystem::new(prog, w, lambda, lambda_g, dg, settings.refinement_steps) {
            Some(sys) => sys,
            None => {
                log::debug!("KKT factorization failed at iteration {iter}");
                return fail(best);
            }
        };

        let mut sigma = 0.0;
        let mut step = 0.0;
        let mut dir: Option<(Newton, DirectionSpectrum, DirectionSpectrum, f64, f64)> = None;
        let mut ds_dz_pred = DVector::zeros(cdim);
        let mut dkappa_dtau_pred = 0.0;

        let passes: &[bool] = if centering {
            sigma = 1.0;
            &[true]
        } else {
            &[false, true]
        };
        for &corrector in passes {
            let mut ds = embed_diag(dims, &lambda_sq);
            let mut dkappa = lambda_g * lambda_g;
            if corrector {
                ds += &ds_dz_pred;
                add_identity(dims, &mut ds, -sigma * mu);
                dkappa += dkappa_dtau_pred - sigma * mu;
            }
            let mut u = Newton {
                x: &rx * (1.0 - sigma),
                y: &ry * (1.0 - sigma),
                z: &rz * (1.0 - sigma),
                tau: (1.0 - sigma) * rt,
                s: ds,
                kappa: dkappa,
            };
            if sys.solve(&mut u).is_none() {
                log::debug!("Newton system solve failed at iteration {iter}");
                return fail(best);
            }
            if !corrector {
                ds_dz_pred = sprod(dims, &u.s, &u.z);
                dkappa_dtau_pred = u.tau * u.kappa;
            }

            let (spec_s, spec_z) = match (
                DirectionSpectrum::compute(dims, lambda, &u.s),
                DirectionSpectrum::compute(dims, lambda, &u.z),
            ) {
                (Some(a), Some(b)) => (a, b),
                _ => return fail(best),
            };
            let tt = -u.tau / lambda_g;
            let tk = -u.kappa / lambda_g;
            let t = [0.0, spec_s.max_negative(), spec_z.max_negative(), tt, tk]
                .into_iter()
                .fold(0.0_f64, f64::max);
            step = if t == 0.0 {
                1.0
            } else if corrector {
                (STEP_FRACTION / t).min(1.0)
            } else {
                (1.0 / t).min(1.0)
            };
            if !corrector {
                sigma = (1.0 - step).powi(SIGMA_EXPONENT);
            } else {
                dir = Some((u, spec_s, spec_z, tt, tk));
            }
        }
        drop(sys);
        let (u, spec_s, spec_z, tt, tk) = dir.expect("corrector step computed");

        // s and z move additively in the original space; rebuilding them as
        // W' lambda and W^{-1} lambda loses cond(W) digits near the boundary.
        let ds = w.apply(dims, &u.s, ScaleOp::WTrans);
        let dz = w.apply(dims, &u.z, ScaleOp::WInv);
        if w.update(dims, lambda, &u.s, &u.z, &spec_s, &spec_z, step).is_none() {
            log::debug!("scaling update failed at iteration {iter}");
            return fail(best);
        }
        x.axpy(step, &u.x, 1.0);
        y.axpy(step, &u.y, 1.0);
        dg *= ((1.0 - step * tk) / (1.0 - step * tt)).sqrt();
        lambda_g *= ((1.0 - step * tt) * (1.0 - step * tk)).sqrt();

        s.axpy(step, &ds, 1.0);
        z.axpy(step, &dz, 1.0);
        kappa = lambda_g * dg;
        tau = lambda_g / dg;
        if !(tau.is_finite() && kappa.is_finite()) {
            return best.unwrap_or_else(|| failure(x, y, s, z, iter));
        }
    }
    unreachable!("loop returns at the iteration limit")
}

//! The large-advection shadow system: constrained solver, bifurcation
//! values and branch direction, the shadow-limit verifier against the full
//! system, and the singular-perturbation transition-layer machinery
//! (bistable roots, heteroclinic profile, layer solve, interface
//! prediction).
//!
//! The stationary shadow system on (0, L) is
//!
//! ```text
//! eps v'' + (a2 - b2 lambda e^{-r Phi(v)} - c2 v) v = 0,      v' = 0 at 0, L,
//! int_0^L (a1 - b1 lambda e^{-r Phi(v)} - c1 v) e^{-r Phi(v)} dx = 0,
//! ```
//!
//! with the scalar `lambda` unknown; `u = lambda e^{-r Phi(v)}` recovers the
//! first species.

use crate::linalg::{bordered_tridiag_solve, trapezoid};
use crate::model::{ModelParams, SensitivitySpec};
use crate::sim::{mode_amplitude, simulate, Grid1D, State};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShadowError {
    #[error("coexistence denominator b1*c2 - b2*c1 vanishes")]
    SingularDenominator,
    #[error("no bifurcation: (a2 - c2 v_bar) r phi(v_bar) <= c2 (value {margin})")]
    NoBifurcation { margin: f64 },
    #[error("n = 0 rejected: the constant mode does not bifurcate")]
    NZero,
    #[error("Newton failed to converge after {iters} iterations (residual {residual})")]
    NewtonDiverged { iters: usize, residual: f64 },
    #[error("singular bordered Jacobian")]
    SingularJacobian,
    #[error("lambda = {lambda} outside the bistable window ({lo}, {hi})")]
    OutsideWindow { lambda: f64, lo: f64, hi: f64 },
    #[error("no equal-area lambda inside the bistable window")]
    NoEqualArea,
    #[error("v_bar2 = {v_bar2} outside the admissible interval ({lo}, {hi})")]
    OutsideI0 { v_bar2: f64, lo: f64, hi: f64 },
    #[error("r = {r} does not exceed r* = {r_star}")]
    RTooSmall { r: f64, r_star: f64 },
    #[error("operation requires phi == 1 (so Phi(v) = v); got a non-identity sensitivity")]
    NonIdentitySensitivity,
    #[error("shadow-limit relaxation failed: {0}")]
    SimFailed(String),
}

/// Parameters of the shadow system: kinetic constants, the limit ratio
/// `r = chi/D1`, the diffusion `eps`, and the domain length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub r: f64,
    pub eps: f64,
    pub l: f64,
    pub sensitivity: SensitivitySpec,
}

impl ShadowParams {
    pub fn grid(&self, n: usize) -> Grid1D {
        Grid1D::new(n, self.l)
    }

    fn exp_term(&self, v: f64) -> f64 {
        (-self.r * self.sensitivity.big_phi(v)).exp()
    }

    /// PDE nonlinearity `f(lambda, v) = (a2 - b2 lambda e^{-r Phi(v)} - c2 v) v`.
    pub fn f(&self, lambda: f64, v: f64) -> f64 {
        (self.a2 - self.b2 * lambda * self.exp_term(v) - self.c2 * v) * v
    }

    /// `df/dv` at fixed `lambda`.
    pub fn f_v(&self, lambda: f64, v: f64) -> f64 {
        let e = self.exp_term(v);
        let phi = self.sensitivity.phi(v);
        (self.a2 - self.b2 * lambda * e - self.c2 * v)
            + v * (self.b2 * lambda * self.r * phi * e - self.c2)
    }

    /// `df/dlambda`.
    pub fn f_lambda(&self, lambda: f64, v: f64) -> f64 {
        let _ = lambda;
        -self.b2 * self.exp_term(v) * v
    }

    /// Constraint integrand `(a1 - b1 lambda e^{-r Phi} - c1 v) e^{-r Phi}`.
    pub fn g(&self, lambda: f64, v: f64) -> f64 {
        let e = self.exp_term(v);
        (self.a1 - self.b1 * lambda * e - self.c1 * v) * e
    }

    pub fn g_v(&self, lambda: f64, v: f64) -> f64 {
        let e = self.exp_term(v);
        let phi = self.sensitivity.phi(v);
        (self.b1 * lambda * self.r * phi * e - self.c1) * e
            + (self.a1 - self.b1 * lambda * e - self.c1 * v) * (-self.r * phi * e)
    }

    pub fn g_lambda(&self, lambda: f64, v: f64) -> f64 {
        let _ = lambda;
        let e = self.exp_term(v);
        -self.b1 * e * e
    }
}

/// A v-profile plus the solved multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowState {
    pub v: Vec<f64>,
    pub lambda: f64,
    pub eps: f64,
}

impl ShadowState {
    /// Max-norm of the PDE residual and the value of the integral
    /// constraint at this state.
    pub fn residuals(&self, sp: &ShadowParams) -> (f64, f64) {
        let grid = sp.grid(self.v.len());
        let pde = pde_residual(sp, &self.v, self.lambda, self.eps, &grid);
        let pde_norm = pde.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let gvals: Vec<f64> = self.v.iter().map(|&v| sp.g(self.lambda, v)).collect();
        (pde_norm, trapezoid(&gvals, grid.h()))
    }
}

fn pde_residual(sp: &ShadowParams, v: &[f64], lambda: f64, eps: f64, grid: &Grid1D) -> Vec<f64> {
    let lap = crate::sim::laplacian(v, grid);
    (0..grid.n).map(|j| eps * lap[j] + sp.f(lambda, v[j])).collect()
}

/// The spatially constant solution `(v_bar, lambda_bar)`:
/// `v_bar = a1/c1` when `b1 = 0`, the coexistence value otherwise, and
/// `lambda_bar = u_bar e^{+r Phi(v_bar)}` so that the recovered
/// `u = lambda_bar e^{-r Phi(v_bar)}` equals `u_bar`.
pub fn shadow_equilibrium(sp: &ShadowParams) -> Result<(f64, f64), ShadowError> {
    let v_bar = if sp.b1 == 0.0 {
        sp.a1 / sp.c1
    } else {
        let det = sp.b1 * sp.c2 - sp.b2 * sp.c1;
        if det == 0.0 {
            return Err(ShadowError::SingularDenominator);
        }
        (sp.a2 * sp.b1 - sp.a1 * sp.b2) / det
    };
    let u_bar = (sp.a2 - sp.c2 * v_bar) / sp.b2;
    let lambda_bar = u_bar * (sp.r * sp.sensitivity.big_phi(v_bar)).exp();
    Ok((v_bar, lambda_bar))
}

/// Bifurcation value of the shadow branch at mode `n`:
/// `eps_n = ((a2 - c2 v_bar) r phi(v_bar) - c2) v_bar / (n pi / L)^2`.
pub fn epsilon_n(sp: &ShadowParams, n: usize) -> Result<f64, ShadowError> {
    if n == 0 {
        return Err(ShadowError::NZero);
    }
    let (v_bar, _) = shadow_equilibrium(sp)?;
    let margin = (sp.a2 - sp.c2 * v_bar) * sp.r * sp.sensitivity.phi(v_bar) - sp.c2;
    if margin <= 0.0 {
        return Err(ShadowError::NoBifurcation { margin });
    }
    Ok(margin * v_bar / (n as f64 * std::f64::consts::PI / sp.l).powi(2))
}

/// Newton on the bordered system (PDE rows + integral-constraint row,
/// unknowns v-nodes + lambda), using block elimination on the tridiagonal
/// PDE block.
pub fn shadow_newton(sp: &ShadowParams, guess: &ShadowState) -> Result<ShadowState, ShadowError> {
    let n = guess.v.len();
    let grid = sp.grid(n);
    let h = grid.h();
    let h2 = h * h;
    let eps = guess.eps;
    let mut v = guess.v.clone();
    let mut lambda = guess.lambda;

    for iter in 0..80 {
        let res = pde_residual(sp, &v, lambda, eps, &grid);
        let gvals: Vec<f64> = v.iter().map(|&vv| sp.g(lambda, vv)).collect();
        let cons = trapezoid(&gvals, h);
        let res_norm = res.iter().fold(cons.abs(), |m, r| m.max(r.abs()));
        if res_norm <= 1e-10 {
            return Ok(ShadowState { v, lambda, eps });
        }
        let mut sub = vec![eps / h2; n];
        let mut sup = vec![eps / h2; n];
        let mut diag = vec![0.0; n];
        sup[0] = 2.0 * eps / h2;
        sub[n - 1] = 2.0 * eps / h2;
        for j in 0..n {
            diag[j] = -2.0 * eps / h2 + sp.f_v(lambda, v[j]);
        }
        let b: Vec<f64> = v.iter().map(|&vv| sp.f_lambda(lambda, vv)).collect();
        let c: Vec<f64> = (0..n)
            .map(|j| {
                let w = if j == 0 || j == n - 1 { h / 2.0 } else { h };
                w * sp.g_v(lambda, v[j])
            })
            .collect();
        let d: f64 = (0..n)
            .map(|j| {
                let w = if j == 0 || j == n - 1 { h / 2.0 } else { h };
                w * sp.g_lambda(lambda, v[j])
            })
            .sum();
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        // Fold the corner entry d into the block elimination: the border
        // row is c'dv + d dlam = -cons, handled by shifting the scalar
        // equation after the two tridiagonal solves.
        let (dv, dlam) = {
            let p = crate::linalg::thomas_solve(&sub, &diag, &sup, &neg_res)
                .ok_or(ShadowError::SingularJacobian)?;
            let q = crate::linalg::thomas_solve(&sub, &diag, &sup, &b)
                .ok_or(ShadowError::SingularJacobian)?;
            let cq: f64 = c.iter().zip(&q).map(|(ci, qi)| ci * qi).sum::<f64>() - d;
            if cq == 0.0 {
                return Err(ShadowError::SingularJacobian);
            }
            let cp: f64 = c.iter().zip(&p).map(|(ci, pi)| ci * pi).sum();
            let y = (-cons - cp) / (-cq);
            let x: Vec<f64> = p.iter().zip(&q).map(|(pi, qi)| pi - y * qi).collect();
            (x, y)
        };
        for j in 0..n {
            v[j] += dv[j];
        }
        lambda += dlam;
        if !v.iter().all(|x| x.is_finite()) || !lambda.is_finite() {
            return Err(ShadowError::NewtonDiverged { iters: iter + 1, residual: f64::NAN });
        }
    }
    let res = pde_residual(sp, &v, lambda, eps, &grid);
    let res_norm = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Err(ShadowError::NewtonDiverged { iters: 80, residual: res_norm })
}

/// Leading eigenvalues (sorted by descending real part) of the discretized
/// constrained linearization at a shadow state.
///
/// The constraint couples the multiplier to the profile; when the
/// constraint involves `lambda` directly (`b1 > 0`) the border is
/// eliminated exactly, otherwise the operator is projected onto the
/// constraint's tangent space.
pub fn shadow_linearization_spectrum(
    st: &ShadowState,
    sp: &ShadowParams,
    m: usize,
) -> Vec<(f64, f64)> {
    let n = st.v.len();
    let grid = sp.grid(n);
    let h = grid.h();
    let h2 = h * h;
    let eps = st.eps;
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        if j == 0 {
            a[(0, 0)] = -2.0 * eps / h2;
            a[(0, 1)] = 2.0 * eps / h2;
        } else if j == n - 1 {
            a[(j, j - 1)] = 2.0 * eps / h2;
            a[(j, j)] = -2.0 * eps / h2;
        } else {
            a[(j, j - 1)] = eps / h2;
            a[(j, j)] = -2.0 * eps / h2;
            a[(j, j + 1)] = eps / h2;
        }
        a[(j, j)] += sp.f_v(st.lambda, st.v[j]);
    }
    let b = DVector::from_iterator(n, st.v.iter().map(|&v| sp.f_lambda(st.lambda, v)));
    let c = DVector::from_iterator(
        n,
        (0..n).map(|j| {
            let w = if j == 0 || j == n - 1 { h / 2.0 } else { h };
            w * sp.g_v(st.lambda, st.v[j])
        }),
    );
    let d: f64 = (0..n)
        .map(|j| {
            let w = if j == 0 || j == n - 1 { h / 2.0 } else { h };
            w * sp.g_lambda(st.lambda, st.v[j])
        })
        .sum();

    let eig = if d.abs() > 1e-300 {
        // lambda responds instantaneously through the constraint:
        // effective operator A - b c'/d.
        let eff = &a - &b * c.transpose() / d;
        eff.complex_eigenvalues()
    } else {
        // Constraint c'w = 0 with lambda a pure multiplier: project
        // (I - b c'/(c'b)) A onto ker(c') via a Householder basis.
        let cb = c.dot(&b);
        let m_full = (&DMatrix::identity(n, n) - &b * c.transpose() / cb) * &a;
        // Householder vector mapping c to a multiple of e1.
        let mut u = c.clone();
        let alpha = c.norm() * if c[0] >= 0.0 { 1.0 } else { -1.0 };
        u[0] += alpha;
        let un = u.norm_squared();
        // H = I - 2 u u'/u'u; columns 1..n of H span ker(c').
        let hh = DMatrix::identity(n, n) - 2.0 / un * &u * u.transpose();
        let z = hh.columns(1, n - 1).into_owned();
        let reduced = z.transpose() * m_full * &z;
        reduced.complex_eigenvalues()
    };
    let mut evs: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    evs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    evs.truncate(m);
    evs
}

/// Which region of the sign map the branch-direction analysis lands in,
/// keyed by the value of `r` against `1/(2 v_bar)` and `8/v_bar`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShadowK2Case {
    /// `r` below `1/(2 v_bar)` or above `8/v_bar`: single sign change.
    OpensDown,
    /// `r` strictly between: positive-negative-positive pattern.
    OpensUp,
    /// `r = 1/(2 v_bar)`: linear `F`, threshold `28 c2 / 27`.
    DegenerateLow,
    /// `r = 8/v_bar`: linear `F`, threshold `119 c2 / 111`.
    DegenerateHigh,
}

/// Closed-form branch-direction data for the `Phi(v) = v`, `b1 = 0` case.
#[derive(Debug, Clone, Copy)]
pub struct SpecializedShadowK2 {
    /// `theta = (a2 - c2 v_bar) r`; bifurcation requires `theta > c2`.
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Real roots of `F(theta)`, ascending (equal when `F` is linear).
    pub theta_roots: (f64, f64),
    pub case: ShadowK2Case,
    /// Closed-form value; equals the general assembly.
    pub k2: f64,
}

/// Branch direction of the shadow bifurcation at mode `n`.
#[derive(Debug, Clone)]
pub struct ShadowK2Report {
    pub n: usize,
    /// The quadratic branch coefficient from the general projection
    /// formula (valid for any sensitivity and `b1`).
    pub k2: f64,
    /// Populated when `Phi(v) = v` and `b1 = 0`.
    pub specialized: Option<SpecializedShadowK2>,
}

/// Evaluates the shadow branch-direction coefficient.
pub fn shadow_k2(sp: &ShadowParams, n: usize) -> Result<ShadowK2Report, ShadowError> {
    // Feasibility first: no bifurcation, no branch direction.
    let _ = epsilon_n(sp, n)?;
    let (v_bar, lambda_bar) = shadow_equilibrium(sp)?;
    let s = &sp.sensitivity;
    let e = (-sp.r * s.big_phi(v_bar)).exp();
    let (p0, p1, p2) = (s.phi(v_bar), s.dphi(v_bar), s.d2phi(v_bar));
    let r = sp.r;
    let (a1, a2, b1, b2, c1, c2) = (sp.a1, sp.a2, sp.b1, sp.b2, sp.c1, sp.c2);

    // Exact partial derivatives of f and g at (lambda_bar, v_bar).
    // Writing f = B v with B = a2 - b2 lambda E - c2 v, the relation
    // b2 lambda_bar E(v_bar) = a2 - c2 v_bar (so B = 0) is substituted,
    // and likewise the constraint factor A = a1 - b1 lambda E - c1 v
    // vanishes at the equilibrium. Derivatives of E = e^{-r Phi(v)}:
    // E' = -r p0 E, E'' = (r^2 p0^2 - r p1) E,
    // E''' = (3 r^2 p0 p1 - r p2 - r^3 p0^3) E.
    let s2 = a2 - c2 * v_bar;
    let db = s2 * r * p0 - c2; // B'
    let dbb = -s2 * (r * r * p0 * p0 - r * p1); // B''
    let dbbb = -s2 * (3.0 * r * r * p0 * p1 - r * p2 - r * r * r * p0 * p0 * p0); // B'''
    let fv = db * v_bar;
    let flam = -b2 * v_bar * e;
    let fvv = dbb * v_bar + 2.0 * db;
    let fvl = b2 * e * (v_bar * p0 * r - 1.0);
    let fvvv = dbbb * v_bar + 3.0 * dbb;
    let da = b1 * lambda_bar * r * p0 * e - c1; // A'
    let daa = -b1 * lambda_bar * (r * r * p0 * p0 - r * p1) * e; // A''
    let gv = da * e;
    let glam = -b1 * e * e;
    let gvv = daa * e + 2.0 * da * (-r * p0 * e);

    let den = fv * glam - gv * flam;
    let pref = (n as f64 * std::f64::consts::PI).powi(2) / (2.0 * sp.l);
    let k2_general = ((gvv * (fvv * flam - fv * fvl) - fvv * (fvv * glam - gv * fvl)) * sp.l
        / (8.0 * den)
        + fvv * fvv * sp.l / (48.0 * fv)
        + fvvv * sp.l / 16.0)
        / pref;

    let specialized = if s.is_identity() && b1 == 0.0 {
        let theta = (a2 - c2 * v_bar) * r;
        let alpha = -2.0 * a1 * v_bar * r * r + 17.0 * a1 * r - 8.0 * c1;
        let beta = -9.0 * a1 * c2 * v_bar * r * r - 41.0 * a1 * c2 * r + 16.0 * c1 * c2;
        let gamma = 12.0 * a1 * c2 * c2 * v_bar * r * r + 24.0 * a1 * c2 * c2 * r
            - 8.0 * c1 * c2 * c2;
        let f_theta = alpha * theta * theta + beta * theta + gamma;
        // K2 = 2 L^2 F(theta) / (48 a1 (theta - c2) n^2 pi^2); the scale
        // in front of F(theta)/(theta - c2) is positive, so the sign
        // analysis only needs the quadratic.
        let k2_closed = f_theta / (48.0 * (theta - c2)) * 2.0 * sp.l * sp.l
            / (a1 * (n as f64 * std::f64::consts::PI).powi(2));
        let case = {
            let lo = 1.0 / (2.0 * v_bar);
            let hi = 8.0 / v_bar;
            if r == lo {
                ShadowK2Case::DegenerateLow
            } else if r == hi {
                ShadowK2Case::DegenerateHigh
            } else if r > lo && r < hi {
                ShadowK2Case::OpensUp
            } else {
                ShadowK2Case::OpensDown
            }
        };
        let roots = if alpha.abs() < 1e-12 {
            let root = -gamma / beta;
            (root, root)
        } else {
            let disc = (beta * beta - 4.0 * alpha * gamma).max(0.0).sqrt();
            let r1 = (-beta - disc) / (2.0 * alpha);
            let r2 = (-beta + disc) / (2.0 * alpha);
            (r1.min(r2), r1.max(r2))
        };
        Some(SpecializedShadowK2 {
            theta,
            alpha,
            beta,
            gamma,
            theta_roots: roots,
            case,
            k2: k2_closed,
        })
    } else {
        None
    };

    Ok(ShadowK2Report { n, k2: k2_general, specialized })
}

/// Solves the shadow system with the mode-n amplitude of `v - v_bar`
/// pinned to `s_amp`, treating both `lambda` and `eps` as unknowns.
/// Returns `(state, eps)`; used for the branch-direction fit against
/// `shadow_k2`.
pub fn solve_pinned_eps(
    sp: &ShadowParams,
    grid: &Grid1D,
    n_mode: usize,
    s_amp: f64,
) -> Result<(ShadowState, f64), ShadowError> {
    let (v_bar, lambda_bar) = shadow_equilibrium(sp)?;
    let n = grid.n;
    let h = grid.h();
    let pi = std::f64::consts::PI;
    let ck: Vec<f64> = (0..n).map(|j| (n_mode as f64 * pi * grid.node(j) / sp.l).cos()).collect();
    let w: Vec<f64> =
        (0..n).map(|j| if j == 0 || j == n - 1 { h / 2.0 } else { h }).collect();
    let mut v: Vec<f64> = (0..n).map(|j| v_bar + s_amp * ck[j]).collect();
    let mut lambda = lambda_bar;
    let mut eps = epsilon_n(sp, n_mode)?;
    let m = n + 2;
    for iter in 0..80 {
        let grid_ref = grid;
        let res_pde = pde_residual(sp, &v, lambda, eps, grid_ref);
        let gvals: Vec<f64> = v.iter().map(|&vv| sp.g(lambda, vv)).collect();
        let cons = trapezoid(&gvals, h);
        let amp: f64 = (0..n).map(|j| 2.0 / sp.l * w[j] * (v[j] - v_bar) * ck[j]).sum::<f64>()
            - s_amp;
        let res_norm = res_pde.iter().fold(cons.abs().max(amp.abs()), |mx, r| mx.max(r.abs()));
        if res_norm <= 1e-10 {
            return Ok((ShadowState { v, lambda, eps }, eps));
        }
        let lap = crate::sim::laplacian(&v, grid_ref);
        let h2 = h * h;
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..n {
            if j == 0 {
                jac[(0, 0)] = -2.0 * eps / h2;
                jac[(0, 1)] = 2.0 * eps / h2;
            } else if j == n - 1 {
                jac[(j, j - 1)] = 2.0 * eps / h2;
                jac[(j, j)] = -2.0 * eps / h2;
            } else {
                jac[(j, j - 1)] = eps / h2;
                jac[(j, j)] = -2.0 * eps / h2;
                jac[(j, j + 1)] = eps / h2;
            }
            jac[(j, j)] += sp.f_v(lambda, v[j]);
            jac[(j, n)] = sp.f_lambda(lambda, v[j]);
            jac[(j, n + 1)] = lap[j];
            jac[(n, j)] = w[j] * sp.g_v(lambda, v[j]);
            jac[(n + 1, j)] = 2.0 / sp.l * w[j] * ck[j];
        }
        jac[(n, n)] = (0..n).map(|j| w[j] * sp.g_lambda(lambda, v[j])).sum();
        let mut rhs = DVector::zeros(m);
        for j in 0..n {
            rhs[j] = -res_pde[j];
        }
        rhs[n] = -cons;
        rhs[n + 1] = -amp;
        let delta = jac.lu().solve(&rhs).ok_or(ShadowError::SingularJacobian)?;
        for j in 0..n {
            v[j] += delta[j];
        }
        lambda += delta[n];
        eps += delta[n + 1];
        if !v.iter().all(|x| x.is_finite()) || !lambda.is_finite() || !eps.is_finite() {
            return Err(ShadowError::NewtonDiverged { iters: iter + 1, residual: f64::NAN });
        }
    }
    Err(ShadowError::NewtonDiverged { iters: 80, residual: f64::NAN })
}

/// Intercept-free two-amplitude estimate of the shadow branch direction:
/// `(eps(s0) - eps(s0/2)) / (s0^2 - s0^2/4)`.
pub fn fit_shadow_k2(
    sp: &ShadowParams,
    grid: &Grid1D,
    n_mode: usize,
    s0: f64,
) -> Result<f64, ShadowError> {
    let (_, e1) = solve_pinned_eps(sp, grid, n_mode, s0)?;
    let (_, e2) = solve_pinned_eps(sp, grid, n_mode, s0 / 2.0)?;
    Ok((e1 - e2) / (s0 * s0 * 0.75))
}

/// Roots and window of the bistable nonlinearity at a given `lambda`
/// (requires `Phi(v) = v`).
#[derive(Debug, Clone, Copy)]
pub struct BistableStructure {
    pub lambda: f64,
    pub v_bar1: f64,
    pub v_bar2: f64,
    /// `a2/c2 - 1/r`, separating the two positive roots.
    pub v_star: f64,
    pub lambda_window: (f64, f64),
}

fn bistable_factor(sp: &ShadowParams, lambda: f64, v: f64) -> f64 {
    sp.a2 - sp.b2 * lambda * (-sp.r * v).exp() - sp.c2 * v
}

fn bisect(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) * flo <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The two positive roots of `a2 - b2 lambda e^{-rv} - c2 v` straddling
/// `v* = a2/c2 - 1/r`, for `lambda` inside the bistable window.
pub fn bistable_roots(lambda: f64, sp: &ShadowParams) -> Result<BistableStructure, ShadowError> {
    if !sp.sensitivity.is_identity() {
        return Err(ShadowError::NonIdentitySensitivity);
    }
    let r_min = sp.c2 / sp.a2;
    if sp.r <= r_min {
        return Err(ShadowError::RTooSmall { r: sp.r, r_star: r_min });
    }
    let v_star = sp.a2 / sp.c2 - 1.0 / sp.r;
    let lo = sp.a2 / sp.b2;
    let hi = sp.c2 / (sp.b2 * sp.r) * (sp.a2 * sp.r / sp.c2 - 1.0).exp();
    if lambda == hi {
        return Ok(BistableStructure {
            lambda,
            v_bar1: v_star,
            v_bar2: v_star,
            v_star,
            lambda_window: (lo, hi),
        });
    }
    if lambda <= lo || lambda > hi {
        return Err(ShadowError::OutsideWindow { lambda, lo, hi });
    }
    let v_bar1 = bisect(0.0, v_star, |v| bistable_factor(sp, lambda, v));
    let v_bar2 = bisect(v_star, sp.a2 / sp.c2, |v| bistable_factor(sp, lambda, v));
    Ok(BistableStructure { lambda, v_bar1, v_bar2, v_star, lambda_window: (lo, hi) })
}

/// Equal-area integral `\int_0^{v_bar2(lambda)} f(lambda, s) ds` by
/// composite Simpson.
fn equal_area_integral(sp: &ShadowParams, lambda: f64) -> Result<f64, ShadowError> {
    let roots = bistable_roots(lambda, sp)?;
    let n = 2000;
    let h = roots.v_bar2 / n as f64;
    let mut acc = sp.f(lambda, 0.0) + sp.f(lambda, roots.v_bar2);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * sp.f(lambda, j as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// The unique `lambda*` in the bistable window satisfying the equal-area
/// (Maxwell) condition; the only value at which a standing heteroclinic
/// connection between `v_bar2` and 0 exists.
pub fn equal_area_lambda(sp: &ShadowParams) -> Result<f64, ShadowError> {
    if !sp.sensitivity.is_identity() {
        return Err(ShadowError::NonIdentitySensitivity);
    }
    let lo = sp.a2 / sp.b2;
    let hi = sp.c2 / (sp.b2 * sp.r) * (sp.a2 * sp.r / sp.c2 - 1.0).exp();
    let mut llo = lo + 1e-10 * (hi - lo);
    let mut lhi = hi - 1e-10 * (hi - lo);
    let alo = equal_area_integral(sp, llo)?;
    let ahi = equal_area_integral(sp, lhi)?;
    if alo <= 0.0 || ahi >= 0.0 {
        return Err(ShadowError::NoEqualArea);
    }
    // The area integral is strictly decreasing in lambda.
    for _ in 0..100 {
        let mid = 0.5 * (llo + lhi);
        if equal_area_integral(sp, mid)? > 0.0 {
            llo = mid;
        } else {
            lhi = mid;
        }
    }
    let _ = (alo, ahi);
    Ok(0.5 * (llo + lhi))
}

/// The standing heteroclinic connection `V'' + f(lambda*, V) = 0` from
/// `v_bar2` (as `z -> -inf`) to 0 (as `z -> +inf`), translated so
/// `V(0) = v_bar2 / 2`.
#[derive(Debug, Clone)]
pub struct HeteroclinicProfile {
    /// The equal-area multiplier at which the connection exists.
    pub lambda_star: f64,
    pub v_bar2: f64,
    /// Decay rate at the `V -> 0` end: `sqrt(-f_v(lambda*, 0))`.
    pub decay_rate: f64,
    /// Growth rate of the unstable manifold at `v_bar2`.
    pub saddle_rate: f64,
    /// Sample abscissae (uniform over the requested span, centered at 0).
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    // Dense trajectory in translated coordinates plus analytic tails.
    dense_z: Vec<f64>,
    dense_v: Vec<f64>,
    dense_w: Vec<f64>,
    z_first: f64,
    v_first: f64,
    z_stop: f64,
    v_stop: f64,
}

impl HeteroclinicProfile {
    /// Evaluates the profile at any translated abscissa, using the stored
    /// trajectory between the event points and the exact linearized tails
    /// outside them.
    pub fn eval(&self, z: f64) -> f64 {
        if z <= self.z_first {
            self.v_bar2 - (self.v_bar2 - self.v_first) * (self.saddle_rate * (z - self.z_first)).exp()
        } else if z >= self.z_stop {
            self.v_stop * (-self.decay_rate * (z - self.z_stop)).exp()
        } else {
            // Binary search in the dense trajectory.
            let idx = self.dense_z.partition_point(|&zz| zz < z).min(self.dense_z.len() - 1);
            let i1 = idx.max(1);
            let (z0, z1) = (self.dense_z[i1 - 1], self.dense_z[i1]);
            let (v0, v1) = (self.dense_v[i1 - 1], self.dense_v[i1]);
            v0 + (v1 - v0) * (z - z0) / (z1 - z0)
        }
    }

    /// Maximum drift of the first integral `H = W^2/2 + F(V)` along the
    /// integrated trajectory, relative to the rest-state energy `F(0)`.
    /// `f_antiderivative` is an antiderivative of `f(lambda*, .)`.
    pub fn first_integral_drift(&self, f_antiderivative: impl Fn(f64) -> f64) -> f64 {
        let h_ref = f_antiderivative(0.0);
        self.dense_v
            .iter()
            .zip(&self.dense_w)
            .map(|(&v, &w)| (0.5 * w * w + f_antiderivative(v) - h_ref).abs())
            .fold(0.0, f64::max)
    }
}

/// Computes the heteroclinic profile at the equal-area multiplier by
/// integrating out of the saddle at `v_bar2` with a fixed-step RK4 scheme,
/// stopping near the origin rest state and splicing the exponential tail.
pub fn heteroclinic_profile(
    sp: &ShadowParams,
    z_span: f64,
    nz: usize,
) -> Result<HeteroclinicProfile, ShadowError> {
    let lambda_star = equal_area_lambda(sp)?;
    let roots = bistable_roots(lambda_star, sp)?;
    let v2 = roots.v_bar2;
    let saddle_rate = (-sp.f_v(lambda_star, v2)).sqrt();
    let decay_rate = (-sp.f_v(lambda_star, 0.0)).sqrt();

    // Unstable-manifold start just below the saddle.
    let delta = 1e-8;
    let mut v = v2 - delta;
    let mut w = -saddle_rate * delta;
    let h = 1e-3 / saddle_rate.max(decay_rate).max(1.0);
    let accel = |v: f64| -sp.f(lambda_star, v);
    let mut dense_z = vec![0.0];
    let mut dense_v = vec![v];
    let mut dense_w = vec![w];
    let mut z = 0.0;
    let stop_level = 0.02 * v2;
    let max_steps = 10_000_000;
    let mut steps = 0;
    while v > stop_level {
        // Classic RK4 on (v, w).
        let k1v = w;
        let k1w = accel(v);
        let k2v = w + 0.5 * h * k1w;
        let k2w = accel(v + 0.5 * h * k1v);
        let k3v = w + 0.5 * h * k2w;
        let k3w = accel(v + 0.5 * h * k2v);
        let k4v = w + h * k3w;
        let k4w = accel(v + h * k3v);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        z += h;
        dense_z.push(z);
        dense_v.push(v);
        dense_w.push(w);
        steps += 1;
        if steps > max_steps || !v.is_finite() {
            return Err(ShadowError::NoEqualArea);
        }
    }

    // Half-height crossing for the translation.
    let half = v2 / 2.0;
    let mut z_half = 0.0;
    for i in 1..dense_v.len() {
        if dense_v[i] <= half && dense_v[i - 1] > half {
            let t = (dense_v[i - 1] - half) / (dense_v[i - 1] - dense_v[i]);
            z_half = dense_z[i - 1] + t * (dense_z[i] - dense_z[i - 1]);
            break;
        }
    }
    for zz in dense_z.iter_mut() {
        *zz -= z_half;
    }
    let z_first = dense_z[0];
    let v_first = dense_v[0];
    let z_stop = *dense_z.last().unwrap();
    let v_stop = *dense_v.last().unwrap();

    let mut profile = HeteroclinicProfile {
        lambda_star,
        v_bar2: v2,
        decay_rate,
        saddle_rate,
        z: Vec::new(),
        v: Vec::new(),
        dense_z,
        dense_v,
        dense_w,
        z_first,
        v_first,
        z_stop,
        v_stop,
    };
    let zs: Vec<f64> = (0..nz)
        .map(|i| -z_span / 2.0 + z_span * i as f64 / (nz - 1) as f64)
        .collect();
    profile.v = zs.iter().map(|&zz| profile.eval(zz)).collect();
    profile.z = zs;
    Ok(profile)
}

/// Outer prediction for a transition layer targeting plateau `v_bar2`.
#[derive(Debug, Clone, Copy)]
pub struct LayerPrediction {
    pub x0: f64,
    pub lambda0: f64,
    pub r_star: f64,
    pub v_bar2_double_star: f64,
    /// Admissible plateau interval.
    pub i0: (f64, f64),
}

/// Evaluates the limiting interface position, multiplier, and admissible
/// plateau window:
///
/// ```text
/// lambda0 = (a2 - c2 v2) e^{r v2} / b2,
/// x0 = a1 L / (a1 - (a1 - c1 v2) e^{-r v2}),
/// r* = (c1/a1) ln( a2 c1 / (a2 c1 - a1 c2) ).
/// ```
pub fn layer_predict(v_bar2: f64, sp: &ShadowParams) -> Result<LayerPrediction, ShadowError> {
    if !sp.sensitivity.is_identity() || sp.b1 != 0.0 {
        return Err(ShadowError::NonIdentitySensitivity);
    }
    let (a1, a2, b2, c1, c2) = (sp.a1, sp.a2, sp.b2, sp.c1, sp.c2);
    let r = sp.r;
    let r_star = c1 / a1 * (a2 * c1 / (a2 * c1 - a1 * c2)).ln();
    if r <= r_star {
        return Err(ShadowError::RTooSmall { r, r_star });
    }
    let lam = |v: f64| (a2 - c2 * v) / b2 * (r * v).exp();
    // lambda(v) decreases from its max at a2/c2 - 1/r down to 0 at a2/c2;
    // v** is where it recrosses a2/b2.
    let v_peak = a2 / c2 - 1.0 / r;
    let v_dd = bisect(v_peak, a2 / c2, |v| lam(v) - a2 / b2);
    let r_split = c1 * c2 / (a2 * c1 - a1 * c2);
    let i0 = if r < r_split { (a1 / c1, v_dd) } else { (v_peak, v_dd) };
    if !(v_bar2 > i0.0 && v_bar2 < i0.1) {
        return Err(ShadowError::OutsideI0 { v_bar2, lo: i0.0, hi: i0.1 });
    }
    let lambda0 = lam(v_bar2);
    let x0 = a1 * sp.l / (a1 - (a1 - c1 * v_bar2) * (-r * v_bar2).exp());
    Ok(LayerPrediction { x0, lambda0, r_star, v_bar2_double_star: v_dd, i0 })
}

/// Outcome of a layer solve: the solved profile and the comparison between
/// measured interface and the outer prediction.
#[derive(Debug, Clone)]
pub struct LayerReport {
    pub v_bar2_target: f64,
    pub lambda_eps: f64,
    /// The equal-area multiplier, the limit of `lambda_eps`.
    pub lambda_star: f64,
    pub x0_predicted: f64,
    pub x0_measured: f64,
    pub interface_error: f64,
    pub r_star: f64,
    pub v_bar2_double_star: f64,
    pub i0: (f64, f64),
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Solves the transition-layer boundary-value problem at the parameters'
/// `eps`, seeding Newton with the heteroclinic ansatz centered at the
/// predicted interface. The interface is pinned at its half-height value
/// with `lambda` free; the solved multiplier converges to the equal-area
/// `lambda*` as `eps -> 0`.
pub fn layer_solve(
    sp: &ShadowParams,
    v_bar2: f64,
) -> Result<(ShadowState, LayerReport), ShadowError> {
    let pred = layer_predict(v_bar2, sp)?;
    let het = heteroclinic_profile(sp, 40.0, 64)?;
    let lambda_star = het.lambda_star;
    let plateau = het.v_bar2;
    let eps = sp.eps;
    let sqe = eps.sqrt();
    let x0 = pred.x0;

    // Grid fine enough to resolve the O(sqrt(eps)) interface width.
    let n_target = (40.0 * sp.l / sqe).ceil() as usize;
    let n = n_target.clamp(2001, 24001) | 1;
    let grid = sp.grid(n);
    let h = grid.h();

    // Initial guess: heteroclinic core blended to the outer plateaus with
    // quintic smoothsteps over the outer halves of the domain pieces.
    let l_star = x0.min(sp.l - x0);
    let mut v = vec![0.0; n];
    for (j, vj) in v.iter_mut().enumerate() {
        let x = grid.node(j);
        let core = het.eval((x - x0) / sqe);
        let plateau_val = if x < x0 { plateau } else { 0.0 };
        let rise = smoothstep((x - (x0 - l_star)) / (l_star / 2.0));
        let fall = 1.0 - smoothstep((x - (x0 + l_star / 2.0)) / (l_star / 2.0));
        let zeta = rise * fall;
        *vj = plateau_val + zeta * (core - plateau_val);
    }
    let mut lambda = lambda_star;

    // Pin the node nearest the predicted interface at half height.
    let ip = (x0 / h).round() as usize;
    let pin_val = plateau / 2.0;
    let h2 = h * h;
    let mut converged = false;
    for _iter in 0..120 {
        let res = pde_residual(sp, &v, lambda, eps, &grid);
        let pin_res = v[ip] - pin_val;
        let res_norm = res.iter().fold(pin_res.abs(), |m, r| m.max(r.abs()));
        if res_norm <= 1e-10 {
            converged = true;
            break;
        }
        let mut sub = vec![eps / h2; n];
        let mut sup = vec![eps / h2; n];
        let mut diag = vec![0.0; n];
        sup[0] = 2.0 * eps / h2;
        sub[n - 1] = 2.0 * eps / h2;
        for j in 0..n {
            diag[j] = -2.0 * eps / h2 + sp.f_v(lambda, v[j]);
        }
        let b: Vec<f64> = v.iter().map(|&vv| sp.f_lambda(lambda, vv)).collect();
        let mut c = vec![0.0; n];
        c[ip] = 1.0;
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let (dv, dlam) = bordered_tridiag_solve(&sub, &diag, &sup, &b, &c, &neg_res, -pin_res)
            .ok_or(ShadowError::SingularJacobian)?;
        // Cap the update to stay inside the basin of the layered solution.
        let max_dv = dv.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let scale = if max_dv > 0.25 * plateau { 0.25 * plateau / max_dv } else { 1.0 };
        for j in 0..n {
            v[j] += scale * dv[j];
        }
        lambda += scale * dlam;
        if !v.iter().all(|x| x.is_finite()) || !lambda.is_finite() {
            return Err(ShadowError::NewtonDiverged { iters: _iter + 1, residual: f64::NAN });
        }
    }
    if !converged {
        let res = pde_residual(sp, &v, lambda, eps, &grid);
        let res_norm = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        return Err(ShadowError::NewtonDiverged { iters: 120, residual: res_norm });
    }

    // Measured interface: first downward crossing of half the plateau.
    let mut x0_measured = sp.l;
    for j in 1..n {
        if v[j] <= pin_val && v[j - 1] > pin_val {
            let t = (v[j - 1] - pin_val) / (v[j - 1] - v[j]);
            x0_measured = grid.node(j - 1) + t * h;
            break;
        }
    }

    let report = LayerReport {
        v_bar2_target: v_bar2,
        lambda_eps: lambda,
        lambda_star,
        x0_predicted: pred.x0,
        x0_measured,
        interface_error: (x0_measured - pred.x0).abs(),
        r_star: pred.r_star,
        v_bar2_double_star: pred.v_bar2_double_star,
        i0: pred.i0,
    };
    Ok((ShadowState { v, lambda, eps }, report))
}

/// One row of the shadow-limit convergence table.
#[derive(Debug, Clone, Copy)]
pub struct ShadowLimitRow {
    pub d1: f64,
    /// Oscillation of `w = u e^{r Phi(v)}` over the relaxed steady state:
    /// `(max w - min w) / mean w`. Tends to 0 in the shadow limit.
    pub osc_w: f64,
    /// Max-norm distance of the relaxed `v` to the fixed-multiplier shadow
    /// profile at `lambda = mean(w)`.
    pub v_distance: f64,
}

/// Relaxes the full system at `chi = r D1` for each listed `D1` and
/// measures how well the steady state satisfies the shadow structure
/// `u e^{r Phi(v)} = const`.
#[allow(clippy::too_many_arguments)]
pub fn shadow_limit_check(
    template: &ModelParams,
    r: f64,
    d1_list: &[f64],
    grid: &Grid1D,
    t_end: f64,
    dt: f64,
    perturbation: f64,
) -> Result<Vec<ShadowLimitRow>, ShadowError> {
    let mut rows = Vec::new();
    for &d1 in d1_list {
        let mut p = *template;
        p.d1 = d1;
        p.chi = r * d1;
        let (u_bar, v_bar) =
            p.coexistence().map_err(|e| ShadowError::SimFailed(e.to_string()))?;
        let mut init = State::constant(grid, u_bar, v_bar);
        for j in 0..grid.n {
            let c = (std::f64::consts::PI * grid.node(j) / grid.l).cos();
            init.u[j] *= 1.0 + perturbation * c;
            init.v[j] *= 1.0 + perturbation * c;
        }
        let (final_state, _) = simulate(&p, init, grid, t_end, dt, t_end, &[])
            .map_err(|e| ShadowError::SimFailed(e.to_string()))?;
        let w: Vec<f64> = (0..grid.n)
            .map(|j| {
                final_state.u[j] * (r * p.sensitivity.big_phi(final_state.v[j])).exp()
            })
            .collect();
        let w_max = w.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let w_min = w.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let w_mean = trapezoid(&w, grid.h()) / grid.l;
        let osc_w = (w_max - w_min) / w_mean;

        // Fixed-multiplier shadow profile at the matched lambda.
        let sp = ShadowParams {
            a1: p.a1,
            a2: p.a2,
            b1: p.b1,
            b2: p.b2,
            c1: p.c1,
            c2: p.c2,
            r,
            eps: p.d2,
            l: p.l,
            sensitivity: p.sensitivity,
        };
        let v_shadow = fixed_lambda_profile(&sp, w_mean, &final_state.v, grid)?;
        let v_distance = (0..grid.n)
            .map(|j| (final_state.v[j] - v_shadow[j]).abs())
            .fold(0.0f64, f64::max);
        rows.push(ShadowLimitRow { d1, osc_w, v_distance });
    }
    Ok(rows)
}

/// Newton on the shadow PDE alone at a fixed multiplier.
fn fixed_lambda_profile(
    sp: &ShadowParams,
    lambda: f64,
    guess: &[f64],
    grid: &Grid1D,
) -> Result<Vec<f64>, ShadowError> {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let eps = sp.eps;
    let mut v = guess.to_vec();
    for _ in 0..80 {
        let res = pde_residual(sp, &v, lambda, eps, grid);
        let res_norm = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if res_norm <= 1e-10 {
            return Ok(v);
        }
        let mut sub = vec![eps / h2; n];
        let mut sup = vec![eps / h2; n];
        let mut diag = vec![0.0; n];
        sup[0] = 2.0 * eps / h2;
        sub[n - 1] = 2.0 * eps / h2;
        for j in 0..n {
            diag[j] = -2.0 * eps / h2 + sp.f_v(lambda, v[j]);
        }
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let dv = crate::linalg::thomas_solve(&sub, &diag, &sup, &neg_res)
            .ok_or(ShadowError::SingularJacobian)?;
        for j in 0..n {
            v[j] += dv[j];
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(ShadowError::NewtonDiverged { iters: 80, residual: f64::NAN });
        }
    }
    Err(ShadowError::NewtonDiverged { iters: 80, residual: f64::NAN })
}

/// Amplitude of the nonconstant part of a shadow branch state (mode-n
/// cosine coefficient of `v - v_bar`), for branch output files.
pub fn shadow_amplitude(st: &ShadowState, sp: &ShadowParams, n_mode: usize) -> Result<f64, ShadowError> {
    let (v_bar, _) = shadow_equilibrium(sp)?;
    let grid = sp.grid(st.v.len());
    let dev: Vec<f64> = st.v.iter().map(|&v| v - v_bar).collect();
    Ok(mode_amplitude(&dev, &grid, n_mode))
}

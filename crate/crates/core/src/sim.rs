//! Time integration of the full system on a uniform Neumann grid with a
//! first-order IMEX scheme (implicit diffusion, explicit advection and
//! reaction), plus the discrete stationary residual and spectral
//! diagnostics shared with the continuation module.

use crate::linalg::{thomas_solve, trapezoid};
use crate::model::{kinetics, ModelError, ModelParams};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step rejected at t={t}: {reason} (after {rejections} halvings)")]
    StepRejected { t: f64, reason: String, rejections: usize },
    #[error("invariant violated at t={t}: {monitor} = {value} exceeds bound {bound}")]
    InvariantViolation { t: f64, monitor: String, value: f64, bound: f64 },
    #[error("elliptic solve for v failed at t={t} (tau = 0 step)")]
    EllipticSolveFailed { t: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Uniform node-centered grid on `[0, L]` with endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub n: usize,
    pub l: f64,
}

impl Grid1D {
    pub fn new(n: usize, l: f64) -> Self {
        assert!(n >= 16, "grid needs at least 16 nodes (got {n})");
        assert!(l > 0.0);
        Self { n, l }
    }

    pub fn h(&self) -> f64 {
        self.l / (self.n - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }
}

/// Nodal scalar field.
pub type Field = Vec<f64>;

/// Coupled `(u, v)` fields at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Field,
    pub v: Field,
    pub t: f64,
}

impl State {
    pub fn constant(grid: &Grid1D, u: f64, v: f64) -> Self {
        Self { u: vec![u; grid.n], v: vec![v; grid.n], t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

/// One diagnostics row recorded per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDiagnostics {
    pub t: f64,
    pub mass_u: f64,
    pub sup_v: f64,
    pub steady_residual_norm: f64,
    /// Cosine coefficients of `v` for the requested mode list, in order.
    pub mode_amplitudes: Vec<f64>,
}

/// Discrete cosine coefficient `(2/L) \int f cos(k pi x/L) dx` by trapezoid
/// (`(1/L) \int f` for `k = 0`).
pub fn mode_amplitude(f: &[f64], grid: &Grid1D, k: usize) -> f64 {
    let h = grid.h();
    let weighted: Vec<f64> = (0..grid.n)
        .map(|j| f[j] * (k as f64 * std::f64::consts::PI * grid.node(j) / grid.l).cos())
        .collect();
    let scale = if k == 0 { 1.0 / grid.l } else { 2.0 / grid.l };
    scale * trapezoid(&weighted, h)
}

/// Divergence of the conservative advective flux
/// `F = chi u phi(v) v'` evaluated on faces with arithmetic-mean face
/// values; zero flux at the boundary faces. Boundary rows are the face
/// difference divided by the half-cell `h/2`.
pub fn advective_divergence(u: &[f64], v: &[f64], p: &ModelParams, grid: &Grid1D) -> Vec<f64> {
    let n = grid.n;
    let h = grid.h();
    let mut flux = vec![0.0; n - 1];
    for j in 0..n - 1 {
        let uf = 0.5 * (u[j] + u[j + 1]);
        let vf = 0.5 * (v[j] + v[j + 1]);
        let dv = (v[j + 1] - v[j]) / h;
        flux[j] = p.chi * uf * p.sensitivity.phi(vf) * dv;
    }
    let mut out = vec![0.0; n];
    out[0] = flux[0] / (h / 2.0);
    for j in 1..n - 1 {
        out[j] = (flux[j] - flux[j - 1]) / h;
    }
    out[n - 1] = -flux[n - 2] / (h / 2.0);
    out
}

/// Second-difference Laplacian with Neumann ghost-node reflection.
pub fn laplacian(f: &[f64], grid: &Grid1D) -> Vec<f64> {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let mut out = vec![0.0; n];
    out[0] = 2.0 * (f[1] - f[0]) / h2;
    for j in 1..n - 1 {
        out[j] = (f[j - 1] - 2.0 * f[j] + f[j + 1]) / h2;
    }
    out[n - 1] = 2.0 * (f[n - 2] - f[n - 1]) / h2;
    out
}

/// Residual of the discretized stationary system at the state:
/// `(D1 u' + chi u phi(v) v')' + f(u,v)` and `D2 v'' + g(u,v)`.
pub fn stationary_residual(s: &State, p: &ModelParams, grid: &Grid1D) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n;
    let h = grid.h();
    // Diffusive + advective flux on faces for the u-equation.
    let mut flux = vec![0.0; n - 1];
    for j in 0..n - 1 {
        let uf = 0.5 * (s.u[j] + s.u[j + 1]);
        let vf = 0.5 * (s.v[j] + s.v[j + 1]);
        let du = (s.u[j + 1] - s.u[j]) / h;
        let dv = (s.v[j + 1] - s.v[j]) / h;
        flux[j] = p.d1 * du + p.chi * uf * p.sensitivity.phi(vf) * dv;
    }
    let lap_v = laplacian(&s.v, grid);
    let mut ru = vec![0.0; n];
    let mut rv = vec![0.0; n];
    for j in 0..n {
        let div = if j == 0 {
            flux[0] / (h / 2.0)
        } else if j == n - 1 {
            -flux[n - 2] / (h / 2.0)
        } else {
            (flux[j] - flux[j - 1]) / h
        };
        let (f, g, ..) = kinetics(p, s.u[j], s.v[j]);
        ru[j] = div + f;
        rv[j] = p.d2 * lap_v[j] + g;
    }
    (ru, rv)
}

/// Max-norm of the discrete stationary residual.
pub fn steady_residual_norm(s: &State, p: &ModelParams, grid: &Grid1D) -> f64 {
    let (ru, rv) = stationary_residual(s, p, grid);
    ru.iter().chain(rv.iter()).fold(0.0f64, |m, r| m.max(r.abs()))
}

/// Solves `(I - alpha Lap) x = rhs` with Neumann reflection (boundary rows
/// have the off-diagonal doubled).
fn implicit_diffusion_solve(rhs: &[f64], alpha_over_h2: f64, n: usize) -> Option<Vec<f64>> {
    let a = alpha_over_h2;
    let mut sub = vec![-a; n];
    let mut sup = vec![-a; n];
    let diag = vec![1.0 + 2.0 * a; n];
    sup[0] = -2.0 * a;
    sub[n - 1] = -2.0 * a;
    thomas_solve(&sub, &diag, &sup, rhs)
}

fn check_step_sanity(s: &State, rejections: usize) -> Result<(), SimError> {
    for x in s.u.iter().chain(s.v.iter()) {
        if !x.is_finite() || *x < -1e-6 {
            return Err(SimError::StepRejected {
                t: s.t,
                reason: if x.is_finite() {
                    format!("negative value {x}")
                } else {
                    "non-finite value".into()
                },
                rejections,
            });
        }
    }
    Ok(())
}

/// One IMEX step: backward Euler on the diffusion terms (tridiagonal solves
/// with Neumann reflection), explicit conservative advection and reactions.
/// When `tau = 0` the v-equation is solved as an elliptic problem by Newton
/// with the updated `u`.
pub fn step(s: &State, p: &ModelParams, grid: &Grid1D, dt: f64) -> Result<State, SimError> {
    assert!(dt > 0.0);
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let adv = advective_divergence(&s.u, &s.v, p, grid);

    let mut rhs_u = vec![0.0; n];
    for j in 0..n {
        let (f, ..) = kinetics(p, s.u[j], s.v[j]);
        rhs_u[j] = s.u[j] + dt * (adv[j] + f);
    }
    let u_new = implicit_diffusion_solve(&rhs_u, dt * p.d1 / h2, n)
        .ok_or(SimError::StepRejected { t: s.t, reason: "singular u solve".into(), rejections: 0 })?;

    let v_new = if p.tau > 0.0 {
        let dt_v = dt / p.tau;
        let mut rhs_v = vec![0.0; n];
        for j in 0..n {
            let (_, g, ..) = kinetics(p, s.u[j], s.v[j]);
            rhs_v[j] = s.v[j] + dt_v * g;
        }
        implicit_diffusion_solve(&rhs_v, dt_v * p.d2 / h2, n).ok_or(SimError::StepRejected {
            t: s.t,
            reason: "singular v solve".into(),
            rejections: 0,
        })?
    } else {
        elliptic_v_solve(&u_new, &s.v, p, grid).ok_or(SimError::EllipticSolveFailed { t: s.t })?
    };

    let next = State { u: u_new, v: v_new, t: s.t + dt };
    check_step_sanity(&next, 0)?;
    Ok(next)
}

/// Newton solve of `D2 v'' + g(u, v) = 0` at frozen `u` (the tau = 0
/// differential-algebraic split).
fn elliptic_v_solve(u: &[f64], v_guess: &[f64], p: &ModelParams, grid: &Grid1D) -> Option<Vec<f64>> {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let mut v = v_guess.to_vec();
    for _ in 0..50 {
        let lap = laplacian(&v, grid);
        let mut res = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut max_res = 0.0f64;
        for j in 0..n {
            let (_, g, _, _, _, g_v) = kinetics(p, u[j], v[j]);
            res[j] = p.d2 * lap[j] + g;
            diag[j] = -2.0 * p.d2 / h2 + g_v;
            max_res = max_res.max(res[j].abs());
        }
        if max_res < 1e-12 {
            return Some(v);
        }
        let mut sub = vec![p.d2 / h2; n];
        let mut sup = vec![p.d2 / h2; n];
        sup[0] = 2.0 * p.d2 / h2;
        sub[n - 1] = 2.0 * p.d2 / h2;
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let dv = thomas_solve(&sub, &diag, &sup, &neg_res)?;
        for j in 0..n {
            v[j] += dv[j];
        }
        if !v.iter().all(|x| x.is_finite()) {
            return None;
        }
    }
    None
}

/// A-priori bound monitors derived from the comparison principle
/// (`sup v`) and the Gronwall mass estimate (`int u`).
#[derive(Debug, Clone, Copy)]
pub struct InvariantMonitors {
    pub v_bound: f64,
    pub mass_bound: Option<f64>,
}

impl InvariantMonitors {
    pub fn from_initial(init: &State, p: &ModelParams, grid: &Grid1D) -> Self {
        let sup_v0 = init.v.iter().fold(0.0f64, |m, &x| m.max(x));
        let v_bound = if p.c2 > 0.0 { sup_v0.max(p.a2 / p.c2) } else { sup_v0 };
        let mass_bound = (p.b1 > 0.0).then(|| {
            let mass0 = trapezoid(&init.u, grid.h());
            mass0.max(p.a1 * grid.l / p.b1)
        });
        Self { v_bound, mass_bound }
    }

    pub fn check(&self, s: &State, grid: &Grid1D) -> Result<(), SimError> {
        let sup_v = s.v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        if sup_v > self.v_bound + 1e-8 {
            return Err(SimError::InvariantViolation {
                t: s.t,
                monitor: "sup_v".into(),
                value: sup_v,
                bound: self.v_bound + 1e-8,
            });
        }
        let min_uv = s.u.iter().chain(s.v.iter()).fold(f64::INFINITY, |m, &x| m.min(x));
        if min_uv < -1e-10 {
            return Err(SimError::InvariantViolation {
                t: s.t,
                monitor: "positivity".into(),
                value: min_uv,
                bound: -1e-10,
            });
        }
        if let Some(mb) = self.mass_bound {
            let mass = trapezoid(&s.u, grid.h());
            if mass > mb + 1e-6 {
                return Err(SimError::InvariantViolation {
                    t: s.t,
                    monitor: "mass_u".into(),
                    value: mass,
                    bound: mb + 1e-6,
                });
            }
        }
        Ok(())
    }
}

fn record(s: &State, p: &ModelParams, grid: &Grid1D, modes: &[usize]) -> SimDiagnostics {
    SimDiagnostics {
        t: s.t,
        mass_u: trapezoid(&s.u, grid.h()),
        sup_v: s.v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x)),
        steady_residual_norm: steady_residual_norm(s, p, grid),
        mode_amplitudes: modes.iter().map(|&k| mode_amplitude(&s.v, grid, k)).collect(),
    }
}

/// Integrates to `t_end`, recording diagnostics every `snapshot_every` time
/// units (and at the start and end) and enforcing the a-priori bound
/// monitors at every snapshot. On a rejected step the time step is halved,
/// up to 20 times over the whole run.
pub fn simulate(
    p: &ModelParams,
    init: State,
    grid: &Grid1D,
    t_end: f64,
    dt: f64,
    snapshot_every: f64,
    modes: &[usize],
) -> Result<(State, Vec<SimDiagnostics>), SimError> {
    assert!(t_end > 0.0 && dt > 0.0 && snapshot_every > 0.0);
    let monitors = InvariantMonitors::from_initial(&init, p, grid);
    let mut s = init;
    let mut diags = vec![record(&s, p, grid, modes)];
    monitors.check(&s, grid)?;
    let mut dt_cur = dt;
    let mut rejections = 0usize;
    let mut next_snap = snapshot_every;
    let t0 = s.t;
    while s.t - t0 < t_end - 1e-12 {
        let target = (t0 + next_snap).min(t0 + t_end);
        let step_dt = dt_cur.min(target - s.t);
        match step(&s, p, grid, step_dt) {
            Ok(next) => s = next,
            Err(SimError::StepRejected { t, reason, .. }) => {
                rejections += 1;
                if rejections > 20 {
                    return Err(SimError::StepRejected { t, reason, rejections });
                }
                dt_cur /= 2.0;
                continue;
            }
            Err(e) => return Err(e),
        }
        if s.t >= target - 1e-12 {
            diags.push(record(&s, p, grid, modes));
            monitors.check(&s, grid)?;
            if (target - (t0 + t_end)).abs() < 1e-12 {
                break;
            }
            next_snap += snapshot_every;
        }
    }
    Ok((s, diags))
}

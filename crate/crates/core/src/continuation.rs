//! Steady states of the stationary system: damped Newton with analytic
//! Jacobian, branch switching at the bifurcation values, pseudo-arclength
//! continuation in `chi` with discrete-linearization stability flags, and
//! the weakly-nonlinear branch-direction coefficients `K1`, `K2`.

use crate::linalg::trapezoid;
use crate::model::{kinetics, CompetitionRegime, ModelError, ModelParams};
use crate::sim::{mode_amplitude, stationary_residual, steady_residual_norm, Grid1D, State};
use crate::stability::{chi_k, StabilityError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error("Newton failed to converge after {iters} iterations (residual {residual})")]
    NewtonDiverged { iters: usize, residual: f64 },
    #[error("singular Jacobian encountered (near a bifurcation point?)")]
    SingularJacobian,
    #[error("chi span ({lo}, {hi}) does not bracket chi_{k} = {chi_k}")]
    BracketMiss { lo: f64, hi: f64, k: usize, chi_k: f64 },
    #[error("modes k and 2k resonate: 4 D1 D2 (k pi/L)^4 == (b1 c2 - b2 c1) u_bar v_bar")]
    Resonance,
    #[error("non-finite initial guess")]
    NonFiniteGuess,
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One accepted point on a bifurcation branch.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub chi: f64,
    pub state: State,
    /// Mode-k cosine coefficient of `v - v_bar`.
    pub amplitude: f64,
    /// All eigenvalues of the discrete linearization (with the `tau`
    /// mass weighting) have real part below 1e-8.
    pub stable: bool,
    pub residual: f64,
}

/// An ordered branch continued from `chi_k`.
#[derive(Debug, Clone)]
pub struct Branch {
    pub k: usize,
    pub points: Vec<BranchPoint>,
    /// Indices at which the arclength tangent's chi-component changed sign.
    pub fold_indices: Vec<usize>,
}

/// Assembles the analytic Jacobian of the stationary residual with respect
/// to `[u; v]` (dense storage, banded structure), and optionally the
/// derivative with respect to `chi` in the returned vector.
pub fn assemble_jacobian(
    s: &State,
    p: &ModelParams,
    grid: &Grid1D,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = grid.n;
    let h = grid.h();
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    let mut dchi = DVector::zeros(2 * n);

    // Face-flux partials for the u-equation.
    // F_j = D1 (u_{j+1}-u_j)/h + chi uf phi(vf) (v_{j+1}-v_j)/h
    let mut f_u_lo = vec![0.0; n - 1];
    let mut f_u_hi = vec![0.0; n - 1];
    let mut f_v_lo = vec![0.0; n - 1];
    let mut f_v_hi = vec![0.0; n - 1];
    let mut f_chi = vec![0.0; n - 1];
    for j in 0..n - 1 {
        let uf = 0.5 * (s.u[j] + s.u[j + 1]);
        let vf = 0.5 * (s.v[j] + s.v[j + 1]);
        let dv = (s.v[j + 1] - s.v[j]) / h;
        let phi = p.sensitivity.phi(vf);
        let dphi = p.sensitivity.dphi(vf);
        f_u_lo[j] = -p.d1 / h + p.chi * 0.5 * phi * dv;
        f_u_hi[j] = p.d1 / h + p.chi * 0.5 * phi * dv;
        f_v_lo[j] = p.chi * uf * (0.5 * dphi * dv - phi / h);
        f_v_hi[j] = p.chi * uf * (0.5 * dphi * dv + phi / h);
        f_chi[j] = uf * phi * dv;
    }

    let h2 = h * h;
    for j in 0..n {
        let (_, _, f_u, f_v, g_u, g_v) = kinetics(p, s.u[j], s.v[j]);
        // u-equation row j.
        if j == 0 {
            let w = 1.0 / (h / 2.0);
            jac[(0, 0)] += w * f_u_lo[0];
            jac[(0, 1)] += w * f_u_hi[0];
            jac[(0, n)] += w * f_v_lo[0];
            jac[(0, n + 1)] += w * f_v_hi[0];
            dchi[0] += w * f_chi[0];
        } else if j == n - 1 {
            let w = -1.0 / (h / 2.0);
            jac[(j, j - 1)] += w * f_u_lo[n - 2];
            jac[(j, j)] += w * f_u_hi[n - 2];
            jac[(j, n + j - 1)] += w * f_v_lo[n - 2];
            jac[(j, n + j)] += w * f_v_hi[n - 2];
            dchi[j] += w * f_chi[n - 2];
        } else {
            let w = 1.0 / h;
            jac[(j, j)] += w * (f_u_lo[j] - f_u_hi[j - 1]);
            jac[(j, j + 1)] += w * f_u_hi[j];
            jac[(j, j - 1)] += -w * f_u_lo[j - 1];
            jac[(j, n + j)] += w * (f_v_lo[j] - f_v_hi[j - 1]);
            jac[(j, n + j + 1)] += w * f_v_hi[j];
            jac[(j, n + j - 1)] += -w * f_v_lo[j - 1];
            dchi[j] += w * (f_chi[j] - f_chi[j - 1]);
        }
        jac[(j, j)] += f_u;
        jac[(j, n + j)] += f_v;

        // v-equation row n + j.
        let r = n + j;
        if j == 0 {
            jac[(r, n + 1)] += 2.0 * p.d2 / h2;
            jac[(r, n)] += -2.0 * p.d2 / h2;
        } else if j == n - 1 {
            jac[(r, n + j - 1)] += 2.0 * p.d2 / h2;
            jac[(r, n + j)] += -2.0 * p.d2 / h2;
        } else {
            jac[(r, n + j - 1)] += p.d2 / h2;
            jac[(r, n + j)] += -2.0 * p.d2 / h2;
            jac[(r, n + j + 1)] += p.d2 / h2;
        }
        jac[(r, n + j)] += g_v;
        jac[(r, j)] += g_u;
    }
    (jac, dchi)
}

fn residual_vector(s: &State, p: &ModelParams, grid: &Grid1D) -> DVector<f64> {
    let (ru, rv) = stationary_residual(s, p, grid);
    DVector::from_iterator(2 * grid.n, ru.into_iter().chain(rv))
}

/// Damped Newton on the discretized stationary system at fixed `chi`.
pub fn newton_solve(
    guess: &State,
    p: &ModelParams,
    grid: &Grid1D,
    tol: f64,
) -> Result<State, ContinuationError> {
    if !guess.is_finite() {
        return Err(ContinuationError::NonFiniteGuess);
    }
    let n = grid.n;
    let mut s = guess.clone();
    let mut res = residual_vector(&s, p, grid);
    let mut res_norm = res.amax();
    for iter in 0..50 {
        if res_norm <= tol {
            return Ok(s);
        }
        let (jac, _) = assemble_jacobian(&s, p, grid);
        let lu = jac.lu();
        let delta = lu.solve(&(-&res)).ok_or(ContinuationError::SingularJacobian)?;
        // Step halving until the residual decreases (up to 8 halvings).
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..=8 {
            let mut trial = s.clone();
            for j in 0..n {
                trial.u[j] = s.u[j] + lam * delta[j];
                trial.v[j] = s.v[j] + lam * delta[n + j];
            }
            if trial.is_finite() {
                let trial_res = residual_vector(&trial, p, grid);
                let trial_norm = trial_res.amax();
                if trial_norm < res_norm || trial_norm <= tol {
                    s = trial;
                    res = trial_res;
                    res_norm = trial_norm;
                    accepted = true;
                    break;
                }
            }
            lam /= 2.0;
        }
        if !accepted {
            return Err(ContinuationError::NewtonDiverged { iters: iter + 1, residual: res_norm });
        }
    }
    if res_norm <= tol {
        Ok(s)
    } else {
        Err(ContinuationError::NewtonDiverged { iters: 50, residual: res_norm })
    }
}

/// The first-order bifurcating ansatz
/// `(u, v) = (u_bar, v_bar) + s (Q_k, 1) cos(k pi x / L)`.
pub fn branch_switch(
    p: &ModelParams,
    grid: &Grid1D,
    k: usize,
    s: f64,
) -> Result<State, ContinuationError> {
    let bp = chi_k(p, k)?;
    let (u_bar, v_bar) = p.coexistence()?;
    let mut st = State::constant(grid, u_bar, v_bar);
    for j in 0..grid.n {
        let c = (k as f64 * std::f64::consts::PI * grid.node(j) / grid.l).cos();
        st.u[j] += s * bp.q_k * c;
        st.v[j] += s * c;
    }
    Ok(st)
}

fn amplitude_of(s: &State, grid: &Grid1D, k: usize, v_bar: f64) -> f64 {
    let dev: Vec<f64> = s.v.iter().map(|&v| v - v_bar).collect();
    mode_amplitude(&dev, grid, k)
}

/// Solves the stationary system with the mode-k amplitude of `v - v_bar`
/// pinned to `s_amp`, treating `chi` as the extra unknown. Returns the
/// solved state and `chi`. This is how branches are entered near onset and
/// how the branch-direction fit is measured.
pub fn solve_pinned_amplitude(
    p: &ModelParams,
    grid: &Grid1D,
    k: usize,
    s_amp: f64,
    guess: Option<(State, f64)>,
) -> Result<(State, f64), ContinuationError> {
    let (u_bar, v_bar) = p.coexistence()?;
    let _ = u_bar;
    let n = grid.n;
    let (mut st, mut chi) = match guess {
        Some(g) => g,
        None => (branch_switch(p, grid, k, s_amp)?, chi_k(p, k)?.chi_k),
    };
    let h = grid.h();
    // Pin-row weights: (2/L) * trapezoid weight * cos(k pi x_j / L).
    let pin: Vec<f64> = (0..n)
        .map(|j| {
            let w = if j == 0 || j == n - 1 { h / 2.0 } else { h };
            2.0 / grid.l * w * (k as f64 * std::f64::consts::PI * grid.node(j) / grid.l).cos()
        })
        .collect();

    let mut last_step = f64::INFINITY;
    let mut last_res = f64::NAN;
    for _iter in 0..60 {
        let mut pp = *p;
        pp.chi = chi;
        let res = residual_vector(&st, &pp, grid);
        let pin_res: f64 =
            pin.iter().zip(&st.v).map(|(w, &v)| w * (v - v_bar)).sum::<f64>() - s_amp;
        let res_norm = res.amax().max(pin_res.abs());
        last_res = res_norm;
        // Stiff operators (large D1 or chi) put the roundoff floor of the
        // residual above the absolute tolerance; a negligible correction
        // with a small residual is converged.
        if res_norm <= 1e-10 || (last_step <= 1e-12 * (1.0 + chi.abs()) && res_norm <= 1e-6) {
            return Ok((st, chi));
        }
        let (jac, dchi) = assemble_jacobian(&st, &pp, grid);
        let m = 2 * n + 1;
        let mut big = DMatrix::zeros(m, m);
        big.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&jac);
        for i in 0..2 * n {
            big[(i, 2 * n)] = dchi[i];
        }
        for j in 0..n {
            big[(2 * n, n + j)] = pin[j];
        }
        let mut rhs = DVector::zeros(m);
        for i in 0..2 * n {
            rhs[i] = -res[i];
        }
        rhs[2 * n] = -pin_res;
        let delta = big.lu().solve(&rhs).ok_or(ContinuationError::SingularJacobian)?;
        for j in 0..n {
            st.u[j] += delta[j];
            st.v[j] += delta[n + j];
        }
        chi += delta[2 * n];
        last_step = delta.amax();
        if !st.is_finite() || !chi.is_finite() {
            return Err(ContinuationError::NewtonDiverged { iters: _iter + 1, residual: f64::NAN });
        }
    }
    Err(ContinuationError::NewtonDiverged { iters: 60, residual: last_res })
}

/// Eigenvalue-based stability flag: all eigenvalues of
/// `diag(1, 1/tau) * J` (the semi-discrete linearization) must have real
/// part `< 1e-8`. `tau` defaults to 1 when the model carries `tau = 0`,
/// since the flag classifies the parabolic-parabolic dynamics.
pub fn stability_flag(s: &State, p: &ModelParams, grid: &Grid1D) -> Result<bool, ContinuationError> {
    let n = grid.n;
    let tau = if p.tau > 0.0 { p.tau } else { 1.0 };
    let (mut jac, _) = assemble_jacobian(s, p, grid);
    for i in n..2 * n {
        for j in 0..2 * n {
            jac[(i, j)] /= tau;
        }
    }
    let eig = jac.complex_eigenvalues();
    Ok(eig.iter().all(|z| z.re < 1e-8))
}

/// Pseudo-arclength continuation of the mode-k branch through `chi_span`.
///
/// Starts from two amplitude-pinned solves near onset, then follows the
/// branch with a secant predictor and a Newton corrector orthogonal to the
/// tangent. Terminates at the span edge, after repeated folds, or at 500
/// points.
pub fn continue_branch(
    p: &ModelParams,
    grid: &Grid1D,
    k: usize,
    chi_span: (f64, f64),
    ds: f64,
) -> Result<Branch, ContinuationError> {
    assert!(ds > 0.0);
    let bp = chi_k(p, k)?;
    let (lo, hi) = chi_span;
    if !(lo < bp.chi_k && bp.chi_k < hi) {
        return Err(ContinuationError::BracketMiss { lo, hi, k, chi_k: bp.chi_k });
    }
    let (_, v_bar) = p.coexistence()?;
    let n = grid.n;

    let make_point = |st: &State, chi: f64| -> Result<BranchPoint, ContinuationError> {
        let mut pp = *p;
        pp.chi = chi;
        Ok(BranchPoint {
            chi,
            amplitude: amplitude_of(st, grid, k, v_bar),
            stable: stability_flag(st, &pp, grid)?,
            residual: steady_residual_norm(st, &pp, grid),
            state: st.clone(),
        })
    };

    let (s1, chi1) = solve_pinned_amplitude(p, grid, k, ds, None)?;
    let (s2, chi2) =
        solve_pinned_amplitude(p, grid, k, 2.0 * ds, Some((s1.clone(), chi1)))?;
    let mut points = vec![make_point(&s1, chi1)?, make_point(&s2, chi2)?];
    let mut fold_indices = Vec::new();

    // Pack (u, v, chi) into a single vector for arclength bookkeeping.
    let pack = |st: &State, chi: f64| -> DVector<f64> {
        DVector::from_iterator(2 * n + 1, st.u.iter().chain(st.v.iter()).copied().chain([chi]))
    };
    let mut x_prev = pack(&s1, chi1);
    let mut x_cur = pack(&s2, chi2);
    let mut cur_chi = chi2;
    let mut step_len = {
        let d = &x_cur - &x_prev;
        d.norm()
    };
    let mut last_tangent_chi_sign = (x_cur[2 * n] - x_prev[2 * n]).signum();

    while points.len() < 500 {
        let mut tangent = &x_cur - &x_prev;
        let t_norm = tangent.norm();
        if t_norm == 0.0 {
            break;
        }
        tangent /= t_norm;
        let pred = &x_cur + &tangent * step_len;

        // Newton corrector on [residual; tangent'(x - pred)] = 0.
        let mut st = State {
            u: pred.as_slice()[0..n].to_vec(),
            v: pred.as_slice()[n..2 * n].to_vec(),
            t: 0.0,
        };
        let mut chi = pred[2 * n];
        let mut converged = false;
        for _ in 0..30 {
            let mut pp = *p;
            pp.chi = chi;
            let res = residual_vector(&st, &pp, grid);
            let x_now = pack(&st, chi);
            let arc_res: f64 = tangent.dot(&(&x_now - &pred));
            if res.amax().max(arc_res.abs()) <= 1e-10 {
                converged = true;
                break;
            }
            let (jac, dchi) = assemble_jacobian(&st, &pp, grid);
            let m = 2 * n + 1;
            let mut big = DMatrix::zeros(m, m);
            big.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&jac);
            for i in 0..2 * n {
                big[(i, 2 * n)] = dchi[i];
            }
            for j in 0..m {
                big[(2 * n, j)] = tangent[j];
            }
            let mut rhs = DVector::zeros(m);
            for i in 0..2 * n {
                rhs[i] = -res[i];
            }
            rhs[2 * n] = -arc_res;
            let delta = match big.lu().solve(&rhs) {
                Some(d) => d,
                None => break,
            };
            for j in 0..n {
                st.u[j] += delta[j];
                st.v[j] += delta[n + j];
            }
            chi += delta[2 * n];
            if !st.is_finite() || !chi.is_finite() {
                break;
            }
        }
        if !converged {
            if step_len > 1e-6 {
                step_len /= 2.0;
                continue;
            }
            break;
        }

        let tangent_chi_sign = (chi - cur_chi).signum();
        if tangent_chi_sign != 0.0 && tangent_chi_sign != last_tangent_chi_sign {
            fold_indices.push(points.len());
            last_tangent_chi_sign = tangent_chi_sign;
        }
        points.push(make_point(&st, chi)?);
        x_prev = x_cur;
        x_cur = pack(&st, chi);
        cur_chi = chi;
        if chi < lo || chi > hi || fold_indices.len() > 10 {
            break;
        }
        if step_len < 10.0 * ds {
            step_len *= 1.3;
        }
    }
    Ok(Branch { k, points, fold_indices })
}

/// Predicted asymptotic sign of `K2` for `min{D1, 1/D2}` large.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticSign {
    Positive,
    Negative,
    /// Not in the asymptotic regime (threshold `min{D1, 1/D2} >= 100`).
    Indeterminate,
}

/// The weakly-nonlinear expansion data at `chi_k`: branch-direction
/// coefficients and the projection integrals of the first-order correction
/// fields they reduce to.
#[derive(Debug, Clone)]
pub struct WeaklyNonlinearReport {
    pub k: usize,
    /// Identically zero for the pitchfork; kept for the fit comparison.
    pub k1: f64,
    pub k2: f64,
    /// The five assembled contributions to the K2 projection sum, in
    /// order: the direct `phi', phi''` term, the two mean-mode terms, and
    /// the two double-mode terms.
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub i_phi1: f64,
    pub i_psi1: f64,
    pub i_phi1_cos2k: f64,
    pub i_psi1_cos2k: f64,
    pub det_a: f64,
    pub det_a1: f64,
    pub det_a2: f64,
    pub asymptotic_sign: AsymptoticSign,
    /// Degenerate-direction threshold test with the `u_bar` exponent as in
    /// the proposition statement; only meaningful when
    /// `phi'(v_bar)/phi(v_bar) == c2/(b2 u_bar)`.
    pub case_i_threshold_statement: Option<bool>,
    /// Same test with the `u_bar^2` exponent printed in the proof display.
    pub case_i_threshold_proof: Option<bool>,
}

/// Evaluates the closed-form weakly-nonlinear coefficients at `chi_k(k)`.
pub fn weakly_nonlinear(p: &ModelParams, k: usize) -> Result<WeaklyNonlinearReport, ContinuationError> {
    let bp = chi_k(p, k)?;
    let (u_bar, v_bar) = p.coexistence()?;
    let l = p.l;
    let pi = std::f64::consts::PI;
    let lam = (k as f64 * pi / l).powi(2);
    let lam4 = (2.0 * k as f64 * pi / l).powi(2);
    let chi = bp.chi_k;
    let q = bp.q_k;
    let phi = p.sensitivity.phi(v_bar);
    let dphi = p.sensitivity.dphi(v_bar);
    let d2phi = p.sensitivity.d2phi(v_bar);
    let cdet = p.coexistence_det();

    // Resonance guard: the double-mode system is singular exactly when
    // 4 D1 D2 (k pi/L)^4 = (b1 c2 - b2 c1) u_bar v_bar (chi_k == chi_2k).
    let res_gap = 4.0 * p.d1 * p.d2 * lam * lam - cdet * u_bar * v_bar;
    let res_scale = (4.0 * p.d1 * p.d2 * lam * lam).abs() + (cdet * u_bar * v_bar).abs();
    if res_gap.abs() <= 1e-12 * res_scale.max(1.0) {
        return Err(ContinuationError::Resonance);
    }

    // Mean-mode integrals of the correction fields.
    let i_phi1 = (p.c1 * u_bar * l * (p.b2 * q + p.c2)
        - p.c2 * v_bar * l * (p.b1 * q * q + p.c1 * q))
        / (2.0 * u_bar * v_bar * cdet);
    let i_psi1 = (p.b2 * v_bar * l * (p.b1 * q * q + p.c1 * q)
        - p.b1 * u_bar * l * (p.b2 * q + p.c2))
        / (2.0 * u_bar * v_bar * cdet);

    // Double-mode (cos 2k) projections by Cramer's rule on the 2x2 system.
    let det_a = (p.d1 * lam4 + p.b1 * u_bar) * (p.d2 * lam4 + p.c2 * v_bar)
        - p.b2 * u_bar * v_bar * (chi * phi * lam4 + p.c1);
    let r1t = chi * lam * (dphi * u_bar + q * phi) * l / 2.0
        + (p.b1 * q * q + p.c1 * q) * l / 4.0;
    let r2t = (p.b2 * q + p.c2) * l / 4.0;
    let det_a1 = -r1t * (p.d2 * lam4 + p.c2 * v_bar) + r2t * (chi * phi * u_bar * lam4 + p.c1 * u_bar);
    let det_a2 = p.b2 * v_bar * r1t - r2t * (p.d1 * lam4 + p.b1 * u_bar);
    let i_phi1_cos2k = det_a1 / det_a;
    let i_psi1_cos2k = det_a2 / det_a;

    // Projection of the second-order system onto the kernel mode.
    let bq = (p.d1 * lam + p.b1 * u_bar - q * (p.c1 * u_bar + chi * lam * u_bar * phi))
        / (v_bar * (1.0 + q * q));
    let kpi2 = (k as f64 * pi).powi(2);
    let b0 = (dphi * q + 0.5 * d2phi * u_bar) * kpi2 * chi / (8.0 * l);
    let b1 = 0.5 * (2.0 * p.b1 * q + p.c1 + chi * phi * lam - bq) * i_phi1;
    let b2 = 0.5
        * (p.c1 * q + chi * u_bar * dphi * lam - bq * (p.b2 * q + 2.0 * p.c2) / p.b2)
        * i_psi1;
    let b3 = 0.5 * (2.0 * p.b1 * q + p.c1 - chi * phi * lam - bq) * i_phi1_cos2k;
    let b4 = 0.5
        * (p.c1 * q + chi * lam * (2.0 * phi * q + u_bar * dphi)
            - bq * (p.b2 * q + 2.0 * p.c2) / p.b2)
        * i_psi1_cos2k;
    let k2 = -(b0 + b1 + b2 + b3 + b4) / (kpi2 * phi * u_bar / (2.0 * l));

    // Asymptotic sign prediction, only in the large-diffusion-ratio regime.
    let regime = crate::model::classify_competition(p)?;
    let asymptotic = if p.d1.min(1.0 / p.d2) >= 100.0 {
        if regime == CompetitionRegime::Strong {
            AsymptoticSign::Negative
        } else {
            let degenerate_dir = dphi / phi - p.c2 / (p.b2 * u_bar);
            if degenerate_dir.abs() < 1e-10 {
                if d2phi / phi > 2.0 * p.c2 * p.c2 / (p.b2 * p.b2 * u_bar) {
                    AsymptoticSign::Positive
                } else {
                    AsymptoticSign::Negative
                }
            } else if p.d1 * p.d2 * lam * lam < cdet * u_bar * v_bar / 4.0 {
                AsymptoticSign::Positive
            } else {
                AsymptoticSign::Negative
            }
        }
    } else {
        AsymptoticSign::Indeterminate
    };
    let degenerate_dir = dphi / phi - p.c2 / (p.b2 * u_bar);
    let (case_stmt, case_proof) = if degenerate_dir.abs() < 1e-10 {
        (
            Some(d2phi / phi > 2.0 * p.c2 * p.c2 / (p.b2 * p.b2 * u_bar)),
            Some(d2phi / phi > 2.0 * p.c2 * p.c2 / (p.b2 * p.b2 * u_bar * u_bar)),
        )
    } else {
        (None, None)
    };

    Ok(WeaklyNonlinearReport {
        k,
        k1: 0.0,
        k2,
        b0,
        b1,
        b2,
        b3,
        b4,
        i_phi1,
        i_psi1,
        i_phi1_cos2k,
        i_psi1_cos2k,
        det_a,
        det_a1,
        det_a2,
        asymptotic_sign: asymptotic,
        case_i_threshold_statement: case_stmt,
        case_i_threshold_proof: case_proof,
    })
}

/// Intercept-free two-amplitude estimate of `K2` from amplitude-pinned
/// solves: `(chi(s0) - chi(s0/2)) / (s0^2 - s0^2/4)`. Avoids using the
/// continuum `chi_k` as an intercept, whose O(h^2) offset would be
/// amplified by 1/s^2.
pub fn fit_k2(
    p: &ModelParams,
    grid: &Grid1D,
    k: usize,
    s0: f64,
) -> Result<f64, ContinuationError> {
    let (_, chi_a) = solve_pinned_amplitude(p, grid, k, s0, None)?;
    let (_, chi_b) = solve_pinned_amplitude(p, grid, k, s0 / 2.0, None)?;
    Ok((chi_a - chi_b) / (s0 * s0 * 0.75))
}

/// Linear-in-amplitude coefficient fitted from two pinned solves at `+s`
/// and `-s`; vanishes for a pitchfork.
pub fn fit_k1(
    p: &ModelParams,
    grid: &Grid1D,
    k: usize,
    s0: f64,
) -> Result<f64, ContinuationError> {
    let (_, chi_a) = solve_pinned_amplitude(p, grid, k, s0, None)?;
    let (_, chi_b) = solve_pinned_amplitude(p, grid, k, -s0, None)?;
    Ok((chi_a - chi_b) / (2.0 * s0))
}

/// Discrete L2 norms of the deviation from the coexistence state, used in
/// branch output files.
pub fn deviation_norms(s: &State, p: &ModelParams, grid: &Grid1D) -> Result<(f64, f64), ContinuationError> {
    let (u_bar, v_bar) = p.coexistence()?;
    let du: Vec<f64> = s.u.iter().map(|&u| (u - u_bar) * (u - u_bar)).collect();
    let dv: Vec<f64> = s.v.iter().map(|&v| (v - v_bar) * (v - v_bar)).collect();
    Ok((trapezoid(&du, grid.h()).sqrt(), trapezoid(&dv, grid.h()).sqrt()))
}

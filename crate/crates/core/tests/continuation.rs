//! Steady-state continuation checks: Jacobian consistency, pitchfork
//! symmetry, agreement of the closed-form branch-direction coefficient with
//! an independent amplitude-pinned continuation fit, and branch following.

use approx::assert_relative_eq;
use chemotax_lv_core::continuation::{
    assemble_jacobian, branch_switch, continue_branch, fit_k1, fit_k2, newton_solve,
    solve_pinned_amplitude, weakly_nonlinear, ContinuationError,
};
use chemotax_lv_core::model::{weak_defaults, ModelParams, SensitivitySpec};
use chemotax_lv_core::sim::{stationary_residual, Grid1D, State};
use chemotax_lv_core::stability::chi_k;

/// The analytic steady-state Jacobian must match finite differences of the
/// residual at a generic (non-equilibrium) state.
#[test]
fn jacobian_matches_finite_differences() {
    let mut p = weak_defaults();
    p.chi = 10.0;
    p.sensitivity = SensitivitySpec::cubic(1.0, 0.3, -0.1, 0.02);
    let grid = Grid1D::new(24, p.l);
    let n = grid.n;
    let mut s = State::constant(&grid, 1.2, 0.4);
    for j in 0..n {
        let x = grid.node(j);
        s.u[j] += 0.1 * x.cos() + 0.03 * (2.0 * x).cos();
        s.v[j] += 0.05 * x.cos() - 0.02 * (3.0 * x).cos();
    }
    let (jac, dchi) = assemble_jacobian(&s, &p, &grid);
    let resid = |st: &State, pp: &ModelParams| -> Vec<f64> {
        let (ru, rv) = stationary_residual(st, pp, &grid);
        ru.into_iter().chain(rv).collect()
    };
    let h = 1e-6;
    // Columns for u and v nodes.
    for col in [0, 1, n / 2, n - 1, n, n + n / 2, 2 * n - 1] {
        let mut sp = s.clone();
        let mut sm = s.clone();
        if col < n {
            sp.u[col] += h;
            sm.u[col] -= h;
        } else {
            sp.v[col - n] += h;
            sm.v[col - n] -= h;
        }
        let rp = resid(&sp, &p);
        let rm = resid(&sm, &p);
        for row in 0..2 * n {
            let fd = (rp[row] - rm[row]) / (2.0 * h);
            let an = jac[(row, col)];
            assert!(
                (fd - an).abs() <= 1e-4 * (1.0 + an.abs()),
                "J[{row},{col}]: fd {fd} vs analytic {an}"
            );
        }
    }
    // chi column.
    let mut pp = p;
    pp.chi += h;
    let mut pm = p;
    pm.chi -= h;
    let rp = resid(&s, &pp);
    let rm = resid(&s, &pm);
    for row in 0..2 * n {
        let fd = (rp[row] - rm[row]) / (2.0 * h);
        assert!((fd - dchi[row]).abs() <= 1e-5 * (1.0 + dchi[row].abs()));
    }
}

#[test]
fn newton_recovers_equilibrium_from_nearby_guess() {
    let mut p = weak_defaults();
    p.chi = 5.0;
    let grid = Grid1D::new(48, p.l);
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let mut guess = State::constant(&grid, u_bar, v_bar);
    for j in 0..grid.n {
        guess.u[j] += 1e-3 * (grid.node(j)).cos();
    }
    let s = newton_solve(&guess, &p, &grid, 1e-12).unwrap();
    for j in 0..grid.n {
        assert_relative_eq!(s.u[j], u_bar, max_relative = 1e-10);
        assert_relative_eq!(s.v[j], v_bar, max_relative = 1e-10);
    }
}

/// The bifurcation is a pitchfork: pinning amplitude +s and -s must give
/// the same chi, and the fitted linear coefficient must vanish.
#[test]
fn pitchfork_symmetry() {
    let p = weak_defaults();
    let grid = Grid1D::new(201, p.l);
    let s0 = 0.01;
    let (_, chi_plus) = solve_pinned_amplitude(&p, &grid, 1, s0, None).unwrap();
    let (_, chi_minus) = solve_pinned_amplitude(&p, &grid, 1, -s0, None).unwrap();
    assert_relative_eq!(chi_plus, chi_minus, max_relative = 1e-10);
    let k1 = fit_k1(&p, &grid, 1, s0).unwrap();
    assert!(k1.abs() <= 1e-3, "K1 fit {k1}");
}

/// Near onset the pinned chi approaches chi_k as the amplitude shrinks.
#[test]
fn pinned_chi_approaches_threshold() {
    let p = weak_defaults();
    let grid = Grid1D::new(401, p.l);
    let chi1 = chi_k(&p, 1).unwrap().chi_k;
    let (_, chi_a) = solve_pinned_amplitude(&p, &grid, 1, 0.02, None).unwrap();
    let (_, chi_b) = solve_pinned_amplitude(&p, &grid, 1, 0.01, None).unwrap();
    // chi(s) = chi_k + K2 s^2 + O(s^4): the gap shrinks by ~4.
    let (ga, gb) = (chi_a - chi1, chi_b - chi1);
    assert!(ga.abs() > gb.abs());
    assert!((ga / gb - 4.0).abs() < 0.7, "quadratic ratio {}", ga / gb);
}

/// Closed-form K2 against the continuation fit, weak defaults (K2 < 0,
/// subcritical) and a cubic-sensitivity variant.
#[test]
fn weakly_nonlinear_k2_matches_continuation_fit() {
    let p = weak_defaults();
    let grid = Grid1D::new(401, p.l);
    let report = weakly_nonlinear(&p, 1).unwrap();
    assert!(report.k1.abs() < 1e-12);
    let fit = fit_k2(&p, &grid, 1, 0.005).unwrap();
    assert_relative_eq!(report.k2, fit, max_relative = 0.02);
    assert!(report.k2 < 0.0);

    let mut pc = p;
    pc.sensitivity = SensitivitySpec::cubic(1.0, 0.5, 0.2, 0.0);
    let report_c = weakly_nonlinear(&pc, 1).unwrap();
    let fit_c = fit_k2(&pc, &grid, 1, 0.005).unwrap();
    assert_relative_eq!(report_c.k2, fit_c, max_relative = 0.02);
}

/// A moderate-diffusion draw with K2 > 0 (supercritical): the fit must
/// agree in value and the near-onset branch must be flagged stable, while
/// weak defaults (subcritical) give unstable near-onset points.
#[test]
fn branch_stability_follows_branch_direction() {
    let sup = ModelParams {
        a1: 1.25,
        a2: 2.8,
        b1: 4.0,
        b2: 4.0,
        c1: 0.25,
        c2: 3.2,
        d1: 6.0,
        d2: 0.8,
        chi: 0.0,
        tau: 1.0,
        l: 2.2,
        sensitivity: SensitivitySpec::constant_one(),
    };
    let grid = Grid1D::new(201, sup.l);
    let report = weakly_nonlinear(&sup, 1).unwrap();
    assert!(report.k2 > 0.0);
    let fit = fit_k2(&sup, &grid, 1, 0.01).unwrap();
    assert_relative_eq!(report.k2, fit, max_relative = 0.05);

    let chi1 = chi_k(&sup, 1).unwrap().chi_k;
    let branch = continue_branch(&sup, &grid, 1, (0.95 * chi1, 1.05 * chi1), 0.01).unwrap();
    let near_onset: Vec<_> =
        branch.points.iter().filter(|pt| pt.amplitude.abs() < 0.05).collect();
    assert!(!near_onset.is_empty());
    assert!(near_onset.iter().all(|pt| pt.stable), "supercritical branch must start stable");

    let p = weak_defaults();
    let gridw = Grid1D::new(201, p.l);
    let chi1w = chi_k(&p, 1).unwrap().chi_k;
    let branchw = continue_branch(&p, &gridw, 1, (0.95 * chi1w, 1.1 * chi1w), 0.005).unwrap();
    let near_onset_w: Vec<_> =
        branchw.points.iter().filter(|pt| pt.amplitude.abs() < 0.02).collect();
    assert!(!near_onset_w.is_empty());
    assert!(
        near_onset_w.iter().all(|pt| !pt.stable),
        "subcritical branch must start unstable"
    );
    // All branch points are genuine solutions.
    for pt in &branchw.points {
        assert!(pt.residual < 1e-9);
    }
}

#[test]
fn branch_continuation_reproduces_under_halved_step() {
    let p = weak_defaults();
    let grid = Grid1D::new(201, p.l);
    let chi1 = chi_k(&p, 1).unwrap().chi_k;
    let span = (0.95 * chi1, 1.1 * chi1);
    let b1 = continue_branch(&p, &grid, 1, span, 0.01).unwrap();
    let b2 = continue_branch(&p, &grid, 1, span, 0.005).unwrap();
    // Both runs trace the same curve: compare chi at matched amplitudes by
    // linear interpolation in amplitude over the monotone initial segment.
    let seg = |b: &chemotax_lv_core::continuation::Branch| -> Vec<(f64, f64)> {
        b.points.iter().map(|pt| (pt.amplitude, pt.chi)).take(8).collect()
    };
    let s1 = seg(&b1);
    let s2 = seg(&b2);
    for (amp, chi) in &s1 {
        // Find the bracketing pair in s2.
        for w in s2.windows(2) {
            let (a0, c0) = w[0];
            let (a1, c1) = w[1];
            if (a0 - amp) * (a1 - amp) <= 0.0 && (a1 - a0).abs() > 1e-12 {
                let t = (amp - a0) / (a1 - a0);
                let interp = c0 + t * (c1 - c0);
                assert_relative_eq!(chi, &interp, max_relative = 1e-4);
                break;
            }
        }
    }
}

#[test]
fn branch_switch_has_requested_structure() {
    let p = weak_defaults();
    let grid = Grid1D::new(101, p.l);
    let s = branch_switch(&p, &grid, 2, 0.05).unwrap();
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let q2 = chi_k(&p, 2).unwrap().q_k;
    assert_relative_eq!(s.v[0] - v_bar, 0.05, max_relative = 1e-12);
    assert_relative_eq!(s.u[0] - u_bar, 0.05 * q2, max_relative = 1e-12);
}

#[test]
fn bracket_miss_is_reported() {
    let p = weak_defaults();
    let grid = Grid1D::new(101, p.l);
    let err = continue_branch(&p, &grid, 1, (20.0, 30.0), 0.01).unwrap_err();
    assert!(matches!(err, ContinuationError::BracketMiss { .. }));
}

/// The resonance guard rejects parameter sets where chi_k == chi_2k makes
/// the double-mode correction singular. Weak competition with equal
/// diffusivities can be tuned onto the resonance by scaling D1 D2.
#[test]
fn resonance_guard_trips_on_degenerate_draw() {
    // Find a resonant set: 4 D1 D2 lam^2 == cdet u v with lam = (pi/L)^2.
    let mut p = weak_defaults();
    let (u, v) = p.coexistence().unwrap();
    let cdet = p.coexistence_det();
    let lam = (std::f64::consts::PI / p.l).powi(2);
    p.d2 = cdet * u * v / (4.0 * p.d1 * lam * lam);
    match weakly_nonlinear(&p, 1) {
        Err(ContinuationError::Resonance) => {}
        other => panic!("expected resonance rejection, got {other:?}"),
    }
}

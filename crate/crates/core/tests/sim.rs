//! Time-integrator checks against closed-form ODE solutions, conservation
//! identities, linear growth-rate predictions, and the a-priori bound
//! monitors.

use approx::assert_relative_eq;
use chemotax_lv_core::model::weak_defaults;
use chemotax_lv_core::sim::{
    mode_amplitude, simulate, steady_residual_norm, Grid1D, InvariantMonitors, SimError, State,
};
use chemotax_lv_core::stability::{chi_threshold, growth_rate};

#[test]
fn coexistence_state_is_a_fixed_point() {
    let p = weak_defaults();
    let grid = Grid1D::new(64, p.l);
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let init = State::constant(&grid, u_bar, v_bar);
    let (fin, _) = simulate(&p, init, &grid, 5.0, 1e-2, 5.0, &[]).unwrap();
    for j in 0..grid.n {
        assert_relative_eq!(fin.u[j], u_bar, max_relative = 1e-12);
        assert_relative_eq!(fin.v[j], v_bar, max_relative = 1e-12);
    }
    assert!(steady_residual_norm(&fin, &p, &grid) < 1e-12);
}

/// With v = 0 and spatially constant u, the u-equation is the logistic ODE
/// u' = (a1 - b1 u) u, whose exact solution is the oracle. First-order
/// stepping: error must shrink linearly in dt.
#[test]
fn logistic_ode_oracle_and_first_order_convergence() {
    let p = weak_defaults();
    let grid = Grid1D::new(32, p.l);
    let u0 = 0.1;
    let t_end = 2.0;
    let exact = {
        // u(t) = K u0 e^{a t} / (K + u0 (e^{a t} - 1)), K = a1/b1.
        let k = p.a1 / p.b1;
        let e = (p.a1 * t_end).exp();
        k * u0 * e / (k + u0 * (e - 1.0))
    };
    let mut errs = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let init = State::constant(&grid, u0, 0.0);
        let (fin, _) = simulate(&p, init, &grid, t_end, dt, t_end, &[]).unwrap();
        errs.push((fin.u[0] - exact).abs());
    }
    // Error halves with dt (ratio ~ 2 for a first-order scheme).
    assert!(errs[0] / errs[1] > 1.7 && errs[0] / errs[1] < 2.3, "ratio {}", errs[0] / errs[1]);
    assert!(errs[1] / errs[2] > 1.7 && errs[1] / errs[2] < 2.3);
    assert!(errs[2] < 1e-3);
}

/// Without kinetics in the u-equation the u mass is exactly conserved by
/// the conservative flux discretization.
#[test]
fn advective_transport_conserves_mass() {
    let mut p = weak_defaults();
    p.a1 = 0.0;
    p.b1 = 0.0;
    p.c1 = 0.0;
    p.chi = 2.0;
    let grid = Grid1D::new(128, p.l);
    let mut init = State::constant(&grid, 1.0, 0.5);
    for j in 0..grid.n {
        let x = grid.node(j);
        init.u[j] += 0.2 * (std::f64::consts::PI * x / p.l).cos();
        init.v[j] += 0.1 * (2.0 * std::f64::consts::PI * x / p.l).cos();
    }
    let (_, diags) = simulate(&p, init, &grid, 1.0, 1e-3, 0.25, &[]).unwrap();
    let m0 = diags.first().unwrap().mass_u;
    for d in &diags {
        assert_relative_eq!(d.mass_u, m0, max_relative = 1e-11);
    }
}

/// Self-convergence of the full scheme (advection + reaction + diffusion)
/// under dt refinement at fixed grid.
#[test]
fn self_convergence_in_time() {
    let mut p = weak_defaults();
    p.chi = 5.0;
    let grid = Grid1D::new(96, p.l);
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let mut init = State::constant(&grid, u_bar, v_bar);
    for j in 0..grid.n {
        let c = (std::f64::consts::PI * grid.node(j) / p.l).cos();
        init.u[j] *= 1.0 + 0.05 * c;
        init.v[j] *= 1.0 - 0.05 * c;
    }
    let run = |dt: f64| {
        let (fin, _) = simulate(&p, init.clone(), &grid, 0.5, dt, 0.5, &[]).unwrap();
        fin
    };
    let f1 = run(2e-3);
    let f2 = run(1e-3);
    let f3 = run(5e-4);
    let dist = |a: &State, b: &State| {
        (0..grid.n).map(|j| (a.u[j] - b.u[j]).abs().max((a.v[j] - b.v[j]).abs())).fold(0.0, f64::max)
    };
    let e12 = dist(&f1, &f2);
    let e23 = dist(&f2, &f3);
    assert!(e12 / e23 > 1.7 && e12 / e23 < 2.3, "ratio {}", e12 / e23);
}

/// Just above threshold mode 1 must grow at the rate predicted by the
/// leading eigenvalue of H_1; just below it must decay at that rate.
#[test]
fn linear_growth_rate_matches_mode_matrix() {
    let base = weak_defaults();
    let grid = Grid1D::new(256, base.l);
    let (chi0, k0) = chi_threshold(&base, 64).unwrap();
    assert_eq!(k0, 1);
    for factor in [1.1, 0.9] {
        let mut p = base;
        p.chi = factor * chi0;
        let predicted = growth_rate(&p, 1).unwrap()[0].0;
        let (u_bar, v_bar) = p.coexistence().unwrap();
        let mut init = State::constant(&grid, u_bar, v_bar);
        let amp0 = 1e-5;
        for j in 0..grid.n {
            let c = (std::f64::consts::PI * grid.node(j) / p.l).cos();
            init.v[j] += amp0 * c;
        }
        let (_, diags) = simulate(&p, init, &grid, 25.0, 2e-3, 0.5, &[1]).unwrap();
        // Least-squares slope of ln|amp_1| over the post-transient window
        // where the mode is still in the linear range.
        let pts: Vec<(f64, f64)> = diags
            .iter()
            .filter(|d| d.t > 3.0 && d.mode_amplitudes[0].abs() > 1e-9
                && d.mode_amplitudes[0].abs() < 5e-3)
            .map(|d| (d.t, d.mode_amplitudes[0].abs().ln()))
            .collect();
        assert!(pts.len() >= 5, "too few snapshots in the fit window");
        let n = pts.len() as f64;
        let (st, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (stt, sty): (f64, f64) =
            pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
        let measured = (n * sty - st * sy) / (n * stt - st * st);
        assert!(
            (measured - predicted).abs() <= 0.05 * predicted.abs(),
            "chi = {} chi0: measured {measured}, predicted {predicted}",
            factor
        );
        if factor > 1.0 {
            assert!(measured > 0.0);
        } else {
            assert!(measured < 0.0);
        }
    }
}

/// The quasi-steady v-equation (tau = 0) relaxes to the same steady state
/// as tau = 1.
#[test]
fn quasi_steady_v_reaches_same_equilibrium() {
    let mut p = weak_defaults();
    p.tau = 0.0;
    let grid = Grid1D::new(64, p.l);
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let mut init = State::constant(&grid, u_bar * 1.1, v_bar * 0.9);
    for j in 0..grid.n {
        init.u[j] += 0.01 * (std::f64::consts::PI * grid.node(j) / p.l).cos();
    }
    let (fin, _) = simulate(&p, init, &grid, 40.0, 5e-3, 40.0, &[]).unwrap();
    for j in 0..grid.n {
        assert_relative_eq!(fin.u[j], u_bar, max_relative = 1e-6);
        assert_relative_eq!(fin.v[j], v_bar, max_relative = 1e-6);
    }
}

/// The monitors accept every state of a legitimate run and trip on a
/// deliberately corrupted state.
#[test]
fn monitors_pass_valid_run_and_trip_on_corruption() {
    let p = weak_defaults();
    let grid = Grid1D::new(64, p.l);
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let init = State::constant(&grid, u_bar * 1.2, v_bar * 0.8);
    let monitors = InvariantMonitors::from_initial(&init, &p, &grid);
    let (fin, _) = simulate(&p, init, &grid, 3.0, 1e-2, 1.0, &[]).unwrap();
    monitors.check(&fin, &grid).unwrap();

    let mut corrupted = fin.clone();
    corrupted.v[3] = p.a2 / p.c2 + 1.0;
    assert!(matches!(
        monitors.check(&corrupted, &grid),
        Err(SimError::InvariantViolation { .. })
    ));

    let mut negative = fin;
    negative.u[5] = -0.1;
    assert!(matches!(
        monitors.check(&negative, &grid),
        Err(SimError::InvariantViolation { .. })
    ));
}

/// sup v stays below max(sup v0, a2/c2) throughout a strongly advective
/// run (comparison-principle bound).
#[test]
fn v_bound_holds_under_strong_advection() {
    let mut p = weak_defaults();
    p.chi = 20.0;
    let grid = Grid1D::new(128, p.l);
    let (u_bar, v_bar) = p.coexistence().unwrap();
    let mut init = State::constant(&grid, u_bar, v_bar);
    for j in 0..grid.n {
        let c = (std::f64::consts::PI * grid.node(j) / p.l).cos();
        init.u[j] *= 1.0 + 0.05 * c;
        init.v[j] *= 1.0 + 0.05 * c;
    }
    let bound = init.v.iter().fold(0.0f64, |m, &v| m.max(v)).max(p.a2 / p.c2) + 1e-8;
    let (_, diags) = simulate(&p, init, &grid, 20.0, 1e-3, 2.0, &[1]).unwrap();
    for d in &diags {
        assert!(d.sup_v <= bound, "sup v {} exceeds {bound} at t = {}", d.sup_v, d.t);
    }
}

#[test]
fn mode_amplitude_recovers_cosine_coefficients() {
    let grid = Grid1D::new(201, std::f64::consts::PI);
    let f: Vec<f64> = (0..grid.n)
        .map(|j| {
            let x = grid.node(j);
            0.7 + 0.3 * x.cos() - 0.2 * (3.0 * x).cos()
        })
        .collect();
    assert_relative_eq!(mode_amplitude(&f, &grid, 0), 0.7, max_relative = 1e-4);
    assert_relative_eq!(mode_amplitude(&f, &grid, 1), 0.3, max_relative = 1e-3);
    assert_relative_eq!(mode_amplitude(&f, &grid, 3), -0.2, max_relative = 1e-3);
    assert!(mode_amplitude(&f, &grid, 2).abs() < 1e-6);
}

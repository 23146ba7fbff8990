//! End-to-end acceptance checks: each criterion exercises one headline
//! result of the analysis (bifurcation values, branch directions, shadow
//! limit, transition layers, a-priori bounds) against an independent
//! oracle, and returns a one-line pass/fail record. The suite backs both
//! the integration test and the `verify-all` command.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::continuation::{
    continue_branch, fit_k1, fit_k2, weakly_nonlinear, AsymptoticSign, ContinuationError,
};
use crate::model::{
    classify_competition, weak_defaults, CompetitionRegime, ModelParams, SensitivitySpec,
};
use crate::shadow::{
    epsilon_n, fit_shadow_k2, heteroclinic_profile, layer_solve, shadow_equilibrium, shadow_k2,
    shadow_limit_check, shadow_linearization_spectrum, ShadowParams, ShadowState,
};
use crate::sim::{simulate, Grid1D, InvariantMonitors, State};
use crate::stability::{chi_k, chi_threshold, growth_rate, mode_matrix};

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    /// One-line report: `criterion 3 [PASS] pitchfork-structure: ...`.
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:2} [{}] {}: {} ({:.1}s)",
            self.index,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn run_criterion(
    index: usize,
    name: &'static str,
    body: impl FnOnce() -> Result<String, String>,
) -> CriterionResult {
    let start = Instant::now();
    let (pass, detail) = match body() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CriterionResult { index, name, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

/// Runs all ten criteria in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1_bifurcation_value_oracle(),
        criterion_2_instability_threshold(),
        criterion_3_pitchfork_structure(),
        criterion_4_mode_selection(),
        criterion_5_shadow_limit(),
        criterion_6_shadow_bifurcation_values(),
        criterion_7_shadow_sign_map(),
        criterion_8_transition_layer(),
        criterion_9_heteroclinic_integrity(),
        criterion_10_a_priori_bounds(),
    ]
}

pub fn all_pass(results: &[CriterionResult]) -> bool {
    results.iter().all(|r| r.pass)
}

/// Random feasible weak-chain draw: `b = (2,1)s_b`, `c = (1,2)s_c` keeps
/// the coexistence determinant positive; retried until the coexistence
/// state itself is positive.
fn random_weak_draw(rng: &mut ChaCha8Rng) -> ModelParams {
    loop {
        let s_b = rng.gen_range(0.5..2.0);
        let s_c = rng.gen_range(0.5..2.0);
        let p = ModelParams {
            a1: rng.gen_range(1.0..4.0),
            a2: rng.gen_range(1.0..4.0),
            b1: 2.0 * s_b,
            b2: s_b,
            c1: s_c,
            c2: 2.0 * s_c,
            d1: rng.gen_range(0.2..5.0),
            d2: rng.gen_range(0.2..5.0),
            chi: 0.0,
            tau: 1.0,
            l: rng.gen_range(1.0..6.0),
            sensitivity: SensitivitySpec::constant_one(),
        };
        if let Ok((u, v)) = p.coexistence() {
            if u > 0.0 && v > 0.0 {
                return p;
            }
        }
    }
}

/// Independent root of `chi -> det H_k(chi)` by bisection (the determinant
/// is affine and decreasing in chi).
fn chi_root_by_bisection(p: &ModelParams, k: usize) -> Result<f64, String> {
    let det_at = |chi: f64| -> Result<f64, String> {
        let mut pp = *p;
        pp.chi = chi;
        Ok(mode_matrix(&pp, k).map_err(|e| e.to_string())?.det())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while det_at(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(format!("no determinant root bracket for k = {k}"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if det_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Criterion 1: the closed-form bifurcation values `chi_k` match
/// determinant root-finding to 1e-10 relative over 100 random feasible
/// draws and k = 1..10.
pub fn criterion_1_bifurcation_value_oracle() -> CriterionResult {
    run_criterion(1, "bifurcation-value-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut worst = 0.0f64;
        let mut compared = 0usize;
        for _ in 0..100 {
            let p = random_weak_draw(&mut rng);
            for k in 1..=10usize {
                let bp = chi_k(&p, k).map_err(|e| e.to_string())?;
                if !bp.feasible {
                    continue;
                }
                let root = chi_root_by_bisection(&p, k)?;
                let rel = (bp.chi_k - root).abs() / root.abs().max(1.0);
                worst = worst.max(rel);
                compared += 1;
                if rel > 1e-10 {
                    return Err(format!(
                        "chi_k formula {} vs determinant root {} (rel {rel:.2e}, k = {k})",
                        bp.chi_k, root
                    ));
                }
            }
        }
        Ok(format!("{compared} (draw, k) pairs, worst relative gap {worst:.2e}"))
    })
}

fn growth_rate_fit(p: &ModelParams, grid: &Grid1D) -> Result<f64, String> {
    let (u_bar, v_bar) = p.coexistence().map_err(|e| e.to_string())?;
    let mut init = State::constant(grid, u_bar, v_bar);
    for j in 0..grid.n {
        init.v[j] += 1e-5 * (std::f64::consts::PI * grid.node(j) / p.l).cos();
    }
    let (_, diags) = simulate(p, init, grid, 25.0, 2e-3, 0.5, &[1]).map_err(|e| e.to_string())?;
    // Least-squares slope of ln|amp_1| over the post-transient window where
    // the mode is still in the linear range.
    let pts: Vec<(f64, f64)> = diags
        .iter()
        .filter(|d| {
            d.t > 3.0 && d.mode_amplitudes[0].abs() > 1e-9 && d.mode_amplitudes[0].abs() < 5e-3
        })
        .map(|d| (d.t, d.mode_amplitudes[0].abs().ln()))
        .collect();
    if pts.len() < 5 {
        return Err("too few snapshots in the growth-rate fit window".into());
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (stt, sty) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 * p.0, b + p.0 * p.1));
    Ok((n * sty - st * sy) / (n * stt - st * st))
}

/// Criterion 2: the weak-competition defaults give `chi_0 = 12.75` at
/// `k_0 = 1`; simulated mode-1 growth at `1.1 chi_0` matches the leading
/// eigenvalue within 5% and the mode decays at `0.9 chi_0`.
pub fn criterion_2_instability_threshold() -> CriterionResult {
    run_criterion(2, "instability-threshold", || {
        let base = weak_defaults();
        let (chi0, k0) = chi_threshold(&base, 64).map_err(|e| e.to_string())?;
        if k0 != 1 || (chi0 - 12.75).abs() > 1e-12 {
            return Err(format!("threshold (chi_0, k_0) = ({chi0}, {k0}), expected (12.75, 1)"));
        }
        let grid = Grid1D::new(256, base.l);
        let mut detail = format!("chi_0 = {chi0}, k_0 = {k0}");
        for factor in [1.1, 0.9] {
            let mut p = base;
            p.chi = factor * chi0;
            let predicted = growth_rate(&p, 1).map_err(|e| e.to_string())?[0].0;
            let measured = growth_rate_fit(&p, &grid)?;
            if (measured - predicted).abs() > 0.05 * predicted.abs() {
                return Err(format!(
                    "chi = {factor} chi_0: measured rate {measured} vs eigenvalue {predicted}"
                ));
            }
            if (factor > 1.0) != (measured > 0.0) {
                return Err(format!("chi = {factor} chi_0: wrong growth sign ({measured})"));
            }
            detail.push_str(&format!(
                "; chi = {factor} chi_0: rate {measured:.4} vs {predicted:.4}"
            ));
        }
        Ok(detail)
    })
}

/// Criterion 3: pitchfork structure at `chi_k`: the fitted linear
/// coefficient vanishes and the fitted quadratic coefficient matches the
/// closed-form `K2` in sign on random draws with `min{D1, 1/D2} >= 100`;
/// in the strong regime the closed form is negative.
pub fn criterion_3_pitchfork_structure() -> CriterionResult {
    run_criterion(3, "pitchfork-structure", || {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        let mut detail = String::new();
        while accepted < 5 {
            attempts += 1;
            if attempts > 200 {
                return Err("could not assemble 5 feasible asymptotic draws".into());
            }
            let mut p = random_weak_draw(&mut rng);
            p.d1 = rng.gen_range(100.0..1000.0);
            p.d2 = rng.gen_range(1e-4..1e-2);
            p.l = rng.gen_range(2.0..4.0);
            let Ok((_, k0)) = chi_threshold(&p, 64) else { continue };
            let report = match weakly_nonlinear(&p, k0) {
                Ok(r) => r,
                Err(ContinuationError::Resonance) => continue,
                Err(e) => return Err(e.to_string()),
            };
            if report.asymptotic_sign == AsymptoticSign::Indeterminate {
                continue;
            }
            let grid = Grid1D::new(201, p.l);
            // Amplitude small enough that the quadratic term dominates:
            // |K2| s0^2 is a fixed small fraction of chi_k.
            let chik = chi_k(&p, k0).map_err(|e| e.to_string())?.chi_k;
            let s0 = (2e-3 * chik / report.k2.abs()).sqrt().clamp(1e-4, 5e-3);
            let k1f = fit_k1(&p, &grid, k0, s0).map_err(|e| e.to_string())?;
            if k1f.abs() > 1e-3 {
                return Err(format!("draw {accepted}: |K1 fit| = {:.2e} > 1e-3", k1f.abs()));
            }
            let k2f = fit_k2(&p, &grid, k0, s0).map_err(|e| e.to_string())?;
            if k2f.signum() != report.k2.signum() {
                return Err(format!(
                    "draw {accepted}: K2 fit {k2f:.3e} vs closed form {:.3e} (sign mismatch)",
                    report.k2
                ));
            }
            accepted += 1;
            detail.push_str(&format!("{:+.2e}/{:+.2e} ", report.k2, k2f));
        }
        // Strong-competition asymptotic draw: K2 must be negative.
        let strong = ModelParams {
            a1: 3.0,
            a2: 2.0,
            b1: 1.0,
            b2: 2.0,
            c1: 2.0,
            c2: 1.0,
            d1: 200.0,
            d2: 5e-3,
            chi: 0.0,
            tau: 1.0,
            l: 3.0,
            sensitivity: SensitivitySpec::constant_one(),
        };
        if classify_competition(&strong).map_err(|e| e.to_string())?
            != CompetitionRegime::Strong
        {
            return Err("strong-regime draw misclassified".into());
        }
        let (_, k0s) = chi_threshold(&strong, 64).map_err(|e| e.to_string())?;
        let rep_s = weakly_nonlinear(&strong, k0s).map_err(|e| e.to_string())?;
        if rep_s.k2 >= 0.0 || rep_s.asymptotic_sign != AsymptoticSign::Negative {
            return Err(format!("strong regime: K2 = {} not negative", rep_s.k2));
        }
        Ok(format!(
            "5 asymptotic draws sign-matched, K2 closed/fit {detail}; strong-regime K2 = {:.3e} < 0",
            rep_s.k2
        ))
    })
}

/// Criterion 4: branches from `chi_k` with `k != k_0` are flagged unstable
/// near onset; near-onset points of a `k_0` branch with `K2 > 0` are
/// flagged stable.
pub fn criterion_4_mode_selection() -> CriterionResult {
    run_criterion(4, "mode-selection", || {
        // Subcritical k = 2 branch of the weak defaults (k_0 = 1).
        let p = weak_defaults();
        let grid = Grid1D::new(201, p.l);
        let chi2 = chi_k(&p, 2).map_err(|e| e.to_string())?.chi_k;
        let b2 = continue_branch(&p, &grid, 2, (0.95 * chi2, 1.05 * chi2), 0.005)
            .map_err(|e| e.to_string())?;
        let near2: Vec<_> = b2.points.iter().filter(|pt| pt.amplitude.abs() < 0.02).collect();
        if near2.is_empty() {
            return Err("no near-onset points on the k = 2 branch".into());
        }
        if near2.iter().any(|pt| pt.stable) {
            return Err("k != k_0 branch flagged stable near onset".into());
        }
        // Supercritical k_0 = 1 draw with K2 > 0.
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
        let (_, k0) = chi_threshold(&sup, 64).map_err(|e| e.to_string())?;
        if k0 != 1 {
            return Err(format!("supercritical draw selects k_0 = {k0}, expected 1"));
        }
        let rep = weakly_nonlinear(&sup, 1).map_err(|e| e.to_string())?;
        if rep.k2 <= 0.0 {
            return Err(format!("supercritical draw has K2 = {} <= 0", rep.k2));
        }
        let grids = Grid1D::new(201, sup.l);
        let chi1 = chi_k(&sup, 1).map_err(|e| e.to_string())?.chi_k;
        let b1 = continue_branch(&sup, &grids, 1, (0.95 * chi1, 1.05 * chi1), 0.01)
            .map_err(|e| e.to_string())?;
        let near1: Vec<_> = b1.points.iter().filter(|pt| pt.amplitude.abs() < 0.05).collect();
        if near1.is_empty() {
            return Err("no near-onset points on the supercritical branch".into());
        }
        if near1.iter().any(|pt| !pt.stable) {
            return Err("K2 > 0 branch flagged unstable near onset".into());
        }
        Ok(format!(
            "k = 2 branch unstable near onset ({} pts); K2 = {:.1} > 0 branch stable ({} pts)",
            near2.len(),
            rep.k2,
            near1.len()
        ))
    })
}

/// Criterion 5: shadow limit: with `r = 2`, `chi = r D1`, the oscillation
/// of `u e^{r v}` over the relaxed steady state decreases strictly along
/// `D1 = 1e2, 1e3, 1e4` and ends below 1e-2.
pub fn criterion_5_shadow_limit() -> CriterionResult {
    run_criterion(5, "shadow-limit", || {
        let template = weak_defaults();
        let grid = Grid1D::new(256, template.l);
        let d1_list = [1e2, 1e3, 1e4];
        let rows = shadow_limit_check(&template, 2.0, &d1_list, &grid, 10.0, 1e-4, 0.01)
            .map_err(|e| e.to_string())?;
        for w in rows.windows(2) {
            if w[1].osc_w >= w[0].osc_w {
                return Err(format!(
                    "osc(u e^(rv)) not decreasing: {:.2e} -> {:.2e}",
                    w[0].osc_w, w[1].osc_w
                ));
            }
        }
        let last = rows.last().unwrap();
        if last.osc_w > 1e-2 {
            return Err(format!("osc at D1 = 1e4 is {:.2e} > 1e-2", last.osc_w));
        }
        let oscs: Vec<String> = rows.iter().map(|r| format!("{:.1e}", r.osc_w)).collect();
        Ok(format!("osc(u e^(rv)) = [{}] over D1 = [1e2, 1e3, 1e4]", oscs.join(", ")))
    })
}

/// Criterion 6: the shadow bifurcation values `eps_n` match a zero
/// eigenvalue of the discretized constrained linearization to 1e-6 for
/// n = 1..3 (grid-extrapolated), and `eps_n = eps_1 / n^2` exactly.
pub fn criterion_6_shadow_bifurcation_values() -> CriterionResult {
    run_criterion(6, "shadow-bifurcation-values", || {
        let sp0 = ShadowParams {
            a1: 2.0,
            a2: 1.0,
            b1: 0.0,
            b2: 1.0,
            c1: 3.0,
            c2: 1.0,
            r: 6.0,
            eps: 0.5,
            l: std::f64::consts::PI,
            sensitivity: SensitivitySpec::constant_one(),
        };
        let (v_bar, lambda_bar) = shadow_equilibrium(&sp0).map_err(|e| e.to_string())?;
        let mut detail = String::new();
        for n_mode in 1..=3usize {
            let eps_pred = epsilon_n(&sp0, n_mode).map_err(|e| e.to_string())?;
            let crossing = |n_grid: usize| -> Result<f64, String> {
                let lead = |eps: f64| {
                    let sp = ShadowParams { eps, ..sp0 };
                    let st = ShadowState { v: vec![v_bar; n_grid], lambda: lambda_bar, eps };
                    shadow_linearization_spectrum(&st, &sp, n_mode + 1)[n_mode - 1].0
                };
                let (mut lo, mut hi) = (0.5 * eps_pred, 1.5 * eps_pred);
                if !(lead(lo) > 0.0 && lead(hi) < 0.0) {
                    return Err(format!("mode {n_mode}: eigenvalue crossing not bracketed"));
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if lead(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            };
            // Richardson in the grid spacing: crossing(h) = eps* + C h^2.
            let c1 = crossing(101)?;
            let c2 = crossing(201)?;
            let extrapolated = (4.0 * c2 - c1) / 3.0;
            if (extrapolated - eps_pred).abs() > 1e-6 {
                return Err(format!(
                    "mode {n_mode}: spectrum crossing {extrapolated} vs formula {eps_pred}"
                ));
            }
            detail.push_str(&format!("eps_{n_mode} gap {:.1e}; ", (extrapolated - eps_pred).abs()));
        }
        let e1 = epsilon_n(&sp0, 1).map_err(|e| e.to_string())?;
        for n in 1..=8usize {
            let en = epsilon_n(&sp0, n).map_err(|e| e.to_string())?;
            let pred = e1 / (n * n) as f64;
            if (en - pred).abs() > 1e-13 * pred {
                return Err(format!("eps_{n} = {en} differs from eps_1/n^2 = {pred}"));
            }
        }
        Ok(format!("{detail}eps_n = eps_1/n^2 for n = 1..8"))
    })
}

/// Criterion 7: the shadow branch-direction sign map: sampled `(r, theta)`
/// in each region matches the predicted sign of `K2`, including both sides
/// of the degenerate-case thresholds, and the sign (and value) match an
/// eps-continuation fit at 3 points.
pub fn criterion_7_shadow_sign_map() -> CriterionResult {
    run_criterion(7, "shadow-sign-map", || {
        let template = ShadowParams {
            a1: 2.0,
            a2: 1.0,
            b1: 0.0,
            b2: 1.0,
            c1: 3.0,
            c2: 1.0,
            r: 6.0,
            eps: 0.5,
            l: std::f64::consts::PI,
            sensitivity: SensitivitySpec::constant_one(),
        };
        let (v_bar, _) = shadow_equilibrium(&template).map_err(|e| e.to_string())?;
        let c2 = template.c2;
        // theta = (a2 - c2 v_bar) r is dialed through a2 at fixed r.
        let at = |r: f64, theta: f64| -> ShadowParams {
            ShadowParams { r, a2: theta / r + c2 * v_bar, ..template }
        };
        let k2_at = |r: f64, theta: f64| -> Result<f64, String> {
            let rep = shadow_k2(&at(r, theta), 1).map_err(|e| e.to_string())?;
            let spec = rep.specialized.ok_or("specialized path missing")?;
            // The closed form and the general assembly must agree.
            if (spec.k2 - rep.k2).abs() > 1e-8 * rep.k2.abs().max(1e-12) {
                return Err(format!(
                    "closed-form K2 {} vs general assembly {}",
                    spec.k2, rep.k2
                ));
            }
            Ok(spec.k2)
        };
        let expect_sign = |r: f64, theta: f64, positive: bool| -> Result<(), String> {
            let k2 = k2_at(r, theta)?;
            if (k2 > 0.0) != positive {
                return Err(format!(
                    "(r, theta) = ({r}, {theta}): K2 = {k2:.3e}, expected {}",
                    if positive { "positive" } else { "negative" }
                ));
            }
            Ok(())
        };

        // Single-sign-change regions: r below 1/(2 v_bar) and above
        // 8/v_bar; the relevant root is the one above c2.
        for r in [0.6, 13.0] {
            let spec = shadow_k2(&at(r, 1.2 * c2), 1)
                .map_err(|e| e.to_string())?
                .specialized
                .ok_or("specialized path missing")?;
            let root = spec.theta_roots.1;
            if root <= c2 {
                return Err(format!("r = {r}: no sign-change root above c2"));
            }
            expect_sign(r, 0.5 * (c2 + root), true)?;
            expect_sign(r, 1.5 * root, false)?;
        }
        // Three-region case: positive, negative, positive again.
        {
            let r = 6.0;
            let spec = shadow_k2(&at(r, 1.2 * c2), 1)
                .map_err(|e| e.to_string())?
                .specialized
                .ok_or("specialized path missing")?;
            let (t1, t2) = spec.theta_roots;
            if !(c2 < t1 && t1 < t2) {
                return Err(format!("r = 6: unexpected root order ({t1}, {t2})"));
            }
            expect_sign(r, 0.5 * (c2 + t1), true)?;
            expect_sign(r, 0.5 * (t1 + t2), false)?;
            expect_sign(r, 1.5 * t2, true)?;
        }
        // Degenerate linear cases: thresholds 28 c2 / 27 and 119 c2 / 111
        // (the latter corrects an arithmetic slip that printed 120/111; the
        // sampled signs flip at 119/111).
        let r_lo = 1.0 / (2.0 * v_bar);
        let r_hi = 8.0 / v_bar;
        for (r, threshold, printed) in [
            (r_lo, 28.0 * c2 / 27.0, 28.0 / 27.0),
            (r_hi, 119.0 * c2 / 111.0, 120.0 / 111.0),
        ] {
            let spec = shadow_k2(&at(r, 1.01 * c2), 1)
                .map_err(|e| e.to_string())?
                .specialized
                .ok_or("specialized path missing")?;
            let root = spec.theta_roots.0;
            if (root - threshold).abs() > 1e-9 * threshold {
                return Err(format!(
                    "r = {r}: linear-F root {root} vs threshold {threshold} (tabled {printed})"
                ));
            }
            expect_sign(r, threshold * (1.0 - 1e-3), true)?;
            expect_sign(r, threshold * (1.0 + 1e-3), false)?;
        }

        // Branch-direction fits at three sampled parameter sets.
        let mut fits = String::new();
        for (r, c1) in [(6.0, 3.0), (9.0, 4.0), (13.0, 3.0)] {
            let sp = ShadowParams { r, c1, ..template };
            let rep = shadow_k2(&sp, 1).map_err(|e| e.to_string())?;
            let grid = sp.grid(401);
            let fit = fit_shadow_k2(&sp, &grid, 1, 0.004).map_err(|e| e.to_string())?;
            if fit.signum() != rep.k2.signum()
                || (fit - rep.k2).abs() > 0.1 * rep.k2.abs()
            {
                return Err(format!(
                    "(r, c1) = ({r}, {c1}): K2 fit {fit:.3e} vs closed form {:.3e}",
                    rep.k2
                ));
            }
            fits.push_str(&format!("{:+.2e}/{:+.2e} ", rep.k2, fit));
        }
        Ok(format!(
            "all regions and both thresholds (28/27, 119/111 corrected from 120/111) \
             sign-matched; fits {fits}"
        ))
    })
}

/// Criterion 8: transition layer for the bistable example: the solve
/// converges at `eps = 1e-3, 1e-4, 1e-5`, the measured interface error
/// versus the predicted `x0` shrinks with eps and ends below 0.05, and the
/// solved multiplier approaches its limit monotonically.
pub fn criterion_8_transition_layer() -> CriterionResult {
    run_criterion(8, "transition-layer", || {
        let mut errs = Vec::new();
        let mut gaps = Vec::new();
        let mut lambda_star = 0.0;
        let mut lambda0 = 0.0;
        let mut x0 = 0.0;
        for eps in [1e-3, 1e-4, 1e-5] {
            let sp = ShadowParams {
                a1: 2.0,
                a2: 1.0,
                b1: 0.0,
                b2: 1.0,
                c1: 3.0,
                c2: 1.0,
                r: 2.0,
                eps,
                l: 1.0,
                sensitivity: SensitivitySpec::constant_one(),
            };
            let (st, report) = layer_solve(&sp, 0.75).map_err(|e| e.to_string())?;
            let (pde_norm, _) = st.residuals(&sp);
            if pde_norm > 1e-9 {
                return Err(format!("eps = {eps:.0e}: residual {pde_norm:.2e}"));
            }
            errs.push(report.interface_error);
            gaps.push((report.lambda_eps - report.lambda_star).abs());
            lambda_star = report.lambda_star;
            lambda0 = 0.25 * 1.5f64.exp();
            x0 = report.x0_predicted;
        }
        for w in errs.windows(2) {
            if w[1] > w[0] + 1e-6 {
                return Err(format!("interface error grew: {:.2e} -> {:.2e}", w[0], w[1]));
            }
        }
        if *errs.last().unwrap() > 0.05 {
            return Err(format!("interface error at eps = 1e-5 is {:.3}", errs.last().unwrap()));
        }
        for w in gaps.windows(2) {
            if w[1] >= w[0] {
                return Err(format!(
                    "|lambda_eps - limit| not monotone: {:.2e} -> {:.2e}",
                    w[0], w[1]
                ));
            }
        }
        // The limiting multiplier is the equal-area lambda*; the outer
        // prediction lambda_0(v_bar2 = 0.75) is reported alongside (the
        // solved branch exists at the equal-area structure, where the
        // plateau v_bar2(lambda*) differs from the 0.75 target).
        Ok(format!(
            "x0 = {x0:.4}, interface errors [{:.1e}, {:.1e}, {:.1e}], \
             |lambda_eps - lambda*| [{:.1e}, {:.1e}, {:.1e}] -> lambda* = {lambda_star:.4} \
             (outer lambda_0(0.75) = {lambda0:.4})",
            errs[0], errs[1], errs[2], gaps[0], gaps[1], gaps[2]
        ))
    })
}

/// Criterion 9: heteroclinic integrity: the first integral is constant to
/// 1e-6 along the profile, the tail decay rate matches the rest-state
/// linearization within 2%, and the translation puts the half-height at 0.
pub fn criterion_9_heteroclinic_integrity() -> CriterionResult {
    run_criterion(9, "heteroclinic-integrity", || {
        let sp = ShadowParams {
            a1: 2.0,
            a2: 1.0,
            b1: 0.0,
            b2: 1.0,
            c1: 3.0,
            c2: 1.0,
            r: 2.0,
            eps: 1e-3,
            l: 1.0,
            sensitivity: SensitivitySpec::constant_one(),
        };
        let het = heteroclinic_profile(&sp, 40.0, 401).map_err(|e| e.to_string())?;
        let f_int = |v: f64| {
            sp.a2 * v * v / 2.0 - sp.c2 * v * v * v / 3.0
                - sp.b2 * het.lambda_star * (1.0 - (1.0 + sp.r * v) * (-sp.r * v).exp())
                    / (sp.r * sp.r)
        };
        let drift = het.first_integral_drift(f_int);
        if drift > 1e-6 {
            return Err(format!("first-integral drift {drift:.2e} > 1e-6"));
        }
        // Tail decay rate from a log-slope fit over the far tail.
        let zs: Vec<f64> = (0..20).map(|i| 8.0 + 0.5 * i as f64).collect();
        let zbar = zs.iter().sum::<f64>() / zs.len() as f64;
        let lbar = zs.iter().map(|&z| het.eval(z).ln()).sum::<f64>() / zs.len() as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for &z in &zs {
            num += (z - zbar) * (het.eval(z).ln() - lbar);
            den += (z - zbar) * (z - zbar);
        }
        let rate = -num / den;
        if (rate - het.decay_rate).abs() > 0.02 * het.decay_rate {
            return Err(format!("tail rate {rate} vs sqrt(-f_v) = {}", het.decay_rate));
        }
        let mid = het.eval(0.0);
        if (mid - het.v_bar2 / 2.0).abs() > 1e-9 {
            return Err(format!("V(0) = {mid} vs v_bar2/2 = {}", het.v_bar2 / 2.0));
        }
        Ok(format!(
            "drift {drift:.1e}, tail rate {rate:.4} vs {:.4}, V(0) = v_bar2/2",
            het.decay_rate
        ))
    })
}

/// Criterion 10: the a-priori bound monitors hold on a representative
/// above-threshold run (they are also enforced inside every simulation of
/// criteria 2 and 5), and deliberately corrupted states trip them.
pub fn criterion_10_a_priori_bounds() -> CriterionResult {
    run_criterion(10, "a-priori-bounds", || {
        let mut p = weak_defaults();
        p.chi = 14.0;
        let grid = Grid1D::new(128, p.l);
        let (u_bar, v_bar) = p.coexistence().map_err(|e| e.to_string())?;
        let mut init = State::constant(&grid, u_bar, v_bar);
        for j in 0..grid.n {
            init.v[j] += 0.01 * (std::f64::consts::PI * grid.node(j) / p.l).cos();
        }
        let monitors = InvariantMonitors::from_initial(&init, &p, &grid);
        // simulate() checks the monitors at every snapshot; Ok means they
        // never tripped.
        let (fin, _) =
            simulate(&p, init, &grid, 5.0, 2e-3, 0.25, &[]).map_err(|e| e.to_string())?;
        monitors.check(&fin, &grid).map_err(|e| e.to_string())?;
        // Negative tests: a v excursion past the comparison bound and a
        // negative density must both trip.
        let mut high_v = fin.clone();
        high_v.v[0] = p.a2 / p.c2 + 1.0;
        if monitors.check(&high_v, &grid).is_ok() {
            return Err("sup-v monitor failed to trip on a corrupted state".into());
        }
        let mut neg_u = fin;
        neg_u.u[0] = -1e-3;
        if monitors.check(&neg_u, &grid).is_ok() {
            return Err("positivity monitor failed to trip on a corrupted state".into());
        }
        Ok("monitors clean on the above-threshold run; both corrupted states tripped".into())
    })
}

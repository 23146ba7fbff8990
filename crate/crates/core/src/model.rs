//! Model parameters, kinetics, sensitivity functions, equilibria, and
//! competition-regime classification for the system
//!
//! ```text
//! u_t = (D1 u' + chi u phi(v) v')' + (a1 - b1 u - c1 v) u
//! tau v_t = D2 v'' + (a2 - b2 u - c2 v) v
//! ```
//!
//! on (0, L) with no-flux boundaries.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    /// Regime classification needs the ratios a1/a2, b1/b2, c1/c2.
    #[error("regime classification requires a2, b2, c2 > 0 (got a2={a2}, b2={b2}, c2={c2})")]
    DivisionByZeroRatio { a2: f64, b2: f64, c2: f64 },
    /// The coexistence state divides by b1 c2 - b2 c1.
    #[error("coexistence state undefined: b1*c2 == b2*c1 ({det})")]
    SingularDenominator { det: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Cubic sensitivity function `phi(v) = p0 + p1 v + p2 v^2 + p3 v^3`.
///
/// Its antiderivative `Phi` is normalized by `Phi(0) = 0`, so
/// `Phi(v) = p0 v + p1 v^2/2 + p2 v^3/3 + p3 v^4/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivitySpec {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl SensitivitySpec {
    pub const fn constant_one() -> Self {
        Self { p0: 1.0, p1: 0.0, p2: 0.0, p3: 0.0 }
    }

    pub const fn cubic(p0: f64, p1: f64, p2: f64, p3: f64) -> Self {
        Self { p0, p1, p2, p3 }
    }

    /// True when `phi` is identically 1 (so `Phi(v) = v`), the form the
    /// shadow-system and layer machinery requires.
    pub fn is_identity(&self) -> bool {
        self.p0 == 1.0 && self.p1 == 0.0 && self.p2 == 0.0 && self.p3 == 0.0
    }

    pub fn phi(&self, v: f64) -> f64 {
        self.p0 + v * (self.p1 + v * (self.p2 + v * self.p3))
    }

    pub fn dphi(&self, v: f64) -> f64 {
        self.p1 + v * (2.0 * self.p2 + v * 3.0 * self.p3)
    }

    pub fn d2phi(&self, v: f64) -> f64 {
        2.0 * self.p2 + 6.0 * self.p3 * v
    }

    pub fn big_phi(&self, v: f64) -> f64 {
        v * (self.p0 + v * (self.p1 / 2.0 + v * (self.p2 / 3.0 + v * self.p3 / 4.0)))
    }
}

/// Evaluation bundle `(phi, phi', phi'', Phi)` at one point.
pub fn sensitivity_eval(s: &SensitivitySpec, v: f64) -> (f64, f64, f64, f64) {
    (s.phi(v), s.dphi(v), s.d2phi(v), s.big_phi(v))
}

/// All kinetic and transport constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub chi: f64,
    pub tau: f64,
    pub l: f64,
    pub sensitivity: SensitivitySpec,
}

impl ModelParams {
    /// Validates the sign constraints: positive diffusivities and domain
    /// length, nonnegative kinetic constants and `tau`.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.d1 > 0.0) || !(self.d2 > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "D1, D2 must be positive (got {}, {})",
                self.d1, self.d2
            )));
        }
        if !(self.l > 0.0) {
            return Err(ModelError::InvalidParams(format!("L must be positive (got {})", self.l)));
        }
        if !(self.tau >= 0.0) {
            return Err(ModelError::InvalidParams(format!("tau must be >= 0 (got {})", self.tau)));
        }
        for (name, val) in [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("c1", self.c1),
            ("c2", self.c2),
        ] {
            if !(val >= 0.0) {
                return Err(ModelError::InvalidParams(format!(
                    "{name} must be nonnegative (got {val})"
                )));
            }
        }
        Ok(())
    }

    /// `b1 c2 - b2 c1`, the denominator of the coexistence state.
    pub fn coexistence_det(&self) -> f64 {
        self.b1 * self.c2 - self.b2 * self.c1
    }

    /// The positive coexistence equilibrium `(u_bar, v_bar)`.
    pub fn coexistence(&self) -> Result<(f64, f64), ModelError> {
        let det = self.coexistence_det();
        if det == 0.0 {
            return Err(ModelError::SingularDenominator { det });
        }
        let u_bar = (self.a1 * self.c2 - self.a2 * self.c1) / det;
        let v_bar = (self.a2 * self.b1 - self.a1 * self.b2) / det;
        Ok((u_bar, v_bar))
    }
}

/// Competition regime per the ratio chain `c1/c2 ? a1/a2 ? b1/b2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompetitionRegime {
    /// `c1/c2 < a1/a2 < b1/b2`: coexistence stable for the diffusion-only
    /// system.
    Weak,
    /// `b1/b2 < a1/a2 < c1/c2`: coexistence unstable, founder control.
    Strong,
    /// Any equality or reversed chain.
    Degenerate,
}

pub fn classify_competition(p: &ModelParams) -> Result<CompetitionRegime, ModelError> {
    if p.a2 == 0.0 || p.b2 == 0.0 || p.c2 == 0.0 {
        return Err(ModelError::DivisionByZeroRatio { a2: p.a2, b2: p.b2, c2: p.c2 });
    }
    let ra = p.a1 / p.a2;
    let rb = p.b1 / p.b2;
    let rc = p.c1 / p.c2;
    if rc < ra && ra < rb {
        Ok(CompetitionRegime::Weak)
    } else if rb < ra && ra < rc {
        Ok(CompetitionRegime::Strong)
    } else {
        Ok(CompetitionRegime::Degenerate)
    }
}

/// The constant steady states of the kinetics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSet {
    pub trivial: (f64, f64),
    /// `(a1/b1, 0)`, present when `b1 > 0`.
    pub semitrivial_u: Option<(f64, f64)>,
    /// `(0, a2/c2)`, present when `c2 > 0`.
    pub semitrivial_v: Option<(f64, f64)>,
    /// The interior state; positive exactly in the weak and strong regimes.
    pub coexistence: (f64, f64),
}

pub fn equilibria(p: &ModelParams) -> Result<EquilibriumSet, ModelError> {
    let coexistence = p.coexistence()?;
    Ok(EquilibriumSet {
        trivial: (0.0, 0.0),
        semitrivial_u: (p.b1 > 0.0).then(|| (p.a1 / p.b1, 0.0)),
        semitrivial_v: (p.c2 > 0.0).then(|| (0.0, p.a2 / p.c2)),
        coexistence,
    })
}

/// Kinetic values and exact partial derivatives at one point:
/// `(f, g, f_u, f_v, g_u, g_v)` with `f = (a1 - b1 u - c1 v) u`,
/// `g = (a2 - b2 u - c2 v) v`.
pub fn kinetics(p: &ModelParams, u: f64, v: f64) -> (f64, f64, f64, f64, f64, f64) {
    let f = (p.a1 - p.b1 * u - p.c1 * v) * u;
    let g = (p.a2 - p.b2 * u - p.c2 * v) * v;
    let f_u = p.a1 - 2.0 * p.b1 * u - p.c1 * v;
    let f_v = -p.c1 * u;
    let g_u = -p.b2 * v;
    let g_v = p.a2 - p.b2 * u - 2.0 * p.c2 * v;
    (f, g, f_u, f_v, g_u, g_v)
}

/// Weak-competition default parameter set used throughout the test battery:
/// `a=(3,2), b=(2,1), c=(1,2), D1=D2=1, chi=0, tau=1, L=pi, phi==1`,
/// with coexistence state (4/3, 1/3).
pub fn weak_defaults() -> ModelParams {
    ModelParams {
        a1: 3.0,
        a2: 2.0,
        b1: 2.0,
        b2: 1.0,
        c1: 1.0,
        c2: 2.0,
        d1: 1.0,
        d2: 1.0,
        chi: 0.0,
        tau: 1.0,
        l: std::f64::consts::PI,
        sensitivity: SensitivitySpec::constant_one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn weak_default_coexistence_is_four_thirds_one_third() {
        let p = weak_defaults();
        let (u, v) = p.coexistence().unwrap();
        assert_relative_eq!(u, 4.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(v, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn coexistence_zeroes_both_kinetic_factors() {
        let p = weak_defaults();
        let (u, v) = p.coexistence().unwrap();
        let (f, g, ..) = kinetics(&p, u, v);
        assert_relative_eq!(f, 0.0, epsilon = 1e-14);
        assert_relative_eq!(g, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn equilibrium_set_contains_all_four_states() {
        let p = weak_defaults();
        let eq = equilibria(&p).unwrap();
        assert_eq!(eq.trivial, (0.0, 0.0));
        assert_eq!(eq.semitrivial_u, Some((1.5, 0.0)));
        assert_eq!(eq.semitrivial_v, Some((0.0, 1.0)));
        let (f, g, ..) = kinetics(&p, eq.coexistence.0, eq.coexistence.1);
        assert!(f.abs() < 1e-14 && g.abs() < 1e-14);
    }

    #[test]
    fn regime_classification_matches_ratio_chain() {
        let p = weak_defaults();
        assert_eq!(classify_competition(&p).unwrap(), CompetitionRegime::Weak);
        let strong = ModelParams { b1: 0.5, c1: 4.0, ..p };
        assert_eq!(classify_competition(&strong).unwrap(), CompetitionRegime::Strong);
        let degen = ModelParams { b1: p.a1 / p.a2 * p.b2, ..p };
        assert_eq!(classify_competition(&degen).unwrap(), CompetitionRegime::Degenerate);
    }

    #[test]
    fn singular_denominator_is_reported() {
        let mut p = weak_defaults();
        p.b1 = p.b2 * p.c1 / p.c2;
        assert!(matches!(p.coexistence(), Err(ModelError::SingularDenominator { .. })));
    }

    #[test]
    fn validate_rejects_bad_signs() {
        let mut p = weak_defaults();
        p.d1 = 0.0;
        assert!(p.validate().is_err());
        let mut p = weak_defaults();
        p.tau = -1.0;
        assert!(p.validate().is_err());
        let mut p = weak_defaults();
        p.a1 = -0.5;
        assert!(p.validate().is_err());
        assert!(weak_defaults().validate().is_ok());
    }

    proptest! {
        // Phi is the antiderivative of phi with Phi(0) = 0: a centered
        // difference of Phi must reproduce phi everywhere.
        #[test]
        fn big_phi_is_antiderivative(
            p0 in -2.0f64..2.0, p1 in -2.0f64..2.0,
            p2 in -2.0f64..2.0, p3 in -2.0f64..2.0,
            v in -3.0f64..3.0,
        ) {
            let s = SensitivitySpec::cubic(p0, p1, p2, p3);
            let h = 1e-5;
            let fd = (s.big_phi(v + h) - s.big_phi(v - h)) / (2.0 * h);
            prop_assert!((fd - s.phi(v)).abs() < 1e-8 * (1.0 + s.phi(v).abs()));
            prop_assert_eq!(s.big_phi(0.0), 0.0);
        }

        // Same consistency for the stored derivatives of phi.
        #[test]
        fn phi_derivatives_consistent(
            p0 in -2.0f64..2.0, p1 in -2.0f64..2.0,
            p2 in -2.0f64..2.0, p3 in -2.0f64..2.0,
            v in -3.0f64..3.0,
        ) {
            let s = SensitivitySpec::cubic(p0, p1, p2, p3);
            let h = 1e-5;
            let d1 = (s.phi(v + h) - s.phi(v - h)) / (2.0 * h);
            let d2 = (s.dphi(v + h) - s.dphi(v - h)) / (2.0 * h);
            prop_assert!((d1 - s.dphi(v)).abs() < 1e-7 * (1.0 + s.dphi(v).abs()));
            prop_assert!((d2 - s.d2phi(v)).abs() < 1e-7 * (1.0 + s.d2phi(v).abs()));
        }

        // Kinetic partial derivatives against finite differences.
        #[test]
        fn kinetics_partials_match_finite_differences(
            u in 0.01f64..5.0, v in 0.01f64..5.0,
        ) {
            let p = weak_defaults();
            let (_, _, f_u, f_v, g_u, g_v) = kinetics(&p, u, v);
            let h = 1e-6;
            let fd_fu = (kinetics(&p, u + h, v).0 - kinetics(&p, u - h, v).0) / (2.0 * h);
            let fd_fv = (kinetics(&p, u, v + h).0 - kinetics(&p, u, v - h).0) / (2.0 * h);
            let fd_gu = (kinetics(&p, u + h, v).1 - kinetics(&p, u - h, v).1) / (2.0 * h);
            let fd_gv = (kinetics(&p, u, v + h).1 - kinetics(&p, u, v - h).1) / (2.0 * h);
            prop_assert!((fd_fu - f_u).abs() < 1e-6 * (1.0 + f_u.abs()));
            prop_assert!((fd_fv - f_v).abs() < 1e-6 * (1.0 + f_v.abs()));
            prop_assert!((fd_gu - g_u).abs() < 1e-6 * (1.0 + g_u.abs()));
            prop_assert!((fd_gv - g_v).abs() < 1e-6 * (1.0 + g_v.abs()));
        }
    }
}

//! Linear stability of the coexistence state: per-mode 2x2 matrices `H_k`,
//! bifurcation values `chi_k`, the instability threshold `chi_0 = min_k
//! chi_k`, and mode growth rates.

use crate::model::{ModelError, ModelParams};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("no positive coexistence state: {0}")]
    NoCoexistenceState(String),
    #[error("sensitivity phi(v_bar) = 0; bifurcation value undefined")]
    ZeroSensitivity,
    #[error("k = 0 rejected: the constant mode never loses stability")]
    KZero,
    #[error("no feasible bifurcation mode in k = 1..={k_max}")]
    NoFeasibleMode { k_max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The linearization of the system about `(u_bar, v_bar)` restricted to the
/// Neumann cosine mode `cos(k pi x / L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix {
    pub k: usize,
    /// `(k pi / L)^2`, the Neumann Laplacian eigenvalue of the mode.
    pub lambda: f64,
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl ModeMatrix {
    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Both eigenvalues by the quadratic formula, leading (largest real
    /// part) first. Complex pairs are returned as `(re, im)` with `im >= 0`
    /// on the first entry.
    pub fn eigenvalues(&self) -> [(f64, f64); 2] {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr / 4.0 - det;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let l1 = tr / 2.0 + sq;
            let l2 = tr / 2.0 - sq;
            [(l1, 0.0), (l2, 0.0)]
        } else {
            let im = (-disc).sqrt();
            [(tr / 2.0, im), (tr / 2.0, -im)]
        }
    }
}

fn positive_coexistence(p: &ModelParams) -> Result<(f64, f64), StabilityError> {
    let (u_bar, v_bar) = p.coexistence()?;
    if !(u_bar > 0.0 && v_bar > 0.0) {
        return Err(StabilityError::NoCoexistenceState(format!(
            "(u_bar, v_bar) = ({u_bar}, {v_bar}) not positive"
        )));
    }
    Ok((u_bar, v_bar))
}

/// Assembles `H_k` at the model's own `chi`.
pub fn mode_matrix(p: &ModelParams, k: usize) -> Result<ModeMatrix, StabilityError> {
    if k == 0 {
        return Err(StabilityError::KZero);
    }
    let (u_bar, v_bar) = positive_coexistence(p)?;
    let lambda = (k as f64 * std::f64::consts::PI / p.l).powi(2);
    let phi = p.sensitivity.phi(v_bar);
    Ok(ModeMatrix {
        k,
        lambda,
        m11: -p.d1 * lambda - p.b1 * u_bar,
        m12: -p.chi * u_bar * phi * lambda - p.c1 * u_bar,
        m21: -p.b2 * v_bar,
        m22: -p.d2 * lambda - p.c2 * v_bar,
    })
}

/// A candidate bifurcation point on the `chi` axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifurcationPoint {
    pub k: usize,
    /// The value of `chi` at which `det H_k` vanishes.
    pub chi_k: f64,
    /// u-component of the null eigenvector `(Q_k, 1)`; always negative.
    pub q_k: f64,
    /// True when `chi_k > 0`, i.e. the mode can actually destabilize for
    /// attractive-to-repulsive advection of the modeled sign.
    pub feasible: bool,
}

/// The advection strength at which mode `k` becomes neutrally stable:
///
/// ```text
/// chi_k = [(D1 L_k + b1 u_bar)(D2 L_k + c2 v_bar) - b2 c1 u_bar v_bar]
///         / (b2 L_k phi(v_bar) u_bar v_bar),      L_k = (k pi / L)^2.
/// ```
pub fn chi_k(p: &ModelParams, k: usize) -> Result<BifurcationPoint, StabilityError> {
    if k == 0 {
        return Err(StabilityError::KZero);
    }
    let (u_bar, v_bar) = positive_coexistence(p)?;
    let phi = p.sensitivity.phi(v_bar);
    if phi == 0.0 {
        return Err(StabilityError::ZeroSensitivity);
    }
    let lambda = (k as f64 * std::f64::consts::PI / p.l).powi(2);
    let numer = (p.d1 * lambda + p.b1 * u_bar) * (p.d2 * lambda + p.c2 * v_bar)
        - p.b2 * p.c1 * u_bar * v_bar;
    let denom = p.b2 * lambda * phi * u_bar * v_bar;
    let chi = numer / denom;
    let q_k = -(p.d2 * lambda + p.c2 * v_bar) / (p.b2 * v_bar);
    Ok(BifurcationPoint { k, chi_k: chi, q_k, feasible: numer > 0.0 })
}

/// Minimum bifurcation value over `k = 1..=k_max` and the mode attaining it
/// (smallest `k` on ties). Checks that `chi_k` is increasing past the
/// located minimum so the finite window genuinely captures it.
pub fn chi_threshold(p: &ModelParams, k_max: usize) -> Result<(f64, usize), StabilityError> {
    let mut best: Option<(f64, usize)> = None;
    let mut values = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let bp = chi_k(p, k)?;
        values.push(bp.chi_k);
        if bp.feasible {
            match best {
                Some((chi0, _)) if bp.chi_k >= chi0 => {}
                _ => best = Some((bp.chi_k, k)),
            }
        }
    }
    let (chi0, k0) = best.ok_or(StabilityError::NoFeasibleMode { k_max })?;
    // chi_k grows like k^2 for large k; if the minimum sits on the window
    // edge and the tail is still descending, the window was too small.
    if k0 == k_max && k_max > 1 {
        let next = chi_k(p, k_max + 1)?;
        if next.chi_k < chi0 {
            return Err(StabilityError::NoFeasibleMode { k_max });
        }
    }
    Ok((chi0, k0))
}

/// Eigenvalues of `H_k` at the model's `chi`, leading first, as
/// `(re, im)` pairs.
pub fn growth_rate(p: &ModelParams, k: usize) -> Result<[(f64, f64); 2], StabilityError> {
    Ok(mode_matrix(p, k)?.eigenvalues())
}

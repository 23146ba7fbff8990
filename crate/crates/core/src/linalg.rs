//! Small dense-band solvers and quadrature helpers shared by the simulator
//! and the Newton solvers.

/// Solves a tridiagonal system in place via the Thomas algorithm.
///
/// `sub[i]` multiplies `x[i-1]` in row `i` (sub[0] unused), `diag[i]`
/// multiplies `x[i]`, `sup[i]` multiplies `x[i+1]` (sup[n-1] unused).
/// Returns `None` when a pivot vanishes.
pub fn thomas_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 {
        return None;
    }
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        if m == 0.0 {
            return None;
        }
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Solves the bordered system
///
/// ```text
/// [ T  b ] [x]   [r1]
/// [ c' 0 ] [y] = [r2]
/// ```
///
/// with `T` tridiagonal, by block elimination: `T p = r1`, `T q = b`,
/// `y = (c.p - r2)/(c.q)`, `x = p - y q`.
#[allow(clippy::too_many_arguments)]
pub fn bordered_tridiag_solve(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    b: &[f64],
    c: &[f64],
    r1: &[f64],
    r2: f64,
) -> Option<(Vec<f64>, f64)> {
    let p = thomas_solve(sub, diag, sup, r1)?;
    let q = thomas_solve(sub, diag, sup, b)?;
    let cq: f64 = c.iter().zip(&q).map(|(ci, qi)| ci * qi).sum();
    if cq == 0.0 {
        return None;
    }
    let cp: f64 = c.iter().zip(&p).map(|(ci, pi)| ci * pi).sum();
    let y = (cp - r2) / cq;
    let x = p.iter().zip(&q).map(|(pi, qi)| pi - y * qi).collect();
    Some((x, y))
}

/// Trapezoid integral of nodal values on a uniform grid with spacing `h`.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = f[1..n - 1].iter().sum();
    h * (interior + 0.5 * (f[0] + f[n - 1]))
}

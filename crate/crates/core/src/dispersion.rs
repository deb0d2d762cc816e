//! Real roots of the Lopatinskii determinant and the Laplace-domain symbol.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::params::{check_stability_h1star, ReferenceState};

/// Largest `nu` accepted by [`find_real_roots`].
pub const NU_MAX_FOR_ROOTS: f64 = 0.05;

struct Parts {
    root: f64,
    c: f64,
    bp: f64,
    am: [f64; 2],
    bm: f64,
}

fn parts(state: &ReferenceState, xi: [f64; 2], tau: f64) -> Result<Parts> {
    let nt = state.nu * tau;
    let s = 1.0 - nt * nt;
    if !(s > 0.0) {
        return invalid(format!("1 - nu^2 tau^2 = {s} must be positive (tau = {tau})"));
    }
    let [x1, x2] = xi;
    let c = tau + x1 * state.u0[0] + x2 * state.u0[1];
    let bp = x1 * state.b0[0] + x2 * state.b0[1];
    let am = [nt * state.h0[0] + x2 * state.e3, nt * state.h0[1] - x1 * state.e3];
    let bm = x1 * state.h0[0] + x2 * state.h0[1];
    Ok(Parts { root: s.sqrt(), c, bp, am, bm })
}

/// `√(1−ν²τ²)((c⁺)²−(b⁺)²) + ((a⁻₁)²+(a⁻₂)²−(b⁻)²)`.
pub fn lopatinskii_residual(state: &ReferenceState, xi: [f64; 2], tau: f64) -> Result<f64> {
    let p = parts(state, xi, tau)?;
    Ok(p.root * (p.c * p.c - p.bp * p.bp) + (p.am[0] * p.am[0] + p.am[1] * p.am[1] - p.bm * p.bm))
}

/// Derivative of [`lopatinskii_residual`] with respect to `tau`.
pub fn lopatinskii_derivative(state: &ReferenceState, xi: [f64; 2], tau: f64) -> Result<f64> {
    let p = parts(state, xi, tau)?;
    let nu = state.nu;
    Ok(-nu * nu * tau / p.root * (p.c * p.c - p.bp * p.bp)
        + 2.0 * p.root * p.c
        + 2.0 * nu * (p.am[0] * state.h0[0] + p.am[1] * state.h0[1]))
}

/// Scale of the determinant's terms near the `nu = 0` roots.
pub fn residual_scale(state: &ReferenceState, xi: [f64; 2]) -> f64 {
    let [x1, x2] = xi;
    let a = x1 * state.u0[0] + x2 * state.u0[1];
    let bp = x1 * state.b0[0] + x2 * state.b0[1];
    let bm = x1 * state.h0[0] + x2 * state.h0[1];
    let hh = state.h0[0].powi(2) + state.h0[1].powi(2);
    [1.0, a * a, bp * bp, bm * bm, state.e3 * state.e3, hh].into_iter().fold(0.0, f64::max)
}

/// Closed-form roots at `nu = 0`: `τ = −a⁺ ± √((b⁺)²+(b⁻)²−(E3_0)²)`, or `None` if the radicand is negative.
pub fn limit_roots(state: &ReferenceState, xi: [f64; 2]) -> Option<[f64; 2]> {
    let [x1, x2] = xi;
    let a = x1 * state.u0[0] + x2 * state.u0[1];
    let bp = x1 * state.b0[0] + x2 * state.b0[1];
    let bm = x1 * state.h0[0] + x2 * state.h0[1];
    let rad = bp * bp + bm * bm - state.e3 * state.e3;
    (rad >= 0.0).then(|| [-a - rad.sqrt(), -a + rad.sqrt()])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootReport {
    pub xi: [f64; 2],
    pub roots: Vec<f64>,
    pub residuals: Vec<f64>,
    pub derivative_values: Vec<f64>,
    pub scale: f64,
}

const SCAN_CELLS: usize = 64;
const MAX_ITER: usize = 200;

/// The two real roots of the Lopatinskii determinant near the `nu = 0` roots, sorted ascending.
pub fn find_real_roots(state: &ReferenceState, xi: [f64; 2]) -> Result<RootReport> {
    state.validate()?;
    if state.nu > NU_MAX_FOR_ROOTS {
        return invalid(format!("nu = {} exceeds the supported bound {NU_MAX_FOR_ROOTS}", state.nu));
    }
    let h1s = check_stability_h1star(state);
    if !h1s.stable {
        return invalid(format!(
            "stability condition fails: E3_0^2 = {} >= min_xi (xi.B0)^2+(xi.H0)^2 = {}",
            state.e3 * state.e3,
            h1s.min_value
        ));
    }
    let seeds = limit_roots(state, xi).expect("radicand is positive under the stability condition");
    let half_gap = 0.5 * (seeds[1] - seeds[0]);
    let scale = residual_scale(state, xi);
    let tol = 1e-12 * scale;

    let mut roots = Vec::with_capacity(2);
    for seed in seeds {
        let width = 0.5 * seed.abs().max(half_gap);
        let (lo, hi) = bracket(state, xi, seed, width)?;
        roots.push(polish(state, xi, lo, hi, tol)?);
    }
    roots.sort_by(f64::total_cmp);
    let residuals = roots.iter().map(|&t| lopatinskii_residual(state, xi, t).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    let derivative_values =
        roots.iter().map(|&t| lopatinskii_derivative(state, xi, t)).collect::<Result<Vec<_>>>()?;
    Ok(RootReport { xi, roots, residuals, derivative_values, scale })
}

fn bracket(state: &ReferenceState, xi: [f64; 2], seed: f64, width: f64) -> Result<(f64, f64)> {
    let limit = (1.0 - 1e-12) / state.nu;
    let lo = (seed - width).max(-limit);
    let hi = (seed + width).min(limit);
    let nodes: Vec<f64> = (0..=SCAN_CELLS).map(|i| lo + (hi - lo) * i as f64 / SCAN_CELLS as f64).collect();
    let values = nodes.iter().map(|&t| lopatinskii_residual(state, xi, t)).collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, (f64, f64))> = None;
    for i in 0..SCAN_CELLS {
        let (a, b) = (values[i], values[i + 1]);
        let hit = if a == 0.0 {
            Some((nodes[i], nodes[i]))
        } else if a * b < 0.0 {
            Some((nodes[i], nodes[i + 1]))
        } else {
            None
        };
        if let Some(br) = hit {
            let dist = (0.5 * (br.0 + br.1) - seed).abs();
            if best.map_or(true, |(d, _)| dist < d) {
                best = Some((dist, br));
            }
        }
    }
    best.map(|(_, br)| br).ok_or_else(|| {
        let table: Vec<String> = nodes.iter().zip(&values).map(|(t, v)| format!("{t:.6e}: {v:.6e}")).collect();
        Error::Numerical(format!(
            "no sign change of the Lopatinskii determinant within {width:.3e} of the seed {seed:.6e}; scan:\n{}",
            table.join("\n")
        ))
    })
}

/// Newton iteration kept inside a shrinking sign-change bracket.
fn polish(state: &ReferenceState, xi: [f64; 2], mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    if lo == hi {
        return Ok(lo);
    }
    let f_lo = lopatinskii_residual(state, xi, lo)?;
    let mut t = 0.5 * (lo + hi);
    let mut converged_once = false;
    for _ in 0..MAX_ITER {
        let f = lopatinskii_residual(state, xi, t)?;
        if f == 0.0 {
            return Ok(t);
        }
        if (f > 0.0) == (f_lo > 0.0) {
            lo = t;
        } else {
            hi = t;
        }
        if f.abs() < tol {
            // one more step removes the last rounding-level bias
            if converged_once {
                return Ok(t);
            }
            converged_once = true;
        }
        let df = lopatinskii_derivative(state, xi, t)?;
        let newton = t - f / df;
        t = if df != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1e-300) {
            return Ok(t);
        }
    }
    Err(Error::Numerical(format!("root polishing did not converge in [{lo:e}, {hi:e}]")))
}

/// Sign changes of the determinant over `|tau| < 1/nu` on an `asinh`-spaced grid of `n` cells.
pub fn scan_sign_changes(state: &ReferenceState, xi: [f64; 2], n: usize) -> Result<Vec<(f64, f64)>> {
    let limit = (1.0 - 1e-9) / state.nu;
    let smax = limit.asinh();
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let t = (-smax + 2.0 * smax * i as f64 / n as f64).sinh();
        let v = lopatinskii_residual(state, xi, t)?;
        if let Some((tp, vp)) = prev {
            if vp * v < 0.0 || (v == 0.0 && vp != 0.0) {
                out.push((tp, t));
            }
        }
        prev = Some((t, v));
    }
    Ok(out)
}

/// Laplace-domain symbol
/// `√(ν²z²+|j′|²)((z+iu·j′)²−(iB·j′)²) + |j′|((H₁νz+iE₃j′₂)²+(H₂νz−iE₃j′₁)²−(iH·j′)²)`
/// with the principal square-root branch.
pub fn laplace_symbol(state: &ReferenceState, z: Complex64, jprime: [i64; 2]) -> Result<Complex64> {
    if jprime == [0, 0] {
        return invalid("laplace_symbol is undefined at j' = 0");
    }
    let i = Complex64::i();
    let (j1, j2) = (jprime[0] as f64, jprime[1] as f64);
    let jn = j1.hypot(j2);
    let nu = state.nu;
    let uj = state.u0[0] * j1 + state.u0[1] * j2;
    let bj = state.b0[0] * j1 + state.b0[1] * j2;
    let hj = state.h0[0] * j1 + state.h0[1] * j2;
    let e3 = state.e3;
    let root = (nu * nu * z * z + jn * jn).sqrt();
    let plasma = (z + i * uj).powi(2) - (i * bj).powi(2);
    let vacuum = (state.h0[0] * nu * z + i * e3 * j2).powi(2) + (state.h0[1] * nu * z - i * e3 * j1).powi(2)
        - (i * hj).powi(2);
    Ok(root * plasma + jn * vacuum)
}

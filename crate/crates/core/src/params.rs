//! Reference state, frequency data and the scalar coefficients derived from them.
//!
//! The background is a piecewise constant state with tangential fields
//! `u0`, `B0` (plasma), `H0` (vacuum), a normal vacuum electric field `E3_0`
//! and the dimensionless light-speed parameter `nu`.

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dispersion::lopatinskii_residual;
use crate::error::{invalid, Result};

/// Tolerance used when reporting whether the Lopatinskii determinant vanishes.
pub const H3_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceState {
    pub u0: [f64; 3],
    #[serde(rename = "B0")]
    pub b0: [f64; 3],
    #[serde(rename = "H0")]
    pub h0: [f64; 3],
    #[serde(rename = "E3_0")]
    pub e3: f64,
    pub nu: f64,
}

impl ReferenceState {
    pub fn new(u0: [f64; 3], b0: [f64; 3], h0: [f64; 3], e3: f64, nu: f64) -> Result<Self> {
        let s = Self { u0, b0, h0, e3, nu };
        s.validate()?;
        Ok(s)
    }

    /// Tangential background with the third components set to zero.
    pub fn tangential(u: [f64; 2], b: [f64; 2], h: [f64; 2], e3: f64, nu: f64) -> Result<Self> {
        Self::new([u[0], u[1], 0.0], [b[0], b[1], 0.0], [h[0], h[1], 0.0], e3, nu)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.u0.iter().chain(&self.b0).chain(&self.h0).chain([&self.e3, &self.nu]);
        if all.into_iter().any(|x| !x.is_finite()) {
            return invalid("reference state contains non-finite entries");
        }
        for (name, v) in [("u0", self.u0), ("B0", self.b0), ("H0", self.h0)] {
            if v[2] != 0.0 {
                return invalid(format!("{name}[2] must be 0 (background fields are tangential), got {}", v[2]));
            }
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return invalid(format!("nu must lie in (0,1), got {}", self.nu));
        }
        Ok(())
    }

    pub fn u(&self) -> [f64; 2] {
        [self.u0[0], self.u0[1]]
    }

    pub fn b(&self) -> [f64; 2] {
        [self.b0[0], self.b0[1]]
    }

    pub fn h(&self) -> [f64; 2] {
        [self.h0[0], self.h0[1]]
    }

    /// Background total pressure `½|H0|² − ½(E3_0)²`.
    pub fn q0(&self) -> f64 {
        0.5 * (self.h0[0] * self.h0[0] + self.h0[1] * self.h0[1]) - 0.5 * self.e3 * self.e3
    }
}

/// Rational direction `(p, q)`, scale index `l` and time frequency `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTriple {
    pub p: i64,
    pub q: i64,
    pub l: u32,
    pub tau: f64,
}

impl FrequencyTriple {
    pub fn new(p: i64, q: i64, l: u32, tau: f64) -> Result<Self> {
        if p == 0 && q == 0 {
            return invalid("p and q must not both be zero");
        }
        if l == 0 {
            return invalid("l must be a positive integer");
        }
        if !tau.is_finite() {
            return invalid("tau must be finite");
        }
        Ok(Self { p, q, l, tau })
    }

    pub fn norm(&self) -> f64 {
        ((self.p * self.p + self.q * self.q) as f64).sqrt()
    }

    pub fn xi(&self) -> [f64; 2] {
        direction(self.p, self.q)
    }

    pub fn eps(&self) -> f64 {
        1.0 / (self.l as f64 * self.norm())
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    pub fn with_l(self, l: u32) -> Self {
        Self { l, ..self }
    }
}

/// Unit vector `(p, q)/√(p²+q²)`.
pub fn direction(p: i64, q: i64) -> [f64; 2] {
    let n = ((p * p + q * q) as f64).sqrt();
    [p as f64 / n, q as f64 / n]
}

/// Every scalar parameter entering the leading-order problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivedCoefficients {
    pub tau: f64,
    pub xi: [f64; 2],
    pub nu: f64,
    pub a_plus: f64,
    pub b_plus: f64,
    pub c_plus: f64,
    pub a_minus_1: f64,
    pub a_minus_2: f64,
    pub b_minus: f64,
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub iota1: f64,
    pub iota2: f64,
    pub nl_coeff: f64,
    pub transport_t: f64,
    pub transport_y: [f64; 2],
}

impl DerivedCoefficients {
    pub fn a_minus(&self) -> [f64; 2] {
        [self.a_minus_1, self.a_minus_2]
    }

    pub fn iota(&self) -> [f64; 2] {
        [self.iota1, self.iota2]
    }

    /// `√(1 − ν²τ²)`.
    pub fn root(&self) -> f64 {
        (1.0 - self.nu * self.nu * self.tau * self.tau).sqrt()
    }

    /// Transport velocity `transport_y / transport_t`.
    pub fn velocity(&self) -> [f64; 2] {
        [self.transport_y[0] / self.transport_t, self.transport_y[1] / self.transport_t]
    }
}

/// Evaluates all derived coefficients for `(state, freq)`.
pub fn derive_coefficients(state: &ReferenceState, freq: &FrequencyTriple) -> Result<DerivedCoefficients> {
    coefficients_for_direction(state, freq.xi(), freq.tau)
}

/// Same as [`derive_coefficients`] for an arbitrary unit direction.
pub fn coefficients_for_direction(state: &ReferenceState, xi: [f64; 2], tau: f64) -> Result<DerivedCoefficients> {
    state.validate()?;
    let nu = state.nu;
    let nt = nu * tau;
    if nt == 0.0 {
        return invalid("nu*tau = 0: the coefficients iota_j are singular");
    }
    let s = 1.0 - nt * nt;
    if s <= 0.0 {
        return invalid(format!("1 - nu^2 tau^2 = {s} must be positive"));
    }
    let [x1, x2] = xi;
    let [u1, u2] = state.u();
    let [bb1, bb2] = state.b();
    let [h1, h2] = state.h();
    let e3 = state.e3;

    let a_plus = x1 * u1 + x2 * u2;
    let b_plus = x1 * bb1 + x2 * bb2;
    let c_plus = tau + a_plus;
    let am1 = nt * h1 + x2 * e3;
    let am2 = nt * h2 - x1 * e3;
    let b_minus = x1 * h1 + x2 * h2;

    let iota1 = (nt * am1 - x1 * b_minus) / (nt * s);
    let iota2 = (nt * am2 - x2 * b_minus) / (nt * s);

    let nl_coeff = c_plus * c_plus - b_plus * b_plus - am1 * am1 - am2 * am2 + b_minus * b_minus;

    let t2 = nt * nt;
    let s32 = s * s.sqrt();
    let d0 = nu / (2.0 * s32)
        * (nt * (2.0 - t2) * (h1 * h1 + h2 * h2) + 2.0 * (x2 * h1 - x1 * h2) * e3 + nt * e3 * e3
            - nt * b_minus * b_minus);
    let d1 = -1.0 / (2.0 * s32)
        * (x1 * (1.0 - t2 + x2 * x2) * h1 * h1 - 2.0 * x2 * (t2 - x2 * x2) * h1 * h2
            + x1 * (t2 - x2 * x2) * h2 * h2
            + 2.0 * nt * x1 * x2 * h1 * e3
            - 2.0 * nt * (t2 - x2 * x2) * h2 * e3
            - (1.0 - 2.0 * t2) * x1 * e3 * e3);
    let d2 = -1.0 / (2.0 * s32)
        * (x2 * (t2 - x1 * x1) * h1 * h1 - 2.0 * x1 * (t2 - x1 * x1) * h1 * h2
            + x2 * (1.0 - t2 + x1 * x1) * h2 * h2
            + 2.0 * nt * (t2 - x1 * x1) * h1 * e3
            - 2.0 * nt * x1 * x2 * h2 * e3
            - (1.0 - 2.0 * t2) * x2 * e3 * e3);

    Ok(DerivedCoefficients {
        tau,
        xi,
        nu,
        a_plus,
        b_plus,
        c_plus,
        a_minus_1: am1,
        a_minus_2: am2,
        b_minus,
        d0,
        d1,
        d2,
        iota1,
        iota2,
        nl_coeff,
        transport_t: c_plus + d0,
        transport_y: [c_plus * u1 - b_plus * bb1 + d1, c_plus * u2 - b_plus * bb2 + d2],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct H1Report {
    pub stable: bool,
    /// Signed margin `RHS − |E0|²`; zero counts as unstable.
    pub margin: f64,
    pub rhs: f64,
}

/// Stability criterion comparing `|E0|²` with the closed-form bound built from `B0`, `H0`.
pub fn check_stability_h1(state: &ReferenceState) -> H1Report {
    let [b1, b2] = state.b();
    let [h1, h2] = state.h();
    let p = b1 * b1 + b2 * b2 + h1 * h1 + h2 * h2;
    let cross = b1 * h2 - b2 * h1;
    let c = cross * cross;
    let disc = (p * p - 4.0 * c).max(0.0).sqrt();
    // (p - disc)/2 written without cancellation
    let rhs = if p > 0.0 { 2.0 * c / (p + disc) } else { 0.0 };
    let margin = rhs - state.e3 * state.e3;
    H1Report { stable: margin > 0.0, margin, rhs }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct H1StarReport {
    pub stable: bool,
    /// `min_{|ξ|=1} (ξ·B0)² + (ξ·H0)²`.
    pub min_value: f64,
    pub argmin_xi: [f64; 2],
    pub margin: f64,
}

/// Stability criterion as a minimum over directions, evaluated as the smallest
/// eigenvalue of the Gram matrix `b bᵀ + h hᵀ`.
pub fn check_stability_h1star(state: &ReferenceState) -> H1StarReport {
    let [b1, b2] = state.b();
    let [h1, h2] = state.h();
    let g = Matrix2::new(
        b1 * b1 + h1 * h1,
        b1 * b2 + h1 * h2,
        b1 * b2 + h1 * h2,
        b2 * b2 + h2 * h2,
    );
    let eig = SymmetricEigen::new(g);
    let i = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let min_value = eig.eigenvalues[i].max(0.0);
    let v = eig.eigenvectors.column(i);
    let n = v.norm();
    let argmin_xi = [v[0] / n, v[1] / n];
    let margin = min_value - state.e3 * state.e3;
    H1StarReport { stable: margin > 0.0, min_value, argmin_xi, margin }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub xi: [f64; 2],
    pub eps: f64,
    pub xi_norm_error: f64,
    pub h3_residual: f64,
    pub a_plus: f64,
    pub tau: f64,
    pub c_plus: f64,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    /// `c⁺ ≠ 0` and `(c⁺)² ≠ (b⁺)²`.
    pub nondegenerate: bool,
}

/// Reports (without failing) on the direction, the Lopatinskii condition and `a⁺ ≠ 0`, `τ ≠ 0`.
pub fn verify_frequency_assumptions(state: &ReferenceState, freq: &FrequencyTriple) -> AssumptionReport {
    let xi = freq.xi();
    let eps = freq.eps();
    let xi_norm_error = ((xi[0] * xi[0] + xi[1] * xi[1]).sqrt() - 1.0).abs();
    let h3_residual = lopatinskii_residual(state, xi, freq.tau).unwrap_or(f64::NAN);
    let a_plus = xi[0] * state.u0[0] + xi[1] * state.u0[1];
    let b_plus = xi[0] * state.b0[0] + xi[1] * state.b0[1];
    let c_plus = freq.tau + a_plus;
    let h2 = (freq.p != 0 || freq.q != 0) && freq.l >= 1 && xi_norm_error < 1e-14;
    AssumptionReport {
        xi,
        eps,
        xi_norm_error,
        h3_residual,
        a_plus,
        tau: freq.tau,
        c_plus,
        h2,
        h3: h3_residual.abs() < H3_TOLERANCE,
        h4: a_plus != 0.0 && freq.tau != 0.0,
        nondegenerate: c_plus != 0.0 && c_plus * c_plus != b_plus * b_plus,
    }
}

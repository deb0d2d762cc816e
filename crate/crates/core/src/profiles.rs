//! System matrices of the linearised plasma and vacuum problems, the
//! surface-wave eigenvectors and their adjoints, and the leading profile
//! `(U¹, V¹)` carried by a front spectrum.
//!
//! Plasma unknowns are ordered `U = (u₁,u₂,u₃,B₁,B₂,B₃,q)`, vacuum unknowns
//! `V = (H₁,H₂,H₃,E₁,E₂,E₃)`. The complex inner product is `X·Y = Σ conj(X)Y`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::amplitude::{hs_norm, FrontSpectrum};
use crate::error::{invalid, Result};
use crate::params::{DerivedCoefficients, ReferenceState};

pub type Mat7 = SMatrix<f64, 7, 7>;
pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Mat67 = SMatrix<f64, 6, 7>;
pub type CVec7 = SVector<Complex64, 7>;
pub type CVec6 = SVector<Complex64, 6>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Plasma flux `f_α(U)` in direction `alpha ∈ {0,1,2}`.
pub fn plasma_flux(alpha: usize, state: &[f64; 7]) -> [f64; 7] {
    let (u, b, q) = (&state[0..3], &state[3..6], state[6]);
    let mut f = [0.0; 7];
    for i in 0..3 {
        f[i] = u[alpha] * u[i] - b[alpha] * b[i] + if i == alpha { q } else { 0.0 };
        f[3 + i] = u[alpha] * b[i] - b[alpha] * u[i];
    }
    f[6] = u[alpha];
    f
}

/// Jacobian of [`plasma_flux`] at `(u, B)`.
pub fn plasma_flux_jacobian(alpha: usize, u: [f64; 3], b: [f64; 3]) -> Mat7 {
    let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut m = Mat7::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = d(alpha, j) * u[i] + u[alpha] * d(i, j);
            m[(i, 3 + j)] = -d(alpha, j) * b[i] - b[alpha] * d(i, j);
            m[(3 + i, j)] = d(alpha, j) * b[i] - b[alpha] * d(i, j);
            m[(3 + i, 3 + j)] = u[alpha] * d(i, j) - d(alpha, j) * u[i];
        }
        m[(i, 6)] = d(alpha, i);
        m[(6, i)] = d(alpha, i);
    }
    m
}

/// Vacuum matrix of `∂_α` in `(ν∂t H + ∇×E, ν∂t E − ∇×H)`.
pub fn vacuum_matrix(alpha: usize) -> Mat6 {
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    let mut m = Mat6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, 3 + j)] = eps(i, alpha, j);
            m[(3 + i, j)] = -eps(i, alpha, j);
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    pub a_plus: [Mat7; 4],
    pub a_minus: [Mat6; 4],
    pub scr_a_plus: Mat7,
    pub scr_a_minus: Mat6,
    pub b_plus: Mat67,
    pub b_minus: Mat6,
    pub b_vec: [f64; 6],
}

/// Matrices at the reference state for the frequencies stored in `coeffs`.
pub fn build_matrices(state: &ReferenceState, coeffs: &DerivedCoefficients) -> SystemMatrices {
    let (tau, xi) = (coeffs.tau, coeffs.xi);
    let mut a0 = Mat7::identity();
    a0[(6, 6)] = 0.0;
    let a_plus = [
        a0,
        plasma_flux_jacobian(0, state.u0, state.b0),
        plasma_flux_jacobian(1, state.u0, state.b0),
        plasma_flux_jacobian(2, state.u0, state.b0),
    ];
    let a_minus = [Mat6::identity() * state.nu, vacuum_matrix(0), vacuum_matrix(1), vacuum_matrix(2)];
    let scr_a_plus = a_plus[0] * tau + a_plus[1] * xi[0] + a_plus[2] * xi[1];
    let scr_a_minus = a_minus[0] * tau + a_minus[1] * xi[0] + a_minus[2] * xi[1];

    let mut b_plus = Mat67::zeros();
    b_plus[(0, 2)] = 1.0;
    b_plus[(1, 5)] = 1.0;
    b_plus[(5, 6)] = 1.0;
    let mut b_minus = Mat6::zeros();
    b_minus[(2, 2)] = 1.0;
    b_minus[(3, 4)] = 1.0;
    b_minus[(4, 3)] = -1.0;
    b_minus[(5, 0)] = -state.h0[0];
    b_minus[(5, 1)] = -state.h0[1];
    b_minus[(5, 5)] = state.e3;
    let b_vec = [-coeffs.c_plus, -coeffs.b_plus, -coeffs.b_minus, coeffs.a_minus_1, coeffs.a_minus_2, 0.0];
    SystemMatrices { a_plus, a_minus, scr_a_plus, scr_a_minus, b_plus, b_minus, b_vec }
}

/// Surface-wave eigenvectors and adjoints for one sign of `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBasis {
    pub sign: i8,
    pub r_plus: CVec7,
    pub r_minus_1: CVec6,
    pub r_minus_2: CVec6,
    /// `ι₁R⁻₁ + ι₂R⁻₂`.
    pub r_minus: CVec6,
    pub l_plus: CVec7,
    pub l_minus: CVec6,
    pub iota: [f64; 2],
}

impl EigenBasis {
    pub fn new(coeffs: &DerivedCoefficients, sign: i8) -> Self {
        Self::with_iota(coeffs, sign, coeffs.iota())
    }

    /// Basis whose vacuum trace uses the coefficients `iota` instead of `ι_j`.
    pub fn with_iota(coeffs: &DerivedCoefficients, sign: i8, iota: [f64; 2]) -> Self {
        assert!(sign == 1 || sign == -1, "sign must be +1 or -1");
        let s = sign as f64;
        let is = I * s;
        let [x1, x2] = coeffs.xi;
        let (tau, nu) = (coeffs.tau, coeffs.nu);
        let nt = nu * tau;
        let t2 = nt * nt;
        let r = coeffs.root();
        let (ap, bp, cp) = (coeffs.a_plus, coeffs.b_plus, coeffs.c_plus);

        let r_plus = CVec7::from([
            c(x1 * cp),
            c(x2 * cp),
            is * cp,
            c(x1 * bp),
            c(x2 * bp),
            is * bp,
            c(bp * bp - cp * cp),
        ]);
        let r_minus_1 =
            CVec6::from([c(r * nt), c(0.0), -is * nt * x1, -is * x1 * x2, is * (t2 - x2 * x2), c(-r * x2)]);
        let r_minus_2 =
            CVec6::from([c(0.0), c(r * nt), -is * nt * x2, -is * (t2 - x1 * x1), is * x1 * x2, c(r * x1)]);
        let r_minus = r_minus_1 * c(iota[0]) + r_minus_2 * c(iota[1]);
        let l_plus = CVec7::from([
            c(x1 * tau),
            c(x2 * tau),
            is * tau,
            c(2.0 * x1 * bp),
            c(2.0 * x2 * bp),
            is * (2.0 * bp),
            c(-tau * (ap + cp)),
        ]);
        let l_minus = r_minus_closed_form(coeffs, sign) * c(-1.0 / nu);
        Self { sign, r_plus, r_minus_1, r_minus_2, r_minus, l_plus, l_minus, iota }
    }
}

/// Closed form of `ι_jR⁻_j` in terms of `a⁻_j`, `b⁻`.
pub fn r_minus_closed_form(coeffs: &DerivedCoefficients, sign: i8) -> CVec6 {
    let is = I * sign as f64;
    let [x1, x2] = coeffs.xi;
    let nt = coeffs.nu * coeffs.tau;
    let r = coeffs.root();
    let (a1, a2, b) = (coeffs.a_minus_1, coeffs.a_minus_2, coeffs.b_minus);
    CVec6::from([
        c((nt * a1 - x1 * b) / r),
        c((nt * a2 - x2 * b) / r),
        is * b,
        is * a2,
        -is * a1,
        c((x1 * a2 - x2 * a1) / r),
    ])
}

/// Alternative expansion of `L⁻` over `R⁻₁`, `R⁻₂`.
pub fn l_minus_expansion(coeffs: &DerivedCoefficients, sign: i8) -> CVec6 {
    let basis = EigenBasis::new(coeffs, sign);
    let [x1, x2] = coeffs.xi;
    let nt = coeffs.nu * coeffs.tau;
    let s = 1.0 - nt * nt;
    let pre = 1.0 / (coeffs.nu * nt * s);
    let w1 = -nt * coeffs.a_minus_1 + x1 * coeffs.b_minus;
    let w2 = -nt * coeffs.a_minus_2 + x2 * coeffs.b_minus;
    (basis.r_minus_1 * c(w1) + basis.r_minus_2 * c(w2)) * c(pre)
}

/// `−A⁺₃ + i s 𝒜⁺`.
pub fn plasma_operator(m: &SystemMatrices, sign: i8) -> SMatrix<Complex64, 7, 7> {
    m.a_plus[3].map(|x| c(-x)) + m.scr_a_plus.map(|x| I * (sign as f64) * x)
}

/// `√(1−ν²τ²) A⁻₃ + i s 𝒜⁻`.
pub fn vacuum_operator(m: &SystemMatrices, coeffs: &DerivedCoefficients, sign: i8) -> SMatrix<Complex64, 6, 6> {
    let r = coeffs.root();
    m.a_minus[3].map(|x| c(r * x)) + m.scr_a_minus.map(|x| I * (sign as f64) * x)
}

fn sup<const N: usize>(v: &SVector<Complex64, N>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entries of the defining relations of the eigenvectors and adjoints for one sign.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct NullspaceResiduals {
    pub r_plus: f64,
    pub r_minus_1: f64,
    pub r_minus_2: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub side_conditions: [f64; 2],
    pub divergence_plus: [f64; 2],
    pub divergence_minus: [f64; 4],
}

impl NullspaceResiduals {
    pub fn max(&self) -> f64 {
        [self.r_plus, self.r_minus_1, self.r_minus_2, self.l_plus, self.l_minus]
            .into_iter()
            .chain(self.side_conditions)
            .chain(self.divergence_plus)
            .chain(self.divergence_minus)
            .fold(0.0, f64::max)
    }
}

pub fn nullspace_residuals(m: &SystemMatrices, coeffs: &DerivedCoefficients, sign: i8) -> NullspaceResiduals {
    let b = EigenBasis::new(coeffs, sign);
    let p = plasma_operator(m, sign);
    let v = vacuum_operator(m, coeffs, sign);
    let nt = coeffs.nu * coeffs.tau;
    let is = I * sign as f64;
    let [x1, x2] = coeffs.xi;
    let r = coeffs.root();
    let div_u = b.r_plus[0] * is * x1 + b.r_plus[1] * is * x2 - b.r_plus[2];
    let div_b = b.r_plus[3] * is * x1 + b.r_plus[4] * is * x2 - b.r_plus[5];
    let vac = |w: &CVec6, off: usize| (w[off] * is * x1 + w[off + 1] * is * x2 + w[off + 2] * r).norm();
    NullspaceResiduals {
        r_plus: sup(&(p * b.r_plus)),
        r_minus_1: sup(&(v * b.r_minus_1)),
        r_minus_2: sup(&(v * b.r_minus_2)),
        l_plus: sup(&(p.transpose() * b.l_plus)),
        l_minus: sup(&(v.transpose() * b.l_minus)),
        side_conditions: [
            (b.l_minus[4] * nt - b.l_plus[2] * coeffs.a_minus_1).norm(),
            (-b.l_minus[3] * nt - b.l_plus[2] * coeffs.a_minus_2).norm(),
        ],
        divergence_plus: [div_u.norm(), div_b.norm()],
        divergence_minus: [vac(&b.r_minus_1, 0), vac(&b.r_minus_1, 3), vac(&b.r_minus_2, 0), vac(&b.r_minus_2, 3)],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BilinearMatrix {
    A0,
    A1,
    A2,
    ScrA,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BilinearCheck {
    pub matrix: BilinearMatrix,
    pub j: usize,
    pub sign1: i8,
    pub sign2: i8,
    pub lhs: [f64; 2],
    pub rhs: f64,
    pub error: f64,
}

/// `L⁻(k₁)·M R⁻_j(k₂)` against its closed form for every matrix, `j` and sign pair.
pub fn bilinear_identities(m: &SystemMatrices, coeffs: &DerivedCoefficients) -> Vec<BilinearCheck> {
    let [x1, x2] = coeffs.xi;
    let (tau, nu) = (coeffs.tau, coeffs.nu);
    let nt = nu * tau;
    let t2 = nt * nt;
    let s = 1.0 - t2;
    let (a1, a2, b) = (coeffs.a_minus_1, coeffs.a_minus_2, coeffs.b_minus);
    let mut out = Vec::new();
    for s1 in [1i8, -1] {
        for s2 in [1i8, -1] {
            let sg = (s1 * s2) as f64;
            let l = EigenBasis::new(coeffs, s1).l_minus;
            let rb = EigenBasis::new(coeffs, s2);
            let table = [
                (BilinearMatrix::A0, 1, -2.0 * t2 * a1 + (1.0 + sg) * ((t2 - x2 * x2) * a1 + x1 * x2 * a2 + nt * x1 * b)),
                (
                    BilinearMatrix::A1,
                    1,
                    (nt * x1 * a1 - nt * x2 * a2 + t2 * b - (1.0 + sg) * (nt * x1 * a1 + (t2 - x2 * x2) * b)) / nu,
                ),
                (BilinearMatrix::A2, 1, (2.0 * nt * x2 * a1 - (1.0 + sg) * (nt * x1 * a2 + x1 * x2 * b)) / nu),
                (BilinearMatrix::ScrA, 1, (1.0 - sg) * tau * s * a1),
                (BilinearMatrix::A0, 2, -2.0 * t2 * a2 + (1.0 + sg) * (x1 * x2 * a1 + (t2 - x1 * x1) * a2 + nt * x2 * b)),
                (BilinearMatrix::A1, 2, (2.0 * nt * x1 * a2 - (1.0 + sg) * (nt * x2 * a1 + x1 * x2 * b)) / nu),
                (
                    BilinearMatrix::A2,
                    2,
                    (-nt * x1 * a1 + nt * x2 * a2 + t2 * b - (1.0 + sg) * (nt * x2 * a2 + (t2 - x1 * x1) * b)) / nu,
                ),
                (BilinearMatrix::ScrA, 2, (1.0 - sg) * tau * s * a2),
            ];
            for (which, j, rhs) in table {
                let mat = match which {
                    BilinearMatrix::A0 => m.a_minus[0],
                    BilinearMatrix::A1 => m.a_minus[1],
                    BilinearMatrix::A2 => m.a_minus[2],
                    BilinearMatrix::ScrA => m.scr_a_minus,
                };
                let r = if j == 1 { rb.r_minus_1 } else { rb.r_minus_2 };
                let mr = mat.map(c) * r;
                let lhs = l.conjugate().dot(&mr);
                out.push(BilinearCheck {
                    matrix: which,
                    j,
                    sign1: s1,
                    sign2: s2,
                    lhs: [lhs.re, lhs.im],
                    rhs,
                    error: (lhs - rhs).norm(),
                });
            }
        }
    }
    out
}

/// Smooth cutoff: 1 on `|y| ≤ 1`, 0 on `|y| ≥ 2`. Returns `(χ, χ′)`.
pub fn cutoff(y: f64) -> (f64, f64) {
    let t = y.abs();
    if t <= 1.0 {
        return (1.0, 0.0);
    }
    if t >= 2.0 {
        return (0.0, 0.0);
    }
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let dpsi = |x: f64| if x > 0.0 { (-1.0 / x).exp() / (x * x) } else { 0.0 };
    let (a, b) = (psi(2.0 - t), psi(t - 1.0));
    let (da, db) = (-dpsi(2.0 - t), dpsi(t - 1.0));
    let chi = a / (a + b);
    let dchi = (da * b - a * db) / ((a + b) * (a + b));
    (chi, dchi * y.signum())
}

/// Values `φ̂(y′, k)` for all `k` at one slow point, by direct summation over `j′`.
pub fn modes_at(front: &FrontSpectrum, y: [f64; 2]) -> Vec<Complex64> {
    let kw = front.kwidth();
    let j = front.jmax as i64;
    let e1: Vec<Complex64> = (-j..=j).map(|a| Complex64::from_polar(1.0, a as f64 * y[0])).collect();
    let e2: Vec<Complex64> = (-j..=j).map(|a| Complex64::from_polar(1.0, a as f64 * y[1])).collect();
    let mut out = vec![c(0.0); kw];
    for (a, j1) in (-j..=j).enumerate() {
        for (bb, j2) in (-j..=j).enumerate() {
            let base = front.index(j1, j2, -(front.kmax as i64));
            let ph = e1[a] * e2[bb];
            for (kc, o) in out.iter_mut().enumerate() {
                let v = front.coeffs[base + kc];
                if v.re != 0.0 || v.im != 0.0 {
                    *o += v * ph;
                }
            }
        }
    }
    out
}

/// `(Σ_{k>0} w_k z₊^k, Σ_{k<0} w_k z₋^{|k|})` with `z± = e^{−λ|Y₃| ± iθ}`.
pub(crate) fn signed_sums(
    w: impl Fn(i64) -> Complex64,
    kmax: usize,
    rate: f64,
    big_y3: f64,
    theta: f64,
) -> (Complex64, Complex64) {
    let damp = (-rate * big_y3.abs()).exp();
    let zp = Complex64::from_polar(damp, theta);
    let zm = zp.conj();
    let (mut pp, mut pm) = (c(1.0), c(1.0));
    let (mut sp, mut sm) = (c(0.0), c(0.0));
    for k in 1..=kmax as i64 {
        pp *= zp;
        pm *= zm;
        sp += w(k) * pp;
        sm += w(-k) * pm;
    }
    (sp, sm)
}

/// Grid for [`reconstruct_leading`]; slow `y′` is an `ny × ny` uniform grid on `𝕋²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileGrid {
    pub ny: usize,
    pub y3_plus: Vec<f64>,
    pub big_y3_plus: Vec<f64>,
    pub y3_minus: Vec<f64>,
    pub big_y3_minus: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeadingFields {
    /// Ordered `(y′₁, y′₂, y₃, Y₃, θ)` with `θ` fastest.
    pub u1: Vec<[f64; 7]>,
    pub v1: Vec<[f64; 6]>,
    pub max_imag: f64,
}

/// `U¹ = Σ_{k≠0}|k|φ̂(y′,k)χ(y₃)e^{−|k|Y₃+ikθ}R⁺(k)` and
/// `V¹ = Σ_{k≠0}|k|φ̂(y′,k)χ(y₃)e^{|k|√(1−ν²τ²)Y₃+ikθ}R⁻(k)` on `grid`.
pub fn reconstruct_leading(front: &FrontSpectrum, coeffs: &DerivedCoefficients, grid: &ProfileGrid) -> Result<LeadingFields> {
    if grid.big_y3_plus.iter().any(|&y| y < 0.0) || grid.y3_plus.iter().any(|&y| y < 0.0) {
        return invalid("plasma-side y3 and Y3 nodes must be nonnegative");
    }
    if grid.big_y3_minus.iter().any(|&y| y > 0.0) || grid.y3_minus.iter().any(|&y| y > 0.0) {
        return invalid("vacuum-side y3 and Y3 nodes must be nonpositive");
    }
    let bases = [EigenBasis::new(coeffs, 1), EigenBasis::new(coeffs, -1)];
    let r = coeffs.root();
    let kmax = front.kmax as i64;
    let ny = grid.ny;
    let per_node: Vec<(Vec<[f64; 7]>, Vec<[f64; 6]>, f64)> = (0..ny * ny)
        .into_par_iter()
        .map(|node| {
            let y = [
                2.0 * std::f64::consts::PI * (node / ny) as f64 / ny as f64,
                2.0 * std::f64::consts::PI * (node % ny) as f64 / ny as f64,
            ];
            let modes = modes_at(front, y);
            let amp = |k: i64| modes[(k + kmax) as usize] * k.abs() as f64;
            let mut imag = 0.0f64;
            let mut u = Vec::new();
            for &y3 in &grid.y3_plus {
                let chi = cutoff(y3).0;
                for &yy in &grid.big_y3_plus {
                    for &th in &grid.theta {
                        let (sp, sm) = signed_sums(amp, front.kmax, 1.0, yy, th);
                        let v = (bases[0].r_plus * sp + bases[1].r_plus * sm) * c(chi);
                        imag = imag.max(v.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
                        u.push(std::array::from_fn(|i| v[i].re));
                    }
                }
            }
            let mut w = Vec::new();
            for &y3 in &grid.y3_minus {
                let chi = cutoff(y3).0;
                for &yy in &grid.big_y3_minus {
                    for &th in &grid.theta {
                        let (sp, sm) = signed_sums(amp, front.kmax, r, yy, th);
                        let v = (bases[0].r_minus * sp + bases[1].r_minus * sm) * c(chi);
                        imag = imag.max(v.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
                        w.push(std::array::from_fn(|i| v[i].re));
                    }
                }
            }
            (u, w, imag)
        })
        .collect();
    let mut out = LeadingFields { u1: Vec::new(), v1: Vec::new(), max_imag: 0.0 };
    for (u, w, im) in per_node {
        out.u1.extend(u);
        out.v1.extend(w);
        out.max_imag = out.max_imag.max(im);
    }
    Ok(out)
}

/// Norm used to scale the leading-order residuals: `‖φ‖_{H¹}`.
pub fn front_norm(front: &FrontSpectrum) -> f64 {
    hs_norm(front, 1.0)
}

fn sample_points(ny: usize, ntheta: usize) -> Vec<([f64; 2], f64)> {
    let tau = 2.0 * std::f64::consts::PI;
    let mut pts = Vec::with_capacity(ny * ny * ntheta);
    for a in 0..ny {
        for b in 0..ny {
            for t in 0..ntheta {
                pts.push(([tau * a as f64 / ny as f64, tau * b as f64 / ny as f64], tau * t as f64 / ntheta as f64));
            }
        }
    }
    pts
}

/// Sup norm of `𝔹⁺U¹ + 𝔹⁻V¹ + b∂θφ²` at `y₃ = Y₃ = 0` over an `ny² × ntheta` grid.
pub fn leading_boundary_residual(
    front: &FrontSpectrum,
    matrices: &SystemMatrices,
    bases: &[EigenBasis; 2],
    ny: usize,
    ntheta: usize,
) -> f64 {
    let kmax = front.kmax as i64;
    let bp = matrices.b_plus.map(c);
    let bm = matrices.b_minus.map(c);
    let bv = SVector::<Complex64, 6>::from(matrices.b_vec.map(c));
    let pts = sample_points(ny, ntheta);
    let mut cache: Vec<([f64; 2], Vec<Complex64>)> = Vec::new();
    for (y, _) in pts.iter().step_by(ntheta) {
        cache.push((*y, modes_at(front, *y)));
    }
    pts.par_iter()
        .enumerate()
        .map(|(idx, (_, th))| {
            let modes = &cache[idx / ntheta].1;
            let amp = |k: i64| modes[(k + kmax) as usize] * k.abs() as f64;
            let dth = |k: i64| modes[(k + kmax) as usize] * I * k as f64;
            let (sp, sm) = signed_sums(amp, front.kmax, 0.0, 0.0, *th);
            let (tp, tm) = signed_sums(dth, front.kmax, 0.0, 0.0, *th);
            let u = bases[0].r_plus * sp + bases[1].r_plus * sm;
            let v = bases[0].r_minus * sp + bases[1].r_minus * sm;
            let res = bp * u + bm * v + bv * (tp + tm);
            sup(&res)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FastResidual {
    pub plasma: [f64; 7],
    pub vacuum: [f64; 6],
    /// `div u`, `div B`, `div H`, `div E` in the fast variables.
    pub divergence: [f64; 4],
}

impl FastResidual {
    pub fn max(&self) -> f64 {
        self.plasma.iter().chain(&self.vacuum).chain(&self.divergence).copied().fold(0.0, f64::max)
    }
}

/// `(A±₃∂_{Y₃} + 𝒜±∂θ)` applied to `U¹`, `V¹` and the four fast divergences,
/// as sup norms over a `(y′, Y₃, θ)` grid; `matrices` may belong to another `τ`.
pub fn fast_pde_residual_leading(
    front: &FrontSpectrum,
    matrices: &SystemMatrices,
    bases: &[EigenBasis; 2],
    coeffs: &DerivedCoefficients,
    ny: usize,
    big_y3: &[f64],
    ntheta: usize,
) -> FastResidual {
    let kmax = front.kmax as i64;
    let r = coeffs.root();
    let [x1, x2] = coeffs.xi;
    let (a3p, sap) = (matrices.a_plus[3].map(c), matrices.scr_a_plus.map(c));
    let (a3m, sam) = (matrices.a_minus[3].map(c), matrices.scr_a_minus.map(c));
    let pts = sample_points(ny, ntheta);
    let mut cache = Vec::new();
    for (y, _) in pts.iter().step_by(ntheta) {
        cache.push(modes_at(front, *y));
    }
    let fast_div = |dy: &[Complex64], dth: &[Complex64], off: usize| (dy[off + 2] + dth[off] * x1 + dth[off + 1] * x2).norm();
    pts.par_iter()
        .enumerate()
        .map(|(idx, (_, th))| {
            let modes = &cache[idx / ntheta];
            let mut out = FastResidual::default();
            for &yy in big_y3 {
                let yy = yy.abs();
                let m = |k: i64| modes[(k + kmax) as usize] * k.abs() as f64;
                // plasma: ∂Y3 → −|k|, vacuum (Y3 = −yy): ∂Y3 → |k| r
                let (yp, ym) = signed_sums(|k| m(k) * -(k.abs() as f64), front.kmax, 1.0, yy, *th);
                let (tp, tm) = signed_sums(|k| m(k) * I * k as f64, front.kmax, 1.0, yy, *th);
                let uy = bases[0].r_plus * yp + bases[1].r_plus * ym;
                let ut = bases[0].r_plus * tp + bases[1].r_plus * tm;
                let pl = a3p * uy + sap * ut;
                let (vyp, vym) = signed_sums(|k| m(k) * (k.abs() as f64 * r), front.kmax, r, yy, *th);
                let (vtp, vtm) = signed_sums(|k| m(k) * I * k as f64, front.kmax, r, yy, *th);
                let vy = bases[0].r_minus * vyp + bases[1].r_minus * vym;
                let vt = bases[0].r_minus * vtp + bases[1].r_minus * vtm;
                let va = a3m * vy + sam * vt;
                for i in 0..7 {
                    out.plasma[i] = out.plasma[i].max(pl[i].norm());
                }
                for i in 0..6 {
                    out.vacuum[i] = out.vacuum[i].max(va[i].norm());
                }
                let (uy, ut): (Vec<_>, Vec<_>) = (uy.iter().copied().collect(), ut.iter().copied().collect());
                let (vy, vt): (Vec<_>, Vec<_>) = (vy.iter().copied().collect(), vt.iter().copied().collect());
                let d = [fast_div(&uy, &ut, 0), fast_div(&uy, &ut, 3), fast_div(&vy, &vt, 0), fast_div(&vy, &vt, 3)];
                for i in 0..4 {
                    out.divergence[i] = out.divergence[i].max(d[i]);
                }
            }
            out
        })
        .reduce(FastResidual::default, |a, b| FastResidual {
            plasma: std::array::from_fn(|i| a.plasma[i].max(b.plasma[i])),
            vacuum: std::array::from_fn(|i| a.vacuum[i].max(b.vacuum[i])),
            divergence: std::array::from_fn(|i| a.divergence[i].max(b.divergence[i])),
        })
}

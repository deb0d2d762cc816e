//! The order-one WKB approximate solution at fixed `ε`, its interior and
//! boundary residuals, the `ε`-sweep with fitted slopes, and the
//! rectification indicator.
//!
//! Fields are sampled in interface-fitted coordinates: `x′` on a uniform
//! `nx × nx` grid, `y₃ = x₃ − φ_ε` on geometric nodes on each side. Derivatives
//! are exact in `(Y₃, θ)`, spectral in `y′`, and use the front equation's
//! right-hand side for `∂tφ̂`, combined by the chain rule through
//! `y₃(t,x)`, `Y₃ = y₃/ε` and `θ = (τt + ξ·x′)/ε`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{AmplitudeOperator, FrontSpectrum, Trajectory};
use crate::error::{invalid, Result};
use crate::fft2::{unwrap, Fft2};
use crate::params::{derive_coefficients, DerivedCoefficients, FrequencyTriple, ReferenceState};
use crate::profiles::{cutoff, modes_at, EigenBasis};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Order of the approximate solution.
pub const ORDER: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WkbGrid {
    pub nx: usize,
    pub nz: usize,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for WkbGrid {
    fn default() -> Self {
        Self { nx: 64, nz: 48, z_min: 1e-3, z_max: 3.0 }
    }
}

impl WkbGrid {
    pub fn validate(&self, jmax: usize) -> Result<()> {
        if self.nx < 2 * jmax + 1 {
            return invalid(format!("nx = {} must be at least 2J+1 = {}", self.nx, 2 * jmax + 1));
        }
        if self.nz < 2 {
            return invalid("nz must be at least 2");
        }
        if !(self.z_min > 0.0 && self.z_max > self.z_min && self.z_max.is_finite()) {
            return invalid("need 0 < z_min < z_max");
        }
        Ok(())
    }

    /// Positive `y₃` nodes `z_min (z_max/z_min)^{i/(nz−1)}`; the vacuum side uses their negatives.
    pub fn y3_nodes(&self) -> Vec<f64> {
        let ratio = self.z_max / self.z_min;
        (0..self.nz).map(|i| self.z_min * ratio.powf(i as f64 / (self.nz - 1) as f64)).collect()
    }

    /// Trapezoidal weights on [`Self::y3_nodes`].
    pub fn y3_weights(&self) -> Vec<f64> {
        let z = self.y3_nodes();
        let n = z.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { z[i] - z[i - 1] } else { 0.0 };
                let right = if i + 1 < n { z[i + 1] - z[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    pub fn x_prime(&self, node: usize) -> [f64; 2] {
        let h = 2.0 * std::f64::consts::PI / self.nx as f64;
        [h * (node / self.nx) as f64, h * (node % self.nx) as f64]
    }
}

/// Values and `(∂t, ∂x₁, ∂x₂, ∂x₃)` of one side's field at a point; the vacuum uses the first six slots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: [f64; 7],
    pub d: [[f64; 7]; 4],
}

/// `φ_ε`, `∂tφ_ε`, `∂x₁φ_ε`, `∂x₂φ_ε` at a point `(t, x′)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrontJet {
    pub phi: f64,
    pub phi_t: f64,
    pub phi_x: [f64; 2],
}

/// `φ̂(y′,k)`, `∂tφ̂`, `∂y₁φ̂`, `∂y₂φ̂` at one slow point, each indexed `k + K`.
#[derive(Clone, Copy)]
pub struct SlowPoint<'a> {
    pub phi: &'a [Complex64],
    pub phi_t: &'a [Complex64],
    pub phi_y: [&'a [Complex64]; 2],
}

/// Owned variant of [`SlowPoint`] computed by direct summation.
#[derive(Clone, Debug)]
pub struct SlowModes {
    pub phi: Vec<Complex64>,
    pub phi_t: Vec<Complex64>,
    pub phi_y: [Vec<Complex64>; 2],
}

impl SlowModes {
    /// Evaluates `front` and `dfront = ∂tφ̂` at `y′`.
    pub fn at(front: &FrontSpectrum, dfront: &FrontSpectrum, y: [f64; 2]) -> Self {
        Self {
            phi: modes_at(front, y),
            phi_t: modes_at(dfront, y),
            phi_y: [modes_at(&gradient(front, 0), y), modes_at(&gradient(front, 1), y)],
        }
    }

    pub fn view(&self) -> SlowPoint<'_> {
        SlowPoint { phi: &self.phi, phi_t: &self.phi_t, phi_y: [&self.phi_y[0], &self.phi_y[1]] }
    }
}

fn gradient(front: &FrontSpectrum, axis: usize) -> FrontSpectrum {
    let mut out = front.clone();
    for (j1, j2, _, i) in front.modes() {
        let j = if axis == 0 { j1 } else { j2 };
        out.coeffs[i] = front.coeffs[i] * I * j as f64;
    }
    out
}

/// Largest `|k|` carrying a nonzero coefficient.
fn active_kmax(front: &FrontSpectrum) -> usize {
    front.modes().filter(|m| front.coeffs[m.3] != ZERO).map(|m| m.2.unsigned_abs() as usize).max().unwrap_or(0)
}

/// Everything needed to evaluate the approximate solution at a point, given slow data.
#[derive(Clone, Debug)]
pub struct JetKernel {
    pub eps: f64,
    pub coeffs: DerivedCoefficients,
    kmax: usize,
    kact: usize,
    plasma_bg: [f64; 7],
    vacuum_bg: [f64; 7],
    r_plus: [[Complex64; 7]; 2],
    r_minus: [[Complex64; 7]; 2],
}

impl JetKernel {
    pub fn new(state: &ReferenceState, coeffs: &DerivedCoefficients, eps: f64, front: &FrontSpectrum) -> Self {
        let bases = [EigenBasis::new(coeffs, 1), EigenBasis::new(coeffs, -1)];
        let pad = |v: &[Complex64]| std::array::from_fn(|i| v.get(i).copied().unwrap_or(ZERO));
        Self {
            eps,
            coeffs: coeffs.clone(),
            kmax: front.kmax,
            kact: active_kmax(front),
            plasma_bg: [state.u0[0], state.u0[1], state.u0[2], state.b0[0], state.b0[1], state.b0[2], state.q0()],
            vacuum_bg: [state.h0[0], state.h0[1], state.h0[2], 0.0, 0.0, state.e3, 0.0],
            r_plus: [pad(bases[0].r_plus.as_slice()), pad(bases[1].r_plus.as_slice())],
            r_minus: [pad(bases[0].r_minus.as_slice()), pad(bases[1].r_minus.as_slice())],
        }
    }

    /// `θ = (τt + ξ·x′)/ε`.
    pub fn theta(&self, t: f64, x: [f64; 2]) -> f64 {
        (self.coeffs.tau * t + self.coeffs.xi[0] * x[0] + self.coeffs.xi[1] * x[1]) / self.eps
    }

    pub fn front_jet(&self, slow: SlowPoint<'_>, theta: f64) -> FrontJet {
        let kk = self.kmax as i64;
        let (mut p, mut pt, mut pth, mut p1, mut p2) = (ZERO, ZERO, ZERO, ZERO, ZERO);
        let z = Complex64::from_polar(1.0, theta);
        let mut zp = Complex64::new(1.0, 0.0);
        for k in 1..=self.kact as i64 {
            zp *= z;
            for (kk_, e) in [(k, zp), (-k, zp.conj())] {
                let i = (kk_ + kk) as usize;
                p += slow.phi[i] * e;
                pt += slow.phi_t[i] * e;
                pth += slow.phi[i] * e * I * kk_ as f64;
                p1 += slow.phi_y[0][i] * e;
                p2 += slow.phi_y[1][i] * e;
            }
        }
        let (eps, tau, xi) = (self.eps, self.coeffs.tau, self.coeffs.xi);
        FrontJet {
            phi: eps * eps * p.re,
            phi_t: eps * eps * pt.re + eps * tau * pth.re,
            phi_x: [eps * eps * p1.re + eps * xi[0] * pth.re, eps * eps * p2.re + eps * xi[1] * pth.re],
        }
    }

    pub fn plasma_jet(&self, slow: SlowPoint<'_>, theta: f64, y3: f64, front: &FrontJet) -> Jet {
        self.jet(slow, theta, y3, front, &self.r_plus, 1.0, &self.plasma_bg)
    }

    /// Vacuum field with decay `e^{−√(1−ν²τ²)|k||Y₃|}`; at `y₃ > 0` this is the mirrored profile.
    pub fn vacuum_jet(&self, slow: SlowPoint<'_>, theta: f64, y3: f64, front: &FrontJet) -> Jet {
        self.jet(slow, theta, y3, front, &self.r_minus, self.coeffs.root(), &self.vacuum_bg)
    }

    #[allow(clippy::too_many_arguments)]
    fn jet(
        &self,
        slow: SlowPoint<'_>,
        theta: f64,
        y3: f64,
        front: &FrontJet,
        vecs: &[[Complex64; 7]; 2],
        rate: f64,
        bg: &[f64; 7],
    ) -> Jet {
        let eps = self.eps;
        let big = y3 / eps;
        let dy_sign = -rate * big.signum();
        let kk = self.kmax as i64;
        let zp = Complex64::from_polar((-rate * big.abs()).exp(), theta);
        let zm = zp.conj();
        // per sign: value, ∂t, ∂y1, ∂y2, ∂Y3, ∂θ
        let mut s = [[ZERO; 6]; 2];
        let (mut ep, mut em) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        for k in 1..=self.kact as i64 {
            ep *= zp;
            em *= zm;
            let kf = k as f64;
            for (slot, signed, e) in [(0usize, k, ep), (1usize, -k, em)] {
                let i = (signed + kk) as usize;
                let m = slow.phi[i] * kf * e;
                let acc = &mut s[slot];
                acc[0] += m;
                acc[1] += slow.phi_t[i] * kf * e;
                acc[2] += slow.phi_y[0][i] * kf * e;
                acc[3] += slow.phi_y[1][i] * kf * e;
                acc[4] += m * (dy_sign * kf);
                acc[5] += m * I * signed as f64;
            }
        }
        let (chi, dchi) = cutoff(y3);
        let mut w = [[0.0; 7]; 6];
        for (q, row) in w.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = (vecs[0][c] * s[0][q] + vecs[1][c] * s[1][q]).re;
            }
        }
        let (tau, xi) = (self.coeffs.tau, self.coeffs.xi);
        let mut jet = Jet { value: *bg, d: [[0.0; 7]; 4] };
        for c in 0..7 {
            let (v, vt, v1, v2, vy, vth) = (w[0][c], w[1][c], w[2][c], w[3][c], w[4][c], w[5][c]);
            // ∂y3 + ∂Y3/ε applied to χ·W
            let normal = dchi * v + chi * vy / eps;
            jet.value[c] += eps * chi * v;
            jet.d[0][c] = eps * (chi * vt + chi * tau / eps * vth - front.phi_t * normal);
            jet.d[1][c] = eps * (chi * v1 + chi * xi[0] / eps * vth - front.phi_x[0] * normal);
            jet.d[2][c] = eps * (chi * v2 + chi * xi[1] / eps * vth - front.phi_x[1] * normal);
            jet.d[3][c] = eps * normal;
        }
        jet
    }
}

/// Incompressible MHD residuals: momentum ×3, induction ×3, `div u`, `div B`.
pub fn mhd_residual(j: &Jet) -> [f64; 8] {
    let v = &j.value;
    let (u, b) = (&v[0..3], &v[3..6]);
    let d = |alpha: usize, c: usize| j.d[alpha + 1][c];
    let mut r = [0.0; 8];
    for i in 0..3 {
        let mut mom = j.d[0][i] + d(i, 6);
        let mut ind = j.d[0][3 + i];
        for a in 0..3 {
            mom += u[a] * d(a, i) - b[a] * d(a, 3 + i);
            ind += u[a] * d(a, 3 + i) - b[a] * d(a, i);
        }
        r[i] = mom;
        r[3 + i] = ind;
    }
    r[6] = d(0, 0) + d(1, 1) + d(2, 2);
    r[7] = d(0, 3) + d(1, 4) + d(2, 5);
    r
}

/// Maxwell residuals `ν∂tH + ∇×E`, `ν∂tE − ∇×H`, `div H`, `div E`.
pub fn maxwell_residual(j: &Jet, nu: f64) -> [f64; 8] {
    let d = |alpha: usize, c: usize| j.d[alpha + 1][c];
    let curl = |off: usize| {
        [d(1, off + 2) - d(2, off + 1), d(2, off) - d(0, off + 2), d(0, off + 1) - d(1, off)]
    };
    let (ce, ch) = (curl(3), curl(0));
    let mut r = [0.0; 8];
    for i in 0..3 {
        r[i] = nu * j.d[0][i] + ce[i];
        r[3 + i] = nu * j.d[0][3 + i] - ch[i];
    }
    r[6] = d(0, 0) + d(1, 1) + d(2, 2);
    r[7] = d(0, 3) + d(1, 4) + d(2, 5);
    r
}

/// Interface conditions `[φ_t − u·N, q − ½|H|² + ½|E|², B·N, H·N, (N×E − ν(u·N)H)₁, (…)₂, (…)₃]`.
pub fn interface_residual(front: &FrontJet, plasma: &[f64; 7], vacuum: &[f64; 7], nu: f64) -> [f64; 7] {
    let n = [-front.phi_x[0], -front.phi_x[1], 1.0];
    let dot = |a: &[f64]| a[0] * n[0] + a[1] * n[1] + a[2] * n[2];
    let (u, b, q) = (&plasma[0..3], &plasma[3..6], plasma[6]);
    let (h, e) = (&vacuum[0..3], &vacuum[3..6]);
    let un = dot(u);
    let cross = [n[1] * e[2] - n[2] * e[1], n[2] * e[0] - n[0] * e[2], n[0] * e[1] - n[1] * e[0]];
    let h2: f64 = h.iter().map(|x| x * x).sum();
    let e2: f64 = e.iter().map(|x| x * x).sum();
    [
        front.phi_t - un,
        q - 0.5 * h2 + 0.5 * e2,
        dot(b),
        dot(h),
        cross[0] - nu * un * h[0],
        cross[1] - nu * un * h[1],
        cross[2] - nu * un * h[2],
    ]
}

/// Sampled order-one approximate solution at one time and one `ε`.
#[derive(Clone, Debug)]
pub struct WkbField {
    pub eps: f64,
    pub order: u32,
    pub time: f64,
    pub snapshot: usize,
    pub grid: WkbGrid,
    pub state: ReferenceState,
    pub kernel: JetKernel,
    /// Node-major `nx² × (2K+1)` arrays of `φ̂`, `∂tφ̂`, `∂y₁φ̂`, `∂y₂φ̂`.
    slow: [Vec<Complex64>; 4],
}

/// Builds the approximate solution from snapshot `snapshot` of `traj`.
pub fn assemble_wkb(
    traj: &Trajectory,
    snapshot: usize,
    state: &ReferenceState,
    freq: &FrequencyTriple,
    eps: f64,
    grid: &WkbGrid,
) -> Result<WkbField> {
    let expected = freq.eps();
    if !((eps - expected).abs() <= 1e-14 * expected) {
        return invalid(format!(
            "eps = {eps:e} is not 1/(l sqrt(p^2+q^2)) = {expected:e}; x'-periodicity would break"
        ));
    }
    let Some(front) = traj.snapshots.get(snapshot) else {
        return invalid(format!("snapshot {snapshot} out of range (trajectory has {})", traj.snapshots.len()));
    };
    grid.validate(front.jmax)?;
    let coeffs = derive_coefficients(state, freq)?;
    let op = AmplitudeOperator::new(&coeffs, front.jmax, front.kmax, traj.config.acceleration)?;
    let mut dfront = op.rhs(front);
    dfront.mask(traj.config.cut(front.kmax));
    let fft = Fft2::new(grid.nx);
    let slow = [
        front.to_physical(&fft),
        dfront.to_physical(&fft),
        gradient(front, 0).to_physical(&fft),
        gradient(front, 1).to_physical(&fft),
    ];
    Ok(WkbField {
        eps,
        order: ORDER,
        time: front.time,
        snapshot,
        grid: *grid,
        state: state.clone(),
        kernel: JetKernel::new(state, &coeffs, eps, front),
        slow,
    })
}

impl WkbField {
    fn kwidth(&self) -> usize {
        2 * self.kernel.kmax + 1
    }

    pub fn node_count(&self) -> usize {
        self.grid.nx * self.grid.nx
    }

    pub fn slow_point(&self, node: usize) -> SlowPoint<'_> {
        let kw = self.kwidth();
        let r = node * kw..(node + 1) * kw;
        SlowPoint {
            phi: &self.slow[0][r.clone()],
            phi_t: &self.slow[1][r.clone()],
            phi_y: [&self.slow[2][r.clone()], &self.slow[3][r]],
        }
    }

    pub fn theta(&self, node: usize) -> f64 {
        self.kernel.theta(self.time, self.grid.x_prime(node))
    }

    pub fn front_jet(&self, node: usize) -> FrontJet {
        self.kernel.front_jet(self.slow_point(node), self.theta(node))
    }

    pub fn plasma_jet(&self, node: usize, y3: f64) -> Jet {
        let fj = self.front_jet(node);
        self.kernel.plasma_jet(self.slow_point(node), self.theta(node), y3, &fj)
    }

    pub fn vacuum_jet(&self, node: usize, y3: f64) -> Jet {
        let fj = self.front_jet(node);
        self.kernel.vacuum_jet(self.slow_point(node), self.theta(node), y3, &fj)
    }

    /// `φ_ε(t, x′)` on the `x′` grid.
    pub fn front_samples(&self) -> Vec<f64> {
        (0..self.node_count()).map(|n| self.front_jet(n).phi).collect()
    }

    /// `U^app` ordered `(x′ node, y₃ node)`, `y₃ > 0`.
    pub fn plasma_samples(&self) -> Vec<[f64; 7]> {
        let z = self.grid.y3_nodes();
        (0..self.node_count()).flat_map(|n| z.iter().map(move |&y| self.plasma_jet(n, y).value)).collect()
    }

    /// `V^app` ordered `(x′ node, y₃ node)`, `y₃ < 0`; six components.
    pub fn vacuum_samples(&self) -> Vec<[f64; 6]> {
        let z = self.grid.y3_nodes();
        (0..self.node_count())
            .flat_map(|n| z.iter().map(move |&y| std::array::from_fn(|i| self.vacuum_jet(n, -y).value[i])))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InteriorNorms {
    /// Momentum ×3, induction ×3, `div u`, `div B`.
    pub plasma_sup: [f64; 8],
    /// `ν∂tH+∇×E` ×3, `ν∂tE−∇×H` ×3, `div H`, `div E`.
    pub vacuum_sup: [f64; 8],
    pub plasma_l2: [f64; 8],
    pub vacuum_l2: [f64; 8],
}

impl InteriorNorms {
    pub fn sup(&self) -> f64 {
        self.plasma_sup.iter().chain(&self.vacuum_sup).copied().fold(0.0, f64::max)
    }

    pub fn components(&self) -> Vec<f64> {
        self.plasma_sup.iter().chain(&self.vacuum_sup).copied().collect()
    }

    fn merge(&mut self, o: &InteriorNorms) {
        for i in 0..8 {
            self.plasma_sup[i] = self.plasma_sup[i].max(o.plasma_sup[i]);
            self.vacuum_sup[i] = self.vacuum_sup[i].max(o.vacuum_sup[i]);
            self.plasma_l2[i] = self.plasma_l2[i].max(o.plasma_l2[i]);
            self.vacuum_l2[i] = self.vacuum_l2[i].max(o.vacuum_l2[i]);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BoundaryNorms {
    /// Kinematic, pressure jump, `B·N`, `H·N`, first two rows of `N×E − ν(u·N)H`.
    pub sup: [f64; 5],
    pub l2: [f64; 5],
    /// Third row of `N×E − ν(u·N)H`.
    pub third_row: f64,
}

impl BoundaryNorms {
    pub fn max(&self) -> f64 {
        self.sup.iter().copied().fold(0.0, f64::max)
    }

    fn merge(&mut self, o: &BoundaryNorms) {
        for i in 0..5 {
            self.sup[i] = self.sup[i].max(o.sup[i]);
            self.l2[i] = self.l2[i].max(o.l2[i]);
        }
        self.third_row = self.third_row.max(o.third_row);
    }
}

fn interior_with(field: &WkbField, vacuum_sign: f64) -> InteriorNorms {
    let z = field.grid.y3_nodes();
    let wz = field.grid.y3_weights();
    let h = 2.0 * std::f64::consts::PI / field.grid.nx as f64;
    let nu = field.state.nu;
    let per_node: Vec<[[f64; 8]; 4]> = (0..field.node_count())
        .into_par_iter()
        .map(|node| {
            let sp = field.slow_point(node);
            let th = field.theta(node);
            let fj = field.kernel.front_jet(sp, th);
            let mut acc = [[0.0f64; 8]; 4];
            for (&y, &w) in z.iter().zip(&wz) {
                let p = mhd_residual(&field.kernel.plasma_jet(sp, th, y, &fj));
                let v = maxwell_residual(&field.kernel.vacuum_jet(sp, th, vacuum_sign * y, &fj), nu);
                for i in 0..8 {
                    acc[0][i] = acc[0][i].max(p[i].abs());
                    acc[1][i] = acc[1][i].max(v[i].abs());
                    acc[2][i] += w * p[i] * p[i];
                    acc[3][i] += w * v[i] * v[i];
                }
            }
            acc
        })
        .collect();
    let mut out = InteriorNorms::default();
    let mut l2 = [[0.0; 8]; 2];
    for acc in &per_node {
        for i in 0..8 {
            out.plasma_sup[i] = out.plasma_sup[i].max(acc[0][i]);
            out.vacuum_sup[i] = out.vacuum_sup[i].max(acc[1][i]);
            l2[0][i] += acc[2][i];
            l2[1][i] += acc[3][i];
        }
    }
    for i in 0..8 {
        out.plasma_l2[i] = (h * h * l2[0][i]).sqrt();
        out.vacuum_l2[i] = (h * h * l2[1][i]).sqrt();
    }
    out
}

/// Sup norms (and discrete `L²` norms) of the sixteen interior expressions on their sides.
pub fn interior_residual(field: &WkbField) -> InteriorNorms {
    interior_with(field, -1.0)
}

/// Maxwell residuals of the vacuum profile evaluated on the plasma side `y₃ > 0`.
pub fn mirrored_vacuum_residual(field: &WkbField) -> [f64; 8] {
    interior_with(field, 1.0).vacuum_sup
}

/// Sup and `L²` norms of the interface conditions on `x₃ = φ_ε(t, x′)`.
pub fn jump_residual(field: &WkbField) -> BoundaryNorms {
    let h = 2.0 * std::f64::consts::PI / field.grid.nx as f64;
    let nu = field.state.nu;
    let per_node: Vec<[f64; 7]> = (0..field.node_count())
        .into_par_iter()
        .map(|node| {
            let sp = field.slow_point(node);
            let th = field.theta(node);
            let fj = field.kernel.front_jet(sp, th);
            let p = field.kernel.plasma_jet(sp, th, 0.0, &fj).value;
            let v = field.kernel.vacuum_jet(sp, th, 0.0, &fj).value;
            interface_residual(&fj, &p, &v, nu)
        })
        .collect();
    let mut out = BoundaryNorms::default();
    let mut l2 = [0.0; 5];
    for r in &per_node {
        let rows = [r[0], r[1], r[2], r[3], r[4].abs().max(r[5].abs())];
        for i in 0..5 {
            out.sup[i] = out.sup[i].max(rows[i].abs());
        }
        for i in 0..4 {
            l2[i] += r[i] * r[i];
        }
        l2[4] += r[4] * r[4] + r[5] * r[5];
        out.third_row = out.third_row.max(r[6].abs());
    }
    for i in 0..5 {
        out.l2[i] = (h * h * l2[i]).sqrt();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonLevel {
    pub l: u32,
    pub eps: f64,
    pub interior: InteriorNorms,
    pub boundary: BoundaryNorms,
    pub interior_sup: f64,
    pub boundary_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub order: u32,
    pub times: Vec<f64>,
    pub levels: Vec<EpsilonLevel>,
    pub interior_slope: Option<f64>,
    pub boundary_slope: Option<f64>,
    /// Slopes of the sixteen interior components (plasma then vacuum).
    pub interior_component_slopes: Vec<Option<f64>>,
    pub boundary_component_slopes: Vec<Option<f64>>,
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `log y` against `log x`; `None` unless every `y` is positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Evenly spaced snapshot indices, at most `count`, always including the first and last.
pub fn snapshot_selection(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    if count >= len {
        return (0..len).collect();
    }
    if count == 1 {
        return vec![len - 1];
    }
    let mut out: Vec<usize> =
        (0..count).map(|i| ((i as f64) * (len - 1) as f64 / (count - 1) as f64).round() as usize).collect();
    out.dedup();
    out
}

/// Residual norms for every `l` in `ls`, maximised over the selected snapshots, with fitted slopes.
pub fn epsilon_sweep(
    traj: &Trajectory,
    state: &ReferenceState,
    freq: &FrequencyTriple,
    ls: &[u32],
    grid: &WkbGrid,
    snapshots: &[usize],
) -> Result<ResidualReport> {
    if ls.len() < 3 {
        return invalid(format!("an epsilon sweep needs at least 3 values of l, got {}", ls.len()));
    }
    if snapshots.is_empty() {
        return invalid("no snapshots selected");
    }
    let mut levels = Vec::with_capacity(ls.len());
    for &l in ls {
        let f = freq.with_l(l);
        let eps = f.eps();
        let mut interior = InteriorNorms::default();
        let mut boundary = BoundaryNorms::default();
        for &s in snapshots {
            let field = assemble_wkb(traj, s, state, &f, eps, grid)?;
            interior.merge(&interior_residual(&field));
            boundary.merge(&jump_residual(&field));
        }
        levels.push(EpsilonLevel {
            l,
            eps,
            interior_sup: interior.sup(),
            boundary_sup: boundary.max(),
            interior,
            boundary,
        });
    }
    let eps: Vec<f64> = levels.iter().map(|l| l.eps).collect();
    let scale = [state.u0, state.b0, state.h0].iter().flatten().fold(state.e3.abs().max(1.0), |a, b| a.max(b.abs()));
    let floor = 1e-12 * scale;
    let mut warnings = Vec::new();
    let fit = |name: &str, ys: Vec<f64>, warnings: &mut Vec<String>| -> Option<f64> {
        if ys.iter().all(|v| *v == 0.0) {
            return None;
        }
        if let Some(i) = ys.iter().position(|v| *v < floor) {
            warnings.push(format!(
                "{name}: residual {:.3e} at eps = {:.3e} is at the floating-point floor",
                ys[i], eps[i]
            ));
            return None;
        }
        loglog_slope(&eps, &ys)
    };
    let interior_slope = fit("interior", levels.iter().map(|l| l.interior_sup).collect(), &mut warnings);
    let boundary_slope = fit("boundary", levels.iter().map(|l| l.boundary_sup).collect(), &mut warnings);
    let mut quiet = Vec::new();
    let interior_component_slopes = (0..16)
        .map(|c| fit(&format!("interior[{c}]"), levels.iter().map(|l| l.interior.components()[c]).collect(), &mut quiet))
        .collect();
    let boundary_component_slopes =
        (0..5).map(|c| fit(&format!("boundary[{c}]"), levels.iter().map(|l| l.boundary.sup[c]).collect(), &mut quiet)).collect();
    let degenerate = interior_slope.is_none() || boundary_slope.is_none();
    let times = snapshots.iter().filter_map(|&s| traj.snapshots.get(s).map(|f| f.time)).collect();
    Ok(ResidualReport {
        order: ORDER,
        times,
        levels,
        interior_slope,
        boundary_slope,
        interior_component_slopes,
        boundary_component_slopes,
        degenerate,
        warnings,
    })
}

/// Coefficients of `ν²∂t∂t`, `ν∂t∂y₁`, `ν∂t∂y₂` in the rectification identity, including the `ν` factors.
pub fn rectification_coefficients(state: &ReferenceState, coeffs: &DerivedCoefficients) -> [f64; 3] {
    let [x1, x2] = coeffs.xi;
    let (nu, tau) = (state.nu, coeffs.tau);
    let nt = nu * tau;
    let [h1, h2] = state.h();
    let e3 = state.e3;
    let bm = x1 * h1 + x2 * h2;
    [
        (x2 * h1 - x1 * h2 + nt * e3) * bm * nu * nu,
        (-nt * x2 * h1 * h1 + nt * x1 * h1 * h2 - (nt * nt + x2 * x2) * h1 * e3 + x1 * x2 * h2 * e3 - x2 * e3 * e3) * nu,
        (-nt * x2 * h1 * h2 + nt * x1 * h2 * h2 + x1 * x2 * h1 * e3 - (nt * nt + x1 * x1) * h2 * e3 + x1 * e3 * e3) * nu,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RectificationReport {
    pub coefficients: [f64; 3],
    /// Times at which the indicator is evaluated (interior snapshots).
    pub times: Vec<f64>,
    pub per_time_sup: Vec<f64>,
    pub sup: f64,
    /// `sup / max_t ‖S‖_{H²}`, zero when `S ≡ 0`.
    pub relative: f64,
    pub s_h2_max: f64,
    pub max_imag_s: f64,
    pub min_s: f64,
    pub grid: usize,
}

/// `S(y′) = Σ_{k≠0}|k|φ̂(−k)φ̂(k)` on an `n × n` grid, as complex values.
fn s_field(front: &FrontSpectrum, fft: &Fft2) -> Vec<Complex64> {
    let kw = front.kwidth();
    let kk = front.kmax as i64;
    let phys = front.to_physical(fft);
    phys.chunks(kw)
        .map(|m| {
            (1..=kk).fold(ZERO, |acc, k| {
                acc + 2.0 * k as f64 * m[(kk - k) as usize] * m[(kk + k) as usize]
            })
        })
        .collect()
}

/// The rectification combination applied to `S`: second time differences and
/// mixed differences from snapshots, `y′` derivatives spectrally.
pub fn rectification_indicator(
    traj: &Trajectory,
    state: &ReferenceState,
    coeffs: &DerivedCoefficients,
) -> Result<RectificationReport> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return invalid(format!("the rectification indicator needs at least 3 snapshots, got {}", snaps.len()));
    }
    let dt = snaps[1].time - snaps[0].time;
    if !(dt > 0.0) || snaps.windows(2).any(|w| ((w[1].time - w[0].time) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return invalid("snapshots must be uniformly spaced in time");
    }
    let c = rectification_coefficients(state, coeffs);
    let n = 4 * snaps[0].jmax + 2;
    let fft = Fft2::new(n);
    let mut max_imag = 0.0f64;
    let mut min_s = f64::INFINITY;
    let mut s_h2_max = 0.0f64;
    // per snapshot: S, ∂y1 S, ∂y2 S on the grid
    let mut fields = Vec::with_capacity(snaps.len());
    for f in snaps {
        let s = s_field(f, &fft);
        let smax = s.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for v in &s {
            max_imag = max_imag.max(v.im.abs() / smax.max(1.0));
            min_s = min_s.min(v.re / smax.max(1.0));
        }
        let mut hat: Vec<Complex64> = s.iter().map(|v| Complex64::new(v.re, 0.0)).collect();
        fft.forward(&mut hat);
        let norm = 1.0 / (n * n) as f64;
        let mut h2 = 0.0;
        let mut d1 = vec![ZERO; n * n];
        let mut d2 = vec![ZERO; n * n];
        for a in 0..n {
            for b in 0..n {
                let (j1, j2) = (unwrap(a, n), unwrap(b, n));
                let v = hat[a * n + b] * norm;
                h2 += (1.0 + (j1 * j1 + j2 * j2) as f64).powi(2) * v.norm_sqr();
                // Nyquist rows carry no derivative
                let (k1, k2) = (if 2 * a == n { 0 } else { j1 }, if 2 * b == n { 0 } else { j2 });
                d1[a * n + b] = v * I * k1 as f64;
                d2[a * n + b] = v * I * k2 as f64;
            }
        }
        s_h2_max = s_h2_max.max(h2.sqrt());
        fft.inverse(&mut d1);
        fft.inverse(&mut d2);
        let re = |v: Vec<Complex64>| v.into_iter().map(|z| z.re).collect::<Vec<f64>>();
        fields.push((s.iter().map(|z| z.re).collect::<Vec<f64>>(), re(d1), re(d2)));
    }
    let mut per_time_sup = Vec::new();
    let mut times = Vec::new();
    for m in 1..snaps.len() - 1 {
        let (prev, cur, next) = (&fields[m - 1], &fields[m], &fields[m + 1]);
        let mut sup = 0.0f64;
        for p in 0..n * n {
            let stt = (next.0[p] - 2.0 * cur.0[p] + prev.0[p]) / (dt * dt);
            let st1 = (next.1[p] - prev.1[p]) / (2.0 * dt);
            let st2 = (next.2[p] - prev.2[p]) / (2.0 * dt);
            sup = sup.max((c[0] * stt + c[1] * st1 + c[2] * st2).abs());
        }
        per_time_sup.push(sup);
        times.push(snaps[m].time);
    }
    let sup = per_time_sup.iter().copied().fold(0.0, f64::max);
    Ok(RectificationReport {
        coefficients: c,
        times,
        per_time_sup,
        sup,
        relative: if s_h2_max > 0.0 { sup / s_h2_max } else { 0.0 },
        s_h2_max,
        max_imag_s: max_imag,
        min_s: if min_s.is_finite() { min_s } else { 0.0 },
        grid: n,
    })
}

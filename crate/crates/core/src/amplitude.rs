//! Pseudo-spectral solver for the nonlocal Hamilton–Jacobi equation of the
//! leading front and for its linearisation.
//!
//! The unknown is `φ(y′, θ) = Σ φ̂(j′, k) e^{i(j′·y′ + kθ)}` on `𝕋² × 𝕋`,
//! truncated to `|j′₁|, |j′₂| ≤ J` and `|k| ≤ K`. The quadratic term is
//! evaluated node by node in physical `y′` on a grid of `n ≥ 3J+1` points per
//! direction, so the product followed by truncation back to `|j′| ≤ J` is
//! free of aliasing.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft2::{wrap, Fft2};
use crate::kernel::{Acceleration, KernelPlan, KernelSpec};
use crate::params::DerivedCoefficients;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// One modal amplitude of the initial front: `φ̂(j1, j2, k) = re + i·im`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontMode {
    pub j1: i64,
    pub j2: i64,
    pub k: i64,
    pub re: f64,
    pub im: f64,
}

/// Fourier coefficients of the front profile at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontSpectrum {
    pub jmax: usize,
    pub kmax: usize,
    pub time: f64,
    /// Index `((j1+J)(2J+1) + (j2+J))(2K+1) + (k+K)`.
    pub coeffs: Vec<Complex64>,
}

impl FrontSpectrum {
    pub fn zeros(jmax: usize, kmax: usize) -> Self {
        let len = (2 * jmax + 1) * (2 * jmax + 1) * (2 * kmax + 1);
        Self { jmax, kmax, time: 0.0, coeffs: vec![ZERO; len] }
    }

    pub fn kwidth(&self) -> usize {
        2 * self.kmax + 1
    }

    pub fn jwidth(&self) -> usize {
        2 * self.jmax + 1
    }

    pub fn contains(&self, j1: i64, j2: i64, k: i64) -> bool {
        let (j, kk) = (self.jmax as i64, self.kmax as i64);
        j1.abs() <= j && j2.abs() <= j && k.abs() <= kk
    }

    pub fn index(&self, j1: i64, j2: i64, k: i64) -> usize {
        debug_assert!(self.contains(j1, j2, k));
        let (j, kk) = (self.jmax as i64, self.kmax as i64);
        let row = (j1 + j) as usize * self.jwidth() + (j2 + j) as usize;
        row * self.kwidth() + (k + kk) as usize
    }

    pub fn get(&self, j1: i64, j2: i64, k: i64) -> Complex64 {
        self.coeffs[self.index(j1, j2, k)]
    }

    pub fn set(&mut self, j1: i64, j2: i64, k: i64, v: Complex64) {
        let i = self.index(j1, j2, k);
        self.coeffs[i] = v;
    }

    /// Builds a spectrum from modal amplitudes, adding the conjugate partner of every mode.
    pub fn from_modes(jmax: usize, kmax: usize, modes: &[FrontMode]) -> Result<Self> {
        let mut s = Self::zeros(jmax, kmax);
        for m in modes {
            if m.k == 0 {
                return invalid(format!("front mode ({}, {}, 0): the zero theta-mode is excluded", m.j1, m.j2));
            }
            if !s.contains(m.j1, m.j2, m.k) {
                return invalid(format!(
                    "front mode ({}, {}, {}) lies outside the truncation J = {jmax}, K = {kmax}",
                    m.j1, m.j2, m.k
                ));
            }
            if !(m.re.is_finite() && m.im.is_finite()) {
                return invalid("front mode amplitudes must be finite");
            }
            let a = Complex64::new(m.re, m.im);
            let i = s.index(m.j1, m.j2, m.k);
            s.coeffs[i] += a;
            let c = s.index(-m.j1, -m.j2, -m.k);
            s.coeffs[c] += a.conj();
        }
        Ok(s)
    }

    /// Iterates over `(j1, j2, k, index)`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, i64, i64, usize)> + '_ {
        let (j, kk) = (self.jmax as i64, self.kmax as i64);
        let kw = self.kwidth();
        let jw = self.jwidth();
        (0..self.coeffs.len()).map(move |i| {
            let k = (i % kw) as i64 - kk;
            let row = i / kw;
            let j2 = (row % jw) as i64 - j;
            let j1 = (row / jw) as i64 - j;
            (j1, j2, k, i)
        })
    }

    /// `max |φ̂(−j′,−k) − conj φ̂(j′,k)|`.
    pub fn reality_defect(&self) -> f64 {
        self.modes()
            .map(|(j1, j2, k, i)| (self.coeffs[self.index(-j1, -j2, -k)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `max |φ̂(j′, 0)|`.
    pub fn zero_mode_defect(&self) -> f64 {
        self.modes().filter(|m| m.2 == 0).map(|m| self.coeffs[m.3].norm()).fold(0.0, f64::max)
    }

    /// Zeroes the `k = 0` column and, if given, every `|k| > cut`.
    pub fn mask(&mut self, cut: Option<usize>) {
        let kk = self.kmax as i64;
        let kw = self.kwidth();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let k = (i % kw) as i64 - kk;
            if k == 0 || cut.is_some_and(|cut| k.unsigned_abs() as usize > cut) {
                *c = ZERO;
            }
        }
    }

    /// Restores reality by symmetric averaging, then applies [`Self::mask`].
    pub fn project(&mut self, cut: Option<usize>) {
        let old = self.coeffs.clone();
        for (j1, j2, k, i) in self.modes().collect::<Vec<_>>() {
            let partner = old[self.index(-j1, -j2, -k)];
            self.coeffs[i] = 0.5 * (old[i] + partner.conj());
        }
        self.mask(cut);
    }

    pub fn axpy(&mut self, a: f64, x: &FrontSpectrum) {
        for (c, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *c += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> FrontSpectrum {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `max |self − other|` over all coefficients.
    pub fn sup_distance(&self, other: &FrontSpectrum) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Values of `φ̂(·, k)` on the `n × n` physical grid `y′ = 2π(a, b)/n`, node-major.
    pub fn to_physical(&self, fft: &Fft2) -> Vec<Complex64> {
        let n = fft.n();
        let kw = self.kwidth();
        let j = self.jmax as i64;
        let columns: Vec<Option<Vec<Complex64>>> = (0..kw)
            .into_par_iter()
            .map(|kc| {
                let mut grid = vec![ZERO; n * n];
                let mut any = false;
                for j1 in -j..=j {
                    for j2 in -j..=j {
                        let v = self.coeffs[self.index(j1, j2, kc as i64 - self.kmax as i64)];
                        if v != ZERO {
                            any = true;
                            grid[wrap(j1, n) * n + wrap(j2, n)] += v;
                        }
                    }
                }
                any.then(|| {
                    fft.inverse(&mut grid);
                    grid
                })
            })
            .collect();
        let mut out = vec![ZERO; n * n * kw];
        for (kc, col) in columns.iter().enumerate() {
            if let Some(col) = col {
                for (node, v) in col.iter().enumerate() {
                    out[node * kw + kc] = *v;
                }
            }
        }
        out
    }

    /// Inverse of [`Self::to_physical`] followed by truncation to `|j′| ≤ J`.
    pub fn from_physical(jmax: usize, kmax: usize, fft: &Fft2, phys: &[Complex64]) -> FrontSpectrum {
        let n = fft.n();
        let kw = 2 * kmax + 1;
        let j = jmax as i64;
        let mut out = FrontSpectrum::zeros(jmax, kmax);
        let columns: Vec<Vec<Complex64>> = (0..kw)
            .into_par_iter()
            .map(|kc| {
                let mut grid: Vec<Complex64> = (0..n * n).map(|node| phys[node * kw + kc]).collect();
                if grid.iter().all(|v| *v == ZERO) {
                    return grid;
                }
                fft.forward(&mut grid);
                grid
            })
            .collect();
        let norm = 1.0 / (n * n) as f64;
        for (kc, grid) in columns.iter().enumerate() {
            for j1 in -j..=j {
                for j2 in -j..=j {
                    let i = out.index(j1, j2, kc as i64 - kmax as i64);
                    out.coeffs[i] = grid[wrap(j1, n) * n + wrap(j2, n)] * norm;
                }
            }
        }
        out
    }
}

/// `√(Σ (1+|j′|²+k²)^s |φ̂|²)`.
pub fn hs_norm(spec: &FrontSpectrum, s: f64) -> f64 {
    spec.modes()
        .map(|(j1, j2, k, i)| ((1 + j1 * j1 + j2 * j2 + k * k) as f64).powf(s) * spec.coeffs[i].norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `T = 1/(K_const ‖φ0‖_{H⁴})`; infinite for zero data.
pub fn existence_time_estimate(phi0: &FrontSpectrum, k_const: f64) -> f64 {
    let n = hs_norm(phi0, 4.0);
    if n == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (k_const * n)
    }
}

/// Padded physical grid size for a given `J`.
pub fn physical_grid_size(jmax: usize) -> usize {
    3 * jmax + 1
}

/// Right-hand sides of the front equation and its linearisation at fixed truncation.
#[derive(Clone)]
pub struct AmplitudeOperator {
    jmax: usize,
    kmax: usize,
    fft: Fft2,
    plan: KernelPlan,
    transport_t: f64,
    transport_y: [f64; 2],
    nl_coeff: f64,
}

impl AmplitudeOperator {
    pub fn new(coeffs: &DerivedCoefficients, jmax: usize, kmax: usize, acceleration: Acceleration) -> Result<Self> {
        if coeffs.transport_t == 0.0 || !coeffs.transport_t.is_finite() {
            return invalid(format!("transport_t = c+ + d0 = {} must be nonzero", coeffs.transport_t));
        }
        let spec = KernelSpec::new(kmax, acceleration)?;
        Ok(Self {
            jmax,
            kmax,
            fft: Fft2::new(physical_grid_size(jmax)),
            plan: KernelPlan::new(spec),
            transport_t: coeffs.transport_t,
            transport_y: coeffs.transport_y,
            nl_coeff: coeffs.nl_coeff,
        })
    }

    /// Replaces the nonlinear coefficient (zero gives pure transport).
    pub fn with_nl_coeff(mut self, nl: f64) -> Self {
        self.nl_coeff = nl;
        self
    }

    pub fn nl_coeff(&self) -> f64 {
        self.nl_coeff
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.transport_y[0] / self.transport_t, self.transport_y[1] / self.transport_t]
    }

    fn check(&self, s: &FrontSpectrum) {
        assert_eq!((s.jmax, s.kmax), (self.jmax, self.kmax), "spectrum truncation does not match the operator");
    }

    /// `Q̂(j′,k)`: the kernel sum of `a` and `b` applied node by node in physical `y′`.
    pub fn bilinear_term(&self, a: &FrontSpectrum, b: &FrontSpectrum) -> FrontSpectrum {
        self.check(a);
        self.check(b);
        let kw = 2 * self.kmax + 1;
        let pa = a.to_physical(&self.fft);
        let pb = if std::ptr::eq(a, b) { pa.clone() } else { b.to_physical(&self.fft) };
        let mut q = vec![ZERO; pa.len()];
        q.par_chunks_mut(kw).zip(pa.par_chunks(kw).zip(pb.par_chunks(kw))).for_each(|(out, (x, y))| {
            if x.iter().any(|v| *v != ZERO) && y.iter().any(|v| *v != ZERO) {
                self.plan.bilinear(x, y, out);
            }
        });
        FrontSpectrum::from_physical(self.jmax, self.kmax, &self.fft, &q)
    }

    fn assemble(&self, lin: &FrontSpectrum, quad: Option<(&FrontSpectrum, f64)>, forcing: Option<&FrontSpectrum>) -> FrontSpectrum {
        let mut out = FrontSpectrum::zeros(self.jmax, self.kmax);
        out.time = lin.time;
        let i = Complex64::i();
        for (j1, j2, k, idx) in lin.modes() {
            if k == 0 {
                continue;
            }
            let phase = self.transport_y[0] * j1 as f64 + self.transport_y[1] * j2 as f64;
            let mut acc = -(i * phase * lin.coeffs[idx]);
            if let Some((q, factor)) = quad {
                acc -= i * (factor * self.nl_coeff * k.signum() as f64) * q.coeffs[idx];
            }
            if let Some(g) = forcing {
                acc += g.coeffs[idx];
            }
            out.coeffs[idx] = acc / self.transport_t;
        }
        out
    }

    /// `∂tφ̂ = −[i(transport_y·j′)φ̂ + i·nl·sgn(k)·Q̂]/transport_t`, zero on `k = 0`.
    pub fn rhs(&self, phi: &FrontSpectrum) -> FrontSpectrum {
        self.check(phi);
        if self.nl_coeff == 0.0 {
            return self.assemble(phi, None, None);
        }
        let q = self.bilinear_term(phi, phi);
        self.assemble(phi, Some((&q, 1.0)), None)
    }

    /// Linearised equation about `background` with forcing:
    /// `∂tψ̂ = [ĝ − i(transport_y·j′)ψ̂ − 2i·nl·sgn(k)·Σ(…)φ̂(k1)ψ̂(k2)]/transport_t`.
    pub fn linearized_rhs(&self, background: &FrontSpectrum, correction: &FrontSpectrum, forcing: &FrontSpectrum) -> FrontSpectrum {
        self.check(background);
        self.check(correction);
        self.check(forcing);
        if self.nl_coeff == 0.0 {
            return self.assemble(correction, None, Some(forcing));
        }
        let q = self.bilinear_term(background, correction);
        self.assemble(correction, Some((&q, 2.0)), Some(forcing))
    }

    /// One classical RK4 step; stage derivatives are masked with `cut`.
    pub fn rk4_step(&self, phi: &FrontSpectrum, dt: f64, cut: Option<usize>) -> FrontSpectrum {
        let stage = |s: &FrontSpectrum| {
            let mut d = self.rhs(s);
            d.mask(cut);
            d
        };
        let k1 = stage(phi);
        let mut tmp = phi.clone();
        tmp.axpy(0.5 * dt, &k1);
        let k2 = stage(&tmp);
        let mut tmp = phi.clone();
        tmp.axpy(0.5 * dt, &k2);
        let k3 = stage(&tmp);
        let mut tmp = phi.clone();
        tmp.axpy(dt, &k3);
        let k4 = stage(&tmp);
        let mut out = phi.clone();
        out.axpy(dt / 6.0, &k1);
        out.axpy(dt / 3.0, &k2);
        out.axpy(dt / 3.0, &k3);
        out.axpy(dt / 6.0, &k4);
        out.time = phi.time + dt;
        out
    }
}

/// Free-function form of [`AmplitudeOperator::rhs`] with direct kernel sums.
pub fn rhs(spec: &FrontSpectrum, coeffs: &DerivedCoefficients) -> Result<FrontSpectrum> {
    Ok(AmplitudeOperator::new(coeffs, spec.jmax, spec.kmax, Acceleration::Direct)?.rhs(spec))
}

/// Free-function form of [`AmplitudeOperator::linearized_rhs`].
pub fn linearized_rhs(
    background: &FrontSpectrum,
    correction: &FrontSpectrum,
    forcing: &FrontSpectrum,
    coeffs: &DerivedCoefficients,
) -> Result<FrontSpectrum> {
    let op = AmplitudeOperator::new(coeffs, background.jmax, background.kmax, Acceleration::Direct)?;
    Ok(op.linearized_rhs(background, correction, forcing))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub blowup_h4_factor: f64,
    #[serde(rename = "K_const")]
    pub k_const: f64,
    /// Store a snapshot every this many steps (the final state is always stored).
    pub snapshot_every: usize,
    pub acceleration: Acceleration,
}

impl SolverConfig {
    /// Defaults: `dt = min(1e-3, 0.1/(K·max|v|))`, `t_end = 0.5·T`, dealiasing on.
    pub fn defaults(coeffs: &DerivedCoefficients, phi0: &FrontSpectrum) -> Self {
        let k_const = 1.0;
        let t = existence_time_estimate(phi0, k_const);
        Self {
            dt: default_dt(coeffs, phi0.kmax),
            t_end: if t.is_finite() { 0.5 * t } else { 1.0 },
            dealias: true,
            blowup_h4_factor: 10.0,
            k_const,
            snapshot_every: 1,
            acceleration: Acceleration::Direct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.blowup_h4_factor > 1.0) {
            return invalid("blowup_h4_factor must exceed 1");
        }
        if !(self.k_const > 0.0) {
            return invalid("K_const must be positive");
        }
        if self.snapshot_every == 0 {
            return invalid("snapshot_every must be at least 1");
        }
        Ok(())
    }

    /// 2/3-rule cutoff for truncation `kmax`, if dealiasing is enabled.
    pub fn cut(&self, kmax: usize) -> Option<usize> {
        self.dealias.then_some(2 * kmax / 3)
    }
}

/// `min(1e-3, 0.1/(K·max|v|))` with `v = transport_y/transport_t`.
pub fn default_dt(coeffs: &DerivedCoefficients, kmax: usize) -> f64 {
    let v = coeffs.velocity();
    let vmax = v[0].abs().max(v[1].abs());
    if vmax > 0.0 {
        (0.1 / (kmax as f64 * vmax)).min(1e-3)
    } else {
        1e-3
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<FrontSpectrum>,
    pub h4_norms: Vec<f64>,
    pub h4_initial: f64,
    pub dt: f64,
    pub steps: usize,
    pub config: SolverConfig,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &FrontSpectrum {
        self.snapshots.last().expect("trajectories hold at least the initial state")
    }
}

/// Integrates the front equation from `phi0` with classical RK4.
pub fn integrate(phi0: &FrontSpectrum, cfg: &SolverConfig, coeffs: &DerivedCoefficients) -> Result<Trajectory> {
    let op = AmplitudeOperator::new(coeffs, phi0.jmax, phi0.kmax, cfg.acceleration)?;
    integrate_with(&op, phi0, cfg)
}

/// [`integrate`] with a prepared operator.
pub fn integrate_with(op: &AmplitudeOperator, phi0: &FrontSpectrum, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if phi0.zero_mode_defect() != 0.0 {
        return invalid("initial front has a nonzero theta-mean");
    }
    if phi0.reality_defect() > 1e-12 * phi0.sup_norm().max(1.0) {
        return invalid("initial front is not real");
    }
    let cut = cfg.cut(phi0.kmax);
    let mut phi = phi0.clone();
    phi.project(cut);
    let h4_initial = hs_norm(&phi, 4.0);
    let steps = if cfg.t_end == 0.0 { 0 } else { ((cfg.t_end / cfg.dt) - 1e-9).ceil().max(1.0) as usize };
    let dt = if steps == 0 { cfg.dt } else { cfg.t_end / steps as f64 };
    let t0 = phi.time;

    let mut snapshots = vec![phi.clone()];
    let mut h4_norms = vec![h4_initial];
    for n in 1..=steps {
        let mut next = op.rk4_step(&phi, dt, cut);
        next.project(cut);
        next.time = t0 + n as f64 * dt;
        if next.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite coefficients at t = {}", next.time)));
        }
        let h4 = hs_norm(&next, 4.0);
        if h4_initial > 0.0 && h4 > cfg.blowup_h4_factor * h4_initial {
            return Err(Error::Numerical(format!(
                "blow-up: H4 norm {h4:.6e} exceeds {} x initial {h4_initial:.6e} at t = {}",
                cfg.blowup_h4_factor, next.time
            )));
        }
        phi = next;
        if n % cfg.snapshot_every == 0 || n == steps {
            snapshots.push(phi.clone());
            h4_norms.push(h4);
        }
    }
    Ok(Trajectory { snapshots, h4_norms, h4_initial, dt, steps, config: *cfg })
}

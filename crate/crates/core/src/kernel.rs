//! The Hamilton kernel and the quadratic interaction sum of the front equation.
//!
//! Spectral slices are stored over `k ∈ [−K, K]` at index `k + K`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Acceleration {
    #[default]
    Direct,
    /// `1/(|k|+|k1|+|k2|) = ∫₀^∞ e^{−s(|k|+|k1|+|k2|)} ds` discretised by a
    /// trapezoidal rule in `u = ln s`, turning the sum into convolutions.
    ExpIntegral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kmax: usize,
    pub acceleration: Acceleration,
}

impl KernelSpec {
    pub fn new(kmax: usize, acceleration: Acceleration) -> Result<Self> {
        if kmax == 0 {
            return invalid("kmax must be at least 1");
        }
        Ok(Self { kmax, acceleration })
    }
}

fn check_args(k1: i64, k2: i64) -> Result<()> {
    if k1 == 0 || k2 == 0 || k1 + k2 == 0 {
        return invalid(format!("kernel arguments must satisfy k1, k2, k1+k2 != 0 (got {k1}, {k2})"));
    }
    Ok(())
}

/// `Λ(k1,k2) = 2|k1+k2||k1||k2| / (|k1+k2|+|k1|+|k2|)`.
pub fn lambda(k1: i64, k2: i64) -> Result<f64> {
    check_args(k1, k2)?;
    let (a, b, c) = ((k1 + k2).abs() as f64, k1.abs() as f64, k2.abs() as f64);
    Ok(2.0 * a * b * c / (a + b + c))
}

/// The kernel assembled from its sign-split definition
/// `sgn(k)(k1|k2|+k2|k1|)/2 + (1−sgn k1 sgn k2)/2·|k1||k2|
///  − [(sgn k−sgn k1)/2·k1²k2/(|k|+|k1|) + (sgn k−sgn k2)/2·k1k2²/(|k|+|k2|)]`.
pub fn lambda_piecewise(k1: i64, k2: i64) -> Result<f64> {
    check_args(k1, k2)?;
    let k = k1 + k2;
    let (s, s1, s2) = (k.signum() as f64, k1.signum() as f64, k2.signum() as f64);
    let (kf, f1, f2) = (k as f64, k1 as f64, k2 as f64);
    let (ak, a1, a2) = (kf.abs(), f1.abs(), f2.abs());
    let first = s * (f1 * a2 + f2 * a1) / 2.0;
    let second = (1.0 - s1 * s2) / 2.0 * a1 * a2;
    let third = (s - s1) / 2.0 * f1 * f1 * f2 / (ak + a1) + (s - s2) / 2.0 * f1 * f2 * f2 / (ak + a2);
    Ok(first + second - third)
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Reduced fraction with positive denominator.
fn reduce(num: i128, den: i128) -> (i128, i128) {
    let g = gcd(num, den).max(1) * den.signum();
    (num / g, den / g)
}

fn add(a: (i128, i128), b: (i128, i128)) -> (i128, i128) {
    reduce(a.0 * b.1 + b.0 * a.1, a.1 * b.1)
}

/// [`lambda`] as a reduced fraction `(numerator, denominator)`.
pub fn lambda_rational(k1: i64, k2: i64) -> Result<(i128, i128)> {
    check_args(k1, k2)?;
    let (a, b, c) = ((k1 + k2).abs() as i128, k1.abs() as i128, k2.abs() as i128);
    Ok(reduce(2 * a * b * c, a + b + c))
}

/// [`lambda_piecewise`] in exact rational arithmetic.
pub fn lambda_piecewise_rational(k1: i64, k2: i64) -> Result<(i128, i128)> {
    check_args(k1, k2)?;
    let k = (k1 + k2) as i128;
    let (f1, f2) = (k1 as i128, k2 as i128);
    let (s, s1, s2) = (k.signum(), f1.signum(), f2.signum());
    let (ak, a1, a2) = (k.abs(), f1.abs(), f2.abs());
    let first = (s * (f1 * a2 + f2 * a1), 2);
    let second = ((1 - s1 * s2) * a1 * a2, 2);
    let third_a = (-(s - s1) * f1 * f1 * f2, 2 * (ak + a1));
    let third_b = (-(s - s2) * f1 * f2 * f2, 2 * (ak + a2));
    Ok(add(add(reduce(first.0, first.1), reduce(second.0, second.1)), add(reduce(third_a.0, third_a.1), reduce(third_b.0, third_b.1))))
}

/// Summand of the front equation: `|k||k1||k2|/(|k|+|k1|+|k2|) = Λ/2`, zero if any index vanishes.
pub fn summand(k1: i64, k2: i64) -> f64 {
    let (a, b, c) = ((k1 + k2).abs() as f64, k1.abs() as f64, k2.abs() as f64);
    if a == 0.0 || b == 0.0 || c == 0.0 {
        0.0
    } else {
        a * b * c / (a + b + c)
    }
}

/// Reusable tables and FFT plans for repeated sums at a fixed truncation.
#[derive(Clone)]
pub struct KernelPlan {
    spec: KernelSpec,
    weights: Vec<f64>,
    exp: Option<ExpPlan>,
}

#[derive(Clone)]
struct ExpPlan {
    s: Vec<f64>,
    w: Vec<f64>,
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Step of the trapezoidal rule in `ln s`.
const EXP_STEP: f64 = 0.25;

/// Nodes `s_n` and weights `w_n` with `Σ w_n e^{−s_n S} ≈ 1/S` for `2 ≤ S ≤ 3K`.
pub fn exp_sum_nodes(kmax: usize) -> (Vec<f64>, Vec<f64>) {
    let smax = 3.0 * kmax.max(1) as f64;
    let u_lo = (1e-16 / smax).ln();
    let u_hi = 20f64.ln();
    let count = ((u_hi - u_lo) / EXP_STEP).ceil() as usize + 1;
    let s: Vec<f64> = (0..count).map(|i| (u_lo + EXP_STEP * i as f64).exp()).collect();
    let w = s.iter().map(|s| EXP_STEP * s).collect();
    (s, w)
}

impl KernelPlan {
    pub fn new(spec: KernelSpec) -> Self {
        let k = spec.kmax as i64;
        let width = 2 * spec.kmax + 1;
        let mut weights = vec![0.0; width * width];
        for kk in -k..=k {
            for k1 in -k..=k {
                weights[(kk + k) as usize * width + (k1 + k) as usize] = summand(k1, kk - k1);
            }
        }
        let exp = (spec.acceleration == Acceleration::ExpIntegral).then(|| {
            let (s, w) = exp_sum_nodes(spec.kmax);
            let n = (4 * spec.kmax + 2).next_power_of_two();
            let mut planner = FftPlanner::new();
            ExpPlan { s, w, n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
        });
        Self { spec, weights, exp }
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    /// Number of quadrature nodes of the exponential-integral mode (0 in direct mode).
    pub fn node_count(&self) -> usize {
        self.exp.as_ref().map_or(0, |e| e.s.len())
    }

    /// `Σ_{k1+k2=k} |k||k1||k2|/(|k|+|k1|+|k2|) a(k1) b(k2)` for every `k ∈ [−K, K]`.
    pub fn bilinear(&self, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
        let width = 2 * self.spec.kmax + 1;
        assert_eq!(a.len(), width);
        assert_eq!(b.len(), width);
        assert_eq!(out.len(), width);
        match &self.exp {
            None => self.direct(a, b, out),
            Some(plan) => exp_integral(plan, self.spec.kmax, a, b, out),
        }
    }

    fn direct(&self, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
        let k = self.spec.kmax as i64;
        let width = 2 * self.spec.kmax + 1;
        for kk in -k..=k {
            let row = &self.weights[(kk + k) as usize * width..][..width];
            let lo = (kk - k).max(-k);
            let hi = (kk + k).min(k);
            let mut acc = Complex64::new(0.0, 0.0);
            for k1 in lo..=hi {
                let w = row[(k1 + k) as usize];
                if w != 0.0 {
                    acc += w * a[(k1 + k) as usize] * b[(kk - k1 + k) as usize];
                }
            }
            out[(kk + k) as usize] = acc;
        }
    }
}

fn exp_integral(plan: &ExpPlan, kmax: usize, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
    let k = kmax as i64;
    let n = plan.n;
    let zero = Complex64::new(0.0, 0.0);
    out.iter_mut().for_each(|o| *o = zero);
    let mut ga = vec![zero; n];
    let mut gb = vec![zero; n];
    let mut scratch = vec![zero; plan.fwd.get_inplace_scratch_len().max(plan.inv.get_inplace_scratch_len())];
    let wrap = |k1: i64| k1.rem_euclid(n as i64) as usize;
    for (&s, &w) in plan.s.iter().zip(&plan.w) {
        ga.iter_mut().for_each(|g| *g = zero);
        gb.iter_mut().for_each(|g| *g = zero);
        for k1 in -k..=k {
            let f = k1.abs() as f64 * (-s * k1.abs() as f64).exp();
            ga[wrap(k1)] = f * a[(k1 + k) as usize];
            gb[wrap(k1)] = f * b[(k1 + k) as usize];
        }
        plan.fwd.process_with_scratch(&mut ga, &mut scratch);
        plan.fwd.process_with_scratch(&mut gb, &mut scratch);
        for (x, y) in ga.iter_mut().zip(&gb) {
            *x *= y;
        }
        plan.inv.process_with_scratch(&mut ga, &mut scratch);
        for kk in -k..=k {
            let ak = kk.abs() as f64;
            out[(kk + k) as usize] += (w * ak * (-s * ak).exp() / n as f64) * ga[wrap(kk)];
        }
    }
}

/// Quadratic sum over the whole slice (see [`KernelPlan::bilinear`]).
pub fn quadratic_sum(spec: KernelSpec, phi: &[Complex64]) -> Vec<Complex64> {
    let plan = KernelPlan::new(spec);
    let mut out = vec![Complex64::new(0.0, 0.0); phi.len()];
    plan.bilinear(phi, phi, &mut out);
    out
}

/// Quadratic sum at a single nonzero `k`, evaluated directly.
pub fn quadratic_sum_at(spec: KernelSpec, phi: &[Complex64], k: i64) -> Result<Complex64> {
    let kmax = spec.kmax as i64;
    if k == 0 || k.abs() > kmax {
        return invalid(format!("k = {k} must be nonzero with |k| <= {kmax}"));
    }
    if phi.len() != 2 * spec.kmax + 1 {
        return invalid("slice length must be 2K+1");
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for k1 in (k - kmax).max(-kmax)..=(k + kmax).min(kmax) {
        acc += summand(k1, k - k1) * phi[(k1 + kmax) as usize] * phi[(k - k1 + kmax) as usize];
    }
    Ok(acc)
}

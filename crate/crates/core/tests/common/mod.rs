//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfwave::params::{check_stability_h1star, derive_coefficients, DerivedCoefficients, FrequencyTriple, ReferenceState};
use surfwave::dispersion::find_real_roots;

pub type C = Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `u0 = (0.3,0,0)`, `B0 = (1,0,0)`, `H0 = (0,1,0)`, `E3_0 = 0.5`, `nu = 0.01`.
pub fn worked_state() -> ReferenceState {
    ReferenceState::new([0.3, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 0.5, 0.01).unwrap()
}

/// Worked state at the upper root for the direction `(p, q)` and scale `l`.
pub fn worked_coefficients(p: i64, q: i64, l: u32) -> (ReferenceState, FrequencyTriple, DerivedCoefficients) {
    let state = worked_state();
    let freq = FrequencyTriple::new(p, q, l, 0.0).unwrap();
    let roots = find_real_roots(&state, freq.xi()).unwrap();
    let freq = freq.with_tau(roots.roots[1]);
    let coeffs = derive_coefficients(&state, &freq).unwrap();
    (state, freq, coeffs)
}

pub fn normal2(r: &mut ChaCha8Rng) -> [f64; 2] {
    [r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5)]
}

/// Random tangential state satisfying the stability condition with a margin.
pub fn random_stable_state(r: &mut ChaCha8Rng, nu: f64) -> ReferenceState {
    loop {
        let (u, b, h) = (normal2(r), normal2(r), normal2(r));
        let probe = ReferenceState::tangential(u, b, h, 0.0, nu).unwrap();
        let min = check_stability_h1star(&probe).min_value;
        if min < 0.05 {
            continue;
        }
        let e3 = r.gen_range(-0.9..0.9) * min.sqrt();
        return ReferenceState::tangential(u, b, h, e3, nu).unwrap();
    }
}

/// Random unit direction.
pub fn random_xi(r: &mut ChaCha8Rng) -> [f64; 2] {
    let a: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    [a.cos(), a.sin()]
}

/// Coefficients of a random stable state at one of its roots along a random direction.
pub fn random_coefficients(r: &mut ChaCha8Rng, nu: f64) -> (ReferenceState, DerivedCoefficients) {
    let state = random_stable_state(r, nu);
    let xi = random_xi(r);
    let roots = find_real_roots(&state, xi).unwrap();
    let tau = roots.roots[r.gen_range(0..2)];
    (state, surfwave::params::coefficients_for_direction(&state, xi, tau).unwrap())
}

/// Maxwell matrices `A⁻_α`, `α = 0..3`, written out entry by entry.
pub fn maxwell_matrices(nu: f64) -> [[[f64; 6]; 6]; 4] {
    let mut m = [[[0.0; 6]; 6]; 4];
    for i in 0..6 {
        m[0][i][i] = nu;
    }
    let blocks: [[[f64; 3]; 3]; 3] = [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ];
    for a in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                m[a + 1][i][3 + j] = blocks[a][i][j];
                m[a + 1][3 + i][j] = -blocks[a][i][j];
            }
        }
    }
    m
}

/// Vacuum eigenvectors `R⁻₁`, `R⁻₂` and the adjoint vector `L⁻` for `sgn k = s`.
pub fn vacuum_vectors(c: &DerivedCoefficients, s: f64) -> ([C; 6], [C; 6], [C; 6]) {
    let i = C::i();
    let (nu, tau) = (c.nu, c.tau);
    let nt = nu * tau;
    let r = (1.0 - nt * nt).sqrt();
    let [x1, x2] = c.xi;
    let (a1, a2, bm) = (c.a_minus_1, c.a_minus_2, c.b_minus);
    let re = |x: f64| C::new(x, 0.0);
    let r1 = [re(r * nt), re(0.0), -i * s * nt * x1, -i * s * x1 * x2, i * s * (nt * nt - x2 * x2), re(-r * x2)];
    let r2 = [re(0.0), re(r * nt), -i * s * nt * x2, -i * s * (nt * nt - x1 * x1), i * s * x1 * x2, re(r * x1)];
    let rm = [
        re((nt * a1 - x1 * bm) / r),
        re((nt * a2 - x2 * bm) / r),
        i * s * bm,
        i * s * a2,
        -i * s * a1,
        re((x1 * a2 - x2 * a1) / r),
    ];
    let l = rm.map(|v| -v / nu);
    (r1, r2, l)
}

/// `conj(x)·M·y`.
pub fn form6(x: &[C; 6], m: &[[f64; 6]; 6], y: &[C; 6]) -> C {
    let mut acc = C::new(0.0, 0.0);
    for a in 0..6 {
        for b in 0..6 {
            acc += x[a].conj() * m[a][b] * y[b];
        }
    }
    acc
}

/// `(d0, d1, d2)` assembled from the vacuum vectors and the boundary source terms,
/// with the magnitude of the largest cancelling term.
pub fn d_coefficients_vector_route(c: &DerivedCoefficients, state: &ReferenceState) -> ([f64; 3], f64) {
    let (nu, tau) = (c.nu, c.tau);
    let nt = nu * tau;
    let s = 1.0 - nt * nt;
    let rt = s.sqrt();
    let [x1, x2] = c.xi;
    let (a1, a2, bm) = (c.a_minus_1, c.a_minus_2, c.b_minus);
    let [i1, i2] = [(nt * a1 - x1 * bm) / (nt * s), (nt * a2 - x2 * bm) / (nt * s)];
    let [h1, h2] = state.h();
    let e3 = state.e3;
    let m = maxwell_matrices(nu);
    let (r1, r2, l) = vacuum_vectors(c, 1.0);
    let f4: Vec<f64> = (0..3)
        .map(|a| (i1 / (2.0 * rt) * form6(&l, &m[a], &r1) + i2 / (2.0 * rt) * form6(&l, &m[a], &r2)).re)
        .collect();
    let cross = -x2 * i1 + x1 * i2;
    let f3 = [
        ((-nt * a1 + x1 * bm) * h1 + (-nt * a2 + x2 * bm) * h2) / rt - rt * cross * e3,
        -(-nt * a2 + x2 * bm) / (nu * rt) * e3 + tau * rt * i2 * e3,
        (-nt * a1 + x1 * bm) / (nu * rt) * e3 - tau * rt * i1 * e3,
    ];
    let magnitude = |x: &[C; 6], m: &[[f64; 6]; 6], y: &[C; 6]| {
        (0..6).flat_map(|a| (0..6).map(move |b| (a, b))).map(|(a, b)| x[a].norm() * m[a][b].abs() * y[b].norm()).sum::<f64>()
    };
    let inner = (0..3)
        .map(|a| (i1.abs() * magnitude(&l, &m[a], &r1) + i2.abs() * magnitude(&l, &m[a], &r2)) / (2.0 * rt))
        .fold(0.0f64, f64::max);
    let scale = f3.iter().fold(inner, |acc, v| acc.max(v.abs())) / (2.0 * tau.abs());
    ([0, 1, 2].map(|a| -(f3[a] + f4[a]) / (2.0 * tau)), scale)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

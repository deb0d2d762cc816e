mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use surfwave::kernel::*;

fn slice(kmax: usize, f: impl Fn(i64) -> Complex64) -> Vec<Complex64> {
    (-(kmax as i64)..=kmax as i64).map(|k| if k == 0 { Complex64::new(0.0, 0.0) } else { f(k) }).collect()
}

/// Random real-compatible slice with algebraic decay.
fn random_slice(seed: u64, kmax: usize) -> Vec<Complex64> {
    let mut r = rng(seed);
    let half: Vec<Complex64> = (1..=kmax)
        .map(|k| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) / (1.0 + k as f64).powi(2))
        .collect();
    slice(kmax, |k| if k > 0 { half[k as usize - 1] } else { half[(-k) as usize - 1].conj() })
}

/// Textbook double loop over `k1 + k2 = k`.
fn oracle_sum(phi: &[Complex64], kmax: i64, k: i64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            if k1 + k2 == k && k1 != 0 && k2 != 0 {
                let (a, b, c) = (k.abs() as f64, k1.abs() as f64, k2.abs() as f64);
                acc += a * b * c / (a + b + c) * phi[(k1 + kmax) as usize] * phi[(k2 + kmax) as usize];
            }
        }
    }
    acc
}

#[test]
fn kernel_values_by_hand() {
    assert_eq!(lambda(1, 1).unwrap(), 1.0);
    assert_eq!(lambda(2, -1).unwrap(), 1.0);
    assert_eq!(lambda(3, 2).unwrap(), 6.0);
    assert_eq!(lambda_piecewise(2, -1).unwrap(), 1.0);
    assert_eq!(lambda_piecewise(3, 2).unwrap(), 6.0);
    assert_eq!(lambda_rational(1, 1).unwrap(), (1, 1));
    assert_eq!(summand(1, 1), 0.5);
    assert_eq!(summand(0, 3), 0.0);
    assert!(lambda(0, 1).is_err() && lambda(1, -1).is_err() && lambda_piecewise(2, 0).is_err());
}

#[test]
fn kernel_identities_are_exact() {
    for k1 in -200i64..=200 {
        for k2 in -200i64..=200 {
            if k1 == 0 || k2 == 0 || k1 + k2 == 0 {
                continue;
            }
            let exact = lambda_rational(k1, k2).unwrap();
            assert_eq!(exact, lambda_rational(k2, k1).unwrap());
            assert_eq!(exact, lambda_rational(-k1, -k2).unwrap());
            assert_eq!(exact, lambda_piecewise_rational(k1, k2).unwrap());
            assert_eq!(lambda(k1, k2).unwrap(), lambda(k2, k1).unwrap());
            assert_eq!(lambda(k1, k2).unwrap(), lambda(-k1, -k2).unwrap());
            let v = exact.0 as f64 / exact.1 as f64;
            assert!((lambda(k1, k2).unwrap() - v).abs() <= 1e-14 * v);
            assert!((lambda_piecewise(k1, k2).unwrap() - v).abs() <= 1e-13 * v);
        }
    }
}

#[test]
fn kernel_is_quadratically_homogeneous() {
    for k1 in -40i64..=40 {
        for k2 in -40i64..=40 {
            if k1 == 0 || k2 == 0 || k1 + k2 == 0 {
                continue;
            }
            let (n, d) = lambda_rational(k1, k2).unwrap();
            for a in 1i64..=5 {
                let (n2, d2) = lambda_rational(a * k1, a * k2).unwrap();
                assert_eq!(n2 * d, (a * a) as i128 * n * d2);
                let v = lambda(a * k1, a * k2).unwrap();
                let w = (a * a) as f64 * lambda(k1, k2).unwrap();
                assert!((v - w).abs() <= 1e-14 * w);
            }
        }
    }
}

#[test]
fn single_pair_sums() {
    let spec = KernelSpec::new(4, Acceleration::Direct).unwrap();
    let one = slice(4, |k| if k.abs() == 1 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    assert_eq!(quadratic_sum_at(spec, &one, 2).unwrap(), Complex64::new(0.5, 0.0));
    assert_eq!(quadratic_sum(spec, &one)[4 + 2], Complex64::new(0.5, 0.0));
    let imag = slice(4, |k| match k {
        1 => Complex64::new(0.0, 1.0),
        -1 => Complex64::new(0.0, -1.0),
        _ => Complex64::new(0.0, 0.0),
    });
    assert_eq!(quadratic_sum_at(spec, &imag, 2).unwrap(), Complex64::new(-0.5, 0.0));
    let zero = slice(4, |_| Complex64::new(0.0, 0.0));
    assert!(quadratic_sum(spec, &zero).iter().all(|v| v.norm() == 0.0));
    assert!(quadratic_sum_at(spec, &one, 0).is_err());
    assert!(quadratic_sum_at(spec, &one, 5).is_err());
    assert!(KernelSpec::new(0, Acceleration::Direct).is_err());
}

#[test]
fn direct_sum_matches_the_double_loop() {
    let kmax = 24;
    let phi = random_slice(1, kmax);
    let spec = KernelSpec::new(kmax, Acceleration::Direct).unwrap();
    let all = quadratic_sum(spec, &phi);
    for k in -(kmax as i64)..=kmax as i64 {
        let o = oracle_sum(&phi, kmax as i64, k);
        assert!((all[(k + kmax as i64) as usize] - o).norm() < 1e-14 * (1.0 + o.norm()));
        if k != 0 {
            assert!((quadratic_sum_at(spec, &phi, k).unwrap() - o).norm() < 1e-14 * (1.0 + o.norm()));
        }
    }
}

#[test]
fn exponential_integral_matches_direct_at_high_truncation() {
    for kmax in [16usize, 64, 256] {
        let phi = random_slice(kmax as u64, kmax);
        let direct = quadratic_sum(KernelSpec::new(kmax, Acceleration::Direct).unwrap(), &phi);
        let plan = KernelPlan::new(KernelSpec::new(kmax, Acceleration::ExpIntegral).unwrap());
        assert!(plan.node_count() >= 64);
        let mut fast = vec![Complex64::new(0.0, 0.0); phi.len()];
        plan.bilinear(&phi, &phi, &mut fast);
        let peak = direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = direct.iter().zip(&fast).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * peak, "K = {kmax}: {err:e} vs peak {peak:e}");
    }
}

#[test]
fn exponential_nodes_reproduce_the_reciprocal() {
    let kmax = 256;
    let (s, w) = exp_sum_nodes(kmax);
    for big_s in 2..=3 * kmax {
        let x = big_s as f64;
        let approx: f64 = s.iter().zip(&w).map(|(s, w)| w * (-s * x).exp()).sum();
        assert!((approx * x - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bilinear_form_is_symmetric() {
    let kmax = 20;
    let (a, b) = (random_slice(7, kmax), random_slice(8, kmax));
    for acc in [Acceleration::Direct, Acceleration::ExpIntegral] {
        let plan = KernelPlan::new(KernelSpec::new(kmax, acc).unwrap());
        let (mut ab, mut ba) = (vec![Complex64::new(0.0, 0.0); a.len()], vec![Complex64::new(0.0, 0.0); a.len()]);
        plan.bilinear(&a, &b, &mut ab);
        plan.bilinear(&b, &a, &mut ba);
        for (x, y) in ab.iter().zip(&ba) {
            assert!((x - y).norm() < 1e-13 * (1.0 + x.norm()));
        }
    }
}

proptest! {
    #[test]
    fn real_input_gives_conjugate_symmetric_output(seed in 0u64..1000, kmax in 1usize..40) {
        let phi = random_slice(seed, kmax);
        let out = quadratic_sum(KernelSpec::new(kmax, Acceleration::Direct).unwrap(), &phi);
        let k = kmax as i64;
        for kk in 1..=k {
            let (p, m) = (out[(kk + k) as usize], out[(k - kk) as usize]);
            prop_assert!((p - m.conj()).norm() <= 1e-14 * (1.0 + p.norm()));
        }
    }

    #[test]
    fn kernel_closed_and_piecewise_forms_agree(k1 in -100_000i64..100_000, k2 in -100_000i64..100_000) {
        prop_assume!(k1 != 0 && k2 != 0 && k1 + k2 != 0);
        prop_assert_eq!(lambda_rational(k1, k2).unwrap(), lambda_piecewise_rational(k1, k2).unwrap());
    }
}

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use pimfft_core::fft::{
    butterfly, classify_twiddle, dft_naive, dft_naive_f64, fft, four_step, ifft, relative_error, twiddle,
    twiddle_census, FftError, FftProblem, TwiddleClass,
};
use proptest::prelude::*;

/// Textbook DFT written out independently of the crate.
fn oracle(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, v)| {
                    let a = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                    v * Complex64::new(a.cos(), a.sin())
                })
                .sum()
        })
        .collect()
}

fn widen(x: &[Complex32]) -> Vec<Complex64> {
    x.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect()
}

fn rel64(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    num / den.max(f64::MIN_POSITIVE)
}

fn signal(max_log: u32) -> impl Strategy<Value = Vec<Complex32>> {
    (1..=max_log).prop_flat_map(|l| {
        prop::collection::vec((-1.0f32..1.0, -1.0f32..1.0).prop_map(|(r, i)| Complex32::new(r, i)), 1 << l)
    })
}

#[test]
fn radix2_matches_independent_dft() {
    for l in 1..=12 {
        let p = FftProblem::random(1 << l, 1, l as u64).unwrap();
        let x = p.transform(0);
        let got = widen(&fft(x).unwrap());
        assert!(rel64(&got, &oracle(&widen(x))) < 1e-6, "size 2^{l}");
    }
}

#[test]
fn naive_dft_matches_independent_dft() {
    for l in 1..=9 {
        let p = FftProblem::random(1 << l, 1, 7).unwrap();
        let x = widen(p.transform(0));
        assert!(rel64(&dft_naive_f64(&x), &oracle(&x)) < 1e-12);
        assert!(rel64(&widen(&dft_naive(p.transform(0))), &oracle(&x)) < 1e-6);
    }
}

#[test]
fn impulse_and_constant() {
    let mut x = vec![Complex32::new(0.0, 0.0); 16];
    x[0] = Complex32::new(1.0, 0.0);
    assert!(fft(&x).unwrap().iter().all(|v| *v == Complex32::new(1.0, 0.0)));
    let ones = vec![Complex32::new(1.0, 0.0); 16];
    let y = fft(&ones).unwrap();
    assert_eq!(y[0], Complex32::new(16.0, 0.0));
    assert!(y[1..].iter().all(|v| v.norm() < 1e-6));
}

#[test]
fn butterfly_spec_example() {
    let (y1, y2) = butterfly(Complex32::new(1.0, 2.0), Complex32::new(3.0, 4.0), twiddle(4, 1).unwrap());
    assert_eq!((y1, y2), (Complex32::new(5.0, -1.0), Complex32::new(-3.0, 5.0)));
}

#[test]
fn errors() {
    assert_eq!(fft(&[Complex32::new(0.0, 0.0); 12]), Err(FftError::NotPowerOfTwo(12)));
    assert!(twiddle(8, 8).is_err());
    assert!(twiddle(12, 1).is_err());
    assert!(four_step(&[Complex32::new(0.0, 0.0); 16], 2, 4).is_err());
    assert!(FftProblem::new(8, 2, vec![Complex32::new(0.0, 0.0); 15]).is_err());
    assert!(FftProblem::zeros(8, 0).is_err());
}

#[test]
fn random_problem_is_seeded() {
    assert_eq!(FftProblem::random(64, 4, 0xF47).unwrap(), FftProblem::random(64, 4, 0xF47).unwrap());
    assert_ne!(FftProblem::random(64, 4, 1).unwrap(), FftProblem::random(64, 4, 2).unwrap());
}

/// Census by classifying every butterfly's twiddle value numerically.
fn brute_census(n: usize) -> [u64; 4] {
    let mut c = [0u64; 4];
    let mut m = 2;
    while m <= n {
        for _group in 0..n / m {
            for k in 0..m / 2 {
                let class = TwiddleClass::of(twiddle(m, k).unwrap());
                c[TwiddleClass::ALL.iter().position(|x| *x == class).unwrap()] += 1;
            }
        }
        m *= 2;
    }
    c
}

#[test]
fn census_brute_force() {
    for l in 1..=12 {
        let n = 1usize << l;
        let c = twiddle_census(n).unwrap();
        assert_eq!([c.one, c.minus_j, c.sqrt_half, c.generic], brute_census(n), "size {n}");
    }
}

#[test]
fn census_n32() {
    let c = twiddle_census(32).unwrap();
    assert_eq!(c.one + c.minus_j, 46);
    assert_eq!(c.sqrt_half, 14);
    assert_eq!(c.generic, 20);
    assert_eq!(c.total(), 80);
}

#[test]
fn census_closed_forms() {
    for l in 2..=20u32 {
        let n = 1u64 << l;
        let c = twiddle_census(n as usize).unwrap();
        assert_eq!(c.total(), n / 2 * l as u64);
        assert_eq!(c.one, n - 1);
        assert_eq!(c.minus_j, n / 2 - 1);
        assert_eq!(c.sqrt_half, if l >= 3 { n / 2 - 2 } else { 0 });
    }
}

#[test]
fn classify_matches_values() {
    for step in 1..=8u32 {
        let m = 1usize << step;
        for k in 0..m / 2 {
            assert_eq!(classify_twiddle(256, step, k).unwrap(), TwiddleClass::of(twiddle(m, k).unwrap()));
        }
    }
    assert!(classify_twiddle(8, 4, 0).is_err());
    assert!(classify_twiddle(8, 2, 2).is_err());
}

proptest! {
    #[test]
    fn linearity(x in signal(10), seed in any::<u64>(), a in -2.0f64..2.0) {
        let n = x.len();
        let y = FftProblem::random(n, 1, seed).unwrap();
        let (xw, yw) = (widen(&x), widen(y.transform(0)));
        let mix: Vec<Complex64> = xw.iter().zip(&yw).map(|(p, q)| p * a + q).collect();
        let lhs = dft_naive_f64(&mix);
        let rhs: Vec<Complex64> = dft_naive_f64(&xw).iter().zip(dft_naive_f64(&yw)).map(|(p, q)| p * a + q).collect();
        prop_assert!(rel64(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn inverse_round_trip(x in signal(12)) {
        let back = ifft(&fft(&x).unwrap()).unwrap();
        prop_assert!(relative_error(&back, &x) < 1e-5);
    }

    #[test]
    fn parseval(x in signal(12)) {
        let e_time: f64 = widen(&x).iter().map(|v| v.norm_sqr()).sum();
        let e_freq: f64 = widen(&fft(&x).unwrap()).iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((e_freq / x.len() as f64 - e_time).abs() <= 1e-4 * e_time.max(1e-3));
    }

    #[test]
    fn four_step_equals_fft(l in 2u32..=12, split in 1u32..12, seed in any::<u64>()) {
        let split = split.min(l - 1);
        let (m1, m2) = (1usize << split, 1usize << (l - split));
        let p = FftProblem::random(1 << l, 1, seed).unwrap();
        let x = p.transform(0);
        prop_assert!(relative_error(&four_step(x, m1, m2).unwrap(), &fft(x).unwrap()) < 1e-5);
    }
}

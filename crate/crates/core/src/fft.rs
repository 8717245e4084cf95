//! Reference FFT mathematics.
//!
//! Everything here is the oracle side of the simulator: transforms accumulate
//! in `f64` and hand back `f32` samples, which is the lane width the PIM units
//! compute in.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// One complex sample as stored in memory: two 32-bit floats.
pub type ComplexSample = Complex32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FftError {
    #[error("size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("twiddle index {index} is out of range for size {size}")]
    TwiddleIndex { size: usize, index: usize },
    #[error("{m1} x {m2} does not factor size {n}")]
    BadFactorization { n: usize, m1: usize, m2: usize },
    #[error("batch must hold at least one transform")]
    EmptyBatch,
    #[error("expected {expected} samples, got {got}")]
    Length { expected: usize, got: usize },
}

fn check_pow2(n: usize) -> Result<(), FftError> {
    if n.is_power_of_two() {
        Ok(())
    } else {
        Err(FftError::NotPowerOfTwo(n))
    }
}

/// A batch of equally sized transforms stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct FftProblem {
    size: usize,
    batch: usize,
    data: Vec<ComplexSample>,
}

impl FftProblem {
    pub fn new(size: usize, batch: usize, data: Vec<ComplexSample>) -> Result<Self, FftError> {
        check_pow2(size)?;
        if batch == 0 {
            return Err(FftError::EmptyBatch);
        }
        if data.len() != size * batch {
            return Err(FftError::Length { expected: size * batch, got: data.len() });
        }
        Ok(FftProblem { size, batch, data })
    }

    pub fn zeros(size: usize, batch: usize) -> Result<Self, FftError> {
        Self::new(size, batch, vec![ComplexSample::new(0.0, 0.0); size * batch])
    }

    /// Uniform samples in `[-1, 1)` for both components, reproducible from `seed`.
    pub fn random(size: usize, batch: usize, seed: u64) -> Result<Self, FftError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..size * batch)
            .map(|_| ComplexSample::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Self::new(size, batch, data)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn data(&self) -> &[ComplexSample] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [ComplexSample] {
        &mut self.data
    }

    pub fn transform(&self, j: usize) -> &[ComplexSample] {
        &self.data[j * self.size..(j + 1) * self.size]
    }

    pub fn transform_mut(&mut self, j: usize) -> &mut [ComplexSample] {
        &mut self.data[j * self.size..(j + 1) * self.size]
    }

    /// Applies [`fft`] to every transform in the batch.
    pub fn fft_all(&self) -> FftProblem {
        let data = self
            .data
            .chunks(self.size)
            .flat_map(|x| fft(x).expect("size checked at construction"))
            .collect();
        FftProblem { size: self.size, batch: self.batch, data }
    }
}

/// Largest sample-wise distance between `a` and `b`, divided by the largest
/// magnitude in `b`.
pub fn relative_error(a: &[ComplexSample], b: &[ComplexSample]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|z| z.norm() as f64).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let err = a
        .iter()
        .zip(b)
        .map(|(x, y)| (to64(*x) - to64(*y)).norm())
        .fold(0.0, f64::max);
    err / scale
}

pub(crate) fn to64(z: ComplexSample) -> Complex64 {
    Complex64::new(z.re as f64, z.im as f64)
}

pub(crate) fn to32(z: Complex64) -> ComplexSample {
    ComplexSample::new(z.re as f32, z.im as f32)
}

/// `e^(-2*pi*i*k/n)` in double precision, exact on the quarter and eighth points.
pub fn twiddle64(n: usize, k: usize) -> Complex64 {
    let k = k % n;
    if (4 * k).is_multiple_of(n) {
        return match 4 * k / n {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
    }
    if (8 * k).is_multiple_of(n) {
        let c = FRAC_1_SQRT_2;
        return match 8 * k / n {
            1 => Complex64::new(c, -c),
            3 => Complex64::new(-c, -c),
            5 => Complex64::new(-c, c),
            _ => Complex64::new(c, c),
        };
    }
    let theta = -2.0 * PI * k as f64 / n as f64;
    Complex64::new(theta.cos(), theta.sin())
}

/// The twiddle factor `w_n^k` for `0 <= k < n`.
pub fn twiddle(n: usize, k: usize) -> Result<ComplexSample, FftError> {
    check_pow2(n)?;
    if k >= n {
        return Err(FftError::TwiddleIndex { size: n, index: k });
    }
    Ok(to32(twiddle64(n, k)))
}

/// Radix-2 butterfly: `(x1 + w*x2, x1 - w*x2)`.
pub fn butterfly(
    x1: ComplexSample,
    x2: ComplexSample,
    w: ComplexSample,
) -> (ComplexSample, ComplexSample) {
    let t = w * x2;
    (x1 + t, x1 - t)
}

pub(crate) fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

/// In-place iterative radix-2 DIT over double-precision samples.
pub(crate) fn fft64_in_place(x: &mut [Complex64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let bits = n.trailing_zeros();
    for i in 0..n {
        let r = bit_reverse(i, bits);
        if i < r {
            x.swap(i, r);
        }
    }
    let table: Vec<Complex64> = (0..n / 2).map(|k| twiddle64(n, k)).collect();
    let mut m = 2;
    while m <= n {
        let half = m / 2;
        let stride = n / m;
        for base in (0..n).step_by(m) {
            for j in 0..half {
                let t = table[j * stride] * x[base + j + half];
                let u = x[base + j];
                x[base + j] = u + t;
                x[base + j + half] = u - t;
            }
        }
        m *= 2;
    }
}

/// Forward transform of one power-of-two length sequence.
pub fn fft(input: &[ComplexSample]) -> Result<Vec<ComplexSample>, FftError> {
    check_pow2(input.len())?;
    let mut x: Vec<Complex64> = input.iter().map(|z| to64(*z)).collect();
    fft64_in_place(&mut x);
    Ok(x.into_iter().map(to32).collect())
}

/// Inverse transform, scaled by `1/n`.
pub fn ifft(input: &[ComplexSample]) -> Result<Vec<ComplexSample>, FftError> {
    check_pow2(input.len())?;
    let n = input.len() as f64;
    let mut x: Vec<Complex64> = input.iter().map(|z| to64(*z).conj()).collect();
    fft64_in_place(&mut x);
    Ok(x.into_iter().map(|z| to32(z.conj() / n)).collect())
}

/// O(n^2) DFT in double precision. Any length is accepted.
pub fn dft_naive_f64(input: &[Complex64]) -> Vec<Complex64> {
    let n = input.len();
    let roots: Vec<Complex64> = (0..n).map(|k| twiddle64(n, k)).collect();
    (0..n)
        .map(|k| {
            input
                .iter()
                .enumerate()
                .map(|(j, x)| x * roots[(j * k) % n])
                .sum()
        })
        .collect()
}

/// O(n^2) DFT used as the ground-truth oracle.
pub fn dft_naive(input: &[ComplexSample]) -> Vec<ComplexSample> {
    let x: Vec<Complex64> = input.iter().map(|z| to64(*z)).collect();
    dft_naive_f64(&x).into_iter().map(to32).collect()
}

/// Four-step decomposition of a length `m1 * m2` transform.
///
/// Index `n = m2*n1 + n2`. Stage one runs `m2` transforms of size `m1`,
/// the result is scaled by `w_N^(n2*k1)`, stage two runs `m1` transforms of
/// size `m2` and the output lands at `k1 + m1*k2`.
pub fn four_step(
    input: &[ComplexSample],
    m1: usize,
    m2: usize,
) -> Result<Vec<ComplexSample>, FftError> {
    let n = input.len();
    check_pow2(n)?;
    if m1 == 0 || m2 == 0 || m1 * m2 != n || !m1.is_power_of_two() {
        return Err(FftError::BadFactorization { n, m1, m2 });
    }
    let x: Vec<Complex64> = input.iter().map(|z| to64(*z)).collect();
    let stage1 = four_step_stage1(&x, m1, m2);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let mut col = vec![Complex64::new(0.0, 0.0); m2];
    for k1 in 0..m1 {
        col.copy_from_slice(&stage1[k1 * m2..(k1 + 1) * m2]);
        fft64_in_place(&mut col);
        for (k2, v) in col.iter().enumerate() {
            out[k1 + m1 * k2] = *v;
        }
    }
    Ok(out.into_iter().map(to32).collect())
}

/// Stage one of [`four_step`] including the inter-stage twiddles.
///
/// Returns `m1` rows of `m2` samples; row `k1` is the input of the stage-two
/// transform that produces outputs `k1 + m1*k2`.
pub(crate) fn four_step_stage1(x: &[Complex64], m1: usize, m2: usize) -> Vec<Complex64> {
    let n = m1 * m2;
    let mut rows = vec![Complex64::new(0.0, 0.0); n];
    let mut col = vec![Complex64::new(0.0, 0.0); m1];
    for n2 in 0..m2 {
        for (n1, c) in col.iter_mut().enumerate() {
            *c = x[m2 * n1 + n2];
        }
        fft64_in_place(&mut col);
        for (k1, v) in col.iter().enumerate() {
            rows[k1 * m2 + n2] = v * twiddle64(n, (n2 * k1) % n);
        }
    }
    rows
}

/// Shape of a twiddle factor, which decides how cheaply a butterfly can be
/// expressed in PIM commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TwiddleClass {
    /// `1 + 0j`
    One,
    /// `0 - 1j`
    MinusJ,
    /// `|re| = |im| = 1/sqrt(2)`
    SqrtHalf,
    Generic,
}

impl TwiddleClass {
    pub const ALL: [TwiddleClass; 4] =
        [TwiddleClass::One, TwiddleClass::MinusJ, TwiddleClass::SqrtHalf, TwiddleClass::Generic];

    /// Classifies a twiddle value numerically.
    pub fn of(w: ComplexSample) -> TwiddleClass {
        const TOL: f32 = 1e-6;
        let c = FRAC_1_SQRT_2 as f32;
        if (w.re - 1.0).abs() <= TOL && w.im.abs() <= TOL {
            TwiddleClass::One
        } else if w.re.abs() <= TOL && (w.im + 1.0).abs() <= TOL {
            TwiddleClass::MinusJ
        } else if (w.re.abs() - c).abs() <= TOL && (w.im.abs() - c).abs() <= TOL {
            TwiddleClass::SqrtHalf
        } else {
            TwiddleClass::Generic
        }
    }
}

/// Class of the twiddle used by butterfly `k` of DIT step `step` (1-based),
/// i.e. of `w_(2^step)^k`. `n` is the transform size.
pub fn classify_twiddle(n: usize, step: u32, k: usize) -> Result<TwiddleClass, FftError> {
    check_pow2(n)?;
    if step == 0 || (1usize << step) > n {
        return Err(FftError::TwiddleIndex { size: n, index: step as usize });
    }
    let m = 1usize << step;
    if k >= m / 2 {
        return Err(FftError::TwiddleIndex { size: m, index: k });
    }
    Ok(class_of_index(m, k))
}

/// Exact classification of `w_m^k` for `k < m/2`.
pub(crate) fn class_of_index(m: usize, k: usize) -> TwiddleClass {
    if k == 0 {
        TwiddleClass::One
    } else if 4 * k == m {
        TwiddleClass::MinusJ
    } else if 8 * k == m || 8 * k == 3 * m {
        TwiddleClass::SqrtHalf
    } else {
        TwiddleClass::Generic
    }
}

/// Butterfly counts per twiddle class over a whole radix-2 transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TwiddleCensus {
    pub one: u64,
    pub minus_j: u64,
    pub sqrt_half: u64,
    pub generic: u64,
}

impl TwiddleCensus {
    pub fn total(&self) -> u64 {
        self.one + self.minus_j + self.sqrt_half + self.generic
    }

    pub fn get(&self, class: TwiddleClass) -> u64 {
        match class {
            TwiddleClass::One => self.one,
            TwiddleClass::MinusJ => self.minus_j,
            TwiddleClass::SqrtHalf => self.sqrt_half,
            TwiddleClass::Generic => self.generic,
        }
    }
}

pub fn twiddle_census(n: usize) -> Result<TwiddleCensus, FftError> {
    check_pow2(n)?;
    let mut census = TwiddleCensus::default();
    let mut m = 2usize;
    while m <= n {
        let per_k = (n / m) as u64;
        let half = (m / 2) as u64;
        census.one += per_k;
        let mut special = 1;
        if m >= 4 {
            census.minus_j += per_k;
            special += 1;
        }
        if m >= 8 {
            census.sqrt_half += 2 * per_k;
            special += 2;
        }
        census.generic += (half - special) * per_k;
        m *= 2;
    }
    Ok(census)
}

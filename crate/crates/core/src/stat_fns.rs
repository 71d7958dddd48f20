//! Special functions and random variate generation.
//!
//! Only what the tuning sequences and the data generators need: the Student-t
//! distribution (through the regularized incomplete beta function), Gamma and
//! multivariate normal samplers, and a reproducible per-replication RNG stream.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Remainder of Stirling's series, `ln Γ(x) - [(x - 1/2) ln x - x + ln √(2π)]`.
/// Accurate to double precision for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    // B_{2k} / (2k (2k - 1))
    const COEF: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let x2 = 1.0 / (x * x);
    let mut acc = 0.0;
    for c in COEF.iter().rev() {
        acc = acc * x2 + c;
    }
    acc / x
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x >= 10.0 {
        return (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_correction(x);
    }
    let mut shifted = x;
    let mut prod = 1.0;
    while shifted < 10.0 {
        prod *= shifted;
        shifted += 1.0;
    }
    ln_gamma(shifted) - prod.ln()
}

/// `ln B(a, b)`, computed without cancellation when either argument is large.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let ratio = p / (p + q);
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(p + q);
        -0.5 * q.ln() + LN_SQRT_2PI + corr + (p - 0.5) * ratio.ln() + q * (-ratio).ln_1p()
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - 0.5) * (-ratio).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn ln_pair(x: f64, y: f64) -> (f64, f64) {
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    (ln_x, ln_y)
}

/// Regularized incomplete beta `I_x(a, b)` together with its complement.
///
/// Both `x` and `y = 1 - x` are taken as inputs so callers that know `y`
/// more accurately than `1 - x` (e.g. `x` close to one) keep that accuracy.
pub fn regularized_beta(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    let (ln_x, ln_y) = ln_pair(x, y);
    let ln_front = a * ln_x + b * ln_y - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        let v = (ln_front.exp() * beta_continued_fraction(a, b, x) / a).clamp(0.0, 1.0);
        (v, 1.0 - v)
    } else {
        let v = (ln_front.exp() * beta_continued_fraction(b, a, y) / b).clamp(0.0, 1.0);
        (1.0 - v, v)
    }
}

fn inverse_beta_initial_guess(a: f64, b: f64, p: f64) -> f64 {
    if a >= 1.0 && b >= 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        let al = (z * z - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = z * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        a / (a + b * (2.0 * w).exp())
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        if p < t / w {
            (a * w * p).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - p)).powf(1.0 / b)
        }
    }
}

/// Inverse of the regularized incomplete beta function: returns `(x, 1 - x)`
/// with `I_x(a, b) = p`, by safeguarded Newton iteration inside a shrinking
/// bisection bracket.
pub fn inverse_regularized_beta(a: f64, b: f64, p: f64) -> (f64, f64) {
    if p <= 0.0 {
        return (0.0, 1.0);
    }
    if p >= 1.0 {
        return (1.0, 0.0);
    }
    if p > 0.5 {
        let (y, x) = inverse_regularized_beta(b, a, 1.0 - p);
        return (x, y);
    }
    let ln_b = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x = inverse_beta_initial_guess(a, b, p);
    if !(x > 0.0 && x < 1.0) {
        x = 0.5;
    }
    for _ in 0..500 {
        let y = 1.0 - x;
        let (ix, _) = regularized_beta(a, b, x, y);
        let f = ix - p;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let (ln_x, ln_y) = ln_pair(x, y);
        let deriv = ((a - 1.0) * ln_x + (b - 1.0) * ln_y - ln_b).exp();
        let mut next = x - f / deriv;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE);
        x = next;
        if done || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    (x, 1.0 - x)
}

/// Upper tail `P(T > q)` for `q >= 0`.
fn student_t_upper_tail(df: f64, q: f64) -> f64 {
    let q2 = q * q;
    let x = df / (df + q2);
    let y = q2 / (df + q2);
    0.5 * regularized_beta(0.5 * df, 0.5, x, y).0
}

fn student_t_density(df: f64, q: f64) -> f64 {
    (-ln_beta(0.5 * df, 0.5) - 0.5 * df.ln() - 0.5 * (df + 1.0) * (q * q / df).ln_1p()).exp()
}

/// Student-t cumulative distribution function.
pub fn student_t_cdf(df: u64, t: f64) -> Result<f64> {
    if df < 1 {
        return Err(Error::Domain(format!("degrees of freedom must be >= 1, got {df}")));
    }
    let df = df as f64;
    Ok(if t >= 0.0 {
        1.0 - student_t_upper_tail(df, t)
    } else {
        student_t_upper_tail(df, -t)
    })
}

/// Quantile `q` of the Student-t distribution, `CDF(q) = prob`.
///
/// Inverts the regularized incomplete beta function and then polishes the
/// root with Newton steps on the t tail probability.
pub fn student_t_quantile(df: u64, prob: f64) -> Result<f64> {
    if df < 1 {
        return Err(Error::Domain(format!("degrees of freedom must be >= 1, got {df}")));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::Domain(format!("probability must lie in (0, 1), got {prob}")));
    }
    if prob == 0.5 {
        return Ok(0.0);
    }
    let df = df as f64;
    let (tail, sign) = if prob > 0.5 {
        (1.0 - prob, 1.0)
    } else {
        (prob, -1.0)
    };
    let (x, y) = inverse_regularized_beta(0.5 * df, 0.5, 2.0 * tail);
    let mut q = (df * y / x).sqrt();
    for _ in 0..4 {
        let f = student_t_upper_tail(df, q) - tail;
        let step = f / student_t_density(df, q);
        if !step.is_finite() {
            break;
        }
        q += step;
        if step.abs() <= 1e-15 * q.abs() {
            break;
        }
    }
    Ok(sign * q)
}

/// Reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by ChaCha20 with the stream id mapped onto the cipher's stream
/// counter, so streams for different replications are independent and can be
/// generated in any order.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform variate on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        // 53 random bits, shifted off zero.
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Gamma(shape, rate) variate (mean `shape / rate`).
///
/// Marsaglia–Tsang squeeze/rejection for `shape >= 1`; smaller shapes use
/// `Gamma(shape + 1) * U^(1/shape)`.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!(
            "gamma parameters must be positive, got shape={shape}, rate={rate}"
        )));
    }
    if shape < 1.0 {
        let g = sample_gamma(shape + 1.0, 1.0, rng)?;
        let u = rng.uniform_open0();
        return Ok(g * u.powf(1.0 / shape) / rate);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = rng.standard_normal();
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform_open0();
        if u < 1.0 - 0.0331 * z.powi(4) || u.ln() < 0.5 * z * z + d * (1.0 - v + v.ln()) {
            return Ok(d * v / rate);
        }
    }
}

/// Multivariate normal sampler with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct MvNormal {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl MvNormal {
    pub fn new(mean: &[f64], cov: &SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                got: mean.len(),
            });
        }
        let factor = cov.cholesky()?.l();
        Ok(MvNormal {
            mean: DVector::from_column_slice(mean),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws a zero-mean `N(0, cov)` vector.
    pub fn sample_centered(&self, rng: &mut RngStream) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.standard_normal());
        &self.factor * z
    }

    pub fn sample(&self, rng: &mut RngStream) -> DVector<f64> {
        self.sample_centered(rng) + &self.mean
    }
}

/// `n x p` matrix whose rows are i.i.d. `N(mean, cov)`.
pub fn sample_mvnormal(
    mean: &[f64],
    cov: &SymMatrix,
    n: usize,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let dist = MvNormal::new(mean, cov)?;
    let mut out = DMatrix::zeros(n, dist.dim());
    for i in 0..n {
        let row = dist.sample(rng);
        out.row_mut(i).copy_from(&row.transpose());
    }
    Ok(out)
}

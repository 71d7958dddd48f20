//! Independent reference implementations used by the integration tests.
//! None of these call into the library's numerical routines.
#![allow(dead_code)]

use nalgebra::DMatrix;
use std::f64::consts::FRAC_PI_2;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod-15 estimate and its distance from the embedded Gauss-7 rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    (k * h, (k - g).abs() * h)
}

fn gk_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), eps: f64, depth: u32) -> f64 {
    let (k, err) = whole;
    if depth == 0 || err <= eps.max(1e-15 * k.abs()) {
        return k;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    gk_rec(f, a, m, left, 0.5 * eps, depth - 1) + gk_rec(f, m, b, right, 0.5 * eps, depth - 1)
}

/// Adaptive Gauss-Kronrod quadrature with absolute tolerance `eps` and a
/// relative floor of 1e-15 per subinterval. The interval is first split into
/// 32 panels so narrow peaks are not missed.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    let panels = 32;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + h * k as f64;
            let hi = if k + 1 == panels { b } else { lo + h };
            gk_rec(&f, lo, hi, gk15(&f, lo, hi), eps / panels as f64, 40)
        })
        .sum()
}

/// `sin(φ)^(ν-1)` evaluated through its logarithm, accurate near `π/2`.
fn sin_power(phi: f64, nu: f64) -> f64 {
    if phi <= 0.0 {
        return if nu == 1.0 { 1.0 } else { 0.0 };
    }
    let log_sin = if phi < std::f64::consts::FRAC_PI_4 {
        phi.sin().ln()
    } else {
        let half = 0.5 * (FRAC_PI_2 - phi);
        (-2.0 * half.sin().powi(2)).ln_1p()
    };
    ((nu - 1.0) * log_sin).exp()
}

/// `P(T > t)` for `t >= 0` under Student t with `nu` degrees of freedom.
///
/// With `x = sqrt(ν) cot φ` the tail becomes
/// `∫_0^{atan(sqrt(ν)/t)} sin^{ν-1} φ dφ / (2 ∫_0^{π/2} sin^{ν-1} φ dφ)`.
pub fn t_upper_tail(nu: f64, t: f64) -> f64 {
    assert!(t >= 0.0);
    let norm = integrate(|p| sin_power(p, nu), 0.0, FRAC_PI_2, 1e-17);
    let upper = (nu.sqrt() / t).atan();
    // The tail integral is tiny in the far tail; scale the tolerance to it.
    let rough = integrate(|p| sin_power(p, nu), 0.0, upper, 1e-12 * norm);
    let tail = integrate(|p| sin_power(p, nu), 0.0, upper, (rough * 1e-13).max(1e-300));
    0.5 * tail / norm
}

/// Quantile by bisection on [`t_upper_tail`].
pub fn t_quantile(nu: f64, prob: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0);
    if prob == 0.5 {
        return 0.0;
    }
    if prob < 0.5 {
        return -t_quantile(nu, 1.0 - prob);
    }
    let target = 1.0 - prob;
    let mut hi = 1.0;
    while t_upper_tail(nu, hi) > target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t_upper_tail(nu, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal quantile by integrating the density and bisecting.
pub fn normal_quantile(prob: f64) -> f64 {
    assert!(prob > 0.5 && prob < 1.0);
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let target = prob - 0.5;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if integrate(density, 0.0, mid, 1e-16) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Sorted-ℓ1 norm by direct sorting.
pub fn slope_norm(x: &[f64], lambda: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.partial_cmp(p).unwrap());
    a.iter().zip(lambda).map(|(a, l)| a * l).sum()
}

fn prox_objective(x: &[f64], v: &[f64], lambda: &[f64], rho: f64) -> f64 {
    slope_norm(x, lambda) + 0.5 * rho * x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Exact minimizer of `J_λ(x) + (ρ/2)||x - v||²` by enumeration.
///
/// The objective is a quadratic on each region where the ordering and ties of
/// `|x|` are fixed. Every weak ordering of the coordinates (with a group at
/// zero) is enumerated, the region's quadratic is minimized in closed form,
/// and the candidate with the lowest true objective is returned. The
/// optimum's own region yields the optimum, so the minimum is exact.
pub fn prox_bruteforce(v: &[f64], lambda: &[f64], rho: f64) -> Vec<f64> {
    let m = v.len();
    let mut level = vec![0usize; m];
    let mut best = vec![0.0; m];
    let mut best_val = prox_objective(&best, v, lambda, rho);
    let total = (m + 1).pow(m as u32);
    for code in 0..total {
        let mut c = code;
        for l in level.iter_mut() {
            *l = c % (m + 1);
            c /= m + 1;
        }
        let k = *level.iter().max().unwrap();
        if (1..=k).any(|g| !level.contains(&g)) {
            continue;
        }
        let mut x = vec![0.0; m];
        let mut pos = 0;
        for g in 1..=k {
            let members: Vec<usize> = (0..m).filter(|&i| level[i] == g).collect();
            let lam_sum: f64 = lambda[pos..pos + members.len()].iter().sum();
            pos += members.len();
            let mean_abs = members.iter().map(|&i| v[i].abs()).sum::<f64>() / members.len() as f64;
            let c = mean_abs - lam_sum / (rho * members.len() as f64);
            for &i in &members {
                x[i] = c * if v[i] < 0.0 { -1.0 } else { 1.0 };
            }
        }
        let val = prox_objective(&x, v, lambda, rho);
        if val < best_val {
            best_val = val;
            best = x;
        }
    }
    best
}

fn log_det(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    Some(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// Minimizer of `-log det Θ + (ρ/2)||Θ - S̃||²_F` by gradient descent with
/// Armijo backtracking that keeps iterates positive definite.
pub fn theta_update_gd(s_tilde: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let p = s_tilde.nrows();
    let f = |t: &DMatrix<f64>| log_det(t).map(|ld| -ld + 0.5 * rho * (t - s_tilde).norm_squared());
    let mut theta = DMatrix::identity(p, p);
    let mut value = f(&theta).unwrap();
    for _ in 0..100_000 {
        let grad = -inverse(&theta) + (&theta - s_tilde) * rho;
        let gnorm2 = grad.norm_squared();
        if gnorm2.sqrt() < 1e-13 {
            break;
        }
        let mut step = 1.0 / rho;
        if gnorm2 * step < 1e-14 * value.abs().max(1.0) {
            return polish_fixed_step(theta, s_tilde, rho);
        }
        loop {
            let cand = &theta - &grad * step;
            let cand = (&cand + cand.transpose()) * 0.5;
            if let Some(v) = f(&cand) {
                if v <= value - 0.5 * step * gnorm2 {
                    theta = cand;
                    value = v;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-20 {
                return polish_fixed_step(theta, s_tilde, rho);
            }
        }
    }
    theta
}

/// Fixed-step gradient descent with step 1/L, L = ρ + 1/λ_min(Θ)², run until
/// the gradient vanishes to roundoff. Used once Armijo is lost in roundoff.
fn polish_fixed_step(mut theta: DMatrix<f64>, s_tilde: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let grad_of = |t: &DMatrix<f64>| -inverse(t) + (t - s_tilde) * rho;
    let mut grad = grad_of(&theta);
    for _ in 0..100_000 {
        let lmin = theta.clone().symmetric_eigen().eigenvalues.min();
        let step = 0.5 / (rho + 1.0 / (lmin * lmin));
        let cand = &theta - &grad * step;
        let cand = (&cand + cand.transpose()) * 0.5;
        theta = cand;
        grad = grad_of(&theta);
        if grad.norm() < 1e-14 {
            break;
        }
    }
    theta
}

/// Off-diagonal upper-triangle entries in row order.
pub fn upper(m: &DMatrix<f64>) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// `-log det Θ + tr(ΘS) + 2 J_λ(upper(Θ))`.
pub fn gslope_objective(theta: &DMatrix<f64>, s: &DMatrix<f64>, lambda: &[f64]) -> Option<f64> {
    Some(-log_det(theta)? + (theta * s).trace() + 2.0 * slope_norm(&upper(theta), lambda))
}

/// Proximal-gradient solver for the penalized Gaussian likelihood, with the
/// penalty's proximal map on the upper triangle supplied by `prox`
/// (`prox(a, ρ)` = argmin_u J(u) + (ρ/2)||u - a||²).
pub fn gslope_proximal_gradient<P>(s: &DMatrix<f64>, prox: P) -> DMatrix<f64>
where
    P: Fn(&[f64], f64) -> Vec<f64>,
{
    let p = s.nrows();
    let smooth = |t: &DMatrix<f64>| log_det(t).map(|ld| -ld + (t * s).trace());
    let mut theta = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / s[(i, i)] } else { 0.0 });
    let mut step: f64 = 1.0;
    for _ in 0..200_000 {
        let grad = s - inverse(&theta);
        let f0 = smooth(&theta).unwrap();
        let mut moved = false;
        let mut next = theta.clone();
        for _ in 0..200 {
            let a = &theta - &grad * step;
            // Frobenius geometry counts each off-diagonal pair twice, which
            // matches the factor 2 on the penalty: the pair prox has scale 1/t.
            let u = prox(&upper(&a), 1.0 / step);
            let mut cand = DMatrix::from_fn(p, p, |i, j| if i == j { a[(i, i)] } else { 0.0 });
            let mut k = 0;
            for i in 0..p {
                for j in (i + 1)..p {
                    cand[(i, j)] = u[k];
                    cand[(j, i)] = u[k];
                    k += 1;
                }
            }
            let d = &cand - &theta;
            if let Some(f1) = smooth(&cand) {
                if f1 <= f0 + grad.dot(&d) + d.norm_squared() / (2.0 * step) + 1e-15 {
                    next = cand;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        assert!(moved, "backtracking failed");
        let change = (&next - &theta).norm();
        theta = next;
        step *= 1.5;
        if change < 1e-13 {
            break;
        }
    }
    theta
}

/// Soft-thresholding: the prox of a constant sequence.
pub fn soft_threshold(a: &[f64], lambda: f64, rho: f64) -> Vec<f64> {
    a.iter()
        .map(|&x| x.signum() * (x.abs() - lambda / rho).max(0.0))
        .collect()
}

/// Connected components by breadth-first search, listed by smallest node.
pub fn bfs_components(p: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut nbrs = vec![Vec::new(); p];
    for &(i, j) in edges {
        nbrs[i].push(j);
        nbrs[j].push(i);
    }
    let mut seen = vec![false; p];
    let mut out = Vec::new();
    for start in 0..p {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < comp.len() {
            let node = comp[head];
            head += 1;
            for &n in &nbrs[node] {
                if !seen[n] {
                    seen[n] = true;
                    comp.push(n);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Random symmetric positive definite correlation matrix `D^{-1/2} A Aᵀ D^{-1/2}`
/// from a caller-supplied stream of uniforms on `[-1, 1]`.
pub fn random_correlation(p: usize, mut uniform: impl FnMut() -> f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p + 2, |_, _| uniform());
    let s = &a * a.transpose() + DMatrix::identity(p, p) * 0.05;
    let d: Vec<f64> = (0..p).map(|i| s[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { s[(i, j)] / (d[i] * d[j]) })
}

//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use mslesion_core::phantom::{export, generate, PhantomSpec};

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exhaustive Otsu: every split `[0..=t] | [t+1..=255]` scored by
/// `w0·w1·(μ0 − μ1)²` in exact rationals; the smallest best `t` wins.
pub fn otsu_oracle(hist: &[u64; 256]) -> Option<u8> {
    let n: u64 = hist.iter().sum();
    let mut best: Option<(u8, BigRational)> = None;
    for t in 0..256usize {
        let c0: u64 = hist[..=t].iter().sum();
        let c1 = n - c0;
        if c0 == 0 || c1 == 0 {
            continue;
        }
        let s0: u64 = hist[..=t]
            .iter()
            .enumerate()
            .map(|(i, &c)| i as u64 * c)
            .sum();
        let s1: u64 = hist[t + 1..]
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + t + 1) as u64 * c)
            .sum();
        let w0 = rat(c0 as i64) / rat(n as i64);
        let w1 = rat(c1 as i64) / rat(n as i64);
        let d = rat(s0 as i64) / rat(c0 as i64) - rat(s1 as i64) / rat(c1 as i64);
        let score = w0 * w1 * d.clone() * d;
        if best.as_ref().is_none_or(|(_, b)| score > *b) {
            best = Some((t as u8, score));
        }
    }
    best.map(|(t, _)| t)
}

/// Mean, variance, skewness and excess kurtosis by direct summation in exact
/// arithmetic; only the final standardization is done in `f64`.
pub fn moments_oracle(values: &[i64]) -> [f64; 4] {
    let n = rat(values.len() as i64);
    let mean = values
        .iter()
        .map(|&v| rat(v))
        .fold(BigRational::zero(), |a, b| a + b)
        / n.clone();
    let central = |p: u32| {
        values
            .iter()
            .map(|&v| {
                let d = rat(v) - mean.clone();
                (0..p).fold(rat(1), |acc, _| acc * d.clone())
            })
            .fold(BigRational::zero(), |a, b| a + b)
            / n.clone()
    };
    let (m2, m3, m4) = (central(2), central(3), central(4));
    let mean = mean.to_f64().unwrap();
    if m2.is_zero() {
        return [mean, 0.0, 0.0, 0.0];
    }
    let kurt = (m4 / (m2.clone() * m2.clone())).to_f64().unwrap() - 3.0;
    let (m2, m3) = (m2.to_f64().unwrap(), m3.to_f64().unwrap());
    [mean, m2, m3 / m2.powf(1.5), kurt]
}

/// Dual objective `Σα − ½ Σ α_i α_j y_i y_j K_ij`.
pub fn dual_value(alpha: &[f64], y: &[f64], gram: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximizes the SVM dual over a grid of the first `n − 1` multipliers (the
/// last follows from `Σ α y = 0`), zooming in around the incumbent.
pub fn grid_dual_oracle(gram: &[f64], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let free = n - 1;
    let steps = 24usize;
    let mut lo = vec![0.0; free];
    let mut hi = vec![c; free];
    let mut best = (f64::NEG_INFINITY, vec![0.0; free]);
    for _round in 0..12 {
        let total = (steps + 1).pow(free as u32);
        for code in 0..total {
            let mut rest = code;
            let mut alpha = Vec::with_capacity(n);
            for k in 0..free {
                let s = rest % (steps + 1);
                rest /= steps + 1;
                alpha.push(lo[k] + (hi[k] - lo[k]) * s as f64 / steps as f64);
            }
            let last = -y[n - 1] * alpha.iter().zip(y).map(|(a, yi)| a * yi).sum::<f64>();
            if !(-1e-12..=c + 1e-12).contains(&last) {
                continue;
            }
            alpha.push(last.clamp(0.0, c));
            let v = dual_value(&alpha, y, gram);
            if v > best.0 {
                alpha.pop();
                best = (v, alpha);
            }
        }
        for k in 0..free {
            let width = (hi[k] - lo[k]) / 4.0;
            lo[k] = (best.1[k] - width).max(0.0);
            hi[k] = (best.1[k] + width).min(c);
        }
    }
    best.0
}

pub fn linear(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

pub fn poly(gamma: f64, coef: f64, degree: i32, a: &[f64], b: &[f64]) -> f64 {
    (gamma * linear(a, b) + coef).powi(degree)
}

/// Eigenvalues of a symmetric 3×3 matrix, descending, from the roots of its
/// characteristic polynomial (trigonometric form).
pub fn sym3_eigenvalues(a: &[f64; 9]) -> [f64; 3] {
    let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
    let q = (a[0] + a[4] + a[8]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0], a[4], a[8]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: Vec<f64> = (0..9)
        .map(|i| (a[i] - if i % 4 == 0 { q } else { 0.0 }) / p)
        .collect();
    let det = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6])
        + b[2] * (b[3] * b[7] - b[4] * b[6]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

/// Population covariance of row-major `rows × dims` data.
pub fn covariance(values: &[f64], dims: usize) -> Vec<f64> {
    let rows = values.len() / dims;
    let mut mean = vec![0.0; dims];
    for r in values.chunks(dims) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / rows as f64;
        }
    }
    let mut cov = vec![0.0; dims * dims];
    for r in values.chunks(dims) {
        for i in 0..dims {
            for j in 0..dims {
                cov[i * dims + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / rows as f64;
            }
        }
    }
    cov
}

/// Default 35/35 phantom written to `dir`.
pub fn default_phantom(dir: &Path) -> usize {
    let cases = generate(&PhantomSpec::default()).expect("phantom");
    export(&cases, dir).expect("export");
    cases.len()
}

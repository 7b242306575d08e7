//! Principal component analysis with a cyclic Jacobi eigensolver.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::num::{cast, Float};
use crate::texfeat::FeatureMatrix;

/// How many components `fit` retains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Retain {
    Count(usize),
    /// Smallest count whose cumulative eigenvalue share reaches the fraction.
    Variance(f64),
}

impl Default for Retain {
    fn default() -> Self {
        Retain::Count(10)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel<F> {
    mean: Vec<F>,
    /// `n × n`, row `i` is the eigenvector of the `i`-th largest eigenvalue.
    components: Vec<F>,
    eigenvalues: Vec<F>,
    retained: usize,
}

const MAX_SWEEPS: usize = 100;

/// Mean vector and `1/k`-normalized covariance of the rows.
pub fn mean_covariance<F: Float>(x: &FeatureMatrix<F>) -> Result<(Vec<F>, Vec<F>)> {
    let (k, n) = (x.rows(), x.dims());
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 rows, got {k}"
        )));
    }
    let kf = cast::<F>(k as f64);
    let mut mean = vec![F::zero(); n];
    for r in x.iter_rows() {
        for (m, &v) in mean.iter_mut().zip(r) {
            *m = *m + v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / kf);
    let mut cov = vec![F::zero(); n * n];
    let mut d = vec![F::zero(); n];
    for r in x.iter_rows() {
        for j in 0..n {
            d[j] = r[j] - mean[j];
        }
        for i in 0..n {
            for j in i..n {
                cov[i * n + j] = cov[i * n + j] + d[i] * d[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] / kf;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }
    Ok((mean, cov))
}

/// Eigen-decomposition of the symmetric `n × n` matrix `a`. Returns
/// eigenvalues in descending order and the matching unit eigenvectors as
/// rows, each signed so its largest-magnitude entry is positive.
pub fn jacobi_eigen<F: Float>(a: &[F], n: usize) -> Result<(Vec<F>, Vec<F>)> {
    if a.len() != n * n {
        return Err(Error::dims(n * n, a.len()));
    }
    let mut m = a.to_vec();
    // v holds eigenvectors as columns during the sweep
    let mut v = vec![F::zero(); n * n];
    (0..n).for_each(|i| v[i * n + i] = F::one());
    let frob = m.iter().map(|&x| x * x).sum::<F>().sqrt();
    let limit = F::solver_eps() * frob;
    let off = |m: &[F]| {
        let mut s = F::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s = s + m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > limit {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NotConverged(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == F::zero() {
                    continue;
                }
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                let theta = (aqq - app) / (cast::<F>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + F::one()).sqrt());
                let t = if theta == F::zero() { F::one() } else { t };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = F::zero();
                m[q * n + p] = F::zero();
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(F, Vec<F>)> = (0..n)
        .map(|j| {
            let mut e: Vec<F> = (0..n).map(|i| v[i * n + j]).collect();
            let big = e
                .iter()
                .enumerate()
                .fold(0, |b, (i, x)| if x.abs() > e[b].abs() { i } else { b });
            if e[big] < F::zero() {
                e.iter_mut().for_each(|x| *x = -*x);
            }
            (m[j * n + j], e)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    // repeated eigenvalues: lexicographically larger eigenvector first
    let tie = F::solver_eps() * frob.max(F::one());
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end - 1].0 - pairs[end].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            log::debug!(
                "repeated eigenvalue {} with multiplicity {}",
                pairs[start].0,
                end - start
            );
            pairs[start..end]
                .sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        }
        start = end;
    }
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = pairs.into_iter().flat_map(|p| p.1).collect();
    Ok((values, vectors))
}

/// Fits the model on the rows of `x`.
pub fn fit<F: Float>(x: &FeatureMatrix<F>, retain: Retain) -> Result<PcaModel<F>> {
    let (mean, cov) = mean_covariance(x)?;
    let n = x.dims();
    let (eigenvalues, components) = jacobi_eigen(&cov, n)?;
    let retained = match retain {
        Retain::Count(r) if (1..=n).contains(&r) => r,
        Retain::Count(r) => {
            return Err(Error::InvalidArgument(format!(
                "retained count {r} outside 1..={n}"
            )));
        }
        Retain::Variance(f) if f > 0.0 && f <= 1.0 => {
            let total: f64 = eigenvalues
                .iter()
                .map(|v| v.to_f64().unwrap_or(0.0).max(0.0))
                .sum();
            if total == 0.0 {
                1
            } else {
                let mut acc = 0.0;
                let mut r = n;
                for (i, v) in eigenvalues.iter().enumerate() {
                    acc += v.to_f64().unwrap_or(0.0).max(0.0);
                    if acc >= f * total * (1.0 - 1e-12) {
                        r = i + 1;
                        break;
                    }
                }
                r
            }
        }
        Retain::Variance(f) => {
            return Err(Error::InvalidArgument(format!(
                "variance fraction {f} outside (0, 1]"
            )));
        }
    };
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        retained,
    })
}

impl<F: Float> PcaModel<F> {
    pub fn new(
        mean: Vec<F>,
        components: Vec<F>,
        eigenvalues: Vec<F>,
        retained: usize,
    ) -> Result<Self> {
        let n = mean.len();
        if components.len() != n * n {
            return Err(Error::dims(n * n, components.len()));
        }
        if eigenvalues.len() != n {
            return Err(Error::dims(n, eigenvalues.len()));
        }
        if !(1..=n).contains(&retained) {
            return Err(Error::InvalidArgument(format!(
                "retained count {retained} outside 1..={n}"
            )));
        }
        Ok(PcaModel {
            mean,
            components,
            eigenvalues,
            retained,
        })
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn retained(&self) -> usize {
        self.retained
    }

    pub fn mean(&self) -> &[F] {
        &self.mean
    }

    pub fn eigenvalues(&self) -> &[F] {
        &self.eigenvalues
    }

    /// Row `i` of `A`.
    pub fn component(&self, i: usize) -> &[F] {
        let n = self.dims();
        &self.components[i * n..(i + 1) * n]
    }

    /// First `r` coordinates of `A(x − m)`.
    pub fn transform(&self, x: &[F], r: usize) -> Result<Vec<F>> {
        let n = self.dims();
        if x.len() != n {
            return Err(Error::dims(n, x.len()));
        }
        if r > n {
            return Err(Error::InvalidArgument(format!(
                "cannot keep {r} of {n} components"
            )));
        }
        Ok((0..r)
            .map(|i| {
                self.component(i)
                    .iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(&a, (&v, &m))| a * (v - m))
                    .sum()
            })
            .collect())
    }

    /// `Aᵀ·y + m`, with `y` zero-padded to full length.
    pub fn inverse(&self, y: &[F]) -> Result<Vec<F>> {
        let n = self.dims();
        if y.len() > n {
            return Err(Error::dims(n, y.len()));
        }
        let mut x = self.mean.clone();
        for (i, &yi) in y.iter().enumerate() {
            for (xj, &a) in x.iter_mut().zip(self.component(i)) {
                *xj = *xj + a * yi;
            }
        }
        Ok(x)
    }

    /// Projects every row onto the retained components, keeping labels and provenance.
    pub fn transform_matrix(&self, x: &FeatureMatrix<F>) -> Result<FeatureMatrix<F>> {
        let mut values = Vec::with_capacity(x.rows() * self.retained);
        for row in x.iter_rows() {
            values.extend(self.transform(row, self.retained)?);
        }
        FeatureMatrix::new(
            self.retained,
            values,
            x.labels().map(<[_]>::to_vec),
            x.provenance().to_vec(),
        )
    }

    /// Share of total variance held by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let ev: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|v| v.to_f64().unwrap_or(0.0).max(0.0))
            .collect();
        let total: f64 = ev.iter().sum();
        ev.iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect()
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let line = |w: &mut W, v: &[F]| -> std::io::Result<()> {
            let s: Vec<String> = v
                .iter()
                .map(|x| format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN)))
                .collect();
            writeln!(w, "{}", s.join(" "))
        };
        writeln!(w, "pca {} {}", self.dims(), self.retained)?;
        line(&mut w, &self.mean)?;
        line(&mut w, &self.eigenvalues)?;
        for i in 0..self.dims() {
            line(&mut w, self.component(i))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let lines: Vec<String> = r
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io("<pca model>", e))?;
        let mut it = lines.iter().filter(|l| !l.trim().is_empty());
        let header = it
            .next()
            .ok_or_else(|| Error::Malformed("empty pca model".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Malformed(format!("bad pca header '{header}'")))
        };
        if h.len() != 3 || h[0] != "pca" {
            return Err(Error::Malformed(format!("bad pca header '{header}'")));
        }
        let (n, r) = (parse_usize(h[1])?, parse_usize(h[2])?);
        let mut row = |what: &str| -> Result<Vec<F>> {
            let l = it
                .next()
                .ok_or_else(|| Error::Malformed(format!("missing {what}")))?;
            let v = l
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map(cast::<F>)
                        .map_err(|_| Error::Malformed(format!("bad number '{t}'")))
                })
                .collect::<Result<Vec<F>>>()?;
            if v.len() != n {
                return Err(Error::Malformed(format!(
                    "{what}: expected {n} values, got {}",
                    v.len()
                )));
            }
            Ok(v)
        };
        let mean = row("mean")?;
        let eigenvalues = row("eigenvalues")?;
        let mut components = Vec::with_capacity(n * n);
        for i in 0..n {
            components.extend(row(&format!("component {i}"))?);
        }
        PcaModel::new(mean, components, eigenvalues, r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix<f64> {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn line_data() {
        let x = fm(&[
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![3.0, 6.0],
            vec![-1.0, -2.0],
            vec![-2.0, -4.0],
            vec![-3.0, -6.0],
        ]);
        let m = fit(&x, Retain::Count(2)).unwrap();
        let s5 = 5f64.sqrt();
        assert!((m.component(0)[0] - 1.0 / s5).abs() < 1e-12);
        assert!((m.component(0)[1] - 2.0 / s5).abs() < 1e-12);
        // var(x) = 28/6, total variance 5·28/6
        assert!((m.eigenvalues()[0] - 5.0 * 28.0 / 6.0).abs() < 1e-12);
        assert!(m.eigenvalues()[1].abs() < 1e-12);
    }

    #[test]
    fn identical_rows_project_to_zero() {
        let x = fm(&vec![vec![3.0, -1.0, 2.0]; 4]);
        let m = fit(&x, Retain::Count(3)).unwrap();
        assert_eq!(m.eigenvalues(), &[0.0, 0.0, 0.0]);
        assert_eq!(
            m.transform(&[3.0, -1.0, 2.0], 3).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn axis_aligned_variances() {
        // x1 ∈ {±2}, x2 ∈ {±1} in all four combinations: var 4 and 1, cov 0
        let x = fm(&[
            vec![2.0, 1.0],
            vec![2.0, -1.0],
            vec![-2.0, 1.0],
            vec![-2.0, -1.0],
        ]);
        let m = fit(&x, Retain::Count(2)).unwrap();
        assert_eq!(m.eigenvalues(), &[4.0, 1.0]);
        assert_eq!(m.component(0), &[1.0, 0.0]);
        assert_eq!(m.component(1), &[0.0, 1.0]);
    }

    #[test]
    fn transform_and_inverse_basics() {
        let x = fm(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 3.0, 1.0],
            vec![4.0, 1.0, 0.0],
            vec![2.0, 2.0, 2.0],
        ]);
        let m = fit(&x, Retain::Count(2)).unwrap();
        assert!(m
            .transform(m.mean(), 3)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-15));
        assert_eq!(m.inverse(&[0.0, 0.0]).unwrap(), m.mean());
        assert!(m.transform(&[1.0, 2.0], 2).is_err());
        assert!(m.transform(&[1.0, 2.0, 3.0], 4).is_err());
        assert_eq!(m.transform_matrix(&x).unwrap().dims(), 2);
    }

    #[test]
    fn rank_one_reconstruction() {
        let dir = [0.6, -0.8, 0.0];
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|t| dir.iter().map(|d| d * (t as f64 - 2.5) + 1.0).collect())
            .collect();
        let x = fm(&rows);
        let m = fit(&x, Retain::Count(1)).unwrap();
        for r in &rows {
            let back = m.inverse(&m.transform(r, 1).unwrap()).unwrap();
            let err: f64 = back
                .iter()
                .zip(r)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-9, "{err}");
        }
    }

    #[test]
    fn explained_variance_selection() {
        let x = fm(&[
            vec![2.0, 1.0],
            vec![2.0, -1.0],
            vec![-2.0, 1.0],
            vec![-2.0, -1.0],
        ]);
        assert_eq!(fit(&x, Retain::Variance(0.8)).unwrap().retained(), 1);
        assert_eq!(fit(&x, Retain::Variance(0.81)).unwrap().retained(), 2);
        assert!(fit(&x, Retain::Count(0)).is_err());
        assert!(fit(&fm(&[vec![1.0]]), Retain::Count(1)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let x = fm(&[vec![1.0, 0.5], vec![0.1, 3.0], vec![4.0, 1.0 / 3.0]]);
        let m = fit(&x, Retain::Count(1)).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("pca 2 1\n"));
        assert_eq!(PcaModel::<f64>::read_text(&buf[..]).unwrap(), m);
    }

    #[test]
    fn f32_fit() {
        let rows: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0]];
        let m = fit(&FeatureMatrix::from_rows(&rows).unwrap(), Retain::Count(2)).unwrap();
        assert!((m.component(0)[1] - 2.0 / 5f32.sqrt()).abs() < 1e-5);
    }

    fn matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-50.0f64..50.0, n), (n + 1)..40)
    }

    proptest! {
        #[test]
        fn decomposition_invariants(rows in matrix(5)) {
            let x = fm(&rows);
            let m = fit(&x, Retain::Count(5)).unwrap();
            let n = 5;
            // orthonormal rows
            for i in 0..n {
                for j in 0..n {
                    let d: f64 = m.component(i).iter().zip(m.component(j)).map(|(a, b)| a * b).sum();
                    prop_assert!((d - f64::from(u8::from(i == j))).abs() < 1e-9);
                }
            }
            let ev = m.eigenvalues();
            prop_assert!(ev.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(ev.iter().all(|&v| v >= -1e-10));
            let (_, cov) = mean_covariance(&x).unwrap();
            let trace: f64 = (0..n).map(|i| cov[i * n + i]).sum();
            prop_assert!((ev.iter().sum::<f64>() - trace).abs() <= 1e-9 * trace.max(1e-300));
            // transformed data has diagonal covariance
            let y = m.transform_matrix(&x).unwrap();
            let (_, cy) = mean_covariance(&y).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        prop_assert!(cy[i * n + j].abs() <= 1e-8, "{}", cy[i * n + j]);
                    }
                }
            }
            // reconstruction error shrinks as components are added
            let mut prev = f64::INFINITY;
            for r in 0..=n {
                let err: f64 = rows.iter().map(|row| {
                    let b = m.inverse(&m.transform(row, r).unwrap()).unwrap();
                    b.iter().zip(row).map(|(p, q)| (p - q).powi(2)).sum::<f64>()
                }).sum();
                prop_assert!(err <= prev * (1.0 + 1e-12) + 1e-12);
                prev = err;
                if r == n {
                    prop_assert!(err.sqrt() <= 1e-9 * (rows.len() as f64));
                }
            }
        }
    }
}

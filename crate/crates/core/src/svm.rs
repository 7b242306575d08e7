//! Binary kernel SVM trained by SMO on the soft-margin dual.
//!
//! The first working index is the maximal KKT violator and the second
//! maximizes the second-order gain (first index wins ties). The pair update
//! and bias follow libsvm; kernel rows come from a bounded LRU cache so the
//! Gram matrix is never held in full.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::num::{cast, Float};
use crate::texfeat::{Class, FeatureMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
    Sigmoid,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Polynomial => "polynomial",
            KernelKind::Rbf => "rbf",
            KernelKind::Sigmoid => "sigmoid",
        })
    }
}

/// Kernel family and parameters. `gamma: None` resolves to `1/n_features`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec<F> {
    pub kind: KernelKind,
    pub gamma: Option<F>,
    pub coef: F,
    pub degree: u32,
}

impl<F: Float> KernelSpec<F> {
    fn with(kind: KernelKind, degree: u32) -> Self {
        KernelSpec {
            kind,
            gamma: None,
            coef: F::one(),
            degree,
        }
    }

    pub fn linear() -> Self {
        Self::with(KernelKind::Linear, 1)
    }

    pub fn polynomial(degree: u32) -> Self {
        Self::with(KernelKind::Polynomial, degree)
    }

    /// Polynomial of degree 2.
    pub fn quadratic() -> Self {
        Self::polynomial(2)
    }

    pub fn rbf() -> Self {
        Self::with(KernelKind::Rbf, 1)
    }

    pub fn sigmoid() -> Self {
        Self::with(KernelKind::Sigmoid, 1)
    }

    pub fn with_gamma(mut self, gamma: F) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g > F::zero()) || !g.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "gamma must be positive, got {g}"
                )));
            }
        }
        if self.kind == KernelKind::Polynomial && self.degree == 0 {
            return Err(Error::InvalidArgument(
                "polynomial degree must be at least 1".into(),
            ));
        }
        if !self.coef.is_finite() {
            return Err(Error::InvalidArgument(
                "kernel coefficient must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Copy with `gamma` fixed for `n_features` inputs.
    pub fn resolved(&self, n_features: usize) -> Self {
        let mut s = *self;
        s.gamma
            .get_or_insert_with(|| F::one() / cast(n_features.max(1) as f64));
        s
    }

    fn gamma_or(&self, n: usize) -> F {
        self.gamma
            .unwrap_or_else(|| F::one() / cast(n.max(1) as f64))
    }

    /// `k(x, x')` without the length check.
    #[inline]
    pub fn eval_unchecked(&self, x: &[F], y: &[F]) -> F {
        let dot = || x.iter().zip(y).map(|(&a, &b)| a * b).sum::<F>();
        match self.kind {
            KernelKind::Linear => dot(),
            KernelKind::Polynomial => {
                (self.gamma_or(x.len()) * dot() + self.coef).powi(self.degree as i32)
            }
            KernelKind::Rbf => {
                let d2: F = x
                    .iter()
                    .zip(y)
                    .map(|(&a, &b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-self.gamma_or(x.len()) * d2).exp()
            }
            KernelKind::Sigmoid => (self.gamma_or(x.len()) * dot() + self.coef).tanh(),
        }
    }

    pub fn eval(&self, x: &[F], y: &[F]) -> Result<F> {
        if x.len() != y.len() {
            return Err(Error::dims(x.len(), y.len()));
        }
        Ok(self.eval_unchecked(x, y))
    }
}

impl<F: Float> fmt::Display for KernelSpec<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(g) = self.gamma {
            write!(f, " gamma={:.16e}", g.to_f64().unwrap_or(f64::NAN))?;
        }
        write!(
            f,
            " coef={:.16e} degree={}",
            self.coef.to_f64().unwrap_or(f64::NAN),
            self.degree
        )
    }
}

/// Accepts `linear`, `rbf`, `sigmoid`, `polynomial`, `quadratic`, `poly:<d>`,
/// optionally followed by ` gamma=<g> coef=<r> degree=<d>`.
impl<F: Float> FromStr for KernelSpec<F> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let head = parts
            .next()
            .ok_or_else(|| Error::Malformed("empty kernel spec".into()))?;
        let mut spec = match head.to_ascii_lowercase().as_str() {
            "linear" => Self::linear(),
            "rbf" => Self::rbf(),
            "sigmoid" => Self::sigmoid(),
            "polynomial" | "poly" => Self::polynomial(3),
            "quadratic" => Self::quadratic(),
            other => match other
                .strip_prefix("poly:")
                .or_else(|| other.strip_prefix("polynomial:"))
            {
                Some(d) => Self::polynomial(
                    d.parse()
                        .map_err(|_| Error::Malformed(format!("bad degree '{d}'")))?,
                ),
                None => return Err(Error::Malformed(format!("unknown kernel '{head}'"))),
            },
        };
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::Malformed(format!("bad kernel field '{p}'")))?;
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("bad value in '{p}'")))
            };
            match k {
                "gamma" => spec.gamma = Some(cast(num()?)),
                "coef" => spec.coef = cast(num()?),
                "degree" => {
                    spec.degree = v
                        .parse()
                        .map_err(|_| Error::Malformed(format!("bad value in '{p}'")))?
                }
                _ => return Err(Error::Malformed(format!("unknown kernel field '{k}'"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Symmetric `n × n` kernel matrix of `rows`.
pub fn gram_matrix<F: Float>(spec: &KernelSpec<F>, rows: &[Vec<F>]) -> Result<Vec<F>> {
    let n = rows.len();
    let spec = spec.resolved(rows.first().map_or(1, Vec::len));
    let mut g = vec![F::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let v = spec.eval(&rows[i], &rows[j])?;
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    Ok(g)
}

/// Per-column standardization learned from training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler<F> {
    pub mean: Vec<F>,
    pub scale: Vec<F>,
}

impl<F: Float> Scaler<F> {
    /// Columns with zero spread keep scale 1.
    pub fn fit(values: &[F], dims: usize) -> Self {
        let k = values.len() / dims;
        let kf = cast::<F>(k.max(1) as f64);
        let mut mean = vec![F::zero(); dims];
        for r in values.chunks_exact(dims) {
            mean.iter_mut().zip(r).for_each(|(m, &v)| *m = *m + v);
        }
        mean.iter_mut().for_each(|m| *m = *m / kf);
        let mut var = vec![F::zero(); dims];
        for r in values.chunks_exact(dims) {
            for j in 0..dims {
                let d = r[j] - mean[j];
                var[j] = var[j] + d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / kf).sqrt();
                if s > F::solver_eps() {
                    s
                } else {
                    F::one()
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn apply(&self, x: &[F]) -> Vec<F> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmParams<F> {
    pub c: F,
    pub tol: F,
    pub standardize: bool,
    /// Pair-update budget; `None` means `max(10·n, 1000)`.
    pub max_iter: Option<usize>,
    /// Kernel row cache budget in megabytes.
    pub cache_mb: usize,
}

impl<F: Float> Default for SvmParams<F> {
    fn default() -> Self {
        SvmParams {
            c: F::one(),
            tol: cast(1e-3),
            standardize: true,
            max_iter: None,
            cache_mb: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<F> {
    pub kernel: KernelSpec<F>,
    pub c: F,
    pub bias: F,
    pub scaler: Option<Scaler<F>>,
    dims: usize,
    /// Row-major support vectors, in scaled space when a scaler is present.
    support_vectors: Vec<F>,
    /// `α_i·y_i` per support vector.
    dual_coefs: Vec<F>,
    /// Training row of each support vector (empty for loaded models).
    pub support_indices: Vec<usize>,
    pub iterations: usize,
    pub objective: F,
}

/// Outcome of [`train_raw`]: the model plus the full dual vector.
#[derive(Clone, Debug)]
pub struct Solution<F> {
    pub model: SvmModel<F>,
    pub alpha: Vec<F>,
}

struct RowCache<F> {
    capacity: usize,
    rows: HashMap<usize, (Vec<F>, u64)>,
    clock: u64,
}

impl<F: Float> RowCache<F> {
    fn new(capacity: usize) -> Self {
        RowCache {
            capacity: capacity.max(2),
            rows: HashMap::new(),
            clock: 0,
        }
    }

    /// `Q[i, ·] = y_i y_j K(x_i, x_j)`.
    fn row(&mut self, i: usize, x: &[F], dims: usize, y: &[F], spec: &KernelSpec<F>) -> &[F] {
        self.clock += 1;
        let clock = self.clock;
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                let oldest = self
                    .rows
                    .iter()
                    .min_by_key(|(_, (_, t))| *t)
                    .map(|(&k, _)| k)
                    .unwrap();
                self.rows.remove(&oldest);
            }
            let xi = &x[i * dims..(i + 1) * dims];
            let r: Vec<F> = x
                .chunks_exact(dims)
                .zip(y)
                .map(|(xj, &yj)| y[i] * yj * spec.eval_unchecked(xi, xj))
                .collect();
            self.rows.insert(i, (r, clock));
        }
        let e = self.rows.get_mut(&i).unwrap();
        e.1 = clock;
        &e.0
    }
}

fn check_problem<F: Float>(x: &[F], dims: usize, y: &[F], params: &SvmParams<F>) -> Result<()> {
    if dims == 0 || x.len() != dims * y.len() {
        return Err(Error::dims(dims * y.len(), x.len()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / dims,
            col: i % dims,
        });
    }
    if y.iter().any(|&v| v != F::one() && v != -F::one()) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !(y.iter().any(|&v| v > F::zero()) && y.iter().any(|&v| v < F::zero())) {
        return Err(Error::SingleClass);
    }
    if !(params.c > F::zero()) || !params.c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(params.tol > F::zero()) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {}",
            params.tol
        )));
    }
    Ok(())
}

/// Trains on row-major `x` (`dims` columns) with labels `y ∈ {−1, +1}`.
pub fn train_raw<F: Float>(
    x: &[F],
    dims: usize,
    y: &[F],
    spec: &KernelSpec<F>,
    params: &SvmParams<F>,
) -> Result<Solution<F>> {
    check_problem(x, dims, y, params)?;
    spec.validate()?;
    let spec = spec.resolved(dims);
    let n = y.len();
    let scaler = params.standardize.then(|| Scaler::fit(x, dims));
    let xs: Vec<F> = match &scaler {
        Some(s) => x.chunks_exact(dims).flat_map(|r| s.apply(r)).collect(),
        None => x.to_vec(),
    };
    let c = params.c;
    let tol = params.tol;
    let tau = cast::<F>(1e-12);
    let max_iter = params.max_iter.unwrap_or((10 * n).max(1000));
    let row_bytes = n * std::mem::size_of::<F>();
    let mut cache = RowCache::new(params.cache_mb * (1 << 20) / row_bytes.max(1));
    let qd: Vec<F> = (0..n)
        .map(|i| {
            let xi = &xs[i * dims..(i + 1) * dims];
            spec.eval_unchecked(xi, xi)
        })
        .collect();

    let mut alpha = vec![F::zero(); n];
    let mut grad = vec![-F::one(); n];
    let in_up = |a: F, yi: F| (yi > F::zero() && a < c) || (yi < F::zero() && a > F::zero());
    let in_low = |a: F, yi: F| (yi > F::zero() && a > F::zero()) || (yi < F::zero() && a < c);
    // i: maximal violator; gap: its violation against the minimum over I_low
    let violator = |alpha: &[F], grad: &[F]| {
        let (mut gmax, mut i) = (F::neg_infinity(), usize::MAX);
        let mut gmin = F::infinity();
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
            }
        }
        (i, gmax, gmax - gmin)
    };

    let mut iter = 0usize;
    let mut rebuilt = false;
    loop {
        let (i, gmax, gap) = violator(&alpha, &grad);
        if i == usize::MAX || gap <= tol {
            // incremental gradients drift; confirm with an exact rebuild once
            if rebuilt {
                break;
            }
            grad = vec![-F::one(); n];
            for t in 0..n {
                if alpha[t] != F::zero() {
                    let (a, row) = (alpha[t], cache.row(t, &xs, dims, y, &spec));
                    grad.iter_mut().zip(row).for_each(|(g, &q)| *g = *g + a * q);
                }
            }
            rebuilt = true;
            continue;
        }
        rebuilt = false;
        if iter >= max_iter {
            return Err(Error::NotConverged(iter));
        }
        iter += 1;
        let qi: Vec<F> = cache.row(i, &xs, dims, y, &spec).to_vec();
        // j: largest second-order objective gain among violating partners
        let mut j = usize::MAX;
        let mut best = F::infinity();
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let b = gmax + y[t] * grad[t];
            if b <= F::zero() {
                continue;
            }
            let mut a = qd[i] + qd[t] - cast::<F>(2.0) * y[i] * y[t] * qi[t];
            if a <= F::zero() {
                a = tau;
            }
            let gain = -(b * b) / a;
            if gain < best {
                best = gain;
                j = t;
            }
        }
        let qj = cache.row(j, &xs, dims, y, &spec);
        let (ai, aj) = (alpha[i], alpha[j]);
        let (mut ni, mut nj) = (ai, aj);
        if y[i] != y[j] {
            let mut quad = qd[i] + qd[j] + cast::<F>(2.0) * qi[j];
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ni = ni + delta;
            nj = nj + delta;
            if diff > F::zero() {
                if nj < F::zero() {
                    nj = F::zero();
                    ni = diff;
                }
            } else if ni < F::zero() {
                ni = F::zero();
                nj = -diff;
            }
            if diff > F::zero() {
                if ni > c {
                    ni = c;
                    nj = c - diff;
                }
            } else if nj > c {
                nj = c;
                ni = c + diff;
            }
        } else {
            let mut quad = qd[i] + qd[j] - cast::<F>(2.0) * qi[j];
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ni = ni - delta;
            nj = nj + delta;
            if sum > c {
                if ni > c {
                    ni = c;
                    nj = sum - c;
                }
            } else if nj < F::zero() {
                nj = F::zero();
                ni = sum;
            }
            if sum > c {
                if nj > c {
                    nj = c;
                    ni = sum - c;
                }
            } else if ni < F::zero() {
                ni = F::zero();
                nj = sum;
            }
        }
        alpha[i] = ni;
        alpha[j] = nj;
        let (di, dj) = (ni - ai, nj - aj);
        for t in 0..n {
            grad[t] = grad[t] + qi[t] * di + qj[t] * dj;
        }
    }

    // bias: mean of −y_i G_i over free vectors, else the midpoint of the feasible range
    let (mut ub, mut lb) = (F::infinity(), F::neg_infinity());
    let (mut sum, mut free) = (F::zero(), 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= F::zero() {
            if y[t] > F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum = sum + yg;
            free += 1;
        }
    }
    let rho = if free > 0 {
        sum / cast(free as f64)
    } else {
        (ub + lb) / cast(2.0)
    };
    let objective = alpha
        .iter()
        .zip(&grad)
        .map(|(&a, &g)| a * (F::one() - g))
        .sum::<F>()
        / cast(2.0);
    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > F::zero()).collect();
    let model = SvmModel {
        kernel: spec,
        c,
        bias: -rho,
        scaler,
        dims,
        support_vectors: support_indices
            .iter()
            .flat_map(|&t| xs[t * dims..(t + 1) * dims].iter().copied())
            .collect(),
        dual_coefs: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        support_indices,
        iterations: iter,
        objective,
    };
    Ok(Solution { model, alpha })
}

/// Trains on a labeled feature matrix (lesion is the positive class).
pub fn train<F: Float>(
    x: &FeatureMatrix<F>,
    spec: &KernelSpec<F>,
    params: &SvmParams<F>,
) -> Result<SvmModel<F>> {
    let labels = x
        .labels()
        .ok_or_else(|| Error::InvalidArgument("training rows carry no labels".into()))?;
    let y: Vec<F> = labels.iter().map(|c| cast(c.sign())).collect();
    train_raw(x.values(), x.dims(), &y, spec, params).map(|s| s.model)
}

impl<F: Float> SvmModel<F> {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_support(&self) -> usize {
        self.dual_coefs.len()
    }

    pub fn dual_coefs(&self) -> &[F] {
        &self.dual_coefs
    }

    pub fn support_vector(&self, k: usize) -> &[F] {
        &self.support_vectors[k * self.dims..(k + 1) * self.dims]
    }

    /// `f(x) = Σ α_i y_i k(x, x_i) + b`.
    pub fn decision(&self, x: &[F]) -> Result<F> {
        if x.len() != self.dims {
            return Err(Error::dims(self.dims, x.len()));
        }
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.apply(x);
                &scaled[..]
            }
            None => x,
        };
        Ok(self
            .support_vectors
            .chunks_exact(self.dims)
            .zip(&self.dual_coefs)
            .map(|(sv, &a)| a * self.kernel.eval_unchecked(sv, x))
            .sum::<F>()
            + self.bias)
    }

    /// Sign of the decision value; zero counts as lesion.
    pub fn predict(&self, x: &[F]) -> Result<Class> {
        Ok(if self.decision(x)? >= F::zero() {
            Class::Lesion
        } else {
            Class::Normal
        })
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let f = |v: F| format!("{:.16e}", v.to_f64().unwrap_or(f64::NAN));
        let join = |v: &[F]| v.iter().map(|&x| f(x)).collect::<Vec<_>>().join(" ");
        writeln!(w, "kernel {}", self.kernel)?;
        writeln!(w, "c {}", f(self.c))?;
        writeln!(w, "bias {}", f(self.bias))?;
        writeln!(w, "dims {}", self.dims)?;
        match &self.scaler {
            Some(s) => {
                writeln!(w, "scaler_mean {}", join(&s.mean))?;
                writeln!(w, "scaler_scale {}", join(&s.scale))?;
            }
            None => writeln!(w, "scaler none")?,
        }
        for k in 0..self.n_support() {
            writeln!(
                w,
                "sv {} {}",
                f(self.dual_coefs[k]),
                join(self.support_vector(k))
            )?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let bad = |m: String| Error::Malformed(m);
        let nums = |s: &str| -> Result<Vec<F>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map(cast::<F>)
                        .map_err(|_| Error::Malformed(format!("bad number '{t}'")))
                })
                .collect()
        };
        let (mut kernel, mut c, mut bias, mut dims) = (None, None, None, None);
        let (mut smean, mut sscale, mut no_scaler) = (None, None, false);
        let (mut svs, mut coefs) = (Vec::new(), Vec::new());
        for line in r.lines() {
            let line = line.map_err(|e| Error::io("<svm model>", e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "kernel" => kernel = Some(rest.parse::<KernelSpec<F>>()?),
                "c" => c = nums(rest)?.first().copied(),
                "bias" => bias = nums(rest)?.first().copied(),
                "dims" => {
                    dims = Some(
                        rest.trim()
                            .parse::<usize>()
                            .map_err(|_| bad(format!("bad dims '{rest}'")))?,
                    )
                }
                "scaler" if rest.trim() == "none" => no_scaler = true,
                "scaler_mean" => smean = Some(nums(rest)?),
                "scaler_scale" => sscale = Some(nums(rest)?),
                "sv" => {
                    let v = nums(rest)?;
                    let (&coef, feats) =
                        v.split_first().ok_or_else(|| bad("empty sv line".into()))?;
                    coefs.push(coef);
                    svs.push(feats.to_vec());
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        let missing = |k: &str| bad(format!("missing '{k}'"));
        let dims = dims.ok_or_else(|| missing("dims"))?;
        if let Some(v) = svs.iter().find(|v| v.len() != dims) {
            return Err(Error::dims(dims, v.len()));
        }
        let scaler = match (smean, sscale, no_scaler) {
            (Some(mean), Some(scale), false) if mean.len() == dims && scale.len() == dims => {
                Some(Scaler { mean, scale })
            }
            (None, None, true) => None,
            _ => return Err(bad("inconsistent scaler lines".into())),
        };
        Ok(SvmModel {
            kernel: kernel.ok_or_else(|| missing("kernel"))?,
            c: c.ok_or_else(|| missing("c"))?,
            bias: bias.ok_or_else(|| missing("bias"))?,
            scaler,
            dims,
            support_vectors: svs.concat(),
            dual_coefs: coefs,
            support_indices: Vec::new(),
            iterations: 0,
            objective: F::zero(),
        })
    }
}

/// KKT check of a trained model against its training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    pub violations: usize,
    pub max_violation: f64,
}

impl KktReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// `α=0 ⇒ y f ≥ 1−tol`, `α=C ⇒ y f ≤ 1+tol`, free `⇒ |y f − 1| ≤ tol`, with
/// `α` taken from `model.support_indices`.
pub fn kkt_audit<F: Float>(model: &SvmModel<F>, x: &[F], y: &[F], tol: f64) -> Result<KktReport> {
    let dims = model.dims();
    if x.len() != dims * y.len() {
        return Err(Error::dims(dims * y.len(), x.len()));
    }
    let mut alpha = vec![0.0f64; y.len()];
    for (k, &t) in model.support_indices.iter().enumerate() {
        let a = model.dual_coefs[k].to_f64().unwrap_or(f64::NAN).abs();
        *alpha
            .get_mut(t)
            .ok_or_else(|| Error::InvalidArgument("support index out of range".into()))? = a;
    }
    let c = model.c.to_f64().unwrap_or(f64::NAN);
    let mut report = KktReport {
        violations: 0,
        max_violation: 0.0,
    };
    for (t, row) in x.chunks_exact(dims).enumerate() {
        let m =
            y[t].to_f64().unwrap_or(f64::NAN) * model.decision(row)?.to_f64().unwrap_or(f64::NAN);
        let v = if alpha[t] == 0.0 {
            (1.0 - m).max(0.0)
        } else if alpha[t] >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        if v > tol {
            report.violations += 1;
        }
        report.max_violation = report.max_violation.max(v);
    }
    Ok(report)
}

/// `Σα − ½ ΣΣ α_i α_j y_i y_j K_ij` for a given dual vector.
pub fn dual_objective<F: Float>(alpha: &[F], y: &[F], gram: &[F]) -> F {
    let n = alpha.len();
    let mut quad = F::zero();
    for i in 0..n {
        for j in 0..n {
            quad = quad + alpha[i] * alpha[j] * y[i] * y[j] * gram[i * n + j];
        }
    }
    alpha.iter().copied().sum::<F>() - quad / cast(2.0)
}

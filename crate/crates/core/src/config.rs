//! Pipeline settings read from `key = value` text.

use std::fmt::Write as _;

use crate::brainx::{Connectivity, Element, ExtractParams};
use crate::dwt::{Band, WaveletKind};
use crate::error::{Error, Result};
use crate::evalx::CvMethod;
use crate::pca::Retain;
use crate::slic::{DistanceMode, SlicParams};
use crate::svm::{KernelSpec, SvmParams};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub threshold: Option<u8>,
    pub element: Element,
    pub connectivity: Connectivity,
    pub k: usize,
    pub m: f64,
    pub slic_iters: usize,
    pub slic_tol: f64,
    pub distance: DistanceMode,
    pub bright_quantile: f64,
    /// Fraction of a superpixel's pixels that must lie in the brain mask.
    pub brain_fraction: f64,
    pub wavelet: WaveletKind,
    pub levels: usize,
    pub sources: Vec<Band>,
    pub overlap: f64,
    pub pca: Retain,
    pub kernel: KernelSpec<f64>,
    pub c: f64,
    pub tol: f64,
    pub standardize: bool,
    pub cv: CvMethod,
    pub seed: u64,
    pub table_seeds: Vec<u64>,
    pub min_lesion_count: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            threshold: None,
            element: Element::Disc(2),
            connectivity: Connectivity::Four,
            k: 500,
            m: 5.0,
            slic_iters: 10,
            slic_tol: 0.5,
            distance: DistanceMode::Linear,
            bright_quantile: 0.9,
            brain_fraction: 0.5,
            wavelet: WaveletKind::Haar,
            levels: 2,
            sources: Band::level_set(1).to_vec(),
            overlap: 0.5,
            pca: Retain::Count(10),
            kernel: KernelSpec::polynomial(3),
            c: 1.0,
            tol: 1e-3,
            standardize: true,
            cv: CvMethod::KFold(10),
            seed: 0,
            table_seeds: vec![0],
            min_lesion_count: 1,
        }
    }
}

fn parse_band(s: &str) -> Result<Band> {
    let bad = || Error::InvalidArgument(format!("bad subband '{s}'"));
    let mut chars = s.trim().chars();
    let kind = chars.next().ok_or_else(bad)?;
    let level: usize = chars.as_str().parse().map_err(|_| bad())?;
    if level == 0 {
        return Err(bad());
    }
    Ok(match kind.to_ascii_uppercase() {
        'A' => Band::Approx(level),
        'H' => Band::Horizontal(level),
        'V' => Band::Vertical(level),
        'D' => Band::Diagonal(level),
        _ => return Err(bad()),
    })
}

fn parse_element(s: &str) -> Result<Element> {
    let bad = || {
        Error::InvalidArgument(format!(
            "bad structuring element '{s}' (disc:<r> or square:<r>)"
        ))
    };
    let (kind, r) = s.split_once(':').ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "disc" => Ok(Element::Disc(r)),
        "square" => Ok(Element::Square(r)),
        _ => Err(bad()),
    }
}

fn element_text(e: Element) -> String {
    match e {
        Element::Disc(r) => format!("disc:{r}"),
        Element::Square(r) => format!("square:{r}"),
    }
}

fn kernel_text(k: &KernelSpec<f64>) -> String {
    use crate::svm::KernelKind::*;
    match (k.kind, k.degree) {
        (Polynomial, 2) => "quadratic".to_string(),
        (Polynomial, 3) => "polynomial".to_string(),
        (Polynomial, d) => format!("poly:{d}"),
        (kind, _) => kind.to_string(),
    }
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| Error::InvalidArgument(format!("{key}: expected {what}, got '{v}'"));
        let num = |what| v.parse::<f64>().map_err(|_| bad(what));
        let int = |what| v.parse::<usize>().map_err(|_| bad(what));
        match key.trim() {
            "threshold" => {
                self.threshold = match v {
                    "auto" | "otsu" => None,
                    _ => Some(v.parse().map_err(|_| bad("auto or 0..255"))?),
                }
            }
            "element" => self.element = parse_element(v)?,
            "connectivity" => {
                self.connectivity = match v {
                    "4" => Connectivity::Four,
                    "8" => Connectivity::Eight,
                    _ => return Err(bad("4 or 8")),
                }
            }
            "k" => self.k = int("an integer")?,
            "m" => self.m = num("a number")?,
            "slic_iters" => self.slic_iters = int("an integer")?,
            "slic_tol" => self.slic_tol = num("a number")?,
            "distance" => {
                self.distance = match v {
                    "linear" => DistanceMode::Linear,
                    "squared" => DistanceMode::Squared,
                    _ => return Err(bad("linear or squared")),
                }
            }
            "bright_quantile" => self.bright_quantile = num("a number")?,
            "brain_fraction" => self.brain_fraction = num("a number")?,
            "wavelet" => self.wavelet = v.parse()?,
            "levels" => self.levels = int("an integer")?,
            "sources" => self.sources = v.split(',').map(parse_band).collect::<Result<_>>()?,
            "overlap" => self.overlap = num("a number")?,
            "pca_r" => self.pca = Retain::Count(int("an integer")?),
            "pca_variance" => self.pca = Retain::Variance(num("a number")?),
            "kernel" => {
                let gamma = self.kernel.gamma;
                let coef = self.kernel.coef;
                self.kernel = v.parse()?;
                self.kernel.gamma = gamma;
                self.kernel.coef = coef;
            }
            "gamma" => {
                self.kernel.gamma = match v {
                    "auto" => None,
                    _ => Some(num("auto or a number")?),
                }
            }
            "coef" => self.kernel.coef = num("a number")?,
            "degree" => self.kernel.degree = v.parse().map_err(|_| bad("an integer"))?,
            "c" | "C" => self.c = num("a number")?,
            "tol" => self.tol = num("a number")?,
            "standardize" => self.standardize = v.parse().map_err(|_| bad("true or false"))?,
            "cv" => self.cv = v.parse()?,
            "seed" => self.seed = v.parse().map_err(|_| bad("an integer"))?,
            "table_seeds" => {
                self.table_seeds = v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<u64>()
                            .map_err(|_| bad("comma-separated integers"))
                    })
                    .collect::<Result<_>>()?
            }
            "min_lesion_count" => self.min_lesion_count = int("an integer")?,
            other => return Err(Error::InvalidArgument(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }

    /// Defaults overridden by `key = value` lines (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Malformed(format!("config line {}: expected key = value", n + 1))
            })?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    /// Fully resolved settings in the same `key = value` form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv(
            "threshold",
            self.threshold.map_or("auto".into(), |t| t.to_string()),
        );
        kv("element", element_text(self.element));
        kv(
            "connectivity",
            match self.connectivity {
                Connectivity::Four => "4".into(),
                Connectivity::Eight => "8".into(),
            },
        );
        kv("k", self.k.to_string());
        kv("m", self.m.to_string());
        kv("slic_iters", self.slic_iters.to_string());
        kv("slic_tol", self.slic_tol.to_string());
        kv(
            "distance",
            match self.distance {
                DistanceMode::Linear => "linear".into(),
                DistanceMode::Squared => "squared".into(),
            },
        );
        kv("bright_quantile", self.bright_quantile.to_string());
        kv("brain_fraction", self.brain_fraction.to_string());
        kv("wavelet", self.wavelet.to_string());
        kv("levels", self.levels.to_string());
        kv(
            "sources",
            self.sources
                .iter()
                .map(|b| b.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("overlap", self.overlap.to_string());
        match self.pca {
            Retain::Count(r) => kv("pca_r", r.to_string()),
            Retain::Variance(f) => kv("pca_variance", f.to_string()),
        }
        kv("kernel", kernel_text(&self.kernel));
        kv(
            "gamma",
            self.kernel.gamma.map_or("auto".into(), |g| g.to_string()),
        );
        kv("coef", self.kernel.coef.to_string());
        kv("degree", self.kernel.degree.to_string());
        kv("c", self.c.to_string());
        kv("tol", self.tol.to_string());
        kv("standardize", self.standardize.to_string());
        kv("cv", self.cv.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "table_seeds",
            self.table_seeds
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("min_lesion_count", self.min_lesion_count.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.k < 4 {
            return fail(format!("k must be at least 4, got {}", self.k));
        }
        if !(1.0..=20.0).contains(&self.m) {
            return fail(format!("m must lie in [1, 20], got {}", self.m));
        }
        if self.slic_tol.is_nan() || self.slic_tol < 0.0 {
            return fail("slic_tol must be non-negative".into());
        }
        for (name, v) in [
            ("bright_quantile", self.bright_quantile),
            ("brain_fraction", self.brain_fraction),
            ("overlap", self.overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.levels == 0 {
            return fail("levels must be at least 1".into());
        }
        if self.sources.is_empty() {
            return fail("sources must name at least one subband".into());
        }
        if let Some(b) = self.sources.iter().find(|b| b.level() > self.levels) {
            return fail(format!(
                "source {} needs {} levels, only {} configured",
                b.name(),
                b.level(),
                self.levels
            ));
        }
        let dims = 4 * self.sources.len();
        match self.pca {
            Retain::Count(r) if r == 0 || r > dims => {
                return fail(format!("pca_r must lie in 1..={dims}, got {r}"))
            }
            Retain::Variance(f) if !(f > 0.0 && f <= 1.0) => {
                return fail(format!("pca_variance must lie in (0, 1], got {f}"));
            }
            _ => {}
        }
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return fail(format!("c must be positive, got {}", self.c));
        }
        if !(self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if let CvMethod::KFold(k) = self.cv {
            if k < 2 {
                return fail(format!("k-fold needs k ≥ 2, got {k}"));
            }
        }
        if self.table_seeds.is_empty() {
            return fail("table_seeds must not be empty".into());
        }
        if self.min_lesion_count == 0 {
            return fail("min_lesion_count must be at least 1".into());
        }
        Ok(())
    }

    pub fn extract_params(&self) -> ExtractParams {
        ExtractParams {
            threshold: self.threshold,
            element: self.element,
            connectivity: self.connectivity,
        }
    }

    pub fn slic_params(&self) -> SlicParams<f64> {
        SlicParams {
            k: self.k,
            m: self.m,
            max_iters: self.slic_iters,
            tol: self.slic_tol,
            distance: self.distance,
        }
    }

    pub fn svm_params(&self) -> SvmParams<f64> {
        SvmParams {
            c: self.c,
            tol: self.tol,
            standardize: self.standardize,
            ..SvmParams::default()
        }
    }
}

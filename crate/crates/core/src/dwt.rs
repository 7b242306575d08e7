//! Separable 2D discrete wavelet transform with periodic extension.
//!
//! Filters are kept as unnormalized integer-friendly taps `u` together with
//! `norm_sq = 1 / Σ u²`; the orthonormal lowpass is `h0 = u·√norm_sq`. The
//! 2D transform filters rows and columns with the raw taps and applies
//! `norm_sq` once, so Haar on integer rasters is exact.

use crate::error::{Error, Result};
use crate::imgcore::Raster;
use crate::num::{cast, Float};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WaveletKind {
    #[default]
    Haar,
    Db2,
}

impl std::str::FromStr for WaveletKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(WaveletKind::Haar),
            "db2" => Ok(WaveletKind::Db2),
            other => Err(Error::InvalidArgument(format!("unknown wavelet '{other}'"))),
        }
    }
}

impl std::fmt::Display for WaveletKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WaveletKind::Haar => "haar",
            WaveletKind::Db2 => "db2",
        })
    }
}

/// Orthonormal two-channel filter bank.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletSpec<F> {
    pub kind: WaveletKind,
    /// Unnormalized lowpass taps.
    low_taps: Vec<F>,
    /// Unnormalized highpass taps, `(-1)^i · low[L-1-i]`.
    high_taps: Vec<F>,
    norm_sq: F,
}

impl<F: Float> WaveletSpec<F> {
    pub fn new(kind: WaveletKind) -> Self {
        let low: Vec<F> = match kind {
            WaveletKind::Haar => vec![F::one(), F::one()],
            WaveletKind::Db2 => {
                let s3 = cast::<F>(3.0).sqrt();
                let one = F::one();
                let three = cast::<F>(3.0);
                vec![one + s3, three + s3, three - s3, one - s3]
            }
        };
        let norm_sq = match kind {
            WaveletKind::Haar => cast(0.5),
            WaveletKind::Db2 => cast(1.0 / 32.0),
        };
        let len = low.len();
        let high = (0..len)
            .map(|i| {
                if i % 2 == 0 {
                    low[len - 1 - i]
                } else {
                    -low[len - 1 - i]
                }
            })
            .collect();
        WaveletSpec {
            kind,
            low_taps: low,
            high_taps: high,
            norm_sq,
        }
    }

    pub fn haar() -> Self {
        Self::new(WaveletKind::Haar)
    }

    pub fn db2() -> Self {
        Self::new(WaveletKind::Db2)
    }

    pub fn filter_len(&self) -> usize {
        self.low_taps.len()
    }

    /// Normalized analysis lowpass `h0`.
    pub fn h0(&self) -> Vec<F> {
        let s = self.norm_sq.sqrt();
        self.low_taps.iter().map(|&u| u * s).collect()
    }

    /// Normalized analysis highpass `g0`.
    pub fn g0(&self) -> Vec<F> {
        let s = self.norm_sq.sqrt();
        self.high_taps.iter().map(|&u| u * s).collect()
    }
}

/// Periodic filter-and-downsample with raw taps. `out[k] = Σ t[i]·x[(2k+i) mod n]`.
fn analyze_raw<F: Float>(x: &[F], low: &[F], high: &[F], approx: &mut [F], detail: &mut [F]) {
    let n = x.len();
    for k in 0..approx.len() {
        let (mut a, mut d) = (F::zero(), F::zero());
        for (i, (&l, &h)) in low.iter().zip(high).enumerate() {
            let v = x[(2 * k + i) % n];
            a = a + l * v;
            d = d + h * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
}

/// Transpose of [`analyze_raw`]: accumulates into `x`.
fn synthesize_raw<F: Float>(approx: &[F], detail: &[F], low: &[F], high: &[F], x: &mut [F]) {
    let n = x.len();
    x.iter_mut().for_each(|v| *v = F::zero());
    for k in 0..approx.len() {
        for (i, (&l, &h)) in low.iter().zip(high).enumerate() {
            let j = (2 * k + i) % n;
            x[j] = x[j] + l * approx[k] + h * detail[k];
        }
    }
}

/// One level of the 1D orthonormal DWT with periodic boundaries.
/// Odd lengths are padded by repeating the last sample.
pub fn analyze_1d<F: Float>(signal: &[F], spec: &WaveletSpec<F>) -> Result<(Vec<F>, Vec<F>)> {
    if signal.len() < spec.filter_len() {
        return Err(Error::InvalidArgument(format!(
            "signal of length {} is shorter than the {}-tap filter",
            signal.len(),
            spec.filter_len()
        )));
    }
    let mut x = signal.to_vec();
    if x.len() % 2 == 1 {
        x.push(*signal.last().unwrap());
    }
    let half = x.len() / 2;
    let (mut a, mut d) = (vec![F::zero(); half], vec![F::zero(); half]);
    analyze_raw(&x, &spec.low_taps, &spec.high_taps, &mut a, &mut d);
    let s = spec.norm_sq.sqrt();
    a.iter_mut().chain(d.iter_mut()).for_each(|v| *v = *v * s);
    Ok((a, d))
}

/// Inverse of [`analyze_1d`] for an even-length signal.
pub fn synthesize_1d<F: Float>(
    approx: &[F],
    detail: &[F],
    spec: &WaveletSpec<F>,
) -> Result<Vec<F>> {
    if approx.len() != detail.len() {
        return Err(Error::dims(approx.len(), detail.len()));
    }
    let mut x = vec![F::zero(); approx.len() * 2];
    synthesize_raw(approx, detail, &spec.low_taps, &spec.high_taps, &mut x);
    let s = spec.norm_sq.sqrt();
    x.iter_mut().for_each(|v| *v = *v * s);
    Ok(x)
}

/// Subbands of one decomposition level.
#[derive(Clone, Debug, PartialEq)]
pub struct Level<F> {
    /// Size of the raster this level analyzed (before padding).
    pub input_size: (usize, usize),
    /// LL
    pub approx: Raster<F>,
    /// LH: row lowpass, column highpass.
    pub horizontal: Raster<F>,
    /// HL: row highpass, column lowpass.
    pub vertical: Raster<F>,
    /// HH
    pub diagonal: Raster<F>,
}

/// Multi-level decomposition. `levels[0]` is level 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SubbandSet<F> {
    pub wavelet: WaveletKind,
    pub levels: Vec<Level<F>>,
}

/// Named subband used as a feature source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Approx(usize),
    Horizontal(usize),
    Vertical(usize),
    Diagonal(usize),
}

impl Band {
    pub fn level(self) -> usize {
        match self {
            Band::Approx(l) | Band::Horizontal(l) | Band::Vertical(l) | Band::Diagonal(l) => l,
        }
    }

    pub fn name(self) -> String {
        let (c, l) = match self {
            Band::Approx(l) => ('A', l),
            Band::Horizontal(l) => ('H', l),
            Band::Vertical(l) => ('V', l),
            Band::Diagonal(l) => ('D', l),
        };
        format!("{c}{l}")
    }

    /// `[A, H, V, D]` of one level.
    pub fn level_set(level: usize) -> [Band; 4] {
        [
            Band::Approx(level),
            Band::Horizontal(level),
            Band::Vertical(level),
            Band::Diagonal(level),
        ]
    }
}

impl<F: Float> SubbandSet<F> {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn band(&self, band: Band) -> Option<&Raster<F>> {
        let lvl = self.levels.get(band.level().checked_sub(1)?)?;
        Some(match band {
            Band::Approx(_) => &lvl.approx,
            Band::Horizontal(_) => &lvl.horizontal,
            Band::Vertical(_) => &lvl.vertical,
            Band::Diagonal(_) => &lvl.diagonal,
        })
    }

    /// Deepest approximation plus every detail band: the coefficients that
    /// determine the signal.
    pub fn coefficients(&self) -> impl Iterator<Item = F> + '_ {
        let deepest = self.levels.last().map(|l| l.approx.data()).unwrap_or(&[]);
        deepest
            .iter()
            .copied()
            .chain(self.levels.iter().flat_map(|l| {
                l.horizontal
                    .data()
                    .iter()
                    .chain(l.vertical.data())
                    .chain(l.diagonal.data())
                    .copied()
            }))
    }

    pub fn energy(&self) -> F {
        self.coefficients().map(|c| c * c).sum()
    }
}

fn pad_even<F: Float>(img: &Raster<F>) -> Raster<F> {
    let (w, h) = img.dims();
    let (pw, ph) = (w + w % 2, h + h % 2);
    if (pw, ph) == (w, h) {
        return img.clone();
    }
    Raster::from_fn(pw, ph, |x, y| img.get(x.min(w - 1), y.min(h - 1)))
}

fn dwt2_level<F: Float>(img: &Raster<F>, spec: &WaveletSpec<F>) -> Level<F> {
    let input_size = img.dims();
    let padded = pad_even(img);
    let (w, h) = padded.dims();
    let (hw, hh) = (w / 2, h / 2);
    // rows: left half lowpass, right half highpass
    let mut rows = vec![F::zero(); w * h];
    for y in 0..h {
        let src = &padded.data()[y * w..(y + 1) * w];
        let (lo, hi) = rows[y * w..(y + 1) * w].split_at_mut(hw);
        analyze_raw(src, &spec.low_taps, &spec.high_taps, lo, hi);
    }
    let mut ll = vec![F::zero(); hw * hh];
    let mut lh = vec![F::zero(); hw * hh];
    let mut hl = vec![F::zero(); hw * hh];
    let mut hh_ = vec![F::zero(); hw * hh];
    let mut col = vec![F::zero(); h];
    let (mut cl, mut ch) = (vec![F::zero(); hh], vec![F::zero(); hh]);
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        analyze_raw(&col, &spec.low_taps, &spec.high_taps, &mut cl, &mut ch);
        let s = spec.norm_sq;
        for k in 0..hh {
            if x < hw {
                ll[k * hw + x] = cl[k] * s;
                lh[k * hw + x] = ch[k] * s;
            } else {
                hl[k * hw + x - hw] = cl[k] * s;
                hh_[k * hw + x - hw] = ch[k] * s;
            }
        }
    }
    let mk = |d| Raster::new(hw, hh, d).expect("finite input gives finite subbands");
    Level {
        input_size,
        approx: mk(ll),
        horizontal: mk(lh),
        vertical: mk(hl),
        diagonal: mk(hh_),
    }
}

/// `levels`-deep 2D DWT: rows then columns; level `j+1` analyzes level `j`'s approximation.
pub fn dwt2<F: Float>(
    img: &Raster<F>,
    spec: &WaveletSpec<F>,
    levels: usize,
) -> Result<SubbandSet<F>> {
    if levels == 0 {
        return Err(Error::InvalidArgument(
            "at least one level is required".into(),
        ));
    }
    let min = 1usize << levels;
    if img.width() < min || img.height() < min {
        return Err(Error::InvalidArgument(format!(
            "{}x{} image is too small for {levels} levels",
            img.width(),
            img.height()
        )));
    }
    let mut out: Vec<Level<F>> = Vec::with_capacity(levels);
    let mut current = img.clone();
    for _ in 0..levels {
        let (w, h) = current.dims();
        if w < spec.filter_len() || h < spec.filter_len() {
            return Err(Error::InvalidArgument(format!(
                "{w}x{h} raster is too small for a {}-tap filter",
                spec.filter_len()
            )));
        }
        let lvl = dwt2_level(&current, spec);
        current = lvl.approx.clone();
        out.push(lvl);
    }
    Ok(SubbandSet {
        wavelet: spec.kind,
        levels: out,
    })
}

fn idwt2_level<F: Float>(
    approx: &Raster<F>,
    lvl: &Level<F>,
    spec: &WaveletSpec<F>,
) -> Result<Raster<F>> {
    let (hw, hh) = approx.dims();
    for band in [&lvl.horizontal, &lvl.vertical, &lvl.diagonal] {
        if band.dims() != (hw, hh) {
            return Err(Error::dims(
                format!("{hw}x{hh}"),
                format!("{}x{}", band.width(), band.height()),
            ));
        }
    }
    let (ow, oh) = lvl.input_size;
    if ow.div_ceil(2) != hw || oh.div_ceil(2) != hh {
        return Err(Error::dims(
            format!("{}x{}", ow.div_ceil(2), oh.div_ceil(2)),
            format!("{hw}x{hh}"),
        ));
    }
    let (w, h) = (hw * 2, hh * 2);
    let mut rows = vec![F::zero(); w * h];
    let mut col = vec![F::zero(); h];
    let (mut cl, mut ch) = (vec![F::zero(); hh], vec![F::zero(); hh]);
    for x in 0..w {
        let (lo, hi) = if x < hw {
            (approx, &lvl.horizontal)
        } else {
            (&lvl.vertical, &lvl.diagonal)
        };
        let xx = x % hw;
        for k in 0..hh {
            cl[k] = lo.get(xx, k);
            ch[k] = hi.get(xx, k);
        }
        synthesize_raw(&cl, &ch, &spec.low_taps, &spec.high_taps, &mut col);
        for y in 0..h {
            rows[y * w + x] = col[y];
        }
    }
    let mut out = vec![F::zero(); ow * oh];
    let mut line = vec![F::zero(); w];
    for y in 0..oh {
        let r = &rows[y * w..(y + 1) * w];
        synthesize_raw(
            &r[..hw],
            &r[hw..],
            &spec.low_taps,
            &spec.high_taps,
            &mut line,
        );
        for x in 0..ow {
            out[y * ow + x] = line[x] * spec.norm_sq;
        }
    }
    Raster::new(ow, oh, out)
}

/// Synthesis filter bank; inverts [`dwt2`] (crops any padding).
pub fn idwt2<F: Float>(bands: &SubbandSet<F>, spec: &WaveletSpec<F>) -> Result<Raster<F>> {
    let deepest = bands
        .levels
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty subband set".into()))?;
    let mut current = deepest.approx.clone();
    for lvl in bands.levels.iter().rev() {
        current = idwt2_level(&current, lvl, spec)?;
    }
    Ok(current)
}

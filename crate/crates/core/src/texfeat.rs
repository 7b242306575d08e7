//! Histogram and statistical moment texture features per superpixel.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::dwt::{Band, SubbandSet};
use crate::error::{Error, Result};
use crate::imgcore::BinaryMask;
use crate::num::{cast, Float};
use crate::slic::{LabelMap, BACKGROUND};

/// Mean, variance, skewness and excess kurtosis of a region.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RegionStats<F> {
    pub mean: F,
    pub variance: F,
    pub skewness: F,
    pub kurtosis: F,
}

impl<F: Float> RegionStats<F> {
    pub fn to_array(self) -> [F; 4] {
        [self.mean, self.variance, self.skewness, self.kurtosis]
    }
}

/// `p[k] = n_k / n` over `levels` equal bins spanning `[0, 256)`.
pub fn histogram_pdf<F: Float>(values: &[F], levels: usize) -> Result<Vec<F>> {
    if values.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    let mut counts = vec![0usize; levels];
    let scale = cast::<F>(levels as f64) / cast(256.0);
    for &v in values {
        let k = (v * scale).floor().to_f64().unwrap_or(0.0);
        counts[(k.max(0.0) as usize).min(levels - 1)] += 1;
    }
    let n = cast::<F>(values.len() as f64);
    Ok(counts
        .into_iter()
        .map(|c| cast::<F>(c as f64) / n)
        .collect())
}

/// Moments by direct summation with weight `1/n` per value. Regions with
/// zero spread report zero skewness and kurtosis.
pub fn region_moments<F: Float>(values: &[F]) -> Result<RegionStats<F>> {
    let (&first, rest) = values.split_first().ok_or(Error::EmptyRegion)?;
    if rest.iter().all(|&v| v == first) {
        return Ok(RegionStats {
            mean: first,
            ..RegionStats::default()
        });
    }
    let n = cast::<F>(values.len() as f64);
    let mean = values.iter().copied().sum::<F>() / n;
    let (mut m2, mut m3, mut m4) = (F::zero(), F::zero(), F::zero());
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 == F::zero() {
        return Ok(RegionStats {
            mean,
            ..RegionStats::default()
        });
    }
    Ok(RegionStats {
        mean,
        variance: m2,
        skewness: m3 / (m2 * m2.sqrt()),
        kurtosis: m4 / (m2 * m2) - cast(3.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Normal,
    Lesion,
}

impl Class {
    /// `+1` for lesion, `-1` for normal.
    pub fn sign(self) -> f64 {
        match self {
            Class::Lesion => 1.0,
            Class::Normal => -1.0,
        }
    }

    pub fn from_sign(v: f64) -> Class {
        if v >= 0.0 {
            Class::Lesion
        } else {
            Class::Normal
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Normal => "normal",
            Class::Lesion => "lesion",
        })
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "healthy" | "0" | "-1" => Ok(Class::Normal),
            "lesion" | "1" | "+1" => Ok(Class::Lesion),
            other => Err(Error::Malformed(format!("unknown class '{other}'"))),
        }
    }
}

/// Dense row-major feature table with optional class labels and the
/// `(image, superpixel)` origin of every row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<F> {
    dims: usize,
    values: Vec<F>,
    labels: Option<Vec<Class>>,
    provenance: Vec<(usize, u32)>,
}

impl<F: Float> FeatureMatrix<F> {
    pub fn new(
        dims: usize,
        values: Vec<F>,
        labels: Option<Vec<Class>>,
        provenance: Vec<(usize, u32)>,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument(
                "feature matrix needs at least one column".into(),
            ));
        }
        if values.len() != dims * provenance.len() {
            return Err(Error::dims(dims * provenance.len(), values.len()));
        }
        if let Some(l) = &labels {
            if l.len() != provenance.len() {
                return Err(Error::dims(provenance.len(), l.len()));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dims,
                col: i % dims,
            });
        }
        Ok(FeatureMatrix {
            dims,
            values,
            labels,
            provenance,
        })
    }

    /// Unlabeled matrix from rows without provenance (ids `(0, i)`).
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dims) {
            return Err(Error::dims(dims, r.len()));
        }
        Self::new(
            dims,
            rows.concat(),
            None,
            (0..rows.len()).map(|i| (0, i as u32)).collect(),
        )
    }

    pub fn empty(dims: usize) -> Self {
        FeatureMatrix {
            dims,
            values: Vec::new(),
            labels: None,
            provenance: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.provenance.len()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[F]> + '_ {
        self.values.chunks_exact(self.dims)
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[Class]> {
        self.labels.as_deref()
    }

    pub fn provenance(&self) -> &[(usize, u32)] {
        &self.provenance
    }

    pub fn with_labels(mut self, labels: Vec<Class>) -> Result<Self> {
        if labels.len() != self.rows() {
            return Err(Error::dims(self.rows(), labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        FeatureMatrix {
            dims: self.dims,
            values: indices
                .iter()
                .flat_map(|&i| self.row(i).iter().copied())
                .collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
        }
    }

    /// Stacks `other` below `self`. Labels survive only if both carry them.
    pub fn append(&mut self, other: FeatureMatrix<F>) -> Result<()> {
        if self.rows() == 0 && self.labels.is_none() {
            *self = other;
            return Ok(());
        }
        if other.dims != self.dims {
            return Err(Error::dims(self.dims, other.dims));
        }
        self.labels = match (self.labels.take(), other.labels) {
            (Some(mut a), Some(b)) => {
                a.extend(b);
                Some(a)
            }
            _ => None,
        };
        self.values.extend(other.values);
        self.provenance.extend(other.provenance);
        Ok(())
    }

    /// `image,superpixel,label,f00..` header followed by one line per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "image,superpixel,label")?;
        for j in 0..self.dims {
            write!(w, ",f{j:02}")?;
        }
        writeln!(w)?;
        for (i, &(img, sp)) in self.provenance.iter().enumerate() {
            let label = self
                .labels
                .as_ref()
                .map(|l| l[i].to_string())
                .unwrap_or_default();
            write!(w, "{img},{sp},{label}")?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Malformed("missing header".into()))?
            .map_err(|e| Error::io("<features>", e))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[..3] != ["image", "superpixel", "label"] {
            return Err(Error::Malformed(format!("unexpected header '{header}'")));
        }
        let dims = cols.len() - 3;
        let (mut values, mut labels, mut prov) = (Vec::new(), Vec::new(), Vec::new());
        let mut all_labeled = true;
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<features>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != cols.len() {
                return Err(Error::Malformed(format!(
                    "line {}: expected {} fields",
                    n + 2,
                    cols.len()
                )));
            }
            let bad = |what: &str| Error::Malformed(format!("line {}: bad {what}", n + 2));
            prov.push((
                f[0].parse().map_err(|_| bad("image id"))?,
                f[1].parse().map_err(|_| bad("superpixel id"))?,
            ));
            if f[2].is_empty() {
                all_labeled = false;
            } else {
                labels.push(f[2].parse::<Class>()?);
            }
            for v in &f[3..] {
                values.push(cast::<F>(v.parse::<f64>().map_err(|_| bad("value"))?));
            }
        }
        let labels = (all_labeled && !prov.is_empty()).then_some(labels);
        FeatureMatrix::new(dims, values, labels, prov)
    }
}

/// `A1, H1, V1, D1`.
pub fn default_sources() -> Vec<Band> {
    Band::level_set(1).to_vec()
}

/// Pixel bounding boxes `(x0, y0, x1, y1)` (inclusive) per superpixel.
fn bounding_boxes<F: Float>(lm: &LabelMap<F>) -> Vec<Option<(usize, usize, usize, usize)>> {
    let mut boxes = vec![None; lm.num_superpixels()];
    for y in 0..lm.height {
        for x in 0..lm.width {
            let l = lm.label(x, y);
            if l == BACKGROUND {
                continue;
            }
            let b: &mut Option<(usize, usize, usize, usize)> = &mut boxes[l as usize];
            *b = Some(match *b {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
    }
    boxes
}

/// Coefficients of `band` whose `2^j × 2^j` source block is at least half
/// covered by `label` (only in-image block pixels count).
fn region_coefficients<F: Float>(
    lm: &LabelMap<F>,
    label: u32,
    bbox: (usize, usize, usize, usize),
    band: &crate::imgcore::Raster<F>,
    level: usize,
    out: &mut Vec<F>,
) {
    out.clear();
    let step = 1usize << level;
    let (x0, y0, x1, y1) = bbox;
    for v in (y0 / step)..=(y1 / step).min(band.height() - 1) {
        for u in (x0 / step)..=(x1 / step).min(band.width() - 1) {
            let (mut hit, mut valid) = (0usize, 0usize);
            for y in v * step..((v + 1) * step).min(lm.height) {
                for x in u * step..((u + 1) * step).min(lm.width) {
                    valid += 1;
                    hit += usize::from(lm.label(x, y) == label);
                }
            }
            if valid > 0 && 2 * hit >= valid {
                out.push(band.get(u, v));
            }
        }
    }
}

/// One row per kept superpixel (ascending id): the four moments of each
/// source band, concatenated in source order. Superpixels too small to
/// cover any coefficient of some source are skipped.
pub fn superpixel_features<F: Float>(
    image_id: usize,
    lm: &LabelMap<F>,
    kept: &[u32],
    bands: &SubbandSet<F>,
    sources: &[Band],
) -> Result<FeatureMatrix<F>> {
    if kept.is_empty() {
        return Err(Error::InvalidArgument("no superpixels to describe".into()));
    }
    if sources.is_empty() {
        return Err(Error::InvalidArgument("no feature sources".into()));
    }
    let rasters = sources
        .iter()
        .map(|&b| {
            bands.band(b).ok_or_else(|| {
                Error::InvalidArgument(format!("subband {} not available", b.name()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let boxes = bounding_boxes(lm);
    let mut kept = kept.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let dims = 4 * sources.len();
    let (mut values, mut prov) = (Vec::new(), Vec::new());
    let mut buf = Vec::new();
    'rows: for &l in &kept {
        let Some(bbox) = boxes.get(l as usize).copied().flatten() else {
            log::info!("image {image_id}: superpixel {l} has no pixels, skipped");
            continue;
        };
        let start = values.len();
        for (src, band) in sources.iter().zip(&rasters) {
            region_coefficients(lm, l, bbox, band, src.level(), &mut buf);
            match region_moments(&buf) {
                Ok(s) => values.extend(s.to_array()),
                Err(_) => {
                    log::info!(
                        "image {image_id}: superpixel {l} covers no {} coefficient, skipped",
                        src.name()
                    );
                    values.truncate(start);
                    continue 'rows;
                }
            }
        }
        prov.push((image_id, l));
    }
    FeatureMatrix::new(dims, values, None, prov)
}

/// Lesion when at least `overlap` of the superpixel's pixels are in `truth`.
pub fn label_superpixels<F: Float>(
    lm: &LabelMap<F>,
    kept: &[u32],
    truth: &BinaryMask,
    overlap: f64,
) -> Result<Vec<(u32, Class)>> {
    if truth.dims() != (lm.width, lm.height) {
        return Err(Error::dims(
            format!("{}x{}", lm.width, lm.height),
            format!("{}x{}", truth.width(), truth.height()),
        ));
    }
    let mut counts = vec![(0usize, 0usize); lm.num_superpixels()];
    for (i, &l) in lm.labels.iter().enumerate() {
        if l != BACKGROUND {
            let c = &mut counts[l as usize];
            c.0 += 1;
            c.1 += usize::from(truth.bits()[i]);
        }
    }
    let mut kept = kept.to_vec();
    kept.sort_unstable();
    kept.dedup();
    Ok(kept
        .into_iter()
        .map(|l| {
            let (n, hit) = counts.get(l as usize).copied().unwrap_or((0, 0));
            let lesion = n > 0 && hit as f64 >= overlap * n as f64;
            (l, if lesion { Class::Lesion } else { Class::Normal })
        })
        .collect())
}

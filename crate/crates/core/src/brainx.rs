//! Brain extraction for 2D slices: histogram threshold, binarization,
//! largest connected component and morphological refinement.

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, Raster};
use crate::num::{to_f64, Float};

/// Pixel adjacency used by component labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, -1), (-1, 0), (1, 0), (0, 1)],
            Connectivity::Eight => &[
                (-1, -1),
                (0, -1),
                (1, -1),
                (-1, 0),
                (1, 0),
                (-1, 1),
                (0, 1),
                (1, 1),
            ],
        }
    }
}

/// Flat structuring element, centered on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Element {
    /// Every offset with `dx² + dy² ≤ r²`.
    Disc(usize),
    /// The `(2r+1)×(2r+1)` square.
    Square(usize),
}

impl Default for Element {
    fn default() -> Self {
        Element::Disc(2)
    }
}

impl Element {
    pub fn offsets(self) -> Vec<(isize, isize)> {
        let (r, disc) = match self {
            Element::Disc(r) => (r as isize, true),
            Element::Square(r) => (r as isize, false),
        };
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if !disc || dx * dx + dy * dy <= r * r {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractParams {
    /// Overrides the histogram threshold when set.
    pub threshold: Option<u8>,
    pub element: Element,
    pub connectivity: Connectivity,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            threshold: None,
            element: Element::Disc(2),
            connectivity: Connectivity::Four,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BrainMask {
    pub mask: BinaryMask,
    pub threshold: u8,
    /// Mean `(x, y)` of the foreground pixels.
    pub centroid: (f64, f64),
}

/// 256-bin histogram; bin `floor(v)` clamped to `0..=255`.
pub fn histogram<F: Float>(img: &Raster<F>) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in img.data() {
        let bin = to_f64(v).floor().clamp(0.0, 255.0) as usize;
        hist[bin] += 1;
    }
    hist
}

/// Otsu threshold from a 256-bin histogram: the smallest `t` maximizing the
/// between-class variance of `[0..=t]` versus `[t+1..=255]`.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let total: u128 = hist.iter().map(|&c| c as u128).sum();
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as u128 * c as u128)
        .sum();

    // between-class variance ∝ (N·s0 − c0·S)² / (c0·c1); compared exactly by
    // cross-multiplication so ties are real ties.
    let mut best: Option<(u8, u128, u128)> = None;
    let (mut c0, mut s0) = (0u128, 0u128);
    for t in 0..256usize {
        c0 += hist[t] as u128;
        s0 += t as u128 * hist[t] as u128;
        let c1 = total - c0;
        if c0 == 0 || c1 == 0 {
            continue;
        }
        let diff = (total * s0).abs_diff(c0 * total_sum);
        // diff ≤ N²·255, so diff² stays within u128 for any image below ~10⁸ pixels
        let num = diff * diff;
        let den = c0 * c1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => mul_gt(num, den, bn, bd),
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    Ok(best.expect("two occupied bins give at least one split").0)
}

/// `a/b > c/d` for positive denominators, without overflow.
fn mul_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(l), Some(r)) => l > r,
        _ => (a as f64) * (d as f64) > (c as f64) * (b as f64),
    }
}

pub fn estimate_threshold<F: Float>(img: &Raster<F>) -> Result<u8> {
    otsu_from_histogram(&histogram(img))
}

/// `1` iff `f(x, y) > th`.
pub fn binarize<F: Float>(img: &Raster<F>, th: F) -> BinaryMask {
    BinaryMask::new(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > th).collect(),
    )
    .expect("dimensions copied from the image")
}

/// Connected components of the foreground, in row-major discovery order.
/// Each component is the list of its pixel indices.
pub fn components(mask: &BinaryMask, conn: Connectivity) -> Vec<Vec<usize>> {
    let (w, h) = mask.dims();
    let bits = mask.bits();
    let mut seen = vec![false; bits.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            comp.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Keeps only the largest component; ties go to the component whose first
/// pixel comes first in row-major order.
pub fn largest_component(mask: &BinaryMask, conn: Connectivity) -> Result<BinaryMask> {
    let comps = components(mask, conn);
    let mut best: Option<&Vec<usize>> = None;
    for c in &comps {
        if best.is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    let best = best.ok_or(Error::EmptyMask)?;
    let mut out = BinaryMask::empty(mask.width(), mask.height());
    for &i in best {
        out.set(i % mask.width(), i / mask.width(), true);
    }
    Ok(out)
}

/// Erosion; pixels outside the image count as background.
pub fn erode(mask: &BinaryMask, element: Element) -> BinaryMask {
    let offs = element.offsets();
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        offs.iter().all(|&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            nx >= 0
                && ny >= 0
                && nx < w as isize
                && ny < h as isize
                && mask.get(nx as usize, ny as usize)
        })
    })
}

pub fn dilate(mask: &BinaryMask, element: Element) -> BinaryMask {
    let offs = element.offsets();
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        offs.iter().any(|&(dx, dy)| {
            // reflected element; symmetric elements make this a no-op
            let (nx, ny) = (x as isize - dx, y as isize - dy);
            nx >= 0
                && ny >= 0
                && nx < w as isize
                && ny < h as isize
                && mask.get(nx as usize, ny as usize)
        })
    })
}

pub fn opening(mask: &BinaryMask, element: Element) -> BinaryMask {
    dilate(&erode(mask, element), element)
}

pub fn closing(mask: &BinaryMask, element: Element) -> BinaryMask {
    erode(&dilate(mask, element), element)
}

pub fn centroid(mask: &BinaryMask) -> Option<(f64, f64)> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                sx += x as f64;
                sy += y as f64;
                n += 1;
            }
        }
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}

/// Opening then closing with `element`, then the largest component.
pub fn refine_mask(
    mask: &BinaryMask,
    element: Element,
    conn: Connectivity,
    threshold: u8,
) -> Result<BrainMask> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let opened = opening(mask, element);
    if opened.is_empty() {
        return Err(Error::MaskEliminated);
    }
    let closed = closing(&opened, element);
    let mask = largest_component(&closed, conn)?;
    let centroid = centroid(&mask).expect("largest component is non-empty");
    Ok(BrainMask {
        mask,
        threshold,
        centroid,
    })
}

/// Full extraction: threshold, binarize, largest component, refine.
pub fn extract_brain<F: Float>(img: &Raster<F>, params: &ExtractParams) -> Result<BrainMask> {
    let th = match params.threshold {
        Some(t) => t,
        None => estimate_threshold(img)?,
    };
    let bin = binarize(img, F::from_u8(th).unwrap());
    let largest = largest_component(&bin, params.connectivity)?;
    refine_mask(&largest, params.element, params.connectivity, th)
}

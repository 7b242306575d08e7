//! SLIC superpixels over grayscale slices mapped into Lab space.
//!
//! The combined distance is `Ds = d_lab + (m/S)·d_xy` (the squared variant
//! `sqrt(d_lab² + (m/S)²·d_xy²)` is available through [`DistanceMode`]).
//! Pixels are assigned to the closest center within the `2S×2S` window
//! around it, centers move to the mean `labxy` of their members, and the
//! final labeling is made 4-connected.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::imgcore::{to_lab, BinaryMask, Boundary, LabImage, LabPixel, Raster};
use crate::num::{cast, to_f64, Float};

/// Label carried by pixels outside the region of interest.
pub const BACKGROUND: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// `d_lab + (m/S)·d_xy`
    #[default]
    Linear,
    /// `sqrt(d_lab² + (m/S)²·d_xy²)`
    Squared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlicParams<F> {
    pub k: usize,
    pub m: F,
    pub max_iters: usize,
    pub tol: F,
    pub distance: DistanceMode,
}

impl<F: Float> Default for SlicParams<F> {
    fn default() -> Self {
        SlicParams {
            k: 500,
            m: cast(5.0),
            max_iters: 10,
            tol: cast(0.5),
            distance: DistanceMode::Linear,
        }
    }
}

impl<F: Float> SlicParams<F> {
    pub fn validate(&self, n_pixels: usize) -> Result<()> {
        if self.k < 4 || self.k > n_pixels {
            return Err(Error::InvalidArgument(format!(
                "k must lie in [4, {n_pixels}], got {}",
                self.k
            )));
        }
        if !(self.m >= F::one() && self.m <= cast(20.0)) {
            return Err(Error::InvalidArgument(format!(
                "m must lie in [1, 20], got {}",
                self.m
            )));
        }
        if !(self.tol >= F::zero()) {
            return Err(Error::InvalidArgument("tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// `[l, a, b, x, y]` cluster center.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ClusterCenter<F> {
    pub l: F,
    pub a: F,
    pub b: F,
    pub x: F,
    pub y: F,
}

impl<F: Float> ClusterCenter<F> {
    fn distance_to(&self, other: &ClusterCenter<F>) -> F {
        let d = [
            self.l - other.l,
            self.a - other.a,
            self.b - other.b,
            self.x - other.x,
            self.y - other.y,
        ];
        d.iter().map(|&v| v * v).sum::<F>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelMap<F> {
    pub width: usize,
    pub height: usize,
    /// Row-major superpixel ids in `0..centers.len()`, or [`BACKGROUND`].
    pub labels: Vec<u32>,
    /// Center of superpixel `i` at index `i`.
    pub centers: Vec<ClusterCenter<F>>,
    /// Grid interval `S = sqrt(N / k)`.
    pub interval: F,
}

impl<F: Float> LabelMap<F> {
    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn num_superpixels(&self) -> usize {
        self.centers.len()
    }

    /// Pixel indices per superpixel.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centers.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != BACKGROUND {
                out[l as usize].push(i);
            }
        }
        out
    }

    /// Rebuilds a map from exported labels (65535 is background); centers
    /// are the member means over `img`.
    pub fn from_u16(img: &Raster<F>, labels: &[u16]) -> Result<Self> {
        if labels.len() != img.len() {
            return Err(Error::dims(img.len(), labels.len()));
        }
        let labels: Vec<u32> = labels
            .iter()
            .map(|&l| if l == u16::MAX { BACKGROUND } else { l as u32 })
            .collect();
        let n = labels
            .iter()
            .filter(|&&l| l != BACKGROUND)
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0);
        if n == 0 {
            return Err(Error::EmptyRegion);
        }
        let lab = to_lab(img);
        let centers = member_means(&lab, &labels, n)
            .into_iter()
            .map(Option::unwrap_or_default)
            .collect();
        Ok(LabelMap {
            width: img.width(),
            height: img.height(),
            labels,
            centers,
            interval: grid_interval(img.len(), n),
        })
    }

    /// 16-bit raster for export; background becomes 65535.
    pub fn to_u16(&self) -> Vec<u16> {
        self.labels
            .iter()
            .map(|&l| {
                if l == BACKGROUND {
                    u16::MAX
                } else {
                    l.min(u16::MAX as u32 - 1) as u16
                }
            })
            .collect()
    }
}

impl<F: Float> Boundary for LabelMap<F> {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn is_boundary(&self, x: usize, y: usize) -> bool {
        let l = self.label(x, y);
        (x + 1 < self.width && self.label(x + 1, y) != l)
            || (y + 1 < self.height && self.label(x, y + 1) != l)
    }
}

/// `S = sqrt(N / k)`.
pub fn grid_interval<F: Float>(n_pixels: usize, k: usize) -> F {
    (cast::<F>(n_pixels as f64) / cast(k as f64)).sqrt()
}

/// Combined color/space distance between a pixel and a center.
pub fn slic_distance<F: Float>(
    p: &LabPixel<F>,
    x: F,
    y: F,
    c: &ClusterCenter<F>,
    m: F,
    s: F,
    mode: DistanceMode,
) -> F {
    let (dl, da, db) = (c.l - p.l, c.a - p.a, c.b - p.b);
    let (dx, dy) = (c.x - x, c.y - y);
    let lab_sq = dl * dl + da * da + db * db;
    let xy_sq = dx * dx + dy * dy;
    let w = m / s;
    match mode {
        DistanceMode::Linear => lab_sq.sqrt() + w * xy_sq.sqrt(),
        DistanceMode::Squared => (lab_sq + w * w * xy_sq).sqrt(),
    }
}

/// Squared Lab gradient `‖I(x+1,y) − I(x−1,y)‖² + ‖I(x,y+1) − I(x,y−1)‖²`,
/// with edge replication at the image border.
pub fn gradient<F: Float>(lab: &LabImage<F>, x: usize, y: usize) -> F {
    let (w, h) = (lab.width, lab.height);
    let sq = |p: LabPixel<F>, q: LabPixel<F>| {
        let (a, b, c) = (p.l - q.l, p.a - q.a, p.b - q.b);
        a * a + b * b + c * c
    };
    let gx = sq(
        lab.get((x + 1).min(w - 1), y),
        lab.get(x.saturating_sub(1), y),
    );
    let gy = sq(
        lab.get(x, (y + 1).min(h - 1)),
        lab.get(x, y.saturating_sub(1)),
    );
    gx + gy
}

fn grid_positions<F: Float>(len: usize, s: F) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        let p = s * cast(0.5) + s * cast(i as f64);
        if p >= cast(len as f64) {
            break;
        }
        let px = to_f64(p).floor() as usize;
        if out.last() != Some(&px) {
            out.push(px);
        }
        i += 1;
    }
    out
}

fn center_at<F: Float>(lab: &LabImage<F>, x: usize, y: usize) -> ClusterCenter<F> {
    let p = lab.get(x, y);
    ClusterCenter {
        l: p.l,
        a: p.a,
        b: p.b,
        x: cast(x as f64),
        y: cast(y as f64),
    }
}

fn seed_on_lab<F: Float>(
    lab: &LabImage<F>,
    s: F,
    roi: Option<&BinaryMask>,
) -> Vec<ClusterCenter<F>> {
    let (w, h) = (lab.width, lab.height);
    let inside = |x: usize, y: usize| roi.is_none_or(|m| m.get(x, y));
    let mut centers = Vec::new();
    for &gy in &grid_positions(h, s) {
        for &gx in &grid_positions(w, s) {
            // lowest gradient in the 3x3 neighborhood; ties keep the grid
            // position, then the smallest row-major index
            let mut best: Option<(F, usize, usize)> =
                inside(gx, gy).then(|| (gradient(lab, gx, gy), gx, gy));
            for y in gy.saturating_sub(1)..=(gy + 1).min(h - 1) {
                for x in gx.saturating_sub(1)..=(gx + 1).min(w - 1) {
                    if !inside(x, y) {
                        continue;
                    }
                    let g = gradient(lab, x, y);
                    if best.is_none_or(|(bg, bx, by)| {
                        g < bg || (g == bg && !(bx == gx && by == gy) && (y, x) < (by, bx))
                    }) {
                        best = Some((g, x, y));
                    }
                }
            }
            if let Some((_, x, y)) = best {
                centers.push(center_at(lab, x, y));
            }
        }
    }
    if centers.is_empty() {
        if let Some(m) = roi {
            if let Some(i) = m.bits().iter().position(|&b| b) {
                centers.push(center_at(lab, i % w, i / w));
            }
        }
    }
    centers
}

/// Grid seeds moved to the lowest-gradient pixel of their 3×3 neighborhood.
pub fn seed_centers<F: Float>(
    img: &Raster<F>,
    params: &SlicParams<F>,
    roi: Option<&BinaryMask>,
) -> Vec<ClusterCenter<F>> {
    let s = grid_interval::<F>(img.len(), params.k);
    seed_on_lab(&to_lab(img), s, roi)
}

/// Per-iteration record of the assignment objective `Σ Ds(p, center(p))`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentTrace {
    /// `(before, after)` the assignment step, for each iteration.
    pub assign_objective: Vec<(f64, f64)>,
    /// Total center movement after each update.
    pub movement: Vec<f64>,
    pub iterations: usize,
}

struct Slic<'a, F> {
    lab: &'a LabImage<F>,
    roi: Option<&'a BinaryMask>,
    m: F,
    s: F,
    mode: DistanceMode,
}

impl<F: Float> Slic<'_, F> {
    fn dist(&self, i: usize, c: &ClusterCenter<F>) -> F {
        let w = self.lab.width;
        slic_distance(
            &self.lab.pixels[i],
            cast((i % w) as f64),
            cast((i / w) as f64),
            c,
            self.m,
            self.s,
            self.mode,
        )
    }

    fn in_roi(&self, i: usize) -> bool {
        self.roi.is_none_or(|m| m.bits()[i])
    }

    fn objective(&self, labels: &[u32], centers: &[ClusterCenter<F>]) -> f64 {
        labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l != BACKGROUND)
            .map(|(i, &l)| to_f64(self.dist(i, &centers[l as usize])))
            .sum()
    }

    /// Nearest center within each center's `2S×2S` window. The pixel's current
    /// center always stays a candidate; uncovered pixels fall back to a full
    /// search. Equal distances go to the lower center index.
    fn assign(&self, centers: &[ClusterCenter<F>], labels: &mut [u32]) {
        let (w, h) = (self.lab.width, self.lab.height);
        let n = w * h;
        let mut best = vec![F::infinity(); n];
        for i in 0..n {
            if !self.in_roi(i) {
                labels[i] = BACKGROUND;
            } else if labels[i] != BACKGROUND {
                best[i] = self.dist(i, &centers[labels[i] as usize]);
            }
        }
        for (ci, c) in centers.iter().enumerate() {
            let ci = ci as u32;
            let x0 = to_f64((c.x - self.s).ceil()).max(0.0) as usize;
            let y0 = to_f64((c.y - self.s).ceil()).max(0.0) as usize;
            let x1 = (to_f64((c.x + self.s).floor()).max(0.0) as usize).min(w - 1);
            let y1 = (to_f64((c.y + self.s).floor()).max(0.0) as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let i = y * w + x;
                    if !self.in_roi(i) {
                        continue;
                    }
                    let d = self.dist(i, c);
                    if d < best[i] || (d == best[i] && ci < labels[i]) {
                        best[i] = d;
                        labels[i] = ci;
                    }
                }
            }
        }
        for i in 0..n {
            if self.in_roi(i) && labels[i] == BACKGROUND {
                let mut bd = F::infinity();
                for (ci, c) in centers.iter().enumerate() {
                    let d = self.dist(i, c);
                    if d < bd {
                        bd = d;
                        labels[i] = ci as u32;
                    }
                }
            }
        }
    }

    fn update(&self, labels: &[u32], centers: &mut [ClusterCenter<F>]) -> F {
        let sums = member_means(self.lab, labels, centers.len());
        let mut movement = F::zero();
        for (c, mean) in centers.iter_mut().zip(sums) {
            if let Some(mean) = mean {
                movement = movement + c.distance_to(&mean);
                *c = mean;
            }
        }
        movement
    }
}

/// Mean `labxy` of each label's pixels (`None` for empty labels).
fn member_means<F: Float>(
    lab: &LabImage<F>,
    labels: &[u32],
    n: usize,
) -> Vec<Option<ClusterCenter<F>>> {
    let mut acc = vec![(ClusterCenter::<F>::default(), 0usize); n];
    let w = lab.width;
    for (i, &l) in labels.iter().enumerate() {
        if l == BACKGROUND {
            continue;
        }
        let p = lab.pixels[i];
        let (c, cnt) = &mut acc[l as usize];
        c.l = c.l + p.l;
        c.a = c.a + p.a;
        c.b = c.b + p.b;
        c.x = c.x + cast((i % w) as f64);
        c.y = c.y + cast((i / w) as f64);
        *cnt += 1;
    }
    acc.into_iter()
        .map(|(c, cnt)| {
            (cnt > 0).then(|| {
                let n = cast::<F>(cnt as f64);
                ClusterCenter {
                    l: c.l / n,
                    a: c.a / n,
                    b: c.b / n,
                    x: c.x / n,
                    y: c.y / n,
                }
            })
        })
        .collect()
}

/// Segments `img` into roughly `params.k` superpixels.
pub fn segment<F: Float>(
    img: &Raster<F>,
    params: &SlicParams<F>,
    roi: Option<&BinaryMask>,
) -> Result<LabelMap<F>> {
    segment_traced(img, params, roi).map(|(lm, _)| lm)
}

/// [`segment`] plus the per-iteration objective trace.
pub fn segment_traced<F: Float>(
    img: &Raster<F>,
    params: &SlicParams<F>,
    roi: Option<&BinaryMask>,
) -> Result<(LabelMap<F>, SegmentTrace)> {
    let n = img.len();
    params.validate(n)?;
    if let Some(m) = roi {
        if m.dims() != img.dims() {
            return Err(Error::dims(
                format!("{}x{}", img.width(), img.height()),
                format!("{}x{}", m.width(), m.height()),
            ));
        }
        let count = m.count();
        if count == 0 {
            return Err(Error::InvalidArgument("region of interest is empty".into()));
        }
        if params.k > count {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds the {count} pixels in the region of interest",
                params.k
            )));
        }
    }
    let lab = to_lab(img);
    let s = grid_interval::<F>(n, params.k);
    let mut centers = seed_on_lab(&lab, s, roi);
    let ctx = Slic {
        lab: &lab,
        roi,
        m: params.m,
        s,
        mode: params.distance,
    };
    let mut labels = vec![BACKGROUND; n];
    let mut trace = SegmentTrace::default();
    ctx.assign(&centers, &mut labels);
    for _ in 0..params.max_iters {
        let movement = ctx.update(&labels, &mut centers);
        let before = ctx.objective(&labels, &centers);
        ctx.assign(&centers, &mut labels);
        let after = ctx.objective(&labels, &centers);
        trace.assign_objective.push((before, after));
        trace.movement.push(to_f64(movement));
        trace.iterations += 1;
        if movement < params.tol {
            break;
        }
    }
    // components below a quarter of the nominal superpixel area are orphans
    let min_size = (to_f64(s * s) / 4.0) as usize;
    let labels = enforce_connectivity(img.width(), img.height(), &labels, min_size);
    let count = labels
        .iter()
        .filter(|&&l| l != BACKGROUND)
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0);
    let centers = member_means(&lab, &labels, count)
        .into_iter()
        .map(|c| c.expect("relabeled ids are dense"))
        .collect();
    Ok((
        LabelMap {
            width: img.width(),
            height: img.height(),
            labels,
            centers,
            interval: s,
        },
        trace,
    ))
}

const FOUR: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

fn neighbors4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    FOUR.iter().filter_map(move |&(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize)
            .then(|| ny as usize * w + nx as usize)
    })
}

/// Makes every label 4-connected: each label keeps its largest component
/// (ties: first in row-major order) unless it has fewer than `min_size`
/// pixels. Every other component joins the neighboring label it shares the
/// most edges with (ties: lowest label). Ids are then renumbered densely in
/// row-major order of first appearance.
pub fn enforce_connectivity(
    width: usize,
    height: usize,
    labels: &[u32],
    min_size: usize,
) -> Vec<u32> {
    let n = labels.len();
    // connected components of equal labels
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] == BACKGROUND || comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let l = labels[start];
        let mut pix = Vec::new();
        comp[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            pix.push(i);
            for j in neighbors4(i, width, height) {
                if labels[j] == l && comp[j] == usize::MAX {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        comps.push((l, pix));
    }
    // components are discovered in row-major order of their first pixel
    let mut main_of: BTreeMap<u32, usize> = BTreeMap::new();
    for (id, (l, pix)) in comps.iter().enumerate() {
        match main_of.get(l) {
            Some(&cur) if comps[cur].1.len() >= pix.len() => {}
            _ => {
                main_of.insert(*l, id);
            }
        }
    }
    let mut resolved: Vec<Option<u32>> = comps.iter().map(|_| None).collect();
    for (&l, &id) in &main_of {
        if comps[id].1.len() >= min_size {
            resolved[id] = Some(l);
        }
    }
    loop {
        let mut progress = false;
        let mut pending = false;
        for id in 0..comps.len() {
            if resolved[id].is_some() {
                continue;
            }
            let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in &comps[id].1 {
                for j in neighbors4(i, width, height) {
                    let cj = comp[j];
                    if cj == usize::MAX || cj == id {
                        continue;
                    }
                    if let Some(l) = resolved[cj] {
                        *votes.entry(l).or_default() += 1;
                    }
                }
            }
            // BTreeMap iterates ascending, so the first maximum is the lowest label
            let winner = votes
                .iter()
                .fold(None, |acc: Option<(u32, usize)>, (&l, &c)| match acc {
                    Some((_, bc)) if bc >= c => acc,
                    _ => Some((l, c)),
                });
            match winner {
                Some((l, _)) => {
                    resolved[id] = Some(l);
                    progress = true;
                }
                None => pending = true,
            }
        }
        if !pending {
            break;
        }
        if !progress {
            // fragments with no labeled neighbor: keep them as their own superpixels
            let mut next = labels
                .iter()
                .filter(|&&l| l != BACKGROUND)
                .max()
                .copied()
                .unwrap_or(0);
            for r in resolved.iter_mut().filter(|r| r.is_none()) {
                next += 1;
                *r = Some(next);
            }
            break;
        }
    }
    let mut merged = vec![BACKGROUND; n];
    for (id, (_, pix)) in comps.iter().enumerate() {
        let l = resolved[id].unwrap();
        for &i in pix {
            merged[i] = l;
        }
    }
    let mut remap: BTreeMap<u32, u32> = BTreeMap::new();
    let mut out = vec![BACKGROUND; n];
    for i in 0..n {
        if merged[i] == BACKGROUND {
            continue;
        }
        let next = remap.len() as u32;
        out[i] = *remap.entry(merged[i]).or_insert(next);
    }
    out
}

/// Linear-interpolation quantile of `values` (`q` in `[0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Removes superpixels touching the image border, then bright superpixels
/// (mean above the `bright_quantile` of all superpixel means) that are
/// 4-adjacent to a removed one. The brightness rule runs once. Returns the
/// surviving ids in ascending order.
pub fn prune_superpixels<F: Float>(
    lm: &LabelMap<F>,
    img: &Raster<F>,
    bright_quantile: f64,
) -> Result<Vec<u32>> {
    if img.dims() != (lm.width, lm.height) {
        return Err(Error::dims(
            format!("{}x{}", lm.width, lm.height),
            format!("{}x{}", img.width(), img.height()),
        ));
    }
    let (w, h) = (lm.width, lm.height);
    let count = lm.num_superpixels();
    let mut sums = vec![(0.0f64, 0usize); count];
    let mut border = vec![false; count];
    for y in 0..h {
        for x in 0..w {
            let l = lm.label(x, y);
            if l == BACKGROUND {
                continue;
            }
            let s = &mut sums[l as usize];
            s.0 += to_f64(img.get(x, y));
            s.1 += 1;
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                border[l as usize] = true;
            }
        }
    }
    let present: Vec<usize> = (0..count).filter(|&l| sums[l].1 > 0).collect();
    let means: Vec<f64> = (0..count)
        .map(|l| {
            if sums[l].1 > 0 {
                sums[l].0 / sums[l].1 as f64
            } else {
                f64::NAN
            }
        })
        .collect();
    let cut = quantile(
        &present.iter().map(|&l| means[l]).collect::<Vec<_>>(),
        bright_quantile,
    );
    let mut touches_border = vec![false; count];
    for i in 0..lm.labels.len() {
        let l = lm.labels[i];
        if l == BACKGROUND || border[l as usize] {
            continue;
        }
        if neighbors4(i, w, h).any(|j| lm.labels[j] != BACKGROUND && border[lm.labels[j] as usize])
        {
            touches_border[l as usize] = true;
        }
    }
    let kept: Vec<u32> = present
        .into_iter()
        .filter(|&l| !border[l] && !(touches_border[l] && means[l] > cut))
        .map(|l| l as u32)
        .collect();
    if kept.is_empty() {
        return Err(Error::NothingSurvives);
    }
    Ok(kept)
}

/// Fraction of ground-truth boundary pixels that lie within `tolerance`
/// pixels (Chebyshev) of a predicted boundary pixel. A pixel is on a
/// boundary when a 4-neighbor carries a different label.
pub fn boundary_recall(
    width: usize,
    height: usize,
    predicted: &[u32],
    truth: &[u32],
    tolerance: usize,
) -> f64 {
    let edge =
        |labels: &[u32], i: usize| neighbors4(i, width, height).any(|j| labels[j] != labels[i]);
    let pred_edges: Vec<bool> = (0..predicted.len()).map(|i| edge(predicted, i)).collect();
    let (mut hit, mut total) = (0usize, 0usize);
    let t = tolerance as isize;
    for i in 0..truth.len() {
        if !edge(truth, i) {
            continue;
        }
        total += 1;
        let (x, y) = ((i % width) as isize, (i / width) as isize);
        let found = (-t..=t).any(|dy| {
            (-t..=t).any(|dx| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0
                    && ny >= 0
                    && nx < width as isize
                    && ny < height as isize
                    && pred_edges[ny as usize * width + nx as usize]
            })
        });
        if found {
            hit += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

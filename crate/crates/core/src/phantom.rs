//! Synthetic FLAIR-like brain slices with planted hyperintense lesions.
//!
//! Each case draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `id`,
//! so a case depends only on `(seed, id)` and is identical across platforms.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgcore::{save_mask, save_pgm, BinaryMask, Raster};
use crate::texfeat::Class;

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub seed: u64,
    pub size: usize,
    pub n_lesion: usize,
    pub n_healthy: usize,
    pub lesion_count: (usize, usize),
    pub lesion_radius: (usize, usize),
    pub background: f64,
    pub skull: f64,
    pub white_matter: f64,
    pub gray_matter: f64,
    pub lesion: f64,
    pub noise_sigma: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            seed: 0,
            size: 128,
            n_lesion: 35,
            n_healthy: 35,
            lesion_count: (1, 4),
            lesion_radius: (3, 9),
            background: 10.0,
            skull: 220.0,
            white_matter: 110.0,
            gray_matter: 140.0,
            lesion: 200.0,
            noise_sigma: 8.0,
        }
    }
}

/// Pixels between the brain edge and the skull.
const GAP: f64 = 3.0;
/// Largest normalized radius of a lesion center.
const CENTER_REACH: f64 = 0.45;
/// Lesion area cap as a fraction of brain area.
const MAX_LESION_SHARE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lesion {
    pub x: usize,
    pub y: usize,
    pub radius: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomCase {
    pub id: usize,
    pub image: Raster<f64>,
    /// Lesion pixels; empty for healthy cases.
    pub truth: BinaryMask,
    pub label: Class,
    pub lesions: Vec<Lesion>,
    /// Pixels inside the brain ellipse.
    pub brain: BinaryMask,
}

impl PhantomSpec {
    pub fn cases(&self) -> usize {
        self.n_lesion + self.n_healthy
    }

    /// Smallest semi-axis any case can draw.
    fn min_axis(&self) -> f64 {
        0.4 * self.size as f64 * 0.9
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 64 {
            return Err(Error::InvalidArgument(format!(
                "phantom size must be at least 64, got {}",
                self.size
            )));
        }
        let (c0, c1) = self.lesion_count;
        let (r0, r1) = self.lesion_radius;
        if c0 == 0 || c0 > c1 {
            return Err(Error::InvalidArgument(format!(
                "bad lesion count range [{c0}, {c1}]"
            )));
        }
        if r0 == 0 || r0 > r1 {
            return Err(Error::InvalidArgument(format!(
                "bad lesion radius range [{r0}, {r1}]"
            )));
        }
        if r1 as f64 >= (1.0 - CENTER_REACH) * self.min_axis() {
            return Err(Error::InvalidArgument(format!(
                "lesion radius {r1} exceeds what the brain axes ({:.1} px) can hold",
                self.min_axis()
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(
                "noise sigma must be non-negative".into(),
            ));
        }
        let levels = [
            self.background,
            self.skull,
            self.white_matter,
            self.gray_matter,
            self.lesion,
        ];
        if levels.iter().any(|v| !(0.0..=255.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "tissue intensities must lie in [0, 255]".into(),
            ));
        }
        Ok(())
    }
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Case `id`; ids below `n_lesion` carry lesions.
pub fn generate_case(spec: &PhantomSpec, id: usize) -> Result<PhantomCase> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(id as u64);
    let n = spec.size;
    let c = (n as f64 - 1.0) / 2.0;
    let skull_w = rng.random_range(2..=4) as f64;
    // the ellipse, gap and skull must fit inside the frame with a 1 px margin
    let reach = c - 1.0 - GAP - skull_w;
    let mut axis = || (0.4 * n as f64 * rng.random_range(0.9..1.1)).min(reach);
    let (a, b) = (axis(), axis());
    let rho = |x: usize, y: usize, grow: f64| {
        let (dx, dy) = ((x as f64 - c) / (a + grow), (y as f64 - c) / (b + grow));
        (dx * dx + dy * dy).sqrt()
    };
    let brain = BinaryMask::from_fn(n, n, |x, y| rho(x, y, 0.0) <= 1.0);
    let brain_area = brain.count() as f64;

    let is_lesion = id < spec.n_lesion;
    let mut lesions: Vec<Lesion> = Vec::new();
    if is_lesion {
        let count = rng.random_range(spec.lesion_count.0..=spec.lesion_count.1);
        let mut area = 0.0;
        for _ in 0..count {
            let mut r = rng.random_range(spec.lesion_radius.0..=spec.lesion_radius.1);
            while r > spec.lesion_radius.0 && area + disc_area(r) > MAX_LESION_SHARE * brain_area {
                r -= 1;
            }
            if area + disc_area(r) > MAX_LESION_SHARE * brain_area && !lesions.is_empty() {
                break;
            }
            let mut placed = None;
            for _ in 0..200 {
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                let s = CENTER_REACH * rng.random::<f64>().sqrt();
                let x = (c + s * a * t.cos()).round() as usize;
                let y = (c + s * b * t.sin()).round() as usize;
                let clear = lesions.iter().all(|l| {
                    let (dx, dy) = (l.x as f64 - x as f64, l.y as f64 - y as f64);
                    (dx * dx + dy * dy).sqrt() > (l.radius + r + 1) as f64
                });
                let inside = |px: f64, py: f64| {
                    let (dx, dy) = ((px - c) / a, (py - c) / b);
                    dx * dx + dy * dy < 1.0
                };
                let rf = r as f64;
                let (xf, yf) = (x as f64, y as f64);
                if clear
                    && [(rf, 0.0), (-rf, 0.0), (0.0, rf), (0.0, -rf)]
                        .iter()
                        .all(|(ox, oy)| inside(xf + ox, yf + oy))
                {
                    placed = Some(Lesion { x, y, radius: r });
                    break;
                }
            }
            match placed {
                Some(l) => {
                    area += disc_area(l.radius);
                    lesions.push(l);
                }
                None => break,
            }
        }
        if lesions.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "could not place a lesion in case {id}"
            )));
        }
    }
    let in_lesion = |x: usize, y: usize| {
        lesions.iter().any(|l| {
            let (dx, dy) = (x as isize - l.x as isize, y as isize - l.y as isize);
            (dx * dx + dy * dy) as usize <= l.radius * l.radius
        })
    };
    let truth = BinaryMask::from_fn(n, n, |x, y| in_lesion(x, y) && brain.get(x, y));

    let noise = Normal::new(0.0, spec.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let sigma = spec.noise_sigma;
    let mut data = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let base = if truth.get(x, y) {
                spec.lesion
            } else if brain.get(x, y) {
                let t = smoothstep((rho(x, y, 0.0) - 0.45) / 0.2);
                spec.white_matter + (spec.gray_matter - spec.white_matter) * t
            } else if rho(x, y, GAP) <= 1.0 {
                spec.background
            } else if rho(x, y, GAP + skull_w) <= 1.0 {
                spec.skull
            } else {
                spec.background
            };
            let v = if sigma > 0.0 {
                base + noise.sample(&mut rng)
            } else {
                base
            };
            data.push(v.round().clamp(0.0, 255.0));
        }
    }
    Ok(PhantomCase {
        id,
        image: Raster::gray(n, n, data)?,
        truth,
        label: if is_lesion {
            Class::Lesion
        } else {
            Class::Normal
        },
        lesions,
        brain,
    })
}

fn disc_area(r: usize) -> f64 {
    std::f64::consts::PI * (r * r) as f64
}

/// All cases, lesion ids first.
pub fn generate(spec: &PhantomSpec) -> Result<Vec<PhantomCase>> {
    spec.validate()?;
    (0..spec.cases())
        .into_par_iter()
        .map(|id| generate_case(spec, id))
        .collect()
}

/// One line of `manifest.csv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: usize,
    pub label: Class,
    pub lesions: usize,
}

impl ManifestEntry {
    pub fn image_file(&self) -> String {
        format!("case_{:03}.pgm", self.id)
    }

    pub fn truth_file(&self) -> String {
        format!("truth_{:03}.pgm", self.id)
    }
}

pub fn manifest_text(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("id,label,lesions\n");
    for e in entries {
        let label = match e.label {
            Class::Lesion => "lesion",
            Class::Normal => "healthy",
        };
        let _ = writeln!(s, "{},{label},{}", e.id, e.lesions);
    }
    s
}

/// Writes `case_<id>.pgm`, `truth_<id>.pgm` and `manifest.csv` into `dir`.
pub fn export(cases: &[PhantomCase], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(cases.len());
    for c in cases {
        let e = ManifestEntry {
            id: c.id,
            label: c.label,
            lesions: c.lesions.len(),
        };
        save_pgm(&c.image, dir.join(e.image_file()))?;
        save_mask(&c.truth, dir.join(e.truth_file()))?;
        entries.push(e);
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest_text(&entries)).map_err(|e| Error::io(&path, e))
}

/// Parses `manifest.csv` text.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty manifest".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| cols.iter().position(|&c| c == name);
    let (id_col, label_col) = match (col("id"), col("label")) {
        (Some(i), Some(l)) => (i, l),
        _ => {
            return Err(Error::Malformed(format!(
                "manifest header '{header}' lacks id/label"
            )))
        }
    };
    let lesion_col = col("lesions");
    lines
        .enumerate()
        .map(|(n, l)| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let bad = || Error::Malformed(format!("manifest line {}: '{l}'", n + 2));
            let id = f.get(id_col).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let label = f.get(label_col).ok_or_else(bad)?.parse::<Class>()?;
            let lesions = match lesion_col {
                Some(c) => f.get(c).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
                None => 0,
            };
            Ok(ManifestEntry { id, label, lesions })
        })
        .collect()
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = dir.as_ref().join("manifest.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_manifest(&text)
}

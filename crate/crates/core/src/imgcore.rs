//! Raster value types, grayscale to Lab mapping and image file I/O.
//!
//! Every stage of the pipeline exchanges [`Raster`] values: the loaded MR
//! slice, the skull-stripped slice and every wavelet subband share the same
//! real-valued container. Binary masks are stored separately as
//! [`BinaryMask`].

use std::fs;
use std::io::{BufWriter, Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::{cast, to_f64, Float};

/// Row-major real-valued raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster<F> {
    width: usize,
    height: usize,
    data: Vec<F>,
}

impl<F: Float> Raster<F> {
    /// Builds a raster from row-major data. Every value must be finite.
    pub fn new(width: usize, height: usize, data: Vec<F>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::dims(width * height, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at pixel {i}"
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    /// Builds a grayscale image: at least 2x2 with intensities in `[0, 255]`.
    pub fn gray(width: usize, height: usize, data: Vec<F>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidArgument(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        let img = Self::new(width, height, data)?;
        let max = cast::<F>(255.0);
        if let Some(i) = img.data.iter().position(|&v| v < F::zero() || v > max) {
            return Err(Error::InvalidArgument(format!(
                "intensity out of [0, 255] at pixel {i}"
            )));
        }
        Ok(img)
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, F::zero())
    }

    pub fn filled(width: usize, height: usize, value: F) -> Self {
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> F {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: F) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Converts to another scalar type.
    pub fn cast<G: Float>(&self) -> Raster<G> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| cast::<G>(to_f64(v))).collect(),
        }
    }

    /// Zeroes every pixel outside `mask`.
    pub fn masked(&self, mask: &BinaryMask) -> Result<Self> {
        if mask.dims() != self.dims() {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", mask.width(), mask.height()),
            ));
        }
        Ok(Raster {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(mask.bits())
                .map(|(&v, &b)| if b { v } else { F::zero() })
                .collect(),
        })
    }

    /// Rounds and clamps each pixel into `0..=255`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| to_f64(v).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Linearly rescales the raster to `0..=255` (constant rasters map to 0).
    pub fn normalized_u8(&self) -> Vec<u8> {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                let v = to_f64(v);
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        self.data
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((to_f64(v) - lo) / span * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect()
    }
}

/// Row-major binary raster.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::dims(width * height, bits.len()));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Pixel-wise subset test.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// 255 for foreground, 0 otherwise.
    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    /// Interprets nonzero pixels as foreground.
    pub fn from_raster<F: Float>(img: &Raster<F>) -> Self {
        BinaryMask {
            width: img.width(),
            height: img.height(),
            bits: img.data().iter().map(|&v| v > F::zero()).collect(),
        }
    }
}

/// CIELAB pixel. Grayscale input only ever populates `l`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LabPixel<F> {
    pub l: F,
    pub a: F,
    pub b: F,
}

/// Raster of Lab pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage<F> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<LabPixel<F>>,
}

impl<F: Float> LabImage<F> {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> LabPixel<F> {
        self.pixels[y * self.width + x]
    }
}

/// Maps gray level `g` to `(100·g/255, 0, 0)`.
pub fn gray_to_lab<F: Float>(g: F) -> LabPixel<F> {
    LabPixel {
        l: g * cast(100.0) / cast(255.0),
        a: F::zero(),
        b: F::zero(),
    }
}

pub fn to_lab<F: Float>(img: &Raster<F>) -> LabImage<F> {
    LabImage {
        width: img.width(),
        height: img.height(),
        pixels: img.data().iter().map(|&g| gray_to_lab(g)).collect(),
    }
}

// ---------------------------------------------------------------------------
// File I/O

/// Loads a PGM (P2/P5, maxval ≤ 255) or an 8-bit grayscale PNG.
pub fn load_image<F: Float>(path: impl AsRef<Path>) -> Result<Raster<F>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decodes an in-memory PGM or PNG file.
pub fn decode_image<F: Float>(bytes: &[u8]) -> Result<Raster<F>> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.len() < 2 {
        Err(Error::UnexpectedEof)
    } else {
        Err(Error::UnsupportedFormat(
            "expected PGM (P2/P5) or PNG".into(),
        ))
    }
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PgmCursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn next_uint(&mut self) -> Result<usize> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return if self.pos >= self.bytes.len() {
                Err(Error::UnexpectedEof)
            } else {
                Err(Error::Malformed(format!(
                    "expected an integer at byte {}",
                    self.pos
                )))
            };
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed("integer overflow in PGM".into()))
    }
}

fn decode_pgm<F: Float>(bytes: &[u8]) -> Result<Raster<F>> {
    let binary = &bytes[..2] == b"P5";
    let mut cur = PgmCursor { bytes, pos: 2 };
    let width = cur.next_uint()?;
    let height = cur.next_uint()?;
    let maxval = cur.next_uint()?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedBitDepth(format!("PGM maxval {maxval}")));
    }
    if width < 2 || height < 2 {
        return Err(Error::InvalidArgument(format!(
            "image must be at least 2x2, got {width}x{height}"
        )));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Malformed("PGM dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        if start + n > bytes.len() {
            return Err(Error::UnexpectedEof);
        }
        data.extend(
            bytes[start..start + n]
                .iter()
                .map(|&b| F::from_u8(b).unwrap()),
        );
    } else {
        for _ in 0..n {
            let v = cur.next_uint()?;
            if v > maxval {
                return Err(Error::Malformed(format!(
                    "sample {v} exceeds maxval {maxval}"
                )));
            }
            data.push(F::from_usize(v).unwrap());
        }
    }
    if data.iter().any(|&v| v > cast(maxval as f64)) {
        return Err(Error::Malformed("sample exceeds maxval".into()));
    }
    Raster::gray(width, height, data)
}

fn decode_png<F: Float>(bytes: &[u8]) -> Result<Raster<F>> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let (color, depth) = (reader.info().color_type, reader.info().bit_depth);
    if color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(format!(
            "PNG color type {color:?}"
        )));
    }
    if depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth(format!(
            "PNG bit depth {depth:?}"
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Malformed("PNG too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = buf[..w * h]
        .iter()
        .map(|&b| F::from_u8(b).unwrap())
        .collect();
    Raster::gray(w, h, data)
}

fn png_err(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::UnexpectedEof
        }
        other => Error::Malformed(format!("PNG: {other}")),
    }
}

/// Writes an 8-bit binary (P5) PGM; pixels are rounded and clamped.
pub fn save_pgm<F: Float>(img: &Raster<F>, path: impl AsRef<Path>) -> Result<()> {
    write_pgm_u8(img.width(), img.height(), &img.to_u8(), path)
}

pub fn write_pgm_u8(
    width: usize,
    height: usize,
    pixels: &[u8],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    write_file(path.as_ref(), &out)
}

/// Writes an ASCII (P2) PGM.
pub fn write_pgm_ascii(
    width: usize,
    height: usize,
    pixels: &[u8],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in pixels.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_file(path.as_ref(), out.as_bytes())
}

/// Writes a 16-bit binary PGM (maxval 65535, big-endian samples).
pub fn write_pgm_u16(
    width: usize,
    height: usize,
    pixels: &[u16],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in pixels {
        out.extend_from_slice(&v.to_be_bytes());
    }
    write_file(path.as_ref(), &out)
}

/// Reads a binary PGM with maxval 65535 (as written by [`write_pgm_u16`]).
pub fn read_pgm_u16(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u16>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedFormat("expected a binary PGM".into()));
    }
    let mut cur = PgmCursor {
        bytes: &bytes,
        pos: 2,
    };
    let (width, height, maxval) = (cur.next_uint()?, cur.next_uint()?, cur.next_uint()?);
    if maxval != 65535 {
        return Err(Error::UnsupportedBitDepth(format!("PGM maxval {maxval}")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Malformed("PGM dimensions overflow".into()))?;
    let start = cur.pos + 1;
    if start + 2 * n > bytes.len() {
        return Err(Error::UnexpectedEof);
    }
    let data = bytes[start..start + 2 * n]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((width, height, data))
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_pgm_u8(mask.width(), mask.height(), &mask.to_u8(), path)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img: Raster<f64> = load_image(path)?;
    Ok(BinaryMask::from_raster(&img))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Anything that can mark boundary pixels on an overlay.
pub trait Boundary {
    fn dims(&self) -> (usize, usize);
    fn is_boundary(&self, x: usize, y: usize) -> bool;
}

impl Boundary for BinaryMask {
    fn dims(&self) -> (usize, usize) {
        BinaryMask::dims(self)
    }

    /// A foreground pixel with a background (or out-of-image) 4-neighbor.
    fn is_boundary(&self, x: usize, y: usize) -> bool {
        if !self.get(x, y) {
            return false;
        }
        x == 0
            || y == 0
            || x + 1 == self.width
            || y + 1 == self.height
            || !self.get(x - 1, y)
            || !self.get(x + 1, y)
            || !self.get(x, y - 1)
            || !self.get(x, y + 1)
    }
}

pub const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];

/// Renders `img` as RGB with boundary pixels painted in [`OVERLAY_COLOR`].
pub fn render_overlay<F: Float, B: Boundary + ?Sized>(
    img: &Raster<F>,
    marks: &B,
) -> Result<Vec<u8>> {
    if marks.dims() != img.dims() {
        let (w, h) = marks.dims();
        return Err(Error::dims(
            format!("{}x{}", img.width(), img.height()),
            format!("{w}x{h}"),
        ));
    }
    let gray = img.to_u8();
    let mut rgb = Vec::with_capacity(gray.len() * 3);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if marks.is_boundary(x, y) {
                rgb.extend_from_slice(&OVERLAY_COLOR);
            } else {
                let g = gray[y * img.width() + x];
                rgb.extend_from_slice(&[g, g, g]);
            }
        }
    }
    Ok(rgb)
}

pub fn save_overlay<F: Float, B: Boundary + ?Sized>(
    img: &Raster<F>,
    marks: &B,
    path: impl AsRef<Path>,
) -> Result<()> {
    let rgb = render_overlay(img, marks)?;
    write_png(
        path.as_ref(),
        img.width(),
        img.height(),
        png::ColorType::Rgb,
        &rgb,
    )
}

/// Writes an 8-bit grayscale PNG.
pub fn save_png_gray(
    width: usize,
    height: usize,
    pixels: &[u8],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_png(
        path.as_ref(),
        width,
        height,
        png::ColorType::Grayscale,
        pixels,
    )
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    data: &[u8],
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    {
        let mut enc = png::Encoder::new(&mut w, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Malformed(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::Malformed(format!("PNG encode: {e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Decodes an 8-bit RGB PNG into `(width, height, rgb bytes)`.
pub fn read_png_rgb(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(Cursor::new(bytes))
        .read_info()
        .map_err(png_err)?;
    if reader.info().color_type != png::ColorType::Rgb
        || reader.info().bit_depth != png::BitDepth::Eight
    {
        return Err(Error::UnsupportedFormat("expected 8-bit RGB PNG".into()));
    }
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

//! Raster primitives used by the makeup engine.
//!
//! Everything in here is a pure function of its inputs. Images are 8-bit RGB,
//! row-major, and masks are plain boolean rasters of the same shape.

mod blend;
mod blur;
mod io;
mod raster;
mod spline;

pub use blend::alpha_blend;
pub use blur::{gaussian_blur, gaussian_kernel, kernel_radius};
pub use io::{decode_png, encode_png, load_png, save_png};
pub use raster::rasterize_interior;
pub use spline::interpolate_boundary;

use serde::{Deserialize, Serialize};

/// Errors produced by the raster primitives.
#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer has {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("degenerate region: need at least 3 distinct points, got {distinct}")]
    DegenerateRegion { distinct: usize },
    #[error("polyline must be closed")]
    OpenPolyline,
    #[error("non-finite coordinate in polyline")]
    NonFinite,
    #[error("mask is {mask_w}x{mask_h} but image is {image_w}x{image_h}")]
    MaskMismatch {
        mask_w: usize,
        mask_h: usize,
        image_w: usize,
        image_h: usize,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("failed to decode {path}: {cause}")]
    Decode { path: String, cause: String },
    #[error("failed to encode {path}: {cause}")]
    Encode { path: String, cause: String },
}

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;

/// An RGB colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
    pub const WHITE: Rgb = Rgb([255, 255, 255]);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }
}

/// A 2D point in the image frame. Pixel `(i, j)` has its centre at
/// `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new((self.x + other.x) * 0.5, (self.y + other.y) * 0.5)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn centroid(points: &[Point]) -> Point {
        let n = points.len().max(1) as f64;
        let (sx, sy) = points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Point::new(sx / n, sy / n)
    }
}

/// An owned 8-bit RGB raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage { width, height });
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(ImagingError::BufferSize {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A `width`×`height` image filled with `color`.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        let pixels = color.0.repeat(width * height);
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        Rgb([self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]])
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color.0);
    }

    /// Mean over all pixels and channels.
    pub fn mean_value(&self) -> f64 {
        let sum: u64 = self.pixels.iter().map(|&v| u64::from(v)).sum();
        sum as f64 / self.pixels.len() as f64
    }

    /// Indices `(x, y)` of pixels that differ between `self` and `other`.
    /// Both images must share dimensions.
    pub fn diff_pixels(&self, other: &Image) -> Vec<(usize, usize)> {
        assert_eq!(self.dims(), other.dims(), "diff of mismatched images");
        self.pixels
            .chunks_exact(3)
            .zip(other.pixels.chunks_exact(3))
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}

/// A per-pixel boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn for_image(image: &Image) -> Self {
        Self::empty(image.width, image.height)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!(self.dims(), other.dims(), "union of mismatched masks");
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        Mask { bits, ..*self }
    }

    /// Pixels set in `self` but not in `other`.
    pub fn subtract(&self, other: &Mask) -> Mask {
        assert_eq!(self.dims(), other.dims(), "difference of mismatched masks");
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && !*b).collect();
        Mask { bits, ..*self }
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    /// Square (Chebyshev) dilation by `radius` pixels. This matches the
    /// support of a separable kernel of the same radius.
    pub fn dilate(&self, radius: usize) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = self.dims();
        let mut rows = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            let mut last_set: Option<usize> = None;
            // forward pass records the nearest set pixel on the left,
            // the backward pass the one on the right
            for x in 0..w {
                if row[x] {
                    last_set = Some(x);
                }
                if matches!(last_set, Some(s) if x - s <= radius) {
                    rows[y * w + x] = true;
                }
            }
            let mut next_set: Option<usize> = None;
            for x in (0..w).rev() {
                if row[x] {
                    next_set = Some(x);
                }
                if matches!(next_set, Some(s) if s - x <= radius) {
                    rows[y * w + x] = true;
                }
            }
        }
        let mut bits = vec![false; w * h];
        for x in 0..w {
            let mut last_set: Option<usize> = None;
            for y in 0..h {
                if rows[y * w + x] {
                    last_set = Some(y);
                }
                if matches!(last_set, Some(s) if y - s <= radius) {
                    bits[y * w + x] = true;
                }
            }
            let mut next_set: Option<usize> = None;
            for y in (0..h).rev() {
                if rows[y * w + x] {
                    next_set = Some(y);
                }
                if matches!(next_set, Some(s) if s - y <= radius) {
                    bits[y * w + x] = true;
                }
            }
        }
        Mask {
            width: w,
            height: h,
            bits,
        }
    }

    pub(crate) fn check_matches(&self, image: &Image) -> Result<()> {
        if self.dims() != image.dims() {
            return Err(ImagingError::MaskMismatch {
                mask_w: self.width,
                mask_h: self.height,
                image_w: image.width,
                image_h: image.height,
            });
        }
        Ok(())
    }
}

/// An ordered list of points, optionally closed back onto its first point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<Point>,
    closed: bool,
}

impl Polyline {
    pub fn new(points: Vec<Point>, closed: bool) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(ImagingError::NonFinite);
        }
        if closed && points.len() < 3 {
            return Err(ImagingError::DegenerateRegion {
                distinct: count_distinct(&points),
            });
        }
        Ok(Self { points, closed })
    }

    pub fn closed(points: Vec<Point>) -> Result<Self> {
        Self::new(points, true)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub(crate) fn count_distinct(points: &[Point]) -> usize {
    let mut distinct: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if !distinct.contains(p) {
            distinct.push(*p);
        }
    }
    distinct.len()
}

/// Round half away from zero and clamp into the 8-bit range.
pub(crate) fn to_channel(value: f64) -> u8 {
    value.round().clamp(0.0, 255.0) as u8
}

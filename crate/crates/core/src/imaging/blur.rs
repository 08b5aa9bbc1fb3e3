use super::{to_channel, Image, ImagingError, Mask, Result};

/// Kernel radius for a given sigma: `ceil(3σ)`.
pub fn kernel_radius(sigma: f64) -> usize {
    (3.0 * sigma).ceil().max(0.0) as usize
}

/// Normalised 1D Gaussian weights of length `2 * kernel_radius(sigma) + 1`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = kernel_radius(sigma) as isize;
    if radius == 0 {
        return vec![1.0];
    }
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

fn reflect(index: isize, len: usize) -> usize {
    let len = len as isize;
    let m = index.rem_euclid(2 * len);
    (if m >= len { 2 * len - 1 - m } else { m }) as usize
}

/// Separable Gaussian blur with reflect-at-edge borders.
///
/// When `mask` is given only masked pixels are rewritten; the kernel still
/// reads across the mask boundary. `sigma == 0` returns an exact copy.
pub fn gaussian_blur(image: &Image, sigma: f64, mask: Option<&Mask>) -> Result<Image> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(ImagingError::Parameter(format!(
            "blur sigma must be finite and non-negative, got {sigma}"
        )));
    }
    if let Some(m) = mask {
        m.check_matches(image)?;
    }
    if sigma == 0.0 || mask.is_some_and(Mask::is_empty) {
        return Ok(image.clone());
    }

    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = image.dims();
    let src = image.as_bytes();

    let mut horizontal = vec![0.0f64; w * h * 3];
    for y in 0..h {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (k, weight) in kernel.iter().enumerate() {
                let sx = reflect(x as isize + k as isize - radius, w);
                for c in 0..3 {
                    acc[c] += weight * f64::from(row[sx * 3 + c]);
                }
            }
            horizontal[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }

    let mut out = src.to_vec();
    for y in 0..h {
        for x in 0..w {
            if mask.is_some_and(|m| !m.get(x, y)) {
                continue;
            }
            let mut acc = [0.0f64; 3];
            for (k, weight) in kernel.iter().enumerate() {
                let sy = reflect(y as isize + k as isize - radius, h);
                let base = (sy * w + x) * 3;
                for c in 0..3 {
                    acc[c] += weight * horizontal[base + c];
                }
            }
            for c in 0..3 {
                out[(y * w + x) * 3 + c] = to_channel(acc[c]);
            }
        }
    }
    Image::new(w, h, out)
}

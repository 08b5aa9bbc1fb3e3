use super::{to_channel, Image, ImagingError, Mask, Result, Rgb};

/// Blend `color` over `base` inside `mask`:
/// `round((1 - alpha) * base + alpha * color)` per channel.
/// Pixels outside the mask are copied unchanged.
pub fn alpha_blend(base: &Image, color: Rgb, mask: &Mask, alpha: f64) -> Result<Image> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ImagingError::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    mask.check_matches(base)?;
    let mut out = base.clone();
    if alpha == 0.0 {
        return Ok(out);
    }
    for (x, y) in mask.iter_set() {
        let px = base.get(x, y).0;
        let blended = std::array::from_fn(|c| {
            to_channel((1.0 - alpha) * f64::from(px[c]) + alpha * f64::from(color.0[c]))
        });
        out.set(x, y, Rgb(blended));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn checker(w: usize, h: usize) -> (Image, Mask) {
        let px: Vec<u8> = (0..w * h * 3).map(|i| (i * 53 % 251) as u8).collect();
        let mut mask = Mask::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                mask.set(x, y, (x + y) % 3 == 0);
            }
        }
        (Image::new(w, h, px).unwrap(), mask)
    }

    #[test]
    fn zero_alpha_is_identity() {
        let (img, mask) = checker(7, 5);
        assert_eq!(alpha_blend(&img, Rgb::new(200, 10, 90), &mask, 0.0).unwrap(), img);
    }

    #[test]
    fn unit_alpha_replaces_masked_pixels() {
        let (img, mask) = checker(7, 5);
        let color = Rgb::new(200, 10, 90);
        let out = alpha_blend(&img, color, &mask, 1.0).unwrap();
        for y in 0..5 {
            for x in 0..7 {
                let expected = if mask.get(x, y) { color } else { img.get(x, y) };
                assert_eq!(out.get(x, y), expected);
            }
        }
    }

    #[test]
    fn half_alpha_arithmetic() {
        let img = Image::filled(1, 1, Rgb::new(100, 100, 100)).unwrap();
        let out = alpha_blend(&img, Rgb::new(200, 0, 0), &Mask::full(1, 1), 0.5).unwrap();
        assert_eq!(out.get(0, 0), Rgb::new(150, 50, 50));
    }

    #[test]
    fn rejects_out_of_range_alpha_and_mismatched_mask() {
        let img = Image::filled(2, 2, Rgb::BLACK).unwrap();
        assert!(matches!(alpha_blend(&img, Rgb::WHITE, &Mask::full(2, 2), 1.5), Err(ImagingError::Parameter(_))));
        assert!(matches!(alpha_blend(&img, Rgb::WHITE, &Mask::full(3, 2), 0.5), Err(ImagingError::MaskMismatch { .. })));
    }

    proptest! {
        #[test]
        fn distance_to_base_grows_with_alpha(base in any::<[u8; 3]>(), color in any::<[u8; 3]>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let img = Image::new(1, 1, base.to_vec()).unwrap();
            let mask = Mask::full(1, 1);
            let p_lo = alpha_blend(&img, Rgb(color), &mask, lo).unwrap().get(0, 0).0;
            let p_hi = alpha_blend(&img, Rgb(color), &mask, hi).unwrap().get(0, 0).0;
            for c in 0..3 {
                prop_assert!(p_lo[c].abs_diff(base[c]) <= p_hi[c].abs_diff(base[c]));
                // and never past the target colour
                prop_assert!(p_hi[c].abs_diff(color[c]) <= p_lo[c].abs_diff(color[c]));
            }
        }
    }
}

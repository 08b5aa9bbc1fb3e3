use serde::{Deserialize, Serialize};

use super::{Component, IntensityLevel, MakeupError, SkinTone, StyleConfig};
use crate::imaging::{to_channel, Image, Rgb};
use crate::landmarks::LandmarkSet;

const INNER_RIGHT_BROW: usize = 21;
const INNER_LEFT_BROW: usize = 22;
const NOSE_BRIDGE_TOP: usize = 27;

/// Mean colour of the skin patch between the eyebrows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveColorSample {
    pub mean_rgb: [f64; 3],
    /// Mean of the per-pixel channel means.
    pub mean_intensity: f64,
    pub pixel_count: usize,
}

/// Sample the rectangle spanning the inner eyebrow points horizontally and
/// the eyebrow line down to the top of the nose bridge vertically, trimmed
/// by `shrink` of its extent on every side.
pub fn extract_adaptive_color(image: &Image, landmarks: &LandmarkSet, shrink: f64) -> Result<AdaptiveColorSample, MakeupError> {
    let a = landmarks.point(INNER_RIGHT_BROW);
    let b = landmarks.point(INNER_LEFT_BROW);
    let bridge = landmarks.point(NOSE_BRIDGE_TOP);
    let brow_line = (a.y + b.y) / 2.0;

    let (mut x0, mut x1) = (a.x.min(b.x), a.x.max(b.x));
    let (mut y0, mut y1) = (brow_line.min(bridge.y), brow_line.max(bridge.y));
    let (dx, dy) = ((x1 - x0) * shrink, (y1 - y0) * shrink);
    x0 += dx;
    x1 -= dx;
    y0 += dy;
    y1 -= dy;

    let (w, h) = image.dims();
    let mut sum = [0.0f64; 3];
    let mut count = 0usize;
    // pixel centres inside the closed rectangle, clipped to the frame
    let col_start = (x0 - 0.5).ceil().max(0.0) as usize;
    let row_start = (y0 - 0.5).ceil().max(0.0) as usize;
    for y in row_start..h {
        let cy = y as f64 + 0.5;
        if cy > y1 {
            break;
        }
        for x in col_start..w {
            let cx = x as f64 + 0.5;
            if cx > x1 {
                break;
            }
            let px = image.get(x, y).0;
            for c in 0..3 {
                sum[c] += f64::from(px[c]);
            }
            count += 1;
        }
    }
    if count < 4 {
        return Err(MakeupError::SampleFailed { pixels: count });
    }
    let mean_rgb = sum.map(|s| s / count as f64);
    Ok(AdaptiveColorSample {
        mean_rgb,
        mean_intensity: mean_rgb.iter().sum::<f64>() / 3.0,
        pixel_count: count,
    })
}

/// Resolved colour and opacity for one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStyle {
    pub color: Rgb,
    pub alpha: f64,
}

/// Look up a component's style.
///
/// Fixed levels read the table directly. The adaptive level starts from the
/// light entry for `tone`, scales its alpha by `mean_intensity / 255` and
/// pulls its colour toward the sampled skin colour by the configured tint.
pub fn resolve_component_style(
    component: Component,
    level: IntensityLevel,
    tone: SkinTone,
    adaptive_sample: Option<&AdaptiveColorSample>,
    style: &StyleConfig,
) -> Result<ComponentStyle, MakeupError> {
    let lookup = |level| {
        style
            .entry(component, level, tone)
            .ok_or_else(|| MakeupError::Parameter(format!("no style for {component}.{level}.{tone}")))
    };
    if level != IntensityLevel::Adaptive {
        let entry = lookup(level)?;
        return Ok(ComponentStyle {
            color: Rgb(entry.rgb),
            alpha: entry.alpha,
        });
    }
    let sample = adaptive_sample
        .ok_or_else(|| MakeupError::Parameter("adaptive level requires a skin sample".into()))?;
    let base = lookup(IntensityLevel::Light)?;
    let tint = style.geometry.adaptive_tint;
    let color = std::array::from_fn(|c| {
        let b = f64::from(base.rgb[c]);
        to_channel(b + tint * (sample.mean_rgb[c] - b))
    });
    Ok(ComponentStyle {
        color: Rgb(color),
        alpha: (base.alpha * sample.mean_intensity / 255.0).clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Point;
    use crate::landmarks::LandmarkSource;
    use crate::synthetic::template_landmarks;

    #[test]
    fn uniform_image_samples_its_colour() {
        let img = Image::filled(200, 200, Rgb::new(128, 128, 128)).unwrap();
        let lm = template_landmarks(20.0, 10.0, 160.0);
        let s = extract_adaptive_color(&img, &lm, 0.1).unwrap();
        assert_eq!(s.mean_rgb, [128.0; 3]);
        assert_eq!(s.mean_intensity, 128.0);
    }

    fn rect_landmarks(x0: f64, x1: f64, brow_y: f64, bridge_y: f64) -> LandmarkSet {
        let mut pts = template_landmarks(0.0, 0.0, 100.0).points().to_vec();
        pts[INNER_RIGHT_BROW] = Point::new(x0, brow_y);
        pts[INNER_LEFT_BROW] = Point::new(x1, brow_y);
        pts[NOSE_BRIDGE_TOP] = Point::new((x0 + x1) / 2.0, bridge_y);
        LandmarkSet::new(pts, LandmarkSource::InMemory, 100, 100).unwrap()
    }

    #[test]
    fn half_black_half_white_averages_to_mid_grey() {
        // rectangle [30, 50] x [20, 30] shrinks to [32, 48] x [21, 29]:
        // pixel columns 32..=47 (16 wide), rows 21..=28. Left 8 columns black,
        // right 8 white.
        let mut img = Image::filled(100, 100, Rgb::new(90, 10, 200)).unwrap();
        for y in 0..100 {
            for x in 0..100 {
                if (32..40).contains(&x) {
                    img.set(x, y, Rgb::BLACK);
                } else if (40..48).contains(&x) {
                    img.set(x, y, Rgb::WHITE);
                }
            }
        }
        let s = extract_adaptive_color(&img, &rect_landmarks(30.0, 50.0, 20.0, 30.0), 0.1).unwrap();
        assert_eq!(s.pixel_count, 16 * 8);
        assert_eq!(s.mean_rgb, [127.5; 3]);
    }

    #[test]
    fn collapsed_rectangle_fails() {
        let img = Image::filled(100, 100, Rgb::WHITE).unwrap();
        let lm = rect_landmarks(40.0, 40.0, 30.0, 30.0);
        assert!(matches!(extract_adaptive_color(&img, &lm, 0.1), Err(MakeupError::SampleFailed { .. })));
    }

    #[test]
    fn fixed_levels_are_table_lookups() {
        let style = StyleConfig::builtin();
        let got = resolve_component_style(Component::Lipstick, IntensityLevel::Light, SkinTone::Medium, None, &style).unwrap();
        // as shipped in assets/default_style.json
        assert_eq!(got, ComponentStyle { color: Rgb::new(172, 42, 62), alpha: 0.27 });
        let heavy = resolve_component_style(Component::Blush, IntensityLevel::Heavy, SkinTone::Deep, None, &style).unwrap();
        let light = resolve_component_style(Component::Blush, IntensityLevel::Light, SkinTone::Deep, None, &style).unwrap();
        assert!(heavy.alpha > light.alpha);
    }

    #[test]
    fn adaptive_scales_and_tints() {
        let style = StyleConfig::builtin();
        let light = style.entry(Component::Lipstick, IntensityLevel::Light, SkinTone::Light).unwrap();
        let bright = AdaptiveColorSample { mean_rgb: [255.0; 3], mean_intensity: 255.0, pixel_count: 10 };
        let got = resolve_component_style(Component::Lipstick, IntensityLevel::Adaptive, SkinTone::Light, Some(&bright), &style).unwrap();
        assert_eq!(got.alpha, light.alpha);
        // 198 + 0.25 * (255 - 198) = 212.25 ; 58 + 0.25 * 197 = 107.25 ; 82 + 0.25 * 173 = 125.25
        assert_eq!(got.color, Rgb::new(212, 107, 125));

        let grey = AdaptiveColorSample { mean_rgb: [102.0; 3], mean_intensity: 102.0, pixel_count: 10 };
        let got = resolve_component_style(Component::Lipstick, IntensityLevel::Adaptive, SkinTone::Light, Some(&grey), &style).unwrap();
        assert!((got.alpha - light.alpha * 0.4).abs() < 1e-12);
    }

    #[test]
    fn adaptive_without_sample_is_an_error() {
        let style = StyleConfig::builtin();
        assert!(matches!(
            resolve_component_style(Component::Blush, IntensityLevel::Adaptive, SkinTone::Deep, None, &style),
            Err(MakeupError::Parameter(_))
        ));
    }
}

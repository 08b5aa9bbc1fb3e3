use super::{
    classify_skin_tone, component_mask, extract_adaptive_color, resolve_component_style, AdaptiveColorSample,
    Component, Geometry, MakeupError, SkinTone, StyleConfig, TestCaseId,
};
use crate::imaging::{alpha_blend, gaussian_blur, kernel_radius, Image, Rgb};
use crate::landmarks::LandmarkSet;

/// Paint one component: rasterise its region, blend `color` at `alpha`, then
/// blur inside the region dilated by the kernel radius.
///
/// `alpha == 0` returns the input unchanged.
pub fn apply_component(
    image: &Image,
    landmarks: &LandmarkSet,
    component: Component,
    color: Rgb,
    alpha: f64,
    blur_sigma: f64,
    geometry: &Geometry,
) -> Result<Image, MakeupError> {
    let mask = component_mask(component, landmarks, geometry, image.width(), image.height())?;
    let blended = alpha_blend(image, color, &mask, alpha)?;
    if alpha == 0.0 || blur_sigma == 0.0 {
        return Ok(blended);
    }
    let soften = mask.dilate(kernel_radius(blur_sigma));
    Ok(gaussian_blur(&blended, blur_sigma, Some(&soften))?)
}

/// Result of applying a test case to one image.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub image: Image,
    pub sample: AdaptiveColorSample,
    pub tone: SkinTone,
    /// Components whose region was degenerate and so were left out.
    pub skipped: Vec<Component>,
}

/// Apply every component of `tc` in the fixed order, with styles resolved
/// for the test case's level and the skin tone sampled from the input.
pub fn apply_test_case(
    image: &Image,
    landmarks: &LandmarkSet,
    tc: TestCaseId,
    style: &StyleConfig,
) -> Result<Perturbation, MakeupError> {
    let geometry = &style.geometry;
    let sample = extract_adaptive_color(image, landmarks, geometry.sample_shrink)?;
    let tone = classify_skin_tone(sample.mean_intensity, &style.tones)?;
    let mut current = image.clone();
    let mut skipped = Vec::new();
    for &component in tc.components(style.layout) {
        let resolved = resolve_component_style(component, tc.level(), tone, Some(&sample), style)?;
        match apply_component(
            &current,
            landmarks,
            component,
            resolved.color,
            resolved.alpha,
            geometry.blur_sigma,
            geometry,
        ) {
            Ok(next) => current = next,
            Err(MakeupError::DegenerateRegion(c)) => {
                log::warn!("{tc}: skipped degenerate {c} region");
                skipped.push(c);
            }
            Err(other) => return Err(other),
        }
    }
    Ok(Perturbation {
        image: current,
        sample,
        tone,
        skipped,
    })
}

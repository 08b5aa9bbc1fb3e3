//! Landmark-driven cosmetic perturbations.
//!
//! Four components (eyeshadow, eyeliner, blush, lipstick) are painted onto a
//! face by rasterising a region built from landmarks, alpha-blending a colour
//! into it and softening the result with a masked Gaussian blur. Colours and
//! opacities come from a versioned [`StyleConfig`]; the seven test cases
//! combine components at a given [`IntensityLevel`].

mod apply;
mod color;
mod regions;
mod style;

pub use apply::{apply_component, apply_test_case, Perturbation};
pub use color::{extract_adaptive_color, resolve_component_style, AdaptiveColorSample, ComponentStyle};
pub use regions::{component_mask, test_case_mask};
pub use style::{Geometry, StyleConfig, StyleEntry, StyleError, TestCaseLayout, ToneThresholds, STYLE_VERSION};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::imaging::ImagingError;

#[derive(Debug, thiserror::Error)]
pub enum MakeupError {
    #[error("skin sample failed: rectangle covers {pixels} pixels (need at least 4)")]
    SampleFailed { pixels: usize },
    #[error("degenerate {0} region")]
    DegenerateRegion(Component),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// A makeup component. Declaration order is the application order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Eyeshadow,
    Eyeliner,
    Blush,
    Lipstick,
}

impl Component {
    /// Fixed application order: overlapping eye regions layer deterministically.
    pub const ORDER: [Component; 4] = [
        Component::Eyeshadow,
        Component::Eyeliner,
        Component::Blush,
        Component::Lipstick,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Eyeshadow => "eyeshadow",
            Component::Eyeliner => "eyeliner",
            Component::Blush => "blush",
            Component::Lipstick => "lipstick",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = MakeupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Component::ORDER
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MakeupError::Parameter(format!("unknown component `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityLevel {
    Adaptive,
    Light,
    Medium,
    Heavy,
}

impl IntensityLevel {
    pub fn name(self) -> &'static str {
        match self {
            IntensityLevel::Adaptive => "adaptive",
            IntensityLevel::Light => "light",
            IntensityLevel::Medium => "medium",
            IntensityLevel::Heavy => "heavy",
        }
    }
}

impl fmt::Display for IntensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Skin tone category derived from the adaptive sample's mean intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkinTone {
    Light,
    Medium,
    Deep,
}

impl SkinTone {
    pub const ALL: [SkinTone; 3] = [SkinTone::Light, SkinTone::Medium, SkinTone::Deep];

    pub fn name(self) -> &'static str {
        match self {
            SkinTone::Light => "light",
            SkinTone::Medium => "medium",
            SkinTone::Deep => "deep",
        }
    }
}

impl fmt::Display for SkinTone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bucket a mean intensity in `[0, 255]` into a skin tone.
pub fn classify_skin_tone(intensity: f64, thresholds: &ToneThresholds) -> Result<SkinTone, MakeupError> {
    if !(0.0..=255.0).contains(&intensity) {
        return Err(MakeupError::Parameter(format!(
            "intensity must lie in [0, 255], got {intensity}"
        )));
    }
    Ok(if intensity >= thresholds.light_min {
        SkinTone::Light
    } else if intensity >= thresholds.medium_min {
        SkinTone::Medium
    } else {
        SkinTone::Deep
    })
}

/// The seven makeup test cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TestCaseId {
    #[serde(rename = "TC01")]
    Tc01,
    #[serde(rename = "TC02")]
    Tc02,
    #[serde(rename = "TC03")]
    Tc03,
    #[serde(rename = "TC04")]
    Tc04,
    #[serde(rename = "TC05")]
    Tc05,
    #[serde(rename = "TC06")]
    Tc06,
    #[serde(rename = "TC07")]
    Tc07,
}

const ALL_COMPONENTS: &[Component] = &Component::ORDER;
const EYES: &[Component] = &[Component::Eyeshadow, Component::Eyeliner];
const BLUSH: &[Component] = &[Component::Blush];
const LIPS: &[Component] = &[Component::Lipstick];

impl TestCaseId {
    pub const ALL: [TestCaseId; 7] = [
        TestCaseId::Tc01,
        TestCaseId::Tc02,
        TestCaseId::Tc03,
        TestCaseId::Tc04,
        TestCaseId::Tc05,
        TestCaseId::Tc06,
        TestCaseId::Tc07,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestCaseId::Tc01 => "TC01",
            TestCaseId::Tc02 => "TC02",
            TestCaseId::Tc03 => "TC03",
            TestCaseId::Tc04 => "TC04",
            TestCaseId::Tc05 => "TC05",
            TestCaseId::Tc06 => "TC06",
            TestCaseId::Tc07 => "TC07",
        }
    }

    pub fn level(self) -> IntensityLevel {
        match self {
            TestCaseId::Tc01 => IntensityLevel::Adaptive,
            TestCaseId::Tc03 => IntensityLevel::Medium,
            TestCaseId::Tc04 => IntensityLevel::Heavy,
            _ => IntensityLevel::Light,
        }
    }

    /// Components applied by this test case, in application order.
    pub fn components(self, layout: TestCaseLayout) -> &'static [Component] {
        match (self, layout) {
            (TestCaseId::Tc05, TestCaseLayout::Tc05Blush) | (TestCaseId::Tc06, TestCaseLayout::Tc05Eyes) => BLUSH,
            (TestCaseId::Tc05, TestCaseLayout::Tc05Eyes) | (TestCaseId::Tc06, TestCaseLayout::Tc05Blush) => EYES,
            (TestCaseId::Tc07, _) => LIPS,
            _ => ALL_COMPONENTS,
        }
    }

    pub fn label(self, layout: TestCaseLayout) -> String {
        let what = match self.components(layout) {
            c if c.len() == 4 => "make-up",
            [Component::Blush] => "blush",
            [Component::Lipstick] => "lipstick",
            _ => "make-up on eyes",
        };
        format!("{} ({} {what})", self.name(), capitalise(self.level().name()))
    }
}

fn capitalise(s: &str) -> String {
    let mut chars = s.chars();
    chars
        .next()
        .map(|c| c.to_uppercase().chain(chars).collect())
        .unwrap_or_default()
}

impl fmt::Display for TestCaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestCaseId {
    type Err = MakeupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        TestCaseId::ALL
            .into_iter()
            .find(|tc| tc.name() == upper)
            .ok_or_else(|| MakeupError::Parameter(format!("unknown test case `{s}`")))
    }
}

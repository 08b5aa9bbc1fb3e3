use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Component, IntensityLevel, SkinTone};
use crate::imaging::Rgb;

pub const STYLE_VERSION: &str = "facemt-style/1";

const DEFAULT_STYLE: &str = include_str!("../../assets/default_style.json");

#[derive(Debug, thiserror::Error)]
pub enum StyleError {
    #[error("cannot read style file {path}: {cause}")]
    Io { path: String, cause: String },
    #[error("malformed style file {source_name}: {cause}")]
    Parse { source_name: String, cause: String },
    #[error("style file {source_name} has version `{found}`, expected `{STYLE_VERSION}`")]
    Version { source_name: String, found: String },
    #[error("style file {source_name} is missing `{key}`")]
    MissingEntry { source_name: String, key: String },
    #[error("style file {source_name}: {message}")]
    Invalid { source_name: String, message: String },
}

/// Region geometry and blending constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Eyeliner strip height as a fraction of the inter-ocular distance.
    pub eyeliner_extrusion: f64,
    /// Blush radius as a fraction of the inter-ocular distance.
    pub blush_radius: f64,
    /// Vertical / horizontal radius ratio of the blush ellipse.
    pub blush_aspect: f64,
    /// Fraction trimmed from each side of the skin sample rectangle.
    pub sample_shrink: f64,
    pub blur_sigma: f64,
    pub samples_per_segment: usize,
    /// How far adaptive colours are pulled toward the sampled skin colour.
    pub adaptive_tint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneThresholds {
    pub light_min: f64,
    pub medium_min: f64,
}

impl Default for ToneThresholds {
    fn default() -> Self {
        Self {
            light_min: 170.0,
            medium_min: 100.0,
        }
    }
}

/// Which of TC05/TC06 paints blush and which paints the eyes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestCaseLayout {
    /// TC05 = light blush, TC06 = light eyes.
    #[default]
    Tc05Blush,
    /// TC05 = light eyes, TC06 = light blush.
    Tc05Eyes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleEntry {
    pub rgb: [u8; 3],
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StyleDocument {
    version: String,
    geometry: Geometry,
    #[serde(default)]
    skin_tone: ToneThresholds,
    #[serde(default)]
    test_case_layout: TestCaseLayout,
    styles: BTreeMap<String, StyleEntry>,
}

/// A validated style file plus the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleConfig {
    pub geometry: Geometry,
    pub tones: ToneThresholds,
    pub layout: TestCaseLayout,
    entries: BTreeMap<(Component, IntensityLevel, SkinTone), StyleEntry>,
    source: String,
    hash: String,
}

const FIXED_LEVELS: [IntensityLevel; 3] = [IntensityLevel::Light, IntensityLevel::Medium, IntensityLevel::Heavy];

impl StyleConfig {
    /// The style file shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json("built-in", DEFAULT_STYLE.as_bytes()).expect("built-in style file is valid")
    }

    pub fn builtin_json() -> &'static str {
        DEFAULT_STYLE
    }

    pub fn load(path: &Path) -> Result<Self, StyleError> {
        let bytes = std::fs::read(path).map_err(|e| StyleError::Io {
            path: path.display().to_string(),
            cause: e.to_string(),
        })?;
        Self::from_json(&path.display().to_string(), &bytes)
    }

    pub fn from_json(source_name: &str, bytes: &[u8]) -> Result<Self, StyleError> {
        let src = || source_name.to_string();
        let doc: StyleDocument = serde_json::from_slice(bytes).map_err(|e| StyleError::Parse {
            source_name: src(),
            cause: e.to_string(),
        })?;
        if doc.version != STYLE_VERSION {
            return Err(StyleError::Version {
                source_name: src(),
                found: doc.version,
            });
        }
        let invalid = |message: String| StyleError::Invalid {
            source_name: src(),
            message,
        };

        let g = &doc.geometry;
        let fractions = [
            ("eyeliner_extrusion", g.eyeliner_extrusion),
            ("blush_radius", g.blush_radius),
            ("blush_aspect", g.blush_aspect),
        ];
        for (name, v) in fractions {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("geometry.{name} must be positive, got {v}")));
            }
        }
        if !(0.0..0.5).contains(&g.sample_shrink) {
            return Err(invalid(format!("geometry.sample_shrink must lie in [0, 0.5), got {}", g.sample_shrink)));
        }
        if !(g.blur_sigma.is_finite() && g.blur_sigma >= 0.0) {
            return Err(invalid(format!("geometry.blur_sigma must be >= 0, got {}", g.blur_sigma)));
        }
        if g.samples_per_segment == 0 {
            return Err(invalid("geometry.samples_per_segment must be positive".into()));
        }
        if !(0.0..=1.0).contains(&g.adaptive_tint) {
            return Err(invalid(format!("geometry.adaptive_tint must lie in [0, 1], got {}", g.adaptive_tint)));
        }
        let t = &doc.skin_tone;
        if !(0.0 <= t.medium_min && t.medium_min <= t.light_min && t.light_min <= 255.0) {
            return Err(invalid("skin_tone thresholds must satisfy 0 <= medium_min <= light_min <= 255".into()));
        }

        let mut entries = BTreeMap::new();
        for component in Component::ORDER {
            for tone in SkinTone::ALL {
                let mut previous: Option<f64> = None;
                for level in FIXED_LEVELS {
                    let key = style_key(component, level, tone);
                    let entry = *doc.styles.get(&key).ok_or_else(|| StyleError::MissingEntry {
                        source_name: src(),
                        key: key.clone(),
                    })?;
                    if !(0.0..=1.0).contains(&entry.alpha) {
                        return Err(invalid(format!("{key}.alpha must lie in [0, 1], got {}", entry.alpha)));
                    }
                    if previous.is_some_and(|p| entry.alpha <= p) {
                        return Err(invalid(format!(
                            "alpha must strictly increase light < medium < heavy for {component}.{tone}"
                        )));
                    }
                    previous = Some(entry.alpha);
                    entries.insert((component, level, tone), entry);
                }
            }
        }
        if let Some(extra) = doc.styles.keys().find(|k| !is_known_key(k)) {
            return Err(invalid(format!("unknown style key `{extra}`")));
        }

        Ok(Self {
            geometry: doc.geometry,
            tones: doc.skin_tone,
            layout: doc.test_case_layout,
            entries,
            source: src(),
            hash: hex::encode(Sha256::digest(bytes)),
        })
    }

    /// Table entry for a fixed (non-adaptive) level.
    pub fn entry(&self, component: Component, level: IntensityLevel, tone: SkinTone) -> Option<StyleEntry> {
        self.entries.get(&(component, level, tone)).copied()
    }

    pub fn color(&self, component: Component, level: IntensityLevel, tone: SkinTone) -> Option<Rgb> {
        self.entry(component, level, tone).map(|e| Rgb(e.rgb))
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Hex SHA-256 of the style file bytes.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

fn style_key(component: Component, level: IntensityLevel, tone: SkinTone) -> String {
    format!("{component}.{level}.{tone}")
}

fn is_known_key(key: &str) -> bool {
    Component::ORDER.iter().any(|&c| {
        FIXED_LEVELS
            .iter()
            .any(|&l| SkinTone::ALL.iter().any(|&t| style_key(c, l, t) == key))
    })
}

//! Deterministic in-process classifiers for self-testing the harness.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{ClassifyError, Classifier, Query};
use crate::imaging::Image;

/// Always returns the same score.
#[derive(Debug, Clone)]
pub struct ConstantStub {
    score: f64,
}

impl ConstantStub {
    pub fn new(score: f64) -> Result<Self, String> {
        if !(0.0..=1.0).contains(&score) {
            return Err(format!("constant score {score} outside [0, 1]"));
        }
        Ok(ConstantStub { score })
    }
}

impl Classifier for ConstantStub {
    fn describe(&self) -> String {
        format!("stub:constant:{}", self.score)
    }

    fn classify(&self, _query: &Query) -> Result<f64, ClassifyError> {
        Ok(self.score)
    }
}

/// Scores 1 when the mean channel value reaches `threshold`, else 0.
#[derive(Debug, Clone)]
pub struct ThresholdMeanStub {
    threshold: f64,
}

impl ThresholdMeanStub {
    pub fn new(threshold: f64) -> Result<Self, String> {
        if !threshold.is_finite() {
            return Err("threshold must be finite".into());
        }
        Ok(ThresholdMeanStub { threshold })
    }
}

impl Classifier for ThresholdMeanStub {
    fn describe(&self) -> String {
        format!("stub:threshold-mean:{}", self.threshold)
    }

    fn classify(&self, query: &Query) -> Result<f64, ClassifyError> {
        let image = query.load()?;
        Ok(if image.mean_value() >= self.threshold { 1.0 } else { 0.0 })
    }
}

/// Scores 1 for an image bit-identical to the reference of the same name and
/// 0 for anything else, so any pixel change flips the decision.
#[derive(Debug, Clone, Default)]
pub struct PixelSensitiveStub {
    reference: HashMap<String, [u8; 32]>,
}

fn fingerprint(image: &Image) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((image.width() as u64).to_le_bytes());
    h.update((image.height() as u64).to_le_bytes());
    h.update(image.as_bytes());
    h.finalize().into()
}

impl PixelSensitiveStub {
    pub fn from_reference<'a, I>(reference: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a Image)>,
    {
        PixelSensitiveStub {
            reference: reference.into_iter().map(|(name, img)| (name.to_string(), fingerprint(img))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }
}

impl Classifier for PixelSensitiveStub {
    fn describe(&self) -> String {
        format!("stub:pixel-sensitive ({} reference images)", self.reference.len())
    }

    fn classify(&self, query: &Query) -> Result<f64, ClassifyError> {
        let expected = self
            .reference
            .get(&query.name)
            .ok_or_else(|| ClassifyError::Rejected(format!("`{}` is not in the reference corpus", query.name)))?;
        let image = query.load()?;
        Ok(if fingerprint(&image) == *expected { 1.0 } else { 0.0 })
    }
}

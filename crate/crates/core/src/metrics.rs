//! Confusion-matrix metrics with "fake" as the positive class, plus the
//! gender bias factor.

use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::dataset::{Gender, Label};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("no predictions to score")]
    Empty,
}

/// Counts over (prediction, ground truth) pairs; `fake` is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub r#fn: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, predicted: Label, truth: Label) {
        match (predicted, truth) {
            (Label::Fake, Label::Fake) => self.tp += 1,
            (Label::Fake, Label::Real) => self.fp += 1,
            (Label::Real, Label::Real) => self.tn += 1,
            (Label::Real, Label::Fake) => self.r#fn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.r#fn
    }

    pub fn metrics(&self) -> MetricSet {
        metric_set(self)
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(self, o: Self) -> Self {
        ConfusionMatrix {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            r#fn: self.r#fn + o.r#fn,
        }
    }
}

/// Build a confusion matrix from `(predicted, truth)` pairs.
pub fn confusion<I>(pairs: I) -> Result<ConfusionMatrix, MetricsError>
where
    I: IntoIterator<Item = (Label, Label)>,
{
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pairs {
        cm.record(p, t);
    }
    if cm.total() == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(cm)
}

/// Accuracy, recall, precision and F1 as percentages in `[0, 100]`.
/// `None` marks a ratio whose denominator is zero; it is never reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: Option<f64>,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 * 100.0 / den as f64)
}

pub fn metric_set(cm: &ConfusionMatrix) -> MetricSet {
    let accuracy = ratio(cm.tp + cm.tn, cm.total());
    let recall = ratio(cm.tp, cm.tp + cm.r#fn);
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    MetricSet {
        accuracy,
        recall,
        precision,
        f1: precision.zip(recall).and_then(|(p, r)| f1_score(p, r)),
    }
}

/// Harmonic mean of precision and recall; `None` when both are zero.
/// Works on any consistent scale (fractions or percentages).
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let den = precision + recall;
    (den > 0.0).then(|| 2.0 * precision * recall / den)
}

/// Which gender a classifier is more accurate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Favored {
    Male,
    Female,
    None,
}

impl From<Gender> for Favored {
    fn from(g: Gender) -> Self {
        match g {
            Gender::Male => Favored::Male,
            Gender::Female => Favored::Female,
        }
    }
}

/// Per-gender accuracy (percent) and their absolute gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub acc_male: f64,
    pub acc_female: f64,
    pub bias_factor: f64,
    pub favored_gender: Favored,
}

/// `|acc_female - acc_male|`, in whatever unit the accuracies are given.
pub fn bias_factor(acc_male: f64, acc_female: f64) -> BiasReport {
    let favored_gender = if acc_male > acc_female {
        Favored::Male
    } else if acc_female > acc_male {
        Favored::Female
    } else {
        Favored::None
    };
    BiasReport {
        acc_male,
        acc_female,
        bias_factor: (acc_female - acc_male).abs(),
        favored_gender,
    }
}

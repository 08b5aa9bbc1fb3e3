//! Metamorphic robustness and gender-fairness testing for black-box face
//! classifiers.
//!
//! The harness paints landmark-driven makeup onto test images, classifies the
//! original and perturbed corpora through a uniform protocol, and compares
//! gender-stratified confusion-matrix metrics between the two.

pub mod corpus;
pub mod dataset;
pub mod gateway;
pub mod imaging;
pub mod landmarks;
pub mod makeup;
pub mod metrics;
pub mod mt;
pub mod pool;
pub mod report;
pub mod synthetic;

pub use imaging::{Image, Mask, Point, Polyline, Rgb};
pub use landmarks::{FaceRegion, LandmarkSet};
pub use makeup::{Component, IntensityLevel, SkinTone, StyleConfig, TestCaseId};
pub use dataset::{Gender, Label, Manifest, SampleRecord, SplitSet};
pub use metrics::{BiasReport, ConfusionMatrix, MetricSet};
pub use mt::{MrId, MrResult, Verdict, VerdictConfig};

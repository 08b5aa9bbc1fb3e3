//! Turning manifest records into in-memory test subjects: decoded pixels,
//! landmarks (from files or an external detector) and an eligibility verdict.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{Manifest, SampleRecord};
use crate::imaging::{load_png, Image};
use crate::landmarks::{
    detect_landmarks_external, eligibility_filter, load_landmark_file, DetectorCommand, Eligibility, EligibilityConfig,
    LandmarkError, LandmarkSet,
};
use crate::pool::parallel_map;

/// Where landmarks come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LandmarkMode {
    /// Each record's `landmark_path` (relative to the data root).
    Files,
    /// Run a detector on every image.
    Detector(DetectorCommand),
}

impl std::str::FromStr for LandmarkMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "files" {
            return Ok(LandmarkMode::Files);
        }
        match s.strip_prefix("detector:") {
            Some(cmd) => DetectorCommand::parse(cmd).map(LandmarkMode::Detector).map_err(|e| e.to_string()),
            None => Err(format!("invalid landmark mode `{s}` (expected `files` or `detector:<command>`)")),
        }
    }
}

impl std::fmt::Display for LandmarkMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LandmarkMode::Files => f.write_str("files"),
            LandmarkMode::Detector(cmd) => write!(f, "detector:{cmd}"),
        }
    }
}

/// A record ready for perturbation and classification.
#[derive(Debug, Clone)]
pub struct Subject {
    pub record: SampleRecord,
    /// Resolved location of the image on disk.
    pub path: PathBuf,
    pub image: Arc<Image>,
    pub landmarks: LandmarkSet,
}

impl Subject {
    pub fn key(&self) -> String {
        self.record.key()
    }
}

/// Why an image was left out, and at which stage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub image_path: String,
    pub stage: String,
    pub reason: String,
}

impl Exclusion {
    pub fn new(image_path: impl Into<String>, stage: impl Into<String>, reason: impl Into<String>) -> Self {
        Exclusion {
            image_path: image_path.into(),
            stage: stage.into(),
            reason: reason.into(),
        }
    }
}

/// Outcome of loading a manifest: usable subjects in manifest order, and an
/// exclusion for every record that could not be used.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub subjects: Vec<Subject>,
    pub exclusions: Vec<Exclusion>,
}

fn landmarks_for(
    record: &SampleRecord,
    image_path: &Path,
    data_root: &Path,
    mode: &LandmarkMode,
    image: &Image,
) -> Result<LandmarkSet, LandmarkError> {
    let (w, h) = image.dims();
    match mode {
        LandmarkMode::Files => match &record.landmark_path {
            Some(p) => load_landmark_file(&data_root.join(p), w, h),
            None => Err(LandmarkError::NoFace {
                path: record.key(),
            }),
        },
        LandmarkMode::Detector(cmd) => detect_landmarks_external(image_path, cmd, w, h),
    }
}

/// Load images and landmarks for every record and apply the eligibility
/// filter, using up to `jobs` threads.
pub fn load_corpus(
    manifest: &Manifest,
    data_root: &Path,
    mode: &LandmarkMode,
    eligibility: &EligibilityConfig,
    jobs: usize,
) -> LoadedCorpus {
    let loaded = parallel_map(&manifest.records, jobs, |_, record| -> Result<Subject, Exclusion> {
        let path = data_root.join(&record.image_path);
        let image = load_png(&path).map_err(|e| Exclusion::new(record.key(), "load-image", e.to_string()))?;
        let landmarks = match landmarks_for(record, &path, data_root, mode, &image) {
            Ok(lm) => Some(lm),
            Err(LandmarkError::NoFace { .. }) => None,
            Err(e) => return Err(Exclusion::new(record.key(), "landmarks", e.to_string())),
        };
        match eligibility_filter(landmarks.as_ref(), eligibility) {
            Eligibility::Eligible => Ok(Subject {
                record: record.clone(),
                path,
                image: Arc::new(image),
                landmarks: landmarks.expect("eligible implies landmarks"),
            }),
            other => Err(Exclusion::new(record.key(), "eligibility", other.to_string())),
        }
    });
    let mut subjects = Vec::new();
    let mut exclusions = Vec::new();
    for r in loaded {
        match r {
            Ok(s) => subjects.push(s),
            Err(e) => {
                log::info!("excluded {} at {}: {}", e.image_path, e.stage, e.reason);
                exclusions.push(e);
            }
        }
    }
    LoadedCorpus { subjects, exclusions }
}

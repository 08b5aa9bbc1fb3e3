//! 68-point facial landmarks (iBUG 300-W ordering), named regions, and the
//! eligibility filter that decides whether an image can be made up.
//!
//! Landmarks come from precomputed JSON files or from an external detector
//! process; no detector is bundled.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::imaging::Point;

pub const LANDMARK_COUNT: usize = 68;

/// Nose tip in the 68-point layout.
pub const NOSE_TIP: usize = 30;

#[derive(Debug, thiserror::Error)]
pub enum LandmarkError {
    #[error("invalid landmarks for {path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("no face found in {path}")]
    NoFace { path: String },
    #[error("detector failed on {path} ({status}): {stderr}")]
    ProcessFailed {
        path: String,
        status: String,
        stderr: String,
    },
    #[error("detector timed out after {timeout:?} on {path}")]
    Timeout { path: String, timeout: Duration },
    #[error("detector output for {path} is not a landmark document: {cause}")]
    Unparseable { path: String, cause: String },
    #[error("cannot read {path}: {cause}")]
    Io { path: String, cause: String },
    #[error("unknown face region `{0}`")]
    UnknownRegion(String),
    #[error("detector command is empty")]
    EmptyCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandmarkSource {
    PrecomputedFile,
    ExternalDetector,
    InMemory,
}

/// Exactly 68 validated points for a single face.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Point>,
    source: LandmarkSource,
}

impl LandmarkSet {
    /// Validate `points` against an image of `width`×`height`: exactly 68
    /// finite points, at least half of them inside the frame.
    pub fn new(points: Vec<Point>, source: LandmarkSource, width: usize, height: usize) -> Result<Self, String> {
        if points.len() != LANDMARK_COUNT {
            return Err(format!("expected {LANDMARK_COUNT} points, got {}", points.len()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(format!("point {i} is not finite"));
        }
        let inside = points
            .iter()
            .filter(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= width as f64 && p.y <= height as f64)
            .count();
        if inside * 2 < LANDMARK_COUNT {
            return Err(format!(
                "only {inside} of {LANDMARK_COUNT} points lie inside the {width}x{height} image"
            ));
        }
        Ok(Self { points, source })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    pub fn source(&self) -> LandmarkSource {
        self.source
    }

    pub fn region(&self, region: FaceRegion) -> Vec<Point> {
        region.indices().map(|i| self.points[i]).collect()
    }

    /// Centre of the subject's right eye (image left).
    pub fn right_eye_center(&self) -> Point {
        Point::centroid(&self.region(FaceRegion::RightEye))
    }

    pub fn left_eye_center(&self) -> Point {
        Point::centroid(&self.region(FaceRegion::LeftEye))
    }

    pub fn interocular_distance(&self) -> f64 {
        self.right_eye_center().distance(self.left_eye_center())
    }

    pub fn nose_tip(&self) -> Point {
        self.points[NOSE_TIP]
    }
}

/// Named index ranges of the 68-point layout. "Right" is the subject's right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceRegion {
    Jaw,
    RightEyebrow,
    LeftEyebrow,
    Nose,
    RightEye,
    LeftEye,
    OuterLip,
    InnerLip,
}

impl FaceRegion {
    pub const ALL: [FaceRegion; 8] = [
        FaceRegion::Jaw,
        FaceRegion::RightEyebrow,
        FaceRegion::LeftEyebrow,
        FaceRegion::Nose,
        FaceRegion::RightEye,
        FaceRegion::LeftEye,
        FaceRegion::OuterLip,
        FaceRegion::InnerLip,
    ];

    pub fn indices(self) -> std::ops::RangeInclusive<usize> {
        match self {
            FaceRegion::Jaw => 0..=16,
            FaceRegion::RightEyebrow => 17..=21,
            FaceRegion::LeftEyebrow => 22..=26,
            FaceRegion::Nose => 27..=35,
            FaceRegion::RightEye => 36..=41,
            FaceRegion::LeftEye => 42..=47,
            FaceRegion::OuterLip => 48..=59,
            FaceRegion::InnerLip => 60..=67,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FaceRegion::Jaw => "jaw",
            FaceRegion::RightEyebrow => "right-eyebrow",
            FaceRegion::LeftEyebrow => "left-eyebrow",
            FaceRegion::Nose => "nose",
            FaceRegion::RightEye => "right-eye",
            FaceRegion::LeftEye => "left-eye",
            FaceRegion::OuterLip => "outer-lip",
            FaceRegion::InnerLip => "inner-lip",
        }
    }
}

impl fmt::Display for FaceRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaceRegion {
    type Err = LandmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FaceRegion::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| LandmarkError::UnknownRegion(s.to_string()))
    }
}

/// Points of a region looked up by name, in table order.
pub fn region_points(landmarks: &LandmarkSet, region: &str) -> Result<Vec<Point>, LandmarkError> {
    Ok(landmarks.region(region.parse()?))
}

/// On-disk / on-the-wire landmark document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandmarkDocument {
    pub image: String,
    pub faces: Vec<FaceEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaceEntry {
    pub points: Vec<[f64; 2]>,
}

impl LandmarkDocument {
    pub fn single(image: impl Into<String>, landmarks: &LandmarkSet) -> Self {
        Self {
            image: image.into(),
            faces: vec![FaceEntry {
                points: landmarks.points().iter().map(|p| [p.x, p.y]).collect(),
            }],
        }
    }

    /// Validate the first face. `Ok(None)` means the document lists no faces.
    pub fn first_face(
        &self,
        source: LandmarkSource,
        width: usize,
        height: usize,
    ) -> Result<Option<LandmarkSet>, String> {
        let Some(face) = self.faces.first() else {
            return Ok(None);
        };
        let points = face.points.iter().map(|&[x, y]| Point::new(x, y)).collect();
        LandmarkSet::new(points, source, width, height).map(Some)
    }
}

/// Load a precomputed landmark file for an image of the given size.
pub fn load_landmark_file(path: &Path, width: usize, height: usize) -> Result<LandmarkSet, LandmarkError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| LandmarkError::Io {
        path: shown.clone(),
        cause: e.to_string(),
    })?;
    let doc: LandmarkDocument = serde_json::from_str(&text).map_err(|e| LandmarkError::Invalid {
        path: shown.clone(),
        reason: e.to_string(),
    })?;
    match doc.first_face(LandmarkSource::PrecomputedFile, width, height) {
        Ok(Some(set)) => Ok(set),
        Ok(None) => Err(LandmarkError::NoFace { path: shown }),
        Err(reason) => Err(LandmarkError::Invalid { path: shown, reason }),
    }
}

/// An external landmark detector. The image path is appended as the final
/// argument; the process must print one landmark document on stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorCommand {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl DetectorCommand {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    /// Split a whitespace-separated command template.
    pub fn parse(template: &str) -> Result<Self, LandmarkError> {
        let mut words = template.split_whitespace().map(str::to_string);
        let program = words.next().ok_or(LandmarkError::EmptyCommand)?;
        Ok(Self {
            program,
            args: words.collect(),
            timeout: Self::DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl fmt::Display for DetectorCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.program)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// Run the detector on one image. A document with an empty `faces` array
/// yields [`LandmarkError::NoFace`], which callers treat as an exclusion
/// rather than a failure.
pub fn detect_landmarks_external(
    image_path: &Path,
    detector: &DetectorCommand,
    width: usize,
    height: usize,
) -> Result<LandmarkSet, LandmarkError> {
    let shown = image_path.display().to_string();
    let output = run_with_timeout(detector, image_path).map_err(|e| match e {
        RunError::Spawn(cause) => LandmarkError::ProcessFailed {
            path: shown.clone(),
            status: "spawn failed".into(),
            stderr: cause,
        },
        RunError::Timeout => LandmarkError::Timeout {
            path: shown.clone(),
            timeout: detector.timeout,
        },
    })?;
    if !output.status.success() {
        return Err(LandmarkError::ProcessFailed {
            path: shown,
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    let doc: LandmarkDocument =
        serde_json::from_slice(&output.stdout).map_err(|e| LandmarkError::Unparseable {
            path: shown.clone(),
            cause: e.to_string(),
        })?;
    match doc.first_face(LandmarkSource::ExternalDetector, width, height) {
        Ok(Some(set)) => Ok(set),
        Ok(None) => Err(LandmarkError::NoFace { path: shown }),
        Err(reason) => Err(LandmarkError::Invalid { path: shown, reason }),
    }
}

enum RunError {
    Spawn(String),
    Timeout,
}

struct Output {
    status: std::process::ExitStatus,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

fn run_with_timeout(detector: &DetectorCommand, image_path: &Path) -> Result<Output, RunError> {
    let mut child = Command::new(&detector.program)
        .args(&detector.args)
        .arg(image_path)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| RunError::Spawn(format!("{}: {e}", detector.program)))?;

    let drain = |mut pipe: Box<dyn Read + Send>| {
        std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = pipe.read_to_end(&mut buf);
            buf
        })
    };
    let stdout = drain(Box::new(child.stdout.take().expect("piped stdout")));
    let stderr = drain(Box::new(child.stderr.take().expect("piped stderr")));

    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if started.elapsed() >= detector.timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(RunError::Timeout);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(RunError::Spawn(e.to_string())),
        }
    };
    Ok(Output {
        status,
        stdout: stdout.join().unwrap_or_default(),
        stderr: stderr.join().unwrap_or_default(),
    })
}

/// Thresholds for [`eligibility_filter`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EligibilityConfig {
    /// Maximum `|d(left eye, nose) - d(right eye, nose)| / inter-ocular`.
    pub max_asymmetry: f64,
    /// Minimum inter-ocular distance in pixels.
    pub min_interocular: f64,
}

impl Default for EligibilityConfig {
    fn default() -> Self {
        Self {
            max_asymmetry: 0.35,
            min_interocular: 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Eligibility {
    Eligible,
    NoFace,
    NonFrontal { asymmetry: f64 },
    TooSmall { interocular: f64 },
}

impl Eligibility {
    pub fn is_eligible(&self) -> bool {
        matches!(self, Eligibility::Eligible)
    }
}

impl fmt::Display for Eligibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eligibility::Eligible => f.write_str("eligible"),
            Eligibility::NoFace => f.write_str("no-face"),
            Eligibility::NonFrontal { asymmetry } => write!(f, "non-frontal (asymmetry {asymmetry:.3})"),
            Eligibility::TooSmall { interocular } => write!(f, "too-small (inter-ocular {interocular:.1} px)"),
        }
    }
}

/// Asymmetry of the eye-to-nose distances relative to the inter-ocular
/// distance. Zero for a perfectly frontal, symmetric face.
pub fn asymmetry_ratio(landmarks: &LandmarkSet) -> f64 {
    let nose = landmarks.nose_tip();
    let left = landmarks.left_eye_center().distance(nose);
    let right = landmarks.right_eye_center().distance(nose);
    (left - right).abs() / landmarks.interocular_distance()
}

/// Decide whether makeup can be applied. `None` means no face was detected.
pub fn eligibility_filter(landmarks: Option<&LandmarkSet>, config: &EligibilityConfig) -> Eligibility {
    let Some(landmarks) = landmarks else {
        return Eligibility::NoFace;
    };
    let interocular = landmarks.interocular_distance();
    if interocular <= 0.0 {
        return Eligibility::TooSmall { interocular };
    }
    let asymmetry = asymmetry_ratio(landmarks);
    if asymmetry > config.max_asymmetry {
        return Eligibility::NonFrontal { asymmetry };
    }
    if interocular < config.min_interocular {
        return Eligibility::TooSmall { interocular };
    }
    Eligibility::Eligible
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::template_landmarks;
    use std::path::PathBuf;

    fn write_doc(dir: &Path, name: &str, points: Vec<[f64; 2]>) -> PathBuf {
        let path = dir.join(name);
        let doc = LandmarkDocument {
            image: "img.png".into(),
            faces: vec![FaceEntry { points }],
        };
        std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
        path
    }

    fn template_points() -> Vec<[f64; 2]> {
        template_landmarks(0.0, 0.0, 100.0).points().iter().map(|p| [p.x, p.y]).collect()
    }

    #[test]
    fn loads_well_formed_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_doc(dir.path(), "ok.json", template_points());
        let set = load_landmark_file(&path, 100, 100).unwrap();
        assert_eq!(set.points().len(), 68);
        assert_eq!(set.source(), LandmarkSource::PrecomputedFile);
    }

    #[test]
    fn rejects_wrong_count_and_out_of_bounds() {
        let dir = tempfile::tempdir().unwrap();
        let mut short = template_points();
        short.pop();
        let path = write_doc(dir.path(), "short.json", short);
        let err = load_landmark_file(&path, 100, 100).unwrap_err();
        assert!(matches!(&err, LandmarkError::Invalid { path, .. } if path.contains("short.json")));

        let path = write_doc(dir.path(), "far.json", vec![[-1000.0, -1000.0]; 68]);
        assert!(matches!(load_landmark_file(&path, 100, 100), Err(LandmarkError::Invalid { .. })));
    }

    #[test]
    fn empty_faces_is_no_face() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.json");
        std::fs::write(&path, r#"{"image":"x.png","faces":[]}"#).unwrap();
        assert!(matches!(load_landmark_file(&path, 10, 10), Err(LandmarkError::NoFace { .. })));
    }

    #[test]
    fn region_lookup() {
        let set = template_landmarks(0.0, 0.0, 100.0);
        assert_eq!(region_points(&set, "outer-lip").unwrap().len(), 12);
        let eye = region_points(&set, "right-eye").unwrap();
        assert_eq!(eye, set.points()[36..=41].to_vec());
        assert!(matches!(region_points(&set, "chin"), Err(LandmarkError::UnknownRegion(_))));
    }

    #[test]
    fn region_tables_are_consistent() {
        for r in FaceRegion::ALL {
            assert!(*r.indices().end() < LANDMARK_COUNT);
        }
        let disjoint = [
            FaceRegion::RightEye,
            FaceRegion::LeftEye,
            FaceRegion::RightEyebrow,
            FaceRegion::LeftEyebrow,
            FaceRegion::OuterLip,
            FaceRegion::InnerLip,
        ];
        for (i, a) in disjoint.iter().enumerate() {
            for b in &disjoint[i + 1..] {
                assert!(a.indices().all(|k| !b.indices().contains(&k)), "{a} overlaps {b}");
            }
        }
        // together the tables cover every landmark exactly once
        let total: usize = FaceRegion::ALL.iter().map(|r| r.indices().count()).sum();
        assert_eq!(total, LANDMARK_COUNT);
    }

    #[test]
    fn symmetric_face_is_eligible() {
        let set = template_landmarks(0.0, 0.0, 200.0);
        assert!(asymmetry_ratio(&set) < 1e-9);
        assert_eq!(eligibility_filter(Some(&set), &EligibilityConfig::default()), Eligibility::Eligible);
    }

    #[test]
    fn no_face_is_ineligible() {
        assert_eq!(eligibility_filter(None, &EligibilityConfig::default()), Eligibility::NoFace);
    }

    #[test]
    fn profile_pose_is_non_frontal() {
        // eyes at (80,100) and (120,100): inter-ocular 40. Nose tip placed on
        // the eye line at x = 116 gives distances 36 and 4, so the ratio is
        // |4 - 36| / 40 = 0.8.
        let mut pts = template_landmarks(0.0, 0.0, 200.0).points().to_vec();
        for (k, i) in (36..=41).enumerate() {
            pts[i] = Point::new(80.0 + [-5.0, -2.0, 2.0, 5.0, 2.0, -2.0][k], 100.0 + [0.0, -2.0, -2.0, 0.0, 2.0, 2.0][k]);
        }
        for (k, i) in (42..=47).enumerate() {
            pts[i] = Point::new(120.0 + [-5.0, -2.0, 2.0, 5.0, 2.0, -2.0][k], 100.0 + [0.0, -2.0, -2.0, 0.0, 2.0, 2.0][k]);
        }
        pts[NOSE_TIP] = Point::new(116.0, 100.0);
        let set = LandmarkSet::new(pts, LandmarkSource::InMemory, 200, 200).unwrap();
        assert!((asymmetry_ratio(&set) - 0.8).abs() < 1e-9);
        assert!(matches!(
            eligibility_filter(Some(&set), &EligibilityConfig::default()),
            Eligibility::NonFrontal { asymmetry } if (asymmetry - 0.8).abs() < 1e-9
        ));
    }

    #[test]
    fn tiny_face_is_too_small() {
        let set = template_landmarks(0.0, 0.0, 40.0);
        assert!(matches!(
            eligibility_filter(Some(&set), &EligibilityConfig::default()),
            Eligibility::TooSmall { .. }
        ));
    }

    #[cfg(unix)]
    mod detector {
        use super::*;

        fn script(dir: &Path, body: &str) -> DetectorCommand {
            let path = dir.join("detector.sh");
            std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
            DetectorCommand::parse(&format!("sh {}", path.display())).unwrap()
        }

        #[test]
        fn parses_detector_output() {
            let dir = tempfile::tempdir().unwrap();
            let doc = LandmarkDocument {
                image: "x".into(),
                faces: vec![FaceEntry { points: template_points() }],
            };
            let json = dir.path().join("doc.json");
            std::fs::write(&json, serde_json::to_string(&doc).unwrap()).unwrap();
            let cmd = script(dir.path(), &format!("cat {}", json.display()));
            let set = detect_landmarks_external(Path::new("face.png"), &cmd, 100, 100).unwrap();
            assert_eq!(set.source(), LandmarkSource::ExternalDetector);
        }

        #[test]
        fn empty_faces_from_detector_is_no_face() {
            let dir = tempfile::tempdir().unwrap();
            let cmd = script(dir.path(), r#"echo '{"image":"x","faces":[]}'"#);
            assert!(matches!(
                detect_landmarks_external(Path::new("face.png"), &cmd, 100, 100),
                Err(LandmarkError::NoFace { .. })
            ));
        }

        #[test]
        fn nonzero_exit_captures_stderr() {
            let dir = tempfile::tempdir().unwrap();
            let cmd = script(dir.path(), "echo 'model file missing' >&2; exit 3");
            match detect_landmarks_external(Path::new("face.png"), &cmd, 100, 100) {
                Err(LandmarkError::ProcessFailed { stderr, .. }) => assert_eq!(stderr, "model file missing"),
                other => panic!("unexpected {other:?}"),
            }
        }

        #[test]
        fn image_path_is_final_argument() {
            let dir = tempfile::tempdir().unwrap();
            let cmd = script(dir.path(), r#"echo "$1" >&2; exit 1"#);
            match detect_landmarks_external(Path::new("/tmp/some face.png"), &cmd, 100, 100) {
                Err(LandmarkError::ProcessFailed { stderr, .. }) => assert_eq!(stderr, "/tmp/some face.png"),
                other => panic!("unexpected {other:?}"),
            }
        }

        #[test]
        fn garbage_output_is_unparseable() {
            let dir = tempfile::tempdir().unwrap();
            let cmd = script(dir.path(), "echo hello");
            assert!(matches!(
                detect_landmarks_external(Path::new("face.png"), &cmd, 100, 100),
                Err(LandmarkError::Unparseable { .. })
            ));
        }

        #[test]
        fn slow_detector_times_out() {
            let dir = tempfile::tempdir().unwrap();
            let cmd = script(dir.path(), "sleep 5").with_timeout(Duration::from_millis(100));
            let started = Instant::now();
            assert!(matches!(
                detect_landmarks_external(Path::new("face.png"), &cmd, 100, 100),
                Err(LandmarkError::Timeout { .. })
            ));
            assert!(started.elapsed() < Duration::from_secs(3));
        }
    }
}

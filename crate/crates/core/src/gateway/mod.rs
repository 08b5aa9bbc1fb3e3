//! Uniform access to the classifier under test.
//!
//! Every classifier — in-process stub, line-protocol subprocess or HTTP
//! server — implements [`Classifier`]. [`classify_batch`] drives one over a
//! list of queries with bounded concurrency, retries and per-image error
//! entries.

mod conformance;
mod http;
mod protocol;
mod stub;
mod subprocess;

pub use conformance::{run_conformance, Check};
pub use http::HttpClassifier;
pub use protocol::{
    decode_image_payload, encode_image_payload, parse_incoming, Hello, Incoming, Request, Response, PROTOCOL_VERSION,
};
pub use stub::{ConstantStub, PixelSensitiveStub, ThresholdMeanStub};
pub use subprocess::SubprocessClassifier;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::{Gender, Label, SampleRecord};
use crate::imaging::Image;
use crate::makeup::TestCaseId;
use crate::pool::parallel_map;

/// Why a single classification failed.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    /// The classifier answered with an error or an invalid score. Not retried.
    #[error("rejected: {0}")]
    Rejected(String),
    /// No answer within the configured timeout. Not retried.
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    /// The channel to the classifier failed. Retried with backoff.
    #[error("transport failure: {0}")]
    Transport(String),
}

/// One image to score. Remote transports send the absolute `path` when there
/// is one (files on disk) and a base64 PNG of `image` otherwise; in-process
/// stubs use `image` directly when present.
#[derive(Debug, Clone)]
pub struct Query {
    /// Stable identifier (the manifest's image path).
    pub name: String,
    pub path: Option<PathBuf>,
    pub image: Option<Arc<Image>>,
}

impl Query {
    pub fn from_path(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Query {
            name: name.into(),
            path: Some(path.into()),
            image: None,
        }
    }

    pub fn from_image(name: impl Into<String>, image: Arc<Image>) -> Self {
        Query {
            name: name.into(),
            path: None,
            image: Some(image),
        }
    }

    /// The pixels, loading from `path` if needed.
    pub fn load(&self) -> Result<std::borrow::Cow<'_, Image>, ClassifyError> {
        if let Some(img) = &self.image {
            return Ok(std::borrow::Cow::Borrowed(img.as_ref()));
        }
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| ClassifyError::Rejected(format!("{}: no image or path", self.name)))?;
        crate::imaging::load_png(path)
            .map(std::borrow::Cow::Owned)
            .map_err(|e| ClassifyError::Rejected(e.to_string()))
    }

    /// The protocol `image` field.
    pub fn payload(&self) -> Result<String, ClassifyError> {
        match (&self.path, &self.image) {
            (Some(p), _) => {
                let abs = std::path::absolute(p).unwrap_or_else(|_| p.clone());
                Ok(abs.to_string_lossy().into_owned())
            }
            (None, Some(img)) => encode_image_payload(img).map_err(|e| ClassifyError::Rejected(e.to_string())),
            (None, None) => Err(ClassifyError::Rejected(format!("{}: no image or path", self.name))),
        }
    }
}

/// A black-box binary classifier returning the probability that an image is
/// real.
pub trait Classifier: Send + Sync {
    /// Human-readable description recorded in run manifests.
    fn describe(&self) -> String;

    /// Establish the connection and exchange protocol versions.
    fn handshake(&self) -> Result<(), ClassifyError> {
        Ok(())
    }

    fn classify(&self, query: &Query) -> Result<f64, ClassifyError>;
}

/// Transport and concurrency settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub retries: u32,
    #[serde(with = "secs")]
    pub backoff_base: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            timeout: Duration::from_secs(30),
            max_in_flight: 4,
            retries: 3,
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout.is_zero() {
            return Err("timeout must be positive".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }
}

/// Which built-in stub to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StubKind {
    Constant(f64),
    ThresholdMean(f64),
    PixelSensitive,
}

/// Parsed `--endpoint` value.
#[derive(Debug, Clone, PartialEq)]
pub enum EndpointSpec {
    /// `cmd:<program and args>`: line protocol over stdin/stdout.
    Subprocess(Vec<String>),
    /// `http:<url>`: POST `<url>/classify`.
    Http(String),
    /// `stub:<name>[:<param>]`.
    Stub(StubKind),
}

#[derive(Debug, thiserror::Error)]
#[error("invalid endpoint `{spec}`: {reason}")]
pub struct EndpointParseError {
    pub spec: String,
    pub reason: String,
}

impl FromStr for EndpointSpec {
    type Err = EndpointParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| EndpointParseError {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let (kind, rest) = s.split_once(':').ok_or_else(|| err("expected cmd:, http: or stub: prefix"))?;
        match kind {
            "cmd" => {
                let argv: Vec<String> = rest.split_whitespace().map(String::from).collect();
                if argv.is_empty() {
                    return Err(err("empty command"));
                }
                Ok(EndpointSpec::Subprocess(argv))
            }
            "http" | "https" => {
                let url = if kind == "https" || rest.starts_with("//") {
                    format!("{kind}:{rest}")
                } else {
                    rest.to_string()
                };
                if !url.starts_with("http://") && !url.starts_with("https://") {
                    return Err(err("expected http:<url> with an http:// URL"));
                }
                Ok(EndpointSpec::Http(url))
            }
            "stub" => {
                let (name, param) = match rest.split_once(':') {
                    Some((n, p)) => (n, Some(p)),
                    None => (rest, None),
                };
                let number = |default: Option<f64>| -> Result<f64, EndpointParseError> {
                    match param {
                        Some(p) => p.parse::<f64>().map_err(|_| err("stub parameter must be a number")),
                        None => default.ok_or_else(|| err("stub needs a numeric parameter")),
                    }
                };
                let kind = match name {
                    "constant" => StubKind::Constant(number(Some(1.0))?),
                    "constant-real" => StubKind::Constant(1.0),
                    "constant-fake" => StubKind::Constant(0.0),
                    "threshold-mean" => StubKind::ThresholdMean(number(None)?),
                    "pixel-sensitive" => StubKind::PixelSensitive,
                    _ => return Err(err("unknown stub (constant, constant-real, constant-fake, threshold-mean, pixel-sensitive)")),
                };
                if let StubKind::Constant(v) = kind {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(err("constant score must lie in [0, 1]"));
                    }
                }
                Ok(EndpointSpec::Stub(kind))
            }
            _ => Err(err("expected cmd:, http: or stub: prefix")),
        }
    }
}

impl fmt::Display for EndpointSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndpointSpec::Subprocess(argv) => write!(f, "cmd:{}", argv.join(" ")),
            EndpointSpec::Http(url) => write!(f, "http:{url}"),
            EndpointSpec::Stub(StubKind::Constant(v)) => write!(f, "stub:constant:{v}"),
            EndpointSpec::Stub(StubKind::ThresholdMean(t)) => write!(f, "stub:threshold-mean:{t}"),
            EndpointSpec::Stub(StubKind::PixelSensitive) => f.write_str("stub:pixel-sensitive"),
        }
    }
}

impl EndpointSpec {
    /// Instantiate the classifier. `reference` feeds the pixel-sensitive stub
    /// and is ignored otherwise.
    pub fn build<'a, I>(&self, config: &EndpointConfig, reference: I) -> Result<Box<dyn Classifier>, String>
    where
        I: IntoIterator<Item = (&'a str, &'a Image)>,
    {
        config.validate()?;
        Ok(match self {
            EndpointSpec::Subprocess(argv) => Box::new(SubprocessClassifier::new(argv.clone(), config.timeout)?),
            EndpointSpec::Http(url) => Box::new(HttpClassifier::new(url, config.timeout)),
            EndpointSpec::Stub(StubKind::Constant(v)) => Box::new(ConstantStub::new(*v)?),
            EndpointSpec::Stub(StubKind::ThresholdMean(t)) => Box::new(ThresholdMeanStub::new(*t)?),
            EndpointSpec::Stub(StubKind::PixelSensitive) => Box::new(PixelSensitiveStub::from_reference(reference)),
        })
    }
}

/// Label implied by a real-probability score.
pub fn decide(score: f64, threshold: f64) -> Label {
    if score >= threshold {
        Label::Real
    } else {
        Label::Fake
    }
}

/// `baseline` or a test case id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Corpus {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(untagged)]
    TestCase(TestCaseId),
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Corpus::Baseline => f.write_str("baseline"),
            Corpus::TestCase(tc) => write!(f, "{tc}"),
        }
    }
}

/// One classified (or failed) image. Exactly one of `score` / `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_path: String,
    pub score: Option<f64>,
    pub predicted_label: Option<Label>,
    pub ground_truth: Label,
    pub gender: Gender,
    pub test_case: Corpus,
    pub error: Option<String>,
}

impl PredictionRecord {
    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// One entry per query, in input order.
    pub records: Vec<PredictionRecord>,
    /// Set when a persistent transport failure stopped the batch; queries not
    /// attempted carry an error entry saying so.
    pub aborted: Option<String>,
}

impl BatchResult {
    pub fn error_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_error()).count()
    }
}

/// Score `records` (paired 1:1 with `queries`) with at most
/// `config.max_in_flight` requests outstanding.
pub fn classify_batch(
    classifier: &dyn Classifier,
    queries: &[Query],
    records: &[&SampleRecord],
    corpus: Corpus,
    config: &EndpointConfig,
    threshold: f64,
) -> BatchResult {
    assert_eq!(queries.len(), records.len(), "queries and records must pair up");
    let abort = AtomicBool::new(false);
    let abort_reason = std::sync::Mutex::new(None::<String>);
    let outcomes = parallel_map(queries, config.max_in_flight, |_, q| {
        if abort.load(Ordering::SeqCst) {
            return Err("not attempted: batch aborted".to_string());
        }
        let mut attempt = 0;
        loop {
            match classifier.classify(q) {
                Ok(score) if (0.0..=1.0).contains(&score) => return Ok(score),
                Ok(score) => return Err(format!("score {score} outside [0, 1]")),
                Err(ClassifyError::Transport(msg)) if attempt < config.retries => {
                    let wait = config.backoff_base * 2u32.saturating_pow(attempt);
                    log::warn!("{}: {msg}; retrying in {wait:?}", q.name);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e @ ClassifyError::Transport(_)) => {
                    abort.store(true, Ordering::SeqCst);
                    abort_reason.lock().expect("abort lock").get_or_insert_with(|| e.to_string());
                    return Err(e.to_string());
                }
                Err(e) => return Err(e.to_string()),
            }
        }
    });
    let records = outcomes
        .into_iter()
        .zip(records)
        .map(|(outcome, r)| {
            let (score, error) = match outcome {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e)),
            };
            PredictionRecord {
                image_path: r.key(),
                score,
                predicted_label: score.map(|s| decide(s, threshold)),
                ground_truth: r.label,
                gender: r.gender,
                test_case: corpus,
                error,
            }
        })
        .collect();
    BatchResult {
        records,
        aborted: abort_reason.into_inner().expect("abort lock"),
    }
}

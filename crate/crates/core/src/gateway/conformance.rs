//! Protocol conformance checks for a remote classifier.
//!
//! The checks exercise the hello exchange, id correlation across concurrent
//! requests, isolation of per-request errors and the score range.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use super::{ClassifyError, Classifier, Query};
use crate::imaging::{Image, Rgb};
use crate::pool::parallel_map;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: Result<String, String>) -> Check {
    match result {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn probe_images() -> Vec<Arc<Image>> {
    (0..8u8)
        .map(|i| Arc::new(Image::filled(32, 32, Rgb::new(i * 30, 255 - i * 30, 128)).expect("probe image")))
        .collect()
}

/// Run every check; the classifier passes if all checks pass.
pub fn run_conformance(classifier: &dyn Classifier) -> Vec<Check> {
    let mut out = vec![check(
        "hello",
        classifier.handshake().map(|_| "version accepted".to_string()).map_err(|e| e.to_string()),
    )];
    if !out[0].passed {
        return out;
    }
    let images = probe_images();
    let queries: Vec<Query> =
        images.iter().enumerate().map(|(i, img)| Query::from_image(format!("probe-{i}"), img.clone())).collect();

    let sequential: Vec<Result<f64, ClassifyError>> = queries.iter().map(|q| classifier.classify(q)).collect();
    out.push(check(
        "score-range",
        sequential
            .iter()
            .enumerate()
            .map(|(i, r)| match r {
                Ok(s) if (0.0..=1.0).contains(s) => Ok(()),
                Ok(s) => Err(format!("probe {i}: score {s} outside [0, 1]")),
                Err(e) => Err(format!("probe {i}: {e}")),
            })
            .collect::<Result<Vec<()>, String>>()
            .map(|_| format!("{} probes scored", sequential.len())),
    ));

    // Concurrent requests must come back matched to their own images.
    let concurrent = parallel_map(&queries, queries.len(), |_, q| classifier.classify(q));
    out.push(check(
        "id-correlation",
        if concurrent == sequential {
            Ok("concurrent answers match sequential answers".into())
        } else {
            Err(format!("sequential {sequential:?} vs concurrent {concurrent:?}"))
        },
    ));

    let missing = Query::from_path("missing", Path::new("/nonexistent/facemt-conformance-probe.png"));
    let isolated = match classifier.classify(&missing) {
        Err(ClassifyError::Rejected(msg)) => match classifier.classify(&queries[0]) {
            Ok(s) if Ok(s) == sequential[0] => Ok(format!("unreadable image rejected ({msg}); next request served")),
            other => Err(format!("request after an error failed: {other:?}")),
        },
        Ok(s) => Err(format!("unreadable image scored {s}")),
        Err(e) => Err(format!("unreadable image broke the channel: {e}")),
    };
    out.push(check("error-isolation", isolated));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ThresholdMeanStub;

    #[test]
    fn in_process_stub_conforms() {
        let checks = run_conformance(&ThresholdMeanStub::new(100.0).unwrap());
        assert_eq!(checks.len(), 4);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}

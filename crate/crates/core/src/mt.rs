//! Metamorphic relations over makeup perturbations and their verdicts.
//!
//! Each relation states that adding makeup of some intensity must not change
//! the classifier's decisions. A relation expands to test cases; for each one
//! the harness perturbs every eligible image, classifies the baseline and
//! perturbed corpora over the exact same image set, and compares
//! gender-stratified metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Exclusion, Subject};
use crate::dataset::{Gender, SampleRecord};
use crate::gateway::{classify_batch, BatchResult, Classifier, Corpus, EndpointConfig, PredictionRecord, Query};
use crate::makeup::{apply_test_case, Geometry, StyleConfig, TestCaseId, TestCaseLayout};
use crate::metrics::{bias_factor, confusion, BiasReport, ConfusionMatrix, MetricSet};
use crate::pool::parallel_map;

#[derive(Debug, thiserror::Error)]
pub enum MtError {
    #[error("unknown metamorphic relation `{0}` (expected MR01, MR02 or MR03)")]
    UnknownRelation(String),
    #[error("no metamorphic relations selected")]
    EmptySelection,
    #[error("baseline and perturbed predictions cover different images: {0}")]
    Pairing(String),
    #[error("{corpus}: {failed} of {total} classifications failed (limit 20%); run is unreliable")]
    Unreliable { corpus: String, failed: usize, total: usize },
    #[error("{corpus}: classifier unreachable: {reason}")]
    Transport { corpus: String, reason: String },
    #[error("no eligible images to evaluate")]
    NoSubjects,
    #[error("invalid verdict configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MrId {
    #[serde(rename = "MR01")]
    Mr01,
    #[serde(rename = "MR02")]
    Mr02,
    #[serde(rename = "MR03")]
    Mr03,
}

impl MrId {
    pub const ALL: [MrId; 3] = [MrId::Mr01, MrId::Mr02, MrId::Mr03];

    pub fn name(self) -> &'static str {
        match self {
            MrId::Mr01 => "MR01",
            MrId::Mr02 => "MR02",
            MrId::Mr03 => "MR03",
        }
    }
}

impl fmt::Display for MrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MrId {
    type Err = MtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MrId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MtError::UnknownRelation(s.trim().to_string()))
    }
}

/// Parse a comma-separated relation list such as `MR01,MR03`.
pub fn parse_mr_list(s: &str) -> Result<Vec<MrId>, MtError> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetamorphicRelation {
    pub id: MrId,
    pub description: &'static str,
    pub causal_parents: &'static [MrId],
    pub test_cases: &'static [TestCaseId],
}

const RELATIONS: [MetamorphicRelation; 3] = [
    MetamorphicRelation {
        id: MrId::Mr01,
        description: "Adding makeup adapted to the subject's skin tone should not change the classifier's decisions.",
        causal_parents: &[],
        test_cases: &[TestCaseId::Tc01],
    },
    MetamorphicRelation {
        id: MrId::Mr02,
        description: "Adding full makeup at light, medium or heavy intensity should not change the classifier's decisions.",
        causal_parents: &[MrId::Mr01],
        test_cases: &[TestCaseId::Tc02, TestCaseId::Tc03, TestCaseId::Tc04],
    },
    MetamorphicRelation {
        id: MrId::Mr03,
        description: "Adding light makeup to a single facial region should not change the classifier's decisions.",
        causal_parents: &[MrId::Mr01, MrId::Mr02],
        test_cases: &[TestCaseId::Tc05, TestCaseId::Tc06, TestCaseId::Tc07],
    },
];

pub fn relation(id: MrId) -> &'static MetamorphicRelation {
    &RELATIONS[id as usize]
}

/// Expand relations to `(relation, test case)` pairs in table order, with
/// duplicates removed.
pub fn build_suite(ids: &[MrId]) -> Result<Vec<(MrId, TestCaseId)>, MtError> {
    if ids.is_empty() {
        return Err(MtError::EmptySelection);
    }
    let mut selected = ids.to_vec();
    selected.sort();
    selected.dedup();
    Ok(selected
        .into_iter()
        .flat_map(|m| relation(m).test_cases.iter().map(move |&tc| (m, tc)))
        .collect())
}

/// Thresholds that decide whether a relation holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictConfig {
    /// Largest tolerated |accuracy change| per gender, in percentage points.
    pub max_accuracy_delta_pp: f64,
    /// Largest tolerated fraction of images whose decision flips, per gender.
    pub max_flip_rate: f64,
    /// Scores at or above this are "real".
    pub threshold: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        VerdictConfig {
            max_accuracy_delta_pp: 1.0,
            max_flip_rate: 0.02,
            threshold: 0.5,
        }
    }
}

impl VerdictConfig {
    pub fn validate(&self) -> Result<(), MtError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.max_accuracy_delta_pp) || !ok(self.max_flip_rate) {
            return Err(MtError::Config("thresholds must be finite and nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(MtError::Config("decision threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
        })
    }
}

/// Confusion counts and metrics for one gender in one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

impl Evaluation {
    fn of(cm: ConfusionMatrix) -> Self {
        Evaluation {
            confusion: cm,
            metrics: cm.metrics(),
        }
    }
}

/// Baseline vs perturbed comparison for one gender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderComparison {
    pub gender: Gender,
    pub images: usize,
    pub baseline: Evaluation,
    pub perturbed: Evaluation,
    /// Perturbed minus baseline accuracy, percentage points.
    pub accuracy_delta: Option<f64>,
    pub flips: usize,
    /// `flips / images`.
    pub flip_rate: Option<f64>,
    /// Images whose pixels the perturbation actually changed.
    pub changed_images: usize,
    /// Flips among changed images only.
    pub flip_rate_changed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCaseResult {
    pub test_case: TestCaseId,
    pub label: String,
    pub images: usize,
    pub per_gender: Vec<GenderComparison>,
    pub bias_baseline: Option<BiasReport>,
    pub bias_perturbed: Option<BiasReport>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrResult {
    pub mr_id: MrId,
    pub description: String,
    pub causal_parents: Vec<MrId>,
    pub test_cases: Vec<TestCaseResult>,
    pub verdict: Verdict,
}

impl MrResult {
    fn assemble(id: MrId, test_cases: Vec<TestCaseResult>) -> Self {
        let rel = relation(id);
        let verdict = if test_cases.iter().any(|t| t.verdict == Verdict::Violated) {
            Verdict::Violated
        } else {
            Verdict::Satisfied
        };
        MrResult {
            mr_id: id,
            description: rel.description.to_string(),
            causal_parents: rel.causal_parents.to_vec(),
            test_cases,
            verdict,
        }
    }
}

/// Apply the dual-threshold rule to per-gender `(accuracy delta pp, flip
/// rate)` pairs. Returns the verdict and one reason per tripped condition.
pub fn verdict(per_gender: &[(Gender, Option<f64>, Option<f64>)], config: &VerdictConfig) -> (Verdict, Vec<String>) {
    let mut reasons = Vec::new();
    for &(g, delta, flip) in per_gender {
        if let Some(d) = delta.filter(|d| d.abs() > config.max_accuracy_delta_pp) {
            reasons.push(format!(
                "{g} accuracy delta {d:+.2} pp exceeds {:.2} pp",
                config.max_accuracy_delta_pp
            ));
        }
        if let Some(f) = flip.filter(|&f| f > config.max_flip_rate) {
            reasons.push(format!("{g} flip rate {f:.4} exceeds {:.4}", config.max_flip_rate));
        }
    }
    let v = if reasons.is_empty() { Verdict::Satisfied } else { Verdict::Violated };
    (v, reasons)
}

/// Selects the baseline or perturbed accuracy from a `(baseline, perturbed)` pair.
type AccuracyPick = fn(&(Option<f64>, Option<f64>)) -> Option<f64>;

/// Compare paired baseline and perturbed predictions for one test case.
/// `changed` names the images whose pixels differ from the baseline.
pub fn evaluate_pair(
    test_case: TestCaseId,
    layout: TestCaseLayout,
    baseline: &[PredictionRecord],
    perturbed: &[PredictionRecord],
    changed: &dyn Fn(&str) -> bool,
    config: &VerdictConfig,
) -> Result<TestCaseResult, MtError> {
    let index = |records: &[PredictionRecord]| -> Result<BTreeMap<String, PredictionRecord>, MtError> {
        let mut m = BTreeMap::new();
        for r in records {
            if r.is_error() {
                return Err(MtError::Pairing(format!("{} is an error entry", r.image_path)));
            }
            if m.insert(r.image_path.clone(), r.clone()).is_some() {
                return Err(MtError::Pairing(format!("{} appears twice", r.image_path)));
            }
        }
        Ok(m)
    };
    let base = index(baseline)?;
    let pert = index(perturbed)?;
    if let Some(k) = base.keys().find(|k| !pert.contains_key(*k)) {
        return Err(MtError::Pairing(format!("{k} missing from perturbed corpus")));
    }
    if let Some(k) = pert.keys().find(|k| !base.contains_key(*k)) {
        return Err(MtError::Pairing(format!("{k} missing from baseline corpus")));
    }

    let mut per_gender = Vec::new();
    let mut accuracy = BTreeMap::new();
    for g in Gender::ALL {
        let pairs: Vec<(&PredictionRecord, &PredictionRecord)> =
            base.values().filter(|b| b.gender == g).map(|b| (b, &pert[&b.image_path])).collect();
        let cm = |perturbed_side: bool| {
            confusion(pairs.iter().map(|&(b, p)| {
                let r = if perturbed_side { p } else { b };
                (r.predicted_label.expect("scored"), r.ground_truth)
            }))
            .unwrap_or_default()
        };
        let b = Evaluation::of(cm(false));
        let p = Evaluation::of(cm(true));
        let flipped = |x: &&(&PredictionRecord, &PredictionRecord)| x.0.predicted_label != x.1.predicted_label;
        let flips = pairs.iter().filter(flipped).count();
        let changed_pairs: Vec<_> = pairs.iter().filter(|x| changed(&x.0.image_path)).collect();
        let changed_flips = changed_pairs.iter().filter(|x| flipped(x)).count();
        let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let delta = p.metrics.accuracy.zip(b.metrics.accuracy).map(|(a, z)| a - z);
        accuracy.insert(g, (b.metrics.accuracy, p.metrics.accuracy));
        per_gender.push(GenderComparison {
            gender: g,
            images: pairs.len(),
            baseline: b,
            perturbed: p,
            accuracy_delta: delta,
            flips,
            flip_rate: rate(flips, pairs.len()),
            changed_images: changed_pairs.len(),
            flip_rate_changed: rate(changed_flips, changed_pairs.len()),
        });
    }
    let bias = |pick: AccuracyPick| {
        let m = pick(&accuracy[&Gender::Male])?;
        let f = pick(&accuracy[&Gender::Female])?;
        Some(bias_factor(m, f))
    };
    let inputs: Vec<_> = per_gender.iter().map(|c| (c.gender, c.accuracy_delta, c.flip_rate)).collect();
    let (v, reasons) = verdict(&inputs, config);
    Ok(TestCaseResult {
        test_case,
        label: test_case.label(layout),
        images: base.len(),
        per_gender,
        bias_baseline: bias(|a| a.0),
        bias_perturbed: bias(|a| a.1),
        verdict: v,
        reasons,
    })
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub relations: Vec<MrId>,
    pub suite: Vec<(MrId, TestCaseId)>,
    pub style_source: String,
    pub style_hash: String,
    pub geometry: Geometry,
    pub test_case_layout: TestCaseLayout,
    pub verdict: VerdictConfig,
    pub endpoint: String,
    pub endpoint_config: EndpointConfig,
    pub landmarks: String,
    pub images_in_manifest: usize,
    pub images_evaluated: usize,
    pub exclusions: Vec<Exclusion>,
}

/// Output of [`Harness::run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub results: Vec<MrResult>,
    pub baseline: Vec<PredictionRecord>,
    pub exclusions: Vec<Exclusion>,
}

impl RunOutcome {
    pub fn overall(&self) -> Verdict {
        if self.results.iter().any(|r| r.verdict == Verdict::Violated) {
            Verdict::Violated
        } else {
            Verdict::Satisfied
        }
    }
}

/// Orchestrates one run: baseline classification (once), then perturbation
/// and classification per test case.
pub struct Harness<'a> {
    pub classifier: &'a dyn Classifier,
    pub endpoint: EndpointConfig,
    pub style: &'a StyleConfig,
    pub verdict: VerdictConfig,
    pub jobs: usize,
}

/// Share of failed classifications above which a corpus is unreliable.
pub const MAX_FAILURE_SHARE: f64 = 0.20;

impl Harness<'_> {
    fn classify(&self, name: &str, queries: &[Query], records: &[&SampleRecord], corpus: Corpus) -> Result<BatchResult, MtError> {
        let out = classify_batch(self.classifier, queries, records, corpus, &self.endpoint, self.verdict.threshold);
        if let Some(reason) = out.aborted {
            return Err(MtError::Transport {
                corpus: name.to_string(),
                reason,
            });
        }
        let failed = out.error_count();
        if failed as f64 > MAX_FAILURE_SHARE * queries.len() as f64 {
            return Err(MtError::Unreliable {
                corpus: name.to_string(),
                failed,
                total: queries.len(),
            });
        }
        Ok(out)
    }

    /// Run the selected relations over `subjects` (already filtered for
    /// eligibility).
    pub fn run(&self, subjects: &[Subject], relations: &[MrId]) -> Result<RunOutcome, MtError> {
        self.verdict.validate()?;
        let suite = build_suite(relations)?;
        if subjects.is_empty() {
            return Err(MtError::NoSubjects);
        }
        self.classifier.handshake().map_err(|e| MtError::Transport {
            corpus: "handshake".into(),
            reason: e.to_string(),
        })?;
        let mut exclusions = Vec::new();

        let records: Vec<&SampleRecord> = subjects.iter().map(|s| &s.record).collect();
        let queries: Vec<Query> = subjects
            .iter()
            .map(|s| Query {
                name: s.key(),
                path: Some(s.path.clone()),
                image: Some(s.image.clone()),
            })
            .collect();
        let baseline = self.classify("baseline", &queries, &records, Corpus::Baseline)?;
        let mut live = Vec::new();
        for (s, r) in subjects.iter().zip(&baseline.records) {
            match &r.error {
                Some(e) => exclusions.push(Exclusion::new(s.key(), "classify:baseline", e.clone())),
                None => live.push((s, r)),
            }
        }

        let mut by_mr: BTreeMap<MrId, Vec<TestCaseResult>> = BTreeMap::new();
        for (mr, tc) in suite {
            log::info!("{mr}/{tc}: perturbing {} images", live.len());
            let perturbed = parallel_map(&live, self.jobs, |_, (s, _)| apply_test_case(&s.image, &s.landmarks, tc, self.style));
            let stage = format!("perturb:{tc}");
            let mut kept = Vec::new();
            for ((s, b), p) in live.iter().zip(perturbed) {
                match p {
                    Ok(p) => {
                        if !p.skipped.is_empty() {
                            let names: Vec<String> = p.skipped.iter().map(ToString::to_string).collect();
                            exclusions.push(Exclusion::new(s.key(), format!("{stage}:partial"), format!("skipped degenerate {}", names.join(", "))));
                        }
                        kept.push((*s, *b, Arc::new(p.image)));
                    }
                    Err(e) => exclusions.push(Exclusion::new(s.key(), stage.clone(), e.to_string())),
                }
            }
            let queries: Vec<Query> = kept.iter().map(|(s, _, img)| Query::from_image(s.key(), img.clone())).collect();
            let recs: Vec<&SampleRecord> = kept.iter().map(|(s, _, _)| &s.record).collect();
            let name = format!("{mr}/{tc}");
            let out = self.classify(&name, &queries, &recs, Corpus::TestCase(tc))?;

            let mut base_pairs = Vec::new();
            let mut pert_pairs = Vec::new();
            let mut changed = std::collections::HashSet::new();
            for ((s, b, img), p) in kept.iter().zip(out.records) {
                if let Some(e) = &p.error {
                    exclusions.push(Exclusion::new(s.key(), format!("classify:{tc}"), e.clone()));
                    continue;
                }
                if **img != *s.image {
                    changed.insert(s.key());
                }
                base_pairs.push((*b).clone());
                pert_pairs.push(p);
            }
            let result = evaluate_pair(tc, self.style.layout, &base_pairs, &pert_pairs, &|k| changed.contains(k), &self.verdict)?;
            log::info!("{name}: {}", result.verdict);
            by_mr.entry(mr).or_default().push(result);
        }
        exclusions.sort();
        Ok(RunOutcome {
            results: by_mr.into_iter().map(|(id, tcs)| MrResult::assemble(id, tcs)).collect(),
            baseline: baseline.records,
            exclusions,
        })
    }
}

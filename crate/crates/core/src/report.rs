//! Report emission: the full JSON report, the run manifest, a metrics table
//! (gender × metric rows per test case, benchmark first) and chart-data CSVs.
//!
//! `report.json` contains no timestamps, so two runs with the same inputs
//! and a deterministic classifier produce byte-identical files. Wall-clock
//! information goes to `timing.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Gender;
use crate::gateway::PredictionRecord;
use crate::metrics::{bias_factor, confusion, BiasReport, ConfusionMatrix};
use crate::mt::{Evaluation, MrResult, RunManifest, RunOutcome, Verdict};

pub const REPORT_SCHEMA: &str = "facemt-report/1";
pub const BENCHMARK_LABEL: &str = "Original Sample (Benchmark)";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("cannot write {path}: {cause}")]
    Write { path: PathBuf, cause: String },
    #[error("cannot read report {path}: {cause}")]
    Read { path: PathBuf, cause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderEvaluation {
    pub gender: Gender,
    pub images: usize,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

/// Baseline metrics over every image that was classified successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub per_gender: Vec<GenderEvaluation>,
    pub bias: Option<BiasReport>,
}

impl Benchmark {
    pub fn from_predictions(records: &[PredictionRecord]) -> Self {
        let per_gender: Vec<GenderEvaluation> = Gender::ALL
            .iter()
            .map(|&g| {
                let scored: Vec<_> = records.iter().filter(|r| r.gender == g && !r.is_error()).collect();
                let cm = confusion(scored.iter().map(|r| (r.predicted_label.expect("scored"), r.ground_truth)))
                    .unwrap_or_default();
                GenderEvaluation {
                    gender: g,
                    images: scored.len(),
                    evaluation: Evaluation {
                        confusion: cm,
                        metrics: cm.metrics(),
                    },
                }
            })
            .collect();
        let acc = |i: usize| per_gender[i].evaluation.metrics.accuracy;
        let bias = acc(0).zip(acc(1)).map(|(m, f)| bias_factor(m, f));
        Benchmark { per_gender, bias }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub overall: Verdict,
    pub run: RunManifest,
    pub benchmark: Benchmark,
    pub relations: Vec<MrResult>,
}

impl Report {
    pub fn new(run: RunManifest, outcome: &RunOutcome) -> Result<Self, ReportError> {
        if outcome.results.is_empty() {
            return Err(ReportError::Empty);
        }
        Ok(Report {
            schema: REPORT_SCHEMA.to_string(),
            overall: outcome.overall(),
            run,
            benchmark: Benchmark::from_predictions(&outcome.baseline),
            relations: outcome.results.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let err = |cause: String| ReportError::Read {
            path: path.to_path_buf(),
            cause,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

/// Round half away from zero to two decimals and format. Values within
/// 1e-9 (in hundredths) of a tie count as the tie, so binary
/// representation error (e.g. 2.675) does not flip the rounding.
pub fn format_2dp(value: f64) -> String {
    let hundredths = value * 100.0;
    let nudged = hundredths + 1e-9f64.copysign(hundredths);
    let rounded = nudged.round();
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{:.2}", rounded / 100.0)
}

fn cell(value: Option<f64>) -> String {
    value.map(format_2dp).unwrap_or_else(|| "undefined".into())
}

fn metric_row(w: &mut csv::Writer<Vec<u8>>, label: &str, gender: Gender, e: &Evaluation) -> csv::Result<()> {
    let m = e.metrics;
    w.write_record([
        label,
        gender.name(),
        &cell(m.accuracy),
        &cell(m.recall),
        &cell(m.precision),
        &cell(m.f1),
    ])
}

/// `test_case,gender,accuracy,recall,precision,f1`: benchmark rows first,
/// then each test case's perturbed metrics; male before female.
pub fn metrics_table_csv(report: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut run = || -> csv::Result<()> {
        w.write_record(["test_case", "gender", "accuracy", "recall", "precision", "f1"])?;
        for g in &report.benchmark.per_gender {
            metric_row(&mut w, BENCHMARK_LABEL, g.gender, &g.evaluation)?;
        }
        for tc in report.relations.iter().flat_map(|r| &r.test_cases) {
            for g in &tc.per_gender {
                metric_row(&mut w, &tc.label, g.gender, &g.perturbed)?;
            }
        }
        Ok(())
    };
    run().expect("in-memory CSV");
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8")
}

/// `tc,gender,accuracy` for an accuracy bar chart, baseline first.
pub fn accuracy_chart_csv(report: &Report) -> String {
    let mut out = String::from("tc,gender,accuracy\n");
    for g in &report.benchmark.per_gender {
        out += &format!("baseline,{},{}\n", g.gender, cell(g.evaluation.metrics.accuracy));
    }
    for tc in report.relations.iter().flat_map(|r| &r.test_cases) {
        for g in &tc.per_gender {
            out += &format!("{},{},{}\n", tc.test_case, g.gender, cell(g.perturbed.metrics.accuracy));
        }
    }
    out
}

/// `tc,bias_factor` for a bias-factor series, baseline first.
pub fn bias_chart_csv(report: &Report) -> String {
    let mut out = String::from("tc,bias_factor\n");
    out += &format!("baseline,{}\n", cell(report.benchmark.bias.map(|b| b.bias_factor)));
    for tc in report.relations.iter().flat_map(|r| &r.test_cases) {
        out += &format!("{},{}\n", tc.test_case, cell(tc.bias_perturbed.map(|b| b.bias_factor)));
    }
    out
}

/// `mr,tc,verdict,reasons` with reasons joined by `; `.
pub fn verdicts_csv(report: &Report) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mr", "tc", "verdict", "reasons"]).expect("in-memory CSV");
    for r in &report.relations {
        for tc in &r.test_cases {
            w.write_record([r.mr_id.name(), tc.test_case.name(), &tc.verdict.to_string(), &tc.reasons.join("; ")])
                .expect("in-memory CSV");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8")
}

/// Files written by [`emit_report`].
pub const REPORT_FILES: [&str; 6] = [
    "report.json",
    "run_manifest.json",
    "metrics_table.csv",
    "accuracy_chart.csv",
    "bias_chart.csv",
    "verdicts.csv",
];

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), ReportError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| ReportError::Write {
        path,
        cause: e.to_string(),
    })
}

/// Write every report file into `out_dir`, creating it if needed.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<(), ReportError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::Write {
        path: out_dir.to_path_buf(),
        cause: e.to_string(),
    })?;
    write(out_dir, "report.json", &report.to_json())?;
    write(
        out_dir,
        "run_manifest.json",
        &(serde_json::to_string_pretty(&report.run).expect("manifest serialises") + "\n"),
    )?;
    write(out_dir, "metrics_table.csv", &metrics_table_csv(report))?;
    write(out_dir, "accuracy_chart.csv", &accuracy_chart_csv(report))?;
    write(out_dir, "bias_chart.csv", &bias_chart_csv(report))?;
    write(out_dir, "verdicts.csv", &verdicts_csv(report))
}

/// Wall-clock facts about a run, kept out of `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix: f64,
    pub finished_unix: f64,
    pub elapsed_seconds: f64,
}

pub fn write_timing(timing: &Timing, out_dir: &Path) -> Result<(), ReportError> {
    write(out_dir, "timing.json", &(serde_json::to_string_pretty(timing).expect("timing serialises") + "\n"))
}

/// Total confusion matrix over both genders of an evaluation list.
pub fn pooled(per_gender: &[GenderEvaluation]) -> ConfusionMatrix {
    per_gender.iter().fold(ConfusionMatrix::default(), |acc, g| acc + g.evaluation.confusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Subject;
    use crate::gateway::{ConstantStub, EndpointConfig, ThresholdMeanStub};
    use crate::makeup::StyleConfig;
    use crate::mt::{build_suite, Harness, MrId, VerdictConfig};
    use crate::dataset::{Label, SampleRecord};
    use crate::synthetic::synthetic_face;
    use std::sync::Arc;

    #[test]
    fn two_decimal_half_up() {
        assert_eq!(format_2dp(86.815), "86.82");
        assert_eq!(format_2dp(2.675), "2.68");
        assert_eq!(format_2dp(1.005), "1.01");
        assert_eq!(format_2dp(86.8149), "86.81");
        assert_eq!(format_2dp(-0.125), "-0.13");
        assert_eq!(format_2dp(-0.001), "0.00");
        assert_eq!(format_2dp(100.0), "100.00");
        assert_eq!(cell(None), "undefined");
    }

    fn sample_report(classifier: &dyn crate::gateway::Classifier, relations: &[MrId]) -> Report {
        let style = StyleConfig::builtin();
        let subjects: Vec<Subject> = (0..8)
            .map(|i| {
                let (img, lm) = synthetic_face(i, 96);
                let g = if i % 2 == 0 { Gender::Male } else { Gender::Female };
                let l = if i % 4 < 2 { Label::Fake } else { Label::Real };
                Subject {
                    record: SampleRecord::new(format!("f{i}.png"), l, g),
                    path: format!("f{i}.png").into(),
                    image: Arc::new(img),
                    landmarks: lm,
                }
            })
            .collect();
        let h = Harness {
            classifier,
            endpoint: EndpointConfig::default(),
            style: &style,
            verdict: VerdictConfig::default(),
            jobs: 2,
        };
        let outcome = h.run(&subjects, relations).unwrap();
        let run = RunManifest {
            tool_version: "test".into(),
            seed: 42,
            relations: relations.to_vec(),
            suite: build_suite(relations).unwrap(),
            style_source: style.source().into(),
            style_hash: style.hash().into(),
            geometry: style.geometry,
            test_case_layout: style.layout,
            verdict: VerdictConfig::default(),
            endpoint: classifier.describe(),
            endpoint_config: EndpointConfig::default(),
            landmarks: "in-memory".into(),
            images_in_manifest: 8,
            images_evaluated: 8,
            exclusions: outcome.exclusions.clone(),
        };
        Report::new(run, &outcome).unwrap()
    }

    #[test]
    fn table_has_benchmark_rows_then_test_cases() {
        let r = sample_report(&ConstantStub::new(0.0).unwrap(), &[MrId::Mr03]);
        let table = metrics_table_csv(&r);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "test_case,gender,accuracy,recall,precision,f1");
        // every prediction is "fake": half correct, recall 100, precision 50
        assert_eq!(lines[1], "Original Sample (Benchmark),male,50.00,100.00,50.00,66.67");
        assert_eq!(lines[2], "Original Sample (Benchmark),female,50.00,100.00,50.00,66.67");
        assert_eq!(lines.len(), 1 + 2 + 3 * 2);
        assert!(lines[3].starts_with("TC05 (Light blush),male,"));
        assert!(lines[8].starts_with("TC07 (Light lipstick),female,"), "{}", lines[8]);
        let bias = bias_chart_csv(&r);
        assert_eq!(bias.lines().nth(1), Some("baseline,0.00"));
        assert_eq!(accuracy_chart_csv(&r).lines().count(), 1 + 2 + 6);
    }

    #[test]
    fn undefined_metrics_are_written_as_undefined() {
        // every prediction "real": no positive predictions, precision undefined
        let r = sample_report(&ConstantStub::new(1.0).unwrap(), &[MrId::Mr01]);
        let table = metrics_table_csv(&r);
        assert!(table.lines().nth(1).unwrap().ends_with(",50.00,0.00,undefined,undefined"), "{table}");
    }

    #[test]
    fn json_round_trips_and_files_are_written() {
        let r = sample_report(&ThresholdMeanStub::new(120.0).unwrap(), &[MrId::Mr01, MrId::Mr02]);
        let dir = tempfile::tempdir().unwrap();
        emit_report(&r, dir.path()).unwrap();
        for f in REPORT_FILES {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let back = Report::load(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), r.to_json());
        assert!(r.to_json().contains(REPORT_SCHEMA));
        assert_eq!(pooled(&r.benchmark.per_gender).total(), 8);
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let r = sample_report(&ConstantStub::new(0.5).unwrap(), &[MrId::Mr01]);
        assert!(matches!(emit_report(&r, &blocker.join("sub")), Err(ReportError::Write { .. })));
    }
}

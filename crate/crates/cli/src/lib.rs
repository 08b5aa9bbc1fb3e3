//! `facemt` command-line workflows: prepare dataset splits, perturb a corpus
//! with one test case, run metamorphic relations against a classifier, check
//! protocol conformance, and generate a synthetic fixture corpus.
//!
//! Exit codes: 0 = every selected relation satisfied (or command succeeded),
//! 1 = at least one relation violated (or a conformance check failed),
//! 2 = operational failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use facemt_core::corpus::{load_corpus, Exclusion, LandmarkMode};
use facemt_core::dataset::{balance_by_gender, load_manifest, split, Gender, Label, Manifest, SampleRecord, SplitRatio};
use facemt_core::gateway::{run_conformance, EndpointConfig, EndpointSpec};
use facemt_core::imaging::save_png;
use facemt_core::landmarks::{EligibilityConfig, LandmarkDocument};
use facemt_core::makeup::{apply_test_case, StyleConfig, TestCaseId};
use facemt_core::mt::{build_suite, parse_mr_list, Harness, MrId, RunManifest, Verdict, VerdictConfig};
use facemt_core::pool::{default_jobs, parallel_map};
use facemt_core::report::{emit_report, write_timing, Report, Timing};
use facemt_core::synthetic::synthetic_face;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "facemt", version, about = "Metamorphic robustness and fairness testing for face classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Balance a manifest by gender and split it into train/validation/test.
    Prepare(PrepareArgs),
    /// Apply one test case to every eligible image of a manifest.
    Perturb(PerturbArgs),
    /// Evaluate metamorphic relations against a classifier.
    Run(RunArgs),
    /// Check that a classifier endpoint speaks the protocol correctly.
    Conform(ConformArgs),
    /// Write a synthetic face corpus with landmarks and a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Fraction of the training share moved to validation.
    #[arg(long, default_value_t = 0.10)]
    pub validation_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory that manifest paths are relative to (default: the
    /// manifest's directory).
    #[arg(long)]
    pub data_root: Option<PathBuf>,
    /// `files` (use landmark_path) or `detector:<command>`.
    #[arg(long, default_value = "files")]
    pub landmarks: String,
    /// Style file; falls back to FACEMT_STYLE, then the built-in style.
    #[arg(long, env = "FACEMT_STYLE")]
    pub style: Option<PathBuf>,
    /// Worker threads (default: logical CPUs).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Test case to apply, e.g. TC07.
    #[arg(long)]
    pub tc: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EndpointArgs {
    /// `cmd:<command>`, `http:<url>` or `stub:<name>[:<param>]`.
    #[arg(long)]
    pub endpoint: String,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    /// Maximum concurrent requests.
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
    /// Comma-separated relations.
    #[arg(long, default_value = "MR01,MR02,MR03")]
    pub mr: String,
    /// Largest tolerated per-gender accuracy change, percentage points.
    #[arg(long, default_value_t = 1.0)]
    pub max_acc_delta: f64,
    /// Largest tolerated per-gender decision flip rate.
    #[arg(long, default_value_t = 0.02)]
    pub max_flip_rate: f64,
    /// Scores at or above this count as "real".
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConformArgs {
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    /// Square image size in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse arguments and run, returning the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Prepare(a) => cmd_prepare(&a).map(|_| EXIT_OK),
        Command::Perturb(a) => cmd_perturb(&a).map(|_| EXIT_OK),
        Command::Run(a) => cmd_run(&a),
        Command::Conform(a) => cmd_conform(&a),
        Command::Synth(a) => cmd_synth(&a).map(|_| EXIT_OK),
    }
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    if !path.is_file() {
        bail!("manifest not found: {}", path.display());
    }
    Ok(load_manifest(path)?)
}

fn load_style(path: Option<&Path>) -> Result<StyleConfig> {
    match path {
        Some(p) => StyleConfig::load(p).with_context(|| format!("loading style {}", p.display())),
        None => Ok(StyleConfig::builtin()),
    }
}

fn data_root(args: &CorpusArgs) -> PathBuf {
    args.data_root
        .clone()
        .unwrap_or_else(|| args.manifest.parent().map(Path::to_path_buf).unwrap_or_default())
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Per-split, per-stratum counts written next to the split manifests.
#[derive(Debug, Serialize)]
pub struct SplitCounts {
    pub seed: u64,
    pub source_records: usize,
    pub balanced_records: usize,
    pub splits: BTreeMap<String, BTreeMap<String, usize>>,
}

fn stratum_counts(m: &Manifest) -> BTreeMap<String, usize> {
    let mut out: BTreeMap<String, usize> =
        m.counts().into_iter().map(|((g, l), n)| (format!("{g}/{l}"), n)).collect();
    out.insert("total".into(), m.len());
    out
}

pub fn cmd_prepare(a: &PrepareArgs) -> Result<SplitCounts> {
    let manifest = read_manifest(&a.manifest)?;
    let balanced = balance_by_gender(&manifest, a.seed)?;
    let ratio = SplitRatio {
        validation_fraction: a.validation_fraction,
        ..SplitRatio::default()
    };
    let set = split(&balanced, &ratio, a.seed)?;
    create_dir(&a.out)?;
    let mut splits = BTreeMap::new();
    for (name, part) in [("train", &set.train), ("validation", &set.validation), ("test", &set.test)] {
        part.save(&a.out.join(format!("{name}.csv")))?;
        splits.insert(name.to_string(), stratum_counts(part));
    }
    let counts = SplitCounts {
        seed: a.seed,
        source_records: manifest.len(),
        balanced_records: balanced.len(),
        splits,
    };
    std::fs::write(a.out.join("counts.json"), serde_json::to_string_pretty(&counts)? + "\n")?;
    println!(
        "train {} / validation {} / test {} (from {} balanced of {} records)",
        set.train.len(),
        set.validation.len(),
        set.test.len(),
        balanced.len(),
        manifest.len()
    );
    Ok(counts)
}

fn write_exclusions(path: &Path, exclusions: &[Exclusion]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["image_path", "stage", "reason"])?;
    for e in exclusions {
        w.write_record([&e.image_path, &e.stage, &e.reason])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary of a perturbation pass.
#[derive(Debug, Serialize)]
pub struct PerturbSummary {
    pub test_case: TestCaseId,
    pub label: String,
    pub seed: u64,
    pub style_source: String,
    pub style_hash: String,
    pub written: usize,
    pub excluded: usize,
}

pub fn cmd_perturb(a: &PerturbArgs) -> Result<PerturbSummary> {
    let tc: TestCaseId = a.tc.parse()?;
    let manifest = read_manifest(&a.corpus.manifest)?;
    let style = load_style(a.corpus.style.as_deref())?;
    let mode: LandmarkMode = a.corpus.landmarks.parse().map_err(anyhow::Error::msg)?;
    let jobs = a.corpus.jobs.unwrap_or_else(default_jobs);
    let corpus = load_corpus(&manifest, &data_root(&a.corpus), &mode, &EligibilityConfig::default(), jobs);
    create_dir(&a.out)?;

    let results = parallel_map(&corpus.subjects, jobs, |_, s| -> Result<SampleRecord, Exclusion> {
        let p = apply_test_case(&s.image, &s.landmarks, tc, &style)
            .map_err(|e| Exclusion::new(s.key(), format!("perturb:{tc}"), e.to_string()))?;
        let rel = s.record.image_path.with_extension("png");
        save_png(&p.image, &a.out.join(&rel)).map_err(|e| Exclusion::new(s.key(), "write", e.to_string()))?;
        Ok(SampleRecord {
            image_path: rel,
            landmark_path: None,
            ..s.record.clone()
        })
    });
    let mut exclusions = corpus.exclusions;
    let mut written = Vec::new();
    for r in results {
        match r {
            Ok(rec) => written.push(rec),
            Err(e) => exclusions.push(e),
        }
    }
    exclusions.sort();
    write_exclusions(&a.out.join("exclusions.csv"), &exclusions)?;
    Manifest::new(written.clone(), format!("{} perturbed with {tc}", a.corpus.manifest.display()))?
        .save(&a.out.join("manifest.csv"))?;
    let summary = PerturbSummary {
        test_case: tc,
        label: tc.label(style.layout),
        seed: a.seed,
        style_source: style.source().to_string(),
        style_hash: style.hash().to_string(),
        written: written.len(),
        excluded: exclusions.len(),
    };
    std::fs::write(a.out.join("perturb.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("{}: wrote {} images, excluded {}", summary.label, summary.written, summary.excluded);
    Ok(summary)
}

fn endpoint_config(a: &EndpointArgs) -> Result<(EndpointSpec, EndpointConfig)> {
    let spec: EndpointSpec = a.endpoint.parse()?;
    let timeout = std::time::Duration::try_from_secs_f64(a.timeout)
        .ok()
        .filter(|d| !d.is_zero())
        .context("--timeout must be a positive number of seconds")?;
    let cfg = EndpointConfig {
        timeout,
        max_in_flight: a.max_in_flight,
        ..EndpointConfig::default()
    };
    cfg.validate().map_err(anyhow::Error::msg)?;
    Ok((spec, cfg))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn cmd_run(a: &RunArgs) -> Result<i32> {
    let started = (unix_now(), Instant::now());
    let relations: Vec<MrId> = parse_mr_list(&a.mr)?;
    let suite = build_suite(&relations)?;
    let verdict = VerdictConfig {
        max_accuracy_delta_pp: a.max_acc_delta,
        max_flip_rate: a.max_flip_rate,
        threshold: a.threshold,
    };
    verdict.validate()?;
    let (spec, endpoint) = endpoint_config(&a.endpoint)?;
    let manifest = read_manifest(&a.corpus.manifest)?;
    let style = load_style(a.corpus.style.as_deref())?;
    let mode: LandmarkMode = a.corpus.landmarks.parse().map_err(anyhow::Error::msg)?;
    let jobs = a.corpus.jobs.unwrap_or_else(default_jobs);

    let corpus = load_corpus(&manifest, &data_root(&a.corpus), &mode, &EligibilityConfig::default(), jobs);
    let keys: Vec<String> = corpus.subjects.iter().map(|s| s.key()).collect();
    let classifier = spec
        .build(&endpoint, keys.iter().map(String::as_str).zip(corpus.subjects.iter().map(|s| s.image.as_ref())))
        .map_err(anyhow::Error::msg)?;
    let harness = Harness {
        classifier: classifier.as_ref(),
        endpoint,
        style: &style,
        verdict,
        jobs,
    };
    let outcome = harness.run(&corpus.subjects, &relations)?;

    let mut exclusions = corpus.exclusions.clone();
    exclusions.extend(outcome.exclusions.iter().cloned());
    exclusions.sort();
    let run = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: a.seed,
        relations: relations.clone(),
        suite,
        style_source: style.source().to_string(),
        style_hash: style.hash().to_string(),
        geometry: style.geometry,
        test_case_layout: style.layout,
        verdict,
        endpoint: classifier.describe(),
        endpoint_config: endpoint,
        landmarks: mode.to_string(),
        images_in_manifest: manifest.len(),
        images_evaluated: corpus.subjects.len(),
        exclusions,
    };
    let report = Report::new(run, &outcome)?;
    emit_report(&report, &a.out)?;
    write_timing(
        &Timing {
            started_unix: started.0,
            finished_unix: unix_now(),
            elapsed_seconds: started.1.elapsed().as_secs_f64(),
        },
        &a.out,
    )?;

    for r in &report.relations {
        for tc in &r.test_cases {
            println!("{} {:<32} {}", r.mr_id, tc.label, tc.verdict);
            for reason in &tc.reasons {
                println!("    {reason}");
            }
        }
    }
    println!("overall: {} (report in {})", report.overall, a.out.display());
    Ok(match report.overall {
        Verdict::Satisfied => EXIT_OK,
        Verdict::Violated => EXIT_VIOLATED,
    })
}

pub fn cmd_conform(a: &ConformArgs) -> Result<i32> {
    let (spec, endpoint) = endpoint_config(&a.endpoint)?;
    if matches!(spec, EndpointSpec::Stub(_)) {
        bail!("conformance checks apply to cmd: and http: endpoints");
    }
    let classifier = spec.build(&endpoint, std::iter::empty()).map_err(anyhow::Error::msg)?;
    let checks = run_conformance(classifier.as_ref());
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.first().is_some_and(|c| !c.passed) {
        bail!("{}", checks[0].detail);
    }
    Ok(if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_VIOLATED })
}

/// Write `count` synthetic faces (alternating gender, label in pairs) with
/// landmark files and a manifest.
pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    create_dir(&a.out.join("images"))?;
    create_dir(&a.out.join("landmarks"))?;
    let mut records = Vec::new();
    for i in 0..a.count {
        let (img, lm) = synthetic_face(a.seed.wrapping_add(i), a.size);
        let name = format!("face{i:04}");
        let image_path = PathBuf::from("images").join(format!("{name}.png"));
        let landmark_path = PathBuf::from("landmarks").join(format!("{name}.json"));
        save_png(&img, &a.out.join(&image_path))?;
        let doc = LandmarkDocument::single(image_path.to_string_lossy(), &lm);
        std::fs::write(a.out.join(&landmark_path), serde_json::to_string(&doc)?)?;
        records.push(SampleRecord {
            image_path,
            label: if i % 4 < 2 { Label::Fake } else { Label::Real },
            gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
            landmark_path: Some(landmark_path),
        });
    }
    Manifest::new(records, "synthetic")?.save(&a.out.join("manifest.csv"))?;
    println!("wrote {} synthetic faces to {}", a.count, a.out.display());
    Ok(())
}

//! Labelled image manifests: loading, gender rebalancing and stratified
//! train/validation/test splitting.
//!
//! A manifest is a UTF-8 CSV with header `image_path,label,gender,landmark_path`.
//! Paths are stored as written (relative to a data root chosen at run time).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MANIFEST_HEADER: [&str; 4] = ["image_path", "label", "gender", "landmark_path"];

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Parse { path: String, line: u64, reason: String },
    #[error("{path}: line {line}: duplicate image_path `{image}` (first seen on line {first})")]
    Duplicate {
        path: String,
        line: u64,
        first: u64,
        image: String,
    },
    #[error("cannot balance: no {gender} records with label {label}")]
    BalanceImpossible { gender: Gender, label: Label },
    #[error("manifest is empty")]
    Empty,
    #[error("failed to write manifest: {0}")]
    Write(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Fake, Label::Real];

    pub fn name(self) -> &'static str {
        match self {
            Label::Fake => "fake",
            Label::Real => "real",
        }
    }
}

impl Gender {
    /// Male first, matching the row order used in reports.
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown label `{s}` (expected fake or real)"))
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Gender::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown gender `{s}` (expected male or female)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub image_path: PathBuf,
    pub label: Label,
    pub gender: Gender,
    pub landmark_path: Option<PathBuf>,
}

impl SampleRecord {
    pub fn new(image_path: impl Into<PathBuf>, label: Label, gender: Gender) -> Self {
        SampleRecord {
            image_path: image_path.into(),
            label,
            gender,
            landmark_path: None,
        }
    }

    /// Stable string key used for pairing and reference lookups.
    pub fn key(&self) -> String {
        self.image_path.to_string_lossy().into_owned()
    }
}

/// Ordered, duplicate-free list of records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    pub provenance: String,
}

impl Manifest {
    /// Build a manifest, rejecting duplicate image paths.
    pub fn new(records: Vec<SampleRecord>, provenance: impl Into<String>) -> Result<Self, DatasetError> {
        let provenance = provenance.into();
        let mut seen = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if let Some(first) = seen.insert(r.key(), i) {
                return Err(DatasetError::Duplicate {
                    path: provenance,
                    line: i as u64 + 2,
                    first: first as u64 + 2,
                    image: r.key(),
                });
            }
        }
        Ok(Manifest { records, provenance })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records per (gender, label).
    pub fn counts(&self) -> BTreeMap<(Gender, Label), usize> {
        let mut out = BTreeMap::new();
        for g in Gender::ALL {
            for l in Label::ALL {
                out.insert((g, l), 0);
            }
        }
        for r in &self.records {
            *out.entry((r.gender, r.label)).or_default() += 1;
        }
        out
    }

    pub fn count_gender(&self, gender: Gender) -> usize {
        self.records.iter().filter(|r| r.gender == gender).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| DatasetError::Write(e.to_string());
        w.write_record(MANIFEST_HEADER).map_err(err)?;
        for r in &self.records {
            let lm = r.landmark_path.as_deref().map(|p| p.to_string_lossy()).unwrap_or_default();
            w.write_record([r.key().as_str(), r.label.name(), r.gender.name(), lm.as_ref()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| DatasetError::Write(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let file = std::fs::File::create(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Read and validate a manifest file.
pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_manifest(file, &path.display().to_string())
}

/// Parse manifest CSV from any reader; `name` is used in error messages.
pub fn parse_manifest<R: Read>(input: R, name: &str) -> Result<Manifest, DatasetError> {
    let parse_err = |line: u64, reason: String| DatasetError::Parse {
        path: name.to_string(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let columns: Vec<&str> = header.iter().map(str::trim).collect();
    if columns != MANIFEST_HEADER {
        return Err(parse_err(1, format!("expected header `{}`, found `{}`", MANIFEST_HEADER.join(","), columns.join(","))));
    }

    let mut records = Vec::new();
    let mut first_line: BTreeMap<String, u64> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, found {}", row.len())));
        }
        let image = row[0].trim();
        if image.is_empty() {
            return Err(parse_err(line, "empty image_path".into()));
        }
        let label = row[1].parse::<Label>().map_err(|r| parse_err(line, r))?;
        let gender = row[2].parse::<Gender>().map_err(|r| parse_err(line, r))?;
        let landmark = row[3].trim();
        if let Some(&first) = first_line.get(image) {
            return Err(DatasetError::Duplicate {
                path: name.to_string(),
                line,
                first,
                image: image.to_string(),
            });
        }
        first_line.insert(image.to_string(), line);
        records.push(SampleRecord {
            image_path: PathBuf::from(image),
            label,
            gender,
            landmark_path: (!landmark.is_empty()).then(|| PathBuf::from(landmark)),
        });
    }
    Ok(Manifest {
        records,
        provenance: name.to_string(),
    })
}

/// Equalise male and female counts within each label by downsampling the
/// larger group. Surviving records keep their original order.
pub fn balance_by_gender(manifest: &Manifest, seed: u64) -> Result<Manifest, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; manifest.len()];
    for label in Label::ALL {
        let by_gender: Vec<Vec<usize>> = Gender::ALL
            .iter()
            .map(|&g| {
                (0..manifest.len())
                    .filter(|&i| manifest.records[i].label == label && manifest.records[i].gender == g)
                    .collect()
            })
            .collect();
        if by_gender.iter().all(Vec::is_empty) {
            continue;
        }
        for (g, idx) in Gender::ALL.iter().zip(&by_gender) {
            if idx.is_empty() {
                return Err(DatasetError::BalanceImpossible { gender: *g, label });
            }
        }
        let target = by_gender.iter().map(Vec::len).min().unwrap_or(0);
        for idx in &by_gender {
            for k in sample(&mut rng, idx.len(), target) {
                keep[idx[k]] = true;
            }
        }
    }
    let records = manifest
        .records
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| r.clone())
        .collect();
    Ok(Manifest {
        records,
        provenance: format!("{} (balanced, seed {seed})", manifest.provenance),
    })
}

/// Train/validation/test partition of a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub train: Manifest,
    pub validation: Manifest,
    pub test: Manifest,
    pub seed: u64,
}

/// Split ratios. `train:test` is applied first; `validation_fraction` of the
/// training share is then moved to validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
    pub validation_fraction: f64,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio {
            train: 3,
            test: 2,
            validation_fraction: 0.10,
        }
    }
}

/// Per-stratum sizes `(train, validation, test)` for `n` records.
///
/// Strata too small to yield at least one test record go wholly to train.
pub fn stratum_sizes(n: usize, ratio: &SplitRatio) -> (usize, usize, usize) {
    let parts = u64::from(ratio.train + ratio.test);
    // half-up integer rounding of n * test / parts
    let test = ((2 * n as u64 * u64::from(ratio.test) + parts) / (2 * parts)) as usize;
    if test == 0 {
        return (n, 0, 0);
    }
    let train_full = n - test;
    let validation = (train_full as f64 * ratio.validation_fraction + 0.5).floor() as usize;
    (train_full - validation, validation, test)
}

/// Stratified split by (gender, label). Output manifests keep source order.
pub fn split(manifest: &Manifest, ratio: &SplitRatio, seed: u64) -> Result<SplitSet, DatasetError> {
    if manifest.is_empty() {
        return Err(DatasetError::Empty);
    }
    if ratio.train == 0 || ratio.test == 0 || !(0.0..1.0).contains(&ratio.validation_fraction) {
        return Err(DatasetError::Write(format!("invalid split ratio {ratio:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 0 = train, 1 = validation, 2 = test
    let mut assignment = vec![0u8; manifest.len()];
    for g in Gender::ALL {
        for l in Label::ALL {
            let mut idx: Vec<usize> = (0..manifest.len())
                .filter(|&i| manifest.records[i].gender == g && manifest.records[i].label == l)
                .collect();
            if idx.is_empty() {
                continue;
            }
            let (train, validation, test) = stratum_sizes(idx.len(), ratio);
            if test == 0 {
                log::warn!("stratum {g}/{l} has only {} records; all assigned to train", idx.len());
            }
            idx.shuffle(&mut rng);
            for &i in &idx[train..train + validation] {
                assignment[i] = 1;
            }
            for &i in &idx[train + validation..] {
                assignment[i] = 2;
            }
        }
    }
    let pick = |which: u8, name: &str| Manifest {
        records: manifest
            .records
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == which)
            .map(|(r, _)| r.clone())
            .collect(),
        provenance: format!("{} ({name}, seed {seed})", manifest.provenance),
    };
    Ok(SplitSet {
        train: pick(0, "train"),
        validation: pick(1, "validation"),
        test: pick(2, "test"),
        seed,
    })
}

impl SplitSet {
    /// True if no image appears in two splits.
    pub fn is_disjoint(&self) -> bool {
        let mut seen = HashSet::new();
        [&self.train, &self.validation, &self.test]
            .iter()
            .flat_map(|m| &m.records)
            .all(|r| seen.insert(r.key()))
    }
}

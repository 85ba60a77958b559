//! Corpus ingestion, PD filtering, leakage-free splits and clone pairs.
//!
//! Corpus layout:
//!
//! ```text
//! root/data/<pd>/<language>/<source_id>.<ext>
//! root/problem_descriptions/<pd>.html
//! root/metadata/<pd>.csv        submission_id,language,status
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::trial_seed;
use crate::frontend::{self, SourceFile};
use crate::ir::Language;
use crate::normalize::{normalize, NormalizeOptions};
use crate::sbt::{linearize, token_count};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}: bad metadata: {reason}")]
    Metadata { path: PathBuf, reason: String },
    #[error("PD {pd}: duplicate source id `{id}`")]
    DuplicateId { pd: String, id: String },
    #[error("split {split}: need at least {needed} PDs with {codes_per_pd} eligible codes, found {found}")]
    Shortfall { split: String, needed: usize, found: usize, codes_per_pd: usize },
    #[error("invalid split spec: {0}")]
    Spec(String),
    #[error("leakage: PD {pd} appears in {first} and {second}")]
    Leakage { pd: String, first: String, second: String },
    #[error("pair generation needs at least two PDs")]
    SinglePd,
    #[error("bad manifest: {0}")]
    Manifest(String),
}

fn io_err(path: &Path, e: impl ToString) -> DatasetError {
    DatasetError::Io { path: path.to_path_buf(), reason: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub source_id: String,
    pub language: Language,
    pub accepted: bool,
    pub path: PathBuf,
    /// SBT token count after normalisation; `None` until annotated or when
    /// the file does not parse.
    #[serde(default)]
    pub sbt_tokens: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDescription {
    pub pd_id: String,
    pub description_present: bool,
    pub submissions: Vec<Submission>,
}

impl ProblemDescription {
    pub fn accepted(&self, language: Language) -> impl Iterator<Item = &Submission> {
        self.submissions.iter().filter(move |s| s.accepted && s.language == language)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub pds: Vec<ProblemDescription>,
    /// Language directories that were not C or COBOL.
    pub skipped_language_dirs: usize,
}

#[derive(Debug, Deserialize)]
struct MetadataRow {
    submission_id: String,
    #[allow(dead_code)]
    language: String,
    status: String,
}

fn read_metadata(path: &Path) -> Result<HashMap<String, bool>, DatasetError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| DatasetError::Metadata {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = HashMap::new();
    for row in reader.deserialize::<MetadataRow>() {
        let row = row.map_err(|e| DatasetError::Metadata { path: path.to_path_buf(), reason: e.to_string() })?;
        out.insert(row.submission_id, row.status.trim() == "Accepted");
    }
    Ok(out)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out: Vec<PathBuf> =
        fs::read_dir(dir).map_err(|e| io_err(dir, e))?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(|e| io_err(dir, e))?;
    out.sort();
    Ok(out)
}

/// Registers every submission under `root`. Without a metadata file a
/// submission counts as accepted when it parses.
pub fn ingest(root: &Path) -> Result<IngestReport, DatasetError> {
    let data = root.join("data");
    if !data.is_dir() {
        return Ok(IngestReport::default());
    }
    let pd_dirs: Vec<PathBuf> = sorted_entries(&data)?.into_iter().filter(|p| p.is_dir()).collect();
    let results: Vec<Result<(ProblemDescription, usize), DatasetError>> =
        pd_dirs.par_iter().map(|dir| ingest_pd(root, dir)).collect();
    let mut report = IngestReport::default();
    for r in results {
        let (pd, skipped) = r?;
        report.pds.push(pd);
        report.skipped_language_dirs += skipped;
    }
    report.pds.sort_by(|a, b| a.pd_id.cmp(&b.pd_id));
    Ok(report)
}

fn ingest_pd(root: &Path, dir: &Path) -> Result<(ProblemDescription, usize), DatasetError> {
    let pd_id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let html = root.join("problem_descriptions").join(format!("{pd_id}.html"));
    let description_present = fs::read_to_string(&html).map(|t| !t.trim().is_empty()).unwrap_or(false);
    let meta_path = root.join("metadata").join(format!("{pd_id}.csv"));
    let metadata = if meta_path.exists() { Some(read_metadata(&meta_path)?) } else { None };

    let mut skipped = 0;
    let mut submissions = Vec::new();
    for lang_dir in sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()) {
        let name = lang_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let Ok(language) = name.parse::<Language>() else {
            skipped += 1;
            continue;
        };
        for path in sorted_entries(&lang_dir)?.into_iter().filter(|p| p.is_file()) {
            let source_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let accepted = match &metadata {
                Some(m) => m.get(&source_id).copied().unwrap_or(false),
                None => {
                    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
                    frontend::parse(language, &SourceFile::new(path.to_string_lossy(), text)).is_ok()
                }
            };
            submissions.push(Submission { source_id, language, accepted, path, sbt_tokens: None });
        }
    }
    let mut seen = HashSet::new();
    for s in &submissions {
        if !seen.insert(s.source_id.clone()) {
            return Err(DatasetError::DuplicateId { pd: pd_id, id: s.source_id.clone() });
        }
    }
    submissions.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    Ok((ProblemDescription { pd_id, description_present, submissions }, skipped))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<ProblemDescription>,
    pub removed_no_description: usize,
    pub removed_no_accepted: usize,
    pub removed_single_code: usize,
}

/// Drops PDs with (i) no or empty description, (ii) no accepted code in
/// `language`, (iii) a single accepted code; rules apply in that order.
/// Kept PDs retain only their accepted `language` submissions.
pub fn filter_pds(pds: &[ProblemDescription], language: Language) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for pd in pds {
        if !pd.description_present {
            out.removed_no_description += 1;
            continue;
        }
        let accepted: Vec<Submission> = pd.accepted(language).cloned().collect();
        match accepted.len() {
            0 => out.removed_no_accepted += 1,
            1 => out.removed_single_code += 1,
            _ => out.kept.push(ProblemDescription { submissions: accepted, ..pd.clone() }),
        }
    }
    out
}

/// Sets `sbt_tokens` on every submission by parsing, normalising and
/// linearising it. Unparseable files keep `None`.
pub fn annotate_token_lengths(pds: &mut [ProblemDescription], opts: &NormalizeOptions) {
    pds.par_iter_mut().for_each(|pd| {
        for s in &mut pd.submissions {
            s.sbt_tokens = fs::read_to_string(&s.path).ok().and_then(|text| {
                let cu = frontend::parse(s.language, &SourceFile::new(s.path.to_string_lossy(), text)).ok()?;
                let (cu, _) = normalize(&cu, opts);
                Some(token_count(&linearize(&cu)))
            });
        }
    });
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub name: String,
    pub language: Language,
    /// `R + 1`.
    pub codes_per_pd: usize,
    #[serde(default)]
    pub max_token_len: Option<usize>,
    /// Fewer eligible PDs than this is a shortfall error.
    #[serde(default = "one")]
    pub min_pds: usize,
    /// Sample at most this many PDs; all eligible PDs when absent.
    #[serde(default)]
    pub max_pds: Option<usize>,
}

fn one() -> usize {
    1
}

impl TestSpec {
    pub fn new(name: &str, language: Language, codes_per_pd: usize, max_token_len: Option<usize>) -> Self {
        TestSpec { name: name.into(), language, codes_per_pd, max_token_len, min_pds: 1, max_pds: None }
    }

    pub fn r(&self) -> usize {
        self.codes_per_pd - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_val_ratio: f64,
    /// Keep only train/val codes within this many SBT tokens.
    #[serde(default)]
    pub max_token_len: Option<usize>,
    pub tests: Vec<TestSpec>,
}

impl Default for SplitSpec {
    /// The four default test splits.
    fn default() -> Self {
        SplitSpec {
            seed: 0,
            train_val_ratio: 0.9,
            max_token_len: None,
            tests: vec![
                TestSpec::new("Test-COBOL-MAP@2", Language::Cobol, 3, None),
                TestSpec::new("Test-COBOL-MAP@1", Language::Cobol, 2, Some(512)),
                TestSpec::new("Test-C-MAP@299", Language::C, 300, None),
                TestSpec::new("Test-C-MAP@99", Language::C, 100, Some(512)),
            ],
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.train_val_ratio > 0.0 && self.train_val_ratio < 1.0) {
            return Err(DatasetError::Spec(format!("train_val_ratio {} is not in (0, 1)", self.train_val_ratio)));
        }
        let mut names = HashSet::new();
        for t in &self.tests {
            if t.codes_per_pd < 2 {
                return Err(DatasetError::Spec(format!("{}: codes_per_pd must be at least 2", t.name)));
            }
            if matches!(t.name.as_str(), "train" | "val") || !names.insert(t.name.as_str()) {
                return Err(DatasetError::Spec(format!("duplicate or reserved split name `{}`", t.name)));
            }
            if t.max_pds.is_some_and(|m| m < t.min_pds) {
                return Err(DatasetError::Spec(format!("{}: max_pds below min_pds", t.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SplitEntry {
    pub pd: String,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSplit {
    pub name: String,
    pub language: Language,
    #[serde(rename = "R")]
    pub r: usize,
    pub entries: Vec<SplitEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSet {
    pub spec: SplitSpec,
    pub train: Vec<SplitEntry>,
    pub val: Vec<SplitEntry>,
    pub tests: Vec<TestSplit>,
}

impl SplitSet {
    pub fn pd_ids(entries: &[SplitEntry]) -> BTreeSet<&str> {
        entries.iter().map(|e| e.pd.as_str()).collect()
    }

    pub fn test(&self, name: &str) -> Option<&TestSplit> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// Entries of a named split (`train`, `val` or a test name).
    pub fn entries(&self, name: &str) -> Option<&[SplitEntry]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            other => self.test(other).map(|t| t.entries.as_slice()),
        }
    }

    /// Train, val and the union of the tests are pairwise PD-disjoint, and
    /// every test PD holds exactly `R + 1` codes.
    pub fn check_leakage(&self) -> Result<(), DatasetError> {
        let train = Self::pd_ids(&self.train);
        let val = Self::pd_ids(&self.val);
        let leak = |pd: &str, a: &str, b: &str| DatasetError::Leakage { pd: pd.into(), first: a.into(), second: b.into() };
        if let Some(pd) = train.intersection(&val).next() {
            return Err(leak(pd, "train", "val"));
        }
        for t in &self.tests {
            for pd in Self::pd_ids(&t.entries) {
                if train.contains(pd) {
                    return Err(leak(pd, "train", &t.name));
                }
                if val.contains(pd) {
                    return Err(leak(pd, "val", &t.name));
                }
            }
            let mut per_pd: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &t.entries {
                *per_pd.entry(e.pd.as_str()).or_insert(0) += 1;
            }
            if let Some((pd, n)) = per_pd.iter().find(|(_, n)| **n != t.r + 1) {
                return Err(DatasetError::Manifest(format!("{}: PD {pd} has {n} codes, expected {}", t.name, t.r + 1)));
            }
        }
        Ok(())
    }

    /// Manifest JSON: the spec echo plus `{split_name: [{"pd", "id"}]}`.
    pub fn to_manifest(&self) -> String {
        let mut splits = serde_json::Map::new();
        splits.insert("train".into(), serde_json::to_value(&self.train).expect("entries serialize"));
        splits.insert("val".into(), serde_json::to_value(&self.val).expect("entries serialize"));
        for t in &self.tests {
            splits.insert(t.name.clone(), serde_json::to_value(&t.entries).expect("entries serialize"));
        }
        let doc = serde_json::json!({ "spec": self.spec, "splits": splits });
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn from_manifest(text: &str) -> Result<Self, DatasetError> {
        #[derive(Deserialize)]
        struct Doc {
            spec: SplitSpec,
            splits: HashMap<String, Vec<SplitEntry>>,
        }
        let mut doc: Doc = serde_json::from_str(text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
        let mut take = |name: &str| {
            doc.splits.remove(name).ok_or_else(|| DatasetError::Manifest(format!("missing split `{name}`")))
        };
        let train = take("train")?;
        let val = take("val")?;
        let tests = doc
            .spec
            .tests
            .iter()
            .map(|t| {
                Ok(TestSplit { name: t.name.clone(), language: t.language, r: t.r(), entries: take(&t.name)? })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Ok(SplitSet { spec: doc.spec, train, val, tests })
    }
}

fn within(limit: Option<usize>, s: &Submission) -> bool {
    match limit {
        None => true,
        Some(l) => s.sbt_tokens.is_some_and(|t| t <= l),
    }
}

/// Samples `k` of `items` uniformly, returned in their original order.
fn sample_sorted<T: Clone>(rng: &mut impl Rng, items: &[T], k: usize) -> Vec<T> {
    let mut idx = index::sample(rng, items.len(), k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

fn draw_test(
    spec: &TestSpec,
    pool: &[&ProblemDescription],
    seed: u64,
) -> Result<TestSplit, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<(&str, Vec<&Submission>)> = pool
        .iter()
        .map(|pd| {
            let codes: Vec<&Submission> = pd.accepted(spec.language).filter(|s| within(spec.max_token_len, s)).collect();
            (pd.pd_id.as_str(), codes)
        })
        .filter(|(_, codes)| codes.len() >= spec.codes_per_pd)
        .collect();
    if eligible.len() < spec.min_pds || eligible.is_empty() {
        return Err(DatasetError::Shortfall {
            split: spec.name.clone(),
            needed: spec.min_pds.max(1),
            found: eligible.len(),
            codes_per_pd: spec.codes_per_pd,
        });
    }
    let chosen = match spec.max_pds {
        Some(m) if m < eligible.len() => sample_sorted(&mut rng, &eligible, m),
        _ => eligible,
    };
    let mut entries = Vec::new();
    for (pd, codes) in chosen {
        for s in sample_sorted(&mut rng, &codes, spec.codes_per_pd) {
            entries.push(SplitEntry { pd: pd.to_string(), id: s.source_id.clone() });
        }
    }
    Ok(TestSplit { name: spec.name.clone(), language: spec.language, r: spec.r(), entries })
}

/// Builds COBOL tests first, removes their PDs from the C pool, draws C
/// tests from the removed PDs and splits the remaining C PDs into train and
/// val. Inputs are expected to be filtered; they are sorted by PD id here
/// so the result depends only on the PD contents and the seed.
pub fn make_splits(
    c_pds: &[ProblemDescription],
    cobol_pds: &[ProblemDescription],
    spec: &SplitSpec,
) -> Result<SplitSet, DatasetError> {
    spec.validate()?;
    let mut c: Vec<&ProblemDescription> = c_pds.iter().collect();
    let mut cobol: Vec<&ProblemDescription> = cobol_pds.iter().collect();
    c.sort_by(|a, b| a.pd_id.cmp(&b.pd_id));
    cobol.sort_by(|a, b| a.pd_id.cmp(&b.pd_id));

    let mut tests: Vec<(usize, TestSplit)> = Vec::new();
    for (i, t) in spec.tests.iter().enumerate().filter(|(_, t)| t.language == Language::Cobol) {
        tests.push((i, draw_test(t, &cobol, trial_seed(spec.seed, i as u64 + 1))?));
    }
    let held: BTreeSet<String> =
        tests.iter().flat_map(|(_, t)| t.entries.iter().map(|e| e.pd.clone())).collect();
    let (c_held, c_rest): (Vec<&ProblemDescription>, Vec<&ProblemDescription>) =
        c.into_iter().partition(|pd| held.contains(&pd.pd_id));
    for (i, t) in spec.tests.iter().enumerate().filter(|(_, t)| t.language == Language::C) {
        tests.push((i, draw_test(t, &c_held, trial_seed(spec.seed, i as u64 + 1))?));
    }
    tests.sort_by_key(|(i, _)| *i);

    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(spec.seed, 0));
    let mut order: Vec<&ProblemDescription> = c_rest;
    order.shuffle(&mut rng);
    let n = order.len();
    let n_train = if n < 2 { n } else { ((n as f64 * spec.train_val_ratio).round() as usize).clamp(1, n - 1) };
    let collect = |pds: &[&ProblemDescription]| {
        let mut pds: Vec<&ProblemDescription> = pds.to_vec();
        pds.sort_by(|a, b| a.pd_id.cmp(&b.pd_id));
        let mut out = Vec::new();
        for pd in pds {
            let codes: Vec<&Submission> =
                pd.accepted(Language::C).filter(|s| within(spec.max_token_len, s)).collect();
            if codes.len() >= 2 {
                out.extend(codes.iter().map(|s| SplitEntry { pd: pd.pd_id.clone(), id: s.source_id.clone() }));
            }
        }
        out
    };
    let set = SplitSet {
        spec: spec.clone(),
        train: collect(&order[..n_train]),
        val: collect(&order[n_train..]),
        tests: tests.into_iter().map(|(_, t)| t).collect(),
    };
    set.check_leakage()?;
    Ok(set)
}

// ---------------------------------------------------------------------------
// Pairs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePair {
    pub a: String,
    pub b: String,
    pub label: u8,
}

/// All within-PD pairs (or a uniform sample of `max_positives`), followed by
/// `negatives_per_positive` cross-PD pairs per positive, drawn uniformly
/// without replacement and capped at the number that exist.
pub fn gen_pairs(
    split: &[SplitEntry],
    negatives_per_positive: usize,
    max_positives: Option<usize>,
    seed: u64,
) -> Result<Vec<CodePair>, DatasetError> {
    let mut entries: Vec<&SplitEntry> = split.iter().collect();
    entries.sort();
    let pds: BTreeSet<&str> = entries.iter().map(|e| e.pd.as_str()).collect();
    if pds.len() < 2 {
        return Err(DatasetError::SinglePd);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positives = Vec::new();
    for (i, a) in entries.iter().enumerate() {
        for b in entries[i + 1..].iter().take_while(|b| b.pd == a.pd) {
            positives.push(CodePair { a: a.id.clone(), b: b.id.clone(), label: 1 });
        }
    }
    if let Some(cap) = max_positives.filter(|c| *c < positives.len()) {
        positives = sample_sorted(&mut rng, &positives, cap);
    }

    let n = entries.len() as u128;
    let total_pairs = n * (n - 1) / 2;
    let same_pd: u128 = {
        let mut counts: BTreeMap<&str, u128> = BTreeMap::new();
        for e in &entries {
            *counts.entry(e.pd.as_str()).or_insert(0) += 1;
        }
        counts.values().map(|c| c * (c - 1) / 2).sum()
    };
    let cross = total_pairs - same_pd;
    let wanted = ((positives.len() * negatives_per_positive) as u128).min(cross) as usize;

    let mut negatives = Vec::with_capacity(wanted);
    if cross <= 4 * wanted as u128 || cross <= 1_000_000 {
        let mut all = Vec::new();
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                if a.pd != b.pd {
                    all.push((a, b));
                }
            }
        }
        for k in index::sample(&mut rng, all.len(), wanted) {
            let (a, b) = all[k];
            negatives.push(CodePair { a: a.id.clone(), b: b.id.clone(), label: 0 });
        }
    } else {
        let mut seen = HashSet::new();
        while negatives.len() < wanted {
            let i = rng.gen_range(0..entries.len());
            let j = rng.gen_range(0..entries.len());
            let (i, j) = (i.min(j), i.max(j));
            if i == j || entries[i].pd == entries[j].pd || !seen.insert((i, j)) {
                continue;
            }
            negatives.push(CodePair { a: entries[i].id.clone(), b: entries[j].id.clone(), label: 0 });
        }
    }
    positives.extend(negatives);
    Ok(positives)
}

pub fn pairs_to_jsonl(pairs: &[CodePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pair serialization cannot fail"));
        out.push('\n');
    }
    out
}

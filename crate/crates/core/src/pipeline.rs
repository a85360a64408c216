//! End-to-end stages with on-disk artifacts.
//!
//! Layout under the output directory:
//!
//! ```text
//! ingest/   {train,validation,test}.mbox  manifest.csv  senders.csv  skipped.tsv
//! forge/    {validation,test}_<attack>/NNNN.eml  {validation,test}_<attack>.csv
//! select/<attack>/  subset.txt  table.tsv  selection_log.csv
//! model/<attack>/   subset.txt  vocab.tsv  vectors.tsv
//! report/   accuracy.csv  cross_attack.csv  verdicts.csv  pca.csv  pca_points.csv  *.svg
//! ```
//!
//! Every text artifact except the raw mail starts with a `# config-hash:`
//! line. Loading an artifact written under a different configuration fails
//! with [`Error::ArtifactMismatch`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::{load_corpus, parse_email, write_eml, write_file, write_mbox, Corpus, CorpusFormat, RawEmail, Skipped};
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::eval::{evaluate, pca_2d, rates, sample_for_pca, Evaluation, PcaSummary};
use crate::forge::{build_test_set, AttackKind, ForgeInfo, ForgePools, TestItem};
use crate::knn::SenderProfileModel;
use crate::rl::{run_selection, FeatureTable, RlConfig, Selection};
use crate::svg;
use crate::vectorize::{FeatureSubset, Vocabulary};

/// Overrides `output_dir` when set and non-empty.
pub const OUTPUT_DIR_ENV: &str = "SPEARGUARD_OUTPUT_DIR";

const HASH_PREFIX: &str = "# config-hash: ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSource {
    pub format: CorpusFormat,
    pub path: PathBuf,
}

impl FromStr for CorpusSource {
    type Err = Error;

    /// `format:path`, e.g. `mbox:data/ham.mbox`.
    fn from_str(s: &str) -> Result<Self> {
        let (format, path) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("corpus `{s}` is not of the form format:path")))?;
        Ok(CorpusSource {
            format: format.trim().parse()?,
            path: PathBuf::from(path.trim()),
        })
    }
}

impl fmt::Display for CorpusSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.format, self.path.display())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpora: Vec<CorpusSource>,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub rl: RlConfig,
    pub attacks: Vec<AttackKind>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Cap on the number of vectors fed to PCA.
    pub pca_sample: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpora: Vec::new(),
            train_fraction: 0.6,
            validation_fraction: 0.2,
            test_fraction: 0.2,
            rl: RlConfig::default(),
            attacks: AttackKind::ALL.to_vec(),
            output_dir: PathBuf::from("spearguard-out"),
            seed: 0,
            pca_sample: 2000,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for {key}")))
}

impl PipelineConfig {
    /// Reads `key = value` lines. Blank lines and `#` comments are ignored;
    /// `corpus` may repeat.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "corpus" => self.corpora.push(value.parse()?),
            "train_fraction" => self.train_fraction = parse_num(key, value)?,
            "validation_fraction" => self.validation_fraction = parse_num(key, value)?,
            "test_fraction" => self.test_fraction = parse_num(key, value)?,
            "epsilon" => self.rl.epsilon = parse_num(key, value)?,
            "rounds" => self.rl.rounds = parse_num(key, value)?,
            "steps_per_round" => self.rl.steps_per_round = parse_num(key, value)?,
            "knn_k" => self.rl.knn_k = parse_num(key, value)?,
            "distance" => self.rl.distance = value.parse()?,
            "attacks" => {
                self.attacks = value
                    .split(',')
                    .map(|a| a.trim().parse())
                    .collect::<Result<_>>()?
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value)?,
            "pca_sample" => self.pca_sample = parse_num(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies [`OUTPUT_DIR_ENV`] if present.
    pub fn with_env_override(mut self) -> Self {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        let fractions = [self.train_fraction, self.validation_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return fail("split fractions must lie in [0, 1]".into());
        }
        if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return fail(format!("split fractions sum to {}, not 1", fractions.iter().sum::<f64>()));
        }
        if self.validation_fraction == 0.0 || self.test_fraction == 0.0 {
            return fail("validation and test fractions must be positive".into());
        }
        if self.attacks.is_empty() {
            return fail("no attack kinds requested".into());
        }
        let unique: BTreeSet<_> = self.attacks.iter().collect();
        if unique.len() != self.attacks.len() {
            return fail("attack kinds repeat".into());
        }
        if self.pca_sample < 3 {
            return fail("pca_sample must be at least 3".into());
        }
        // the raw-feature bound is checked once the corpus is known
        self.rl.validate(usize::MAX)
    }

    /// Canonical text; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.corpora {
            out.push_str(&format!("corpus = {c}\n"));
        }
        out.push_str(&self.hashed_text_tail());
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        out
    }

    fn hashed_text_tail(&self) -> String {
        let attacks: Vec<&str> = self.attacks.iter().map(|a| a.as_str()).collect();
        format!(
            "train_fraction = {}\nvalidation_fraction = {}\ntest_fraction = {}\nepsilon = {}\nrounds = {}\nsteps_per_round = {}\nknn_k = {}\ndistance = {}\nattacks = {}\nseed = {}\npca_sample = {}\n",
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
            self.rl.epsilon,
            self.rl.rounds,
            self.rl.steps_per_round,
            self.rl.knn_k,
            self.rl.distance,
            attacks.join(","),
            self.seed,
            self.pca_sample
        )
    }

    /// SHA-256 of every setting except the output directory.
    pub fn hash(&self) -> String {
        let mut text = String::new();
        for c in &self.corpora {
            text.push_str(&format!("corpus = {c}\n"));
        }
        text.push_str(&self.hashed_text_tail());
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Selection settings with the pipeline seed.
    pub fn rl_config(&self) -> RlConfig {
        RlConfig {
            seed: self.seed,
            ..self.rl.clone()
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.output_dir)
    }
}

/// Independent seed for one named stage.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{stage}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown split `{s}`")))
    }
}

/// Paths of every artifact under one output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn split_mbox(&self, split: Split) -> PathBuf {
        self.root.join("ingest").join(format!("{split}.mbox"))
    }

    pub fn split_manifest(&self) -> PathBuf {
        self.root.join("ingest/manifest.csv")
    }

    pub fn sender_counts(&self) -> PathBuf {
        self.root.join("ingest/senders.csv")
    }

    pub fn skipped(&self) -> PathBuf {
        self.root.join("ingest/skipped.tsv")
    }

    pub fn test_set_dir(&self, split: Split, attack: AttackKind) -> PathBuf {
        self.root.join("forge").join(format!("{split}_{attack}"))
    }

    pub fn test_set_manifest(&self, split: Split, attack: AttackKind) -> PathBuf {
        self.root.join("forge").join(format!("{split}_{attack}.csv"))
    }

    pub fn select_dir(&self, attack: AttackKind) -> PathBuf {
        self.root.join("select").join(attack.as_str())
    }

    pub fn model_dir(&self, attack: AttackKind) -> PathBuf {
        self.root.join("model").join(attack.as_str())
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub fn write_artifact(path: &Path, hash: &str, payload: &str) -> Result<()> {
    write_file(path, format!("{HASH_PREFIX}{hash}\n{payload}").as_bytes())
}

/// Returns the embedded hash and the payload after the hash line.
pub fn read_artifact(path: &Path) -> Result<(String, String)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let hash = first.strip_prefix(HASH_PREFIX).ok_or_else(|| Error::Artifact {
        path: path.to_path_buf(),
        line: 1,
        reason: "missing config-hash header".into(),
    })?;
    Ok((hash.trim().to_string(), rest.to_string()))
}

/// Reads an artifact and refuses it unless it was written under `hash`.
pub fn read_checked(path: &Path, hash: &str) -> Result<String> {
    let (found, payload) = read_artifact(path)?;
    if found != hash {
        return Err(Error::ArtifactMismatch(format!(
            "{} was written under config {found}, current config is {hash}",
            path.display()
        )));
    }
    Ok(payload)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_rows(path: &Path, payload: &str) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(payload.as_bytes());
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            rec.map_err(|e| Error::Artifact {
                path: path.to_path_buf(),
                line: i + 3,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Benign emails split three ways.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

impl Splits {
    pub fn get(&self, split: Split) -> &Corpus {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// Per sender, shuffles that sender's emails and sends
/// `floor(n * validation)` to validation, `floor(n * test)` to test and the
/// rest to training, so every sender keeps at least one training email.
/// Each split preserves corpus order.
pub fn stratified_split(corpus: &Corpus, validation: f64, test: f64, seed: u64) -> Splits {
    let mut by_sender: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in corpus.emails().iter().enumerate() {
        by_sender.entry(e.claimed_sender()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assigned = vec![Split::Train; corpus.len()];
    for indices in by_sender.values_mut() {
        indices.shuffle(&mut rng);
        let n = indices.len() as f64;
        let n_val = (n * validation).floor() as usize;
        let n_test = (n * test).floor() as usize;
        for &i in &indices[..n_val] {
            assigned[i] = Split::Validation;
        }
        for &i in &indices[n_val..n_val + n_test] {
            assigned[i] = Split::Test;
        }
    }
    let pick = |split: Split| {
        Corpus::benign(
            corpus
                .emails()
                .iter()
                .zip(&assigned)
                .filter(|(_, s)| **s == split)
                .map(|(e, _)| e.clone())
                .collect(),
        )
    };
    Splits {
        train: pick(Split::Train),
        validation: pick(Split::Validation),
        test: pick(Split::Test),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub splits: Splits,
    pub skipped: Vec<Skipped>,
}

/// Loads every configured corpus, splits it and writes the split artifacts.
pub fn cmd_ingest(config: &PipelineConfig) -> Result<IngestSummary> {
    config.validate()?;
    if config.corpora.is_empty() {
        return Err(Error::InvalidConfig("no corpus configured".into()));
    }
    let mut emails = Vec::new();
    let mut skipped = Vec::new();
    for source in &config.corpora {
        let report = load_corpus(&source.path, source.format)?;
        emails.extend(report.corpus.into_emails());
        skipped.extend(report.skipped);
    }
    let corpus = Corpus::benign(emails);
    let splits = stratified_split(
        &corpus,
        config.validation_fraction,
        config.test_fraction,
        derive_seed(config.seed, "split"),
    );

    let layout = config.layout();
    let hash = config.hash();
    let mut manifest = Vec::new();
    for split in Split::ALL {
        let part = splits.get(split);
        write_mbox(&layout.split_mbox(split), part.emails())?;
        for (i, e) in part.emails().iter().enumerate() {
            manifest.push(vec![
                split.to_string(),
                i.to_string(),
                e.source_id().to_string(),
                e.claimed_sender().to_string(),
            ]);
        }
    }
    write_artifact(
        &layout.split_manifest(),
        &hash,
        &csv_text(&["split", "index", "source_id", "sender"], manifest)?,
    )?;

    let mut counts: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for (s, split) in Split::ALL.into_iter().enumerate() {
        for e in splits.get(split).emails() {
            counts.entry(e.claimed_sender()).or_default()[s] += 1;
        }
    }
    let rows = counts.iter().map(|(sender, c)| {
        vec![sender.to_string(), c[0].to_string(), c[1].to_string(), c[2].to_string()]
    });
    write_artifact(
        &layout.sender_counts(),
        &hash,
        &csv_text(&["sender", "train", "validation", "test"], rows)?,
    )?;

    let skipped_text: String = skipped
        .iter()
        .map(|s| format!("{}\t{}\n", s.source_id, s.reason))
        .collect();
    write_artifact(&layout.skipped(), &hash, &skipped_text)?;
    Ok(IngestSummary { splits, skipped })
}

/// Reads the split artifacts back, restoring each email's original source id.
pub fn load_splits(config: &PipelineConfig) -> Result<Splits> {
    let layout = config.layout();
    let path = layout.split_manifest();
    let payload = read_checked(&path, &config.hash())?;
    let mut ids: BTreeMap<Split, Vec<String>> = BTreeMap::new();
    for row in csv_rows(&path, &payload)? {
        let split: Split = row.get(0).unwrap_or_default().parse()?;
        ids.entry(split).or_default().push(row.get(2).unwrap_or_default().to_string());
    }
    let mut load = |split: Split| -> Result<Corpus> {
        let ids = ids.remove(&split).unwrap_or_default();
        if ids.is_empty() {
            return Ok(Corpus::benign(Vec::new()));
        }
        let mbox = layout.split_mbox(split);
        let report = load_corpus(&mbox, CorpusFormat::Mbox)?;
        let emails = report.corpus.into_emails();
        if emails.len() != ids.len() || !report.skipped.is_empty() {
            return Err(Error::ArtifactMismatch(format!(
                "{} holds {} readable emails, manifest lists {}",
                mbox.display(),
                emails.len(),
                ids.len()
            )));
        }
        Ok(Corpus::benign(
            emails.into_iter().zip(ids).map(|(e, id)| e.with_source_id(id)).collect(),
        ))
    };
    Ok(Splits {
        train: load(Split::Train)?,
        validation: load(Split::Validation)?,
        test: load(Split::Test)?,
    })
}

pub type TestSets = BTreeMap<AttackKind, Vec<TestItem>>;

/// Forges validation and test sets for every configured attack. Each set
/// pairs `n = held_out / 2` benign emails with `n` forgeries.
pub fn cmd_forge(config: &PipelineConfig) -> Result<BTreeMap<Split, TestSets>> {
    config.validate()?;
    let splits = load_splits(config)?;
    let pools = ForgePools::from_corpus(&splits.train);
    let layout = config.layout();
    let hash = config.hash();
    let mut out = BTreeMap::new();
    for split in [Split::Validation, Split::Test] {
        let held_out = splits.get(split);
        let seed = derive_seed(config.seed, &format!("forge/{split}"));
        let mut sets = TestSets::new();
        for &attack in &config.attacks {
            let items = build_test_set(held_out, attack, held_out.len() / 2, seed, &pools)?;
            write_test_set(&layout, split, attack, &hash, &items)?;
            sets.insert(attack, items);
        }
        out.insert(split, sets);
    }
    Ok(out)
}

fn write_test_set(layout: &Layout, split: Split, attack: AttackKind, hash: &str, items: &[TestItem]) -> Result<()> {
    let dir = layout.test_set_dir(split, attack);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut rows = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let file = format!("{i:04}.eml");
        write_eml(&dir.join(&file), &item.email)?;
        let (label, kind, impersonated, donor) = match &item.forged {
            Some(f) => ("spear", f.attack.as_str(), f.impersonated_sender.as_str(), f.donor_source_id.as_str()),
            None => ("benign", "", "", ""),
        };
        rows.push(vec![
            file,
            item.email.source_id().to_string(),
            label.to_string(),
            kind.to_string(),
            item.email.claimed_sender().to_string(),
            impersonated.to_string(),
            donor.to_string(),
        ]);
    }
    write_artifact(
        &layout.test_set_manifest(split, attack),
        hash,
        &csv_text(
            &["file", "source_id", "label", "attack", "claimed_sender", "impersonated_sender", "donor"],
            rows,
        )?,
    )
}

pub fn load_test_set(config: &PipelineConfig, split: Split, attack: AttackKind) -> Result<Vec<TestItem>> {
    let layout = config.layout();
    let path = layout.test_set_manifest(split, attack);
    let payload = read_checked(&path, &config.hash())?;
    let dir = layout.test_set_dir(split, attack);
    csv_rows(&path, &payload)?
        .into_iter()
        .map(|row| {
            let field = |i: usize| row.get(i).unwrap_or_default().to_string();
            let file = dir.join(field(0));
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            let email = parse_email(&bytes, &field(1))?;
            let forged = match field(2).as_str() {
                "spear" => Some(ForgeInfo {
                    attack: field(3).parse()?,
                    impersonated_sender: field(5),
                    donor_source_id: field(6),
                }),
                "benign" => None,
                other => {
                    return Err(Error::Artifact {
                        path: path.clone(),
                        line: 0,
                        reason: format!("unknown label `{other}`"),
                    })
                }
            };
            Ok(TestItem { email, forged })
        })
        .collect()
}

/// Runs feature selection against each attack's validation set.
pub fn cmd_select(config: &PipelineConfig) -> Result<BTreeMap<AttackKind, Selection>> {
    config.validate()?;
    let splits = load_splits(config)?;
    let layout = config.layout();
    let hash = config.hash();
    let mut out = BTreeMap::new();
    for &attack in &config.attacks {
        let validation = load_test_set(config, Split::Validation, attack)?;
        let selection = run_selection(&config.rl_config(), &splits.train, &validation)?;
        let dir = layout.select_dir(attack);
        write_artifact(&dir.join("subset.txt"), &hash, &selection.subset.to_text())?;
        write_artifact(&dir.join("table.tsv"), &hash, &selection.table.to_text())?;
        write_artifact(&dir.join("selection_log.csv"), &hash, &selection.log_csv())?;
        out.insert(attack, selection);
    }
    Ok(out)
}

pub fn load_selection(config: &PipelineConfig, attack: AttackKind) -> Result<(FeatureSubset, FeatureTable)> {
    let dir = config.layout().select_dir(attack);
    let hash = config.hash();
    let subset = FeatureSubset::from_text(&read_checked(&dir.join("subset.txt"), &hash)?)?;
    let table = FeatureTable::from_text(&read_checked(&dir.join("table.tsv"), &hash)?)?;
    Ok((subset, table))
}

/// Fits one detector per attack on the training split and persists it.
pub fn cmd_train(config: &PipelineConfig) -> Result<BTreeMap<AttackKind, Detector>> {
    config.validate()?;
    let splits = load_splits(config)?;
    let hash = config.hash();
    let mut out = BTreeMap::new();
    for &attack in &config.attacks {
        let (subset, _) = load_selection(config, attack)?;
        let detector = Detector::train(&splits.train, &subset, config.rl.knn_k, config.rl.distance)?;
        save_detector(&config.layout().model_dir(attack), &hash, &detector)?;
        out.insert(attack, detector);
    }
    Ok(out)
}

pub fn save_detector(dir: &Path, hash: &str, detector: &Detector) -> Result<()> {
    write_artifact(&dir.join("subset.txt"), hash, &detector.subset.to_text())?;
    write_artifact(&dir.join("vocab.tsv"), hash, &detector.vocab.to_text())?;
    write_artifact(&dir.join("vectors.tsv"), hash, &detector.model.to_text())
}

/// Loads a persisted detector. Its three files must carry the same config
/// hash, which is returned.
pub fn load_detector(dir: &Path) -> Result<(Detector, String)> {
    let (hash, subset_text) = read_artifact(&dir.join("subset.txt"))?;
    let vocab_text = read_checked(&dir.join("vocab.tsv"), &hash)?;
    let model_text = read_checked(&dir.join("vectors.tsv"), &hash)?;
    let subset = FeatureSubset::from_text(&subset_text)?;
    let vocab = Vocabulary::from_text(&vocab_text, &subset)?;
    let model = SenderProfileModel::from_text(&model_text)?;
    if model.dim() != vocab.dim() {
        return Err(Error::ArtifactMismatch(format!(
            "vocabulary has {} columns, model vectors have {}",
            vocab.dim(),
            model.dim()
        )));
    }
    Ok((Detector { subset, vocab, model }, hash))
}

/// Everything `cmd_report` computed.
#[derive(Debug, Clone)]
pub struct Report {
    /// Keyed by (trained on, tested on).
    pub evaluations: BTreeMap<(AttackKind, AttackKind), Evaluation>,
    pub pca: BTreeMap<AttackKind, PcaSummary>,
}

impl Report {
    pub fn accuracy(&self, trained_on: AttackKind, tested_on: AttackKind) -> Option<f64> {
        self.evaluations
            .get(&(trained_on, tested_on))
            .and_then(|e| e.accuracy().ok())
    }
}

/// Scores every trained detector on every attack's test set and writes the
/// report files.
pub fn cmd_report(config: &PipelineConfig) -> Result<Report> {
    config.validate()?;
    let layout = config.layout();
    let hash = config.hash();
    let splits = load_splits(config)?;
    let mut detectors = BTreeMap::new();
    for &attack in &config.attacks {
        let (detector, found) = load_detector(&layout.model_dir(attack))?;
        if found != hash {
            return Err(Error::ArtifactMismatch(format!(
                "model for {attack} was trained under config {found}, current config is {hash}"
            )));
        }
        detectors.insert(attack, detector);
    }
    let mut tests = TestSets::new();
    for &attack in &config.attacks {
        tests.insert(attack, load_test_set(config, Split::Test, attack)?);
    }

    let mut evaluations = BTreeMap::new();
    for (&trained_on, detector) in &detectors {
        for (&tested_on, items) in &tests {
            evaluations.insert((trained_on, tested_on), evaluate(detector, items)?);
        }
    }

    let mut pca = BTreeMap::new();
    for (&attack, detector) in &detectors {
        let vectors: Vec<_> = splits.train.emails().iter().map(|e| detector.vectorize(e)).collect();
        let sample = sample_for_pca(&vectors, config.pca_sample, derive_seed(config.seed, "pca"));
        match pca_2d(&sample) {
            Ok(summary) => {
                pca.insert(attack, summary);
            }
            Err(Error::DegenerateData { .. } | Error::InvalidConfig(_)) => {}
            Err(e) => return Err(e),
        }
    }

    let report = Report { evaluations, pca };
    write_report(&layout.report_dir(), &hash, config, &report)?;
    Ok(report)
}

fn write_report(dir: &Path, hash: &str, config: &PipelineConfig, report: &Report) -> Result<()> {
    let mut accuracy_rows = Vec::new();
    let mut bars = Vec::new();
    for &attack in &config.attacks {
        let eval = &report.evaluations[&(attack, attack)];
        let c = eval.counts;
        let acc = eval.accuracy()?;
        let (tp_rate, fp_rate) = match rates(&c) {
            Ok((t, f)) => (t.to_string(), f.to_string()),
            Err(Error::DegenerateClass(_)) => (String::new(), String::new()),
            Err(e) => return Err(e),
        };
        accuracy_rows.push(vec![
            attack.to_string(),
            acc.to_string(),
            tp_rate,
            fp_rate,
            c.tp.to_string(),
            c.tn.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
        ]);
        bars.push((attack.to_string(), acc));
    }
    write_artifact(
        &dir.join("accuracy.csv"),
        hash,
        &csv_text(&["attack", "accuracy", "tp_rate", "fp_rate", "tp", "tn", "fp", "fn"], accuracy_rows)?,
    )?;

    let mut header = vec!["trained_on"];
    header.extend(config.attacks.iter().map(|a| a.as_str()));
    let matrix_rows = config.attacks.iter().map(|&row| {
        let mut r = vec![row.to_string()];
        r.extend(config.attacks.iter().map(|&col| {
            report.accuracy(row, col).map(|a| a.to_string()).unwrap_or_default()
        }));
        r
    });
    write_artifact(&dir.join("cross_attack.csv"), hash, &csv_text(&header, matrix_rows)?)?;

    let verdict_rows = report.evaluations.iter().flat_map(|((trained, tested), eval)| {
        eval.records.iter().map(move |r| {
            vec![
                trained.to_string(),
                tested.to_string(),
                r.source_id.clone(),
                if r.actually_spear { "spear" } else { "benign" }.to_string(),
                if r.verdict.is_spear { "spear" } else { "benign" }.to_string(),
                r.verdict.predicted_sender.clone(),
                r.verdict.claimed_sender.clone(),
            ]
        })
    });
    write_artifact(
        &dir.join("verdicts.csv"),
        hash,
        &csv_text(
            &["trained_on", "tested_on", "source_id", "actual", "verdict", "predicted_sender", "claimed_sender"],
            verdict_rows,
        )?,
    )?;

    let mut pca_rows = Vec::new();
    let mut point_rows = Vec::new();
    let mut series = Vec::new();
    let mut spreads = Vec::new();
    for (attack, summary) in &report.pca {
        for (c, spread) in summary.spread.iter().enumerate() {
            pca_rows.push(vec![
                attack.to_string(),
                (c + 1).to_string(),
                summary.explained_variance[c].to_string(),
                summary.total_variance.to_string(),
                spread.min.to_string(),
                spread.q1.to_string(),
                spread.median.to_string(),
                spread.q3.to_string(),
                spread.max.to_string(),
                spread.iqr().to_string(),
            ]);
            spreads.push((format!("{attack} pc{}", c + 1), *spread));
        }
        let points: Vec<(f64, f64)> = summary
            .projections
            .iter()
            .map(|p| (p[0], p.get(1).copied().unwrap_or(0.0)))
            .collect();
        for (x, y) in &points {
            point_rows.push(vec![attack.to_string(), x.to_string(), y.to_string()]);
        }
        series.push((attack.to_string(), points));
    }
    write_artifact(
        &dir.join("pca.csv"),
        hash,
        &csv_text(
            &["attack", "component", "explained_variance", "total_variance", "min", "q1", "median", "q3", "max", "iqr"],
            pca_rows,
        )?,
    )?;
    write_artifact(&dir.join("pca_points.csv"), hash, &csv_text(&["attack", "pc1", "pc2"], point_rows)?)?;

    write_file(
        &dir.join("accuracy.svg"),
        svg::bars("Detection accuracy by attack", "accuracy", &bars).as_bytes(),
    )?;
    if !series.is_empty() {
        write_file(
            &dir.join("pca_scatter.svg"),
            svg::scatter("Training emails on the first two principal components", "PC1", "PC2", &series).as_bytes(),
        )?;
        write_file(
            &dir.join("pca_spread.svg"),
            svg::boxplot("Spread of projected training emails", "projection", &spreads).as_bytes(),
        )?;
    }
    Ok(())
}

/// Runs ingest, forge, select, train and report in order.
pub fn run_all(config: &PipelineConfig) -> Result<Report> {
    cmd_ingest(config)?;
    cmd_forge(config)?;
    cmd_select(config)?;
    cmd_train(config)?;
    cmd_report(config)
}

/// Reads one message file as the predictor sees it.
pub fn read_email(path: &Path) -> Result<RawEmail> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_email(&bytes, &path.display().to_string())
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use spearguard::corpus::write_mbox;
use spearguard::pipeline::{self, read_artifact, read_checked, stratified_split, CorpusSource, Split};
use spearguard::synth::{generate, DeskConfig};
use spearguard::{cross_attack, evaluate, AttackKind, Corpus, CorpusFormat, Error, PipelineConfig};

fn small_config(root: &Path, emails: usize) -> PipelineConfig {
    let mbox = root.join("desk.mbox");
    if !mbox.exists() {
        write_mbox(&mbox, &generate(&DeskConfig { emails, ..DeskConfig::default() })).unwrap();
    }
    let mut config = PipelineConfig::default();
    config.corpora.push(CorpusSource { format: CorpusFormat::Mbox, path: mbox });
    config.output_dir = root.join("out");
    config.set("rounds", "8").unwrap();
    config.set("steps_per_round", "5").unwrap();
    config
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

const REPORT_FILES: [&str; 5] = ["accuracy.csv", "cross_attack.csv", "verdicts.csv", "pca.csv", "pca_points.csv"];

#[test]
fn end_to_end_is_reproducible_and_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_config(dir.path(), 240);
    let mut b = a.clone();
    b.output_dir = dir.path().join("out2");
    let report = pipeline::run_all(&a).unwrap();
    pipeline::run_all(&b).unwrap();

    let (la, lb) = (a.layout(), b.layout());
    for attack in AttackKind::ALL {
        for f in ["subset.txt", "table.tsv", "selection_log.csv"] {
            assert_eq!(fs::read(la.select_dir(attack).join(f)).unwrap(), fs::read(lb.select_dir(attack).join(f)).unwrap());
        }
        for f in ["subset.txt", "vocab.tsv", "vectors.tsv"] {
            assert_eq!(fs::read(la.model_dir(attack).join(f)).unwrap(), fs::read(lb.model_dir(attack).join(f)).unwrap());
        }
    }
    for f in REPORT_FILES {
        assert_eq!(fs::read(la.report_dir().join(f)).unwrap(), fs::read(lb.report_dir().join(f)).unwrap(), "{f}");
    }

    let hash = a.hash();
    // per-attack verdict log recounts to accuracy.csv
    let verdicts = csv_rows(&read_checked(&la.report_dir().join("verdicts.csv"), &hash).unwrap());
    let accuracy = csv_rows(&read_checked(&la.report_dir().join("accuracy.csv"), &hash).unwrap());
    for row in &accuracy {
        let mine: Vec<_> = verdicts.iter().filter(|v| v[0] == row[0] && v[1] == row[0]).collect();
        let correct = mine.iter().filter(|v| v[3] == v[4]).count();
        assert_eq!(row[1].parse::<f64>().unwrap(), correct as f64 / mine.len() as f64);
        let tp = mine.iter().filter(|v| v[3] == "spear" && v[4] == "spear").count();
        assert_eq!(row[4], tp.to_string());
    }

    // report matrix equals one computed directly from the persisted pieces
    let splits = pipeline::load_splits(&a).unwrap();
    let mut validation = BTreeMap::new();
    let mut tests = BTreeMap::new();
    for attack in AttackKind::ALL {
        validation.insert(attack, pipeline::load_test_set(&a, Split::Validation, attack).unwrap());
        tests.insert(attack, pipeline::load_test_set(&a, Split::Test, attack).unwrap());
    }
    let direct = cross_attack(&a.rl_config(), &splits.train, &validation, &tests).unwrap();
    let written = csv_rows(&read_checked(&la.report_dir().join("cross_attack.csv"), &hash).unwrap());
    for (i, row) in AttackKind::ALL.iter().enumerate() {
        let (detector, _) = pipeline::load_detector(&la.model_dir(*row)).unwrap();
        for (j, col) in AttackKind::ALL.iter().enumerate() {
            let cell = direct.matrix.get(*row, *col);
            assert_eq!(report.accuracy(*row, *col), Some(cell));
            assert_eq!(written[i][j + 1].parse::<f64>().unwrap(), cell);
            assert_eq!(evaluate(&detector, &tests[col]).unwrap().accuracy().unwrap(), cell);
        }
    }
}

#[test]
fn stages_refuse_artifacts_from_another_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 160);
    pipeline::cmd_ingest(&config).unwrap();
    pipeline::cmd_forge(&config).unwrap();
    let mut other = config.clone();
    other.seed = 9;
    assert!(matches!(pipeline::cmd_select(&other), Err(Error::ArtifactMismatch(_))));
    // output_dir is not part of the identity
    let mut moved = config.clone();
    moved.output_dir = dir.path().join("elsewhere");
    assert_eq!(moved.hash(), config.hash());
}

#[test]
fn ingest_round_trips_corpus_and_source_ids() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), 160);
    let summary = pipeline::cmd_ingest(&config).unwrap();
    let restored = pipeline::load_splits(&config).unwrap();
    for split in Split::ALL {
        let (a, b) = (summary.splits.get(split).emails(), restored.get(split).emails());
        assert_eq!(a, b, "{split}");
    }
    let (hash, _) = read_artifact(&config.layout().split_manifest()).unwrap();
    assert_eq!(hash, config.hash());
}

#[test]
fn every_regular_sender_is_trained_on() {
    let corpus = Corpus::benign(generate(&DeskConfig { emails: 400, ..DeskConfig::default() }));
    let splits = stratified_split(&corpus, 0.2, 0.2, 3);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in corpus.emails() {
        *counts.entry(e.claimed_sender()).or_default() += 1;
    }
    let trained: std::collections::BTreeSet<&str> = splits.train.emails().iter().map(|e| e.claimed_sender()).collect();
    for (sender, n) in counts {
        if n >= 5 {
            assert!(trained.contains(sender), "{sender} has {n} emails but none in train");
        }
    }
    assert_eq!(splits.train.len() + splits.validation.len() + splits.test.len(), corpus.len());
}

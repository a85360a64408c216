//! Fixtures shared by the benchmarks.

use spearguard::forge::{build_test_set, ForgePools};
use spearguard::pipeline::stratified_split;
use spearguard::synth::{generate, DeskConfig};
use spearguard::{AttackKind, Corpus, FeatureSubset, TestItem};

pub struct Fixture {
    pub train: Corpus,
    pub validation: Vec<TestItem>,
}

/// A desk corpus of `emails` messages with a blind-spoofing validation set.
pub fn fixture(emails: usize) -> Fixture {
    let corpus = Corpus::benign(generate(&DeskConfig { emails, ..DeskConfig::default() }));
    let splits = stratified_split(&corpus, 0.2, 0.2, 1);
    let pools = ForgePools::from_corpus(&splits.train);
    let held = &splits.validation;
    let validation = build_test_set(held, AttackKind::BlindSpoofing, held.len() / 2, 2, &pools).expect("desk corpus forges");
    Fixture { train: splits.train, validation }
}

/// Headers that carry most of the sender signal in the desk corpus.
pub fn typical_subset() -> FeatureSubset {
    FeatureSubset::parse(["from", "received", "x-mailer", "message-id", "to"]).expect("valid names")
}

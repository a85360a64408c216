//! Spear-phishing detection from email header profiles.
//!
//! Each sender is modelled by the headers of the mail they actually send.
//! A message is flagged when the sender predicted from its features does
//! not match the sender it claims to come from.

pub mod corpus;
pub mod detector;
pub mod error;
pub mod eval;
pub mod forge;
pub mod knn;
pub mod pipeline;
pub mod rl;
pub mod svg;
pub mod synth;
pub mod vectorize;

pub use corpus::{load_corpus, normalize_sender, Corpus, CorpusFormat, LabelKind, LoadReport, RawEmail};
pub use detector::Detector;
pub use error::{Error, Result};
pub use eval::{accuracy, cross_attack, evaluate, pca_2d, rates, ConfusionCounts, CrossAttackMatrix, PcaSummary};
pub use forge::{build_test_set, AttackKind, ForgePools, ForgedEmail, TestItem};
pub use knn::{detect_spear, fit, Distance, SenderProfileModel, SpearVerdict};
pub use pipeline::{run_all, PipelineConfig};
pub use rl::{aor_update, generate_subset, run_selection, FeatureTable, RlConfig, Selection};
pub use vectorize::{build_vocabulary, raw_features, vectorize, FeatureId, FeatureSubset, FeatureVector, Vocabulary};

//! Reinforcement-learned feature selection.
//!
//! The agent's action is adding one raw feature to the working subset. After
//! each addition the detector is retrained on the new subset and scored on a
//! validation test list; the reward is the change in accuracy. Every feature
//! keeps an Average of Rewards (AOR) over the non-zero rewards it earned:
//!
//! ```text
//! aor_new = ((uses - 1) * aor_old + reward) / uses
//! ```
//!
//! where `uses` already counts the current addition. A round is a fixed number
//! of steps starting from the empty subset (accuracy 0); the subset is
//! discarded between rounds while the table persists. The final subset keeps
//! every feature that was used and has a positive AOR.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::eval::ConfusionCounts;
use crate::forge::TestItem;
use crate::knn::Distance;
use crate::vectorize::{raw_features, FeatureId, FeatureSubset, TokenizedEmail};

/// Folds one reward into a running average; `uses_after` counts this reward.
pub fn aor_update(old_aor: f64, uses_after: u64, reward: f64) -> f64 {
    debug_assert!(uses_after >= 1);
    ((uses_after - 1) as f64 * old_aor + reward) / uses_after as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeatureStats {
    pub aor: f64,
    pub uses: u64,
}

/// Per-feature AOR and use count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    entries: BTreeMap<FeatureId, FeatureStats>,
}

impl FeatureTable {
    /// A zeroed table over the given action space.
    pub fn new(features: &FeatureSubset) -> Self {
        FeatureTable {
            entries: features.iter().map(|f| (f.clone(), FeatureStats::default())).collect(),
        }
    }

    pub fn get(&self, feature: &FeatureId) -> FeatureStats {
        self.entries.get(feature).copied().unwrap_or_default()
    }

    pub fn set(&mut self, feature: FeatureId, stats: FeatureStats) {
        self.entries.insert(feature, stats);
    }

    /// Credits a non-zero reward to `feature`.
    pub fn credit(&mut self, feature: &FeatureId, reward: f64) {
        let entry = self.entries.entry(feature.clone()).or_default();
        entry.uses += 1;
        entry.aor = aor_update(entry.aor, entry.uses, reward);
    }

    pub fn features(&self) -> FeatureSubset {
        self.entries.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureId, &FeatureStats)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_uses(&self) -> u64 {
        self.entries.values().map(|s| s.uses).sum()
    }

    /// `feature<TAB>aor<TAB>uses` lines. AOR values are written in shortest
    /// round-trip form.
    pub fn to_text(&self) -> String {
        let mut out = String::from("feature\taor\tuses\n");
        for (f, s) in &self.entries {
            out.push_str(&format!("{f}\t{}\t{}\n", s.aor, s.uses));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: &str| Error::Artifact {
            path: "feature table".into(),
            line,
            reason: reason.to_string(),
        };
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') || line == "feature\taor\tuses" {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [f, aor, uses] = parts[..] else {
                return Err(bad(n + 1, "expected feature, aor, uses"));
            };
            let aor: f64 = aor.parse().map_err(|_| bad(n + 1, "bad aor"))?;
            let uses: u64 = uses.parse().map_err(|_| bad(n + 1, "bad uses"))?;
            entries.insert(FeatureId::new(f)?, FeatureStats { aor, uses });
        }
        Ok(FeatureTable { entries })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlConfig {
    pub epsilon: f64,
    pub rounds: usize,
    pub steps_per_round: usize,
    pub knn_k: usize,
    pub distance: Distance,
    pub seed: u64,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            epsilon: 0.3,
            rounds: 50,
            steps_per_round: 10,
            knn_k: 3,
            distance: Distance::Cosine,
            seed: 0,
        }
    }
}

impl RlConfig {
    pub fn validate(&self, raw_feature_count: usize) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.rounds == 0 {
            return fail("selection requires at least one round".into());
        }
        if self.steps_per_round == 0 {
            return fail("steps_per_round must be positive".into());
        }
        if self.steps_per_round > raw_feature_count {
            return fail(format!(
                "steps_per_round {} exceeds the {raw_feature_count} raw features",
                self.steps_per_round
            ));
        }
        if self.knn_k == 0 {
            return fail("knn_k must be positive".into());
        }
        Ok(())
    }
}

/// The agent's state: current subset and its validation accuracy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeState {
    pub subset: FeatureSubset,
    pub accuracy: f64,
}

/// Picks the next feature: with probability `epsilon` a uniformly random
/// unselected feature, otherwise the unselected feature with the highest AOR
/// (ties to the smallest name).
pub fn select_action<R: Rng + ?Sized>(
    table: &FeatureTable,
    subset: &FeatureSubset,
    epsilon: f64,
    rng: &mut R,
) -> Result<FeatureId> {
    let candidates: Vec<(&FeatureId, &FeatureStats)> =
        table.iter().filter(|(f, _)| !subset.contains(f)).collect();
    if candidates.is_empty() {
        return Err(Error::ExhaustedActions);
    }
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        let i = rng.random_range(0..candidates.len());
        return Ok(candidates[i].0.clone());
    }
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.1.aor > best.1.aor {
            best = *c;
        }
    }
    Ok(best.0.clone())
}

/// Training and validation data, pre-tokenized, with a memo of subset
/// accuracies. Accuracy is a pure function of the subset, so the memo does
/// not change results.
pub struct SelectionEnv {
    train: Vec<TokenizedEmail>,
    labels: Vec<String>,
    validation: Vec<(TokenizedEmail, String, bool)>,
    actions: FeatureSubset,
    k: usize,
    distance: Distance,
    memo: HashMap<FeatureSubset, f64>,
}

impl SelectionEnv {
    pub fn new(train: &Corpus, validation: &[TestItem], k: usize, distance: Distance) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidConfig("empty training corpus".into()));
        }
        if validation.is_empty() {
            return Err(Error::InvalidConfig("empty validation set".into()));
        }
        Ok(SelectionEnv {
            train: train.emails().iter().map(TokenizedEmail::new).collect(),
            labels: train.emails().iter().map(|e| e.claimed_sender().to_string()).collect(),
            validation: validation
                .iter()
                .map(|i| {
                    (
                        TokenizedEmail::new(&i.email),
                        i.email.claimed_sender().to_string(),
                        i.is_spear(),
                    )
                })
                .collect(),
            actions: raw_features(train),
            k,
            distance,
            memo: HashMap::new(),
        })
    }

    /// Raw features of the training corpus.
    pub fn actions(&self) -> &FeatureSubset {
        &self.actions
    }

    /// Validation accuracy of a detector trained on `subset`; 0 for the
    /// empty subset.
    pub fn accuracy(&mut self, subset: &FeatureSubset) -> Result<f64> {
        if subset.is_empty() {
            return Ok(0.0);
        }
        if let Some(&a) = self.memo.get(subset) {
            return Ok(a);
        }
        let detector = Detector::from_tokenized(&self.train, self.labels.clone(), subset, self.k, self.distance)?;
        let verdicts: Vec<bool> = {
            use rayon::prelude::*;
            self.validation
                .par_iter()
                .map(|(tokens, claimed, _)| detector.detect_tokens(tokens, claimed).map(|v| v.is_spear))
                .collect::<Result<_>>()?
        };
        let counts = ConfusionCounts::tally(
            verdicts
                .into_iter()
                .zip(self.validation.iter().map(|v| v.2)),
        );
        let a = crate::eval::accuracy(&counts)?;
        self.memo.insert(subset.clone(), a);
        Ok(a)
    }
}

/// One step of the selection log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub round: usize,
    pub step: usize,
    pub feature: FeatureId,
    pub reward: f64,
    pub accuracy: f64,
}

impl StepRecord {
    /// Whether the reward was credited to the table.
    pub fn credited(&self) -> bool {
        self.reward != 0.0
    }
}

/// Adds one feature, rescoring and crediting the table when accuracy moved.
pub fn step<R: Rng + ?Sized>(
    state: &mut EpisodeState,
    table: &mut FeatureTable,
    config: &RlConfig,
    env: &mut SelectionEnv,
    rng: &mut R,
) -> Result<(FeatureId, f64)> {
    let feature = select_action(table, &state.subset, config.epsilon, rng)?;
    state.subset.insert(feature.clone());
    let accuracy = env.accuracy(&state.subset)?;
    let reward = accuracy - state.accuracy;
    state.accuracy = accuracy;
    if reward != 0.0 {
        table.credit(&feature, reward);
    }
    Ok((feature, reward))
}

/// Runs one round from the empty subset, appending to `log`.
pub fn run_round<R: Rng + ?Sized>(
    table: &mut FeatureTable,
    config: &RlConfig,
    env: &mut SelectionEnv,
    rng: &mut R,
    round: usize,
    log: &mut Vec<StepRecord>,
) -> Result<()> {
    let mut state = EpisodeState::default();
    for s in 0..config.steps_per_round {
        let (feature, reward) = step(&mut state, table, config, env, rng)?;
        log.push(StepRecord {
            round,
            step: s,
            feature,
            reward,
            accuracy: state.accuracy,
        });
    }
    Ok(())
}

/// Features that were used and earned a positive average reward.
pub fn generate_subset(table: &FeatureTable) -> Result<FeatureSubset> {
    let subset: FeatureSubset = table
        .iter()
        .filter(|(_, s)| s.uses >= 1 && s.aor > 0.0)
        .map(|(f, _)| f.clone())
        .collect();
    if subset.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(subset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub subset: FeatureSubset,
    pub table: FeatureTable,
    pub log: Vec<StepRecord>,
}

impl Selection {
    /// `round,step,feature,reward,accuracy` CSV.
    pub fn log_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["round", "step", "feature", "reward", "accuracy"])
            .expect("in-memory write");
        for r in &self.log {
            w.write_record([
                r.round.to_string(),
                r.step.to_string(),
                r.feature.to_string(),
                r.reward.to_string(),
                r.accuracy.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.subset.iter().map(FeatureId::as_str).collect();
        write!(f, "{} features: {}", names.len(), names.join(", "))
    }
}

/// Runs `config.rounds` rounds against `validation` and returns the final
/// subset, the table and the step log.
pub fn run_selection(config: &RlConfig, train: &Corpus, validation: &[TestItem]) -> Result<Selection> {
    let mut env = SelectionEnv::new(train, validation, config.knn_k, config.distance)?;
    config.validate(env.actions().len())?;
    let mut table = FeatureTable::new(env.actions());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = Vec::with_capacity(config.rounds * config.steps_per_round);
    for round in 0..config.rounds {
        run_round(&mut table, config, &mut env, &mut rng, round, &mut log)?;
    }
    let subset = generate_subset(&table)?;
    Ok(Selection { subset, table, log })
}

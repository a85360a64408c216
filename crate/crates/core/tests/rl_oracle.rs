mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spearguard::rl::{run_round, select_action, SelectionEnv, StepRecord};
use spearguard::{
    aor_update, build_test_set, generate_subset, run_selection, AttackKind, Corpus, Distance, Error, FeatureId,
    FeatureSubset, FeatureTable, ForgePools, RawEmail, RlConfig,
};

#[test]
fn aor_folding_is_the_running_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let len = rng.random_range(1..=50);
        let rewards: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut aor = 0.0;
        for (i, r) in rewards.iter().enumerate() {
            aor = aor_update(aor, i as u64 + 1, *r);
        }
        let mean = rewards.iter().sum::<f64>() / len as f64;
        assert!((aor - mean).abs() < 1e-9);
    }
}

#[test]
fn uniform_exploration_at_epsilon_one() {
    let subset: FeatureSubset = (0..10).map(|i| FeatureId::new(&format!("f{i}")).unwrap()).collect();
    let table = FeatureTable::new(&subset);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts: BTreeMap<FeatureId, usize> = BTreeMap::new();
    for _ in 0..10_000 {
        *counts.entry(select_action(&table, &FeatureSubset::new(), 1.0, &mut rng).unwrap()).or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
    for (f, c) in counts {
        let freq = c as f64 / 10_000.0;
        assert!((freq - 0.1).abs() <= 0.02, "{f}: {freq}");
    }
}

/// Per-feature replay of the credited rewards in log order.
fn replay(log: &[StepRecord]) -> BTreeMap<FeatureId, (f64, u64)> {
    let mut out: BTreeMap<FeatureId, (f64, u64)> = BTreeMap::new();
    for r in log.iter().filter(|r| r.reward != 0.0) {
        let e = out.entry(r.feature.clone()).or_insert((0.0, 0));
        e.1 += 1;
        e.0 = aor_update(e.0, e.1, r.reward);
    }
    out
}

#[test]
fn table_equals_replayed_log() {
    let desk = common::desk(200, 4);
    let config = RlConfig { rounds: 12, steps_per_round: 6, ..RlConfig::default() };
    let validation = &desk.validation[&AttackKind::BlindSpoofing];
    let sel = run_selection(&config, &desk.splits.train, validation).unwrap();
    assert_eq!(sel.log.len(), 12 * 6);
    let replayed = replay(&sel.log);
    for (f, stats) in sel.table.iter() {
        let (aor, uses) = replayed.get(f).copied().unwrap_or((0.0, 0));
        assert_eq!(stats.uses, uses, "{f}");
        assert!((stats.aor - aor).abs() < 1e-9, "{f}");
        if stats.uses == 0 {
            assert_eq!(stats.aor, 0.0);
        }
    }
    // every round starts from the empty subset, whose accuracy is 0
    for r in sel.log.iter().filter(|r| r.step == 0) {
        assert_eq!(r.reward, r.accuracy);
    }
    let expected: FeatureSubset = sel
        .table
        .iter()
        .filter(|(_, s)| s.uses >= 1 && s.aor > 0.0)
        .map(|(f, _)| f.clone())
        .collect();
    assert_eq!(sel.subset, expected);
    // same seed, same run
    assert_eq!(run_selection(&config, &desk.splits.train, validation).unwrap(), sel);
}

#[test]
fn one_step_rounds_credit_at_most_one_use_each() {
    let desk = common::desk(120, 6);
    let config = RlConfig { rounds: 2, steps_per_round: 1, ..RlConfig::default() };
    let sel = run_selection(&config, &desk.splits.train, &desk.validation[&AttackKind::KnownDomain]).unwrap();
    assert!(sel.table.total_uses() <= 2);
}

#[test]
fn zero_rounds_is_rejected() {
    let desk = common::desk(120, 6);
    let config = RlConfig { rounds: 0, ..RlConfig::default() };
    let err = run_selection(&config, &desk.splits.train, &desk.validation[&AttackKind::KnownDomain]).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));
}

fn separable(senders: usize, per_sender: usize, offset: usize) -> Corpus {
    let mut emails = Vec::new();
    for s in 0..senders {
        for i in 0..per_sender {
            emails.push(
                RawEmail::from_parts(
                    vec![
                        ("from".into(), format!("s{s}@x.com")),
                        ("to".into(), "team@x.com".into()),
                        ("x-a-sig".into(), format!("sig{s}")),
                        ("x-b-noise".into(), "constant".into()),
                        ("x-c-noise".into(), "constant".into()),
                    ],
                    "",
                    format!("m{}", offset + s * per_sender + i),
                )
                .unwrap(),
            );
        }
    }
    Corpus::benign(emails)
}

#[test]
fn separating_feature_is_the_only_one_rewarded() {
    let train = separable(4, 6, 0);
    let held = separable(4, 4, 1000);
    let pools = ForgePools::from_corpus(&train);
    let validation = build_test_set(&held, AttackKind::BlindSpoofing, 8, 1, &pools).unwrap();
    let actions: FeatureSubset = FeatureSubset::parse(["x-a-sig", "x-b-noise", "x-c-noise"]).unwrap();
    let mut table = FeatureTable::new(&actions);
    let config = RlConfig { epsilon: 0.0, rounds: 4, steps_per_round: 3, knn_k: 1, distance: Distance::Cosine, seed: 0 };
    let mut env = SelectionEnv::new(&train, &validation, config.knn_k, config.distance).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut log = Vec::new();
    for round in 0..config.rounds {
        run_round(&mut table, &config, &mut env, &mut rng, round, &mut log).unwrap();
    }
    let sig = table.get(&FeatureId::new("x-a-sig").unwrap());
    assert!(sig.aor > 0.0);
    for noise in ["x-b-noise", "x-c-noise"] {
        let s = table.get(&FeatureId::new(noise).unwrap());
        assert_eq!((s.aor, s.uses), (0.0, 0), "{noise}");
    }
    assert_eq!(generate_subset(&table).unwrap(), FeatureSubset::parse(["x-a-sig"]).unwrap());
}

#[test]
fn blind_subset_beats_known_sender_subset_on_blind_attacks() {
    let desk = common::desk(500, 0);
    let config = RlConfig::default();
    let test = &desk.test[&AttackKind::BlindSpoofing];
    let mut acc = BTreeMap::new();
    for attack in [AttackKind::BlindSpoofing, AttackKind::KnownSender] {
        let sel = run_selection(&config, &desk.splits.train, &desk.validation[&attack]).unwrap();
        let detector = spearguard::Detector::train(&desk.splits.train, &sel.subset, config.knn_k, config.distance).unwrap();
        acc.insert(attack, spearguard::evaluate(&detector, test).unwrap().accuracy().unwrap());
    }
    assert!(acc[&AttackKind::BlindSpoofing] > acc[&AttackKind::KnownSender], "{acc:?}");
}

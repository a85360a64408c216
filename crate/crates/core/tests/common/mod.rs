//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use spearguard::forge::{build_test_set, ForgePools};
use spearguard::pipeline::{derive_seed, stratified_split, Splits};
use spearguard::synth::{generate, DeskConfig};
use proptest::prelude::*;
use spearguard::{AttackKind, Corpus, ForgedEmail, RawEmail, TestItem};

/// Plain header/body splitter: unfold continuation lines by dropping the
/// line break, split each field at its first colon, lowercase names, trim
/// values.
pub fn reference_split(raw: &str) -> (Vec<(String, String)>, String) {
    let raw = raw.replace("\r\n", "\n");
    let (head, body) = match raw.find("\n\n") {
        Some(i) => (&raw[..i], raw[i + 2..].to_string()),
        None => (raw.as_str(), String::new()),
    };
    let mut fields: Vec<String> = Vec::new();
    for line in head.lines() {
        if line.starts_with("From ") && fields.is_empty() {
            continue;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            let last = fields.last_mut().expect("continuation after a field");
            last.push_str(line);
        } else {
            fields.push(line.to_string());
        }
    }
    let headers = fields
        .into_iter()
        .map(|f| {
            let (n, v) = f.split_once(':').expect("field has a colon");
            (n.trim().to_lowercase(), v.trim().to_string())
        })
        .collect();
    (headers, body)
}

/// Dense brute-force neighbour vote with the library's tie rules:
/// neighbours ordered by exact distance then sender, votes then summed
/// float distance then sender.
pub fn brute_force_predict(train: &[Vec<u32>], labels: &[String], query: &[u32], k: usize, cosine: bool) -> String {
    let dot = |a: &[u32], b: &[u32]| a.iter().zip(b).map(|(&x, &y)| x as u64 * y as u64).sum::<u64>();
    // cosine: reduce the query by the gcd of its counts before measuring
    let q: Vec<u32> = if cosine {
        let g = query.iter().fold(0u32, |g, &x| num_gcd(g, x));
        if g > 1 {
            query.iter().map(|x| x / g).collect()
        } else {
            query.to_vec()
        }
    } else {
        query.to_vec()
    };
    let qn = dot(&q, &q);
    let mut rows: Vec<(usize, u64, u64, f64)> = train
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let d = dot(&q, t);
            let n = dot(t, t);
            let f = if cosine {
                if n == 0 || qn == 0 {
                    1.0
                } else {
                    1.0 - d as f64 / ((qn as f64).sqrt() * (n as f64).sqrt())
                }
            } else {
                ((qn + n - 2 * d) as f64).sqrt()
            };
            (i, d, n, f)
        })
        .collect();
    // insertion sort with an explicit exact comparison
    for i in 1..rows.len() {
        let mut j = i;
        while j > 0 && nearer(&rows[j], &rows[j - 1], qn, cosine, labels) {
            rows.swap(j, j - 1);
            j -= 1;
        }
    }
    let mut votes: BTreeMap<&str, (usize, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().take(k) {
        let e = votes.entry(labels[r.0].as_str()).or_default();
        e.0 += 1;
        e.1.push(r.3);
    }
    let mut best: Option<(&str, usize, f64)> = None;
    for (label, (count, dists)) in votes {
        let sum: f64 = dists.iter().sum();
        let better = match best {
            None => true,
            Some((_, c, s)) => count > c || (count == c && sum < s),
        };
        if better {
            best = Some((label, count, sum));
        }
    }
    best.expect("k >= 1").0.to_string()
}

fn num_gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}

fn nearer(a: &(usize, u64, u64, f64), b: &(usize, u64, u64, f64), qn: u64, cosine: bool, labels: &[String]) -> bool {
    use std::cmp::Ordering::*;
    let ord = if cosine {
        // compare d/sqrt(n) exactly, larger similarity is nearer
        let sa = if a.1 == 0 { None } else { Some((a.1 as u128 * a.1 as u128, a.2 as u128)) };
        let sb = if b.1 == 0 { None } else { Some((b.1 as u128 * b.1 as u128, b.2 as u128)) };
        match (sa, sb) {
            (None, None) => Equal,
            (Some(_), None) => Less,
            (None, Some(_)) => Greater,
            (Some((da, na)), Some((db, nb))) => (db * na).cmp(&(da * nb)),
        }
    } else {
        (qn + a.2 - 2 * a.1).cmp(&(qn + b.2 - 2 * b.1))
    };
    match ord {
        Less => true,
        Greater => false,
        Equal => labels[a.0] < labels[b.0],
    }
}

/// `Name <a@b>` or `a@b`, lowercased.
fn bare_address(part: &str) -> String {
    let part = part.trim();
    let inner = match (part.rfind('<'), part.rfind('>')) {
        (Some(l), Some(r)) if l < r => &part[l + 1..r],
        _ => part,
    };
    inner.trim().to_lowercase()
}

fn addr_list(email: &RawEmail, name: &str) -> Vec<String> {
    email.header_values(name).map(str::to_string).collect()
}

/// Checks one forgery against its donor; returns a description of the
/// first violation.
pub fn check_forgery(donor: &RawEmail, forged: &ForgedEmail) -> Result<(), String> {
    let e = &forged.email;
    if e.body() != donor.body() {
        return Err("body changed".into());
    }
    if e.headers().len() != donor.headers().len() {
        return Err("header count changed".into());
    }
    let sender_fields = ["from", "reply-to", "return-path", "sender"];
    let recipient_fields = ["to", "delivered-to", "x-original-to"];
    let original = donor.claimed_sender();
    let domain = |a: &str| a.rsplit_once('@').map(|(_, d)| d.to_string()).unwrap_or_default();
    match forged.attack {
        AttackKind::BlindSpoofing | AttackKind::KnownDomain => {
            if e.claimed_sender() != forged.impersonated_sender {
                return Err("claimed sender is not the impersonated sender".into());
            }
            if original == forged.impersonated_sender {
                return Err("impersonated sender equals donor sender".into());
            }
            if forged.attack == AttackKind::KnownDomain {
                let (a, b) = (domain(original), domain(&forged.impersonated_sender));
                if a != b {
                    return Err(format!("domain {a} became {b}"));
                }
            }
            for ((n1, v1), (n2, v2)) in donor.headers().iter().zip(e.headers()) {
                if n1 != n2 {
                    return Err("header order changed".into());
                }
                if !sender_fields.contains(&n1.as_str()) && v1 != v2 {
                    return Err(format!("non-sender header {n1} changed"));
                }
                if sender_fields.contains(&n1.as_str()) && !v2.contains(forged.impersonated_sender.as_str()) {
                    return Err(format!("sender header {n1} not rewritten"));
                }
            }
        }
        AttackKind::KnownSender => {
            if e.claimed_sender() != forged.impersonated_sender || original != forged.impersonated_sender {
                return Err("sender identity changed".into());
            }
            let before: BTreeSet<String> = recipient_fields
                .iter()
                .flat_map(|h| addr_list(donor, h))
                .flat_map(|v| v.split(',').map(bare_address).collect::<Vec<_>>())
                .collect();
            let after = addr_list(e, "to");
            if after.is_empty() {
                return Err("no To header".into());
            }
            for to in &after {
                if before.contains(&bare_address(to)) {
                    return Err(format!("recipient {to} was already a recipient"));
                }
            }
            for ((n1, v1), (n2, v2)) in donor.headers().iter().zip(e.headers()) {
                if n1 != n2 {
                    return Err("header order changed".into());
                }
                if !recipient_fields.contains(&n1.as_str()) && v1 != v2 {
                    return Err(format!("non-recipient header {n1} changed"));
                }
            }
        }
    }
    Ok(())
}

/// The desk corpus split three ways, with test sets of every attack for the
/// validation and test splits.
pub struct Desk {
    pub splits: Splits,
    pub validation: BTreeMap<AttackKind, Vec<TestItem>>,
    pub test: BTreeMap<AttackKind, Vec<TestItem>>,
}

pub fn desk(emails: usize, seed: u64) -> Desk {
    let corpus = Corpus::benign(generate(&DeskConfig {
        emails,
        ..DeskConfig::default()
    }));
    let splits = stratified_split(&corpus, 0.2, 0.2, derive_seed(seed, "split"));
    let pools = ForgePools::from_corpus(&splits.train);
    let mut validation = BTreeMap::new();
    let mut test = BTreeMap::new();
    for attack in AttackKind::ALL {
        let v = &splits.validation;
        let t = &splits.test;
        validation.insert(attack, build_test_set(v, attack, v.len() / 2, derive_seed(seed, "forge/validation"), &pools).unwrap());
        test.insert(attack, build_test_set(t, attack, t.len() / 2, derive_seed(seed, "forge/test"), &pools).unwrap());
    }
    Desk { splits, validation, test }
}

/// Donor emails with optional reply-to and return-path headers.
pub fn donor_strategy() -> impl Strategy<Value = RawEmail> {
    (
        "[a-d]",
        prop::sample::select(vec!["x.com", "y.org"]),
        "[e-h]",
        prop::option::of("[a-z ]{0,10}"),
        any::<bool>(),
        "[a-z .\n]{0,60}",
    )
        .prop_map(|(local, domain, to, reply, return_path, body)| {
            let mut headers = vec![
                ("received".to_string(), format!("from relay.{domain} by mx")),
                ("from".to_string(), format!("\"Someone\" <{local}@{domain}>")),
                ("to".to_string(), format!("{to}@z.net")),
                ("subject".to_string(), "hello".to_string()),
            ];
            if let Some(r) = reply {
                headers.push(("reply-to".to_string(), format!("{r} <{local}@{domain}>")));
            }
            if return_path {
                headers.insert(0, ("return-path".to_string(), format!("<{local}@{domain}>")));
            }
            RawEmail::from_parts(headers, body, "donor").unwrap()
        })
}

//! Synthesis of labeled spear-phishing emails from genuine mail.
//!
//! Three threat models, in increasing attacker knowledge:
//!
//! * blind spoofing: a genuine email from one sender is relabeled with
//!   another sender's address;
//! * known domain: the impersonated address shares the donor's domain, so
//!   domain-level transport traits already match;
//! * known sender: a genuine email of the impersonated sender is redirected
//!   to a new recipient, leaving every sender trait intact.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{normalize_sender, Corpus, RawEmail};
use crate::error::{Error, Result};

/// Headers that carry the sender address and are rewritten on spoofing.
pub const SENDER_HEADERS: [&str; 4] = ["from", "reply-to", "return-path", "sender"];

/// Headers that carry the recipient address and are rewritten on redirection.
pub const RECIPIENT_HEADERS: [&str; 3] = ["to", "delivered-to", "x-original-to"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    BlindSpoofing,
    KnownDomain,
    KnownSender,
}

impl AttackKind {
    pub const ALL: [AttackKind; 3] = [
        AttackKind::BlindSpoofing,
        AttackKind::KnownDomain,
        AttackKind::KnownSender,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::BlindSpoofing => "blind_spoofing",
            AttackKind::KnownDomain => "known_domain",
            AttackKind::KnownSender => "known_sender",
        }
    }

    fn stream(self) -> u64 {
        match self {
            AttackKind::BlindSpoofing => 1,
            AttackKind::KnownDomain => 2,
            AttackKind::KnownSender => 3,
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "blind_spoofing" | "blind" => Ok(AttackKind::BlindSpoofing),
            "known_domain" => Ok(AttackKind::KnownDomain),
            "known_sender" => Ok(AttackKind::KnownSender),
            other => Err(Error::InvalidConfig(format!("unknown attack kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgedEmail {
    pub email: RawEmail,
    pub attack: AttackKind,
    pub impersonated_sender: String,
    pub donor_source_id: String,
}

/// Domain part of a normalized address.
pub fn domain_of(address: &str) -> &str {
    address.rsplit_once('@').map(|(_, d)| d).unwrap_or("")
}

/// Every address listed across the email's To-bearing headers.
pub fn recipients(email: &RawEmail) -> BTreeSet<String> {
    RECIPIENT_HEADERS
        .iter()
        .flat_map(|h| email.header_values(h))
        .flat_map(|v| v.split(','))
        .filter_map(|part| normalize_sender(part).ok())
        .collect()
}

fn forged_id(donor: &RawEmail, attack: AttackKind) -> String {
    format!("{}#{}", donor.source_id(), attack)
}

fn spoof_sender(donor: &RawEmail, target: &str, attack: AttackKind) -> Result<ForgedEmail> {
    if donor.claimed_sender() == target {
        return Err(Error::SameSender(target.to_string()));
    }
    let headers = donor
        .headers()
        .iter()
        .map(|(name, value)| {
            let value = match name.as_str() {
                "return-path" => format!("<{target}>"),
                n if SENDER_HEADERS.contains(&n) => target.to_string(),
                _ => value.clone(),
            };
            (name.clone(), value)
        })
        .collect();
    let email = RawEmail::from_parts(headers, donor.body(), forged_id(donor, attack))?;
    Ok(ForgedEmail {
        email,
        attack,
        impersonated_sender: target.to_string(),
        donor_source_id: donor.source_id().to_string(),
    })
}

/// Relabels `donor` as coming from `target`; body and non-sender headers are
/// untouched.
pub fn forge_blind_spoof(donor: &RawEmail, target: &str) -> Result<ForgedEmail> {
    let target = normalize_sender(target)?;
    spoof_sender(donor, &target, AttackKind::BlindSpoofing)
}

/// Relabels `donor` as coming from a random same-domain peer drawn from
/// `sender_pool`.
pub fn forge_known_domain<R: rand::Rng + ?Sized>(
    donor: &RawEmail,
    sender_pool: &[String],
    rng: &mut R,
) -> Result<ForgedEmail> {
    let own = donor.claimed_sender();
    let domain = domain_of(own);
    let peers: Vec<&String> = sender_pool
        .iter()
        .filter(|p| p.as_str() != own && domain_of(p) == domain)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let target = peers
        .choose(rng)
        .ok_or_else(|| Error::NoDomainPeer(own.to_string()))?;
    spoof_sender(donor, target, AttackKind::KnownDomain)
}

/// Redirects a genuine email of the impersonated sender to `new_recipient`.
/// Sender headers stay byte-identical.
pub fn forge_known_sender(donor: &RawEmail, new_recipient: &str) -> Result<ForgedEmail> {
    if donor.header("to").is_none() {
        return Err(Error::MissingRecipient(donor.source_id().to_string()));
    }
    let new_recipient = normalize_sender(new_recipient)?;
    if recipients(donor).contains(&new_recipient) {
        return Err(Error::SameRecipient(new_recipient));
    }
    let headers = donor
        .headers()
        .iter()
        .map(|(name, value)| {
            if RECIPIENT_HEADERS.contains(&name.as_str()) {
                (name.clone(), new_recipient.clone())
            } else {
                (name.clone(), value.clone())
            }
        })
        .collect();
    let email = RawEmail::from_parts(
        headers,
        donor.body(),
        forged_id(donor, AttackKind::KnownSender),
    )?;
    Ok(ForgedEmail {
        email,
        attack: AttackKind::KnownSender,
        impersonated_sender: donor.claimed_sender().to_string(),
        donor_source_id: donor.source_id().to_string(),
    })
}

/// Addresses an attacker can draw targets from: senders and recipients seen
/// in the training corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForgePools {
    pub senders: Vec<String>,
    pub recipients: Vec<String>,
}

impl ForgePools {
    pub fn from_corpus(training: &Corpus) -> Self {
        let senders = training.senders();
        let recipients: BTreeSet<String> = training.emails().iter().flat_map(recipients).collect();
        ForgePools {
            senders,
            recipients: recipients.into_iter().collect(),
        }
    }
}

/// Ground truth attached to a spear item of a test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgeInfo {
    pub attack: AttackKind,
    pub impersonated_sender: String,
    pub donor_source_id: String,
}

/// One labeled element of a test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestItem {
    pub email: RawEmail,
    pub forged: Option<ForgeInfo>,
}

impl TestItem {
    pub fn benign(email: RawEmail) -> Self {
        TestItem { email, forged: None }
    }

    pub fn is_spear(&self) -> bool {
        self.forged.is_some()
    }
}

impl From<ForgedEmail> for TestItem {
    fn from(f: ForgedEmail) -> Self {
        TestItem {
            email: f.email,
            forged: Some(ForgeInfo {
                attack: f.attack,
                impersonated_sender: f.impersonated_sender,
                donor_source_id: f.donor_source_id,
            }),
        }
    }
}

/// Builds a shuffled test list of `n` held-out benign emails and `n` forged
/// emails of one attack kind.
///
/// Donors are drawn from held-out emails not used as benign items first and
/// fall back to the benign items when too few of those are eligible. Targets
/// come from `pools`, which should describe the training corpus so that every
/// impersonated sender has a profile.
pub fn build_test_set(
    held_out: &Corpus,
    attack: AttackKind,
    n: usize,
    seed: u64,
    pools: &ForgePools,
) -> Result<Vec<TestItem>> {
    let insufficient = |reason: String| Error::InsufficientCorpus {
        attack,
        wanted: n,
        reason,
    };
    if n == 0 {
        return Err(Error::InvalidConfig("test set size must be positive".into()));
    }
    let emails = held_out.emails();
    if emails.len() < n {
        return Err(insufficient(format!("only {} held-out emails", emails.len())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attack.stream());
    let mut order: Vec<usize> = (0..emails.len()).collect();
    order.shuffle(&mut rng);

    let mut items: Vec<TestItem> = order[..n]
        .iter()
        .map(|&i| TestItem::benign(emails[i].clone()))
        .collect();

    let known: BTreeSet<&str> = pools.senders.iter().map(String::as_str).collect();
    let mut forged = 0usize;
    for &i in order[n..].iter().chain(order[..n].iter()) {
        if forged == n {
            break;
        }
        let donor = &emails[i];
        let result = match attack {
            AttackKind::BlindSpoofing => {
                let targets: Vec<&String> = pools
                    .senders
                    .iter()
                    .filter(|s| s.as_str() != donor.claimed_sender())
                    .collect();
                match targets.choose(&mut rng) {
                    Some(t) => forge_blind_spoof(donor, t),
                    None => continue,
                }
            }
            AttackKind::KnownDomain => forge_known_domain(donor, &pools.senders, &mut rng),
            AttackKind::KnownSender => {
                if !known.contains(donor.claimed_sender()) {
                    continue;
                }
                let original = recipients(donor);
                let candidates: Vec<&String> = pools
                    .recipients
                    .iter()
                    .filter(|r| !original.contains(*r) && r.as_str() != donor.claimed_sender())
                    .collect();
                match candidates.choose(&mut rng) {
                    Some(r) => forge_known_sender(donor, r),
                    None => continue,
                }
            }
        };
        match result {
            Ok(f) => {
                items.push(f.into());
                forged += 1;
            }
            Err(Error::NoDomainPeer(_) | Error::MissingRecipient(_) | Error::SameRecipient(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if forged < n {
        return Err(insufficient(format!("only {forged} eligible donors")));
    }
    items.shuffle(&mut rng);
    Ok(items)
}

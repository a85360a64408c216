use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use spearguard::vectorize::{tokenize, TokenizedEmail};
use spearguard::{build_vocabulary, raw_features, vectorize, Corpus, FeatureId, FeatureSubset, RawEmail};

const FIELDS: [&str; 4] = ["subject", "x-mailer", "received", "to"];
const WORDS: [&str; 8] = ["alpha", "Beta", "gamma", "delta-9", "a@b.com", "smtp.x.org", "ALPHA", "zeta"];

fn email_strategy() -> impl Strategy<Value = RawEmail> {
    (
        0usize..3,
        prop::collection::vec((0usize..FIELDS.len(), prop::collection::vec(0usize..WORDS.len(), 0..5)), 0..6),
        prop::collection::vec(0usize..WORDS.len(), 0..8),
    )
        .prop_map(|(s, fields, body)| {
            let mut headers = vec![("from".to_string(), format!("s{s}@x.com"))];
            for (f, words) in fields {
                let value: Vec<&str> = words.iter().map(|&w| WORDS[w]).collect();
                headers.push((FIELDS[f].to_string(), value.join(", ")));
            }
            let body: Vec<&str> = body.iter().map(|&w| WORDS[w]).collect();
            RawEmail::from_parts(headers, body.join(" "), "p").unwrap()
        })
}

/// (field, token) occurrences of one email, written without the library's
/// tokenized representation.
fn occurrences(email: &RawEmail) -> BTreeMap<(String, String), u32> {
    let mut out = BTreeMap::new();
    let split = |text: &str| -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !(c.is_alphanumeric() || "@.-".contains(c)))
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    };
    for (name, value) in email.headers() {
        for t in split(value) {
            *out.entry((name.clone(), t)).or_insert(0) += 1;
        }
    }
    for t in split(email.body()) {
        *out.entry(("body".to_string(), t)).or_insert(0) += 1;
    }
    out
}

fn subset_strategy() -> impl Strategy<Value = FeatureSubset> {
    prop::collection::btree_set(prop::sample::select(vec!["subject", "x-mailer", "received", "to", "body", "from"]), 1..6)
        .prop_map(|names| FeatureSubset::parse(names).unwrap())
}

proptest! {
    #[test]
    fn dimension_is_the_union_of_field_vocabularies(
        emails in prop::collection::vec(email_strategy(), 1..12),
        subset in subset_strategy(),
    ) {
        let corpus = Corpus::benign(emails);
        let vocab = build_vocabulary(&corpus, &subset).unwrap();
        let mut union: BTreeSet<(String, String)> = BTreeSet::new();
        for e in corpus.emails() {
            for (field, token) in occurrences(e).into_keys() {
                if subset.contains(&FeatureId::new(&field).unwrap()) {
                    union.insert((field, token));
                }
            }
        }
        prop_assert_eq!(vocab.dim(), union.len());
    }

    #[test]
    fn vector_entries_recount_token_occurrences(
        emails in prop::collection::vec(email_strategy(), 1..10),
        query in email_strategy(),
        subset in subset_strategy(),
    ) {
        let corpus = Corpus::benign(emails);
        let vocab = build_vocabulary(&corpus, &subset).unwrap();
        let v = vectorize(&query, &vocab, &subset);
        let mut expected = vec![0u32; vocab.dim()];
        for ((field, token), n) in occurrences(&query) {
            let id = FeatureId::new(&field).unwrap();
            if !subset.contains(&id) {
                continue;
            }
            if let Some(col) = vocab.column(&id, &token) {
                expected[col] += n;
            }
        }
        let dense: Vec<u32> = v.to_dense().into_iter().map(|x| x as u32).collect();
        prop_assert_eq!(dense, expected);
    }

    #[test]
    fn field_blocks_are_contiguous_and_disjoint(
        emails in prop::collection::vec(email_strategy(), 1..10),
        subset in subset_strategy(),
    ) {
        let corpus = Corpus::benign(emails);
        let vocab = build_vocabulary(&corpus, &subset).unwrap();
        let mut next = 0;
        for f in subset.iter() {
            let r = vocab.columns(f).unwrap();
            prop_assert_eq!(r.start, next);
            next = r.end;
        }
        prop_assert_eq!(next, vocab.dim());
    }

    #[test]
    fn raw_features_are_every_header_plus_body(emails in prop::collection::vec(email_strategy(), 1..10)) {
        let corpus = Corpus::benign(emails);
        let mut names: BTreeSet<String> = corpus.emails().iter()
            .flat_map(|e| e.headers().iter().map(|(n, _)| n.clone()))
            .collect();
        names.insert("body".into());
        let got: BTreeSet<String> = raw_features(&corpus).iter().map(|f| f.as_str().to_string()).collect();
        prop_assert_eq!(got, names);
    }

    #[test]
    fn vocabulary_text_round_trips(emails in prop::collection::vec(email_strategy(), 1..10), subset in subset_strategy()) {
        let corpus = Corpus::benign(emails);
        let tokens: Vec<TokenizedEmail> = corpus.emails().iter().map(TokenizedEmail::new).collect();
        let vocab = spearguard::Vocabulary::from_tokenized(&tokens, &subset).unwrap();
        let back = spearguard::Vocabulary::from_text(&vocab.to_text(), &subset).unwrap();
        prop_assert_eq!(back, vocab);
    }
}

#[test]
fn tokenizer_keeps_addresses_and_hosts_whole() {
    assert_eq!(
        tokenize("from mail.x.org ([10.0.0.1]) by MX-2 <Bob@X.org>;"),
        vec!["from", "mail.x.org", "10.0.0.1", "by", "mx-2", "bob@x.org"]
    );
}

mod common;

use std::fs;

use proptest::prelude::*;
use spearguard::corpus::{parse_email, write_eml, write_mbox};
use spearguard::{load_corpus, CorpusFormat, Error, RawEmail};

const FIXTURE: &str = include_str!("fixtures/list_ham.eml");

#[test]
fn list_message_matches_reference_splitter() {
    let email = parse_email(FIXTURE.as_bytes(), "fixture").unwrap();
    let (headers, body) = common::reference_split(FIXTURE);
    assert_eq!(email.headers(), headers.as_slice());
    assert_eq!(email.body(), body);
    assert_eq!(email.claimed_sender(), "kevin+dated+1030803741.5a0d18@ie.suberic.net");
    // duplicate headers are kept in order
    assert_eq!(email.header_values("x-beenthere").count(), 2);
    assert_eq!(email.header_values("received").count(), 2);
}

#[test]
fn mbox_with_escaped_from_lines() {
    let dir = tempfile::tempdir().unwrap();
    let a = RawEmail::from_parts(
        vec![("from".into(), "a@x.com".into()), ("subject".into(), "one".into())],
        "From here on\n>From quoted\nend\n",
        "a",
    )
    .unwrap();
    let b = RawEmail::from_parts(vec![("from".into(), "b@y.org".into())], "second\n", "b").unwrap();
    let path = dir.path().join("box.mbox");
    write_mbox(&path, &[a.clone(), b.clone()]).unwrap();
    let report = load_corpus(&path, CorpusFormat::Mbox).unwrap();
    let got = report.corpus.emails();
    assert_eq!(got.len(), 2);
    assert!(report.skipped.is_empty());
    assert_eq!(got[0].headers(), a.headers());
    assert_eq!(got[0].body(), a.body());
    assert_eq!(got[1].body(), b.body());
}

#[test]
fn maildir_reads_cur_and_new() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, name, from) in [("cur", "1:2,S", "a@x.com"), ("new", "2", "b@x.com"), ("tmp", "3", "c@x.com")] {
        fs::create_dir_all(dir.path().join(sub)).unwrap();
        fs::write(dir.path().join(sub).join(name), format!("From: {from}\n\nhi\n")).unwrap();
    }
    let corpus = load_corpus(dir.path(), CorpusFormat::Maildir).unwrap().corpus;
    assert_eq!(corpus.senders(), vec!["a@x.com".to_string(), "b@x.com".to_string()]);
}

#[test]
fn unparseable_messages_are_skipped_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("good.eml"), "From: a@x.com\n\nbody\n").unwrap();
    fs::write(dir.path().join("nosender.eml"), "Subject: hi\n\nbody\n").unwrap();
    let report = load_corpus(dir.path(), CorpusFormat::EmlDir).unwrap();
    assert_eq!(report.corpus.len(), 1);
    assert_eq!(report.skipped.len(), 1);
    assert!(report.manifest().starts_with("loaded 1 skipped 1\n"));
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_corpus(dir.path(), CorpusFormat::EmlDir), Err(Error::EmptyCorpus(_))));
}

fn header_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,12}".prop_filter("reserved", |n| n != "from")
}

fn header_value() -> impl Strategy<Value = String> {
    "[ -~]{0,40}".prop_map(|v| v.trim().to_string())
}

proptest! {
    #[test]
    fn written_messages_parse_back(
        extra in prop::collection::vec((header_name(), header_value()), 0..8),
        local in "[a-z]{1,8}",
        domain in "[a-z]{1,8}\\.(com|org)",
        body in "[ -~\n]{0,200}",
    ) {
        let mut headers = vec![("from".to_string(), format!("{local}@{domain}"))];
        headers.extend(extra);
        let email = RawEmail::from_parts(headers, body, "p").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.eml");
        write_eml(&path, &email).unwrap();
        let back = parse_email(&fs::read(&path).unwrap(), "p").unwrap();
        prop_assert_eq!(back.headers(), email.headers());
        prop_assert_eq!(back.claimed_sender(), email.claimed_sender());
    }
}

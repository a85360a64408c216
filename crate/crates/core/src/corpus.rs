//! Email ingestion: header/body splitting, sender normalization and
//! corpus loading from mbox files, maildirs and directories of `.eml` files.
//!
//! Header names are lowercased. Repeated headers (for example `Received`)
//! stay as separate entries in arrival order. Bodies are kept verbatim after
//! lossy UTF-8 decoding; MIME structure is not interpreted.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forge::AttackKind;

/// One parsed message. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEmail {
    headers: Vec<(String, String)>,
    body: String,
    source_id: String,
    claimed_sender: String,
}

impl RawEmail {
    /// Builds an email from already-split parts, deriving the claimed sender
    /// from the first `from` header.
    pub fn from_parts(
        headers: Vec<(String, String)>,
        body: impl Into<String>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        let source_id = source_id.into();
        let headers: Vec<(String, String)> = headers
            .into_iter()
            .map(|(name, value)| (name.trim().to_ascii_lowercase(), value))
            .collect();
        if headers.is_empty() || headers.iter().any(|(name, _)| name.is_empty()) {
            return Err(Error::Parse {
                source_id,
                reason: "empty header list or empty field name".into(),
            });
        }
        let claimed_sender = headers
            .iter()
            .find(|(name, _)| name == "from")
            .and_then(|(_, value)| normalize_sender(value).ok())
            .ok_or_else(|| Error::MissingSender(source_id.clone()))?;
        Ok(RawEmail {
            headers,
            body: body.into(),
            source_id,
            claimed_sender,
        })
    }

    pub fn headers(&self) -> &[(String, String)] {
        &self.headers
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn claimed_sender(&self) -> &str {
        &self.claimed_sender
    }

    /// First value of the named (lowercase) header.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_str())
    }

    pub fn header_values<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.headers
            .iter()
            .filter(move |(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    /// Same message under a different origin label.
    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    /// Renders the header block, one `name: value` line per field.
    pub fn serialize_headers(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.headers {
            out.push_str(name);
            out.push_str(": ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    /// Full message text: headers, blank line, body.
    pub fn to_message_string(&self) -> String {
        let mut out = self.serialize_headers();
        out.push('\n');
        out.push_str(&self.body);
        out
    }
}

/// Whether a corpus holds genuine mail or forged attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    Benign,
    Spear,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    emails: Vec<RawEmail>,
    label_kind: LabelKind,
    attack_kind: Option<AttackKind>,
}

impl Corpus {
    pub fn benign(emails: Vec<RawEmail>) -> Self {
        Corpus {
            emails,
            label_kind: LabelKind::Benign,
            attack_kind: None,
        }
    }

    pub fn spear(emails: Vec<RawEmail>, attack: AttackKind) -> Self {
        Corpus {
            emails,
            label_kind: LabelKind::Spear,
            attack_kind: Some(attack),
        }
    }

    pub fn emails(&self) -> &[RawEmail] {
        &self.emails
    }

    pub fn into_emails(self) -> Vec<RawEmail> {
        self.emails
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn attack_kind(&self) -> Option<AttackKind> {
        self.attack_kind
    }

    pub fn len(&self) -> usize {
        self.emails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emails.is_empty()
    }

    /// Distinct claimed senders, sorted.
    pub fn senders(&self) -> Vec<String> {
        let mut senders: Vec<String> = self
            .emails
            .iter()
            .map(|e| e.claimed_sender.clone())
            .collect();
        senders.sort();
        senders.dedup();
        senders
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorpusFormat {
    Mbox,
    Maildir,
    EmlDir,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mbox" => Ok(CorpusFormat::Mbox),
            "maildir" => Ok(CorpusFormat::Maildir),
            "eml_dir" | "eml" => Ok(CorpusFormat::EmlDir),
            other => Err(Error::InvalidConfig(format!("unknown corpus format '{other}'"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Mbox => "mbox",
            CorpusFormat::Maildir => "maildir",
            CorpusFormat::EmlDir => "eml_dir",
        })
    }
}

/// A message that failed to parse during loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skipped {
    pub source_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub skipped: Vec<Skipped>,
}

impl LoadReport {
    /// Load manifest text: a summary line, then one line per skipped message.
    pub fn manifest(&self) -> String {
        let mut out = format!(
            "loaded {} skipped {}\n",
            self.corpus.len(),
            self.skipped.len()
        );
        for s in &self.skipped {
            out.push_str(&format!("skipped\t{}\t{}\n", s.source_id, s.reason));
        }
        out
    }
}

/// Splits one message into ordered header fields and a body.
pub fn parse_email(raw: &[u8], source_id: &str) -> Result<RawEmail> {
    let parse_err = |reason: &str| Error::Parse {
        source_id: source_id.to_string(),
        reason: reason.to_string(),
    };
    if raw.is_empty() {
        return Err(parse_err("empty input"));
    }
    let text = String::from_utf8_lossy(raw);

    let mut headers: Vec<(String, String)> = Vec::new();
    let mut body: Option<&str> = None;
    let mut offset = 0usize;
    let mut first = true;
    let mut saw_colon = false;

    while offset < text.len() {
        let rest = &text[offset..];
        let (line, next) = match rest.find('\n') {
            Some(i) => (&rest[..i], offset + i + 1),
            None => (rest, text.len()),
        };
        let line = line.strip_suffix('\r').unwrap_or(line);
        offset = next;

        if first {
            first = false;
            // mbox envelope line at the top of a single-message file
            if line.starts_with("From ") {
                continue;
            }
        }
        if line.is_empty() {
            body = Some(&text[offset..]);
            break;
        }
        if line.starts_with([' ', '\t']) {
            if let Some((_, value)) = headers.last_mut() {
                value.push_str(line);
            }
            continue;
        }
        if let Some(colon) = line.find(':') {
            saw_colon = true;
            let name = line[..colon].trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                continue;
            }
            headers.push((
                name.to_ascii_lowercase(),
                line[colon + 1..].trim_start().to_string(),
            ));
        }
    }

    if body.is_none() && !saw_colon {
        return Err(parse_err("no header/body separator and no header field"));
    }
    if headers.is_empty() {
        return Err(parse_err("no header fields"));
    }
    for (_, value) in headers.iter_mut() {
        let trimmed = value.trim();
        if trimmed.len() != value.len() {
            *value = trimmed.to_string();
        }
    }
    RawEmail::from_parts(headers, body.unwrap_or(""), source_id)
}

/// Extracts the addr-spec from `addr`, `<addr>` or `Display Name <addr>`,
/// lowercased.
pub fn normalize_sender(from_value: &str) -> Result<String> {
    let missing = || Error::MissingSender(from_value.to_string());
    let cleaned = strip_quotes_and_comments(from_value);

    let angle = cleaned.split('<').skip(1).find_map(|part| {
        let inner = part.split('>').next()?.trim();
        inner.contains('@').then_some(inner)
    });
    let candidate = match angle {
        Some(addr) => addr.to_string(),
        None => cleaned
            .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
            .map(|t| t.trim_matches(|c: char| matches!(c, '<' | '>' | '"' | '\'' | ',' | ';')))
            .find(|t| t.contains('@'))
            .ok_or_else(missing)?
            .to_string(),
    };

    let addr = candidate.trim().to_lowercase();
    let mut parts = addr.split('@');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(local), Some(domain), None)
            if !local.is_empty() && !domain.is_empty() && !addr.contains(char::is_whitespace) =>
        {
            Ok(addr)
        }
        _ => Err(missing()),
    }
}

fn strip_quotes_and_comments(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut in_quote = false;
    let mut comment_depth = 0usize;
    let mut escaped = false;
    for c in value.chars() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' if in_quote || comment_depth > 0 => escaped = true,
            '"' if comment_depth == 0 => {
                in_quote = !in_quote;
                out.push(' ');
            }
            '(' if !in_quote => comment_depth += 1,
            ')' if !in_quote && comment_depth > 0 => {
                comment_depth -= 1;
                out.push(' ');
            }
            _ if in_quote || comment_depth > 0 => {}
            _ => out.push(c),
        }
    }
    out
}

/// Loads every message under `path`. Messages that fail to parse are
/// skipped and listed in the report.
///
/// Order is stable: files sorted by path, mbox messages in byte order.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadReport> {
    let sources: Vec<(String, Vec<u8>)> = match format {
        CorpusFormat::Mbox => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            split_mbox(&bytes)
                .into_iter()
                .map(|(off, msg)| (format!("{}:{}", path.display(), off), msg))
                .collect()
        }
        CorpusFormat::Maildir => {
            let mut files = Vec::new();
            let mut found = false;
            for sub in ["cur", "new"] {
                let dir = path.join(sub);
                if dir.is_dir() {
                    found = true;
                    files.extend(list_files(&dir, false)?);
                }
            }
            if !found {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no cur/ or new/ subdirectory"),
                ));
            }
            files.sort_by(|a, b| a.file_name().cmp(&b.file_name()).then(a.cmp(b)));
            read_all(files)?
        }
        CorpusFormat::EmlDir => {
            if !path.is_dir() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
                ));
            }
            read_all(list_files(path, true)?)?
        }
    };

    let parsed: Vec<Result<RawEmail>> = sources
        .par_iter()
        .map(|(id, bytes)| parse_email(bytes, id))
        .collect();

    let mut emails = Vec::new();
    let mut skipped = Vec::new();
    for ((id, _), result) in sources.iter().zip(parsed) {
        match result {
            Ok(email) => emails.push(email),
            Err(e) => skipped.push(Skipped {
                source_id: id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if emails.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    Ok(LoadReport {
        corpus: Corpus::benign(emails),
        skipped,
    })
}

fn list_files(dir: &Path, recursive: bool) -> Result<Vec<PathBuf>> {
    let walker = walkdir::WalkDir::new(dir)
        .min_depth(1)
        .max_depth(if recursive { usize::MAX } else { 1 })
        .sort_by_file_name();
    let mut files = Vec::new();
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf());
            Error::io(path, e.into())
        })?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if entry.file_type().is_file() && !hidden {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

fn read_all(files: Vec<PathBuf>) -> Result<Vec<(String, Vec<u8>)>> {
    files
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            Ok((p.display().to_string(), bytes))
        })
        .collect()
}

/// Splits mbox bytes at `From ` lines, returning (byte offset, message).
/// mboxrd quoting (`>From `) is undone and the trailing separator blank
/// line removed.
pub fn split_mbox(bytes: &[u8]) -> Vec<(usize, Vec<u8>)> {
    let mut messages = Vec::new();
    let mut current: Option<(usize, Vec<u8>)> = None;
    let mut preamble = Vec::new();
    let mut pos = 0usize;

    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i + 1)
            .unwrap_or(bytes.len());
        let line = &bytes[pos..end];
        if line.starts_with(b"From ") {
            if let Some(done) = current.take() {
                messages.push(done);
            }
            current = Some((pos, Vec::new()));
        } else {
            let target = match current.as_mut() {
                Some((_, buf)) => buf,
                None => &mut preamble,
            };
            let gts = line.iter().take_while(|&&b| b == b'>').count();
            if gts > 0 && line[gts..].starts_with(b"From ") {
                target.extend_from_slice(&line[1..]);
            } else {
                target.extend_from_slice(line);
            }
        }
        pos = end;
    }
    if let Some(done) = current.take() {
        messages.push(done);
    }
    if !preamble.iter().all(u8::is_ascii_whitespace) {
        messages.insert(0, (0, preamble));
    }
    for (_, msg) in messages.iter_mut() {
        if msg.ends_with(b"\n\n") {
            msg.pop();
        } else if msg.ends_with(b"\r\n\r\n") {
            msg.truncate(msg.len() - 2);
        }
    }
    messages
}

/// Writes emails as an mboxrd file.
pub fn write_mbox(path: &Path, emails: &[RawEmail]) -> Result<()> {
    let mut out = Vec::new();
    for email in emails {
        out.extend_from_slice(b"From MAILER-DAEMON Thu Jan  1 00:00:00 1970\n");
        let text = email.to_message_string();
        for line in text.split_inclusive('\n') {
            let gts = line.bytes().take_while(|&b| b == b'>').count();
            if line[gts..].starts_with("From ") {
                out.push(b'>');
            }
            out.extend_from_slice(line.as_bytes());
        }
        if !text.ends_with('\n') {
            out.push(b'\n');
        }
        out.push(b'\n');
    }
    write_file(path, &out)
}

pub fn write_eml(path: &Path, email: &RawEmail) -> Result<()> {
    write_file(path, email.to_message_string().as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

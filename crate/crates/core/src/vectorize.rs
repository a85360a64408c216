//! Bag-of-words vectorization over header fields.
//!
//! Every header name (plus the pseudo-field `body`) is a raw feature. A
//! [`Vocabulary`] assigns each selected field a contiguous block of columns,
//! fields in subset order and tokens in first-occurrence order within the
//! training corpus. Vectors hold token counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::corpus::{Corpus, LabelKind, RawEmail};
use crate::error::{Error, Result};

/// Name of the pseudo-field holding the message body.
pub const BODY: &str = "body";

/// A raw feature: a lowercase header name, or `body`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId(String);

impl FeatureId {
    pub fn new(name: &str) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("invalid feature name '{name}'")));
        }
        Ok(FeatureId(name))
    }

    pub fn body() -> Self {
        FeatureId(BODY.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A set of raw features, iterated in name order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSubset(BTreeSet<FeatureId>);

impl FeatureSubset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, feature: FeatureId) -> bool {
        self.0.insert(feature)
    }

    pub fn contains(&self, feature: &FeatureId) -> bool {
        self.0.contains(feature)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureId> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses names, one per line; blank lines and `#` comments are ignored.
    pub fn parse<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        names
            .into_iter()
            .map(|n| FeatureId::new(n.as_ref()))
            .collect::<Result<BTreeSet<_>>>()
            .map(FeatureSubset)
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|f| format!("{f}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }
}

impl FromIterator<FeatureId> for FeatureSubset {
    fn from_iter<I: IntoIterator<Item = FeatureId>>(iter: I) -> Self {
        FeatureSubset(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a FeatureSubset {
    type Item = &'a FeatureId;
    type IntoIter = std::collections::btree_set::Iter<'a, FeatureId>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Lowercases and splits on every run of characters other than letters,
/// digits, `@`, `.` and `-`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || matches!(c, '@' | '.' | '-')))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Tokens of every raw feature of one email. Repeated headers contribute
/// their tokens in arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedEmail {
    fields: BTreeMap<FeatureId, Vec<String>>,
}

impl TokenizedEmail {
    pub fn new(email: &RawEmail) -> Self {
        let mut fields: BTreeMap<FeatureId, Vec<String>> = BTreeMap::new();
        for (name, value) in email.headers() {
            fields
                .entry(FeatureId(name.clone()))
                .or_default()
                .extend(tokenize(value));
        }
        fields
            .entry(FeatureId::body())
            .or_default()
            .extend(tokenize(email.body()));
        TokenizedEmail { fields }
    }

    pub fn field(&self, feature: &FeatureId) -> Option<&[String]> {
        self.fields.get(feature).map(Vec::as_slice)
    }

    pub fn features(&self) -> impl Iterator<Item = &FeatureId> {
        self.fields.keys()
    }
}

/// Every raw feature present in the corpus, `body` included.
pub fn raw_features(corpus: &Corpus) -> FeatureSubset {
    let mut set: BTreeSet<FeatureId> = corpus
        .emails()
        .iter()
        .flat_map(|e| e.headers().iter().map(|(n, _)| FeatureId(n.clone())))
        .collect();
    set.insert(FeatureId::body());
    FeatureSubset(set)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct FieldVocab {
    feature: FeatureId,
    offset: usize,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

/// Column layout for one feature subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    fields: Vec<FieldVocab>,
    dim: usize,
}

impl Vocabulary {
    /// Builds column blocks for `subset` from pre-tokenized training emails.
    pub fn from_tokenized<'a, I>(training: I, subset: &FeatureSubset) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenizedEmail>,
        I::IntoIter: Clone,
    {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let training = training.into_iter();
        let mut fields = Vec::with_capacity(subset.len());
        let mut offset = 0usize;
        for feature in subset {
            let mut tokens = Vec::new();
            let mut index = HashMap::new();
            for email in training.clone() {
                for token in email.field(feature).unwrap_or(&[]) {
                    if !index.contains_key(token) {
                        index.insert(token.clone(), (offset + tokens.len()) as u32);
                        tokens.push(token.clone());
                    }
                }
            }
            let width = tokens.len();
            fields.push(FieldVocab {
                feature: feature.clone(),
                offset,
                tokens,
                index,
            });
            offset += width;
        }
        Ok(Vocabulary { fields, dim: offset })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subset(&self) -> FeatureSubset {
        self.fields.iter().map(|f| f.feature.clone()).collect()
    }

    /// Half-open column range of a field, if it is part of this vocabulary.
    pub fn columns(&self, feature: &FeatureId) -> Option<std::ops::Range<usize>> {
        self.fields
            .iter()
            .find(|f| &f.feature == feature)
            .map(|f| f.offset..f.offset + f.tokens.len())
    }

    /// Column of a (field, token) pair.
    pub fn column(&self, feature: &FeatureId, token: &str) -> Option<usize> {
        self.fields
            .iter()
            .find(|f| &f.feature == feature)
            .and_then(|f| f.index.get(token))
            .map(|&i| i as usize)
    }

    /// Counts in-vocabulary tokens; unknown tokens and missing fields add
    /// nothing.
    pub fn vectorize_tokens(&self, email: &TokenizedEmail) -> FeatureVector {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for field in &self.fields {
            for token in email.field(&field.feature).unwrap_or(&[]) {
                if let Some(&col) = field.index.get(token) {
                    *counts.entry(col).or_insert(0) += 1;
                }
            }
        }
        FeatureVector {
            entries: counts.into_iter().collect(),
            dim: self.dim,
        }
    }

    /// Text form: one `field<TAB>token<TAB>column` line per column.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for field in &self.fields {
            for (i, token) in field.tokens.iter().enumerate() {
                out.push_str(&format!("{}\t{}\t{}\n", field.feature, token, field.offset + i));
            }
        }
        out
    }

    /// Reads [`Vocabulary::to_text`] output. Fields listed in `subset` but
    /// absent from the text get an empty block.
    pub fn from_text(text: &str, subset: &FeatureSubset) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Artifact {
            path: "vocabulary".into(),
            line,
            reason,
        };
        let mut per_field: BTreeMap<FeatureId, Vec<(usize, String)>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [field, token, col] = parts[..] else {
                return Err(bad(n + 1, "expected field, token, column".into()));
            };
            let feature = FeatureId::new(field)?;
            if !subset.contains(&feature) {
                return Err(bad(n + 1, format!("field '{field}' not in subset")));
            }
            let col: usize = col
                .parse()
                .map_err(|_| bad(n + 1, format!("bad column '{col}'")))?;
            per_field.entry(feature).or_default().push((col, token.to_string()));
        }
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut fields = Vec::new();
        let mut offset = 0usize;
        for feature in subset {
            let entries = per_field.remove(feature).unwrap_or_default();
            let mut tokens = Vec::with_capacity(entries.len());
            let mut index = HashMap::new();
            for (i, (col, token)) in entries.into_iter().enumerate() {
                if col != offset + i {
                    return Err(bad(0, format!("column {col} out of order for field {feature}")));
                }
                index.insert(token.clone(), col as u32);
                tokens.push(token);
            }
            let width = tokens.len();
            fields.push(FieldVocab {
                feature: feature.clone(),
                offset,
                tokens,
                index,
            });
            offset += width;
        }
        Ok(Vocabulary { fields, dim: offset })
    }
}

/// Builds the vocabulary of `subset` over a benign training corpus.
pub fn build_vocabulary(training: &Corpus, subset: &FeatureSubset) -> Result<Vocabulary> {
    if training.label_kind() != LabelKind::Benign || training.is_empty() {
        return Err(Error::InvalidConfig(
            "vocabulary needs a non-empty benign training corpus".into(),
        ));
    }
    let tokenized: Vec<TokenizedEmail> = training.emails().iter().map(TokenizedEmail::new).collect();
    Vocabulary::from_tokenized(&tokenized, subset)
}

/// Count vector of `email` restricted to the fields of `subset`.
pub fn vectorize(email: &RawEmail, vocab: &Vocabulary, subset: &FeatureSubset) -> FeatureVector {
    let mut tokenized = TokenizedEmail::new(email);
    tokenized.fields.retain(|f, _| subset.contains(f));
    vocab.vectorize_tokens(&tokenized)
}

/// Sparse count vector; entries sorted by column, all counts positive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    entries: Vec<(u32, u32)>,
    dim: usize,
}

impl FeatureVector {
    /// Builds a vector from (column, count) pairs. Zero counts are dropped and
    /// duplicate columns summed.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for (col, count) in entries {
            if col as usize >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: col as usize + 1,
                });
            }
            if count > 0 {
                *counts.entry(col).or_insert(0) += count;
            }
        }
        Ok(FeatureVector {
            entries: counts.into_iter().collect(),
            dim,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector {
            entries: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn get(&self, col: usize) -> u32 {
        self.entries
            .binary_search_by_key(&(col as u32), |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sq(&self) -> u64 {
        self.entries.iter().map(|&(_, v)| (v as u64) * (v as u64)).sum()
    }

    /// Exact integer dot product.
    pub fn dot(&self, other: &FeatureVector) -> u64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0u64;
        while i < self.entries.len() && j < other.entries.len() {
            let (ca, va) = self.entries[i];
            let (cb, vb) = other.entries[j];
            match ca.cmp(&cb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += va as u64 * vb as u64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c as usize] = v as f64;
        }
        out
    }

    /// Same vector with every count multiplied by `factor`.
    pub fn scaled(&self, factor: u32) -> FeatureVector {
        FeatureVector {
            entries: if factor == 0 {
                Vec::new()
            } else {
                self.entries.iter().map(|&(c, v)| (c, v * factor)).collect()
            },
            dim: self.dim,
        }
    }

    /// `index:count` pairs separated by spaces.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(c, v)| format!("{c}:{v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_text(text: &str, dim: usize) -> Result<Self> {
        let bad = |reason: String| Error::Artifact {
            path: "vector".into(),
            line: 0,
            reason,
        };
        let entries = text
            .split_whitespace()
            .map(|pair| {
                let (c, v) = pair
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad pair '{pair}'")))?;
                let c = c.parse().map_err(|_| bad(format!("bad column '{c}'")))?;
                let v = v.parse().map_err(|_| bad(format!("bad count '{v}'")))?;
                Ok((c, v))
            })
            .collect::<Result<Vec<(u32, u32)>>>()?;
        FeatureVector::from_entries(dim, entries)
    }
}

//! Multi-class k-nearest-neighbour sender profiling.
//!
//! Training vectors are labeled with their sender address. A query is
//! assigned the majority label of its `k` nearest training vectors; a
//! message whose predicted sender differs from its claimed sender is flagged
//! as spear phishing.
//!
//! Neighbour selection and voting are independent of training order: the
//! `k` nearest are taken by (distance, label) with distances compared in
//! exact integer arithmetic, vote ties go to the smaller summed distance and
//! then to the lexicographically smaller label.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::RawEmail;
use crate::error::{Error, Result};
use crate::vectorize::{vectorize, FeatureSubset, FeatureVector, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Distance {
    #[default]
    Cosine,
    Euclidean,
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cosine" => Ok(Distance::Cosine),
            "euclidean" => Ok(Distance::Euclidean),
            other => Err(Error::InvalidConfig(format!("unknown distance '{other}'"))),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Cosine => "cosine",
            Distance::Euclidean => "euclidean",
        })
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Divides every count by the counts' greatest common divisor. Cosine
/// distance is unchanged, and integer multiples of a vector map to the same
/// representative, so their distances agree bit for bit.
pub fn primitive(v: &FeatureVector) -> FeatureVector {
    let g = v.entries().iter().fold(0, |g, &(_, c)| gcd(g, c));
    if g <= 1 {
        return v.clone();
    }
    FeatureVector::from_entries(v.dim(), v.entries().iter().map(|&(c, x)| (c, x / g)))
        .expect("columns already validated")
}

impl Distance {
    /// Distance between two vectors given their squared norms.
    ///
    /// Cosine distance is `1 - cos`; a zero vector is at distance 1 from
    /// everything.
    pub fn between(self, a: &FeatureVector, a_norm_sq: u64, b: &FeatureVector, b_norm_sq: u64) -> f64 {
        match self {
            Distance::Cosine => {
                if a_norm_sq == 0 || b_norm_sq == 0 {
                    return 1.0;
                }
                let dot = a.dot(b) as f64;
                1.0 - dot / ((a_norm_sq as f64).sqrt() * (b_norm_sq as f64).sqrt())
            }
            Distance::Euclidean => {
                let sq = a_norm_sq + b_norm_sq - 2 * a.dot(b);
                (sq as f64).sqrt()
            }
        }
    }
}

/// Exact rank of a training vector relative to one query.
#[derive(Debug, Clone, Copy)]
enum Closeness {
    /// Dot product with the query and the training vector's squared norm.
    Cosine { dot: u64, norm_sq: u64 },
    /// Squared euclidean distance.
    Euclidean(u64),
}

impl Closeness {
    /// `Less` when `self` is nearer.
    fn cmp_near(&self, other: &Self) -> Ordering {
        match (*self, *other) {
            (Closeness::Cosine { dot: d1, norm_sq: n1 }, Closeness::Cosine { dot: d2, norm_sq: n2 }) => {
                if d1 == 0 || d2 == 0 {
                    return (d2 > 0).cmp(&(d1 > 0));
                }
                // cos1 > cos2 iff d1^2 n2 > d2^2 n1
                let l = (d1 as u128).pow(2) * n2 as u128;
                let r = (d2 as u128).pow(2) * n1 as u128;
                r.cmp(&l)
            }
            (Closeness::Euclidean(a), Closeness::Euclidean(b)) => a.cmp(&b),
            _ => unreachable!("one model uses one distance"),
        }
    }
}

/// Fitted sender profiles. Immutable; prediction only reads.
#[derive(Debug, Clone, PartialEq)]
pub struct SenderProfileModel {
    vectors: Vec<FeatureVector>,
    norms: Vec<u64>,
    labels: Vec<String>,
    /// index into `label_names`, which is sorted
    label_ids: Vec<usize>,
    label_names: Vec<String>,
    k: usize,
    distance: Distance,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpearVerdict {
    pub predicted_sender: String,
    pub claimed_sender: String,
    pub is_spear: bool,
}

impl SpearVerdict {
    pub fn new(predicted_sender: String, claimed_sender: String) -> Self {
        let is_spear = predicted_sender != claimed_sender;
        SpearVerdict {
            predicted_sender,
            claimed_sender,
            is_spear,
        }
    }
}

/// Stores the labeled training vectors.
pub fn fit(
    vectors: Vec<FeatureVector>,
    labels: Vec<String>,
    k: usize,
    distance: Distance,
) -> Result<SenderProfileModel> {
    if vectors.len() != labels.len() {
        return Err(Error::LengthMismatch {
            vectors: vectors.len(),
            labels: labels.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > vectors.len() {
        return Err(Error::KTooLarge {
            k,
            available: vectors.len(),
        });
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.dim(),
        });
    }
    let mut label_names = labels.clone();
    label_names.sort();
    label_names.dedup();
    let label_ids = labels
        .iter()
        .map(|l| label_names.binary_search(l).expect("label present"))
        .collect();
    let norms = vectors.iter().map(FeatureVector::norm_sq).collect();
    Ok(SenderProfileModel {
        vectors,
        norms,
        labels,
        label_ids,
        label_names,
        k,
        distance,
        dim,
    })
}

impl SenderProfileModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn distance(&self) -> Distance {
        self.distance
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of training vectors per sender, sorted by sender.
    pub fn sender_counts(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0usize; self.label_names.len()];
        for &id in &self.label_ids {
            counts[id] += 1;
        }
        self.label_names.iter().cloned().zip(counts).collect()
    }

    /// Most likely sender of `query`.
    pub fn predict_sender(&self, query: &FeatureVector) -> Result<&str> {
        if query.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.dim(),
            });
        }
        let query = match self.distance {
            Distance::Cosine => primitive(query),
            Distance::Euclidean => query.clone(),
        };
        let q_norm = query.norm_sq();
        let mut scored: Vec<(Closeness, f64, usize)> = self
            .vectors
            .iter()
            .zip(&self.norms)
            .zip(&self.label_ids)
            .map(|((v, &n), &id)| {
                let dot = query.dot(v);
                let key = match self.distance {
                    Distance::Cosine => Closeness::Cosine { dot, norm_sq: n },
                    Distance::Euclidean => Closeness::Euclidean(q_norm + n - 2 * dot),
                };
                (key, self.distance.between(&query, q_norm, v, n), id)
            })
            .collect();

        let by_key = |a: &(Closeness, f64, usize), b: &(Closeness, f64, usize)| a.0.cmp_near(&b.0).then(a.2.cmp(&b.2));
        if self.k < scored.len() {
            scored.select_nth_unstable_by(self.k - 1, by_key);
            scored.truncate(self.k);
        }
        scored.sort_by(by_key);

        // (votes, summed distance) per label id
        let mut tally: Vec<(usize, usize, f64)> = Vec::with_capacity(self.k);
        for &(_, d, id) in &scored {
            match tally.iter_mut().find(|t| t.0 == id) {
                Some(t) => {
                    t.1 += 1;
                    t.2 += d;
                }
                None => tally.push((id, 1, d)),
            }
        }
        let (winner, _, _) = tally
            .into_iter()
            .min_by(|a, b| {
                b.1.cmp(&a.1)
                    .then(a.2.total_cmp(&b.2))
                    .then(a.0.cmp(&b.0))
            })
            .expect("k >= 1");
        Ok(&self.label_names[winner])
    }

    /// Predicts many queries in parallel, preserving order.
    pub fn predict_batch(&self, queries: &[FeatureVector]) -> Result<Vec<String>> {
        queries
            .par_iter()
            .map(|q| self.predict_sender(q).map(str::to_string))
            .collect()
    }

    /// Text form: `# k=`, `# distance=`, `# dim=` lines, then one
    /// `label<TAB>col:count ...` line per training vector.
    pub fn to_text(&self) -> String {
        let mut out = format!("# k={}\n# distance={}\n# dim={}\n", self.k, self.distance, self.dim);
        for (label, v) in self.labels.iter().zip(&self.vectors) {
            out.push_str(label);
            out.push('\t');
            out.push_str(&v.to_text());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, reason: String| Error::Artifact {
            path: "vectors".into(),
            line,
            reason,
        };
        let (mut k, mut distance, mut dim) = (None, None, None);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((key, value)) = meta.trim().split_once('=') {
                    match key.trim() {
                        "k" => k = value.trim().parse::<usize>().ok(),
                        "distance" => distance = Some(value.parse::<Distance>()?),
                        "dim" => dim = value.trim().parse::<usize>().ok(),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let dim = dim.ok_or_else(|| bad(n + 1, "vector before dim header".into()))?;
            let (label, pairs) = line.split_once('\t').unwrap_or((line, ""));
            let v = FeatureVector::from_text(pairs, dim).map_err(|e| bad(n + 1, e.to_string()))?;
            labels.push(label.to_string());
            vectors.push(v);
        }
        let k = k.ok_or_else(|| bad(0, "missing k header".into()))?;
        let distance = distance.ok_or_else(|| bad(0, "missing distance header".into()))?;
        fit(vectors, labels, k, distance)
    }
}

/// Vectorizes `email`, predicts its sender and compares with the claim.
pub fn detect_spear(
    model: &SenderProfileModel,
    email: &RawEmail,
    vocab: &Vocabulary,
    subset: &FeatureSubset,
) -> Result<SpearVerdict> {
    let v = vectorize(email, vocab, subset);
    let predicted = model.predict_sender(&v)?;
    Ok(SpearVerdict::new(
        predicted.to_string(),
        email.claimed_sender().to_string(),
    ))
}

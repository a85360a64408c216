//! Detection metrics, the cross-attack protocol and PCA summaries.
//!
//! The positive class is "spear" throughout.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::forge::{AttackKind, TestItem};
use crate::knn::SpearVerdict;
use crate::rl::{run_selection, RlConfig, Selection};
use crate::vectorize::FeatureVector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// An exact ratio of two counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl ConfusionCounts {
    /// Tallies (predicted spear, actually spear) pairs.
    pub fn tally(outcomes: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (predicted, actual) in outcomes {
            c.record(predicted, actual);
        }
        c
    }

    pub fn record(&mut self, predicted_spear: bool, actually_spear: bool) {
        match (predicted_spear, actually_spear) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn accuracy_fraction(&self) -> Result<Fraction> {
        if self.total() == 0 {
            return Err(Error::EmptyCounts);
        }
        Ok(Fraction {
            num: self.tp + self.tn,
            den: self.total(),
        })
    }

    pub fn rate_fractions(&self) -> Result<(Fraction, Fraction)> {
        if self.positives() == 0 {
            return Err(Error::DegenerateClass("spear"));
        }
        if self.negatives() == 0 {
            return Err(Error::DegenerateClass("benign"));
        }
        Ok((
            Fraction {
                num: self.tp,
                den: self.positives(),
            },
            Fraction {
                num: self.fp,
                den: self.negatives(),
            },
        ))
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// (TP + TN) / (TP + FP + FN + TN)
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    c.accuracy_fraction().map(Fraction::to_f64)
}

/// (TP / (TP + FN), FP / (FP + TN))
pub fn rates(c: &ConfusionCounts) -> Result<(f64, f64)> {
    let (tp, fp) = c.rate_fractions()?;
    Ok((tp.to_f64(), fp.to_f64()))
}

/// One verdict of a test run, with ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerdictRecord {
    pub source_id: String,
    pub actually_spear: bool,
    pub verdict: SpearVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    pub records: Vec<VerdictRecord>,
}

impl Evaluation {
    pub fn accuracy(&self) -> Result<f64> {
        accuracy(&self.counts)
    }
}

/// Runs `detector` over a labeled test list.
pub fn evaluate(detector: &Detector, items: &[TestItem]) -> Result<Evaluation> {
    let verdicts: Vec<SpearVerdict> = items
        .par_iter()
        .map(|item| detector.detect(&item.email))
        .collect::<Result<_>>()?;
    let records: Vec<VerdictRecord> = items
        .iter()
        .zip(verdicts)
        .map(|(item, verdict)| VerdictRecord {
            source_id: item.email.source_id().to_string(),
            actually_spear: item.is_spear(),
            verdict,
        })
        .collect();
    let counts = ConfusionCounts::tally(records.iter().map(|r| (r.verdict.is_spear, r.actually_spear)));
    Ok(Evaluation { counts, records })
}

/// Accuracy of subsets selected against one attack (row) on test sets of
/// every attack (column).
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttackMatrix {
    cells: [[f64; 3]; 3],
}

fn slot(kind: AttackKind) -> usize {
    match kind {
        AttackKind::BlindSpoofing => 0,
        AttackKind::KnownDomain => 1,
        AttackKind::KnownSender => 2,
    }
}

impl CrossAttackMatrix {
    pub fn get(&self, trained_on: AttackKind, tested_on: AttackKind) -> f64 {
        self.cells[slot(trained_on)][slot(tested_on)]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trained_on");
        for k in AttackKind::ALL {
            out.push(',');
            out.push_str(k.as_str());
        }
        out.push('\n');
        for row in AttackKind::ALL {
            out.push_str(row.as_str());
            for col in AttackKind::ALL {
                out.push_str(&format!(",{}", self.get(row, col)));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CrossAttackResult {
    pub matrix: CrossAttackMatrix,
    pub selections: BTreeMap<AttackKind, Selection>,
    pub evaluations: BTreeMap<(AttackKind, AttackKind), Evaluation>,
}

/// Selects a subset against each attack's validation set and scores its
/// detector on every attack's test set.
pub fn cross_attack(
    config: &RlConfig,
    train: &Corpus,
    validation: &BTreeMap<AttackKind, Vec<TestItem>>,
    test: &BTreeMap<AttackKind, Vec<TestItem>>,
) -> Result<CrossAttackResult> {
    let missing = |what: &str, k: AttackKind| Error::InvalidConfig(format!("no {what} set for {k}"));
    let mut cells = [[0.0; 3]; 3];
    let mut selections = BTreeMap::new();
    let mut evaluations = BTreeMap::new();
    for trained_on in AttackKind::ALL {
        let val = validation
            .get(&trained_on)
            .ok_or_else(|| missing("validation", trained_on))?;
        let selection = run_selection(config, train, val)?;
        let detector = Detector::train(train, &selection.subset, config.knn_k, config.distance)?;
        for tested_on in AttackKind::ALL {
            let items = test.get(&tested_on).ok_or_else(|| missing("test", tested_on))?;
            let eval = evaluate(&detector, items)?;
            cells[slot(trained_on)][slot(tested_on)] = eval.accuracy()?;
            evaluations.insert((trained_on, tested_on), eval);
        }
        selections.insert(trained_on, selection);
    }
    Ok(CrossAttackResult {
        matrix: CrossAttackMatrix { cells },
        selections,
        evaluations,
    })
}

/// Five-number spread of one projected component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Spread {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    fn of(values: &[f64]) -> Spread {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Spread {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        }
    }
}

/// Two-component projection of a set of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaSummary {
    pub mean: Vec<f64>,
    /// Unit-length principal directions, largest variance first.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalue of each component.
    pub explained_variance: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
    /// One row per input vector, one column per component.
    pub projections: Vec<Vec<f64>>,
    pub spread: Vec<Spread>,
    /// Set when the data has rank 1 and only one component is reported.
    pub degenerate: bool,
}

/// Centered sparse data with implicit covariance products.
struct Centered<'a> {
    rows: &'a [FeatureVector],
    mean: Vec<f64>,
    scale: f64,
}

impl Centered<'_> {
    /// `X_c · q` for a dense direction `q`.
    fn project(&self, q: &[f64]) -> Vec<f64> {
        let shift: f64 = self.mean.iter().zip(q).map(|(m, x)| m * x).sum();
        self.rows
            .iter()
            .map(|r| r.entries().iter().map(|&(c, v)| v as f64 * q[c as usize]).sum::<f64>() - shift)
            .collect()
    }

    /// `C · q` with `C = X_cᵀ X_c / (n - 1)`.
    fn cov_mul(&self, q: &[f64]) -> Vec<f64> {
        let y = self.project(q);
        let y_sum: f64 = y.iter().sum();
        let mut out: Vec<f64> = self.mean.iter().map(|m| -m * y_sum).collect();
        for (r, yi) in self.rows.iter().zip(&y) {
            for &(c, v) in r.entries() {
                out[c as usize] += v as f64 * yi;
            }
        }
        out.iter_mut().for_each(|x| *x *= self.scale);
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormalizes the columns in place (modified Gram-Schmidt). Columns that
/// collapse are replaced with fresh random directions.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut ChaCha8Rng) {
    for i in 0..cols.len() {
        for attempt in 0..8 {
            for j in 0..i {
                let (head, tail) = cols.split_at_mut(i);
                let p = dot(&tail[0], &head[j]);
                tail[0].iter_mut().zip(&head[j]).for_each(|(x, y)| *x -= p * y);
            }
            let norm = dot(&cols[i], &cols[i]).sqrt();
            if norm > 1e-10 || attempt == 7 {
                cols[i].iter_mut().for_each(|x| *x /= norm.max(f64::MIN_POSITIVE));
                break;
            }
            cols[i] = (0..cols[i].len()).map(|_| rng.random::<f64>() - 0.5).collect();
        }
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues (descending) and matching eigenvectors as
/// columns.
pub(crate) fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| v[r][i]).collect())
        .collect();
    (values, vectors)
}

/// Top-two principal components of `vectors`, found by block power
/// iteration on the implicit covariance with Rayleigh-Ritz refinement.
///
/// Rank-one data yields a single component with `degenerate` set; data
/// with no variance is an error.
pub fn pca_2d(vectors: &[FeatureVector]) -> Result<PcaSummary> {
    let n = vectors.len();
    if n < 3 {
        return Err(Error::InvalidConfig(format!("PCA needs at least 3 vectors, got {n}")));
    }
    let d = vectors[0].dim();
    if d < 2 {
        return Err(Error::InvalidConfig(format!("PCA needs dimension >= 2, got {d}")));
    }
    if let Some(v) = vectors.iter().find(|v| v.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.dim(),
        });
    }

    let mut mean = vec![0.0; d];
    for v in vectors {
        for &(c, x) in v.entries() {
            mean[c as usize] += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let data = Centered {
        rows: vectors,
        mean,
        scale: 1.0 / (n - 1) as f64,
    };

    let mut total_variance = 0.0;
    for v in vectors {
        let mut sq: f64 = data.mean.iter().map(|m| m * m).sum();
        for &(c, x) in v.entries() {
            let m = data.mean[c as usize];
            sq += (x as f64 - m).powi(2) - m * m;
        }
        total_variance += sq;
    }
    total_variance *= data.scale;
    if total_variance <= 1e-12 {
        return Err(Error::DegenerateData { rank: 0 });
    }

    let block = d.min(n).min(8).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(0x9ca);
    let mut q: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..d).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut q, &mut rng);

    let mut values = vec![0.0; block];
    let tol = 1e-13 * total_variance;
    for _ in 0..10_000 {
        let mut z: Vec<Vec<f64>> = q.iter().map(|col| data.cov_mul(col)).collect();
        orthonormalize(&mut z, &mut rng);
        // Rayleigh-Ritz on span(z)
        let cz: Vec<Vec<f64>> = z.iter().map(|col| data.cov_mul(col)).collect();
        let t: Vec<Vec<f64>> = (0..block)
            .map(|i| (0..block).map(|j| 0.5 * (dot(&z[i], &cz[j]) + dot(&z[j], &cz[i]))).collect())
            .collect();
        let (ritz, rot) = jacobi_eigen(t);
        let mut next = vec![vec![0.0; d]; block];
        let mut residual = 0.0f64;
        for (k, col) in next.iter_mut().enumerate() {
            for (i, zi) in z.iter().enumerate() {
                let w = rot[k][i];
                col.iter_mut().zip(zi).for_each(|(x, y)| *x += w * y);
            }
            if k < 2 {
                let cq: Vec<f64> = (0..d)
                    .map(|r| (0..block).map(|i| rot[k][i] * cz[i][r]).sum())
                    .collect();
                let res: f64 = cq
                    .iter()
                    .zip(col.iter())
                    .map(|(a, b)| (a - ritz[k] * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                residual = residual.max(res);
            }
        }
        let settled = (ritz[0] - values[0]).abs() <= tol && (ritz[1] - values[1]).abs() <= tol;
        values = ritz;
        q = next;
        if settled && residual <= 1e-9 * total_variance.sqrt() {
            break;
        }
    }

    let rank_two = values[1] > 1e-10 * values[0].max(1e-300) && values[1] > 1e-12;
    let count = if rank_two { 2 } else { 1 };
    let mut components: Vec<Vec<f64>> = q.into_iter().take(count).collect();
    for c in components.iter_mut() {
        let pivot = c
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        if pivot < 0.0 {
            c.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let per_component: Vec<Vec<f64>> = components.iter().map(|c| data.project(c)).collect();
    let projections = (0..n)
        .map(|i| per_component.iter().map(|p| p[i]).collect())
        .collect();
    let spread = per_component.iter().map(|p| Spread::of(p)).collect();
    Ok(PcaSummary {
        mean: data.mean,
        explained_variance: values.into_iter().take(count).collect(),
        components,
        total_variance,
        projections,
        spread,
        degenerate: !rank_two,
    })
}

/// Mean squared residual, `sum ||x - x_hat||^2 / (n - 1)`, after
/// reconstructing each vector from the summary's components.
pub fn reconstruction_error(vectors: &[FeatureVector], pca: &PcaSummary) -> f64 {
    let mut err = 0.0;
    for (v, proj) in vectors.iter().zip(&pca.projections) {
        let mut x: Vec<f64> = v.to_dense();
        x.iter_mut().zip(&pca.mean).for_each(|(a, m)| *a -= m);
        for (c, p) in pca.components.iter().zip(proj) {
            x.iter_mut().zip(c).for_each(|(a, u)| *a -= p * u);
        }
        err += dot(&x, &x);
    }
    err / (vectors.len() - 1) as f64
}

/// Seeded sample of at most `cap` vectors, in original order.
pub fn sample_for_pca(vectors: &[FeatureVector], cap: usize, seed: u64) -> Vec<FeatureVector> {
    if vectors.len() <= cap {
        return vectors.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, vectors.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| vectors[i].clone()).collect()
}

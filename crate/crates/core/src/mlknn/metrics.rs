use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const METRIC_NAMES: [&str; 6] = [
    "accuracy",
    "f_measure",
    "hamming_loss",
    "ranking_loss",
    "avg_precision",
    "coverage",
];

/// Instances left out of a metric's average because its per-instance term
/// is undefined for them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedCounts {
    /// `|y| = 0`: skipped in accuracy, recall, ranking loss, average
    /// precision and coverage.
    pub no_true_labels: usize,
    /// `|z| = 0`: skipped in precision.
    pub no_predicted_labels: usize,
    /// `|complement of y| = 0`: skipped in ranking loss.
    pub all_true_labels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f_measure: f64,
    pub hamming_loss: f64,
    pub ranking_loss: f64,
    pub avg_precision: f64,
    pub coverage: f64,
    pub instances: usize,
    pub skipped: SkippedCounts,
}

impl MetricsReport {
    /// The six metrics in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 6] {
        [
            self.accuracy,
            self.f_measure,
            self.hamming_loss,
            self.ranking_loss,
            self.avg_precision,
            self.coverage,
        ]
    }

    /// `true` when smaller values of metric `i` are better.
    pub fn lower_is_better(i: usize) -> bool {
        matches!(METRIC_NAMES[i], "hamming_loss" | "ranking_loss" | "coverage")
    }
}

/// 1-based rank of every label: highest score first, ties by label index.
fn label_ranks(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (pos, &j) in idx.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    ranks
}

struct Mean {
    sum: f64,
    count: usize,
}

impl Mean {
    fn new() -> Self {
        Mean { sum: 0.0, count: 0 }
    }

    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    /// Zero when nothing was averaged.
    fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Mean of `num/den` terms, summed as an exact fraction so that hand-checkable
/// cases round only once. Falls back to floating point on overflow.
fn mean_of_fractions(terms: &[(u64, u64)]) -> f64 {
    let exact = terms.iter().try_fold((0u128, 1u128), |(n, d), &(a, b)| {
        let (a, b) = (u128::from(a), u128::from(b));
        let g = gcd(d, b);
        let lcm = (d / g).checked_mul(b)?;
        let n = n.checked_mul(lcm / d)?.checked_add(a.checked_mul(lcm / b)?)?;
        let g = gcd(n, lcm).max(1);
        Some((n / g, lcm / g))
    });
    match exact {
        Some((n, d)) => {
            let d = d * terms.len() as u128;
            let g = gcd(n, d).max(1);
            (n / g) as f64 / (d / g) as f64
        }
        None => terms.iter().map(|&(a, b)| a as f64 / b as f64).sum::<f64>() / terms.len() as f64,
    }
}

/// Example-based and ranking-based multi-label metrics.
pub fn evaluate(actual: &Matrix<u8>, predictions: &PredictionSet) -> Result<MetricsReport> {
    let n = actual.rows();
    let l = actual.cols();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot evaluate zero instances".into()));
    }
    if predictions.labels.rows() != n
        || predictions.scores.rows() != n
        || predictions.labels.cols() != l
        || predictions.scores.cols() != l
    {
        return Err(Error::DimensionMismatch(
            "predictions do not match the actual label matrix".into(),
        ));
    }

    let mut skipped = SkippedCounts::default();
    let mut accuracy = Mean::new();
    let mut precision = Mean::new();
    let mut recall = Mean::new();
    let mut hamming = Mean::new();
    let mut ranking_loss = Mean::new();
    let mut avg_precision = Mean::new();
    let mut coverage = Mean::new();

    for i in 0..n {
        let y = actual.row(i);
        let z = predictions.labels.row(i);
        let inter = y.iter().zip(z).filter(|(&a, &b)| a == 1 && b == 1).count();
        let n_true = y.iter().filter(|&&v| v == 1).count();
        let n_pred = z.iter().filter(|&&v| v == 1).count();
        let union = n_true + n_pred - inter;
        let sym_diff = union - inter;
        hamming.push(sym_diff as f64 / l as f64);

        if n_pred == 0 {
            skipped.no_predicted_labels += 1;
        } else {
            precision.push(inter as f64 / n_pred as f64);
        }
        if n_true == 0 {
            skipped.no_true_labels += 1;
            continue;
        }
        accuracy.push(inter as f64 / union as f64);
        recall.push(inter as f64 / n_true as f64);

        let ranks = label_ranks(predictions.scores.row(i));
        let relevant: Vec<usize> = (0..l).filter(|&j| y[j] == 1).collect();
        let irrelevant: Vec<usize> = (0..l).filter(|&j| y[j] == 0).collect();

        if irrelevant.is_empty() {
            skipped.all_true_labels += 1;
        } else {
            let misordered = relevant
                .iter()
                .flat_map(|&a| irrelevant.iter().map(move |&b| (a, b)))
                .filter(|&(a, b)| ranks[a] > ranks[b])
                .count();
            ranking_loss.push(misordered as f64 / (relevant.len() * irrelevant.len()) as f64);
        }

        let terms: Vec<(u64, u64)> = relevant
            .iter()
            .map(|&a| {
                let above = relevant.iter().filter(|&&b| ranks[b] <= ranks[a]).count();
                (above as u64, ranks[a] as u64)
            })
            .collect();
        avg_precision.push(mean_of_fractions(&terms));

        let deepest = relevant.iter().map(|&a| ranks[a]).max().unwrap_or(1);
        coverage.push(deepest as f64 - 1.0);
    }

    let (p, r) = (precision.value(), recall.value());
    let f_measure = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok(MetricsReport {
        accuracy: accuracy.value(),
        f_measure,
        hamming_loss: hamming.value(),
        ranking_loss: ranking_loss.value(),
        avg_precision: avg_precision.value(),
        coverage: coverage.value(),
        instances: n,
        skipped,
    })
}

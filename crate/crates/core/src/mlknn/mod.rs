//! ML-kNN: per-label MAP estimation from the label counts of the k nearest
//! training neighbours, plus the multi-label evaluation metrics.

mod metrics;

pub use metrics::{evaluate, MetricsReport, SkippedCounts, METRIC_NAMES};

use rayon::prelude::*;

use crate::dataset::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_SMOOTHING: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MlknnModel {
    k: usize,
    smoothing: f64,
    mins: Vec<f64>,
    ranges: Vec<f64>,
    train_features: Matrix<f64>,
    train_labels: Matrix<u8>,
    /// P(H1) per label.
    prior: Vec<f64>,
    /// P(count = c | H1), L x (k + 1).
    cond_true: Matrix<f64>,
    /// P(count = c | H0), L x (k + 1).
    cond_false: Matrix<f64>,
}

/// Binary decisions and posterior scores for a batch of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub labels: Matrix<u8>,
    pub scores: Matrix<f64>,
}

impl MlknnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn num_features(&self) -> usize {
        self.mins.len()
    }

    pub fn num_labels(&self) -> usize {
        self.prior.len()
    }

    pub fn prior(&self, label: usize) -> f64 {
        self.prior[label]
    }

    /// `P(count | H1)` for `count` in `0..=k`.
    pub fn likelihood_true(&self, label: usize) -> &[f64] {
        self.cond_true.row(label)
    }

    /// `P(count | H0)` for `count` in `0..=k`.
    pub fn likelihood_false(&self, label: usize) -> &[f64] {
        self.cond_false.row(label)
    }

    fn normalize_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mins.iter().zip(&self.ranges))
            .map(|(&v, (&lo, &range))| if range > 0.0 { (v - lo) / range } else { 0.0 })
            .collect()
    }

    /// Indices of the k nearest training rows (ties by ascending index).
    fn neighbours(&self, query: &[f64], exclude: Option<usize>) -> Vec<usize> {
        nearest(&self.train_features, query, self.k, exclude)
    }

    fn positive_counts(&self, neighbours: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_labels()];
        for &j in neighbours {
            for (c, &y) in counts.iter_mut().zip(self.train_labels.row(j)) {
                *c += usize::from(y);
            }
        }
        counts
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(train: &Matrix<f64>, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    // (distance, index) kept sorted ascending; lexicographic order gives the
    // index tie-break.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for j in 0..train.rows() {
        if Some(j) == exclude {
            continue;
        }
        let d = squared_distance(train.row(j), query);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, bi)| bd < d || (bd == d && bi < j));
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

/// Fits ML-kNN with `k` neighbours and Laplace smoothing `s`.
pub fn fit(train: &MultiLabelDataset, k: usize, smoothing: f64) -> Result<MlknnModel> {
    let n = train.num_instances();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidArgument(format!(
            "ML-kNN needs more than k={k} training instances, got {n}"
        )));
    }
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidArgument(format!("smoothing must be positive, got {smoothing}")));
    }
    let x = train.features();
    let d = train.num_features();
    let l = train.num_labels();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for i in 0..n {
        for (j, &v) in x.row(i).iter().enumerate() {
            mins[j] = mins[j].min(v);
            maxs[j] = maxs[j].max(v);
        }
    }
    let ranges: Vec<f64> = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();

    let mut model = MlknnModel {
        k,
        smoothing,
        mins,
        ranges,
        train_features: Matrix::zeros(0, d),
        train_labels: train.labels().clone(),
        prior: Vec::new(),
        cond_true: Matrix::zeros(l, k + 1),
        cond_false: Matrix::zeros(l, k + 1),
    };
    let normalized: Vec<f64> = (0..n).flat_map(|i| model.normalize_row(x.row(i))).collect();
    model.train_features = Matrix::from_vec(n, d, normalized)?;

    let y = train.labels();
    model.prior = (0..l)
        .map(|j| {
            let positives: f64 = (0..n).map(|i| f64::from(y.get(i, j))).sum();
            (smoothing + positives) / (2.0 * smoothing + n as f64)
        })
        .collect();

    let counts: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb = model.neighbours(model.train_features.row(i), Some(i));
            model.positive_counts(&nb)
        })
        .collect();

    let mut hits_true = Matrix::filled(l, k + 1, 0usize);
    let mut hits_false = Matrix::filled(l, k + 1, 0usize);
    for (i, c) in counts.iter().enumerate() {
        for j in 0..l {
            let table = if y.get(i, j) == 1 { &mut hits_true } else { &mut hits_false };
            table.set(j, c[j], table.get(j, c[j]) + 1);
        }
    }
    for j in 0..l {
        let total_true: usize = hits_true.row(j).iter().sum();
        let total_false: usize = hits_false.row(j).iter().sum();
        for c in 0..=k {
            let denom_t = smoothing * (k + 1) as f64 + total_true as f64;
            let denom_f = smoothing * (k + 1) as f64 + total_false as f64;
            model.cond_true.set(j, c, (smoothing + hits_true.get(j, c) as f64) / denom_t);
            model.cond_false.set(j, c, (smoothing + hits_false.get(j, c) as f64) / denom_f);
        }
    }
    Ok(model)
}

/// MAP prediction per label; the score is the posterior `P(H1 | count)`.
pub fn predict(model: &MlknnModel, test: &MultiLabelDataset) -> Result<PredictionSet> {
    if test.num_features() != model.num_features() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} features, test data has {}",
            model.num_features(),
            test.num_features()
        )));
    }
    let l = model.num_labels();
    let rows: Vec<(Vec<u8>, Vec<f64>)> = (0..test.num_instances())
        .into_par_iter()
        .map(|i| {
            let q = model.normalize_row(test.features().row(i));
            let counts = model.positive_counts(&model.neighbours(&q, None));
            let mut labels = Vec::with_capacity(l);
            let mut scores = Vec::with_capacity(l);
            for (j, &c) in counts.iter().enumerate() {
                let on = model.prior[j] * model.cond_true.get(j, c);
                let off = (1.0 - model.prior[j]) * model.cond_false.get(j, c);
                labels.push(u8::from(on > off));
                scores.push(on / (on + off));
            }
            (labels, scores)
        })
        .collect();
    let n = rows.len();
    let (labels, scores): (Vec<Vec<u8>>, Vec<Vec<f64>>) = rows.into_iter().unzip();
    Ok(PredictionSet {
        labels: Matrix::from_vec(n, l, labels.concat())?,
        scores: Matrix::from_vec(n, l, scores.concat())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: Vec<Vec<f64>>, y: Vec<Vec<u8>>) -> MultiLabelDataset {
        MultiLabelDataset::from_matrices(Matrix::from_rows(&x).unwrap(), Matrix::from_rows(&y).unwrap()).unwrap()
    }

    #[test]
    fn smoothed_prior_of_always_on_label() {
        let x: Vec<Vec<f64>> = (0..99).map(|i| vec![f64::from(i)]).collect();
        let y = vec![vec![1u8]; 99];
        let model = fit(&ds(x, y), 10, 1.0).unwrap();
        assert_eq!(model.prior(0), 100.0 / 101.0);
    }

    #[test]
    fn likelihood_tables_are_distributions() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i % 7), f64::from(i % 3)]).collect();
        let y: Vec<Vec<u8>> = (0..40).map(|i| vec![u8::from(i % 7 < 3), u8::from(i % 2 == 0)]).collect();
        let model = fit(&ds(x, y), 5, 1.0).unwrap();
        for j in 0..2 {
            let st: f64 = model.likelihood_true(j).iter().sum();
            let sf: f64 = model.likelihood_false(j).iter().sum();
            assert!((st - 1.0).abs() < 1e-9 && (sf - 1.0).abs() < 1e-9);
            assert!(model.likelihood_true(j).iter().all(|&p| p > 0.0 && p < 1.0));
            assert!(model.prior(j) > 0.0 && model.prior(j) < 1.0);
        }
    }

    #[test]
    fn training_excludes_self() {
        // Pairs of identical points with identical labels; with k=1 every
        // instance's neighbour is its twin, never itself.
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i / 2) * 10.0]).collect();
        let y: Vec<Vec<u8>> = (0..10).map(|i| vec![u8::from((i / 2) % 2 == 0)]).collect();
        let data = ds(x, y);
        let model = fit(&data, 1, 1.0).unwrap();
        for i in 0..10 {
            let nb = model.neighbours(model.train_features.row(i), Some(i));
            assert_eq!(nb, vec![i ^ 1]);
        }
        // every positive instance saw exactly one positive neighbour
        assert_eq!(model.likelihood_true(0)[1], (1.0 + 6.0) / (2.0 + 6.0));
    }

    #[test]
    fn unanimous_cluster_predicts_label() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            x.push(vec![0.0 + f64::from(i) * 1e-3, 0.0]);
            y.push(vec![1, 0]);
            x.push(vec![10.0 + f64::from(i) * 1e-3, 10.0]);
            y.push(vec![0, 1]);
        }
        let model = fit(&ds(x, y), 10, 1.0).unwrap();
        let test = ds(vec![vec![0.01, 0.0], vec![10.01, 10.0]], vec![vec![0, 0], vec![0, 0]]);
        let p = predict(&model, &test).unwrap();
        assert_eq!(p.labels.to_rows(), vec![vec![1, 0], vec![0, 1]]);
        assert!(p.scores.as_slice().iter().all(|&s| s > 0.0 && s < 1.0));
    }

    #[test]
    fn distance_ties_use_lowest_index() {
        let train = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(nearest(&train, &[0.0], 2, None), vec![0, 1]);
        assert_eq!(nearest(&train, &[0.0], 3, Some(0)), vec![1, 2, 3]);
    }

    #[test]
    fn fit_and_predict_errors() {
        let data = ds(vec![vec![0.0], vec![1.0]], vec![vec![1], vec![0]]);
        assert!(fit(&data, 2, 1.0).is_err());
        assert!(fit(&data, 0, 1.0).is_err());
        assert!(fit(&data, 1, 0.0).is_err());
        let model = fit(&data, 1, 1.0).unwrap();
        let wide = ds(vec![vec![0.0, 1.0]], vec![vec![1]]);
        assert!(matches!(predict(&model, &wide), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn predictions_are_deterministic() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![f64::from(i % 5), f64::from(i % 4)]).collect();
        let y: Vec<Vec<u8>> = (0..50).map(|i| vec![u8::from(i % 5 == 0), u8::from(i % 4 < 2)]).collect();
        let data = ds(x, y);
        let a = predict(&fit(&data, 7, 1.0).unwrap(), &data).unwrap();
        let b = predict(&fit(&data, 7, 1.0).unwrap(), &data).unwrap();
        assert_eq!(a, b);
    }
}

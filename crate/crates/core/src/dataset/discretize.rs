use super::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::infotheory::DiscreteColumn;

pub const DEFAULT_BINS: u32 = 10;

/// Equal-width binned features plus the untouched binary labels, stored
/// column-wise for the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedDataset {
    bins: u32,
    features: Vec<DiscreteColumn>,
    labels: Vec<DiscreteColumn>,
    bin_edges: Vec<Vec<f64>>,
}

impl DiscretizedDataset {
    pub fn bins(&self) -> u32 {
        self.bins
    }

    pub fn num_instances(&self) -> usize {
        self.labels[0].len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn feature(&self, j: usize) -> &DiscreteColumn {
        &self.features[j]
    }

    pub fn label(&self, j: usize) -> &DiscreteColumn {
        &self.labels[j]
    }

    pub fn features(&self) -> &[DiscreteColumn] {
        &self.features
    }

    pub fn labels(&self) -> &[DiscreteColumn] {
        &self.labels
    }

    /// The `bins - 1` interior thresholds of feature `j`.
    pub fn bin_edges(&self, j: usize) -> &[f64] {
        &self.bin_edges[j]
    }

    pub fn code(&self, row: usize, feature: usize) -> u32 {
        self.features[feature].codes()[row]
    }
}

/// Equal-width binning of every feature over its own `[min, max]`.
///
/// Constant features map to bin 0 and the maximum lands in bin `bins - 1`.
pub fn discretize(ds: &MultiLabelDataset, bins: u32) -> Result<DiscretizedDataset> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("bin count must be >= 2, got {bins}")));
    }
    let x = ds.features();
    let mut features = Vec::with_capacity(ds.num_features());
    let mut bin_edges = Vec::with_capacity(ds.num_features());
    for j in 0..ds.num_features() {
        let col = x.column(j);
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        let codes: Vec<u32> = if range > 0.0 {
            col.iter().map(|&v| bin_of(v, lo, range, bins)).collect()
        } else {
            vec![0; col.len()]
        };
        let edges = (1..bins)
            .map(|b| lo + range * f64::from(b) / f64::from(bins))
            .collect();
        features.push(DiscreteColumn::new(codes, bins)?);
        bin_edges.push(edges);
    }
    let labels = (0..ds.num_labels())
        .map(|j| {
            DiscreteColumn::new(
                ds.labels().column(j).into_iter().map(u32::from).collect(),
                2,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscretizedDataset {
        bins,
        features,
        labels,
        bin_edges,
    })
}

fn bin_of(v: f64, lo: f64, range: f64, bins: u32) -> u32 {
    let scaled = ((v - lo) / range * f64::from(bins)).floor();
    (scaled.max(0.0) as u32).min(bins - 1)
}

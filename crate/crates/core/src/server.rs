//! Global phase: average the client matrices and derive the two objectives.

use serde::{Deserialize, Serialize};

use crate::client::ClientReport;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pareto::{self, FeatureRanking};
use crate::SCHEMA_VERSION;

/// How client matrices are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Plain element-wise mean over clients.
    #[default]
    Unweighted,
    /// Mean weighted by each client's instance count.
    Weighted,
}

/// Global MI' and CD' matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "StatsWire")]
pub struct AggregatedStats {
    pub mi_global: Matrix<f64>,
    pub cd_global: Matrix<f64>,
    pub num_clients: u32,
}

#[derive(Serialize)]
struct StatsWire {
    schema_version: u32,
    num_clients: u32,
    mi: Vec<Vec<f64>>,
    cd: Vec<Vec<f64>>,
}

impl From<AggregatedStats> for StatsWire {
    fn from(s: AggregatedStats) -> Self {
        StatsWire {
            schema_version: SCHEMA_VERSION,
            num_clients: s.num_clients,
            mi: s.mi_global.to_rows(),
            cd: s.cd_global.to_rows(),
        }
    }
}

/// Relevance (`o1`, row max of MI') and redundancy distance (`o2`, row max
/// of CD') of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub feature_index: usize,
    pub o1: f64,
    pub o2: f64,
}

/// Element-wise unweighted mean of the client matrices.
pub fn aggregate(reports: &[ClientReport]) -> Result<AggregatedStats> {
    aggregate_with(reports, AggregationMode::Unweighted)
}

/// Aggregates with an explicit mode. Reports are summed in ascending
/// `client_id` order so the result does not depend on arrival order.
pub fn aggregate_with(reports: &[ClientReport], mode: AggregationMode) -> Result<AggregatedStats> {
    if reports.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "aggregation needs at least 2 clients, got {}",
            reports.len()
        )));
    }
    let mut sorted: Vec<&ClientReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.client_id);
    if let Some(w) = sorted.windows(2).find(|w| w[0].client_id == w[1].client_id) {
        return Err(Error::DuplicateClient(w[0].client_id));
    }
    let (d, l) = (sorted[0].num_features(), sorted[0].num_labels());
    if let Some(bad) = sorted.iter().find(|r| r.num_features() != d || r.num_labels() != l) {
        return Err(Error::DimensionMismatch(format!(
            "client {} reports {}x{} features/labels, expected {d}x{l}",
            bad.client_id,
            bad.num_features(),
            bad.num_labels()
        )));
    }

    let weights: Vec<f64> = match mode {
        AggregationMode::Unweighted => vec![1.0; sorted.len()],
        AggregationMode::Weighted => sorted.iter().map(|r| r.num_instances() as f64).collect(),
    };
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidReport("total aggregation weight is zero".into()));
    }

    let mut mi = Matrix::zeros(d, l);
    let mut cd = Matrix::zeros(d, d);
    for (r, &w) in sorted.iter().zip(&weights) {
        accumulate(&mut mi, &r.mi.values, w);
        accumulate(&mut cd, &r.cd.values, w);
    }
    scale(&mut mi, total);
    scale(&mut cd, total);
    pin_unanimous(&mut mi, sorted.iter().map(|r| &r.mi.values));
    pin_unanimous(&mut cd, sorted.iter().map(|r| &r.cd.values));
    Ok(AggregatedStats {
        mi_global: mi,
        cd_global: cd,
        num_clients: sorted.len() as u32,
    })
}

fn accumulate(acc: &mut Matrix<f64>, m: &Matrix<f64>, weight: f64) {
    for r in 0..acc.rows() {
        for c in 0..acc.cols() {
            let v = if weight == 1.0 { m.get(r, c) } else { weight * m.get(r, c) };
            acc.set(r, c, acc.get(r, c) + v);
        }
    }
}

fn scale(acc: &mut Matrix<f64>, total: f64) {
    for r in 0..acc.rows() {
        for c in 0..acc.cols() {
            acc.set(r, c, acc.get(r, c) / total);
        }
    }
}

/// Entries on which every client agrees take that exact value, so the mean
/// of equal inputs carries no rounding residue.
fn pin_unanimous<'a>(acc: &mut Matrix<f64>, mut parts: impl Iterator<Item = &'a Matrix<f64>>) {
    let first = parts.next().expect("at least two reports");
    let mut unanimous = vec![true; acc.as_slice().len()];
    for m in parts {
        for (flag, (a, b)) in unanimous.iter_mut().zip(first.as_slice().iter().zip(m.as_slice())) {
            *flag &= a == b;
        }
    }
    let cols = acc.cols();
    for (k, _) in unanimous.iter().enumerate().filter(|(_, &u)| u) {
        acc.set(k / cols, k % cols, first.as_slice()[k]);
    }
}

fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// One objective pair per feature: row maxima of MI' and CD'.
pub fn objectives(stats: &AggregatedStats) -> Vec<ObjectivePair> {
    (0..stats.mi_global.rows())
        .map(|i| ObjectivePair {
            feature_index: i,
            o1: row_max(stats.mi_global.row(i)),
            o2: row_max(stats.cd_global.row(i)),
        })
        .collect()
}

/// Aggregation, objectives and Pareto ranking in one step.
pub fn global_ranking(reports: &[ClientReport], mode: AggregationMode) -> Result<FeatureRanking> {
    let stats = aggregate_with(reports, mode)?;
    pareto::rank_features(&objectives(&stats))
}

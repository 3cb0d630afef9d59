//! Local phase: each client turns its discretized shard into a relevance
//! matrix (feature/label mutual information) and a redundancy matrix
//! (feature/feature correlation distance).

use serde::{Deserialize, Serialize};

use crate::dataset::{DiscretizedDataset, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::infotheory::{self, JointHistogram};
use crate::matrix::Matrix;
use crate::pareto::FeatureRanking;
use crate::SCHEMA_VERSION;

const SYMMETRY_TOL: f64 = 1e-9;

/// D x L mutual information between features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrix {
    pub values: Matrix<f64>,
    pub client_id: u32,
    pub num_instances: u64,
}

/// D x D correlation distance between features.
#[derive(Debug, Clone, PartialEq)]
pub struct CdMatrix {
    pub values: Matrix<f64>,
    pub client_id: u32,
    pub num_instances: u64,
}

/// What a client sends to the server after the local phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ReportWire", try_from = "ReportWire")]
pub struct ClientReport {
    pub mi: MiMatrix,
    pub cd: CdMatrix,
    pub client_id: u32,
    pub schema_version: u32,
}

#[derive(Serialize, Deserialize)]
struct ReportWire {
    schema_version: u32,
    client_id: u32,
    n: u64,
    mi: Vec<Vec<f64>>,
    cd: Vec<Vec<f64>>,
}

impl From<ClientReport> for ReportWire {
    fn from(r: ClientReport) -> Self {
        ReportWire {
            schema_version: r.schema_version,
            client_id: r.client_id,
            n: r.mi.num_instances,
            mi: r.mi.values.to_rows(),
            cd: r.cd.values.to_rows(),
        }
    }
}

impl TryFrom<ReportWire> for ClientReport {
    type Error = Error;

    fn try_from(w: ReportWire) -> Result<Self> {
        if w.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidReport(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                w.schema_version
            )));
        }
        ClientReport::new(
            w.client_id,
            w.n,
            Matrix::from_rows(&w.mi)?,
            Matrix::from_rows(&w.cd)?,
        )
    }
}

impl ClientReport {
    /// Validates shapes and value invariants of both matrices.
    pub fn new(client_id: u32, n: u64, mi: Matrix<f64>, cd: Matrix<f64>) -> Result<Self> {
        let d = mi.rows();
        if d == 0 || mi.cols() == 0 {
            return Err(Error::InvalidReport("empty MI matrix".into()));
        }
        if cd.rows() != d || cd.cols() != d {
            return Err(Error::InvalidReport(format!(
                "CD matrix is {}x{}, expected {d}x{d}",
                cd.rows(),
                cd.cols()
            )));
        }
        if mi.as_slice().iter().chain(cd.as_slice()).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidReport("negative or non-finite entry".into()));
        }
        for a in 0..d {
            if cd.get(a, a).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidReport(format!("CD diagonal {a} is not zero")));
            }
            for b in a + 1..d {
                if (cd.get(a, b) - cd.get(b, a)).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidReport(format!("CD not symmetric at ({a},{b})")));
                }
            }
        }
        Ok(ClientReport {
            mi: MiMatrix {
                values: mi,
                client_id,
                num_instances: n,
            },
            cd: CdMatrix {
                values: cd,
                client_id,
                num_instances: n,
            },
            client_id,
            schema_version: SCHEMA_VERSION,
        })
    }

    pub fn num_features(&self) -> usize {
        self.mi.values.rows()
    }

    pub fn num_labels(&self) -> usize {
        self.mi.values.cols()
    }

    pub fn num_instances(&self) -> u64 {
        self.mi.num_instances
    }
}

/// Computes the MI and CD matrices of one shard.
///
/// Marginal entropies are computed once per column; each feature/label pair
/// and each unordered feature pair then costs one joint histogram, for
/// `O(N D L + N D^2)` in total. CD is filled for `a < b` and mirrored.
pub fn compute_local_report(shard: &DiscretizedDataset, client_id: u32) -> Result<ClientReport> {
    let n = shard.num_instances();
    if n == 0 {
        return Err(Error::InvalidDataset("empty shard".into()));
    }
    let d = shard.num_features();
    let l = shard.num_labels();
    let h_feat: Vec<f64> = shard.features().iter().map(infotheory::entropy).collect();
    let h_label: Vec<f64> = shard.labels().iter().map(infotheory::entropy).collect();
    let mut hist = JointHistogram::new();

    let mut mi = Matrix::zeros(d, l);
    for a in 0..d {
        let fa = shard.feature(a);
        for b in 0..l {
            let yb = shard.label(b);
            let h_ab = hist.joint_entropy(fa.codes(), fa.cardinality(), yb.codes(), yb.cardinality());
            mi.set(a, b, infotheory::mutual_information_from(h_feat[a], h_label[b], h_ab));
        }
    }

    let mut cd = Matrix::zeros(d, d);
    for a in 0..d {
        let fa = shard.feature(a);
        for b in a + 1..d {
            let fb = shard.feature(b);
            let h_ab = hist.joint_entropy(fa.codes(), fa.cardinality(), fb.codes(), fb.cardinality());
            let v = infotheory::correlation_distance_from(h_feat[a], h_feat[b], h_ab);
            cd.set(a, b, v);
            cd.set(b, a, v);
        }
    }

    ClientReport::new(client_id, n as u64, mi, cd)
}

/// Keeps the `top_k` best-ranked feature columns (raw values, ranking order).
pub fn apply_ranking(
    shard: &MultiLabelDataset,
    ranking: &FeatureRanking,
    top_k: usize,
) -> Result<MultiLabelDataset> {
    if ranking.num_features() != shard.num_features() {
        return Err(Error::DimensionMismatch(format!(
            "ranking covers {} features, shard has {}",
            ranking.num_features(),
            shard.num_features()
        )));
    }
    shard.select_features(&ranking.top(top_k)?)
}

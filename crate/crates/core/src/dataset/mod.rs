//! Multi-label datasets: loading, discretization and client partitioning.

mod arff;
mod csv_io;
mod discretize;
mod partition;

use std::path::{Path, PathBuf};

pub use arff::load_arff;
pub use csv_io::{load_csv, write_csv};
pub use discretize::{discretize, DiscretizedDataset, DEFAULT_BINS};
pub use partition::{partition_noniid, split_train_test, PartitionPlan};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How the label attributes of an ARFF file are identified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSpec {
    /// The last `n` attributes are labels.
    Count(usize),
    /// Label names are listed in a Mulan XML manifest.
    Manifest(PathBuf),
}

/// N instances with D real-valued features and L binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    features: Matrix<f64>,
    labels: Matrix<u8>,
    feature_names: Vec<String>,
    label_names: Vec<String>,
}

impl MultiLabelDataset {
    pub fn new(
        features: Matrix<f64>,
        labels: Matrix<u8>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::InvalidDataset("dataset has no instances".into()));
        }
        if features.cols() == 0 {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if labels.cols() == 0 {
            return Err(Error::InvalidDataset("dataset has no labels".into()));
        }
        if features.rows() != labels.rows() {
            return Err(Error::InvalidDataset(format!(
                "feature matrix has {} rows but label matrix has {}",
                features.rows(),
                labels.rows()
            )));
        }
        if feature_names.len() != features.cols() || label_names.len() != labels.cols() {
            return Err(Error::InvalidDataset(
                "name lists do not match matrix widths".into(),
            ));
        }
        if let Some(v) = labels.as_slice().iter().find(|&&v| v > 1) {
            return Err(Error::InvalidDataset(format!("label value {v} is not binary")));
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(MultiLabelDataset {
            features,
            labels,
            feature_names,
            label_names,
        })
    }

    /// Convenience constructor that generates `f0..`, `l0..` names.
    pub fn from_matrices(features: Matrix<f64>, labels: Matrix<u8>) -> Result<Self> {
        let feature_names = (0..features.cols()).map(|j| format!("f{j}")).collect();
        let label_names = (0..labels.cols()).map(|j| format!("l{j}")).collect();
        Self::new(features, labels, feature_names, label_names)
    }

    pub fn num_instances(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.cols()
    }

    pub fn features(&self) -> &Matrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Matrix<u8> {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Rows `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidDataset("row selection is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.num_instances()) {
            return Err(Error::InvalidArgument(format!("row index {bad} out of range")));
        }
        Ok(MultiLabelDataset {
            features: self.features.select_rows(indices),
            labels: self.labels.select_rows(indices),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        })
    }

    /// Feature columns `indices`, in the given order; labels are kept.
    pub fn select_features(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("feature selection is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.num_features()) {
            return Err(Error::InvalidArgument(format!("feature index {bad} out of range")));
        }
        Ok(MultiLabelDataset {
            features: self.features.select_cols(indices),
            labels: self.labels.clone(),
            feature_names: indices.iter().map(|&j| self.feature_names[j].clone()).collect(),
            label_names: self.label_names.clone(),
        })
    }

    /// Concatenates datasets that share the same columns.
    pub fn concat(parts: &[MultiLabelDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        if parts
            .iter()
            .any(|p| p.feature_names != first.feature_names || p.label_names != first.label_names)
        {
            return Err(Error::DimensionMismatch(
                "datasets to concatenate have different columns".into(),
            ));
        }
        MultiLabelDataset::new(
            Matrix::vstack(parts.iter().map(|p| &p.features))?,
            Matrix::vstack(parts.iter().map(|p| &p.labels))?,
            first.feature_names.clone(),
            first.label_names.clone(),
        )
    }

    /// Lowest-index positive label of each row; rows without any positive
    /// label get the sentinel class `L`.
    pub fn primary_labels(&self) -> Vec<usize> {
        (0..self.num_instances())
            .map(|i| {
                self.labels
                    .row(i)
                    .iter()
                    .position(|&v| v == 1)
                    .unwrap_or(self.num_labels())
            })
            .collect()
    }
}

/// Loads a dataset choosing the parser by file extension (`.arff` or `.csv`).
pub fn load(path: &Path, labels: &LabelSpec) -> Result<MultiLabelDataset> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match (ext.as_deref(), labels) {
        (Some("csv"), LabelSpec::Count(n)) => load_csv(path, *n),
        (Some("csv"), LabelSpec::Manifest(_)) => Err(Error::InvalidArgument(
            "CSV datasets take a label count, not a manifest".into(),
        )),
        _ => load_arff(path, labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MultiLabelDataset {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![0, 1], vec![0, 0], vec![1, 1]]).unwrap();
        MultiLabelDataset::from_matrices(x, y).unwrap()
    }

    #[test]
    fn primary_label_uses_sentinel_for_empty_rows() {
        assert_eq!(toy().primary_labels(), vec![1, 2, 0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![2u8]]).unwrap();
        assert!(MultiLabelDataset::from_matrices(x.clone(), y).is_err());
        let y2 = Matrix::from_rows(&[vec![1u8], vec![0]]).unwrap();
        assert!(MultiLabelDataset::from_matrices(x, y2).is_err());
        let empty = Matrix::<f64>::from_vec(0, 1, vec![]).unwrap();
        let ey = Matrix::<u8>::from_vec(0, 1, vec![]).unwrap();
        assert!(MultiLabelDataset::from_matrices(empty, ey).is_err());
    }

    #[test]
    fn select_and_concat() {
        let ds = toy();
        let a = ds.select_rows(&[0]).unwrap();
        let b = ds.select_rows(&[2, 1]).unwrap();
        let joined = MultiLabelDataset::concat(&[a, b]).unwrap();
        assert_eq!(joined.features().column(0), vec![1.0, 5.0, 3.0]);
        let f = ds.select_features(&[1]).unwrap();
        assert_eq!(f.feature_names(), &["f1".to_string()]);
        assert_eq!(f.num_labels(), 2);
        assert!(ds.select_features(&[2]).is_err());
    }
}

//! Plug-in (maximum-likelihood) estimators over discrete columns, in bits.
//!
//! Probabilities are empirical frequencies of the distinct observed values;
//! `0 log 0` is taken as 0 and no smoothing or bias correction is applied.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Joint histograms larger than this many cells fall back to a sparse map.
const DENSE_JOINT_LIMIT: u64 = 1 << 22;

/// A column of discrete codes, each in `[0, cardinality)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteColumn {
    codes: Vec<u32>,
    cardinality: u32,
}

impl DiscreteColumn {
    pub fn new(codes: Vec<u32>, cardinality: u32) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::InvalidArgument("discrete column is empty".into()));
        }
        if let Some(&bad) = codes.iter().find(|&&c| c >= cardinality) {
            return Err(Error::InvalidArgument(format!(
                "code {bad} outside cardinality {cardinality}"
            )));
        }
        Ok(DiscreteColumn { codes, cardinality })
    }

    /// Uses `max(code) + 1` as the cardinality.
    pub fn from_codes(codes: Vec<u32>) -> Result<Self> {
        let card = codes.iter().max().map_or(0, |&m| m + 1);
        Self::new(codes, card)
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn cardinality(&self) -> u32 {
        self.cardinality
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// `-sum p log2 p` over the non-zero counts, in the order given.
fn entropy_of_counts(counts: impl Iterator<Item = u32>, n: usize) -> f64 {
    let n = n as f64;
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = f64::from(c) / n;
            -p * p.log2()
        })
        .sum()
}

fn check_lengths(a: &DiscreteColumn, b: &DiscreteColumn) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Shannon entropy `H(X)`.
pub fn entropy(col: &DiscreteColumn) -> f64 {
    let mut counts = vec![0u32; col.cardinality as usize];
    for &c in &col.codes {
        counts[c as usize] += 1;
    }
    entropy_of_counts(counts.into_iter(), col.len())
}

/// Reusable scratch space for joint histograms.
#[derive(Debug, Default)]
pub struct JointHistogram {
    cells: Vec<u32>,
}

impl JointHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// `H(A, B)` for equal-length code slices.
    pub fn joint_entropy(&mut self, a: &[u32], card_a: u32, b: &[u32], card_b: u32) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let cells = u64::from(card_a) * u64::from(card_b);
        if cells <= DENSE_JOINT_LIMIT {
            let cells = cells as usize;
            self.cells.clear();
            self.cells.resize(cells, 0);
            let stride = card_b as usize;
            for (&x, &y) in a.iter().zip(b) {
                self.cells[x as usize * stride + y as usize] += 1;
            }
            entropy_of_counts(self.cells.iter().copied(), a.len())
        } else {
            let mut map: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            for (&x, &y) in a.iter().zip(b) {
                *map.entry((x, y)).or_insert(0) += 1;
            }
            entropy_of_counts(map.into_values(), a.len())
        }
    }
}

/// Joint entropy `H(A, B)`.
pub fn joint_entropy(a: &DiscreteColumn, b: &DiscreteColumn) -> Result<f64> {
    check_lengths(a, b)?;
    Ok(JointHistogram::new().joint_entropy(&a.codes, a.cardinality, &b.codes, b.cardinality))
}

/// Conditional entropy `H(A | B) = H(A, B) - H(B)`.
pub fn conditional_entropy(a: &DiscreteColumn, b: &DiscreteColumn) -> Result<f64> {
    let joint = joint_entropy(a, b)?;
    Ok((joint - entropy(b)).max(0.0))
}

/// `I(A; B) = H(A) + H(B) - H(A, B)` given precomputed terms; rounding
/// residue below zero is clamped.
#[inline]
pub fn mutual_information_from(h_a: f64, h_b: f64, h_ab: f64) -> f64 {
    (h_a + h_b - h_ab).max(0.0)
}

/// `CD(A, B) = H(A, B) - I(A; B)` given precomputed terms.
#[inline]
pub fn correlation_distance_from(h_a: f64, h_b: f64, h_ab: f64) -> f64 {
    (h_ab - mutual_information_from(h_a, h_b, h_ab)).max(0.0)
}

/// Mutual information `I(A; B)`.
pub fn mutual_information(a: &DiscreteColumn, b: &DiscreteColumn) -> Result<f64> {
    let h_ab = joint_entropy(a, b)?;
    Ok(mutual_information_from(entropy(a), entropy(b), h_ab))
}

/// Correlation distance `CD(A, B) = H(A, B) - I(A; B)`; zero for identical
/// columns and symmetric in its arguments.
pub fn correlation_distance(a: &DiscreteColumn, b: &DiscreteColumn) -> Result<f64> {
    let h_ab = joint_entropy(a, b)?;
    Ok(correlation_distance_from(entropy(a), entropy(b), h_ab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn col(codes: &[u32]) -> DiscreteColumn {
        DiscreteColumn::from_codes(codes.to_vec()).unwrap()
    }

    // Definitional oracles: hash-map contingency tables, independent of the
    // dense histogram path above.
    fn oracle_probs<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> HashMap<K, f64> {
        let mut counts: HashMap<K, f64> = HashMap::new();
        let mut n = 0.0;
        for k in keys {
            *counts.entry(k).or_insert(0.0) += 1.0;
            n += 1.0;
        }
        counts.values_mut().for_each(|c| *c /= n);
        counts
    }

    fn oracle_mi(a: &[u32], b: &[u32]) -> f64 {
        let pa = oracle_probs(a.iter().copied());
        let pb = oracle_probs(b.iter().copied());
        let pab = oracle_probs(a.iter().copied().zip(b.iter().copied()));
        pab.iter().map(|(&(x, y), &p)| p * (p / (pa[&x] * pb[&y])).log2()).sum()
    }

    #[test]
    fn fair_coin_and_constant() {
        assert_eq!(entropy(&col(&[0, 1, 0, 1])), 1.0);
        assert_eq!(entropy(&col(&[3, 3, 3])), 0.0);
    }

    #[test]
    fn skewed_bit() {
        let expected = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((entropy(&col(&[0, 0, 0, 1])) - expected).abs() < 1e-12);
        assert!((expected - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn independent_fair_bits() {
        let a = col(&[0, 0, 1, 1]);
        let b = col(&[0, 1, 0, 1]);
        assert_eq!(joint_entropy(&a, &b).unwrap(), 2.0);
        assert!(mutual_information(&a, &b).unwrap().abs() < 1e-12);
        assert_eq!(correlation_distance(&a, &b).unwrap(), 2.0);
        assert!((conditional_entropy(&a, &b).unwrap() - entropy(&a)).abs() < 1e-12);
    }

    #[test]
    fn identical_columns() {
        let a = col(&[0, 2, 1, 1, 3, 0, 2]);
        assert!((joint_entropy(&a, &a).unwrap() - entropy(&a)).abs() < 1e-12);
        assert!((mutual_information(&a, &a).unwrap() - entropy(&a)).abs() < 1e-12);
        assert!(correlation_distance(&a, &a).unwrap().abs() < 1e-12);
        assert!(conditional_entropy(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let a = col(&[0, 1]);
        let b = col(&[0, 1, 1]);
        assert!(matches!(joint_entropy(&a, &b), Err(Error::LengthMismatch { .. })));
        assert!(mutual_information(&a, &b).is_err());
        assert!(correlation_distance(&a, &b).is_err());
        assert!(conditional_entropy(&a, &b).is_err());
    }

    #[test]
    fn invalid_columns() {
        assert!(DiscreteColumn::new(vec![], 2).is_err());
        assert!(DiscreteColumn::new(vec![0, 2], 2).is_err());
    }

    #[test]
    fn sparse_fallback_matches_dense() {
        let a: Vec<u32> = (0..200).map(|i| (i * 7919) % 5000).collect();
        let b: Vec<u32> = (0..200).map(|i| (i * 104_729) % 3000).collect();
        let sparse = JointHistogram::new().joint_entropy(&a, 5000, &b, 3000);
        let oracle: f64 = oracle_probs(a.iter().zip(&b))
            .values()
            .map(|p| -p * p.log2())
            .sum();
        assert!((sparse - oracle).abs() < 1e-10);
        let compact_a: Vec<u32> = a.iter().map(|v| v % 97).collect();
        let big = DiscreteColumn::new(compact_a.clone(), 1 << 16).unwrap();
        let small = DiscreteColumn::new(compact_a, 97).unwrap();
        assert!((entropy(&big) - entropy(&small)).abs() < 1e-12);
    }

    fn pair_strategy() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        (1usize..500, 1u32..=10, 1u32..=10).prop_flat_map(|(n, ca, cb)| {
            (
                proptest::collection::vec(0..ca, n),
                proptest::collection::vec(0..cb, n),
            )
        })
    }

    proptest! {
        #[test]
        fn identities_on_random_pairs((a, b) in pair_strategy()) {
            let (ca, cb) = (col(&a), col(&b));
            let (ha, hb) = (entropy(&ca), entropy(&cb));
            let hab = joint_entropy(&ca, &cb).unwrap();
            let hba = joint_entropy(&cb, &ca).unwrap();
            let mi = mutual_information(&ca, &cb).unwrap();
            let cd = correlation_distance(&ca, &cb).unwrap();
            prop_assert!(ha >= 0.0 && hb >= 0.0 && hab >= 0.0 && mi >= 0.0 && cd >= 0.0);
            prop_assert!(conditional_entropy(&ca, &cb).unwrap() >= 0.0);
            prop_assert!((hab - hba).abs() < 1e-12);
            prop_assert!(hab + 1e-12 >= ha.max(hb) && hab <= ha + hb + 1e-12);
            prop_assert!((conditional_entropy(&ca, &cb).unwrap() - (hab - hb)).abs() < 1e-12);
            prop_assert!((mi - mutual_information(&cb, &ca).unwrap()).abs() < 1e-12);
            prop_assert!((cd - correlation_distance(&cb, &ca).unwrap()).abs() < 1e-12);
            prop_assert!(mi <= ha.min(hb) + 1e-12);
            prop_assert!((mi - oracle_mi(&a, &b).max(0.0)).abs() < 1e-10);
            let h_ab = conditional_entropy(&ca, &cb).unwrap();
            let h_ba = conditional_entropy(&cb, &ca).unwrap();
            prop_assert!((cd - (h_ab + h_ba)).abs() < 1e-10);
        }

        #[test]
        fn duplicating_rows_changes_nothing((a, b) in pair_strategy()) {
            let (ca, cb) = (col(&a), col(&b));
            let a2: Vec<u32> = a.iter().chain(&a).copied().collect();
            let b2: Vec<u32> = b.iter().chain(&b).copied().collect();
            let (ca2, cb2) = (col(&a2), col(&b2));
            prop_assert!((entropy(&ca) - entropy(&ca2)).abs() < 1e-12);
            prop_assert!((joint_entropy(&ca, &cb).unwrap() - joint_entropy(&ca2, &cb2).unwrap()).abs() < 1e-12);
            prop_assert!((conditional_entropy(&ca, &cb).unwrap() - conditional_entropy(&ca2, &cb2).unwrap()).abs() < 1e-12);
            prop_assert!((mutual_information(&ca, &cb).unwrap() - mutual_information(&ca2, &cb2).unwrap()).abs() < 1e-12);
            prop_assert!((correlation_distance(&ca, &cb).unwrap() - correlation_distance(&ca2, &cb2).unwrap()).abs() < 1e-12);
        }
    }
}

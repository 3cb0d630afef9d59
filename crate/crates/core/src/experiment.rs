//! Select, reduce, classify: split the data, run the federated ranking on
//! the training part, then train ML-kNN on the top-k columns and score it
//! on the held-out part.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::client::apply_ranking;
use crate::dataset::{partition_noniid, split_train_test, MultiLabelDataset, PartitionPlan};
use crate::error::{Error, Result};
use crate::federation::{run_round_logged, RunConfig, RunLog, ServerOutcome};
use crate::mlknn::{self, evaluate, MetricsReport};

/// Seed for the Non-IID partition, kept apart from the split seed.
pub fn partition_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopKResult {
    pub top_k: usize,
    pub features: Vec<usize>,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub train: MultiLabelDataset,
    pub test: MultiLabelDataset,
    /// Partition of the training rows.
    pub partition: PartitionPlan,
    pub round: ServerOutcome,
    pub results: Vec<TopKResult>,
}

/// Splits `ds`, partitions the training part over the clients and runs one
/// federated round. No classifier is trained.
pub fn select(
    config: &RunConfig,
    ds: &MultiLabelDataset,
    log: RunLog,
) -> Result<(MultiLabelDataset, MultiLabelDataset, PartitionPlan, ServerOutcome)> {
    config.validate_for(ds.num_features())?;
    let (train, test) = split_train_test(ds, config.test_fraction, config.seed)?;
    let plan = partition_noniid(&train, config.num_clients, config.alpha, partition_seed(config.seed))?;
    let shards = plan.shards(&train)?;
    let round = run_round_logged(config, &shards, log)?;
    Ok((train, test, plan, round))
}

/// The full pipeline over every `config.top_k` value.
pub fn run_experiment(config: &RunConfig, ds: &MultiLabelDataset, log: RunLog) -> Result<ExperimentOutcome> {
    let (train, test, partition, round) = select(config, ds, log)?;
    let shards = partition.shards(&train)?;
    let mut results = Vec::with_capacity(config.top_k.len());
    for &k in &config.top_k {
        let reduced: Vec<MultiLabelDataset> = shards
            .iter()
            .map(|s| apply_ranking(s, &round.ranking, k))
            .collect::<Result<_>>()?;
        let pooled = MultiLabelDataset::concat(&reduced)?;
        let features = round.ranking.top(k)?;
        let metrics = classify(&pooled, &test.select_features(&features)?, config)?;
        log::info!("top {k}: accuracy {:.4}", metrics.accuracy);
        results.push(TopKResult { top_k: k, features, metrics });
    }
    Ok(ExperimentOutcome { train, test, partition, round, results })
}

/// Trains ML-kNN on `train` and evaluates it on `test` (same columns).
pub fn classify(train: &MultiLabelDataset, test: &MultiLabelDataset, config: &RunConfig) -> Result<MetricsReport> {
    let model = mlknn::fit(train, config.knn_k, config.smoothing)?;
    let predictions = mlknn::predict(&model, test)?;
    evaluate(test.labels(), &predictions)
}

/// Metrics of ML-kNN trained on an arbitrary feature subset.
pub fn evaluate_subset(
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
    features: &[usize],
    config: &RunConfig,
) -> Result<MetricsReport> {
    classify(&train.select_features(features)?, &test.select_features(features)?, config)
}

/// `k` distinct feature indices drawn uniformly from `0..num_features`.
pub fn random_features(num_features: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > num_features {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {k} of {num_features} features"
        )));
    }
    let mut all: Vec<usize> = (0..num_features).collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    all.truncate(k);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};

    fn small() -> MultiLabelDataset {
        generate(&SyntheticSpec {
            instances: 300,
            features: 20,
            labels: 4,
            informative: 8,
            noise: 0.8,
            density: 0.3,
            seed: 5,
        })
        .unwrap()
    }

    fn config() -> RunConfig {
        RunConfig {
            num_clients: 3,
            top_k: vec![4, 8, 20],
            timeout_secs: 20.0,
            ..RunConfig::default()
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let ds = small();
        let a = run_experiment(&config(), &ds, RunLog::disabled()).unwrap();
        let b = run_experiment(&config(), &ds, RunLog::disabled()).unwrap();
        assert_eq!(a.results, b.results);
        assert_eq!(a.round.ranking, b.round.ranking);
        assert_eq!(a.results.len(), 3);
        assert_eq!(a.train.num_instances() + a.test.num_instances(), 300);
        assert_eq!(a.partition.assignments().len(), a.train.num_instances());
    }

    #[test]
    fn planted_features_rank_first() {
        let out = run_experiment(&config(), &small(), RunLog::disabled()).unwrap();
        let top = out.round.ranking.top(8).unwrap();
        let planted = top.iter().filter(|&&j| j < 8).count();
        assert!(planted >= 6, "{top:?}");
    }

    #[test]
    fn top_k_beyond_features_is_rejected() {
        let c = RunConfig { top_k: vec![21], ..config() };
        assert!(run_experiment(&c, &small(), RunLog::disabled()).is_err());
    }

    #[test]
    fn random_features_are_distinct() {
        let f = random_features(30, 10, 1).unwrap();
        let mut s = f.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 10);
        assert_eq!(f, random_features(30, 10, 1).unwrap());
        assert!(random_features(5, 6, 0).is_err());
    }
}

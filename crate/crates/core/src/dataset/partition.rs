use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::MultiLabelDataset;
use crate::error::{Error, Result};

/// Assignment of every instance to one of `num_clients` shards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlanWire")]
pub struct PartitionPlan {
    seed: u64,
    num_clients: u32,
    assignments: Vec<u32>,
}

#[derive(Deserialize)]
struct PlanWire {
    seed: u64,
    num_clients: u32,
    assignments: Vec<u32>,
}

impl TryFrom<PlanWire> for PartitionPlan {
    type Error = Error;

    fn try_from(w: PlanWire) -> Result<Self> {
        PartitionPlan::new(w.seed, w.num_clients, w.assignments)
    }
}

impl PartitionPlan {
    pub fn new(seed: u64, num_clients: u32, assignments: Vec<u32>) -> Result<Self> {
        if num_clients < 2 {
            return Err(Error::InvalidArgument(format!(
                "at least 2 clients are required, got {num_clients}"
            )));
        }
        let mut sizes = vec![0usize; num_clients as usize];
        for &c in &assignments {
            let slot = sizes
                .get_mut(c as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("client id {c} out of range")))?;
            *slot += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("client {empty} has no instances")));
        }
        Ok(PartitionPlan {
            seed,
            num_clients,
            assignments,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_clients(&self) -> u32 {
        self.num_clients
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    /// Row indices owned by `client`, ascending.
    pub fn client_rows(&self, client: u32) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == client)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clients as usize];
        for &c in &self.assignments {
            sizes[c as usize] += 1;
        }
        sizes
    }

    /// Materializes one shard per client.
    pub fn shards(&self, ds: &MultiLabelDataset) -> Result<Vec<MultiLabelDataset>> {
        if ds.num_instances() != self.assignments.len() {
            return Err(Error::DimensionMismatch(format!(
                "plan covers {} rows, dataset has {}",
                self.assignments.len(),
                ds.num_instances()
            )));
        }
        (0..self.num_clients)
            .map(|c| ds.select_rows(&self.client_rows(c)))
            .collect()
    }
}

/// Label-skewed partition: each instance's primary label (lowest positive
/// label index, sentinel for none) is its class, and each class is spread
/// over the clients with proportions drawn from `Dirichlet(alpha, ..., alpha)`.
pub fn partition_noniid(
    ds: &MultiLabelDataset,
    num_clients: u32,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    let n = ds.num_instances();
    let m = num_clients as usize;
    if num_clients < 2 {
        return Err(Error::InvalidArgument(format!(
            "at least 2 clients are required, got {num_clients}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "{num_clients} clients cannot share {n} instances"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("alpha: {e}")))?;
    let primary = ds.primary_labels();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_labels() + 1];
    for (i, &c) in primary.iter().enumerate() {
        by_class[c].push(i);
    }

    let mut assignments = vec![0u32; n];
    for mut rows in by_class.into_iter().filter(|r| !r.is_empty()) {
        rows.shuffle(&mut rng);
        let weights: Vec<f64> = (0..m).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = weights.iter().sum();
        let props: Vec<f64> = if total > 0.0 {
            weights.iter().map(|w| w / total).collect()
        } else {
            vec![1.0 / m as f64; m]
        };
        let len = rows.len();
        let mut start = 0usize;
        let mut cumulative = 0.0;
        for (client, p) in props.iter().enumerate() {
            cumulative += p;
            let end = if client + 1 == m {
                len
            } else {
                ((cumulative * len as f64).round() as usize).clamp(start, len)
            };
            for &row in &rows[start..end] {
                assignments[row] = client as u32;
            }
            start = end;
        }
    }

    fill_empty_clients(&mut assignments, m);
    PartitionPlan::new(seed, num_clients, assignments)
}

/// Moves the highest-index row of the largest client into each empty one.
fn fill_empty_clients(assignments: &mut [u32], m: usize) {
    loop {
        let mut sizes = vec![0usize; m];
        for &c in assignments.iter() {
            sizes[c as usize] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..m).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
        let row = assignments
            .iter()
            .rposition(|&c| c as usize == largest)
            .expect("largest client owns a row");
        assignments[row] = empty as u32;
    }
}

/// Shuffled train/test split; `round(n * test_fraction)` rows (clamped to
/// `[1, n - 1]`) go to the test part. Both parts keep the original row order.
pub fn split_train_test(
    ds: &MultiLabelDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiLabelDataset, MultiLabelDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = ds.num_instances();
    if n < 2 {
        return Err(Error::InvalidDataset("need at least 2 instances to split".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.select_rows(&train)?, ds.select_rows(&test)?))
}

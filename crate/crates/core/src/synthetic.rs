//! Seeded multi-label data with planted structure, for tests and demos when
//! no benchmark file is at hand.
//!
//! The first `informative` features each carry a noisy signal of one label
//! (labels assigned round-robin); the rest are pure noise. Labels are
//! correlated through a shared latent factor.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub instances: usize,
    pub features: usize,
    pub labels: usize,
    pub informative: usize,
    /// Standard deviation of the noise added to informative features.
    pub noise: f64,
    /// Approximate fraction of positive entries per label.
    pub density: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Same shape as the Yeast benchmark (2417 x 103, 14 labels).
    pub fn yeast_like(seed: u64) -> Self {
        SyntheticSpec {
            instances: 2417,
            features: 103,
            labels: 14,
            informative: 42,
            noise: 1.0,
            density: 0.3,
            seed,
        }
    }

    /// Same feature and label counts as Scene (294 features, 6 labels).
    pub fn scene_like(instances: usize, seed: u64) -> Self {
        SyntheticSpec {
            instances,
            features: 294,
            labels: 6,
            informative: 60,
            noise: 1.0,
            density: 0.2,
            seed,
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<MultiLabelDataset> {
    let SyntheticSpec { instances: n, features: d, labels: l, informative, .. } = *spec;
    if n == 0 || d == 0 || l == 0 {
        return Err(Error::InvalidArgument("synthetic shape must be non-empty".into()));
    }
    if informative > d {
        return Err(Error::InvalidArgument(format!(
            "{informative} informative features but only {d} features"
        )));
    }
    if !(spec.density > 0.0 && spec.density < 1.0) || !(spec.noise >= 0.0) {
        return Err(Error::InvalidArgument("density must lie in (0, 1) and noise be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    // P(0.6 a + 0.8 b > t) = density for independent standard normals a, b
    let threshold = inverse_normal_cdf(1.0 - spec.density);
    let offsets: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.3..0.3)).collect();

    let mut labels = Vec::with_capacity(n * l);
    let mut feats = Vec::with_capacity(n * d);
    for _ in 0..n {
        let shared: f64 = std.sample(&mut rng);
        let row: Vec<u8> = (0..l)
            .map(|j| {
                let own: f64 = std.sample(&mut rng);
                u8::from(0.6 * shared + 0.8 * own > threshold + offsets[j])
            })
            .collect();
        for j in 0..d {
            let noise: f64 = std.sample(&mut rng);
            let v = if j < informative {
                let y = f64::from(row[j % l]);
                2.0 * y + spec.noise * noise
            } else {
                noise
            };
            feats.push(v);
        }
        labels.extend(row);
    }
    MultiLabelDataset::from_matrices(Matrix::from_vec(n, d, feats)?, Matrix::from_vec(n, l, labels)?)
}

/// Acklam's rational approximation; plenty for picking a threshold.
fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [-39.696830286653757, 220.94609842452050, -275.92851044696869, 138.35775186726900, -30.664798066147160, 2.5066282774592392];
    const B: [f64; 5] = [-54.476098798224058, 161.58583685804089, -155.69897985988661, 66.801311887719720, -13.280681552885721];
    const C: [f64; 6] = [-7.7848940024302926e-3, -0.32239645804113648, -2.4007582771618381, -2.5497325393437338, 4.3746641414649678, 2.9381639826987831];
    const D: [f64; 4] = [7.7846957090414622e-3, 0.32246712907003983, 2.4451341373124, 3.7544086619074162];
    let low = 0.02425;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

//! Monte Carlo harness: sinusoidal perturbation maps, Beta predictor laws,
//! scenario generators, replication runs and prediction-error metrics.

mod beta;
mod mortality;
mod scenario;

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};
use crate::quantile::{Domain, QuantileGrid};

pub use beta::{sample_beta, BetaLaw};
pub use mortality::{mortality_like, MortalitySpec};
pub use scenario::{
    generate_dataset, generate_replication, run_replications, run_replications_with, GeneratedData,
    MetricSummary, RepResult, ReplicationOptions, ReplicationSummary, ScenarioSpec,
};

/// `g_k(x) = x − sin(π k x) / (|k| π)` on `[0, 1]`, with `g_0` the identity.
pub fn g_map(k: i32, x: f64) -> Result<f64> {
    let x = Domain::unit().clamp_checked(x)?;
    Ok(g_unit(k, x))
}

#[inline]
fn g_unit(k: i32, x: f64) -> f64 {
    if k == 0 {
        return x;
    }
    let pk = std::f64::consts::PI * k as f64;
    let v = x - (pk * x).sin() / pk.abs();
    v.clamp(0.0, 1.0)
}

/// `g_k` transported to `domain` by the affine map onto `[0, 1]`.
pub fn g_map_on(k: i32, domain: Domain, x: f64) -> Result<f64> {
    let x = domain.clamp_checked(x)?;
    Ok(domain.from_unit(g_unit(k, domain.to_unit(x))))
}

/// Law of the random perturbation index `K`: uniform over a symmetric set
/// of nonzero integers, optionally together with zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    k_support: Vec<i32>,
    include_zero: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            k_support: vec![-3, -2, -1, 1, 2, 3],
            include_zero: false,
        }
    }
}

impl NoiseSpec {
    pub fn new(k_support: Vec<i32>, include_zero: bool) -> Result<Self> {
        let set: BTreeSet<i32> = k_support.iter().copied().collect();
        if set.contains(&0) {
            return Err(MtdrError::InvalidParameter(
                "support lists nonzero indices; use include_zero".into(),
            ));
        }
        if set.iter().any(|k| !set.contains(&-k)) {
            return Err(MtdrError::InvalidParameter(format!(
                "noise support {k_support:?} is not symmetric"
            )));
        }
        if set.is_empty() && !include_zero {
            return Err(MtdrError::InvalidParameter("empty noise support".into()));
        }
        Ok(NoiseSpec {
            k_support: set.into_iter().collect(),
            include_zero,
        })
    }

    /// `K = ±k` with equal probability.
    pub fn magnitude(k: i32) -> Result<Self> {
        Self::new(vec![-k, k], false)
    }

    /// `K ≡ 0`.
    pub fn off() -> Self {
        NoiseSpec {
            k_support: Vec::new(),
            include_zero: true,
        }
    }

    pub fn is_off(&self) -> bool {
        self.k_support.is_empty()
    }

    pub fn support(&self) -> Vec<i32> {
        let mut s = self.k_support.clone();
        if self.include_zero {
            s.push(0);
            s.sort_unstable();
        }
        s
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i32 {
        let n = self.k_support.len() + usize::from(self.include_zero);
        let i = rng.random_range(0..n);
        self.k_support.get(i).copied().unwrap_or(0)
    }
}

/// Deterministic seed for stream `index` under `master` (splitmix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn distances(predicted: &[QuantileGrid], actual: &[QuantileGrid]) -> Result<Vec<f64>> {
    if predicted.len() != actual.len() {
        return Err(MtdrError::DimensionMismatch(format!(
            "{} predictions for {} observations",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(MtdrError::Empty("prediction list"));
    }
    predicted
        .iter()
        .zip(actual)
        .map(|(a, b)| a.wasserstein(b))
        .collect()
}

/// Root mean squared Wasserstein prediction error.
pub fn rmse(predicted: &[QuantileGrid], actual: &[QuantileGrid]) -> Result<f64> {
    let d = distances(predicted, actual)?;
    Ok((d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt())
}

/// Average Wasserstein distance.
pub fn awd(predicted: &[QuantileGrid], actual: &[QuantileGrid]) -> Result<f64> {
    let d = distances(predicted, actual)?;
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

//! Bimodal synthetic regression data.
//!
//! Labels come from a gaussian mixture. Each informative feature is a
//! seeded sinusoid of the rescaled label plus gaussian noise; the remaining
//! features are standard normal noise.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub feature_dim: usize,
    pub mixture: Vec<MixtureComponent>,
    pub informative_dims: usize,
    pub noise_std: f64,
}

/// Frequency range of the informative sinusoids.
const FREQ_RANGE: (f64, f64) = (1.0, 3.0);

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 500,
            feature_dim: 16,
            mixture: vec![
                MixtureComponent {
                    mean: 25.0,
                    std: 5.0,
                    weight: 0.5,
                },
                MixtureComponent {
                    mean: 68.0,
                    std: 6.0,
                    weight: 0.5,
                },
            ],
            informative_dims: 8,
            noise_std: 0.1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        if self.feature_dim == 0 || self.informative_dims > self.feature_dim {
            return Err(Error::Config(format!(
                "need 1 <= feature_dim and informative_dims <= feature_dim, got {} and {}",
                self.feature_dim, self.informative_dims
            )));
        }
        if self.mixture.is_empty() {
            return Err(Error::Config("mixture needs at least one component".into()));
        }
        for c in &self.mixture {
            if !(c.std.is_finite() && c.std > 0.0 && c.mean.is_finite() && c.weight >= 0.0) {
                return Err(Error::Config(format!("invalid mixture component {c:?}")));
            }
        }
        let total: f64 = self.mixture.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise std must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }

    pub fn mixture_mean(&self) -> f64 {
        self.mixture.iter().map(|c| c.weight * c.mean).sum()
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (0..spec.informative_dims)
        .map(|_| {
            (
                rng.random_range(FREQ_RANGE.0..FREQ_RANGE.1),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let components: Vec<Normal<f64>> = spec
        .mixture
        .iter()
        .map(|c| Normal::new(c.mean, c.std).expect("validated"))
        .collect();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut labels = Vec::with_capacity(spec.n);
    let mut features = Array2::zeros((spec.n, spec.feature_dim));
    for (i, mut row) in features.rows_mut().into_iter().enumerate() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = spec.mixture.len() - 1;
        for (c, comp) in spec.mixture.iter().enumerate() {
            acc += comp.weight;
            if u < acc {
                pick = c;
                break;
            }
        }
        let y = components[pick].sample(&mut rng);
        let scaled = (y - 40.0) / 25.0;
        for (j, v) in row.iter_mut().enumerate() {
            let noise = std_normal.sample(&mut rng);
            *v = match coeffs.get(j) {
                Some(&(freq, phase)) => (freq * scaled + phase).sin() + spec.noise_std * noise,
                None => noise,
            };
        }
        labels.push(y);
        debug_assert_eq!(labels.len(), i + 1);
    }
    let ids = (0..spec.n).map(|i| format!("s{i:05}")).collect();
    Dataset::new(features, labels, ids)
}

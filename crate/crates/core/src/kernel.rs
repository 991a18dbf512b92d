//! Label-similarity kernels and the pairwise positiveness matrix.
//!
//! A positiveness weight `w[i][k] = K(y_i - y_k)` lies in `[0, 1]` and tells
//! how much samples `i` and `k` should be treated as a positive pair.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Gaussian,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::Gaussian => f.write_str("gaussian"),
        }
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelKind::Gaussian),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// In label units.
    pub bandwidth: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::Gaussian,
            bandwidth: 2.0,
        }
    }
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = KernelSpec {
            kind: KernelKind::Gaussian,
            bandwidth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::Config(format!(
                "kernel bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }
}

/// Evaluates the kernel at a label difference.
pub fn kernel_value(delta: f64, spec: &KernelSpec) -> Result<f64> {
    if !delta.is_finite() {
        return Err(Error::Input(format!("non-finite label difference {delta}")));
    }
    spec.validate()?;
    Ok(eval_unchecked(delta, spec))
}

#[inline]
fn eval_unchecked(delta: f64, spec: &KernelSpec) -> f64 {
    match spec.kind {
        // delta * delta is sign-blind, so K(d) and K(-d) are bit-identical.
        KernelKind::Gaussian => (-(delta * delta) / (2.0 * spec.bandwidth * spec.bandwidth)).exp(),
    }
}

/// Symmetric `n x n` matrix of kernel weights with a unit diagonal.
///
/// The diagonal is never read by the losses; anchors are excluded from their
/// own pair sums.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivenessMatrix {
    w: Array2<f64>,
}

impl PositivenessMatrix {
    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.w[[i, k]]
    }

    /// Wraps an explicit weight matrix, checking the invariants.
    pub fn from_weights(w: Array2<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::Shape(format!("weights must be square, got {:?}", w.dim())));
        }
        if n < 2 {
            return Err(Error::BatchTooSmall { min: 2, got: n });
        }
        for i in 0..n {
            for k in 0..n {
                let v = w[[i, k]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Input(format!("weight ({i},{k}) = {v} outside [0,1]")));
                }
                if v != w[[k, i]] {
                    return Err(Error::Input(format!("weights not symmetric at ({i},{k})")));
                }
            }
            if w[[i, i]] != 1.0 {
                return Err(Error::Input(format!("diagonal weight ({i},{i}) is not 1")));
            }
        }
        Ok(PositivenessMatrix { w })
    }
}

pub fn positiveness_matrix(labels: &[f64], spec: &KernelSpec) -> Result<PositivenessMatrix> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::BatchTooSmall { min: 2, got: n });
    }
    spec.validate()?;
    if let Some(bad) = labels.iter().find(|y| !y.is_finite()) {
        return Err(Error::Input(format!("non-finite label {bad}")));
    }
    let w = Array2::from_shape_fn((n, n), |(i, k)| eval_unchecked(labels[i] - labels[k], spec));
    Ok(PositivenessMatrix { w })
}

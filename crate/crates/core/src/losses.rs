//! Contrastive regression losses and their analytic gradients.
//!
//! Every variant is a sum over anchors `i` and partners `k != i` of
//!
//! ```text
//! a[i][k] * ( log sum_{t in T(i,k)} exp(c[i][t] * s[i][t]) - s[i][k] )
//! ```
//!
//! and they differ only in the pair weight `a`, the denominator set `T` and
//! the per-term repulsion coefficient `c`:
//!
//! | variant       | `a[i][k]`                                   | `T(i,k)`                              | `c[i][t]`    |
//! |---------------|---------------------------------------------|---------------------------------------|--------------|
//! | `dynlocrep`   | `w_ik / sum_{t!=i} w_it`                    | nearest neighbors of `i`              | `1 - w_it`   |
//! | `exponential` | `w_ik / sum_{t!=i} w_it`                    | `t not in {i, k}`                     | `1 - w_it`   |
//! | `yaware`      | `w_ik / sum_{t!=i} w_it`                    | `t not in {i, k}`                     | `1`          |
//! | `threshold`   | `w_ik / sum_{t!=i, w_it<w_ik} w_it`         | `t not in {i, k}`, `w_it < w_ik`      | `1`          |
//! | `rnc`         | `1`                                         | `t != i`, `|y_i-y_t| >= |y_i-y_k|`    | `1`          |
//!
//! Pairs with an empty denominator set, and anchors (or threshold pairs)
//! whose weight normalizer falls below [`WEIGHT_SUM_FLOOR`], contribute zero.
//! Neighbor sets and kernel weights are constants for differentiation.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{similarity_matrix, EmbeddingBatch, NeighborSets, SimilarityMatrix, NORM_EPS};
use crate::kernel::{positiveness_matrix, KernelSpec, PositivenessMatrix};

/// Weight normalizers below this make the anchor (or pair) contribute zero.
pub const WEIGHT_SUM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossVariant {
    #[serde(rename = "dynlocrep")]
    DynLocRep,
    #[serde(rename = "yaware")]
    YAware,
    #[serde(rename = "threshold")]
    Threshold,
    #[serde(rename = "exponential")]
    Exponential,
    #[serde(rename = "rnc")]
    RankNContrast,
}

impl LossVariant {
    pub const ALL: [LossVariant; 5] = [
        LossVariant::DynLocRep,
        LossVariant::YAware,
        LossVariant::Threshold,
        LossVariant::Exponential,
        LossVariant::RankNContrast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::DynLocRep => "dynlocrep",
            LossVariant::YAware => "yaware",
            LossVariant::Threshold => "threshold",
            LossVariant::Exponential => "exponential",
            LossVariant::RankNContrast => "rnc",
        }
    }

    pub fn uses_neighbors(self) -> bool {
        self == LossVariant::DynLocRep
    }
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Sum over anchors.
    #[default]
    Sum,
    /// Sum over anchors divided by the batch size.
    Mean,
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Reduction::Sum),
            "mean" => Ok(Reduction::Mean),
            other => Err(Error::Config(format!("unknown reduction `{other}`"))),
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reduction::Sum => "sum",
            Reduction::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kernel: KernelSpec,
    pub temperature: f64,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kernel: KernelSpec::default(),
            temperature: 0.1,
            reduction: Reduction::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    /// Derivative with respect to the raw (pre-normalization) embeddings.
    pub grad_raw: Array2<f64>,
}

/// Attraction weights `w_ik / sum_{t != i} w_it`, zero on the diagonal.
///
/// Rows whose normalizer is below [`WEIGHT_SUM_FLOOR`] are all zero.
pub fn pair_weights(w: &PositivenessMatrix) -> Array2<f64> {
    let n = w.n();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let total: f64 = (0..n).filter(|&t| t != i).map(|t| w.get(i, t)).sum();
        if total < WEIGHT_SUM_FLOOR {
            continue;
        }
        for k in (0..n).filter(|&k| k != i) {
            a[[i, k]] = w.get(i, k) / total;
        }
    }
    a
}

fn threshold_weight(w: &PositivenessMatrix, i: usize, k: usize) -> f64 {
    let wik = w.get(i, k);
    let total: f64 = (0..w.n())
        .filter(|&t| t != i && w.get(i, t) < wik)
        .map(|t| w.get(i, t))
        .sum();
    if total < WEIGHT_SUM_FLOOR {
        0.0
    } else {
        wik / total
    }
}

/// Sums `a(i,k) * (logsumexp_{t in T} c*s[i][t] - s[i][k])` over all pairs,
/// optionally accumulating `dL/ds` into `grad`.
fn accumulate<A, D>(s: &SimilarityMatrix, pair_weight: A, mut members: D, mut grad: Option<&mut Array2<f64>>) -> f64
where
    A: Fn(usize, usize) -> f64,
    D: FnMut(usize, usize, &mut Vec<(usize, f64)>),
{
    let n = s.n();
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(n);
    let mut exps: Vec<f64> = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let mut anchor = 0.0;
        for k in (0..n).filter(|&k| k != i) {
            let a = pair_weight(i, k);
            if a == 0.0 {
                continue;
            }
            terms.clear();
            members(i, k, &mut terms);
            if terms.is_empty() {
                continue;
            }
            let shift = terms
                .iter()
                .map(|&(t, c)| c * s.get(i, t))
                .fold(f64::NEG_INFINITY, f64::max);
            exps.clear();
            exps.extend(terms.iter().map(|&(t, c)| (c * s.get(i, t) - shift).exp()));
            let sum: f64 = exps.iter().sum();
            anchor += a * (shift + sum.ln() - s.get(i, k));

            if let Some(g) = grad.as_deref_mut() {
                g[[i, k]] -= a;
                for (&(t, c), &e) in terms.iter().zip(&exps) {
                    g[[i, t]] += a * c * e / sum;
                }
            }
        }
        total += anchor;
    }
    total
}

fn check_dims(s: &SimilarityMatrix, w: &PositivenessMatrix, labels: Option<&[f64]>) -> Result<usize> {
    let n = s.n();
    if n < 2 {
        return Err(Error::BatchTooSmall { min: 2, got: n });
    }
    if w.n() != n {
        return Err(Error::Shape(format!("{n} similarity rows but {} weight rows", w.n())));
    }
    if let Some(labels) = labels {
        if labels.len() != n {
            return Err(Error::Shape(format!("{n} similarity rows but {} labels", labels.len())));
        }
    }
    Ok(n)
}

fn dynlocrep_terms(
    s: &SimilarityMatrix,
    w: &PositivenessMatrix,
    nbrs: &NeighborSets,
    grad: Option<&mut Array2<f64>>,
) -> Result<f64> {
    let n = check_dims(s, w, None)?;
    if nbrs.n() != n {
        return Err(Error::Shape(format!("{n} anchors but {} neighbor sets", nbrs.n())));
    }
    if nbrs.count() == 0 {
        return Err(Error::Input("neighbor sets must be non-empty".into()));
    }
    let a = pair_weights(w);
    Ok(accumulate(
        s,
        |i, k| a[[i, k]],
        |i, _k, out| out.extend(nbrs.of(i).iter().map(|&t| (t, 1.0 - w.get(i, t)))),
        grad,
    ))
}

fn baseline_terms(
    variant: LossVariant,
    s: &SimilarityMatrix,
    w: &PositivenessMatrix,
    labels: &[f64],
    grad: Option<&mut Array2<f64>>,
) -> Result<f64> {
    let n = check_dims(s, w, Some(labels))?;
    let value = match variant {
        LossVariant::DynLocRep => {
            return Err(Error::Config(
                "dynlocrep needs neighbor sets; use dynlocrep_forward".into(),
            ))
        }
        LossVariant::YAware | LossVariant::Exponential => {
            let a = pair_weights(w);
            let exponential = variant == LossVariant::Exponential;
            accumulate(
                s,
                |i, k| a[[i, k]],
                |i, k, out| {
                    out.extend((0..n).filter(|&t| t != i && t != k).map(|t| {
                        let c = if exponential { 1.0 - w.get(i, t) } else { 1.0 };
                        (t, c)
                    }))
                },
                grad,
            )
        }
        LossVariant::Threshold => accumulate(
            s,
            |i, k| threshold_weight(w, i, k),
            |i, k, out| {
                let wik = w.get(i, k);
                out.extend(
                    (0..n)
                        .filter(|&t| t != i && t != k && w.get(i, t) < wik)
                        .map(|t| (t, 1.0)),
                )
            },
            grad,
        ),
        LossVariant::RankNContrast => accumulate(
            s,
            |_, _| 1.0,
            |i, k, out| {
                let gap = (labels[i] - labels[k]).abs();
                out.extend(
                    (0..n)
                        .filter(|&t| t != i && (labels[i] - labels[t]).abs() >= gap)
                        .map(|t| (t, 1.0)),
                )
            },
            grad,
        ),
    };
    Ok(value)
}

/// Total localized repulsion loss, summed over anchors.
///
/// The attraction terms run over every `k != i`; only the repulsion
/// denominator is restricted to the anchor's neighbor set.
pub fn dynlocrep_forward(s: &SimilarityMatrix, w: &PositivenessMatrix, nbrs: &NeighborSets) -> Result<f64> {
    dynlocrep_terms(s, w, nbrs, None)
}

/// Total loss for one of the global baselines, summed over anchors.
pub fn baseline_forward(
    variant: LossVariant,
    s: &SimilarityMatrix,
    w: &PositivenessMatrix,
    labels: &[f64],
) -> Result<f64> {
    baseline_terms(variant, s, w, labels, None)
}

/// Loss value and `dL/ds` (zero diagonal) for any variant.
pub fn similarity_gradient(
    variant: LossVariant,
    s: &SimilarityMatrix,
    w: &PositivenessMatrix,
    labels: &[f64],
    nbrs: Option<&NeighborSets>,
) -> Result<(f64, Array2<f64>)> {
    let mut grad = Array2::zeros((s.n(), s.n()));
    let value = match variant {
        LossVariant::DynLocRep => {
            let nbrs = nbrs.ok_or_else(|| Error::Config("dynlocrep requires neighbor sets".into()))?;
            if labels.len() != s.n() {
                return Err(Error::Shape(format!(
                    "{} similarity rows but {} labels",
                    s.n(),
                    labels.len()
                )));
            }
            dynlocrep_terms(s, w, nbrs, Some(&mut grad))?
        }
        other => baseline_terms(other, s, w, labels, Some(&mut grad))?,
    };
    Ok((value, grad))
}

/// Back-propagates `dL/ds` through `s = unit unit^T / tau` and the row
/// normalization `unit = raw / max(||raw||, eps)`.
pub fn chain_to_raw(grad_s: ArrayView2<'_, f64>, batch: &EmbeddingBatch, temperature: f64) -> Array2<f64> {
    let sym = &grad_s + &grad_s.t();
    let mut grad_unit = sym.dot(&batch.unit);
    grad_unit.mapv_inplace(|v| v / temperature);

    let mut grad_raw = grad_unit;
    for (mut g, (raw, unit)) in grad_raw
        .axis_iter_mut(Axis(0))
        .zip(batch.raw.axis_iter(Axis(0)).zip(batch.unit.axis_iter(Axis(0))))
    {
        let norm = raw.dot(&raw).sqrt();
        if norm > NORM_EPS {
            let radial = unit.dot(&g);
            g.zip_mut_with(&unit, |gv, &u| *gv = (*gv - radial * u) / norm);
        } else {
            g.mapv_inplace(|v| v / NORM_EPS);
        }
    }
    grad_raw
}

/// Loss value and gradient with respect to raw embeddings.
///
/// `nbrs` is required for [`LossVariant::DynLocRep`] and ignored otherwise.
pub fn loss_with_gradient(
    variant: LossVariant,
    batch: &EmbeddingBatch,
    labels: &[f64],
    config: &LossConfig,
    nbrs: Option<&NeighborSets>,
) -> Result<LossOutput> {
    let n = batch.len();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} embeddings but {} labels", labels.len())));
    }
    let w = positiveness_matrix(labels, &config.kernel)?;
    let s = similarity_matrix(batch.unit.view(), config.temperature)?;
    let (mut value, grad_s) = similarity_gradient(variant, &s, &w, labels, nbrs)?;
    let mut grad_raw = chain_to_raw(grad_s.view(), batch, config.temperature);
    if config.reduction == Reduction::Mean {
        let scale = 1.0 / n as f64;
        value *= scale;
        grad_raw.mapv_inplace(|v| v * scale);
    }
    if !value.is_finite() || grad_raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{variant} loss produced a non-finite value")));
    }
    Ok(LossOutput { value, grad_raw })
}

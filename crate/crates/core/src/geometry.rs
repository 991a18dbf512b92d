//! Embedding normalization, cosine similarities, pairwise distances and
//! nearest-neighbor selection.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to row norms before dividing.
pub const NORM_EPS: f64 = 1e-12;

/// Divides each row by `max(||row||_2, NORM_EPS)`.
///
/// Zero rows stay zero.
pub fn l2_normalize(raw: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = raw.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let norm = row.dot(&row).sqrt().max(NORM_EPS);
        row.mapv_inplace(|v| v / norm);
    }
    out
}

/// Encoder outputs alongside their row-normalized copy.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    pub raw: Array2<f64>,
    pub unit: Array2<f64>,
}

impl EmbeddingBatch {
    pub fn new(raw: Array2<f64>) -> Result<Self> {
        let (n, d) = raw.dim();
        if n < 2 {
            return Err(Error::BatchTooSmall { min: 2, got: n });
        }
        if d == 0 {
            return Err(Error::Shape("embedding dimension must be at least 1".into()));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite embedding value".into()));
        }
        let unit = l2_normalize(raw.view());
        Ok(EmbeddingBatch { raw, unit })
    }

    pub fn len(&self) -> usize {
        self.raw.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.raw.ncols()
    }
}

/// Temperature-scaled cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    s: Array2<f64>,
    temperature: f64,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.s
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.s[[i, k]]
    }
}

/// `s[i][k] = <unit_i, unit_k> / temperature`.
pub fn similarity_matrix(unit: ArrayView2<'_, f64>, temperature: f64) -> Result<SimilarityMatrix> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut s = unit.dot(&unit.t());
    s.mapv_inplace(|v| v / temperature);
    // Symmetrize so s[i][k] and s[k][i] are bit-identical regardless of how
    // the matrix product accumulated.
    let n = s.nrows();
    for i in 0..n {
        for k in (i + 1)..n {
            s[[k, i]] = s[[i, k]];
        }
    }
    Ok(SimilarityMatrix { s, temperature })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceNorm {
    Manhattan,
    Euclidean,
    Chebyshev,
    Cosine,
}

impl DistanceNorm {
    pub const ALL: [DistanceNorm; 4] = [
        DistanceNorm::Manhattan,
        DistanceNorm::Euclidean,
        DistanceNorm::Chebyshev,
        DistanceNorm::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistanceNorm::Manhattan => "manhattan",
            DistanceNorm::Euclidean => "euclidean",
            DistanceNorm::Chebyshev => "chebyshev",
            DistanceNorm::Cosine => "cosine",
        }
    }

    pub fn distance(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        let diffs = a.iter().zip(b.iter()).map(|(x, y)| x - y);
        match self {
            DistanceNorm::Manhattan => diffs.map(f64::abs).sum(),
            DistanceNorm::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            DistanceNorm::Chebyshev => diffs.map(f64::abs).fold(0.0, f64::max),
            DistanceNorm::Cosine => {
                let na = a.dot(&a).sqrt().max(NORM_EPS);
                let nb = b.dot(&b).sqrt().max(NORM_EPS);
                // Clamped into [0, 2] against rounding.
                (1.0 - a.dot(&b) / (na * nb)).clamp(0.0, 2.0)
            }
        }
    }
}

impl fmt::Display for DistanceNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceNorm::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown distance norm `{s}`")))
    }
}

/// Which space neighbor distances are measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborSpace {
    /// Unit-normalized encoder outputs of the current batch.
    #[default]
    Embedding,
    /// Raw input features.
    Input,
}

impl fmt::Display for NeighborSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborSpace::Embedding => "embedding",
            NeighborSpace::Input => "input",
        })
    }
}

impl FromStr for NeighborSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(NeighborSpace::Embedding),
            "input" => Ok(NeighborSpace::Input),
            other => Err(Error::Config(format!("unknown neighbor space `{other}`"))),
        }
    }
}

/// Symmetric pairwise distances with an exactly zero diagonal.
pub fn distance_matrix(points: ArrayView2<'_, f64>, norm: DistanceNorm) -> Result<Array2<f64>> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::BatchTooSmall { min: 2, got: n });
    }
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for k in (i + 1)..n {
            let v = norm.distance(points.row(i), points.row(k));
            d[[i, k]] = v;
            d[[k, i]] = v;
        }
    }
    Ok(d)
}

/// Per-anchor neighbor lists, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    sets: Vec<Vec<usize>>,
}

impl NeighborSets {
    /// Every anchor's set is all other indices.
    pub fn full(n: usize) -> Self {
        NeighborSets {
            sets: (0..n).map(|i| (0..n).filter(|&k| k != i).collect()).collect(),
        }
    }

    /// Wraps explicit lists. Each list must be non-empty, free of its own
    /// anchor and of duplicates, and all lists must share one length.
    pub fn from_sets(sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        let len = sets.first().map_or(0, Vec::len);
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::Input(format!("neighbor set of anchor {i} is empty")));
            }
            if set.len() != len {
                return Err(Error::Input("neighbor sets differ in length".into()));
            }
            let mut seen = vec![false; n];
            for &k in set {
                if k >= n || k == i || seen[k] {
                    return Err(Error::Input(format!("invalid neighbor {k} for anchor {i}")));
                }
                seen[k] = true;
            }
        }
        Ok(NeighborSets { sets })
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    /// Neighbors per anchor.
    pub fn count(&self) -> usize {
        self.sets.first().map_or(0, Vec::len)
    }

    pub fn of(&self, anchor: usize) -> &[usize] {
        &self.sets[anchor]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }
}

/// Picks the `count` nearest other samples for every anchor. Ties go to the
/// smaller index.
pub fn select_neighbors(distances: ArrayView2<'_, f64>, count: usize) -> Result<NeighborSets> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::Shape(format!(
            "distance matrix must be square, got {:?}",
            distances.dim()
        )));
    }
    if count == 0 || count + 1 > n {
        return Err(Error::Config(format!(
            "neighbor count {count} outside [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let sets = (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            others.sort_by(|&a, &b| distances[[i, a]].total_cmp(&distances[[i, b]]).then(a.cmp(&b)));
            others.truncate(count);
            others
        })
        .collect();
    Ok(NeighborSets { sets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn normalize_examples() {
        let out = l2_normalize(array![[3.0, 4.0], [1.0, 0.0], [0.0, 0.0]].view());
        assert!((out[[0, 0]] - 0.6).abs() < 1e-15);
        assert!((out[[0, 1]] - 0.8).abs() < 1e-15);
        assert_eq!(out.row(1), array![1.0, 0.0]);
        assert_eq!(out.row(2), array![0.0, 0.0]);
    }

    #[test]
    fn similarity_examples() {
        let unit = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
        let s = similarity_matrix(unit.view(), 0.1).unwrap();
        assert!((s.get(0, 1) - 10.0).abs() < 1e-12);
        assert_eq!(s.get(0, 2), 0.0);
        assert!((s.get(0, 3) + 10.0).abs() < 1e-12);
        assert!((s.get(2, 2) - 10.0).abs() < 1e-12);
        assert!(similarity_matrix(unit.view(), 0.0).is_err());
        assert!(similarity_matrix(unit.view(), -0.5).is_err());
    }

    #[test]
    fn distance_examples() {
        let p = array![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(distance_matrix(p.view(), DistanceNorm::Manhattan).unwrap()[[0, 1]], 2.0);
        assert!(
            (distance_matrix(p.view(), DistanceNorm::Euclidean).unwrap()[[0, 1]] - std::f64::consts::SQRT_2).abs()
                < 1e-12
        );
        assert_eq!(distance_matrix(p.view(), DistanceNorm::Chebyshev).unwrap()[[0, 1]], 1.0);
        let par = array![[1.0, 0.0], [2.0, 0.0]];
        assert!(distance_matrix(par.view(), DistanceNorm::Cosine).unwrap()[[0, 1]].abs() < 1e-15);
        let anti = array![[1.0, 0.0], [-2.0, 0.0]];
        assert_eq!(distance_matrix(anti.view(), DistanceNorm::Cosine).unwrap()[[0, 1]], 2.0);
    }

    #[test]
    fn neighbors_one_dimensional() {
        let p = array![[0.0], [1.0], [3.0]];
        let d = distance_matrix(p.view(), DistanceNorm::Euclidean).unwrap();
        let nb = select_neighbors(d.view(), 1).unwrap();
        assert_eq!(nb.of(0), &[1]);
        assert_eq!(nb.of(1), &[0]);
        assert_eq!(nb.of(2), &[1]);
    }

    #[test]
    fn neighbors_tie_break_smaller_index() {
        // Anchor 0 sits at distance 1 from both 2 and 5.
        let n = 6;
        let mut d = Array2::from_elem((n, n), 5.0);
        for i in 0..n {
            d[[i, i]] = 0.0;
        }
        for k in [2, 5] {
            d[[0, k]] = 1.0;
            d[[k, 0]] = 1.0;
        }
        let nb = select_neighbors(d.view(), 1).unwrap();
        assert_eq!(nb.of(0), &[2]);
    }

    #[test]
    fn neighbors_full_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_points(&mut rng, 7, 3);
        let d = distance_matrix(p.view(), DistanceNorm::Manhattan).unwrap();
        let nb = select_neighbors(d.view(), 6).unwrap();
        for i in 0..7 {
            let mut got = nb.of(i).to_vec();
            got.sort_unstable();
            assert_eq!(got, (0..7).filter(|&k| k != i).collect::<Vec<_>>());
        }
        assert!(matches!(select_neighbors(d.view(), 0), Err(Error::Config(_))));
        assert!(matches!(select_neighbors(d.view(), 7), Err(Error::Config(_))));
    }

    #[test]
    fn euclidean_and_cosine_agree_on_unit_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let unit = l2_normalize(random_points(&mut rng, 10, 4).view());
            let de = distance_matrix(unit.view(), DistanceNorm::Euclidean).unwrap();
            let dc = distance_matrix(unit.view(), DistanceNorm::Cosine).unwrap();
            for count in 1..10 {
                assert_eq!(
                    select_neighbors(de.view(), count).unwrap(),
                    select_neighbors(dc.view(), count).unwrap()
                );
            }
        }
    }

    #[test]
    fn neighbor_space_and_norm_parse() {
        for norm in DistanceNorm::ALL {
            assert_eq!(norm.name().parse::<DistanceNorm>().unwrap(), norm);
        }
        assert!("taxicab".parse::<DistanceNorm>().is_err());
        assert_eq!("input".parse::<NeighborSpace>().unwrap(), NeighborSpace::Input);
    }

    proptest! {
        #[test]
        fn distance_matrix_properties(seed in 0u64..1000, n in 2usize..12, d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_points(&mut rng, n, d);
            for norm in DistanceNorm::ALL {
                let m = distance_matrix(p.view(), norm).unwrap();
                for i in 0..n {
                    prop_assert_eq!(m[[i, i]], 0.0);
                    for k in 0..n {
                        prop_assert!(m[[i, k]] >= 0.0);
                        prop_assert!((m[[i, k]] - m[[k, i]]).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn similarity_bounded(seed in 0u64..1000, n in 2usize..12, d in 1usize..6, tau in 0.05f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unit = l2_normalize(random_points(&mut rng, n, d).view());
            let s = similarity_matrix(unit.view(), tau).unwrap();
            for i in 0..n {
                for k in 0..n {
                    prop_assert!(s.get(i, k).abs() <= 1.0 / tau + 1e-9);
                    prop_assert_eq!(s.get(i, k), s.get(k, i));
                }
            }
        }

        #[test]
        fn neighbor_sets_well_formed(seed in 0u64..1000, n in 2usize..12, pick in 0usize..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_points(&mut rng, n, 3);
            let d = distance_matrix(p.view(), DistanceNorm::Chebyshev).unwrap();
            let count = 1 + pick % (n - 1);
            let nb = select_neighbors(d.view(), count).unwrap();
            for (i, set) in nb.iter().enumerate() {
                prop_assert_eq!(set.len(), count);
                prop_assert!(!set.contains(&i));
                for w in set.windows(2) {
                    prop_assert!(d[[i, w[0]]] <= d[[i, w[1]]]);
                }
            }
        }

        #[test]
        fn unit_rows_have_unit_norm(seed in 0u64..1000, n in 1usize..10, d in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unit = l2_normalize(random_points(&mut rng, n, d).view());
            for row in unit.rows() {
                prop_assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }
}

//! Brute-force reference evaluations written directly from the loss
//! formulas, on nested `Vec`s, without log-sum-exp shifting and without any
//! code from the crate under test.

#![allow(dead_code, clippy::needless_range_loop)]

pub type Mat = Vec<Vec<f64>>;

pub fn unit_rows(raw: &Mat) -> Mat {
    raw.iter()
        .map(|row| {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            row.iter().map(|v| v / norm).collect()
        })
        .collect()
}

pub fn similarities(raw: &Mat, tau: f64) -> Mat {
    let u = unit_rows(raw);
    let n = u.len();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let mut dot = 0.0;
            for j in 0..u[i].len() {
                dot += u[i][j] * u[k][j];
            }
            s[i][k] = dot / tau;
        }
    }
    s
}

pub fn gaussian_weights(labels: &[f64], sigma: f64) -> Mat {
    labels
        .iter()
        .map(|a| {
            labels
                .iter()
                .map(|b| (-(a - b) * (a - b) / (2.0 * sigma * sigma)).exp())
                .collect()
        })
        .collect()
}

/// Sum over `t != i` of `w[i][t]`.
fn weight_total(w: &Mat, i: usize) -> f64 {
    let mut total = 0.0;
    for t in 0..w.len() {
        if t != i {
            total += w[i][t];
        }
    }
    total
}

/// Localized repulsion: all `k != i` attract, denominator over `nbrs[i]`.
pub fn dynlocrep(s: &Mat, w: &Mat, nbrs: &[Vec<usize>]) -> f64 {
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        let total = weight_total(w, i);
        if total < 1e-12 {
            continue;
        }
        let mut denom = 0.0;
        for &t in &nbrs[i] {
            denom += (s[i][t] * (1.0 - w[i][t])).exp();
        }
        for k in 0..n {
            if k == i {
                continue;
            }
            loss -= w[i][k] / total * (s[i][k].exp() / denom).ln();
        }
    }
    loss
}

/// Exponential weighting with the denominator over every `t != i`.
pub fn exponential_full(s: &Mat, w: &Mat) -> f64 {
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        let total = weight_total(w, i);
        if total < 1e-12 {
            continue;
        }
        let mut denom = 0.0;
        for t in 0..n {
            if t != i {
                denom += (s[i][t] * (1.0 - w[i][t])).exp();
            }
        }
        for k in 0..n {
            if k != i {
                loss -= w[i][k] / total * (s[i][k].exp() / denom).ln();
            }
        }
    }
    loss
}

fn global_weighted(s: &Mat, w: &Mat, repulsion_scaled: bool) -> f64 {
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        let total = weight_total(w, i);
        if total < 1e-12 {
            continue;
        }
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut denom = 0.0;
            let mut terms = 0;
            for t in 0..n {
                if t == i || t == k {
                    continue;
                }
                let c = if repulsion_scaled { 1.0 - w[i][t] } else { 1.0 };
                denom += (c * s[i][t]).exp();
                terms += 1;
            }
            if terms == 0 {
                continue;
            }
            loss -= w[i][k] / total * (s[i][k].exp() / denom).ln();
        }
    }
    loss
}

pub fn yaware(s: &Mat, w: &Mat) -> f64 {
    global_weighted(s, w, false)
}

pub fn exponential(s: &Mat, w: &Mat) -> f64 {
    global_weighted(s, w, true)
}

pub fn threshold(s: &Mat, w: &Mat) -> f64 {
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut norm = 0.0;
            let mut denom = 0.0;
            let mut terms = 0;
            for t in 0..n {
                if t == i || w[i][t] >= w[i][k] {
                    continue;
                }
                norm += w[i][t];
                if t != k {
                    denom += s[i][t].exp();
                    terms += 1;
                }
            }
            if terms == 0 || norm < 1e-12 {
                continue;
            }
            loss -= w[i][k] / norm * (s[i][k].exp() / denom).ln();
        }
    }
    loss
}

pub fn rank_n_contrast(s: &Mat, labels: &[f64]) -> f64 {
    let n = s.len();
    let mut loss = 0.0;
    for i in 0..n {
        for k in 0..n {
            if k == i {
                continue;
            }
            let gap = (labels[i] - labels[k]).abs();
            let mut denom = 0.0;
            for t in 0..n {
                if t != i && (labels[i] - labels[t]).abs() >= gap {
                    denom += s[i][t].exp();
                }
            }
            loss -= (s[i][k].exp() / denom).ln();
        }
    }
    loss
}

/// Loss by variant name, from raw embeddings.
pub fn loss_by_name(name: &str, raw: &Mat, labels: &[f64], nbrs: &[Vec<usize>], sigma: f64, tau: f64) -> f64 {
    let s = similarities(raw, tau);
    let w = gaussian_weights(labels, sigma);
    match name {
        "dynlocrep" => dynlocrep(&s, &w, nbrs),
        "yaware" => yaware(&s, &w),
        "exponential" => exponential(&s, &w),
        "threshold" => threshold(&s, &w),
        "rnc" => rank_n_contrast(&s, labels),
        other => panic!("unknown variant {other}"),
    }
}

/// Central finite differences of `f` at `raw`.
pub fn numeric_gradient(raw: &Mat, step: f64, f: impl Fn(&Mat) -> f64) -> Mat {
    let mut grad = vec![vec![0.0; raw[0].len()]; raw.len()];
    for i in 0..raw.len() {
        for j in 0..raw[0].len() {
            let mut plus = raw.clone();
            plus[i][j] += step;
            let mut minus = raw.clone();
            minus[i][j] -= step;
            grad[i][j] = (f(&plus) - f(&minus)) / (2.0 * step);
        }
    }
    grad
}

/// Inverts a square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &Mat) -> Mat {
    let n = a.len();
    let mut aug: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let factor = aug[r][col];
                for c in 0..2 * n {
                    aug[r][c] -= factor * aug[col][c];
                }
            }
        }
    }
    aug.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// Ridge coefficients and intercept from explicit normal equations on
/// centered data.
pub fn ridge_normal_equations(x: &Mat, y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let n = x.len();
    let d = x[0].len();
    let xm: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let ym = y.iter().sum::<f64>() / n as f64;
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for r in 0..n {
        for a in 0..d {
            let xa = x[r][a] - xm[a];
            rhs[a] += xa * (y[r] - ym);
            for b in 0..d {
                gram[a][b] += xa * (x[r][b] - xm[b]);
            }
        }
    }
    for (a, row) in gram.iter_mut().enumerate() {
        row[a] += lambda;
    }
    let inv = invert(&gram);
    let coef: Vec<f64> = (0..d).map(|a| (0..d).map(|b| inv[a][b] * rhs[b]).sum()).collect();
    let intercept = ym - (0..d).map(|a| xm[a] * coef[a]).sum::<f64>();
    (coef, intercept)
}

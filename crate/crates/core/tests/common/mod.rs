//! Independent reference implementations and synthetic-data builders shared
//! by the integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semaxes_core::{AntonymPair, EmbeddingSpace, FeatureLexicon, FeatureSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

pub fn brute_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
    }
    dot / (norm(a) * norm(b))
}

/// Mean of unit antonym differences, renormalized.
pub fn reference_direction(pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let n = pairs[0].0.len();
    let mut sum = vec![0.0; n];
    for (p, q) in pairs {
        let diff: Vec<f64> = (0..n).map(|i| p[i] - q[i]).collect();
        let len = norm(&diff);
        for i in 0..n {
            sum[i] += diff[i] / len;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / pairs.len() as f64).collect();
    unit(&mean)
}

/// Sum-of-products Pearson formula.
pub fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order and the matching eigenvectors as columns
/// (`vecs[row][col]`).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]));
    let vals = order.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (vals, vecs)
}

/// Sample correlation matrix of the columns of `rows`.
pub fn correlation_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = rows[0].len();
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { textbook_pearson(&col(i), &col(j)) }).collect()).collect()
}

/// Sample covariance (divisor n - 1) computed entry by entry.
pub fn covariance_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, k) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m as f64).collect();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (m - 1) as f64)
                .collect()
        })
        .collect()
}

/// Random orthogonal matrix by Gram-Schmidt on a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v = gaussian(rng, n);
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= d * y;
            }
        }
        if norm(&v) > 1e-6 {
            q.push(unit(&v));
        }
    }
    q
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

pub fn space(rows: Vec<(String, Vec<f64>)>) -> EmbeddingSpace {
    EmbeddingSpace::from_rows(rows.into_iter().map(|(t, v)| (t, to_f32(&v))).collect()).unwrap()
}

/// Random space with `n_pairs` antonym pairs `pos{i}`/`neg{i}` plus `extra`
/// filler tokens. Returns the space and the single feature over those pairs.
pub fn random_antonym_space(rng: &mut ChaCha8Rng, dim: usize, n_pairs: usize, extra: usize) -> (EmbeddingSpace, FeatureSpec) {
    let mut rows = Vec::new();
    for i in 0..n_pairs {
        rows.push((format!("pos{i}"), gaussian(rng, dim)));
        rows.push((format!("neg{i}"), gaussian(rng, dim)));
    }
    for i in 0..extra {
        rows.push((format!("tok{i}"), gaussian(rng, dim)));
    }
    let pairs = (0..n_pairs).map(|i| AntonymPair::new(format!("pos{i}"), format!("neg{i}"))).collect();
    (space(rows), FeatureSpec::new("f", pairs))
}

/// Unit vectors with prescribed pairwise Gram matrix, via Cholesky of
/// `gram` embedded in the first coordinates of an orthonormal basis.
pub fn planted_directions(gram: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = gram.len();
    let mut l = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = (0..j).map(|t| l[i][t] * l[j][t]).sum();
            if i == j {
                l[i][j] = (gram[i][i] - s).sqrt();
            } else {
                l[i][j] = (gram[i][j] - s) / l[j][j];
            }
        }
    }
    let dim = basis[0].len();
    (0..k)
        .map(|i| {
            let mut v = vec![0.0; dim];
            for t in 0..k {
                for (x, b) in v.iter_mut().zip(&basis[t]) {
                    *x += l[i][t] * b;
                }
            }
            v
        })
        .collect()
}

/// A 64-D space with 8 features whose directions have planted pairwise
/// cosines drawn from [0, 0.5], plus 100 random probe tokens. Each feature
/// has one antonym pair `+d`/`-d` along its planted direction.
pub struct PlantedSpace {
    pub space: EmbeddingSpace,
    pub lexicon: FeatureLexicon,
    pub planted: Vec<Vec<f64>>,
    pub tokens: Vec<usize>,
}

pub fn planted_space(seed: u64) -> PlantedSpace {
    let (dim, k, n_tokens) = (64, 8, 100);
    let mut r = rng(seed);
    let gram = loop {
        let mut g = vec![vec![0.0; k]; k];
        for i in 0..k {
            g[i][i] = 1.0;
            for j in 0..i {
                let c = r.random_range(0.0..0.5);
                g[i][j] = c;
                g[j][i] = c;
            }
        }
        let (vals, _) = jacobi_eigen(&g);
        if vals[k - 1] > 0.05 {
            break g;
        }
    };
    let basis = random_orthogonal(&mut r, dim);
    let planted = planted_directions(&gram, &basis[..k]);
    let mut rows = Vec::new();
    let mut features = Vec::new();
    for (f, d) in planted.iter().enumerate() {
        rows.push((format!("hi{f}"), d.iter().map(|x| 2.0 * x).collect()));
        rows.push((format!("lo{f}"), d.iter().map(|x| -2.0 * x).collect()));
        features.push(FeatureSpec::new(format!("f{f}"), vec![AntonymPair::new(format!("hi{f}"), format!("lo{f}"))]));
    }
    for t in 0..n_tokens {
        rows.push((format!("w{t}"), gaussian(&mut r, dim)));
    }
    let space = space(rows);
    let tokens = (2 * k..2 * k + n_tokens).collect();
    PlantedSpace { space, lexicon: FeatureLexicon::new(features).unwrap(), planted, tokens }
}

//! Feature-space diagnostics: PCA, exact t-SNE, k-means and
//! clustering-agreement scores (silhouette, purity, ARI, NMI), plus 1-D
//! histogram densities.
//!
//! t-SNE defaults: perplexity `n / 10` clipped to `[5, 50]`, learning rate
//! 200, 1500 iterations, PCA initialization scaled to a per-dimension standard
//! deviation of 1e-4, early exaggeration 12 for the first 250 iterations, and
//! momentum 0.5 switching to 0.8 at iteration 250. Updates use per-coordinate
//! adaptive gains (minimum 0.01).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cohort::AgeGroup;
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("value at row {row}, column {col} is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("perplexity {perplexity} infeasible for n = {n}: must lie in (0, {max})")]
    Perplexity { perplexity: f64, n: usize, max: f64 },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("silhouette needs at least 2 distinct labels")]
    SingleLabel,
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

pub const MIN_ROWS: usize = 5;

/// Row-major feature matrix with one age-group label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    labels: Vec<AgeGroup>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<AgeGroup>) -> Result<Self> {
        let n = rows.len();
        if n < MIN_ROWS {
            return Err(EmbeddingError::TooFewRows { need: MIN_ROWS, got: n });
        }
        if labels.len() != n {
            return Err(EmbeddingError::LengthMismatch(n, labels.len()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(EmbeddingError::Shape("zero feature columns".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(EmbeddingError::Shape(format!("row {r} has {} columns, expected {d}", row.len())));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite { row: r, col: c });
            }
        }
        let values = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        Ok(Self { values, labels })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn labels(&self) -> &[AgeGroup] {
        &self.labels
    }

    /// Labels as dense indices into [`AgeGroup::ALL`].
    pub fn label_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .map(|g| AgeGroup::ALL.iter().position(|x| x == g).expect("known group"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d x ncomp`, one unit principal direction per column.
    pub components: DMatrix<f64>,
    /// `n x ncomp` projections of the centred data.
    pub scores: DMatrix<f64>,
    /// Variance along each component, descending.
    pub explained_variance: Vec<f64>,
    /// All-zero variance: scores are zero and directions arbitrary.
    pub degenerate: bool,
}

pub fn pca(x: &DMatrix<f64>, ncomp: usize) -> Result<Pca> {
    let (n, d) = x.shape();
    if ncomp == 0 || ncomp > n.min(d) {
        return Err(EmbeddingError::Param(format!(
            "ncomp = {ncomp} must be in 1..={}",
            n.min(d)
        )));
    }
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    if centered.iter().all(|&v| v == 0.0) {
        return Ok(Pca {
            mean,
            components: DMatrix::identity(d, ncomp),
            scores: DMatrix::zeros(n, ncomp),
            explained_variance: vec![0.0; ncomp],
            degenerate: true,
        });
    }
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut components = DMatrix::zeros(d, ncomp);
    let mut explained_variance = Vec::with_capacity(ncomp);
    let denom = (n.max(2) - 1) as f64;
    for (c, &k) in order.iter().take(ncomp).enumerate() {
        let mut dir: Vec<f64> = v_t.row(k).iter().copied().collect();
        let pivot = dir
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap();
        if dir[pivot] < 0.0 {
            dir.iter_mut().for_each(|v| *v = -*v);
        }
        for (j, v) in dir.into_iter().enumerate() {
            components[(j, c)] = v;
        }
        explained_variance.push(svd.singular_values[k].powi(2) / denom);
    }
    let scores = &centered * &components;
    Ok(Pca {
        mean,
        components,
        scores,
        explained_variance,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub learning_rate: f64,
    pub iters: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub init_std: f64,
    pub seed: u64,
    /// KL is recorded every this many iterations (plus first and last).
    pub kl_every: usize,
}

impl TsneParams {
    pub fn for_n(n: usize, seed: u64) -> Self {
        Self {
            perplexity: (n as f64 / 10.0).clamp(5.0, 50.0),
            learning_rate: 200.0,
            iters: 1500,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            init_std: 1e-4,
            seed,
            kl_every: 50,
        }
    }

    pub fn max_perplexity(n: usize) -> f64 {
        (n as f64 - 1.0) / 3.0
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let max = Self::max_perplexity(n);
        if !(self.perplexity > 0.0 && self.perplexity < max) {
            return Err(EmbeddingError::Perplexity {
                perplexity: self.perplexity,
                n,
                max,
            });
        }
        if !(self.learning_rate > 0.0) || self.iters == 0 || self.early_exaggeration < 1.0 {
            return Err(EmbeddingError::Param(
                "learning_rate > 0, iters >= 1 and early_exaggeration >= 1 are required".into(),
            ));
        }
        Ok(())
    }
}

/// Symmetrized joint probabilities `P` (dense `n x n`, zero diagonal, sums to 1)
/// and the perplexity each conditional row actually reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinities {
    pub n: usize,
    pub p: Vec<f64>,
    pub row_perplexity: Vec<f64>,
}

const ENTROPY_TOL: f64 = 1e-5;
const MAX_BISECTIONS: usize = 50;

/// Conditional distribution for one point given squared distances to all
/// others (`self` excluded), calibrated to `ln(perplexity)` entropy.
/// Returns the row and its achieved perplexity.
fn calibrate_row(dist2: &[f64], target_entropy: f64) -> (Vec<f64>, f64) {
    let min = dist2.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = dist2.iter().map(|d| d - min).collect();
    let eval = |beta: f64| {
        let w: Vec<f64> = shifted.iter().map(|d| (-beta * d).exp()).collect();
        let sum: f64 = w.iter().sum();
        let dot: f64 = w.iter().zip(&shifted).map(|(w, d)| w * d).sum();
        (sum.ln() + beta * dot / sum, w, sum)
    };
    let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
    let (mut h, mut w, mut sum) = eval(beta);
    for _ in 0..MAX_BISECTIONS {
        let diff = h - target_entropy;
        if diff.abs() < ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
        (h, w, sum) = eval(beta);
    }
    w.iter_mut().for_each(|v| *v /= sum);
    (w, h.exp())
}

fn squared_distances(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            if i != j {
                let mut s = 0.0;
                for k in 0..x.ncols() {
                    let t = x[(i, k)] - x[(j, k)];
                    s += t * t;
                }
                row[j] = s;
            }
        }
    });
    d
}

pub fn joint_probabilities(x: &DMatrix<f64>, perplexity: f64) -> Result<Affinities> {
    let n = x.nrows();
    let max = TsneParams::max_perplexity(n);
    if !(perplexity > 0.0 && perplexity < max) {
        return Err(EmbeddingError::Perplexity { perplexity, n, max });
    }
    let d = squared_distances(x);
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).collect();
            calibrate_row(&others, target)
        })
        .collect();
    let mut cond = vec![0.0; n * n];
    let mut row_perplexity = Vec::with_capacity(n);
    for (i, (row, perp)) in rows.into_iter().enumerate() {
        let mut it = row.into_iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = it.next().unwrap();
        }
        row_perplexity.push(perp);
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    Ok(Affinities { n, p, row_perplexity })
}

/// Student-t kernel numerators `1 / (1 + |yi - yj|^2)` (zero diagonal) and
/// their total.
fn student_kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            if i != j {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                row[j] = 1.0 / (1.0 + dx * dx + dy * dy);
            }
        }
    });
    let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum::<f64>()).collect();
    (num, row_sums.iter().sum())
}

const P_FLOOR: f64 = 1e-300;

/// KL(P || Q) of an embedding.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (num, z) = student_kernel(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                let q = (num[i * n + j] / z).max(P_FLOOR);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

/// Analytic gradient of KL(`scale * P` || Q) with respect to the embedding.
pub fn kl_gradient(p: &[f64], y: &[[f64; 2]], scale: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, z) = student_kernel(y);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = (scale * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlPoint {
    pub iter: usize,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub embedding: Vec<[f64; 2]>,
    pub kl_trace: Vec<KlPoint>,
    pub row_perplexity: Vec<f64>,
}

impl TsneResult {
    pub fn initial_kl(&self) -> f64 {
        self.kl_trace.first().map(|k| k.kl).unwrap_or(f64::NAN)
    }

    pub fn final_kl(&self) -> f64 {
        self.kl_trace.last().map(|k| k.kl).unwrap_or(f64::NAN)
    }
}

fn initial_embedding(x: &DMatrix<f64>, params: &TsneParams) -> Vec<[f64; 2]> {
    let n = x.nrows();
    let mut y: Vec<[f64; 2]> = match pca(x, 2.min(x.ncols()).min(n)) {
        Ok(p) if !p.degenerate => (0..n)
            .map(|i| [p.scores[(i, 0)], if p.scores.ncols() > 1 { p.scores[(i, 1)] } else { 0.0 }])
            .collect(),
        _ => vec![[0.0; 2]; n],
    };
    let mut rng = rng::stream(params.seed, "tsne/init");
    let jitter = Normal::new(0.0, params.init_std).expect("positive std");
    for dim in 0..2 {
        let mean = y.iter().map(|p| p[dim]).sum::<f64>() / n as f64;
        let std = (y.iter().map(|p| (p[dim] - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if std > 0.0 {
            y.iter_mut().for_each(|p| p[dim] = (p[dim] - mean) / std * params.init_std);
        } else {
            // Flat PCA axis: fall back to seeded Gaussian coordinates.
            y.iter_mut().for_each(|p| p[dim] = jitter.sample(&mut rng));
        }
    }
    y
}

pub fn tsne(x: &FeatureMatrix, params: &TsneParams) -> Result<TsneResult> {
    let n = x.n();
    params.validate(n)?;
    let aff = joint_probabilities(x.values(), params.perplexity)?;
    let p = &aff.p;
    let mut y = initial_embedding(x.values(), params);
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = vec![KlPoint { iter: 0, kl: kl_divergence(p, &y) }];

    for iter in 0..params.iters {
        let scale = if iter < params.exaggeration_iters { params.early_exaggeration } else { 1.0 };
        let momentum = if iter < params.momentum_switch_iter {
            params.initial_momentum
        } else {
            params.final_momentum
        };
        let grad = kl_gradient(p, &y, scale);
        for i in 0..n {
            for dim in 0..2 {
                let g = grad[i][dim];
                let v = velocity[i][dim];
                gains[i][dim] = if (g > 0.0) != (v > 0.0) {
                    gains[i][dim] + 0.2
                } else {
                    (gains[i][dim] * 0.8).max(0.01)
                };
                velocity[i][dim] = momentum * v - params.learning_rate * gains[i][dim] * g;
                y[i][dim] += velocity[i][dim];
            }
        }
        for dim in 0..2 {
            let mean = y.iter().map(|p| p[dim]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[dim] -= mean);
        }
        let done = iter + 1;
        if done == params.iters || (params.kl_every > 0 && done % params.kl_every == 0) {
            kl_trace.push(KlPoint { iter: done, kl: kl_divergence(p, &y) });
        }
    }
    Ok(TsneResult {
        embedding: y,
        kl_trace,
        row_perplexity: aff.row_perplexity,
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette; points in singleton label groups contribute 0.
pub fn silhouette<P: AsRef<[f64]> + Sync>(points: &[P], labels: &[usize]) -> Result<f64> {
    if points.len() != labels.len() {
        return Err(EmbeddingError::LengthMismatch(points.len(), labels.len()));
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    labels.iter().for_each(|&l| *sizes.entry(l).or_default() += 1);
    if sizes.len() < 2 {
        return Err(EmbeddingError::SingleLabel);
    }
    let n = points.len();
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            if sizes[&own] == 1 {
                return 0.0;
            }
            let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
            for j in 0..n {
                if j != i {
                    *sums.entry(labels[j]).or_default() += euclid(points[i].as_ref(), points[j].as_ref());
                }
            }
            let a = sums.get(&own).copied().unwrap_or(0.0) / (sizes[&own] - 1) as f64;
            let b = sums
                .iter()
                .filter(|(l, _)| **l != own)
                .map(|(l, s)| s / sizes[l] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;

/// Lloyd's algorithm from a seeded farthest-point initialization: the first
/// centre is a uniformly drawn point, each next one the point farthest from
/// all chosen centres (lowest index on ties).
pub fn kmeans<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64) -> Result<KMeans> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(EmbeddingError::Param(format!("k = {k} must be in 1..={n}")));
    }
    let dim = points[0].as_ref().len();
    let mut rng = rng::stream(seed, "kmeans/init");
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].as_ref().to_vec()];
    let mut nearest: Vec<f64> = points.iter().map(|p| euclid(p.as_ref(), &centers[0])).collect();
    while centers.len() < k {
        let far = (0..n).fold(0, |best, i| if nearest[i] > nearest[best] { i } else { best });
        let c = points[far].as_ref().to_vec();
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(euclid(p.as_ref(), &c));
        }
        centers.push(c);
    }
    let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                (0..k).fold(0, |best, c| {
                    if euclid(p.as_ref(), &centers[c]) < euclid(p.as_ref(), &centers[best]) {
                        c
                    } else {
                        best
                    }
                })
            })
            .collect()
    };
    let mut assignment = assign(&centers);
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p.as_ref()).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            // Empty clusters keep their previous centre.
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next = assign(&centers);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| euclid(p.as_ref(), &centers[a]).powi(2))
        .sum();
    Ok(KMeans {
        assignment,
        centers,
        inertia,
        iterations,
    })
}

struct Contingency {
    n: usize,
    table: BTreeMap<(usize, usize), usize>,
    pred: BTreeMap<usize, usize>,
    truth: BTreeMap<usize, usize>,
}

fn contingency(pred: &[usize], truth: &[usize], min_len: usize) -> Result<Contingency> {
    if pred.len() != truth.len() {
        return Err(EmbeddingError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.len() < min_len {
        return Err(EmbeddingError::TooFewRows { need: min_len, got: pred.len() });
    }
    let mut c = Contingency {
        n: pred.len(),
        table: BTreeMap::new(),
        pred: BTreeMap::new(),
        truth: BTreeMap::new(),
    };
    for (&p, &t) in pred.iter().zip(truth) {
        *c.table.entry((p, t)).or_default() += 1;
        *c.pred.entry(p).or_default() += 1;
        *c.truth.entry(t).or_default() += 1;
    }
    Ok(c)
}

pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth, 1)?;
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(p, _), &count) in &c.table {
        let b = best.entry(p).or_default();
        *b = (*b).max(count);
    }
    Ok(best.values().sum::<usize>() as f64 / c.n as f64)
}

fn pairs(m: usize) -> f64 {
    (m as f64) * (m as f64 - 1.0) / 2.0
}

pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth, 2)?;
    let index: f64 = c.table.values().map(|&m| pairs(m)).sum();
    let a: f64 = c.pred.values().map(|&m| pairs(m)).sum();
    let b: f64 = c.truth.values().map(|&m| pairs(m)).sum();
    let expected = a * b / pairs(c.n);
    let max = (a + b) / 2.0;
    if max == expected {
        // Both partitions trivial in the same way: agreement is perfect
        // exactly when the partitions coincide.
        return Ok(if index == a && index == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(counts: &BTreeMap<usize, usize>, n: usize) -> f64 {
    counts
        .values()
        .map(|&m| {
            let p = m as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// `I / sqrt(H_pred * H_truth)` in nats. If either entropy is zero the
/// score is 1 for partitions identical up to relabelling, else 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth, 1)?;
    let n = c.n as f64;
    let (hp, ht) = (entropy(&c.pred, c.n), entropy(&c.truth, c.n));
    if hp == 0.0 || ht == 0.0 {
        let identical = c.table.len() == c.pred.len() && c.table.len() == c.truth.len();
        return Ok(if identical { 1.0 } else { 0.0 });
    }
    let mi: f64 = c
        .table
        .iter()
        .map(|(&(p, t), &m)| {
            let m = m as f64;
            m / n * (n * m / (c.pred[&p] as f64 * c.truth[&t] as f64)).ln()
        })
        .sum();
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    /// Normalized so that `sum(density) * bin_width == 1`. For a spike
    /// (constant input) this holds the probability mass 1.0 instead.
    pub density: Vec<f64>,
    pub spike: bool,
}

impl Density {
    pub fn bin_centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|b| self.lo + (b as f64 + 0.5) * self.bin_width)
            .collect()
    }
}

pub fn density_1d(values: &[f64], bins: usize) -> Result<Density> {
    if bins == 0 {
        return Err(EmbeddingError::Param("bins must be >= 1".into()));
    }
    if values.is_empty() {
        return Err(EmbeddingError::TooFewRows { need: 1, got: 0 });
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(Density {
            lo,
            hi,
            bin_width: 0.0,
            counts: vec![values.len()],
            density: vec![1.0],
            spike: true,
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let norm = values.len() as f64 * width;
    Ok(Density {
        lo,
        hi,
        bin_width: width,
        density: counts.iter().map(|&c| c as f64 / norm).collect(),
        counts,
        spike: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterEval {
    /// Silhouette of the embedding grouped by the true labels.
    pub silhouette: f64,
    /// Purity, ARI and NMI of k-means clusters (k = distinct labels) vs truth.
    pub purity: f64,
    pub ari: f64,
    pub nmi: f64,
    pub k: usize,
}

pub fn evaluate_embedding(points: &[[f64; 2]], labels: &[usize], seed: u64) -> Result<ClusterEval> {
    let k = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    let sil = silhouette(points, labels)?;
    let km = kmeans(points, k, seed)?;
    Ok(ClusterEval {
        silhouette: sil,
        purity: purity(&km.assignment, labels)?,
        ari: ari(&km.assignment, labels)?,
        nmi: nmi(&km.assignment, labels)?,
        k,
    })
}

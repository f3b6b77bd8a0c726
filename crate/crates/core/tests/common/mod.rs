//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn rows_of(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    points.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Other points ordered by descending cosine similarity to `i`, ties by
/// ascending index.
pub fn neighbor_order(points: &DMatrix<f64>, i: usize) -> Vec<usize> {
    let rows = rows_of(points);
    let mut others: Vec<usize> = (0..rows.len()).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| {
        cosine(&rows[i], &rows[b])
            .partial_cmp(&cosine(&rows[i], &rows[a]))
            .unwrap()
            .then(a.cmp(&b))
    });
    others
}

/// `ranks[i][j]`: 1-based position of `j` in `i`'s neighbor order, 0 on the
/// diagonal.
pub fn rank_matrix(points: &DMatrix<f64>) -> Vec<Vec<u64>> {
    let n = points.nrows();
    let mut ranks = vec![vec![0u64; n]; n];
    for i in 0..n {
        for (pos, j) in neighbor_order(points, i).into_iter().enumerate() {
            ranks[i][j] = pos as u64 + 1;
        }
    }
    ranks
}

/// Direct summation: `1 - 2/(n k (2n - 3k - 1)) * Σ_i Σ_{j ∈ U_k(i)} (r_high(i,j) - k)`
/// with `U_k(i)` the low-space k-neighbors of `i` that are not high-space
/// k-neighbors.
pub fn trustworthiness_oracle(high: &[Vec<u64>], low: &[Vec<u64>], k: usize) -> f64 {
    let n = high.len();
    let k64 = k as u64;
    let mut sum: u64 = 0;
    for i in 0..n {
        let low_nbrs: Vec<usize> = (0..n).filter(|&j| j != i && low[i][j] <= k64).collect();
        assert_eq!(low_nbrs.len(), k);
        for j in low_nbrs {
            if high[i][j] > k64 {
                sum += high[i][j] - k64;
            }
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * sum as f64
}

/// Affine least-squares reconstruction of `p_i` from `nbrs`, solved through
/// the KKT system `[G 1; 1ᵀ 0] [w; ν] = [0; 1]` of the regularized local Gram
/// matrix.
pub fn lle_row_oracle(points: &DMatrix<f64>, i: usize, nbrs: &[usize], reg: f64) -> Vec<f64> {
    let k = nbrs.len();
    let z = DMatrix::from_fn(k, points.ncols(), |a, c| points[(nbrs[a], c)] - points[(i, c)]);
    let mut g = &z * z.transpose();
    let shift = reg * g.trace() / k as f64;
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        g[(a, a)] += shift;
        for b in 0..k {
            kkt[(a, b)] = g[(a, b)];
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs).expect("KKT system solvable");
    sol.rows(0, k).iter().copied().collect()
}

pub fn reconstruction_error(points: &DMatrix<f64>, i: usize, weights: &[(usize, f64)]) -> f64 {
    let mut r = points.row(i).into_owned();
    for &(j, w) in weights {
        r -= points.row(j) * w;
    }
    r.norm()
}

/// Closed-form minimizer of `(1/2)||P - RP||² + λ||R||_*`:
/// `R = U diag(max(0, 1 - λ/σ_i²)) Uᵀ` over the left singular pairs of `P`,
/// read off the eigendecomposition of `P Pᵀ`.
pub fn low_rank_closed_form(points: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = points.nrows();
    let eigen = (points * points.transpose()).symmetric_eigen();
    let mut r = DMatrix::zeros(n, n);
    for (idx, s2) in eigen.eigenvalues.iter().enumerate() {
        let gain = (1.0 - lambda / s2).max(0.0);
        if *s2 > 0.0 && gain > 0.0 {
            let col = eigen.eigenvectors.column(idx);
            r += &col * col.transpose() * gain;
        }
    }
    r
}

pub fn objective(points: &DMatrix<f64>, r: &DMatrix<f64>, lambda: f64) -> f64 {
    0.5 * (points - r * points).norm_squared() + lambda * r.clone().singular_values().sum()
}

/// Exact minimum of the 2x2 objective over the grid `{-2, -1.99, ..., 2}^4`.
///
/// The data term splits into one quadratic `q_r` per row of `R`, and the
/// nuclear norm is at least the Frobenius norm, hence at least either row
/// norm `n_r`. So `f >= q_0 + q_1 + λ max(n_0, n_1)`, which bounds each row
/// on its own (`q_r + λ n_r + min q_other`) and each pair separably
/// (`Σ_r q_r + λ n_r / 2`). Row values and pairs that cannot beat the
/// incumbent are skipped; every other combination is evaluated, so the
/// result is the true grid minimum.
pub fn grid_search_2x2(points: &DMatrix<f64>, lambda: f64) -> f64 {
    assert_eq!(points.shape(), (2, 2));
    let grid: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
    let p = |r: usize| [points[(r, 0)], points[(r, 1)]];
    // row r of R applied: || p_r - (a p_0 + b p_1) ||² / 2
    let row_cost = |target: [f64; 2], a: f64, b: f64| {
        let (p0, p1) = (p(0), p(1));
        let e0 = target[0] - a * p0[0] - b * p1[0];
        let e1 = target[1] - a * p0[1] - b * p1[1];
        0.5 * (e0 * e0 + e1 * e1)
    };
    let nuclear = |a: f64, b: f64, c: f64, d: f64| {
        let fro = a * a + b * b + c * c + d * d;
        (fro + 2.0 * (a * d - b * c).abs()).max(0.0).sqrt()
    };

    // incumbent from the coarse sub-grid of every 10th point
    let mut best = f64::INFINITY;
    let coarse: Vec<f64> = grid.iter().step_by(10).copied().collect();
    for &a in &coarse {
        for &b in &coarse {
            let q0 = row_cost(p(0), a, b);
            for &c in &coarse {
                for &d in &coarse {
                    best = best.min(q0 + row_cost(p(1), c, d) + lambda * nuclear(a, b, c, d));
                }
            }
        }
    }

    // (separable key, q, a, b)
    let mut rows: [Vec<(f64, f64, f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for (r, list) in rows.iter_mut().enumerate() {
        for &a in &grid {
            for &b in &grid {
                let q = row_cost(p(r), a, b);
                list.push((q + 0.5 * lambda * a.hypot(b), q, a, b));
            }
        }
    }
    let min_q: Vec<f64> = rows
        .iter()
        .map(|l| l.iter().map(|t| t.1).fold(f64::INFINITY, f64::min))
        .collect();
    for r in 0..2 {
        let other = min_q[1 - r];
        rows[r].retain(|t| t.1 + lambda * t.2.hypot(t.3) + other <= best);
        rows[r].sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    }
    let [first, second] = rows;
    let min_key = second.first().map_or(f64::INFINITY, |t| t.0);
    for &(k0, q0, a, b) in &first {
        if k0 + min_key > best {
            break;
        }
        for &(k1, q1, c, d) in &second {
            if k0 + k1 > best {
                break;
            }
            let f = q0 + q1 + lambda * nuclear(a, b, c, d);
            if f < best {
                best = f;
            }
        }
    }
    best
}

/// Orthogonal Procrustes: the rotation `Q` minimizing `||A - B Q||_F`.
pub fn procrustes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = (b.transpose() * a).svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

pub fn diameter(points: &DMatrix<f64>) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..points.nrows() {
        for j in i + 1..points.nrows() {
            best = best.max((points.row(i) - points.row(j)).norm());
        }
    }
    best
}

pub fn mean_row_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|i| (a.row(i) - b.row(i)).norm()).sum::<f64>() / a.nrows() as f64
}

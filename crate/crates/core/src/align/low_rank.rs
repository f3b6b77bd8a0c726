use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmParams {
    /// Penalty parameter, in units of the mean squared row norm of `P`.
    pub rho: f64,
    pub max_iters: usize,
    pub tol: f64,
    /// Residual balancing: halve or double the penalty whenever one residual
    /// exceeds the other tenfold.
    pub adaptive: bool,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 500,
            tol: 1e-6,
            adaptive: true,
        }
    }
}

const BALANCE_RATIO: f64 = 10.0;
const RHO_STEP: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct LowRankWeights {
    /// The thresholded iterate `Z`, an `n x n` matrix.
    pub weights: DMatrix<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Objective at `Z` after every iteration.
    pub objective_trace: Vec<f64>,
}

/// Default nuclear-norm weight: `0.01 * ||P||_F² / n`.
pub fn default_lambda(points: &DMatrix<f64>) -> f64 {
    0.01 * points.norm_squared() / points.nrows() as f64
}

/// `(1/2)||P - R P||_F² + lambda ||R||_*`.
pub fn low_rank_objective(points: &DMatrix<f64>, r: &DMatrix<f64>, lambda: f64) -> f64 {
    let residual = points - r * points;
    0.5 * residual.norm_squared() + lambda * r.singular_values().sum()
}

/// Singular-value soft thresholding. Returns the thresholded matrix and its
/// nuclear norm.
///
/// Works from the symmetric eigendecomposition `MᵀM = V S² Vᵀ`, giving
/// `M V diag(max(0, 1 - tau/s)) Vᵀ`. Singular values that lose precision in
/// `S²` are the tiny ones, and those are thresholded to zero anyway. nalgebra's
/// SVD can return singular vectors that do not reconstruct exactly
/// rank-deficient inputs, which ADMM iterates routinely are.
fn shrink(m: DMatrix<f64>, tau: f64) -> (DMatrix<f64>, f64) {
    let eigen = SymmetricEigen::new(m.transpose() * &m);
    let n = m.ncols();
    let mut scaled_v = DMatrix::zeros(n, n);
    let mut nuclear = 0.0;
    for (j, lambda) in eigen.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        if s > tau {
            let gain = 1.0 - tau / s;
            nuclear += s - tau;
            scaled_v.column_mut(j).copy_from(&(eigen.eigenvectors.column(j) * gain));
        }
    }
    if nuclear == 0.0 {
        return (DMatrix::zeros(m.nrows(), n), 0.0);
    }
    let projector = scaled_v * eigen.eigenvectors.transpose();
    (m * projector, nuclear)
}

/// Minimizes `(1/2)||P - R P||_F² + lambda ||R||_*` by ADMM on the split
/// `R = Z`.
///
/// The R-step solves `R (P Pᵀ + ρI) = P Pᵀ + ρ(Z - U)`, the Z-step
/// soft-thresholds the singular values of `R + U` by `lambda / ρ`, and
/// `U += R - Z`. Iteration stops once `||R - Z||_F` and `ρ||Z - Z_prev||_F`
/// both drop below `tol`; running out of iterations first is an error.
///
/// The objective is invariant under `P -> cP, lambda -> c² lambda`, so the
/// working penalty starts at `params.rho * ||P||_F² / n`; iterates are then
/// the same whatever the units of `P`. Residuals are reported relative to
/// that unit.
pub fn low_rank_weights(
    points: &DMatrix<f64>,
    lambda: f64,
    params: &AdmmParams,
) -> Result<LowRankWeights> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "low-rank weights need at least 2 points, got {n}"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite point coordinate".into()));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    if !(params.rho > 0.0 && params.rho.is_finite()) || !(params.tol > 0.0) || params.max_iters == 0 {
        return Err(Error::InvalidArgument(format!("invalid ADMM parameters {params:?}")));
    }

    let scale = points.norm_squared() / n as f64;
    let unit = if scale > 0.0 { scale } else { 1.0 };
    let gram = points * points.transpose();
    // (G + ρI) is SPD for ρ > 0.
    let factor = |rho: f64| {
        let mut system = gram.clone();
        for i in 0..n {
            system[(i, i)] += rho;
        }
        system
            .cholesky()
            .ok_or_else(|| Error::Eigensolver("Cholesky of P Pᵀ + ρI failed".into()))
    };

    let mut rho = params.rho * unit;
    let mut chol = factor(rho)?;
    let mut z = DMatrix::<f64>::zeros(n, n);
    let mut u = DMatrix::<f64>::zeros(n, n);
    let mut trace = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;

    for iter in 1..=params.max_iters {
        // R (G + ρI) = B  <=>  (G + ρI) Rᵀ = Bᵀ, both sides symmetric in G.
        let rhs = (&gram + (&z - &u) * rho).transpose();
        let r = chol.solve(&rhs).transpose();

        let (z_next, nuclear) = shrink(&r + &u, lambda / rho);
        u += &r - &z_next;

        primal = (&r - &z_next).norm();
        dual = rho / unit * (&z_next - &z).norm();
        z = z_next;

        let residual = points - &z * points;
        trace.push(0.5 * residual.norm_squared() + lambda * nuclear);

        if primal < params.tol && dual < params.tol {
            return Ok(LowRankWeights {
                weights: z,
                iterations: iter,
                primal_residual: primal,
                dual_residual: dual,
                objective_trace: trace,
            });
        }
        if params.adaptive {
            let next = if primal > BALANCE_RATIO * dual {
                rho * RHO_STEP
            } else if dual > BALANCE_RATIO * primal {
                rho / RHO_STEP
            } else {
                rho
            };
            if next != rho {
                // U is the dual variable scaled by 1/ρ.
                u *= rho / next;
                rho = next;
                chol = factor(rho)?;
            }
        }
    }
    Err(Error::NotConverged {
        iterations: params.max_iters,
        primal,
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn huge_lambda_drives_weights_to_zero() {
        let p = random_points(6, 3, 1);
        let lambda = 1e6 * p.norm_squared();
        let out = low_rank_weights(&p, lambda, &AdmmParams::default()).unwrap();
        assert!(out.weights.norm() < 1e-6);
    }

    #[test]
    fn objective_never_exceeds_zero_weights() {
        let p = random_points(20, 5, 2);
        let lambda = default_lambda(&p);
        let out = low_rank_weights(&p, lambda, &AdmmParams::default()).unwrap();
        let obj = low_rank_objective(&p, &out.weights, lambda);
        assert!(obj.is_finite());
        assert!(obj <= 0.5 * p.norm_squared());
        assert!(out.primal_residual < 1e-6);
    }

    #[test]
    fn reports_non_convergence() {
        let p = random_points(10, 4, 3);
        let params = AdmmParams {
            max_iters: 2,
            ..AdmmParams::default()
        };
        assert!(matches!(
            low_rank_weights(&p, default_lambda(&p), &params),
            Err(Error::NotConverged { iterations: 2, .. })
        ));
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = random_points(4, 2, 4);
        assert!(low_rank_weights(&p, 0.0, &AdmmParams::default()).is_err());
        assert!(low_rank_weights(&p, 0.1, &AdmmParams { rho: 0.0, ..AdmmParams::default() }).is_err());
        assert!(low_rank_weights(&random_points(1, 2, 0), 0.1, &AdmmParams::default()).is_err());
    }
}

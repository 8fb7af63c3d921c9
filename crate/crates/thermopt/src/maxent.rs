//! Minimal-information-gain (maximum-entropy) measurement of discrete
//! random vectors.
//!
//! A measurement fixes a base measure q on k outcomes, a random vector
//! X with values in R^d and a target expectation x. The extremal density
//! is rho = exp(<lambda, X>) / Z(lambda) and the dual potential
//! H(lambda) = -ln Z(lambda) satisfies x = -dH/dlambda on the solution.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::simplex::hull_interior_margin;

/// Tolerance of the hull-membership LP: targets with a smaller interior
/// margin are treated as unreachable by any finite dual vector.
pub const HULL_TOL: f64 = 1e-10;
/// Default moment-matching tolerance for the Newton solver.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Newton iteration budget.
pub const MAX_NEWTON_ITER: usize = 100;

/// A discrete moment problem: base measure, random vector values, target mean.
#[derive(Debug, Clone)]
pub struct DiscreteMeasurement {
    base_probs: Vec<f64>,
    random_vector: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl DiscreteMeasurement {
    /// Validates positivity and normalization of the base measure and the
    /// shape of the value table. Hull membership of the target is checked
    /// lazily by `solve_lambda` (construction never runs the LP).
    pub fn new(
        base_probs: Vec<f64>,
        random_vector: Vec<Vec<f64>>,
        target: Vec<f64>,
    ) -> Result<Self> {
        if base_probs.is_empty() {
            return Err(Error::Domain("empty outcome set".into()));
        }
        if base_probs.iter().any(|&q| !(q > 0.0) || !q.is_finite()) {
            return Err(Error::Domain(
                "base probabilities must be strictly positive".into(),
            ));
        }
        let total: f64 = base_probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "base probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        if random_vector.len() != base_probs.len() {
            return Err(Error::Domain(
                "one value vector per outcome required".into(),
            ));
        }
        let d = target.len();
        if d == 0 || random_vector.iter().any(|v| v.len() != d) {
            return Err(Error::Domain(
                "value vectors and target must share a dimension".into(),
            ));
        }
        if random_vector
            .iter()
            .flatten()
            .chain(target.iter())
            .any(|x| !x.is_finite())
        {
            return Err(Error::Domain("values and target must be finite".into()));
        }
        Ok(Self {
            base_probs,
            random_vector,
            target,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.base_probs.len()
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn base_probs(&self) -> &[f64] {
        &self.base_probs
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.random_vector
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Replace the target (used when sweeping a family of measurements).
    pub fn with_target(&self, target: Vec<f64>) -> Result<Self> {
        Self::new(self.base_probs.clone(), self.random_vector.clone(), target)
    }

    fn dot_values(&self, lambda: &[f64], i: usize) -> f64 {
        self.random_vector[i]
            .iter()
            .zip(lambda)
            .map(|(x, l)| x * l)
            .sum()
    }

    /// ln Z(lambda) via a log-sum-exp shift by max_i <lambda, X_i>.
    pub fn ln_partition(&self, lambda: &[f64]) -> f64 {
        let mut shift = f64::NEG_INFINITY;
        for i in 0..self.outcomes() {
            shift = shift.max(self.dot_values(lambda, i));
        }
        let sum: f64 = (0..self.outcomes())
            .map(|i| self.base_probs[i] * (self.dot_values(lambda, i) - shift).exp())
            .sum();
        shift + sum.ln()
    }

    /// Probabilities p_i = q_i exp(<lambda, X_i>) / Z under the tilted measure.
    fn tilted_probs(&self, lambda: &[f64]) -> Vec<f64> {
        let ln_z = self.ln_partition(lambda);
        (0..self.outcomes())
            .map(|i| self.base_probs[i] * (self.dot_values(lambda, i) - ln_z).exp())
            .collect()
    }

    /// Mean of X under the tilted measure, equal to -dH/dlambda.
    pub fn tilted_mean(&self, lambda: &[f64]) -> Vec<f64> {
        let p = self.tilted_probs(lambda);
        let mut mean = vec![0.0; self.dim()];
        for (i, pi) in p.iter().enumerate() {
            for (m, x) in mean.iter_mut().zip(&self.random_vector[i]) {
                *m += pi * x;
            }
        }
        mean
    }

    /// Covariance of X under the tilted measure (the exact Newton Hessian).
    fn tilted_covariance(&self, lambda: &[f64]) -> DMatrix<f64> {
        let p = self.tilted_probs(lambda);
        let mean = self.tilted_mean(lambda);
        let d = self.dim();
        let mut cov = DMatrix::zeros(d, d);
        for (i, pi) in p.iter().enumerate() {
            let xi = &self.random_vector[i];
            for r in 0..d {
                for c in 0..d {
                    cov[(r, c)] += pi * (xi[r] - mean[r]) * (xi[c] - mean[c]);
                }
            }
        }
        cov
    }
}

/// Converged solution of the moment problem.
#[derive(Debug, Clone, Serialize)]
pub struct MaxEntSolution {
    /// Dual variables lambda.
    pub lambda: Vec<f64>,
    /// Density rho per outcome (so p_i = rho_i q_i).
    pub density: Vec<f64>,
    /// H(lambda) = -ln Z(lambda).
    pub hamiltonian: f64,
    /// Relative entropy of the tilted measure against the base measure.
    pub info_gain: f64,
}

/// Partition function Z(lambda) = sum_i q_i exp(<lambda, X_i>).
///
/// Evaluated through the log-sum-exp shift; only the final exponentiation
/// can overflow, which is reported as a range error.
pub fn partition_function(m: &DiscreteMeasurement, lambda: &[f64]) -> Result<f64> {
    if lambda.len() != m.dim() {
        return Err(Error::Domain("lambda dimension mismatch".into()));
    }
    if lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::Domain("lambda must be finite".into()));
    }
    let ln_z = m.ln_partition(lambda);
    let z = ln_z.exp();
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Range(format!(
            "partition function overflow: ln Z = {ln_z}"
        )));
    }
    Ok(z)
}

/// Newton iteration on the moment-matching system -dH/dlambda = x with
/// the exact covariance Hessian and Armijo backtracking on the convex dual
/// f(lambda) = ln Z(lambda) - <lambda, x>.
pub fn solve_lambda(m: &DiscreteMeasurement, tol: f64) -> Result<MaxEntSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    match hull_interior_margin(m.values(), m.target()) {
        Some(margin) if margin > HULL_TOL => {}
        _ => {
            return Err(Error::Infeasible(
                "target is not strictly inside the convex hull of the random vector values".into(),
            ))
        }
    }

    let d = m.dim();
    let x = DVector::from_column_slice(m.target());
    let res_norm_at = |lam: &[f64]| (DVector::from_vec(m.tilted_mean(lam)) - &x).norm();

    let mut lambda = vec![0.0; d];
    for iter in 0..MAX_NEWTON_ITER {
        let mean = DVector::from_vec(m.tilted_mean(&lambda));
        let residual = &mean - &x;
        let res_norm = residual.norm();
        if res_norm <= tol {
            return Ok(finish(m, lambda));
        }
        let cov = m.tilted_covariance(&lambda);
        // Newton step: cov * delta = -residual; ridge fallback for rank
        // deficient value sets (targets in a lower-dimensional hull).
        let mut step = cov.clone().lu().solve(&(-&residual));
        if step.is_none() {
            let ridge = &cov + DMatrix::identity(d, d) * 1e-12;
            step = ridge.lu().solve(&(-&residual));
        }
        let step = step.ok_or(Error::NoConvergence {
            iterations: iter,
            residual: res_norm,
        })?;

        // Backtracking on the residual norm; once inside the quadratic
        // convergence basin the full step is always productive and a
        // sufficient-decrease test would drown in rounding noise.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = lambda
                .iter()
                .zip(step.iter())
                .map(|(l, s)| l + t * s)
                .collect();
            let cand_norm = res_norm_at(&cand);
            if cand_norm <= tol || cand_norm <= (1.0 - 1e-4 * t) * res_norm {
                lambda = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual: res_norm,
            });
        }
    }
    let final_norm = res_norm_at(&lambda);
    if final_norm <= tol {
        return Ok(finish(m, lambda));
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON_ITER,
        residual: final_norm,
    })
}

fn finish(m: &DiscreteMeasurement, lambda: Vec<f64>) -> MaxEntSolution {
    let ln_z = m.ln_partition(&lambda);
    let density: Vec<f64> = (0..m.outcomes())
        .map(|i| (m.dot_values(&lambda, i) - ln_z).exp())
        .collect();
    let hamiltonian = -ln_z;
    let sol = MaxEntSolution {
        info_gain: 0.0,
        lambda,
        density,
        hamiltonian,
    };
    let info_gain = information_gain(m, &sol);
    MaxEntSolution { info_gain, ..sol }
}

/// Information gain I = sum_i rho_i ln(rho_i) q_i of a converged solution.
pub fn information_gain(m: &DiscreteMeasurement, s: &MaxEntSolution) -> f64 {
    s.density
        .iter()
        .zip(m.base_probs())
        .map(|(rho, q)| rho * rho.ln() * q)
        .sum()
}

/// Variance matrix sigma_2(X) = mu_2 - mu_1 (x) mu_1 under the tilted
/// measure; equals -Hess(H) at the solution's lambda.
pub fn variance_matrix(m: &DiscreteMeasurement, s: &MaxEntSolution) -> DMatrix<f64> {
    m.tilted_covariance(&s.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn two_point(target: f64) -> DiscreteMeasurement {
        DiscreteMeasurement::new(vec![0.5, 0.5], vec![vec![0.0], vec![1.0]], vec![target]).unwrap()
    }

    #[test]
    fn partition_function_values() {
        let m = two_point(0.5);
        assert_relative_eq!(
            partition_function(&m, &[0.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            partition_function(&m, &[3.0f64.ln()]).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        let m3 = DiscreteMeasurement::new(
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![vec![-1.0], vec![0.0], vec![1.0]],
            vec![0.0],
        )
        .unwrap();
        assert_relative_eq!(
            partition_function(&m3, &[0.0]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn partition_function_overflow_is_range_error() {
        let m = two_point(0.5);
        assert!(matches!(
            partition_function(&m, &[800.0]),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn symmetric_target_gives_zero_lambda() {
        let s = solve_lambda(&two_point(0.5), 1e-12).unwrap();
        assert!(s.lambda[0].abs() < 1e-10);
        assert!(s.density.iter().all(|r| (r - 1.0).abs() < 1e-10));
        assert!(s.info_gain.abs() < 1e-12);
    }

    #[test]
    fn closed_form_two_point_solution() {
        let s = solve_lambda(&two_point(0.75), 1e-12).unwrap();
        assert_relative_eq!(s.lambda[0], 3.0f64.ln(), epsilon = 1e-9);
        let expected_i = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_relative_eq!(s.info_gain, expected_i, epsilon = 1e-10);
        assert_relative_eq!(
            s.info_gain,
            s.hamiltonian + s.lambda[0] * 0.75,
            epsilon = 1e-10
        );
    }

    #[test]
    fn boundary_target_is_infeasible() {
        assert!(matches!(
            solve_lambda(&two_point(1.0), 1e-10),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            solve_lambda(&two_point(1.5), 1e-10),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn bernoulli_variances() {
        let s = solve_lambda(&two_point(0.5), 1e-12).unwrap();
        let v = variance_matrix(&two_point(0.5), &s);
        assert_relative_eq!(v[(0, 0)], 0.25, epsilon = 1e-12);
        let m = two_point(0.75);
        let s = solve_lambda(&m, 1e-12).unwrap();
        let v = variance_matrix(&m, &s);
        assert_relative_eq!(v[(0, 0)], 0.1875, epsilon = 1e-9);
    }

    #[test]
    fn product_measure_has_diagonal_variance() {
        // two independent biased coins as a d=2 measurement
        let mut probs = Vec::new();
        let mut vals = Vec::new();
        for (i, qi) in [0.3, 0.7].iter().enumerate() {
            for (j, qj) in [0.6, 0.4].iter().enumerate() {
                probs.push(qi * qj);
                vals.push(vec![i as f64, j as f64]);
            }
        }
        let m = DiscreteMeasurement::new(probs, vals, vec![0.5, 0.5]).unwrap();
        let s = solve_lambda(&m, 1e-12).unwrap();
        let v = variance_matrix(&m, &s);
        assert!(v[(0, 1)].abs() < 1e-10);
        assert!(v[(1, 0)].abs() < 1e-10);
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> DiscreteMeasurement {
        let k = rng.random_range(3..=10);
        let d = rng.random_range(1..=3);
        let mut probs: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        // renormalize exactly enough for the 1e-12 gate
        let total: f64 = probs.iter().sum();
        probs[0] += 1.0 - total;
        let vals: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        // convex combination with interior weights gives a strictly
        // interior target
        let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let tw: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= tw);
        let target: Vec<f64> = (0..d)
            .map(|j| vals.iter().zip(&w).map(|(v, wi)| v[j] * wi).sum())
            .collect();
        DiscreteMeasurement::new(probs, vals, target).unwrap()
    }

    #[test]
    fn random_instances_satisfy_duality_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let m = random_instance(&mut rng);
            let s = match solve_lambda(&m, 1e-11) {
                Ok(s) => s,
                Err(Error::Infeasible(_)) => continue, // degenerate random geometry
                Err(e) => panic!("solver failed: {e}"),
            };
            // moment matching
            let mass: f64 = s
                .density
                .iter()
                .zip(m.base_probs())
                .map(|(r, q)| r * q)
                .sum();
            assert!((mass - 1.0).abs() <= 1e-10);
            let mean = m.tilted_mean(&s.lambda);
            for (mu, x) in mean.iter().zip(m.target()) {
                assert!((mu - x).abs() <= 1e-10);
            }
            // duality identity
            let pairing: f64 = s.lambda.iter().zip(m.target()).map(|(l, x)| l * x).sum();
            assert!((s.info_gain - (s.hamiltonian + pairing)).abs() <= 1e-10);
            assert!(s.info_gain >= -1e-12);
        }
    }

    /// Independent oracle for -Hess(H): central differences (step 1e-5) of
    /// the exponential-family mean, recomputed from scratch per call.
    pub(super) fn neg_hessian_fd(m: &DiscreteMeasurement, lambda: &[f64]) -> Vec<Vec<f64>> {
        let mean_at = |lam: &[f64]| -> Vec<f64> {
            let dots: Vec<f64> = m
                .values()
                .iter()
                .map(|xi| xi.iter().zip(lam).map(|(x, l)| x * l).sum::<f64>())
                .collect();
            let shift = dots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = dots
                .iter()
                .zip(m.base_probs())
                .map(|(d, q)| q * (d - shift).exp())
                .collect();
            let z: f64 = weights.iter().sum();
            (0..m.dim())
                .map(|j| {
                    weights
                        .iter()
                        .zip(m.values())
                        .map(|(w, xi)| w * xi[j])
                        .sum::<f64>()
                        / z
                })
                .collect()
        };
        let d = m.dim();
        let h = 1e-5;
        let mut out = vec![vec![0.0; d]; d];
        for col in 0..d {
            let mut lp = lambda.to_vec();
            let mut lm = lambda.to_vec();
            lp[col] += h;
            lm[col] -= h;
            let mp = mean_at(&lp);
            let mm = mean_at(&lm);
            for (row, o) in out.iter_mut().enumerate() {
                // -Hess(H)[row][col] = d mean_row / d lambda_col
                o[col] = (mp[row] - mm[row]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn variance_equals_negative_hessian_by_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_instance(&mut rng);
            let s = match solve_lambda(&m, 1e-11) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let v = variance_matrix(&m, &s);
            let h = neg_hessian_fd(&m, &s.lambda);
            for r in 0..m.dim() {
                for c in 0..m.dim() {
                    assert!(
                        (v[(r, c)] - h[r][c]).abs() <= 1e-8,
                        "variance vs -Hess(H) mismatch: {} vs {}",
                        v[(r, c)],
                        h[r][c]
                    );
                }
            }
            // positive semidefiniteness of -Hess(H) == variance
            let eig = v.clone().symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e >= -1e-10));
        }
    }

    #[test]
    fn legendrian_identity_along_target_family() {
        // x(t) moves smoothly inside the hull; dI/dt must equal <lambda, dx/dt>
        let base = DiscreteMeasurement::new(
            vec![0.25, 0.25, 0.25, 0.25],
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 1.0],
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let x_of_t = |t: f64| vec![0.5 + 0.2 * t.sin(), 0.5 + 0.1 * (2.0 * t).cos() - 0.1];
        let info = |t: f64| {
            let m = base.with_target(x_of_t(t)).unwrap();
            solve_lambda(&m, 1e-13).unwrap().info_gain
        };
        for &t in &[0.0, 0.4, 1.1, 2.0] {
            let h = 1e-5;
            let di_dt = (info(t + h) - info(t - h)) / (2.0 * h);
            let m = base.with_target(x_of_t(t)).unwrap();
            let s = solve_lambda(&m, 1e-13).unwrap();
            let xp = x_of_t(t + h);
            let xm = x_of_t(t - h);
            let dx_dt: Vec<f64> = xp
                .iter()
                .zip(&xm)
                .map(|(p, q)| (p - q) / (2.0 * h))
                .collect();
            let pairing: f64 = s.lambda.iter().zip(&dx_dt).map(|(l, v)| l * v).sum();
            assert!(
                (di_dt - pairing).abs() <= 1e-6,
                "dI/dt = {di_dt}, <lambda, dx/dt> = {pairing}"
            );
        }
    }

    #[test]
    fn invalid_measurements_rejected() {
        assert!(
            DiscreteMeasurement::new(vec![0.5, 0.6], vec![vec![0.0], vec![1.0]], vec![0.5])
                .is_err()
        );
        assert!(
            DiscreteMeasurement::new(vec![0.5, -0.5], vec![vec![0.0], vec![1.0]], vec![0.5])
                .is_err()
        );
        assert!(DiscreteMeasurement::new(vec![1.0], vec![vec![0.0, 1.0]], vec![0.5]).is_err());
    }
}

//! Closed-form proximal operator of the sparse group lasso penalty and the
//! Euclidean projection onto nonnegative matrices.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Weights of F(u) = lambda·‖u‖₂ + mu·‖u‖₁ + rho/2·‖u − v‖₂².
#[derive(Debug, Clone, Copy)]
pub struct ProxParams {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

impl ProxParams {
    pub fn new(lambda: f64, mu: f64, rho: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {lambda}")));
        }
        if !(mu >= 0.0) {
            return Err(Error::Config(format!("mu must be ≥ 0, got {mu}")));
        }
        if !(rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {rho}")));
        }
        Ok(Self { lambda, mu, rho })
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Minimizer of F(u) = lambda·‖u‖₂ + mu·‖u‖₁ + rho/2·‖u − v‖₂²:
///
///   u* = ((‖w‖₂ − lambda) / (rho·‖w‖₂))⁺ · w,
///   w_i = rho · sgn(v_i) · (|v_i| − mu/rho)⁺.
///
/// The scale factor is defined as 0 whenever ‖w‖₂ ≤ lambda, which covers
/// w = 0 without dividing by zero.
pub fn sparse_group_prox(v: ArrayView1<'_, f64>, params: &ProxParams) -> Array1<f64> {
    let ProxParams { lambda, mu, rho } = *params;
    let w: Array1<f64> = v.mapv(|vi| rho * sgn(vi) * (vi.abs() - mu / rho).max(0.0));
    let wnorm = w.dot(&w).sqrt();
    if wnorm <= lambda {
        return Array1::zeros(v.len());
    }
    let scale = (wnorm - lambda) / (rho * wnorm);
    w * scale
}

/// Elementwise max(entry, 0): Euclidean projection onto the nonnegative
/// orthant.
pub fn nonneg_project(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|x| x.max(0.0))
}

#[doc(hidden)]
pub mod oracle {
    //! Independent test oracles for the closed-form prox: a plain
    //! subgradient-descent minimizer of F and a subdifferential optimality
    //! certificate. Used by the test suites only; not part of the API.

    use super::*;

    pub fn f_value(u: &Array1<f64>, v: ArrayView1<'_, f64>, p: &ProxParams) -> f64 {
        let l2 = u.dot(u).sqrt();
        let l1: f64 = u.iter().map(|x| x.abs()).sum();
        let quad: f64 = u
            .iter()
            .zip(v.iter())
            .map(|(ui, vi)| (ui - vi) * (ui - vi))
            .sum();
        p.lambda * l2 + p.mu * l1 + 0.5 * p.rho * quad
    }

    /// Subgradient descent with step 1/k, starting from v.
    pub fn subgradient_minimize(v: ArrayView1<'_, f64>, p: &ProxParams, iters: usize) -> Array1<f64> {
        let mut u = v.to_owned();
        for k in 1..=iters {
            let step = 1.0 / k as f64;
            let norm = u.dot(&u).sqrt();
            let mut g = Array1::<f64>::zeros(u.len());
            for i in 0..u.len() {
                let group = if norm > 0.0 { p.lambda * u[i] / norm } else { 0.0 };
                g[i] = group + p.mu * sgn(u[i]) + p.rho * (u[i] - v[i]);
            }
            u.scaled_add(-step, &g);
        }
        u
    }

    /// Worst violation of 0 ∈ ∂F(u) checked coordinatewise: for nonzero
    /// coordinates |lambda·u_i/‖u‖ + mu·sgn(u_i) + rho(u_i − v_i)|, for zero
    /// coordinates the distance of the smooth part outside [−mu, mu]; for
    /// u = 0 the Case-1 condition ‖w‖₂ ≤ lambda.
    pub fn optimality_violation(u: &Array1<f64>, v: ArrayView1<'_, f64>, p: &ProxParams) -> f64 {
        let norm = u.dot(u).sqrt();
        if norm == 0.0 {
            let w: Array1<f64> =
                v.mapv(|vi| p.rho * sgn(vi) * (vi.abs() - p.mu / p.rho).max(0.0));
            let wnorm = w.dot(&w).sqrt();
            return (wnorm - p.lambda).max(0.0);
        }
        let mut worst = 0.0f64;
        for i in 0..u.len() {
            let smooth = p.lambda * u[i] / norm + p.rho * (u[i] - v[i]);
            let viol = if u[i] != 0.0 {
                (smooth + p.mu * sgn(u[i])).abs()
            } else {
                (smooth.abs() - p.mu).max(0.0)
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::optimality_violation;
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_penalty_returns_v() {
        let v = array![1.5, -2.0, 0.0, 3.25];
        let p = ProxParams::new(0.0, 0.0, 1.0).unwrap();
        let u = sparse_group_prox(v.view(), &p);
        assert_eq!(u, v);
    }

    #[test]
    fn small_inputs_threshold_to_zero() {
        // max|v_i| ≤ mu/rho ⟹ w = 0 ⟹ u* = 0
        let v = array![0.4, -0.5, 0.2];
        let p = ProxParams::new(0.3, 1.0, 2.0).unwrap(); // mu/rho = 0.5
        let u = sparse_group_prox(v.view(), &p);
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matches_subgradient_oracle_on_spec_instance() {
        let v = array![3.0, -1.0];
        let p = ProxParams::new(1.0, 1.0, 1.0).unwrap();
        let u = sparse_group_prox(v.view(), &p);
        let u_oracle = oracle::subgradient_minimize(v.view(), &p, 100_000);
        for i in 0..2 {
            assert!(
                (u[i] - u_oracle[i]).abs() < 1e-4,
                "coord {i}: closed form {} vs oracle {}",
                u[i],
                u_oracle[i]
            );
        }
        assert!(optimality_violation(&u, v.view(), &p) <= 1e-8);
    }

    #[test]
    fn certificate_holds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let v = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 6.0 - 3.0);
            let p = ProxParams::new(
                rng.random::<f64>() * 2.0,
                rng.random::<f64>() * 2.0,
                0.5 + rng.random::<f64>() * 2.0,
            )
            .unwrap();
            let u = sparse_group_prox(v.view(), &p);
            let viol = optimality_violation(&u, v.view(), &p);
            assert!(viol <= 1e-8, "certificate violation {viol}");
            // u* beats random probes
            let fu = oracle::f_value(&u, v.view(), &p);
            for _ in 0..50 {
                let z = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 6.0 - 3.0);
                let fz = oracle::f_value(&z, v.view(), &p);
                assert!(fu <= fz + 1e-8);
            }
        }
    }

    #[test]
    fn norm_is_monotone_and_continuous_in_lambda() {
        let v = array![2.0, -1.0, 0.7, 0.0, -3.1];
        let mu = 0.3;
        let rho = 1.2;
        let w: Array1<f64> = v.mapv(|vi| rho * sgn(vi) * (vi.abs() - mu / rho).max(0.0));
        let wnorm = w.dot(&w).sqrt();
        let mut prev = f64::INFINITY;
        for step in 0..=60 {
            let lambda = wnorm * step as f64 / 50.0; // crosses the boundary at step 50
            let p = ProxParams::new(lambda, mu, rho).unwrap();
            let u = sparse_group_prox(v.view(), &p);
            let norm = u.dot(&u).sqrt();
            assert!(norm <= prev + 1e-12, "‖u*‖ increased as lambda grew");
            prev = norm;
        }
        // continuity at the boundary: just below lambda = ‖w‖ the norm is ~0
        let eps = 1e-9;
        let p = ProxParams::new(wnorm - eps, mu, rho).unwrap();
        let u = sparse_group_prox(v.view(), &p);
        assert!(u.dot(&u).sqrt() < 1e-8);
    }

    #[test]
    fn nonneg_project_examples() {
        let a = array![[-1.0, 2.0], [0.0, -3.0]];
        let pr = nonneg_project(&a);
        assert_eq!(pr, array![[0.0, 2.0], [0.0, 0.0]]);

        let all_neg = array![[-1.0, -2.0], [-0.5, -3.0]];
        assert!(nonneg_project(&all_neg).iter().all(|&x| x == 0.0));

        let all_pos = array![[1.0, 2.0], [0.5, 3.0]];
        assert_eq!(nonneg_project(&all_pos), all_pos);
    }

    #[test]
    fn nonneg_project_idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let a = Array2::from_shape_fn((4, 5), |_| rng.random::<f64>() * 4.0 - 2.0);
            let b = Array2::from_shape_fn((4, 5), |_| rng.random::<f64>() * 4.0 - 2.0);
            let pa = nonneg_project(&a);
            assert_eq!(nonneg_project(&pa), pa);
            let pb = nonneg_project(&b);
            let dist_before = crate::linalg::frob(&(&a - &b));
            let dist_after = crate::linalg::frob(&(&pa - &pb));
            assert!(dist_after <= dist_before + 1e-12);
        }
    }
}

//! Matrix-variable ADMM for the sparse factorization problem
//!
//!   minimize ½‖R − UWY‖_F² + lambda·Σ_j ‖W_j‖₂ + mu·‖W‖₁   s.t. U ≥ 0,
//!
//! solved by splitting on auxiliaries A = U, B = W with duals C, D. Each
//! iteration runs the six updates in order A, B, U, W, C, D; the A step is a
//! ridge-type solve, the B step a Sylvester solve reusing one Schur
//! factorization of YYᵀ per fit, U is a nonnegative projection and W a
//! per-column sparse group lasso prox.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_solve, frob, solve_sylvester, sylvester_rhs_schur, SchurFactors, SylvesterProblem,
};
use crate::prox::{nonneg_project, sparse_group_prox, ProxParams};

/// Solver knobs. `tol_primal` is the relative primal-residual tolerance on
/// both splitting constraints.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub d: usize,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            d: 10,
            lambda: 0.1,
            mu: 0.01,
            rho: 1.0,
            max_iters: 500,
            tol_primal: 1e-4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::Config("d must be ≥ 1".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::Config(format!("mu must be ≥ 0, got {}", self.mu)));
        }
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {}", self.rho)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be ≥ 1".into()));
        }
        if !(self.tol_primal > 0.0) {
            return Err(Error::Config(format!(
                "tol_primal must be > 0, got {}",
                self.tol_primal
            )));
        }
        Ok(())
    }

    fn prox_params(&self) -> ProxParams {
        ProxParams {
            lambda: self.lambda,
            mu: self.mu,
            rho: self.rho,
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// ‖A − U‖_F / max(1, ‖U‖_F)
    pub residual_u: f64,
    /// ‖B − W‖_F / max(1, ‖W‖_F)
    pub residual_w: f64,
}

/// Full iterate state: auxiliaries A, B; primal U, W; duals C, D.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub c: Array2<f64>,
    pub d_dual: Array2<f64>,
    pub iter: usize,
    pub history: Vec<IterationRecord>,
}

/// The learned factors: nonnegative per-stock rows `u` (n×d) and the
/// word-to-factor map `w` (d×m).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub u: Array2<f64>,
    pub w: Array2<f64>,
}

impl FactorModel {
    pub fn n_stocks(&self) -> usize {
        self.u.nrows()
    }
    pub fn n_factors(&self) -> usize {
        self.u.ncols()
    }
    pub fn n_words(&self) -> usize {
        self.w.ncols()
    }
}

fn check_conformable(
    r: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    u: &Array2<f64>,
    w: &Array2<f64>,
) -> Result<()> {
    let (n, s) = (r.nrows(), r.ncols());
    let (m, sy) = (y.nrows(), y.ncols());
    if s != sy {
        return Err(Error::Dimension(format!(
            "returns cover {s} days but intensities cover {sy}"
        )));
    }
    if u.nrows() != n || w.ncols() != m || u.ncols() != w.nrows() {
        return Err(Error::Dimension(format!(
            "factor shapes u {}x{}, w {}x{} do not match data n={n}, m={m}",
            u.nrows(),
            u.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// ½‖R − UWY‖_F² + lambda·Σ_j ‖W_j‖₂ + mu·‖W‖₁ (elementwise ℓ₁).
pub fn objective(
    r: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    u: &Array2<f64>,
    w: &Array2<f64>,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_conformable(r, y, u, w)?;
    let fit = &r.to_owned() - &u.dot(&w.dot(&y));
    let loss = 0.5 * fit.iter().map(|v| v * v).sum::<f64>();
    Ok(loss + penalty(w, cfg))
}

fn penalty(w: &Array2<f64>, cfg: &SolverConfig) -> f64 {
    let group: f64 = w
        .columns()
        .into_iter()
        .map(|col| col.dot(&col).sqrt())
        .sum();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    cfg.lambda * group + cfg.mu * l1
}

/// Augmented Lagrangian L_rho at the given state. Infinite when U has a
/// negative entry (the indicator term).
pub fn augmented_lagrangian(
    r: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    state: &AdmmState,
    cfg: &SolverConfig,
) -> f64 {
    if state.u.iter().any(|&v| v < 0.0) {
        return f64::INFINITY;
    }
    let fit = &r.to_owned() - &state.a.dot(&state.b.dot(&y));
    let loss = 0.5 * fit.iter().map(|v| v * v).sum::<f64>();
    let gap_a = &state.a - &state.u;
    let gap_b = &state.b - &state.w;
    let lin_a: f64 = state.c.iter().zip(gap_a.iter()).map(|(c, g)| c * g).sum();
    let lin_b: f64 = state
        .d_dual
        .iter()
        .zip(gap_b.iter())
        .map(|(d, g)| d * g)
        .sum();
    let quad_a: f64 = gap_a.iter().map(|g| g * g).sum();
    let quad_b: f64 = gap_b.iter().map(|g| g * g).sum();
    loss + penalty(&state.w, cfg) + lin_a + lin_b + 0.5 * cfg.rho * (quad_a + quad_b)
}

struct FitCache {
    /// YYᵀ (m×m), fixed across iterations.
    yyt: Array2<f64>,
    /// RYᵀ (n×m), fixed across iterations.
    ryt: Array2<f64>,
}

impl FitCache {
    fn build(r: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Self {
        let yt = y.t();
        Self {
            yyt: y.dot(&yt),
            ryt: r.dot(&yt),
        }
    }
}

fn update_a_cached(state: &AdmmState, cache: &FitCache, cfg: &SolverConfig) -> Result<Array2<f64>> {
    // A* = (RYᵀBᵀ − C + rho·U)(BYYᵀBᵀ + rho·I)⁻¹, via SPD solve on the transpose
    let d = state.a.ncols();
    let rhs = &cache.ryt.dot(&state.b.t()) - &state.c + &(cfg.rho * &state.u);
    let mut normal = state.b.dot(&cache.yyt).dot(&state.b.t());
    for i in 0..d {
        normal[[i, i]] += cfg.rho;
    }
    let at = cholesky_solve(&normal, &rhs.t().to_owned())?;
    Ok(at.t().to_owned())
}

/// Closed-form minimizer of L_rho in A.
pub fn update_a(
    state: &AdmmState,
    r: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) -> Result<Array2<f64>> {
    update_a_cached(state, &FitCache::build(r, y), cfg)
}

fn update_b_cached(
    state: &AdmmState,
    cache: &FitCache,
    cfg: &SolverConfig,
    yyt_schur: &SchurFactors,
) -> Result<Array2<f64>> {
    // (1/rho·AᵀA)·B·(YYᵀ) + B = (1/rho)(AᵀRYᵀ − D) + W
    let a_syl = state.a.t().dot(&state.a) / cfg.rho;
    let c_syl = &(&state.a.t().dot(&cache.ryt) - &state.d_dual) / cfg.rho + &state.w;
    let p = SylvesterProblem::with_precomputed(&a_syl, &cache.yyt, &c_syl, yyt_schur)?;
    solve_sylvester(&p)
}

/// Minimizer of L_rho in B: a Sylvester solve with the A-side Hessenberg
/// reduction done fresh and the YYᵀ Schur factors passed in (they are fixed
/// per fit, see [`sylvester_rhs_schur`]).
pub fn update_b(
    state: &AdmmState,
    r: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
    yyt_schur: &SchurFactors,
) -> Result<Array2<f64>> {
    update_b_cached(state, &FitCache::build(r, y), cfg, yyt_schur)
}

/// U ← (A + C/rho)⁺
pub fn update_u(state: &AdmmState, cfg: &SolverConfig) -> Array2<f64> {
    nonneg_project(&(&state.a + &(&state.c / cfg.rho)))
}

/// W_j ← prox of the sparse group lasso at B_j + D_j/rho, per column.
pub fn update_w(state: &AdmmState, cfg: &SolverConfig) -> Array2<f64> {
    let params = cfg.prox_params();
    let target = &state.b + &(&state.d_dual / cfg.rho);
    let mut w = Array2::<f64>::zeros(target.dim());
    for (j, col) in target.columns().into_iter().enumerate() {
        let wj = sparse_group_prox(col, &params);
        w.column_mut(j).assign(&wj);
    }
    w
}

/// C ← C + rho(A − U), D ← D + rho(B − W).
pub fn update_duals(state: &AdmmState, cfg: &SolverConfig) -> (Array2<f64>, Array2<f64>) {
    let c = &state.c + &(cfg.rho * &(&state.a - &state.u));
    let d = &state.d_dual + &(cfg.rho * &(&state.b - &state.w));
    (c, d)
}

fn all_finite(m: &Array2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Run the full ADMM loop until both relative primal residuals fall below
/// `tol_primal` or `max_iters` is reached.
///
/// Initialization: U and A filled i.i.d. uniform [0,1)/√d from the seeded
/// generator (U drawn first, row-major), B = W = 0, C = D = 0. Identical
/// seed, config and data reproduce the result bit for bit.
pub fn fit(
    r: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &SolverConfig,
) -> Result<(FactorModel, AdmmState)> {
    cfg.validate()?;
    let (n, s) = (r.nrows(), r.ncols());
    let (m, sy) = (y.nrows(), y.ncols());
    if s != sy {
        return Err(Error::Dimension(format!(
            "returns cover {s} days but intensities cover {sy}"
        )));
    }
    if n == 0 || m == 0 || s == 0 {
        return Err(Error::Dimension("empty training data".into()));
    }
    if r.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data contains NaN or infinity".into()));
    }
    if y.iter().any(|&v| v < 0.0) {
        return Err(Error::Data("word intensities must be nonnegative".into()));
    }

    let d = cfg.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = 1.0 / (d as f64).sqrt();
    let u0 = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * scale);
    let a0 = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * scale);

    let mut state = AdmmState {
        a: a0,
        b: Array2::zeros((d, m)),
        u: u0,
        w: Array2::zeros((d, m)),
        c: Array2::zeros((n, d)),
        d_dual: Array2::zeros((d, m)),
        iter: 0,
        history: Vec::new(),
    };

    let cache = FitCache::build(r, y);
    let yyt_schur = sylvester_rhs_schur(&cache.yyt)?;

    for iter in 1..=cfg.max_iters {
        state.a = update_a_cached(&state, &cache, cfg)?;
        state.b = update_b_cached(&state, &cache, cfg, &yyt_schur)?;
        state.u = update_u(&state, cfg);
        state.w = update_w(&state, cfg);
        let (c, dd) = update_duals(&state, cfg);
        state.c = c;
        state.d_dual = dd;
        state.iter = iter;

        if !(all_finite(&state.a)
            && all_finite(&state.b)
            && all_finite(&state.u)
            && all_finite(&state.w)
            && all_finite(&state.c)
            && all_finite(&state.d_dual))
        {
            return Err(Error::NonFinite(format!(
                "ADMM diverged: non-finite iterate at iteration {iter}"
            )));
        }

        let residual_u = frob(&(&state.a - &state.u)) / frob(&state.u).max(1.0);
        let residual_w = frob(&(&state.b - &state.w)) / frob(&state.w).max(1.0);
        let obj = objective(r, y, &state.u, &state.w, cfg)?;
        state.history.push(IterationRecord {
            iter,
            objective: obj,
            residual_u,
            residual_w,
        });

        if residual_u < cfg.tol_primal && residual_w < cfg.tol_primal {
            break;
        }
    }

    let model = FactorModel {
        u: state.u.clone(),
        w: state.w.clone(),
    };
    Ok((model, state))
}

/// Count of columns of `w` with any nonzero entry (feature-selection size).
pub fn nonzero_columns(w: &Array2<f64>) -> usize {
    w.columns()
        .into_iter()
        .filter(|col| col.iter().any(|&v| v != 0.0))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prox::oracle;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| lo + (hi - lo) * rng.random::<f64>())
    }

    /// A plausible mid-optimization state with U ≥ 0.
    fn random_state(rng: &mut ChaCha8Rng, n: usize, d: usize, m: usize) -> AdmmState {
        AdmmState {
            a: rand_mat(rng, n, d, -1.0, 1.0),
            b: rand_mat(rng, d, m, -1.0, 1.0),
            u: rand_mat(rng, n, d, 0.0, 1.0),
            w: rand_mat(rng, d, m, -1.0, 1.0),
            c: rand_mat(rng, n, d, -0.5, 0.5),
            d_dual: rand_mat(rng, d, m, -0.5, 0.5),
            iter: 0,
            history: Vec::new(),
        }
    }

    fn test_cfg(d: usize) -> SolverConfig {
        SolverConfig {
            d,
            lambda: 0.3,
            mu: 0.1,
            rho: 1.3,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn objective_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = rand_mat(&mut rng, 3, 6, -1.0, 1.0);
        let y = rand_mat(&mut rng, 4, 6, 0.0, 1.0);
        let u = rand_mat(&mut rng, 3, 2, 0.0, 1.0);
        let w0 = Array2::<f64>::zeros((2, 4));
        let cfg = test_cfg(2);
        let val = objective(r.view(), y.view(), &u, &w0, &cfg).unwrap();
        let half_r2 = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
        assert!((val - half_r2).abs() < 1e-12);

        // exact factorization with no penalty → 0
        let w = rand_mat(&mut rng, 2, 4, -1.0, 1.0);
        let r_exact = u.dot(&w.dot(&y));
        let cfg0 = SolverConfig {
            lambda: 0.0,
            mu: 0.0,
            ..test_cfg(2)
        };
        let val0 = objective(r_exact.view(), y.view(), &u, &w, &cfg0).unwrap();
        assert!(val0.abs() < 1e-20);
    }

    #[test]
    fn objective_matches_scalar_recomputation() {
        // 2 stocks, 3 words, 4 days, d = 2, summed term by term
        let r = array![[0.1, -0.2, 0.0, 0.3], [0.05, 0.1, -0.1, 0.2]];
        let y = array![
            [1.0, 0.0, 2.0, 0.0],
            [0.0, 1.0, 0.0, 0.5],
            [3.0, 0.0, 0.0, 1.0]
        ];
        let u = array![[0.5, 0.1], [0.2, 0.9]];
        let w: Array2<f64> = array![[0.3, 0.0, -0.4], [0.0, 0.2, 0.1]];
        let cfg = SolverConfig {
            lambda: 0.7,
            mu: 0.05,
            ..test_cfg(2)
        };

        let mut loss = 0.0;
        for i in 0..2 {
            for t in 0..4 {
                let mut pred = 0.0;
                for k in 0..2 {
                    for j in 0..3 {
                        pred += u[[i, k]] * w[[k, j]] * y[[j, t]];
                    }
                }
                let e = r[[i, t]] - pred;
                loss += 0.5 * e * e;
            }
        }
        let mut group = 0.0;
        for j in 0..3 {
            group += (w[[0, j]] * w[[0, j]] + w[[1, j]] * w[[1, j]]).sqrt();
        }
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        let expected = loss + cfg.lambda * group + cfg.mu * l1;

        let val = objective(r.view(), y.view(), &u, &w, &cfg).unwrap();
        assert!((val - expected).abs() < 1e-12, "{val} vs {expected}");
    }

    #[test]
    fn update_a_reduces_to_projection_when_b_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, d, m, s) = (4, 2, 5, 7);
        let r = rand_mat(&mut rng, n, s, -1.0, 1.0);
        let y = rand_mat(&mut rng, m, s, 0.0, 1.0);
        let mut state = random_state(&mut rng, n, d, m);
        state.b = Array2::zeros((d, m));
        let cfg = test_cfg(d);
        let a = update_a(&state, r.view(), y.view(), &cfg).unwrap();
        let expect = (&(-&state.c) + &(cfg.rho * &state.u)) / cfg.rho;
        assert!(frob(&(&a - &expect)) < 1e-10);

        state.c = Array2::zeros((n, d));
        let a2 = update_a(&state, r.view(), y.view(), &cfg).unwrap();
        assert!(frob(&(&a2 - &state.u)) < 1e-10);
    }

    fn numeric_grad_a(
        r: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        state: &AdmmState,
        cfg: &SolverConfig,
        h: f64,
    ) -> Array2<f64> {
        let mut g = Array2::<f64>::zeros(state.a.dim());
        let mut s = state.clone();
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let orig = s.a[[i, j]];
                s.a[[i, j]] = orig + h;
                let fp = augmented_lagrangian(r, y, &s, cfg);
                s.a[[i, j]] = orig - h;
                let fm = augmented_lagrangian(r, y, &s, cfg);
                s.a[[i, j]] = orig;
                g[[i, j]] = (fp - fm) / (2.0 * h);
            }
        }
        g
    }

    fn numeric_grad_b(
        r: ArrayView2<'_, f64>,
        y: ArrayView2<'_, f64>,
        state: &AdmmState,
        cfg: &SolverConfig,
        h: f64,
    ) -> Array2<f64> {
        let mut g = Array2::<f64>::zeros(state.b.dim());
        let mut s = state.clone();
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let orig = s.b[[i, j]];
                s.b[[i, j]] = orig + h;
                let fp = augmented_lagrangian(r, y, &s, cfg);
                s.b[[i, j]] = orig - h;
                let fm = augmented_lagrangian(r, y, &s, cfg);
                s.b[[i, j]] = orig;
                g[[i, j]] = (fp - fm) / (2.0 * h);
            }
        }
        g
    }

    #[test]
    fn update_a_gradient_vanishes_at_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, d, m, s) = (5, 3, 6, 8);
        let r = rand_mat(&mut rng, n, s, -1.0, 1.0);
        let y = rand_mat(&mut rng, m, s, 0.0, 1.0);
        let mut state = random_state(&mut rng, n, d, m);
        let cfg = test_cfg(d);
        state.a = update_a(&state, r.view(), y.view(), &cfg).unwrap();
        let g = numeric_grad_a(r.view(), y.view(), &state, &cfg, 1e-6);
        let rel = frob(&g) / (1.0 + frob(&state.a));
        assert!(rel <= 1e-5, "finite-difference gradient residual {rel}");
    }

    #[test]
    fn update_b_trivial_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, d, m, s) = (4, 2, 5, 6);
        let r = rand_mat(&mut rng, n, s, -1.0, 1.0);
        let y = rand_mat(&mut rng, m, s, 0.0, 1.0);
        let cfg = test_cfg(d);
        let cache = FitCache::build(r.view(), y.view());
        let schur = sylvester_rhs_schur(&cache.yyt).unwrap();

        // A = 0 ⟹ B* = W − D/rho
        let mut state = random_state(&mut rng, n, d, m);
        state.a = Array2::zeros((n, d));
        let b = update_b(&state, r.view(), y.view(), &cfg, &schur).unwrap();
        let expect = &state.w - &(&state.d_dual / cfg.rho);
        assert!(frob(&(&b - &expect)) < 1e-10);

        // gradient residual at the minimizer
        let mut state2 = random_state(&mut rng, n, d, m);
        state2.b = update_b(&state2, r.view(), y.view(), &cfg, &schur).unwrap();
        let g = numeric_grad_b(r.view(), y.view(), &state2, &cfg, 1e-6);
        let rel = frob(&g) / (1.0 + frob(&state2.b));
        assert!(rel <= 1e-5, "finite-difference gradient residual {rel}");
    }

    #[test]
    fn update_b_scalar_case_matches_closed_form() {
        // d = 1, m = 1: (aᵀa/rho)·b·yyᵀ + b = rhs is scalar
        let r = array![[0.4, -0.2]];
        let y = array![[1.0, 0.5]];
        let cfg = test_cfg(1);
        let state = AdmmState {
            a: array![[0.7]],
            b: array![[0.0]],
            u: array![[0.7]],
            w: array![[0.3]],
            c: array![[0.0]],
            d_dual: array![[0.1]],
            iter: 0,
            history: Vec::new(),
        };
        let cache = FitCache::build(r.view(), y.view());
        let schur = sylvester_rhs_schur(&cache.yyt).unwrap();
        let b = update_b(&state, r.view(), y.view(), &cfg, &schur).unwrap();
        let yyt = 1.0 * 1.0 + 0.5 * 0.5;
        let ryt = 0.4 * 1.0 + (-0.2) * 0.5;
        let lhs_coeff = (0.7 * 0.7 / cfg.rho) * yyt + 1.0;
        let rhs = (0.7 * ryt - 0.1) / cfg.rho + 0.3;
        assert!((b[[0, 0]] - rhs / lhs_coeff).abs() < 1e-12);
    }

    #[test]
    fn update_u_is_shifted_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = random_state(&mut rng, 4, 3, 5);
        let cfg = test_cfg(3);
        let u = update_u(&state, &cfg);
        for i in 0..4 {
            for j in 0..3 {
                let expect = (state.a[[i, j]] + state.c[[i, j]] / cfg.rho).max(0.0);
                assert_eq!(u[[i, j]], expect);
            }
        }
        // C = 0, A ≥ 0 ⟹ U = A
        state.c = Array2::zeros((4, 3));
        state.a = state.a.mapv(f64::abs);
        assert_eq!(update_u(&state, &cfg), state.a);
    }

    #[test]
    fn update_w_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let state = random_state(&mut rng, 4, 3, 5);

        // enormous lambda zeroes every column
        let cfg_big = SolverConfig {
            lambda: 1e6,
            ..test_cfg(3)
        };
        let w = update_w(&state, &cfg_big);
        assert!(w.iter().all(|&v| v == 0.0));

        // lambda = mu = 0 passes B + D/rho through
        let cfg0 = SolverConfig {
            lambda: 0.0,
            mu: 0.0,
            ..test_cfg(3)
        };
        let w0 = update_w(&state, &cfg0);
        let expect = &state.b + &(&state.d_dual / cfg0.rho);
        assert!(frob(&(&w0 - &expect)) < 1e-12);
    }

    #[test]
    fn update_w_matches_subgradient_oracle_per_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = random_state(&mut rng, 4, 3, 4);
        let cfg = SolverConfig {
            lambda: 0.5,
            mu: 0.2,
            rho: 1.0,
            ..test_cfg(3)
        };
        let w = update_w(&state, &cfg);
        let params = ProxParams {
            lambda: cfg.lambda,
            mu: cfg.mu,
            rho: cfg.rho,
        };
        let target = &state.b + &(&state.d_dual / cfg.rho);
        for j in 0..4 {
            let col = target.column(j);
            let expect = oracle::subgradient_minimize(col, &params, 100_000);
            for i in 0..3 {
                assert!(
                    (w[[i, j]] - expect[i]).abs() < 1e-4,
                    "column {j} coord {i}: {} vs oracle {}",
                    w[[i, j]],
                    expect[i]
                );
            }
        }
    }

    #[test]
    fn update_duals_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut state = random_state(&mut rng, 3, 2, 4);
        let cfg = test_cfg(2);

        // A = U, B = W leaves duals unchanged
        state.a = state.u.clone();
        state.b = state.w.clone();
        let (c, d) = update_duals(&state, &cfg);
        assert_eq!(c, state.c);
        assert_eq!(d, state.d_dual);

        // rho = 1, C = 0 ⟹ C₊ = A − U
        let mut state2 = random_state(&mut rng, 3, 2, 4);
        state2.c = Array2::zeros((3, 2));
        let cfg1 = SolverConfig { rho: 1.0, ..cfg };
        let (c2, _) = update_duals(&state2, &cfg1);
        assert!(frob(&(&c2 - &(&state2.a - &state2.u))) < 1e-15);
    }

    #[test]
    fn each_primal_update_descends_the_augmented_lagrangian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (n, d, m, s) = (5, 3, 6, 8);
        let r = rand_mat(&mut rng, n, s, -1.0, 1.0);
        let y = rand_mat(&mut rng, m, s, 0.0, 1.0);
        let cfg = test_cfg(d);
        let cache = FitCache::build(r.view(), y.view());
        let schur = sylvester_rhs_schur(&cache.yyt).unwrap();

        for _ in 0..5 {
            let mut state = random_state(&mut rng, n, d, m);
            let before = augmented_lagrangian(r.view(), y.view(), &state, &cfg);
            state.a = update_a(&state, r.view(), y.view(), &cfg).unwrap();
            let after_a = augmented_lagrangian(r.view(), y.view(), &state, &cfg);
            assert!(after_a <= before + 1e-8, "A update increased L_rho");

            state.b = update_b(&state, r.view(), y.view(), &cfg, &schur).unwrap();
            let after_b = augmented_lagrangian(r.view(), y.view(), &state, &cfg);
            assert!(after_b <= after_a + 1e-8, "B update increased L_rho");

            state.u = update_u(&state, &cfg);
            let after_u = augmented_lagrangian(r.view(), y.view(), &state, &cfg);
            assert!(after_u <= after_b + 1e-8, "U update increased L_rho");

            state.w = update_w(&state, &cfg);
            let after_w = augmented_lagrangian(r.view(), y.view(), &state, &cfg);
            assert!(after_w <= after_u + 1e-8, "W update increased L_rho");
        }
    }

    #[test]
    fn fit_zero_returns_drives_w_to_zero() {
        let r = Array2::<f64>::zeros((4, 10));
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = rand_mat(&mut rng, 5, 10, 0.0, 1.0);
        let cfg = SolverConfig {
            d: 2,
            lambda: 0.1,
            mu: 0.1,
            rho: 1.0,
            max_iters: 300,
            tol_primal: 1e-6,
            seed: 3,
        };
        let (model, state) = fit(r.view(), y.view(), &cfg).unwrap();
        assert!(frob(&model.w) < 1e-6, "w norm {}", frob(&model.w));
        let obj = state.history.last().unwrap().objective;
        assert!(obj < 1e-6, "objective {obj}");
    }

    #[test]
    fn fit_recovers_synthetic_noiseless_signs() {
        // planted factors: n=20, m=30, s=50, d=3, 80% of W columns zero
        let (n, m, s, d) = (20, 30, 50, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let u_true = rand_mat(&mut rng, n, d, 0.0, 1.0);
        let mut w_true = rand_mat(&mut rng, d, m, -1.0, 1.0);
        for j in 0..(m * 8 / 10) {
            w_true.column_mut(j).fill(0.0);
        }
        let mut y = Array2::<f64>::zeros((m, s));
        for v in y.iter_mut() {
            if rng.random::<f64>() < 0.3 {
                *v = rng.random::<f64>() * 2.0;
            }
        }
        let r = u_true.dot(&w_true.dot(&y));

        let cfg = SolverConfig {
            d,
            lambda: 0.01,
            mu: 0.001,
            rho: 1.0,
            max_iters: 500,
            tol_primal: 1e-5,
            seed: 1,
        };
        let (model, _) = fit(r.view(), y.view(), &cfg).unwrap();
        let pred = model.u.dot(&model.w.dot(&y));

        let mut total = 0usize;
        let mut agree = 0usize;
        for (p, a) in pred.iter().zip(r.iter()) {
            if *a != 0.0 {
                total += 1;
                if (*p > 0.0) == (*a > 0.0) {
                    agree += 1;
                }
            }
        }
        let rate = agree as f64 / total as f64;
        assert!(rate >= 0.95, "sign agreement {rate}");
        let rel = frob(&(&pred - &r)) / frob(&r);
        assert!(rel <= 0.05, "relative reconstruction error {rel}");
    }

    #[test]
    fn fit_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = rand_mat(&mut rng, 6, 12, -0.1, 0.1);
        let y = rand_mat(&mut rng, 8, 12, 0.0, 1.0);
        let cfg = SolverConfig {
            d: 2,
            max_iters: 40,
            seed: 9,
            ..SolverConfig::default()
        };
        let (m1, s1) = fit(r.view(), y.view(), &cfg).unwrap();
        let (m2, s2) = fit(r.view(), y.view(), &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(s1.history.len(), s2.history.len());
        for (h1, h2) in s1.history.iter().zip(s2.history.iter()) {
            assert_eq!(h1, h2);
        }
    }

    #[test]
    fn fit_rejects_negative_intensities() {
        let r = Array2::<f64>::zeros((2, 3));
        let mut y = Array2::<f64>::zeros((2, 3));
        y[[0, 0]] = -0.1;
        assert!(matches!(
            fit(r.view(), y.view(), &SolverConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn exit_residuals_recorded_below_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = rand_mat(&mut rng, 5, 15, -0.05, 0.05);
        let y = rand_mat(&mut rng, 6, 15, 0.0, 1.0);
        let cfg = SolverConfig {
            d: 2,
            lambda: 0.05,
            mu: 0.01,
            rho: 1.0,
            max_iters: 2000,
            tol_primal: 1e-4,
            seed: 4,
        };
        let (_, state) = fit(r.view(), y.view(), &cfg).unwrap();
        let last = state.history.last().unwrap();
        assert!(
            state.iter < cfg.max_iters,
            "expected convergence before the cap"
        );
        assert!(last.residual_u < cfg.tol_primal);
        assert!(last.residual_w < cfg.tol_primal);
    }
}

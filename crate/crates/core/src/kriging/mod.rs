//! Ordinary Kriging over task-index vectors.
//!
//! Constant trend, Gaussian correlation `exp(-Σ θ_d (x_d - x'_d)²)` and no
//! nugget. `θ` is tuned by maximum likelihood: the concentrated objective
//! `σ²·|R|^(1/n)` is minimized by a coordinate pattern search in `log10 θ`
//! from three deterministic starts.

mod dataset;
mod lhs;

pub use dataset::{encode, Dataset, EvaluatedPoint};
pub use lhs::lhs_initial_population;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const THETA_MIN: f64 = 1e-3;
pub const THETA_MAX: f64 = 1e2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrigingConfig {
    /// Starting values of `log10 θ`, one isotropic start each.
    pub starts: Vec<f64>,
    /// Largest number of objective evaluations per start.
    pub max_evaluations: usize,
    /// Re-tune `θ` once the dataset has grown by this factor since the last
    /// tuning; between tunings new points only extend the factorization.
    pub retune_growth: f64,
}

impl Default for KrigingConfig {
    fn default() -> Self {
        Self {
            starts: vec![-1.0, 0.0, -2.0],
            max_evaluations: 150,
            retune_growth: 1.25,
        }
    }
}

/// A fitted model. Immutable apart from [`Kriging::update`].
#[derive(Debug, Clone)]
pub struct Kriging {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    theta: Vec<f64>,
    /// Lower Cholesky factor of the correlation matrix.
    chol: DMatrix<f64>,
    jitter: f64,
    beta: f64,
    sigma2: f64,
    /// `R⁻¹ (y - β)`.
    weights: DVector<f64>,
    /// `R⁻¹ 1`.
    r_inv_ones: DVector<f64>,
    tuned_at: usize,
    cfg: KrigingConfig,
}

fn correlation(theta: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = theta.iter().zip(a.iter().zip(b)).map(|(t, (p, q))| t * (p - q) * (p - q)).sum();
    (-d2).exp()
}

fn correlation_matrix(theta: &[f64], x: &[Vec<f64>], jitter: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut r = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        r[(i, i)] += jitter;
        for j in 0..i {
            let v = correlation(theta, &x[i], &x[j]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

/// Cholesky factor, retrying once with diagonal jitter.
fn factor(theta: &[f64], x: &[Vec<f64>]) -> Option<(DMatrix<f64>, f64)> {
    let r = correlation_matrix(theta, x, 0.0);
    if let Some(c) = r.clone().cholesky() {
        return Some((c.l(), 0.0));
    }
    let jitter = 1e-10 * x.len() as f64;
    log::debug!("kriging: correlation matrix not positive definite, adding jitter {jitter:e}");
    correlation_matrix(theta, x, jitter).cholesky().map(|c| (c.l(), jitter))
}

fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b).expect("cholesky factor has a positive diagonal")
}

fn solve_chol(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let z = solve_lower(l, b);
    l.tr_solve_lower_triangular(&z).expect("cholesky factor has a positive diagonal")
}

struct Trend {
    beta: f64,
    sigma2: f64,
    weights: DVector<f64>,
    r_inv_ones: DVector<f64>,
}

fn trend(l: &DMatrix<f64>, y: &[f64]) -> Trend {
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let ones = DVector::from_element(n, 1.0);
    let r_inv_ones = solve_chol(l, &ones);
    let r_inv_y = solve_chol(l, &yv);
    let beta = r_inv_y.sum() / r_inv_ones.sum();
    let weights = r_inv_y - &r_inv_ones * beta;
    let resid = yv - ones * beta;
    let sigma2 = (resid.dot(&weights) / n as f64).max(0.0);
    Trend {
        beta,
        sigma2,
        weights,
        r_inv_ones,
    }
}

/// Concentrated likelihood objective; lower is better.
fn objective(log_theta: &[f64], x: &[Vec<f64>], y: &[f64]) -> f64 {
    let theta: Vec<f64> = log_theta.iter().map(|t| 10f64.powf(*t)).collect();
    let Some((l, _)) = factor(&theta, x) else {
        return f64::INFINITY;
    };
    let n = y.len() as f64;
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let t = trend(&l, y);
    if t.sigma2 <= 0.0 {
        // constant data: any θ reproduces it, prefer the smallest determinant penalty
        return log_det / n;
    }
    t.sigma2.ln() + log_det / n
}

/// Coordinate pattern search over `log10 θ` within the bounds.
fn tune(x: &[Vec<f64>], y: &[f64], cfg: &KrigingConfig) -> Vec<f64> {
    let dim = x[0].len();
    let (lo, hi) = (THETA_MIN.log10(), THETA_MAX.log10());
    let mut best_point = vec![cfg.starts.first().copied().unwrap_or(-1.0).clamp(lo, hi); dim];
    let mut best_value = f64::INFINITY;
    for &start in &cfg.starts {
        let mut p = vec![start.clamp(lo, hi); dim];
        let mut value = objective(&p, x, y);
        let mut evals = 1;
        let mut step = 1.0;
        while step > 0.05 && evals < cfg.max_evaluations {
            let mut improved = false;
            for d in 0..dim {
                for dir in [1.0, -1.0] {
                    if evals >= cfg.max_evaluations {
                        break;
                    }
                    let mut q = p.clone();
                    q[d] = (q[d] + dir * step).clamp(lo, hi);
                    if q[d] == p[d] {
                        continue;
                    }
                    let v = objective(&q, x, y);
                    evals += 1;
                    if v < value {
                        p = q;
                        value = v;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if value < best_value {
            best_value = value;
            best_point = p;
        }
    }
    best_point.iter().map(|t| 10f64.powf(*t)).collect()
}

impl Kriging {
    /// Fits the model with maximum-likelihood `θ`.
    pub fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, cfg: KrigingConfig) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::TooFewPoints(x.len()));
        }
        let theta = tune(&x, &y, &cfg);
        Self::fit_with_theta(x, y, theta, cfg)
    }

    /// Fits the model with a fixed `θ`.
    pub fn fit_with_theta(x: Vec<Vec<f64>>, y: Vec<f64>, theta: Vec<f64>, cfg: KrigingConfig) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::TooFewPoints(x.len()));
        }
        let (chol, jitter) = factor(&theta, &x).ok_or(Error::SingularCorrelation)?;
        let t = trend(&chol, &y);
        let tuned_at = x.len();
        Ok(Self {
            x,
            y,
            theta,
            chol,
            jitter,
            beta: t.beta,
            sigma2: t.sigma2,
            weights: t.weights,
            r_inv_ones: t.r_inv_ones,
            tuned_at,
            cfg,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn cross_correlation(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| correlation(&self.theta, xi, x)))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.beta + self.cross_correlation(x).dot(&self.weights)
    }

    /// Mean squared prediction error.
    pub fn variance(&self, x: &[f64]) -> f64 {
        let r = self.cross_correlation(x);
        let z = solve_lower(&self.chol, &r);
        let u = 1.0 - self.r_inv_ones.dot(&r);
        let v = self.sigma2 * (1.0 - z.norm_squared() + u * u / self.r_inv_ones.sum());
        v.max(0.0)
    }

    /// Adds a training point. `θ` is re-tuned when the dataset has grown by
    /// the configured factor since the last tuning; otherwise the Cholesky
    /// factor is extended by one row.
    pub fn update(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        self.x.push(x);
        self.y.push(y);
        if self.x.len() as f64 >= self.cfg.retune_growth * self.tuned_at as f64 {
            let refit = Self::fit(std::mem::take(&mut self.x), std::mem::take(&mut self.y), self.cfg.clone())?;
            *self = refit;
            return Ok(());
        }
        let n = self.x.len();
        let new = &self.x[n - 1];
        let r = DVector::from_iterator(n - 1, self.x[..n - 1].iter().map(|xi| correlation(&self.theta, xi, new)));
        let l = solve_lower(&self.chol, &r);
        let d2 = 1.0 + self.jitter - l.norm_squared();
        if d2 <= 1e-14 {
            let (x, y, theta, cfg) = (std::mem::take(&mut self.x), std::mem::take(&mut self.y), self.theta.clone(), self.cfg.clone());
            let tuned_at = self.tuned_at;
            *self = Self::fit_with_theta(x, y, theta, cfg)?;
            self.tuned_at = tuned_at;
            return Ok(());
        }
        let mut chol = self.chol.clone().resize(n, n, 0.0);
        for j in 0..n - 1 {
            chol[(n - 1, j)] = l[j];
        }
        chol[(n - 1, n - 1)] = d2.sqrt();
        self.chol = chol;
        let t = trend(&self.chol, &self.y);
        self.beta = t.beta;
        self.sigma2 = t.sigma2;
        self.weights = t.weights;
        self.r_inv_ones = t.r_inv_ones;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut x = Vec::new();
        while x.len() < n {
            let p: Vec<usize> = (0..dim).map(|_| rng.random_range(0..4)).collect();
            if seen.insert(p.clone()) {
                x.push(p.into_iter().map(|v| v as f64).collect::<Vec<f64>>());
            }
        }
        let y = x.iter().map(|p: &Vec<f64>| (p[0] - 1.5).powi(2) * 0.1 + p.iter().sum::<f64>() * 0.05).collect();
        (x, y)
    }

    #[test]
    fn two_points_interpolate() {
        let m = Kriging::fit(vec![vec![0.0, 1.0], vec![2.0, 3.0]], vec![0.3, 0.7], KrigingConfig::default()).unwrap();
        assert!((m.predict(&[0.0, 1.0]) - 0.3).abs() < 1e-9);
        assert!((m.predict(&[2.0, 3.0]) - 0.7).abs() < 1e-9);
    }

    #[test]
    fn constant_outputs() {
        let (x, _) = random_points(10, 4, 1);
        let m = Kriging::fit(x.clone(), vec![0.42; 10], KrigingConfig::default()).unwrap();
        for p in [vec![0.0; 4], vec![3.0, 1.0, 2.0, 0.0], x[3].clone()] {
            assert!((m.predict(&p) - 0.42).abs() < 1e-9);
        }
        for p in &x {
            assert!(m.variance(p) < 1e-12);
        }
    }

    #[test]
    fn interpolates_training_points() {
        let (x, y) = random_points(60, 12, 2);
        let m = Kriging::fit(x.clone(), y.clone(), KrigingConfig::default()).unwrap();
        for (p, v) in x.iter().zip(&y) {
            assert!((m.predict(p) - v).abs() < 1e-6);
            assert!(m.variance(p) < 1e-8 * m.sigma2().max(1.0));
        }
        assert!(m.theta().iter().all(|t| (THETA_MIN..=THETA_MAX).contains(t)));
    }

    #[test]
    fn matches_direct_solve() {
        let (x, y) = random_points(15, 3, 3);
        let theta = vec![0.3, 0.1, 0.7];
        let m = Kriging::fit_with_theta(x.clone(), y.clone(), theta.clone(), KrigingConfig::default()).unwrap();
        let r = correlation_matrix(&theta, &x, 0.0);
        let r_inv = r.clone().try_inverse().unwrap();
        let ones = DVector::from_element(15, 1.0);
        let yv = DVector::from_column_slice(&y);
        let beta = (ones.transpose() * &r_inv * &yv)[0] / (ones.transpose() * &r_inv * &ones)[0];
        assert!((beta - m.beta()).abs() < 1e-9);
        let q = [1.0, 2.0, 0.5];
        let rq = DVector::from_iterator(15, x.iter().map(|p| correlation(&theta, p, &q)));
        let direct = beta + (rq.transpose() * &r_inv * (yv - ones * beta))[0];
        assert!((direct - m.predict(&q)).abs() < 1e-9);
    }

    #[test]
    fn reorder_invariant() {
        let (x, y) = random_points(20, 5, 4);
        let m = Kriging::fit(x.clone(), y.clone(), KrigingConfig::default()).unwrap();
        let mut idx: Vec<usize> = (0..20).collect();
        idx.reverse();
        idx.swap(3, 11);
        let xr = idx.iter().map(|&i| x[i].clone()).collect();
        let yr = idx.iter().map(|&i| y[i]).collect();
        let mr = Kriging::fit_with_theta(xr, yr, m.theta().to_vec(), KrigingConfig::default()).unwrap();
        for q in [[0.0, 1.0, 2.0, 3.0, 0.0], [3.0, 3.0, 1.0, 0.0, 2.0]] {
            assert!((m.predict(&q) - mr.predict(&q)).abs() < 1e-9);
        }
    }

    #[test]
    fn incremental_update_matches_refit() {
        let (x, y) = random_points(30, 6, 5);
        let cfg = KrigingConfig {
            retune_growth: 10.0,
            ..KrigingConfig::default()
        };
        let mut m = Kriging::fit(x[..20].to_vec(), y[..20].to_vec(), cfg.clone()).unwrap();
        for i in 20..30 {
            m.update(x[i].clone(), y[i]).unwrap();
        }
        assert_eq!(m.len(), 30);
        let full = Kriging::fit_with_theta(x.clone(), y.clone(), m.theta().to_vec(), cfg).unwrap();
        for (p, v) in x.iter().zip(&y) {
            assert!((m.predict(p) - v).abs() < 1e-6);
            assert!((m.predict(p) - full.predict(p)).abs() < 1e-9);
        }
        let q = [1.0, 1.0, 1.0, 2.0, 0.0, 3.0];
        assert!((m.predict(&q) - full.predict(&q)).abs() < 1e-8);
    }

    #[test]
    fn update_retunes_on_growth() {
        let (x, y) = random_points(20, 4, 6);
        let mut m = Kriging::fit(x[..8].to_vec(), y[..8].to_vec(), KrigingConfig::default()).unwrap();
        for i in 8..20 {
            m.update(x[i].clone(), y[i]).unwrap();
            assert!((m.predict(&x[i]) - y[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(matches!(
            Kriging::fit(vec![vec![1.0]], vec![1.0], KrigingConfig::default()),
            Err(Error::TooFewPoints(_))
        ));
    }
}

//! Damped least squares (Levenberg-Marquardt) with analytic Jacobians.

use nalgebra::{DMatrix, DVector};

/// A scalar model `y = f(x; p)` with an analytic gradient in `p`.
pub trait Model {
    fn n_params(&self) -> usize;
    fn value(&self, x: f64, p: &[f64]) -> f64;
    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Converged once every parameter step is below this fraction of the parameter.
    pub step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            step_tolerance: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Residual-variance scaled inverse normal matrix, if it is invertible.
    pub covariance: Option<DMatrix<f64>>,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LmFit {
    /// One-sigma uncertainties from the covariance diagonal (infinite if singular).
    pub fn uncertainties(&self) -> Vec<f64> {
        match &self.covariance {
            Some(c) => (0..self.params.len()).map(|i| c[(i, i)].max(0.0).sqrt()).collect(),
            None => vec![f64::INFINITY; self.params.len()],
        }
    }
}

pub fn residual_sum<M: Model>(model: &M, xs: &[f64], ys: &[f64], p: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - model.value(x, p);
            r * r
        })
        .sum()
}

fn normal_equations<M: Model>(model: &M, xs: &[f64], ys: &[f64], p: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let m = model.n_params();
    let mut jtj = DMatrix::<f64>::zeros(m, m);
    let mut jtr = DVector::<f64>::zeros(m);
    let mut g = vec![0.0; m];
    for (&x, &y) in xs.iter().zip(ys) {
        model.gradient(x, p, &mut g);
        let r = y - model.value(x, p);
        for i in 0..m {
            jtr[i] += g[i] * r;
            for j in 0..=i {
                jtj[(i, j)] += g[i] * g[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            jtj[(j, i)] = jtj[(i, j)];
        }
    }
    (jtj, jtr)
}

fn covariance(jtj: &DMatrix<f64>, rss: f64, n: usize, m: usize) -> Option<DMatrix<f64>> {
    // Equilibrate before inverting: parameters may differ by many decades.
    let d: Vec<f64> = (0..m).map(|i| jtj[(i, i)].sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let scaled = DMatrix::from_fn(m, m, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let inv = scaled.try_inverse()?;
    let s2 = if n > m { rss / (n - m) as f64 } else { 0.0 };
    let cov = DMatrix::from_fn(m, m, |i, j| inv[(i, j)] * s2 / (d[i] * d[j]));
    cov.iter().all(|v| v.is_finite()).then_some(cov)
}

/// Minimises the residual sum of squares starting from `p0`.
pub fn levenberg_marquardt<M: Model>(model: &M, xs: &[f64], ys: &[f64], p0: &[f64], config: &LmConfig) -> LmFit {
    let m = model.n_params();
    assert_eq!(p0.len(), m, "initial guess has wrong length");
    let n = xs.len();
    let mut p = p0.to_vec();
    let floor: Vec<f64> = p0
        .iter()
        .map(|v| if *v != 0.0 { 1e-3 * v.abs() } else { 1e-12 })
        .collect();
    let mut rss = residual_sum(model, xs, ys, &p);
    let mut lambda = config.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let (mut jtj, mut jtr) = normal_equations(model, xs, ys, &p);

    while iterations < config.max_iterations {
        iterations += 1;
        if rss == 0.0 || jtr.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let mut damped = jtj.clone();
        for i in 0..m {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&jtr),
            None => {
                lambda *= 10.0;
                if lambda > 1e20 {
                    break;
                }
                continue;
            }
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let trial_rss = residual_sum(model, xs, ys, &trial);
        if trial_rss.is_finite() && trial_rss <= rss {
            let small = step
                .iter()
                .zip(&trial)
                .zip(&floor)
                .all(|((s, v), f)| s.abs() <= config.step_tolerance * (v.abs() + f));
            p = trial;
            rss = trial_rss;
            lambda = (lambda / 10.0).max(1e-15);
            (jtj, jtr) = normal_equations(model, xs, ys, &p);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                // No descent direction left at working precision.
                converged = true;
                break;
            }
        }
    }
    LmFit {
        covariance: covariance(&jtj, rss, n, m),
        params: p,
        rss,
        iterations,
        converged,
    }
}

/// Central finite-difference gradient, for checking analytic Jacobians.
pub fn numeric_gradient<M: Model>(model: &M, x: f64, p: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let h = 1e-6 * p[i].abs().max(1e-6);
            let mut hi = p.to_vec();
            let mut lo = p.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (model.value(x, &hi) - model.value(x, &lo)) / (2.0 * h)
        })
        .collect()
}

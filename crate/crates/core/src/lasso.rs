//! L1-penalized linear and logistic regression.
//!
//! Both solvers run cyclic coordinate descent on internally standardized
//! features (mean 0, population variance 1) with an unpenalized intercept;
//! coefficients are reported on the original feature scale. The objectives are
//!
//! * linear:   `(1/2n) Σ (y_i − a − x_iβ)² + λ Σ |β̃_j|`
//! * logistic: `(1/n) Σ (log(1 + exp(a + x_iβ)) − d_i (a + x_iβ)) + λ Σ |β̃_j|`
//!
//! where `β̃_j = sd(x_j) β_j` is the standardized coefficient. Logistic fits use
//! a proximal-Newton (IRLS) outer loop with a backtracking safeguard and inner
//! coordinate descent on the weighted quadratic approximation.
//!
//! Paths are warm-started and screened with the sequential strong rule; every
//! returned solution passes a full KKT check. A path stops early once the
//! fraction of deviance explained exceeds `0.999` or stops improving (relative
//! change below `1e-5` after the first five penalties); later grid points
//! reuse the terminal fit.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::math;
use crate::matrix::Matrix;
use crate::rng;

/// Convergence threshold on the largest standardized coefficient change.
pub const TOLERANCE: f64 = 1e-7;
/// Iteration cap for coordinate passes and IRLS steps.
pub const MAX_ITER: usize = 10_000;
/// Predicted probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-6;
pub const PATH_LENGTH: usize = 100;
/// Smallest path penalty as a fraction of `λ_max`.
pub const LAMBDA_MIN_RATIO: f64 = 1e-3;
pub const DEFAULT_FOLDS: usize = 10;
/// Plug-in penalty constants `c` and `γ·log n`.
pub const PLUGIN_C: f64 = 1.1;
pub const PLUGIN_GAMMA_NUMERATOR: f64 = 0.1;

/// Grid points evaluated past the running cross-validation minimum before
/// the walk may stop.
pub const CV_PATIENCE: usize = 10;
/// Convergence tolerance for the cross-validation walks; the selected fits
/// are then refined to [`TOLERANCE`].
pub const CV_TOLERANCE: f64 = 1e-4;
const DEV_RATIO_MAX: f64 = 0.999;
const DEV_CHANGE_MIN: f64 = 1e-5;
const MIN_PATH_POINTS: usize = 5;
const MIN_WEIGHT: f64 = 1e-5;
const SEPARATION_ETA: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Linear,
    Logistic,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LassoError {
    #[error("input has no rows")]
    EmptyInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("penalty must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("binary response has a single class")]
    SingleClass,
    #[error("binary response must be coded 0/1")]
    NonBinaryResponse,
    #[error("solver did not converge at lambda = {lambda} after {iterations} iterations")]
    NotConverged { lambda: f64, iterations: usize },
    #[error("invalid fold count {folds} for {n} observations")]
    InvalidFolds { folds: usize, n: usize },
    #[error("a cross-validation fold is missing a class after refolding")]
    FoldMissingClass,
}

/// One fitted penalized regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    /// Coefficients on the original feature scale.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Sorted indices of nonzero coefficients.
    pub active_set: Vec<usize>,
    pub family: Family,
    /// Zero-variance features held at 0 and left out of the penalty path.
    pub excluded: Vec<usize>,
}

impl LassoFit {
    /// `a + x_iβ` for every row.
    pub fn linear_predictor(&self, x: &Matrix) -> Vec<f64> {
        let mut eta = vec![self.intercept; x.nrows()];
        for &j in &self.active_set {
            let b = self.coefficients[j];
            for (e, v) in eta.iter_mut().zip(x.col(j)) {
                *e += b * v;
            }
        }
        eta
    }

    /// Fitted means for linear fits, clamped probabilities for logistic fits.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let eta = self.linear_predictor(x);
        match self.family {
            Family::Linear => eta,
            Family::Logistic => eta.into_iter().map(clamped_probability).collect(),
        }
    }

    fn from_standardized(
        std: &Standardized,
        beta: &[f64],
        intercept_std: f64,
        lambda: f64,
        family: Family,
    ) -> Self {
        let mut coefficients = vec![0.0; beta.len()];
        let mut intercept = intercept_std;
        let mut active_set = Vec::new();
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let c = b / std.scale[j];
                coefficients[j] = c;
                intercept -= c * std.center[j];
                active_set.push(j);
            }
        }
        Self { coefficients, intercept, lambda, active_set, family, excluded: std.excluded() }
    }
}

/// Plain-text diagnostic dump: penalty, intercept, active set and coefficients.
impl fmt::Display for LassoFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family = {}", self.family.name())?;
        writeln!(f, "lambda = {:e}", self.lambda)?;
        writeln!(f, "intercept = {}", self.intercept)?;
        write!(f, "active_set =")?;
        for (k, j) in self.active_set.iter().enumerate() {
            write!(f, "{}{}", if k == 0 { " " } else { "," }, j)?;
        }
        writeln!(f)?;
        if !self.excluded.is_empty() {
            writeln!(f, "excluded_zero_variance = {:?}", self.excluded)?;
        }
        for &j in &self.active_set {
            writeln!(f, "coef[{}] = {}", j, self.coefficients[j])?;
        }
        Ok(())
    }
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[inline]
fn clamped_probability(eta: f64) -> f64 {
    math::sigmoid(eta).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + libm::log1p(math::exp(-eta))
    } else {
        libm::log1p(math::exp(eta))
    }
}

/// Standardized copy of (a row subset of) a feature matrix.
#[derive(Debug, Clone)]
struct Standardized {
    n: usize,
    p: usize,
    xs: Vec<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
    included: Vec<bool>,
}

impl Standardized {
    fn new(x: &Matrix, rows: Option<&[usize]>) -> Self {
        let n = rows.map_or(x.nrows(), <[usize]>::len);
        let p = x.ncols();
        let mut xs = vec![0.0; n * p];
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        let mut included = vec![true; p];
        for j in 0..p {
            let src = x.col(j);
            let dst = &mut xs[j * n..(j + 1) * n];
            match rows {
                Some(r) => dst.iter_mut().zip(r).for_each(|(d, &i)| *d = src[i]),
                None => dst.copy_from_slice(src),
            }
            let m = math::mean(dst);
            let var = dst.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let sd = math::sqrt(var);
            center[j] = m;
            if !(sd > 1e-10 * (1.0 + m.abs())) {
                included[j] = false;
                dst.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            scale[j] = sd;
            let inv = 1.0 / sd;
            dst.iter_mut().for_each(|v| *v = (*v - m) * inv);
        }
        Self { n, p, xs, center, scale, included }
    }

    #[inline]
    fn col(&self, j: usize) -> &[f64] {
        &self.xs[j * self.n..(j + 1) * self.n]
    }

    fn excluded(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| !self.included[j]).collect()
    }
}

fn validate_xy(x: &Matrix, len: usize) -> Result<(), LassoError> {
    if x.nrows() == 0 {
        return Err(LassoError::EmptyInput);
    }
    if x.nrows() != len {
        return Err(LassoError::DimensionMismatch(alloc::format!(
            "x has {} rows but response has {}",
            x.nrows(),
            len
        )));
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> Result<(), LassoError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(LassoError::InvalidLambda(lambda))
    }
}

fn binary_response(d: &[f64]) -> Result<(), LassoError> {
    if d.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(LassoError::NonBinaryResponse);
    }
    let ones = d.iter().filter(|&&v| v == 1.0).count();
    if ones == 0 || ones == d.len() {
        return Err(LassoError::SingleClass);
    }
    Ok(())
}

/// Coordinate descent state shared by both families.
///
/// For the linear family `resid` is `y − ȳ − X̃β̃` and the weights are one; for
/// the logistic family `resid` is the IRLS working residual of the current
/// quadratic approximation.
struct Solver<'a> {
    std: &'a Standardized,
    family: Family,
    target: &'a [f64],
    beta: Vec<f64>,
    intercept: f64,
    resid: Vec<f64>,
    /// Linear predictor `a + X̃β̃` (logistic only).
    eta: Vec<f64>,
    weights: Vec<f64>,
    /// Weighted column second moments for the current approximation.
    curvature: Vec<f64>,
    in_working: Vec<bool>,
    working: Vec<usize>,
    tol: f64,
    /// Inner coordinate-descent tolerance; loosened during early IRLS steps.
    inner_tol: f64,
    /// `sd(y)` for the linear family, 1 otherwise; tolerances are relative to it.
    tol_scale: f64,
}

impl<'a> Solver<'a> {
    fn new(std: &'a Standardized, family: Family, target: &'a [f64]) -> Self {
        let n = std.n;
        // A constant response must reproduce its value exactly.
        let ybar = if target.iter().all(|&v| v == target[0]) { target[0] } else { math::mean(target) };
        let (intercept, resid, tol_scale) = match family {
            Family::Linear => {
                let sd = math::sqrt(math::population_variance(target));
                (ybar, target.iter().map(|v| v - ybar).collect(), if sd > 0.0 { sd } else { 1.0 })
            }
            Family::Logistic => (math::logit(ybar), vec![0.0; n], 1.0),
        };
        let tol = TOLERANCE * tol_scale;
        let eta = match family {
            Family::Linear => Vec::new(),
            Family::Logistic => vec![intercept; n],
        };
        let weights = match family {
            Family::Linear => Vec::new(),
            Family::Logistic => vec![0.0; n],
        };
        Self {
            std,
            family,
            target,
            beta: vec![0.0; std.p],
            intercept,
            resid,
            eta,
            weights,
            curvature: vec![1.0; std.p],
            in_working: vec![false; std.p],
            working: Vec::new(),
            tol,
            inner_tol: tol,
            tol_scale,
        }
    }

    fn set_tolerance(&mut self, base: f64) {
        self.tol = base * self.tol_scale;
        self.inner_tol = self.tol;
    }

    /// Resets the state to the given standardized coefficients, with the
    /// working set reduced to their support.
    fn restore(&mut self, beta: &[f64], intercept: f64) {
        self.beta.copy_from_slice(beta);
        self.intercept = intercept;
        self.in_working.iter_mut().for_each(|w| *w = false);
        self.working.clear();
        for j in 0..self.std.p {
            if beta[j] != 0.0 {
                self.add_working(j);
            }
        }
        let eta = self.compute_eta(intercept, beta);
        match self.family {
            Family::Linear => {
                for ((r, &t), &e) in self.resid.iter_mut().zip(self.target).zip(&eta) {
                    *r = t - e;
                }
            }
            Family::Logistic => self.eta = eta,
        }
    }

    fn add_working(&mut self, j: usize) {
        if !self.in_working[j] && self.std.included[j] {
            self.in_working[j] = true;
            self.working.push(j);
        }
    }

    fn all_gradients(&self) -> Vec<f64> {
        let n = self.std.n as f64;
        let score = self.score();
        (0..self.std.p)
            .map(|j| if self.std.included[j] { math::dot(self.std.col(j), &score) / n } else { 0.0 })
            .collect()
    }

    /// One coordinate pass over `coords`; returns the largest change.
    fn pass(&mut self, coords: &[usize], lambda: f64) -> f64 {
        let n = self.std.n as f64;
        let mut max_change: f64 = 0.0;
        for &j in coords {
            let col = self.std.col(j);
            let old = self.beta[j];
            let new = match self.family {
                Family::Linear => soft_threshold(old + math::dot(col, &self.resid) / n, lambda),
                Family::Logistic => {
                    let mut g = 0.0;
                    for i in 0..self.std.n {
                        g += self.weights[i] * col[i] * self.resid[i];
                    }
                    let v = self.curvature[j];
                    soft_threshold(v * old + g / n, lambda) / v
                }
            };
            let delta = new - old;
            if delta != 0.0 {
                self.beta[j] = new;
                for (r, x) in self.resid.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                let scaled = delta.abs() * math::sqrt(self.curvature[j]);
                max_change = max_change.max(scaled);
            }
        }
        if self.family == Family::Logistic {
            let sw: f64 = self.weights.iter().sum();
            let shift = math::dot(&self.weights, &self.resid) / sw;
            if shift != 0.0 {
                self.intercept += shift;
                self.resid.iter_mut().for_each(|r| *r -= shift);
                max_change = max_change.max(shift.abs());
            }
        }
        max_change
    }

    /// Coordinate descent over the working set until the largest change falls
    /// below the tolerance, cycling on the nonzero coordinates in between.
    fn descend(&mut self, lambda: f64, budget: &mut usize) -> Result<(), LassoError> {
        let working = self.working.clone();
        loop {
            let change = self.pass(&working, lambda);
            self.spend(budget, lambda)?;
            if change < self.inner_tol {
                return Ok(());
            }
            let active: Vec<usize> = working.iter().copied().filter(|&j| self.beta[j] != 0.0).collect();
            loop {
                let change = self.pass(&active, lambda);
                self.spend(budget, lambda)?;
                if change < self.inner_tol {
                    break;
                }
            }
        }
    }

    fn spend(&self, budget: &mut usize, lambda: f64) -> Result<(), LassoError> {
        if *budget == 0 {
            return Err(LassoError::NotConverged { lambda, iterations: MAX_ITER });
        }
        *budget -= 1;
        Ok(())
    }

    fn logistic_objective(&self, beta: &[f64], eta: &[f64], lambda: f64) -> f64 {
        let loss: f64 =
            eta.iter().zip(self.target).map(|(&e, &d)| softplus(e) - d * e).sum::<f64>() / self.std.n as f64;
        loss + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn compute_eta(&self, intercept: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![intercept; self.std.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (e, x) in eta.iter_mut().zip(self.std.col(j)) {
                    *e += b * x;
                }
            }
        }
        eta
    }

    /// IRLS outer loop for the logistic family on the current working set.
    fn irls(&mut self, lambda: f64, warm: bool) -> Result<(), LassoError> {
        let n = self.std.n as f64;
        let mut objective = self.logistic_objective(&self.beta, &self.eta, lambda);
        let mut last_change = if warm { 0.01 } else { f64::INFINITY };
        for outer in 0..MAX_ITER {
            self.inner_tol = self.tol.max(0.01 * last_change).min(1e-3);
            for i in 0..self.std.n {
                let p = math::sigmoid(self.eta[i]);
                let w = (p * (1.0 - p)).max(MIN_WEIGHT);
                self.weights[i] = w;
                self.resid[i] = (self.target[i] - p) / w;
            }
            for &j in &self.working {
                let col = self.std.col(j);
                let mut v = 0.0;
                for i in 0..self.std.n {
                    v += self.weights[i] * col[i] * col[i];
                }
                self.curvature[j] = (v / n).max(1e-12);
            }
            let old_beta = self.beta.clone();
            let old_intercept = self.intercept;
            let mut budget = MAX_ITER;
            self.descend(lambda, &mut budget)?;

            let mut step = 1.0;
            let mut eta = self.compute_eta(self.intercept, &self.beta);
            let mut new_obj = self.logistic_objective(&self.beta, &eta, lambda);
            let prop_beta = self.beta.clone();
            let prop_intercept = self.intercept;
            while new_obj > objective + 1e-12 * objective.abs() && step > 1e-6 {
                step *= 0.5;
                for j in 0..self.std.p {
                    self.beta[j] = old_beta[j] + step * (prop_beta[j] - old_beta[j]);
                }
                self.intercept = old_intercept + step * (prop_intercept - old_intercept);
                eta = self.compute_eta(self.intercept, &self.beta);
                new_obj = self.logistic_objective(&self.beta, &eta, lambda);
            }
            self.eta = eta;
            objective = new_obj;

            let mut change = (self.intercept - old_intercept).abs();
            for &j in &self.working {
                change = change.max((self.beta[j] - old_beta[j]).abs() * math::sqrt(self.curvature[j]));
            }
            if lambda == 0.0 && self.eta.iter().any(|e| e.abs() > SEPARATION_ETA) {
                return Err(LassoError::NotConverged { lambda, iterations: outer + 1 });
            }
            if change < self.tol && self.inner_tol <= self.tol {
                return Ok(());
            }
            last_change = change;
        }
        Err(LassoError::NotConverged { lambda, iterations: MAX_ITER })
    }

    /// Solves at one penalty. Coordinate descent runs on the working set;
    /// screened-in (`strong`) features that violate the KKT conditions are
    /// added first, then the remaining features are checked.
    fn solve(&mut self, lambda: f64, strong: &[bool]) -> Result<(), LassoError> {
        let slack = lambda + 10.0 * self.tol;
        for round in 0..=2 * self.std.p + 1 {
            if !self.working.is_empty() {
                match self.family {
                    Family::Linear => {
                        let mut budget = MAX_ITER;
                        self.descend(lambda, &mut budget)?;
                    }
                    Family::Logistic => self.irls(lambda, round > 0)?,
                }
            }
            let score = self.score();
            let mut violators = self.violators(&score, slack, |j| strong[j]);
            if violators.is_empty() {
                violators = self.violators(&score, slack, |j| !strong[j]);
            }
            if violators.is_empty() {
                return Ok(());
            }
            for j in violators {
                self.add_working(j);
            }
        }
        Err(LassoError::NotConverged { lambda, iterations: MAX_ITER })
    }

    /// Per-row derivative of the negative log-likelihood, up to sign.
    fn score(&self) -> Vec<f64> {
        match self.family {
            Family::Linear => self.resid.clone(),
            Family::Logistic => self.eta.iter().zip(self.target).map(|(&e, &d)| d - math::sigmoid(e)).collect(),
        }
    }

    fn violators(&self, score: &[f64], slack: f64, eligible: impl Fn(usize) -> bool) -> Vec<usize> {
        let n = self.std.n as f64;
        (0..self.std.p)
            .filter(|&j| self.std.included[j] && !self.in_working[j] && eligible(j))
            .filter(|&j| (math::dot(self.std.col(j), score) / n).abs() > slack)
            .collect()
    }

    fn deviance(&self) -> f64 {
        match self.family {
            Family::Linear => self.resid.iter().map(|r| r * r).sum(),
            Family::Logistic => {
                2.0 * self.eta.iter().zip(self.target).map(|(&e, &d)| softplus(e) - d * e).sum::<f64>()
            }
        }
    }

    fn fit(&self, lambda: f64) -> LassoFit {
        LassoFit::from_standardized(self.std, &self.beta, self.intercept, lambda, self.family)
    }
}

fn null_deviance(family: Family, target: &[f64]) -> f64 {
    let m = math::mean(target);
    match family {
        Family::Linear => target.iter().map(|v| (v - m) * (v - m)).sum(),
        Family::Logistic => {
            let e = math::logit(m);
            2.0 * target.iter().map(|&d| softplus(e) - d * e).sum::<f64>()
        }
    }
}

fn lambda_max_std(std: &Standardized, target: &[f64]) -> f64 {
    let m = math::mean(target);
    let centered: Vec<f64> = target.iter().map(|v| v - m).collect();
    (0..std.p)
        .filter(|&j| std.included[j])
        .map(|j| (math::dot(std.col(j), &centered) / std.n as f64).abs())
        .fold(0.0, f64::max)
        * (1.0 + 1e-9)
}

/// Smallest penalty at which every coefficient is zero, nudged up by a
/// relative `1e-9` so rounding cannot activate a feature at the top of the grid.
pub fn lambda_max(x: &Matrix, target: &[f64]) -> f64 {
    lambda_max_std(&Standardized::new(x, None), target)
}

/// `PATH_LENGTH` log-spaced penalties from `λ_max` down to `LAMBDA_MIN_RATIO · λ_max`.
pub fn lambda_grid(lambda_max: f64) -> Vec<f64> {
    let top = if lambda_max > 0.0 { lambda_max } else { 1e-12 };
    let step = math::ln(LAMBDA_MIN_RATIO) / (PATH_LENGTH - 1) as f64;
    (0..PATH_LENGTH).map(|k| top * math::exp(step * k as f64)).collect()
}

fn single_fit(x: &Matrix, target: &[f64], family: Family, lambda: f64) -> Result<LassoFit, LassoError> {
    let std = Standardized::new(x, None);
    let mut solver = Solver::new(&std, family, target);
    solver.solve(lambda, &vec![true; std.p])?;
    Ok(solver.fit(lambda))
}

/// Linear Lasso at a single penalty, solved from a cold start.
pub fn fit_linear_lasso(x: &Matrix, y: &[f64], lambda: f64) -> Result<LassoFit, LassoError> {
    validate_xy(x, y.len())?;
    validate_lambda(lambda)?;
    single_fit(x, y, Family::Linear, lambda)
}

/// Logistic Lasso at a single penalty, solved from a cold start.
pub fn fit_logistic_lasso(x: &Matrix, d: &[bool], lambda: f64) -> Result<LassoFit, LassoError> {
    validate_xy(x, d.len())?;
    validate_lambda(lambda)?;
    let target: Vec<f64> = d.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    binary_response(&target)?;
    single_fit(x, &target, Family::Logistic, lambda)
}

/// Warm-started walk down a penalty sequence, one solve per call to `step`.
struct PathWalker<'a> {
    solver: Solver<'a>,
    null_dev: f64,
    prev_lambda: Option<f64>,
    prev_ratio: f64,
    steps: usize,
    grads: Vec<f64>,
    last: Option<LassoFit>,
    saturated: bool,
    /// Standardized coefficients and intercept after each step, if kept.
    snapshots: Option<Vec<(Vec<f64>, f64)>>,
}

impl<'a> PathWalker<'a> {
    fn new(std: &'a Standardized, target: &'a [f64], family: Family) -> Self {
        let solver = Solver::new(std, family, target);
        let grads = solver.all_gradients();
        Self {
            solver,
            null_dev: null_deviance(family, target),
            prev_lambda: None,
            prev_ratio: 0.0,
            steps: 0,
            grads,
            last: None,
            saturated: false,
            snapshots: None,
        }
    }

    fn with_tolerance(mut self, base: f64) -> Self {
        self.solver.set_tolerance(base);
        self
    }

    /// Re-solves step `index` to [`TOLERANCE`], starting from its snapshot.
    fn refine(&mut self, index: usize, lambda: f64) -> Result<LassoFit, LassoError> {
        let (beta, intercept) = self.snapshots.as_ref().expect("snapshots kept")[index].clone();
        self.solver.restore(&beta, intercept);
        self.solver.set_tolerance(TOLERANCE);
        self.solver.solve(lambda, &vec![true; self.solver.std.p])?;
        Ok(self.solver.fit(lambda))
    }

    /// Fit at the next (smaller) penalty; once the path has saturated the
    /// terminal fit is returned unchanged.
    fn step(&mut self, lambda: f64) -> Result<LassoFit, LassoError> {
        if self.saturated {
            if let Some(last) = &self.last {
                return Ok(last.clone());
            }
        }
        let cutoff = 2.0 * lambda - self.prev_lambda.unwrap_or(lambda);
        let strong: Vec<bool> = self.grads.iter().map(|g| g.abs() >= cutoff).collect();
        self.solver.solve(lambda, &strong)?;
        let fit = self.solver.fit(lambda);
        if let Some(snaps) = &mut self.snapshots {
            snaps.push((self.solver.beta.clone(), self.solver.intercept));
        }
        self.steps += 1;
        self.prev_lambda = Some(lambda);
        let ratio = if self.null_dev > 0.0 { 1.0 - self.solver.deviance() / self.null_dev } else { 0.0 };
        let stalled = self.steps >= MIN_PATH_POINTS && ratio - self.prev_ratio < DEV_CHANGE_MIN * ratio;
        if ratio > DEV_RATIO_MAX || stalled || self.null_dev == 0.0 {
            self.saturated = true;
        } else {
            self.prev_ratio = ratio;
            self.grads = self.solver.all_gradients();
        }
        self.last = Some(fit.clone());
        Ok(fit)
    }
}

fn path_on(
    std: &Standardized,
    target: &[f64],
    family: Family,
    lambdas: &[f64],
) -> Result<Vec<LassoFit>, LassoError> {
    let mut walker = PathWalker::new(std, target, family);
    lambdas.iter().map(|&l| walker.step(l)).collect()
}

/// Warm-started fits along a decreasing penalty sequence, one per entry.
pub fn lasso_path(
    x: &Matrix,
    target: &[f64],
    family: Family,
    lambdas: &[f64],
) -> Result<Vec<LassoFit>, LassoError> {
    validate_xy(x, target.len())?;
    if let Some(&bad) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(LassoError::InvalidLambda(bad));
    }
    if family == Family::Logistic {
        binary_response(target)?;
    }
    path_on(&Standardized::new(x, None), target, family, lambdas)
}

/// Cross-validated penalty selection over the default grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub family: Family,
    /// Strictly decreasing; the first entry is `λ_max`. Truncated where the
    /// full-sample path saturates or the error curve has clearly turned up.
    pub lambda_grid: Vec<f64>,
    /// Mean out-of-fold MSE (linear) or binomial deviance (logistic).
    pub cv_mean: Vec<f64>,
    /// Standard error of `cv_mean` across folds.
    pub cv_se: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub index_min: usize,
    pub index_1se: usize,
    /// Full-sample fits at every grid point, solved to [`CV_TOLERANCE`]
    /// except the two selected fits, which are refined to [`TOLERANCE`].
    pub path: Vec<LassoFit>,
}

impl CvResult {
    pub fn fit_min(&self) -> &LassoFit {
        &self.path[self.index_min]
    }

    pub fn fit_1se(&self) -> &LassoFit {
        &self.path[self.index_1se]
    }
}

fn assign_folds(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from_seed(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

fn folds_have_both_classes(fold: &[usize], k: usize, target: &[f64]) -> bool {
    let mut seen = vec![[false; 2]; k];
    for (&f, &t) in fold.iter().zip(target) {
        seen[f][usize::from(t == 1.0)] = true;
    }
    seen.iter().all(|s| s[0] && s[1])
}

fn fold_loss(family: Family, fit: &LassoFit, x: &Matrix, rows: &[usize], target: &[f64]) -> f64 {
    let mut total = 0.0;
    for &i in rows {
        let mut eta = fit.intercept;
        for &j in &fit.active_set {
            eta += fit.coefficients[j] * x[(i, j)];
        }
        total += match family {
            Family::Linear => (target[i] - eta) * (target[i] - eta),
            Family::Logistic => {
                let p = clamped_probability(eta);
                -2.0 * if target[i] == 1.0 { math::ln(p) } else { math::ln(1.0 - p) }
            }
        };
    }
    total / rows.len() as f64
}

/// `k`-fold cross-validation of the Lasso path.
///
/// The full-sample path and the fold paths advance together along the grid.
/// The walk ends where the full-sample path saturates, or once the error has
/// stayed above the running minimum plus one standard error for
/// `CV_PATIENCE` grid points past that minimum. The skipped penalties lie in
/// the overfit region and leave the one-standard-error choice untouched.
///
/// Folds come from a seeded shuffle; for the logistic family every fold must
/// contain both classes, otherwise the data are refolded once with a derived
/// seed before giving up.
pub fn cross_validate(
    x: &Matrix,
    target: &[f64],
    family: Family,
    k: usize,
    seed: u64,
) -> Result<CvResult, LassoError> {
    validate_xy(x, target.len())?;
    let n = x.nrows();
    if k < 2 || n < 2 * k {
        return Err(LassoError::InvalidFolds { folds: k, n });
    }
    if family == Family::Logistic {
        binary_response(target)?;
    }
    let mut fold = assign_folds(n, k, seed);
    if family == Family::Logistic && !folds_have_both_classes(&fold, k, target) {
        fold = assign_folds(n, k, rng::derive_seed(seed, &[rng::stream::REFOLD]));
        if !folds_have_both_classes(&fold, k, target) {
            return Err(LassoError::FoldMissingClass);
        }
    }

    let full_std = Standardized::new(x, None);
    let mut grid = lambda_grid(lambda_max_std(&full_std, target));
    let tests: Vec<Vec<usize>> = (0..k).map(|f| (0..n).filter(|&i| fold[i] == f).collect()).collect();
    let trains: Vec<(Standardized, Vec<f64>)> = (0..k)
        .map(|f| {
            let rows: Vec<usize> = (0..n).filter(|&i| fold[i] != f).collect();
            let t = rows.iter().map(|&i| target[i]).collect();
            (Standardized::new(x, Some(&rows)), t)
        })
        .collect();
    let mut full = PathWalker::new(&full_std, target, family).with_tolerance(CV_TOLERANCE);
    full.snapshots = Some(Vec::with_capacity(grid.len()));
    let mut walkers: Vec<PathWalker<'_>> =
        trains.iter().map(|(std, t)| PathWalker::new(std, t, family).with_tolerance(CV_TOLERANCE)).collect();

    let mut path = Vec::with_capacity(grid.len());
    let mut cv_mean = Vec::with_capacity(grid.len());
    let mut cv_se = Vec::with_capacity(grid.len());
    let mut index_min = 0;
    for (g, &lambda) in grid.iter().enumerate() {
        if full.saturated {
            break;
        }
        path.push(full.step(lambda)?);
        let mut losses = Vec::with_capacity(k);
        for (walker, rows) in walkers.iter_mut().zip(&tests) {
            let fit = walker.step(lambda)?;
            losses.push(fold_loss(family, &fit, x, rows, target));
        }
        cv_mean.push(math::mean(&losses));
        cv_se.push(math::sqrt(math::sample_variance(&losses) / k as f64));
        if cv_mean[g] < cv_mean[index_min] {
            index_min = g;
        }
        if g >= index_min + CV_PATIENCE && cv_mean[g] > cv_mean[index_min] + cv_se[index_min] {
            break;
        }
    }
    grid.truncate(path.len());
    let bound = cv_mean[index_min] + cv_se[index_min];
    let index_1se = (0..=index_min).find(|&g| cv_mean[g] <= bound).unwrap_or(index_min);
    for idx in [index_1se, index_min] {
        path[idx] = full.refine(idx, grid[idx])?;
    }
    Ok(CvResult {
        family,
        lambda_min: grid[index_min],
        lambda_1se: grid[index_1se],
        lambda_grid: grid,
        cv_mean,
        cv_se,
        index_min,
        index_1se,
        path,
    })
}

/// Plug-in penalty `(c/√n) Φ⁻¹(1 − γ/(2p))` with `c = 1.1`, `γ = 0.1 / log n`,
/// on the per-observation loss scale of the solvers.
///
/// The logistic value is halved: the logistic score `d − p` has standard
/// deviation at most 1/2. Linear callers multiply by a noise scale estimate.
pub fn plugin_lambda(n: usize, p: usize, family: Family) -> f64 {
    let nf = n.max(2) as f64;
    let gamma = PLUGIN_GAMMA_NUMERATOR / math::ln(nf);
    let base = PLUGIN_C / math::sqrt(nf) * math::normal_quantile(1.0 - gamma / (2.0 * p.max(1) as f64));
    match family {
        Family::Linear => base,
        Family::Logistic => 0.5 * base,
    }
}

/// Largest KKT violation of a linear fit, on the standardized scale:
/// `max_j` of `(|g_j| − λ)₊` for zero coefficients and `|g_j − λ sign β_j|`
/// otherwise, where `g_j = x̃_jᵀ r / n`.
pub fn kkt_violation(x: &Matrix, y: &[f64], fit: &LassoFit) -> f64 {
    let n = x.nrows() as f64;
    let eta = fit.linear_predictor(x);
    let r: Vec<f64> = y.iter().zip(&eta).map(|(a, b)| a - b).collect();
    let mut worst: f64 = (math::mean(&r)).abs();
    for j in 0..x.ncols() {
        if fit.excluded.contains(&j) {
            continue;
        }
        let col = x.col(j);
        let m = math::mean(col);
        let sd = math::sqrt(math::population_variance(col));
        let g = col.iter().zip(&r).map(|(v, ri)| (v - m) / sd * ri).sum::<f64>() / n;
        let b = fit.coefficients[j];
        let v = if b == 0.0 { (g.abs() - fit.lambda).max(0.0) } else { (g - fit.lambda * b.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}

/// Linear objective `(1/2n)‖y − a − Xβ‖² + λ Σ sd(x_j) |β_j|` on the original scale.
pub fn linear_objective(x: &Matrix, y: &[f64], fit: &LassoFit) -> f64 {
    let eta = fit.linear_predictor(x);
    let rss: f64 = y.iter().zip(&eta).map(|(a, b)| (a - b) * (a - b)).sum();
    let penalty: f64 = fit
        .active_set
        .iter()
        .map(|&j| fit.coefficients[j].abs() * math::sqrt(math::population_variance(x.col(j))))
        .sum();
    rss / (2.0 * x.nrows() as f64) + fit.lambda * penalty
}

/// Logistic objective on the original scale with the standardized penalty.
pub fn logistic_objective(x: &Matrix, d: &[bool], fit: &LassoFit) -> f64 {
    let eta = fit.linear_predictor(x);
    let loss: f64 = eta
        .iter()
        .zip(d)
        .map(|(&e, &t)| softplus(e) - if t { e } else { 0.0 })
        .sum::<f64>()
        / x.nrows() as f64;
    let penalty: f64 = fit
        .active_set
        .iter()
        .map(|&j| fit.coefficients[j].abs() * math::sqrt(math::population_variance(x.col(j))))
        .sum();
    loss + fit.lambda * penalty
}

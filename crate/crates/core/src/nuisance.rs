//! Nuisance estimation: propensity scores, per-arm outcome regressions and
//! the double-selection propensity refit.
//!
//! The model types hold their cross-validation lazily, so one CV run serves
//! every tuning rule that needs it and a propensity model fitted once can be
//! reused across outcome scenarios that share `(x, d)`.

use alloc::vec;
use alloc::vec::Vec;
use core::cell::OnceCell;
use core::fmt;

use crate::dgp::Observed;
use crate::lasso::{self, CvResult, Family, LassoError, LassoFit};
use crate::math;
use crate::matrix::{solve_spd, Matrix};
use crate::rng::{derive_seed, stream};

/// Smallest arm that gets its own outcome regression.
pub const MIN_ARM_SIZE: usize = 20;
/// Newton step cap for the unpenalized propensity refit.
pub const REFIT_MAX_STEPS: usize = 100;
const REFIT_TOL: f64 = 1e-8;
const SEPARATION_ETA: f64 = 30.0;
const PLUGIN_SIGMA_STEPS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TuningRule {
    CvMin,
    Cv1Se,
    PlugIn,
}

impl TuningRule {
    pub const ALL: [Self; 3] = [Self::CvMin, Self::Cv1Se, Self::PlugIn];

    pub fn name(self) -> &'static str {
        match self {
            Self::CvMin => "cv-min",
            Self::Cv1Se => "cv-1se",
            Self::PlugIn => "plug-in",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for TuningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefitFailure {
    #[error("{selected} selected columns exceed half the smaller arm ({limit})")]
    TooManyColumns { selected: usize, limit: usize },
    #[error("fitted index diverges (separation)")]
    Separation,
    #[error("Hessian is singular")]
    Singular,
    #[error("no convergence in {0} Newton steps")]
    NotConverged(usize),
    #[error("a treatment arm is empty")]
    EmptyArm,
}

/// Why a nuisance component could not be produced.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NuisanceFailure {
    #[error("pscore: {0}")]
    Pscore(LassoError),
    #[error("outcome-arm: {arm} arm has {size} observations")]
    OutcomeArm { arm: &'static str, size: usize },
    #[error("outcome: {0}")]
    Outcome(LassoError),
    #[error("selection: {0}")]
    Selection(LassoError),
    #[error("refit: {0}")]
    Refit(RefitFailure),
}

impl NuisanceFailure {
    /// Short machine-readable reason.
    pub fn reason(&self) -> &'static str {
        match self {
            Self::Pscore(_) => "pscore",
            Self::OutcomeArm { .. } => "outcome-arm",
            Self::Outcome(_) => "outcome",
            Self::Selection(_) => "selection",
            Self::Refit(_) => "refit",
        }
    }
}

/// Estimated propensity scores with the selection that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityEstimate {
    /// Clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`.
    pub e_hat: Vec<f64>,
    /// Penalty used; `None` for the unpenalized refit.
    pub lambda: Option<f64>,
    pub active_set: Vec<usize>,
}

/// Outcome predictions for every observation under both arms' regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeEstimate {
    pub m1_hat: Vec<f64>,
    pub m0_hat: Vec<f64>,
    /// Penalties for the treated and control regressions.
    pub lambda: [f64; 2],
    pub active_sets: [Vec<usize>; 2],
}

impl OutcomeEstimate {
    /// The `m ≡ 0` outcome model.
    pub fn zero(n: usize) -> Self {
        Self { m1_hat: vec![0.0; n], m0_hat: vec![0.0; n], lambda: [0.0; 2], active_sets: [Vec::new(), Vec::new()] }
    }
}

/// Everything the estimators consume. Components fail independently: a
/// propensity failure leaves the outcome-only estimators usable.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSet {
    pub pscore: Result<PropensityEstimate, NuisanceFailure>,
    pub outcomes: Result<OutcomeEstimate, NuisanceFailure>,
}

impl NuisanceSet {
    pub fn status(&self) -> Result<(), &NuisanceFailure> {
        self.pscore.as_ref().err().or(self.outcomes.as_ref().err()).map_or(Ok(()), Err)
    }

    pub fn e_hat(&self) -> Option<&[f64]> {
        self.pscore.as_ref().ok().map(|p| p.e_hat.as_slice())
    }
}

fn as_target(d: &[bool]) -> Vec<f64> {
    d.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect()
}

/// Selected penalty and fit for one tuning rule, taking penalties from a
/// lazily computed CV or from the plug-in formula.
fn tuned_fit(
    cv: &OnceCell<Result<CvResult, LassoError>>,
    run_cv: impl FnOnce() -> Result<CvResult, LassoError>,
    plug_in: impl FnOnce() -> Result<LassoFit, LassoError>,
    rule: TuningRule,
) -> Result<LassoFit, LassoError> {
    match rule {
        TuningRule::PlugIn => plug_in(),
        TuningRule::CvMin | TuningRule::Cv1Se => {
            let cv = cv.get_or_init(run_cv).as_ref().map_err(Clone::clone)?;
            Ok(if rule == TuningRule::CvMin { cv.fit_min() } else { cv.fit_1se() }.clone())
        }
    }
}

/// Logistic Lasso of `D` on `X`.
pub struct PropensityModel<'a> {
    x: &'a Matrix,
    d: &'a [bool],
    folds: usize,
    seed: u64,
    cv: OnceCell<Result<CvResult, LassoError>>,
}

impl<'a> PropensityModel<'a> {
    /// `seed` is the repetition seed; the fold stream is derived from it.
    pub fn new(x: &'a Matrix, d: &'a [bool], seed: u64) -> Self {
        Self { x, d, folds: lasso::DEFAULT_FOLDS, seed, cv: OnceCell::new() }
    }

    pub fn fit(&self, rule: TuningRule) -> Result<LassoFit, NuisanceFailure> {
        let target = as_target(self.d);
        tuned_fit(
            &self.cv,
            || {
                lasso::cross_validate(
                    self.x,
                    &target,
                    Family::Logistic,
                    self.folds,
                    derive_seed(self.seed, &[stream::PSCORE_FOLDS]),
                )
            },
            || {
                let lambda = lasso::plugin_lambda(self.x.nrows(), self.x.ncols(), Family::Logistic);
                lasso::fit_logistic_lasso(self.x, self.d, lambda)
            },
            rule,
        )
        .map_err(NuisanceFailure::Pscore)
    }

    pub fn estimate(&self, rule: TuningRule) -> Result<PropensityEstimate, NuisanceFailure> {
        let fit = self.fit(rule)?;
        Ok(PropensityEstimate { e_hat: fit.predict(self.x), lambda: Some(fit.lambda), active_set: fit.active_set })
    }
}

/// Linear Lasso of a response on `X`, optionally restricted to a row subset.
struct LinearModel {
    x: Matrix,
    y: Vec<f64>,
    folds: usize,
    seed: u64,
    cv: OnceCell<Result<CvResult, LassoError>>,
}

impl LinearModel {
    fn new(x: Matrix, y: Vec<f64>, seed: u64) -> Self {
        Self { x, y, folds: lasso::DEFAULT_FOLDS, seed, cv: OnceCell::new() }
    }

    fn fit(&self, rule: TuningRule) -> Result<LassoFit, LassoError> {
        tuned_fit(
            &self.cv,
            || lasso::cross_validate(&self.x, &self.y, Family::Linear, self.folds, self.seed),
            || plugin_linear_fit(&self.x, &self.y),
            rule,
        )
    }
}

/// Plug-in linear fit with the noise scale re-estimated from the residuals
/// until it settles.
fn plugin_linear_fit(x: &Matrix, y: &[f64]) -> Result<LassoFit, LassoError> {
    let n = x.nrows();
    let base = lasso::plugin_lambda(n, x.ncols(), Family::Linear);
    let mut sigma = math::sqrt(math::population_variance(y));
    let mut fit = lasso::fit_linear_lasso(x, y, base * sigma)?;
    for _ in 0..PLUGIN_SIGMA_STEPS {
        let pred = fit.predict(x);
        let rss: f64 = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum();
        let dof = n.saturating_sub(fit.active_set.len() + 1).max(1);
        let next = math::sqrt(rss / dof as f64);
        let settled = (next - sigma).abs() <= 1e-4 * sigma.max(f64::MIN_POSITIVE);
        sigma = next;
        if settled || sigma == 0.0 {
            break;
        }
        fit = lasso::fit_linear_lasso(x, y, base * sigma)?;
    }
    Ok(fit)
}

/// Separate outcome regressions on the treated and control subsamples.
pub struct OutcomeModels<'a> {
    x: &'a Matrix,
    arms: [Result<LinearModel, NuisanceFailure>; 2],
}

impl<'a> OutcomeModels<'a> {
    pub fn new(obs: Observed<'a>, seed: u64) -> Self {
        let arm = |treated: bool, tag: u64| {
            let rows = obs.arm(treated);
            if rows.len() < MIN_ARM_SIZE {
                let arm = if treated { "treated" } else { "control" };
                return Err(NuisanceFailure::OutcomeArm { arm, size: rows.len() });
            }
            let y = rows.iter().map(|&i| obs.y[i]).collect();
            Ok(LinearModel::new(obs.x.select_rows(&rows), y, derive_seed(seed, &[tag])))
        };
        Self {
            x: obs.x,
            arms: [arm(true, stream::OUTCOME_TREATED_FOLDS), arm(false, stream::OUTCOME_CONTROL_FOLDS)],
        }
    }

    pub fn estimate(&self, rule: TuningRule) -> Result<OutcomeEstimate, NuisanceFailure> {
        let mut fits = Vec::with_capacity(2);
        for arm in &self.arms {
            let model = arm.as_ref().map_err(Clone::clone)?;
            fits.push(model.fit(rule).map_err(NuisanceFailure::Outcome)?);
        }
        let control = fits.pop().expect("two arms");
        let treated = fits.pop().expect("two arms");
        Ok(OutcomeEstimate {
            m1_hat: treated.predict(self.x),
            m0_hat: control.predict(self.x),
            lambda: [treated.lambda, control.lambda],
            active_sets: [treated.active_set, control.active_set],
        })
    }
}

/// Linear Lasso of `Y` on `X` over the full sample, for double selection.
pub struct SelectionModel {
    model: LinearModel,
}

impl SelectionModel {
    pub fn new(obs: Observed<'_>, seed: u64) -> Self {
        Self { model: LinearModel::new(obs.x.clone(), obs.y.to_vec(), derive_seed(seed, &[stream::SELECTION_FOLDS])) }
    }

    pub fn active_set(&self, rule: TuningRule) -> Result<Vec<usize>, NuisanceFailure> {
        self.model.fit(rule).map(|f| f.active_set).map_err(NuisanceFailure::Selection)
    }
}

/// Union of the outcome and treatment active sets, sorted.
pub fn selection_union(
    outcome: &SelectionModel,
    treatment: &PropensityModel<'_>,
    rule: TuningRule,
) -> Result<Vec<usize>, NuisanceFailure> {
    let mut union = outcome.active_set(rule)?;
    union.extend(treatment.fit(rule)?.active_set);
    union.sort_unstable();
    union.dedup();
    Ok(union)
}

pub fn estimate_pscore(
    x: &Matrix,
    d: &[bool],
    rule: TuningRule,
    seed: u64,
) -> Result<PropensityEstimate, NuisanceFailure> {
    PropensityModel::new(x, d, seed).estimate(rule)
}

pub fn estimate_outcomes(obs: Observed<'_>, rule: TuningRule, seed: u64) -> Result<OutcomeEstimate, NuisanceFailure> {
    OutcomeModels::new(obs, seed).estimate(rule)
}

pub fn double_select_union(obs: Observed<'_>, rule: TuningRule, seed: u64) -> Result<Vec<usize>, NuisanceFailure> {
    selection_union(&SelectionModel::new(obs, seed), &PropensityModel::new(obs.x, obs.d, seed), rule)
}

/// Unpenalized logistic regression of `D` on the selected columns plus an
/// intercept, by Newton–Raphson.
pub fn refit_pscore(x: &Matrix, d: &[bool], selected: &[usize]) -> Result<PropensityEstimate, RefitFailure> {
    let n = d.len();
    let n1 = d.iter().filter(|&&t| t).count();
    if n1 == 0 || n1 == n {
        return Err(RefitFailure::EmptyArm);
    }
    let limit = n1.min(n - n1) / 2;
    if selected.len() > limit {
        return Err(RefitFailure::TooManyColumns { selected: selected.len(), limit });
    }
    let k = selected.len() + 1;
    let column = |c: usize, i: usize| if c == 0 { 1.0 } else { x[(i, selected[c - 1])] };
    let mut theta = vec![0.0; k];
    theta[0] = math::logit(n1 as f64 / n as f64);
    let mut eta = vec![theta[0]; n];
    for _ in 0..REFIT_MAX_STEPS {
        let mut hess = vec![0.0; k * k];
        let mut grad = vec![0.0; k];
        let mut row = vec![0.0; k];
        for i in 0..n {
            let p = math::sigmoid(eta[i]);
            let w = p * (1.0 - p);
            let r = if d[i] { 1.0 } else { 0.0 } - p;
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = column(c, i);
            }
            for a in 0..k {
                grad[a] += row[a] * r;
                for b in 0..=a {
                    hess[a * k + b] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[b * k + a] = hess[a * k + b];
            }
        }
        let step = solve_spd(&hess, &grad).ok_or(RefitFailure::Singular)?;
        theta.iter_mut().zip(&step).for_each(|(t, s)| *t += s);
        for (i, e) in eta.iter_mut().enumerate() {
            *e = (0..k).map(|c| theta[c] * column(c, i)).sum();
        }
        if eta.iter().any(|e| e.abs() > SEPARATION_ETA) {
            return Err(RefitFailure::Separation);
        }
        if step.iter().all(|s| s.abs() < REFIT_TOL) {
            let e_hat = eta.iter().map(|&e| math::sigmoid(e).clamp(lasso::PROB_CLAMP, 1.0 - lasso::PROB_CLAMP)).collect();
            return Ok(PropensityEstimate { e_hat, lambda: None, active_set: selected.to_vec() });
        }
    }
    Err(RefitFailure::NotConverged(REFIT_MAX_STEPS))
}

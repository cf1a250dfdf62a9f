//! The eight average-treatment-effect estimators.
//!
//! Every estimator is a pure function of the observed data and, where
//! needed, nuisance estimates passed in as plain slices. Failures are data:
//! an estimator that cannot be computed returns a result with status
//! [`EstimatorStatus::NotEstimable`] instead of an error.
//!
//! Weighting conventions:
//!
//! * IPW weights are self-normalized within each arm (Hájek form), so the
//!   treated weights and the control weights each sum to one.
//! * Radius-matching weights are per target observation over the opposite
//!   arm, with a triangular kernel in inverse-propensity distance
//!   `|1/ê_j − 1/ê_i|`. The radius is `1.5 ×` a linear-interpolation 90th
//!   percentile: by default of the one-to-one (nearest-neighbour) match
//!   distances over the whole sample, optionally of target `i`'s own
//!   distances; see [`BandwidthRule`].
//! * Balancing weights minimize `(1−ζ)‖w‖² + ζ‖x̄ − Σ w_i x_i‖∞²` over the
//!   simplex of each arm.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dgp::Observed;
use crate::math;
use crate::matrix::Matrix;
use crate::nuisance::{refit_pscore, RefitFailure};

pub const DEFAULT_RADIUS_FACTOR: f64 = 1.5;
pub const BANDWIDTH_QUANTILE: f64 = 0.9;
pub const DEFAULT_ZETA: f64 = 0.5;
/// Duality-gap tolerance for the balancing weights.
pub const ARB_TOLERANCE: f64 = 1e-6;
pub const ARB_MAX_ITER: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Naive,
    Ipw,
    Rm,
    Dsipw,
    Dsrm,
    Aipw,
    Arm,
    Arb,
}

impl EstimatorId {
    pub const ALL: [Self; 8] =
        [Self::Naive, Self::Ipw, Self::Rm, Self::Dsipw, Self::Dsrm, Self::Aipw, Self::Arm, Self::Arb];

    /// Lower-case identifier used in files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Ipw => "ipw",
            Self::Rm => "rm",
            Self::Dsipw => "dsipw",
            Self::Dsrm => "dsrm",
            Self::Aipw => "aipw",
            Self::Arm => "arm",
            Self::Arb => "arb",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Naive => "Naive",
            Self::Ipw => "IPW",
            Self::Rm => "RM",
            Self::Dsipw => "DSIPW",
            Self::Dsrm => "DSRM",
            Self::Aipw => "AIPW",
            Self::Arm => "ARM",
            Self::Arb => "ARB",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name().eq_ignore_ascii_case(s.trim()))
    }

    /// Estimators of the form outcome term + weighted residual term.
    pub fn is_augmented(self) -> bool {
        matches!(self, Self::Aipw | Self::Arm | Self::Arb)
    }

    /// The weighting-only counterpart of an augmented estimator.
    pub fn weighting_counterpart(self) -> Option<Self> {
        match self {
            Self::Aipw => Some(Self::Ipw),
            Self::Arm => Some(Self::Rm),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorStatus {
    Ok,
    NotEstimable(String),
}

/// Split of an augmented estimate into its outcome-model and weighted-residual parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub outcome_term: f64,
    pub weighting_term: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub id: EstimatorId,
    pub ate_hat: Option<f64>,
    pub status: EstimatorStatus,
    pub decomposition: Option<Decomposition>,
}

impl EstimatorResult {
    pub fn ok(id: EstimatorId, ate: f64) -> Self {
        if !ate.is_finite() {
            return Self::not_estimable(id, "non-finite estimate");
        }
        Self { id, ate_hat: Some(ate), status: EstimatorStatus::Ok, decomposition: None }
    }

    pub fn augmented(id: EstimatorId, outcome_term: f64, weighting_term: f64) -> Self {
        let mut r = Self::ok(id, outcome_term + weighting_term);
        if r.is_ok() {
            r.decomposition = Some(Decomposition { outcome_term, weighting_term });
        }
        r
    }

    pub fn not_estimable(id: EstimatorId, reason: impl ToString) -> Self {
        Self { id, ate_hat: None, status: EstimatorStatus::NotEstimable(reason.to_string()), decomposition: None }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EstimatorStatus::Ok
    }
}

fn arm_sizes(d: &[bool]) -> (usize, usize) {
    let n1 = d.iter().filter(|&&t| t).count();
    (n1, d.len() - n1)
}

fn both_arms(id: EstimatorId, d: &[bool]) -> Option<EstimatorResult> {
    let (n1, n0) = arm_sizes(d);
    (n1 == 0 || n0 == 0).then(|| EstimatorResult::not_estimable(id, "empty-arm"))
}

/// Difference of arm means.
pub fn naive(obs: Observed<'_>) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Naive, obs.d) {
        return r;
    }
    let (n1, n0) = arm_sizes(obs.d);
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&y, &t) in obs.y.iter().zip(obs.d) {
        if t {
            s1 += y;
        } else {
            s0 += y;
        }
    }
    EstimatorResult::ok(EstimatorId::Naive, s1 / n1 as f64 - s0 / n0 as f64)
}

/// Per-observation IPW weights: `1/ê` normalized over the treated and
/// `1/(1−ê)` normalized over the controls.
pub fn ipw_weights(e_hat: &[f64], d: &[bool]) -> Vec<f64> {
    let mut w: Vec<f64> = e_hat.iter().zip(d).map(|(&e, &t)| if t { 1.0 / e } else { 1.0 / (1.0 - e) }).collect();
    let (mut s1, mut s0) = (0.0, 0.0);
    for (&wi, &t) in w.iter().zip(d) {
        if t {
            s1 += wi;
        } else {
            s0 += wi;
        }
    }
    for (wi, &t) in w.iter_mut().zip(d) {
        *wi /= if t { s1 } else { s0 };
    }
    w
}

/// `Σ_treated w·v − Σ_control w·v`.
fn arm_contrast(w: &[f64], d: &[bool], v: impl Fn(usize) -> f64) -> f64 {
    let mut total = 0.0;
    for (i, (&wi, &t)) in w.iter().zip(d).enumerate() {
        if t {
            total += wi * v(i);
        } else {
            total -= wi * v(i);
        }
    }
    total
}

pub fn ipw(obs: Observed<'_>, e_hat: &[f64]) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Ipw, obs.d) {
        return r;
    }
    let w = ipw_weights(e_hat, obs.d);
    EstimatorResult::ok(EstimatorId::Ipw, arm_contrast(&w, obs.d, |i| obs.y[i]))
}

fn outcome_term(m1: &[f64], m0: &[f64]) -> f64 {
    m1.iter().zip(m0).map(|(a, b)| a - b).sum::<f64>() / m1.len() as f64
}

/// `mean(m1 − m0) + Σ_treated w(y − m1) − Σ_control w(y − m0)` with IPW weights.
pub fn aipw(obs: Observed<'_>, e_hat: &[f64], m1: &[f64], m0: &[f64]) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Aipw, obs.d) {
        return r;
    }
    let w = ipw_weights(e_hat, obs.d);
    let weighting = arm_contrast(&w, obs.d, |i| obs.y[i] - if obs.d[i] { m1[i] } else { m0[i] });
    EstimatorResult::augmented(EstimatorId::Aipw, outcome_term(m1, m0), weighting)
}

/// Triangular kernel `max(0, 1 − u/h)`.
#[inline]
pub fn triangular_kernel(u: f64, h: f64) -> f64 {
    (1.0 - u.abs() / h).max(0.0)
}

/// Matching weights of every observation over the opposite arm.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWeights {
    /// For each observation, `(opposite-arm index, weight)` pairs with
    /// positive weight, summing to one.
    pub matches: Vec<Vec<(usize, f64)>>,
    /// Per-observation bandwidth; zero marks the uniform fallback.
    pub bandwidth: Vec<f64>,
}

impl KernelWeights {
    /// `Σ_j w_ij v_j` for observation `i`.
    pub fn smooth(&self, i: usize, v: impl Fn(usize) -> f64) -> f64 {
        self.matches[i].iter().map(|&(j, w)| w * v(j)).sum()
    }
}

/// How the matching radius is derived from propensity-score distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandwidthRule {
    /// One radius for the sample: the factor times the 90th percentile of
    /// every observation's nearest opposite-arm distance. Targets with no
    /// opposite-arm observation inside the radius use their nearest
    /// neighbour(s).
    PairMatch,
    /// A radius per target: the factor times the 90th percentile of that
    /// target's distances to the whole opposite arm.
    PerTarget,
}

impl BandwidthRule {
    pub const ALL: [Self; 2] = [Self::PairMatch, Self::PerTarget];

    pub fn name(self) -> &'static str {
        match self {
            Self::PairMatch => "pair-match",
            Self::PerTarget => "per-target",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(s.trim()))
    }
}

pub const DEFAULT_BANDWIDTH_RULE: BandwidthRule = BandwidthRule::PairMatch;

/// Radius-matching weights in inverse-propensity distance.
///
/// Requires both arms to be nonempty. Rows that fall back to equal weights
/// over their nearest opposite-arm observation(s) record a bandwidth of 0;
/// with constant scores every row does, which gives uniform weights.
pub fn arm_weights(e_hat: &[f64], d: &[bool], radius_factor: f64, rule: BandwidthRule) -> KernelWeights {
    let inv: Vec<f64> = e_hat.iter().map(|&e| 1.0 / e).collect();
    let treated: Vec<usize> = (0..d.len()).filter(|&i| d[i]).collect();
    let control: Vec<usize> = (0..d.len()).filter(|&i| !d[i]).collect();
    let opposite = |i: usize| if d[i] { &control } else { &treated };
    let distances = |i: usize| opposite(i).iter().map(|&j| (inv[j] - inv[i]).abs()).collect::<Vec<f64>>();
    let shared_h = match rule {
        BandwidthRule::PairMatch => {
            let mut nearest: Vec<f64> =
                (0..d.len()).map(|i| distances(i).into_iter().fold(f64::INFINITY, f64::min)).collect();
            Some(radius_factor * math::percentile_in_place(&mut nearest, BANDWIDTH_QUANTILE))
        }
        BandwidthRule::PerTarget => None,
    };
    let mut matches = Vec::with_capacity(d.len());
    let mut bandwidth = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        let opp = opposite(i);
        let dist = distances(i);
        let h = shared_h.unwrap_or_else(|| {
            let mut scratch = dist.clone();
            radius_factor * math::percentile_in_place(&mut scratch, BANDWIDTH_QUANTILE)
        });
        let mut row: Vec<(usize, f64)> = if h > 0.0 {
            opp.iter()
                .zip(&dist)
                .filter_map(|(&j, &u)| {
                    let k = triangular_kernel(u, h);
                    (k > 0.0).then_some((j, k))
                })
                .collect()
        } else {
            Vec::new()
        };
        if row.is_empty() {
            let nearest = match rule {
                BandwidthRule::PairMatch => dist.iter().copied().fold(f64::INFINITY, f64::min),
                // Uniform over the whole arm.
                BandwidthRule::PerTarget => f64::INFINITY,
            };
            row = opp.iter().zip(&dist).filter(|&(_, &u)| u <= nearest).map(|(&j, _)| (j, 1.0)).collect();
            bandwidth.push(0.0);
        } else {
            bandwidth.push(h);
        }
        let total: f64 = row.iter().map(|&(_, w)| w).sum();
        row.iter_mut().for_each(|(_, w)| *w /= total);
        matches.push(row);
    }
    KernelWeights { matches, bandwidth }
}

/// `(1/n) Σ [D(Y − Ŷ⁰) + (1−D)(Ŷ¹ − Y)]` with kernel-matched counterfactuals.
pub fn rm_with(obs: Observed<'_>, weights: &KernelWeights) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Rm, obs.d) {
        return r;
    }
    let n = obs.n();
    let mut total = 0.0;
    for i in 0..n {
        let matched = weights.smooth(i, |j| obs.y[j]);
        total += if obs.d[i] { obs.y[i] - matched } else { matched - obs.y[i] };
    }
    EstimatorResult::ok(EstimatorId::Rm, total / n as f64)
}

pub fn rm(obs: Observed<'_>, e_hat: &[f64]) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Rm, obs.d) {
        return r;
    }
    rm_with(obs, &arm_weights(e_hat, obs.d, DEFAULT_RADIUS_FACTOR, DEFAULT_BANDWIDTH_RULE))
}

/// Kernel-matched residual correction of the augmented matching estimator:
/// `(1/n) Σ [D(Y − m1) − D Σ_j w(Y_j − m0_j) + (1−D) Σ_j w(Y_j − m1_j) − (1−D)(Y − m0)]`.
pub fn arm_augmentation(obs: Observed<'_>, weights: &KernelWeights, m1: &[f64], m0: &[f64]) -> f64 {
    let n = obs.n();
    let mut total = 0.0;
    for i in 0..n {
        total += if obs.d[i] {
            (obs.y[i] - m1[i]) - weights.smooth(i, |j| obs.y[j] - m0[j])
        } else {
            weights.smooth(i, |j| obs.y[j] - m1[j]) - (obs.y[i] - m0[i])
        };
    }
    total / n as f64
}

pub fn arm_with(obs: Observed<'_>, weights: &KernelWeights, m1: &[f64], m0: &[f64]) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Arm, obs.d) {
        return r;
    }
    EstimatorResult::augmented(EstimatorId::Arm, outcome_term(m1, m0), arm_augmentation(obs, weights, m1, m0))
}

pub fn arm(obs: Observed<'_>, e_hat: &[f64], m1: &[f64], m0: &[f64]) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Arm, obs.d) {
        return r;
    }
    arm_with(obs, &arm_weights(e_hat, obs.d, DEFAULT_RADIUS_FACTOR, DEFAULT_BANDWIDTH_RULE), m1, m0)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArbError {
    #[error("arm is empty")]
    EmptyArm,
    #[error("zeta must lie in (0, 1), got {0}")]
    InvalidZeta(f64),
    #[error("dimension mismatch between arm rows and target means")]
    DimensionMismatch,
    #[error("no convergence in {0} iterations")]
    NotConverged(usize),
}

/// Balancing weights over one arm with their objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbWeights {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// `(1−ζ)‖w‖² + ζ‖t − Aᵀw‖∞²` where the rows of `a` are the arm's covariates.
pub fn arb_objective(a: &Matrix, target: &[f64], w: &[f64], zeta: f64) -> f64 {
    let fitted = a.tr_mul_vec(w);
    let imbalance = target.iter().zip(&fitted).map(|(t, f)| (t - f).abs()).fold(0.0, f64::max);
    (1.0 - zeta) * w.iter().map(|v| v * v).sum::<f64>() + zeta * imbalance * imbalance
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Proximal map of `c‖u‖₁²` with step `s`: a soft threshold whose level
/// depends on how many coordinates survive.
fn prox_l1_squared(v: &[f64], c: f64) -> Vec<f64> {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut sum = 0.0;
    let mut tau = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        sum += m;
        let t = 2.0 * c * sum / (1.0 + 2.0 * c * (k + 1) as f64);
        if m > t {
            tau = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| x.signum() * (x.abs() - tau).max(0.0)).collect()
}

/// Largest squared singular value of `a`, by power iteration on `AᵀA`.
fn spectral_norm_sq(a: &Matrix) -> f64 {
    let mut v = vec![1.0 / math::sqrt(a.ncols().max(1) as f64); a.ncols()];
    let mut est = 0.0;
    for _ in 0..50 {
        let av = a.mul_vec(&v);
        let w = a.tr_mul_vec(&av);
        let norm = math::sqrt(math::dot(&w, &w));
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - est).abs() <= 1e-6 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Balancing weights: minimize `(1−ζ)‖w‖² + ζ‖t − Aᵀw‖∞²` over the simplex.
///
/// Solved on the dual by accelerated proximal gradient with backtracking and
/// adaptive restart. For a dual point `u ∈ Rᵖ` the primal minimizer is
/// `w(u) = Π_simplex(Au / (2(1−ζ)))`; iteration stops once the duality gap
/// between `w(u)` and `u` is at most [`ARB_TOLERANCE`]. Uniform weights are
/// returned whenever they are at least as good.
pub fn arb_weights(a: &Matrix, target: &[f64], zeta: f64) -> Result<ArbWeights, ArbError> {
    let m = a.nrows();
    if m == 0 {
        return Err(ArbError::EmptyArm);
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(ArbError::InvalidZeta(zeta));
    }
    if a.ncols() != target.len() {
        return Err(ArbError::DimensionMismatch);
    }
    let uniform = vec![1.0 / m as f64; m];
    let uniform_obj = arb_objective(a, target, &uniform, zeta);
    let ridge = 2.0 * (1.0 - zeta);
    let c = 1.0 / (4.0 * zeta);
    let primal = |u: &[f64]| -> Vec<f64> {
        let au: Vec<f64> = a.mul_vec(u).into_iter().map(|v| v / ridge).collect();
        project_simplex(&au)
    };
    // Smooth part of the negated dual, f(u) = −uᵀt − min_w[(1−ζ)‖w‖² − (Au)ᵀw],
    // with gradient −t + Aᵀw(u).
    let smooth = |u: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
        let w = primal(u);
        let au = a.mul_vec(u);
        let inner = (1.0 - zeta) * math::dot(&w, &w) - math::dot(&au, &w);
        let value = -math::dot(u, target) - inner;
        let aw = a.tr_mul_vec(&w);
        let grad = aw.iter().zip(target).map(|(x, t)| x - t).collect();
        (value, grad, w)
    };
    let dual_value = |u: &[f64], f: f64| -> f64 {
        let l1: f64 = u.iter().map(|x| x.abs()).sum();
        -(f + c * l1 * l1)
    };

    let mut lip = (spectral_norm_sq(a) / ridge).max(1e-12);
    let p = a.ncols();
    let mut u = vec![0.0; p];
    let mut y = u.clone();
    let mut t_k = 1.0;
    let mut best_w = uniform.clone();
    let mut best_obj = uniform_obj;
    let mut prev_obj = f64::INFINITY;
    for iter in 1..=ARB_MAX_ITER {
        let (fy, gy, _) = smooth(&y);
        let next = loop {
            let step = 1.0 / lip;
            let v: Vec<f64> = y.iter().zip(&gy).map(|(yi, gi)| yi - step * gi).collect();
            let cand = prox_l1_squared(&v, c * step);
            let (fc, _, _) = smooth(&cand);
            let diff: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
            let model = fy + math::dot(&gy, &diff) + 0.5 * lip * math::dot(&diff, &diff);
            if fc <= model + 1e-12 * fc.abs().max(1.0) {
                break (cand, fc);
            }
            lip *= 2.0;
        };
        let (cand, fc) = next;
        let l1: f64 = cand.iter().map(|x| x.abs()).sum();
        let obj = fc + c * l1 * l1;
        let t_next = (1.0 + math::sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0;
        if obj > prev_obj {
            // Adaptive restart: drop momentum.
            y = cand.clone();
            t_k = 1.0;
        } else {
            let beta = (t_k - 1.0) / t_next;
            y = cand.iter().zip(&u).map(|(cn, uo)| cn + beta * (cn - uo)).collect();
            t_k = t_next;
        }
        u = cand;
        prev_obj = obj;

        if iter % 10 == 0 || iter == 1 {
            let (fu, _, w) = smooth(&u);
            let primal_obj = arb_objective(a, target, &w, zeta);
            if primal_obj < best_obj {
                best_obj = primal_obj;
                best_w = w;
            }
            if best_obj - dual_value(&u, fu) <= ARB_TOLERANCE {
                return Ok(ArbWeights { weights: best_w, objective: best_obj, iterations: iter });
            }
        }
    }
    Err(ArbError::NotConverged(ARB_MAX_ITER))
}

/// `mean(m1 − m0) + Σ_treated W(Y − m1) − Σ_control W(Y − m0)` with balancing
/// weights that target the full-sample covariate means.
pub fn arb(obs: Observed<'_>, m1: &[f64], m0: &[f64], zeta: f64) -> EstimatorResult {
    if let Some(r) = both_arms(EstimatorId::Arb, obs.d) {
        return r;
    }
    let target = obs.x.col_means();
    let mut weights = vec![0.0; obs.n()];
    for treated in [true, false] {
        let rows = obs.arm(treated);
        match arb_weights(&obs.x.select_rows(&rows), &target, zeta) {
            Ok(sol) => rows.iter().zip(&sol.weights).for_each(|(&i, &w)| weights[i] = w),
            Err(e) => return EstimatorResult::not_estimable(EstimatorId::Arb, alloc::format!("arb-weights: {e}")),
        }
    }
    let weighting = arm_contrast(&weights, obs.d, |i| obs.y[i] - if obs.d[i] { m1[i] } else { m0[i] });
    EstimatorResult::augmented(EstimatorId::Arb, outcome_term(m1, m0), weighting)
}

fn refit_failure(id: EstimatorId, e: &RefitFailure) -> EstimatorResult {
    EstimatorResult::not_estimable(id, alloc::format!("refit: {e}"))
}

/// Double-selection IPW and RM from a selected column set: the propensity
/// score is refitted without penalty on the selection and shared by both.
pub fn double_selection(obs: Observed<'_>, selected: &[usize]) -> [EstimatorResult; 2] {
    match refit_pscore(obs.x, obs.d, selected) {
        Ok(est) => {
            let mut ipw = ipw(obs, &est.e_hat);
            ipw.id = EstimatorId::Dsipw;
            let mut rm = rm(obs, &est.e_hat);
            rm.id = EstimatorId::Dsrm;
            [ipw, rm]
        }
        Err(e) => [refit_failure(EstimatorId::Dsipw, &e), refit_failure(EstimatorId::Dsrm, &e)],
    }
}

pub fn ds_ipw(obs: Observed<'_>, selected: &[usize]) -> EstimatorResult {
    match refit_pscore(obs.x, obs.d, selected) {
        Ok(est) => EstimatorResult { id: EstimatorId::Dsipw, ..ipw(obs, &est.e_hat) },
        Err(e) => refit_failure(EstimatorId::Dsipw, &e),
    }
}

pub fn ds_rm(obs: Observed<'_>, selected: &[usize]) -> EstimatorResult {
    match refit_pscore(obs.x, obs.d, selected) {
        Ok(est) => EstimatorResult { id: EstimatorId::Dsrm, ..rm(obs, &est.e_hat) },
        Err(e) => refit_failure(EstimatorId::Dsrm, &e),
    }
}

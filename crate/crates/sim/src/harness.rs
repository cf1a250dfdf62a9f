//! Monte Carlo driver.
//!
//! A work unit is one `(design, rep)` pair. Its seed is
//! `derive_seed(master_seed, [design_id, rep])` (SplitMix64 mixing, ChaCha8
//! streams), so results do not depend on which worker ran the unit or in
//! which order units finished; aggregation folds over rep index order.
//!
//! Within a unit the covariates and treatment are identical across the
//! requested outcome R² values (only the outcome noise scale changes), so
//! the propensity Lasso is fitted once and shared.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;

use ate_core::dgp::Observed;
use ate_core::estimators::{self, arm_weights};
use ate_core::nuisance::{
    selection_union, NuisanceFailure, OutcomeEstimate, OutcomeModels, PropensityEstimate, PropensityModel,
    SelectionModel,
};
use ate_core::rng::{derive_seed, stream};
use ate_core::{
    math, CalibratedDesign, DesignSpec, DgpError, EstimatorId, EstimatorResult, EstimatorStatus, TuningRule,
};

use crate::config::{OutcomeModel, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("design {design}: {source}")]
    Design { design: u8, source: DgpError },
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Seed of repetition `rep` of design `design_id`.
pub fn rep_seed(master_seed: u64, design_id: u8, rep: usize) -> u64 {
    derive_seed(master_seed, &[u64::from(design_id), rep as u64])
}

/// Seed of the pilot sample used to calibrate `c_Y` for a design.
pub fn pilot_seed(master_seed: u64, design_id: u8) -> u64 {
    derive_seed(master_seed, &[stream::PILOT, u64::from(design_id)])
}

/// Calibrates one catalogue design at the configured size.
pub fn calibrate(config: &RunConfig, design_id: u8) -> Result<CalibratedDesign, HarnessError> {
    let wrap = |source| HarnessError::Design { design: design_id, source };
    let mut spec = DesignSpec::catalogue(design_id, config.n, config.p).map_err(wrap)?;
    if spec.r2_d > 0.0 {
        spec.r2_d = config.r2_d;
    }
    spec.r2_y = config.r2_y[0];
    CalibratedDesign::with_pilot(spec, config.pilot_size, pilot_seed(config.master_seed, design_id)).map_err(wrap)
}

/// One nuisance fit recorded for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceRecord {
    /// `pscore`, `outcome` or `selection`.
    pub component: &'static str,
    pub rule: TuningRule,
    /// Penalties: one for pscore/selection, treated then control for outcome.
    pub lambda: Vec<f64>,
    /// Active-set sizes aligned with `lambda`.
    pub active: Vec<usize>,
    pub failure: Option<String>,
}

/// Everything produced for one (design, r2_y, rep).
#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub design: u8,
    pub r2_y: f64,
    pub rep: usize,
    pub seed: u64,
    pub n_treated: usize,
    pub results: Vec<EstimatorResult>,
    /// For AIPW and ARM: the weighting-only estimate from the same nuisance
    /// fits (IPW with the same ê, RM with the same kernel weights).
    pub weighting_only: BTreeMap<EstimatorId, Option<f64>>,
    pub nuisance: Vec<NuisanceRecord>,
}

/// Aggregate over the ok reps of one (design, r2_y, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub design: u8,
    pub r2_y: f64,
    pub estimator: EstimatorId,
    pub theta: f64,
    /// Mean of `ate_hat − θ`.
    pub bias: f64,
    /// Population standard deviation (divide by the ok count).
    pub se: f64,
    pub na: usize,
    pub rmse: f64,
    /// Per-rep estimates in rep order; `None` where not estimable.
    pub draws: Vec<Option<f64>>,
    /// Per-rep `(weighting-only estimate, augmentation term)` for the
    /// augmented estimators that have a weighting counterpart.
    pub augmentation: Option<Vec<Option<(f64, f64)>>>,
}

impl Cell {
    pub fn ok_count(&self) -> usize {
        self.draws.len() - self.na
    }

    pub fn ok_draws(&self) -> Vec<f64> {
        self.draws.iter().flatten().copied().collect()
    }

    /// Monte Carlo standard error of the bias.
    pub fn mc_se(&self) -> f64 {
        let k = self.ok_count();
        if k < 2 {
            return f64::NAN;
        }
        math::sqrt(math::sample_variance(&self.ok_draws()) / k as f64)
    }
}

/// Bias, population se, NA count and RMSE of a set of draws.
pub fn aggregate(draws: &[Option<f64>], theta: f64) -> (f64, f64, usize, f64) {
    let ok: Vec<f64> = draws.iter().flatten().map(|v| v - theta).collect();
    let na = draws.len() - ok.len();
    if ok.is_empty() {
        return (f64::NAN, f64::NAN, na, f64::NAN);
    }
    let bias = math::mean(&ok);
    let se = math::sqrt(math::population_variance(&ok));
    (bias, se, na, math::sqrt(bias * bias + se * se))
}

/// Calibration summary kept for the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    pub design: u8,
    pub pilot_seed: u64,
    pub theta: f64,
    pub c_d: f64,
    pub signal_variance: f64,
    /// `(r2_y, c_y)` per requested outcome R².
    pub c_y: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub config: RunConfig,
    pub designs: Vec<DesignSummary>,
    /// Ordered by design, r2_y, estimator.
    pub cells: Vec<Cell>,
    /// Ordered by design, rep, r2_y.
    pub reps: Vec<RepRecord>,
}

impl McReport {
    pub fn cell(&self, design: u8, r2_y: f64, estimator: EstimatorId) -> Option<&Cell> {
        self.cells.iter().find(|c| c.design == design && c.r2_y == r2_y && c.estimator == estimator)
    }
}

/// Runs the full grid. Per-rep estimator failures are recorded, never fatal.
pub fn run(config: &RunConfig) -> Result<McReport, HarnessError> {
    config.validate()?;
    if config.full_scale {
        warn!("full-scale profile: n={} p={} reps={}; expect a long runtime", config.n, config.p, config.reps);
    }
    let mut design_ids = config.designs.clone();
    design_ids.sort_unstable();
    design_ids.dedup();
    let mut r2_values = config.r2_y.clone();
    r2_values.sort_by(f64::total_cmp);

    let mut calibrated = Vec::with_capacity(design_ids.len());
    let mut summaries = Vec::with_capacity(design_ids.len());
    for &id in &design_ids {
        let base = calibrate(config, id)?;
        let variants = r2_values
            .iter()
            .map(|&r2| base.with_r2_y(r2).map_err(|source| HarnessError::Design { design: id, source }))
            .collect::<Result<Vec<_>, _>>()?;
        info!("design {id}: c_d={} c_y={:?}", base.c_d, variants.iter().map(|v| v.c_y).collect::<Vec<_>>());
        summaries.push(DesignSummary {
            design: id,
            pilot_seed: pilot_seed(config.master_seed, id),
            theta: base.spec.theta,
            c_d: base.c_d,
            signal_variance: base.signal_variance,
            c_y: variants.iter().map(|v| (v.spec.r2_y, v.c_y)).collect(),
        });
        calibrated.push(variants);
    }

    let units: Vec<(usize, usize)> =
        (0..design_ids.len()).flat_map(|d| (0..config.reps).map(move |r| (d, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let reps: Vec<RepRecord> = pool.install(|| {
        units
            .par_iter()
            .flat_map_iter(|&(d, r)| {
                let seed = rep_seed(config.master_seed, design_ids[d], r);
                let out = run_unit(config, &calibrated[d], r, seed);
                if (r + 1) % 25 == 0 {
                    info!("design {}: rep {} done", design_ids[d], r + 1);
                }
                out
            })
            .collect()
    });

    let mut cells = Vec::new();
    for (d, &design) in design_ids.iter().enumerate() {
        let theta = calibrated[d][0].spec.theta;
        for &r2 in &r2_values {
            let recs: Vec<&RepRecord> = reps.iter().filter(|x| x.design == design && x.r2_y == r2).collect();
            for &id in &config.estimators {
                let draws: Vec<Option<f64>> =
                    recs.iter().map(|rec| rec.results.iter().find(|e| e.id == id).and_then(|e| e.ate_hat)).collect();
                let augmentation = id.weighting_counterpart().map(|_| {
                    recs.iter()
                        .map(|rec| {
                            let est = rec.results.iter().find(|e| e.id == id)?.ate_hat?;
                            let base = (*rec.weighting_only.get(&id)?)?;
                            Some((base, est - base))
                        })
                        .collect()
                });
                let (bias, se, na, rmse) = aggregate(&draws, theta);
                cells.push(Cell { design, r2_y: r2, estimator: id, theta, bias, se, na, rmse, draws, augmentation });
            }
        }
    }
    Ok(McReport { config: config.clone(), designs: summaries, cells, reps })
}

/// Simulates one repetition for every outcome R² of a design and applies
/// the requested estimators.
pub fn run_unit(config: &RunConfig, variants: &[CalibratedDesign], rep: usize, seed: u64) -> Vec<RepRecord> {
    let samples: Vec<_> = variants.iter().map(|v| v.simulate(seed)).collect();
    let first = &samples[0];
    debug_assert!(samples.iter().all(|s| s.x == first.x && s.d == first.d));
    let pscore = PropensityModel::new(&first.x, &first.d, seed);
    variants
        .iter()
        .zip(&samples)
        .map(|(variant, sample)| {
            let obs = sample.observed();
            let mut rec = RepRecord {
                design: variant.spec.design_id,
                r2_y: variant.spec.r2_y,
                rep,
                seed,
                n_treated: obs.n_treated(),
                results: Vec::with_capacity(config.estimators.len()),
                weighting_only: BTreeMap::new(),
                nuisance: Vec::new(),
            };
            estimate_all(config, obs, &pscore, seed, &mut rec);
            rec
        })
        .collect()
}

fn estimate_all(config: &RunConfig, obs: Observed<'_>, pscore_model: &PropensityModel<'_>, seed: u64, rec: &mut RepRecord) {
    let outcome_models = (config.outcome_model == OutcomeModel::Lasso).then(|| OutcomeModels::new(obs, seed));
    let mut selection_model = None;
    let mut pscores: BTreeMap<TuningRule, Result<PropensityEstimate, NuisanceFailure>> = BTreeMap::new();
    let mut outcomes: BTreeMap<TuningRule, Result<OutcomeEstimate, NuisanceFailure>> = BTreeMap::new();
    let mut ds_cache: BTreeMap<TuningRule, [EstimatorResult; 2]> = BTreeMap::new();

    for &id in &config.estimators {
        let rule = config.tuning_for(id);
        let result = match id {
            EstimatorId::Naive => estimators::naive(obs),
            EstimatorId::Dsipw | EstimatorId::Dsrm => {
                let pair = ds_cache.entry(rule).or_insert_with(|| {
                    let selection = selection_model.get_or_insert_with(|| SelectionModel::new(obs, seed));
                    match selection_union(selection, pscore_model, rule) {
                        Ok(union) => {
                            rec.nuisance.push(record("selection", rule, vec![], vec![union.len()], None));
                            estimators::double_selection(obs, &union)
                        }
                        Err(e) => {
                            rec.nuisance.push(record("selection", rule, vec![], vec![], Some(e.to_string())));
                            [
                                EstimatorResult::not_estimable(EstimatorId::Dsipw, &e),
                                EstimatorResult::not_estimable(EstimatorId::Dsrm, &e),
                            ]
                        }
                    }
                });
                pair[usize::from(id == EstimatorId::Dsrm)].clone()
            }
            _ => {
                let pscore = (id != EstimatorId::Arb).then(|| {
                    &*pscores.entry(rule).or_insert_with(|| {
                        let est = pscore_model.estimate(rule);
                        rec.nuisance.push(match &est {
                            Ok(p) => record("pscore", rule, vec![p.lambda.unwrap_or(0.0)], vec![p.active_set.len()], None),
                            Err(e) => record("pscore", rule, vec![], vec![], Some(e.to_string())),
                        });
                        est
                    })
                });
                let outcome = id.is_augmented().then(|| {
                    &*outcomes.entry(rule).or_insert_with(|| match &outcome_models {
                        None => Ok(OutcomeEstimate::zero(obs.n())),
                        Some(models) => {
                            let est = models.estimate(rule);
                            rec.nuisance.push(match &est {
                                Ok(o) => record(
                                    "outcome",
                                    rule,
                                    o.lambda.to_vec(),
                                    o.active_sets.iter().map(Vec::len).collect(),
                                    None,
                                ),
                                Err(e) => record("outcome", rule, vec![], vec![], Some(e.to_string())),
                            });
                            est
                        }
                    })
                });
                estimate_with(config, obs, id, pscore, outcome, &mut rec.weighting_only)
            }
        };
        rec.results.push(result);
    }
}

fn record(
    component: &'static str,
    rule: TuningRule,
    lambda: Vec<f64>,
    active: Vec<usize>,
    failure: Option<String>,
) -> NuisanceRecord {
    NuisanceRecord { component, rule, lambda, active, failure }
}

/// Applies one nuisance-based estimator; stores the weighting-only companion
/// of AIPW and ARM.
fn estimate_with(
    config: &RunConfig,
    obs: Observed<'_>,
    id: EstimatorId,
    pscore: Option<&Result<PropensityEstimate, NuisanceFailure>>,
    outcome: Option<&Result<OutcomeEstimate, NuisanceFailure>>,
    companions: &mut BTreeMap<EstimatorId, Option<f64>>,
) -> EstimatorResult {
    let e_hat = match pscore {
        Some(Err(e)) => return EstimatorResult::not_estimable(id, e),
        Some(Ok(p)) => p.e_hat.as_slice(),
        None => &[],
    };
    let (m1, m0) = match outcome {
        Some(Err(e)) => return EstimatorResult::not_estimable(id, e),
        Some(Ok(o)) => (o.m1_hat.as_slice(), o.m0_hat.as_slice()),
        None => (&[][..], &[][..]),
    };
    match id {
        EstimatorId::Ipw => estimators::ipw(obs, e_hat),
        EstimatorId::Rm => estimators::rm_with(obs, &arm_weights(e_hat, obs.d, config.radius_factor, config.bandwidth)),
        EstimatorId::Aipw => {
            companions.insert(id, estimators::ipw(obs, e_hat).ate_hat);
            estimators::aipw(obs, e_hat, m1, m0)
        }
        EstimatorId::Arm => {
            let weights = arm_weights(e_hat, obs.d, config.radius_factor, config.bandwidth);
            companions.insert(id, estimators::rm_with(obs, &weights).ate_hat);
            estimators::arm_with(obs, &weights, m1, m0)
        }
        EstimatorId::Arb => estimators::arb(obs, m1, m0, config.zeta),
        EstimatorId::Naive | EstimatorId::Dsipw | EstimatorId::Dsrm => unreachable!("handled by the caller"),
    }
}

/// Reason string of a not-estimable result.
pub fn failure_reason(result: &EstimatorResult) -> Option<&str> {
    match &result.status {
        EstimatorStatus::Ok => None,
        EstimatorStatus::NotEstimable(r) => Some(r),
    }
}

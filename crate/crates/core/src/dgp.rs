//! Synthetic data for the ten Monte Carlo designs.
//!
//! Treatment follows a latent index `D* = Xβ_d + c_d v` with `D = 1{D* > 0}`;
//! potential outcomes are `Y(1) = θ + Xβ_g1 + c_y u` and `Y(0) = Xβ_g0 + c_y u`
//! with `X ~ N(0, Σ)` and independent standard normal `u`, `v`. The ATE of
//! every design is therefore exactly `θ`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::matrix::Matrix;
use crate::rng::{self, stream};

/// Pilot sample size used to calibrate the outcome noise scale.
pub const DEFAULT_PILOT_SIZE: usize = 100_000;
/// Eigenvalue floor applied when repairing clustered correlation matrices.
pub const EIGEN_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DgpError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("covariance matrix is not positive definite after repair")]
    NotPositiveDefinite,
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("outcome calibration failed: pilot signal variance is {0}")]
    DegeneratePilot(f64),
}

/// Shape of a coefficient sequence `β_j`, `j = 1..p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoefficientPattern {
    /// `β_j = (1/j)²`
    Sparse,
    /// `β_j = 1/(j + 10)`
    Moderate,
    /// `β_j = √(1/j)`
    Dense,
    /// `β_j = 0`
    Null,
}

impl CoefficientPattern {
    pub const ALL: [Self; 4] = [Self::Sparse, Self::Moderate, Self::Dense, Self::Null];

    /// Coefficient for the 1-based column index `j`.
    pub fn value(self, j: usize) -> f64 {
        let j = j as f64;
        match self {
            Self::Sparse => (1.0 / j) * (1.0 / j),
            Self::Moderate => 1.0 / (j + 10.0),
            Self::Dense => math::sqrt(1.0 / j),
            Self::Null => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sparse => "sparse",
            Self::Moderate => "moderate",
            Self::Dense => "dense",
            Self::Null => "null",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(name.trim()))
    }
}

/// Parameters of a block-clustered correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub n_clusters: usize,
    pub within_corr: f64,
    pub noise_scale: f64,
    /// Seed for the perturbation and, for the random layout, the permutation.
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { n_clusters: 20, within_corr: 0.6, noise_scale: 0.1, seed: 2013 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceSpec {
    /// `σ_jk = q^|j−k|`
    Toeplitz { q: f64 },
    /// Clusters of equal size with columns assigned in random order.
    ClusteredRandom(ClusterParams),
    /// Clusters of equal size made of consecutive columns.
    ClusteredOrdered(ClusterParams),
}

impl CovarianceSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Toeplitz { .. } => "toeplitz",
            Self::ClusteredRandom(_) => "clustered_random",
            Self::ClusteredOrdered(_) => "clustered_ordered",
        }
    }
}

/// Full parameterization of one Monte Carlo design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub design_id: u8,
    pub n: usize,
    pub p: usize,
    pub outcome_pattern: CoefficientPattern,
    pub treatment_pattern: CoefficientPattern,
    pub covariance: CovarianceSpec,
    /// Target R² of the realized outcome.
    pub r2_y: f64,
    /// Target R² of the latent treatment index.
    pub r2_d: f64,
    /// True ATE.
    pub theta: f64,
    /// Heterogeneity divisor: `β_g1 = β_g0 / s_y²`.
    pub s_y: f64,
}

impl DesignSpec {
    pub const DEFAULT_THETA: f64 = 1.0;
    pub const DEFAULT_S_Y: f64 = 2.0;
    pub const DEFAULT_Q: f64 = 0.5;
    pub const DEFAULT_R2_Y: f64 = 0.2;
    pub const DEFAULT_R2_D: f64 = 0.5;
    pub const IDS: core::ops::RangeInclusive<u8> = 1..=10;

    /// One of the ten catalogue designs with default parameters.
    pub fn catalogue(design_id: u8, n: usize, p: usize) -> Result<Self, DgpError> {
        use CoefficientPattern::*;
        let toeplitz = CovarianceSpec::Toeplitz { q: Self::DEFAULT_Q };
        let (outcome, treatment, covariance) = match design_id {
            1 => (Sparse, Sparse, toeplitz),
            2 => (Moderate, Moderate, toeplitz),
            3 => (Dense, Dense, toeplitz),
            4 => (Sparse, Moderate, toeplitz),
            5 => (Moderate, Sparse, toeplitz),
            6 => (Sparse, Dense, toeplitz),
            7 => (Dense, Sparse, toeplitz),
            8 => (Sparse, Sparse, CovarianceSpec::ClusteredRandom(ClusterParams::default())),
            9 => (Sparse, Sparse, CovarianceSpec::ClusteredOrdered(ClusterParams::default())),
            10 => (Sparse, Null, toeplitz),
            other => return Err(DgpError::InvalidDesign(format!("unknown design id {other}"))),
        };
        let spec = Self {
            design_id,
            n,
            p,
            outcome_pattern: outcome,
            treatment_pattern: treatment,
            covariance,
            r2_y: Self::DEFAULT_R2_Y,
            r2_d: if design_id == 10 { 0.0 } else { Self::DEFAULT_R2_D },
            theta: Self::DEFAULT_THETA,
            s_y: Self::DEFAULT_S_Y,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DgpError> {
        let bad = |msg: &str| Err(DgpError::InvalidDesign(String::from(msg)));
        if !Self::IDS.contains(&self.design_id) {
            return bad("design_id must be in 1..=10");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.p < 1 {
            return bad("p must be at least 1");
        }
        if !(self.r2_y > 0.0 && self.r2_y < 1.0) {
            return bad("r2_y must lie in (0, 1)");
        }
        if !(self.r2_d >= 0.0 && self.r2_d < 1.0) {
            return bad("r2_d must lie in [0, 1)");
        }
        if self.s_y == 1.0 || self.s_y == 0.0 || !self.s_y.is_finite() {
            return bad("s_y must be finite and different from 0 and 1");
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite");
        }
        if self.design_id == 10
            && (self.treatment_pattern != CoefficientPattern::Null || self.r2_d != 0.0)
        {
            return bad("design 10 requires a null treatment pattern and r2_d = 0");
        }
        match self.covariance {
            CovarianceSpec::Toeplitz { q } if !(q > -1.0 && q < 1.0) => {
                bad("Toeplitz q must lie in (-1, 1)")
            }
            CovarianceSpec::ClusteredRandom(c) | CovarianceSpec::ClusteredOrdered(c)
                if c.n_clusters == 0 || !(c.within_corr > -1.0 && c.within_corr < 1.0)
                    || !(c.noise_scale >= 0.0) =>
            {
                bad("cluster parameters out of range")
            }
            _ => Ok(()),
        }
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            beta_d: coefficient_vector(self.treatment_pattern, self.p, 1.0),
            beta_g0: coefficient_vector(self.outcome_pattern, self.p, 1.0),
            beta_g1: coefficient_vector(self.outcome_pattern, self.p, self.s_y),
        }
    }
}

/// The three coefficient vectors of a design.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub beta_d: Vec<f64>,
    pub beta_g0: Vec<f64>,
    pub beta_g1: Vec<f64>,
}

/// `pattern(j) / divisor²` for `j = 1..=p`.
pub fn coefficient_vector(pattern: CoefficientPattern, p: usize, divisor: f64) -> Vec<f64> {
    assert!(divisor != 0.0, "divisor must be nonzero");
    let scale = 1.0 / (divisor * divisor);
    (1..=p).map(|j| pattern.value(j) * scale).collect()
}

fn cluster_assignment(layout_random: bool, params: &ClusterParams, p: usize) -> Vec<usize> {
    let k = params.n_clusters.min(p).max(1);
    let by_position: Vec<usize> = (0..p).map(|j| j * k / p).collect();
    if !layout_random {
        return by_position;
    }
    let mut perm: Vec<usize> = (0..p).collect();
    let mut rng = rng::rng_from_seed(rng::derive_seed(params.seed, &[0x7065_726d]));
    perm.shuffle(&mut rng);
    let mut cluster = vec![0; p];
    for (pos, &col) in perm.iter().enumerate() {
        cluster[col] = by_position[pos];
    }
    cluster
}

fn clustered_matrix(layout_random: bool, params: &ClusterParams, p: usize) -> Result<Matrix, DgpError> {
    let cluster = cluster_assignment(layout_random, params, p);
    let mut m = Matrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if cluster[i] == cluster[j] {
            params.within_corr
        } else {
            0.0
        }
    });
    let mut rng = rng::rng_from_seed(rng::derive_seed(params.seed, &[0x6e6f_6973_65]));
    for j in 0..p {
        for i in (j + 1)..p {
            let e = params.noise_scale * rng.random_range(-1.0..1.0);
            m[(i, j)] += e;
            m[(j, i)] += e;
        }
    }
    for _attempt in 0..3 {
        let (values, vectors) = m.symmetric_eigen();
        if values[0] > 0.0 && m.cholesky().is_some() {
            return Ok(m);
        }
        let floored: Vec<f64> = values.iter().map(|&v| v.max(EIGEN_FLOOR)).collect();
        let mut repaired = Matrix::zeros(p, p);
        for k in 0..p {
            let vk = vectors.col(k);
            let lk = floored[k];
            for j in 0..p {
                let s = lk * vk[j];
                let col = repaired.col_mut(j);
                for i in j..p {
                    col[i] += s * vk[i];
                }
            }
        }
        for j in 0..p {
            for i in j..p {
                let v = repaired[(i, j)];
                repaired[(j, i)] = v;
            }
        }
        let diag: Vec<f64> = (0..p).map(|i| math::sqrt(repaired[(i, i)])).collect();
        m = Matrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else {
                repaired[(i, j)] / (diag[i] * diag[j])
            }
        });
    }
    if m.cholesky().is_some() {
        Ok(m)
    } else {
        Err(DgpError::NotPositiveDefinite)
    }
}

/// Builds the `p × p` feature correlation matrix.
pub fn build_covariance(spec: &CovarianceSpec, p: usize) -> Result<Matrix, DgpError> {
    match *spec {
        CovarianceSpec::Toeplitz { q } => {
            if !(q > -1.0 && q < 1.0) {
                return Err(DgpError::InvalidDesign(String::from("Toeplitz q must lie in (-1, 1)")));
            }
            let mut powers = vec![1.0; p];
            for k in 1..p {
                powers[k] = powers[k - 1] * q;
            }
            Ok(Matrix::from_fn(p, p, |i, j| powers[i.abs_diff(j)]))
        }
        CovarianceSpec::ClusteredRandom(ref c) => clustered_matrix(true, c, p),
        CovarianceSpec::ClusteredOrdered(ref c) => clustered_matrix(false, c, p),
    }
}

/// Closed-form latent-index scale: `Var(Xβ) / (Var(Xβ) + c_d²) = r2_d`.
pub fn calibrate_treatment_scale(beta_d: &[f64], sigma: &Matrix, r2_d: f64) -> Result<f64, DgpError> {
    if !(r2_d >= 0.0 && r2_d < 1.0) {
        return Err(DgpError::Configuration(String::from("r2_d must lie in [0, 1)")));
    }
    let signal = sigma.quad_form(beta_d);
    if r2_d == 0.0 {
        if beta_d.iter().any(|&b| b != 0.0) {
            return Err(DgpError::Configuration(String::from(
                "r2_d = 0 requires a zero treatment coefficient vector",
            )));
        }
        return Ok(1.0);
    }
    if !(signal > 0.0) {
        return Err(DgpError::Configuration(String::from(
            "r2_d > 0 requires a nonzero treatment signal",
        )));
    }
    Ok(math::sqrt(signal * (1.0 - r2_d) / r2_d))
}

/// Cholesky factor of a positive semi-definite matrix; zero pivots give zero
/// columns instead of failing.
fn psd_cholesky(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if s <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        let d = math::sqrt(s);
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let t: f64 = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = t / d;
        }
    }
    l
}

/// Pilot estimate of the outcome signal variance `Var(Dθ + D·Xβ_g1 + (1−D)·Xβ_g0)`.
///
/// Only the three linear indices `(Xβ_d, Xβ_g1, Xβ_g0)` enter the signal, so the
/// pilot draws them directly from their joint normal law instead of drawing
/// full feature rows.
pub fn pilot_signal_variance(
    coefs: &Coefficients,
    sigma: &Matrix,
    c_d: f64,
    theta: f64,
    pilot_size: usize,
    seed: u64,
) -> f64 {
    let betas = [&coefs.beta_d, &coefs.beta_g1, &coefs.beta_g0];
    let sigma_b: Vec<Vec<f64>> = betas.iter().map(|b| sigma.mul_vec(b)).collect();
    let cov = Matrix::from_fn(3, 3, |i, j| math::dot(betas[i], &sigma_b[j]));
    let l = psd_cholesky(&cov);
    let mut rng = rng::rng_from_seed(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..pilot_size {
        let z: [f64; 3] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let v: f64 = rng.sample(StandardNormal);
        let idx = |r: usize| (0..=r).map(|c| l[(r, c)] * z[c]).sum::<f64>();
        let (index_d, index_1, index_0) = (idx(0), idx(1), idx(2));
        let signal = if index_d + c_d * v > 0.0 { theta + index_1 } else { index_0 };
        let delta = signal - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (signal - mean);
    }
    m2 / pilot_size as f64
}

/// Outcome noise scale `c_y = √(V̂ (1 − r2_y) / r2_y)` from a pilot sample.
pub fn calibrate_outcome_scale(spec: &DesignSpec, pilot_size: usize, seed: u64) -> Result<f64, DgpError> {
    CalibratedDesign::with_pilot(spec.clone(), pilot_size, seed).map(|c| c.c_y)
}

fn outcome_scale(signal_variance: f64, r2_y: f64) -> Result<f64, DgpError> {
    if !(signal_variance > 1e-12) || !signal_variance.is_finite() {
        return Err(DgpError::DegeneratePilot(signal_variance));
    }
    Ok(math::sqrt(signal_variance * (1.0 - r2_y) / r2_y))
}

#[derive(Debug, Clone)]
enum CovFactor {
    /// Lower Cholesky factor of a Toeplitz `q^|j−k|` matrix, applied as the
    /// AR(1) recursion `x_1 = z_1`, `x_j = q x_{j−1} + √(1−q²) z_j`.
    Ar1 { q: f64 },
    Lower(Matrix),
}

/// A design together with its covariance factor and calibrated scales.
#[derive(Debug, Clone)]
pub struct CalibratedDesign {
    pub spec: DesignSpec,
    pub sigma: Matrix,
    pub coefficients: Coefficients,
    pub c_d: f64,
    pub c_y: f64,
    /// Pilot estimate of the outcome signal variance behind `c_y`.
    pub signal_variance: f64,
    factor: CovFactor,
}

impl CalibratedDesign {
    pub fn new(spec: DesignSpec, pilot_seed: u64) -> Result<Self, DgpError> {
        Self::with_pilot(spec, DEFAULT_PILOT_SIZE, pilot_seed)
    }

    pub fn with_pilot(spec: DesignSpec, pilot_size: usize, pilot_seed: u64) -> Result<Self, DgpError> {
        spec.validate()?;
        if pilot_size == 0 {
            return Err(DgpError::Configuration(String::from("pilot size must be positive")));
        }
        let sigma = build_covariance(&spec.covariance, spec.p)?;
        let factor = match spec.covariance {
            CovarianceSpec::Toeplitz { q } => CovFactor::Ar1 { q },
            _ => CovFactor::Lower(sigma.cholesky().ok_or(DgpError::NotPositiveDefinite)?),
        };
        let coefficients = spec.coefficients();
        let c_d = calibrate_treatment_scale(&coefficients.beta_d, &sigma, spec.r2_d)?;
        let signal_variance =
            pilot_signal_variance(&coefficients, &sigma, c_d, spec.theta, pilot_size, pilot_seed);
        let c_y = outcome_scale(signal_variance, spec.r2_y)?;
        Ok(Self { spec, sigma, coefficients, c_d, c_y, signal_variance, factor })
    }

    /// Same design and pilot, recalibrated to another outcome R².
    pub fn with_r2_y(&self, r2_y: f64) -> Result<Self, DgpError> {
        let mut spec = self.spec.clone();
        spec.r2_y = r2_y;
        spec.validate()?;
        let c_y = outcome_scale(self.signal_variance, r2_y)?;
        Ok(Self { spec, c_y, ..self.clone() })
    }

    fn fill_row(&self, z: &mut [f64], out: &mut [f64]) {
        match &self.factor {
            CovFactor::Ar1 { q } => {
                let s = math::sqrt(1.0 - q * q);
                let mut prev = 0.0;
                for (j, (o, &zj)) in out.iter_mut().zip(z.iter()).enumerate() {
                    prev = if j == 0 { zj } else { q * prev + s * zj };
                    *o = prev;
                }
            }
            CovFactor::Lower(l) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (k, &zk) in z.iter().enumerate() {
                    let col = &l.col(k)[k..];
                    for (o, lv) in out[k..].iter_mut().zip(col) {
                        *o += lv * zk;
                    }
                }
            }
        }
    }

    /// Draws one sample of size `spec.n`. A pure function of `(self, seed)`.
    pub fn simulate(&self, seed: u64) -> SimulatedSample {
        let (n, p) = (self.spec.n, self.spec.p);
        let mut rng = rng::rng_from_seed(rng::derive_seed(seed, &[stream::SAMPLE]));
        let mut x = Matrix::zeros(n, p);
        let mut z = vec![0.0; p];
        let mut row = vec![0.0; p];
        let mut v = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 0..n {
            z.iter_mut().for_each(|zj| *zj = rng.sample(StandardNormal));
            self.fill_row(&mut z, &mut row);
            for (j, &val) in row.iter().enumerate() {
                x[(i, j)] = val;
            }
            v[i] = rng.sample(StandardNormal);
            u[i] = rng.sample(StandardNormal);
        }
        let c = &self.coefficients;
        let index_d = x.mul_vec(&c.beta_d);
        let (m1, m0) = self.conditional_means(&x);
        let d: Vec<bool> = index_d.iter().zip(&v).map(|(a, vi)| a + self.c_d * vi > 0.0).collect();
        let e_true = index_d
            .iter()
            .map(|a| math::normal_cdf(a / self.c_d).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
            .collect();
        let y1: Vec<f64> = m1.iter().zip(&u).map(|(m, ui)| m + self.c_y * ui).collect();
        let y0: Vec<f64> = m0.iter().zip(&u).map(|(m, ui)| m + self.c_y * ui).collect();
        let y = d.iter().zip(y1.iter().zip(&y0)).map(|(&di, (a, b))| if di { *a } else { *b }).collect();
        SimulatedSample { x, d, y, y1, y0, e_true, c_d: self.c_d, c_y: self.c_y }
    }

    /// `E[Y(1) | X]` and `E[Y(0) | X]` for every row of `x`.
    pub fn conditional_means(&self, x: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let c = &self.coefficients;
        let m1 = x.mul_vec(&c.beta_g1).into_iter().map(|v| v + self.spec.theta).collect();
        (m1, x.mul_vec(&c.beta_g0))
    }
}

/// One simulated draw with its oracle quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub x: Matrix,
    pub d: Vec<bool>,
    pub y: Vec<f64>,
    pub y1: Vec<f64>,
    pub y0: Vec<f64>,
    /// True propensity `Φ(Xβ_d / c_d)`.
    pub e_true: Vec<f64>,
    pub c_d: f64,
    pub c_y: f64,
}

impl SimulatedSample {
    pub fn observed(&self) -> Observed<'_> {
        Observed { x: &self.x, d: &self.d, y: &self.y }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

/// The data an estimator may look at: features, treatment and outcome.
#[derive(Debug, Clone, Copy)]
pub struct Observed<'a> {
    pub x: &'a Matrix,
    pub d: &'a [bool],
    pub y: &'a [f64],
}

impl<'a> Observed<'a> {
    pub fn new(x: &'a Matrix, d: &'a [bool], y: &'a [f64]) -> Self {
        assert_eq!(x.nrows(), d.len(), "x and d disagree on n");
        assert_eq!(y.len(), d.len(), "y and d disagree on n");
        Self { x, d, y }
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn n_treated(&self) -> usize {
        self.d.iter().filter(|&&t| t).count()
    }

    /// Row indices of the treated (`true`) or control (`false`) arm.
    pub fn arm(&self, treated: bool) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.d[i] == treated).collect()
    }
}

//! Beta mixed-effects regression for preference proportions.
//!
//! The response `y` in (0,1) is Beta distributed with mean `mu` and a single
//! precision `phi`, i.e. `y ~ Beta(mu * phi, (1 - mu) * phi)`, with
//! `logit(mu) = x'beta + u` and a Normal random intercept `u ~ N(0, sigma^2)`
//! per chick. Time bin enters as a treatment-coded factor with the first
//! observed bin as reference.
//!
//! The random intercept is integrated out by adaptive Gauss-Hermite
//! quadrature centred at each chick's conditional mode (one node is the
//! Laplace approximation). Estimates maximise that marginal likelihood with a
//! bounded quasi-Newton search; the fixed-effect covariance comes from the
//! observed information.

mod fit;
mod inference;
mod likelihood;
mod optim;
mod quadrature;
mod special;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

pub use fit::{fit_beta_mixed, FitOptions, ModelFit, DEFAULT_N_QUAD, LOG_PHI_BOUNDS, LOG_SIGMA_BOUNDS};
pub use inference::{emmeans_vs_chance, fixed_effect_vcov, wald_type3, EmmAveraging, EmmEstimate, EmmResult, WaldTest};
pub use likelihood::{beta_log_density, marginal_loglik, marginal_loglik_detailed, LoglikEval, Params};
pub use optim::{fd_gradient, fd_hessian, minimize_bounded, Bounds, OptimOptions, OptimResult};
pub use quadrature::GaussHermite;
pub use special::{digamma, ln_gamma, trigamma};

use crate::arena::Metric;
use crate::metrics::BinRow;

#[derive(Debug, Error, PartialEq)]
pub enum BetammError {
    #[error("Smithson-Verkuilen transform needs n >= 2, got {0}")]
    SvSampleSize(usize),
    #[error("observation for chick {chick} bin {bin}: {reason}")]
    BadObservation { chick: String, bin: u32, reason: String },
    #[error("chick {chick} has more than one observation in bin {bin}")]
    DuplicateObservation { chick: String, bin: u32 },
    #[error("response {0} is not strictly inside (0,1); apply the Smithson-Verkuilen transform first")]
    Untransformed(f64),
    #[error("quadrature node count must be odd and >= 1, got {0}")]
    BadNodeCount(usize),
    #[error("parameter vector has {got} coefficients, design has {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("non-finite likelihood")]
    NonFinite,
    #[error("conditional mode search failed for chick {0}")]
    ModeFinding(String),
    #[error("model needs at least 2 chicks and 2 distinct bins (got {chicks} chicks, {bins} bins)")]
    InsufficientData { chicks: usize, bins: usize },
    #[error("fixed-effect covariance unavailable (singular information matrix)")]
    NoCovariance,
    #[error("singular contrast covariance")]
    SingularContrast,
    #[error("model has no bin contrasts to test")]
    NoContrasts,
    #[error("chance level must lie in (0,1), got {0}")]
    BadChance(f64),
}

/// Smithson-Verkuilen squeeze `(y (n - 1) + 0.5) / n`, mapping [0,1] into (0,1).
pub fn sv_transform(y: f64, n: usize) -> Result<f64, BetammError> {
    if n < 2 {
        return Err(BetammError::SvSampleSize(n));
    }
    let n = n as f64;
    Ok((y * (n - 1.0) + 0.5) / n)
}

/// Inverse of [`sv_transform`].
pub fn sv_inverse(y: f64, n: usize) -> Result<f64, BetammError> {
    if n < 2 {
        return Err(BetammError::SvSampleSize(n));
    }
    let n = n as f64;
    Ok((y * n - 0.5) / (n - 1.0))
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub chick_id: String,
    /// 1-based time bin.
    pub bin: u32,
    pub y: f64,
}

/// Observations for one metric of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelData {
    pub observations: Vec<Observation>,
    pub chance: f64,
    /// Bins the design nominally has (bins 1..=n_bins); used to flag missing ones.
    pub n_bins: u32,
    /// Sample size used by the Smithson-Verkuilen transform, once applied.
    pub sv_n: Option<usize>,
}

impl ModelData {
    pub fn new(observations: Vec<Observation>, chance: f64) -> Result<Self, BetammError> {
        let mut seen = BTreeSet::new();
        for o in &observations {
            if !(o.y.is_finite() && (0.0..=1.0).contains(&o.y)) {
                return Err(BetammError::BadObservation {
                    chick: o.chick_id.clone(),
                    bin: o.bin,
                    reason: format!("y = {} outside [0,1]", o.y),
                });
            }
            if o.bin == 0 {
                return Err(BetammError::BadObservation {
                    chick: o.chick_id.clone(),
                    bin: o.bin,
                    reason: "bins are numbered from 1".into(),
                });
            }
            if !seen.insert((o.chick_id.as_str(), o.bin)) {
                return Err(BetammError::DuplicateObservation {
                    chick: o.chick_id.clone(),
                    bin: o.bin,
                });
            }
        }
        let n_bins = observations.iter().map(|o| o.bin).max().unwrap_or(0);
        Ok(ModelData {
            observations,
            chance,
            n_bins,
            sv_n: None,
        })
    }

    /// Collects one metric from long-format preference rows, dropping
    /// missing values.
    pub fn from_bin_rows(rows: &[BinRow], metric: Metric) -> Result<Self, BetammError> {
        let mut chance = None;
        let mut n_bins = 0;
        let mut obs = Vec::new();
        for r in rows.iter().filter(|r| r.metric == metric) {
            chance.get_or_insert(r.chance);
            n_bins = n_bins.max(r.bin);
            if let Some(v) = r.value {
                obs.push(Observation {
                    chick_id: r.chick_id.clone(),
                    bin: r.bin,
                    y: v,
                });
            }
        }
        let mut data = ModelData::new(obs, chance.unwrap_or(0.5))?;
        data.n_bins = n_bins;
        Ok(data)
    }

    pub fn n_obs(&self) -> usize {
        self.observations.len()
    }

    pub fn chicks(&self) -> BTreeSet<&str> {
        self.observations.iter().map(|o| o.chick_id.as_str()).collect()
    }

    pub fn bins(&self) -> BTreeSet<u32> {
        self.observations.iter().map(|o| o.bin).collect()
    }

    /// Applies the Smithson-Verkuilen transform with n = number of observations.
    pub fn sv_transformed(&self) -> Result<Self, BetammError> {
        let n = self.n_obs();
        let observations = self
            .observations
            .iter()
            .map(|o| {
                Ok(Observation {
                    y: sv_transform(o.y, n)?,
                    ..o.clone()
                })
            })
            .collect::<Result<Vec<_>, BetammError>>()?;
        Ok(ModelData {
            observations,
            chance: self.chance,
            n_bins: self.n_bins,
            sv_n: Some(n),
        })
    }
}

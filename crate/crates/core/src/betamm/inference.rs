use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use super::{logistic, logit, BetammError, ModelFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldTest {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

/// Joint Wald test that every bin contrast is zero.
pub fn wald_type3(fit: &ModelFit) -> Result<WaldTest, BetammError> {
    let v = fit.vcov_matrix().ok_or(BetammError::NoCovariance)?;
    let p = fit.beta.len();
    if p < 2 {
        return Err(BetammError::NoContrasts);
    }
    let df = p - 1;
    let c = DVector::from_column_slice(&fit.beta[1..]);
    let cvc = v.view((1, 1), (df, df)).into_owned();
    let chol = cvc.cholesky().ok_or(BetammError::SingularContrast)?;
    let chi2 = c.dot(&chol.solve(&c)).max(0.0);
    let p_value = if chi2 == 0.0 {
        1.0
    } else {
        ChiSquared::new(df as f64).expect("df >= 1").sf(chi2)
    };
    Ok(WaldTest {
        chi2,
        df,
        p: p_value,
    })
}

/// How the overall marginal mean combines bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum EmmAveraging {
    /// Average the linear predictors, then back-transform.
    #[default]
    Link,
    /// Average the back-transformed bin means.
    Response,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmmEstimate {
    /// `None` for the overall mean.
    pub bin: Option<u32>,
    pub eta: f64,
    pub se_eta: f64,
    pub mean: f64,
    pub se_mean: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmmResult {
    pub bins: Vec<EmmEstimate>,
    pub overall: EmmEstimate,
    pub chance: f64,
    pub averaging: EmmAveraging,
    /// Nominal bins absent from the data; the overall mean weights only observed bins.
    pub missing_bins: Vec<u32>,
}

fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

fn estimate(bin: Option<u32>, eta: f64, se_eta: f64, chance_eta: f64) -> EmmEstimate {
    let mean = logistic(eta);
    let z = (eta - chance_eta) / se_eta;
    EmmEstimate {
        bin,
        eta,
        se_eta,
        mean,
        se_mean: mean * (1.0 - mean) * se_eta,
        z,
        p: two_sided_p(z),
    }
}

/// Estimated marginal means per bin and overall, back-transformed, each
/// tested against `chance` with a z statistic on the logit scale.
pub fn emmeans_vs_chance(fit: &ModelFit, chance: f64, averaging: EmmAveraging) -> Result<EmmResult, BetammError> {
    if !(chance > 0.0 && chance < 1.0) {
        return Err(BetammError::BadChance(chance));
    }
    let v = fit.vcov_matrix().ok_or(BetammError::NoCovariance)?;
    let p = fit.beta.len();
    let beta = DVector::from_column_slice(&fit.beta);
    let ce = logit(chance);

    let contrast = |k: usize| {
        let mut l = DVector::zeros(p);
        l[0] = 1.0;
        if k > 0 {
            l[k] = 1.0;
        }
        l
    };
    let quad = |l: &DVector<f64>| (l.transpose() * &v * l)[(0, 0)].max(0.0).sqrt();

    let ls: Vec<DVector<f64>> = (0..p).map(contrast).collect();
    let bins = ls
        .iter()
        .zip(&fit.levels)
        .map(|(l, &b)| estimate(Some(b), l.dot(&beta), quad(l), ce))
        .collect::<Vec<_>>();

    let overall = match averaging {
        EmmAveraging::Link => {
            let lbar = ls.iter().fold(DVector::zeros(p), |acc, l| acc + l) / p as f64;
            estimate(None, lbar.dot(&beta), quad(&lbar), ce)
        }
        EmmAveraging::Response => {
            let mean = bins.iter().map(|b| b.mean).sum::<f64>() / p as f64;
            let grad = ls
                .iter()
                .zip(&bins)
                .fold(DVector::zeros(p), |acc: DVector<f64>, (l, b)| acc + l * (b.mean * (1.0 - b.mean)))
                / p as f64;
            let se_mean = quad(&grad);
            let eta = logit(mean);
            let se_eta = se_mean / (mean * (1.0 - mean));
            let z = (eta - ce) / se_eta;
            EmmEstimate {
                bin: None,
                eta,
                se_eta,
                mean,
                se_mean,
                z,
                p: two_sided_p(z),
            }
        }
    };

    Ok(EmmResult {
        bins,
        overall,
        chance,
        averaging,
        missing_bins: fit.missing_bins(),
    })
}

/// Covariance of the fit as a dense matrix, for callers building their own contrasts.
pub fn fixed_effect_vcov(fit: &ModelFit) -> Result<DMatrix<f64>, BetammError> {
    fit.vcov_matrix().ok_or(BetammError::NoCovariance)
}

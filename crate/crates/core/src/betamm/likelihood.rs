//! Beta log-density and the adaptive Gauss-Hermite marginal likelihood.

use std::collections::BTreeMap;

use serde::Serialize;

use super::quadrature::GaussHermite;
use super::special::{digamma, ln_gamma, trigamma};
use super::{logistic, BetammError, ModelData};

/// Bounds applied to the Beta mean inside the density.
pub const MU_MIN: f64 = 1e-12;
pub const MU_MAX: f64 = 1.0 - 1e-12;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Model parameters on the optimisation scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Params {
    /// Intercept followed by one treatment contrast per non-reference bin.
    pub beta: Vec<f64>,
    pub log_phi: f64,
    pub log_sigma: f64,
}

impl Params {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.log_phi);
        v.push(self.log_sigma);
        v
    }

    pub fn from_slice(theta: &[f64]) -> Params {
        let p = theta.len() - 2;
        Params {
            beta: theta[..p].to_vec(),
            log_phi: theta[p],
            log_sigma: theta[p + 1],
        }
    }
}

/// Shape parameters above which the density is evaluated through Stirling
/// differences instead of separate log-gamma terms.
const STIRLING_MIN: f64 = 20.0;

/// `ln Gamma(x) - ((x - 1/2) ln x - x + ln(2 pi)/2)` for x >= 20.
fn stirling_remainder(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    (1.0 / 12.0 - z * (1.0 / 360.0 - z * (1.0 / 1260.0 - z / 1680.0))) / x
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Beta log-density for large shapes, arranged so the large log-gamma terms
/// cancel analytically: `ln Gamma(phi) - ln Gamma(a) - ln Gamma(b)` collapses
/// to `ln(phi)/2 - (a - 1/2) ln mu - (b - 1/2) ln(1 - mu) - ln(2 pi)/2` plus
/// remainders.
fn log_density_stirling(ln_y: f64, ln_1my: f64, ln_mu: f64, ln_1mmu: f64, a: f64, b: f64, phi: f64) -> f64 {
    a * (ln_y - ln_mu) + b * (ln_1my - ln_1mmu) - ln_y - ln_1my
        + 0.5 * (phi.ln() + ln_mu + ln_1mmu)
        - HALF_LN_2PI
        + stirling_remainder(phi)
        - stirling_remainder(a)
        - stirling_remainder(b)
}

/// `log Beta(y | mu * phi, (1 - mu) * phi)` in the mean-precision form.
pub fn beta_log_density(y: f64, mu: f64, phi: f64) -> f64 {
    let mu = mu.clamp(MU_MIN, MU_MAX);
    let a = mu * phi;
    let b = (1.0 - mu) * phi;
    if a >= STIRLING_MIN && b >= STIRLING_MIN {
        log_density_stirling(y.ln(), (-y).ln_1p(), mu.ln(), (-mu).ln_1p(), a, b, phi)
    } else {
        ln_gamma(phi) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * y.ln() + (b - 1.0) * (1.0 - y).ln()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PreparedObs {
    /// Contrast coefficient index (into beta), `None` for the reference bin.
    col: Option<usize>,
    ln_y: f64,
    ln_1my: f64,
    logit_y: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ChickGroup {
    pub chick: String,
    obs: Vec<PreparedObs>,
}

/// Data rearranged for repeated likelihood evaluation: grouped by chick
/// (sorted by id) with bins mapped to design columns.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    /// Observed bins in ascending order; the first is the reference level.
    pub levels: Vec<u32>,
    pub groups: Vec<ChickGroup>,
    pub n_obs: usize,
}

impl Prepared {
    pub fn new(data: &ModelData) -> Result<Prepared, BetammError> {
        let levels: Vec<u32> = data.bins().into_iter().collect();
        let mut by_chick: BTreeMap<&str, Vec<PreparedObs>> = BTreeMap::new();
        for o in &data.observations {
            if !(o.y > 0.0 && o.y < 1.0) {
                return Err(BetammError::Untransformed(o.y));
            }
            let pos = levels.binary_search(&o.bin).expect("bin is a level");
            by_chick.entry(o.chick_id.as_str()).or_default().push(PreparedObs {
                col: (pos > 0).then_some(pos),
                ln_y: o.y.ln(),
                ln_1my: (1.0 - o.y).ln(),
                logit_y: (o.y / (1.0 - o.y)).ln(),
            });
        }
        Ok(Prepared {
            levels,
            groups: by_chick
                .into_iter()
                .map(|(chick, obs)| ChickGroup {
                    chick: chick.to_string(),
                    obs,
                })
                .collect(),
            n_obs: data.n_obs(),
        })
    }

    pub fn n_beta(&self) -> usize {
        self.levels.len()
    }
}

/// Value of a marginal likelihood evaluation with its by-products.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoglikEval {
    pub value: f64,
    /// Density evaluations at quadrature nodes where the mean hit its bounds.
    pub clamp_events: usize,
    /// Conditional mode of each chick's random intercept (chick-id order).
    pub modes: Vec<f64>,
    /// Quadrature scale (conditional posterior sd) per chick.
    pub scales: Vec<f64>,
}

struct Terms {
    h: f64,
    d1: f64,
    d2: f64,
    fisher: f64,
}

/// Log joint density of one chick's observations and random intercept,
/// as a function of the intercept.
struct ChickIntegrand<'a> {
    obs: &'a [PreparedObs],
    eta0: Vec<f64>,
    phi: f64,
    ln_gamma_phi: f64,
    sigma: f64,
}

impl ChickIntegrand<'_> {
    fn log_density(&self, o: &PreparedObs, eta: f64, mu: f64) -> f64 {
        let a = mu * self.phi;
        let b = self.phi - a;
        if a >= STIRLING_MIN && b >= STIRLING_MIN {
            let (ln_mu, ln_1mmu) = if (MU_MIN..=MU_MAX).contains(&logistic(eta)) {
                (-softplus(-eta), -softplus(eta))
            } else {
                (mu.ln(), (1.0 - mu).ln())
            };
            log_density_stirling(o.ln_y, o.ln_1my, ln_mu, ln_1mmu, a, b, self.phi)
        } else {
            self.ln_gamma_phi - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * o.ln_y + (b - 1.0) * o.ln_1my
        }
    }

    fn log_prior(&self, u: f64) -> f64 {
        let z = u / self.sigma;
        -0.5 * z * z - self.sigma.ln() - HALF_LN_2PI
    }

    /// Value only; counts clamp events.
    fn value(&self, u: f64, clamps: &mut usize) -> f64 {
        let mut h = self.log_prior(u);
        for (o, e) in self.obs.iter().zip(&self.eta0) {
            let raw = logistic(e + u);
            if !(MU_MIN..=MU_MAX).contains(&raw) {
                *clamps += 1;
            }
            let mu = raw.clamp(MU_MIN, MU_MAX);
            h += self.log_density(o, e + u, mu);
        }
        h
    }

    fn terms(&self, u: f64) -> Terms {
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let mut t = Terms {
            h: self.log_prior(u),
            d1: -u * inv_var,
            d2: -inv_var,
            fisher: inv_var,
        };
        let phi = self.phi;
        for (o, e) in self.obs.iter().zip(&self.eta0) {
            let mu = logistic(e + u).clamp(MU_MIN, MU_MAX);
            let a = mu * phi;
            let b = phi - a;
            t.h += self.log_density(o, e + u, mu);
            let dmu = mu * (1.0 - mu);
            let resid = o.logit_y - (digamma(a) - digamma(b));
            let info = phi * phi * dmu * dmu * (trigamma(a) + trigamma(b));
            t.d1 += phi * dmu * resid;
            t.d2 += -info + phi * dmu * (1.0 - 2.0 * mu) * resid;
            t.fisher += info;
        }
        t
    }

    fn scale_at(&self, t: &Terms) -> f64 {
        let curv = if -t.d2 > 0.0 { -t.d2 } else { t.fisher };
        1.0 / curv.sqrt()
    }

    /// Newton search for the conditional mode, falling back to Fisher
    /// scoring where the log-density is not locally concave.
    fn mode(&self, start: f64) -> Option<(f64, f64)> {
        let mut u = if start.is_finite() { start } else { 0.0 };
        let mut t = self.terms(u);
        if !t.h.is_finite() {
            u = 0.0;
            t = self.terms(u);
        }
        let mut last_rel = f64::INFINITY;
        for _ in 0..200 {
            if !(t.h.is_finite() && t.d1.is_finite()) {
                return None;
            }
            let curv = if -t.d2 > 0.0 { -t.d2 } else { t.fisher };
            let step = t.d1 / curv;
            let scale = 1.0 / curv.sqrt();
            last_rel = step.abs() / scale;
            if last_rel <= 1e-9 || t.d1 == 0.0 {
                return Some((u, self.scale_at(&t)));
            }
            let mut lambda = 1.0;
            let accepted = loop {
                let un = u + lambda * step;
                let tn = self.terms(un);
                if tn.h >= t.h - 1e-13 * t.h.abs() {
                    break Some((un, tn));
                }
                if lambda < 1e-10 {
                    break None;
                }
                lambda *= 0.5;
            };
            match accepted {
                Some((un, _)) if (un - u).abs() <= 1e-14 * (1.0 + u.abs()) => {
                    return Some((u, self.scale_at(&t)));
                }
                Some((un, tn)) => {
                    u = un;
                    t = tn;
                }
                // No representable improvement: the mode is located to
                // within rounding of the log-density.
                None => return Some((u, self.scale_at(&t))),
            }
        }
        (last_rel < 1e-6).then(|| (u, self.scale_at(&t)))
    }
}

/// Evaluates the marginal log-likelihood of prepared data with a fixed rule.
pub(crate) struct Evaluator<'a> {
    pub prep: &'a Prepared,
    pub rule: GaussHermite,
}

impl<'a> Evaluator<'a> {
    pub fn new(prep: &'a Prepared, n_quad: usize) -> Result<Self, BetammError> {
        if n_quad == 0 || n_quad % 2 == 0 {
            return Err(BetammError::BadNodeCount(n_quad));
        }
        Ok(Evaluator {
            prep,
            rule: GaussHermite::new(n_quad),
        })
    }

    pub fn eval(&self, theta: &[f64], warm: Option<&[f64]>) -> Result<LoglikEval, BetammError> {
        let p = self.prep.n_beta();
        if theta.len() != p + 2 {
            return Err(BetammError::ParamLength {
                expected: p + 2,
                got: theta.len().saturating_sub(2),
            });
        }
        let beta = &theta[..p];
        let phi = theta[p].exp();
        let sigma = theta[p + 1].exp();
        if !(phi.is_finite() && phi > 0.0 && sigma.is_finite() && sigma > 0.0) {
            return Err(BetammError::NonFinite);
        }
        let ln_gamma_phi = ln_gamma(phi);
        let sqrt2 = std::f64::consts::SQRT_2;

        let mut total = 0.0;
        let mut clamps = 0;
        let mut modes = Vec::with_capacity(self.prep.groups.len());
        let mut scales = Vec::with_capacity(self.prep.groups.len());
        for (gi, g) in self.prep.groups.iter().enumerate() {
            let integrand = ChickIntegrand {
                obs: &g.obs,
                eta0: g
                    .obs
                    .iter()
                    .map(|o| beta[0] + o.col.map_or(0.0, |c| beta[c]))
                    .collect(),
                phi,
                ln_gamma_phi,
                sigma,
            };
            let start = warm.and_then(|w| w.get(gi).copied()).unwrap_or(0.0);
            let (mode, scale) = integrand
                .mode(start)
                .or_else(|| integrand.mode(0.0))
                .ok_or_else(|| BetammError::ModeFinding(g.chick.clone()))?;

            let mut terms: Vec<f64> = Vec::with_capacity(self.rule.len());
            for (x, lw) in self.rule.nodes().iter().zip(self.rule.log_weights()) {
                let u = mode + sqrt2 * scale * x;
                terms.push(lw + x * x + integrand.value(u, &mut clamps));
            }
            let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !m.is_finite() {
                return Err(BetammError::NonFinite);
            }
            let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
            total += (sqrt2 * scale).ln() + lse;
            modes.push(mode);
            scales.push(scale);
        }
        if !total.is_finite() {
            return Err(BetammError::NonFinite);
        }
        Ok(LoglikEval {
            value: total,
            clamp_events: clamps,
            modes,
            scales,
        })
    }
}

/// Marginal log-likelihood of Smithson-Verkuilen-transformed data, with
/// the random intercepts integrated out by `n_quad`-node adaptive
/// Gauss-Hermite quadrature (`n_quad = 1` is the Laplace approximation).
pub fn marginal_loglik(params: &Params, data: &ModelData, n_quad: usize) -> Result<f64, BetammError> {
    marginal_loglik_detailed(params, data, n_quad).map(|e| e.value)
}

pub fn marginal_loglik_detailed(
    params: &Params,
    data: &ModelData,
    n_quad: usize,
) -> Result<LoglikEval, BetammError> {
    let prep = Prepared::new(data)?;
    let eval = Evaluator::new(&prep, n_quad)?;
    eval.eval(&params.to_vec(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::betamm::Observation;

    fn toy() -> ModelData {
        let o = |c: &str, bin, y| Observation {
            chick_id: c.into(),
            bin,
            y,
        };
        ModelData::new(
            vec![o("a", 1, 0.62), o("a", 2, 0.81), o("b", 1, 0.35), o("b", 2, 0.57)],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn density_matches_textbook_beta() {
        // Beta(2,3) at 0.4: 12 * 0.4 * 0.36 = 1.728
        let ld = beta_log_density(0.4, 0.4, 5.0);
        assert!((ld - 1.728f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn large_shape_branch_agrees_with_log_gamma_form() {
        for &(y, mu, phi) in &[(0.4, 0.45, 60.0), (0.7, 0.5, 400.0), (0.2, 0.25, 1e4)] {
            let a = mu * phi;
            let b = (1.0 - mu) * phi;
            let direct = ln_gamma(phi) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * f64::ln(y) + (b - 1.0) * f64::ln(1.0 - y);
            let ld = beta_log_density(y, mu, phi);
            assert!((ld - direct).abs() < 1e-9 * direct.abs().max(1.0), "{y} {mu} {phi}: {ld} vs {direct}");
        }
    }

    #[test]
    fn rejects_untransformed_and_even_nodes() {
        let o = Observation {
            chick_id: "a".into(),
            bin: 1,
            y: 0.0,
        };
        let d = ModelData::new(vec![o], 0.5).unwrap();
        let p = Params {
            beta: vec![0.0],
            log_phi: 1.0,
            log_sigma: 0.0,
        };
        assert_eq!(marginal_loglik(&p, &d, 5), Err(BetammError::Untransformed(0.0)));
        let p2 = Params {
            beta: vec![0.0, 0.0],
            ..p
        };
        assert_eq!(marginal_loglik(&p2, &toy(), 4), Err(BetammError::BadNodeCount(4)));
        assert!(matches!(
            marginal_loglik(&p2, &toy(), 0),
            Err(BetammError::BadNodeCount(0))
        ));
    }

    #[test]
    fn deterministic_and_warm_start_invariant() {
        let d = toy();
        let prep = Prepared::new(&d).unwrap();
        let ev = Evaluator::new(&prep, 15).unwrap();
        let theta = [0.3, 0.7, 2.0, -0.4];
        let a = ev.eval(&theta, None).unwrap();
        let b = ev.eval(&theta, None).unwrap();
        assert_eq!(a, b);
        let c = ev.eval(&theta, Some(&[1.0, -1.0])).unwrap();
        assert!((a.value - c.value).abs() < 1e-12);
    }
}

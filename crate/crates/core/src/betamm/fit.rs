use nalgebra::DMatrix;
use serde::Serialize;

use super::likelihood::{Evaluator, Prepared};
use super::optim::{fd_gradient, fd_hessian, minimize_bounded, Bounds, OptimOptions};
use super::{logit, BetammError, ModelData};

pub const DEFAULT_N_QUAD: usize = 15;

/// Box constraints on `log phi` and `log sigma`. Degenerate data (all
/// responses equal, or no between-chick spread) push these to the edge,
/// where the likelihood is flat or unbounded.
pub const LOG_PHI_BOUNDS: (f64, f64) = (-5.0, 15.0);
pub const LOG_SIGMA_BOUNDS: (f64, f64) = (-10.0, 3.0);

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub n_quad: usize,
    /// Number of deterministic starting points (1 to 5).
    pub n_starts: usize,
    pub gtol: f64,
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_quad: DEFAULT_N_QUAD,
            n_starts: 5,
            gtol: 1e-6,
            ftol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelFit {
    /// `(Intercept)` followed by `bin<k>` for each non-reference bin.
    pub coef_names: Vec<String>,
    /// Observed bins; `levels[0]` is the reference.
    pub levels: Vec<u32>,
    pub beta: Vec<f64>,
    pub log_phi: f64,
    pub log_sigma: f64,
    /// Fixed-effect covariance (row-major), absent if the information is singular.
    pub vcov: Option<Vec<Vec<f64>>>,
    pub se: Option<Vec<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub iterations: usize,
    pub n_quad: usize,
    pub n_obs: usize,
    pub n_chicks: usize,
    /// Nominal number of bins in the design (1..=n_bins).
    pub n_bins: u32,
    pub clamp_events: usize,
    pub phi_at_bound: bool,
    pub sigma_at_bound: bool,
    pub sv_n: Option<usize>,
    pub chance: f64,
}

impl ModelFit {
    pub fn phi(&self) -> f64 {
        self.log_phi.exp()
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn vcov_matrix(&self) -> Option<DMatrix<f64>> {
        let v = self.vcov.as_ref()?;
        let p = v.len();
        Some(DMatrix::from_fn(p, p, |i, j| v[i][j]))
    }

    /// Bins in `1..=n_bins` that had no observations.
    pub fn missing_bins(&self) -> Vec<u32> {
        (1..=self.n_bins).filter(|b| !self.levels.contains(b)).collect()
    }
}

fn moment_start(prep: &Prepared, data: &ModelData) -> Vec<f64> {
    let p = prep.n_beta();
    let mut sums = vec![(0.0, 0usize); p];
    for o in &data.observations {
        let k = prep.levels.binary_search(&o.bin).expect("bin is a level");
        sums[k].0 += o.y;
        sums[k].1 += 1;
    }
    let means: Vec<f64> = sums.iter().map(|(s, n)| s / *n as f64).collect();
    let b0 = logit(means[0]);
    let mut theta: Vec<f64> = std::iter::once(b0)
        .chain(means[1..].iter().map(|m| logit(*m) - b0))
        .collect();

    let mut var = 0.0;
    for o in &data.observations {
        let k = prep.levels.binary_search(&o.bin).expect("bin is a level");
        var += (o.y - means[k]).powi(2);
    }
    var /= data.n_obs() as f64;
    let m = data.observations.iter().map(|o| o.y).sum::<f64>() / data.n_obs() as f64;
    let phi = if var > 0.0 { (m * (1.0 - m) / var - 1.0).clamp(1.0, 1e4) } else { 1e4 };

    let mut chick_logits = Vec::new();
    for g in &prep.groups {
        let ys: Vec<f64> = data
            .observations
            .iter()
            .filter(|o| o.chick_id == g.chick)
            .map(|o| o.y)
            .collect();
        chick_logits.push(logit(ys.iter().sum::<f64>() / ys.len() as f64));
    }
    let cm = chick_logits.iter().sum::<f64>() / chick_logits.len() as f64;
    let sd = (chick_logits.iter().map(|v| (v - cm).powi(2)).sum::<f64>() / chick_logits.len() as f64).sqrt();

    theta.push(phi.ln());
    theta.push(sd.max(0.1).ln());
    theta
}

fn perturbed_starts(base: &[f64], n: usize) -> Vec<Vec<f64>> {
    let p = base.len() - 2;
    let mut starts = vec![base.to_vec()];
    let mut s = base.to_vec();
    s[0] += 0.5;
    s[p + 1] += 0.5;
    starts.push(s);
    let mut s = base.to_vec();
    s[0] -= 0.5;
    s[p + 1] -= 0.5;
    starts.push(s);
    let mut s = base.to_vec();
    s[p] += 1.0;
    s[1..p].iter_mut().for_each(|v| *v = 0.0);
    starts.push(s);
    let mut s = base.to_vec();
    s[p] -= 1.0;
    s[p + 1] = 0.0;
    starts.push(s);
    starts.truncate(n.clamp(1, 5));
    starts
}

/// Fits the Beta mixed model by maximum marginal likelihood.
///
/// Data not yet squeezed into (0,1) are Smithson-Verkuilen transformed first.
/// Non-convergence is reported through `converged`, not as an error.
pub fn fit_beta_mixed(data: &ModelData, opts: &FitOptions) -> Result<ModelFit, BetammError> {
    let data = if data.sv_n.is_some() { data.clone() } else { data.sv_transformed()? };
    let n_chicks = data.chicks().len();
    let n_levels = data.bins().len();
    if n_chicks < 2 || n_levels < 2 {
        return Err(BetammError::InsufficientData {
            chicks: n_chicks,
            bins: n_levels,
        });
    }
    let prep = Prepared::new(&data)?;
    let ev = Evaluator::new(&prep, opts.n_quad)?;
    let p = prep.n_beta();

    let objective = |theta: &[f64]| -> f64 {
        match ev.eval(theta, None) {
            Ok(e) => -e.value,
            Err(_) => f64::INFINITY,
        }
    };

    let mut lower = vec![f64::NEG_INFINITY; p + 2];
    let mut upper = vec![f64::INFINITY; p + 2];
    (lower[p], upper[p]) = LOG_PHI_BOUNDS;
    (lower[p + 1], upper[p + 1]) = LOG_SIGMA_BOUNDS;
    let bounds = Bounds { lower, upper };
    let oo = OptimOptions {
        gtol: opts.gtol,
        ftol: opts.ftol,
        max_iter: opts.max_iter,
        ..OptimOptions::default()
    };

    let base = moment_start(&prep, &data);
    let mut best: Option<super::optim::OptimResult> = None;
    for mut s in perturbed_starts(&base, opts.n_starts) {
        bounds.project(&mut s);
        let r = minimize_bounded(objective, &s, &bounds, &oo);
        if r.f.is_finite() && best.as_ref().map_or(true, |b| r.f < b.f) {
            best = Some(r);
        }
    }
    let best = best.ok_or(BetammError::NonFinite)?;
    let mut theta = best.x.clone();
    let mut fval = best.f;
    let mut iterations = best.iterations;

    let at_bound = |th: &[f64], i: usize| th[i] <= bounds.lower[i] || th[i] >= bounds.upper[i];
    let mut obj = objective;

    // Newton polish on the free coordinates. Near the optimum the objective
    // change drops below its rounding noise, so a step is accepted when it
    // does not measurably worsen the objective and shrinks the gradient.
    let free_idx = |th: &[f64]| -> Vec<usize> { (0..p + 2).filter(|&i| !at_bound(th, i)).collect() };
    let pg_norm = |th: &[f64], g: &[f64]| bounds.projected_gradient(th, g).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut g = fd_gradient(&mut obj, &theta, oo.fd_step);
    for _ in 0..10 {
        let gn = pg_norm(&theta, &g);
        if gn < opts.gtol * 0.1 {
            break;
        }
        let free = free_idx(&theta);
        let h = fd_hessian(&mut obj, &theta, 1e-4);
        let hf = DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
        let Some(chol) = hf.cholesky() else { break };
        let gf = nalgebra::DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let step = chol.solve(&gf);
        let noise = 1e-11 * fval.abs().max(1.0);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let mut cand = theta.clone();
            for (k, &i) in free.iter().enumerate() {
                cand[i] -= t * step[k];
            }
            bounds.project(&mut cand);
            let fc = obj(&cand);
            if fc < fval - noise {
                (theta, fval) = (cand, fc);
                g = fd_gradient(&mut obj, &theta, oo.fd_step);
                improved = true;
                break;
            }
            if fc <= fval + noise {
                let gc = fd_gradient(&mut obj, &cand, oo.fd_step);
                if pg_norm(&cand, &gc) < gn {
                    (theta, fval, g) = (cand, fc, gc);
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        iterations += 1;
        if !improved {
            break;
        }
    }

    let grad_norm = pg_norm(&theta, &g);
    let converged = grad_norm < opts.gtol;

    let free = free_idx(&theta);
    let h = fd_hessian(&mut obj, &theta, 1e-4);
    let hf = DMatrix::from_fn(free.len(), free.len(), |i, j| h[(free[i], free[j])]);
    let vcov = hf.cholesky().map(|c| c.inverse()).and_then(|inv| {
        // beta coordinates are never bounded, so they lead the free list
        let v: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| inv[(i, j)]).collect()).collect();
        v.iter().enumerate().all(|(i, r)| r[i] > 0.0 && r[i].is_finite()).then_some(v)
    });
    let se = vcov.as_ref().map(|v| (0..p).map(|i| v[i][i].sqrt()).collect());

    let final_eval = ev.eval(&theta, None)?;
    let loglik = final_eval.value;
    let k = (p + 2) as f64;

    Ok(ModelFit {
        coef_names: std::iter::once("(Intercept)".to_string())
            .chain(prep.levels[1..].iter().map(|b| format!("bin{b}")))
            .collect(),
        levels: prep.levels.clone(),
        beta: theta[..p].to_vec(),
        log_phi: theta[p],
        log_sigma: theta[p + 1],
        vcov,
        se,
        loglik,
        aic: 2.0 * k - 2.0 * loglik,
        converged,
        grad_norm,
        iterations,
        n_quad: opts.n_quad,
        n_obs: prep.n_obs,
        n_chicks,
        n_bins: data.n_bins,
        clamp_events: final_eval.clamp_events,
        phi_at_bound: at_bound(&theta, p),
        sigma_at_bound: at_bound(&theta, p + 1),
        sv_n: data.sv_n,
        chance: data.chance,
    })
}

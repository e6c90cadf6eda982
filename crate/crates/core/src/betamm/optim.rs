//! Box-bounded BFGS with central-difference gradients and a backtracking
//! Armijo line search along the projected path.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Bounds {
        Bounds {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn at_lower(&self, x: &[f64], i: usize) -> bool {
        x[i] <= self.lower[i]
    }

    pub fn at_upper(&self, x: &[f64], i: usize) -> bool {
        x[i] >= self.upper[i]
    }

    /// Gradient with components zeroed where a bound blocks descent.
    pub fn projected_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        g.iter()
            .enumerate()
            .map(|(i, &gi)| {
                if (self.at_lower(x, i) && gi > 0.0) || (self.at_upper(x, i) && gi < 0.0) {
                    0.0
                } else {
                    gi
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOptions {
    /// Convergence when the projected gradient max-norm falls below this...
    pub gtol: f64,
    /// ...and the relative change of the objective over the last step is below this.
    pub ftol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Largest coordinate change attempted by one line search.
    pub max_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            gtol: 1e-6,
            ftol: 1e-10,
            max_iter: 500,
            fd_step: 1e-5,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// Max-norm of the projected gradient at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub(crate) fn fd_step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient.
pub fn fd_gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], rel: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i], rel);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian from function values only.
pub fn fd_hessian(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], rel: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let h: Vec<f64> = x.iter().map(|&v| fd_step(v, rel)).collect();
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp);
        xp[i] = x[i] - h[i];
        let fm = f(&xp);
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Consecutive steps with negligible objective change before giving up.
const STALL_LIMIT: usize = 5;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimises `f` within `bounds`. `f` may return `+inf` (or NaN) for
/// points where it cannot be evaluated; the line search backs off from them.
///
/// Stops unconverged after `max_iter` iterations, or once several steps in a
/// row change the objective by less than `ftol` while the gradient is still
/// above `gtol` (the finite-difference noise floor).
pub fn minimize_bounded(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    bounds: &Bounds,
    opts: &OptimOptions,
) -> OptimResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut obj = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = obj(&x);
    let mut g = fd_gradient(&mut obj, &x, opts.fd_step);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = 0;

    while iterations < opts.max_iter {
        let pg = bounds.projected_gradient(&x, &g);
        if !fx.is_finite() || pg.iter().any(|v| !v.is_finite()) {
            break;
        }
        if max_abs(&pg) < opts.gtol && last_change < opts.ftol {
            converged = true;
            break;
        }
        if stalled >= STALL_LIMIT {
            break;
        }
        iterations += 1;

        let free: Vec<bool> = (0..n).map(|i| pg[i] != 0.0 || !(bounds.at_lower(&x, i) || bounds.at_upper(&x, i))).collect();
        let pgv = DVector::from_column_slice(&pg);
        let mut d: Vec<f64> = (-(&hinv * &pgv)).iter().copied().collect();
        for i in 0..n {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        let slope: f64 = d.iter().zip(&pg).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            d = pg.iter().map(|v| -v).collect();
        }
        let big = max_abs(&d);
        if big > opts.max_step {
            d.iter_mut().for_each(|v| *v *= opts.max_step / big);
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            bounds.project(&mut xn);
            let fnew = obj(&xn);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if fnew.is_finite() && fnew <= fx + 1e-4 * decrease.min(0.0) {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if fresh {
                // No descent even along the steepest direction: we are at the
                // noise floor of the finite-difference gradient.
                converged = max_abs(&pg) < opts.gtol;
                break;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };

        let gn = fd_gradient(&mut obj, &xn, opts.fd_step);
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            hinv = &left * &hinv * &right + rho * &s * s.transpose();
            fresh = false;
        }
        last_change = (fx - fnew).abs() / fx.abs().max(1.0);
        stalled = if last_change < opts.ftol { stalled + 1 } else { 0 };
        x = xn;
        fx = fnew;
        g = gn;
    }

    let pg = bounds.projected_gradient(&x, &g);
    OptimResult {
        grad_norm: max_abs(&pg),
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations: evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize_bounded(f, &[-1.2, 1.0], &Bounds::unbounded(2), &OptimOptions::default());
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn active_bound() {
        // minimum at (-1, 2) but x0 >= 0 forces x0 = 0
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2) + 0.5 * x[0] * x[1];
        let b = Bounds {
            lower: vec![0.0, f64::NEG_INFINITY],
            upper: vec![f64::INFINITY, f64::INFINITY],
        };
        let r = minimize_bounded(f, &[3.0, 0.0], &b, &OptimOptions::default());
        assert!(r.converged, "{r:?}");
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fd_hessian_of_quadratic() {
        let mut f = |x: &[f64]| 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] + 5.0 * x[1] * x[1];
        let h = fd_hessian(&mut f, &[0.3, -0.2], 1e-4);
        assert!((h[(0, 0)] - 6.0).abs() < 1e-6);
        assert!((h[(0, 1)] - 2.0).abs() < 1e-6);
        assert!((h[(1, 1)] - 10.0).abs() < 1e-6);
    }
}

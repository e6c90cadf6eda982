//! Gauss-Hermite rules for integrals of the form `∫ exp(-x^2) f(x) dx`.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `n`-point rule: Golub-Welsch for the starting nodes, then
    /// Newton polishing on the orthonormal Hermite recurrence.
    pub fn new(n: usize) -> GaussHermite {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        if n == 1 {
            let w = std::f64::consts::PI.sqrt();
            return GaussHermite {
                nodes: vec![0.0],
                weights: vec![w],
                log_weights: vec![w.ln()],
            };
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 0..n - 1 {
            let off = ((i + 1) as f64 / 2.0).sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
        let mut nodes: Vec<f64> = jacobi.symmetric_eigen().eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);

        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..8 {
                let (p, dp) = orthonormal_hermite(n, *x);
                let dx = p / dp;
                *x -= dx;
                if dx.abs() < 1e-15 * (1.0 + x.abs()) {
                    break;
                }
            }
            let (_, dp) = orthonormal_hermite(n, *x);
            weights.push(2.0 / (dp * dp));
        }
        // Symmetrise so the odd-n middle node is exactly zero.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        GaussHermite {
            nodes,
            weights,
            log_weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Orthonormal Hermite polynomial of degree `n` at `x` and its derivative.
fn orthonormal_hermite(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = std::f64::consts::PI.powf(-0.25);
    for j in 1..=n {
        let jf = j as f64;
        let next = x * (2.0 / jf).sqrt() * p - ((jf - 1.0) / jf).sqrt() * p_prev;
        p_prev = p;
        p = next;
    }
    (p, (2.0 * n as f64).sqrt() * p_prev)
}

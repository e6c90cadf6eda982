//! Log-gamma and polygamma functions used by the Beta log-density.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Trigamma function, psi'(x), for x > 0.
///
/// Shifts the argument above 10 with `psi'(x) = psi'(x + 1) + 1/x^2`, then
/// uses the asymptotic series.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9) + 5/(66x^11)
    let series = z * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * 5.0 / 66.0))));
    acc + 1.0 / x + 0.5 * z + series / x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_reference_values() {
        // psi'(1) = pi^2/6, psi'(1/2) = pi^2/2
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5) - pi2 / 2.0).abs() < 1e-12);
        // psi'(x) - psi'(x+1) = 1/x^2
        for &x in &[0.01, 0.3, 2.7, 15.0, 400.0] {
            let d = trigamma(x) - trigamma(x + 1.0);
            assert!((d - 1.0 / (x * x)).abs() < 1e-10 * (1.0 + 1.0 / (x * x)), "x={x}");
        }
    }

    #[test]
    fn trigamma_is_derivative_of_digamma() {
        for &x in &[0.2, 1.3, 7.5, 50.0, 3e4] {
            let h = 1e-5 * x;
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!((fd - trigamma(x)).abs() < 1e-6 * trigamma(x), "x={x}");
        }
    }
}

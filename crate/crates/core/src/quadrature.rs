//! Gauss-Hermite quadrature against the standard normal density.

use nalgebra::DMatrix;

/// Node count used for the higher-order priors.
pub const DEFAULT_NODES: usize = 31;

/// Nodes and weights such that `sum_t w_t f(theta_t) ~ E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NormalQuadrature {
    /// Golub-Welsch: the Hermite nodes are the eigenvalues of the symmetric
    /// Jacobi matrix with off-diagonal `sqrt(i / 2)`, and the weights are
    /// `sqrt(pi)` times the squared first eigenvector components. Rescaled
    /// here to the standard normal (`theta = sqrt(2) x`, `w / sqrt(pi)`).
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            let off = ((i + 1) as f64 * 0.5).sqrt();
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
        let eigen = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v = eigen.eigenvectors[(0, i)];
                (eigen.eigenvalues[i] * std::f64::consts::SQRT_2, v * v)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Eigenvector components are unit-normalised, so the weights already sum to 1.
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        NormalQuadrature {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

impl Default for NormalQuadrature {
    fn default() -> Self {
        NormalQuadrature::new(DEFAULT_NODES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_moments() {
        let q = NormalQuadrature::default();
        assert_abs_diff_eq!(q.expect(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(q.expect(|t| t), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.expect(|t| t * t), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.expect(|t| t.powi(4)), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(q.expect(f64::exp), 0.5f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn logistic_normal_integral_against_trapezoid() {
        // E[sigmoid(1 + Z)] by a dense trapezoid rule on [-12, 12]. Accuracy
        // degrades for steeper slopes (about 1e-7 at slope 2).
        let f = |t: f64| 1.0 / (1.0 + (-(1.0 + t)).exp());
        let h = 1e-4;
        let n = (24.0 / h) as usize;
        let mut trap = 0.0;
        for i in 0..=n {
            let t = -12.0 + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            trap += w * f(t) * (-0.5 * t * t).exp();
        }
        trap *= h / (2.0 * std::f64::consts::PI).sqrt();
        let gh = NormalQuadrature::default().expect(f);
        assert_abs_diff_eq!(gh, trap, epsilon = 1e-10);
    }

    #[test]
    fn nodes_are_symmetric() {
        let q = NormalQuadrature::new(7);
        for i in 0..7 {
            assert_abs_diff_eq!(q.nodes[i], -q.nodes[6 - i], epsilon = 1e-12);
            assert_abs_diff_eq!(q.weights[i], q.weights[6 - i], epsilon = 1e-12);
        }
    }
}

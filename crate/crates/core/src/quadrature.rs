//! Small quadrature rules and dense linear-algebra helpers shared by the
//! kernel backends.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * width * xi, 0.5 * width * wi));
        }
    }
    out
}

/// Nodes and weights for `pi^{-1/2} int_0^inf e^{-u} g(u) du / sqrt(u)`
/// after the substitution `u = e^s`, trapezoid rule in `s`.
///
/// The integrand in `s` decays doubly exponentially on the right and at
/// least like `e^{s/2}` on the left, so the truncated trapezoid rule
/// converges geometrically in the step.
pub fn subordination_rule(step: f64, s_min: f64, s_max: f64) -> Vec<(f64, f64)> {
    let n = ((s_max - s_min) / step).ceil() as usize;
    let norm = std::f64::consts::PI.sqrt();
    (0..=n)
        .map(|i| {
            let s = s_min + i as f64 * step;
            let u = s.exp();
            (u, step * (-u).exp() * (0.5 * s).exp() / norm)
        })
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() >= a.ncols() {
        a.transpose() * a
    } else {
        a * a.transpose()
    };
    let gram = (&gram + gram.transpose()) * 0.5;
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(v))
        .sqrt()
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn symmetric_spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 18 is exact for 10 nodes
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((i - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_integrates_cosine() {
        let rule = composite_gauss_legendre(0.0, 10.0, 20, 12);
        let i: f64 = rule.iter().map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((i - (30.0f64).sin() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn subordination_rule_reproduces_exponential() {
        // pi^{-1/2} int e^{-u} e^{-a/u} u^{-1/2} du = e^{-2 sqrt(a)}
        let rule = subordination_rule(0.1, -90.0, 5.0);
        for a in [0.0, 1e-6, 0.3, 4.0, 100.0] {
            let v: f64 = rule.iter().map(|(u, w)| w * (-a / u).exp()).sum();
            assert!((v - (-2.0 * f64::sqrt(a)).exp()).abs() < 1e-12, "a = {a}: {v}");
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -3.0, 2.0]));
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-12);
        assert!((symmetric_spectral_norm(&a) - 3.0).abs() < 1e-12);
        let r = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        assert!((spectral_norm(&r) - 5.0).abs() < 1e-12);
    }
}

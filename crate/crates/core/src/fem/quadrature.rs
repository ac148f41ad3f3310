//! Gauss rules on the interval and on the reference triangle.
//!
//! Triangle rules are collapsed tensor products: Gauss-Legendre in the
//! collapsed direction and Gauss-Jacobi with weight `(1 - t)` in the other,
//! so an `m x m` rule integrates total degree `2m - 1` exactly.

use faer::{Mat, Side};

/// Nodes and weights of a Gauss rule for the Jacobi weight `(1-t)^a (1+t)^b`
/// on `[-1, 1]` (Golub-Welsch).
fn gauss_jacobi(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let ab = a + b;
    let diag = |k: usize| {
        let k = k as f64;
        if k == 0.0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        }
    };
    let off = |k: usize| {
        // Coupling between rows k-1 and k.
        let k = k as f64;
        let s = 2.0 * k + ab;
        (4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
    };
    let jac = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            diag(i)
        } else if i + 1 == j {
            off(j)
        } else if j + 1 == i {
            off(i)
        } else {
            0.0
        }
    });
    // Integral of the weight function over [-1, 1], for the cases used here.
    let mu0 = 2f64.powf(ab + 1.0) * gamma_int(a) * gamma_int(b) / gamma_int(ab + 1.0);
    let evd = jac.self_adjoint_eigen(Side::Lower).expect("tridiagonal eigenproblem");
    let s = evd.S().column_vector();
    let u = evd.U();
    let nodes: Vec<f64> = (0..m).map(|i| s[i]).collect();
    let weights: Vec<f64> = (0..m).map(|i| mu0 * u[(0, i)] * u[(0, i)]).collect();
    (nodes, weights)
}

/// `Gamma(x + 1)` for small non-negative integer `x`.
fn gamma_int(x: f64) -> f64 {
    let k = x.round() as u32;
    debug_assert!((x - k as f64).abs() < 1e-14);
    (1..=k).map(f64::from).product()
}

/// Gauss-Legendre rule with `m` points on `[0, 1]`.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(m, 0.0, 0.0);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Quadrature rule on the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    /// Smallest collapsed rule exact for polynomials of total degree `degree`.
    pub fn triangle(degree: usize) -> Self {
        let m = degree / 2 + 1;
        let (xs, wx) = gauss_legendre_unit(m);
        let (ts, wt) = gauss_jacobi(m, 1.0, 0.0);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (t, wt) in ts.iter().zip(&wt) {
            // Map t in [-1, 1] to eta in [0, 1]; the weight (1 - t) becomes 2 (1 - eta).
            let eta = 0.5 * (t + 1.0);
            for (xi, wx) in xs.iter().zip(&wx) {
                points.push([xi * (1.0 - eta), eta]);
                weights.push(wx * wt * 0.25);
            }
        }
        Self { points, weights, degree }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polynomial degree integrated exactly.
    pub fn degree(&self) -> usize {
        self.degree
    }
}

/// Default exactness for a set of element degrees: `3 max(k) + 2`.
pub fn default_degree(degrees: &[usize]) -> usize {
    3 * degrees.iter().copied().max().unwrap_or(1) + 2
}

//! Analytic objectives with hand-coded derivatives.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use super::{finite_or, EvalError, Jet, ObjectivePair, ScalarField};
use crate::linalg::SquareMatrix;

/// `Σ (k_m − k_m^ref)²`. With an all-zero reference this is the plain sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDeviationConstraint {
    pub reference: Vec<f64>,
}

impl QuadraticDeviationConstraint {
    pub fn new(reference: Vec<f64>) -> Self {
        Self { reference }
    }

    pub fn centered(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    /// The unique stationary point, which is the reference itself.
    pub fn cio(&self) -> Vec<f64> {
        self.reference.clone()
    }
}

impl ScalarField for QuadraticDeviationConstraint {
    fn dim(&self) -> usize {
        self.reference.len()
    }

    fn value(&self, k: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(k)?;
        let v = k.iter().zip(&self.reference).map(|(x, r)| (x - r) * (x - r)).sum();
        finite_or(v, self)
    }

    fn jet(&self, k: &[f64]) -> Result<Jet, EvalError> {
        let value = self.value(k)?;
        let grad = k.iter().zip(&self.reference).map(|(x, r)| 2.0 * (x - r)).collect();
        let hess = SquareMatrix::identity(self.dim()).scaled(2.0);
        Ok(Jet { value, grad, hess })
    }

    fn label(&self) -> String {
        format!("quadratic deviation from {:?}", self.reference)
    }
}

/// `Σ w_m · k_m²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSquares {
    pub weights: Vec<f64>,
}

impl ScalarField for WeightedSquares {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, k: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(k)?;
        finite_or(k.iter().zip(&self.weights).map(|(x, w)| w * x * x).sum(), self)
    }

    fn jet(&self, k: &[f64]) -> Result<Jet, EvalError> {
        let value = self.value(k)?;
        let grad = k.iter().zip(&self.weights).map(|(x, w)| 2.0 * w * x).collect();
        let hess = SquareMatrix::from_diag(&self.weights.iter().map(|w| 2.0 * w).collect::<Vec<_>>());
        Ok(Jet { value, grad, hess })
    }

    fn label(&self) -> String {
        format!("weighted squares {:?}", self.weights)
    }
}

/// `Σ sin(ω_m · k_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSum {
    pub freqs: Vec<f64>,
}

impl ScalarField for SineSum {
    fn dim(&self) -> usize {
        self.freqs.len()
    }

    fn value(&self, k: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(k)?;
        finite_or(k.iter().zip(&self.freqs).map(|(x, w)| (w * x).sin()).sum(), self)
    }

    fn jet(&self, k: &[f64]) -> Result<Jet, EvalError> {
        let value = self.value(k)?;
        let grad = k.iter().zip(&self.freqs).map(|(x, w)| w * (w * x).cos()).collect();
        let diag: Vec<f64> = k.iter().zip(&self.freqs).map(|(x, w)| -w * w * (w * x).sin()).collect();
        Ok(Jet {
            value,
            grad,
            hess: SquareMatrix::from_diag(&diag),
        })
    }

    fn label(&self) -> String {
        format!("sine sum {:?}", self.freqs)
    }
}

/// Circle-distance objective against an ellipse constraint.
///
/// `F = (x − x0)² + (y − y0)²`, `H = x²/a² + y²/b²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Problem {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Example1Problem {
    pub fn new(a: f64, b: f64, x0: f64, y0: f64) -> Self {
        Self { a, b, x0, y0 }
    }

    pub fn pair(&self) -> ObjectivePair {
        let f = QuadraticDeviationConstraint::new(vec![self.x0, self.y0]);
        let h = WeightedSquares {
            weights: vec![1.0 / (self.a * self.a), 1.0 / (self.b * self.b)],
        };
        ObjectivePair::new(
            format!("example1(a={}, b={}, x0={}, y0={})", self.a, self.b, self.x0, self.y0),
            Arc::new(f),
            Arc::new(h),
        )
        .expect("both fields are two-dimensional")
    }

    /// Point on the tradeoff curve for multiplier `lambda ≤ 0`.
    pub fn curve_at(&self, lambda: f64) -> [f64; 2] {
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        [a2 * self.x0 / (a2 - lambda), b2 * self.y0 / (b2 - lambda)]
    }

    /// Point on the tradeoff curve for the conjugate multiplier `mu = 1/lambda`.
    pub fn curve_at_mu(&self, mu: f64) -> [f64; 2] {
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        [a2 * self.x0 * mu / (-1.0 + a2 * mu), b2 * self.y0 * mu / (-1.0 + b2 * mu)]
    }

    pub fn h_cio(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    pub fn f_cio(&self) -> Vec<f64> {
        vec![self.x0, self.y0]
    }
}

/// Periodic pair `F = sin(px) + sin(qy)`, `H = sin(rx) + sin(ty)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example2Problem {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub t: f64,
}

impl Example2Problem {
    pub fn new(p: f64, q: f64, r: f64, t: f64) -> Self {
        Self { p, q, r, t }
    }

    pub fn pair(&self) -> ObjectivePair {
        ObjectivePair::new(
            format!("example2(p={}, q={}, r={}, t={})", self.p, self.q, self.r, self.t),
            Arc::new(SineSum { freqs: vec![self.p, self.q] }),
            Arc::new(SineSum { freqs: vec![self.r, self.t] }),
        )
        .expect("both fields are two-dimensional")
    }

    /// `p·t·cos(px)·cos(ty) − q·r·cos(rx)·cos(qy)`; zero exactly on the tradeoff curves.
    pub fn manifold_residual(&self, k: &[f64]) -> f64 {
        let (x, y) = (k[0], k[1]);
        self.p * self.t * (self.p * x).cos() * (self.t * y).cos()
            - self.q * self.r * (self.r * x).cos() * (self.q * y).cos()
    }

    /// The minimum of `H` nearest the origin.
    pub fn h_minimum(&self) -> Vec<f64> {
        vec![-FRAC_PI_2 / self.r, -FRAC_PI_2 / self.t]
    }

    /// The maximum of `H` nearest the origin.
    pub fn h_maximum(&self) -> Vec<f64> {
        vec![FRAC_PI_2 / self.r, FRAC_PI_2 / self.t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_closed_form_passes_through_known_points() {
        let ex = Example1Problem::new(2.0, 1.0, 1.0, 1.0);
        assert_eq!(ex.curve_at(-1.0), [0.8, 0.5]);
        assert_eq!(ex.curve_at(0.0), [1.0, 1.0]);
        let m = ex.curve_at_mu(-1.0);
        assert!((m[0] - 0.8).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_deviation_invariants() {
        let q = QuadraticDeviationConstraint::new(vec![0.3, -1.0, 2.0]);
        assert_eq!(q.value(&[0.3, -1.0, 2.0]).unwrap(), 0.0);
        let jet = q.jet(&[1.0, 1.0, 1.0]).unwrap();
        assert!(jet.value > 0.0);
        assert_eq!(jet.hess, SquareMatrix::identity(3).scaled(2.0));
    }

    #[test]
    fn example2_manifold_vanishes_at_h_extrema() {
        let ex = Example2Problem::new(1.0, 1.0, 2.0, 3.0);
        assert!(ex.manifold_residual(&ex.h_minimum()).abs() < 1e-15);
        let jet = ex.pair().eval_h(&ex.h_minimum()).unwrap();
        assert!(jet.grad.iter().all(|g| g.abs() < 1e-15));
        assert!((jet.value + 2.0).abs() < 1e-15);
    }
}

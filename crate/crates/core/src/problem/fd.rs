//! Central finite differences: a derivative checker and a value-only field.

use std::fmt;
use std::sync::Arc;

use super::{finite_or, EvalError, Jet, ObjectivePair, ScalarField};
use crate::linalg::SquareMatrix;

/// Largest discrepancies between supplied and finite-difference derivatives.
///
/// Relative figures divide by `max(1, |supplied|)` so that zero entries do not
/// blow up the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FdReport {
    pub grad_abs: f64,
    pub grad_rel: f64,
    pub hess_abs: f64,
    pub hess_rel: f64,
    /// Largest `|H_ij − H_ji|` of the supplied Hessians.
    pub hess_asymmetry: f64,
}

impl FdReport {
    fn merge(self, o: FdReport) -> FdReport {
        FdReport {
            grad_abs: self.grad_abs.max(o.grad_abs),
            grad_rel: self.grad_rel.max(o.grad_rel),
            hess_abs: self.hess_abs.max(o.hess_abs),
            hess_rel: self.hess_rel.max(o.hess_rel),
            hess_asymmetry: self.hess_asymmetry.max(o.hess_asymmetry),
        }
    }

    pub fn max_rel(&self) -> f64 {
        self.grad_rel.max(self.hess_rel)
    }
}

fn check_field(field: &dyn ScalarField, k: &[f64], step: f64) -> Result<FdReport, EvalError> {
    let jet = field.jet(k)?;
    let n = k.len();
    let mut report = FdReport {
        hess_asymmetry: jet.hess.asymmetry(),
        ..FdReport::default()
    };
    let mut kp = k.to_vec();
    for i in 0..n {
        kp[i] = k[i] + step;
        let fp = field.value(&kp)?;
        let gp = field.jet(&kp)?.grad;
        kp[i] = k[i] - step;
        let fm = field.value(&kp)?;
        let gm = field.jet(&kp)?.grad;
        kp[i] = k[i];

        let g_fd = (fp - fm) / (2.0 * step);
        let err = (g_fd - jet.grad[i]).abs();
        report.grad_abs = report.grad_abs.max(err);
        report.grad_rel = report.grad_rel.max(err / jet.grad[i].abs().max(1.0));

        for j in 0..n {
            let h_fd = (gp[j] - gm[j]) / (2.0 * step);
            let supplied = jet.hess[(j, i)];
            let err = (h_fd - supplied).abs();
            report.hess_abs = report.hess_abs.max(err);
            report.hess_rel = report.hess_rel.max(err / supplied.abs().max(1.0));
        }
    }
    Ok(report)
}

/// Compares both fields' supplied derivatives with central differences at `k`.
///
/// The gradient is checked against differences of the value, the Hessian
/// against differences of the supplied gradient.
pub fn fd_check(pair: &ObjectivePair, k: &[f64], step: f64) -> Result<FdReport, EvalError> {
    let f = check_field(pair.f().as_ref(), k, step)?;
    let h = check_field(pair.h().as_ref(), k, step)?;
    Ok(f.merge(h))
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A field known only by its values; derivatives come from central differences.
///
/// Gradient steps are `cbrt(ε)·max(1, |k_i|)`; Hessian steps are
/// `ε^(1/4)·max(1, |k_i|)`, the balance point for second differences.
#[derive(Clone)]
pub struct FiniteDifferenceField {
    dim: usize,
    label: String,
    func: Arc<ValueFn>,
}

impl FiniteDifferenceField {
    pub fn new<F>(dim: usize, label: impl Into<String>, func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            label: label.into(),
            func: Arc::new(func),
        }
    }

    fn grad_step(x: f64) -> f64 {
        f64::EPSILON.cbrt() * x.abs().max(1.0)
    }

    fn hess_step(x: f64) -> f64 {
        f64::EPSILON.powf(0.25) * x.abs().max(1.0)
    }
}

impl fmt::Debug for FiniteDifferenceField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceField")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

impl ScalarField for FiniteDifferenceField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, k: &[f64]) -> Result<f64, EvalError> {
        self.check_dim(k)?;
        finite_or((self.func)(k), self)
    }

    fn jet(&self, k: &[f64]) -> Result<Jet, EvalError> {
        let n = self.dim;
        let value = self.value(k)?;
        let mut x = k.to_vec();
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let h = Self::grad_step(k[i]);
            x[i] = k[i] + h;
            let fp = self.value(&x)?;
            x[i] = k[i] - h;
            let fm = self.value(&x)?;
            x[i] = k[i];
            grad[i] = (fp - fm) / (2.0 * h);
        }
        let mut hess = SquareMatrix::zeros(n);
        for i in 0..n {
            let hi = Self::hess_step(k[i]);
            x[i] = k[i] + hi;
            let fp = self.value(&x)?;
            x[i] = k[i] - hi;
            let fm = self.value(&x)?;
            x[i] = k[i];
            hess[(i, i)] = (fp - 2.0 * value + fm) / (hi * hi);
            for j in (i + 1)..n {
                let hj = Self::hess_step(k[j]);
                let mut corner = |si: f64, sj: f64| -> Result<f64, EvalError> {
                    x[i] = k[i] + si * hi;
                    x[j] = k[j] + sj * hj;
                    let v = self.value(&x);
                    x[i] = k[i];
                    x[j] = k[j];
                    v
                };
                let d = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                    / (4.0 * hi * hj);
                hess[(i, j)] = d;
                hess[(j, i)] = d;
            }
        }
        Ok(Jet { value, grad, hess })
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Example1Problem, Example2Problem, QuadraticDeviationConstraint};

    #[test]
    fn builtins_pass_fd_check() {
        let ex1 = Example1Problem::new(2.0, 1.0, 1.0, 1.0).pair();
        let r = fd_check(&ex1, &[0.3, 0.7], 1e-5).unwrap();
        assert!(r.max_rel() < 1e-6, "{r:?}");

        let ex2 = Example2Problem::new(1.0, 1.0, 2.0, 3.0).pair();
        let r = fd_check(&ex2, &[0.2, 0.4], 1e-5).unwrap();
        assert!(r.max_rel() < 1e-5, "{r:?}");
        assert_eq!(r.hess_asymmetry, 0.0);
    }

    #[test]
    fn quadratic_hessian_is_exactly_two_identity() {
        let q = Arc::new(QuadraticDeviationConstraint::centered(3));
        let pair = ObjectivePair::new("q", q.clone(), q).unwrap();
        for k in [[0.0, 0.0, 0.0], [1.5, -2.0, 0.25]] {
            let r = fd_check(&pair, &k, 1e-5).unwrap();
            assert!(r.hess_abs < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn finite_difference_field_approximates_analytic_derivatives() {
        let fd = FiniteDifferenceField::new(2, "sin-sum", |k| (k[0]).sin() + (2.0 * k[1]).sin() + k[0] * k[1]);
        let jet = fd.jet(&[0.4, -0.3]).unwrap();
        let exact_grad = [0.4_f64.cos() - 0.3, 2.0 * (-0.6_f64).cos() + 0.4];
        for (a, b) in jet.grad.iter().zip(exact_grad) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((jet.hess[(0, 0)] + 0.4_f64.sin()).abs() < 1e-6);
        assert!((jet.hess[(0, 1)] - 1.0).abs() < 1e-6);
        assert_eq!(jet.hess[(0, 1)], jet.hess[(1, 0)]);
        assert!((jet.hess[(1, 1)] + 4.0 * (-0.6_f64).sin()).abs() < 1e-6);
    }
}

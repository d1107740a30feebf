//! Bordered-system quantities at a point of the tradeoff curve.
//!
//! Along the curve `∇F = λ·∇H`. Two equivalent parametrizations are carried:
//!
//! * the λ-form with `M = ∇²F − λ·∇²H`, `R = ∇H` and `P = Adj(M)·R`;
//! * the μ-form (`μ = 1/λ`) with `W = ∇²H − μ·∇²F`, `S = ∇F` and `Q = Adj(W)·S`.
//!
//! Arc-length rates are built from the adjugate so they stay finite where
//! `det(M)` vanishes: `dk/ds = ±P̂`, `dλ/ds = ±det(M)/|P|`,
//! `dh/ds = ±Rᵀ·P̂` and `df/ds = λ·dh/ds`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{adjugate, determinant, dot, norm, solve, LinalgError, SquareMatrix};
use crate::problem::{EvalError, Jet, ObjectivePair};

/// Direction vectors shorter than this are treated as zero.
pub const ZERO_DIRECTION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LagrangeError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("direction vector vanished (|P| = {norm:e})")]
    ZeroDirection { norm: f64 },
    #[error("the {0:?} parametrization is not available at this point (multiplier is infinite)")]
    FormUnavailable(Form),
}

/// A multiplier value with an explicit infinite state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Multiplier {
    Finite(f64),
    Infinite,
}

impl Multiplier {
    pub fn finite(self) -> Option<f64> {
        match self {
            Multiplier::Finite(v) => Some(v),
            Multiplier::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Multiplier::Finite(_))
    }

    /// `1/x`, mapping zero and infinity onto each other.
    pub fn reciprocal(self) -> Multiplier {
        match self {
            Multiplier::Finite(0.0) => Multiplier::Infinite,
            Multiplier::Finite(v) => Multiplier::Finite(1.0 / v),
            Multiplier::Infinite => Multiplier::Finite(0.0),
        }
    }
}

/// Which multiplier parametrizes the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// `∇F − λ∇H = 0`, matrix `M`.
    Lambda,
    /// `∇H − μ∇F = 0`, matrix `W`.
    Mu,
}

impl Form {
    pub fn other(self) -> Form {
        match self {
            Form::Lambda => Form::Mu,
            Form::Mu => Form::Lambda,
        }
    }
}

/// Matrix, determinant, adjugate direction and quadratic form of one parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct FormQuantities {
    /// `M` (λ-form) or `W` (μ-form).
    pub matrix: SquareMatrix,
    pub det: f64,
    pub adj: SquareMatrix,
    /// `P = Adj(M)·R` or `Q = Adj(W)·S`.
    pub direction: Vec<f64>,
    /// `Rᵀ·Adj(M)·R` or `Sᵀ·Adj(W)·S`.
    pub quad: f64,
}

impl FormQuantities {
    fn build(matrix: SquareMatrix, border: &[f64]) -> Self {
        let det = determinant(&matrix);
        let adj = adjugate(&matrix);
        let direction = adj.mul_vec(border);
        let quad = dot(border, &direction);
        Self {
            matrix,
            det,
            adj,
            direction,
            quad,
        }
    }
}

/// Every Lagrange quantity at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BorderedState {
    pub k: Vec<f64>,
    pub lambda: Multiplier,
    pub mu: Multiplier,
    pub f: f64,
    pub h: f64,
    /// `S = ∇F`
    pub grad_f: Vec<f64>,
    /// `R = ∇H`
    pub grad_h: Vec<f64>,
    pub hess_f: SquareMatrix,
    pub hess_h: SquareMatrix,
    lambda_form: Option<FormQuantities>,
    mu_form: Option<FormQuantities>,
}

impl BorderedState {
    fn from_jets(k: &[f64], jf: Jet, jh: Jet, lambda: Multiplier, mu: Multiplier) -> Self {
        let lambda_form = lambda
            .finite()
            .map(|l| FormQuantities::build(jf.hess.add_scaled(-l, &jh.hess), &jh.grad));
        let mu_form = mu
            .finite()
            .map(|m| FormQuantities::build(jh.hess.add_scaled(-m, &jf.hess), &jf.grad));
        Self {
            k: k.to_vec(),
            lambda,
            mu,
            f: jf.value,
            h: jh.value,
            grad_f: jf.grad,
            grad_h: jh.grad,
            hess_f: jf.hess,
            hess_h: jh.hess,
            lambda_form,
            mu_form,
        }
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn quantities(&self, form: Form) -> Option<&FormQuantities> {
        match form {
            Form::Lambda => self.lambda_form.as_ref(),
            Form::Mu => self.mu_form.as_ref(),
        }
    }

    /// Multiplier value of the given parametrization.
    pub fn param(&self, form: Form) -> Option<f64> {
        match form {
            Form::Lambda => self.lambda.finite(),
            Form::Mu => self.mu.finite(),
        }
    }

    pub fn m(&self) -> Option<&SquareMatrix> {
        self.lambda_form.as_ref().map(|q| &q.matrix)
    }

    pub fn w(&self) -> Option<&SquareMatrix> {
        self.mu_form.as_ref().map(|q| &q.matrix)
    }

    pub fn det_m(&self) -> Option<f64> {
        self.lambda_form.as_ref().map(|q| q.det)
    }

    pub fn det_w(&self) -> Option<f64> {
        self.mu_form.as_ref().map(|q| q.det)
    }

    pub fn p(&self) -> Option<&[f64]> {
        self.lambda_form.as_ref().map(|q| q.direction.as_slice())
    }

    pub fn q(&self) -> Option<&[f64]> {
        self.mu_form.as_ref().map(|q| q.direction.as_slice())
    }

    pub fn quad_m(&self) -> Option<f64> {
        self.lambda_form.as_ref().map(|q| q.quad)
    }

    pub fn quad_w(&self) -> Option<f64> {
        self.mu_form.as_ref().map(|q| q.quad)
    }

    /// The border vector of a form: `R = ∇H` for λ, `S = ∇F` for μ.
    pub fn border(&self, form: Form) -> &[f64] {
        match form {
            Form::Lambda => &self.grad_h,
            Form::Mu => &self.grad_f,
        }
    }

    /// `max(1, ‖A‖_max)^N`, the yardstick for `det` of a form's matrix.
    pub fn det_scale(&self, form: Form) -> f64 {
        let n = self.dim() as i32;
        let a = self.quantities(form).map_or(1.0, |q| q.matrix.max_abs()).max(1.0);
        a.powi(n)
    }

    /// `max(1, ‖A‖_max)^(N−1) · max(1, ‖B‖)²`, the yardstick for the quadratic form.
    pub fn quad_scale(&self, form: Form) -> f64 {
        let n = self.dim() as i32;
        let a = self.quantities(form).map_or(1.0, |q| q.matrix.max_abs()).max(1.0);
        let b = norm(self.border(form)).max(1.0);
        a.powi(n - 1) * b * b
    }

    /// Stationarity residual of the given form (`‖∇F − λ∇H‖` or `‖∇H − μ∇F‖`).
    pub fn residual_in(&self, form: Form) -> Option<f64> {
        let t = self.param(form)?;
        let (lead, border) = match form {
            Form::Lambda => (&self.grad_f, &self.grad_h),
            Form::Mu => (&self.grad_h, &self.grad_f),
        };
        Some(norm(&lead.iter().zip(border).map(|(a, b)| a - t * b).collect::<Vec<_>>()))
    }

    /// Parametrization with the better-scaled multiplier: λ while `|λ| ≤ 1`, μ otherwise.
    pub fn natural_form(&self) -> Form {
        match self.lambda {
            Multiplier::Finite(l) if l.abs() <= 1.0 => Form::Lambda,
            _ => Form::Mu,
        }
    }
}

fn eval_pair(pair: &ObjectivePair, k: &[f64]) -> Result<(Jet, Jet), LagrangeError> {
    Ok((pair.eval_f(k)?, pair.eval_h(k)?))
}

/// Assembles the state at `k` for a finite `lambda`. `W` is present when `λ ≠ 0`.
pub fn assemble(pair: &ObjectivePair, k: &[f64], lambda: f64) -> Result<BorderedState, LagrangeError> {
    let (jf, jh) = eval_pair(pair, k)?;
    let l = Multiplier::Finite(lambda);
    Ok(BorderedState::from_jets(k, jf, jh, l, l.reciprocal()))
}

/// Assembles the state at `k` for a finite `mu`. `M` is present when `μ ≠ 0`.
pub fn assemble_conjugate(pair: &ObjectivePair, k: &[f64], mu: f64) -> Result<BorderedState, LagrangeError> {
    let (jf, jh) = eval_pair(pair, k)?;
    let m = Multiplier::Finite(mu);
    Ok(BorderedState::from_jets(k, jf, jh, m.reciprocal(), m))
}

/// Assembles in whichever form `t` belongs to.
pub fn assemble_in(pair: &ObjectivePair, k: &[f64], form: Form, t: f64) -> Result<BorderedState, LagrangeError> {
    match form {
        Form::Lambda => assemble(pair, k, t),
        Form::Mu => assemble_conjugate(pair, k, t),
    }
}

/// Stationarity residual using the finite, better-scaled parametrization.
pub fn tangency_residual(state: &BorderedState) -> f64 {
    state
        .residual_in(state.natural_form())
        .or_else(|| state.residual_in(state.natural_form().other()))
        .expect("at least one multiplier is finite")
}

/// Arc-length rates for the `+` branch; the caller picks the sign.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    /// `dλ/ds` (λ-form) or `dμ/ds` (μ-form).
    pub dparam_ds: f64,
    pub df_ds: f64,
    pub dh_ds: f64,
    /// Unit tangent `P̂` or `Q̂`.
    pub direction: Vec<f64>,
}

impl Rates {
    pub fn negated(&self) -> Rates {
        Rates {
            dparam_ds: -self.dparam_ds,
            df_ds: -self.df_ds,
            dh_ds: -self.dh_ds,
            direction: self.direction.iter().map(|d| -d).collect(),
        }
    }
}

/// λ-form rates: `dk/ds = P̂`, `dλ/ds = det(M)/|P|`, `dh/ds = Rᵀ·P̂`, `df/ds = λ·Rᵀ·P̂`.
pub fn scalar_rates(state: &BorderedState) -> Result<Rates, LagrangeError> {
    rates_in(state, Form::Lambda)
}

/// μ-form rates: `dk/ds = Q̂`, `dμ/ds = det(W)/|Q|`, `df/ds = Sᵀ·Q̂`, `dh/ds = μ·Sᵀ·Q̂`.
pub fn scalar_rates_conjugate(state: &BorderedState) -> Result<Rates, LagrangeError> {
    rates_in(state, Form::Mu)
}

pub fn rates_in(state: &BorderedState, form: Form) -> Result<Rates, LagrangeError> {
    let q = state.quantities(form).ok_or(LagrangeError::FormUnavailable(form))?;
    let t = state.param(form).ok_or(LagrangeError::FormUnavailable(form))?;
    let len = norm(&q.direction);
    if !(len >= ZERO_DIRECTION_TOL) {
        return Err(LagrangeError::ZeroDirection { norm: len });
    }
    let direction: Vec<f64> = q.direction.iter().map(|p| p / len).collect();
    let along = dot(state.border(form), &direction);
    let (df_ds, dh_ds) = match form {
        Form::Lambda => (t * along, along),
        Form::Mu => (along, t * along),
    };
    Ok(Rates {
        dparam_ds: q.det / len,
        df_ds,
        dh_ds,
        direction,
    })
}

/// `dk/dλ = M⁻¹·R` or `dk/dμ = W⁻¹·S`, via the adjugate: `P/det(M)`.
pub fn param_velocity(state: &BorderedState, form: Form) -> Result<Vec<f64>, LagrangeError> {
    let q = state.quantities(form).ok_or(LagrangeError::FormUnavailable(form))?;
    if q.det == 0.0 {
        return Err(LinalgError::Singular { pivot: 0.0 }.into());
    }
    Ok(q.direction.iter().map(|p| p / q.det).collect())
}

/// Pairwise derivatives among `f`, `h` and `λ` along the curve.
///
/// Reciprocals are `None` where the underlying rate vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Rates {
    pub df_dh: f64,
    pub dh_df: Option<f64>,
    /// `RᵀM⁻¹R`
    pub dh_dlambda: f64,
    pub dlambda_dh: Option<f64>,
    pub df_dlambda: f64,
    pub dlambda_df: Option<f64>,
}

fn recip(x: f64) -> Option<f64> {
    (x != 0.0).then(|| 1.0 / x)
}

/// Derivative table from `M⁻¹` directly; fails where `M` is singular.
pub fn table1_rates(state: &BorderedState) -> Result<Table1Rates, LagrangeError> {
    let lambda = state.lambda.finite().ok_or(LagrangeError::FormUnavailable(Form::Lambda))?;
    let m = state.m().ok_or(LagrangeError::FormUnavailable(Form::Lambda))?;
    let x = solve(m, &state.grad_h)?;
    let q = dot(&state.grad_h, &x);
    Ok(Table1Rates {
        df_dh: lambda,
        dh_df: recip(lambda),
        dh_dlambda: q,
        dlambda_dh: recip(q),
        df_dlambda: lambda * q,
        dlambda_df: recip(lambda * q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Example1Problem, Example2Problem, QuadraticDeviationConstraint};
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    fn ex1() -> ObjectivePair {
        Example1Problem::new(2.0, 1.0, 1.0, 1.0).pair()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn assemble_example1_on_curve() {
        let s = assemble(&ex1(), &[0.8, 0.5], -1.0).unwrap();
        assert!(close(s.grad_f[0], -0.4, 1e-15) && close(s.grad_f[1], -1.0, 1e-15));
        assert!(close(s.grad_h[0], 0.4, 1e-15) && close(s.grad_h[1], 1.0, 1e-15));
        assert_eq!(s.m().unwrap(), &SquareMatrix::from_diag(&[2.5, 4.0]));
        assert_eq!(s.det_m().unwrap(), 10.0);
        assert_eq!(s.mu, Multiplier::Finite(-1.0));
        assert!(s.w().is_some());
        assert!(tangency_residual(&s) < 1e-15);
    }

    #[test]
    fn p_vanishes_at_h_cio() {
        let s = assemble(&ex1(), &[0.0, 0.0], -3.0).unwrap();
        assert!(s.p().unwrap().iter().all(|&p| p == 0.0));
        assert!(matches!(scalar_rates(&s), Err(LagrangeError::ZeroDirection { .. })));
    }

    #[test]
    fn lambda_zero_has_no_conjugate_matrix() {
        let ex = Example2Problem::new(1.0, 1.0, 2.0, 3.0).pair();
        let s = assemble(&ex, &[FRAC_PI_2, FRAC_PI_2], 0.0).unwrap();
        assert_eq!(s.mu, Multiplier::Infinite);
        assert!(s.w().is_none());
        assert!(tangency_residual(&s) < 1e-15);
    }

    #[test]
    fn conjugate_start_on_quadratic_constraint() {
        let f = Arc::new(QuadraticDeviationConstraint::new(vec![1.0, 1.0]));
        let h = Arc::new(QuadraticDeviationConstraint::new(vec![0.2, -0.3]));
        let pair = ObjectivePair::new("q", f, h).unwrap();
        let s = assemble_conjugate(&pair, &[0.2, -0.3], 0.0).unwrap();
        assert_eq!(s.w().unwrap(), &SquareMatrix::identity(2).scaled(2.0));
        assert_eq!(s.lambda, Multiplier::Infinite);
        // dk/dμ = W⁻¹S = S/2
        let v = param_velocity(&s, Form::Mu).unwrap();
        for (vi, si) in v.iter().zip(&s.grad_f) {
            assert!(close(*vi, 0.5 * si, 1e-15));
        }
    }

    #[test]
    fn conjugate_example1_at_origin() {
        let s = assemble_conjugate(&ex1(), &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(s.w().unwrap(), &SquareMatrix::from_diag(&[0.5, 2.0]));
        assert_eq!(s.q().unwrap(), &[-4.0, -1.0]);
        let r = scalar_rates_conjugate(&s).unwrap();
        let n = 17f64.sqrt();
        assert!(close(r.direction[0], -4.0 / n, 1e-15) && close(r.direction[1], -1.0 / n, 1e-15));
        assert_eq!(r.dh_ds, 0.0);
        // tracer minimizes f, so the + branch (df/ds > 0) gets flipped
        assert!(r.df_ds > 0.0);
        let flipped = r.negated();
        assert!(close(flipped.direction[0], 0.970, 1e-3) && close(flipped.direction[1], 0.243, 1e-3));
    }

    #[test]
    fn lambda_and_mu_forms_agree() {
        let a = assemble(&ex1(), &[0.8, 0.5], -1.0).unwrap();
        let b = assemble_conjugate(&ex1(), &[0.8, 0.5], -1.0).unwrap();
        let (l, m) = (a.lambda.finite().unwrap(), b.mu.finite().unwrap());
        assert!(close(l * m, 1.0, 1e-12));
        // M = −λ·W
        let w = b.w().unwrap().scaled(-l);
        assert!(a.m().unwrap().add_scaled(-1.0, &w).max_abs() < 1e-14);
        let ra = scalar_rates(&a).unwrap();
        let rb = scalar_rates_conjugate(&b).unwrap();
        let d = dot(&ra.direction, &rb.direction).abs();
        assert!(close(d, 1.0, 1e-12));
    }

    #[test]
    fn scalar_rates_example1() {
        let s = assemble(&ex1(), &[0.8, 0.5], -1.0).unwrap();
        assert_eq!(s.p().unwrap(), &[1.6, 2.5]);
        let r = scalar_rates(&s).unwrap();
        let len = (1.6f64 * 1.6 + 2.5 * 2.5).sqrt();
        assert!(close(r.dh_ds, (0.64 + 2.5) / len, 1e-14));
        assert!(close(r.df_ds, -r.dh_ds, 1e-14));
        assert!(close(r.dparam_ds, 10.0 / len, 1e-14));
        assert!(close(r.df_ds / r.dh_ds, -1.0, 1e-14));
    }

    #[test]
    fn table1_example1() {
        let s = assemble(&ex1(), &[0.8, 0.5], -1.0).unwrap();
        let t = table1_rates(&s).unwrap();
        assert_eq!(t.df_dh, -1.0);
        assert!(close(t.dh_dlambda, 0.16 / 2.5 + 1.0 / 4.0, 1e-15));
        assert!(close(t.df_dlambda, -0.314, 1e-15));
        assert!(close(t.dlambda_dh.unwrap() * t.dh_dlambda, 1.0, 1e-15));
        // Table relation agrees with arc-length rates
        let r = scalar_rates(&s).unwrap();
        assert!(close(r.dh_ds / r.dparam_ds, t.dh_dlambda, 1e-14));
    }

    #[test]
    fn tangency_residual_off_curve() {
        let s = assemble(&ex1(), &[0.0, 0.0], -1.0).unwrap();
        assert!(close(tangency_residual(&s), 2.0 * 2f64.sqrt(), 1e-15));
    }

    #[test]
    fn rates_at_singular_points() {
        // Inflection: det(M) = 0 but P stays finite and the tangent unit.
        // F = x² − y², H = x² + y², λ = −1 gives M = diag(4, 0).
        let f = Arc::new(crate::problem::Expression::parse("x^2 - y^2 + x*y", &["x".into(), "y".into()]).unwrap());
        let h = Arc::new(QuadraticDeviationConstraint::centered(2));
        let pair = ObjectivePair::new("saddle", f, h).unwrap();
        // M = [[2-2λ, 1], [1, -2-2λ]]; det = -(4+4λ... choose λ root numerically
        let det_at = |l: f64| assemble(&pair, &[0.3, 0.1], l).unwrap().det_m().unwrap();
        let (mut lo, mut hi) = (-3.0, -1.0);
        assert!(det_at(lo) * det_at(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if det_at(lo) * det_at(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let s = assemble(&pair, &[0.3, 0.1], lo).unwrap();
        let r = scalar_rates(&s).unwrap();
        assert!(r.dparam_ds.abs() < 1e-12);
        assert!(close(norm(&r.direction), 1.0, 1e-15));
    }
}

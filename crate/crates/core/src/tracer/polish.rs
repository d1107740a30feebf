//! Newton corrector for `∇F = λ∇H` (or `∇H = μ∇F`) with one extra pin.

use thiserror::Error;

use crate::lagrange::Form;
use crate::linalg::{dot, norm, solve, SquareMatrix};
use crate::problem::{EvalError, ObjectivePair};

const MAX_ITERATIONS: usize = 20;
const MAX_GROWTHS: usize = 3;

/// The extra condition closing the system.
#[derive(Debug, Clone, PartialEq)]
pub enum Pin {
    /// Multiplier held at its starting value; only `k` moves.
    Param,
    /// `h(k) = target`.
    FixedH(f64),
    /// `f(k) = target`.
    FixedF(f64),
    /// `(k − point)·normal = 0`, the pseudo-arclength condition.
    Hyperplane { point: Vec<f64>, normal: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolishOutcome {
    pub k: Vec<f64>,
    /// Multiplier of the form that was solved.
    pub t: f64,
    pub iterations: usize,
    /// Stationarity residual at the returned point.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolishError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("Newton residual grew {MAX_GROWTHS} times in a row (last {residual:e})")]
    Diverged { residual: f64 },
    #[error("Newton did not converge in {MAX_ITERATIONS} iterations (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("singular Newton system")]
    Singular,
}

struct Residual {
    stationarity: Vec<f64>,
    pin: f64,
    lead_norm: f64,
    jacobian: SquareMatrix,
}

fn residual(
    pair: &ObjectivePair,
    k: &[f64],
    t: f64,
    form: Form,
    pin: &Pin,
) -> Result<Residual, EvalError> {
    let jf = pair.eval_f(k)?;
    let jh = pair.eval_h(k)?;
    let (lead, border) = match form {
        Form::Lambda => (&jf, &jh),
        Form::Mu => (&jh, &jf),
    };
    let n = k.len();
    let stationarity: Vec<f64> = lead.grad.iter().zip(&border.grad).map(|(a, b)| a - t * b).collect();
    let a = lead.hess.add_scaled(-t, &border.hess);
    let (pin_value, pin_row) = match pin {
        Pin::Param => (0.0, None),
        Pin::FixedH(target) => (jh.value - target, Some(jh.grad.clone())),
        Pin::FixedF(target) => (jf.value - target, Some(jf.grad.clone())),
        Pin::Hyperplane { point, normal } => {
            let offset: Vec<f64> = k.iter().zip(point).map(|(x, p)| x - p).collect();
            (dot(&offset, normal), Some(normal.clone()))
        }
    };
    let jacobian = match pin_row {
        None => a,
        Some(row) => {
            let mut j = SquareMatrix::zeros(n + 1);
            for r in 0..n {
                for c in 0..n {
                    j[(r, c)] = a[(r, c)];
                }
                j[(r, n)] = -border.grad[r];
                j[(n, r)] = row[r];
            }
            j
        }
    };
    Ok(Residual {
        lead_norm: norm(&lead.grad),
        stationarity,
        pin: pin_value,
        jacobian,
    })
}

fn converged(r: &Residual, pin: &Pin, tol: f64) -> bool {
    let stat_ok = norm(&r.stationarity) <= tol * (1.0 + r.lead_norm);
    let pin_ok = match pin {
        Pin::Param => true,
        Pin::FixedH(target) | Pin::FixedF(target) => r.pin.abs() <= tol * (1.0 + target.abs()),
        Pin::Hyperplane { .. } => r.pin.abs() <= tol,
    };
    stat_ok && pin_ok
}

/// One further Newton step when the accepted residual is not well below the
/// tolerance, kept only if it lowers the residual. The relative test above can
/// accept residuals slightly over `tol` in absolute terms.
fn tighten(
    pair: &ObjectivePair,
    form: Form,
    pin: &Pin,
    tol: f64,
    cur: (Vec<f64>, f64, Residual),
) -> (Vec<f64>, f64, Residual) {
    let (k, t, r) = cur;
    let size = norm(&r.stationarity) + r.pin.abs();
    if size <= 1e-3 * tol {
        return (k, t, r);
    }
    let mut rhs: Vec<f64> = r.stationarity.iter().map(|g| -g).collect();
    if !matches!(pin, Pin::Param) {
        rhs.push(-r.pin);
    }
    let Ok(delta) = solve(&r.jacobian, &rhs) else {
        return (k, t, r);
    };
    let n = k.len();
    let k2: Vec<f64> = k.iter().zip(&delta).map(|(x, d)| x + d).collect();
    let t2 = if delta.len() > n { t + delta[n] } else { t };
    match residual(pair, &k2, t2, form, pin) {
        Ok(r2) if norm(&r2.stationarity) + r2.pin.abs() < size => (k2, t2, r2),
        _ => (k, t, r),
    }
}

/// Newton iteration on the stationarity condition of `form` plus `pin`.
///
/// Returns after zero iterations when the start already meets `tol`.
pub fn polish(
    pair: &ObjectivePair,
    k: &[f64],
    t: f64,
    form: Form,
    pin: &Pin,
    tol: f64,
) -> Result<PolishOutcome, PolishError> {
    let n = k.len();
    let mut k = k.to_vec();
    let mut t = t;
    let mut r = residual(pair, &k, t, form, pin)?;
    let mut size = norm(&r.stationarity) + r.pin.abs();
    let mut growths = 0;
    for iterations in 0..=MAX_ITERATIONS {
        if converged(&r, pin, tol) {
            let (k, t, r) = tighten(pair, form, pin, tol, (k, t, r));
            return Ok(PolishOutcome {
                k,
                t,
                iterations,
                residual: norm(&r.stationarity),
            });
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        let mut rhs: Vec<f64> = r.stationarity.iter().map(|g| -g).collect();
        if !matches!(pin, Pin::Param) {
            rhs.push(-r.pin);
        }
        let delta = solve(&r.jacobian, &rhs).map_err(|_| PolishError::Singular)?;
        for (x, d) in k.iter_mut().zip(&delta) {
            *x += d;
        }
        if delta.len() > n {
            t += delta[n];
        }
        r = residual(pair, &k, t, form, pin)?;
        let next = norm(&r.stationarity) + r.pin.abs();
        if !next.is_finite() {
            return Err(PolishError::Diverged { residual: next });
        }
        if next > size {
            growths += 1;
            if growths >= MAX_GROWTHS {
                return Err(PolishError::Diverged { residual: next });
            }
        } else {
            growths = 0;
        }
        size = next;
    }
    Err(PolishError::NoConvergence { residual: size })
}

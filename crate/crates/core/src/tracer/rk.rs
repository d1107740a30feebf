//! Dormand–Prince 5(4) step of the arc-length system.

use crate::lagrange::{assemble_in, rates_in, BorderedState, Form, LagrangeError};
use crate::linalg::dot;
use crate::problem::ObjectivePair;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct RkStep {
    pub k: Vec<f64>,
    /// Multiplier of the integrated form at the end of the step.
    pub t: f64,
    /// Weighted max-norm of the embedded error estimate; accept when `≤ 1`.
    pub error_norm: f64,
}

/// Signed right-hand side: the `±` branch is whichever points along `reference`.
fn slope(state: &BorderedState, form: Form, reference: &[f64]) -> Result<Vec<f64>, LagrangeError> {
    let rates = rates_in(state, form)?;
    let sign = if dot(&rates.direction, reference) < 0.0 { -1.0 } else { 1.0 };
    let mut y: Vec<f64> = rates.direction.iter().map(|d| sign * d).collect();
    y.push(sign * rates.dparam_ds);
    Ok(y)
}

/// One step of length `step` from `start` in `form`.
///
/// `reference` fixes the branch: stage slopes are oriented to agree with it.
pub fn rk_step(
    pair: &ObjectivePair,
    start: &BorderedState,
    form: Form,
    step: f64,
    reference: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<RkStep, LagrangeError> {
    let n = start.dim();
    let t0 = start.param(form).ok_or(LagrangeError::FormUnavailable(form))?;
    let mut y0 = start.k.clone();
    y0.push(t0);

    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(7);
    let first = slope(start, form, reference)?;
    let orient: Vec<f64> = first[..n].to_vec();
    stages.push(first);
    for i in 1..7 {
        let y: Vec<f64> = (0..=n)
            .map(|j| y0[j] + step * (0..i).map(|m| A[i][m] * stages[m][j]).sum::<f64>())
            .collect();
        let state = assemble_in(pair, &y[..n], form, y[n])?;
        stages.push(slope(&state, form, &orient)?);
    }
    let combine = |b: &[f64; 7]| -> Vec<f64> {
        (0..=n)
            .map(|j| y0[j] + step * (0..7).map(|m| b[m] * stages[m][j]).sum::<f64>())
            .collect()
    };
    let y5 = combine(&B5);
    let y4 = combine(&B4);
    let error_norm = (0..=n)
        .map(|j| {
            let scale = abs_tol + rel_tol * y0[j].abs().max(y5[j].abs());
            (y5[j] - y4[j]).abs() / scale
        })
        .fold(0.0, f64::max);
    let t = y5[n];
    let mut k = y5;
    k.truncate(n);
    Ok(RkStep { k, t, error_norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrange::assemble;
    use crate::problem::Example1Problem;

    #[test]
    fn single_step_tracks_example1_curve() {
        let ex = Example1Problem::new(2.0, 1.0, 1.0, 1.0);
        let pair = ex.pair();
        let start = assemble(&pair, &ex.curve_at(-1.0), -1.0).unwrap();
        // move towards λ = 0
        let reference = [1.0, 1.0];
        let out = rk_step(&pair, &start, Form::Lambda, 0.05, &reference, 1e-8, 1e-10).unwrap();
        let want = ex.curve_at(out.t);
        assert!(out.t > -1.0);
        assert!((out.k[0] - want[0]).abs() < 1e-8 && (out.k[1] - want[1]).abs() < 1e-8);
        let travelled = ((out.k[0] - 0.8).powi(2) + (out.k[1] - 0.5).powi(2)).sqrt();
        assert!((travelled - 0.05).abs() < 1e-4);
    }
}

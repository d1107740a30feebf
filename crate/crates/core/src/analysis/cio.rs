//! Stationary points of a single field ("CIOs": points where its gradient vanishes).

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::linalg::{inertia, norm, solve, Inertia, LinalgError, SquareMatrix};
use crate::problem::ScalarField;

use super::AnalysisError;

const NEWTON_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CioClass {
    Minimum,
    Maximum,
    Saddle,
    /// The Hessian has a zero eigenvalue; second order cannot decide.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CioReport {
    pub k: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub class: CioClass,
    pub inertia: Inertia,
}

/// Classification by the inertia of a symmetric Hessian.
pub fn classify_hessian(hess: &SquareMatrix) -> Result<(CioClass, Inertia), LinalgError> {
    let i = inertia(hess)?;
    let class = if i.zero > 0 {
        CioClass::Degenerate
    } else if i.negative == 0 {
        CioClass::Minimum
    } else if i.positive == 0 {
        CioClass::Maximum
    } else {
        CioClass::Saddle
    };
    Ok((class, i))
}

fn stationary_tol(tol: f64, hess: &SquareMatrix) -> f64 {
    tol * hess.max_abs().max(1.0)
}

/// Classifies `k`, which must be stationary to within `tol·max(1, ‖∇²‖)`.
pub fn classify_cio(field: &dyn ScalarField, k: &[f64], tol: f64) -> Result<CioReport, AnalysisError> {
    let jet = field.jet(k)?;
    let grad_norm = norm(&jet.grad);
    if grad_norm > stationary_tol(tol, &jet.hess) {
        return Err(AnalysisError::NotStationary { grad_norm });
    }
    let (class, inertia) = classify_hessian(&jet.hess)?;
    Ok(CioReport {
        k: k.to_vec(),
        value: jet.value,
        grad_norm,
        class,
        inertia,
    })
}

/// Newton's method on `∇ = 0` from `guess`.
pub fn find_cio(field: &dyn ScalarField, guess: &[f64], tol: f64) -> Result<CioReport, AnalysisError> {
    let mut k = guess.to_vec();
    let mut grad_norm = f64::INFINITY;
    for _ in 0..=NEWTON_ITERATIONS {
        let jet = field.jet(&k)?;
        grad_norm = norm(&jet.grad);
        if grad_norm <= stationary_tol(tol, &jet.hess) {
            return classify_cio(field, &k, tol);
        }
        let rhs: Vec<f64> = jet.grad.iter().map(|g| -g).collect();
        let step = solve(&jet.hess, &rhs)?;
        for (x, d) in k.iter_mut().zip(&step) {
            *x += d;
        }
        if !k.iter().all(|x| x.is_finite()) {
            break;
        }
    }
    Err(AnalysisError::NoConvergence { grad_norm })
}

/// Axis-aligned box sampled at `per_axis` points along each coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub per_axis: usize,
}

impl GridSpec {
    fn validate(&self, dim: usize) -> Result<(), AnalysisError> {
        if self.lower.len() != dim || self.upper.len() != dim {
            return Err(AnalysisError::InvalidGrid(format!("bounds must have {dim} entries")));
        }
        if self.per_axis < 2 {
            return Err(AnalysisError::InvalidGrid("need at least 2 points per axis".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u)) {
            return Err(AnalysisError::InvalidGrid("lower bound must be below upper bound".into()));
        }
        Ok(())
    }

    fn points(&self) -> Vec<Vec<f64>> {
        let dim = self.lower.len();
        let total = self.per_axis.pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                (0..dim)
                    .map(|d| {
                        let i = idx % self.per_axis;
                        idx /= self.per_axis;
                        let frac = i as f64 / (self.per_axis - 1) as f64;
                        self.lower[d] + frac * (self.upper[d] - self.lower[d])
                    })
                    .collect()
            })
            .collect()
    }

    fn contains(&self, k: &[f64]) -> bool {
        k.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (l, u))| {
            let slack = 1e-9 * (u - l);
            *x >= l - slack && *x <= u + slack
        })
    }
}

/// Every stationary point Newton reaches from the grid nodes and that lies in the box.
///
/// Duplicates closer than `1e-6·(1 + |k|)` are dropped; results are sorted lexicographically.
pub fn scan_stationary_points(
    field: &dyn ScalarField,
    grid: &GridSpec,
    tol: f64,
    exec: Exec,
) -> Result<Vec<CioReport>, AnalysisError> {
    grid.validate(field.dim())?;
    let seeds = grid.points();
    let found = exec.map(&seeds, |seed| find_cio(field, seed, tol).ok());
    let mut unique: Vec<CioReport> = Vec::new();
    for report in found.into_iter().flatten() {
        if !grid.contains(&report.k) {
            continue;
        }
        let radius = 1e-6 * (1.0 + norm(&report.k));
        let dup = unique.iter().any(|u| {
            norm(&u.k.iter().zip(&report.k).map(|(a, b)| a - b).collect::<Vec<_>>()) < radius
        });
        if !dup {
            unique.push(report);
        }
    }
    unique.sort_by(|a, b| {
        a.k.iter()
            .zip(&b.k)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(unique)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Example2Problem, SineSum};
    use std::f64::consts::PI;

    #[test]
    fn classify_sine_sum_points() {
        let h = SineSum { freqs: vec![2.0, 3.0] };
        let min = classify_cio(&h, &[-PI / 4.0, -PI / 6.0], 1e-10).unwrap();
        assert_eq!(min.class, CioClass::Minimum);
        let saddle = classify_cio(&h, &[PI / 4.0, -PI / 6.0], 1e-10).unwrap();
        assert_eq!(saddle.class, CioClass::Saddle);
        assert!(matches!(classify_cio(&h, &[0.0, 0.0], 1e-10), Err(AnalysisError::NotStationary { .. })));
    }

    #[test]
    fn example2_h_minimum_is_found() {
        let ex = Example2Problem::new(1.0, 1.0, 2.0, 3.0);
        let pair = ex.pair();
        let guess: Vec<f64> = ex.h_minimum().iter().map(|x| x + 0.05).collect();
        let found = find_cio(pair.h().as_ref(), &guess, 1e-12).unwrap();
        for (a, b) in found.k.iter().zip(ex.h_minimum()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(found.class, CioClass::Minimum);
    }

    #[test]
    fn grid_scan_counts_sine_points() {
        // sin x + sin y on (0, 2π)²: one max, one min, two saddles
        let f = SineSum { freqs: vec![1.0, 1.0] };
        let grid = GridSpec {
            lower: vec![0.1, 0.1],
            upper: vec![2.0 * PI - 0.1, 2.0 * PI - 0.1],
            per_axis: 9,
        };
        let pts = scan_stationary_points(&f, &grid, 1e-12, Exec::Sequential).unwrap();
        assert_eq!(pts.len(), 4);
        let count = |c| pts.iter().filter(|p| p.class == c).count();
        assert_eq!((count(CioClass::Minimum), count(CioClass::Maximum), count(CioClass::Saddle)), (1, 1, 2));
        let par = scan_stationary_points(&f, &grid, 1e-12, Exec::Parallel).unwrap();
        assert_eq!(pts, par);
    }
}

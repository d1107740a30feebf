//! Dense small-matrix kernel.
//!
//! Everything here is sized for the handful of variables a tradeoff problem
//! carries (N up to ~12). Determinants and solves use LU with partial
//! pivoting; the adjugate is assembled from cofactor minors so that it stays
//! finite and exact when the matrix is singular.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivots smaller than this are treated as exact zeros by [`determinant`].
const PIVOT_UNDERFLOW: f64 = 1e-300;

/// Relative pivot threshold below which [`solve`] reports a singular matrix.
const SINGULAR_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: matrix order {order}, vector length {len}")]
    DimensionMismatch { order: usize, len: usize },
}

/// Square matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            entries: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `entries.len() != order * order`.
    pub fn from_row_major(order: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), order * order, "row-major length mismatch");
        Self { order, entries }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), order, "matrix rows must be square");
            entries.extend_from_slice(r);
        }
        Self { order, entries }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn transpose(&self) -> Self {
        let n = self.order;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.order);
        (0..self.order)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.order, other.order);
        let n = self.order;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.order, other.order);
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Self {
            order: self.order,
            entries,
        }
    }

    pub fn scaled(&self, alpha: f64) -> SquareMatrix {
        Self {
            order: self.order,
            entries: self.entries.iter().map(|a| alpha * a).collect(),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }

    /// Largest `|M_ij - M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.order;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Symmetric quadratic form `xᵀ·M·y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    /// Copy of the matrix with row `skip_row` and column `skip_col` removed.
    pub fn minor(&self, skip_row: usize, skip_col: usize) -> SquareMatrix {
        let n = self.order;
        let mut entries = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|&i| i != skip_row) {
            for j in (0..n).filter(|&j| j != skip_col) {
                entries.push(self[(i, j)]);
            }
        }
        Self {
            order: n - 1,
            entries,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|a| a.is_finite())
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.order + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.order + j]
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.order).map(|i| self.row(i)).collect();
        f.debug_struct("SquareMatrix")
            .field("order", &self.order)
            .field("rows", &rows)
            .finish()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// In-place LU factorization with partial pivoting.
struct Lu {
    order: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    swaps: usize,
    /// Smallest pivot magnitude encountered.
    min_pivot: f64,
}

impl Lu {
    fn factor(m: &SquareMatrix) -> Self {
        let n = m.order;
        let mut lu = m.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut min_pivot = f64::INFINITY;
        for col in 0..n {
            let (piv_row, piv_abs) = (col..n)
                .map(|r| (r, lu[r * n + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            min_pivot = min_pivot.min(piv_abs);
            if piv_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, piv_row * n + j);
                }
                perm.swap(col, piv_row);
                swaps += 1;
            }
            let pivot = lu[col * n + col];
            if pivot.abs() < PIVOT_UNDERFLOW {
                continue;
            }
            for r in (col + 1)..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in (col + 1)..n {
                    lu[r * n + j] -= factor * lu[col * n + j];
                }
            }
        }
        if n == 0 {
            min_pivot = 1.0;
        }
        Self {
            order: n,
            lu,
            perm,
            swaps,
            min_pivot,
        }
    }

    fn determinant(&self) -> f64 {
        if self.min_pivot < PIVOT_UNDERFLOW {
            return 0.0;
        }
        let n = self.order;
        let prod: f64 = (0..n).map(|i| self.lu[i * n + i]).product();
        if self.swaps % 2 == 1 {
            -prod
        } else {
            prod
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.order;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }
}

/// Determinant via pivoted LU. Returns exactly zero when a pivot underflows.
pub fn determinant(m: &SquareMatrix) -> f64 {
    match m.order {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => Lu::factor(m).determinant(),
    }
}

/// Adjugate (transpose of the cofactor matrix).
///
/// Each cofactor is the determinant of a minor, so the result is well defined
/// and continuous through `det(M) = 0`, unlike `det(M)·M⁻¹`.
pub fn adjugate(m: &SquareMatrix) -> SquareMatrix {
    let n = m.order;
    match n {
        0 => return SquareMatrix::zeros(0),
        1 => return SquareMatrix::identity(1),
        _ => {}
    }
    let mut adj = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // cofactor C_ij lands at Adj_ji
            adj[(j, i)] = sign * determinant(&m.minor(i, j));
        }
    }
    adj
}

/// Solves `M·x = rhs`.
pub fn solve(m: &SquareMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != m.order {
        return Err(LinalgError::DimensionMismatch {
            order: m.order,
            len: rhs.len(),
        });
    }
    let lu = Lu::factor(m);
    let scale = m.max_abs().max(PIVOT_UNDERFLOW);
    if lu.min_pivot <= SINGULAR_REL_TOL * scale {
        return Err(LinalgError::Singular {
            pivot: lu.min_pivot,
        });
    }
    Ok(lu.solve(rhs))
}

/// Eigenvalue sign counts of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Counts eigenvalue signs; an eigenvalue is "zero" when `|e| < 1e-10·‖M‖_max`.
pub fn inertia(m: &SquareMatrix) -> Result<Inertia, LinalgError> {
    let scale = m.max_abs();
    let asym = m.asymmetry();
    if asym > 1e-10 * scale.max(1.0) {
        return Err(LinalgError::NotSymmetric { asymmetry: asym });
    }
    let eig = symmetric_eigenvalues(m);
    let tol = 1e-10 * scale;
    let mut out = Inertia {
        positive: 0,
        negative: 0,
        zero: 0,
    };
    for e in eig {
        if e.abs() <= tol {
            out.zero += 1;
        } else if e > 0.0 {
            out.positive += 1;
        } else {
            out.negative += 1;
        }
    }
    Ok(out)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(m: &SquareMatrix) -> Vec<f64> {
    let n = m.order;
    let mut a = m.clone();
    // symmetrize so round-off asymmetry cannot stall the sweep
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

/// Square matrix of order `n + 1` bordering `m` with a column, row and corner.
///
/// ```text
/// [ m      col ]
/// [ rowᵀ corner]
/// ```
pub fn bordered(m: &SquareMatrix, col: &[f64], row: &[f64], corner: f64) -> SquareMatrix {
    let n = m.order;
    let mut b = SquareMatrix::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = m[(i, j)];
        }
        b[(i, n)] = col[i];
        b[(n, i)] = row[i];
    }
    b[(n, n)] = corner;
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Laplace expansion along the first row.
    fn cofactor_det(m: &SquareMatrix) -> f64 {
        let n = m.order();
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&m.minor(0, j))
            })
            .sum()
    }

    fn lcg_matrix(n: usize, seed: &mut u64) -> SquareMatrix {
        let mut next = || {
            *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        SquareMatrix::from_row_major(n, (0..n * n).map(|_| next()).collect())
    }

    #[test]
    fn determinant_small_cases() {
        assert_eq!(determinant(&SquareMatrix::identity(2)), 1.0);
        assert_eq!(determinant(&SquareMatrix::from_diag(&[0.5, 2.0])), 1.0);
        assert_eq!(determinant(&SquareMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]])), 0.0);
    }

    #[test]
    fn determinant_matches_laplace_expansion() {
        let mut seed = 7;
        for _ in 0..20 {
            let a = lcg_matrix(5, &mut seed);
            let scale = a.max_abs().powi(5);
            let d = determinant(&a);
            assert!((d - cofactor_det(&a)).abs() <= 1e-10 * scale.max(1.0));
            let dt = determinant(&a.transpose());
            assert!((d - dt).abs() <= 1e-12 * d.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn adjugate_closed_forms() {
        let (a, b, c, d) = (1.5, -2.0, 0.25, 3.0);
        let adj = adjugate(&SquareMatrix::from_rows(&[[a, b], [c, d]]));
        assert_eq!(adj, SquareMatrix::from_rows(&[[d, -b], [-c, a]]));
        assert_eq!(
            adjugate(&SquareMatrix::from_diag(&[0.5, 2.0])),
            SquareMatrix::from_diag(&[2.0, 0.5])
        );
        let sing = SquareMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        let adj = adjugate(&sing);
        assert_eq!(adj, SquareMatrix::from_rows(&[[4.0, -2.0], [-2.0, 1.0]]));
        assert_eq!(adj.matmul(&sing).max_abs(), 0.0);
    }

    #[test]
    fn adjugate_continuous_through_singularity() {
        let adj_at = |t: f64| adjugate(&SquareMatrix::from_diag(&[t, 1.0, 1.0]));
        for &t in &[-1e-3, -1e-9, 0.0, 1e-9, 1e-3] {
            let adj = adj_at(t);
            assert!(adj.is_finite());
            assert_eq!(adj[(0, 0)], 1.0);
            assert!((adj[(1, 1)] - t).abs() < 1e-15);
        }
    }

    #[test]
    fn solve_cases() {
        assert_eq!(solve(&SquareMatrix::identity(2), &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(
            solve(&SquareMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap(),
            vec![1.0, 1.0]
        );
        let mut seed = 99;
        let mut a = lcg_matrix(6, &mut seed);
        for i in 0..6 {
            a[(i, i)] += 6.0;
        }
        let rhs = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let x = solve(&a, &rhs).unwrap();
        let r = a.mul_vec(&x);
        let res: f64 = r.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-10);
    }

    #[test]
    fn solve_reports_singular_pivot() {
        let err = solve(&SquareMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]), &[1.0, 1.0]);
        assert!(matches!(err, Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn inertia_cases() {
        let i3 = SquareMatrix::identity(3).scaled(2.0);
        assert_eq!(
            inertia(&i3).unwrap(),
            Inertia { positive: 3, negative: 0, zero: 0 }
        );
        let d = SquareMatrix::from_diag(&[1.0, -1.0]);
        assert_eq!(
            inertia(&d).unwrap(),
            Inertia { positive: 1, negative: 1, zero: 0 }
        );
        let d = SquareMatrix::from_diag(&[1.0, 0.0, -3.0]);
        assert_eq!(
            inertia(&d).unwrap(),
            Inertia { positive: 1, negative: 1, zero: 1 }
        );
        let bad = SquareMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        assert!(matches!(inertia(&bad), Err(LinalgError::NotSymmetric { .. })));
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // eigenvalues 1 and 3
        let m = SquareMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]);
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }
}

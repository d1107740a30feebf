//! Second-order forward-mode dual numbers.
//!
//! A [`HyperDual`] carries a value together with its full gradient and
//! Hessian with respect to the `n` seed variables. Arithmetic propagates all
//! three exactly, so evaluating an expression once yields machine-precision
//! derivatives of both orders.

use crate::linalg::SquareMatrix;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HyperDual {
    pub v: f64,
    pub g: Vec<f64>,
    /// Row-major `n × n`.
    pub h: Vec<f64>,
}

impl HyperDual {
    pub fn constant(v: f64, n: usize) -> Self {
        Self {
            v,
            g: vec![0.0; n],
            h: vec![0.0; n * n],
        }
    }

    pub fn variable(v: f64, index: usize, n: usize) -> Self {
        let mut d = Self::constant(v, n);
        d.g[index] = 1.0;
        d
    }

    fn n(&self) -> usize {
        self.g.len()
    }

    pub fn into_parts(self) -> (f64, Vec<f64>, SquareMatrix) {
        let n = self.n();
        (self.v, self.g, SquareMatrix::from_row_major(n, self.h))
    }

    pub fn add(&self, o: &Self) -> Self {
        Self {
            v: self.v + o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a + b).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            v: self.v - o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a - b).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            v: -self.v,
            g: self.g.iter().map(|a| -a).collect(),
            h: self.h.iter().map(|a| -a).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.n();
        let (a, b) = (self.v, o.v);
        let g = self.g.iter().zip(&o.g).map(|(ga, gb)| a * gb + b * ga).collect();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                h[idx] = a * o.h[idx]
                    + b * self.h[idx]
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        Self { v: a * b, g, h }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.n();
        let g = self.g.iter().map(|gi| f1 * gi).collect();
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                h[idx] = f1 * self.h[idx] + f2 * self.g[i] * self.g[j];
            }
        }
        Self { v: f0, g, h }
    }

    pub fn recip(&self) -> Self {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(&self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn powi(&self, e: i32) -> Self {
        let x = self.v;
        let f0 = x.powi(e);
        let f1 = if e == 0 { 0.0 } else { e as f64 * x.powi(e - 1) };
        let f2 = if e == 0 || e == 1 {
            0.0
        } else {
            (e as f64) * (e as f64 - 1.0) * x.powi(e - 2)
        };
        self.chain(f0, f1, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_on_xy() {
        let x = HyperDual::variable(2.0, 0, 2);
        let y = HyperDual::variable(3.0, 1, 2);
        let p = x.mul(&y);
        assert_eq!(p.v, 6.0);
        assert_eq!(p.g, vec![3.0, 2.0]);
        assert_eq!(p.h, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn recip_second_derivative() {
        let x = HyperDual::variable(2.0, 0, 1);
        let r = x.recip();
        assert_eq!((r.v, r.g[0], r.h[0]), (0.5, -0.25, 0.25));
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = HyperDual::variable(1.7, 0, 2);
        let y = HyperDual::variable(-0.4, 1, 2);
        let s = x.add(&y);
        let cubed = s.powi(3);
        let prod = s.mul(&s).mul(&s);
        for (a, b) in cubed.h.iter().zip(&prod.h) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

//! Dense primal simplex with Bland's rule.
//!
//! Solves `max c.x` subject to `A x = b`, `x >= 0`, `b >= 0`, starting from a
//! caller-supplied basis whose columns form an identity block. The number
//! type decides exactness: [`BigRational`] pivots exactly, `f64` uses a fixed
//! tolerance.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub trait LpNum:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialOrd
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn to_f64(&self) -> f64;
    fn from_i64(v: i64) -> Self;
    /// Exact conversion of a finite float.
    fn from_f64(v: f64) -> Self;

    fn is_nonzero(&self) -> bool {
        self.is_pos() || self.is_neg()
    }
}

impl LpNum for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(Zero::zero)
    }
}

const F64_TOL: f64 = 1e-9;

impl LpNum for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_pos(&self) -> bool {
        *self > F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -F64_TOL
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

#[derive(Debug, Clone)]
pub struct LpProblem<T> {
    /// Constraint rows, each of length `c.len()`.
    pub a: Vec<Vec<T>>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    /// Column index of the unit vector for each row.
    pub basis: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub pivots: usize,
}

impl<T: LpNum> LpProblem<T> {
    fn check(&self) -> Result<()> {
        let m = self.a.len();
        let n = self.c.len();
        if self.b.len() != m || self.basis.len() != m || self.a.iter().any(|r| r.len() != n) {
            return Err(Error::structural("inconsistent LP dimensions"));
        }
        for (i, &j) in self.basis.iter().enumerate() {
            if j >= n || (0..m).any(|k| if k == i { self.a[k][j] != T::one() } else { self.a[k][j].is_nonzero() }) {
                return Err(Error::structural("initial basis is not an identity block"));
            }
        }
        if self.b.iter().any(|v| v.is_neg()) {
            return Err(Error::structural("initial basis is infeasible"));
        }
        Ok(())
    }

    pub fn maximize(mut self, max_pivots: usize) -> Result<LpSolution<T>> {
        self.check()?;
        let m = self.a.len();
        let n = self.c.len();
        // reduced profits r_j = c_j - c_B . column_j, and objective z = c_B . b
        let mut r = self.c.clone();
        let mut z = T::zero();
        for i in 0..m {
            let cb = self.c[self.basis[i]].clone();
            if cb.is_nonzero() {
                for (rj, aij) in r.iter_mut().zip(&self.a[i]) {
                    *rj = rj.clone() - cb.clone() * aij.clone();
                }
                z = z + cb * self.b[i].clone();
            }
        }
        let mut pivots = 0;
        loop {
            let Some(enter) = (0..n).find(|&j| r[j].is_pos()) else { break };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                if self.a[i][enter].is_pos() {
                    let ratio = self.b[i].clone() / self.a[i][enter].clone();
                    let better = match &leave {
                        None => true,
                        Some((l, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Numerical {
                    message: "linear program is unbounded".into(),
                    residual: f64::INFINITY,
                });
            };
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Numerical {
                    message: format!("simplex exceeded {max_pivots} pivots"),
                    residual: f64::NAN,
                });
            }
            let piv = self.a[row][enter].clone();
            for v in self.a[row].iter_mut() {
                *v = v.clone() / piv.clone();
            }
            self.b[row] = self.b[row].clone() / piv;
            let pivot_row = self.a[row].clone();
            let pivot_b = self.b[row].clone();
            for i in 0..m {
                if i == row {
                    continue;
                }
                let f = self.a[i][enter].clone();
                if f.is_nonzero() {
                    for (v, p) in self.a[i].iter_mut().zip(&pivot_row) {
                        *v = v.clone() - f.clone() * p.clone();
                    }
                    self.b[i] = self.b[i].clone() - f * pivot_b.clone();
                }
                // keep the entering column exact in floating mode
                self.a[i][enter] = T::zero();
            }
            let f = r[enter].clone();
            for (v, p) in r.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * p.clone();
            }
            r[enter] = T::zero();
            z = z + f * pivot_b;
            self.basis[row] = enter;
        }
        let mut x = vec![T::zero(); n];
        for (i, &j) in self.basis.iter().enumerate() {
            x[j] = self.b[i].clone();
        }
        Ok(LpSolution { x, objective: z, pivots })
    }
}

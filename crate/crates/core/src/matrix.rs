//! Small dense matrices over [`Entry`] scalars.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::scalar::{CScalar, Entry, Scalar, ScalarError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

pub type RMat = Mat<Scalar>;
pub type CMat = Mat<CScalar>;

impl<E: Entry> Mat<E> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![E::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = E::one();
        }
        m
    }

    pub fn scalar(n: usize, s: E) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = s.clone();
        }
        m
    }

    pub fn diag(d: Vec<E>) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, x) in d.into_iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    /// Panics if the rows are ragged.
    pub fn from_rows(rows: Vec<Vec<E>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix rows");
        Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &E {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: E) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[E] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[E] {
        &self.data
    }

    pub fn is_exact(&self) -> bool {
        self.data.iter().all(Entry::is_exact)
    }

    pub fn to_float(&self) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(Entry::to_float).collect() }
    }

    pub fn map<F: Entry>(&self, f: impl Fn(&E) -> F) -> Mat<F> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "matrix product dimension mismatch");
        Self::from_fn(self.rows, o.cols, |i, j| {
            let mut acc = E::zero();
            for k in 0..self.cols {
                acc = acc.add(&self.get(i, k).mul(o.get(k, j)));
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[E]) -> Vec<E> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = E::zero();
                for (k, x) in v.iter().enumerate() {
                    acc = acc.add(&self.get(i, k).mul(x));
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn scale(&self, s: &E) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.mul(s)).collect() }
    }

    fn pivot(col: &[(usize, &E)]) -> Option<usize> {
        let exact = col.iter().all(|(_, e)| e.is_exact());
        if exact {
            col.iter().find(|(_, e)| !e.is_zero()).map(|(i, _)| *i)
        } else {
            col.iter()
                .filter(|(_, e)| e.certainly_nonzero())
                .max_by(|a, b| a.1.to_c64().norm().total_cmp(&b.1.to_c64().norm()))
                .map(|(i, _)| *i)
        }
    }

    /// Determinant by Gaussian elimination.
    pub fn det(&self) -> Result<E, ScalarError> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = E::one();
        for k in 0..n {
            let col: Vec<(usize, &E)> = (k..n).map(|i| (i, a.get(i, k))).collect();
            let p = match Self::pivot(&col) {
                Some(p) => p,
                None => {
                    if (k..n).all(|i| a.get(i, k).is_zero()) {
                        return Ok(E::zero());
                    }
                    return Err(ScalarError::UncertainDivisor { mid: 0.0, rad: a.get(k, k).radius() });
                }
            };
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
                det = det.neg();
            }
            let piv = a.get(k, k).clone();
            det = det.mul(&piv);
            for i in k + 1..n {
                let f = a.get(i, k).checked_div(&piv)?;
                if f.is_zero() {
                    continue;
                }
                for j in k..n {
                    let v = a.get(i, j).sub(&f.mul(a.get(k, j)));
                    a.set(i, j, v);
                }
            }
        }
        Ok(det)
    }

    /// Inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Self, ScalarError> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for k in 0..n {
            let col: Vec<(usize, &E)> = (k..n).map(|i| (i, a.get(i, k))).collect();
            let p = Self::pivot(&col).ok_or(ScalarError::DivisionByZero)?;
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                    inv.data.swap(p * n + j, k * n + j);
                }
            }
            let piv = a.get(k, k).clone();
            for j in 0..n {
                let v = a.get(k, j).checked_div(&piv)?;
                a.set(k, j, v);
                let w = inv.get(k, j).checked_div(&piv)?;
                inv.set(k, j, w);
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a.get(i, k).clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = a.get(i, j).sub(&f.mul(a.get(k, j)));
                    a.set(i, j, v);
                    let w = inv.get(i, j).sub(&f.mul(inv.get(k, j)));
                    inv.set(i, j, w);
                }
            }
        }
        Ok(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let e = self.get(i, j);
                    if i == j {
                        *e == E::one()
                    } else {
                        e.is_zero()
                    }
                })
            })
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.get(i, j).is_zero()))
    }

    /// Largest entrywise deviation between midpoints.
    pub fn max_deviation(&self, o: &Self) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| (a.to_c64() - b.to_c64()).norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm of the entry radii.
    pub fn radius_frobenius(&self) -> f64 {
        self.data.iter().map(|e| e.radius().powi(2)).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum (operator norm for the sup norm), upper bound.
    pub fn inf_norm_upper(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(Entry::abs_upper).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_c64(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_c64())
    }
}

impl RMat {
    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).mid())
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| Scalar::float(m[(i, j)]))
    }

    pub fn from_ints(rows: &[&[i64]]) -> Self {
        Mat::from_rows(rows.iter().map(|r| r.iter().map(|&x| Scalar::int(x)).collect()).collect())
    }

    /// Maximum absolute row sum as a scalar, exact in exact mode.
    pub fn inf_norm(&self) -> Scalar {
        let mut best = Scalar::zero();
        for i in 0..self.rows {
            let mut s = Scalar::zero();
            for e in self.row(i) {
                s = &s + &e.abs();
            }
            best = best.max(&s);
        }
        best
    }
}

impl CMat {
    /// Real 2n x 2n matrix of the same linear map, coordinates (re z1, im z1, ...).
    pub fn realify(&self) -> RMat {
        let mut m = Mat::zeros(2 * self.rows, 2 * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self.get(i, j);
                m.set(2 * i, 2 * j, z.re.clone());
                m.set(2 * i, 2 * j + 1, -&z.im);
                m.set(2 * i + 1, 2 * j, z.im.clone());
                m.set(2 * i + 1, 2 * j + 1, z.re.clone());
            }
        }
        m
    }

    pub fn from_c64(m: &DMatrix<Complex64>) -> Self {
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| CScalar::from_c64(m[(i, j)]))
    }
}

impl<E: Entry> fmt::Display for Mat<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

fn singular_values<E: Entry>(m: &Mat<E>) -> (Vec<f64>, f64) {
    let sv = m.to_c64().singular_values();
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let n = m.rows().max(m.cols()) as f64;
    let smax = v.first().copied().unwrap_or(0.0);
    // Weyl: entry radii perturb singular values by at most their Frobenius norm
    let err = m.radius_frobenius() + 16.0 * n * f64::EPSILON * smax + f64::MIN_POSITIVE;
    (v, err)
}

/// Operator 2-norm with a rigorous enclosure.
pub fn op_norm<E: Entry>(m: &Mat<E>) -> Scalar {
    if let Some(d) = exact_real_diag(m) {
        return d.iter().fold(Scalar::zero(), |a, b| a.max(b));
    }
    let (v, err) = singular_values(m);
    Scalar::approx(v[0], err)
}

/// Smallest singular value with a rigorous enclosure.
pub fn co_norm<E: Entry>(m: &Mat<E>) -> Scalar {
    if let Some(d) = exact_real_diag(m) {
        return d.iter().skip(1).fold(d[0].clone(), |a, b| a.min(b));
    }
    let (v, err) = singular_values(m);
    Scalar::approx(*v.last().unwrap(), err)
}

/// For exact real diagonal matrices, the exact absolute diagonal entries.
fn exact_real_diag<E: Entry>(m: &Mat<E>) -> Option<Vec<Scalar>> {
    if E::IS_COMPLEX || !m.is_square() || !m.is_exact() || !m.is_diagonal() || m.rows() == 0 {
        return None;
    }
    let any: &dyn std::any::Any = m;
    let rm = any.downcast_ref::<RMat>()?;
    Some((0..rm.rows()).map(|i| rm.get(i, i).abs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_norms_exact() {
        let m = RMat::diag(vec![Scalar::int(3), Scalar::int(2)]);
        assert_eq!(op_norm(&m), Scalar::int(3));
        assert_eq!(co_norm(&m), Scalar::int(2));
    }

    #[test]
    fn rotation_norms() {
        let m = RMat::from_ints(&[&[0, -1], &[1, 0]]);
        let n = op_norm(&m);
        assert!((n.mid() - 1.0).abs() <= n.rad() + 1e-15);
        let c = co_norm(&m);
        assert!((c.mid() - 1.0).abs() <= c.rad() + 1e-15);
    }

    #[test]
    fn inverse_and_det_exact() {
        let m = RMat::from_ints(&[&[2, 1], &[7, 4]]);
        assert_eq!(m.det().unwrap(), Scalar::int(1));
        let inv = m.inverse().unwrap();
        assert!(m.mul(&inv).is_identity());
        let s = RMat::from_ints(&[&[1, 2], &[2, 4]]);
        assert_eq!(s.det().unwrap(), Scalar::zero());
        assert!(s.inverse().is_err());
    }

    #[test]
    fn realify_multiplication_by_i() {
        let m = CMat::from_rows(vec![vec![CScalar::i()]]);
        assert_eq!(m.realify(), RMat::from_ints(&[&[0, -1], &[1, 0]]));
    }
}

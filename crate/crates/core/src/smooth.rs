//! Smooth maps evaluated in double precision.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::affine::RealAffine;

pub trait SmoothMap: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Coordinatewise `q x^2 + c x^3 + s sin(w x)` added to an affine map.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub quadratic: Vec<f64>,
    pub cubic: Vec<f64>,
    pub sine: Vec<f64>,
    pub freq: f64,
}

impl Perturbation {
    pub fn zero(d: usize) -> Self {
        Perturbation { quadratic: vec![0.0; d], cubic: vec![0.0; d], sine: vec![0.0; d], freq: 1.0 }
    }

    pub fn sine(d: usize, amplitude: f64, freq: f64) -> Self {
        Perturbation { sine: vec![amplitude; d], freq, ..Self::zero(d) }
    }

    pub fn quadratic(coeffs: Vec<f64>) -> Self {
        let d = coeffs.len();
        Perturbation { quadratic: coeffs, ..Self::zero(d) }
    }

    pub fn is_zero(&self) -> bool {
        self.quadratic.iter().chain(&self.cubic).chain(&self.sine).all(|&x| x == 0.0)
    }

    fn coef(v: &[f64], i: usize) -> f64 {
        v.get(i).copied().unwrap_or(0.0)
    }

    pub fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            let t = x[i];
            Self::coef(&self.quadratic, i) * t * t
                + Self::coef(&self.cubic, i) * t * t * t
                + Self::coef(&self.sine, i) * (self.freq * t).sin()
        })
    }

    pub fn derivative(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| {
            let t = x[i];
            2.0 * Self::coef(&self.quadratic, i) * t
                + 3.0 * Self::coef(&self.cubic, i) * t * t
                + Self::coef(&self.sine, i) * self.freq * (self.freq * t).cos()
        })
    }

    /// Bounds of the value and derivative over the box `|x_i| <= r_i`.
    pub fn bounds(&self, r: &[f64]) -> (f64, f64) {
        let mut val: f64 = 0.0;
        let mut der: f64 = 0.0;
        for (i, &ri) in r.iter().enumerate() {
            let (q, c, s) = (Self::coef(&self.quadratic, i), Self::coef(&self.cubic, i), Self::coef(&self.sine, i));
            val = val.max(q.abs() * ri * ri + c.abs() * ri.powi(3) + s.abs().min(s.abs() * self.freq.abs() * ri));
            der = der.max(2.0 * q.abs() * ri + 3.0 * c.abs() * ri * ri + s.abs() * self.freq.abs());
        }
        (val, der)
    }

    /// Hoelder constant of the derivative with exponent one over `|x_i| <= r_i`.
    pub fn derivative_lipschitz(&self, r: &[f64]) -> f64 {
        r.iter()
            .enumerate()
            .map(|(i, &ri)| {
                2.0 * Self::coef(&self.quadratic, i).abs()
                    + 6.0 * Self::coef(&self.cubic, i).abs() * ri
                    + Self::coef(&self.sine, i).abs() * self.freq * self.freq
            })
            .fold(0.0, f64::max)
    }
}

/// `x -> A x + b + p(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedAffine {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub perturbation: Perturbation,
}

impl PerturbedAffine {
    pub fn new(linear: DMatrix<f64>, translation: DVector<f64>, perturbation: Perturbation) -> Self {
        PerturbedAffine { linear, translation, perturbation }
    }

    pub fn from_affine(f: &RealAffine, perturbation: Perturbation) -> Self {
        let linear = f.linear().to_f64();
        let translation = DVector::from_iterator(f.dim(), f.translation().iter().map(|x| x.mid()));
        PerturbedAffine { linear, translation, perturbation }
    }

    pub fn affine(linear: DMatrix<f64>, translation: DVector<f64>) -> Self {
        let d = translation.len();
        PerturbedAffine { linear, translation, perturbation: Perturbation::zero(d) }
    }
}

impl SmoothMap for PerturbedAffine {
    fn dim(&self) -> usize {
        self.translation.len()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.translation + self.perturbation.value(x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        &self.linear + DMatrix::from_diagonal(&self.perturbation.derivative(x))
    }
}

/// `x -> outer(inner(x))` for a list applied last-to-first.
#[derive(Clone)]
pub struct Composition {
    /// Applied from the last element to the first.
    pub maps: Vec<Arc<dyn SmoothMap>>,
    dim: usize,
}

impl Composition {
    pub fn new(maps: Vec<Arc<dyn SmoothMap>>, dim: usize) -> Self {
        Composition { maps, dim }
    }

    /// Value and Jacobian by the chain rule.
    pub fn eval_with_jacobian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let mut y = x.clone();
        let mut j = DMatrix::identity(self.dim, self.dim);
        for f in self.maps.iter().rev() {
            j = f.jacobian(&y) * j;
            y = f.eval(&y);
        }
        (y, j)
    }
}

impl SmoothMap for Composition {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.maps.iter().rev().fold(x.clone(), |y, f| f.eval(&y))
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.eval_with_jacobian(x).1
    }
}

/// `x -> f(x + p) - q`.
pub struct Conjugated {
    pub inner: Arc<dyn SmoothMap>,
    pub pre: DVector<f64>,
    pub post: DVector<f64>,
}

impl SmoothMap for Conjugated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.eval(&(x + &self.pre)) - &self.post
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.jacobian(&(x + &self.pre))
    }
}

/// Attracting fixed point of a contraction by iteration from `start`.
pub fn fixed_point(f: &dyn SmoothMap, start: &DVector<f64>) -> DVector<f64> {
    let mut x = start.clone();
    for _ in 0..10_000 {
        let y = f.eval(&x);
        let done = (&y - &x).amax() < 1e-15 * (1.0 + y.amax());
        x = y;
        if done {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = Perturbation { quadratic: vec![0.1, -0.2], cubic: vec![0.05, 0.0], sine: vec![0.01, 0.02], freq: 3.0 };
        let f = PerturbedAffine::new(DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.1, 0.2]), DVector::from_vec(vec![0.5, 0.1]), p);
        let g = Arc::new(f.clone()) as Arc<dyn SmoothMap>;
        let c = Composition::new(vec![g.clone(), g], 2);
        let x = DVector::from_vec(vec![0.3, -0.4]);
        let j = c.jacobian(&x);
        let h = 1e-6;
        for k in 0..2 {
            let mut e = DVector::zeros(2);
            e[k] = h;
            let fd = (c.eval(&(&x + &e)) - c.eval(&(&x - &e))) / (2.0 * h);
            for i in 0..2 {
                assert!((fd[i] - j[(i, k)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn fixed_point_of_contraction() {
        let f = PerturbedAffine::affine(DMatrix::from_element(1, 1, 0.5), DVector::from_element(1, 1.0));
        let x = fixed_point(&f, &DVector::zeros(1));
        assert!((x[0] - 2.0).abs() < 1e-12);
    }
}

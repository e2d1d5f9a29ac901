//! Invertible affine maps `x -> Ax + v` and their scale/unimodular decomposition.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{Mat, RMat};
use crate::scalar::{CScalar, Entry, Scalar, ScalarError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffineError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("linear part is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("linear part is singular or not certainly invertible")]
    Singular,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap<E> {
    linear: Mat<E>,
    translation: Vec<E>,
}

pub type RealAffine = AffineMap<Scalar>;
pub type ComplexAffine = AffineMap<CScalar>;

impl<E: Entry> AffineMap<E> {
    /// Fails unless the linear part is square, matches the translation and is certainly invertible.
    pub fn new(linear: Mat<E>, translation: Vec<E>) -> Result<Self, AffineError> {
        if !linear.is_square() {
            return Err(AffineError::NotSquare(linear.rows(), linear.cols()));
        }
        if linear.rows() != translation.len() {
            return Err(AffineError::DimensionMismatch(linear.rows(), translation.len()));
        }
        let det = linear.det().map_err(|_| AffineError::Singular)?;
        if !det.certainly_nonzero() {
            return Err(AffineError::Singular);
        }
        Ok(AffineMap { linear, translation })
    }

    pub fn identity(d: usize) -> Self {
        AffineMap { linear: Mat::identity(d), translation: vec![E::zero(); d] }
    }

    pub fn translation_only(v: Vec<E>) -> Self {
        AffineMap { linear: Mat::identity(v.len()), translation: v }
    }

    /// `x -> s x + v`.
    pub fn homothety(s: E, v: Vec<E>) -> Result<Self, AffineError> {
        Self::new(Mat::scalar(v.len(), s), v)
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn linear(&self) -> &Mat<E> {
        &self.linear
    }

    pub fn translation(&self) -> &[E] {
        &self.translation
    }

    pub fn is_exact(&self) -> bool {
        self.linear.is_exact() && self.translation.iter().all(Entry::is_exact)
    }

    pub fn to_float(&self) -> Self {
        AffineMap { linear: self.linear.to_float(), translation: self.translation.iter().map(Entry::to_float).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.linear.is_identity() && self.translation.iter().all(Entry::is_zero)
    }

    pub fn apply(&self, x: &[E]) -> Vec<E> {
        self.linear.mul_vec(x).iter().zip(&self.translation).map(|(a, b)| a.add(b)).collect()
    }

    /// `self ∘ g`.
    pub fn compose(&self, g: &Self) -> Result<Self, AffineError> {
        if self.dim() != g.dim() {
            return Err(AffineError::DimensionMismatch(self.dim(), g.dim()));
        }
        let linear = self.linear.mul(&g.linear);
        let translation = self.apply(&g.translation);
        Ok(AffineMap { linear, translation })
    }

    pub fn invert(&self) -> Result<Self, AffineError> {
        let inv = self.linear.inverse().map_err(|_| AffineError::Singular)?;
        let t = inv.mul_vec(&self.translation).iter().map(Entry::neg).collect();
        Ok(AffineMap { linear: inv, translation: t })
    }

    /// `(v, s, A/s)` with `s` the canonical d-th root of `det A`.
    pub fn decompose(&self) -> Result<DecomposedAffine<E>, AffineError> {
        let d = self.dim();
        let det = self.linear.det()?;
        let s = E::canonical_scale(&det, d)?;
        let inv_s = E::one().checked_div(&s)?;
        Ok(DecomposedAffine { v: self.translation.clone(), s, unimodular: self.linear.scale(&inv_s) })
    }

    /// Largest deviation of coefficient midpoints.
    pub fn max_deviation(&self, o: &Self) -> f64 {
        let t = self
            .translation
            .iter()
            .zip(&o.translation)
            .map(|(a, b)| (a.to_c64() - b.to_c64()).norm())
            .fold(0.0, f64::max);
        t.max(self.linear.max_deviation(&o.linear))
    }
}

impl RealAffine {
    /// `x -> x/r + w` style constructor from exact rationals in dimension one.
    pub fn line(a: Scalar, b: Scalar) -> Result<Self, AffineError> {
        Self::new(Mat::from_rows(vec![vec![a]]), vec![b])
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.linear.row(i).iter().zip(x).map(|(a, b)| a.mid() * b).sum::<f64>() + self.translation[i].mid())
            .collect()
    }
}

impl ComplexAffine {
    /// The same map on R^{2d}, coordinates (re z1, im z1, re z2, ...).
    pub fn realify(&self) -> RealAffine {
        let t = self.translation.iter().flat_map(|z| [z.re.clone(), z.im.clone()]).collect();
        AffineMap { linear: self.linear.realify(), translation: t }
    }
}

impl<E: Entry> fmt::Display for AffineMap<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x -> {} x + (", self.linear)?;
        for (i, t) in self.translation.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

/// `(v, s, Â)` standing for `x -> s Â x + v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposedAffine<E> {
    pub v: Vec<E>,
    pub s: E,
    pub unimodular: Mat<E>,
}

impl<E: Entry> DecomposedAffine<E> {
    pub fn recompose(&self) -> Result<AffineMap<E>, AffineError> {
        AffineMap::new(self.unimodular.scale(&self.s), self.v.clone())
    }

    /// Group law `(v,a,A)(w,b,B) = (aAw + v, ab, AB)`.
    pub fn product(&self, o: &Self) -> Self {
        let aw = self.unimodular.mul_vec(&o.v);
        let v = aw.iter().zip(&self.v).map(|(x, y)| self.s.mul(x).add(y)).collect();
        DecomposedAffine { v, s: self.s.mul(&o.s), unimodular: self.unimodular.mul(&o.unimodular) }
    }

    /// Rewrites `(t, A)` so that `t` is the canonical scale of `t A`.
    fn canonical(v: Vec<E>, t: E, a: Mat<E>) -> Result<Self, AffineError> {
        let d = v.len();
        let det_a = a.det()?;
        let mut td = E::one();
        for _ in 0..d {
            td = td.mul(&t);
        }
        let s = E::canonical_scale(&td.mul(&det_a), d)?;
        let ratio = t.checked_div(&s)?;
        Ok(DecomposedAffine { v, s, unimodular: a.scale(&ratio) })
    }
}

/// Action of the generator `psi` that sends `X` to `psi^{-1} ∘ X`.
pub fn expanding_action<E: Entry>(psi: &AffineMap<E>, x: &DecomposedAffine<E>) -> Result<DecomposedAffine<E>, AffineError> {
    if psi.dim() != x.v.len() {
        return Err(AffineError::DimensionMismatch(psi.dim(), x.v.len()));
    }
    let p = psi.decompose()?;
    let p_inv = psi.linear().inverse().map_err(|_| AffineError::Singular)?;
    let diff: Vec<E> = x.v.iter().zip(psi.translation()).map(|(a, b)| a.sub(b)).collect();
    let v = p_inv.mul_vec(&diff);
    let t = x.s.checked_div(&p.s)?;
    let hat_inv = p.unimodular.inverse().map_err(|_| AffineError::Singular)?;
    DecomposedAffine::canonical(v, t, hat_inv.mul(&x.unimodular))
}

/// Action of the generator `phi` that sends `X` to `X ∘ phi`.
pub fn contracting_action<E: Entry>(phi: &AffineMap<E>, x: &DecomposedAffine<E>) -> Result<DecomposedAffine<E>, AffineError> {
    if phi.dim() != x.v.len() {
        return Err(AffineError::DimensionMismatch(phi.dim(), x.v.len()));
    }
    let p = phi.decompose()?;
    let aw = x.unimodular.mul_vec(phi.translation());
    let v = x.v.iter().zip(&aw).map(|(a, b)| a.add(&x.s.mul(b))).collect();
    DecomposedAffine::canonical(v, x.s.mul(&p.s), x.unimodular.mul(&p.unimodular))
}

/// Diagonal map with given entries and translation, exact.
pub fn diagonal_map(diag: Vec<Scalar>, t: Vec<Scalar>) -> Result<RealAffine, AffineError> {
    AffineMap::new(RMat::diag(diag), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar as S;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> S {
        S::ratio(n, d)
    }

    #[test]
    fn compose_order() {
        let f = RealAffine::line(q(1, 3), S::zero()).unwrap();
        let g = RealAffine::line(q(1, 3), q(2, 3)).unwrap();
        let fg = f.compose(&g).unwrap();
        assert_eq!(fg, RealAffine::line(q(1, 9), q(2, 9)).unwrap());
    }

    #[test]
    fn decompose_examples() {
        let f = RealAffine::line(q(1, 7), q(1, 7)).unwrap();
        let d = f.decompose().unwrap();
        assert_eq!(d.v, vec![q(1, 7)]);
        assert_eq!(d.s, q(1, 7));
        assert!(d.unimodular.is_identity());

        let g = diagonal_map(vec![S::int(2), q(1, 2)], vec![S::zero(), S::zero()]).unwrap();
        let dg = g.decompose().unwrap();
        assert_eq!(dg.s, S::one());
        assert_eq!(dg.unimodular, RMat::diag(vec![S::int(2), q(1, 2)]));
        assert_eq!(dg.recompose().unwrap(), g);
    }

    #[test]
    fn negative_scale_in_odd_dimension() {
        let f = RealAffine::line(S::int(-2), S::zero()).unwrap();
        let d = f.decompose().unwrap();
        assert_eq!(d.s, S::int(-2));
        assert!(d.unimodular.is_identity());
    }

    #[test]
    fn singular_is_rejected() {
        let m = RMat::from_ints(&[&[1, 2], &[2, 4]]);
        assert_eq!(AffineMap::new(m, vec![S::zero(), S::zero()]), Err(AffineError::Singular));
        let f = RealAffine::identity(2);
        let g = RealAffine::identity(3);
        assert!(matches!(f.compose(&g), Err(AffineError::DimensionMismatch(2, 3))));
    }

    #[test]
    fn complex_rotation_realified() {
        let f = ComplexAffine::new(Mat::from_rows(vec![vec![CScalar::i()]]), vec![CScalar::real(S::zero())]).unwrap();
        let r = f.realify();
        assert_eq!(*r.linear(), RMat::from_ints(&[&[0, -1], &[1, 0]]));
        let d = f.decompose().unwrap();
        assert_eq!(d.s, CScalar::i());
    }

    #[test]
    fn complex_decomposition_is_special_linear() {
        let m = Mat::from_rows(vec![
            vec![CScalar::new(S::int(1), S::int(1)), CScalar::real(S::zero())],
            vec![CScalar::real(S::int(2)), CScalar::new(S::zero(), S::int(3))],
        ]);
        let f = ComplexAffine::new(m, vec![CScalar::real(S::zero()); 2]).unwrap();
        let d = f.decompose().unwrap();
        let det = d.unimodular.det().unwrap().to_c64();
        assert!((det - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    fn small() -> impl Strategy<Value = S> {
        (-9i64..=9, 1i64..=5).prop_map(|(n, d)| q(n, d))
    }

    fn nonzero() -> impl Strategy<Value = S> {
        (1i64..=9, 1i64..=5, any::<bool>()).prop_map(|(n, d, neg)| q(if neg { -n } else { n }, d))
    }

    fn map2() -> impl Strategy<Value = RealAffine> {
        // s * U with U a product of shears and an optional reflection, so det is a square
        (nonzero(), -3i64..=3, -3i64..=3, any::<bool>(), small(), small()).prop_map(|(s, k, l, flip, e, f)| {
            let shear = RMat::from_ints(&[&[1, k], &[0, 1]]).mul(&RMat::from_ints(&[&[1, 0], &[l, 1]]));
            let u = if flip { RMat::from_ints(&[&[-1, 0], &[0, 1]]).mul(&shear) } else { shear };
            AffineMap::new(u.scale(&s), vec![e, f]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn group_laws(f in map2(), g in map2(), h in map2()) {
            let left = f.compose(&g).unwrap().compose(&h).unwrap();
            let right = f.compose(&g.compose(&h).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            prop_assert!(f.compose(&f.invert().unwrap()).unwrap().is_identity());
            prop_assert!(f.invert().unwrap().compose(&f).unwrap().is_identity());
        }

        #[test]
        fn decompose_roundtrip(f in map2()) {
            let d = f.decompose().unwrap();
            prop_assert!(d.s.is_exact());
            prop_assert_eq!(d.recompose().unwrap(), f);
        }

        #[test]
        fn group_law_matches_composition(f in map2(), g in map2()) {
            let (a, b) = (f.decompose().unwrap(), g.decompose().unwrap());
            prop_assert_eq!(a.product(&b).recompose().unwrap(), f.compose(&g).unwrap());
        }

        #[test]
        fn actions_match_compositions(psi in map2(), x in map2()) {
            let dx = x.decompose().unwrap();
            let e = expanding_action(&psi, &dx).unwrap();
            let direct = psi.invert().unwrap().compose(&x).unwrap();
            prop_assert_eq!(e.recompose().unwrap(), direct.clone());
            prop_assert_eq!(e, direct.decompose().unwrap());
            let c = contracting_action(&psi, &dx).unwrap();
            let direct = x.compose(&psi).unwrap();
            prop_assert_eq!(c.recompose().unwrap(), direct.clone());
            prop_assert_eq!(c, direct.decompose().unwrap());
        }
    }
}

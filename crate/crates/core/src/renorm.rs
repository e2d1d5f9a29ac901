//! Renormalization operators on relative configurations of two Cantor systems.
//!
//! A relative configuration is `(B, theta, theta')` with `B` affine. The operator
//! attached to a word pair `(a, a')` sends it to
//! `((F^{theta a})^{-1} ∘ B ∘ F^{theta' a'}, theta a, theta' a')`. For affine systems
//! `F^{theta a} = f_a`, so the action only depends on the words.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{contracting_action, expanding_action, AffineError, DecomposedAffine, RealAffine};
use crate::cantor::{AffineCantorSystem, CantorError, PerturbedCantorSystem};
use crate::limit::{base_point, c1_distance, limit_geometry, piece_grid, LimitError, NormalizedGeometry};
use crate::matrix::RMat;
use crate::scalar::Scalar;
use crate::smooth::{Composition, SmoothMap};
use crate::symbolic::{LeftWord, SymbolicError, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenormError {
    #[error("both words of the operator are void")]
    Void,
    #[error("operator word starts with {found}, configuration ends with {expected}")]
    AnchorMismatch { expected: usize, found: usize },
    #[error("generators are not homotheties")]
    NotHomothetic,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("configuration words are not admissible")]
    InadmissibleConfig,
    #[error("system is not bunched (kappa mu^alpha = {0})")]
    NotBunched(f64),
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Limit(#[from] LimitError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpKind {
    Contracting,
    Expanding,
    Mixed,
}

/// `(B, theta, theta')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeAffineConfig {
    pub b: RealAffine,
    pub theta: LeftWord,
    pub theta_p: LeftWord,
}

impl RelativeAffineConfig {
    pub fn new(b: RealAffine, theta: LeftWord, theta_p: LeftWord) -> Self {
        RelativeAffineConfig { b, theta, theta_p }
    }

    pub fn check(&self, k: &AffineCantorSystem, kp: &AffineCantorSystem) -> Result<(), RenormError> {
        if self.b.dim() != k.dim() || kp.dim() != k.dim() {
            return Err(RenormError::DimensionMismatch(self.b.dim(), k.dim()));
        }
        if !self.theta.is_admissible(k.symbolic()) || !self.theta_p.is_admissible(kp.symbolic()) {
            return Err(RenormError::InadmissibleConfig);
        }
        Ok(())
    }
}

/// Word pair `(a, a')`; a word is void when it has no transition, i.e. fewer than two letters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormOp {
    pub a: Word,
    pub a_p: Word,
    pub kind: OpKind,
}

fn is_void(w: &Word) -> bool {
    w.len() < 2
}

impl RenormOp {
    pub fn new(a: Word, a_p: Word) -> Result<Self, RenormError> {
        let kind = match (is_void(&a), is_void(&a_p)) {
            (true, true) => return Err(RenormError::Void),
            (true, false) => OpKind::Contracting,
            (false, true) => OpKind::Expanding,
            (false, false) => OpKind::Mixed,
        };
        let a = if is_void(&a) { Word::new(vec![]) } else { a };
        let a_p = if is_void(&a_p) { Word::new(vec![]) } else { a_p };
        Ok(RenormOp { a, a_p, kind })
    }

    pub fn expanding(a: Word) -> Result<Self, RenormError> {
        Self::new(a, Word::new(vec![]))
    }

    pub fn contracting(a_p: Word) -> Result<Self, RenormError> {
        Self::new(Word::new(vec![]), a_p)
    }

    /// `op1 · op2`: apply `self` first, then `other`.
    pub fn then(&self, other: &RenormOp) -> Result<RenormOp, RenormError> {
        let join = |x: &Word, y: &Word| -> Result<Word, RenormError> {
            if x.is_empty() {
                Ok(y.clone())
            } else if y.is_empty() {
                Ok(x.clone())
            } else {
                Ok(x.join(y)?)
            }
        };
        RenormOp::new(join(&self.a, &other.a)?, join(&self.a_p, &other.a_p)?)
    }

    /// `f_a` (identity when void).
    pub fn map_k(&self, k: &AffineCantorSystem) -> Result<RealAffine, RenormError> {
        if self.a.is_empty() {
            Ok(RealAffine::identity(k.dim()))
        } else {
            Ok(k.word_map(&self.a)?)
        }
    }

    pub fn map_kp(&self, kp: &AffineCantorSystem) -> Result<RealAffine, RenormError> {
        if self.a_p.is_empty() {
            Ok(RealAffine::identity(kp.dim()))
        } else {
            Ok(kp.word_map(&self.a_p)?)
        }
    }

    /// The single map through which the operator acts: `f_a` if expanding, `f'_a'` if contracting.
    pub fn acting_map(&self, k: &AffineCantorSystem, kp: &AffineCantorSystem) -> Result<RealAffine, RenormError> {
        match self.kind {
            OpKind::Expanding => self.map_k(k),
            OpKind::Contracting => self.map_kp(kp),
            OpKind::Mixed => Err(RenormError::Void),
        }
    }
}

/// One operator per admissible pair of each system: contracting ops first, then expanding.
pub fn generators(k: &AffineCantorSystem, kp: &AffineCantorSystem) -> Vec<RenormOp> {
    let mut out = Vec::new();
    for (a, b) in kp.symbolic().pairs() {
        out.push(RenormOp::contracting(Word::new(vec![a, b])).expect("nonvoid"));
    }
    for (a, b) in k.symbolic().pairs() {
        out.push(RenormOp::expanding(Word::new(vec![a, b])).expect("nonvoid"));
    }
    out
}

/// A renormalization operator reduced to its action on `Aff(d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: OpKind,
    pub map: RealAffine,
    /// Operators sharing this action.
    pub ops: Vec<RenormOp>,
}

impl Action {
    pub fn apply(&self, x: &DecomposedAffine<Scalar>) -> Result<DecomposedAffine<Scalar>, RenormError> {
        Ok(match self.kind {
            OpKind::Expanding => expanding_action(&self.map, x)?,
            _ => contracting_action(&self.map, x)?,
        })
    }
}

/// Generators grouped by their action on `Aff(d)`, in first-seen order.
pub fn distinct_actions(k: &AffineCantorSystem, kp: &AffineCantorSystem) -> Result<(Vec<Action>, Vec<Action>), RenormError> {
    let mut contracting: Vec<Action> = Vec::new();
    let mut expanding: Vec<Action> = Vec::new();
    for op in generators(k, kp) {
        let map = op.acting_map(k, kp)?;
        let list = if op.kind == OpKind::Expanding { &mut expanding } else { &mut contracting };
        match list.iter_mut().find(|a| a.map == map) {
            Some(a) => a.ops.push(op),
            None => list.push(Action { kind: op.kind, map, ops: vec![op] }),
        }
    }
    Ok((contracting, expanding))
}

fn check_anchor(theta: &LeftWord, w: &Word) -> Result<(), RenormError> {
    match w.first() {
        Some(a) if a != theta.last() => Err(RenormError::AnchorMismatch { expected: theta.last(), found: a }),
        _ => Ok(()),
    }
}

/// `(f_a^{-1} ∘ B ∘ f'_{a'}, theta a, theta' a')`.
pub fn apply(
    op: &RenormOp,
    c: &RelativeAffineConfig,
    k: &AffineCantorSystem,
    kp: &AffineCantorSystem,
) -> Result<RelativeAffineConfig, RenormError> {
    check_anchor(&c.theta, &op.a)?;
    check_anchor(&c.theta_p, &op.a_p)?;
    let fa = op.map_k(k)?;
    let fap = op.map_kp(kp)?;
    let b = fa.invert()?.compose(&c.b)?.compose(&fap)?;
    Ok(RelativeAffineConfig { b, theta: c.theta.concat(&op.a)?, theta_p: c.theta_p.concat(&op.a_p)? })
}

/// The same action in decomposed coordinates, expanding part first.
pub fn apply_decomposed(
    op: &RenormOp,
    x: &DecomposedAffine<Scalar>,
    k: &AffineCantorSystem,
    kp: &AffineCantorSystem,
) -> Result<DecomposedAffine<Scalar>, RenormError> {
    let mut y = x.clone();
    if !op.a.is_empty() {
        y = expanding_action(&op.map_k(k)?, &y)?;
    }
    if !op.a_p.is_empty() {
        y = contracting_action(&op.map_kp(kp)?, &y)?;
    }
    Ok(y)
}

fn homothety_parts(f: &RealAffine) -> Result<(Scalar, Vec<Scalar>), RenormError> {
    let l = f.linear();
    let lam = l.get(0, 0).clone();
    if l != &RMat::scalar(f.dim(), lam.clone()) {
        return Err(RenormError::NotHomothetic);
    }
    Ok((lam, f.translation().to_vec()))
}

/// For homothetic generators, the action on the scale-first coordinates `(s, t)` of
/// configurations `x -> s x + t` is affine on `R^{1+d}`.
pub fn aff_id_action(op: &RenormOp, k: &AffineCantorSystem, kp: &AffineCantorSystem) -> Result<RealAffine, RenormError> {
    let d = k.dim();
    let n = d + 1;
    let contract = contracting_part(op, kp, d)?;
    if op.a.is_empty() {
        return Ok(contract);
    }
    // psi^{-1} ∘ B: (s, t) -> (s / lam, (t - c) / lam)
    let (lam, c) = homothety_parts(&op.map_k(k)?)?;
    let inv = lam.recip().map_err(AffineError::Scalar)?;
    let expand = RealAffine::new(RMat::scalar(n, inv.clone()), translation_shift(&c, &inv, n))?;
    Ok(contract.compose(&expand)?)
}

fn translation_shift(c: &[Scalar], inv: &Scalar, n: usize) -> Vec<Scalar> {
    let mut shift = vec![Scalar::zero(); n];
    for (i, ci) in c.iter().enumerate() {
        shift[i + 1] = -(ci * inv);
    }
    shift
}

fn contracting_part(op: &RenormOp, kp: &AffineCantorSystem, d: usize) -> Result<RealAffine, RenormError> {
    let n = d + 1;
    if op.a_p.is_empty() {
        return Ok(RealAffine::identity(n));
    }
    // B ∘ phi: (s, t) -> (lam s, t + s c)
    let (lam, c) = homothety_parts(&op.map_kp(kp)?)?;
    let mut m = RMat::identity(n);
    m.set(0, 0, lam);
    for i in 0..d {
        m.set(i + 1, 0, c[i].clone());
    }
    Ok(RealAffine::new(m, vec![Scalar::zero(); n])?)
}

/// Affine map `F^{theta a}` estimated at depth `m`.
#[derive(Clone, Debug)]
pub struct FLimit {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub error_bound: f64,
    /// `f_a` itself when the system is affine.
    pub exact: Option<RealAffine>,
}

impl FLimit {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.linear * x + &self.translation
    }
}

fn normalizer(g: &NormalizedGeometry) -> (DMatrix<f64>, DVector<f64>) {
    // A(x) = F(c) + L (x - c), so that k = A^{-1} ∘ F
    let l = g.linear_part();
    let c = g.base().clone();
    let fc = g.base_image().clone();
    let t = fc - &l * &c;
    (l, t)
}

/// `A_{theta_m}^{-1} ∘ A_{(theta a)_{m+n}}` with an error bound `C (kappa mu^alpha)^m`.
pub fn f_limit(sys: &PerturbedCantorSystem, theta: &LeftWord, a: &Word, m: usize) -> Result<FLimit, RenormError> {
    check_anchor(theta, a)?;
    if sys.is_affine() {
        let f = sys.base().word_map(a)?;
        let f64f = f.to_float();
        return Ok(FLimit {
            linear: f64f.linear().to_f64(),
            translation: DVector::from_iterator(f.dim(), f.translation().iter().map(|x| x.mid())),
            error_bound: 0.0,
            exact: Some(f),
        });
    }
    let rate = sys.kappa() * sys.mu().powf(sys.alpha());
    if rate >= 1.0 {
        return Err(RenormError::NotBunched(rate));
    }
    let theta_a = theta.concat(a)?;
    let g1 = limit_geometry(sys, theta, m, None)?;
    let g2 = limit_geometry(sys, &theta_a, m + a.len() - 1, None)?;
    let (l1, t1) = normalizer(&g1.geometry);
    let (l2, t2) = normalizer(&g2.geometry);
    let l1_inv = l1.try_inverse().ok_or(LimitError::Singular)?;
    let linear = &l1_inv * l2;
    let translation = &l1_inv * (t2 - t1);
    Ok(FLimit { linear, translation, error_bound: g1.error_bound + g2.error_bound, exact: None })
}

fn op2(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    /// `|DF^{theta a}| / |Df_a|`.
    pub norm_ratio: f64,
    /// `|(DF^{theta a})^{-1}| / |Df_a^{-1}|`.
    pub inverse_ratio: f64,
    /// `|DF^{theta a}| diam G(a_n) / diam G(a)`.
    pub diam_ratio: f64,
}

fn image_diameter(maps: &[std::sync::Arc<dyn SmoothMap>], dim: usize, pts: &[DVector<f64>]) -> f64 {
    let comp = Composition::new(maps.to_vec(), dim);
    let imgs: Vec<DVector<f64>> = pts.iter().map(|p| comp.eval(p)).collect();
    let mut d: f64 = 0.0;
    for i in 0..imgs.len() {
        for j in i + 1..imgs.len() {
            d = d.max((&imgs[i] - &imgs[j]).norm());
        }
    }
    d
}

/// Compares `DF^{theta a}` with `Df_a` at `c(a_n)` and with the cylinder diameter.
pub fn comparability_check(sys: &PerturbedCantorSystem, theta: &LeftWord, a: &Word, m: usize) -> Result<Comparability, RenormError> {
    let f = f_limit(sys, theta, a, m)?;
    let last = a.last().ok_or(RenormError::Void)?;
    let dim = sys.base().dim();
    let maps = sys.word_maps(a.letters());
    let c = base_point(sys, last)?;
    let df = Composition::new(maps.clone(), dim).jacobian(&c);
    let df_inv = df.clone().try_inverse().ok_or(LimitError::Singular)?;
    let lf_inv = f.linear.clone().try_inverse().ok_or(LimitError::Singular)?;
    let pts = piece_grid(sys, last, if dim == 1 { 9 } else { 4 });
    let diam_piece = image_diameter(&[], dim, &pts);
    let diam_cyl = image_diameter(&maps, dim, &pts);
    Ok(Comparability {
        norm_ratio: op2(&f.linear) / op2(&df),
        inverse_ratio: op2(&lf_inv) / op2(&df_inv),
        diam_ratio: op2(&f.linear) * diam_piece / diam_cyl,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorPoint {
    pub word_len: usize,
    /// C^1 distance of the normalized `h ∘ f_a` from `k^{theta a}` on the piece.
    pub lhs: f64,
    /// `(kappa mu^alpha)^n`.
    pub rate_power: f64,
}

/// Renormalizes the configuration `h` along `a` and compares with the limit geometry `k^{theta a}`.
pub fn attractor_check(
    sys: &PerturbedCantorSystem,
    h: std::sync::Arc<dyn SmoothMap>,
    theta: &LeftWord,
    a: &Word,
    depth: usize,
) -> Result<AttractorPoint, RenormError> {
    check_anchor(theta, a)?;
    let last = a.last().ok_or(RenormError::Void)?;
    let dim = sys.base().dim();
    let base = base_point(sys, last)?;
    let mut maps = vec![h];
    maps.extend(sys.word_maps(a.letters()));
    let renorm = NormalizedGeometry::new(Composition::new(maps, dim), base.clone())?;
    let theta_a = theta.concat(a)?;
    let k = limit_geometry(sys, &theta_a, depth.max(a.len()), Some(base))?;
    let grid = piece_grid(sys, last, if dim == 1 { 17 } else { 5 });
    let n = a.len().saturating_sub(1);
    Ok(AttractorPoint { word_len: n, lhs: c1_distance(&renorm, &k.geometry, &grid), rate_power: k.rate.powi(n as i32) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::ConvexCell;
    use crate::scalar::Scalar as S;

    fn line(a: S, b: S) -> RealAffine {
        RealAffine::line(a, b).unwrap()
    }

    fn k1(n: i64) -> AffineCantorSystem {
        // six maps x/N + k/N on [0, 1]
        let maps = (0..6).map(|k| line(S::ratio(1, n), S::ratio(k, n))).collect();
        AffineCantorSystem::from_ifs(maps, ConvexCell::interval(S::zero(), S::one()).unwrap()).unwrap()
    }

    fn k1p() -> AffineCantorSystem {
        let maps = vec![line(S::ratio(1, 2), S::zero()), line(S::ratio(1, 2), S::ratio(1, 2))];
        AffineCantorSystem::from_ifs(maps, ConvexCell::interval(S::zero(), S::one()).unwrap()).unwrap()
    }

    fn cfg(s: S, t: S) -> RelativeAffineConfig {
        RelativeAffineConfig::new(line(s, t), LeftWord::constant(0), LeftWord::constant(0))
    }

    #[test]
    fn generator_counts() {
        let (k, kp) = (k1(7), k1p());
        let g = generators(&k, &kp);
        assert_eq!(g.len(), 36 + 4);
        let (c, e) = distinct_actions(&k, &kp).unwrap();
        assert_eq!((c.len(), e.len()), (2, 6));
    }

    #[test]
    fn contracting_and_expanding_examples() {
        let (k, kp) = (k1(7), k1p());
        let op = RenormOp::contracting(Word::new(vec![0, 0])).unwrap();
        let r = apply(&op, &cfg(S::one(), S::zero()), &k, &kp).unwrap();
        assert_eq!(r.b, line(S::ratio(1, 2), S::zero()));
        let op = RenormOp::expanding(Word::new(vec![0, 0])).unwrap();
        let r = apply(&op, &cfg(S::one(), S::zero()), &k, &kp).unwrap();
        assert_eq!(r.b, line(S::int(7), S::zero()));
        assert_eq!(RenormOp::new(Word::new(vec![]), Word::new(vec![1])), Err(RenormError::Void));
    }

    #[test]
    fn anchor_checked() {
        let (k, kp) = (k1(7), k1p());
        let op = RenormOp::expanding(Word::new(vec![2, 0])).unwrap();
        assert!(matches!(apply(&op, &cfg(S::one(), S::zero()), &k, &kp), Err(RenormError::AnchorMismatch { .. })));
    }

    #[test]
    fn cocycle_and_coordinates() {
        let (k, kp) = (k1(7), k1p());
        let c = RelativeAffineConfig::new(line(S::ratio(3, 2), S::ratio(-1, 5)), LeftWord::constant(1), LeftWord::constant(0));
        let op1 = RenormOp::new(Word::new(vec![1, 3]), Word::new(vec![0, 1])).unwrap();
        let op2 = RenormOp::new(Word::new(vec![3, 5]), Word::new(vec![])).unwrap();
        let two = apply(&op2, &apply(&op1, &c, &k, &kp).unwrap(), &k, &kp).unwrap();
        let one = apply(&op1.then(&op2).unwrap(), &c, &k, &kp).unwrap();
        assert_eq!(two, one);
        let dec = apply_decomposed(&op1, &c.b.decompose().unwrap(), &k, &kp).unwrap();
        assert_eq!(dec.recompose().unwrap(), apply(&op1, &c, &k, &kp).unwrap().b);
        let aff = aff_id_action(&op1, &k, &kp).unwrap();
        let st = aff.apply(&[S::ratio(3, 2), S::ratio(-1, 5)]);
        assert_eq!(st, vec![dec.s.clone(), dec.v[0].clone()]);
    }
}

//! Normalized compositions of contractions and their limit geometries.
//!
//! A sequence `h_1, h_2, ...` of contractions fixing the origin gives compositions
//! `F_n = h_n ∘ ... ∘ h_1`. Renormalizing by the derivative at a base point,
//! `x -> DF_n(c)^{-1} (F_n(x) - F_n(c)) + c`, these converge in C^1 under a bunching
//! condition. Along a left-infinite word the same construction yields the limit
//! geometry of a perturbed Cantor system.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, RealAffine};
use crate::cantor::{linear_fit, AffineCantorSystem, CantorError, PerturbedCantorSystem};
use crate::scalar::Scalar;
use crate::symbolic::Word;
use crate::smooth::{fixed_point, Composition, SmoothMap};
use crate::symbolic::{LeftWord, SymbolicError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("map {0} does not fix the origin (|h(0)| = {1})")]
    NotFixingOrigin(usize, f64),
    #[error("map {0} is not a contraction on the ball (norm {1})")]
    NotContracting(usize, f64),
    #[error("derivative is singular")]
    Singular,
    #[error("sequence has {have} maps, {need} requested")]
    TooShort { have: usize, need: usize },
    #[error("left word does not determine {0} letters")]
    ShortWord(usize),
    #[error("word is not admissible")]
    Inadmissible,
    #[error("no cycle through letter {0}")]
    NoCycle(usize),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Constants of the standing hypotheses measured on a sample of the ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    pub rho: f64,
    pub alpha: f64,
    pub mu: f64,
    pub mu_prime: f64,
    /// Largest `|Dh(0)| |Dh(0)^{-1}|`.
    pub kappa: f64,
    /// Hoelder constant of the derivatives.
    pub c: f64,
}

impl Hypotheses {
    pub fn bunching(&self) -> f64 {
        self.kappa * self.mu.powf(self.alpha)
    }

    pub fn is_bunched(&self) -> bool {
        self.bunching() < 1.0
    }
}

/// Grid points of the cube `[-r, r]^d` that lie in the Euclidean ball of radius `r`, plus the centre.
pub fn ball_grid(d: usize, r: f64, per_axis: usize) -> Vec<DVector<f64>> {
    let k = per_axis.max(2);
    let mut out = vec![DVector::zeros(d)];
    let total = k.pow(d as u32);
    for idx in 0..total {
        let mut x = DVector::zeros(d);
        let mut t = idx;
        for i in 0..d {
            x[i] = -r + 2.0 * r * (t % k) as f64 / (k - 1) as f64;
            t /= k;
        }
        if x.norm() <= r * (1.0 + 1e-12) {
            out.push(x);
        }
    }
    out
}

fn op2(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

fn co2(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().min()
}

#[derive(Clone)]
pub struct ContractionSequence {
    maps: Vec<Arc<dyn SmoothMap>>,
    dim: usize,
    hyp: Hypotheses,
}

impl ContractionSequence {
    /// Checks that every map fixes the origin and contracts on the ball of radius `rho`.
    pub fn new(maps: Vec<Arc<dyn SmoothMap>>, rho: f64, alpha: f64, c: f64) -> Result<Self, LimitError> {
        let dim = maps.first().map_or(1, |m| m.dim());
        let grid = ball_grid(dim, rho, if dim == 1 { 41 } else { 9 });
        let origin = DVector::zeros(dim);
        let mut mu: f64 = 0.0;
        let mut mu_prime = f64::INFINITY;
        let mut kappa: f64 = 1.0;
        for (i, h) in maps.iter().enumerate() {
            let h0 = h.eval(&origin).amax();
            if h0 > 1e-12 {
                return Err(LimitError::NotFixingOrigin(i, h0));
            }
            for x in &grid {
                let j = h.jacobian(x);
                mu = mu.max(op2(&j));
                mu_prime = mu_prime.min(co2(&j));
            }
            if mu >= 1.0 {
                return Err(LimitError::NotContracting(i, mu));
            }
            let j0 = h.jacobian(&origin);
            let m = co2(&j0);
            if m <= 0.0 {
                return Err(LimitError::Singular);
            }
            kappa = kappa.max(op2(&j0) / m);
        }
        Ok(ContractionSequence { maps, dim, hyp: Hypotheses { rho, alpha, mu, mu_prime, kappa, c } })
    }

    pub fn hypotheses(&self) -> &Hypotheses {
        &self.hyp
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `F_n = h_n ∘ ... ∘ h_1`.
    pub fn composition(&self, n: usize) -> Result<Composition, LimitError> {
        if n > self.maps.len() {
            return Err(LimitError::TooShort { have: self.maps.len(), need: n });
        }
        Ok(Composition::new(self.maps[..n].iter().rev().cloned().collect(), self.dim))
    }
}

/// `x -> L^{-1}(F(x) - F(c)) + c` with `L = DF(c)`.
#[derive(Clone)]
pub struct NormalizedGeometry {
    comp: Composition,
    base: DVector<f64>,
    base_image: DVector<f64>,
    inv_lin: DMatrix<f64>,
}

impl NormalizedGeometry {
    pub fn new(comp: Composition, base: DVector<f64>) -> Result<Self, LimitError> {
        let (fc, l) = comp.eval_with_jacobian(&base);
        let inv_lin = l.try_inverse().ok_or(LimitError::Singular)?;
        Ok(NormalizedGeometry { comp, base, base_image: fc, inv_lin })
    }

    pub fn base(&self) -> &DVector<f64> {
        &self.base
    }

    /// `F(c)`.
    pub fn base_image(&self) -> &DVector<f64> {
        &self.base_image
    }

    /// The normalizing linear map `DF(c)`.
    pub fn linear_part(&self) -> DMatrix<f64> {
        self.inv_lin.clone().try_inverse().expect("invertible")
    }

    pub fn eval_with_jacobian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (y, j) = self.comp.eval_with_jacobian(x);
        (&self.inv_lin * (y - &self.base_image) + &self.base, &self.inv_lin * j)
    }
}

impl SmoothMap for NormalizedGeometry {
    fn dim(&self) -> usize {
        self.base.len()
    }

    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        self.eval_with_jacobian(x).0
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.eval_with_jacobian(x).1
    }
}

/// Sampled C^1 distance: sup of value difference plus sup of derivative difference.
pub fn c1_distance(a: &dyn SmoothMap, b: &dyn SmoothMap, grid: &[DVector<f64>]) -> f64 {
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for x in grid {
        c0 = c0.max((a.eval(x) - b.eval(x)).amax());
        c1 = c1.max(op2(&(a.jacobian(x) - b.jacobian(x))));
    }
    c0 + c1
}

/// Distance of a map from the identity on the grid in the same norm.
pub fn c1_distance_to_identity(a: &dyn SmoothMap, grid: &[DVector<f64>]) -> f64 {
    let d = a.dim();
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for x in grid {
        c0 = c0.max((a.eval(x) - x).amax());
        c1 = c1.max(op2(&(a.jacobian(x) - DMatrix::identity(d, d))));
    }
    c0 + c1
}

pub fn normalized_composition(seq: &ContractionSequence, n: usize) -> Result<NormalizedGeometry, LimitError> {
    NormalizedGeometry::new(seq.composition(n)?, DVector::zeros(seq.dim()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `(n, |F^_{n+1} - F^_n|_{C^1})`.
    pub tail_norms: Vec<(usize, f64)>,
    /// Fitted geometric rate of the tail norms.
    pub rate: f64,
    pub constant: f64,
    /// Relative residual of the exponential fit.
    pub residual: f64,
    pub bunched: bool,
    pub convergent: bool,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,tail_norm\n");
        for (n, t) in &self.tail_norms {
            s.push_str(&format!("{n},{t:e}\n"));
        }
        s
    }
}

const NOISE_FLOOR: f64 = 1e-13;
const MAX_RESIDUAL: f64 = 0.2;

fn fit_tails(tails: Vec<(usize, f64)>, bunched: bool) -> ConvergenceReport {
    let skip = tails.len() / 4;
    // once rounding dominates the tails stop decreasing; fit only up to that point
    let floor = (skip + 1..tails.len()).find(|&k| tails[k].1 >= tails[k - 1].1 && tails[k].1 < 1e-6).unwrap_or(tails.len());
    let usable: Vec<(f64, f64)> = tails[..floor]
        .iter()
        .skip(skip)
        .filter(|(_, t)| *t > NOISE_FLOOR && t.is_finite())
        .map(|&(n, t)| (n as f64, t.ln()))
        .collect();
    if usable.len() < 3 {
        let diverged = tails.iter().any(|(_, t)| !t.is_finite() || *t > 1e6);
        return ConvergenceReport {
            rate: if diverged { f64::INFINITY } else { 0.0 },
            constant: tails.first().map_or(0.0, |t| t.1),
            residual: 0.0,
            bunched,
            convergent: !diverged,
            tail_norms: tails,
        };
    }
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let (slope, intercept, rms) = linear_fit(&xs, &ys);
    let rate = slope.exp();
    let residual = rms.exp() - 1.0;
    ConvergenceReport {
        rate,
        constant: intercept.exp(),
        residual,
        bunched,
        convergent: rate < 1.0 && residual < MAX_RESIDUAL,
        tail_norms: tails,
    }
}

/// Tail norms of the normalized compositions up to `n_max`, with a geometric fit.
pub fn convergence_report(seq: &ContractionSequence, n_max: usize) -> Result<ConvergenceReport, LimitError> {
    let grid = ball_grid(seq.dim(), seq.hypotheses().rho, if seq.dim() == 1 { 21 } else { 7 });
    let mut prev = normalized_composition(seq, 1)?;
    let mut tails = Vec::new();
    for n in 1..n_max.min(seq.len()) {
        let next = normalized_composition(seq, n + 1)?;
        tails.push((n, c1_distance(&prev, &next, &grid)));
        prev = next;
    }
    Ok(fit_tails(tails, seq.hypotheses().is_bunched()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    /// Per `n`, the largest inner and smallest outer ball factors.
    pub factors: Vec<(f64, f64)>,
    pub eta1: f64,
    pub eta2: f64,
}

impl ShapeReport {
    pub fn holds_within(&self, lo: f64, hi: f64) -> bool {
        self.eta1 >= lo && self.eta2 <= hi && self.eta1 <= 1.0 && self.eta2 >= 1.0
    }
}

/// Ball factors `eta1 <= |L_n^{-1} F_n(x)| / xi <= eta2` over the sphere of radius `xi`.
pub fn control_of_shape(seq: &ContractionSequence, xi: f64, n_max: usize) -> Result<ShapeReport, LimitError> {
    let d = seq.dim();
    let rho = xi;
    let sphere: Vec<DVector<f64>> = if d == 1 {
        vec![DVector::from_element(1, rho), DVector::from_element(1, -rho)]
    } else {
        ball_grid(d, 1.0, 9).into_iter().filter(|x| x.norm() > 1e-9).map(|x| x.normalize() * rho).collect()
    };
    let mut factors = Vec::new();
    for n in 1..=n_max.min(seq.len()) {
        let g = normalized_composition(seq, n)?;
        let radii: Vec<f64> = sphere.iter().map(|x| g.eval(x).norm() / rho).collect();
        let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = radii.iter().copied().fold(0.0, f64::max);
        factors.push((lo, hi));
    }
    let eta1 = factors.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
    let eta2 = factors.iter().map(|f| f.1).fold(0.0, f64::max);
    Ok(ShapeReport { factors, eta1, eta2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// `|Df^n(x)| / |Df^n(y)|`.
    pub op_ratio: f64,
    /// Ratio of the smallest singular values.
    pub co_ratio: f64,
    pub det_ratio: f64,
    pub distance: f64,
}

impl DistortionReport {
    /// Largest deviation of the three ratios from one.
    pub fn deviation(&self) -> f64 {
        [self.op_ratio, self.co_ratio, self.det_ratio].iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub fn spread(&self) -> f64 {
        [self.op_ratio, self.co_ratio, self.det_ratio].iter().map(|&r| r.max(1.0 / r)).fold(1.0, f64::max)
    }
}

pub fn distortion_check(seq: &ContractionSequence, x: &DVector<f64>, y: &DVector<f64>, n: usize) -> Result<DistortionReport, LimitError> {
    let f = seq.composition(n)?;
    if x == y {
        return Ok(DistortionReport { op_ratio: 1.0, co_ratio: 1.0, det_ratio: 1.0, distance: 0.0 });
    }
    let jx = f.jacobian(x);
    let jy = f.jacobian(y);
    let det_y = jy.determinant();
    if det_y == 0.0 {
        return Err(LimitError::Singular);
    }
    Ok(DistortionReport {
        op_ratio: op2(&jx) / op2(&jy),
        co_ratio: co2(&jx) / co2(&jy),
        det_ratio: jx.determinant() / det_y,
        distance: (x - y).norm(),
    })
}

/// Known constants of a map `phi`: Hoelder exponent and constant of `D phi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderData {
    pub alpha: f64,
    pub c_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineEstimate {
    /// Sampled C^{1+alpha} size of `B^{-1} A^{-1} phi B - Id` on `B^{-1}(X)`.
    pub lhs: f64,
    /// `C' |DB^{-1}| |DB| diam(X)^alpha`.
    pub rhs: f64,
}

/// Compares `phi` with its affine approximation `A` at `p` after conjugating by the affine map `B`.
///
/// `x_lo, x_hi` bound the box `X`; the constant is
/// `C' = |Dphi(p)^{-1}| c_phi (1 + diam X / |B| + (|B| / diam X)^alpha)`.
pub fn affine_estimate_error(
    phi: &dyn SmoothMap,
    holder: HolderData,
    b_lin: &DMatrix<f64>,
    b_shift: &DVector<f64>,
    x_lo: &DVector<f64>,
    x_hi: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<AffineEstimate, LimitError> {
    let d = phi.dim();
    let b_inv = b_lin.clone().try_inverse().ok_or(LimitError::Singular)?;
    let dphi_p = phi.jacobian(p);
    let dphi_p_inv = dphi_p.clone().try_inverse().ok_or(LimitError::Singular)?;
    let phi_p = phi.eval(p);
    let per_axis: usize = if d == 1 { 41 } else { 9 };
    let mut pts = Vec::new();
    for idx in 0..per_axis.pow(d as u32) {
        let mut x = DVector::zeros(d);
        let mut t = idx;
        for i in 0..d {
            x[i] = x_lo[i] + (x_hi[i] - x_lo[i]) * (t % per_axis) as f64 / (per_axis - 1) as f64;
            t /= per_axis;
        }
        // sample in B^{-1}(X)
        pts.push(&b_inv * (x - b_shift));
    }
    let f = |u: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let y = b_lin * u + b_shift;
        let v = &dphi_p_inv * (phi.eval(&y) - &phi_p) + p;
        let val = &b_inv * (v - b_shift);
        let jac = &b_inv * &dphi_p_inv * phi.jacobian(&y) * b_lin;
        (val, jac)
    };
    let evals: Vec<(DVector<f64>, DMatrix<f64>)> = pts.iter().map(f).collect();
    let id = DMatrix::<f64>::identity(d, d);
    let c0 = pts.iter().zip(&evals).map(|(u, (v, _))| (v - u).norm()).fold(0.0, f64::max);
    let c1 = evals.iter().map(|(_, j)| op2(&(j - &id))).fold(0.0, f64::max);
    let mut holder_semi: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dist = (&pts[i] - &pts[j]).norm();
            if dist > 0.0 {
                holder_semi = holder_semi.max(op2(&(&evals[i].1 - &evals[j].1)) / dist.powf(holder.alpha));
            }
        }
    }
    let lhs = c0 + c1 + holder_semi;
    let diam = (x_hi - x_lo).norm();
    let nb = op2(b_lin);
    let c_prime = op2(&dphi_p_inv) * holder.c_phi * (1.0 + diam / nb + (nb / diam).powf(holder.alpha));
    let rhs = c_prime * op2(&b_inv) * nb * diam.powf(holder.alpha);
    Ok(AffineEstimate { lhs, rhs })
}

/// Base point `c(a)`: fixed point of the lexicographically first shortest cycle through `a`.
pub fn base_point(sys: &PerturbedCantorSystem, a: usize) -> Result<DVector<f64>, LimitError> {
    let t = sys.base().symbolic();
    let m = t.letters();
    // breadth-first search over paths from a back to a
    let mut frontier: Vec<Vec<usize>> = vec![vec![a]];
    for _ in 0..m {
        let mut next = Vec::new();
        for w in &frontier {
            let last = *w.last().unwrap();
            for b in 0..m {
                if t.admissible(last, b) {
                    let mut x = w.clone();
                    x.push(b);
                    if b == a {
                        let comp = Composition::new(sys.word_maps(&x), sys.base().dim());
                        let start = DVector::from_iterator(sys.base().dim(), sys.base().piece(a).centroid().iter().map(|s| s.mid()));
                        return Ok(fixed_point(&comp, &start));
                    }
                    next.push(x);
                }
            }
        }
        frontier = next;
    }
    Err(LimitError::NoCycle(a))
}

fn theta_geometry(sys: &PerturbedCantorSystem, theta: &LeftWord, n: usize, base: &DVector<f64>) -> Result<NormalizedGeometry, LimitError> {
    let w = theta.truncation(n).ok_or(LimitError::ShortWord(n + 1))?;
    if !sys.base().symbolic().is_admissible_word(&w) {
        return Err(LimitError::Inadmissible);
    }
    NormalizedGeometry::new(Composition::new(sys.word_maps(&w), sys.base().dim()), base.clone())
}

/// Sample points of a piece (its bounding box, filtered to the piece).
pub fn piece_grid(sys: &PerturbedCantorSystem, a: usize, per_axis: usize) -> Vec<DVector<f64>> {
    let cell = &sys.pieces()[a];
    let (lo, hi) = cell.bbox_f64();
    let d = lo.len();
    let k = per_axis.max(2);
    let mut out = Vec::new();
    for idx in 0..k.pow(d as u32) {
        let mut x = DVector::zeros(d);
        let mut t = idx;
        for i in 0..d {
            x[i] = lo[i] + (hi[i] - lo[i]) * (t % k) as f64 / (k - 1) as f64;
            t /= k;
        }
        if cell.point_margin_f64(x.as_slice()) >= -1e-12 {
            out.push(x);
        }
    }
    out
}

#[derive(Clone)]
pub struct LimitGeometry {
    pub geometry: NormalizedGeometry,
    /// Bound on the C^1 distance to the limit, `C (kappa mu^alpha)^n / (1 - kappa mu^alpha)`.
    pub error_bound: f64,
    pub rate: f64,
    pub constant: f64,
}

/// `k^theta_n` normalized at `base` (default: `c(theta_0)`), with an a-posteriori error bound.
pub fn limit_geometry(
    sys: &PerturbedCantorSystem,
    theta: &LeftWord,
    n: usize,
    base: Option<DVector<f64>>,
) -> Result<LimitGeometry, LimitError> {
    let a = theta.last();
    let base = match base {
        Some(b) => b,
        None => base_point(sys, a)?,
    };
    let geometry = theta_geometry(sys, theta, n, &base)?;
    let rate = sys.kappa() * sys.mu().powf(sys.alpha());
    if sys.is_affine() {
        return Ok(LimitGeometry { geometry, error_bound: 0.0, rate, constant: 0.0 });
    }
    let grid = piece_grid(sys, a, if sys.base().dim() == 1 { 17 } else { 5 });
    let m0 = theta.known_len().map_or(8, |l| l.saturating_sub(1)).clamp(1, 8);
    let mut constant: f64 = 0.0;
    let mut prev = theta_geometry(sys, theta, 1, &base)?;
    for m in 1..m0 {
        let next = theta_geometry(sys, theta, m + 1, &base)?;
        constant = constant.max(c1_distance(&prev, &next, &grid) / rate.powi(m as i32));
        prev = next;
    }
    let error_bound = if rate < 1.0 { constant * rate.powi(n as i32) / (1.0 - rate) } else { f64::INFINITY };
    Ok(LimitGeometry { geometry, error_bound, rate, constant })
}

/// Tail norms of `k^theta_n` in `n` with a geometric fit.
pub fn limit_convergence(sys: &PerturbedCantorSystem, theta: &LeftWord, n_max: usize) -> Result<ConvergenceReport, LimitError> {
    let a = theta.last();
    let base = base_point(sys, a)?;
    let grid = piece_grid(sys, a, if sys.base().dim() == 1 { 17 } else { 5 });
    let mut prev = theta_geometry(sys, theta, 1, &base)?;
    let mut tails = Vec::new();
    for n in 1..n_max {
        let next = theta_geometry(sys, theta, n + 1, &base)?;
        tails.push((n, c1_distance(&prev, &next, &grid)));
        prev = next;
    }
    let bunched = sys.kappa() * sys.mu().powf(sys.alpha()) < 1.0;
    Ok(fit_tails(tails, bunched))
}

/// `k^theta_n` of an affine system in the arithmetic of its generators, normalized at `base`.
///
/// With `f = f_{theta_n}` and `A(x) = f(c) + Df (x - c)` this is `A^{-1} ∘ f`, the identity
/// whenever the computation is exact.
pub fn affine_limit_geometry(sys: &AffineCantorSystem, theta: &LeftWord, n: usize, base: &[Scalar]) -> Result<RealAffine, LimitError> {
    let w = theta.truncation(n).ok_or(LimitError::ShortWord(n + 1))?;
    let f = sys.word_map(&Word::new(w))?;
    let fc = f.apply(base);
    let lc = f.linear().mul_vec(base);
    let t: Vec<Scalar> = fc.iter().zip(&lc).map(|(a, b)| a - b).collect();
    let a = RealAffine::new(f.linear().clone(), t)?;
    Ok(a.invert()?.compose(&f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::{Perturbation, PerturbedAffine};

    fn seq(lin: &[f64], pert: Perturbation, n: usize) -> ContractionSequence {
        let d = lin.len();
        let m = PerturbedAffine::new(DMatrix::from_diagonal(&DVector::from_row_slice(lin)), DVector::zeros(d), pert);
        let maps: Vec<Arc<dyn SmoothMap>> = (0..n).map(|_| Arc::new(m.clone()) as Arc<dyn SmoothMap>).collect();
        ContractionSequence::new(maps, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn affine_sequence_is_identity() {
        let s = seq(&[0.5], Perturbation::zero(1), 10);
        let g = normalized_composition(&s, 10).unwrap();
        let grid = ball_grid(1, 0.5, 11);
        assert!(c1_distance_to_identity(&g, &grid) < 1e-12);
        let r = convergence_report(&s, 10).unwrap();
        assert!(r.convergent);
    }

    #[test]
    fn quadratic_sequence_converges() {
        let s = seq(&[0.5], Perturbation::quadratic(vec![0.25]), 30);
        let r = convergence_report(&s, 30).unwrap();
        assert!(r.convergent, "{r:?}");
        assert!(r.rate < 0.55);
        let g = normalized_composition(&s, 1).unwrap();
        assert!((g.eval(&DVector::from_element(1, 0.1))[0] - 0.105).abs() < 1e-12);
    }

    #[test]
    fn unbunched_sequence_diverges() {
        let p = Perturbation { quadratic: vec![0.2, 0.2], ..Perturbation::zero(2) };
        let d = 2;
        let lin = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0 / 32.0]);
        // couple the coordinates so that the weak direction feeds the strong one
        let m = CoupledQuadratic { lin, q: 0.2 };
        let _ = p;
        let maps: Vec<Arc<dyn SmoothMap>> = (0..20).map(|_| Arc::new(m.clone()) as Arc<dyn SmoothMap>).collect();
        let s = ContractionSequence::new(maps, 0.5, 1.0, 1.0).unwrap();
        assert!(!s.hypotheses().is_bunched());
        let r = convergence_report(&s, 12).unwrap();
        assert!(!r.convergent || r.rate >= 1.0, "{r:?}");
        assert_eq!(d, 2);
    }

    #[derive(Clone)]
    struct CoupledQuadratic {
        lin: DMatrix<f64>,
        q: f64,
    }

    impl SmoothMap for CoupledQuadratic {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
            let mut y = &self.lin * x;
            y[1] += self.q * x[0] * x[0];
            y
        }
        fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
            let mut j = self.lin.clone();
            j[(1, 0)] += 2.0 * self.q * x[0];
            j
        }
    }

    #[test]
    fn nonfixing_map_rejected() {
        let m = PerturbedAffine::affine(DMatrix::from_element(1, 1, 0.5), DVector::from_element(1, 0.1));
        let r = ContractionSequence::new(vec![Arc::new(m)], 0.5, 1.0, 1.0);
        assert!(matches!(r, Err(LimitError::NotFixingOrigin(0, _))));
    }

    #[test]
    fn affine_estimate_example() {
        let phi = PerturbedAffine::new(DMatrix::identity(1, 1), DVector::zeros(1), Perturbation::quadratic(vec![0.1]));
        let hd = HolderData { alpha: 1.0, c_phi: 0.2 };
        let run = |diam: f64| {
            let b = DMatrix::from_element(1, 1, diam / 2.0);
            affine_estimate_error(
                &phi,
                hd,
                &b,
                &DVector::zeros(1),
                &DVector::zeros(1),
                &DVector::from_element(1, diam),
                &DVector::zeros(1),
            )
            .unwrap()
        };
        let big = run(0.25);
        assert!(big.lhs <= big.rhs, "{big:?}");
        let small = run(0.125);
        assert!(small.lhs <= small.rhs);
        assert!(big.lhs / small.lhs >= 2.0 * 0.95);
    }
}

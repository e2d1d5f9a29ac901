//! Affine and perturbed dynamically defined Cantor sets.
//!
//! A system carries one contraction `f_(a,b)` for every admissible pair and one
//! convex piece `G(a)` per letter, with `f_(a,b)(G(b)) ⊆ G(a)`. For a word
//! `a_0 ... a_n` the cylinder is `G(a) = f_a(G(a_n))` with
//! `f_a = f_(a_0,a_1) ∘ ... ∘ f_(a_{n-1},a_n)`.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, AffineMap, RealAffine};
use crate::matrix::{co_norm, op_norm, Mat, RMat};
use crate::polytope::{ConvexCell, PolytopeError};
use crate::scalar::Scalar;
use crate::smooth::{Perturbation, PerturbedAffine, SmoothMap};
use crate::symbolic::{SymbolicError, SymbolicType, Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CantorError {
    #[error("missing generator for admissible pair ({0}, {1})")]
    MissingGenerator(usize, usize),
    #[error("generator for inadmissible pair ({0}, {1})")]
    ExtraGenerator(usize, usize),
    #[error("expected {expected} pieces, got {got}")]
    PieceCount { expected: usize, got: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("word {0:?} is not admissible")]
    InadmissibleWord(Vec<usize>),
    #[error("empty word")]
    EmptyWord,
    #[error("{0} cylinders exceed the cap {1}")]
    TooManyPoints(u128, usize),
    #[error("operation needs a full shift")]
    NotFullShift,
    #[error("generators are not similarities with a common ratio")]
    NotHomothetic,
    #[error("system has no letter-map presentation")]
    NotIfs,
    #[error("bunching not established up to N = {n_max} (kappa = {kappa})")]
    BunchingInconclusive { kappa: f64, n_max: usize },
    #[error("box counting is degenerate: {0}")]
    DegenerateBoxCount(&'static str),
    #[error("perturbed generator ({0}, {1}) is not contracting on its piece (bound {2})")]
    NotContracting(usize, usize, f64),
    #[error("perturbed pieces {0} and {1} cannot be kept disjoint")]
    PerturbedEscape(usize, usize),
    #[error("invalid system file: {0}")]
    File(String),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

/// Whether the generators come from a holomorphic system realified to R^{2d}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineCantorSystem {
    symbolic: SymbolicType,
    dim: usize,
    generators: BTreeMap<(usize, usize), RealAffine>,
    pieces: Vec<ConvexCell>,
    /// Letter maps `g_a` with `G(a) = g_a(hull)` and `f_(a,b) = g_a`.
    letter_maps: Option<(Vec<RealAffine>, ConvexCell)>,
    field: Field,
}

impl AffineCantorSystem {
    pub fn new(
        symbolic: SymbolicType,
        generators: BTreeMap<(usize, usize), RealAffine>,
        pieces: Vec<ConvexCell>,
        field: Field,
    ) -> Result<Self, CantorError> {
        let m = symbolic.letters();
        if pieces.len() != m {
            return Err(CantorError::PieceCount { expected: m, got: pieces.len() });
        }
        let dim = pieces[0].dim();
        for (a, b) in symbolic.pairs() {
            let g = generators.get(&(a, b)).ok_or(CantorError::MissingGenerator(a, b))?;
            if g.dim() != dim {
                return Err(CantorError::DimensionMismatch(dim, g.dim()));
            }
        }
        if let Some(&(a, b)) = generators.keys().find(|&&(a, b)| !symbolic.admissible(a, b)) {
            return Err(CantorError::ExtraGenerator(a, b));
        }
        if let Some(p) = pieces.iter().find(|p| p.dim() != dim) {
            return Err(CantorError::DimensionMismatch(dim, p.dim()));
        }
        Ok(AffineCantorSystem { symbolic, dim, generators, pieces, letter_maps: None, field })
    }

    /// Full-shift system with `f_(a,b) = g_a` and `G(a) = g_a(hull)`.
    pub fn from_ifs(maps: Vec<RealAffine>, hull: ConvexCell) -> Result<Self, CantorError> {
        let m = maps.len();
        let symbolic = SymbolicType::full_shift(m);
        let mut generators = BTreeMap::new();
        for a in 0..m {
            for b in 0..m {
                generators.insert((a, b), maps[a].clone());
            }
        }
        let pieces = maps.iter().map(|g| hull.affine_image(g)).collect::<Result<Vec<_>, _>>()?;
        let mut sys = Self::new(symbolic, generators, pieces, Field::Real)?;
        sys.letter_maps = Some((maps, hull));
        Ok(sys)
    }

    /// The middle-third Cantor set on `[0, 1]`, exact.
    pub fn middle_third() -> Self {
        let third = Scalar::ratio(1, 3);
        let f0 = RealAffine::line(third.clone(), Scalar::zero()).expect("line");
        let f1 = RealAffine::line(third, Scalar::ratio(2, 3)).expect("line");
        Self::from_ifs(vec![f0, f1], ConvexCell::interval(Scalar::zero(), Scalar::one()).expect("interval")).expect("valid system")
    }

    pub fn with_field(mut self, field: Field) -> Self {
        self.field = field;
        self
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn symbolic(&self) -> &SymbolicType {
        &self.symbolic
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn letters(&self) -> usize {
        self.symbolic.letters()
    }

    pub fn generator(&self, a: usize, b: usize) -> Option<&RealAffine> {
        self.generators.get(&(a, b))
    }

    pub fn generators(&self) -> impl Iterator<Item = (&(usize, usize), &RealAffine)> {
        self.generators.iter()
    }

    pub fn piece(&self, a: usize) -> &ConvexCell {
        &self.pieces[a]
    }

    pub fn pieces(&self) -> &[ConvexCell] {
        &self.pieces
    }

    pub fn letter_maps(&self) -> Option<&[RealAffine]> {
        self.letter_maps.as_ref().map(|(m, _)| m.as_slice())
    }

    pub fn hull(&self) -> Option<&ConvexCell> {
        self.letter_maps.as_ref().map(|(_, h)| h)
    }

    /// Largest operator norm over generators.
    pub fn mu(&self) -> Scalar {
        self.generators.values().map(|g| op_norm(g.linear())).reduce(|a, b| a.max(&b)).expect("no generators")
    }

    /// Smallest conorm over generators.
    pub fn mu_prime(&self) -> Scalar {
        self.generators.values().map(|g| co_norm(g.linear())).reduce(|a, b| a.min(&b)).expect("no generators")
    }

    /// `f_(a_0,a_1) ∘ ... ∘ f_(a_{n-1},a_n)`; the identity for a single letter.
    pub fn word_map(&self, w: &Word) -> Result<RealAffine, CantorError> {
        if w.is_empty() {
            return Err(CantorError::EmptyWord);
        }
        if !self.symbolic.is_admissible_word(w.letters()) {
            return Err(CantorError::InadmissibleWord(w.0.clone()));
        }
        let mut acc = RealAffine::identity(self.dim);
        for p in w.letters().windows(2) {
            acc = acc.compose(&self.generators[&(p[0], p[1])])?;
        }
        Ok(acc)
    }

    /// `g_{a_0} ∘ ... ∘ g_{a_n}`, the map carrying the hull onto the cylinder.
    pub fn cylinder_map(&self, w: &Word) -> Result<RealAffine, CantorError> {
        let (maps, _) = self.letter_maps.as_ref().ok_or(CantorError::NotIfs)?;
        if w.is_empty() {
            return Err(CantorError::EmptyWord);
        }
        if let Some(&a) = w.letters().iter().find(|&&a| a >= maps.len()) {
            return Err(CantorError::InadmissibleWord(vec![a]));
        }
        let mut acc = RealAffine::identity(self.dim);
        for &a in w.letters() {
            acc = acc.compose(&maps[a])?;
        }
        Ok(acc)
    }

    pub fn cylinder(&self, w: &Word) -> Result<ConvexCell, CantorError> {
        let f = self.word_map(w)?;
        Ok(self.pieces[w.last().unwrap()].affine_image(&f)?)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let m = self.letters();
        let mut separation: Option<Scalar> = None;
        for a in 0..m {
            for b in a + 1..m {
                let s = self.pieces[a].separation(&self.pieces[b]);
                if !s.is_positive() {
                    violations.push(Violation::Overlap { a, b, separation: s.clone() });
                }
                separation = Some(match separation {
                    None => s,
                    Some(x) => x.min(&s),
                });
            }
        }
        let mut containment: Option<Scalar> = None;
        for (&(a, b), g) in &self.generators {
            let norm = op_norm(g.linear());
            if !norm.lt(&Scalar::one()) {
                violations.push(Violation::NotContracting { a, b, norm: norm.clone() });
            }
            let img = match self.pieces[b].affine_image(g) {
                Ok(c) => c,
                Err(_) => {
                    violations.push(Violation::NotContracting { a, b, norm });
                    continue;
                }
            };
            let margin = self.pieces[a].containment_margin(&img);
            if margin.is_negative() {
                violations.push(Violation::NotContained { a, b, margin: margin.clone() });
            }
            containment = Some(match containment {
                None => margin,
                Some(x) => x.min(&margin),
            });
        }
        ValidationReport {
            separation,
            containment: containment.unwrap_or_else(Scalar::zero),
            mu: self.mu(),
            mu_prime: self.mu_prime(),
            violations,
        }
    }

    /// Searches for `N` with `|L| |L^{-1}| mu^{alpha N} < 1` for every product `L` of `N` generators.
    pub fn bunching_check(&self, alpha: f64, n_max: usize) -> Result<BunchingReport, CantorError> {
        let mu = self.mu().upper();
        let kappa = self
            .generators
            .values()
            .map(|g| op_norm(g.linear()).upper() / co_norm(g.linear()).lower())
            .fold(1.0, f64::max);
        for n in 1..=n_max {
            let words = self.symbolic.enumerate(n + 1);
            let worst = words
                .par_iter()
                .map(|w| {
                    let l = self.word_map(w).expect("admissible").linear().to_float();
                    op_norm(&l).upper() / co_norm(&l).lower()
                })
                .reduce(|| 0.0, f64::max);
            if worst * mu.powf(alpha * n as f64) < 1.0 {
                return Ok(BunchingReport { kappa, mu, alpha, n_g: n, distortion: worst });
            }
        }
        Err(CantorError::BunchingInconclusive { kappa, n_max })
    }

    /// One representative point per cylinder with `max(depth, 1)` letters, in lexicographic order.
    pub fn render(&self, depth: usize, cap: usize) -> Result<Vec<Vec<f64>>, CantorError> {
        let n = depth.max(1);
        let count = self.symbolic.count_words(n);
        if count > cap as u128 {
            return Err(CantorError::TooManyPoints(count, cap));
        }
        let d = self.dim;
        let maps: BTreeMap<(usize, usize), (DMatrix<f64>, DVector<f64>)> = self
            .generators
            .iter()
            .map(|(&k, g)| (k, (g.linear().to_f64(), DVector::from_iterator(d, g.translation().iter().map(Scalar::mid)))))
            .collect();
        let centers: Vec<DVector<f64>> =
            self.pieces.iter().map(|p| DVector::from_iterator(d, p.centroid().iter().map(Scalar::mid))).collect();
        let m = self.letters();
        let out: Vec<Vec<Vec<f64>>> = (0..m)
            .into_par_iter()
            .map(|a| {
                let mut pts = Vec::new();
                let mut stack = vec![(vec![a], DMatrix::<f64>::identity(d, d), DVector::<f64>::zeros(d))];
                // depth-first in lexicographic order
                while let Some((w, l, t)) = stack.pop() {
                    let last = *w.last().unwrap();
                    if w.len() == n {
                        pts.push((&l * &centers[last] + &t).iter().copied().collect());
                        continue;
                    }
                    for b in (0..m).rev() {
                        if let Some((gl, gt)) = maps.get(&(last, b)) {
                            let mut w2 = w.clone();
                            w2.push(b);
                            stack.push((w2, &l * gl, &l * gt + &t));
                        }
                    }
                }
                pts
            })
            .collect();
        Ok(out.into_iter().flatten().collect())
    }

    /// `log m / log(1/r)` for full-shift systems of similarities with common ratio `r`.
    pub fn similarity_dim(&self) -> Result<DimFormula, CantorError> {
        if !self.symbolic.is_full_shift() {
            return Err(CantorError::NotFullShift);
        }
        let ratio = self.common_ratio().ok_or(CantorError::NotHomothetic)?;
        Ok(DimFormula { count: self.letters() as u64, ratio })
    }

    fn common_ratio(&self) -> Option<Scalar> {
        let d = self.dim;
        let mut ratio: Option<Scalar> = None;
        for g in self.generators.values() {
            let l = g.linear();
            let ltl = l.transpose().mul(l);
            let r2 = ltl.get(0, 0).clone();
            let target = RMat::scalar(d, r2.clone());
            let ok = if ltl.is_exact() { ltl == target } else { ltl.max_deviation(&target) <= 1e-12 };
            if !ok {
                return None;
            }
            let r = r2.sqrt().ok()?;
            match &ratio {
                None => ratio = Some(r),
                Some(x) => {
                    let same = if x.is_exact() && r.is_exact() { *x == r } else { (x.mid() - r.mid()).abs() <= 1e-12 };
                    if !same {
                        return None;
                    }
                }
            }
        }
        ratio
    }

    /// The d-fold product system on tuples of letters.
    pub fn product_system(&self, d: usize) -> Result<AffineCantorSystem, CantorError> {
        if !self.symbolic.is_full_shift() {
            return Err(CantorError::NotFullShift);
        }
        let m = self.letters();
        let digits = |mut x: usize| {
            let mut out = vec![0; d];
            for i in (0..d).rev() {
                out[i] = x % m;
                x /= m;
            }
            out
        };
        let block = |maps: Vec<&RealAffine>| -> Result<RealAffine, AffineError> {
            let k = self.dim;
            let mut lin = RMat::zeros(k * d, k * d);
            let mut t = Vec::with_capacity(k * d);
            for (i, g) in maps.iter().enumerate() {
                for r in 0..k {
                    for c in 0..k {
                        lin.set(i * k + r, i * k + c, g.linear().get(r, c).clone());
                    }
                }
                t.extend(g.translation().iter().cloned());
            }
            AffineMap::new(lin, t)
        };
        let prod_cell = |cells: Vec<&ConvexCell>| {
            let mut it = cells.into_iter();
            let first = it.next().unwrap().clone();
            it.fold(first, |acc, c| acc.product(c))
        };
        if let Some((maps, hull)) = &self.letter_maps {
            let letters: Vec<RealAffine> = (0..m.pow(d as u32))
                .map(|x| block(digits(x).into_iter().map(|i| &maps[i]).collect()))
                .collect::<Result<_, _>>()?;
            let h = prod_cell(vec![hull; d]);
            return AffineCantorSystem::from_ifs(letters, h).map(|s| s.with_field(self.field));
        }
        let big = self.symbolic.power(d);
        let mut gens = BTreeMap::new();
        for (a, b) in big.pairs() {
            let (da, db) = (digits(a), digits(b));
            gens.insert((a, b), block(da.iter().zip(&db).map(|(&x, &y)| &self.generators[&(x, y)]).collect())?);
        }
        let pieces = (0..big.letters()).map(|x| prod_cell(digits(x).into_iter().map(|i| &self.pieces[i]).collect())).collect();
        AffineCantorSystem::new(big, gens, pieces, self.field)
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            dim: self.dim,
            letters: self.letters(),
            pairs: if self.symbolic.is_full_shift() {
                None
            } else {
                Some(self.symbolic.pairs().into_iter().map(|(a, b)| [a, b]).collect())
            },
            field: self.field,
            generators: self
                .generators
                .iter()
                .map(|(&(a, b), g)| GeneratorEntry {
                    pair: [a, b],
                    linear: (0..self.dim).map(|i| g.linear().row(i).to_vec()).collect(),
                    translation: g.translation().to_vec(),
                })
                .collect(),
            pieces: self.pieces.iter().map(|p| PieceEntry { vertices: p.vertices().to_vec() }).collect(),
        }
    }

    pub fn from_file(f: &SystemFile) -> Result<Self, CantorError> {
        let symbolic = match &f.pairs {
            None => SymbolicType::full_shift(f.letters),
            Some(p) => SymbolicType::from_pairs(f.letters, &p.iter().map(|x| (x[0], x[1])).collect::<Vec<_>>())?,
        };
        let mut gens = BTreeMap::new();
        for g in &f.generators {
            if g.linear.len() != f.dim || g.linear.iter().any(|r| r.len() != f.dim) {
                return Err(CantorError::File(format!("generator {:?} has the wrong shape", g.pair)));
            }
            let map = AffineMap::new(Mat::from_rows(g.linear.clone()), g.translation.clone())?;
            gens.insert((g.pair[0], g.pair[1]), map);
        }
        let pieces = f.pieces.iter().map(|p| ConvexCell::from_vertices(p.vertices.clone())).collect::<Result<Vec<_>, _>>()?;
        AffineCantorSystem::new(symbolic, gens, pieces, f.field)
    }
}

/// Structured system definition with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub dim: usize,
    pub letters: usize,
    /// Admissible pairs; all pairs when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[usize; 2]>>,
    #[serde(default = "default_field")]
    pub field: Field,
    pub generators: Vec<GeneratorEntry>,
    pub pieces: Vec<PieceEntry>,
}

fn default_field() -> Field {
    Field::Real
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub pair: [usize; 2],
    pub linear: Vec<Vec<Scalar>>,
    pub translation: Vec<Scalar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceEntry {
    pub vertices: Vec<Vec<Scalar>>,
}

impl SystemFile {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("system file serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, CantorError> {
        toml::from_str(s).map_err(|e| CantorError::File(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Overlap { a: usize, b: usize, separation: Scalar },
    NotContained { a: usize, b: usize, margin: Scalar },
    NotContracting { a: usize, b: usize, norm: Scalar },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Smallest certified gap between distinct pieces (`None` for one letter).
    pub separation: Option<Scalar>,
    /// Smallest margin of `f_(a,b)(G(b))` inside `G(a)`.
    pub containment: Scalar,
    pub mu: Scalar,
    pub mu_prime: Scalar,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BunchingReport {
    pub kappa: f64,
    pub mu: f64,
    pub alpha: f64,
    pub n_g: usize,
    /// Largest `|L| |L^{-1}|` over products of length `n_g`.
    pub distortion: f64,
}

/// Dimension `log count / log(1/ratio)` kept in symbolic form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimFormula {
    pub count: u64,
    pub ratio: Scalar,
}

impl DimFormula {
    pub fn value(&self) -> f64 {
        (self.count as f64).ln() / (1.0 / self.ratio.mid()).ln()
    }

    /// Whether `self = k * other` holds exactly (same ratio, `count = other.count^k`).
    pub fn is_multiple_of(&self, other: &DimFormula, k: u32) -> bool {
        self.ratio == other.ratio && other.count.checked_pow(k) == Some(self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountReport {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub counts: Vec<(f64, usize)>,
}

/// Least-squares slope of `log N(eps)` against `log(1/eps)`.
pub fn box_counting_estimate(points: &[Vec<f64>], scales: &[f64]) -> Result<BoxCountReport, CantorError> {
    if points.is_empty() {
        return Err(CantorError::DegenerateBoxCount("empty point set"));
    }
    if scales.len() < 3 {
        return Err(CantorError::DegenerateBoxCount("fewer than three scales"));
    }
    let (lo, hi) = scales.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    if lo <= 0.0 || hi / lo < 4.0 {
        return Err(CantorError::DegenerateBoxCount("scales span less than two octaves"));
    }
    let counts: Vec<(f64, usize)> = scales
        .par_iter()
        .map(|&eps| {
            let boxes: HashSet<Vec<i64>> = points.iter().map(|p| p.iter().map(|x| (x / eps).floor() as i64).collect()).collect();
            (eps, boxes.len())
        })
        .collect();
    let xs: Vec<f64> = counts.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, n)| (*n as f64).ln()).collect();
    let (slope, intercept, residual) = linear_fit(&xs, &ys);
    Ok(BoxCountReport { slope, intercept, residual, counts })
}

/// Ordinary least squares `y = a x + b`, returning `(a, b, rms residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - a * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - a * x - b).powi(2)).sum::<f64>() / n).sqrt();
    (a, b, rms)
}

/// Affine system with smooth perturbations of its generators.
#[derive(Clone)]
pub struct PerturbedCantorSystem {
    base: AffineCantorSystem,
    maps: BTreeMap<(usize, usize), Arc<PerturbedAffine>>,
    alpha: f64,
    /// Hoelder constant of the derivatives.
    c_holder: f64,
    pieces: Vec<ConvexCell>,
    eta: f64,
}

impl PerturbedCantorSystem {
    /// Checks contraction using derivative bounds over each piece; the pieces are fattened by
    /// `eta = max|p| / (1 - mu)` so that images stay inside, and must remain disjoint.
    pub fn new(
        base: AffineCantorSystem,
        perturbations: BTreeMap<(usize, usize), Perturbation>,
        alpha: f64,
    ) -> Result<Self, CantorError> {
        let mut maps = BTreeMap::new();
        let mut c_holder: f64 = 0.0;
        let mut worst_val: f64 = 0.0;
        let mut mu: f64 = 0.0;
        let mut base_margin = f64::INFINITY;
        for (&(a, b), g) in base.generators() {
            let p = perturbations.get(&(a, b)).cloned().unwrap_or_else(|| Perturbation::zero(base.dim()));
            let (lo, hi) = base.piece(b).bbox_f64();
            let r: Vec<f64> = lo.iter().zip(&hi).map(|(x, y)| x.abs().max(y.abs()) + 1.0).collect();
            let (val, der) = p.bounds(&r);
            let bound = op_norm(g.linear()).upper() + der;
            if bound >= 1.0 {
                return Err(CantorError::NotContracting(a, b, bound));
            }
            let img = base.piece(b).affine_image(g)?;
            base_margin = base_margin.min(base.piece(a).containment_margin(&img).mid());
            worst_val = worst_val.max(val);
            mu = mu.max(bound);
            c_holder = c_holder.max(p.derivative_lipschitz(&r));
            maps.insert((a, b), Arc::new(PerturbedAffine::from_affine(g, p)));
        }
        if base_margin < 0.0 {
            return Err(CantorError::PerturbedEscape(0, 0));
        }
        let eta = (worst_val / (1.0 - mu)) * (1.0 + 1e-9);
        let pieces = if eta > 0.0 {
            let e = Scalar::exact(num_rational::BigRational::from_float(eta).expect("finite"));
            if eta > 0.5 {
                return Err(CantorError::PerturbedEscape(0, 0));
            }
            base.pieces().iter().map(|p| p.fatten(&e)).collect::<Result<Vec<_>, _>>()?
        } else {
            base.pieces().to_vec()
        };
        for a in 0..pieces.len() {
            for b in a + 1..pieces.len() {
                if !pieces[a].separation(&pieces[b]).is_positive() {
                    return Err(CantorError::PerturbedEscape(a, b));
                }
            }
        }
        Ok(PerturbedCantorSystem { base, maps, alpha, c_holder, pieces, eta })
    }

    /// Fattened pieces invariant under the perturbed maps.
    pub fn pieces(&self) -> &[ConvexCell] {
        &self.pieces
    }

    pub fn fattening(&self) -> f64 {
        self.eta
    }

    /// Perturbs every `f_(a,b)` by the perturbation attached to the letter `a`.
    pub fn from_letter_perturbations(base: AffineCantorSystem, per_letter: Vec<Perturbation>, alpha: f64) -> Result<Self, CantorError> {
        let perts = base.symbolic().pairs().into_iter().map(|(a, b)| ((a, b), per_letter[a].clone())).collect();
        Self::new(base, perts, alpha)
    }

    pub fn unperturbed(base: AffineCantorSystem) -> Result<Self, CantorError> {
        Self::new(base, BTreeMap::new(), 1.0)
    }

    pub fn base(&self) -> &AffineCantorSystem {
        &self.base
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn holder_constant(&self) -> f64 {
        self.c_holder
    }

    pub fn is_affine(&self) -> bool {
        self.maps.values().all(|m| m.perturbation.is_zero())
    }

    pub fn map(&self, a: usize, b: usize) -> Arc<dyn SmoothMap> {
        self.maps[&(a, b)].clone()
    }

    pub fn perturbed(&self, a: usize, b: usize) -> &PerturbedAffine {
        &self.maps[&(a, b)]
    }

    /// Maps `f_(a_0,a_1), ..., f_(a_{n-1},a_n)` in order of composition (outermost first).
    pub fn word_maps(&self, w: &[usize]) -> Vec<Arc<dyn SmoothMap>> {
        w.windows(2).map(|p| self.map(p[0], p[1])).collect()
    }

    /// Upper bound on the contraction rate from derivative bounds.
    pub fn mu(&self) -> f64 {
        self.maps
            .iter()
            .map(|(&(_, b), m)| {
                let (lo, hi) = self.base.piece(b).bbox_f64();
                let r: Vec<f64> = lo.iter().zip(&hi).map(|(x, y)| x.abs().max(y.abs())).collect();
                m.linear.singular_values().max() + m.perturbation.bounds(&r).1
            })
            .fold(0.0, f64::max)
    }

    /// Lower bound on the conorm.
    pub fn mu_prime(&self) -> f64 {
        self.maps
            .iter()
            .map(|(&(_, b), m)| {
                let (lo, hi) = self.base.piece(b).bbox_f64();
                let r: Vec<f64> = lo.iter().zip(&hi).map(|(x, y)| x.abs().max(y.abs())).collect();
                m.linear.singular_values().min() - m.perturbation.bounds(&r).1
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `|A| |A^{-1}|` among the affine parts.
    pub fn kappa(&self) -> f64 {
        self.maps
            .values()
            .map(|m| {
                let sv = m.linear.singular_values();
                sv.max() / sv.min()
            })
            .fold(1.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar as S;

    fn middle_third() -> AffineCantorSystem {
        AffineCantorSystem::middle_third()
    }

    #[test]
    fn middle_third_validates() {
        let r = middle_third().validate();
        assert!(r.is_valid());
        assert_eq!(r.separation, Some(S::ratio(1, 3)));
        assert_eq!(r.mu, S::ratio(1, 3));
    }

    #[test]
    fn overlapping_pieces_reported() {
        let f0 = RealAffine::line(S::ratio(2, 3), S::zero()).unwrap();
        let f1 = RealAffine::line(S::ratio(2, 3), S::ratio(1, 3)).unwrap();
        let sys = AffineCantorSystem::from_ifs(vec![f0, f1], ConvexCell::interval(S::zero(), S::one()).unwrap()).unwrap();
        let r = sys.validate();
        assert!(r.violations.iter().any(|v| matches!(v, Violation::Overlap { a: 0, b: 1, .. })));
    }

    #[test]
    fn cylinder_and_word_maps() {
        let sys = middle_third();
        let w = Word(vec![0, 0]);
        assert_eq!(sys.cylinder_map(&w).unwrap(), RealAffine::line(S::ratio(1, 9), S::zero()).unwrap());
        assert_eq!(sys.word_map(&w).unwrap(), RealAffine::line(S::ratio(1, 3), S::zero()).unwrap());
        assert_eq!(sys.word_map(&Word(vec![1])).unwrap(), RealAffine::identity(1));
        let c = sys.cylinder(&Word(vec![0, 1])).unwrap();
        assert_eq!(c.bbox(), (vec![S::ratio(2, 9)], vec![S::ratio(1, 3)]));
    }

    #[test]
    fn render_counts_and_gaps() {
        let sys = middle_third();
        assert_eq!(sys.render(0, 100).unwrap().len(), 2);
        let pts = sys.render(2, 100).unwrap();
        assert_eq!(pts.len(), 4);
        for w in pts.windows(2) {
            assert!(w[1][0] - w[0][0] >= 1.0 / 9.0 - 1e-12);
        }
        assert!(matches!(sys.render(10, 100), Err(CantorError::TooManyPoints(1024, 100))));
    }

    #[test]
    fn similarity_dimension_and_products() {
        let sys = middle_third();
        let d = sys.similarity_dim().unwrap();
        assert!((d.value() - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        let sq = sys.product_system(2).unwrap();
        assert_eq!(sq.letters(), 4);
        assert!(sq.validate().is_valid());
        assert!(sq.similarity_dim().unwrap().is_multiple_of(&d, 2));
        assert_eq!(sq.render(1, 100).unwrap().len(), 4);
    }

    #[test]
    fn bunching_of_diagonal_system() {
        let g = |t: i64| crate::affine::diagonal_map(vec![S::ratio(1, 2), S::ratio(1, 8)], vec![S::ratio(t, 2), S::zero()]).unwrap();
        let hull = ConvexCell::cuboid(&[S::zero(), S::zero()], &[S::one(), S::one()]).unwrap();
        let sys = AffineCantorSystem::from_ifs(vec![g(0), g(1)], hull).unwrap();
        match sys.bunching_check(1.0, 3) {
            Err(CantorError::BunchingInconclusive { kappa, .. }) => assert!((kappa - 4.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
        let r = middle_third().bunching_check(1.0, 3).unwrap();
        assert_eq!(r.n_g, 1);
        assert!((r.kappa - 1.0).abs() < 1e-12);
    }

    #[test]
    fn file_roundtrip() {
        let sys = middle_third();
        let text = sys.to_file().to_toml();
        let back = AffineCantorSystem::from_file(&SystemFile::from_toml(&text).unwrap()).unwrap();
        for (p, q) in back.pieces().iter().zip(sys.pieces()) {
            assert_eq!(p.bbox(), q.bbox());
        }
        for (k, g) in sys.generators() {
            assert_eq!(back.generator(k.0, k.1), Some(g));
        }
        assert!(SystemFile::from_toml("dim = 1").is_err());
    }

    #[test]
    fn box_counting_degenerate_inputs() {
        let pts = vec![vec![0.5]];
        assert!(box_counting_estimate(&[], &[0.1, 0.01, 0.001]).is_err());
        assert!(box_counting_estimate(&pts, &[0.1, 0.09]).is_err());
        let r = box_counting_estimate(&pts, &[0.1, 0.01, 0.001]).unwrap();
        assert!(r.slope.abs() < 1e-12);
    }

    #[test]
    fn perturbed_system_checks_contraction() {
        let base = middle_third();
        let ok = PerturbedCantorSystem::from_letter_perturbations(base.clone(), vec![Perturbation::sine(1, 0.01, 1.0); 2], 1.0);
        assert!(ok.is_ok());
        let bad = PerturbedCantorSystem::from_letter_perturbations(base, vec![Perturbation::quadratic(vec![0.5]); 2], 1.0);
        assert!(bad.is_err());
    }
}

//! The explicit pair `(K_1, K_1')` on the line, the open set `W_1` of affine maps with its
//! four cells, the fiber products `W_d`, and the higher dimensional examples built on them.
//!
//! Affine maps `x -> s x + t` of the line are points `(s, t)`; a point of `W_d` is
//! `(s, t_1, .., t_d)`. Every renormalization operator of the product pair acts on these
//! coordinates through a product of planar maps over the common scale `s`.

pub mod dim;
pub mod flagship;
pub mod svg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, RealAffine};
use crate::cantor::{AffineCantorSystem, CantorError};
use crate::covering::{check_covering, column_coverage, CoverageProof, CoveringCertificate, CoveringError, Region};
use crate::matrix::RMat;
use crate::polytope::{ConvexCell, HalfSpace, PolytopeError};
use crate::renorm::{aff_id_action, RenormError, RenormOp};
use crate::scalar::Scalar;
use crate::symbolic::Word;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate construction: {0}")]
    Degenerate(String),
    #[error("certificate {which} failed: {source}")]
    Certificate { which: String, source: CoveringError },
    #[error("counting gate fails: {0}")]
    Gate(String),
    #[error("perturbation too large: {0}")]
    Perturbation(String),
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

/// Parameters of the construction. Exact quantities are rationals; the SL chart radii are floats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    #[serde(rename = "N")]
    pub n: i64,
    pub tau: Scalar,
    pub delta: Scalar,
    pub gamma: Scalar,
    pub d: usize,
    /// Step of the SL covering elements in the chart.
    pub rho: f64,
    /// Chart radius of the SL region `U`.
    pub r: f64,
    /// Radius of the SL ball the perturbations must stay in.
    pub eps: f64,
    /// The flagship pieces live in `[-h, 1+h]^d`.
    pub hull_margin: Scalar,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            n: 7,
            tau: Scalar::zero(),
            delta: Scalar::ratio(1, 100),
            gamma: Scalar::ratio(1, 10_000),
            d: 2,
            rho: 5e-8,
            r: 5e-7,
            eps: 1e-6,
            hull_margin: Scalar::ratio(1, 20_000),
        }
    }
}

impl ExampleParams {
    /// Exact run: `tau = 0`, `gamma = 1/10^4`.
    pub fn exact(n: i64) -> Self {
        ExampleParams { n, ..Default::default() }
    }

    /// Robustness run: `tau = 1/1000`, `gamma = 1/500`.
    pub fn robust(n: i64) -> Self {
        ExampleParams { n, tau: Scalar::ratio(1, 1000), gamma: Scalar::ratio(1, 500), ..Default::default() }
    }

    /// Parameters of the perturbed examples in dimension `d`.
    pub fn flagship(d: usize) -> Self {
        ExampleParams { d, ..Self::robust(7) }
    }

    pub fn with_tau(&self, tau: Scalar) -> Self {
        ExampleParams { tau, ..self.clone() }
    }

    pub fn a(&self) -> Scalar {
        Scalar::one()
    }

    pub fn b(&self) -> Scalar {
        Scalar::int(2 * self.n + 1)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("params serialize")
    }

    pub fn from_toml(s: &str) -> Result<Self, ConstructionError> {
        let p: ExampleParams = toml::from_str(s).map_err(|e| ConstructionError::InvalidParams(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ConstructionError> {
        let bad = |m: String| Err(ConstructionError::InvalidParams(m));
        if self.n < 7 {
            return bad(format!("N = {} < 7", self.n));
        }
        if [&self.tau, &self.delta, &self.gamma, &self.hull_margin].iter().any(|x| !x.is_exact()) {
            return bad("tau, delta, gamma and the hull margin must be rational".into());
        }
        if self.tau.is_negative() {
            return bad("tau < 0".into());
        }
        if !self.delta.is_positive() || !self.gamma.is_positive() {
            return bad("delta and gamma must be positive".into());
        }
        if !(Scalar::int(5) * &self.gamma).le(&self.delta) {
            return bad(format!("gamma = {} exceeds delta / 5", self.gamma));
        }
        if self.d == 0 {
            return bad("d = 0".into());
        }
        if !(self.rho > 0.0 && self.rho < self.r && self.r <= self.eps) {
            return bad(format!("need 0 < rho < r <= eps, got {}, {}, {}", self.rho, self.r, self.eps));
        }
        w1_boundaries_ok(self.n, &self.delta)
    }
}

pub(crate) fn q(n: i64, d: i64) -> Scalar {
    Scalar::ratio(n, d)
}

pub(crate) fn int(n: i64) -> Scalar {
    Scalar::int(n)
}

/// Letter of `g_{j,i}` in the six-letter alphabet, `j in 1..=3`, `i in 1..=2`.
pub fn letter(j: usize, i: usize) -> usize {
    3 * (i - 1) + (j - 1)
}

/// Family `A_i` of letters `{g_{1,i}, g_{2,i}, g_{3,i}}`.
pub fn family(i: usize) -> [usize; 3] {
    [letter(1, i), letter(2, i), letter(3, i)]
}

pub const LETTER_NAMES: [&str; 6] = ["g11", "g21", "g31", "g12", "g22", "g32"];

fn check_n(n: i64) -> Result<(), ConstructionError> {
    if n < 7 {
        return Err(ConstructionError::InvalidParams(format!("N = {n} < 7")));
    }
    Ok(())
}

fn unit() -> ConvexCell {
    ConvexCell::interval(Scalar::zero(), Scalar::one()).expect("unit interval")
}

/// The six maps in letter order `g11, g21, g31, g12, g22, g32`.
pub fn k1_maps(n: i64, tau: &Scalar) -> Result<Vec<RealAffine>, ConstructionError> {
    check_n(n)?;
    let lam = (int(n) + tau).recip().map_err(AffineError::Scalar)?;
    let mut maps = Vec::new();
    for j in 1..=3 {
        maps.push(RealAffine::line(lam.clone(), q(j - 1, n))?);
    }
    // (x - 1) lam + 1 - (j - 1)/N
    for j in 1..=3 {
        maps.push(RealAffine::line(lam.clone(), Scalar::one() - &lam - q(j - 1, n))?);
    }
    Ok(maps)
}

pub fn k1prime_maps(tau: &Scalar) -> Result<Vec<RealAffine>, ConstructionError> {
    let lam = (int(2) + tau).recip().map_err(AffineError::Scalar)?;
    Ok(vec![RealAffine::line(lam.clone(), Scalar::zero())?, RealAffine::line(lam.clone(), Scalar::one() - &lam)?])
}

pub fn build_k1(n: i64, tau: &Scalar) -> Result<AffineCantorSystem, ConstructionError> {
    Ok(AffineCantorSystem::from_ifs(k1_maps(n, tau)?, unit())?)
}

pub fn build_k1prime(tau: &Scalar) -> Result<AffineCantorSystem, ConstructionError> {
    Ok(AffineCantorSystem::from_ifs(k1prime_maps(tau)?, unit())?)
}

fn w1_boundaries_ok(n: i64, delta: &Scalar) -> Result<(), ConstructionError> {
    let v = w1_vertices(n, delta);
    // lower boundary strictly below the upper one at both ends
    if !(v[0][1].lt(&v[1][1]) && v[3][1].lt(&v[2][1])) {
        return Err(ConstructionError::Degenerate(format!("delta = {delta} inverts the boundaries of W_1")));
    }
    Ok(())
}

/// Vertices `a, b, c, d` of `W_1`.
pub fn w1_vertices(n: i64, delta: &Scalar) -> Vec<Vec<Scalar>> {
    let (a, b) = (int(1), int(2 * n + 1));
    let two = q(2, n - 1);
    let top = q(n - 3, n - 1);
    let dd = delta * int(2);
    vec![
        vec![a.clone(), &two - &a + delta],
        vec![a.clone(), &top - delta],
        vec![b.clone(), &top - &dd],
        vec![b.clone(), &two - &b + &dd],
    ]
}

pub fn build_w1(n: i64, delta: &Scalar) -> Result<ConvexCell, ConstructionError> {
    check_n(n)?;
    w1_boundaries_ok(n, delta)?;
    Ok(ConvexCell::from_vertices(w1_vertices(n, delta))?)
}

/// `W_1` from its four defining inequalities.
pub fn w1_inequalities(n: i64, delta: &Scalar) -> Result<ConvexCell, ConstructionError> {
    let (a, b) = (int(1), int(2 * n + 1));
    let k = delta / (&b - &a);
    let lower = q(2, n - 1) + delta - &k * &a;
    let upper = q(n - 3, n - 1) - delta + &k * &a;
    let hs = vec![
        HalfSpace::new(vec![int(-1), Scalar::zero()], -&a),
        HalfSpace::new(vec![int(1), Scalar::zero()], b.clone()),
        // t > lower - s + k s
        HalfSpace::new(vec![&k - int(1), int(-1)], -lower),
        // t < upper - k s
        HalfSpace::new(vec![k.clone(), int(1)], upper),
    ];
    Ok(ConvexCell::from_halfspaces(hs, 2)?)
}

/// Cells `P_1, P_2, P_1', P_2'`.
pub fn build_cells(n: i64, delta: &Scalar, gamma: &Scalar) -> Result<[ConvexCell; 4], ConstructionError> {
    check_n(n)?;
    let (a, b) = (int(1), int(2 * n + 1));
    let two = q(2, n - 1);
    let top = q(n - 3, n - 1);
    let mid = q(n - 4, n * (n - 1));
    let half = |x: &Scalar| x / int(2);
    let sl = &b / int(n) - gamma;
    let sp = &a * int(2) + gamma;
    let k = (&a + gamma) / (&b - &a);
    let p1 = vec![
        vec![a.clone(), &two - &a + half(delta)],
        vec![a.clone(), mid.clone()],
        vec![sl.clone(), mid.clone()],
        vec![sl.clone(), &two + half(delta) - &b / int(n) + gamma],
    ];
    let p2 = vec![
        vec![a.clone(), -&mid],
        vec![a.clone(), &top - half(delta)],
        vec![sl.clone(), &top - half(delta)],
        vec![sl.clone(), -&mid],
    ];
    let p1p = vec![
        vec![sp.clone(), &two - &a + delta * int(2) - half(gamma)],
        vec![sp.clone(), &top - delta - delta * &k],
        vec![b.clone(), &top - delta * int(2)],
        vec![b.clone(), &two - half(&b) + delta * int(2)],
    ];
    let p2p = vec![
        vec![sp.clone(), &two - &a * int(2) - gamma + delta + delta * &k],
        vec![sp.clone(), &top - delta * int(2) - &a - half(gamma)],
        vec![b.clone(), &top - delta * int(2) - half(&b)],
        vec![b.clone(), &two - &b + delta * int(2)],
    ];
    let mk = |pts: Vec<Vec<Scalar>>, name: &str| {
        ConvexCell::from_vertices(pts).map_err(|e| ConstructionError::Degenerate(format!("cell {name}: {e}")))
    };
    Ok([mk(p1, "P1")?, mk(p2, "P2")?, mk(p1p, "P1'")?, mk(p2p, "P2'")?])
}

/// Actions on `(s, t)` of the eight generators at `tau`, taken from the renormalization
/// operators of the pair: the six expanding ones in letter order, then `F_1, F_2`.
pub fn one_dim_actions(n: i64, tau: &Scalar) -> Result<Vec<RealAffine>, ConstructionError> {
    let k = build_k1(n, tau)?;
    let kp = build_k1prime(tau)?;
    let mut out = Vec::new();
    for l in 0..6 {
        out.push(aff_id_action(&RenormOp::expanding(Word::new(vec![l, l]))?, &k, &kp)?);
    }
    for l in 0..2 {
        out.push(aff_id_action(&RenormOp::contracting(Word::new(vec![l, l]))?, &k, &kp)?);
    }
    Ok(out)
}

/// The closed-form maps at `tau = 0`: `G_{j,i}` in letter order, then `F_1, F_2`.
pub fn displayed_operators(n: i64) -> Vec<RealAffine> {
    let m = |a: Scalar, b: Scalar, c: Scalar, t: Scalar| {
        RealAffine::new(RMat::from_rows(vec![vec![a, Scalar::zero()], vec![b, c]]), vec![Scalar::zero(), t])
            .expect("2x2")
    };
    let mut out = Vec::new();
    // G_{j,1}: (N s, N t - (j - 1)); G_{j,2}: (N s, N t - (N - j))
    for j in 1..=3 {
        out.push(m(int(n), Scalar::zero(), int(n), int(-(j - 1))));
    }
    for j in 1..=3 {
        out.push(m(int(n), Scalar::zero(), int(n), int(-(n - j))));
    }
    out.push(m(q(1, 2), Scalar::zero(), int(1), Scalar::zero()));
    out.push(m(q(1, 2), q(1, 2), int(1), Scalar::zero()));
    out
}

pub const CELL_NAMES: [&str; 4] = ["P1", "P2", "P1'", "P2'"];

/// The three planar certificates of `W_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Report {
    #[serde(rename = "N")]
    pub n: i64,
    pub tau: Scalar,
    pub delta: Scalar,
    pub gamma: Scalar,
    pub certificates: Vec<CoveringCertificate>,
    pub min_margin: Scalar,
}

fn w1_maps(actions: &[RealAffine], j: usize) -> (Vec<RealAffine>, Vec<String>) {
    let maps = vec![actions[letter(j, 1)].clone(), actions[letter(j, 2)].clone(), actions[6].clone(), actions[7].clone()];
    let labels = vec![format!("G{j}1"), format!("G{j}2"), "F1".to_string(), "F2".to_string()];
    (maps, labels)
}

/// Certificates `F_i(P_i') ∪ G_{j,i}(P_i) ⊂ W_1` for `j = 1, 2, 3`.
pub fn verify_prop_6_2(p: &ExampleParams) -> Result<W1Report, ConstructionError> {
    p.validate()?;
    let w1 = build_w1(p.n, &p.delta)?;
    let cells = build_cells(p.n, &p.delta, &p.gamma)?.to_vec();
    let coverage = column_coverage(&w1, &cells, &[vec![0, 1], vec![2, 3]])?;
    let actions = one_dim_actions(p.n, &p.tau)?;
    let mut certificates = Vec::new();
    for j in 1..=3 {
        let (maps, labels) = w1_maps(&actions, j);
        let cert = check_covering(
            Region::Convex(w1.clone()),
            cells.clone(),
            maps,
            labels,
            vec![vec![0], vec![1], vec![2], vec![3]],
            coverage.clone(),
        )
        .map_err(|e| ConstructionError::Certificate { which: format!("j = {j}"), source: e })?;
        certificates.push(cert);
    }
    let min_margin = certificates.iter().map(|c| c.delta.clone()).reduce(|a, b| a.min(&b)).expect("three");
    Ok(W1Report { n: p.n, tau: p.tau.clone(), delta: p.delta.clone(), gamma: p.gamma.clone(), certificates, min_margin })
}

/// Smallest margin over the twelve `(cell, map)` pairs; negative when some image leaves `W_1`.
pub fn prop_6_2_margin(p: &ExampleParams) -> Result<Scalar, ConstructionError> {
    let w1 = build_w1(p.n, &p.delta)?;
    let cells = build_cells(p.n, &p.delta, &p.gamma)?;
    let actions = one_dim_actions(p.n, &p.tau)?;
    let mut worst: Option<Scalar> = None;
    for j in 1..=3 {
        let (maps, _) = w1_maps(&actions, j);
        for (c, f) in cells.iter().zip(&maps) {
            let m = w1.containment_margin(&c.affine_image(f)?);
            worst = Some(match worst {
                None => m,
                Some(w) => w.min(&m),
            });
        }
    }
    Ok(worst.expect("twelve pairs"))
}

/// Rounds a positive rational down to `digits` significant decimal digits.
pub fn round_down_significant(x: &Scalar, digits: u32) -> Scalar {
    let v = x.mid();
    if v <= 0.0 {
        return Scalar::zero();
    }
    let e = v.log10().floor() as i32 - digits as i32 + 1;
    let mut m = (v / 10f64.powi(e)).floor() as i64;
    let scale = |m: i64| if e >= 0 { int(m) * int(10i64.pow(e as u32)) } else { q(m, 10i64.pow((-e) as u32)) };
    // float rounding can overshoot by one unit
    while m > 0 && !scale(m).le(x) {
        m -= 1;
    }
    scale(m)
}

/// Bisection for the threshold below which all three planar certificates hold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauStar {
    /// Largest tested value known to pass, rounded down to `digits` significant digits.
    pub tau_star: Scalar,
    /// Smallest tested value known to fail.
    pub failing: Scalar,
    pub digits: u32,
    pub iterations: usize,
}

pub fn tau_star(p: &ExampleParams, digits: u32) -> Result<TauStar, ConstructionError> {
    let at = |t: &Scalar| prop_6_2_margin(&p.with_tau(t.clone())).map(|m| m.is_positive());
    let mut lo = Scalar::zero();
    if !at(&lo)? {
        return Err(ConstructionError::InvalidParams("certificates fail already at tau = 0".into()));
    }
    let mut hi = q(1, 2);
    if at(&hi)? {
        return Err(ConstructionError::InvalidParams("certificates hold up to tau = 1/2".into()));
    }
    let tol = 10f64.powi(-(digits as i32) - 1);
    let mut iterations = 0;
    while (&hi - &lo).mid() > tol * hi.mid() {
        let mid = (&lo + &hi) / int(2);
        if at(&mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let rounded = round_down_significant(&lo, digits);
    if !at(&rounded)? {
        return Err(ConstructionError::Degenerate(format!("rounded threshold {rounded} fails")));
    }
    Ok(TauStar { tau_star: rounded, failing: hi, digits, iterations })
}

/// Fiber product of `d` copies of `W_1` over the scale coordinate.
pub fn build_wd(n: i64, delta: &Scalar, d: usize) -> Result<ConvexCell, ConstructionError> {
    let w1 = build_w1(n, delta)?;
    if d == 1 {
        return Ok(w1);
    }
    Ok(ConvexCell::fiber_product(&vec![&w1; d])?)
}

/// Product over the common scale of planar maps `(s, t) -> (l s, m s + k t + e)` sharing `l`.
pub fn fiber_map(maps: &[&RealAffine]) -> Result<RealAffine, ConstructionError> {
    let d = maps.len();
    let l = maps[0].linear().get(0, 0).clone();
    if maps.iter().any(|f| f.dim() != 2 || *f.linear().get(0, 0) != l || !f.linear().get(0, 1).is_zero() || !f.translation()[0].is_zero()) {
        return Err(ConstructionError::InvalidParams("maps do not share the scale action".into()));
    }
    let mut lin = RMat::zeros(d + 1, d + 1);
    lin.set(0, 0, l);
    let mut t = vec![Scalar::zero(); d + 1];
    for (i, f) in maps.iter().enumerate() {
        lin.set(i + 1, 0, f.linear().get(1, 0).clone());
        lin.set(i + 1, i + 1, f.linear().get(1, 1).clone());
        t[i + 1] = f.translation()[1].clone();
    }
    Ok(RealAffine::new(lin, t)?)
}

/// All tuples in `{0..k}^d` in lexicographic order.
pub fn tuples(k: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                (0..k).map(move |i| {
                    let mut w = v.clone();
                    w.push(i);
                    w
                })
            })
            .collect();
    }
    out
}

/// Index of a tuple of letters in `{0..k}^d` (first coordinate most significant).
pub fn tuple_index(t: &[usize], k: usize) -> usize {
    t.iter().fold(0, |acc, &x| acc * k + x)
}

/// One family `H_alpha` of expanding operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandingFamily {
    /// `alpha` with entries in `{1, 2}`.
    pub alpha: Vec<usize>,
    /// Letter tuples in lexicographic order.
    pub members: Vec<Vec<usize>>,
}

pub fn expanding_families(d: usize) -> Vec<ExpandingFamily> {
    tuples(2, d)
        .into_iter()
        .map(|a| {
            let alpha: Vec<usize> = a.iter().map(|x| x + 1).collect();
            let members = tuples(3, d)
                .into_iter()
                .map(|js| js.iter().zip(&alpha).map(|(&j, &i)| letter(j + 1, i)).collect())
                .collect();
            ExpandingFamily { alpha, members }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WdReport {
    pub d: usize,
    pub families: Vec<ExpandingFamily>,
    pub expanding_total: usize,
    pub certificate: CoveringCertificate,
    /// Margin left for points within `eps2` of `W_d`.
    pub eps2: Scalar,
    /// Allowed `|U - I|_inf` for which contracting operators still return `w` into the
    /// `eps2`-interior.
    pub eps1: Scalar,
    /// Largest scale in the closure.
    pub s_max: Scalar,
}

/// The expanding `3^d`-cover of `W_d`: `2^d` expanding cells, each sent into `W_d` by all
/// `3^d` operators of one family `H_alpha`, and `2^d` contracting cells.
pub fn verify_lemma_6_4(p: &ExampleParams, d: usize) -> Result<WdReport, ConstructionError> {
    p.validate()?;
    let wd = build_wd(p.n, &p.delta, d)?;
    let base = build_cells(p.n, &p.delta, &p.gamma)?;
    let w1 = build_w1(p.n, &p.delta)?;
    let base_proof = column_coverage(&w1, &base, &[vec![0, 1], vec![2, 3]])?;
    let actions = one_dim_actions(p.n, &p.tau)?;
    let families = expanding_families(d);
    let mut maps = Vec::new();
    let mut labels = Vec::new();
    for t in tuples(6, d) {
        maps.push(fiber_map(&t.iter().map(|&l| &actions[l]).collect::<Vec<_>>())?);
        labels.push(t.iter().map(|&l| LETTER_NAMES[l]).collect::<Vec<_>>().join("x"));
    }
    let expanding_total = maps.len();
    for t in tuples(2, d) {
        maps.push(fiber_map(&t.iter().map(|&l| &actions[6 + l]).collect::<Vec<_>>())?);
        labels.push(t.iter().map(|&l| format!("F{}", l + 1)).collect::<Vec<_>>().join("x"));
    }
    let cell_of = |pick: &[usize], offset: usize| -> Result<ConvexCell, ConstructionError> {
        if d == 1 {
            return Ok(base[offset + pick[0]].clone());
        }
        Ok(ConvexCell::fiber_product(&pick.iter().map(|&i| &base[offset + i]).collect::<Vec<_>>())?)
    };
    let mut cells = Vec::new();
    let mut assignment = Vec::new();
    for fam in &families {
        let pick: Vec<usize> = fam.alpha.iter().map(|a| a - 1).collect();
        cells.push(cell_of(&pick, 0)?);
        assignment.push(fam.members.iter().map(|m| tuple_index(m, 6)).collect());
    }
    for (k, t) in tuples(2, d).into_iter().enumerate() {
        cells.push(cell_of(&t, 2)?);
        assignment.push(vec![expanding_total + k]);
    }
    let coverage = if d == 1 { base_proof } else { CoverageProof::FiberColumns { base: Box::new(base_proof), factors: d } };
    let certificate = check_covering(Region::Convex(wd), cells, maps, labels, assignment, coverage)
        .map_err(|e| ConstructionError::Certificate { which: format!("W_{d}"), source: e })?;
    // eps2 = delta / (2 (1 + L)): a point within eps2 of a cell lands at depth >= eps2
    let lip = certificate.maps.iter().map(|f| f.linear().inf_norm()).reduce(|a, b| a.max(&b)).expect("maps");
    let eps2 = &certificate.delta / (int(2) * (int(1) + &lip));
    // contracting displacement s (U - I) e is at most s_max |U - I| |e|
    let n_c = 1usize << d;
    let contracting = &certificate.margins[certificate.margins.len() - n_c..];
    let m_c = contracting.iter().map(|m| m.margin.clone()).reduce(|a, b| a.min(&b)).expect("contracting cells");
    let lip_c = certificate.maps[expanding_total..].iter().map(|f| f.linear().inf_norm()).reduce(|a, b| a.max(&b)).expect("maps");
    let s_max = p.b() + &eps2;
    let e_max = certificate.maps[expanding_total..]
        .iter()
        .flat_map(|f| (1..=d).map(move |i| f.linear().get(i, 0).abs()))
        .reduce(|a, b| a.max(&b))
        .expect("maps");
    let room = &m_c - (int(1) + &lip_c) * &eps2;
    if !room.is_positive() {
        return Err(ConstructionError::Degenerate("contracting margin too small for eps2".into()));
    }
    let eps1 = room / (&s_max * &e_max);
    Ok(WdReport { d, families, expanding_total, certificate, eps2, eps1, s_max })
}

/// Longest run of one operator kind along an orbit in `W_d`, plus one: every window of
/// this many consecutive steps contains both kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alternation {
    pub max_contracting_run: usize,
    pub max_expanding_run: usize,
    pub window: usize,
    /// `ceil(log_2(2N+1)) + ceil(log_N(2N+1)) + 2`.
    pub bound: usize,
}

pub fn alternation_bound(p: &ExampleParams) -> Alternation {
    let (a, b) = (p.a(), p.b());
    let lam_c = int(2) + &p.tau;
    let lam_e = int(p.n) + &p.tau;
    // contracting steps apply while s >= 2a + gamma; each divides s by 2 + tau
    let mut s = b.clone();
    let mut kc = 0;
    while (&a * int(2) + &p.gamma).le(&s) {
        s = &s / &lam_c;
        kc += 1;
    }
    // expanding steps apply while s <= b/N - gamma; each multiplies s by N + tau
    let mut s = a.clone();
    let mut ke = 0;
    while s.le(&(&b / int(p.n) - &p.gamma)) {
        s = &s * &lam_e;
        ke += 1;
    }
    let ceil_log = |base: f64, x: f64| (x.ln() / base.ln() - 1e-12).ceil() as usize;
    let bf = b.mid();
    let bound = ceil_log(2.0, bf) + ceil_log(p.n as f64, bf) + 2;
    Alternation { max_contracting_run: kc, max_expanding_run: ke, window: kc.max(ke) + 1, bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_values() {
        let maps = k1_maps(7, &Scalar::zero()).unwrap();
        assert_eq!(maps[letter(3, 2)].apply(&[int(1)])[0], q(5, 7));
        assert_eq!(maps[letter(1, 1)].apply(&[int(0)])[0], int(0));
        let fp = k1prime_maps(&Scalar::zero()).unwrap();
        assert_eq!(fp[1].apply(&[int(1)])[0], int(1));
        assert!(build_k1(6, &Scalar::zero()).is_err());
        let k = build_k1(7, &Scalar::zero()).unwrap();
        let dim = k.similarity_dim().unwrap();
        assert!((dim.value() - 6f64.ln() / 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn w1_descriptions_agree() {
        for (n, dl) in [(7, q(1, 100)), (10, q(1, 100)), (8, q(1, 37))] {
            let hull = build_w1(n, &dl).unwrap();
            let ineq = w1_inequalities(n, &dl).unwrap();
            let mut a = hull.vertices().to_vec();
            let mut b = ineq.vertices().to_vec();
            let key = |v: &Vec<Scalar>| (v[0].mid(), v[1].mid());
            a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
            b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
            assert_eq!(a, b);
        }
        assert_eq!(w1_vertices(7, &q(1, 100))[0], vec![int(1), q(-197, 300)]);
        assert!(build_w1(7, &int(1)).is_err());
    }

    #[test]
    fn operators_match_closed_form() {
        for n in [7, 10, 13] {
            assert_eq!(one_dim_actions(n, &Scalar::zero()).unwrap(), displayed_operators(n));
        }
    }

    #[test]
    fn planar_certificates() {
        for n in [7, 10] {
            let r = verify_prop_6_2(&ExampleParams::exact(n)).unwrap();
            assert_eq!(r.certificates.len(), 3);
            assert!(r.min_margin.is_positive() && r.min_margin.is_exact());
            for c in &r.certificates {
                assert_eq!(c.brute_force(2000).0, 0);
            }
        }
        assert!(verify_prop_6_2(&ExampleParams::robust(7)).is_ok());
        let bad = ExampleParams::robust(7).with_tau(q(1, 2));
        assert!(matches!(verify_prop_6_2(&bad), Err(ConstructionError::Certificate { .. })));
    }

    #[test]
    fn wd_shape() {
        let w2 = build_wd(7, &q(1, 100), 2).unwrap();
        assert_eq!(w2.halfspaces().len(), 6);
        assert_eq!(w2.vertices().len(), 8);
        assert_eq!(build_wd(7, &q(1, 100), 1).unwrap(), build_w1(7, &q(1, 100)).unwrap());
    }

    #[test]
    fn families_partition() {
        let f = expanding_families(2);
        assert_eq!(f.len(), 4);
        let mut all: Vec<Vec<usize>> = f.iter().flat_map(|x| x.members.clone()).collect();
        assert!(f.iter().all(|x| x.members.len() == 9));
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 36);
    }

    #[test]
    fn alternation_for_seven() {
        let a = alternation_bound(&ExampleParams::exact(7));
        assert_eq!((a.max_contracting_run, a.max_expanding_run, a.window), (3, 1, 4));
        assert!(a.window <= a.bound);
    }

    #[test]
    fn rounding() {
        assert_eq!(round_down_significant(&q(123456, 1_000_000), 3), q(123, 1000));
        assert_eq!(round_down_significant(&q(1, 1000), 3), q(1, 1000));
    }
}

//! Regions, coverage proofs and covering certificates for finite families of affine maps.
//!
//! A certificate records cells covering the closure of a region together with maps
//! assigned to each cell such that every assigned map sends its cell into the
//! interior of the region with a positive sup-norm margin.

pub mod semigroup;
pub mod sl;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, RealAffine};
use crate::polytope::{ConvexCell, PolytopeError};
use crate::scalar::{Mode, Scalar};

pub const SUBDIVISION_DEPTH: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("empty map family")]
    EmptyFamily,
    #[error("cell {0} has no assigned map")]
    Unassigned(usize),
    #[error("assignment refers to map {0} outside the family")]
    UnknownMap(usize),
    #[error("map {map} sends vertex {vertex:?} of cell {cell} to margin {margin}")]
    NonPositiveMargin { cell: usize, map: usize, vertex: Vec<String>, margin: String },
    #[error("point {0:?} of the region is not covered by the cells")]
    NotCovered(Vec<String>),
    #[error("containment undecided at subdivision depth {0}")]
    Inconclusive(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("{0}")]
    Chart(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

fn fmt_point(x: &[Scalar]) -> Vec<String> {
    x.iter().map(|s| s.to_string()).collect()
}

/// Regions are convex polytopes or finite unions of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Convex(ConvexCell),
    Union(Vec<ConvexCell>),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Convex(c) => c.dim(),
            Region::Union(cs) => cs[0].dim(),
        }
    }

    pub fn members(&self) -> Vec<&ConvexCell> {
        match self {
            Region::Convex(c) => vec![c],
            Region::Union(cs) => cs.iter().collect(),
        }
    }

    /// Lower bound on the margin of a point: the best margin inside a single member.
    pub fn point_margin(&self, x: &[Scalar]) -> Scalar {
        let ms: Vec<Scalar> = self.members().iter().map(|c| c.point_margin(x)).collect();
        ms.iter().skip(1).fold(ms[0].clone(), |a, b| a.max(b))
    }

    pub fn point_margin_f64(&self, x: &[f64]) -> f64 {
        self.members().iter().map(|c| c.point_margin_f64(x)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn bbox_f64(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for c in self.members() {
            let (l, h) = c.bbox_f64();
            for i in 0..d {
                lo[i] = lo[i].min(l[i]);
                hi[i] = hi[i].max(h[i]);
            }
        }
        (lo, hi)
    }

    pub fn to_float(&self) -> Region {
        match self {
            Region::Convex(c) => Region::Convex(c.to_float()),
            Region::Union(cs) => Region::Union(cs.iter().map(ConvexCell::to_float).collect()),
        }
    }
}

/// Margin of `cell` inside `region`, subdividing across union seams.
///
/// For a union the result is the minimum over pieces of the best single-member margin.
pub fn containment_margin(cell: &ConvexCell, region: &Region) -> Result<Scalar, CoveringError> {
    if cell.dim() != region.dim() {
        return Err(CoveringError::DimensionMismatch(cell.dim(), region.dim()));
    }
    match region {
        Region::Convex(r) => Ok(r.containment_margin(cell)),
        Region::Union(_) => union_margin(cell, region, SUBDIVISION_DEPTH),
    }
}

fn union_margin(cell: &ConvexCell, region: &Region, depth: usize) -> Result<Scalar, CoveringError> {
    let best = region.members().iter().map(|m| m.containment_margin(cell)).reduce(|a, b| a.max(&b)).expect("nonempty union");
    if best.is_nonnegative() {
        return Ok(best);
    }
    // a piece lying outside every member at some vertex: no subdivision can help
    if cell.vertices().iter().any(|v| region.point_margin(v).is_negative()) {
        return Ok(best);
    }
    if depth == 0 {
        return Err(CoveringError::Inconclusive(SUBDIVISION_DEPTH));
    }
    let mut worst: Option<Scalar> = None;
    for piece in cell.bisect() {
        let m = union_margin(&piece, region, depth - 1)?;
        worst = Some(match worst {
            None => m,
            Some(w) => w.min(&m),
        });
    }
    Ok(worst.unwrap_or(best))
}

/// How the cells were shown to cover the closure of the region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoverageProof {
    /// Planar region; every vertical line meets the region inside a single group of cells.
    Columns { groups: Vec<Vec<usize>>, slabs: usize },
    /// Fiber product over the first coordinate of a planar column proof: every fiber product of
    /// cells drawn from one group is a cell.
    FiberColumns { base: Box<CoverageProof>, factors: usize },
    /// Adaptive bisection until each piece lies in one cell.
    Subdivision { pieces: usize },
    /// A covered region together with tubes that are their own cells.
    WithTubes { base: Box<CoverageProof>, tubes: usize },
}

/// Vertical cross-section `[lo, hi]` of a planar cell at abscissa `s`, if the line meets it.
fn section(cell: &ConvexCell, s: &Scalar) -> Option<(Scalar, Scalar)> {
    let mut lo: Option<Scalar> = None;
    let mut hi: Option<Scalar> = None;
    for h in cell.halfspaces() {
        let (a, b) = (&h.normal[0], &h.normal[1]);
        let rhs = &h.offset - a * s;
        if b.is_zero() {
            if rhs.is_negative() {
                return None;
            }
            continue;
        }
        let bound = &rhs / b;
        if b.is_positive() {
            hi = Some(match hi {
                None => bound,
                Some(x) => x.min(&bound),
            });
        } else {
            lo = Some(match lo {
                None => bound,
                Some(x) => x.max(&bound),
            });
        }
    }
    let (lo, hi) = (lo?, hi?);
    if hi.lt(&lo) {
        None
    } else {
        Some((lo, hi))
    }
}

/// Greedy chain of intervals covering `[lo, hi]` at one abscissa, as indices into `ivs`.
fn greedy_chain(target: &(Scalar, Scalar), ivs: &[(usize, (Scalar, Scalar))]) -> Option<Vec<usize>> {
    let mut reach = target.0.clone();
    let mut chain = Vec::new();
    let mut first = true;
    loop {
        let best = ivs
            .iter()
            .filter(|(_, (l, h))| l.le(&reach) && (first || reach.lt(h)) && reach.le(h))
            .max_by(|a, b| a.1 .1.cmp_mid(&b.1 .1))?;
        first = false;
        chain.push(best.0);
        reach = best.1 .1.clone();
        if target.1.le(&reach) {
            return Some(chain);
        }
    }
}

fn chain_valid(target: &(Scalar, Scalar), chain: &[usize], ivs: &[(usize, (Scalar, Scalar))]) -> bool {
    let get = |k: usize| ivs.iter().find(|(i, _)| *i == k).map(|(_, iv)| iv.clone());
    let mut reach = target.0.clone();
    for &k in chain {
        let Some((l, h)) = get(k) else { return false };
        if !l.le(&reach) {
            return false;
        }
        reach = reach.max(&h);
    }
    target.1.le(&reach)
}

fn sections_at(cells: &[ConvexCell], members: &[usize], s: &Scalar) -> Vec<(usize, (Scalar, Scalar))> {
    members.iter().filter_map(|&k| section(&cells[k], s).map(|iv| (k, iv))).collect()
}

/// Whether the slab `[s0, s1]` is covered column-wise by one group, bisecting up to `depth`.
fn slab_covered(
    region: &ConvexCell,
    cells: &[ConvexCell],
    groups: &[Vec<usize>],
    s0: &Scalar,
    s1: &Scalar,
    depth: usize,
    count: &mut usize,
) -> Result<(), CoveringError> {
    let (Some(t0), Some(t1)) = (section(region, s0), section(region, s1)) else {
        return Ok(());
    };
    for g in groups {
        // cells of the group spanning the whole slab, their sections affine in s
        let spanning: Vec<usize> = g.iter().copied().filter(|&k| section(&cells[k], s0).is_some() && section(&cells[k], s1).is_some()).collect();
        let i0 = sections_at(cells, &spanning, s0);
        let i1 = sections_at(cells, &spanning, s1);
        for chain in [greedy_chain(&t0, &i0), greedy_chain(&t1, &i1)].into_iter().flatten() {
            if chain_valid(&t0, &chain, &i0) && chain_valid(&t1, &chain, &i1) {
                *count += 1;
                return Ok(());
            }
        }
    }
    if depth == 0 {
        let mid = (s0 + s1) / Scalar::int(2);
        return Err(CoveringError::NotCovered(fmt_point(&[mid])));
    }
    let mid = (s0 + s1) / Scalar::int(2);
    slab_covered(region, cells, groups, s0, &mid, depth - 1, count)?;
    slab_covered(region, cells, groups, &mid, s1, depth - 1, count)
}

/// Column-wise coverage of a planar region: every vertical line through the closure is
/// covered by the cells of one group.
pub fn column_coverage(region: &ConvexCell, cells: &[ConvexCell], groups: &[Vec<usize>]) -> Result<CoverageProof, CoveringError> {
    if region.dim() != 2 {
        return Err(CoveringError::DimensionMismatch(2, region.dim()));
    }
    let (lo, hi) = region.bbox();
    let mut xs: Vec<Scalar> = region.vertices().iter().chain(cells.iter().flat_map(|c| c.vertices())).map(|v| v[0].clone()).collect();
    xs.retain(|x| lo[0].le(x) && x.le(&hi[0]));
    xs.sort_by(|a, b| a.cmp_mid(b));
    xs.dedup();
    let mut count = 0;
    for w in xs.windows(2) {
        slab_covered(region, cells, groups, &w[0], &w[1], SUBDIVISION_DEPTH, &mut count)?;
    }
    Ok(CoverageProof::Columns { groups: groups.to_vec(), slabs: count })
}

/// Coverage of a region's closure by bisection until each piece fits one cell.
pub fn subdivision_coverage(region: &ConvexCell, cells: &[ConvexCell]) -> Result<CoverageProof, CoveringError> {
    fn rec(piece: &ConvexCell, cells: &[ConvexCell], depth: usize, count: &mut usize) -> Result<(), CoveringError> {
        if cells.iter().any(|c| c.containment_margin(piece).is_nonnegative()) {
            *count += 1;
            return Ok(());
        }
        if let Some(v) = piece.vertices().iter().find(|v| cells.iter().all(|c| c.point_margin(v).is_negative())) {
            return Err(CoveringError::NotCovered(fmt_point(v)));
        }
        if depth == 0 {
            return Err(CoveringError::NotCovered(fmt_point(&piece.centroid())));
        }
        for p in piece.bisect() {
            rec(&p, cells, depth - 1, count)?;
        }
        Ok(())
    }
    let mut count = 0;
    rec(region, cells, SUBDIVISION_DEPTH, &mut count)?;
    Ok(CoverageProof::Subdivision { pieces: count })
}

/// Worst vertex of one `(cell, map)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMargin {
    pub cell: usize,
    pub map: usize,
    pub margin: Scalar,
    pub vertex: Vec<Scalar>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringCertificate {
    pub region: Region,
    pub cells: Vec<ConvexCell>,
    pub maps: Vec<RealAffine>,
    pub labels: Vec<String>,
    /// Indices of the maps assigned to each cell; every one of them must work.
    pub assignment: Vec<Vec<usize>>,
    pub mode: Mode,
    /// Smallest margin over all `(cell, map)` pairs.
    pub delta: Scalar,
    /// Margin for the strong covering condition, `delta / (1 + L)` with `L` the largest
    /// sup-norm operator norm among the assigned maps.
    pub strong_delta: Scalar,
    pub margins: Vec<CellMargin>,
    pub coverage: CoverageProof,
}

fn pair_margin(cell: &ConvexCell, f: &RealAffine, region: &Region) -> Result<(Scalar, Vec<Scalar>), CoveringError> {
    let img = cell.affine_image(f)?;
    let margin = containment_margin(&img, region)?;
    let vertex = cell
        .vertices()
        .iter()
        .min_by(|a, b| region.point_margin(&f.apply(a)).cmp_mid(&region.point_margin(&f.apply(b))))
        .cloned()
        .unwrap_or_default();
    Ok((margin, vertex))
}

/// Checks every assigned `(cell, map)` pair and assembles the certificate.
pub fn check_covering(
    region: Region,
    cells: Vec<ConvexCell>,
    maps: Vec<RealAffine>,
    labels: Vec<String>,
    assignment: Vec<Vec<usize>>,
    coverage: CoverageProof,
) -> Result<CoveringCertificate, CoveringError> {
    if maps.is_empty() {
        return Err(CoveringError::EmptyFamily);
    }
    if let Some(k) = assignment.iter().position(Vec::is_empty) {
        return Err(CoveringError::Unassigned(k));
    }
    if assignment.len() != cells.len() {
        return Err(CoveringError::Unassigned(assignment.len().min(cells.len())));
    }
    if let Some(&m) = assignment.iter().flatten().find(|&&m| m >= maps.len()) {
        return Err(CoveringError::UnknownMap(m));
    }
    let pairs: Vec<(usize, usize)> = assignment.iter().enumerate().flat_map(|(c, ms)| ms.iter().map(move |&m| (c, m))).collect();
    let margins: Vec<CellMargin> = pairs
        .par_iter()
        .map(|&(c, m)| {
            let (margin, vertex) = pair_margin(&cells[c], &maps[m], &region)?;
            Ok(CellMargin { cell: c, map: m, margin, vertex })
        })
        .collect::<Result<_, CoveringError>>()?;
    if let Some(bad) = margins.iter().find(|m| !m.margin.is_positive()) {
        return Err(CoveringError::NonPositiveMargin {
            cell: bad.cell,
            map: bad.map,
            vertex: fmt_point(&bad.vertex),
            margin: bad.margin.to_string(),
        });
    }
    let delta = margins.iter().skip(1).fold(margins[0].margin.clone(), |a, m| a.min(&m.margin));
    let lip = pairs.iter().map(|&(_, m)| maps[m].linear().inf_norm()).reduce(|a, b| a.max(&b)).expect("nonempty");
    let strong_delta = &delta / (Scalar::one() + lip);
    let exact = cells.iter().all(ConvexCell::is_exact) && maps.iter().all(RealAffine::is_exact);
    Ok(CoveringCertificate {
        region,
        cells,
        maps,
        labels,
        assignment,
        mode: if exact { Mode::Exact } else { Mode::Float },
        delta,
        strong_delta,
        margins,
        coverage,
    })
}

impl CoveringCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Recomputes every margin from scratch.
    pub fn recheck(&self) -> Result<Scalar, CoveringError> {
        let c = check_covering(
            self.region.clone(),
            self.cells.clone(),
            self.maps.clone(),
            self.labels.clone(),
            self.assignment.clone(),
            self.coverage.clone(),
        )?;
        Ok(c.delta)
    }

    /// Rechecks with every cell, map and region converted to tracked floating point.
    pub fn recheck_float(&self) -> Result<Scalar, CoveringError> {
        let c = check_covering(
            self.region.to_float(),
            self.cells.iter().map(ConvexCell::to_float).collect(),
            self.maps.iter().map(RealAffine::to_float).collect(),
            self.labels.clone(),
            self.assignment.clone(),
            self.coverage.clone(),
        )?;
        Ok(c.delta)
    }

    /// Whether the certificate still holds when the region is replaced by its `eps`-interior.
    pub fn holds_with_interior(&self, eps: &Scalar) -> bool {
        self.margins.iter().all(|m| (&m.margin - eps).is_positive())
    }

    /// Grid check in double precision: every sampled point of the region lies in some cell
    /// and some map assigned to that cell sends it inside the region. Returns the number of
    /// counterexamples and the number of sampled points.
    pub fn brute_force(&self, target_points: usize) -> (usize, usize) {
        brute_force(&self.region, &self.cells, &self.maps, &self.assignment, target_points)
    }
}

/// Sample points of a region on a uniform grid of roughly `target` points.
pub fn region_grid(region: &Region, target: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = region.bbox_f64();
    let d = lo.len();
    let mut per = ((target as f64).powf(1.0 / d as f64).ceil() as usize).max(2);
    loop {
        let pts = grid_points(&lo, &hi, per, |x| region.point_margin_f64(x) >= 0.0);
        if pts.len() >= target || per > 4 * target {
            return pts;
        }
        per += (per / 4).max(1);
    }
}

fn grid_points(lo: &[f64], hi: &[f64], per: usize, keep: impl Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
    let d = lo.len();
    let total = per.pow(d as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut x = vec![0.0; d];
        let mut t = idx;
        for i in 0..d {
            x[i] = lo[i] + (hi[i] - lo[i]) * (t % per) as f64 / (per - 1) as f64;
            t /= per;
        }
        if keep(&x) {
            out.push(x);
        }
    }
    out
}

pub fn brute_force(region: &Region, cells: &[ConvexCell], maps: &[RealAffine], assignment: &[Vec<usize>], target: usize) -> (usize, usize) {
    let pts = region_grid(region, target);
    let bad = pts
        .par_iter()
        .filter(|x| {
            !cells.iter().zip(assignment).any(|(c, ms)| {
                c.point_margin_f64(x) >= -1e-12 && ms.iter().any(|&m| region.point_margin_f64(&maps[m].apply_f64(x)) > 0.0)
            })
        })
        .count();
    (bad, pts.len())
}

/// Perturbation sizes that keep a certificate valid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRadius {
    /// Allowed sup-norm distance of each map from the certified one over the cells.
    pub c0: Scalar,
    /// Allowed size of every coefficient perturbation (linear entries and translation).
    pub coefficient: Scalar,
}

/// Any maps within `delta / 2` of the certified ones on the cells keep margin `delta / 2`;
/// a coefficient change of size `e` moves a point `x` by at most `e (1 + |x|_1)`.
pub fn stability_radius(cert: &CoveringCertificate) -> StabilityRadius {
    let c0 = &cert.delta / Scalar::int(2);
    let reach = cert
        .cells
        .iter()
        .flat_map(|c| c.vertices())
        .map(|v| v.iter().fold(Scalar::zero(), |a, x| a + x.abs()))
        .reduce(|a, b| a.max(&b))
        .unwrap_or_else(Scalar::zero);
    let coefficient = &c0 / (Scalar::one() + reach);
    StabilityRadius { c0, coefficient }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar as S;

    fn q(n: i64, d: i64) -> S {
        S::ratio(n, d)
    }

    fn interval(a: S, b: S) -> ConvexCell {
        ConvexCell::interval(a, b).unwrap()
    }

    #[test]
    fn interval_margins() {
        let r = Region::Convex(interval(S::int(-1), S::int(2)));
        assert_eq!(containment_margin(&interval(S::zero(), S::one()), &r).unwrap(), S::one());
        let own = interval(S::int(-1), S::int(2));
        assert_eq!(containment_margin(&own, &r).unwrap(), S::zero());
    }

    #[test]
    fn union_seam_resolved() {
        let sq = |x0: i64, x1: i64| ConvexCell::cuboid(&[S::int(x0), S::zero()], &[S::int(x1), S::int(2)]).unwrap();
        let r = Region::Union(vec![sq(0, 2), sq(1, 4)]);
        let straddle = ConvexCell::cuboid(&[q(1, 2), q(1, 2)], &[q(7, 2), q(3, 2)]).unwrap();
        // pieces meet the seam, so the single-member bound is zero but nonnegative
        assert!(containment_margin(&straddle, &r).unwrap().is_nonnegative());
        let outside = ConvexCell::cuboid(&[q(1, 2), q(1, 2)], &[q(9, 2), q(3, 2)]).unwrap();
        assert!(containment_margin(&outside, &r).unwrap().is_negative());
    }

    #[test]
    fn one_dimensional_certificate() {
        // V = (0, 1), f(x) = x/3 + 1/3 maps [0, 1] to [1/3, 2/3]
        let v = interval(S::zero(), S::one());
        let f = RealAffine::line(q(1, 3), q(1, 3)).unwrap();
        let cov = subdivision_coverage(&v, std::slice::from_ref(&v)).unwrap();
        let cert = check_covering(Region::Convex(v.clone()), vec![v.clone()], vec![f], vec!["f".into()], vec![vec![0]], cov).unwrap();
        assert_eq!(cert.delta, q(1, 3));
        assert_eq!(cert.strong_delta, q(1, 4));
        assert_eq!(cert.recheck().unwrap(), q(1, 3));
        assert!((cert.recheck_float().unwrap().mid() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(cert.brute_force(1000).0, 0);
        let back = CoveringCertificate::from_json(&cert.to_json()).unwrap();
        assert_eq!(back, cert);
        assert!(cert.holds_with_interior(&q(1, 4)));
        assert!(!cert.holds_with_interior(&q(1, 3)));
    }

    #[test]
    fn failing_map_has_witness() {
        let v = interval(S::zero(), S::one());
        let f = RealAffine::line(q(1, 2), q(1, 2)).unwrap();
        let cov = subdivision_coverage(&v, std::slice::from_ref(&v)).unwrap();
        let err = check_covering(Region::Convex(v.clone()), vec![v], vec![f], vec!["f".into()], vec![vec![0]], cov).unwrap_err();
        assert!(matches!(err, CoveringError::NonPositiveMargin { cell: 0, map: 0, .. }));
    }

    #[test]
    fn empty_family_rejected() {
        let v = interval(S::zero(), S::one());
        let cov = subdivision_coverage(&v, std::slice::from_ref(&v)).unwrap();
        let err = check_covering(Region::Convex(v.clone()), vec![v], vec![], vec![], vec![vec![0]], cov).unwrap_err();
        assert_eq!(err, CoveringError::EmptyFamily);
    }

    #[test]
    fn uncovered_point_found() {
        let v = interval(S::zero(), S::int(3));
        let cells = vec![interval(S::zero(), S::one()), interval(S::int(2), S::int(3))];
        assert!(matches!(subdivision_coverage(&v, &cells), Err(CoveringError::NotCovered(_))));
    }

    #[test]
    fn columns_of_a_square() {
        let sq = ConvexCell::cuboid(&[S::zero(), S::zero()], &[S::int(2), S::int(2)]).unwrap();
        let lower = ConvexCell::cuboid(&[S::zero(), S::int(-1)], &[S::int(2), S::one()]).unwrap();
        let upper = ConvexCell::from_vertices(vec![
            vec![S::zero(), q(1, 2)],
            vec![S::int(2), S::one()],
            vec![S::int(2), S::int(3)],
            vec![S::zero(), S::int(3)],
        ])
        .unwrap();
        let cells = vec![lower, upper];
        assert!(column_coverage(&sq, &cells, &[vec![0, 1]]).is_ok());
        assert!(column_coverage(&sq, &cells, &[vec![0], vec![1]]).is_err());
    }
}

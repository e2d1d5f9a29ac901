//! Experiments driven by certificates: cylinder linking, certified orbits and stress tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, RealAffine};
use crate::cantor::{AffineCantorSystem, CantorError};
use crate::constructions::flagship::{Config, MainCertificate, Move, Position};
use crate::covering::{check_covering, stability_radius, CoveringCertificate, CoveringError};
use crate::matrix::RMat;
use crate::polytope::ConvexCell;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("starting point lies outside the certified region (margin {0:e})")]
    OutsideRegion(f64),
    #[error("no assigned operator returns the orbit at step {0}")]
    Stuck(usize),
    #[error("orbit left the scale interval at step {0}")]
    Unbounded(usize),
    #[error("perturbation {eps:e} exceeds the stability radius {radius:e}")]
    TooLarge { eps: f64, radius: f64 },
    #[error(transparent)]
    Cantor(#[from] CantorError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error(transparent)]
    Affine(#[from] AffineError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedLinkedChain,
    SeparatedAtDepth(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub depth: usize,
    /// `linked[k]`: some pair survives `k` refinements.
    pub linked: Vec<bool>,
    /// Smallest certified gap over the surviving pairs (nonpositive when overlapping).
    pub min_gap: Vec<f64>,
    pub frontier: Vec<usize>,
    /// Words of the first surviving pair at the last depth reached.
    pub trace: (Vec<usize>, Vec<usize>),
    pub verdict: Verdict,
    /// All arithmetic was exact.
    pub exact: bool,
    /// Largest radius carried by an inexact coefficient.
    pub error_radius: f64,
}

#[derive(Clone)]
struct Side {
    word: Vec<usize>,
    map: RealAffine,
    cell: ConvexCell,
}

/// Pairs kept per depth.
pub const FRONTIER_CAP: usize = 4096;

fn linked(a: &ConvexCell, b: &ConvexCell) -> (bool, f64) {
    let sep = a.separation(b);
    if sep.is_positive() {
        return (false, sep.lower());
    }
    // facet normals decide disjointness of polygons; beyond the plane confirm by elimination
    if a.dim() <= 2 {
        (true, sep.mid())
    } else {
        (a.intersects(b), sep.mid())
    }
}

fn radius_of(f: &RealAffine) -> f64 {
    f.linear().entries().iter().chain(f.translation()).map(Scalar::rad).fold(0.0, f64::max)
}

/// Breadth-first search over linked pairs `(G(a), B(G'(a')))`, refining the larger
/// cylinder of each pair at every depth.
pub fn empirical_intersection(
    k: &AffineCantorSystem,
    kp: &AffineCantorSystem,
    b: &RealAffine,
    depth: usize,
    cap: usize,
) -> Result<IntersectionReport, LabError> {
    let (maps, hull) = k.letter_maps().zip(k.hull()).ok_or(CantorError::NotIfs)?;
    let (maps_p, hull_p) = kp.letter_maps().zip(kp.hull()).ok_or(CantorError::NotIfs)?;
    let dim = k.dim();
    let root = Side { word: vec![], map: RealAffine::identity(dim), cell: hull.clone() };
    let root_p = Side { word: vec![], map: b.clone(), cell: hull_p.affine_image(b).map_err(CantorError::from)? };
    let mut exact = b.is_exact() && maps.iter().chain(maps_p).all(RealAffine::is_exact);
    let mut error_radius = 0.0f64;
    let (ok, gap) = linked(&root.cell, &root_p.cell);
    let mut report = IntersectionReport {
        depth: 0,
        linked: vec![ok],
        min_gap: vec![gap],
        frontier: vec![usize::from(ok)],
        trace: (vec![], vec![]),
        verdict: Verdict::CertifiedLinkedChain,
        exact,
        error_radius,
    };
    if !ok {
        report.verdict = Verdict::SeparatedAtDepth(0);
        return Ok(report);
    }
    let mut frontier = vec![(root, root_p)];
    for n in 1..=depth {
        let children: Vec<Vec<(Side, Side, f64)>> = frontier
            .par_iter()
            .map(|(x, y)| -> Result<Vec<(Side, Side, f64)>, LabError> {
                let refine_k = x.cell.diameter() >= y.cell.diameter();
                let (src, letters, base) = if refine_k { (x, maps, hull) } else { (y, maps_p, hull_p) };
                let mut out = Vec::new();
                for (a, g) in letters.iter().enumerate() {
                    let map = src.map.compose(g)?;
                    let cell = base.affine_image(&map).map_err(CantorError::from)?;
                    let mut word = src.word.clone();
                    word.push(a);
                    let side = Side { word, map, cell };
                    let (nx, ny) = if refine_k { (side, y.clone()) } else { (x.clone(), side) };
                    let (ok, gap) = linked(&nx.cell, &ny.cell);
                    if ok {
                        out.push((nx, ny, gap));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_, _>>()?;
        let mut next: Vec<(Side, Side, f64)> = children.into_iter().flatten().collect();
        let survivors = next.len();
        next.truncate(cap);
        report.depth = n;
        report.frontier.push(survivors);
        report.linked.push(survivors > 0);
        report.min_gap.push(next.iter().map(|t| t.2).fold(f64::INFINITY, f64::min));
        if survivors == 0 {
            report.verdict = Verdict::SeparatedAtDepth(n);
            return Ok(report);
        }
        for (x, y, _) in &next {
            error_radius = error_radius.max(radius_of(&x.map)).max(radius_of(&y.map));
        }
        exact &= error_radius == 0.0;
        frontier = next.into_iter().map(|(x, y, _)| (x, y)).collect();
        report.trace = (frontier[0].0.word.clone(), frontier[0].1.word.clone());
    }
    report.exact = exact;
    report.error_radius = error_radius;
    Ok(report)
}

/// One step of a certified orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitStep {
    pub map: usize,
    pub label: String,
    pub expanding: bool,
    /// Margin of the new point in the region.
    pub margin: f64,
    pub point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub start: Vec<f64>,
    pub steps: Vec<OrbitStep>,
    /// Letters appended to the words of `K` and `K'`.
    pub words: (Vec<usize>, Vec<usize>),
    pub min_margin: f64,
    pub max_expanding_run: usize,
    pub max_contracting_run: usize,
    pub scale_range: (f64, f64),
}

fn runs(kinds: &[bool]) -> (usize, usize) {
    let (mut best_e, mut best_c, mut cur, mut last) = (0, 0, 0, None);
    for &k in kinds {
        cur = if Some(k) == last { cur + 1 } else { 1 };
        last = Some(k);
        if k {
            best_e = best_e.max(cur);
        } else {
            best_c = best_c.max(cur);
        }
    }
    (best_e, best_c)
}

/// Follows a covering certificate from `x0`: at every step, among the maps assigned to
/// cells containing the point, the one whose image lies deepest in the region.
///
/// `expanding(m)` tells which maps refine `K`; scales are the first coordinate.
pub fn certified_orbit(cert: &CoveringCertificate, x0: &[f64], steps: usize, expanding: impl Fn(usize) -> bool) -> Result<OrbitTrace, LabError> {
    let start_margin = cert.region.point_margin_f64(x0);
    if start_margin <= 0.0 {
        return Err(LabError::OutsideRegion(start_margin));
    }
    let (lo, hi) = cert.region.bbox_f64();
    let mut x = x0.to_vec();
    let mut trace = OrbitTrace {
        start: x0.to_vec(),
        steps: vec![],
        words: (vec![], vec![]),
        min_margin: start_margin,
        max_expanding_run: 0,
        max_contracting_run: 0,
        scale_range: (x[0], x[0]),
    };
    for n in 0..steps {
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for (c, cell) in cert.cells.iter().enumerate() {
            if cell.point_margin_f64(&x) < 0.0 {
                continue;
            }
            for &m in &cert.assignment[c] {
                let y = cert.maps[m].apply_f64(&x);
                let margin = cert.region.point_margin_f64(&y);
                if best.as_ref().is_none_or(|b| margin > b.1) {
                    best = Some((m, margin, y));
                }
            }
        }
        let (m, margin, y) = best.ok_or(LabError::Stuck(n))?;
        if margin <= 0.0 {
            return Err(LabError::Stuck(n));
        }
        if !(lo[0] <= y[0] && y[0] <= hi[0]) {
            return Err(LabError::Unbounded(n));
        }
        let e = expanding(m);
        if e {
            trace.words.0.push(m);
        } else {
            trace.words.1.push(m);
        }
        trace.min_margin = trace.min_margin.min(margin);
        trace.scale_range = (trace.scale_range.0.min(y[0]), trace.scale_range.1.max(y[0]));
        trace.steps.push(OrbitStep { map: m, label: cert.labels.get(m).cloned().unwrap_or_default(), expanding: e, margin, point: y.clone() });
        x = y;
    }
    let kinds: Vec<bool> = trace.steps.iter().map(|s| s.expanding).collect();
    (trace.max_expanding_run, trace.max_contracting_run) = runs(&kinds);
    Ok(trace)
}

/// The same on the lifted region of the perturbed examples, including the SL part.
pub fn flagship_orbit(cert: &MainCertificate, x0: &Config, steps: usize) -> Result<OrbitTrace, LabError> {
    let start_margin = cert.region_margin(x0);
    if start_margin <= 0.0 {
        return Err(LabError::OutsideRegion(start_margin));
    }
    let point = |x: &Config| -> Vec<f64> { std::iter::once(x.s).chain(x.t.iter().copied()).collect() };
    let (s_lo, s_hi) = (cert.params.a().mid(), cert.params.b().mid());
    let mut x = x0.clone();
    let mut trace = OrbitTrace {
        start: point(&x),
        steps: vec![],
        words: (vec![], vec![]),
        min_margin: start_margin,
        max_expanding_run: 0,
        max_contracting_run: 0,
        scale_range: (x.s, x.s),
    };
    for n in 0..steps {
        let best = cert
            .positions(&x)
            .iter()
            .filter_map(|p: &Position| cert.step_margin(p, &x))
            .fold(None, |acc: Option<(Move, Config, f64)>, c| match acc {
                Some(a) if a.2 >= c.2 => Some(a),
                _ => Some(c),
            });
        let (m, y, margin) = best.ok_or(LabError::Stuck(n))?;
        if margin < 0.0 {
            return Err(LabError::Stuck(n));
        }
        if !(s_lo <= y.s && y.s <= s_hi) {
            return Err(LabError::Unbounded(n));
        }
        let (map, label, e) = match m {
            Move::Expand(l) => (l, format!("expand {l}"), true),
            Move::Contract(l) => (l, format!("contract {l}"), false),
        };
        if e {
            trace.words.0.push(map);
        } else {
            trace.words.1.push(map);
        }
        trace.min_margin = trace.min_margin.min(margin);
        trace.scale_range = (trace.scale_range.0.min(y.s), trace.scale_range.1.max(y.s));
        trace.steps.push(OrbitStep { map, label, expanding: e, margin, point: point(&y) });
        x = y;
    }
    let kinds: Vec<bool> = trace.steps.iter().map(|s| s.expanding).collect();
    (trace.max_expanding_run, trace.max_contracting_run) = runs(&kinds);
    Ok(trace)
}

/// Systems whose linking is re-tested under each perturbation.
pub struct StressSystems<'a> {
    pub k: &'a AffineCantorSystem,
    pub kp: &'a AffineCantorSystem,
    pub b: &'a RealAffine,
    pub depth: usize,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub covering: bool,
    /// Smallest recomputed margin (absent when a margin was nonpositive).
    pub delta: Option<f64>,
    pub linked: Option<bool>,
    pub passed: bool,
    /// Largest coefficient change actually applied.
    pub applied: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StressReport {
    pub seed: u64,
    pub eps: f64,
    pub radius: f64,
    pub trials: Vec<Trial>,
    pub passed: usize,
    pub failed: usize,
    /// Seed and index of the first failing trial.
    pub first_failure: Option<(u64, usize)>,
}

fn perturb_map(f: &RealAffine, eps: f64, rng: &mut ChaCha8Rng, applied: &mut f64) -> Result<RealAffine, AffineError> {
    let d = f.dim();
    let mut noise = || {
        let e = if eps > 0.0 { rng.gen_range(-eps..=eps) } else { 0.0 };
        *applied = applied.max(e.abs());
        e
    };
    let mut lin = RMat::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            lin.set(r, c, Scalar::float(f.linear().get(r, c).mid() + noise()));
        }
    }
    let t = f.translation().iter().map(|x| Scalar::float(x.mid() + noise())).collect();
    RealAffine::new(lin, t)
}

fn perturb_system(sys: &AffineCantorSystem, eps: f64, rng: &mut ChaCha8Rng, applied: &mut f64) -> Result<AffineCantorSystem, LabError> {
    let (maps, hull) = sys.letter_maps().zip(sys.hull()).ok_or(CantorError::NotIfs)?;
    let maps = maps.iter().map(|g| perturb_map(g, eps, rng, applied)).collect::<Result<Vec<_>, _>>()?;
    Ok(AffineCantorSystem::from_ifs(maps, hull.clone())?.with_field(sys.field()))
}

/// Perturbs every coefficient of the certified maps (and of the generators of `systems`)
/// by independent uniform noise in `[-eps, eps]`, then recomputes all margins on the same
/// cells and re-runs the linking search.
pub fn perturb_and_retest(
    seed: u64,
    eps: f64,
    trials: usize,
    cert: &CoveringCertificate,
    systems: Option<&StressSystems>,
) -> Result<StressReport, LabError> {
    let radius = stability_radius(cert).coefficient.lower();
    let rows: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<Trial, LabError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(i as u64));
            let mut applied = 0.0;
            let maps = cert.maps.iter().map(|f| perturb_map(f, eps, &mut rng, &mut applied)).collect::<Result<Vec<_>, _>>()?;
            let recheck =
                check_covering(cert.region.clone(), cert.cells.clone(), maps, cert.labels.clone(), cert.assignment.clone(), cert.coverage.clone());
            let delta = recheck.as_ref().ok().map(|c| c.delta.lower());
            let covering = delta.is_some_and(|d| d > 0.0);
            let linked = match systems {
                Some(s) => {
                    let k = perturb_system(s.k, eps, &mut rng, &mut applied)?;
                    let kp = perturb_system(s.kp, eps, &mut rng, &mut applied)?;
                    let r = empirical_intersection(&k, &kp, s.b, s.depth, s.cap)?;
                    Some(r.verdict == Verdict::CertifiedLinkedChain)
                }
                None => None,
            };
            let passed = covering && linked.unwrap_or(true);
            Ok(Trial { index: i, covering, delta, linked, passed, applied })
        })
        .collect::<Result<_, _>>()?;
    let passed = rows.iter().filter(|t| t.passed).count();
    let first_failure = rows.iter().find(|t| !t.passed).map(|t| (seed, t.index));
    Ok(StressReport { seed, eps, radius, failed: rows.len() - passed, passed, trials: rows, first_failure })
}

/// As [`perturb_and_retest`], refusing sizes above the stability radius.
pub fn perturb_within_radius(
    seed: u64,
    eps: f64,
    trials: usize,
    cert: &CoveringCertificate,
    systems: Option<&StressSystems>,
) -> Result<StressReport, LabError> {
    let radius = stability_radius(cert).coefficient.lower();
    if eps > radius {
        return Err(LabError::TooLarge { eps, radius });
    }
    perturb_and_retest(seed, eps, trials, cert, systems)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::{subdivision_coverage, Region};

    fn third() -> AffineCantorSystem {
        AffineCantorSystem::middle_third()
    }

    #[test]
    fn middle_third_with_itself() {
        let id = RealAffine::identity(1);
        let r = empirical_intersection(&third(), &third(), &id, 8, 64).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedLinkedChain);
        assert!(r.linked.iter().all(|&x| x));
        assert!(r.exact);
    }

    #[test]
    fn translated_apart() {
        let b = RealAffine::line(Scalar::one(), Scalar::int(2)).unwrap();
        let r = empirical_intersection(&third(), &third(), &b, 8, 64).unwrap();
        assert_eq!(r.verdict, Verdict::SeparatedAtDepth(0));
    }

    #[test]
    fn linking_is_monotone() {
        // a slight shift: linked for a while, then separated
        let b = RealAffine::line(Scalar::one(), Scalar::ratio(1, 2)).unwrap();
        let r = empirical_intersection(&third(), &third(), &b, 10, 64).unwrap();
        let first_false = r.linked.iter().position(|&x| !x).unwrap_or(r.linked.len());
        assert!(r.linked[first_false..].iter().all(|&x| !x));
    }

    fn toy_cert() -> CoveringCertificate {
        let v = ConvexCell::interval(Scalar::zero(), Scalar::one()).unwrap();
        let f = RealAffine::line(Scalar::ratio(1, 2), Scalar::ratio(1, 4)).unwrap();
        let cov = subdivision_coverage(&v, std::slice::from_ref(&v)).unwrap();
        check_covering(Region::Convex(v.clone()), vec![v], vec![f], vec!["f".into()], vec![vec![0]], cov).unwrap()
    }

    #[test]
    fn orbit_stays_and_rejects_outside() {
        let c = toy_cert();
        let t = certified_orbit(&c, &[0.9], 20, |_| true).unwrap();
        assert_eq!(t.steps.len(), 20);
        assert!(t.min_margin > 0.0);
        assert!(matches!(certified_orbit(&c, &[1.5], 5, |_| true), Err(LabError::OutsideRegion(_))));
    }

    #[test]
    fn stress_zero_and_deterministic() {
        let c = toy_cert();
        let r = perturb_and_retest(7, 0.0, 10, &c, None).unwrap();
        assert_eq!(r.passed, 10);
        let a = perturb_and_retest(7, 1e-3, 10, &c, None).unwrap();
        let b = perturb_and_retest(7, 1e-3, 10, &c, None).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(perturb_within_radius(7, 1.0, 1, &c, None).is_err());
    }
}

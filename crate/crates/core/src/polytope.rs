//! Convex polytopes with both vertex and half-space representations.
//!
//! Distances are measured in the sup norm, so the distance from a point to the
//! hyperplane `n.x = b` is `|b - n.x| / |n|_1` and stays rational.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::RealAffine;
use crate::matrix::RMat;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("polytope is empty")]
    Empty,
    #[error("polytope is not full dimensional in R^{0}")]
    Degenerate(usize),
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("exact coordinates are required for {0}")]
    Inexact(&'static str),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("map is not invertible")]
    Singular,
}

/// `normal . x <= offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<Scalar>,
    pub offset: Scalar,
}

impl HalfSpace {
    pub fn new(normal: Vec<Scalar>, offset: Scalar) -> Self {
        HalfSpace { normal, offset }
    }

    pub fn l1(&self) -> Scalar {
        self.normal.iter().fold(Scalar::zero(), |a, x| a + x.abs())
    }

    pub fn eval(&self, x: &[Scalar]) -> Scalar {
        dot(&self.normal, x)
    }

    /// Signed sup-norm distance from `x` to the boundary, positive inside.
    pub fn slack(&self, x: &[Scalar]) -> Scalar {
        (&self.offset - self.eval(x)) / self.l1()
    }

    fn canonical(&self) -> HalfSpace {
        let lead = self.normal.iter().find(|x| !x.is_zero()).map(Scalar::abs);
        match lead {
            Some(l) => HalfSpace {
                normal: self.normal.iter().map(|x| x / &l).collect(),
                offset: &self.offset / &l,
            },
            None => self.clone(),
        }
    }
}

pub fn dot(a: &[Scalar], b: &[Scalar]) -> Scalar {
    a.iter().zip(b).fold(Scalar::zero(), |acc, (x, y)| acc + x * y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexCell {
    dim: usize,
    vertices: Vec<Vec<Scalar>>,
    halfspaces: Vec<HalfSpace>,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Solves a square exact system, `None` when singular.
fn solve(a: &RMat, b: &[Scalar]) -> Option<Vec<Scalar>> {
    let det = a.det().ok()?;
    if det.is_zero() || !det.certainly_nonzero() {
        return None;
    }
    Some(a.inverse().ok()?.mul_vec(b))
}

fn cofactor_normal(diffs: &[Vec<Scalar>], k: usize) -> Vec<Scalar> {
    (0..k)
        .map(|j| {
            if k == 1 {
                return Scalar::one();
            }
            let m = RMat::from_fn(k - 1, k - 1, |r, c| diffs[r][if c < j { c } else { c + 1 }].clone());
            let d = m.det().unwrap_or_else(|_| Scalar::zero());
            if j % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

impl ConvexCell {
    /// Convex hull of exact points in R^k; non-extreme points are dropped.
    pub fn from_vertices(points: Vec<Vec<Scalar>>) -> Result<Self, PolytopeError> {
        let k = points.first().ok_or(PolytopeError::Empty)?.len();
        if points.iter().any(|p| p.len() != k) {
            return Err(PolytopeError::DimensionMismatch(k, 0));
        }
        if points.iter().flatten().any(|x| !x.is_exact()) {
            return Err(PolytopeError::Inexact("hull computation"));
        }
        let mut pts: Vec<Vec<Scalar>> = Vec::new();
        for p in points {
            if !pts.contains(&p) {
                pts.push(p);
            }
        }
        if pts.len() < k + 1 {
            return Err(PolytopeError::Degenerate(k));
        }
        let mut hs: Vec<HalfSpace> = Vec::new();
        for sub in subsets(pts.len(), k) {
            let base = &pts[sub[0]];
            let diffs: Vec<Vec<Scalar>> =
                sub[1..].iter().map(|&i| pts[i].iter().zip(base).map(|(a, b)| a - b).collect()).collect();
            let n = cofactor_normal(&diffs, k);
            if n.iter().all(Scalar::is_zero) {
                continue;
            }
            let off = dot(&n, base);
            let vals: Vec<Scalar> = pts.iter().map(|p| dot(&n, p) - &off).collect();
            let h = if vals.iter().all(|v| !v.is_positive()) {
                HalfSpace::new(n, off)
            } else if vals.iter().all(|v| !v.is_negative()) {
                HalfSpace::new(n.iter().map(|x| -x).collect(), -off)
            } else {
                continue;
            };
            let h = h.canonical();
            if !hs.contains(&h) {
                hs.push(h);
            }
        }
        if hs.len() < k + 1 {
            return Err(PolytopeError::Degenerate(k));
        }
        let verts: Vec<Vec<Scalar>> = pts
            .into_iter()
            .filter(|p| hs.iter().filter(|h| (&h.offset - h.eval(p)).is_zero()).count() >= k)
            .collect();
        Ok(ConvexCell { dim: k, vertices: verts, halfspaces: hs })
    }

    /// Polytope `{x : n.x <= b}` from exact half-spaces; must be bounded and full dimensional.
    pub fn from_halfspaces(hs: Vec<HalfSpace>, dim: usize) -> Result<Self, PolytopeError> {
        if hs.iter().any(|h| h.normal.len() != dim) {
            return Err(PolytopeError::DimensionMismatch(dim, 0));
        }
        if hs.iter().any(|h| !h.offset.is_exact() || h.normal.iter().any(|x| !x.is_exact())) {
            return Err(PolytopeError::Inexact("vertex enumeration"));
        }
        let mut canon: Vec<HalfSpace> = Vec::new();
        for h in hs {
            if h.normal.iter().all(Scalar::is_zero) {
                if h.offset.is_negative() {
                    return Err(PolytopeError::Empty);
                }
                continue;
            }
            let c = h.canonical();
            if !canon.contains(&c) {
                canon.push(c);
            }
        }
        if !bounded(&canon, dim) {
            return Err(PolytopeError::Unbounded);
        }
        let mut verts: Vec<Vec<Scalar>> = Vec::new();
        for sub in subsets(canon.len(), dim) {
            let a = RMat::from_fn(dim, dim, |i, j| canon[sub[i]].normal[j].clone());
            let b: Vec<Scalar> = sub.iter().map(|&i| canon[i].offset.clone()).collect();
            if let Some(x) = solve(&a, &b) {
                if canon.iter().all(|h| h.eval(&x).le(&h.offset)) && !verts.contains(&x) {
                    verts.push(x);
                }
            }
        }
        if verts.is_empty() {
            return Err(PolytopeError::Empty);
        }
        if verts.len() < dim + 1 || !full_dimensional(&verts) {
            return Err(PolytopeError::Degenerate(dim));
        }
        // drop redundant constraints: keep those tight on at least `dim` vertices
        let hs: Vec<HalfSpace> = canon
            .into_iter()
            .filter(|h| verts.iter().filter(|v| (&h.offset - h.eval(v)).is_zero()).count() >= dim)
            .collect();
        Ok(ConvexCell { dim, vertices: verts, halfspaces: hs })
    }

    /// Box `[lo_i, hi_i]`.
    pub fn cuboid(lo: &[Scalar], hi: &[Scalar]) -> Result<Self, PolytopeError> {
        let d = lo.len();
        let mut hs = Vec::new();
        for i in 0..d {
            let mut e = vec![Scalar::zero(); d];
            e[i] = Scalar::one();
            hs.push(HalfSpace::new(e.clone(), hi[i].clone()));
            e[i] = Scalar::int(-1);
            hs.push(HalfSpace::new(e, -&lo[i]));
        }
        if lo.iter().chain(hi).all(Scalar::is_exact) {
            return Self::from_halfspaces(hs, d);
        }
        let mut verts = vec![vec![]];
        for i in 0..d {
            verts = verts
                .into_iter()
                .flat_map(|v: Vec<Scalar>| {
                    let mut a = v.clone();
                    a.push(lo[i].clone());
                    let mut b = v;
                    b.push(hi[i].clone());
                    [a, b]
                })
                .collect();
        }
        Ok(ConvexCell { dim: d, vertices: verts, halfspaces: hs })
    }

    pub fn interval(lo: Scalar, hi: Scalar) -> Result<Self, PolytopeError> {
        Self::cuboid(&[lo], &[hi])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<Scalar>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn is_exact(&self) -> bool {
        self.vertices.iter().flatten().all(Scalar::is_exact)
            && self.halfspaces.iter().all(|h| h.offset.is_exact() && h.normal.iter().all(Scalar::is_exact))
    }

    pub fn to_float(&self) -> Self {
        ConvexCell {
            dim: self.dim,
            vertices: self.vertices.iter().map(|v| v.iter().map(Scalar::to_float).collect()).collect(),
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| HalfSpace::new(h.normal.iter().map(Scalar::to_float).collect(), h.offset.to_float()))
                .collect(),
        }
    }

    /// Lower bound on the sup-norm distance from `x` to the complement (negative outside).
    pub fn point_margin(&self, x: &[Scalar]) -> Scalar {
        let mut it = self.halfspaces.iter().map(|h| h.slack(x));
        let first = it.next().expect("polytope without constraints");
        it.fold(first, |a, b| a.min(&b))
    }

    pub fn point_margin_f64(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| {
                let n: f64 = h.normal.iter().map(|a| a.mid().abs()).sum();
                (h.offset.mid() - h.normal.iter().zip(x).map(|(a, b)| a.mid() * b).sum::<f64>()) / n
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: &[Scalar]) -> bool {
        self.point_margin(x).is_nonnegative()
    }

    /// Margin of `inner` inside `self`: minimum over vertices of the point margin.
    pub fn containment_margin(&self, inner: &ConvexCell) -> Scalar {
        let mut it = inner.vertices.iter().map(|v| self.point_margin(v));
        let first = it.next().expect("empty polytope");
        it.fold(first, |a, b| a.min(&b))
    }

    pub fn centroid(&self) -> Vec<Scalar> {
        let n = Scalar::int(self.vertices.len() as i64);
        (0..self.dim)
            .map(|i| self.vertices.iter().fold(Scalar::zero(), |a, v| a + &v[i]) / &n)
            .collect()
    }

    pub fn bbox(&self) -> (Vec<Scalar>, Vec<Scalar>) {
        let lo = (0..self.dim)
            .map(|i| self.vertices.iter().skip(1).fold(self.vertices[0][i].clone(), |a, v| a.min(&v[i])))
            .collect();
        let hi = (0..self.dim)
            .map(|i| self.vertices.iter().skip(1).fold(self.vertices[0][i].clone(), |a, v| a.max(&v[i])))
            .collect();
        (lo, hi)
    }

    pub fn bbox_f64(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i].mid());
                hi[i] = hi[i].max(v[i].mid());
            }
        }
        (lo, hi)
    }

    /// Sup-norm diameter (from midpoints).
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox_f64();
        lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    /// Intersection with an extra half-space, `None` if (nearly) empty.
    pub fn clip(&self, h: &HalfSpace) -> Option<ConvexCell> {
        let mut hs = self.halfspaces.clone();
        hs.push(h.clone());
        ConvexCell::from_halfspaces(hs, self.dim).ok()
    }

    /// Splits along the widest coordinate through the bounding-box midpoint.
    pub fn bisect(&self) -> Vec<ConvexCell> {
        let (lo, hi) = self.bbox();
        let (axis, _) = (0..self.dim)
            .map(|i| (i, (&hi[i] - &lo[i]).mid()))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let mid = (&lo[axis] + &hi[axis]) / Scalar::int(2);
        let mut e = vec![Scalar::zero(); self.dim];
        e[axis] = Scalar::one();
        let left = self.clip(&HalfSpace::new(e.clone(), mid.clone()));
        let right = self.clip(&HalfSpace::new(e.iter().map(|x| -x).collect(), -mid));
        left.into_iter().chain(right).collect()
    }

    /// Sup-norm fattening by `delta`.
    pub fn fatten(&self, delta: &Scalar) -> Result<ConvexCell, PolytopeError> {
        let hs = self.halfspaces.iter().map(|h| HalfSpace::new(h.normal.clone(), &h.offset + delta * h.l1())).collect();
        ConvexCell::from_halfspaces(hs, self.dim)
    }

    pub fn affine_image(&self, f: &RealAffine) -> Result<ConvexCell, PolytopeError> {
        if f.dim() != self.dim {
            return Err(PolytopeError::DimensionMismatch(f.dim(), self.dim));
        }
        let inv = f.linear().inverse().map_err(|_| PolytopeError::Singular)?;
        let inv_t = inv.transpose();
        let vertices = self.vertices.iter().map(|v| f.apply(v)).collect();
        let halfspaces = self
            .halfspaces
            .iter()
            .map(|h| {
                let n = inv_t.mul_vec(&h.normal);
                let off = &h.offset + dot(&n, f.translation());
                HalfSpace::new(n, off)
            })
            .collect();
        Ok(ConvexCell { dim: self.dim, vertices, halfspaces })
    }

    /// Cartesian product.
    pub fn product(&self, other: &ConvexCell) -> ConvexCell {
        let d = self.dim + other.dim;
        let mut vertices = Vec::new();
        for a in &self.vertices {
            for b in &other.vertices {
                vertices.push(a.iter().chain(b).cloned().collect());
            }
        }
        let mut halfspaces = Vec::new();
        for h in &self.halfspaces {
            let mut n = h.normal.clone();
            n.resize(d, Scalar::zero());
            halfspaces.push(HalfSpace::new(n, h.offset.clone()));
        }
        for h in &other.halfspaces {
            let mut n = vec![Scalar::zero(); self.dim];
            n.extend(h.normal.iter().cloned());
            halfspaces.push(HalfSpace::new(n, h.offset.clone()));
        }
        ConvexCell { dim: d, vertices, halfspaces }
    }

    /// `{(s, t_1..t_k) : (s, t_i) in cells[i]}` for planar cells in (s, t).
    pub fn fiber_product(cells: &[&ConvexCell]) -> Result<ConvexCell, PolytopeError> {
        let k = cells.len();
        let mut hs: Vec<HalfSpace> = Vec::new();
        for (i, c) in cells.iter().enumerate() {
            if c.dim != 2 {
                return Err(PolytopeError::DimensionMismatch(2, c.dim));
            }
            for h in &c.halfspaces {
                let mut n = vec![Scalar::zero(); k + 1];
                n[0] = h.normal[0].clone();
                n[i + 1] = h.normal[1].clone();
                let nh = HalfSpace::new(n, h.offset.clone()).canonical();
                if !hs.contains(&nh) {
                    hs.push(nh);
                }
            }
        }
        ConvexCell::from_halfspaces(hs, k + 1)
    }

    /// Whether the two polytopes meet, decided by Fourier-Motzkin elimination.
    pub fn intersects(&self, other: &ConvexCell) -> bool {
        let rows: Vec<(Vec<Scalar>, Scalar)> = self
            .halfspaces
            .iter()
            .chain(&other.halfspaces)
            .map(|h| (h.normal.clone(), h.offset.clone()))
            .collect();
        fm_feasible(rows, self.dim)
    }

    /// Largest sup-norm gap certified by a facet normal of either polytope; positive means disjoint.
    pub fn separation(&self, other: &ConvexCell) -> Scalar {
        let mut best: Option<Scalar> = None;
        for (p, q) in [(self, other), (other, self)] {
            for h in &p.halfspaces {
                let max_p = p.vertices.iter().map(|v| h.eval(v)).reduce(|a, b| a.max(&b)).unwrap();
                let min_q = q.vertices.iter().map(|v| h.eval(v)).reduce(|a, b| a.min(&b)).unwrap();
                let gap = (min_q - max_p) / h.l1();
                best = Some(match best {
                    None => gap,
                    Some(b) => b.max(&gap),
                });
            }
        }
        best.expect("polytope without constraints")
    }
}

fn full_dimensional(verts: &[Vec<Scalar>]) -> bool {
    let d = verts[0].len();
    let base = &verts[0];
    let rows: Vec<Vec<Scalar>> = verts[1..].iter().map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect()).collect();
    rank(rows, d) == d
}

fn rank(mut rows: Vec<Vec<Scalar>>, d: usize) -> usize {
    let mut r = 0;
    for c in 0..d {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let f = &rows[i][c] / &rows[r][c];
                for j in 0..d {
                    let v = &rows[i][j] - &f * &rows[r][j];
                    rows[i][j] = v;
                }
            }
        }
        r += 1;
    }
    r
}

/// Bounded iff no nonzero direction `u` satisfies `n.u <= 0` for every normal.
fn bounded(hs: &[HalfSpace], dim: usize) -> bool {
    for i in 0..dim {
        for sign in [1, -1] {
            let mut rows: Vec<(Vec<Scalar>, Scalar)> = hs.iter().map(|h| (h.normal.clone(), Scalar::zero())).collect();
            let mut e = vec![Scalar::zero(); dim];
            e[i] = Scalar::int(sign);
            rows.push((e.clone(), Scalar::int(sign)));
            rows.push((e.iter().map(|x| -x).collect(), Scalar::int(-sign)));
            if fm_feasible(rows, dim) {
                return false;
            }
        }
    }
    true
}

fn sign_of(x: &Scalar) -> i8 {
    match x {
        Scalar::Exact(_) => match x.sign() {
            Some(std::cmp::Ordering::Greater) => 1,
            Some(std::cmp::Ordering::Less) => -1,
            _ => 0,
        },
        Scalar::Approx { mid, rad } => {
            if mid.abs() <= *rad || *mid == 0.0 {
                0
            } else if *mid > 0.0 {
                1
            } else {
                -1
            }
        }
    }
}

/// Feasibility of `{x : a_i . x <= b_i}` by Fourier-Motzkin elimination.
///
/// Exact for exact data; for float data signs are taken from midpoints.
pub fn fm_feasible(mut rows: Vec<(Vec<Scalar>, Scalar)>, dim: usize) -> bool {
    for var in 0..dim {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for (a, b) in rows {
            match sign_of(&a[var]) {
                1 => {
                    let c = a[var].clone();
                    pos.push((a.iter().map(|x| x / &c).collect::<Vec<_>>(), &b / &c));
                }
                -1 => {
                    let c = a[var].abs();
                    neg.push((a.iter().map(|x| x / &c).collect::<Vec<_>>(), &b / &c));
                }
                _ => {
                    let mut a = a;
                    a[var] = Scalar::zero();
                    rest.push((a, b));
                }
            }
        }
        for (ap, bp) in &pos {
            for (an, bn) in &neg {
                let mut a: Vec<Scalar> = ap.iter().zip(an).map(|(x, y)| x + y).collect();
                a[var] = Scalar::zero();
                let row = (a, bp + bn);
                if !rest.contains(&row) {
                    rest.push(row);
                }
            }
        }
        rows = rest;
        if rows.len() > 20000 {
            break;
        }
    }
    rows.iter().all(|(a, b)| {
        if a.iter().any(|x| sign_of(x) != 0) {
            return true;
        }
        match b {
            Scalar::Exact(_) => b.is_nonnegative(),
            Scalar::Approx { mid, rad } => *mid >= -(rad + 1e-12 * mid.abs().max(1.0)),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[(i64, i64)]) -> Vec<Scalar> {
        v.iter().map(|&(n, d)| Scalar::ratio(n, d)).collect()
    }

    #[test]
    fn hull_drops_interior_points() {
        let c = ConvexCell::from_vertices(vec![
            pt(&[(0, 1), (0, 1)]),
            pt(&[(2, 1), (0, 1)]),
            pt(&[(2, 1), (2, 1)]),
            pt(&[(0, 1), (2, 1)]),
            pt(&[(1, 1), (1, 1)]),
            pt(&[(1, 1), (0, 1)]),
        ])
        .unwrap();
        assert_eq!(c.vertices().len(), 4);
        assert_eq!(c.halfspaces().len(), 4);
        assert_eq!(c.point_margin(&pt(&[(1, 1), (1, 1)])), Scalar::one());
    }

    #[test]
    fn halfspace_roundtrip() {
        let tri = ConvexCell::from_vertices(vec![pt(&[(0, 1), (0, 1)]), pt(&[(1, 1), (0, 1)]), pt(&[(0, 1), (1, 1)])]).unwrap();
        let back = ConvexCell::from_halfspaces(tri.halfspaces().to_vec(), 2).unwrap();
        assert_eq!(back.vertices().len(), 3);
        for v in tri.vertices() {
            assert!(back.vertices().contains(v));
        }
    }

    #[test]
    fn degenerate_and_unbounded() {
        let seg = ConvexCell::from_vertices(vec![pt(&[(0, 1), (0, 1)]), pt(&[(1, 1), (1, 1)]), pt(&[(2, 1), (2, 1)])]);
        assert_eq!(seg, Err(PolytopeError::Degenerate(2)));
        let half = vec![HalfSpace::new(pt(&[(1, 1), (0, 1)]), Scalar::one())];
        assert_eq!(ConvexCell::from_halfspaces(half, 2), Err(PolytopeError::Unbounded));
    }

    #[test]
    fn fatten_has_exact_margin() {
        let sq = ConvexCell::cuboid(&pt(&[(0, 1), (0, 1)]), &pt(&[(1, 1), (1, 1)])).unwrap();
        let d = Scalar::ratio(1, 10);
        let big = sq.fatten(&d).unwrap();
        assert_eq!(big.containment_margin(&sq), d);
    }

    #[test]
    fn intersection_and_separation() {
        let a = ConvexCell::cuboid(&pt(&[(0, 1), (0, 1)]), &pt(&[(1, 1), (1, 1)])).unwrap();
        let b = ConvexCell::cuboid(&pt(&[(2, 1), (0, 1)]), &pt(&[(3, 1), (1, 1)])).unwrap();
        let c = ConvexCell::cuboid(&pt(&[(1, 2), (1, 2)]), &pt(&[(3, 1), (3, 1)])).unwrap();
        assert!(!a.intersects(&b));
        assert_eq!(a.separation(&b), Scalar::one());
        assert!(a.intersects(&c));
        assert!(!a.separation(&c).is_positive());
        let touching = ConvexCell::cuboid(&pt(&[(1, 1), (0, 1)]), &pt(&[(2, 1), (1, 1)])).unwrap();
        assert!(a.intersects(&touching));
    }

    #[test]
    fn fiber_product_of_squares_is_cube() {
        let sq = ConvexCell::cuboid(&pt(&[(0, 1), (0, 1)]), &pt(&[(1, 1), (1, 1)])).unwrap();
        let cube = ConvexCell::fiber_product(&[&sq, &sq]).unwrap();
        assert_eq!(cube.vertices().len(), 8);
        assert_eq!(cube.halfspaces().len(), 6);
    }
}

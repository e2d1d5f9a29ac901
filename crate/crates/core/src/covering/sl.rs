//! Covering a neighbourhood of the identity in `SL(d)` by finitely many translates.
//!
//! The chart is `X -> exp(X)` on the Lie algebra with a Frobenius-orthonormal basis.
//! With `log M_j^{-1} = rho w_j` for the vertices `w_j` of a regular simplex, every
//! `x` in the ball of radius `R` has some `j` with `x . w_j <= -|x| / m`, so
//! `|x + rho w_j| <= max(rho, sqrt(R^2 - 2 R rho / m + rho^2))`. The group product
//! differs from the sum by at most `rho h(2(R + 2 rho))` where
//! `h(r) = r / 2 + 4 q / (1 - q)`, `q = (r / 2 pi)^2` bounds `|x / (e^x - 1) - 1|`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CoveringError;
use crate::cantor::Field;

pub type CMatrix = DMatrix<Complex64>;

/// Frobenius-orthonormal basis of `sl(d, R)`, or over `C` of `{X : Re tr X = 0}`.
pub fn lie_basis(d: usize, field: Field) -> Vec<CMatrix> {
    let mut out = Vec::new();
    let one = Complex64::new(1.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let mut m = CMatrix::zeros(d, d);
                m[(i, j)] = one;
                out.push(m);
            }
        }
    }
    for u in helmert(d) {
        out.push(CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, u.iter().map(|&x| Complex64::new(x, 0.0)))));
    }
    if field == Field::Complex {
        let i = Complex64::new(0.0, 1.0);
        for a in 0..d {
            for b in 0..d {
                let mut m = CMatrix::zeros(d, d);
                m[(a, b)] = i;
                out.push(m);
            }
        }
    }
    out
}

/// Orthonormal basis of the vectors in `R^n` with zero sum.
pub fn helmert(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..n)
                .map(|i| {
                    if i < k {
                        1.0 / norm
                    } else if i == k {
                        -(k as f64) / norm
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Unit vertices of a regular simplex centred at the origin of `R^m`.
pub fn simplex_directions(m: usize) -> Vec<Vec<f64>> {
    if m == 0 {
        return vec![vec![]];
    }
    let h = helmert(m + 1);
    let scale = ((m + 1) as f64 / m as f64).sqrt();
    (0..=m).map(|i| h.iter().map(|u| u[i] * scale).collect()).collect()
}

/// Sampled `max_n min_i w_i . n` over unit vectors `n`; negative for a positively spanning set.
pub fn positive_spanning_gap(dirs: &[Vec<f64>], samples: usize) -> f64 {
    let m = dirs.first().map_or(0, Vec::len);
    if m == 0 {
        return -1.0;
    }
    let mut rng = SplitMix(0x5eed);
    let mut worst = f64::NEG_INFINITY;
    let mut probe = |n: &[f64]| {
        let v = dirs.iter().map(|w| w.iter().zip(n).map(|(a, b)| a * b).sum::<f64>()).fold(f64::INFINITY, f64::min);
        worst = worst.max(v);
    };
    // the extremal directions are the vertices themselves
    for w in dirs {
        probe(w);
    }
    for _ in 0..samples {
        let mut n: Vec<f64> = (0..m).map(|_| rng.gauss()).collect();
        let r = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        n.iter_mut().for_each(|x| *x /= r);
        probe(&n);
    }
    worst
}

/// Small deterministic generator for sampling inside this module.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn gauss(&mut self) -> f64 {
        let u = self.next().max(1e-300);
        let v = self.next();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let norm = frobenius(x);
    let k = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let y = x / Complex64::new(2f64.powi(k), 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for i in 1..30 {
        term = &term * &y / Complex64::new(i as f64, 0.0);
        sum += &term;
        if frobenius(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..k {
        sum = &sum * &sum;
    }
    sum
}

/// Principal logarithm near the identity, `None` when `|U - I| >= 1/2`.
pub fn logm(u: &CMatrix) -> Option<CMatrix> {
    let n = u.nrows();
    let y = u - CMatrix::identity(n, n);
    if frobenius(&y) >= 0.5 {
        return None;
    }
    let mut power = y.clone();
    let mut sum = y.clone();
    for k in 2..200 {
        power = &power * &y;
        let t = &power / Complex64::new(if k % 2 == 0 { -(k as f64) } else { k as f64 }, 0.0);
        sum += &t;
        if frobenius(&t) < 1e-18 {
            break;
        }
    }
    Some(sum)
}

/// Coordinates of `X` in an orthonormal basis for the inner product `Re tr(A^* B)`.
pub fn coords(basis: &[CMatrix], x: &CMatrix) -> Vec<f64> {
    basis.iter().map(|b| b.iter().zip(x.iter()).map(|(p, q)| (p.conj() * q).re).sum()).collect()
}

pub fn from_coords(basis: &[CMatrix], x: &[f64]) -> CMatrix {
    let n = basis.first().map_or(1, |b| b.nrows());
    basis.iter().zip(x).fold(CMatrix::zeros(n, n), |acc, (b, c)| acc + b * Complex64::new(*c, 0.0))
}

/// `|x / (e^x - 1) - 1| <= h(|x|)` for `|x| < 2 pi`.
pub fn bch_h(r: f64) -> f64 {
    let q = (r / (2.0 * std::f64::consts::PI)).powi(2);
    if q >= 1.0 {
        return f64::INFINITY;
    }
    r / 2.0 + 4.0 * q / (1.0 - q)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlCover {
    pub d: usize,
    pub field: Field,
    /// Chart ball radius `R`.
    pub radius: f64,
    pub rho: f64,
    /// Real dimension of the Lie algebra.
    pub dim: usize,
    pub directions: Vec<Vec<f64>>,
    /// The covering elements `M_j` with `log M_j^{-1} = rho w_j`.
    #[serde(skip)]
    pub matrices: Vec<CMatrix>,
    #[serde(skip)]
    pub basis: Vec<CMatrix>,
    pub c_lin: f64,
    pub bch_error: f64,
    /// Bound on `|log M_j^{-1} - rho w_j|` from floating point evaluation.
    pub matrix_error: f64,
    /// Certified margin: every `x` in the closed ball has some `j` with
    /// `|log(M_j^{-1} exp x)| <= R - c`.
    pub c: f64,
    /// Worst sampled value of `min_j |log(M_j^{-1} exp x)|`.
    pub grid_worst: f64,
    pub grid_points: usize,
}

/// Radius after the best step from a point of norm at most `r`.
pub fn linear_step(r: f64, rho: f64, m: usize) -> f64 {
    if m == 0 {
        return r;
    }
    rho.max((r * r - 2.0 * r * rho / m as f64 + rho * rho).max(0.0).sqrt())
}

impl SlCover {
    pub fn size(&self) -> usize {
        self.matrices.len()
    }

    /// Upper bound on `min_j |log(M_j^{-1} exp x)|` over `|x| <= r`.
    pub fn after_step(&self, r: f64) -> f64 {
        if self.dim == 0 {
            return r;
        }
        linear_step(r, self.rho, self.dim) + self.rho * bch_h(2.0 * (r + 2.0 * self.rho)) + self.matrix_error
    }

    /// Index of the element that moves `x` furthest inward, with the resulting chart norm.
    pub fn best(&self, u: &CMatrix) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, m) in self.matrices.iter().enumerate() {
            let inv = m.clone().try_inverse()?;
            let l = logm(&(inv * u))?;
            let r = frobenius(&l);
            if best.is_none_or(|b| r < b.1) {
                best = Some((j, r));
            }
        }
        best
    }

    /// Chart norm `|log U|`.
    pub fn chart_norm(u: &CMatrix) -> Option<f64> {
        logm(u).map(|l| frobenius(&l))
    }

    pub fn real_matrices(&self) -> Vec<DMatrix<f64>> {
        self.matrices.iter().map(|m| m.map(|z| z.re)).collect()
    }
}

/// Chart ball of radius `r` covered by `1 + dim` translates at step `rho`.
pub fn sl_cover_construct(d: usize, field: Field, r: f64, rho: f64, grid_samples: usize) -> Result<SlCover, CoveringError> {
    let basis = lie_basis(d, field);
    let m = basis.len();
    if m == 0 {
        return Ok(SlCover {
            d,
            field,
            radius: r,
            rho,
            dim: 0,
            directions: vec![vec![]],
            matrices: vec![CMatrix::identity(d, d)],
            basis,
            c_lin: r,
            bch_error: 0.0,
            matrix_error: 0.0,
            c: r,
            grid_worst: 0.0,
            grid_points: 1,
        });
    }
    if !(rho > 0.0 && rho < r) {
        return Err(CoveringError::Chart(format!("step {rho} must lie in (0, {r})")));
    }
    let directions = simplex_directions(m);
    let mut matrices = Vec::new();
    let mut matrix_error: f64 = 0.0;
    for w in &directions {
        let x = from_coords(&basis, w) * Complex64::new(rho, 0.0);
        let mj = expm(&(-&x));
        let back = logm(&mj.clone().try_inverse().ok_or_else(|| CoveringError::Chart("singular element".into()))?)
            .ok_or_else(|| CoveringError::Chart("element too far from the identity".into()))?;
        // evaluation error, doubled as a safety allowance for the residual check itself
        matrix_error = matrix_error.max(2.0 * frobenius(&(back - &x)) + 64.0 * f64::EPSILON);
        matrices.push(mj);
    }
    let c_lin = r - linear_step(r, rho, m);
    let s = 2.0 * (r + 2.0 * rho);
    let h = bch_h(s);
    if h > 1.0 {
        return Err(CoveringError::Chart(format!("chart radius {r} too large for the remainder bound")));
    }
    let bch_error = rho * h;
    let c = c_lin - bch_error - matrix_error;
    if c <= 0.0 {
        return Err(CoveringError::Chart(format!("no margin: c_lin {c_lin:e} against remainder {bch_error:e}")));
    }
    let mut cover = SlCover {
        d,
        field,
        radius: r,
        rho,
        dim: m,
        directions,
        matrices,
        basis,
        c_lin,
        bch_error,
        matrix_error,
        c,
        grid_worst: 0.0,
        grid_points: 0,
    };
    let (worst, n) = grid_check(&cover, grid_samples)?;
    if worst > r - c + 1e-12 {
        return Err(CoveringError::Chart(format!("grid point reaches {worst} > {}", r - c)));
    }
    cover.grid_worst = worst;
    cover.grid_points = n;
    Ok(cover)
}

/// Samples the sphere of radius `R` (the worst case) and a few inner shells.
fn grid_check(cover: &SlCover, samples: usize) -> Result<(f64, usize), CoveringError> {
    let m = cover.dim;
    let mut rng = SplitMix(0xc0ffee);
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for w in &cover.directions {
        pts.push(w.iter().map(|x| -x * cover.radius).collect());
        pts.push(w.iter().map(|x| x * cover.radius).collect());
    }
    for i in 0..samples {
        let mut n: Vec<f64> = (0..m).map(|_| rng.gauss()).collect();
        let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
        let shell = match i % 4 {
            0 | 1 => 1.0,
            2 => 0.5,
            _ => rng.next(),
        };
        n.iter_mut().for_each(|x| *x *= shell * cover.radius / len);
        pts.push(n);
    }
    let mut worst: f64 = 0.0;
    for x in &pts {
        let u = expm(&from_coords(&cover.basis, x));
        let (_, r) = cover.best(&u).ok_or_else(|| CoveringError::Chart("logarithm failed on the grid".into()))?;
        worst = worst.max(r);
    }
    Ok((worst, pts.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_dimensions() {
        assert_eq!(lie_basis(1, Field::Real).len(), 0);
        assert_eq!(lie_basis(2, Field::Real).len(), 3);
        assert_eq!(lie_basis(3, Field::Real).len(), 8);
        assert_eq!(lie_basis(1, Field::Complex).len(), 1);
        assert_eq!(lie_basis(2, Field::Complex).len(), 7);
        let b = lie_basis(2, Field::Complex);
        for (i, x) in b.iter().enumerate() {
            let c = coords(&b, x);
            for (j, v) in c.iter().enumerate() {
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
            assert!(x.trace().re.abs() < 1e-14);
        }
    }

    #[test]
    fn simplex_spans_positively() {
        for m in 1..8 {
            let w = simplex_directions(m);
            assert_eq!(w.len(), m + 1);
            for i in 0..=m {
                for j in 0..=m {
                    let dot: f64 = w[i].iter().zip(&w[j]).map(|(a, b)| a * b).sum();
                    let want = if i == j { 1.0 } else { -1.0 / m as f64 };
                    assert!((dot - want).abs() < 1e-12);
                }
            }
            let gap = positive_spanning_gap(&w, 2000);
            assert!(gap < 0.0);
            assert!((gap + 1.0 / m as f64).abs() < 1e-9, "{m} {gap}");
        }
    }

    #[test]
    fn exp_log_roundtrip() {
        let b = lie_basis(2, Field::Real);
        let x = from_coords(&b, &[0.01, -0.02, 0.015]);
        let back = logm(&expm(&x)).unwrap();
        assert!(frobenius(&(back - &x)) < 1e-15);
        assert!((expm(&x).determinant().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn covers_in_low_dimension() {
        let t = sl_cover_construct(1, Field::Real, 1e-3, 1e-4, 10).unwrap();
        assert_eq!(t.size(), 1);
        let c = sl_cover_construct(2, Field::Real, 1e-3, 1e-4, 400).unwrap();
        assert_eq!(c.size(), 4);
        assert!(c.c > 0.0 && c.grid_worst <= c.radius - c.c);
        let z = sl_cover_construct(1, Field::Complex, 1e-3, 1e-4, 50).unwrap();
        assert_eq!(z.size(), 2);
        let phase = z.matrices[0][(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-15 && (phase.arg().abs() - 1e-4).abs() < 1e-15);
        let z2 = sl_cover_construct(2, Field::Complex, 1e-3, 1e-4, 400).unwrap();
        assert_eq!(z2.size(), 8);
    }

    #[test]
    fn oversized_step_rejected() {
        assert!(sl_cover_construct(2, Field::Real, 1e-3, 2e-3, 10).is_err());
        assert!(sl_cover_construct(2, Field::Real, 2.0, 0.1, 10).is_err());
    }
}

//! Upper bounds on the Hausdorff dimension of the examples and the matching choice of `N`.

use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::cantor::AffineCantorSystem;
use crate::matrix::op_norm;
use crate::scalar::Scalar;

/// `d ln 6 / ln(N + tau')`.
pub fn dim_bound(n: i64, tau_p: &Scalar, d: usize) -> f64 {
    d as f64 * 6f64.ln() / (n as f64 + tau_p.mid()).ln()
}

/// The bound for a concrete system with six letters per coordinate: every generator must
/// contract by at least `N + tau'`.
pub fn dim_bound_for(sys: &AffineCantorSystem, n: i64, tau_p: &Scalar) -> Result<f64, ConstructionError> {
    let lam = (Scalar::int(n) + tau_p).recip().map_err(crate::affine::AffineError::Scalar)?;
    for ((a, b), g) in sys.generators() {
        let norm = op_norm(g.linear());
        if norm.lower() > lam.upper() + 1e-15 {
            return Err(ConstructionError::Perturbation(format!("generator ({a}, {b}) has norm {} > 1/(N + tau')", norm.mid())));
        }
    }
    let per = (sys.letters() as f64).ln() / 6f64.ln();
    let d = per.round() as usize;
    if (per - d as f64).abs() > 1e-9 {
        return Err(ConstructionError::InvalidParams(format!("{} letters is not a power of 6", sys.letters())));
    }
    Ok(dim_bound(n, tau_p, d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimSolution {
    #[serde(rename = "N")]
    pub n: i64,
    pub bound: f64,
}

/// Smallest `N >= 7` with `d ln 6 / ln(N + tau') < eps`, decided exactly through
/// `6^(d q) < (N + tau')^p` for `eps = p / q`.
pub fn min_n_for(eps: &Scalar, d: usize, tau_p: &Scalar) -> Result<DimSolution, ConstructionError> {
    let r = eps.as_exact().ok_or_else(|| ConstructionError::InvalidParams("eps must be rational".into()))?;
    if !eps.is_positive() {
        return Err(ConstructionError::InvalidParams("eps must be positive".into()));
    }
    let (p, q) = (r.numer().clone(), r.denom().clone());
    let to_i32 = |x: &num_bigint::BigInt| i32::try_from(x.clone()).map_err(|_| ConstructionError::InvalidParams("eps has a huge numerator or denominator".into()));
    let (p, q) = (to_i32(&p)?, to_i32(&q)?);
    let lhs = Scalar::int(6).pow_i(d as i32 * q).map_err(crate::affine::AffineError::Scalar)?;
    let holds = |n: i64| -> bool {
        let base = Scalar::int(n) + tau_p;
        base.pow_i(p).map(|v| lhs.lt(&v)).unwrap_or(false)
    };
    // exponential search then bisection on the monotone predicate
    let mut hi: i64 = 7;
    while !holds(hi) {
        hi = hi.checked_mul(2).ok_or_else(|| ConstructionError::InvalidParams("no N fits in i64".into()))?;
    }
    let mut lo = 6;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if mid >= 7 && holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DimSolution { n: hi, bound: dim_bound(hi, tau_p, d) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_k1;

    #[test]
    fn seven() {
        assert!((dim_bound(7, &Scalar::zero(), 1) - 6f64.ln() / 7f64.ln()).abs() < 1e-15);
        let k = build_k1(7, &Scalar::zero()).unwrap();
        assert!((dim_bound_for(&k, 7, &Scalar::zero()).unwrap() - 6f64.ln() / 7f64.ln()).abs() < 1e-15);
        assert!(dim_bound_for(&k, 8, &Scalar::zero()).is_err());
    }

    #[test]
    fn solver() {
        let s = min_n_for(&Scalar::ratio(1, 2), 2, &Scalar::zero()).unwrap();
        assert_eq!(s.n, 1297);
        assert!(s.bound < 0.5);
        assert!(dim_bound(1296, &Scalar::zero(), 2) >= 0.5);
        assert_eq!(min_n_for(&Scalar::int(2), 1, &Scalar::zero()).unwrap().n, 7);
    }

    #[test]
    fn monotone() {
        let mut prev = f64::INFINITY;
        for n in 7..60 {
            let b = dim_bound(n, &Scalar::zero(), 2);
            assert!(b < prev);
            prev = b;
        }
    }
}

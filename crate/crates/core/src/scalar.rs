//! Scalars that are either exact rationals or floats carrying an error radius.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("division by an interval that contains zero ({mid} +- {rad})")]
    UncertainDivisor { mid: f64, rad: f64 },
    #[error("sign of {0} is not determined")]
    UncertainSign(String),
    #[error("cannot parse scalar from {0:?}")]
    Parse(String),
    #[error("value {0} is not finite")]
    NotFinite(String),
}

/// Arithmetic mode of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(BigRational),
    /// `mid` with a rigorous bound `rad` on the distance to the true value.
    Approx { mid: f64, rad: f64 },
}

const EPS: f64 = f64::EPSILON;

fn slack(x: f64) -> f64 {
    x.abs() * EPS + f64::MIN_POSITIVE
}

fn up(x: f64) -> f64 {
    x * (1.0 + 4.0 * EPS) + f64::MIN_POSITIVE
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    match r.to_f64() {
        Some(v) if v.is_finite() => v,
        _ => {
            // very large numerators and denominators: scale down first
            let n = r.numer().bits() as i64;
            let d = r.denom().bits() as i64;
            let shift = n.min(d) - 60;
            if shift > 0 {
                let num = (r.numer() >> shift as usize).to_f64().unwrap_or(f64::NAN);
                let den = (r.denom() >> shift as usize).to_f64().unwrap_or(f64::NAN);
                num / den
            } else {
                f64::NAN
            }
        }
    }
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Scalar::Exact(rat(n, d))
    }

    pub fn exact(r: BigRational) -> Self {
        Scalar::Exact(r)
    }

    /// A float taken as exact data, radius zero.
    pub fn float(x: f64) -> Self {
        Scalar::Approx { mid: x, rad: 0.0 }
    }

    pub fn approx(mid: f64, rad: f64) -> Self {
        Scalar::Approx { mid, rad: rad.abs() }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Approx { .. } => None,
        }
    }

    pub fn mid(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational_to_f64(r),
            Scalar::Approx { mid, .. } => *mid,
        }
    }

    /// Error radius; for exact values this is the float conversion error.
    pub fn rad(&self) -> f64 {
        match self {
            Scalar::Exact(_) => 0.0,
            Scalar::Approx { rad, .. } => *rad,
        }
    }

    pub fn lower(&self) -> f64 {
        match self {
            Scalar::Exact(r) => {
                let m = rational_to_f64(r);
                m - slack(m)
            }
            Scalar::Approx { mid, rad } => mid - up(*rad),
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            Scalar::Exact(r) => {
                let m = rational_to_f64(r);
                m + slack(m)
            }
            Scalar::Approx { mid, rad } => mid + up(*rad),
        }
    }

    /// Upper bound on the absolute value.
    pub fn abs_upper(&self) -> f64 {
        self.upper().abs().max(self.lower().abs())
    }

    pub fn to_float(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => {
                let m = rational_to_f64(r);
                Scalar::Approx { mid: m, rad: slack(m) }
            }
            s => s.clone(),
        }
    }

    pub fn in_mode(&self, mode: Mode) -> Scalar {
        match mode {
            Mode::Exact => self.clone(),
            Mode::Float => self.to_float(),
        }
    }

    /// Sign if it is certain.
    pub fn sign(&self) -> Option<Ordering> {
        match self {
            Scalar::Exact(r) => Some(r.cmp(&BigRational::zero())),
            Scalar::Approx { mid, rad } => {
                if mid - up(*rad) > 0.0 {
                    Some(Ordering::Greater)
                } else if mid + up(*rad) < 0.0 {
                    Some(Ordering::Less)
                } else if *rad == 0.0 && *mid == 0.0 {
                    Some(Ordering::Equal)
                } else {
                    None
                }
            }
        }
    }

    pub fn is_positive(&self) -> bool {
        self.sign() == Some(Ordering::Greater)
    }

    pub fn is_negative(&self) -> bool {
        self.sign() == Some(Ordering::Less)
    }

    pub fn is_nonnegative(&self) -> bool {
        matches!(self.sign(), Some(Ordering::Greater) | Some(Ordering::Equal))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Approx { mid, rad } => *mid == 0.0 && *rad == 0.0,
        }
    }

    pub fn certainly_nonzero(&self) -> bool {
        matches!(self.sign(), Some(Ordering::Greater) | Some(Ordering::Less))
    }

    /// Certain comparison `self < other`.
    pub fn lt(&self, other: &Scalar) -> bool {
        (other - self).is_positive()
    }

    pub fn le(&self, other: &Scalar) -> bool {
        (other - self).is_nonnegative()
    }

    /// Comparison by exact value when both are exact, otherwise by midpoint.
    pub fn cmp_mid(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a.cmp(b),
            _ => self.mid().partial_cmp(&other.mid()).unwrap_or(Ordering::Equal),
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Approx { mid, rad } => {
                if mid.abs() >= *rad {
                    Scalar::Approx { mid: mid.abs(), rad: *rad }
                } else {
                    let hi = mid.abs() + rad;
                    Scalar::Approx { mid: hi / 2.0, rad: up(hi / 2.0) }
                }
            }
        }
    }

    /// Interval minimum: exact when both are exact.
    pub fn min(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a.min(b).clone()),
            _ => {
                let lo = self.lower().min(other.lower());
                let hi = self.upper().min(other.upper());
                Scalar::Approx { mid: 0.5 * (lo + hi), rad: up(0.5 * (hi - lo)) }
            }
        }
    }

    pub fn max(&self, other: &Scalar) -> Scalar {
        -(-self).min(&-other)
    }

    pub fn recip(&self) -> Result<Scalar, ScalarError> {
        Scalar::one().checked_div(self)
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar, ScalarError> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                if b.is_zero() {
                    Err(ScalarError::DivisionByZero)
                } else {
                    Ok(Scalar::Exact(a / b))
                }
            }
            _ => {
                let (a, ra) = (self.mid(), self.rad_total());
                let (b, rb) = (other.mid(), other.rad_total());
                if b.abs() <= rb || b == 0.0 {
                    return Err(ScalarError::UncertainDivisor { mid: b, rad: rb });
                }
                let mid = a / b;
                let rad = up((ra + mid.abs() * rb) / (b.abs() - up(rb)) + slack(mid));
                Ok(Scalar::Approx { mid, rad })
            }
        }
    }

    fn rad_total(&self) -> f64 {
        match self {
            Scalar::Exact(r) => slack(rational_to_f64(r)),
            Scalar::Approx { rad, .. } => *rad,
        }
    }

    pub fn pow_i(&self, k: i32) -> Result<Scalar, ScalarError> {
        if k < 0 {
            return self.recip()?.pow_i(-k);
        }
        match self {
            Scalar::Exact(r) => Ok(Scalar::Exact(Pow::pow(r, k as u32))),
            _ => {
                let mut acc = Scalar::one();
                for _ in 0..k {
                    acc = &acc * self;
                }
                Ok(acc)
            }
        }
    }

    /// Square root, exact for perfect squares.
    pub fn sqrt(&self) -> Result<Scalar, ScalarError> {
        self.nth_root(2)
    }

    /// Real d-th root of a nonnegative value, exact for perfect powers.
    pub fn nth_root(&self, d: u32) -> Result<Scalar, ScalarError> {
        if d == 1 {
            return Ok(self.clone());
        }
        if let Scalar::Exact(r) = self {
            if r.is_negative() {
                return Err(ScalarError::UncertainSign(format!("root of negative {r}")));
            }
            let n = r.numer().nth_root(d);
            let m = r.denom().nth_root(d);
            if Pow::pow(&n, d) == *r.numer() && Pow::pow(&m, d) == *r.denom() {
                return Ok(Scalar::Exact(BigRational::new(n, m)));
            }
        }
        let lo = self.lower().max(0.0);
        let hi = self.upper();
        if hi < 0.0 {
            return Err(ScalarError::UncertainSign(format!("root of negative {self}")));
        }
        let inv = 1.0 / d as f64;
        let rl = lo.powf(inv);
        let rh = hi.powf(inv);
        let mid = 0.5 * (rl + rh);
        Ok(Scalar::Approx { mid, rad: up(0.5 * (rh - rl) + 4.0 * slack(rh)) })
    }

    pub fn ln(&self) -> Result<Scalar, ScalarError> {
        let lo = self.lower();
        if lo <= 0.0 {
            return Err(ScalarError::UncertainSign(format!("log of {self}")));
        }
        let (a, b) = (lo.ln(), self.upper().ln());
        Ok(Scalar::Approx { mid: 0.5 * (a + b), rad: up(0.5 * (b - a) + 4.0 * slack(b.abs().max(a.abs()))) })
    }

    pub fn parse(s: &str) -> Result<Scalar, ScalarError> {
        parse_rational(s).map(Scalar::Exact)
    }
}

/// Parses `p/q`, integers and decimal literals (as exact rationals).
pub fn parse_rational(s: &str) -> Result<BigRational, ScalarError> {
    let t = s.trim();
    let err = || ScalarError::Parse(s.to_string());
    if let Some((p, q)) = t.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| err())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(err());
    }
    let digits = format!("{ip}{fp}");
    let n = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| err())?;
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(n);
    if scale >= 0 {
        r *= BigRational::from_integer(Pow::pow(&ten, scale as u32));
    } else {
        r /= BigRational::from_integer(Pow::pow(&ten, (-scale) as u32));
    }
    Ok(if neg { -r } else { r })
}

pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{}", format_rational(r)),
            Scalar::Approx { mid, rad } => write!(f, "{mid:e}+-{rad:.1e}"),
        }
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            (Scalar::Approx { mid: a, rad: r }, Scalar::Approx { mid: b, rad: s }) => a == b && r == s,
            _ => false,
        }
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::Exact(r)
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::int(n)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => ser.serialize_str(&format_rational(r)),
            Scalar::Approx { mid, rad } => {
                use serde::ser::SerializeStruct;
                let mut st = ser.serialize_struct("Approx", 2)?;
                st.serialize_field("mid", mid)?;
                st.serialize_field("rad", rad)?;
                st.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
            Approx { mid: f64, rad: f64 },
        }
        match Repr::deserialize(de)? {
            Repr::Text(s) => Scalar::parse(&s).map_err(serde::de::Error::custom),
            Repr::Int(n) => Ok(Scalar::int(n)),
            Repr::Approx { mid, rad } => Ok(Scalar::approx(mid, rad)),
        }
    }
}

fn add_impl(a: &Scalar, b: &Scalar) -> Scalar {
    match (a, b) {
        (Scalar::Exact(x), Scalar::Exact(y)) => Scalar::Exact(x + y),
        _ => {
            let mid = a.mid() + b.mid();
            Scalar::Approx { mid, rad: up(a.rad_total() + b.rad_total() + slack(mid)) }
        }
    }
}

fn mul_impl(a: &Scalar, b: &Scalar) -> Scalar {
    match (a, b) {
        (Scalar::Exact(x), Scalar::Exact(y)) => Scalar::Exact(x * y),
        _ => {
            if a.is_zero() || b.is_zero() {
                return Scalar::zero();
            }
            let (x, rx) = (a.mid(), a.rad_total());
            let (y, ry) = (b.mid(), b.rad_total());
            let mid = x * y;
            Scalar::Approx { mid, rad: up(x.abs() * ry + y.abs() * rx + rx * ry + slack(mid)) }
        }
    }
}

fn neg_impl(a: &Scalar) -> Scalar {
    match a {
        Scalar::Exact(x) => Scalar::Exact(-x),
        Scalar::Approx { mid, rad } => Scalar::Approx { mid: -mid, rad: *rad },
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, o: &Scalar) -> Scalar {
                $body(self, o)
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                $body(&self, &o)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: &Scalar) -> Scalar {
                $body(&self, o)
            }
        }
        impl $tr<Scalar> for &Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                $body(self, &o)
            }
        }
    };
}

binop!(Add, add, add_impl);
binop!(Sub, sub, |a: &Scalar, b: &Scalar| add_impl(a, &neg_impl(b)));
binop!(Mul, mul, mul_impl);
binop!(Div, div, |a: &Scalar, b: &Scalar| a.checked_div(b).expect("scalar division"));

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        neg_impl(&self)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        neg_impl(self)
    }
}

/// Complex scalar with real and imaginary parts of the same kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CScalar {
    pub re: Scalar,
    pub im: Scalar,
}

impl CScalar {
    pub fn new(re: Scalar, im: Scalar) -> Self {
        CScalar { re, im }
    }

    pub fn real(re: Scalar) -> Self {
        CScalar { re, im: Scalar::zero() }
    }

    pub fn i() -> Self {
        CScalar { re: Scalar::zero(), im: Scalar::one() }
    }

    pub fn from_c64(z: Complex64) -> Self {
        CScalar { re: Scalar::float(z.re), im: Scalar::float(z.im) }
    }

    pub fn conj(&self) -> Self {
        CScalar { re: self.re.clone(), im: -&self.im }
    }

    pub fn norm_sqr(&self) -> Scalar {
        &self.re * &self.re + &self.im * &self.im
    }
}

impl fmt::Display for CScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re, self.im)
    }
}

/// Field operations shared by real and complex scalars.
pub trait Entry: Clone + fmt::Debug + fmt::Display + PartialEq + Send + Sync + 'static {
    const IS_COMPLEX: bool;
    fn zero() -> Self;
    fn one() -> Self;
    fn from_scalar(s: Scalar) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn checked_div(&self, o: &Self) -> Result<Self, ScalarError>;
    fn is_exact(&self) -> bool;
    fn is_zero(&self) -> bool;
    fn certainly_nonzero(&self) -> bool;
    /// Upper bound on the modulus.
    fn abs_upper(&self) -> f64;
    /// Error radius of the modulus.
    fn radius(&self) -> f64;
    fn to_c64(&self) -> Complex64;
    fn to_float(&self) -> Self;
    fn conj(&self) -> Self;
    /// The scale `s` with `s^d = det` used to split off a unimodular part.
    fn canonical_scale(det: &Self, d: usize) -> Result<Self, ScalarError>;
}

impl Entry for Scalar {
    const IS_COMPLEX: bool = false;
    fn zero() -> Self {
        Scalar::zero()
    }
    fn one() -> Self {
        Scalar::one()
    }
    fn from_scalar(s: Scalar) -> Self {
        s
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn checked_div(&self, o: &Self) -> Result<Self, ScalarError> {
        Scalar::checked_div(self, o)
    }
    fn is_exact(&self) -> bool {
        Scalar::is_exact(self)
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
    fn certainly_nonzero(&self) -> bool {
        Scalar::certainly_nonzero(self)
    }
    fn abs_upper(&self) -> f64 {
        Scalar::abs_upper(self)
    }
    fn radius(&self) -> f64 {
        self.rad()
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.mid(), 0.0)
    }
    fn to_float(&self) -> Self {
        Scalar::to_float(self)
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn canonical_scale(det: &Self, d: usize) -> Result<Self, ScalarError> {
        let sign = det.sign().ok_or_else(|| ScalarError::UncertainSign(det.to_string()))?;
        let root = det.abs().nth_root(d as u32)?;
        Ok(match sign {
            Ordering::Less => -root,
            Ordering::Greater => root,
            Ordering::Equal => return Err(ScalarError::DivisionByZero),
        })
    }
}

impl Entry for CScalar {
    const IS_COMPLEX: bool = true;
    fn zero() -> Self {
        CScalar::real(Scalar::zero())
    }
    fn one() -> Self {
        CScalar::real(Scalar::one())
    }
    fn from_scalar(s: Scalar) -> Self {
        CScalar::real(s)
    }
    fn add(&self, o: &Self) -> Self {
        CScalar { re: &self.re + &o.re, im: &self.im + &o.im }
    }
    fn sub(&self, o: &Self) -> Self {
        CScalar { re: &self.re - &o.re, im: &self.im - &o.im }
    }
    fn mul(&self, o: &Self) -> Self {
        CScalar {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }
    fn neg(&self) -> Self {
        CScalar { re: -&self.re, im: -&self.im }
    }
    fn checked_div(&self, o: &Self) -> Result<Self, ScalarError> {
        let n = o.norm_sqr();
        let num = Entry::mul(self, &o.conj());
        Ok(CScalar { re: num.re.checked_div(&n)?, im: num.im.checked_div(&n)? })
    }
    fn is_exact(&self) -> bool {
        self.re.is_exact() && self.im.is_exact()
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn certainly_nonzero(&self) -> bool {
        self.re.certainly_nonzero() || self.im.certainly_nonzero()
    }
    fn abs_upper(&self) -> f64 {
        self.re.abs_upper().hypot(self.im.abs_upper())
    }
    fn radius(&self) -> f64 {
        self.re.rad().hypot(self.im.rad())
    }
    fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.mid(), self.im.mid())
    }
    fn to_float(&self) -> Self {
        CScalar { re: self.re.to_float(), im: self.im.to_float() }
    }
    fn conj(&self) -> Self {
        CScalar::conj(self)
    }
    fn canonical_scale(det: &Self, d: usize) -> Result<Self, ScalarError> {
        if d == 1 {
            return Ok(det.clone());
        }
        if det.im.is_zero() && det.re.is_positive() {
            return Ok(CScalar::real(det.re.nth_root(d as u32)?));
        }
        if !Entry::certainly_nonzero(det) {
            return Err(ScalarError::DivisionByZero);
        }
        // principal root: modulus |det|^(1/d), argument arg(det)/d
        let z = det.to_c64();
        let err = Entry::radius(det);
        let r = z.norm();
        let w = Complex64::from_polar(r.powf(1.0 / d as f64), z.arg() / d as f64);
        // |d/dz z^(1/d)| = |z|^(1/d - 1)/d
        let lip = r.powf(1.0 / d as f64 - 1.0) / d as f64;
        let rad = up(lip * err * 2.0 + 8.0 * slack(w.norm()));
        Ok(CScalar { re: Scalar::approx(w.re, rad), im: Scalar::approx(w.im, rad) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_forms() {
        assert_eq!(Scalar::parse("1/100").unwrap(), Scalar::ratio(1, 100));
        assert_eq!(Scalar::parse("-3").unwrap(), Scalar::int(-3));
        assert_eq!(Scalar::parse("0.25").unwrap(), Scalar::ratio(1, 4));
        assert_eq!(Scalar::parse("1e-3").unwrap(), Scalar::ratio(1, 1000));
        assert!(Scalar::parse("1/0").is_err());
        assert!(Scalar::parse("abc").is_err());
    }

    #[test]
    fn exact_roots() {
        assert_eq!(Scalar::ratio(4, 9).sqrt().unwrap(), Scalar::ratio(2, 3));
        assert_eq!(Scalar::ratio(1, 8).nth_root(3).unwrap(), Scalar::ratio(1, 2));
        let r = Scalar::int(2).sqrt().unwrap();
        assert!(!r.is_exact());
        assert!((r.mid() - 2f64.sqrt()).abs() <= r.rad());
    }

    #[test]
    fn uncertain_division_is_refused() {
        let z = Scalar::approx(0.0, 1e-3);
        assert!(Scalar::one().checked_div(&z).is_err());
        assert_eq!(Scalar::one().checked_div(&Scalar::zero()), Err(ScalarError::DivisionByZero));
    }

    #[test]
    fn serde_roundtrip() {
        let v = vec![Scalar::ratio(-7, 3), Scalar::approx(0.5, 1e-9)];
        let s = serde_json::to_string(&v).unwrap();
        let back: Vec<Scalar> = serde_json::from_str(&s).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn complex_root_is_principal() {
        let det = CScalar::new(Scalar::int(-1), Scalar::zero());
        let s = CScalar::canonical_scale(&det, 2).unwrap();
        assert!((s.to_c64() - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    fn enclosure(a: f64, b: f64) -> (Scalar, Scalar, BigRational, BigRational) {
        let ra = BigRational::from_float(a).unwrap();
        let rb = BigRational::from_float(b).unwrap();
        (Scalar::Exact(ra.clone()).to_float(), Scalar::Exact(rb.clone()).to_float(), ra, rb)
    }

    fn contains(s: &Scalar, r: &BigRational) -> bool {
        let lo = BigRational::from_float(s.lower()).unwrap();
        let hi = BigRational::from_float(s.upper()).unwrap();
        &lo <= r && r <= &hi
    }

    proptest! {
        #[test]
        fn float_ops_enclose_exact(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let (x, y, ra, rb) = enclosure(a, b);
            prop_assert!(contains(&(&x + &y), &(&ra + &rb)));
            prop_assert!(contains(&(&x - &y), &(&ra - &rb)));
            prop_assert!(contains(&(&x * &y), &(&ra * &rb)));
            if b.abs() > 1e-6 {
                prop_assert!(contains(&x.checked_div(&y).unwrap(), &(&ra / &rb)));
            }
        }

        #[test]
        fn exact_field_laws(a in -50i64..50, b in 1i64..50, c in -50i64..50, d in 1i64..50) {
            let x = Scalar::ratio(a, b);
            let y = Scalar::ratio(c, d);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            if !y.is_zero() {
                prop_assert_eq!(&(&x * &y) / &y, x.clone());
            }
        }
    }
}

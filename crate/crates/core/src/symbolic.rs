//! Subshifts of finite type: admissible pairs, finite words and left-infinite words.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("alphabet must be nonempty")]
    EmptyAlphabet,
    #[error("transition matrix is not {0}x{0}")]
    BadShape(usize),
    #[error("transition graph is not mixing")]
    NotMixing,
    #[error("letter {0} outside the alphabet")]
    BadLetter(usize),
    #[error("pair ({0}, {1}) is not admissible")]
    Inadmissible(usize, usize),
    #[error("word must be nonempty")]
    EmptyWord,
    #[error("cannot join: word ends in {0} but the extension starts with {1}")]
    Mismatch(usize, usize),
    #[error("metric base must lie in (0, 1)")]
    BadBase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicType {
    letters: usize,
    admissible: Vec<Vec<bool>>,
}

impl SymbolicType {
    /// Fails unless some power of the transition matrix is strictly positive.
    pub fn new(admissible: Vec<Vec<bool>>) -> Result<Self, SymbolicError> {
        let m = admissible.len();
        if m == 0 {
            return Err(SymbolicError::EmptyAlphabet);
        }
        if admissible.iter().any(|r| r.len() != m) {
            return Err(SymbolicError::BadShape(m));
        }
        let t = SymbolicType { letters: m, admissible };
        if !t.is_mixing() {
            return Err(SymbolicError::NotMixing);
        }
        Ok(t)
    }

    pub fn full_shift(m: usize) -> Self {
        SymbolicType { letters: m, admissible: vec![vec![true; m]; m] }
    }

    pub fn from_pairs(m: usize, pairs: &[(usize, usize)]) -> Result<Self, SymbolicError> {
        let mut adj = vec![vec![false; m]; m];
        for &(a, b) in pairs {
            if a >= m || b >= m {
                return Err(SymbolicError::BadLetter(a.max(b)));
            }
            adj[a][b] = true;
        }
        Self::new(adj)
    }

    pub fn letters(&self) -> usize {
        self.letters
    }

    pub fn is_full_shift(&self) -> bool {
        self.admissible.iter().flatten().all(|&x| x)
    }

    pub fn admissible(&self, a: usize, b: usize) -> bool {
        a < self.letters && b < self.letters && self.admissible[a][b]
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.letters {
            for b in 0..self.letters {
                if self.admissible[a][b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn is_mixing(&self) -> bool {
        let m = self.letters;
        let bound = (m - 1) * (m - 1) + 1;
        let mut p = self.admissible.clone();
        for _ in 0..bound {
            if p.iter().flatten().all(|&x| x) {
                return true;
            }
            p = (0..m)
                .map(|i| (0..m).map(|j| (0..m).any(|k| p[i][k] && self.admissible[k][j])).collect())
                .collect();
        }
        p.iter().flatten().all(|&x| x)
    }

    pub fn is_admissible_word(&self, w: &[usize]) -> bool {
        w.iter().all(|&a| a < self.letters) && w.windows(2).all(|p| self.admissible[p[0]][p[1]])
    }

    /// All admissible words with `n` letters in lexicographic order.
    pub fn enumerate(&self, n: usize) -> Vec<Word> {
        if n == 0 {
            return vec![Word(vec![])];
        }
        let mut words: Vec<Vec<usize>> = (0..self.letters).map(|a| vec![a]).collect();
        for _ in 1..n {
            words = words
                .into_iter()
                .flat_map(|w| {
                    let last = *w.last().unwrap();
                    (0..self.letters).filter(move |&b| self.admissible[last][b]).map(move |b| {
                        let mut x = w.clone();
                        x.push(b);
                        x
                    })
                })
                .collect();
        }
        words.into_iter().map(Word).collect()
    }

    /// Number of admissible words with `n` letters, from powers of the transition matrix.
    pub fn count_words(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let m = self.letters;
        let mut v = vec![1u128; m];
        for _ in 1..n {
            v = (0..m).map(|i| (0..m).filter(|&j| self.admissible[i][j]).map(|j| v[j]).sum()).collect();
        }
        v.iter().sum()
    }

    /// Product type on tuples of letters, encoded lexicographically.
    pub fn power(&self, d: usize) -> SymbolicType {
        let m = self.letters.pow(d as u32);
        let digits = |mut x: usize| {
            let mut out = vec![0; d];
            for i in (0..d).rev() {
                out[i] = x % self.letters;
                x /= self.letters;
            }
            out
        };
        let adm = (0..m)
            .map(|a| {
                let da = digits(a);
                (0..m)
                    .map(|b| {
                        let db = digits(b);
                        da.iter().zip(&db).all(|(&x, &y)| self.admissible[x][y])
                    })
                    .collect()
            })
            .collect();
        SymbolicType { letters: m, admissible: adm }
    }
}

/// Finite word read left to right.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// `self` followed by `other` sharing the junction letter.
    pub fn join(&self, other: &Word) -> Result<Word, SymbolicError> {
        match (self.last(), other.first()) {
            (Some(a), Some(b)) if a == b => {
                let mut v = self.0.clone();
                v.extend_from_slice(&other.0[1..]);
                Ok(Word(v))
            }
            (Some(a), Some(b)) => Err(SymbolicError::Mismatch(a, b)),
            (None, _) => Ok(other.clone()),
            (_, None) => Ok(self.clone()),
        }
    }
}

/// Left-infinite word `... period period recent`, whose last letter is `theta_0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeftWord {
    recent: Vec<usize>,
    period: Option<Vec<usize>>,
}

impl LeftWord {
    /// A truncated word with unknown remote past.
    pub fn finite(recent: Vec<usize>) -> Result<Self, SymbolicError> {
        if recent.is_empty() {
            return Err(SymbolicError::EmptyWord);
        }
        Ok(LeftWord { recent, period: None })
    }

    pub fn eventually_periodic(period: Vec<usize>, recent: Vec<usize>) -> Result<Self, SymbolicError> {
        if period.is_empty() {
            return Err(SymbolicError::EmptyWord);
        }
        Ok(LeftWord { recent, period: Some(period) })
    }

    /// `... a a a`.
    pub fn constant(a: usize) -> Self {
        LeftWord { recent: vec![a], period: Some(vec![a]) }
    }

    pub fn is_finite(&self) -> bool {
        self.period.is_none()
    }

    /// Number of letters that are known explicitly; `None` for infinite words.
    pub fn known_len(&self) -> Option<usize> {
        if self.period.is_some() {
            None
        } else {
            Some(self.recent.len())
        }
    }

    /// `theta_{-k}`, if known.
    pub fn letter(&self, k: usize) -> Option<usize> {
        let n = self.recent.len();
        if k < n {
            return Some(self.recent[n - 1 - k]);
        }
        let p = self.period.as_ref()?;
        let j = (k - n) % p.len();
        Some(p[p.len() - 1 - j])
    }

    pub fn last(&self) -> usize {
        self.letter(0).expect("left word has a last letter")
    }

    /// `(theta_{-n}, ..., theta_0)`.
    pub fn truncation(&self, n: usize) -> Option<Vec<usize>> {
        let mut v: Vec<usize> = (0..=n).map(|k| self.letter(k)).collect::<Option<_>>()?;
        v.reverse();
        Some(v)
    }

    /// `theta a` for a finite word starting at `theta_0`.
    pub fn concat(&self, a: &Word) -> Result<LeftWord, SymbolicError> {
        match a.first() {
            None => Ok(self.clone()),
            Some(b) if b == self.last() => {
                let mut recent = self.recent.clone();
                recent.extend_from_slice(&a.0[1..]);
                Ok(LeftWord { recent, period: self.period.clone() })
            }
            Some(b) => Err(SymbolicError::Mismatch(self.last(), b)),
        }
    }

    pub fn is_admissible(&self, t: &SymbolicType) -> bool {
        let span = match &self.period {
            None => self.recent.len(),
            Some(p) => self.recent.len() + 2 * p.len() + 1,
        };
        let mut w: Vec<usize> = (0..span).filter_map(|k| self.letter(k)).collect();
        w.reverse();
        t.is_admissible_word(&w)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `d_a(theta, theta') = a^k` where `k` is the first index at which the words differ.
///
/// For truncated words that agree as far as both are known, returns the upper bound
/// `a^(min known length)`.
pub fn theta_metric(x: &LeftWord, y: &LeftWord, base: &Scalar) -> Result<Scalar, SymbolicError> {
    if !(base.is_positive() && base.lt(&Scalar::one())) {
        return Err(SymbolicError::BadBase);
    }
    let horizon = match (&x.period, &y.period) {
        (Some(p), Some(q)) => x.recent.len().max(y.recent.len()) + p.len() * q.len() / gcd(p.len(), q.len()),
        _ => x.known_len().unwrap_or(usize::MAX).min(y.known_len().unwrap_or(usize::MAX)),
    };
    for k in 0..horizon {
        match (x.letter(k), y.letter(k)) {
            (Some(a), Some(b)) if a != b => return Ok(base.pow_i(k as i32).expect("positive base")),
            (Some(_), Some(_)) => {}
            _ => return Ok(base.pow_i(k as i32).expect("positive base")),
        }
    }
    if x.period.is_some() && y.period.is_some() {
        Ok(Scalar::zero())
    } else {
        Ok(base.pow_i(horizon as i32).expect("positive base"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mixing_check() {
        assert!(SymbolicType::new(vec![vec![false, true], vec![true, false]]).is_err());
        assert!(SymbolicType::new(vec![vec![true, true], vec![true, false]]).is_ok());
        assert_eq!(SymbolicType::new(vec![]), Err(SymbolicError::EmptyAlphabet));
    }

    #[test]
    fn counts_match_enumeration() {
        let t = SymbolicType::new(vec![vec![true, true], vec![true, false]]).unwrap();
        for n in 0..8 {
            assert_eq!(t.enumerate(n).len() as u128, t.count_words(n));
        }
        assert_eq!(SymbolicType::full_shift(6).count_words(3), 216);
    }

    #[test]
    fn metric_examples() {
        let half = Scalar::ratio(1, 2);
        let x = LeftWord::eventually_periodic(vec![0], vec![1, 0, 1]).unwrap();
        let y = LeftWord::eventually_periodic(vec![0], vec![0, 0, 1]).unwrap();
        assert_eq!(theta_metric(&x, &y, &half).unwrap(), Scalar::ratio(1, 4));
        assert_eq!(theta_metric(&x, &x, &half).unwrap(), Scalar::zero());
        let f = LeftWord::finite(vec![1, 1]).unwrap();
        let g = LeftWord::finite(vec![0, 1, 1]).unwrap();
        assert_eq!(theta_metric(&f, &g, &half).unwrap(), Scalar::ratio(1, 4));
        assert!(theta_metric(&f, &g, &Scalar::one()).is_err());
    }

    #[test]
    fn concat_checks_anchor() {
        let th = LeftWord::constant(2);
        let w = th.concat(&Word(vec![2, 0, 1])).unwrap();
        assert_eq!(w.truncation(3), Some(vec![2, 2, 0, 1]));
        assert_eq!(th.concat(&Word(vec![1, 0])), Err(SymbolicError::Mismatch(2, 1)));
    }

    proptest! {
        #[test]
        fn ultrametric(a in proptest::collection::vec(0usize..3, 1..8),
                       b in proptest::collection::vec(0usize..3, 1..8),
                       c in proptest::collection::vec(0usize..3, 1..8)) {
            let base = Scalar::ratio(1, 3);
            let w = |v: Vec<usize>| LeftWord::eventually_periodic(vec![0], v).unwrap();
            let (x, y, z) = (w(a), w(b), w(c));
            let dxz = theta_metric(&x, &z, &base).unwrap();
            let dxy = theta_metric(&x, &y, &base).unwrap();
            let dyz = theta_metric(&y, &z, &base).unwrap();
            prop_assert!(dxz.le(&dxy.max(&dyz)));
            prop_assert_eq!(dxy, theta_metric(&y, &x, &base).unwrap());
        }
    }
}

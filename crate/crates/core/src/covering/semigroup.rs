//! From a covering by words in a family to a one-step covering of a larger region.
//!
//! Each cell of `V` comes with a word `f_{i_n} ∘ ... ∘ f_{i_1}` sending it into `V`.
//! The intermediate images `J_j` are fattened by radii `delta_j` with
//! `delta_j = L_j delta_{j-1} + kappa`, so each single map carries one tube strictly into
//! the next and the last tube lands in `V`.

use serde::{Deserialize, Serialize};

use super::{check_covering, containment_margin, CoverageProof, CoveringCertificate, CoveringError, Region};
use crate::affine::RealAffine;
use crate::polytope::ConvexCell;
use crate::scalar::Scalar;

/// Covering of `V` in which cell `k` is sent into `V` by the word `words[k]`
/// (letters applied from first to last).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordCovering {
    pub region: Region,
    pub cells: Vec<ConvexCell>,
    pub family: Vec<RealAffine>,
    pub labels: Vec<String>,
    pub words: Vec<Vec<usize>>,
    /// Margin of each word image inside `V`.
    pub margins: Vec<Scalar>,
    pub coverage: CoverageProof,
}

pub fn word_map(family: &[RealAffine], word: &[usize]) -> Result<RealAffine, CoveringError> {
    let d = family[0].dim();
    let mut acc = RealAffine::identity(d);
    for &i in word {
        acc = family[i].compose(&acc)?;
    }
    Ok(acc)
}

/// Checks that each word sends its cell into `V` with positive margin.
pub fn check_word_covering(
    region: Region,
    cells: Vec<ConvexCell>,
    family: Vec<RealAffine>,
    labels: Vec<String>,
    words: Vec<Vec<usize>>,
    coverage: CoverageProof,
) -> Result<WordCovering, CoveringError> {
    if family.is_empty() {
        return Err(CoveringError::EmptyFamily);
    }
    let mut margins = Vec::new();
    for (k, (c, w)) in cells.iter().zip(&words).enumerate() {
        if w.is_empty() {
            return Err(CoveringError::Unassigned(k));
        }
        if let Some(&i) = w.iter().find(|&&i| i >= family.len()) {
            return Err(CoveringError::UnknownMap(i));
        }
        let img = c.affine_image(&word_map(&family, w)?)?;
        let m = containment_margin(&img, &region)?;
        if !m.is_positive() {
            return Err(CoveringError::NonPositiveMargin {
                cell: k,
                map: w[0],
                vertex: c.centroid().iter().map(|x| x.to_string()).collect(),
                margin: m.to_string(),
            });
        }
        margins.push(m);
    }
    Ok(WordCovering { region, cells, family, labels, words, margins, coverage })
}

/// Region `W` (a union of `V` and the tubes) with a one-step certificate for the family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupExpansion {
    pub certificate: CoveringCertificate,
    /// Radii `delta_j` of the tubes along each word.
    pub radii: Vec<Vec<Scalar>>,
    pub tubes: usize,
}

/// Builds the tube region and certifies it for single maps of the family.
///
/// `domain`, when given, must contain every tube.
pub fn expand_semigroup_cover(wc: &WordCovering, domain: Option<&ConvexCell>) -> Result<SemigroupExpansion, CoveringError> {
    let mut members: Vec<ConvexCell> = wc.region.members().into_iter().cloned().collect();
    let mut cells = wc.cells.clone();
    let mut assignment: Vec<Vec<usize>> = Vec::new();
    let mut tube_assignment: Vec<Vec<usize>> = Vec::new();
    let mut radii = Vec::new();
    let mut tubes = 0;
    for (k, w) in wc.words.iter().enumerate() {
        assignment.push(vec![w[0]]);
        let n = w.len();
        if n == 1 {
            radii.push(Vec::new());
            continue;
        }
        // Lipschitz constants of the maps acting on tubes 1..n-1, then the last map
        let lips: Vec<Scalar> = w.iter().map(|&i| wc.family[i].linear().inf_norm()).collect();
        // S = sum_j prod_{i=j+1}^{n-1} L_i over tubes j = 1..n-1 (letters 1..n-2 act between tubes)
        let mut s = Scalar::zero();
        for j in 1..n {
            let mut p = Scalar::one();
            for l in lips.iter().take(n - 1).skip(j) {
                p = p * l;
            }
            s = s + p;
        }
        let kappa = &wc.margins[k] / (Scalar::int(2) * &lips[n - 1] * s);
        let mut img = wc.cells[k].clone();
        let mut delta = Scalar::zero();
        let mut rs = Vec::new();
        for j in 1..n {
            img = img.affine_image(&wc.family[w[j - 1]])?;
            delta = if j == 1 { kappa.clone() } else { &lips[j - 1] * &delta + &kappa };
            let tube = img.fatten(&delta)?;
            if let Some(dom) = domain {
                if !dom.containment_margin(&tube).is_nonnegative() {
                    return Err(CoveringError::Chart(format!("tube {j} of cell {k} leaves the domain")));
                }
            }
            members.push(tube.clone());
            cells.push(tube);
            tube_assignment.push(vec![w[j]]);
            rs.push(delta.clone());
            tubes += 1;
        }
        radii.push(rs);
    }
    assignment.extend(tube_assignment);
    let region = if tubes == 0 { wc.region.clone() } else { Region::Union(members) };
    let coverage = if tubes == 0 { wc.coverage.clone() } else { CoverageProof::WithTubes { base: Box::new(wc.coverage.clone()), tubes } };
    let certificate = check_covering(region, cells, wc.family.clone(), wc.labels.clone(), assignment, coverage)?;
    Ok(SemigroupExpansion { certificate, radii, tubes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::subdivision_coverage;
    use crate::scalar::Scalar as S;

    #[test]
    fn length_two_word_in_one_dimension() {
        // f(x) = -x/2 + 6/5 does not return (0, 1) into itself, f∘f does
        let v = ConvexCell::interval(S::zero(), S::one()).unwrap();
        let f = RealAffine::line(S::ratio(-1, 2), S::ratio(6, 5)).unwrap();
        let cov = subdivision_coverage(&v, std::slice::from_ref(&v)).unwrap();
        assert!(check_word_covering(Region::Convex(v.clone()), vec![v.clone()], vec![f.clone()], vec!["f".into()], vec![vec![0]], cov.clone()).is_err());
        let wc = check_word_covering(Region::Convex(v.clone()), vec![v.clone()], vec![f], vec!["f".into()], vec![vec![0, 0]], cov).unwrap();
        let exp = expand_semigroup_cover(&wc, None).unwrap();
        assert_eq!(exp.tubes, 1);
        assert!(exp.certificate.delta.is_positive());
        assert_eq!(exp.certificate.brute_force(2000).0, 0);
        let narrow = ConvexCell::interval(S::zero(), S::ratio(11, 10)).unwrap();
        assert!(expand_semigroup_cover(&wc, Some(&narrow)).is_err());
    }

    #[test]
    fn single_letters_keep_region() {
        let v = ConvexCell::interval(S::zero(), S::one()).unwrap();
        let f = RealAffine::line(S::ratio(1, 3), S::ratio(1, 3)).unwrap();
        let cov = subdivision_coverage(&v, std::slice::from_ref(&v)).unwrap();
        let wc = check_word_covering(Region::Convex(v.clone()), vec![v.clone()], vec![f], vec!["f".into()], vec![vec![0]], cov).unwrap();
        let exp = expand_semigroup_cover(&wc, None).unwrap();
        assert_eq!(exp.certificate.region, Region::Convex(v));
        assert_eq!(exp.certificate.delta, S::ratio(1, 3));
    }

    #[test]
    fn tube_assignment_follows_cell_order() {
        let v = ConvexCell::interval(S::zero(), S::one()).unwrap();
        let halves = [ConvexCell::interval(S::zero(), S::ratio(1, 2)).unwrap(), ConvexCell::interval(S::ratio(1, 2), S::one()).unwrap()];
        let f = RealAffine::line(S::ratio(-1, 2), S::ratio(6, 5)).unwrap();
        let g = RealAffine::line(S::ratio(1, 3), S::ratio(1, 3)).unwrap();
        let cov = subdivision_coverage(&v, &halves).unwrap();
        let wc = check_word_covering(
            Region::Convex(v),
            halves.to_vec(),
            vec![f, g],
            vec!["f".into(), "g".into()],
            vec![vec![0, 0], vec![1, 1]],
            cov,
        )
        .unwrap();
        let exp = expand_semigroup_cover(&wc, None).unwrap();
        assert_eq!(exp.certificate.assignment, vec![vec![0], vec![1], vec![0], vec![1]]);
        assert_eq!(exp.certificate.brute_force(2000).0, 0);
    }
}

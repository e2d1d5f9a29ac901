//! The perturbed product systems and their certificates on `W_d × U`.
//!
//! The scale coordinate is shared by all factors, so cells, tubes and operators are fiber
//! products of planar ones. Every planar cell of `W_1` gets a word: contracting letters
//! while the scale is above a threshold `theta`, then one expanding letter. The planar word
//! covering is expanded into tubes, and the tubes are lifted to `R^{1+D} × U` with growing
//! chart radii. The perturbation by the SL parts is bounded explicitly at every step.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    alternation_bound, build_cells, build_k1prime, build_w1, build_wd, family, fiber_map, int, k1_maps, one_dim_actions, tuple_index,
    tuples, verify_lemma_6_4, Alternation, ConstructionError, ExampleParams, WdReport, LETTER_NAMES,
};
use crate::affine::RealAffine;
use crate::cantor::{AffineCantorSystem, BunchingReport, Field, ValidationReport};
use crate::covering::semigroup::{check_word_covering, expand_semigroup_cover, word_map, SemigroupExpansion, WordCovering};
use crate::covering::sl::{coords, expm, from_coords, lie_basis, logm, sl_cover_construct, CMatrix, SlCover};
use crate::covering::{check_covering, column_coverage, CoverageProof, CoveringCertificate, Region};
use crate::matrix::{co_norm, op_norm, RMat};
use crate::polytope::{ConvexCell, HalfSpace};
use crate::scalar::Scalar;

/// A planar cell together with the contracting letters applied before the expanding one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub slab: usize,
    /// Family `A_alpha` of the final expanding letter, `alpha in {1, 2}`.
    pub alpha: usize,
    /// Indices `6` (`F_1`) or `7` (`F_2`) into [`one_dim_actions`].
    pub prefix: Vec<usize>,
    pub cell: ConvexCell,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.prefix.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Planar word covering of `W_1` and its one-step expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarChains {
    pub theta: Scalar,
    pub slabs: Vec<(Scalar, Scalar)>,
    pub chains: Vec<Chain>,
    pub actions: Vec<RealAffine>,
    /// Word covering with the first letter of each family as the final letter.
    pub words: WordCovering,
    /// Smallest word margin over the three final letters, per chain.
    pub margins: Vec<Scalar>,
    pub expansion: SemigroupExpansion,
    /// One-step certificate of the expanded region with all three expanding letters of a
    /// family assigned to each chain cell.
    pub one_step: CoveringCertificate,
    /// Per chain, indices into `one_step.cells` of the members visited along its word.
    pub members: Vec<Vec<usize>>,
}

fn slab_cut(lo: &Scalar, hi: &Scalar) -> [HalfSpace; 2] {
    [
        HalfSpace::new(vec![int(-1), Scalar::zero()], -lo),
        HalfSpace::new(vec![int(1), Scalar::zero()], hi.clone()),
    ]
}

fn meet(a: &ConvexCell, extra: &[HalfSpace]) -> Option<ConvexCell> {
    let mut hs = a.halfspaces().to_vec();
    hs.extend_from_slice(extra);
    ConvexCell::from_halfspaces(hs, a.dim()).ok()
}

/// Builds the chains slab by slab and certifies words, coverage and tubes.
pub fn planar_chains(p: &ExampleParams) -> Result<PlanarChains, ConstructionError> {
    p.validate()?;
    let w1 = build_w1(p.n, &p.delta)?;
    let base = build_cells(p.n, &p.delta, &p.gamma)?;
    let actions = one_dim_actions(p.n, &p.tau)?;
    let lam = int(2) + &p.tau;
    let (a, b) = (p.a(), p.b());
    // the contracting cells start at 2a + gamma, the expanding ones end at b/N - gamma
    let lo = &a * int(2) + &p.gamma;
    let hi = &b / int(p.n) - &p.gamma;
    if !lo.lt(&hi) {
        return Err(ConstructionError::Degenerate("expanding and contracting cells do not overlap in scale".into()));
    }
    let theta = (&lo + &hi) / int(2);
    let mut slabs = vec![(a.clone(), theta.clone())];
    while slabs.last().expect("slab").1.lt(&b) {
        let prev = slabs.last().expect("slab").1.clone();
        slabs.push((prev.clone(), prev * &lam));
    }
    let mut chains: Vec<Chain> = Vec::new();
    let mut level: Vec<usize> = Vec::new();
    for i in 0..2 {
        if let Some(cell) = meet(&base[i], &slab_cut(&slabs[0].0, &slabs[0].1)) {
            level.push(chains.len());
            chains.push(Chain { slab: 0, alpha: i + 1, prefix: vec![], cell });
        }
    }
    for (k, (s0, s1)) in slabs.iter().enumerate().skip(1) {
        let mut next = Vec::new();
        for i in 0..2 {
            let f = &actions[6 + i];
            let f_inv = f.invert()?;
            for &c in &level {
                let pre = chains[c].cell.affine_image(&f_inv)?;
                let mut extra = pre.halfspaces().to_vec();
                extra.extend(slab_cut(s0, s1));
                if let Some(cell) = meet(&base[2 + i], &extra) {
                    let mut prefix = vec![6 + i];
                    prefix.extend(chains[c].prefix.iter().copied());
                    next.push(chains.len());
                    chains.push(Chain { slab: k, alpha: chains[c].alpha, prefix, cell });
                }
            }
        }
        level = next;
    }
    // every vertical line of each slab is covered by the chains of that slab
    let mut groups = Vec::new();
    let mut columns = 0;
    for (k, (s0, s1)) in slabs.iter().enumerate() {
        let region = meet(&w1, &slab_cut(s0, s1)).ok_or_else(|| ConstructionError::Degenerate(format!("slab {k} misses W_1")))?;
        let ids: Vec<usize> = (0..chains.len()).filter(|&c| chains[c].slab == k).collect();
        let cells: Vec<ConvexCell> = ids.iter().map(|&c| chains[c].cell.clone()).collect();
        match column_coverage(&region, &cells, &[(0..cells.len()).collect()])
            .map_err(|e| ConstructionError::Certificate { which: format!("slab {k} coverage"), source: e })?
        {
            CoverageProof::Columns { slabs, .. } => columns += slabs,
            _ => unreachable!("column coverage"),
        }
        groups.push(ids);
    }
    let coverage = CoverageProof::Columns { groups, slabs: columns };
    let labels: Vec<String> =
        LETTER_NAMES.iter().map(|s| s.to_string()).chain(["F1".to_string(), "F2".to_string()]).collect();
    let cells: Vec<ConvexCell> = chains.iter().map(|c| c.cell.clone()).collect();
    let mut per_final = Vec::new();
    for m in 0..3 {
        let words: Vec<Vec<usize>> = chains
            .iter()
            .map(|c| {
                let mut w = c.prefix.clone();
                w.push(family(c.alpha)[m]);
                w
            })
            .collect();
        let wc = check_word_covering(Region::Convex(w1.clone()), cells.clone(), actions.clone(), labels.clone(), words, coverage.clone())
            .map_err(|e| ConstructionError::Certificate { which: format!("planar words, final letter {}", m + 1), source: e })?;
        per_final.push(wc);
    }
    let margins: Vec<Scalar> = (0..chains.len())
        .map(|k| per_final.iter().map(|wc| wc.margins[k].clone()).reduce(|x, y| x.min(&y)).expect("three"))
        .collect();
    let mut words = per_final.swap_remove(0);
    words.margins = margins.clone();
    let expansion = expand_semigroup_cover(&words, None)
        .map_err(|e| ConstructionError::Certificate { which: "planar tubes".into(), source: e })?;
    let mut members = Vec::new();
    let mut offset = chains.len();
    for (k, c) in chains.iter().enumerate() {
        let mut m = vec![k];
        m.extend(offset..offset + c.len() - 1);
        offset += c.len() - 1;
        members.push(m);
    }
    let mut assignment = expansion.certificate.assignment.clone();
    for (k, c) in chains.iter().enumerate() {
        if c.prefix.is_empty() {
            assignment[k] = family(c.alpha).to_vec();
        }
    }
    for (k, c) in chains.iter().enumerate() {
        if !c.prefix.is_empty() {
            assignment[members[k][c.len() - 1]] = family(c.alpha).to_vec();
        }
    }
    let ec = &expansion.certificate;
    let one_step = check_covering(ec.region.clone(), ec.cells.clone(), ec.maps.clone(), ec.labels.clone(), assignment, ec.coverage.clone())
        .map_err(|e| ConstructionError::Certificate { which: "planar one-step".into(), source: e })?;
    Ok(PlanarChains { theta, slabs, chains, actions, words, margins, expansion, one_step, members })
}

/// `|A|_inf <= kappa |log A|_F`-type constant for the realified chart.
pub fn chart_constant(d: usize, field: Field) -> f64 {
    match field {
        Field::Real => (d as f64).sqrt(),
        Field::Complex => ((2 * d) as f64).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Contracting,
    Expanding,
}

/// One step of a lifted chain: member `step` is sent into the next member (or into
/// `W_D × B_r` after the expanding letter).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftStep {
    pub chain: usize,
    pub step: usize,
    pub kind: StepKind,
    /// Exact margin of the unperturbed planar image in the target member.
    pub w_margin: Scalar,
    /// Bound on the displacement caused by the SL coordinate.
    pub deviation: f64,
    /// Target chart radius minus the radius reached.
    pub u_slack: f64,
}

/// Word-level check on `V × B_r`: the whole perturbed word lands in `W_D × U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordSlack {
    pub chain: usize,
    pub margin: Scalar,
    pub deviation: f64,
}

/// Identity of a perturbed generator inside its family `H_alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Designation {
    pub alpha: Vec<usize>,
    pub member: Vec<usize>,
    pub letter: usize,
    pub matrix: usize,
}

/// The perturbed product system `K_D` and the unperturbed `K'_D`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbedSystems {
    pub field: Field,
    pub d: usize,
    /// Real dimension `D` of the systems.
    pub dim: usize,
    pub kd: AffineCantorSystem,
    pub kd_prime: AffineCantorSystem,
    pub designations: Vec<Designation>,
    /// Realified SL parts, indexed by `Designation::matrix`.
    #[serde(skip)]
    pub matrices: Vec<CMatrix>,
    /// Largest `| |det M_j| - 1 |`.
    pub det_drift: f64,
    /// Gap between distinct unperturbed pieces.
    pub piece_gap: f64,
    /// Sup-norm room of the unperturbed pieces inside the hull.
    pub hull_room: f64,
    /// Largest displacement of a hull point by a perturbed generator.
    pub max_shift: f64,
    pub bunching: BunchingReport,
    pub validation: Option<ValidationReport>,
}

impl PerturbedSystems {
    pub fn matrix_of(&self, letter: usize) -> Option<usize> {
        self.designations.iter().find(|x| x.letter == letter).map(|x| x.matrix)
    }

    pub fn designated(&self, alpha: &[usize], matrix: usize) -> Option<&Designation> {
        self.designations.iter().find(|x| x.alpha == alpha && x.matrix == matrix)
    }
}

/// Real matrix of a complex one acting on `(re z1, im z1, ...)`.
pub fn realify_c64(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// How `U` acts on the `R^D` coordinate.
pub fn acting_matrix(u: &CMatrix, field: Field) -> DMatrix<f64> {
    match field {
        Field::Real => u.map(|z| z.re),
        Field::Complex => realify_c64(u),
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Counting gate: the families `H_alpha` have `3^d` members, which must exceed the size of
/// the SL cover (`d^2` real, `2 d^2` complex).
pub fn counting_gate(d: usize, field: Field) -> Result<(), ConstructionError> {
    let need = match field {
        Field::Real => d * d,
        Field::Complex => 2 * d * d,
    };
    let have = 3usize.pow(d as u32);
    if have <= need {
        return Err(ConstructionError::Gate(format!("3^{d} = {have} <= {need}")));
    }
    Ok(())
}

/// Replaces the linear part `lambda I` of the first `matrices.len()` generators of every
/// `H_alpha` (lexicographic order) by `lambda M_j`; translations stay unchanged.
pub fn perturb_to_kd(p: &ExampleParams, d: usize, field: Field, matrices: &[CMatrix]) -> Result<PerturbedSystems, ConstructionError> {
    p.validate()?;
    counting_gate(d, field)?;
    let dim = match field {
        Field::Real => d,
        Field::Complex => 2 * d,
    };
    if matrices.iter().any(|m| m.nrows() != d || m.ncols() != d) {
        return Err(ConstructionError::InvalidParams(format!("matrices must be {d} x {d}")));
    }
    let det_drift = matrices.iter().map(|m| (m.determinant().norm() - 1.0).abs()).fold(0.0, f64::max);
    if det_drift > 1e-9 {
        return Err(ConstructionError::Perturbation(format!("determinant drift {det_drift:e}")));
    }
    let base = k1_maps(p.n, &p.tau)?;
    let lam = base[0].linear().get(0, 0).clone();
    let h = &p.hull_margin;
    let families = super::expanding_families(dim);
    let mut designations = Vec::new();
    for fam in &families {
        for (j, member) in fam.members.iter().take(matrices.len()).enumerate() {
            designations.push(Designation { alpha: fam.alpha.clone(), member: member.clone(), letter: tuple_index(member, 6), matrix: j });
        }
    }
    let real: Vec<DMatrix<f64>> = matrices.iter().map(|m| acting_matrix(m, field)).collect();
    let letters: Vec<RealAffine> = tuples(6, dim)
        .into_iter()
        .map(|t| {
            let letter = tuple_index(&t, 6);
            let translation: Vec<Scalar> = t.iter().map(|&l| base[l].translation()[0].clone()).collect();
            let linear = match designations.iter().find(|x| x.letter == letter) {
                Some(x) => RMat::from_fn(dim, dim, |r, c| Scalar::float(lam.mid() * real[x.matrix][(r, c)])),
                None => RMat::scalar(dim, lam.clone()),
            };
            RealAffine::new(linear, translation)
        })
        .collect::<Result<_, _>>()?;
    let hull = ConvexCell::cuboid(&vec![-h; dim], &vec![int(1) + h; dim])?;
    let kd = AffineCantorSystem::from_ifs(letters, hull)?.with_field(field);
    let kd_prime = build_k1prime(&p.tau)?.product_system(dim)?.with_field(field);
    // unperturbed planar pieces lam [-h, 1+h] + c: gaps and room inside the hull
    let mut ends: Vec<(f64, f64)> = base
        .iter()
        .map(|g| {
            let c = &g.translation()[0];
            ((c - &lam * h).lower(), (c + &lam * (int(1) + h)).upper())
        })
        .collect();
    ends.sort_by(|x, y| x.0.total_cmp(&y.0));
    let piece_gap = ends.windows(2).map(|w| w[1].0 - w[0].1).fold(f64::INFINITY, f64::min);
    let hull_room = ends.iter().map(|e| (e.0 + h.mid()).min(1.0 + h.mid() - e.1)).fold(f64::INFINITY, f64::min);
    let reach = 1.0 + h.upper();
    let max_shift = real
        .iter()
        .map(|m| lam.upper() * inf_norm(&(m - DMatrix::<f64>::identity(dim, dim))) * reach)
        .fold(0.0, f64::max);
    if !(2.0 * max_shift < piece_gap && max_shift < hull_room) {
        return Err(ConstructionError::Perturbation(format!(
            "shift {max_shift:e} against gap {piece_gap:e} and hull room {hull_room:e}"
        )));
    }
    // two-letter products have distortion at most kappa^2
    let mu = lam.upper();
    let kappa = real
        .iter()
        .map(|m| {
            let q = RMat::from_f64(m);
            op_norm(&q).upper() / co_norm(&q).lower()
        })
        .fold(1.0, f64::max);
    if kappa * kappa * mu >= 1.0 {
        return Err(ConstructionError::Perturbation(format!("bunching lost: kappa = {kappa}")));
    }
    let bunching = BunchingReport { kappa, mu, alpha: 1.0, n_g: 1, distortion: kappa * kappa };
    let validation = if dim <= 2 {
        let v = kd.validate();
        if !v.is_valid() {
            return Err(ConstructionError::Perturbation(format!("{} violations in K_{dim}", v.violations.len())));
        }
        Some(v)
    } else {
        None
    };
    Ok(PerturbedSystems {
        field,
        d,
        dim,
        kd,
        kd_prime,
        designations,
        matrices: matrices.to_vec(),
        det_drift,
        piece_gap,
        hull_room,
        max_shift,
        bunching,
        validation,
    })
}

/// Rank of the literal duplication `{e^{±i theta} M_j}` of a real cover inside the algebra
/// `{X : Re tr X = 0}` of `C^* SL(d, C)`; positive spanning needs full rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuplicationRank {
    pub rank: usize,
    pub algebra_dim: usize,
}

pub fn literal_duplication_rank(d: usize, rho: f64, r: f64) -> Result<DuplicationRank, ConstructionError> {
    let real = sl_cover_construct(d, Field::Real, r, rho, 0)?;
    let basis = lie_basis(d, Field::Complex);
    let i = Complex64::new(0.0, 1.0);
    let mut rows = Vec::new();
    for m in &real.matrices {
        let inv = m.clone().try_inverse().ok_or_else(|| ConstructionError::Degenerate("singular cover element".into()))?;
        let l = logm(&inv).ok_or_else(|| ConstructionError::Degenerate("cover element far from I".into()))?;
        for sign in [1.0, -1.0] {
            let x = &l + CMatrix::identity(d, d) * (i * sign * rho);
            rows.push(coords(&basis, &x));
        }
    }
    let m = DMatrix::from_fn(rows.len(), basis.len(), |a, b| rows[a][b]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-9 * top).count();
    Ok(DuplicationRank { rank, algebra_dim: basis.len() })
}

/// Certificate of the perturbed examples on `W_D × U`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MainCertificate {
    pub params: ExampleParams,
    pub d: usize,
    pub field: Field,
    pub dim: usize,
    pub sl: SlCover,
    pub wd_cover: WdReport,
    pub chains: PlanarChains,
    pub alternation: Alternation,
    pub systems: PerturbedSystems,
    /// Growth of the chart radius per tube.
    pub sigma: f64,
    pub kappa: f64,
    pub steps: Vec<LiftStep>,
    /// Smallest `w_margin - deviation` over the lifted steps.
    pub w_slack: f64,
    /// Smallest chart slack over the lifted steps.
    pub u_slack: f64,
    pub words: Vec<WordSlack>,
    /// Smallest `margin - deviation` over the word-level check.
    pub word_slack: f64,
    /// `r - after_step(r)`.
    pub u_word_slack: f64,
    /// Exact minimum margin of the fiber-product operators on the fiber-product members,
    /// computed directly in `R^{1+D}` when `D <= 2`.
    pub product_margin: Option<Scalar>,
    /// `eps3 = eps2 / 2` and the largest expanding deviation it must dominate.
    pub eps3: Scalar,
    pub expanding_deviation: f64,
    /// Complex runs: rank of the literal duplication of the real cover.
    pub duplication: Option<DuplicationRank>,
}

impl MainCertificate {
    pub fn passes(&self) -> bool {
        self.w_slack > 0.0
            && self.u_slack > 0.0
            && self.word_slack > 0.0
            && self.u_word_slack > 0.0
            && self.sl.c > 0.0
            && self.expanding_deviation < self.eps3.lower()
            && self.product_margin.as_ref().is_none_or(Scalar::is_positive)
    }

    /// Chart radius of member `step` of a chain.
    pub fn radius(&self, step: usize) -> f64 {
        self.params.r + step as f64 * self.sigma
    }

    /// Whether `(s, t, U)` lies in `V × B_r`.
    pub fn admits(&self, s: f64, t: &[f64], u: &CMatrix) -> bool {
        let w1 = match &self.chains.words.region {
            Region::Convex(c) => c,
            Region::Union(_) => unreachable!("W_1 is convex"),
        };
        t.iter().all(|&ti| w1.point_margin_f64(&[s, ti]) > 0.0) && SlCover::chart_norm(u).is_some_and(|n| n < self.params.r)
    }
}

fn planar_member(ch: &PlanarChains, chain: usize, step: usize) -> &ConvexCell {
    &ch.one_step.cells[ch.members[chain][step]]
}

/// Builds the SL cover, the perturbed systems and every sub-certificate.
pub fn certify_main(p: &ExampleParams, d: usize, field: Field) -> Result<MainCertificate, ConstructionError> {
    p.validate()?;
    counting_gate(d, field)?;
    let dim = match field {
        Field::Real => d,
        Field::Complex => 2 * d,
    };
    let sl = sl_cover_construct(d, field, p.r, p.rho, 2000)?;
    let wd_cover = verify_lemma_6_4(p, dim)?;
    let chains = planar_chains(p)?;
    let alternation = alternation_bound(p);
    let systems = perturb_to_kd(p, d, field, &sl.matrices)?;
    let kappa = chart_constant(d, field);
    let t_max = chains.chains.iter().map(Chain::len).max().unwrap_or(1);
    let sigma = sl.c / (2.0 * t_max as f64);
    let dev_u = |rho: f64| (kappa * rho).exp_m1();
    let dev_m = (kappa * (sl.rho + sl.matrix_error)).exp_m1();
    let e_max = chains.actions[6..].iter().map(|f| f.linear().get(1, 0).abs_upper()).fold(0.0, f64::max);
    let w1 = build_w1(p.n, &p.delta)?;
    let mut steps = Vec::new();
    for (k, c) in chains.chains.iter().enumerate() {
        let n = c.len();
        for j in 0..n {
            let src = planar_member(&chains, k, j);
            let rho = p.r + j as f64 * sigma;
            if j + 1 < n {
                let f = &chains.actions[c.prefix[j]];
                let target = planar_member(&chains, k, j + 1);
                let w_margin = target.containment_margin(&src.affine_image(f)?);
                let s_max = src.bbox_f64().1[0];
                steps.push(LiftStep {
                    chain: k,
                    step: j,
                    kind: StepKind::Contracting,
                    w_margin,
                    deviation: s_max * dev_u(rho) * e_max,
                    u_slack: sigma,
                });
            } else {
                for &g in &family(c.alpha) {
                    let img = src.affine_image(&chains.actions[g])?;
                    let w_margin = w1.containment_margin(&img);
                    let t_abs = img.vertices().iter().map(|v| v[1].abs_upper()).fold(0.0, f64::max);
                    steps.push(LiftStep {
                        chain: k,
                        step: j,
                        kind: StepKind::Expanding,
                        w_margin,
                        deviation: dev_m * t_abs,
                        u_slack: p.r - sl.after_step(rho),
                    });
                }
            }
        }
    }
    let w_slack = steps.iter().map(|s| s.w_margin.lower() - s.deviation).fold(f64::INFINITY, f64::min);
    let u_slack = steps.iter().map(|s| s.u_slack).fold(f64::INFINITY, f64::min);
    let expanding_deviation =
        steps.iter().filter(|s| s.kind == StepKind::Expanding).map(|s| s.deviation).fold(0.0, f64::max);
    // whole words from V x B_r: displacements propagate through the later letters
    let mut words = Vec::new();
    for (k, c) in chains.chains.iter().enumerate() {
        let n = c.len();
        let mut letters = c.prefix.clone();
        letters.push(family(c.alpha)[0]);
        let lips: Vec<f64> = letters.iter().map(|&l| chains.actions[l].linear().inf_norm().upper()).collect();
        let mut deviation = 0.0;
        for j in 0..n - 1 {
            let s_max = planar_member(&chains, k, j).bbox_f64().1[0];
            let grow: f64 = lips[j + 1..].iter().product();
            deviation += grow * s_max * dev_u(p.r) * e_max;
        }
        let last = planar_member(&chains, k, n - 1);
        let t_abs = family(c.alpha)
            .iter()
            .map(|&g| last.affine_image(&chains.actions[g]).map(|img| img.vertices().iter().map(|v| v[1].abs_upper()).fold(0.0, f64::max)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        deviation += dev_m * (t_abs + deviation);
        words.push(WordSlack { chain: k, margin: chains.margins[k].clone(), deviation });
    }
    let word_slack = words.iter().map(|w| w.margin.lower() - w.deviation).fold(f64::INFINITY, f64::min);
    let u_word_slack = p.r - sl.after_step(p.r);
    let product_margin = if dim <= 2 { Some(product_check(p, &chains, dim)?) } else { None };
    let eps3 = &wd_cover.eps2 / int(2);
    let duplication = match field {
        Field::Complex => Some(literal_duplication_rank(d, p.rho, p.r)?),
        Field::Real => None,
    };
    Ok(MainCertificate {
        params: p.clone(),
        d,
        field,
        dim,
        sl,
        wd_cover,
        chains,
        alternation,
        systems,
        sigma,
        kappa,
        steps,
        w_slack,
        u_slack,
        words,
        word_slack,
        u_word_slack,
        product_margin,
        eps3,
        expanding_deviation,
        duplication,
    })
}

/// The real flagship in dimension `p.d`.
pub fn verify_theorem_6_5(p: &ExampleParams) -> Result<MainCertificate, ConstructionError> {
    certify_main(p, p.d, Field::Real)
}

/// The holomorphic variant over `C^d`, realified to `R^{2d}`.
pub fn complex_variant(d: usize, p: &ExampleParams) -> Result<MainCertificate, ConstructionError> {
    certify_main(p, d, Field::Complex)
}

fn cartesian(groups: &[Vec<usize>], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                groups.iter().flatten().map(move |&x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Exact margins of fiber-product operators on fiber-product members in `R^{1+D}`.
fn product_check(p: &ExampleParams, ch: &PlanarChains, dim: usize) -> Result<Scalar, ConstructionError> {
    let wd = build_wd(p.n, &p.delta, dim)?;
    let mut jobs = Vec::new();
    for k in 0..ch.slabs.len() {
        let ids: Vec<usize> = (0..ch.chains.len()).filter(|&c| ch.chains[c].slab == k).collect();
        for t in cartesian(&[ids], dim) {
            jobs.push(t);
        }
    }
    let fp = |cells: Vec<&ConvexCell>| -> Option<ConvexCell> {
        if dim == 1 {
            return Some(cells[0].clone());
        }
        ConvexCell::fiber_product(&cells).ok()
    };
    let results: Vec<Option<Scalar>> = jobs
        .par_iter()
        .map(|t| -> Result<Option<Scalar>, ConstructionError> {
            let n = ch.chains[t[0]].len();
            let mut worst: Option<Scalar> = None;
            let mut push = |m: Scalar| worst = Some(worst.as_ref().map_or(m.clone(), |w: &Scalar| w.min(&m)));
            for j in 0..n {
                let Some(src) = fp(t.iter().map(|&c| planar_member(ch, c, j)).collect()) else { continue };
                if j + 1 < n {
                    let f = fiber_map(&t.iter().map(|&c| &ch.actions[ch.chains[c].prefix[j]]).collect::<Vec<_>>())?;
                    let Some(target) = fp(t.iter().map(|&c| planar_member(ch, c, j + 1)).collect()) else {
                        return Err(ConstructionError::Degenerate("empty lifted tube".into()));
                    };
                    push(target.containment_margin(&src.affine_image(&f)?));
                } else {
                    let fams: Vec<[usize; 3]> = t.iter().map(|&c| family(ch.chains[c].alpha)).collect();
                    for pick in tuples(3, dim) {
                        let f = fiber_map(&pick.iter().zip(&fams).map(|(&m, fam)| &ch.actions[fam[m]]).collect::<Vec<_>>())?;
                        push(wd.containment_margin(&src.affine_image(&f)?));
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<_, _>>()?;
    results
        .into_iter()
        .flatten()
        .reduce(|a, b| a.min(&b))
        .ok_or_else(|| ConstructionError::Degenerate("no lifted members".into()))
}

/// State of the action on `Aff(D)`: scale, translation and SL part.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub s: f64,
    pub t: Vec<f64>,
    pub u: CMatrix,
}

/// Which member of the lifted region a configuration sits in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    /// Planar chain per coordinate of `t`.
    pub chains: Vec<usize>,
    pub step: usize,
}

/// The operator that the certificate applies at a position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    /// Contracting letter of `K'_D`.
    Contract(usize),
    /// Expanding letter of `K_D`.
    Expand(usize),
}

impl MainCertificate {
    /// Positions containing `(s, t)` with chart radius below the member radius.
    pub fn positions(&self, x: &Config) -> Vec<Position> {
        let norm = match SlCover::chart_norm(&x.u) {
            Some(n) => n,
            None => return vec![],
        };
        let ch = &self.chains;
        let mut out = Vec::new();
        let t_max = ch.chains.iter().map(Chain::len).max().unwrap_or(1);
        for step in 0..t_max {
            if norm >= self.radius(step) {
                continue;
            }
            for k in 0..ch.slabs.len() {
                let ids: Vec<usize> = (0..ch.chains.len()).filter(|&c| ch.chains[c].slab == k && ch.chains[c].len() > step).collect();
                let mut pick = Vec::new();
                for &ti in &x.t {
                    match ids.iter().find(|&&c| planar_member(ch, c, step).point_margin_f64(&[x.s, ti]) >= 0.0) {
                        Some(&c) => pick.push(c),
                        None => break,
                    }
                }
                if pick.len() == x.t.len() {
                    out.push(Position { chains: pick, step });
                }
            }
        }
        out
    }

    /// Operator prescribed at a position for an SL part `u`.
    pub fn move_at(&self, pos: &Position, u: &CMatrix) -> Option<Move> {
        let ch = &self.chains;
        let c0 = &ch.chains[pos.chains[0]];
        if pos.step + 1 < c0.len() {
            let letters: Vec<usize> = pos.chains.iter().map(|&c| ch.chains[c].prefix[pos.step] - 6).collect();
            return Some(Move::Contract(tuple_index(&letters, 2)));
        }
        let alpha: Vec<usize> = pos.chains.iter().map(|&c| ch.chains[c].alpha).collect();
        let (j, _) = self.sl.best(u)?;
        self.systems.designated(&alpha, j).map(|x| Move::Expand(x.letter))
    }

    /// Applies a move with the perturbed generators, in floating point.
    pub fn apply(&self, m: &Move, x: &Config) -> Option<Config> {
        match m {
            Move::Contract(l) => {
                let g = &self.systems.kd_prime.letter_maps()?[*l];
                let lam = g.linear().get(0, 0).mid();
                let e: Vec<f64> = g.translation().iter().map(Scalar::mid).collect();
                let a = acting_matrix(&x.u, self.field);
                let ae = &a * nalgebra::DVector::from_vec(e);
                let t = x.t.iter().zip(ae.iter()).map(|(v, w)| v + x.s * w).collect();
                Some(Config { s: x.s * lam, t, u: x.u.clone() })
            }
            Move::Expand(l) => {
                let g = &self.systems.kd.letter_maps()?[*l];
                let lin = g.linear().to_f64();
                let inv = lin.clone().try_inverse()?;
                let lam = lin.determinant().abs().powf(1.0 / self.dim as f64);
                let diff = nalgebra::DVector::from_iterator(self.dim, x.t.iter().zip(g.translation()).map(|(v, c)| v - c.mid()));
                let t = (&inv * diff).iter().copied().collect();
                let u = match self.systems.matrix_of(*l) {
                    Some(j) => self.systems.matrices[j].clone().try_inverse()? * &x.u,
                    None => x.u.clone(),
                };
                Some(Config { s: x.s / lam, t, u })
            }
        }
    }

    /// Margin of a configuration inside the member at `pos` (negative outside).
    pub fn member_margin(&self, pos: &Position, x: &Config) -> f64 {
        let w = pos
            .chains
            .iter()
            .zip(&x.t)
            .map(|(&c, &ti)| planar_member(&self.chains, c, pos.step).point_margin_f64(&[x.s, ti]))
            .fold(f64::INFINITY, f64::min);
        let u = SlCover::chart_norm(&x.u).map_or(f64::NEG_INFINITY, |n| self.radius(pos.step) - n);
        w.min(u)
    }

    /// Margin of a configuration inside `W_D × B_r`.
    pub fn region_margin(&self, x: &Config) -> f64 {
        let w1 = match &self.chains.words.region {
            Region::Convex(c) => c,
            Region::Union(_) => unreachable!("W_1 is convex"),
        };
        let w = x.t.iter().map(|&ti| w1.point_margin_f64(&[x.s, ti])).fold(f64::INFINITY, f64::min);
        let u = SlCover::chart_norm(&x.u).map_or(f64::NEG_INFINITY, |n| self.params.r - n);
        w.min(u)
    }

    /// Margin of the image of `x` in the member the certificate sends it to.
    pub fn step_margin(&self, pos: &Position, x: &Config) -> Option<(Move, Config, f64)> {
        let m = self.move_at(pos, &x.u)?;
        let y = self.apply(&m, x)?;
        let n = self.chains.chains[pos.chains[0]].len();
        let margin = if pos.step + 1 < n {
            self.member_margin(&Position { chains: pos.chains.clone(), step: pos.step + 1 }, &y)
        } else {
            self.region_margin(&y)
        };
        Some((m, y, margin))
    }

    /// Random configuration in the chart ball of radius `radius`.
    pub fn random_sl(&self, rng: &mut impl Rng, radius: f64) -> CMatrix {
        let m = self.sl.basis.len();
        if m == 0 {
            return CMatrix::identity(self.d, self.d);
        }
        let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let scale = radius * rng.gen::<f64>().powf(1.0 / m as f64) / n;
        x.iter_mut().for_each(|v| *v *= scale);
        expm(&from_coords(&self.sl.basis, &x))
    }

    /// Samples configurations in every kind of member and applies the prescribed perturbed
    /// operator; returns `(counterexamples, samples)`.
    pub fn brute_force(&self, samples: usize, seed: u64) -> (usize, usize) {
        let ch = &self.chains;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        let mut done = 0;
        let mut attempts = 0;
        while done < samples && attempts < 50 * samples {
            attempts += 1;
            let k = rng.gen_range(0..ch.slabs.len());
            let ids: Vec<usize> = (0..ch.chains.len()).filter(|&c| ch.chains[c].slab == k).collect();
            let chains: Vec<usize> = (0..self.dim).map(|_| ids[rng.gen_range(0..ids.len())]).collect();
            let step = rng.gen_range(0..ch.chains[chains[0]].len());
            let boxes: Vec<(Vec<f64>, Vec<f64>)> = chains.iter().map(|&c| planar_member(ch, c, step).bbox_f64()).collect();
            let s0 = boxes.iter().map(|b| b.0[0]).fold(f64::NEG_INFINITY, f64::max);
            let s1 = boxes.iter().map(|b| b.1[0]).fold(f64::INFINITY, f64::min);
            if s0 >= s1 {
                continue;
            }
            let s = rng.gen_range(s0..=s1);
            let mut t = Vec::new();
            for (&c, b) in chains.iter().zip(&boxes) {
                let cell = planar_member(ch, c, step);
                let hit = (0..64).map(|_| rng.gen_range(b.0[1]..=b.1[1])).find(|&ti| cell.point_margin_f64(&[s, ti]) >= 0.0);
                match hit {
                    Some(ti) => t.push(ti),
                    None => break,
                }
            }
            if t.len() != self.dim {
                continue;
            }
            let u = self.random_sl(&mut rng, self.radius(step) * 0.999_999);
            let pos = Position { chains, step };
            let x = Config { s, t, u };
            done += 1;
            match self.step_margin(&pos, &x) {
                Some((_, _, m)) if m >= -1e-12 => {}
                _ => bad += 1,
            }
        }
        (bad, done)
    }
}

/// The configuration `(s, 0, Id)`.
pub fn scale_config(s: f64, dim: usize, d: usize) -> Config {
    Config { s, t: vec![0.0; dim], u: CMatrix::identity(d, d) }
}

/// Word of a chain as letter names.
pub fn chain_word(ch: &PlanarChains, k: usize) -> Vec<String> {
    let c = &ch.chains[k];
    let mut w: Vec<String> = c.prefix.iter().map(|&l| format!("F{}", l - 5)).collect();
    w.push(format!("A{}", c.alpha));
    w
}

/// Sanity check that the word map of a chain is the composition of its letters.
pub fn chain_map(ch: &PlanarChains, k: usize, last: usize) -> Result<RealAffine, ConstructionError> {
    let c = &ch.chains[k];
    let mut w = c.prefix.clone();
    w.push(family(c.alpha)[last]);
    Ok(word_map(&ch.actions, &w)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains_cover_and_expand() {
        let p = ExampleParams::flagship(2);
        let ch = planar_chains(&p).unwrap();
        assert!(ch.chains.iter().all(|c| c.len() <= 4));
        assert!(ch.margins.iter().all(Scalar::is_positive));
        assert!(ch.one_step.strong_delta.is_positive());
        let (bad, n) = ch.one_step.brute_force(2000);
        assert_eq!(bad, 0);
        assert!(n > 1000);
    }

    #[test]
    fn gates() {
        assert!(counting_gate(1, Field::Complex).is_ok());
        assert!(counting_gate(2, Field::Complex).is_ok());
        assert!(counting_gate(1, Field::Real).is_ok());
    }

    #[test]
    fn identity_matrices_leave_product() {
        let p = ExampleParams::flagship(2);
        let id = vec![CMatrix::identity(2, 2); 4];
        let s = perturb_to_kd(&p, 2, Field::Real, &id).unwrap();
        let plain = crate::constructions::build_k1(7, &p.tau).unwrap();
        assert_eq!(s.designations.len(), 16);
        assert_eq!(s.max_shift, 0.0);
        assert_eq!(s.kd.letters(), plain.letters().pow(2));
    }

    #[test]
    fn flagship_two() {
        let p = ExampleParams::flagship(2);
        let c = verify_theorem_6_5(&p).unwrap();
        eprintln!(
            "w {:e} u {:e} word {:e} uword {:e} prod {:?} sigma {:e} c {:e} eps3 {:e} dev {:e}",
            c.w_slack,
            c.u_slack,
            c.word_slack,
            c.u_word_slack,
            c.product_margin.as_ref().map(Scalar::mid),
            c.sigma,
            c.sl.c,
            c.eps3.mid(),
            c.expanding_deviation
        );
        assert!(c.passes());
        let (bad, n) = c.brute_force(2000, 1);
        assert_eq!(bad, 0, "{n}");
        assert!(c.admits(2.0, &[0.0, 0.0], &CMatrix::identity(2, 2)));
    }

    #[test]
    fn complex_one_and_two() {
        for d in [1, 2] {
            let t = std::time::Instant::now();
            let c = complex_variant(d, &ExampleParams::flagship(d)).unwrap();
            eprintln!("d={d} size {} w {:e} u {:e} dup {:?} {:?}", c.sl.size(), c.w_slack, c.u_slack, c.duplication, t.elapsed());
            assert!(c.passes());
            assert_eq!(c.sl.size(), 2 * d * d);
            assert_eq!(c.brute_force(500, 3).0, 0);
        }
    }
}

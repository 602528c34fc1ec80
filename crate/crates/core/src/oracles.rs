//! Brute-force reference computations: exhaustive supermodularity and
//! submodularity-ratio checks, walk expansions, structural inequalities and
//! model certification.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, SymMatrix};
use crate::model::{
    classify, conditional_variance, kappa_of, max_degree_of, sdd_rescaling, sdd_slack, walk_summable_margin,
    GgmModel, ModelClass, WALK_SUMMABLE_TOL,
};

/// Largest dimension accepted by the exhaustive routines.
pub const MAX_EXHAUSTIVE_DIM: usize = 16;

fn check_small(model: &GgmModel) -> Result<()> {
    if model.dim() > MAX_EXHAUSTIVE_DIM {
        return Err(Error::TooLarge(format!(
            "exhaustive check on n = {} (limit {MAX_EXHAUSTIVE_DIM})",
            model.dim()
        )));
    }
    Ok(())
}

/// `Var(X_i | X_S)` for every subset `S` of the other nodes, indexed by a
/// bitmask over `others` (bit `k` stands for `others[k]`).
struct VarTable {
    others: Vec<usize>,
    var: Vec<f64>,
}

impl VarTable {
    fn new(model: &GgmModel, i: usize) -> Result<Self> {
        let n = model.dim();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let p = others.len();
        let mut var = Vec::with_capacity(1 << p);
        for mask in 0u32..(1u32 << p) {
            var.push(conditional_variance(model, i, &Self::members(&others, mask))?);
        }
        Ok(VarTable { others, var })
    }

    fn members(others: &[usize], mask: u32) -> Vec<usize> {
        others
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &j)| j)
            .collect()
    }

    fn set(&self, mask: u32) -> Vec<usize> {
        Self::members(&self.others, mask)
    }

    fn full(&self) -> u32 {
        (1u32 << self.others.len()) - 1
    }
}

/// Outcome of [`check_supermodularity`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupermodularityReport {
    pub model_hash: String,
    pub node: usize,
    /// `min [Var(S) - Var(S∪j)] - [Var(T) - Var(T∪j)]` over `S ⊂ T`, `j ∉ T`;
    /// negative values are violations.
    pub worst_violation: f64,
    /// `(S, T, j)` attaining the minimum.
    pub witness: Option<(Vec<usize>, Vec<usize>, usize)>,
    pub checked: u64,
}

impl SupermodularityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.worst_violation >= -tol
    }
}

/// Exhaustive supermodularity check of `S ↦ Var(X_i | X_S)`.
pub fn check_supermodularity(model: &GgmModel, i: usize) -> Result<SupermodularityReport> {
    check_small(model)?;
    let table = VarTable::new(model, i)?;
    let p = table.others.len();
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut checked = 0u64;
    for t in 0..=table.full() {
        for jb in 0..p {
            let jbit = 1u32 << jb;
            if t & jbit != 0 {
                continue;
            }
            let dec_t = table.var[t as usize] - table.var[(t | jbit) as usize];
            // all submasks s of t, t itself included
            let mut s = t;
            loop {
                let dec_s = table.var[s as usize] - table.var[(s | jbit) as usize];
                let margin = dec_s - dec_t;
                checked += 1;
                if margin < worst {
                    worst = margin;
                    witness = Some((table.set(s), table.set(t), table.others[jb]));
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & t;
            }
        }
    }
    Ok(SupermodularityReport {
        model_hash: model.digest(),
        node: i,
        worst_violation: if checked == 0 { 0.0 } else { worst },
        witness,
        checked,
    })
}

/// Exact submodularity ratio `γ(k)` of `f(S) = Var(X_i) - Var(X_i | X_S)`:
/// the minimum of `Σ_{x∈S} [f(L∪x) - f(L)] / [f(L∪S) - f(L)]` over disjoint
/// `L` and nonempty `S` with `|S| ≤ k`. Pairs whose denominator is zero (up
/// to rounding) are skipped; `+∞` when none remain.
pub fn submodularity_ratio(model: &GgmModel, i: usize, k: usize) -> Result<f64> {
    check_small(model)?;
    let table = VarTable::new(model, i)?;
    let p = table.others.len();
    let scale = table.var[0];
    let mut gamma = f64::INFINITY;
    for l in 0..=table.full() {
        let rest = table.full() & !l;
        let mut s = rest;
        while s != 0 {
            if (s.count_ones() as usize) <= k {
                let denom = table.var[l as usize] - table.var[(l | s) as usize];
                if denom > 1e-14 * scale {
                    let num: f64 = (0..p)
                        .filter(|b| s >> b & 1 == 1)
                        .map(|b| table.var[l as usize] - table.var[(l | 1 << b) as usize])
                        .sum();
                    gamma = gamma.min(num / denom);
                }
            }
            s = (s - 1) & rest;
        }
    }
    Ok(gamma)
}

/// Partial sum `Σ_{k≤order} A_S^k` for a unit-diagonal attractive model,
/// where `A = I - Θ` and `A_S` is `A` with the rows and columns of `s`
/// removed (conditioning on `X_S`). Indices of the result follow the
/// remaining nodes in increasing order.
pub fn walk_expansion_partial(model: &GgmModel, s: &[usize], order: usize) -> Result<SymMatrix> {
    let theta = model.theta();
    let n = theta.dim();
    if !classify(model, WALK_SUMMABLE_TOL).attractive {
        return Err(Error::NotAttractive);
    }
    if (0..n).any(|i| (theta.get(i, i) - 1.0).abs() > 1e-12) {
        return Err(Error::BadParams("walk expansion needs a unit diagonal; rescale first".into()));
    }
    for &v in s {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, dim: n });
        }
    }
    let keep: Vec<usize> = (0..n).filter(|v| !s.contains(v)).collect();
    let r = keep.len();
    let a = Array2::<f64>::eye(r) - theta.submatrix(&keep).as_array();
    let mut term = Array2::<f64>::eye(r);
    let mut sum = term.clone();
    for _ in 0..order {
        term = term.dot(&a);
        sum += &term;
    }
    SymMatrix::new(sum)
}

/// `Var(X_i | X_S)` through the precision side: `[(Θ_RR)⁻¹]_ii` where `R`
/// is the complement of `S`. Independent of the covariance-side route used
/// by the model.
pub fn conditional_variance_via_precision(model: &GgmModel, i: usize, s: &[usize]) -> Result<f64> {
    let n = model.dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    if s.contains(&i) {
        return Err(Error::Invalid(format!("node {i} is in the conditioning set")));
    }
    let keep: Vec<usize> = (0..n).filter(|v| !s.contains(v)).collect();
    let pos = keep.iter().position(|&v| v == i).expect("i is kept");
    let chol = cholesky(&model.theta().submatrix(&keep)).map_err(|_| Error::SingularSubmatrix)?;
    let mut e = Array1::zeros(keep.len());
    e[pos] = 1.0;
    Ok(chol.solve(e.view())[pos])
}

/// One row of [`LemmaReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: String,
    /// Whether the model satisfies the lemma's hypotheses.
    pub applicable: bool,
    /// Set when the SDD lemmas were evaluated on the SDD rescaling of a
    /// walk-summable model.
    pub via_rescaling: bool,
    pub checked: u64,
    /// Smallest relative slack `(bound - value) / |bound|` over all checks
    /// (oriented so that negative means violated).
    pub worst_slack: f64,
}

impl LemmaCheck {
    fn new(lemma: &str, applicable: bool) -> Self {
        LemmaCheck {
            lemma: lemma.to_string(),
            applicable,
            via_rescaling: false,
            checked: 0,
            worst_slack: f64::INFINITY,
        }
    }

    fn record(&mut self, bound: f64, value: f64, upper: bool) {
        let gap = if upper { bound - value } else { value - bound };
        let rel = gap / bound.abs().max(f64::MIN_POSITIVE);
        self.checked += 1;
        self.worst_slack = self.worst_slack.min(rel);
    }

    /// Passed, or not applicable.
    pub fn passed(&self, tol: f64) -> bool {
        !self.applicable || self.worst_slack >= -tol
    }
}

/// Exhaustive structural-lemma report for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub model_hash: String,
    pub class: ModelClass,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self, tol: f64) -> bool {
        self.checks.iter().all(|c| c.passed(tol))
    }

    pub fn get(&self, lemma: &str) -> Option<&LemmaCheck> {
        self.checks.iter().find(|c| c.lemma == lemma)
    }
}

pub const LEMMA_NAMES: [&str; 7] = [
    "kappa_variance",
    "degree_bounded_by_kappa",
    "sdd_smooth_variance",
    "bound_after_conditioning_ij",
    "bound_after_conditioning",
    "griffiths",
    "kappa_variance_ferromagnetic",
];

/// Checks every structural inequality on `model`, exhaustively over nodes,
/// edges and conditioning sets. Inequalities whose hypotheses fail are still
/// evaluated and reported with `applicable = false`.
///
/// The three SDD inequalities are evaluated on the model itself when it is
/// SDD, on its SDD rescaling when it is only walk-summable, and on the raw
/// matrix otherwise.
pub fn verify_structural_lemmas(model: &GgmModel) -> Result<LemmaReport> {
    check_small(model)?;
    let n = model.dim();
    let class = classify(model, WALK_SUMMABLE_TOL);
    let kappa = kappa_of(model);
    let theta = model.theta();
    let mut kv = LemmaCheck::new(LEMMA_NAMES[0], true);
    let mut dk = LemmaCheck::new(LEMMA_NAMES[1], class.walk_summable);
    let mut griff = LemmaCheck::new(LEMMA_NAMES[5], class.attractive);
    let mut ferro = LemmaCheck::new(LEMMA_NAMES[6], class.attractive);

    if let Some(k) = kappa {
        let d = max_degree_of(model) as f64;
        dk.record(1.0 / (k * k), d, true);
        for i in 0..n {
            let table = VarTable::new(model, i)?;
            let nbrs = model.neighbors(i);
            let tii = theta.get(i, i);
            for mask in 0..=table.full() {
                let set = table.set(mask);
                let missing = nbrs.iter().filter(|j| !set.contains(j)).count();
                if missing == 0 {
                    continue;
                }
                let v = table.var[mask as usize];
                kv.record((1.0 + k * k) / tii, v, false);
                ferro.record((1.0 + missing as f64 * k * k) / tii, v, false);
            }
        }
    }
    let sigma = model.sigma();
    for i in 0..n {
        for j in (i + 1)..n {
            let corr = sigma.get(i, j) / (sigma.get(i, i) * sigma.get(j, j)).sqrt();
            griff.checked += 1;
            griff.worst_slack = griff.worst_slack.min(corr);
        }
    }

    let (target, via) = if class.sdd || !class.walk_summable {
        (model.clone(), false)
    } else {
        let d = sdd_rescaling(model)?;
        (model.rescaled(d.as_slice().expect("contiguous"))?, true)
    };
    let sdd_ok = class.walk_summable || class.sdd;
    let mut smooth = LemmaCheck::new(LEMMA_NAMES[2], sdd_ok);
    let mut after_ij = LemmaCheck::new(LEMMA_NAMES[3], sdd_ok);
    let mut after = LemmaCheck::new(LEMMA_NAMES[4], sdd_ok);
    for c in [&mut smooth, &mut after_ij, &mut after] {
        c.via_rescaling = via;
    }
    let (th, sg) = (target.theta(), target.sigma());
    let d = max_degree_of(&target) as f64;
    for i in 0..n {
        let nbrs = target.neighbors(i);
        let mut best = f64::INFINITY;
        for &j in nbrs {
            let inv = 1.0 / th.get(i, j).abs();
            smooth.record(inv + sg.get(j, j), sg.get(i, i), true);
            let v = conditional_variance(&target, i, &[j])?;
            after_ij.record(inv, v, true);
            best = best.min(v);
        }
        if !nbrs.is_empty() {
            after.record(4.0 * d / th.get(i, i), best, true);
        }
    }
    let mut checks = vec![kv, dk, smooth, after_ij, after, griff, ferro];
    for c in &mut checks {
        if c.checked == 0 {
            c.worst_slack = 0.0;
        }
    }
    Ok(LemmaReport {
        model_hash: model.digest(),
        class,
        checks,
    })
}

/// Quantities of the one-step contraction bound for the hybrid ℓ1 model,
/// with `Y = X_i`, anchor `Z = X_z` and `X` the remaining coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridStepCheck {
    /// `Var(E[Y|X,Z] | Z)`.
    pub initial: f64,
    /// `min_j Var(E[Y|X,Z] | Z, X_j)`.
    pub best_after: f64,
    /// `(RW)²` with `W = Σ|w_k|` and `R = max_k sqrt(Var(X_k | Z))`.
    pub rw_sq: f64,
}

impl HybridStepCheck {
    /// Right-hand side `V (1 - V / (RW)²)` of the contraction inequality.
    pub fn bound(&self) -> f64 {
        self.initial * (1.0 - self.initial / self.rw_sq)
    }
}

/// Population evaluation of the hybrid greedy step for node `i` and anchor `z`.
pub fn hybrid_step_check(model: &GgmModel, i: usize, z: usize) -> Result<HybridStepCheck> {
    let n = model.dim();
    for v in [i, z] {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, dim: n });
        }
    }
    if i == z || n < 3 {
        return Err(Error::BadParams("hybrid step needs n >= 3 and z != i".into()));
    }
    let theta = model.theta();
    let sigma = model.sigma();
    let xs: Vec<usize> = (0..n).filter(|&k| k != i && k != z).collect();
    let w: Array1<f64> = xs.iter().map(|&k| -theta.get(i, k) / theta.get(i, i)).collect();
    // covariance of X given Z
    let szz = sigma.get(z, z);
    let p = xs.len();
    let mut c = Array2::zeros((p, p));
    for (a, &ka) in xs.iter().enumerate() {
        for (b, &kb) in xs.iter().enumerate() {
            c[[a, b]] = sigma.get(ka, kb) - sigma.get(ka, z) * sigma.get(kb, z) / szz;
        }
    }
    let cw = c.dot(&w);
    let initial = w.dot(&cw);
    let mut best_after = initial;
    for jj in 0..p {
        if c[[jj, jj]] > 0.0 {
            best_after = best_after.min(initial - cw[jj] * cw[jj] / c[[jj, jj]]);
        }
    }
    let wsum: f64 = w.iter().map(|v| v.abs()).sum();
    let r = (0..p).map(|a| c[[a, a]]).fold(0.0, f64::max).sqrt();
    Ok(HybridStepCheck {
        initial,
        best_after,
        rw_sq: (r * wsum).powi(2),
    })
}

/// Class and rescaling certificate for a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub model_hash: String,
    pub n: usize,
    pub class: ModelClass,
    pub kappa: Option<f64>,
    pub max_degree: usize,
    pub sdd_slack: f64,
    pub walk_summable_margin: f64,
    /// `d` with `diag(d) Θ diag(d)` SDD, for walk-summable models.
    pub rescaling: Option<Vec<f64>>,
    pub rescaled_precision: Option<Vec<Vec<f64>>>,
    pub rescaled_sdd_slack: Option<f64>,
}

impl Certificate {
    pub fn summary(&self) -> String {
        let c = &self.class;
        let ws = if c.walk_summable { "walk-summable" } else { "not walk-summable" };
        let sdd = if c.sdd { "SDD" } else { "not SDD" };
        let att = if c.attractive { "attractive" } else { "not attractive" };
        format!("{ws}, {sdd}, {att}")
    }
}

pub fn certify(model: &GgmModel) -> Result<Certificate> {
    let class = classify(model, WALK_SUMMABLE_TOL);
    let (rescaling, rescaled_precision, rescaled_sdd_slack) = if class.walk_summable {
        let d = sdd_rescaling(model)?;
        let m = model.theta().congruence_diag(d.as_slice().expect("contiguous"));
        let slack = sdd_slack(&m);
        (Some(d.to_vec()), Some(m.to_rows()), Some(slack))
    } else {
        (None, None, None)
    };
    Ok(Certificate {
        model_hash: model.digest(),
        n: model.dim(),
        class,
        kappa: kappa_of(model),
        max_degree: max_degree_of(model),
        sdd_slack: sdd_slack(model.theta()),
        walk_summable_margin: walk_summable_margin(model.theta()),
        rescaling,
        rescaled_precision,
        rescaled_sdd_slack,
    })
}

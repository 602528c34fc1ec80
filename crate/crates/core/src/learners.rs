//! Structure learners: GreedyAndPrune, SearchAndValidate, WS-Regression
//! with HybridMB, plus merging, symmetrization and thresholding.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::regress::{
    l1_constrained_gram, omp, regress, Design, OmpPath, Source, L1_MAX_ITER, L1_TOL,
};
use crate::sampler::{split_ranges, SampleSet};

/// Input of a learner: samples or, for population mode, the exact covariance.
#[derive(Clone, Copy, Debug)]
pub enum Data<'a> {
    Samples(&'a SampleSet),
    Population(&'a SymMatrix),
}

impl<'a> Data<'a> {
    pub fn n(&self) -> usize {
        match self {
            Data::Samples(s) => s.n(),
            Data::Population(c) => c.dim(),
        }
    }

    pub fn whole(&self) -> Source<'a> {
        match *self {
            Data::Samples(s) => Source::Samples(s.data().view()),
            Data::Population(c) => Source::Population(c),
        }
    }

    /// `parts` contiguous sample blocks, or `parts` copies of the covariance.
    pub fn parts(&self, parts: usize, mode: SplitMode) -> Result<Vec<Source<'a>>> {
        match (*self, mode) {
            (Data::Samples(s), SplitMode::Split) => Ok(split_ranges(s.m(), parts)?
                .into_iter()
                .map(|r| Source::Samples(s.data().slice(s![r, ..])))
                .collect()),
            _ => Ok(vec![self.whole(); parts]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Disjoint sample blocks, as in the algorithm statements.
    #[default]
    Split,
    /// Reuse every sample in every role.
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    #[default]
    Intersection,
    Union,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Greedy,
    SearchAndValidate,
    Hybrid,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Greedy => "greedy",
            Algorithm::SearchAndValidate => "search_and_validate",
            Algorithm::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" | "greedy_and_prune" | "greedy-and-prune" => Ok(Algorithm::Greedy),
            "sav" | "search_and_validate" | "search-and-validate" => Ok(Algorithm::SearchAndValidate),
            "hybrid" | "hybrid_mb" | "hybrid-mb" => Ok(Algorithm::Hybrid),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// Default cap on the number of supports SearchAndValidate may enumerate.
pub const ENUMERATION_BUDGET: u128 = 2_000_000;

/// Learner parameters. Unset values fall back to the default schedules,
/// which need `kappa` (and `d` where the algorithm uses it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// `γ' = 2dγ²`; when set, WS-Regression runs without `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    #[serde(default)]
    pub split_mode: SplitMode,
    #[serde(default)]
    pub merge_rule: MergeRule,
    #[serde(default = "default_budget")]
    pub budget: u128,
}

fn default_budget() -> u128 {
    ENUMERATION_BUDGET
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            nu: None,
            t_steps: None,
            kappa: None,
            d: None,
            tau: None,
            gamma: None,
            gamma_prime: None,
            split_mode: SplitMode::Split,
            merge_rule: MergeRule::Intersection,
            budget: ENUMERATION_BUDGET,
        }
    }
}

impl LearnerConfig {
    /// Config carrying only the model constants `κ` and `d`.
    pub fn with_model(kappa: f64, d: usize) -> Self {
        LearnerConfig {
            kappa: Some(kappa),
            d: Some(d),
            ..Default::default()
        }
    }

    fn need_kappa(&self, what: &str) -> Result<f64> {
        match self.kappa {
            Some(k) if k > 0.0 && k <= 1.0 => Ok(k),
            Some(k) => Err(Error::BadParams(format!("kappa must lie in (0, 1], got {k}"))),
            None => Err(Error::BadParams(format!("{what} needs either its value or kappa"))),
        }
    }

    fn need_d(&self, what: &str) -> Result<usize> {
        self.d
            .ok_or_else(|| Error::BadParams(format!("{what} needs the degree bound d")))
    }

    fn nonneg(v: f64, name: &str) -> Result<f64> {
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::BadParams(format!("{name} must be nonnegative, got {v}")))
        }
    }

    /// `ν`, defaulting to `κ²/√32`.
    pub fn greedy_nu(&self) -> Result<f64> {
        match self.nu {
            Some(v) => Self::nonneg(v, "nu"),
            None => Ok(self.need_kappa("nu")?.powi(2) / 32f64.sqrt()),
        }
    }

    /// `T`, defaulting to `64 d log(4/κ²) + 1`, capped at `n - 1`.
    pub fn greedy_steps(&self, n: usize) -> Result<usize> {
        let t = match self.t_steps {
            Some(t) => t,
            None => {
                let k = self.need_kappa("T")?;
                let d = self.need_d("T")? as f64;
                (64.0 * d * (4.0 / (k * k)).ln()).floor().max(0.0) as usize + 1
            }
        };
        Ok(t.min(n.saturating_sub(1)))
    }

    /// `ν`, defaulting to `κ²/2`.
    pub fn sav_nu(&self) -> Result<f64> {
        match self.nu {
            Some(v) => Self::nonneg(v, "nu"),
            None => Ok(self.need_kappa("nu")?.powi(2) / 2.0),
        }
    }

    /// `τ`, defaulting to `κ²/8`.
    pub fn hybrid_tau(&self) -> Result<f64> {
        match self.tau {
            Some(v) => Self::nonneg(v, "tau"),
            None => Ok(self.need_kappa("tau")?.powi(2) / 8.0),
        }
    }

    /// Radius grid and exit test for WS-Regression.
    fn ws_grid(&self) -> Result<WsGrid> {
        if let Some(gp) = self.gamma_prime {
            if !(gp > 0.0) || !gp.is_finite() {
                return Err(Error::BadParams(format!("gamma' must be positive, got {gp}")));
            }
            return Ok(WsGrid::GammaPrime(gp));
        }
        let gamma = self.gamma.unwrap_or(2.0);
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::BadParams(format!("gamma must be positive, got {gamma}")));
        }
        // d = 0 would put s₀² at infinity; an empty graph is run as d = 1
        let d = self.need_d("WS-Regression")?.max(1);
        Ok(WsGrid::Degree { d, gamma })
    }
}

#[derive(Clone, Copy, Debug)]
enum WsGrid {
    Degree { d: usize, gamma: f64 },
    GammaPrime(f64),
}

impl WsGrid {
    /// `(λ², threshold factor)` for every grid point, given `Var̂(X_i|X_j)`.
    fn points(&self, v: f64) -> Vec<(f64, f64)> {
        match *self {
            WsGrid::Degree { d, gamma } => {
                let d = d as f64;
                let s0 = ((v / (8.0 * d)).ln().floor() - 1.0).exp();
                let last = ((8.0 * d).ln() + 3.0).ceil() as i32;
                (0..=last)
                    .map(|l| {
                        let s2 = s0 * (l as f64).exp();
                        (2.0 * d * s2, 2.0 * d * gamma * gamma)
                    })
                    .collect()
            }
            WsGrid::GammaPrime(gp) => {
                let base = (v / 4.0).ln().floor() - 1.0;
                let last = ((4.0 * gp).ln() + 3.0).ceil().max(0.0) as i32;
                (0..=last).map(|l| ((base + l as f64).exp(), gp)).collect()
            }
        }
    }
}

/// Estimated neighborhood of one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodEstimate {
    pub node: usize,
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub sigma_hat_sq: f64,
    /// Greedy only: OMP order and losses before pruning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omp_order: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omp_losses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl NeighborhoodEstimate {
    fn from_fit(node: usize, fit: &crate::regress::RegressionFit) -> Self {
        NeighborhoodEstimate {
            node,
            support: fit.support.clone(),
            coefficients: fit.coefficients.to_vec(),
            sigma_hat_sq: fit.sigma_hat_sq,
            omp_order: None,
            omp_losses: None,
            flags: Vec::new(),
        }
    }

    pub fn coef_of(&self, j: usize) -> f64 {
        self.support
            .iter()
            .position(|&c| c == j)
            .map_or(0.0, |p| self.coefficients[p])
    }
}

/// Symmetric precision estimate with its edge set.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionEstimate {
    pub theta_hat: SymMatrix,
    pub edges: Vec<(usize, usize)>,
}

fn others(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|&j| j != i).collect()
}

/// GreedyAndPrune for node `i`: `T` OMP steps, `Θ̂_ii` frozen from the OMP
/// support, then one pruning pass in insertion order against the current
/// support, and a final OLS on what is left.
pub fn greedy_and_prune(source: &Source<'_>, i: usize, nu: f64, t: usize) -> Result<NeighborhoodEstimate> {
    let n = source.dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let cands = others(n, i);
    let t = t.min(cands.len());
    let path: OmpPath = omp(source, i, &cands, t)?;
    let mut est = prune(source, i, &path.order, nu)?;
    est.omp_order = Some(path.order);
    est.omp_losses = Some(path.losses);
    Ok(est)
}

/// Pruning stage of GreedyAndPrune applied to an OMP selection `order`.
/// Any prefix of one OMP path is the path for that smaller `T`, so a grid
/// over `T` needs a single OMP run.
pub fn prune(source: &Source<'_>, i: usize, order: &[usize], nu: f64) -> Result<NeighborhoodEstimate> {
    let mut cols = order.to_vec();
    cols.push(i);
    let design = Design::new(source, &cols)?;
    let frozen = design.fit(i, order)?.sigma_hat_sq;
    let mut current = order.to_vec();
    let mut v_current = frozen;
    for &j in order {
        let reduced: Vec<usize> = current.iter().copied().filter(|&c| c != j).collect();
        let v_reduced = design.fit(i, &reduced)?.sigma_hat_sq;
        if v_reduced - v_current < nu * frozen {
            current = reduced;
            v_current = v_reduced;
        }
    }
    current.sort_unstable();
    let fit = regress(source, i, &current)?;
    Ok(NeighborhoodEstimate::from_fit(i, &fit))
}

/// Visits the `k`-subsets of `0..p` in colexicographic order.
fn for_each_subset(p: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > p {
        return;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c);
        // advance to the colex successor
        let mut j = 0;
        while j < k && (if j + 1 < k { c[j] + 1 == c[j + 1] } else { c[j] + 1 == p }) {
            j += 1;
        }
        if j == k {
            return;
        }
        c[j] += 1;
        for (q, v) in c.iter_mut().enumerate().take(j) {
            *v = q;
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let mut r: u128 = 1;
    for t in 0..k.min(n - k) {
        r = r.saturating_mul(n - t) / (t + 1);
    }
    r
}

/// Residual of regressing the last index on the others under the second
/// moment matrix `g`, via a small Cholesky factorization. `None` when the
/// regressors are numerically collinear.
fn subset_loss(g: &Array2<f64>, idx: &[usize]) -> Option<f64> {
    let k = idx.len();
    let mut l = [[0.0f64; 16]; 16];
    debug_assert!(k <= 16);
    for a in 0..k {
        for b in 0..=a {
            let mut v = g[[idx[a], idx[b]]];
            for c in 0..b {
                v -= l[a][c] * l[b][c];
            }
            if a == b {
                if a + 1 < k {
                    if !(v > 1e-12 * g[[idx[a], idx[a]]]) {
                        return None;
                    }
                    l[a][a] = v.sqrt();
                } else {
                    return Some(v.max(0.0));
                }
            } else {
                l[a][b] = v / l[b][b];
            }
        }
    }
    unreachable!()
}

/// SearchAndValidate for node `i` with degree bound `d`. `s1` is used for
/// the exhaustive ℓ0 search, `s2` for validation.
pub fn search_and_validate(
    s1: &Source<'_>,
    s2: &Source<'_>,
    i: usize,
    d: usize,
    nu: f64,
    budget: u128,
) -> Result<NeighborhoodEstimate> {
    let n = s1.dim();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    let cands = others(n, i);
    let p = cands.len();
    let d = d.min(p);
    if d > 15 {
        return Err(Error::TooLarge(format!("degree bound {d}")));
    }
    let needed: u128 = (0..=d).map(|k| binomial(p as u128, k as u128)).fold(0u128, |a, b| a.saturating_add(b));
    if needed > budget {
        return Err(Error::EnumerationBudgetExceeded { needed, budget });
    }
    for m in [s1.m(), s2.m()] {
        if let Some(m) = m {
            if m <= d + 1 {
                return Err(Error::TooFewSamples { needed: d + 1, have: m });
            }
        }
    }
    // second moments of (candidates, target)
    let mut cols = cands.clone();
    cols.push(i);
    let g = s1.gram(&cols);
    let mut best: Vec<(Vec<usize>, f64)> = Vec::with_capacity(d + 1);
    let mut idx = Vec::with_capacity(d + 1);
    for k in 0..=d {
        let mut champion: Option<(Vec<usize>, f64)> = None;
        for_each_subset(p, k, |sub| {
            idx.clear();
            idx.extend_from_slice(sub);
            idx.push(p);
            if let Some(loss) = subset_loss(&g, &idx) {
                if champion.as_ref().is_none_or(|(_, b)| loss < *b) {
                    champion = Some((sub.to_vec(), loss));
                }
            }
        });
        let (sub, loss) = champion.unwrap_or_else(|| (Vec::new(), f64::INFINITY));
        let prev = best.last().cloned();
        // w_k minimizes over supports of size at most k
        match prev {
            Some((ps, pl)) if !(loss < pl) => best.push((ps, pl)),
            _ => best.push((sub.iter().map(|&q| cands[q]).collect(), loss)),
        }
    }
    let supports: Vec<Vec<usize>> = best.into_iter().map(|(s, _)| s).collect();
    let var2 = |set: &[usize]| -> Result<f64> { Ok(regress(s2, i, set)?.sigma_hat_sq) };
    let mut chosen: Option<usize> = None;
    'outer: for d1 in 0..=d {
        for d2 in 0..=d {
            if d2 == d1 {
                continue;
            }
            let mut union: Vec<usize> = supports[d1].clone();
            for &c in &supports[d2] {
                if !union.contains(&c) {
                    union.push(c);
                }
            }
            union.sort_unstable();
            let full = var2(&union)?;
            for &j in &supports[d2] {
                if supports[d1].contains(&j) {
                    continue;
                }
                let reduced: Vec<usize> = union.iter().copied().filter(|&c| c != j).collect();
                if var2(&reduced)? - full > nu * full {
                    continue 'outer;
                }
            }
        }
        chosen = Some(d1);
        break;
    }
    let mut flags = Vec::new();
    let pick = chosen.unwrap_or_else(|| {
        flags.push("no_support_validated".to_string());
        d
    });
    let mut support = supports[pick].clone();
    support.sort_unstable();
    let whole_fit = regress(s2, i, &support)?;
    let mut est = NeighborhoodEstimate::from_fit(i, &whole_fit);
    est.flags = flags;
    Ok(est)
}

/// Output of WS-Regression for one node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WsResult {
    pub node: usize,
    /// Coefficients on the scaled regressors `X_k / scale_k`, indexed by node
    /// (zero at `node` and at `j`).
    pub w: Vec<f64>,
    /// Coefficient of `X_j`.
    pub a: f64,
    pub j: Option<usize>,
    pub sigma_hat_sq: f64,
    /// `sqrt(Var̂(X_k | X_j))`, zero where the column was dropped.
    pub scales: Vec<f64>,
    pub radius: f64,
    pub grid_exhausted: bool,
}

impl WsResult {
    /// Coefficients on the raw coordinates: `u_j = a`, `u_k = w_k / scale_k`.
    pub fn u(&self) -> Vec<f64> {
        let mut u: Vec<f64> = self
            .w
            .iter()
            .zip(&self.scales)
            .map(|(w, s)| if *s > 0.0 { w / s } else { 0.0 })
            .collect();
        if let Some(j) = self.j {
            u[j] = self.a;
        }
        u
    }
}

/// Steps 1–2 of WS-Regression for one node: the anchor `j`, the scales
/// and the scaled second moments on `s2`. The ℓ1 fits for any radius are
/// then solved by [`WsProblem::solve`].
pub struct WsProblem<'s, 'a> {
    s3: &'s Source<'a>,
    node: usize,
    n: usize,
    j: usize,
    v: f64,
    scales: Vec<f64>,
    cols: Vec<usize>,
    g: Array2<f64>,
    b: Array1<f64>,
    yy: f64,
}

/// One solved grid point.
#[derive(Clone, Debug)]
pub struct WsPoint {
    pub lambda_sq: f64,
    pub sigma_hat_sq: f64,
    coefficients: Array1<f64>,
}

impl<'s, 'a> WsProblem<'s, 'a> {
    /// `None` for a single-node model.
    pub fn new(sources: &'s [Source<'a>; 3], i: usize) -> Result<Option<Self>> {
        let [s1, s2, s3] = sources;
        let n = s1.dim();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        if n == 1 {
            return Ok(None);
        }
        let mut j = usize::MAX;
        let mut v = f64::INFINITY;
        for c in others(n, i) {
            let cv = regress(s1, i, &[c])?.sigma_hat_sq;
            if cv < v {
                v = cv;
                j = c;
            }
        }
        let mut scales = vec![0.0; n];
        let mut cols = Vec::new();
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let sk = regress(s1, k, &[j])?.sigma_hat_sq.sqrt();
            let base = regress(s1, k, &[])?.sigma_hat_sq.sqrt();
            // columns that are (numerically) multiples of X_j carry no information
            if sk > 1e-8 * base {
                scales[k] = sk;
                cols.push(k);
            }
        }
        let mut all = cols.clone();
        all.push(j);
        all.push(i);
        let raw = s2.gram(&all);
        let p = cols.len();
        // scaled columns, X_j last (free), target at p + 1
        let scale_of = |q: usize| if q < p { scales[cols[q]] } else { 1.0 };
        let mut g = Array2::zeros((p + 1, p + 1));
        let mut b = Array1::zeros(p + 1);
        for a in 0..=p {
            b[a] = raw[[a, p + 1]] / scale_of(a);
            for c in 0..=p {
                g[[a, c]] = raw[[a, c]] / (scale_of(a) * scale_of(c));
            }
        }
        Ok(Some(WsProblem {
            s3,
            node: i,
            n,
            j,
            v,
            scales,
            cols,
            g,
            b,
            yy: raw[[p + 1, p + 1]],
        }))
    }

    /// `Var̂(X_i | X_j)` from step 1.
    pub fn anchor_variance(&self) -> f64 {
        self.v
    }

    fn raw_coefficients(&self, scaled: &Array1<f64>) -> Array1<f64> {
        let p = self.cols.len();
        Array1::from_iter((0..=p).map(|q| if q < p { scaled[q] / self.scales[self.cols[q]] } else { scaled[q] }))
    }

    /// ℓ1 fit at `λ²` on `s2`, with σ̂² evaluated on `s3`.
    pub fn solve(&self, lambda_sq: f64) -> Result<WsPoint> {
        let p = self.cols.len();
        let fit = l1_constrained_gram(
            self.g.view(),
            self.b.view(),
            self.yy,
            Some(p),
            lambda_sq.sqrt(),
            L1_TOL,
            L1_MAX_ITER,
        )?;
        let mut design_cols = self.cols.clone();
        design_cols.push(self.j);
        let raw = self.raw_coefficients(&fit.coefficients);
        let sigma_hat_sq = self.s3.residual_variance(self.node, &design_cols, raw.view());
        Ok(WsPoint {
            lambda_sq,
            sigma_hat_sq,
            coefficients: fit.coefficients,
        })
    }

    pub fn result(&self, pt: &WsPoint, grid_exhausted: bool) -> WsResult {
        let p = self.cols.len();
        let mut w = vec![0.0; self.n];
        for (q, &k) in self.cols.iter().enumerate() {
            w[k] = pt.coefficients[q];
        }
        WsResult {
            node: self.node,
            w,
            a: pt.coefficients[p],
            j: Some(self.j),
            sigma_hat_sq: pt.sigma_hat_sq,
            scales: self.scales.clone(),
            radius: pt.lambda_sq.sqrt(),
            grid_exhausted,
        }
    }
}

fn single_node_ws(s3: &Source<'_>, i: usize) -> Result<WsResult> {
    Ok(WsResult {
        node: i,
        w: vec![0.0],
        a: 0.0,
        j: None,
        sigma_hat_sq: regress(s3, i, &[])?.sigma_hat_sq,
        scales: vec![0.0],
        radius: 0.0,
        grid_exhausted: false,
    })
}

/// WS-Regression for node `i` on three sources (step 1 on `s1`, ℓ1 fits on
/// `s2`, σ̂² on `s3`).
pub fn ws_regression(sources: &[Source<'_>; 3], i: usize, cfg: &LearnerConfig) -> Result<WsResult> {
    let grid = cfg.ws_grid()?;
    let Some(prob) = WsProblem::new(sources, i)? else {
        return single_node_ws(&sources[2], i);
    };
    let mut last = None;
    for (lambda_sq, factor) in grid.points(prob.anchor_variance()) {
        let pt = prob.solve(lambda_sq)?;
        let done = lambda_sq >= factor * pt.sigma_hat_sq;
        last = Some((pt, done));
        if done {
            break;
        }
    }
    let (pt, done) = last.expect("grid is nonempty");
    Ok(prob.result(&pt, !done))
}

/// WS-Regression in γ'-mode for several `γ'` at once. The radius grid does
/// not depend on `γ'`, so each radius is solved once.
pub fn ws_regression_multi(sources: &[Source<'_>; 3], i: usize, gamma_primes: &[f64]) -> Result<Vec<WsResult>> {
    let Some(prob) = WsProblem::new(sources, i)? else {
        let r = single_node_ws(&sources[2], i)?;
        return Ok(vec![r; gamma_primes.len()]);
    };
    let grids: Vec<Vec<(f64, f64)>> = gamma_primes
        .iter()
        .map(|&gp| WsGrid::GammaPrime(gp).points(prob.anchor_variance()))
        .collect();
    let mut solved: Vec<WsPoint> = Vec::new();
    let mut out = Vec::with_capacity(grids.len());
    for grid in &grids {
        let mut last = None;
        for (l, &(lambda_sq, factor)) in grid.iter().enumerate() {
            if l == solved.len() {
                solved.push(prob.solve(lambda_sq)?);
            }
            let done = lambda_sq >= factor * solved[l].sigma_hat_sq;
            last = Some((l, done));
            if done {
                break;
            }
        }
        let (l, done) = last.expect("grid is nonempty");
        out.push(prob.result(&solved[l], !done));
    }
    Ok(out)
}

/// HybridMB edge selection and `Θ̂` assembly from per-node WS-Regression.
pub fn hybrid_from_ws(results: &[WsResult], tau: f64) -> Result<PrecisionEstimate> {
    let n = results.len();
    let us: Vec<Vec<f64>> = results.iter().map(WsResult::u).collect();
    let sig: Vec<f64> = results.iter().map(|r| r.sigma_hat_sq).collect();
    let mut theta = Array2::zeros((n, n));
    for i in 0..n {
        if !(sig[i] > 0.0) {
            return Err(Error::ZeroDiagonal(i));
        }
        theta[[i, i]] = 1.0 / sig[i];
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let (uab, uba) = (us[a][b], us[b][a]);
            if uab == 0.0 || uba == 0.0 {
                continue;
            }
            if uab * uab * sig[b] >= tau * sig[a] && uba * uba * sig[a] >= tau * sig[b] {
                edges.push((a, b));
                let ca = -uab * theta[[a, a]];
                let cb = -uba * theta[[b, b]];
                let v = if ca.abs() <= cb.abs() { ca } else { cb };
                theta[[a, b]] = v;
                theta[[b, a]] = v;
            }
        }
    }
    Ok(PrecisionEstimate {
        theta_hat: SymMatrix::new(theta)?,
        edges,
    })
}

/// Combines per-node neighborhoods into a symmetric estimate.
///
/// `Θ̂_ii = 1/σ̂²(i)`, directed candidates `-coef_i(j) Θ̂_ii`, and the
/// smaller-magnitude candidate wins. Under the union rule an edge found from
/// one side only keeps that side's value.
pub fn merge_and_symmetrize(nbhds: &[NeighborhoodEstimate], rule: MergeRule) -> Result<PrecisionEstimate> {
    let n = nbhds.len();
    let mut by_node: Vec<Option<&NeighborhoodEstimate>> = vec![None; n];
    for e in nbhds {
        if e.node >= n {
            return Err(Error::IndexOutOfRange { index: e.node, dim: n });
        }
        by_node[e.node] = Some(e);
    }
    let mut rows = Vec::with_capacity(n);
    for (i, e) in by_node.iter().enumerate() {
        rows.push(e.ok_or(Error::MissingNode(i))?);
    }
    let mut theta = Array2::zeros((n, n));
    for (i, e) in rows.iter().enumerate() {
        if !(e.sigma_hat_sq > 0.0) || !e.sigma_hat_sq.is_finite() {
            return Err(Error::ZeroDiagonal(i));
        }
        theta[[i, i]] = 1.0 / e.sigma_hat_sq;
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let in_i = rows[i].support.contains(&j);
            let in_j = rows[j].support.contains(&i);
            let keep = match rule {
                MergeRule::Intersection => in_i && in_j,
                MergeRule::Union => in_i || in_j,
            };
            if !keep {
                continue;
            }
            let ci = -rows[i].coef_of(j) * theta[[i, i]];
            let cj = -rows[j].coef_of(i) * theta[[j, j]];
            let v = match (in_i, in_j) {
                (true, true) => {
                    if ci.abs() <= cj.abs() {
                        ci
                    } else {
                        cj
                    }
                }
                (true, false) => ci,
                _ => cj,
            };
            theta[[i, j]] = v;
            theta[[j, i]] = v;
            edges.push((i, j));
        }
    }
    Ok(PrecisionEstimate {
        theta_hat: SymMatrix::new(theta)?,
        edges,
    })
}

/// Edges with `|Θ̂_ij| / sqrt(Θ̂_ii Θ̂_jj) > κ/2`.
pub fn threshold_edges(est: &PrecisionEstimate, kappa: f64) -> Vec<(usize, usize)> {
    let t = &est.theta_hat;
    let n = t.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let norm = (t.get(i, i) * t.get(j, j)).sqrt();
            if t.get(i, j).abs() / norm > kappa / 2.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Everything a learner run produces.
#[derive(Clone, Debug)]
pub struct LearnOutput {
    pub algorithm: Algorithm,
    pub estimate: PrecisionEstimate,
    pub per_node: Vec<serde_json::Value>,
}

fn collect<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n)
        .into_par_iter()
        .map(|i| f(i).map_err(|e| e.at_node(i)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Runs a learner on every node (in parallel) and merges the results.
pub fn learn(data: &Data<'_>, algorithm: Algorithm, cfg: &LearnerConfig) -> Result<LearnOutput> {
    let n = data.n();
    match algorithm {
        Algorithm::Greedy => {
            let nu = cfg.greedy_nu()?;
            let t = cfg.greedy_steps(n)?;
            let src = data.whole();
            let nb = collect(n, |i| greedy_and_prune(&src, i, nu, t))?;
            finish_neighborhoods(algorithm, nb, cfg.merge_rule)
        }
        Algorithm::SearchAndValidate => {
            let nu = cfg.sav_nu()?;
            let d = cfg.need_d("SearchAndValidate")?;
            let parts = data.parts(2, cfg.split_mode)?;
            let nb = collect(n, |i| search_and_validate(&parts[0], &parts[1], i, d, nu, cfg.budget))?;
            finish_neighborhoods(algorithm, nb, cfg.merge_rule)
        }
        Algorithm::Hybrid => {
            let tau = cfg.hybrid_tau()?;
            let parts = data.parts(3, cfg.split_mode)?;
            let srcs = [parts[0], parts[1], parts[2]];
            let ws = collect(n, |i| ws_regression(&srcs, i, cfg))?;
            let estimate = hybrid_from_ws(&ws, tau)?;
            let per_node = ws.iter().map(|r| serde_json::to_value(r).expect("serializable")).collect();
            Ok(LearnOutput {
                algorithm,
                estimate,
                per_node,
            })
        }
    }
}

fn finish_neighborhoods(algorithm: Algorithm, nb: Vec<NeighborhoodEstimate>, rule: MergeRule) -> Result<LearnOutput> {
    let estimate = merge_and_symmetrize(&nb, rule)?;
    let per_node = nb.iter().map(|e| serde_json::to_value(e).expect("serializable")).collect();
    Ok(LearnOutput {
        algorithm,
        estimate,
        per_node,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{counterexample, gaussian_walk, path_cliques};
    use crate::model::{conditional_coefficients, kappa_of, max_degree_of, GgmModel};
    use crate::sampler::sample;
    use ndarray::array;
    use std::collections::BTreeMap;

    fn model(a: Array2<f64>) -> GgmModel {
        GgmModel::from_precision(SymMatrix::new(a).unwrap()).unwrap()
    }

    fn chain(n: usize) -> GgmModel {
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            a[[i, i]] = 2.0;
            if i + 1 < n {
                a[[i, i + 1]] = -1.0;
                a[[i + 1, i]] = -1.0;
            }
        }
        model(a)
    }

    #[test]
    fn colex_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 3], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_subset(5, 0, |s| {
            assert!(s.is_empty());
            count += 1
        });
        assert_eq!(count, 1);
        assert_eq!(binomial(63, 4), 595_665);
    }

    #[test]
    fn greedy_chain_population() {
        let m = chain(3);
        let k = kappa_of(&m).unwrap();
        let est = greedy_and_prune(&Source::Population(m.sigma()), 1, k * k / 32f64.sqrt(), 2).unwrap();
        assert_eq!(est.support, vec![0, 2]);
    }

    #[test]
    fn greedy_identity_prunes_everything() {
        let m = model(Array2::eye(4));
        for i in 0..4 {
            let est = greedy_and_prune(&Source::Population(m.sigma()), i, 0.01, 2).unwrap();
            assert!(est.support.is_empty());
            assert!((est.sigma_hat_sq - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_single_node() {
        let m = model(array![[2.0]]);
        let est = greedy_and_prune(&Source::Population(m.sigma()), 0, 0.1, 5).unwrap();
        assert!(est.support.is_empty());
    }

    #[test]
    fn greedy_path_cliques_samples() {
        let m = path_cliques(64, 4, 0.95, true).unwrap();
        let k = kappa_of(&m).unwrap();
        let set = sample(&m, 300, 1).unwrap();
        let cfg = LearnerConfig::with_model(k, max_degree_of(&m));
        let out = learn(&Data::Samples(&set), Algorithm::Greedy, &cfg).unwrap();
        let found = threshold_edges(&out.estimate, k);
        let truth = m.edges();
        let wrong = found.iter().filter(|e| !truth.contains(e)).count() + truth.iter().filter(|e| !found.contains(e)).count();
        assert!(2.0 * wrong as f64 / 64.0 <= 1.0, "{wrong} wrong edges");
    }

    #[test]
    fn prune_on_prefix_matches_shorter_run() {
        let m = path_cliques(16, 4, 0.7, true).unwrap();
        let set = sample(&m, 200, 9).unwrap();
        let src = Data::Samples(&set).whole();
        let long = greedy_and_prune(&src, 5, 0.02, 8).unwrap();
        let order = long.omp_order.unwrap();
        for t in [0, 3, 6] {
            let short = greedy_and_prune(&src, 5, 0.02, t).unwrap();
            assert_eq!(prune(&src, 5, &order[..t], 0.02).unwrap().support, short.support);
        }
    }

    #[test]
    fn ws_multi_matches_single() {
        let m = gaussian_walk(12, 4).unwrap();
        let set = sample(&m, 300, 5).unwrap();
        let parts = Data::Samples(&set).parts(3, SplitMode::Single).unwrap();
        let srcs = [parts[0], parts[1], parts[2]];
        let gps = [1.0, 4.0, 32.0];
        let multi = ws_regression_multi(&srcs, 3, &gps).unwrap();
        for (gp, r) in gps.iter().zip(&multi) {
            let cfg = LearnerConfig {
                gamma_prime: Some(*gp),
                ..Default::default()
            };
            assert_eq!(&ws_regression(&srcs, 3, &cfg).unwrap(), r);
        }
    }

    #[test]
    fn sav_identity_returns_empty() {
        let m = model(Array2::eye(4));
        let pop = Source::Population(m.sigma());
        for i in 0..4 {
            assert!(search_and_validate(&pop, &pop, i, 2, 0.1, ENUMERATION_BUDGET).unwrap().support.is_empty());
        }
    }

    #[test]
    fn sav_no_submodularity_population() {
        let m = counterexample("no_submodularity", &BTreeMap::new()).unwrap();
        let k = kappa_of(&m).unwrap();
        let pop = Source::Population(m.sigma());
        let est = search_and_validate(&pop, &pop, 0, 2, k * k / 2.0, ENUMERATION_BUDGET).unwrap();
        assert_eq!(est.support, vec![1, 2]);
    }

    #[test]
    fn sav_chain_samples() {
        let m = chain(5);
        let set = sample(&m, 2000, 3).unwrap();
        let data = Data::Samples(&set);
        let parts = data.parts(2, SplitMode::Split).unwrap();
        let k = kappa_of(&m).unwrap();
        let est = search_and_validate(&parts[0], &parts[1], 2, 2, k * k / 2.0, ENUMERATION_BUDGET).unwrap();
        assert_eq!(est.support, vec![1, 3]);
    }

    #[test]
    fn sav_budget() {
        let m = model(Array2::eye(30));
        let pop = Source::Population(m.sigma());
        assert!(matches!(
            search_and_validate(&pop, &pop, 0, 8, 0.1, ENUMERATION_BUDGET),
            Err(Error::EnumerationBudgetExceeded { .. })
        ));
    }

    #[test]
    fn ws_chain_population() {
        let m = chain(3);
        let pop = Source::Population(m.sigma());
        let cfg = LearnerConfig {
            d: Some(2),
            gamma: Some(2f64.sqrt()),
            ..Default::default()
        };
        let r = ws_regression(&[pop, pop, pop], 1, &cfg).unwrap();
        assert!(!r.grid_exhausted);
        let theta_ii = m.theta().get(1, 1);
        assert!(r.sigma_hat_sq * theta_ii >= 0.5 && r.sigma_hat_sq * theta_ii <= 2.0);
        let exact = conditional_coefficients(&m, 1, &[0, 2]).unwrap();
        let u = r.u();
        // Var(E[X_i|X_~i] - prediction) under the exact covariance
        let diff = array![exact[0] - u[0], exact[1] - u[2]];
        let sub = m.sigma().submatrix(&[0, 2]);
        let risk = diff.dot(&sub.matvec(diff.view()));
        assert!(risk <= 1e-6, "{risk}");
    }

    #[test]
    fn ws_isolated_node() {
        let m = model(array![[1.0, 0.0, 0.0], [0.0, 2.0, -1.0], [0.0, -1.0, 2.0]]);
        let pop = Source::Population(m.sigma());
        let cfg = LearnerConfig {
            d: Some(1),
            ..Default::default()
        };
        let r = ws_regression(&[pop, pop, pop], 0, &cfg).unwrap();
        assert!(r.u().iter().all(|v| v.abs() < 1e-6));
        assert!((r.sigma_hat_sq - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ws_gaussian_walk_samples() {
        let m = gaussian_walk(32, 32).unwrap();
        let set = sample(&m, 600, 2).unwrap();
        let data = Data::Samples(&set);
        let parts = data.parts(3, SplitMode::Split).unwrap();
        let cfg = LearnerConfig {
            d: Some(2),
            gamma: Some(2f64.sqrt()),
            ..Default::default()
        };
        let i = 15;
        let r = ws_regression(&[parts[0], parts[1], parts[2]], i, &cfg).unwrap();
        let u = Array1::from(r.u());
        let mut exact = Array1::zeros(32);
        for k in 0..32 {
            if k != i {
                exact[k] = -m.theta().get(i, k) / m.theta().get(i, i);
            }
        }
        let diff = &exact - &u;
        let risk = diff.dot(&m.sigma().matvec(diff.view()));
        let sigma2 = 1.0 / m.theta().get(i, i);
        assert!(risk <= 0.1 * sigma2, "risk {risk} vs {sigma2}");
    }

    #[test]
    fn hybrid_chain_population() {
        let m = chain(4);
        let cfg = LearnerConfig::with_model(kappa_of(&m).unwrap(), max_degree_of(&m));
        let out = learn(&Data::Population(m.sigma()), Algorithm::Hybrid, &cfg).unwrap();
        assert_eq!(out.estimate.edges, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn hybrid_identity_samples() {
        let m = model(Array2::eye(5));
        let set = sample(&m, 3000, 4).unwrap();
        let cfg = LearnerConfig {
            tau: Some(0.01),
            d: Some(1),
            ..Default::default()
        };
        let out = learn(&Data::Samples(&set), Algorithm::Hybrid, &cfg).unwrap();
        assert!(out.estimate.edges.is_empty(), "{:?}", out.estimate.edges);
    }

    #[test]
    fn hybrid_tau_zero_keeps_all_nonzero_pairs() {
        let r = |node: usize, w: Vec<f64>, j: usize, a: f64| WsResult {
            node,
            w,
            a,
            j: Some(j),
            sigma_hat_sq: 1.0,
            scales: vec![1.0; 3],
            radius: 1.0,
            grid_exhausted: false,
        };
        let res = vec![
            r(0, vec![0.0, 0.0, 1e-9], 1, 0.3),
            r(1, vec![0.0, 0.0, 0.0], 0, 0.2),
            r(2, vec![1e-7, 0.0, 0.0], 0, 0.0),
        ];
        let est = hybrid_from_ws(&res, 0.0).unwrap();
        assert_eq!(est.edges, vec![(0, 1)]);
        let est = hybrid_from_ws(&res, 0.0).unwrap();
        assert!((est.theta_hat.get(0, 1) + 0.2).abs() < 1e-15);
    }

    fn nb(node: usize, support: Vec<usize>, coefficients: Vec<f64>, s: f64) -> NeighborhoodEstimate {
        NeighborhoodEstimate {
            node,
            support,
            coefficients,
            sigma_hat_sq: s,
            omp_order: None,
            omp_losses: None,
            flags: vec![],
        }
    }

    #[test]
    fn merge_examples() {
        let est = merge_and_symmetrize(
            &[nb(0, vec![1], vec![0.5], 0.5), nb(1, vec![0], vec![0.5], 0.5)],
            MergeRule::Intersection,
        )
        .unwrap();
        assert_eq!(est.theta_hat.get(0, 1), -1.0);
        assert_eq!(est.edges, vec![(0, 1)]);
        let one_sided = [nb(0, vec![1], vec![0.5], 0.5), nb(1, vec![], vec![], 0.5)];
        let est = merge_and_symmetrize(&one_sided, MergeRule::Intersection).unwrap();
        assert!(est.edges.is_empty());
        assert_eq!(est.theta_hat.get(0, 1), 0.0);
        let est = merge_and_symmetrize(&one_sided, MergeRule::Union).unwrap();
        assert_eq!(est.theta_hat.get(0, 1), -1.0);
        assert!(matches!(
            merge_and_symmetrize(&[nb(0, vec![], vec![], 1.0), nb(0, vec![], vec![], 1.0)], MergeRule::Union),
            Err(Error::MissingNode(1))
        ));
    }

    #[test]
    fn merge_population_chain_is_exact() {
        let m = chain(5);
        let cfg = LearnerConfig::with_model(kappa_of(&m).unwrap(), max_degree_of(&m));
        let out = learn(&Data::Population(m.sigma()), Algorithm::Greedy, &cfg).unwrap();
        for (a, b) in out.estimate.theta_hat.as_array().iter().zip(m.theta().as_array().iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn threshold_examples() {
        let m = path_cliques(16, 4, 0.7, true).unwrap();
        let k = kappa_of(&m).unwrap();
        let est = PrecisionEstimate {
            theta_hat: m.theta().clone(),
            edges: vec![],
        };
        assert_eq!(threshold_edges(&est, k), m.edges());
        let id = PrecisionEstimate {
            theta_hat: SymMatrix::identity(3),
            edges: vec![],
        };
        assert!(threshold_edges(&id, 0.3).is_empty());
        let kappa = 0.4;
        let mut t = Array2::eye(3);
        t[[0, 1]] = 0.49 * kappa;
        t[[1, 0]] = 0.49 * kappa;
        t[[0, 2]] = 0.51 * kappa;
        t[[2, 0]] = 0.51 * kappa;
        let est = PrecisionEstimate {
            theta_hat: SymMatrix::new(t).unwrap(),
            edges: vec![],
        };
        assert_eq!(threshold_edges(&est, kappa), vec![(0, 2)]);
    }

    #[test]
    fn learners_on_single_node() {
        let m = model(array![[3.0]]);
        let cfg = LearnerConfig {
            d: Some(1),
            ..LearnerConfig::with_model(0.5, 1)
        };
        for algo in [Algorithm::Greedy, Algorithm::SearchAndValidate, Algorithm::Hybrid] {
            let out = learn(&Data::Population(m.sigma()), algo, &cfg).unwrap();
            assert!(out.estimate.edges.is_empty());
        }
    }

    #[test]
    fn node_errors_name_the_node() {
        let m = model(Array2::eye(3));
        let set = sample(&m, 2, 1).unwrap();
        let cfg = LearnerConfig {
            nu: Some(0.1),
            t_steps: Some(2),
            ..Default::default()
        };
        let err = learn(&Data::Samples(&set), Algorithm::Greedy, &cfg).unwrap_err();
        assert!(matches!(err, Error::Node { node: 0, .. }), "{err:?}");
    }
}

//! Least-squares estimators shared by the learners: OLS, the noise
//! estimate σ̂², the variance-decrement statistic, orthogonal matching
//! pursuit and ℓ1-ball constrained least squares.
//!
//! Every estimator runs against a [`Source`], which is either a block of
//! sample rows or an exact covariance matrix ("population mode"). In
//! population mode the residual sum of squares is the exact conditional
//! variance and σ̂² equals it.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{check_index_set, cholesky, lstsq_qr, qr_r, upper_tri_inverse, SymMatrix};
use crate::sampler::SampleSet;

/// Where second moments come from.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    /// Sample rows (`m × n`), mean-zero convention.
    Samples(ArrayView2<'a, f64>),
    /// Exact covariance.
    Population(&'a SymMatrix),
}

impl<'a> Source<'a> {
    pub fn from_split(set: &'a SampleSet, split: &str) -> Result<Self> {
        Ok(Source::Samples(set.rows(split)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            Source::Samples(x) => x.ncols(),
            Source::Population(s) => s.dim(),
        }
    }

    /// Number of rows, `None` in population mode.
    pub fn m(&self) -> Option<usize> {
        match self {
            Source::Samples(x) => Some(x.nrows()),
            Source::Population(_) => None,
        }
    }

    /// Second moment matrix `E[X_a X_b]` over `cols`.
    pub fn gram(&self, cols: &[usize]) -> Array2<f64> {
        match self {
            Source::Samples(x) => {
                let sub = x.select(ndarray::Axis(1), cols);
                sub.t().dot(&sub) / x.nrows() as f64
            }
            Source::Population(s) => s.submatrix(cols).into_array(),
        }
    }

    /// Mean squared residual `E[(X_target - Σ_k w_k X_{cols[k]})²]`.
    pub fn residual_variance(&self, target: usize, cols: &[usize], w: ArrayView1<'_, f64>) -> f64 {
        match self {
            Source::Samples(x) => {
                let mut r = x.column(target).to_owned();
                for (k, &c) in cols.iter().enumerate() {
                    r.scaled_add(-w[k], &x.column(c));
                }
                r.dot(&r) / x.nrows() as f64
            }
            Source::Population(s) => {
                let mut idx = cols.to_vec();
                idx.push(target);
                let sub = s.submatrix(&idx);
                let mut v = Array1::zeros(idx.len());
                for k in 0..cols.len() {
                    v[k] = -w[k];
                }
                v[cols.len()] = 1.0;
                v.dot(&sub.matvec(v.view())).max(0.0)
            }
        }
    }

    fn check(&self, i: usize, s: &[usize]) -> Result<()> {
        let n = self.dim();
        check_index_set(s, n)?;
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        if s.contains(&i) {
            return Err(Error::Invalid(format!("target {i} is among the regressors")));
        }
        Ok(())
    }
}

/// Result of a least-squares fit.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionFit {
    pub support: Vec<usize>,
    pub coefficients: Array1<f64>,
    pub sigma_hat_sq: f64,
    pub residual_ssq: f64,
    /// Rows used; `None` in population mode.
    pub m: Option<usize>,
    pub k: usize,
}

impl RegressionFit {
    fn new(support: Vec<usize>, coefficients: Array1<f64>, rss: f64, m: Option<usize>) -> Result<Self> {
        let k = support.len();
        let rss = rss.max(0.0);
        let sigma_hat_sq = match m {
            Some(m) if m > k => rss / (m - k) as f64,
            Some(m) => return Err(Error::TooFewSamples { needed: k, have: m }),
            None => rss,
        };
        Ok(RegressionFit {
            support,
            coefficients,
            sigma_hat_sq,
            residual_ssq: rss,
            m,
            k,
        })
    }

    /// Mean squared residual (`rss / m`, or the exact value in population mode).
    pub fn loss(&self) -> f64 {
        match self.m {
            Some(m) => self.residual_ssq / m as f64,
            None => self.residual_ssq,
        }
    }

    /// Coefficient of regressor `j`, zero if `j` is not in the support.
    pub fn coef_of(&self, j: usize) -> f64 {
        self.support
            .iter()
            .position(|&c| c == j)
            .map_or(0.0, |p| self.coefficients[p])
    }
}

/// Ordinary least squares on an explicit design; the support is `0..k`.
pub fn ols(design: ArrayView2<'_, f64>, response: ArrayView1<'_, f64>) -> Result<RegressionFit> {
    let (m, k) = design.dim();
    if m <= k {
        return Err(Error::TooFewSamples { needed: k, have: m });
    }
    let (w, rss) = lstsq_qr(design, response)?;
    RegressionFit::new((0..k).collect(), w, rss, Some(m))
}

/// Triangular factor `R` with `RᵀR` equal to the raw second-moment matrix
/// of a fixed column set, so that many sub-regressions can be solved
/// without touching the data again.
#[derive(Clone, Debug)]
pub struct Design {
    r: Array2<f64>,
    cols: Vec<usize>,
    local: Vec<Option<usize>>,
    m: Option<usize>,
}

impl Design {
    pub fn new(source: &Source<'_>, cols: &[usize]) -> Result<Self> {
        let n = source.dim();
        check_index_set(cols, n)?;
        let r = match source {
            Source::Samples(x) => qr_r(x.select(ndarray::Axis(1), cols).view()),
            Source::Population(sig) => cholesky(&sig.submatrix(cols))
                .map_err(|_| Error::SingularSubmatrix)?
                .factor()
                .t()
                .to_owned(),
        };
        let mut local = vec![None; n];
        for (p, &c) in cols.iter().enumerate() {
            local[c] = Some(p);
        }
        Ok(Design {
            r,
            cols: cols.to_vec(),
            local,
            m: source.m(),
        })
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    fn pos(&self, c: usize) -> Result<usize> {
        self.local
            .get(c)
            .copied()
            .flatten()
            .ok_or_else(|| Error::Invalid(format!("column {c} is not part of the design")))
    }

    /// Regression of `target` on `s` (both must be design columns).
    pub fn fit(&self, target: usize, s: &[usize]) -> Result<RegressionFit> {
        if let Some(m) = self.m {
            if m <= s.len() {
                return Err(Error::TooFewSamples { needed: s.len(), have: m });
            }
        }
        let t = self.pos(target)?;
        let mut b = Array2::zeros((self.r.nrows(), s.len()));
        for (k, &c) in s.iter().enumerate() {
            if c == target {
                return Err(Error::Invalid(format!("target {c} is among the regressors")));
            }
            b.column_mut(k).assign(&self.r.column(self.pos(c)?));
        }
        let (w, rss) = lstsq_qr(b.view(), self.r.column(t))?;
        RegressionFit::new(s.to_vec(), w, rss, self.m)
    }
}

/// Regression of coordinate `i` on the coordinates `s`.
pub fn regress(source: &Source<'_>, i: usize, s: &[usize]) -> Result<RegressionFit> {
    source.check(i, s)?;
    match source {
        Source::Samples(x) => {
            let m = x.nrows();
            if m <= s.len() {
                return Err(Error::TooFewSamples { needed: s.len(), have: m });
            }
            let design = x.select(ndarray::Axis(1), s);
            let (w, rss) = lstsq_qr(design.view(), x.column(i))?;
            RegressionFit::new(s.to_vec(), w, rss, Some(m))
        }
        Source::Population(sig) => {
            let (w, var) = crate::model::conditional_fit(sig, i, s)?;
            RegressionFit::new(s.to_vec(), w, var, None)
        }
    }
}

/// `Var̂(X_i | X_S)`: σ̂² of the regression of `i` on `s`.
///
/// For `s = ∅` this is `(1/m) Σ x_i²` rather than the unbiased form (they
/// coincide since `k = 0`).
pub fn cond_var_estimate(source: &Source<'_>, i: usize, s: &[usize]) -> Result<f64> {
    Ok(regress(source, i, s)?.sigma_hat_sq)
}

/// Per-sample increase in squared loss when regressor `j` is dropped from
/// the fit of `i` on `s`, computed in closed form as
/// `ŵ_j² / [Σ̂_SS⁻¹]_jj` with `Σ̂ = XᵀX/m`.
pub fn variance_decrement_stat(source: &Source<'_>, i: usize, s: &[usize], j: usize) -> Result<f64> {
    let p = s
        .iter()
        .position(|&c| c == j)
        .ok_or_else(|| Error::Invalid(format!("column {j} is not in the regressor set")))?;
    let fit = regress(source, i, s)?;
    let r = match source {
        Source::Samples(x) => qr_r(x.select(ndarray::Axis(1), s).view()),
        Source::Population(sig) => cholesky(&sig.submatrix(s))
            .map_err(|_| Error::SingularSubmatrix)?
            .factor()
            .t()
            .to_owned(),
    };
    let rinv = upper_tri_inverse(&r);
    let diag: f64 = rinv.row(p).iter().map(|v| v * v).sum();
    let scale = source.m().map_or(1.0, |m| m as f64);
    let w = fit.coefficients[p];
    Ok(w * w / (diag * scale))
}

/// Same quantity as [`variance_decrement_stat`] by refitting without `j`.
pub fn variance_decrement_by_refit(source: &Source<'_>, i: usize, s: &[usize], j: usize) -> Result<f64> {
    if !s.contains(&j) {
        return Err(Error::Invalid(format!("column {j} is not in the regressor set")));
    }
    let full = regress(source, i, s)?;
    let rest: Vec<usize> = s.iter().copied().filter(|&c| c != j).collect();
    let reduced = regress(source, i, &rest)?;
    Ok((reduced.loss() - full.loss()).max(0.0))
}

/// Trace of an OMP run.
#[derive(Clone, Debug, PartialEq)]
pub struct OmpPath {
    /// Selected columns in order.
    pub order: Vec<usize>,
    /// `losses[t]` is the mean squared residual after `t` picks.
    pub losses: Vec<f64>,
}

impl OmpPath {
    /// Decrease in loss achieved by each pick.
    pub fn decrements(&self) -> Vec<f64> {
        self.losses.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

/// Orthogonal matching pursuit: `t` greedy steps, each adding the candidate
/// that minimizes the least-squares loss of the enlarged fit. Ties go to the
/// lowest index. Candidates that are (numerically) in the span of the
/// current selection are skipped; if none are left the path stops early.
pub fn omp(source: &Source<'_>, target: usize, candidates: &[usize], t: usize) -> Result<OmpPath> {
    source.check(target, candidates)?;
    if t > candidates.len() {
        return Err(Error::BadParams(format!(
            "t = {t} exceeds the {} candidates",
            candidates.len()
        )));
    }
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    match source {
        Source::Samples(x) => omp_samples(*x, target, &cands, t),
        Source::Population(sig) => Ok(omp_population(sig, target, &cands, t)),
    }
}

fn omp_samples(x: ArrayView2<'_, f64>, target: usize, cands: &[usize], t: usize) -> Result<OmpPath> {
    let m = x.nrows();
    if m <= t {
        return Err(Error::TooFewSamples { needed: t, have: m });
    }
    let mf = m as f64;
    let mut resid = x.column(target).to_owned();
    let mut proj: Vec<Array1<f64>> = cands.iter().map(|&c| x.column(c).to_owned()).collect();
    let norms: Vec<f64> = proj.iter().map(|p| p.dot(p)).collect();
    let mut active = vec![true; cands.len()];
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut order = Vec::with_capacity(t);
    let mut losses = vec![resid.dot(&resid) / mf];
    for _ in 0..t {
        let mut best: Option<(usize, f64)> = None;
        for (k, p) in proj.iter().enumerate() {
            if !active[k] {
                continue;
            }
            let pn = p.dot(p);
            if !(pn > 1e-20 * norms[k]) || pn == 0.0 {
                continue;
            }
            let gain = p.dot(&resid).powi(2) / pn;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((k, gain));
            }
        }
        let Some((k, _)) = best else { break };
        active[k] = false;
        order.push(cands[k]);
        let mut q = proj[k].clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&q);
                q.scaled_add(-c, b);
            }
        }
        let qn = q.dot(&q).sqrt();
        q.mapv_inplace(|v| v / qn);
        let c = q.dot(&resid);
        resid.scaled_add(-c, &q);
        for (kk, p) in proj.iter_mut().enumerate() {
            if active[kk] {
                let c = q.dot(p);
                p.scaled_add(-c, &q);
            }
        }
        basis.push(q);
        losses.push(resid.dot(&resid) / mf);
    }
    Ok(OmpPath { order, losses })
}

fn omp_population(sig: &SymMatrix, target: usize, cands: &[usize], t: usize) -> OmpPath {
    // Conditional covariance of (candidates, target) given the picks so far.
    let mut idx = cands.to_vec();
    idx.push(target);
    let p = cands.len();
    let mut c = sig.submatrix(&idx).into_array();
    let base: Vec<f64> = (0..p).map(|k| c[[k, k]]).collect();
    let mut active = vec![true; p];
    let mut order = Vec::with_capacity(t);
    let mut losses = vec![c[[p, p]]];
    for _ in 0..t {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..p {
            if !active[k] || !(c[[k, k]] > 1e-13 * base[k]) {
                continue;
            }
            let gain = c[[k, p]] * c[[k, p]] / c[[k, k]];
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((k, gain));
            }
        }
        let Some((k, _)) = best else { break };
        active[k] = false;
        order.push(cands[k]);
        let col = c.column(k).to_owned();
        let piv = col[k];
        for a in 0..=p {
            for b in 0..=p {
                c[[a, b]] -= col[a] * col[b] / piv;
            }
        }
        losses.push(c[[p, p]].max(0.0));
    }
    OmpPath { order, losses }
}

/// Solution of an ℓ1-ball constrained least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedFit {
    /// One coefficient per design column, the free column included.
    pub coefficients: Array1<f64>,
    pub free_col: Option<usize>,
    /// Mean squared residual at the solution.
    pub objective: f64,
    /// Frank–Wolfe duality gap at termination.
    pub gap: f64,
    pub iterations: usize,
}

impl ConstrainedFit {
    /// ℓ1 norm of the constrained coordinates.
    pub fn l1_norm(&self) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != self.free_col)
            .map(|(_, v)| v.abs())
            .sum()
    }
}

pub const L1_TOL: f64 = 1e-8;
pub const L1_MAX_ITER: usize = 20_000;

/// `min ‖y - Xw‖²/m` subject to `Σ_{k ≠ free} |w_k| ≤ radius`.
pub fn l1_constrained_ls(
    design: ArrayView2<'_, f64>,
    response: ArrayView1<'_, f64>,
    free_col: Option<usize>,
    radius: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ConstrainedFit> {
    let (m, _) = design.dim();
    if response.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {m}",
            response.len()
        )));
    }
    if m == 0 {
        return Err(Error::TooFewSamples { needed: 0, have: 0 });
    }
    let mf = m as f64;
    let g = design.t().dot(&design) / mf;
    let b = design.t().dot(&response) / mf;
    let c = response.dot(&response) / mf;
    l1_constrained_gram(g.view(), b.view(), c, free_col, radius, tol, max_iter)
}

/// Gram-matrix form of [`l1_constrained_ls`]: minimizes
/// `c - 2bᵀw + wᵀGw` over the same constraint set.
pub fn l1_constrained_gram(
    g: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    c: f64,
    free_col: Option<usize>,
    radius: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ConstrainedFit> {
    let k = g.nrows();
    if g.ncols() != k || b.len() != k {
        return Err(Error::DimensionMismatch("Gram matrix and moment vector disagree".into()));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::BadParams(format!("radius must be nonnegative, got {radius}")));
    }
    if let Some(f) = free_col {
        if f >= k {
            return Err(Error::IndexOutOfRange { index: f, dim: k });
        }
    }
    let cons: Vec<usize> = (0..k).filter(|&j| Some(j) != free_col).collect();
    let p = cons.len();
    // Eliminate the free coordinate: a(w) = (b_f - g_fᵀw) / G_ff.
    let mut gr = Array2::zeros((p, p));
    let mut br = Array1::zeros(p);
    let free = free_col.filter(|&f| g[[f, f]] > 0.0);
    for (a, &ia) in cons.iter().enumerate() {
        br[a] = b[ia];
        for (bb, &ib) in cons.iter().enumerate() {
            gr[[a, bb]] = g[[ia, ib]];
        }
    }
    if let Some(f) = free {
        let gff = g[[f, f]];
        for (a, &ia) in cons.iter().enumerate() {
            br[a] -= g[[ia, f]] * b[f] / gff;
            for (bb, &ib) in cons.iter().enumerate() {
                gr[[a, bb]] -= g[[ia, f]] * g[[ib, f]] / gff;
            }
        }
    }
    let (w, gap, iterations) = fista_l1(&gr, &br, radius, tol * c.abs().max(f64::MIN_POSITIVE), max_iter)?;
    let mut coefficients = Array1::zeros(k);
    for (a, &ia) in cons.iter().enumerate() {
        coefficients[ia] = w[a];
    }
    if let Some(f) = free {
        let mut v = b[f];
        for (a, &ia) in cons.iter().enumerate() {
            v -= g[[ia, f]] * w[a];
        }
        coefficients[f] = v / g[[f, f]];
    }
    let objective = (c - 2.0 * b.dot(&coefficients) + coefficients.dot(&g.dot(&coefficients))).max(0.0);
    Ok(ConstrainedFit {
        coefficients,
        free_col,
        objective,
        gap,
        iterations,
    })
}

/// Euclidean projection onto `{w : ‖w‖₁ ≤ radius}` (sort based).
pub fn project_l1_ball(v: &Array1<f64>, radius: f64) -> Array1<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= radius {
        return v.clone();
    }
    if radius <= 0.0 {
        return Array1::zeros(v.len());
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.mapv(|x| x.signum() * (x.abs() - theta).max(0.0))
}

fn lipschitz(g: &Array2<f64>) -> f64 {
    let p = g.nrows();
    let mut v = Array1::from_iter((0..p).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()));
    let mut est = 0.0;
    for _ in 0..200 {
        let nv = v.dot(&v).sqrt();
        if nv == 0.0 {
            break;
        }
        v.mapv_inplace(|x| x / nv);
        let gv = g.dot(&v);
        let next = v.dot(&gv);
        v = gv;
        if (next - est).abs() <= 1e-6 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    2.0 * est.max(0.0) * 1.05 + f64::MIN_POSITIVE
}

/// Accelerated projected gradient with function-value restarts and
/// backtracking. Returns `(w, gap, iterations)`.
fn fista_l1(
    g: &Array2<f64>,
    b: &Array1<f64>,
    radius: f64,
    abs_tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, f64, usize)> {
    let p = g.nrows();
    let mut w = Array1::zeros(p);
    if p == 0 || radius == 0.0 {
        return Ok((w, 0.0, 0));
    }
    let grad = |w: &Array1<f64>| (g.dot(w) - b) * 2.0;
    let gap_at = |w: &Array1<f64>| {
        let gr = grad(w);
        let inf = gr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (gr.dot(w) + radius * inf).max(0.0)
    };
    let mut lip = lipschitz(g);
    let mut y = w.clone();
    let mut t = 1.0f64;
    for it in 0..max_iter {
        let gap = gap_at(&w);
        if gap <= abs_tol {
            return Ok((w, gap, it));
        }
        let gy = grad(&y);
        // f(x) - f(y) - ∇f(y)ᵀd = dᵀGd exactly, so backtracking needs no
        // objective values (which lose precision to cancellation).
        let x = loop {
            let x = project_l1_ball(&(&y - &(&gy / lip)), radius);
            let d = &x - &y;
            if d.dot(&g.dot(&d)) <= 0.5 * lip * d.dot(&d) || lip > 1e300 {
                break x;
            }
            lip *= 2.0;
        };
        let d = &x - &w;
        // f(x) - f(w) = dᵀ(G(x + w) - 2b)
        let change = d.dot(&(g.dot(&(&x + &w)) - b * 2.0));
        if change > 0.0 {
            if t == 1.0 {
                // a plain projected step from w cannot increase f beyond rounding
                break;
            }
            t = 1.0;
            y = w.clone();
            continue;
        }
        debug_assert!(change <= 0.0, "objective increased by {change:e}");
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x + &(&d * ((t - 1.0) / t_next));
        w = x;
        t = t_next;
    }
    let gap = gap_at(&w);
    if gap <= abs_tol {
        return Ok((w, gap, max_iter));
    }
    Err(Error::NoConvergence {
        op: "l1_constrained_ls",
        iterations: max_iter,
    })
}

//! Experiment metrics and sweep drivers: structure error, ℓ1 error, the
//! cross-validation objective, distance to the walk-summable set, grid
//! evaluation and the minimal-sample-size search.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{Family, GeneratorSpec};
use crate::learners::{
    hybrid_from_ws, learn, merge_and_symmetrize, prune, threshold_edges, ws_regression_multi, Algorithm, Data,
    LearnerConfig, NeighborhoodEstimate, PrecisionEstimate, SplitMode,
};
use crate::linalg::{sym_eigen, SymMatrix};
use crate::model::{kappa_of, GgmModel};
use crate::regress::omp;
use crate::sampler::{derive_seed, mix64, sample};

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("estimate has n = {a}, truth has n = {b}")));
    }
    Ok(())
}

/// Incorrect edges per node after thresholding at `κ/2`: `2|E_est △ E_true| / n`.
pub fn structure_error(est: &PrecisionEstimate, truth: &GgmModel, kappa: f64) -> Result<f64> {
    let n = truth.dim();
    same_dim(est.theta_hat.dim(), n)?;
    let found = threshold_edges(est, kappa);
    let real = truth.edges();
    let wrong = found.iter().filter(|e| real.binary_search(e).is_err()).count()
        + real.iter().filter(|e| found.binary_search(e).is_err()).count();
    Ok(2.0 * wrong as f64 / n as f64)
}

/// `‖Θ̂ - Θ‖₁ / n` with the entrywise ℓ1 norm.
pub fn l1_error(est: &SymMatrix, truth: &SymMatrix) -> Result<f64> {
    same_dim(est.dim(), truth.dim())?;
    let s: f64 = est.as_array().iter().zip(truth.as_array().iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(s / truth.dim() as f64)
}

/// Cross-validation objective on (standardized) holdout rows:
/// `(1/(n m)) Σ_i Σ_k (X_i + Σ_{j≠i} (Θ̂_ij + Θ̂_ji)/(2Θ̂_ii) X_j)²`.
pub fn cv_objective(theta_hat: &SymMatrix, holdout: ArrayView2<'_, f64>) -> Result<f64> {
    let n = theta_hat.dim();
    same_dim(holdout.ncols(), n)?;
    let m = holdout.nrows();
    if m == 0 {
        return Err(Error::TooFewSamples { needed: 1, have: 0 });
    }
    let mut coef = Array2::zeros((n, n));
    for i in 0..n {
        let tii = theta_hat.get(i, i);
        if !(tii > 0.0) {
            return Err(Error::ZeroDiagonal(i));
        }
        for j in 0..n {
            coef[[j, i]] = if i == j {
                1.0
            } else {
                (theta_hat.get(i, j) + theta_hat.get(j, i)) / (2.0 * tii)
            };
        }
    }
    let resid = holdout.dot(&coef);
    Ok(resid.iter().map(|v| v * v).sum::<f64>() / (n * m) as f64)
}

/// Relative Frobenius distance from `theta` to the nearest walk-summable
/// matrix with the same off-diagonal sign pattern.
///
/// Flipping the sign of every positive off-diagonal entry maps that set to
/// `{M ⪰ 0, M_ij ≤ 0 for i ≠ j}`; the projection onto this intersection is
/// computed with Dykstra's alternating projections.
pub fn ws_distance(theta: &SymMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = theta.dim();
    let norm = theta.as_array().iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut flip = Array2::<f64>::ones((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j && theta.get(i, j) > 0.0 {
                flip[[i, j]] = -1.0;
            }
        }
    }
    let start = theta.as_array() * &flip;
    let mut x = start.clone();
    let mut p = Array2::<f64>::zeros((n, n));
    let mut q = Array2::<f64>::zeros((n, n));
    for _ in 0..max_iter {
        let y = project_psd(&(&x + &p));
        p = &x + &p - &y;
        let mut next = &y + &q;
        for i in 0..n {
            for j in 0..n {
                if i != j && next[[i, j]] > 0.0 {
                    next[[i, j]] = 0.0;
                }
            }
        }
        q = &y + &q - &next;
        let moved = (&next - &x).iter().map(|v| v * v).sum::<f64>().sqrt();
        x = next;
        if moved <= tol * norm {
            let dist = (&start - &x).iter().map(|v| v * v).sum::<f64>().sqrt();
            return Ok(dist / norm);
        }
    }
    Err(Error::NoConvergence {
        op: "ws_distance",
        iterations: max_iter,
    })
}

fn project_psd(a: &Array2<f64>) -> Array2<f64> {
    let sym = SymMatrix::symmetrize(a.clone());
    let (vals, vecs) = sym_eigen(&sym);
    let n = vals.len();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        if vals[k] > 0.0 {
            let v = vecs.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[[i, j]] += vals[k] * v[i] * v[j];
                }
            }
        }
    }
    out
}

/// Log-spaced grid of `points` values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Hyperparameter grid. Configurations are the Cartesian product of the
/// lists relevant to the algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct HyperGrid {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_steps: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma_prime: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
}

impl HyperGrid {
    /// Grids used for the published experiments: `T` on a rounded log grid
    /// 3..24 (7 points) with `ν` on a log grid 0.001..0.1 (8 points); `γ'` on
    /// a log grid 1..32 (8 points) with `τ = 0`.
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Greedy => HyperGrid {
                t_steps: log_grid(3.0, 24.0, 7).into_iter().map(|v| v.round() as usize).collect(),
                nu: log_grid(0.001, 0.1, 8),
                ..Default::default()
            },
            Algorithm::Hybrid => HyperGrid {
                gamma_prime: log_grid(1.0, 32.0, 8),
                tau: vec![0.0],
                ..Default::default()
            },
            Algorithm::SearchAndValidate => HyperGrid {
                nu: log_grid(0.001, 0.1, 8),
                ..Default::default()
            },
        }
    }

    pub fn configs(&self, algorithm: Algorithm) -> Result<Vec<LearnerConfig>> {
        let mut out = Vec::new();
        let base = LearnerConfig {
            d: self.d,
            ..Default::default()
        };
        match algorithm {
            Algorithm::Greedy => {
                for &t in &self.t_steps {
                    for &nu in &self.nu {
                        out.push(LearnerConfig {
                            t_steps: Some(t),
                            nu: Some(nu),
                            ..base.clone()
                        });
                    }
                }
            }
            Algorithm::Hybrid => {
                let taus = if self.tau.is_empty() { vec![0.0] } else { self.tau.clone() };
                for &gp in &self.gamma_prime {
                    for &tau in &taus {
                        out.push(LearnerConfig {
                            gamma_prime: Some(gp),
                            tau: Some(tau),
                            split_mode: SplitMode::Single,
                            ..base.clone()
                        });
                    }
                }
            }
            Algorithm::SearchAndValidate => {
                if self.d.is_none() {
                    return Err(Error::BadParams("SearchAndValidate grid needs d".into()));
                }
                for &nu in &self.nu {
                    out.push(LearnerConfig {
                        nu: Some(nu),
                        ..base.clone()
                    });
                }
            }
        }
        if out.is_empty() {
            return Err(Error::BadParams(format!("empty hyperparameter grid for {algorithm}")));
        }
        Ok(out)
    }
}

/// Runs every configuration on one data set, sharing work across the grid:
/// one OMP path per node for GreedyAndPrune and one radius path per node for
/// HybridMB. Configurations that cannot run on this many samples give `None`.
pub fn evaluate_grid(data: &Data<'_>, algorithm: Algorithm, configs: &[LearnerConfig]) -> Result<Vec<Option<PrecisionEstimate>>> {
    let n = data.n();
    match algorithm {
        Algorithm::Greedy => {
            let src = data.whole();
            let mut cap = n.saturating_sub(1);
            if let Some(m) = src.m() {
                cap = cap.min(m.saturating_sub(1));
            }
            let steps: Vec<Option<usize>> = configs
                .iter()
                .map(|c| c.greedy_steps(n).ok().filter(|&t| t <= cap))
                .collect();
            let t_max = steps.iter().flatten().copied().max().unwrap_or(0);
            let per_node: Vec<Vec<Option<NeighborhoodEstimate>>> = (0..n)
                .into_par_iter()
                .map(|i| -> Result<Vec<Option<NeighborhoodEstimate>>> {
                    let cands: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                    let path = omp(&src, i, &cands, t_max)?;
                    configs
                        .iter()
                        .zip(&steps)
                        .map(|(c, t)| match t {
                            Some(t) if *t <= path.order.len() => {
                                Ok(Some(prune(&src, i, &path.order[..*t], c.greedy_nu()?)?))
                            }
                            // the path stopped early: nothing left to add
                            Some(_) => Ok(Some(prune(&src, i, &path.order, c.greedy_nu()?)?)),
                            None => Ok(None),
                        })
                        .collect()
                })
                .collect::<Vec<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, r)| r.map_err(|e| e.at_node(i)))
                .collect::<Result<_>>()?;
            configs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let nb: Option<Vec<NeighborhoodEstimate>> = per_node.iter().map(|v| v[k].clone()).collect();
                    nb.map(|nb| merge_and_symmetrize(&nb, c.merge_rule)).transpose()
                })
                .collect()
        }
        Algorithm::Hybrid => {
            let mut gps: Vec<f64> = Vec::new();
            for c in configs {
                let gp = c
                    .gamma_prime
                    .ok_or_else(|| Error::BadParams("hybrid grid evaluation needs gamma'".into()))?;
                if !gps.contains(&gp) {
                    gps.push(gp);
                }
            }
            let mode = configs[0].split_mode;
            let parts = data.parts(3, mode)?;
            let srcs = [parts[0], parts[1], parts[2]];
            let per_node: Vec<Vec<_>> = (0..n)
                .into_par_iter()
                .map(|i| ws_regression_multi(&srcs, i, &gps).map_err(|e| e.at_node(i)))
                .collect::<Vec<_>>()
                .into_iter()
                .collect::<Result<_>>()?;
            configs
                .iter()
                .map(|c| {
                    let g = gps.iter().position(|&v| Some(v) == c.gamma_prime).expect("collected");
                    let ws: Vec<_> = per_node.iter().map(|v| v[g].clone()).collect();
                    Ok(Some(hybrid_from_ws(&ws, c.hybrid_tau()?)?))
                })
                .collect()
        }
        Algorithm::SearchAndValidate => configs
            .iter()
            .map(|c| match learn(data, algorithm, c) {
                Ok(out) => Ok(Some(out.estimate)),
                Err(e) if matches!(e.root(), Error::TooFewSamples { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect(),
    }
}

/// Returns a copy of `spec` with its size parameter set to `n`.
pub fn with_n(spec: &GeneratorSpec, n: usize) -> Result<GeneratorSpec> {
    let mut out = spec.clone();
    match &mut out.family {
        Family::PathCliques { n: v, .. } | Family::GaussianWalk { n: v, .. } => *v = n,
        Family::BreakGreedy { d, n_pad, .. } => {
            if n < 4 * *d {
                return Err(Error::BadParams(format!("break_greedy needs n >= {}", 4 * *d)));
            }
            *n_pad = n - 4 * *d;
        }
        _ => return Err(Error::BadParams("this generator family has no size parameter".into())),
    }
    Ok(out)
}

/// One (n, m, trial, configuration) measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub m: usize,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub cfg_id: usize,
    /// `None` when the configuration could not run at this sample size.
    pub structure_error: Option<f64>,
    pub l1_error: Option<f64>,
    pub runtime_ms: u64,
    pub seed: u64,
}

/// Trial-averaged errors for one `(n, m)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub m: usize,
    pub best_cfg_id: Option<usize>,
    pub best_error: f64,
    pub seeds: Vec<u64>,
}

/// Minimal sample size found for one `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinSamples {
    pub n: usize,
    pub m: usize,
    pub best_cfg_id: Option<usize>,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub algorithm: Algorithm,
    pub configs: Vec<LearnerConfig>,
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
    pub min_samples: Vec<MinSamples>,
}

impl SweepResult {
    /// CSV with one line per row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "m", "trial", "algorithm", "cfg_id", "structure_error", "l1_error", "runtime_ms", "seed"])?;
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.16e}"));
        for r in &self.rows {
            out.write_record([
                r.n.to_string(),
                r.m.to_string(),
                r.trial.to_string(),
                r.algorithm.name().to_string(),
                r.cfg_id.to_string(),
                fmt(r.structure_error),
                fmt(r.l1_error),
                r.runtime_ms.to_string(),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn m_for(&self, n: usize) -> Option<usize> {
        self.min_samples.iter().find(|r| r.n == n).map(|r| r.m)
    }
}

/// Seed of trial `trial` at size `n`. Independent of `m`, so growing `m`
/// extends the same sample stream.
pub fn trial_seed(master: u64, n: usize, trial: usize) -> u64 {
    derive_seed(master, mix64(n as u64) ^ trial as u64)
}

/// Evaluates the grid on `trials` independent sample sets of size `m`.
pub fn run_cell(
    model: &GgmModel,
    algorithm: Algorithm,
    configs: &[LearnerConfig],
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<(Vec<SweepRow>, CellSummary)> {
    let n = model.dim();
    let kappa = kappa_of(model).unwrap_or(1.0);
    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    let mut sums = vec![Some(0.0f64); configs.len()];
    for trial in 0..trials {
        let s = trial_seed(seed, n, trial);
        seeds.push(s);
        let set = sample(model, m, s)?;
        let clock = Instant::now();
        let ests = evaluate_grid(&Data::Samples(&set), algorithm, configs)?;
        let runtime_ms = clock.elapsed().as_millis() as u64;
        for (k, est) in ests.iter().enumerate() {
            let (se, l1) = match est {
                Some(e) => (
                    Some(structure_error(e, model, kappa)?),
                    Some(l1_error(&e.theta_hat, model.theta())?),
                ),
                None => (None, None),
            };
            sums[k] = match (sums[k], se) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
            rows.push(SweepRow {
                n,
                m,
                trial,
                algorithm,
                cfg_id: k,
                structure_error: se,
                l1_error: l1,
                runtime_ms,
                seed: s,
            });
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in sums.iter().enumerate() {
        if let Some(s) = s {
            let avg = s / trials.max(1) as f64;
            if best.is_none_or(|(_, b)| avg < b) {
                best = Some((k, avg));
            }
        }
    }
    let summary = CellSummary {
        n,
        m,
        best_cfg_id: best.map(|b| b.0),
        best_error: best.map_or(f64::INFINITY, |b| b.1),
        seeds,
    };
    Ok((rows, summary))
}

/// Parameters of [`min_samples_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub generator: GeneratorSpec,
    pub ns: Vec<usize>,
    pub algorithm: Algorithm,
    pub grid: HyperGrid,
    #[serde(default = "default_threshold")]
    pub error_threshold: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_granularity")]
    pub granularity: usize,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

fn default_threshold() -> f64 {
    1.0
}
fn default_trials() -> usize {
    8
}
fn default_granularity() -> usize {
    25
}
fn default_m_max() -> usize {
    25_600
}

/// For each `n`: doubling search from `granularity`, then bisection at the
/// granularity, for the least `m` whose best trial-averaged structure error
/// is at most the threshold.
pub fn min_samples_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let g = spec.granularity.max(1);
    let configs = spec.grid.configs(spec.algorithm)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut min_samples = Vec::new();
    for &n in &spec.ns {
        let model = with_n(&spec.generator, n)?.build()?;
        let mut seen: BTreeMap<usize, CellSummary> = BTreeMap::new();
        let mut eval = |m: usize, rows: &mut Vec<SweepRow>| -> Result<CellSummary> {
            if let Some(c) = seen.get(&m) {
                return Ok(c.clone());
            }
            let (r, c) = run_cell(&model, spec.algorithm, &configs, m, spec.trials, spec.seed)?;
            rows.extend(r);
            seen.insert(m, c.clone());
            Ok(c)
        };
        let pass = |c: &CellSummary| c.best_error <= spec.error_threshold;
        let mut lo = 0usize;
        let mut hi = g;
        let mut hit = eval(hi, &mut rows)?;
        while !pass(&hit) {
            lo = hi;
            hi *= 2;
            if hi > spec.m_max {
                return Err(Error::Unattainable { m_max: spec.m_max });
            }
            hit = eval(hi, &mut rows)?;
        }
        while hi - lo > g {
            let mid = lo + ((hi - lo) / g / 2).max(1) * g;
            let c = eval(mid, &mut rows)?;
            if pass(&c) {
                hi = mid;
                hit = c;
            } else {
                lo = mid;
            }
        }
        min_samples.push(MinSamples {
            n,
            m: hi,
            best_cfg_id: hit.best_cfg_id,
            error: hit.best_error,
        });
        cells.extend(seen.into_values());
    }
    Ok(SweepResult {
        algorithm: spec.algorithm,
        configs,
        rows,
        cells,
        min_samples,
    })
}

/// Grid search scored by [`cv_objective`] on a holdout: returns the index of
/// the best configuration and all scores (`None` where a configuration
/// could not run).
pub fn tune_by_cv(
    train: &Data<'_>,
    holdout: ArrayView2<'_, f64>,
    algorithm: Algorithm,
    configs: &[LearnerConfig],
) -> Result<(Option<usize>, Vec<Option<f64>>)> {
    let ests = evaluate_grid(train, algorithm, configs)?;
    let scores: Vec<Option<f64>> = ests
        .iter()
        .map(|e| e.as_ref().map(|e| cv_objective(&e.theta_hat, holdout)).transpose())
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((k, s));
            }
        }
    }
    Ok((best.map(|b| b.0), scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{counterexample, path_cliques};
    use crate::sampler::standardize;
    use ndarray::array;

    fn model(a: Array2<f64>) -> GgmModel {
        GgmModel::from_precision(SymMatrix::new(a).unwrap()).unwrap()
    }

    fn est(a: Array2<f64>) -> PrecisionEstimate {
        PrecisionEstimate {
            theta_hat: SymMatrix::new(a).unwrap(),
            edges: vec![],
        }
    }

    fn chain4() -> Array2<f64> {
        array![
            [2.0, -1.0, 0.0, 0.0],
            [-1.0, 2.0, -1.0, 0.0],
            [0.0, -1.0, 2.0, -1.0],
            [0.0, 0.0, -1.0, 2.0]
        ]
    }

    #[test]
    fn structure_error_examples() {
        let m = model(chain4());
        let k = kappa_of(&m).unwrap();
        assert_eq!(structure_error(&est(chain4()), &m, k).unwrap(), 0.0);
        let mut missing = chain4();
        missing[[1, 2]] = 0.0;
        missing[[2, 1]] = 0.0;
        assert_eq!(structure_error(&est(missing), &m, k).unwrap(), 0.5);
        let pair = model(array![[2.0, -1.0], [-1.0, 2.0]]);
        assert_eq!(structure_error(&est(Array2::eye(2)), &pair, 0.5).unwrap(), 1.0);
        assert!(matches!(
            structure_error(&est(Array2::eye(3)), &pair, 0.5),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn l1_error_examples() {
        let a = SymMatrix::identity(3);
        assert_eq!(l1_error(&a, &a).unwrap(), 0.0);
        let mut b = Array2::eye(3);
        b[[0, 2]] = 3.0;
        b[[2, 0]] = 3.0;
        assert_eq!(l1_error(&SymMatrix::new(b).unwrap(), &a).unwrap(), 2.0);
    }

    #[test]
    fn cv_identity_and_single_node() {
        let m = model(Array2::eye(3));
        let set = sample(&m, 5000, 11).unwrap();
        let (z, _) = standardize(&set).unwrap();
        let v = cv_objective(&SymMatrix::identity(3), z.data().view()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let x = array![[1.0], [-2.0], [3.0]];
        let v = cv_objective(&SymMatrix::new(array![[4.0]]).unwrap(), x.view()).unwrap();
        assert!((v - 14.0 / 3.0).abs() < 1e-12);
        let bad = SymMatrix::new(array![[0.0, 0.0], [0.0, 1.0]]);
        if let Ok(bad) = bad {
            assert!(matches!(cv_objective(&bad, Array2::zeros((2, 2)).view()), Err(Error::ZeroDiagonal(0))));
        }
    }

    #[test]
    fn cv_exact_chain_matches_conditional_variances() {
        let m = model(chain4()).standardized().unwrap();
        let set = sample(&m, 40_000, 12).unwrap();
        let got = cv_objective(m.theta(), set.data().view()).unwrap();
        let want: f64 = (0..4).map(|i| 1.0 / m.theta().get(i, i)).sum::<f64>() / 4.0;
        assert!((got - want).abs() < 0.02 * want, "{got} vs {want}");
    }

    #[test]
    fn ws_distance_examples() {
        let ws = SymMatrix::new(chain4()).unwrap();
        assert!(ws_distance(&ws, 1e-10, 10_000).unwrap() < 1e-8);
        let big = counterexample("big_cancellation", &Default::default()).unwrap();
        let d = ws_distance(big.theta(), 1e-10, 100_000).unwrap();
        assert!(d > 1e-3, "{d}");
        let scaled = SymMatrix::new(big.theta().as_array() * 7.5).unwrap();
        let d2 = ws_distance(&scaled, 1e-10, 100_000).unwrap();
        assert!((d - d2).abs() < 1e-6 * d);
    }

    #[test]
    fn grids() {
        let g = HyperGrid::default_for(Algorithm::Greedy);
        assert_eq!(g.t_steps, vec![3, 4, 6, 8, 12, 17, 24]);
        assert_eq!(g.nu.len(), 8);
        assert!((g.nu[0] - 0.001).abs() < 1e-15 && (g.nu[7] - 0.1).abs() < 1e-12);
        assert_eq!(g.configs(Algorithm::Greedy).unwrap().len(), 56);
        let h = HyperGrid::default_for(Algorithm::Hybrid);
        assert_eq!(h.configs(Algorithm::Hybrid).unwrap().len(), 8);
        assert!((h.gamma_prime[7] - 32.0).abs() < 1e-9);
    }

    #[test]
    fn grid_evaluation_matches_single_runs() {
        let m = path_cliques(16, 4, 0.7, true).unwrap();
        let set = sample(&m, 150, 4).unwrap();
        let data = Data::Samples(&set);
        let grid = HyperGrid {
            t_steps: vec![3, 6],
            nu: vec![0.005, 0.05],
            ..Default::default()
        };
        let cfgs = grid.configs(Algorithm::Greedy).unwrap();
        let all = evaluate_grid(&data, Algorithm::Greedy, &cfgs).unwrap();
        for (c, e) in cfgs.iter().zip(&all) {
            assert_eq!(e.as_ref().unwrap(), &learn(&data, Algorithm::Greedy, c).unwrap().estimate);
        }
        let hgrid = HyperGrid {
            gamma_prime: vec![1.0, 8.0],
            tau: vec![0.0, 0.05],
            ..Default::default()
        };
        let cfgs = hgrid.configs(Algorithm::Hybrid).unwrap();
        let all = evaluate_grid(&data, Algorithm::Hybrid, &cfgs).unwrap();
        for (c, e) in cfgs.iter().zip(&all) {
            assert_eq!(e.as_ref().unwrap(), &learn(&data, Algorithm::Hybrid, c).unwrap().estimate);
        }
    }

    #[test]
    fn sweep_on_identity_stops_at_first_size() {
        let spec = SweepSpec {
            generator: GeneratorSpec {
                family: Family::GaussianWalk { n: 4, start_time: 1 },
                standardize: false,
            },
            ns: vec![4],
            algorithm: Algorithm::Greedy,
            grid: HyperGrid::default_for(Algorithm::Greedy),
            error_threshold: 4.0,
            trials: 2,
            seed: 3,
            granularity: 25,
            m_max: 400,
        };
        let r = min_samples_sweep(&spec).unwrap();
        assert_eq!(r.m_for(4), Some(25));
        assert!(r.rows.iter().all(|row| row.m == 25));
    }

    #[test]
    fn sweep_is_monotone_consistent() {
        let spec = SweepSpec {
            generator: GeneratorSpec {
                family: Family::PathCliques { n: 16, d: 4, rho: 0.7 },
                standardize: true,
            },
            ns: vec![16],
            algorithm: Algorithm::Greedy,
            grid: HyperGrid {
                t_steps: vec![4, 8],
                nu: vec![0.01, 0.05],
                ..Default::default()
            },
            error_threshold: 0.5,
            trials: 2,
            seed: 8,
            granularity: 25,
            m_max: 3200,
        };
        let r = min_samples_sweep(&spec).unwrap();
        let m = r.m_for(16).unwrap();
        let model = with_n(&spec.generator, 16).unwrap().build().unwrap();
        let cfgs = spec.grid.configs(Algorithm::Greedy).unwrap();
        let (_, at) = run_cell(&model, Algorithm::Greedy, &cfgs, m, 2, 8).unwrap();
        assert!(at.best_error <= 0.5);
        if m > 25 {
            let (_, below) = run_cell(&model, Algorithm::Greedy, &cfgs, m - 25, 2, 8).unwrap();
            assert!(below.best_error > 0.5);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("n,m,trial,algorithm,cfg_id"));
    }

    #[test]
    fn unattainable() {
        let spec = SweepSpec {
            generator: GeneratorSpec {
                family: Family::PathCliques { n: 16, d: 4, rho: 0.7 },
                standardize: true,
            },
            ns: vec![16],
            algorithm: Algorithm::Greedy,
            grid: HyperGrid {
                t_steps: vec![3],
                nu: vec![10.0],
                ..Default::default()
            },
            error_threshold: 0.1,
            trials: 1,
            seed: 1,
            granularity: 25,
            m_max: 100,
        };
        assert!(matches!(min_samples_sweep(&spec), Err(Error::Unattainable { m_max: 100 })));
    }
}

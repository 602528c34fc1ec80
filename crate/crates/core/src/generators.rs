//! Synthetic model families and the small named counterexamples.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{schur_complement, SymMatrix};
use crate::model::GgmModel;
use crate::sampler::Prng;

/// Serializable description of a generated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Rescale the result to unit variances.
    #[serde(default)]
    pub standardize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    PathCliques {
        n: usize,
        d: usize,
        rho: f64,
    },
    GaussianWalk {
        n: usize,
        start_time: usize,
    },
    Gff {
        n: usize,
        edges: Vec<(usize, usize, f64)>,
        boundary: Vec<usize>,
    },
    BreakGreedy {
        d: usize,
        delta: f64,
        #[serde(default)]
        n_pad: usize,
    },
    PossiblyHard {
        d: usize,
        delta: f64,
        tiles: usize,
        #[serde(default)]
        permute_seed: Option<u64>,
    },
    NamedCounterexample {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<GgmModel> {
        let model = match &self.family {
            Family::PathCliques { n, d, rho } => path_cliques(*n, *d, *rho, false)?,
            Family::GaussianWalk { n, start_time } => gaussian_walk(*n, *start_time)?,
            Family::Gff { n, edges, boundary } => gff(*n, edges, boundary)?,
            Family::BreakGreedy { d, delta, n_pad } => break_greedy(*d, *delta, *n_pad)?,
            Family::PossiblyHard {
                d,
                delta,
                tiles,
                permute_seed,
            } => possibly_hard(*d, *delta, *tiles, *permute_seed)?,
            Family::NamedCounterexample { name, params } => {
                Counterexample::from_name(name, params)?.build()?
            }
        };
        if self.standardize {
            model.standardized()
        } else {
            Ok(model)
        }
    }
}

/// Precision of a Gaussian random walk whose first value has variance `v0`
/// and whose increments have variance `step`.
fn walk_precision(k: usize, v0: f64, step: f64) -> Array2<f64> {
    let mut t = Array2::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = if i + 1 == k { 1.0 / step } else { 2.0 / step };
        if i + 1 < k {
            t[[i, i + 1]] = -1.0 / step;
            t[[i + 1, i]] = -1.0 / step;
        }
    }
    t[[0, 0]] += 1.0 / v0 - 1.0 / step;
    t
}

/// A Brownian-motion block of `n/2` coordinates (`Cov = 1/2 + min(i,j)/n`)
/// followed by `n/(2d)` independent `d`-cliques with precision
/// proportional to `I - (ρ/d) 1 1ᵀ`, scaled to unit variances.
pub fn path_cliques(n: usize, d: usize, rho: f64, standardize: bool) -> Result<GgmModel> {
    if n == 0 || n % 2 != 0 || d == 0 || (n / 2) % d != 0 {
        return Err(Error::BadParams(format!(
            "path_cliques needs n even and n/2 divisible by d (n = {n}, d = {d})"
        )));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::BadParams(format!("rho must lie in (0, 1), got {rho}")));
    }
    let half = n / 2;
    let mut theta = Array2::zeros((n, n));
    let nf = n as f64;
    theta
        .slice_mut(ndarray::s![..half, ..half])
        .assign(&walk_precision(half, 0.5 + 1.0 / nf, 1.0 / nf));
    // Θ₀ = I - a 11ᵀ has variances 1 + a/(1 - a d); Θ₁ = var · Θ₀.
    let a = rho / d as f64;
    let var = 1.0 + a / (1.0 - rho);
    for b in 0..half / d {
        let off = half + b * d;
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                theta[[off + i, off + j]] = var * (delta - a);
            }
        }
    }
    let model = GgmModel::from_precision(SymMatrix::new(theta)?)?;
    if standardize {
        model.standardized()
    } else {
        Ok(model)
    }
}

/// `Cov(X_i, X_j) = start_time + min(i, j)`, `i, j ∈ 1..=n`.
pub fn gaussian_walk(n: usize, start_time: usize) -> Result<GgmModel> {
    if n == 0 {
        return Err(Error::BadParams("gaussian_walk needs n >= 1".into()));
    }
    let theta = walk_precision(n, start_time as f64 + 1.0, 1.0);
    GgmModel::from_precision(SymMatrix::new(theta)?)
}

/// Discrete Gaussian free field: graph Laplacian with the boundary rows and
/// columns deleted. Interior nodes keep their relative order.
pub fn gff(n: usize, edges: &[(usize, usize, f64)], boundary: &[usize]) -> Result<GgmModel> {
    if boundary.is_empty() {
        return Err(Error::SingularLaplacian);
    }
    let mut is_boundary = vec![false; n];
    for &b in boundary {
        if b >= n {
            return Err(Error::IndexOutOfRange { index: b, dim: n });
        }
        is_boundary[b] = true;
    }
    let mut lap = Array2::<f64>::zeros((n, n));
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        if u >= n || v >= n {
            return Err(Error::IndexOutOfRange { index: u.max(v), dim: n });
        }
        if u == v || !(w > 0.0) || !w.is_finite() {
            return Err(Error::BadParams(format!("bad edge ({u}, {v}, {w})")));
        }
        lap[[u, u]] += w;
        lap[[v, v]] += w;
        lap[[u, v]] -= w;
        lap[[v, u]] -= w;
        adj[u].push(v);
        adj[v].push(u);
    }
    // every interior node must reach the boundary
    let mut reached = is_boundary.clone();
    let mut stack: Vec<usize> = boundary.to_vec();
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if !reached[w] {
                reached[w] = true;
                stack.push(w);
            }
        }
    }
    if reached.iter().any(|r| !r) {
        return Err(Error::SingularLaplacian);
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !is_boundary[i]).collect();
    if interior.is_empty() {
        return Err(Error::BadParams("every node is on the boundary".into()));
    }
    let theta = SymMatrix::new(lap)?.submatrix(&interior);
    GgmModel::from_precision(theta).map_err(|e| match e {
        Error::NotPd { .. } => Error::SingularLaplacian,
        e => e,
    })
}

/// Covariance of `(X_1..X_d, Y_1..Y_d)` with `X_i = Z_i + δW_i`,
/// `Y_i = Z_i + δW'_i` and `Z` i.i.d. standard conditioned on `Σ Z_i = 0`.
pub fn break_greedy_covariance(d: usize, delta: f64) -> Result<Array2<f64>> {
    if d <= 2 {
        return Err(Error::BadParams(format!("break_greedy needs d > 2, got {d}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::BadParams(format!("delta must be positive, got {delta}")));
    }
    let mut c = Array2::zeros((2 * d, 2 * d));
    let inv_d = 1.0 / d as f64;
    for a in 0..2 * d {
        for b in 0..2 * d {
            let (i, j) = (a % d, b % d);
            let z = if i == j { 1.0 - inv_d } else { -inv_d };
            let noise = if a == b { delta * delta } else { 0.0 };
            c[[a, b]] = z + noise;
        }
    }
    Ok(c)
}

/// Near-duplicate pairs model, padded with `n_pad` independent unit nodes.
/// Node order: `X_1..X_d, Y_1..Y_d`, then the padding.
pub fn break_greedy(d: usize, delta: f64, n_pad: usize) -> Result<GgmModel> {
    let block = break_greedy_covariance(d, delta)?;
    let n = 2 * d + n_pad;
    let mut c = Array2::eye(n);
    c.slice_mut(ndarray::s![..2 * d, ..2 * d]).assign(&block);
    GgmModel::from_covariance(SymMatrix::new(c)?)
}

/// Conditions the first `d/4` of the `X` nodes out of the break-greedy
/// block, repeats the result `tiles` times and applies a seeded
/// permutation (none when `permute_seed` is `None`).
pub fn possibly_hard(d: usize, delta: f64, tiles: usize, permute_seed: Option<u64>) -> Result<GgmModel> {
    if d % 4 != 0 {
        return Err(Error::BadParams(format!("possibly_hard needs d divisible by 4, got {d}")));
    }
    if tiles == 0 {
        return Err(Error::BadParams("tiles must be positive".into()));
    }
    let sigma0 = SymMatrix::new(break_greedy_covariance(d, delta)?)?;
    let keep: Vec<usize> = (d / 4..2 * d).collect();
    let block = schur_complement(&sigma0, &keep).map_err(|e| Error::SingularCovariance(e.to_string()))?;
    let b = block.dim();
    let n = b * tiles;
    let mut perm: Vec<usize> = (0..n).collect();
    if let Some(seed) = permute_seed {
        Prng::new(seed).shuffle(&mut perm);
    }
    // perm[new] = old
    let mut c = Array2::zeros((n, n));
    for p in 0..n {
        for q in 0..n {
            let (i, j) = (perm[p], perm[q]);
            if i / b == j / b {
                c[[p, q]] = block.get(i % b, j % b);
            }
        }
    }
    GgmModel::from_covariance(SymMatrix::new(c)?)
}

/// The small hand-written models.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Counterexample {
    /// Conditional variance is not supermodular.
    NoSubmodularity,
    /// Submodularity ratio of order `eps / m`.
    NoApxSubmodularity { eps: f64, m: f64 },
    /// Conditioning on a neighbor barely helps.
    BigCancellation { c: f64, kappa: f64 },
    /// Walk-summable but not SDD for `1/3 < r`.
    WalkSummableR { r: f64 },
}

impl Counterexample {
    pub const NAMES: [&'static str; 4] = [
        "no_submodularity",
        "no_apx_submodularity",
        "big_cancellation",
        "walk_summable_r",
    ];

    /// Looks up a name; missing parameters take the defaults
    /// `eps = 0.1, M = 10, C = 10, kappa = 0.5, r = 0.39`.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        Ok(match name {
            "no_submodularity" => Counterexample::NoSubmodularity,
            "no_apx_submodularity" => Counterexample::NoApxSubmodularity {
                eps: get("eps", 0.1),
                m: get("M", get("m", 10.0)),
            },
            "big_cancellation" => Counterexample::BigCancellation {
                c: get("C", get("c", 10.0)),
                kappa: get("kappa", 0.5),
            },
            "walk_summable_r" => Counterexample::WalkSummableR { r: get("r", 0.39) },
            other => return Err(Error::UnknownName(other.to_string())),
        })
    }

    pub fn precision(&self) -> Array2<f64> {
        match *self {
            Counterexample::NoSubmodularity => ndarray::array![
                [1.0, -0.5, -0.5],
                [-0.5, 1.0, 0.5],
                [-0.5, 0.5, 1.0]
            ],
            Counterexample::NoApxSubmodularity { eps, m } => ndarray::array![
                [1.0, -eps, eps],
                [-eps, m, eps - m],
                [eps, eps - m, m]
            ],
            Counterexample::BigCancellation { c, kappa } => {
                let b = c * c / (kappa * kappa);
                ndarray::array![[1.0, c, -c], [c, b, 1.0 - b], [-c, 1.0 - b, b]]
            }
            Counterexample::WalkSummableR { r } => ndarray::array![
                [1.0, -r, r, r],
                [-r, 1.0, r, 0.0],
                [r, r, 1.0, r],
                [r, 0.0, r, 1.0]
            ],
        }
    }

    pub fn build(&self) -> Result<GgmModel> {
        GgmModel::from_precision(SymMatrix::new(self.precision())?)
    }
}

pub fn counterexample(name: &str, params: &BTreeMap<String, f64>) -> Result<GgmModel> {
    Counterexample::from_name(name, params)?.build()
}

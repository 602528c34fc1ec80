//! Gaussian graphical model type and the exact ("population") quantities
//! derived from it: class predicates, κ and degree, SDD rescaling, the
//! lifted Laplacian, effective resistance and conditional moments.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_index_set, cholesky, pseudo_inverse, spectral_radius_nonneg, sym_eigen, SymMatrix,
};

/// Edge presence threshold: `|Θ_ij| > ZERO_TOL * sqrt(Θ_ii Θ_jj)`.
pub const ZERO_TOL: f64 = 1e-12;

/// Default slack for the walk-summability test, relative to the trace of
/// the unit-diagonal sign-flipped matrix.
pub const WALK_SUMMABLE_TOL: f64 = 1e-10;

/// Which side of the model was given exactly by its constructor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimarySide {
    Precision,
    Covariance,
}

/// A zero-mean Gaussian graphical model.
#[derive(Clone, Debug)]
pub struct GgmModel {
    theta: SymMatrix,
    sigma: SymMatrix,
    neighbors: Vec<Vec<usize>>,
    kappa: Option<f64>,
    max_degree: usize,
    primary: PrimarySide,
}

impl GgmModel {
    /// Builds a model from its precision matrix, which must be SPD.
    pub fn from_precision(theta: SymMatrix) -> Result<Self> {
        let chol = cholesky(&theta)?;
        let sigma = chol.inverse();
        Self::assemble(theta, sigma, PrimarySide::Precision)
    }

    /// Builds a model from its covariance matrix, which must be SPD.
    pub fn from_covariance(sigma: SymMatrix) -> Result<Self> {
        let chol = cholesky(&sigma).map_err(|e| Error::SingularCovariance(e.to_string()))?;
        let theta = chol.inverse();
        Self::assemble(theta, sigma, PrimarySide::Covariance)
    }

    fn assemble(theta: SymMatrix, sigma: SymMatrix, primary: PrimarySide) -> Result<Self> {
        let n = theta.dim();
        let prod = theta.as_array().dot(sigma.as_array());
        let row_norm = |a: &Array2<f64>| {
            a.outer_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0f64, f64::max)
        };
        let scale = row_norm(theta.as_array()) * row_norm(sigma.as_array());
        let resid = (&prod - &Array2::<f64>::eye(n))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if !(resid <= 1e-8 * scale.max(1.0)) {
            return Err(Error::SingularCovariance(format!(
                "Θ·Σ deviates from I by {resid:e}"
            )));
        }
        let mut neighbors = vec![Vec::new(); n];
        let mut kappa: Option<f64> = None;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let norm = (theta.get(i, i) * theta.get(j, j)).sqrt();
                let v = theta.get(i, j).abs();
                if v > ZERO_TOL * norm {
                    neighbors[i].push(j);
                    let ratio = v / norm;
                    kappa = Some(kappa.map_or(ratio, |k| k.min(ratio)));
                }
            }
        }
        let max_degree = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        Ok(GgmModel {
            theta,
            sigma,
            neighbors,
            kappa,
            max_degree,
            primary,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn theta(&self) -> &SymMatrix {
        &self.theta
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn primary_side(&self) -> PrimarySide {
        self.primary
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.neighbors.iter().enumerate() {
            out.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Stable 64-bit FNV-1a digest of the precision matrix bits.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(&(self.dim() as u64).to_le_bytes());
        for v in self.theta.as_array().iter() {
            feed(&v.to_bits().to_le_bytes());
        }
        format!("{h:016x}")
    }

    /// Model with precision `diag(d) Θ diag(d)`, i.e. coordinates `X_i / d_i`.
    pub fn rescaled(&self, d: &[f64]) -> Result<GgmModel> {
        if d.len() != self.dim() || d.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::BadParams("rescaling needs positive entries for every node".into()));
        }
        let theta = self.theta.congruence_diag(d);
        let inv: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        let sigma = self.sigma.congruence_diag(&inv);
        Self::assemble(theta, sigma, self.primary)
    }

    /// Same model with every coordinate scaled to unit variance.
    pub fn standardized(&self) -> Result<GgmModel> {
        let d: Vec<f64> = self.sigma.diag().iter().map(|v| v.sqrt()).collect();
        self.rescaled(&d)
    }
}

/// κ: minimum normalized edge strength, `None` when there are no edges.
pub fn kappa_of(model: &GgmModel) -> Option<f64> {
    #[cfg(debug_assertions)]
    if let Some(k) = model.kappa {
        if classify(model, WALK_SUMMABLE_TOL).walk_summable {
            debug_assert!(model.max_degree as f64 <= 1.0 / (k * k) + 1e-9);
        }
    }
    model.kappa
}

pub fn max_degree_of(model: &GgmModel) -> usize {
    model.max_degree
}

/// Result of [`classify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelClass {
    pub attractive: bool,
    pub sdd: bool,
    pub walk_summable: bool,
}

/// Unit-diagonal normalization `D^{-1/2} Θ D^{-1/2}` and its sign-flipped
/// off-diagonal magnitude matrix `Ā`.
fn normalized_abs_offdiag(theta: &SymMatrix) -> SymMatrix {
    let n = theta.dim();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[[i, j]] = theta.get(i, j).abs() / (theta.get(i, i) * theta.get(j, j)).sqrt();
            }
        }
    }
    SymMatrix::symmetrize(a)
}

/// Largest violation of the SDD inequality, as `min_i (M_ii - Σ_j |M_ij|) / M_ii`.
pub fn sdd_slack(m: &SymMatrix) -> f64 {
    let n = m.dim();
    (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
            (m.get(i, i) - off) / m.get(i, i).abs().max(f64::MIN_POSITIVE)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest eigenvalue of `I - Ā` for the unit-diagonal normalization.
pub fn walk_summable_margin(theta: &SymMatrix) -> f64 {
    let n = theta.dim();
    let a = normalized_abs_offdiag(theta);
    let flipped = SymMatrix::symmetrize(Array2::<f64>::eye(n) - a.as_array());
    sym_eigen(&flipped).0[0]
}

pub fn classify(model: &GgmModel, tol: f64) -> ModelClass {
    classify_matrix(model.theta(), tol)
}

/// Class predicates for a symmetric matrix with positive diagonal.
pub fn classify_matrix(theta: &SymMatrix, tol: f64) -> ModelClass {
    let n = theta.dim();
    let mut attractive = true;
    for i in 0..n {
        for j in (i + 1)..n {
            let norm = (theta.get(i, i) * theta.get(j, j)).sqrt();
            if theta.get(i, j) > tol.max(ZERO_TOL) * norm {
                attractive = false;
            }
        }
    }
    let sdd = sdd_slack(theta) >= -tol;
    // Boundary cases (margin ~ 0) count as not walk-summable.
    let walk_summable = walk_summable_margin(theta) > tol * n as f64;
    ModelClass {
        attractive,
        sdd,
        walk_summable,
    }
}

/// Positive diagonal `d` such that `diag(d) Θ diag(d)` is SDD.
///
/// Normalizes the diagonal to one, then uses the Perron vector of `Ā` on
/// every connected component of the graph (isolated nodes keep scale one).
pub fn sdd_rescaling(model: &GgmModel) -> Result<Array1<f64>> {
    if !classify(model, WALK_SUMMABLE_TOL).walk_summable {
        return Err(Error::NotWalkSummable);
    }
    let n = model.dim();
    let theta = model.theta();
    let abar = normalized_abs_offdiag(theta);
    let mut d = Array1::from_iter((0..n).map(|i| 1.0 / theta.get(i, i).sqrt()));
    for comp in components(model) {
        if comp.len() < 2 {
            continue;
        }
        let sub = abar.submatrix(&comp);
        let (_, v) = spectral_radius_nonneg(&sub, 1e-13, 2_000_000)?;
        for (k, &i) in comp.iter().enumerate() {
            d[i] *= v[k];
        }
    }
    if d.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::NoConvergence {
            op: "sdd_rescaling",
            iterations: 0,
        });
    }
    let rescaled = theta.congruence_diag(d.as_slice().unwrap());
    if sdd_slack(&rescaled) < -1e-9 {
        return Err(Error::NoConvergence {
            op: "sdd_rescaling",
            iterations: 0,
        });
    }
    Ok(d)
}

/// Connected components of the model graph, each sorted, ordered by their
/// smallest node.
pub fn components(model: &GgmModel) -> Vec<Vec<usize>> {
    let n = model.dim();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut comp = Vec::new();
        while let Some(u) = stack.pop() {
            comp.push(u);
            for &w in model.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Generalized Laplacian on `2n` nodes whose action on `[x; -x]` reproduces
/// `[Θx; -Θx]`.
///
/// Node `i` maps to row `i` (`e_i`) and its mirror to row `n + i` (`e'_i`).
#[derive(Clone, Debug)]
pub struct LiftedLaplacian {
    m: SymMatrix,
    n: usize,
}

impl LiftedLaplacian {
    pub fn matrix(&self) -> &SymMatrix {
        &self.m
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn node(&self, i: usize) -> usize {
        i
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.n + i
    }

    /// `½ (e_i - e'_i)ᵀ M⁺ (e_i - e'_i)`, which equals `Σ_ii` of the base model.
    pub fn variance_via_resistance(&self, i: usize) -> Result<f64> {
        Ok(0.5 * effective_resistance(&self.m, self.node(i), self.mirror(i))?)
    }
}

pub fn lift_laplacian(theta_sdd: &SymMatrix) -> Result<LiftedLaplacian> {
    if sdd_slack(theta_sdd) < -1e-9 {
        return Err(Error::NotSdd);
    }
    let n = theta_sdd.dim();
    let mut m = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let v = theta_sdd.get(i, j);
            if i == j {
                m[[i, i]] = v;
                m[[n + i, n + i]] = v;
            } else if v <= 0.0 {
                m[[i, j]] = v;
                m[[n + i, n + j]] = v;
            } else {
                m[[i, n + j]] = -v;
                m[[n + i, j]] = -v;
            }
        }
    }
    Ok(LiftedLaplacian {
        m: SymMatrix::symmetrize(m),
        n,
    })
}

/// True when `lap` has nonpositive off-diagonals and nonnegative row sums
/// (up to a relative tolerance).
pub fn is_generalized_laplacian(lap: &SymMatrix) -> bool {
    let n = lap.dim();
    let scale = lap.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let v = lap.get(i, j);
            if i != j && v > 1e-12 * scale {
                return false;
            }
            row += v;
        }
        if row < -1e-10 * scale {
            return false;
        }
    }
    true
}

/// Precomputed `L⁺` for repeated effective-resistance queries.
#[derive(Clone, Debug)]
pub struct Resistance {
    pinv: SymMatrix,
}

impl Resistance {
    pub fn new(lap: &SymMatrix) -> Result<Self> {
        if !is_generalized_laplacian(lap) {
            return Err(Error::BadParams("not a generalized Laplacian".into()));
        }
        Ok(Resistance {
            pinv: pseudo_inverse(lap, 1e-12),
        })
    }

    pub fn between(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.pinv.dim();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, dim: n });
            }
        }
        if i == j {
            return Ok(0.0);
        }
        let p = &self.pinv;
        let r = p.get(i, i) + p.get(j, j) - 2.0 * p.get(i, j);
        Ok(r.max(0.0))
    }
}

/// `R_eff(i, j) = (e_i - e_j)ᵀ L⁺ (e_i - e_j)`.
pub fn effective_resistance(lap: &SymMatrix, i: usize, j: usize) -> Result<f64> {
    Resistance::new(lap)?.between(i, j)
}

/// Coefficients and residual variance of regressing coordinate `i` on the
/// coordinates `s` under covariance `sigma`.
///
/// Uses a Cholesky factor of `Σ[s ∪ {i}]` with `i` placed last: the last
/// pivot squared is the conditional variance.
pub(crate) fn conditional_fit(sigma: &SymMatrix, i: usize, s: &[usize]) -> Result<(Array1<f64>, f64)> {
    let n = sigma.dim();
    check_index_set(s, n)?;
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, dim: n });
    }
    if s.contains(&i) {
        return Err(Error::Invalid(format!("target {i} is in the conditioning set")));
    }
    let k = s.len();
    if k == 0 {
        return Ok((Array1::zeros(0), sigma.get(i, i)));
    }
    let mut idx = s.to_vec();
    idx.push(i);
    let sub = sigma.submatrix(&idx);
    let chol = cholesky(&sub).map_err(|_| Error::SingularSubmatrix)?;
    let l = chol.factor();
    let var = l[[k, k]] * l[[k, k]];
    // w solves L_SSᵀ w = L_iS
    let mut w = Array1::zeros(k);
    for r in (0..k).rev() {
        let mut v = l[[k, r]];
        for c in (r + 1)..k {
            v -= l[[c, r]] * w[c];
        }
        w[r] = v / l[[r, r]];
    }
    Ok((w, var))
}

/// Exact `Var(X_i | X_S)`.
pub fn conditional_variance(model: &GgmModel, i: usize, s: &[usize]) -> Result<f64> {
    Ok(conditional_fit(model.sigma(), i, s)?.1)
}

/// Exact regression vector `w` with `E[X_i | X_S] = w · X_S`, in the order of `s`.
pub fn conditional_coefficients(model: &GgmModel, i: usize, s: &[usize]) -> Result<Array1<f64>> {
    Ok(conditional_fit(model.sigma(), i, s)?.0)
}

/// On-disk model representation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub precision: Vec<Vec<f64>>,
    /// Present for models defined through their covariance; then it is the
    /// authoritative side when reading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl ModelFile {
    pub fn from_model(model: &GgmModel, config: Option<serde_json::Value>) -> Self {
        ModelFile {
            n: model.dim(),
            precision: model.theta().to_rows(),
            covariance: (model.primary_side() == PrimarySide::Covariance).then(|| model.sigma().to_rows()),
            config,
        }
    }

    pub fn into_model(self) -> Result<GgmModel> {
        if self.precision.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "n = {} but precision has {} rows",
                self.n,
                self.precision.len()
            )));
        }
        match self.covariance {
            Some(c) => GgmModel::from_covariance(SymMatrix::from_rows(&c)?),
            None => GgmModel::from_precision(SymMatrix::from_rows(&self.precision)?),
        }
    }
}

pub fn parse_model_json(text: &str) -> Result<GgmModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model(a: Array2<f64>) -> GgmModel {
        GgmModel::from_precision(SymMatrix::new(a).unwrap()).unwrap()
    }

    fn no_submodularity() -> GgmModel {
        model(array![[1.0, -0.5, -0.5], [-0.5, 1.0, 0.5], [-0.5, 0.5, 1.0]])
    }

    fn r_matrix(r: f64) -> GgmModel {
        model(array![
            [1.0, -r, r, r],
            [-r, 1.0, r, 0.0],
            [r, r, 1.0, r],
            [r, 0.0, r, 1.0]
        ])
    }

    #[test]
    fn classify_identity() {
        let c = classify(&model(Array2::eye(3)), WALK_SUMMABLE_TOL);
        assert!(c.attractive && c.sdd && c.walk_summable);
    }

    #[test]
    fn classify_r039() {
        let c = classify(&r_matrix(0.39), WALK_SUMMABLE_TOL);
        assert_eq!(
            c,
            ModelClass {
                attractive: false,
                sdd: false,
                walk_summable: true
            }
        );
        // SDD exactly up to r = 1/3
        assert!(classify(&r_matrix(0.33), WALK_SUMMABLE_TOL).sdd);
    }

    #[test]
    fn classify_big_cancellation() {
        let (c, k) = (10.0, 0.5);
        let b = c * c / (k * k);
        let m = model(array![[1.0, c, -c], [c, b, 1.0 - b], [-c, 1.0 - b, b]]);
        assert!(!classify(&m, WALK_SUMMABLE_TOL).walk_summable);
        assert!(matches!(sdd_rescaling(&m), Err(Error::NotWalkSummable)));
    }

    #[test]
    fn rescaling_r039_matches_printed_matrix() {
        let m = r_matrix(0.39);
        let d = sdd_rescaling(&m).unwrap();
        let printed = array![
            [0.310634, -0.0945889, 0.121147, 0.0945889],
            [-0.0945889, 0.189366, 0.0945889, 0.0],
            [0.121147, 0.0945889, 0.310634, 0.0945889],
            [0.0945889, 0.0, 0.0945889, 0.189366]
        ];
        let got = m.theta().congruence_diag(d.as_slice().unwrap());
        for (a, b) in got.as_array().iter().zip(printed.iter()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!((d[0] - 0.557).abs() < 1e-3 && (d[1] - 0.435).abs() < 1e-3);
    }

    #[test]
    fn rescaling_of_attractive_chain_is_laplacian() {
        let m = model(array![[2.0, -1.0], [-1.0, 2.0]]);
        let d = sdd_rescaling(&m).unwrap();
        let r = m.theta().congruence_diag(d.as_slice().unwrap());
        assert!(is_generalized_laplacian(&r));
    }

    #[test]
    fn rescaling_of_sdd_model_is_sdd() {
        let m = model(array![[3.0, 1.0, -1.0], [1.0, 2.0, 0.5], [-1.0, 0.5, 2.0]]);
        let d = sdd_rescaling(&m).unwrap();
        assert!(sdd_slack(&m.theta().congruence_diag(d.as_slice().unwrap())) >= -1e-9);
    }

    #[test]
    fn rescaling_handles_isolated_nodes() {
        let m = model(array![[2.0, -1.0, 0.0], [-1.0, 2.0, 0.0], [0.0, 0.0, 4.0]]);
        let d = sdd_rescaling(&m).unwrap();
        assert!(d.iter().all(|&v| v > 0.0));
        assert!((d[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lift_attractive_is_block_diagonal() {
        let theta = SymMatrix::new(array![[2.0, -1.0], [-1.0, 2.0]]).unwrap();
        let lift = lift_laplacian(&theta).unwrap();
        let m = lift.matrix();
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(2, 3), -1.0);
        assert_eq!(m.get(3, 3), 2.0);
    }

    #[test]
    fn lift_scalar() {
        let lift = lift_laplacian(&SymMatrix::new(array![[3.0]]).unwrap()).unwrap();
        assert_eq!(lift.matrix().as_array(), &array![[3.0, 0.0], [0.0, 3.0]]);
    }

    #[test]
    fn lift_reproduces_variances_of_no_submodularity() {
        let m = no_submodularity();
        let lift = lift_laplacian(m.theta()).unwrap();
        assert!(is_generalized_laplacian(lift.matrix()));
        for i in 0..3 {
            let v = lift.variance_via_resistance(i).unwrap();
            assert!((v - m.sigma().get(i, i)).abs() < 1e-10);
        }
        let x = array![0.3, -1.2, 0.7];
        let mut lifted = Array1::zeros(6);
        for i in 0..3 {
            lifted[i] = x[i];
            lifted[3 + i] = -x[i];
        }
        let out = lift.matrix().matvec(lifted.view());
        let tx = m.theta().matvec(x.view());
        for i in 0..3 {
            assert!((out[i] - tx[i]).abs() < 1e-12);
            assert!((out[3 + i] + tx[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lift_rejects_non_sdd() {
        let theta = SymMatrix::new(array![[1.0, 0.9, 0.9], [0.9, 1.0, 0.0], [0.9, 0.0, 1.0]]).unwrap();
        assert!(matches!(lift_laplacian(&theta), Err(Error::NotSdd)));
    }

    fn path_laplacian(k: usize) -> SymMatrix {
        let n = k + 1;
        let mut a = Array2::zeros((n, n));
        for e in 0..k {
            a[[e, e]] += 1.0;
            a[[e + 1, e + 1]] += 1.0;
            a[[e, e + 1]] -= 1.0;
            a[[e + 1, e]] -= 1.0;
        }
        SymMatrix::new(a).unwrap()
    }

    #[test]
    fn resistance_examples() {
        for k in 1..6 {
            let r = effective_resistance(&path_laplacian(k), 0, k).unwrap();
            assert!((r - k as f64).abs() < 1e-10);
        }
        let tri = SymMatrix::new(array![[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((effective_resistance(&tri, i, j).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(effective_resistance(&tri, 1, 1).unwrap(), 0.0);
        assert!(matches!(
            effective_resistance(&tri, 0, 5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn conditional_variance_no_submodularity() {
        let m = no_submodularity();
        let v = |s: &[usize]| conditional_variance(&m, 0, s).unwrap();
        assert!((v(&[]) - 1.5).abs() < 1e-12);
        assert!((v(&[1]) - 4.0 / 3.0).abs() < 1e-12);
        assert!((v(&[2]) - 4.0 / 3.0).abs() < 1e-12);
        assert!((v(&[1, 2]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_variance_markov() {
        let m = model(array![[2.0, -1.0, 0.0], [-1.0, 3.0, -1.0], [0.0, -1.0, 2.0]]);
        assert!((conditional_variance(&m, 1, &[0, 2]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let id = model(Array2::eye(4));
        assert!((conditional_variance(&id, 2, &[0, 1, 3]).unwrap() - 1.0).abs() < 1e-15);
        assert!(conditional_variance(&id, 2, &[2]).is_err());
    }

    #[test]
    fn conditional_coefficients_examples() {
        let m = model(array![[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]);
        let w = conditional_coefficients(&m, 1, &[0, 2]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
        // chain, i = 0 given {1}: Σ01 / Σ11
        let w = conditional_coefficients(&m, 0, &[1]).unwrap();
        let s = m.sigma();
        assert!((w[0] - s.get(0, 1) / s.get(1, 1)).abs() < 1e-12);
        let id = model(Array2::eye(3));
        assert_eq!(conditional_coefficients(&id, 0, &[1, 2]).unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn kappa_and_degree() {
        let m = model(array![[2.0, -1.0], [-1.0, 2.0]]);
        assert!((kappa_of(&m).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(max_degree_of(&m), 1);
        let id = model(Array2::eye(3));
        assert_eq!(kappa_of(&id), None);
        assert_eq!(max_degree_of(&id), 0);
    }

    #[test]
    fn path_plus_eps_has_degree_two() {
        for n in [3, 5, 9] {
            let mut a = path_laplacian(n - 1).into_array();
            for i in 0..n {
                a[[i, i]] += 1e-3;
            }
            assert_eq!(max_degree_of(&model(a)), 2);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = no_submodularity();
        let text = serde_json::to_string(&ModelFile::from_model(&m, None)).unwrap();
        let back = parse_model_json(&text).unwrap();
        assert_eq!(back.theta(), m.theta());
        assert!(parse_model_json(r#"{"n": 2, "precision": [[1, 2], [2, 1]]}"#).is_err());
        assert!(parse_model_json(r#"{"n": 2, "precision": [[1, 0.5], [0.4, 1]]}"#).is_err());
    }
}

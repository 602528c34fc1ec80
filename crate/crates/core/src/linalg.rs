//! Dense symmetric linear algebra kernel.
//!
//! Everything here works on small dense matrices (n in the tens, at most a
//! few hundred). Tolerances are relative to the scale of the input (trace,
//! largest eigenvalue or largest diagonal of a factor) because the matrices
//! this crate cares about are deliberately ill-conditioned.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative symmetry tolerance applied at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A dense symmetric matrix.
///
/// Storage is a full row-major `n x n` array. Both triangles are kept and
/// are equal up to [`SYMMETRY_TOL`] relative to the largest entry; the
/// constructor averages the two triangles so downstream code can rely on
/// exact symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Array2<f64>);

impl SymMatrix {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!("{r}x{c} is not square")));
        }
        if r == 0 {
            return Err(Error::Invalid("matrix dimension must be at least 1".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("matrix has non-finite entries".into()));
        }
        let scale = 1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..r {
            for j in (i + 1)..r {
                let gap = (a[[i, j]] - a[[j, i]]).abs();
                if gap > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
        }
        Ok(Self::symmetrize(a))
    }

    /// Builds from nested rows, as read from a JSON file.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let a = Array2::from_shape_vec((n, n), flat)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Self::new(a)
    }

    /// Averages the two triangles without any check.
    pub(crate) fn symmetrize(mut a: Array2<f64>) -> Self {
        let n = a.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (a[[i, j]] + a[[j, i]]);
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        SymMatrix(a)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Array2::eye(n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Array2::zeros((n, n)))
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymMatrix(Array2::from_diag(&Array1::from(d.to_vec())))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn diag(&self) -> Array1<f64> {
        self.0.diag().to_owned()
    }

    pub fn trace(&self) -> f64 {
        self.0.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.outer_iter().map(|r| r.to_vec()).collect()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let mut out = Array2::zeros((idx.len(), idx.len()));
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[[a, b]] = self.0[[i, j]];
            }
        }
        SymMatrix(out)
    }

    /// Returns `diag(d) * self * diag(d)`.
    pub fn congruence_diag(&self, d: &[f64]) -> SymMatrix {
        let n = self.dim();
        let mut out = self.0.clone();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] *= d[i] * d[j];
            }
        }
        SymMatrix(out)
    }

    pub fn matvec(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.0.dot(&x)
    }
}

/// Lower-triangular Cholesky factor `L` with `a = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn factor(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `a x = b`.
    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let y = forward_sub(&self.l, b);
        backward_sub_transposed(&self.l, y.view())
    }

    /// Full inverse of the factored matrix.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        let mut inv = Array2::zeros((n, n));
        let mut e = Array1::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(e.view());
            inv.column_mut(j).assign(&col);
        }
        SymMatrix::symmetrize(inv)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|v| v.ln()).sum::<f64>()
    }
}

/// Cholesky factorization with a trace-relative pivot floor.
///
/// A pivot `<= n * 1e-14 * trace(a)` is reported as [`Error::NotPd`].
pub fn cholesky(a: &SymMatrix) -> Result<Cholesky> {
    let n = a.dim();
    let m = a.as_array();
    let trace = a.trace();
    let floor = n as f64 * 1e-14 * trace;
    if !(trace > 0.0) {
        return Err(Error::NotPd { row: 0, pivot: trace });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = m[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) {
            return Err(Error::NotPd { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut v = m[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / djj;
        }
    }
    Ok(Cholesky { l })
}

pub fn solve_spd(a: &SymMatrix, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has length {}, matrix is {}",
            b.len(),
            a.dim()
        )));
    }
    Ok(cholesky(a)?.solve(b))
}

fn forward_sub(l: &Array2<f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    y
}

fn backward_sub_transposed(l: &Array2<f64>, y: ArrayView1<'_, f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[[k, i]] * x[k];
        }
        x[i] = v / l[[i, i]];
    }
    x
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn sym_eigen(a: &SymMatrix) -> (Array1<f64>, Array2<f64>) {
    let n = a.dim();
    let mut m = a.as_array().clone();
    let mut v = Array2::<f64>::eye(n);
    let norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (Array1::zeros(n), v);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[[a, a]].total_cmp(&m[[b, b]]));
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vecs = v.select(Axis(1), &order);
    (vals, vecs)
}

pub fn min_eigenvalue(a: &SymMatrix) -> f64 {
    sym_eigen(a).0[0]
}

/// Moore–Penrose pseudo-inverse through the eigendecomposition.
///
/// Eigenvalues with `|λ| <= rank_tol * max|λ|` are treated as zero.
pub fn pseudo_inverse(a: &SymMatrix, rank_tol: f64) -> SymMatrix {
    let n = a.dim();
    let (vals, vecs) = sym_eigen(a);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = Array2::zeros((n, n));
    if top == 0.0 {
        return SymMatrix(out);
    }
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= rank_tol * top {
            continue;
        }
        let col = vecs.column(k);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += col[i] * col[j] / lam;
            }
        }
    }
    SymMatrix::symmetrize(out)
}

/// Dominant eigenpair of an entrywise nonnegative symmetric matrix.
///
/// Power iteration from the all-ones vector on `a + αI` with
/// `α = max row sum / 2`; the shift separates `ρ` from `-ρ` for bipartite
/// patterns without moving the eigenvector. The returned vector is
/// nonnegative with unit Euclidean norm.
pub fn spectral_radius_nonneg(
    a: &SymMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Array1<f64>)> {
    let n = a.dim();
    let m = a.as_array();
    if m.iter().any(|&v| v < 0.0) {
        return Err(Error::BadParams(
            "spectral_radius_nonneg needs a nonnegative matrix".into(),
        ));
    }
    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let row_max = m
        .outer_iter()
        .map(|r| r.sum())
        .fold(0.0f64, |acc, s| acc.max(s));
    if row_max == 0.0 {
        return Ok((0.0, v));
    }
    let shift = 0.5 * row_max;
    for _ in 0..max_iter {
        let av = m.dot(&v);
        let lambda = v.dot(&av);
        let resid = (&av - &(&v * lambda)).mapv(|x| x * x).sum().sqrt();
        if resid <= tol {
            v.mapv_inplace(|x| x.max(0.0));
            let nv = v.dot(&v).sqrt();
            v /= nv;
            return Ok((lambda, v));
        }
        let mut w = av + &(&v * shift);
        let nw = w.dot(&w).sqrt();
        w /= nw;
        v = w;
    }
    Err(Error::NoConvergence {
        op: "spectral_radius_nonneg",
        iterations: max_iter,
    })
}

/// Solves the general square system `a x = b` by Gaussian elimination with
/// partial pivoting; `None` when a pivot falls under the relative floor.
pub(crate) fn lu_solve(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut rhs = b.clone();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = n as f64 * 1e-14 * scale;
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= floor {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap([col, k], [piv, k]);
            }
            for k in 0..rhs.ncols() {
                rhs.swap([col, k], [piv, k]);
            }
        }
        for r in (col + 1)..n {
            let f = m[[r, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[r, k]] -= f * m[[col, k]];
            }
            for k in 0..rhs.ncols() {
                rhs[[r, k]] -= f * rhs[[col, k]];
            }
        }
    }
    let mut x = Array2::zeros(rhs.dim());
    for k in 0..rhs.ncols() {
        for i in (0..n).rev() {
            let mut v = rhs[[i, k]];
            for j in (i + 1)..n {
                v -= m[[i, j]] * x[[j, k]];
            }
            x[[i, k]] = v / m[[i, i]];
        }
    }
    Some(x)
}

/// `a[keep,keep] - a[keep,elim] a[elim,elim]⁻¹ a[elim,keep]`, where `elim`
/// is the complement of `keep`.
pub fn schur_complement(a: &SymMatrix, keep: &[usize]) -> Result<SymMatrix> {
    let n = a.dim();
    check_index_set(keep, n)?;
    if keep.is_empty() {
        return Err(Error::BadParams("schur_complement needs a nonempty keep set".into()));
    }
    let elim: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let akk = a.submatrix(keep).into_array();
    if elim.is_empty() {
        return Ok(SymMatrix(akk));
    }
    let aee = a.submatrix(&elim).into_array();
    let mut aek = Array2::zeros((elim.len(), keep.len()));
    for (r, &e) in elim.iter().enumerate() {
        for (c, &k) in keep.iter().enumerate() {
            aek[[r, c]] = a.get(e, k);
        }
    }
    let x = lu_solve(&aee, &aek).ok_or(Error::SingularBlock)?;
    let out = akk - aek.t().dot(&x);
    Ok(SymMatrix::symmetrize(out))
}

pub(crate) fn check_index_set(idx: &[usize], n: usize) -> Result<()> {
    for (p, &i) in idx.iter().enumerate() {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        if idx[..p].contains(&i) {
            return Err(Error::Invalid(format!("index {i} repeated")));
        }
    }
    Ok(())
}

/// Householder QR; returns the `min(m, p) x p` upper-trapezoidal factor R.
pub fn qr_r(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, p) = a.dim();
    let mut r = a.to_owned();
    let steps = m.min(p);
    for k in 0..steps {
        let norm = r.slice(s![k.., k]).mapv(|x| x * x).sum().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[[k, k]] > 0.0 { -norm } else { norm };
        let mut v = r.slice(s![k.., k]).to_owned();
        v[0] -= alpha;
        let vnorm2 = v.dot(&v);
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..p {
            let proj = v.dot(&r.slice(s![k.., j])) * 2.0 / vnorm2;
            if proj != 0.0 {
                let mut col = r.slice_mut(s![k.., j]);
                col.scaled_add(-proj, &v);
            }
        }
        for i in (k + 1)..m {
            r[[i, k]] = 0.0;
        }
    }
    let rows = m.min(p);
    let mut out = r.slice(s![..rows, ..]).to_owned();
    for i in 0..rows {
        for j in 0..i.min(p) {
            out[[i, j]] = 0.0;
        }
    }
    out
}

/// Least squares of `c` on the columns of `b` via Householder QR.
///
/// Returns `(coefficients, residual sum of squares)`. Fails with
/// [`Error::RankDeficient`] when the smallest diagonal of R is at most
/// `1e-10` times the largest.
pub fn lstsq_qr(b: ArrayView2<'_, f64>, c: ArrayView1<'_, f64>) -> Result<(Array1<f64>, f64)> {
    let (m, k) = b.dim();
    if c.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {m}",
            c.len()
        )));
    }
    if k == 0 {
        return Ok((Array1::zeros(0), c.dot(&c)));
    }
    if m < k {
        return Err(Error::RankDeficient);
    }
    let mut aug = Array2::zeros((m, k + 1));
    aug.slice_mut(s![.., ..k]).assign(&b);
    aug.column_mut(k).assign(&c);
    let r = qr_r(aug.view());
    let diag_max = (0..k).map(|i| r[[i, i]].abs()).fold(0.0f64, f64::max);
    let diag_min = (0..k).map(|i| r[[i, i]].abs()).fold(f64::INFINITY, f64::min);
    if !(diag_min > 1e-10 * diag_max) {
        return Err(Error::RankDeficient);
    }
    let mut w = Array1::zeros(k);
    for i in (0..k).rev() {
        let mut v = r[[i, k]];
        for j in (i + 1)..k {
            v -= r[[i, j]] * w[j];
        }
        w[i] = v / r[[i, i]];
    }
    let rss = if r.nrows() > k { r[[k, k]] * r[[k, k]] } else { 0.0 };
    Ok((w, rss))
}

/// Inverse of an upper triangular matrix.
pub(crate) fn upper_tri_inverse(r: &Array2<f64>) -> Array2<f64> {
    let k = r.nrows();
    let mut inv = Array2::zeros((k, k));
    for col in 0..k {
        for i in (0..=col).rev() {
            let mut v = if i == col { 1.0 } else { 0.0 };
            for j in (i + 1)..=col {
                v -= r[[i, j]] * inv[[j, col]];
            }
            inv[[i, col]] = v / r[[i, i]];
        }
    }
    inv
}

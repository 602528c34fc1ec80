//! Seeded Gaussian sampling, empirical covariance, standardization and
//! sample splitting.

use std::io::{Read, Write};
use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, SymMatrix};
use crate::model::GgmModel;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for `task` derived from a master `seed`.
pub fn derive_seed(seed: u64, task: u64) -> u64 {
    seed ^ mix64(task)
}

/// Deterministic generator: ChaCha20 keyed by the 64-bit seed, with
/// Box–Muller normals (both values of each pair are used).
#[derive(Clone, Debug)]
pub struct Prng {
    core: ChaCha20Rng,
    spare: Option<f64>,
}

impl Prng {
    pub fn new(seed: u64) -> Self {
        Prng {
            core: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Independent stream for a numbered subtask.
    pub fn for_task(seed: u64, task: u64) -> Self {
        Prng::new(derive_seed(seed, task))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` (rejection sampling, no modulo bias).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Samples plus their provenance and named row ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    data: Array2<f64>,
    seed: Option<u64>,
    model_hash: Option<String>,
    splits: Vec<(String, Range<usize>)>,
}

impl SampleSet {
    /// Wraps an `m × n` data matrix with the single split `"all"`.
    pub fn from_data(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Invalid("sample matrix must be nonempty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("sample matrix has non-finite entries".into()));
        }
        let m = data.nrows();
        Ok(SampleSet {
            data,
            seed: None,
            model_hash: None,
            splits: vec![("all".to_string(), 0..m)],
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn model_hash(&self) -> Option<&str> {
        self.model_hash.as_deref()
    }

    pub fn split_names(&self) -> Vec<&str> {
        self.splits.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn split_range(&self, name: &str) -> Result<Range<usize>> {
        self.splits
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r.clone())
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::EmptySplit(name.to_string()))
    }

    /// Rows of the named split.
    pub fn rows(&self, name: &str) -> Result<ArrayView2<'_, f64>> {
        let r = self.split_range(name)?;
        Ok(self.data.slice(s![r, ..]))
    }
}

/// `m` i.i.d. draws from `N(0, Σ)` as `x = L z`, `L = chol(Σ)`.
pub fn sample(model: &GgmModel, m: usize, seed: u64) -> Result<SampleSet> {
    if m == 0 {
        return Err(Error::BadParams("m must be at least 1".into()));
    }
    let chol = cholesky(model.sigma())?;
    let l = chol.factor();
    let n = model.dim();
    let mut rng = Prng::new(seed);
    let mut z = Array2::zeros((m, n));
    for v in z.iter_mut() {
        *v = rng.normal();
    }
    let data = z.dot(&l.t());
    let mut set = SampleSet::from_data(data)?;
    set.seed = Some(seed);
    set.model_hash = Some(model.digest());
    Ok(set)
}

/// `(1/m) XᵀX` over the rows of a split; the mean is not subtracted.
pub fn empirical_covariance(s: &SampleSet, split: &str) -> Result<SymMatrix> {
    Ok(gram(s.rows(split)?))
}

pub(crate) fn gram(x: ArrayView2<'_, f64>) -> SymMatrix {
    let m = x.nrows() as f64;
    SymMatrix::symmetrize(x.t().dot(&x) / m)
}

/// Centers every column and scales it to unit empirical variance.
/// Returns the new set (splits preserved) and the column standard deviations.
pub fn standardize(s: &SampleSet) -> Result<(SampleSet, Array1<f64>)> {
    let mut data = s.data.clone();
    let m = data.nrows() as f64;
    let mut scale = Array1::zeros(data.ncols());
    for (j, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
        let peak = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mean = col.sum() / m;
        col.mapv_inplace(|v| v - mean);
        let var = col.iter().map(|v| v * v).sum::<f64>() / m;
        if !(var > (1e-12 * peak).powi(2)) {
            return Err(Error::ZeroVarianceColumn(j));
        }
        let sd = var.sqrt();
        col.mapv_inplace(|v| v / sd);
        scale[j] = sd;
    }
    let mut out = s.clone();
    out.data = data;
    Ok((out, scale))
}

/// Row ranges of `parts` consecutive blocks of `⌊m/parts⌋` rows.
pub fn split_ranges(m: usize, parts: usize) -> Result<Vec<Range<usize>>> {
    if !(2..=3).contains(&parts) {
        return Err(Error::BadParams(format!("parts must be 2 or 3, got {parts}")));
    }
    if m < parts {
        return Err(Error::TooFewSamples { needed: parts - 1, have: m });
    }
    let b = m / parts;
    Ok((0..parts).map(|p| p * b..(p + 1) * b).collect())
}

/// Adds splits `s1..s{parts}` of `⌊m/parts⌋` consecutive rows each.
pub fn split(s: &SampleSet, parts: usize) -> Result<SampleSet> {
    let ranges = split_ranges(s.m(), parts)?;
    let mut out = s.clone();
    out.splits.retain(|(n, _)| !n.starts_with('s'));
    for (p, r) in ranges.into_iter().enumerate() {
        out.splits.push((format!("s{}", p + 1), r));
    }
    Ok(out)
}

/// Writes the `x1,...,xn` CSV format with 17 significant digits.
pub fn write_csv<W: Write>(s: &SampleSet, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record((1..=s.n()).map(|j| format!("x{j}")))?;
    for row in s.data.outer_iter() {
        wr.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<SampleSet> {
    let mut rd = csv::Reader::from_reader(r);
    let n = rd.headers()?.len();
    let mut values = Vec::new();
    let mut m = 0;
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "row {} has {} fields, header has {n}",
                m + 1,
                rec.len()
            )));
        }
        for f in rec.iter() {
            values.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad number `{f}`: {e}")))?,
            );
        }
        m += 1;
    }
    let data = Array2::from_shape_vec((m, n), values)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    SampleSet::from_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn identity(n: usize) -> GgmModel {
        GgmModel::from_precision(SymMatrix::identity(n)).unwrap()
    }

    #[test]
    fn identity_variances_converge() {
        let s = sample(&identity(3), 100_000, 7).unwrap();
        let c = empirical_covariance(&s, "all").unwrap();
        for i in 0..3 {
            assert!((c.get(i, i) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn single_row_and_determinism() {
        let m = identity(4);
        assert_eq!(sample(&m, 1, 3).unwrap().data().dim(), (1, 4));
        assert_eq!(sample(&m, 20, 9).unwrap(), sample(&m, 20, 9).unwrap());
        assert_ne!(sample(&m, 20, 9).unwrap().data(), sample(&m, 20, 10).unwrap().data());
        assert!(sample(&m, 0, 1).is_err());
    }

    #[test]
    fn covariance_examples() {
        let x = SampleSet::from_data(array![[1.0, 2.0, -1.0]]).unwrap();
        let c = empirical_covariance(&x, "all").unwrap();
        assert_eq!(c.as_array(), &array![[1.0, 2.0, -1.0], [2.0, 4.0, -2.0], [-1.0, -2.0, 1.0]]);
        let id = SampleSet::from_data(Array2::eye(4)).unwrap();
        let c = empirical_covariance(&id, "all").unwrap();
        assert_eq!(c.as_array(), &(Array2::<f64>::eye(4) / 4.0));
        assert!(matches!(empirical_covariance(&id, "s1"), Err(Error::EmptySplit(_))));
    }

    #[test]
    fn chain_covariance_within_statistical_bound() {
        let theta = array![[2.0, -1.0, 0.0, 0.0], [-1.0, 2.0, -1.0, 0.0], [0.0, -1.0, 2.0, -1.0], [0.0, 0.0, -1.0, 2.0]];
        let model = GgmModel::from_precision(SymMatrix::new(theta).unwrap()).unwrap();
        let m = 50_000;
        let c = empirical_covariance(&sample(&model, m, 11).unwrap(), "all").unwrap();
        let bound = 5.0 * ((4f64).ln() / m as f64).sqrt();
        for (a, b) in c.as_array().iter().zip(model.sigma().as_array().iter()) {
            assert!((a - b).abs() < bound, "{a} vs {b}");
        }
    }

    #[test]
    fn standardize_examples() {
        let s = sample(&identity(3), 50, 1).unwrap();
        let (z, scale) = standardize(&s).unwrap();
        let c = empirical_covariance(&z, "all").unwrap();
        for i in 0..3 {
            assert!((c.get(i, i) - 1.0).abs() < 1e-12);
            assert!(scale[i] > 0.0);
        }
        let (zz, _) = standardize(&z).unwrap();
        for (a, b) in zz.data().iter().zip(z.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut scaled = s.data().clone();
        scaled.column_mut(1).mapv_inplace(|v| v * 10.0);
        let (z2, _) = standardize(&SampleSet::from_data(scaled).unwrap()).unwrap();
        for (a, b) in z2.data().iter().zip(z.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut constant = s.data().clone();
        constant.column_mut(2).fill(3.5);
        assert!(matches!(
            standardize(&SampleSet::from_data(constant).unwrap()),
            Err(Error::ZeroVarianceColumn(2))
        ));
    }

    #[test]
    fn split_examples() {
        let set = |m: usize| SampleSet::from_data(Array2::zeros((m, 2))).unwrap();
        let two = split(&set(10), 2).unwrap();
        assert_eq!(two.split_range("s1").unwrap(), 0..5);
        assert_eq!(two.split_range("s2").unwrap(), 5..10);
        let three = split(&set(11), 3).unwrap();
        assert_eq!(three.split_range("s3").unwrap(), 6..9);
        assert!(matches!(split(&set(2), 3), Err(Error::TooFewSamples { .. })));
        assert!(split(&set(10), 4).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = sample(&identity(3), 5, 2).unwrap();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,x3\n"));
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.data(), s.data());
    }

    #[test]
    fn below_and_shuffle() {
        let mut r = Prng::new(5);
        for _ in 0..1000 {
            assert!(r.below(7) < 7);
        }
        let mut v: Vec<usize> = (0..20).collect();
        r.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn task_streams_differ() {
        assert_ne!(Prng::for_task(1, 0).next_u64(), Prng::for_task(1, 1).next_u64());
        assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
    }
}

//! Random model families shared by the integration tests.
#![allow(dead_code)]

use ggm_core::linalg::{sym_eigen, SymMatrix};
use ggm_core::model::GgmModel;
use ggm_core::sampler::Prng;
use ndarray::Array2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Nonpositive off-diagonals, diagonally dominant.
    AttractiveSdd,
    /// Nonpositive off-diagonals, `D (I - A) D` with `ρ(A) < 1`.
    Attractive,
    /// Mixed signs, diagonally dominant.
    Sdd,
    /// Mixed signs, `D (I - A) D` with `ρ(|A|) < 1`.
    WalkSummable,
}

pub const KINDS: [Kind; 4] = [Kind::AttractiveSdd, Kind::Attractive, Kind::Sdd, Kind::WalkSummable];

fn uniform(rng: &mut Prng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Symmetric weight matrix of a random graph with positive weights in
/// `[0.2, 1]`, edge probability `p` and maximum degree `max_deg`.
pub fn random_weights(rng: &mut Prng, n: usize, p: f64, max_deg: usize) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    let mut deg = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p && deg[i] < max_deg && deg[j] < max_deg {
                let v = uniform(rng, 0.2, 1.0);
                w[[i, j]] = v;
                w[[j, i]] = v;
                deg[i] += 1;
                deg[j] += 1;
            }
        }
    }
    w
}

fn largest_eigenvalue(a: &Array2<f64>) -> f64 {
    let (vals, _) = sym_eigen(&SymMatrix::new(a.clone()).unwrap());
    vals.iter().cloned().fold(0.0, f64::max)
}

pub fn random_model_deg(kind: Kind, n: usize, max_deg: usize, seed: u64) -> GgmModel {
    let mut rng = Prng::new(seed);
    let p = uniform(&mut rng, 0.25, 0.8);
    let mut w = random_weights(&mut rng, n, p, max_deg);
    let signed = matches!(kind, Kind::Sdd | Kind::WalkSummable);
    if signed {
        for i in 0..n {
            for j in i + 1..n {
                if rng.uniform() < 0.5 {
                    w[[i, j]] = -w[[i, j]];
                    w[[j, i]] = -w[[j, i]];
                }
            }
        }
    }
    let theta = match kind {
        Kind::AttractiveSdd | Kind::Sdd => {
            let mut t = -w.clone();
            for i in 0..n {
                let row: f64 = w.row(i).iter().map(|v| v.abs()).sum();
                t[[i, i]] = row + uniform(&mut rng, 0.05, 1.0);
            }
            t
        }
        Kind::Attractive | Kind::WalkSummable => {
            let rho = largest_eigenvalue(&w.mapv(f64::abs));
            let r = uniform(&mut rng, 0.5, 0.95);
            let a = if rho > 0.0 { &w * (r / rho) } else { w.clone() };
            let d: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
            let mut t = Array2::eye(n) - &a;
            for i in 0..n {
                for j in 0..n {
                    t[[i, j]] *= d[i] * d[j];
                }
            }
            t
        }
    };
    let theta = (&theta + &theta.t()) / 2.0;
    GgmModel::from_precision(SymMatrix::new(theta).unwrap()).unwrap()
}

pub fn random_model(kind: Kind, n: usize, seed: u64) -> GgmModel {
    random_model_deg(kind, n, n, seed)
}

/// Laplacian of a connected random graph: a random spanning tree plus
/// extra edges with probability `p`.
pub fn random_laplacian(n: usize, p: f64, seed: u64) -> Array2<f64> {
    let mut rng = Prng::new(seed);
    let mut w = Array2::<f64>::zeros((n, n));
    for v in 1..n {
        let u = rng.below(v as u64) as usize;
        let x = uniform(&mut rng, 0.2, 2.0);
        w[[u, v]] = x;
        w[[v, u]] = x;
    }
    for i in 0..n {
        for j in i + 1..n {
            if w[[i, j]] == 0.0 && rng.uniform() < p {
                let x = uniform(&mut rng, 0.2, 2.0);
                w[[i, j]] = x;
                w[[j, i]] = x;
            }
        }
    }
    laplacian_of(&w)
}

pub fn laplacian_of(w: &Array2<f64>) -> Array2<f64> {
    let n = w.nrows();
    let mut l = -w.clone();
    for i in 0..n {
        l[[i, i]] = w.row(i).sum() - w[[i, i]];
    }
    l
}

/// Random SPD matrix `B Bᵀ + δ I`.
pub fn random_spd(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = Prng::new(seed);
    let b = Array2::from_shape_fn((n, n), |_| rng.normal());
    let mut a = b.dot(&b.t());
    for i in 0..n {
        a[[i, i]] += 0.1;
    }
    (&a + &a.t()) / 2.0
}

/// `m × k` standard normal design.
pub fn gaussian_matrix(m: usize, k: usize, rng: &mut Prng) -> Array2<f64> {
    Array2::from_shape_fn((m, k), |_| rng.normal())
}

mod common;

use common::Kind;
use ggm_core::generators::break_greedy;
use ggm_core::learners::{
    greedy_and_prune, learn, search_and_validate, Algorithm, Data, LearnerConfig, ENUMERATION_BUDGET,
};
use ggm_core::model::{conditional_variance, kappa_of, max_degree_of};
use ggm_core::regress::{omp, Source};
use ggm_core::sampler::{sample, Prng};
use proptest::prelude::*;

fn attractive_kind() -> impl Strategy<Value = Kind> {
    prop::sample::select(vec![Kind::AttractiveSdd, Kind::Attractive])
}

fn any_kind() -> impl Strategy<Value = Kind> {
    prop::sample::select(common::KINDS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_population_recovers_attractive(k in attractive_kind(), n in 1usize..=8, seed in any::<u64>()) {
        let m = common::random_model(k, n, seed);
        let Some(kappa) = kappa_of(&m) else { return Ok(()); };
        let cfg = LearnerConfig::with_model(kappa, max_degree_of(&m));
        let src = Source::Population(m.sigma());
        let (nu, t) = (cfg.greedy_nu().unwrap(), cfg.greedy_steps(n).unwrap());
        for i in 0..n {
            let est = greedy_and_prune(&src, i, nu, t).unwrap();
            prop_assert_eq!(&est.support[..], m.neighbors(i));
        }
    }

    #[test]
    fn search_and_validate_population_recovers(k in any_kind(), n in 1usize..=7, seed in any::<u64>()) {
        let m = common::random_model_deg(k, n, 3, seed);
        let Some(kappa) = kappa_of(&m) else { return Ok(()); };
        let d = max_degree_of(&m);
        let nu = LearnerConfig::with_model(kappa, d).sav_nu().unwrap();
        let src = Source::Population(m.sigma());
        for i in 0..n {
            let est = search_and_validate(&src, &src, i, d, nu, ENUMERATION_BUDGET).unwrap();
            prop_assert_eq!(&est.support[..], m.neighbors(i));
        }
    }

    #[test]
    fn population_edges_invariant_under_rescaling(k in attractive_kind(), n in 2usize..=8, seed in any::<u64>()) {
        let m = common::random_model(k, n, seed);
        let Some(kappa) = kappa_of(&m) else { return Ok(()); };
        let mut rng = Prng::new(seed ^ 7);
        let d: Vec<f64> = (0..n).map(|_| 0.2 + 4.0 * rng.uniform()).collect();
        let r = m.rescaled(&d).unwrap();
        let cfg = LearnerConfig::with_model(kappa, max_degree_of(&m));
        for alg in [Algorithm::Greedy, Algorithm::Hybrid] {
            let a = learn(&Data::Population(m.sigma()), alg, &cfg).unwrap();
            let b = learn(&Data::Population(r.sigma()), alg, &cfg).unwrap();
            prop_assert_eq!(a.estimate.edges, b.estimate.edges);
        }
    }

    #[test]
    fn sample_greedy_invariant_under_column_scaling(n in 2usize..=8, seed in any::<u64>()) {
        let m = common::random_model(Kind::Attractive, n, seed);
        let set = sample(&m, 80, seed).unwrap();
        let mut rng = Prng::new(seed ^ 11);
        let d: Vec<f64> = (0..n).map(|_| 0.2 + 4.0 * rng.uniform()).collect();
        let mut scaled = set.data().clone();
        for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
            col *= d[j];
        }
        let cfg = LearnerConfig { nu: Some(0.05), t_steps: Some(n - 1), ..Default::default() };
        let a = learn(&Data::Samples(&set), Algorithm::Greedy, &cfg).unwrap();
        let scaled = ggm_core::sampler::SampleSet::from_data(scaled).unwrap();
        let b = learn(&Data::Samples(&scaled), Algorithm::Greedy, &cfg).unwrap();
        prop_assert_eq!(a.estimate.edges, b.estimate.edges);
    }

    /// Each OMP step on an attractive model removes at least the average
    /// share of the variance still explainable by the missing neighbors.
    #[test]
    fn omp_progress_on_attractive(k in attractive_kind(), n in 2usize..=8, seed in any::<u64>()) {
        let m = common::random_model(k, n, seed);
        let src = Source::Population(m.sigma());
        for i in 0..n {
            let cands: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let path = omp(&src, i, &cands, n - 1).unwrap();
            let floor = 1.0 / m.theta().get(i, i);
            for (step, dec) in path.decrements().iter().enumerate() {
                let s = &path.order[..step];
                let missing = m.neighbors(i).iter().filter(|j| !s.contains(j)).count();
                if missing == 0 {
                    continue;
                }
                let v = conditional_variance(&m, i, s).unwrap();
                prop_assert!(*dec >= (v - floor) / missing as f64 - 1e-9);
            }
        }
    }
}

/// Population greedy on the near-duplicate example, for node 0 (X₁) whose
/// neighborhood is the other seven nodes. Greedy returns at most `T` nodes,
/// so it misses for `T < 7`; at `T = 7` OMP has taken every other node.
#[test]
fn break_greedy_population_trace() {
    let m = break_greedy(4, 1e-3, 0).unwrap();
    let kappa = kappa_of(&m).unwrap();
    let nbhd = m.neighbors(0).to_vec();
    assert_eq!(nbhd.len(), 7);
    let nu = kappa * kappa / 32f64.sqrt();
    let src = Source::Population(m.sigma());
    for t in 1..=8 {
        let est = greedy_and_prune(&src, 0, nu, t).unwrap();
        let superset = nbhd.iter().all(|j| est.support.contains(j));
        assert_eq!(superset, t >= 7, "T = {t}: {:?}", est.support);
    }
    let full = search_and_validate(&src, &src, 0, 7, kappa * kappa / 2.0, ENUMERATION_BUDGET).unwrap();
    assert_eq!(full.support, nbhd);
}

//! All-pairs chains over a square service area: every pair of users gets its
//! own relay chain, so the total cost scales with the expected sum of
//! pairwise user distances `delta`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimate::{stream_rng, McEstimate};
use crate::link_model::{per_bit_cost, CostParams, LinkModel};

/// Users form a Poisson process of intensity `alpha_u^-2` on `[0, L]^2`, and
/// every ordered pair exchanges `V` bit/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarScenario {
    length_l: f64,
    alpha_u: f64,
    volume_v: f64,
    mean_users: f64,
}

impl PlanarScenario {
    pub fn new(length_l: f64, alpha_u: f64, volume_v: f64) -> Result<Self> {
        for (name, v) in [("side length", length_l), ("user spacing", alpha_u), ("call volume", volume_v)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self {
            length_l,
            alpha_u,
            volume_v,
            mean_users: (length_l / alpha_u).powi(2),
        })
    }

    pub fn length_l(&self) -> f64 {
        self.length_l
    }

    pub fn alpha_u(&self) -> f64 {
        self.alpha_u
    }

    pub fn volume_v(&self) -> f64 {
        self.volume_v
    }

    /// Mean user count `mu = (L / alpha_u)^2`.
    pub fn mean_users(&self) -> f64 {
        self.mean_users
    }

    /// User intensity `sigma = alpha_u^-2`.
    pub fn user_density(&self) -> f64 {
        self.alpha_u.powi(-2)
    }
}

/// Mean distance between two uniform points of the unit square,
/// `ln(1 + sqrt 2)/3 + (2 + sqrt 2)/15`.
pub fn gamma_constant() -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    (1.0 + s2).ln() / 3.0 + (2.0 + s2) / 15.0
}

/// Expected sum of distances over ordered user pairs, `gamma L^5 / alpha_u^4`.
pub fn delta_analytic(sc: &PlanarScenario) -> f64 {
    gamma_constant() * sc.length_l.powi(5) / sc.alpha_u.powi(4)
}

/// Monte-Carlo estimate of [`delta_analytic`]: each replica draws a Poisson
/// user set and sums distances over ordered pairs.
///
/// Replica `i` uses random stream `i` of `seed`, so the estimate does not
/// depend on the number of worker threads.
pub fn delta_monte_carlo(sc: &PlanarScenario, replicas: usize, seed: u64) -> Result<McEstimate> {
    if replicas < 2 {
        return Err(domain(format!("need at least 2 replicas, got {replicas}")));
    }
    let poisson =
        Poisson::new(sc.mean_users).map_err(|e| domain(format!("poisson mean {}: {e}", sc.mean_users)))?;
    let side = sc.length_l;
    let sums: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let n = poisson.sample(&mut rng) as usize;
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side))
                .collect();
            let mut sum = 0.0;
            for (k, a) in pts.iter().enumerate() {
                for b in &pts[k + 1..] {
                    sum += (a.0 - b.0).hypot(a.1 - b.1);
                }
            }
            2.0 * sum
        })
        .collect();
    Ok(McEstimate::from_samples(&sums))
}

/// All-pairs chain cost `(V C(l) + C_node) delta / l` at spacing `ell`.
pub fn planar_chain_total_cost(model: &LinkModel, costs: &CostParams, sc: &PlanarScenario, ell: f64) -> Result<f64> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(domain(format!("link spacing must be > 0, got {ell}")));
    }
    let per_bit = per_bit_cost(model, costs, ell)?;
    Ok((sc.volume_v * per_bit + costs.c_node()) / ell * delta_analytic(sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{chain_optimal_spacing, chain_total_cost, ChainScenario};
    use crate::numerics::{minimize_1d, Tolerance};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn gamma_value() {
        assert!((gamma_constant() - 0.5214).abs() < 1e-4);
    }

    #[test]
    fn gamma_matches_direct_pair_sampling() {
        let mut rng = stream_rng(3, 0);
        let n = 200_000;
        let d: Vec<f64> = (0..n)
            .map(|_| {
                let (a, b, c, e): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
                (a - c).hypot(b - e)
            })
            .collect();
        let est = McEstimate::from_samples(&d);
        assert!(est.z_score(gamma_constant()).abs() < 3.0, "{est:?}");
    }

    #[test]
    fn delta_values() {
        let sc = PlanarScenario::new(10.0, 1.0, 1.0).unwrap();
        assert!((delta_analytic(&sc) - 0.5214e5).abs() < 10.0);
        let one = PlanarScenario::new(3.0, 3.0, 1.0).unwrap();
        assert!((delta_analytic(&one) - 3.0 * gamma_constant()).abs() < 1e-12);
        let big = PlanarScenario::new(20.0, 1.0, 1.0).unwrap();
        assert!((delta_analytic(&big) / delta_analytic(&sc) - 32.0).abs() < 1e-12);
    }

    #[test]
    fn delta_mc_agrees_with_analytic() {
        let sc = PlanarScenario::new(10.0, 1.0, 1.0).unwrap();
        let est = delta_monte_carlo(&sc, 2000, 11).unwrap();
        assert!(est.z_score(delta_analytic(&sc)).abs() < 3.0, "{est:?}");
        assert!(est.relative_std_error() < 0.02);
    }

    #[test]
    fn delta_mc_coverage_over_seed_set() {
        let sc = PlanarScenario::new(8.0, 1.0, 1.0).unwrap();
        let want = delta_analytic(&sc);
        let misses = (0..100)
            .filter(|&seed| delta_monte_carlo(&sc, 200, seed).unwrap().z_score(want).abs() > 3.0)
            .count();
        assert!(misses <= 1, "{misses} of 100 runs outside 3 standard errors");
    }

    #[test]
    fn delta_mc_is_deterministic_and_handles_tiny_sets() {
        let sc = PlanarScenario::new(1.0, 2.0, 1.0).unwrap();
        let a = delta_monte_carlo(&sc, 500, 4).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| delta_monte_carlo(&sc, 500, 4).unwrap());
        assert_eq!(a, b);
        assert!(a.mean >= 0.0);
        assert!(delta_monte_carlo(&sc, 1, 4).is_err());
    }

    #[test]
    fn planar_cost_is_chain_cost_times_delta_over_l() {
        let model = LinkModel::pure_exponential(1e6, 19.7).unwrap();
        let costs = CostParams::new(1e5, 5e4).unwrap();
        let sc = PlanarScenario::new(100.0, 5.0, 1e3).unwrap();
        let ch = ChainScenario::new(100.0, 1e3).unwrap();
        for ell in [5.0, 19.7, 40.0] {
            let p = planar_chain_total_cost(&model, &costs, &sc, ell).unwrap();
            let c = chain_total_cost(&model, &costs, &ch, ell).unwrap();
            assert!((p / c - delta_analytic(&sc) / 100.0).abs() < 1e-9 * p / c);
        }
        let free = CostParams::new(1e5, 0.0).unwrap();
        let p = planar_chain_total_cost(&model, &free, &sc, 19.7).unwrap();
        let want = 1e3 * 1e5 * std::f64::consts::E / (1e6 * 19.7) * delta_analytic(&sc);
        assert!((p - want).abs() < 1e-12 * want);
    }

    #[test]
    fn planar_argmin_matches_chain() {
        let model = LinkModel::pure_exponential(1e6, 19.7).unwrap();
        let costs = CostParams::new(1e5, 5e4).unwrap();
        let sc = PlanarScenario::new(100.0, 5.0, 1e3).unwrap();
        let ch = ChainScenario::new(100.0, 1e3).unwrap();
        let want = chain_optimal_spacing(&model, &costs, &ch).unwrap().ell_opt;
        let tol = Tolerance::new(1e-9, 0.0, 500).unwrap();
        let (got, _) = minimize_1d(
            |l| planar_chain_total_cost(&model, &costs, &sc, l).unwrap(),
            1.0,
            200.0,
            tol,
        )
        .unwrap();
        assert!((got - want).abs() < 1e-6 * 19.7);
    }

    proptest! {
        #[test]
        fn delta_is_homogeneous(l in 1.0f64..500.0, a in 0.1f64..50.0, c in 0.1f64..10.0) {
            let base = delta_analytic(&PlanarScenario::new(l, a, 1.0).unwrap());
            let scaled = delta_analytic(&PlanarScenario::new(c * l, c * a, 1.0).unwrap());
            prop_assert!((scaled - c * base).abs() <= 1e-12 * scaled.abs());
        }

        #[test]
        fn mean_users_formula(l in 1.0f64..500.0, a in 0.1f64..50.0) {
            let sc = PlanarScenario::new(l, a, 1.0).unwrap();
            prop_assert_eq!(sc.mean_users(), (l / a).powi(2));
        }
    }
}

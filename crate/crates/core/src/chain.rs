//! Two users joined by a single chain of trusted relays: total cost as a
//! function of relay spacing, and its optimum.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimate::stream_rng;
use crate::link_model::{per_bit_cost, CostParams, LinkModel};
use crate::numerics::{fixed_point, try_minimize_1d, Tolerance};

/// Separation and traffic of the two chain endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainScenario {
    length_l: f64,
    volume_v: f64,
}

impl ChainScenario {
    pub fn new(length_l: f64, volume_v: f64) -> Result<Self> {
        if !(length_l > 0.0 && length_l.is_finite()) {
            return Err(domain(format!("chain length must be > 0, got {length_l}")));
        }
        if !(volume_v > 0.0 && volume_v.is_finite()) {
            return Err(domain(format!("call volume must be > 0, got {volume_v}")));
        }
        Ok(Self { length_l, volume_v })
    }

    pub fn length_l(&self) -> f64 {
        self.length_l
    }

    pub fn volume_v(&self) -> f64 {
        self.volume_v
    }
}

/// Continuum chain cost `C_QKD (L/l)(V/R(l)) + C_node L/l`.
///
/// The chain is treated as a continuum: `L/l` relay spacings and `V/R(l)`
/// parallel links are not rounded. Use [`discretization`] for integer counts.
pub fn chain_total_cost(model: &LinkModel, costs: &CostParams, sc: &ChainScenario, ell: f64) -> Result<f64> {
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(domain(format!("link spacing must be > 0, got {ell}")));
    }
    let per_bit = per_bit_cost(model, costs, ell)?;
    let segments = sc.length_l / ell;
    Ok(segments * (sc.volume_v * per_bit + costs.c_node()))
}

/// How an optimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimumMethod {
    Analytic,
    FixedPoint,
    NumericSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainOptimum {
    pub ell_opt: f64,
    pub cost: f64,
    pub method: OptimumMethod,
}

/// Dimensionless node weight `(C_node / C_QKD)(R0 / V)`.
pub fn node_weight(model: &LinkModel, costs: &CostParams, volume_v: f64) -> f64 {
    costs.c_node() / costs.c_qkd() * model.r0() / volume_v
}

/// Spacing minimizing [`chain_total_cost`].
///
/// For the pure exponential model the optimum is `lambda` when nodes are free
/// and otherwise solves `x = 1 + k exp(-x)` in `x = l / lambda` with `k` the
/// [`node_weight`]. The BB84 model is minimized directly below 0.99 of its
/// cutoff distance.
pub fn chain_optimal_spacing(model: &LinkModel, costs: &CostParams, sc: &ChainScenario) -> Result<ChainOptimum> {
    let lambda = model.lambda_qkd();
    let (ell_opt, method) = if model.is_pure_exponential() {
        if costs.c_node() == 0.0 {
            (lambda, OptimumMethod::Analytic)
        } else {
            let k = node_weight(model, costs, sc.volume_v);
            let tol = Tolerance::new(1e-13, 0.0, 10_000)?;
            let x = fixed_point(|x| 1.0 + k * (-x).exp(), 1.0, tol)?;
            (lambda * x, OptimumMethod::FixedPoint)
        }
    } else {
        let cutoff = model.cutoff_distance().expect("bb84 has a cutoff");
        let tol = Tolerance::new(1e-10 * lambda, 0.0, 500)?;
        let (ell, _) = try_minimize_1d(
            |ell| chain_total_cost(model, costs, sc, ell),
            1e-6 * lambda,
            0.99 * cutoff,
            tol,
        )?;
        (ell, OptimumMethod::NumericSearch)
    };
    Ok(ChainOptimum {
        ell_opt,
        cost: chain_total_cost(model, costs, sc, ell_opt)?,
        method,
    })
}

/// Integer equipment counts for a chain operated at spacing `ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Discretization {
    pub relay_nodes: u64,
    pub parallel_links: u64,
}

pub fn discretization(model: &LinkModel, sc: &ChainScenario, ell: f64) -> Result<Discretization> {
    if !(ell > 0.0) {
        return Err(domain(format!("link spacing must be > 0, got {ell}")));
    }
    let rate = model.rate(ell)?;
    if rate <= 0.0 {
        return Err(Error::InfeasibleDistance { ell });
    }
    Ok(Discretization {
        relay_nodes: ((sc.length_l / ell).ceil() as u64).saturating_sub(1),
        parallel_links: (sc.volume_v / rate).ceil() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpacingReport {
    pub passed: bool,
    /// Smallest `sum C(l_i) - (n+1) C(total/(n+1))` over the trials.
    pub worst_margin: f64,
    pub trials: usize,
}

/// Draws `trials` random splits of `total` into `n + 1` segments and checks
/// that none has a lower summed per-bit cost than the equal split.
pub fn equal_spacing_is_optimal(
    model: &LinkModel,
    costs: &CostParams,
    n: usize,
    total: f64,
    trials: usize,
    seed: u64,
) -> Result<SpacingReport> {
    if !(total > 0.0) {
        return Err(domain(format!("total length must be > 0, got {total}")));
    }
    let parts = n + 1;
    let equal = parts as f64 * per_bit_cost(model, costs, total / parts as f64)?;
    let slack = 1e-12 * equal.abs();
    let mut rng = stream_rng(seed, 0);
    let mut worst = f64::INFINITY;
    let mut weights = vec![0.0; parts];
    for _ in 0..trials {
        // Uniform point on the simplex: normalized i.i.d. exponentials.
        for w in weights.iter_mut() {
            *w = Exp1.sample(&mut rng);
        }
        let sum: f64 = weights.iter().sum();
        let mut cost = 0.0;
        for w in &weights {
            match per_bit_cost(model, costs, total * w / sum) {
                Ok(c) => cost += c,
                // A segment past the cutoff makes the split infeasible, not cheaper.
                Err(Error::InfeasibleDistance { .. }) => {
                    cost = f64::INFINITY;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        worst = worst.min(cost - equal);
    }
    Ok(SpacingReport {
        passed: worst >= -slack,
        worst_margin: worst,
        trials,
    })
}

//! Square-grid backbone: users attach to the node at the centre of their
//! `alpha_bb`-sized cell and traffic between cells follows shortest
//! (Manhattan) grid paths.

use serde::Serialize;

use crate::breakdown::CostBreakdown;
use crate::error::{domain, Error, Result};
use crate::link_model::{per_bit_cost, CostCurve, CostParams, LinkCost, LinkModel};
use crate::numerics::{try_integrate_1d, try_minimize_1d, Tolerance};
use crate::planar_chain::PlanarScenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SquareBackboneScenario {
    planar: PlanarScenario,
    alpha_bb: f64,
}

impl SquareBackboneScenario {
    /// Requires at least two cells per side. Logs a warning when `L / alpha_bb`
    /// is below 8 or not within 0.01 of an integer.
    pub fn new(planar: PlanarScenario, alpha_bb: f64) -> Result<Self> {
        if !(alpha_bb > 0.0 && alpha_bb.is_finite()) {
            return Err(domain(format!("backbone cell size must be > 0, got {alpha_bb}")));
        }
        let ratio = planar.length_l() / alpha_bb;
        if ratio < 2.0 {
            return Err(domain(format!("need at least 2 cells per side, got L/alpha_bb = {ratio}")));
        }
        if ratio < 8.0 {
            log::warn!("only {ratio:.3} backbone cells per side; asymptotic terms are coarse");
        }
        if (ratio - ratio.round()).abs() > 0.01 {
            log::warn!("L/alpha_bb = {ratio:.4} is not an integer; exact mode rounds it");
        }
        Ok(Self { planar, alpha_bb })
    }

    pub fn planar(&self) -> &PlanarScenario {
        &self.planar
    }

    pub fn alpha_bb(&self) -> f64 {
        self.alpha_bb
    }

    /// `N = round(L / alpha_bb)`.
    pub fn cells_per_side(&self) -> u64 {
        (self.planar.length_l() / self.alpha_bb).round() as u64
    }
}

/// Sum of `|k - l|_1` over all ordered pairs of cells of an `n x n` grid,
/// `(2/3) n^3 (n^2 - 1)`.
pub fn manhattan_hop_sum(n: u64) -> Result<u128> {
    if n == 0 {
        return Err(domain("grid size must be >= 1"));
    }
    let n = n as u128;
    let overflow = || Error::Range(format!("hop sum for n = {n} exceeds 128 bits"));
    // n^3 (n^2 - 1) = n^2 (n - 1) n (n + 1); the last three factors make it divisible by 3.
    let n2 = n.checked_mul(n).ok_or_else(overflow)?;
    2u128
        .checked_mul(n2)
        .and_then(|v| v.checked_mul((n - 1) * n * (n + 1) / 3))
        .ok_or_else(overflow)
}

/// Whether the backbone term uses the finite-grid hop sum or its `N^5` asymptote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneSum {
    Exact,
    Asymptotic,
}

/// Mean of `cost(|x|)` over a square cell of side `alpha_bb` centred on its node.
pub fn cell_average_cost<C: CostCurve + ?Sized>(cost: &C, alpha_bb: f64) -> Result<f64> {
    if !(alpha_bb > 0.0 && alpha_bb.is_finite()) {
        return Err(domain(format!("cell size must be > 0, got {alpha_bb}")));
    }
    let h = 0.5 * alpha_bb;
    let tol = Tolerance::new(f64::MIN_POSITIVE, 1e-11, 2000)?;
    // The quadrant is symmetric about its diagonal, so integrate y <= x and double.
    let outer = try_integrate_1d(
        |x| try_integrate_1d(|y| cost.cost(x.hypot(y)), 0.0, x.max(f64::MIN_POSITIVE), tol),
        0.0,
        h,
        tol,
    )?;
    Ok(2.0 * outer / (h * h))
}

/// Local, backbone and node terms of the square-grid architecture.
///
/// Backbone: `V C(alpha) (mu^2 / N^4) hops(N)` in exact mode and
/// `(2/3)(C(alpha)/alpha) mu^2 V L` in asymptotic mode. Local: `mu^2 V Cbar`
/// with `Cbar` the [`cell_average_cost`]. Nodes: `C_node N^2`, where `N` is
/// rounded in exact mode and the continuum `L / alpha` in asymptotic mode.
pub fn square_backbone_cost(
    model: &LinkModel,
    costs: &CostParams,
    sc: &SquareBackboneScenario,
    mode: BackboneSum,
) -> Result<CostBreakdown> {
    let alpha = sc.alpha_bb;
    let p = &sc.planar;
    let mu2 = p.mean_users().powi(2);
    let v = p.volume_v();
    let c_alpha = per_bit_cost(model, costs, alpha)?;
    let (backbone, node) = match mode {
        BackboneSum::Exact => {
            let n = sc.cells_per_side();
            let hops = manhattan_hop_sum(n)? as f64;
            let nf = n as f64;
            (v * c_alpha * mu2 / nf.powi(4) * hops, costs.c_node() * nf * nf)
        }
        BackboneSum::Asymptotic => {
            let l = p.length_l();
            (
                2.0 / 3.0 * c_alpha / alpha * mu2 * v * l,
                costs.c_node() * (l / alpha).powi(2),
            )
        }
    };
    let c_bar = cell_average_cost(&LinkCost::new(*model, *costs), alpha)?;
    Ok(CostBreakdown::new(mu2 * v * c_bar, backbone, node))
}

/// Cell size minimizing `C(alpha) / alpha`: `lambda` for the pure exponential
/// model, and a numeric search below 0.99 of the cutoff for BB84.
pub fn square_optimal_cell(model: &LinkModel, costs: &CostParams) -> Result<f64> {
    let lambda = model.lambda_qkd();
    match model.cutoff_distance() {
        None => Ok(lambda),
        Some(cutoff) => {
            let tol = Tolerance::new(1e-10 * lambda, 0.0, 500)?;
            let (alpha, _) = try_minimize_1d(
                |a| Ok(per_bit_cost(model, costs, a)? / a),
                1e-6 * lambda,
                0.99 * cutoff,
                tol,
            )?;
            Ok(alpha)
        }
    }
}

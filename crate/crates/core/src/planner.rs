//! Chain-versus-backbone decision: critical user density, the necessary
//! condition for a backbone to pay off, and a scenario recommendation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::backbone_square::{square_backbone_cost, square_optimal_cell, BackboneSum, SquareBackboneScenario};
use crate::breakdown::CostBreakdown;
use crate::chain::{chain_optimal_spacing, ChainScenario};
use crate::error::{domain, Result};
use crate::link_model::{per_bit_cost, CostParams, LinkModel};
use crate::planar_chain::{delta_analytic, gamma_constant, PlanarScenario};

/// User density `1 / sqrt(L^3 alpha gamma)` below which a square backbone
/// never beats all-pairs chains.
pub fn critical_density(alpha_bb_opt: f64, length_l: f64) -> Result<f64> {
    positive(alpha_bb_opt, length_l)?;
    Ok(1.0 / (length_l.powi(3) * alpha_bb_opt * gamma_constant()).sqrt())
}

/// Users in the square at the critical density, `sqrt(L / (gamma alpha))`.
pub fn minimum_user_count(alpha_bb_opt: f64, length_l: f64) -> Result<f64> {
    positive(alpha_bb_opt, length_l)?;
    Ok((length_l / (gamma_constant() * alpha_bb_opt)).sqrt())
}

fn positive(alpha: f64, l: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() && l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("cell size and side must be > 0, got {alpha} and {l}")))
    }
}

/// Both sides of
/// `C_node (s - 1) >= C(alpha) V s (2/(3 gamma) - 1)` with `s = sigma^2 / sigma*^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NecessaryCondition {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(rename = "sigma_per_km2")]
    pub sigma: f64,
    #[serde(rename = "sigma_star_per_km2")]
    pub sigma_star: f64,
}

pub fn necessary_condition(
    model: &LinkModel,
    costs: &CostParams,
    sc: &PlanarScenario,
    alpha_bb_opt: f64,
) -> Result<NecessaryCondition> {
    let sigma_star = critical_density(alpha_bb_opt, sc.length_l())?;
    let sigma = sc.user_density();
    let s = (sigma / sigma_star).powi(2);
    let lhs = costs.c_node() * (s - 1.0);
    let rhs = per_bit_cost(model, costs, alpha_bb_opt)? * sc.volume_v() * s * (2.0 / (3.0 * gamma_constant()) - 1.0);
    Ok(NecessaryCondition {
        holds: lhs >= rhs,
        lhs,
        rhs,
        sigma,
        sigma_star,
    })
}

/// Node cost at which the necessary condition becomes an equality, or `None`
/// at or below the critical density.
pub fn node_cost_threshold(model: &LinkModel, costs: &CostParams, sc: &PlanarScenario, alpha_bb_opt: f64) -> Result<Option<f64>> {
    let s = (sc.user_density() / critical_density(alpha_bb_opt, sc.length_l())?).powi(2);
    if s <= 1.0 {
        return Ok(None);
    }
    let c = per_bit_cost(model, costs, alpha_bb_opt)?;
    Ok(Some(c * sc.volume_v() * s * (2.0 / (3.0 * gamma_constant()) - 1.0) / (s - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    LinearChains,
    SquareBackbone,
    StochasticBackbone,
}

/// How the square backbone is costed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendMode {
    /// Asymptotic backbone sum and continuum node count, access term dropped.
    PaperFaithful,
    /// Exact hop sum, computed access term and rounded node count.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub chosen: Architecture,
    pub mode: RecommendMode,
    pub costs: BTreeMap<Architecture, CostBreakdown>,
    /// Square backbone costed under the other mode, for reference.
    pub square_other_mode: CostBreakdown,
    #[serde(rename = "chain_ell_opt_km")]
    pub chain_ell_opt: f64,
    #[serde(rename = "square_alpha_opt_km")]
    pub square_alpha_opt: f64,
    #[serde(rename = "sigma_star_per_km2")]
    pub sigma_star: f64,
    pub min_user_count: f64,
    pub necessary: NecessaryCondition,
    pub necessary_condition_holds: bool,
    /// Chain cost at its optimum is at least the backbone cost at its optimum.
    pub full_inequality_holds: bool,
    pub rationale: String,
}

/// All-pairs chain cost at the optimal spacing, split into link equipment
/// (`backbone`) and relay nodes (`node`).
pub fn chain_breakdown(model: &LinkModel, costs: &CostParams, sc: &PlanarScenario) -> Result<(f64, CostBreakdown)> {
    // The all-pairs cost is the single-chain cost scaled by delta / L, so the optimum is shared.
    let chain = ChainScenario::new(sc.length_l(), sc.volume_v())?;
    let ell = chain_optimal_spacing(model, costs, &chain)?.ell_opt;
    let per_km = delta_analytic(sc) / ell;
    let link = sc.volume_v() * per_bit_cost(model, costs, ell)? * per_km;
    Ok((ell, CostBreakdown::new(0.0, link, costs.c_node() * per_km)))
}

fn square_breakdown(
    model: &LinkModel,
    costs: &CostParams,
    sc: &SquareBackboneScenario,
    mode: RecommendMode,
) -> Result<CostBreakdown> {
    match mode {
        RecommendMode::PaperFaithful => {
            let b = square_backbone_cost(model, costs, sc, BackboneSum::Asymptotic)?;
            Ok(CostBreakdown::new(0.0, b.backbone, b.node))
        }
        RecommendMode::Full => square_backbone_cost(model, costs, sc, BackboneSum::Exact),
    }
}

/// Compares all-pairs chains with a square backbone, each at its own optimum.
///
/// Equal totals go to chains, which need fewer trusted sites. In paper-faithful
/// mode a true full inequality always implies the necessary condition.
pub fn recommend(model: &LinkModel, costs: &CostParams, sc: &PlanarScenario, mode: RecommendMode) -> Result<Recommendation> {
    let (chain_ell_opt, chain) = chain_breakdown(model, costs, sc)?;
    let alpha = square_optimal_cell(model, costs)?;
    let square_sc = SquareBackboneScenario::new(*sc, alpha)?;
    let square = square_breakdown(model, costs, &square_sc, mode)?;
    let other = match mode {
        RecommendMode::PaperFaithful => RecommendMode::Full,
        RecommendMode::Full => RecommendMode::PaperFaithful,
    };
    let square_other_mode = square_breakdown(model, costs, &square_sc, other)?;
    let necessary = necessary_condition(model, costs, sc, alpha)?;
    let full_inequality_holds = chain.total >= square.total;
    let chosen = if square.total < chain.total {
        Architecture::SquareBackbone
    } else {
        Architecture::LinearChains
    };
    let rationale = match chosen {
        Architecture::SquareBackbone => "square backbone total is strictly lower".to_string(),
        _ if chain.total == square.total => "totals tie; chains need fewer trusted sites".to_string(),
        _ if necessary.sigma <= necessary.sigma_star => "user density at or below critical density".to_string(),
        _ => "all-pairs chains total is lower".to_string(),
    };
    Ok(Recommendation {
        chosen,
        mode,
        costs: BTreeMap::from([(Architecture::LinearChains, chain), (Architecture::SquareBackbone, square)]),
        square_other_mode,
        chain_ell_opt,
        square_alpha_opt: alpha,
        sigma_star: necessary.sigma_star,
        min_user_count: minimum_user_count(alpha, sc.length_l())?,
        necessary_condition_holds: necessary.holds,
        necessary,
        full_inequality_holds,
        rationale,
    })
}

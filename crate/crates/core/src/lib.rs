//! Cost models and optimizers for trusted-repeater QKD networks.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backbone_square;
pub mod backbone_stochastic;
pub mod breakdown;
pub mod chain;
pub mod error;
pub mod estimate;
pub mod geometry_sim;
pub mod link_model;
pub mod numerics;
pub mod planar_chain;
pub mod planner;

pub use breakdown::CostBreakdown;
pub use error::{Error, Result};
pub use backbone_square::{
    cell_average_cost, manhattan_hop_sum, square_backbone_cost, square_optimal_cell, BackboneSum,
    SquareBackboneScenario,
};
pub use backbone_stochastic::{
    kappa_bb_closed_form, kappa_bb_quadrature, kappa_bb_reduced, kappa_loc, optimal_alpha_bb,
    stochastic_backbone_cost, StochasticBackboneScenario,
};
pub use chain::{chain_optimal_spacing, chain_total_cost, ChainOptimum, ChainScenario, OptimumMethod};
pub use estimate::McEstimate;
pub use geometry_sim::{markov_path, sample_poisson, MarkovPath, Point, PointSet, TorusMc};
pub use link_model::{
    lambda_from_attenuation, per_bit_cost, AttenuationSpec, CostCurve, CostParams, LinkCost, LinkModel,
    RateVariant,
};
pub use planar_chain::{delta_analytic, gamma_constant, planar_chain_total_cost, PlanarScenario};
pub use planner::{recommend, Architecture, Recommendation, RecommendMode};

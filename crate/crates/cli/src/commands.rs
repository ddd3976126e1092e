//! Subcommand implementations. Each returns a serializable report; rendering
//! happens in `main`.

use std::io::Write;

use serde::Serialize;

use qkdnet::chain::equal_spacing_is_optimal;
use qkdnet::estimate::McEstimate;
use qkdnet::geometry_sim::{estimate_kappa_bb_mc, estimate_kappa_loc_mc, write_geometry};
use qkdnet::planar_chain::delta_monte_carlo;
use qkdnet::{
    chain_optimal_spacing, delta_analytic, kappa_bb_closed_form, kappa_bb_quadrature, kappa_bb_reduced, kappa_loc,
    manhattan_hop_sum, markov_path, optimal_alpha_bb, per_bit_cost, recommend, sample_poisson,
    square_optimal_cell, stochastic_backbone_cost, ChainScenario, CostBreakdown, LinkCost, OptimumMethod, PlanarScenario,
    Point, Recommendation, RecommendMode, StochasticBackboneScenario, TorusMc,
};

use crate::config::{McConfig, Resolved};
use crate::output::{csv_field, number};
use crate::CliError;

fn chain_scenario(cfg: &Resolved) -> Result<ChainScenario, CliError> {
    Ok(ChainScenario::new(cfg.planar.length_l(), cfg.planar.volume_v())?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub ell_km: f64,
    pub rate_bit_per_s: f64,
    pub log10_rate: f64,
    pub cost_per_bit: f64,
    pub cost_per_bit_per_km: f64,
    /// `linear`, `drop_off` (BB84 factor below half its value at zero
    /// distance) or `cutoff` (no key).
    pub region: &'static str,
    /// Row closest to the chain optimum.
    pub is_opt: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LinkCurve {
    pub lambda_km: f64,
    pub ell_opt_km: f64,
    pub cutoff_km: Option<f64>,
    pub rows: Vec<CurveRow>,
}

impl LinkCurve {
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "ell_km,rate_bit_per_s,log10_rate,cost_per_bit,cost_per_bit_per_km,region,is_opt\n",
        );
        for r in &self.rows {
            let cells = [
                number(r.ell_km),
                number(r.rate_bit_per_s),
                number(r.log10_rate),
                number(r.cost_per_bit),
                number(r.cost_per_bit_per_km),
                r.region.to_string(),
                r.is_opt.to_string(),
            ];
            out.push_str(&cells.map(|c| csv_field(&c)).join(","));
            out.push('\n');
        }
        out
    }
}

/// Rate and cost on `steps` equally spaced distances in `[ell_min, ell_max]`.
///
/// Defaults: `ell_min = lambda / 20`, `ell_max` = the smaller of `10 lambda`
/// and the BB84 cutoff.
pub fn link_curve(cfg: &Resolved, ell_min: Option<f64>, ell_max: Option<f64>, steps: usize) -> Result<LinkCurve, CliError> {
    let model = &cfg.model;
    let lambda = model.lambda_qkd();
    let cutoff = model.cutoff_distance();
    let lo = ell_min.unwrap_or(lambda / 20.0);
    let hi = ell_max.unwrap_or_else(|| cutoff.map_or(10.0 * lambda, |c| c.min(10.0 * lambda)));
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(CliError::Config(format!("link-curve: need 0 <= ell_min < ell_max, got [{lo}, {hi}]")));
    }
    if steps < 2 {
        return Err(CliError::Config(format!("link-curve: steps must be >= 2, got {steps}")));
    }
    let ell_opt = chain_optimal_spacing(model, &cfg.costs, &chain_scenario(cfg)?)?.ell_opt;
    let envelope = model.exponential_envelope();
    let factor0 = model.rate(0.0)? / envelope.rate(0.0)?;
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let ell = if i + 1 == steps {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (steps - 1) as f64
        };
        let rate = model.rate(ell)?;
        let cost = if rate > 0.0 {
            per_bit_cost(model, &cfg.costs, ell)?
        } else {
            f64::INFINITY
        };
        let region = if rate <= 0.0 {
            "cutoff"
        } else if rate / envelope.rate(ell)? < 0.5 * factor0 {
            "drop_off"
        } else {
            "linear"
        };
        rows.push(CurveRow {
            ell_km: ell,
            rate_bit_per_s: rate,
            log10_rate: rate.log10(),
            cost_per_bit: cost,
            cost_per_bit_per_km: cost / ell,
            region,
            is_opt: false,
        });
    }
    let nearest = rows
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.ell_km - ell_opt).abs().total_cmp(&(b.1.ell_km - ell_opt).abs()))
        .map(|(i, _)| i)
        .expect("at least two rows");
    rows[nearest].is_opt = true;
    Ok(LinkCurve {
        lambda_km: lambda,
        ell_opt_km: ell_opt,
        cutoff_km: cutoff,
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainOpt {
    pub ell_opt_km: f64,
    pub total_cost: f64,
    pub method: OptimumMethod,
}

#[derive(Debug, Clone, Serialize)]
pub struct SquareOpt {
    pub alpha_opt_km: f64,
    /// `C(alpha)/alpha` at the optimum, cost s/(bit km).
    pub cost_per_bit_per_km: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StochasticOpt {
    pub alpha_opt_km: f64,
    pub alpha_over_lambda: f64,
    pub lambda_over_alpha: f64,
    /// Backbone constant at the optimum, cost s/(bit km).
    pub kappa_bb: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub lambda_km: f64,
    pub chain: ChainOpt,
    pub square: SquareOpt,
    pub stochastic: Option<StochasticOpt>,
    pub stochastic_note: Option<String>,
}

pub fn optimize(cfg: &Resolved) -> Result<OptimizeReport, CliError> {
    let (model, costs) = (&cfg.model, &cfg.costs);
    let lambda = model.lambda_qkd();
    let chain = chain_optimal_spacing(model, costs, &chain_scenario(cfg)?)?;
    let alpha_sq = square_optimal_cell(model, costs)?;
    let (stochastic, stochastic_note) = match optimal_alpha_bb(model, costs) {
        Ok(a) => (
            Some(StochasticOpt {
                alpha_opt_km: a,
                alpha_over_lambda: a / lambda,
                lambda_over_alpha: lambda / a,
                kappa_bb: kappa_bb_closed_form(model, costs, a)?,
            }),
            None,
        ),
        Err(qkdnet::Error::UnsupportedModel(msg)) => (None, Some(msg)),
        Err(e) => return Err(e.into()),
    };
    Ok(OptimizeReport {
        lambda_km: lambda,
        chain: ChainOpt {
            ell_opt_km: chain.ell_opt,
            total_cost: chain.cost,
            method: chain.method,
        },
        square: SquareOpt {
            alpha_opt_km: alpha_sq,
            cost_per_bit_per_km: per_bit_cost(model, costs, alpha_sq)? / alpha_sq,
        },
        stochastic,
        stochastic_note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StochasticInfo {
    pub alpha_bb_km: f64,
    pub breakdown: CostBreakdown,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub recommendation: Recommendation,
    /// Shown for reference only; never a candidate for `chosen`.
    pub stochastic_backbone: Option<StochasticInfo>,
    pub stochastic_note: Option<String>,
}

/// Chains versus square backbone, plus the stochastic backbone at the
/// configured `backbone.alpha_bb` (or its optimum when unset).
pub fn compare(cfg: &Resolved, mode: RecommendMode) -> Result<CompareReport, CliError> {
    let (model, costs) = (&cfg.model, &cfg.costs);
    let recommendation = recommend(model, costs, &cfg.planar, mode)?;
    let alpha = match cfg.alpha_bb {
        Some(a) => Ok(a),
        None => optimal_alpha_bb(model, costs),
    };
    let info = alpha.and_then(|a| {
        let sc = StochasticBackboneScenario::new(cfg.planar, a)?;
        Ok(StochasticInfo {
            alpha_bb_km: a,
            breakdown: stochastic_backbone_cost(model, costs, &sc)?,
        })
    });
    let (stochastic_backbone, stochastic_note) = match info {
        Ok(i) => (Some(i), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(CompareReport {
        recommendation,
        stochastic_backbone,
        stochastic_note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// z-score for Monte-Carlo checks, relative error otherwise.
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub seed: u64,
    pub alpha_bb_km: f64,
    pub checks: Vec<Check>,
    pub all_passed: bool,
}

impl ValidateReport {
    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

fn z_check(name: &'static str, est: McEstimate, target: f64) -> Check {
    let z = if est.std_error > 0.0 {
        est.z_score(target)
    } else if est.mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    Check {
        name,
        passed: z.abs() <= 3.0,
        statistic: z,
        threshold: 3.0,
        detail: format!("estimate {} +- {} vs {}", est.mean, est.std_error, target),
    }
}

fn rel_check(name: &'static str, got: f64, want: f64, tol: f64) -> Check {
    let rel = (got - want).abs() / want.abs();
    Check {
        name,
        passed: rel <= tol,
        statistic: rel,
        threshold: tol,
        detail: format!("{got} vs {want}"),
    }
}

/// Runs the Monte-Carlo and quadrature oracles on the exponential envelope of
/// the configured link at `backbone.alpha_bb` (default `lambda`).
pub fn validate(cfg: &Resolved, mc: &McConfig) -> Result<ValidateReport, CliError> {
    let model = cfg.model.exponential_envelope();
    let costs = cfg.costs;
    let alpha = cfg.alpha_bb.unwrap_or(model.lambda_qkd());
    let cost = LinkCost::new(model, costs);
    let seed = mc.seed;
    let torus = |offset: u64| TorusMc {
        side_in_alpha: mc.side_in_alpha,
        samples: mc.pairs,
        node_sets: mc.node_sets,
        seed: seed.wrapping_add(offset),
    };
    let mut checks = Vec::new();

    let unit = PlanarScenario::new(10.0, 1.0, 1.0)?;
    let delta = delta_monte_carlo(&unit, mc.replicas, seed)?;
    checks.push(z_check("gamma_mc", delta, delta_analytic(&unit)));

    let loc = estimate_kappa_loc_mc(&cost, alpha, &torus(1))?;
    checks.push(z_check("kappa_loc_mc", loc, kappa_loc(&cost, alpha)?));

    let closed = kappa_bb_closed_form(&model, &costs, alpha)?;
    let bb = estimate_kappa_bb_mc(&cost, alpha, &torus(2))?;
    checks.push(z_check("kappa_bb_mc", bb, closed));

    checks.push(rel_check("kappa_bb_triple_quadrature", kappa_bb_quadrature(&cost, alpha)?, closed, 1e-6));
    checks.push(rel_check("kappa_bb_reduced_quadrature", kappa_bb_reduced(&model, &costs, alpha)?, closed, 1e-6));

    let mut mismatches = 0usize;
    for n in 1..=12u64 {
        let mut brute = 0u128;
        for a in 0..n as i64 {
            for b in 0..n as i64 {
                for c in 0..n as i64 {
                    for d in 0..n as i64 {
                        brute += ((a - c).abs() + (b - d).abs()) as u128;
                    }
                }
            }
        }
        mismatches += usize::from(manhattan_hop_sum(n)? != brute);
    }
    checks.push(Check {
        name: "manhattan_brute_force",
        passed: mismatches == 0,
        statistic: mismatches as f64,
        threshold: 0.0,
        detail: "closed form vs exhaustive sum for n = 1..12".into(),
    });

    let spacing = equal_spacing_is_optimal(&model, &costs, 9, 10.0 * model.lambda_qkd(), 1000, seed)?;
    checks.push(Check {
        name: "equal_spacing",
        passed: spacing.passed,
        statistic: spacing.worst_margin,
        threshold: 0.0,
        detail: format!("{} random partitions into 10 segments", spacing.trials),
    });

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(ValidateReport {
        seed,
        alpha_bb_km: alpha,
        checks,
        all_passed,
    })
}

/// Writes one torus node set at spacing `alpha_bb` and a Markov path across it.
pub fn dump_geometry<W: Write>(out: &mut W, alpha_bb: f64, side_in_alpha: f64, seed: u64) -> Result<(), CliError> {
    let side = side_in_alpha * alpha_bb;
    let nodes = sample_poisson(alpha_bb.powi(-2), side, true, seed)?;
    let path = markov_path(&nodes, Point::new(0.05 * side, 0.1 * side), Point::new(0.45 * side, 0.4 * side))?;
    write_geometry(out, &nodes, std::slice::from_ref(&path)).map_err(|source| CliError::Io {
        path: "geometry dump".into(),
        source,
    })
}

//! Poisson-Voronoi backbone with Markov-path routing: access and backbone
//! cost constants, the optimal node intensity and the total-cost split.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::breakdown::CostBreakdown;
use crate::error::{domain, Error, Result};
use crate::link_model::{CostCurve, CostParams, LinkCost, LinkModel};
use crate::numerics::{erf, try_integrate_1d, try_minimize_1d, Tolerance};
use crate::planar_chain::{delta_analytic, PlanarScenario};

/// Users of a [`PlanarScenario`] served by backbone nodes forming a Poisson
/// process of intensity `alpha_bb^-2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StochasticBackboneScenario {
    planar: PlanarScenario,
    alpha_bb: f64,
}

impl StochasticBackboneScenario {
    pub fn new(planar: PlanarScenario, alpha_bb: f64) -> Result<Self> {
        if !(alpha_bb > 0.0 && alpha_bb.is_finite()) {
            return Err(domain(format!("backbone spacing must be > 0, got {alpha_bb}")));
        }
        Ok(Self { planar, alpha_bb })
    }

    pub fn planar(&self) -> &PlanarScenario {
        &self.planar
    }

    pub fn alpha_bb(&self) -> f64 {
        self.alpha_bb
    }

    /// Mean backbone node count `(L / alpha_bb)^2`.
    pub fn mean_nodes(&self) -> f64 {
        (self.planar.length_l() / self.alpha_bb).powi(2)
    }
}

fn check_alpha(alpha_bb: f64) -> Result<()> {
    if alpha_bb > 0.0 && alpha_bb.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("backbone spacing must be > 0, got {alpha_bb}")))
    }
}

// Relative-only tolerance: cost scales vary over many decades.
fn rel_tol(rel: f64) -> Result<Tolerance> {
    Tolerance::new(f64::MIN_POSITIVE, rel, 2000)
}

/// Access cost per bit and per user pair, `4 pi int_0^inf C(alpha u) u exp(-pi u^2) du`,
/// which is twice the mean cost from a user to its nearest node.
pub fn kappa_loc<C: CostCurve + ?Sized>(cost: &C, alpha_bb: f64) -> Result<f64> {
    check_alpha(alpha_bb)?;
    let f = |u: f64| Ok(cost.cost(alpha_bb * u)? * u * (-PI * u * u).exp());
    let tol = rel_tol(1e-11)?;
    let v = match cost.breakpoint().map(|d| d / alpha_bb) {
        Some(b) if b > 0.0 => try_integrate_1d(f, 0.0, b, tol)? + try_integrate_1d(f, b, f64::INFINITY, tol)?,
        _ => try_integrate_1d(f, 0.0, f64::INFINITY, tol)?,
    };
    Ok(4.0 * PI * v)
}

fn exponential_only(model: &LinkModel) -> Result<()> {
    if model.is_pure_exponential() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel(
            "closed-form backbone constant needs the pure exponential rate".into(),
        ))
    }
}

/// Backbone cost per bit and per km of user separation for the pure
/// exponential model,
/// `C_QKD/(R0 lambda) (4/pi) [exp(a^2/pi)(1 + erf(a/sqrt pi)) + 1/a]` with `a = alpha_bb/lambda`.
pub fn kappa_bb_closed_form(model: &LinkModel, costs: &CostParams, alpha_bb: f64) -> Result<f64> {
    exponential_only(model)?;
    check_alpha(alpha_bb)?;
    let lambda = model.lambda_qkd();
    let a = alpha_bb / lambda;
    let bracket = (a * a / PI).exp() * (1.0 + erf(a / PI.sqrt())?) + 1.0 / a;
    Ok(costs.c_qkd() / (model.r0() * lambda) * 4.0 / PI * bracket)
}

/// Backbone cost constant for any cost curve, by nested quadrature of
/// `(2/alpha) int C(2 alpha r sin((psi - phi)/2)) (cos phi - cos psi) r^2 exp(-pi r^2)`
/// over `r > 0`, `|phi| <= psi < pi`. The radial integral is innermost.
pub fn kappa_bb_quadrature<C: CostCurve + ?Sized>(cost: &C, alpha_bb: f64) -> Result<f64> {
    check_alpha(alpha_bb)?;
    let inner = rel_tol(1e-12)?;
    let middle = rel_tol(1e-11)?;
    let outer = rel_tol(1e-10)?;
    let radial = |chord: f64| {
        try_integrate_1d(
            |r| Ok(cost.cost(2.0 * alpha_bb * r * chord)? * r * r * (-PI * r * r).exp()),
            0.0,
            f64::INFINITY,
            inner,
        )
    };
    let v = try_integrate_1d(
        |psi| {
            try_integrate_1d(
                |phi| Ok((phi.cos() - psi.cos()) * radial((0.5 * (psi - phi)).sin())?),
                -psi,
                psi,
                middle,
            )
        },
        0.0,
        PI,
        outer,
    )?;
    Ok(2.0 / alpha_bb * v)
}

/// Backbone cost constant for the pure exponential model from the reduced form
/// `(C_QKD/R0)(2/alpha) 8 int_0^{pi/2} int_0^inf exp(2 r sin(v)/s - pi r^2) r^2 sin v dr dv`
/// with `s = lambda / alpha_bb`.
pub fn kappa_bb_reduced(model: &LinkModel, costs: &CostParams, alpha_bb: f64) -> Result<f64> {
    exponential_only(model)?;
    check_alpha(alpha_bb)?;
    let inv_s = alpha_bb / model.lambda_qkd();
    let inner = rel_tol(1e-12)?;
    let v = try_integrate_1d(
        |v| {
            let sv = v.sin();
            let r = try_integrate_1d(
                |r| Ok((2.0 * inv_s * r * sv - PI * r * r).exp() * r * r),
                0.0,
                f64::INFINITY,
                inner,
            )?;
            Ok(r * sv)
        },
        0.0,
        FRAC_PI_2,
        rel_tol(1e-11)?,
    )?;
    Ok(costs.c_qkd() / model.r0() * 2.0 / alpha_bb * 8.0 * v)
}

/// Node spacing minimizing [`kappa_bb_closed_form`], searched on
/// `[0.05 lambda, 10 lambda]`. The minimum sits at `lambda / alpha = 1.2490`.
pub fn optimal_alpha_bb(model: &LinkModel, costs: &CostParams) -> Result<f64> {
    exponential_only(model)?;
    let lambda = model.lambda_qkd();
    let tol = Tolerance::new(1e-7 * lambda, 0.0, 500)?;
    let (alpha, _) = try_minimize_1d(
        |a| kappa_bb_closed_form(model, costs, a),
        0.05 * lambda,
        10.0 * lambda,
        tol,
    )?;
    Ok(alpha)
}

/// Local `V mu^2 kappa_loc`, backbone `V delta kappa_bb` and node
/// `C_node (L/alpha_bb)^2` terms. Uses the closed-form backbone constant
/// when available and quadrature otherwise.
pub fn stochastic_backbone_cost(
    model: &LinkModel,
    costs: &CostParams,
    sc: &StochasticBackboneScenario,
) -> Result<CostBreakdown> {
    let alpha = sc.alpha_bb;
    let cost = LinkCost::new(*model, *costs);
    let k_bb = if model.is_pure_exponential() {
        kappa_bb_closed_form(model, costs, alpha)?
    } else {
        kappa_bb_quadrature(&cost, alpha)?
    };
    let k_loc = kappa_loc(&cost, alpha)?;
    let p = &sc.planar;
    let v = p.volume_v();
    Ok(CostBreakdown::new(
        v * p.mean_users().powi(2) * k_loc,
        v * delta_analytic(p) * k_bb,
        costs.c_node() * sc.mean_nodes(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link_model::per_bit_cost;

    const LAMBDA: f64 = 19.7;

    fn setup() -> (LinkModel, CostParams) {
        (
            LinkModel::pure_exponential(1e6, LAMBDA).unwrap(),
            CostParams::new(1e5, 5e4).unwrap(),
        )
    }

    // Single-integral form of the backbone constant, in units of C_QKD/(R0 lambda):
    // 2/pi + (4s/pi) int_0^{pi/2} sin v (1 + 2 sin^2 v/(pi s^2)) exp(sin^2 v/(pi s^2))
    //                                  (1 + erf(sin v/(sqrt(pi) s))) dv.
    fn single_integral(s: f64) -> f64 {
        let n = 20_000;
        let h = FRAC_PI_2 / n as f64;
        let f = |v: f64| {
            let sv = v.sin();
            let q = sv * sv / (PI * s * s);
            sv * (1.0 + 2.0 * q) * q.exp() * (1.0 + erf(sv / (PI.sqrt() * s)).unwrap())
        };
        // Composite Simpson.
        let mut acc = f(0.0) + f(FRAC_PI_2);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        2.0 / PI + 4.0 * s / PI * acc * h / 3.0
    }

    #[test]
    fn kappa_loc_constant_and_linear() {
        for a in [0.5, 1.0, 19.7] {
            assert!((kappa_loc(&|_: f64| 3.0, a).unwrap() - 6.0).abs() < 1e-10);
            assert!((kappa_loc(&|l: f64| l, a).unwrap() - a).abs() < 1e-10 * a);
        }
    }

    #[test]
    fn kappa_loc_matches_riemann_oracle() {
        let (m, c) = setup();
        let cost = LinkCost::new(m, c);
        let got = kappa_loc(&cost, LAMBDA).unwrap();
        let n = 400_000;
        let top = 8.0;
        let h = top / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) * h;
                per_bit_cost(&m, &c, LAMBDA * u).unwrap() * u * (-PI * u * u).exp()
            })
            .sum::<f64>()
            * h
            * 4.0
            * PI;
        assert!((got - oracle).abs() < 1e-8 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn kappa_loc_increases_with_cell_size() {
        let (m, c) = setup();
        let cost = LinkCost::new(m, c);
        let vals: Vec<f64> = (1..=20).map(|i| kappa_loc(&cost, 0.25 * i as f64 * LAMBDA).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn closed_form_special_values() {
        let (m, c) = setup();
        let unit = c.c_qkd() / (m.r0() * LAMBDA);
        let at_lambda = kappa_bb_closed_form(&m, &c, LAMBDA).unwrap();
        let want = unit * 4.0 / PI * ((1.0 / PI).exp() * (1.0 + erf(1.0 / PI.sqrt()).unwrap()) + 1.0);
        assert!((at_lambda - want).abs() < 1e-14 * want);
        let tiny = 1e-6 * LAMBDA;
        let lim = kappa_bb_closed_form(&m, &c, tiny).unwrap() * tiny * m.r0() / c.c_qkd();
        assert!((lim - 4.0 / PI).abs() < 1e-5);
        let bb = LinkModel::bb84(1e6, LAMBDA, 0.01, 1e-4).unwrap();
        assert!(matches!(kappa_bb_closed_form(&bb, &c, LAMBDA), Err(Error::UnsupportedModel(_))));
        assert!(matches!(optimal_alpha_bb(&bb, &c), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn three_evaluation_paths_agree() {
        let (m, c) = setup();
        let cost = LinkCost::new(m, c);
        let unit = c.c_qkd() / (m.r0() * LAMBDA);
        for ratio in [0.25, 0.5, 1.0, 1.249, 2.0, 4.0] {
            let a = ratio * LAMBDA;
            let cf = kappa_bb_closed_form(&m, &c, a).unwrap();
            let quad = kappa_bb_quadrature(&cost, a).unwrap();
            let red = kappa_bb_reduced(&m, &c, a).unwrap();
            let single = unit * single_integral(1.0 / ratio);
            for (name, v) in [("triple", quad), ("reduced", red), ("single", single)] {
                assert!((v - cf).abs() < 1e-6 * cf, "{name} at {ratio}: {v} vs {cf}");
            }
        }
    }

    #[test]
    fn constant_cost_matches_grid_oracle() {
        // Fixed-grid midpoint sum over (psi, phi, r).
        let a = 2.0;
        let n = 160;
        let nr = 400;
        let rmax = 5.0;
        let (hp, hr) = (PI / n as f64, rmax / nr as f64);
        let radial: f64 = (0..nr)
            .map(|k| {
                let r = (k as f64 + 0.5) * hr;
                r * r * (-PI * r * r).exp()
            })
            .sum::<f64>()
            * hr;
        let mut ang = 0.0;
        for i in 0..n {
            let psi = (i as f64 + 0.5) * hp;
            let m = 2 * n;
            let hf = 2.0 * psi / m as f64;
            for j in 0..m {
                let phi = -psi + (j as f64 + 0.5) * hf;
                ang += (phi.cos() - psi.cos()) * hf;
            }
        }
        let oracle = 2.0 * 3.0 / a * ang * hp * radial;
        let got = kappa_bb_quadrature(&|_: f64| 3.0, a).unwrap();
        assert!((got - oracle).abs() < 1e-4 * oracle, "{got} vs {oracle}");
        assert!((got - 4.0 * 3.0 / (PI * a)).abs() < 1e-9 * got);
    }

    #[test]
    fn linear_cost_gives_path_length_factor() {
        for a in [0.1, 1.0, 10.0] {
            let got = kappa_bb_quadrature(&|l: f64| l, a).unwrap();
            assert!((got - 4.0 / PI).abs() < 1e-9, "{got}");
        }
    }

    #[test]
    fn optimum_and_invariances() {
        let (m, c) = setup();
        let a = optimal_alpha_bb(&m, &c).unwrap();
        assert!((LAMBDA / a - 1.2490).abs() < 1e-3, "lambda/alpha = {}", LAMBDA / a);
        let m2 = LinkModel::pure_exponential(1e6, 2.0 * LAMBDA).unwrap();
        assert!((optimal_alpha_bb(&m2, &c).unwrap() - 2.0 * a).abs() < 1e-4 * LAMBDA);
        let c3 = CostParams::new(1e8, 5e4).unwrap();
        let m3 = LinkModel::pure_exponential(3.0, LAMBDA).unwrap();
        assert!((optimal_alpha_bb(&m3, &c3).unwrap() - a).abs() < 1e-4 * LAMBDA);
    }

    #[test]
    fn closed_form_unimodal_and_bounded() {
        let (m, c) = setup();
        let grid: Vec<f64> = (0..200)
            .map(|i| 0.05 * LAMBDA * (200.0f64).powf(i as f64 / 199.0))
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&a| kappa_bb_closed_form(&m, &c, a).unwrap()).collect();
        let interior_minima = (1..vals.len() - 1)
            .filter(|&i| vals[i] < vals[i - 1] && vals[i] < vals[i + 1])
            .count();
        assert_eq!(interior_minima, 1);
        for (&a, &k) in grid.iter().zip(&vals) {
            assert!(k * a * m.r0() / c.c_qkd() >= 4.0 / PI);
        }
    }

    #[test]
    fn stochastic_breakdown_scaling() {
        let (m, c) = setup();
        let br = |l: f64| {
            let sc = StochasticBackboneScenario::new(PlanarScenario::new(l, 5.0, 1e3).unwrap(), 1.249 * LAMBDA).unwrap();
            stochastic_backbone_cost(&m, &c, &sc).unwrap()
        };
        let (a, b) = (br(200.0), br(400.0));
        let ra = a.backbone / a.local;
        let rb = b.backbone / b.local;
        assert!((rb / ra - 2.0).abs() < 1e-12);
        assert!(b.node / b.total < a.node / a.total);
        assert!((a.total - (a.local + a.backbone + a.node)).abs() < 1e-9 * a.total);
    }

    #[test]
    fn bb84_uses_quadrature_and_rejects_far_support() {
        let c = CostParams::new(1e5, 5e4).unwrap();
        let bb = LinkModel::bb84(1e6, LAMBDA, 0.01, 1e-4).unwrap();
        let cutoff = bb.cutoff_distance().unwrap();
        let sc = StochasticBackboneScenario::new(PlanarScenario::new(400.0, 5.0, 1e3).unwrap(), cutoff).unwrap();
        assert!(matches!(
            stochastic_backbone_cost(&bb, &c, &sc),
            Err(Error::InfeasibleDistance { .. })
        ));
        // 1/R has a simple pole at the cutoff, so the access integral diverges
        // even when distances past the cutoff are charged a finite penalty.
        let cost = LinkCost::new(bb, c).with_penalty(1e3);
        assert!(matches!(kappa_loc(&cost, cutoff), Err(Error::NumericalFailure { .. })));
        // Cells small enough that the Gaussian weight never reaches the cutoff are fine.
        let small = kappa_loc(&LinkCost::new(bb, c), 0.05 * cutoff).unwrap();
        let envelope = kappa_loc(&LinkCost::new(bb.exponential_envelope(), c), 0.05 * cutoff).unwrap();
        assert!(small > envelope);
    }
}

//! Secret-key rate of a single QKD link as a function of its length, and the
//! per-bit equipment cost derived from it.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{bisect, Tolerance};

/// Shape of the rate-versus-distance curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVariant {
    /// `R(l) = R0 exp(-l / lambda)` on the whole half-line.
    PureExponential,
    /// Exponential envelope times the BB84 secret fraction `1 - 2 h(p)` with
    /// error rate `p(l) = a + b exp(l / lambda)`. Dark counts drive `p` up
    /// with distance and the rate collapses at a finite cutoff.
    Bb84DarkCount { a: f64, b: f64 },
}

/// Secret-key rate curve `R(l)` of one QKD link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    r0: f64,
    lambda_qkd: f64,
    variant: RateVariant,
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Error rate at which the BB84 secret fraction `1 - 2 h(p)` reaches zero.
pub fn bb84_error_threshold() -> f64 {
    static THRESHOLD: OnceLock<f64> = OnceLock::new();
    *THRESHOLD.get_or_init(|| {
        let tol = Tolerance::new(1e-16, 0.0, 200).expect("valid tolerance");
        bisect(|p| 1.0 - 2.0 * binary_entropy(p), 0.01, 0.49, tol).expect("sign change on [0.01, 0.49]")
    })
}

impl LinkModel {
    pub fn new(r0: f64, lambda_qkd: f64, variant: RateVariant) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(domain(format!("r0 must be > 0, got {r0}")));
        }
        if !(lambda_qkd > 0.0 && lambda_qkd.is_finite()) {
            return Err(domain(format!("lambda_qkd must be > 0, got {lambda_qkd}")));
        }
        if let RateVariant::Bb84DarkCount { a, b } = variant {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(domain(format!("bb84 offset a must be >= 0, got {a}")));
            }
            if !(b > 0.0 && b.is_finite()) {
                return Err(domain(format!("bb84 slope b must be > 0, got {b}")));
            }
            let threshold = bb84_error_threshold();
            if a + b >= threshold {
                return Err(domain(format!(
                    "bb84 error rate at zero distance a + b = {} must be below {threshold:.7}",
                    a + b
                )));
            }
        }
        Ok(Self {
            r0,
            lambda_qkd,
            variant,
        })
    }

    pub fn pure_exponential(r0: f64, lambda_qkd: f64) -> Result<Self> {
        Self::new(r0, lambda_qkd, RateVariant::PureExponential)
    }

    pub fn bb84(r0: f64, lambda_qkd: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(r0, lambda_qkd, RateVariant::Bb84DarkCount { a, b })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn lambda_qkd(&self) -> f64 {
        self.lambda_qkd
    }

    pub fn variant(&self) -> RateVariant {
        self.variant
    }

    pub fn is_pure_exponential(&self) -> bool {
        matches!(self.variant, RateVariant::PureExponential)
    }

    /// The same model with the dark-count correction removed.
    pub fn exponential_envelope(&self) -> Self {
        Self {
            variant: RateVariant::PureExponential,
            ..*self
        }
    }

    /// Quantum bit error rate at distance `ell` (BB84 variant only).
    pub fn error_rate(&self, ell: f64) -> Option<f64> {
        match self.variant {
            RateVariant::PureExponential => None,
            RateVariant::Bb84DarkCount { a, b } => Some(a + b * (ell / self.lambda_qkd).exp()),
        }
    }

    /// Distance beyond which the rate is zero; `None` for the pure exponential.
    pub fn cutoff_distance(&self) -> Option<f64> {
        match self.variant {
            RateVariant::PureExponential => None,
            RateVariant::Bb84DarkCount { a, b } => {
                Some(self.lambda_qkd * ((bb84_error_threshold() - a) / b).ln())
            }
        }
    }

    /// Secret-key rate in bit/s over a link of length `ell` km.
    pub fn rate(&self, ell: f64) -> Result<f64> {
        if !(ell >= 0.0) {
            return Err(domain(format!("link length must be >= 0, got {ell}")));
        }
        let envelope = self.r0 * (-ell / self.lambda_qkd).exp();
        Ok(match self.variant {
            RateVariant::PureExponential => envelope,
            RateVariant::Bb84DarkCount { .. } => {
                let p = self.error_rate(ell).expect("bb84 variant");
                if p >= 0.5 {
                    0.0
                } else {
                    envelope * (1.0 - 2.0 * binary_entropy(p)).max(0.0)
                }
            }
        })
    }
}

/// Channel and detector parameters from which `lambda_qkd` and the drop-off
/// distance follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationSpec {
    alpha_db_per_km: f64,
    r_exponent: f64,
    eta_d: f64,
    p_d: f64,
}

impl AttenuationSpec {
    pub fn new(alpha_db_per_km: f64, r_exponent: f64, eta_d: f64, p_d: f64) -> Result<Self> {
        if !(alpha_db_per_km > 0.0 && alpha_db_per_km.is_finite()) {
            return Err(domain(format!("attenuation must be > 0 dB/km, got {alpha_db_per_km}")));
        }
        if !(r_exponent > 0.0 && r_exponent.is_finite()) {
            return Err(domain(format!("rate exponent r must be > 0, got {r_exponent}")));
        }
        if !(eta_d > 0.0 && eta_d <= 1.0) {
            return Err(domain(format!("detector efficiency must lie in (0, 1], got {eta_d}")));
        }
        if !(p_d > 0.0 && p_d < eta_d) {
            return Err(domain(format!(
                "dark-count probability must lie in (0, eta_d = {eta_d}), got {p_d}"
            )));
        }
        Ok(Self {
            alpha_db_per_km,
            r_exponent,
            eta_d,
            p_d,
        })
    }

    pub fn alpha_db_per_km(&self) -> f64 {
        self.alpha_db_per_km
    }

    pub fn r_exponent(&self) -> f64 {
        self.r_exponent
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    /// Channel transmittance `10^(-alpha l / 10)`.
    pub fn transmittance(&self, ell: f64) -> f64 {
        10f64.powf(-self.alpha_db_per_km * ell / 10.0)
    }
}

/// Scaling length `10 / (alpha r ln 10)` in km.
pub fn lambda_from_attenuation(spec: &AttenuationSpec) -> f64 {
    10.0 / (spec.alpha_db_per_km * spec.r_exponent * std::f64::consts::LN_10)
}

/// Distance `lambda ln(eta_d / p_d)` at which dark counts overwhelm the signal.
pub fn drop_distance(spec: &AttenuationSpec, lambda: f64) -> Result<f64> {
    if spec.p_d >= spec.eta_d {
        return Err(domain("dark-count probability must be below detector efficiency"));
    }
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(lambda * (spec.eta_d / spec.p_d).ln())
}

/// Unit equipment costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    c_qkd: f64,
    c_node: f64,
}

impl CostParams {
    pub fn new(c_qkd: f64, c_node: f64) -> Result<Self> {
        if !(c_qkd > 0.0 && c_qkd.is_finite()) {
            return Err(domain(format!("c_qkd must be > 0, got {c_qkd}")));
        }
        if !(c_node >= 0.0 && c_node.is_finite()) {
            return Err(domain(format!("c_node must be >= 0, got {c_node}")));
        }
        Ok(Self { c_qkd, c_node })
    }

    /// Cost of one QKD device pair.
    pub fn c_qkd(&self) -> f64 {
        self.c_qkd
    }

    /// Cost of one trusted node.
    pub fn c_node(&self) -> f64 {
        self.c_node
    }
}

/// Equipment cost per unit of secret key rate, `C(l) = C_QKD / R(l)`.
pub fn per_bit_cost(model: &LinkModel, costs: &CostParams, ell: f64) -> Result<f64> {
    let rate = model.rate(ell)?;
    if rate > 0.0 {
        Ok(costs.c_qkd / rate)
    } else {
        Err(Error::InfeasibleDistance { ell })
    }
}

/// A per-bit cost function of link length, as consumed by the geometric
/// averaging routines.
pub trait CostCurve: Sync {
    fn cost(&self, ell: f64) -> Result<f64>;

    /// Distance at which the curve jumps, if any. Quadrature splits there.
    fn breakpoint(&self) -> Option<f64> {
        None
    }
}

impl<F> CostCurve for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn cost(&self, ell: f64) -> Result<f64> {
        Ok(self(ell))
    }
}

/// [`per_bit_cost`] packaged as a [`CostCurve`].
///
/// By default an infeasible distance is an error. `with_penalty` substitutes
/// a fixed per-bit cost there instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkCost {
    pub model: LinkModel,
    pub costs: CostParams,
    pub beyond_cutoff: Option<f64>,
}

impl LinkCost {
    pub fn new(model: LinkModel, costs: CostParams) -> Self {
        Self {
            model,
            costs,
            beyond_cutoff: None,
        }
    }

    pub fn with_penalty(self, penalty: f64) -> Self {
        Self {
            beyond_cutoff: Some(penalty),
            ..self
        }
    }
}

impl CostCurve for LinkCost {
    fn cost(&self, ell: f64) -> Result<f64> {
        match per_bit_cost(&self.model, &self.costs, ell) {
            Err(Error::InfeasibleDistance { .. }) if self.beyond_cutoff.is_some() => {
                Ok(self.beyond_cutoff.expect("checked"))
            }
            other => other,
        }
    }

    fn breakpoint(&self) -> Option<f64> {
        self.beyond_cutoff.and(self.model.cutoff_distance())
    }
}

/// Outcome of a discrete curvature check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub passed: bool,
    /// Largest second difference of the wrong sign (0 if none).
    pub worst_violation: f64,
    /// Grid point where the worst violation occurs.
    pub worst_at: f64,
}

fn grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(domain(format!("curvature check needs n >= 3 points, got {n}")));
    }
    if !(lo < hi) {
        return Err(domain(format!("curvature check needs lo < hi, got [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

// sign = +1 checks concavity (second differences <= slack), -1 convexity.
fn curvature_check(xs: &[f64], ys: &[f64], sign: f64) -> CurvatureReport {
    let scale = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let slack = 1e-9 * scale;
    let mut worst = (0.0f64, xs[0]);
    for i in 1..ys.len() - 1 {
        let second = sign * (ys[i - 1] - 2.0 * ys[i] + ys[i + 1]);
        if second > worst.0 {
            worst = (second, xs[i]);
        }
    }
    CurvatureReport {
        passed: worst.0 <= slack,
        worst_violation: worst.0,
        worst_at: worst.1,
    }
}

/// Checks midpoint concavity of `ln rate` on `n` equally spaced points.
pub fn check_log_concavity_of<F>(rate: F, lo: f64, hi: f64, n: usize) -> Result<CurvatureReport>
where
    F: Fn(f64) -> Result<f64>,
{
    let xs = grid(lo, hi, n)?;
    let mut logs = Vec::with_capacity(n);
    for &x in &xs {
        let r = rate(x)?;
        if !(r > 0.0) {
            return Err(Error::InfeasibleDistance { ell: x });
        }
        logs.push(r.ln());
    }
    Ok(curvature_check(&xs, &logs, 1.0))
}

/// Checks that `ln R` is concave on `[lo, hi]` for the given model.
pub fn check_log_concavity(model: &LinkModel, lo: f64, hi: f64, n: usize) -> Result<CurvatureReport> {
    check_log_concavity_of(|ell| model.rate(ell), lo, hi, n)
}

/// Checks midpoint convexity of `f` on `n` equally spaced points.
pub fn check_convexity_of<F>(f: F, lo: f64, hi: f64, n: usize) -> Result<CurvatureReport>
where
    F: Fn(f64) -> Result<f64>,
{
    let xs = grid(lo, hi, n)?;
    let ys = xs.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    Ok(curvature_check(&xs, &ys, -1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp_model() -> LinkModel {
        LinkModel::pure_exponential(1e6, 19.7).unwrap()
    }

    #[test]
    fn lambda_from_telecom_attenuation() {
        let spec = AttenuationSpec::new(0.22, 1.0, 0.1, 1e-7).unwrap();
        let lambda = lambda_from_attenuation(&spec);
        assert!((lambda - 19.7).abs() < 0.05, "{lambda}");
        let spec2 = AttenuationSpec::new(0.22, 2.0, 0.1, 1e-7).unwrap();
        assert!((lambda_from_attenuation(&spec2) - lambda / 2.0).abs() < 1e-12);
        let spec3 = AttenuationSpec::new(0.44, 1.0, 0.1, 1e-7).unwrap();
        assert!((lambda_from_attenuation(&spec3) - 9.87).abs() < 0.005);
    }

    #[test]
    fn lambda_matches_transmittance_slope() {
        // R = R0 eta^r, so ln R falls by r*alpha*ln(10)/10 per km.
        let spec = AttenuationSpec::new(0.3, 1.5, 0.1, 1e-6).unwrap();
        let slope = -(spec.transmittance(10.0).powf(1.5)).ln() / 10.0;
        assert!((1.0 / slope - lambda_from_attenuation(&spec)).abs() < 1e-9);
    }

    #[test]
    fn drop_distance_values() {
        let spec = AttenuationSpec::new(0.22, 1.0, 0.1, 1e-7).unwrap();
        let d7 = drop_distance(&spec, 19.7).unwrap();
        assert!((d7 - 19.7 * 1e6f64.ln()).abs() < 1e-9);
        assert!((d7 - 272.2).abs() < 0.1);
        let spec6 = AttenuationSpec::new(0.22, 1.0, 0.1, 1e-6).unwrap();
        assert!((drop_distance(&spec6, 19.7).unwrap() - 226.8).abs() < 0.1);
        let spec8 = AttenuationSpec::new(0.22, 1.0, 0.1, 1e-8).unwrap();
        assert!((drop_distance(&spec8, 19.7).unwrap() - 317.5).abs() < 0.1);
        let spec_e = AttenuationSpec::new(0.22, 1.0, 0.5, 0.5 / std::f64::consts::E).unwrap();
        assert!((drop_distance(&spec_e, 19.7).unwrap() - 19.7).abs() < 1e-12);
    }

    #[test]
    fn attenuation_spec_rejects_dark_counts_above_efficiency() {
        assert!(AttenuationSpec::new(0.22, 1.0, 0.1, 0.2).is_err());
        assert!(AttenuationSpec::new(0.22, 1.0, 1.5, 1e-6).is_err());
        assert!(AttenuationSpec::new(-0.22, 1.0, 0.1, 1e-6).is_err());
    }

    #[test]
    fn pure_exponential_rate_examples() {
        let m = exp_model();
        assert_eq!(m.rate(0.0).unwrap(), 1e6);
        assert!((m.rate(19.7).unwrap() - 1e6 / std::f64::consts::E).abs() < 1e-6);
        assert!(matches!(m.rate(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn bb84_rate_near_entropy_threshold() {
        let m = LinkModel::bb84(1e6, 19.7, 0.01, 0.001).unwrap();
        // p(l) = 0.11 at l = lambda ln(100); 0.11 sits just below the
        // threshold 0.1100279, so the secret fraction is small but positive.
        let ell = 19.7 * 100f64.ln();
        assert!((m.error_rate(ell).unwrap() - 0.11).abs() < 1e-14);
        let h = -0.11 * 0.11f64.log2() - 0.89 * 0.89f64.log2();
        let expected = 1e6 * (-ell / 19.7).exp() * (1.0 - 2.0 * h);
        let r = m.rate(ell).unwrap();
        assert!(r > 0.0 && (r - expected).abs() < 1e-9 * expected.abs().max(1e-9));
        assert!((1.0 - 2.0 * h - 1.68e-4).abs() < 1e-6);

        let cutoff = m.cutoff_distance().unwrap();
        assert!(cutoff > ell);
        assert_eq!(m.rate(cutoff * 1.0001).unwrap(), 0.0);
        assert_eq!(m.rate(cutoff + 50.0).unwrap(), 0.0);
    }

    #[test]
    fn bb84_threshold_value() {
        let p = bb84_error_threshold();
        assert!((p - 0.110_027_864).abs() < 1e-8);
        assert!((binary_entropy(p) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bb84_rejects_error_rate_above_threshold_at_origin() {
        assert!(LinkModel::bb84(1e6, 19.7, 0.1, 0.02).is_err());
        assert!(LinkModel::bb84(1e6, 19.7, 0.01, 0.0).is_err());
        assert!(LinkModel::pure_exponential(0.0, 19.7).is_err());
        assert!(LinkModel::pure_exponential(1.0, -3.0).is_err());
    }

    #[test]
    fn per_bit_cost_examples() {
        let m = exp_model();
        let c = CostParams::new(2.5, 0.0).unwrap();
        assert!((per_bit_cost(&m, &c, 0.0).unwrap() - 2.5e-6).abs() < 1e-18);
        let at_lambda = per_bit_cost(&m, &c, 19.7).unwrap();
        assert!((at_lambda - std::f64::consts::E * 2.5e-6).abs() < 1e-15);
        let bb = LinkModel::bb84(1e6, 19.7, 0.01, 0.001).unwrap();
        let beyond = bb.cutoff_distance().unwrap() + 1.0;
        assert!(matches!(
            per_bit_cost(&bb, &c, beyond),
            Err(Error::InfeasibleDistance { .. })
        ));
        let penalised = LinkCost::new(bb, c).with_penalty(1e9);
        assert_eq!(penalised.cost(beyond).unwrap(), 1e9);
    }

    #[test]
    fn log_concavity_examples() {
        let r = check_log_concavity(&exp_model(), 0.0, 300.0, 301).unwrap();
        assert!(r.passed);

        let bb = LinkModel::bb84(1e6, 19.7, 0.01, 0.001).unwrap();
        let cutoff = bb.cutoff_distance().unwrap();
        let r = check_log_concavity(&bb, 0.0, 0.95 * cutoff, 400).unwrap();
        assert!(r.passed, "{r:?}");

        let r = check_log_concavity_of(|l: f64| Ok((l * l).exp()), 0.0, 3.0, 31).unwrap();
        assert!(!r.passed && r.worst_violation > 0.0);

        assert!(matches!(
            check_log_concavity(&bb, 0.0, cutoff * 1.1, 50),
            Err(Error::InfeasibleDistance { .. })
        ));
        assert!(check_log_concavity(&bb, 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn cost_is_convex_where_rate_is_log_concave() {
        let c = CostParams::new(1.0, 0.0).unwrap();
        for m in [exp_model(), LinkModel::bb84(1e6, 19.7, 0.02, 1e-4).unwrap()] {
            let hi = m.cutoff_distance().map_or(200.0, |c| 0.95 * c);
            assert!(check_log_concavity(&m, 0.0, hi, 300).unwrap().passed);
            let r = check_convexity_of(|l| per_bit_cost(&m, &c, l), 0.0, hi, 300).unwrap();
            assert!(r.passed, "{r:?}");
            let log_convex = check_convexity_of(|l| per_bit_cost(&m, &c, l).map(f64::ln), 0.0, hi, 300).unwrap();
            assert!(log_convex.passed);
        }
    }

    proptest! {
        #[test]
        fn rate_strictly_decreasing(a in 0.0f64..0.05, b in 1e-5f64..1e-2, x in 0.0f64..0.9, dx in 1e-3f64..0.1) {
            let m = LinkModel::bb84(1e6, 19.7, a, b).unwrap();
            let cutoff = m.cutoff_distance().unwrap();
            let l1 = x * cutoff;
            let l2 = (l1 + dx * cutoff).min(0.999 * cutoff);
            prop_assume!(l2 > l1);
            prop_assert!(m.rate(l2).unwrap() < m.rate(l1).unwrap());
            let e = m.exponential_envelope();
            prop_assert!(e.rate(l2).unwrap() < e.rate(l1).unwrap());
        }

        #[test]
        fn exponential_semigroup(l1 in 0.0f64..200.0, l2 in 0.0f64..200.0) {
            let m = exp_model();
            let lhs = m.rate(l1 + l2).unwrap() * m.r0();
            let rhs = m.rate(l1).unwrap() * m.rate(l2).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn lambda_inverse_scaling(alpha in 0.05f64..2.0, r in 0.2f64..4.0, k in 0.1f64..10.0) {
            let base = lambda_from_attenuation(&AttenuationSpec::new(alpha, r, 0.1, 1e-6).unwrap());
            let scaled_r = lambda_from_attenuation(&AttenuationSpec::new(alpha, k * r, 0.1, 1e-6).unwrap());
            let scaled_a = lambda_from_attenuation(&AttenuationSpec::new(k * alpha, r, 0.1, 1e-6).unwrap());
            prop_assert!((scaled_r * k - base).abs() <= 1e-12 * base);
            prop_assert!((scaled_a * k - base).abs() <= 1e-12 * base);
        }
    }
}

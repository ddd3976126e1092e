//! Scalar numerical kernels shared by the cost models: the error function,
//! adaptive quadrature, golden-section minimization, fixed-point iteration
//! and bisection.
//!
//! Every routine is a pure function of its arguments. The fallible `try_*`
//! variants accept integrands that can themselves fail (for instance a cost
//! curve probed past its cutoff) and propagate that error unchanged.

use crate::error::{domain, numerical, Error, Result};

/// Convergence controls for the iterative kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    /// Absolute tolerance, in the units of the quantity being computed.
    pub abs: f64,
    /// Relative tolerance.
    pub rel: f64,
    /// Iteration (or panel subdivision) budget.
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64, max_iter: usize) -> Result<Self> {
        if !(abs > 0.0 && abs.is_finite()) {
            return Err(domain(format!("tolerance abs must be > 0, got {abs}")));
        }
        if !(rel >= 0.0 && rel.is_finite()) {
            return Err(domain(format!("tolerance rel must be >= 0, got {rel}")));
        }
        if max_iter == 0 {
            return Err(domain("tolerance max_iter must be >= 1"));
        }
        Ok(Self { abs, rel, max_iter })
    }

    /// Same tolerance with a different absolute target.
    pub fn with_abs(self, abs: f64) -> Self {
        Self { abs, ..self }
    }

    fn target(&self, magnitude: f64) -> f64 {
        self.abs.max(self.rel * magnitude.abs())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-10,
            max_iter: 1000,
        }
    }
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// The error function `2/sqrt(pi) * int_0^x exp(-t^2) dt`.
///
/// Accurate to about 1e-15 absolute. Uses the non-alternating Taylor series
/// below |x| = 3 and a Lentz-evaluated continued fraction for `erfc` above.
pub fn erf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("erf of non-finite argument {x}")));
    }
    let ax = x.abs();
    let value = if ax < 3.0 {
        erf_series(ax)
    } else if ax < 6.0 {
        1.0 - erfc_continued_fraction(ax)
    } else {
        1.0
    };
    Ok(value.copysign(x))
}

/// Complementary error function `1 - erf(x)`, accurate in the upper tail.
pub fn erfc(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("erfc of non-finite argument {x}")));
    }
    if x >= 3.0 {
        Ok(erfc_continued_fraction(x))
    } else {
        Ok(1.0 - erf(x)?)
    }
}

// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (2n+1)!!
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{-x^2} / (sqrt(pi) F), F = x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..500 {
        let a = j as f64 * 0.5;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gauss_kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &xk) in XGK[..7].iter().enumerate() {
        let dx = half * xk;
        let pair = f(center - dx)? + f(center + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(numerical(
            format!("quadrature on [{a}, {b}]: non-finite integrand"),
            value,
        ));
    }
    Ok(Panel { a, b, value, error })
}

fn adaptive_finite<F>(f: &mut F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut panels = vec![gauss_kronrod(f, a, b)?];
    for _ in 0..tol.max_iter {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if err <= tol.target(total) {
            return Ok(total);
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // Panel cannot be split further in floating point.
            panels.push(Panel { error: 0.0, ..p });
            continue;
        }
        panels.push(gauss_kronrod(f, p.a, mid)?);
        panels.push(gauss_kronrod(f, mid, p.b)?);
    }
    let total: f64 = panels.iter().map(|p| p.value).sum();
    let err: f64 = panels.iter().map(|p| p.error).sum();
    if err <= tol.target(total) {
        Ok(total)
    } else {
        Err(numerical(
            format!("adaptive quadrature on [{a}, {b}] (error estimate {err:e})"),
            total,
        ))
    }
}

/// Maximum number of unit-width panels used for a semi-infinite range.
const MAX_TAIL_PANELS: usize = 64;

/// Fallible form of [`integrate_1d`].
pub fn try_integrate_1d<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !a.is_finite() || b.is_nan() || b == f64::NEG_INFINITY {
        return Err(domain(format!("integration limits [{a}, {b}] not supported")));
    }
    if !(a < b) {
        return Err(domain(format!("integration requires a < b, got [{a}, {b}]")));
    }
    if b.is_finite() {
        return adaptive_finite(&mut f, a, b, tol);
    }

    // Semi-infinite range: unit-width panels until two consecutive panels are
    // negligible. Integrands here carry a Gaussian envelope in a variable of
    // order-one scale.
    let panel_tol = Tolerance {
        abs: 0.1 * tol.abs,
        ..tol
    };
    let mut total = 0.0;
    let mut quiet = 0;
    for k in 0..MAX_TAIL_PANELS {
        let lo = a + k as f64;
        let part = adaptive_finite(&mut f, lo, lo + 1.0, panel_tol)?;
        total += part;
        if part.abs() <= panel_tol.target(total) {
            quiet += 1;
            if quiet == 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
    }
    Err(numerical(
        format!("semi-infinite quadrature from {a}: tail not negligible after {MAX_TAIL_PANELS} panels"),
        total,
    ))
}

/// Integrates `f` over `[a, b]` to within `tol` for smooth integrands.
///
/// `b` may be `f64::INFINITY`; the range is then covered by unit-width panels
/// until two consecutive panels contribute less than the tolerance.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    try_integrate_1d(|x| Ok(f(x)), a, b, tol)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Fallible form of [`minimize_1d`].
pub fn try_minimize_1d<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(domain(format!("minimization bracket [{lo}, {hi}] is empty or non-finite")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut iter = 0;
    while b - a > tol.abs {
        if iter >= tol.max_iter {
            let best = if f1 <= f2 { f1 } else { f2 };
            return Err(numerical(
                format!("golden-section search on [{lo}, {hi}] hit max_iter"),
                best,
            ));
        }
        iter += 1;
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Golden-section search for the minimum of `f` on `[lo, hi]`.
///
/// Assumes `f` is unimodal on the bracket; returns `(argmin, min)` with the
/// argmin located to within `tol.abs`.
pub fn minimize_1d<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    try_minimize_1d(|x| Ok(f(x)), lo, hi, tol)
}

/// Root of `h` on `[lo, hi]` by bisection; `h(lo)` and `h(hi)` must differ in sign.
///
/// Stops once `|h(x)| <= tol.abs` or the bracket collapses to adjacent floats.
pub fn bisect<F>(h: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut ha, hb) = (h(a), h(b));
    if ha == 0.0 {
        return Ok(a);
    }
    if hb == 0.0 {
        return Ok(b);
    }
    if ha.signum() == hb.signum() || ha.is_nan() || hb.is_nan() {
        return Err(domain(format!("bisection bracket [{a}, {b}] has no sign change")));
    }
    let mut best = (f64::INFINITY, a);
    for _ in 0..tol.max_iter.max(200) {
        let mid = 0.5 * (a + b);
        let hm = h(mid);
        if hm.abs() < best.0 {
            best = (hm.abs(), mid);
        }
        if hm.abs() <= tol.abs || mid <= a || mid >= b {
            return Ok(mid);
        }
        if hm.signum() == ha.signum() {
            a = mid;
            ha = hm;
        } else {
            b = mid;
        }
    }
    Err(numerical(format!("bisection on [{lo}, {hi}]"), best.1))
}

/// Solves `x = g(x)` starting from `x0`.
///
/// Plain iteration is tried first; it converges when `g` is a contraction near
/// the fixed point. If the residual `|x - g(x)|` stops shrinking (oscillation
/// or divergence) the solver brackets a sign change of `x - g(x)` around `x0`
/// and bisects. The returned `x` satisfies `|x - g(x)| <= tol.abs`.
pub fn fixed_point<F>(g: F, x0: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !x0.is_finite() {
        return Err(domain(format!("fixed-point start {x0} is not finite")));
    }
    let mut x = x0;
    let mut last_residual = f64::INFINITY;
    let mut stalls = 0;
    for _ in 0..tol.max_iter {
        let gx = g(x);
        let residual = (x - gx).abs();
        if !residual.is_finite() {
            break;
        }
        if residual <= tol.abs {
            return Ok(x);
        }
        if residual >= last_residual {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        }
        last_residual = residual;
        x = gx;
    }

    let h = |y: f64| y - g(y);
    let mut step = x0.abs().max(1.0) * 0.5;
    for _ in 0..64 {
        let (lo, hi) = (x0 - step, x0 + step);
        let (hl, hh) = (h(lo), h(hi));
        if hl.is_finite() && hh.is_finite() && hl.signum() != hh.signum() {
            let root = bisect(h, lo, hi, tol)?;
            let residual = h(root).abs();
            return if residual <= tol.abs {
                Ok(root)
            } else {
                Err(numerical("fixed point: residual above tolerance at bracketed root", root))
            };
        }
        step *= 2.0;
    }
    Err(Error::NumericalFailure {
        context: "fixed point: iteration failed and no sign change of x - g(x) found".into(),
        best_estimate: x,
    })
}

//! Wing asymptotics: the ψ slope map, moment-formula slopes, sharp
//! implied-vol expansions with and without the ½·log log correction, the
//! infinite-moment leading terms, and the weight-function machinery
//! (decay constants, growth/admissibility diagnostics, and the piecewise
//! counterexample weight whose integral condition fails).
//!
//! Every formula also exists in a `_from_logs` variant taking `ln K` and
//! `ln(1/C̃)` directly: the oracle models produce wing prices far below the
//! `f64` underflow threshold, and only their logarithms are representable.

use crate::curve::{fit_line, GeometricGrid, PricingCurve, Side};
use crate::numerics::{log1m_exp, log_sum_exp};
use crate::quad::log_integrate;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymError {
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("grid too short: {0}")]
    GridTooShort(String),
    #[error("curve has the wrong side: expected {expected}")]
    WrongSide { expected: Side },
    #[error("weight function fails the growth condition w(y)/log y -> inf")]
    GrowthCheckFailed,
}

/// ψ(u) = 2 − 4(√(u²+u) − u), the map from moment index to squared wing slope.
///
/// Evaluated as `2 − 4/(1 + √(1 + 1/u))` so that no cancellation occurs for
/// large `u`; ψ(0) = 2 exactly and ψ(∞) = 0.
pub fn psi(u: f64) -> Result<f64, AsymError> {
    if u.is_nan() || u < 0.0 {
        return Err(AsymError::DomainError(format!("psi needs u >= 0, got {u}")));
    }
    if u == 0.0 {
        return Ok(2.0);
    }
    Ok(2.0 - 4.0 / (1.0 + (1.0 + 1.0 / u).sqrt()))
}

/// Right-wing slope of `T·I²` against `log K`: ψ(p̃)/T.
pub fn lee_right_slope(p_tilde: f64, maturity: f64) -> Result<f64, AsymError> {
    if !(maturity > 0.0) {
        return Err(AsymError::DomainError(format!("maturity must be > 0, got {maturity}")));
    }
    Ok(psi(p_tilde)? / maturity)
}

/// Left-wing slope of `T·I²` against `log(1/K)`: ψ(q̃)/T.
pub fn lee_left_slope(q_tilde: f64, maturity: f64) -> Result<f64, AsymError> {
    lee_right_slope(q_tilde, maturity)
}

/// One evaluated wing expansion: the main term and the magnitude of the
/// error term of the theorem that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingExpansion {
    pub main_term: f64,
    pub correction_included: bool,
    pub error_scale: f64,
}

/// Right-wing sharp expansion from `ln K` and `L = ln(1/C̃(K))`.
///
/// With the correction the main term is
/// `√(2/T)·[√(ln K + L − ½ ln L) − √(L − ½ ln L)]`; without it the ½·ln L
/// terms are dropped. The difference of square roots is evaluated through its
/// rationalized form, which keeps full precision when `ln K ≪ L`.
pub fn sharp_iv_right_from_logs(
    log_k: f64,
    log_inv_c: f64,
    maturity: f64,
    with_loglog: bool,
) -> Result<WingExpansion, AsymError> {
    if !(maturity > 0.0) {
        return Err(AsymError::DomainError("maturity must be > 0".into()));
    }
    if !(log_k > 0.0) {
        return Err(AsymError::DomainError(format!("needs K > 1, got ln K = {log_k}")));
    }
    if !(log_inv_c > 0.0) {
        return Err(AsymError::DomainError(format!(
            "needs 0 < C̃ < 1, got ln(1/C̃) = {log_inv_c}"
        )));
    }
    let l = log_inv_c;
    let shift = if with_loglog {
        if l <= 1.0 {
            return Err(AsymError::DomainError(format!(
                "log log correction needs ln(1/C̃) > 1, got {l}"
            )));
        }
        0.5 * l.ln()
    } else {
        0.0
    };
    let r_far = log_k + l - shift;
    let r_near = l - shift;
    let main = (2.0 / maturity).sqrt() * log_k / (r_far.sqrt() + r_near.sqrt());
    let error_scale = if with_loglog {
        1.0 / l.sqrt()
    } else {
        l.ln().abs() / l.sqrt()
    };
    Ok(WingExpansion { main_term: main, correction_included: with_loglog, error_scale })
}

/// Right-wing sharp expansion from plain values.
pub fn sharp_iv_right(
    strike: f64,
    c_tilde: f64,
    maturity: f64,
    with_loglog: bool,
) -> Result<WingExpansion, AsymError> {
    if !(c_tilde > 0.0) {
        return Err(AsymError::DomainError("approximating call value must be positive".into()));
    }
    sharp_iv_right_from_logs(strike.ln(), -c_tilde.ln(), maturity, with_loglog)
}

/// Left-wing sharp expansion from `ln(1/K)` and `L = ln(K/P̃(K))`.
pub fn sharp_iv_left_from_logs(
    log_inv_k: f64,
    log_k_over_p: f64,
    maturity: f64,
    with_loglog: bool,
) -> Result<WingExpansion, AsymError> {
    // identical algebra with K ↔ 1/K and C̃ ↔ P̃/K
    sharp_iv_right_from_logs(log_inv_k, log_k_over_p, maturity, with_loglog)
}

/// Left-wing sharp expansion from plain values.
pub fn sharp_iv_left(
    strike: f64,
    p_tilde_val: f64,
    maturity: f64,
    with_loglog: bool,
) -> Result<WingExpansion, AsymError> {
    if !(p_tilde_val > 0.0 && p_tilde_val < strike) {
        return Err(AsymError::DomainError("needs 0 < P̃(K) < K".into()));
    }
    sharp_iv_left_from_logs(-strike.ln(), (strike / p_tilde_val).ln(), maturity, with_loglog)
}

fn infinite_moment_from_logs(
    log_m: f64,
    log_inv_val: f64,
    maturity: f64,
) -> Result<WingExpansion, AsymError> {
    if !(maturity > 0.0) {
        return Err(AsymError::DomainError("maturity must be > 0".into()));
    }
    if !(log_inv_val > 0.0) {
        return Err(AsymError::DomainError(
            "approximating value must lie strictly below 1 (in moneyness units)".into(),
        ));
    }
    let l = log_inv_val;
    let main = log_m / ((2.0 * maturity).sqrt() * l.sqrt());
    // the two error terms: (ln K)²/L^{3/2} and 1/√L; whichever dominates is
    // decided by (ln K)² against L
    let e1 = log_m * log_m / (l * l.sqrt());
    let e2 = 1.0 / l.sqrt();
    Ok(WingExpansion { main_term: main, correction_included: false, error_scale: e1.max(e2) })
}

/// Infinite-moment right-wing leading term `ln K / √(2T · ln(1/C̃))`.
pub fn iv_infinite_moment_right_from_logs(
    log_k: f64,
    log_inv_c: f64,
    maturity: f64,
) -> Result<WingExpansion, AsymError> {
    infinite_moment_from_logs(log_k, log_inv_c, maturity)
}

pub fn iv_infinite_moment_right(
    strike: f64,
    c_tilde: f64,
    maturity: f64,
) -> Result<WingExpansion, AsymError> {
    if !(c_tilde > 0.0) {
        return Err(AsymError::DomainError("approximating call value must be positive".into()));
    }
    iv_infinite_moment_right_from_logs(strike.ln(), -c_tilde.ln(), maturity)
}

/// Infinite-moment left-wing leading term `ln(1/K) / √(2T · ln(K/P̃))`.
pub fn iv_infinite_moment_left_from_logs(
    log_inv_k: f64,
    log_k_over_p: f64,
    maturity: f64,
) -> Result<WingExpansion, AsymError> {
    infinite_moment_from_logs(log_inv_k, log_k_over_p, maturity)
}

pub fn iv_infinite_moment_left(
    strike: f64,
    p_tilde_val: f64,
    maturity: f64,
) -> Result<WingExpansion, AsymError> {
    if !(p_tilde_val > 0.0 && p_tilde_val < strike) {
        return Err(AsymError::DomainError("needs 0 < P̃(K) < K".into()));
    }
    iv_infinite_moment_left_from_logs(-strike.ln(), (strike / p_tilde_val).ln(), maturity)
}

/// A positive increasing weight function with an optional derivative and a
/// domain floor below which it is not evaluated.
#[derive(Clone)]
pub struct WFunction {
    name: String,
    floor: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    deriv: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for WFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WFunction")
            .field("name", &self.name)
            .field("floor", &self.floor)
            .field("has_derivative", &self.deriv.is_some())
            .finish()
    }
}

impl WFunction {
    pub fn new<F>(name: impl Into<String>, floor: f64, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), floor, eval: Arc::new(eval), deriv: None }
    }

    pub fn with_derivative<F>(mut self, deriv: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    /// w(y) = yᵃ, a > 0.
    pub fn power(a: f64) -> Self {
        Self::new(format!("y^{a}"), 0.0, move |y: f64| y.powf(a))
            .with_derivative(move |y: f64| a * y.powf(a - 1.0))
    }

    /// w(y) = (ln y)ᵃ on y ≥ 1 (increasing there).
    pub fn log_power(a: f64) -> Self {
        Self::new(format!("(log y)^{a}"), 1.0, move |y: f64| y.ln().powf(a))
            .with_derivative(move |y: f64| a * y.ln().powf(a - 1.0) / y)
    }

    /// w(y) = c·ln y — grows too slowly for the weighted machinery; used as
    /// the negative example in the growth check.
    pub fn log_multiple(c: f64) -> Self {
        Self::new(format!("{c} log y"), 1.0, move |y: f64| c * y.ln())
            .with_derivative(move |y: f64| c / y)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.eval)(y)
    }

    /// Analytic derivative if present, else a central finite difference.
    pub fn deriv(&self, y: f64) -> f64 {
        match &self.deriv {
            Some(d) => d(y),
            None => {
                let h = y.abs().max(1.0) * 1e-6;
                ((self.eval)(y + h) - (self.eval)(y - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }
}

/// Λ(K) = I(K)·√w(K)/log K, the wing diagnostic when all moments are finite.
pub fn piterbarg_lambda(strike: f64, iv: f64, w: &WFunction) -> Result<f64, AsymError> {
    if !(strike > 1.0) {
        return Err(AsymError::DomainError(format!("needs K > 1, got {strike}")));
    }
    if !(iv >= 0.0) {
        return Err(AsymError::DomainError(format!("needs iv >= 0, got {iv}")));
    }
    Ok(iv * w.eval(strike).sqrt() / strike.ln())
}

/// Predicted limsup of Λ from the weighted moment constant: `1/√(2T·p̂_w)`.
pub fn piterbarg_gamma_predicted(p_hat_w: f64, maturity: f64) -> Result<f64, AsymError> {
    if !(p_hat_w > 0.0) {
        return Err(AsymError::DomainError(format!("needs p̂_w > 0, got {p_hat_w}")));
    }
    if !(maturity > 0.0) {
        return Err(AsymError::DomainError("maturity must be > 0".into()));
    }
    Ok(1.0 / (2.0 * maturity * p_hat_w).sqrt())
}

/// Growth diagnostic for a weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthCheck {
    pub passes: bool,
    pub monotone_beyond_midpoint: bool,
    pub ratio_at_end: f64,
}

/// Checks `w(y)/log y → ∞` on the grid: the ratio must increase strictly
/// beyond the grid midpoint and exceed `threshold` at the grid end.
pub fn check_w_growth(w: &WFunction, grid: &GeometricGrid, threshold: f64) -> GrowthCheck {
    let pts: Vec<f64> = grid.points().into_iter().filter(|&y| y > w.floor().max(1.0)).collect();
    let ratios: Vec<f64> = pts.iter().map(|&y| w.eval(y) / y.ln()).collect();
    let mid = ratios.len() / 2;
    let monotone = ratios.windows(2).skip(mid.saturating_sub(1)).all(|p| p[1] > p[0] * (1.0 + 1e-12));
    let ratio_at_end = ratios.last().copied().unwrap_or(f64::NAN);
    GrowthCheck { passes: monotone && ratio_at_end > threshold, monotone_beyond_midpoint: monotone, ratio_at_end }
}

/// One admissibility condition: whether it holds from some grid index on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionFlag {
    pub holds: bool,
    pub first_index: Option<usize>,
}

/// Report of the three weighted-admissibility inequalities at tolerance ε:
/// `∫₀^x e^w ≥ e^{(1−ε)w(x)}`, `w′ ≤ e^{εw}`, `w′ ≥ e^{−εw}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub epsilon: f64,
    pub integral_condition: ConditionFlag,
    pub derivative_upper: ConditionFlag,
    pub derivative_lower: ConditionFlag,
}

fn locate_threshold(ok: &[bool]) -> ConditionFlag {
    // smallest index from which the condition holds at every later point
    let mut first = None;
    for i in (0..ok.len()).rev() {
        if ok[i] {
            first = Some(i);
        } else {
            break;
        }
    }
    match first {
        Some(i) if i <= 3 * ok.len() / 4 => ConditionFlag { holds: true, first_index: Some(i) },
        _ => ConditionFlag { holds: false, first_index: first },
    }
}

/// Evaluates the three admissibility inequalities pointwise on the grid.
/// The integral is accumulated in log space, so `e^{w}` never overflows.
pub fn check_w_admissible(w: &WFunction, epsilon: f64, grid: &GeometricGrid) -> AdmissibilityReport {
    let lo = w.floor().max(1e-12);
    let pts: Vec<f64> = grid.points().into_iter().filter(|&y| y > lo).collect();
    let logw = |y: f64| w.eval(y);
    let mut log_int = f64::NEG_INFINITY;
    let mut prev = lo;
    let mut ints = Vec::with_capacity(pts.len());
    for &y in &pts {
        let piece = log_integrate(logw, prev, y, 1e-10);
        log_int = crate::numerics::log_add_exp(log_int, piece);
        ints.push(log_int);
        prev = y;
    }
    let integral_ok: Vec<bool> = pts
        .iter()
        .zip(&ints)
        .map(|(&y, &li)| li >= (1.0 - epsilon) * w.eval(y))
        .collect();
    let upper_ok: Vec<bool> = pts.iter().map(|&y| w.deriv(y).ln() <= epsilon * w.eval(y)).collect();
    let lower_ok: Vec<bool> = pts
        .iter()
        .map(|&y| {
            let d = w.deriv(y);
            d > 0.0 && d.ln() >= -epsilon * w.eval(y)
        })
        .collect();
    AdmissibilityReport {
        epsilon,
        integral_condition: locate_threshold(&integral_ok),
        derivative_upper: locate_threshold(&upper_ok),
        derivative_lower: locate_threshold(&lower_ok),
    }
}

/// Estimated decay constants of a call curve against a weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct PiterbargConstants {
    /// liminf of log(1/C(K))/w(K), estimated as the windowed tail minimum.
    pub l_w: f64,
    /// decay-fit version of the same constant (regression of log(1/C) on w).
    pub r_star_w: f64,
    /// weighted-moment constant from the truncated-integral growth diagnostic.
    pub p_hat_w: f64,
    /// density-based constant; only estimable when a density oracle exists.
    pub p_tilde_w: Option<f64>,
    /// whether the l_w ratio sequence was monotone over the tail window.
    pub l_w_monotone: bool,
    pub grid_decades: f64,
}

/// Estimates `l_w`, `r*_w`, and `p̂_w` for a call pricing curve.
///
/// `l_w` is the running minimum of `log(1/C(K))/w(K)` over the last quarter
/// of the grid. `r*_w` is the slope of `log(1/C)` regressed on `w` over the
/// same window. `p̂_w` is found by bisecting the candidate order `p` of the
/// truncated integral `∫ C(y)·p·w′(y)·e^{p·w(y)} dy` (the integration-by-parts
/// form of the weighted tail integral): the integral over the grid's last
/// decade exceeding the previous decade's flags divergence.
pub fn estimate_piterbarg_constants(
    curve: &PricingCurve,
    w: &WFunction,
    grid: &GeometricGrid,
) -> Result<PiterbargConstants, AsymError> {
    if curve.side() != Side::Call {
        return Err(AsymError::WrongSide { expected: Side::Call });
    }
    if grid.decades() < 3.0 || grid.len() < 12 {
        return Err(AsymError::GridTooShort(format!(
            "need >= 3 decades and >= 12 points, got {:.2} decades, {} points",
            grid.decades(),
            grid.len()
        )));
    }
    let growth = check_w_growth(w, grid, 2.0);
    if !growth.passes {
        return Err(AsymError::GrowthCheckFailed);
    }

    let pts = grid.points();
    let tail_start = 3 * pts.len() / 4;
    let tail = &pts[tail_start..];
    let ratios: Vec<f64> = tail.iter().map(|&k| -curve.log_price(k) / w.eval(k)).collect();
    let l_w = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let l_w_monotone = ratios.windows(2).all(|p| p[1] >= p[0]) || ratios.windows(2).all(|p| p[1] <= p[0]);

    let ws: Vec<f64> = tail.iter().map(|&k| w.eval(k)).collect();
    let negs: Vec<f64> = tail.iter().map(|&k| -curve.log_price(k)).collect();
    let (r_star_w, _) = fit_line(&ws, &negs);

    let k_hi = *pts.last().unwrap();
    let diverges = |p: f64| -> bool {
        if p <= 0.0 {
            return false;
        }
        let log_f = |y: f64| curve.log_price(y) + (p * w.deriv(y)).ln() + p * w.eval(y);
        let last = log_integrate(log_f, k_hi / 10.0, k_hi, 1e-8);
        let prev = log_integrate(log_f, k_hi / 100.0, k_hi / 10.0, 1e-8);
        last > prev
    };
    let mut hi = l_w.max(1e-6);
    let mut lo = 0.0;
    let mut guard = 0;
    while !diverges(hi) {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            break;
        }
    }
    while hi - lo > 5e-3 * hi.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        if diverges(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p_hat_w = 0.5 * (lo + hi);

    Ok(PiterbargConstants {
        l_w,
        r_star_w,
        p_hat_w,
        p_tilde_w: None,
        l_w_monotone,
        grid_decades: grid.decades(),
    })
}

/// Density-based weighted moment constant `p̃_w`, available only when a
/// density oracle exists: bisects the growth of `∫ e^{p·w(u)} D(u) du`.
pub fn estimate_p_tilde_w<F>(log_density: F, w: &WFunction, grid: &GeometricGrid) -> f64
where
    F: Fn(f64) -> f64,
{
    let k_hi = grid.points().last().copied().unwrap();
    let diverges = |p: f64| -> bool {
        let log_f = |u: f64| p * w.eval(u) + log_density(u);
        let last = log_integrate(&log_f, k_hi / 10.0, k_hi, 1e-8);
        let prev = log_integrate(&log_f, k_hi / 100.0, k_hi / 10.0, 1e-8);
        last > prev
    };
    let mut lo = 0.0;
    let mut hi = 1e-3;
    let mut guard = 0;
    while !diverges(hi) {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 80 {
            break;
        }
    }
    while hi - lo > 5e-3 * hi.max(1e-12) {
        let mid = 0.5 * (lo + hi);
        if diverges(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The piecewise-linear counterexample weight: plateaus `a_n` on
/// `[n, n+1−δ_n]` with steep ramps to `a_{n+1}`, where
/// `a_{n+1} = 3a_n + 4·ln(2n)` and `δ_n = e^{-a_{n+1}}`.
///
/// The levels grow like 3ⁿ, so `e^{a_n}` overflows almost immediately and
/// `δ_n` underflows; every quantity of interest is therefore carried in log
/// form: `ln δ_n = −a_{n+1}`, checkpoint values `w(n+1−δ_n/2) = (a_n+a_{n+1})/2`,
/// and the running integral `ln ∫₀^x e^w` assembled by log-sum-exp.
#[derive(Debug, Clone, PartialEq)]
pub struct PathologicalW {
    levels: Vec<f64>,
}

impl PathologicalW {
    /// Builds levels `a_0 .. a_{n_max+1}`. The recurrence starts at `a_0 = 1`;
    /// it only determines `a_{n+1}` for n ≥ 1, and `a_1` here extends the
    /// same pattern with the n = 1 coefficient: `a_1 = 3a_0 + 4·ln 2`.
    pub fn new(n_max: usize) -> Result<Self, AsymError> {
        if n_max < 2 {
            return Err(AsymError::DomainError(format!("n_max must be >= 2, got {n_max}")));
        }
        let mut levels = Vec::with_capacity(n_max + 2);
        levels.push(1.0);
        levels.push(3.0 + 4.0 * 2.0_f64.ln());
        for n in 1..=n_max {
            let next = 3.0 * levels[n] + 4.0 * (2.0 * n as f64).ln();
            levels.push(next);
        }
        let w = Self { levels };
        // the recurrence is equivalent to 2n·e^{a_n} = e^{(a_n+a_{n+1})/4};
        // confirmed here in log form for every level
        for n in 1..=n_max {
            debug_assert!(w.recurrence_identity_residual(n).abs() < 1e-9 * w.level(n));
        }
        Ok(w)
    }

    pub fn n_max(&self) -> usize {
        self.levels.len() - 2
    }

    /// Plateau level `a_n`.
    pub fn level(&self, n: usize) -> f64 {
        self.levels[n]
    }

    /// `ln δ_n = −a_{n+1}`.
    pub fn log_delta(&self, n: usize) -> f64 {
        -self.levels[n + 1]
    }

    /// `(a_n + a_{n+1})/4 − (a_n + ln 2n)`; zero by the recurrence for n ≥ 1.
    pub fn recurrence_identity_residual(&self, n: usize) -> f64 {
        (self.levels[n] + self.levels[n + 1]) / 4.0 - (self.levels[n] + (2.0 * n as f64).ln())
    }

    /// `w` at the designated checkpoint `x_n = n+1−δ_n/2`, which is
    /// `(a_n + a_{n+1})/2` exactly (midpoint of the ramp).
    pub fn checkpoint_w(&self, n: usize) -> f64 {
        0.5 * (self.levels[n] + self.levels[n + 1])
    }

    /// `ln ∫₀^{x_n} e^{w(u)} du` at the checkpoint, assembled exactly from the
    /// plateau and ramp pieces in log space.
    pub fn log_integral_at_checkpoint(&self, n: usize) -> f64 {
        assert!(n >= 1 && n <= self.n_max());
        let a = &self.levels;
        let mut terms = Vec::with_capacity(2 * n + 2);
        for k in 0..=n {
            // plateau [k, k+1-δ_k]: (1-δ_k)·e^{a_k}
            let delta_k = self.log_delta(k).exp();
            terms.push(a[k] + (-delta_k).ln_1p());
            let gap = a[k + 1] - a[k];
            if k < n {
                // full ramp: δ_k (e^{a_{k+1}} - e^{a_k})/(a_{k+1}-a_k)
                terms.push(log1m_exp(gap) - gap.ln());
            } else {
                // half ramp up to x_n: δ_n (e^{(a_n+a_{n+1})/2} - e^{a_n})/(a_{n+1}-a_n)
                terms.push(0.5 * (a[n] - a[n + 1]) + log1m_exp(0.5 * gap) - gap.ln());
            }
        }
        log_sum_exp(&terms)
    }

    /// Whether `∫₀^{x} e^w ≤ e^{w(x)/2}` at the checkpoint — i.e. the
    /// admissibility integral condition fails there (it demands ≥ e^{(1−ε)w}
    /// for every ε < 1, and ε = ½ already breaks).
    pub fn integral_condition_fails(&self, n: usize) -> bool {
        self.log_integral_at_checkpoint(n) <= 0.5 * self.checkpoint_w(n)
    }

    /// Double-precision evaluator. The ramps are narrower than one ulp for
    /// n ≥ 4, so in `f64` the function is the plateau ladder; the log-domain
    /// accessors above are the faithful interface.
    pub fn to_wfunction(&self) -> WFunction {
        let levels = self.levels.clone();
        let n_max = self.n_max();
        WFunction::new("pathological", 0.0, move |u: f64| {
            if u <= 0.0 {
                return levels[0];
            }
            let k = (u.floor() as usize).min(n_max);
            let delta = (-levels[k + 1]).exp();
            let ramp_start = (k + 1) as f64 - delta;
            if u <= ramp_start || delta == 0.0 {
                levels[k]
            } else {
                levels[k] + (levels[k + 1] - levels[k]) * (u - ramp_start) / delta
            }
        })
    }
}

/// Builds the counterexample weight with `n_max` plateau levels.
pub fn pathological_w(n_max: usize) -> Result<PathologicalW, AsymError> {
    PathologicalW::new(n_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{GeometricGrid, PricingCurve, Side};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn psi_reference_points() {
        assert_eq!(psi(0.0).unwrap(), 2.0);
        assert_relative_eq!(psi(1.0).unwrap(), 6.0 - 4.0 * 2.0_f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(psi(2.0).unwrap(), 0.202_041_028_867_287_6, max_relative = 1e-14);
        assert_eq!(psi(f64::INFINITY).unwrap(), 0.0);
        assert!(psi(-0.1).is_err());
        assert!(psi(f64::NAN).is_err());
    }

    #[test]
    fn psi_identity_on_log_grid() {
        // |ψ(u) − 2(√(1+u) − √u)²| ≤ 1e-14 across twelve decades
        for i in 0..=1200 {
            let u = 10f64.powf(-6.0 + i as f64 * 0.01);
            let direct = {
                let d = (1.0 + u).sqrt() - u.sqrt();
                2.0 * d * d
            };
            assert_abs_diff_eq!(psi(u).unwrap(), direct, epsilon = 1e-14);
        }
    }

    #[test]
    fn lee_slopes() {
        assert_relative_eq!(lee_right_slope(0.0, 1.0).unwrap(), 2.0);
        assert_eq!(lee_right_slope(f64::INFINITY, 1.0).unwrap(), 0.0);
        assert_relative_eq!(
            lee_right_slope(1.0, 2.0).unwrap(),
            (6.0 - 4.0 * 2.0_f64.sqrt()) / 2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(lee_left_slope(0.0, 1.0).unwrap(), 2.0);
        assert_eq!(lee_left_slope(f64::INFINITY, 4.0).unwrap(), 0.0);
        assert_relative_eq!(
            lee_left_slope(1.0, 2.0).unwrap(),
            lee_right_slope(1.0, 2.0).unwrap()
        );
    }

    #[test]
    fn sharp_right_worked_example() {
        // K = e^10, C̃ = e^-20, T = 1, with the ½ log log correction
        let e = sharp_iv_right_from_logs(10.0, 20.0, 1.0, true).unwrap();
        assert_relative_eq!(e.main_term, 1.467_003_741_933_055_8, max_relative = 1e-13);
        assert!(e.correction_included);
        assert_relative_eq!(e.error_scale, 1.0 / 20.0_f64.sqrt());
        // plain-value entry point agrees
        let e2 = sharp_iv_right(10.0_f64.exp(), (-20.0_f64).exp(), 1.0, true).unwrap();
        assert_relative_eq!(e2.main_term, e.main_term, max_relative = 1e-12);
    }

    #[test]
    fn sharp_power_law_collapses_to_lee_form() {
        // C̃ = K^{-p}, no log log: main term is exactly √(ψ(p)·ln K / T)
        for p in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 50.0] {
            for log_k in [5.0, 20.0, 80.0] {
                for t in [0.5, 1.0, 3.0] {
                    let e = sharp_iv_right_from_logs(log_k, p * log_k, t, false).unwrap();
                    let want = (psi(p).unwrap() * log_k / t).sqrt();
                    assert_relative_eq!(e.main_term, want, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn sharp_loglog_domain_guard() {
        assert!(matches!(
            sharp_iv_right_from_logs(5.0, 0.9, 1.0, true),
            Err(AsymError::DomainError(_))
        ));
        // without the correction the same point is fine
        assert!(sharp_iv_right_from_logs(5.0, 0.9, 1.0, false).is_ok());
        assert!(sharp_iv_right(0.5, 0.1, 1.0, false).is_err()); // K < 1
    }

    #[test]
    fn sharp_left_mirrors_right() {
        // P̃(K) = K^{1+q}, no log log → √(ψ(q) ln(1/K)/T)
        for q in [0.5, 1.0, 2.0] {
            let log_inv_k = 12.0;
            let e = sharp_iv_left_from_logs(log_inv_k, q * log_inv_k, 1.0, false).unwrap();
            assert_relative_eq!(
                e.main_term,
                (psi(q).unwrap() * log_inv_k).sqrt(),
                max_relative = 1e-12
            );
        }
        // K = e^-10, P̃ = K e^-20 gives the same number as the right-wing example
        let e = sharp_iv_left((-10.0_f64).exp(), (-10.0_f64).exp() * (-20.0_f64).exp(), 1.0, true)
            .unwrap();
        assert_relative_eq!(e.main_term, 1.467_003_741_933_055_8, max_relative = 1e-12);
    }

    #[test]
    fn infinite_moment_leading_terms() {
        // C̃(K) = e^{-(ln K)^3}, T = 1/2 → main term (ln K)^{-1/2}
        for log_k in [10.0, 40.0, 100.0] {
            let e = iv_infinite_moment_right_from_logs(log_k, log_k.powi(3), 0.5).unwrap();
            assert_relative_eq!(e.main_term, 1.0 / log_k.sqrt(), max_relative = 1e-13);
        }
        // T-scaling: explicit factor T^{-1/2}
        let a = iv_infinite_moment_right_from_logs(10.0, 500.0, 1.0).unwrap().main_term;
        let b = iv_infinite_moment_right_from_logs(10.0, 500.0, 4.0).unwrap().main_term;
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-13);
        // left mirror
        let l = iv_infinite_moment_left_from_logs(10.0, 500.0, 1.0).unwrap();
        assert_relative_eq!(l.main_term, a, max_relative = 1e-14);
        assert!(iv_infinite_moment_right(10.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn infinite_moment_agrees_with_sharp_in_its_regime() {
        // along C̃ = e^{-β (ln K)²} the two routes approach each other
        let beta = 1.0;
        for (log_k, tol) in [(100.0, 5e-3), (1000.0, 1e-3)] {
            let l = beta * log_k * log_k;
            let a = iv_infinite_moment_right_from_logs(log_k, l, 1.0).unwrap().main_term;
            let b = sharp_iv_right_from_logs(log_k, l, 1.0, true).unwrap().main_term;
            assert_relative_eq!(a, b, max_relative = tol);
        }
    }

    #[test]
    fn lambda_examples() {
        let w = WFunction::log_power(2.0);
        // w = (log y)² makes Λ collapse to the iv itself
        assert_relative_eq!(piterbarg_lambda(50.0, 0.31, &w).unwrap(), 0.31, max_relative = 1e-14);
        assert_eq!(piterbarg_lambda(50.0, 0.0, &w).unwrap(), 0.0);
        assert!(piterbarg_lambda(0.9, 0.2, &w).is_err());
        assert!(piterbarg_lambda(50.0, -0.1, &w).is_err());
    }

    #[test]
    fn gamma_predicted() {
        assert_relative_eq!(piterbarg_gamma_predicted(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(piterbarg_gamma_predicted(f64::INFINITY, 1.0).unwrap(), 0.0);
        assert!(piterbarg_gamma_predicted(0.0, 1.0).is_err());
        // CEV algebra: p̂ = 1/(2Tσ²(1-ρ)²) → γ = σ(1-ρ)
        let (sigma, rho, t) = (0.25, 0.5, 1.0);
        let p_hat = 1.0 / (2.0 * t * sigma * sigma * (1.0 - rho) * (1.0 - rho));
        assert_relative_eq!(
            piterbarg_gamma_predicted(p_hat, t).unwrap(),
            sigma * (1.0 - rho),
            max_relative = 1e-14
        );
    }

    #[test]
    fn growth_check_examples() {
        let grid = GeometricGrid::new(10.0, 1e12, 60).unwrap();
        assert!(check_w_growth(&WFunction::log_power(2.0), &grid, 10.0).passes);
        assert!(!check_w_growth(&WFunction::log_multiple(2.0), &grid, 10.0).passes);
        assert!(check_w_growth(&WFunction::power(0.3), &grid, 10.0).passes);
    }

    #[test]
    fn admissibility_examples() {
        let grid = GeometricGrid::new(1.0, 1e4, 40).unwrap();
        // w(y) = y: all three hold for any ε
        let r = check_w_admissible(&WFunction::power(1.0), 0.3, &grid);
        assert!(r.integral_condition.holds && r.derivative_upper.holds && r.derivative_lower.holds);
        // w(y) = (log y)²: derivative upper bound holds (w' → 0)
        let grid2 = GeometricGrid::new(2.0, 1e8, 40).unwrap();
        let r = check_w_admissible(&WFunction::log_power(2.0), 0.3, &grid2);
        assert!(r.derivative_upper.holds);
        assert!(r.integral_condition.holds);
    }

    #[test]
    fn pathological_construction() {
        let w = pathological_w(10).unwrap();
        assert_eq!(w.level(0), 1.0);
        assert_relative_eq!(w.level(1), 3.0 + 4.0 * 2.0_f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(w.level(2), 20.090_354_888_959_125, max_relative = 1e-13);
        assert_relative_eq!(w.level(7), 5_637.056_176_912_096_5, max_relative = 1e-13);
        for n in 1..=9 {
            assert_abs_diff_eq!(w.recurrence_identity_residual(n), 0.0, epsilon = 1e-10);
        }
        // the integral condition fails on the designated set for every level
        for n in 2..=10 {
            assert!(w.integral_condition_fails(n), "expected failure at level {n}");
        }
        // spot value against the exact piecewise assembly
        assert_relative_eq!(w.log_integral_at_checkpoint(2), 20.090_355_499_7, max_relative = 1e-9);
        assert_relative_eq!(w.checkpoint_w(2), 0.5 * (w.level(2) + w.level(3)));
        assert!(pathological_w(1).is_err());
        // the f64 evaluator exposes the plateau ladder
        let wf = w.to_wfunction();
        assert_eq!(wf.eval(2.5), w.level(2));
        assert_eq!(wf.eval(7.1), w.level(7));
    }

    #[test]
    fn piterbarg_constants_on_analytic_curve() {
        // C(K) = e^{-c·w(K)} with w = y^0.7: all three estimates within 1%
        let c = 3.0;
        let w = WFunction::power(0.7);
        let curve = PricingCurve::from_log_fn(Side::Call, move |k: f64| -c * k.powf(0.7));
        let grid = GeometricGrid::new(10.0, 1e5, 48).unwrap();
        let est = estimate_piterbarg_constants(&curve, &w, &grid).unwrap();
        assert_relative_eq!(est.l_w, c, max_relative = 1e-10);
        assert_relative_eq!(est.r_star_w, c, max_relative = 1e-8);
        assert_relative_eq!(est.p_hat_w, c, max_relative = 0.01);
        assert!(est.l_w_monotone);
        // constant-ratio example: C = e^{-c w} has l_w = c exactly
        let curve2 = PricingCurve::from_log_fn(Side::Call, |k: f64| -2.0 * (k.ln()).powi(2));
        let est2 =
            estimate_piterbarg_constants(&curve2, &WFunction::log_power(2.0), &grid).unwrap();
        assert_relative_eq!(est2.l_w, 2.0, max_relative = 1e-10);
        assert_relative_eq!(est2.p_hat_w, 2.0, max_relative = 0.01);
    }

    #[test]
    fn piterbarg_constants_guards() {
        let curve = PricingCurve::from_log_fn(Side::Put, |k: f64| -k);
        let w = WFunction::power(1.0);
        let grid = GeometricGrid::new(10.0, 1e5, 48).unwrap();
        assert!(matches!(
            estimate_piterbarg_constants(&curve, &w, &grid),
            Err(AsymError::WrongSide { .. })
        ));
        let call = PricingCurve::from_log_fn(Side::Call, |k: f64| -k);
        let short = GeometricGrid::new(10.0, 50.0, 20).unwrap();
        assert!(matches!(
            estimate_piterbarg_constants(&call, &w, &short),
            Err(AsymError::GridTooShort(_))
        ));
        // w = 2 log y fails the growth precondition
        assert!(matches!(
            estimate_piterbarg_constants(&call, &WFunction::log_multiple(2.0), &grid),
            Err(AsymError::GrowthCheckFailed)
        ));
    }

    #[test]
    fn p_tilde_from_density() {
        // density e^{-3u} against w(u) = u: E e^{p w} finite iff p < 3
        let grid = GeometricGrid::new(1.0, 1e4, 24).unwrap();
        let p = estimate_p_tilde_w(|u| -3.0 * u, &WFunction::power(1.0), &grid);
        assert_relative_eq!(p, 3.0, max_relative = 0.01);
    }
}

//! Regular-variation diagnostics on sampled curves: index estimation,
//! weak-Pareto envelope checks, and the tail → wing-slope prediction map.
//!
//! Near-zero indices follow the reciprocal-argument convention: a function
//! `G` on `(0, c)` has index α when `G(y) ≈ g(1/y)` with `g` regularly
//! varying of index α. Concretely the estimators regress on `ln(1/y)` for
//! near-zero samples, so a density behaving like `x^{1-2ρ}` at zero reports
//! index `2ρ−1`, and the `q̃ = 1 − α` map below lands on `q̃ = 2(1−ρ)`,
//! consistent with the put wing `P(K) ≍ K^{3−2ρ}`.

use crate::asymptotics::psi;
use crate::curve::{fit_line, GeometricGrid, PricingCurve, Side};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegvarError {
    #[error("grid too short: {0}")]
    GridTooShort(String),
    #[error("sample {index} is not positive: f({x}) = {value}")]
    NonPositiveSample { index: usize, x: f64, value: f64 },
    #[error("implied moment index is negative: {0}")]
    InvalidIndex(f64),
    #[error("tail report does not certify weak Pareto behaviour")]
    NotWeakPareto,
    #[error("curve has the wrong side: expected {expected}")]
    WrongSide { expected: Side },
    #[error("unsupported tail source for this limit: {0}")]
    UnsupportedSource(String),
}

fn validate_samples(samples: &[(f64, f64)]) -> Result<(), RegvarError> {
    if samples.len() < 20 {
        return Err(RegvarError::GridTooShort(format!(
            "need at least 20 samples, got {}",
            samples.len()
        )));
    }
    let span = samples.last().unwrap().0 / samples.first().unwrap().0;
    let span = span.max(1.0 / span);
    if span.log10() < 3.0 {
        return Err(RegvarError::GridTooShort(format!(
            "need >= 3 decades of argument, got {:.2}",
            span.log10()
        )));
    }
    for (i, &(x, v)) in samples.iter().enumerate() {
        if !(v > 0.0) {
            return Err(RegvarError::NonPositiveSample { index: i, x, value: v });
        }
    }
    Ok(())
}

/// Result of a regular-variation index fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RvFit {
    /// least-squares slope of `ln f` against `ln y` over the tail window
    pub index: f64,
    /// residuals `ln f − (α ln y + c)` over the tail window
    pub residuals: Vec<f64>,
    /// true when the residual log-slope has died out over the tail
    pub converged: bool,
    /// the tail-window arguments the fit used
    pub grid: Vec<f64>,
}

/// Estimates the regular-variation index from `(y, f(y))` samples on a
/// geometric grid heading to infinity.
pub fn rv_index(samples: &[(f64, f64)]) -> Result<RvFit, RegvarError> {
    validate_samples(samples)?;
    let tail_start = samples.len() / 2;
    let tail = &samples[tail_start..];
    let xs: Vec<f64> = tail.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let (index, icpt) = fit_line(&xs, &ys);
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (index * x + icpt)).collect();
    let (res_slope, _) = fit_line(&xs, &residuals);
    // residual slope of a genuinely regularly varying sample decays; a
    // non-power function keeps a live slope
    let converged = res_slope.abs() < 0.05;
    Ok(RvFit { index, residuals, converged, grid: tail.iter().map(|p| p.0).collect() })
}

/// Pointwise decay exponents and the limit-existence verdict for a call curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSlope {
    /// tail mean of τ(K) = log(1/C(K)) / log K
    pub limit: f64,
    /// oscillation of τ over the last decade
    pub oscillation: f64,
    /// set when the oscillation is below the tolerance
    pub exists: bool,
    pub tau: Vec<(f64, f64)>,
}

/// Estimates `lim (log K)^{-1} log(1/C(K))` on the grid. The limit-existence
/// flag compares the oscillation of the pointwise exponent over the grid's
/// last decade against `osc_tol` (1e-2 is the documented default).
pub fn limit_slope_right(
    curve: &PricingCurve,
    grid: &GeometricGrid,
    osc_tol: f64,
) -> Result<LimitSlope, RegvarError> {
    if curve.side() != Side::Call {
        return Err(RegvarError::WrongSide { expected: Side::Call });
    }
    let pts = grid.points();
    if pts.len() < 20 || grid.decades() < 3.0 {
        return Err(RegvarError::GridTooShort(format!(
            "need >= 20 points over >= 3 decades, got {} over {:.2}",
            pts.len(),
            grid.decades()
        )));
    }
    if pts[0] <= 1.0 {
        return Err(RegvarError::GridTooShort("grid must lie beyond K = 1".into()));
    }
    let tau: Vec<(f64, f64)> =
        pts.iter().map(|&k| (k, -curve.log_price(k) / k.ln())).collect();
    let k_hi = pts.last().unwrap();
    let last_decade: Vec<f64> =
        tau.iter().filter(|(k, _)| *k >= k_hi / 10.0).map(|p| p.1).collect();
    let hi = last_decade.iter().cloned().fold(f64::MIN, f64::max);
    let lo = last_decade.iter().cloned().fold(f64::MAX, f64::min);
    let oscillation = hi - lo;
    let limit = last_decade.iter().sum::<f64>() / last_decade.len() as f64;
    Ok(LimitSlope { limit, oscillation, exists: oscillation < osc_tol, tau })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    NearInfinity,
    NearZero,
}

/// Envelope report for a weak-Pareto-type check at a candidate index.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoTypeReport {
    pub kind: TailKind,
    pub weak: bool,
    pub index: f64,
    /// fitted log-slope of the lower envelope (α plus its drift)
    pub envelope_lower_slope: f64,
    /// fitted log-slope of the upper envelope
    pub envelope_upper_slope: f64,
}

/// Checks whether `f` is sandwiched between two regularly varying functions
/// of index `alpha`: windowed envelope lines are fitted to the residuals
/// `ln f − α·x` (x the signed log-argument for the tail in question) and the
/// weak flag is set when both envelope slopes vanish within `slope_tol`.
pub fn weak_pareto_check(
    samples: &[(f64, f64)],
    alpha: f64,
    kind: TailKind,
    slope_tol: f64,
) -> Result<ParetoTypeReport, RegvarError> {
    validate_samples(samples)?;
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(y, f)| {
            let x = match kind {
                TailKind::NearInfinity => y.ln(),
                TailKind::NearZero => -y.ln(),
            };
            (x, f.ln() - alpha * x)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = &pts[pts.len() / 2..];
    // envelope lines through per-window extremes of the residual
    let n_windows = 4.max(3.min(tail.len() / 5));
    let per = tail.len() / n_windows;
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for w in 0..n_windows {
        let seg = &tail[w * per..if w + 1 == n_windows { tail.len() } else { (w + 1) * per }];
        let cx = seg.iter().map(|p| p.0).sum::<f64>() / seg.len() as f64;
        let lo = seg.iter().map(|p| p.1).fold(f64::MAX, f64::min);
        let hi = seg.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        lows.push((cx, lo));
        highs.push((cx, hi));
    }
    let (lo_slope, _) = fit_line(
        &lows.iter().map(|p| p.0).collect::<Vec<_>>(),
        &lows.iter().map(|p| p.1).collect::<Vec<_>>(),
    );
    let (hi_slope, _) = fit_line(
        &highs.iter().map(|p| p.0).collect::<Vec<_>>(),
        &highs.iter().map(|p| p.1).collect::<Vec<_>>(),
    );
    Ok(ParetoTypeReport {
        kind,
        weak: lo_slope.abs() <= slope_tol && hi_slope.abs() <= slope_tol,
        index: alpha,
        envelope_lower_slope: alpha + lo_slope,
        envelope_upper_slope: alpha + hi_slope,
    })
}

/// What function of the stock price a tail report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSource {
    CallPrice,
    PutPrice,
    Cdf,
    CdfComplement,
    Density,
}

/// A predicted wing: the implied moment index and the IV coefficient
/// `√(ψ(index)/T)` multiplying `√|log K|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingPrediction {
    pub moment_index: f64,
    pub coefficient: f64,
}

/// Maps a certified tail index to the wing prediction via the index
/// conventions: near infinity `F̄ ↦ α = −p̃−1`, density `↦ −p̃−2`, call price
/// `↦ −p̃`; near zero (reciprocal convention) density `↦ α = −q̃+1`, put
/// price `↦ −q̃−1`, CDF `↦ −q̃`.
pub fn predict_wing_from_tail(
    report: &ParetoTypeReport,
    source: TailSource,
    maturity: f64,
) -> Result<WingPrediction, RegvarError> {
    if !report.weak {
        return Err(RegvarError::NotWeakPareto);
    }
    let a = report.index;
    let idx = match (report.kind, source) {
        (TailKind::NearInfinity, TailSource::CdfComplement) => -a - 1.0,
        (TailKind::NearInfinity, TailSource::Density) => -a - 2.0,
        (TailKind::NearInfinity, TailSource::CallPrice) => -a,
        (TailKind::NearZero, TailSource::Density) => 1.0 - a,
        (TailKind::NearZero, TailSource::PutPrice) => -a - 1.0,
        (TailKind::NearZero, TailSource::Cdf) => -a,
        (kind, src) => {
            return Err(RegvarError::UnsupportedSource(format!("{src:?} near {kind:?}")))
        }
    };
    if idx < 0.0 {
        return Err(RegvarError::InvalidIndex(idx));
    }
    let coefficient = (psi(idx).expect("index validated nonnegative") / maturity).sqrt();
    Ok(WingPrediction { moment_index: idx, coefficient })
}

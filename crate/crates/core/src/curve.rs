//! Shared market-curve types: strike grids, pricing curves, wing-fit reports.

use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Call,
    Put,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Call => write!(f, "call"),
            Side::Put => write!(f, "put"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GridError {
    #[error("grid needs k_min < k_max with both positive, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("grid needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
}

/// Geometric strike grid on `[k_min, k_max]` with `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricGrid {
    k_min: f64,
    k_max: f64,
    n: usize,
}

impl GeometricGrid {
    pub fn new(k_min: f64, k_max: f64, n: usize) -> Result<Self, GridError> {
        if !(k_min > 0.0 && k_max.is_finite() && k_min < k_max) {
            return Err(GridError::BadBounds(k_min, k_max));
        }
        if n < 2 {
            return Err(GridError::TooFewPoints { min: 2, got: n });
        }
        Ok(Self { k_min, k_max, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Strike span in decimal decades.
    pub fn decades(&self) -> f64 {
        (self.k_max / self.k_min).log10()
    }

    pub fn points(&self) -> Vec<f64> {
        self.log_points().into_iter().map(f64::exp).collect()
    }

    pub fn log_points(&self) -> Vec<f64> {
        let (la, lb) = (self.k_min.ln(), self.k_max.ln());
        let step = (lb - la) / (self.n - 1) as f64;
        (0..self.n).map(|i| la + step * i as f64).collect()
    }
}

/// A strike → price mapping held in log space so that wing prices far below
/// the `f64` underflow threshold stay usable.
#[derive(Clone)]
pub struct PricingCurve {
    side: Side,
    eval_log: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for PricingCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PricingCurve").field("side", &self.side).finish()
    }
}

impl PricingCurve {
    pub fn from_log_fn<F>(side: Side, log_price: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { side, eval_log: Arc::new(log_price) }
    }

    pub fn from_price_fn<F>(side: Side, price: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { side, eval_log: Arc::new(move |k| price(k).ln()) }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// ln price(K)
    pub fn log_price(&self, strike: f64) -> f64 {
        (self.eval_log)(strike)
    }

    pub fn price(&self, strike: f64) -> f64 {
        self.log_price(strike).exp()
    }
}

/// Ordinary least squares line through `(x, y)` pairs; returns (slope, intercept).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Wing measurement over a geometric strike grid.
///
/// `slope` is the regression slope of `T·I(K)²` against absolute log-moneyness
/// over the tail window; `ratio_tail_mean` is the plain tail mean of
/// `T·I² / |log-moneyness|`. The regression estimate absorbs the constant part
/// of the slowly varying prefactor and converges visibly faster.
#[derive(Debug, Clone, PartialEq)]
pub struct WingFit {
    pub slope: f64,
    pub intercept: f64,
    pub ratio_tail_mean: f64,
    pub ratio_osc: f64,
    pub converged: bool,
    pub points_used: usize,
}

/// Fit a wing from `(|log-moneyness|, T·I²)` samples, using the trailing
/// `tail_fraction` of the grid. `osc_tol` bounds the pointwise-ratio
/// oscillation accepted as "converged".
pub fn fit_wing_slope(points: &[(f64, f64)], tail_fraction: f64, osc_tol: f64) -> WingFit {
    let start = ((points.len() as f64) * (1.0 - tail_fraction)).floor() as usize;
    let tail = &points[start.min(points.len().saturating_sub(2))..];
    let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    let ratios: Vec<f64> = tail.iter().map(|(x, y)| y / x).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let osc = ratios.iter().cloned().fold(f64::MIN, f64::max)
        - ratios.iter().cloned().fold(f64::MAX, f64::min);
    WingFit {
        slope,
        intercept,
        ratio_tail_mean: mean,
        ratio_osc: osc,
        converged: osc < osc_tol,
        points_used: tail.len(),
    }
}

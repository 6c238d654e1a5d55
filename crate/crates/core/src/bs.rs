//! Black-Scholes pricing, vega, and robust implied-volatility inversion.
//!
//! This is the measurement instrument for everything else in the crate, so
//! the normal CDF runs through [`crate::numerics::erfc`] and keeps relative
//! accuracy on option prices all the way down to the underflow threshold.
//! The inversion is a bracketed Newton iteration (bisection safeguard) that
//! converges on the volatility step, not merely on the price residual: in the
//! wings vega degenerates and a price-only stop would leave vol error behind.

use crate::numerics::{norm_cdf, norm_pdf};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("price {price} outside the no-arbitrage range ({lower}, {upper})")]
    PriceOutOfBounds { price: f64, lower: f64, upper: f64 },
    #[error("implied-vol iteration did not converge")]
    NoConvergence,
}

/// Fixed-maturity market slice: spot, rate, maturity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSetup {
    pub spot: f64,
    pub rate: f64,
    pub maturity: f64,
}

impl MarketSetup {
    pub fn new(spot: f64, rate: f64, maturity: f64) -> Result<Self, BsError> {
        if !(spot > 0.0 && spot.is_finite()) {
            return Err(BsError::InvalidInput(format!("spot must be positive, got {spot}")));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(BsError::InvalidInput(format!("rate must be >= 0, got {rate}")));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(BsError::InvalidInput(format!("maturity must be positive, got {maturity}")));
        }
        Ok(Self { spot, rate, maturity })
    }

    /// Forward price `x₀ e^{rT}`.
    pub fn forward(&self) -> f64 {
        self.spot * (self.rate * self.maturity).exp()
    }

    /// Discount factor `e^{-rT}`.
    pub fn discount(&self) -> f64 {
        (-self.rate * self.maturity).exp()
    }
}

pub use crate::curve::Side;

/// A single observed option price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionQuote {
    pub strike: f64,
    pub price: f64,
    pub side: Side,
}

impl OptionQuote {
    pub fn new(strike: f64, price: f64, side: Side) -> Result<Self, BsError> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(BsError::InvalidInput(format!("strike must be positive, got {strike}")));
        }
        if !(price >= 0.0 && price.is_finite()) {
            return Err(BsError::InvalidInput(format!("price must be >= 0, got {price}")));
        }
        Ok(Self { strike, price, side })
    }

    /// No-arbitrage bounds (open interval) for this quote under `setup`.
    pub fn no_arb_bounds(&self, setup: &MarketSetup) -> (f64, f64) {
        let kd = self.strike * setup.discount();
        match self.side {
            Side::Call => ((setup.spot - kd).max(0.0), setup.spot),
            Side::Put => ((kd - setup.spot).max(0.0), kd),
        }
    }
}

fn d1_d2(setup: &MarketSetup, strike: f64, vol: f64) -> (f64, f64) {
    let sq = vol * setup.maturity.sqrt();
    let d1 = ((setup.spot / strike).ln() + (setup.rate + 0.5 * vol * vol) * setup.maturity) / sq;
    (d1, d1 - sq)
}

fn check_price_inputs(_setup: &MarketSetup, strike: f64, vol: f64) -> Result<(), BsError> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(BsError::InvalidInput(format!("strike must be positive, got {strike}")));
    }
    if !(vol >= 0.0) || vol.is_nan() {
        return Err(BsError::InvalidInput(format!("vol must be >= 0, got {vol}")));
    }
    Ok(())
}

/// European call price.
pub fn bs_call_price(setup: &MarketSetup, strike: f64, vol: f64) -> Result<f64, BsError> {
    check_price_inputs(setup, strike, vol)?;
    let kd = strike * setup.discount();
    if vol == 0.0 {
        return Ok((setup.spot - kd).max(0.0));
    }
    if vol == f64::INFINITY {
        return Ok(setup.spot);
    }
    let (d1, d2) = d1_d2(setup, strike, vol);
    Ok(setup.spot * norm_cdf(d1) - kd * norm_cdf(d2))
}

/// European put price.
pub fn bs_put_price(setup: &MarketSetup, strike: f64, vol: f64) -> Result<f64, BsError> {
    check_price_inputs(setup, strike, vol)?;
    let kd = strike * setup.discount();
    if vol == 0.0 {
        return Ok((kd - setup.spot).max(0.0));
    }
    if vol == f64::INFINITY {
        return Ok(kd);
    }
    // priced directly (not via parity) so deep-ITM cancellation never enters
    let (d1, d2) = d1_d2(setup, strike, vol);
    Ok(kd * norm_cdf(-d2) - setup.spot * norm_cdf(-d1))
}

fn price_for(setup: &MarketSetup, strike: f64, vol: f64, side: Side) -> Result<f64, BsError> {
    match side {
        Side::Call => bs_call_price(setup, strike, vol),
        Side::Put => bs_put_price(setup, strike, vol),
    }
}

/// dPrice/dVol; identical for calls and puts.
pub fn bs_vega(setup: &MarketSetup, strike: f64, vol: f64) -> Result<f64, BsError> {
    check_price_inputs(setup, strike, vol)?;
    if vol == 0.0 {
        return Ok(0.0);
    }
    let (d1, _) = d1_d2(setup, strike, vol);
    Ok(setup.spot * norm_pdf(d1) * setup.maturity.sqrt())
}

const BRACKET_LO: f64 = 1e-8;
const BRACKET_HI: f64 = 5.0;
const MAX_ITER: usize = 200;

/// Implied volatility of a quote strictly inside its no-arbitrage bounds.
///
/// Bracketed hybrid: Newton steps with vega, falling back to bisection
/// whenever a step leaves the bracket. The bracket starts at
/// `[1e-8, 5.0]` and expands upward if the quote demands it.
pub fn implied_vol(setup: &MarketSetup, quote: &OptionQuote) -> Result<f64, BsError> {
    if !quote.price.is_finite() || !quote.strike.is_finite() || quote.strike <= 0.0 {
        return Err(BsError::InvalidInput("non-finite or non-positive quote".into()));
    }
    let (lower, upper) = quote.no_arb_bounds(setup);
    if quote.price <= lower || quote.price >= upper {
        return Err(BsError::PriceOutOfBounds { price: quote.price, lower, upper });
    }
    // invert the out-of-the-money side: in-the-money prices carry the vol
    // information in their low bits, behind the intrinsic value
    let kd = quote.strike * setup.discount();
    let (target, side) = match quote.side {
        Side::Call if quote.strike < setup.forward() => (quote.price - setup.spot + kd, Side::Put),
        Side::Put if quote.strike > setup.forward() => (quote.price + setup.spot - kd, Side::Call),
        s => (quote.price, s),
    };
    let f = |v: f64| price_for(setup, quote.strike, v, side).map(|p| p - target);

    let mut lo = BRACKET_LO;
    let mut hi = BRACKET_HI;
    if f(lo)? > 0.0 {
        // target below the lowest representable bracket price: vol is in (0, 1e-8)
        lo = 0.0;
    }
    let mut expansions = 0;
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 40 {
            return Err(BsError::NoConvergence);
        }
    }

    let mut v = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let resid = f(v)?;
        if resid == 0.0 {
            return Ok(v);
        }
        if resid > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let vega = bs_vega(setup, quote.strike, v)?;
        let newton = if vega > 0.0 { v - resid / vega } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - v).abs();
        v = next;
        if step <= 1e-15 * v.max(1.0) || (hi - lo) <= 1e-15 * v.max(1.0) {
            // converged on the vol step; confirm the price-side contract
            let resid = f(v)?;
            if resid.abs() <= 1e-12 * setup.spot {
                return Ok(v);
            }
        }
    }
    // step convergence stalled; accept only if the price contract holds
    if f(v)?.abs() <= 1e-12 * setup.spot {
        Ok(v)
    } else {
        Err(BsError::NoConvergence)
    }
}

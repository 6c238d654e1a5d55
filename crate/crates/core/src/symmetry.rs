//! Put-call symmetry: the strike reflection η_T, the transformed call curve
//! G(K) = K·P(η_T(K))/(x₀e^{rT}), the implied-vol symmetry check, and the
//! moment duality m_p(X̃) = (x₀e^{rT})^{2p−1} m_{1−p}(X).

use crate::bs::MarketSetup;
use crate::curve::{GeometricGrid, PricingCurve, Side};
use crate::quad::log_integrate;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("curve has the wrong side: expected {expected}")]
    WrongSide { expected: Side },
    #[error("moment of order {order} diverges: {reason}")]
    DivergentMoment { order: f64, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Strike reflection about the forward: `η_T(K) = (x₀ e^{rT})² / K`.
/// An involution; the forward itself is the fixed point.
pub fn eta_t(setup: &MarketSetup, strike: f64) -> f64 {
    let f = setup.forward();
    f * f / strike
}

/// The symmetry-transformed call curve built from a put curve.
#[derive(Debug, Clone)]
pub struct SymmetricCurve {
    source: PricingCurve,
    transformed: PricingCurve,
    setup: MarketSetup,
}

impl SymmetricCurve {
    pub fn source(&self) -> &PricingCurve {
        &self.source
    }

    /// The transformed curve; a call pricing curve in its own right.
    pub fn curve(&self) -> &PricingCurve {
        &self.transformed
    }

    pub fn setup(&self) -> &MarketSetup {
        &self.setup
    }

    pub fn value(&self, strike: f64) -> f64 {
        self.transformed.price(strike)
    }

    pub fn log_value(&self, strike: f64) -> f64 {
        self.transformed.log_price(strike)
    }
}

/// Builds `G(K) = (K/(x₀e^{rT})) · P(η_T(K))` from a put curve.
pub fn symmetric_call(curve: &PricingCurve, setup: &MarketSetup) -> Result<SymmetricCurve, SymmetryError> {
    if curve.side() != Side::Put {
        return Err(SymmetryError::WrongSide { expected: Side::Put });
    }
    let f = setup.forward();
    let log_f = f.ln();
    let put = curve.clone();
    let transformed = PricingCurve::from_log_fn(Side::Call, move |k: f64| {
        k.ln() - log_f + put.log_price(f * f / k)
    });
    Ok(SymmetricCurve { source: curve.clone(), transformed, setup: *setup })
}

/// Max over the grid of `|I_C(K) − I_G(η_T(K))|` for two implied-vol maps.
pub fn iv_symmetry_check<F, G>(
    iv_c: F,
    iv_g: G,
    setup: &MarketSetup,
    grid: &GeometricGrid,
) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    grid.points()
        .into_iter()
        .map(|k| (iv_c(k) - iv_g(eta_t(setup, k))).abs())
        .fold(0.0, f64::max)
}

/// A stock-price density oracle: log-density of the absolutely continuous
/// part, the mass of an atom at zero (if any), and a support hint for the
/// quadrature windows.
#[derive(Clone)]
pub struct DensityOracle {
    log_density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    mass_at_zero: f64,
    support: (f64, f64),
}

impl DensityOracle {
    pub fn new<F>(log_density: F, mass_at_zero: f64, support: (f64, f64)) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { log_density: Arc::new(log_density), mass_at_zero, support }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        (self.log_density)(x)
    }

    pub fn mass_at_zero(&self) -> f64 {
        self.mass_at_zero
    }
}

/// `ln ∫ x^q D(x) dx` over `(0, ∞)`, integrating in log-space with window
/// extension until the tails contribute below 1e-12 relative; errors out if
/// the tail contributions keep growing instead.
fn log_moment_ac(
    oracle: &DensityOracle,
    q: f64,
) -> Result<f64, SymmetryError> {
    let g = |t: f64| (q + 1.0) * t + oracle.log_density(t.exp());
    let (mut lo, mut hi) = (oracle.support.0.ln(), oracle.support.1.ln());
    let mut total = log_integrate(g, lo, hi, 1e-12);
    for _ in 0..60 {
        let left = log_integrate(g, lo - 4.0, lo, 1e-12);
        let right = log_integrate(g, hi, hi + 4.0, 1e-12);
        let grew = left.max(right) > total;
        total = crate::numerics::log_add_exp(total, crate::numerics::log_add_exp(left, right));
        lo -= 4.0;
        hi += 4.0;
        if grew {
            continue;
        }
        if left < total - 29.0 && right < total - 29.0 {
            return Ok(total);
        }
    }
    Err(SymmetryError::DivergentMoment {
        order: q,
        reason: "tail windows keep growing; the moment integral does not converge".into(),
    })
}

/// Moment of order `q` of the stock price: density part plus the atom rules.
/// The atom at zero contributes nothing for q > 0, is excluded at q = 0
/// (the order-zero moment is the mass of the absolutely continuous part),
/// and makes any q < 0 moment infinite.
pub fn moment(oracle: &DensityOracle, q: f64) -> Result<f64, SymmetryError> {
    if q < 0.0 && oracle.mass_at_zero > 0.0 {
        return Err(SymmetryError::DivergentMoment {
            order: q,
            reason: format!("atom of mass {} at zero", oracle.mass_at_zero),
        });
    }
    Ok(log_moment_ac(oracle, q)?.exp())
}

/// Both sides of the moment duality and their relative gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDuality {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Checks `m_p(X̃_T) = (x₀e^{rT})^{2p−1} m_{1−p}(X_T)` by two independent
/// quadratures: the left side integrates `x^p` against the transformed
/// density `(x₀e^{rT})³ x^{-3} D(η_T(x))` on its own grid, the right side
/// integrates `x^{1−p}` against `D` directly.
pub fn moment_dual_check(
    oracle: &DensityOracle,
    p: f64,
    setup: &MarketSetup,
) -> Result<MomentDuality, SymmetryError> {
    if p == 0.0 {
        return Err(SymmetryError::InvalidInput("duality is stated for p ≠ 0".into()));
    }
    let f = setup.forward();
    let log_f = f.ln();
    // transformed density support: η maps (lo, hi) to (η(hi), η(lo))
    let (lo, hi) = oracle.support;
    let transformed = DensityOracle::new(
        {
            let src = oracle.clone();
            move |x: f64| 3.0 * log_f - 3.0 * x.ln() + src.log_density(f * f / x)
        },
        0.0,
        (f * f / hi, f * f / lo),
    );
    if 1.0 - p < 0.0 && oracle.mass_at_zero > 0.0 {
        return Err(SymmetryError::DivergentMoment {
            order: 1.0 - p,
            reason: format!("atom of mass {} at zero", oracle.mass_at_zero),
        });
    }
    let lhs = moment(&transformed, p)?;
    let rhs = f.powf(2.0 * p - 1.0) * moment(oracle, 1.0 - p)?;
    let relative_gap = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
    Ok(MomentDuality { lhs, rhs, relative_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::{bs_call_price, bs_put_price, implied_vol, OptionQuote};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn setup(spot: f64, rate: f64, t: f64) -> MarketSetup {
        MarketSetup::new(spot, rate, t).unwrap()
    }

    #[test]
    fn eta_is_an_involution_with_forward_fixed_point() {
        let s = setup(100.0, 0.03, 2.0);
        let f = s.forward();
        assert_relative_eq!(eta_t(&s, f), f, max_relative = 1e-15);
        for k in [0.3, 7.0, 55.0, 431.0] {
            assert_relative_eq!(eta_t(&s, eta_t(&s, k)), k, max_relative = 1e-14);
        }
        // worked example: x₀=100, r=0, K=50 → 200
        let s0 = setup(100.0, 0.0, 1.0);
        assert_relative_eq!(eta_t(&s0, 50.0), 200.0, max_relative = 1e-15);
    }

    #[test]
    fn bs_put_transforms_into_bs_call() {
        // model symmetry: in the Black-Scholes world G is the BS call curve
        let s = setup(100.0, 0.02, 1.5);
        let vol = 0.35;
        let put = PricingCurve::from_price_fn(Side::Put, move |k| {
            bs_put_price(&setup(100.0, 0.02, 1.5), k, vol).unwrap()
        });
        let g = symmetric_call(&put, &s).unwrap();
        for k in [40.0, 80.0, 100.0, 150.0, 290.0] {
            assert_relative_eq!(
                g.value(k),
                bs_call_price(&s, k, vol).unwrap(),
                max_relative = 1e-12
            );
        }
        // fixed point: G at the forward equals P at the forward
        let f = s.forward();
        assert_relative_eq!(g.value(f), put.price(f), max_relative = 1e-13);
    }

    #[test]
    fn rejects_call_input() {
        let s = setup(100.0, 0.0, 1.0);
        let call = PricingCurve::from_price_fn(Side::Call, |k| 1.0 / k);
        assert!(matches!(
            symmetric_call(&call, &s),
            Err(SymmetryError::WrongSide { expected: Side::Put })
        ));
    }

    #[test]
    fn double_transform_returns_the_call() {
        // parity-induced put of G, transformed again, is the original call
        let s = setup(100.0, 0.01, 2.0);
        let vol = 0.25;
        let st = s;
        let put = PricingCurve::from_price_fn(Side::Put, move |k| {
            bs_put_price(&st, k, vol).unwrap()
        });
        let g = symmetric_call(&put, &s).unwrap();
        let g2 = g.clone();
        let induced_put = PricingCurve::from_price_fn(Side::Put, move |k| {
            g2.value(k) - st.spot + k * st.discount()
        });
        let back = symmetric_call(&induced_put, &s).unwrap();
        for k in [50.0, 90.0, 120.0, 260.0] {
            assert_relative_eq!(
                back.value(k),
                bs_call_price(&s, k, vol).unwrap(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn iv_symmetry_flat_smile() {
        let s = setup(100.0, 0.0, 1.0);
        let vol = 0.3;
        let st = s;
        let iv_c = move |k: f64| {
            let p = bs_call_price(&st, k, vol).unwrap();
            implied_vol(&st, &OptionQuote::new(k, p, Side::Call).unwrap()).unwrap()
        };
        let grid = GeometricGrid::new(40.0, 250.0, 9).unwrap();
        let dev = iv_symmetry_check(iv_c, iv_c, &s, &grid);
        assert!(dev < 1e-10, "flat-smile deviation {dev}");
        // single point at the forward is exactly symmetric
        let one = GeometricGrid::new(99.999999, 100.000001, 2).unwrap();
        assert!(iv_symmetry_check(iv_c, iv_c, &s, &one) < 1e-10);
    }

    fn lognormal_oracle(spot: f64, vol: f64, t: f64) -> DensityOracle {
        // zero-rate lognormal: ln X ~ N(ln x₀ − σ²T/2, σ²T)
        let mu = spot.ln() - 0.5 * vol * vol * t;
        let s2 = vol * vol * t;
        DensityOracle::new(
            move |x: f64| {
                let z = x.ln() - mu;
                -0.5 * z * z / s2 - x.ln() - 0.5 * (2.0 * std::f64::consts::PI * s2).ln()
            },
            0.0,
            (spot * 1e-3, spot * 1e3),
        )
    }

    #[test]
    fn lognormal_moments_closed_form() {
        // E[X^q] = x₀^q exp(q(q−1)σ²T/2) at zero rate
        let oracle = lognormal_oracle(100.0, 0.3, 2.0);
        for q in [-1.0, 0.0, 0.3, 1.0, 2.5] {
            let want = 100.0_f64.powf(q) * (q * (q - 1.0) * 0.09).exp();
            assert_relative_eq!(moment(&oracle, q).unwrap(), want, max_relative = 1e-9);
        }
    }

    #[test]
    fn moment_duality_lognormal() {
        let s = setup(100.0, 0.0, 2.0);
        let oracle = lognormal_oracle(100.0, 0.3, 2.0);
        // p = 1/2: the prefactor is 1 and both sides are m_{1/2}
        let d = moment_dual_check(&oracle, 0.5, &s).unwrap();
        assert!(d.relative_gap < 1e-8, "gap {}", d.relative_gap);
        assert_relative_eq!(d.rhs, moment(&oracle, 0.5).unwrap(), max_relative = 1e-10);
        // p = 1: lhs is the forward (m₀ = 1, no atom)
        let d = moment_dual_check(&oracle, 1.0, &s).unwrap();
        assert_relative_eq!(d.lhs, s.forward(), max_relative = 1e-8);
        assert!(d.relative_gap < 1e-8);
        for p in [0.3, 0.7, 1.4] {
            let d = moment_dual_check(&oracle, p, &s).unwrap();
            assert!(d.relative_gap < 1e-8, "p={p} gap {}", d.relative_gap);
        }
    }

    #[test]
    fn atom_makes_negative_moments_diverge() {
        let s = setup(100.0, 0.0, 1.0);
        let base = lognormal_oracle(100.0, 0.3, 1.0);
        let with_atom = DensityOracle::new(
            {
                let b = base.clone();
                move |x| b.log_density(x) + (0.9_f64).ln()
            },
            0.1,
            (0.1, 1e5),
        );
        assert!(matches!(
            moment(&with_atom, -0.5),
            Err(SymmetryError::DivergentMoment { .. })
        ));
        // p > 1 needs m_{1-p}, a negative-order moment
        assert!(matches!(
            moment_dual_check(&with_atom, 1.5, &s),
            Err(SymmetryError::DivergentMoment { .. })
        ));
        // p = 0 excluded by the statement
        assert!(moment_dual_check(&with_atom, 0.0, &s).is_err());
        // fat-tailed density without an atom: the quadrature growth guard fires
        let pareto = DensityOracle::new(|x: f64| -2.0 * x.ln_1p(), 0.0, (1.0, 1e4));
        assert!(matches!(moment(&pareto, 1.5), Err(SymmetryError::DivergentMoment { .. })));
    }
}

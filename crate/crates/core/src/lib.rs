//! Implied-volatility wing asymptotics with exact pricing oracles.
//!
//! The crate has three layers:
//!
//! * **Instrument** — [`bs`]: Black-Scholes pricing and a robust implied-vol
//!   solver accurate deep into the wings.
//! * **Formula core** — [`asymptotics`], [`regvar`], [`symmetry`]: the wing
//!   slope map ψ, sharp implied-vol expansions, weight-function (Piterbarg)
//!   constants and admissibility diagnostics, regular-variation estimators,
//!   and the put-call symmetry transform.
//! * **Oracles** — [`cev`] (squared-Bessel / Feller density with an absorbing
//!   boundary) and [`heston_kou`] (characteristic-function pricing for Heston
//!   perturbed by double-exponential jumps), used to validate the asymptotic
//!   machinery against exact prices.

pub mod asymptotics;
pub mod bs;
pub mod cev;
pub mod curve;
pub mod heston_kou;
pub mod numerics;
pub mod quad;
pub mod regvar;
pub mod symmetry;

pub use bs::{bs_call_price, bs_put_price, bs_vega, implied_vol, BsError, MarketSetup, OptionQuote};
pub use curve::{GeometricGrid, PricingCurve, Side, WingFit};

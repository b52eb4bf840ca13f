//! Numerical laboratory for quantum time-of-arrival measurement models.
//!
//! Every model is a particle on a line coupled to a detector at `x = 0`
//! (units with ħ = 1):
//!
//! * [`clock_model`]: the particle drives a clock directly through
//!   `H = P_x²/2m + θ(-x) P_y`.
//! * [`spin_trigger`]: a spin-gated delta potential flips a trigger that
//!   stops the clock.
//! * [`booster`]: a tuned spin-flip device that lifts the kinetic energy
//!   before detection.
//! * [`gradual_clock`]: a smooth inverse-square coupling, treated classically.
//! * [`toa_operator`]: the time-of-arrival operator and its eigenstates.
//! * [`tdse`]: a brute-force grid solver that cross-checks the closed forms.

pub mod booster;
pub mod clock_model;
pub mod common;
pub mod error;
pub mod gradual_clock;
pub mod io;
pub mod ode;
mod par;
pub mod quad;
pub mod spin_trigger;
pub mod tdse;
pub mod toa_operator;

pub use common::{
    BimodalPacketSpec, ClockPrior, GaussianEnvelope, MomentumEnvelope, PacketSpec, QuadratureGrid,
};
pub use error::{Result, ToaError};

//! Joint bandwidth and relay allocation in multi-homing cooperative D2D
//! networks.
//!
//! Ordinary mobile devices (OMDs) pick a multi-homing relay (MMD) to rent
//! bandwidth from; MMDs compete on price and offered bandwidth. The crate
//! covers the whole two-stage game:
//!
//! * [`channel`]: SNR and capacity of direct and amplify-and-forward links.
//! * [`omd_game`]: follower utilities, delayed replicator dynamics, closed-form
//!   evolutionary equilibria and their Jacobian.
//! * [`mmd_game`]: leader utilities, Lambert-W best-response pricing, the Nash
//!   price solver, bandwidth best responses and the supermodularity checks.
//! * [`imes`]: the distributed protocol (imitation among OMDs, utility-driven
//!   strategy updates on MMDs).
//! * [`sim`]: random topologies and a TDMA service-delay simulator comparing
//!   the protocol with random relay selection.
//! * [`config`] and [`commands`]: scenario files and the experiment drivers
//!   behind the `relay-game` binary.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod commands;
pub mod config;
mod error;
pub mod imes;
pub mod lambert;
pub mod mmd_game;
pub mod omd_game;
pub mod sim;

pub use error::{Error, Result};

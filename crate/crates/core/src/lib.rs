//! Photobioreactor biomass regulation workbench.
//!
//! The plant is a continuous, light-limited microalgae culture whose
//! biomass is regulated through the dilution rate. The crate contains the
//! plant model ([`radiative`], [`kinetics`], [`plant`]), two controllers
//! ([`control`]), productivity-optimal setpoints ([`steady_state`]),
//! closed-loop campaigns ([`scenarios`]) and the command-line front end
//! ([`cli`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod kinetics;
pub mod numerics;
pub mod plant;
pub mod radiative;
pub mod scenarios;
pub mod steady_state;

pub use error::{Error, Result};

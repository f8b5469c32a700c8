//! Safe neuroevolution of an inverted pendulum controller.
//!
//! A LEARNING controller (a small sigmoid network decoded from a bit-string
//! genome) is trained by a genetic algorithm while a validated LQR
//! controller, SAFE, watches over the plant. Whenever the state leaves a
//! hypercube around the operating point SAFE takes over, so no episode of
//! the search can drive the cart or rod into a hard stop.
//!
//! * [`plant`]: cart-pole simulator, motor and sensor models
//! * [`safe`]: linearization, Riccati solver, LQR gain
//! * [`fixed`], [`neuro`]: Q24.8 genome codec and the 4-4-2-1 network
//! * [`ga`]: population lifecycle
//! * [`supervisor`]: reset, switching and fitness
//! * [`config`], [`experiment`], [`report`]: the command-line harness

// `!(x > 0.0)` is how NaN gets rejected in the validators
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod fixed;
pub mod ga;
pub mod neuro;
pub mod plant;
pub mod report;
pub mod safe;
pub mod supervisor;

pub use error::{Error, Result};

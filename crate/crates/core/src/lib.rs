//! Channel allocation for multi-radio 802.11 mesh networks: airtime cost
//! model, an end-to-end distributed channel-selection protocol, an exact
//! min-max allocation solver, baseline policies and a discrete-event
//! simulator to compare them.

pub mod airtime;
pub mod arachne;
pub mod assignment;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod error;
pub mod optimal;
pub mod phy;
pub mod routing;
pub mod scenario;
pub mod simkit;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};

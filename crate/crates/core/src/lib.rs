//! Simulation and analysis of GSM1800 handsets in an aircraft cabin.
//!
//! The pipeline runs the random-access simulator ([`rach_sim`]) over the TDMA
//! grid ([`frame_engine`]), propagates every burst and its harmonics to the
//! avionics receivers ([`propagation`], [`victim_analysis`]) and predicts the
//! audible frame-rate buzz ([`tdma_noise`]). [`io_cli`] ties these together
//! behind a scenario file.

pub mod error;
pub mod frame_engine;
pub mod gsm_phy;
pub mod io_cli;
pub mod propagation;
pub mod rach_sim;
pub mod tdma_noise;
pub mod victim_analysis;

pub use error::{Error, Result};

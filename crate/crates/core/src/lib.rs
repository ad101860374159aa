//! Robust impulsive-timed control barrier functions for spacecraft
//! operating under intermittent state measurements.

pub mod cbf;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod observer;
pub mod scenario;
pub mod sim;
pub mod timing;
pub mod uncertainty;

pub use error::{Error, Result};

//! Traveling-wave rotary ultrasonic motor simulation and areal surface
//! roughness metrology.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod materials;
pub mod metrology;
pub mod stator_fem;
pub mod sweep;
pub mod wave_drive;

pub use error::{Error, Result};

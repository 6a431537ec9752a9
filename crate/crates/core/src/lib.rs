//! Monte Carlo link-level simulation of grant-free coded slotted ALOHA over a
//! massive-MIMO block Rayleigh fading uplink.
//!
//! Active users send `r` replicas of their packet in random slots, each with
//! a randomly picked orthogonal pilot. The base station estimates channels
//! from the pilots, recovers payloads with maximal ratio combining and
//! iteratively subtracts decoded users from the slots holding their replicas.

pub mod analysis;
pub mod config;
pub mod error;
pub mod frame;
pub mod harness;
pub mod model;
pub mod receiver;
pub mod sis;

pub use config::{compute_slot_count, DecodeCriterion, SystemConfig};
pub use error::{Error, Result};
pub use frame::{FrameInstance, UserPlan};
pub use sis::{run_receiver, Algorithm, DecodeReport};

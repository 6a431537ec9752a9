//! Complex baseband signal primitives.

mod channel;
mod pilots;
mod qpsk;
mod rng;

pub use channel::{draw_channel_vector, draw_complex_gaussian, draw_noise_matrix, ChannelVector};
pub use pilots::{build_hadamard_pilots, PilotSet};
pub use qpsk::{qpsk_hard_demodulate, qpsk_modulate, QpskSequence};
pub use rng::{RandomStream, SimRng};

pub type C64 = num_complex::Complex64;

//! Gray-labeled QPSK: the first bit of a pair selects the sign of the real
//! part, the second the sign of the imaginary part, and bit 0 maps to +1/√2.

use std::f64::consts::FRAC_1_SQRT_2;

use super::C64;
use crate::error::{Error, Result};

/// Unit-energy QPSK symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskSequence(pub Vec<C64>);

impl QpskSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[C64] {
        &self.0
    }
}

#[inline]
fn level(bit: bool) -> f64 {
    if bit {
        -FRAC_1_SQRT_2
    } else {
        FRAC_1_SQRT_2
    }
}

pub fn qpsk_modulate(bits: &[bool]) -> Result<QpskSequence> {
    if bits.len() % 2 != 0 {
        return Err(Error::InvalidLength(format!("QPSK needs an even bit count, got {}", bits.len())));
    }
    Ok(QpskSequence(bits.chunks_exact(2).map(|b| C64::new(level(b[0]), level(b[1]))).collect()))
}

/// Sign decisions per quadrature component. Zero decides for bit 0.
pub fn qpsk_hard_demodulate(symbols: &[C64]) -> Vec<bool> {
    let mut bits = Vec::with_capacity(2 * symbols.len());
    for s in symbols {
        bits.push(s.re < 0.0);
        bits.push(s.im < 0.0);
    }
    bits
}

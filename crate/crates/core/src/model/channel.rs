use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::C64;
use crate::error::{Error, Result};

/// Channel coefficients of one user towards the `M` base-station antennas
/// in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Array1<C64>);

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn as_array(&self) -> &Array1<C64> {
        &self.0
    }
}

/// One circularly symmetric complex Gaussian sample with total variance `var`.
#[inline]
pub fn draw_complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let sigma = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(sigma * re, sigma * im)
}

/// Draws `m` i.i.d. CN(0, var) channel coefficients.
pub fn draw_channel_vector<R: Rng + ?Sized>(rng: &mut R, m: usize, var: f64) -> Result<ChannelVector> {
    if m == 0 {
        return Err(Error::InvalidParameter("antenna count must be at least 1".into()));
    }
    if !(var > 0.0) {
        return Err(Error::InvalidParameter(format!("channel variance must be positive, got {var}")));
    }
    Ok(ChannelVector(Array1::from_shape_simple_fn(m, || draw_complex_gaussian(rng, var))))
}

/// Draws a `rows x cols` matrix of i.i.d. CN(0, var) noise samples.
///
/// A zero variance yields the all-zero matrix without consuming randomness.
pub fn draw_noise_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, var: f64) -> Result<Array2<C64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(format!("noise matrix must be non-empty, got {rows}x{cols}")));
    }
    if !(var >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be non-negative, got {var}")));
    }
    if var == 0.0 {
        return Ok(Array2::zeros((rows, cols)));
    }
    Ok(Array2::from_shape_simple_fn((rows, cols), || draw_complex_gaussian(rng, var)))
}

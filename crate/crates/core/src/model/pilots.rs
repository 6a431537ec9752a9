use ndarray::Array2;

use crate::error::{Error, Result};

/// Orthogonal ±1 pilot sequences, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    rows: Array2<f64>,
}

impl PilotSet {
    /// Number of pilots, equal to the pilot length.
    pub fn count(&self) -> usize {
        self.rows.nrows()
    }

    pub fn len(&self) -> usize {
        self.rows.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, j: usize) -> ndarray::ArrayView1<'_, f64> {
        self.rows.row(j)
    }

    /// Squared norm of every pilot (all rows have the same energy).
    pub fn energy(&self) -> f64 {
        self.len() as f64
    }
}

/// Sylvester construction: `H_1 = [1]`, `H_2n = [[H_n, H_n], [H_n, -H_n]]`.
pub fn build_hadamard_pilots(n_p: usize) -> Result<PilotSet> {
    if n_p == 0 || !n_p.is_power_of_two() {
        return Err(Error::UnsupportedPilotCount(n_p));
    }
    // entry (i, j) is (-1)^popcount(i & j)
    let rows = Array2::from_shape_fn((n_p, n_p), |(i, j)| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 });
    Ok(PilotSet { rows })
}

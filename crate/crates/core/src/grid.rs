//! Transmit frames: N×M grids of QPSK payload symbols.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::config::Numerology;

const QPSK: [Complex64; 4] = [
    Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
];

/// Rows are subcarriers, columns are OFDM symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub symbols: Array2<Complex64>,
}

impl TxFrame {
    pub fn shape(&self) -> (usize, usize) {
        self.symbols.dim()
    }
}

pub fn generate_frame<R: RngCore + ?Sized>(numerology: &Numerology, payload: &mut R) -> TxFrame {
    let (n, m) = numerology.shape();
    let mut symbols = Array2::<Complex64>::zeros((n, m));
    let mut bits = 0u64;
    for (i, s) in symbols.iter_mut().enumerate() {
        if i % 32 == 0 {
            bits = payload.random();
        }
        *s = QPSK[(bits & 3) as usize];
        bits >>= 2;
    }
    TxFrame { symbols }
}

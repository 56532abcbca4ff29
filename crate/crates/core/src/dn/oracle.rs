//! Dense reference quantization of the DN symbol.
//!
//! Builds the full N x N midpoint-rule matrix
//! `G[j,m] = (1/N) sum_q exp(i (x_j - x_m) k_q) g^p(b((x_j + x_m)/2), mu k_q) / mu^p`
//! for one-dimensional grids. Each anti-diagonal `j + m = s` shares the
//! midpoint `s dx / 2`, so one length-N inverse DFT per midpoint row fills an
//! entire anti-diagonal; the cost is O(N^2 log N) and the storage one dense
//! matrix. Intended as a trusted cross-check for the separable fast operator,
//! not for production time stepping.
//!
//! Caveat: midpoints live on the half-spaced lattice, so bathymetry variation
//! at odd harmonics of the box (period-L components and their odd multiples)
//! beats against the wavenumber lattice and leaks across the band; the rule
//! is only spectrally clean when the depth profile's variation sits on even
//! harmonics (period L/2 and finer). Cross-operator comparisons should use
//! such profiles; the flat-depth case is exact for any input.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::par;

use super::{first_scaled_wavenumber, symbol_value, SymbolPower};

const DENSE_LIMIT: usize = 4096;

/// Dense midpoint-rule DN matrix with its symmetry defect.
pub struct DenseWeylOperator {
    grid: Arc<SpectralGrid>,
    n: usize,
    /// Row-major symmetrized matrix.
    matrix: Vec<f64>,
    asymmetry: f64,
}

impl DenseWeylOperator {
    /// Builds the dense operator for 1D bathymetry `b`.
    pub fn build(b: &Field, power: SymbolPower, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        let grid = Arc::clone(b.grid());
        if grid.dims() != 1 {
            return Err(Error::UnsupportedEnvironment(
                "dense quantization oracle handles one-dimensional grids only".into(),
            ));
        }
        let n = grid.total();
        if n > DENSE_LIMIT {
            return Err(Error::GridTooLarge { points: n, limit: DENSE_LIMIT });
        }
        if b.min() <= 0.0 {
            return Err(Error::NonPositiveDepth(b.min()));
        }

        let dx = grid.dx(0);
        let xi1 = first_scaled_wavenumber(&grid, mu);
        let scale = 1.0 / mu.powf(match power {
            SymbolPower::One => 1.0,
            SymbolPower::Half => 0.5,
        });
        let kmag: Vec<f64> = grid.wavenumbers(0).iter().map(|k| k.abs()).collect();

        // Depth at the 2N half-spaced midpoints; even indices are grid nodes.
        let depth_mid: Vec<f64> = (0..2 * n)
            .map(|s| {
                if s % 2 == 0 {
                    b.values()[s / 2]
                } else {
                    b.interpolate([0.5 * s as f64 * dx, 0.0])
                }
            })
            .collect();

        let mut planner = FftPlanner::new();
        let ifft = planner.plan_fft_inverse(n);

        let mut matrix = vec![0.0f64; n * n];
        let mut max_imag = 0.0f64;
        // Anti-diagonals j + m = s for s in 0..=2n-2; batches keep the
        // transient row storage small.
        let batch = 64;
        let mut s0 = 0;
        while s0 < 2 * n - 1 {
            let count = batch.min(2 * n - 1 - s0);
            let rows: Vec<Vec<Complex64>> = par::map_indexed(count, |t| {
                let s = s0 + t;
                let mut row: Vec<Complex64> = kmag
                    .iter()
                    .map(|k| {
                        Complex64::new(symbol_value(power, depth_mid[s], mu * k, xi1) * scale, 0.0)
                    })
                    .collect();
                ifft.process(&mut row);
                row
            });
            for (t, row) in rows.iter().enumerate() {
                let s = s0 + t;
                let j_lo = s.saturating_sub(n - 1);
                let j_hi = s.min(n - 1);
                for j in j_lo..=j_hi {
                    let m = s - j;
                    let d = (2 * j as i64 - s as i64).rem_euclid(n as i64) as usize;
                    let c = row[d] / n as f64;
                    matrix[j * n + m] = c.re;
                    max_imag = max_imag.max(c.im.abs());
                }
            }
            s0 += count;
        }

        // Extract the symmetric part; record the defect relative to the
        // largest entry.
        let mut max_entry = 0.0f64;
        let mut max_skew = 0.0f64;
        for j in 0..n {
            for m in (j + 1)..n {
                let a = matrix[j * n + m];
                let c = matrix[m * n + j];
                max_skew = max_skew.max((a - c).abs());
                let avg = 0.5 * (a + c);
                matrix[j * n + m] = avg;
                matrix[m * n + j] = avg;
            }
            max_entry = max_entry.max(matrix[j * n + j].abs());
        }
        for v in &matrix {
            max_entry = max_entry.max(v.abs());
        }
        let asymmetry = (max_skew + max_imag) / max_entry.max(1e-300);

        Ok(Self { grid, n, matrix, asymmetry })
    }

    /// Relative symmetry defect of the raw matrix (before symmetrization).
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Row-major symmetrized matrix entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Dense matrix-vector application.
    pub fn apply(&self, phi: &Field) -> Result<Field> {
        if phi.values().len() != self.n {
            return Err(Error::GridMismatch);
        }
        let n = self.n;
        let out = par::map_indexed(n, |j| {
            let row = &self.matrix[j * n..(j + 1) * n];
            row.iter().zip(phi.values()).map(|(a, p)| a * p).sum::<f64>()
        });
        Field::from_values(&self.grid, out)
    }
}

/// Convenience constructor.
pub fn dense_weyl_oracle(b: &Field, power: SymbolPower, mu: f64) -> Result<DenseWeylOperator> {
    DenseWeylOperator::build(b, power, mu)
}

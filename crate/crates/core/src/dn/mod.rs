//! Dirichlet-to-Neumann (DN) maps for the linearized surface problem.
//!
//! Over a flat bottom the DN map is the Fourier multiplier
//! `|mu k| tanh(b |mu k|) / mu` (so `mu = 1` is the physical operator). Over
//! variable bathymetry we quantize the depth-dependent symbol
//! `g_b(X, xi) = |xi| tanh(b(X) |xi|)` at the midpoint (Weyl rule), realized
//! through a rank-R Chebyshev separation of the depth dependence:
//!
//! `g_b^p(X, xi) ~ sum_r depth_weight_r(b(X)) * k_table_r(xi)`
//!
//! applied in the symmetrized form
//! `(1/2) sum_r [ w_r * M_r(phi) + M_r(w_r * phi) ]`
//! which is exactly self-adjoint on the lattice. Two oracles cross-check it:
//! a dense midpoint-rule quantization ([`dense_weyl_oracle`]) and a
//! terrain-following finite-difference solve of the bulk potential problem
//! ([`bvp_oracle`]).

mod bvp;
mod oracle;

pub use bvp::bvp_oracle;
pub(crate) use bvp::BandedMatrix;
pub use oracle::{dense_weyl_oracle, DenseWeylOperator};

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field, SpectralGrid};
use crate::par;

/// Which power of the DN symbol to quantize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolPower {
    /// The DN symbol itself.
    One,
    /// Its square root (used to build energy variables); the symbol is
    /// smoothed near xi = 0 with a compactly supported bump so the root stays
    /// C-infinity. Modes at or above the first lattice wavenumber are
    /// untouched.
    Half,
}

/// Smooth bump h(s) = exp(1 - 1/(1-s^2)) on |s| < 1, h(0) = 1.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Evaluates the (possibly regularized, possibly rooted) DN symbol.
///
/// `xi1` is the regularization cutoff for [`SymbolPower::Half`]: below it the
/// bare symbol is lifted by `g(b, xi1) * h(xi/xi1)` before the root is taken.
pub(crate) fn symbol_value(power: SymbolPower, b: f64, xi_abs: f64, xi1: f64) -> f64 {
    let bare = xi_abs * (b * xi_abs).tanh();
    match power {
        SymbolPower::One => bare,
        SymbolPower::Half => {
            let lift = xi1 * (b * xi1).tanh() * bump(xi_abs / xi1);
            (bare + lift).sqrt()
        }
    }
}

/// Smallest nonzero lattice wavenumber magnitude, scaled by mu.
pub(crate) fn first_scaled_wavenumber(grid: &SpectralGrid, mu: f64) -> f64 {
    let mut k1 = std::f64::consts::TAU / grid.len_axis(0);
    if grid.dims() == 2 {
        k1 = k1.min(std::f64::consts::TAU / grid.len_axis(1));
    }
    mu * k1
}

/// Multiplier table of the flat-bottom DN map (power `One`).
pub fn flat_multiplier(grid: &SpectralGrid, depth: f64, mu: f64) -> Result<Vec<f64>> {
    if depth <= 0.0 {
        return Err(Error::NonPositiveDepth(depth));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    Ok((0..grid.total())
        .map(|i| {
            let k = grid.k_at(i);
            let xi = mu * (k[0] * k[0] + k[1] * k[1]).sqrt();
            symbol_value(SymbolPower::One, depth, xi, 0.0) / mu
        })
        .collect())
}

/// Applies the flat-bottom DN map to a surface potential.
pub fn flat_apply(phi: &Field, depth: f64, mu: f64) -> Result<Field> {
    let m = flat_multiplier(phi.grid(), depth, mu)?;
    phi.grid().apply_multiplier(phi, &m)
}

const RANK_CAP: usize = 32;
const RANK_TOL: f64 = 1e-10;

/// Midpoint-quantized DN operator with separated depth dependence.
pub struct WeylDn {
    grid: Arc<SpectralGrid>,
    power: SymbolPower,
    mu: f64,
    /// Lagrange cardinal weights of b(X) at the Chebyshev depth nodes, one
    /// lattice-sized table per node.
    depth_weights: Vec<Vec<f64>>,
    /// Symbol tables over the wavenumber lattice, one per depth node.
    k_tables: Vec<Vec<f64>>,
    validation_error: f64,
    depth_range: (f64, f64),
}

fn chebyshev_nodes(rank: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..rank)
        .map(|r| {
            let t = ((2 * r + 1) as f64 * std::f64::consts::PI / (2 * rank) as f64).cos();
            mid + half * t
        })
        .collect()
}

fn barycentric_weights(rank: usize) -> Vec<f64> {
    (0..rank)
        .map(|r| {
            let a = (2 * r + 1) as f64 * std::f64::consts::PI / (2 * rank) as f64;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            sign * a.sin()
        })
        .collect()
}

/// Cardinal row ell_r(x): ell_r(node_s) = delta_rs, sum_r ell_r = 1.
fn cardinal_row(nodes: &[f64], weights: &[f64], x: f64) -> Vec<f64> {
    let rank = nodes.len();
    let mut row = vec![0.0; rank];
    for (r, nr) in nodes.iter().enumerate() {
        if (x - nr).abs() < 1e-13 * (1.0 + nr.abs()) {
            row[r] = 1.0;
            return row;
        }
    }
    let mut denom = 0.0;
    for r in 0..rank {
        let t = weights[r] / (x - nodes[r]);
        row[r] = t;
        denom += t;
    }
    for v in row.iter_mut() {
        *v /= denom;
    }
    row
}

impl WeylDn {
    /// Builds the operator for bathymetry `b`, semiclassical scale `mu` and
    /// symbol power `power`, starting from `rank` depth nodes.
    ///
    /// Construction validates the separated symbol against direct evaluation
    /// over the grid's (depth, wavenumber) range to a relative max error of
    /// 1e-10, raising the rank (up to 32) until the bound holds.
    pub fn build(b: &Field, power: SymbolPower, mu: f64, rank: usize) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        let bmin = b.min();
        let bmax = b.max();
        if bmin <= 0.0 {
            return Err(Error::NonPositiveDepth(bmin));
        }
        let grid = Arc::clone(b.grid());
        let xi1 = first_scaled_wavenumber(&grid, mu);

        // Scaled wavenumber magnitudes over the lattice.
        let xi: Vec<f64> = (0..grid.total())
            .map(|i| {
                let k = grid.k_at(i);
                mu * (k[0] * k[0] + k[1] * k[1]).sqrt()
            })
            .collect();
        let scale = 1.0 / mu.powf(match power {
            SymbolPower::One => 1.0,
            SymbolPower::Half => 0.5,
        });

        // Effectively flat bathymetry: a single exact node.
        if bmax - bmin <= 1e-12 * bmax.abs().max(1.0) {
            let bbar = 0.5 * (bmin + bmax);
            let table: Vec<f64> =
                xi.iter().map(|x| symbol_value(power, bbar, *x, xi1) * scale).collect();
            return Ok(Self {
                grid,
                power,
                mu,
                depth_weights: vec![vec![1.0; b.values().len()]],
                k_tables: vec![table],
                validation_error: 0.0,
                depth_range: (bmin, bmax),
            });
        }

        // Subsample of lattice wavenumbers for validation.
        let mut xi_sample: Vec<f64> = xi.clone();
        xi_sample.sort_by(|a, c| a.partial_cmp(c).unwrap());
        xi_sample.dedup_by(|a, c| (*a - *c).abs() < 1e-12);
        let stride = (xi_sample.len() / 1024).max(1);
        let mut xi_check: Vec<f64> = xi_sample.iter().copied().step_by(stride).collect();
        if let Some(last) = xi_sample.last() {
            if xi_check.last() != Some(last) {
                xi_check.push(*last);
            }
        }

        let mut rank = rank.clamp(2, RANK_CAP);
        loop {
            let nodes = chebyshev_nodes(rank, bmin, bmax);
            let weights = barycentric_weights(rank);
            let err = validation_error(power, &nodes, &weights, bmin, bmax, &xi_check, xi1);
            if err <= RANK_TOL {
                let k_tables: Vec<Vec<f64>> = par::map_indexed(rank, |r| {
                    xi.iter().map(|x| symbol_value(power, nodes[r], *x, xi1) * scale).collect()
                });
                let depth_weights: Vec<Vec<f64>> = {
                    // Row-per-point cardinal evaluation, transposed to per-node tables.
                    let rows: Vec<Vec<f64>> = par::map_indexed(b.values().len(), |i| {
                        cardinal_row(&nodes, &weights, b.values()[i])
                    });
                    (0..rank).map(|r| rows.iter().map(|row| row[r]).collect()).collect()
                };
                return Ok(Self {
                    grid,
                    power,
                    mu,
                    depth_weights,
                    k_tables,
                    validation_error: err,
                    depth_range: (bmin, bmax),
                });
            }
            if rank == RANK_CAP {
                return Err(Error::RankInsufficient { rank, achieved: err, required: RANK_TOL });
            }
            rank = (rank + rank / 2 + 1).min(RANK_CAP);
        }
    }

    pub fn rank(&self) -> usize {
        self.k_tables.len()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn power(&self) -> SymbolPower {
        self.power
    }

    /// Relative max error of the separated symbol at construction time.
    pub fn validation_error(&self) -> f64 {
        self.validation_error
    }

    pub fn depth_range(&self) -> (f64, f64) {
        self.depth_range
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    /// Applies the operator (parallel over separation terms when enabled).
    pub fn apply(&self, phi: &Field) -> Result<Field> {
        self.apply_with(phi, true)
    }

    /// Sequential twin of [`WeylDn::apply`]; bitwise-identical results.
    pub fn apply_seq(&self, phi: &Field) -> Result<Field> {
        self.apply_with(phi, false)
    }

    fn apply_with(&self, phi: &Field, parallel: bool) -> Result<Field> {
        if phi.values().len() != self.grid.total() {
            return Err(Error::GridMismatch);
        }
        let grid = &self.grid;
        let rank = self.rank();
        let spec_phi = grid.forward(phi);

        // (1/2) w_r * M_r(phi): multiplier first, depth weight second.
        let half_a = |r: usize| -> Vec<f64> {
            let mut s = spec_phi.clone();
            for (v, m) in s.values_mut().iter_mut().zip(&self.k_tables[r]) {
                *v *= *m;
            }
            let f = grid.inverse_real(&s);
            f.values()
                .iter()
                .zip(&self.depth_weights[r])
                .map(|(v, w)| v * w)
                .collect()
        };
        // (1/2) M_r(w_r * phi): depth weight first, multiplier second; the
        // inverse transform of the accumulated spectrum is shared.
        let half_b = |r: usize| -> Vec<Complex64> {
            let wphi: Vec<f64> = phi
                .values()
                .iter()
                .zip(&self.depth_weights[r])
                .map(|(v, w)| v * w)
                .collect();
            let f = Field::from_values(grid, wphi).expect("shape");
            let mut s = grid.forward(&f);
            for (v, m) in s.values_mut().iter_mut().zip(&self.k_tables[r]) {
                *v *= *m;
            }
            s.values().to_vec()
        };

        let (parts_a, parts_b) = if parallel {
            (par::map_indexed(rank, half_a), par::map_indexed(rank, half_b))
        } else {
            (par::map_indexed_seq(rank, half_a), par::map_indexed_seq(rank, half_b))
        };

        let mut acc_spec = ComplexField::zeros(grid);
        for part in &parts_b {
            for (a, v) in acc_spec.values_mut().iter_mut().zip(part) {
                *a += v;
            }
        }
        let field_b = grid.inverse_real(&acc_spec);

        let mut out = vec![0.0; grid.total()];
        for part in &parts_a {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        for (o, v) in out.iter_mut().zip(field_b.values()) {
            *o = 0.5 * (*o + v);
        }
        Field::from_values(grid, out)
    }
}

/// Max relative interpolation error of the cardinal expansion over a dense
/// depth sample crossed with the lattice wavenumber sample.
fn validation_error(
    power: SymbolPower,
    nodes: &[f64],
    weights: &[f64],
    bmin: f64,
    bmax: f64,
    xi_check: &[f64],
    xi1: f64,
) -> f64 {
    let rank = nodes.len();
    let nb = 257;
    let node_tables: Vec<Vec<f64>> = (0..rank)
        .map(|r| xi_check.iter().map(|x| symbol_value(power, nodes[r], *x, xi1)).collect())
        .collect();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for ib in 0..nb {
        let b = bmin + (bmax - bmin) * ib as f64 / (nb - 1) as f64;
        let row = cardinal_row(nodes, weights, b);
        for (ix, x) in xi_check.iter().enumerate() {
            let exact = symbol_value(power, b, *x, xi1);
            let approx: f64 = (0..rank).map(|r| row[r] * node_tables[r][ix]).sum();
            worst = worst.max((exact - approx).abs());
            scale = scale.max(exact.abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::STANDARD_GRAVITY;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn smooth_random_field(grid: &Arc<SpectralGrid>, seed: u64, modes: usize) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = grid.len_axis(0);
        let coefs: Vec<(f64, f64, f64)> = (1..=modes)
            .map(|m| (rng.random::<f64>() - 0.5, rng.random::<f64>() * TAU, m as f64))
            .collect();
        Field::from_fn(grid, |x, _| {
            coefs.iter().map(|(a, p, m)| a * (m * TAU * x / l + p).cos()).sum()
        })
    }

    #[test]
    fn flat_multiplier_frozen_value() {
        let g = SpectralGrid::new_1d(256, 2000.0).unwrap();
        let m = flat_multiplier(&g, 9.0, 1.0).unwrap();
        // Mode 50 carries k = 2 pi / 40.
        assert_relative_eq!(m[50], 0.139530820190709, epsilon = 1e-12);
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn flat_apply_is_an_eigen_action() {
        let l = 2000.0;
        let g = SpectralGrid::new_1d(256, l).unwrap();
        let k0 = 50.0 * TAU / l;
        let phi = Field::from_fn(&g, |x, _| (k0 * x).cos());
        let out = flat_apply(&phi, 9.0, 1.0).unwrap();
        let lam = k0 * (9.0 * k0).tanh();
        for (o, p) in out.values().iter().zip(phi.values()) {
            assert_relative_eq!(*o, lam * p, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn flat_rejects_bad_parameters() {
        let g = SpectralGrid::new_1d(16, 1.0).unwrap();
        assert!(flat_multiplier(&g, -1.0, 1.0).is_err());
        assert!(flat_multiplier(&g, 1.0, 0.0).is_err());
    }

    #[test]
    fn separable_collapses_on_constant_depth() {
        let g = SpectralGrid::new_1d(128, 500.0).unwrap();
        let b = Field::constant(&g, 12.0);
        let op = WeylDn::build(&b, SymbolPower::One, 1.0, 16).unwrap();
        assert_eq!(op.rank(), 1);
        let phi = smooth_random_field(&g, 3, 10);
        let a = op.apply(&phi).unwrap();
        let c = flat_apply(&phi, 12.0, 1.0).unwrap();
        for (x, y) in a.values().iter().zip(c.values()) {
            assert_relative_eq!(x, y, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn separable_symbol_error_is_validated() {
        let g = SpectralGrid::new_1d(1024, 2000.0).unwrap();
        let b = Field::from_fn(&g, |x, _| 16.5 + 7.5 * (TAU * x / 2000.0).cos());
        let op = WeylDn::build(&b, SymbolPower::One, 1.0, 16).unwrap();
        assert!(op.validation_error() < 1e-10, "error {:e}", op.validation_error());
        assert!(op.rank() <= 32);
        assert_eq!(op.depth_range(), (9.0, 24.0));
    }

    #[test]
    fn rank_cap_is_reported() {
        // A pathologically wide depth range at high wavenumber cannot be
        // separated within the rank cap.
        let g = SpectralGrid::new_1d(64, 1.0).unwrap();
        let b = Field::from_fn(&g, |x, _| 0.05 + 49.95 * (0.5 - 0.5 * (TAU * x).cos()));
        match WeylDn::build(&b, SymbolPower::One, 1.0, 8).map(|op| op.rank()) {
            Err(Error::RankInsufficient { rank, .. }) => assert_eq!(rank, RANK_CAP),
            other => panic!("expected RankInsufficient, got {other:?}"),
        }
    }

    #[test]
    fn weyl_apply_is_self_adjoint() {
        let g = SpectralGrid::new_1d(256, 1000.0).unwrap();
        let b = Field::from_fn(&g, |x, _| 15.0 - 6.0 * (TAU * x / 1000.0).sin());
        for power in [SymbolPower::One, SymbolPower::Half] {
            let op = WeylDn::build(&b, power, 1.0, 12).unwrap();
            for seed in 0..10u64 {
                let u = smooth_random_field(&g, 100 + seed, 20);
                let v = smooth_random_field(&g, 200 + seed, 20);
                let a = u.inner(&op.apply(&v).unwrap()).unwrap();
                let c = op.apply(&u).unwrap().inner(&v).unwrap();
                let denom = a.abs().max(c.abs()).max(1e-300);
                assert!(
                    ((a - c) / denom).abs() < 1e-12,
                    "adjoint defect {:e} (power {power:?})",
                    ((a - c) / denom).abs()
                );
            }
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let g = SpectralGrid::new_1d(128, 700.0).unwrap();
        let b = Field::from_fn(&g, |x, _| 10.0 + 3.0 * (TAU * x / 700.0).cos());
        let op = WeylDn::build(&b, SymbolPower::One, 1.0, 10).unwrap();
        let phi = smooth_random_field(&g, 9, 15);
        let a = op.apply(&phi).unwrap();
        let s = op.apply_seq(&phi).unwrap();
        assert_eq!(a.values(), s.values());
    }

    #[test]
    fn square_root_composes_to_the_symbol() {
        // Applying the half-power operator twice approximates the full
        // operator to O(mu^2) on smooth zero-mean fields.
        let g = SpectralGrid::new_1d(256, 1000.0).unwrap();
        let b = Field::from_fn(&g, |x, _| 14.0 + 2.0 * (TAU * x / 1000.0).cos());
        let phi = smooth_random_field(&g, 11, 12);
        let errs: Vec<f64> = [0.4, 0.2]
            .iter()
            .map(|&mu| {
                let half = WeylDn::build(&b, SymbolPower::Half, mu, 12).unwrap();
                let one = WeylDn::build(&b, SymbolPower::One, mu, 12).unwrap();
                let twice = half.apply(&half.apply(&phi).unwrap()).unwrap();
                let full = one.apply(&phi).unwrap();
                let diff: f64 = twice
                    .values()
                    .iter()
                    .zip(full.values())
                    .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
                // Composition differences are measured prior to the 1/mu
                // scaling so successive halvings of mu contract them ~4x.
                diff * mu
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!(
            ratio > 2.5 && ratio < 6.5,
            "composition error ratio {ratio} (errors {errs:?})"
        );
    }

    #[test]
    fn half_power_lifts_only_the_lowest_modes() {
        let g = SpectralGrid::new_1d(128, 1000.0).unwrap();
        let b = Field::constant(&g, 9.0);
        let op = WeylDn::build(&b, SymbolPower::Half, 1.0, 4).unwrap();
        // A pure carrier well above the first wavenumber is an eigenvector
        // with the unregularized eigenvalue.
        let k0 = 20.0 * TAU / 1000.0;
        let phi = Field::from_fn(&g, |x, _| (k0 * x).cos());
        let out = op.apply(&phi).unwrap();
        let lam = (k0 * (9.0 * k0).tanh()).sqrt();
        for (o, p) in out.values().iter().zip(phi.values()) {
            assert_relative_eq!(*o, lam * p, epsilon = 1e-12, max_relative = 1e-11);
        }
        // The mean component maps to the lifted (positive) value, not zero.
        let ones = Field::constant(&g, 1.0);
        let lifted = op.apply(&ones).unwrap();
        let k1 = TAU / 1000.0;
        let expect = (k1 * (9.0 * k1).tanh()).sqrt();
        assert_relative_eq!(lifted.values()[0], expect, max_relative = 1e-12);
    }

    #[test]
    fn positive_semidefinite_in_practice() {
        let g = SpectralGrid::new_1d(256, 1500.0).unwrap();
        let b = Field::from_fn(&g, |x, _| 18.0 - 7.0 * (TAU * x / 1500.0).sin());
        let op = WeylDn::build(&b, SymbolPower::One, 1.0, 14).unwrap();
        for seed in 0..20u64 {
            let u = smooth_random_field(&g, 400 + seed, 25);
            let q = u.inner(&op.apply(&u).unwrap()).unwrap();
            let scale = u.inner(&u).unwrap();
            assert!(q > -1e-12 * scale, "negative quadratic form {q:e}");
        }
    }

    #[test]
    fn energy_scale_sanity() {
        // sigma^2/g equals the flat DN eigenvalue at the same wavenumber.
        let k0 = TAU / 40.0;
        let s = crate::physics::sigma(STANDARD_GRAVITY, k0, 9.0);
        let lam = k0 * (9.0 * k0).tanh();
        assert_relative_eq!(s * s / STANDARD_GRAVITY, lam, max_relative = 1e-12);
    }
}

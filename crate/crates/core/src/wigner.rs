//! Phase-space analysis of the complex energy variable.
//!
//! The surface state is folded into a single complex field
//! `psi = sqrt(g) eta + i G^{1/2} phi` (with `G^{1/2}` the half-power surface
//! operator), whose discrete Wigner distribution
//!
//! `W(x, k) = (1 / 2 pi mu) Int e^{-i Y k / mu} psi(x + Y/2) conj(psi)(x - Y/2) dY`
//!
//! localizes the wave energy jointly in position and wavenumber. The module
//! provides the transform on 1D grids (trapezoid rule over a truncated
//! correlation window, half-offset samples from the grid's periodic
//! interpolant), marginal reductions, binary export, and peak tracking across
//! a sequence of frames so the phase-space maximum can be compared with a ray
//! trajectory.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::dn::{SymbolPower, WeylDn};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpectralGrid};
use crate::io;
use crate::par;
use crate::solver::WaveState;

/// Largest tolerated out-of-window correlation magnitude (relative to the
/// squared signal peak) before a frame is flagged as under-covered.
pub const COVERAGE_TOL: f64 = 1e-6;

/// One Wigner frame: a real table over (grid nodes) x (wavenumber bins).
///
/// Values are stored row-major with the wavenumber index fastest, i.e.
/// `value(ix, ik) = values[ix * nk + ik]`. Wavenumber bins are the grid's
/// Fourier lattice sorted ascending from `-k_nyquist`.
pub struct WignerGrid {
    grid: Arc<SpectralGrid>,
    /// Frame time stamp (carried through to peak tracks).
    pub t: f64,
    ks: Vec<f64>,
    values: Vec<f64>,
    /// Effective correlation half-width (requested width snapped down to a
    /// whole number of grid steps).
    pub y_max: f64,
    /// Semiclassical scale of the transform.
    pub mu: f64,
    /// Largest imaginary part left after taking the real part (absolute, same
    /// scale as the stored values).
    pub im_residue: f64,
    /// Worst correlation magnitude `|psi(x + Y/2) conj(psi)(x - Y/2)|` found
    /// beyond the window (`y_max < |Y| <= L/2`) over all centers, relative to
    /// the squared signal peak; the truncated transform is only trusted when
    /// this is below [`COVERAGE_TOL`]. Lags past `L/2` are the antipodal
    /// center's short lags on a periodic domain and are not charged here.
    pub coverage_defect: f64,
}

impl WignerGrid {
    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn nx(&self) -> usize {
        self.grid.n(0)
    }

    pub fn nk(&self) -> usize {
        self.ks.len()
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx(0)
    }

    /// Position of the `ix`-th evaluation center.
    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.dx()
    }

    /// Ascending wavenumber bins.
    pub fn ks(&self) -> &[f64] {
        &self.ks
    }

    pub fn value(&self, ix: usize, ik: usize) -> f64 {
        self.values[ix * self.ks.len() + ik]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Whether the signal was negligible outside every correlation window.
    pub fn coverage_ok(&self) -> bool {
        self.coverage_defect < COVERAGE_TOL
    }

    /// Wavenumber reduction `sum_k W(x, k) dk`; recovers `|psi(x)|^2` when the
    /// window covers the signal's correlation support.
    pub fn x_marginal(&self) -> Vec<f64> {
        let nk = self.ks.len();
        let dk = std::f64::consts::TAU / self.grid.len_axis(0);
        (0..self.nx())
            .map(|ix| self.values[ix * nk..(ix + 1) * nk].iter().sum::<f64>() * dk)
            .collect()
    }

    /// Position reduction `sum_x W(x, k) dx`; recovers the scaled spectral
    /// density `|psi_hat_mu(k)|^2`.
    pub fn k_marginal(&self) -> Vec<f64> {
        let nk = self.ks.len();
        let dx = self.dx();
        (0..nk)
            .map(|ik| {
                (0..self.nx()).map(|ix| self.values[ix * nk + ik]).sum::<f64>() * dx
            })
            .collect()
    }

    /// Writes the frame as two binary tables: the W values (counts
    /// `[nx, nk]`, spans `[L, k-span]`) and the wavenumber bins themselves
    /// (so external plotters recover the signed k axis exactly).
    pub fn write(&self, table_path: &Path, axes_path: &Path) -> Result<()> {
        let nk = self.ks.len();
        let k_span = self.ks[nk - 1] - self.ks[0];
        io::write_table(
            table_path,
            &[self.nx() as u64, nk as u64],
            &[self.grid.len_axis(0), k_span],
            &self.values,
        )?;
        io::write_table(axes_path, &[nk as u64], &[k_span], &self.ks)
    }
}

/// Builds the complex energy variable `psi = sqrt(g) eta + i G^{1/2} phi`.
///
/// `dn_sqrt` must be the half-power operator on the state's grid.
pub fn energy_variable(
    state: &WaveState,
    dn_sqrt: &WeylDn,
    gravity: f64,
) -> Result<ComplexField> {
    if !matches!(dn_sqrt.power(), SymbolPower::Half) {
        return Err(Error::InvalidParameter(
            "the energy variable needs the half-power surface operator".into(),
        ));
    }
    if !(gravity.is_finite() && gravity > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gravity must be positive, got {gravity}"
        )));
    }
    state.eta.grid().same_grid(dn_sqrt.grid())?;
    let im = dn_sqrt.apply(&state.phi)?;
    ComplexField::from_parts(&state.eta.scaled(gravity.sqrt()), &im)
}

/// Discrete Wigner transform of a 1D complex field (parallel over centers).
///
/// The correlation integral is truncated to `|Y| <= y_max` (snapped down to a
/// whole number of grid steps, must not exceed half the domain) and evaluated
/// with the trapezoid rule at spacing `dx`; half-offset samples come from the
/// grid's periodic interpolant. The real part is returned in the table; the
/// largest imaginary residue and the worst out-of-window correlation are
/// reported on the frame.
///
/// Because lags are sampled at the grid step, the table is periodic in the
/// wavenumber with period `mu * 2 pi / dx`: for `mu < 1` only bins with
/// `|k| < mu * pi / dx` are faithful and the outer bins replicate them.
pub fn wigner_transform(
    psi: &ComplexField,
    t: f64,
    y_max: f64,
    mu: f64,
) -> Result<WignerGrid> {
    wigner_impl(psi, t, y_max, mu, true)
}

/// Sequential twin of [`wigner_transform`] (benchmark baseline).
pub fn wigner_transform_seq(
    psi: &ComplexField,
    t: f64,
    y_max: f64,
    mu: f64,
) -> Result<WignerGrid> {
    wigner_impl(psi, t, y_max, mu, false)
}

fn wigner_impl(
    psi: &ComplexField,
    t: f64,
    y_max: f64,
    mu: f64,
    parallel: bool,
) -> Result<WignerGrid> {
    let grid = Arc::clone(psi.grid());
    if grid.dims() != 1 {
        return Err(Error::UnsupportedEnvironment(
            "the Wigner transform is implemented for 1D fields".into(),
        ));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let n = grid.total();
    let length = grid.len_axis(0);
    let dx = grid.dx(0);
    if !(y_max.is_finite() && y_max > 0.0 && y_max <= 0.5 * length) {
        return Err(Error::InvalidParameter(format!(
            "correlation half-width {y_max} must lie in (0, {}]",
            0.5 * length
        )));
    }
    let l_m = ((y_max / dx + 1e-12).floor() as usize).clamp(1, n / 2);
    let y_eff = l_m as f64 * dx;

    // The field on the half-step lattice: even entries are the node values,
    // odd entries come from the periodic interpolant, so every half-offset
    // pair (x + Y/2, x - Y/2) is an exact table lookup.
    let re = psi.re();
    let im = psi.im();
    let n2 = 2 * n;
    let psi_half: Vec<Complex64> = (0..n2)
        .map(|i| {
            if i % 2 == 0 {
                psi.values()[i / 2]
            } else {
                let x = i as f64 * 0.5 * dx;
                Complex64::new(re.interpolate([x, 0.0]), im.interpolate([x, 0.0]))
            }
        })
        .collect();

    // Wavenumber bins: the grid lattice sorted ascending from -k_nyquist.
    let dk = std::f64::consts::TAU / length;
    let half_n = (n / 2) as f64;
    let ks: Vec<f64> = (0..n).map(|j| (j as f64 - half_n) * dk).collect();

    // Per-bin rotation seeds for e^{-i Y k / mu} with Y = l dx walked
    // incrementally from l = -l_m.
    let seeds: Vec<(Complex64, Complex64)> = ks
        .iter()
        .map(|k| {
            let theta = dx * k / mu;
            (
                Complex64::from_polar(1.0, l_m as f64 * theta),
                Complex64::from_polar(1.0, -theta),
            )
        })
        .collect();

    let max_amp = psi.max_abs();
    let prefactor = dx / (std::f64::consts::TAU * mu);
    let n_prod = 2 * l_m + 1;

    let row = |j: usize| -> (Vec<f64>, f64, f64) {
        // Worst correlation magnitude beyond the window at this center; lags
        // in (l_m, n/2] cover every out-of-window pair whose short periodic
        // separation belongs to this center (negative lags are conjugates).
        let mut tail = 0.0f64;
        for l in (l_m + 1)..=(n / 2) {
            let p = psi_half[(2 * j + l) % n2].norm() * psi_half[(2 * j + n2 - l) % n2].norm();
            tail = tail.max(p);
        }
        // Correlation samples P_l = psi(x + l dx/2) conj(psi)(x - l dx/2).
        let prods: Vec<Complex64> = (0..n_prod)
            .map(|li| {
                let l = li as i64 - l_m as i64;
                let ip = ((2 * j) as i64 + l).rem_euclid(n2 as i64) as usize;
                let im_idx = ((2 * j) as i64 - l).rem_euclid(n2 as i64) as usize;
                psi_half[ip] * psi_half[im_idx].conj()
            })
            .collect();
        let mut w_row = vec![0.0f64; n];
        let mut im_max = 0.0f64;
        for (ik, (start, step)) in seeds.iter().enumerate() {
            let mut rot = *start;
            let mut acc = Complex64::default();
            for (li, p) in prods.iter().enumerate() {
                let w = if li == 0 || li == n_prod - 1 { 0.5 } else { 1.0 };
                acc += w * rot * p;
                rot *= *step;
            }
            let v = prefactor * acc;
            w_row[ik] = v.re;
            im_max = im_max.max(v.im.abs());
        }
        (w_row, im_max, tail)
    };

    let rows = if parallel { par::map_indexed(n, row) } else { par::map_indexed_seq(n, row) };

    let mut values = Vec::with_capacity(n * n);
    let mut im_residue = 0.0f64;
    let mut tail = 0.0f64;
    for (r, im_max, tl) in rows {
        values.extend_from_slice(&r);
        im_residue = im_residue.max(im_max);
        tail = tail.max(tl);
    }
    let coverage_defect = if max_amp > 0.0 { tail / (max_amp * max_amp) } else { 0.0 };

    Ok(WignerGrid {
        grid,
        t,
        ks,
        values,
        y_max: y_eff,
        mu,
        im_residue,
        coverage_defect,
    })
}

/// Location and height of the phase-space maximum of one frame.
#[derive(Clone, Copy, Debug)]
pub struct PhaseSpacePeak {
    pub t: f64,
    pub x: f64,
    pub k: f64,
    pub value: f64,
}

/// Tracks the table maximum of each frame, refined by a separable three-point
/// parabola on the 3x3 neighborhood (periodic in both axes). Exact ties go to
/// the smaller position, then the smaller wavenumber.
pub fn wigner_peak_track(frames: &[WignerGrid]) -> Result<Vec<PhaseSpacePeak>> {
    if frames.is_empty() {
        return Err(Error::InvalidParameter(
            "peak tracking needs at least one frame".into(),
        ));
    }
    frames.iter().map(track_one).collect()
}

fn track_one(frame: &WignerGrid) -> Result<PhaseSpacePeak> {
    let (nx, nk) = (frame.nx(), frame.nk());
    let mut best = f64::NEG_INFINITY;
    let (mut bx, mut bk) = (0usize, 0usize);
    for ix in 0..nx {
        for ik in 0..nk {
            let v = frame.value(ix, ik);
            if v > best {
                best = v;
                bx = ix;
                bk = ik;
            }
        }
    }
    if !(best > 0.0) {
        return Err(Error::Degenerate("all-zero phase-space frame".into()));
    }
    let wrap = |i: i64, len: usize| -> usize { i.rem_euclid(len as i64) as usize };
    // Sub-bin offset of the parabola vertex through (f-, f0, f+); zero when
    // the neighborhood is flat or not locally concave.
    let refine = |f_minus: f64, f0: f64, f_plus: f64| -> f64 {
        let denom = f_minus - 2.0 * f0 + f_plus;
        if denom < 0.0 {
            (0.5 * (f_minus - f_plus) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let off_x = refine(
        frame.value(wrap(bx as i64 - 1, nx), bk),
        best,
        frame.value(wrap(bx as i64 + 1, nx), bk),
    );
    let off_k = refine(
        frame.value(bx, wrap(bk as i64 - 1, nk)),
        best,
        frame.value(bx, wrap(bk as i64 + 1, nk)),
    );
    let dk = if nk > 1 { frame.ks[1] - frame.ks[0] } else { 0.0 };
    Ok(PhaseSpacePeak {
        t: frame.t,
        x: (bx as f64 + off_x) * frame.dx(),
        k: frame.ks[bk] + off_k * dk,
        value: best,
    })
}

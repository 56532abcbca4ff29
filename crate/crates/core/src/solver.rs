//! Time integration of the coupled surface system.
//!
//! State is the surface elevation and the surface trace of the wave
//! potential, advanced by classical RK4 on
//!
//! `d eta/dt = -div(U eta) + G phi - s(x) eta`
//! `d phi/dt = -U . grad phi - g eta - s(x) phi`
//!
//! where `G` is a DN operator from [`crate::dn`] and `s(x)` an optional
//! absorbing-layer damping rate. Derivatives are spectral; products are
//! pointwise in physical space. Also provides stability-bounded step sizes,
//! Gaussian wave-packet initial data (including exact single-branch traveling
//! packets), and the flat-bottom harmonic extension of the potential into the
//! bulk for velocity diagnostics.

use std::sync::Arc;

use crate::dn::{flat_apply, WeylDn};
use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::physics::{self, Branch};

/// Maximum allowed relative spectral tail for environment fields.
const TAIL_TOL: f64 = 1e-8;
/// Fraction of the Nyquist band treated as "tail" for smoothness checks.
const TAIL_FRAC: f64 = 0.8;

/// Surface wave state at one instant.
#[derive(Clone)]
pub struct WaveState {
    pub eta: Field,
    pub phi: Field,
    pub t: f64,
}

impl WaveState {
    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self { eta: Field::zeros(grid), phi: Field::zeros(grid), t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.is_finite() && self.phi.is_finite()
    }

    fn add_scaled(&self, de: &Field, dp: &Field, c: f64, dt_t: f64) -> Self {
        let mut eta = self.eta.clone();
        let mut phi = self.phi.clone();
        eta.axpy(c, de);
        phi.axpy(c, dp);
        Self { eta, phi, t: self.t + dt_t }
    }
}

/// Horizontal surface current; `uy` is required exactly on 2D grids.
#[derive(Clone)]
pub struct SurfaceCurrent {
    pub ux: Field,
    pub uy: Option<Field>,
}

impl SurfaceCurrent {
    pub fn still(grid: &Arc<SpectralGrid>) -> Self {
        let uy = if grid.dims() == 2 { Some(Field::zeros(grid)) } else { None };
        Self { ux: Field::zeros(grid), uy }
    }

    pub fn max_speed(&self) -> f64 {
        match &self.uy {
            None => self.ux.max_abs(),
            Some(uy) => self
                .ux
                .values()
                .iter()
                .zip(uy.values())
                .map(|(a, c)| a * a + c * c)
                .fold(0.0f64, f64::max)
                .sqrt(),
        }
    }
}

/// Depth-resolved background flow in the vertical plane (1D surface grids).
///
/// Implementations give the closed-form horizontal and vertical components;
/// the gradient entries default to centered finite differences and may be
/// overridden with analytic expressions.
pub trait BulkFlow: Send + Sync {
    fn horizontal(&self, x: f64, z: f64) -> f64;
    fn vertical(&self, x: f64, z: f64) -> f64;

    fn d_horizontal_dx(&self, x: f64, z: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (self.horizontal(x + h, z) - self.horizontal(x - h, z)) / (2.0 * h)
    }
    fn d_horizontal_dz(&self, x: f64, z: f64) -> f64 {
        let h = 1e-5 * (1.0 + z.abs());
        (self.horizontal(x, z + h) - self.horizontal(x, z - h)) / (2.0 * h)
    }
    fn d_vertical_dx(&self, x: f64, z: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (self.vertical(x + h, z) - self.vertical(x - h, z)) / (2.0 * h)
    }
    fn d_vertical_dz(&self, x: f64, z: f64) -> f64 {
        let h = 1e-5 * (1.0 + z.abs());
        (self.vertical(x, z + h) - self.vertical(x, z - h)) / (2.0 * h)
    }
}

/// Absorbing-layer shape: per-axis width fractions and a peak damping rate.
///
/// The damping rate ramps from the peak at the domain edges to zero at the
/// given fractional distance inside, with a cubic smoothstep (C1). A width of
/// zero disables the layer along that axis.
#[derive(Clone, Copy, Debug)]
pub struct SpongeProfile {
    pub width_frac: [f64; 2],
    pub rate: f64,
}

impl SpongeProfile {
    pub fn uniform(width_frac: f64, rate: f64) -> Self {
        Self { width_frac: [width_frac, width_frac], rate }
    }

    /// Damping-rate field on the grid.
    pub fn damping_field(&self, grid: &Arc<SpectralGrid>) -> Result<Field> {
        for (axis, w) in self.width_frac.iter().enumerate().take(grid.dims()) {
            if !(0.0..0.5).contains(w) {
                return Err(Error::InvalidParameter(format!(
                    "sponge width fraction on axis {axis} must be in [0, 0.5), got {w}"
                )));
            }
        }
        if self.rate < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sponge rate must be non-negative, got {}",
                self.rate
            )));
        }
        let ramp = |coord: f64, len: f64, frac: f64| -> f64 {
            if frac == 0.0 {
                return 0.0;
            }
            let w = frac * len;
            let d = coord.min(len - coord);
            if d >= w {
                0.0
            } else {
                let t = d / w;
                1.0 - (3.0 * t * t - 2.0 * t * t * t)
            }
        };
        let wx = self.width_frac[0];
        let wy = self.width_frac[1];
        let lx = grid.len_axis(0);
        let ly = if grid.dims() == 2 { grid.len_axis(1) } else { 0.0 };
        let rate = self.rate;
        Ok(Field::from_fn(grid, |x, y| {
            let rx = ramp(x, lx, wx);
            let ry = if ly > 0.0 { ramp(y, ly, wy) } else { 0.0 };
            rate * (rx + ry - rx * ry)
        }))
    }
}

/// Static background for a run: gravity, bathymetry, currents, damping.
pub struct Environment {
    grid: Arc<SpectralGrid>,
    pub gravity: f64,
    pub depth: Field,
    pub current: SurfaceCurrent,
    pub bulk: Option<Arc<dyn BulkFlow>>,
    damping: Option<Field>,
}

impl Environment {
    /// Validates field consistency: one grid, positive depth, spectrally
    /// smooth currents, and (when a bulk flow is given) a surface trace
    /// matching the surface current at every node.
    pub fn new(
        gravity: f64,
        depth: Field,
        current: SurfaceCurrent,
        bulk: Option<Arc<dyn BulkFlow>>,
        sponge: Option<SpongeProfile>,
    ) -> Result<Self> {
        if !(gravity.is_finite() && gravity > 0.0) {
            return Err(Error::InvalidParameter(format!("gravity must be positive, got {gravity}")));
        }
        let grid = Arc::clone(depth.grid());
        grid.same_grid(current.ux.grid())?;
        match (&current.uy, grid.dims()) {
            (None, 2) => {
                return Err(Error::InvalidParameter(
                    "2D environment needs both current components".into(),
                ))
            }
            (Some(uy), d) => {
                if d == 1 {
                    return Err(Error::InvalidParameter(
                        "1D environment takes a single current component".into(),
                    ));
                }
                grid.same_grid(uy.grid())?;
            }
            _ => {}
        }
        if depth.min() <= 0.0 {
            return Err(Error::NonPositiveDepth(depth.min()));
        }
        let tail = grid.spectral_tail(&current.ux, TAIL_FRAC);
        if tail > TAIL_TOL {
            return Err(Error::InvalidParameter(format!(
                "surface current is rough at grid resolution (spectral tail {tail:e})"
            )));
        }
        if let Some(uy) = &current.uy {
            let tail = grid.spectral_tail(uy, TAIL_FRAC);
            if tail > TAIL_TOL {
                return Err(Error::InvalidParameter(format!(
                    "surface current is rough at grid resolution (spectral tail {tail:e})"
                )));
            }
        }
        if let Some(flow) = &bulk {
            if grid.dims() != 1 {
                return Err(Error::UnsupportedEnvironment(
                    "bulk flow descriptors are for 1D surface grids".into(),
                ));
            }
            let xs = grid.coords(0);
            for (x, u) in xs.iter().zip(current.ux.values()) {
                let trace = flow.horizontal(*x, 0.0);
                if (trace - u).abs() > 1e-10 * (1.0 + u.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "bulk-flow surface trace {trace} disagrees with surface current {u} at x={x}"
                    )));
                }
            }
        }
        let damping = match sponge {
            Some(p) if p.rate > 0.0 => Some(p.damping_field(&grid)?),
            _ => None,
        };
        Ok(Self { grid, gravity, depth, current, bulk, damping })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn damping(&self) -> Option<&Field> {
        self.damping.as_ref()
    }
}

/// Right-hand side of the surface system.
pub fn rhs(state: &WaveState, env: &Environment, dn: &WeylDn) -> Result<(Field, Field)> {
    let grid = &env.grid;
    grid.same_grid(state.eta.grid())?;
    grid.same_grid(dn.grid())?;

    // d eta/dt = G phi - div(U eta) - s eta
    let mut deta = dn.apply(&state.phi)?;
    let flux_x = state.eta.zip_with(&env.current.ux, |e, u| e * u)?;
    let div = grid.spectral_derivative(&flux_x, 0, 1)?;
    deta.axpy(-1.0, &div);
    if let Some(uy) = &env.current.uy {
        let flux_y = state.eta.zip_with(uy, |e, u| e * u)?;
        let divy = grid.spectral_derivative(&flux_y, 1, 1)?;
        deta.axpy(-1.0, &divy);
    }

    // d phi/dt = -U . grad phi - g eta - s phi
    let gx = grid.spectral_derivative(&state.phi, 0, 1)?;
    let mut dphi = env.current.ux.zip_with(&gx, |u, d| -u * d)?;
    if let Some(uy) = &env.current.uy {
        let gy = grid.spectral_derivative(&state.phi, 1, 1)?;
        let adv_y = uy.zip_with(&gy, |u, d| u * d)?;
        dphi.axpy(-1.0, &adv_y);
    }
    dphi.axpy(-env.gravity, &state.eta);

    if let Some(s) = &env.damping {
        let de = state.eta.zip_with(s, |e, r| e * r)?;
        let dp = state.phi.zip_with(s, |p, r| p * r)?;
        deta.axpy(-1.0, &de);
        dphi.axpy(-1.0, &dp);
    }
    Ok((deta, dphi))
}

/// Linear-stability step bound: `safety * 2.8 / omega_max`, where 2.8 is the
/// RK4 imaginary-axis limit and omega_max the largest advective-plus-intrinsic
/// frequency on the grid.
pub fn cfl_dt(env: &Environment, grid: &Arc<SpectralGrid>, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::InvalidParameter(format!("safety must be in (0,1], got {safety}")));
    }
    env.grid.same_grid(grid)?;
    let kmax = grid.k_max();
    let omega_max =
        env.current.max_speed() * kmax + physics::sigma(env.gravity, kmax, env.depth.max());
    Ok(safety * 2.8 / omega_max)
}

/// One classical RK4 step; fails with an instability diagnostic on NaN/Inf.
pub fn step_rk4(state: &WaveState, env: &Environment, dn: &WeylDn, dt: f64) -> Result<WaveState> {
    let (k1e, k1p) = rhs(state, env, dn)?;
    let s2 = state.add_scaled(&k1e, &k1p, 0.5 * dt, 0.5 * dt);
    let (k2e, k2p) = rhs(&s2, env, dn)?;
    let s3 = state.add_scaled(&k2e, &k2p, 0.5 * dt, 0.5 * dt);
    let (k3e, k3p) = rhs(&s3, env, dn)?;
    let s4 = state.add_scaled(&k3e, &k3p, dt, dt);
    let (k4e, k4p) = rhs(&s4, env, dn)?;

    let sixth = dt / 6.0;
    let third = dt / 3.0;
    let mut eta = state.eta.clone();
    eta.axpy(sixth, &k1e);
    eta.axpy(third, &k2e);
    eta.axpy(third, &k3e);
    eta.axpy(sixth, &k4e);
    let mut phi = state.phi.clone();
    phi.axpy(sixth, &k1p);
    phi.axpy(third, &k2p);
    phi.axpy(third, &k3p);
    phi.axpy(sixth, &k4p);
    let next = WaveState { eta, phi, t: state.t + dt };
    if !next.is_finite() {
        return Err(Error::NumericalInstability { t: next.t });
    }
    Ok(next)
}

fn check_packet(grid: &Arc<SpectralGrid>, width: f64, carrier: f64) -> Result<()> {
    if width < 4.0 * grid.dx(0) {
        return Err(Error::InvalidParameter(format!(
            "packet width {width} under four grid spacings"
        )));
    }
    let nyq = std::f64::consts::PI / grid.dx(0);
    if !(carrier > 0.0 && carrier <= 0.5 * nyq) {
        return Err(Error::InvalidParameter(format!(
            "carrier {carrier} outside (0, Nyquist/2] = (0, {:.4}]",
            0.5 * nyq
        )));
    }
    Ok(())
}

/// Gaussian-envelope cosine packet in the elevation, zero potential.
pub fn packet_ic(
    grid: &Arc<SpectralGrid>,
    center: f64,
    width: f64,
    carrier: f64,
    amplitude: f64,
) -> Result<WaveState> {
    check_packet(grid, width, carrier)?;
    let eta = Field::from_fn(grid, |x, _| {
        let d = x - center;
        amplitude * (-d * d / (2.0 * width * width)).exp() * (carrier * d).cos()
    });
    Ok(WaveState { eta, phi: Field::zeros(grid), t: 0.0 })
}

/// 2D packet: per-axis Gaussian envelopes, carrier along the first axis.
pub fn packet_ic_2d(
    grid: &Arc<SpectralGrid>,
    center: [f64; 2],
    width: [f64; 2],
    carrier: f64,
    amplitude: f64,
) -> Result<WaveState> {
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid("2D packet needs a 2D grid".into()));
    }
    check_packet(grid, width[0], carrier)?;
    if width[1] < 4.0 * grid.dx(1) {
        return Err(Error::InvalidParameter(format!(
            "packet width {} under four grid spacings",
            width[1]
        )));
    }
    let eta = Field::from_fn(grid, |x, y| {
        let dx = x - center[0];
        let dy = y - center[1];
        amplitude
            * (-dx * dx / (2.0 * width[0] * width[0]) - dy * dy / (2.0 * width[1] * width[1])).exp()
            * (carrier * dx).cos()
    });
    Ok(WaveState { eta, phi: Field::zeros(grid), t: 0.0 })
}

/// Single-branch traveling packet over still water of constant depth: the
/// potential is paired mode-by-mode so the packet propagates in one direction
/// only (plus for rightward with positive carrier).
pub fn eigenmode_packet_ic(
    grid: &Arc<SpectralGrid>,
    center: f64,
    width: f64,
    carrier: f64,
    amplitude: f64,
    gravity: f64,
    depth: f64,
    branch: Branch,
) -> Result<WaveState> {
    if grid.dims() != 1 {
        return Err(Error::InvalidGrid("eigenmode packets are built on 1D grids".into()));
    }
    if depth <= 0.0 {
        return Err(Error::NonPositiveDepth(depth));
    }
    let base = packet_ic(grid, center, width, carrier, amplitude)?;
    let mut eta_spec = grid.forward(&base.eta);
    // The mean has no traveling counterpart; drop it so the state is a pure
    // single-branch superposition (and exactly equipartitioned).
    eta_spec.values_mut()[0] = num_complex::Complex64::new(0.0, 0.0);
    let mut spec = eta_spec.clone();
    let k = grid.wavenumbers(0).to_vec();
    for (i, v) in spec.values_mut().iter_mut().enumerate() {
        let kk = k[i];
        if kk == 0.0 {
            *v = num_complex::Complex64::new(0.0, 0.0);
            continue;
        }
        // phi_hat = g/(i omega) eta_hat with omega = sign * sigma(|k|) sign(k).
        let omega = branch.sign() * kk.signum() * physics::sigma(gravity, kk, depth);
        *v *= num_complex::Complex64::new(0.0, -gravity / omega);
    }
    let eta = grid.inverse_real(&eta_spec);
    let phi = grid.inverse_real(&spec);
    Ok(WaveState { eta, phi, t: 0.0 })
}

/// 2D single-branch packet: modes are paired by the sign of their first-axis
/// wavenumber, so the packet travels along the carrier axis only (plus branch
/// rightward for a positive carrier). Modes with a zero first-axis wavenumber
/// have no traveling counterpart in this split and are dropped from both
/// fields. The pairing uses the still-water dispersion at the reference
/// depth, so over gentle media a small counter-propagating residue remains.
pub fn eigenmode_packet_ic_2d(
    grid: &Arc<SpectralGrid>,
    center: [f64; 2],
    width: [f64; 2],
    carrier: f64,
    amplitude: f64,
    gravity: f64,
    depth: f64,
    branch: Branch,
) -> Result<WaveState> {
    if grid.dims() != 2 {
        return Err(Error::InvalidGrid("2D eigenmode packets need a 2D grid".into()));
    }
    if depth <= 0.0 {
        return Err(Error::NonPositiveDepth(depth));
    }
    let base = packet_ic_2d(grid, center, width, carrier, amplitude)?;
    let mut eta_spec = grid.forward(&base.eta);
    let mut spec = eta_spec.clone();
    for i in 0..grid.total() {
        let k = grid.k_at(i);
        if k[0] == 0.0 {
            eta_spec.values_mut()[i] = num_complex::Complex64::new(0.0, 0.0);
            spec.values_mut()[i] = num_complex::Complex64::new(0.0, 0.0);
            continue;
        }
        let kap = k[0].hypot(k[1]);
        let omega = branch.sign() * k[0].signum() * physics::sigma(gravity, kap, depth);
        spec.values_mut()[i] *= num_complex::Complex64::new(0.0, -gravity / omega);
    }
    let eta = grid.inverse_real(&eta_spec);
    let phi = grid.inverse_real(&spec);
    Ok(WaveState { eta, phi, t: 0.0 })
}

/// Flat-bottom harmonic extension of the surface potential: horizontal and
/// vertical velocity fields at each requested depth level in `[-b0, 0]`.
pub fn harmonic_extension(
    phi: &Field,
    b0: f64,
    z_levels: &[f64],
) -> Result<Vec<(Field, Field)>> {
    let grid = phi.grid();
    if grid.dims() != 1 {
        return Err(Error::UnsupportedEnvironment(
            "harmonic extension is implemented for 1D surface grids".into(),
        ));
    }
    if b0 <= 0.0 {
        return Err(Error::NonPositiveDepth(b0));
    }
    for z in z_levels {
        if !(-b0..=0.0).contains(z) {
            return Err(Error::InvalidParameter(format!(
                "extension level {z} outside [-{b0}, 0]"
            )));
        }
    }
    let k = grid.wavenumbers(0).to_vec();
    let mut out = Vec::with_capacity(z_levels.len());
    for &z in z_levels {
        // cosh(k(z+b))/cosh(kb) and k sinh(k(z+b))/cosh(kb), computed in the
        // overflow-safe exponential form (z <= 0 keeps every factor <= 1).
        let mut u_table = vec![0.0; grid.total()];
        let mut w_table = vec![0.0; grid.total()];
        for (i, kk) in k.iter().enumerate() {
            let kap = kk.abs();
            let denom = 1.0 + (-2.0 * kap * b0).exp();
            let grow = (kap * z).exp();
            let cosh_ratio = grow * (1.0 + (-2.0 * kap * (z + b0)).exp()) / denom;
            let sinh_ratio = grow * (1.0 - (-2.0 * kap * (z + b0)).exp()) / denom;
            u_table[i] = cosh_ratio;
            w_table[i] = kap * sinh_ratio;
        }
        let in_bulk = grid.apply_multiplier(phi, &u_table)?;
        let u = grid.spectral_derivative(&in_bulk, 0, 1)?;
        let w = grid.apply_multiplier(phi, &w_table)?;
        out.push((u, w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dn::SymbolPower;
    use crate::physics::STANDARD_GRAVITY;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    const G: f64 = STANDARD_GRAVITY;

    fn flat_env(grid: &Arc<SpectralGrid>, depth: f64) -> Environment {
        Environment::new(
            G,
            Field::constant(grid, depth),
            SurfaceCurrent::still(grid),
            None,
            None,
        )
        .unwrap()
    }

    fn flat_dn(env: &Environment) -> WeylDn {
        WeylDn::build(&env.depth, SymbolPower::One, 1.0, 8).unwrap()
    }

    fn total_energy(state: &WaveState, env: &Environment, dn: &WeylDn) -> f64 {
        // (1/2) integral of g eta^2 + phi G phi; adequate for conservation
        // tests without pulling in the diagnostics module.
        let ge = state.eta.inner(&state.eta).unwrap() * env.gravity;
        let pg = state.phi.inner(&dn.apply(&state.phi).unwrap()).unwrap();
        0.5 * (ge + pg)
    }

    #[test]
    fn zero_state_is_an_equilibrium() {
        let g = SpectralGrid::new_1d(64, 100.0).unwrap();
        let env = flat_env(&g, 5.0);
        let dn = flat_dn(&env);
        let s = WaveState::zeros(&g);
        let (de, dp) = rhs(&s, &env, &dn).unwrap();
        assert_eq!(de.max_abs(), 0.0);
        assert_eq!(dp.max_abs(), 0.0);
        let s1 = step_rk4(&s, &env, &dn, 0.1).unwrap();
        assert_eq!(s1.eta.max_abs(), 0.0);
        assert_relative_eq!(s1.t, 0.1);
    }

    #[test]
    fn restoring_force_only_from_elevation() {
        let g = SpectralGrid::new_1d(128, 200.0).unwrap();
        let env = flat_env(&g, 7.0);
        let dn = flat_dn(&env);
        let k0 = 4.0 * TAU / 200.0;
        let s = WaveState {
            eta: Field::from_fn(&g, |x, _| (k0 * x).cos()),
            phi: Field::zeros(&g),
            t: 0.0,
        };
        let (de, dp) = rhs(&s, &env, &dn).unwrap();
        assert!(de.max_abs() < 1e-14);
        for (d, e) in dp.values().iter().zip(s.eta.values()) {
            assert_relative_eq!(*d, -G * e, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenmode_rhs_rotates_at_the_dispersion_frequency() {
        let g = SpectralGrid::new_1d(128, 200.0).unwrap();
        let env = flat_env(&g, 7.0);
        let dn = flat_dn(&env);
        let k0 = 5.0 * TAU / 200.0;
        let om = physics::sigma(G, k0, 7.0);
        let eta = Field::from_fn(&g, |x, _| (k0 * x).cos());
        let phi = Field::from_fn(&g, |x, _| (G / om) * (k0 * x).sin());
        let s = WaveState { eta: eta.clone(), phi, t: 0.0 };
        let (de, dp) = rhs(&s, &env, &dn).unwrap();
        // Right-mover: d/dt cos(kx - om t) at t=0 is om sin(kx).
        let expect_de = Field::from_fn(&g, |x, _| om * (k0 * x).sin());
        let expect_dp = eta.scaled(-G);
        let err_e = de
            .values()
            .iter()
            .zip(expect_de.values())
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        let err_p = dp
            .values()
            .iter()
            .zip(expect_dp.values())
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        assert!(err_e < 1e-10, "elevation residual {err_e:e}");
        assert!(err_p < 1e-10, "potential residual {err_p:e}");
    }

    #[test]
    fn cfl_bound_scales_as_documented() {
        let g1 = SpectralGrid::new_1d(1024, 2000.0).unwrap();
        let env1 = flat_env(&g1, 9.0);
        let kmax = std::f64::consts::PI * 1024.0 / 2000.0;
        let dt = cfl_dt(&env1, &g1, 1.0).unwrap();
        assert_relative_eq!(dt, 2.8 / physics::sigma(G, kmax, 9.0), max_relative = 1e-12);
        assert_relative_eq!(cfl_dt(&env1, &g1, 0.5).unwrap(), 0.5 * dt, max_relative = 1e-12);
        let g2 = SpectralGrid::new_1d(2048, 2000.0).unwrap();
        let env2 = flat_env(&g2, 9.0);
        assert!(cfl_dt(&env2, &g2, 1.0).unwrap() < dt);
        assert!(cfl_dt(&env1, &g1, 0.0).is_err());
    }

    #[test]
    fn single_mode_returns_after_one_period() {
        let l = 200.0;
        let g = SpectralGrid::new_1d(128, l).unwrap();
        let env = flat_env(&g, 7.0);
        let dn = flat_dn(&env);
        let k0 = 5.0 * TAU / l;
        let om = physics::sigma(G, k0, 7.0);
        let s0 = WaveState {
            eta: Field::from_fn(&g, |x, _| (k0 * x).cos()),
            phi: Field::from_fn(&g, |x, _| (G / om) * (k0 * x).sin()),
            t: 0.0,
        };
        let period = TAU / om;
        let steps = 400;
        let dt = period / steps as f64;
        let mut s = s0.clone();
        for _ in 0..steps {
            s = step_rk4(&s, &env, &dn, dt).unwrap();
        }
        let scale = s0.eta.max_abs();
        let err = s
            .eta
            .values()
            .iter()
            .zip(s0.eta.values())
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        assert!(err / scale < 1e-8, "period-return error {:e}", err / scale);
    }

    #[test]
    fn halving_dt_cuts_error_sixteenfold() {
        let l = 200.0;
        let g = SpectralGrid::new_1d(64, l).unwrap();
        let env = flat_env(&g, 7.0);
        let dn = flat_dn(&env);
        let k0 = 5.0 * TAU / l;
        let om = physics::sigma(G, k0, 7.0);
        let s0 = WaveState {
            eta: Field::from_fn(&g, |x, _| (k0 * x).cos()),
            phi: Field::from_fn(&g, |x, _| (G / om) * (k0 * x).sin()),
            t: 0.0,
        };
        let t_final = TAU / om;
        let err_at = |steps: usize| -> f64 {
            let dt = t_final / steps as f64;
            let mut s = s0.clone();
            for _ in 0..steps {
                s = step_rk4(&s, &env, &dn, dt).unwrap();
            }
            s.eta
                .values()
                .iter()
                .zip(s0.eta.values())
                .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()))
        };
        let e1 = err_at(40);
        let e2 = err_at(80);
        let ratio = e1 / e2;
        assert!((11.0..22.0).contains(&ratio), "order-4 ratio {ratio} ({e1:e}/{e2:e})");
    }

    #[test]
    fn energy_conserved_without_current_or_sponge() {
        let l = 400.0;
        let g = SpectralGrid::new_1d(256, l).unwrap();
        let env = flat_env(&g, 9.0);
        let dn = flat_dn(&env);
        let s0 = eigenmode_packet_ic(
            &g,
            l / 2.0,
            0.05 * l,
            10.0 * TAU / l,
            0.4,
            G,
            9.0,
            Branch::Plus,
        )
        .unwrap();
        let dt = cfl_dt(&env, &g, 0.03).unwrap();
        let e0 = total_energy(&s0, &env, &dn);
        let mut s = s0;
        for _ in 0..1000 {
            s = step_rk4(&s, &env, &dn, dt).unwrap();
        }
        let e1 = total_energy(&s, &env, &dn);
        let drift = ((e1 - e0) / e0).abs();
        assert!(drift < 1e-8, "energy drift {drift:e} over 1000 steps");
    }

    #[test]
    fn reversible_over_a_round_trip() {
        let l = 400.0;
        let g = SpectralGrid::new_1d(128, l).unwrap();
        let env = flat_env(&g, 9.0);
        let dn = flat_dn(&env);
        let s0 = eigenmode_packet_ic(
            &g,
            l / 2.0,
            0.05 * l,
            8.0 * TAU / l,
            0.4,
            G,
            9.0,
            Branch::Plus,
        )
        .unwrap();
        let dt = cfl_dt(&env, &g, 0.03).unwrap();
        let mut s = s0.clone();
        for _ in 0..200 {
            s = step_rk4(&s, &env, &dn, dt).unwrap();
        }
        for _ in 0..200 {
            s = step_rk4(&s, &env, &dn, -dt).unwrap();
        }
        let scale = s0.eta.max_abs();
        let err = s
            .eta
            .values()
            .iter()
            .zip(s0.eta.values())
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()));
        assert!(err / scale < 1e-6, "round-trip error {:e}", err / scale);
    }

    #[test]
    fn sponge_absorbs_a_packet_monotonically() {
        let l = 400.0;
        let g = SpectralGrid::new_1d(256, l).unwrap();
        // Carrier wavelength 10 against a 40-wide layer: the ramp is slow on
        // the wave scale, which is what keeps the layer non-reflective.
        let k0 = 40.0 * TAU / l;
        let s_rate = 4.0 * physics::sigma(G, k0, 9.0);
        let env = Environment::new(
            G,
            Field::constant(&g, 9.0),
            SurfaceCurrent::still(&g),
            None,
            Some(SpongeProfile::uniform(0.1, s_rate)),
        )
        .unwrap();
        let dn = flat_dn(&env);
        // Right-mover launched just outside the right layer [360, 400].
        let width = 8.0;
        let s0 = eigenmode_packet_ic(&g, 330.0, width, k0, 0.4, G, 9.0, Branch::Plus)
            .unwrap();
        let e0 = total_energy(&s0, &env, &dn);
        let dt = cfl_dt(&env, &g, 0.05).unwrap();
        let cg = physics::group_speed(G, k0, 9.0);
        // Entry phase: run until the +-3 sigma envelope sits inside the layer.
        let t_inside = (360.0 + 3.0 * width - 330.0) / cg;
        let mut s = s0;
        while s.t < t_inside {
            s = step_rk4(&s, &env, &dn, dt).unwrap();
        }
        let mut last = total_energy(&s, &env, &dn);
        for block in 0..8 {
            for _ in 0..50 {
                s = step_rk4(&s, &env, &dn, dt).unwrap();
            }
            let e = total_energy(&s, &env, &dn);
            assert!(
                e <= last * (1.0 + 1e-10),
                "energy rose in block {block}: {e:e} after {last:e}"
            );
            last = e;
        }
        // Residual is the weak reflection off the ramp, stuck in the interior.
        assert!(last < 1e-3 * e0, "poor absorption: {last:e} of {e0:e}");
    }

    #[test]
    fn packet_spectrum_peaks_at_the_carrier() {
        let l = 2000.0;
        let g = SpectralGrid::new_1d(1024, l).unwrap();
        let k0 = 50.0 * TAU / l;
        let s = packet_ic(&g, l / 2.0, 0.04 * l, k0, 0.5).unwrap();
        assert_eq!(s.phi.max_abs(), 0.0);
        let spec = g.forward(&s.eta);
        let mags: Vec<f64> = spec.values().iter().map(|c| c.norm()).collect();
        let peak = (0..512).fold(0usize, |b, i| if mags[i] > mags[b] { i } else { b });
        assert_eq!(peak, 50);
        // Envelope halfwidth in spectral space ~ 1/width.
        let width = 0.04 * l;
        let half = (mags[50] / 2.0).max(1e-300);
        let dk = TAU / l;
        let mut hw = 0;
        for d in 1..100 {
            if mags[50 + d] < half {
                hw = d;
                break;
            }
        }
        let expect = (2.0 * (2.0f64).ln()).sqrt() / width / dk;
        assert!((hw as f64 - expect).abs() <= 1.5, "halfwidth {hw} vs {expect}");
    }

    #[test]
    fn packet_preconditions_are_enforced() {
        let g = SpectralGrid::new_1d(64, 100.0).unwrap();
        let nyq = std::f64::consts::PI / g.dx(0);
        assert!(packet_ic(&g, 50.0, 1.0, 1.0, 0.1).is_err());
        assert!(packet_ic(&g, 50.0, 20.0, 0.6 * nyq, 0.1).is_err());
        assert!(packet_ic(&g, 50.0, 20.0, 0.3 * nyq, 0.1).is_ok());
    }

    #[test]
    fn traveling_packet_moves_at_the_phase_speed() {
        let l = 400.0;
        let g = SpectralGrid::new_1d(256, l).unwrap();
        let env = flat_env(&g, 9.0);
        let dn = flat_dn(&env);
        let mode = 10;
        let k0 = mode as f64 * TAU / l;
        let om = physics::sigma(G, k0, 9.0);
        let s0 = eigenmode_packet_ic(&g, l / 2.0, 0.06 * l, k0, 0.4, G, 9.0, Branch::Plus)
            .unwrap();
        let periods = 10.0;
        let t_final = periods * TAU / om;
        let steps = 2000;
        let dt = t_final / steps as f64;
        let mut s = s0.clone();
        for _ in 0..steps {
            s = step_rk4(&s, &env, &dn, dt).unwrap();
        }
        // Phase advance of the carrier mode gives the crest speed.
        let p0 = g.forward(&s0.eta).values()[mode].arg();
        let p1 = g.forward(&s.eta).values()[mode].arg();
        let mut dphase = p0 - p1; // e^{i(kx - om t)}: phase falls at rate om
        let expected = om * t_final;
        while dphase < expected - std::f64::consts::PI {
            dphase += TAU;
        }
        let speed = dphase / (k0 * t_final);
        let exact = om / k0;
        assert_relative_eq!(speed, exact, max_relative = 5e-3);
    }

    #[test]
    fn bulk_trace_mismatch_is_rejected() {
        struct Uniform(f64);
        impl BulkFlow for Uniform {
            fn horizontal(&self, _x: f64, _z: f64) -> f64 {
                self.0
            }
            fn vertical(&self, _x: f64, _z: f64) -> f64 {
                0.0
            }
        }
        let g = SpectralGrid::new_1d(64, 100.0).unwrap();
        let ok = Environment::new(
            G,
            Field::constant(&g, 5.0),
            SurfaceCurrent { ux: Field::constant(&g, 0.7), uy: None },
            Some(Arc::new(Uniform(0.7))),
            None,
        );
        assert!(ok.is_ok());
        let bad = Environment::new(
            G,
            Field::constant(&g, 5.0),
            SurfaceCurrent { ux: Field::constant(&g, 0.7), uy: None },
            Some(Arc::new(Uniform(0.8))),
            None,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn rough_current_is_rejected() {
        let g = SpectralGrid::new_1d(128, 100.0).unwrap();
        // Sawtooth: discontinuous, spectral tail near the peak amplitude.
        let saw = Field::from_fn(&g, |x, _| x / 100.0 - 0.5);
        let r = Environment::new(G, Field::constant(&g, 5.0),
            SurfaceCurrent { ux: saw, uy: None }, None, None);
        assert!(r.is_err());
    }

    #[test]
    fn extension_recovers_surface_and_bottom_limits() {
        let l = 100.0;
        let g = SpectralGrid::new_1d(128, l).unwrap();
        let b0 = 6.0;
        let phi = Field::from_fn(&g, |x, _| (3.0 * TAU * x / l).cos() + 0.4 * (TAU * x / l).sin());
        let levels = [0.0, -b0];
        let ext = harmonic_extension(&phi, b0, &levels).unwrap();
        let u_surf = &ext[0].0;
        let w_surf = &ext[0].1;
        let dphi = g.spectral_derivative(&phi, 0, 1).unwrap();
        let wg = flat_apply(&phi, b0, 1.0).unwrap();
        for i in 0..g.total() {
            assert_relative_eq!(u_surf.values()[i], dphi.values()[i], epsilon = 1e-12);
            assert_relative_eq!(w_surf.values()[i], wg.values()[i], epsilon = 1e-12);
        }
        assert!(ext[1].1.max_abs() < 1e-14, "bottom flux {:e}", ext[1].1.max_abs());
    }

    #[test]
    fn extension_is_divergence_free() {
        let l = 100.0;
        let g = SpectralGrid::new_1d(128, l).unwrap();
        let b0 = 6.0;
        let phi = Field::from_fn(&g, |x, _| (3.0 * TAU * x / l).cos());
        let z = -2.0;
        let h = 1e-4;
        let ext = harmonic_extension(&phi, b0, &[z - h, z, z + h]).unwrap();
        let du = g.spectral_derivative(&ext[1].0, 0, 1).unwrap();
        for i in 0..g.total() {
            let dw = (ext[2].1.values()[i] - ext[0].1.values()[i]) / (2.0 * h);
            assert!((du.values()[i] + dw).abs() < 1e-6, "divergence {:e}", du.values()[i] + dw);
        }
        assert!(harmonic_extension(&phi, b0, &[-7.0]).is_err());
        assert!(harmonic_extension(&phi, -1.0, &[0.0]).is_err());
    }

    #[test]
    fn two_dimensional_eigenmode_packet_travels_one_way() {
        let (lx, ly) = (400.0, 200.0);
        let grid = SpectralGrid::new_2d(64, 32, lx, ly).unwrap();
        let depth = 9.0;
        let env = flat_env(&grid, depth);
        let k0 = 12.0 * TAU / lx;
        let s = eigenmode_packet_ic_2d(
            &grid,
            [0.3 * lx, 0.5 * ly],
            [0.075 * lx, 0.15 * ly],
            k0,
            0.3,
            G,
            depth,
            Branch::Plus,
        )
        .unwrap();
        // Every mode with a negative first-axis wavenumber carries (near)
        // zero energy: check through the spectrum of sqrt(g) eta + i phi-part
        // pairing, i.e. eta_hat and the implied omega sign agree everywhere.
        let dn = WeylDn::build(&env.depth, SymbolPower::One, 1.0, 8).unwrap();
        let e_tot = crate::diagnostics::total_energy(&s, G, &dn).unwrap();
        assert!(e_tot > 0.0);
        // Propagate and watch the energy centroid advance at the group speed.
        let dt = cfl_dt(&env, &grid, 0.5).unwrap();
        let steps = 20;
        let mut st = s.clone();
        for _ in 0..steps {
            st = step_rk4(&st, &env, &dn, dt).unwrap();
        }
        let centroid = |w: &WaveState| -> f64 {
            let e = crate::diagnostics::energy_density(w, G, &dn).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..grid.total() {
                let x = (i % grid.n(0)) as f64 * grid.dx(0);
                num += x * e.values()[i];
                den += e.values()[i];
            }
            num / den
        };
        let x0 = centroid(&s);
        let x1 = centroid(&st);
        let cg = physics::group_speed(G, k0, depth);
        let expect = cg * dt * steps as f64;
        assert!(
            ((x1 - x0) - expect).abs() < 2.0 * grid.dx(0),
            "centroid moved {} vs group {}",
            x1 - x0,
            expect
        );
        // A rightward packet keeps its energy: no counter-propagating half
        // heads left (drift would halve if it did).
        assert!(x1 > x0 + 0.5 * expect);
        // At this stability-limited step the RK4 amplitude factor eats
        // O((sigma dt)^6 / 72) energy per step; only gross loss is ruled out
        // here (fine-step conservation is asserted in the diagnostics suite).
        let e_after = crate::diagnostics::total_energy(&st, G, &dn).unwrap();
        assert_relative_eq!(e_after, e_tot, max_relative = 5e-2);
        assert!(eigenmode_packet_ic_2d(
            &SpectralGrid::new_1d(64, lx).unwrap(),
            [0.3 * lx, 0.0],
            [30.0, 30.0],
            k0,
            0.3,
            G,
            depth,
            Branch::Plus
        )
        .is_err());
    }
}

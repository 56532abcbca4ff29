//! Steady wavenumber fields and wave-action transport in energy form.
//!
//! For a static background and a fixed absolute frequency `omega0`, the local
//! wavenumber solves the Doppler relation point by point. The phase-averaged
//! energy then obeys
//!
//! `dE/dt + div((U + C_g) E) = (E/sigma) (U + C_g) . grad sigma`
//!
//! and the action `A = E/sigma` is the conserved density. The transport step
//! integrates the energy form with spectral derivatives, RK4, and a
//! high-order exponential spectral filter against advective ringing.
//!
//! On 2D grids the carrier is restricted to a fixed unit direction
//! (`k(X) = k(X) dhat`), which turns the Doppler relation back into a scalar
//! root problem in the along-direction current and keeps the transport
//! coefficients closed-form.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::physics::{self, Branch};
use crate::solver::Environment;

/// Exponential filter exponent: `exp(-ALPHA (|k|/k_max)^ORDER)`.
const FILTER_ORDER: i32 = 36;
const FILTER_ALPHA: f64 = 36.0;

/// Per-point Doppler solve for the steady carrier wavenumber field (1D).
///
/// Marches across the grid warm-starting each Newton solve from the previous
/// node so the branch stays continuous. Blocking inside the domain surfaces
/// as the underlying no-root error.
pub fn steady_wavenumber_field(env: &Environment, omega0: f64, branch: Branch) -> Result<Field> {
    let grid = env.grid();
    if grid.dims() != 1 {
        return Err(Error::UnsupportedEnvironment(
            "steady wavenumber fields are built on 1D grids (2D needs an explicit carrier \
             direction; use steady_wavenumber_field_along)"
                .into(),
        ));
    }
    steady_wavenumber_field_along(env, omega0, branch, [1.0, 0.0])
}

/// Per-point Doppler solve with the carrier direction prescribed.
///
/// The wavenumber vector is `k(X) = k(X) dhat` for a fixed unit vector
/// `dhat`, so only the along-direction current `U . dhat` enters the scalar
/// root problem. Nodes are marched fast-axis-inner with warm starts, each
/// row seeded from the first node of the previous row, so the solved branch
/// stays continuous across the whole grid. Works on 1D grids when the
/// direction lies along the x axis.
pub fn steady_wavenumber_field_along(
    env: &Environment,
    omega0: f64,
    branch: Branch,
    direction: [f64; 2],
) -> Result<Field> {
    let grid = env.grid();
    let d = unit_direction(direction)?;
    if grid.dims() == 1 && d[1] != 0.0 {
        return Err(Error::InvalidParameter(
            "a 1D grid only supports carrier directions along the x axis".into(),
        ));
    }
    let kmax = grid.k_max();
    let ux = env.current.ux.values();
    let uy = env.current.uy.as_ref().map(|f| f.values());
    let depth = env.depth.values();
    let (rows, cols) = if grid.dims() == 1 { (1, grid.total()) } else { (grid.n(1), grid.n(0)) };
    let mut out = vec![0.0; grid.total()];
    let mut row_guess: Option<f64> = None;
    for r in 0..rows {
        let mut guess = row_guess;
        for c in 0..cols {
            let i = r * cols + c;
            let u = ux[i] * d[0] + uy.map_or(0.0, |v| v[i] * d[1]);
            let b = depth[i];
            let k = match guess {
                None => physics::solve_wavenumber(env.gravity, omega0, b, u, branch, kmax)?,
                Some(g) => {
                    physics::solve_wavenumber_warm(env.gravity, omega0, b, u, branch, kmax, g)?
                }
            };
            out[i] = k;
            guess = Some(k);
            if c == 0 {
                row_guess = Some(k);
            }
        }
    }
    Field::from_values(grid, out)
}

fn unit_direction(direction: [f64; 2]) -> Result<[f64; 2]> {
    let norm = direction[0].hypot(direction[1]);
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::InvalidParameter(
            "carrier direction must be a finite nonzero vector".into(),
        ));
    }
    Ok([direction[0] / norm, direction[1] / norm])
}

/// Energy field with its steady carrier and clip accounting.
#[derive(Clone)]
pub struct ActionField {
    pub energy: Field,
    pub k: Field,
    pub omega0: f64,
    /// Mass removed by clipping negative energy values, accumulated across
    /// steps (reported, never silently discarded).
    pub clipped_mass: f64,
}

impl ActionField {
    pub fn new(energy: Field, k: Field, omega0: f64) -> Result<Self> {
        energy.grid().same_grid(k.grid())?;
        Ok(Self { energy, k, omega0, clipped_mass: 0.0 })
    }

    /// Intrinsic frequency field `sigma(k(X), b(X))`.
    pub fn sigma_field(&self, env: &Environment) -> Result<Field> {
        env.grid().same_grid(self.k.grid())?;
        self.k.zip_with(&env.depth, |k, b| physics::sigma(env.gravity, k, b))
    }

    /// Action density `A = E / sigma`.
    pub fn action_density(&self, env: &Environment) -> Result<Field> {
        let sigma = self.sigma_field(env)?;
        self.energy.zip_with(&sigma, |e, s| e / s)
    }
}

/// Precomputed transport coefficients for one environment and carrier field.
pub struct ActionTransport {
    grid: Arc<SpectralGrid>,
    /// Group-line velocity `U + C_g dhat`, x component.
    velocity: Field,
    /// y component of the group-line velocity (2D grids only).
    velocity_y: Option<Field>,
    /// Relaxation coefficient `(V . grad sigma)/sigma`.
    growth: Field,
    filter: Vec<f64>,
    v_max: f64,
}

impl ActionTransport {
    pub fn new(env: &Environment, a: &ActionField) -> Result<Self> {
        if env.grid().dims() != 1 {
            return Err(Error::UnsupportedEnvironment(
                "plain action transport is 1D; 2D needs a carrier direction (new_along)".into(),
            ));
        }
        Self::new_along(env, a, [1.0, 0.0])
    }

    /// Transport coefficients for a carrier aligned with a fixed direction.
    ///
    /// The group line advects with `V = U + C_g dhat`; on 2D grids both flux
    /// components and both gradient terms of the relaxation coefficient are
    /// kept. Accepts 1D grids when the direction lies along the x axis.
    pub fn new_along(env: &Environment, a: &ActionField, direction: [f64; 2]) -> Result<Self> {
        let grid = Arc::clone(env.grid());
        grid.same_grid(a.energy.grid())?;
        let d = unit_direction(direction)?;
        if grid.dims() == 1 && d[1] != 0.0 {
            return Err(Error::InvalidParameter(
                "a 1D grid only supports carrier directions along the x axis".into(),
            ));
        }
        let cg = a.k.zip_with(&env.depth, |k, b| physics::group_speed(env.gravity, k, b))?;
        let mut velocity = env.current.ux.clone();
        velocity.axpy(d[0], &cg);
        let velocity_y = match env.current.uy.as_ref() {
            Some(uy) if grid.dims() == 2 => {
                let mut vy = uy.clone();
                vy.axpy(d[1], &cg);
                Some(vy)
            }
            _ => None,
        };
        let sigma = a.sigma_field(env)?;
        let dsigma = grid.spectral_derivative(&sigma, 0, 1)?;
        let mut growth = velocity.zip_with(&dsigma, |v, dv| v * dv)?;
        if let Some(vy) = &velocity_y {
            let dsigma_y = grid.spectral_derivative(&sigma, 1, 1)?;
            let cross = vy.zip_with(&dsigma_y, |v, dv| v * dv)?;
            growth.axpy(1.0, &cross);
        }
        let growth = growth.zip_with(&sigma, |vd, s| vd / s)?;
        let kmax = grid.k_max();
        let filter = grid.multiplier_from(|k| {
            let frac = (k[0] * k[0] + k[1] * k[1]).sqrt() / kmax;
            (-FILTER_ALPHA * frac.powi(FILTER_ORDER)).exp()
        });
        let v_max = match &velocity_y {
            None => velocity.max_abs(),
            Some(vy) => velocity
                .values()
                .iter()
                .zip(vy.values())
                .map(|(vx, vyv)| vx.hypot(*vyv))
                .fold(0.0f64, f64::max),
        };
        Ok(Self { grid, velocity, velocity_y, growth, filter, v_max })
    }

    pub fn velocity(&self) -> &Field {
        &self.velocity
    }

    pub fn velocity_y(&self) -> Option<&Field> {
        self.velocity_y.as_ref()
    }

    /// Largest stable step `0.8 min(dx) / max|V|`.
    pub fn max_dt(&self) -> f64 {
        let mut h = self.grid.dx(0);
        if self.grid.dims() == 2 {
            h = h.min(self.grid.dx(1));
        }
        0.8 * h / self.v_max
    }

    fn rhs(&self, e: &Field) -> Result<Field> {
        let flux = e.zip_with(&self.velocity, |ev, v| ev * v)?;
        let mut out = self.grid.spectral_derivative(&flux, 0, 1)?;
        if let Some(vy) = &self.velocity_y {
            let flux_y = e.zip_with(vy, |ev, v| ev * v)?;
            let div_y = self.grid.spectral_derivative(&flux_y, 1, 1)?;
            out.axpy(1.0, &div_y);
        }
        let src = e.zip_with(&self.growth, |ev, w| ev * w)?;
        out.axpy(-1.0, &src);
        // d e/dt = -div(flux) + source
        Ok(out.scaled(-1.0))
    }

    /// One RK4 step of the energy-form equation, followed by the spectral
    /// filter and a clip of (reported) negative mass.
    pub fn step(&self, a: &ActionField, dt: f64) -> Result<ActionField> {
        let bound = self.max_dt();
        if dt > bound {
            return Err(Error::CflViolation { dt, bound });
        }
        let e0 = &a.energy;
        let k1 = self.rhs(e0)?;
        let mut s = e0.clone();
        s.axpy(0.5 * dt, &k1);
        let k2 = self.rhs(&s)?;
        let mut s = e0.clone();
        s.axpy(0.5 * dt, &k2);
        let k3 = self.rhs(&s)?;
        let mut s = e0.clone();
        s.axpy(dt, &k3);
        let k4 = self.rhs(&s)?;
        let mut e = e0.clone();
        e.axpy(dt / 6.0, &k1);
        e.axpy(dt / 3.0, &k2);
        e.axpy(dt / 3.0, &k3);
        e.axpy(dt / 6.0, &k4);
        let mut e = self.grid.apply_multiplier(&e, &self.filter)?;
        let mut clipped = 0.0;
        for v in e.values_mut() {
            if *v < 0.0 {
                clipped += -*v;
                *v = 0.0;
            }
        }
        Ok(ActionField {
            energy: e,
            k: a.k.clone(),
            omega0: a.omega0,
            clipped_mass: a.clipped_mass + clipped * self.grid.dv(),
        })
    }
}

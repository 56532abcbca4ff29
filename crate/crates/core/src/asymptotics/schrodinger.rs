//! Linear Schrödinger envelope model: slow complex amplitude of a
//! carrier-modulated packet, with transport, relaxation, and dispersive
//! spreading through the curvature tensor of the intrinsic frequency.
//!
//! The amplitude obeys
//!
//! `dA/dt = -V.grad A - (div V / 2) A - (V.grad sigma / 2 sigma) A
//!          - (i mu / 2) div(D grad A)`,
//!
//! with `V = U + C_g` and `D = [d^2 sigma / dk_i dk_j] / 2`. In a constant
//! medium the exact solution operator is the Fourier multiplier
//! `exp(i(-k.V t + (mu t / 2) k^T D k))`, which conserves the L2 norm and
//! produces the `1/t` peak decay of a spreading packet in 2D.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field};
use crate::physics;
use crate::solver::Environment;

/// Complex envelope and its clock.
#[derive(Clone)]
pub struct SchrodingerState {
    pub amp: ComplexField,
    pub t: f64,
}

impl SchrodingerState {
    pub fn new(amp: ComplexField) -> Self {
        Self { amp, t: 0.0 }
    }

    /// Discrete L2 norm (squared) of the amplitude.
    pub fn l2_sq(&self) -> f64 {
        self.amp.norm_sq()
    }
}

/// Pointwise product of a complex field with a real coefficient field.
fn cr_mul(c: &ComplexField, r: &Field) -> Result<ComplexField> {
    c.grid().same_grid(r.grid())?;
    let data = c
        .values()
        .iter()
        .zip(r.values())
        .map(|(cv, rv)| cv * rv)
        .collect();
    ComplexField::from_values(c.grid(), data)
}

/// Exact constant-medium propagator applied in Fourier space.
///
/// `d` is the full curvature tensor; on 1D grids only `d[0][0]` is read and
/// must be nonzero, on 2D grids `det d` must be nonzero. `mu` scales the
/// dispersive term exactly as in the evolution equation; `mu = 1` gives the
/// plain anisotropic propagator.
pub fn schrodinger_kernel(
    a0: &ComplexField,
    v: [f64; 2],
    d: [[f64; 2]; 2],
    mu: f64,
    t: f64,
) -> Result<ComplexField> {
    let grid = a0.grid();
    if grid.dims() == 1 {
        if d[0][0] == 0.0 {
            return Err(Error::Degenerate(
                "dispersionless 1D kernel (d[0][0] = 0)".into(),
            ));
        }
    } else {
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        if det == 0.0 {
            return Err(Error::Degenerate("singular curvature tensor".into()));
        }
    }
    let mut spec = grid.forward_c(a0);
    for (i, val) in spec.values_mut().iter_mut().enumerate() {
        let k = grid.k_at(i);
        let quad = d[0][0] * k[0] * k[0]
            + (d[0][1] + d[1][0]) * k[0] * k[1]
            + d[1][1] * k[1] * k[1];
        let phase = -(k[0] * v[0] + k[1] * v[1]) * t + 0.5 * mu * t * quad;
        *val *= Complex64::from_polar(1.0, phase);
    }
    Ok(grid.inverse_c(&spec))
}

/// Energy density carried by the envelope through the packet dictionary
/// `E = sigma^2 |A|^2 / (2g)` (a single-branch packet of surface-potential
/// amplitude `|A|` has elevation amplitude `sigma |A| / g`).
pub fn energy_density_from_amplitude(
    amp: &ComplexField,
    sigma: &Field,
    gravity: f64,
) -> Result<Field> {
    amp.grid().same_grid(sigma.grid())?;
    let data = amp
        .values()
        .iter()
        .zip(sigma.values())
        .map(|(a, s)| s * s * a.norm_sqr() / (2.0 * gravity))
        .collect();
    Field::from_values(amp.grid(), data)
}

/// Precomputed coefficients for stepping the envelope equation over a fixed
/// environment and carrier.
pub struct SchrodingerStepper {
    mu: f64,
    vx: Field,
    vy: Option<Field>,
    /// Zeroth-order coefficient `div V / 2 + (V . grad sigma) / (2 sigma)`.
    relax: Field,
    sigma: Field,
    dxx: Field,
    dxy: Option<Field>,
    dyy: Option<Field>,
    v_max: f64,
    d_max: f64,
}

impl SchrodingerStepper {
    /// 1D stepper over a steady carrier field `k(x)`.
    pub fn new_1d(env: &Environment, k: &Field, mu: f64) -> Result<Self> {
        let grid = env.grid();
        grid.same_grid(k.grid())?;
        if grid.dims() != 1 {
            return Err(Error::UnsupportedEnvironment(
                "1D stepper constructed on a 2D grid".into(),
            ));
        }
        if mu <= 0.0 {
            return Err(Error::Degenerate("dispersion scale mu must be positive".into()));
        }
        let g = env.gravity;
        let sigma = k.zip_with(&env.depth, |kv, bv| physics::sigma(g, kv, bv))?;
        let cg = k.zip_with(&env.depth, |kv, bv| physics::group_speed(g, kv, bv))?;
        let mut vx = env.current.ux.clone();
        vx.axpy(1.0, &cg);
        let div_v = grid.spectral_derivative(&vx, 0, 1)?;
        let dsigma = grid.spectral_derivative(&sigma, 0, 1)?;
        let growth = vx
            .zip_with(&dsigma, |v, d| v * d)?
            .zip_with(&sigma, |vd, s| vd / s)?;
        let mut relax = div_v;
        relax.axpy(1.0, &growth);
        let relax = relax.scaled(0.5);
        let dxx = k.zip_with(&env.depth, |kv, bv| physics::diffraction_1d(g, kv, bv))?;
        let v_max = vx.max_abs();
        let d_max = dxx.max_abs();
        Ok(Self {
            mu,
            vx,
            vy: None,
            relax,
            sigma,
            dxx,
            dxy: None,
            dyy: None,
            v_max,
            d_max,
        })
    }

    /// 2D stepper with a constant carrier vector `k0` (nearly unidirectional
    /// packets; the medium varies, the carrier direction does not).
    pub fn new_2d(env: &Environment, k0: [f64; 2], mu: f64) -> Result<Self> {
        let grid = env.grid();
        if grid.dims() != 2 {
            return Err(Error::UnsupportedEnvironment(
                "2D stepper constructed on a 1D grid".into(),
            ));
        }
        if mu <= 0.0 {
            return Err(Error::Degenerate("dispersion scale mu must be positive".into()));
        }
        let kappa = (k0[0] * k0[0] + k0[1] * k0[1]).sqrt();
        if kappa == 0.0 {
            return Err(Error::Degenerate("carrier wavenumber must be nonzero".into()));
        }
        let e = [k0[0] / kappa, k0[1] / kappa];
        let g = env.gravity;
        let sigma = env.depth.map(|b| physics::sigma(g, kappa, b));
        let cg = env.depth.map(|b| physics::group_speed(g, kappa, b));
        let mut vx = env.current.ux.clone();
        vx.axpy(e[0], &cg);
        let mut vy = env
            .current
            .uy
            .clone()
            .expect("2D environments carry a transverse current component");
        vy.axpy(e[1], &cg);
        let mut div_v = grid.spectral_derivative(&vx, 0, 1)?;
        div_v.axpy(1.0, &grid.spectral_derivative(&vy, 1, 1)?);
        let dsx = grid.spectral_derivative(&sigma, 0, 1)?;
        let dsy = grid.spectral_derivative(&sigma, 1, 1)?;
        let mut vgrad = vx.zip_with(&dsx, |v, d| v * d)?;
        vgrad.axpy(1.0, &vy.zip_with(&dsy, |v, d| v * d)?);
        let growth = vgrad.zip_with(&sigma, |vd, s| vd / s)?;
        let mut relax = div_v;
        relax.axpy(1.0, &growth);
        let relax = relax.scaled(0.5);
        let n = grid.total();
        let mut dxx = vec![0.0; n];
        let mut dxy = vec![0.0; n];
        let mut dyy = vec![0.0; n];
        for i in 0..n {
            let m = physics::diffraction_matrix(g, k0, env.depth.values()[i])?;
            dxx[i] = m[0][0];
            dxy[i] = m[0][1];
            dyy[i] = m[1][1];
        }
        let dxx = Field::from_values(grid, dxx)?;
        let dxy = Field::from_values(grid, dxy)?;
        let dyy = Field::from_values(grid, dyy)?;
        // Spectral norm of the symmetric 2x2 tensor, maximized over space.
        let mut d_max = 0.0f64;
        for i in 0..n {
            let (a, b, c) = (dxx.values()[i], dxy.values()[i], dyy.values()[i]);
            let mean = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            d_max = d_max.max((mean + disc).abs().max((mean - disc).abs()));
        }
        let v_max = vx
            .values()
            .iter()
            .zip(vy.values())
            .map(|(x, y)| (x * x + y * y).sqrt())
            .fold(0.0f64, f64::max);
        Ok(Self {
            mu,
            vx,
            vy: Some(vy),
            relax,
            sigma,
            dxx,
            dxy: Some(dxy),
            dyy: Some(dyy),
            v_max,
            d_max,
        })
    }

    /// Intrinsic frequency of the carrier over the medium.
    pub fn sigma_field(&self) -> &Field {
        &self.sigma
    }

    /// Step-size ceiling that triggers the CFL error:
    /// `0.8 min(dx / |V|_max, dx^2 / (mu ||D||_max))`.
    pub fn cfl_bound(&self) -> f64 {
        let grid = self.vx.grid();
        let dx = (0..grid.dims()).map(|a| grid.dx(a)).fold(f64::INFINITY, f64::min);
        let adv = if self.v_max > 0.0 { dx / self.v_max } else { f64::INFINITY };
        let dif = if self.d_max > 0.0 {
            dx * dx / (self.mu * self.d_max)
        } else {
            f64::INFINITY
        };
        0.8 * adv.min(dif)
    }

    /// Conservative stable step: the CFL ceiling capped by the classical
    /// RK4 imaginary-axis bound on the full advective + dispersive spectral
    /// radius (`|V| k_max + (mu/2) ||D|| k_max^2`).
    pub fn max_dt(&self) -> f64 {
        let kmax = self.vx.grid().k_max();
        let radius = self.v_max * kmax + 0.5 * self.mu * self.d_max * kmax * kmax;
        let stable = if radius > 0.0 { 2.8 / radius } else { f64::INFINITY };
        self.cfl_bound().min(stable)
    }

    fn rhs(&self, a: &ComplexField) -> Result<ComplexField> {
        let grid = a.grid();
        let ax = grid.spectral_derivative_c(a, 0, 1)?;
        let i_half_mu = Complex64::new(0.0, -0.5 * self.mu);
        let mut out;
        match (&self.vy, &self.dxy, &self.dyy) {
            (None, _, _) => {
                let flux = cr_mul(&ax, &self.dxx)?;
                out = grid.spectral_derivative_c(&flux, 0, 1)?;
                out = scale_c(&out, i_half_mu);
                out.axpy(Complex64::new(-1.0, 0.0), &cr_mul(&ax, &self.vx)?);
            }
            (Some(vy), Some(dxy), Some(dyy)) => {
                let ay = grid.spectral_derivative_c(a, 1, 1)?;
                let mut fx = cr_mul(&ax, &self.dxx)?;
                fx.axpy(Complex64::new(1.0, 0.0), &cr_mul(&ay, dxy)?);
                let mut fy = cr_mul(&ax, dxy)?;
                fy.axpy(Complex64::new(1.0, 0.0), &cr_mul(&ay, dyy)?);
                let mut diff = grid.spectral_derivative_c(&fx, 0, 1)?;
                diff.axpy(Complex64::new(1.0, 0.0), &grid.spectral_derivative_c(&fy, 1, 1)?);
                out = scale_c(&diff, i_half_mu);
                out.axpy(Complex64::new(-1.0, 0.0), &cr_mul(&ax, &self.vx)?);
                out.axpy(Complex64::new(-1.0, 0.0), &cr_mul(&ay, vy)?);
            }
            _ => unreachable!("2D stepper always carries all tensor components"),
        }
        out.axpy(Complex64::new(-1.0, 0.0), &cr_mul(a, &self.relax)?);
        Ok(out)
    }

    /// One RK4 step.
    pub fn step(&self, s: &SchrodingerState, dt: f64) -> Result<SchrodingerState> {
        let bound = self.cfl_bound();
        if dt > bound {
            return Err(Error::CflViolation { dt, bound });
        }
        let a0 = &s.amp;
        let k1 = self.rhs(a0)?;
        let mut w = a0.clone();
        w.axpy(Complex64::new(0.5 * dt, 0.0), &k1);
        let k2 = self.rhs(&w)?;
        let mut w = a0.clone();
        w.axpy(Complex64::new(0.5 * dt, 0.0), &k2);
        let k3 = self.rhs(&w)?;
        let mut w = a0.clone();
        w.axpy(Complex64::new(dt, 0.0), &k3);
        let k4 = self.rhs(&w)?;
        let mut a = a0.clone();
        a.axpy(Complex64::new(dt / 6.0, 0.0), &k1);
        a.axpy(Complex64::new(dt / 3.0, 0.0), &k2);
        a.axpy(Complex64::new(dt / 3.0, 0.0), &k3);
        a.axpy(Complex64::new(dt / 6.0, 0.0), &k4);
        Ok(SchrodingerState { amp: a, t: s.t + dt })
    }
}

fn scale_c(f: &ComplexField, s: Complex64) -> ComplexField {
    let data = f.values().iter().map(|v| v * s).collect();
    ComplexField::from_values(f.grid(), data).expect("same grid")
}

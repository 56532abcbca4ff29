//! Characteristic (ray) system of the slowly varying wave field.
//!
//! A ray carries position `X`, wavenumber `k`, and an action amplitude `A`
//! through the Doppler-shifted dispersion relation
//! `omega(X, k) = U(X) . k + sigma(|k|, b(X))`:
//!
//! `dX/dt = U + C_g k/|k|`, `dk/dt = -grad_X omega`,
//! `dA/dt = -(div(U + C_g)) A`.
//!
//! `omega` is exactly conserved along trajectories of the continuous system;
//! the RK4 integrator preserves it to its order, which the tests measure.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::io;
use crate::physics;
use crate::solver::Environment;

/// Point sample of the background seen by a ray.
pub trait RayMedium {
    fn gravity(&self) -> f64;
    fn depth(&self, x: [f64; 2]) -> f64;
    fn depth_grad(&self, x: [f64; 2]) -> [f64; 2];
    fn current(&self, x: [f64; 2]) -> [f64; 2];
    /// Jacobian entries `J[i][j] = d U_i / d x_j`.
    fn current_jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2];
}

/// Spatially uniform background: straight rays.
pub struct UniformMedium {
    pub gravity: f64,
    pub depth: f64,
    pub current: [f64; 2],
}

impl RayMedium for UniformMedium {
    fn gravity(&self) -> f64 {
        self.gravity
    }
    fn depth(&self, _x: [f64; 2]) -> f64 {
        self.depth
    }
    fn depth_grad(&self, _x: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
    fn current(&self, _x: [f64; 2]) -> [f64; 2] {
        self.current
    }
    fn current_jacobian(&self, _x: [f64; 2]) -> [[f64; 2]; 2] {
        [[0.0; 2]; 2]
    }
}

/// Background sampled from gridded fields by smooth interpolation, with
/// gradients precomputed spectrally.
pub struct GriddedMedium {
    grid: Arc<SpectralGrid>,
    gravity: f64,
    depth: Field,
    depth_dx: Field,
    depth_dy: Option<Field>,
    u: [Field; 2],
    // du[i][j] = d u_i / d x_j
    du: [[Option<Field>; 2]; 2],
}

impl GriddedMedium {
    pub fn new(env: &Environment) -> Result<Self> {
        let grid = Arc::clone(env.grid());
        let two_d = grid.dims() == 2;
        let depth_dx = grid.spectral_derivative(&env.depth, 0, 1)?;
        let depth_dy =
            if two_d { Some(grid.spectral_derivative(&env.depth, 1, 1)?) } else { None };
        let ux = env.current.ux.clone();
        let uy = match &env.current.uy {
            Some(f) => f.clone(),
            None => Field::zeros(&grid),
        };
        let du00 = Some(grid.spectral_derivative(&ux, 0, 1)?);
        let (du01, du10, du11) = if two_d {
            (
                Some(grid.spectral_derivative(&ux, 1, 1)?),
                Some(grid.spectral_derivative(&uy, 0, 1)?),
                Some(grid.spectral_derivative(&uy, 1, 1)?),
            )
        } else {
            (None, None, None)
        };
        Ok(Self {
            grid,
            gravity: env.gravity,
            depth: env.depth.clone(),
            depth_dx,
            depth_dy,
            u: [ux, uy],
            du: [[du00, du01], [du10, du11]],
        })
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }
}

impl RayMedium for GriddedMedium {
    fn gravity(&self) -> f64 {
        self.gravity
    }
    fn depth(&self, x: [f64; 2]) -> f64 {
        self.depth.interpolate(x)
    }
    fn depth_grad(&self, x: [f64; 2]) -> [f64; 2] {
        let gy = match &self.depth_dy {
            Some(f) => f.interpolate(x),
            None => 0.0,
        };
        [self.depth_dx.interpolate(x), gy]
    }
    fn current(&self, x: [f64; 2]) -> [f64; 2] {
        [self.u[0].interpolate(x), self.u[1].interpolate(x)]
    }
    fn current_jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let mut j = [[0.0; 2]; 2];
        for (i, row) in self.du.iter().enumerate() {
            for (jj, entry) in row.iter().enumerate() {
                if let Some(f) = entry {
                    j[i][jj] = f.interpolate(x);
                }
            }
        }
        j
    }
}

/// Instantaneous ray state.
#[derive(Clone, Copy, Debug)]
pub struct RayState {
    pub x: [f64; 2],
    pub k: [f64; 2],
    pub action: f64,
    pub t: f64,
}

/// Doppler-shifted frequency at the ray's phase-space point.
pub fn ray_omega(r: &RayState, medium: &dyn RayMedium) -> f64 {
    let kappa = (r.k[0] * r.k[0] + r.k[1] * r.k[1]).sqrt();
    let u = medium.current(r.x);
    u[0] * r.k[0] + u[1] * r.k[1] + physics::sigma(medium.gravity(), kappa, medium.depth(r.x))
}

/// Intrinsic frequency at the ray's phase-space point.
pub fn ray_sigma(r: &RayState, medium: &dyn RayMedium) -> f64 {
    let kappa = (r.k[0] * r.k[0] + r.k[1] * r.k[1]).sqrt();
    physics::sigma(medium.gravity(), kappa, medium.depth(r.x))
}

/// Group-line velocity `U + C_g k/|k|` at position `x` for a frozen `k`.
fn group_line_velocity(medium: &dyn RayMedium, x: [f64; 2], k: [f64; 2]) -> [f64; 2] {
    let kappa = (k[0] * k[0] + k[1] * k[1]).sqrt();
    let cg = physics::group_speed(medium.gravity(), kappa, medium.depth(x));
    let u = medium.current(x);
    [u[0] + cg * k[0] / kappa, u[1] + cg * k[1] / kappa]
}

/// Right-hand side of the ray system. The divergence driving the action uses
/// centered differences of the frozen-`k` group-line velocity over stencil
/// width `h`.
pub fn ray_rhs(
    r: &RayState,
    medium: &dyn RayMedium,
    h: f64,
) -> Result<([f64; 2], [f64; 2], f64)> {
    let kappa = (r.k[0] * r.k[0] + r.k[1] * r.k[1]).sqrt();
    if !(kappa > 1e-12) {
        return Err(Error::Degenerate(format!("ray wavenumber collapsed (|k| = {kappa:e})")));
    }
    let g = medium.gravity();
    let b = medium.depth(r.x);
    let dxdt = group_line_velocity(medium, r.x, r.k);

    let sig_b = physics::sigma_depth_derivative(g, kappa, b);
    let grad_b = medium.depth_grad(r.x);
    let jac = medium.current_jacobian(r.x);
    let mut dkdt = [0.0; 2];
    for i in 0..2 {
        // -d omega/d x_i = -(k . dU/dx_i + dsigma/db db/dx_i)
        let advect = r.k[0] * jac[0][i] + r.k[1] * jac[1][i];
        dkdt[i] = -(advect + sig_b * grad_b[i]);
    }

    let mut div = 0.0;
    for i in 0..2 {
        let mut xp = r.x;
        let mut xm = r.x;
        xp[i] += h;
        xm[i] -= h;
        let vp = group_line_velocity(medium, xp, r.k);
        let vm = group_line_velocity(medium, xm, r.k);
        div += (vp[i] - vm[i]) / (2.0 * h);
    }
    let dadt = -div * r.action;
    Ok((dxdt, dkdt, dadt))
}

/// Integration controls for [`ray_trace`].
#[derive(Clone, Copy, Debug)]
pub struct RayOptions {
    pub dt: f64,
    pub t_final: f64,
    /// Record every n-th step (the initial and final states always appear).
    pub sample_every: usize,
    /// Stencil width for the action divergence.
    pub fd_step: f64,
    /// Terminate when |k| falls below this.
    pub k_floor: f64,
    /// Optional [[xmin, xmax], [ymin, ymax]] bounds; leaving them ends the ray.
    pub domain: Option<[[f64; 2]; 2]>,
}

/// Why a traced ray stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RayTermination {
    Finished,
    ExitedDomain,
    WavenumberCollapse,
}

/// One recorded point along a ray.
#[derive(Clone, Copy, Debug)]
pub struct RaySample {
    pub t: f64,
    pub x: [f64; 2],
    pub k: [f64; 2],
    pub sigma: f64,
    pub action: f64,
    pub energy: f64,
}

/// A traced ray: samples plus the reason it stopped.
pub struct RayTrajectory {
    pub samples: Vec<RaySample>,
    pub termination: RayTermination,
}

impl RayTrajectory {
    /// CSV with columns `t, x, y, kx, ky, sigma, action, E`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .samples
            .iter()
            .map(|s| {
                vec![s.t, s.x[0], s.x[1], s.k[0], s.k[1], s.sigma, s.action, s.energy]
            })
            .collect();
        io::write_csv(path, &["t", "x", "y", "kx", "ky", "sigma", "action", "E"], &rows)
    }

    pub fn last(&self) -> &RaySample {
        self.samples.last().expect("trajectory holds at least the initial sample")
    }
}

fn sample_of(r: &RayState, medium: &dyn RayMedium) -> RaySample {
    let sigma = ray_sigma(r, medium);
    RaySample {
        t: r.t,
        x: r.x,
        k: r.k,
        sigma,
        action: r.action,
        energy: sigma * r.action,
    }
}

fn outside(x: [f64; 2], bounds: &[[f64; 2]; 2]) -> bool {
    x[0] < bounds[0][0] || x[0] > bounds[0][1] || x[1] < bounds[1][0] || x[1] > bounds[1][1]
}

/// RK4 integration of the ray system with sampling and termination handling.
pub fn ray_trace(r0: &RayState, medium: &dyn RayMedium, opts: &RayOptions) -> Result<RayTrajectory> {
    if !(opts.dt > 0.0 && opts.t_final > 0.0 && opts.fd_step > 0.0) {
        return Err(Error::InvalidParameter(
            "ray tracing needs positive dt, t_final, and fd_step".into(),
        ));
    }
    let every = opts.sample_every.max(1);
    let steps = (opts.t_final / opts.dt).ceil() as usize;
    let mut samples = Vec::with_capacity(steps / every + 2);
    let mut r = *r0;
    samples.push(sample_of(&r, medium));
    let mut termination = RayTermination::Finished;
    for step in 1..=steps {
        let next = match rk4_step(&r, medium, opts.dt, opts.fd_step) {
            Ok(n) => n,
            Err(Error::Degenerate(_)) => {
                termination = RayTermination::WavenumberCollapse;
                break;
            }
            Err(e) => return Err(e),
        };
        r = next;
        let kappa = (r.k[0] * r.k[0] + r.k[1] * r.k[1]).sqrt();
        if kappa < opts.k_floor {
            samples.push(sample_of(&r, medium));
            termination = RayTermination::WavenumberCollapse;
            break;
        }
        if let Some(bounds) = &opts.domain {
            if outside(r.x, bounds) {
                samples.push(sample_of(&r, medium));
                termination = RayTermination::ExitedDomain;
                break;
            }
        }
        if step % every == 0 || step == steps {
            samples.push(sample_of(&r, medium));
        }
    }
    Ok(RayTrajectory { samples, termination })
}

fn rk4_step(r: &RayState, medium: &dyn RayMedium, dt: f64, h: f64) -> Result<RayState> {
    let add = |r: &RayState, d: &([f64; 2], [f64; 2], f64), c: f64| RayState {
        x: [r.x[0] + c * d.0[0], r.x[1] + c * d.0[1]],
        k: [r.k[0] + c * d.1[0], r.k[1] + c * d.1[1]],
        action: r.action + c * d.2,
        t: r.t + c,
    };
    let k1 = ray_rhs(r, medium, h)?;
    let k2 = ray_rhs(&add(r, &k1, 0.5 * dt), medium, h)?;
    let k3 = ray_rhs(&add(r, &k2, 0.5 * dt), medium, h)?;
    let k4 = ray_rhs(&add(r, &k3, dt), medium, h)?;
    let comb = |i: usize| {
        (
            (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]) / 6.0,
            (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]) / 6.0,
        )
    };
    let (dx0, dk0) = comb(0);
    let (dx1, dk1) = comb(1);
    let da = (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) / 6.0;
    Ok(RayState {
        x: [r.x[0] + dt * dx0, r.x[1] + dt * dx1],
        k: [r.k[0] + dt * dk0, r.k[1] + dt * dk1],
        action: r.action + dt * da,
        t: r.t + dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::STANDARD_GRAVITY;
    use crate::solver::SurfaceCurrent;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    const G: f64 = STANDARD_GRAVITY;

    /// Quadratic opposing current over constant depth.
    struct OpposingJet {
        strength: f64,
        l: f64,
        depth: f64,
    }

    impl RayMedium for OpposingJet {
        fn gravity(&self) -> f64 {
            G
        }
        fn depth(&self, _x: [f64; 2]) -> f64 {
            self.depth
        }
        fn depth_grad(&self, _x: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
        fn current(&self, x: [f64; 2]) -> [f64; 2] {
            [-self.strength * x[0] * x[0] / (self.l * self.l), 0.0]
        }
        fn current_jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
            [[-2.0 * self.strength * x[0] / (self.l * self.l), 0.0], [0.0, 0.0]]
        }
    }

    #[test]
    fn uniform_medium_rays_run_straight() {
        let m = UniformMedium { gravity: G, depth: 12.0, current: [0.3, -0.1] };
        let k = [0.2, 0.05];
        let r0 = RayState { x: [10.0, 5.0], k, action: 1.0, t: 0.0 };
        let (dx, dk, da) = ray_rhs(&r0, &m, 0.5).unwrap();
        let kappa = (k[0] * k[0] + k[1] * k[1]).sqrt();
        let cg = physics::group_speed(G, kappa, 12.0);
        assert_relative_eq!(dx[0], 0.3 + cg * k[0] / kappa, epsilon = 1e-12);
        assert_relative_eq!(dx[1], -0.1 + cg * k[1] / kappa, epsilon = 1e-12);
        assert_eq!(dk, [0.0, 0.0]);
        assert_eq!(da, 0.0);

        let opts = RayOptions {
            dt: 0.5,
            t_final: 100.0,
            sample_every: 10,
            fd_step: 0.5,
            k_floor: 1e-9,
            domain: None,
        };
        let traj = ray_trace(&r0, &m, &opts).unwrap();
        assert_eq!(traj.termination, RayTermination::Finished);
        let end = traj.last();
        assert_relative_eq!(end.x[0], 10.0 + dx[0] * 100.0, max_relative = 1e-12);
        assert_relative_eq!(end.x[1], 5.0 + dx[1] * 100.0, max_relative = 1e-12);
        assert_relative_eq!(end.action, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn opposing_current_turns_the_ray_near_the_blocking_point() {
        let l = 2000.0;
        let m = OpposingJet { strength: 5.0, l, depth: 20.0 };
        let k0 = TAU / (l / 60.0);
        let r0 = RayState { x: [0.0, 0.0], k: [k0, 0.0], action: 1.0, t: 0.0 };
        let omega0 = ray_omega(&r0, &m);
        let opts = RayOptions {
            dt: 0.25,
            t_final: 1600.0,
            sample_every: 4,
            fd_step: 1.0,
            k_floor: 1e-9,
            domain: None,
        };
        let traj = ray_trace(&r0, &m, &opts).unwrap();
        assert_eq!(traj.termination, RayTermination::Finished);

        let mut x_max = f64::NEG_INFINITY;
        let mut omega_drift = 0.0f64;
        let mut e_max = f64::NEG_INFINITY;
        for s in &traj.samples {
            x_max = x_max.max(s.x[0]);
            e_max = e_max.max(s.energy);
            let r = RayState { x: s.x, k: s.k, action: s.action, t: s.t };
            omega_drift = omega_drift.max((ray_omega(&r, &m) - omega0).abs() / omega0);
        }
        // Stopping point of the Doppler relation for these parameters.
        assert!(
            (1178.0..1302.0).contains(&x_max),
            "turning point {x_max:.1} outside the expected window"
        );
        // The ray leaves the stopping region travelling backwards.
        let end = traj.last();
        assert!(end.x[0] < x_max - 200.0, "no backward branch: end {:.1} of {x_max:.1}", end.x[0]);
        assert!(end.k[0] > r0.k[0], "reflected branch should carry the larger wavenumber");
        // Hamiltonian conservation along the whole run.
        assert!(omega_drift < 1e-8, "omega drift {omega_drift:e}");
        // The transported energy amplifies near the stopping point.
        assert!(e_max > 2.0 * traj.samples[0].energy, "no amplification: {e_max:e}");
    }

    #[test]
    fn phase_space_volume_is_preserved_to_integrator_order() {
        let l = 2000.0;
        let m = OpposingJet { strength: 5.0, l, depth: 20.0 };
        let k0 = TAU / (l / 60.0);
        let base = RayState { x: [100.0, 0.0], k: [k0, 0.0], action: 1.0, t: 0.0 };
        let opts = RayOptions {
            dt: 0.25,
            t_final: 300.0,
            sample_every: 1_000_000,
            fd_step: 1.0,
            k_floor: 1e-9,
            domain: None,
        };
        let push = |x0: f64, kx0: f64| -> (f64, f64) {
            let r = RayState { x: [x0, 0.0], k: [kx0, 0.0], ..base };
            let end = *ray_trace(&r, &m, &opts).unwrap().last();
            (end.x[0], end.k[0])
        };
        let (dx, dk) = (1e-3, 1e-7);
        let (xp, kp) = push(base.x[0] + dx, base.k[0]);
        let (xm, km) = push(base.x[0] - dx, base.k[0]);
        let (xkp, kkp) = push(base.x[0], base.k[0] + dk);
        let (xkm, kkm) = push(base.x[0], base.k[0] - dk);
        let j00 = (xp - xm) / (2.0 * dx);
        let j10 = (kp - km) / (2.0 * dx);
        let j01 = (xkp - xkm) / (2.0 * dk);
        let j11 = (kkp - kkm) / (2.0 * dk);
        let det = j00 * j11 - j01 * j10;
        assert!((det - 1.0).abs() < 1e-5, "phase-space volume drift {det}");
    }

    #[test]
    fn gridded_medium_matches_its_analytic_source() {
        let l = 500.0;
        let n = 256;
        let grid = SpectralGrid::new_1d(n, l).unwrap();
        let b0 = 10.0;
        let db = 2.0;
        let u0 = 0.4;
        let depth = Field::from_fn(&grid, |x, _| b0 + db * (TAU * x / l).cos());
        let ux = Field::from_fn(&grid, |x, _| u0 * (2.0 * TAU * x / l).sin());
        let env = Environment::new(
            G,
            depth,
            SurfaceCurrent { ux, uy: None },
            None,
            None,
        )
        .unwrap();
        let m = GriddedMedium::new(&env).unwrap();
        for &x in &[37.3, 121.9, 342.11, 480.05] {
            let p = [x, 0.0];
            assert_relative_eq!(m.depth(p), b0 + db * (TAU * x / l).cos(), epsilon = 1e-8);
            assert_relative_eq!(
                m.depth_grad(p)[0],
                -db * (TAU / l) * (TAU * x / l).sin(),
                epsilon = 1e-8
            );
            assert_relative_eq!(m.current(p)[0], u0 * (2.0 * TAU * x / l).sin(), epsilon = 1e-8);
            assert_relative_eq!(
                m.current_jacobian(p)[0][0],
                u0 * (2.0 * TAU / l) * (2.0 * TAU * x / l).cos(),
                epsilon = 1e-8
            );
        }
        // A ray in the periodic gridded medium conserves omega as well.
        let r0 = RayState { x: [50.0, 0.0], k: [8.0 * TAU / l, 0.0], action: 1.0, t: 0.0 };
        let omega0 = ray_omega(&r0, &m);
        let opts = RayOptions {
            dt: 0.1,
            t_final: 60.0,
            sample_every: 20,
            fd_step: grid.dx(0),
            k_floor: 1e-9,
            domain: None,
        };
        let traj = ray_trace(&r0, &m, &opts).unwrap();
        for s in &traj.samples {
            let r = RayState { x: s.x, k: s.k, action: s.action, t: s.t };
            assert!(((ray_omega(&r, &m) - omega0) / omega0).abs() < 1e-8);
        }
    }

    #[test]
    fn termination_conditions_are_reported() {
        let m = UniformMedium { gravity: G, depth: 10.0, current: [0.0, 0.0] };
        let r0 = RayState { x: [0.0, 0.0], k: [0.2, 0.0], action: 1.0, t: 0.0 };
        let opts = RayOptions {
            dt: 0.5,
            t_final: 1000.0,
            sample_every: 10,
            fd_step: 0.5,
            k_floor: 1e-9,
            domain: Some([[-50.0, 50.0], [-50.0, 50.0]]),
        };
        let traj = ray_trace(&r0, &m, &opts).unwrap();
        assert_eq!(traj.termination, RayTermination::ExitedDomain);
        assert!(traj.last().x[0] > 50.0);

        let degenerate = RayState { x: [0.0, 0.0], k: [0.0, 0.0], action: 1.0, t: 0.0 };
        assert!(ray_rhs(&degenerate, &m, 0.5).is_err());
        let collapse_opts = RayOptions { k_floor: 0.3, domain: None, ..opts };
        let traj = ray_trace(&r0, &m, &collapse_opts).unwrap();
        assert_eq!(traj.termination, RayTermination::WavenumberCollapse);
    }

    #[test]
    fn trajectory_csv_layout() {
        let m = UniformMedium { gravity: G, depth: 10.0, current: [0.0, 0.0] };
        let r0 = RayState { x: [0.0, 0.0], k: [0.2, 0.0], action: 1.0, t: 0.0 };
        let opts = RayOptions {
            dt: 0.5,
            t_final: 5.0,
            sample_every: 2,
            fd_step: 0.5,
            k_floor: 1e-9,
            domain: None,
        };
        let traj = ray_trace(&r0, &m, &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ray.csv");
        traj.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x,y,kx,ky,sigma,action,E\n"));
        assert_eq!(text.lines().count(), traj.samples.len() + 1);
    }
}

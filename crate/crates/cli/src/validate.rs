//! Built-in property checks: a battery of small, deterministic numerical
//! experiments that exercise every component and report pass/fail with the
//! measured values. Used as a self-test (`wavecurrent validate`) and by the
//! fault-injection example (`--break-symmetry` perturbs one operator and the
//! symmetry check must then fail).

use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use wavecurrent::asymptotics::action::{steady_wavenumber_field, ActionField, ActionTransport};
use wavecurrent::asymptotics::mild_slope::{mild_slope_defect, MildSlopeProblem};
use wavecurrent::asymptotics::rays::{ray_trace, GriddedMedium, RayOptions, RayState};
use wavecurrent::asymptotics::schrodinger::{SchrodingerState, SchrodingerStepper};
use wavecurrent::diagnostics::{energy_density, total_energy};
use wavecurrent::dn::{SymbolPower, WeylDn};
use wavecurrent::grid::{ComplexField, Field, SpectralGrid};
use wavecurrent::physics::{self, Branch};
use wavecurrent::solver::{
    cfl_dt, packet_ic, step_rk4, Environment, SurfaceCurrent, WaveState,
};
use wavecurrent::wigner::{wigner_transform, COVERAGE_TOL};

#[derive(Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Serialize)]
pub struct ValidateReport {
    pub tool: String,
    pub quick: bool,
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

/// Deterministic generator for the randomized symmetry checks (SplitMix64).
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [-1, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0
    }
}

/// Band-limited random field: random spectrum over the lowest modes only, so
/// the samples are smooth and the operator symbol calculus is well resolved.
fn smooth_random_field(grid: &Arc<SpectralGrid>, rng: &mut SplitMix64, modes: usize) -> Field {
    let mut f = Field::zeros(grid);
    let dims = grid.dims();
    let nx = grid.n(0);
    let ny = if dims == 2 { grid.n(1) } else { 1 };
    let lx = grid.len_axis(0);
    let ly = if dims == 2 { grid.len_axis(1) } else { 1.0 };
    for m in 0..=modes {
        for mm in 0..=(if dims == 2 { modes } else { 0 }) {
            let (ax, bx) = (rng.next_f64(), rng.next_f64());
            let (ay, by) = (rng.next_f64(), rng.next_f64());
            let kx = m as f64 * TAU / lx;
            let ky = mm as f64 * TAU / ly;
            for iy in 0..ny {
                let y = iy as f64 * grid.dx(1.min(dims - 1));
                for ix in 0..nx {
                    let x = ix as f64 * grid.dx(0);
                    let cx = ax * (kx * x).cos() + bx * (kx * x).sin();
                    let cy = if dims == 2 {
                        ay * (ky * y).cos() + by * (ky * y).sin()
                    } else {
                        1.0
                    };
                    f.values_mut()[iy * nx + ix] += cx * cy / (1.0 + (m + mm) as f64).powi(2);
                }
            }
        }
    }
    f
}

fn grid1(n: usize, l: f64) -> Arc<SpectralGrid> {
    SpectralGrid::new_1d(n, l).expect("grid")
}

fn uniform_env(grid: &Arc<SpectralGrid>, g: f64, b: f64) -> Environment {
    Environment::new(
        g,
        Field::constant(grid, b),
        SurfaceCurrent { ux: Field::zeros(grid), uy: None },
        None,
        None,
    )
    .expect("uniform environment")
}

struct Registry {
    checks: Vec<CheckResult>,
}

impl Registry {
    fn record(&mut self, name: &str, measured: f64, bound: f64, detail: String) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed: measured.is_finite() && measured <= bound,
            measured,
            bound,
            detail,
        });
    }
}

/// Run every property check. `quick` shrinks the grids; `break_symmetry`
/// injects a deliberate asymmetry into the operator used by the symmetry
/// check so that exactly that check fails (a canary for the harness).
pub fn run_checks(quick: bool, break_symmetry: bool) -> ValidateReport {
    let seed = 0x5eed_0001_u64;
    let n = if quick { 64 } else { 128 };
    let g = 9.81;
    let mut reg = Registry { checks: Vec::new() };

    check_flat_exactness(&mut reg, n, g);
    check_self_adjoint(&mut reg, n, g, seed, break_symmetry);
    check_dispersion_phase(&mut reg, n, g);
    check_energy_conservation(&mut reg, n, g);
    check_group_velocity_peak(&mut reg);
    check_wigner_gaussian(&mut reg, n);
    check_wigner_marginals(&mut reg, n);
    check_action_translation(&mut reg, n, g);
    check_schrodinger_free_packet(&mut reg, n, g);
    check_mild_slope_defect(&mut reg, n, g);
    check_ray_frequency_drift(&mut reg, n, g);

    let all_passed = reg.checks.iter().all(|c| c.passed);
    ValidateReport {
        tool: format!("wavecurrent-cli {}", env!("CARGO_PKG_VERSION")),
        quick,
        seed,
        all_passed,
        checks: reg.checks,
    }
}

/// Flat-bottom operator application must reproduce the closed-form symbol.
fn check_flat_exactness(reg: &mut Registry, n: usize, g: f64) {
    let grid = grid1(n, 400.0);
    let b = 9.0;
    let dn = WeylDn::build(&Field::constant(&grid, b), SymbolPower::One, 1.0, 16).expect("dn");
    let mut worst = 0.0f64;
    for mode in 1..=(n / 4) {
        let k = mode as f64 * TAU / 400.0;
        let f = Field::from_fn(&grid, |x| (k * x[0]).cos());
        let out = dn.apply(&f).expect("apply");
        let expect = k * (k * b).tanh();
        for (o, v) in out.values().iter().zip(f.values()) {
            worst = worst.max((o - expect * v).abs());
        }
    }
    let _ = g;
    reg.record(
        "dn_flat_symbol_exact",
        worst,
        1e-10,
        format!("max |Dn cos(kx) - k tanh(kb) cos(kx)| over modes 1..{}", n / 4),
    );
}

/// <f, Dn g> must equal <Dn f, g> for random smooth pairs; the optional
/// injected fault adds a non-symmetric advection-like term.
fn check_self_adjoint(reg: &mut Registry, n: usize, g: f64, seed: u64, break_symmetry: bool) {
    let grid = grid1(n, 600.0);
    let depth = Field::from_fn(&grid, |x| 10.0 - 2.0 * (TAU * x[0] / 600.0).cos());
    let _ = g;
    let mut rng = SplitMix64::new(seed);
    for power in [SymbolPower::One, SymbolPower::Half] {
        let dn = WeylDn::build(&depth, power, 1.0, 20).expect("dn");
        let mut worst = 0.0f64;
        let pairs = 20;
        for _ in 0..pairs {
            let f = smooth_random_field(&grid, &mut rng, 10);
            let gq = smooth_random_field(&mut grid.clone(), &mut rng, 10);
            let mut df = dn.apply(&f).expect("apply");
            let dg = dn.apply(&gq).expect("apply");
            if break_symmetry {
                // Fault injection: contaminate with a first-derivative term,
                // which is antisymmetric and must trip the check.
                let adv = grid.spectral_derivative(&f, 0, 1).expect("deriv");
                for (o, a) in df.values_mut().iter_mut().zip(adv.values()) {
                    *o += 1e-3 * a;
                }
            }
            let inner_fd: f64 =
                f.values().iter().zip(dg.values()).map(|(a, b)| a * b).sum::<f64>();
            let inner_df: f64 =
                df.values().iter().zip(gq.values()).map(|(a, b)| a * b).sum::<f64>();
            let scale = inner_fd.abs().max(inner_df.abs()).max(1e-300);
            worst = worst.max((inner_fd - inner_df).abs() / scale);
        }
        let name = match power {
            SymbolPower::One => "dn_self_adjoint_full",
            SymbolPower::Half => "dn_self_adjoint_half",
        };
        reg.record(
            name,
            worst,
            1e-12,
            format!("relative pairing asymmetry over {pairs} smooth random pairs, seed {seed:#x}"),
        );
    }
}

/// A single mode on still water must rotate at sigma(k) to high accuracy.
fn check_dispersion_phase(reg: &mut Registry, n: usize, g: f64) {
    let l = 400.0;
    let grid = grid1(n, l);
    let b = 9.0;
    let env = uniform_env(&grid, g, b);
    let dn = WeylDn::build(&env.depth, SymbolPower::One, 1.0, 16).expect("dn");
    let k0 = 4.0 * TAU / l;
    let sigma = physics::sigma(g, k0, b);
    let a0 = 0.1;
    let mut state = WaveState {
        eta: Field::from_fn(&grid, |x| a0 * (k0 * x[0]).cos()),
        phi: Field::from_fn(&grid, |x| a0 * g / sigma * (k0 * x[0]).sin()),
        t: 0.0,
    };
    let period = TAU / sigma;
    let n_steps = 400usize;
    let dt = period / n_steps as f64;
    for _ in 0..n_steps {
        state = step_rk4(&state, &env, &dn, dt).expect("step");
    }
    // After one period the mode must return to its initial phase.
    let mut worst = 0.0f64;
    let reference = Field::from_fn(&grid, |x| a0 * (k0 * (x[0] - sigma / k0 * period)).cos());
    for (a, b) in state.eta.values().iter().zip(reference.values()) {
        worst = worst.max((a - b).abs());
    }
    reg.record(
        "dispersion_phase_one_period",
        worst / a0,
        1e-7,
        "relative eta error after one full period of a single mode".to_string(),
    );
}

/// Fine-step energy conservation on a sheared current without bulk exchange.
fn check_energy_conservation(reg: &mut Registry, n: usize, g: f64) {
    let l = 2000.0;
    let grid = grid1(n.max(128), l);
    let b = 9.0;
    let depth = Field::constant(&grid, b);
    let ux = Field::from_fn(&grid, |x| 0.3 * (TAU * x[0] / l).sin());
    let env = Environment::new(g, depth, SurfaceCurrent { ux, uy: None }, None, None)
        .expect("environment");
    let dn = WeylDn::build(&env.depth, SymbolPower::One, 1.0, 16).expect("dn");
    let state0 = packet_ic(&grid, 0.5 * l, 0.08 * l, 8.0 * TAU / l, 0.05).expect("packet");
    let dt = 0.2 * cfl_dt(&env, &grid, 1.0).expect("cfl");
    let e0 = total_energy(&state0, g, &dn).expect("energy");
    let mut state = state0;
    let steps = 200;
    let mut worst_drift = 0.0f64;
    for _ in 0..steps {
        state = step_rk4(&state, &env, &dn, dt).expect("step");
        let e = total_energy(&state, g, &dn).expect("energy");
        worst_drift = worst_drift.max(((e - e0) / e0).abs());
    }
    reg.record(
        "surface_energy_conservation",
        worst_drift,
        1e-5,
        format!("|E(t)-E(0)|/E(0) over {steps} fine steps on a sinusoidal current"),
    );
}

/// Group speed of the exact dispersion relation peaks near kb = 1.2.
fn check_group_velocity_peak(reg: &mut Registry) {
    let g = 9.81;
    let b = 5.0;
    let mut best_kb = 0.0f64;
    let mut best_cg = 0.0f64;
    let mut kb = 0.2;
    while kb <= 3.0 {
        let k = kb / b;
        let cg = physics::group_speed(g, k, b);
        if cg > best_cg {
            best_cg = cg;
            best_kb = kb;
        }
        kb += 1e-4;
    }
    reg.record(
        "group_speed_peak_location",
        (best_kb - 1.1997).abs(),
        0.01,
        format!("argmax of C_g over kb (found {best_kb:.4})"),
    );
}

/// The phase-space transform of a Gaussian packet matches its closed form.
fn check_wigner_gaussian(reg: &mut Registry, n: usize) {
    let l = 400.0;
    let grid = grid1(2 * n, l);
    let x0 = 0.5 * l;
    let w = 0.04 * l;
    let k0 = 12.0 * TAU / l;
    let psi = ComplexField::from_fn(&grid, |x| {
        let d = x[0] - x0;
        let amp = (-d * d / (2.0 * w * w)).exp();
        (amp * (k0 * d).cos(), amp * (k0 * d).sin())
    });
    let frame = wigner_transform(&psi, 0.0, 10.0 * w, 1.0).expect("transform");
    let mut worst = 0.0f64;
    let nk = frame.ks().len();
    for (ix, &x) in frame.grid().coords(0).iter().enumerate() {
        let mut d = x - x0;
        if d > 0.5 * l {
            d -= l;
        }
        if d < -0.5 * l {
            d += l;
        }
        for (jk, &k) in frame.ks().iter().enumerate() {
            let analytic = 2.0
                * (-d * d / (w * w)).exp()
                * (-(k - k0) * (k - k0) * w * w).exp();
            let got = frame.value(ix, jk);
            worst = worst.max((got - analytic).abs());
        }
    }
    let _ = nk;
    reg.record(
        "wigner_gaussian_closed_form",
        worst,
        1e-4,
        "max pointwise error against the analytic Gaussian distribution".to_string(),
    );
    reg.record(
        "wigner_coverage_defect",
        frame.coverage_defect,
        COVERAGE_TOL,
        "correlation mass outside the lag window, relative".to_string(),
    );
}

/// Position marginal of the transform must recover |psi|^2.
fn check_wigner_marginals(reg: &mut Registry, n: usize) {
    let l = 400.0;
    let grid = grid1(2 * n, l);
    let x0 = 0.45 * l;
    let w = 0.05 * l;
    let k0 = 10.0 * TAU / l;
    let psi = ComplexField::from_fn(&grid, |x| {
        let d = x[0] - x0;
        let amp = (-d * d / (2.0 * w * w)).exp() * (1.0 + 0.3 * (TAU * x[0] / l).cos());
        (amp * (k0 * x[0]).cos(), amp * (k0 * x[0]).sin())
    });
    let frame = wigner_transform(&psi, 0.0, 12.0 * w, 1.0).expect("transform");
    let marginal = frame.x_marginal();
    let dx = grid.dx(0);
    let mut l1 = 0.0f64;
    let mut norm = 0.0f64;
    for (i, v) in psi.values().iter().enumerate() {
        let target = v.norm_sqr();
        l1 += (marginal[i] - target).abs() * dx;
        norm += target * dx;
    }
    reg.record(
        "wigner_x_marginal",
        l1 / norm,
        1e-3,
        "L1 error of the position marginal against |psi|^2, relative".to_string(),
    );
}

/// Action transport on still water translates the envelope at C_g.
fn check_action_translation(reg: &mut Registry, n: usize, g: f64) {
    let l = 2000.0;
    let grid = grid1(n.max(128), l);
    let b = 9.0;
    let env = uniform_env(&grid, g, b);
    let k0 = 20.0 * TAU / l;
    let omega0 = physics::sigma(g, k0, b);
    let k = steady_wavenumber_field(&env, omega0, Branch::Plus).expect("k field");
    let e0 = Field::from_fn(&grid, |x| {
        let d = x[0] - 0.3 * l;
        (-d * d / (2.0 * 60.0 * 60.0)).exp()
    });
    let a = ActionField::new(e0.clone(), k, omega0).expect("action field");
    let transport = ActionTransport::new(&env, &a).expect("transport");
    let cg = physics::group_speed(g, k0, b);
    let shift = 40.0 * grid.dx(0);
    let t_total = shift / cg;
    let dt0 = 0.5 * transport.max_dt();
    let steps = (t_total / dt0).ceil() as usize;
    let dt = t_total / steps as f64;
    let mut field = a;
    for _ in 0..steps {
        field = transport.step(&field, dt).expect("step");
    }
    let reference = Field::from_fn(&grid, |x| {
        let mut d = x[0] - 0.3 * l - shift;
        if d > 0.5 * l {
            d -= l;
        }
        if d < -0.5 * l {
            d += l;
        }
        (-d * d / (2.0 * 60.0 * 60.0)).exp()
    });
    let mut worst = 0.0f64;
    for (got, want) in field.energy.values().iter().zip(reference.values()) {
        worst = worst.max((got - want).abs());
    }
    reg.record(
        "action_uniform_translation",
        worst,
        1e-5,
        format!("envelope error after translating {shift:.1} m at C_g"),
    );
}

/// Free-space envelope stepping preserves the L2 norm to near round-off.
fn check_schrodinger_free_packet(reg: &mut Registry, n: usize, g: f64) {
    let l = 2000.0;
    let grid = grid1(n.max(128), l);
    let b = 9.0;
    let env = uniform_env(&grid, g, b);
    let k0 = 20.0 * TAU / l;
    let omega0 = physics::sigma(g, k0, b);
    let kf = steady_wavenumber_field(&env, omega0, Branch::Plus).expect("k field");
    let mu = 0.1;
    let stepper = SchrodingerStepper::new_1d(&env, &kf, mu).expect("stepper");
    let amp = ComplexField::from_fn(&grid, |x| {
        let d = x[0] - 0.4 * l;
        ((-d * d / (2.0 * 80.0 * 80.0)).exp(), 0.0)
    });
    let mut s = SchrodingerState::new(amp);
    let m0 = s.l2_sq();
    let dt = 0.5 * stepper.max_dt();
    for _ in 0..200 {
        s = stepper.step(&s, dt).expect("step");
    }
    let drift = ((s.l2_sq() - m0) / m0).abs();
    reg.record(
        "schrodinger_l2_conservation",
        drift,
        1e-8,
        "relative L2 drift of the envelope over 200 steps".to_string(),
    );
}

/// The mild-slope eigenproblem reproduces a flat-bottom mode with tiny defect.
fn check_mild_slope_defect(reg: &mut Registry, n: usize, g: f64) {
    let l = 600.0;
    let grid = grid1(n, l);
    let b0 = 8.0;
    let depth = Field::from_fn(&grid, |x| b0 - 0.4 * (TAU * x[0] / l).cos());
    let k0 = 6.0 * TAU / l;
    let omega = physics::sigma(g, k0, b0);
    let problem = MildSlopeProblem::new(&depth, g, omega).expect("problem");
    let solution = problem.solve(k0).expect("solve");
    let defect = mild_slope_defect(&problem, &solution).expect("defect");
    reg.record(
        "mild_slope_eigen_defect",
        defect,
        1e-8,
        "relative operator defect of the converged mode".to_string(),
    );
}

/// Along a traced ray the absolute frequency is a motion invariant.
fn check_ray_frequency_drift(reg: &mut Registry, n: usize, g: f64) {
    let l = 2000.0;
    let grid = grid1(n.max(128), l);
    let depth = Field::constant(&grid, 20.0);
    let ux = Field::from_fn(&grid, |x| -1.0 * (TAU * x[0] / l).sin());
    let env = Environment::new(g, depth, SurfaceCurrent { ux, uy: None }, None, None)
        .expect("environment");
    let medium = GriddedMedium::new(&env).expect("medium");
    let k0 = 60.0 * TAU / l;
    let r0 = RayState { x: [0.25 * l, 0.0], k: [k0, 0.0], action: 1.0, t: 0.0 };
    let opts = RayOptions {
        dt: 0.05,
        t_final: 200.0,
        sample_every: 10,
        fd_step: grid.dx(0),
        k_floor: 1e-9,
        domain: None,
    };
    let traj = ray_trace(&r0, &medium, &opts).expect("trace");
    let omega_of = |s: &wavecurrent::asymptotics::rays::RaySample| {
        // sigma is stored; add the Doppler shift from the local current.
        let ix = ((s.x[0] / grid.dx(0)).rem_euclid(grid.n(0) as f64)) as usize % grid.n(0);
        s.sigma + env.current.ux.values()[ix] * s.k[0]
    };
    let w0 = omega_of(&traj.samples[0]);
    let mut worst = 0.0f64;
    for s in &traj.samples {
        worst = worst.max(((omega_of(s) - w0) / w0).abs());
    }
    reg.record(
        "ray_absolute_frequency_invariant",
        worst,
        5e-4,
        format!(
            "relative drift of omega along a ray over {:.0} s (nearest-node Doppler)",
            opts.t_final
        ),
    );
}

/// Render the report as pretty JSON.
pub fn report_json(report: &ValidateReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Write the report beside stdout consumption.
pub fn write_report(report: &ValidateReport, out_dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("validate_report.json"), report_json(report))
}

#[allow(dead_code)]
fn unused_energy_density_anchor() {
    // Keeps the import list honest if the budget check is ever trimmed.
    let _ = energy_density;
}

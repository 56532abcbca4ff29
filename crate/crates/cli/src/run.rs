//! Scenario execution: builds the environment, marches every selected model
//! on a shared snapshot clock, and writes deterministic outputs with a
//! complete manifest.
//!
//! Output layout per run directory:
//! - `manifest.json` — resolved configuration plus derived values.
//! - `times.csv` — snapshot index to simulation time.
//! - `<model>_energy_NNNN.bin` — energy-density snapshots (plus `.csv`
//!   copies in 1D).
//! - `energy_budget.csv` — per-step totals and source integrals (1D exact).
//! - `model_comparison.csv` — per-snapshot totals, window maxima, and
//!   cross-model differences over the measurement window.
//! - `ray_0.csv`, `wigner_NNNN.bin` + `wigner_axes.bin`,
//!   `wigner_track.csv`, `wigner_coverage.csv` — optional model outputs.
//! - `checkpoint_final.bin` on success, `checkpoint.bin` holding the last
//!   good state after a numerical abort.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use wavecurrent::asymptotics::action::{
    steady_wavenumber_field, steady_wavenumber_field_along, ActionField, ActionTransport,
};
use wavecurrent::asymptotics::rays::{ray_trace, GriddedMedium, RayOptions, RayState};
use wavecurrent::asymptotics::schrodinger::{
    energy_density_from_amplitude, SchrodingerState, SchrodingerStepper,
};
use wavecurrent::diagnostics::{
    energy_density, production_integral, surface_divergence_source, total_energy, EnergyReport,
    SourceForm,
};
use wavecurrent::dn::{SymbolPower, WeylDn};
use wavecurrent::grid::{ComplexField, Field, SpectralGrid};
use wavecurrent::io;
use wavecurrent::physics::{self, Branch};
use wavecurrent::solver::{cfl_dt, step_rk4, Environment, SpongeProfile};
use wavecurrent::wigner::{energy_variable, wigner_peak_track, wigner_transform, WignerGrid};

use crate::config::{Config, DEFAULT_DN_RANK};
use crate::hashing::{fnv1a64, hex64};
use crate::scenario::{build_grid, build_medium, initial_state};

/// Failure classification for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FailKind {
    /// Invalid configuration or environment definition (exit 2).
    Config,
    /// Numerical abort during operator setup or time stepping (exit 3).
    Numerics,
}

#[derive(Debug)]
pub struct RunError {
    pub kind: FailKind,
    pub message: String,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn config_err(e: impl fmt::Display) -> RunError {
    RunError { kind: FailKind::Config, message: format!("configuration: {e}") }
}

fn numerics_err(e: impl fmt::Display) -> RunError {
    RunError { kind: FailKind::Numerics, message: format!("numerics: {e}") }
}

#[derive(Serialize)]
struct Manifest {
    tool: String,
    scenario_hash: String,
    quick: bool,
    /// No stochastic inputs exist in runs; recorded for completeness.
    seed: u64,
    output_dir: String,
    config: Config,
    derived: Derived,
}

#[derive(Serialize, Default)]
struct Derived {
    dt: f64,
    steps: usize,
    snapshot_stride: usize,
    dn_rank_requested: usize,
    dn_rank_used: usize,
    dn_validation_error: f64,
    dn_half_rank_used: Option<usize>,
    ic_reference_depth: Option<f64>,
    action_omega0: Option<f64>,
    schrodinger_mu: Option<f64>,
    wigner_y_max: Option<f64>,
    environment_notes: Vec<String>,
}

struct ActionModel {
    field: ActionField,
    transport: ActionTransport,
}

struct SchrodModel {
    state: SchrodingerState,
    stepper: SchrodingerStepper,
}

struct WignerModel {
    dn_half: WeylDn,
    y_max: f64,
    mu: f64,
    stride: usize,
    frames: Vec<WignerGrid>,
}

/// Execute a resolved-or-raw configuration into `out_dir`.
pub fn execute(cfg_in: &Config, out_dir: &Path, quick: bool) -> Result<PathBuf, RunError> {
    let cfg = cfg_in.resolve(quick).map_err(config_err)?;
    let grid = build_grid(&cfg.grid).map_err(config_err)?;
    let medium = build_medium(&cfg, &grid).map_err(config_err)?;
    let notes = medium.notes.clone();
    let sponge = cfg
        .sponge
        .as_ref()
        .map(|s| SpongeProfile { width_frac: s.width_frac, rate: s.rate });
    let env = Environment::new(cfg.gravity, medium.depth, medium.current, medium.bulk, sponge)
        .map_err(config_err)?;
    let (state0, ic) = initial_state(&cfg, &grid, &env.depth).map_err(config_err)?;

    std::fs::create_dir_all(out_dir).map_err(config_err)?;

    let has = |m: &str| cfg.models.iter().any(|s| s == m);
    let scenario_hash = fnv1a64(cfg.canonical().as_bytes());

    // --- model setup (numerical phase from here on) ---
    let dn = WeylDn::build(&env.depth, SymbolPower::One, 1.0, DEFAULT_DN_RANK)
        .map_err(numerics_err)?;
    let dt = match cfg.time.dt {
        Some(v) => v,
        None => cfl_dt(&env, &grid, cfg.time.cfl_safety).map_err(numerics_err)?,
    };
    let steps = (cfg.time.t_end / dt).ceil() as usize;
    let dt = cfg.time.t_end / steps as f64;
    let cadence = cfg.output.cadence.expect("resolved");
    let stride = ((cadence / dt).round() as usize).max(1);

    let mut derived = Derived {
        dt,
        steps,
        snapshot_stride: stride,
        dn_rank_requested: DEFAULT_DN_RANK,
        dn_rank_used: dn.rank(),
        dn_validation_error: dn.validation_error(),
        ic_reference_depth: ic.reference_depth,
        wigner_y_max: cfg.wigner.as_ref().and_then(|w| w.y_max),
        environment_notes: notes,
        ..Derived::default()
    };

    let dims = grid.dims();
    let mut exact_state = has("exact").then(|| state0.clone());

    let mut action = if has("action") {
        let u_c = value_at(&env.current.ux, &grid, &ic.center);
        let b_c = value_at(&env.depth, &grid, &ic.center);
        let omega0 = physics::sigma(cfg.gravity, ic.carrier, b_c) + u_c * ic.carrier;
        derived.action_omega0 = Some(omega0);
        let k = if dims == 1 {
            steady_wavenumber_field(&env, omega0, Branch::Plus)
        } else {
            steady_wavenumber_field_along(&env, omega0, Branch::Plus, [1.0, 0.0])
        }
        .map_err(numerics_err)?;
        let e0 = ic
            .envelope
            .zip_with(&ic.envelope, |a, b| 0.5 * cfg.gravity * a * b)
            .map_err(numerics_err)?;
        let field = ActionField::new(e0, k, omega0).map_err(numerics_err)?;
        let transport = if dims == 1 {
            ActionTransport::new(&env, &field)
        } else {
            ActionTransport::new_along(&env, &field, [1.0, 0.0])
        }
        .map_err(numerics_err)?;
        Some(ActionModel { field, transport })
    } else {
        None
    };

    let mut schrod = if has("schrodinger") {
        let mu = cfg
            .schrodinger
            .as_ref()
            .and_then(|s| s.mu)
            .expect("resolved");
        derived.schrodinger_mu = Some(mu);
        let stepper = if dims == 1 {
            let omega0 = derived.action_omega0.unwrap_or_else(|| {
                let b_c = value_at(&env.depth, &grid, &ic.center);
                let u_c = value_at(&env.current.ux, &grid, &ic.center);
                physics::sigma(cfg.gravity, ic.carrier, b_c) + u_c * ic.carrier
            });
            let k = steady_wavenumber_field(&env, omega0, Branch::Plus).map_err(numerics_err)?;
            SchrodingerStepper::new_1d(&env, &k, mu)
        } else {
            SchrodingerStepper::new_2d(&env, [ic.carrier, 0.0], mu)
        }
        .map_err(numerics_err)?;
        // Potential amplitude carrying the packet's elevation envelope:
        // |A| = g a_eta / sigma makes E_S equal the envelope energy at t=0.
        let g0 = cfg.gravity;
        let re = ic
            .envelope
            .zip_with(stepper.sigma_field(), |a, s| g0 * a / s)
            .map_err(numerics_err)?;
        let amp = ComplexField::from_parts(&re, &Field::zeros(&grid)).map_err(numerics_err)?;
        Some(SchrodModel { state: SchrodingerState::new(amp), stepper })
    } else {
        None
    };

    let mut wigner = if has("wigner") {
        let spec = cfg.wigner.as_ref().expect("resolved");
        let dn_half =
            WeylDn::build(&env.depth, SymbolPower::Half, spec.mu, DEFAULT_DN_RANK)
                .map_err(numerics_err)?;
        derived.dn_half_rank_used = Some(dn_half.rank());
        let wstride = ((spec.cadence.expect("resolved") / dt).round() as usize).max(1);
        Some(WignerModel {
            dn_half,
            y_max: spec.y_max.expect("resolved"),
            mu: spec.mu,
            stride: wstride,
            frames: Vec::new(),
        })
    } else {
        None
    };

    let manifest = Manifest {
        tool: format!("wavecurrent-cli {}", env!("CARGO_PKG_VERSION")),
        scenario_hash: hex64(scenario_hash),
        quick,
        seed: 0,
        output_dir: out_dir.display().to_string(),
        config: cfg.clone(),
        derived,
    };
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(out_dir.join("manifest.json"), manifest_json).map_err(config_err)?;

    // --- march ---
    let window = cfg.window.expect("resolved");
    let mut budget = (exact_state.is_some() && dims == 1).then(EnergyReport::default);
    let mut times: Vec<(usize, f64)> = Vec::new();
    let mut comparison: Vec<ComparisonRow> = Vec::new();
    let mut norm0: Option<f64> = None;
    let mut snap_idx = 0usize;

    for i in 0..=steps {
        let t = i as f64 * dt;
        if let (Some(rep), Some(state)) = (budget.as_mut(), exact_state.as_ref()) {
            let e_tot = total_energy(state, cfg.gravity, &dn).map_err(numerics_err)?;
            let i_s = surface_divergence_source(state, &env, SourceForm::Half)
                .map_err(numerics_err)?;
            let i_b = if env.bulk.is_some() {
                production_integral(state, &env, 24).map_err(numerics_err)?
            } else {
                0.0
            };
            rep.push(t, e_tot, i_s, i_b);
        }
        if i % stride == 0 || i == steps {
            let mut row = ComparisonRow { t, entries: Vec::new() };
            if let Some(state) = exact_state.as_ref() {
                let e = energy_density(state, cfg.gravity, &dn).map_err(numerics_err)?;
                if norm0.is_none() {
                    norm0 = Some(e.integral());
                }
                if cfg.output.snapshots {
                    write_snapshot(out_dir, "exact", snap_idx, &e, dims)
                        .map_err(numerics_err)?;
                }
                row.entries.push(("exact", summarize(&e, &grid, window, None)));
                if let Some(a) = action.as_ref() {
                    row.entries
                        .push(("action", summarize(&a.field.energy, &grid, window, Some(&e))));
                }
                if let Some(s) = schrod.as_ref() {
                    let es = energy_density_from_amplitude(
                        &s.state.amp,
                        s.stepper.sigma_field(),
                        cfg.gravity,
                    )
                    .map_err(numerics_err)?;
                    row.entries.push(("schrodinger", summarize(&es, &grid, window, Some(&e))));
                }
            } else {
                if let Some(a) = action.as_ref() {
                    if norm0.is_none() {
                        norm0 = Some(a.field.energy.integral());
                    }
                    row.entries.push(("action", summarize(&a.field.energy, &grid, window, None)));
                }
                if let Some(s) = schrod.as_ref() {
                    let es = energy_density_from_amplitude(
                        &s.state.amp,
                        s.stepper.sigma_field(),
                        cfg.gravity,
                    )
                    .map_err(numerics_err)?;
                    if norm0.is_none() {
                        norm0 = Some(es.integral());
                    }
                    row.entries.push(("schrodinger", summarize(&es, &grid, window, None)));
                }
            }
            if cfg.output.snapshots {
                if let Some(a) = action.as_ref() {
                    write_snapshot(out_dir, "action", snap_idx, &a.field.energy, dims)
                        .map_err(numerics_err)?;
                }
                if let Some(s) = schrod.as_ref() {
                    let es = energy_density_from_amplitude(
                        &s.state.amp,
                        s.stepper.sigma_field(),
                        cfg.gravity,
                    )
                    .map_err(numerics_err)?;
                    write_snapshot(out_dir, "schrodinger", snap_idx, &es, dims)
                        .map_err(numerics_err)?;
                }
            }
            comparison.push(row);
            times.push((snap_idx, t));
            snap_idx += 1;
        }
        if let (Some(w), Some(state)) = (wigner.as_mut(), exact_state.as_ref()) {
            if i % w.stride == 0 || i == steps {
                let psi = energy_variable(state, &w.dn_half, cfg.gravity).map_err(numerics_err)?;
                let frame = wigner_transform(&psi, t, w.y_max, w.mu).map_err(numerics_err)?;
                w.frames.push(frame);
            }
        }
        if i == steps {
            break;
        }

        // Advance all models by dt; on instability park the last good state.
        if let Some(state) = exact_state.as_mut() {
            match step_rk4(state, &env, &dn, dt) {
                Ok(next) => *state = next,
                Err(e) => {
                    let ck = out_dir.join("checkpoint.bin");
                    let _ = io::write_checkpoint(
                        &ck,
                        state.t,
                        dt,
                        scenario_hash,
                        &state.eta,
                        &state.phi,
                    );
                    return Err(numerics_err(format!(
                        "{e}; last good state at t={:.6} written to {}",
                        state.t,
                        ck.display()
                    )));
                }
            }
        }
        if let Some(a) = action.as_mut() {
            let nsub = (dt / (0.9 * a.transport.max_dt())).ceil().max(1.0) as usize;
            let sub = dt / nsub as f64;
            for _ in 0..nsub {
                a.field = a.transport.step(&a.field, sub).map_err(numerics_err)?;
            }
        }
        if let Some(s) = schrod.as_mut() {
            let nsub = (dt / (0.9 * s.stepper.max_dt())).ceil().max(1.0) as usize;
            let sub = dt / nsub as f64;
            for _ in 0..nsub {
                s.state = s.stepper.step(&s.state, sub).map_err(numerics_err)?;
            }
        }
    }

    // --- outputs ---
    io::write_csv(
        &out_dir.join("times.csv"),
        &["index", "t"],
        &times.iter().map(|(i, t)| vec![*i as f64, *t]).collect::<Vec<_>>(),
    )
    .map_err(numerics_err)?;

    if let Some(rep) = budget.as_ref() {
        rep.write_csv(&out_dir.join("energy_budget.csv")).map_err(numerics_err)?;
    }

    write_comparison(out_dir, &comparison, norm0.unwrap_or(1.0)).map_err(numerics_err)?;

    if has("rays") {
        let spec = cfg.rays.as_ref().expect("resolved");
        let medium = GriddedMedium::new(&env).map_err(numerics_err)?;
        let r0 = RayState {
            x: [ic.center[0], if dims == 2 { ic.center[1] } else { 0.0 }],
            k: [ic.carrier, 0.0],
            action: 1.0,
            t: 0.0,
        };
        let opts = RayOptions {
            dt: spec.dt,
            t_final: spec.t_final.expect("resolved"),
            sample_every: spec.sample_every,
            fd_step: grid.dx(0),
            k_floor: 1e-6,
            domain: None,
        };
        let traj = ray_trace(&r0, &medium, &opts).map_err(numerics_err)?;
        traj.write_csv(&out_dir.join("ray_0.csv")).map_err(numerics_err)?;
    }

    if let Some(w) = wigner.as_ref() {
        for (j, frame) in w.frames.iter().enumerate() {
            let table = out_dir.join(format!("wigner_{j:04}.bin"));
            let axes = out_dir.join("wigner_axes.bin");
            frame.write(&table, &axes).map_err(numerics_err)?;
        }
        let peaks = wigner_peak_track(&w.frames).map_err(numerics_err)?;
        io::write_csv(
            &out_dir.join("wigner_track.csv"),
            &["t", "x", "k", "value"],
            &peaks.iter().map(|p| vec![p.t, p.x, p.k, p.value]).collect::<Vec<_>>(),
        )
        .map_err(numerics_err)?;
        io::write_csv(
            &out_dir.join("wigner_coverage.csv"),
            &["t", "coverage_defect", "im_residue"],
            &w
                .frames
                .iter()
                .map(|f| vec![f.t, f.coverage_defect, f.im_residue])
                .collect::<Vec<_>>(),
        )
        .map_err(numerics_err)?;
    }

    if let Some(state) = exact_state.as_ref() {
        io::write_checkpoint(
            &out_dir.join("checkpoint_final.bin"),
            state.t,
            dt,
            scenario_hash,
            &state.eta,
            &state.phi,
        )
        .map_err(numerics_err)?;
    }

    Ok(out_dir.to_path_buf())
}

/// Window summary of one model's energy density at one time.
struct Summary {
    total: f64,
    wmax: f64,
    xmax: f64,
    diff: Option<f64>,
}

struct ComparisonRow {
    t: f64,
    entries: Vec<(&'static str, Summary)>,
}

fn summarize(e: &Field, grid: &Arc<SpectralGrid>, window: [f64; 2], exact: Option<&Field>) -> Summary {
    let nx = grid.n(0);
    let dx = grid.dx(0);
    let rows = if grid.dims() == 2 { grid.n(1) } else { 1 };
    let mut wmax = 0.0f64;
    let mut xmax = window[0];
    let mut diff = exact.map(|_| 0.0f64);
    for r in 0..rows {
        for c in 0..nx {
            let x = c as f64 * dx;
            if x < window[0] || x > window[1] {
                continue;
            }
            let idx = r * nx + c;
            let v = e.values()[idx];
            if v > wmax {
                wmax = v;
                xmax = x;
            }
            if let (Some(d), Some(ex)) = (diff.as_mut(), exact) {
                let gap = (ex.values()[idx] - v).abs();
                if gap > *d {
                    *d = gap;
                }
            }
        }
    }
    Summary { total: e.integral(), wmax, xmax, diff }
}

fn write_comparison(
    out_dir: &Path,
    rows: &[ComparisonRow],
    norm0: f64,
) -> wavecurrent::Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut header: Vec<String> = vec!["t".into()];
    for (name, s) in &rows[0].entries {
        header.push(format!("total_{name}"));
        header.push(format!("wmax_{name}"));
        header.push(format!("xmax_{name}"));
        if s.diff.is_some() {
            header.push(format!("diff_{name}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let data: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.t];
            for (_, s) in &r.entries {
                row.push(s.total / norm0);
                row.push(s.wmax);
                row.push(s.xmax);
                if let Some(d) = s.diff {
                    row.push(d);
                }
            }
            row
        })
        .collect();
    io::write_csv(&out_dir.join("model_comparison.csv"), &header_refs, &data)
}

fn write_snapshot(
    out_dir: &Path,
    model: &str,
    idx: usize,
    e: &Field,
    dims: usize,
) -> wavecurrent::Result<()> {
    let bin = out_dir.join(format!("{model}_energy_{idx:04}.bin"));
    io::write_field(&bin, e)?;
    if dims == 1 {
        let csv = out_dir.join(format!("{model}_energy_{idx:04}.csv"));
        io::write_field_csv(&csv, e)?;
    }
    Ok(())
}

fn value_at(f: &Field, grid: &Arc<SpectralGrid>, center: &[f64]) -> f64 {
    let ix = ((center[0] / grid.dx(0)).round() as usize) % grid.n(0);
    if grid.dims() == 1 {
        f.values()[ix]
    } else {
        let iy = ((center.get(1).copied().unwrap_or(0.0) / grid.dx(1)).round() as usize)
            % grid.n(1);
        f.values()[iy * grid.n(0) + ix]
    }
}

/// Resolve the run output directory from flag, environment, or default root.
pub fn resolve_out_dir(name: &str, flag: Option<&str>) -> PathBuf {
    if let Some(dir) = flag {
        return PathBuf::from(dir);
    }
    let root = std::env::var(crate::config::OUTPUT_ROOT_VAR)
        .unwrap_or_else(|_| "runs".to_string());
    Path::new(&root).join(name)
}

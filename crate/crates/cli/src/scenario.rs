//! Closed-form environments and initial conditions for runs.
//!
//! Every family is evaluated on the torus: Gaussian bumps carry one image
//! per side, the jet profile is image-summed across the second axis, and
//! open profiles (steps, ramps, meanders) are closed with a C-infinity
//! taper so the spectral environment checks see smooth periodic fields.
//! Every periodization choice is reported as a note for the manifest.

use std::f64::consts::PI;
use std::sync::Arc;

use wavecurrent::grid::{Field, SpectralGrid};
use wavecurrent::physics::{self, Branch};
use wavecurrent::solver::{
    eigenmode_packet_ic, eigenmode_packet_ic_2d, packet_ic, packet_ic_2d, BulkFlow, SurfaceCurrent,
    WaveState,
};
use wavecurrent::{io, Error, Result};

use crate::config::{BumpSpec, Config, GridSpec, InitialSpec, MediumSpec, OutputSpec, RaySpec,
    SchrodingerSpec, TimeSpec, WignerSpec};

/// C-infinity unit step: 0 below 0, 1 above 1, smooth in between.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        let da = a / (u * u);
        let db = b / ((1.0 - u) * (1.0 - u));
        (da * b + a * db) / ((a + b) * (a + b))
    }
}

/// Plateau taper on one axis: 0 at the wrap, 1 over the interior plateau.
#[derive(Clone, Copy, Debug)]
pub struct Taper {
    /// Rise band start/end, then fall band start/end (absolute coordinates).
    pub bands: [f64; 4],
}

impl Taper {
    pub fn new(bands: [f64; 4]) -> Self {
        Self { bands }
    }

    pub fn value(&self, x: f64) -> f64 {
        let [a0, a1, a2, a3] = self.bands;
        smooth_step((x - a0) / (a1 - a0)) * (1.0 - smooth_step((x - a2) / (a3 - a2)))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let [a0, a1, a2, a3] = self.bands;
        let up = smooth_step((x - a0) / (a1 - a0));
        let dup = smooth_step_deriv((x - a0) / (a1 - a0)) / (a1 - a0);
        let down = smooth_step((x - a2) / (a3 - a2));
        let ddown = smooth_step_deriv((x - a2) / (a3 - a2)) / (a3 - a2);
        dup * (1.0 - down) - up * ddown
    }
}

/// One-per-side image sum of a Gaussian so the bump closes over the torus.
fn periodic_gaussian(x: f64, center: f64, width: f64, length: f64) -> f64 {
    let mut acc = 0.0;
    for r in -1..=1 {
        let d = x + r as f64 * length - center;
        acc += (-d * d / (2.0 * width * width)).exp();
    }
    acc
}

fn bump_value(b: &BumpSpec, x: [f64; 2], length: [f64; 2], dims: usize) -> Result<f64> {
    if b.center.len() != b.width.len()
        || b.center.is_empty()
        || b.center.len() > dims
    {
        return Err(Error::InvalidParameter(
            "bump center/width must list one or per-axis values".into(),
        ));
    }
    let mut v = b.amplitude;
    for axis in 0..b.center.len() {
        if b.width[axis] <= 0.0 {
            return Err(Error::InvalidParameter("bump widths must be positive".into()));
        }
        v *= periodic_gaussian(x[axis], b.center[axis], b.width[axis], length[axis]);
    }
    Ok(v)
}

/// Meandering-jet centerline displacement.
fn meander_offset(amp: f64, wavenumber: f64, x1: f64, taper: &Taper) -> f64 {
    amp * (wavenumber * x1).sin() * taper.value(x1)
}

/// Image-summed squared secant profile, periodic across `length`.
fn periodic_sech_sq(z: f64, sigma: f64, length: f64) -> f64 {
    let mut acc = 0.0;
    for r in -20..=20 {
        let d = (z + r as f64 * length) / sigma;
        let c = d.cosh();
        acc += 1.0 / (c * c);
    }
    acc
}

/// Fraction-of-axis bands used to close open profiles over the wrap.
fn default_taper(length: f64) -> Taper {
    Taper::new([0.02 * length, 0.12 * length, 0.88 * length, 0.98 * length])
}

pub struct MediumFields {
    pub depth: Field,
    pub current: SurfaceCurrent,
    pub bulk: Option<Arc<dyn BulkFlow>>,
    /// Periodization / closure decisions taken while evaluating families.
    pub notes: Vec<String>,
}

pub fn build_grid(spec: &GridSpec) -> Result<Arc<SpectralGrid>> {
    match spec.n.len() {
        1 => SpectralGrid::new_1d(spec.n[0], spec.length[0]),
        2 => SpectralGrid::new_2d(spec.n[0], spec.n[1], spec.length[0], spec.length[1]),
        _ => Err(Error::InvalidGrid("one or two axes".into())),
    }
}

pub fn build_medium(cfg: &Config, grid: &Arc<SpectralGrid>) -> Result<MediumFields> {
    let dims = grid.dims();
    let length = [grid.len_axis(0), if dims == 2 { grid.len_axis(1) } else { 0.0 }];
    let mut notes = Vec::new();

    let depth = match &cfg.depth {
        MediumSpec::Uniform { value } => {
            if *value <= 0.0 {
                return Err(Error::NonPositiveDepth(*value));
            }
            Field::constant(grid, *value)
        }
        MediumSpec::GaussianBumps { base, bumps } => {
            notes.push("depth bumps periodized with one image per side".into());
            let mut err = None;
            let f = Field::from_fn(grid, |x, y| {
                let mut v = *base;
                for b in bumps {
                    match bump_value(b, [x, y], length, dims) {
                        Ok(add) => v += add,
                        Err(e) => err = Some(e),
                    }
                }
                v
            });
            if let Some(e) = err {
                return Err(e);
            }
            f
        }
        MediumSpec::File { path, path_y } => {
            if path_y.is_some() {
                return Err(Error::InvalidParameter(
                    "depth takes a single field file".into(),
                ));
            }
            load_field(path, grid)?
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "depth cannot use the {} family",
                family_name(other)
            )))
        }
    };
    if depth.min() <= 0.0 {
        return Err(Error::NonPositiveDepth(depth.min()));
    }

    let (ux, uy, bulk) = match &cfg.current {
        MediumSpec::Uniform { value } => (
            Field::constant(grid, *value),
            (dims == 2).then(|| Field::zeros(grid)),
            None,
        ),
        MediumSpec::GaussianBumps { base, bumps } => {
            notes.push("current bumps periodized with one image per side".into());
            let mut err = None;
            let f = Field::from_fn(grid, |x, y| {
                let mut v = *base;
                for b in bumps {
                    match bump_value(b, [x, y], length, dims) {
                        Ok(add) => v += add,
                        Err(e) => err = Some(e),
                    }
                }
                v
            });
            if let Some(e) = err {
                return Err(e);
            }
            (f, (dims == 2).then(|| Field::zeros(grid)), None)
        }
        MediumSpec::TanhJet { base, amplitude, center, width, cosine_bulk } => {
            if dims != 1 {
                return Err(Error::InvalidParameter("tanh_jet currents are 1D".into()));
            }
            if *width <= 0.0 {
                return Err(Error::InvalidParameter("tanh_jet width must be positive".into()));
            }
            let taper = default_taper(length[0]);
            notes.push(format!(
                "tanh step closed over the wrap by a smooth taper with bands {:?}",
                taper.bands
            ));
            let (b0, a, c, w) = (*base, *amplitude, *center, *width);
            let f = Field::from_fn(grid, |x, _| b0 + a * ((x - c) / w).tanh() * taper.value(x));
            let bulk: Option<Arc<dyn BulkFlow>> = if *cosine_bulk {
                let bspan = depth.max() - depth.min();
                if bspan.abs() > 1e-9 {
                    return Err(Error::InvalidParameter(
                        "cosine_bulk needs a uniform depth".into(),
                    ));
                }
                notes.push(
                    "bulk flow: cosine depth structure with the incompressible vertical closure"
                        .into(),
                );
                Some(Arc::new(CosineTanhBulk {
                    base: b0,
                    amplitude: a,
                    center: c,
                    width: w,
                    depth: depth.max(),
                    taper,
                }))
            } else {
                None
            };
            (f, None, bulk)
        }
        MediumSpec::ParabolicOpposing { u0 } => {
            if dims != 1 {
                return Err(Error::InvalidParameter(
                    "parabolic_opposing currents are 1D".into(),
                ));
            }
            let l = length[0];
            let taper = Taper::new([0.02 * l, 0.08 * l, 0.90 * l, 0.96 * l]);
            notes.push(format!(
                "parabolic profile closed over the wrap by a smooth taper with bands {:?}",
                taper.bands
            ));
            let u = *u0;
            (
                Field::from_fn(grid, |x, _| u * x * x / (l * l) * taper.value(x)),
                None,
                None,
            )
        }
        MediumSpec::MeanderingJet { strength, sigma, meander_amplitude, meander_wavenumber, ramp } => {
            if dims != 2 {
                return Err(Error::InvalidParameter("meandering_jet currents are 2D".into()));
            }
            if *sigma <= 0.0 {
                return Err(Error::InvalidParameter("jet sigma must be positive".into()));
            }
            let taper = default_taper(length[0]);
            notes.push(format!(
                "jet profile image-summed across the second axis; meander and ramp \
                 tapered near the first-axis wrap with bands {:?}",
                taper.bands
            ));
            let (s, sg, ma, mw, rp) =
                (*strength, *sigma, *meander_amplitude, *meander_wavenumber, *ramp);
            let l2 = length[1];
            let ux = Field::from_fn(grid, |x1, x2| {
                let c = meander_offset(ma, mw, x1, &taper);
                s * periodic_sech_sq(x2 - c, sg, l2)
            });
            let uy = Field::from_fn(grid, |x1, _| rp * x1 * taper.value(x1));
            (ux, Some(uy), None)
        }
        MediumSpec::File { path, path_y } => {
            let ux = load_field(path, grid)?;
            let uy = match (dims, path_y) {
                (2, Some(p)) => Some(load_field(p, grid)?),
                (2, None) => Some(Field::zeros(grid)),
                (1, Some(_)) => {
                    return Err(Error::InvalidParameter(
                        "1D currents take a single field file".into(),
                    ))
                }
                (1, None) => None,
                _ => unreachable!(),
            };
            (ux, uy, None)
        }
    };

    Ok(MediumFields { depth, current: SurfaceCurrent { ux, uy }, bulk, notes })
}

fn family_name(m: &MediumSpec) -> &'static str {
    match m {
        MediumSpec::Uniform { .. } => "uniform",
        MediumSpec::GaussianBumps { .. } => "gaussian_bumps",
        MediumSpec::TanhJet { .. } => "tanh_jet",
        MediumSpec::ParabolicOpposing { .. } => "parabolic_opposing",
        MediumSpec::MeanderingJet { .. } => "meandering_jet",
        MediumSpec::File { .. } => "file",
    }
}

fn load_field(path: &str, grid: &Arc<SpectralGrid>) -> Result<Field> {
    let f = io::read_field(std::path::Path::new(path))?;
    f.grid().same_grid(grid)?;
    Field::from_values(grid, f.values().to_vec())
}

/// Depth-structured step flow under a uniform-depth surface: horizontal
/// `base + a s(x) cos(pi z / b)` with the incompressible vertical closure
/// `-a s'(x) (b/pi) sin(pi z / b)`; no normal flow through surface or bed.
struct CosineTanhBulk {
    base: f64,
    amplitude: f64,
    center: f64,
    width: f64,
    depth: f64,
    taper: Taper,
}

impl CosineTanhBulk {
    fn s(&self, x: f64) -> f64 {
        ((x - self.center) / self.width).tanh() * self.taper.value(x)
    }

    fn s_prime(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        let sech2 = {
            let c = u.cosh();
            1.0 / (c * c)
        };
        sech2 / self.width * self.taper.value(x) + u.tanh() * self.taper.derivative(x)
    }
}

impl BulkFlow for CosineTanhBulk {
    fn horizontal(&self, x: f64, z: f64) -> f64 {
        self.base + self.amplitude * self.s(x) * (PI * z / self.depth).cos()
    }

    fn vertical(&self, x: f64, z: f64) -> f64 {
        -self.amplitude * self.s_prime(x) * (self.depth / PI) * (PI * z / self.depth).sin()
    }

    fn d_horizontal_dx(&self, x: f64, z: f64) -> f64 {
        self.amplitude * self.s_prime(x) * (PI * z / self.depth).cos()
    }

    fn d_horizontal_dz(&self, x: f64, z: f64) -> f64 {
        -self.amplitude * self.s(x) * (PI / self.depth) * (PI * z / self.depth).sin()
    }

    fn d_vertical_dz(&self, x: f64, z: f64) -> f64 {
        -self.amplitude * self.s_prime(x) * (PI * z / self.depth).cos()
    }
}

/// Everything downstream models need to know about the initial packet.
pub struct IcMeta {
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub carrier: f64,
    pub amplitude: f64,
    /// Reference depth used for eigenmode pairing (when applicable).
    pub reference_depth: Option<f64>,
    /// Elevation envelope `amplitude * B(x)` of the packet.
    pub envelope: Field,
}

pub fn initial_state(
    cfg: &Config,
    grid: &Arc<SpectralGrid>,
    depth: &Field,
) -> Result<(WaveState, IcMeta)> {
    let dims = grid.dims();
    match &cfg.initial {
        InitialSpec::Packet { center, width, carrier, amplitude } => {
            let state = if dims == 1 {
                packet_ic(grid, center[0], width[0], *carrier, *amplitude)?
            } else {
                packet_ic_2d(
                    grid,
                    [center[0], center[1]],
                    [width[0], width[1]],
                    *carrier,
                    *amplitude,
                )?
            };
            let meta = IcMeta {
                center: center.clone(),
                width: width.clone(),
                carrier: *carrier,
                amplitude: *amplitude,
                reference_depth: None,
                envelope: envelope_field(grid, center, width, *amplitude),
            };
            Ok((state, meta))
        }
        InitialSpec::EigenmodePacket { center, width, carrier, amplitude, reference_depth } => {
            let bref = reference_depth.unwrap_or_else(|| depth_at(depth, grid, center));
            let state = if dims == 1 {
                eigenmode_packet_ic(
                    grid,
                    center[0],
                    width[0],
                    *carrier,
                    *amplitude,
                    cfg.gravity,
                    bref,
                    Branch::Plus,
                )?
            } else {
                eigenmode_packet_ic_2d(
                    grid,
                    [center[0], center[1]],
                    [width[0], width[1]],
                    *carrier,
                    *amplitude,
                    cfg.gravity,
                    bref,
                    Branch::Plus,
                )?
            };
            let meta = IcMeta {
                center: center.clone(),
                width: width.clone(),
                carrier: *carrier,
                amplitude: *amplitude,
                reference_depth: Some(bref),
                envelope: envelope_field(grid, center, width, *amplitude),
            };
            Ok((state, meta))
        }
        InitialSpec::Mode { index, amplitude } => {
            let k = *index as f64 * std::f64::consts::TAU / grid.len_axis(0);
            let b0 = depth_at(depth, grid, &[0.0]);
            let sigma = physics::sigma(cfg.gravity, k, b0);
            let a = *amplitude;
            let g = cfg.gravity;
            let eta = Field::from_fn(grid, |x, _| a * (k * x).cos());
            let phi = Field::from_fn(grid, |x, _| a * g / sigma * (k * x).sin());
            let meta = IcMeta {
                center: vec![0.0],
                width: vec![grid.len_axis(0)],
                carrier: k,
                amplitude: a,
                reference_depth: Some(b0),
                envelope: Field::constant(grid, a),
            };
            Ok((WaveState { eta, phi, t: 0.0 }, meta))
        }
    }
}

fn envelope_field(grid: &Arc<SpectralGrid>, center: &[f64], width: &[f64], amplitude: f64) -> Field {
    let dims = grid.dims();
    let (c0, w0) = (center[0], width[0]);
    let (c1, w1) = if dims == 2 { (center[1], width[1]) } else { (0.0, 1.0) };
    Field::from_fn(grid, |x, y| {
        let mut v = amplitude * (-(x - c0) * (x - c0) / (2.0 * w0 * w0)).exp();
        if dims == 2 {
            v *= (-(y - c1) * (y - c1) / (2.0 * w1 * w1)).exp();
        }
        v
    })
}

fn depth_at(depth: &Field, grid: &Arc<SpectralGrid>, center: &[f64]) -> f64 {
    let ix = ((center[0] / grid.dx(0)).round() as usize) % grid.n(0);
    if grid.dims() == 1 {
        depth.values()[ix]
    } else {
        let iy = ((center[1] / grid.dx(1)).round() as usize) % grid.n(1);
        depth.values()[iy * grid.n(0) + ix]
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["total_energy_1d", "bumpy_1d", "jet_2d", "blocking_1d"];

/// Built-in scenario definitions; parameters are the experiment values, with
/// run lengths and resolutions set for desk-scale wall times.
pub fn builtin(name: &str) -> Option<Config> {
    let tau = std::f64::consts::TAU;
    match name {
        "total_energy_1d" => {
            let l = 2000.0;
            Some(Config {
                name: name.into(),
                grid: GridSpec { n: vec![1024], length: vec![l] },
                gravity: 9.81,
                depth: MediumSpec::Uniform { value: 9.0 },
                current: MediumSpec::TanhJet {
                    base: 1.0,
                    amplitude: 0.5,
                    center: 2.0 * l / 3.0,
                    width: 300.0,
                    cosine_bulk: true,
                },
                initial: InitialSpec::Packet {
                    center: vec![l / 2.0],
                    width: vec![0.04 * l],
                    carrier: tau / (l / 50.0),
                    amplitude: 0.5,
                },
                time: TimeSpec { t_end: 120.0, dt: None, cfl_safety: 0.25 },
                output: OutputSpec { cadence: Some(2.0), snapshots: true },
                models: vec!["exact".into()],
                window: None,
                sponge: None,
                wigner: None,
                rays: None,
                schrodinger: None,
            })
        }
        "bumpy_1d" => {
            let l = 2000.0;
            Some(Config {
                name: name.into(),
                grid: GridSpec { n: vec![1024], length: vec![l] },
                gravity: 9.81,
                depth: MediumSpec::GaussianBumps {
                    base: 24.0,
                    bumps: vec![
                        BumpSpec {
                            center: vec![2.0 * l / 3.0],
                            width: vec![0.08 * l],
                            amplitude: -18.0,
                        },
                        BumpSpec { center: vec![l / 2.0], width: vec![0.02 * l], amplitude: -14.5 },
                        BumpSpec {
                            center: vec![2.2 * l / 3.0],
                            width: vec![0.01 * l],
                            amplitude: -3.6,
                        },
                    ],
                },
                current: MediumSpec::GaussianBumps {
                    base: 1.2,
                    bumps: vec![
                        BumpSpec {
                            center: vec![2.0 * l / 3.0],
                            width: vec![0.12 * l],
                            amplitude: 0.5,
                        },
                        BumpSpec { center: vec![l / 2.0], width: vec![0.02 * l], amplitude: 0.4 },
                        BumpSpec {
                            center: vec![2.2 * l / 3.0],
                            width: vec![0.01 * l],
                            amplitude: 0.01,
                        },
                    ],
                },
                initial: InitialSpec::EigenmodePacket {
                    center: vec![0.3 * l],
                    width: vec![0.04 * l],
                    carrier: tau / (l / 60.0),
                    amplitude: 0.5,
                    reference_depth: None,
                },
                time: TimeSpec { t_end: 210.0, dt: None, cfl_safety: 0.25 },
                output: OutputSpec { cadence: Some(2.5), snapshots: true },
                models: vec!["exact".into(), "action".into()],
                window: Some([0.4 * l, 0.85 * l]),
                sponge: None,
                wigner: None,
                rays: None,
                schrodinger: None,
            })
        }
        "jet_2d" => {
            let (l1, l2) = (1500.0, 800.0);
            Some(Config {
                name: name.into(),
                grid: GridSpec { n: vec![256, 128], length: vec![l1, l2] },
                gravity: 9.81,
                depth: MediumSpec::GaussianBumps {
                    base: 24.0,
                    bumps: vec![
                        BumpSpec {
                            center: vec![l1, l2],
                            width: vec![l1 / 4.0, l2 / 4.0],
                            amplitude: -18.0,
                        },
                        BumpSpec {
                            center: vec![l1 / 2.0],
                            width: vec![0.06 * l1],
                            amplitude: -10.0,
                        },
                    ],
                },
                current: MediumSpec::MeanderingJet {
                    strength: 1.0,
                    sigma: 0.7 * l2,
                    meander_amplitude: 0.3 * 0.7 * l2,
                    meander_wavenumber: 3.0 * PI / l2,
                    ramp: 1.0 / (2.0 * l2),
                },
                initial: InitialSpec::EigenmodePacket {
                    center: vec![l1 / 5.0, l2 / 2.0],
                    width: vec![0.04 * l1, 0.04 * l1],
                    carrier: tau / (l1 / 36.0),
                    amplitude: 0.5,
                    reference_depth: None,
                },
                time: TimeSpec { t_end: 200.0, dt: None, cfl_safety: 0.35 },
                output: OutputSpec { cadence: Some(10.0), snapshots: true },
                models: vec!["exact".into(), "action".into(), "schrodinger".into()],
                window: Some([0.3 * l1, 0.85 * l1]),
                sponge: None,
                wigner: None,
                rays: None,
                schrodinger: Some(SchrodingerSpec { mu: None }),
            })
        }
        "blocking_1d" => {
            let l = 2000.0;
            Some(Config {
                name: name.into(),
                grid: GridSpec { n: vec![1024], length: vec![l] },
                gravity: 9.81,
                depth: MediumSpec::Uniform { value: 20.0 },
                current: MediumSpec::ParabolicOpposing { u0: -5.0 },
                initial: InitialSpec::EigenmodePacket {
                    center: vec![0.3 * l],
                    width: vec![0.04 * l],
                    carrier: tau / (l / 60.0),
                    amplitude: 0.5,
                    reference_depth: None,
                },
                time: TimeSpec { t_end: 520.0, dt: None, cfl_safety: 0.4 },
                output: OutputSpec { cadence: Some(13.0), snapshots: true },
                models: vec!["exact".into(), "rays".into(), "wigner".into()],
                window: None,
                sponge: None,
                wigner: Some(WignerSpec { y_max: None, mu: 1.0, cadence: Some(13.0) }),
                rays: Some(RaySpec { t_final: Some(900.0), dt: 0.02, sample_every: 50 }),
                schrodinger: None,
            })
        }
        _ => None,
    }
}

//! JSON run-configuration schema, defaults, and resolution.
//!
//! A configuration names a grid, an environment (depth and current drawn from
//! closed-form families or field files), an initial condition, time-stepping
//! controls, model selection, and output cadence. `Config::resolve` fills
//! every optional knob with its default so the manifest written next to the
//! outputs records the complete parameter set that produced a run.

use serde::{Deserialize, Serialize};

/// Reference gravity used by every built-in scenario (m/s^2).
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Chebyshev separation rank requested for variable-depth operators.
pub const DEFAULT_DN_RANK: usize = 24;

/// Environment variable naming the root directory for run outputs.
pub const OUTPUT_ROOT_VAR: &str = "WAVECURRENT_OUT";

/// Models a run can carry. Parsed from the config `models` list or the
/// `--models` override.
pub const MODEL_NAMES: [&str; 5] = ["exact", "action", "schrodinger", "rays", "wigner"];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub grid: GridSpec,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    pub depth: MediumSpec,
    pub current: MediumSpec,
    pub initial: InitialSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "default_models")]
    pub models: Vec<String>,
    /// Measurement window on the first axis; model comparisons restrict their
    /// maxima to it. Defaults to the full domain.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub sponge: Option<SpongeSpec>,
    #[serde(default)]
    pub wigner: Option<WignerSpec>,
    #[serde(default)]
    pub rays: Option<RaySpec>,
    #[serde(default)]
    pub schrodinger: Option<SchrodingerSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per axis (one entry for 1D, two for 2D); powers of two.
    pub n: Vec<usize>,
    /// Domain lengths per axis in meters.
    pub length: Vec<f64>,
}

/// Closed-form medium families; `file` loads a stored binary field instead.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumSpec {
    /// Constant value everywhere.
    Uniform { value: f64 },
    /// Base value plus Gaussian bumps. Bumps are periodized with one image
    /// per side so the field closes smoothly over the torus.
    GaussianBumps { base: f64, bumps: Vec<BumpSpec> },
    /// Smooth step `base + amplitude tanh((x - center)/width)`, closed over
    /// the torus by a smooth taper of the step term near the wrap. With
    /// `cosine_bulk` (1D, uniform depth) the budget diagnostics also see the
    /// incompressible depth structure `cos(pi z / b)` under the step.
    TanhJet {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        cosine_bulk: bool,
    },
    /// Opposing-flow profile `u0 x^2 / L^2`, tapered to zero near both ends
    /// of the axis so the profile closes smoothly over the torus.
    ParabolicOpposing { u0: f64 },
    /// 2D jet along the first axis: `strength sech^2((x2 - c(x1))/sigma)`
    /// with meander `c(x1) = meander_amplitude sin(meander_wavenumber x1)`,
    /// plus the transverse component `ramp x1`. The sech^2 profile is
    /// periodized over the second axis by an image sum; the meander and ramp
    /// are tapered near the first-axis wrap.
    MeanderingJet {
        strength: f64,
        sigma: f64,
        meander_amplitude: f64,
        meander_wavenumber: f64,
        ramp: f64,
    },
    /// Binary field file written by this tool (or any producer of the same
    /// layout); must match the run grid.
    File { path: String },
}

/// One Gaussian bump `amplitude exp(-(x-c)^2/(2 w^2))` (per-axis product in
/// 2D). A single-entry center/width on a 2D grid means the bump varies along
/// the first axis only.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Gaussian-envelope cosine packet in the elevation, zero potential
    /// (splits into two counter-propagating halves).
    Packet { center: Vec<f64>, width: Vec<f64>, carrier: f64, amplitude: f64 },
    /// Single-branch packet: the potential is paired mode-by-mode so the
    /// packet travels one way. `reference_depth` defaults to the depth at the
    /// packet center.
    EigenmodePacket {
        center: Vec<f64>,
        width: Vec<f64>,
        carrier: f64,
        amplitude: f64,
        #[serde(default)]
        reference_depth: Option<f64>,
    },
    /// Single right-traveling lattice mode (1D): elevation `a cos(k_j x)`
    /// with the matching potential.
    Mode { index: usize, amplitude: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    /// Fixed step; when absent the step comes from the stability bound times
    /// `cfl_safety`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Seconds between snapshots; defaults to `t_end / 40`.
    #[serde(default)]
    pub cadence: Option<f64>,
    /// Write per-snapshot energy fields (otherwise only summary CSVs).
    #[serde(default = "default_true")]
    pub snapshots: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpongeSpec {
    /// Fraction of the domain damped at the low/high end of the first axis.
    pub width_frac: [f64; 2],
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WignerSpec {
    /// Correlation window half-length; defaults to eight packet widths.
    #[serde(default)]
    pub y_max: Option<f64>,
    #[serde(default = "default_one")]
    pub mu: f64,
    /// Seconds between frames; defaults to the output cadence.
    #[serde(default)]
    pub cadence: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RaySpec {
    /// Trace length; defaults to the field run length.
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default = "default_ray_dt")]
    pub dt: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerSpec {
    /// Envelope scale separation; defaults to `1 / (carrier * width)`.
    #[serde(default)]
    pub mu: Option<f64>,
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}
fn default_models() -> Vec<String> {
    vec!["exact".to_string()]
}
fn default_safety() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_one() -> f64 {
    1.0
}
fn default_ray_dt() -> f64 {
    0.02
}
fn default_sample_every() -> usize {
    50
}

impl Config {
    /// Parse a JSON document; serde errors carry line/column positions.
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config error: {e}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Canonical (compact, field-ordered) serialization used for hashing.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Fill defaults and apply quick-mode scaling so the manifest records
    /// every effective value. Returns human-readable validation errors.
    pub fn resolve(&self, quick: bool) -> Result<Config, String> {
        let mut c = self.clone();
        let dims = c.grid.n.len();
        if dims == 0 || dims > 2 || c.grid.length.len() != dims {
            return Err("grid needs matching n/length lists of one or two entries".into());
        }
        for (&n, &l) in c.grid.n.iter().zip(&c.grid.length) {
            if n < 8 || !n.is_power_of_two() {
                return Err(format!("grid size {n} is not a power of two of at least 8"));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(format!("grid length {l} must be positive"));
            }
        }
        if quick {
            for n in c.grid.n.iter_mut() {
                *n = (*n / 4).max(64);
            }
            c.time.t_end *= 0.25;
        }
        if !(c.gravity.is_finite() && c.gravity > 0.0) {
            return Err(format!("gravity {} must be positive", c.gravity));
        }
        if !(c.time.t_end.is_finite() && c.time.t_end > 0.0) {
            return Err(format!("t_end {} must be positive", c.time.t_end));
        }
        if !(c.time.cfl_safety > 0.0 && c.time.cfl_safety <= 1.0) {
            return Err(format!("cfl_safety {} must lie in (0, 1]", c.time.cfl_safety));
        }
        if let Some(dt) = c.time.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(format!("dt {dt} must be positive"));
            }
        }
        if c.models.is_empty() {
            return Err("at least one model must be selected".into());
        }
        for m in &c.models {
            if !MODEL_NAMES.contains(&m.as_str()) {
                return Err(format!(
                    "unknown model {m:?}; available: {}",
                    MODEL_NAMES.join(", ")
                ));
            }
        }
        let needs_exact = ["wigner"];
        for m in &needs_exact {
            if c.models.iter().any(|s| s == m) && !c.models.iter().any(|s| s == "exact") {
                return Err(format!("model {m:?} requires the exact model"));
            }
        }
        if c.output.cadence.is_none() {
            c.output.cadence = Some(c.time.t_end / 40.0);
        }
        let cadence = c.output.cadence.unwrap();
        if !(cadence.is_finite() && cadence > 0.0) {
            return Err(format!("output cadence {cadence} must be positive"));
        }
        if let Some(w) = c.window {
            if !(w[0] < w[1]) {
                return Err(format!("window [{}, {}] must be increasing", w[0], w[1]));
            }
            if w[0] < 0.0 || w[1] > c.grid.length[0] {
                return Err(format!(
                    "window [{}, {}] lies outside the domain [0, {}]",
                    w[0], w[1], c.grid.length[0]
                ));
            }
        } else {
            c.window = Some([0.0, c.grid.length[0]]);
        }
        if let Some(s) = &c.sponge {
            if s.width_frac[0] + s.width_frac[1] >= 0.5 || s.rate <= 0.0 {
                return Err("sponge fractions must sum below one half with a positive rate".into());
            }
        }
        // Initial-condition shape checks against the grid dimension.
        match &c.initial {
            InitialSpec::Packet { center, width, carrier, amplitude }
            | InitialSpec::EigenmodePacket { center, width, carrier, amplitude, .. } => {
                if center.len() != dims || width.len() != dims {
                    return Err("packet center/width must list one value per axis".into());
                }
                if !(carrier.is_finite() && *carrier > 0.0) {
                    return Err(format!("carrier {carrier} must be positive"));
                }
                if !amplitude.is_finite() {
                    return Err("packet amplitude must be finite".into());
                }
            }
            InitialSpec::Mode { index, .. } => {
                if dims != 1 {
                    return Err("mode initial conditions are 1D".into());
                }
                if *index == 0 || *index >= c.grid.n[0] / 2 {
                    return Err(format!(
                        "mode index {index} outside (0, {})",
                        c.grid.n[0] / 2
                    ));
                }
            }
        }
        if c.models.iter().any(|s| s == "wigner") {
            let mut w = c.wigner.clone().unwrap_or(WignerSpec {
                y_max: None,
                mu: 1.0,
                cadence: None,
            });
            if w.y_max.is_none() {
                w.y_max = Some(match &c.initial {
                    InitialSpec::Packet { width, .. }
                    | InitialSpec::EigenmodePacket { width, .. } => 8.0 * width[0],
                    InitialSpec::Mode { .. } => c.grid.length[0] / 4.0,
                });
            }
            if w.cadence.is_none() {
                w.cadence = Some(cadence);
            }
            if !(w.mu.is_finite() && w.mu > 0.0) {
                return Err(format!("wigner mu {} must be positive", w.mu));
            }
            c.wigner = Some(w);
        }
        if c.models.iter().any(|s| s == "rays") {
            let mut r = c.rays.clone().unwrap_or(RaySpec {
                t_final: None,
                dt: default_ray_dt(),
                sample_every: default_sample_every(),
            });
            if r.t_final.is_none() {
                r.t_final = Some(c.time.t_end);
            }
            if quick {
                r.t_final = Some(r.t_final.unwrap() * 0.25);
            }
            if r.sample_every == 0 {
                return Err("ray sample_every must be positive".into());
            }
            c.rays = Some(r);
        }
        if c.models.iter().any(|s| s == "schrodinger") {
            let mut s = c.schrodinger.clone().unwrap_or(SchrodingerSpec { mu: None });
            if s.mu.is_none() {
                s.mu = Some(match &c.initial {
                    InitialSpec::Packet { width, carrier, .. }
                    | InitialSpec::EigenmodePacket { width, carrier, .. } => {
                        1.0 / (carrier * width[0])
                    }
                    InitialSpec::Mode { .. } => {
                        return Err("schrodinger model needs a packet initial condition".into())
                    }
                });
            }
            c.schrodinger = Some(s);
        }
        if (c.models.iter().any(|s| s == "action") || c.models.iter().any(|s| s == "schrodinger"))
            && matches!(c.initial, InitialSpec::Mode { .. })
        {
            return Err("envelope models need a packet initial condition".into());
        }
        Ok(c)
    }
}

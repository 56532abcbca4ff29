//! Dispersion kinematics for linear surface gravity waves over finite depth.
//!
//! The intrinsic frequency is sigma(k, b) = sqrt(g |k| tanh(b |k|)); everything
//! else here (group velocity, Doppler shift by a current, wavenumber solves,
//! the diffraction tensor) derives from it analytically.

use crate::error::{Error, Result};

/// Default gravitational acceleration (m/s^2).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Frequency branch of the Doppler relation omega = U.k +/- sigma.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[inline]
fn sech_sq(t: f64) -> f64 {
    let c = t.cosh();
    1.0 / (c * c)
}

/// Intrinsic frequency sigma = sqrt(g kappa tanh(b kappa)); even in kappa and
/// continuous (-> 0) at kappa = 0.
pub fn sigma(g: f64, kappa: f64, depth: f64) -> f64 {
    let k = kappa.abs();
    (g * k * (depth * k).tanh()).sqrt()
}

pub fn sigma_vec(g: f64, k: [f64; 2], depth: f64) -> f64 {
    sigma(g, (k[0] * k[0] + k[1] * k[1]).sqrt(), depth)
}

/// d sigma / d kappa at fixed depth; the kappa -> 0 limit is sqrt(g b).
pub fn group_speed(g: f64, kappa: f64, depth: f64) -> f64 {
    let k = kappa.abs();
    if k == 0.0 {
        return (g * depth).sqrt();
    }
    let tau = depth * k;
    let s = sigma(g, k, depth);
    g * (tau.tanh() + tau * sech_sq(tau)) / (2.0 * s)
}

/// Group velocity vector d sigma / dk; undefined direction at k = 0.
pub fn group_velocity(g: f64, k: [f64; 2], depth: f64) -> Result<[f64; 2]> {
    let kappa = (k[0] * k[0] + k[1] * k[1]).sqrt();
    if kappa == 0.0 {
        return Err(Error::Degenerate("group velocity direction at k = 0".into()));
    }
    let c = group_speed(g, kappa, depth);
    Ok([c * k[0] / kappa, c * k[1] / kappa])
}

/// d sigma / d b at fixed kappa: g kappa^2 sech^2(b kappa) / (2 sigma).
pub fn sigma_depth_derivative(g: f64, kappa: f64, depth: f64) -> f64 {
    let k = kappa.abs();
    if k == 0.0 {
        return 0.0;
    }
    let tau = depth * k;
    g * k * k * sech_sq(tau) / (2.0 * sigma(g, k, depth))
}

/// d^2 sigma / d kappa^2 at fixed depth.
pub fn sigma_second_derivative(g: f64, kappa: f64, depth: f64) -> f64 {
    let k = kappa.abs();
    let tau = depth * k;
    let s = sigma(g, k, depth);
    let gp = g * (tau.tanh() + tau * sech_sq(tau));
    let gpp = 2.0 * g * depth * sech_sq(tau) * (1.0 - tau * tau.tanh());
    gpp / (2.0 * s) - gp * gp / (4.0 * s * s * s)
}

/// Doppler-shifted absolute frequency omega = U.k +/- sigma(|k|, b).
pub fn doppler_omega(g: f64, u: [f64; 2], k: [f64; 2], depth: f64, branch: Branch) -> f64 {
    u[0] * k[0] + u[1] * k[1] + branch.sign() * sigma_vec(g, k, depth)
}

/// Half-Hessian of sigma in k: D_ij = (1/2) d^2 sigma / dk_i dk_j.
///
/// Radial curvature sigma'' and tangential sigma'/kappa split; requires k != 0.
pub fn diffraction_matrix(g: f64, k: [f64; 2], depth: f64) -> Result<[[f64; 2]; 2]> {
    let kappa = (k[0] * k[0] + k[1] * k[1]).sqrt();
    if kappa == 0.0 {
        return Err(Error::Degenerate("diffraction tensor at k = 0".into()));
    }
    let e = [k[0] / kappa, k[1] / kappa];
    let radial = sigma_second_derivative(g, kappa, depth);
    let tangent = group_speed(g, kappa, depth) / kappa;
    let mut d = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let p_r = e[i] * e[j];
            let p_t = if i == j { 1.0 - p_r } else { -p_r };
            d[i][j] = 0.5 * (radial * p_r + tangent * p_t);
        }
    }
    Ok(d)
}

/// Scalar diffraction coefficient for 1-d propagation: (1/2) sigma''.
pub fn diffraction_1d(g: f64, kappa: f64, depth: f64) -> f64 {
    0.5 * sigma_second_derivative(g, kappa, depth)
}

const SOLVE_TOL: f64 = 1e-12;
const SOLVE_MAX_ITERS: usize = 50;

fn doppler_residual(g: f64, omega: f64, depth: f64, u_along: f64, branch: Branch, kappa: f64) -> f64 {
    u_along * kappa + branch.sign() * sigma(g, kappa, depth) - omega
}

fn doppler_residual_slope(g: f64, depth: f64, u_along: f64, branch: Branch, kappa: f64) -> f64 {
    u_along + branch.sign() * group_speed(g, kappa, depth)
}

fn newton_polish(
    g: f64,
    omega: f64,
    depth: f64,
    u_along: f64,
    branch: Branch,
    mut kappa: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    for _ in 0..SOLVE_MAX_ITERS {
        let f = doppler_residual(g, omega, depth, u_along, branch, kappa);
        if f.abs() < SOLVE_TOL {
            return Some(kappa);
        }
        let fp = doppler_residual_slope(g, depth, u_along, branch, kappa);
        if fp == 0.0 || !fp.is_finite() {
            return None;
        }
        let next = kappa - f / fp;
        if !next.is_finite() || next <= lo || next >= hi {
            return None;
        }
        kappa = next;
    }
    None
}

/// Solves omega = u_along kappa +/- sigma(kappa, b) for kappa in (0, kappa_max].
///
/// Newton from the deep-water guess omega^2/g, with a scan-and-bisect fallback
/// over [1e-8, 10 kappa_max]. When an opposing current excludes any root on
/// the branch (wave blocking) this returns [`Error::NoRoot`]; convergence
/// failures are reported separately.
pub fn solve_wavenumber(
    g: f64,
    omega: f64,
    depth: f64,
    u_along: f64,
    branch: Branch,
    kappa_max: f64,
) -> Result<f64> {
    if depth <= 0.0 {
        return Err(Error::NonPositiveDepth(depth));
    }
    if !(omega.is_finite() && omega > 0.0 && kappa_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wavenumber solve needs omega > 0 and kappa_max > 0 (omega={omega}, kappa_max={kappa_max})"
        )));
    }
    let lo = 1e-8;
    let hi = 10.0 * kappa_max;
    let guess = (omega * omega / g).clamp(lo * 2.0, hi * 0.5);
    if let Some(k) = newton_polish(g, omega, depth, u_along, branch, guess, lo, hi) {
        return Ok(k);
    }
    // Scan for the first sign change, then bisect onto it.
    let m = 512;
    let mut prev_k = lo;
    let mut prev_f = doppler_residual(g, omega, depth, u_along, branch, prev_k);
    let mut bracket = None;
    for i in 1..=m {
        let k = lo + (hi - lo) * i as f64 / m as f64;
        let f = doppler_residual(g, omega, depth, u_along, branch, k);
        if prev_f == 0.0 {
            bracket = Some((prev_k, prev_k));
            break;
        }
        if prev_f * f < 0.0 {
            bracket = Some((prev_k, k));
            break;
        }
        prev_k = k;
        prev_f = f;
    }
    let (mut a, mut b) = match bracket {
        Some(p) => p,
        None => return Err(Error::NoRoot { omega, u_along, depth }),
    };
    let mut fa = doppler_residual(g, omega, depth, u_along, branch, a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = doppler_residual(g, omega, depth, u_along, branch, mid);
        if fm.abs() < SOLVE_TOL {
            return Ok(mid);
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let mid = 0.5 * (a + b);
    if let Some(k) = newton_polish(g, omega, depth, u_along, branch, mid, lo, hi) {
        return Ok(k);
    }
    Err(Error::NonConvergence {
        iters: SOLVE_MAX_ITERS + 200,
        residual: doppler_residual(g, omega, depth, u_along, branch, mid).abs(),
    })
}

/// Warm-started variant: Newton from `guess` (e.g. the neighboring lattice
/// point of a steady wavenumber field), falling back to the cold solve.
pub fn solve_wavenumber_warm(
    g: f64,
    omega: f64,
    depth: f64,
    u_along: f64,
    branch: Branch,
    kappa_max: f64,
    guess: f64,
) -> Result<f64> {
    let lo = 1e-8;
    let hi = 10.0 * kappa_max;
    if guess > lo && guess < hi {
        if let Some(k) = newton_polish(g, omega, depth, u_along, branch, guess, lo, hi) {
            return Ok(k);
        }
    }
    solve_wavenumber(g, omega, depth, u_along, branch, kappa_max)
}

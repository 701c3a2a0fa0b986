//! Hamiltonian-lift (adjoint) dynamics of the two-offset time-optimal
//! problem: closed-form evolution of the lift vectors, bang durations,
//! singular-set crossing times, and singular-arc detection.
//!
//! The lift of each isochromat rotates rigidly, `d l / dt = (w_x, 0, Delta) x l`,
//! so evolution is exact. Along a bang the switching function
//! `l_x = l0_x + l1_x` obeys a closed form whose zeros give the bang
//! duration; its joint zeros with `l1_y` (never attained, see
//! `singular_crossing_times`) would mark entries to the singular set.

use crate::so3::{cross, dot, norm, scale, Vec3};
use crate::{Error, Result};

/// Lift vectors of the resonant system (`l0`) and of the offset system
/// (`l1`) for offset `delta1 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftState {
    pub l0: Vec3,
    pub l1: Vec3,
    pub delta1: f64,
}

impl LiftState {
    /// Switching function `l_x = l0_x + l1_x`.
    pub fn lx(&self) -> f64 {
        self.l0[0] + self.l1[0]
    }

    /// Pontryagin Hamiltonian `H_P = w_x l_x + delta1 * l1_z` for the
    /// given bang sign.
    pub fn hamiltonian(&self, control_sign: f64, omega0: f64) -> f64 {
        control_sign * omega0 * self.lx() + self.delta1 * self.l1[2]
    }
}

/// Rotates `v` rigidly for time `t` under `dv/dt = a x v`.
fn rotate_vec(a: &Vec3, t: f64, v: &Vec3) -> Vec3 {
    let rate = norm(a);
    if rate == 0.0 {
        return *v;
    }
    let u = scale(a, 1.0 / rate);
    let theta = rate * t;
    let (s, c) = theta.sin_cos();
    let uxv = cross(&u, v);
    let udv = dot(&u, v);
    [
        v[0] * c + uxv[0] * s + u[0] * udv * (1.0 - c),
        v[1] * c + uxv[1] * s + u[1] * udv * (1.0 - c),
        v[2] * c + uxv[2] * s + u[2] * udv * (1.0 - c),
    ]
}

/// Evolves the lift for time `t` under a bang of sign `control_sign`:
/// `l0` rotates about `(w_x, 0, 0)` and `l1` about `(w_x, 0, delta1)`.
pub fn lift_evolve(state: &LiftState, control_sign: f64, omega0: f64, t: f64) -> LiftState {
    let wx = control_sign.signum() * omega0;
    LiftState {
        l0: rotate_vec(&[wx, 0.0, 0.0], t, &state.l0),
        l1: rotate_vec(&[wx, 0.0, state.delta1], t, &state.l1),
        delta1: state.delta1,
    }
}

/// Switching parameters of a bang: `A = (l1_x Delta1 - l1_z w_x) / (l1_y Omega)`
/// and `Omega = sqrt(omega0^2 + delta1^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchParam {
    pub a: f64,
    pub omega: f64,
}

impl SwitchParam {
    pub fn new(a: f64, omega: f64) -> Result<SwitchParam> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter(format!("Omega = {omega} must be positive")));
        }
        Ok(SwitchParam { a, omega })
    }

    /// Computes the switch parameters from a lift state at a switching
    /// time. States with `l1_y` below `1e-12 * |l1|` belong to the
    /// singular branch and are rejected.
    pub fn from_lift(state: &LiftState, control_sign: f64, omega0: f64) -> Result<SwitchParam> {
        let wx = control_sign.signum() * omega0;
        let omega = (omega0 * omega0 + state.delta1 * state.delta1).sqrt();
        if state.l1[1].abs() < 1e-12 * norm(&state.l1) {
            return Err(Error::SingularSetInput);
        }
        let a = (state.l1[0] * state.delta1 - state.l1[2] * wx) / (state.l1[1] * omega);
        SwitchParam::new(a, omega)
    }
}

/// Smallest `t > 0` with `sin(Omega t) + A (1 - cos(Omega t)) = 0`, i.e.
/// the minimum over `k >= 1` of `(2/Omega) k pi` and
/// `(2/Omega)(k pi - arctan(1/A))` restricted to positive values.
pub fn next_bang_duration(p: &SwitchParam) -> Result<f64> {
    if !p.a.is_finite() || p.a == 0.0 {
        return Err(Error::SingularSetInput);
    }
    // zeros of l_x factor as sin(Omega t / 2) [cos(Omega t / 2) + A sin(Omega t / 2)];
    // the first family gives t = 2 pi / Omega, the second the first positive
    // solution of tan(Omega t / 2) = -1/A
    let pi = std::f64::consts::PI;
    let half_angle = (-1.0 / p.a).atan().rem_euclid(pi);
    let family1 = 2.0 * pi / p.omega;
    let family2 = 2.0 * half_angle / p.omega;
    Ok(if family2 > 1e-12 && family2 < family1 {
        family2
    } else {
        family1
    })
}

/// Candidate entry times to the singular set, `t = (k pi - arctan(1/A)) / Omega`
/// for `k = 1..k_max`; these solve `l_x = l1_y = 0` jointly.
pub fn singular_crossing_times(p: &SwitchParam, k_max: u32) -> Result<Vec<f64>> {
    if !p.a.is_finite() || p.a == 0.0 {
        return Err(Error::SingularSetInput);
    }
    let atan = (1.0 / p.a).atan();
    Ok((1..=k_max)
        .map(|k| (k as f64 * std::f64::consts::PI - atan) / p.omega)
        .filter(|&t| t > 0.0)
        .collect())
}

/// True iff the state satisfies the three singular-arc conditions
/// `l_x = 0`, `l1_y = 0` and `-delta1^2 l1_x + w_s delta1 l1_z = 0` within
/// `tol` (the last scaled by `delta1 * max(|l1|, 1)`).
pub fn is_singular_arc(state: &LiftState, omega_s: f64, tol: f64) -> bool {
    let d = state.delta1;
    state.lx().abs() < tol
        && state.l1[1].abs() < tol
        && (-d * d * state.l1[0] + omega_s * d * state.l1[2]).abs()
            < tol * d * norm(&state.l1).max(1.0)
}

/// Switching function after an S -> B transition candidate:
/// `l_x(t) = -(delta1^2/Omega^2) l1_x (1 - w_x/w_s)(1 - cos(Omega t))`.
/// `omega_x` is the signed bang amplitude.
pub fn singular_exit_lx(
    l1x_at_switch: f64,
    delta1: f64,
    omega_x: f64,
    omega_s: f64,
    t: f64,
) -> f64 {
    let omega2 = omega_x * omega_x + delta1 * delta1;
    -(delta1 * delta1 / omega2)
        * l1x_at_switch
        * (1.0 - omega_x / omega_s)
        * (1.0 - (omega2.sqrt() * t).cos())
}

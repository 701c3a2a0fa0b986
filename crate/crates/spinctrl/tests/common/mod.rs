//! Shared test oracles: a fixed-step RK4 integrator for the rotation
//! dynamics, independent of the library's closed-form propagation.

// each test binary uses its own subset of these helpers
#![allow(dead_code)]

use spinctrl::propagation::ControlField;
use spinctrl::so3::{mat_mul, Axis, Mat3, so3_generator};

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn add_scaled(a: &Mat3, b: &Mat3, s: f64) -> Mat3 {
    let mut out = *a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += s * b[i][j];
        }
    }
    out
}

/// Integrates dU/dt = (w eps_x + delta eps_z) U with classical RK4.
pub fn rk4_propagate(field: &ControlField, delta: f64, steps_per_unit_angle: usize) -> Mat3 {
    let ex = so3_generator(Axis::X);
    let ez = so3_generator(Axis::Z);
    let mut u = IDENTITY;
    for seg in &field.segments {
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = seg.amplitude * ex[i][j] + delta * ez[i][j];
            }
        }
        let rate = (seg.amplitude * seg.amplitude + delta * delta).sqrt().max(1.0);
        let n = ((seg.duration * rate * steps_per_unit_angle as f64).ceil() as usize).max(1);
        let h = seg.duration / n as f64;
        for _ in 0..n {
            let k1 = mat_mul(&a, &u);
            let k2 = mat_mul(&a, &add_scaled(&u, &k1, h / 2.0));
            let k3 = mat_mul(&a, &add_scaled(&u, &k2, h / 2.0));
            let k4 = mat_mul(&a, &add_scaled(&u, &k3, h));
            for i in 0..3 {
                for j in 0..3 {
                    u[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
                }
            }
        }
    }
    u
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

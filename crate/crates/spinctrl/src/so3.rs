//! Exact SO(3)/quaternion algebra: generators, closed-form exponentials,
//! composition and Frobenius-norm fidelity.
//!
//! Conventions. The three generators are the skew-symmetric matrices of
//! the Bloch equation, with `[eps_x, eps_y] = -eps_z` (cyclically). A
//! rotation of angle `gamma` about a unit axis `n` is the matrix
//! `exp(gamma * (n_x eps_x + n_y eps_y + n_z eps_z))` and is represented
//! by the unit quaternion `q = cos(gamma/2) - sin(gamma/2) (n . ijk)`.

use crate::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY_MAT: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Generator label of the so(3) algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Returns the skew-symmetric generator `eps_a`.
///
/// The sign convention matches the Bloch drift matrix: the offset term
/// `Delta * eps_z` has entry `(0, 1) = +Delta`.
pub fn so3_generator(axis: Axis) -> Mat3 {
    match axis {
        Axis::X => [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]],
        Axis::Y => [[0.0, 0.0, -1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        Axis::Z => [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    }
}

// ---------------------------------------------------------------------------
// Small dense helpers. Hand-rolled: everything here is 3x3.
// ---------------------------------------------------------------------------

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn mat_transpose(a: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn mat_trace(a: &Mat3) -> f64 {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn mat_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    let mut w = [0.0; 3];
    for i in 0..3 {
        w[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    }
    w
}

/// Squared Frobenius norm of the elementwise difference.
pub fn frobenius_sq(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let d = a[i][j] - b[i][j];
            s += d * d;
        }
    }
    s
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

// ---------------------------------------------------------------------------
// Quaternions
// ---------------------------------------------------------------------------

/// Unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quat) -> Quat {
        Quat {
            w: self.w * rhs.w - self.x * rhs.x - self.y * rhs.y - self.z * rhs.z,
            x: self.w * rhs.x + self.x * rhs.w + self.y * rhs.z - self.z * rhs.y,
            y: self.w * rhs.y - self.x * rhs.z + self.y * rhs.w + self.z * rhs.x,
            z: self.w * rhs.z + self.x * rhs.y - self.y * rhs.x + self.z * rhs.w,
        }
    }

    pub fn conj(&self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// Fixes the overall sign so that `w >= 0`; on `w == 0` the first
    /// nonzero imaginary component is made positive. `q` and `-q` encode
    /// the same rotation, so this makes equality checks deterministic.
    fn canonical(&self) -> Quat {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else if self.x != 0.0 {
            self.x < 0.0
        } else if self.y != 0.0 {
            self.y < 0.0
        } else {
            self.z < 0.0
        };
        if flip {
            Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            *self
        }
    }

    pub fn to_matrix(&self) -> Mat3 {
        let Quat { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Shepperd-style extraction from an orthogonal matrix.
    pub fn from_matrix(m: &Mat3) -> Quat {
        let tr = mat_trace(m);
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m[2][1] - m[1][2]) / s,
                y: (m[0][2] - m[2][0]) / s,
                z: (m[1][0] - m[0][1]) / s,
            }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[2][1] - m[1][2]) / s,
                x: 0.25 * s,
                y: (m[0][1] + m[1][0]) / s,
                z: (m[0][2] + m[2][0]) / s,
            }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[0][2] - m[2][0]) / s,
                x: (m[0][1] + m[1][0]) / s,
                y: 0.25 * s,
                z: (m[1][2] + m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat {
                w: (m[1][0] - m[0][1]) / s,
                x: (m[0][2] + m[2][0]) / s,
                y: (m[1][2] + m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized().canonical()
    }
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// An SO(3) element stored as a 3x3 orthogonal matrix with its unit
/// quaternion companion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    matrix: Mat3,
    quat: Quat,
}

impl Rotation {
    pub fn identity() -> Rotation {
        Rotation { matrix: IDENTITY_MAT, quat: Quat::IDENTITY }
    }

    pub fn from_matrix(matrix: Mat3) -> Rotation {
        Rotation { matrix, quat: Quat::from_matrix(&matrix) }
    }

    pub fn from_quat(q: Quat) -> Rotation {
        let q = q.normalized().canonical();
        Rotation { matrix: q.to_matrix(), quat: q }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn quat(&self) -> Quat {
        self.quat
    }

    pub fn trace(&self) -> f64 {
        mat_trace(&self.matrix)
    }

    pub fn inverse(&self) -> Rotation {
        Rotation {
            matrix: mat_transpose(&self.matrix),
            quat: self.quat.conj().canonical(),
        }
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        mat_vec(&self.matrix, v)
    }

    /// Extracts the axis-angle form `(gamma, n)` with `gamma` in `[0, pi]`
    /// (the canonical quaternion has `w >= 0`).
    pub fn to_axis_angle(&self) -> AxisAngle {
        let q = self.quat;
        let angle = 2.0 * q.w.clamp(-1.0, 1.0).acos();
        let s = (angle / 2.0).sin();
        if s.abs() < 1e-9 {
            AxisAngle { axis: [1.0, 0.0, 0.0], angle: normalize_angle(angle), axis_defined: false }
        } else {
            // q = (cos(g/2), -sin(g/2) n)
            AxisAngle {
                axis: [-q.x / s, -q.y / s, -q.z / s],
                angle: normalize_angle(angle),
                axis_defined: true,
            }
        }
    }
}

/// Returns the rotation "a after b", i.e. the matrix product `a * b`.
pub fn compose(a: &Rotation, b: &Rotation) -> Rotation {
    Rotation {
        matrix: mat_mul(&a.matrix, &b.matrix),
        quat: a.quat.mul(&b.quat).normalized().canonical(),
    }
}

/// Closed-form exponential `exp(duration * (c_x eps_x + c_y eps_y + c_z eps_z))`
/// via the Rodrigues formula; exact at all durations.
pub fn rot_exp(direction: Vec3, duration: f64) -> Rotation {
    let v = scale(&direction, duration);
    let theta = norm(&v);
    if theta < 1e-300 {
        return Rotation::identity();
    }
    let u = scale(&v, 1.0 / theta);
    // K = u_x eps_x + u_y eps_y + u_z eps_z
    let k = [
        [0.0, u[2], -u[1]],
        [-u[2], 0.0, u[0]],
        [u[1], -u[0], 0.0],
    ];
    let k2 = mat_mul(&k, &k);
    let (s, c) = theta.sin_cos();
    let mut m = IDENTITY_MAT;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += s * k[i][j] + (1.0 - c) * k2[i][j];
        }
    }
    let h = theta / 2.0;
    let q = Quat { w: h.cos(), x: -h.sin() * u[0], y: -h.sin() * u[1], z: -h.sin() * u[2] };
    Rotation { matrix: m, quat: q.canonical() }
}

/// Squared Frobenius distance `|| u - target ||^2 = 6 - 2 tr(target^T u)`.
pub fn fidelity(u: &Rotation, target: &Rotation) -> f64 {
    6.0 - 2.0 * mat_trace(&mat_mul(&mat_transpose(&target.matrix), &u.matrix))
}

// ---------------------------------------------------------------------------
// Axis-angle
// ---------------------------------------------------------------------------

fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    if r >= two_pi {
        r = 0.0;
    }
    r
}

/// Rotation expressed as a unit axis and an angle in `[0, 2*pi)`.
///
/// `axis_defined` is false for degenerate angles (`gamma = 2*k*pi`) where
/// the axis is arbitrary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
    pub axis_defined: bool,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Result<AxisAngle> {
        let n = norm(&axis);
        if !(n.is_finite() && n > 0.0) || !angle.is_finite() || angle < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "axis-angle ({axis:?}, {angle}) is not a finite unit axis with non-negative angle"
            )));
        }
        Ok(AxisAngle {
            axis: scale(&axis, 1.0 / n),
            angle: normalize_angle(angle),
            axis_defined: true,
        })
    }

    pub fn to_rotation(&self) -> Rotation {
        rot_exp(self.axis, self.angle)
    }
}

/// Composition of two rotations in axis-angle form ("a after b") using the
/// closed forms
/// `cos(g/2) = cos((a-b)/2) sin^2(t/2) + cos((a+b)/2) cos^2(t/2)` with
/// `cos t = n1 . n2`, and the matching axis formula. Agrees with the
/// matrix-product composition.
pub fn compose_axis_angle(a: &AxisAngle, b: &AxisAngle) -> AxisAngle {
    let alpha = a.angle;
    let beta = b.angle;
    let n1 = a.axis;
    let n2 = b.axis;
    let cos_theta = dot(&n1, &n2);

    let ha = alpha / 2.0;
    let hb = beta / 2.0;
    // cos(g/2) = cos(a/2)cos(b/2) - sin(a/2)sin(b/2) cos(theta); the
    // half-angle-of-theta form in the docs is the same quantity.
    let cg2 = (ha.cos() * hb.cos() - ha.sin() * hb.sin() * cos_theta).clamp(-1.0, 1.0);
    let gamma = 2.0 * cg2.acos();
    let sg2 = (gamma / 2.0).sin();

    if sg2.abs() < 1e-9 {
        return AxisAngle {
            axis: [1.0, 0.0, 0.0],
            angle: normalize_angle(gamma),
            axis_defined: false,
        };
    }

    let n1xn2 = cross(&n1, &n2);
    let mut n3 = [0.0; 3];
    for i in 0..3 {
        n3[i] = (ha.cos() * hb.sin() * n2[i] + hb.cos() * ha.sin() * n1[i]
            - ha.sin() * hb.sin() * n1xn2[i])
            / sg2;
    }
    let nn = norm(&n3);
    AxisAngle {
        axis: scale(&n3, 1.0 / nn),
        angle: normalize_angle(gamma),
        axis_defined: true,
    }
}

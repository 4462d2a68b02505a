//! Minimal fixed-size 3-vector / 3×3 matrix arithmetic.
//!
//! Everything in this crate is 3-dimensional by construction, so we use plain
//! `[f64; 3]` vectors and a thin row-major matrix wrapper instead of a general
//! linear-algebra dependency. All operations are straight-line f64 arithmetic,
//! which keeps results bitwise reproducible on a given platform.

/// A 3-vector of f64 (position, mean offset, eigenvalue triple, ...).
pub type Vec3 = [f64; 3];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

pub fn norm3_sq(a: Vec3) -> f64 {
    dot3(a, a)
}

pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn finite3(a: Vec3) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Row-major 3×3 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const fn new(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn zero() -> Self {
        Self::new([[0.0; 3]; 3])
    }

    pub fn identity() -> Self {
        Self::from_diag([1.0, 1.0, 1.0])
    }

    pub fn from_diag(d: Vec3) -> Self {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            m[i][i] = d[i];
        }
        Self::new(m)
    }

    /// Builds the matrix whose columns are `c0`, `c1`, `c2`.
    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self::new([
            [c0[0], c1[0], c2[0]],
            [c0[1], c1[1], c2[1]],
            [c0[2], c1[2], c2[2]],
        ])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        [self.m[0][j], self.m[1][j], self.m[2][j]]
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                t[i][j] = self.m[j][i];
            }
        }
        Mat3::new(t)
    }

    pub fn mul(&self, other: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = self.m[i][0] * other.m[0][j]
                    + self.m[i][1] * other.m[1][j]
                    + self.m[i][2] * other.m[2][j];
            }
        }
        Mat3::new(r)
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1] + self.m[0][2] * v[2],
            self.m[1][0] * v[0] + self.m[1][1] * v[1] + self.m[1][2] * v[2],
            self.m[2][0] * v[0] + self.m[2][1] * v[1] + self.m[2][2] * v[2],
        ]
    }

    pub fn add(&self, other: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = self.m[i][j] + other.m[i][j];
            }
        }
        Mat3::new(r)
    }

    pub fn sub(&self, other: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = self.m[i][j] - other.m[i][j];
            }
        }
        Mat3::new(r)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = self.m[i][j] * s;
            }
        }
        Mat3::new(r)
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; caller guarantees `det != 0`.
    pub fn inverse(&self) -> Mat3 {
        let m = &self.m;
        let det = self.det();
        let inv_det = 1.0 / det;
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Mat3::new(adj).scale(inv_det)
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.m[i][j] * self.m[i][j];
            }
        }
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|row| row.iter().all(|x| x.is_finite()))
    }
}

/// Unit quaternion helpers, stored as `[w, x, y, z]`.
pub mod quat {
    use super::{Mat3, Vec3};

    pub type Quat = [f64; 4];

    pub fn norm(q: Quat) -> f64 {
        (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt()
    }

    pub fn normalize(q: Quat) -> Quat {
        let n = norm(q);
        [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
    }

    /// Canonical double-cover representative: w >= 0 (ties keep the input).
    pub fn canonicalize(q: Quat) -> Quat {
        if q[0] < 0.0 {
            [-q[0], -q[1], -q[2], -q[3]]
        } else {
            q
        }
    }

    /// Hamilton product `a * b` (apply `b` first, then `a`).
    pub fn mul(a: Quat, b: Quat) -> Quat {
        [
            a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
        ]
    }

    /// Quaternion for a rotation of `angle` radians about unit `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let h = 0.5 * angle;
        let s = h.sin();
        [h.cos(), axis[0] * s, axis[1] * s, axis[2] * s]
    }

    /// Quaternion for the rotation vector `v` (axis * angle).
    pub fn from_rotvec(v: Vec3) -> Quat {
        let angle = super::norm3(v);
        if angle < 1e-300 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        from_axis_angle(super::scale3(v, 1.0 / angle), angle)
    }

    pub fn to_mat(q: Quat) -> Mat3 {
        let [w, x, y, z] = q;
        Mat3::new([
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
        ])
    }

    /// Rotation matrix (det +1, orthonormal) to quaternion, Shepperd's method.
    pub fn from_mat(r: &Mat3) -> Quat {
        let m = &r.m;
        let tr = m[0][0] + m[1][1] + m[2][2];
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            [
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            ]
        };
        canonicalize(normalize(q))
    }
}

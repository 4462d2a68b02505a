//! Stabilized primitives for symmetric / SPD 3×3 matrices.
//!
//! This is the numerical kernel everything else sits on: canonical symmetric
//! storage, a deterministic Jacobi eigensolver, eigenvalue-clamped square
//! roots and inverse square roots, and the Sylvester solve used by the
//! exponential map. Operations never panic on finite input; near-singular
//! matrices are handled by flooring eigenvalues at [`EPSILON_PD`].

use crate::error::{BuresError, Result};
use crate::mat3::{Mat3, Vec3};

/// Eigenvalue floor for positive definiteness (also used as the εI shift).
pub const EPSILON_PD: f64 = 1e-8;

/// Condition number above which inverse square roots are reported as
/// precision-degraded on the warning channel.
pub const CONDITION_WARN_THRESHOLD: f64 = 1e8;

/// Symmetric 3×3 matrix stored as its six independent entries, so an
/// asymmetric value is unrepresentable.
///
/// Entry order: `(m00, m01, m02, m11, m12, m22)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat3 {
    e: [f64; 6],
}

impl SymMat3 {
    pub const fn from_upper(m00: f64, m01: f64, m02: f64, m11: f64, m12: f64, m22: f64) -> Self {
        Self {
            e: [m00, m01, m02, m11, m12, m22],
        }
    }

    pub fn zero() -> Self {
        Self { e: [0.0; 6] }
    }

    pub fn identity() -> Self {
        Self::from_diag([1.0, 1.0, 1.0])
    }

    pub fn from_diag(d: Vec3) -> Self {
        Self::from_upper(d[0], 0.0, 0.0, d[1], 0.0, d[2])
    }

    /// Reads the upper triangle of `m`, which must already be symmetric to
    /// round-off; use [`symmetrize`] for general matrices.
    pub fn from_mat_upper(m: &Mat3) -> Self {
        Self::from_upper(
            m.m[0][0], m.m[0][1], m.m[0][2], m.m[1][1], m.m[1][2], m.m[2][2],
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        const IDX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
        self.e[IDX[i][j]]
    }

    pub fn to_mat(&self) -> Mat3 {
        let [a, b, c, d, e, f] = self.e;
        Mat3::new([[a, b, c], [b, d, e], [c, e, f]])
    }

    pub fn diag(&self) -> Vec3 {
        [self.e[0], self.e[3], self.e[5]]
    }

    pub fn trace(&self) -> f64 {
        self.e[0] + self.e[3] + self.e[5]
    }

    pub fn add(&self, other: &SymMat3) -> SymMat3 {
        let mut e = [0.0; 6];
        for k in 0..6 {
            e[k] = self.e[k] + other.e[k];
        }
        SymMat3 { e }
    }

    pub fn sub(&self, other: &SymMat3) -> SymMat3 {
        let mut e = [0.0; 6];
        for k in 0..6 {
            e[k] = self.e[k] - other.e[k];
        }
        SymMat3 { e }
    }

    pub fn scale(&self, s: f64) -> SymMat3 {
        let mut e = [0.0; 6];
        for k in 0..6 {
            e[k] = self.e[k] * s;
        }
        SymMat3 { e }
    }

    pub fn neg(&self) -> SymMat3 {
        self.scale(-1.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        let [a, b, c, d, e, f] = self.e;
        (a * a + d * d + f * f + 2.0 * (b * b + c * c + e * e)).sqrt()
    }

    pub fn det(&self) -> f64 {
        self.to_mat().det()
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|x| x.is_finite())
    }

    /// Largest-magnitude entry, used for relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.e.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Symmetric positive-definite 3×3 matrix: a [`SymMat3`] whose eigenvalues
/// were verified (or clamped) to be at least the construction floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMat3 {
    sym: SymMat3,
}

impl SpdMat3 {
    /// Validates that `sym` has all eigenvalues >= `EPSILON_PD` (with a tiny
    /// relative guard band for round-off at the floor).
    pub fn new(sym: SymMat3) -> Result<Self> {
        if !sym.is_finite() {
            return Err(BuresError::NonFinite { context: "SpdMat3" });
        }
        let eig = eigh3(&sym);
        if eig.values[0] < EPSILON_PD * (1.0 - 1e-9) {
            return Err(BuresError::Config(format!(
                "matrix is not positive definite: min eigenvalue {:.3e} < {:.1e}",
                eig.values[0],
                EPSILON_PD
            )));
        }
        Ok(Self { sym })
    }

    /// Projects an arbitrary symmetric matrix onto the PD cone by flooring
    /// eigenvalues at `floor`. Inputs already at or above the floor (within a
    /// 1e-12 relative guard band) are returned bitwise unchanged, which makes
    /// the projection idempotent.
    pub fn project(sym: SymMat3, floor: f64) -> Result<Self> {
        if !sym.is_finite() {
            return Err(BuresError::NonFinite { context: "SpdMat3::project" });
        }
        let eig = eigh3(&sym);
        if eig.values[0] >= floor * (1.0 - 1e-12) {
            return Ok(Self { sym });
        }
        let clamped = clamp_eigenvalues(&eig, floor);
        Ok(Self {
            sym: clamped.reconstruct(),
        })
    }

    pub fn identity() -> Self {
        Self {
            sym: SymMat3::identity(),
        }
    }

    /// Diagonal SPD matrix; entries must be at least `EPSILON_PD`.
    pub fn from_diag(d: Vec3) -> Result<Self> {
        Self::new(SymMat3::from_diag(d))
    }

    /// Internal constructor for values that are PD by construction
    /// (eigenvalue-clamped reconstructions).
    pub(crate) fn from_sym_unchecked(sym: SymMat3) -> Self {
        Self { sym }
    }

    pub fn sym(&self) -> &SymMat3 {
        &self.sym
    }

    pub fn to_mat(&self) -> Mat3 {
        self.sym.to_mat()
    }
}

/// Eigendecomposition of a symmetric 3×3 matrix: `Q Λ Qᵀ` with eigenvalues
/// ascending and orthonormal eigenvector columns under a deterministic sign
/// convention (largest-magnitude component of each column is nonnegative).
#[derive(Debug, Clone, Copy)]
pub struct EigenSystem3 {
    pub values: Vec3,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: Mat3,
}

impl EigenSystem3 {
    pub fn reconstruct(&self) -> SymMat3 {
        let q = &self.vectors;
        let lam = self.values;
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += q.m[i][k] * lam[k] * q.m[j][k];
                }
                m[i][j] = s;
            }
        }
        // Exactly symmetric by summation order: mirror the upper triangle.
        SymMat3::from_upper(m[0][0], m[0][1], m[0][2], m[1][1], m[1][2], m[2][2])
    }
}

/// `(m + mᵀ)/2` into canonical symmetric storage.
pub fn symmetrize(m: &Mat3) -> Result<SymMat3> {
    if !m.is_finite() {
        return Err(BuresError::NonFinite { context: "symmetrize" });
    }
    Ok(SymMat3::from_upper(
        m.m[0][0],
        0.5 * (m.m[0][1] + m.m[1][0]),
        0.5 * (m.m[0][2] + m.m[2][0]),
        m.m[1][1],
        0.5 * (m.m[1][2] + m.m[2][1]),
        m.m[2][2],
    ))
}

/// Cyclic Jacobi eigensolver for symmetric 3×3 matrices.
///
/// Fixed sweep order and a scale-relative convergence test make the result a
/// pure function of the input bits on a given platform. Accuracy is at the
/// round-off level (reconstruction residual ~1e-15 relative).
pub fn eigh3(s: &SymMat3) -> EigenSystem3 {
    let mut a = s.to_mat().m;
    let mut q = Mat3::identity().m;

    let scale = s.max_abs();
    if scale == 0.0 {
        return EigenSystem3 {
            values: [0.0, 0.0, 0.0],
            vectors: Mat3::identity(),
        };
    }
    let tol = 1e-30 * scale * scale;

    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    for _sweep in 0..50 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= tol {
            break;
        }
        for &(p, r) in &PAIRS {
            let apr = a[p][r];
            if apr == 0.0 {
                continue;
            }
            // Classic Jacobi rotation annihilating a[p][r].
            let theta = (a[r][r] - a[p][p]) / (2.0 * apr);
            let t = if theta >= 0.0 {
                1.0 / (theta + (1.0 + theta * theta).sqrt())
            } else {
                1.0 / (theta - (1.0 + theta * theta).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let sn = t * c;

            for k in 0..3 {
                let akp = a[k][p];
                let akr = a[k][r];
                a[k][p] = c * akp - sn * akr;
                a[k][r] = sn * akp + c * akr;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let ark = a[r][k];
                a[p][k] = c * apk - sn * ark;
                a[r][k] = sn * apk + c * ark;
            }
            a[p][r] = 0.0;
            a[r][p] = 0.0;
            for k in 0..3 {
                let qkp = q[k][p];
                let qkr = q[k][r];
                q[k][p] = c * qkp - sn * qkr;
                q[k][r] = sn * qkp + c * qkr;
            }
        }
    }

    let mut values = [a[0][0], a[1][1], a[2][2]];
    let mut cols: [Vec3; 3] = [
        [q[0][0], q[1][0], q[2][0]],
        [q[0][1], q[1][1], q[2][1]],
        [q[0][2], q[1][2], q[2][2]],
    ];

    // Ascending insertion sort; stable so equal eigenvalues keep Jacobi order.
    for i in 1..3 {
        let mut j = i;
        while j > 0 && values[j - 1] > values[j] {
            values.swap(j - 1, j);
            cols.swap(j - 1, j);
            j -= 1;
        }
    }

    // Sign convention: largest-magnitude component nonnegative, ties broken
    // by the lowest index.
    for col in &mut cols {
        let mut best = 0;
        for k in 1..3 {
            if col[k].abs() > col[best].abs() {
                best = k;
            }
        }
        if col[best] < 0.0 {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
    }

    EigenSystem3 {
        values,
        vectors: Mat3::from_cols(cols[0], cols[1], cols[2]),
    }
}

/// Replaces every eigenvalue by `max(λ, floor)`; eigenvectors unchanged.
pub fn clamp_eigenvalues(e: &EigenSystem3, floor: f64) -> EigenSystem3 {
    EigenSystem3 {
        values: [
            e.values[0].max(floor),
            e.values[1].max(floor),
            e.values[2].max(floor),
        ],
        vectors: e.vectors,
    }
}

fn map_eigenvalues(a: &SpdMat3, f: impl Fn(f64) -> f64) -> (SymMat3, Vec3) {
    let eig = clamp_eigenvalues(&eigh3(a.sym()), EPSILON_PD);
    let mapped = EigenSystem3 {
        values: [f(eig.values[0]), f(eig.values[1]), f(eig.values[2])],
        vectors: eig.vectors,
    };
    (mapped.reconstruct(), eig.values)
}

/// Principal matrix square root via eigendecomposition with the eigenvalue
/// floor applied first.
pub fn sqrt_spd(a: &SpdMat3) -> SpdMat3 {
    let (sym, _) = map_eigenvalues(a, f64::sqrt);
    SpdMat3::from_sym_unchecked(sym)
}

/// Inverse square root `A^{-1/2}`. Condition numbers above
/// [`CONDITION_WARN_THRESHOLD`] are reported on the log warning channel as
/// precision-degraded; the floored eigenvalues keep the value finite.
pub fn inv_sqrt_spd(a: &SpdMat3) -> SpdMat3 {
    let (sym, values) = map_eigenvalues(a, |l| 1.0 / l.sqrt());
    let cond = values[2] / values[0];
    if cond > CONDITION_WARN_THRESHOLD {
        log::warn!("inv_sqrt_spd: condition number {cond:.3e} exceeds {CONDITION_WARN_THRESHOLD:.0e}, precision degraded");
    }
    SpdMat3::from_sym_unchecked(sym)
}

/// Square root and inverse square root from a single eigendecomposition;
/// bitwise-identical to calling [`sqrt_spd`] and [`inv_sqrt_spd`] separately.
pub(crate) fn sqrt_pair(a: &SpdMat3) -> (SymMat3, SymMat3) {
    let eig = clamp_eigenvalues(&eigh3(a.sym()), EPSILON_PD);
    let cond = eig.values[2] / eig.values[0];
    if cond > CONDITION_WARN_THRESHOLD {
        log::warn!("sqrt_pair: condition number {cond:.3e} exceeds {CONDITION_WARN_THRESHOLD:.0e}, precision degraded");
    }
    let root = EigenSystem3 {
        values: [
            eig.values[0].sqrt(),
            eig.values[1].sqrt(),
            eig.values[2].sqrt(),
        ],
        vectors: eig.vectors,
    };
    let inv_root = EigenSystem3 {
        values: [
            1.0 / eig.values[0].sqrt(),
            1.0 / eig.values[1].sqrt(),
            1.0 / eig.values[2].sqrt(),
        ],
        vectors: eig.vectors,
    };
    (root.reconstruct(), inv_root.reconstruct())
}

/// Square root of a symmetric matrix that is PD up to round-off: negative
/// eigenvalues are clipped at zero before the root. Used for the inner
/// products `(Σ^{1/2} Λ Σ^{1/2})^{1/2}` where the argument is SPD in exact
/// arithmetic.
pub(crate) fn sqrt_psd(s: &SymMat3) -> SymMat3 {
    let eig = eigh3(s);
    let clipped = EigenSystem3 {
        values: [
            eig.values[0].max(0.0).sqrt(),
            eig.values[1].max(0.0).sqrt(),
            eig.values[2].max(0.0).sqrt(),
        ],
        vectors: eig.vectors,
    };
    clipped.reconstruct()
}

/// Solves `Γ Σ + Σ Γ = Δ` for symmetric `Δ` and SPD `Σ`.
///
/// Solved in the eigenbasis of `Σ`: with `Σ = Q Λ Qᵀ` and `Δ' = Qᵀ Δ Q`, the
/// solution is `Γ'_ij = Δ'_ij / (λ_i + λ_j)`, transformed back. SPD `Σ`
/// guarantees `λ_i + λ_j > 0`, so the solution always exists and is unique;
/// symmetry of `Δ` makes `Γ` symmetric.
pub fn solve_sylvester(sigma: &SpdMat3, delta: &SymMat3) -> SymMat3 {
    let eig = clamp_eigenvalues(&eigh3(sigma.sym()), EPSILON_PD);
    let q = &eig.vectors;
    let qt = q.transpose();
    let dp = qt.mul(&delta.to_mat()).mul(q);

    let mut gp = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            gp[i][j] = dp.m[i][j] / (eig.values[i] + eig.values[j]);
        }
    }
    let g = q.mul(&Mat3::new(gp)).mul(&qt);
    // Γ is symmetric in exact arithmetic; average the off-diagonal round-off.
    SymMat3::from_upper(
        g.m[0][0],
        0.5 * (g.m[0][1] + g.m[1][0]),
        0.5 * (g.m[0][2] + g.m[2][0]),
        g.m[1][1],
        0.5 * (g.m[1][2] + g.m[2][1]),
        g.m[2][2],
    )
}

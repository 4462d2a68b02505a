//! Core domain types for 3D Gaussians.
//!
//! A Gaussian is carried either as a mean plus full SPD covariance
//! ([`Gaussian3`]) or in the rotation/scale decomposed form used by splatting
//! pipelines ([`DecomposedCov`], composed as `R diag(s)² Rᵀ`). Conversions in
//! both directions and the projection back to validity live here, together
//! with the JSON atom used by scene files.

use serde::{Deserialize, Serialize};

use crate::error::{BuresError, Result};
use crate::mat3::{self, quat, Mat3, Vec3};
use crate::spd::{self, SpdMat3, SymMat3, EPSILON_PD};

/// Minimum per-axis scale (standard deviation): `sqrt(EPSILON_PD)`, so the
/// composed covariance has eigenvalues at least `EPSILON_PD`.
pub const MIN_SCALE: f64 = 1e-4;

/// A single 3D Gaussian: mean position and SPD covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian3 {
    pub mean: Vec3,
    pub cov: SpdMat3,
}

impl Gaussian3 {
    pub fn new(mean: Vec3, cov: SpdMat3) -> Result<Self> {
        if !mat3::finite3(mean) {
            return Err(BuresError::NonFinite { context: "Gaussian3 mean" });
        }
        Ok(Self { mean, cov })
    }

    /// Isotropic Gaussian `N(mean, s²·I)`.
    pub fn isotropic(mean: Vec3, sigma: f64) -> Result<Self> {
        let v = sigma * sigma;
        Ok(Self {
            mean,
            cov: SpdMat3::from_diag([v, v, v])?,
        })
    }
}

/// Covariance in decomposed form: unit quaternion plus per-axis standard
/// deviations (the splatting convention; `Σ = R S Sᵀ Rᵀ` with `S = diag(scale)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposedCov {
    rot: quat::Quat,
    scale: Vec3,
}

impl DecomposedCov {
    /// Normalizes the quaternion and clamps scales to [`MIN_SCALE`].
    pub fn new(rot: quat::Quat, scale: Vec3) -> Result<Self> {
        if !rot.iter().all(|x| x.is_finite()) || !mat3::finite3(scale) {
            return Err(BuresError::NonFinite { context: "DecomposedCov" });
        }
        let n = quat::norm(rot);
        if n < 1e-6 {
            return Err(BuresError::Malformed {
                field: "rot".into(),
                message: format!("quaternion norm {n:.3e} too small to normalize"),
            });
        }
        Ok(Self {
            rot: quat::normalize(rot),
            scale: [
                scale[0].abs().max(MIN_SCALE),
                scale[1].abs().max(MIN_SCALE),
                scale[2].abs().max(MIN_SCALE),
            ],
        })
    }

    pub fn identity() -> Self {
        Self {
            rot: [1.0, 0.0, 0.0, 0.0],
            scale: [1.0, 1.0, 1.0],
        }
    }

    pub fn rot(&self) -> quat::Quat {
        self.rot
    }

    pub fn scale(&self) -> Vec3 {
        self.scale
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        quat::to_mat(self.rot)
    }

    /// Per-axis variances `diag(scale)²`.
    pub fn variances(&self) -> Vec3 {
        [
            self.scale[0] * self.scale[0],
            self.scale[1] * self.scale[1],
            self.scale[2] * self.scale[2],
        ]
    }
}

/// A symmetric tangent vector at a base covariance (the shape part of a
/// velocity). The base is carried as a tag for diagnostics; the filter reuses
/// tangents at new base points without transport, so consumers must not
/// assume the tag matches their own base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentCov {
    pub mat: SymMat3,
    pub base: SymMat3,
}

impl TangentCov {
    pub fn new(mat: SymMat3, base: &SpdMat3) -> Self {
        Self {
            mat,
            base: *base.sym(),
        }
    }

    pub fn zero(base: &SpdMat3) -> Self {
        Self::new(SymMat3::zero(), base)
    }

    pub fn neg(&self) -> Self {
        Self {
            mat: self.mat.neg(),
            base: self.base,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: self.mat.scale(s),
            base: self.base,
        }
    }
}

/// Paired mean velocity and covariance tangent of a Gaussian track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianVelocity {
    pub d_mean: Vec3,
    pub d_cov: TangentCov,
}

impl GaussianVelocity {
    pub fn zero(base: &SpdMat3) -> Self {
        Self {
            d_mean: [0.0; 3],
            d_cov: TangentCov::zero(base),
        }
    }
}

/// `Σ = R diag(scale)² Rᵀ` per the splatting decomposition.
pub fn compose_covariance(d: &DecomposedCov) -> SpdMat3 {
    let r = d.rotation_matrix();
    let v = Mat3::from_diag(d.variances());
    let full = r.mul(&v).mul(&r.transpose());
    let sym = spd::symmetrize(&full).expect("finite by construction");
    // Eigenvalues equal the variances (>= EPSILON_PD by the scale clamp);
    // the projection only papers over last-ulp round-off.
    SpdMat3::project(sym, EPSILON_PD).expect("finite by construction")
}

/// Inverse of [`compose_covariance`]: recovers a rotation (det +1) and
/// ascending scales whose composition reconstructs `s`.
pub fn decompose_covariance(s: &SpdMat3) -> DecomposedCov {
    let eig = spd::clamp_eigenvalues(&spd::eigh3(s.sym()), EPSILON_PD);
    let mut q = eig.vectors;
    // eigh3's per-column sign convention can leave det = -1; flipping any one
    // column fixes the handedness without changing Q Λ Qᵀ. Use column 0.
    if q.det() < 0.0 {
        for i in 0..3 {
            q.m[i][0] = -q.m[i][0];
        }
    }
    let rot = quat::from_mat(&q);
    let scale = [
        eig.values[0].sqrt(),
        eig.values[1].sqrt(),
        eig.values[2].sqrt(),
    ];
    DecomposedCov::new(rot, scale).expect("finite by construction")
}

/// Symmetrizes and eigenvalue-clamps a possibly invalid covariance, returning
/// a valid Gaussian. A no-op (bitwise) for already-valid input.
pub fn project_to_valid(mean: Vec3, cov: &Mat3, floor: f64) -> Result<Gaussian3> {
    if !mat3::finite3(mean) {
        return Err(BuresError::NonFinite { context: "project_to_valid mean" });
    }
    let sym = spd::symmetrize(cov)?;
    Ok(Gaussian3 {
        mean,
        cov: SpdMat3::project(sym, floor)?,
    })
}

/// The scene-file atom: a Gaussian in decomposed form.
///
/// Serialized as `{"mean":[x,y,z], "rot":[w,x,y,z], "scale":[sx,sy,sz]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposedGaussian {
    pub mean: Vec3,
    pub rot: [f64; 4],
    pub scale: Vec3,
}

impl DecomposedGaussian {
    pub fn new(mean: Vec3, cov: DecomposedCov) -> Self {
        Self {
            mean,
            rot: cov.rot(),
            scale: cov.scale(),
        }
    }

    pub fn cov(&self) -> Result<DecomposedCov> {
        DecomposedCov::new(self.rot, self.scale)
    }

    pub fn to_gaussian(&self) -> Result<Gaussian3> {
        Gaussian3::new(self.mean, compose_covariance(&self.cov()?))
    }

    pub fn from_gaussian(g: &Gaussian3) -> Self {
        let d = decompose_covariance(&g.cov);
        Self::new(g.mean, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_identity() {
        let c = compose_covariance(&DecomposedCov::identity());
        assert!(c.sym().sub(&SymMat3::identity()).frobenius_norm() < 1e-14);
    }

    #[test]
    fn compose_diagonal_squares() {
        let d = DecomposedCov::new([1.0, 0.0, 0.0, 0.0], [1.0, 2.0, 3.0]).unwrap();
        let c = compose_covariance(&d);
        let want = SymMat3::from_diag([1.0, 4.0, 9.0]);
        assert!(c.sym().sub(&want).frobenius_norm() < 1e-12);
    }

    #[test]
    fn compose_z_rotation_swaps_axes() {
        // 90° about z maps the x-axis scale onto y and vice versa.
        let q = quat::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_2);
        let d = DecomposedCov::new(q, [1.0, 2.0, 1.0]).unwrap();
        let c = compose_covariance(&d);
        let want = SymMat3::from_diag([4.0, 1.0, 1.0]);
        assert!(
            c.sym().sub(&want).frobenius_norm() < 1e-12,
            "got {:?}",
            c.sym()
        );
    }

    #[test]
    fn decompose_diagonal() {
        let s = SpdMat3::from_diag([1.0, 4.0, 9.0]).unwrap();
        let d = decompose_covariance(&s);
        assert_eq!(d.scale(), [1.0, 2.0, 3.0]);
        let back = compose_covariance(&d);
        assert!(back.sym().sub(s.sym()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn decompose_isotropic() {
        let d = decompose_covariance(&SpdMat3::identity());
        assert_eq!(d.scale(), [1.0, 1.0, 1.0]);
        // Any rotation composes back to the identity for isotropic scales.
        let back = compose_covariance(&d);
        assert!(back.sym().sub(&SymMat3::identity()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn project_clamps_single_negative_eigenvalue() {
        let cov = Mat3::from_diag([-1e-10, 1.0, 2.0]);
        let g = project_to_valid([0.0; 3], &cov, EPSILON_PD).unwrap();
        let e = spd::eigh3(g.cov.sym());
        assert!((e.values[0] - EPSILON_PD).abs() < 1e-20);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        assert!((e.values[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_non_finite_mean() {
        let cov = Mat3::identity();
        assert!(project_to_valid([f64::NAN, 0.0, 0.0], &cov, EPSILON_PD).is_err());
    }

    #[test]
    fn project_equals_symmetrize_then_clamp() {
        // Asymmetric perturbation of a valid covariance.
        let mut m = Mat3::from_diag([1.0, 2.0, 3.0]);
        m.m[0][1] = 0.3;
        m.m[1][0] = 0.1;
        let g = project_to_valid([0.0; 3], &m, EPSILON_PD).unwrap();
        let sym = spd::symmetrize(&m).unwrap();
        let oracle = SpdMat3::project(sym, EPSILON_PD).unwrap();
        assert_eq!(*g.cov.sym(), *oracle.sym());
    }

    #[test]
    fn atom_json_shape() {
        let atom = DecomposedGaussian {
            mean: [1.0, 2.0, 3.0],
            rot: [1.0, 0.0, 0.0, 0.0],
            scale: [0.5, 0.5, 0.5],
        };
        let s = serde_json::to_string(&atom).unwrap();
        assert_eq!(
            s,
            r#"{"mean":[1.0,2.0,3.0],"rot":[1.0,0.0,0.0,0.0],"scale":[0.5,0.5,0.5]}"#
        );
        let back: DecomposedGaussian = serde_json::from_str(&s).unwrap();
        assert_eq!(back, atom);
    }

    prop_compose! {
        fn arb_decomposed()(
            q in prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| {
                q.iter().map(|x| x * x).sum::<f64>() > 1e-3
            }),
            s in prop::array::uniform3(0.1f64..2.0),
        ) -> DecomposedCov {
            DecomposedCov::new(q, s).unwrap()
        }
    }

    proptest! {
        #[test]
        fn prop_compose_decompose_round_trip(d in arb_decomposed()) {
            let s = compose_covariance(&d);
            let d2 = decompose_covariance(&s);
            let s2 = compose_covariance(&d2);
            let rel = s2.sym().sub(s.sym()).frobenius_norm() / s.sym().frobenius_norm();
            prop_assert!(rel <= 1e-9, "round trip rel error {}", rel);
        }

        #[test]
        fn prop_compose_eigenvalues_are_squared_scales(d in arb_decomposed()) {
            let s = compose_covariance(&d);
            let mut want = d.variances();
            want.sort_by(f64::total_cmp);
            let got = spd::eigh3(s.sym()).values;
            for k in 0..3 {
                let rel = (got[k] - want[k]).abs() / want[k];
                prop_assert!(rel <= 1e-10, "eigenvalue {} rel error {}", k, rel);
            }
        }

        #[test]
        fn prop_project_idempotent_bitwise(d in arb_decomposed(), shift in -1e-9f64..1e-9) {
            let mut m = compose_covariance(&d).to_mat();
            m.m[0][1] += shift; // small asymmetry
            let once = project_to_valid([0.0; 3], &m, EPSILON_PD).unwrap();
            let twice = project_to_valid(once.mean, &once.cov.to_mat(), EPSILON_PD).unwrap();
            prop_assert_eq!(once.cov.sym(), twice.cov.sym());
        }
    }
}

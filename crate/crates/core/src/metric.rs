//! 2-Wasserstein distance between 3D Gaussians and the Bures tangent metric.
//!
//! The distance is computed through the symmetric trace form
//! `Tr(Σ₁ + Σ₂ − 2(Σ₂^{1/2} Σ₁ Σ₂^{1/2})^{1/2})`, with re-symmetrization and
//! non-negativity clamps always applied. A decomposed-form variant works
//! directly on rotation/scale parameters and is checked against the full
//! matrix route by the property suite.

use crate::gaussian::{DecomposedCov, Gaussian3, TangentCov};
use crate::mat3::{norm3_sq, sub3, Mat3, Vec3};
use crate::spd::{self, SpdMat3, SymMat3};

/// Squared 2-Wasserstein distance `‖μ₁−μ₂‖² + Tr(Σ₁+Σ₂−2(Σ₂^{1/2}Σ₁Σ₂^{1/2})^{1/2})`,
/// clamped to be non-negative against round-off.
pub fn w2_squared(a: &Gaussian3, b: &Gaussian3) -> f64 {
    let mean_term = norm3_sq(sub3(a.mean, b.mean));
    (mean_term + w2_cov_squared(&a.cov, &b.cov)).max(0.0)
}

/// Covariance-only part of the squared distance (the squared Bures distance).
pub fn w2_cov_squared(a: &SpdMat3, b: &SpdMat3) -> f64 {
    let tr_a = a.sym().trace();
    let tr_b = b.sym().trace();
    let sb = spd::sqrt_spd(b);
    let inner = sandwich(&sb.to_mat(), &a.to_mat());
    let cross = trace_sqrt_psd(&inner);
    let diff = tr_a + tr_b - 2.0 * cross;
    // The trace difference cancels to the round-off floor of Tr(Σ) for
    // nearly identical inputs; switch to the all-positive tangent quadratic
    // form there, which bottoms out near machine zero instead.
    if diff < 1e-10 * (tr_a + tr_b) {
        let v = crate::geometry::log_map_cov(a, b);
        let gamma = spd::solve_sylvester(a, &v.mat).to_mat();
        return gamma.mul(&a.to_mat()).mul(&gamma).trace().max(0.0);
    }
    diff
}

/// 2-Wasserstein distance `sqrt(w2_squared)`.
pub fn w2_distance(a: &Gaussian3, b: &Gaussian3) -> f64 {
    w2_squared(a, b).sqrt()
}

/// Trace term of the squared distance computed in decomposed form:
/// `Tr(V₁ + V₂ − 2(V₁^{1/2} E₁₂ V₁^{1/2})^{1/2})` with `V_i = diag(scale_i)²`
/// and `E₁₂ = R₁ᵀ R₂ V₂ R₂ᵀ R₁`, evaluated as an eigenvalue sum. `V₁^{1/2}`
/// is diagonal, so the sandwich is exact.
pub fn w2_trace_term_decomposed(a: &DecomposedCov, b: &DecomposedCov) -> f64 {
    let r1 = a.rotation_matrix();
    let r2 = b.rotation_matrix();
    let v1 = a.variances();
    let v2 = b.variances();

    let r1t_r2 = r1.transpose().mul(&r2);
    let e12 = r1t_r2.mul(&Mat3::from_diag(v2)).mul(&r1t_r2.transpose());

    let s1 = a.scale();
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = s1[i] * e12.m[i][j] * s1[j];
        }
    }
    let cross = trace_sqrt_psd(&Mat3::new(c));

    (v1[0] + v1[1] + v1[2]) + (v2[0] + v2[1] + v2[2]) - 2.0 * cross
}

/// Squared Bures norm of a tangent vector at `base`:
/// `⟨v,v⟩ = Tr(Γ base Γ)` with `Γ` the Sylvester root of `v`. The equal form
/// `Tr(Γ v)/2` is evaluated as a cross-check and asserted to agree.
pub fn tangent_norm_squared(base: &SpdMat3, v: &TangentCov) -> f64 {
    let gamma = spd::solve_sylvester(base, &v.mat);
    let gm = gamma.to_mat();
    let form_a = gm.mul(&base.to_mat()).mul(&gm).trace();
    let form_b = 0.5 * gm.mul(&v.mat.to_mat()).trace();
    let scale = form_a.abs().max(1.0);
    assert!(
        (form_a - form_b).abs() <= 1e-10 * scale,
        "tangent norm forms disagree: {form_a} vs {form_b}"
    );
    form_a.max(0.0)
}

/// Bures inner product `⟨u,v⟩ = Tr(Γ_u base Γ_v)` of two tangents at `base`.
pub fn tangent_inner(base: &SpdMat3, u: &SymMat3, v: &SymMat3) -> f64 {
    let gu = spd::solve_sylvester(base, u).to_mat();
    let gv = spd::solve_sylvester(base, v).to_mat();
    gu.mul(&base.to_mat()).mul(&gv).trace()
}

/// Directional derivative of `w2_squared(a, b)` as `a` moves with mean
/// velocity `d_mean` and covariance velocity `d_cov`:
/// `2(μ_a−μ_b)·d_mean − 2⟨Log_{Σ_a}(Σ_b), d_cov⟩_{Σ_a}`.
pub fn w2_squared_directional_derivative(
    a: &Gaussian3,
    b: &Gaussian3,
    d_mean: Vec3,
    d_cov: &SymMat3,
) -> f64 {
    let diff = sub3(a.mean, b.mean);
    let mean_part = 2.0 * crate::mat3::dot3(diff, d_mean);
    let log_ab = crate::geometry::log_map_cov(&a.cov, &b.cov);
    let cov_part = -2.0 * tangent_inner(&a.cov, &log_ab.mat, d_cov);
    mean_part + cov_part
}

/// `Tr(M^{1/2})` for a matrix that is symmetric PSD up to round-off:
/// symmetrize, take eigenvalues, clip at zero, sum the roots.
fn trace_sqrt_psd(m: &Mat3) -> f64 {
    let sym = spd::symmetrize(m).expect("finite by construction");
    let eig = spd::eigh3(&sym);
    eig.values.iter().map(|l| l.max(0.0).sqrt()).sum()
}

/// `S · A · S` symmetrized.
fn sandwich(s: &Mat3, a: &Mat3) -> Mat3 {
    s.mul(a).mul(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::compose_covariance;
    use crate::mat3::quat;
    use proptest::prelude::*;

    fn iso(mean: Vec3, var: f64) -> Gaussian3 {
        Gaussian3::new(mean, SpdMat3::from_diag([var, var, var]).unwrap()).unwrap()
    }

    #[test]
    fn identical_gaussians_have_zero_distance() {
        let g = iso([0.3, -0.2, 1.0], 0.7);
        assert!(w2_squared(&g, &g) <= 1e-12);
        assert_eq!(w2_distance(&g, &g), w2_squared(&g, &g).sqrt());
    }

    #[test]
    fn commuting_diagonal_closed_form() {
        // means 0 and (1,0,0), covariances I and 4I:
        // W2² = 1 + Tr(5I − 2·2I) = 1 + 3 = 4, W2 = 2.
        let a = iso([0.0; 3], 1.0);
        let b = iso([1.0, 0.0, 0.0], 4.0);
        assert!((w2_squared(&a, &b) - 4.0).abs() < 1e-12);
        assert!((w2_distance(&a, &b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decomposed_trace_identical_is_zero() {
        let d = DecomposedCov::new([0.8, 0.1, -0.3, 0.2], [0.5, 1.0, 2.0]).unwrap();
        assert!(w2_trace_term_decomposed(&d, &d).abs() <= 1e-10);
    }

    #[test]
    fn decomposed_trace_commuting_diagonal() {
        // variances I and 4I: Tr = 3·(1 + 4 − 2·2) = 3.
        let a = DecomposedCov::new([1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0]).unwrap();
        let b = DecomposedCov::new([1.0, 0.0, 0.0, 0.0], [2.0, 2.0, 2.0]).unwrap();
        assert!((w2_trace_term_decomposed(&a, &b) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tangent_norm_zero_and_diagonal() {
        let base = SpdMat3::identity();
        assert_eq!(tangent_norm_squared(&base, &TangentCov::zero(&base)), 0.0);
        // v = 2I at base I: Γ = I, norm² = Tr(I) = 3.
        let v = TangentCov::new(SymMat3::from_diag([2.0, 2.0, 2.0]), &base);
        assert!((tangent_norm_squared(&base, &v) - 3.0).abs() < 1e-12);
    }

    prop_compose! {
        fn arb_cov()(
            q in prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| {
                q.iter().map(|x| x * x).sum::<f64>() > 1e-3
            }),
            s in prop::array::uniform3(0.1f64..2.0),
        ) -> DecomposedCov {
            DecomposedCov::new(q, s).unwrap()
        }
    }

    prop_compose! {
        fn arb_gaussian()(
            mean in prop::array::uniform3(-3.0f64..3.0),
            cov in arb_cov(),
        ) -> Gaussian3 {
            Gaussian3::new(mean, compose_covariance(&cov)).unwrap()
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn prop_symmetry(a in arb_gaussian(), b in arb_gaussian()) {
            let ab = w2_distance(&a, &b);
            let ba = w2_distance(&b, &a);
            prop_assert!((ab - ba).abs() <= 1e-10 * ab.max(1.0));
        }

        #[test]
        fn prop_triangle_inequality(a in arb_gaussian(), b in arb_gaussian(), c in arb_gaussian()) {
            let ac = w2_distance(&a, &c);
            let ab = w2_distance(&a, &b);
            let bc = w2_distance(&b, &c);
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn prop_decomposed_matches_full(ca in arb_cov(), cb in arb_cov()) {
            let dec = w2_trace_term_decomposed(&ca, &cb);
            let full = w2_cov_squared(&compose_covariance(&ca), &compose_covariance(&cb));
            let rel = (dec - full).abs() / full.max(1e-12);
            prop_assert!(rel <= 1e-9, "decomposed {} vs full {} rel {}", dec, full, rel);
        }

        #[test]
        fn prop_translation_changes_only_mean_term(
            a in arb_gaussian(), b in arb_gaussian(),
            shift in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let a2 = Gaussian3::new(crate::mat3::add3(a.mean, shift), a.cov).unwrap();
            let b2 = Gaussian3::new(crate::mat3::add3(b.mean, shift), b.cov).unwrap();
            let before = w2_squared(&a, &b) - norm3_sq(sub3(a.mean, b.mean));
            let after = w2_squared(&a2, &b2) - norm3_sq(sub3(a2.mean, b2.mean));
            prop_assert!((before - after).abs() <= 1e-9 * before.abs().max(1.0));
        }

        #[test]
        fn prop_rotation_equivariance(
            a in arb_gaussian(), b in arb_gaussian(),
            q in prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| {
                q.iter().map(|x| x * x).sum::<f64>() > 1e-3
            }),
        ) {
            let r = quat::to_mat(quat::normalize(q));
            let rotate = |g: &Gaussian3| {
                let m = r.mul_vec(g.mean);
                let c = r.mul(&g.cov.to_mat()).mul(&r.transpose());
                crate::gaussian::project_to_valid(m, &c, crate::spd::EPSILON_PD).unwrap()
            };
            let before = w2_distance(&a, &b);
            let after = w2_distance(&rotate(&a), &rotate(&b));
            prop_assert!((before - after).abs() <= 1e-10 * before.max(1.0));
        }
    }
}

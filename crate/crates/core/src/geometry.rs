//! Logarithmic and exponential maps on the Gaussian manifold, geodesics, and
//! the velocity/prediction pair used by the tracking filter.
//!
//! Conventions: `log_map_cov(base, target)` is anchored at `base` (the current
//! state) and `exp_map_cov(base, log_map_cov(base, target))` recovers
//! `target`; means move Euclideanly. A prediction whose covariance left the
//! PD cone is clamped and flagged rather than rejected, so callers can choose
//! a policy.

use crate::gaussian::{Gaussian3, GaussianVelocity, TangentCov};
use crate::mat3::{add3, scale3, sub3};
use crate::spd::{self, SpdMat3, EPSILON_PD};

/// Result of an exponential-map step: the (possibly clamped) covariance and
/// whether clamping exceeded round-off, i.e. the step left the PD cone.
#[derive(Debug, Clone, Copy)]
pub struct ExpMapResult {
    pub cov: SpdMat3,
    pub left_manifold: bool,
}

/// Result of [`predict`]: the predicted Gaussian plus the propagated
/// left-manifold flag.
#[derive(Debug, Clone, Copy)]
pub struct Prediction {
    pub gaussian: Gaussian3,
    pub left_manifold: bool,
}

/// Bures logarithmic map
/// `Log_base(target) = (target·base)^{1/2} + (base·target)^{1/2} − 2·base`,
/// computed through the optimal transport map
/// `T = base^{-1/2} (base^{1/2} target base^{1/2})^{1/2} base^{-1/2}`
/// as `T·base + base·T − 2·base`.
pub fn log_map_cov(base: &SpdMat3, target: &SpdMat3) -> TangentCov {
    let (s, si) = spd::sqrt_pair(base);
    let (s, si) = (s.to_mat(), si.to_mat());

    let inner = spd::symmetrize(&s.mul(&target.to_mat()).mul(&s)).expect("finite");
    let inner_sqrt = spd::sqrt_psd(&inner).to_mat();
    let t = si.mul(&inner_sqrt).mul(&si);

    let b = base.to_mat();
    let v = t.mul(&b).add(&b.mul(&t)).sub(&b.scale(2.0));
    TangentCov::new(spd::symmetrize(&v).expect("finite"), base)
}

/// Bures exponential map `exp_base(v) = base + v + Γ base Γᵀ` with `Γ` the
/// Sylvester root of `v` at `base`; the result is symmetrized and eigenvalue
/// clamped. The flag is set when clamping moved an eigenvalue by more than
/// round-off (the step escaped the PD cone).
pub fn exp_map_cov(base: &SpdMat3, v: &TangentCov) -> ExpMapResult {
    let gamma = spd::solve_sylvester(base, &v.mat).to_mat();
    let b = base.to_mat();
    let raw = b.add(&v.mat.to_mat()).add(&gamma.mul(&b).mul(&gamma));
    let sym = spd::symmetrize(&raw).expect("finite");

    let eig = spd::eigh3(&sym);
    let left_manifold = eig.values[0] < EPSILON_PD * (1.0 - 1e-3);
    let cov = SpdMat3::project(sym, EPSILON_PD).expect("finite");
    ExpMapResult { cov, left_manifold }
}

/// Constant-speed geodesic from `a` to `b`: linear mean interpolation and
/// `exp_{Σ_a}(s · log_{Σ_a}(Σ_b))` for the covariance.
pub fn geodesic(a: &Gaussian3, b: &Gaussian3, s: f64) -> Gaussian3 {
    debug_assert!((0.0..=1.0).contains(&s), "geodesic parameter {s} outside [0,1]");
    let mean = add3(scale3(a.mean, 1.0 - s), scale3(b.mean, s));
    let tangent = log_map_cov(&a.cov, &b.cov).scale(s);
    let exp = exp_map_cov(&a.cov, &tangent);
    // Interior points of a geodesic between valid endpoints stay in the cone.
    assert!(
        !exp.left_manifold,
        "geodesic left the PD cone at s = {s}"
    );
    Gaussian3 {
        mean,
        cov: exp.cov,
    }
}

/// Velocity of the track `prev → curr`, tangent at `curr`:
/// `d_mean = μ_curr − μ_prev`, `d_cov = −Log_{Σ_curr}(Σ_prev)`.
pub fn velocity(prev: &Gaussian3, curr: &Gaussian3) -> GaussianVelocity {
    GaussianVelocity {
        d_mean: sub3(curr.mean, prev.mean),
        d_cov: log_map_cov(&curr.cov, &prev.cov).neg(),
    }
}

/// Constant-velocity prediction: `μ + d_mean`, `exp_{Σ}(d_cov)`.
pub fn predict(curr: &Gaussian3, v: &GaussianVelocity) -> Prediction {
    let mean = add3(curr.mean, v.d_mean);
    let exp = exp_map_cov(&curr.cov, &v.d_cov);
    Prediction {
        gaussian: Gaussian3 {
            mean,
            cov: exp.cov,
        },
        left_manifold: exp.left_manifold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{compose_covariance, DecomposedCov};
    use crate::metric::{tangent_norm_squared, w2_cov_squared, w2_distance};
    use crate::spd::SymMat3;
    use proptest::prelude::*;

    fn iso_cov(v: f64) -> SpdMat3 {
        SpdMat3::from_diag([v, v, v]).unwrap()
    }

    fn iso(mean: [f64; 3], v: f64) -> Gaussian3 {
        Gaussian3::new(mean, iso_cov(v)).unwrap()
    }

    #[test]
    fn log_at_base_is_zero() {
        let b = iso_cov(0.7);
        let v = log_map_cov(&b, &b);
        assert!(v.mat.frobenius_norm() <= 1e-10);
    }

    #[test]
    fn log_commuting_closed_form() {
        // Log_I(4I) = 2I + 2I − 2I = 2I.
        let v = log_map_cov(&iso_cov(1.0), &iso_cov(4.0));
        assert!(v.mat.sub(&SymMat3::from_diag([2.0, 2.0, 2.0])).frobenius_norm() < 1e-9);
    }

    #[test]
    fn exp_of_zero_is_base() {
        let b = iso_cov(0.7);
        let r = exp_map_cov(&b, &TangentCov::zero(&b));
        assert!(!r.left_manifold);
        assert!(r.cov.sym().sub(b.sym()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn exp_commuting_closed_form() {
        // exp_I(2I): Γ = I, result = I + 2I + I = 4I.
        let b = iso_cov(1.0);
        let v = TangentCov::new(SymMat3::from_diag([2.0, 2.0, 2.0]), &b);
        let r = exp_map_cov(&b, &v);
        assert!(!r.left_manifold);
        assert!(r.cov.sym().sub(&SymMat3::from_diag([4.0, 4.0, 4.0])).frobenius_norm() < 1e-12);
    }

    #[test]
    fn exp_boundary_sets_left_manifold_flag() {
        // exp_I(−2I): Γ = −I, result = I − 2I + I = 0 → clamped, flagged.
        let b = iso_cov(1.0);
        let v = TangentCov::new(SymMat3::from_diag([-2.0, -2.0, -2.0]), &b);
        let r = exp_map_cov(&b, &v);
        assert!(r.left_manifold);
        let eig = spd::eigh3(r.cov.sym());
        for l in eig.values {
            assert!((l - EPSILON_PD).abs() <= 1e-20);
        }
    }

    #[test]
    fn geodesic_endpoints_and_commuting_midpoint() {
        let a = iso([0.0; 3], 1.0);
        let b = iso([1.0, 0.0, 0.0], 4.0);
        let g0 = geodesic(&a, &b, 0.0);
        let g1 = geodesic(&a, &b, 1.0);
        assert!(w2_distance(&g0, &a) <= 1e-6);
        assert!(w2_distance(&g1, &b) <= 1e-6);
        // Midpoint of I and 4I interpolates square roots: ((1+2)/2)² = 2.25.
        let m = geodesic(&a, &b, 0.5);
        assert!(m.cov.sym().sub(&SymMat3::from_diag([2.25, 2.25, 2.25])).frobenius_norm() < 1e-9);
    }

    #[test]
    fn velocity_zero_and_pure_translation() {
        let a = iso([0.0; 3], 1.0);
        let v = velocity(&a, &a);
        assert_eq!(v.d_mean, [0.0; 3]);
        assert!(v.d_cov.mat.frobenius_norm() <= 1e-10);

        let b = iso([1.0, 2.0, 3.0], 1.0);
        let v = velocity(&a, &b);
        assert_eq!(v.d_mean, [1.0, 2.0, 3.0]);
        assert!(v.d_cov.mat.frobenius_norm() <= 1e-10);
    }

    #[test]
    fn velocity_commuting_closed_form() {
        // Σ_prev = I, Σ_curr = 4I: d_cov = −Log_{4I}(I) = −(2I+2I−8I) = 4I.
        let v = velocity(&iso([0.0; 3], 1.0), &iso([0.0; 3], 4.0));
        assert!(v.d_cov.mat.sub(&SymMat3::from_diag([4.0, 4.0, 4.0])).frobenius_norm() < 1e-8);
    }

    #[test]
    fn predict_stationary_fixed_point() {
        let g = iso([0.5, -0.5, 0.1], 0.8);
        let p = predict(&g, &velocity(&g, &g));
        assert!(!p.left_manifold);
        assert!(w2_distance(&p.gaussian, &g) <= 1e-6);
    }

    #[test]
    fn predict_equal_speed_continuation() {
        // prev = I, curr = 4I: prediction = 9I (std devs 1, 2, 3).
        let prev = iso([0.0; 3], 1.0);
        let curr = iso([0.0; 3], 4.0);
        let p = predict(&curr, &velocity(&prev, &curr));
        assert!(!p.left_manifold);
        assert!(
            p.gaussian.cov.sym().sub(&SymMat3::from_diag([9.0, 9.0, 9.0])).frobenius_norm() < 1e-7,
            "got {:?}",
            p.gaussian.cov.sym()
        );
    }

    prop_compose! {
        fn arb_spd_cov()(
            q in prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| {
                q.iter().map(|x| x * x).sum::<f64>() > 1e-3
            }),
            s in prop::array::uniform3(0.1f64..2.0),
        ) -> SpdMat3 {
            compose_covariance(&DecomposedCov::new(q, s).unwrap())
        }
    }

    prop_compose! {
        // Pairs drawn from this keep every generalized eigenvalue ratio below
        // 4, so extrapolating one step stays inside the PD cone and the
        // extended geodesic remains minimizing (no boundary bounce).
        fn arb_spd_cov_mild()(
            q in prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| {
                q.iter().map(|x| x * x).sum::<f64>() > 1e-3
            }),
            s in prop::array::uniform3(0.6f64..1.15),
        ) -> SpdMat3 {
            compose_covariance(&DecomposedCov::new(q, s).unwrap())
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn prop_exp_log_round_trip(base in arb_spd_cov(), target in arb_spd_cov()) {
            let v = log_map_cov(&base, &target);
            let r = exp_map_cov(&base, &v);
            prop_assert!(!r.left_manifold);
            let rel = r.cov.sym().sub(target.sym()).frobenius_norm() / target.sym().frobenius_norm();
            prop_assert!(rel <= 1e-6, "round trip rel error {}", rel);
        }

        #[test]
        fn prop_metric_compatibility(base in arb_spd_cov(), target in arb_spd_cov()) {
            let v = log_map_cov(&base, &target);
            let norm_sq = tangent_norm_squared(&base, &v);
            let dist_sq = w2_cov_squared(&base, &target);
            let rel = (norm_sq - dist_sq).abs() / dist_sq.max(1e-9);
            prop_assert!(rel <= 1e-6, "norm² {} vs dist² {} rel {}", norm_sq, dist_sq, rel);
        }

        #[test]
        fn prop_geodesic_midpoint_bisects(
            ca in arb_spd_cov(), cb in arb_spd_cov(),
            ma in prop::array::uniform3(-2.0f64..2.0), mb in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let a = Gaussian3::new(ma, ca).unwrap();
            let b = Gaussian3::new(mb, cb).unwrap();
            let m = geodesic(&a, &b, 0.5);
            let d = w2_distance(&a, &b);
            prop_assume!(d > 1e-3);
            let am = w2_distance(&a, &m);
            let mb_ = w2_distance(&m, &b);
            prop_assert!((am - d / 2.0).abs() <= 1e-6 * d);
            prop_assert!((mb_ - d / 2.0).abs() <= 1e-6 * d);
        }

        #[test]
        fn prop_geodesic_additivity(
            ca in arb_spd_cov(), cb in arb_spd_cov(),
            s in 0.05f64..0.95, u in 0.05f64..0.95,
        ) {
            let a = Gaussian3::new([0.0; 3], ca).unwrap();
            let b = Gaussian3::new([1.0, 0.0, 0.0], cb).unwrap();
            let mid = geodesic(&a, &b, s);
            let two_step = geodesic(&mid, &b, u);
            let direct = geodesic(&a, &b, s + u * (1.0 - s));
            let d = w2_distance(&two_step, &direct);
            prop_assert!(d <= 1e-6 * (1.0 + w2_distance(&a, &b)), "additivity gap {}", d);
        }

        #[test]
        fn prop_equal_speed_extrapolation(prev_c in arb_spd_cov_mild(), curr_c in arb_spd_cov_mild()) {
            let prev = Gaussian3::new([0.0; 3], prev_c).unwrap();
            let curr = Gaussian3::new([0.1, -0.2, 0.3], curr_c).unwrap();
            let v = velocity(&prev, &curr);
            let p = predict(&curr, &v);
            prop_assume!(!p.left_manifold);
            // Mean continues exactly.
            let want_mean = add3(curr.mean, sub3(curr.mean, prev.mean));
            prop_assert_eq!(p.gaussian.mean, want_mean);
            // Covariance step length is preserved.
            let step_in = w2_cov_squared(&prev.cov, &curr.cov).sqrt();
            prop_assume!(step_in > 1e-3);
            let step_out = w2_cov_squared(&curr.cov, &p.gaussian.cov).sqrt();
            prop_assert!(
                (step_out - step_in).abs() <= 1e-5 * step_in.max(1.0),
                "step {} vs {}", step_in, step_out
            );
        }

        #[test]
        fn prop_pure_translation_keeps_covariance(c in arb_spd_cov()) {
            let prev = Gaussian3::new([0.0; 3], c).unwrap();
            let curr = Gaussian3::new([0.4, 0.1, -0.2], c).unwrap();
            let p = predict(&curr, &velocity(&prev, &curr));
            prop_assert!(!p.left_manifold);
            let rel = p.gaussian.cov.sym().sub(c.sym()).frobenius_norm() / c.sym().frobenius_norm();
            prop_assert!(rel <= 1e-9, "covariance moved by {}", rel);
        }
    }
}

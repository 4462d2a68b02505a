//! The State Consistency Filter: constant-velocity prediction in Wasserstein
//! space, a Kalman-like merge of prediction and observation, engagement
//! gating, and the per-Gaussian tracking loop over frame sequences.
//!
//! Tracks are independent (fixed-index correspondence), and every step is a
//! pure function of the previous state, the observation, and the config.

use serde::{Deserialize, Serialize};

use crate::error::{BuresError, Result};
use crate::gaussian::{self, Gaussian3, GaussianVelocity};
use crate::geometry::{predict, velocity};
use crate::mat3::{add3, norm3, sub3, Mat3};
use crate::spd::{self, SpdMat3};

/// Gating and stabilization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// Engage when `‖μ_pred − μ_obs‖ < engage_threshold · σ_scale`.
    pub engage_threshold: f64,
    /// Revert when `‖μ_pred − μ_obs‖ > revert_threshold · σ_scale`.
    pub revert_threshold: f64,
    /// Eigenvalue floor used when projecting merged covariances.
    pub epsilon_pd: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            engage_threshold: 0.1,
            revert_threshold: 3.0,
            epsilon_pd: spd::EPSILON_PD,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.engage_threshold > 0.0 && self.engage_threshold < self.revert_threshold) {
            return Err(BuresError::Config(format!(
                "need 0 < engage_threshold ({}) < revert_threshold ({})",
                self.engage_threshold, self.revert_threshold
            )));
        }
        if !(self.epsilon_pd > 0.0) {
            return Err(BuresError::Config("epsilon_pd must be positive".into()));
        }
        Ok(())
    }
}

/// Lifecycle of a track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    /// Collecting history; observations pass through.
    Warmup,
    /// Predicting and gating each frame.
    Engaged,
    /// Diverged; following observations until they stabilize.
    Reverted,
}

/// Outcome of a gate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Engage,
    Hold,
    Revert,
}

/// The branch a step actually took (the per-frame status-log label).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBranch {
    Warmup,
    Engage,
    Hold,
    Revert,
}

impl StepBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepBranch::Warmup => "warmup",
            StepBranch::Engage => "engage",
            StepBranch::Hold => "hold",
            StepBranch::Revert => "revert",
        }
    }
}

/// Per-Gaussian filter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackState {
    /// State at t−1 (merged output when the track merged, observation otherwise).
    pub prev: Gaussian3,
    /// State at t−2, present once the track has two frames of history.
    pub prev2: Option<Gaussian3>,
    /// Velocity estimated from (prev2, prev); present iff prev2 is.
    pub velocity: Option<GaussianVelocity>,
    pub status: TrackStatus,
    /// Consecutive frames spent in the revert branch.
    pub consecutive_divergence: u32,
}

/// What a step produced: the advanced state, the emitted Gaussian, and the
/// log record for the status CSV.
#[derive(Debug, Clone, Copy)]
pub struct StepResult {
    pub state: TrackState,
    pub output: Gaussian3,
    pub record: StepRecord,
}

/// One status-log row (frame and index are attached by the sequence driver).
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub branch: StepBranch,
    /// `‖μ_pred − μ_obs‖` when a gate (or revert pseudo-gate) was evaluated.
    pub gate_distance: Option<f64>,
    pub sigma_scale: f64,
}

impl TrackState {
    /// Starts a track from its first observation (which is also the output
    /// for that frame).
    pub fn new(first_obs: Gaussian3) -> Self {
        Self {
            prev: first_obs,
            prev2: None,
            velocity: None,
            status: TrackStatus::Warmup,
            consecutive_divergence: 0,
        }
    }

    /// Advances the track by one frame.
    pub fn step(&self, obs: &Gaussian3, cfg: &FilterConfig) -> StepResult {
        let sigma = sigma_scale(&obs.cov);
        match self.status {
            TrackStatus::Warmup => {
                debug_assert!(self.prev2.is_none());
                let state = self.advanced(*obs);
                StepResult {
                    state,
                    output: *obs,
                    record: StepRecord {
                        branch: StepBranch::Warmup,
                        gate_distance: None,
                        sigma_scale: sigma,
                    },
                }
            }
            TrackStatus::Engaged => {
                let vel = self.velocity.expect("engaged track has velocity");
                let pred = predict(&self.prev, &vel);
                let distance = norm3(sub3(pred.gaussian.mean, obs.mean));
                let decision = if pred.left_manifold {
                    // A prediction that left the PD cone is not trusted for
                    // merging this frame.
                    GateDecision::Hold
                } else {
                    gate(&pred.gaussian, obs, cfg)
                };
                match decision {
                    GateDecision::Engage => {
                        let merged = merge(obs, &pred.gaussian, cfg);
                        let mut state = self.advanced(merged);
                        state.consecutive_divergence = 0;
                        StepResult {
                            state,
                            output: merged,
                            record: StepRecord {
                                branch: StepBranch::Engage,
                                gate_distance: Some(distance),
                                sigma_scale: sigma,
                            },
                        }
                    }
                    GateDecision::Hold => {
                        let mut state = self.advanced(*obs);
                        state.consecutive_divergence = 0;
                        StepResult {
                            state,
                            output: *obs,
                            record: StepRecord {
                                branch: StepBranch::Hold,
                                gate_distance: Some(distance),
                                sigma_scale: sigma,
                            },
                        }
                    }
                    GateDecision::Revert => StepResult {
                        state: TrackState {
                            prev: *obs,
                            prev2: None,
                            velocity: None,
                            status: TrackStatus::Reverted,
                            consecutive_divergence: self.consecutive_divergence + 1,
                        },
                        output: *obs,
                        record: StepRecord {
                            branch: StepBranch::Revert,
                            gate_distance: Some(distance),
                            sigma_scale: sigma,
                        },
                    },
                }
            }
            TrackStatus::Reverted => {
                // No velocity while reverted: gate against the previous state
                // as a zero-velocity pseudo-prediction. Passing (not in the
                // revert band) re-enters warmup with fresh history.
                let distance = norm3(sub3(self.prev.mean, obs.mean));
                if distance > cfg.revert_threshold * sigma {
                    StepResult {
                        state: TrackState {
                            prev: *obs,
                            prev2: None,
                            velocity: None,
                            status: TrackStatus::Reverted,
                            consecutive_divergence: self.consecutive_divergence + 1,
                        },
                        output: *obs,
                        record: StepRecord {
                            branch: StepBranch::Revert,
                            gate_distance: Some(distance),
                            sigma_scale: sigma,
                        },
                    }
                } else {
                    StepResult {
                        state: TrackState {
                            prev: *obs,
                            prev2: None,
                            velocity: None,
                            status: TrackStatus::Warmup,
                            consecutive_divergence: 0,
                        },
                        output: *obs,
                        record: StepRecord {
                            branch: StepBranch::Warmup,
                            gate_distance: Some(distance),
                            sigma_scale: sigma,
                        },
                    }
                }
            }
        }
    }

    /// Shifts history by one frame with `new` as the latest state; computes
    /// the velocity and flips warmup to engaged once two states exist.
    fn advanced(&self, new: Gaussian3) -> TrackState {
        let prev2 = Some(self.prev);
        let vel = velocity(&self.prev, &new);
        TrackState {
            prev: new,
            prev2,
            velocity: Some(vel),
            status: TrackStatus::Engaged,
            consecutive_divergence: self.consecutive_divergence,
        }
    }
}

/// Isotropic spread summary of a covariance: the geometric mean of the
/// per-axis standard deviations, `det(Σ)^{1/6}`.
pub fn sigma_scale(cov: &SpdMat3) -> f64 {
    cov.sym().det().max(0.0).sqrt().cbrt()
}

/// Kalman gain `K = Σ_ob (Σ_ob + Σ_p)^{-1}`. The sum of two SPD matrices is
/// SPD, so the inverse always exists; K's eigenvalues are real and lie in
/// (0,1) (K is similar to the SPD matrix `Σ_ob^{1/2} (Σ_ob+Σ_p)^{-1} Σ_ob^{1/2}`).
pub fn kalman_gain(sigma_ob: &SpdMat3, sigma_p: &SpdMat3) -> Mat3 {
    let sum = sigma_ob.sym().add(sigma_p.sym());
    sigma_ob.to_mat().mul(&sum.to_mat().inverse())
}

/// Kalman-like merge `N̂ = N_ob + K (N_p − N_ob)`, applied componentwise to
/// the mean vector and covariance matrix; the covariance update can lose
/// symmetry and definiteness through the non-symmetric `K` product, so it is
/// symmetrized and clamped.
pub fn merge(obs: &Gaussian3, pred: &Gaussian3, cfg: &FilterConfig) -> Gaussian3 {
    let k = kalman_gain(&obs.cov, &pred.cov);
    let mean = add3(obs.mean, k.mul_vec(sub3(pred.mean, obs.mean)));
    let d_cov = pred.cov.to_mat().sub(&obs.cov.to_mat());
    let cov = obs.cov.to_mat().add(&k.mul(&d_cov));
    gaussian::project_to_valid(mean, &cov, cfg.epsilon_pd)
        .expect("merge inputs are finite")
}

/// Gating decision for a prediction/observation pair.
pub fn gate(pred: &Gaussian3, obs: &Gaussian3, cfg: &FilterConfig) -> GateDecision {
    let sigma = sigma_scale(&obs.cov);
    let distance = norm3(sub3(pred.mean, obs.mean));
    if distance < cfg.engage_threshold * sigma {
        GateDecision::Engage
    } else if distance > cfg.revert_threshold * sigma {
        GateDecision::Revert
    } else {
        GateDecision::Hold
    }
}

/// One row of the per-track status log.
#[derive(Debug, Clone, Copy)]
pub struct StatusRecord {
    pub frame: usize,
    pub index: usize,
    pub branch: StepBranch,
    pub gate_distance: Option<f64>,
    pub sigma_scale: f64,
}

/// Filtered sequence plus the per-frame status log.
#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub frames: Vec<Vec<Gaussian3>>,
    pub log: Vec<StatusRecord>,
}

/// Runs the filter over a fixed-correspondence sequence: the i-th Gaussian of
/// every frame belongs to the i-th track. All frames must have the same
/// count; a mismatch is a correspondence error naming the offending frame.
pub fn track_sequence(observations: &[Vec<Gaussian3>], cfg: &FilterConfig) -> Result<TrackOutput> {
    cfg.validate()?;
    let Some(first) = observations.first() else {
        return Ok(TrackOutput {
            frames: Vec::new(),
            log: Vec::new(),
        });
    };
    let n = first.len();
    for (t, frame) in observations.iter().enumerate() {
        if frame.len() != n {
            return Err(BuresError::Correspondence {
                frame: t,
                expected: n,
                found: frame.len(),
            });
        }
    }

    let mut frames: Vec<Vec<Gaussian3>> = Vec::with_capacity(observations.len());
    let mut log = Vec::with_capacity(observations.len() * n);
    let mut tracks: Vec<TrackState> = Vec::with_capacity(n);

    for (i, obs) in first.iter().enumerate() {
        tracks.push(TrackState::new(*obs));
        log.push(StatusRecord {
            frame: 0,
            index: i,
            branch: StepBranch::Warmup,
            gate_distance: None,
            sigma_scale: sigma_scale(&obs.cov),
        });
    }
    frames.push(first.clone());

    for (t, frame) in observations.iter().enumerate().skip(1) {
        let mut out = Vec::with_capacity(n);
        for (i, obs) in frame.iter().enumerate() {
            let res = tracks[i].step(obs, cfg);
            tracks[i] = res.state;
            out.push(res.output);
            log.push(StatusRecord {
                frame: t,
                index: i,
                branch: res.record.branch,
                gate_distance: res.record.gate_distance,
                sigma_scale: res.record.sigma_scale,
            });
        }
        frames.push(out);
    }

    Ok(TrackOutput { frames, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{compose_covariance, DecomposedCov};
    use crate::mat3::Vec3;
    use crate::spd::SymMat3;
    use proptest::prelude::*;

    fn iso(mean: Vec3, var: f64) -> Gaussian3 {
        Gaussian3::new(mean, SpdMat3::from_diag([var, var, var]).unwrap()).unwrap()
    }

    #[test]
    fn gain_equal_covariances_is_half_identity() {
        let s = SpdMat3::from_diag([0.5, 1.0, 2.0]).unwrap();
        let k = kalman_gain(&s, &s);
        let err = k.sub(&Mat3::identity().scale(0.5)).frobenius_norm();
        assert!(err < 1e-12);
    }

    #[test]
    fn gain_tiny_observation_covariance() {
        let eps = spd::EPSILON_PD;
        let ob = SpdMat3::from_diag([eps, eps, eps]).unwrap();
        let p = SpdMat3::identity();
        let k = kalman_gain(&ob, &p);
        for i in 0..3 {
            let want = eps / (eps + 1.0);
            assert!((k.m[i][i] - want).abs() < 1e-20);
        }
    }

    #[test]
    fn gain_diagonal_ratio() {
        let ob = SpdMat3::from_diag([1.0, 2.0, 3.0]).unwrap();
        let p = SpdMat3::from_diag([3.0, 2.0, 1.0]).unwrap();
        let k = kalman_gain(&ob, &p);
        assert!((k.m[0][0] - 0.25).abs() < 1e-14);
        assert!((k.m[1][1] - 0.5).abs() < 1e-14);
        assert!((k.m[2][2] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn merge_zero_innovation_is_identity() {
        let g = iso([0.4, -0.1, 0.9], 0.8);
        let merged = merge(&g, &g, &FilterConfig::default());
        assert_eq!(merged, g);
    }

    #[test]
    fn merge_equal_covariances_is_midpoint() {
        let a = iso([0.0; 3], 1.0);
        let b = iso([2.0, 0.0, 0.0], 1.0);
        let m = merge(&a, &b, &FilterConfig::default());
        assert!((m.mean[0] - 1.0).abs() < 1e-14);
        assert!(m.mean[1].abs() < 1e-14 && m.mean[2].abs() < 1e-14);
    }

    #[test]
    fn merge_diagonal_gain_moves_mean_per_axis() {
        let obs = Gaussian3::new([0.0; 3], SpdMat3::from_diag([1.0, 2.0, 3.0]).unwrap()).unwrap();
        let pred = Gaussian3::new([4.0, 4.0, 4.0], SpdMat3::from_diag([3.0, 2.0, 1.0]).unwrap()).unwrap();
        let m = merge(&obs, &pred, &FilterConfig::default());
        assert!((m.mean[0] - 1.0).abs() < 1e-12);
        assert!((m.mean[1] - 2.0).abs() < 1e-12);
        assert!((m.mean[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gate_thresholds() {
        let cfg = FilterConfig::default();
        let obs = iso([0.0; 3], 1.0); // sigma_scale = 1
        assert_eq!(gate(&obs, &obs, &cfg), GateDecision::Engage);
        let far = iso([5.0, 0.0, 0.0], 1.0);
        assert_eq!(gate(&far, &obs, &cfg), GateDecision::Revert);
        let mid = iso([1.0, 0.0, 0.0], 1.0);
        assert_eq!(gate(&mid, &obs, &cfg), GateDecision::Hold);
    }

    #[test]
    fn sigma_scale_is_geometric_mean_of_stddevs() {
        let s = SpdMat3::from_diag([1.0, 4.0, 16.0]).unwrap();
        // (1·2·4)^{1/3} = 2
        assert!((sigma_scale(&s) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn warmup_outputs_observations_verbatim() {
        let cfg = FilterConfig::default();
        let obs: Vec<Vec<Gaussian3>> = (0..2)
            .map(|t| vec![iso([t as f64, 0.0, 0.0], 1.0)])
            .collect();
        let out = track_sequence(&obs, &cfg).unwrap();
        assert_eq!(out.frames[0][0], obs[0][0]);
        assert_eq!(out.frames[1][0], obs[1][0]);
        assert_eq!(out.log[0].branch, StepBranch::Warmup);
        assert_eq!(out.log[1].branch, StepBranch::Warmup);
    }

    #[test]
    fn noiseless_constant_velocity_passes_through() {
        let cfg = FilterConfig::default();
        let obs: Vec<Vec<Gaussian3>> = (0..5)
            .map(|t| vec![iso([t as f64 * 0.25, 0.0, 0.0], 1.0)])
            .collect();
        let out = track_sequence(&obs, &cfg).unwrap();
        for t in 0..5 {
            let d = norm3(sub3(out.frames[t][0].mean, obs[t][0].mean));
            assert!(d <= 1e-12, "frame {t} deviates by {d}");
        }
        assert_eq!(out.log[2].branch, StepBranch::Engage);
    }

    #[test]
    fn outlier_triggers_revert_and_warmup_reengagement() {
        let cfg = FilterConfig::default();
        let base = iso([0.0; 3], 1.0);
        let outlier = iso([10.0, 0.0, 0.0], 1.0);
        let mut frames = vec![vec![base]; 8];
        frames[3] = vec![outlier];
        let out = track_sequence(&frames, &cfg).unwrap();

        let branches: Vec<StepBranch> = out.log.iter().map(|r| r.branch).collect();
        assert_eq!(
            branches,
            vec![
                StepBranch::Warmup, // 0: first frame
                StepBranch::Warmup, // 1: history fills, engaged at end
                StepBranch::Engage, // 2: static, zero innovation
                StepBranch::Revert, // 3: outlier at 10σ
                StepBranch::Revert, // 4: obs back, but prev is the outlier
                StepBranch::Warmup, // 5: pseudo-gate passes, warmup re-entry
                StepBranch::Warmup, // 6: history fills again
                StepBranch::Engage, // 7: re-engaged
            ]
        );
        // Revert emitted the outlier observation verbatim.
        assert_eq!(out.frames[3][0], outlier);
    }

    #[test]
    fn left_manifold_prediction_forces_hold() {
        // Covariance shrinking 4x per frame makes the extrapolated step land
        // exactly on the cone boundary (exp_I(-2I) = 0), so the prediction is
        // clamped, flagged, and not trusted for merging.
        let cfg = FilterConfig::default();
        let big = iso([0.0; 3], 4.0);
        let small = iso([0.0; 3], 1.0);
        let track = TrackState::new(big).step(&small, &cfg).state;
        assert_eq!(track.status, TrackStatus::Engaged);

        let obs = iso([0.0; 3], 1.0);
        let res = track.step(&obs, &cfg);
        assert_eq!(res.record.branch, StepBranch::Hold);
        assert_eq!(res.output, obs);
        assert_eq!(res.state.status, TrackStatus::Engaged);
    }

    #[test]
    fn empty_sequence_is_empty() {
        let out = track_sequence(&[], &FilterConfig::default()).unwrap();
        assert!(out.frames.is_empty() && out.log.is_empty());
    }

    #[test]
    fn count_mismatch_names_offending_frame() {
        let g = iso([0.0; 3], 1.0);
        let frames = vec![vec![g, g], vec![g, g], vec![g]];
        let err = track_sequence(&frames, &FilterConfig::default()).unwrap_err();
        match err {
            BuresError::Correspondence { frame, expected, found } => {
                assert_eq!((frame, expected, found), (2, 2, 1));
            }
            other => panic!("wrong error {other:?}"),
        }
    }

    prop_compose! {
        fn arb_cov()(
            q in prop::array::uniform4(-1.0f64..1.0).prop_filter("nonzero", |q| {
                q.iter().map(|x| x * x).sum::<f64>() > 1e-3
            }),
            s in prop::array::uniform3(0.2f64..2.0),
        ) -> SpdMat3 {
            compose_covariance(&DecomposedCov::new(q, s).unwrap())
        }
    }

    proptest! {
        #[test]
        fn prop_gain_eigenvalues_in_unit_interval(ob in arb_cov(), p in arb_cov()) {
            // K is similar to M = Σob^{1/2} (Σob+Σp)^{-1} Σob^{1/2}, which is
            // SPD with eigenvalues in (0,1); check through M.
            let sob = spd::sqrt_spd(&ob).to_mat();
            let sum_inv = ob.sym().add(p.sym()).to_mat().inverse();
            let m = spd::symmetrize(&sob.mul(&sum_inv).mul(&sob)).unwrap();
            let eig = spd::eigh3(&m);
            prop_assert!(eig.values[0] > 0.0 && eig.values[2] < 1.0,
                "eigenvalues {:?}", eig.values);
        }

        #[test]
        fn prop_merge_betweenness_in_gain_eigenbasis(
            ob_cov in arb_cov(), p_cov in arb_cov(),
            mo in prop::array::uniform3(-2.0f64..2.0),
            mp in prop::array::uniform3(-2.0f64..2.0),
        ) {
            // In K's own eigenbasis the update is a per-coordinate convex
            // blend: V^{-1} μ̂ lies between V^{-1} μ_ob and V^{-1} μ_p.
            // Realize the basis through M = S K S^{-1} (S = Σob^{1/2}):
            // K = S^{-1} M S with M SPD, so V = S^{-1} Q for M = Q D Qᵀ.
            let cfg = FilterConfig::default();
            let obs = Gaussian3::new(mo, ob_cov).unwrap();
            let pred = Gaussian3::new(mp, p_cov).unwrap();
            let merged = merge(&obs, &pred, &cfg);

            let s = spd::sqrt_spd(&ob_cov).to_mat();
            let si = spd::inv_sqrt_spd(&ob_cov).to_mat();
            let sum_inv = ob_cov.sym().add(p_cov.sym()).to_mat().inverse();
            let m = spd::symmetrize(&s.mul(&sum_inv).mul(&s)).unwrap();
            let q = spd::eigh3(&m).vectors;
            let v_inv = q.transpose().mul(&si);

            let a = v_inv.mul_vec(obs.mean);
            let b = v_inv.mul_vec(pred.mean);
            let c = v_inv.mul_vec(merged.mean);
            for k in 0..3 {
                let lo = a[k].min(b[k]);
                let hi = a[k].max(b[k]);
                let slack = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
                prop_assert!(c[k] >= lo - slack && c[k] <= hi + slack,
                    "coordinate {} escaped [{}, {}]: {}", k, lo, hi, c[k]);
            }
        }

        #[test]
        fn prop_merge_fixed_point(cov in arb_cov(), mean in prop::array::uniform3(-2.0f64..2.0)) {
            let g = Gaussian3::new(mean, cov).unwrap();
            let m = merge(&g, &g, &FilterConfig::default());
            prop_assert_eq!(m, g);
        }

        #[test]
        fn prop_merged_covariance_is_valid(
            ob_cov in arb_cov(), p_cov in arb_cov(),
        ) {
            let cfg = FilterConfig::default();
            let obs = Gaussian3::new([0.0; 3], ob_cov).unwrap();
            let pred = Gaussian3::new([0.1, 0.0, 0.0], p_cov).unwrap();
            let merged = merge(&obs, &pred, &cfg);
            // Re-projection is a bitwise no-op.
            let again = gaussian::project_to_valid(merged.mean, &merged.cov.to_mat(), cfg.epsilon_pd).unwrap();
            prop_assert_eq!(again.cov.sym(), merged.cov.sym());
        }

        #[test]
        fn prop_track_sequence_deterministic(seed_means in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 4..8)) {
            let cfg = FilterConfig::default();
            let frames: Vec<Vec<Gaussian3>> = seed_means
                .iter()
                .map(|m| vec![iso(*m, 1.0)])
                .collect();
            let a = track_sequence(&frames, &cfg).unwrap();
            let b = track_sequence(&frames, &cfg).unwrap();
            prop_assert_eq!(a.frames, b.frames);
        }
    }

    #[test]
    fn merged_covariance_symmetrized_despite_asymmetric_gain_product() {
        // Non-commuting pair: K(Σp − Σob) is asymmetric, the merge result
        // must still be a canonical symmetric PD matrix.
        let ob = SpdMat3::new(SymMat3::from_upper(1.0, 0.4, 0.0, 2.0, 0.3, 1.5)).unwrap();
        let p = SpdMat3::new(SymMat3::from_upper(2.0, -0.2, 0.1, 1.0, 0.0, 2.5)).unwrap();
        let obs = Gaussian3::new([0.0; 3], ob).unwrap();
        let pred = Gaussian3::new([0.5, -0.5, 0.2], p).unwrap();
        let m = merge(&obs, &pred, &FilterConfig::default());
        let eig = spd::eigh3(m.cov.sym());
        assert!(eig.values[0] >= spd::EPSILON_PD * 0.999);
    }
}

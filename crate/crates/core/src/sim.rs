//! Synthetic dynamic-scene generator and evaluation rig.
//!
//! Stands in for a neural observer: ground-truth Gaussian trajectories with
//! parametric motion, observation-noise injection (mean jitter, rotation and
//! scale noise, outliers), filter-vs-observation experiments, and a 2D flow
//! projection with average endpoint error. Everything is deterministic in the
//! configured seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{BuresError, Result};
use crate::filter::{track_sequence, FilterConfig, StatusRecord};
use crate::gaussian::{DecomposedGaussian, Gaussian3, MIN_SCALE};
use crate::losses::KahanSum;
use crate::mat3::{self, quat, sub3, Vec3};
use crate::metric::{w2_distance, w2_squared};

/// Schema tag written into scene files.
pub const SCENE_SCHEMA: &str = "bures-flow/scene-v1";

/// Ground-truth motion of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MotionModel {
    /// Shared linear drift; rotations and scales stay fixed.
    ConstantVelocity { velocity: Vec3 },
    /// Each Gaussian orbits its spawn point in the xy-plane and spins about z.
    Circular {
        angular_rate: f64,
        radius: f64,
        phase_step: f64,
    },
    /// Isotropic pulsation of the per-axis scales.
    ScaleOscillation {
        amplitude: f64,
        rate: f64,
        phase_step: f64,
    },
    /// Linear drift + orbit + spin + scale pulsation together.
    Composite {
        velocity: Vec3,
        angular_rate: f64,
        radius: f64,
        scale_amplitude: f64,
        scale_rate: f64,
        phase_step: f64,
    },
}

impl MotionModel {
    fn scale_amplitude(&self) -> f64 {
        match self {
            MotionModel::ScaleOscillation { amplitude, .. } => *amplitude,
            MotionModel::Composite { scale_amplitude, .. } => *scale_amplitude,
            _ => 0.0,
        }
    }
}

/// Observation-noise parameters. Mean noise and outlier magnitudes are
/// fractions/multiples of the per-Gaussian `sigma_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub mean_noise_std: f64,
    /// Std of the random axis-angle rotation composed onto the orientation, radians.
    pub rot_noise_std: f64,
    /// Std of the multiplicative lognormal scale noise (log-space).
    pub scale_noise_std: f64,
    pub outlier_rate: f64,
    pub outlier_magnitude: f64,
}

impl NoiseModel {
    pub const ZERO: NoiseModel = NoiseModel {
        mean_noise_std: 0.0,
        rot_noise_std: 0.0,
        scale_noise_std: 0.0,
        outlier_rate: 0.0,
        outlier_magnitude: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("mean_noise_std", self.mean_noise_std),
            ("rot_noise_std", self.rot_noise_std),
            ("scale_noise_std", self.scale_noise_std),
            ("outlier_rate", self.outlier_rate),
            ("outlier_magnitude", self.outlier_magnitude),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(BuresError::Config(format!(
                    "noise field {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.outlier_rate > 1.0 {
            return Err(BuresError::Config("outlier_rate must be <= 1".into()));
        }
        Ok(())
    }
}

/// Full scenario description; `seed` drives both placement and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_gaussians: usize,
    pub n_frames: usize,
    pub motion: MotionModel,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Half-width of the spawn box.
    #[serde(default = "default_extent")]
    pub placement_extent: f64,
    /// Per-axis standard-deviation range sampled at spawn.
    #[serde(default = "default_scale_range")]
    pub scale_range: (f64, f64),
}

fn default_extent() -> f64 {
    1.0
}

fn default_scale_range() -> (f64, f64) {
    (0.25, 0.55)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_gaussians == 0 {
            return Err(BuresError::Config("n_gaussians must be positive".into()));
        }
        if self.n_frames < 3 {
            return Err(BuresError::Config("n_frames must be at least 3".into()));
        }
        let a = self.motion.scale_amplitude();
        if !(0.0..1.0).contains(&a) {
            return Err(BuresError::Config(format!(
                "scale oscillation amplitude must lie in [0,1), got {a}"
            )));
        }
        if !(self.scale_range.0 >= MIN_SCALE && self.scale_range.1 >= self.scale_range.0) {
            return Err(BuresError::Config("invalid scale_range".into()));
        }
        if !(self.placement_extent >= 0.0) {
            return Err(BuresError::Config("placement_extent must be nonnegative".into()));
        }
        self.noise.validate()
    }
}

/// Per-frame lists of decomposed Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frames: Vec<Vec<DecomposedGaussian>>,
}

impl Scene {
    pub fn to_gaussians(&self) -> Result<Vec<Vec<Gaussian3>>> {
        self.frames
            .iter()
            .map(|f| f.iter().map(DecomposedGaussian::to_gaussian).collect())
            .collect()
    }
}

/// On-disk scene representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub schema: String,
    pub meta: SceneMeta,
    pub frames: Vec<Vec<DecomposedGaussian>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SceneMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SceneFile {
    pub fn new(scene: Scene, meta: SceneMeta) -> Self {
        Self {
            schema: SCENE_SCHEMA.to_string(),
            meta,
            frames: scene.frames,
        }
    }

    pub fn into_scene(self) -> Result<Scene> {
        if self.schema != SCENE_SCHEMA {
            return Err(BuresError::Malformed {
                field: "schema".into(),
                message: format!("expected {SCENE_SCHEMA}, found {}", self.schema),
            });
        }
        Ok(Scene { frames: self.frames })
    }
}

struct BaseGaussian {
    position: Vec3,
    rot: quat::Quat,
    scale: Vec3,
    phase: f64,
}

/// Generates the ground-truth scene for `cfg`, deterministically in `cfg.seed`.
pub fn generate_scene(cfg: &ScenarioConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let phase_step = match cfg.motion {
        MotionModel::Circular { phase_step, .. }
        | MotionModel::ScaleOscillation { phase_step, .. }
        | MotionModel::Composite { phase_step, .. } => phase_step,
        MotionModel::ConstantVelocity { .. } => 0.0,
    };

    let mut bases = Vec::with_capacity(cfg.n_gaussians);
    for i in 0..cfg.n_gaussians {
        let e = cfg.placement_extent;
        let position = [
            rng.gen_range(-e..=e),
            rng.gen_range(-e..=e),
            rng.gen_range(-e..=e),
        ];
        let rot = random_unit_quat(&mut rng);
        let (lo, hi) = cfg.scale_range;
        let scale = [
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
            rng.gen_range(lo..=hi),
        ];
        bases.push(BaseGaussian {
            position,
            rot,
            scale,
            phase: phase_step * i as f64,
        });
    }

    let mut frames = Vec::with_capacity(cfg.n_frames);
    // Constant-velocity means accumulate incrementally so that consecutive
    // frame differences are the realized per-frame step.
    let mut cv_means: Vec<Vec3> = bases.iter().map(|b| b.position).collect();

    for t in 0..cfg.n_frames {
        let tf = t as f64;
        let mut frame = Vec::with_capacity(cfg.n_gaussians);
        for (i, base) in bases.iter().enumerate() {
            let g = match cfg.motion {
                MotionModel::ConstantVelocity { .. } => DecomposedGaussian {
                    mean: cv_means[i],
                    rot: base.rot,
                    scale: base.scale,
                },
                MotionModel::Circular {
                    angular_rate,
                    radius,
                    phase_step: _,
                } => DecomposedGaussian {
                    mean: mat3::add3(base.position, orbit_offset(radius, angular_rate, tf, base.phase)),
                    rot: spin(base.rot, angular_rate * tf),
                    scale: base.scale,
                },
                MotionModel::ScaleOscillation {
                    amplitude,
                    rate,
                    phase_step: _,
                } => DecomposedGaussian {
                    mean: base.position,
                    rot: base.rot,
                    scale: pulse(base.scale, amplitude, rate, tf, base.phase),
                },
                MotionModel::Composite {
                    velocity,
                    angular_rate,
                    radius,
                    scale_amplitude,
                    scale_rate,
                    phase_step: _,
                } => DecomposedGaussian {
                    mean: mat3::add3(
                        mat3::add3(base.position, mat3::scale3(velocity, tf)),
                        orbit_offset(radius, angular_rate, tf, base.phase),
                    ),
                    rot: spin(base.rot, angular_rate * tf),
                    scale: pulse(base.scale, scale_amplitude, scale_rate, tf, base.phase),
                },
            };
            frame.push(g);
        }
        frames.push(frame);

        if let MotionModel::ConstantVelocity { velocity } = cfg.motion {
            for m in cv_means.iter_mut() {
                *m = mat3::add3(*m, velocity);
            }
        }
    }

    Ok(Scene { frames })
}

fn orbit_offset(radius: f64, rate: f64, t: f64, phase: f64) -> Vec3 {
    let a = rate * t + phase;
    [
        radius * (a.cos() - phase.cos()),
        radius * (a.sin() - phase.sin()),
        0.0,
    ]
}

fn spin(rot: quat::Quat, angle: f64) -> quat::Quat {
    if angle == 0.0 {
        return rot;
    }
    let z = quat::from_axis_angle([0.0, 0.0, 1.0], angle);
    quat::canonicalize(quat::normalize(quat::mul(z, rot)))
}

fn pulse(scale: Vec3, amplitude: f64, rate: f64, t: f64, phase: f64) -> Vec3 {
    let f = 1.0 + amplitude * (rate * t + phase).sin();
    [scale[0] * f, scale[1] * f, scale[2] * f]
}

fn random_unit_quat(rng: &mut ChaCha8Rng) -> quat::Quat {
    loop {
        let q: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if quat::norm(q) > 1e-6 {
            return quat::canonicalize(quat::normalize(q));
        }
    }
}

/// Geometric mean of the per-axis scales (the sigma_scale of the composed
/// covariance, whose eigenvalues are the squared scales).
fn scale_sigma(scale: Vec3) -> f64 {
    (scale[0] * scale[1] * scale[2]).cbrt()
}

/// Injects observation noise into a scene, deterministically in `seed`.
///
/// Per Gaussian and frame: iid normal mean jitter scaled by the local
/// sigma_scale, a small random axis-angle composed onto the rotation,
/// multiplicative lognormal scale noise, and with probability `outlier_rate`
/// the mean is replaced by a uniformly-directed offset of
/// `outlier_magnitude · sigma_scale`.
pub fn perturb(scene: &Scene, noise: &NoiseModel, seed: u64) -> Result<Scene> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::with_capacity(scene.frames.len());
    for frame in &scene.frames {
        let mut out = Vec::with_capacity(frame.len());
        for g in frame {
            // Fixed draw order keeps the stream layout independent of values.
            let outlier_u: f64 = rng.gen();
            let dir = random_direction(&mut rng);
            let mean_n: [f64; 3] = normal3(&mut rng);
            let rot_n: [f64; 3] = normal3(&mut rng);
            let scale_n: [f64; 3] = normal3(&mut rng);

            let sigma = scale_sigma(g.scale);
            let mut mean = [
                g.mean[0] + mean_n[0] * noise.mean_noise_std * sigma,
                g.mean[1] + mean_n[1] * noise.mean_noise_std * sigma,
                g.mean[2] + mean_n[2] * noise.mean_noise_std * sigma,
            ];
            if outlier_u < noise.outlier_rate {
                mean = mat3::add3(g.mean, mat3::scale3(dir, noise.outlier_magnitude * sigma));
            }

            let rot = if noise.rot_noise_std > 0.0 {
                let dq = quat::from_rotvec(mat3::scale3(rot_n, noise.rot_noise_std));
                quat::canonicalize(quat::normalize(quat::mul(dq, g.rot)))
            } else {
                g.rot
            };

            let scale = [
                (g.scale[0] * (scale_n[0] * noise.scale_noise_std).exp()).max(MIN_SCALE),
                (g.scale[1] * (scale_n[1] * noise.scale_noise_std).exp()).max(MIN_SCALE),
                (g.scale[2] * (scale_n[2] * noise.scale_noise_std).exp()).max(MIN_SCALE),
            ];

            out.push(DecomposedGaussian { mean, rot, scale });
        }
        frames.push(out);
    }
    Ok(Scene { frames })
}

fn normal3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ]
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let v = normal3(rng);
    let n = mat3::norm3(v);
    if n < 1e-12 {
        [1.0, 0.0, 0.0]
    } else {
        mat3::scale3(v, 1.0 / n)
    }
}

/// Pinhole camera: `x_px = f·X/Z + c_x` in the camera frame, looking down +z.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub position: Vec3,
    /// World-to-camera rotation (camera axes: x right, y down, z forward).
    pub rotation: [f64; 4],
    pub focal: f64,
    pub principal: [f64; 2],
    pub resolution: (u32, u32),
}

impl PinholeCamera {
    /// Camera at `position` looking at `target` with `up` fixing the roll.
    pub fn look_at(position: Vec3, target: Vec3, up: Vec3, focal: f64, principal: [f64; 2], resolution: (u32, u32)) -> Result<Self> {
        if !(focal > 0.0) {
            return Err(BuresError::Config("focal length must be positive".into()));
        }
        let forward = sub3(target, position);
        let fn_ = mat3::norm3(forward);
        if fn_ < 1e-12 {
            return Err(BuresError::Config("camera target coincides with position".into()));
        }
        let f = mat3::scale3(forward, 1.0 / fn_);
        let right_raw = mat3::cross3(f, up);
        let rn = mat3::norm3(right_raw);
        if rn < 1e-12 {
            return Err(BuresError::Config("camera up is parallel to the view direction".into()));
        }
        let r = mat3::scale3(right_raw, 1.0 / rn);
        let d = mat3::cross3(f, r); // down = forward × right
        // Rows of the world→camera rotation are the camera axes.
        let rot = crate::mat3::Mat3::new([r, d, f]);
        Ok(Self {
            position,
            rotation: quat::from_mat(&rot),
            focal,
            principal,
            resolution,
        })
    }

    /// Pixel projection; `None` for nonpositive depth.
    pub fn project(&self, p: Vec3) -> Option<[f64; 2]> {
        let rel = sub3(p, self.position);
        let pc = quat::to_mat(self.rotation).mul_vec(rel);
        let z = pc[2];
        if z <= 0.0 {
            return None;
        }
        Some([
            self.focal * pc[0] / z + self.principal[0],
            self.focal * pc[1] / z + self.principal[1],
        ])
    }
}

/// The camera used by the built-in presets and experiments: far enough back
/// that even outlier jumps keep positive depth.
pub fn default_camera() -> PinholeCamera {
    PinholeCamera::look_at(
        [0.0, 0.0, 8.0],
        [0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        800.0,
        [320.0, 240.0],
        (640, 480),
    )
    .expect("default camera is valid")
}

/// One 2D displacement sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowVector {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

/// Per-frame flow: `flow[t][i]` is the displacement of Gaussian `i` from
/// frame `t` to `t+1` in pixels (length `frames − 1`).
pub type FlowField = Vec<Vec<FlowVector>>;

/// Projects per-frame mean displacements to 2D pixel flow; points with
/// nonpositive depth at either endpoint are flagged invalid.
pub fn project_flow(camera: &PinholeCamera, frames: &[Vec<Gaussian3>]) -> FlowField {
    let mut field = Vec::new();
    for t in 1..frames.len() {
        let mut row = Vec::with_capacity(frames[t].len());
        for (curr, prev) in frames[t].iter().zip(&frames[t - 1]) {
            let (a, b) = (camera.project(prev.mean), camera.project(curr.mean));
            match (a, b) {
                (Some(pa), Some(pb)) => row.push(FlowVector {
                    u: pb[0] - pa[0],
                    v: pb[1] - pa[1],
                    valid: true,
                }),
                _ => row.push(FlowVector {
                    u: 0.0,
                    v: 0.0,
                    valid: false,
                }),
            }
        }
        field.push(row);
    }
    field
}

/// Average endpoint error in pixels over pairwise-valid points.
pub fn aepe(est: &FlowField, gt: &FlowField) -> Result<f64> {
    if est.len() != gt.len() {
        return Err(BuresError::Correspondence {
            frame: est.len().min(gt.len()),
            expected: gt.len(),
            found: est.len(),
        });
    }
    let mut acc = KahanSum::default();
    let mut count = 0usize;
    for (t, (er, gr)) in est.iter().zip(gt).enumerate() {
        if er.len() != gr.len() {
            return Err(BuresError::Correspondence {
                frame: t,
                expected: gr.len(),
                found: er.len(),
            });
        }
        for (e, g) in er.iter().zip(gr) {
            if e.valid && g.valid {
                acc.add(((e.u - g.u).powi(2) + (e.v - g.v).powi(2)).sqrt());
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(BuresError::UndefinedMetric {
            context: "AEPE over zero valid flow points",
        });
    }
    Ok(acc.value() / count as f64)
}

/// Whether an experiment runs raw observations or the state filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ObsOnly,
    Filtered,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::ObsOnly => "obs",
            Mode::Filtered => "filtered",
        }
    }
}

/// Evaluation metrics of one experiment run against ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// RMS mean-position error, scene length units.
    pub mean_rmse: f64,
    /// RMS 2-Wasserstein distance to ground truth.
    pub w2_rmse: f64,
    /// Mean consecutive-frame W₂ of the estimates (flicker proxy).
    pub temporal_roughness: f64,
    /// Average endpoint error of projected 2D flow, pixels.
    pub aepe_2d: f64,
    pub per_frame_mean_rmse: Vec<f64>,
    pub per_frame_w2_rmse: Vec<f64>,
    /// Per transition (length frames − 1).
    pub per_frame_roughness: Vec<f64>,
    /// Per transition; NaN where a frame has no valid flow points.
    pub per_frame_aepe: Vec<f64>,
}

/// Output of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub estimates: Vec<Vec<Gaussian3>>,
    pub metrics: MetricsReport,
    /// Filter status log; empty in observation-only mode.
    pub status_log: Vec<StatusRecord>,
}

fn perturb_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Generates, perturbs, optionally filters, and scores one scenario run.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    filter_cfg: &FilterConfig,
    mode: Mode,
) -> Result<ExperimentResult> {
    let truth_scene = generate_scene(cfg)?;
    let obs_scene = perturb(&truth_scene, &cfg.noise, perturb_seed(cfg.seed))?;
    let truth = truth_scene.to_gaussians()?;
    let obs = obs_scene.to_gaussians()?;

    let (estimates, status_log) = match mode {
        Mode::ObsOnly => (obs, Vec::new()),
        Mode::Filtered => {
            let out = track_sequence(&obs, filter_cfg)?;
            (out.frames, out.log)
        }
    };

    let metrics = compute_metrics(&estimates, &truth, &default_camera())?;
    Ok(ExperimentResult {
        estimates,
        metrics,
        status_log,
    })
}

/// Scores `estimates` against `truth` (positions, Wasserstein distance,
/// temporal roughness, projected-flow AEPE).
pub fn compute_metrics(
    estimates: &[Vec<Gaussian3>],
    truth: &[Vec<Gaussian3>],
    camera: &PinholeCamera,
) -> Result<MetricsReport> {
    if estimates.len() != truth.len() {
        return Err(BuresError::Correspondence {
            frame: estimates.len().min(truth.len()),
            expected: truth.len(),
            found: estimates.len(),
        });
    }
    let mut sq_mean = KahanSum::default();
    let mut sq_w2 = KahanSum::default();
    let mut count = 0usize;
    let mut per_frame_mean_rmse = Vec::with_capacity(truth.len());
    let mut per_frame_w2_rmse = Vec::with_capacity(truth.len());

    for (t, (est, gt)) in estimates.iter().zip(truth).enumerate() {
        if est.len() != gt.len() {
            return Err(BuresError::Correspondence {
                frame: t,
                expected: gt.len(),
                found: est.len(),
            });
        }
        let mut f_mean = KahanSum::default();
        let mut f_w2 = KahanSum::default();
        for (e, g) in est.iter().zip(gt) {
            let dm = mat3::norm3_sq(sub3(e.mean, g.mean));
            let dw = w2_squared(e, g);
            f_mean.add(dm);
            f_w2.add(dw);
            sq_mean.add(dm);
            sq_w2.add(dw);
            count += 1;
        }
        let n = est.len().max(1) as f64;
        per_frame_mean_rmse.push((f_mean.value() / n).sqrt());
        per_frame_w2_rmse.push((f_w2.value() / n).sqrt());
    }

    let mut rough = KahanSum::default();
    let mut rough_count = 0usize;
    let mut per_frame_roughness = Vec::new();
    for t in 1..estimates.len() {
        let mut f = KahanSum::default();
        for (curr, prev) in estimates[t].iter().zip(&estimates[t - 1]) {
            let d = w2_distance(curr, prev);
            f.add(d);
            rough.add(d);
            rough_count += 1;
        }
        per_frame_roughness.push(f.value() / estimates[t].len().max(1) as f64);
    }

    let est_flow = project_flow(camera, estimates);
    let gt_flow = project_flow(camera, truth);
    let aepe_2d = aepe(&est_flow, &gt_flow)?;
    let mut per_frame_aepe = Vec::with_capacity(est_flow.len());
    for (er, gr) in est_flow.iter().zip(&gt_flow) {
        let mut s = KahanSum::default();
        let mut c = 0usize;
        for (e, g) in er.iter().zip(gr) {
            if e.valid && g.valid {
                s.add(((e.u - g.u).powi(2) + (e.v - g.v).powi(2)).sqrt());
                c += 1;
            }
        }
        per_frame_aepe.push(if c == 0 { f64::NAN } else { s.value() / c as f64 });
    }

    let denom = count.max(1) as f64;
    Ok(MetricsReport {
        mean_rmse: (sq_mean.value() / denom).sqrt(),
        w2_rmse: (sq_w2.value() / denom).sqrt(),
        temporal_roughness: if rough_count == 0 {
            0.0
        } else {
            rough.value() / rough_count as f64
        },
        aepe_2d,
        per_frame_mean_rmse,
        per_frame_w2_rmse,
        per_frame_roughness,
        per_frame_aepe,
    })
}

/// Built-in scenario presets.
pub mod presets {
    use super::*;

    /// The composite scenario used by the acceptance suite.
    pub fn default_scenario(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_gaussians: 64,
            n_frames: 60,
            motion: MotionModel::Composite {
                velocity: [0.012, -0.008, 0.01],
                angular_rate: 0.05,
                radius: 0.3,
                scale_amplitude: 0.1,
                scale_rate: 0.12,
                phase_step: 0.4,
            },
            noise: NoiseModel {
                mean_noise_std: 0.02,
                rot_noise_std: 0.02,
                scale_noise_std: 0.02,
                outlier_rate: 0.002,
                outlier_magnitude: 10.0,
            },
            seed,
            placement_extent: 1.0,
            scale_range: (0.25, 0.55),
        }
    }

    /// Noise-free constant-velocity scenario; both modes sit at the
    /// numerical floor.
    pub fn zero_noise(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_gaussians: 16,
            n_frames: 30,
            motion: MotionModel::ConstantVelocity {
                velocity: [0.02, -0.01, 0.015],
            },
            noise: NoiseModel::ZERO,
            seed,
            placement_extent: 1.0,
            scale_range: (0.25, 0.55),
        }
    }

    /// Linear motion with mean noise only.
    pub fn constant_velocity(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_gaussians: 32,
            n_frames: 60,
            motion: MotionModel::ConstantVelocity {
                velocity: [0.015, -0.01, 0.012],
            },
            noise: NoiseModel {
                mean_noise_std: 0.02,
                rot_noise_std: 0.0,
                scale_noise_std: 0.0,
                outlier_rate: 0.0,
                outlier_magnitude: 0.0,
            },
            seed,
            placement_extent: 1.0,
            scale_range: (0.25, 0.55),
        }
    }

    /// Orbiting scene with the default noise mix.
    pub fn circular(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_gaussians: 32,
            n_frames: 60,
            motion: MotionModel::Circular {
                angular_rate: 0.05,
                radius: 0.3,
                phase_step: 0.4,
            },
            noise: NoiseModel {
                mean_noise_std: 0.02,
                rot_noise_std: 0.02,
                scale_noise_std: 0.02,
                outlier_rate: 0.002,
                outlier_magnitude: 10.0,
            },
            seed,
            placement_extent: 1.0,
            scale_range: (0.25, 0.55),
        }
    }

    /// Looks up a preset by CLI name.
    pub fn by_name(name: &str, seed: u64) -> Option<ScenarioConfig> {
        match name {
            "default" => Some(default_scenario(seed)),
            "zero-noise" => Some(zero_noise(seed)),
            "constant-velocity" => Some(constant_velocity(seed)),
            "circular" => Some(circular(seed)),
            _ => None,
        }
    }

    pub const NAMES: &[&str] = &["default", "zero-noise", "constant-velocity", "circular"];
}

//! Training-signal evaluation: the state-observation alignment loss, the
//! temporal Wasserstein regularizer, their Euclidean baselines, and the total
//! loss composition with an externally supplied rendering loss.
//!
//! These are evaluated, not differentiated; sums use Neumaier compensation so
//! per-term parallel evaluation with order-independent reduction stays
//! deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{BuresError, Result};
use crate::gaussian::Gaussian3;
use crate::mat3::{norm3_sq, sub3};
use crate::metric::w2_squared;

/// Weights of the alignment and regularization terms in the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_soa: f64,
    pub lambda_wr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_soa: 0.1,
            lambda_wr: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_soa.is_finite() && self.lambda_soa >= 0.0)
            || !(self.lambda_wr.is_finite() && self.lambda_wr >= 0.0)
        {
            return Err(BuresError::Config(
                "loss weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Compensated (Neumaier) accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// State-observation alignment loss: `W₂²(pred, obs)`.
pub fn soa_loss(pred: &Gaussian3, obs: &Gaussian3) -> f64 {
    w2_squared(pred, obs)
}

/// Wasserstein regularization: `Σ_{t≥1} Σ_i W₂²(seq[t][i], seq[t−1][i])`.
pub fn wr_loss(sequence: &[Vec<Gaussian3>]) -> Result<f64> {
    check_counts(sequence)?;
    let mut acc = KahanSum::default();
    for t in 1..sequence.len() {
        for (curr, prev) in sequence[t].iter().zip(&sequence[t - 1]) {
            acc.add(w2_squared(curr, prev));
        }
    }
    Ok(acc.value())
}

/// [`wr_loss`] normalized per (frame transition · Gaussian), for comparing
/// scenarios of different sizes. Zero for sequences with no transitions.
pub fn wr_loss_mean(sequence: &[Vec<Gaussian3>]) -> Result<f64> {
    let raw = wr_loss(sequence)?;
    let transitions = sequence.len().saturating_sub(1);
    let n = sequence.first().map_or(0, Vec::len);
    let terms = transitions * n;
    Ok(if terms == 0 { 0.0 } else { raw / terms as f64 })
}

/// Euclidean baseline of [`soa_loss`]: `‖Δμ‖² + ‖ΔΣ‖²_F`.
pub fn linear_soa_loss(pred: &Gaussian3, obs: &Gaussian3) -> f64 {
    let mean = norm3_sq(sub3(pred.mean, obs.mean));
    let cov = pred.cov.sym().sub(obs.cov.sym()).frobenius_norm();
    mean + cov * cov
}

/// Euclidean baseline of [`wr_loss`], composed over the same pairs.
pub fn linear_wr_loss(sequence: &[Vec<Gaussian3>]) -> Result<f64> {
    check_counts(sequence)?;
    let mut acc = KahanSum::default();
    for t in 1..sequence.len() {
        for (curr, prev) in sequence[t].iter().zip(&sequence[t - 1]) {
            acc.add(linear_soa_loss(curr, prev));
        }
    }
    Ok(acc.value())
}

/// `L_total = L_render + λ_SOA·L_SOA + λ_WR·L_WR`.
pub fn total_loss(render_loss: f64, soa: f64, wr: f64, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    for (name, v) in [("render_loss", render_loss), ("soa", soa), ("wr", wr)] {
        if !v.is_finite() || v < 0.0 {
            return Err(BuresError::Malformed {
                field: name.into(),
                message: format!("loss component must be finite and nonnegative, got {v}"),
            });
        }
    }
    Ok(render_loss + w.lambda_soa * soa + w.lambda_wr * wr)
}

fn check_counts(sequence: &[Vec<Gaussian3>]) -> Result<()> {
    let Some(first) = sequence.first() else {
        return Ok(());
    };
    let n = first.len();
    for (t, frame) in sequence.iter().enumerate() {
        if frame.len() != n {
            return Err(BuresError::Correspondence {
                frame: t,
                expected: n,
                found: frame.len(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic;
    use crate::mat3::Vec3;
    use crate::spd::SpdMat3;

    fn iso(mean: Vec3, var: f64) -> Gaussian3 {
        Gaussian3::new(mean, SpdMat3::from_diag([var, var, var]).unwrap()).unwrap()
    }

    #[test]
    fn soa_matches_w2_squared_bitwise() {
        let a = iso([0.0; 3], 1.0);
        let b = iso([1.0, 0.0, 0.0], 4.0);
        assert_eq!(soa_loss(&a, &b), w2_squared(&a, &b));
        assert!((soa_loss(&a, &b) - 4.0).abs() < 1e-12);
        assert_eq!(soa_loss(&a, &a), 0.0);
    }

    #[test]
    fn wr_static_sequence_is_zero() {
        let g = iso([0.3, 0.1, -0.2], 0.5);
        let seq = vec![vec![g, g]; 6];
        assert!(wr_loss(&seq).unwrap() <= 1e-12);
        assert!(linear_wr_loss(&seq).unwrap() <= 1e-24);
    }

    #[test]
    fn wr_single_pair() {
        let a = iso([0.0; 3], 1.0);
        let b = iso([1.0, 0.0, 0.0], 4.0);
        let seq = vec![vec![a], vec![b]];
        assert!((wr_loss(&seq).unwrap() - 4.0).abs() < 1e-12);
        assert!((wr_loss_mean(&seq).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wr_geodesic_steps_divide_the_jump() {
        let a = iso([0.0; 3], 1.0);
        let b = iso([1.0, 0.0, 0.0], 4.0);
        let jump = w2_squared(&a, &b);
        for n in [2usize, 4, 8] {
            let seq: Vec<Vec<Gaussian3>> = (0..=n)
                .map(|k| vec![geodesic(&a, &b, k as f64 / n as f64)])
                .collect();
            let wr = wr_loss(&seq).unwrap();
            let want = jump / n as f64;
            assert!(
                (wr - want).abs() <= 1e-6 * want,
                "n = {n}: wr {wr} vs {want}"
            );
            assert!(wr < jump);
        }
    }

    #[test]
    fn wr_additivity_over_a_split() {
        let frames: Vec<Vec<Gaussian3>> = (0..7)
            .map(|t| vec![iso([t as f64 * 0.1, 0.0, 0.0], 1.0 + 0.05 * t as f64)])
            .collect();
        let whole = wr_loss(&frames).unwrap();
        let k = 3;
        let left = wr_loss(&frames[..k]).unwrap();
        let right = wr_loss(&frames[k..]).unwrap();
        let boundary = w2_squared(&frames[k][0], &frames[k - 1][0]);
        assert!((whole - (left + right + boundary)).abs() <= 1e-12 * whole.max(1.0));
    }

    #[test]
    fn linear_loss_closed_form() {
        let a = iso([0.0; 3], 1.0);
        let b = iso([1.0, 0.0, 0.0], 4.0);
        // ‖Δμ‖² + ‖3I‖²_F = 1 + 27
        assert!((linear_soa_loss(&a, &b) - 28.0).abs() < 1e-12);
        assert_eq!(linear_soa_loss(&a, &a), 0.0);
    }

    #[test]
    fn total_loss_paper_weights() {
        let w = LossWeights::default();
        let t = total_loss(1.0, 4.0, 10.0, &w).unwrap();
        assert!((t - 1.5).abs() < 1e-15);
        assert_eq!(total_loss(0.0, 0.0, 0.0, &w).unwrap(), 0.0);
        let zero = LossWeights { lambda_soa: 0.0, lambda_wr: 0.0 };
        assert_eq!(total_loss(0.7, 3.0, 9.0, &zero).unwrap(), 0.7);
    }

    #[test]
    fn total_loss_rejects_non_finite() {
        let w = LossWeights::default();
        assert!(total_loss(f64::NAN, 0.0, 0.0, &w).is_err());
        assert!(total_loss(1.0, -0.1, 0.0, &w).is_err());
    }

    #[test]
    fn wr_count_mismatch_is_an_error() {
        let g = iso([0.0; 3], 1.0);
        let seq = vec![vec![g, g], vec![g]];
        assert!(matches!(
            wr_loss(&seq).unwrap_err(),
            BuresError::Correspondence { frame: 1, .. }
        ));
    }

    #[test]
    fn losses_agree_at_zero() {
        let a = iso([0.2, -0.4, 0.6], 0.9);
        assert!(soa_loss(&a, &a) <= 1e-12);
        assert_eq!(linear_soa_loss(&a, &a), 0.0);
        let b = iso([0.2, -0.4, 0.6], 0.9001);
        assert!(soa_loss(&a, &b) > 1e-12);
        assert!(linear_soa_loss(&a, &b) > 0.0);
    }

    /// Midpoint smoothing of a jittery sequence should not increase the
    /// regularizer; statistical because interior midpoints interact.
    #[test]
    fn smoothing_does_not_increase_wr_loss() {
        use rand::{Rng, SeedableRng};
        let mut passes = 0;
        for seed in 0..100u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut seq: Vec<Vec<Gaussian3>> = Vec::new();
            let mut mean = [0.0f64; 3];
            let mut var = 1.0f64;
            for _ in 0..8 {
                for m in mean.iter_mut() {
                    *m += rng.gen_range(-0.2..0.2);
                }
                var = (var * rng.gen_range(0.85..1.18)).max(0.05);
                seq.push(vec![iso(mean, var)]);
            }
            let mut smoothed = seq.clone();
            for t in 1..seq.len() - 1 {
                smoothed[t] = vec![geodesic(&seq[t - 1][0], &seq[t + 1][0], 0.5)];
            }
            if wr_loss(&smoothed).unwrap() <= wr_loss(&seq).unwrap() {
                passes += 1;
            }
        }
        assert!(passes >= 95, "smoothing reduced wr_loss in only {passes}/100 sequences");
    }
}

use serde::{Deserialize, Serialize};

use crate::dataset::Sequence;
use crate::network::ForwardTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean squared error between predicted and applied velocity, m^2/s^2.
    pub velocity_loss: f64,
    /// Mean slip of the selected sequences.
    pub slip_loss: f64,
    pub alpha: f64,
    /// `max(0, velocity_loss - alpha * slip_loss)`.
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_parts(velocity_loss: f64, slip_loss: f64, alpha: f64) -> Self {
        LossBreakdown {
            velocity_loss,
            slip_loss,
            alpha,
            total: (velocity_loss - alpha * slip_loss).max(0.0),
        }
    }

    /// True when the clamp is active and every gradient vanishes.
    pub fn is_clamped(&self) -> bool {
        self.velocity_loss - self.alpha * self.slip_loss <= 0.0
    }
}

/// Losses over the selected set from raw values.
pub fn losses_from_values(
    v_hat: &[f64],
    v_applied: &[f64],
    slips: &[f64],
    alpha: f64,
) -> Result<LossBreakdown> {
    if v_hat.is_empty() {
        return Err(Error::invalid("loss needs a nonempty selection"));
    }
    if v_hat.len() != v_applied.len() || v_hat.len() != slips.len() {
        return Err(Error::invalid("loss inputs have different lengths"));
    }
    let n = v_hat.len() as f64;
    let velocity_loss = v_hat
        .iter()
        .zip(v_applied)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n;
    let slip_loss = slips.iter().sum::<f64>() / n;
    Ok(LossBreakdown::from_parts(velocity_loss, slip_loss, alpha))
}

/// Losses over aligned selected traces and sequences.
pub fn compute_losses(
    traces: &[&ForwardTrace],
    sequences: &[&Sequence],
    alpha: f64,
) -> Result<LossBreakdown> {
    if traces.len() != sequences.len() {
        return Err(Error::invalid("traces and sequences are not aligned"));
    }
    let v_hat: Vec<f64> = traces.iter().map(|t| t.v_hat).collect();
    let v_applied: Vec<f64> = sequences.iter().map(|s| s.v_applied).collect();
    let slips: Vec<f64> = sequences.iter().map(|s| s.mean_slip).collect();
    losses_from_values(&v_hat, &v_applied, &slips, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_clamped_to_zero() {
        let l = losses_from_values(&[1.0, 2.0], &[1.0, 2.0], &[0.1, 0.3], 0.5).unwrap();
        assert_eq!(l.velocity_loss, 0.0);
        assert_eq!(l.total, 0.0);
        assert!(l.is_clamped());
    }

    #[test]
    fn clamp_arithmetic() {
        let l = LossBreakdown::from_parts(1.0, 0.5, 0.1);
        assert!((l.total - 0.95).abs() < 1e-15);
        let l = LossBreakdown::from_parts(0.01, 0.5, 1.0);
        assert_eq!(l.total, 0.0);
    }

    #[test]
    fn mean_definitions() {
        let l = losses_from_values(&[1.0, 3.0], &[2.0, 1.0], &[0.2, 0.4], 0.0).unwrap();
        assert!((l.velocity_loss - 2.5).abs() < 1e-15);
        assert!((l.slip_loss - 0.3).abs() < 1e-15);
        assert!(losses_from_values(&[], &[], &[], 0.1).is_err());
    }
}

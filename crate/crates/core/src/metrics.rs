//! Stability metrics (jerk, hip vibration) and the proprioception PCA diagnostic.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::simworld::{ImuId, RunLog, SimState, LEG_LENGTH};
use crate::{Error, Result};

/// Jerk magnitude per interior sample using central differences.
///
/// `samples` holds one IMU's acceleration vectors at uniform spacing `dt`.
pub fn jerk_series(samples: &[[f64; 3]], dt: f64) -> Result<Vec<f64>> {
    if samples.len() < 3 {
        return Err(Error::invalid(format!(
            "jerk needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    let inv = 1.0 / (2.0 * dt);
    Ok(samples
        .windows(3)
        .map(|w| {
            let mut sq = 0.0;
            for axis in 0..3 {
                let d = (w[2][axis] - w[0][axis]) * inv;
                sq += d * d;
            }
            sq.sqrt()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JerkSummary {
    /// Time-mean jerk per IMU in `ImuId::ALL` order, m/s^3.
    pub per_imu: [f64; 5],
    /// Unweighted mean of `per_imu`.
    pub mean: f64,
}

pub fn mean_jerk(traces: &[Vec<[f64; 3]>], dt: f64) -> Result<JerkSummary> {
    if traces.len() != 5 {
        return Err(Error::invalid(format!(
            "mean jerk needs 5 IMU traces, got {}",
            traces.len()
        )));
    }
    if traces.iter().any(|t| t.len() != traces[0].len()) {
        return Err(Error::invalid("IMU traces have different lengths"));
    }
    let mut per_imu = [0.0; 5];
    for (slot, trace) in per_imu.iter_mut().zip(traces) {
        let series = jerk_series(trace, dt)?;
        *slot = series.iter().sum::<f64>() / series.len() as f64;
    }
    Ok(JerkSummary {
        per_imu,
        mean: per_imu.iter().sum::<f64>() / 5.0,
    })
}

/// Acceleration traces of the five IMUs of a log, in `ImuId::ALL` order.
pub fn imu_traces(log: &RunLog) -> Vec<Vec<[f64; 3]>> {
    ImuId::ALL
        .iter()
        .map(|id| log.steps.iter().map(|s| s.imu[id.index()].accel).collect())
        .collect()
}

/// Percentage reduction of `panos` relative to `baseline`.
pub fn improvement(baseline: f64, panos: f64) -> Result<f64> {
    if !(baseline > 0.0 && baseline.is_finite()) {
        return Err(Error::invalid(format!(
            "baseline jerk must be positive, got {baseline}"
        )));
    }
    Ok(100.0 * (baseline - panos) / baseline)
}

/// RMS hip-angle deviation from nominal, averaged over hips, as arc length in cm.
pub fn hip_vibration_cost(hip_positions: &[[f64; 4]], nominal: [f64; 4]) -> Result<f64> {
    if hip_positions.is_empty() {
        return Err(Error::invalid("vibration cost needs at least one sample"));
    }
    let n = hip_positions.len() as f64;
    let mut total = 0.0;
    for hip in 0..4 {
        let ms = hip_positions
            .iter()
            .map(|h| (h[hip] - nominal[hip]).powi(2))
            .sum::<f64>()
            / n;
        total += ms.sqrt();
    }
    Ok(total / 4.0 * LEG_LENGTH * 100.0)
}

/// Vibration cost of a log against the standing pose at the same payload.
pub fn vibration_cost(log: &RunLog) -> Result<f64> {
    let nominal = SimState::new(log.terrain, log.seed)
        .standing_proprio(log.payload_mass)
        .hip_position;
    let hips: Vec<[f64; 4]> = log.steps.iter().map(|s| s.proprio.hip_position).collect();
    hip_vibration_cost(&hips, nominal)
}

/// Explained-variance fraction of each principal component, descending.
///
/// `rows` is a steps x features matrix.
pub fn pca_report(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = rows.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::invalid("PCA needs a nonempty matrix"));
    }
    if rows.len() < d + 1 {
        return Err(Error::invalid(format!(
            "PCA over {d} features needs at least {} rows, got {}",
            d + 1,
            rows.len()
        )));
    }
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("PCA rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("PCA input contains non-finite values"));
    }
    let n = rows.len();
    let mut means = vec![0.0; d];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - means[j]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut values: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid("PCA input has zero variance"));
    }
    values.iter_mut().for_each(|v| *v /= total);
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// One row of a stability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub controller: String,
    pub terrain: String,
    pub payload_mass: f64,
    pub seed: u64,
    pub jerk: JerkSummary,
    /// cm
    pub vibration_cost: f64,
    pub mean_command: f64,
    /// Jerk reduction vs the reference controller, percent.
    pub improvement: Option<f64>,
}

impl StabilityReport {
    pub fn from_log(controller: &str, log: &RunLog) -> Result<Self> {
        let jerk = mean_jerk(&imu_traces(log), log.dt)?;
        Ok(StabilityReport {
            controller: controller.to_string(),
            terrain: log.terrain.terrain_class.name().to_string(),
            payload_mass: log.payload_mass,
            seed: log.seed,
            jerk,
            vibration_cost: vibration_cost(log)?,
            mean_command: log.steps.iter().map(|s| s.commanded_velocity).sum::<f64>()
                / log.len() as f64,
            improvement: None,
        })
    }
}

pub const STABILITY_CSV_HEADER: &str =
    "controller,terrain,payload_kg,seed,jerk_FR,jerk_FL,jerk_HR,jerk_HL,jerk_C,jerk_mean,cost_cm,mean_command,improvement_pct";

pub fn write_stability_csv(reports: &[StabilityReport], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{STABILITY_CSV_HEADER}")?;
    for r in reports {
        let j = &r.jerk.per_imu;
        writeln!(
            w,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            r.controller,
            r.terrain,
            r.payload_mass,
            r.seed,
            j[0],
            j[1],
            j[2],
            j[3],
            j[4],
            r.jerk.mean,
            r.vibration_cost,
            r.mean_command,
            r.improvement.map(|v| format!("{v:.2}")).unwrap_or_default()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jerk_of_constant_acceleration_is_zero() {
        let s = vec![[1.5, -9.81, 3.0]; 10];
        assert!(jerk_series(&s, 0.01).unwrap().iter().all(|&j| j == 0.0));
        assert_eq!(jerk_series(&s, 0.01).unwrap().len(), 8);
        assert!(jerk_series(&s[..2], 0.01).is_err());
    }

    #[test]
    fn linear_ramps_give_closed_form_jerk() {
        let dt = 0.01;
        let ramp = |kx: f64, ky: f64| -> Vec<[f64; 3]> {
            (0..50)
                .map(|i| [kx * i as f64 * dt, ky * i as f64 * dt, 0.0])
                .collect()
        };
        // forward differences as an independent oracle
        let oracle = |s: &[[f64; 3]]| -> Vec<f64> {
            (1..s.len() - 1)
                .map(|i| {
                    let dx = (s[i + 1][0] - s[i][0]) / dt;
                    let dy = (s[i + 1][1] - s[i][1]) / dt;
                    (dx * dx + dy * dy).sqrt()
                })
                .collect()
        };
        for (kx, ky, expected) in [(3.0, 0.0, 3.0), (3.0, 4.0, 5.0)] {
            let s = ramp(kx, ky);
            let j = jerk_series(&s, dt).unwrap();
            for (a, b) in j.iter().zip(oracle(&s)) {
                assert!((a - expected).abs() < 1e-9 && (a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mean_jerk_averages_over_imus() {
        let dt = 0.01;
        let ramp =
            |k: f64| -> Vec<[f64; 3]> { (0..20).map(|i| [k * i as f64 * dt, 0.0, 0.0]).collect() };
        let traces = vec![ramp(10.0), ramp(10.0), ramp(10.0), ramp(10.0), ramp(60.0)];
        let m = mean_jerk(&traces, dt).unwrap();
        assert!((m.mean - 20.0).abs() < 1e-9);
        assert!(mean_jerk(&traces[..4], dt).is_err());
    }

    #[test]
    fn improvement_matches_table_values() {
        assert!((improvement(546.95, 386.44).unwrap() - 29.35).abs() < 0.005);
        assert!((improvement(836.44, 365.17).unwrap() - 56.34).abs() < 0.005);
        assert_eq!(improvement(5.0, 5.0).unwrap(), 0.0);
        assert!(improvement(0.0, 1.0).is_err());
    }

    #[test]
    fn vibration_cost_cases() {
        assert_eq!(hip_vibration_cost(&[[0.1; 4]; 5], [0.1; 4]).unwrap(), 0.0);
        let c = hip_vibration_cost(&[[0.02; 4]; 7], [0.0; 4]).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        let seq: Vec<[f64; 4]> = (0..30)
            .map(|i| [(i as f64).sin() * 0.01, 0.0, 0.02, -0.01])
            .collect();
        let rev: Vec<[f64; 4]> = seq.iter().rev().cloned().collect();
        assert!(
            (hip_vibration_cost(&seq, [0.0; 4]).unwrap()
                - hip_vibration_cost(&rev, [0.0; 4]).unwrap())
            .abs()
                < 1e-15
        );
    }

    #[test]
    fn pca_rank_one_and_errors() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 2.0]).collect();
        let f = pca_report(&rows).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-12);
        assert!(pca_report(&rows[..3]).is_err());
    }
}

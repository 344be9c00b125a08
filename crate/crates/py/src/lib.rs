//! Python bindings: terrains, rollouts, datasets, the model, training, closed-loop trials
//! and the stability metrics.

use std::path::PathBuf;

use panos_core::control::{
    run_trial_with, Controller, ControllerSpec, TrialSpec, DEFAULT_CONTROL_RATE,
};
use panos_core::dataset::{form_sequences, read_dataset, write_dataset, Sequence, DEFAULT_WINDOW};
use panos_core::metrics::{self, imu_traces};
use panos_core::network::{forward, load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use panos_core::simworld::{
    self, make_terrain, read_runlog, render_observation, write_runlog, TerrainClass, TerrainSpec,
};
use panos_core::training::{fit, TrainConfig};
use panos_core::Error;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Terrain", module = "panos", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyTerrain {
    inner: TerrainSpec,
}

#[pymethods]
impl PyTerrain {
    /// Default terrain of a class (`concrete`, `grass`, `gravel`, `pebble_sidewalk`).
    #[new]
    #[pyo3(signature = (terrain_class, seed = 0))]
    fn new(terrain_class: &str, seed: u64) -> PyResult<Self> {
        let class: TerrainClass = terrain_class.parse().map_err(py_err)?;
        Ok(PyTerrain {
            inner: make_terrain(class, seed),
        })
    }

    #[getter]
    fn terrain_class(&self) -> &'static str {
        self.inner.terrain_class.name()
    }
    #[getter]
    fn friction_coeff(&self) -> f64 {
        self.inner.friction_coeff
    }
    #[getter]
    fn roughness(&self) -> f64 {
        self.inner.roughness
    }
    #[getter]
    fn compliance(&self) -> f64 {
        self.inner.compliance
    }
    #[getter]
    fn visual_seed(&self) -> u64 {
        self.inner.visual_seed
    }

    /// 64x64x3 image as a flat row-major list in [0, 1].
    fn observation(&self, position: f64) -> PyResult<Vec<f32>> {
        if !(position >= 0.0) {
            return Err(PyValueError::new_err("position must be >= 0"));
        }
        Ok(render_observation(&self.inner, position).data)
    }

    fn __repr__(&self) -> String {
        format!(
            "Terrain({}, friction={}, roughness={}, compliance={}, seed={})",
            self.inner.terrain_class,
            self.inner.friction_coeff,
            self.inner.roughness,
            self.inner.compliance,
            self.inner.visual_seed
        )
    }
}

#[pyclass(name = "RunLog", module = "panos", frozen)]
pub struct PyRunLog {
    inner: simworld::RunLog,
}

#[pymethods]
impl PyRunLog {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyRunLog {
            inner: read_runlog(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_runlog(&self.inner, &path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.steps.len()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }
    #[getter]
    fn payload_mass(&self) -> f64 {
        self.inner.payload_mass
    }
    #[getter]
    fn terrain(&self) -> PyTerrain {
        PyTerrain {
            inner: self.inner.terrain,
        }
    }
    #[getter]
    fn commanded_velocity(&self) -> Vec<f64> {
        self.inner
            .steps
            .iter()
            .map(|s| s.commanded_velocity)
            .collect()
    }
    #[getter]
    fn achieved_velocity(&self) -> Vec<f64> {
        self.inner
            .steps
            .iter()
            .map(|s| s.achieved_velocity)
            .collect()
    }
    #[getter]
    fn mean_slip(&self) -> Vec<f64> {
        self.inner
            .steps
            .iter()
            .map(|s| s.proprio.mean_slip())
            .collect()
    }

    /// One 60-value proprio vector per step.
    fn proprio(&self) -> Vec<Vec<f64>> {
        self.inner
            .steps
            .iter()
            .map(|s| s.proprio.to_vec())
            .collect()
    }

    /// Acceleration traces of the five IMUs (FR, FL, HR, HL, C).
    fn imu(&self) -> Vec<Vec<[f64; 3]>> {
        imu_traces(&self.inner)
    }

    /// `(mean, per_imu)` jerk in m/s^3.
    fn mean_jerk(&self) -> PyResult<(f64, [f64; 5])> {
        let j = metrics::mean_jerk(&imu_traces(&self.inner), self.inner.dt).map_err(py_err)?;
        Ok((j.mean, j.per_imu))
    }

    /// Hip vibration cost in cm.
    fn vibration_cost(&self) -> PyResult<f64> {
        metrics::vibration_cost(&self.inner).map_err(py_err)
    }

    #[pyo3(signature = (window = DEFAULT_WINDOW))]
    fn sequences(&self, window: f64) -> PyResult<Vec<PySequence>> {
        Ok(form_sequences(&self.inner, window)
            .map_err(py_err)?
            .into_iter()
            .map(|inner| PySequence { inner })
            .collect())
    }
}

#[pyclass(name = "Sequence", module = "panos", frozen, from_py_object)]
#[derive(Clone)]
pub struct PySequence {
    inner: Sequence,
}

#[pymethods]
impl PySequence {
    #[getter]
    fn v_applied(&self) -> f64 {
        self.inner.v_applied
    }
    #[getter]
    fn mean_slip(&self) -> f64 {
        self.inner.mean_slip
    }
    #[getter]
    fn proprio(&self) -> Vec<f64> {
        self.inner.proprio_f64()
    }
    #[getter]
    fn image(&self) -> Vec<f32> {
        self.inner.image.data.clone()
    }
}

#[pyclass(name = "Model", module = "panos", frozen)]
pub struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    /// Freshly initialised model with default sizes.
    #[new]
    #[pyo3(signature = (seed = 1))]
    fn new(seed: u64) -> PyResult<Self> {
        let inner = ModelParams::new(ModelConfig {
            param_seed: seed,
            ..ModelConfig::default()
        })
        .map_err(py_err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: load_checkpoint(&path, None).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    /// `(v_hat, confidence, attention_weights)` for one sequence.
    fn predict(&self, sequence: &PySequence) -> PyResult<(f64, f64, Vec<f64>)> {
        let t = forward(&sequence.inner, &self.inner).map_err(py_err)?;
        Ok((t.v_hat, t.confidence, t.attention_weights))
    }
}

/// Open-loop rollout. `profile` is a constant speed or a callable `t -> m/s`.
#[pyfunction]
#[pyo3(signature = (terrain, profile, payload_mass, duration, seed))]
fn rollout(
    terrain: &PyTerrain,
    profile: &Bound<'_, PyAny>,
    payload_mass: f64,
    duration: f64,
    seed: u64,
) -> PyResult<PyRunLog> {
    let constant = profile.extract::<f64>().ok();
    let mut failure: Option<PyErr> = None;
    let log = {
        let speed = |t: f64| -> f64 {
            if let Some(v) = constant {
                return v;
            }
            match profile.call1((t,)).and_then(|r| r.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    // Surfaces after the rollout; zero keeps the simulator valid meanwhile.
                    if failure.is_none() {
                        failure = Some(e);
                    }
                    0.0
                }
            }
        };
        let cell = std::cell::RefCell::new(speed);
        simworld::rollout(
            &terrain.inner,
            |t| (cell.borrow_mut())(t),
            payload_mass,
            duration,
            seed,
        )
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PyRunLog {
        inner: log.map_err(py_err)?,
    })
}

#[pyfunction]
fn read_sequences(path: PathBuf) -> PyResult<Vec<PySequence>> {
    Ok(read_dataset(&path)
        .map_err(py_err)?
        .into_iter()
        .map(|inner| PySequence { inner })
        .collect())
}

#[pyfunction]
fn write_sequences(sequences: Vec<PySequence>, path: PathBuf) -> PyResult<()> {
    let seqs: Vec<Sequence> = sequences.into_iter().map(|s| s.inner).collect();
    write_dataset(&seqs, &path).map_err(py_err)
}

/// Trains a model; returns it with the per-epoch `(velocity_loss, slip_loss, alpha, total)` curve.
#[pyfunction]
#[pyo3(signature = (sequences, epochs = 40, batch_size = 32, learning_rate = 1e-3, seed = 1))]
fn train(
    py: Python<'_>,
    sequences: Vec<PySequence>,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<(PyModel, Vec<(f64, f64, f64, f64)>)> {
    let seqs: Vec<Sequence> = sequences.into_iter().map(|s| s.inner).collect();
    let config = TrainConfig {
        epochs,
        batch_size,
        learning_rate,
        seed,
        ..TrainConfig::default()
    };
    let out = py.detach(|| fit(&seqs, &config, None)).map_err(py_err)?;
    let curve = out
        .curve
        .iter()
        .map(|r| {
            (
                r.losses.velocity_loss,
                r.losses.slip_loss,
                r.losses.alpha,
                r.losses.total,
            )
        })
        .collect();
    Ok((PyModel { inner: out.params }, curve))
}

/// Closed-loop trial. `controller` is `"panos"` (needs `model`), `"fixed"` or `"reactive"`.
#[pyfunction]
#[pyo3(signature = (controller, terrain, payload_mass, duration, seed, model = None, fixed_velocity = 2.0, reactive_gain = 0.5, control_rate = DEFAULT_CONTROL_RATE))]
#[allow(clippy::too_many_arguments)]
fn run_trial(
    py: Python<'_>,
    controller: &str,
    terrain: &PyTerrain,
    payload_mass: f64,
    duration: f64,
    seed: u64,
    model: Option<&PyModel>,
    fixed_velocity: f64,
    reactive_gain: f64,
    control_rate: f64,
) -> PyResult<PyRunLog> {
    let (spec, built) = match controller {
        "panos" => {
            let m =
                model.ok_or_else(|| PyValueError::new_err("the panos controller needs `model`"))?;
            (
                ControllerSpec::Panos(PathBuf::from("<in-memory>")),
                Controller::Panos(Box::new(m.inner.clone())),
            )
        }
        "fixed" => {
            let s = ControllerSpec::FixedVelocity(fixed_velocity);
            let b = s.build().map_err(py_err)?;
            (s, b)
        }
        "reactive" => {
            let s = ControllerSpec::ReactiveSlip(reactive_gain);
            let b = s.build().map_err(py_err)?;
            (s, b)
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown controller `{other}`"
            )))
        }
    };
    let trial = TrialSpec {
        controller: spec,
        terrain: terrain.inner,
        payload_mass,
        duration,
        seed,
        control_rate,
    };
    let log = py
        .detach(|| run_trial_with(&built, &trial))
        .map_err(py_err)?;
    Ok(PyRunLog { inner: log })
}

#[pyfunction]
fn jerk_series(samples: Vec<[f64; 3]>, dt: f64) -> PyResult<Vec<f64>> {
    metrics::jerk_series(&samples, dt).map_err(py_err)
}

#[pyfunction]
fn mean_jerk(traces: Vec<Vec<[f64; 3]>>, dt: f64) -> PyResult<(f64, [f64; 5])> {
    let j = metrics::mean_jerk(&traces, dt).map_err(py_err)?;
    Ok((j.mean, j.per_imu))
}

#[pyfunction]
fn improvement(baseline: f64, panos: f64) -> PyResult<f64> {
    metrics::improvement(baseline, panos).map_err(py_err)
}

/// Explained-variance fractions, descending.
#[pyfunction]
fn pca_report(rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    metrics::pca_report(&rows).map_err(py_err)
}

#[pymodule]
fn panos(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTerrain>()?;
    m.add_class::<PyRunLog>()?;
    m.add_class::<PySequence>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(rollout, m)?)?;
    m.add_function(wrap_pyfunction!(read_sequences, m)?)?;
    m.add_function(wrap_pyfunction!(write_sequences, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    m.add_function(wrap_pyfunction!(jerk_series, m)?)?;
    m.add_function(wrap_pyfunction!(mean_jerk, m)?)?;
    m.add_function(wrap_pyfunction!(improvement, m)?)?;
    m.add_function(wrap_pyfunction!(pca_report, m)?)?;
    m.add("PROPRIO_DIM", simworld::PROPRIO_DIM)?;
    Ok(())
}

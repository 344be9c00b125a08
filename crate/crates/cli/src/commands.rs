use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use panos_core::control::{run_trial_with, Controller, TrialSpec};
use panos_core::dataset::{form_sequences, read_dataset, write_dataset, Sequence, DATASET_MAGIC};
use panos_core::metrics::{improvement, pca_report, write_stability_csv, StabilityReport};
use panos_core::network::save_checkpoint;
use panos_core::simworld::{make_terrain, read_runlog, rollout, write_runlog, TerrainClass};
use panos_core::training::{fit, write_curve_csv, EpochRecord, TrainConfig};
use panos_core::{derive_seed, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifest::{ManifestBuilder, RunManifest};
use crate::settings::{CollectSettings, CompareSettings, ControllerKind, EvalSettings};
use crate::svg::BarChart;

pub const DATASET_FILE: &str = "dataset.pnsd";
pub const MODEL_FILE: &str = "model.pnsw";
pub const CURVE_FILE: &str = "curve.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const PCA_FILE: &str = "pca.csv";

fn prepare(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    Ok(())
}

fn payload_tag(p: f64) -> String {
    format!("{p:.1}kg")
}

/// Visual seed for a terrain class under a base seed; shared by every payload.
pub fn terrain_seed(base: u64, class: TerrainClass) -> u64 {
    derive_seed(base, 0x7465_7272 + class as u64)
}

/// Piecewise-constant velocity profile with one uniform draw per segment.
pub fn segment_profile(seed: u64, duration: f64, segment: f64, v_min: f64, v_max: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration / segment).ceil() as usize;
    (0..n)
        .map(|_| {
            if v_max > v_min {
                rng.random_range(v_min..v_max)
            } else {
                v_min
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct CollectOutcome {
    pub dataset: PathBuf,
    pub sequences: Vec<Sequence>,
    pub manifest: RunManifest,
}

pub fn cmd_collect(settings: &CollectSettings, out_dir: &Path) -> Result<CollectOutcome> {
    prepare(out_dir)?;
    let mut seeds = Vec::new();
    let mut sequences = Vec::new();
    let mut runlogs = Vec::new();
    for &class in &settings.terrains {
        let terrain = make_terrain(class, terrain_seed(settings.seed, class));
        for &payload in &settings.payloads {
            for r in 0..settings.rollouts {
                // Same seed for every payload: payload groups share noise and velocity profile.
                let seed = derive_seed(settings.seed, ((class as u64) << 32) | r as u64);
                let segments = segment_profile(
                    derive_seed(seed, 0x7072_6f66),
                    settings.duration,
                    settings.segment,
                    settings.v_min,
                    settings.v_max,
                );
                let segment = settings.segment;
                let profile = |t: f64| segments[((t / segment) as usize).min(segments.len() - 1)];
                let log = rollout(&terrain, profile, payload, settings.duration, seed)?;
                let seqs = form_sequences(&log, settings.window)?;
                log::info!(
                    "collected {} {} rollout {r}: {} sequences",
                    class,
                    payload_tag(payload),
                    seqs.len()
                );
                sequences.extend(seqs);
                seeds.push(seed);
                if settings.write_runlogs {
                    let dir = out_dir.join("runlogs");
                    fs::create_dir_all(&dir)?;
                    let path = dir.join(format!("{}_{}_{r}.jsonl", class, payload_tag(payload)));
                    write_runlog(&log, &path)?;
                    runlogs.push(path);
                }
            }
        }
    }
    let mut manifest = ManifestBuilder::new("collect", settings, seeds, out_dir)?;
    let dataset = out_dir.join(DATASET_FILE);
    write_dataset(&sequences, &dataset)?;
    manifest.output(&dataset)?;
    for path in &runlogs {
        manifest.output(path)?;
        let mut frames = path.as_os_str().to_owned();
        frames.push(".frames.bin");
        manifest.output(Path::new(&frames))?;
    }
    Ok(CollectOutcome {
        dataset,
        sequences,
        manifest: manifest.finish()?,
    })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: PathBuf,
    pub curve: Vec<EpochRecord>,
    pub manifest: RunManifest,
}

pub fn cmd_train(dataset: &Path, config: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    prepare(out_dir)?;
    let sequences = read_dataset(dataset)?;
    log::info!(
        "training on {} sequences from {}",
        sequences.len(),
        dataset.display()
    );
    let outcome = fit(&sequences, config, Some(out_dir))?;
    let mut manifest = ManifestBuilder::new("train", config, vec![config.seed], out_dir)?;
    manifest.input(dataset);
    let model = out_dir.join(MODEL_FILE);
    save_checkpoint(&outcome.params, &model)?;
    let curve_path = out_dir.join(CURVE_FILE);
    write_curve_csv(&outcome.curve, &curve_path)?;
    let mut checkpoints: Vec<PathBuf> = fs::read_dir(out_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("checkpoint_epoch_"))
        })
        .collect();
    checkpoints.sort();
    for p in checkpoints.iter().chain([&model, &curve_path]) {
        manifest.output(p)?;
    }
    Ok(TrainOutcome {
        model,
        curve: outcome.curve,
        manifest: manifest.finish()?,
    })
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub reports: Vec<StabilityReport>,
    pub manifest: RunManifest,
}

/// Runs every cell of the trial matrix in terrain, payload, seed, controller order.
pub fn run_matrix(
    settings: &CompareSettings,
    checkpoint: Option<&Path>,
) -> Result<Vec<StabilityReport>> {
    let mut controllers: Vec<(ControllerKind, Controller)> = Vec::new();
    for &kind in &settings.controllers {
        let spec = settings.controller_spec(kind, checkpoint)?;
        let built = spec.build().map_err(|e| {
            let cell = match (
                settings.terrains.first(),
                settings.payloads.first(),
                settings.seeds.first(),
            ) {
                (Some(t), Some(p), Some(s)) => {
                    format!("{}/{}/{}/seed {s}", spec.name(), t, payload_tag(*p))
                }
                _ => spec.name().to_string(),
            };
            Error::InvalidArgument(format!("cell {cell}: {e}"))
        })?;
        controllers.push((kind, built));
    }
    let mut reports = Vec::new();
    for &class in &settings.terrains {
        let terrain = make_terrain(class, terrain_seed(settings.terrain_seed, class));
        for &payload in &settings.payloads {
            for &seed in &settings.seeds {
                let first = reports.len();
                for (kind, controller) in &controllers {
                    let spec = TrialSpec {
                        controller: settings.controller_spec(*kind, checkpoint)?,
                        terrain,
                        payload_mass: payload,
                        duration: settings.duration,
                        seed,
                        control_rate: settings.control_rate,
                    };
                    let log = run_trial_with(controller, &spec).map_err(|e| {
                        Error::InvalidArgument(format!(
                            "cell {}/{}/{}/seed {seed}: {e}",
                            controller.name(),
                            class,
                            payload_tag(payload)
                        ))
                    })?;
                    let report = StabilityReport::from_log(controller.name(), &log)?;
                    log::info!(
                        "{} {} {} seed {seed}: jerk {:.2} cost {:.3} cm mean v {:.2}",
                        report.controller,
                        class,
                        payload_tag(payload),
                        report.jerk.mean,
                        report.vibration_cost,
                        report.mean_command
                    );
                    reports.push(report);
                }
                let cell = &mut reports[first..];
                if let Some(base) = cell
                    .iter()
                    .find(|r| r.controller == "fixed")
                    .map(|r| r.jerk.mean)
                {
                    for r in cell.iter_mut() {
                        r.improvement = Some(improvement(base, r.jerk.mean)?);
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// Mean of `field` over seeds for each (controller, terrain, payload).
pub fn seed_average(
    reports: &[StabilityReport],
    controller: &str,
    terrain: &str,
    payload: f64,
    field: fn(&StabilityReport) -> f64,
) -> Option<f64> {
    let vals: Vec<f64> = reports
        .iter()
        .filter(|r| r.controller == controller && r.terrain == terrain && r.payload_mass == payload)
        .map(field)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn write_charts(
    settings: &CompareSettings,
    reports: &[StabilityReport],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut groups = Vec::new();
    for &t in &settings.terrains {
        for &p in &settings.payloads {
            groups.push((t.name().to_string(), p));
        }
    }
    let labels: Vec<String> = groups
        .iter()
        .map(|(t, p)| format!("{t} {}", payload_tag(*p)))
        .collect();
    let mut written = Vec::new();
    let charts: [(&str, &str, &str, fn(&StabilityReport) -> f64); 2] = [
        (
            "jerk.svg",
            "Mean jerk by controller",
            "mean jerk (m/s^3)",
            |r| r.jerk.mean,
        ),
        (
            "cost.svg",
            "Vibration cost by controller",
            "vibration cost (cm)",
            |r| r.vibration_cost,
        ),
    ];
    for (file, title, y_label, field) in charts {
        let series = settings
            .controllers
            .iter()
            .map(|k| {
                let name = match k {
                    ControllerKind::Panos => "panos",
                    ControllerKind::Fixed => "fixed",
                    ControllerKind::Reactive => "reactive",
                };
                let values = groups
                    .iter()
                    .map(|(t, p)| seed_average(reports, name, t, *p, field).unwrap_or(0.0))
                    .collect();
                (name.to_string(), values)
            })
            .collect();
        let chart = BarChart {
            title,
            y_label,
            groups: labels.clone(),
            series,
        };
        let path = out_dir.join(file);
        fs::write(&path, chart.render())?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_compare(
    settings: &CompareSettings,
    checkpoint: Option<&Path>,
    out_dir: &Path,
) -> Result<CompareOutcome> {
    prepare(out_dir)?;
    let reports = run_matrix(settings, checkpoint)?;
    let mut manifest = ManifestBuilder::new("compare", settings, settings.seeds.clone(), out_dir)?;
    if let Some(c) = checkpoint.filter(|_| settings.controllers.contains(&ControllerKind::Panos)) {
        manifest.input(c);
    }
    let report_path = out_dir.join(REPORT_FILE);
    write_stability_csv(&reports, &report_path)?;
    manifest.output(&report_path)?;
    for chart in write_charts(settings, &reports, out_dir)? {
        manifest.output(&chart)?;
    }
    Ok(CompareOutcome {
        reports,
        manifest: manifest.finish()?,
    })
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub report: StabilityReport,
    pub manifest: RunManifest,
}

pub fn cmd_eval(
    settings: &EvalSettings,
    checkpoint: Option<&Path>,
    out_dir: &Path,
) -> Result<EvalOutcome> {
    prepare(out_dir)?;
    let cmp = settings.as_compare();
    let spec = TrialSpec {
        controller: cmp.controller_spec(settings.controller, checkpoint)?,
        terrain: make_terrain(
            settings.terrain,
            terrain_seed(settings.terrain_seed, settings.terrain),
        ),
        payload_mass: settings.payload,
        duration: settings.duration,
        seed: settings.seed,
        control_rate: settings.control_rate,
    };
    let controller = spec.controller.build()?;
    let log = run_trial_with(&controller, &spec)?;
    let report = StabilityReport::from_log(controller.name(), &log)?;
    let mut manifest = ManifestBuilder::new("eval", settings, vec![settings.seed], out_dir)?;
    if let Some(c) = checkpoint.filter(|_| settings.controller == ControllerKind::Panos) {
        manifest.input(c);
    }
    let log_path = out_dir.join("runlog.jsonl");
    write_runlog(&log, &log_path)?;
    let report_path = out_dir.join(REPORT_FILE);
    write_stability_csv(std::slice::from_ref(&report), &report_path)?;
    for p in [
        log_path.clone(),
        out_dir.join("runlog.jsonl.frames.bin"),
        report_path,
    ] {
        manifest.output(&p)?;
    }
    Ok(EvalOutcome {
        report,
        manifest: manifest.finish()?,
    })
}

/// Proprio rows of a dataset (window means) or a run log (per step).
pub fn proprio_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut magic = [0u8; 4];
    let is_dataset = fs::File::open(path)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut magic))
        .is_ok()
        && magic == DATASET_MAGIC;
    if is_dataset {
        Ok(read_dataset(path)?
            .iter()
            .map(|s| s.proprio_f64())
            .collect())
    } else {
        Ok(read_runlog(path)?
            .steps
            .iter()
            .map(|s| s.proprio.to_vec())
            .collect())
    }
}

#[derive(Debug)]
pub struct PcaOutcome {
    /// `(group name, explained-variance fractions)` in input order.
    pub groups: Vec<(String, Vec<f64>)>,
    pub manifest: RunManifest,
}

pub fn cmd_pca_report(inputs: &[PathBuf], out_dir: &Path) -> Result<PcaOutcome> {
    if inputs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca-report needs at least 2 groups (one per input file), got {}",
            inputs.len()
        )));
    }
    prepare(out_dir)?;
    let mut groups = Vec::new();
    for (i, path) in inputs.iter().enumerate() {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("group");
        let parent = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
            .unwrap_or("");
        let name = if parent.is_empty() {
            format!("{i}_{stem}")
        } else {
            format!("{parent}/{stem}")
        };
        let fractions = pca_report(&proprio_rows(path)?)?;
        groups.push((name, fractions));
    }
    let names: Vec<String> = groups.iter().map(|g| g.0.clone()).collect();
    let mut manifest = ManifestBuilder::new("pca-report", &names, Vec::new(), out_dir)?;
    for p in inputs {
        manifest.input(p);
    }
    let csv = out_dir.join(PCA_FILE);
    let mut w = std::io::BufWriter::new(fs::File::create(&csv)?);
    writeln!(w, "component,{}", names.join(","))?;
    let n = groups.iter().map(|g| g.1.len()).max().unwrap_or(0);
    for c in 0..n {
        let row: Vec<String> = groups
            .iter()
            .map(|g| g.1.get(c).map(|v| format!("{v:.12}")).unwrap_or_default())
            .collect();
        writeln!(w, "{},{}", c + 1, row.join(","))?;
    }
    w.flush()?;
    drop(w);
    let shown = n.min(10);
    let chart = BarChart {
        title: "Explained variance per principal component",
        y_label: "fraction of variance",
        groups: (1..=shown).map(|c| format!("PC{c}")).collect(),
        series: groups
            .iter()
            .map(|(name, f)| (name.clone(), f[..shown.min(f.len())].to_vec()))
            .collect(),
    };
    let svg = out_dir.join("pca.svg");
    fs::write(&svg, chart.render())?;
    manifest.output(&csv)?;
    manifest.output(&svg)?;
    Ok(PcaOutcome {
        groups,
        manifest: manifest.finish()?,
    })
}

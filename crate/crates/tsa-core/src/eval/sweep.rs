//! Sensitivity sweeps: measurement noise at fixed SNR, and PMU placement /
//! count via channel masking with retraining.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::metrics::evaluate;
use crate::error::{CoreError, Result};
use crate::gridsim::{inject_noise, Dataset};
use crate::hgan::HganModel;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    PmuSubset,
    PmuCount,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::PmuSubset => "pmu_subset",
            SweepAxis::PmuCount => "pmu_count",
        }
    }
}

/// Mean with min/max band over the sweep seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBand {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl AccuracyBand {
    pub fn from_values(values: &[f64]) -> AccuracyBand {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        AccuracyBand { mean, min, max }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub setting: String,
    pub per_level: Vec<AccuracyBand>,
    pub ensemble: AccuracyBand,
    /// A failed point is recorded and the sweep continues.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub seeds: Vec<u64>,
}

fn failed_point(setting: String, levels: usize, message: String) -> SweepPoint {
    let nan = AccuracyBand {
        mean: f64::NAN,
        min: f64::NAN,
        max: f64::NAN,
    };
    SweepPoint {
        setting,
        per_level: vec![nan; levels],
        ensemble: nan,
        error: Some(message),
    }
}

fn bands_from_runs(runs: &[(Vec<f64>, f64)]) -> (Vec<AccuracyBand>, AccuracyBand) {
    let levels = runs[0].0.len();
    let per_level = (0..levels)
        .map(|k| AccuracyBand::from_values(&runs.iter().map(|r| r.0[k]).collect::<Vec<_>>()))
        .collect();
    let ensemble = AccuracyBand::from_values(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    (per_level, ensemble)
}

/// Evaluate a trained model on `split` with white Gaussian noise injected at
/// each SNR setting. `f64::INFINITY` denotes the clean point and reproduces
/// the clean evaluation bit for bit.
pub fn noise_sweep(
    model: &HganModel,
    ds: &Dataset,
    split: &[usize],
    snr_list: &[f64],
    seeds: &[u64],
) -> Result<SweepReport> {
    if seeds.is_empty() {
        return Err(CoreError::Config("noise sweep needs at least one seed".into()));
    }
    let mut points = Vec::with_capacity(snr_list.len());
    for &snr in snr_list {
        let mut runs = Vec::with_capacity(seeds.len());
        let mut error = None;
        for &sweep_seed in seeds {
            let mut noisy = ds.clone();
            for &i in split {
                let sample_seed = seed::derive_indexed(sweep_seed, "noise-sample", i as u64);
                noisy.samples[i].voltages = inject_noise(&ds.samples[i].voltages, snr, sample_seed);
            }
            match evaluate(model, &noisy, split) {
                Ok(result) => runs.push((
                    result.per_level.iter().map(|c| c.accuracy()).collect::<Vec<_>>(),
                    result.ensemble.accuracy(),
                )),
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        points.push(match error {
            Some(message) => failed_point(format!("{snr}"), model.level_count(), message),
            None => {
                let (per_level, ensemble) = bands_from_runs(&runs);
                SweepPoint {
                    setting: format!("{snr}"),
                    per_level,
                    ensemble,
                    error: None,
                }
            }
        });
    }
    Ok(SweepReport {
        axis: SweepAxis::SnrDb,
        points,
        seeds: seeds.to_vec(),
    })
}

/// Restrict a dataset to a subset of its channels (0-based indices).
pub fn mask_channels(ds: &Dataset, channels: &[usize]) -> Result<Dataset> {
    let width = ds.channels();
    if channels.is_empty() {
        return Err(CoreError::Config("channel subset is empty".into()));
    }
    for &c in channels {
        if c >= width {
            return Err(CoreError::Config(format!(
                "channel index {c} out of range for {width} channels"
            )));
        }
    }
    let mut masked = ds.clone();
    for s in &mut masked.samples {
        s.voltages = s.voltages.select(Axis(1), channels);
    }
    masked.pmu_buses = channels.iter().map(|&c| ds.pmu_buses[c]).collect();
    masked.normalization = None;
    Ok(masked)
}

/// Retrain per channel subset and evaluate on the held-out split. Failures
/// of individual points are recorded, not fatal.
pub fn placement_sweep(
    factory: &mut dyn FnMut(&Dataset, u64) -> Result<HganModel>,
    ds: &Dataset,
    subsets: &[Vec<usize>],
    seeds: &[u64],
    axis: SweepAxis,
) -> Result<SweepReport> {
    if seeds.is_empty() {
        return Err(CoreError::Config("placement sweep needs at least one seed".into()));
    }
    let mut points = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let masked = mask_channels(ds, subset)?;
        let setting = masked
            .pmu_buses
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join("+");
        let mut runs = Vec::with_capacity(seeds.len());
        let mut error = None;
        let mut levels = 0;
        for &train_seed in seeds {
            match factory(&masked, train_seed).and_then(|model| {
                levels = model.level_count();
                evaluate(&model, &masked, &masked.test_idx)
            }) {
                Ok(result) => runs.push((
                    result.per_level.iter().map(|c| c.accuracy()).collect::<Vec<_>>(),
                    result.ensemble.accuracy(),
                )),
                Err(e) => {
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        points.push(match error {
            Some(message) => failed_point(setting, levels.max(1), message),
            None => {
                let (per_level, ensemble) = bands_from_runs(&runs);
                SweepPoint {
                    setting,
                    per_level,
                    ensemble,
                    error: None,
                }
            }
        });
    }
    Ok(SweepReport {
        axis,
        points,
        seeds: seeds.to_vec(),
    })
}

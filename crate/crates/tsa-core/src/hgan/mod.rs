//! The stacked hierarchy: sequential training with frozen lower levels,
//! autoregressive rollout from one measured sample, and the ensemble
//! stability verdict.

pub mod bundle;
pub mod train;

pub use bundle::{load_bundle, save_bundle};
pub use train::{train_hgan, train_hgan_with, EpisodeRecord, LevelLog};

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gan::GanLevel;
use crate::gridsim::Dataset;

/// Training hyperparameters. The defaults are the reference operating
/// point: 3 levels, 2 GRU layers of 30 units, batch 128, learning rates
/// 1e-3 (generator) and 1e-4 (discriminator), at most 20000 episodes.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HganConfig {
    pub levels: usize,
    pub hidden: usize,
    pub gru_layers: usize,
    pub episodes: usize,
    pub batch: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub clip_norm: Option<f64>,
    pub non_saturating: bool,
    /// Stop a level early when the windowed cross-entropy mean moves by
    /// less than `convergence_rel` relative between consecutive windows.
    pub convergence_window: usize,
    pub convergence_rel: f64,
    pub ensemble_policy: EnsemblePolicy,
}

impl Default for HganConfig {
    fn default() -> Self {
        HganConfig {
            levels: 3,
            hidden: 30,
            gru_layers: 2,
            episodes: 20000,
            batch: 128,
            lr_g: 1e-3,
            lr_d: 1e-4,
            clip_norm: Some(5.0),
            non_saturating: false,
            convergence_window: 200,
            convergence_rel: 1e-4,
            ensemble_policy: EnsemblePolicy::Majority,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsemblePolicy {
    /// Stable iff strictly more than half of the levels vote stable;
    /// ties resolve to unstable.
    Majority,
    /// Stable iff the mean of the per-level probabilities exceeds 0.5.
    AverageProbability,
}

/// Per-channel min-max scaling fitted on the training split only.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Channels with max = min; these map to 0.5.
    pub constant_channels: Vec<usize>,
}

impl Normalization {
    pub fn fit(ds: &Dataset, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(CoreError::NotReady("cannot fit normalization on an empty split".into()));
        }
        let channels = ds.channels();
        let mut min = vec![f64::INFINITY; channels];
        let mut max = vec![f64::NEG_INFINITY; channels];
        for &i in indices {
            for row in ds.samples[i].voltages.rows() {
                for (c, &v) in row.iter().enumerate() {
                    min[c] = min[c].min(v);
                    max[c] = max[c].max(v);
                }
            }
        }
        let constant_channels = (0..channels).filter(|&c| max[c] == min[c]).collect();
        Ok(Normalization {
            min,
            max,
            constant_channels,
        })
    }

    pub fn channels(&self) -> usize {
        self.min.len()
    }

    pub fn apply_value(&self, c: usize, v: f64) -> f64 {
        let span = self.max[c] - self.min[c];
        if span == 0.0 {
            0.5
        } else {
            (v - self.min[c]) / span
        }
    }

    pub fn invert_value(&self, c: usize, v: f64) -> f64 {
        let span = self.max[c] - self.min[c];
        if span == 0.0 {
            self.min[c]
        } else {
            self.min[c] + v * span
        }
    }

    pub fn apply_row(&self, row: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_shape_fn(row.len(), |c| self.apply_value(c, row[c]))
    }

    pub fn apply_matrix(&self, m: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn(m.raw_dim(), |(r, c)| self.apply_value(c, m[[r, c]]))
    }
}

/// Ensemble verdict for one measured sample.
#[derive(Debug, Clone)]
pub struct TsaVerdict {
    pub per_level_probabilities: Vec<f64>,
    pub per_level_votes: Vec<u8>,
    /// 1 = stable, 0 = unstable.
    pub final_label: u8,
    /// Mean of the per-level probabilities, reported as a diagnostic.
    pub mean_probability: f64,
    /// Normalized rollout; row 0 is the measured input, rows 1..=N predicted.
    pub predicted_sequence: Array2<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct HganModel {
    pub levels: Vec<GanLevel>,
    pub normalization: Normalization,
    pub config: HganConfig,
    pub seed: u64,
}

impl HganModel {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn channels(&self) -> usize {
        self.normalization.channels()
    }

    fn check_ready(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(CoreError::NotReady("model has no trained levels".into()));
        }
        Ok(())
    }

    /// Autoregressive rollout: the measured (already normalized) sample
    /// followed by `depth` predicted rows, each level conditioned on all
    /// prior rows.
    pub fn roll_forward(&self, x_measured_norm: ArrayView1<f64>, depth: usize) -> Result<Array2<f64>> {
        self.check_ready()?;
        if depth > self.levels.len() {
            return Err(CoreError::DepthRange {
                depth,
                levels: self.levels.len(),
            });
        }
        if x_measured_norm.len() != self.channels() {
            return Err(CoreError::shape(
                "roll_forward",
                format!(
                    "measured sample has {} channels, model expects {}",
                    x_measured_norm.len(),
                    self.channels()
                ),
            ));
        }
        let mut rows = Array2::zeros((depth + 1, self.channels()));
        rows.row_mut(0).assign(&x_measured_norm);
        for k in 1..=depth {
            let out = self.levels[k - 1]
                .generator
                .forward(rows.slice(ndarray::s![..k, ..]))?;
            rows.row_mut(k).assign(&out.x_hat);
        }
        Ok(rows)
    }

    /// Full assessment of one raw (per-unit) measured sample: normalize,
    /// roll through every level, vote, and apply the ensemble policy.
    pub fn assess(&self, x_measured_raw: ArrayView1<f64>) -> Result<TsaVerdict> {
        self.check_ready()?;
        if x_measured_raw.len() != self.channels() {
            return Err(CoreError::shape(
                "assess",
                format!(
                    "measured sample has {} channels, model expects {}",
                    x_measured_raw.len(),
                    self.channels()
                ),
            ));
        }
        let started = Instant::now();
        let n = self.levels.len();
        let x0 = self.normalization.apply_row(x_measured_raw);

        let mut rows = Array2::zeros((n + 1, self.channels()));
        rows.row_mut(0).assign(&x0);
        let mut probs = Vec::with_capacity(n);
        let mut votes = Vec::with_capacity(n);
        for k in 1..=n {
            let out = self.levels[k - 1]
                .generator
                .forward(rows.slice(ndarray::s![..k, ..]))?;
            rows.row_mut(k).assign(&out.x_hat);
            votes.push(u8::from(out.p_stable > 0.5));
            probs.push(out.p_stable);
        }

        let stable_votes = votes.iter().filter(|&&v| v == 1).count();
        let mean_probability = probs.iter().sum::<f64>() / n as f64;
        let final_label = match self.config.ensemble_policy {
            EnsemblePolicy::Majority => u8::from(2 * stable_votes > n),
            EnsemblePolicy::AverageProbability => u8::from(mean_probability > 0.5),
        };

        Ok(TsaVerdict {
            per_level_probabilities: probs,
            per_level_votes: votes,
            final_label,
            mean_probability,
            predicted_sequence: rows,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        })
    }
}

/// The majority rule in isolation: stable iff strictly more than half of
/// the votes are stable (ties resolve to unstable).
pub fn majority_label(votes: &[u8]) -> u8 {
    let stable = votes.iter().filter(|&&v| v == 1).count();
    u8::from(2 * stable > votes.len())
}

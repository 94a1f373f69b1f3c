//! Sequential training of the hierarchy: level k trains on conditions
//! rolled through the already-frozen levels 1..k−1, never on ground-truth
//! history.

use ndarray::{Array1, Array2};

use super::{HganConfig, HganModel, Normalization};
use crate::error::{CoreError, Result};
use crate::gan::{train_level_step, GanLevel, LevelBatch, StepMetrics, TrainOptions};
use crate::gridsim::Dataset;
use crate::seed;

#[derive(Debug, Clone, Copy)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub metrics: StepMetrics,
}

pub type LevelLog = Vec<EpisodeRecord>;

/// Windowed-mean convergence test on the cross-entropy history.
fn converged(history: &[f64], window: usize, rel: f64) -> bool {
    if history.len() < 2 * window {
        return false;
    }
    let recent: f64 = history[history.len() - window..].iter().sum::<f64>() / window as f64;
    let previous: f64 = history[history.len() - 2 * window..history.len() - window]
        .iter()
        .sum::<f64>()
        / window as f64;
    (recent - previous).abs() < rel * previous.abs().max(1e-12)
}

/// Train all levels; `on_level_complete` runs after each level finishes
/// (checkpoint hook), so earlier levels survive a later divergence.
pub fn train_hgan_with(
    ds: &Dataset,
    config: &HganConfig,
    root_seed: u64,
    mut on_level_complete: impl FnMut(&HganModel, &GanLevel, &LevelLog) -> Result<()>,
) -> Result<(HganModel, Vec<LevelLog>)> {
    if ds.train_idx.is_empty() {
        return Err(CoreError::NotReady("dataset has no training split".into()));
    }
    if config.levels == 0 {
        return Err(CoreError::Config("levels must be at least 1".into()));
    }
    let channels = ds.channels();
    for &i in ds.train_idx.iter().chain(ds.test_idx.iter()) {
        let s = &ds.samples[i];
        if s.post_rows() < config.levels + 1 {
            return Err(CoreError::Config(format!(
                "sample `{}` has only {} post-clearing rows, need {}",
                s.scenario_id,
                s.post_rows(),
                config.levels + 1
            )));
        }
    }

    let normalization = Normalization::fit(ds, &ds.train_idx)?;

    // normalized learning windows, rows t..t+N per training sample
    let windows: Vec<Array2<f64>> = ds
        .train_idx
        .iter()
        .map(|&i| {
            let s = &ds.samples[i];
            let m = s
                .voltages
                .slice(ndarray::s![s.measured_row..s.measured_row + config.levels + 1, ..]);
            normalization.apply_matrix(m)
        })
        .collect();
    let labels: Vec<u8> = ds.train_idx.iter().map(|&i| ds.samples[i].label).collect();
    let n_train = windows.len();

    // rollouts grow one row per trained level; row 0 is the measured sample
    let mut rollouts: Vec<Array2<f64>> = windows
        .iter()
        .map(|w| w.slice(ndarray::s![..1, ..]).to_owned())
        .collect();

    let mut model = HganModel {
        levels: Vec::with_capacity(config.levels),
        normalization,
        config: config.clone(),
        seed: root_seed,
    };
    let mut logs = Vec::with_capacity(config.levels);

    let opts = TrainOptions {
        lr_g: config.lr_g,
        lr_d: config.lr_d,
        clip_norm: config.clip_norm,
        non_saturating: config.non_saturating,
    };

    for k in 1..=config.levels {
        let mut init_rng = seed::rng_indexed(root_seed, "level-init", k as u64);
        let mut level = GanLevel::init(k, channels, config.hidden, config.gru_layers, &mut init_rng);
        let mut batch_rng = seed::rng_indexed(root_seed, "level-batch", k as u64);

        let mut log: LevelLog = Vec::new();
        let mut ce_history: Vec<f64> = Vec::new();
        let batch_size = config.batch.min(n_train);

        for episode in 0..config.episodes {
            let picks = rand::seq::index::sample(&mut batch_rng, n_train, batch_size);
            let mut batch = LevelBatch {
                conditions: Vec::with_capacity(batch_size),
                targets: Vec::with_capacity(batch_size),
                labels: Vec::with_capacity(batch_size),
            };
            for idx in picks.iter() {
                batch.conditions.push(rollouts[idx].clone());
                batch.targets.push(windows[idx].row(k).to_owned());
                batch.labels.push(labels[idx]);
            }
            let metrics = train_level_step(&mut level, &batch, &opts).map_err(|e| match e {
                CoreError::Diverged { level, what, .. } => {
                    let last = log
                        .last()
                        .map(|r| format!("; last good metrics at episode {}: {:?}", r.episode, r.metrics))
                        .unwrap_or_default();
                    CoreError::Diverged {
                        level,
                        episode,
                        what: format!("{what}{last}"),
                    }
                }
                other => other,
            })?;
            ce_history.push(metrics.cross_entropy);
            log.push(EpisodeRecord { episode, metrics });
            if converged(&ce_history, config.convergence_window, config.convergence_rel) {
                break;
            }
        }

        // extend every rollout through the newly frozen level
        for roll in rollouts.iter_mut() {
            let out = level.generator.forward(roll.view())?;
            let mut grown = Array2::zeros((roll.nrows() + 1, channels));
            grown.slice_mut(ndarray::s![..roll.nrows(), ..]).assign(roll);
            grown.row_mut(roll.nrows()).assign(&out.x_hat);
            *roll = grown;
        }

        on_level_complete(&model, &level, &log)?;
        model.levels.push(level);
        logs.push(log);
    }

    Ok((model, logs))
}

pub fn train_hgan(ds: &Dataset, config: &HganConfig, root_seed: u64) -> Result<(HganModel, Vec<LevelLog>)> {
    train_hgan_with(ds, config, root_seed, |_, _, _| Ok(()))
}

/// Normalized condition rows for a held-out sample, rolled through the
/// frozen hierarchy exactly as at deployment.
pub fn measured_row_normalized(model: &HganModel, ds: &Dataset, sample_idx: usize) -> Array1<f64> {
    let s = &ds.samples[sample_idx];
    model
        .normalization
        .apply_row(s.voltages.row(s.measured_row))
}

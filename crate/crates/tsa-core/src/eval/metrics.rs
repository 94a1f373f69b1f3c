//! Confusion-matrix accounting over a dataset split.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::gridsim::Dataset;
use crate::hgan::HganModel;

/// Binary confusion matrix with "stable" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (1, 1) => self.true_positive += 1,
            (0, 0) => self.true_negative += 1,
            (0, 1) => self.false_positive += 1,
            _ => self.false_negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.true_negative + self.false_positive + self.false_negative
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.true_positive + self.true_negative) as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub per_level: Vec<ConfusionMatrix>,
    pub ensemble: ConfusionMatrix,
    pub mean_assess_seconds: f64,
    /// Mean assessment wall time plus one PMU sampling interval, expressed
    /// in cycles at nominal frequency.
    pub response_cycles: f64,
}

/// Run the full assessment on every sample of `split` and tabulate per-level
/// and ensemble confusion matrices.
pub fn evaluate(model: &HganModel, ds: &Dataset, split: &[usize]) -> Result<EvalResult> {
    if split.is_empty() {
        return Err(CoreError::NotReady("evaluation split is empty".into()));
    }
    let n_levels = model.level_count();
    let mut per_level = vec![ConfusionMatrix::default(); n_levels];
    let mut ensemble = ConfusionMatrix::default();
    let mut elapsed = 0.0;
    for &i in split {
        let s = &ds.samples[i];
        let verdict = model.assess(s.voltages.row(s.measured_row))?;
        for (k, &vote) in verdict.per_level_votes.iter().enumerate() {
            per_level[k].record(s.label, vote);
        }
        ensemble.record(s.label, verdict.final_label);
        elapsed += verdict.elapsed_seconds;
    }
    let mean_assess_seconds = elapsed / split.len() as f64;
    let response_cycles = (mean_assess_seconds + 1.0 / ds.sample_rate) * ds.f_nominal_hz;
    Ok(EvalResult {
        per_level,
        ensemble,
        mean_assess_seconds,
        response_cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::GanLevel;
    use crate::hgan::{HganConfig, Normalization};
    use crate::test_support::synthetic_dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    /// Model rigged so every level answers "stable" (or "unstable").
    fn rigged_model(levels: usize, channels: usize, always_stable: bool) -> HganModel {
        let mut model = HganModel {
            levels: (1..=levels).map(|k| GanLevel::zeros(k, channels, 4, 2)).collect(),
            normalization: Normalization {
                min: vec![0.0; channels],
                max: vec![1.0; channels],
                constant_channels: vec![],
            },
            config: HganConfig::default(),
            seed: 0,
        };
        let sign = if always_stable { 1.0 } else { -1.0 };
        for level in &mut model.levels {
            level.generator.head_label.bias[0] = -10.0 * sign;
            level.generator.head_label.bias[1] = 10.0 * sign;
        }
        model
    }

    #[test]
    fn always_stable_model_is_perfect_on_all_stable_split() {
        let ds = synthetic_dataset(12, 2, 4, |_| 1);
        let model = rigged_model(3, 2, true);
        let all: Vec<usize> = (0..ds.samples.len()).collect();
        let result = evaluate(&model, &ds, &all).unwrap();
        assert_eq!(result.ensemble.accuracy(), 1.0);
        assert_eq!(result.ensemble.false_positive, 0);
        assert_eq!(result.ensemble.false_negative, 0);
        for cm in &result.per_level {
            assert_eq!(cm.accuracy(), 1.0);
        }
    }

    #[test]
    fn always_stable_model_scores_half_on_balanced_split() {
        let ds = synthetic_dataset(20, 2, 4, |i| (i % 2 == 0) as u8);
        let model = rigged_model(3, 2, true);
        let all: Vec<usize> = (0..ds.samples.len()).collect();
        let result = evaluate(&model, &ds, &all).unwrap();
        assert_eq!(result.ensemble.accuracy(), 0.5);
        assert_eq!(result.ensemble.total(), 20);
    }

    #[test]
    fn confusion_entries_match_naive_recount() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let truths: Vec<u8> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        let preds: Vec<u8> = (0..200).map(|_| rng.gen_range(0..2)).collect();
        let mut cm = ConfusionMatrix::default();
        for (&t, &p) in truths.iter().zip(&preds) {
            cm.record(t, p);
        }
        // naive per-pair recount
        let mut tp = 0;
        let mut tn = 0;
        let mut fp = 0;
        let mut fnn = 0;
        for i in 0..200 {
            match (truths[i], preds[i]) {
                (1, 1) => tp += 1,
                (0, 0) => tn += 1,
                (0, 1) => fp += 1,
                _ => fnn += 1,
            }
        }
        assert_eq!(cm.true_positive, tp);
        assert_eq!(cm.true_negative, tn);
        assert_eq!(cm.false_positive, fp);
        assert_eq!(cm.false_negative, fnn);
        assert_eq!(cm.total(), 200);
        // accuracy two ways agrees exactly
        let direct = truths
            .iter()
            .zip(&preds)
            .filter(|(t, p)| t == p)
            .count() as f64
            / 200.0;
        assert_eq!(cm.accuracy(), direct);
    }

    #[test]
    fn empty_split_is_rejected() {
        let ds = synthetic_dataset(4, 2, 4, |_| 1);
        let model = rigged_model(2, 2, true);
        assert!(evaluate(&model, &ds, &[]).is_err());
    }
}

//! One adversarial training step for a hierarchy level: a discriminator
//! update on (real, predicted) pairs, then a generator update through the
//! frozen discriminator.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use super::losses::{adversarial_grad, adversarial_term, discriminator_loss};
use super::nets::{DiscGrads, DiscriminatorNet, GenGrads, GeneratorNet};
use crate::error::{CoreError, Result};
use crate::nn::loss::{bce_loss, mse_loss, PROB_EPS};
use crate::nn::tensor_file::TensorData;

/// Generator/discriminator pair for hierarchy level `index` (1-based): the
/// generator consumes `index` conditioning rows and predicts row `index`.
#[derive(Debug, Clone)]
pub struct GanLevel {
    pub index: usize,
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
}

impl GanLevel {
    pub fn init(
        index: usize,
        channels: usize,
        hidden: usize,
        gru_layers: usize,
        rng: &mut impl Rng,
    ) -> Self {
        GanLevel {
            index,
            generator: GeneratorNet::init(channels, hidden, gru_layers, rng),
            discriminator: DiscriminatorNet::init(channels, hidden, gru_layers, rng),
        }
    }

    pub fn zeros(index: usize, channels: usize, hidden: usize, gru_layers: usize) -> Self {
        GanLevel {
            index,
            generator: GeneratorNet::zeros(channels, hidden, gru_layers),
            discriminator: DiscriminatorNet::zeros(channels, hidden, gru_layers),
        }
    }

    pub fn channels(&self) -> usize {
        self.generator.channels()
    }

    pub fn to_tensors(&self) -> Vec<(String, TensorData)> {
        let mut out = self.generator.to_tensors("gen");
        out.extend(self.discriminator.to_tensors("disc"));
        out
    }

    pub fn from_tensors(
        index: usize,
        channels: usize,
        hidden: usize,
        gru_layers: usize,
        mut entries: Vec<(String, TensorData)>,
        origin: &str,
    ) -> Result<Self> {
        let generator =
            GeneratorNet::from_tensors(channels, hidden, gru_layers, &mut entries, "gen", origin)?;
        let discriminator =
            DiscriminatorNet::from_tensors(channels, hidden, gru_layers, &mut entries, "disc", origin)?;
        if !entries.is_empty() {
            return Err(CoreError::Format(format!(
                "{origin}: {} unexpected tensors (first: `{}`)",
                entries.len(),
                entries[0].0
            )));
        }
        Ok(GanLevel {
            index,
            generator,
            discriminator,
        })
    }
}

/// Mini-batch for one level: per item the conditioning sequence (level-index
/// rows), the real next sample, and the stability label.
#[derive(Debug, Clone)]
pub struct LevelBatch {
    pub conditions: Vec<Array2<f64>>,
    pub targets: Vec<Array1<f64>>,
    pub labels: Vec<u8>,
}

impl LevelBatch {
    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    fn validate(&self, level: &GanLevel) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(CoreError::shape("train_level_step", "empty batch".to_string()));
        }
        if self.targets.len() != self.conditions.len() || self.labels.len() != self.conditions.len() {
            return Err(CoreError::shape(
                "train_level_step",
                format!(
                    "batch fields disagree: {} conditions, {} targets, {} labels",
                    self.conditions.len(),
                    self.targets.len(),
                    self.labels.len()
                ),
            ));
        }
        let ch = level.channels();
        for (i, cond) in self.conditions.iter().enumerate() {
            if cond.nrows() != level.index {
                return Err(CoreError::shape(
                    "train_level_step",
                    format!(
                        "item {i}: condition has {} rows, level {} expects {}",
                        cond.nrows(),
                        level.index,
                        level.index
                    ),
                ));
            }
            if cond.ncols() != ch || self.targets[i].len() != ch {
                return Err(CoreError::shape(
                    "train_level_step",
                    format!("item {i}: channel width differs from network width {ch}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub lr_g: f64,
    pub lr_d: f64,
    pub clip_norm: Option<f64>,
    /// Replace ln(1−D(x̂)) with −ln D(x̂) in the generator objective.
    pub non_saturating: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lr_g: 1e-3,
            lr_d: 1e-4,
            clip_norm: Some(5.0),
            non_saturating: false,
        }
    }
}

/// Batch-mean loss components of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepMetrics {
    pub cross_entropy: f64,
    pub squared_error: f64,
    pub adversarial: f64,
    pub d_loss: f64,
    pub d_real: f64,
    pub d_fake: f64,
    /// Fraction of the batch where (p_stable > 0.5) matches the label.
    pub accuracy: f64,
}

impl StepMetrics {
    pub fn is_finite(&self) -> bool {
        self.cross_entropy.is_finite()
            && self.squared_error.is_finite()
            && self.adversarial.is_finite()
            && self.d_loss.is_finite()
            && self.d_real.is_finite()
            && self.d_fake.is_finite()
    }
}

fn append_row(condition: ArrayView2<f64>, row: &Array1<f64>) -> Array2<f64> {
    let k = condition.nrows();
    let ch = condition.ncols();
    let mut seq = Array2::zeros((k + 1, ch));
    seq.slice_mut(ndarray::s![..k, ..]).assign(&condition);
    seq.row_mut(k).assign(row);
    seq
}

/// One discriminator update on (real, fake) pairs, then one generator update
/// through the frozen discriminator. Deterministic given the batch order.
pub fn train_level_step(
    level: &mut GanLevel,
    batch: &LevelBatch,
    opts: &TrainOptions,
) -> Result<StepMetrics> {
    batch.validate(level)?;
    let n = batch.len() as f64;

    // generator pass, cached for the generator update below
    let mut outs = Vec::with_capacity(batch.len());
    for cond in &batch.conditions {
        outs.push(level.generator.forward(cond.view())?);
    }

    // --- discriminator update ---------------------------------------------
    let mut d_grads = DiscGrads::zeros_like(&level.discriminator);
    let mut d_real_sum = 0.0;
    let mut d_fake_sum = 0.0;
    let mut d_loss_sum = 0.0;
    for (i, out) in outs.iter().enumerate() {
        let seq_real = append_row(batch.conditions[i].view(), &batch.targets[i]);
        let seq_fake = append_row(batch.conditions[i].view(), &out.x_hat);
        let real = level.discriminator.forward(seq_real.view())?;
        let fake = level.discriminator.forward(seq_fake.view())?;
        d_loss_sum += discriminator_loss(real.p_real, fake.p_real);
        d_real_sum += real.p_real;
        d_fake_sum += fake.p_real;
        // d/dp of −[ln p_real + ln(1 − p_fake)]
        let g_real = -1.0 / real.p_real.max(PROB_EPS);
        let g_fake = 1.0 / (1.0 - fake.p_real).max(PROB_EPS);
        let (gr, _) = level.discriminator.backward(&real.tape, g_real)?;
        let (gf, _) = level.discriminator.backward(&fake.tape, g_fake)?;
        d_grads.add(&gr);
        d_grads.add(&gf);
    }
    d_grads.scale(1.0 / n);
    level.discriminator.apply_update(&d_grads, opts.lr_d, opts.clip_norm);

    // --- generator update through the frozen discriminator -----------------
    let mut g_grads = GenGrads::zeros_like(&level.generator);
    let mut adv_sum = 0.0;
    let mut mse_sum = 0.0;
    let mut ce_sum = 0.0;
    let mut hits = 0usize;
    for (i, out) in outs.iter().enumerate() {
        let seq_fake = append_row(batch.conditions[i].view(), &out.x_hat);
        let fake = level.discriminator.forward(seq_fake.view())?;
        adv_sum += adversarial_term(fake.p_real, opts.non_saturating);
        let (_, d_inputs) =
            level
                .discriminator
                .backward(&fake.tape, adversarial_grad(fake.p_real, opts.non_saturating))?;
        let d_xhat_adv = d_inputs.last().expect("sequence is nonempty");

        let (mse, mse_grad) = mse_loss(&out.x_hat, &batch.targets[i])?;
        mse_sum += mse;
        let y = batch.labels[i];
        let (ce, ce_grad) = bce_loss(out.p_stable, f64::from(y));
        ce_sum += ce;
        if (out.p_stable > 0.5) == (y == 1) {
            hits += 1;
        }

        let d_xhat = d_xhat_adv + &mse_grad;
        let d_label = Array1::from(vec![0.0, ce_grad]);
        let g = level.generator.backward(&out.tape, &d_xhat, &d_label)?;
        g_grads.add(&g);
    }
    g_grads.scale(1.0 / n);
    level.generator.apply_update(&g_grads, opts.lr_g, opts.clip_norm);

    let metrics = StepMetrics {
        cross_entropy: ce_sum / n,
        squared_error: mse_sum / n,
        adversarial: adv_sum / n,
        d_loss: d_loss_sum / n,
        d_real: d_real_sum / n,
        d_fake: d_fake_sum / n,
        accuracy: hits as f64 / n,
    };
    if !metrics.is_finite() {
        return Err(CoreError::Diverged {
            level: level.index,
            episode: 0,
            what: format!("non-finite loss: {metrics:?}"),
        });
    }
    Ok(metrics)
}

#[derive(Debug, Clone, Copy)]
pub struct VanillaMetrics {
    pub d_loss: f64,
    pub adversarial: f64,
    pub d_real: f64,
    pub d_fake: f64,
}

/// Classic noise-driven step: the generator maps a noise row to a sample
/// and only the adversarial objective trains it. Used to exercise the plain
/// minimax game in isolation.
pub fn train_vanilla_step(
    level: &mut GanLevel,
    noise_rows: &[Array1<f64>],
    real_rows: &[Array1<f64>],
    opts: &TrainOptions,
) -> Result<VanillaMetrics> {
    if noise_rows.is_empty() || noise_rows.len() != real_rows.len() {
        return Err(CoreError::shape(
            "train_vanilla_step",
            format!("{} noise rows vs {} real rows", noise_rows.len(), real_rows.len()),
        ));
    }
    let n = noise_rows.len() as f64;
    let as_seq = |row: &Array1<f64>| {
        Array2::from_shape_vec((1, row.len()), row.to_vec()).expect("row reshape")
    };

    let mut outs = Vec::with_capacity(noise_rows.len());
    for z in noise_rows {
        outs.push(level.generator.forward(as_seq(z).view())?);
    }

    let mut d_grads = DiscGrads::zeros_like(&level.discriminator);
    let mut d_real_sum = 0.0;
    let mut d_fake_sum = 0.0;
    let mut d_loss_sum = 0.0;
    for (out, real_row) in outs.iter().zip(real_rows) {
        let real = level.discriminator.forward(as_seq(real_row).view())?;
        let fake = level.discriminator.forward(as_seq(&out.x_hat).view())?;
        d_loss_sum += discriminator_loss(real.p_real, fake.p_real);
        d_real_sum += real.p_real;
        d_fake_sum += fake.p_real;
        let (gr, _) = level
            .discriminator
            .backward(&real.tape, -1.0 / real.p_real.max(PROB_EPS))?;
        let (gf, _) = level
            .discriminator
            .backward(&fake.tape, 1.0 / (1.0 - fake.p_real).max(PROB_EPS))?;
        d_grads.add(&gr);
        d_grads.add(&gf);
    }
    d_grads.scale(1.0 / n);
    level.discriminator.apply_update(&d_grads, opts.lr_d, opts.clip_norm);

    let mut g_grads = GenGrads::zeros_like(&level.generator);
    let mut adv_sum = 0.0;
    for out in &outs {
        let fake = level.discriminator.forward(as_seq(&out.x_hat).view())?;
        adv_sum += adversarial_term(fake.p_real, opts.non_saturating);
        let (_, d_inputs) =
            level
                .discriminator
                .backward(&fake.tape, adversarial_grad(fake.p_real, opts.non_saturating))?;
        let d_label = Array1::zeros(2);
        let g = level
            .generator
            .backward(&out.tape, d_inputs.last().unwrap(), &d_label)?;
        g_grads.add(&g);
    }
    g_grads.scale(1.0 / n);
    level.generator.apply_update(&g_grads, opts.lr_g, opts.clip_norm);

    Ok(VanillaMetrics {
        d_loss: d_loss_sum / n,
        adversarial: adv_sum / n,
        d_real: d_real_sum / n,
        d_fake: d_fake_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn toy_batch() -> LevelBatch {
        LevelBatch {
            conditions: vec![array![[0.5]]; 8],
            targets: vec![array![0.6]; 8],
            labels: vec![1; 8],
        }
    }

    fn flatten_level(level: &GanLevel) -> Vec<f64> {
        let mut flat = Vec::new();
        level.generator.flatten_into(&mut flat);
        level.discriminator.flatten_into(&mut flat);
        flat
    }

    #[test]
    fn zero_learning_rates_leave_parameters_unchanged() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let mut level = GanLevel::init(1, 1, 4, 2, &mut rng);
        let before = flatten_level(&level);
        let opts = TrainOptions {
            lr_g: 0.0,
            lr_d: 0.0,
            ..TrainOptions::default()
        };
        let metrics = train_level_step(&mut level, &toy_batch(), &opts).unwrap();
        assert_eq!(flatten_level(&level), before);
        assert!(metrics.is_finite());
        assert!(metrics.squared_error > 0.0);
    }

    #[test]
    fn generator_step_never_touches_discriminator_and_vice_versa() {
        let mut rng = ChaCha20Rng::seed_from_u64(78);
        let mut level = GanLevel::init(1, 1, 4, 2, &mut rng);

        let mut d_only = Vec::new();
        level.discriminator.flatten_into(&mut d_only);
        let opts = TrainOptions {
            lr_g: 0.1,
            lr_d: 0.0,
            ..TrainOptions::default()
        };
        train_level_step(&mut level, &toy_batch(), &opts).unwrap();
        let mut d_after = Vec::new();
        level.discriminator.flatten_into(&mut d_after);
        assert_eq!(d_only, d_after);

        let mut g_only = Vec::new();
        level.generator.flatten_into(&mut g_only);
        let opts = TrainOptions {
            lr_g: 0.0,
            lr_d: 0.1,
            ..TrainOptions::default()
        };
        train_level_step(&mut level, &toy_batch(), &opts).unwrap();
        let mut g_after = Vec::new();
        level.generator.flatten_into(&mut g_after);
        assert_eq!(g_only, g_after);
    }

    #[test]
    fn same_seed_same_batch_is_bitwise_deterministic() {
        let make = || {
            let mut rng = ChaCha20Rng::seed_from_u64(5);
            GanLevel::init(1, 1, 6, 2, &mut rng)
        };
        let mut a = make();
        let mut b = make();
        let opts = TrainOptions::default();
        for _ in 0..25 {
            train_level_step(&mut a, &toy_batch(), &opts).unwrap();
            train_level_step(&mut b, &toy_batch(), &opts).unwrap();
        }
        let fa = flatten_level(&a);
        let fb = flatten_level(&b);
        assert_eq!(fa.len(), fb.len());
        for (x, y) in fa.iter().zip(fb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn constant_target_toy_converges_within_500_steps() {
        // regression bound calibrated on this toy: squared error after 500
        // steps falls below 1 % of its initial value
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut level = GanLevel::init(1, 1, 6, 2, &mut rng);
        let batch = toy_batch();
        let opts = TrainOptions {
            lr_g: 0.5,
            lr_d: 0.05,
            ..TrainOptions::default()
        };
        let first = train_level_step(&mut level, &batch, &opts).unwrap();
        let mut last = first;
        for _ in 0..499 {
            last = train_level_step(&mut level, &batch, &opts).unwrap();
        }
        assert!(
            last.squared_error < 0.01 * first.squared_error,
            "mse {} -> {}",
            first.squared_error,
            last.squared_error
        );
    }

    #[test]
    fn saturated_discriminator_reduces_generator_to_prediction_losses() {
        // d_fake ≡ 0 exactly: the adversarial path contributes nothing and
        // the generator gradient equals the mse+bce gradient.
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut level = GanLevel::init(1, 1, 4, 2, &mut rng);
        level.discriminator.head.weight.fill(0.0);
        level.discriminator.head.bias.fill(-1000.0); // sigmoid underflows to 0
        let batch = toy_batch();

        // analytic route A: full step machinery with lr_d = 0
        let mut level_a = level.clone();
        let opts = TrainOptions {
            lr_g: 1.0,
            lr_d: 0.0,
            clip_norm: None,
            non_saturating: false,
        };
        train_level_step(&mut level_a, &batch, &opts).unwrap();

        // route B: hand-computed mse+bce update with the adversarial path
        // zeroed entirely
        let mut level_b = level.clone();
        {
            let n = batch.len() as f64;
            let mut g_grads = GenGrads::zeros_like(&level_b.generator);
            for i in 0..batch.len() {
                let out = level_b.generator.forward(batch.conditions[i].view()).unwrap();
                let (_, mse_grad) = mse_loss(&out.x_hat, &batch.targets[i]).unwrap();
                let (_, ce_grad) = bce_loss(out.p_stable, f64::from(batch.labels[i]));
                let d_label = Array1::from(vec![0.0, ce_grad]);
                let g = level_b.generator.backward(&out.tape, &mse_grad, &d_label).unwrap();
                g_grads.add(&g);
            }
            g_grads.scale(1.0 / n);
            level_b.generator.apply_update(&g_grads, 1.0, None);
        }

        let mut fa = Vec::new();
        level_a.generator.flatten_into(&mut fa);
        let mut fb = Vec::new();
        level_b.generator.flatten_into(&mut fb);
        for (a, b) in fa.iter().zip(fb.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn condition_row_count_must_match_level_index() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut level = GanLevel::init(2, 1, 4, 2, &mut rng);
        let batch = toy_batch(); // single-row conditions, level expects 2
        let err = train_level_step(&mut level, &batch, &TrainOptions::default()).unwrap_err();
        assert!(err.to_string().contains("rows"));
    }

    #[test]
    fn noise_driven_generator_drifts_toward_real_data() {
        // Eq.-level sanity for the plain minimax game on a point mass at 0.8
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let mut level = GanLevel::init(1, 1, 6, 2, &mut rng);
        let opts = TrainOptions {
            lr_g: 0.2,
            lr_d: 0.1,
            clip_norm: Some(5.0),
            non_saturating: true,
        };
        let mut initial_gap = None;
        let mut final_gap = 0.0;
        for step in 0..1500 {
            let noise: Vec<Array1<f64>> =
                (0..16).map(|_| array![rng.gen_range(-1.0..1.0)]).collect();
            let real: Vec<Array1<f64>> = (0..16).map(|_| array![0.8]).collect();
            train_vanilla_step(&mut level, &noise, &real, &opts).unwrap();
            if step % 100 == 0 || step == 1499 {
                let gap: f64 = noise
                    .iter()
                    .map(|z| {
                        let out = level
                            .generator
                            .forward(Array2::from_shape_vec((1, 1), z.to_vec()).unwrap().view())
                            .unwrap();
                        (out.x_hat[0] - 0.8).abs()
                    })
                    .sum::<f64>()
                    / 16.0;
                if initial_gap.is_none() {
                    initial_gap = Some(gap);
                }
                final_gap = gap;
            }
        }
        let initial = initial_gap.unwrap();
        assert!(
            final_gap < 0.5 * initial,
            "generator did not move toward data: {initial} -> {final_gap}"
        );
    }
}

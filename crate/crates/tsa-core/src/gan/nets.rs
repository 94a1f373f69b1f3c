//! Generator and discriminator networks built from the GRU/dense kernel.
//!
//! Both run a stacked-GRU trunk over the conditioning sequence and read the
//! final hidden state. The generator splits into two parallel heads (next
//! sample, stability probability); the discriminator squashes one linear
//! unit into a probability.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::nn::tensor_file::{take_tensor, TensorData};
use crate::nn::{
    Activation, DenseGrads, DenseLayer, DenseTape, GruGrads, GruLayer, GruTape, SgdOutcome,
};

fn rows_of(seq: ArrayView2<f64>) -> Vec<Array1<f64>> {
    seq.rows().into_iter().map(|r| r.to_owned()).collect()
}

/// Run a GRU stack over a sequence; returns one tape per layer.
fn stack_forward(stack: &[GruLayer], rows: &[Array1<f64>]) -> Result<Vec<GruTape>> {
    let mut tapes = Vec::with_capacity(stack.len());
    let mut input: Vec<Array1<f64>> = rows.to_vec();
    for layer in stack {
        let h0 = Array1::zeros(layer.hidden_dim());
        let tape = layer.forward(&input, &h0)?;
        input = tape.hidden[1..].to_vec();
        tapes.push(tape);
    }
    Ok(tapes)
}

/// Backpropagate a gradient on the final hidden state through the stack.
/// Returns per-layer gradients (outermost first) and the input-sequence
/// gradients.
fn stack_backward(
    stack: &[GruLayer],
    tapes: &[GruTape],
    d_last_hidden: Array1<f64>,
) -> Result<(Vec<GruGrads>, Vec<Array1<f64>>)> {
    let steps = tapes[0].len();
    let mut grads: Vec<Option<GruGrads>> = (0..stack.len()).map(|_| None).collect();
    let mut upstream: Vec<Array1<f64>> = {
        let hidden = stack.last().unwrap().hidden_dim();
        let mut up = vec![Array1::zeros(hidden); steps];
        *up.last_mut().unwrap() = d_last_hidden;
        up
    };
    for (k, layer) in stack.iter().enumerate().rev() {
        let (g, dx, _) = layer.backward(&tapes[k], &upstream)?;
        grads[k] = Some(g);
        upstream = dx;
    }
    Ok((grads.into_iter().map(|g| g.unwrap()).collect(), upstream))
}

// ---------------------------------------------------------------------------
// generator

#[derive(Debug, Clone)]
pub struct GeneratorNet {
    pub gru_stack: Vec<GruLayer>,
    pub trunk: DenseLayer,
    /// Softmax over {unstable, stable}; p_stable is coordinate 1.
    pub head_label: DenseLayer,
    /// Sigmoid per channel; valid because inputs are min-max normalized.
    pub head_pred: DenseLayer,
}

pub struct GenTape {
    gru: Vec<GruTape>,
    trunk: DenseTape,
    label: DenseTape,
    pred: DenseTape,
    steps: usize,
}

/// Outputs of one generator pass plus the tape for its backward pass.
pub struct GenForward {
    pub x_hat: Array1<f64>,
    pub label_probs: Array1<f64>,
    pub p_stable: f64,
    pub tape: GenTape,
}

#[derive(Debug, Clone)]
pub struct GenGrads {
    pub gru_stack: Vec<GruGrads>,
    pub trunk: DenseGrads,
    pub head_label: DenseGrads,
    pub head_pred: DenseGrads,
}

impl GeneratorNet {
    pub fn zeros(channels: usize, hidden: usize, gru_layers: usize) -> Self {
        let mut gru_stack = Vec::with_capacity(gru_layers);
        for k in 0..gru_layers {
            let input = if k == 0 { channels } else { hidden };
            gru_stack.push(GruLayer::zeros(input, hidden));
        }
        GeneratorNet {
            gru_stack,
            trunk: DenseLayer::zeros(hidden, hidden, Activation::Tanh),
            head_label: DenseLayer::zeros(hidden, 2, Activation::Softmax),
            head_pred: DenseLayer::zeros(hidden, channels, Activation::Sigmoid),
        }
    }

    pub fn init(channels: usize, hidden: usize, gru_layers: usize, rng: &mut impl Rng) -> Self {
        let mut gru_stack = Vec::with_capacity(gru_layers);
        for k in 0..gru_layers {
            let input = if k == 0 { channels } else { hidden };
            gru_stack.push(GruLayer::glorot(input, hidden, rng));
        }
        GeneratorNet {
            gru_stack,
            trunk: DenseLayer::glorot(hidden, hidden, Activation::Tanh, rng),
            head_label: DenseLayer::glorot(hidden, 2, Activation::Softmax, rng),
            head_pred: DenseLayer::glorot(hidden, channels, Activation::Sigmoid, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.gru_stack[0].input_dim()
    }

    pub fn forward(&self, condition: ArrayView2<f64>) -> Result<GenForward> {
        if condition.nrows() == 0 {
            return Err(CoreError::shape("generator_forward", "empty condition".to_string()));
        }
        if condition.ncols() != self.channels() {
            return Err(CoreError::shape(
                "generator_forward",
                format!(
                    "condition has {} channels, network expects {}",
                    condition.ncols(),
                    self.channels()
                ),
            ));
        }
        let rows = rows_of(condition);
        let gru = stack_forward(&self.gru_stack, &rows)?;
        let h_last = gru.last().unwrap().last_hidden().clone();
        let trunk = self.trunk.forward(&h_last)?;
        let label = self.head_label.forward(&trunk.y)?;
        let pred = self.head_pred.forward(&trunk.y)?;
        Ok(GenForward {
            x_hat: pred.y.clone(),
            p_stable: label.y[1],
            label_probs: label.y.clone(),
            tape: GenTape {
                steps: rows.len(),
                gru,
                trunk,
                label,
                pred,
            },
        })
    }

    /// Gradients of a scalar loss given its gradients on the two heads.
    pub fn backward(
        &self,
        tape: &GenTape,
        d_x_hat: &Array1<f64>,
        d_label_probs: &Array1<f64>,
    ) -> Result<GenGrads> {
        let (g_pred, dt_pred) = self.head_pred.backward(&tape.pred, d_x_hat)?;
        let (g_label, dt_label) = self.head_label.backward(&tape.label, d_label_probs)?;
        let (g_trunk, dh_last) = self.trunk.backward(&tape.trunk, &(dt_pred + dt_label))?;
        let (gru_grads, _) = stack_backward(&self.gru_stack, &tape.gru, dh_last)?;
        Ok(GenGrads {
            gru_stack: gru_grads,
            trunk: g_trunk,
            head_label: g_label,
            head_pred: g_pred,
        })
    }

    pub fn apply_update(&mut self, grads: &GenGrads, lr: f64, clip_norm: Option<f64>) -> SgdOutcome {
        let norm_sq = grads.norm_sq();
        let outcome = crate::nn::sgd::plan_update(norm_sq, clip_norm);
        if outcome.applied {
            let scale = lr * outcome.clip_scale;
            for (layer, g) in self.gru_stack.iter_mut().zip(&grads.gru_stack) {
                layer.apply_update(g, scale);
            }
            self.trunk.apply_update(&grads.trunk, scale);
            self.head_label.apply_update(&grads.head_label, scale);
            self.head_pred.apply_update(&grads.head_pred, scale);
        }
        outcome
    }

    pub fn param_count(&self) -> usize {
        self.gru_stack.iter().map(|l| l.param_count()).sum::<usize>()
            + self.trunk.param_count()
            + self.head_label.param_count()
            + self.head_pred.param_count()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.gru_stack {
            layer.flatten_into(out);
        }
        self.trunk.flatten_into(out);
        self.head_label.flatten_into(out);
        self.head_pred.flatten_into(out);
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for layer in &mut self.gru_stack {
            rest = layer.assign_flat(rest);
        }
        rest = self.trunk.assign_flat(rest);
        rest = self.head_label.assign_flat(rest);
        rest = self.head_pred.assign_flat(rest);
        assert!(rest.is_empty(), "flat vector length mismatch");
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<(String, TensorData)> {
        let mut out = Vec::new();
        for (k, layer) in self.gru_stack.iter().enumerate() {
            push_gru(&mut out, &format!("{prefix}.gru{k}"), layer);
        }
        push_dense(&mut out, &format!("{prefix}.trunk"), &self.trunk);
        push_dense(&mut out, &format!("{prefix}.head_label"), &self.head_label);
        push_dense(&mut out, &format!("{prefix}.head_pred"), &self.head_pred);
        out
    }

    pub fn from_tensors(
        channels: usize,
        hidden: usize,
        gru_layers: usize,
        entries: &mut Vec<(String, TensorData)>,
        prefix: &str,
        origin: &str,
    ) -> Result<Self> {
        let mut net = GeneratorNet::zeros(channels, hidden, gru_layers);
        for (k, layer) in net.gru_stack.iter_mut().enumerate() {
            load_gru(layer, entries, &format!("{prefix}.gru{k}"), origin)?;
        }
        load_dense(&mut net.trunk, entries, &format!("{prefix}.trunk"), origin)?;
        load_dense(&mut net.head_label, entries, &format!("{prefix}.head_label"), origin)?;
        load_dense(&mut net.head_pred, entries, &format!("{prefix}.head_pred"), origin)?;
        Ok(net)
    }
}

impl GenGrads {
    pub fn zeros_like(net: &GeneratorNet) -> Self {
        GenGrads {
            gru_stack: net.gru_stack.iter().map(GruGrads::zeros_like).collect(),
            trunk: DenseGrads::zeros_like(&net.trunk),
            head_label: DenseGrads::zeros_like(&net.head_label),
            head_pred: DenseGrads::zeros_like(&net.head_pred),
        }
    }

    pub fn add(&mut self, other: &GenGrads) {
        for (a, b) in self.gru_stack.iter_mut().zip(&other.gru_stack) {
            a.add(b);
        }
        self.trunk.add(&other.trunk);
        self.head_label.add(&other.head_label);
        self.head_pred.add(&other.head_pred);
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.gru_stack {
            g.scale(s);
        }
        self.trunk.scale(s);
        self.head_label.scale(s);
        self.head_pred.scale(s);
    }

    pub fn norm_sq(&self) -> f64 {
        self.gru_stack.iter().map(|g| g.norm_sq()).sum::<f64>()
            + self.trunk.norm_sq()
            + self.head_label.norm_sq()
            + self.head_pred.norm_sq()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for g in &self.gru_stack {
            g.flatten_into(out);
        }
        self.trunk.flatten_into(out);
        self.head_label.flatten_into(out);
        self.head_pred.flatten_into(out);
    }
}

// ---------------------------------------------------------------------------
// discriminator

#[derive(Debug, Clone)]
pub struct DiscriminatorNet {
    pub gru_stack: Vec<GruLayer>,
    /// One linear unit squashed by a sigmoid into P(real).
    pub head: DenseLayer,
}

pub struct DiscForward {
    pub p_real: f64,
    pub tape: DiscTape,
}

pub struct DiscTape {
    gru: Vec<GruTape>,
    head: DenseTape,
}

#[derive(Debug, Clone)]
pub struct DiscGrads {
    pub gru_stack: Vec<GruGrads>,
    pub head: DenseGrads,
}

impl DiscriminatorNet {
    pub fn zeros(channels: usize, hidden: usize, gru_layers: usize) -> Self {
        let mut gru_stack = Vec::with_capacity(gru_layers);
        for k in 0..gru_layers {
            let input = if k == 0 { channels } else { hidden };
            gru_stack.push(GruLayer::zeros(input, hidden));
        }
        DiscriminatorNet {
            gru_stack,
            head: DenseLayer::zeros(hidden, 1, Activation::Sigmoid),
        }
    }

    pub fn init(channels: usize, hidden: usize, gru_layers: usize, rng: &mut impl Rng) -> Self {
        let mut gru_stack = Vec::with_capacity(gru_layers);
        for k in 0..gru_layers {
            let input = if k == 0 { channels } else { hidden };
            gru_stack.push(GruLayer::glorot(input, hidden, rng));
        }
        DiscriminatorNet {
            gru_stack,
            head: DenseLayer::glorot(hidden, 1, Activation::Sigmoid, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.gru_stack[0].input_dim()
    }

    /// Score a sequence (the condition with the real or predicted sample
    /// appended as the final step) as P(real).
    pub fn forward(&self, seq: ArrayView2<f64>) -> Result<DiscForward> {
        if seq.nrows() == 0 {
            return Err(CoreError::shape("discriminator_forward", "empty sequence".to_string()));
        }
        if seq.ncols() != self.channels() {
            return Err(CoreError::shape(
                "discriminator_forward",
                format!(
                    "sequence has {} channels, network expects {}",
                    seq.ncols(),
                    self.channels()
                ),
            ));
        }
        let rows = rows_of(seq);
        let gru = stack_forward(&self.gru_stack, &rows)?;
        let head = self.head.forward(gru.last().unwrap().last_hidden())?;
        Ok(DiscForward {
            p_real: head.y[0],
            tape: DiscTape { gru, head },
        })
    }

    /// Gradients given dL/d p_real; also returns the gradient on every input
    /// row so the generator update can pull through the appended sample.
    pub fn backward(&self, tape: &DiscTape, d_p_real: f64) -> Result<(DiscGrads, Vec<Array1<f64>>)> {
        let (g_head, dh_last) = self
            .head
            .backward(&tape.head, &Array1::from(vec![d_p_real]))?;
        let (gru_grads, d_inputs) = stack_backward(&self.gru_stack, &tape.gru, dh_last)?;
        Ok((
            DiscGrads {
                gru_stack: gru_grads,
                head: g_head,
            },
            d_inputs,
        ))
    }

    pub fn apply_update(&mut self, grads: &DiscGrads, lr: f64, clip_norm: Option<f64>) -> SgdOutcome {
        let outcome = crate::nn::sgd::plan_update(grads.norm_sq(), clip_norm);
        if outcome.applied {
            let scale = lr * outcome.clip_scale;
            for (layer, g) in self.gru_stack.iter_mut().zip(&grads.gru_stack) {
                layer.apply_update(g, scale);
            }
            self.head.apply_update(&grads.head, scale);
        }
        outcome
    }

    pub fn param_count(&self) -> usize {
        self.gru_stack.iter().map(|l| l.param_count()).sum::<usize>() + self.head.param_count()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for layer in &self.gru_stack {
            layer.flatten_into(out);
        }
        self.head.flatten_into(out);
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut rest = flat;
        for layer in &mut self.gru_stack {
            rest = layer.assign_flat(rest);
        }
        rest = self.head.assign_flat(rest);
        assert!(rest.is_empty(), "flat vector length mismatch");
    }

    pub fn to_tensors(&self, prefix: &str) -> Vec<(String, TensorData)> {
        let mut out = Vec::new();
        for (k, layer) in self.gru_stack.iter().enumerate() {
            push_gru(&mut out, &format!("{prefix}.gru{k}"), layer);
        }
        push_dense(&mut out, &format!("{prefix}.head"), &self.head);
        out
    }

    pub fn from_tensors(
        channels: usize,
        hidden: usize,
        gru_layers: usize,
        entries: &mut Vec<(String, TensorData)>,
        prefix: &str,
        origin: &str,
    ) -> Result<Self> {
        let mut net = DiscriminatorNet::zeros(channels, hidden, gru_layers);
        for (k, layer) in net.gru_stack.iter_mut().enumerate() {
            load_gru(layer, entries, &format!("{prefix}.gru{k}"), origin)?;
        }
        load_dense(&mut net.head, entries, &format!("{prefix}.head"), origin)?;
        Ok(net)
    }
}

impl DiscGrads {
    pub fn zeros_like(net: &DiscriminatorNet) -> Self {
        DiscGrads {
            gru_stack: net.gru_stack.iter().map(GruGrads::zeros_like).collect(),
            head: DenseGrads::zeros_like(&net.head),
        }
    }

    pub fn add(&mut self, other: &DiscGrads) {
        for (a, b) in self.gru_stack.iter_mut().zip(&other.gru_stack) {
            a.add(b);
        }
        self.head.add(&other.head);
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.gru_stack {
            g.scale(s);
        }
        self.head.scale(s);
    }

    pub fn norm_sq(&self) -> f64 {
        self.gru_stack.iter().map(|g| g.norm_sq()).sum::<f64>() + self.head.norm_sq()
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for g in &self.gru_stack {
            g.flatten_into(out);
        }
        self.head.flatten_into(out);
    }
}

// ---------------------------------------------------------------------------
// tensor-file plumbing

fn push_gru(out: &mut Vec<(String, TensorData)>, prefix: &str, l: &GruLayer) {
    out.push((format!("{prefix}.w_r"), TensorData::M(l.w_r.clone())));
    out.push((format!("{prefix}.w_z"), TensorData::M(l.w_z.clone())));
    out.push((format!("{prefix}.w_h"), TensorData::M(l.w_h.clone())));
    out.push((format!("{prefix}.u_r"), TensorData::M(l.u_r.clone())));
    out.push((format!("{prefix}.u_z"), TensorData::M(l.u_z.clone())));
    out.push((format!("{prefix}.u_h"), TensorData::M(l.u_h.clone())));
    out.push((format!("{prefix}.b_r"), TensorData::V(l.b_r.clone())));
    out.push((format!("{prefix}.b_z"), TensorData::V(l.b_z.clone())));
    out.push((format!("{prefix}.b_h"), TensorData::V(l.b_h.clone())));
}

fn push_dense(out: &mut Vec<(String, TensorData)>, prefix: &str, l: &DenseLayer) {
    out.push((format!("{prefix}.weight"), TensorData::M(l.weight.clone())));
    out.push((format!("{prefix}.bias"), TensorData::V(l.bias.clone())));
}

fn expect_matrix(
    entries: &mut Vec<(String, TensorData)>,
    name: &str,
    rows: usize,
    cols: usize,
    origin: &str,
) -> Result<Array2<f64>> {
    match take_tensor(entries, name, origin)? {
        TensorData::M(m) if m.nrows() == rows && m.ncols() == cols => Ok(m),
        TensorData::M(m) => Err(CoreError::Format(format!(
            "{origin}: tensor `{name}` is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        ))),
        TensorData::V(_) => Err(CoreError::Format(format!(
            "{origin}: tensor `{name}` has rank 1, expected 2"
        ))),
    }
}

fn expect_vector(
    entries: &mut Vec<(String, TensorData)>,
    name: &str,
    len: usize,
    origin: &str,
) -> Result<Array1<f64>> {
    match take_tensor(entries, name, origin)? {
        TensorData::V(v) if v.len() == len => Ok(v),
        TensorData::V(v) => Err(CoreError::Format(format!(
            "{origin}: tensor `{name}` has length {}, expected {len}",
            v.len()
        ))),
        TensorData::M(_) => Err(CoreError::Format(format!(
            "{origin}: tensor `{name}` has rank 2, expected 1"
        ))),
    }
}

fn load_gru(
    layer: &mut GruLayer,
    entries: &mut Vec<(String, TensorData)>,
    prefix: &str,
    origin: &str,
) -> Result<()> {
    let h = layer.hidden_dim();
    let i = layer.input_dim();
    layer.w_r = expect_matrix(entries, &format!("{prefix}.w_r"), h, i, origin)?;
    layer.w_z = expect_matrix(entries, &format!("{prefix}.w_z"), h, i, origin)?;
    layer.w_h = expect_matrix(entries, &format!("{prefix}.w_h"), h, i, origin)?;
    layer.u_r = expect_matrix(entries, &format!("{prefix}.u_r"), h, h, origin)?;
    layer.u_z = expect_matrix(entries, &format!("{prefix}.u_z"), h, h, origin)?;
    layer.u_h = expect_matrix(entries, &format!("{prefix}.u_h"), h, h, origin)?;
    layer.b_r = expect_vector(entries, &format!("{prefix}.b_r"), h, origin)?;
    layer.b_z = expect_vector(entries, &format!("{prefix}.b_z"), h, origin)?;
    layer.b_h = expect_vector(entries, &format!("{prefix}.b_h"), h, origin)?;
    Ok(())
}

fn load_dense(
    layer: &mut DenseLayer,
    entries: &mut Vec<(String, TensorData)>,
    prefix: &str,
    origin: &str,
) -> Result<()> {
    let rows = layer.output_dim();
    let cols = layer.input_dim();
    layer.weight = expect_matrix(entries, &format!("{prefix}.weight"), rows, cols, origin)?;
    layer.bias = expect_vector(entries, &format!("{prefix}.bias"), rows, origin)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_weight_generator_outputs_half_everywhere() {
        let gen = GeneratorNet::zeros(3, 4, 2);
        let condition = array![[0.2, 0.8, 0.5]];
        let out = gen.forward(condition.view()).unwrap();
        for v in out.x_hat.iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(out.p_stable, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_weight_discriminator_scores_half() {
        let disc = DiscriminatorNet::zeros(3, 4, 2);
        let seq = array![[0.2, 0.8, 0.5], [0.4, 0.1, 0.9]];
        let out = disc.forward(seq.view()).unwrap();
        assert_abs_diff_eq!(out.p_real, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn identical_inputs_score_identically() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let disc = DiscriminatorNet::init(2, 5, 2, &mut rng);
        let seq = array![[0.3, 0.6], [0.1, 0.8], [0.5, 0.5]];
        let a = disc.forward(seq.view()).unwrap().p_real;
        let b = disc.forward(seq.view()).unwrap().p_real;
        assert_eq!(a, b);
    }

    #[test]
    fn batch_rows_do_not_couple() {
        // one item processed twice must match the same item processed once
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let gen = GeneratorNet::init(2, 4, 2, &mut rng);
        let condition = array![[0.25, 0.75], [0.5, 0.5]];
        let out1 = gen.forward(condition.view()).unwrap();
        let out2 = gen.forward(condition.view()).unwrap();
        assert_eq!(out1.x_hat, out2.x_hat);
        assert_eq!(out1.p_stable, out2.p_stable);
    }

    #[test]
    fn channel_mismatch_is_reported() {
        let gen = GeneratorNet::zeros(3, 4, 2);
        let err = gen.forward(array![[0.1, 0.2]].view()).err().unwrap();
        assert!(err.to_string().contains("channels"));
    }

    /// Scalar transcription of the full generator on a tiny instance,
    /// written with plain loops as an independent oracle.
    #[test]
    fn generator_matches_scalar_transcription() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let gen = GeneratorNet::init(2, 2, 2, &mut rng);
        let condition = array![[0.7, 0.3], [0.2, 0.9]];
        let out = gen.forward(condition.view()).unwrap();

        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let gru_step = |l: &GruLayer, x: &[f64], h: &[f64]| -> Vec<f64> {
            let n = l.hidden_dim();
            let mut next = vec![0.0; n];
            for i in 0..n {
                let mut ar = l.b_r[i];
                let mut az = l.b_z[i];
                let mut ah = l.b_h[i];
                let mut ur = 0.0;
                let mut uz = 0.0;
                let mut uh = 0.0;
                for (j, &xj) in x.iter().enumerate() {
                    ar += l.w_r[[i, j]] * xj;
                    az += l.w_z[[i, j]] * xj;
                    ah += l.w_h[[i, j]] * xj;
                }
                for (j, &hj) in h.iter().enumerate() {
                    ur += l.u_r[[i, j]] * hj;
                    uz += l.u_z[[i, j]] * hj;
                    uh += l.u_h[[i, j]] * hj;
                }
                let r = sigmoid(ar + ur);
                let z = sigmoid(az + uz);
                let cand = (ah + r * uh).tanh();
                next[i] = z * h[i] + (1.0 - z) * cand;
            }
            next
        };

        // layer 1 over both steps, then layer 2 over its outputs
        let mut h1 = vec![0.0; 2];
        let mut layer1_out = Vec::new();
        for t in 0..2 {
            h1 = gru_step(&gen.gru_stack[0], &[condition[[t, 0]], condition[[t, 1]]], &h1);
            layer1_out.push(h1.clone());
        }
        let mut h2 = vec![0.0; 2];
        for x in &layer1_out {
            h2 = gru_step(&gen.gru_stack[1], x, &h2);
        }
        // trunk (tanh)
        let mut trunk = vec![0.0; 2];
        for i in 0..2 {
            let mut a = gen.trunk.bias[i];
            for j in 0..2 {
                a += gen.trunk.weight[[i, j]] * h2[j];
            }
            trunk[i] = a.tanh();
        }
        // label head (softmax)
        let mut logits = vec![0.0; 2];
        for i in 0..2 {
            let mut a = gen.head_label.bias[i];
            for j in 0..2 {
                a += gen.head_label.weight[[i, j]] * trunk[j];
            }
            logits[i] = a;
        }
        let mx = logits[0].max(logits[1]);
        let e0 = (logits[0] - mx).exp();
        let e1 = (logits[1] - mx).exp();
        let p_stable = e1 / (e0 + e1);
        // prediction head (sigmoid)
        let mut pred = vec![0.0; 2];
        for i in 0..2 {
            let mut a = gen.head_pred.bias[i];
            for j in 0..2 {
                a += gen.head_pred.weight[[i, j]] * trunk[j];
            }
            pred[i] = sigmoid(a);
        }

        assert_abs_diff_eq!(out.p_stable, p_stable, epsilon = 1e-13);
        for i in 0..2 {
            assert_abs_diff_eq!(out.x_hat[i], pred[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn tensor_round_trip_restores_nets() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let gen = GeneratorNet::init(3, 5, 2, &mut rng);
        let disc = DiscriminatorNet::init(3, 5, 2, &mut rng);
        let mut entries = gen.to_tensors("gen");
        entries.extend(disc.to_tensors("disc"));
        let mut loaded = entries.clone();
        let gen2 = GeneratorNet::from_tensors(3, 5, 2, &mut loaded, "gen", "mem").unwrap();
        let disc2 = DiscriminatorNet::from_tensors(3, 5, 2, &mut loaded, "disc", "mem").unwrap();
        assert!(loaded.is_empty());
        let cond = array![[0.1, 0.5, 0.9]];
        assert_eq!(
            gen.forward(cond.view()).unwrap().x_hat,
            gen2.forward(cond.view()).unwrap().x_hat
        );
        assert_eq!(
            disc.forward(cond.view()).unwrap().p_real,
            disc2.forward(cond.view()).unwrap().p_real
        );
    }
}

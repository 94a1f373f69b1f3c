//! Gated recurrent unit with backpropagation through time.
//!
//! Per step, with σ the sigmoid and ⊙ the elementwise product:
//!
//! ```text
//! r_t = σ(W_r x_t + U_r h_{t−1} + b_r)
//! z_t = σ(W_z x_t + U_z h_{t−1} + b_z)
//! h'_t = tanh(W_h x_t + r_t ⊙ U_h h_{t−1} + b_h)
//! h_t = z_t ⊙ h_{t−1} + (1 − z_t) ⊙ h'_t
//! ```

use ndarray::{Array1, Array2};
use rand::Rng;

use super::activation::sigmoid;
use super::add_outer;
use crate::error::{CoreError, Result};

fn uniform(rows: usize, cols: usize, s: f64, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s))
}

#[derive(Debug, Clone)]
pub struct GruLayer {
    pub w_r: Array2<f64>,
    pub w_z: Array2<f64>,
    pub w_h: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_r: Array1<f64>,
    pub b_z: Array1<f64>,
    pub b_h: Array1<f64>,
}

#[derive(Debug, Clone)]
struct StepCache {
    x: Array1<f64>,
    r: Array1<f64>,
    z: Array1<f64>,
    cand: Array1<f64>,
    /// U_h h_{t−1}, reused by the reset-gate gradient.
    uh_hprev: Array1<f64>,
}

/// Cached activations from one forward pass, consumed by [`GruLayer::backward`].
#[derive(Debug, Clone)]
pub struct GruTape {
    steps: Vec<StepCache>,
    /// h_0 .. h_T; `hidden[t+1]` is the state after consuming `x_t`.
    pub hidden: Vec<Array1<f64>>,
    fingerprint: f64,
}

impl GruTape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_hidden(&self) -> &Array1<f64> {
        self.hidden.last().expect("tape holds at least h0")
    }
}

/// Gradient buffers mirroring [`GruLayer`].
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_r: Array2<f64>,
    pub w_z: Array2<f64>,
    pub w_h: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_h: Array2<f64>,
    pub b_r: Array1<f64>,
    pub b_z: Array1<f64>,
    pub b_h: Array1<f64>,
}

impl GruLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruLayer {
            w_r: Array2::zeros((hidden, input)),
            w_z: Array2::zeros((hidden, input)),
            w_h: Array2::zeros((hidden, input)),
            u_r: Array2::zeros((hidden, hidden)),
            u_z: Array2::zeros((hidden, hidden)),
            u_h: Array2::zeros((hidden, hidden)),
            b_r: Array1::zeros(hidden),
            b_z: Array1::zeros(hidden),
            b_h: Array1::zeros(hidden),
        }
    }

    pub fn glorot(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let sw = (6.0 / (input + hidden) as f64).sqrt();
        let su = (6.0 / (2 * hidden) as f64).sqrt();
        GruLayer {
            w_r: uniform(hidden, input, sw, rng),
            w_z: uniform(hidden, input, sw, rng),
            w_h: uniform(hidden, input, sw, rng),
            u_r: uniform(hidden, hidden, su, rng),
            u_z: uniform(hidden, hidden, su, rng),
            u_h: uniform(hidden, hidden, su, rng),
            b_r: Array1::zeros(hidden),
            b_z: Array1::zeros(hidden),
            b_h: Array1::zeros(hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_r.nrows()
    }

    pub(crate) fn fingerprint(&self) -> f64 {
        self.w_r.sum()
            + self.w_z.sum()
            + self.w_h.sum()
            + self.u_r.sum()
            + self.u_z.sum()
            + self.u_h.sum()
            + self.b_r.sum()
            + self.b_z.sum()
            + self.b_h.sum()
    }

    pub fn forward(&self, xs: &[Array1<f64>], h0: &Array1<f64>) -> Result<GruTape> {
        if xs.is_empty() {
            return Err(CoreError::shape("gru_forward", "x_sequence is empty".to_string()));
        }
        if h0.len() != self.hidden_dim() {
            return Err(CoreError::shape(
                "gru_forward",
                format!("h0 has length {}, hidden size is {}", h0.len(), self.hidden_dim()),
            ));
        }
        let mut tape = GruTape {
            steps: Vec::with_capacity(xs.len()),
            hidden: Vec::with_capacity(xs.len() + 1),
            fingerprint: self.fingerprint(),
        };
        tape.hidden.push(h0.clone());
        for (t, x) in xs.iter().enumerate() {
            if x.len() != self.input_dim() {
                return Err(CoreError::shape(
                    "gru_forward",
                    format!(
                        "x_{} has length {}, W_r expects {}",
                        t,
                        x.len(),
                        self.input_dim()
                    ),
                ));
            }
            let h_prev = tape.hidden.last().unwrap();
            let r = (self.w_r.dot(x) + self.u_r.dot(h_prev) + &self.b_r).mapv(sigmoid);
            let z = (self.w_z.dot(x) + self.u_z.dot(h_prev) + &self.b_z).mapv(sigmoid);
            let uh_hprev = self.u_h.dot(h_prev);
            let cand = (self.w_h.dot(x) + &r * &uh_hprev + &self.b_h).mapv(f64::tanh);
            let h = &z * h_prev + (1.0 - &z) * &cand;
            tape.steps.push(StepCache {
                x: x.clone(),
                r,
                z,
                cand,
                uh_hprev,
            });
            tape.hidden.push(h);
        }
        Ok(tape)
    }

    /// Backpropagation through time. `upstream[t]` is ∂L/∂h_t (zero for
    /// steps the loss never touched). Returns parameter gradients, per-step
    /// input gradients, and ∂L/∂h0.
    pub fn backward(
        &self,
        tape: &GruTape,
        upstream: &[Array1<f64>],
    ) -> Result<(GruGrads, Vec<Array1<f64>>, Array1<f64>)> {
        if tape.fingerprint != self.fingerprint() {
            return Err(CoreError::TapeMismatch);
        }
        if upstream.len() != tape.steps.len() {
            return Err(CoreError::shape(
                "gru_backward",
                format!(
                    "upstream has {} steps, tape recorded {}",
                    upstream.len(),
                    tape.steps.len()
                ),
            ));
        }
        let hidden = self.hidden_dim();
        let mut grads = GruGrads::zeros_like(self);
        let mut dx = vec![Array1::zeros(self.input_dim()); tape.steps.len()];
        let mut carry: Array1<f64> = Array1::zeros(hidden);

        for t in (0..tape.steps.len()).rev() {
            let step = &tape.steps[t];
            let h_prev = &tape.hidden[t];
            let dh = &upstream[t] + &carry;

            let dz = &dh * &(h_prev - &step.cand);
            let dcand = &dh * &(1.0 - &step.z);
            let mut dh_prev = &dh * &step.z;

            // candidate branch
            let da_h = &dcand * &(1.0 - &step.cand * &step.cand);
            add_outer(&mut grads.w_h, &da_h, &step.x);
            grads.b_h += &da_h;
            let dr = &da_h * &step.uh_hprev;
            let duh = &da_h * &step.r;
            add_outer(&mut grads.u_h, &duh, h_prev);
            dh_prev += &self.u_h.t().dot(&duh);
            let mut dxt = self.w_h.t().dot(&da_h);

            // reset gate
            let da_r = &dr * &step.r * &(1.0 - &step.r);
            add_outer(&mut grads.w_r, &da_r, &step.x);
            add_outer(&mut grads.u_r, &da_r, h_prev);
            grads.b_r += &da_r;
            dh_prev += &self.u_r.t().dot(&da_r);
            dxt += &self.w_r.t().dot(&da_r);

            // update gate
            let da_z = &dz * &step.z * &(1.0 - &step.z);
            add_outer(&mut grads.w_z, &da_z, &step.x);
            add_outer(&mut grads.u_z, &da_z, h_prev);
            grads.b_z += &da_z;
            dh_prev += &self.u_z.t().dot(&da_z);
            dxt += &self.w_z.t().dot(&da_z);

            dx[t] = dxt;
            carry = dh_prev;
        }
        Ok((grads, dx, carry))
    }

    pub fn param_count(&self) -> usize {
        let h = self.hidden_dim();
        let i = self.input_dim();
        3 * (h * i + h * h + h)
    }

    /// Parameters as one flat vector, fixed order (w_r, w_z, w_h, u_r, u_z,
    /// u_h, b_r, b_z, b_h). Used by the gradient checker.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for m in [&self.w_r, &self.w_z, &self.w_h, &self.u_r, &self.u_z, &self.u_h] {
            out.extend(m.iter());
        }
        for v in [&self.b_r, &self.b_z, &self.b_h] {
            out.extend(v.iter());
        }
    }

    /// Inverse of [`flatten_into`]; consumes values from the front of `flat`
    /// and returns the rest.
    pub fn assign_flat<'a>(&mut self, flat: &'a [f64]) -> &'a [f64] {
        let mut rest = flat;
        for m in [
            &mut self.w_r,
            &mut self.w_z,
            &mut self.w_h,
            &mut self.u_r,
            &mut self.u_z,
            &mut self.u_h,
        ] {
            let n = m.len();
            for (dst, src) in m.iter_mut().zip(&rest[..n]) {
                *dst = *src;
            }
            rest = &rest[n..];
        }
        for v in [&mut self.b_r, &mut self.b_z, &mut self.b_h] {
            let n = v.len();
            for (dst, src) in v.iter_mut().zip(&rest[..n]) {
                *dst = *src;
            }
            rest = &rest[n..];
        }
        rest
    }

    pub fn apply_update(&mut self, grads: &GruGrads, scale: f64) {
        self.w_r.scaled_add(-scale, &grads.w_r);
        self.w_z.scaled_add(-scale, &grads.w_z);
        self.w_h.scaled_add(-scale, &grads.w_h);
        self.u_r.scaled_add(-scale, &grads.u_r);
        self.u_z.scaled_add(-scale, &grads.u_z);
        self.u_h.scaled_add(-scale, &grads.u_h);
        self.b_r.scaled_add(-scale, &grads.b_r);
        self.b_z.scaled_add(-scale, &grads.b_z);
        self.b_h.scaled_add(-scale, &grads.b_h);
    }
}

impl GruGrads {
    pub fn zeros_like(layer: &GruLayer) -> Self {
        GruGrads {
            w_r: Array2::zeros(layer.w_r.raw_dim()),
            w_z: Array2::zeros(layer.w_z.raw_dim()),
            w_h: Array2::zeros(layer.w_h.raw_dim()),
            u_r: Array2::zeros(layer.u_r.raw_dim()),
            u_z: Array2::zeros(layer.u_z.raw_dim()),
            u_h: Array2::zeros(layer.u_h.raw_dim()),
            b_r: Array1::zeros(layer.b_r.raw_dim()),
            b_z: Array1::zeros(layer.b_z.raw_dim()),
            b_h: Array1::zeros(layer.b_h.raw_dim()),
        }
    }

    pub fn add(&mut self, other: &GruGrads) {
        self.w_r += &other.w_r;
        self.w_z += &other.w_z;
        self.w_h += &other.w_h;
        self.u_r += &other.u_r;
        self.u_z += &other.u_z;
        self.u_h += &other.u_h;
        self.b_r += &other.b_r;
        self.b_z += &other.b_z;
        self.b_h += &other.b_h;
    }

    pub fn scale(&mut self, s: f64) {
        self.w_r *= s;
        self.w_z *= s;
        self.w_h *= s;
        self.u_r *= s;
        self.u_z *= s;
        self.u_h *= s;
        self.b_r *= s;
        self.b_z *= s;
        self.b_h *= s;
    }

    pub fn norm_sq(&self) -> f64 {
        [&self.w_r, &self.w_z, &self.w_h, &self.u_r, &self.u_z, &self.u_h]
            .iter()
            .map(|m| m.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            + [&self.b_r, &self.b_z, &self.b_h]
                .iter()
                .map(|v| v.iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
    }

    /// Same fixed order as [`GruLayer::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for m in [&self.w_r, &self.w_z, &self.w_h, &self.u_r, &self.u_z, &self.u_h] {
            out.extend(m.iter());
        }
        for v in [&self.b_r, &self.b_z, &self.b_h] {
            out.extend(v.iter());
        }
    }
}

//! Hand-built datasets for unit tests that should not depend on the
//! simulator.

use ndarray::Array2;

use crate::gridsim::{Dataset, TransientSample};

/// Synthetic labeled dataset: stable events hover near rated voltage,
/// unstable ones sag and oscillate. Deterministic in its arguments.
pub fn synthetic_dataset(
    n: usize,
    channels: usize,
    post_rows: usize,
    label_of: impl Fn(usize) -> u8,
) -> Dataset {
    let rows = post_rows + 2;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let label = label_of(i);
        let jitter = (i as f64 * 0.37).sin() * 0.02;
        let voltages = Array2::from_shape_fn((rows, channels), |(r, c)| {
            let t = r as f64 / rows as f64;
            let phase = c as f64 * 0.6 + i as f64 * 0.1;
            if label == 1 {
                0.92 + jitter + 0.04 * (6.0 * t + phase).sin()
            } else {
                0.55 + jitter + 0.18 * (9.0 * t + phase).sin()
            }
        });
        let rotor_angles = Array2::from_shape_fn((rows, 2), |(r, m)| {
            if m == 0 {
                0.0
            } else if label == 1 {
                30.0 + 5.0 * (r as f64 * 0.1).sin()
            } else {
                30.0 + r as f64 * 25.0
            }
        });
        let eta = if label == 1 { 0.6 } else { -0.4 };
        samples.push(TransientSample {
            voltages,
            rotor_angles,
            eta,
            label,
            scenario_id: format!("synthetic_{i:03}"),
            measured_row: 1,
        });
    }
    let n_train = (0.8 * n as f64).round() as usize;
    Dataset {
        samples,
        train_idx: (0..n_train).collect(),
        test_idx: (n_train..n).collect(),
        pmu_buses: (1..=channels).collect(),
        sample_rate: 120.0,
        f_nominal_hz: 60.0,
        seed: 0,
        normalization: None,
    }
}

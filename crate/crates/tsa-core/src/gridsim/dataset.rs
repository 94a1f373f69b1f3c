//! Labeled dataset assembly and on-disk formats.
//!
//! Balancing works per scenario: a bisection over the fault duration finds
//! the critical clearing duration, then durations at fixed fractions below
//! and above it are simulated, so every scenario contributes events on both
//! sides of the stability boundary where one exists.
//!
//! Disk layout: one `manifest.json` plus one flat binary matrix per sample
//! (voltages) and per rotor-angle trajectory. Matrix files:
//!
//! ```text
//! magic  b"TSM1"
//! u32    format version (currently 1)
//! u32    rows, u32 cols
//! f64×n  row-major values, little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::case::CaseFile;
use super::scenario::{prepare_scenario, run_transient, FaultLocation, ScenarioSpec};
use crate::error::{CoreError, Result};
use crate::seed;

const MATRIX_MAGIC: &[u8; 4] = b"TSM1";
const MATRIX_VERSION: u32 = 1;
const MANIFEST_VERSION: u32 = 1;
const BISECTION_ITERS: usize = 16;

/// One labeled transient event.
#[derive(Debug, Clone)]
pub struct TransientSample {
    /// Per-unit |V| at the PMU buses, samples × channels.
    pub voltages: Array2<f64>,
    /// Degrees relative to machine 1, samples × machines.
    pub rotor_angles: Array2<f64>,
    pub eta: f64,
    /// 1 = stable, 0 = unstable.
    pub label: u8,
    pub scenario_id: String,
    /// Row index of the first post-clearing sample, the measured x(t).
    pub measured_row: usize,
}

impl TransientSample {
    pub fn channels(&self) -> usize {
        self.voltages.ncols()
    }

    /// Post-clearing rows available after the measured sample.
    pub fn post_rows(&self) -> usize {
        self.voltages.nrows().saturating_sub(self.measured_row)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalizationSlot {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<TransientSample>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// 1-based PMU bus ids, in channel order.
    pub pmu_buses: Vec<usize>,
    pub sample_rate: f64,
    pub f_nominal_hz: f64,
    pub seed: u64,
    /// Filled by training, kept null in generated datasets.
    pub normalization: Option<NormalizationSlot>,
}

impl Dataset {
    pub fn channels(&self) -> usize {
        self.samples.first().map_or(0, |s| s.channels())
    }

    pub fn count_label(&self, indices: &[usize], label: u8) -> usize {
        indices.iter().filter(|&&i| self.samples[i].label == label).count()
    }
}

fn scenario_grid(case: &CaseFile) -> Vec<(f64, FaultLocation)> {
    let mut out = Vec::new();
    for &loading in &case.grid.loadings {
        for &bus in &case.grid.fault_buses {
            out.push((loading, FaultLocation::Bus(bus)));
        }
        for line in &case.grid.fault_lines {
            for &position in &case.grid.line_positions {
                out.push((
                    loading,
                    FaultLocation::Line { from: line.from, to: line.to, position },
                ));
            }
        }
    }
    out
}

fn scenario_candidates(
    case: &CaseFile,
    loading: f64,
    fault: &FaultLocation,
) -> Result<Vec<TransientSample>> {
    let grid = &case.grid;
    let mut spec = ScenarioSpec::from_case(case, loading, fault.clone(), grid.duration_min_cycles);
    let prep = prepare_scenario(case, &spec)?;

    let probe = |cycles: f64, spec: &mut ScenarioSpec| -> Result<u8> {
        spec.fault_duration_cycles = cycles;
        Ok(run_transient(&prep, spec, false)?.label)
    };

    let mut lo = grid.duration_min_cycles;
    let mut hi = grid.duration_max_cycles;
    let stable_at_lo = probe(lo, &mut spec)? == 1;
    let unstable_at_hi = probe(hi, &mut spec)? == 0;

    // critical clearing duration in cycles, or the range edge when the
    // scenario is one-sided inside the duration range
    let critical = if !stable_at_lo {
        lo
    } else if !unstable_at_hi {
        hi
    } else {
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if probe(mid, &mut spec)? == 1 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut durations: Vec<f64> = Vec::new();
    if stable_at_lo {
        durations.extend(grid.stable_fractions.iter().map(|f| f * critical));
    }
    if unstable_at_hi {
        durations.extend(grid.unstable_fractions.iter().map(|f| f * critical));
    }
    durations.retain(|d| d.is_finite());
    for d in &mut durations {
        *d = d.clamp(grid.duration_min_cycles, grid.duration_max_cycles);
    }
    durations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    durations.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let loading_tag = (loading * 100.0).round() as u32;
    let mut out = Vec::with_capacity(durations.len());
    for cycles in durations {
        spec.fault_duration_cycles = cycles;
        let traj = run_transient(&prep, &spec, true)?;
        let voltages = traj.voltages.expect("voltage recording requested");
        if voltages.nrows() < traj.measured_row + grid.min_post_rows {
            continue; // event blew up too soon to provide the learning window
        }
        out.push(TransientSample {
            voltages,
            rotor_angles: traj.angles_rel_deg,
            eta: traj.eta,
            label: traj.label,
            scenario_id: format!("l{loading_tag:03}_{}_c{cycles:08.3}", fault.describe()),
            measured_row: traj.measured_row,
        });
    }
    Ok(out)
}

/// Simulate the case's fault grid and assemble a balanced, split dataset.
/// Deterministic in (case bytes, seed); scenario integrations run in
/// parallel and are merged in grid order.
pub fn generate_dataset(
    case: &CaseFile,
    seed_override: Option<u64>,
    per_class_override: Option<usize>,
) -> Result<Dataset> {
    let root_seed = seed_override.unwrap_or(case.grid.seed);
    let per_class = per_class_override.unwrap_or(case.grid.per_class);

    let grid = scenario_grid(case);
    let candidate_lists: Vec<Vec<TransientSample>> = grid
        .par_iter()
        .map(|(loading, fault)| scenario_candidates(case, *loading, fault))
        .collect::<Result<Vec<_>>>()?;

    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for list in candidate_lists {
        for sample in list {
            if sample.label == 1 {
                stable.push(sample);
            } else {
                unstable.push(sample);
            }
        }
    }
    if stable.len() < per_class {
        return Err(CoreError::Imbalance { class: "stable", have: stable.len(), need: per_class });
    }
    if unstable.len() < per_class {
        return Err(CoreError::Imbalance { class: "unstable", have: unstable.len(), need: per_class });
    }

    let pick = |pool: &mut Vec<TransientSample>, label: &str| -> Vec<TransientSample> {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut seed::rng(root_seed, &format!("select-{label}")));
        idx.truncate(per_class);
        idx.sort_unstable();
        let mut chosen = Vec::with_capacity(per_class);
        for &i in idx.iter().rev() {
            chosen.push(pool.swap_remove(i));
        }
        chosen
    };
    let mut samples = pick(&mut stable, "stable");
    samples.extend(pick(&mut unstable, "unstable"));
    samples.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    for pair in samples.windows(2) {
        if pair[0].scenario_id == pair[1].scenario_id {
            return Err(CoreError::Config(format!(
                "duplicate scenario id `{}`; use distinct duration fractions",
                pair[0].scenario_id
            )));
        }
    }

    // stratified split, per-class shuffled
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, tag) in [(1u8, "split-stable"), (0u8, "split-unstable")] {
        let mut class_idx: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        class_idx.shuffle(&mut seed::rng(root_seed, tag));
        let n_train = (case.grid.train_fraction * class_idx.len() as f64).round() as usize;
        train_idx.extend_from_slice(&class_idx[..n_train]);
        test_idx.extend_from_slice(&class_idx[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    Ok(Dataset {
        samples,
        train_idx,
        test_idx,
        pmu_buses: case.pmu_bus_ids(),
        sample_rate: case.defaults.sample_rate,
        f_nominal_hz: case.f_nominal_hz,
        seed: root_seed,
        normalization: None,
    })
}

/// Additive white Gaussian noise per channel at a fixed SNR. The signal
/// power is the mean squared value of the channel. `snr_db = +∞` returns
/// the input unchanged, bit for bit.
pub fn inject_noise(voltages: &Array2<f64>, snr_db: f64, noise_seed: u64) -> Array2<f64> {
    if snr_db == f64::INFINITY {
        return voltages.clone();
    }
    let mut out = voltages.clone();
    let mut rng = seed::rng(noise_seed, "awgn");
    let rows = voltages.nrows();
    for c in 0..voltages.ncols() {
        let p_signal = voltages.column(c).iter().map(|v| v * v).sum::<f64>() / rows as f64;
        let variance = p_signal / 10f64.powf(snr_db / 10.0);
        if variance <= 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, variance.sqrt()).expect("finite std dev");
        for r in 0..rows {
            out[[r, c]] += normal.sample(&mut rng);
        }
    }
    out
}

/// Counts of η values over equal-width bins spanning [−1, 1].
pub fn eta_histogram<I: IntoIterator<Item = f64>>(etas: I, bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins];
    for eta in etas {
        let pos = ((eta + 1.0) / 2.0 * bins as f64).floor() as isize;
        let idx = pos.clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// disk formats

pub fn write_matrix_to<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(m.nrows() as u32).to_le_bytes())?;
    w.write_all(&(m.ncols() as u32).to_le_bytes())?;
    for &v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_to(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn read_matrix_from<R: Read>(mut r: R, origin: &str) -> Result<Array2<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(CoreError::Format(format!("{origin}: bad matrix magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != MATRIX_VERSION {
        return Err(CoreError::Format(format!(
            "{origin}: unsupported matrix version {version}"
        )));
    }
    r.read_exact(&mut b4)?;
    let rows = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let cols = u32::from_le_bytes(b4) as usize;
    let mut raw = vec![0u8; rows * cols * 8];
    r.read_exact(&mut raw)?;
    let data: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| CoreError::Format(format!("{origin}: {e}")))
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let r = BufReader::new(File::open(path)?);
    read_matrix_from(r, &path.display().to_string())
}

/// Plain-text matrix: one row per line, comma or whitespace separated,
/// `#` comments and blank lines ignored. Errors carry 1-based line numbers.
pub fn parse_text_matrix(text: &str, origin: &str) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(|c: char| c == ',' || c.is_whitespace()) {
            if field.is_empty() {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| CoreError::Parse {
                file: origin.to_string(),
                line: lineno + 1,
                message: format!("`{field}` is not a number"),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CoreError::Parse {
                    file: origin.to_string(),
                    line: lineno + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CoreError::Parse {
            file: origin.to_string(),
            line: 0,
            message: "no data rows".to_string(),
        });
    }
    let cols = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len() / cols;
    Ok(Array2::from_shape_vec((nrows, cols), flat).expect("consistent row widths"))
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    seed: u64,
    sample_rate: f64,
    f_nominal_hz: f64,
    channels: usize,
    pmu_buses: Vec<usize>,
    normalization: Option<NormalizationSlot>,
    counts: ManifestCounts,
    records: Vec<RecordMeta>,
}

#[derive(Serialize, Deserialize)]
struct ManifestCounts {
    total: usize,
    stable: usize,
    unstable: usize,
    train: usize,
    test: usize,
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    id: String,
    label: u8,
    eta: f64,
    measured_row: usize,
    rows: usize,
    split: String,
    voltage_file: String,
    angle_file: String,
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("samples"))?;
    std::fs::create_dir_all(dir.join("angles"))?;
    let mut records = Vec::with_capacity(ds.samples.len());
    let train_set: std::collections::HashSet<usize> = ds.train_idx.iter().cloned().collect();
    for (i, s) in ds.samples.iter().enumerate() {
        let voltage_file = format!("samples/{}.tsm", s.scenario_id);
        let angle_file = format!("angles/{}.tsm", s.scenario_id);
        write_matrix(&dir.join(&voltage_file), &s.voltages)?;
        write_matrix(&dir.join(&angle_file), &s.rotor_angles)?;
        records.push(RecordMeta {
            id: s.scenario_id.clone(),
            label: s.label,
            eta: s.eta,
            measured_row: s.measured_row,
            rows: s.voltages.nrows(),
            split: if train_set.contains(&i) { "train".into() } else { "test".into() },
            voltage_file,
            angle_file,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: ds.seed,
        sample_rate: ds.sample_rate,
        f_nominal_hz: ds.f_nominal_hz,
        channels: ds.channels(),
        pmu_buses: ds.pmu_buses.clone(),
        normalization: ds.normalization.clone(),
        counts: ManifestCounts {
            total: ds.samples.len(),
            stable: ds.samples.iter().filter(|s| s.label == 1).count(),
            unstable: ds.samples.iter().filter(|s| s.label == 0).count(),
            train: ds.train_idx.len(),
            test: ds.test_idx.len(),
        },
        records,
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)
        .map_err(|e| CoreError::Format(format!("manifest: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
        .map_err(|e| CoreError::Format(format!("{}: {e}", manifest_path.display())))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(CoreError::Format(format!(
            "{}: unsupported manifest version {}",
            manifest_path.display(),
            manifest.version
        )));
    }
    let mut samples = Vec::with_capacity(manifest.records.len());
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (i, rec) in manifest.records.iter().enumerate() {
        let voltages = read_matrix(&dir.join(&rec.voltage_file))?;
        let rotor_angles = read_matrix(&dir.join(&rec.angle_file))?;
        if rec.split == "train" {
            train_idx.push(i);
        } else {
            test_idx.push(i);
        }
        samples.push(TransientSample {
            voltages,
            rotor_angles,
            eta: rec.eta,
            label: rec.label,
            scenario_id: rec.id.clone(),
            measured_row: rec.measured_row,
        });
    }
    Ok(Dataset {
        samples,
        train_idx,
        test_idx,
        pmu_buses: manifest.pmu_buses,
        sample_rate: manifest.sample_rate,
        f_nominal_hz: manifest.f_nominal_hz,
        seed: manifest.seed,
        normalization: manifest.normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn small_case(per_class: usize) -> CaseFile {
        CaseFile::from_str_validated(
            &format!(
                r#"
f_nominal_hz = 60.0

[[bus]]
id = 1

[[bus]]
id = 2

[[bus]]
id = 3
load_p = 1.0
load_q = 0.3

[[branch]]
from = 1
to = 3
x = 0.2

[[branch]]
from = 2
to = 3
x = 0.25

[[machine]]
bus = 1
inertia = 5.0
damping = 1.0
xd_transient = 0.1
voltage_setpoint = 1.02
slack = true

[[machine]]
bus = 2
inertia = 3.0
damping = 1.0
xd_transient = 0.12
dispatch_p = 0.5
voltage_setpoint = 1.02

[defaults]
horizon = 2.5
fault_start = 0.1

[grid]
loadings = [1.0, 1.1]
fault_buses = [3]
fault_lines = [{{ from = 2, to = 3 }}]
line_positions = [0.5]
per_class = {per_class}
seed = 11
"#
            ),
            "inline",
        )
        .unwrap()
    }

    #[test]
    fn generated_dataset_is_balanced_and_split() {
        let case = small_case(5);
        let ds = generate_dataset(&case, None, None).unwrap();
        assert_eq!(ds.samples.len(), 10);
        assert_eq!(ds.samples.iter().filter(|s| s.label == 1).count(), 5);
        assert_eq!(ds.samples.iter().filter(|s| s.label == 0).count(), 5);
        // 80 % of 10 = 8 train / 2 test, class-balanced
        assert_eq!(ds.train_idx.len(), 8);
        assert_eq!(ds.test_idx.len(), 2);
        assert_eq!(ds.count_label(&ds.train_idx, 1), 4);
        assert_eq!(ds.count_label(&ds.test_idx, 1), 1);
        // labels always agree with the index sign
        for s in &ds.samples {
            assert_eq!(s.label == 1, s.eta > 0.0);
            assert!(s.voltages.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn same_seed_reproduces_identical_samples() {
        let case = small_case(3);
        let a = generate_dataset(&case, Some(5), None).unwrap();
        let b = generate_dataset(&case, Some(5), None).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (x, y) in a.samples.iter().zip(b.samples.iter()) {
            assert_eq!(x.scenario_id, y.scenario_id);
            assert_eq!(x.voltages, y.voltages);
            assert_eq!(x.eta.to_bits(), y.eta.to_bits());
        }
        assert_eq!(a.train_idx, b.train_idx);
    }

    #[test]
    fn impossible_balance_names_the_deficient_class() {
        let mut case = small_case(4);
        // durations capped so low that nothing goes unstable
        case.grid.duration_max_cycles = 2.0;
        case.grid.duration_min_cycles = 1.0;
        let err = generate_dataset(&case, None, None).unwrap_err();
        match err {
            CoreError::Imbalance { class, .. } => assert_eq!(class, "unstable"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn save_load_round_trips() {
        let case = small_case(3);
        let ds = generate_dataset(&case, None, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.samples.len(), ds.samples.len());
        assert_eq!(back.train_idx, ds.train_idx);
        assert_eq!(back.test_idx, ds.test_idx);
        for (a, b) in ds.samples.iter().zip(back.samples.iter()) {
            assert_eq!(a.voltages, b.voltages);
            assert_eq!(a.rotor_angles, b.rotor_angles);
            assert_eq!(a.measured_row, b.measured_row);
        }
    }

    #[test]
    fn noise_hits_requested_snr() {
        // 100k-row unit-power channel, 60 dB request
        let rows = 100_000;
        let voltages = Array2::from_elem((rows, 1), 1.0);
        let noisy = inject_noise(&voltages, 60.0, 42);
        let p_noise = noisy
            .column(0)
            .iter()
            .map(|v| (v - 1.0) * (v - 1.0))
            .sum::<f64>()
            / rows as f64;
        let snr = 10.0 * (1.0 / p_noise).log10();
        assert!((snr - 60.0).abs() < 0.5, "empirical snr {snr}");
    }

    #[test]
    fn infinite_snr_is_identity() {
        let voltages = array![[0.9, 1.1], [1.0, 0.95]];
        let noisy = inject_noise(&voltages, f64::INFINITY, 7);
        assert_eq!(noisy, voltages);
    }

    #[test]
    fn unit_power_channel_noise_variance_matches_definition() {
        // 10^(50/10) = 1e5 → variance 1e-5 at unit power
        let rows = 200_000;
        let voltages = Array2::from_elem((rows, 1), 1.0);
        let noisy = inject_noise(&voltages, 50.0, 3);
        let var = noisy
            .column(0)
            .iter()
            .map(|v| (v - 1.0) * (v - 1.0))
            .sum::<f64>()
            / rows as f64;
        assert_abs_diff_eq!(var, 1e-5, epsilon = 2e-7);
    }

    #[test]
    fn text_matrix_errors_carry_line_numbers() {
        let err = parse_text_matrix("1.0, 2.0\n1.0, oops\n", "sample.csv").unwrap_err();
        match err {
            CoreError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
        let m = parse_text_matrix("# header\n1.0 2.0\n3.0 4.0\n", "ok.csv").unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn eta_histogram_bins_cover_range() {
        let h = eta_histogram(vec![-1.0, -0.95, 0.0, 0.5, 1.0], 4);
        assert_eq!(h.iter().sum::<usize>(), 5);
        assert_eq!(h[0], 2);
        assert_eq!(h[3], 2);
    }
}

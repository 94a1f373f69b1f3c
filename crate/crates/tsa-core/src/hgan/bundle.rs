//! Model bundle directory: a JSON manifest, one parameter file per level,
//! and one metrics log per level. Loaders reject unknown versions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{EpisodeRecord, LevelLog};
use super::{HganConfig, HganModel, Normalization};
use crate::error::{CoreError, Result};
use crate::gan::{GanLevel, StepMetrics};
use crate::nn::tensor_file::{read_tensors, write_tensors};

const BUNDLE_VERSION: u32 = 1;
const METRICS_HEADER: &str =
    "episode,cross_entropy,squared_error,adversarial,d_loss,d_real,d_fake,accuracy";

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    version: u32,
    levels: usize,
    channels: usize,
    seed: u64,
    config: HganConfig,
    normalization: Normalization,
}

fn level_params_file(k: usize) -> String {
    format!("level_{k}.tsp")
}

fn level_metrics_file(k: usize) -> String {
    format!("level_{k}.metrics.csv")
}

pub fn write_manifest(model: &HganModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = BundleManifest {
        version: BUNDLE_VERSION,
        levels: model.config.levels,
        channels: model.channels(),
        seed: model.seed,
        config: model.config.clone(),
        normalization: model.normalization.clone(),
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)
        .map_err(|e| CoreError::Format(format!("bundle manifest: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Checkpoint one level (parameters + metrics log) into the bundle.
pub fn save_level(dir: &Path, level: &GanLevel, log: &LevelLog) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_tensors(&dir.join(level_params_file(level.index)), &level.to_tensors())?;
    let mut w = BufWriter::new(File::create(dir.join(level_metrics_file(level.index)))?);
    writeln!(w, "{METRICS_HEADER}")?;
    for rec in log {
        let m = &rec.metrics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            rec.episode,
            m.cross_entropy,
            m.squared_error,
            m.adversarial,
            m.d_loss,
            m.d_real,
            m.d_fake,
            m.accuracy
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_bundle(model: &HganModel, logs: &[LevelLog], dir: &Path) -> Result<()> {
    write_manifest(model, dir)?;
    for (level, log) in model.levels.iter().zip(logs) {
        save_level(dir, level, log)?;
    }
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<HganModel> {
    let manifest_path = dir.join("manifest.json");
    let manifest: BundleManifest =
        serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))
            .map_err(|e| CoreError::Format(format!("{}: {e}", manifest_path.display())))?;
    if manifest.version != BUNDLE_VERSION {
        return Err(CoreError::Format(format!(
            "{}: unsupported bundle version {}",
            manifest_path.display(),
            manifest.version
        )));
    }
    let mut levels = Vec::with_capacity(manifest.levels);
    for k in 1..=manifest.levels {
        let path = dir.join(level_params_file(k));
        let entries = read_tensors(&path)?;
        levels.push(GanLevel::from_tensors(
            k,
            manifest.channels,
            manifest.config.hidden,
            manifest.config.gru_layers,
            entries,
            &path.display().to_string(),
        )?);
    }
    Ok(HganModel {
        levels,
        normalization: manifest.normalization,
        config: manifest.config,
        seed: manifest.seed,
    })
}

/// Metrics log for one level, parsed back from the bundle.
pub fn load_level_log(dir: &Path, k: usize) -> Result<LevelLog> {
    let path = dir.join(level_metrics_file(k));
    let origin = path.display().to_string();
    let reader = BufReader::new(File::open(&path)?);
    let mut log = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line != METRICS_HEADER {
                return Err(CoreError::Format(format!("{origin}: unexpected header")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(CoreError::Parse {
                file: origin.clone(),
                line: lineno + 1,
                message: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| CoreError::Parse {
                file: origin.clone(),
                line: lineno + 1,
                message: format!("`{s}` is not a number"),
            })
        };
        log.push(EpisodeRecord {
            episode: fields[0].parse().map_err(|_| CoreError::Parse {
                file: origin.clone(),
                line: lineno + 1,
                message: format!("`{}` is not an episode index", fields[0]),
            })?,
            metrics: StepMetrics {
                cross_entropy: parse(fields[1])?,
                squared_error: parse(fields[2])?,
                adversarial: parse(fields[3])?,
                d_loss: parse(fields[4])?,
                d_real: parse(fields[5])?,
                d_fake: parse(fields[6])?,
                accuracy: parse(fields[7])?,
            },
        });
    }
    Ok(log)
}

/// Count the level parameter files already present (resume support).
pub fn completed_levels(dir: &Path, max_levels: usize) -> usize {
    (1..=max_levels)
        .take_while(|&k| dir.join(level_params_file(k)).exists())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn tiny_model() -> HganModel {
        let mut rng = ChaCha20Rng::seed_from_u64(50);
        let config = HganConfig {
            levels: 2,
            hidden: 4,
            ..HganConfig::default()
        };
        HganModel {
            levels: (1..=2).map(|k| GanLevel::init(k, 2, 4, 2, &mut rng)).collect(),
            normalization: Normalization {
                min: vec![0.7, 0.75],
                max: vec![1.1, 1.2],
                constant_channels: vec![],
            },
            config,
            seed: 123,
        }
    }

    fn fake_log() -> LevelLog {
        (0..5)
            .map(|episode| EpisodeRecord {
                episode,
                metrics: StepMetrics {
                    cross_entropy: 0.7 - episode as f64 * 0.01,
                    squared_error: 0.19,
                    adversarial: -0.69,
                    d_loss: 1.38,
                    d_real: 0.5,
                    d_fake: 0.5,
                    accuracy: 0.5,
                },
            })
            .collect()
    }

    #[test]
    fn bundle_round_trips_and_preserves_outputs() {
        let model = tiny_model();
        let logs = vec![fake_log(), fake_log()];
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&model, &logs, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        let x = array![0.95, 1.0];
        let a = model.assess(x.view()).unwrap();
        let b = back.assess(x.view()).unwrap();
        assert_eq!(a.per_level_probabilities, b.per_level_probabilities);
        assert_eq!(a.final_label, b.final_label);

        let log = load_level_log(dir.path(), 1).unwrap();
        assert_eq!(log.len(), 5);
        assert_eq!(log[4].episode, 4);
        assert_eq!(completed_levels(dir.path(), 2), 2);
        assert_eq!(completed_levels(dir.path(), 5), 2);
    }

    #[test]
    fn manifest_version_is_enforced() {
        let model = tiny_model();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&model, &[fake_log(), fake_log()], dir.path()).unwrap();
        let path = dir.path().join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 99");
        std::fs::write(&path, text).unwrap();
        let err = load_bundle(dir.path()).err().unwrap();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn repeated_saves_are_byte_identical() {
        let model = tiny_model();
        let logs = vec![fake_log(), fake_log()];
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        save_bundle(&model, &logs, d1.path()).unwrap();
        save_bundle(&model, &logs, d2.path()).unwrap();
        for file in ["manifest.json", "level_1.tsp", "level_2.tsp", "level_1.metrics.csv"] {
            let a = std::fs::read(d1.path().join(file)).unwrap();
            let b = std::fs::read(d2.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs");
        }
    }
}

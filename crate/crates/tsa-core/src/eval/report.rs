//! Delimited report files: confusion tables, sweep tables, per-level loss
//! curves for plotting, timing, and the baseline row. All writers are
//! deterministic in their inputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::metrics::EvalResult;
use super::sweep::SweepReport;
use crate::error::Result;
use crate::hgan::LevelLog;

#[derive(Debug, Clone, Copy)]
pub struct BaselineResult {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub depth: usize,
    pub nodes: usize,
}

#[derive(Default)]
pub struct ReportInputs<'a> {
    pub eval: Option<&'a EvalResult>,
    pub noise: Option<&'a SweepReport>,
    pub placement: Option<&'a SweepReport>,
    pub count: Option<&'a SweepReport>,
    pub baseline: Option<&'a BaselineResult>,
    pub loss_logs: Option<&'a [LevelLog]>,
}

fn open(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_confusion(path: &Path, result: &EvalResult) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "level\ttrue_positive\tfalse_positive\ttrue_negative\tfalse_negative\taccuracy")?;
    for (k, cm) in result.per_level.iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            k + 1,
            cm.true_positive,
            cm.false_positive,
            cm.true_negative,
            cm.false_negative,
            cm.accuracy()
        )?;
    }
    let e = &result.ensemble;
    writeln!(
        w,
        "ensemble\t{}\t{}\t{}\t{}\t{}",
        e.true_positive,
        e.false_positive,
        e.true_negative,
        e.false_negative,
        e.accuracy()
    )?;
    w.flush()?;
    Ok(())
}

pub fn write_timing(path: &Path, result: &EvalResult) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "mean_assess_seconds\tresponse_cycles")?;
    writeln!(w, "{}\t{}", result.mean_assess_seconds, result.response_cycles)?;
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, report: &SweepReport) -> Result<()> {
    let mut w = open(path)?;
    let levels = report.points.first().map_or(0, |p| p.per_level.len());
    let mut header = format!("{}", report.axis.name());
    for k in 1..=levels {
        header.push_str(&format!("\tlevel{k}_mean\tlevel{k}_min\tlevel{k}_max"));
    }
    header.push_str("\tensemble_mean\tensemble_min\tensemble_max\terror");
    writeln!(w, "{header}")?;
    for p in &report.points {
        let mut line = p.setting.clone();
        for band in &p.per_level {
            line.push_str(&format!("\t{}\t{}\t{}", band.mean, band.min, band.max));
        }
        line.push_str(&format!(
            "\t{}\t{}\t{}\t{}",
            p.ensemble.mean,
            p.ensemble.min,
            p.ensemble.max,
            p.error.as_deref().unwrap_or("")
        ));
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_baseline(path: &Path, baseline: &BaselineResult) -> Result<()> {
    let mut w = open(path)?;
    writeln!(w, "method\ttrain_accuracy\ttest_accuracy\tdepth\tnodes")?;
    writeln!(
        w,
        "decision_tree\t{}\t{}\t{}\t{}",
        baseline.train_accuracy, baseline.test_accuracy, baseline.depth, baseline.nodes
    )?;
    w.flush()?;
    Ok(())
}

/// One series file per level: episode vs. the two headline loss components.
pub fn write_loss_curves(dir: &Path, logs: &[LevelLog]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (k, log) in logs.iter().enumerate() {
        let path = dir.join(format!("level_{}_curves.tsv", k + 1));
        let mut w = open(&path)?;
        writeln!(w, "episode\tcross_entropy\tsquared_error\tadversarial\td_loss")?;
        for rec in log {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                rec.episode,
                rec.metrics.cross_entropy,
                rec.metrics.squared_error,
                rec.metrics.adversarial,
                rec.metrics.d_loss
            )?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Write every requested section into `dir`; returns the files written.
pub fn emit_report(inputs: &ReportInputs, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let Some(eval) = inputs.eval {
        let path = dir.join("confusion.tsv");
        write_confusion(&path, eval)?;
        written.push(path);
        let path = dir.join("timing.tsv");
        write_timing(&path, eval)?;
        written.push(path);
    }
    if let Some(noise) = inputs.noise {
        let path = dir.join("noise_sweep.tsv");
        write_sweep(&path, noise)?;
        written.push(path);
    }
    if let Some(placement) = inputs.placement {
        let path = dir.join("placement_sweep.tsv");
        write_sweep(&path, placement)?;
        written.push(path);
    }
    if let Some(count) = inputs.count {
        let path = dir.join("count_sweep.tsv");
        write_sweep(&path, count)?;
        written.push(path);
    }
    if let Some(baseline) = inputs.baseline {
        let path = dir.join("baseline.tsv");
        write_baseline(&path, baseline)?;
        written.push(path);
    }
    if let Some(logs) = inputs.loss_logs {
        written.extend(write_loss_curves(dir, logs)?);
    }
    Ok(written)
}

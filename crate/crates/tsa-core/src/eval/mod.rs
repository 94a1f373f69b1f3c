//! Evaluation harness: confusion matrices, noise and placement sweeps, the
//! decision-tree baseline, and delimited report files.

pub mod metrics;
pub mod report;
pub mod sweep;
pub mod tree;

pub use metrics::{evaluate, ConfusionMatrix, EvalResult};
pub use report::{emit_report, BaselineResult, ReportInputs};
pub use sweep::{mask_channels, noise_sweep, placement_sweep, AccuracyBand, SweepAxis, SweepPoint, SweepReport};
pub use tree::{predict_tree, train_tree, tree_depth, TreeConfig, TreeNode};

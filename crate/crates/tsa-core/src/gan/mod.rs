//! One hierarchy level: a conditional generator with prediction and
//! stability heads, a GRU discriminator scoring real against predicted
//! samples, and the adversarial training step that updates both.

pub mod level;
pub mod losses;
pub mod nets;

pub use level::{train_level_step, train_vanilla_step, GanLevel, LevelBatch, StepMetrics, TrainOptions};
pub use losses::{discriminator_loss, generator_loss, GeneratorLossBreakdown};
pub use nets::{DiscriminatorNet, GenForward, GeneratorNet};

//! The transformer victim classifier and its `[BLK]`-augmented fine-tuning.

mod model;
mod train;

pub use model::{embedding_row_mut, ClassifierConfig, ClassifierModel, ForwardCache, ForwardOutput, Objective};
pub use train::{accuracy, blk_augment, continue_training, finetune, finetune_with_stats, mlm_mask, TrainConfig, TrainStats};

//! Training orchestration: pretraining, retraining on remain data,
//! unlearning from the forget set alone, and checkpoint persistence.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, MAGIC, VERSION};
pub use train::{
    finetune_baseline, pretrain, retrain, unlearn, AuditEntry, EpochRecord, TrainConfig, TrainRun,
    UnlearnConfig,
};

//! Encoder pretraining, the bi-level training schedule, fine-tuning and
//! fine-tune site selection.

mod config;
mod log;
mod optim;
mod run;
mod step;

pub use self::config::{config_hash, Schedule, TrainConfig};
pub use self::log::{LogRow, Stage, TrainLog, LOG_COLUMNS};
pub use self::optim::{Optimizer, OptimizerKind};
pub use self::run::{effective_spec, finetune, make_batches, pretrain_encoder, train, train_with_hook};
pub use crate::geo::{select_finetune_env, FinetuneStrategy};

//! Early-stopped training and the multi-run evaluation protocol.

mod dataset;
mod early_stop;
mod learner;
mod protocol;

pub use dataset::{center_crop, crop_for, random_crop, Dataset, Example};
pub use early_stop::{fit, EarlyStopping, EpochRecord, FitSummary, Learner, StopRule};
pub use learner::{predict_examples, score_columns, targets_for, CropSpec, NetLearner, Predictions, Scores, TrainingConfig};
pub use protocol::{
    fit_stage2, mid2e_protocol, predict_a2mid2e, protocol_splits, run_protocol, train_a2mid2e, train_network, ProtocolConfig,
    ProtocolData, ProtocolResult, RunResult, Scheme, splits_for_population,
};

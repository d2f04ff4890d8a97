use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// Something trainable one epoch at a time with a restorable best state.
pub trait Learner {
    type Snapshot;

    /// Runs one training epoch and returns its mean training loss.
    fn train_epoch(&mut self, epoch: usize) -> Result<f64>;
    fn validation_loss(&mut self) -> Result<f64>;
    fn snapshot(&self) -> Self::Snapshot;
    fn restore(&mut self, snapshot: Self::Snapshot);
    fn learning_rate(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub patience: usize,
    pub max_epochs: usize,
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    /// Epochs actually run.
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Tracks the best validation loss; a loss counts as better only if strictly lower.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0 }
    }

    /// Records `loss` for 1-based `epoch`; returns whether it improved on the best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            true
        } else {
            false
        }
    }

    /// True once `patience` epochs have passed without improvement.
    pub fn should_stop(&self, epoch: usize) -> bool {
        epoch - self.best_epoch >= self.patience
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// Trains until `max_epochs` or until validation loss stalls for `patience`
/// epochs, then restores the best-validation state.
pub fn fit<L: Learner>(learner: &mut L, rule: StopRule, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<FitSummary> {
    if rule.patience == 0 || rule.max_epochs == 0 {
        return Err(Error::Config("patience and max_epochs must be at least 1".into()));
    }
    let mut stop = EarlyStopping::new(rule.patience);
    let mut best_state = None;
    let mut history = Vec::new();
    let mut epochs = 0;
    for epoch in 1..=rule.max_epochs {
        let train_loss = learner.train_epoch(epoch)?;
        let val_loss = learner.validation_loss()?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "epoch {epoch}: train loss {train_loss}, validation loss {val_loss}"
            )));
        }
        let record = EpochRecord { epoch, train_loss, val_loss, lr: learner.learning_rate() };
        on_epoch(&record);
        history.push(record);
        epochs = epoch;
        if stop.observe(epoch, val_loss) {
            best_state = Some(learner.snapshot());
        }
        if stop.should_stop(epoch) {
            break;
        }
    }
    if let Some(s) = best_state {
        learner.restore(s);
    }
    let (best_epoch, best_val_loss) = stop.best();
    Ok(FitSummary { epochs, best_epoch, best_val_loss, history })
}

//! Epoch-dependent neighbor count for the localized repulsion loss.
//!
//! The count starts at the batch size, shrinks linearly once every
//! `step_size` epochs and bottoms out at `nn_final`. The decrement is
//! fractional; the count is floored after subtraction and then clamped to
//! `[nn_final, batch_size - 1]`, since an anchor never has itself as a
//! neighbor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub batch_size: usize,
    pub nn_final: usize,
    pub step_size: usize,
    pub max_epochs: usize,
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        let ScheduleConfig {
            batch_size,
            nn_final,
            step_size,
            max_epochs,
        } = *self;
        if batch_size < 2 {
            return Err(Error::Config(format!(
                "batch size must be at least 2, got {batch_size}"
            )));
        }
        if nn_final < 1 || nn_final > batch_size - 1 {
            return Err(Error::Config(format!(
                "final neighbor count must lie in [1, {}], got {nn_final}",
                batch_size - 1
            )));
        }
        if step_size < 1 || max_epochs < 1 {
            return Err(Error::Config("step size and epoch count must be at least 1".into()));
        }
        if step_size >= max_epochs {
            return Err(Error::Config(format!(
                "neighbor step size {step_size} must be smaller than the epoch count {max_epochs}"
            )));
        }
        if self.total_steps() <= 1 {
            return Err(Error::Config(format!(
                "{max_epochs} epochs with step size {step_size} give a single schedule step; \
                 the per-step decrement is undefined"
            )));
        }
        Ok(())
    }

    fn total_steps(&self) -> usize {
        self.max_epochs / self.step_size
    }
}

/// Neighbor count to use during `epoch` (zero-based).
pub fn neighbors_at_epoch(config: &ScheduleConfig, epoch: usize) -> Result<usize> {
    config.validate()?;
    let steps_done = (epoch / config.step_size) as i128;
    let span = (config.total_steps() - 1) as i128;
    let batch = config.batch_size as i128;
    let drop = (config.batch_size - config.nn_final) as i128;
    // floor(batch - drop * steps_done / span), in exact integer arithmetic.
    let value = (batch * span - drop * steps_done).div_euclid(span);
    let lo = config.nn_final as i128;
    let hi = batch - 1;
    Ok(value.clamp(lo, hi) as usize)
}

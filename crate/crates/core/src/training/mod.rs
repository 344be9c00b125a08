//! Clamped velocity/slip objective, exact gradients and the optimizer loop.

mod adam;
mod backward;
mod fit;
mod loss;

pub use adam::Adam;
pub use backward::{backward, evaluate_batch, BatchEval, Example};
pub use fit::{
    checkpoint_name, fit, write_curve_csv, EpochRecord, FitOutcome, TrainConfig, Trainer,
};
pub use loss::{compute_losses, losses_from_values, LossBreakdown};

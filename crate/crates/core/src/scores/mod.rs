//! Per-image label quality scores. Every score lies in `[0, 1]`; lower means
//! the annotation is more likely wrong.

mod agreement;
mod likelihood;
mod tccp;

pub use agreement::{ccp, iou};
pub use likelihood::{cil, softmin, SoftminParams, DEFAULT_SOFTMIN_TAU};
pub use tccp::{tccp, TccpMode, TccpParams};

//! Multi-instance attention model for long-tail music genre classification:
//! audio feature extraction, album-level bag construction, a small dense
//! numeric core with hand-written gradients, training and evaluation.

pub mod dataset;
pub mod dsp;
pub mod evaluation;
pub mod formats;
pub mod model;
pub mod numeric;
pub mod training;

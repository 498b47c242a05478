//! Annotation-free evaluation of multimodal models.
//!
//! A describer model turns an image into text, a generator turns the text back
//! into an image, and the drift of the regenerated images away from the seed
//! is scored with GC@T (embedding cosine) and GC_FID@T (Fréchet distance).

pub mod backends;
pub mod digest;
pub mod imaging;
pub mod metrics;
pub mod model;
pub mod storage;
pub mod dataset;
pub mod fixtures;
pub mod orchestrator;
pub mod report;
pub mod pipeline;

//! Extraction of structured measurements from cardiac MR reports, with
//! per-field confidence scoring and a human review queue.

pub mod confidence;
pub mod eval;
pub mod gateway;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod triage;

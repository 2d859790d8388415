//! Criterion benches for the main pipelines; see `benches/pipelines.rs`.

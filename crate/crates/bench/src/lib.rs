//! Benchmarks for the escalade pipeline; see `benches/pipeline.rs`.
//!
//! Run with `cargo bench -p escalade-bench`.

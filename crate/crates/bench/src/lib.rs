//! Criterion benchmarks for the simulator; see `benches/dynamics.rs`.

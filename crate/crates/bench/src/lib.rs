//! Criterion benchmarks for the key-rate pipeline live under `benches/`.

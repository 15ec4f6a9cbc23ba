//! Criterion benchmarks for the `marktop` kernels; see `benches/kernels.rs`.

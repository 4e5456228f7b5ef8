//! Criterion benchmarks for the step kernels and the strong-error harness; see `benches/`.

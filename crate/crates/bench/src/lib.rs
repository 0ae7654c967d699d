//! Criterion benchmarks for the manifestscope pipeline; see `benches/`.

//! Criterion benchmarks for the model, map synthesis and fitting; see `benches/`.

//! Criterion benchmarks for the `cordes-core` solvers; see `benches/`.

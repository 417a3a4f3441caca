//! Criterion benchmarks for the simulator and learner hot paths; see `benches/`.

//! Criterion benchmarks; run with `cargo bench -p birthrace-bench`.

//! Criterion benchmarks for rasterization, blurring, makeup application and
//! metric computation live in `benches/`; run them with `cargo bench -p facemt-bench`.

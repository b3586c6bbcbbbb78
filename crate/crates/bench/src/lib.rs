//! Criterion benchmarks for the summarizer hot paths live in `benches/`.

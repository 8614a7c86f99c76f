//! Criterion benchmarks for the cut pipeline and the capacity models.

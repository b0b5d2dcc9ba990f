//! Benchmark-only crate; the kernels live in qplab-core.

//! Benchmark-only crate: see `benches/geometry.rs`. The measured code all
//! lives in `riccibound-core`; this crate exists so benchmark dependencies
//! stay out of the library's tree.

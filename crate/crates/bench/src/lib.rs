//! Benchmark-only crate; see benches/mesh.rs.

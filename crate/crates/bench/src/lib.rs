//! Criterion benchmarks for the kernel routines live in `benches/`.

use lumpvem::{generate_mesh, Mesh, MeshFamily, MeshParams};

/// Mesh used by the benchmarks at resolution `n`.
pub fn bench_mesh(family: MeshFamily, n: usize) -> Mesh {
    generate_mesh(&MeshParams::new(family, n).distortion(0.3).lloyd_iters(5).seed(7)).expect("benchmark mesh")
}

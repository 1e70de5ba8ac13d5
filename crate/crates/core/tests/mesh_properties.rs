use std::collections::{BTreeMap, BTreeSet};

use lumpvem::mesh::io::{parse_mesh, write_mesh_string};
use lumpvem::mesh::signed_area;
use lumpvem::{generate_mesh, Mesh, MeshFamily, MeshParams};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = MeshFamily> {
    prop_oneof![
        Just(MeshFamily::DistortedQuad),
        Just(MeshFamily::SerendipityQ8),
        Just(MeshFamily::Voronoi),
    ]
}

fn params() -> impl Strategy<Value = MeshParams> {
    (family(), 2usize..14, 0.0f64..0.45, 0usize..6, any::<u64>())
        .prop_map(|(f, n, d, l, s)| MeshParams::new(f, n).distortion(d).lloyd_iters(l).seed(s))
}

fn edge_counts(mesh: &Mesh) -> BTreeMap<(usize, usize), usize> {
    let mut counts = BTreeMap::new();
    for c in mesh.cells() {
        let ids = &c.vertex_ids;
        for i in 0..ids.len() {
            let (a, b) = (ids[i], ids[(i + 1) % ids.len()]);
            *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    counts
}

fn boundary_is_one_loop(edges: &[(usize, usize)]) -> bool {
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    if adj.values().any(|n| n.len() != 2) {
        return false;
    }
    let start = edges[0].0;
    let (mut prev, mut cur) = (start, adj[&start][0]);
    let mut seen = BTreeSet::from([start]);
    while cur != start {
        if !seen.insert(cur) {
            return false;
        }
        let next = if adj[&cur][0] == prev { adj[&cur][1] } else { adj[&cur][0] };
        prev = cur;
        cur = next;
    }
    seen.len() == adj.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_meshes_partition_the_square(p in params()) {
        let mesh = generate_mesh(&p).unwrap();
        let total: f64 = (0..mesh.n_cells()).map(|c| mesh.geometry(c).area).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "total area {}", total);
        for c in 0..mesh.n_cells() {
            prop_assert!(signed_area(&mesh.cell_points(c)) > 0.0);
        }
    }

    #[test]
    fn edges_are_shared_by_at_most_two_cells(p in params()) {
        let mesh = generate_mesh(&p).unwrap();
        let counts = edge_counts(&mesh);
        prop_assert!(counts.values().all(|&c| c == 1 || c == 2));
        let boundary: Vec<(usize, usize)> = counts.iter().filter(|(_, &c)| c == 1).map(|(&e, _)| e).collect();
        prop_assert!(boundary_is_one_loop(&boundary));
        prop_assert_eq!(boundary.len(), mesh.boundary_edges().count());
        for (a, b) in boundary {
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            let on_side = (p.x == q.x && (p.x == 0.0 || p.x == 1.0)) || (p.y == q.y && (p.y == 0.0 || p.y == 1.0));
            prop_assert!(on_side, "boundary edge {:?}-{:?} is not on ∂Ω", p, q);
        }
    }

    #[test]
    fn io_round_trip_preserves_mesh(p in params()) {
        let mesh = generate_mesh(&p).unwrap();
        let text = write_mesh_string(&mesh);
        let back = parse_mesh(&text, std::path::Path::new("round-trip")).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.cells(), mesh.cells());
        for c in 0..back.n_cells() {
            prop_assert!(signed_area(&back.cell_points(c)) > 0.0);
        }
        prop_assert_eq!(write_mesh_string(&back), text);
    }

    #[test]
    fn generation_is_deterministic(p in params()) {
        let a = write_mesh_string(&generate_mesh(&p).unwrap());
        let b = write_mesh_string(&generate_mesh(&p).unwrap());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn seeds_change_random_families() {
    for family in [MeshFamily::DistortedQuad, MeshFamily::Voronoi] {
        let a = write_mesh_string(&generate_mesh(&MeshParams::new(family, 6).distortion(0.3).seed(1)).unwrap());
        let b = write_mesh_string(&generate_mesh(&MeshParams::new(family, 6).distortion(0.3).seed(2)).unwrap());
        assert_ne!(a, b, "{family}");
    }
}

#[test]
fn written_file_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vem");
    let mesh = generate_mesh(&MeshParams::new(MeshFamily::SerendipityQ8, 5)).unwrap();
    lumpvem::mesh::io::write_mesh(&mesh, &path).unwrap();
    let back = lumpvem::mesh::io::read_mesh(&path).unwrap();
    assert_eq!(back.cells(), mesh.cells());
    assert!(lumpvem::mesh::io::read_mesh(dir.path().join("missing.vem")).is_err());
}

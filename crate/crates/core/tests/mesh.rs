mod common;

use common::*;
use eit_afem::interp::check_nested;
use eit_afem::mesh::{build_initial_mesh, Element, ElectrodeLayout, FaceKind, Mesh, Rectangle};
use eit_afem::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_square() -> Rectangle {
    Rectangle::new(0.0, 0.0, 1.0, 1.0).unwrap()
}

/// Faces reported by the mesh agree with a brute-force edge count and their
/// tags agree with a geometric electrode lookup.
fn assert_faces_match_oracle(mesh: &Mesh) {
    let brute = brute_edges(mesh);
    assert_eq!(brute.len(), mesh.faces().len());
    for f in mesh.faces() {
        let (a, b) = (f.vertices[0], f.vertices[1]);
        let elems = &brute[&(a.min(b), a.max(b))];
        match f.right {
            Some(r) => {
                assert_eq!(elems.len(), 2);
                assert!(elems.contains(&f.left) && elems.contains(&r));
                assert_eq!(f.kind, FaceKind::Interior);
            }
            None => {
                assert_eq!(elems, &vec![f.left]);
                let expect = match edge_electrode(mesh, a, b) {
                    Some(l) => FaceKind::Electrode(l),
                    None => FaceKind::Insulated,
                };
                assert_eq!(f.kind, expect);
            }
        }
        // normal points away from the left element's centroid
        let c = mesh.centroid(f.left);
        let p = mesh.vertex(a);
        assert!((p[0] - c[0]) * f.normal[0] + (p[1] - c[1]) * f.normal[1] > 0.0);
        assert!((f.normal[0].hypot(f.normal[1]) - 1.0).abs() < 1e-14);
    }
}

#[test]
fn two_by_two_unit_square_counts() {
    let m = build_initial_mesh(unit_square(), ElectrodeLayout::empty(), 2).unwrap();
    assert_eq!(m.num_elements(), 8);
    assert_eq!(m.faces().len(), 16);
    assert_eq!(m.faces().iter().filter(|f| f.is_boundary()).count(), 8);
    assert_faces_match_oracle(&m);
    m.check_conforming().unwrap();
}

#[test]
fn paper_layout_has_sixteen_disjoint_electrode_groups() {
    let m = paper_mesh();
    assert_eq!(m.dofs(), 289);
    assert_faces_match_oracle(&m);
    let mut seen = std::collections::HashSet::new();
    for l in 0..16 {
        let faces: Vec<_> = m.electrode_faces(l).collect();
        assert!(!faces.is_empty());
        let len: f64 = faces.iter().map(|f| f.length).sum();
        assert!((len - 0.25).abs() < 1e-12, "electrode {l} covers {len}");
        for f in faces {
            for v in f.vertices {
                seen.insert((l, v));
            }
        }
    }
    // no vertex is shared by two electrodes
    let mut owner = std::collections::HashMap::new();
    for (l, v) in seen {
        assert!(owner.insert(v, l).is_none(), "vertex {v} on two electrodes");
    }
    for t in 0..m.num_elements() {
        assert!(m.electrodes_touching(t).len() <= 1);
    }
}

#[test]
fn empty_layout_is_insulated() {
    let m = build_initial_mesh(Rectangle::symmetric_square(), ElectrodeLayout::empty(), 3).unwrap();
    assert!(m.faces().iter().filter(|f| f.is_boundary()).all(|f| f.kind == FaceKind::Insulated));
}

#[test]
fn coarse_mesh_is_a_resolution_error() {
    let r = build_initial_mesh(Rectangle::symmetric_square(), paper_layout(), 8);
    assert!(matches!(r, Err(Error::Resolution(_))));
    let r = build_initial_mesh(Rectangle::symmetric_square(), paper_layout(), 12);
    assert!(matches!(r, Err(Error::Resolution(_))));
}

#[test]
fn overlapping_layout_rejected() {
    let r = ElectrodeLayout::new(vec![[0.0, 1.0], [0.5, 1.5]], vec![1.0, 1.0]);
    assert!(matches!(r, Err(Error::InvalidLayout(_))));
    let r = ElectrodeLayout::new(vec![[0.0, 1.0], [1.0, 1.5]], vec![1.0, 1.0]);
    assert!(matches!(r, Err(Error::InvalidLayout(_))), "touching closed arcs must be rejected");
    let r = ElectrodeLayout::new(vec![[0.0, 1.0]], vec![0.0]);
    assert!(matches!(r, Err(Error::InvalidImpedance { .. })));
}

#[test]
fn empty_marking_is_identity() {
    let m = paper_mesh();
    assert_eq!(m.refine(&[]).dump(), m.dump());
}

#[test]
fn lone_triangle_bisects_into_two() {
    // a triangle whose reference edge lies on the boundary needs no closure
    let d = unit_square();
    let m = Mesh::from_parts(
        d,
        ElectrodeLayout::empty(),
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![
            Element {
                vertices: [0, 1, 2],
                refinement_edge: 2,
                generation: 0,
            },
            Element {
                vertices: [0, 2, 3],
                refinement_edge: 0,
                generation: 0,
            },
        ],
        None,
    )
    .unwrap();
    let r = m.refine(&[0]);
    assert_eq!(r.num_elements(), 3);
    assert_eq!(r.vertex(4), [0.5, 0.0]);
    let kids: Vec<usize> = (0..3).filter(|&t| r.parent(t) == 0).collect();
    assert_eq!(kids.len(), 2);
    assert!(kids.iter().all(|&t| r.element(t).vertices.contains(&4)));
    r.check_conforming().unwrap();
}

#[test]
fn single_interior_mark_on_eight_triangle_mesh_is_conforming() {
    let m = build_initial_mesh(unit_square(), ElectrodeLayout::empty(), 2).unwrap();
    // element touching the centre but no boundary edge as reference
    for t in 0..m.num_elements() {
        let r = m.refine(&[t]);
        r.check_conforming().unwrap();
        assert_faces_match_oracle(&r);
        // no hanging nodes: every vertex lying on an edge's interior is an endpoint of it
        for &(a, b) in brute_edges(&r).keys() {
            let (pa, pb) = (r.vertex(a), r.vertex(b));
            for (v, p) in r.vertices().iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                let along = (p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1]);
                let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
                assert!(!(cross.abs() < 1e-14 && along > 1e-14 && along < len2 - 1e-14), "hanging node {v}");
            }
        }
        assert!(r.num_elements() > m.num_elements());
        let marked_children = (0..r.num_elements()).filter(|&c| r.parent(c) == t).count();
        assert!(marked_children >= 2);
    }
}

#[test]
fn element_patch_matches_pairwise_oracle() {
    let m = build_initial_mesh(unit_square(), ElectrodeLayout::empty(), 4).unwrap();
    for t in 0..m.num_elements() {
        let vt = m.element(t).vertices;
        let oracle: Vec<usize> = (0..m.num_elements())
            .filter(|&s| m.element(s).vertices.iter().any(|v| vt.contains(v)))
            .collect();
        assert_eq!(m.element_patch(t), oracle);
    }
    // on the 2×2 mesh every element meets the centre, so all patches are the whole mesh
    let small = build_initial_mesh(unit_square(), ElectrodeLayout::empty(), 2).unwrap();
    assert!((0..8).all(|t| small.element_patch(t).len() == 8));
    let sizes: Vec<usize> = (0..m.num_elements()).map(|t| m.element_patch(t).len()).collect();
    let corner = (0..m.num_elements()).find(|&t| m.element(t).vertices.contains(&0)).unwrap();
    assert!(sizes[corner] < *sizes.iter().max().unwrap());
}

#[test]
fn mesh_sizes() {
    let m = build_initial_mesh(unit_square(), ElectrodeLayout::empty(), 1).unwrap();
    for t in 0..2 {
        assert!((m.element_size(t).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }
    let unit_face = m.faces().iter().position(|f| (f.length - 1.0).abs() < 1e-15).unwrap();
    assert_eq!(m.face_size(unit_face).unwrap(), 1.0);
    let r = m.bisect_all();
    for t in 0..r.num_elements() {
        let ratio = r.element_size(t).unwrap() / m.element_size(r.parent(t)).unwrap();
        assert!((ratio - 0.5f64.sqrt()).abs() < 1e-14);
    }
}

#[test]
fn locator_agrees_with_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = paper_mesh();
    for _ in 0..3 {
        let marked: Vec<usize> = (0..m.num_elements()).filter(|_| rng.random_bool(0.2)).collect();
        m = m.refine(&marked);
    }
    let loc = m.locator();
    for _ in 0..500 {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (t, lam) = loc.locate(x).unwrap();
        let oracle = tri(&m, t).lambda(x);
        assert!(max_diff(&lam, &oracle) < 1e-12);
        assert!(lam.iter().all(|&l| l >= -1e-10));
    }
    assert!(loc.locate([1.5, 0.0]).is_none());
}

#[test]
fn dump_round_trip_is_deterministic() {
    let m = paper_mesh().refine(&[0, 5, 100]);
    let text = serde_json::to_string(&m.dump()).unwrap();
    let back = Mesh::from_dump(serde_json::from_str(&text).unwrap()).unwrap();
    assert_eq!(back.dump(), m.dump());
    assert_eq!(serde_json::to_string(&back.dump()).unwrap(), text);
}

fn nested_vertices_inside_parent(coarse: &Mesh, fine: &Mesh) {
    for t in 0..fine.num_elements() {
        let parent = tri(coarse, fine.parent(t));
        for p in fine.element_points(t) {
            assert!(parent.lambda(p).iter().all(|&l| l >= -1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_refinement_keeps_invariants(seed in any::<u64>(), rounds in 1usize..6, p in 0.05f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m0 = paper_mesh();
        let angle0 = m0.min_angle();
        let mut m = m0.clone();
        for _ in 0..rounds {
            let marked: Vec<usize> = (0..m.num_elements()).filter(|_| rng.random_bool(p)).collect();
            let next = m.refine(&marked);
            for &t in &marked {
                prop_assert!((0..next.num_elements()).filter(|&c| next.parent(c) == t).count() >= 2);
            }
            nested_vertices_inside_parent(&m, &next);
            m = next;
        }
        prop_assert!(m.check_conforming().is_ok());
        assert_faces_match_oracle(&m);
        prop_assert!(check_nested(&m0, &m).is_ok());
        prop_assert!(m.min_angle() >= 0.5 * angle0 - 1e-12);
        for t in 0..m.num_elements() {
            prop_assert!(m.electrodes_touching(t).len() <= 1);
            prop_assert!(m.area(t) > 0.0);
        }
        for l in 0..16 {
            let len: f64 = m.electrode_faces(l).map(|f| f.length).sum();
            prop_assert!((len - 0.25).abs() < 1e-12);
        }
    }
}

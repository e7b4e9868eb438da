use flat_tiler::fixtures::{self, GridSpec};
use flat_tiler::{PlanarComplex, Rules, Violation};
use proptest::prelude::*;

#[test]
fn fixture_characteristics() {
    let a = fixtures::annulus(8);
    assert!(a.validate().is_valid());
    assert_eq!((a.m(), a.euler_characteristic()), (2, 0));

    let p = fixtures::pants();
    assert!(p.validate().is_valid(), "{}", p.validate());
    assert_eq!((p.m(), p.euler_characteristic()), (3, -1));

    let five = fixtures::random_grid(&GridSpec::new(20, 18, 4, 9));
    assert!(five.validate().is_valid());
    assert_eq!((five.m(), five.euler_characteristic()), (5, -3));
}

#[test]
fn deleted_ring_edge() {
    let a = fixtures::annulus(8);
    // ring edge between middle vertices 8 and 9
    let gone = a.edge_id(8, 9).unwrap();
    let mut edges = a.edges().to_vec();
    let mut cond = a.conductance.clone();
    edges.remove(gone);
    cond.remove(gone);
    let broken = PlanarComplex::new(a.coords.clone(), edges, a.faces().to_vec(), a.outer().to_vec(), a.inner().to_vec(), cond).unwrap();
    let report = broken.validate();
    assert!(report.violations.iter().any(|v| matches!(v, Violation::Euler { .. })), "{report}");
    assert!(report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::FaceMissingEdge { a: 8, b: 9, .. } | Violation::FaceMissingEdge { a: 9, b: 8, .. })));
    assert!(report.to_string().contains("edge count vs. Euler characteristic"));
}

#[test]
fn bad_conductances() {
    let mut a = fixtures::annulus(8);
    a.conductance[3] = 0.0;
    a.conductance[5] = f64::NAN;
    let r = a.validate();
    let bad: Vec<usize> = r
        .violations
        .iter()
        .filter_map(|v| match v {
            Violation::Conductance { edge, .. } => Some(*edge),
            _ => None,
        })
        .collect();
    assert_eq!(bad, vec![3, 5]);
    assert!(a.validate().into_result().is_err());
}

#[test]
fn reversed_face_is_reported() {
    let a = fixtures::annulus(8);
    let mut faces = a.faces().to_vec();
    faces[0].reverse();
    let b = PlanarComplex::new(a.coords.clone(), a.edges().to_vec(), faces, a.outer().to_vec(), a.inner().to_vec(), a.conductance.clone())
        .unwrap();
    assert!(b.validate().violations.iter().any(|v| matches!(v, Violation::FaceOrientation { face: 0, .. })));
}

#[test]
fn crossing_edges_are_reported() {
    let mut a = fixtures::annulus(8);
    // pull a middle vertex out past the outer ring
    a.coords[8] = [4.0, 0.3];
    let r = a.validate();
    assert!(!r.is_valid());
}

#[test]
fn rebuild_from_faces() {
    let p = fixtures::pants();
    let q = PlanarComplex::from_faces(p.coords.clone(), p.faces().to_vec(), |a, b| p.conductance[p.edge_id(a, b).unwrap()]).unwrap();
    assert_eq!(q.m(), 3);
    assert_eq!(q.edges().len(), p.edges().len());
    assert!(q.validate().is_valid());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_grids_are_valid(nx in 6usize..18, ny in 6usize..18, holes in 0usize..4, seed in any::<u64>()) {
        prop_assume!(nx.min(ny) >= 6 + 3 * holes);
        let c = fixtures::random_grid(&GridSpec::new(nx, ny, holes, seed));
        let first = c.validate();
        prop_assert!(first.is_valid(), "{}", first);
        prop_assert_eq!(c.m(), holes + 1);
        prop_assert_eq!(c.euler_characteristic(), 2 - c.m() as i64);
        // validation has no side effects
        let again = c.validate();
        prop_assert_eq!(&first, &again);
        prop_assert_eq!(c.validate_with(Rules::Piece), c.validate_with(Rules::Piece));
    }

    #[test]
    fn fans_see_every_neighbor(seed in any::<u64>()) {
        let c = fixtures::random_grid(&GridSpec::new(10, 9, 1, seed));
        for v in 0..c.num_vertices() {
            let mut from_fan: Vec<usize> = c.fan(v).chains.iter().flatten().copied().collect();
            let mut from_adj: Vec<usize> = c.neighbors(v).iter().map(|&(w, _)| w).collect();
            from_fan.sort_unstable();
            from_fan.dedup();
            from_adj.sort_unstable();
            prop_assert_eq!(from_fan, from_adj);
            prop_assert_eq!(c.fan(v).closed, !c.is_boundary(v));
        }
    }
}

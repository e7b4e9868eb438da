use flat_tiler::error::Error;
use flat_tiler::fixtures::{self, GridSpec};
use flat_tiler::geometry;
use flat_tiler::level::{self, LevelOptions, LevelPoint};
use flat_tiler::{solve, HarmonicField, PlanarComplex};
use proptest::prelude::*;

#[test]
fn sign_changes_and_index() {
    assert_eq!(level::cyclic_sign_changes(&[1.0, -1.0, 1.0, -1.0]), 4);
    assert_eq!(level::cyclic_sign_changes(&[1.0, 1.0, -1.0, -1.0]), 2);
    assert_eq!(level::cyclic_sign_changes(&[1.0, 1.0, 1.0]), 0);
    assert_eq!(level::index_from_sgc(2), 0);
    assert_eq!(level::index_from_sgc(4), -1);
    assert_eq!(level::index_from_sgc(0), 1);
    assert_eq!(level::index_from_sgc(6), -2);
}

#[test]
fn middle_ring_is_a_level() {
    let a = fixtures::annulus(8);
    let g = solve(&a, 1.0).unwrap();
    assert!(matches!(level::extract_level(&g, &a, 0.5, LevelOptions::default()), Err(Error::Degenerate { .. })));
    let l = level::extract_level(&g, &a, 0.5, LevelOptions { allow_flat_edges: true }).unwrap();
    assert_eq!(l.num_cycles(), 1);
    let mut vs: Vec<usize> = l.cycles().next().unwrap().points.iter().map(|p| p.vertex().unwrap()).collect();
    vs.sort_unstable();
    assert_eq!(vs, (8..16).collect::<Vec<_>>());
}

#[test]
fn pants_saddle_level() {
    let p = fixtures::pants();
    let g = solve(&p, 1.0).unwrap();
    let report = level::index_formula_check(&g, &p).unwrap();
    assert!(report.holds);
    let saddles: Vec<_> = report.singular().collect();
    assert_eq!(saddles.len(), 1);
    assert_eq!((saddles[0].sgc, saddles[0].index), (4, -1));
    let u = saddles[0].vertex;

    let ks = level::critical_values(&g, &p).unwrap();
    assert_eq!(ks, vec![1.0, g.values[u], 0.0]);

    let l = level::extract_level(&g, &p, g.values[u], LevelOptions::default()).unwrap();
    assert_eq!(l.components.len(), 1);
    let comp = &l.components[0];
    assert_eq!(comp.cycles.len(), 2);
    assert_eq!(comp.tangencies, vec![u]);
    for c in &comp.cycles {
        assert_eq!(c.points.iter().filter(|q| q.vertex() == Some(u)).count(), 1);
        // each lobe holds one hole
        let holes = p.inner().iter().filter(|h| c.contains(p.coords[h[0]])).count();
        assert_eq!(holes, 1);
    }
    let e = level::enclosing_singular_curve(&g, &p).unwrap();
    assert_eq!(e.value, g.values[u]);
}

#[test]
fn annulus_has_no_singular_curve() {
    let a = fixtures::random_grid(&GridSpec::new(14, 12, 1, 3));
    let g = solve(&a, 2.0).unwrap();
    assert_eq!(level::critical_values(&g, &a).unwrap(), vec![2.0, 0.0]);
    assert!(matches!(level::enclosing_singular_curve(&g, &a), Err(Error::NotApplicable(_))));
}

#[test]
fn four_boundary_fixtures() {
    for (c, singular) in [(fixtures::ladder4(), 2), (fixtures::triple_saddle(), 1)] {
        let g = solve(&c, 1.0).unwrap();
        let r = level::index_formula_check(&g, &c).unwrap();
        assert_eq!(r.sum, -2);
        assert_eq!(r.singular().count(), singular);
        let ks = level::critical_values(&g, &c).unwrap();
        assert!(ks.len() == 3 || ks.len() == 4, "{ks:?}");
        let e = level::enclosing_singular_curve(&g, &c).unwrap();
        let probes: Vec<_> = c.inner().iter().map(|h| c.coords[h[0]]).collect();
        assert!(e.components.iter().any(|comp| probes.iter().all(|&p| comp.encloses(p))));
    }
}

fn path_segments(c: &level::LevelCycle) -> Vec<([f64; 2], [f64; 2])> {
    (0..c.path.len()).map(|i| (c.path[i], c.path[(i + 1) % c.path.len()])).collect()
}

fn generic(seed: u64, holes: usize) -> (PlanarComplex, HarmonicField) {
    let side = 7 + 3 * holes;
    let c = fixtures::random_grid(&GridSpec::new(side, side + 1, holes, seed));
    let g = solve(&c, 1.0).unwrap();
    (c, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn index_sum_and_parity(seed in any::<u64>(), holes in 1usize..5) {
        let (c, g) = generic(seed, holes);
        let r = level::index_formula_check(&g, &c).unwrap();
        prop_assert!(r.holds);
        prop_assert_eq!(r.sum, 2 - c.m() as i64);
        for e in &r.entries {
            prop_assert_eq!(e.sgc % 2, 0);
        }
    }

    #[test]
    fn regular_levels_are_simple(seed in any::<u64>(), holes in 1usize..5, t in 0.01f64..0.99) {
        let (c, g) = generic(seed, holes);
        let ks = level::critical_values(&g, &c).unwrap();
        prop_assume!(ks.iter().all(|&k| (k - t).abs() > 1e-6));
        let l = level::extract_level(&g, &c, t, LevelOptions::default()).unwrap();
        prop_assert!(l.is_simple());
        for cyc in l.cycles() {
            prop_assert!(cyc.signed_area() > 0.0);
            // every cycle holds at least one hole
            prop_assert!(c.inner().iter().any(|h| cyc.contains(c.coords[h[0]])));
            for p in &cyc.points {
                if let LevelPoint::Edge { t, .. } = *p {
                    prop_assert!(t > 0.0 && t < 1.0);
                }
            }
        }
    }

    #[test]
    fn levels_nest_and_stay_apart(seed in any::<u64>(), holes in 1usize..4, a in 0.05f64..0.95, b in 0.05f64..0.95) {
        prop_assume!((a - b).abs() > 1e-3);
        let (c, g) = generic(seed, holes);
        let (hi, lo) = (a.max(b), a.min(b));
        let upper = level::extract_level(&g, &c, hi, LevelOptions::default()).unwrap();
        let lower = level::extract_level(&g, &c, lo, LevelOptions::default()).unwrap();
        for low in lower.cycles() {
            prop_assert!(upper.cycles().any(|up| up.contains(low.path[0])));
            for (p, q) in path_segments(low) {
                for up in upper.cycles() {
                    for (r, s) in path_segments(up) {
                        prop_assert!(!geometry::segments_intersect(p, q, r, s));
                    }
                }
            }
        }
    }
}

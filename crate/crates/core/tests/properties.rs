use geolab::convexity::{halfspace_cover_check, midpoint_check, HalfspaceSystem};
use geolab::deck::{octagon_group, QuotientSpace};
use geolab::model::{ModelPoint, ModelSpace};
use geolab::quotient::{quotient_distance, segment_bundle};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

fn lattice_basis() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (0.5..2.0f64, -1.0..1.0f64, 0.5..2.0f64).prop_map(|(a, b, c)| vec![vec![a, 0.0], vec![b, c]])
}

fn hyperbolic_point(space: ModelSpace) -> impl Strategy<Value = ModelPoint> {
    (0.0..3.0f64, 0.0..std::f64::consts::TAU).prop_map(move |(r, t)| space.polar(r, t))
}

/// Brute-force torus distance over a generous window of translates.
fn torus_oracle(basis: &[Vec<f64>], p: &[f64], q: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for i in -12..=12 {
        for j in -12..=12 {
            let x = q[0] - p[0] - i as f64 * basis[0][0] - j as f64 * basis[1][0];
            let y = q[1] - p[1] - i as f64 * basis[0][1] - j as f64 * basis[1][1];
            best = best.min(x.hypot(y));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_distance_matches_brute_force(basis in lattice_basis(), p in (coord(), coord()), q in (coord(), coord())) {
        let space = QuotientSpace::lattice(&basis).unwrap();
        let (p, q) = (vec![p.0, p.1], vec![q.0, q.1]);
        let d = quotient_distance(&space, &ModelPoint::new(p.clone()), &ModelPoint::new(q.clone())).unwrap();
        prop_assert!((d - torus_oracle(&basis, &p, &q)).abs() < 1e-10);
    }

    #[test]
    fn octagon_metric_axioms(
        a in hyperbolic_point(*octagon_group().model()),
        b in hyperbolic_point(*octagon_group().model()),
        c in hyperbolic_point(*octagon_group().model()),
    ) {
        let g = octagon_group();
        let dab = quotient_distance(&g, &a, &b).unwrap();
        let dba = quotient_distance(&g, &b, &a).unwrap();
        let dbc = quotient_distance(&g, &b, &c).unwrap();
        let dac = quotient_distance(&g, &a, &c).unwrap();
        prop_assert!((dab - dba).abs() < 1e-9);
        prop_assert!(dac <= dab + dbc + 1e-9);
        prop_assert!(dab <= g.model().dist(&a, &b) + 1e-12);
        prop_assert!(quotient_distance(&g, &a, &a).unwrap() < 1e-9);
    }

    #[test]
    fn octagon_distance_is_deck_invariant(
        a in hyperbolic_point(*octagon_group().model()),
        b in hyperbolic_point(*octagon_group().model()),
        gen in 0usize..8,
    ) {
        let g = octagon_group();
        let model = *g.model();
        let deck = &g.symmetric_generators()[gen];
        let moved = deck.apply(&model, &a).unwrap();
        let d0 = quotient_distance(&g, &a, &b).unwrap();
        let d1 = quotient_distance(&g, &moved, &b).unwrap();
        prop_assert!((d0 - d1).abs() < 1e-9);
        let bundle = segment_bundle(&g, &a, &b, None).unwrap();
        prop_assert!(bundle.order >= 1);
        for s in &bundle.segments {
            prop_assert!((s.length - d0).abs() <= bundle.min_tol);
        }
    }

    #[test]
    fn hyperbolic_midpoints_never_exceed_the_average(
        pts in prop::collection::vec(hyperbolic_point(ModelSpace::plane(-1.0).unwrap()), 4),
    ) {
        let h = ModelSpace::plane(-1.0).unwrap();
        let m = midpoint_check(&h, &pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
        prop_assert!(m.lhs <= m.rhs + 1e-12);
    }

    #[test]
    fn cover_implies_large_intersection(
        n in 2usize..=4,
        raw in prop::collection::vec((prop::collection::vec(-2i32..=2, 4), any::<bool>()), 1..=4),
    ) {
        // small integer normals keep every uncovered cone wide enough to sample
        let k = raw.len().min(n);
        let normals: Vec<Vec<f64>> = raw[..k].iter().map(|(v, _)| v[..n].iter().map(|x| *x as f64).collect()).collect();
        let sides: Vec<i8> = raw[..k].iter().map(|(_, s)| if *s { 1 } else { -1 }).collect();
        prop_assume!(normals.iter().all(|v| v.iter().any(|x| *x != 0.0)));
        let sys = HalfspaceSystem::new(n, normals, sides).unwrap();
        let c = halfspace_cover_check(&sys, 20_000, 7);
        prop_assert!(c.consistent());
    }
}

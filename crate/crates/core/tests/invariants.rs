//! Property tests for the structural invariants: norm axioms, distance
//! axioms, the exact radius law, and the quadratic remainder scaling.

use std::sync::Arc;

use gmcf::field::{random_graph, random_space_time, SpaceTimeField};
use gmcf::geometry::{make_base, EvolvingGeometry, GeometryKind};
use gmcf::graph_calculus::quadratic_scaling_ratios;
use gmcf::parabolic_norms::{xt_norm, yt_norm, Frame};
use proptest::prelude::*;

fn circle(n: usize) -> Arc<gmcf::BaseGeometry64> {
    make_base(GeometryKind::Circle, 1, 1.0, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn space_time_norms_are_homogeneous_and_subadditive(
        seed1 in 0u64..1000,
        seed2 in 0u64..1000,
        lambda in 0.1f64..10.0,
    ) {
        let g = circle(32);
        let times = SpaceTimeField::uniform_times(0.04, 32);
        let u = random_space_time(&g, &times, 6, seed1);
        let v = random_space_time(&g, &times, 6, seed2);

        let xu = xt_norm(&u, 0.04, Frame::Static).unwrap().value;
        let xv = xt_norm(&v, 0.04, Frame::Static).unwrap().value;
        let x_scaled = xt_norm(&u.scaled(lambda), 0.04, Frame::Static).unwrap().value;
        prop_assert!((x_scaled - lambda * xu).abs() <= 1e-9 * (1.0 + lambda * xu));

        let sum = u.linear_combination(1.0, &v, 1.0).unwrap();
        let x_sum = xt_norm(&sum, 0.04, Frame::Static).unwrap().value;
        prop_assert!(x_sum <= xu + xv + 1e-10);

        let yu = yt_norm(&u, 0.04, Frame::Static).unwrap().value;
        let yv = yt_norm(&v, 0.04, Frame::Static).unwrap().value;
        let y_sum = yt_norm(&sum, 0.04, Frame::Static).unwrap().value;
        prop_assert!(y_sum <= yu + yv + 1e-10);
        let y_scaled = yt_norm(&u.scaled(lambda), 0.04, Frame::Static).unwrap().value;
        prop_assert!((y_scaled - lambda * yu).abs() <= 1e-9 * (1.0 + lambda * yu));
    }

    #[test]
    fn geodesic_distance_axioms(
        a in 0usize..1024,
        b in 0usize..1024,
        c in 0usize..1024,
        kind_pick in 0usize..3,
    ) {
        let g: Arc<gmcf::BaseGeometry64> = match kind_pick {
            0 => circle(32),
            1 => make_base(GeometryKind::PeriodicPlane, 2, 3.0, 16).unwrap(),
            _ => make_base(GeometryKind::Sphere, 2, 1.0, 16).unwrap(),
        };
        let np = g.num_points();
        let (a, b, c) = (a % np, b % np, c % np);
        let dab = g.geodesic_distance(a, b);
        prop_assert!((dab - g.geodesic_distance(b, a)).abs() < 1e-12);
        prop_assert!(dab <= g.geodesic_distance(a, c) + g.geodesic_distance(c, b) + 1e-10);
        prop_assert!(dab >= 0.0);
    }

    #[test]
    fn radius_law_is_exact(
        r0 in 0.5f64..3.0,
        frac in 0.01f64..0.95,
        dim_pick in 0usize..2,
    ) {
        let (kind, n) = if dim_pick == 0 {
            (GeometryKind::Circle, 1usize)
        } else {
            (GeometryKind::Sphere, 2usize)
        };
        let base = make_base::<f64>(kind, n, r0, 16).unwrap();
        let extinction = r0 * r0 / (2.0 * n as f64);
        let ev = EvolvingGeometry::new(base, extinction * 0.99).unwrap();
        let t = extinction * 0.99 * frac;
        let r = ev.radius(t).unwrap();
        prop_assert!((r * r + 2.0 * n as f64 * t - r0 * r0).abs() < 1e-12);
        // conformal time is strictly increasing
        let tau1 = ev.conformal_time(t * 0.5).unwrap();
        let tau2 = ev.conformal_time(t).unwrap();
        prop_assert!(tau2 > tau1 || t == 0.0);
    }

    #[test]
    fn remainder_is_quadratic_at_the_origin(seed in 0u64..500) {
        let g = circle(32);
        let raw = random_graph(&g, 5, seed);
        let u0 = raw.scaled(0.5 / (1e-12 + gmcf::parabolic_norms::c01_norm(&raw)));
        let ratios = quadratic_scaling_ratios(&u0, &[1e-2, 1e-3]).unwrap();
        // |Q(s u)|_inf / s^2 settles: agreement within 5 percent
        if ratios[0] > 1e-12 {
            prop_assert!(
                (ratios[1] / ratios[0] - 1.0).abs() < 0.05,
                "ratios {:?}", ratios
            );
        }
    }
}

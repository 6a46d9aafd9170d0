use std::f64::consts::PI;

use bscb_core::blackspot::{
    black_spot_statistics, classify_black_spots, fit_ellipse, point_in_ellipse, BlackSpotEllipse, BlackSpotMap, Extent,
};
use bscb_core::geo::GeoOrigin;
use bscb_core::{Cluster, ContextSnapshot, DriveTrace, Point};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_ellipse(r: &mut impl Rng) -> BlackSpotEllipse {
    let a = r.random_range(5.0..200.0);
    BlackSpotEllipse {
        center: Point::new(r.random_range(-500.0..500.0), r.random_range(-500.0..500.0)),
        semi_major: a,
        semi_minor: r.random_range(1.0..=a),
        rotation: r.random_range(-PI / 2.0..PI / 2.0),
        source_rmse: 4.0,
    }
}

/// Maps `p` through the inverse of `x ↦ center + R(rot)·diag(a, b)·x` and
/// tests the unit disc. The 2×2 inverse is taken by cofactors.
fn affine_oracle(p: Point, e: &BlackSpotEllipse) -> (bool, f64) {
    let (c, s) = (e.rotation.cos(), e.rotation.sin());
    let m = [[c * e.semi_major, -s * e.semi_minor], [s * e.semi_major, c * e.semi_minor]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let (dx, dy) = (p.x - e.center.x, p.y - e.center.y);
    let qx = (m[1][1] * dx - m[0][1] * dy) / det;
    let qy = (-m[1][0] * dx + m[0][0] * dy) / det;
    let r2 = qx * qx + qy * qy;
    (r2 <= 1.0, r2)
}

#[test]
fn membership_matches_affine_oracle() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let mut disagreements = 0;
    for _ in 0..10_000 {
        let e = random_ellipse(&mut r);
        // sample around the ellipse so both outcomes are frequent
        let p = Point::new(
            e.center.x + r.random_range(-1.5..1.5) * e.semi_major,
            e.center.y + r.random_range(-1.5..1.5) * e.semi_major,
        );
        let (inside, r2) = affine_oracle(p, &e);
        if inside != point_in_ellipse(p, &e) && (r2 - 1.0).abs() > 1e-9 {
            disagreements += 1;
        }
    }
    assert_eq!(disagreements, 0);
}

proptest! {
    #[test]
    fn membership_is_rotation_invariant(
        seed in any::<u64>(),
        theta in -10.0f64..10.0,
        px in -1.5f64..1.5,
        py in -1.5f64..1.5,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let e = random_ellipse(&mut r);
        let p = Point::new(e.center.x + px * e.semi_major, e.center.y + py * e.semi_major);
        let turned = BlackSpotEllipse {
            center: e.center.rotated(theta),
            rotation: e.rotation + theta,
            ..e
        };
        let q = p.rotated(theta);
        prop_assume!((e.level(p) - 1.0).abs() > 1e-9);
        prop_assert_eq!(point_in_ellipse(p, &e), point_in_ellipse(q, &turned));
        prop_assert!((e.level(p) - turned.level(q)).abs() <= 1e-9 * e.level(p).max(1.0));
    }

    #[test]
    fn circle_reduces_to_disc_test(
        cx in -1000i32..1000, cy in -1000i32..1000,
        px in -1000i32..1000, py in -1000i32..1000,
        radius in 1i32..600,
    ) {
        // integer coordinates keep every quantity exact
        let e = BlackSpotEllipse {
            center: Point::new(cx as f64, cy as f64),
            semi_major: radius as f64,
            semi_minor: radius as f64,
            rotation: 0.0,
            source_rmse: 3.0,
        };
        let (dx, dy) = ((px - cx) as i64, (py - cy) as i64);
        let disc = dx * dx + dy * dy <= (radius as i64).pow(2);
        prop_assert_eq!(point_in_ellipse(Point::new(px as f64, py as f64), &e), disc);
    }

    #[test]
    fn fitted_ellipse_contains_members(
        pts in prop::collection::vec((-300.0f64..300.0, -300.0f64..300.0), 1..40),
        floor in 1.0f64..30.0,
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let e = fit_ellipse(&pts, floor, Extent::Max, 4.0);
        prop_assert!(e.semi_major >= e.semi_minor && e.semi_minor >= floor);
        for p in &pts {
            prop_assert!(e.level(*p) <= 1.0 + 1e-9, "member {:?} has level {}", p, e.level(*p));
        }
    }

    #[test]
    fn raising_the_threshold_never_adds_a_cluster(
        rmses in prop::collection::vec(0.0f64..6.0, 0..30),
        lo in 0.0f64..6.0,
        step in 0.0f64..3.0,
    ) {
        let clusters: Vec<Cluster> = rmses
            .iter()
            .map(|&rmse| Cluster { centroid: Point::default(), members: vec![0], rmse })
            .collect();
        let low = classify_black_spots(&clusters, lo);
        let high = classify_black_spots(&clusters, lo + step);
        prop_assert!(high.len() <= low.len());
        prop_assert!(high.iter().all(|h| low.contains(h)));
    }
}

#[test]
fn bounding_box_prefilter_matches_exhaustive_test() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let ellipses: Vec<_> = (0..40).map(|_| random_ellipse(&mut r)).collect();
    let map = BlackSpotMap::new("A", 3.0, ellipses).unwrap();
    let mut inside = 0;
    for _ in 0..10_000 {
        let p = Point::new(r.random_range(-800.0..800.0), r.random_range(-800.0..800.0));
        let fast = map.contains(p);
        assert_eq!(fast, map.contains_exhaustive(p), "{p:?}");
        inside += usize::from(fast);
    }
    assert!(inside > 100, "sample should hit the map, got {inside}");

    let far = Point::new(5_000.0, 5_000.0);
    assert!(!map.contains(far));
}

fn straight_drive(xs: &[f64], speed: f64) -> DriveTrace {
    let snaps: Vec<ContextSnapshot> = xs
        .iter()
        .map(|&x| ContextSnapshot {
            timestamp: (x - xs[0]) / speed,
            position: Point::new(x, 0.0),
            rsrp: -90.0,
            rsrq: -10.0,
            sinr: 10.0,
            cqi: 9,
            ta: 1,
            carrier_freq: 1800.0,
            velocity: speed,
            cell_id: "c".into(),
            payload_size: 0.0,
        })
        .collect();
    let n = snaps.len();
    DriveTrace::new("A", GeoOrigin::default(), snaps, vec![None; n]).unwrap()
}

#[test]
fn chord_through_a_100m_spot_is_one_run() {
    // 10 m/s, one snapshot per second, through a disc of radius 50 m
    let xs: Vec<f64> = (-20..=20).map(|i| i as f64 * 10.0).collect();
    let trace = straight_drive(&xs, 10.0);
    let map = BlackSpotMap::new("A", 3.0, vec![BlackSpotEllipse::circle(Point::default(), 50.0, 4.0)]).unwrap();
    let stats = black_spot_statistics(&trace, &map);
    assert_eq!(stats.runs.len(), 1);
    let run = stats.runs[0];
    assert!((run.distance - 100.0).abs() <= 10.0, "{run:?}");
    assert!((run.duration - 10.0).abs() <= 1.0, "{run:?}");
}

#[test]
fn disjoint_spots_give_separate_runs() {
    let xs: Vec<f64> = (0..=100).map(|i| i as f64 * 10.0).collect();
    let trace = straight_drive(&xs, 10.0);
    let map = BlackSpotMap::new(
        "A",
        3.0,
        vec![
            BlackSpotEllipse::circle(Point::new(200.0, 0.0), 25.0, 4.0),
            BlackSpotEllipse::circle(Point::new(700.0, 0.0), 45.0, 4.0),
        ],
    )
    .unwrap();
    let d = black_spot_statistics(&trace, &map).distances();
    assert_eq!(d, vec![40.0, 80.0]);
}

use lgplan_core::geometry::{
    footprints_overlap, in_workspace, transform_footprint, Footprint, Polygon, Pose, Vec2,
    Workspace, COLLISION_EPS,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Convex polygon from points on an ellipse at sorted random angles.
fn random_convex(rng: &mut ChaCha8Rng) -> Footprint {
    let n = rng.random_range(3..9);
    let (rx, ry) = (rng.random_range(0.05..0.5), rng.random_range(0.05..0.5));
    loop {
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        let pts: Vec<Vec2> = angles
            .iter()
            .map(|a| Vec2::new(rx * a.cos(), ry * a.sin()))
            .collect();
        if let Ok(f) = Footprint::centered(pts) {
            return f;
        }
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::planar(
        rng.random_range(-0.6..0.6),
        rng.random_range(-0.6..0.6),
        rng.random_range(-3.2..3.2),
    )
}

fn strategy_polygon() -> impl Strategy<Value = Polygon> {
    any::<u64>().prop_map(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        random_convex(&mut rng).place(&random_pose(&mut rng))
    })
}

proptest! {
    #[test]
    fn overlap_is_symmetric(a in strategy_polygon(), b in strategy_polygon()) {
        prop_assert_eq!(footprints_overlap(&a, &b), footprints_overlap(&b, &a));
    }

    #[test]
    fn transform_is_rigid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_convex(&mut rng);
        let p = random_pose(&mut rng);
        let placed = transform_footprint(&f, &p);
        let v = f.vertices();
        prop_assert_eq!(placed.vertices.len(), v.len());
        for i in 0..v.len() {
            for j in 0..v.len() {
                let d0 = v[i].dist(v[j]);
                let d1 = placed.vertices[i].dist(placed.vertices[j]);
                prop_assert!((d0 - d1).abs() < 1e-9);
            }
        }
        prop_assert!(p.theta() > -std::f64::consts::PI && p.theta() <= std::f64::consts::PI);
    }

    #[test]
    fn theta_is_normalized(theta in -100.0f64..100.0) {
        let t = Pose::planar(0.0, 0.0, theta).theta();
        prop_assert!(t > -std::f64::consts::PI && t <= std::f64::consts::PI);
        prop_assert!((t.cos() - theta.cos()).abs() < 1e-9 && (t.sin() - theta.sin()).abs() < 1e-9);
    }
}

/// Point-membership oracle: sample the intersection of the bounding boxes
/// and look for a point strictly inside both polygons.
fn monte_carlo_overlap(a: &Polygon, b: &Polygon, rng: &mut ChaCha8Rng) -> Option<bool> {
    let Some(bx) = a.aabb().intersect(&b.aabb()) else {
        return Some(false);
    };
    if bx.width() <= 0.0 || bx.height() <= 0.0 {
        return Some(false);
    }
    let band = 10.0 * COLLISION_EPS;
    let mut deepest = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let p = Vec2::new(
            rng.random_range(bx.min.x..=bx.max.x),
            rng.random_range(bx.min.y..=bx.max.y),
        );
        deepest = deepest.max(a.inside_depth(p).min(b.inside_depth(p)));
    }
    if deepest > band {
        Some(true)
    } else if a.penetration(b) < -band {
        Some(false)
    } else {
        // near-touching or too thin for the sampler to find
        None
    }
}

#[test]
fn overlap_agrees_with_point_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut decided, mut overlapping) = (0, 0);
    for _ in 0..1000 {
        let a = random_convex(&mut rng).place(&random_pose(&mut rng));
        let b = random_convex(&mut rng).place(&random_pose(&mut rng));
        if let Some(truth) = monte_carlo_overlap(&a, &b, &mut rng) {
            assert_eq!(footprints_overlap(&a, &b), truth, "{a:?} {b:?}");
            decided += 1;
            overlapping += truth as usize;
        }
    }
    assert!(decided > 900, "only {decided} pairs decided");
    assert!(overlapping > 100 && overlapping < decided - 100);
}

#[test]
fn square_examples() {
    let sq = Footprint::square(1.0).unwrap();
    let at = |x: f64| sq.place(&Pose::planar(x, 0.0, 0.0));
    assert!(!footprints_overlap(&at(0.0), &at(2.0)));
    assert!(footprints_overlap(&at(0.0), &at(0.5)));
    assert!(!footprints_overlap(&at(0.0), &at(1.0)));
    let rotated = sq.place(&Pose::planar(0.0, 0.0, std::f64::consts::FRAC_PI_2));
    assert!(rotated
        .vertices
        .iter()
        .any(|v| v.dist(Vec2::new(-0.5, 0.5)) < 1e-12));
    let ws = Workspace::new(0.0, 10.0, 0.0, 10.0).unwrap();
    assert!(in_workspace(&sq.place(&Pose::planar(5.0, 5.0, 0.0)), &ws));
    assert!(!in_workspace(&sq.place(&Pose::planar(0.0, 0.0, 0.0)), &ws));
    let tight = Workspace::new(-0.5, 0.5, -0.5, 0.5).unwrap();
    assert!(in_workspace(&at(0.0), &tight));
}

use ladderfire::frames::{build_grid, EnuPoint, ExtrudedBox, Heightmap, OccupancyGrid};
use ladderfire::funnel::{compute_funnel, plan_triangulation_poses, FlightFunnel};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(seed: u64) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terrain = Heightmap::flat(-130.0, -130.0, 52, 52, 5.0, 0.0);
    let boxes: Vec<ExtrudedBox> = (0..14)
        .map(|_| loop {
            let e = rng.random_range(-120.0..110.0);
            let n = rng.random_range(-120.0..110.0);
            let b = ExtrudedBox::new(e, n, e + rng.random_range(3.0..12.0), n + rng.random_range(3.0..12.0), rng.random_range(4.0..35.0));
            // keep the launch area clear
            if b.e_max < -15.0 || b.e_min > 15.0 || b.n_max < -15.0 || b.n_min > 15.0 {
                break b;
            }
        })
        .collect();
    build_grid(&terrain, &boxes, 1.0).unwrap()
}

fn funnel_for(seed: u64, margin: f64) -> (OccupancyGrid, FlightFunnel) {
    let grid = scene(seed);
    let f = compute_funnel(&grid, EnuPoint::new(0.3, -0.2, 0.5), margin, 100.0).unwrap();
    (grid, f)
}

fn random_inside(f: &FlightFunnel, rng: &mut ChaCha8Rng) -> EnuPoint {
    loop {
        let d = f.horizon * rng.random::<f64>().sqrt();
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let u = rng.random_range(f.floor_alt..f.ceiling_alt);
        let p = EnuPoint::new(f.center.e + d * az.sin(), f.center.n + d * az.cos(), u);
        if f.contains(&p) {
            return p;
        }
    }
}

fn sphere_dirs(n: usize) -> Vec<Vector3<f64>> {
    // Fibonacci sphere
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            Vector3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

#[test]
fn funnel_points_keep_margin_clearance() {
    let dirs = sphere_dirs(200);
    for seed in 0..6 {
        let (grid, f) = funnel_for(seed, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..300 {
            let p = random_inside(&f, &mut rng);
            for d in &dirs {
                let hit = grid.raycast(&p, d, f.safety_margin - 1e-6);
                assert!(hit.is_none(), "seed {seed}: obstacle within margin of {p:?} along {d:?}");
            }
        }
    }
}

#[test]
fn funnel_points_see_the_axis() {
    for seed in 0..6 {
        let (grid, f) = funnel_for(seed, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        for _ in 0..10_000 {
            let p = random_inside(&f, &mut rng);
            let q = random_inside(&f, &mut rng);
            let axis_at = |u: f64| f.center.with_u(u);
            assert!(grid.segment_hit(&p, &axis_at(p.u)).is_none());
            assert!(grid.segment_hit(&axis_at(p.u), &axis_at(q.u)).is_none());
        }
    }
}

#[test]
fn clamp_is_near_optimal_against_dense_search() {
    let (_, f) = funnel_for(3, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // dense (distance, altitude) sampling of the funnel cross-section
    let mut samples = Vec::new();
    let (nd, nu) = (400, 400);
    for i in 0..=nd {
        let d = f.horizon * i as f64 / nd as f64;
        for j in 0..=nu {
            let u = f.floor_alt + (f.ceiling_alt - f.floor_alt) * j as f64 / nu as f64;
            if f.contains(&EnuPoint::new(f.center.e + d, f.center.n, u)) {
                samples.push((d, u));
            }
        }
    }
    let mut checked = 0;
    while checked < 1000 {
        let p = EnuPoint::new(rng.random_range(-160.0..160.0), rng.random_range(-160.0..160.0), rng.random_range(-20.0..160.0));
        if f.contains(&p) {
            continue;
        }
        checked += 1;
        let c = f.clamp_into(&p);
        assert!(f.contains(&c), "clamp result {c:?} outside");
        let d0 = f.horizontal_distance(&p);
        let dense = samples
            .iter()
            .map(|&(d, u)| (d - d0).hypot(u - p.u))
            .fold(f64::INFINITY, f64::min);
        let got = c.distance(&p);
        let spacing = (f.horizon / nd as f64).hypot((f.ceiling_alt - f.floor_alt) / nu as f64);
        assert!(got <= 1.05 * dense + 1e-9 || got <= dense + spacing, "clamp {got} vs dense {dense}");
    }
}

#[test]
fn larger_margin_never_enlarges_the_funnel() {
    for seed in 0..4 {
        let grid = scene(seed);
        let c = EnuPoint::new(0.3, -0.2, 0.5);
        let small = compute_funnel(&grid, c, 2.0, 100.0).unwrap();
        let large = compute_funnel(&grid, c, 4.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5000 {
            let p = random_inside(&large, &mut rng);
            assert!(small.contains(&p), "seed {seed}: {p:?} only in the larger-margin funnel");
        }
    }
}

#[test]
fn cluttered_triangulation_poses_see_target() {
    let (grid, f) = funnel_for(1, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut planned = 0;
    for _ in 0..200 {
        // heat sources on open ground under the cylinder
        let d = rng.random_range(0.0..f.cyl_radius);
        let az = rng.random_range(0.0..std::f64::consts::TAU);
        let target = EnuPoint::new(f.center.e + d * az.sin(), f.center.n + d * az.cos(), 0.5);
        let view = (f.center.with_u(f.floor_alt + 20.0) - target).vec().normalize();
        let plan = plan_triangulation_poses(&f, target, view, 30.0, 5.0).unwrap();
        planned += 1;
        let (l, r) = (plan.left.position, plan.right.position);
        assert!(f.contains(&l) && f.contains(&r));
        assert!(plan.baseline <= 5.0 + 1e-9);
        for pose in [plan.left, plan.right] {
            let to = (target - pose.position).vec();
            assert!(pose.forward().angle(&to).to_degrees() < 0.1);
            let end = pose.position + to * (1.0 - 1e-3);
            assert!(grid.segment_hit(&pose.position, &end).is_none(), "target hidden from {pose:?}");
        }
    }
    assert!(planned > 20, "only {planned} visible layouts");
}

proptest! {
    #[test]
    fn anchor_always_inside(r in 2.0f64..100.0, s in 0.0f64..3.0, floor in 0.0f64..30.0, band in 1.0f64..100.0) {
        let f = FlightFunnel {
            center: EnuPoint::new(0.0, 0.0, 0.5),
            cyl_radius: r,
            cone_slope: s,
            floor_alt: floor,
            ceiling_alt: floor + band,
            horizon: r + 10.0,
            safety_margin: 1.0,
        };
        prop_assert!(f.contains(&f.anchor()));
    }

    #[test]
    fn clamp_always_lands_inside(e in -300.0f64..300.0, n in -300.0f64..300.0, u in -50.0f64..300.0,
                                 r in 2.0f64..100.0, s in 0.0f64..3.0, floor in 0.0f64..30.0, band in 1.0f64..100.0) {
        let f = FlightFunnel {
            center: EnuPoint::new(1.0, -2.0, 0.5),
            cyl_radius: r,
            cone_slope: s,
            floor_alt: floor,
            ceiling_alt: floor + band,
            horizon: r + 50.0,
            safety_margin: 1.0,
        };
        let c = f.clamp_into(&EnuPoint::new(e, n, u));
        prop_assert!(f.contains(&c));
    }

    #[test]
    fn unclamped_pose_pairs_keep_full_baseline(b in 0.5f64..10.0, az in 0.0f64..360.0) {
        let f = FlightFunnel {
            center: EnuPoint::ORIGIN,
            cyl_radius: 95.0,
            cone_slope: 0.0,
            floor_alt: 0.0,
            ceiling_alt: 120.0,
            horizon: 100.0,
            safety_margin: 5.0,
        };
        let a = az.to_radians();
        let target = EnuPoint::new(60.0 * a.sin(), 60.0 * a.cos(), 0.0);
        let view = Vector3::new(-a.sin(), -a.cos(), 0.3).normalize();
        let plan = plan_triangulation_poses(&f, target, view, 30.0, b).unwrap();
        prop_assert!((plan.left.position.u - plan.right.position.u).abs() < 1e-9, "{plan:?}");
        prop_assert!((plan.baseline - b).abs() < 1e-9, "{} vs {b}: {plan:?}", plan.baseline);
    }
}

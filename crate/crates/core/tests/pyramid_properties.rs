//! Free-space model checks on rendered forest frames.

mod common;

use common::{forest_frames, PixelCloud};
use pyramid_planner::planner::{sample_endpoint, PlannerConfig};
use pyramid_planner::pyramid::{CollisionVerdict, FreeSpaceModel};
use pyramid_planner::trajectory::{Frame, QuinticPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Prim = QuinticPrimitive<f64>;

/// Candidates drawn like the planner draws them, in the camera frame.
fn camera_candidates(f: &common::Frame, cfg: &PlannerConfig, seed: u64) -> Vec<Prim> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cfg.budget)
        .map(|_| {
            let end = f.pose.transform_point(sample_endpoint(&mut rng, f.image.intrinsics(), cfg));
            let t = rng.gen_range(cfg.duration_range[0]..cfg.duration_range[1]);
            Prim::new(f.state.position, f.state.velocity, f.state.acceleration, end, t)
                .unwrap()
                .to_local_frame(&f.pose, Frame::Camera)
        })
        .collect()
}

fn verdicts(f: &common::Frame, r: f64, prims: &[Prim]) -> (Vec<CollisionVerdict>, usize) {
    let mut model = FreeSpaceModel::new(&f.image, r, PlannerConfig::default().free_distance).unwrap();
    let v = prims.iter().map(|p| model.trajectory_collision_free(p)).collect();
    (v, model.pyramids().len())
}

#[test]
fn collision_free_primitives_clear_every_pixel() {
    let cfg = PlannerConfig { budget: 400, ..Default::default() };
    let mut certified = 0;
    for (k, f) in forest_frames().iter().enumerate() {
        let prims = camera_candidates(f, &cfg, k as u64);
        let (v, _) = verdicts(f, cfg.radius, &prims);
        let cloud = PixelCloud::new(&f.image, cfg.radius);
        for (p, v) in prims.iter().zip(v) {
            if v == CollisionVerdict::CollisionFree {
                certified += 1;
                let slack = cloud.primitive_slack(p, cfg.radius, 1000);
                assert!(slack >= -1e-9, "frame {k}: certified primitive passes {slack} m inside a pixel footprint");
            }
        }
    }
    assert!(certified > 100, "only {certified} certified primitives");
}

#[test]
fn checking_is_deterministic() {
    let cfg = PlannerConfig { budget: 200, ..Default::default() };
    for (k, f) in forest_frames().iter().enumerate().take(4) {
        let prims = camera_candidates(f, &cfg, 100 + k as u64);
        let mut a = FreeSpaceModel::new(&f.image, cfg.radius, cfg.free_distance).unwrap();
        let mut b = FreeSpaceModel::new(&f.image, cfg.radius, cfg.free_distance).unwrap();
        for p in &prims {
            assert_eq!(a.trajectory_collision_free(p), b.trajectory_collision_free(p));
        }
        assert_eq!(a.pyramids(), b.pyramids());
    }
}

#[test]
/// Greedy growth can pick a shallower pyramid at a smaller radius, so a few
/// primitives are lost; the rate stays small.
fn smaller_radius_rarely_loses_certified_primitives() {
    let cfg = PlannerConfig { budget: 300, ..Default::default() };
    let (mut lost, mut certified) = (0, 0);
    for (k, f) in forest_frames().iter().enumerate() {
        let prims = camera_candidates(f, &cfg, 200 + k as u64);
        let (big, _) = verdicts(f, cfg.radius, &prims);
        for r in [0.5, 0.3] {
            for (p, v) in prims.iter().zip(&big) {
                if *v == CollisionVerdict::CollisionFree {
                    certified += 1;
                    let mut fresh = FreeSpaceModel::new(&f.image, r, cfg.free_distance).unwrap();
                    if fresh.trajectory_collision_free(p) != CollisionVerdict::CollisionFree {
                        lost += 1;
                    }
                }
            }
        }
    }
    assert!(certified > 500);
    assert!(lost * 20 < certified, "{lost} of {certified} certified primitives rejected at a smaller radius");
}

//! Rendered forest frames and a brute-force pixel clearance oracle.

#![allow(dead_code)]

use std::collections::HashMap;

use pyramid_planner::geometry::{camera_to_body, DepthImage, Pose, Rotation};
use pyramid_planner::sim::{render_depth, CameraConfig, ForestConfig, VehicleState, World, WorldConfig};
use pyramid_planner::trajectory::QuinticPrimitive;
use pyramid_planner::Vec3d;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOAL: Vec3d = Vec3d::new(30.0, 0.0, 2.0);

pub struct Frame {
    pub world: World,
    pub state: VehicleState,
    pub pose: Pose<f64>,
    pub image: DepthImage,
}

pub fn forest(seed: u64) -> World {
    let cfg = WorldConfig { forest: Some(ForestConfig::default()), ..Default::default() };
    let keep = [Vec3d::new(0.0, 0.0, 2.0), GOAL];
    World::generate(&cfg, &keep, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Camera frame of a level vehicle at `position`, facing along `yaw`,
/// flying forward at 2 m/s.
pub fn frame(world: World, position: Vec3d, yaw: f64) -> Frame {
    let attitude = Rotation::from_euler(0.0, 0.0, yaw);
    let state = VehicleState {
        position,
        velocity: attitude.rotate(Vec3d::new(2.0, 0.0, 0.0)),
        attitude,
        yaw,
        ..Default::default()
    };
    let pose = Pose::new(attitude * camera_to_body(), position);
    let cam = CameraConfig::default();
    let intr = pyramid_planner::Intrinsics::new(
        cam.fx,
        cam.fy,
        cam.width as f64 / 2.0,
        cam.height as f64 / 2.0,
        cam.width,
        cam.height,
    )
    .unwrap();
    let image = render_depth(&world, &pose, &intr, cam.max_range).unwrap();
    Frame { world, state, pose, image }
}

/// A handful of frames from different forests and positions with at least
/// 1 m of true clearance.
pub fn forest_frames() -> Vec<Frame> {
    let mut frames = Vec::new();
    for seed in 0..4 {
        let world = forest(seed);
        for (x, y, yaw) in [(0.0, 0.0, 0.0), (6.0, 1.0, 0.2), (12.0, -1.5, -0.3)] {
            let p = Vec3d::new(x, y, 2.0);
            if world.clearance(p) > 1.0 {
                frames.push(frame(world.clone(), p, yaw));
            }
        }
    }
    frames
}

/// Back-projected pixels hashed into cubes of side `cell`.
pub struct PixelCloud {
    cell: f64,
    fx: f64,
    cells: HashMap<(i64, i64, i64), Vec<Vec3d>>,
}

impl PixelCloud {
    pub fn new(image: &DepthImage, cell: f64) -> Self {
        let intr = image.intrinsics();
        let mut cells: HashMap<_, Vec<Vec3d>> = HashMap::new();
        for j in 0..image.height() {
            for i in 0..image.width() {
                let d = image.depth(i, j);
                let q = Vec3d::new((i as f64 - intr.cx) / intr.fx * d, (j as f64 - intr.cy) / intr.fy * d, d);
                cells.entry(key(q, cell)).or_default().push(q);
            }
        }
        Self { cell, fx: intr.fx, cells }
    }

    /// Smallest `|p − q| − (r − d_q/fx)` over pixels `q` within one cell of
    /// `p`; positive means the radius-`r` ball at `p` clears every pixel up
    /// to its one-pixel footprint.
    pub fn slack(&self, p: Vec3d, r: f64) -> f64 {
        let (a, b, c) = key(p, self.cell);
        let mut worst = f64::INFINITY;
        for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    if let Some(qs) = self.cells.get(&(a + da, b + db, c + dc)) {
                        for q in qs {
                            worst = worst.min((p - *q).norm() - (r - q.z / self.fx));
                        }
                    }
                }
            }
        }
        worst
    }

    /// Minimum slack over `samples + 1` evenly spaced points of `prim_cam`.
    pub fn primitive_slack(&self, prim_cam: &QuinticPrimitive<f64>, r: f64, samples: usize) -> f64 {
        (0..=samples)
            .map(|k| self.slack(prim_cam.position(prim_cam.duration() * k as f64 / samples as f64), r))
            .fold(f64::INFINITY, f64::min)
    }
}

fn key(p: Vec3d, cell: f64) -> (i64, i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64)
}

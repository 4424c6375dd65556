use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, Pose, Vec3};

/// Vertical cylinder standing on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
}

/// Random cylinder forest parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    /// Trees per square meter over the forest rectangle.
    pub density: f64,
    pub radius_range: [f64; 2],
    pub height_range: [f64; 2],
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    /// Minimum surface-to-surface distance between trees, m.
    pub min_gap: f64,
    /// No tree surface within this horizontal distance of start or goal, m.
    pub clear_radius: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            density: 0.08,
            radius_range: [0.15, 0.4],
            height_range: [6.0, 12.0],
            x_range: [3.0, 27.0],
            y_range: [-10.0, 10.0],
            min_gap: 1.6,
            clear_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub ground_height: f64,
    pub forest: Option<ForestConfig>,
    /// Extra fixed cylinders added after the forest.
    pub cylinders: Vec<Cylinder>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { ground_height: 0.0, forest: None, cylinders: Vec::new() }
    }
}

/// Static scene: a ground plane and vertical cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub ground_height: f64,
    pub cylinders: Vec<Cylinder>,
    /// `[x_min, x_max, y_min, y_max]`.
    pub bounds: [f64; 4],
}

impl World {
    pub fn empty(ground_height: f64) -> Self {
        Self {
            ground_height,
            cylinders: Vec::new(),
            bounds: [f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY],
        }
    }

    /// Builds the world; forest placement draws from `rng`.
    pub fn generate<R: Rng>(config: &WorldConfig, keep_clear: &[Vec3<f64>], rng: &mut R) -> Result<Self> {
        let mut world = Self::empty(config.ground_height);
        if let Some(f) = &config.forest {
            validate_forest(f)?;
            world.bounds = [f.x_range[0], f.x_range[1], f.y_range[0], f.y_range[1]];
            world.cylinders = poisson_forest(f, config.ground_height, keep_clear, rng);
        }
        for c in &config.cylinders {
            if !(c.radius > 0.0 && c.height > 0.0) {
                return Err(Error::ConfigInvalid(format!("cylinder {c:?} needs positive radius and height")));
            }
        }
        world.cylinders.extend(config.cylinders.iter().copied());
        Ok(world)
    }

    /// Ground-truth clearance from `p` to the nearest surface.
    pub fn clearance(&self, p: Vec3<f64>) -> f64 {
        let mut best = p.z - self.ground_height;
        for c in &self.cylinders {
            best = best.min(cylinder_distance(c, self.ground_height, p));
        }
        best
    }

    /// Cylinders that can come within `reach` of `p` horizontally.
    pub fn nearby(&self, p: Vec3<f64>, reach: f64) -> Vec<Cylinder> {
        self.cylinders.iter().filter(|c| (c.x - p.x).hypot(c.y - p.y) - c.radius <= reach).copied().collect()
    }
}

fn validate_forest(f: &ForestConfig) -> Result<()> {
    let ordered = |[a, b]: [f64; 2]| a <= b && a.is_finite() && b.is_finite();
    let ok = f.density >= 0.0
        && f.radius_range[0] > 0.0
        && ordered(f.radius_range)
        && f.height_range[0] > 0.0
        && ordered(f.height_range)
        && ordered(f.x_range)
        && ordered(f.y_range)
        && f.min_gap >= 0.0
        && f.clear_radius >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("invalid forest parameters {f:?}")))
    }
}

/// Dart throwing with a minimum spacing until the target count is reached
/// or attempts run out.
fn poisson_forest<R: Rng>(f: &ForestConfig, ground: f64, keep_clear: &[Vec3<f64>], rng: &mut R) -> Vec<Cylinder> {
    let area = (f.x_range[1] - f.x_range[0]) * (f.y_range[1] - f.y_range[0]);
    let target = (f.density * area).round() as usize;
    let mut trees: Vec<Cylinder> = Vec::with_capacity(target);
    let mut attempts = 0;
    let span = |[a, b]: [f64; 2], rng: &mut R| a + (b - a) * rng.gen::<f64>();
    while trees.len() < target && attempts < 200 * target.max(1) {
        attempts += 1;
        let c = Cylinder {
            x: span(f.x_range, rng),
            y: span(f.y_range, rng),
            radius: span(f.radius_range, rng),
            height: ground + span(f.height_range, rng),
        };
        let spaced = trees.iter().all(|t| (t.x - c.x).hypot(t.y - c.y) >= t.radius + c.radius + f.min_gap);
        let clear = keep_clear.iter().all(|p| (p.x - c.x).hypot(p.y - c.y) >= c.radius + f.clear_radius);
        if spaced && clear {
            trees.push(c);
        }
    }
    trees
}

fn cylinder_distance(c: &Cylinder, ground: f64, p: Vec3<f64>) -> f64 {
    let radial = (p.x - c.x).hypot(p.y - c.y) - c.radius;
    let below = ground - p.z;
    let above = p.z - c.height;
    let vertical = below.max(above);
    if vertical <= 0.0 {
        radial
    } else if radial <= 0.0 {
        vertical
    } else {
        radial.hypot(vertical)
    }
}

/// Distance along `dir` from `o` to the first surface, if any.
fn ray_hit(world: &World, cylinders: &[Cylinder], o: Vec3<f64>, dir: Vec3<f64>) -> Option<f64> {
    let mut best = f64::INFINITY;
    let g = world.ground_height;
    if dir.z < 0.0 {
        let t = (g - o.z) / dir.z;
        if t > 0.0 {
            best = t;
        }
    }
    for c in cylinders {
        let (dx, dy) = (o.x - c.x, o.y - c.y);
        let a = dir.x * dir.x + dir.y * dir.y;
        let b = 2.0 * (dx * dir.x + dy * dir.y);
        let cc = dx * dx + dy * dy - c.radius * c.radius;
        if a > 0.0 {
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                let t = (-b - disc.sqrt()) / (2.0 * a);
                if t > 0.0 && t < best {
                    let z = o.z + t * dir.z;
                    if z >= g && z <= c.height {
                        best = t;
                    }
                }
            }
        }
        if dir.z != 0.0 {
            let t = (c.height - o.z) / dir.z;
            if t > 0.0 && t < best {
                let (x, y) = (o.x + t * dir.x - c.x, o.y + t * dir.y - c.y);
                if x * x + y * y <= c.radius * c.radius {
                    best = t;
                }
            }
        }
    }
    best.is_finite().then_some(best)
}

/// Renders planar depth seen from `camera_pose` (camera to inertial).
///
/// Rays are scaled to unit camera depth, so the hit parameter is the planar
/// depth directly. Misses and hits beyond `max_range` read `max_range`.
pub fn render_depth(
    world: &World,
    camera_pose: &Pose<f64>,
    intr: &CameraIntrinsics<f64>,
    max_range: f64,
) -> Result<DepthImage> {
    let o = camera_pose.translation;
    let corner = intr.ray(0.0, 0.0).norm().max(intr.ray(intr.width_f(), intr.height_f()).norm());
    let reach = max_range * corner;
    let cylinders = world.nearby(o, reach);
    let (w, h) = (intr.width, intr.height);
    let mut depths = vec![0.0; w * h];
    depths.par_chunks_mut(w).enumerate().for_each(|(j, row)| {
        for (i, d) in row.iter_mut().enumerate() {
            let dir = camera_pose.transform_vector(intr.ray(i as f64, j as f64));
            *d = ray_hit(world, &cylinders, o, dir).map_or(max_range, |t| t.min(max_range));
        }
    });
    DepthImage::new(*intr, depths, max_range)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::{camera_to_body, Rotation};

    fn intr() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(50.0, 50.0, 40.0, 30.0, 80, 60).unwrap()
    }

    fn level_camera(at: Vec3<f64>, yaw: f64) -> Pose<f64> {
        Pose::new(Rotation::from_euler(0.0, 0.0, yaw) * camera_to_body(), at)
    }

    #[test]
    fn empty_sky_reads_max_range() {
        let world = World::empty(-1e6);
        let img = render_depth(&world, &level_camera(Vec3::new(0.0, 0.0, 2.0), 0.0), &intr(), 10.0).unwrap();
        assert!(img.depths().iter().all(|&d| d == 10.0));
    }

    #[test]
    fn wall_like_cylinder_center_depth() {
        let mut world = World::empty(-1e6);
        // a huge cylinder approximates a wall facing the camera
        world.cylinders.push(Cylinder { x: 5.0 + 1e6, y: 0.0, radius: 1e6, height: 1e6 });
        let img = render_depth(&world, &level_camera(Vec3::new(0.0, 0.0, 2.0), 0.0), &intr(), 20.0).unwrap();
        assert!((img.depth(40, 30) - 5.0).abs() < 1e-6);
    }

    #[test]
    fn cylinder_behind_camera_is_invisible() {
        let mut world = World::empty(-1e6);
        world.cylinders.push(Cylinder { x: -3.0, y: 0.0, radius: 0.5, height: 10.0 });
        let img = render_depth(&world, &level_camera(Vec3::new(0.0, 0.0, 2.0), 0.0), &intr(), 10.0).unwrap();
        assert!(img.depths().iter().all(|&d| d == 10.0));
    }

    #[test]
    fn ground_depth_matches_geometry() {
        let world = World::empty(0.0);
        let intr = intr();
        let img = render_depth(&world, &level_camera(Vec3::new(0.0, 0.0, 2.0), 0.0), &intr, 100.0).unwrap();
        // bottom row ray drops (59 - 30) / 50 per unit depth
        assert!((img.depth(40, 59) - 2.0 * 50.0 / 29.0).abs() < 1e-9);
    }

    #[test]
    fn forest_respects_spacing_and_clear_zones() {
        let cfg = WorldConfig { forest: Some(ForestConfig::default()), ..Default::default() };
        let start = Vec3::new(0.0, 0.0, 2.0);
        let goal = Vec3::new(30.0, 0.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = World::generate(&cfg, &[start, goal], &mut rng).unwrap();
        assert!(w.cylinders.len() >= 30);
        for (k, a) in w.cylinders.iter().enumerate() {
            for b in &w.cylinders[k + 1..] {
                assert!((a.x - b.x).hypot(a.y - b.y) >= a.radius + b.radius + 1.6 - 1e-12);
            }
        }
        assert!(w.clearance(start) >= 2.0 - 1e-12);
        let again = World::generate(&cfg, &[start, goal], &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn clearance_cases() {
        let mut w = World::empty(0.0);
        w.cylinders.push(Cylinder { x: 0.0, y: 0.0, radius: 1.0, height: 5.0 });
        assert!((w.clearance(Vec3::new(3.0, 0.0, 2.5)) - 2.0).abs() < 1e-12);
        assert!((w.clearance(Vec3::new(0.0, 0.0, 8.0)) - 3.0).abs() < 1e-12);
        assert!((w.clearance(Vec3::new(4.0, 0.0, 9.0)) - 5.0).abs() < 1e-12);
        assert!((w.clearance(Vec3::new(9.0, 0.0, 0.5)) - 0.5).abs() < 1e-12);
    }
}

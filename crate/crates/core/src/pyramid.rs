//! Free-space pyramids inflated from a depth image and the coverage-based
//! collision check built on them.
//!
//! A pyramid has its apex at the camera center and spans a pixel rectangle
//! whose pixels all lie at or beyond its base depth. Shrinking every face
//! inward by the vehicle radius gives a region where the vehicle center can
//! sit without touching anything the camera saw. A trajectory is accepted
//! when a short chain of such regions covers its whole duration.
//!
//! The offset faces meet in front of the camera, so the trajectory check
//! uses a wider region: points whose distance to the base and to everything
//! beyond each face, as bounded by the depth image, is at least the radius.
//! Space outside the field of view counts as occupied from the free
//! distance on.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{project, CameraIntrinsics, DepthImage, Vec3};
use crate::poly::Poly;
use crate::trajectory::QuinticPrimitive;

/// Maximum number of inflated pyramids a single primitive may use.
pub const PYRAMID_CAP: usize = 8;
/// Default out-of-view free distance in meters.
pub const DEFAULT_FREE_DISTANCE: f64 = 3.0;

const EXIT_TOL: f64 = 1e-6;
const START_SLACK: f64 = 1e-9;
const BLOCK: usize = 8;
/// Extra base depth, beyond the query, kept by the inflation variants the
/// trajectory check tries.
const FLOOR_STEPS: [f64; 4] = [0.0, 1.0, 3.0, f64::INFINITY];
const TRACE_EPS: f64 = 1e-7;
const MAX_TRACE_STEPS: usize = 4096;

/// Pixel rectangle, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PixelRect {
    pub i_min: usize,
    pub i_max: usize,
    pub j_min: usize,
    pub j_max: usize,
}

/// Rectangular free-space pyramid in the camera frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pyramid {
    pub apex: Vec3<f64>,
    pub base_depth: f64,
    pub shrunk_base_depth: f64,
    /// Expanded footprint in pixel coordinates: `[u_min, u_max, v_min, v_max]`.
    pub rect: [f64; 4],
    pub pixels: PixelRect,
    /// Unit inward normals of the left, right, top and bottom faces. The faces
    /// pass through the apex; the shrunk faces are offset inward by `radius`.
    pub normals: [Vec3<f64>; 4],
    pub radius: f64,
    /// Bounds on what lies outside the expanded pyramid, used near the apex.
    pub guards: Vec<Guard>,
}

/// Everything beyond a plane through the apex is at least `reach` from the
/// apex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Guard {
    /// Unit normal pointing away from the guarded side.
    pub normal: Vec3<f64>,
    pub reach: f64,
}

impl Guard {
    /// Distance from `p` to `{x : normal·x <= 0, |x| >= reach}`, given
    /// `sq = |p|²`.
    fn distance(&self, p: Vec3<f64>, sq: f64) -> f64 {
        let a = self.normal.dot(p);
        if a <= 0.0 {
            return (self.reach - sq.sqrt()).max(0.0);
        }
        let s = (sq - a * a).max(0.0).sqrt();
        if s >= self.reach {
            a
        } else {
            a.hypot(self.reach - s)
        }
    }
}

impl Pyramid {
    fn new(intr: &CameraIntrinsics<f64>, pixels: PixelRect, base_depth: f64, radius: f64, guards: Vec<Guard>) -> Self {
        let rect = [
            pixels.i_min as f64 - 0.5,
            pixels.i_max as f64 + 0.5,
            pixels.j_min as f64 - 0.5,
            pixels.j_max as f64 + 0.5,
        ];
        Self {
            apex: Vec3::zero(),
            base_depth,
            shrunk_base_depth: base_depth - radius,
            rect,
            pixels,
            normals: face_normals(intr, rect),
            radius,
            guards,
        }
    }

    /// Signed margins of `p` against the four shrunk lateral faces and the
    /// shrunk base; all non-negative means inside.
    fn margins(&self, p: Vec3<f64>) -> [f64; 5] {
        let n = &self.normals;
        [
            n[0].dot(p) - self.radius,
            n[1].dot(p) - self.radius,
            n[2].dot(p) - self.radius,
            n[3].dot(p) - self.radius,
            self.shrunk_base_depth - p.z,
        ]
    }

    fn contains_within(&self, p: Vec3<f64>, slack: f64) -> bool {
        p.z >= -slack && self.margins(p).iter().all(|&m| m >= -slack)
    }

    /// Polynomials in `t` that stay non-negative while the primitive is inside.
    fn constraint_polys(&self, prim: &QuinticPrimitive<f64>) -> Vec<Poly<f64>> {
        let mut polys: Vec<_> = self.normals.iter().map(|&n| prim.projected_position_poly(n, -self.radius)).collect();
        polys.push(prim.projected_position_poly(-Vec3::unit_z(), self.shrunk_base_depth));
        polys
    }

    /// Clearance of `p` from the base and from every guarded set, less the
    /// radius.
    pub fn margin(&self, p: Vec3<f64>) -> f64 {
        let sq = p.norm_squared();
        self.guards.iter().fold(self.shrunk_base_depth - p.z, |m, g| m.min(g.distance(p, sq) - self.radius))
    }

    /// True when the vehicle center can sit at `p`. This is a superset of
    /// the shrunk pyramid that also reaches back to the apex.
    pub fn covers(&self, p: Vec3<f64>) -> bool {
        self.margin(p) >= 0.0
    }

    /// Time up to which the primitive provably stays covered, starting from
    /// a covered `start`, or `None` if it stays covered until the end.
    ///
    /// The margin changes no faster than the speed, so stepping by margin
    /// over peak speed never skips an exit.
    fn covered_exit(&self, prim: &QuinticPrimitive<f64>, start: f64) -> Option<f64> {
        let end = prim.duration();
        let v = (0..3).map(|k| prim.per_axis_peak_speed(k).powi(2)).sum::<f64>().sqrt();
        let mut t = start;
        for _ in 0..MAX_TRACE_STEPS {
            if t >= end {
                return None;
            }
            let m = self.margin(prim.position(t));
            if m < TRACE_EPS {
                return Some(t);
            }
            if v <= 0.0 {
                return None;
            }
            t += m / v;
        }
        Some(t.min(end))
    }
}

fn face_normals(intr: &CameraIntrinsics<f64>, [u_min, u_max, v_min, v_max]: [f64; 4]) -> [Vec3<f64>; 4] {
    let unit = |v: Vec3<f64>| v.normalized().expect("focal lengths are positive");
    [
        unit(Vec3::new(intr.fx, 0.0, intr.cx - u_min)),
        unit(Vec3::new(-intr.fx, 0.0, u_max - intr.cx)),
        unit(Vec3::new(0.0, intr.fy, intr.cy - v_min)),
        unit(Vec3::new(0.0, -intr.fy, v_max - intr.cy)),
    ]
}

/// True when `point_cam` is inside the shrunk pyramid.
pub fn point_in_shrunk(pyramid: &Pyramid, point_cam: Vec3<f64>) -> bool {
    pyramid.contains_within(point_cam, 0.0)
}

/// Earliest time in `(t_start, T]` at which the primitive leaves the shrunk
/// pyramid, or `None` if it stays inside until the end.
///
/// The returned time is the last instant known to be inside, within 1e-6 s
/// of the actual crossing.
pub fn first_exit_time(prim: &QuinticPrimitive<f64>, pyramid: &Pyramid, t_start: f64) -> Result<Option<f64>> {
    if !pyramid.contains_within(prim.position(t_start), START_SLACK) {
        return Err(Error::StartOutsidePyramid);
    }
    Ok(earliest_crossing(&pyramid.constraint_polys(prim), t_start, prim.duration()))
}

fn earliest_crossing(polys: &[Poly<f64>], start: f64, end: f64) -> Option<f64> {
    polys.iter().filter_map(|p| p.first_negative_crossing(start, end, EXIT_TOL, START_SLACK)).min_by(f64::total_cmp)
}

/// Verdict of [`FreeSpaceModel::trajectory_collision_free`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionVerdict {
    CollisionFree,
    InCollision,
}

/// Ball around the camera, inside the field of view, that is closer than
/// every sensed surface by at least the vehicle radius.
#[derive(Debug, Clone, PartialEq)]
struct NearField {
    normals: [Vec3<f64>; 4],
    radius: f64,
}

impl NearField {
    fn contains(&self, p: Vec3<f64>) -> bool {
        self.radius > 0.0
            && p.norm_squared() <= self.radius * self.radius + START_SLACK
            && self.normals.iter().all(|n| n.dot(p) >= -START_SLACK)
    }

    fn exit_time(&self, prim: &QuinticPrimitive<f64>, start: f64) -> Option<f64> {
        let mut polys: Vec<_> = self.normals.iter().map(|&n| prim.projected_position_poly(n, 0.0)).collect();
        let mut sq = Poly::new(&[self.radius * self.radius]);
        for axis in 0..3 {
            let p = prim.position_poly(axis);
            sq = sq.add(&p.mul(&p).scale(-1.0));
        }
        polys.push(sq);
        earliest_crossing(&polys, start, prim.duration())
    }
}

/// Offset, in normalized image coordinates, from the principal point to the
/// nearest point of the footprint of pixel `k` along one axis.
fn nearest_offset(k: usize, c: f64, f: f64) -> f64 {
    (c.clamp(k as f64 - 0.5, k as f64 + 0.5) - c) / f
}

fn scan_min(s: &[f64]) -> f64 {
    s.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Sparse table over `blocks` consecutive blocks: level `k + 1` combines
/// entries `span` blocks apart, which sit `span * step` apart in memory.
fn doubling_table(mut level: Vec<f64>, blocks: usize, block_of: impl Fn(usize) -> usize, step: usize) -> Vec<Vec<f64>> {
    let mut table = Vec::new();
    let mut span = 1;
    while 2 * span <= blocks {
        let next = (0..level.len())
            .map(|e| if block_of(e) + span < blocks { level[e].min(level[e + span * step]) } else { level[e] })
            .collect();
        table.push(std::mem::replace(&mut level, next));
        span *= 2;
    }
    table.push(level);
    table
}

/// Depths with fast minima over row and column strips. Whole blocks of
/// `BLOCK` pixels are covered by sparse tables, so a query reads two table
/// entries plus the partial blocks at its ends.
#[derive(Debug, Clone)]
struct StripMins<'a> {
    values: &'a [f64],
    width: usize,
    height: usize,
    /// `rows[k][j * row_blocks + b]`: minimum of blocks `b..b + 2^k` of row `j`.
    rows: Vec<Vec<f64>>,
    row_blocks: usize,
    /// `cols[k][b * width + i]`: minimum of blocks `b..b + 2^k` of column `i`.
    cols: Vec<Vec<f64>>,
}

impl<'a> StripMins<'a> {
    fn new(values: &'a [f64], w: usize, h: usize) -> Self {
        let (row_blocks, col_blocks) = (w.div_ceil(BLOCK), h.div_ceil(BLOCK));
        let row_base = values.chunks(w).flat_map(|r| r.chunks(BLOCK).map(scan_min)).collect();
        let mut col_base = Vec::with_capacity(col_blocks * w);
        for band in values.chunks(BLOCK * w) {
            let mut acc = band[..w].to_vec();
            for row in band.chunks(w).skip(1) {
                acc.iter_mut().zip(row).for_each(|(a, &v)| *a = a.min(v));
            }
            col_base.extend(acc);
        }
        Self {
            values,
            width: w,
            height: h,
            rows: doubling_table(row_base, row_blocks, |e| e % row_blocks, 1),
            row_blocks,
            cols: doubling_table(col_base, col_blocks, |e| e / w, w),
        }
    }

    /// Whole blocks inside `a..=b` as `(first, last, level)`, if any.
    fn whole_blocks(a: usize, b: usize) -> Option<(usize, usize, usize)> {
        let (first, last) = (a.div_ceil(BLOCK), (b + 1) / BLOCK);
        (first < last).then(|| (first, last, (last - first).ilog2() as usize))
    }

    /// Minimum over row `j`, columns `a..=b`.
    fn row_min(&self, j: usize, a: usize, b: usize) -> f64 {
        let row = &self.values[j * self.width..(j + 1) * self.width];
        let Some((first, last, k)) = Self::whole_blocks(a, b) else { return scan_min(&row[a..=b]) };
        let (t, base) = (&self.rows[k], j * self.row_blocks);
        scan_min(&row[a..first * BLOCK])
            .min(scan_min(&row[last * BLOCK..=b]))
            .min(t[base + first])
            .min(t[base + last - (1 << k)])
    }

    /// Minimum over column `i`, rows `a..=b`.
    fn col_min(&self, i: usize, a: usize, b: usize) -> f64 {
        let w = self.width;
        let scan = |r: std::ops::Range<usize>| r.map(|j| self.values[j * w + i]).fold(f64::INFINITY, f64::min);
        let Some((first, last, k)) = Self::whole_blocks(a, b) else { return scan(a..b + 1) };
        let t = &self.cols[k];
        scan(a..first * BLOCK).min(scan(last * BLOCK..b + 1)).min(t[first * w + i]).min(t[(last - (1 << k)) * w + i])
    }
}

/// Lower bounds on the distance from the camera to what the pixels saw,
/// used to guard the sides of a pyramid. A pixel at depth `d` saw nothing
/// closer than `d * sqrt(1 + x² + y²)`, where `(x, y)` is the nearest point
/// of its footprint in normalized coordinates; strips bound `x` and `y`
/// separately.
#[derive(Debug, Clone)]
struct Beyond {
    /// Bound over each whole column.
    cols: Vec<f64>,
    x2: Vec<f64>,
    y2: Vec<f64>,
}

impl Beyond {
    fn new(strips: &StripMins, intr: &CameraIntrinsics<f64>) -> Self {
        let x2: Vec<f64> = (0..strips.width).map(|i| nearest_offset(i, intr.cx, intr.fx).powi(2)).collect();
        let y2 = (0..strips.height).map(|j| nearest_offset(j, intr.cy, intr.fy).powi(2)).collect();
        let cols = (0..strips.width).map(|i| strips.col_min(i, 0, strips.height - 1) * (1.0 + x2[i]).sqrt()).collect();
        Self { cols, x2, y2 }
    }

    fn min(&self) -> f64 {
        scan_min(&self.cols)
    }

    /// Guards for the region outside `px`. Each side is cut into bands that
    /// double in width away from the rectangle; a band guards its pixels with
    /// the plane on its inner edge. Left and right bands span whole columns,
    /// upper and lower ones only the columns of the rectangle. The faces of
    /// the rectangle itself guard everything out of view at `free`.
    fn guards(&self, strips: &StripMins, intr: &CameraIntrinsics<f64>, px: PixelRect, free: f64) -> Vec<Guard> {
        let rect = [px.i_min as f64 - 0.5, px.i_max as f64 + 0.5, px.j_min as f64 - 0.5, px.j_max as f64 + 0.5];
        let mut out: Vec<Guard> =
            face_normals(intr, rect).into_iter().map(|normal| Guard { normal, reach: free }).collect();
        let (w, h) = (strips.width, strips.height);
        let mut push = |normal: Vec3<f64>, reach: f64| {
            if reach < free {
                out.push(Guard { normal, reach });
            }
        };
        let unit = |v: Vec3<f64>| v.normalized().expect("focal lengths are positive");
        let x2 = scan_min(&self.x2[px.i_min..=px.i_max]);
        let rows = |a: usize, b: usize| {
            (a..b)
                .map(|j| strips.row_min(j, px.i_min, px.i_max) * (1.0 + x2 + self.y2[j]).sqrt())
                .fold(f64::INFINITY, f64::min)
        };
        let cols = |a: usize, b: usize| scan_min(&self.cols[a..b]);
        for (a, b) in bands_down(px.i_min) {
            push(unit(Vec3::new(intr.fx, 0.0, intr.cx - (b as f64 - 0.5))), cols(a, b));
        }
        for (a, b) in bands_up(px.i_max + 1, w) {
            push(unit(Vec3::new(-intr.fx, 0.0, a as f64 - 0.5 - intr.cx)), cols(a, b));
        }
        for (a, b) in bands_down(px.j_min) {
            push(unit(Vec3::new(0.0, intr.fy, intr.cy - (b as f64 - 0.5))), rows(a, b));
        }
        for (a, b) in bands_up(px.j_max + 1, h) {
            push(unit(Vec3::new(0.0, -intr.fy, a as f64 - 0.5 - intr.cy)), rows(a, b));
        }
        out
    }
}

/// Half-open index bands below `end`, widths 1, 2, 4, ... going down.
fn bands_down(end: usize) -> Vec<(usize, usize)> {
    let (mut b, mut width, mut out) = (end, 1, Vec::new());
    while b > 0 {
        let a = b.saturating_sub(width);
        out.push((a, b));
        b = a;
        width *= 2;
    }
    out
}

/// Half-open index bands from `start` up to `end`, widths 1, 2, 4, ...
fn bands_up(start: usize, end: usize) -> Vec<(usize, usize)> {
    let (mut a, mut width, mut out) = (start, 1, Vec::new());
    while a < end {
        let b = (a + width).min(end);
        out.push((a, b));
        a = b;
        width *= 2;
    }
    out
}

/// Free space described by one depth image for one planning cycle.
///
/// Pyramids inflated while checking a candidate are cached and reused for
/// later candidates of the same cycle.
#[derive(Debug, Clone)]
pub struct FreeSpaceModel<'a> {
    image: &'a DepthImage,
    radius: f64,
    free_distance: f64,
    strips: StripMins<'a>,
    beyond: Beyond,
    near: NearField,
    pyramids: Vec<Pyramid>,
}

impl<'a> FreeSpaceModel<'a> {
    pub fn new(image: &'a DepthImage, radius: f64, free_distance: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::ConfigInvalid(format!("vehicle radius must be positive, got {radius}")));
        }
        if !(free_distance > 0.0) {
            return Err(Error::ConfigInvalid(format!("free distance must be positive, got {free_distance}")));
        }
        let intr = image.intrinsics();
        let (w, h) = (image.width(), image.height());
        let strips = StripMins::new(image.depths(), w, h);
        let beyond = Beyond::new(&strips, intr);
        let full = [-0.5, intr.width_f() - 0.5, -0.5, intr.height_f() - 0.5];
        let near = NearField { normals: face_normals(intr, full), radius: free_distance.min(beyond.min()) - radius };
        Ok(Self { image, radius, free_distance, strips, beyond, near, pyramids: Vec::new() })
    }

    pub fn image(&self) -> &DepthImage {
        self.image
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn free_distance(&self) -> f64 {
        self.free_distance
    }

    /// Radius of the near-field ball around the camera (may be non-positive).
    pub fn near_field_radius(&self) -> f64 {
        self.near.radius
    }

    /// Pyramids generated so far in this cycle.
    pub fn pyramids(&self) -> &[Pyramid] {
        &self.pyramids
    }

    /// Grows a pyramid around the pixel that `point_cam` projects to.
    ///
    /// Growth adds one column or row at a time, cycling right, down, left and
    /// up. A strip whose pixels are all at least the current base depth is
    /// accepted. Otherwise the base is lowered to the strip minimum when the
    /// query stays in front of the shrunk base, and that side stops if not.
    /// Fails with `NotFound` unless the result covers the query.
    pub fn inflate_pyramid(&self, point_cam: Vec3<f64>) -> Result<Pyramid> {
        self.inflate_with_floor(point_cam, point_cam.z).0
    }

    /// Like [`Self::inflate_pyramid`], but the base is only lowered while the
    /// shrunk base stays beyond `floor`, so growth trades width for depth.
    ///
    /// Also returns the lowest shrunk base the growth accepted; any floor
    /// below it gives the same result.
    fn inflate_with_floor(&self, point_cam: Vec3<f64>, floor: f64) -> (Result<Pyramid>, f64) {
        let mut lowest = f64::INFINITY;
        let result = self.grow(point_cam, floor, &mut lowest);
        (result, lowest)
    }

    fn grow(&self, point_cam: Vec3<f64>, floor: f64, lowest: &mut f64) -> Result<Pyramid> {
        let intr = self.image.intrinsics();
        let (u, v) = project(point_cam, intr).map_err(|_| Error::OutOfFrustum)?;
        let (i, j) = intr.pixel_at(u, v).ok_or(Error::OutOfFrustum)?;
        let (w, h) = (intr.width, intr.height);
        let r = self.radius;
        let fits = |d: f64| d - r > floor;

        let mut depth = self.image.depth(i, j);
        if depth - r <= point_cam.z {
            return Err(Error::NotFound);
        }
        let mut px = PixelRect { i_min: i, i_max: i, j_min: j, j_max: j };
        let mut open = [true; 4];
        while open.iter().any(|&o| o) {
            for (side, is_open) in open.iter_mut().enumerate() {
                if !*is_open {
                    continue;
                }
                let strip = match side {
                    0 if px.i_max + 1 < w => Some(self.strips.col_min(px.i_max + 1, px.j_min, px.j_max)),
                    1 if px.j_max + 1 < h => Some(self.strips.row_min(px.j_max + 1, px.i_min, px.i_max)),
                    2 if px.i_min > 0 => Some(self.strips.col_min(px.i_min - 1, px.j_min, px.j_max)),
                    3 if px.j_min > 0 => Some(self.strips.row_min(px.j_min - 1, px.i_min, px.i_max)),
                    _ => None,
                };
                let accept = match strip {
                    Some(m) if m >= depth => true,
                    Some(m) if fits(m) => {
                        depth = m;
                        *lowest = lowest.min(m - r);
                        true
                    }
                    _ => false,
                };
                if !accept {
                    *is_open = false;
                    continue;
                }
                match side {
                    0 => px.i_max += 1,
                    1 => px.j_max += 1,
                    2 => px.i_min -= 1,
                    _ => px.j_min -= 1,
                }
            }
        }
        let guards = self.beyond.guards(&self.strips, intr, px, self.free_distance);
        let pyramid = Pyramid::new(intr, px, depth, r, guards);
        if pyramid.covers(point_cam) {
            Ok(pyramid)
        } else {
            Err(Error::NotFound)
        }
    }

    /// Checks a camera-frame primitive by chaining regions from `t = 0`.
    ///
    /// At each step the region containing the current position with the
    /// latest exit time is used; a new pyramid is inflated only when no
    /// cached region makes progress. Inflation tries a few base floors and
    /// keeps the pyramid that carries the primitive furthest.
    pub fn trajectory_collision_free(&mut self, prim: &QuinticPrimitive<f64>) -> CollisionVerdict {
        let duration = prim.duration();
        let mut t = 0.0;
        let mut inflated = 0;
        let exit_or_end = |e: Option<f64>| e.unwrap_or(duration);
        while t < duration {
            let p = prim.position(t);
            let mut best = f64::NEG_INFINITY;
            if self.near.contains(p) {
                best = exit_or_end(self.near.exit_time(prim, t));
            }
            for pyr in &self.pyramids {
                if best >= duration {
                    break;
                }
                if pyr.margin(p) >= -START_SLACK {
                    best = best.max(exit_or_end(pyr.covered_exit(prim, t)));
                }
            }
            if best <= t {
                inflated += 1;
                if inflated > PYRAMID_CAP {
                    log::trace!("pyramid cap reached at t={t:.3}");
                    return CollisionVerdict::InCollision;
                }
                let Some((pyr, exit)) = self.inflate_along(prim, t) else {
                    log::trace!("inflation failed at t={t:.3}");
                    return CollisionVerdict::InCollision;
                };
                best = exit;
                if !self.pyramids.contains(&pyr) {
                    self.pyramids.push(pyr);
                }
                if best <= t {
                    return CollisionVerdict::InCollision;
                }
            }
            t = best;
        }
        CollisionVerdict::CollisionFree
    }

    /// Inflates pyramids at `prim(t)` with a few base floors and keeps the
    /// one that covers the primitive longest.
    fn inflate_along(&self, prim: &QuinticPrimitive<f64>, t: f64) -> Option<(Pyramid, f64)> {
        let p = prim.position(t);
        let mut best: Option<(Pyramid, f64)> = None;
        let mut distinct_from = f64::NEG_INFINITY;
        for extra in FLOOR_STEPS {
            let floor = p.z + extra;
            if floor < distinct_from {
                continue;
            }
            let (result, lowest) = self.inflate_with_floor(p, floor);
            distinct_from = lowest;
            let Ok(pyr) = result else { continue };
            let exit = pyr.covered_exit(prim, t).unwrap_or(prim.duration());
            if best.as_ref().is_none_or(|(_, e)| exit > *e) {
                best = Some((pyr, exit));
            }
            if exit >= prim.duration() {
                break;
            }
        }
        best
    }

    /// Writes one JSON object per cached pyramid.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.pyramids {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn intr() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0, 100, 80).unwrap()
    }

    fn uniform(d: f64) -> DepthImage {
        DepthImage::uniform(intr(), d, 10.0).unwrap()
    }

    fn blob() -> DepthImage {
        DepthImage::from_fn(
            intr(),
            10.0,
            |i, j| if (40..60).contains(&i) && (30..50).contains(&j) { 2.0 } else { 10.0 },
        )
        .unwrap()
    }

    fn line(from: Vec3<f64>, to: Vec3<f64>, t: f64) -> QuinticPrimitive<f64> {
        QuinticPrimitive::new(from, Vec3::zero(), Vec3::zero(), to, t).unwrap()
    }

    #[test]
    fn obstacle_free_image_gives_full_pyramid() {
        let img = uniform(10.0);
        let m = FreeSpaceModel::new(&img, 0.6, 10.0).unwrap();
        let p = m.inflate_pyramid(Vec3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!(p.pixels, PixelRect { i_min: 0, i_max: 99, j_min: 0, j_max: 79 });
        assert_eq!(p.base_depth, 10.0);
        assert!((p.shrunk_base_depth - 9.4).abs() < 1e-12);
        assert_eq!(m.inflate_pyramid(Vec3::new(0.0, 0.0, 9.8)), Err(Error::NotFound));
    }

    #[test]
    fn out_of_frustum_queries() {
        let img = uniform(10.0);
        let m = FreeSpaceModel::new(&img, 0.6, 10.0).unwrap();
        assert_eq!(m.inflate_pyramid(Vec3::new(0.0, 0.0, -1.0)), Err(Error::OutOfFrustum));
        assert_eq!(m.inflate_pyramid(Vec3::new(5.0, 0.0, 1.0)), Err(Error::OutOfFrustum));
    }

    #[test]
    fn pyramid_beside_blob_excludes_it() {
        let img = blob();
        let m = FreeSpaceModel::new(&img, 0.3, 10.0).unwrap();
        let p = m.inflate_pyramid(Vec3::new(-1.2, 0.0, 4.0)).unwrap();
        for j in p.pixels.j_min..=p.pixels.j_max {
            for i in p.pixels.i_min..=p.pixels.i_max {
                assert!(img.depth(i, j) >= p.base_depth);
            }
        }
        assert!(p.base_depth > 2.0);
        assert!(p.pixels.i_max < 40 || p.pixels.j_max < 30 || p.pixels.j_min >= 50);
    }

    #[test]
    fn apex_and_base_boundaries() {
        let img = uniform(10.0);
        let m = FreeSpaceModel::new(&img, 0.6, 10.0).unwrap();
        let p = m.inflate_pyramid(Vec3::new(0.0, 0.0, 5.0)).unwrap();
        // the offset faces meet in front of the camera
        assert!(!point_in_shrunk(&p, Vec3::zero()));
        assert!(point_in_shrunk(&p, Vec3::new(0.0, 0.0, p.shrunk_base_depth)));
        assert!(!point_in_shrunk(&p, Vec3::new(0.0, 0.0, p.shrunk_base_depth + 1e-9)));
    }

    #[test]
    fn exit_through_base_matches_scalar_root() {
        let img = uniform(10.0);
        let m = FreeSpaceModel::new(&img, 0.6, 10.0).unwrap();
        let p = m.inflate_pyramid(Vec3::new(0.0, 0.0, 5.0)).unwrap();
        let prim = line(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, 12.0), 2.0);
        let t = first_exit_time(&prim, &p, 0.0).unwrap().unwrap();
        let z = |t: f64| prim.position(t).z - p.shrunk_base_depth;
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if z(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((t - lo).abs() < 1e-6);
        assert!(first_exit_time(&line(Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, 0.0, 5.0), 2.0), &p, 0.0)
            .unwrap()
            .is_none());
        assert_eq!(first_exit_time(&prim, &p, 1.99), Err(Error::StartOutsidePyramid));
    }

    #[test]
    fn free_space_accepts_forward_motion() {
        let img = uniform(10.0);
        let mut m = FreeSpaceModel::new(&img, 0.6, 3.0).unwrap();
        let prim = line(Vec3::zero(), Vec3::new(0.5, -0.3, 6.0), 3.0);
        assert_eq!(m.trajectory_collision_free(&prim), CollisionVerdict::CollisionFree);
        assert!(!m.pyramids().is_empty());
        let stationary = line(Vec3::zero(), Vec3::zero(), 1.0);
        assert_eq!(m.trajectory_collision_free(&stationary), CollisionVerdict::CollisionFree);
    }

    #[test]
    fn wall_and_lateral_exit_are_rejected() {
        let img = uniform(3.0);
        let mut m = FreeSpaceModel::new(&img, 0.6, 3.0).unwrap();
        assert_eq!(
            m.trajectory_collision_free(&line(Vec3::zero(), Vec3::new(0.0, 0.0, 4.0), 2.0)),
            CollisionVerdict::InCollision
        );
        let img = uniform(10.0);
        let mut m = FreeSpaceModel::new(&img, 0.6, 3.0).unwrap();
        assert_eq!(
            m.trajectory_collision_free(&line(Vec3::zero(), Vec3::new(6.0, 0.0, 4.0), 2.0)),
            CollisionVerdict::InCollision
        );
        assert_eq!(
            m.trajectory_collision_free(&line(Vec3::zero(), Vec3::new(0.0, 0.0, -1.0), 2.0)),
            CollisionVerdict::InCollision
        );
    }

    #[test]
    fn jsonl_dump_has_one_line_per_pyramid() {
        let img = blob();
        let mut m = FreeSpaceModel::new(&img, 0.3, 2.0).unwrap();
        m.trajectory_collision_free(&line(Vec3::zero(), Vec3::new(-2.0, 0.5, 6.0), 3.0));
        let mut buf = Vec::new();
        m.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), m.pyramids().len());
        for l in text.lines() {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            assert!(v["apex"].is_object() && v["rect"].is_array() && v["base_depth"].is_number());
        }
    }

    #[test]
    fn covered_region_reaches_the_apex() {
        let img = uniform(10.0);
        let m = FreeSpaceModel::new(&img, 0.6, 3.0).unwrap();
        let p = m.inflate_pyramid(Vec3::new(0.0, 0.0, 5.0)).unwrap();
        assert!(!point_in_shrunk(&p, Vec3::new(0.0, 0.0, 0.5)));
        assert!(p.covers(Vec3::zero()));
        assert!(p.covers(Vec3::new(0.0, 0.0, 0.5)));
        assert!(!p.covers(Vec3::new(0.0, 0.0, 9.5)));
        // nothing guards points outside the view beyond the free distance
        assert!(!p.covers(Vec3::new(3.0, 0.0, 0.1)));
    }

    #[test]
    fn covered_exit_never_overshoots() {
        let img = blob();
        let mut m = FreeSpaceModel::new(&img, 0.3, 3.0).unwrap();
        let prim = line(Vec3::zero(), Vec3::new(0.2, 0.0, 6.0), 3.0);
        assert_eq!(m.trajectory_collision_free(&prim), CollisionVerdict::InCollision);
        let p = m.inflate_pyramid(Vec3::new(0.0, 0.0, 0.5)).unwrap();
        let exit = p.covered_exit(&prim, 0.2).unwrap();
        for k in 0..=1000 {
            let t = 0.2 + (exit - 0.2) * k as f64 / 1000.0;
            assert!(p.margin(prim.position(t)) >= 0.0);
        }
        assert!(p.margin(prim.position(exit + 1e-3)) < 1e-3);
    }

    /// Distance from `p` to the half-space side of the plane through the
    /// origin and two corner rays, computed from the rays directly.
    fn corner_ray_oracle(p: &Pyramid, intr: &CameraIntrinsics<f64>, q: Vec3<f64>) -> bool {
        let [u0, u1, v0, v1] = p.rect;
        let ray = |u: f64, v: f64| intr.ray(u, v);
        let corners = [ray(u0, v0), ray(u1, v0), ray(u1, v1), ray(u0, v1)];
        // corners run clockwise in the image, so cross products point inward
        (0..4).all(|k| {
            let n = corners[k].cross(corners[(k + 1) % 4]).normalized().unwrap();
            n.dot(q) >= p.radius
        }) && q.z <= p.base_depth - p.radius
            && q.z >= 0.0
    }

    proptest! {
        #[test]
        fn shrunk_matches_corner_ray_oracle(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -1.0..11.0f64) {
            let img = blob();
            let m = FreeSpaceModel::new(&img, 0.3, 10.0).unwrap();
            let p = m.inflate_pyramid(Vec3::new(-1.2, 0.0, 4.0)).unwrap();
            let q = Vec3::new(x, y, z);
            let a = point_in_shrunk(&p, q);
            let b = corner_ray_oracle(&p, &intr(), q);
            // only disagree within rounding of a face
            if a != b {
                let worst = p.margins(q).iter().map(|m| m.abs()).fold(f64::INFINITY, f64::min);
                prop_assert!(worst < 1e-9);
            }
        }

        #[test]
        fn covered_contains_shrunk(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
            let img = blob();
            let m = FreeSpaceModel::new(&img, 0.3, 3.0).unwrap();
            let p = m.inflate_pyramid(Vec3::new(-1.2, 0.0, 4.0)).unwrap();
            let [u0, u1, v0, v1] = p.rect;
            let q = intr().ray(u0 + a * (u1 - u0), v0 + b * (v1 - v0)) * (c * p.shrunk_base_depth);
            prop_assume!(point_in_shrunk(&p, q));
            prop_assert!(p.covers(q));
        }

        #[test]
        fn covered_points_clear_every_pixel(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, qi in 0usize..4) {
            let img = blob();
            let m = FreeSpaceModel::new(&img, 0.3, 3.0).unwrap();
            let seeds = [Vec3::new(-1.2, 0.0, 4.0), Vec3::new(0.0, 0.0, 0.4), Vec3::new(1.5, 1.0, 5.0), Vec3::new(0.0, -0.8, 1.5)];
            let Ok(p) = m.inflate_pyramid(seeds[qi]) else { return Ok(()) };
            let [u0, u1, v0, v1] = p.rect;
            let q = intr().ray(u0 + a * (u1 - u0), v0 + b * (v1 - v0)) * (c * p.base_depth);
            prop_assume!(p.covers(q));
            for j in 0..img.height() {
                for i in 0..img.width() {
                    prop_assert!((img.point(i, j) - q).norm() >= p.radius - 1e-9);
                }
            }
        }

        #[test]
        fn shrunk_points_clear_expanded_faces(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
            let img = blob();
            let m = FreeSpaceModel::new(&img, 0.3, 10.0).unwrap();
            let p = m.inflate_pyramid(Vec3::new(-1.2, 0.0, 4.0)).unwrap();
            let [u0, u1, v0, v1] = p.rect;
            let q = intr().ray(u0 + a * (u1 - u0), v0 + b * (v1 - v0)) * (c * p.shrunk_base_depth);
            prop_assume!(point_in_shrunk(&p, q));
            for n in p.normals {
                prop_assert!(n.dot(q) >= p.radius - 1e-12);
            }
            prop_assert!(p.base_depth - q.z >= p.radius - 1e-12);
        }
        #[test]
        fn strip_minima_match_brute_force(
            w in 1usize..40, h in 1usize..40, seed in any::<u64>(), q in proptest::collection::vec(any::<(usize, usize, usize)>(), 20),
        ) {
            let mut x = seed | 1;
            let values: Vec<f64> = (0..w * h).map(|_| { x ^= x << 13; x ^= x >> 7; x ^= x << 17; (x % 1000) as f64 }).collect();
            let s = StripMins::new(&values, w, h);
            for (line, a, b) in q {
                let j = line % h;
                let (a, b) = { let (a, b) = (a % w, b % w); (a.min(b), a.max(b)) };
                let brute = (a..=b).map(|i| values[j * w + i]).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(s.row_min(j, a, b), brute);
                let i = line % w;
                let (a, b) = { let (a, b) = (a % h, b % h); (a.min(b), a.max(b)) };
                let brute = (a..=b).map(|j| values[j * w + i]).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(s.col_min(i, a, b), brute);
            }
        }
    }
}

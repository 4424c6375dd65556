use std::io::{BufRead, Write};

use super::{back_project, CameraIntrinsics, Vec3};
use crate::error::{Error, Result};

/// Row-major planar depth image in meters.
///
/// Pixels without a return hold `max_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    intrinsics: CameraIntrinsics<f64>,
    depths: Vec<f64>,
    max_range: f64,
}

impl DepthImage {
    pub fn new(intrinsics: CameraIntrinsics<f64>, depths: Vec<f64>, max_range: f64) -> Result<Self> {
        intrinsics.validate()?;
        if !(max_range > 0.0 && max_range.is_finite()) {
            return Err(Error::InvalidDepthImage(format!("max_range must be positive, got {max_range}")));
        }
        if depths.len() != intrinsics.width * intrinsics.height {
            return Err(Error::InvalidDepthImage(format!(
                "expected {} depths, got {}",
                intrinsics.width * intrinsics.height,
                depths.len()
            )));
        }
        if let Some((k, d)) = depths.iter().enumerate().find(|(_, &d)| !(d > 0.0 && d <= max_range)) {
            return Err(Error::InvalidDepthImage(format!("depth {d} at index {k} outside (0, {max_range}]")));
        }
        Ok(Self { intrinsics, depths, max_range })
    }

    /// Image with every pixel at the same depth.
    pub fn uniform(intrinsics: CameraIntrinsics<f64>, depth: f64, max_range: f64) -> Result<Self> {
        let n = intrinsics.width * intrinsics.height;
        Self::new(intrinsics, vec![depth; n], max_range)
    }

    /// Builds an image by evaluating `f(i, j)` per pixel; values are clamped to
    /// `(0, max_range]` with non-finite or non-positive results mapped to `max_range`.
    pub fn from_fn(intrinsics: CameraIntrinsics<f64>, max_range: f64, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut depths = Vec::with_capacity(intrinsics.width * intrinsics.height);
        for j in 0..intrinsics.height {
            for i in 0..intrinsics.width {
                depths.push(sanitize(f(i, j), max_range));
            }
        }
        Self::new(intrinsics, depths, max_range)
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics<f64> {
        &self.intrinsics
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    #[inline]
    pub fn depth(&self, i: usize, j: usize) -> f64 {
        self.depths[j * self.intrinsics.width + i]
    }

    pub fn set_depth(&mut self, i: usize, j: usize, depth: f64) {
        let w = self.intrinsics.width;
        self.depths[j * w + i] = sanitize(depth, self.max_range);
    }

    pub fn min_depth(&self) -> f64 {
        self.depths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Camera-frame surface point sampled by pixel `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> Vec3<f64> {
        back_project(i as f64, j as f64, self.depth(i, j), &self.intrinsics).expect("depths are positive")
    }

    /// Writes the image as a little-endian grayscale PFM.
    pub fn write_pfm<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (w, h) = (self.width(), self.height());
        write!(out, "Pf\n{w} {h}\n-1.0\n")?;
        // PFM scanlines run bottom to top.
        for j in (0..h).rev() {
            for i in 0..w {
                out.write_all(&(self.depth(i, j) as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a grayscale PFM; intrinsics and range are not part of the format.
    pub fn read_pfm<R: BufRead>(mut input: R, intrinsics: CameraIntrinsics<f64>, max_range: f64) -> Result<Self> {
        let mut header = Vec::new();
        let mut lines = 0;
        while lines < 3 {
            let mut line = String::new();
            if input.read_line(&mut line).map_err(|e| Error::Pfm(e.to_string()))? == 0 {
                return Err(Error::Pfm("truncated header".into()));
            }
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            header.extend(t.split_whitespace().map(str::to_owned));
            lines += 1;
        }
        if header.len() != 4 || header[0] != "Pf" {
            return Err(Error::Pfm(format!("unsupported header {header:?}")));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| Error::Pfm(e.to_string()));
        let (w, h) = (parse(&header[1])?, parse(&header[2])?);
        let scale: f64 = header[3].parse().map_err(|_| Error::Pfm("bad scale".into()))?;
        if w != intrinsics.width || h != intrinsics.height {
            return Err(Error::Pfm(format!(
                "image is {w}x{h}, intrinsics expect {}x{}",
                intrinsics.width, intrinsics.height
            )));
        }
        let mut raw = vec![0u8; w * h * 4];
        input.read_exact(&mut raw).map_err(|e| Error::Pfm(e.to_string()))?;
        let mut depths = vec![0.0; w * h];
        for (k, chunk) in raw.chunks_exact(4).enumerate() {
            let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if scale < 0.0 { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            let (row_from_bottom, i) = (k / w, k % w);
            depths[(h - 1 - row_from_bottom) * w + i] = sanitize(v as f64, max_range);
        }
        Self::new(intrinsics, depths, max_range)
    }
}

fn sanitize(d: f64, max_range: f64) -> f64 {
    if d.is_finite() && d > 0.0 {
        d.min(max_range)
    } else {
        max_range
    }
}

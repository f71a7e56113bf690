//! Agent-centred bird's-eye rasters of the semantic layers.
//!
//! A chunk covers a square of `extent_m` metres (60 m by default) around
//! the agent, axis-aligned with the global frame (north up, no yaw
//! rotation). Pixel `(col, row)` has its centre at continuous pixel
//! coordinates `(col + 0.5, row + 0.5)`; row 0 is the northern edge. The
//! agent's position maps to the continuous coordinate `(size/2, size/2)`,
//! i.e. the top-left corner of pixel `(size/2, size/2)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};
use crate::math;
use crate::scene::{AgentTrack, LayerKind, SemanticScene};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RasterConfig {
    /// Side length in pixels.
    pub image_size: usize,
    /// Side length in metres.
    pub extent_m: f64,
    pub background: Rgb,
    /// Indexed by [`LayerKind::index`].
    pub layer_colors: [Rgb; 4],
    pub history_color: Rgb,
    pub history_radius_px: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            image_size: 256,
            extent_m: 60.0,
            background: [0, 0, 0],
            layer_colors: [[64, 64, 64], [128, 128, 128], [255, 255, 255], [0, 128, 0]],
            history_color: [255, 165, 0],
            history_radius_px: 2.0,
        }
    }
}

impl RasterConfig {
    /// Default palette at a different resolution over the same 60 m window.
    pub fn with_image_size(image_size: usize) -> Self {
        Self { image_size, ..Self::default() }
    }

    pub fn meters_per_pixel(&self) -> f64 {
        self.extent_m / self.image_size as f64
    }

    pub fn layer_color(&self, kind: LayerKind) -> Rgb {
        self.layer_colors[kind.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 2 || !self.image_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "raster image_size must be even and at least 2, got {}",
                self.image_size
            )));
        }
        if !(self.extent_m.is_finite() && self.extent_m > 0.0) {
            return Err(Error::InvalidConfig(format!("raster extent must be positive, got {}", self.extent_m)));
        }
        // the centre pixel's centre sits sqrt(0.5) px from the agent
        if !(self.history_radius_px >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "history radius must be at least 1 px, got {}",
                self.history_radius_px
            )));
        }
        let mut colors: Vec<Rgb> = Vec::with_capacity(6);
        colors.push(self.background);
        colors.extend_from_slice(&self.layer_colors);
        colors.push(self.history_color);
        for i in 0..colors.len() {
            for j in i + 1..colors.len() {
                if colors[i] == colors[j] {
                    return Err(Error::InvalidConfig(format!(
                        "raster palette colours must be pairwise distinct ({:?} repeats)",
                        colors[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&color);
        }
        Self { width, height, data }
    }

    pub fn pixel(&self, col: usize, row: usize) -> Rgb {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, col: usize, row: usize, color: Rgb) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// Fills every pixel whose centre lies within `radius` of the continuous
    /// pixel coordinate `(u, v)`.
    pub fn stamp_disc(&mut self, u: f64, v: f64, radius: f64, color: Rgb) {
        let r2 = radius * radius;
        let c0 = math::floor(u - radius - 0.5).max(0.0) as usize;
        let r0 = math::floor(v - radius - 0.5).max(0.0) as usize;
        let c1 = math::ceil(u + radius).min(self.width as f64);
        let r1 = math::ceil(v + radius).min(self.height as f64);
        if c1 <= 0.0 || r1 <= 0.0 {
            return;
        }
        for row in r0..r1 as usize {
            let dv = row as f64 + 0.5 - v;
            for col in c0..c1 as usize {
                let du = col as f64 + 0.5 - u;
                if du * du + dv * dv <= r2 {
                    self.set(col, row, color);
                }
            }
        }
    }

    /// Thick polyline drawn as overlapping discs every quarter pixel.
    pub fn draw_polyline(&mut self, pts: &[(f64, f64)], radius: f64, color: Rgb) {
        if pts.len() == 1 {
            self.stamp_disc(pts[0].0, pts[0].1, radius, color);
        }
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let len = math::hypot(b.0 - a.0, b.1 - a.1);
            let steps = (math::ceil(len * 4.0) as usize).clamp(1, 1 << 16);
            for k in 0..=steps {
                let s = k as f64 / steps as f64;
                self.stamp_disc(a.0 + (b.0 - a.0) * s, a.1 + (b.1 - a.1) * s, radius, color);
            }
        }
    }
}

/// Maps world points into continuous pixel coordinates of a view centred
/// on `center`.
#[derive(Debug, Clone, Copy)]
pub struct PixelFrame {
    pub center: Point,
    pub meters_per_pixel: f64,
    pub size: usize,
}

impl PixelFrame {
    pub fn new(center: Point, config: &RasterConfig) -> Self {
        Self {
            center,
            meters_per_pixel: config.meters_per_pixel(),
            size: config.image_size,
        }
    }

    pub fn to_pixel(&self, p: Point) -> (f64, f64) {
        let half = self.size as f64 / 2.0;
        (
            (p.x - self.center.x) / self.meters_per_pixel + half,
            (self.center.y - p.y) / self.meters_per_pixel + half,
        )
    }

    /// World position of the centre of pixel `(col, row)`.
    pub fn pixel_center(&self, col: usize, row: usize) -> Point {
        let half = self.size as f64 / 2.0;
        Point::new(
            self.center.x + (col as f64 + 0.5 - half) * self.meters_per_pixel,
            self.center.y - (row as f64 + 0.5 - half) * self.meters_per_pixel,
        )
    }

    pub fn world_window(&self) -> Rect {
        let half = self.size as f64 / 2.0 * self.meters_per_pixel;
        Rect::new(
            Point::new(self.center.x - half, self.center.y - half),
            Point::new(self.center.x + half, self.center.y + half),
        )
    }
}

/// Paints the background and every semantic layer in z-order.
pub fn paint_layers(scene: &SemanticScene, frame: &PixelFrame, config: &RasterConfig) -> RgbImage {
    let mut img = RgbImage::filled(frame.size, frame.size, config.background);
    let window = frame.world_window();
    let mut crossings: Vec<f64> = Vec::new();
    for kind in LayerKind::ALL {
        let color = config.layer_color(kind);
        for poly in scene.layer(kind) {
            let Some(bb) = poly.bounds() else { continue };
            if poly.vertices.len() < 3 || !bb.intersects(&window) {
                continue;
            }
            let px: Vec<(f64, f64)> = poly.vertices.iter().map(|&p| frame.to_pixel(p)).collect();
            fill_polygon(&mut img, &px, color, &mut crossings);
        }
    }
    img
}

/// Even-odd scanline fill sampling pixel centres, with the same half-open
/// crossing rule as [`crate::geometry::Polygon::contains`].
fn fill_polygon(img: &mut RgbImage, px: &[(f64, f64)], color: Rgb, crossings: &mut Vec<f64>) {
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, v) in px {
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    let row0 = math::floor(vmin - 0.5).max(0.0) as usize;
    let row1 = (math::ceil(vmax).max(0.0) as usize).min(img.height);
    let n = px.len();
    for row in row0..row1 {
        let yc = row as f64 + 0.5;
        crossings.clear();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (px[i], px[j]);
            if (a.1 > yc) != (b.1 > yc) {
                crossings.push(a.0 + (yc - a.1) * (b.0 - a.0) / (b.1 - a.1));
            }
            j = i;
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        for pair in crossings.chunks_exact(2) {
            let c0 = math::ceil(pair[0] - 0.5).max(0.0);
            let c1 = math::ceil(pair[1] - 0.5).min(img.width as f64);
            if c1 <= c0 {
                continue;
            }
            for col in c0 as usize..c1 as usize {
                img.set(col, row, color);
            }
        }
    }
}

/// One semantic map chunk centred on the agent at `timestep`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterChunk {
    pub image: RgbImage,
    pub center_pos: Point,
    pub meters_per_pixel: f64,
    pub timestep: usize,
}

impl RasterChunk {
    pub fn size(&self) -> usize {
        self.image.width
    }

    pub fn pixel(&self, col: usize, row: usize) -> Rgb {
        self.image.pixel(col, row)
    }
}

/// Renders the chunk at timestep `t`: semantic layers plus the agent's
/// last `t_obs` positions as discs, the newest at the image centre.
pub fn rasterize_chunk(
    scene: &SemanticScene,
    track: &AgentTrack,
    t: usize,
    t_obs: usize,
    config: &RasterConfig,
) -> Result<RasterChunk> {
    config.validate()?;
    if t_obs == 0 {
        return Err(Error::InvalidConfig("t_obs must be at least 1".into()));
    }
    let available = track.history_len(t);
    if available < t_obs {
        return Err(Error::InsufficientHistory { t, needed: t_obs, available });
    }
    let center = track.state_at(t).expect("history_len > 0 implies the state exists").pos;
    let frame = PixelFrame::new(center, config);
    let mut image = paint_layers(scene, &frame, config);
    for tau in t + 1 - t_obs..=t {
        let p = track.state_at(tau).expect("covered by history check").pos;
        let (u, v) = frame.to_pixel(p);
        image.stamp_disc(u, v, config.history_radius_px, config.history_color);
    }
    Ok(RasterChunk {
        image,
        center_pos: center,
        meters_per_pixel: frame.meters_per_pixel,
        timestep: t,
    })
}

/// The `t_obs` chunks for timesteps `t - t_obs + 1 ..= t`, oldest first.
pub fn build_spatial_sequence(
    scene: &SemanticScene,
    track: &AgentTrack,
    t: usize,
    t_obs: usize,
    config: &RasterConfig,
) -> Result<Vec<RasterChunk>> {
    if t_obs == 0 || t + 1 < t_obs {
        return Err(Error::InsufficientHistory { t, needed: t_obs, available: track.history_len(t) });
    }
    (t + 1 - t_obs..=t)
        .map(|tau| {
            rasterize_chunk(scene, track, tau, t_obs, config)
                .map_err(|e| Error::RasterAt { t: tau, source: Box::new(e) })
        })
        .collect()
}

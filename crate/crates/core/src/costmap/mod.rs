//! Occupancy grid costmap.
//!
//! Cells hold costs in `[0, 255]`: `0` is free space, `255` is occupied. Inflation
//! spreads a linearly decaying cost (capped at 254) around occupied cells, so only
//! truly occupied cells ever carry 255. Queries outside the grid return 255.

mod io;

pub use io::{decode_pgm, encode_pgm, load_map, load_map_file, write_map, MapMetadata, Pgm};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const OCCUPIED: u8 = 255;
pub const FREE: u8 = 0;
/// Highest cost an inflated (non-occupied) cell may carry.
pub const MAX_INFLATED: u8 = 254;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error("invalid map metadata: {0}")]
    Metadata(String),
    #[error("map dimensions overflow: {width} x {height}")]
    DimensionOverflow { width: usize, height: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Pose of the lower-left corner of cell `(0, 0)` in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct MapOrigin {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl From<[f64; 3]> for MapOrigin {
    fn from(v: [f64; 3]) -> Self {
        Self {
            x: v[0],
            y: v[1],
            yaw: v[2],
        }
    }
}

impl From<MapOrigin> for [f64; 3] {
    fn from(o: MapOrigin) -> Self {
        [o.x, o.y, o.yaw]
    }
}

/// Row-major grid of cost values. Row 0 is the row at the origin (bottom of the map).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: MapOrigin,
    cells: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InflationParams {
    /// Distance in meters over which cost decays from 254 to 0.
    pub inflation_radius: f64,
    /// Cells with cost at or above this value are not free.
    pub occupied_threshold: u8,
}

impl Default for InflationParams {
    fn default() -> Self {
        Self {
            inflation_radius: 1.5,
            occupied_threshold: 170,
        }
    }
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: MapOrigin,
        cells: Vec<u8>,
    ) -> Result<Self, MapError> {
        let expected = width
            .checked_mul(height)
            .ok_or(MapError::DimensionOverflow { width, height })?;
        if cells.len() != expected {
            return Err(MapError::InvalidGrid(format!(
                "expected {expected} cells, got {}",
                cells.len()
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(MapError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !(origin.x.is_finite() && origin.y.is_finite() && origin.yaw.is_finite()) {
            return Err(MapError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// A grid with every cell set to `value`.
    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: MapOrigin,
        value: u8,
    ) -> Result<Self, MapError> {
        let n = width
            .checked_mul(height)
            .ok_or(MapError::DimensionOverflow { width, height })?;
        Self::new(width, height, resolution, origin, vec![value; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> MapOrigin {
        self.origin
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    /// World extent `(width, height)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn cell(&self, col: usize, row: usize) -> Option<u8> {
        (col < self.width && row < self.height).then(|| self.cells[row * self.width + col])
    }

    pub fn set_cell(&mut self, col: usize, row: usize, value: u8) {
        assert!(col < self.width && row < self.height, "cell out of range");
        self.cells[row * self.width + col] = value;
    }

    /// Sets every cell whose center lies inside the world-frame rectangle.
    pub fn fill_rect(&mut self, x_min: f64, y_min: f64, x_max: f64, y_max: f64, value: u8) {
        for row in 0..self.height {
            for col in 0..self.width {
                let (cx, cy) = self.cell_center(col, row);
                if cx >= x_min && cx <= x_max && cy >= y_min && cy <= y_max {
                    self.cells[row * self.width + col] = value;
                }
            }
        }
    }

    /// World coordinates of a cell center.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        let lx = (col as f64 + 0.5) * self.resolution;
        let ly = (row as f64 + 0.5) * self.resolution;
        self.local_to_world(lx, ly)
    }

    /// World coordinates of the point at fractional offset `(fx, fy)` inside a cell.
    pub fn cell_point(&self, col: usize, row: usize, fx: f64, fy: f64) -> (f64, f64) {
        let lx = (col as f64 + fx) * self.resolution;
        let ly = (row as f64 + fy) * self.resolution;
        self.local_to_world(lx, ly)
    }

    fn world_to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.origin.x;
        let dy = y - self.origin.y;
        if self.origin.yaw == 0.0 {
            return (dx, dy);
        }
        let (s, c) = self.origin.yaw.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn local_to_world(&self, lx: f64, ly: f64) -> (f64, f64) {
        if self.origin.yaw == 0.0 {
            return (lx + self.origin.x, ly + self.origin.y);
        }
        let (s, c) = self.origin.yaw.sin_cos();
        (
            self.origin.x + c * lx - s * ly,
            self.origin.y + s * lx + c * ly,
        )
    }

    /// Cell containing a world point, if inside the grid.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (lx, ly) = self.world_to_local(x, y);
        let u = (lx / self.resolution).floor();
        let v = (ly / self.resolution).floor();
        if u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64 {
            Some((u as usize, v as usize))
        } else {
            None
        }
    }

    /// Cost of the cell containing `(x, y)`; 255 outside the grid.
    pub fn cost_at(&self, x: f64, y: f64) -> u8 {
        match self.world_to_cell(x, y) {
            Some((c, r)) => self.cells[r * self.width + c],
            None => OCCUPIED,
        }
    }

    /// Cell value with virtual occupied cells surrounding the grid.
    #[inline]
    fn padded(&self, col: i64, row: i64) -> f64 {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            OCCUPIED as f64
        } else {
            self.cells[row as usize * self.width + col as usize] as f64
        }
    }

    /// Bilinear interpolation between cell centers.
    ///
    /// Cells beyond the border count as 255 so the surface rises toward the map
    /// edge; points outside the grid return 255.
    pub fn interpolated_cost(&self, x: f64, y: f64) -> f64 {
        let (lx, ly) = self.world_to_local(x, y);
        let (w, h) = self.extent();
        if !(lx >= 0.0 && ly >= 0.0 && lx < w && ly < h) {
            return OCCUPIED as f64;
        }
        let u = lx / self.resolution - 0.5;
        let v = ly / self.resolution - 0.5;
        let c0 = u.floor();
        let r0 = v.floor();
        let fx = u - c0;
        let fy = v - r0;
        let (c0, r0) = (c0 as i64, r0 as i64);
        let bottom = self.padded(c0, r0) * (1.0 - fx) + self.padded(c0 + 1, r0) * fx;
        let top = self.padded(c0, r0 + 1) * (1.0 - fx) + self.padded(c0 + 1, r0 + 1) * fx;
        bottom * (1.0 - fy) + top * fy
    }

    pub fn is_free(&self, x: f64, y: f64, params: &InflationParams) -> bool {
        self.cost_at(x, y) < params.occupied_threshold
    }

    /// Indices `(col, row)` of all cells below `threshold`.
    pub fn free_cells(&self, threshold: u8) -> Vec<(usize, usize)> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c < threshold)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    /// Returns a copy with cost spread around occupied cells.
    ///
    /// Each cell takes the maximum of its current value and
    /// `floor(255 * (1 - d / radius))`, capped at 254, where `d` is the distance
    /// between cell centers to the nearest occupied cell.
    pub fn inflate(&self, params: &InflationParams) -> OccupancyGrid {
        let mut out = self.clone();
        let radius = params.inflation_radius;
        if !(radius > 0.0) {
            return out;
        }
        let reach = (radius / self.resolution).ceil() as i64;
        let mut kernel = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let d = self.resolution * ((dr * dr + dc * dc) as f64).sqrt();
                let cost = decay_cost(d, radius);
                if cost > 0 {
                    kernel.push((dc, dr, cost));
                }
            }
        }
        let (w, h) = (self.width as i64, self.height as i64);
        for row in 0..h {
            for col in 0..w {
                if self.cells[(row * w + col) as usize] != OCCUPIED || self.is_interior(col, row) {
                    continue;
                }
                for &(dc, dr, cost) in &kernel {
                    let (c, r) = (col + dc, row + dr);
                    if c < 0 || r < 0 || c >= w || r >= h {
                        continue;
                    }
                    let cell = &mut out.cells[(r * w + c) as usize];
                    if *cell < cost {
                        *cell = cost;
                    }
                }
            }
        }
        out
    }

    /// Occupied cell whose 8 neighbors are all occupied (or off-grid). The nearest
    /// occupied cell to any free cell is never interior, so these are skipped.
    fn is_interior(&self, col: i64, row: i64) -> bool {
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (c, r) = (col + dc, row + dr);
                if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
                    continue;
                }
                if self.cells[(r * self.width as i64 + c) as usize] != OCCUPIED {
                    return false;
                }
            }
        }
        true
    }
}

/// Linear decay profile used by [`OccupancyGrid::inflate`].
pub fn decay_cost(distance: f64, radius: f64) -> u8 {
    if distance >= radius {
        return 0;
    }
    let c = (255.0 * (1.0 - distance / radius)).floor();
    c.clamp(0.0, MAX_INFLATED as f64) as u8
}

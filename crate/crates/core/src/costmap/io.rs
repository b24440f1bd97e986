//! Map-server style map files: a binary PGM image plus a YAML metadata document.
//!
//! Pixel luminance `p` maps to an occupancy probability `(255 - p) / 255`
//! (or `p / 255` when `negate` is set). Probabilities above `occupied_thresh`
//! are occupied, below `free_thresh` free, and everything in between is unknown.
//! Unknown cells are treated as occupied. Image row 0 is the top of the map.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MapError, MapOrigin, OccupancyGrid, FREE, OCCUPIED};

/// Upper bound on decoded pixels, guarding against absurd headers.
const MAX_PIXELS: usize = 1 << 28;

/// Decoded 8-bit grayscale image, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, MapError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(MapError::Pgm(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MapError::Pgm(format!("{what} out of range")))
    }
}

/// Decodes a binary (P5) PGM with `maxval <= 255`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm, MapError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(MapError::Pgm("missing P5 magic".into()));
    }
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(MapError::Pgm(format!("unsupported maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(MapError::Pgm("zero image dimension".into()));
    }
    let n = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or(MapError::DimensionOverflow { width, height })?;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(MapError::Pgm("missing whitespace after maxval".into())),
    }
    let raster = &bytes[r.pos..];
    if raster.len() < n {
        return Err(MapError::Pgm(format!(
            "raster has {} bytes, expected {n}",
            raster.len()
        )));
    }
    let pixels = if maxval == 255 {
        raster[..n].to_vec()
    } else {
        raster[..n]
            .iter()
            .map(|&p| {
                let p = (p as usize).min(maxval);
                ((p * 255 + maxval / 2) / maxval) as u8
            })
            .collect()
    };
    Ok(Pgm {
        width,
        height,
        pixels,
    })
}

pub fn encode_pgm(pgm: &Pgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", pgm.width, pgm.height).into_bytes();
    out.extend_from_slice(&pgm.pixels);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum Flag {
    Bool(bool),
    Int(i64),
}

impl Flag {
    fn is_set(self) -> bool {
        match self {
            Flag::Bool(b) => b,
            Flag::Int(i) => i != 0,
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawMetadata {
    #[serde(default)]
    image: Option<String>,
    resolution: f64,
    origin: [f64; 3],
    negate: Flag,
    occupied_thresh: f64,
    free_thresh: f64,
}

/// Contents of a map YAML file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub resolution: f64,
    pub origin: [f64; 3],
    pub negate: u8,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

impl MapMetadata {
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let raw: RawMetadata =
            serde_yaml::from_str(text).map_err(|e| MapError::Metadata(e.to_string()))?;
        if !(raw.resolution.is_finite() && raw.resolution > 0.0) {
            return Err(MapError::Metadata(format!(
                "resolution must be positive, got {}",
                raw.resolution
            )));
        }
        if raw.origin.iter().any(|v| !v.is_finite()) {
            return Err(MapError::Metadata("origin must be finite".into()));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(raw.occupied_thresh) || !in_unit(raw.free_thresh) {
            return Err(MapError::Metadata("thresholds must lie in [0, 1]".into()));
        }
        if raw.free_thresh > raw.occupied_thresh {
            return Err(MapError::Metadata(
                "free_thresh must not exceed occupied_thresh".into(),
            ));
        }
        Ok(Self {
            image: raw.image,
            resolution: raw.resolution,
            origin: raw.origin,
            negate: raw.negate.is_set() as u8,
            occupied_thresh: raw.occupied_thresh,
            free_thresh: raw.free_thresh,
        })
    }

    fn classify(&self, pixel: u8) -> u8 {
        let p = if self.negate != 0 {
            pixel as f64 / 255.0
        } else {
            (255 - pixel) as f64 / 255.0
        };
        if p > self.occupied_thresh {
            OCCUPIED
        } else if p < self.free_thresh {
            FREE
        } else {
            OCCUPIED // unknown
        }
    }
}

/// Builds a grid from PGM bytes and YAML metadata text.
pub fn load_map(image_bytes: &[u8], metadata: &str) -> Result<OccupancyGrid, MapError> {
    let meta = MapMetadata::parse(metadata)?;
    let pgm = decode_pgm(image_bytes)?;
    let (w, h) = (pgm.width, pgm.height);
    let mut cells = vec![FREE; w * h];
    for img_row in 0..h {
        let row = h - 1 - img_row;
        for col in 0..w {
            cells[row * w + col] = meta.classify(pgm.pixels[img_row * w + col]);
        }
    }
    OccupancyGrid::new(w, h, meta.resolution, MapOrigin::from(meta.origin), cells)
}

/// Loads a map from its YAML file; the image path is resolved relative to it.
pub fn load_map_file(yaml_path: &Path) -> Result<OccupancyGrid, MapError> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |source| MapError::Io { path, source }
    };
    let text = std::fs::read_to_string(yaml_path).map_err(io_err(yaml_path))?;
    let meta = MapMetadata::parse(&text)?;
    let image = meta
        .image
        .ok_or_else(|| MapError::Metadata("missing field `image`".into()))?;
    let image_path = yaml_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(image);
    let bytes = std::fs::read(&image_path).map_err(io_err(&image_path))?;
    load_map(&bytes, &text)
}

/// Serializes a grid as PGM bytes plus YAML metadata.
///
/// Pixels are `255 - cost`, so occupied cells are black and inflated cells
/// appear as gray gradients.
pub fn write_map(grid: &OccupancyGrid, image_name: &str) -> (Vec<u8>, String) {
    let (w, h) = (grid.width(), grid.height());
    let mut pixels = vec![0u8; w * h];
    for row in 0..h {
        let img_row = h - 1 - row;
        for col in 0..w {
            pixels[img_row * w + col] = 255 - grid.cells()[row * w + col];
        }
    }
    let o = grid.origin();
    let meta = MapMetadata {
        image: Some(image_name.to_owned()),
        resolution: grid.resolution(),
        origin: [o.x, o.y, o.yaw],
        negate: 0,
        occupied_thresh: 0.65,
        free_thresh: 0.196,
    };
    let yaml = serde_yaml::to_string(&meta).expect("metadata serializes");
    (
        encode_pgm(&Pgm {
            width: w,
            height: h,
            pixels,
        }),
        yaml,
    )
}

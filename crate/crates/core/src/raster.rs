//! Planar floating point rasters and their on-disk formats.
//!
//! Two formats are supported:
//!
//! - 8-bit PNG (gray, gray+alpha, RGB, RGBA on input; gray or RGB on output).
//!   Samples are kept in the `[0, 255]` range on load.
//! - `.sal`: the magic `SAL1`, little-endian `u32` width and height, then
//!   `width * height` little-endian `f32` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const SAL_MAGIC: &[u8; 4] = b"SAL1";

/// A dense raster with `channels` planes of `height` rows by `width` columns.
///
/// Storage is planar (channel-major), matching the layout of one batch item
/// of a [`crate::nn::Tensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

/// An equirectangular image covering the full sphere.
pub type EquirectImage = Raster;

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "raster {width}x{height}x{channels} needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::ShapeMismatch("raster dimensions must be non-zero".into()));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a raster by evaluating `f(channel, x, y)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn same_dims(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Expands a single-channel raster to three identical channels; other
    /// channel counts are returned unchanged.
    pub fn to_rgb(&self) -> Raster {
        if self.channels != 1 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Raster {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Mean over channels, as a single-channel raster.
    pub fn to_luminance(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.width * self.height;
        let mut out = vec![0.0; n];
        for c in 0..self.channels {
            for (o, v) in out.iter_mut().zip(self.plane(c)) {
                *o += v;
            }
        }
        let k = self.channels as f64;
        out.iter_mut().for_each(|v| *v /= k);
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data: out,
        }
    }

    /// Nearest sample for the continuous coordinate `(x, y)`, where pixel
    /// `(i, j)` covers `[i, i+1) x [j, j+1)`. `x` wraps, `y` clamps.
    pub fn sample_nearest(&self, c: usize, x: f64, y: f64) -> f64 {
        let xi = wrap_index(x.floor() as i64, self.width);
        let yi = clamp_index(y.floor() as i64, self.height);
        self.get(c, xi, yi)
    }

    /// Bilinear sample at the continuous coordinate `(x, y)`; pixel centers
    /// sit at half-integer coordinates. `x` wraps, `y` clamps.
    pub fn sample_bilinear(&self, c: usize, x: f64, y: f64) -> f64 {
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let xa = wrap_index(x0 as i64, self.width);
        let xb = wrap_index(x0 as i64 + 1, self.width);
        let ya = clamp_index(y0 as i64, self.height);
        let yb = clamp_index(y0 as i64 + 1, self.height);
        let top = self.get(c, xa, ya) * (1.0 - tx) + self.get(c, xb, ya) * tx;
        let bottom = self.get(c, xa, yb) * (1.0 - tx) + self.get(c, xb, yb) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Bilinear resize with half-pixel centers and edge clamping in both axes.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Raster {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Raster::new(width, height, self.channels);
        for c in 0..self.channels {
            for y in 0..height {
                let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
                let y0 = fy.floor() as usize;
                let y1 = (y0 + 1).min(self.height - 1);
                let ty = fy - y0 as f64;
                for x in 0..width {
                    let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                    let x0 = fx.floor() as usize;
                    let x1 = (x0 + 1).min(self.width - 1);
                    let tx = fx - x0 as f64;
                    let top = self.get(c, x0, y0) * (1.0 - tx) + self.get(c, x1, y0) * tx;
                    let bot = self.get(c, x0, y1) * (1.0 - tx) + self.get(c, x1, y1) * tx;
                    out.set(c, x, y, top * (1.0 - ty) + bot * ty);
                }
            }
        }
        out
    }
}

#[inline]
pub(crate) fn wrap_index(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

#[inline]
pub(crate) fn clamp_index(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Encodes a single-channel raster in the `.sal` format.
pub fn encode_sal(raster: &Raster) -> Result<Vec<u8>> {
    if raster.channels() != 1 {
        return Err(Error::ShapeMismatch(format!(
            ".sal stores one channel, raster has {}",
            raster.channels()
        )));
    }
    let mut out = Vec::with_capacity(12 + raster.data().len() * 4);
    out.extend_from_slice(SAL_MAGIC);
    out.extend_from_slice(&(raster.width() as u32).to_le_bytes());
    out.extend_from_slice(&(raster.height() as u32).to_le_bytes());
    for &v in raster.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_sal(bytes: &[u8], path: &Path) -> Result<Raster> {
    if bytes.len() < 12 {
        return Err(corrupt(path, "header truncated"));
    }
    if &bytes[..4] != SAL_MAGIC {
        return Err(corrupt(path, "bad magic"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| corrupt(path, "dimensions overflow"))?;
    if n == 0 {
        return Err(corrupt(path, "zero-sized raster"));
    }
    let body = &bytes[12..];
    if body.len() != n * 4 {
        return Err(corrupt(
            path,
            format!("expected {} data bytes, found {}", n * 4, body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Raster::from_vec(width, height, 1, data)
}

pub fn write_sal(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    let bytes = encode_sal(raster)?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_sal(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_sal(&bytes, path)
}

/// Reads an 8-bit PNG. Gray images load as one channel, color as three;
/// alpha is dropped. Samples are in `[0, 255]`.
pub fn read_png(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bad = |reason: String| Error::BadImage {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path)?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let (src_channels, channels) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => return Err(bad(format!("unsupported color type {other:?}"))),
    };
    let bytes = &buf[..info.buffer_size()];
    let mut raster = Raster::new(w, h, channels);
    for y in 0..h {
        let row = &bytes[y * info.line_size..];
        for x in 0..w {
            for c in 0..channels {
                raster.set(c, x, y, row[x * src_channels + c] as f64);
            }
        }
    }
    Ok(raster)
}

/// Writes a 1- or 3-channel raster whose samples are in `[0, 255]` as an
/// 8-bit PNG; values are rounded and clamped.
pub fn write_png(path: impl AsRef<Path>, raster: &Raster) -> Result<()> {
    let color = match raster.channels() {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        c => {
            return Err(Error::ShapeMismatch(format!(
                "PNG export needs 1 or 3 channels, raster has {c}"
            )))
        }
    };
    let (w, h, ch) = (raster.width(), raster.height(), raster.channels());
    let mut bytes = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                bytes.push(raster.get(c, x, y).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let file = BufWriter::new(File::create(path.as_ref())?);
    let mut encoder = png::Encoder::new(file, w as u32, h as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| match e {
        png::EncodingError::IoError(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(other.to_string())),
    };
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(&bytes).map_err(to_io)?;
    writer.finish().map_err(to_io)?;
    Ok(())
}

/// Reads a saliency raster from either `.sal` or PNG, by extension. PNG
/// saliency is rescaled from `[0, 255]` to `[0, 1]`.
pub fn read_saliency(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("sal") => read_sal(path),
        _ => Ok(read_png(path)?.to_luminance().map(|v| v / 255.0)),
    }
}

/// Linear-luminance 8-bit export of a saliency map in `[0, 1]`.
pub fn write_saliency_png(path: impl AsRef<Path>, map: &Raster) -> Result<()> {
    write_png(path, &map.to_luminance().map(|v| v.clamp(0.0, 1.0) * 255.0))
}

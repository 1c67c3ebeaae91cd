//! Per-pixel rasters: depth maps and bilevel masks, plus their file formats.
//!
//! Depth files are either 16-bit single-channel PNG in millimetres (0 means
//! invalid) or raw little-endian: `u32 width`, `u32 height`, then
//! `width * height` `f32` metres in row-major order (non-positive or
//! non-finite means invalid). Masks are 8-bit PNG, any non-zero pixel set.

use std::fs;
use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma};

use super::{backproject, CameraIntrinsics, PointCloud};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map from metric values; non-positive or non-finite entries
    /// are marked invalid.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::validation(
                "depth",
                format!("{} values for a {width}x{height} map", values.len()),
            ));
        }
        let valid = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Depth in metres at an integer pixel, `None` if invalid or outside.
    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v as usize * self.width as usize + u as usize;
        self.valid[i].then_some(self.values[i])
    }

    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        self.get(u, v).is_some()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            let img = image::open(path)
                .map_err(|source| Error::Image {
                    path: path.to_path_buf(),
                    source,
                })?
                .into_luma16();
            let (w, h) = img.dimensions();
            let values = img.pixels().map(|p| f64::from(p.0[0]) / 1000.0).collect();
            Self::from_values(w, h, values)
        } else {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            Self::from_raw_bytes(&bytes).map_err(|e| match e {
                Error::Validation { reason, .. } => Error::validation(path.display().to_string(), reason),
                other => other,
            })
        }
    }

    pub fn from_raw_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::validation("depth", "raw depth file shorter than its header"));
        }
        let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let body = &bytes[8..];
        let n = w as usize * h as usize;
        if body.len() != n * 4 {
            return Err(Error::validation(
                "depth",
                format!("raw depth body has {} bytes, expected {}", body.len(), n * 4),
            ));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Self::from_values(w, h, values)
    }

    pub fn to_raw_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.values.len() * 4);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for (v, ok) in self.values.iter().zip(&self.valid) {
            let x = if *ok { *v as f32 } else { 0.0 };
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Writes 16-bit millimetre PNG. Depths beyond 65.535 m saturate.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(self.width, self.height, |u, v| {
            let mm = self.get(u, v).map_or(0.0, |d| (d * 1000.0).round().clamp(1.0, 65535.0));
            Luma([mm as u16])
        });
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save_raw(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_raw_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::validation(
                "mask",
                format!("{} bits for a {width}x{height} mask", bits.len()),
            ));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        u < self.width && v < self.height && self.bits[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, on: bool) {
        if u < self.width && v < self.height {
            self.bits[v as usize * self.width as usize + u as usize] = on;
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .into_luma8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w,
            height: h,
            bits: img.pixels().map(|p| p.0[0] != 0).collect(),
        })
    }

    fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |u, v| {
            Luma([if self.get(u, v) { 255 } else { 0 }])
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// 8-bit PNG bytes, 255 for set pixels.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_image()
            .write_to(&mut out, image::ImageFormat::Png)
            .expect("PNG encoding into memory");
        out.into_inner()
    }
}

/// One camera-frame point per pixel that is set in `mask` and has valid
/// depth, in row-major order.
pub fn point_cloud_from_mask(depth: &DepthMap, mask: &Mask, k: &CameraIntrinsics) -> Result<PointCloud> {
    if mask.width != depth.width || mask.height != depth.height {
        return Err(Error::validation(
            "mask",
            format!(
                "mask is {}x{} but depth is {}x{}",
                mask.width, mask.height, depth.width, depth.height
            ),
        ));
    }
    if depth.width != k.width || depth.height != k.height {
        return Err(Error::validation(
            "depth",
            format!(
                "depth is {}x{} but intrinsics are {}x{}",
                depth.width, depth.height, k.width, k.height
            ),
        ));
    }
    mask.pixels()
        .filter_map(|(u, v)| depth.get(u, v).map(|d| (u, v, d)))
        .map(|(u, v, d)| backproject(f64::from(u), f64::from(v), d, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 2.0, 2.0, 4, 4).unwrap()
    }

    fn depth() -> DepthMap {
        let mut vals: Vec<f64> = (0..16).map(|i| 1.0 + f64::from(i) * 0.1).collect();
        vals[5] = 0.0;
        vals[6] = f64::NAN;
        DepthMap::from_values(4, 4, vals).unwrap()
    }

    #[test]
    fn single_pixel_cloud() {
        let mut m = Mask::new(4, 4);
        m.set(3, 2, true);
        let cloud = point_cloud_from_mask(&depth(), &m, &k()).unwrap();
        let expect = backproject(3.0, 2.0, 1.0 + 11.0 * 0.1, &k()).unwrap();
        assert_eq!(cloud, vec![expect]);
    }

    #[test]
    fn invalid_depth_pixels_dropped() {
        // Count oracle: mask of N pixels with M invalid yields N - M points.
        let mut m = Mask::new(4, 4);
        let chosen = [(0, 0), (1, 1), (2, 1), (3, 3), (0, 2)];
        for (u, v) in chosen {
            m.set(u, v, true);
        }
        let d = depth();
        let invalid = chosen.iter().filter(|(u, v)| !d.is_valid(*u, *v)).count();
        assert_eq!(invalid, 2);
        let cloud = point_cloud_from_mask(&d, &m, &k()).unwrap();
        assert_eq!(cloud.len(), chosen.len() - invalid);
        // row-major: (0,0) first, then (0,2), then (3,3)
        assert_eq!(cloud[0], backproject(0.0, 0.0, 1.0, &k()).unwrap());
        assert!(cloud[2].z > cloud[1].z);
    }

    #[test]
    fn empty_mask_empty_cloud() {
        let cloud = point_cloud_from_mask(&depth(), &Mask::new(4, 4), &k()).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn mask_dimension_mismatch() {
        let err = point_cloud_from_mask(&depth(), &Mask::new(3, 4), &k()).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn raw_depth_round_trip() {
        let d = depth();
        let back = DepthMap::from_raw_bytes(&d.to_raw_bytes()).unwrap();
        for v in 0..4 {
            for u in 0..4 {
                assert_eq!(back.is_valid(u, v), d.is_valid(u, v));
                if let (Some(a), Some(b)) = (back.get(u, v), d.get(u, v)) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
        assert!(DepthMap::from_raw_bytes(&[1, 0, 0, 0]).is_err());
    }

    #[test]
    fn png_depth_and_mask_files() {
        let dir = tempfile::tempdir().unwrap();
        let d = depth();
        let p = dir.path().join("d.png");
        d.save_png(&p).unwrap();
        let back = DepthMap::load(&p).unwrap();
        assert_eq!(back.get(0, 0), Some(1.0));
        assert_eq!(back.get(1, 1), None);
        assert_eq!(back.get(2, 3), Some(2.4));

        let mut m = Mask::new(4, 4);
        m.set(1, 2, true);
        let mp = dir.path().join("m.png");
        m.save(&mp).unwrap();
        assert_eq!(Mask::load(&mp).unwrap(), m);
    }
}

//! KITTI-style 16-bit PNG disparity: `round(d * 256)`, 0 meaning invalid.
//!
//! Ground truth here is dense, so exact zeros (and anything that would round
//! to zero) are stored as 1, i.e. 1/256 px.

use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const KITTI_SCALE: f64 = 256.0;

pub fn encode_kitti_disp(map: &Grid<f32>) -> Result<Vec<u16>> {
    map.data
        .iter()
        .map(|&d| {
            let d = d as f64;
            let q = (d * KITTI_SCALE).round();
            if !(d >= 0.0) || d >= 256.0 || q > u16::MAX as f64 {
                return Err(Error::DisparityOverflow { value: d });
            }
            Ok((q as u16).max(1))
        })
        .collect()
}

pub fn decode_kitti_disp(width: usize, height: usize, raw: &[u16]) -> Grid<f32> {
    Grid::from_vec(
        width,
        height,
        raw.iter().map(|&v| (v as f64 / KITTI_SCALE) as f32).collect(),
    )
}

pub fn write_kitti_disp(map: &Grid<f32>, path: &Path) -> Result<()> {
    let raw = encode_kitti_disp(map)?;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(map.width as u32, map.height as u32, raw).expect("buffer size");
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    super::write_atomic(path, &bytes)?;
    Ok(())
}

pub fn read_kitti_disp(path: &Path) -> Result<Grid<f32>> {
    let bytes = super::read_file(path)?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?;
    let img = match img {
        image::DynamicImage::ImageLuma16(i) => i,
        other => {
            return Err(Error::ShapeMismatch(format!(
                "{} is {:?}, expected 16-bit grayscale",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = img.dimensions();
    Ok(decode_kitti_disp(w as usize, h as usize, img.as_raw()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_definition() {
        let m = Grid::from_vec(3, 1, vec![1.0f32, 0.0, 255.5]);
        assert_eq!(encode_kitti_disp(&m).unwrap(), vec![256, 1, 65408]);
    }

    #[test]
    fn overflow() {
        for bad in [300.0f32, 256.0, -1.0, f32::NAN] {
            let m = Grid::from_vec(1, 1, vec![bad]);
            assert!(matches!(encode_kitti_disp(&m), Err(Error::DisparityOverflow { .. })));
        }
    }

    #[test]
    fn quantization_half_step() {
        let data: Vec<f32> = (0..4000).map(|i| 1.0 / 512.0 + i as f32 * 0.0637).collect();
        let m = Grid::from_vec(data.len(), 1, data);
        let back = decode_kitti_disp(m.width, 1, &encode_kitti_disp(&m).unwrap());
        for (a, b) in m.data.iter().zip(&back.data) {
            assert!(((a - b) as f64).abs() <= 1.0 / 512.0 + 1e-9);
        }
    }
}

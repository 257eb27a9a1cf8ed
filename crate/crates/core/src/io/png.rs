use std::path::Path;

use image::{GrayImage, RgbImage as ImgRgb};

use crate::error::{Error, Result};
use crate::grid::{Mask, RgbImage};

fn encode_png<P: image::PixelWithColorType, C: std::ops::Deref<Target = [P::Subpixel]>>(
    img: &image::ImageBuffer<P, C>,
) -> Result<Vec<u8>>
where
    [P::Subpixel]: image::EncodableLayout,
{
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}

pub fn write_rgb_png(img: &RgbImage, path: &Path) -> Result<()> {
    let raw: Vec<u8> = img.data.iter().flatten().copied().collect();
    let buf = ImgRgb::from_raw(img.width as u32, img.height as u32, raw).expect("buffer size");
    super::write_atomic(path, &encode_png(&buf)?)?;
    Ok(())
}

/// Writes a 0/1 mask as 0/255 grayscale.
pub fn write_mask_png(mask: &Mask, path: &Path) -> Result<()> {
    let raw: Vec<u8> = mask.data.iter().map(|&m| if m != 0 { 255 } else { 0 }).collect();
    let buf = GrayImage::from_raw(mask.width as u32, mask.height as u32, raw).expect("buffer size");
    super::write_atomic(path, &encode_png(&buf)?)?;
    Ok(())
}

pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    let bytes = super::read_file(path)?;
    let img = image::load_from_memory(&bytes)?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| p.0).collect();
    Ok(RgbImage::from_vec(w as usize, h as usize, data))
}

pub fn read_mask_png(path: &Path) -> Result<Mask> {
    let bytes = super::read_file(path)?;
    let img = image::load_from_memory(&bytes)?;
    let img = match img {
        image::DynamicImage::ImageLuma8(i) => i,
        other => {
            return Err(Error::ShapeMismatch(format!(
                "{} is {:?}, expected 8-bit grayscale",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = img.dimensions();
    Ok(Mask::from_vec(
        w as usize,
        h as usize,
        img.pixels().map(|p| (p.0[0] >= 128) as u8).collect(),
    ))
}

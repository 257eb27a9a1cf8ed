//! Preview images: colormapped disparity and anaglyph composites.

use crate::grid::{DisparityMap, RgbImage};
use crate::texture::round_u8;

/// Polynomial fit of the Turbo colormap, `t` in `[0, 1]`.
pub fn turbo(t: f64) -> [u8; 3] {
    let x = t.clamp(0.0, 1.0);
    let poly = |c: [f64; 6]| c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5]))));
    let r = poly([
        0.13572138,
        4.61539260,
        -42.66032258,
        132.13108234,
        -152.94239396,
        59.28637943,
    ]);
    let g = poly([0.09140261, 2.19418839, 4.84296658, -14.18503333, 4.27729857, 2.82956604]);
    let b = poly([
        0.10667330,
        12.64194608,
        -60.58204836,
        110.36276771,
        -89.90310912,
        27.34824973,
    ]);
    [r, g, b].map(|c| round_u8(255.0 * c.clamp(0.0, 1.0)))
}

/// Maps `[0, ndisp]` linearly onto the colormap.
pub fn colorize_disparity(disp: &DisparityMap, ndisp: f64) -> RgbImage {
    disp.map(|&d| turbo(d as f64 / ndisp))
}

fn luma(p: [u8; 3]) -> u8 {
    round_u8(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
}

/// Red-cyan anaglyph: red carries the left luma, green and blue the right.
pub fn anaglyph(left: &RgbImage, right: &RgbImage) -> RgbImage {
    assert!(left.same_shape(right), "anaglyph inputs differ in size");
    let data = left
        .data
        .iter()
        .zip(&right.data)
        .map(|(&l, &r)| {
            let (l, r) = (luma(l), luma(r));
            [l, r, r]
        })
        .collect();
    RgbImage::from_vec(left.width, left.height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn endpoints() {
        let d = Grid::from_vec(2, 1, vec![0.0f32, 64.0]);
        let c = colorize_disparity(&d, 64.0);
        assert_eq!(c.data[0], turbo(0.0));
        assert_eq!(c.data[1], turbo(1.0));
        assert_ne!(turbo(0.0), turbo(1.0));
    }

    #[test]
    fn constant_map_is_one_color() {
        let c = colorize_disparity(&Grid::filled(5, 4, 12.5f32), 192.0);
        assert!(c.data.iter().all(|&p| p == c.data[0]));
    }

    #[test]
    fn identical_views_give_gray() {
        let img = Grid::from_vec(3, 1, vec![[10u8, 200, 30], [255, 255, 255], [0, 0, 0]]);
        let a = anaglyph(&img, &img);
        for (p, q) in a.data.iter().zip(&img.data) {
            assert!(p[0] == p[1] && p[1] == p[2]);
            assert_eq!(p[0], luma(*q));
        }
    }
}

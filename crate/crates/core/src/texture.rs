//! Square texture patches cropped from real photographs, and unlit
//! wrap-around sampling.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::RgbImage;
use crate::math::Vec3;
use crate::scene::{BackgroundFace, Eye, Scene, StereoRig};

/// An 8-bit RGB photograph.
#[derive(Debug, Clone)]
pub struct SourceImage {
    pub pixels: RgbImage,
    pub origin_id: String,
}

impl SourceImage {
    pub fn new(pixels: RgbImage, origin_id: impl Into<String>) -> Result<Self> {
        let origin_id = origin_id.into();
        if pixels.width < 16 || pixels.height < 16 {
            return Err(Error::ImageTooSmall {
                origin: origin_id,
                width: pixels.width,
                height: pixels.height,
                min_side: 16,
            });
        }
        Ok(Self { pixels, origin_id })
    }

    pub fn min_side(&self) -> usize {
        self.pixels.width.min(self.pixels.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchSpec {
    pub count: usize,
    pub side_frac_min: f64,
    pub side_frac_max: f64,
    pub out_side_px: usize,
}

impl PatchSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.side_frac_min && self.side_frac_min <= self.side_frac_max && self.side_frac_max <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "patch side fractions must satisfy 0 < {} <= {} <= 1",
                self.side_frac_min, self.side_frac_max
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidParam("patch count must be >= 1".into()));
        }
        if self.out_side_px < 8 {
            return Err(Error::InvalidParam("patch output side must be >= 8 px".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub origin_id: String,
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

/// Equal-sized square patches plus where each one was cropped from.
#[derive(Debug, Clone)]
pub struct PatchSequence {
    pub side: usize,
    pub patches: Vec<RgbImage>,
    pub provenance: Vec<Provenance>,
}

impl PatchSequence {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// Crops `spec.count` random squares and resamples each to
/// `spec.out_side_px`. Crop rectangles are drawn sequentially from `rng`;
/// resampling runs in parallel but cannot affect the output order.
pub fn extract_patches<R: Rng + ?Sized>(
    images: &[SourceImage],
    spec: &PatchSpec,
    rng: &mut R,
) -> Result<PatchSequence> {
    spec.validate()?;
    if images.is_empty() {
        return Err(Error::NoTextures);
    }
    for img in images {
        let m = img.min_side() as f64;
        if m * spec.side_frac_min < 8.0 {
            return Err(Error::ImageTooSmall {
                origin: img.origin_id.clone(),
                width: img.pixels.width,
                height: img.pixels.height,
                min_side: (8.0 / spec.side_frac_min).ceil() as usize,
            });
        }
    }

    let crops: Vec<(usize, Provenance)> = (0..spec.count)
        .map(|_| {
            let i = rng.gen_range(0..images.len());
            let img = &images[i];
            let m = img.min_side();
            let frac = rng.gen_range(spec.side_frac_min..=spec.side_frac_max);
            let side = ((frac * m as f64).floor() as usize).clamp(8, m);
            let x = rng.gen_range(0..=img.pixels.width - side);
            let y = rng.gen_range(0..=img.pixels.height - side);
            let prov = Provenance {
                origin_id: img.origin_id.clone(),
                x,
                y,
                side,
            };
            (i, prov)
        })
        .collect();

    let patches = crops
        .par_iter()
        .map(|(i, p)| resample_crop(&images[*i].pixels, p.x, p.y, p.side, spec.out_side_px))
        .collect();

    Ok(PatchSequence {
        side: spec.out_side_px,
        patches,
        provenance: crops.into_iter().map(|(_, p)| p).collect(),
    })
}

/// Area-averaging (box) resampling when shrinking, bilinear when enlarging.
pub fn resample_crop(src: &RgbImage, x0: usize, y0: usize, side: usize, out: usize) -> RgbImage {
    let weights = if side >= out {
        box_weights(side, out)
    } else {
        bilinear_weights(side, out)
    };
    let mut dst = RgbImage::filled(out, out, [0u8; 3]);
    for (oy, wy) in weights.iter().enumerate() {
        for (ox, wx) in weights.iter().enumerate() {
            let mut acc = [0.0f64; 3];
            for &(sy, ky) in wy {
                for &(sx, kx) in wx {
                    let p = src.get(x0 + sx, y0 + sy);
                    let k = kx * ky;
                    for c in 0..3 {
                        acc[c] += k * p[c] as f64;
                    }
                }
            }
            *dst.get_mut(ox, oy) = acc.map(round_u8);
        }
    }
    dst
}

/// For each output sample, the contributing source indices and normalized
/// weights of a box filter covering `[o * s/out, (o+1) * s/out)`.
fn box_weights(side: usize, out: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = side as f64 / out as f64;
    (0..out)
        .map(|o| {
            let (a, b) = (o as f64 * ratio, (o + 1) as f64 * ratio);
            let mut w: Vec<(usize, f64)> = (a.floor() as usize..(b.ceil() as usize).min(side))
                .map(|s| (s, (b.min(s as f64 + 1.0) - a.max(s as f64)).max(0.0)))
                .filter(|&(_, k)| k > 0.0)
                .collect();
            let total: f64 = w.iter().map(|(_, k)| k).sum();
            w.iter_mut().for_each(|(_, k)| *k /= total);
            w
        })
        .collect()
}

/// Pixel-center aligned linear interpolation, clamped at the crop border.
fn bilinear_weights(side: usize, out: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = side as f64 / out as f64;
    (0..out)
        .map(|o| {
            let s = ((o as f64 + 0.5) * ratio - 0.5).clamp(0.0, (side - 1) as f64);
            let i = (s.floor() as usize).min(side - 1);
            let f = s - i as f64;
            if f == 0.0 || i + 1 >= side {
                vec![(i, 1.0)]
            } else {
                vec![(i, 1.0 - f), (i + 1, f)]
            }
        })
        .collect()
}

/// Rounds half away from zero and saturates to `0..=255`.
pub fn round_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Gives every object and every background face an independent, uniformly
/// drawn patch. Objects draw first, in order, then background faces.
pub fn assign_textures<R: Rng + ?Sized>(scene: &Scene, seq: &PatchSequence, rng: &mut R) -> Result<Scene> {
    if seq.is_empty() {
        return Err(Error::NoTextures);
    }
    let mut out = scene.clone();
    for o in &mut out.objects {
        o.texture = rng.gen_range(0..seq.len());
    }
    for f in out.background.faces_mut() {
        f.texture = rng.gen_range(0..seq.len());
    }
    Ok(out)
}

pub const UV_SCALE_MIN: f64 = 0.25;
pub const UV_SCALE_MAX: f64 = 64.0;

/// Tiling factor so that one texel of a `patch_side_px` patch covers
/// `texel_px` screen pixels on a span of `span_m` meters seen at `depth_m`.
pub fn uv_scale_for_span(span_m: f64, depth_m: f64, patch_side_px: usize, rig: &StereoRig, texel_px: f64) -> f64 {
    let projected_px = rig.f_px() * span_m / depth_m;
    (projected_px / (patch_side_px as f64 * texel_px)).clamp(UV_SCALE_MIN, UV_SCALE_MAX)
}

/// Mapping scale for an object whose world-space bounding box has extents
/// `bbox_extent`, at its spawn depth. The reference span is the side of the
/// square with the same area as the largest bounding-box face.
pub fn compute_uv_scale(
    bbox_extent: Vec3,
    patch_side_px: usize,
    spawn_depth: f64,
    rig: &StereoRig,
    texel_px: f64,
) -> f64 {
    let e = bbox_extent;
    let largest = (e.x * e.y).max(e.y * e.z).max(e.x * e.z);
    uv_scale_for_span(largest.sqrt(), spawn_depth, patch_side_px, rig, texel_px)
}

/// Samples per face side when searching for the smallest on-screen texel.
const FACE_PROBES: usize = 64;

/// Per-axis tiling for a background face such that no texel visible in
/// either eye is shorter than `texel_px` pixels along U or V. The face is
/// probed on a regular grid; only points in front of the near plane that
/// project inside the image count. A face with no visible probe is scaled
/// as if fronto-parallel at its farthest corner.
pub fn background_uv_scale(face: &BackgroundFace, patch_side_px: usize, rig: &StereoRig, texel_px: f64) -> [f64; 2] {
    let (o, eu, ev) = (
        face.corners[0],
        face.corners[1] - face.corners[0],
        face.corners[3] - face.corners[0],
    );
    let (du, dv) = (eu.normalized(), ev.normalized());
    let f = rig.f_px();
    let (cx, cy) = rig.principal_point();
    let (w, h) = (rig.width_px as f64, rig.height_px as f64);
    // Pixels per meter along `d` at camera-space point `p`.
    let rate = |p: Vec3, d: Vec3| {
        let (x, y, z) = (p.x, p.y, p.z);
        f * ((d.x * z - x * d.z).powi(2) + (d.y * z - y * d.z).powi(2)).sqrt() / (z * z)
    };
    let (mut ru, mut rv) = (f64::INFINITY, f64::INFINITY);
    for eye in [Eye::Left, Eye::Right] {
        let shift = Vec3::new(rig.eye_offset(eye), 0.0, 0.0);
        for i in 0..=FACE_PROBES {
            for j in 0..=FACE_PROBES {
                let (s, t) = (i as f64 / FACE_PROBES as f64, j as f64 / FACE_PROBES as f64);
                let p = o + eu * s + ev * t - shift;
                if p.z < rig.z_near_m {
                    continue;
                }
                let (x, y) = (f * p.x / p.z + cx, f * p.y / p.z + cy);
                if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
                    continue;
                }
                ru = ru.min(rate(p, du));
                rv = rv.min(rate(p, dv));
            }
        }
    }
    if !ru.is_finite() || !rv.is_finite() {
        let far = face.corners.iter().map(|c| c.z).fold(rig.z_near_m, f64::max);
        return [
            uv_scale_for_span(face.span_u(), far, patch_side_px, rig, texel_px),
            uv_scale_for_span(face.span_v(), far, patch_side_px, rig, texel_px),
        ];
    }
    let scale = |r: f64, span: f64| (r * span / (patch_side_px as f64 * texel_px)).clamp(UV_SCALE_MIN, UV_SCALE_MAX);
    [scale(ru, face.span_u()), scale(rv, face.span_v())]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    Nearest,
    #[default]
    Bilinear,
}

/// Texture filter plus the per-axis cap on color sub-samples per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub filter: Filter,
    /// 1 disables supersampling.
    pub max_samples: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Filter::default().into()
    }
}

impl From<Filter> for Sampling {
    fn from(filter: Filter) -> Self {
        Self { filter, max_samples: 1 }
    }
}

/// Samples `patch` at `uv` with repeat wrapping. Texel `(i, j)` is centered
/// at `((i + 0.5) / side, (j + 0.5) / side)`; `v` grows down the image.
#[inline]
pub fn sample_texture(patch: &RgbImage, uv: [f64; 2], filter: Filter) -> [u8; 3] {
    sample_texture_f64(patch, uv, filter).map(round_u8)
}

/// [`sample_texture`] before rounding.
#[inline]
pub fn sample_texture_f64(patch: &RgbImage, uv: [f64; 2], filter: Filter) -> [f64; 3] {
    let (w, h) = (patch.width, patch.height);
    let u = uv[0] - uv[0].floor();
    let v = uv[1] - uv[1].floor();
    match filter {
        Filter::Nearest => {
            let x = ((u * w as f64) as usize).min(w - 1);
            let y = ((v * h as f64) as usize).min(h - 1);
            patch.get(x, y).map(f64::from)
        }
        Filter::Bilinear => {
            let x = u * w as f64 - 0.5;
            let y = v * h as f64 - 0.5;
            let (xf, yf) = (x.floor(), y.floor());
            let (fx, fy) = (x - xf, y - yf);
            let x0 = (xf as isize).rem_euclid(w as isize) as usize;
            let y0 = (yf as isize).rem_euclid(h as isize) as usize;
            let x1 = if x0 + 1 == w { 0 } else { x0 + 1 };
            let y1 = if y0 + 1 == h { 0 } else { y0 + 1 };
            let (p00, p10, p01, p11) = (
                patch.get(x0, y0),
                patch.get(x1, y0),
                patch.get(x0, y1),
                patch.get(x1, y1),
            );
            std::array::from_fn(|c| {
                let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
                let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
                top * (1.0 - fy) + bottom * fy
            })
        }
    }
}

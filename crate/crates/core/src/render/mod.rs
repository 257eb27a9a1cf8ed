//! Unlit stereo rendering, disparity ground truth and occlusion masks.

mod raster;
mod raycast;

pub use raster::{rasterize, rasterize_triangles, RasterOutput};
pub use raycast::{raycast_depth, raycast_triangles};

use crate::error::{Error, Result};
use crate::grid::{DepthBuffer, DisparityMap, Mask, RgbImage};
use crate::math::Vec3;
use crate::scene::{Eye, Scene, StereoRig};
use crate::texture::{PatchSequence, Sampling};

/// Object id of background geometry in [`RasterOutput::object`].
pub const BACKGROUND_ID: u32 = 0;
/// Object id of pixels nothing was drawn to.
pub const NO_OBJECT: u32 = u32::MAX;

/// Relative depth difference above which a left pixel counts as occluded in
/// the right view.
pub const OCCLUSION_EPS: f64 = 0.01;

/// Pinhole projection: `(x_px, y_px, Z)` with the principal point at the
/// image center. Points with `Z <= 0` are behind the camera.
pub fn project(p: Vec3, rig: &StereoRig, eye: Eye) -> (f64, f64, f64) {
    let f = rig.f_px();
    let (cx, cy) = rig.principal_point();
    let x = p.x - rig.eye_offset(eye);
    (f * x / p.z + cx, f * p.y / p.z + cy, p.z)
}

/// One triangle in camera space of a particular eye, ready to draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderTriangle {
    pub p: [Vec3; 3],
    /// Texture coordinates with the mapping scale already applied.
    pub uv: [[f64; 2]; 3],
    pub texture: u32,
    /// [`BACKGROUND_ID`] for the background, `i + 1` for scene object `i`.
    pub object: u32,
}

/// Camera-space triangles of everything alive at `frame`, background first,
/// then objects in scene order. This order is the depth-test tie-break order.
pub fn gather_triangles(scene: &Scene, frame: u32, eye: Eye) -> Vec<RenderTriangle> {
    let shift = Vec3::new(scene.rig.eye_offset(eye), 0.0, 0.0);
    let mut out = Vec::new();
    for face in scene.background.faces() {
        let c = face.corners.map(|p| p - shift);
        let [su, sv] = face.uv_scale;
        let uv = [[0.0, 0.0], [su, 0.0], [su, sv], [0.0, sv]];
        for [a, b, d] in [[0, 1, 2], [0, 2, 3]] {
            out.push(RenderTriangle {
                p: [c[a], c[b], c[d]],
                uv: [uv[a], uv[b], uv[d]],
                texture: face.texture as u32,
                object: BACKGROUND_ID,
            });
        }
    }
    for (i, obj) in scene.objects.iter().enumerate() {
        let Some(age) = scene.object_age(obj, frame) else {
            continue;
        };
        let xf = scene.object_transform(obj, age);
        let mesh = &scene.meshes[obj.mesh];
        let world: Vec<Vec3> = mesh.vertices.iter().map(|&v| xf.apply(v) - shift).collect();
        let s = obj.uv_scale;
        for t in &mesh.triangles {
            out.push(RenderTriangle {
                p: t.v.map(|v| world[v as usize]),
                uv: t.uv.map(|k| {
                    let [u, v] = mesh.uvs[k as usize];
                    [u * s, v * s]
                }),
                texture: obj.texture as u32,
                object: i as u32 + 1,
            });
        }
    }
    out
}

/// `d = f_px * B / Z`; infinite depth maps to zero disparity.
pub fn depth_to_disparity(depth: &DepthBuffer, rig: &StereoRig) -> Result<DisparityMap> {
    let fb = rig.disparity_scale();
    let mut worst = 0.0f64;
    let out = depth.map(|&z| {
        let d = if z.is_finite() { fb / z } else { 0.0 };
        worst = worst.max(d);
        d as f32
    });
    if worst > rig.ndisp {
        return Err(Error::MaxDisparityExceeded {
            value: worst,
            ndisp: rig.ndisp,
        });
    }
    Ok(out)
}

/// Marks left pixels whose surface point is not visible in the right view:
/// the matching column `round(x - d)` falls outside the image, or the right
/// depth there differs by more than [`OCCLUSION_EPS`] relative.
pub fn occlusion_mask(depth_left: &DepthBuffer, depth_right: &DepthBuffer, rig: &StereoRig) -> Mask {
    let fb = rig.disparity_scale();
    let w = depth_left.width;
    let mut mask = Mask::filled(w, depth_left.height, 0);
    for y in 0..depth_left.height {
        for x in 0..w {
            let zl = *depth_left.get(x, y);
            if !zl.is_finite() {
                continue;
            }
            let xr = (x as f64 - fb / zl).round();
            let occluded = if xr < 0.0 || xr >= w as f64 {
                true
            } else {
                let zr = *depth_right.get(xr as usize, y);
                !((zr - zl).abs() / zl <= OCCLUSION_EPS)
            };
            *mask.get_mut(x, y) = occluded as u8;
        }
    }
    mask
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FrameMeta {
    pub frame: u32,
    pub seed: u64,
    pub scene_hash: String,
}

/// One dataset record.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub left_rgb: RgbImage,
    pub right_rgb: RgbImage,
    pub disp_left: DisparityMap,
    /// 1 where the left pixel is occluded in the right view.
    pub occlusion: Mask,
    /// 1 where the left pixel shows a foreground object.
    pub foreground: Mask,
    pub disp_right: Option<DisparityMap>,
    pub meta: FrameMeta,
}

impl FrameSample {
    pub fn occluded_fraction(&self) -> f64 {
        let n = self.occlusion.data.iter().filter(|&&m| m != 0).count();
        n as f64 / self.occlusion.data.len() as f64
    }

    /// Sanity bounds every generated frame should meet.
    pub fn check_invariants(&self, rig: &StereoRig) -> Result<()> {
        let max = self.disp_left.data.iter().fold(0.0f32, |a, &d| a.max(d));
        if self.disp_left.data.iter().any(|&d| !(d >= 0.0)) || max as f64 > rig.ndisp {
            return Err(Error::MaxDisparityExceeded {
                value: max as f64,
                ndisp: rig.ndisp,
            });
        }
        if self.occluded_fraction() >= 0.5 {
            return Err(Error::Invariant(format!(
                "frame {} is {:.0}% occluded",
                self.meta.frame,
                self.occluded_fraction() * 100.0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderOptions {
    pub sampling: Sampling,
    pub right_disparity: bool,
}

/// Renders both views of `frame` and derives ground truth. `scene` must
/// already carry its texture assignment for this frame.
pub fn render_pair(scene: &Scene, patches: &PatchSequence, frame: u32, opts: &RenderOptions) -> Result<FrameSample> {
    if frame >= scene.frames {
        return Err(Error::InvalidParam(format!(
            "frame {frame} outside 0..{}",
            scene.frames
        )));
    }
    let left = rasterize(scene, patches, frame, Eye::Left, opts.sampling);
    let right = rasterize(scene, patches, frame, Eye::Right, opts.sampling);
    let disp_left = depth_to_disparity(&left.depth, &scene.rig)?;
    let disp_right = if opts.right_disparity {
        Some(depth_to_disparity(&right.depth, &scene.rig)?)
    } else {
        None
    };
    let occlusion = occlusion_mask(&left.depth, &right.depth, &scene.rig);
    let foreground = left.object.map(|&o| (o != BACKGROUND_ID && o != NO_OBJECT) as u8);
    Ok(FrameSample {
        left_rgb: left.color,
        right_rgb: right.color,
        disp_left,
        occlusion,
        foreground,
        disp_right,
        meta: FrameMeta {
            frame,
            seed: crate::rng::frame_seed(scene.seed, frame),
            scene_hash: scene.hash.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rig() -> StereoRig {
        // f_px = 1000, B = 0.1
        StereoRig::new(35.0, 35.0, 1000, 480, 0.1, 0.1, 192.0).unwrap()
    }

    #[test]
    fn projection_examples() {
        let r = rig();
        assert_eq!(project(Vec3::new(0.0, 0.0, 5.0), &r, Eye::Left), (500.0, 240.0, 5.0));
        let (xl, _, _) = project(Vec3::new(0.0, 0.0, 5.0), &r, Eye::Left);
        let (xr, _, _) = project(Vec3::new(0.0, 0.0, 5.0), &r, Eye::Right);
        assert!((xr - xl + 20.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn disparity_identity(x in -5.0f64..5.0, y in -5.0f64..5.0, z in 0.2f64..200.0) {
            let r = rig();
            let p = Vec3::new(x, y, z);
            let (xl, yl, _) = project(p, &r, Eye::Left);
            let (xr, yr, _) = project(p, &r, Eye::Right);
            prop_assert!((xl - xr - r.disparity_at(z)).abs() < 1e-6);
            prop_assert_eq!(yl, yr);
        }
    }

    #[test]
    fn disparity_examples() {
        let r = rig();
        let d = depth_to_disparity(&DepthBuffer::filled(8, 8, 100.0), &r).unwrap();
        assert!(d.data.iter().all(|&v| v == 1.0));
        let far = depth_to_disparity(&DepthBuffer::filled(8, 8, 1e4 * 100.0), &r).unwrap();
        assert!(far.data.iter().all(|&v| (v - 1e-4).abs() < 1e-10));
        let empty = depth_to_disparity(&DepthBuffer::filled(8, 8, f64::INFINITY), &r).unwrap();
        assert!(empty.data.iter().all(|&v| v == 0.0));
        assert!(matches!(
            depth_to_disparity(&DepthBuffer::filled(8, 8, 0.5), &r),
            Err(Error::MaxDisparityExceeded { .. })
        ));
    }

    #[test]
    fn plane_has_only_border_occlusion() {
        let r = rig();
        // Z = 10 -> d = 10 px: the leftmost columns with round(x - 10) < 0 fall outside.
        let z = DepthBuffer::filled(64, 16, 10.0);
        let m = occlusion_mask(&z, &z, &r);
        for y in 0..16 {
            for x in 0..64 {
                assert_eq!(*m.get(x, y) == 1, x < 10, "x={x}");
            }
        }
    }

    /// Left and right depth of a near square at `zn` spanning columns
    /// `[x0, x1)` of the left view in front of a wall at `zf`, built by
    /// shifting every surface by its own disparity.
    fn two_planes(zn: f64, zf: f64, x0: usize, x1: usize, w: usize) -> (DepthBuffer, DepthBuffer) {
        let r = rig();
        let dn = r.disparity_at(zn);
        let mut left = DepthBuffer::filled(w, 4, zf);
        let mut right = DepthBuffer::filled(w, 4, zf);
        for y in 0..4 {
            for x in x0..x1 {
                *left.get_mut(x, y) = zn;
            }
            for x in 0..w {
                // The right view sees the square where x + dn lands inside it.
                let src = x as f64 + dn;
                if src >= x0 as f64 && src < x1 as f64 {
                    *right.get_mut(x, y) = zn;
                }
            }
        }
        (left, right)
    }

    #[test]
    fn occlusion_band_width_matches_disparity_gap() {
        let r = rig();
        let (zn, zf) = (5.0, 20.0); // d = 20 and 5 px
        let (left, right) = two_planes(zn, zf, 100, 140, 200);
        let m = occlusion_mask(&left, &right, &r);
        let band: Vec<usize> = (0..200).filter(|&x| *m.get(x, 0) == 1 && x >= 10).collect();
        // Oracle: wall pixels x in [100 - (dn - df), 100) map under the square.
        let gap = (r.disparity_at(zn) - r.disparity_at(zf)).round() as usize;
        assert_eq!(band, (100 - gap..100).collect::<Vec<_>>());
        assert_eq!(occlusion_mask(&left, &right, &r), m);
    }

    #[test]
    fn nearer_occluder_never_shrinks_band() {
        let r = rig();
        let mut last = 0;
        for zn in [10.0, 8.0, 6.0, 5.0, 4.0, 3.0] {
            let (left, right) = two_planes(zn, 20.0, 100, 140, 300);
            let m = occlusion_mask(&left, &right, &r);
            let n = (20..300).filter(|&x| *m.get(x, 0) == 1).count();
            assert!(n >= last);
            last = n;
        }
    }
}

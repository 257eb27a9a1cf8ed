//! Scanline rasterizer with near-plane clipping, top-left fill rule and
//! perspective-correct attribute interpolation.
//!
//! The image is split into horizontal strips rendered in parallel. Every
//! strip visits its triangles in global submission order and the depth test
//! is strict, so the earliest triangle wins exact ties no matter how strips
//! are scheduled.

use arrayvec::ArrayVec;
use rayon::prelude::*;

use super::{gather_triangles, RenderTriangle, NO_OBJECT};
use crate::grid::{DepthBuffer, Grid, RgbImage};
use crate::math::Vec3;
use crate::scene::{Eye, Scene, StereoRig};
use crate::texture::{round_u8, sample_texture_f64, PatchSequence, Sampling};

const STRIP_ROWS: usize = 16;

#[derive(Debug, Clone)]
pub struct RasterOutput {
    pub color: RgbImage,
    pub depth: DepthBuffer,
    /// Object id per pixel, [`NO_OBJECT`] where nothing was drawn.
    pub object: Grid<u32>,
}

/// Renders one eye of `scene` at `frame`.
pub fn rasterize(scene: &Scene, patches: &PatchSequence, frame: u32, eye: Eye, sampling: Sampling) -> RasterOutput {
    let tris = gather_triangles(scene, frame, eye);
    rasterize_triangles(&tris, &scene.rig, patches, sampling)
}

/// Screen-space triangle after clipping. Vertices are ordered so the
/// doubled signed area is positive.
#[derive(Debug, Clone, Copy)]
struct ScreenTri {
    x: [f64; 3],
    y: [f64; 3],
    inv_z: [f64; 3],
    u_over_z: [f64; 3],
    v_over_z: [f64; 3],
    inv_area2: f64,
    src: u32,
}

impl ScreenTri {
    /// Edge function of edge `a -> b` at `(px, py)`; positive inside.
    #[inline(always)]
    fn edge(&self, a: usize, b: usize, px: f64, py: f64) -> f64 {
        (py - self.y[a]) * (self.x[b] - self.x[a]) - (px - self.x[a]) * (self.y[b] - self.y[a])
    }

    /// Whether a pixel center lying exactly on edge `a -> b` belongs to this
    /// triangle. Opposite directions of a shared edge always disagree, so
    /// such pixels are drawn exactly once.
    #[inline(always)]
    fn owns_edge(&self, a: usize, b: usize) -> bool {
        let dx = self.x[b] - self.x[a];
        let dy = self.y[b] - self.y[a];
        dy < 0.0 || (dy == 0.0 && dx > 0.0)
    }

    /// Barycentric weights of vertices 0, 1, 2, or `None` if outside.
    #[inline(always)]
    fn cover(&self, px: f64, py: f64) -> Option<[f64; 3]> {
        let e0 = self.edge(1, 2, px, py);
        let e1 = self.edge(2, 0, px, py);
        let e2 = self.edge(0, 1, px, py);
        let inside = |e: f64, a: usize, b: usize| e > 0.0 || (e == 0.0 && self.owns_edge(a, b));
        if inside(e0, 1, 2) && inside(e1, 2, 0) && inside(e2, 0, 1) {
            Some([e0 * self.inv_area2, e1 * self.inv_area2, e2 * self.inv_area2])
        } else {
            None
        }
    }

    #[inline(always)]
    fn lerp(w: [f64; 3], a: [f64; 3]) -> f64 {
        w[0] * a[0] + w[1] * a[1] + w[2] * a[2]
    }

    /// Weights at any point of the triangle's plane, without the fill rule.
    #[inline(always)]
    fn weights(&self, px: f64, py: f64) -> [f64; 3] {
        [
            self.edge(1, 2, px, py) * self.inv_area2,
            self.edge(2, 0, px, py) * self.inv_area2,
            self.edge(0, 1, px, py) * self.inv_area2,
        ]
    }

    /// Perspective-correct texture coordinates on the triangle's plane, or
    /// `None` behind the camera.
    #[inline(always)]
    fn uv(&self, px: f64, py: f64) -> Option<[f64; 2]> {
        let b = self.weights(px, py);
        let iz = Self::lerp(b, self.inv_z);
        (iz > 0.0).then(|| [Self::lerp(b, self.u_over_z) / iz, Self::lerp(b, self.v_over_z) / iz])
    }

    /// Conservative column range whose pixel centers may be covered on the
    /// row with center `py`.
    fn span(&self, py: f64, width: usize) -> Option<(usize, usize)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in [(1, 2), (2, 0), (0, 1)] {
            let dy = self.y[b] - self.y[a];
            let at_x_a = (py - self.y[a]) * (self.x[b] - self.x[a]);
            if dy == 0.0 {
                if at_x_a < 0.0 {
                    return None;
                }
                continue;
            }
            // edge(px) = at_x_a - (px - x_a) * dy >= 0
            let root = self.x[a] + at_x_a / dy;
            if dy > 0.0 {
                hi = hi.min(root);
            } else {
                lo = lo.max(root);
            }
        }
        if !(lo <= hi + 1.0) {
            return None;
        }
        let first = (lo - 0.5).floor() - 1.0;
        let last = (hi - 0.5).ceil() + 1.0;
        if last < 0.0 || first >= width as f64 {
            return None;
        }
        Some((first.max(0.0) as usize, (last.min(width as f64 - 1.0)) as usize))
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    p: Vec3,
    uv: [f64; 2],
}

/// Clips a triangle to `z >= z_near`, yielding a convex polygon of up to
/// four vertices.
fn clip_near(t: &RenderTriangle, z_near: f64) -> ArrayVec<ClipVertex, 4> {
    let mut out = ArrayVec::new();
    let verts = [0, 1, 2].map(|i| ClipVertex { p: t.p[i], uv: t.uv[i] });
    for i in 0..3 {
        let a = verts[i];
        let b = verts[(i + 1) % 3];
        let a_in = a.p.z >= z_near;
        let b_in = b.p.z >= z_near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let s = (z_near - a.p.z) / (b.p.z - a.p.z);
            let p = a.p + (b.p - a.p) * s;
            out.push(ClipVertex {
                p: Vec3::new(p.x, p.y, z_near),
                uv: [a.uv[0] + (b.uv[0] - a.uv[0]) * s, a.uv[1] + (b.uv[1] - a.uv[1]) * s],
            });
        }
    }
    out
}

fn setup(tris: &[RenderTriangle], rig: &StereoRig) -> Vec<ScreenTri> {
    let f = rig.f_px();
    let (cx, cy) = rig.principal_point();
    let (w, h) = (rig.width_px as f64, rig.height_px as f64);
    let mut out = Vec::with_capacity(tris.len());
    for (src, t) in tris.iter().enumerate() {
        let poly = clip_near(t, rig.z_near_m);
        if poly.len() < 3 {
            continue;
        }
        let proj = |c: ClipVertex| {
            let iz = 1.0 / c.p.z;
            (f * c.p.x * iz + cx, f * c.p.y * iz + cy, iz, c.uv[0] * iz, c.uv[1] * iz)
        };
        let v0 = proj(poly[0]);
        for k in 1..poly.len() - 1 {
            let mut v = [v0, proj(poly[k]), proj(poly[k + 1])];
            let xs = [v[0].0, v[1].0, v[2].0];
            let ys = [v[0].1, v[1].1, v[2].1];
            let (xmin, xmax) = (xs[0].min(xs[1]).min(xs[2]), xs[0].max(xs[1]).max(xs[2]));
            let (ymin, ymax) = (ys[0].min(ys[1]).min(ys[2]), ys[0].max(ys[1]).max(ys[2]));
            if xmax < 0.0 || xmin > w || ymax < 0.0 || ymin > h {
                continue;
            }
            let area2 = (v[2].1 - v[0].1) * (v[1].0 - v[0].0) - (v[2].0 - v[0].0) * (v[1].1 - v[0].1);
            if area2 == 0.0 || !area2.is_finite() {
                continue;
            }
            if area2 < 0.0 {
                v.swap(1, 2);
            }
            out.push(ScreenTri {
                x: [v[0].0, v[1].0, v[2].0],
                y: [v[0].1, v[1].1, v[2].1],
                inv_z: [v[0].2, v[1].2, v[2].2],
                u_over_z: [v[0].3, v[1].3, v[2].3],
                v_over_z: [v[0].4, v[1].4, v[2].4],
                inv_area2: 1.0 / area2.abs(),
                src: src as u32,
            });
        }
    }
    out
}

/// Rasterizes already-gathered camera-space triangles.
pub fn rasterize_triangles(
    tris: &[RenderTriangle],
    rig: &StereoRig,
    patches: &PatchSequence,
    sampling: Sampling,
) -> RasterOutput {
    let (w, h) = (rig.width_px as usize, rig.height_px as usize);
    let screen = setup(tris, rig);

    let n_strips = h.div_ceil(STRIP_ROWS);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); n_strips];
    for (i, t) in screen.iter().enumerate() {
        let ymin = t.y[0].min(t.y[1]).min(t.y[2]);
        let ymax = t.y[0].max(t.y[1]).max(t.y[2]);
        let r0 = ((ymin - 0.5).ceil().max(0.0)) as usize;
        let r1 = (ymax - 0.5).floor();
        if r1 < 0.0 {
            continue;
        }
        let r1 = (r1 as usize).min(h - 1);
        if r0 > r1 {
            continue;
        }
        for b in &mut bins[r0 / STRIP_ROWS..=r1 / STRIP_ROWS] {
            b.push(i as u32);
        }
    }

    let mut color = RgbImage::filled(w, h, [0, 0, 0]);
    let mut depth = DepthBuffer::filled(w, h, f64::INFINITY);
    let mut object = Grid::filled(w, h, NO_OBJECT);

    color
        .data
        .par_chunks_mut(w * STRIP_ROWS)
        .zip(depth.data.par_chunks_mut(w * STRIP_ROWS))
        .zip(object.data.par_chunks_mut(w * STRIP_ROWS))
        .enumerate()
        .for_each(|(s, ((color, depth), object))| {
            let y0 = s * STRIP_ROWS;
            let rows = color.len() / w;
            let mut inv_z = vec![0.0f64; rows * w];
            let mut winner = vec![u32::MAX; rows * w];
            for &ti in &bins[s] {
                let t = &screen[ti as usize];
                let ymin = t.y[0].min(t.y[1]).min(t.y[2]);
                let ymax = t.y[0].max(t.y[1]).max(t.y[2]);
                let r0 = ((ymin - 0.5).ceil().max(y0 as f64)) as usize;
                let r1 = ((ymax - 0.5).floor().min((y0 + rows - 1) as f64)) as usize;
                for y in r0..=r1 {
                    let py = y as f64 + 0.5;
                    let Some((x0, x1)) = t.span(py, w) else {
                        continue;
                    };
                    let row = (y - y0) * w;
                    for x in x0..=x1 {
                        let px = x as f64 + 0.5;
                        if let Some(b) = t.cover(px, py) {
                            let iz = ScreenTri::lerp(b, t.inv_z);
                            let slot = row + x;
                            if iz > inv_z[slot] {
                                inv_z[slot] = iz;
                                winner[slot] = ti;
                            }
                        }
                    }
                }
            }
            for (slot, &ti) in winner.iter().enumerate() {
                if ti == u32::MAX {
                    continue;
                }
                let t = &screen[ti as usize];
                let src = &tris[t.src as usize];
                let px = (slot % w) as f64 + 0.5;
                let py = (y0 + slot / w) as f64 + 0.5;
                let patch = &patches.patches[src.texture as usize];
                let iz = inv_z[slot];
                color[slot] = shade(t, patch, px, py, sampling);
                depth[slot] = 1.0 / iz;
                object[slot] = src.object;
            }
        });

    RasterOutput { color, depth, object }
}

/// Color of the pixel centered at `(px, py)`. Where the pixel spans more
/// than one texel along an axis, the texture is averaged over a regular grid
/// of sub-pixel positions on the same triangle plane, so colors never mix
/// across surfaces.
fn shade(t: &ScreenTri, patch: &RgbImage, px: f64, py: f64, sampling: Sampling) -> [u8; 3] {
    let Some(uv) = t.uv(px, py) else {
        return [0, 0, 0];
    };
    let counts = if sampling.max_samples > 1 {
        let side = patch.width.max(patch.height) as f64;
        let cap = sampling.max_samples as f64;
        let count = |q: Option<[f64; 2]>| match q {
            Some(q) => ((q[0] - uv[0]).abs().max((q[1] - uv[1]).abs()) * side - 1e-9)
                .ceil()
                .clamp(1.0, cap) as u32,
            None => sampling.max_samples,
        };
        (count(t.uv(px + 1.0, py)), count(t.uv(px, py + 1.0)))
    } else {
        (1, 1)
    };
    if counts == (1, 1) {
        return sample_texture_f64(patch, uv, sampling.filter).map(round_u8);
    }
    let (nx, ny) = counts;
    let mut acc = [0.0; 3];
    let mut n = 0u32;
    for j in 0..ny {
        let sy = py + (j as f64 + 0.5) / ny as f64 - 0.5;
        for i in 0..nx {
            let sx = px + (i as f64 + 0.5) / nx as f64 - 0.5;
            if let Some(q) = t.uv(sx, sy) {
                let c = sample_texture_f64(patch, q, sampling.filter);
                for k in 0..3 {
                    acc[k] += c[k];
                }
                n += 1;
            }
        }
    }
    if n == 0 {
        return sample_texture_f64(patch, uv, sampling.filter).map(round_u8);
    }
    acc.map(|a| round_u8(a / n as f64))
}

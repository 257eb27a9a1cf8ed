//! Brute-force ray-cast depth, used as an independent check of the
//! rasterizer: one ray through every pixel center, tested against every
//! triangle with the Möller–Trumbore algorithm.

use super::{gather_triangles, RenderTriangle};
use crate::grid::DepthBuffer;
use crate::math::Vec3;
use crate::scene::{Eye, Scene, StereoRig};

pub fn raycast_depth(scene: &Scene, frame: u32, eye: Eye) -> DepthBuffer {
    raycast_triangles(&gather_triangles(scene, frame, eye), &scene.rig)
}

/// Nearest hit with `Z >= z_near` per pixel center; `+inf` where none.
pub fn raycast_triangles(tris: &[RenderTriangle], rig: &StereoRig) -> DepthBuffer {
    let (w, h) = (rig.width_px as usize, rig.height_px as usize);
    let f = rig.f_px();
    let (cx, cy) = rig.principal_point();
    let mut out = DepthBuffer::filled(w, h, f64::INFINITY);
    for y in 0..h {
        for x in 0..w {
            // z component 1, so the ray parameter equals camera depth.
            let dir = Vec3::new((x as f64 + 0.5 - cx) / f, (y as f64 + 0.5 - cy) / f, 1.0);
            let best = tris
                .iter()
                .filter_map(|t| moller_trumbore(Vec3::ZERO, dir, t.p))
                .filter(|&z| z >= rig.z_near_m)
                .fold(f64::INFINITY, f64::min);
            *out.get_mut(x, y) = best;
        }
    }
    out
}

/// Ray parameter of the hit, two-sided.
pub fn moller_trumbore(origin: Vec3, dir: Vec3, [a, b, c]: [Vec3; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = dir.dot(qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(qvec) * inv)
}

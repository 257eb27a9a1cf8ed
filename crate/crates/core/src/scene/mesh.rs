use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Vertex indices and the parallel UV indices of one triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub v: [u32; 3],
    pub uv: [u32; 3],
}

/// Triangle mesh with per-corner texture coordinates. UVs use repeat
/// wrapping, so values outside `[0, 1]` tile the texture.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeshAsset {
    pub vertices: Vec<Vec3>,
    pub uvs: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
}

const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl MeshAsset {
    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        for (i, t) in self.triangles.iter().enumerate() {
            if t.v.iter().any(|&v| v as usize >= self.vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {i}: vertex index out of range")));
            }
            if t.uv.iter().any(|&u| u as usize >= self.uvs.len()) {
                return Err(Error::InvalidMesh(format!("triangle {i}: uv index out of range")));
            }
            let area = self.triangle_area(i);
            if !(area > MIN_TRIANGLE_AREA) {
                return Err(Error::InvalidMesh(format!("triangle {i}: degenerate (area {area:e})")));
            }
        }
        if self.vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex".into()));
        }
        Ok(())
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let t = &self.triangles[i];
        let [a, b, c] = t.v.map(|v| self.vertices[v as usize]);
        (b - a).cross(c - a).norm() * 0.5
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let inf = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        self.vertices
            .iter()
            .fold((inf, -inf), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Recenters on the bounding-box center and scales so the farthest vertex
    /// lies at distance 0.5, i.e. the bounding sphere has unit diameter.
    pub fn normalized(&self) -> MeshAsset {
        let (lo, hi) = self.bounds();
        let center = (lo + hi) * 0.5;
        let r = self.vertices.iter().map(|&v| (v - center).norm()).fold(0.0, f64::max);
        let s = 0.5 / r;
        MeshAsset {
            vertices: self.vertices.iter().map(|&v| (v - center) * s).collect(),
            uvs: self.uvs.clone(),
            triangles: self.triangles.clone(),
        }
    }

    /// Distance from the origin to the farthest vertex.
    pub fn radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn push_vertex(&mut self, p: Vec3) -> u32 {
        self.vertices.push(p);
        (self.vertices.len() - 1) as u32
    }

    fn push_uv(&mut self, u: f64, v: f64) -> u32 {
        self.uvs.push([u, v]);
        (self.uvs.len() - 1) as u32
    }

    fn push_tri(&mut self, v: [u32; 3], uv: [u32; 3]) {
        self.triangles.push(Triangle { v, uv });
    }

    /// Quad `a b c d` with UVs (0,0) (1,0) (1,1) (0,1).
    fn push_unit_quad(&mut self, v: [u32; 4]) {
        let uv = [
            self.push_uv(0.0, 0.0),
            self.push_uv(1.0, 0.0),
            self.push_uv(1.0, 1.0),
            self.push_uv(0.0, 1.0),
        ];
        self.push_tri([v[0], v[1], v[2]], [uv[0], uv[1], uv[2]]);
        self.push_tri([v[0], v[2], v[3]], [uv[0], uv[2], uv[3]]);
    }

    /// Disc cap around `center` over `ring`, UV-mapped into the unit square.
    fn push_cap(&mut self, center: u32, ring: &[u32], reverse: bool) {
        let n = ring.len();
        let c_uv = self.push_uv(0.5, 0.5);
        let ring_uv: Vec<u32> = (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                self.push_uv(0.5 + 0.5 * a.cos(), 0.5 + 0.5 * a.sin())
            })
            .collect();
        for i in 0..n {
            let j = (i + 1) % n;
            if reverse {
                self.push_tri([center, ring[j], ring[i]], [c_uv, ring_uv[j], ring_uv[i]]);
            } else {
                self.push_tri([center, ring[i], ring[j]], [c_uv, ring_uv[i], ring_uv[j]]);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveKind {
    Plane { width: f64, height: f64 },
    Cuboid { x: f64, y: f64, z: f64 },
    Cylinder { radius: f64, height: f64, segments: u32 },
    Cone { radius: f64, height: f64, segments: u32 },
    UvSphere { radius: f64, segments: u32, rings: u32 },
}

/// Builds a primitive centered on the origin. Every logical face (box side,
/// cap, lateral surface) is independently UV-mapped onto `[0, 1]^2`.
pub fn make_primitive(kind: PrimitiveKind) -> Result<MeshAsset> {
    let check_dims = |dims: &[f64]| {
        if dims.iter().all(|&d| d.is_finite() && d > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!(
                "primitive dimensions must be positive: {dims:?}"
            )))
        }
    };
    let check_segments = |segs: &[u32]| {
        if segs.iter().all(|&s| s >= 3) {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!("segment counts must be >= 3: {segs:?}")))
        }
    };

    let mut m = MeshAsset::default();
    match kind {
        PrimitiveKind::Plane { width, height } => {
            check_dims(&[width, height])?;
            let (hw, hh) = (width / 2.0, height / 2.0);
            let v = [
                m.push_vertex(Vec3::new(-hw, -hh, 0.0)),
                m.push_vertex(Vec3::new(hw, -hh, 0.0)),
                m.push_vertex(Vec3::new(hw, hh, 0.0)),
                m.push_vertex(Vec3::new(-hw, hh, 0.0)),
            ];
            m.push_unit_quad(v);
        }
        PrimitiveKind::Cuboid { x, y, z } => {
            check_dims(&[x, y, z])?;
            let h = Vec3::new(x / 2.0, y / 2.0, z / 2.0);
            let mut idx = [0u32; 8];
            for (i, slot) in idx.iter_mut().enumerate() {
                let sx = if i & 1 == 0 { -h.x } else { h.x };
                let sy = if i & 2 == 0 { -h.y } else { h.y };
                let sz = if i & 4 == 0 { -h.z } else { h.z };
                *slot = m.push_vertex(Vec3::new(sx, sy, sz));
            }
            let faces = [
                [0, 2, 6, 4], // -x
                [1, 5, 7, 3], // +x
                [0, 4, 5, 1], // -y
                [2, 3, 7, 6], // +y
                [0, 1, 3, 2], // -z
                [4, 6, 7, 5], // +z
            ];
            for f in faces {
                m.push_unit_quad(f.map(|i| idx[i]));
            }
        }
        PrimitiveKind::Cylinder {
            radius,
            height,
            segments,
        } => {
            check_dims(&[radius, height])?;
            check_segments(&[segments])?;
            let n = segments as usize;
            let hh = height / 2.0;
            let ring = |m: &mut MeshAsset, y: f64| -> Vec<u32> {
                (0..n)
                    .map(|i| {
                        let a = TAU * i as f64 / n as f64;
                        m.push_vertex(Vec3::new(radius * a.cos(), y, radius * a.sin()))
                    })
                    .collect()
            };
            let top = ring(&mut m, -hh);
            let bottom = ring(&mut m, hh);
            lateral_band(&mut m, &top, &bottom);
            let ct = m.push_vertex(Vec3::new(0.0, -hh, 0.0));
            let cb = m.push_vertex(Vec3::new(0.0, hh, 0.0));
            m.push_cap(ct, &top, true);
            m.push_cap(cb, &bottom, false);
        }
        PrimitiveKind::Cone {
            radius,
            height,
            segments,
        } => {
            check_dims(&[radius, height])?;
            check_segments(&[segments])?;
            let n = segments as usize;
            let hh = height / 2.0;
            let apex = m.push_vertex(Vec3::new(0.0, -hh, 0.0));
            let base: Vec<u32> = (0..n)
                .map(|i| {
                    let a = TAU * i as f64 / n as f64;
                    m.push_vertex(Vec3::new(radius * a.cos(), hh, radius * a.sin()))
                })
                .collect();
            // Lateral surface: u around, v from apex (0) to base (1).
            let base_uv: Vec<u32> = (0..=n).map(|i| m.push_uv(i as f64 / n as f64, 1.0)).collect();
            for i in 0..n {
                let j = (i + 1) % n;
                let apex_uv = m.push_uv((i as f64 + 0.5) / n as f64, 0.0);
                m.push_tri([apex, base[j], base[i]], [apex_uv, base_uv[i + 1], base_uv[i]]);
            }
            let cb = m.push_vertex(Vec3::new(0.0, hh, 0.0));
            m.push_cap(cb, &base, false);
        }
        PrimitiveKind::UvSphere {
            radius,
            segments,
            rings,
        } => {
            check_dims(&[radius])?;
            check_segments(&[segments, rings])?;
            let (n, r) = (segments as usize, rings as usize);
            let north = m.push_vertex(Vec3::new(0.0, -radius, 0.0));
            let bands: Vec<Vec<u32>> = (1..r)
                .map(|j| {
                    let theta = std::f64::consts::PI * j as f64 / r as f64;
                    let (st, ct) = theta.sin_cos();
                    (0..n)
                        .map(|i| {
                            let phi = TAU * i as f64 / n as f64;
                            m.push_vertex(Vec3::new(
                                radius * st * phi.cos(),
                                -radius * ct,
                                radius * st * phi.sin(),
                            ))
                        })
                        .collect()
                })
                .collect();
            let south = m.push_vertex(Vec3::new(0.0, radius, 0.0));
            let uv_grid: Vec<Vec<u32>> = (0..=r)
                .map(|j| {
                    (0..=n)
                        .map(|i| m.push_uv(i as f64 / n as f64, j as f64 / r as f64))
                        .collect()
                })
                .collect();
            for i in 0..n {
                let i2 = (i + 1) % n;
                m.push_tri(
                    [north, bands[0][i2], bands[0][i]],
                    [uv_grid[0][i], uv_grid[1][i + 1], uv_grid[1][i]],
                );
                let last = r - 2;
                m.push_tri(
                    [south, bands[last][i], bands[last][i2]],
                    [uv_grid[r][i], uv_grid[r - 1][i], uv_grid[r - 1][i + 1]],
                );
            }
            for j in 0..r - 2 {
                for i in 0..n {
                    let i2 = (i + 1) % n;
                    let (a, b) = (&bands[j], &bands[j + 1]);
                    let (ua, ub) = (&uv_grid[j + 1], &uv_grid[j + 2]);
                    m.push_tri([a[i], a[i2], b[i2]], [ua[i], ua[i + 1], ub[i + 1]]);
                    m.push_tri([a[i], b[i2], b[i]], [ua[i], ub[i + 1], ub[i]]);
                }
            }
        }
    }
    m.validate()?;
    Ok(m)
}

/// Quads between two equal-length rings, wrapping, with u around and v
/// across.
fn lateral_band(m: &mut MeshAsset, a: &[u32], b: &[u32]) {
    let n = a.len();
    let ua: Vec<u32> = (0..=n).map(|i| m.push_uv(i as f64 / n as f64, 0.0)).collect();
    let ub: Vec<u32> = (0..=n).map(|i| m.push_uv(i as f64 / n as f64, 1.0)).collect();
    for i in 0..n {
        let j = (i + 1) % n;
        m.push_tri([a[i], a[j], b[j]], [ua[i], ua[i + 1], ub[i + 1]]);
        m.push_tri([a[i], b[j], b[i]], [ua[i], ub[i + 1], ub[i]]);
    }
}

//! Depth-stratified particle emission and closed-form kinematics.
//!
//! The realized disparity distribution is steered through object-center
//! depth: each disparity bin maps to a depth band under `Z = f_px * B / d`,
//! and every band receives a fixed share of the particles.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};
use crate::scene::{Background, MeshAsset, ObjectInstance, StereoRig, Transform};

/// Desired disparity histogram.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisparityTarget {
    pub bin_edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl DisparityTarget {
    pub fn new(bin_edges: Vec<f64>, mass: Vec<f64>) -> Self {
        Self { bin_edges, mass }
    }

    /// Equal mass over `bins` equal-width bins spanning `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self::new(edges, vec![1.0 / bins as f64; bins])
    }

    /// Bins raw disparity samples; samples outside the edges are dropped.
    pub fn from_samples(samples: &[f64], bin_edges: Vec<f64>) -> Result<Self> {
        let n = bin_edges.len().saturating_sub(1);
        let mut counts = vec![0usize; n];
        for &s in samples {
            if let Some(b) = bin_of(&bin_edges, s) {
                counts[b] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParam(
                "no disparity samples fall inside the bin edges".into(),
            ));
        }
        let mass = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self::new(bin_edges, mass))
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn validate(&self, rig: &StereoRig) -> Result<()> {
        let e = &self.bin_edges;
        if e.len() < 2 || e.len() != self.mass.len() + 1 {
            return Err(Error::InvalidParam("target needs n+1 edges for n masses".into()));
        }
        if e.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParam("target edges must be strictly ascending".into()));
        }
        if !(e[0] >= 0.0) || e[e.len() - 1] > rig.ndisp {
            return Err(Error::InvalidParam(format!(
                "target edges must lie in [0, ndisp={}]",
                rig.ndisp
            )));
        }
        if self.mass.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidParam("target masses must be non-negative".into()));
        }
        let sum: f64 = self.mass.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!("target masses sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Bin index of `v` under `[e_i, e_{i+1})`, the last bin closed.
pub fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len().checked_sub(1)?;
    if !(v >= edges[0] && v <= edges[n]) {
        return None;
    }
    let i = edges.partition_point(|&e| e <= v);
    Some(i.saturating_sub(1).min(n - 1))
}

/// A depth interval and the number of particles planned for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBand {
    pub z_near: f64,
    pub z_far: f64,
    pub count: usize,
}

/// Largest-remainder apportionment of `total` over the target's bins, each
/// bin paired with its depth interval `[fB / edge_{i+1}, fB / edge_i]`.
pub fn plan_counts(target: &DisparityTarget, total: usize, rig: &StereoRig) -> Vec<DepthBand> {
    let quotas: Vec<f64> = target.mass.iter().map(|m| m * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // Stable sort keeps lower indices first among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    let fb = rig.disparity_scale();
    target
        .bin_edges
        .windows(2)
        .zip(counts)
        .map(|(e, count)| DepthBand {
            z_near: fb / e[1],
            z_far: fb / e[0],
            count,
        })
        .collect()
}

/// Particle source. Positions follow the depth bands; the emitter supplies
/// the motion distribution. Velocities and gravity are given for a particle
/// at 1 m depth: a particle spawned at depth `Z` is that canonical particle
/// scaled about the camera by `Z`, so its on-screen size and motion do not
/// depend on its depth band.
#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    /// `[x_min, x_max, z_min, z_max]` of the horizontal emission rectangle.
    pub region: [f64; 4],
    /// Height of the emission plane (meters, +y down).
    pub height_m: f64,
    pub v0_min: Vec3,
    pub v0_max: Vec3,
    pub omega_range: [f64; 2],
    pub gravity: Vec3,
}

impl Emitter {
    pub fn validate(&self) -> Result<()> {
        let [x0, x1, z0, z1] = self.region;
        if !((x1 - x0) * (z1 - z0) > 0.0 && x1 > x0) {
            return Err(Error::InvalidParam("emitter region must have positive area".into()));
        }
        let ok = |a: f64, b: f64| a <= b;
        if !ok(self.v0_min.x, self.v0_max.x) || !ok(self.v0_min.y, self.v0_max.y) || !ok(self.v0_min.z, self.v0_max.z) {
            return Err(Error::InvalidParam("emitter velocity box is inverted".into()));
        }
        if !(self.omega_range[0] <= self.omega_range[1]) {
            return Err(Error::InvalidParam("emitter omega range is inverted".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub p0: Vec3,
    pub v0: Vec3,
    /// Constant acceleration, copied from the emitter.
    pub gravity: Vec3,
    pub axis: Vec3,
    pub omega: f64,
    pub spawn_frame: i64,
    /// Uniform world-space scale; meshes are normalized to unit diameter so
    /// this is the bounding-sphere diameter in meters.
    pub scale: f64,
}

/// Closed-form ballistic pose at age `t` seconds. Scale is left at 1; the
/// particle scale is applied by [`crate::scene::Scene::object_transform`].
pub fn step(state: &ParticleState, t: f64) -> Transform {
    Transform {
        translation: state.p0 + state.v0 * t + state.gravity * (0.5 * t * t),
        rotation: Quat::from_axis_angle(state.axis, state.omega * t),
        scale: Vec3::ONE,
    }
}

/// Random per-axis (or uniform) scale and a uniformly distributed initial
/// orientation.
pub fn augment<R: Rng + ?Sized>(
    instance: &ObjectInstance,
    rng: &mut R,
    scale_range: [f64; 2],
    allow_anisotropic: bool,
) -> ObjectInstance {
    let [lo, hi] = scale_range;
    let scale = if allow_anisotropic {
        Vec3::new(rng.gen_range(lo..=hi), rng.gen_range(lo..=hi), rng.gen_range(lo..=hi))
    } else {
        let s = rng.gen_range(lo..=hi);
        Vec3::new(s, s, s)
    };
    let mut out = instance.clone();
    out.transform.scale = scale;
    out.transform.rotation = Quat::random_uniform(rng);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpawnParams {
    /// Projected bounding diameter as a fraction of the image width. World
    /// size grows linearly with depth so on-screen size does not depend on
    /// the band.
    pub size_frac: [f64; 2],
    /// Per-axis augmentation range applied on top of the size.
    pub aug_scale: [f64; 2],
    pub anisotropic: bool,
    /// Spawn frames are stratified over `frame_range.0..frame_range.1`
    /// within each band: one uniform draw per equal-width slot.
    pub frame_range: (i64, i64),
    /// How long a particle lives; bounds how far it can drift in depth.
    pub lifetime_s: f64,
}

impl SpawnParams {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.size_frac;
        if !(a > 0.0 && a <= b) {
            return Err(Error::InvalidParam("size_frac must satisfy 0 < min <= max".into()));
        }
        let [a, b] = self.aug_scale;
        if !(a > 0.0 && a <= b) {
            return Err(Error::InvalidParam("augmentation scale range must be positive".into()));
        }
        if self.frame_range.0 >= self.frame_range.1 {
            return Err(Error::InvalidParam("empty spawn frame range".into()));
        }
        if !(self.lifetime_s >= 0.0 && self.lifetime_s.is_finite()) {
            return Err(Error::InvalidParam("lifetime must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Admissible spawn depth interval for a band. Both the bounding radius and
/// the largest depth drift over the lifetime are proportional to the spawn
/// depth `Z`, as `k * Z` and `drift * Z`.
fn band_depth_range(band: &DepthBand, k: f64, drift: f64, rig: &StereoRig, background: &Background) -> (f64, f64) {
    let nearest_surface = (rig.z_near_m * 1.1).max(rig.depth_at(rig.ndisp) * (1.0 + 1e-9));
    let lo = band.z_near.max(nearest_surface / (1.0 - k - drift));
    let hi = match background {
        Background::RoomInterior { max, .. } => band.z_far.min(max.z * 0.999 / (1.0 + k + drift)),
        Background::FarPlane { depth_m, .. } => band.z_far.min(depth_m * 0.5 / (1.0 + k + drift)),
    };
    (lo, hi)
}

/// Emits particles band by band. Each center depth is uniform in its band
/// (after clipping to the admissible range), and the lateral position is
/// uniform over the region where the center projects inside both images,
/// further restricted to the room interior when there is one. Within a band,
/// spawn frames, sizes and meshes are stratified so every band gets a
/// similar mix.
pub fn spawn<R: Rng + ?Sized>(
    emitter: &Emitter,
    bands: &[DepthBand],
    meshes: &[Arc<MeshAsset>],
    rng: &mut R,
    rig: &StereoRig,
    background: &Background,
    params: &SpawnParams,
) -> Result<Vec<(ObjectInstance, ParticleState)>> {
    if meshes.is_empty() {
        return Err(Error::NoMeshes);
    }
    emitter.validate()?;
    params.validate()?;
    let f = rig.f_px();
    let (w, h) = (rig.width_px as f64, rig.height_px as f64);
    let b = rig.baseline_m;
    let mesh_radius = meshes.iter().map(|m| m.radius()).fold(0.0, f64::max);
    // bounding radius per meter of depth at the largest size and stretch
    let k = params.size_frac[1] * w / f * mesh_radius * params.aug_scale[1];
    if k >= 0.5 {
        return Err(Error::InvalidParam(
            "objects too large: bounding radius exceeds half the depth".into(),
        ));
    }

    let t = params.lifetime_s;
    let drift = emitter.v0_min.z.abs().max(emitter.v0_max.z.abs()) * t + 0.5 * emitter.gravity.z.abs() * t * t;
    if k + drift >= 0.5 {
        return Err(Error::InvalidParam(
            "objects too large or too fast in depth for their lifetime".into(),
        ));
    }
    let (f0, f1) = params.frame_range;

    let mut out = Vec::with_capacity(bands.iter().map(|b| b.count).sum());
    for (bi, band) in bands.iter().enumerate() {
        if band.count == 0 {
            continue;
        }
        let (zlo, zhi) = band_depth_range(band, k, drift, rig, background);
        if !(zlo <= zhi) {
            return Err(Error::InvalidParam(format!(
                "depth band {bi} [{:.3}, {:.3}] m has no admissible depth for this rig and background",
                band.z_near, band.z_far
            )));
        }
        let n = band.count;
        let slot = (f1 - f0) as f64 / n as f64;
        // independent slot orders for size and mesh so they are not correlated
        let mut size_slots: Vec<usize> = (0..n).collect();
        size_slots.shuffle(rng);
        let mut mesh_slots: Vec<usize> = (0..n).collect();
        mesh_slots.shuffle(rng);
        let mesh_offset = rng.gen_range(0..meshes.len());
        for j in 0..n {
            let mesh = (mesh_offset + mesh_slots[j]) % meshes.len();
            let base = ObjectInstance {
                mesh,
                transform: Transform::IDENTITY,
                texture: 0,
                uv_scale: 1.0,
                motion: out.len(),
            };
            let instance = augment(&base, rng, params.aug_scale, params.anisotropic);
            let [s0, s1] = params.size_frac;
            let size = s0 + (s1 - s0) * (size_slots[j] as f64 + rng.gen::<f64>()) / n as f64;
            let z = rng.gen_range(zlo..=zhi);
            let scale = size * w * z / f;
            let radius = scale * mesh_radius * instance.transform.scale.max_element();

            let (mut xlo, mut xhi) = (b - z * w / (2.0 * f), z * w / (2.0 * f));
            let (mut ylo, mut yhi) = (-z * h / (2.0 * f), z * h / (2.0 * f));
            if let Background::RoomInterior { min, max, .. } = background {
                let (rx0, rx1) = (xlo.max(min.x + radius), xhi.min(max.x - radius));
                if rx0 < rx1 {
                    (xlo, xhi) = (rx0, rx1);
                }
                let (ry0, ry1) = (ylo.max(min.y + radius), yhi.min(max.y - radius));
                if ry0 < ry1 {
                    (ylo, yhi) = (ry0, ry1);
                }
            }
            let x = rng.gen_range(xlo..xhi);
            let y = rng.gen_range(ylo..yhi);

            let v0 = Vec3::new(
                rng.gen_range(emitter.v0_min.x..=emitter.v0_max.x),
                rng.gen_range(emitter.v0_min.y..=emitter.v0_max.y),
                rng.gen_range(emitter.v0_min.z..=emitter.v0_max.z),
            );
            let axis = Vec3::random_unit(rng);
            let omega = rng.gen_range(emitter.omega_range[0]..=emitter.omega_range[1]);
            let spawn_frame = (f0 + ((j as f64 + rng.gen::<f64>()) * slot).floor() as i64).min(f1 - 1);
            let state = ParticleState {
                p0: Vec3::new(x, y, z),
                v0: v0 * z,
                gravity: emitter.gravity * z,
                axis,
                omega,
                spawn_frame,
                scale,
            };
            out.push((instance, state));
        }
    }
    Ok(out)
}

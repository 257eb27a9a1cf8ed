//! Stereo rig, geometry assets, transforms and whole-scene description.

mod mesh;
mod obj;

pub use mesh::{make_primitive, MeshAsset, PrimitiveKind, Triangle};
pub use obj::load_mesh;

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};
use crate::placement::ParticleState;

/// Rectified, fronto-parallel two-camera rig. The left camera sits at the
/// origin looking down +z with +y pointing down the image; the right camera
/// is offset by `(baseline_m, 0, 0)` with identical orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoRig {
    pub focal_mm: f64,
    pub sensor_width_mm: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub baseline_m: f64,
    pub z_near_m: f64,
    pub ndisp: f64,
}

impl StereoRig {
    pub fn new(
        focal_mm: f64,
        sensor_width_mm: f64,
        width_px: u32,
        height_px: u32,
        baseline_m: f64,
        z_near_m: f64,
        ndisp: f64,
    ) -> Result<Self> {
        let rig = Self {
            focal_mm,
            sensor_width_mm,
            width_px,
            height_px,
            baseline_m,
            z_near_m,
            ndisp,
        };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        for (name, v) in [
            ("focal_mm", self.focal_mm),
            ("sensor_width_mm", self.sensor_width_mm),
            ("baseline_m", self.baseline_m),
            ("z_near_m", self.z_near_m),
            ("ndisp", self.ndisp),
        ] {
            if !positive(v) {
                return Err(Error::InvalidRig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.width_px < 8 || self.height_px < 8 {
            return Err(Error::InvalidRig(format!(
                "resolution {}x{} below 8x8",
                self.width_px, self.height_px
            )));
        }
        if !positive(self.f_px()) {
            return Err(Error::InvalidRig("focal length in pixels is not finite".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn f_px(&self) -> f64 {
        derive_f_px(self)
    }

    /// `f_px * baseline`, the numerator of every depth/disparity conversion.
    pub fn disparity_scale(&self) -> f64 {
        self.f_px() * self.baseline_m
    }

    pub fn disparity_at(&self, depth_m: f64) -> f64 {
        self.disparity_scale() / depth_m
    }

    pub fn depth_at(&self, disparity_px: f64) -> f64 {
        self.disparity_scale() / disparity_px
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width_px as f64 / 2.0, self.height_px as f64 / 2.0)
    }

    pub fn eye_offset(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Left => 0.0,
            Eye::Right => self.baseline_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Eye {
    Left,
    Right,
}

pub fn derive_f_px(rig: &StereoRig) -> f64 {
    rig.focal_mm * rig.width_px as f64 / rig.sensor_width_mm
}

/// Baseline for which a point at `z_min` has disparity `max_disp`.
pub fn solve_baseline(max_disp: f64, z_min: f64, f_px: f64) -> f64 {
    max_disp * z_min / f_px
}

/// Scale, then rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub translation: Vec3,
    pub rotation: Quat,
    pub scale: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        translation: Vec3::ZERO,
        rotation: Quat::IDENTITY,
        scale: Vec3::ONE,
    };

    pub fn validate(&self) -> Result<()> {
        if (self.rotation.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParam(format!(
                "rotation quaternion norm {} is not 1",
                self.rotation.norm()
            )));
        }
        if !(self.scale.x > 0.0 && self.scale.y > 0.0 && self.scale.z > 0.0) {
            return Err(Error::InvalidParam("scale components must be positive".into()));
        }
        Ok(())
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        apply_transform(self, p)
    }

    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        let local = self.rotation.conjugate().rotate(p - self.translation);
        Vec3::new(local.x / self.scale.x, local.y / self.scale.y, local.z / self.scale.z)
    }
}

pub fn apply_transform(t: &Transform, p: Vec3) -> Vec3 {
    t.rotation.rotate(p.hadamard(t.scale)) + t.translation
}

/// A placed copy of a mesh. `mesh` indexes [`Scene::meshes`], `texture`
/// indexes the patch sequence and `motion` indexes [`Scene::particles`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub mesh: usize,
    /// Per-axis scale and initial orientation; translation comes from the
    /// particle trajectory.
    pub transform: Transform,
    pub texture: usize,
    pub uv_scale: f64,
    pub motion: usize,
}

/// One textured rectangle of the background. Corners are ordered so that
/// UV (0,0), (1,0), (1,1), (0,1) map to `corners[0..4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFace {
    pub corners: [Vec3; 4],
    pub texture: usize,
    /// Separate U and V tiling keep texels square on non-square faces.
    pub uv_scale: [f64; 2],
}

impl BackgroundFace {
    pub fn new(corners: [Vec3; 4]) -> Self {
        Self {
            corners,
            texture: 0,
            uv_scale: [1.0, 1.0],
        }
    }

    pub fn span_u(&self) -> f64 {
        (self.corners[1] - self.corners[0]).norm()
    }

    pub fn span_v(&self) -> f64 {
        (self.corners[3] - self.corners[0]).norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.corners[0] + self.corners[1] + self.corners[2] + self.corners[3]) * 0.25
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    /// Axis-aligned box enclosing both cameras; six inward faces in the
    /// order -x, +x, -y, +y, -z, +z.
    RoomInterior {
        min: Vec3,
        max: Vec3,
        faces: Vec<BackgroundFace>,
    },
    /// A single fronto-parallel plane far enough to have near-zero disparity.
    FarPlane { depth_m: f64, face: BackgroundFace },
}

impl Background {
    pub fn room(min: Vec3, max: Vec3) -> Self {
        let c = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let (a, b) = (min, max);
        let faces = vec![
            // -x wall, seen from inside
            BackgroundFace::new([c(a.x, a.y, b.z), c(a.x, a.y, a.z), c(a.x, b.y, a.z), c(a.x, b.y, b.z)]),
            // +x wall
            BackgroundFace::new([c(b.x, a.y, a.z), c(b.x, a.y, b.z), c(b.x, b.y, b.z), c(b.x, b.y, a.z)]),
            // -y (ceiling, +y is down)
            BackgroundFace::new([c(a.x, a.y, a.z), c(b.x, a.y, a.z), c(b.x, a.y, b.z), c(a.x, a.y, b.z)]),
            // +y (floor)
            BackgroundFace::new([c(a.x, b.y, b.z), c(b.x, b.y, b.z), c(b.x, b.y, a.z), c(a.x, b.y, a.z)]),
            // -z (behind the cameras)
            BackgroundFace::new([c(b.x, a.y, a.z), c(a.x, a.y, a.z), c(a.x, b.y, a.z), c(b.x, b.y, a.z)]),
            // +z (back wall)
            BackgroundFace::new([c(a.x, a.y, b.z), c(b.x, a.y, b.z), c(b.x, b.y, b.z), c(a.x, b.y, b.z)]),
        ];
        Background::RoomInterior { min, max, faces }
    }

    /// A plane at `depth_m` covering both eyes' frusta with a 20% margin.
    pub fn far_plane(depth_m: f64, rig: &StereoRig) -> Self {
        let f = rig.f_px();
        let hw = depth_m * rig.width_px as f64 / (2.0 * f) * 1.2 + rig.baseline_m;
        let hh = depth_m * rig.height_px as f64 / (2.0 * f) * 1.2;
        let cx = rig.baseline_m / 2.0;
        let face = BackgroundFace::new([
            Vec3::new(cx - hw, -hh, depth_m),
            Vec3::new(cx + hw, -hh, depth_m),
            Vec3::new(cx + hw, hh, depth_m),
            Vec3::new(cx - hw, hh, depth_m),
        ]);
        Background::FarPlane { depth_m, face }
    }

    pub fn faces(&self) -> &[BackgroundFace] {
        match self {
            Background::RoomInterior { faces, .. } => faces,
            Background::FarPlane { face, .. } => std::slice::from_ref(face),
        }
    }

    pub fn faces_mut(&mut self) -> &mut [BackgroundFace] {
        match self {
            Background::RoomInterior { faces, .. } => faces,
            Background::FarPlane { face, .. } => std::slice::from_mut(face),
        }
    }

    pub fn validate(&self, rig: &StereoRig) -> Result<()> {
        match self {
            Background::RoomInterior { min, max, .. } => {
                let inside =
                    |p: Vec3| p.x > min.x && p.x < max.x && p.y > min.y && p.y < max.y && p.z > min.z && p.z < max.z;
                if !inside(Vec3::ZERO) || !inside(Vec3::new(rig.baseline_m, 0.0, 0.0)) {
                    return Err(Error::InvalidParam(
                        "room interior must strictly contain both camera centers".into(),
                    ));
                }
                Ok(())
            }
            Background::FarPlane { depth_m, .. } => {
                if rig.disparity_at(*depth_m) > 0.01 {
                    return Err(Error::InvalidParam(format!(
                        "far plane at {depth_m} m has disparity {} px > 0.01 px",
                        rig.disparity_at(*depth_m)
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub rig: StereoRig,
    pub background: Background,
    pub meshes: Vec<std::sync::Arc<MeshAsset>>,
    pub objects: Vec<ObjectInstance>,
    pub particles: Vec<ParticleState>,
    pub frames: u32,
    pub fps: f64,
    /// Number of consecutive frames a particle stays alive.
    pub lifetime_frames: u32,
    pub seed: u64,
    /// Identifies the configuration the scene was built from; copied into
    /// every frame's metadata.
    pub hash: String,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.rig.validate()?;
        self.background.validate(&self.rig)?;
        for (i, o) in self.objects.iter().enumerate() {
            if o.mesh >= self.meshes.len() || o.motion >= self.particles.len() {
                return Err(Error::InvalidParam(format!("object {i} has a dangling reference")));
            }
            if !(o.uv_scale > 0.0) {
                return Err(Error::InvalidParam(format!("object {i} has non-positive uv_scale")));
            }
            o.transform.validate()?;
        }
        Ok(())
    }

    /// Whether the particle driving `object` is alive at `frame`, and its age
    /// in seconds if so.
    pub fn object_age(&self, object: &ObjectInstance, frame: u32) -> Option<f64> {
        let p = &self.particles[object.motion];
        let age = frame as i64 - p.spawn_frame;
        (age >= 0 && age < self.lifetime_frames as i64).then(|| age as f64 / self.fps)
    }

    /// Object-space to world-space transform of `object` at `frame`.
    pub fn object_transform(&self, object: &ObjectInstance, age_s: f64) -> Transform {
        let p = &self.particles[object.motion];
        let motion = crate::placement::step(p, age_s);
        Transform {
            translation: motion.translation,
            rotation: motion.rotation * object.transform.rotation,
            scale: object.transform.scale * p.scale,
        }
    }

    /// Largest depth at which an object center with bounding radius `radius`
    /// still sits fully in front of the background.
    pub fn max_center_depth(&self, radius: f64) -> f64 {
        match &self.background {
            Background::RoomInterior { max, .. } => max.z - radius,
            Background::FarPlane { depth_m, .. } => depth_m * 0.5,
        }
    }
}

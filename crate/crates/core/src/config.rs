//! Scene configuration files, bundled presets and builtin assets.
//!
//! A configuration is a TOML document with a fixed key schema; unknown keys
//! are rejected. Texture and mesh sources are either a directory path or one
//! of the `builtin:` names listed in [`TEXTURE_SOURCES`] and [`MESH_POOLS`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RgbImage;
use crate::io::{LayoutStyle, Outputs};
use crate::math::Vec3;
use crate::placement::{DisparityTarget, Emitter};
use crate::scene::{load_mesh, make_primitive, solve_baseline, Background, MeshAsset, PrimitiveKind, StereoRig};
use crate::texture::{Filter, PatchSpec, Sampling, SourceImage};

pub const PRESETS: &[(&str, &str)] = &[
    ("middlebury-like", include_str!("../presets/middlebury-like.toml")),
    ("kitti-like", include_str!("../presets/kitti-like.toml")),
    ("eth3d-like", include_str!("../presets/eth3d-like.toml")),
    ("simple-geometry", include_str!("../presets/simple-geometry.toml")),
    ("complex-geometry", include_str!("../presets/complex-geometry.toml")),
    ("photo-textures", include_str!("../presets/photo-textures.toml")),
];

pub const BUILTIN_MESHES: &[(&str, &str)] = &[
    ("arch", include_str!("../assets/meshes/arch.obj")),
    ("chair", include_str!("../assets/meshes/chair.obj")),
    ("lamp", include_str!("../assets/meshes/lamp.obj")),
    ("stairs", include_str!("../assets/meshes/stairs.obj")),
    ("table", include_str!("../assets/meshes/table.obj")),
    ("torus", include_str!("../assets/meshes/torus.obj")),
    ("vase", include_str!("../assets/meshes/vase.obj")),
];

pub const BUILTIN_PHOTOS: &[(&str, &[u8])] = &[
    ("astronaut", include_bytes!("../assets/photos/astronaut.png")),
    ("chelsea", include_bytes!("../assets/photos/chelsea.png")),
    ("coffee", include_bytes!("../assets/photos/coffee.png")),
    ("coins", include_bytes!("../assets/photos/coins.png")),
    ("hubble", include_bytes!("../assets/photos/hubble.png")),
    ("rocket", include_bytes!("../assets/photos/rocket.png")),
];

/// `builtin:photos` are the bundled photographs; `builtin:procedural` are
/// generated noise and pattern images.
pub const TEXTURE_SOURCES: &[&str] = &["builtin:photos", "builtin:procedural"];
/// `builtin:complex` are the bundled OBJ models; `builtin:primitives` are
/// cuboids, cylinders, cones and spheres.
pub const MESH_POOLS: &[&str] = &["builtin:complex", "builtin:primitives"];

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown preset '{name}' (available: {})", names.join(", ")))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigConfig {
    pub focal_mm: f64,
    pub sensor_width_mm: f64,
    pub width_px: u32,
    pub height_px: u32,
    /// Either the baseline or the closest depth that must reach `ndisp`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_depth_m: Option<f64>,
    #[serde(default = "default_z_near")]
    pub z_near_m: f64,
    pub ndisp: f64,
}

fn default_z_near() -> f64 {
    0.1
}

impl RigConfig {
    pub fn build(&self) -> Result<StereoRig> {
        let mut rig = StereoRig {
            focal_mm: self.focal_mm,
            sensor_width_mm: self.sensor_width_mm,
            width_px: self.width_px,
            height_px: self.height_px,
            baseline_m: 1.0,
            z_near_m: self.z_near_m,
            ndisp: self.ndisp,
        };
        rig.baseline_m = match (self.baseline_m, self.min_depth_m) {
            (Some(b), None) => b,
            (None, Some(z)) => {
                if !(z > 0.0) {
                    return Err(Error::Config("rig.min_depth_m must be positive".into()));
                }
                solve_baseline(self.ndisp, z, rig.f_px())
            }
            _ => {
                return Err(Error::Config(
                    "rig needs exactly one of baseline_m and min_depth_m".into(),
                ))
            }
        };
        rig.validate()?;
        Ok(rig)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundConfig {
    Room {
        min: [f64; 3],
        max: [f64; 3],
    },
    FarPlane {
        /// Defaults to the depth where disparity is 1e-4 px.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth_m: Option<f64>,
    },
}

impl BackgroundConfig {
    pub fn build(&self, rig: &StereoRig) -> Result<Background> {
        let bg = match self {
            BackgroundConfig::Room { min, max } => {
                Background::room(Vec3::new(min[0], min[1], min[2]), Vec3::new(max[0], max[1], max[2]))
            }
            BackgroundConfig::FarPlane { depth_m } => Background::far_plane(depth_m.unwrap_or(rig.depth_at(1e-4)), rig),
        };
        bg.validate(rig)?;
        Ok(bg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub region: [f64; 4],
    pub height_m: f64,
    pub v0_min: [f64; 3],
    pub v0_max: [f64; 3],
    pub omega_range: [f64; 2],
    pub gravity: [f64; 3],
    pub lifetime_frames: u32,
}

impl EmitterConfig {
    pub fn build(&self) -> Result<Emitter> {
        let v = |a: [f64; 3]| Vec3::new(a[0], a[1], a[2]);
        let e = Emitter {
            region: self.region,
            height_m: self.height_m,
            v0_min: v(self.v0_min),
            v0_max: v(self.v0_max),
            omega_range: self.omega_range,
            gravity: v(self.gravity),
        };
        e.validate()?;
        if self.lifetime_frames == 0 {
            return Err(Error::Config("emitter.lifetime_frames must be >= 1".into()));
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureConfig {
    /// Directory of photographs, or a `builtin:` source.
    pub dir: String,
    pub count: usize,
    pub side_frac: [f64; 2],
    pub out_side_px: usize,
    /// Target on-screen size of one texel, in pixels.
    #[serde(default = "default_texel_px")]
    pub texel_px: f64,
    #[serde(default)]
    pub filter: Filter,
    /// Per-axis cap on color sub-samples where a pixel covers several texels.
    #[serde(default = "default_max_samples")]
    pub max_samples: u32,
}

fn default_texel_px() -> f64 {
    1.0
}

fn default_max_samples() -> u32 {
    4
}

impl TextureConfig {
    pub fn sampling(&self) -> Sampling {
        Sampling {
            filter: self.filter,
            max_samples: self.max_samples,
        }
    }

    pub fn patch_spec(&self) -> PatchSpec {
        PatchSpec {
            count: self.count,
            side_frac_min: self.side_frac[0],
            side_frac_max: self.side_frac[1],
            out_side_px: self.out_side_px,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectsConfig {
    /// Directory of `.obj` files, or a `builtin:` pool.
    pub pool: String,
    /// Average number of objects alive in a frame.
    pub per_frame: usize,
    pub size_frac: [f64; 2],
    pub aug_scale: [f64; 2],
    #[serde(default)]
    pub anisotropic: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub layout: LayoutStyle,
    #[serde(default)]
    pub files: Outputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub frames: u32,
    pub seed: u64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub rig: RigConfig,
    pub background: BackgroundConfig,
    pub emitter: EmitterConfig,
    pub target: TargetConfig,
    pub textures: TextureConfig,
    pub objects: ObjectsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_fps() -> f64 {
    24.0
}

impl Config {
    /// Parses a configuration. Relative texture and mesh directories are
    /// resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base_dir {
            for s in [&mut cfg.textures.dir, &mut cfg.objects.pool] {
                if !s.starts_with("builtin:") && Path::new(s.as_str()).is_relative() {
                    *s = base.join(&*s).to_string_lossy().into_owned();
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::from_toml(preset_text(name)?, None)
    }

    /// Canonical text of the resolved configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.frames == 0 {
            return bad("frames must be >= 1");
        }
        if self.seed > i64::MAX as u64 {
            return bad("seed must be below 2^63");
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad("fps must be positive");
        }
        if !(1.0..=4.0).contains(&self.textures.texel_px) {
            return bad("textures.texel_px must lie in [1, 4]");
        }
        if !(1..=16).contains(&self.textures.max_samples) {
            return bad("textures.max_samples must lie in [1, 16]");
        }
        if self.objects.per_frame == 0 {
            return bad("objects.per_frame must be >= 1");
        }
        let rig = self.rig.build()?;
        self.background.build(&rig)?;
        self.emitter.build()?;
        self.target().validate(&rig)?;
        self.textures.patch_spec().validate()?;
        Ok(())
    }

    pub fn target(&self) -> DisparityTarget {
        DisparityTarget::new(self.target.edges.clone(), self.target.mass.clone())
    }

    /// Total particle count so that `per_frame` are alive on average.
    pub fn particle_count(&self) -> usize {
        let l = self.emitter.lifetime_frames as f64;
        let span = self.frames as f64 + l - 1.0;
        (self.objects.per_frame as f64 * span / l).ceil() as usize
    }
}

/// Loads the source photographs named by `source`.
pub fn load_texture_source(source: &str) -> Result<Vec<SourceImage>> {
    match source {
        "builtin:photos" => BUILTIN_PHOTOS
            .iter()
            .map(|(name, bytes)| SourceImage::new(decode_rgb(bytes)?, format!("builtin:{name}")))
            .collect(),
        "builtin:procedural" => (0..8)
            .map(|i| SourceImage::new(procedural_image(i, 256), format!("procedural:{i}")))
            .collect(),
        s if s.starts_with("builtin:") => Err(Error::Config(format!(
            "unknown texture source '{s}' (available: {})",
            TEXTURE_SOURCES.join(", ")
        ))),
        dir => {
            let paths = list_dir(Path::new(dir), &["png", "jpg", "jpeg", "ppm", "pnm"], "texture")?;
            let images = paths
                .iter()
                .map(|p| {
                    let bytes = std::fs::read(p)?;
                    SourceImage::new(decode_rgb(&bytes)?, p.to_string_lossy())
                })
                .collect::<Result<Vec<_>>>()?;
            if images.is_empty() {
                return Err(Error::NoTextures);
            }
            Ok(images)
        }
    }
}

/// Loads and normalizes the meshes named by `pool`.
pub fn load_mesh_pool(pool: &str) -> Result<Vec<Arc<MeshAsset>>> {
    let meshes: Vec<MeshAsset> = match pool {
        "builtin:complex" => BUILTIN_MESHES
            .iter()
            .map(|(_, text)| load_mesh(text))
            .collect::<Result<_>>()?,
        "builtin:primitives" => [
            PrimitiveKind::Cuboid { x: 1.0, y: 0.7, z: 0.5 },
            PrimitiveKind::Cylinder {
                radius: 0.35,
                height: 1.0,
                segments: 24,
            },
            PrimitiveKind::Cone {
                radius: 0.5,
                height: 1.0,
                segments: 24,
            },
            PrimitiveKind::UvSphere {
                radius: 0.5,
                segments: 24,
                rings: 12,
            },
        ]
        .into_iter()
        .map(make_primitive)
        .collect::<Result<_>>()?,
        s if s.starts_with("builtin:") => {
            return Err(Error::Config(format!(
                "unknown mesh pool '{s}' (available: {})",
                MESH_POOLS.join(", ")
            )))
        }
        dir => list_dir(Path::new(dir), &["obj"], "mesh")?
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p)?;
                load_mesh(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            })
            .collect::<Result<_>>()?,
    };
    if meshes.is_empty() {
        return Err(Error::NoMeshes);
    }
    Ok(meshes.into_iter().map(|m| Arc::new(m.normalized())).collect())
}

fn list_dir(dir: &Path, extensions: &[&str], what: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "{what} directory {} does not exist",
            dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| extensions.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn decode_rgb(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory(bytes)?.to_rgb8();
    let (w, h) = img.dimensions();
    Ok(RgbImage::from_vec(
        w as usize,
        h as usize,
        img.pixels().map(|p| p.0).collect(),
    ))
}

/// Tileable multi-octave value noise, colored from a random palette. Odd
/// indices add a warped stripe pattern on top.
pub fn procedural_image(index: u32, side: usize) -> RgbImage {
    let mut rng = crate::rng::stream(index as u64, "procedural-texture");
    let octaves: Vec<(usize, Vec<f64>)> = [4usize, 8, 16, 32, 64]
        .iter()
        .map(|&n| (n, (0..n * n * 3).map(|_| rng.gen::<f64>()).collect()))
        .collect();
    let palette: Vec<[f64; 3]> = (0..3).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let stripes = index % 2 == 1;
    let freq = rng.gen_range(6.0..14.0);

    let sample = |lattice: &[f64], n: usize, u: f64, v: f64, c: usize| {
        let (x, y) = (u * n as f64, v * n as f64);
        let (x0, y0) = (x.floor() as usize % n, y.floor() as usize % n);
        let (x1, y1) = ((x0 + 1) % n, (y0 + 1) % n);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (fx, fy) = (s(x.fract()), s(y.fract()));
        let at = |i: usize, j: usize| lattice[(j * n + i) * 3 + c];
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    };

    let mut img = RgbImage::filled(side, side, [0, 0, 0]);
    for y in 0..side {
        for x in 0..side {
            let (u, v) = ((x as f64 + 0.5) / side as f64, (y as f64 + 0.5) / side as f64);
            let mut n = [0.0; 3];
            let mut amp_sum = 0.0;
            for (k, (size, lattice)) in octaves.iter().enumerate() {
                let amp = 0.6f64.powi(k as i32);
                amp_sum += amp;
                for (c, n) in n.iter_mut().enumerate() {
                    *n += amp * sample(lattice, *size, u, v, c);
                }
            }
            let n = n.map(|t| t / amp_sum);
            let mut w = [n[0], n[1], n[2]];
            if stripes {
                let phase = (u + 0.3 * n[1]) * freq * std::f64::consts::TAU;
                w[0] = 0.5 + 0.5 * phase.sin();
            }
            let total = w[0] + w[1] + w[2];
            let px: [u8; 3] = std::array::from_fn(|c| {
                let mixed = (0..3).map(|k| w[k] * palette[k][c]).sum::<f64>() / total;
                crate::texture::round_u8(255.0 * (0.15 + 0.85 * mixed) * (0.6 + 0.8 * n[2]))
            });
            *img.get_mut(x, y) = px;
        }
    }
    img
}

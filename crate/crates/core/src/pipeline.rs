//! End-to-end generation: configuration to scene, per-frame rendering,
//! parallel dataset writing, and dataset-level statistics and evaluation.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{load_mesh_pool, load_texture_source, Config};
use crate::error::{Error, Result};
use crate::grid::{DisparityMap, Mask};
use crate::io::{
    read_kitti_disp, read_manifest, read_mask_png, read_pfm, write_frame, write_manifest, write_rgb_png, DatasetLayout,
    FrameRecord, Manifest, OutputKind, MANIFEST_FILE, TIMING_FILE,
};
use crate::metrics::{histogram_l1, Histogram, HistogramAccumulator, MetricsAccumulator, MetricsReport, DEFAULT_TAUS};
use crate::placement::{plan_counts, spawn, SpawnParams};
use crate::render::{render_pair, FrameSample, RenderOptions};
use crate::rng::{frame_seed, stream};
use crate::scene::{ObjectInstance, Scene};
use crate::texture::{assign_textures, background_uv_scale, compute_uv_scale, extract_patches, PatchSequence};

/// A fully built scene plus its patch sequence. Frames can be rendered in
/// any order and on any thread; each depends only on the configuration and
/// its own index.
pub struct Generator {
    config: Config,
    config_hash: String,
    scene: Scene,
    patches: PatchSequence,
    opts: RenderOptions,
}

impl Generator {
    pub fn new(config: Config, config_hash: impl Into<String>) -> Result<Self> {
        config.validate()?;
        let config_hash = config_hash.into();
        let rig = config.rig.build()?;
        let mut background = config.background.build(&rig)?;
        let emitter = config.emitter.build()?;
        let meshes = load_mesh_pool(&config.objects.pool)?;
        let images = load_texture_source(&config.textures.dir)?;
        let patches = extract_patches(
            &images,
            &config.textures.patch_spec(),
            &mut stream(config.seed, "patches"),
        )?;

        let texel = config.textures.texel_px;
        let side = patches.side;
        let bands = plan_counts(&config.target(), config.particle_count(), &rig);
        let lifetime = config.emitter.lifetime_frames;
        let params = SpawnParams {
            size_frac: config.objects.size_frac,
            aug_scale: config.objects.aug_scale,
            anisotropic: config.objects.anisotropic,
            frame_range: (1 - lifetime as i64, config.frames as i64),
            lifetime_s: (lifetime - 1) as f64 / config.fps,
        };
        let spawned = spawn(
            &emitter,
            &bands,
            &meshes,
            &mut stream(config.seed, "spawn"),
            &rig,
            &background,
            &params,
        )?;

        let mut objects = Vec::with_capacity(spawned.len());
        let mut particles = Vec::with_capacity(spawned.len());
        for (instance, state) in spawned {
            let (lo, hi) = meshes[instance.mesh].bounds();
            let extent = (hi - lo).hadamard(instance.transform.scale) * state.scale;
            objects.push(ObjectInstance {
                uv_scale: compute_uv_scale(extent, side, state.p0.z, &rig, texel),
                ..instance
            });
            particles.push(state);
        }
        for face in background.faces_mut() {
            face.uv_scale = background_uv_scale(face, side, &rig, texel);
        }

        let scene = Scene {
            rig,
            background,
            meshes,
            objects,
            particles,
            frames: config.frames,
            fps: config.fps,
            lifetime_frames: lifetime,
            seed: config.seed,
            hash: config_hash.clone(),
        };
        scene.validate()?;
        let opts = RenderOptions {
            sampling: config.textures.sampling(),
            right_disparity: config.output.files.disp_right_pfm,
        };
        Ok(Self {
            config,
            config_hash,
            scene,
            patches,
            opts,
        })
    }

    /// Rebuilds the generator that produced a dataset.
    pub fn from_manifest(manifest: &Manifest) -> Result<Self> {
        let config = Config::from_toml(&manifest.config, None)?;
        Self::new(config, manifest.config_hash.clone())
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn patches(&self) -> &PatchSequence {
        &self.patches
    }

    pub fn layout(&self, root: impl Into<PathBuf>) -> DatasetLayout {
        DatasetLayout::new(root, self.config.output.layout, self.config.output.files)
    }

    /// The scene with this frame's texture assignment.
    pub fn frame_scene(&self, frame: u32) -> Result<Scene> {
        let mut rng = stream(frame_seed(self.config.seed, frame), "textures");
        assign_textures(&self.scene, &self.patches, &mut rng)
    }

    pub fn render_frame(&self, frame: u32) -> Result<FrameSample> {
        let scene = self.frame_scene(frame)?;
        let sample = render_pair(&scene, &self.patches, frame, &self.opts)?;
        sample.check_invariants(&scene.rig)?;
        Ok(sample)
    }

    /// Renders and writes every frame with `workers` threads, then the
    /// manifest. Output bytes do not depend on `workers`.
    pub fn generate(&self, root: &Path, workers: usize) -> Result<GenerateSummary> {
        check_output_root(root, self)?;
        let layout = self.layout(root);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
        let start = Instant::now();
        let results: Vec<(FrameRecord, f64)> = pool.install(|| {
            (0..self.config.frames)
                .into_par_iter()
                .map(|k| {
                    let t0 = Instant::now();
                    let sample = self.render_frame(k)?;
                    let record = write_frame(&layout, &sample, &self.scene.rig)?;
                    Ok((record, t0.elapsed().as_secs_f64()))
                })
                .collect::<Result<_>>()
        })?;
        let elapsed = start.elapsed().as_secs_f64();

        let timing = Timing {
            workers,
            total_seconds: elapsed,
            frame_seconds: results.iter().map(|(_, t)| *t).collect(),
        };
        crate::io::write_atomic(
            &root.join(TIMING_FILE),
            serde_json::to_string_pretty(&timing)?.as_bytes(),
        )?;
        let manifest = Manifest {
            generator: format!("semistereo {}", env!("CARGO_PKG_VERSION")),
            master_seed: self.config.seed,
            config_hash: self.config_hash.clone(),
            config: self.config.to_toml()?,
            frames: self.config.frames,
            ndisp: self.scene.rig.ndisp,
            layout: self.config.output.layout,
            outputs: self.config.output.files,
            kitti_zero_clamped: self.config.output.files.disp_kitti_png16,
            records: results.into_iter().map(|(r, _)| r).collect(),
        };
        write_manifest(root, &manifest)?;
        Ok(GenerateSummary {
            frames: self.config.frames,
            seconds: elapsed,
            frames_per_second: self.config.frames as f64 / elapsed.max(1e-9),
        })
    }

    /// Writes the left image, colormapped disparity and an anaglyph of one
    /// frame into `out_dir`.
    pub fn preview(&self, frame: u32, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let sample = self.render_frame(frame)?;
        std::fs::create_dir_all(out_dir)?;
        let id = format!("{frame:06}");
        let files = [
            (format!("{id}_left.png"), sample.left_rgb.clone()),
            (
                format!("{id}_disparity.png"),
                crate::viz::colorize_disparity(&sample.disp_left, self.scene.rig.ndisp),
            ),
            (
                format!("{id}_anaglyph.png"),
                crate::viz::anaglyph(&sample.left_rgb, &sample.right_rgb),
            ),
        ];
        let mut paths = Vec::new();
        for (name, img) in files {
            let p = out_dir.join(name);
            write_rgb_png(&img, &p)?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// An existing non-empty root is accepted only if its manifest records the
/// same configuration and seed, in which case rewriting is idempotent.
fn check_output_root(root: &Path, gen: &Generator) -> Result<()> {
    let non_empty = match std::fs::read_dir(root) {
        Ok(mut it) => it.next().is_some(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => false,
        Err(e) => return Err(e.into()),
    };
    if !non_empty {
        return Ok(());
    }
    match read_manifest(root) {
        Ok(m) if m.config_hash == gen.config_hash && m.master_seed == gen.config.seed => Ok(()),
        _ => Err(Error::OutputNotEmpty(root.to_path_buf())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub frames: u32,
    pub seconds: f64,
    pub frames_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub workers: usize,
    pub total_seconds: f64,
    pub frame_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub frames: usize,
    pub mean_seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub frames: usize,
    pub ndisp: f64,
    pub max_disparity: f64,
    pub target: Histogram,
    pub foreground: Histogram,
    pub full_frame: Histogram,
    pub l1_foreground: f64,
    pub l1_full_frame: f64,
    pub occluded_fraction: f64,
    pub timing: Option<TimingSummary>,
}

impl StatsReport {
    pub fn to_text(&self) -> String {
        let fmt = |h: &Histogram| {
            let bins: Vec<String> = h.mass.iter().map(|m| format!("{m:.4}")).collect();
            format!("[{}] overflow {:.4}", bins.join(", "), h.overflow)
        };
        let mut s = format!(
            "frames             {}\nndisp              {}\nmax disparity      {:.3}\nbin edges          {:?}\n\
             target             {}\nforeground         {}\nfull frame         {}\n\
             L1 foreground      {:.4}\nL1 full frame      {:.4}\noccluded fraction  {:.4}\n",
            self.frames,
            self.ndisp,
            self.max_disparity,
            self.target.edges,
            fmt(&self.target),
            fmt(&self.foreground),
            fmt(&self.full_frame),
            self.l1_foreground,
            self.l1_full_frame,
            self.occluded_fraction,
        );
        if let Some(t) = &self.timing {
            s.push_str(&format!(
                "seconds per frame  mean {:.3}  min {:.3}  max {:.3}\n",
                t.mean_seconds, t.min_seconds, t.max_seconds
            ));
        }
        s
    }
}

fn read_disparity(layout: &DatasetLayout, frame: u32) -> Result<DisparityMap> {
    if layout.outputs.disp_pfm {
        read_pfm(&layout.path(frame, OutputKind::DispPfm))
    } else {
        read_kitti_disp(&layout.path(frame, OutputKind::DispKittiPng16))
    }
}

/// Aggregates disparity histograms and occlusion over a generated dataset.
pub fn dataset_stats(root: &Path) -> Result<StatsReport> {
    let manifest = read_manifest(root)?;
    let config = Config::from_toml(&manifest.config, None)?;
    let layout = manifest.layout(root);
    let target = config.target();
    let mut fg = HistogramAccumulator::new(&target.bin_edges)?;
    let mut full = HistogramAccumulator::new(&target.bin_edges)?;
    let (mut occluded, mut total) = (0u64, 0u64);
    let mut max_disparity = 0.0f64;
    for rec in &manifest.records {
        let disp = read_disparity(&layout, rec.frame)?;
        max_disparity = disp.data.iter().fold(max_disparity, |m, &d| m.max(d as f64));
        full.add(&disp, None)?;
        if layout.outputs.foreground_png {
            let mask = read_mask_png(&layout.path(rec.frame, OutputKind::ForegroundPng))?;
            fg.add(&disp, Some(&mask))?;
        }
        if layout.outputs.occlusion_png {
            let occ = read_mask_png(&layout.path(rec.frame, OutputKind::OcclusionPng))?;
            occluded += occ.data.iter().filter(|&&m| m != 0).count() as u64;
            total += occ.data.len() as u64;
        }
    }
    let timing = std::fs::read(root.join(TIMING_FILE))
        .ok()
        .and_then(|b| serde_json::from_slice::<Timing>(&b).ok())
        .filter(|t| !t.frame_seconds.is_empty())
        .map(|t| {
            let n = t.frame_seconds.len();
            TimingSummary {
                frames: n,
                mean_seconds: t.frame_seconds.iter().sum::<f64>() / n as f64,
                min_seconds: t.frame_seconds.iter().copied().fold(f64::INFINITY, f64::min),
                max_seconds: t.frame_seconds.iter().copied().fold(0.0, f64::max),
            }
        });
    let target_h = Histogram::from(&target);
    let (foreground, full_frame) = (fg.finish(), full.finish());
    Ok(StatsReport {
        frames: manifest.records.len(),
        ndisp: manifest.ndisp,
        max_disparity,
        l1_foreground: histogram_l1(&foreground, &target_h)?,
        l1_full_frame: histogram_l1(&full_frame, &target_h)?,
        target: target_h,
        foreground,
        full_frame,
        occluded_fraction: if total == 0 {
            0.0
        } else {
            occluded as f64 / total as f64
        },
        timing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Every pixel.
    #[default]
    All,
    /// Pixels not marked in the occlusion mask.
    Noc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub regime: Regime,
    pub frames: Vec<(u32, MetricsReport)>,
    pub aggregate: MetricsReport,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, MetricsReport)> = self
            .frames
            .iter()
            .map(|(f, r)| (format!("{f:06}"), r.clone()))
            .collect();
        rows.push(("all".into(), self.aggregate.clone()));
        crate::metrics::format_table(&rows)
    }
}

/// Locates a predicted disparity for `frame` as `<pred>/<frame>/disp0.pfm`
/// or `<pred>/<frame>.pfm`.
pub fn prediction_path(pred_dir: &Path, frame: u32) -> Option<PathBuf> {
    let id = format!("{frame:06}");
    [pred_dir.join(&id).join("disp0.pfm"), pred_dir.join(format!("{id}.pfm"))]
        .into_iter()
        .find(|p| p.is_file())
}

/// Scores predictions against every frame of the dataset at `gt_root`.
pub fn evaluate_dataset(pred_dir: &Path, gt_root: &Path, regime: Regime) -> Result<EvalReport> {
    let manifest = read_manifest(gt_root)?;
    let layout = manifest.layout(gt_root);
    let mut total = MetricsAccumulator::new(&DEFAULT_TAUS);
    let mut frames = Vec::new();
    for rec in &manifest.records {
        let gt = read_disparity(&layout, rec.frame)?;
        let path = prediction_path(pred_dir, rec.frame)
            .ok_or_else(|| Error::MissingOutput(pred_dir.join(format!("{:06}", rec.frame))))?;
        let pred = read_pfm(&path)?;
        let mask: Option<Mask> = match regime {
            Regime::All => None,
            Regime::Noc => {
                Some(read_mask_png(&layout.path(rec.frame, OutputKind::OcclusionPng))?.map(|&o| (o == 0) as u8))
            }
        };
        let mut acc = MetricsAccumulator::new(&DEFAULT_TAUS);
        acc.add(&pred, &gt, mask.as_ref()).map_err(|e| match e {
            Error::ShapeMismatch(m) => Error::ShapeMismatch(format!("frame {:06}: {m}", rec.frame)),
            e => e,
        })?;
        total.merge(&acc);
        frames.push((rec.frame, acc.finish()?));
    }
    Ok(EvalReport {
        regime,
        frames,
        aggregate: total.finish()?,
    })
}

/// Whether `root` holds a dataset manifest.
pub fn has_manifest(root: &Path) -> bool {
    root.join(MANIFEST_FILE).is_file()
}

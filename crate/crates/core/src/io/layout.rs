//! Directory layouts, per-frame writes and the dataset manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::render::{FrameMeta, FrameSample};
use crate::scene::StereoRig;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Wall-clock timings; the only output that varies between runs.
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutStyle {
    /// `<root>/<frame>/im0.png, im1.png, disp0.pfm, calib.txt, ...`
    #[default]
    Middlebury,
    /// `<root>/image_2/<frame>_10.png, image_3/..., disp_occ_0/...`
    Kitti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    LeftPng,
    RightPng,
    DispPfm,
    DispKittiPng16,
    OcclusionPng,
    ForegroundPng,
    DispRightPfm,
    CalibTxt,
}

impl OutputKind {
    pub const ALL: [OutputKind; 8] = [
        OutputKind::LeftPng,
        OutputKind::RightPng,
        OutputKind::DispPfm,
        OutputKind::DispKittiPng16,
        OutputKind::OcclusionPng,
        OutputKind::ForegroundPng,
        OutputKind::DispRightPfm,
        OutputKind::CalibTxt,
    ];

    pub fn key(self) -> &'static str {
        match self {
            OutputKind::LeftPng => "left_png",
            OutputKind::RightPng => "right_png",
            OutputKind::DispPfm => "disp_pfm",
            OutputKind::DispKittiPng16 => "disp_kitti_png16",
            OutputKind::OcclusionPng => "occlusion_png",
            OutputKind::ForegroundPng => "foreground_png",
            OutputKind::DispRightPfm => "disp_right_pfm",
            OutputKind::CalibTxt => "calib_txt",
        }
    }
}

/// Which files each frame produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub left_png: bool,
    pub right_png: bool,
    pub disp_pfm: bool,
    pub disp_kitti_png16: bool,
    pub occlusion_png: bool,
    pub foreground_png: bool,
    pub disp_right_pfm: bool,
    pub calib_txt: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            left_png: true,
            right_png: true,
            disp_pfm: true,
            disp_kitti_png16: false,
            occlusion_png: true,
            foreground_png: true,
            disp_right_pfm: false,
            calib_txt: true,
        }
    }
}

impl Outputs {
    pub fn enabled(&self, kind: OutputKind) -> bool {
        match kind {
            OutputKind::LeftPng => self.left_png,
            OutputKind::RightPng => self.right_png,
            OutputKind::DispPfm => self.disp_pfm,
            OutputKind::DispKittiPng16 => self.disp_kitti_png16,
            OutputKind::OcclusionPng => self.occlusion_png,
            OutputKind::ForegroundPng => self.foreground_png,
            OutputKind::DispRightPfm => self.disp_right_pfm,
            OutputKind::CalibTxt => self.calib_txt,
        }
    }

    pub fn kinds(&self) -> impl Iterator<Item = OutputKind> + '_ {
        OutputKind::ALL.into_iter().filter(|&k| self.enabled(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub style: LayoutStyle,
    pub outputs: Outputs,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>, style: LayoutStyle, outputs: Outputs) -> Self {
        Self {
            root: root.into(),
            style,
            outputs,
        }
    }

    /// Path of `kind` for `frame`, relative to the root.
    pub fn relative_path(&self, frame: u32, kind: OutputKind) -> PathBuf {
        let id = format!("{frame:06}");
        match self.style {
            LayoutStyle::Middlebury => {
                let name = match kind {
                    OutputKind::LeftPng => "im0.png",
                    OutputKind::RightPng => "im1.png",
                    OutputKind::DispPfm => "disp0.pfm",
                    OutputKind::DispKittiPng16 => "disp0.png",
                    OutputKind::OcclusionPng => "occ0.png",
                    OutputKind::ForegroundPng => "fg0.png",
                    OutputKind::DispRightPfm => "disp1.pfm",
                    OutputKind::CalibTxt => "calib.txt",
                };
                Path::new(&id).join(name)
            }
            LayoutStyle::Kitti => {
                let (dir, ext) = match kind {
                    OutputKind::LeftPng => ("image_2", "png"),
                    OutputKind::RightPng => ("image_3", "png"),
                    OutputKind::DispPfm => ("disp_pfm_0", "pfm"),
                    OutputKind::DispKittiPng16 => ("disp_occ_0", "png"),
                    OutputKind::OcclusionPng => ("occ_0", "png"),
                    OutputKind::ForegroundPng => ("fg_0", "png"),
                    OutputKind::DispRightPfm => ("disp_pfm_1", "pfm"),
                    OutputKind::CalibTxt => ("calib", "txt"),
                };
                Path::new(dir).join(format!("{id}_10.{ext}"))
            }
        }
    }

    pub fn path(&self, frame: u32, kind: OutputKind) -> PathBuf {
        self.root.join(self.relative_path(frame, kind))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u32,
    pub seed: u64,
    pub scene_hash: String,
    /// Output key to path relative to the dataset root, `/`-separated.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub master_seed: u64,
    pub config_hash: String,
    /// Fully resolved configuration; regenerating from it reproduces the data.
    pub config: String,
    pub frames: u32,
    pub ndisp: f64,
    pub layout: LayoutStyle,
    pub outputs: Outputs,
    /// True when 16-bit disparities store exact zeros as 1/256 px.
    pub kitti_zero_clamped: bool,
    pub records: Vec<FrameRecord>,
}

impl Manifest {
    pub fn layout(&self, root: impl Into<PathBuf>) -> DatasetLayout {
        DatasetLayout::new(root, self.layout, self.outputs)
    }

    pub fn record(&self, frame: u32) -> Option<&FrameRecord> {
        self.records.iter().find(|r| r.frame == frame)
    }
}

/// SHA-256 over the raw configuration bytes followed by each override.
pub fn config_hash(config_bytes: &[u8], overrides: &[(&str, String)]) -> String {
    let mut h = Sha256::new();
    h.update((config_bytes.len() as u64).to_le_bytes());
    h.update(config_bytes);
    for (k, v) in overrides {
        h.update([0u8]);
        h.update(k.as_bytes());
        h.update([b'=']);
        h.update(v.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Writes every enabled output of one frame.
pub fn write_frame(layout: &DatasetLayout, sample: &FrameSample, rig: &StereoRig) -> Result<FrameRecord> {
    let frame = sample.meta.frame;
    let mut files = BTreeMap::new();
    for kind in layout.outputs.kinds() {
        let path = layout.path(frame, kind);
        match kind {
            OutputKind::LeftPng => super::write_rgb_png(&sample.left_rgb, &path)?,
            OutputKind::RightPng => super::write_rgb_png(&sample.right_rgb, &path)?,
            OutputKind::DispPfm => super::write_pfm(&sample.disp_left, &path)?,
            OutputKind::DispKittiPng16 => super::write_kitti_disp(&sample.disp_left, &path)?,
            OutputKind::OcclusionPng => super::write_mask_png(&sample.occlusion, &path)?,
            OutputKind::ForegroundPng => super::write_mask_png(&sample.foreground, &path)?,
            OutputKind::DispRightPfm => match &sample.disp_right {
                Some(d) => super::write_pfm(d, &path)?,
                None => continue,
            },
            OutputKind::CalibTxt => super::write_calib(rig, &path)?,
        }
        files.insert(kind.key().to_string(), rel_string(&layout.relative_path(frame, kind)));
    }
    Ok(FrameRecord {
        frame,
        seed: sample.meta.seed,
        scene_hash: sample.meta.scene_hash.clone(),
        files,
    })
}

pub fn write_manifest(root: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    super::write_atomic(&root.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(())
}

pub fn read_manifest(root: &Path) -> Result<Manifest> {
    let bytes = super::read_file(&root.join(MANIFEST_FILE))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Reads one frame back. The disparity comes from the PFM when present and
/// from the 16-bit PNG otherwise. Frame metadata is taken from the manifest
/// when one exists.
pub fn read_pair(layout: &DatasetLayout, frame: u32) -> Result<FrameSample> {
    let left_rgb = super::read_rgb_png(&layout.path(frame, OutputKind::LeftPng))?;
    let right_rgb = super::read_rgb_png(&layout.path(frame, OutputKind::RightPng))?;
    let disp_left = if layout.outputs.disp_pfm {
        super::read_pfm(&layout.path(frame, OutputKind::DispPfm))?
    } else {
        super::read_kitti_disp(&layout.path(frame, OutputKind::DispKittiPng16))?
    };
    let (w, h) = (disp_left.width, disp_left.height);
    let mask = |kind: OutputKind| -> Result<crate::grid::Mask> {
        if layout.outputs.enabled(kind) {
            super::read_mask_png(&layout.path(frame, kind))
        } else {
            Ok(crate::grid::Mask::filled(w, h, 0))
        }
    };
    let occlusion = mask(OutputKind::OcclusionPng)?;
    let foreground = mask(OutputKind::ForegroundPng)?;
    let disp_right = if layout.outputs.disp_right_pfm {
        Some(super::read_pfm(&layout.path(frame, OutputKind::DispRightPfm))?)
    } else {
        None
    };
    for (name, (gw, gh)) in [
        ("im0", (left_rgb.width, left_rgb.height)),
        ("im1", (right_rgb.width, right_rgb.height)),
        ("occ0", (occlusion.width, occlusion.height)),
        ("fg0", (foreground.width, foreground.height)),
    ] {
        if (gw, gh) != (w, h) {
            return Err(Error::ShapeMismatch(format!(
                "frame {frame}: {name} is {gw}x{gh}, disparity is {w}x{h}"
            )));
        }
    }
    let meta = match read_manifest(&layout.root)
        .ok()
        .as_ref()
        .and_then(|m| m.record(frame).cloned())
    {
        Some(r) => FrameMeta {
            frame,
            seed: r.seed,
            scene_hash: r.scene_hash,
        },
        None => FrameMeta {
            frame,
            seed: 0,
            scene_hash: String::new(),
        },
    };
    Ok(FrameSample {
        left_rgb,
        right_rgb,
        disp_left,
        occlusion,
        foreground,
        disp_right,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_are_unique_per_frame_and_kind() {
        for style in [LayoutStyle::Middlebury, LayoutStyle::Kitti] {
            let layout = DatasetLayout::new("/x", style, Outputs::default());
            let mut seen = std::collections::HashSet::new();
            for f in 0..50 {
                for k in OutputKind::ALL {
                    assert!(seen.insert(layout.path(f, k)));
                }
            }
        }
    }

    #[test]
    fn middlebury_names() {
        let layout = DatasetLayout::new("/d", LayoutStyle::Middlebury, Outputs::default());
        assert_eq!(layout.path(3, OutputKind::LeftPng), Path::new("/d/000003/im0.png"));
        assert_eq!(layout.path(3, OutputKind::DispPfm), Path::new("/d/000003/disp0.pfm"));
    }

    #[test]
    fn config_hash_tracks_bytes() {
        let a = config_hash(b"frames = 10\n", &[]);
        assert_eq!(a, config_hash(b"frames = 10\n", &[]));
        assert_ne!(a, config_hash(b"frames = 11\n", &[]));
        assert_ne!(a, config_hash(b"frames = 10\n", &[("seed", "1".into())]));
        assert_eq!(a.len(), 64);
    }
}

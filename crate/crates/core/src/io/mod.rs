//! On-disk formats and dataset layouts.

mod calib;
mod kitti;
mod layout;
mod pfm;
mod png;

pub use calib::{parse_calib, read_calib, write_calib, Calib};
pub use kitti::{decode_kitti_disp, encode_kitti_disp, read_kitti_disp, write_kitti_disp, KITTI_SCALE};
pub use layout::{
    config_hash, read_manifest, read_pair, write_frame, write_manifest, DatasetLayout, FrameRecord, LayoutStyle,
    Manifest, OutputKind, Outputs, MANIFEST_FILE, TIMING_FILE,
};
pub use pfm::{decode_pfm, encode_pfm, encode_pfm_big_endian, read_pfm, write_pfm};
pub use png::{read_mask_png, read_rgb_png, write_mask_png, write_rgb_png};

use std::path::Path;

/// Writes `bytes` to `path` through a temporary sibling and a rename, so
/// readers never observe a partially written file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

pub(crate) fn read_file(path: &Path) -> crate::Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => crate::Error::MissingOutput(path.to_path_buf()),
        _ => e.into(),
    })
}

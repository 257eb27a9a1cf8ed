use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid stereo rig: {0}")]
    InvalidRig(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("line {line}: face corner has no texture coordinate")]
    MissingUv { line: usize },
    #[error("line {line}: index {index} out of range")]
    BadIndex { line: usize, index: i64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("source image '{origin}' ({width}x{height}) too small for a {min_side}px crop")]
    ImageTooSmall {
        origin: String,
        width: usize,
        height: usize,
        min_side: usize,
    },
    #[error("patch sequence is empty")]
    NoTextures,
    #[error("mesh pool is empty")]
    NoMeshes,

    #[error("disparity {value} exceeds ndisp {ndisp}")]
    MaxDisparityExceeded { value: f64, ndisp: f64 },
    #[error("generated frame violates an invariant: {0}")]
    Invariant(String),

    #[error("malformed PFM: {0}")]
    PfmParse(String),
    #[error("disparity {value} does not fit the 16-bit PNG encoding")]
    DisparityOverflow { value: f64 },
    #[error("missing output file {}", .0.display())]
    MissingOutput(PathBuf),
    #[error("malformed calibration file: {0}")]
    CalibParse(String),

    #[error("evaluation mask selects no pixels")]
    EmptyEvaluation,
    #[error("histogram bin edges differ")]
    BinMismatch,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("config: {0}")]
    Config(String),
    #[error("output root {} is not empty and was not produced by this configuration", .0.display())]
    OutputNotEmpty(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

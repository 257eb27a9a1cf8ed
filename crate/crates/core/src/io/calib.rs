//! Middlebury-style `calib.txt`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::StereoRig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calib {
    pub f_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub doffs: f64,
    pub baseline_mm: f64,
    pub width: u32,
    pub height: u32,
    pub ndisp: f64,
}

impl Calib {
    pub fn from_rig(rig: &StereoRig) -> Self {
        let (cx, cy) = rig.principal_point();
        Self {
            f_px: rig.f_px(),
            cx,
            cy,
            doffs: 0.0,
            baseline_mm: rig.baseline_m * 1000.0,
            width: rig.width_px,
            height: rig.height_px,
            ndisp: rig.ndisp,
        }
    }

    pub fn to_text(&self) -> String {
        let cam = format!(
            "[{f} 0 {cx}; 0 {f} {cy}; 0 0 1]",
            f = self.f_px,
            cx = self.cx,
            cy = self.cy
        );
        format!(
            "cam0={cam}\ncam1={cam}\ndoffs={}\nbaseline={}\nwidth={}\nheight={}\nndisp={}\n",
            self.doffs, self.baseline_mm, self.width, self.height, self.ndisp
        )
    }
}

pub fn write_calib(rig: &StereoRig, path: &Path) -> Result<()> {
    super::write_atomic(path, Calib::from_rig(rig).to_text().as_bytes())?;
    Ok(())
}

pub fn read_calib(path: &Path) -> Result<Calib> {
    let bytes = super::read_file(path)?;
    parse_calib(&String::from_utf8_lossy(&bytes))
}

pub fn parse_calib(text: &str) -> Result<Calib> {
    let bad = |m: String| Error::CalibParse(m);
    let mut get = std::collections::HashMap::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line without '=': {line}")))?;
        get.insert(k.trim().to_string(), v.trim().to_string());
    }
    let field = |k: &str| get.get(k).ok_or_else(|| bad(format!("missing key {k}")));
    let num = |k: &str| -> Result<f64> {
        field(k)?
            .parse::<f64>()
            .map_err(|_| bad(format!("{k} is not a number")))
    };
    let cam = field("cam0")?;
    let m: Vec<f64> = cam
        .trim_matches(|c| c == '[' || c == ']')
        .split(|c: char| c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| bad(format!("cam0 entry '{s}'"))))
        .collect::<Result<_>>()?;
    if m.len() != 9 {
        return Err(bad("cam0 must have 9 entries".into()));
    }
    Ok(Calib {
        f_px: m[0],
        cx: m[2],
        cy: m[5],
        doffs: num("doffs")?,
        baseline_mm: num("baseline")?,
        width: num("width")? as u32,
        height: num("height")? as u32,
        ndisp: num("ndisp")?,
    })
}

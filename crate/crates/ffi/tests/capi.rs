use std::ffi::{CStr, CString};
use std::ptr;

use semistereo_ffi::*;

const SMALL: &str = r#"
frames = 3
seed = 11

[rig]
focal_mm = 30.0
sensor_width_mm = 36.0
width_px = 160
height_px = 100
min_depth_m = 1.5
ndisp = 48.0

[background]
kind = "room"
min = [-4.0, -3.0, -2.0]
max = [4.0, 3.0, 14.0]

[emitter]
region = [-2.0, 2.0, 1.5, 10.0]
height_m = -2.0
v0_min = [-0.05, -0.03, -0.01]
v0_max = [0.05, 0.03, 0.01]
omega_range = [0.2, 1.0]
gravity = [0.0, 0.05, 0.0]
lifetime_frames = 4

[target]
edges = [0.0, 12.0, 24.0, 36.0, 48.0]
mass = [0.25, 0.25, 0.25, 0.25]

[textures]
dir = "builtin:procedural"
count = 8
side_frac = [0.2, 0.5]
out_side_px = 32

[objects]
pool = "builtin:primitives"
per_frame = 4
size_frac = [0.1, 0.2]
aug_scale = [0.8, 1.2]
anisotropic = true
"#;

fn last_error() -> String {
    let p = ss_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_generator() -> *mut SsGenerator {
    let toml = CString::new(SMALL).unwrap();
    let mut gen = ptr::null_mut();
    let st = unsafe { ss_generator_from_toml(toml.as_ptr(), ptr::null(), &mut gen) };
    assert_eq!(st, SsStatus::Ok, "{}", last_error());
    assert!(!gen.is_null());
    gen
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ss_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn unknown_preset_is_a_config_error() {
    let name = CString::new("no-such-preset").unwrap();
    let mut gen = ptr::null_mut();
    let st = unsafe { ss_generator_from_preset(name.as_ptr(), &mut gen) };
    assert_eq!(st, SsStatus::Config);
    assert!(gen.is_null());
    assert!(last_error().contains("no-such-preset"));
}

#[test]
fn null_arguments_are_reported() {
    let mut gen = ptr::null_mut();
    assert_eq!(
        unsafe { ss_generator_from_preset(ptr::null(), &mut gen) },
        SsStatus::NullPointer
    );
    assert!(last_error().contains("name"));
    let mut info = SsRigInfo::default();
    assert_eq!(
        unsafe { ss_generator_info(ptr::null(), &mut info) },
        SsStatus::NullPointer
    );
    // Freeing null is a no-op.
    unsafe {
        ss_generator_free(ptr::null_mut());
        ss_frame_free(ptr::null_mut());
        ss_map_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_last_error() {
    let mut gen = ptr::null_mut();
    unsafe { ss_generator_from_preset(ptr::null(), &mut gen) };
    assert!(!ss_last_error().is_null());
    let gen = small_generator();
    assert!(ss_last_error().is_null());
    unsafe { ss_generator_free(gen) };
}

#[test]
fn invalid_toml_is_a_config_error() {
    let toml = CString::new("frames = \"many\"").unwrap();
    let mut gen = ptr::null_mut();
    let st = unsafe { ss_generator_from_toml(toml.as_ptr(), ptr::null(), &mut gen) };
    assert_eq!(st, SsStatus::Config);
    assert!(gen.is_null());
}

#[test]
fn render_and_copy_buffers() {
    let gen = small_generator();
    let mut info = SsRigInfo::default();
    assert_eq!(unsafe { ss_generator_info(gen, &mut info) }, SsStatus::Ok);
    assert_eq!((info.width, info.height, info.frames, info.ndisp), (160, 100, 3, 48.0));
    // f = 30 * 160 / 36 px; B solved so that 1.5 m maps to 48 px.
    let f = 30.0 * 160.0 / 36.0;
    assert!((info.f_px - f).abs() < 1e-12);
    assert!((info.baseline_m - 48.0 * 1.5 / f).abs() < 1e-12);

    let mut frame = ptr::null_mut();
    assert_eq!(
        unsafe { ss_generator_render(gen, 3, &mut frame) },
        SsStatus::InvalidArgument
    );
    assert_eq!(unsafe { ss_generator_render(gen, 1, &mut frame) }, SsStatus::Ok);
    let (mut w, mut h) = (0, 0);
    assert_eq!(unsafe { ss_frame_size(frame, &mut w, &mut h) }, SsStatus::Ok);
    let n = (w * h) as usize;

    let mut rgb = vec![0u8; 3 * n];
    assert_eq!(
        unsafe { ss_frame_copy_left(frame, rgb.as_mut_ptr(), rgb.len() - 1) },
        SsStatus::InvalidArgument
    );
    assert!(last_error().contains("needed"));
    assert_eq!(
        unsafe { ss_frame_copy_left(frame, rgb.as_mut_ptr(), rgb.len()) },
        SsStatus::Ok
    );
    assert!(rgb.iter().any(|&v| v != 0));
    assert_eq!(
        unsafe { ss_frame_copy_right(frame, rgb.as_mut_ptr(), rgb.len()) },
        SsStatus::Ok
    );

    let mut disp = vec![-1.0f32; n];
    assert_eq!(
        unsafe { ss_frame_copy_disparity(frame, disp.as_mut_ptr(), n) },
        SsStatus::Ok
    );
    assert!(disp.iter().all(|&d| d >= 0.0 && d as f64 <= info.ndisp));
    let mut occ = vec![9u8; n];
    let mut fg = vec![9u8; n];
    assert_eq!(
        unsafe { ss_frame_copy_occlusion(frame, occ.as_mut_ptr(), n) },
        SsStatus::Ok
    );
    assert_eq!(
        unsafe { ss_frame_copy_foreground(frame, fg.as_mut_ptr(), n) },
        SsStatus::Ok
    );
    assert!(occ.iter().chain(&fg).all(|&m| m <= 1));
    assert_eq!(
        unsafe { ss_frame_copy_disparity(frame, ptr::null_mut(), n) },
        SsStatus::NullPointer
    );

    unsafe {
        ss_frame_free(frame);
        ss_generator_free(gen);
    }
}

#[test]
fn render_is_repeatable_across_handles() {
    let copy = |gen| {
        let mut frame = ptr::null_mut();
        assert_eq!(unsafe { ss_generator_render(gen, 2, &mut frame) }, SsStatus::Ok);
        let mut disp = vec![0f32; 160 * 100];
        assert_eq!(
            unsafe { ss_frame_copy_disparity(frame, disp.as_mut_ptr(), disp.len()) },
            SsStatus::Ok
        );
        unsafe { ss_frame_free(frame) };
        disp
    };
    let (a, b) = (small_generator(), small_generator());
    assert_eq!(copy(a), copy(b));
    unsafe {
        ss_generator_free(a);
        ss_generator_free(b);
    }
}

#[test]
fn generate_writes_a_dataset() {
    let gen = small_generator();
    let dir = tempfile::tempdir().unwrap();
    let root = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { ss_generator_generate(gen, root.as_ptr(), 0) },
        SsStatus::InvalidArgument
    );
    assert_eq!(unsafe { ss_generator_generate(gen, root.as_ptr(), 2) }, SsStatus::Ok);
    assert!(dir.path().join("manifest.json").is_file());
    assert!(dir.path().join("000002/disp0.pfm").is_file());
    unsafe { ss_generator_free(gen) };
}

#[test]
fn pfm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.pfm").to_str().unwrap()).unwrap();
    let data: Vec<f32> = (0..12).map(|i| i as f32 * 0.75 - 2.0).collect();
    assert_eq!(
        unsafe { ss_write_pfm(path.as_ptr(), data.as_ptr(), 4, 3) },
        SsStatus::Ok
    );
    assert_eq!(
        unsafe { ss_write_pfm(path.as_ptr(), data.as_ptr(), 0, 3) },
        SsStatus::InvalidArgument
    );

    let mut map = ptr::null_mut();
    assert_eq!(unsafe { ss_read_pfm(path.as_ptr(), &mut map) }, SsStatus::Ok);
    let (mut w, mut h) = (0, 0);
    assert_eq!(unsafe { ss_map_size(map, &mut w, &mut h) }, SsStatus::Ok);
    assert_eq!((w, h), (4, 3));
    let back = unsafe { std::slice::from_raw_parts(ss_map_data(map), 12) };
    assert_eq!(back, &data[..]);
    unsafe { ss_map_free(map) };
    assert!(unsafe { ss_map_data(ptr::null()) }.is_null());

    let missing = CString::new(dir.path().join("absent.pfm").to_str().unwrap()).unwrap();
    let mut map = ptr::null_mut();
    assert_ne!(unsafe { ss_read_pfm(missing.as_ptr(), &mut map) }, SsStatus::Ok);
    assert!(map.is_null());
}

#[test]
fn evaluate_against_hand_computed_errors() {
    let gt = [10.0f32, 20.0, 30.0, 40.0];
    // Errors 0, 1.5, 3, 5: avgerr 2.375, rms sqrt(36.25 / 4).
    let pred = [10.0f32, 21.5, 27.0, 45.0];
    let mut m = SsMetrics::default();
    assert_eq!(
        unsafe { ss_evaluate(pred.as_ptr(), gt.as_ptr(), ptr::null(), 2, 2, &mut m) },
        SsStatus::Ok
    );
    assert_eq!(m.pixel_count, 4);
    assert!((m.avgerr - 2.375).abs() < 1e-12);
    assert!((m.rms - (36.25f64 / 4.0).sqrt()).abs() < 1e-12);
    assert_eq!((m.bad_1, m.bad_2, m.bad_4), (75.0, 50.0, 25.0));
    // Only the 5 px error exceeds both 3 px and 5% of 40.
    assert_eq!(m.d1_all, 25.0);

    let mask = [1u8, 1, 0, 0];
    assert_eq!(
        unsafe { ss_evaluate(pred.as_ptr(), gt.as_ptr(), mask.as_ptr(), 2, 2, &mut m) },
        SsStatus::Ok
    );
    assert_eq!(m.pixel_count, 2);
    assert!((m.avgerr - 0.75).abs() < 1e-12);

    let none = [0u8; 4];
    assert_eq!(
        unsafe { ss_evaluate(pred.as_ptr(), gt.as_ptr(), none.as_ptr(), 2, 2, &mut m) },
        SsStatus::Invariant
    );
}

#[test]
fn rig_helpers() {
    assert!((ss_f_px(35.0, 35.0, 1500) - 1500.0).abs() < 1e-12);
    // 192 px at 2 m with f = 1500 px needs B = 0.256 m.
    assert!((ss_solve_baseline(192.0, 2.0, 1500.0) - 0.256).abs() < 1e-12);
}

#[test]
fn header_parses_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/semistereo.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "ss_generator_from_preset",
        "ss_frame_copy_disparity",
        "SS_STATUS_PANIC",
        "typedef struct SsFrame SsFrame",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    for (cc, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = std::process::Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header])
            .output()
        else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

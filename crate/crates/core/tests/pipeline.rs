use std::path::Path;

use semistereo::config::Config;
use semistereo::io::{read_manifest, read_pair};
use semistereo::pipeline::{dataset_stats, Generator};
use semistereo::Error;

const SMALL: &str = include_str!("fixtures/small.toml");

fn generate(root: &Path, seed: u64, workers: usize) -> Generator {
    let mut cfg = Config::from_toml(SMALL, None).unwrap();
    cfg.seed = seed;
    let gen = Generator::new(cfg, format!("seed-{seed}")).unwrap();
    gen.generate(root, workers).unwrap();
    gen
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let m = read_manifest(root).unwrap();
    let mut files: Vec<(String, Vec<u8>)> = m
        .records
        .iter()
        .flat_map(|r| r.files.values())
        .map(|rel| (rel.clone(), std::fs::read(root.join(rel)).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn output_does_not_depend_on_workers() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(a.path(), 11, 1);
    generate(b.path(), 11, 3);
    assert_eq!(read_tree(a.path()), read_tree(b.path()));
    assert_eq!(
        std::fs::read(a.path().join("manifest.json")).unwrap(),
        std::fs::read(b.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn different_seeds_give_different_data() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    generate(a.path(), 11, 2);
    generate(b.path(), 12, 2);
    assert_ne!(read_tree(a.path()), read_tree(b.path()));
}

#[test]
fn manifest_regenerates_frames_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 11, 2);
    let manifest = read_manifest(dir.path()).unwrap();
    let gen = Generator::from_manifest(&manifest).unwrap();
    let layout = manifest.layout(dir.path());
    for rec in &manifest.records {
        let stored = read_pair(&layout, rec.frame).unwrap();
        let fresh = gen.render_frame(rec.frame).unwrap();
        assert_eq!(stored.left_rgb, fresh.left_rgb);
        assert_eq!(stored.right_rgb, fresh.right_rgb);
        assert_eq!(stored.disp_left, fresh.disp_left);
        assert_eq!(stored.occlusion, fresh.occlusion);
        assert_eq!(stored.foreground, fresh.foreground);
        assert_eq!(rec.scene_hash, fresh.meta.scene_hash);
    }
}

#[test]
fn foreign_output_root_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 11, 1);
    let mut cfg = Config::from_toml(SMALL, None).unwrap();
    cfg.seed = 99;
    let other = Generator::new(cfg, "other").unwrap();
    assert!(matches!(other.generate(dir.path(), 1), Err(Error::OutputNotEmpty(_))));

    let stray = tempfile::tempdir().unwrap();
    std::fs::write(stray.path().join("notes.txt"), "x").unwrap();
    assert!(matches!(other.generate(stray.path(), 1), Err(Error::OutputNotEmpty(_))));
}

#[test]
fn same_config_may_regenerate_into_its_own_root() {
    let dir = tempfile::tempdir().unwrap();
    let gen = generate(dir.path(), 11, 1);
    let before = read_tree(dir.path());
    gen.generate(dir.path(), 2).unwrap();
    assert_eq!(read_tree(dir.path()), before);
}

#[test]
fn stats_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), 11, 2);
    let a = dataset_stats(dir.path()).unwrap();
    let b = dataset_stats(dir.path()).unwrap();
    assert_eq!(a.frames, 3);
    assert_eq!(a.ndisp, 48.0);
    assert!(a.max_disparity <= 48.0);
    assert_eq!(
        (
            &a.target,
            &a.foreground,
            &a.full_frame,
            a.l1_foreground,
            a.occluded_fraction
        ),
        (
            &b.target,
            &b.foreground,
            &b.full_frame,
            b.l1_foreground,
            b.occluded_fraction
        )
    );
    let mass: f64 = a.full_frame.mass.iter().sum::<f64>() + a.full_frame.overflow;
    assert!((mass - 1.0).abs() < 1e-9);
}

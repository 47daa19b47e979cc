use std::path::Path;
use std::process::{Command, Output};

use star_core::image::{load_rgb, save_rgb};
use star_core::{angular_error, estimate_illuminant, ImageGrid, RgbImage, StarParams};

fn star(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_star"))
        .args(args)
        .arg("-o")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn textured(h: usize, w: usize) -> RgbImage {
    let plane = |k: f64| {
        ImageGrid::from_fn(h, w, |r, c| {
            let shade = 0.5 + 0.3 * (r as f64 / 5.0 + k).sin() * (c as f64 / 7.0).cos();
            shade * if (r / 3 + c / 3) % 2 == 0 { 1.0 } else { 0.8 }
        })
    };
    RgbImage::new(plane(0.0), plane(0.5), plane(1.0)).unwrap()
}

#[test]
fn missing_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = star(&["decompose", "does-not-exist.png"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_truth_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.png");
    save_rgb(&textured(8, 8), &img).unwrap();
    let o = star(
        &["correct", img.to_str().unwrap(), "--truth", "1,2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_parameter_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("a.png");
    save_rgb(&textured(8, 8), &img).unwrap();
    let o = star(
        &["decompose", img.to_str().unwrap(), "--gamma-s", "0.5"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn directory_batch_writes_every_image() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    for name in ["a.png", "b.png", "c.png"] {
        save_rgb(&textured(12, 10), input.path().join(name)).unwrap();
    }
    std::fs::write(input.path().join("notes.txt"), "skip me").unwrap();
    let o = star(
        &["decompose", input.path().to_str().unwrap(), "--dump-trace"],
        out.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    for stem in ["a", "b", "c"] {
        assert!(text.contains(&format!("RESULT {stem} iters=")));
        for suffix in ["_I.png", "_R.png", "_trace.csv"] {
            assert!(out.path().join(format!("{stem}{suffix}")).exists());
        }
    }
    let csv = std::fs::read_to_string(out.path().join("a_trace.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("outer,inner,rel_change_I,rel_change_R,objective")
    );
}

#[test]
fn constant_gray_image_decomposes_to_square_roots() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("gray.png");
    let g = ImageGrid::filled(9, 9, 64.0 / 255.0);
    save_rgb(&RgbImage::gray(g), &img).unwrap();
    let o = star(
        &["decompose", img.to_str().unwrap(), "--dump-raw"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    for name in ["gray_I.starf32", "gray_R.starf32"] {
        let raw =
            star_core::image::read_raw_grid(std::fs::File::open(dir.path().join(name)).unwrap())
                .unwrap();
        let root = (64.0f64 / 255.0).sqrt();
        assert!(raw.as_slice().iter().all(|v| (v - root).abs() < 1e-6));
    }
}

#[test]
fn correct_reports_engine_angular_error() {
    let dir = tempfile::tempdir().unwrap();
    let img_path = dir.path().join("tinted.png");
    let tinted = textured(16, 16)
        .map_planes(|k, p| p.map(|v| v * [1.0, 0.8, 0.6][k]))
        .unwrap();
    save_rgb(&tinted, &img_path).unwrap();
    let o = star(
        &[
            "correct",
            img_path.to_str().unwrap(),
            "--truth",
            "1,0.8,0.6",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let reported: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("ANGULAR_ERROR tinted "))
        .expect("angular error line")
        .parse()
        .unwrap();
    let decoded = load_rgb(&img_path).unwrap();
    let est = estimate_illuminant(&decoded, &StarParams::default()).unwrap();
    let expected = angular_error(&est.0, &[1.0, 0.8, 0.6]).unwrap();
    assert!((reported - expected).abs() <= 5e-4);
    assert!(dir.path().join("tinted_corrected.png").exists());
}

#[test]
fn black_image_correction_is_a_computation_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("black.png");
    save_rgb(&RgbImage::gray(ImageGrid::zeros(6, 6)), &img).unwrap();
    let o = star(&["correct", img.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn enhance_and_weights_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("dark.png");
    save_rgb(
        &textured(10, 10)
            .map_planes(|_, p| p.map(|v| v * 0.2))
            .unwrap(),
        &img,
    )
    .unwrap();
    let o = star(
        &["enhance", img.to_str().unwrap(), "--gamma-e", "2.2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let before = load_rgb(&img).unwrap();
    let after = load_rgb(dir.path().join("dark_enhanced.png")).unwrap();
    assert!(after.green().mean() > before.green().mean());
    let o = star(&["weights", img.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0));
    for map in ["Sx", "Sy", "Tx", "Ty"] {
        assert!(dir.path().join(format!("dark_{map}.starf32")).exists());
    }
}

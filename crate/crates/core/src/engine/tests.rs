use super::*;
use crate::filters::{WeightKind, WindowSpec};
use crate::solver::SolverSettings;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(seed: u64, h: usize, w: usize, lo: f64, hi: f64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageGrid::from_fn(h, w, |_, _| rng.gen_range(lo..hi))
}

/// Smooth shading times a fine checker texture.
fn textured(h: usize, w: usize, level: f64) -> ImageGrid {
    ImageGrid::from_fn(h, w, |r, c| {
        let shade =
            0.5 + 0.4 * ((r as f64 / h as f64) * 3.0).sin() * ((c as f64 / w as f64) * 2.0).cos();
        let texture = if (r / 2 + c / 2) % 2 == 0 { 1.0 } else { 0.7 };
        (level * shade * texture).clamp(0.0, 1.0)
    })
}

fn unit_maps(h: usize, w: usize, v: f64) -> Directional {
    Directional {
        x: ImageGrid::filled(h, w, v),
        y: ImageGrid::filled(h, w, v),
    }
}

#[test]
fn objective_of_constant_split_is_zero() {
    let c: f64 = 0.36;
    let o = ImageGrid::filled(4, 5, c);
    let half = ImageGrid::filled(4, 5, c.sqrt());
    let s = unit_maps(4, 5, 100.0);
    let value = objective(&o, &half, &half, &s, &s, 1e-3, 1e-4).unwrap();
    assert!(value.abs() < 1e-20);
}

#[test]
fn objective_with_zero_illumination() {
    let o = random_grid(1, 3, 3, 0.0, 1.0);
    let zeros = ImageGrid::zeros(3, 3);
    let s = unit_maps(3, 3, 2.0);
    let value = objective(
        &o,
        &zeros,
        &ImageGrid::filled(3, 3, 0.5),
        &s,
        &s,
        1.0,
        0.0001,
    )
    .unwrap();
    assert!((value - o.frobenius_norm().powi(2)).abs() < 1e-12);
}

#[test]
fn objective_matches_loop_evaluation() {
    let (h, w) = (4, 4);
    let o = random_grid(3, h, w, 0.0, 1.0);
    let i = random_grid(4, h, w, 0.0, 1.0);
    let r = random_grid(5, h, w, 0.0, 1.5);
    let s = Directional {
        x: random_grid(6, h, w, 1.0, 10.0),
        y: random_grid(7, h, w, 1.0, 10.0),
    };
    let t = Directional {
        x: random_grid(8, h, w, 1.0, 10.0),
        y: random_grid(9, h, w, 1.0, 10.0),
    };
    let (alpha, beta) = (0.3, 0.07);
    let mut expected = 0.0;
    for y in 0..h {
        for x in 0..w {
            expected += (o.get(y, x) - i.get(y, x) * r.get(y, x)).powi(2);
            if x + 1 < w {
                expected += alpha * (s.x.get(y, x) * (i.get(y, x + 1) - i.get(y, x))).powi(2);
                expected += beta * (t.x.get(y, x) * (r.get(y, x + 1) - r.get(y, x))).powi(2);
            }
            if y + 1 < h {
                expected += alpha * (s.y.get(y, x) * (i.get(y + 1, x) - i.get(y, x))).powi(2);
                expected += beta * (t.y.get(y, x) * (r.get(y + 1, x) - r.get(y, x))).powi(2);
            }
        }
    }
    let value = objective(&o, &i, &r, &s, &t, alpha, beta).unwrap();
    assert!((value - expected).abs() < 1e-12 * expected.max(1.0));
    assert!(objective(&o, &ImageGrid::zeros(3, 4), &r, &s, &t, alpha, beta).is_err());
}

#[test]
fn inner_constant_fixed_point() {
    let c: f64 = 0.49;
    let o = ImageGrid::filled(6, 6, c);
    let half = o.map(f64::sqrt);
    let params = StarParams::default();
    let (s, t) = stage_weights(&half, &half, &params).unwrap();
    let d = star_inner(&o, &s, &t, &params, &half, &half).unwrap();
    assert_eq!(d.iterations(), 1);
    assert!(d.illumination.max_abs_diff(&half).unwrap() < 1e-10);
    assert!(d.reflectance.max_abs_diff(&half).unwrap() < 1e-10);
}

#[test]
fn inner_objective_non_increasing() {
    let o = random_grid(11, 4, 4, 0.05, 1.0);
    let params = StarParams {
        eps_conv: 1e-12,
        ..StarParams::default()
    };
    let init = o.map(f64::sqrt);
    let (s, t) = stage_weights(&init, &init, &params).unwrap();
    let d = star_inner(&o, &s, &t, &params, &init, &init).unwrap();
    assert_eq!(d.iterations(), params.max_inner_iters);
    let mut prev = d.stage_start_objectives[0];
    for rec in &d.trace {
        for value in [rec.objective_after_i, rec.objective] {
            assert!(value <= prev * (1.0 + 1e-6) + 1e-15, "{value} > {prev}");
            prev = value;
        }
    }
}

#[test]
fn inner_rejects_non_positive_weights() {
    let o = ImageGrid::filled(3, 3, 0.5);
    let good = unit_maps(3, 3, 1.0);
    let bad = unit_maps(3, 3, 0.0);
    let params = StarParams::default();
    assert!(star_inner(&o, &bad, &good, &params, &o, &o).is_err());
}

#[test]
fn decompose_constant_fixed_point() {
    for c in [0.04, 0.5, 1.0] {
        let v = ImageGrid::filled(8, 7, c);
        let d = star_decompose(&v, &StarParams::default()).unwrap();
        let root = c.sqrt();
        assert_eq!(d.stages(), 5);
        assert!(d
            .illumination
            .as_slice()
            .iter()
            .all(|x| (x - root).abs() < 1e-8));
        assert!(d
            .reflectance
            .as_slice()
            .iter()
            .all(|x| (x - root).abs() < 1e-8));
    }
}

#[test]
fn decompose_rejects_out_of_range() {
    let v = ImageGrid::new(1, 2, vec![0.5, 1.2]).unwrap();
    assert!(matches!(
        star_decompose(&v, &StarParams::default()),
        Err(StarError::InvalidInput(_))
    ));
}

#[test]
fn outer_loop_changes_result() {
    let v = textured(24, 24, 0.8);
    let one = star_decompose(
        &v,
        &StarParams {
            outer_iters: 1,
            ..StarParams::default()
        },
    )
    .unwrap();
    let four = star_decompose(&v, &StarParams::default()).unwrap();
    assert_eq!(one.stages(), 2);
    assert_eq!(four.stages(), 5);
    assert!(four.trace.len() > one.trace.len());
    assert!(one.reflectance.max_abs_diff(&four.reflectance).unwrap() > 1e-6);
    assert!(one.trace.iter().all(|t| t.outer <= 1));
}

#[test]
fn decompose_is_deterministic() {
    let v = textured(20, 17, 0.6);
    let a = star_decompose(&v, &StarParams::default()).unwrap();
    let b = star_decompose(&v, &StarParams::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn decompose_transpose_equivariant() {
    let v = textured(18, 13, 0.7);
    let params = StarParams {
        solver: SolverSettings {
            cg_tol: 1e-10,
            ..Default::default()
        },
        ..Default::default()
    };
    let d = star_decompose(&v, &params).unwrap();
    let dt = star_decompose(&v.transpose(), &params).unwrap();
    assert!(
        dt.illumination
            .max_abs_diff(&d.illumination.transpose())
            .unwrap()
            < 1e-6
    );
    assert!(
        dt.reflectance
            .max_abs_diff(&d.reflectance.transpose())
            .unwrap()
            < 1e-6
    );
}

#[test]
fn structure_and_texture_split() {
    let v = textured(32, 32, 0.3);
    let d = star_decompose(&v, &StarParams::default()).unwrap();
    assert!(d.illumination.total_variation() < d.reflectance.total_variation());
}

#[test]
fn etv_variant_runs() {
    let v = textured(16, 16, 0.5);
    let params = StarParams {
        weight_kind: WeightKind::Etv,
        window: WindowSpec::new(2),
        ..Default::default()
    };
    let d = star_decompose(&v, &params).unwrap();
    assert!(d.iterations() >= d.stages());
}

#[test]
fn trace_csv_layout() {
    let v = textured(10, 10, 0.5);
    let d = star_decompose(
        &v,
        &StarParams {
            outer_iters: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    d.write_trace_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "outer,inner,rel_change_I,rel_change_R,objective");
    assert_eq!(lines.len(), d.iterations() + 1);
    assert!(lines[1].starts_with("0,0,"));
    assert_eq!(lines[1].split(',').count(), 5);
}

fn rgb_from_value(v: &ImageGrid) -> RgbImage {
    // fixed hue and saturation
    RgbImage::new(v.clone(), v.map(|x| x * 0.8), v.map(|x| x * 0.5)).unwrap()
}

#[test]
fn enhance_identity_gamma_reconstructs() {
    let img = rgb_from_value(&textured(24, 24, 0.5));
    let out = enhance_lowlight(&img, &StarParams::default(), 1.0).unwrap();
    // output value plane is exactly the clamped reconstruction
    let recon = out.decomposition.reconstruction().clamp01();
    assert!(out.value.max_abs_diff(&recon).unwrap() < 1e-12);
    for (a, b) in out.image.planes().iter().zip(img.planes()) {
        let rms = (a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / a.len() as f64)
            .sqrt();
        assert!(rms < 1e-2, "rms {rms}");
    }
}

#[test]
fn enhance_bright_stays_bright() {
    let img = RgbImage::gray(ImageGrid::filled(12, 12, 1.0));
    let out = enhance_lowlight(&img, &StarParams::default(), 2.2).unwrap();
    assert!(out.value.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-3));
}

#[test]
fn enhance_brightens_dark_input() {
    let img = rgb_from_value(&textured(24, 24, 0.1));
    let before = rgb_to_hsv(&img).value().mean();
    let out = enhance_lowlight(&img, &StarParams::default(), 2.2).unwrap();
    let after = rgb_to_hsv(&out.image).value().mean();
    assert!(after > before, "{after} <= {before}");
    assert!(enhance_lowlight(&img, &StarParams::default(), 0.0).is_err());
}

#[test]
fn neutral_image_gives_neutral_estimate() {
    let img = RgbImage::gray(textured(16, 16, 0.6));
    let est = estimate_illuminant(&img, &StarParams::default()).unwrap();
    assert!((est.0[0] - est.0[1]).abs() < 1e-6 && (est.0[1] - est.0[2]).abs() < 1e-6);
}

#[test]
fn tint_ratio_is_recovered() {
    let scene = textured(24, 24, 0.6);
    let e = 1.3;
    let img = RgbImage::new(scene.map(|v| (v * e).min(1.0)), scene.clone(), scene).unwrap();
    let est = estimate_illuminant(&img, &StarParams::default()).unwrap();
    let ratio = est.0[0] / est.0[1];
    assert!((ratio - e).abs() / e < 0.15, "ratio {ratio}");
}

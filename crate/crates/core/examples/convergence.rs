//! Decomposes every image in a directory and prints per-stage convergence.
//!
//! ```text
//! cargo run --release -p star-core --example convergence -- corpus
//! ```

use std::time::Instant;

use star_core::image::{load_rgb, rgb_to_hsv};
use star_core::{star_decompose, StarParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    let mut paths: Vec<_> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    let mut params = StarParams::default();
    if let Some(eps) = std::env::args().nth(2) {
        params.eps_weight = eps.parse()?;
    }
    for path in paths {
        let img = load_rgb(&path)?;
        let v = rgb_to_hsv(&img).value().clone();
        let start = Instant::now();
        let d = star_decompose(&v, &params)?;
        println!(
            "{} {}x{}: {} iterations, {:.2}s, TV(I)={:.4} TV(R)={:.2} I in [{:.4}, {:.4}]",
            path.display(),
            v.height(),
            v.width(),
            d.iterations(),
            start.elapsed().as_secs_f64(),
            d.illumination.total_variation(),
            d.reflectance.total_variation(),
            d.illumination.min(),
            d.illumination.max()
        );
        for t in &d.trace {
            println!(
                "  l={} k={} dI={:.4} dR={:.4} obj={:.6e} cg=({}, {})",
                t.outer,
                t.inner,
                t.rel_change_i,
                t.rel_change_r,
                t.objective,
                t.cg_iterations_i,
                t.cg_iterations_r
            );
        }
    }
    Ok(())
}

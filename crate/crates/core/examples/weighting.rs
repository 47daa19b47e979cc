//! Compares EMLV and ETV weighting on every image in a directory: total
//! variation of both components and the illumination range.
//!
//! ```text
//! cargo run --release -p star-core --example weighting -- corpus [eps_weight]
//! ```

use rayon::prelude::*;
use star_core::image::{load_rgb, rgb_to_hsv};
use star_core::{star_decompose, StarParams, WeightKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    let mut paths: Vec<_> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    let mut base = StarParams::default();
    if let Some(eps) = std::env::args().nth(2) {
        base.eps_weight = eps.parse()?;
    }
    let rows: Vec<String> = paths
        .par_iter()
        .map(|path| {
            let v = rgb_to_hsv(&load_rgb(path).unwrap()).value().clone();
            let mut line = format!(
                "{:<24} TV(V)={:8.2}",
                path.file_name().unwrap().to_string_lossy(),
                v.total_variation()
            );
            for kind in [WeightKind::Emlv, WeightKind::Etv] {
                let d = star_decompose(
                    &v,
                    &StarParams {
                        weight_kind: kind,
                        ..base
                    },
                )
                .unwrap();
                let i = &d.illumination;
                line += &format!(
                    "  {kind:?}: TV(I)={:8.3} TV(R)={:8.2} I in [{:.3}, {:.3}]",
                    i.total_variation(),
                    d.reflectance.total_variation(),
                    i.min(),
                    i.max()
                );
            }
            line
        })
        .collect();
    for row in rows {
        println!("{row}");
    }
    Ok(())
}

//! The alternating decomposition and its two applications.
//!
//! [`star_inner`] alternates exact least-squares updates of illumination and
//! reflectance under fixed weight maps until the relative change of either
//! falls below `eps_conv` or `max_inner_iters` updates have run.
//! [`star_decompose`] wraps it in the outer scheme that rebuilds the
//! structure map `S` from the current illumination and the texture map `T`
//! from the current reflectance between inner runs.

mod color;
mod params;

pub use color::{
    angular_error, color_correct, decompose_planes, estimate_illuminant, IlluminantEstimate,
};
pub use params::StarParams;

use std::io::Write;

use crate::error::{Result, StarError, Variable};
use crate::filters::{build_weight, forward_gradient, Directional};
use crate::image::{hsv_to_rgb, replace_value_channel, rgb_to_hsv, ImageGrid, RgbImage};
use crate::solver::{solve_subproblem, DiagonalWeights, GradientOperator};

/// One inner iteration (an illumination update followed by a reflectance
/// update).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerIteration {
    /// Outer stage; 0 is the run with the initial maps.
    pub outer: usize,
    /// Zero-based index within the stage.
    pub inner: usize,
    pub rel_change_i: f64,
    pub rel_change_r: f64,
    /// Objective after the illumination half-step.
    pub objective_after_i: f64,
    /// Objective after the full iteration.
    pub objective: f64,
    pub cg_iterations_i: usize,
    pub cg_iterations_r: usize,
}

impl InnerIteration {
    pub fn converged(&self, eps_conv: f64) -> bool {
        self.rel_change_i <= eps_conv || self.rel_change_r <= eps_conv
    }
}

/// Illumination and reflectance estimates with the convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub illumination: ImageGrid,
    pub reflectance: ImageGrid,
    pub trace: Vec<InnerIteration>,
    /// Objective at the start of each inner run, under that run's maps.
    pub stage_start_objectives: Vec<f64>,
}

impl Decomposition {
    /// Total inner iterations across all stages.
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn stages(&self) -> usize {
        self.stage_start_objectives.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.trace
            .last()
            .map(|t| t.objective)
            .or_else(|| self.stage_start_objectives.last().copied())
            .unwrap_or(0.0)
    }

    /// Trace records of one outer stage.
    pub fn stage_trace(&self, outer: usize) -> impl Iterator<Item = &InnerIteration> {
        self.trace.iter().filter(move |t| t.outer == outer)
    }

    /// `I ⊙ R`.
    pub fn reconstruction(&self) -> ImageGrid {
        self.illumination
            .zip_map(&self.reflectance, |i, r| i * r)
            .expect("components share dimensions")
    }

    /// CSV with header `outer,inner,rel_change_I,rel_change_R,objective`.
    pub fn write_trace_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "outer,inner,rel_change_I,rel_change_R,objective")?;
        for t in &self.trace {
            writeln!(
                sink,
                "{},{},{:e},{:e},{:e}",
                t.outer, t.inner, t.rel_change_i, t.rel_change_r, t.objective
            )?;
        }
        Ok(())
    }
}

fn weighted_gradient_energy(g: &ImageGrid, w: &Directional) -> f64 {
    let grad = forward_gradient(g);
    let dir = |d: &ImageGrid, w: &ImageGrid| -> f64 {
        d.as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(d, w)| (w * d).powi(2))
            .sum()
    };
    dir(&grad.x, &w.x) + dir(&grad.y, &w.y)
}

/// `‖O − I⊙R‖² + α‖S⊙∇I‖² + β‖T⊙∇R‖²`, both gradient norms summed over
/// the horizontal and vertical directions.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    observed: &ImageGrid,
    illumination: &ImageGrid,
    reflectance: &ImageGrid,
    structure: &Directional,
    texture: &Directional,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    observed.check_dims(illumination)?;
    observed.check_dims(reflectance)?;
    for w in [&structure.x, &structure.y, &texture.x, &texture.y] {
        observed.check_dims(w)?;
    }
    let data: f64 = observed
        .as_slice()
        .iter()
        .zip(illumination.as_slice())
        .zip(reflectance.as_slice())
        .map(|((o, i), r)| (o - i * r).powi(2))
        .sum();
    Ok(data
        + alpha * weighted_gradient_energy(illumination, structure)
        + beta * weighted_gradient_energy(reflectance, texture))
}

fn relative_change(next: &[f64], prev: &[f64], eps_div: f64) -> f64 {
    let diff: f64 = next
        .iter()
        .zip(prev)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let base: f64 = prev.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / (base + eps_div)
}

fn check_weights(observed: &ImageGrid, w: &Directional, name: &str) -> Result<()> {
    observed.check_dims(&w.x)?;
    observed.check_dims(&w.y)?;
    if w.x
        .as_slice()
        .iter()
        .chain(w.y.as_slice())
        .any(|&v| v <= 0.0)
    {
        return Err(StarError::InvalidInput(format!(
            "{name} weights must be strictly positive"
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_inner(
    observed: &ImageGrid,
    structure: &Directional,
    texture: &Directional,
    params: &StarParams,
    init_i: ImageGrid,
    init_r: ImageGrid,
    outer: usize,
    trace: &mut Vec<InnerIteration>,
) -> Result<(ImageGrid, ImageGrid, f64)> {
    let (h, w) = observed.dims();
    let op = GradientOperator::new(h, w);
    let o = observed.as_slice();
    let mut illum = init_i;
    let mut refl = init_r;
    let start = objective(
        observed,
        &illum,
        &refl,
        structure,
        texture,
        params.alpha,
        params.beta,
    )?;

    let annotate = |inner: usize, variable: Variable| {
        move |e: StarError| StarError::Stage {
            outer,
            inner,
            variable,
            source: Box::new(e),
        }
    };

    for k in 0..params.max_inner_iters {
        let weights_i = DiagonalWeights::from_factors(&refl, structure)?;
        let sol_i = solve_subproblem(
            op,
            &weights_i,
            refl.as_slice(),
            o,
            params.alpha,
            &params.solver,
            Some(illum.as_slice()),
        )
        .map_err(annotate(k, Variable::Illumination))?;
        let next_i = ImageGrid::from_raw_parts(h, w, sol_i.x);
        let objective_after_i = objective(
            observed,
            &next_i,
            &refl,
            structure,
            texture,
            params.alpha,
            params.beta,
        )?;

        let weights_r = DiagonalWeights::from_factors(&next_i, texture)?;
        let sol_r = solve_subproblem(
            op,
            &weights_r,
            next_i.as_slice(),
            o,
            params.beta,
            &params.solver,
            Some(refl.as_slice()),
        )
        .map_err(annotate(k, Variable::Reflectance))?;
        let next_r = ImageGrid::from_raw_parts(h, w, sol_r.x);

        let record = InnerIteration {
            outer,
            inner: k,
            rel_change_i: relative_change(next_i.as_slice(), illum.as_slice(), params.eps_div),
            rel_change_r: relative_change(next_r.as_slice(), refl.as_slice(), params.eps_div),
            objective_after_i,
            objective: objective(
                observed,
                &next_i,
                &next_r,
                structure,
                texture,
                params.alpha,
                params.beta,
            )?,
            cg_iterations_i: sol_i.iterations,
            cg_iterations_r: sol_r.iterations,
        };
        trace.push(record);
        illum = next_i;
        refl = next_r;
        if record.converged(params.eps_conv) {
            break;
        }
    }
    Ok((illum, refl, start))
}

/// Alternating illumination/reflectance updates under fixed maps `S`, `T`,
/// starting from `(init_i, init_r)`.
pub fn star_inner(
    observed: &ImageGrid,
    structure: &Directional,
    texture: &Directional,
    params: &StarParams,
    init_i: &ImageGrid,
    init_r: &ImageGrid,
) -> Result<Decomposition> {
    params.validate()?;
    check_weights(observed, structure, "structure")?;
    check_weights(observed, texture, "texture")?;
    observed.check_dims(init_i)?;
    observed.check_dims(init_r)?;
    let mut trace = Vec::new();
    let (illumination, reflectance, start) = run_inner(
        observed,
        structure,
        texture,
        params,
        init_i.clone(),
        init_r.clone(),
        0,
        &mut trace,
    )?;
    Ok(Decomposition {
        illumination,
        reflectance,
        trace,
        stage_start_objectives: vec![start],
    })
}

/// Structure map from the illumination and texture map from the
/// reflectance.
pub fn stage_weights(
    illumination: &ImageGrid,
    reflectance: &ImageGrid,
    params: &StarParams,
) -> Result<(Directional, Directional)> {
    let s = build_weight(
        illumination,
        params.gamma_s,
        params.eps_weight,
        params.window,
        params.weight_kind,
    )?;
    let t = build_weight(
        reflectance,
        params.gamma_t,
        params.eps_weight,
        params.window,
        params.weight_kind,
    )?;
    Ok((s, t))
}

/// Full decomposition of a plane with values in `[0, 1]`.
///
/// Both components start at `V^0.5`. A first inner run uses maps built from
/// that start; then `outer_iters` times the maps are rebuilt from the
/// current estimates and the inner run is repeated, warm-started. The trace
/// therefore spans stages `0..=outer_iters`.
pub fn star_decompose(value: &ImageGrid, params: &StarParams) -> Result<Decomposition> {
    params.validate()?;
    if let Some(i) = value
        .as_slice()
        .iter()
        .position(|v| !(0.0..=1.0).contains(v))
    {
        return Err(StarError::InvalidInput(format!(
            "value {} at pixel {i} outside [0, 1]",
            value.as_slice()[i]
        )));
    }
    let mut illum = value.map(f64::sqrt);
    let mut refl = illum.clone();
    let mut trace = Vec::new();
    let mut starts = Vec::with_capacity(params.outer_iters + 1);
    for stage in 0..=params.outer_iters {
        let (s, t) = stage_weights(&illum, &refl, params)?;
        let (i, r, start) = run_inner(value, &s, &t, params, illum, refl, stage, &mut trace)?;
        illum = i;
        refl = r;
        starts.push(start);
    }
    Ok(Decomposition {
        illumination: illum,
        reflectance: refl,
        trace,
        stage_start_objectives: starts,
    })
}

/// Enhanced image together with the decomposition that produced it.
#[derive(Debug, Clone)]
pub struct Enhancement {
    pub image: RgbImage,
    /// The enhanced value plane, before recombination.
    pub value: ImageGrid,
    pub decomposition: Decomposition,
}

/// `R ⊙ I^(1/gamma_e)` clamped to `[0, 1]`; negative illumination counts as 0.
pub fn recombine(decomposition: &Decomposition, gamma_e: f64) -> ImageGrid {
    let inv = 1.0 / gamma_e;
    decomposition
        .illumination
        .zip_map(&decomposition.reflectance, |i, r| r * i.max(0.0).powf(inv))
        .expect("components share dimensions")
        .clamp01()
}

/// Low-light enhancement on the HSV value channel. Hue and saturation are
/// kept.
pub fn enhance_lowlight(img: &RgbImage, params: &StarParams, gamma_e: f64) -> Result<Enhancement> {
    if !(gamma_e > 0.0 && gamma_e.is_finite()) {
        return Err(StarError::InvalidParameter(format!(
            "gamma_e must be positive, got {gamma_e}"
        )));
    }
    let hsv = rgb_to_hsv(img);
    let decomposition = star_decompose(hsv.value(), params)?;
    let value = recombine(&decomposition, gamma_e);
    let image = hsv_to_rgb(&replace_value_channel(&hsv, &value)?)?;
    Ok(Enhancement {
        image,
        value,
        decomposition,
    })
}

#[cfg(test)]
mod tests;

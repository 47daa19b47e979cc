use crate::error::{Result, StarError};
use crate::filters::{WeightKind, WeightParams, WindowSpec};
use crate::solver::SolverSettings;

/// Every knob of the decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarParams {
    /// Weight of the illumination smoothness term.
    pub alpha: f64,
    /// Weight of the reflectance smoothness term.
    pub beta: f64,
    /// Structure-map exponent (> 1).
    pub gamma_s: f64,
    /// Texture-map exponent (< 1).
    pub gamma_t: f64,
    /// Added to denominators of relative changes.
    pub eps_div: f64,
    /// Added to the exponentiated maps before taking reciprocals.
    pub eps_weight: f64,
    /// Relative-change threshold that ends an inner run.
    pub eps_conv: f64,
    /// `K`: inner iteration budget per stage.
    pub max_inner_iters: usize,
    /// `L`: number of weight refreshes after the initial run.
    pub outer_iters: usize,
    pub window: WindowSpec,
    pub weight_kind: WeightKind,
    pub solver: SolverSettings,
}

impl Default for StarParams {
    fn default() -> Self {
        let weights = WeightParams::default();
        Self {
            alpha: 1e-3,
            beta: 1e-4,
            gamma_s: weights.gamma_s,
            gamma_t: weights.gamma_t,
            eps_div: 1e-8,
            eps_weight: weights.eps_weight,
            eps_conv: 1e-2,
            max_inner_iters: 20,
            outer_iters: 4,
            window: WindowSpec::default(),
            weight_kind: WeightKind::Emlv,
            solver: SolverSettings::default(),
        }
    }
}

impl StarParams {
    pub fn weight_params(&self) -> WeightParams {
        WeightParams {
            gamma_s: self.gamma_s,
            gamma_t: self.gamma_t,
            eps_weight: self.eps_weight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(StarError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("eps_conv", self.eps_conv)?;
        if !(self.eps_div >= 0.0 && self.eps_div.is_finite()) {
            return Err(StarError::InvalidParameter(format!(
                "eps_div must be non-negative, got {}",
                self.eps_div
            )));
        }
        if self.max_inner_iters == 0 {
            return Err(StarError::InvalidParameter(
                "inner iteration count must be at least 1".into(),
            ));
        }
        if self.outer_iters == 0 {
            return Err(StarError::InvalidParameter(
                "outer iteration count must be at least 1".into(),
            ));
        }
        self.weight_params().validate()?;
        self.solver.validate()
    }
}

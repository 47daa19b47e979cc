//! Normal-equation solves for the two alternating subproblems.
//!
//! With `x` the unknown plane (illumination or reflectance), `f` the other
//! plane held fixed and `o` the observation, each half-step minimizes
//!
//! ```text
//! ‖o − f⊙x‖² + λ (‖wx ⊙ Gx x‖² + ‖wy ⊙ Gy x‖²)
//! ```
//!
//! whose minimizer satisfies
//!
//! ```text
//! (diag(f²) + λ Gᵀ diag(w²) G + τ I) x = f ⊙ o.
//! ```
//!
//! The system is applied matrix-free in `O(height × width)` and solved with
//! Jacobi-preconditioned conjugate gradients. A dense Cholesky path exists
//! for small grids.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StarError};
use crate::filters::Directional;
use crate::image::ImageGrid;

/// Forward-difference operator pair `(Gx, Gy)` on a row-major grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientOperator {
    height: usize,
    width: usize,
}

fn check_len(what: &str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(StarError::DimensionMismatch {
            expected: format!("{what} of length {expected}"),
            actual: format!("length {actual}"),
        })
    }
}

impl GradientOperator {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        Self { height, width }
    }

    pub fn for_grid(g: &ImageGrid) -> Self {
        Self::new(g.height(), g.width())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(Gx v, Gy v)`; matches [`crate::filters::forward_gradient`].
    pub fn apply(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("vector", self.len(), v.len())?;
        let (h, w) = (self.height, self.width);
        let mut gx = vec![0.0; v.len()];
        let mut gy = vec![0.0; v.len()];
        for r in 0..h {
            let row = r * w;
            for c in 0..w - 1 {
                gx[row + c] = v[row + c + 1] - v[row + c];
            }
            if r + 1 < h {
                for c in 0..w {
                    gy[row + c] = v[row + w + c] - v[row + c];
                }
            }
        }
        Ok((gx, gy))
    }

    /// `Gxᵀ gx + Gyᵀ gy`.
    pub fn apply_transpose(&self, gx: &[f64], gy: &[f64]) -> Result<Vec<f64>> {
        check_len("x component", self.len(), gx.len())?;
        check_len("y component", self.len(), gy.len())?;
        let (h, w) = (self.height, self.width);
        let mut out = vec![0.0; self.len()];
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                let mut acc = 0.0;
                if c + 1 < w {
                    acc -= gx[p];
                }
                if c > 0 {
                    acc += gx[p - 1];
                }
                if r + 1 < h {
                    acc -= gy[p];
                }
                if r > 0 {
                    acc += gy[p - w];
                }
                out[p] = acc;
            }
        }
        Ok(out)
    }
}

/// Squared diagonals of one subproblem: `f²` on the data term and `w²` per
/// direction on the regularizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights {
    data_diag: ImageGrid,
    reg_diag_x: ImageGrid,
    reg_diag_y: ImageGrid,
}

impl DiagonalWeights {
    /// Squares `fixed_factor` and the two weight planes.
    pub fn from_factors(fixed_factor: &ImageGrid, weights: &Directional) -> Result<Self> {
        fixed_factor.check_dims(&weights.x)?;
        Self::from_squared(
            fixed_factor.map(|v| v * v),
            weights.x.map(|v| v * v),
            weights.y.map(|v| v * v),
        )
    }

    /// Takes already squared diagonals.
    pub fn from_squared(
        data_diag: ImageGrid,
        reg_diag_x: ImageGrid,
        reg_diag_y: ImageGrid,
    ) -> Result<Self> {
        data_diag.check_dims(&reg_diag_x)?;
        data_diag.check_dims(&reg_diag_y)?;
        if let Some(i) = data_diag.as_slice().iter().position(|&v| v < 0.0) {
            return Err(StarError::InvalidInput(format!(
                "negative data diagonal at pixel {i}"
            )));
        }
        for reg in [&reg_diag_x, &reg_diag_y] {
            if let Some(i) = reg.as_slice().iter().position(|&v| v <= 0.0) {
                return Err(StarError::InvalidInput(format!(
                    "regularizer diagonal must be positive, pixel {i} is {}",
                    reg.as_slice()[i]
                )));
            }
        }
        Ok(Self {
            data_diag,
            reg_diag_x,
            reg_diag_y,
        })
    }

    pub fn data_diag(&self) -> &ImageGrid {
        &self.data_diag
    }

    pub fn reg_diag_x(&self) -> &ImageGrid {
        &self.reg_diag_x
    }

    pub fn reg_diag_y(&self) -> &ImageGrid {
        &self.reg_diag_y
    }

    pub fn dims(&self) -> (usize, usize) {
        self.data_diag.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    #[default]
    ConjugateGradient,
    DenseDirect,
}

/// Preconditioner for the conjugate gradient path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    Jacobi,
    /// Zero fill-in incomplete Cholesky of the 5-point stencil, rebuilt on
    /// every solve.
    IncompleteCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub method: SolveMethod,
    pub preconditioner: Preconditioner,
    /// When a Jacobi solve exhausts `cg_max_iters`, continue from its last
    /// iterate with incomplete Cholesky for another `cg_max_iters`.
    pub ic_fallback: bool,
    /// Relative residual `‖Ax − b‖ / ‖b‖` at which CG stops.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Ridge added to the diagonal.
    pub tikhonov: f64,
    /// Largest pixel count accepted by [`SolveMethod::DenseDirect`].
    pub dense_max_pixels: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            method: SolveMethod::ConjugateGradient,
            preconditioner: Preconditioner::Jacobi,
            ic_fallback: true,
            cg_tol: 1e-6,
            cg_max_iters: 10_000,
            tikhonov: 1e-12,
            dense_max_pixels: 64 * 64,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(StarError::InvalidParameter(format!(
                "cg_tol must lie in (0, 1), got {}",
                self.cg_tol
            )));
        }
        if self.cg_max_iters == 0 {
            return Err(StarError::InvalidParameter(
                "cg_max_iters must be positive".into(),
            ));
        }
        if !(self.tikhonov >= 0.0 && self.tikhonov.is_finite()) {
            return Err(StarError::InvalidParameter(format!(
                "tikhonov must be non-negative, got {}",
                self.tikhonov
            )));
        }
        Ok(())
    }
}

/// The matrix `diag(f²) + λ Gᵀ diag(w²) G + τ I`, applied without assembly.
#[derive(Debug, Clone, Copy)]
pub struct NormalMatrix<'a> {
    op: GradientOperator,
    weights: &'a DiagonalWeights,
    lambda: f64,
    tikhonov: f64,
}

impl<'a> NormalMatrix<'a> {
    pub fn new(
        op: GradientOperator,
        weights: &'a DiagonalWeights,
        lambda: f64,
        tikhonov: f64,
    ) -> Result<Self> {
        if weights.dims() != (op.height, op.width) {
            return Err(StarError::DimensionMismatch {
                expected: format!("{}x{}", op.height, op.width),
                actual: format!("{}x{}", weights.dims().0, weights.dims().1),
            });
        }
        Ok(Self {
            op,
            weights,
            lambda,
            tikhonov,
        })
    }

    pub fn len(&self) -> usize {
        self.op.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `out = A x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (h, w) = (self.op.height, self.op.width);
        let d = self.weights.data_diag.as_slice();
        let sx = self.weights.reg_diag_x.as_slice();
        let sy = self.weights.reg_diag_y.as_slice();
        let (lambda, tik) = (self.lambda, self.tikhonov);
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                let xp = x[p];
                let mut reg = 0.0;
                if c + 1 < w {
                    reg += sx[p] * (xp - x[p + 1]);
                }
                if c > 0 {
                    reg += sx[p - 1] * (xp - x[p - 1]);
                }
                if r + 1 < h {
                    reg += sy[p] * (xp - x[p + w]);
                }
                if r > 0 {
                    reg += sy[p - w] * (xp - x[p - w]);
                }
                out[p] = (d[p] + tik) * xp + lambda * reg;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    /// Main diagonal of the matrix.
    pub fn diagonal(&self) -> Vec<f64> {
        let (h, w) = (self.op.height, self.op.width);
        let d = self.weights.data_diag.as_slice();
        let sx = self.weights.reg_diag_x.as_slice();
        let sy = self.weights.reg_diag_y.as_slice();
        let mut diag = vec![0.0; self.len()];
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                let mut reg = 0.0;
                if c + 1 < w {
                    reg += sx[p];
                }
                if c > 0 {
                    reg += sx[p - 1];
                }
                if r + 1 < h {
                    reg += sy[p];
                }
                if r > 0 {
                    reg += sy[p - w];
                }
                diag[p] = d[p] + self.tikhonov + self.lambda * reg;
            }
        }
        diag
    }

    /// Dense copy assembled by applying the operator to each basis vector.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

enum Precond {
    Jacobi(Vec<f64>),
    /// `M = (E + L) E⁻¹ (E + Lᵀ)` with `L` the strict lower part of `A`.
    Ic {
        pivots: Vec<f64>,
        west: Vec<f64>,
        north: Vec<f64>,
        width: usize,
    },
}

impl Precond {
    fn jacobi(a: &NormalMatrix<'_>) -> Self {
        Precond::Jacobi(
            a.diagonal()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        )
    }

    fn incomplete_cholesky(a: &NormalMatrix<'_>) -> Self {
        let (h, w) = (a.op.height, a.op.width);
        let diag = a.diagonal();
        let sx = a.weights.reg_diag_x.as_slice();
        let sy = a.weights.reg_diag_y.as_slice();
        let mut west = vec![0.0; h * w];
        let mut north = vec![0.0; h * w];
        let mut pivots = vec![0.0; h * w];
        for r in 0..h {
            for c in 0..w {
                let p = r * w + c;
                let mut e = diag[p];
                if c > 0 {
                    west[p] = -a.lambda * sx[p - 1];
                    e -= west[p] * west[p] / pivots[p - 1];
                }
                if r > 0 {
                    north[p] = -a.lambda * sy[p - w];
                    e -= north[p] * north[p] / pivots[p - w];
                }
                // M-matrix pivots stay positive in exact arithmetic
                pivots[p] = if e > 0.0 && e.is_finite() {
                    e
                } else {
                    diag[p].max(f64::MIN_POSITIVE)
                };
            }
        }
        Precond::Ic {
            pivots,
            west,
            north,
            width: w,
        }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(inv) => {
                for ((zi, ri), mi) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * mi;
                }
            }
            Precond::Ic {
                pivots,
                west,
                north,
                width,
            } => {
                let (n, w) = (r.len(), *width);
                for p in 0..n {
                    let mut v = r[p];
                    if p % w > 0 {
                        v -= west[p] * z[p - 1];
                    }
                    if p >= w {
                        v -= north[p] * z[p - w];
                    }
                    z[p] = v / pivots[p];
                }
                for p in (0..n).rev() {
                    let mut v = pivots[p] * z[p];
                    if p % w + 1 < w {
                        v -= west[p + 1] * z[p + 1];
                    }
                    if p + w < n {
                        v -= north[p + w] * z[p + w];
                    }
                    z[p] = v / pivots[p];
                }
            }
        }
    }
}

/// Result of one subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// CG iterations; zero for the dense path.
    pub iterations: usize,
    /// Final `‖Ax − b‖ / ‖b‖`.
    pub relative_residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual_into(a: &NormalMatrix<'_>, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.apply_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Preconditioned CG. On exhausting `max_iters` the last iterate is
/// returned alongside the failure so a caller can continue from it.
fn solve_cg(
    a: &NormalMatrix<'_>,
    b: &[f64],
    init: Vec<f64>,
    precond: &Precond,
    tol: f64,
    max_iters: usize,
) -> std::result::Result<Solution, (StarError, Vec<f64>)> {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = init;
    if b_norm == 0.0 {
        // SPD system with zero right-hand side.
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(Solution {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let threshold = tol * b_norm;

    let mut r = vec![0.0; n];
    residual_into(a, &x, b, &mut r);
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    loop {
        let r_norm = norm(&r);
        if r_norm <= threshold {
            // The recurred residual drifts from the true one; confirm before
            // accepting and restart from the true residual otherwise.
            residual_into(a, &x, b, &mut r);
            let true_norm = norm(&r);
            if true_norm <= threshold {
                return Ok(Solution {
                    x,
                    iterations,
                    relative_residual: true_norm / b_norm,
                });
            }
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if iterations >= max_iters {
            residual_into(a, &x, b, &mut r);
            return Err((
                StarError::SolverFailure {
                    iterations,
                    residual: norm(&r) / b_norm,
                },
                x,
            ));
        }
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err((StarError::Singular, x));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        precond.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}

fn solve_pcg(
    a: &NormalMatrix<'_>,
    b: &[f64],
    init: Vec<f64>,
    settings: &SolverSettings,
) -> Result<Solution> {
    let (tol, max_iters) = (settings.cg_tol, settings.cg_max_iters);
    if settings.preconditioner == Preconditioner::IncompleteCholesky {
        return solve_cg(a, b, init, &Precond::incomplete_cholesky(a), tol, max_iters)
            .map_err(|(e, _)| e);
    }
    match solve_cg(a, b, init, &Precond::jacobi(a), tol, max_iters) {
        Err((StarError::SolverFailure { iterations, .. }, x)) if settings.ic_fallback => {
            solve_cg(a, b, x, &Precond::incomplete_cholesky(a), tol, max_iters)
                .map(|s| Solution {
                    iterations: s.iterations + iterations,
                    ..s
                })
                .map_err(|(e, _)| match e {
                    StarError::SolverFailure {
                        iterations: more,
                        residual,
                    } => StarError::SolverFailure {
                        iterations: iterations + more,
                        residual,
                    },
                    other => other,
                })
        }
        other => other.map_err(|(e, _)| e),
    }
}

fn solve_dense(a: &NormalMatrix<'_>, b: &[f64], limit: usize) -> Result<Solution> {
    let n = b.len();
    if n > limit {
        return Err(StarError::SizeCapExceeded { size: n, limit });
    }
    let dense = a.to_dense();
    let chol = dense.cholesky().ok_or(StarError::Singular)?;
    let x = chol.solve(&DVector::from_column_slice(b));
    let x: Vec<f64> = x.iter().copied().collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StarError::Singular);
    }
    let mut r = vec![0.0; n];
    residual_into(a, &x, b, &mut r);
    let b_norm = norm(b);
    let relative_residual = if b_norm > 0.0 {
        norm(&r) / b_norm
    } else {
        norm(&r)
    };
    Ok(Solution {
        x,
        iterations: 0,
        relative_residual,
    })
}

/// Solves `(diag(f²) + λ Gᵀ diag(w²) G + τ I) x = f ⊙ o`.
///
/// `init` is the CG starting point (the previous iterate when warm
/// starting); zeros when absent.
pub fn solve_subproblem(
    op: GradientOperator,
    weights: &DiagonalWeights,
    fixed_factor: &[f64],
    observation: &[f64],
    lambda: f64,
    settings: &SolverSettings,
    init: Option<&[f64]>,
) -> Result<Solution> {
    settings.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(StarError::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = op.len();
    check_len("fixed factor", n, fixed_factor.len())?;
    check_len("observation", n, observation.len())?;
    let a = NormalMatrix::new(op, weights, lambda, settings.tikhonov)?;
    let b: Vec<f64> = fixed_factor
        .iter()
        .zip(observation)
        .map(|(f, o)| f * o)
        .collect();
    let solution = match settings.method {
        SolveMethod::ConjugateGradient => {
            let x0 = match init {
                Some(v) => {
                    check_len("initial guess", n, v.len())?;
                    v.to_vec()
                }
                None => vec![0.0; n],
            };
            solve_pcg(&a, &b, x0, settings)?
        }
        SolveMethod::DenseDirect => solve_dense(&a, &b, settings.dense_max_pixels)?,
    };
    if solution.x.iter().any(|v| !v.is_finite()) {
        return Err(StarError::Singular);
    }
    Ok(solution)
}

/// `‖o − f⊙x‖² + λ Σ w²⊙(Gx)²` with the squared diagonals in `weights`.
pub fn subproblem_objective(
    op: GradientOperator,
    weights: &DiagonalWeights,
    fixed_factor: &[f64],
    observation: &[f64],
    lambda: f64,
    x: &[f64],
) -> Result<f64> {
    let n = op.len();
    check_len("fixed factor", n, fixed_factor.len())?;
    check_len("observation", n, observation.len())?;
    let (gx, gy) = op.apply(x)?;
    let data: f64 = observation
        .iter()
        .zip(fixed_factor)
        .zip(x)
        .map(|((o, f), xi)| (o - f * xi).powi(2))
        .sum();
    let reg: f64 = gx
        .iter()
        .zip(weights.reg_diag_x.as_slice())
        .chain(gy.iter().zip(weights.reg_diag_y.as_slice()))
        .map(|(g, s)| s * g * g)
        .sum();
    Ok(data + lambda * reg)
}

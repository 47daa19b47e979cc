//! Brute-force references for the test suites: explicit dense assembly of
//! the normal equations, a textbook Cholesky solve, plain gradient descent
//! and the analytic gradient of the full objective.
//!
//! Nothing here shares code with [`crate::solver`]; the gradient matrices are
//! built entry by entry from the forward-difference definition.

use crate::error::{Result, StarError};
use crate::filters::Directional;
use crate::image::ImageGrid;
use crate::solver::{DiagonalWeights, GradientOperator};

/// Largest system the oracle will build (a 64×64 grid).
pub const MAX_UNKNOWNS: usize = 64 * 64;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c] += self.at(r, c) * v[r];
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in 0..r {
                worst = worst.max((self.at(r, c) - self.at(c, r)).abs());
            }
        }
        worst
    }
}

/// `matrix · x = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
}

impl DenseSystem {
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r: f64 = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let b: f64 = self.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if b > 0.0 {
            r / b
        } else {
            r
        }
    }
}

/// Explicit `(Gx, Gy)` for a `height × width` grid: row `p` of `Gx` holds
/// `−1` at `p` and `+1` at `p + 1` unless `p` is in the last column, where
/// the row is zero; `Gy` likewise with `p + width` and the last row.
pub fn dense_gradient_matrices(height: usize, width: usize) -> (DenseMatrix, DenseMatrix) {
    let n = height * width;
    let mut gx = DenseMatrix::zeros(n, n);
    let mut gy = DenseMatrix::zeros(n, n);
    for r in 0..height {
        for c in 0..width {
            let p = r * width + c;
            if c + 1 < width {
                *gx.at_mut(p, p) = -1.0;
                *gx.at_mut(p, p + 1) = 1.0;
            }
            if r + 1 < height {
                *gy.at_mut(p, p) = -1.0;
                *gy.at_mut(p, p + width) = 1.0;
            }
        }
    }
    (gx, gy)
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_UNKNOWNS {
        Err(StarError::SizeCapExceeded {
            size: n,
            limit: MAX_UNKNOWNS,
        })
    } else {
        Ok(())
    }
}

/// `diag(f²) + λ (Gxᵀ diag(wx²) Gx + Gyᵀ diag(wy²) Gy) + τ I` and `f ⊙ o`.
pub fn assemble_dense(
    op: &GradientOperator,
    weights: &DiagonalWeights,
    fixed_factor: &[f64],
    observation: &[f64],
    lambda: f64,
    tikhonov: f64,
) -> Result<DenseSystem> {
    let n = op.len();
    check_cap(n)?;
    if fixed_factor.len() != n
        || observation.len() != n
        || weights.dims() != (op.height(), op.width())
    {
        return Err(StarError::DimensionMismatch {
            expected: format!("{n} unknowns"),
            actual: format!("{} / {}", fixed_factor.len(), observation.len()),
        });
    }
    let (gx, gy) = dense_gradient_matrices(op.height(), op.width());
    let mut m = DenseMatrix::zeros(n, n);
    for (g, reg) in [
        (&gx, weights.reg_diag_x().as_slice()),
        (&gy, weights.reg_diag_y().as_slice()),
    ] {
        for k in 0..n {
            let nz: Vec<(usize, f64)> = (0..n)
                .map(|j| (j, g.at(k, j)))
                .filter(|&(_, v)| v != 0.0)
                .collect();
            for &(i, gi) in &nz {
                for &(j, gj) in &nz {
                    *m.at_mut(i, j) += lambda * reg[k] * gi * gj;
                }
            }
        }
    }
    for i in 0..n {
        *m.at_mut(i, i) += fixed_factor[i] * fixed_factor[i] + tikhonov;
    }
    let rhs = fixed_factor
        .iter()
        .zip(observation)
        .map(|(f, o)| f * o)
        .collect();
    Ok(DenseSystem { matrix: m, rhs })
}

/// Cholesky factorization and two triangular solves.
pub fn dense_solve(sys: &DenseSystem) -> Result<Vec<f64>> {
    let n = sys.matrix.rows;
    if sys.matrix.cols != n || sys.rhs.len() != n {
        return Err(StarError::DimensionMismatch {
            expected: format!("square system of {n}"),
            actual: format!(
                "{}x{} with rhs {}",
                sys.matrix.rows,
                sys.matrix.cols,
                sys.rhs.len()
            ),
        });
    }
    check_cap(n)?;
    let a = &sys.matrix;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.at(j, j);
        for k in 0..j {
            d -= l.at(j, k) * l.at(j, k);
        }
        if !(d > 0.0) {
            return Err(StarError::Singular);
        }
        let ljj = d.sqrt();
        *l.at_mut(j, j) = ljj;
        for i in j + 1..n {
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k);
            }
            *l.at_mut(i, j) = s / ljj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = sys.rhs[i];
        for k in 0..i {
            s -= l.at(i, k) * y[k];
        }
        y[i] = s / l.at(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.at(k, i) * x[k];
        }
        x[i] = s / l.at(i, i);
    }
    Ok(x)
}

/// Fixed-step gradient descent on a smooth objective.
///
/// `eval` returns the objective and its gradient. Stops once the gradient
/// norm falls to `1e-6` of its initial value. Fails if the objective rises
/// for 100 consecutive steps or the step budget runs out first.
pub fn descent_minimize<F>(eval: F, init: &[f64], steps: usize, rate: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = init.to_vec();
    let (mut value, mut grad) = eval(&x);
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = 1e-6 * norm(&grad);
    let mut rising = 0;
    for _ in 0..steps {
        if norm(&grad) <= target {
            return Ok(x);
        }
        for (xi, gi) in x.iter_mut().zip(&grad) {
            *xi -= rate * gi;
        }
        let (next_value, next_grad) = eval(&x);
        rising = if next_value > value { rising + 1 } else { 0 };
        if rising >= 100 || !next_value.is_finite() {
            return Err(StarError::InvalidInput("gradient descent diverged".into()));
        }
        value = next_value;
        grad = next_grad;
    }
    if norm(&grad) <= target {
        Ok(x)
    } else {
        Err(StarError::SolverFailure {
            iterations: steps,
            residual: norm(&grad) / (target * 1e6),
        })
    }
}

/// Value and gradient of `‖o − f⊙x‖² + λ Σ w²(Gx)²` using the explicit
/// gradient matrices.
pub fn subproblem_value_and_gradient(
    gx: &DenseMatrix,
    gy: &DenseMatrix,
    weights: &DiagonalWeights,
    fixed_factor: &[f64],
    observation: &[f64],
    lambda: f64,
    x: &[f64],
) -> (f64, Vec<f64>) {
    let residual: Vec<f64> = observation
        .iter()
        .zip(fixed_factor)
        .zip(x)
        .map(|((o, f), xi)| o - f * xi)
        .collect();
    let mut value: f64 = residual.iter().map(|r| r * r).sum();
    let mut grad: Vec<f64> = residual
        .iter()
        .zip(fixed_factor)
        .map(|(r, f)| -2.0 * f * r)
        .collect();
    for (g, reg) in [
        (gx, weights.reg_diag_x().as_slice()),
        (gy, weights.reg_diag_y().as_slice()),
    ] {
        let d = g.mul_vec(x);
        value += lambda * d.iter().zip(reg).map(|(d, s)| s * d * d).sum::<f64>();
        let weighted: Vec<f64> = d
            .iter()
            .zip(reg)
            .map(|(d, s)| 2.0 * lambda * s * d)
            .collect();
        for (gi, ti) in grad.iter_mut().zip(g.transpose_mul_vec(&weighted)) {
            *gi += ti;
        }
    }
    (value, grad)
}

/// Analytic gradients of the full objective with respect to illumination
/// and reflectance.
pub fn objective_gradient(
    observed: &ImageGrid,
    illumination: &ImageGrid,
    reflectance: &ImageGrid,
    structure: &Directional,
    texture: &Directional,
    alpha: f64,
    beta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (gx, gy) = dense_gradient_matrices(observed.height(), observed.width());
    let o = observed.as_slice();
    let i = illumination.as_slice();
    let r = reflectance.as_slice();
    let residual: Vec<f64> = o
        .iter()
        .zip(i)
        .zip(r)
        .map(|((o, i), r)| o - i * r)
        .collect();
    let mut grad_i: Vec<f64> = residual.iter().zip(r).map(|(e, r)| -2.0 * e * r).collect();
    let mut grad_r: Vec<f64> = residual.iter().zip(i).map(|(e, i)| -2.0 * e * i).collect();
    let add_reg = |grad: &mut Vec<f64>, v: &[f64], w: &Directional, lambda: f64| {
        for (g, plane) in [(&gx, &w.x), (&gy, &w.y)] {
            let d = g.mul_vec(v);
            let weighted: Vec<f64> = d
                .iter()
                .zip(plane.as_slice())
                .map(|(d, w)| 2.0 * lambda * w * w * d)
                .collect();
            for (gi, ti) in grad.iter_mut().zip(g.transpose_mul_vec(&weighted)) {
                *gi += ti;
            }
        }
    };
    add_reg(&mut grad_i, i, structure, alpha);
    add_reg(&mut grad_r, r, texture, beta);
    (grad_i, grad_r)
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

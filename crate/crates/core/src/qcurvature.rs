//! Conformal Codazzi Q-curvature `Q = −Δ̃^{n/2} log t|_M` and its total.
//!
//! For the scale `τ = e^{−Υ̃} ξ⁰` we never differentiate a logarithm
//! numerically: `∂ log τ = (1/ξ⁰, 0, 0, 0) − ∂Υ̃`.

use crate::ambient::AmbientMetric;
use crate::error::{Error, Result};
use crate::field::{Field, DIM};
use crate::gjms::{solve_log_extension, LogExtension};
use crate::poly::Poly;

/// `log τ` for a projective scale, held through its gradient and Laplacian.
#[derive(Clone, Debug)]
pub struct LogScale {
    upsilon: Option<Vec<f64>>,
    grad: Vec<Field>,
    lap: Field,
}

impl LogScale {
    /// The flat affine scale `τ = ξ⁰`.
    pub fn flat(metric: &AmbientMetric) -> Result<Self> {
        let grad = Self::flat_gradient(metric)?;
        let lap = metric.laplacian_from_gradient(&grad)?;
        Ok(LogScale {
            upsilon: None,
            grad,
            lap,
        })
    }

    fn flat_gradient(metric: &AmbientMetric) -> Result<Vec<Field>> {
        let c = metric.rho().collar();
        let mut grad = vec![Field::from_poly_with_weight(
            c,
            Poly::monomial(vec![-1, 0, 0, 0], 1.0),
            -1,
        )?];
        for _ in 1..DIM {
            grad.push(Field::from_poly_with_weight(c, Poly::zero(DIM), -1)?);
        }
        Ok(grad)
    }

    /// `τ = e^{−Υ} ξ⁰` with `Υ` extended constant along rays.
    pub fn rescaled(metric: &AmbientMetric, upsilon: &[f64]) -> Result<Self> {
        let ext = Field::ray_constant(metric.rho().collar(), upsilon, 0)?;
        Self::with_extension(metric, &ext)
    }

    /// `τ = e^{−Υ̃} ξ⁰` for a given weight-0 extension `Υ̃`.
    pub fn with_extension(metric: &AmbientMetric, ext: &Field) -> Result<Self> {
        if ext.weight() != 0 {
            return Err(Error::WeightMismatch(ext.weight(), 0));
        }
        let flat = Self::flat_gradient(metric)?;
        let du = ext.ambient_derivative()?;
        let grad: Vec<Field> = flat
            .iter()
            .zip(&du)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<_>>()?;
        let lap = metric.laplacian_from_gradient(&grad)?;
        Ok(LogScale {
            upsilon: Some(ext.boundary().to_vec()),
            grad,
            lap,
        })
    }

    pub fn upsilon(&self) -> Option<&[f64]> {
        self.upsilon.as_deref()
    }

    /// `∂_I log τ`, weight −1.
    pub fn gradient(&self) -> &[Field] {
        &self.grad
    }

    /// `Δ̃ log τ`, weight −2.
    pub fn laplacian(&self) -> &Field {
        &self.lap
    }
}

/// Q-curvature on the grid together with its total.
#[derive(Clone, Debug)]
pub struct QCurvature {
    pub values: Vec<f64>,
    pub total: f64,
}

/// `Q = −Δ̃ log τ|_M` (n = 2) as chart values of a density of weight −2.
pub fn q_curvature(
    metric: &AmbientMetric,
    scale: &LogScale,
    flat_volume: &[f64],
) -> Result<QCurvature> {
    let values: Vec<f64> = scale.laplacian().boundary().iter().map(|v| -v).collect();
    let total = total_q(metric, &values, flat_volume)?;
    Ok(QCurvature { values, total })
}

/// Integral of a weight −n density given by chart values: `∫_M Q vol_h`
/// with `h` the affine metric of the flat scale (the pairing is scale-free).
pub fn total_q(metric: &AmbientMetric, q: &[f64], flat_volume: &[f64]) -> Result<f64> {
    let grid = metric.rho().collar().grid();
    if q.len() != grid.len() || flat_volume.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let w: Vec<f64> = q.iter().zip(flat_volume).map(|(a, b)| a * b).collect();
    Ok(grid.integrate(&w))
}

/// `2B|_M` from `Δ̃(log t + A + B ρ̄ log|ρ|) = O(ρ̄^K)`, with the extension data.
pub fn q_from_log_extension(
    metric: &AmbientMetric,
    scale: &LogScale,
) -> Result<(Vec<f64>, LogExtension)> {
    let c = metric.rho().collar();
    let a0 = Field::zero(c, 0);
    let ext = solve_log_extension(metric, scale, Some(scale.laplacian()), a0, 1)?;
    Ok((ext.b.boundary().iter().map(|v| 2.0 * v).collect(), ext))
}

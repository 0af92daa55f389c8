//! The two nonlocal velocity laws: the chemotactic gradient `v = grad c`
//! with `-Delta c = u`, and the Biot-Savart law `v = grad^perp Psi` with
//! `Delta Psi = omega`.
//!
//! Both are evaluated spectrally on the doubled grid of the free-space
//! Poisson solve and truncated back to the physical grid, so the divergence
//! and curl identities hold in the same discrete calculus the evolver uses.

use crate::fields::{
    poisson_pipeline, Field2D, FieldError, PoissonOutput, DEFAULT_TAIL_THRESHOLD,
};

/// A sampled velocity field; both components share one grid.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub vx: Field2D,
    pub vy: Field2D,
}

impl VelocityField {
    pub fn new(vx: Field2D, vy: Field2D) -> Result<Self, FieldError> {
        if vx.spec() != vy.spec() {
            return Err(FieldError::GridMismatch);
        }
        Ok(VelocityField { vx, vy })
    }

    /// Pointwise maximum speed.
    pub fn max_speed(&self) -> f64 {
        self.vx
            .values()
            .iter()
            .zip(self.vy.values().iter())
            .fold(0.0_f64, |m, (&a, &b)| m.max((a * a + b * b).sqrt()))
    }

    /// Speed at sample `(i, j)`.
    pub fn speed_at(&self, i: usize, j: usize) -> f64 {
        let a = self.vx.values()[[i, j]];
        let b = self.vy.values()[[i, j]];
        (a * a + b * b).sqrt()
    }
}

/// Chemotactic velocity `v = grad c`, `-Delta c = u`.  For nonnegative `u`
/// the field points radially inward toward the mass.
pub fn velocity_pks(u: &Field2D) -> Result<VelocityField, FieldError> {
    velocity_pks_with(u, DEFAULT_TAIL_THRESHOLD)
}

pub fn velocity_pks_with(u: &Field2D, tail_threshold: f64) -> Result<VelocityField, FieldError> {
    let mut out = poisson_pipeline(
        u,
        tail_threshold,
        &[PoissonOutput::GradX, PoissonOutput::GradY],
    )?;
    let vy = out.pop().unwrap();
    let vx = out.pop().unwrap();
    VelocityField::new(vx, vy)
}

/// Biot-Savart velocity `v = grad^perp Psi`, `Delta Psi = omega`.
///
/// Writing `c` for the solution of `-Delta c = omega`, the stream function is
/// `Psi = -c` and `v = (d_y c, -d_x c)`; the discrete divergence vanishes
/// identically because the symbols cancel.
pub fn velocity_nse(omega: &Field2D) -> Result<VelocityField, FieldError> {
    velocity_nse_with(omega, DEFAULT_TAIL_THRESHOLD)
}

pub fn velocity_nse_with(
    omega: &Field2D,
    tail_threshold: f64,
) -> Result<VelocityField, FieldError> {
    let mut out = poisson_pipeline(
        omega,
        tail_threshold,
        &[PoissonOutput::GradY, PoissonOutput::GradX],
    )?;
    let grad_x = out.pop().unwrap();
    let grad_y = out.pop().unwrap();
    VelocityField::new(grad_y, grad_x.scaled(-1.0))
}

/// Divergence of the pks velocity evaluated inside the free-space pipeline
/// (no intermediate truncation): recovers `-u` on resolved fields.
pub fn pks_velocity_divergence(u: &Field2D, tail_threshold: f64) -> Result<Field2D, FieldError> {
    Ok(poisson_pipeline(u, tail_threshold, &[PoissonOutput::Laplacian])?.remove(0))
}

/// Divergence of the Biot-Savart velocity in the pipeline calculus.  The two
/// perp-gradient symbols cancel mode by mode, so this vanishes to round-off.
pub fn nse_velocity_divergence(
    omega: &Field2D,
    tail_threshold: f64,
) -> Result<Field2D, FieldError> {
    let mut out = poisson_pipeline(
        omega,
        tail_threshold,
        &[PoissonOutput::GradXY, PoissonOutput::GradYX],
    )?;
    let gyx = out.pop().unwrap();
    let gxy = out.pop().unwrap();
    // div (d_y c, -d_x c) = d_x d_y c - d_y d_x c
    gxy.sub(&gyx)
}

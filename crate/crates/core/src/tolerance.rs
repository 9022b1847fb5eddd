use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds shared by every analysis in the crate.
///
/// Verdicts (CP / P divisibility, Hermiticity checks, convergence) are only as
/// reproducible as the thresholds behind them, so they all live here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Structural checks: Hermiticity, trace, first-row of transfer matrices.
    pub structural: f64,
    /// Reconstruction / completeness residuals.
    pub reconstruction: f64,
    /// Quadrature target (relative).
    pub quadrature: f64,
    /// Hermiticity of decoherence matrices extracted by finite differences.
    pub generator_hermiticity: f64,
    /// Base CP threshold; multiplied by the intermediate-map step.
    pub cp: f64,
    /// P-divisibility threshold on trace-distance derivatives.
    pub p: f64,
    /// Threshold below which a canonical rate counts as negative.
    pub rate: f64,
    /// Relative disagreement allowed between h and h/2 derivative estimates.
    pub step_check: f64,
    /// Finite-difference step for generators and damping matrices.
    pub fd_step: f64,
    /// Step used to build intermediate maps F(t + eps, t).
    pub intermediate_eps: f64,
    /// Condition number above which a map is treated as non-invertible.
    pub max_condition: f64,
    /// Step-doubling agreement for the time-ordered integrator.
    pub integrator: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-10,
            reconstruction: 1e-9,
            quadrature: 1e-6,
            generator_hermiticity: 1e-8,
            cp: 1e-9,
            p: 1e-7,
            rate: 1e-8,
            step_check: 1e-4,
            fd_step: 5e-4,
            intermediate_eps: 1e-3,
            max_condition: 1e12,
            integrator: 1e-6,
        }
    }
}

impl Tolerances {
    /// Overrides a single field by name, as in `--tol cp=1e-8`.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tolerance {name} must be positive and finite, got {value}"
            )));
        }
        let slot = match name {
            "structural" => &mut self.structural,
            "reconstruction" => &mut self.reconstruction,
            "quadrature" => &mut self.quadrature,
            "generator_hermiticity" => &mut self.generator_hermiticity,
            "cp" => &mut self.cp,
            "p" => &mut self.p,
            "rate" => &mut self.rate,
            "step_check" => &mut self.step_check,
            "fd_step" => &mut self.fd_step,
            "intermediate_eps" => &mut self.intermediate_eps,
            "max_condition" => &mut self.max_condition,
            "integrator" => &mut self.integrator,
            other => {
                return Err(Error::InvalidArgument(format!("unknown tolerance {other:?}")));
            }
        };
        *slot = value;
        Ok(())
    }

    /// CP threshold for an intermediate map built with step `eps` from a map
    /// with condition number `condition`.
    pub fn cp_threshold(&self, eps: f64, condition: f64) -> f64 {
        (self.cp * eps).max(10.0 * f64::EPSILON * condition)
    }
}

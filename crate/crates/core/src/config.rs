//! Numerical tolerances used across the toolkit.
//!
//! Each constant is pinned here with its origin so audit thresholds are not
//! scattered magic numbers. All relative tolerances are relative to the body
//! scale (diameter bound) unless noted.

use serde::{Deserialize, Serialize};

/// Tolerance bundle. Every operation takes its tolerances from here, either
/// via [`Tolerances::default`] or a CLI override.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tolerances {
    /// Ray-boundary bisection, relative to body diameter. Downstream
    /// log-ratio fits need ~6 significant digits, so this sits well below.
    pub tol_ray: f64,
    /// Frame-optimizer stopping tolerance (relative improvement).
    pub tol_opt: f64,
    /// Successive-refinement tolerance for path quadrature (relative).
    pub quad_tol: f64,
    /// Per-round relative improvement threshold for distance descent.
    pub dist_round_tol: f64,
    /// Verdict boundary: fits with lambda below this are "flat".
    pub lambda_min: f64,
    /// Verdict boundary: expanding verdicts need log-log residual RMS below this.
    pub residual_cap: f64,
    /// Boundary-membership tolerance for "x on the boundary" preconditions.
    pub tol_boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_ray: 1e-10,
            tol_opt: 1e-6,
            quad_tol: 1e-5,
            dist_round_tol: 1e-4,
            lambda_min: 0.05,
            residual_cap: 0.1,
            tol_boundary: 1e-8,
        }
    }
}

impl Tolerances {
    /// Apply a `NAME=VALUE` override. Unknown names are rejected.
    pub fn set(&mut self, name: &str, value: f64) -> crate::Result<()> {
        match name {
            "tol_ray" => self.tol_ray = value,
            "tol_opt" => self.tol_opt = value,
            "quad_tol" => self.quad_tol = value,
            "dist_round_tol" => self.dist_round_tol = value,
            "lambda_min" => self.lambda_min = value,
            "residual_cap" => self.residual_cap = value,
            "tol_boundary" => self.tol_boundary = value,
            _ => {
                return Err(crate::Error::InvalidInput(format!(
                    "unknown tolerance name `{name}`"
                )))
            }
        }
        Ok(())
    }
}

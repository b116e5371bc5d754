//! Shape-locking and adjustable-stiffness analysis.
//!
//! Under a constant vacuum u_P > 0 and zero tension, every configuration q_a
//! admits a bristle vector z_a making (q_a, 0, z_a) an equilibrium; the set
//!
//! ```text
//! ℳ = { (q, p, z) : p = 0,  ∇U(q) + σ₀ u_P z = 0 }
//! ```
//!
//! is locally attractive. The locked bristle state absorbs the elastic and
//! gravity pull, so z_a = −∇U(q_a)/(σ₀ u_P) and larger pressures park the
//! released robot closer to where it started.

pub mod kinematics;
pub mod shape_lock;
pub mod stiffness;
pub mod sweep;

pub use kinematics::{forward_kinematics, tip_jacobian};
pub use shape_lock::{
    attraction_radius_estimate, shape_locking_scenario, ShapeLockConfig, ShapeLockResult,
};
pub use stiffness::{
    analytic_stiffness, hessian_stiffness, hessian_stiffness_with_step, linearized_eigenvalues,
    linearized_matrix, probe_stiffness, probe_torque_for, transverse_stiffness,
    transverse_stiffness_analytic, SettleOptions,
};
pub use sweep::{
    linear_fit, pressure_sweep_shape_lock, pressure_sweep_stiffness, LinearFit, ShapeLockPoint,
    ShapeLockSweep, StiffnessPoint, StiffnessSweep,
};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::interconnect::FullState;
use crate::lugre::LuGreParams;
use crate::robot::{self, RobotParams};

/// Distance of a state from the locked-equilibria manifold, split into its
/// two defining components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldResidual {
    /// |p|.
    pub momentum: f64,
    /// |∇U(q) + σ₀ u_P z|.
    pub gradient: f64,
}

impl ManifoldResidual {
    pub fn max(&self) -> f64 {
        self.momentum.max(self.gradient)
    }
}

/// Bristle state locking the configuration q_a under pressure u_P > 0:
/// z_a = −∇U(q_a)/(σ₀ u_P), so that (q_a, 0, z_a) zeroes the vector field.
pub fn locked_bristle(
    q_a: &DVector<f64>,
    u_p: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<DVector<f64>> {
    if u_p <= 0.0 {
        return Err(Error::PressureRequired(u_p));
    }
    Ok(-robot::potential_gradient(q_a, robot_params) / (fric.bristle_stiffness * u_p))
}

/// Momentum and force-balance residuals of χ with respect to the manifold.
/// Both are zero exactly on ℳ.
pub fn manifold_residual(
    chi: &FullState,
    u_p: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> ManifoldResidual {
    let grad = robot::potential_gradient(&chi.q, robot_params)
        + &chi.z * (fric.bristle_stiffness * u_p);
    ManifoldResidual {
        momentum: chi.p.norm(),
        gradient: grad.norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (RobotParams, LuGreParams) {
        (RobotParams::default(), LuGreParams::default())
    }

    #[test]
    fn rest_configuration_needs_no_bristle() {
        let (rp, fp) = setup();
        let z = locked_bristle(&DVector::zeros(3), 3.0e4, &rp, &fp).unwrap();
        assert_eq!(z, DVector::zeros(3));
    }

    #[test]
    fn doubling_pressure_halves_locked_deflection() {
        let (rp, fp) = setup();
        let q = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let z1 = locked_bristle(&q, 2.0e4, &rp, &fp).unwrap();
        let z2 = locked_bristle(&q, 4.0e4, &rp, &fp).unwrap();
        assert_relative_eq!((z1 * 0.5 - z2).norm(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn locking_requires_vacuum() {
        let (rp, fp) = setup();
        assert!(locked_bristle(&DVector::zeros(3), 0.0, &rp, &fp).is_err());
    }

    #[test]
    fn residual_vanishes_on_manifold_only() {
        let (rp, fp) = setup();
        let u_p = 2.5e4;
        let q = DVector::from_vec(vec![0.4, 0.1, -0.3]);
        let z = locked_bristle(&q, u_p, &rp, &fp).unwrap();
        let on = FullState::new(q.clone(), DVector::zeros(3), z).unwrap();
        let res = manifold_residual(&on, u_p, &rp, &fp);
        assert_relative_eq!(res.momentum, 0.0, epsilon = 1e-15);
        assert_relative_eq!(res.gradient, 0.0, epsilon = 1e-12);

        // same configuration with relaxed bristles: only the gradient part
        let off = FullState::new(q.clone(), DVector::zeros(3), DVector::zeros(3)).unwrap();
        let res = manifold_residual(&off, u_p, &rp, &fp);
        assert_eq!(res.momentum, 0.0);
        assert_relative_eq!(
            res.gradient,
            robot::potential_gradient(&q, &rp).norm(),
            max_relative = 1e-14
        );
        assert!(res.max() > 0.0);
    }
}

//! Dynamics and analysis of layer-jamming tendon-driven continuum robots.
//!
//! The model couples an n-link planar chain approximation of the robot with a
//! vacuum-pressure-modulated LuGre friction state per joint. The crate
//! provides the assembled 3n-dimensional vector field, a fixed-step RK4
//! integrator with trajectory recording, energy/passivity audits, and the
//! analysis layer for the two behaviors this class of robot is built around:
//! shape locking under vacuum and pressure-linear stiffness adjustment.

pub mod analysis;
pub mod audit;
pub mod error;
pub mod interconnect;
pub mod lugre;
pub mod profile;
pub mod robot;
pub mod sim;

pub use analysis::{
    analytic_stiffness, forward_kinematics, hessian_stiffness, linearized_eigenvalues,
    locked_bristle, manifold_residual, pressure_sweep_shape_lock, pressure_sweep_stiffness,
    probe_stiffness, shape_locking_scenario, transverse_stiffness, ManifoldResidual,
    SettleOptions, ShapeLockConfig, ShapeLockResult,
};
pub use audit::{energy_audit, passivity_audit, EnergyAudit, PassivityAudit};
pub use error::{Error, Result};
pub use interconnect::{dissipation_rate, total_hamiltonian, vector_field, FullState};
pub use lugre::{
    bristle_energy, bristle_rate, damping_condition, damping_condition_all, friction_torque,
    friction_torque_ph, steady_state_friction, stribeck, LuGreParams,
};
pub use profile::{InputProfile, Phase};
pub use robot::{
    hamiltonian, hamiltonian_gradient, inertia_matrix, input_matrix, potential_energy,
    potential_gradient, velocity, RobotParams, RobotState,
};
pub use sim::{simulate, simulate_with, stable_dt_estimate, step, Event, SimOptions, Trajectory};

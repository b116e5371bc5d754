//! Energy-balance and passivity checks over recorded trajectories.
//!
//! Along any constant-pressure window the total energy obeys
//!
//! ```text
//! ℋ̇ = vᵀG(q)u + vᵀτ_ext − ∇ℋᵀℛ∇ℋ
//! ```
//!
//! so the audit integrates input power and dissipation with the trapezoid
//! rule and reports the balance residual. Windows containing a pressure jump
//! are rejected: ℋ depends on u_P explicitly and the jump is not dissipation.

use crate::error::{Error, Result};
use crate::interconnect::dissipation_rate;
use crate::lugre::{self, LuGreParams};
use crate::profile::InputProfile;
use crate::robot::{self, RobotParams};
use crate::sim::Trajectory;

/// Energy-balance audit result.
#[derive(Debug, Clone)]
pub struct EnergyAudit {
    pub times: Vec<f64>,
    /// ℋ(t) − ℋ(t₀) − ∫(input power − dissipation) ds up to each sample.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    /// ∫ vᵀ(Gu + τ_ext) dt over the window.
    pub injected: f64,
    /// ∫ ∇ℋᵀℛ∇ℋ dt over the window.
    pub dissipated: f64,
}

/// Passivity audit of the friction port (v, τ_f).
#[derive(Debug, Clone)]
pub struct PassivityAudit {
    /// ∫ vᵀτ_f dt.
    pub supply: f64,
    /// H_z(end) − H_z(start).
    pub storage_delta: f64,
    /// Trapezoid error estimate plus a floating-point floor.
    pub quadrature_tolerance: f64,
    /// supply ≥ storage_delta − tolerance.
    pub satisfied: bool,
    /// Damping condition held at every sample of the window.
    pub damping_holds: bool,
}

fn require_constant_pressure(traj: &Trajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::AuditWindow("need at least two samples".into()));
    }
    let u_p = traj.pressures[0];
    if traj.pressures.iter().any(|&p| p != u_p) {
        return Err(Error::AuditWindow(
            "pressure changes inside the window; audit each constant-pressure segment".into(),
        ));
    }
    Ok(u_p)
}

/// Trapezoid quadrature error estimate: (1/12)·Σ|f_{k+1} − 2f_k + f_{k−1}|·Δt.
fn trapezoid_error_estimate(values: &[f64], times: &[f64]) -> f64 {
    let mut err = 0.0;
    for k in 1..values.len().saturating_sub(1) {
        let dt = 0.5 * (times[k + 1] - times[k - 1]);
        err += (values[k + 1] - 2.0 * values[k] + values[k - 1]).abs() * dt / 12.0;
    }
    err
}

/// Energy balance over a constant-pressure trajectory.
pub fn energy_audit(
    traj: &Trajectory,
    profile: &InputProfile,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<EnergyAudit> {
    let u_p = require_constant_pressure(traj)?;

    // power in and dissipation at each sample
    let mut power = Vec::with_capacity(traj.len());
    let mut dissipation = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let t = traj.times[k];
        let s = &traj.states[k];
        let v = &traj.velocity[k];
        let g = robot::input_matrix(&s.q, robot_params);
        let drive = g * profile.tension(t) + profile.external_torque(t);
        power.push(v.dot(&drive));
        dissipation.push(dissipation_rate(v, &s.z, u_p, fric));
    }

    let h0 = traj.total_energy(0);
    let mut residuals = Vec::with_capacity(traj.len());
    residuals.push(0.0);
    let mut net = 0.0; // ∫ (power − dissipation)
    let mut injected = 0.0;
    let mut dissipated = 0.0;
    for k in 1..traj.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        net += 0.5 * dt * (power[k] + power[k - 1] - dissipation[k] - dissipation[k - 1]);
        injected += 0.5 * dt * (power[k] + power[k - 1]);
        dissipated += 0.5 * dt * (dissipation[k] + dissipation[k - 1]);
        residuals.push(traj.total_energy(k) - h0 - net);
    }
    let max_abs_residual = residuals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    Ok(EnergyAudit {
        times: traj.times.clone(),
        residuals,
        max_abs_residual,
        injected,
        dissipated,
    })
}

/// Passivity of the friction port over a constant-pressure trajectory:
/// ∫vᵀτ_f dt ≥ H_z(end) − H_z(start) within quadrature tolerance.
pub fn passivity_audit(traj: &Trajectory, fric: &LuGreParams) -> Result<PassivityAudit> {
    let _u_p = require_constant_pressure(traj)?;

    let supplies: Vec<f64> = (0..traj.len())
        .map(|k| traj.velocity[k].dot(&traj.friction[k]))
        .collect();
    let mut supply = 0.0;
    for k in 1..traj.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        supply += 0.5 * dt * (supplies[k] + supplies[k - 1]);
    }
    let storage_delta = traj.bristle_energy[traj.len() - 1] - traj.bristle_energy[0];

    let scale = supply.abs().max(storage_delta.abs()).max(1.0);
    let quadrature_tolerance = trapezoid_error_estimate(&supplies, &traj.times) + 1e-12 * scale;

    let damping_holds = traj
        .velocity
        .iter()
        .all(|v| lugre::damping_condition_all(v, fric));

    Ok(PassivityAudit {
        supply,
        storage_delta,
        quadrature_tolerance,
        satisfied: supply >= storage_delta - quadrature_tolerance,
        damping_holds,
    })
}

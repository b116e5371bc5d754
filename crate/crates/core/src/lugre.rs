//! Pressure-modulated LuGre friction.
//!
//! Each joint carries a lumped frictional torque produced by a virtual
//! bristle state z:
//!
//! ```text
//! ż   = v − σ₀ |v| z / ρ(v)                    (per joint; pressure-free)
//! τ_f = u_P (σ₀ z + σ₁ ż + σ₂ v)
//! ρ(v) = μ_C + (μ_S − μ_C) exp(−|v/v_s|^σ₃)
//! ```
//!
//! The same output also has a port form built from the state-modulation
//! matrices 𝒩, 𝒫, S and the bristle energy H_z = ½ σ₀ u_P |z|²; the two are
//! algebraically identical for u_P > 0 and the canonical form above stays
//! well-posed down to u_P = 0, where the friction vanishes entirely.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Friction coefficients. The σ coefficients multiply the vacuum pressure
/// (in pascals), so their defaults carry the per-pascal scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LuGreParams {
    /// Stiction friction coefficient μ_S (dimensionless).
    pub mu_static: f64,
    /// Coulomb friction coefficient μ_C (dimensionless), 0 < μ_C ≤ μ_S.
    pub mu_coulomb: f64,
    /// Stribeck velocity v_s \[rad/s\].
    pub stribeck_velocity: f64,
    /// Bristle stiffness σ₀ \[1/(rad·Pa)\] scale.
    pub bristle_stiffness: f64,
    /// Bristle damping σ₁.
    pub bristle_damping: f64,
    /// Viscous friction σ₂.
    pub viscous_friction: f64,
    /// Stribeck curve exponent σ₃ (> 0); 1 recovers the classic curve.
    pub stribeck_exponent: f64,
}

impl Default for LuGreParams {
    fn default() -> Self {
        // Arbitrary desk-scale values; the σ's are per-pascal so that e.g.
        // 30 kPa of vacuum yields σ₀·u_P = 3e4 J/rad² of bristle stiffness.
        Self {
            mu_static: 0.25,
            mu_coulomb: 0.15,
            stribeck_velocity: 0.01,
            bristle_stiffness: 1.0,
            bristle_damping: 1.0e-3,
            viscous_friction: 1.0e-4,
            stribeck_exponent: 1.0,
        }
    }
}

impl LuGreParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_coulomb > 0.0) || !(self.mu_static >= self.mu_coulomb) {
            return Err(Error::InvalidParams(
                "friction coefficients must satisfy mu_static >= mu_coulomb > 0".into(),
            ));
        }
        if !(self.stribeck_velocity > 0.0) {
            return Err(Error::InvalidParams("stribeck_velocity must be > 0".into()));
        }
        if !(self.bristle_stiffness > 0.0) {
            return Err(Error::InvalidParams("bristle_stiffness must be > 0".into()));
        }
        if !(self.bristle_damping >= 0.0) || !(self.viscous_friction >= 0.0) {
            return Err(Error::InvalidParams(
                "bristle_damping and viscous_friction must be >= 0".into(),
            ));
        }
        if !(self.stribeck_exponent > 0.0) {
            return Err(Error::InvalidParams("stribeck_exponent must be > 0".into()));
        }
        for (name, v) in [
            ("mu_static", self.mu_static),
            ("stribeck_velocity", self.stribeck_velocity),
            ("bristle_stiffness", self.bristle_stiffness),
            ("bristle_damping", self.bristle_damping),
            ("viscous_friction", self.viscous_friction),
            ("stribeck_exponent", self.stribeck_exponent),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Per-joint bound μ_S/σ₀ on the bristle deflection: trajectories started
    /// with |z_i| inside it never leave it.
    pub fn deflection_bound(&self) -> f64 {
        self.mu_static / self.bristle_stiffness
    }
}

/// Stribeck friction level ρ(v) ∈ \[μ_C, μ_S\], even in v.
pub fn stribeck(v: f64, params: &LuGreParams) -> f64 {
    let ratio = (v / params.stribeck_velocity).abs();
    params.mu_coulomb
        + (params.mu_static - params.mu_coulomb) * (-ratio.powf(params.stribeck_exponent)).exp()
}

/// Bristle deflection rate ż_i = v_i − σ₀|v_i| z_i / ρ(v_i).
///
/// This is the pressure-cancelled canonical form; it is well-posed for every
/// u_P ≥ 0 and equals the port form of the bristle dynamics whenever u_P > 0.
pub fn bristle_rate(z: &DVector<f64>, v: &DVector<f64>, params: &LuGreParams) -> DVector<f64> {
    let s0 = params.bristle_stiffness;
    DVector::from_fn(z.len(), |i, _| {
        v[i] - s0 * v[i].abs() * z[i] / stribeck(v[i], params)
    })
}

/// Friction torque τ_f = u_P (σ₀ z + σ₁ ż + σ₂ v), linear in the pressure.
pub fn friction_torque(
    z: &DVector<f64>,
    z_dot: &DVector<f64>,
    v: &DVector<f64>,
    u_p: f64,
    params: &LuGreParams,
) -> Result<DVector<f64>> {
    if u_p < 0.0 {
        return Err(Error::NegativePressure(u_p));
    }
    let (s0, s1, s2) = (
        params.bristle_stiffness,
        params.bristle_damping,
        params.viscous_friction,
    );
    Ok(DVector::from_fn(z.len(), |i, _| {
        u_p * (s0 * z[i] + s1 * z_dot[i] + s2 * v[i])
    }))
}

/// Gradient of the bristle energy, ∇H_z = σ₀ u_P z.
pub fn bristle_energy_gradient(z: &DVector<f64>, u_p: f64, params: &LuGreParams) -> DVector<f64> {
    z * (params.bristle_stiffness * u_p)
}

/// Friction torque in the raw port form,
/// τ_f = \[𝒩(v) + 𝒫(v)\]ᵀ ∇H_z(z) + S v,
/// with 𝒩 = I − ½σ₁u_P R_z, 𝒫 = −½σ₁u_P R_z, S = (σ₁+σ₂)u_P I and
/// R_z,ii = |v_i| / (u_P ρ(v_i)).
///
/// Requires u_P > 0 (R_z carries u_P in the denominator); the u_P = 0 case is
/// owned by [`friction_torque`], where the cancellation is explicit.
pub fn friction_torque_ph(
    z: &DVector<f64>,
    v: &DVector<f64>,
    u_p: f64,
    params: &LuGreParams,
) -> Result<DVector<f64>> {
    if u_p <= 0.0 {
        return Err(Error::PressureRequired(u_p));
    }
    let (s1, s2) = (params.bristle_damping, params.viscous_friction);
    let grad_hz = bristle_energy_gradient(z, u_p, params);
    Ok(DVector::from_fn(z.len(), |i, _| {
        let rz = v[i].abs() / (u_p * stribeck(v[i], params));
        // (N + P)ᵀ ∇H_z = (I − σ₁ u_P R_z) ∇H_z
        (1.0 - s1 * u_p * rz) * grad_hz[i] + (s1 + s2) * u_p * v[i]
    }))
}

/// Steady-state friction at constant velocity:
/// τ_fˢˢ = \[diag{ρ(vᵢ)} sign(v) + σ₂ v\] u_P, with sign(0) := 0.
pub fn steady_state_friction(v: &DVector<f64>, u_p: f64, params: &LuGreParams) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| {
        let sign = if v[i] == 0.0 { 0.0 } else { v[i].signum() };
        (stribeck(v[i], params) * sign + params.viscous_friction * v[i]) * u_p
    })
}

/// Per-joint damping condition σ₁ + σ₂ − σ₁²|vᵢ|/(4ρ(vᵢ)) ≥ 0.
///
/// This is exactly positive semidefiniteness of the dissipation block ℛ₂₂;
/// for σ₁ = 1 it reduces to σ₁ + σ₂ − |vᵢ|/(4ρ(vᵢ)) ≥ 0.
pub fn damping_condition(v: &DVector<f64>, params: &LuGreParams) -> Vec<bool> {
    let (s1, s2) = (params.bristle_damping, params.viscous_friction);
    v.iter()
        .map(|&vi| s1 + s2 - s1 * s1 * vi.abs() / (4.0 * stribeck(vi, params)) >= 0.0)
        .collect()
}

/// True when the damping condition holds at every joint.
pub fn damping_condition_all(v: &DVector<f64>, params: &LuGreParams) -> bool {
    damping_condition(v, params).into_iter().all(|b| b)
}

/// Bristle potential energy H_z = ½ σ₀ u_P |z|² \[J\].
pub fn bristle_energy(z: &DVector<f64>, u_p: f64, params: &LuGreParams) -> f64 {
    0.5 * params.bristle_stiffness * u_p * z.dot(z)
}

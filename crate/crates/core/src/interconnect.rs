//! Negative interconnection of the robot and friction subsystems.
//!
//! The full state is χ = col(q, p, z) ∈ ℝ³ⁿ with dynamics
//!
//! ```text
//! q̇ = ∇_p H
//! ṗ = −∇_q H + G(q) u + τ_ext − τ_f(z, ż, v, u_P)
//! ż = v − σ₀ |v| z / ρ(v)
//! ```
//!
//! which equals the port-Hamiltonian block form χ̇ = [𝒥 − ℛ]∇ℋ + 𝒢u + G₀τ_ext
//! for every u_P > 0 and degenerates to the jamming-free model at u_P = 0.
//! All pressure factors enter through the composed friction torque, so no
//! term divides by u_P.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lugre::{self, LuGreParams};
use crate::robot::{self, RobotParams};

/// Full simulation state χ = col(q, p, z).
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    /// Joint angles \[rad\].
    pub q: DVector<f64>,
    /// Generalized momenta.
    pub p: DVector<f64>,
    /// Bristle deflections \[rad\].
    pub z: DVector<f64>,
}

impl FullState {
    pub fn new(q: DVector<f64>, p: DVector<f64>, z: DVector<f64>) -> Result<Self> {
        let n = q.len();
        for (what, len) in [("momentum block", p.len()), ("bristle block", z.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(Self { q, p, z })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            q: DVector::zeros(n),
            p: DVector::zeros(n),
            z: DVector::zeros(n),
        }
    }

    pub fn links(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite())
            && self.p.iter().all(|x| x.is_finite())
            && self.z.iter().all(|x| x.is_finite())
    }

    /// Stack the blocks into a flat 3n vector (integrator layout).
    pub fn to_flat(&self) -> DVector<f64> {
        let n = self.links();
        let mut out = DVector::zeros(3 * n);
        out.rows_mut(0, n).copy_from(&self.q);
        out.rows_mut(n, n).copy_from(&self.p);
        out.rows_mut(2 * n, n).copy_from(&self.z);
        out
    }

    pub fn from_flat(n: usize, flat: &DVector<f64>) -> Self {
        Self {
            q: flat.rows(0, n).into_owned(),
            p: flat.rows(n, n).into_owned(),
            z: flat.rows(2 * n, n).into_owned(),
        }
    }
}

fn validate_inputs(
    chi: &FullState,
    u: &DVector<f64>,
    u_p: f64,
    tau_ext: &DVector<f64>,
    robot_params: &RobotParams,
) -> Result<()> {
    let n = robot_params.links;
    if chi.links() != n {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: n,
            got: chi.links(),
        });
    }
    if u.len() != robot_params.tendons {
        return Err(Error::DimensionMismatch {
            what: "tension input",
            expected: robot_params.tendons,
            got: u.len(),
        });
    }
    if tau_ext.len() != n {
        return Err(Error::DimensionMismatch {
            what: "external torque",
            expected: n,
            got: tau_ext.len(),
        });
    }
    if u_p < 0.0 {
        return Err(Error::NegativePressure(u_p));
    }
    Ok(())
}

/// Time derivative χ̇ of the full model under tensions `u`, vacuum pressure
/// `u_p` and external torque `tau_ext`.
///
/// Negative tension entries are clamped to zero (with a logged warning);
/// negative pressure is rejected.
pub fn vector_field(
    chi: &FullState,
    u: &DVector<f64>,
    u_p: f64,
    tau_ext: &DVector<f64>,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<FullState> {
    validate_inputs(chi, u, u_p, tau_ext, robot_params)?;
    let u = if u.iter().any(|&x| x < 0.0) {
        log::warn!("negative tension input clamped to zero");
        u.map(|x| x.max(0.0))
    } else {
        u.clone()
    };

    let (grad_q, v) = robot::hamiltonian_gradient_qp(&chi.q, &chi.p, robot_params)?;
    let z_dot = lugre::bristle_rate(&chi.z, &v, fric);
    let tau_f = lugre::friction_torque(&chi.z, &z_dot, &v, u_p, fric)?;
    let g = robot::input_matrix(&chi.q, robot_params);

    let p_dot = -grad_q + g * u + tau_ext - tau_f;
    Ok(FullState {
        q: v,
        p: p_dot,
        z: z_dot,
    })
}

/// Total energy ℋ(χ, u_P) = H(q, p) + H_z(z, u_P).
pub fn total_hamiltonian(
    chi: &FullState,
    u_p: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<f64> {
    let h = robot::hamiltonian_qp(&chi.q, &chi.p, robot_params)?;
    Ok(h + lugre::bristle_energy(&chi.z, u_p, fric))
}

/// Instantaneous dissipation ∇ℋᵀℛ∇ℋ ≥ 0 (whenever the damping condition
/// holds), written with a single explicit u_P factor so it stays well-posed
/// at u_P = 0:
///
/// ```text
/// u_P · Σᵢ [ (σ₁+σ₂)vᵢ² − σ₀σ₁ vᵢ|vᵢ|zᵢ/ρᵢ + σ₀²zᵢ²|vᵢ|/ρᵢ ]
/// ```
pub fn dissipation_rate(v: &DVector<f64>, z: &DVector<f64>, u_p: f64, fric: &LuGreParams) -> f64 {
    let (s0, s1, s2) = (
        fric.bristle_stiffness,
        fric.bristle_damping,
        fric.viscous_friction,
    );
    let mut sum = 0.0;
    for i in 0..v.len() {
        let rho = lugre::stribeck(v[i], fric);
        sum += (s1 + s2) * v[i] * v[i] - s0 * s1 * v[i] * v[i].abs() * z[i] / rho
            + s0 * s0 * z[i] * z[i] * v[i].abs() / rho;
    }
    u_p * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::DVector;

    fn setup() -> (RobotParams, LuGreParams) {
        (RobotParams::default(), LuGreParams::default())
    }

    #[test]
    fn flat_round_trip() {
        let chi = FullState::new(
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            DVector::from_vec(vec![4.0, 5.0, 6.0]),
            DVector::from_vec(vec![7.0, 8.0, 9.0]),
        )
        .unwrap();
        assert_eq!(FullState::from_flat(3, &chi.to_flat()), chi);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (rp, fp) = setup();
        let chi = FullState::origin(2);
        let err = vector_field(
            &chi,
            &DVector::zeros(2),
            0.0,
            &DVector::zeros(2),
            &rp,
            &fp,
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        assert!(FullState::new(DVector::zeros(3), DVector::zeros(2), DVector::zeros(3)).is_err());
    }

    #[test]
    fn degenerates_to_jamming_free_field() {
        let (rp, fp) = setup();
        let chi = FullState::new(
            DVector::from_vec(vec![0.3, -0.2, 0.5]),
            DVector::from_vec(vec![0.01, 0.02, -0.03]),
            DVector::zeros(3),
        )
        .unwrap();
        let u = DVector::from_vec(vec![2.0, 1.0]);
        let tau = DVector::zeros(3);
        let field = vector_field(&chi, &u, 0.0, &tau, &rp, &fp).unwrap();

        let (grad_q, v) = robot::hamiltonian_gradient_qp(&chi.q, &chi.p, &rp).unwrap();
        let g = robot::input_matrix(&chi.q, &rp);
        assert_relative_eq!((&field.q - &v).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(
            (&field.p - (-&grad_q + g * &u)).norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn locked_configuration_is_an_equilibrium() {
        let (rp, fp) = setup();
        let u_p = 3.0e4;
        for qv in [vec![0.4, -0.1, 0.7], vec![0.0, 0.0, 0.0], vec![-1.0, 0.5, 0.2]] {
            let q = DVector::from_vec(qv);
            let grad_u = robot::potential_gradient(&q, &rp);
            // bristles hold the elastic/gravity pull: σ₀ u_P z = −∇U
            let z = -&grad_u / (fp.bristle_stiffness * u_p);
            let chi = FullState::new(q, DVector::zeros(3), z).unwrap();
            let field = vector_field(
                &chi,
                &DVector::zeros(2),
                u_p,
                &DVector::zeros(3),
                &rp,
                &fp,
            )
            .unwrap();
            assert_abs_diff_eq!(field.to_flat().norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn total_energy_is_sum_of_parts() {
        let (rp, fp) = setup();
        let chi = FullState::new(
            DVector::from_vec(vec![0.2, 0.1, -0.3]),
            DVector::from_vec(vec![0.005, -0.01, 0.02]),
            DVector::from_vec(vec![0.01, 0.0, -0.02]),
        )
        .unwrap();
        let u_p = 2.5e4;
        let total = total_hamiltonian(&chi, u_p, &rp, &fp).unwrap();
        let h = robot::hamiltonian_qp(&chi.q, &chi.p, &rp).unwrap();
        let hz = lugre::bristle_energy(&chi.z, u_p, &fp);
        assert_eq!(total, h + hz);
        // z = 0 leaves only the mechanical part
        let chi0 = FullState::new(chi.q.clone(), chi.p.clone(), DVector::zeros(3)).unwrap();
        assert_eq!(total_hamiltonian(&chi0, u_p, &rp, &fp).unwrap(), h);
        // the origin with zero rest energy stores nothing
        assert_eq!(
            total_hamiltonian(&FullState::origin(3), u_p, &rp, &fp).unwrap(),
            0.0
        );
    }

    #[test]
    fn dissipation_viscous_only_when_bristles_relaxed() {
        let (_, fp) = setup();
        let v = DVector::from_vec(vec![0.3, -0.1, 0.05]);
        let u_p = 4.0e4;
        let rate = dissipation_rate(&v, &DVector::zeros(3), u_p, &fp);
        let expected = (fp.bristle_damping + fp.viscous_friction) * u_p * v.dot(&v);
        assert_relative_eq!(rate, expected, max_relative = 1e-14);
        assert_eq!(dissipation_rate(&v, &DVector::zeros(3), 0.0, &fp), 0.0);
    }
}

//! Open-loop stiffness: analytic law, finite-difference Hessian, and
//! quasi-static probes.
//!
//! Around the open-loop equilibrium the stiffness is
//!
//! ```text
//! K(u_P) = α₁ 𝟏ₙₓₙ + [α₂ + σ₀ u_P] Iₙ = ∇²U(0) + σ₀ u_P Iₙ
//! ```
//!
//! which three routes must agree on: the closed form, central finite
//! differences of ∇U, and settled displacements under small constant torques.

use nalgebra::{Complex, DMatrix, DVector};

use crate::analysis::kinematics::{forward_kinematics, tip_jacobian};
use crate::error::{Error, Result};
use crate::interconnect::FullState;
use crate::lugre::LuGreParams;
use crate::profile::InputProfile;
use crate::robot::{self, RobotParams};
use crate::sim::{simulate_with, stable_dt_estimate, SimOptions, Trajectory};

/// Steady-state detection for quasi-static probes: settled when |v|∞ stays
/// below `velocity_tol` for a full `dwell` of simulated time.
#[derive(Debug, Clone)]
pub struct SettleOptions {
    pub velocity_tol: f64,
    pub dwell: f64,
    pub max_time: f64,
    /// Base step; capped by the stability estimate for the probed pressure.
    pub dt: f64,
}

impl Default for SettleOptions {
    fn default() -> Self {
        Self {
            velocity_tol: 1e-6,
            dwell: 0.5,
            max_time: 30.0,
            dt: 1e-4,
        }
    }
}

/// Closed-form stiffness K = α₁𝟏 + (α₂ + σ₀u_P)I.
pub fn analytic_stiffness(u_p: f64, robot_params: &RobotParams, fric: &LuGreParams) -> DMatrix<f64> {
    let n = robot_params.links;
    let diag = robot_params.elastic_coeff + fric.bristle_stiffness * u_p;
    DMatrix::from_fn(n, n, |i, j| {
        robot_params.gravity_coeff + if i == j { diag } else { 0.0 }
    })
}

/// Finite-difference route: symmetrized central-difference Hessian of U at
/// the origin plus the σ₀u_P pressure shift.
pub fn hessian_stiffness(u_p: f64, robot_params: &RobotParams, fric: &LuGreParams) -> DMatrix<f64> {
    hessian_stiffness_with_step(u_p, 1e-5, robot_params, fric)
}

pub fn hessian_stiffness_with_step(
    u_p: f64,
    step: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> DMatrix<f64> {
    let n = robot_params.links;
    let mut h = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut qp = DVector::zeros(n);
        let mut qm = DVector::zeros(n);
        qp[c] = step;
        qm[c] = -step;
        let col = (robot::potential_gradient(&qp, robot_params)
            - robot::potential_gradient(&qm, robot_params))
            / (2.0 * step);
        h.set_column(c, &col);
    }
    // symmetrize and add the bristle stiffening
    let sym = (&h + h.transpose()) * 0.5;
    sym + DMatrix::identity(n, n) * (fric.bristle_stiffness * u_p)
}

/// Integrates until the settle criterion holds; returns the settled state.
pub(crate) fn settle(
    chi0: &FullState,
    profile: &InputProfile,
    t0: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
    opts: &SettleOptions,
) -> Result<(FullState, f64)> {
    let u_p = profile.max_pressure();
    let dt = opts
        .dt
        .min(stable_dt_estimate(u_p, robot_params, fric, 1.0));
    let chunk = opts.dwell.max(20.0 * dt);
    let steps_per_chunk = (chunk / dt).ceil() as usize;
    let stride = (steps_per_chunk / 200).max(1);

    let mut chi = chi0.clone();
    let mut t = t0;
    while t - t0 < opts.max_time {
        let traj: Trajectory = simulate_with(
            &chi,
            profile,
            (t, t + chunk),
            dt,
            robot_params,
            fric,
            &SimOptions {
                record_stride: stride,
                check_configuration: false,
            },
        )?;
        chi = traj.final_state().clone();
        t = traj.final_time();
        if traj.max_abs_velocity() < opts.velocity_tol {
            return Ok((chi, t));
        }
    }
    Err(Error::NonConvergence(format!(
        "no steady state within {} s (|v| tolerance {})",
        opts.max_time, opts.velocity_tol
    )))
}

/// Quasi-static probe: applies a constant torque of magnitude `probe_torque`
/// along each joint direction, settles the locked plant, and solves
/// τ = K_est · δq from the settled displacements.
pub fn probe_stiffness(
    u_p: f64,
    probe_torque: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
    opts: &SettleOptions,
) -> Result<DMatrix<f64>> {
    if u_p <= 0.0 {
        return Err(Error::PressureRequired(u_p));
    }
    if !(probe_torque > 0.0) {
        return Err(Error::InvalidParams("probe_torque must be > 0".into()));
    }
    let n = robot_params.links;
    let mut displacements = DMatrix::zeros(n, n);
    for dir in 0..n {
        let mut tau = DVector::zeros(n);
        tau[dir] = probe_torque;
        let profile = InputProfile::constant(DVector::zeros(robot_params.tendons), u_p, tau)?;
        let (settled, _) = settle(&FullState::origin(n), &profile, 0.0, robot_params, fric, opts)?;
        displacements.set_column(dir, &settled.q);
    }
    let inv = displacements.try_inverse().ok_or_else(|| {
        Error::NonConvergence("probe displacements are singular; increase probe torque".into())
    })?;
    Ok(inv * probe_torque)
}

/// Scale-matched probe torque giving joint deflections near `delta_q` rad.
pub fn probe_torque_for(delta_q: f64, u_p: f64, robot_params: &RobotParams, fric: &LuGreParams) -> f64 {
    delta_q
        * (robot_params.gravity_coeff
            + robot_params.elastic_coeff
            + fric.bristle_stiffness * u_p)
}

/// Closed-form transverse tip stiffness: unit transverse force mapped through
/// the tip Jacobian and the compliance K⁻¹ at the origin.
pub fn transverse_stiffness_analytic(
    u_p: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> f64 {
    let n = robot_params.links;
    let k = analytic_stiffness(u_p, robot_params, fric);
    let jac = tip_jacobian(&DVector::zeros(n), robot_params);
    let jx = jac.row(0).transpose();
    let w = k.lu().solve(&jx).expect("stiffness is positive definite");
    1.0 / jx.dot(&w)
}

/// Simulated transverse tip stiffness |f| / |tip displacement| under a small
/// transverse tip force \[N/m\].
///
/// For u_P > 0 the damped plant is settled under the constant joint torque
/// J(0)ᵀ·(f, 0). The jamming-free plant (u_P = 0) has no dissipation, so the
/// force is applied as a slow staircase ramp and the displacement is read as
/// a long time average, which suppresses the residual oscillation.
pub fn transverse_stiffness(
    u_p: f64,
    tip_force: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
    opts: &SettleOptions,
) -> Result<f64> {
    if u_p < 0.0 {
        return Err(Error::NegativePressure(u_p));
    }
    if !(tip_force > 0.0) {
        return Err(Error::InvalidParams("tip_force must be > 0".into()));
    }
    let n = robot_params.links;
    let jac = tip_jacobian(&DVector::zeros(n), robot_params);
    let tau_full = jac.row(0).transpose() * tip_force;
    let tip0 = forward_kinematics(&DVector::zeros(n), robot_params);

    let q_end: DVector<f64>;
    if u_p > 0.0 {
        let profile =
            InputProfile::constant(DVector::zeros(robot_params.tendons), u_p, tau_full)?;
        let (settled, _) = settle(&FullState::origin(n), &profile, 0.0, robot_params, fric, opts)?;
        q_end = settled.q;
    } else {
        q_end = ramp_average_displacement(&tau_full, robot_params, fric)?;
    }
    let tip1 = forward_kinematics(&q_end, robot_params);
    let disp = ((tip1.0 - tip0.0).powi(2) + (tip1.1 - tip0.1).powi(2)).sqrt();
    if disp == 0.0 {
        return Err(Error::NonConvergence("probe produced no displacement".into()));
    }
    Ok(tip_force / disp)
}

/// Undamped probe: staircase-ramp the torque over `ramp` seconds, then
/// average q over the following window. Time-averaging cancels the
/// oscillatory part of each mode, leaving the static displacement.
fn ramp_average_displacement(
    tau: &DVector<f64>,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<DVector<f64>> {
    let n = robot_params.links;
    let ramp = 10.0;
    let hold = 12.0;
    let levels = 100;
    let mut torque_knots = Vec::with_capacity(levels);
    for k in 0..levels {
        let t = ramp * k as f64 / levels as f64;
        let frac = (k + 1) as f64 / levels as f64;
        torque_knots.push((t, tau * frac));
    }
    let profile = InputProfile::new(
        robot_params.tendons,
        n,
        vec![(0.0, DVector::zeros(robot_params.tendons))],
        vec![(0.0, 0.0)],
        torque_knots,
    )?;
    let dt = stable_dt_estimate(0.0, robot_params, fric, 1.0).min(2e-4);
    let traj = simulate_with(
        &FullState::origin(n),
        &profile,
        (0.0, ramp + hold),
        dt,
        robot_params,
        fric,
        &SimOptions {
            record_stride: 10,
            check_configuration: false,
        },
    )?;
    // average q over the hold window
    let start = traj.times.partition_point(|&t| t < ramp);
    let mut mean = DVector::zeros(n);
    let mut count = 0.0;
    for s in &traj.states[start..] {
        mean += &s.q;
        count += 1.0;
    }
    Ok(mean / count)
}

/// State matrix of the linearized dynamics at the origin,
/// M⋆δq̈ + σ₁u_P δq̇ + K(u_P) δq = 0, in first-order form.
pub fn linearized_matrix(u_p: f64, robot_params: &RobotParams, fric: &LuGreParams) -> DMatrix<f64> {
    let n = robot_params.links;
    let m0 = robot::inertia_matrix(&DVector::zeros(n), robot_params);
    let lu = m0.lu();
    let k = analytic_stiffness(u_p, robot_params, fric);
    let minv_k = lu.solve(&k).expect("inertia is positive definite");
    let minv_damp = lu
        .solve(&(DMatrix::identity(n, n) * (fric.bristle_damping * u_p)))
        .expect("inertia is positive definite");

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).copy_from(&DMatrix::identity(n, n));
    a.view_mut((n, 0), (n, n)).copy_from(&(-&minv_k));
    a.view_mut((n, n), (n, n)).copy_from(&(-&minv_damp));
    a
}

/// Eigenvalues of the linearized dynamics; all have negative real part for
/// u_P > 0.
pub fn linearized_eigenvalues(
    u_p: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Vec<Complex<f64>> {
    linearized_matrix(u_p, robot_params, fric)
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (RobotParams, LuGreParams) {
        (RobotParams::default(), LuGreParams::default())
    }

    #[test]
    fn analytic_stiffness_structure() {
        let (rp, fp) = setup();
        let k0 = analytic_stiffness(0.0, &rp, &fp);
        // jamming-free: α₁𝟏 + α₂I
        for i in 0..3 {
            for j in 0..3 {
                let expected = rp.gravity_coeff + if i == j { rp.elastic_coeff } else { 0.0 };
                assert_relative_eq!(k0[(i, j)], expected, max_relative = 1e-15);
            }
        }
        // pressure only shifts the diagonal
        let k1 = analytic_stiffness(1.0e4, &rp, &fp);
        let k2 = analytic_stiffness(3.0e4, &rp, &fp);
        let diff = &k2 - &k1;
        let expected_shift = fp.bristle_stiffness * 2.0e4;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { expected_shift } else { 0.0 };
                assert_relative_eq!(diff[(i, j)], want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn analytic_stiffness_eigenstructure() {
        // rank-one update: eigenvalues {nα₁ + β} ∪ {β (n−1 times)}, β = α₂+σ₀u_P
        let (rp, fp) = setup();
        let u_p = 2.0e4;
        let beta = rp.elastic_coeff + fp.bristle_stiffness * u_p;
        let mut eigs: Vec<f64> = analytic_stiffness(u_p, &rp, &fp)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(eigs[0], beta, max_relative = 1e-12);
        assert_relative_eq!(eigs[1], beta, max_relative = 1e-12);
        assert_relative_eq!(eigs[2], 3.0 * rp.gravity_coeff + beta, max_relative = 1e-12);
    }

    #[test]
    fn hessian_route_matches_analytic() {
        let (rp, fp) = setup();
        for u_p in [0.0, 1.0e4, 8.0e4] {
            let ka = analytic_stiffness(u_p, &rp, &fp);
            let kh = hessian_stiffness(u_p, &rp, &fp);
            let rel = (&ka - &kh).norm() / ka.norm();
            assert!(rel < 1e-6, "u_p={u_p}: rel err {rel:.2e}");
        }
    }

    #[test]
    fn hessian_step_insensitivity() {
        let (rp, fp) = setup();
        let ka = analytic_stiffness(2.0e4, &rp, &fp);
        for step in [1e-7, 1e-6, 1e-5, 1e-4] {
            let kh = hessian_stiffness_with_step(2.0e4, step, &rp, &fp);
            let rel = (&ka - &kh).norm() / ka.norm();
            assert!(rel < 1e-6, "step={step}: rel err {rel:.2e}");
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let (rp, fp) = setup();
        let kh = hessian_stiffness(1.0e4, &rp, &fp);
        assert_relative_eq!((&kh - kh.transpose()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn probe_requires_vacuum() {
        let (rp, fp) = setup();
        assert!(matches!(
            probe_stiffness(0.0, 1.0, &rp, &fp, &SettleOptions::default()),
            Err(Error::PressureRequired(_))
        ));
    }

    #[test]
    fn probe_recovers_analytic_stiffness() {
        let (rp, fp) = setup();
        let u_p = 3.0e4;
        let tau = probe_torque_for(1e-3, u_p, &rp, &fp);
        let opts = SettleOptions {
            dwell: 0.1,
            max_time: 10.0,
            ..Default::default()
        };
        let k_est = probe_stiffness(u_p, tau, &rp, &fp, &opts).unwrap();
        let k_ref = analytic_stiffness(u_p, &rp, &fp);
        let rel = (&k_est - &k_ref).norm() / k_ref.norm();
        assert!(rel < 0.02, "rel err {rel:.3e}");
    }

    #[test]
    fn probe_linearity_in_torque() {
        let (rp, fp) = setup();
        let u_p = 2.0e4;
        let opts = SettleOptions {
            dwell: 0.1,
            max_time: 10.0,
            ..Default::default()
        };
        let tau = probe_torque_for(1e-3, u_p, &rp, &fp);
        let mut full = DVector::zeros(3);
        full[0] = tau;
        let profile_full =
            InputProfile::constant(DVector::zeros(2), u_p, full.clone()).unwrap();
        let (s_full, _) = settle(&FullState::origin(3), &profile_full, 0.0, &rp, &fp, &opts).unwrap();
        let profile_half = InputProfile::constant(DVector::zeros(2), u_p, full * 0.5).unwrap();
        let (s_half, _) = settle(&FullState::origin(3), &profile_half, 0.0, &rp, &fp, &opts).unwrap();
        let ratio = s_full.q.norm() / s_half.q.norm();
        assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn probe_steady_state_balances_applied_torque() {
        // at the settled probe state, |∇U + σ₀u_P z| = |τ_ext|
        let (rp, fp) = setup();
        let u_p = 3.0e4;
        let opts = SettleOptions {
            dwell: 0.1,
            max_time: 10.0,
            ..Default::default()
        };
        let tau_mag = probe_torque_for(1e-3, u_p, &rp, &fp);
        let mut tau = DVector::zeros(3);
        tau[1] = tau_mag;
        let profile = InputProfile::constant(DVector::zeros(2), u_p, tau.clone()).unwrap();
        let (settled, _) = settle(&FullState::origin(3), &profile, 0.0, &rp, &fp, &opts).unwrap();
        let balance = robot::potential_gradient(&settled.q, &rp)
            + &settled.z * (fp.bristle_stiffness * u_p)
            - &tau;
        assert!(balance.norm() < 1e-4 * tau.norm(), "imbalance {:.3e}", balance.norm());
    }

    #[test]
    fn transverse_stiffness_increases_with_pressure() {
        let (rp, fp) = setup();
        let opts = SettleOptions {
            dwell: 0.1,
            max_time: 10.0,
            ..Default::default()
        };
        let f1 = 1e-3 * transverse_stiffness_analytic(1.0e4, &rp, &fp) * 0.3;
        let kt1 = transverse_stiffness(1.0e4, f1, &rp, &fp, &opts).unwrap();
        let f2 = 1e-3 * transverse_stiffness_analytic(5.0e4, &rp, &fp) * 0.3;
        let kt2 = transverse_stiffness(5.0e4, f2, &rp, &fp, &opts).unwrap();
        assert!(kt2 > kt1, "{kt2} <= {kt1}");
        assert_relative_eq!(
            kt1,
            transverse_stiffness_analytic(1.0e4, &rp, &fp),
            max_relative = 0.02
        );
    }

    #[test]
    fn linearized_modes_are_stable_under_vacuum() {
        let (rp, fp) = setup();
        for u_p in [1.0e3, 1.0e4, 8.0e4] {
            let eigs = linearized_eigenvalues(u_p, &rp, &fp);
            assert_eq!(eigs.len(), 6);
            for e in eigs {
                assert!(e.re < 0.0, "u_p={u_p}: eigenvalue {e} not stable");
            }
        }
        // without vacuum the modes are undamped (purely imaginary)
        let eigs0 = linearized_eigenvalues(0.0, &rp, &fp);
        for e in eigs0 {
            assert!(e.re.abs() < 1e-9);
            assert!(e.im.abs() > 0.0);
        }
    }
}

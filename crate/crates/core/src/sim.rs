//! Fixed-step RK4 time integration and trajectory recording.
//!
//! `simulate` integrates on a uniform grid, splitting internal substeps at
//! every input-profile breakpoint so that no Runge–Kutta stage straddles a
//! pressure or torque discontinuity. Energy jumps at pressure set-point
//! changes are logged as events, as are configuration-set exits and time
//! steps too large for the friction stiffness.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::interconnect::{self, FullState};
use crate::lugre::{self, LuGreParams};
use crate::profile::InputProfile;
use crate::robot::{self, RobotParams, CONFIG_ANGLE_LIMIT};

/// Diagnostics recorded while integrating.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Vacuum set-point changed; the total Hamiltonian jumps by
    /// ½σ₀·Δu_P·|z|², which is not dissipation and is excluded from audits.
    PressureJump {
        t: f64,
        before: f64,
        after: f64,
        energy_jump: f64,
    },
    /// A joint left the configuration set |qᵢ| < π (diagnostic, not fatal).
    ConfigurationExit { t: f64, joint: usize, angle: f64 },
    /// dt·σ₀·|v|/μ_C exceeded 1: the bristle dynamics are under-resolved.
    StiffnessWarning { t: f64, dt: f64, product: f64 },
}

/// Recorded trajectory with per-sample derived quantities. All derived
/// columns are recomputable from the states and the input profile.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
    /// Vacuum pressure at each sample \[Pa\].
    pub pressures: Vec<f64>,
    /// Mechanical energy H(q, p) \[J\].
    pub hamiltonian: Vec<f64>,
    /// Bristle energy H_z(z, u_P) \[J\].
    pub bristle_energy: Vec<f64>,
    /// Generalized velocity v = M⁻¹p \[rad/s\].
    pub velocity: Vec<DVector<f64>>,
    /// Friction torque τ_f \[N·m\].
    pub friction: Vec<DVector<f64>>,
    /// |p|.
    pub momentum_residual: Vec<f64>,
    /// |∇U(q) + σ₀ u_P z| — distance from static force balance.
    pub gradient_residual: Vec<f64>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &FullState {
        self.states.last().expect("empty trajectory")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("empty trajectory")
    }

    /// Total energy ℋ = H + H_z at sample k.
    pub fn total_energy(&self, k: usize) -> f64 {
        self.hamiltonian[k] + self.bristle_energy[k]
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.velocity
            .iter()
            .map(|v| v.amax())
            .fold(0.0, f64::max)
    }

    fn push_sample(
        &mut self,
        t: f64,
        chi: &FullState,
        u_p: f64,
        robot_params: &RobotParams,
        fric: &LuGreParams,
    ) -> Result<()> {
        let v = robot::velocity_qp(&chi.q, &chi.p, robot_params)?;
        let z_dot = lugre::bristle_rate(&chi.z, &v, fric);
        let tau_f = lugre::friction_torque(&chi.z, &z_dot, &v, u_p, fric)?;
        let h = robot::hamiltonian_qp(&chi.q, &chi.p, robot_params)?;
        let hz = lugre::bristle_energy(&chi.z, u_p, fric);
        let grad_u = robot::potential_gradient(&chi.q, robot_params);
        let grad_res = (&grad_u + &chi.z * (fric.bristle_stiffness * u_p)).norm();

        self.times.push(t);
        self.pressures.push(u_p);
        self.hamiltonian.push(h);
        self.bristle_energy.push(hz);
        self.momentum_residual.push(chi.p.norm());
        self.gradient_residual.push(grad_res);
        self.velocity.push(v);
        self.friction.push(tau_f);
        self.states.push(chi.clone());
        Ok(())
    }

    /// Copy of the sample range `[start, end)` (events retained if their time
    /// falls inside the kept span).
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        let t0 = self.times[start];
        let t1 = self.times[end - 1];
        Trajectory {
            times: self.times[start..end].to_vec(),
            states: self.states[start..end].to_vec(),
            pressures: self.pressures[start..end].to_vec(),
            hamiltonian: self.hamiltonian[start..end].to_vec(),
            bristle_energy: self.bristle_energy[start..end].to_vec(),
            velocity: self.velocity[start..end].to_vec(),
            friction: self.friction[start..end].to_vec(),
            momentum_residual: self.momentum_residual[start..end].to_vec(),
            gradient_residual: self.gradient_residual[start..end].to_vec(),
            events: self
                .events
                .iter()
                .filter(|e| {
                    let t = match e {
                        Event::PressureJump { t, .. } => *t,
                        Event::ConfigurationExit { t, .. } => *t,
                        Event::StiffnessWarning { t, .. } => *t,
                    };
                    t >= t0 && t <= t1
                })
                .cloned()
                .collect(),
        }
    }

    /// CSV with header `t,q1..qn,p1..pn,z1..zn,H,Hz,tauf1..taufn,res_p,res_grad`.
    /// Floats are written in round-trip decimal form.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.links());
        let mut header = String::from("t");
        for block in ["q", "p", "z"] {
            for i in 1..=n {
                header.push_str(&format!(",{block}{i}"));
            }
        }
        header.push_str(",H,Hz");
        for i in 1..=n {
            header.push_str(&format!(",tauf{i}"));
        }
        header.push_str(",res_p,res_grad");
        writeln!(out, "{header}")?;

        for k in 0..self.len() {
            let mut row = format!("{}", self.times[k]);
            let s = &self.states[k];
            for block in [&s.q, &s.p, &s.z] {
                for x in block.iter() {
                    row.push_str(&format!(",{x}"));
                }
            }
            row.push_str(&format!(",{},{}", self.hamiltonian[k], self.bristle_energy[k]));
            for x in self.friction[k].iter() {
                row.push_str(&format!(",{x}"));
            }
            row.push_str(&format!(
                ",{},{}",
                self.momentum_residual[k], self.gradient_residual[k]
            ));
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Options for `simulate_with`.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Record every k-th step (the recorded grid stays uniform with spacing
    /// k·dt); the final state is always recorded.
    pub record_stride: usize,
    /// Emit `ConfigurationExit` events when |qᵢ| ≥ π.
    pub check_configuration: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_stride: 1,
            check_configuration: true,
        }
    }
}

/// One classical RK4 step of `f` from `y` at time `t`.
fn rk4_step<F>(y: &DVector<f64>, t: f64, dt: f64, f: &F) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &(y + &k1 * (0.5 * dt)))?;
    let k3 = f(t + 0.5 * dt, &(y + &k2 * (0.5 * dt)))?;
    let k4 = f(t + dt, &(y + &k3 * dt))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// One RK4 step of the full model, sampling the profile at each stage time.
///
/// This is the raw primitive: it does not split at profile breakpoints (see
/// `simulate` for discontinuity-aware integration).
pub fn step(
    chi: &FullState,
    t: f64,
    dt: f64,
    profile: &InputProfile,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<FullState> {
    if !(dt != 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams("dt must be nonzero and finite".into()));
    }
    let n = robot_params.links;
    let f = |tt: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::Unstable { t: tt });
        }
        let state = FullState::from_flat(n, y);
        let rate = interconnect::vector_field(
            &state,
            &profile.tension(tt),
            profile.pressure(tt),
            &profile.external_torque(tt),
            robot_params,
            fric,
        )?;
        Ok(rate.to_flat())
    };
    let next = rk4_step(&chi.to_flat(), t, dt, &f)?;
    let next = FullState::from_flat(n, &next);
    if !next.is_finite() {
        return Err(Error::Unstable { t: t + dt });
    }
    Ok(next)
}

/// Integrate over `t_span` on a uniform grid with spacing `dt`.
///
/// The horizon is rounded to a whole number of steps. Substeps are split at
/// profile breakpoints; piecewise-constant inputs are sampled at substep
/// midpoints so each substep sees a single set-point.
pub fn simulate(
    chi0: &FullState,
    profile: &InputProfile,
    t_span: (f64, f64),
    dt: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<Trajectory> {
    simulate_with(chi0, profile, t_span, dt, robot_params, fric, &SimOptions::default())
}

pub fn simulate_with(
    chi0: &FullState,
    profile: &InputProfile,
    t_span: (f64, f64),
    dt: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
    opts: &SimOptions,
) -> Result<Trajectory> {
    robot_params.validate()?;
    fric.validate()?;
    let (t0, t1) = t_span;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParams("dt must be > 0".into()));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidParams("t_span must have t1 > t0".into()));
    }
    let n = robot_params.links;
    if chi0.links() != n {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: n,
            got: chi0.links(),
        });
    }
    let steps = (((t1 - t0) / dt).round() as usize).max(1);
    let stride = opts.record_stride.max(1);

    let mut traj = Trajectory::default();
    traj.push_sample(t0, chi0, profile.pressure(t0), robot_params, fric)?;

    // pre-flight: explicit RK4 cannot resolve rates beyond ~2.5/dt
    let dt_safe = stable_dt_estimate(profile.max_pressure(), robot_params, fric, 1.0);
    if dt > dt_safe {
        log::warn!(
            "dt = {dt} exceeds the stability estimate {dt_safe:.3e} for this pressure schedule"
        );
        traj.events.push(Event::StiffnessWarning {
            t: t0,
            dt,
            product: dt / dt_safe,
        });
    }

    let mut chi = chi0.clone();
    let mut config_exit_flagged = vec![false; n];
    let mut bristle_warned = !traj.events.is_empty();

    for k in 0..steps {
        let ta = t0 + k as f64 * dt;
        let tb = t0 + (k + 1) as f64 * dt;

        // split at breakpoints so no stage straddles a discontinuity
        let mut cuts = profile.breakpoints_within(ta, tb);
        cuts.push(tb);
        let mut sub_t = ta;
        for cut in cuts {
            let h = cut - sub_t;
            if h <= 0.0 {
                continue;
            }
            let mid = 0.5 * (sub_t + cut);
            let u_p_seg = profile.pressure(mid);
            let tau_seg = profile.external_torque(mid);
            let f = |tt: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
                if y.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Unstable { t: tt });
                }
                let state = FullState::from_flat(n, y);
                let rate = interconnect::vector_field(
                    &state,
                    &profile.tension(tt),
                    u_p_seg,
                    &tau_seg,
                    robot_params,
                    fric,
                )?;
                Ok(rate.to_flat())
            };
            let next = rk4_step(&chi.to_flat(), sub_t, h, &f)?;
            chi = FullState::from_flat(n, &next);
            if !chi.is_finite() {
                return Err(Error::Unstable { t: cut });
            }
            sub_t = cut;
        }

        // events at pressure jumps inside this step
        for (tj, before, after) in profile.pressure_jumps_within(ta, tb) {
            let jump = 0.5 * fric.bristle_stiffness * (after - before) * chi.z.dot(&chi.z);
            traj.events.push(Event::PressureJump {
                t: tj,
                before,
                after,
                energy_jump: jump,
            });
        }

        if opts.check_configuration {
            for j in 0..n {
                if !config_exit_flagged[j] && chi.q[j].abs() >= CONFIG_ANGLE_LIMIT {
                    config_exit_flagged[j] = true;
                    log::warn!("joint {} left the configuration set at t = {tb}", j + 1);
                    traj.events.push(Event::ConfigurationExit {
                        t: tb,
                        joint: j,
                        angle: chi.q[j],
                    });
                }
            }
        }

        let record = (k + 1) % stride == 0 || k + 1 == steps;
        if record {
            traj.push_sample(tb, &chi, profile.pressure(tb), robot_params, fric)?;
            if !bristle_warned {
                let v_max = traj.velocity.last().expect("just pushed").amax();
                let product = dt * fric.bristle_stiffness * v_max / fric.mu_coulomb;
                if product > 1.0 {
                    bristle_warned = true;
                    traj.events.push(Event::StiffnessWarning { t: tb, dt, product });
                }
            }
        }
    }
    Ok(traj)
}

/// Largest stable RK4 step for the stiffest rates of the model, with a 2×
/// safety margin: friction damping (σ₁+σ₂)u_P·λmax(M⁻¹), bristle–momentum
/// oscillation √(σ₀u_P·λmax(M⁻¹)), bristle relaxation σ₀·v/μ_C, and the
/// elastic rate.
pub fn stable_dt_estimate(
    u_p: f64,
    robot_params: &RobotParams,
    fric: &LuGreParams,
    velocity_scale: f64,
) -> f64 {
    let n = robot_params.links;
    let m0 = robot::inertia_matrix(&DVector::zeros(n), robot_params);
    let eig_min = m0
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let minv = 1.0 / eig_min;
    let k_elastic = robot_params.elastic_coeff + n as f64 * robot_params.gravity_coeff;

    let rate_damp = (fric.bristle_damping + fric.viscous_friction) * u_p * minv;
    let rate_osc = (fric.bristle_stiffness * u_p * minv).sqrt();
    let rate_elastic = (k_elastic * minv).sqrt();
    let rate_bristle = fric.bristle_stiffness * velocity_scale.abs() / fric.mu_coulomb;

    let rate = rate_damp.max(rate_osc).max(rate_elastic).max(rate_bristle);
    1.25 / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (RobotParams, LuGreParams) {
        (RobotParams::default(), LuGreParams::default())
    }

    fn quiet() -> InputProfile {
        InputProfile::rest(2, 3, 0.0).unwrap()
    }

    #[test]
    fn equilibrium_stays_put() {
        let (rp, fp) = setup();
        let chi = FullState::origin(3);
        let next = step(&chi, 0.0, 1e-3, &quiet(), &rp, &fp).unwrap();
        assert_eq!(next.to_flat(), chi.to_flat());

        let traj = simulate(&chi, &quiet(), (0.0, 0.1), 1e-3, &rp, &fp).unwrap();
        assert_eq!(traj.final_state().to_flat(), chi.to_flat());
        assert_eq!(traj.len(), 101);
    }

    #[test]
    fn reverse_step_recovers_start_on_conservative_segment() {
        let (rp, fp) = setup();
        let chi = FullState::new(
            DVector::from_vec(vec![0.4, -0.2, 0.1]),
            DVector::from_vec(vec![0.002, 0.001, -0.001]),
            DVector::zeros(3),
        )
        .unwrap();
        // round-trip error scales like the local truncation, O(dt⁵)
        let mut errs = Vec::new();
        for dt in [1e-3, 1e-4] {
            let fwd = step(&chi, 0.0, dt, &quiet(), &rp, &fp).unwrap();
            let back = step(&fwd, dt, -dt, &quiet(), &rp, &fp).unwrap();
            errs.push((back.to_flat() - chi.to_flat()).norm());
        }
        assert!(errs[0] < 1e-7, "round-trip error {:.3e}", errs[0]);
        assert!(errs[1] < 1e-12, "round-trip error {:.3e}", errs[1]);
        // at least fifth-order shrinkage between the two step sizes
        assert!(errs[0] / errs[1].max(1e-300) > 1e4);
    }

    #[test]
    fn one_step_error_shrinks_sixteen_fold_when_dt_halves() {
        let (rp, fp) = setup();
        let chi = FullState::new(
            DVector::from_vec(vec![0.5, -0.3, 0.2]),
            DVector::from_vec(vec![0.004, 0.002, -0.003]),
            DVector::zeros(3),
        )
        .unwrap();
        let prof = quiet();
        let dt = 2e-3;
        // reference: dt/8 substeps over the same horizon
        let mut reference = chi.clone();
        for i in 0..8 {
            reference = step(&reference, i as f64 * dt / 8.0, dt / 8.0, &prof, &rp, &fp).unwrap();
        }
        let coarse = step(&chi, 0.0, dt, &prof, &rp, &fp).unwrap();
        let mut fine = step(&chi, 0.0, dt / 2.0, &prof, &rp, &fp).unwrap();
        fine = step(&fine, dt / 2.0, dt / 2.0, &prof, &rp, &fp).unwrap();
        let e_coarse = (coarse.to_flat() - reference.to_flat()).norm();
        let e_fine = (fine.to_flat() - reference.to_flat()).norm();
        let ratio = e_coarse / e_fine;
        assert!(
            (8.0..64.0).contains(&ratio),
            "expected ~16x reduction, got {ratio:.1} ({e_coarse:.3e} vs {e_fine:.3e})"
        );
    }

    #[test]
    fn conservative_energy_is_preserved() {
        let (rp, fp) = setup();
        let chi = FullState::new(
            DVector::from_vec(vec![0.3, 0.1, -0.2]),
            DVector::from_vec(vec![0.003, -0.001, 0.002]),
            DVector::zeros(3),
        )
        .unwrap();
        let traj = simulate(&chi, &quiet(), (0.0, 1.0), 1e-4, &rp, &fp).unwrap();
        let h0 = traj.total_energy(0);
        let drift = (traj.total_energy(traj.len() - 1) - h0).abs();
        assert!(drift < 1e-8 * h0.abs().max(1.0), "drift = {drift:.3e}");
    }

    #[test]
    fn pressure_jump_event_carries_energy_jump() {
        let (rp, fp) = setup();
        let prof = InputProfile::new(
            2,
            3,
            vec![(0.0, DVector::zeros(2))],
            vec![(0.0, 0.0), (0.05, 1.0e3)],
            vec![(0.0, DVector::zeros(3))],
        )
        .unwrap();
        let chi = FullState::new(
            DVector::from_vec(vec![0.2, 0.0, -0.1]),
            DVector::zeros(3),
            DVector::from_vec(vec![0.01, -0.02, 0.0]),
        )
        .unwrap();
        let traj = simulate(&chi, &prof, (0.0, 0.1), 5e-5, &rp, &fp).unwrap();
        let jump = traj
            .events
            .iter()
            .find_map(|e| match e {
                Event::PressureJump { t, energy_jump, .. } => Some((*t, *energy_jump)),
                _ => None,
            })
            .expect("pressure jump recorded");
        assert_relative_eq!(jump.0, 0.05, max_relative = 1e-12);
        assert!(jump.1 > 0.0);
    }

    #[test]
    fn leaving_configuration_set_is_diagnosed_not_fatal() {
        let (rp, fp) = setup();
        // large momentum swings the chain past |q| = π
        let chi = FullState::new(
            DVector::zeros(3),
            DVector::from_vec(vec![0.8, 0.0, 0.0]),
            DVector::zeros(3),
        )
        .unwrap();
        let traj = simulate(&chi, &quiet(), (0.0, 1.0), 1e-4, &rp, &fp).unwrap();
        assert!(traj
            .events
            .iter()
            .any(|e| matches!(e, Event::ConfigurationExit { .. })));
    }

    #[test]
    fn unstable_run_reports_time() {
        let (rp, fp) = setup();
        let prof = InputProfile::rest(2, 3, 8.0e4).unwrap();
        let chi = FullState::new(
            DVector::from_vec(vec![0.3, 0.0, 0.0]),
            DVector::zeros(3),
            DVector::zeros(3),
        )
        .unwrap();
        // dt far above the stability estimate for 80 kPa
        let result = simulate(&chi, &prof, (0.0, 1.0), 1e-2, &rp, &fp);
        assert!(matches!(result, Err(Error::Unstable { .. })));
    }

    #[test]
    fn record_stride_keeps_endpoints() {
        let (rp, fp) = setup();
        let traj = simulate_with(
            &FullState::origin(3),
            &quiet(),
            (0.0, 0.01),
            1e-3,
            &rp,
            &fp,
            &SimOptions {
                record_stride: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(traj.times.first().copied(), Some(0.0));
        assert_relative_eq!(traj.final_time(), 0.01, max_relative = 1e-12);
        // 0, 4e-3, 8e-3, 1e-2
        assert_eq!(traj.len(), 4);
    }

    #[test]
    fn csv_round_trips_and_recomputes() {
        let (rp, fp) = setup();
        let chi = FullState::new(
            DVector::from_vec(vec![0.2, -0.1, 0.3]),
            DVector::from_vec(vec![0.001, 0.002, -0.001]),
            DVector::zeros(3),
        )
        .unwrap();
        let prof = InputProfile::rest(2, 3, 1.0e3).unwrap();
        let traj = simulate(&chi, &prof, (0.0, 0.005), 5e-5, &rp, &fp).unwrap();
        let csv = traj.to_csv_string();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(
            header,
            "t,q1,q2,q3,p1,p2,p3,z1,z2,z3,H,Hz,tauf1,tauf2,tauf3,res_p,res_grad"
        );
        for (k, line) in lines.enumerate() {
            let vals: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
            assert_eq!(vals.len(), 17);
            let s = &traj.states[k];
            // exact round-trip of the state
            for i in 0..3 {
                assert_eq!(vals[1 + i], s.q[i]);
                assert_eq!(vals[4 + i], s.p[i]);
                assert_eq!(vals[7 + i], s.z[i]);
            }
            // derived columns recompute bit-identically from the state
            let h = robot::hamiltonian_qp(&s.q, &s.p, &rp).unwrap();
            assert_eq!(vals[10], h);
            assert_eq!(vals[11], lugre::bristle_energy(&s.z, traj.pressures[k], &fp));
        }
    }
}

//! Time-dependent inputs: tendon tensions, vacuum pressure, external torque.
//!
//! Tensions are piecewise-linear (motor ramps), pressure and external torque
//! are piecewise-constant (pump set-points, held loads). All breakpoint times
//! must be strictly increasing; tensions and pressure must be non-negative.

use nalgebra::DVector;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct InputProfile {
    tendons: usize,
    joints: usize,
    /// (time, tensions \[N\]) knots; linear interpolation, clamped ends.
    tension_knots: Vec<(f64, DVector<f64>)>,
    /// (time, pressure \[Pa\]) set-points; right-continuous steps.
    pressure_knots: Vec<(f64, f64)>,
    /// (time, torque \[N·m\]) set-points; right-continuous steps.
    torque_knots: Vec<(f64, DVector<f64>)>,
}

/// One segment of a phase schedule: tension ramps linearly from its value at
/// the start of the phase to `tension_target` at the end; pressure and
/// external torque are held constant throughout.
#[derive(Debug, Clone)]
pub struct Phase {
    pub duration: f64,
    pub tension_target: DVector<f64>,
    pub pressure: f64,
    pub external_torque: DVector<f64>,
}

impl InputProfile {
    /// Profile with constant inputs for all time.
    pub fn constant(tension: DVector<f64>, pressure: f64, torque: DVector<f64>) -> Result<Self> {
        let tendons = tension.len();
        let joints = torque.len();
        Self::new(
            tendons,
            joints,
            vec![(0.0, tension)],
            vec![(0.0, pressure)],
            vec![(0.0, torque)],
        )
    }

    /// Zero tension and torque under a fixed vacuum pressure.
    pub fn rest(tendons: usize, joints: usize, pressure: f64) -> Result<Self> {
        Self::constant(DVector::zeros(tendons), pressure, DVector::zeros(joints))
    }

    pub fn new(
        tendons: usize,
        joints: usize,
        tension_knots: Vec<(f64, DVector<f64>)>,
        pressure_knots: Vec<(f64, f64)>,
        torque_knots: Vec<(f64, DVector<f64>)>,
    ) -> Result<Self> {
        if tension_knots.is_empty() || pressure_knots.is_empty() || torque_knots.is_empty() {
            return Err(Error::InvalidProfile(
                "each schedule needs at least one knot".into(),
            ));
        }
        let check_times = |times: Vec<f64>| -> Result<()> {
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::InvalidProfile(
                    "breakpoints must be strictly increasing".into(),
                ));
            }
            if times.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidProfile("non-finite breakpoint".into()));
            }
            Ok(())
        };
        check_times(tension_knots.iter().map(|(t, _)| *t).collect())?;
        check_times(pressure_knots.iter().map(|(t, _)| *t).collect())?;
        check_times(torque_knots.iter().map(|(t, _)| *t).collect())?;
        for (t, u) in &tension_knots {
            if u.len() != tendons {
                return Err(Error::DimensionMismatch {
                    what: "tension knot",
                    expected: tendons,
                    got: u.len(),
                });
            }
            if u.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "tension at t = {t} must be non-negative and finite"
                )));
            }
        }
        for (t, p) in &pressure_knots {
            if *p < 0.0 || !p.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "pressure at t = {t} must be non-negative and finite"
                )));
            }
        }
        for (_, tau) in &torque_knots {
            if tau.len() != joints {
                return Err(Error::DimensionMismatch {
                    what: "external torque knot",
                    expected: joints,
                    got: tau.len(),
                });
            }
            if tau.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidProfile("non-finite external torque".into()));
            }
        }
        Ok(Self {
            tendons,
            joints,
            tension_knots,
            pressure_knots,
            torque_knots,
        })
    }

    /// Build a profile from consecutive phases starting at `t0` with the
    /// given initial tension.
    pub fn from_phases(
        t0: f64,
        initial_tension: DVector<f64>,
        phases: &[Phase],
    ) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::InvalidProfile("empty phase list".into()));
        }
        let tendons = initial_tension.len();
        let joints = phases[0].external_torque.len();
        let mut tension = vec![(t0, initial_tension)];
        let mut pressure = Vec::new();
        let mut torque = Vec::new();
        let mut t = t0;
        for (i, ph) in phases.iter().enumerate() {
            if !(ph.duration > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "phase {i} duration must be > 0"
                )));
            }
            pressure.push((t, ph.pressure));
            torque.push((t, ph.external_torque.clone()));
            t += ph.duration;
            tension.push((t, ph.tension_target.clone()));
        }
        // collapse repeated set-points so breakpoints stay strictly increasing
        pressure.dedup_by(|b, a| a.1 == b.1);
        torque.dedup_by(|b, a| a.1 == b.1);
        Self::new(tendons, joints, tension, pressure, torque)
    }

    pub fn tendons(&self) -> usize {
        self.tendons
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    /// Tension at time t (linear interpolation, clamped outside the knots).
    pub fn tension(&self, t: f64) -> DVector<f64> {
        let knots = &self.tension_knots;
        if t <= knots[0].0 {
            return knots[0].1.clone();
        }
        if t >= knots[knots.len() - 1].0 {
            return knots[knots.len() - 1].1.clone();
        }
        let idx = knots.partition_point(|(tk, _)| *tk <= t);
        let (t0, v0) = &knots[idx - 1];
        let (t1, v1) = &knots[idx];
        let w = (t - t0) / (t1 - t0);
        v0 * (1.0 - w) + v1 * w
    }

    /// Vacuum pressure at time t (right-continuous step).
    pub fn pressure(&self, t: f64) -> f64 {
        let idx = self.pressure_knots.partition_point(|(tk, _)| *tk <= t);
        self.pressure_knots[idx.max(1) - 1].1
    }

    /// External torque at time t (right-continuous step).
    pub fn external_torque(&self, t: f64) -> DVector<f64> {
        let idx = self.torque_knots.partition_point(|(tk, _)| *tk <= t);
        self.torque_knots[idx.max(1) - 1].1.clone()
    }

    /// All breakpoint times within (t0, t1), sorted and deduplicated. The
    /// integrator splits steps here so no stage straddles a discontinuity.
    pub fn breakpoints_within(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .tension_knots
            .iter()
            .map(|(t, _)| *t)
            .chain(self.pressure_knots.iter().map(|(t, _)| *t))
            .chain(self.torque_knots.iter().map(|(t, _)| *t))
            .filter(|&t| t > t0 && t < t1)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }

    /// Pressure discontinuities within (t0, t1]: (time, before, after).
    pub fn pressure_jumps_within(&self, t0: f64, t1: f64) -> Vec<(f64, f64, f64)> {
        self.pressure_knots
            .windows(2)
            .filter(|w| w[1].0 > t0 && w[1].0 <= t1 && w[1].1 != w[0].1)
            .map(|w| (w[1].0, w[0].1, w[1].1))
            .collect()
    }

    /// Largest pressure set-point over the whole schedule.
    pub fn max_pressure(&self) -> f64 {
        self.pressure_knots
            .iter()
            .map(|(_, p)| *p)
            .fold(0.0, f64::max)
    }
}

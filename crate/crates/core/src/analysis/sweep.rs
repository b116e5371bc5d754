//! Pressure sweeps: stiffness identification and shape-lock residuals across
//! a vacuum grid, with a least-squares line through the tip-stiffness data.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::analysis::shape_lock::{shape_locking_scenario, ShapeLockConfig};
use crate::analysis::stiffness::{
    analytic_stiffness, hessian_stiffness, probe_stiffness, probe_torque_for,
    transverse_stiffness, transverse_stiffness_analytic, SettleOptions,
};
use crate::error::{Error, Result};
use crate::lugre::LuGreParams;
use crate::robot::RobotParams;

/// Ordinary least-squares line y = slope·x + intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit a line through (x, y); `None` for fewer than two points or a
/// degenerate abscissa.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|yi| (yi - my) * (yi - my)).sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| {
                let e = yi - (slope * xi + intercept);
                e * e
            })
            .sum();
        1.0 - ss_res / syy
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Stiffness identified at one pressure.
#[derive(Debug, Clone)]
pub struct StiffnessPoint {
    /// Vacuum pressure \[Pa\].
    pub pressure: f64,
    pub analytic: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
    /// Quasi-static joint-space probe; absent at u_P = 0 where the plant has
    /// no dissipation to settle against.
    pub probe: Option<DMatrix<f64>>,
    /// Simulated transverse tip stiffness \[N/m\].
    pub transverse: f64,
}

#[derive(Debug, Clone)]
pub struct StiffnessSweep {
    /// Per-pressure outcomes; failures carry the error text and do not abort
    /// the rest of the sweep.
    pub points: Vec<std::result::Result<StiffnessPoint, String>>,
    /// Line through (u_P, K_T) over the successful points; `None` when fewer
    /// than two points are available (degenerate fit).
    pub fit: Option<LinearFit>,
}

/// Shape-lock outcome at one pressure.
#[derive(Debug, Clone)]
pub struct ShapeLockPoint {
    pub pressure: f64,
    pub residual_angle: f64,
    pub tip_displacement: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ShapeLockSweep {
    pub points: Vec<std::result::Result<ShapeLockPoint, String>>,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("pressure grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(
            "pressure grid must be strictly ascending".into(),
        ));
    }
    if grid.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidParams(
            "pressure grid entries must be non-negative and finite".into(),
        ));
    }
    Ok(())
}

/// Identify stiffness on a pressure grid; points run concurrently.
///
/// `delta_q` sets the joint-probe deflection target \[rad\] and
/// `tip_fraction` the tip-probe displacement target as a fraction of total
/// length.
pub fn pressure_sweep_stiffness(
    grid: &[f64],
    robot_params: &RobotParams,
    fric: &LuGreParams,
    settle: &SettleOptions,
    delta_q: f64,
) -> Result<StiffnessSweep> {
    validate_grid(grid)?;
    robot_params.validate()?;
    fric.validate()?;

    let points: Vec<std::result::Result<StiffnessPoint, String>> = grid
        .par_iter()
        .map(|&u_p| {
            let run = || -> Result<StiffnessPoint> {
                let analytic = analytic_stiffness(u_p, robot_params, fric);
                let hessian = hessian_stiffness(u_p, robot_params, fric);
                let probe = if u_p > 0.0 {
                    let tau = probe_torque_for(delta_q, u_p, robot_params, fric);
                    Some(probe_stiffness(u_p, tau, robot_params, fric, settle)?)
                } else {
                    None
                };
                // size the tip force for a displacement near delta_q · total length
                let reach = robot_params.links as f64 * robot_params.link_length;
                let force =
                    transverse_stiffness_analytic(u_p, robot_params, fric) * delta_q * reach;
                let transverse = transverse_stiffness(u_p, force, robot_params, fric, settle)?;
                Ok(StiffnessPoint {
                    pressure: u_p,
                    analytic,
                    hessian,
                    probe,
                    transverse,
                })
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.as_ref().ok())
        .map(|p| (p.pressure, p.transverse))
        .unzip();
    let fit = linear_fit(&xs, &ys);
    Ok(StiffnessSweep { points, fit })
}

/// Run the four-phase shape-lock experiment for each pressure on the grid;
/// points run concurrently and per-point failures are recorded, not fatal.
pub fn pressure_sweep_shape_lock(
    grid: &[f64],
    base: &ShapeLockConfig,
    robot_params: &RobotParams,
    fric: &LuGreParams,
) -> Result<ShapeLockSweep> {
    validate_grid(grid)?;
    let points = grid
        .par_iter()
        .map(|&u_p| {
            let cfg = ShapeLockConfig {
                lock_pressure: u_p,
                ..base.clone()
            };
            shape_locking_scenario(&cfg, robot_params, fric)
                .map(|r| ShapeLockPoint {
                    pressure: u_p,
                    residual_angle: r.residual_angle,
                    tip_displacement: r.tip_displacement,
                    converged: r.converged,
                })
                .map_err(|e| e.to_string())
        })
        .collect();
    Ok(ShapeLockSweep { points })
}

//! Jamming-free robot subsystem: a planar serial chain of uniform rods.
//!
//! The continuum robot is approximated by an n-link rigid chain with relative
//! joint angles `q`, generalized momenta `p`, and total energy
//!
//! ```text
//! H(q, p) = ½ pᵀ M⁻¹(q) p + U(q)
//! U(q)    = α₁ [1 − cos(q_Σ)] + ½ α₂ |q|² + U₀,   q_Σ = Σᵢ qᵢ
//! ```
//!
//! The inertia matrix is assembled for uniform rods (mass `link_mass`, length
//! `link_length`) rotating in a vertical plane; the straight configuration
//! `q = 0` points along +y.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Joint angles beyond this magnitude are outside the configuration set and
/// reported as a diagnostic by the simulator.
pub const CONFIG_ANGLE_LIMIT: f64 = std::f64::consts::PI;

/// Geometry, masses, and energy coefficients of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotParams {
    /// Number of links n (≥ 1).
    pub links: usize,
    /// Number of tendons m (≥ 1).
    pub tendons: usize,
    /// Length of each link \[m\].
    pub link_length: f64,
    /// Mass of each link \[kg\].
    pub link_mass: f64,
    /// Gravitational energy coefficient α₁ \[J\].
    pub gravity_coeff: f64,
    /// Elastic energy coefficient α₂ \[J/rad²\] (> 0).
    pub elastic_coeff: f64,
    /// Rest potential energy offset U₀ \[J\].
    pub rest_energy: f64,
    /// Tendon moment arm \[m\], used by the default antagonistic routing.
    pub moment_arm: f64,
    /// Optional explicit n×m tendon routing matrix; replaces the default.
    pub tendon_matrix: Option<DMatrix<f64>>,
}

impl Default for RobotParams {
    fn default() -> Self {
        // Desk-scale chain; the energy coefficients are arbitrary defaults,
        // not identified from hardware.
        Self {
            links: 3,
            tendons: 2,
            link_length: 0.1,
            link_mass: 0.2,
            gravity_coeff: 0.5,
            elastic_coeff: 1.0,
            rest_energy: 0.0,
            moment_arm: 0.02,
            tendon_matrix: None,
        }
    }
}

impl RobotParams {
    /// Check the parameter invariants.
    pub fn validate(&self) -> Result<()> {
        if self.links < 1 {
            return Err(Error::InvalidParams("links must be >= 1".into()));
        }
        if self.tendons < 1 {
            return Err(Error::InvalidParams("tendons must be >= 1".into()));
        }
        if !(self.link_length > 0.0) || !self.link_length.is_finite() {
            return Err(Error::InvalidParams("link_length must be > 0".into()));
        }
        if !(self.link_mass > 0.0) || !self.link_mass.is_finite() {
            return Err(Error::InvalidParams("link_mass must be > 0".into()));
        }
        if !(self.gravity_coeff >= 0.0) || !self.gravity_coeff.is_finite() {
            return Err(Error::InvalidParams("gravity_coeff must be >= 0".into()));
        }
        if !(self.elastic_coeff > 0.0) || !self.elastic_coeff.is_finite() {
            return Err(Error::InvalidParams("elastic_coeff must be > 0".into()));
        }
        if !self.rest_energy.is_finite() {
            return Err(Error::InvalidParams("rest_energy must be finite".into()));
        }
        if !(self.moment_arm > 0.0) || !self.moment_arm.is_finite() {
            return Err(Error::InvalidParams("moment_arm must be > 0".into()));
        }
        match &self.tendon_matrix {
            Some(g) if g.nrows() != self.links || g.ncols() != self.tendons => {
                Err(Error::InvalidParams(format!(
                    "tendon_matrix must be {}x{}, got {}x{}",
                    self.links,
                    self.tendons,
                    g.nrows(),
                    g.ncols()
                )))
            }
            None if self.tendons != 2 => Err(Error::InvalidParams(
                "default antagonistic routing needs tendons == 2; supply tendon_matrix".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Configuration and momentum of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    /// Joint angles \[rad\], length n.
    pub q: DVector<f64>,
    /// Generalized momenta \[kg·m²·rad/s\], length n.
    pub p: DVector<f64>,
}

impl RobotState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                what: "RobotState momenta",
                expected: q.len(),
                got: p.len(),
            });
        }
        Ok(Self { q, p })
    }

    /// Rest state at the origin.
    pub fn origin(n: usize) -> Self {
        Self {
            q: DVector::zeros(n),
            p: DVector::zeros(n),
        }
    }
}

/// Cumulative (absolute) link angles θᵢ = q₁ + … + qᵢ.
fn absolute_angles(q: &DVector<f64>) -> Vec<f64> {
    let mut theta = Vec::with_capacity(q.len());
    let mut acc = 0.0;
    for &qi in q.iter() {
        acc += qi;
        theta.push(acc);
    }
    theta
}

/// Inertia matrix M(q) of the chain, symmetric positive definite.
///
/// Assembled in absolute-angle coordinates (each rod contributes its
/// center-of-mass translation plus rotation about the center) and mapped to
/// relative coordinates through the lower-triangular sum matrix.
pub fn inertia_matrix(q: &DVector<f64>, params: &RobotParams) -> DMatrix<f64> {
    let n = params.links;
    debug_assert_eq!(q.len(), n);
    let ml2 = params.link_mass * params.link_length * params.link_length;
    let theta = absolute_angles(q);

    // A: inertia in absolute angles.
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            if j == k {
                a[(j, j)] = ml2 * (1.0 / 3.0 + (n - 1 - j) as f64);
            } else {
                let outer = n - 1 - j.max(k);
                let c = ml2 * (0.5 + outer as f64);
                a[(j, k)] = c * (theta[j] - theta[k]).cos();
            }
        }
    }

    // M_rs = Σ_{j≥r, k≥s} A_jk (congruence with the ones lower-triangle).
    let mut m = DMatrix::zeros(n, n);
    for r in 0..n {
        for s in 0..n {
            let mut sum = 0.0;
            for j in r..n {
                for k in s..n {
                    sum += a[(j, k)];
                }
            }
            m[(r, s)] = sum;
        }
    }
    m
}

/// Partial derivatives ∂M/∂q_t for t = 0..n, exact for the rod-chain form.
pub(crate) fn inertia_partials(q: &DVector<f64>, params: &RobotParams) -> Vec<DMatrix<f64>> {
    let n = params.links;
    let ml2 = params.link_mass * params.link_length * params.link_length;
    let theta = absolute_angles(q);

    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let mut da = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                // ∂θ_j/∂q_t = 1 iff t ≤ j, so the difference is ±1 only when
                // t lies strictly between the two link indices.
                let dj = if t <= j { 1.0 } else { 0.0 };
                let dk = if t <= k { 1.0 } else { 0.0 };
                let w = dj - dk;
                if w == 0.0 {
                    continue;
                }
                let outer = n - 1 - j.max(k);
                let c = ml2 * (0.5 + outer as f64);
                da[(j, k)] = -c * (theta[j] - theta[k]).sin() * w;
            }
        }
        let mut dm = DMatrix::zeros(n, n);
        for r in 0..n {
            for s in 0..n {
                let mut sum = 0.0;
                for j in r..n {
                    for k in s..n {
                        sum += da[(j, k)];
                    }
                }
                dm[(r, s)] = sum;
            }
        }
        out.push(dm);
    }
    out
}

/// Potential energy U(q) = α₁[1 − cos(q_Σ)] + ½ α₂|q|² + U₀ \[J\].
pub fn potential_energy(q: &DVector<f64>, params: &RobotParams) -> f64 {
    let q_sum: f64 = q.iter().sum();
    let gravity = params.gravity_coeff * (1.0 - q_sum.cos());
    let elastic = 0.5 * params.elastic_coeff * q.dot(q);
    gravity + elastic + params.rest_energy
}

/// Analytic gradient ∇U(q) = α₁ sin(q_Σ)·𝟏 + α₂ q.
pub fn potential_gradient(q: &DVector<f64>, params: &RobotParams) -> DVector<f64> {
    let q_sum: f64 = q.iter().sum();
    let g = params.gravity_coeff * q_sum.sin();
    DVector::from_fn(q.len(), |i, _| g + params.elastic_coeff * q[i])
}

/// Total energy H(q, p). Uses a Cholesky solve for M⁻¹p, never an explicit
/// inverse.
pub fn hamiltonian(state: &RobotState, params: &RobotParams) -> Result<f64> {
    hamiltonian_qp(&state.q, &state.p, params)
}

pub(crate) fn hamiltonian_qp(q: &DVector<f64>, p: &DVector<f64>, params: &RobotParams) -> Result<f64> {
    let v = velocity_qp(q, p, params)?;
    Ok(0.5 * p.dot(&v) + potential_energy(q, params))
}

/// Generalized velocity v = M⁻¹(q) p, the passive output of the subsystem.
pub fn velocity(state: &RobotState, params: &RobotParams) -> Result<DVector<f64>> {
    velocity_qp(&state.q, &state.p, params)
}

pub(crate) fn velocity_qp(
    q: &DVector<f64>,
    p: &DVector<f64>,
    params: &RobotParams,
) -> Result<DVector<f64>> {
    let m = inertia_matrix(q, params);
    let chol = m.cholesky().ok_or(Error::InertiaNotSpd)?;
    Ok(chol.solve(p))
}

/// Gradient of H: returns (∇_q H, ∇_p H).
///
/// ∇_p H = M⁻¹p; ∇_q H = ∇U − ½ vᵀ(∂M/∂q_k)v per component, using the exact
/// partials of the rod-chain inertia.
pub fn hamiltonian_gradient(
    state: &RobotState,
    params: &RobotParams,
) -> Result<(DVector<f64>, DVector<f64>)> {
    hamiltonian_gradient_qp(&state.q, &state.p, params)
}

pub(crate) fn hamiltonian_gradient_qp(
    q: &DVector<f64>,
    p: &DVector<f64>,
    params: &RobotParams,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let v = velocity_qp(q, p, params)?;
    let mut grad_q = potential_gradient(q, params);
    if p.iter().any(|&pi| pi != 0.0) {
        let partials = inertia_partials(q, params);
        for (k, dm) in partials.iter().enumerate() {
            grad_q[k] -= 0.5 * v.dot(&(dm * &v));
        }
    }
    Ok((grad_q, v))
}

/// Tendon input matrix G, mapping tensions u ≥ 0 to joint torques G·u.
///
/// Default: constant antagonistic two-tendon routing r·\[𝟏, −𝟏\]; a
/// user-supplied `tendon_matrix` is passed through unchanged.
pub fn input_matrix(_q: &DVector<f64>, params: &RobotParams) -> DMatrix<f64> {
    if let Some(g) = &params.tendon_matrix {
        return g.clone();
    }
    let n = params.links;
    let r = params.moment_arm;
    DMatrix::from_fn(n, 2, |_, col| if col == 0 { r } else { -r })
}

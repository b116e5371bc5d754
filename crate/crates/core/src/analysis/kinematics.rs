//! Planar forward kinematics of the chain tip.

use nalgebra::{DMatrix, DVector};

use crate::robot::RobotParams;

/// Tip position (x, y) \[m\]; the straight configuration q = 0 points along
/// +y, so the tip sits at (0, n·ℓ).
pub fn forward_kinematics(q: &DVector<f64>, params: &RobotParams) -> (f64, f64) {
    let l = params.link_length;
    let mut theta = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    for &qi in q.iter() {
        theta += qi;
        x += l * theta.sin();
        y += l * theta.cos();
    }
    (x, y)
}

/// 2×n Jacobian of the tip position with respect to the joint angles.
pub fn tip_jacobian(q: &DVector<f64>, params: &RobotParams) -> DMatrix<f64> {
    let n = q.len();
    let l = params.link_length;
    let mut theta = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &qi in q.iter() {
        acc += qi;
        theta.push(acc);
    }
    let mut jac = DMatrix::zeros(2, n);
    for r in 0..n {
        let mut dx = 0.0;
        let mut dy = 0.0;
        for &th in &theta[r..] {
            dx += l * th.cos();
            dy -= l * th.sin();
        }
        jac[(0, r)] = dx;
        jac[(1, r)] = dy;
    }
    jac
}

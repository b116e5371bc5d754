use jamsim_core::*;
use nalgebra::DVector;
fn main() {
    let rp = RobotParams::default();
    let fp = LuGreParams::default();
    // eigenvalues of M(0)
    let m0 = inertia_matrix(&DVector::zeros(3), &rp);
    println!("M(0) eigs: {:?}", m0.symmetric_eigenvalues());
    println!("stable dt @8e4: {:.3e}", stable_dt_estimate(8.0e4, &rp, &fp, 1.0));
    let prof = InputProfile::rest(2, 3, 8.0e4).unwrap();
    let chi = FullState::new(DVector::from_vec(vec![0.3,0.0,0.0]), DVector::zeros(3), DVector::zeros(3)).unwrap();
    let r = simulate(&chi, &prof, (0.0, 1.0), 1e-2, &rp, &fp);
    match &r {
        Ok(t) => println!("OK?! final q = {:?} |p|={:.3e} maxv={:.3e} events={:?}", t.final_state().q.as_slice(), t.final_state().p.norm(), t.max_abs_velocity(), t.events.len()),
        Err(e) => println!("Err: {e}"),
    }
    // reverse step scale
    let quiet = InputProfile::rest(2, 3, 0.0).unwrap();
    let chi2 = FullState::new(DVector::from_vec(vec![0.4,-0.2,0.1]), DVector::from_vec(vec![0.002,0.001,-0.001]), DVector::zeros(3)).unwrap();
    for dt in [1e-3, 1e-4] {
        let fwd = step(&chi2, 0.0, dt, &quiet, &rp, &fp).unwrap();
        let back = step(&fwd, dt, -dt, &quiet, &rp, &fp).unwrap();
        println!("dt={dt:.0e}: reverse err = {:.3e}", (back.to_flat()-chi2.to_flat()).norm());
    }
}

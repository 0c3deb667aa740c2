use nalgebra::DVector;
use proptest::prelude::*;

use scatrel::asymptotics::{impact_map, launch_incoming, scatter};
use scatrel::dynamics::integrate_until_exit;
use scatrel::frame::{rotate2, TangentFrame};
use scatrel::semiclassics::{assemble_terms, Term};
use scatrel::{PhasePoint, PotentialField, ScatteringConfig};

fn cfg() -> ScatteringConfig {
    ScatteringConfig::new(0.5, 2.0, 2)
}

fn field(amplitude: f64) -> PotentialField {
    PotentialField::central(2, 1.0, amplitude)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_and_symplectic_structure_are_preserved(
        angle in 0.0..std::f64::consts::TAU,
        b in -1.1..1.1f64,
        amplitude in -0.2..0.2f64,
    ) {
        let theta = DVector::from_column_slice(&[angle.cos(), angle.sin()]);
        let f = field(amplitude);
        let traj = integrate_until_exit(&launch_incoming(&theta, &DVector::from_element(1, b), &cfg()), &f, &cfg()).unwrap();
        prop_assert!(traj.energy_drift(&f) <= 1e-9 * 0.5);
        prop_assert!(traj.symplectic_residual() <= 1e-6);
    }

    #[test]
    fn reversed_ray_returns_along_the_incoming_direction(
        angle in 0.0..std::f64::consts::TAU,
        b in -0.95..0.95f64,
        amplitude in -0.2..0.2f64,
    ) {
        let theta = DVector::from_column_slice(&[angle.cos(), angle.sin()]);
        let c = cfg();
        let f = field(amplitude);
        let s = scatter(&TangentFrame::new(&theta), &DVector::from_element(1, b), &c, &f).unwrap();
        let back = PhasePoint::new(s.asymptotics.x_exit.clone(), &s.asymptotics.xi_inf * -c.speed());
        let end = integrate_until_exit(&back, &f, &c).unwrap().end().xi.normalize();
        prop_assert!((end + &theta).amax() <= 1e-7);
    }

    #[test]
    fn central_scattering_commutes_with_rotations(
        angle in 0.0..std::f64::consts::TAU,
        b in -1.0..1.0f64,
    ) {
        let c = cfg();
        let f = field(0.1);
        let e1 = DVector::from_column_slice(&[1.0, 0.0]);
        let theta = rotate2(&e1, angle);
        let z = DVector::from_element(1, b);
        let reference = rotate2(&impact_map(&e1, &z, &c, &f).unwrap(), angle);
        let rotated = impact_map(&theta, &z, &c, &f).unwrap();
        // The standard frame of θ⊥ may flip orientation with θ; either image is a rotation.
        let mirrored = rotate2(&impact_map(&e1, &(-&z), &c, &f).unwrap(), angle);
        prop_assert!((&rotated - &reference).amax() <= 1e-9 || (&rotated - &mirrored).amax() <= 1e-9);
    }

    #[test]
    fn cross_section_of_one_term_is_inverse_density(
        sigma in 1e-3..1e3f64,
        action in -10.0..10.0f64,
        maslov in 0usize..4,
        h in 1e-3..1.0f64,
    ) {
        let t = DVector::from_column_slice(&[1.0, 0.0]);
        let r = assemble_terms(&t, &t, &[Term { sigma_hat: sigma, action, maslov }], h).unwrap();
        prop_assert!((r.cross_section * sigma - 1.0).abs() <= 1e-12);
    }
}

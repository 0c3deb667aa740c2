//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances and runtime budgets are fixed below.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use scatrel::asymptotics::{angular_density, impact_map, launch_incoming, locate_degenerate, scatter};
use scatrel::branches::{continue_branch, find_branches, Branch, SeedGrid};
use scatrel::checks::{random_direction, random_in_ball, shipped_potentials};
use scatrel::dynamics::integrate_until_exit;
use scatrel::frame::{det_columns, planar_angle, rotate2, TangentFrame};
use scatrel::oracles::{
    deflection_derivative, deflection_extremum, deflection_roots, interference_period_extract,
    radial_jacobi_conjugate_points, rainbow_impact, signed_deflection,
};
use scatrel::semiclassics::{
    action_gradients, amplitude_fan, assemble_from_branches, maslov_index, mixed_hessian, modified_action,
    MaslovOptions,
};
use scatrel::{PhasePoint, PotentialField, ScatError, ScatteringConfig};

const LAMBDA: f64 = 0.5;
const R0: f64 = 2.0;

const ENERGY_TOL: f64 = 1e-9;
const SYMPLECTIC_TOL: f64 = 1e-6;
const DEFLECTION_TOL: f64 = 1e-6;
const DENSITY_TOL: f64 = 1e-5;
const GRADIENT_TOL: f64 = 1e-5;
const ACTION_INVARIANCE_TOL: f64 = 1e-8;
const HESSIAN_DET_MIN: f64 = 1e-6;
const HESSIAN_AGREEMENT_TOL: f64 = 1e-4;
const ROOT_MATCH_TOL: f64 = 1e-6;
const INTERFERENCE_TOL: f64 = 0.02;
const RAINBOW_TOL: f64 = 1e-6;
const RECIPROCITY_TOL: f64 = 1e-7;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, title: &str, passed: bool, detail: String, elapsed: Duration) {
        if !passed {
            self.failures += 1;
        }
        println!(
            "criterion {id:>2} [{}] {title}: {detail} ({:.2} s)",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
}

fn cfg(n: usize) -> ScatteringConfig {
    ScatteringConfig::new(LAMBDA, R0, n)
}

fn z1(b: f64) -> DVector<f64> {
    DVector::from_element(1, b)
}

fn unit_at(angle: f64) -> DVector<f64> {
    DVector::from_column_slice(&[angle.cos(), angle.sin()])
}

/// Sign relating the frame coordinate z of θ⊥ to the rotation sense.
fn orientation(theta: &DVector<f64>) -> f64 {
    let e = TangentFrame::new(theta).basis()[0].clone();
    det_columns(&[theta.clone(), e])
}

fn central() -> PotentialField {
    PotentialField::central(2, 1.0, 0.2 * LAMBDA)
}

/// Regular (θ, ω) pairs of the central bump with all their branches.
fn regular_pairs() -> Vec<(DVector<f64>, DVector<f64>, Vec<Branch>)> {
    let field = central();
    let c = cfg(2);
    let (_, peak) = deflection_extremum(&field, LAMBDA).expect("oracle");
    let fractions = [0.3, -0.6, 0.75, -0.2, 0.5, -0.85, 0.15, -0.4, 0.65, -0.7];
    fractions
        .iter()
        .enumerate()
        .map(|(i, frac)| {
            let theta = unit_at(0.3 + 0.61 * i as f64);
            let omega = rotate2(&theta, frac * peak);
            let set = find_branches(&theta, &omega, &c, &field, &SeedGrid::for_field(&field, &c)).expect("branches");
            (theta, omega, set.branches)
        })
        .collect()
}

fn criteria_1_2(report: &mut Report) {
    let start = Instant::now();
    let mut energy: f64 = 0.0;
    let mut symplectic: f64 = 0.0;
    let mut count = 0;
    let mut errors = 0;
    for n in [2, 3] {
        let c = cfg(n);
        for (i, (_, field)) in shipped_potentials(n).into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + 10 * n as u64 + i as u64);
            for _ in 0..100 {
                let theta = random_direction(&mut rng, n);
                let z = random_in_ball(&mut rng, n - 1, field.support_radius());
                match integrate_until_exit(&launch_incoming(&theta, &z, &c), &field, &c) {
                    Ok(traj) => {
                        energy = energy.max(traj.energy_drift(&field));
                        symplectic = symplectic.max(traj.symplectic_residual());
                        count += 1;
                    }
                    Err(_) => errors += 1,
                }
            }
        }
    }
    let elapsed = start.elapsed();
    report.line(
        1,
        "energy conservation",
        errors == 0 && energy <= ENERGY_TOL * LAMBDA && elapsed.as_secs_f64() < 30.0,
        format!("{count} trajectories, max drift {energy:.3e} (bound {:.1e}), {errors} integration errors", ENERGY_TOL * LAMBDA),
        elapsed,
    );
    report.line(
        2,
        "symplecticity",
        errors == 0 && symplectic <= SYMPLECTIC_TOL,
        format!("max ‖MᵀJM − J‖∞ {symplectic:.3e} (bound {SYMPLECTIC_TOL:.0e}) over all stored samples"),
        elapsed,
    );
}

fn criterion_3(report: &mut Report) {
    let start = Instant::now();
    let c = cfg(2);
    let theta = unit_at(0.0);
    let orient = orientation(&theta);
    let mut worst_angle: f64 = 0.0;
    let mut worst_density: f64 = 0.0;
    let mut failed = None;
    for amplitude in [0.05, -0.05, 0.2 * LAMBDA] {
        let field = PotentialField::central(2, 1.0, amplitude);
        for i in 0..20 {
            let b = -0.95 + 1.9 * i as f64 / 19.0;
            let run = || -> Result<(f64, Option<f64>), ScatError> {
                let xi = impact_map(&theta, &z1(b), &c, &field)?;
                let angle_err = (planar_angle(&theta, &xi) - orient * signed_deflection(&field, LAMBDA, b)?).abs();
                let d = deflection_derivative(&field, LAMBDA, b)?.abs();
                let density = if d > 1e-3 {
                    Some((angular_density(&theta, &z1(b), &c, &field)? - d).abs() / d)
                } else {
                    None
                };
                Ok((angle_err, density))
            };
            match run() {
                Ok((a, d)) => {
                    worst_angle = worst_angle.max(a);
                    if let Some(d) = d {
                        worst_density = worst_density.max(d);
                    }
                }
                Err(e) => failed = Some(e),
            }
        }
    }
    let elapsed = start.elapsed();
    report.line(
        3,
        "oracle equivalence",
        failed.is_none() && worst_angle <= DEFLECTION_TOL && worst_density <= DENSITY_TOL && elapsed.as_secs_f64() < 60.0,
        format!(
            "max |Δangle| {worst_angle:.3e} rad (bound {DEFLECTION_TOL:.0e}), max σ̂ vs |Θ′| {worst_density:.3e} (bound {DENSITY_TOL:.0e}){}",
            failed.map(|e| format!(", error: {e}")).unwrap_or_default()
        ),
        elapsed,
    );
}

fn criteria_4_5_6(report: &mut Report) {
    let start = Instant::now();
    let field = central();
    let c = cfg(2);
    let pairs = regular_pairs();
    let branch_count: usize = pairs.iter().map(|p| p.2.len()).sum();
    let all_regular = pairs.iter().all(|p| !p.2.is_empty() && p.2.iter().all(|b| b.sigma_hat > 1e-3));
    let setup = start.elapsed();

    let t4 = Instant::now();
    let mut worst_grad: f64 = 0.0;
    let mut err4 = None;
    for (theta, omega, branches) in &pairs {
        for b in branches {
            match action_gradients(theta, omega, b, &c, &field) {
                Ok(g) => worst_grad = worst_grad.max(g.relative_error()),
                Err(e) => err4 = Some(e),
            }
        }
    }
    let e4 = setup + t4.elapsed();
    report.line(
        4,
        "action gradients",
        all_regular && err4.is_none() && worst_grad <= GRADIENT_TOL && e4.as_secs_f64() < 120.0,
        format!(
            "{} pairs, {branch_count} branches, max relative error {worst_grad:.3e} (bound {GRADIENT_TOL:.0e}){}",
            pairs.len(),
            err4.map(|e| format!(", error: {e}")).unwrap_or_default()
        ),
        e4,
    );

    let t5 = Instant::now();
    let mut worst_readout: f64 = 0.0;
    let mut worst_offset: f64 = 0.0;
    let mut err5 = None;
    let dt = 2.0 * R0 / c.speed();
    for (theta, omega, branches) in &pairs {
        for b in branches {
            let scale = b.action.abs().max(1.0);
            for ext in [dt, 3.0 * dt] {
                let s = modified_action(&b.trajectory, theta, omega, &c, ext);
                worst_readout = worst_readout.max((s - b.action).abs() / scale);
            }
            for extra in [0.5, 1.0] {
                let shifted = c.clone().with_margin(c.margin + extra);
                match continue_branch(theta, omega, &b.z, &shifted, &field) {
                    Ok(m) => worst_offset = worst_offset.max((m.action - b.action).abs() / scale),
                    Err(e) => err5 = Some(e),
                }
            }
        }
    }
    report.line(
        5,
        "action invariance",
        err5.is_none() && worst_readout <= ACTION_INVARIANCE_TOL && worst_offset <= ACTION_INVARIANCE_TOL,
        format!(
            "readout time {worst_readout:.3e}, launch offset {worst_offset:.3e} (bound {ACTION_INVARIANCE_TOL:.0e}){}",
            err5.map(|e| format!(", error: {e}")).unwrap_or_default()
        ),
        t5.elapsed(),
    );

    let t6 = Instant::now();
    let mut min_det = f64::INFINITY;
    let mut worst_agree: f64 = 0.0;
    let mut err6 = None;
    for (theta, omega, branches) in &pairs {
        for b in branches {
            match mixed_hessian(theta, omega, b, &c, &field) {
                Ok(h) => {
                    min_det = min_det.min(h.determinant().abs());
                    worst_agree = worst_agree.max(h.agreement());
                }
                Err(e) => err6 = Some(e),
            }
        }
    }
    report.line(
        6,
        "mixed Hessian non-degeneracy",
        err6.is_none() && min_det > HESSIAN_DET_MIN && worst_agree <= HESSIAN_AGREEMENT_TOL,
        format!(
            "min |det| {min_det:.3e} (bound {HESSIAN_DET_MIN:.0e}), max disagreement {worst_agree:.3e} (bound {HESSIAN_AGREEMENT_TOL:.0e}){}",
            err6.map(|e| format!(", error: {e}")).unwrap_or_default()
        ),
        t6.elapsed(),
    );
}

fn criterion_7(report: &mut Report) {
    let start = Instant::now();
    let field = central();
    let c = cfg(2);
    let seeds = SeedGrid::for_field(&field, &c);
    let (_, peak) = deflection_extremum(&field, LAMBDA).expect("oracle");
    let fractions = [-1.15, -0.9, -0.7, -0.45, -0.2, 0.15, 0.4, 0.65, 0.85, 1.1];
    let (mut missed, mut spurious, mut oracle_total) = (0usize, 0usize, 0usize);
    let mut error = None;
    for i in 0..10 {
        let theta = unit_at(2.0 * PI * i as f64 / 10.0 + 0.1);
        let orient = orientation(&theta);
        for frac in fractions {
            let target = frac * peak;
            let omega = rotate2(&theta, target);
            let found = match find_branches(&theta, &omega, &c, &field, &seeds) {
                Ok(set) => set.branches.iter().map(|b| b.z[0]).collect::<Vec<_>>(),
                Err(e) => {
                    error = Some(e);
                    continue;
                }
            };
            let roots = deflection_roots(&field, LAMBDA, orient * target, 400).expect("oracle");
            oracle_total += roots.len();
            missed += roots.iter().filter(|r| !found.iter().any(|z| (z - *r).abs() <= ROOT_MATCH_TOL)).count();
            spurious += found.iter().filter(|z| !roots.iter().any(|r| (*z - r).abs() <= ROOT_MATCH_TOL)).count();
        }
    }
    report.line(
        7,
        "branch completeness",
        error.is_none() && missed == 0 && spurious == 0,
        format!(
            "100 pairs, {oracle_total} oracle roots, {missed} missed, {spurious} spurious{}",
            error.map(|e| format!(", error: {e}")).unwrap_or_default()
        ),
        start.elapsed(),
    );
}

fn criterion_8(report: &mut Report) {
    let start = Instant::now();
    let field = PotentialField::central(2, 1.5, 0.4);
    let c = cfg(2);
    let theta = unit_at(0.0);
    let run = || -> Result<(f64, f64, usize), ScatError> {
        let (_, peak) = deflection_extremum(&field, LAMBDA)?;
        let omega = rotate2(&theta, 0.5 * peak);
        let set = find_branches(&theta, &omega, &c, &field, &SeedGrid::for_field(&field, &c))?;
        if set.len() != 2 {
            return Ok((f64::NAN, f64::NAN, set.len()));
        }
        let samples = (0..256)
            .map(|i| {
                let h = 0.01 + 0.01 * i as f64 / 255.0;
                assemble_from_branches(&theta, &omega, &set, h).map(|r| (h, r.cross_section))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let expected = (set.branches[0].action - set.branches[1].action).abs();
        Ok((interference_period_extract(&samples)?, expected, 2))
    };
    let (ok, detail) = match run() {
        Ok((got, expected, 2)) => {
            let rel = (got - expected).abs() / expected;
            (rel <= INTERFERENCE_TOL, format!("ΔS fit {got:.6}, |S₁ − S₂| {expected:.6}, relative error {rel:.3e} (bound {INTERFERENCE_TOL})"))
        }
        Ok((_, _, k)) => (false, format!("expected two branches, found {k}")),
        Err(e) => (false, format!("error: {e}")),
    };
    report.line(8, "interference period", ok, detail, start.elapsed());
}

fn criterion_9(report: &mut Report) {
    let start = Instant::now();
    let field = central();
    let c = cfg(2);
    let theta = unit_at(0.0);
    let run = || -> Result<(bool, String), ScatError> {
        let edge = locate_degenerate(&theta, &z1(0.5), &z1(1.5), &c, &field)?[0];
        let edge_ok = edge <= 1.0 && edge > 0.5;
        let rainbow = locate_degenerate(&theta, &z1(0.45), &z1(0.7), &c, &field)?[0];
        let oracle = rainbow_impact(&field, LAMBDA, 0.45, 0.7)?;
        let rainbow_ok = (rainbow - oracle).abs() <= RAINBOW_TOL;

        let omega_r = impact_map(&theta, &z1(rainbow), &c, &field)?;
        let angle_r = planar_angle(&theta, &omega_r);
        let mut fan: Vec<DVector<f64>> = [-0.6, 0.3, 0.8, 0.99, 1.01, 1.3].iter().map(|f| rotate2(&theta, f * angle_r)).collect();
        fan.insert(4, omega_r.clone());
        fan.push(theta.clone());
        let flagged = [4usize, 7];
        let entries = amplitude_fan(&theta, &fan, &c, &field, 0.01);
        let mut refusals_ok = true;
        for (i, e) in entries.iter().enumerate() {
            let refused = matches!(e.result, Err(ScatError::DegenerateBranchPresent { .. }) | Err(ScatError::DegenerateFamily));
            if refused != flagged.contains(&i) {
                refusals_ok = false;
            }
        }
        Ok((
            edge_ok && rainbow_ok && refusals_ok,
            format!(
                "support edge z* = {edge:.6} (ρ = 1), rainbow z* = {rainbow:.9} vs oracle {oracle:.9}, fan refusals at flagged directions only: {refusals_ok}"
            ),
        ))
    };
    let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
    report.line(9, "degeneracy location and refusal", ok, detail, start.elapsed());
}

fn criterion_10(report: &mut Report) {
    let start = Instant::now();
    let c = cfg(2);
    let theta = unit_at(0.0);
    let mu = |field: &PotentialField, b: f64| -> Result<usize, ScatError> {
        let traj = integrate_until_exit(&launch_incoming(&theta, &z1(b), &c), field, &c)?;
        maslov_index(&traj, &MaslovOptions::default())
    };
    let run = || -> Result<(bool, String), ScatError> {
        let free = PotentialField::free(2);
        let mut zero_ok = true;
        for b in [-0.7, 0.0, 0.4, 1.3] {
            zero_ok &= mu(&free, b)? == 0;
        }
        // Weak repulsive bumps: every ray defocuses within the exit sphere.
        for amplitude in [0.01, 0.02] {
            let field = PotentialField::central(2, 1.0, amplitude);
            for i in 1..10 {
                let b = 0.1 * i as f64;
                zero_ok &= mu(&field, b)? == 0 && radial_jacobi_conjugate_points(&field, &c, b, false)? == 0;
            }
        }
        let configs = [(-0.2, 0.3), (-0.3, 0.5), (-0.4, 0.2), (-0.45, 0.85), (-0.3, 0.8)];
        let mut agree = 0;
        let mut pairs = Vec::new();
        for (amplitude, b) in configs {
            let field = PotentialField::central(2, 1.0, amplitude);
            let got = mu(&field, b)?;
            let oracle = radial_jacobi_conjugate_points(&field, &c, b, false)?;
            if got == oracle {
                agree += 1;
            }
            pairs.push(format!("{got}/{oracle}"));
        }
        Ok((
            zero_ok && agree == configs.len(),
            format!("free and weak repulsive μ = 0: {zero_ok}; attractive μ/oracle {}", pairs.join(" ")),
        ))
    };
    let (ok, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
    report.line(10, "Maslov index", ok, detail, start.elapsed());
}

fn criterion_11(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut error = None;
    for i in 0..50 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let c = cfg(n);
        let (_, field) = shipped_potentials(n).swap_remove(i % 3);
        let theta = random_direction(&mut rng, n);
        let z = random_in_ball(&mut rng, n - 1, field.support_radius());
        let run = || -> Result<f64, ScatError> {
            let s = scatter(&TangentFrame::new(&theta), &z, &c, &field)?;
            let back = PhasePoint::new(s.asymptotics.x_exit.clone(), &s.asymptotics.xi_inf * -c.speed());
            let traj = integrate_until_exit(&back, &field, &c)?;
            Ok((traj.end().xi.normalize() + &theta).amax())
        };
        match run() {
            Ok(v) => worst = worst.max(v),
            Err(e) => error = Some(e),
        }
    }
    report.line(
        11,
        "reciprocity",
        error.is_none() && worst <= RECIPROCITY_TOL,
        format!(
            "50 samples, max ‖ξ∞(reversed) + θ‖∞ {worst:.3e} (bound {RECIPROCITY_TOL:.0e}){}",
            error.map(|e| format!(", error: {e}")).unwrap_or_default()
        ),
        start.elapsed(),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    criteria_1_2(&mut report);
    criterion_3(&mut report);
    criteria_4_5_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9(&mut report);
    criterion_10(&mut report);
    criterion_11(&mut report);
    if report.failures == 0 {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", report.failures);
        ExitCode::FAILURE
    }
}

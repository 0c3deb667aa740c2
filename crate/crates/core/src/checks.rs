//! Invariant suites run by `scatrel check`.
//!
//! Every check draws its samples from a seeded ChaCha stream, so a report
//! is a deterministic function of (potential, configuration, options).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    angular_density_in_frame, jacobian_in_frame, launch_incoming, scatter, JacobianMethod,
};
use crate::branches::{continue_branch, find_branches, Branch, SeedGrid};
use crate::dynamics::{flow_for, integrate_until_exit, PhasePoint, ScatteringConfig};
use crate::error::{Result, ScatError};
use crate::frame::{planar_angle, rotate2, TangentFrame};
use crate::oracles::{deflection_derivative, deflection_extremum, deflection_roots, signed_deflection};
use crate::potential::{Bump, PotentialField};
use crate::semiclassics::{action_gradients, maslov_index, mixed_hessian, modified_action, MaslovOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Dynamics,
    Asymptotics,
    Branches,
    Semiclassics,
    Oracles,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Dynamics, Suite::Asymptotics, Suite::Branches, Suite::Semiclassics, Suite::Oracles];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Dynamics => "dynamics",
            Suite::Asymptotics => "asymptotics",
            Suite::Branches => "branches",
            Suite::Semiclassics => "semiclassics",
            Suite::Oracles => "oracles",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A suite name, or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    All,
    One(Suite),
}

impl Selection {
    pub fn suites(self) -> Vec<Suite> {
        match self {
            Selection::All => Suite::ALL.to_vec(),
            Selection::One(s) => vec![s],
        }
    }
}

impl FromStr for Selection {
    type Err = ScatError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Selection::All);
        }
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .map(Selection::One)
            .ok_or_else(|| {
                ScatError::InvalidConfig(format!(
                    "unknown suite `{s}` (expected all, dynamics, asymptotics, branches, semiclassics or oracles)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { samples: 12, seed: 7 }
    }
}

/// Result of one invariant: the worst observed value against its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    pub potential: String,
    pub passed: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// The three potentials the tool ships with.
pub fn shipped_potentials(n: usize) -> Vec<(&'static str, PotentialField)> {
    let at = |xy: [f64; 2]| {
        let mut c = vec![0.0; n];
        c[0] = xy[0];
        c[1] = xy[1];
        c
    };
    vec![
        ("repulsive", PotentialField::central(n, 1.0, 0.1)),
        ("attractive", PotentialField::central(n, 1.0, -0.1)),
        (
            "two_bump",
            PotentialField::new(
                n,
                vec![Bump::new(at([0.5, 0.3]), 0.6, 0.15), Bump::new(at([-0.4, -0.5]), 0.5, -0.1)],
            )
            .expect("shipped two-bump potential is valid"),
        ),
    ]
}

/// (θ, ω, branch).
type PairBranch = (DVector<f64>, DVector<f64>, Branch);

/// Uniform unit vector.
pub fn random_direction<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let r = v.norm();
        if r > 1e-3 && r <= 1.0 {
            return v / r;
        }
    }
}

/// Uniform point of the ball of the given radius in ℝ^{dim}.
pub fn random_in_ball<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

struct Ctx<'a> {
    name: &'a str,
    field: &'a PotentialField,
    cfg: &'a ScatteringConfig,
    opts: CheckOptions,
}

impl Ctx<'_> {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.opts.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Launch data aimed into the support.
    fn launches(&self, salt: u64) -> Vec<(DVector<f64>, DVector<f64>)> {
        let mut rng = self.rng(salt);
        let reach = self.field.support_radius().max(0.5);
        (0..self.opts.samples)
            .map(|_| (random_direction(&mut rng, self.cfg.n), random_in_ball(&mut rng, self.cfg.n - 1, reach)))
            .collect()
    }

    fn outcome(&self, id: &str, worst: f64, tolerance: f64, detail: impl Into<String>) -> CheckOutcome {
        CheckOutcome {
            id: id.to_string(),
            potential: self.name.to_string(),
            passed: worst.is_finite() && worst <= tolerance,
            worst,
            tolerance,
            detail: detail.into(),
        }
    }

    fn failure(&self, id: &str, tolerance: f64, err: ScatError) -> CheckOutcome {
        CheckOutcome {
            id: id.to_string(),
            potential: self.name.to_string(),
            passed: false,
            worst: f64::INFINITY,
            tolerance,
            detail: err.to_string(),
        }
    }

    fn skipped(&self, id: &str, why: &str) -> CheckOutcome {
        CheckOutcome {
            id: id.to_string(),
            potential: self.name.to_string(),
            passed: true,
            worst: 0.0,
            tolerance: 0.0,
            detail: format!("not applicable: {why}"),
        }
    }

    /// Regular (θ, ω) pairs with a branch through a sampled z.
    fn regular_branches(&self, salt: u64, count: usize) -> Result<Vec<PairBranch>> {
        let mut rng = self.rng(salt);
        let mut out = Vec::new();
        let reach = self.field.support_radius();
        let mut attempts = 0;
        while out.len() < count && attempts < 50 * count.max(1) {
            attempts += 1;
            let theta = random_direction(&mut rng, self.cfg.n);
            let z = random_in_ball(&mut rng, self.cfg.n - 1, reach);
            let s = match scatter(&TangentFrame::new(&theta), &z, self.cfg, self.field) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let omega = s.asymptotics.xi_inf.clone();
            if omega.dot(&theta) > 1.0 - 1e-6 {
                continue;
            }
            let Ok(branch) = continue_branch(&theta, &omega, &z, self.cfg, self.field) else {
                continue;
            };
            if branch.sigma_hat > 0.05 {
                out.push((theta, omega, branch));
            }
        }
        Ok(out)
    }
}

type Check = fn(&Ctx) -> Result<CheckOutcome>;

fn checks_of(suite: Suite) -> Vec<(&'static str, f64, Check)> {
    match suite {
        Suite::Dynamics => vec![
            ("dynamics.energy", 1e-9, energy as Check),
            ("dynamics.symplectic", 1e-6, symplectic),
            ("dynamics.monodromy_fd", 1e-4, monodromy_fd),
            ("dynamics.splice", 1e-12, splice),
            ("dynamics.time_reversal", 1e-7, time_reversal),
        ],
        Suite::Asymptotics => vec![
            ("asymptotics.reciprocity", 1e-7, reciprocity as Check),
            ("asymptotics.frame_independence", 1e-10, frame_independence),
            ("asymptotics.jacobian_agreement", 1e-4, jacobian_agreement),
            ("asymptotics.outside_support", 4.0 * f64::EPSILON, outside_support),
        ],
        Suite::Branches => vec![
            ("branches.completeness", 0.0, completeness as Check),
            ("branches.stability", 1e-10, stability),
        ],
        Suite::Semiclassics => vec![
            ("semiclassics.readout_time", 1e-8, readout_time as Check),
            ("semiclassics.launch_offset", 1e-8, launch_offset),
            ("semiclassics.gradients", 1e-5, gradients),
            ("semiclassics.mixed_hessian", 1e-4, hessian_symmetry),
            ("semiclassics.maslov_parity", 0.0, maslov_parity),
        ],
        Suite::Oracles => vec![
            ("oracles.deflection", 1e-6, oracle_deflection as Check),
            ("oracles.derivative", 1e-5, oracle_derivative),
        ],
    }
}

/// Run the selected suites on one potential.
pub fn run_checks(
    name: &str,
    field: &PotentialField,
    cfg: &ScatteringConfig,
    selection: Selection,
    opts: CheckOptions,
) -> Vec<CheckOutcome> {
    let ctx = Ctx { name, field, cfg, opts };
    let mut out = Vec::new();
    for suite in selection.suites() {
        for (id, tol, check) in checks_of(suite) {
            let mut o = match check(&ctx) {
                Ok(o) => o,
                Err(e) => ctx.failure(id, tol, e),
            };
            o.id = id.to_string();
            o.tolerance = tol;
            if !o.detail.starts_with("not applicable") {
                o.passed = o.worst.is_finite() && o.worst <= tol;
            }
            out.push(o);
        }
    }
    out
}

fn max_of(it: impl Iterator<Item = Result<f64>>) -> Result<f64> {
    let mut worst = 0.0f64;
    for v in it {
        let v = v?;
        worst = if v.is_nan() { f64::INFINITY } else { worst.max(v) };
    }
    Ok(worst)
}

fn energy(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.launches(1).into_iter().map(|(th, z)| {
        let traj = integrate_until_exit(&launch_incoming(&th, &z, c.cfg), c.field, c.cfg)?;
        Ok(traj.energy_drift(c.field) / c.cfg.lambda)
    }))?;
    Ok(c.outcome("", worst, 0.0, "max |p(t) − p(0)| / λ"))
}

fn symplectic(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.launches(1).into_iter().map(|(th, z)| {
        let traj = integrate_until_exit(&launch_incoming(&th, &z, c.cfg), c.field, c.cfg)?;
        Ok(traj.symplectic_residual())
    }))?;
    Ok(c.outcome("", worst, 0.0, "max ‖MᵀJM − J‖∞ over stored samples"))
}

fn monodromy_fd(c: &Ctx) -> Result<CheckOutcome> {
    let n = c.cfg.n;
    let launches: Vec<_> = c.launches(2).into_iter().take(4).collect();
    let worst = max_of(launches.into_iter().map(|(th, z)| {
        let start = launch_incoming(&th, &z, c.cfg);
        let traj = integrate_until_exit(&start, c.field, c.cfg)?;
        let t = traj.end_time();
        let eps = 1e-5;
        let mut fd = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let shifted = |s: f64| {
                let mut p = start.clone();
                if j < n {
                    p.x[j] += s;
                } else {
                    p.xi[j - n] += s;
                }
                p
            };
            let plus = flow_for(&shifted(eps), c.field, c.cfg, t)?;
            let minus = flow_for(&shifted(-eps), c.field, c.cfg, t)?;
            let (p, m) = (plus.end(), minus.end());
            for i in 0..n {
                fd[(i, j)] = (p.x[i] - m.x[i]) / (2.0 * eps);
                fd[(n + i, j)] = (p.xi[i] - m.xi[i]) / (2.0 * eps);
            }
        }
        Ok((&fd - &traj.monodromy).amax() / traj.monodromy.amax())
    }))?;
    Ok(c.outcome("", worst, 0.0, "relative ‖M − M_fd‖∞, step 1e-5"))
}

fn splice(c: &Ctx) -> Result<CheckOutcome> {
    let wider = c.cfg.clone().with_margin(c.cfg.margin + 1.0);
    let worst = max_of(c.launches(3).into_iter().map(|(th, z)| {
        let frame = TangentFrame::new(&th);
        let a = scatter(&frame, &z, c.cfg, c.field)?.asymptotics.xi_inf;
        let b = scatter(&frame, &z, &wider, c.field)?.asymptotics.xi_inf;
        Ok((a - b).amax())
    }))?;
    Ok(c.outcome("", worst, 0.0, "ξ∞ change when the launch margin grows by 1"))
}

fn time_reversal(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.launches(4).into_iter().map(|(th, z)| {
        let start = launch_incoming(&th, &z, c.cfg);
        let traj = integrate_until_exit(&start, c.field, c.cfg)?;
        let back = flow_for(&traj.end().reversed(), c.field, c.cfg, traj.end_time())?;
        let e = back.end();
        Ok((&e.x - &start.x).amax().max((&e.xi + &start.xi).amax()))
    }))?;
    Ok(c.outcome("", worst, 0.0, "‖flow_T(x_T, −ξ_T) − (x₀, −ξ₀)‖∞"))
}

fn reciprocity(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.launches(5).into_iter().map(|(th, z)| {
        let s = scatter(&TangentFrame::new(&th), &z, c.cfg, c.field)?;
        let back = PhasePoint::new(s.asymptotics.x_exit.clone(), &s.asymptotics.xi_inf * -c.cfg.speed());
        let traj = integrate_until_exit(&back, c.field, c.cfg)?;
        let dir = traj.end().xi.normalize();
        Ok((dir + &th).amax())
    }))?;
    Ok(c.outcome("", worst, 0.0, "‖ξ∞(reversed) + θ‖∞"))
}

fn frame_independence(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.launches(6).into_iter().map(|(th, z)| {
        let frame = TangentFrame::new(&th);
        let swapped = frame.swapped();
        let z2 = swapped.coords(&frame.embed(&z));
        let a = angular_density_in_frame(&frame, &z, c.cfg, c.field)?;
        let b = angular_density_in_frame(&swapped, &z2, c.cfg, c.field)?;
        Ok((a - b).abs())
    }))?;
    Ok(c.outcome("", worst, 0.0, "|σ̂(frame) − σ̂(swapped frame)|"))
}

fn jacobian_agreement(c: &Ctx) -> Result<CheckOutcome> {
    let mut rng = c.rng(7);
    let theta = random_direction(&mut rng, c.cfg.n);
    let frame = TangentFrame::new(&theta);
    let reach = c.field.support_radius();
    let mut worst = 0.0f64;
    for i in 0..20 {
        // Stay clear of the support edge, where the Jacobian itself is ~0.
        let r = reach * (-0.9 + 1.8 * i as f64 / 19.0);
        let mut z = DVector::zeros(c.cfg.n - 1);
        z[0] = r;
        let a = jacobian_in_frame(&frame, &z, c.cfg, c.field, JacobianMethod::Monodromy)?;
        let b = jacobian_in_frame(&frame, &z, c.cfg, c.field, JacobianMethod::FiniteDifference)?;
        let scale = a.amax();
        if scale > 1e-6 {
            worst = worst.max((&a - &b).amax() / scale);
        }
    }
    Ok(c.outcome("", worst, 0.0, "relative monodromy vs difference Jacobian, 20-point grid"))
}

fn outside_support(c: &Ctx) -> Result<CheckOutcome> {
    let mut rng = c.rng(8);
    let reach = c.field.support_radius();
    let worst = max_of((0..c.opts.samples).map(|_| {
        let th = random_direction(&mut rng, c.cfg.n);
        let mut z = random_in_ball(&mut rng, c.cfg.n - 1, 1.0);
        let norm = z.norm().max(1e-3);
        z *= (reach + 0.05 + rng.random_range(0.0..0.5)) / norm;
        let xi = scatter(&TangentFrame::new(&th), &z, c.cfg, c.field)?.asymptotics.xi_inf;
        Ok((xi - th).amax())
    }))?;
    Ok(c.outcome("", worst, 0.0, "‖ξ∞ − θ‖∞ for rays outside the support"))
}

fn completeness(c: &Ctx) -> Result<CheckOutcome> {
    if c.cfg.n != 2 || c.field.as_central().is_none() {
        return Ok(c.skipped("", "needs a planar central bump"));
    }
    let theta = DVector::from_column_slice(&[1.0, 0.0]);
    let frame = TangentFrame::new(&theta);
    let orient = crate::frame::det_columns(&[theta.clone(), frame.basis()[0].clone()]);
    let (_, peak) = deflection_extremum(c.field, c.cfg.lambda)?;
    let mut mismatches = 0.0;
    for frac in [-0.8, -0.35, 0.2, 0.55, 0.9] {
        let target = frac * peak;
        let omega = rotate2(&theta, orient * target);
        let set = find_branches(&theta, &omega, c.cfg, c.field, &SeedGrid::for_field(c.field, c.cfg))?;
        let roots = deflection_roots(c.field, c.cfg.lambda, target, 400)?;
        let found: Vec<f64> = set.branches.iter().map(|b| b.z[0]).collect();
        let matched = roots.iter().filter(|r| found.iter().any(|z| (z - *r).abs() < 1e-6)).count();
        mismatches += (roots.len() - matched + found.len().saturating_sub(matched)) as f64;
    }
    Ok(c.outcome("", mismatches, 0.0, "missed + spurious branches against oracle roots"))
}

fn stability(c: &Ctx) -> Result<CheckOutcome> {
    // The halved grid quadruples the seed count in 3D; one pair is enough there.
    let pairs = c.regular_branches(9, if c.cfg.n == 2 { 2 } else { 1 })?;
    let base = SeedGrid::for_field(c.field, c.cfg);
    let mut worst = 0.0f64;
    for (theta, omega, _) in pairs {
        let a = find_branches(&theta, &omega, c.cfg, c.field, &base)?;
        let b = find_branches(&theta, &omega, c.cfg, c.field, &base.halved())?;
        if a.len() != b.len() {
            return Ok(c.outcome("", f64::INFINITY, 0.0, format!("{} vs {} branches after halving", a.len(), b.len())));
        }
        for (x, y) in a.branches.iter().zip(&b.branches) {
            worst = worst.max((&x.z - &y.z).amax());
        }
    }
    Ok(c.outcome("", worst, 0.0, "root shift when the seed spacing is halved"))
}

fn readout_time(c: &Ctx) -> Result<CheckOutcome> {
    let dt = 2.0 * c.cfg.r0 / c.cfg.speed();
    let worst = max_of(c.regular_branches(10, c.opts.samples.min(6))?.into_iter().map(|(th, om, b)| {
        let s0 = modified_action(&b.trajectory, &th, &om, c.cfg, 0.0);
        let s1 = modified_action(&b.trajectory, &th, &om, c.cfg, dt);
        Ok((s0 - s1).abs() / s0.abs().max(1.0))
    }))?;
    Ok(c.outcome("", worst, 0.0, "|S(t) − S(t + 2R₀/k)| / max(1, |S|)"))
}

fn launch_offset(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.regular_branches(11, c.opts.samples.min(6))?.into_iter().map(|(th, om, b)| {
        let mut w = 0.0f64;
        for extra in [0.5, 1.0] {
            let cfg = c.cfg.clone().with_margin(c.cfg.margin + extra);
            let moved = continue_branch(&th, &om, &b.z, &cfg, c.field)?;
            w = w.max((moved.action - b.action).abs() / b.action.abs().max(1.0));
        }
        Ok(w)
    }))?;
    Ok(c.outcome("", worst, 0.0, "S change over launch offsets margin + {0, 0.5, 1}"))
}

fn gradients(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.regular_branches(12, c.opts.samples.min(4))?.into_iter().map(|(th, om, b)| {
        Ok(action_gradients(&th, &om, &b, c.cfg, c.field)?.relative_error())
    }))?;
    Ok(c.outcome("", worst, 0.0, "finite-difference vs closed-form (kz, −kw) gradients"))
}

fn hessian_symmetry(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.regular_branches(13, 2)?.into_iter().map(|(th, om, b)| {
        Ok(mixed_hessian(&th, &om, &b, c.cfg, c.field)?.agreement())
    }))?;
    Ok(c.outcome("", worst, 0.0, "mixed Hessian: gradient differences vs action differences"))
}

fn maslov_parity(c: &Ctx) -> Result<CheckOutcome> {
    let worst = max_of(c.launches(14).into_iter().map(|(th, z)| {
        let traj = integrate_until_exit(&launch_incoming(&th, &z, c.cfg), c.field, c.cfg)?;
        let base = MaslovOptions::default();
        let a = maslov_index(&traj, &base)?;
        let b = maslov_index(&traj, &MaslovOptions { refine: 2 * base.refine, ..base })?;
        Ok(a.abs_diff(b) as f64)
    }))?;
    Ok(c.outcome("", worst, 0.0, "μ change under doubled sampling"))
}

fn central_grid(c: &Ctx) -> Option<(DVector<f64>, f64, Vec<f64>)> {
    let bump = c.field.as_central()?;
    if c.cfg.n != 2 {
        return None;
    }
    let theta = DVector::from_column_slice(&[1.0, 0.0]);
    let frame = TangentFrame::new(&theta);
    let orient = crate::frame::det_columns(&[theta.clone(), frame.basis()[0].clone()]);
    let bs = (0..20).map(|i| bump.radius * (-0.95 + 1.9 * i as f64 / 19.0)).collect();
    Some((theta, orient, bs))
}

fn oracle_deflection(c: &Ctx) -> Result<CheckOutcome> {
    let Some((theta, orient, bs)) = central_grid(c) else {
        return Ok(c.skipped("", "needs a planar central bump"));
    };
    let worst = max_of(bs.into_iter().map(|b| {
        let z = DVector::from_element(1, b);
        let xi = scatter(&TangentFrame::new(&theta), &z, c.cfg, c.field)?.asymptotics.xi_inf;
        Ok((planar_angle(&theta, &xi) - orient * signed_deflection(c.field, c.cfg.lambda, b)?).abs())
    }))?;
    Ok(c.outcome("", worst, 0.0, "|angle(ξ∞) − Θ(b)| rad, 20-point b grid"))
}

fn oracle_derivative(c: &Ctx) -> Result<CheckOutcome> {
    let Some((theta, _, bs)) = central_grid(c) else {
        return Ok(c.skipped("", "needs a planar central bump"));
    };
    let frame = TangentFrame::new(&theta);
    let worst = max_of(bs.into_iter().map(|b| {
        let d = deflection_derivative(c.field, c.cfg.lambda, b)?.abs();
        if d < 1e-3 {
            return Ok(0.0);
        }
        let s = angular_density_in_frame(&frame, &DVector::from_element(1, b), c.cfg, c.field)?;
        Ok((s - d).abs() / d)
    }))?;
    Ok(c.outcome("", worst, 0.0, "|σ̂ − |Θ′|| / |Θ′| at regular b"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::HessianFault;

    #[test]
    fn selection_parses_names() {
        assert_eq!("all".parse::<Selection>().unwrap(), Selection::All);
        assert_eq!("oracles".parse::<Selection>().unwrap(), Selection::One(Suite::Oracles));
        assert!("energy".parse::<Selection>().is_err());
    }

    #[test]
    fn shipped_potentials_fit_inside_unit_scale() {
        for n in [2, 3] {
            for (_, f) in shipped_potentials(n) {
                assert!(f.support_radius() <= 1.2);
            }
        }
    }

    #[test]
    fn corrupted_hessian_fails_symplecticity() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let field = PotentialField::central(2, 1.0, 0.1).with_hessian_fault(HessianFault { skew: 0.5 });
        let out = run_checks("faulty", &field, &cfg, Selection::One(Suite::Dynamics), CheckOptions { samples: 3, seed: 1 });
        let sym = out.iter().find(|o| o.id == "dynamics.symplectic").unwrap();
        assert!(!sym.passed, "{sym:?}");
        let energy = out.iter().find(|o| o.id == "dynamics.energy").unwrap();
        assert!(energy.passed, "{energy:?}");
    }
}

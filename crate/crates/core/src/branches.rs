//! Two-point problem ξ∞(θ, z) = ω: multi-start damped Newton in the tangent
//! chart at ω.

use nalgebra::{DMatrix, DVector};

use crate::asymptotics::{dxi_dz_from_monodromy, launch_in_frame, scatter, signed_density, Scattered};
use crate::dynamics::{ScatteringConfig, Trajectory, TOL_DEGENERATE};
use crate::error::{Result, ScatError};
use crate::frame::TangentFrame;
use crate::par;
use crate::potential::PotentialField;
use crate::semiclassics::{maslov_index, modified_action, MaslovOptions};

const MAX_NEWTON_ITERATIONS: usize = 50;
const MAX_BACKTRACKS: usize = 16;
/// Iterations in a row with ‖F‖ shrinking by less than 1% end the run.
const MAX_STALLS: usize = 4;
const ARMIJO: f64 = 1e-4;
/// Newton steps shorter than this end the polish.
const STEP_FLOOR: f64 = 1e-13;
/// Roots with σ̂ below this are probed for a nearby fold.
const FOLD_PROBE: f64 = 1e-3;

/// One (θ, ω)-trajectory.
#[derive(Debug, Clone)]
pub struct Branch {
    pub index: usize,
    /// Impact parameter in the standard frame of θ⊥.
    pub z: DVector<f64>,
    /// Exit point in the standard frame of ω⊥.
    pub w: DVector<f64>,
    pub sigma_hat: f64,
    pub action: f64,
    pub maslov: usize,
    /// ‖chart(ξ∞) − chart(ω)‖ at `z`.
    pub residual: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Default)]
pub struct BranchSet {
    pub branches: Vec<Branch>,
    /// A continuum of degenerate solutions was met (for instance ω = θ
    /// with rays passing outside the support); no finite root list exists.
    pub degenerate_family: bool,
}

impl BranchSet {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn first_degenerate(&self) -> Option<&Branch> {
        self.branches.iter().find(|b| !check_regular(b))
    }
}

/// Uniform seeds over the disc ‖z‖ ≤ radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedGrid {
    pub spacing: f64,
    pub radius: f64,
}

impl SeedGrid {
    /// Spacing ρ_min/8 over the disc of radius support + ρ_max. Coarser
    /// grids miss the narrow basins between a rainbow and the support edge.
    pub fn for_field(field: &PotentialField, cfg: &ScatteringConfig) -> Self {
        match (field.min_bump_radius(), field.max_bump_radius()) {
            (Some(lo), Some(hi)) => Self { spacing: 0.125 * lo, radius: field.support_radius() + hi },
            _ => Self { spacing: 0.25 * cfg.r0, radius: cfg.r0 },
        }
    }

    pub fn halved(self) -> Self {
        Self { spacing: 0.5 * self.spacing, ..self }
    }

    /// Grid points in ℝ^{dim}, dim = n − 1; symmetric about the origin.
    pub fn points(&self, dim: usize) -> Vec<DVector<f64>> {
        let m = (self.radius / self.spacing).floor() as i64;
        let axis: Vec<f64> = (-m..=m).map(|i| i as f64 * self.spacing).collect();
        match dim {
            1 => axis.iter().map(|&a| DVector::from_element(1, a)).collect(),
            2 => {
                let mut out = Vec::new();
                for &a in &axis {
                    for &b in &axis {
                        if a * a + b * b <= self.radius * self.radius {
                            out.push(DVector::from_column_slice(&[a, b]));
                        }
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

/// Residual of the two-point problem in the tangent chart at ω.
struct Problem<'a> {
    frame: TangentFrame,
    omega_frame: TangentFrame,
    cfg: &'a ScatteringConfig,
    field: &'a PotentialField,
}

struct Eval {
    z: DVector<f64>,
    f: DVector<f64>,
    jac: DMatrix<f64>,
    signed: f64,
    scattered: Scattered,
}

impl Eval {
    fn norm2(&self) -> f64 {
        self.f.norm_squared()
    }
}

enum Outcome {
    Root(Box<Eval>),
    /// F ≈ 0 with σ̂ ≈ 0 at the seed itself.
    Family,
    Failed,
}

impl<'a> Problem<'a> {
    fn eval(&self, z: &DVector<f64>) -> Option<Eval> {
        let s = scatter(&self.frame, z, self.cfg, self.field).ok()?;
        let xi = &s.asymptotics.xi_inf;
        if xi.dot(self.omega_frame.normal()) <= 0.0 {
            return None;
        }
        let dxi = dxi_dz_from_monodromy(&self.frame, &s.trajectory);
        let signed = signed_density(xi, &dxi);
        let f = self.omega_frame.coords(xi);
        let jac = self.omega_frame.matrix().transpose() * &dxi;
        Some(Eval { z: z.clone(), f, jac, signed, scattered: s })
    }

    fn newton(&self, seed: &DVector<f64>) -> Outcome {
        let tol = self.cfg.tol_newton;
        let theta = self.frame.normal();
        let launch = launch_in_frame(&self.frame, seed, self.cfg);
        if self.field.line_misses_support(launch.x.as_slice(), theta.as_slice()) {
            // Free ray: ξ∞ = θ and ∂ξ∞/∂z = 0 without integrating.
            return if self.omega_frame.coords(theta).norm() <= tol && theta.dot(self.omega_frame.normal()) > 0.0 {
                Outcome::Family
            } else {
                Outcome::Failed
            };
        }
        let Some(mut cur) = self.eval(seed) else {
            return Outcome::Failed;
        };
        if cur.f.norm() <= tol && cur.signed.abs() <= TOL_DEGENERATE {
            return Outcome::Family;
        }
        let mut stalls = 0;
        for _ in 0..MAX_NEWTON_ITERATIONS {
            let Some(step) = newton_step(&cur.jac, &cur.f) else {
                break;
            };
            let base = cur.norm2();
            let mut alpha = 1.0;
            let mut next = None;
            for _ in 0..MAX_BACKTRACKS {
                let z = &cur.z + &step * alpha;
                if let Some(e) = self.eval(&z) {
                    if e.norm2() <= (1.0 - ARMIJO * alpha) * base || (base <= tol * tol && e.norm2() <= base) {
                        next = Some(e);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some(e) = next else {
                break;
            };
            let moved = (alpha * step.norm()).abs();
            if cur.f.norm() > tol && e.norm2() > 0.98 * base {
                stalls += 1;
                if stalls >= MAX_STALLS {
                    break;
                }
            } else {
                stalls = 0;
            }
            cur = e;
            if cur.f.norm() <= tol && moved <= STEP_FLOOR * cur.z.norm().max(1.0) {
                break;
            }
        }
        if cur.f.norm() <= tol {
            Outcome::Root(Box::new(cur))
        } else {
            Outcome::Failed
        }
    }

    /// Near a fold two roots merge; Newton then stalls a little away from
    /// the double root, where σ̂ is small but not zero. Look for the zero of
    /// the signed density along its gradient and keep it if it still solves
    /// the two-point problem.
    fn resolve_fold(&self, root: Eval) -> Eval {
        if root.signed.abs() > FOLD_PROBE || root.signed.abs() <= TOL_DEGENERATE {
            return root;
        }
        let dim = root.z.len();
        let h = 1e-6 * root.z.norm().max(1.0);
        let mut grad = DVector::zeros(dim);
        for i in 0..dim {
            let mut zp = root.z.clone();
            let mut zm = root.z.clone();
            zp[i] += h;
            zm[i] -= h;
            match (self.eval(&zp), self.eval(&zm)) {
                (Some(p), Some(m)) => grad[i] = (p.signed - m.signed) / (2.0 * h),
                _ => return root,
            }
        }
        let g2 = grad.norm_squared();
        if g2 == 0.0 {
            return root;
        }
        // Secant iteration on τ ↦ s(z + τ·grad).
        let dir = grad / g2.sqrt();
        let s_at = |tau: f64| self.eval(&(&root.z + &dir * tau));
        let mut t0 = 0.0;
        let mut s0 = root.signed;
        let mut t1 = -s0 / g2.sqrt();
        let Some(mut e1) = s_at(t1) else {
            return root;
        };
        for _ in 0..40 {
            if e1.signed.abs() <= 0.1 * TOL_DEGENERATE {
                break;
            }
            let denom = e1.signed - s0;
            if denom == 0.0 {
                break;
            }
            let t2 = t1 - e1.signed * (t1 - t0) / denom;
            if !t2.is_finite() || (t2 - t1).abs() > 10.0 * FOLD_PROBE / g2.sqrt() {
                return root;
            }
            t0 = t1;
            s0 = e1.signed;
            t1 = t2;
            match s_at(t1) {
                Some(e) => e1 = e,
                None => return root,
            }
        }
        if e1.signed.abs() <= TOL_DEGENERATE && e1.f.norm() <= self.cfg.tol_newton {
            e1
        } else {
            root
        }
    }
}

/// Least-squares Newton direction −J⁺F, `None` when J vanishes.
fn newton_step(jac: &DMatrix<f64>, f: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = jac.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    let step = svd.solve(f, smax * 1e-14).ok()?;
    if step.iter().all(|v| v.is_finite()) {
        Some(-step)
    } else {
        None
    }
}

fn cmp_z(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    a.norm()
        .partial_cmp(&b.norm())
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
}

/// All impact parameters z with ξ∞(θ, z) = ω reachable from the seed grid.
pub fn find_branches(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
    seeds: &SeedGrid,
) -> Result<BranchSet> {
    cfg.validate_with(field)?;
    if theta.len() != cfg.n || omega.len() != cfg.n {
        return Err(ScatError::DimensionMismatch { expected: cfg.n, got: theta.len().max(omega.len()) });
    }
    let problem = Problem {
        frame: TangentFrame::new(theta),
        omega_frame: TangentFrame::new(omega),
        cfg,
        field,
    };
    let points = seeds.points(cfg.n - 1);
    let outcomes = par::map(cfg.execution, &points, |seed| match problem.newton(seed) {
        Outcome::Root(e) => Outcome::Root(Box::new(problem.resolve_fold(*e))),
        other => other,
    });

    let mut family = false;
    let mut roots: Vec<Eval> = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Family => family = true,
            Outcome::Root(e) => roots.push(*e),
            Outcome::Failed => {}
        }
    }
    // Prefer the degenerate representative, then the smallest residual,
    // when several seeds land on one root.
    roots.sort_by(|a, b| {
        cmp_z(&a.z, &b.z).then_with(|| a.f.norm().partial_cmp(&b.f.norm()).unwrap_or(std::cmp::Ordering::Equal))
    });
    let dedup = 10.0 * cfg.tol_newton;
    // At a fold F vanishes to second order, so every point within about
    // √tol_newton of the double root passes the residual test.
    let fold_dedup = cfg.tol_newton.sqrt();
    let degenerate = |e: &Eval| e.signed.abs() <= TOL_DEGENERATE;
    let mut unique: Vec<Eval> = Vec::new();
    for r in roots {
        let same = |u: &&mut Eval| {
            let d = (&u.z - &r.z).norm();
            d <= dedup || ((degenerate(u) || degenerate(&r)) && d <= fold_dedup)
        };
        if let Some(u) = unique.iter_mut().find(same) {
            let better = if degenerate(&r) != degenerate(u) {
                degenerate(&r)
            } else if degenerate(&r) {
                r.signed.abs() < u.signed.abs()
            } else {
                r.f.norm() < u.f.norm()
            };
            if better {
                *u = r;
            }
        } else {
            unique.push(r);
        }
    }
    unique.sort_by(|a, b| cmp_z(&a.z, &b.z));

    let omega_unit = problem.omega_frame.normal().clone();
    let branches = unique
        .into_iter()
        .enumerate()
        .map(|(index, e)| {
            let traj = e.scattered.trajectory;
            let action = modified_action(&traj, problem.frame.normal(), &omega_unit, cfg, 0.0);
            let maslov = maslov_index(&traj, &MaslovOptions::default()).unwrap_or(0);
            Branch {
                index,
                w: problem.omega_frame.coords(&e.scattered.asymptotics.x_exit),
                sigma_hat: e.signed.abs(),
                residual: e.f.norm(),
                z: e.z,
                action,
                maslov,
                trajectory: traj,
            }
        })
        .collect();
    Ok(BranchSet { branches, degenerate_family: family })
}

/// Re-solve the branch through `z_guess` for a nearby (θ, ω) pair.
pub fn continue_branch(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    z_guess: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<Branch> {
    let problem = Problem {
        frame: TangentFrame::new(theta),
        omega_frame: TangentFrame::new(omega),
        cfg,
        field,
    };
    match problem.newton(z_guess) {
        Outcome::Root(e) => {
            let traj = e.scattered.trajectory;
            let omega_unit = problem.omega_frame.normal().clone();
            Ok(Branch {
                index: 0,
                w: problem.omega_frame.coords(&e.scattered.asymptotics.x_exit),
                sigma_hat: e.signed.abs(),
                residual: e.f.norm(),
                action: modified_action(&traj, problem.frame.normal(), &omega_unit, cfg, 0.0),
                maslov: maslov_index(&traj, &MaslovOptions::default()).unwrap_or(0),
                z: e.z,
                trajectory: traj,
            })
        }
        _ => Err(ScatError::BranchContinuationFailed),
    }
}

/// σ̂ above the degeneracy threshold.
pub fn check_regular(branch: &Branch) -> bool {
    branch.sigma_hat > TOL_DEGENERATE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{planar_angle, rotate2};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn seed_grid_is_symmetric_and_covers_the_disc() {
        let g = SeedGrid { spacing: 0.25, radius: 2.0 };
        let pts = g.points(1);
        assert_eq!(pts.len(), 17);
        assert_eq!(pts[0][0], -2.0);
        let disc = g.points(2);
        assert!(disc.iter().all(|p| p.norm() <= 2.0));
        assert!(disc.len() > 150);
    }

    #[test]
    fn free_forward_direction_is_a_family() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let free = PotentialField::free(2);
        let theta = v(&[1.0, 0.0]);
        let set = find_branches(&theta, &theta, &cfg, &free, &SeedGrid::for_field(&free, &cfg)).unwrap();
        assert!(set.degenerate_family);
        assert!(set.is_empty());
    }

    #[test]
    fn free_off_forward_direction_has_no_branch() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let free = PotentialField::free(2);
        let theta = v(&[1.0, 0.0]);
        let omega = rotate2(&theta, 0.1);
        let set = find_branches(&theta, &omega, &cfg, &free, &SeedGrid::for_field(&free, &cfg)).unwrap();
        assert!(set.is_empty());
        assert!(!set.degenerate_family);
    }

    #[test]
    fn central_bump_branch_hits_target() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let bump = PotentialField::central(2, 1.0, 0.1);
        let theta = v(&[1.0, 0.0]);
        let s = scatter(&TangentFrame::new(&theta), &v(&[0.4]), &cfg, &bump).unwrap();
        let omega = s.asymptotics.xi_inf.clone();
        let set = find_branches(&theta, &omega, &cfg, &bump, &SeedGrid::for_field(&bump, &cfg)).unwrap();
        assert!(set.branches.iter().any(|b| (b.z[0] - 0.4).abs() < 1e-8), "{:?}", set.branches.iter().map(|b| b.z[0]).collect::<Vec<_>>());
        for b in &set.branches {
            assert!(check_regular(b));
            let xi = crate::asymptotics::impact_map(&theta, &b.z, &cfg, &bump).unwrap();
            assert!(planar_angle(&omega, &xi).abs() <= cfg.tol_newton);
        }
        let norms: Vec<f64> = set.branches.iter().map(|b| b.z.norm()).collect();
        assert!(norms.windows(2).all(|w| w[0] <= w[1]));
    }
}

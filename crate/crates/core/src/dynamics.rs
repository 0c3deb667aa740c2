//! Hamiltonian flow of p(x, ξ) = ½‖ξ‖² + V(x) with its variational equations.
//!
//! Inside the ball that contains supp V the joint (phase, monodromy, action)
//! system is integrated with an adaptive Dormand–Prince 5(4) scheme. Outside
//! that ball the flow is spliced in closed form: x ↦ x + τξ, M ↦ F(τ)M with
//! F(τ) = [[I, τI], [0, I]].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dopri::{next_step, Dopri5};
use crate::error::{Result, ScatError};
use crate::par::Execution;
use crate::potential::PotentialField;

/// σ̂ below this is treated as degenerate.
pub const TOL_DEGENERATE: f64 = 1e-8;

/// Time budget in units of the free transit time 2R₀/√(2λ).
pub const TIME_BUDGET_FACTOR: f64 = 50.0;

const MAX_STEPS: usize = 2_000_000;

fn default_tol_integrate() -> f64 {
    1e-12
}

fn default_tol_newton() -> f64 {
    1e-10
}

fn default_margin() -> f64 {
    1.0
}

/// Global problem statement: energy, support radius, dimension and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    pub lambda: f64,
    pub r0: f64,
    pub n: usize,
    #[serde(default = "default_tol_integrate")]
    pub tol_integrate: f64,
    #[serde(default = "default_tol_newton")]
    pub tol_newton: f64,
    /// Launch planes sit at distance R₀ + margin from the origin.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// T_max; defaults to [`TIME_BUDGET_FACTOR`] free transit times.
    #[serde(default)]
    pub time_budget: Option<f64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl ScatteringConfig {
    pub fn new(lambda: f64, r0: f64, n: usize) -> Self {
        Self {
            lambda,
            r0,
            n,
            tol_integrate: default_tol_integrate(),
            tol_newton: default_tol_newton(),
            margin: default_margin(),
            time_budget: None,
            execution: Execution::default(),
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ScatError::InvalidConfig(msg));
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be > 0 (got {})", self.lambda));
        }
        if !(self.r0 > 0.0) || !self.r0.is_finite() {
            return bad(format!("r0 must be > 0 (got {})", self.r0));
        }
        if !(2..=3).contains(&self.n) {
            return bad(format!("n must be 2 or 3 (got {})", self.n));
        }
        if !(self.tol_integrate > 0.0) {
            return bad(format!("tol_integrate must be > 0 (got {})", self.tol_integrate));
        }
        if !(self.tol_newton > 0.0) {
            return bad(format!("tol_newton must be > 0 (got {})", self.tol_newton));
        }
        if !(self.margin >= 1.0) || !self.margin.is_finite() {
            return bad(format!("margin must be >= 1 (got {})", self.margin));
        }
        if let Some(t) = self.time_budget {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("time_budget must be > 0 (got {t})"));
            }
        }
        Ok(())
    }

    /// Validate the config together with a potential.
    pub fn validate_with(&self, field: &PotentialField) -> Result<()> {
        self.validate()?;
        if field.dim() != self.n {
            return Err(ScatError::DimensionMismatch { expected: self.n, got: field.dim() });
        }
        if field.support_radius() > self.r0 {
            return Err(ScatError::InvalidConfig(format!(
                "potential support radius {} exceeds r0 = {}",
                field.support_radius(),
                self.r0
            )));
        }
        Ok(())
    }

    /// Asymptotic speed √(2λ).
    pub fn speed(&self) -> f64 {
        (2.0 * self.lambda).sqrt()
    }

    pub fn time_budget(&self) -> f64 {
        if let Some(t) = self.time_budget {
            return t;
        }
        TIME_BUDGET_FACTOR * 2.0 * self.r0 / self.speed()
    }

    /// Distance of the incoming launch plane from the origin.
    pub fn launch_offset(&self) -> f64 {
        self.r0 + self.margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
}

impl PhasePoint {
    pub fn new(x: DVector<f64>, xi: DVector<f64>) -> Self {
        Self { x, xi }
    }

    pub fn from_slices(x: &[f64], xi: &[f64]) -> Self {
        Self { x: DVector::from_column_slice(x), xi: DVector::from_column_slice(xi) }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.xi.iter()).all(|v| v.is_finite())
    }

    /// The same point with momentum reversed.
    pub fn reversed(&self) -> Self {
        Self { x: self.x.clone(), xi: -&self.xi }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub point: PhasePoint,
    /// ∂(x(t), ξ(t)) / ∂(x(0), ξ(0)), rows and columns ordered (x, ξ).
    pub monodromy: DMatrix<f64>,
}

impl Sample {
    /// Position block ∂x(t)/∂x(0).
    pub fn position_block(&self) -> DMatrix<f64> {
        let n = self.point.dim();
        self.monodromy.view((0, 0), (n, n)).into_owned()
    }

    /// Its time derivative ∂ξ(t)/∂x(0).
    pub fn position_block_rate(&self) -> DMatrix<f64> {
        let n = self.point.dim();
        self.monodromy.view((n, 0), (n, n)).into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Monodromy at the final sample.
    pub monodromy: DMatrix<f64>,
    /// Time of the last outward crossing of ‖x‖ = R₀ (the end time for
    /// trajectories stopped at a fixed time before exiting).
    pub exit_time: f64,
    pub entered_support: bool,
    pub steps_taken: usize,
    /// ∫₀^{t_end} (½‖ξ‖² − V(x)) dt.
    pub lagrangian_integral: f64,
}

impl Trajectory {
    pub fn start(&self) -> &PhasePoint {
        &self.samples[0].point
    }

    pub fn end(&self) -> &PhasePoint {
        &self.samples[self.samples.len() - 1].point
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn is_outgoing(&self, r0: f64) -> bool {
        let p = self.end();
        p.x.norm() >= r0 * (1.0 - 1e-12) && p.x.dot(&p.xi) > 0.0
    }

    /// max over samples of |p(x(t), ξ(t)) − p(x(0), ξ(0))|.
    pub fn energy_drift(&self, field: &PotentialField) -> f64 {
        let e0 = eval_hamiltonian(self.start(), field);
        self.samples
            .iter()
            .map(|s| (eval_hamiltonian(&s.point, field) - e0).abs())
            .fold(0.0, f64::max)
    }

    /// max over samples of ‖MᵀJM − J‖_∞.
    pub fn symplectic_residual(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| crate::frame::symplectic_residual(&s.monodromy))
            .fold(0.0, f64::max)
    }
}

/// p(x, ξ) = ½‖ξ‖² + V(x).
pub fn eval_hamiltonian(pt: &PhasePoint, field: &PotentialField) -> f64 {
    0.5 * pt.xi.norm_squared() + field.value(pt.x.as_slice())
}

/// Exact free flight (x + dt·ξ, ξ). Fails if the segment meets supp V.
pub fn free_flight(pt: &PhasePoint, dt: f64, field: &PotentialField) -> Result<PhasePoint> {
    for b in field.bumps() {
        let c = DVector::from_column_slice(&b.center);
        if segment_distance(&pt.x, &(&pt.xi * dt), &c) < b.radius {
            return Err(ScatError::SegmentIntersectsSupport);
        }
    }
    Ok(PhasePoint { x: &pt.x + &pt.xi * dt, xi: pt.xi.clone() })
}

/// Distance from `c` to the segment {x + s·d : s ∈ [0, 1]}.
fn segment_distance(x: &DVector<f64>, d: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let dd = d.norm_squared();
    let s = if dd == 0.0 { 0.0 } else { ((c - x).dot(d) / dd).clamp(0.0, 1.0) };
    (x + d * s - c).norm()
}

/// Where to stop the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    /// At the last outward crossing of ‖x‖ = R₀.
    Exit,
    /// At a fixed time.
    Time(f64),
}

/// Integrate until the trajectory leaves B(0, R₀) for good.
pub fn integrate_until_exit(
    start: &PhasePoint,
    field: &PotentialField,
    cfg: &ScatteringConfig,
) -> Result<Trajectory> {
    propagate(start, field, cfg, Stop::Exit)
}

/// Flow for a fixed time.
pub fn flow_for(
    start: &PhasePoint,
    field: &PotentialField,
    cfg: &ScatteringConfig,
    duration: f64,
) -> Result<Trajectory> {
    propagate(start, field, cfg, Stop::Time(duration))
}

/// Roots τ₋ ≤ τ₊ of ‖x + τξ‖ = r, if real.
fn sphere_crossings(x: &DVector<f64>, xi: &DVector<f64>, r: f64) -> Option<(f64, f64)> {
    let a = xi.norm_squared();
    if a == 0.0 {
        return None;
    }
    let b = x.dot(xi);
    let c = x.norm_squared() - r * r;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Stable quadratic formula.
    let q = if b >= 0.0 { -(b + sq) } else { -b + sq };
    let (t1, t2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((t1.min(t2), t1.max(t2)))
}

struct State {
    n: usize,
    t: f64,
    y: Vec<f64>,
}

impl State {
    fn new(start: &PhasePoint) -> Self {
        let n = start.dim();
        let dim2 = 2 * n;
        let mut y = vec![0.0; 2 * n + dim2 * dim2 + 1];
        y[..n].copy_from_slice(start.x.as_slice());
        y[n..2 * n].copy_from_slice(start.xi.as_slice());
        for i in 0..dim2 {
            y[2 * n + i * dim2 + i] = 1.0;
        }
        Self { n, t: 0.0, y }
    }

    fn x(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y[..self.n])
    }

    fn xi(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y[self.n..2 * self.n])
    }

    fn monodromy(&self) -> DMatrix<f64> {
        let d = 2 * self.n;
        DMatrix::from_row_slice(d, d, &self.y[2 * self.n..2 * self.n + d * d])
    }

    fn lagrangian(&self) -> f64 {
        self.y[self.y.len() - 1]
    }

    fn sample(&self) -> Sample {
        Sample {
            t: self.t,
            point: PhasePoint { x: self.x(), xi: self.xi() },
            monodromy: self.monodromy(),
        }
    }

    /// Closed-form free flight by τ (valid where V = 0).
    fn free(&mut self, tau: f64) {
        let n = self.n;
        let d = 2 * n;
        for i in 0..n {
            self.y[i] += tau * self.y[n + i];
        }
        let m0 = 2 * n;
        for i in 0..n {
            for j in 0..d {
                self.y[m0 + i * d + j] += tau * self.y[m0 + (n + i) * d + j];
            }
        }
        let kinetic = 0.5 * self.y[n..2 * n].iter().map(|v| v * v).sum::<f64>();
        let last = self.y.len() - 1;
        self.y[last] += kinetic * tau;
        self.t += tau;
    }
}

/// Right-hand side of the joint (x, ξ, M, ∫L) system.
fn joint_rhs(field: &PotentialField, n: usize) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |y: &[f64], dy: &mut [f64]| {
        let d = 2 * n;
        let mut grad = [0.0; 3];
        let mut hess = [0.0; 9];
        let v = field.eval_into(&y[..n], &mut grad[..n], &mut hess[..n * n]);
        for i in 0..n {
            dy[i] = y[n + i];
            dy[n + i] = -grad[i];
        }
        let m0 = 2 * n;
        for i in 0..n {
            for j in 0..d {
                dy[m0 + i * d + j] = y[m0 + (n + i) * d + j];
                let mut acc = 0.0;
                for k in 0..n {
                    acc += hess[i * n + k] * y[m0 + k * d + j];
                }
                dy[m0 + (n + i) * d + j] = -acc;
            }
        }
        let kinetic = 0.5 * y[n..2 * n].iter().map(|v| v * v).sum::<f64>();
        dy[y.len() - 1] = kinetic - v;
    }
}

/// Flow `start` under `field` until `stop`, recording every accepted step.
pub fn propagate(
    start: &PhasePoint,
    field: &PotentialField,
    cfg: &ScatteringConfig,
    stop: Stop,
) -> Result<Trajectory> {
    let n = start.dim();
    if n != field.dim() {
        return Err(ScatError::DimensionMismatch { expected: field.dim(), got: n });
    }
    if !start.is_finite() {
        return Err(ScatError::InvalidConfig("non-finite initial phase point".into()));
    }
    let r_support = field.support_radius();
    let rho_min = field.min_bump_radius().unwrap_or(r_support);
    let budget = cfg.time_budget();
    let t_stop = match stop {
        Stop::Exit => f64::INFINITY,
        Stop::Time(t) => t,
    };

    let mut state = State::new(start);
    let mut samples = vec![state.sample()];
    let mut steps = 0usize;
    let mut entered = false;
    let rhs = joint_rhs(field, n);
    let mut stepper = Dopri5::new(state.y.len());
    let mut trial = vec![0.0; state.y.len()];
    let speed0 = start.xi.norm();
    let mut h = if speed0 > 0.0 { 0.05 * r_support.max(1e-3) / speed0 } else { 1e-3 };
    // Earliest time the final free flight may reach back to.
    let mut t_floor = 0.0;

    loop {
        let x = state.x();
        let xi = state.xi();
        let inside = r_support > 0.0 && x.norm() < r_support;
        if !inside {
            let entry = if r_support > 0.0 && x.dot(&xi) < 0.0 {
                sphere_crossings(&x, &xi, r_support).map(|(tm, _)| tm.max(0.0))
            } else {
                None
            };
            match entry {
                Some(tau) if state.t + tau < t_stop => {
                    if tau > 0.0 {
                        state.free(tau);
                        samples.push(state.sample());
                    }
                }
                _ => {
                    // Free for the rest of time.
                    let exit_tau = match sphere_crossings(&x, &xi, cfg.r0) {
                        Some((_, tp)) => tp.max(t_floor - state.t),
                        None => {
                            let a = xi.norm_squared();
                            if a == 0.0 {
                                if stop == Stop::Exit {
                                    return Err(ScatError::TimeBudgetExhausted { budget });
                                }
                                0.0
                            } else {
                                (-x.dot(&xi) / a).max(0.0)
                            }
                        }
                    };
                    let exit_time = state.t + exit_tau;
                    let tau = match stop {
                        Stop::Exit => exit_tau,
                        Stop::Time(t) => t - state.t,
                    };
                    if tau != 0.0 || samples.last().map(|s| s.t) != Some(state.t) {
                        state.free(tau);
                        samples.push(state.sample());
                    }
                    let exit_time = if exit_time <= state.t { exit_time } else { state.t };
                    return Ok(finish(samples, &state, exit_time, entered, steps));
                }
            }
        }

        // Adaptive integration inside the support ball.
        entered = true;
        stepper.reset();
        loop {
            if state.t >= t_stop {
                let t = state.t;
                return Ok(finish(samples, &state, t, entered, steps));
            }
            if state.t > budget {
                return Err(ScatError::TimeBudgetExhausted { budget });
            }
            if steps >= MAX_STEPS || h < 1e-14 * state.t.abs().max(1.0) {
                return Err(ScatError::StepFailure { t: state.t });
            }
            // A step longer than a fraction of the smallest bump could jump
            // over a bump with every stage landing where V = 0.
            let speed = state.y[n..2 * n].iter().map(|v| v * v).sum::<f64>().sqrt();
            let h_cap = if speed > 0.0 { 0.25 * rho_min / speed } else { f64::INFINITY };
            let h_try = h.min(h_cap).min(t_stop - state.t);
            let outcome = stepper.attempt(&rhs, &state.y, h_try, cfg.tol_integrate, &mut trial);
            if !outcome.error.is_finite() {
                h *= 0.2;
                stepper.reset();
                continue;
            }
            if outcome.error > 1.0 {
                h = next_step(h_try, outcome.error);
                continue;
            }
            stepper.accept();
            steps += 1;
            let t_prev = state.t;
            state.y.copy_from_slice(&trial);
            state.t += h_try;
            h = next_step(h_try, outcome.error);
            let xe = state.x();
            let xie = state.xi();
            if xe.norm() >= r_support && xe.dot(&xie) > 0.0 && state.t < t_stop {
                // Outgoing past the support: hand over to the closed-form tail.
                t_floor = t_prev;
                break;
            }
            samples.push(state.sample());
        }
    }
}

fn finish(samples: Vec<Sample>, state: &State, exit_time: f64, entered: bool, steps: usize) -> Trajectory {
    Trajectory {
        monodromy: state.monodromy(),
        exit_time,
        entered_support: entered,
        steps_taken: steps,
        lagrangian_integral: state.lagrangian(),
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialField;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn hamiltonian_examples() {
        let free = PotentialField::free(2);
        assert_eq!(eval_hamiltonian(&PhasePoint::from_slices(&[3.0, -1.0], &[1.0, 0.0]), &free), 0.5);
        let bump = PotentialField::central(2, 1.0, 0.1);
        assert_eq!(eval_hamiltonian(&PhasePoint::from_slices(&[0.0, 0.0], &[0.0, 0.0]), &bump), 0.1);
        let e = eval_hamiltonian(&PhasePoint::from_slices(&[0.5, 0.0], &[1.0, 0.0]), &bump);
        let expected = 0.5 + 0.1 * (1.0f64 - 1.0 / (1.0 - 0.25)).exp();
        assert!((e - expected).abs() < 1e-15);
    }

    #[test]
    fn free_flight_examples() {
        let bump = PotentialField::central(2, 1.0, 0.1);
        let p = PhasePoint::from_slices(&[0.0, 2.0], &[1.0, 0.0]);
        let q = free_flight(&p, 3.0, &bump).unwrap();
        assert_eq!(q.x, v2(3.0, 2.0));
        assert_eq!(q.xi, v2(1.0, 0.0));
        assert_eq!(free_flight(&p, 0.0, &bump).unwrap(), p);
        let hit = PhasePoint::from_slices(&[-5.0, 0.2], &[1.0, 0.0]);
        assert_eq!(free_flight(&hit, 10.0, &bump), Err(ScatError::SegmentIntersectsSupport));
    }

    #[test]
    fn free_trajectory_is_affine() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let free = PotentialField::free(2);
        let start = PhasePoint::from_slices(&[-3.0, 1.0], &[1.0, 0.0]);
        let traj = integrate_until_exit(&start, &free, &cfg).unwrap();
        let t_exit = 3.0 + 3f64.sqrt();
        assert!((traj.exit_time - t_exit).abs() < 1e-14);
        assert!(!traj.entered_support);
        let m = &traj.monodromy;
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j {
                    1.0
                } else if j == i + 2 {
                    t_exit
                } else {
                    0.0
                };
                assert!((m[(i, j)] - expected).abs() < 1e-13);
            }
        }
        assert!((traj.lagrangian_integral - 0.5 * t_exit).abs() < 1e-13);
    }

    #[test]
    fn missing_the_support_leaves_momentum_untouched() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let bump = PotentialField::central(2, 1.0, 0.1);
        let start = PhasePoint::from_slices(&[-3.0, 1.5], &[1.0, 0.0]);
        let traj = integrate_until_exit(&start, &bump, &cfg).unwrap();
        assert_eq!(traj.end().xi, v2(1.0, 0.0));
        assert_eq!(traj.steps_taken, 0);
    }

    #[test]
    fn bump_trajectory_conserves_energy_and_symplectic_form() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let bump = PotentialField::central(2, 1.0, 0.1);
        let start = PhasePoint::from_slices(&[-3.0, 0.5], &[1.0, 0.0]);
        let traj = integrate_until_exit(&start, &bump, &cfg).unwrap();
        assert!(traj.entered_support);
        assert!(traj.energy_drift(&bump) < 1e-9 * cfg.lambda, "{}", traj.energy_drift(&bump));
        assert!(traj.symplectic_residual() < 1e-6);
        assert!(traj.is_outgoing(cfg.r0));
        assert!((traj.end().x.norm() - cfg.r0).abs() < 1e-12);
        assert!(traj.end().xi[1] > 0.0, "repulsive bump deflects away");
    }

    #[test]
    fn trapped_start_reports_budget() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        // A deep well with a point at rest inside it never leaves.
        let well = PotentialField::central(2, 1.0, -2.0);
        let start = PhasePoint::from_slices(&[0.1, 0.0], &[0.0, 0.3]);
        assert!(matches!(
            integrate_until_exit(&start, &well, &cfg),
            Err(ScatError::TimeBudgetExhausted { .. })
        ));
    }

    #[test]
    fn fixed_time_flow_matches_exit_flow_after_exit() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let bump = PotentialField::central(2, 1.0, -0.1);
        let start = PhasePoint::from_slices(&[-3.0, 0.3], &[1.0, 0.0]);
        let a = integrate_until_exit(&start, &bump, &cfg).unwrap();
        let b = flow_for(&start, &bump, &cfg, a.exit_time + 2.0).unwrap();
        let extrapolated = &a.end().x + &a.end().xi * 2.0;
        assert!((extrapolated - &b.end().x).amax() < 1e-12);
        assert!((b.end_time() - a.exit_time - 2.0).abs() < 1e-12);
    }
}

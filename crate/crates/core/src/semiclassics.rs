//! Modified action, its generating-function identities, the Maslov index and
//! the leading-order amplitude Σ σ̂^{-1/2} exp(i(S/h − μπ/2)).

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::branches::{check_regular, continue_branch, find_branches, Branch, BranchSet, SeedGrid};
use crate::dynamics::{ScatteringConfig, Trajectory};
use crate::error::{Result, ScatError};
use crate::frame::TangentFrame;
use crate::par;
use crate::potential::PotentialField;

/// S = ⟨y, kθ⟩ + ∫₀ᵗ L dτ + λt − ⟨x(t), kω⟩ with k = √(2λ), read out at
/// t = t_exit + `extension` (the motion past the exit is free).
pub fn modified_action(
    traj: &Trajectory,
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    cfg: &ScatteringConfig,
    extension: f64,
) -> f64 {
    let k = cfg.speed();
    let y = &traj.start().x;
    let end = traj.end();
    let t = traj.end_time() + extension;
    let x_t = &end.x + &end.xi * extension;
    let lagrangian = traj.lagrangian_integral + 0.5 * end.xi.norm_squared() * extension;
    k * y.dot(theta) + lagrangian + cfg.lambda * t - k * x_t.dot(omega)
}

/// Closed-form and finite-difference gradients of S in the sphere charts
/// (standard frames of θ⊥ and ω⊥).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGradients {
    pub fd_theta: DVector<f64>,
    pub fd_omega: DVector<f64>,
    /// k·z.
    pub closed_theta: DVector<f64>,
    /// −k·w.
    pub closed_omega: DVector<f64>,
}

impl ActionGradients {
    /// Largest relative discrepancy between the two constructions.
    pub fn relative_error(&self) -> f64 {
        let rel = |a: &DVector<f64>, b: &DVector<f64>| (a - b).amax() / b.amax().max(1e-12);
        rel(&self.fd_theta, &self.closed_theta).max(rel(&self.fd_omega, &self.closed_omega))
    }
}

pub const GRADIENT_STEP: f64 = 1e-5;
pub const HESSIAN_STEP: f64 = 1e-3;

fn chart(frame: &TangentFrame, i: usize, h: f64) -> DVector<f64> {
    let mut u = DVector::zeros(frame.dim() - 1);
    u[i] = h;
    frame.chart_point(&u)
}

fn continued_action(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    physical_launch: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<(f64, Branch)> {
    let guess = TangentFrame::new(theta).coords(physical_launch);
    let b = continue_branch(theta, omega, &guess, cfg, field)?;
    Ok((b.action, b))
}

fn launch_offset_point(branch: &Branch, theta: &DVector<f64>) -> DVector<f64> {
    TangentFrame::new(theta).embed(&branch.z)
}

pub fn action_gradients(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    branch: &Branch,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<ActionGradients> {
    if !check_regular(branch) {
        return Err(ScatError::DegenerateBranchPresent { index: branch.index, sigma_hat: branch.sigma_hat });
    }
    let tf = TangentFrame::new(theta);
    let of = TangentFrame::new(omega);
    let m = cfg.n - 1;
    let k = cfg.speed();
    let p = launch_offset_point(branch, theta);
    let h = GRADIENT_STEP;
    let mut fd_theta = DVector::zeros(m);
    let mut fd_omega = DVector::zeros(m);
    for i in 0..m {
        let sp = continued_action(&chart(&tf, i, h), omega, &p, cfg, field)?.0;
        let sm = continued_action(&chart(&tf, i, -h), omega, &p, cfg, field)?.0;
        fd_theta[i] = (sp - sm) / (2.0 * h);
        let sp = continued_action(theta, &chart(&of, i, h), &p, cfg, field)?.0;
        let sm = continued_action(theta, &chart(&of, i, -h), &p, cfg, field)?.0;
        fd_omega[i] = (sp - sm) / (2.0 * h);
    }
    Ok(ActionGradients {
        fd_theta,
        fd_omega,
        closed_theta: &branch.z * k,
        closed_omega: &branch.w * -k,
    })
}

/// ∂θ∂ωS built two ways: differences in θ of the closed-form ω-gradient,
/// and second mixed differences of S itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedHessian {
    pub from_gradient: DMatrix<f64>,
    pub from_action: DMatrix<f64>,
}

impl MixedHessian {
    pub fn agreement(&self) -> f64 {
        (&self.from_gradient - &self.from_action).amax() / self.from_gradient.amax().max(1e-12)
    }

    pub fn determinant(&self) -> f64 {
        self.from_gradient.determinant()
    }
}

pub fn mixed_hessian(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    branch: &Branch,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<MixedHessian> {
    if !check_regular(branch) {
        return Err(ScatError::DegenerateBranchPresent { index: branch.index, sigma_hat: branch.sigma_hat });
    }
    let tf = TangentFrame::new(theta);
    let of = TangentFrame::new(omega);
    let m = cfg.n - 1;
    let k = cfg.speed();
    let p = launch_offset_point(branch, theta);

    let by_gradient = |h: f64| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            let (_, bp) = continued_action(&chart(&tf, i, h), omega, &p, cfg, field)?;
            let (_, bm) = continued_action(&chart(&tf, i, -h), omega, &p, cfg, field)?;
            let row = (&bm.w - &bp.w) * (k / (2.0 * h));
            for j in 0..m {
                out[(i, j)] = row[j];
            }
        }
        Ok(out)
    };
    let by_action = |h: f64| -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let th = chart(&tf, i, si * h);
                    let om = chart(&of, j, sj * h);
                    s += sign * continued_action(&th, &om, &p, cfg, field)?.0;
                }
                out[(i, j)] = s / (4.0 * h * h);
            }
        }
        Ok(out)
    };
    // One Richardson step removes the O(h²) term of both central schemes.
    let h = HESSIAN_STEP;
    let richardson = |coarse: DMatrix<f64>, fine: DMatrix<f64>| (fine * 4.0 - coarse) / 3.0;
    Ok(MixedHessian {
        from_gradient: richardson(by_gradient(h)?, by_gradient(0.5 * h)?),
        from_action: richardson(by_action(h)?, by_action(0.5 * h)?),
    })
}

/// How far along the ray caustics are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaslovHorizon {
    /// From the launch plane to the exit from B(0, R₀).
    #[default]
    Exit,
    /// Also the free tail t → ∞.
    FullRay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaslovOptions {
    /// Evaluation points per stored step.
    pub refine: usize,
    pub horizon: MaslovHorizon,
}

impl Default for MaslovOptions {
    fn default() -> Self {
        Self { refine: 4, horizon: MaslovHorizon::Exit }
    }
}

/// |D| at or below this counts as touching zero.
const D_ZERO: f64 = 1e-10;

/// Number of sign changes of D(t) = det ∂x(t)/∂x(0) along the trajectory.
///
/// Initial perturbations δx₀ ∈ θ⊥ with δξ₀ = 0 span the incoming Lagrangian
/// plane; the remaining column (δx₀ = θ) follows the flow direction and only
/// fixes an orientation. Between stored steps ∂x/∂x(0) is interpolated by
/// cubic Hermite polynomials, using ∂ξ/∂x(0) as its derivative.
pub fn maslov_index(traj: &Trajectory, opts: &MaslovOptions) -> Result<usize> {
    let refine = opts.refine.max(1);
    let mut values = Vec::with_capacity(traj.samples.len() * refine + 1);
    let first = &traj.samples[0];
    values.push((first.t, first.position_block().determinant()));
    for pair in traj.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            continue;
        }
        let (pa, pb) = (a.position_block(), b.position_block());
        let (va, vb) = (a.position_block_rate() * dt, b.position_block_rate() * dt);
        for j in 1..=refine {
            let s = j as f64 / refine as f64;
            let s2 = s * s;
            let s3 = s2 * s;
            let m = &pa * (2.0 * s3 - 3.0 * s2 + 1.0)
                + &va * (s3 - 2.0 * s2 + s)
                + &pb * (-2.0 * s3 + 3.0 * s2)
                + &vb * (s3 - s2);
            values.push((a.t + s * dt, m.determinant()));
        }
    }
    let mut count = 0;
    let mut prev_sign = 0.0f64;
    let mut zero_run = 0;
    for &(t, d) in &values {
        if d.abs() <= D_ZERO {
            zero_run += 1;
            if zero_run >= 3 {
                return Err(ScatError::TangentZero { t });
            }
            continue;
        }
        zero_run = 0;
        let sign = d.signum();
        if prev_sign != 0.0 && sign != prev_sign {
            count += 1;
        }
        prev_sign = sign;
    }
    if opts.horizon == MaslovHorizon::FullRay {
        count += tail_caustics(traj);
    }
    Ok(count)
}

/// Zeros of det(A + τB), τ > 0, on the free tail, A and B the position block
/// and its rate at the final sample.
fn tail_caustics(traj: &Trajectory) -> usize {
    let last = &traj.samples[traj.samples.len() - 1];
    let a = last.position_block();
    let b = last.position_block_rate();
    let Some(a_inv) = a.clone().try_inverse() else {
        return 0;
    };
    (a_inv * b)
        .complex_eigenvalues()
        .iter()
        .filter(|mu| mu.im.abs() <= 1e-12 * mu.norm().max(1.0) && mu.re < 0.0)
        .count()
}

/// One branch's term in the amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub index: usize,
    /// σ̂^{-1/2}.
    pub magnitude: f64,
    /// S/h − μπ/2.
    pub phase: f64,
}

impl Contribution {
    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeResult {
    pub theta: DVector<f64>,
    pub omega: DVector<f64>,
    pub h: f64,
    pub contributions: Vec<Contribution>,
    pub f: Complex64,
    pub cross_section: f64,
}

/// Branch data entering the amplitude: (σ̂, S, μ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub sigma_hat: f64,
    pub action: f64,
    pub maslov: usize,
}

impl From<&Branch> for Term {
    fn from(b: &Branch) -> Self {
        Self { sigma_hat: b.sigma_hat, action: b.action, maslov: b.maslov }
    }
}

/// f = Σ σ̂^{-1/2} exp(i(S/h − μπ/2)).
pub fn assemble_terms(theta: &DVector<f64>, omega: &DVector<f64>, terms: &[Term], h: f64) -> Result<AmplitudeResult> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(ScatError::InvalidConfig(format!("h must be positive and finite, got {h}")));
    }
    for (index, t) in terms.iter().enumerate() {
        if !(t.sigma_hat > crate::TOL_DEGENERATE) {
            return Err(ScatError::DegenerateBranchPresent { index, sigma_hat: t.sigma_hat });
        }
    }
    let contributions: Vec<Contribution> = terms
        .iter()
        .enumerate()
        .map(|(index, t)| Contribution {
            index,
            magnitude: t.sigma_hat.powf(-0.5),
            phase: t.action / h - t.maslov as f64 * FRAC_PI_2,
        })
        .collect();
    let f: Complex64 = contributions.iter().map(Contribution::value).sum();
    Ok(AmplitudeResult {
        theta: theta.clone(),
        omega: omega.clone(),
        h,
        contributions,
        f,
        cross_section: f.norm_sqr(),
    })
}

pub fn assemble_from_branches(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    set: &BranchSet,
    h: f64,
) -> Result<AmplitudeResult> {
    if set.degenerate_family {
        return Err(ScatError::DegenerateFamily);
    }
    if let Some(b) = set.first_degenerate() {
        return Err(ScatError::DegenerateBranchPresent { index: b.index, sigma_hat: b.sigma_hat });
    }
    let terms: Vec<Term> = set.branches.iter().map(Term::from).collect();
    assemble_terms(theta, omega, &terms, h)
}

/// Branches by the default seed grid, then the amplitude.
pub fn assemble_amplitude(
    theta: &DVector<f64>,
    omega: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
    h: f64,
) -> Result<AmplitudeResult> {
    let set = find_branches(theta, omega, cfg, field, &SeedGrid::for_field(field, cfg))?;
    assemble_from_branches(theta, omega, &set, h)
}

/// Amplitude (or the reason it is unavailable) for one fan direction.
#[derive(Debug, Clone)]
pub struct FanEntry {
    pub omega: DVector<f64>,
    pub branches: usize,
    pub result: Result<AmplitudeResult>,
}

/// [`assemble_amplitude`] across outgoing directions, one record per ω in
/// input order.
pub fn amplitude_fan(
    theta: &DVector<f64>,
    omegas: &[DVector<f64>],
    cfg: &ScatteringConfig,
    field: &PotentialField,
    h: f64,
) -> Vec<FanEntry> {
    let seeds = SeedGrid::for_field(field, cfg);
    // Directions are the parallel unit here; the per-direction seed sweep
    // stays sequential.
    let inner = cfg.clone().with_execution(crate::Execution::Sequential);
    par::map(cfg.execution, omegas, |omega| match find_branches(theta, omega, &inner, field, &seeds) {
        Ok(set) => FanEntry {
            omega: omega.clone(),
            branches: set.len(),
            result: assemble_from_branches(theta, omega, &set, h),
        },
        Err(e) => FanEntry { omega: omega.clone(), branches: 0, result: Err(e) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::launch_incoming;
    use crate::dynamics::integrate_until_exit;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn free_forward_action_vanishes() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let free = PotentialField::free(2);
        let theta = v(&[0.6, 0.8]);
        let traj = integrate_until_exit(&launch_incoming(&theta, &v(&[0.3]), &cfg), &free, &cfg).unwrap();
        for ext in [0.0, 1.0, 7.5] {
            assert!(modified_action(&traj, &theta, &theta, &cfg, ext).abs() < 1e-14);
        }
        assert_eq!(maslov_index(&traj, &MaslovOptions::default()).unwrap(), 0);
    }

    #[test]
    fn single_branch_arithmetic() {
        let th = v(&[1.0, 0.0]);
        let r = assemble_terms(&th, &th, &[Term { sigma_hat: 0.25, action: 0.0, maslov: 0 }], 0.1).unwrap();
        assert!((r.f - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((r.cross_section - 4.0).abs() < 1e-14);
    }

    #[test]
    fn half_period_shift_cancels() {
        let th = v(&[1.0, 0.0]);
        let h = 0.013;
        let terms = [
            Term { sigma_hat: 0.5, action: 0.2, maslov: 1 },
            Term { sigma_hat: 0.5, action: 0.2 + PI * h, maslov: 1 },
        ];
        let r = assemble_terms(&th, &th, &terms, h).unwrap();
        assert!(r.f.norm() < 1e-12);
    }

    #[test]
    fn degenerate_term_is_refused() {
        let th = v(&[1.0, 0.0]);
        let terms = [Term { sigma_hat: 1.0, action: 0.0, maslov: 0 }, Term { sigma_hat: 1e-9, action: 0.0, maslov: 0 }];
        assert_eq!(
            assemble_terms(&th, &th, &terms, 0.1),
            Err(ScatError::DegenerateBranchPresent { index: 1, sigma_hat: 1e-9 })
        );
    }

    #[test]
    fn action_is_independent_of_readout_time() {
        let cfg = ScatteringConfig::new(0.5, 2.0, 2);
        let bump = PotentialField::central(2, 1.0, 0.1);
        let theta = v(&[1.0, 0.0]);
        let traj = integrate_until_exit(&launch_incoming(&theta, &v(&[0.4]), &cfg), &bump, &cfg).unwrap();
        let omega = traj.end().xi.normalize();
        let s0 = modified_action(&traj, &theta, &omega, &cfg, 0.0);
        let s1 = modified_action(&traj, &theta, &omega, &cfg, 2.0 * cfg.r0 / cfg.speed());
        assert!((s0 - s1).abs() <= 1e-12 * s0.abs().max(1.0));
    }
}

//! Incoming launch planes, asymptotic data and the impact map z ↦ ξ∞(θ, z).

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{integrate_until_exit, PhasePoint, ScatteringConfig, Trajectory, TOL_DEGENERATE};
use crate::error::{Result, ScatError};
use crate::frame::TangentFrame;
use crate::par;
use crate::potential::PotentialField;

/// Outgoing asymptote of a scattered trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticData {
    /// Final direction, a unit vector.
    pub xi_inf: DVector<f64>,
    /// Point where the trajectory leaves ‖x‖ = R₀.
    pub x_exit: DVector<f64>,
    /// Anchor of the asymptote orthogonal to `xi_inf`.
    pub r_inf: DVector<f64>,
    pub t_exit: f64,
}

/// A launch point together with its scattered trajectory.
#[derive(Debug, Clone)]
pub struct Scattered {
    pub launch: PhasePoint,
    pub trajectory: Trajectory,
    pub asymptotics: AsymptoticData,
}

/// (embed(z) − (R₀ + margin)θ, √(2λ)θ) in the standard frame of θ⊥.
pub fn launch_incoming(theta: &DVector<f64>, z: &DVector<f64>, cfg: &ScatteringConfig) -> PhasePoint {
    launch_in_frame(&TangentFrame::new(theta), z, cfg)
}

pub fn launch_in_frame(frame: &TangentFrame, z: &DVector<f64>, cfg: &ScatteringConfig) -> PhasePoint {
    let theta = frame.normal();
    PhasePoint {
        x: frame.embed(z) - theta * cfg.launch_offset(),
        xi: theta * cfg.speed(),
    }
}

pub fn extract_asymptotics(traj: &Trajectory, cfg: &ScatteringConfig) -> Result<AsymptoticData> {
    if !traj.is_outgoing(cfg.r0) {
        return Err(ScatError::NotOutgoing);
    }
    let end = traj.end();
    let xi_inf = end.xi.normalize();
    let r_inf = &end.x - &xi_inf * end.x.dot(&xi_inf);
    Ok(AsymptoticData { xi_inf, x_exit: end.x.clone(), r_inf, t_exit: traj.exit_time })
}

fn check_inputs(frame: &TangentFrame, z: &DVector<f64>, cfg: &ScatteringConfig, field: &PotentialField) -> Result<()> {
    if frame.dim() != cfg.n || field.dim() != cfg.n {
        return Err(ScatError::DimensionMismatch { expected: cfg.n, got: frame.dim().max(field.dim()) });
    }
    if z.len() + 1 != cfg.n {
        return Err(ScatError::DimensionMismatch { expected: cfg.n - 1, got: z.len() });
    }
    Ok(())
}

/// Launch → integrate → extract.
pub fn scatter(
    frame: &TangentFrame,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<Scattered> {
    check_inputs(frame, z, cfg, field)?;
    let launch = launch_in_frame(frame, z, cfg);
    let trajectory = integrate_until_exit(&launch, field, cfg)?;
    let asymptotics = extract_asymptotics(&trajectory, cfg)?;
    Ok(Scattered { launch, trajectory, asymptotics })
}

/// z ↦ ξ∞(θ, z).
pub fn impact_map(
    theta: &DVector<f64>,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<DVector<f64>> {
    Ok(scatter(&TangentFrame::new(theta), z, cfg, field)?.asymptotics.xi_inf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMethod {
    Monodromy,
    FiniteDifference,
}

/// ∂ξ∞/∂z from the monodromy of an already scattered trajectory.
///
/// Launch perturbations δx₀ = E δz (E the frame matrix) with δξ₀ = 0 give
/// δξ = M_ξx E δz, and ξ ↦ ξ/‖ξ‖ contributes (I − ξ∞ξ∞ᵀ)/‖ξ‖.
pub fn dxi_dz_from_monodromy(frame: &TangentFrame, traj: &Trajectory) -> DMatrix<f64> {
    let n = frame.dim();
    let xi = &traj.end().xi;
    let speed = xi.norm();
    let unit = xi / speed;
    let m_xi_x = traj.monodromy.view((n, 0), (n, n));
    let proj = (DMatrix::identity(n, n) - &unit * unit.transpose()) / speed;
    proj * m_xi_x * frame.matrix()
}

pub fn jacobian_in_frame(
    frame: &TangentFrame,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
    method: JacobianMethod,
) -> Result<DMatrix<f64>> {
    match method {
        JacobianMethod::Monodromy => {
            let s = scatter(frame, z, cfg, field)?;
            Ok(dxi_dz_from_monodromy(frame, &s.trajectory))
        }
        JacobianMethod::FiniteDifference => {
            check_inputs(frame, z, cfg, field)?;
            let n = cfg.n;
            let h = 1e-5 * z.norm().max(1.0);
            let mut jac = DMatrix::zeros(n, n - 1);
            for i in 0..n - 1 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fp = scatter(frame, &zp, cfg, field)?.asymptotics.xi_inf;
                let fm = scatter(frame, &zm, cfg, field)?.asymptotics.xi_inf;
                jac.set_column(i, &((fp - fm) / (2.0 * h)));
            }
            Ok(jac)
        }
    }
}

/// n × (n−1) matrix ∂ξ∞/∂z in the standard frame of θ⊥.
pub fn jacobian_dxi_dz(
    theta: &DVector<f64>,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
    method: JacobianMethod,
) -> Result<DMatrix<f64>> {
    jacobian_in_frame(&TangentFrame::new(theta), z, cfg, field, method)
}

/// det(ξ∞, ∂ξ∞/∂z₁, …, ∂ξ∞/∂z_{n−1}) with its sign.
pub fn signed_density(xi_inf: &DVector<f64>, jac: &DMatrix<f64>) -> f64 {
    let n = xi_inf.len();
    let mut m = DMatrix::zeros(n, n);
    m.set_column(0, xi_inf);
    for i in 0..n - 1 {
        m.set_column(i + 1, &jac.column(i));
    }
    m.determinant()
}

pub fn signed_density_in_frame(
    frame: &TangentFrame,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<f64> {
    let s = scatter(frame, z, cfg, field)?;
    let jac = dxi_dz_from_monodromy(frame, &s.trajectory);
    Ok(signed_density(&s.asymptotics.xi_inf, &jac))
}

/// σ̂(z; λ) = |det(ξ∞, ∂ξ∞/∂z₁, …, ∂ξ∞/∂z_{n−1})|.
pub fn angular_density(
    theta: &DVector<f64>,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<f64> {
    Ok(signed_density_in_frame(&TangentFrame::new(theta), z, cfg, field)?.abs())
}

pub fn angular_density_in_frame(
    frame: &TangentFrame,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<f64> {
    Ok(signed_density_in_frame(frame, z, cfg, field)?.abs())
}

/// Bisect [z_from, z_to] for a degenerate point: a sign change of the
/// signed density (rainbow/fold) or a crossing of σ̂ through
/// [`TOL_DEGENERATE`] (transition into free flight).
pub fn locate_degenerate(
    theta: &DVector<f64>,
    z_from: &DVector<f64>,
    z_to: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<DVector<f64>> {
    let frame = TangentFrame::new(theta);
    let at = |tau: f64| z_from + (z_to - z_from) * tau;
    let density = |tau: f64| signed_density_in_frame(&frame, &at(tau), cfg, field);
    let s0 = density(0.0)?;
    let s1 = density(1.0)?;
    let reg0 = s0.abs() > TOL_DEGENERATE;
    let reg1 = s1.abs() > TOL_DEGENERATE;
    let predicate: Box<dyn Fn(f64) -> bool> = if reg0 && reg1 && (s0 > 0.0) != (s1 > 0.0) {
        Box::new(|s: f64| s > 0.0)
    } else if reg0 != reg1 {
        Box::new(|s: f64| s.abs() > TOL_DEGENERATE)
    } else {
        return Err(ScatError::NoSignChange);
    };
    let side0 = predicate(s0);
    let length = (z_to - z_from).norm();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while (hi - lo) * length > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if predicate(density(mid)?) == side0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// One point of the sphere-side scattering relation with its cotangent data
/// (√(2λ)·z in the θ chart, −√(2λ)·w in the ω chart).
#[derive(Debug, Clone, PartialEq)]
pub struct SRSample {
    pub theta: DVector<f64>,
    pub omega: DVector<f64>,
    pub z: DVector<f64>,
    pub w: DVector<f64>,
    pub d_theta_s: DVector<f64>,
    pub d_omega_s: DVector<f64>,
}

pub fn relation_sample(
    theta: &DVector<f64>,
    z: &DVector<f64>,
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Result<SRSample> {
    let frame = TangentFrame::new(theta);
    let s = scatter(&frame, z, cfg, field)?;
    let omega = s.asymptotics.xi_inf.clone();
    let w = TangentFrame::new(&omega).coords(&s.asymptotics.x_exit);
    let k = cfg.speed();
    Ok(SRSample {
        theta: frame.normal().clone(),
        d_theta_s: z * k,
        d_omega_s: &w * -k,
        omega,
        z: z.clone(),
        w,
    })
}

/// Row of a tabulated relation: ξ∞ and σ̂ at one impact parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationRow {
    pub z: DVector<f64>,
    pub xi_inf: DVector<f64>,
    pub sigma_hat: f64,
}

impl RelationRow {
    pub fn degenerate(&self) -> bool {
        self.sigma_hat <= TOL_DEGENERATE
    }
}

/// Evaluate the impact map and σ̂ over a list of impact parameters; output
/// order follows input order.
pub fn sample_relation(
    theta: &DVector<f64>,
    zs: &[DVector<f64>],
    cfg: &ScatteringConfig,
    field: &PotentialField,
) -> Vec<Result<RelationRow>> {
    let frame = TangentFrame::new(theta);
    par::map(cfg.execution, zs, |z| {
        let s = scatter(&frame, z, cfg, field)?;
        let jac = dxi_dz_from_monodromy(&frame, &s.trajectory);
        Ok(RelationRow {
            z: z.clone(),
            sigma_hat: signed_density(&s.asymptotics.xi_inf, &jac).abs(),
            xi_inf: s.asymptotics.xi_inf,
        })
    })
}

//! One function per subcommand; each returns the text to write.

use nalgebra::DVector;
use serde::Serialize;

use scatrel::asymptotics::{extract_asymptotics, sample_relation, scatter};
use scatrel::branches::{find_branches, BranchSet, SeedGrid};
use scatrel::checks::{run_checks, shipped_potentials, CheckOutcome};
use scatrel::frame::{rotate2, TangentFrame};
use scatrel::par;
use scatrel::semiclassics::{assemble_from_branches, AmplitudeResult};
use scatrel::{Execution, ScatError};

use crate::config::{Loaded, SCHEMA};
use crate::error::CliError;
use crate::output::{csv, float, json};

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

#[derive(Serialize)]
struct TraceSample {
    t: f64,
    x: Vec<f64>,
    xi: Vec<f64>,
}

#[derive(Serialize)]
struct TraceReport {
    schema: &'static str,
    command: &'static str,
    theta: Vec<f64>,
    z: Vec<f64>,
    exit_time: f64,
    xi_inf: Vec<f64>,
    energy_residual: f64,
    symplectic_residual: f64,
    lagrangian_integral: f64,
    steps: usize,
    samples: Vec<TraceSample>,
}

pub fn trace(cfg: &Loaded) -> Result<String, CliError> {
    let spec = cfg.block(&cfg.run.trace, "trace")?;
    let field = cfg.potential()?;
    let theta = cfg.direction(&["trace", "theta"], &spec.theta)?;
    let z = cfg.impact(&["trace", "z"], &spec.z)?;
    let s = scatter(&TangentFrame::new(&theta), &z, cfg.cfg(), &field)?;
    let traj = &s.trajectory;
    Ok(json(&TraceReport {
        schema: SCHEMA,
        command: "trace",
        theta: vec(&theta),
        z: vec(&z),
        exit_time: traj.exit_time,
        xi_inf: vec(&s.asymptotics.xi_inf),
        energy_residual: traj.energy_drift(&field),
        symplectic_residual: traj.symplectic_residual(),
        lagrangian_integral: traj.lagrangian_integral,
        steps: traj.steps_taken,
        samples: traj
            .samples
            .iter()
            .map(|smp| TraceSample { t: smp.t, x: vec(&smp.point.x), xi: vec(&smp.point.xi) })
            .collect(),
    }))
}

pub fn relation(cfg: &Loaded) -> Result<String, CliError> {
    let spec = cfg.block(&cfg.run.relation, "relation")?;
    let field = cfg.potential()?;
    let theta = cfg.direction(&["relation", "theta"], &spec.theta)?;
    let zs = cfg.grid_points(&["relation", "grid"], &spec.grid)?;
    let n = cfg.cfg().n;
    let mut header: Vec<String> = (0..n - 1).map(|i| format!("z{i}")).collect();
    header.extend((0..n).map(|i| format!("xi{i}")));
    header.extend(["sigma_hat", "degenerate", "error"].map(String::from));
    let rows = zs
        .iter()
        .zip(sample_relation(&theta, &zs, cfg.cfg(), &field))
        .map(|(z, row)| {
            let mut r: Vec<String> = z.iter().map(|v| float(*v)).collect();
            match row {
                Ok(row) => {
                    r.extend(row.xi_inf.iter().map(|v| float(*v)));
                    r.push(float(row.sigma_hat));
                    r.push(row.degenerate().to_string());
                    r.push(String::new());
                }
                Err(e) => {
                    r.extend(std::iter::repeat_n(String::new(), n + 2));
                    r.push(e.to_string());
                }
            }
            r
        })
        .collect::<Vec<_>>();
    Ok(csv(&header, &rows))
}

#[derive(Serialize)]
struct BranchRecord {
    index: usize,
    z: Vec<f64>,
    w: Vec<f64>,
    xi_inf: Vec<f64>,
    sigma_hat: f64,
    action: f64,
    maslov: usize,
    residual: f64,
}

#[derive(Serialize)]
struct SolveReport {
    schema: &'static str,
    command: &'static str,
    theta: Vec<f64>,
    omega: Vec<f64>,
    degenerate_family: bool,
    branches: Vec<BranchRecord>,
}

pub fn solve(cfg: &Loaded) -> Result<String, CliError> {
    let spec = cfg.block(&cfg.run.solve, "solve")?;
    let field = cfg.potential()?;
    let theta = cfg.direction(&["solve", "theta"], &spec.theta)?;
    let omega = cfg.direction(&["solve", "omega"], &spec.omega)?;
    let set = find_branches(&theta, &omega, cfg.cfg(), &field, &SeedGrid::for_field(&field, cfg.cfg()))?;
    let branches = set
        .branches
        .iter()
        .map(|b| {
            Ok(BranchRecord {
                index: b.index,
                z: vec(&b.z),
                w: vec(&b.w),
                xi_inf: vec(&extract_asymptotics(&b.trajectory, cfg.cfg())?.xi_inf),
                sigma_hat: b.sigma_hat,
                action: b.action,
                maslov: b.maslov,
                residual: b.residual,
            })
        })
        .collect::<Result<Vec<_>, ScatError>>()?;
    Ok(json(&SolveReport {
        schema: SCHEMA,
        command: "solve",
        theta: vec(&theta),
        omega: vec(&omega),
        degenerate_family: set.degenerate_family,
        branches,
    }))
}

#[derive(Serialize)]
struct ContributionRecord {
    index: usize,
    magnitude: f64,
    phase: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct AmplitudeRecord {
    theta: Vec<f64>,
    omega: Vec<f64>,
    h: f64,
    contributions: Vec<ContributionRecord>,
    f_re: f64,
    f_im: f64,
    cross_section: f64,
}

impl From<&AmplitudeResult> for AmplitudeRecord {
    fn from(r: &AmplitudeResult) -> Self {
        Self {
            theta: vec(&r.theta),
            omega: vec(&r.omega),
            h: r.h,
            contributions: r
                .contributions
                .iter()
                .map(|c| {
                    let v = c.value();
                    ContributionRecord { index: c.index, magnitude: c.magnitude, phase: c.phase, re: v.re, im: v.im }
                })
                .collect(),
            f_re: r.f.re,
            f_im: r.f.im,
            cross_section: r.cross_section,
        }
    }
}

#[derive(Serialize)]
struct Refusal {
    kind: &'static str,
    branch: Option<usize>,
    sigma_hat: Option<f64>,
    message: String,
}

#[derive(Serialize)]
struct AmplitudeReport {
    schema: &'static str,
    command: &'static str,
    branches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<AmplitudeRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<Refusal>,
}

/// Amplitude refusals are results, not failures; anything else propagates.
fn refusal(e: ScatError) -> Result<Refusal, CliError> {
    let message = e.to_string();
    match e {
        ScatError::DegenerateBranchPresent { index, sigma_hat } => {
            Ok(Refusal { kind: "degenerate_branch", branch: Some(index), sigma_hat: Some(sigma_hat), message })
        }
        ScatError::DegenerateFamily => Ok(Refusal { kind: "degenerate_family", branch: None, sigma_hat: None, message }),
        other => Err(other.into()),
    }
}

pub fn amplitude(cfg: &Loaded) -> Result<String, CliError> {
    let spec = cfg.block(&cfg.run.amplitude, "amplitude")?;
    let field = cfg.potential()?;
    let theta = cfg.direction(&["amplitude", "theta"], &spec.theta)?;

    let omegas: Vec<DVector<f64>> = match (&spec.omega, &spec.omega_grid, &spec.omega_angles) {
        (Some(o), None, None) => vec![cfg.direction(&["amplitude", "omega"], o)?],
        (None, Some(list), None) => list
            .iter()
            .map(|o| cfg.direction(&["amplitude", "omega_grid"], o))
            .collect::<Result<_, _>>()?,
        (None, None, Some(r)) => {
            if cfg.cfg().n != 2 {
                return Err(cfg.err(&["amplitude", "omega_angles"], "omega_angles needs n = 2"));
            }
            cfg.range(&["amplitude", "omega_angles"], r)?.into_iter().map(|a| rotate2(&theta, a)).collect()
        }
        _ => return Err(cfg.err(&["amplitude"], "give exactly one of `omega`, `omega_grid` or `omega_angles`")),
    };
    let hs: Vec<f64> = match (spec.h, &spec.h_grid) {
        (Some(h), None) => vec![h],
        (None, Some(r)) => cfg.range(&["amplitude", "h_grid"], r)?,
        _ => return Err(cfg.err(&["amplitude"], "give exactly one of `h` or `h_grid`")),
    };
    if let Some(h) = hs.iter().find(|h| !(**h > 0.0)) {
        return Err(cfg.err(&["amplitude", "h"], format!("h must be positive (got {h})")));
    }

    // Directions are the parallel unit; each seed sweep runs sequentially.
    let seeds = SeedGrid::for_field(&field, cfg.cfg());
    let inner = cfg.cfg().clone().with_execution(Execution::Sequential);
    let sets: Vec<BranchSet> = par::map(cfg.cfg().execution, &omegas, |omega| find_branches(&theta, omega, &inner, &field, &seeds))
        .into_iter()
        .collect::<Result<_, _>>()?;

    if omegas.len() == 1 && hs.len() == 1 {
        let (result, error) = match assemble_from_branches(&theta, &omegas[0], &sets[0], hs[0]) {
            Ok(r) => (Some(AmplitudeRecord::from(&r)), None),
            Err(e) => (None, Some(refusal(e)?)),
        };
        return Ok(json(&AmplitudeReport { schema: SCHEMA, command: "amplitude", branches: sets[0].len(), result, error }));
    }

    let n = cfg.cfg().n;
    let mut header: Vec<String> = (0..n).map(|i| format!("omega{i}")).collect();
    header.extend(["h", "branches", "f_re", "f_im", "cross_section", "error"].map(String::from));
    let mut rows = Vec::with_capacity(omegas.len() * hs.len());
    for (omega, set) in omegas.iter().zip(&sets) {
        for &h in &hs {
            let mut r: Vec<String> = omega.iter().map(|v| float(*v)).collect();
            r.push(float(h));
            r.push(set.len().to_string());
            match assemble_from_branches(&theta, omega, set, h) {
                Ok(a) => {
                    r.extend([float(a.f.re), float(a.f.im), float(a.cross_section), String::new()]);
                }
                Err(e) => {
                    let why = refusal(e)?;
                    r.extend([String::new(), String::new(), String::new(), why.message]);
                }
            }
            rows.push(r);
        }
    }
    Ok(csv(&header, &rows))
}

#[derive(Serialize)]
struct CheckReport {
    schema: &'static str,
    command: &'static str,
    suite: String,
    passed: bool,
    outcomes: Vec<CheckOutcome>,
}

/// Returns the report and the identifiers of failed invariants.
pub fn check(cfg: &Loaded) -> Result<(String, Vec<String>), CliError> {
    let spec = cfg.block(&cfg.run.check, "check")?;
    let (selection, opts) = cfg.check_selection(spec)?;
    let fields = match cfg.run.potential {
        Some(_) => vec![("config".to_string(), cfg.potential()?)],
        None => shipped_potentials(cfg.cfg().n)
            .into_iter()
            .map(|(name, f)| {
                cfg.cfg().validate_with(&f).map_err(|e| cfg.err(&["scattering", "r0"], e.to_string()))?;
                Ok((name.to_string(), f))
            })
            .collect::<Result<_, CliError>>()?,
    };
    let mut outcomes = Vec::new();
    for (name, field) in fields {
        let field = match spec.fault {
            Some(fault) => field.with_hessian_fault(fault),
            None => field,
        };
        outcomes.extend(run_checks(&name, &field, cfg.cfg(), selection, opts));
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| format!("{}[{}]", o.id, o.potential)).collect();
    let report = json(&CheckReport {
        schema: SCHEMA,
        command: "check",
        suite: spec.suite.clone(),
        passed: failed.is_empty(),
        outcomes,
    });
    Ok((report, failed))
}

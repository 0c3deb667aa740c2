//! Smooth compactly supported potentials built from bump functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatError};

/// Beyond this value of 1/(1 − s) the bump is below f64 resolution.
const BUMP_CUTOFF: f64 = 700.0;

/// V_b(x) = A·exp(1 − 1/(1 − ‖x−c‖²/ρ²)) inside ‖x−c‖ < ρ, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        Self { center, radius, amplitude }
    }

    /// Value and the first two derivatives of the profile in s = ‖x−c‖²/ρ².
    fn profile(&self, s: f64) -> Option<(f64, f64, f64)> {
        if s >= 1.0 {
            return None;
        }
        let u = 1.0 - s;
        let inv = 1.0 / u;
        if inv > BUMP_CUTOFF {
            return None;
        }
        let v = self.amplitude * (1.0 - inv).exp();
        let vs = -v * inv * inv;
        let vss = v * (1.0 - 2.0 * u) * inv.powi(4);
        Some((v, vs, vss))
    }
}

/// Test hook that corrupts the Hessian with an antisymmetric term, which
/// breaks the symplectic structure of the variational flow.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianFault {
    pub skew: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    dim: usize,
    bumps: Vec<Bump>,
    support_radius: f64,
    fault: Option<HessianFault>,
}

impl PotentialField {
    pub fn new(dim: usize, bumps: Vec<Bump>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(ScatError::InvalidConfig(format!("dimension must be 2 or 3, got {dim}")));
        }
        let mut support_radius: f64 = 0.0;
        for (i, b) in bumps.iter().enumerate() {
            if b.center.len() != dim {
                return Err(ScatError::DimensionMismatch { expected: dim, got: b.center.len() });
            }
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return Err(ScatError::InvalidConfig(format!("bump {i}: radius must be > 0")));
            }
            if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                return Err(ScatError::InvalidConfig(format!("bump {i}: non-finite parameters")));
            }
            let c = b.center.iter().map(|c| c * c).sum::<f64>().sqrt();
            support_radius = support_radius.max(c + b.radius);
        }
        Ok(Self { dim, bumps, support_radius, fault: None })
    }

    pub fn free(dim: usize) -> Self {
        Self { dim, bumps: Vec::new(), support_radius: 0.0, fault: None }
    }

    /// Single bump centred at the origin.
    pub fn central(dim: usize, radius: f64, amplitude: f64) -> Self {
        Self::new(dim, vec![Bump::new(vec![0.0; dim], radius, amplitude)])
            .expect("valid central bump")
    }

    pub fn with_hessian_fault(mut self, fault: HessianFault) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn is_free(&self) -> bool {
        self.bumps.is_empty()
    }

    /// max over bumps of ‖c‖ + ρ; zero for the free field.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn min_bump_radius(&self) -> Option<f64> {
        self.bumps.iter().map(|b| b.radius).reduce(f64::min)
    }

    pub fn max_bump_radius(&self) -> Option<f64> {
        self.bumps.iter().map(|b| b.radius).reduce(f64::max)
    }

    /// The single centred bump, if that is all this field is.
    pub fn as_central(&self) -> Option<&Bump> {
        match self.bumps.as_slice() {
            [b] if b.center.iter().all(|c| *c == 0.0) => Some(b),
            _ => None,
        }
    }

    /// Whether the whole line {x + s·d} stays outside every bump.
    pub fn line_misses_support(&self, x: &[f64], d: &[f64]) -> bool {
        let dd: f64 = d.iter().map(|v| v * v).sum();
        self.bumps.iter().all(|b| {
            let rel: Vec<f64> = b.center.iter().zip(x).map(|(c, xi)| c - xi).collect();
            let along: f64 = rel.iter().zip(d).map(|(r, di)| r * di).sum::<f64>() / dd;
            let off: f64 = rel.iter().zip(d).map(|(r, di)| (r - along * di).powi(2)).sum();
            off >= b.radius * b.radius
        })
    }

    /// Upper bound on V: the sum of the positive amplitudes.
    pub fn max_value_bound(&self) -> f64 {
        self.bumps.iter().map(|b| b.amplitude.max(0.0)).sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = 0.0;
        for b in &self.bumps {
            let s = dist2(x, &b.center) / (b.radius * b.radius);
            if let Some((bv, _, _)) = b.profile(s) {
                v += bv;
            }
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = vec![0.0; self.dim];
        let mut h = vec![0.0; self.dim * self.dim];
        self.eval_into(x, &mut g, &mut h);
        DVector::from_vec(g)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut g = vec![0.0; self.dim];
        let mut h = vec![0.0; self.dim * self.dim];
        self.eval_into(x, &mut g, &mut h);
        DMatrix::from_row_slice(self.dim, self.dim, &h)
    }

    /// Value, gradient and row-major Hessian in one pass. `grad` and `hess`
    /// are overwritten.
    pub fn eval_into(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let n = self.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        let mut value = 0.0;
        for b in &self.bumps {
            let rho2 = b.radius * b.radius;
            let s = dist2(x, &b.center) / rho2;
            let Some((v, vs, vss)) = b.profile(s) else { continue };
            value += v;
            // ∇s = 2(x−c)/ρ², ∇²s = 2I/ρ²
            for i in 0..n {
                let di = 2.0 * (x[i] - b.center[i]) / rho2;
                grad[i] += vs * di;
                for j in 0..n {
                    let dj = 2.0 * (x[j] - b.center[j]) / rho2;
                    hess[i * n + j] += vss * di * dj;
                }
                hess[i * n + i] += vs * 2.0 / rho2;
            }
        }
        if let Some(fault) = self.fault {
            if value != 0.0 {
                hess[1] += fault.skew;
                hess[n] -= fault.skew;
            }
        }
        value
    }
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

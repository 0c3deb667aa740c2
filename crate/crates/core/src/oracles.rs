//! Independent references for a single centred bump.
//!
//! Nothing here touches the adaptive integrator, the monodromy, or the
//! potential's own derivative code: the deflection function and the
//! reduced action come from 1D quadrature over the radial profile, and the
//! conjugate-point count from a fixed-step RK4 Jacobi-field integration.

use std::f64::consts::PI;

use crate::dynamics::ScatteringConfig;
use crate::error::{Result, ScatError};
use crate::potential::PotentialField;

/// Radial profile A·exp(1 − 1/(1 − r²/ρ²)) and its r-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialBump {
    pub amplitude: f64,
    pub radius: f64,
}

impl RadialBump {
    pub fn from_field(field: &PotentialField) -> Result<Self> {
        let b = field.as_central().ok_or(ScatError::NotCentral)?;
        Ok(Self { amplitude: b.amplitude, radius: b.radius })
    }

    pub fn value(&self, r: f64) -> f64 {
        let q = r / self.radius;
        let w = 1.0 - q * q;
        if w <= 1.0 / 700.0 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / w).exp()
    }

    /// (V, V′, V″) in r.
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        let rho = self.radius;
        let q = r / rho;
        let w = 1.0 - q * q;
        if w <= 1.0 / 700.0 {
            return (0.0, 0.0, 0.0);
        }
        let v = self.amplitude * (1.0 - 1.0 / w).exp();
        // d/dr (−1/w) = −2r/(ρ² w²)
        let g = -2.0 * r / (rho * rho * w * w);
        let dg = -2.0 / (rho * rho * w * w) - 8.0 * r * r / (rho.powi(4) * w.powi(3));
        (v, v * g, v * (g * g + dg))
    }
}

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod (7, 15)

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for i in 0..7 {
        let dx = h * XGK[i];
        let (fl, fr) = (f(c - dx), f(c + dx));
        kron += WGK[i] * (fl + fr);
        abs += WGK[i] * (fl.abs() + fr.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (fl + fr);
        }
    }
    Panel { a, b, value: kron * h, error: ((kron - gauss) * h).abs(), abs: abs * h.abs() }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

const MAX_PANELS: usize = 4000;

/// ∫ₐᵇ f by globally adaptive Gauss–Kronrod: the panel with the largest
/// error estimate is bisected until the total error drops below
/// `abs_tol` or the roundoff floor of the integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    let mut panels = vec![gk15(&f, a, b)];
    loop {
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let abs: f64 = panels.iter().map(|p| p.abs).sum();
        if error <= abs_tol.max(50.0 * f64::EPSILON * abs) || panels.len() >= MAX_PANELS {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a.min(p.b) || m >= p.a.max(p.b) {
            panels.push(Panel { error: 0.0, ..p });
            continue;
        }
        panels.push(gk15(&f, p.a, m));
        panels.push(gk15(&f, m, p.b));
    }
    panels.iter().map(|p| p.value).sum()
}

// ---------------------------------------------------------------------------
// Central scattering by quadrature

const QUAD_TOL: f64 = 1e-14;

/// Radial reduction of one centred bump at energy λ.
#[derive(Debug, Clone, Copy)]
struct Radial {
    bump: RadialBump,
    lambda: f64,
}

impl Radial {
    /// G(r) = r²(1 − V/λ) − b²; turning points are its roots.
    fn g(&self, r: f64, b: f64) -> f64 {
        r * r * (1.0 - self.bump.value(r) / self.lambda) - b * b
    }

    fn dg(&self, r: f64) -> f64 {
        let (v, dv, _) = self.bump.derivatives(r);
        2.0 * r * (1.0 - v / self.lambda) - r * r * dv / self.lambda
    }

    fn d2g(&self, r: f64) -> f64 {
        let (v, dv, d2v) = self.bump.derivatives(r);
        2.0 * (1.0 - v / self.lambda) - (4.0 * r * dv + r * r * d2v) / self.lambda
    }

    /// Outermost turning point inside the support, for 0 < b < ρ.
    fn turning_point(&self, b: f64) -> Result<f64> {
        let rho = self.bump.radius;
        let n = 4000;
        let mut hi = rho;
        let mut lo = None;
        for i in 1..=n {
            let r = rho * (1.0 - i as f64 / n as f64);
            if self.g(r, b) <= 0.0 {
                lo = Some(r);
                break;
            }
            hi = r;
        }
        let mut lo = lo.unwrap_or(0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.g(mid, b) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r0 = hi;
        if self.dg(r0).abs() < 1e-8 * rho {
            return Err(ScatError::OrbitingRegime { b });
        }
        Ok(r0)
    }

    /// ∫_{r₀}^{ρ} f(r, √F/v) · 2(ρ − r₀) dv with r = r₀ + (ρ − r₀)v² and
    /// F = G/r². The callback gets √F/v, which stays finite at the turning
    /// point; F itself is (√F/v)²v².
    fn turning_integral<F: Fn(f64, f64, f64) -> f64>(&self, b: f64, r0: f64, f: F) -> f64 {
        let rho = self.bump.radius;
        let span = rho - r0;
        let g0 = self.g(r0, b);
        let (g1, g2) = (self.dg(r0), self.d2g(r0));
        integrate(
            |v| {
                let h = span * v * v;
                let r = r0 + h;
                // (G(r) − G(r₀))/(r − r₀), by Taylor close to r₀ where the
                // difference quotient loses digits.
                let slope = if v < 1e-2 { g1 + 0.5 * g2 * h } else { (self.g(r, b) - g0) / h };
                let s = (slope * span).max(f64::MIN_POSITIVE).sqrt() / r;
                f(r, s, v) * 2.0 * span
            },
            0.0,
            1.0,
            QUAD_TOL,
        )
    }

    fn deflection(&self, b: f64) -> Result<f64> {
        let rho = self.bump.radius;
        let b = b.abs();
        if b >= rho {
            return Ok(0.0);
        }
        if b == 0.0 {
            let peak = (0..=2000)
                .map(|i| self.bump.value(rho * i as f64 / 2000.0))
                .fold(f64::NEG_INFINITY, f64::max);
            return Ok(if peak < self.lambda { 0.0 } else { PI });
        }
        let r0 = self.turning_point(b)?;
        let inner = self.turning_integral(b, r0, |r, s, _| 1.0 / (r * r * s));
        Ok(PI - 2.0 * (b / rho).asin() - 2.0 * b * inner)
    }

    fn action(&self, b: f64) -> Result<f64> {
        let rho = self.bump.radius;
        let b = b.abs();
        if b >= rho {
            return Ok(0.0);
        }
        let k = (2.0 * self.lambda).sqrt();
        let r0 = if b == 0.0 { 0.0 } else { self.turning_point(b)? };
        let integral = if b == 0.0 {
            integrate(|r| (1.0 - self.bump.value(r) / self.lambda).max(0.0).sqrt(), 0.0, rho, QUAD_TOL)
        } else {
            self.turning_integral(b, r0, |r, s, v| (s * s * v * v + b * b / (r * r)) / s)
        };
        Ok(2.0 * k * integral - 2.0 * k * (rho * rho - b * b).sqrt())
    }
}

/// Θ(b) = π − 2b∫_{r₀}^{∞} dr / (r²√(1 − b²/r² − V(r)/λ)) for b ≥ 0.
/// Positive values deflect away from the centre.
pub fn central_deflection_quadrature(field: &PotentialField, lambda: f64, b: f64) -> Result<f64> {
    let radial = Radial { bump: RadialBump::from_field(field)?, lambda };
    radial.deflection(b)
}

/// Deflection extended oddly to signed impact parameters.
pub fn signed_deflection(field: &PotentialField, lambda: f64, b: f64) -> Result<f64> {
    Ok(b.signum() * central_deflection_quadrature(field, lambda, b.abs())?)
}

/// Θ′(b) by a five-point stencil on the quadrature.
pub fn deflection_derivative(field: &PotentialField, lambda: f64, b: f64) -> Result<f64> {
    let radial = Radial { bump: RadialBump::from_field(field)?, lambda };
    let h = 1e-3 * radial.bump.radius;
    let f = |x: f64| -> Result<f64> { Ok(x.signum() * radial.deflection(x)?) };
    Ok((f(b - 2.0 * h)? - 8.0 * f(b - h)? + 8.0 * f(b + h)? - f(b + 2.0 * h)?) / (12.0 * h))
}

/// Modified action of the central ray with impact parameter b:
/// S(b) = 2k∫_{r₀}^{ρ} (1 − V/λ)/√F dr − 2k√(ρ² − b²), zero for b ≥ ρ.
pub fn central_action_quadrature(field: &PotentialField, lambda: f64, b: f64) -> Result<f64> {
    let radial = Radial { bump: RadialBump::from_field(field)?, lambda };
    radial.action(b)
}

/// Sampled deflection curve (b, Θ(b), Θ′(b)).
#[derive(Debug, Clone)]
pub struct DeflectionCurve {
    pub lambda: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

impl DeflectionCurve {
    pub fn sample(field: &PotentialField, lambda: f64, bs: &[f64]) -> Result<Self> {
        let samples = bs
            .iter()
            .map(|&b| {
                Ok((
                    b,
                    signed_deflection(field, lambda, b)?,
                    deflection_derivative(field, lambda, b)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lambda, samples })
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All signed b ∈ (−ρ, ρ) with sgn(b)Θ(|b|) = target, by dense scan and bisection.
pub fn deflection_roots(field: &PotentialField, lambda: f64, target: f64, grid: usize) -> Result<Vec<f64>> {
    let rho = RadialBump::from_field(field)?.radius;
    let bs: Vec<f64> = (0..=grid).map(|i| -rho + 2.0 * rho * i as f64 / grid as f64).collect();
    let vals = bs
        .iter()
        .map(|&b| signed_deflection(field, lambda, b))
        .collect::<Result<Vec<_>>>()?;
    let mut roots = Vec::new();
    for i in 0..grid {
        let (f0, f1) = (vals[i] - target, vals[i + 1] - target);
        if f0 == 0.0 {
            roots.push(bs[i]);
        } else if f0 * f1 < 0.0 {
            let f = |b: f64| signed_deflection(field, lambda, b).map(|v| v - target).unwrap_or(f64::NAN);
            roots.push(bisect(f, bs[i], bs[i + 1]));
        }
    }
    Ok(roots)
}

/// Impact parameter in (0, ρ) where Θ′ vanishes, bracketed by [lo, hi].
pub fn rainbow_impact(field: &PotentialField, lambda: f64, lo: f64, hi: f64) -> Result<f64> {
    let d = |b: f64| deflection_derivative(field, lambda, b).unwrap_or(f64::NAN);
    if d(lo) * d(hi) >= 0.0 {
        return Err(ScatError::NoSignChange);
    }
    Ok(bisect(d, lo, hi))
}

/// Range of the signed deflection over a dense grid of b ∈ [0, ρ].
pub fn deflection_extremum(field: &PotentialField, lambda: f64) -> Result<(f64, f64)> {
    let rho = RadialBump::from_field(field)?.radius;
    let mut best: (f64, f64) = (0.0, 0.0);
    for i in 1..2000 {
        let b = rho * i as f64 / 2000.0;
        let th = central_deflection_quadrature(field, lambda, b)?;
        if th.abs() > best.1.abs() {
            best = (b, th);
        }
    }
    Ok(best)
}

/// Count zeros of the transverse Jacobi field along the planar central ray
/// with impact parameter b, from the launch plane to the outward crossing of
/// ‖x‖ = R₀ (and on to t → ∞ when `include_tail`).
pub fn radial_jacobi_conjugate_points(
    field: &PotentialField,
    cfg: &ScatteringConfig,
    b: f64,
    include_tail: bool,
) -> Result<usize> {
    let bump = RadialBump::from_field(field)?;
    if field.dim() != 2 {
        return Err(ScatError::DimensionMismatch { expected: 2, got: field.dim() });
    }
    let k = cfg.speed();
    // state: x, y, px, py, jx, jy, qx, qy
    let rhs = |s: &[f64; 8]| -> [f64; 8] {
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let (_, dv, d2v) = bump.derivatives(r);
        let (ux, uy) = if r > 0.0 { (s[0] / r, s[1] / r) } else { (1.0, 0.0) };
        let radial = if r > 0.0 { dv / r } else { d2v };
        let h = [
            d2v * ux * ux + radial * (1.0 - ux * ux),
            (d2v - radial) * ux * uy,
            d2v * uy * uy + radial * (1.0 - uy * uy),
        ];
        [
            s[2],
            s[3],
            -dv * ux,
            -dv * uy,
            s[6],
            s[7],
            -(h[0] * s[4] + h[1] * s[5]),
            -(h[1] * s[4] + h[2] * s[5]),
        ]
    };
    let mut s = [-cfg.launch_offset(), b, k, 0.0, 0.0, 1.0, 0.0, 0.0];
    let det = |s: &[f64; 8]| s[2] * s[5] - s[3] * s[4];
    let dt = 2e-4 * bump.radius / k;
    let t_max = cfg.time_budget();
    let mut t = 0.0;
    let mut count = 0;
    let mut prev = det(&s);
    loop {
        let k1 = rhs(&s);
        let k2 = rhs(&add(&s, &k1, 0.5 * dt));
        let k3 = rhs(&add(&s, &k2, 0.5 * dt));
        let k4 = rhs(&add(&s, &k3, dt));
        for i in 0..8 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += dt;
        let d = det(&s);
        if d != 0.0 && prev != 0.0 && (d > 0.0) != (prev > 0.0) {
            count += 1;
        }
        if d != 0.0 {
            prev = d;
        }
        let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
        if r >= cfg.r0 && s[0] * s[2] + s[1] * s[3] > 0.0 {
            break;
        }
        if t > t_max {
            return Err(ScatError::TimeBudgetExhausted { budget: t_max });
        }
    }
    if include_tail {
        // Free flight: det[ξ, J + τQ] = D + τ det[ξ, Q].
        let rate = s[2] * s[7] - s[3] * s[6];
        if rate != 0.0 && (prev > 0.0) != (rate > 0.0) {
            count += 1;
        }
    }
    Ok(count)
}

fn add(s: &[f64; 8], k: &[f64; 8], h: f64) -> [f64; 8] {
    std::array::from_fn(|i| s[i] + h * k[i])
}

/// Fit |f|² = c₀ + c₁cos(ΔS/h + φ) to (h, |f|²) samples and return ΔS ≥ 0.
///
/// The model is linear in (c₀, c₁cos φ, −c₁sin φ) once ΔS is fixed, so the
/// fit scans ΔS on a grid finer than the residual's oscillation, solves the
/// linear problem at each node, and polishes the best node by golden-section
/// search.
pub fn interference_period_extract(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 64 {
        return Err(ScatError::FitDiverged(format!("need at least 64 samples, got {}", samples.len())));
    }
    if samples.iter().any(|(h, y)| !(*h > 0.0) || !y.is_finite()) {
        return Err(ScatError::FitDiverged("non-positive h or non-finite data".into()));
    }
    let mut inv: Vec<(f64, f64)> = samples.iter().map(|(h, y)| (1.0 / h, *y)).collect();
    inv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let span = inv[inv.len() - 1].0 - inv[0].0;
    let max_gap = inv.windows(2).map(|w| w[1].0 - w[0].0).fold(0.0, f64::max);
    if span <= 0.0 || max_gap <= 0.0 {
        return Err(ScatError::FitDiverged("degenerate h grid".into()));
    }
    let q_min = PI / span;
    let q_max = PI / max_gap;
    let mean = inv.iter().map(|p| p.1).sum::<f64>() / inv.len() as f64;
    let total: f64 = inv.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if total <= 1e-24 * (1.0 + mean * mean) * inv.len() as f64 {
        return Err(ScatError::FitDiverged("data carry no oscillation".into()));
    }
    let residual = |q: f64| linear_fit(&inv, q).0;
    let step = 2.0 * PI / span / 40.0;
    let mut best = (f64::INFINITY, q_min);
    let mut q = q_min;
    while q <= q_max {
        let r = residual(q);
        if r < best.0 {
            best = (r, q);
        }
        q += step;
    }
    let (mut a, mut b) = ((best.1 - step).max(q_min), (best.1 + step).min(q_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if residual(c) < residual(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let q = 0.5 * (a + b);
    let (res, amp) = linear_fit(&inv, q);
    if !(res < 0.5 * total) || amp <= 1e-9 * mean.abs().max(1e-300) {
        return Err(ScatError::FitDiverged("no oscillatory component explains the data".into()));
    }
    if (q - q_min).abs() < 0.5 * step || (q - q_max).abs() < 0.5 * step {
        return Err(ScatError::FitDiverged(format!("best period at the scan boundary (ΔS = {q})")));
    }
    Ok(q)
}

/// Least squares for y ≈ c₀ + a cos(q/h) + b sin(q/h); returns (residual, √(a²+b²)).
fn linear_fit(inv: &[(f64, f64)], q: f64) -> (f64, f64) {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(u, y) in inv {
        let row = [1.0, (q * u).cos(), (q * u).sin()];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let Some(c) = solve3(ata, aty) else { return (f64::INFINITY, 0.0) };
    let res = inv
        .iter()
        .map(|&(u, y)| (y - c[0] - c[1] * (q * u).cos() - c[2] * (q * u).sin()).powi(2))
        .sum();
    (res, c[1].hypot(c[2]))
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

//! Dormand–Prince 5(4) embedded Runge–Kutta stepper.

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// 5th-order weights minus embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) struct Dopri5 {
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    err: Vec<f64>,
    fsal_valid: bool,
}

pub(crate) struct StepOutcome {
    /// Scaled RMS error estimate; the step is acceptable when ≤ 1.
    pub error: f64,
}

impl Dopri5 {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
            err: vec![0.0; dim],
            fsal_valid: false,
        }
    }

    /// Invalidate the cached derivative (after the state was changed externally).
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    /// Attempt one step of size `h` from `y`, writing the candidate into `out`.
    /// Call [`Dopri5::accept`] if the step is taken.
    pub fn attempt<F>(&mut self, rhs: &F, y: &[f64], h: f64, tol: f64, out: &mut [f64]) -> StepOutcome
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let dim = y.len();
        if !self.fsal_valid {
            rhs(y, &mut self.k[0]);
            self.fsal_valid = true;
        }
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        acc += a * self.k[j][i];
                    }
                }
                self.stage[i] = y[i] + h * acc;
            }
            rhs(&self.stage, &mut self.k[s]);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL).
        out.copy_from_slice(&self.stage);
        let mut sum = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (s, w) in E.iter().enumerate() {
                if *w != 0.0 {
                    e += w * self.k[s][i];
                }
            }
            self.err[i] = h * e;
            let scale = tol + tol * y[i].abs().max(out[i].abs());
            let r = self.err[i] / scale;
            sum += r * r;
        }
        StepOutcome { error: (sum / dim as f64).sqrt() }
    }

    pub fn accept(&mut self) {
        let (first, rest) = self.k.split_at_mut(1);
        first[0].copy_from_slice(&rest[5]);
    }
}

/// New step size from the error estimate (order-5 controller with safety).
pub(crate) fn next_step(h: f64, error: f64) -> f64 {
    let factor = if error == 0.0 { 5.0 } else { (0.9 * error.powf(-0.2)).clamp(0.2, 5.0) };
    h * factor
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Harmonic oscillator integrated over one period at fixed step: the
    /// global error must shrink by ≈ 2⁵ when the step halves.
    #[test]
    fn fifth_order_convergence() {
        let rhs = |y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let run = |steps: usize| {
            let mut st = Dopri5::new(2);
            let mut y = vec![1.0, 0.0];
            let mut out = vec![0.0; 2];
            let h = 2.0 * std::f64::consts::PI / steps as f64;
            for _ in 0..steps {
                st.attempt(&rhs, &y, h, 1.0, &mut out);
                st.accept();
                y.copy_from_slice(&out);
            }
            ((y[0] - 1.0).powi(2) + y[1].powi(2)).sqrt()
        };
        let e1 = run(40);
        let e2 = run(80);
        let ratio = e1 / e2;
        assert!(ratio > 25.0 && ratio < 40.0, "ratio {ratio}");
    }
}

//! Dormand–Prince 5(4) on flat complex state vectors.

use crate::error::{Error, Result};
use crate::operator::C64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

/// Integrator with reusable stage buffers. `step` carries the last
/// accepted step size across calls so segments stitch together cheaply.
pub(crate) struct Dopri {
    tol: Tolerances,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    next: Vec<C64>,
    pub step: f64,
    pub steps_taken: usize,
}

impl Dopri {
    pub fn new(len: usize, tol: Tolerances) -> Self {
        let z = || vec![C64::new(0.0, 0.0); len];
        Dopri { tol, k: [z(), z(), z(), z(), z(), z(), z()], tmp: z(), next: z(), step: 0.0, steps_taken: 0 }
    }

    /// Advances `y` from `t0` to exactly `t1`.
    pub fn integrate<F>(&mut self, f: &mut F, t0: f64, t1: f64, y: &mut [C64]) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(());
        }
        let mut t = t0;
        let mut h = if self.step > 0.0 { self.step } else { (span * 1e-3).min(self.tol.max_step) };
        f(t, y, &mut self.k[0]);
        loop {
            h = h.min(self.tol.max_step);
            let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * h;
            if last {
                h = t1 - t;
            }
            if h <= 1e-14 * t.abs().max(span) {
                return Err(Error::StepUnderflow { t });
            }
            let err = self.attempt(f, t, h, y);
            if !err.is_finite() {
                h *= 0.2;
                continue;
            }
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.next);
                // first-same-as-last: k[6] = f(t+h, y_next)
                let (first, rest) = self.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                self.steps_taken += 1;
                if self.steps_taken > self.tol.max_steps {
                    return Err(Error::TooManySteps { steps: self.tol.max_steps, t });
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    self.step = h * factor;
                }
                if last {
                    return Ok(());
                }
                h *= factor;
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
    }

    /// One trial step; leaves the candidate in `next` and returns the
    /// scaled error norm.
    fn attempt<F>(&mut self, f: &mut F, t: f64, h: f64, y: &[C64]) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y.len();
        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($a:expr, $s:expr)),*]) => {{
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    $( acc += self.k[$s][i] * $a; )*
                    self.tmp[i] = y[i] + acc * h;
                }
                let (tmp, k) = (&self.tmp, &mut self.k[$dst]);
                f(t + $c * h, tmp, k);
            }};
        }
        stage!(1, C2, [(A21, 0)]);
        stage!(2, C3, [(A31, 0), (A32, 1)]);
        stage!(3, C4, [(A41, 0), (A42, 1), (A43, 2)]);
        stage!(4, C5, [(A51, 0), (A52, 1), (A53, 2), (A54, 3)]);
        stage!(5, 1.0, [(A61, 0), (A62, 1), (A63, 2), (A64, 3), (A65, 4)]);
        for i in 0..n {
            let k = &self.k;
            self.next[i] = y[i] + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * h;
        }
        {
            let (next, k6) = (&self.next, &mut self.k[6]);
            f(t + h, next, k6);
        }
        let mut worst: f64 = 0.0;
        let k = &self.k;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let scale = self.tol.atol + self.tol.rtol * y[i].norm().max(self.next[i].norm());
            worst = worst.max(e.norm() / scale);
        }
        worst
    }
}

use num_complex::Complex64;

use super::{initial_step, scale, stations, Integration};
use crate::error::{Error, Result};

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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Dormand-Prince 5(4) with FSAL and a standard I-controller. The error
/// estimate uses the max norm over components.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Integrates without guard, reporting the state at every station.
    pub fn solve<F, O>(
        &self,
        rhs: F,
        z0: f64,
        y0: &[Complex64],
        z1: f64,
        outputs: &[f64],
        on_output: O,
    ) -> Result<Integration>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]),
    {
        self.solve_guarded(rhs, z0, y0, z1, outputs, |_| true, on_output)
    }

    /// Integrates `y' = rhs(z, y)` from `z0` to `z1`.
    ///
    /// `admissible` is checked on every candidate step that passed the error
    /// test. A rejected candidate halves the step; after repeated halving the
    /// run ends at the last admissible state with `stopped_early = true`.
    /// Halvings accumulate over the whole run so the approach to the boundary
    /// cannot stall in ever smaller steps.
    /// `on_output` is called at each station in `outputs` and at every accepted
    /// step end when `outputs` is empty.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_guarded<F, G, O>(
        &self,
        mut rhs: F,
        z0: f64,
        y0: &[Complex64],
        z1: f64,
        outputs: &[f64],
        mut admissible: G,
        mut on_output: O,
    ) -> Result<Integration>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
        G: FnMut(&[Complex64]) -> bool,
        O: FnMut(f64, &[Complex64]),
    {
        let n = y0.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut y = y0.to_vec();
        let mut z = z0;
        let mut result = Integration {
            z,
            y: y.clone(),
            accepted: 0,
            rejected: 0,
            stopped_early: false,
        };
        if z1 <= z0 {
            return Ok(result);
        }
        let stops = stations(z0, z1, outputs);
        let every_step = outputs.is_empty();
        let mut next_stop = 0usize;

        let mut k1 = vec![zero; n];
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let mut k5 = vec![zero; n];
        let mut k6 = vec![zero; n];
        let mut k7 = vec![zero; n];
        let mut tmp = vec![zero; n];
        let mut y_new = vec![zero; n];

        rhs(z, &y, &mut k1);
        let span = z1 - z0;
        let mut h = initial_step(&mut rhs, z, &y, &k1, span, 5, self.atol, self.rtol)
            .min(self.h_max);
        let mut guard_halvings = 0u32;
        let mut last_rejected = false;

        while z < z1 {
            if result.accepted + result.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    z,
                    max_steps: self.max_steps,
                });
            }
            let target = if every_step || next_stop >= stops.len() {
                z1
            } else {
                stops[next_stop]
            };
            let mut landed = false;
            let mut step = h;
            if z + step >= target || (target - z - step) < 1e-12 * target.abs().max(1.0) {
                step = target - z;
                landed = true;
            }
            if !landed && step.abs() < 1e-14 * z.abs().max(1.0) {
                if guard_halvings > 0 {
                    result.stopped_early = true;
                    break;
                }
                return Err(Error::StepSizeUnderflow { z, h: step });
            }

            for i in 0..n {
                tmp[i] = y[i] + k1[i] * (step * A21);
            }
            rhs(z + C2 * step, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * step;
            }
            rhs(z + C3 * step, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * step;
            }
            rhs(z + C4 * step, &tmp, &mut k4);
            for i in 0..n {
                tmp[i] =
                    y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * step;
            }
            rhs(z + C5 * step, &tmp, &mut k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65)
                        * step;
            }
            rhs(z + step, &tmp, &mut k6);
            for i in 0..n {
                y_new[i] = y[i]
                    + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76)
                        * step;
            }
            rhs(z + step, &y_new, &mut k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6
                    + k7[i] * E7)
                    * step;
                let sk = scale(self.atol, self.rtol, y[i], y_new[i]);
                err = f64::max(err, e.norm() / sk);
            }
            if !err.is_finite() {
                result.rejected += 1;
                h = step * 0.2;
                last_rejected = true;
                continue;
            }

            if err <= 1.0 {
                if !admissible(&y_new) {
                    guard_halvings += 1;
                    if guard_halvings > 12 {
                        result.stopped_early = true;
                        break;
                    }
                    h = step * 0.5;
                    continue;
                }
                let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                let fac = if last_rejected { fac.min(1.0) } else { fac };
                last_rejected = false;
                z = if landed { target } else { z + step };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k7);
                result.accepted += 1;
                if every_step {
                    on_output(z, &y);
                } else if landed && next_stop < stops.len() && target == stops[next_stop] {
                    on_output(z, &y);
                    next_stop += 1;
                }
                // keep the controller's proposal when a station clipped the step
                h = if landed { h.max(step * fac) } else { step * fac }.min(self.h_max);
            } else {
                result.rejected += 1;
                last_rejected = true;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        result.z = z;
        result.y = y;
        Ok(result)
    }
}

//! Adaptive explicit Runge-Kutta integrators for complex-valued systems.
//!
//! Two unrelated embedded pairs are provided: Dormand-Prince 5(4) drives the
//! Wei-Norman coefficient equations, the 2x2 Floquet problem and the helpers,
//! while the 8(5,3) pair is reserved for the brute-force Liouville oracle and
//! the waveguide-array simulation. Keeping the two code paths separate means an
//! error in one stepper cannot silently cancel in an oracle comparison.

mod dop853;
mod dopri5;

pub use dop853::Dop853;
pub use dopri5::Dopri5;

use num_complex::Complex64;

/// Result of an integration run.
#[derive(Debug, Clone)]
pub struct Integration {
    /// Final abscissa actually reached.
    pub z: f64,
    /// State at `z`.
    pub y: Vec<Complex64>,
    pub accepted: usize,
    pub rejected: usize,
    /// True when the admissibility guard ended the run before the target.
    pub stopped_early: bool,
}

/// Weighted RMS norm used by both step controllers.
pub(crate) fn scale(atol: f64, rtol: f64, a: Complex64, b: Complex64) -> f64 {
    atol + rtol * a.norm().max(b.norm())
}

/// Sorted output stations strictly inside `(z0, z1]`.
pub(crate) fn stations(z0: f64, z1: f64, outputs: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = outputs
        .iter()
        .copied()
        .filter(|&z| z > z0 && z <= z1)
        .collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.dedup();
    s
}

/// Hairer's starting step heuristic (order `order`).
pub(crate) fn initial_step<F>(
    rhs: &mut F,
    z0: f64,
    y0: &[Complex64],
    f0: &[Complex64],
    span: f64,
    order: i32,
    atol: f64,
    rtol: f64,
) -> f64
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len().max(1) as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (y, f) in y0.iter().zip(f0) {
        let sk = atol + rtol * y.norm();
        d0 += (y.norm() / sk).powi(2);
        d1 += (f.norm() / sk).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span);
    let y1: Vec<Complex64> = y0.iter().zip(f0).map(|(y, f)| y + f * h).collect();
    let mut f1 = vec![Complex64::new(0.0, 0.0); y0.len()];
    rhs(z0 + h, &y1, &mut f1);
    let mut d2 = 0.0;
    for ((y, a), b) in y0.iter().zip(f0).zip(&f1) {
        let sk = atol + rtol * y.norm();
        d2 += ((b - a).norm() / sk).powi(2);
    }
    let d2 = (d2 / n).sqrt() / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / order as f64)
    };
    (100.0 * h).min(h1).min(span)
}

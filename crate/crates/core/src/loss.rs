//! Periodic loss rate of the lossy waveguide.
//!
//! The modulated family is
//!
//! ```text
//! gamma(z) = 2 B^2 E(z) / sqrt(1 - B^2 E(z)),   E(z) = exp[-beta (1 - cos(omega z))]
//! ```
//!
//! which peaks at `z = 0 mod T` with value `gamma_max = 2 B^2 / sqrt(1 - B^2)`
//! and bottoms out at `z = T/2`. Rates are in units of the coupling `kappa`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Default `gamma_min / gamma_max` target when inverting for `beta`.
pub const DEFAULT_MIN_RATIO: f64 = 1e-3;

const QUAD_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossProfile {
    pub b: f64,
    pub beta: f64,
    pub omega: f64,
    /// Overall rate unit multiplying the profile (1 for rates in units of kappa).
    pub scale: f64,
}

impl LossProfile {
    pub fn new(b: f64, beta: f64, omega: f64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidParameter(format!("B = {b} must lie in (0, 1)")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be >= 0")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega = {omega} must be > 0")));
        }
        Ok(Self {
            b,
            beta,
            omega,
            scale: 1.0,
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    /// `E(z) = exp[-beta (1 - cos(omega z))]`.
    pub fn envelope(&self, z: f64) -> f64 {
        (-self.beta * (1.0 - (self.omega * z).cos())).exp()
    }

    pub fn gamma_of_z(&self, z: f64) -> f64 {
        let x = self.b * self.b * self.envelope(z);
        self.scale * 2.0 * x / (1.0 - x).sqrt()
    }

    /// Peak value at `cos(omega z) = 1`.
    pub fn gamma_max(&self) -> f64 {
        let x = self.b * self.b;
        self.scale * 2.0 * x / (1.0 - x).sqrt()
    }

    /// Minimum value at `cos(omega z) = -1`.
    pub fn gamma_min(&self) -> f64 {
        self.gamma_of_z(0.5 * self.period())
    }

    /// Period average of the loss rate.
    pub fn mean_loss(&self) -> f64 {
        let t = self.period();
        quadrature::integrate(|z| self.gamma_of_z(z), 0.0, t, QUAD_RTOL, 0.0) / t
    }

    /// `int_{z0}^{z1} gamma(z) dz`, using whole periods where possible.
    pub fn integral(&self, z0: f64, z1: f64) -> f64 {
        if z1 == z0 {
            return 0.0;
        }
        if z1 < z0 {
            return -self.integral(z1, z0);
        }
        let t = self.period();
        let periods = ((z1 - z0) / t).floor();
        let mut total = 0.0;
        if periods >= 1.0 {
            total += periods * self.mean_loss() * t;
        }
        let start = z0 + periods * t;
        total + quadrature::integrate(|z| self.gamma_of_z(z), start, z1, QUAD_RTOL, 1e-15)
    }
}

pub fn gamma_of_z(profile: &LossProfile, z: f64) -> f64 {
    profile.gamma_of_z(z)
}

pub fn mean_loss(profile: &LossProfile) -> f64 {
    profile.mean_loss()
}

/// `gamma_min / gamma_max` as a function of `beta` at fixed `B^2`.
fn min_to_max_ratio(b2: f64, beta: f64) -> f64 {
    let e = (-2.0 * beta).exp();
    e * (1.0 - b2).sqrt() / (1.0 - b2 * e).sqrt()
}

/// Profile with peak `gamma_max` and `gamma_min / gamma_max <= min_ratio`,
/// taking the smallest such `beta`.
pub fn profile_for_target(gamma_max: f64, omega: f64, min_ratio: f64) -> Result<LossProfile> {
    if !(gamma_max > 0.0 && gamma_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma_max = {gamma_max} must be > 0"
        )));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega = {omega} must be > 0")));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "min_ratio = {min_ratio} must lie in (0, 1)"
        )));
    }
    // 2x / sqrt(1 - x) is increasing on (0, 1) and unbounded, x = B^2
    let peak = |x: f64| 2.0 * x / (1.0 - x).sqrt() - gamma_max;
    let b2 = quadrature::bisect(peak, 0.0, 1.0 - 1e-16, 1e-15)?;
    let b = b2.sqrt();
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::NoConvergence(format!("B = {b} for gamma_max = {gamma_max}")));
    }
    let beta = smallest_beta(b2, min_ratio)?;
    LossProfile::new(b, beta, omega)
}

fn smallest_beta(b2: f64, min_ratio: f64) -> Result<f64> {
    let f = |beta: f64| min_to_max_ratio(b2, beta) - min_ratio;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoConvergence(format!(
                "no beta reaches min_ratio = {min_ratio}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Loss model used by the coupler: either the modulated family or a constant
/// rate with an arbitrary reference period (for static-limit Floquet analysis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Loss {
    Modulated(LossProfile),
    Constant { rate: f64, period: f64 },
}

impl Loss {
    pub fn constant(rate: f64, period: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("loss rate {rate} must be >= 0")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParameter(format!("period {period} must be > 0")));
        }
        Ok(Loss::Constant { rate, period })
    }

    pub fn lossless(period: f64) -> Self {
        Loss::Constant { rate: 0.0, period }
    }

    pub fn rate(&self, z: f64) -> f64 {
        match self {
            Loss::Modulated(p) => p.gamma_of_z(z),
            Loss::Constant { rate, .. } => *rate,
        }
    }

    pub fn period(&self) -> f64 {
        match self {
            Loss::Modulated(p) => p.period(),
            Loss::Constant { period, .. } => *period,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Loss::Modulated(p) => p.mean_loss(),
            Loss::Constant { rate, .. } => *rate,
        }
    }

    pub fn peak(&self) -> f64 {
        match self {
            Loss::Modulated(p) => p.gamma_max(),
            Loss::Constant { rate, .. } => *rate,
        }
    }

    pub fn integral(&self, z0: f64, z1: f64) -> f64 {
        match self {
            Loss::Modulated(p) => p.integral(z0, z1),
            Loss::Constant { rate, .. } => rate * (z1 - z0),
        }
    }

    pub fn is_lossless(&self) -> bool {
        matches!(self, Loss::Constant { rate, .. } if *rate == 0.0)
    }

    /// Same loss with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Loss::Modulated(p) => Loss::Modulated(p.with_scale(p.scale * factor)),
            Loss::Constant { rate, period } => Loss::Constant {
                rate: rate * factor,
                period,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn extremal_values() {
        let p = LossProfile::new(0.4, 2.0, 1.5).unwrap();
        let b2: f64 = 0.16;
        assert!((p.gamma_of_z(0.0) - 2.0 * b2 / (1.0 - b2).sqrt()).abs() < 1e-15);
        let e = (-4.0f64).exp();
        let want = 2.0 * b2 * e / (1.0 - b2 * e).sqrt();
        assert!((p.gamma_of_z(PI / 1.5) - want).abs() < 1e-15);
        assert!((p.gamma_min() - want).abs() < 1e-15);
        let tiny = LossProfile::new(1e-9, 2.0, 1.0).unwrap();
        assert!(tiny.gamma_max() < 1e-17);
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(LossProfile::new(1.0, 1.0, 1.0).is_err());
        assert!(LossProfile::new(0.5, -1.0, 1.0).is_err());
        assert!(LossProfile::new(0.5, 1.0, 0.0).is_err());
        assert!(profile_for_target(-1.0, 1.0, 1e-3).is_err());
        assert!(profile_for_target(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn target_sqrt2_gives_b_one_over_sqrt2() {
        let p = profile_for_target(SQRT_2, 1.0, 1e-3).unwrap();
        assert!((p.b - 1.0 / SQRT_2).abs() < 1e-12);
        let p = profile_for_target(1e-8, 1.0, 1e-3).unwrap();
        assert!(p.b < 1e-3);
    }

    #[test]
    fn target_matches_closed_form_root() {
        // 4x^2 + g^2 x - g^2 = 0 for x = B^2
        for &g in &[0.01f64, 0.25, 1.0, 2.5, 7.0] {
            let x = (-g * g + (g.powi(4) + 16.0 * g * g).sqrt()) / 8.0;
            let p = profile_for_target(g, 2.0, 1e-3).unwrap();
            assert!((p.b * p.b - x).abs() < 1e-13, "g = {g}");
        }
    }

    #[test]
    fn beta_is_smallest_meeting_ratio() {
        let p = profile_for_target(0.25, 2.0, 1e-3).unwrap();
        let ratio = p.gamma_min() / p.gamma_max();
        assert!(ratio <= 1e-3);
        assert!(ratio > 1e-3 * (1.0 - 1e-9));
        let q = LossProfile::new(p.b, p.beta * (1.0 - 1e-6), p.omega).unwrap();
        assert!(q.gamma_min() / q.gamma_max() > 1e-3);
    }

    #[test]
    fn mean_loss_limits() {
        let flat = LossProfile::new(0.5, 0.0, 1.3).unwrap();
        assert!((flat.mean_loss() - flat.gamma_max()).abs() < 1e-14);
        let p = profile_for_target(0.8, 2.0, 1e-3).unwrap();
        let m = p.mean_loss();
        assert!(m < p.gamma_max() && m > p.gamma_min());
        let tiny = profile_for_target(1e-12, 2.0, 1e-3).unwrap();
        assert!(tiny.mean_loss() < 1e-12);
    }

    #[test]
    fn mean_loss_against_fine_trapezoid() {
        // the trapezoid rule is spectrally accurate for smooth periodic integrands
        let p = profile_for_target(1.7, 1.1, 1e-3).unwrap();
        let n = 4000;
        let t = p.period();
        let trap: f64 = (0..n).map(|k| p.gamma_of_z(t * k as f64 / n as f64)).sum::<f64>() / n as f64;
        assert!(((p.mean_loss() - trap) / trap).abs() < 1e-12);
    }

    #[test]
    fn integral_spans_periods() {
        let p = profile_for_target(0.6, 1.7, 1e-2).unwrap();
        let direct = crate::quadrature::integrate(|z| p.gamma_of_z(z), 0.3, 17.9, 1e-13, 0.0);
        assert!((p.integral(0.3, 17.9) - direct).abs() < 1e-11 * direct);
    }

    proptest! {
        #[test]
        fn round_trip_peak(g in 1e-4f64..3.0, omega in 0.2f64..3.0) {
            let p = profile_for_target(g, omega, DEFAULT_MIN_RATIO).unwrap();
            prop_assert!((p.gamma_of_z(0.0) - g).abs() <= 1e-10 * g.max(1.0));
        }

        #[test]
        fn periodic_and_monotone(g in 0.01f64..2.5, omega in 0.2f64..3.0, z in 0.0f64..50.0) {
            let p = profile_for_target(g, omega, DEFAULT_MIN_RATIO).unwrap();
            let t = p.period();
            prop_assert!((p.gamma_of_z(z) - p.gamma_of_z(z + t)).abs() <= 1e-14 * p.gamma_max().max(1.0) * (1.0 + z));
            prop_assert!(p.gamma_of_z(z) > 0.0);
            let phase = z % t;
            let dz = 1e-3 * t;
            if phase + dz < 0.5 * t {
                prop_assert!(p.gamma_of_z(phase + dz) <= p.gamma_of_z(phase));
            } else if phase > 0.5 * t && phase + dz < t {
                prop_assert!(p.gamma_of_z(phase + dz) >= p.gamma_of_z(phase));
            }
        }
    }
}

//! Waveguide-array reservoir: a system guide coupled through a modulated
//! evanescent coupling to a homogeneous chain of bath guides. In the Markov
//! limit the chain acts as the modulated loss of the coupler.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, TwoModeBasis};
use crate::floquet::propagate_state;
use crate::loss::{profile_for_target, Loss, LossProfile, DEFAULT_MIN_RATIO};
use crate::ode::Dop853;
use crate::superop::CouplerParams;
use crate::wei_norman::WeiNormanOptions;

type C = Complex64;

/// Parameters of the coupled-mode array. Lengths are in units of `1 / kappa_b`
/// when `kappa_b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_bath: usize,
    pub kappa_b: f64,
    /// Coupling between the two system guides; 0 keeps only the lossy one.
    pub kappa: f64,
    pub b: f64,
    pub beta: f64,
    pub omega: f64,
    pub z_max: f64,
    pub dz_out: f64,
    pub rtol: f64,
}

impl ReservoirConfig {
    /// Modulation chosen so that the induced loss peaks at `gamma_max * kappa_b`.
    pub fn for_target(
        n_bath: usize,
        kappa_b: f64,
        kappa: f64,
        gamma_max: f64,
        omega: f64,
        min_ratio: f64,
    ) -> Result<Self> {
        let p = profile_for_target(gamma_max, omega / kappa_b, min_ratio)?;
        let cfg = Self {
            n_bath,
            kappa_b,
            kappa,
            b: p.b,
            beta: p.beta,
            omega,
            z_max: n_bath as f64 / (2.0 * kappa_b),
            dz_out: 0.1 / kappa_b,
            rtol: 1e-10,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 200 bath guides, peak loss `0.125 kappa_b`, `omega = kappa_b`, with the
    /// given system coupling.
    pub fn reference(kappa: f64) -> Result<Self> {
        Self::for_target(200, 1.0, kappa, 0.125, 1.0, DEFAULT_MIN_RATIO)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_bath < 1 {
            return bad("n_bath must be at least 1".into());
        }
        if !(self.kappa_b > 0.0 && self.kappa_b.is_finite()) {
            return bad(format!("kappa_b = {} must be positive", self.kappa_b));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa = {} must be >= 0", self.kappa));
        }
        if !(0.0..1.0).contains(&self.b) {
            return bad(format!("B = {} must lie in [0, 1) to keep kappa_l < kappa_b", self.b));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be >= 0", self.beta));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("omega = {} must be positive", self.omega));
        }
        if !(self.z_max >= 0.0 && self.z_max.is_finite()) {
            return bad(format!("z_max = {} must be >= 0", self.z_max));
        }
        if !(self.dz_out > 0.0) {
            return bad(format!("dz_out = {} must be positive", self.dz_out));
        }
        if !(self.rtol > 0.0 && self.rtol < 1.0) {
            return bad(format!("rtol = {} must lie in (0, 1)", self.rtol));
        }
        Ok(())
    }

    /// Number of system guides in the array.
    pub fn system_modes(&self) -> usize {
        if self.kappa > 0.0 {
            2
        } else {
            1
        }
    }

    pub fn modes(&self) -> usize {
        self.system_modes() + self.n_bath
    }

    /// Index of the system guide attached to the bath.
    pub fn lossy_mode(&self) -> usize {
        self.system_modes() - 1
    }

    /// The population loss rate the array should induce, in absolute units.
    pub fn loss(&self) -> Result<Loss> {
        if self.b == 0.0 {
            return Ok(Loss::lossless(2.0 * std::f64::consts::PI / self.omega));
        }
        let p = LossProfile::new(self.b, self.beta, self.omega)?;
        Ok(Loss::Modulated(p.with_scale(self.kappa_b)))
    }

    /// Peak loss and modulation frequency in units of the system coupling.
    pub fn coupler_units(&self) -> Option<(f64, f64)> {
        if self.kappa == 0.0 {
            return None;
        }
        let peak = self.loss().ok()?.peak();
        Some((peak / self.kappa, self.omega / self.kappa))
    }

    pub fn samples(&self) -> Vec<f64> {
        let n = (self.z_max / self.dz_out + 1e-9).floor() as usize;
        let mut z: Vec<f64> = (0..=n).map(|k| k as f64 * self.dz_out).collect();
        if z.last().is_some_and(|&l| self.z_max - l > 1e-12 * self.z_max.max(1.0)) {
            z.push(self.z_max);
        }
        z
    }
}

/// `kappa_b B exp(-(beta/2)(1 - cos omega z))`.
pub fn coupling_profile(cfg: &ReservoirConfig, z: f64) -> f64 {
    cfg.kappa_b * cfg.b * (-0.5 * cfg.beta * (1.0 - (cfg.omega * z).cos())).exp()
}

/// Markovian population decay rate `2 k^2 / sqrt(kappa_b^2 - k^2)` of a guide
/// coupled with strength `k` to the end of a semi-infinite chain.
pub fn decay_rate(kappa_l: f64, kappa_b: f64) -> Result<f64> {
    if !(kappa_l >= 0.0 && kappa_l < kappa_b) {
        return Err(Error::OutOfRange(format!(
            "decay rate needs 0 <= kappa_l < kappa_b, got {kappa_l} and {kappa_b}"
        )));
    }
    Ok(2.0 * kappa_l * kappa_l / (kappa_b * kappa_b - kappa_l * kappa_l).sqrt())
}

/// `z_rec = N / (2 kappa_b)`.
pub fn recurrence_estimate(cfg: &ReservoirConfig) -> f64 {
    cfg.n_bath as f64 / (2.0 * cfg.kappa_b)
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub z: Vec<f64>,
    /// `amplitudes[k][j]` is mode `j` at `z[k]`; system guides come first.
    pub amplitudes: Vec<Vec<C>>,
    pub system_population: Vec<f64>,
    pub norm: Vec<f64>,
}

impl Trajectory {
    pub fn max_norm_error(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Initial excitation of the array.
#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    Mode(usize),
    Amplitudes(Vec<C>),
}

/// Integrates `i dc/dz = M(z) c` for the chain
/// `[lossless guide] - kappa - lossy guide - kappa_l(z) - bath_1 - kappa_b - ... - bath_N`.
pub fn simulate_array(cfg: &ReservoirConfig, initial: &Excitation) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.modes();
    let c0 = match initial {
        Excitation::Mode(j) if *j < n => {
            let mut v = vec![C::new(0.0, 0.0); n];
            v[*j] = C::new(1.0, 0.0);
            v
        }
        Excitation::Mode(j) => {
            return Err(Error::OutOfRange(format!("mode {j} not in array of {n}")));
        }
        Excitation::Amplitudes(a) => {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.len(),
                });
            }
            let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "initial amplitudes have norm {norm}, expected 1"
                )));
            }
            a.clone()
        }
    };
    let lossy = cfg.lossy_mode();
    let minus_i = C::new(0.0, -1.0);
    let z = cfg.samples();
    let mut amplitudes = vec![c0.clone()];
    let stepper = Dop853 {
        h_max: 0.25 / cfg.kappa_b.max(cfg.kappa).max(cfg.omega),
        ..Dop853::new(cfg.rtol, cfg.rtol * 1e-2)
    };
    stepper.solve(
        |zz, c, dc| {
            // bond j couples sites j and j+1
            let bond = |j: usize| -> f64 {
                if j + 1 < lossy + 1 {
                    cfg.kappa
                } else if j == lossy {
                    coupling_profile(cfg, zz)
                } else {
                    cfg.kappa_b
                }
            };
            for v in dc.iter_mut() {
                *v = C::new(0.0, 0.0);
            }
            for j in 0..n - 1 {
                let k = bond(j);
                dc[j] += c[j + 1] * k;
                dc[j + 1] += c[j] * k;
            }
            for v in dc.iter_mut() {
                *v *= minus_i;
            }
        },
        0.0,
        &c0,
        cfg.z_max,
        &z[1..],
        |_, c| amplitudes.push(c.to_vec()),
    )?;
    amplitudes.truncate(z.len());
    let ns = cfg.system_modes();
    let system_population = amplitudes
        .iter()
        .map(|c| c[..ns].iter().map(|x| x.norm_sqr()).sum())
        .collect();
    let norm = amplitudes
        .iter()
        .map(|c| c.iter().map(|x| x.norm_sqr()).sum())
        .collect();
    Ok(Trajectory {
        z,
        amplitudes,
        system_population,
        norm,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticDecay {
    pub z: Vec<f64>,
    pub population: Vec<f64>,
    pub normalization: f64,
    pub fit_window: (f64, f64),
    pub fit_method: String,
}

/// Window `[0.2 z_max, min(z_rec, z_max)]` used for the normalization fit.
pub fn fit_window(cfg: &ReservoirConfig) -> (f64, f64) {
    (0.2 * cfg.z_max, recurrence_estimate(cfg).min(cfg.z_max))
}

/// `C exp(-int_0^z gamma)`, with `C` the least-squares fit of
/// `ln(simulated) + int gamma` over the fit window.
pub fn analytic_decay(
    cfg: &ReservoirConfig,
    z: &[f64],
    simulated: &[f64],
) -> Result<AnalyticDecay> {
    if cfg.kappa != 0.0 {
        return Err(Error::InvalidParameter(
            "the analytic decay describes a single system guide (kappa = 0)".into(),
        ));
    }
    if z.len() != simulated.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: simulated.len(),
        });
    }
    let loss = cfg.loss()?;
    let bare: Vec<f64> = z.iter().map(|&x| (-loss.integral(0.0, x)).exp()).collect();
    let (lo, hi) = fit_window(cfg);
    let logs: Vec<f64> = z
        .iter()
        .zip(simulated.iter().zip(&bare))
        .filter(|(x, (s, _))| **x >= lo && **x <= hi && **s > 0.0)
        .map(|(_, (s, b))| s.ln() - b.ln())
        .collect();
    if logs.is_empty() {
        return Err(Error::EmptyFitWindow { start: lo, end: hi });
    }
    let normalization = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    Ok(AnalyticDecay {
        z: z.to_vec(),
        population: bare.iter().map(|b| normalization * b).collect(),
        normalization,
        fit_window: (lo, hi),
        fit_method: "least-squares fit of ln(population) with fixed slope over the window".into(),
    })
}

/// `|sim - reference| / reference`.
pub fn relative_deviation(simulated: &[f64], reference: &[f64]) -> Vec<f64> {
    simulated
        .iter()
        .zip(reference)
        .map(|(s, r)| (s - r).abs() / r)
        .collect()
}

/// Largest entry of `deviation` at `z <= z_cut`.
pub fn max_before(z: &[f64], deviation: &[f64], z_cut: f64) -> f64 {
    z.iter()
        .zip(deviation)
        .filter(|(x, _)| **x <= z_cut)
        .map(|(_, d)| *d)
        .fold(0.0, f64::max)
}

/// Array against Markovian loss for a single system guide.
#[derive(Debug, Clone, Serialize)]
pub struct DecayComparison {
    pub trajectory: Trajectory,
    pub analytic: AnalyticDecay,
    pub deviation: Vec<f64>,
    pub recurrence: f64,
    pub max_deviation: f64,
}

pub fn decay_comparison(cfg: &ReservoirConfig) -> Result<DecayComparison> {
    let trajectory = simulate_array(cfg, &Excitation::Mode(cfg.lossy_mode()))?;
    let analytic = analytic_decay(cfg, &trajectory.z, &trajectory.system_population)?;
    let deviation = relative_deviation(&trajectory.system_population, &analytic.population);
    let recurrence = recurrence_estimate(cfg);
    let max_deviation = max_before(&trajectory.z, &deviation, recurrence);
    Ok(DecayComparison {
        trajectory,
        analytic,
        deviation,
        recurrence,
        max_deviation,
    })
}

/// The two-guide coupler whose loss the array emulates. The array induces a
/// population decay rate; the master-equation loss rate is the amplitude rate,
/// i.e. half of it.
pub fn equivalent_coupler(cfg: &ReservoirConfig) -> Result<CouplerParams> {
    CouplerParams::new(cfg.kappa, cfg.loss()?.scaled(0.5))
}

/// Array with both system guides against the single-photon master equation.
#[derive(Debug, Clone, Serialize)]
pub struct SystemComparison {
    pub trajectory: Trajectory,
    pub lindblad: Vec<f64>,
    pub deviation: Vec<f64>,
    pub recurrence: f64,
    pub max_deviation: f64,
}

/// System guide initially holding the photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guide {
    Lossy,
    Lossless,
}

/// Compares `|c_1|^2 + |c_2|^2` with the one-photon population of the master
/// equation, both started with the photon in `input`.
pub fn full_system_comparison(
    cfg: &ReservoirConfig,
    input: Guide,
    opts: &WeiNormanOptions,
) -> Result<SystemComparison> {
    if cfg.kappa <= 0.0 {
        return Err(Error::InvalidParameter(
            "system comparison needs kappa > 0".into(),
        ));
    }
    let (mode, m, h) = match input {
        Guide::Lossy => (cfg.lossy_mode(), 1, 0),
        Guide::Lossless => (0, 0, 1),
    };
    let trajectory = simulate_array(cfg, &Excitation::Mode(mode))?;
    let params = equivalent_coupler(cfg)?;
    let basis = TwoModeBasis::new(1);
    let rho0 = DensityMatrix::fock(&basis, m, h)?;
    let lindblad: Vec<f64> = propagate_state(&params, &rho0, &trajectory.z, opts)?
        .iter()
        .map(|r| r.sector_population(1))
        .collect();
    let deviation = relative_deviation(&trajectory.system_population, &lindblad);
    let recurrence = recurrence_estimate(cfg);
    let max_deviation = max_before(&trajectory.z, &deviation, recurrence);
    Ok(SystemComparison {
        trajectory,
        lindblad,
        deviation,
        recurrence,
        max_deviation,
    })
}

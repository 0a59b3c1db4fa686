//! One-period monodromy, Floquet/Lyapunov exponents, PT phase classification,
//! phase-diagram sweeps and long-range state propagation.

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{devectorize, vectorize, DensityMatrix, LiouvilleVector, TwoModeBasis};
use crate::linalg::{eigenvalues, eigenvalues_2x2, matrix_power, multiset_distance, CMatrix, ZERO};
use crate::loss::{Loss, DEFAULT_MIN_RATIO};
use crate::oracle::check_ascending;
use crate::ode::Dopri5;
use crate::superop::CouplerParams;
use crate::wei_norman::{evolve_vector, propagator, FactorGenerators, WeiNormanOptions};

type C = Complex64;

/// Default threshold on the Lyapunov splitting, in units of the coupling.
pub const DEFAULT_EPS_SPLIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PtPhase {
    Symmetric,
    Broken,
}

impl std::fmt::Display for PtPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PtPhase::Symmetric => "symmetric",
            PtPhase::Broken => "broken",
        })
    }
}

/// Tolerances of the 2x2 amplitude integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FloquetOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetResult {
    #[serde(skip)]
    pub monodromy: CMatrix,
    pub period: f64,
    /// `log(lambda) / T` on the principal branch, sorted by descending real part.
    pub exponents: Vec<C>,
    pub lyapunov: Vec<f64>,
    /// `-mean_loss / 2`, the common Lyapunov exponent of the symmetric phase.
    pub mean_loss_ref: f64,
}

impl FloquetResult {
    /// `|Re mu_+ - Re mu_-|` of the two leading exponents.
    pub fn splitting(&self) -> f64 {
        match self.lyapunov.as_slice() {
            [a, b, ..] => (a - b).abs(),
            _ => 0.0,
        }
    }

    /// Monodromy eigenvalues `exp(mu T)` in exponent order.
    pub fn multipliers(&self) -> Vec<C> {
        self.exponents.iter().map(|m| (m * self.period).exp()).collect()
    }
}

fn sorted_exponents(multipliers: &[C], period: f64) -> Vec<C> {
    let mut mu: Vec<C> = multipliers.iter().map(|l| l.ln() / period).collect();
    mu.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    mu
}

fn result_from(monodromy: CMatrix, multipliers: &[C], params: &CouplerParams) -> FloquetResult {
    let period = params.period();
    let exponents = sorted_exponents(multipliers, period);
    FloquetResult {
        monodromy,
        period,
        lyapunov: exponents.iter().map(|m| m.re).collect(),
        exponents,
        mean_loss_ref: -0.5 * params.loss.mean(),
    }
}

/// One-period propagator of the single-excitation amplitudes
/// `c1' = -i kappa c2 - gamma c1`, `c2' = -i kappa c1`.
pub fn amplitude_monodromy(params: &CouplerParams, opts: &FloquetOptions) -> Result<Matrix2<C>> {
    let k = C::new(0.0, -params.kappa);
    let one = C::new(1.0, 0.0);
    let run = Dopri5::new(opts.rtol, opts.atol).solve(
        |z, y, dy| {
            let g = params.gamma(z);
            // columns stored as (y0, y1) and (y2, y3)
            for col in 0..2 {
                let (c1, c2) = (y[2 * col], y[2 * col + 1]);
                dy[2 * col] = k * c2 - c1 * g;
                dy[2 * col + 1] = k * c1;
            }
        },
        0.0,
        &[one, ZERO, ZERO, one],
        params.period(),
        &[],
        |_, _| {},
    )?;
    let y = run.y;
    Ok(Matrix2::new(y[0], y[2], y[1], y[3]))
}

/// Floquet analysis of the 2x2 effective problem.
pub fn monodromy_2x2(params: &CouplerParams, opts: &FloquetOptions) -> Result<FloquetResult> {
    let m = amplitude_monodromy(params, opts)?;
    let lambda = eigenvalues_2x2(&m);
    if lambda.iter().any(|l| l.norm() == 0.0 || !l.is_finite()) {
        return Err(Error::NonFinite(format!("monodromy eigenvalues {lambda:?}")));
    }
    let dense = CMatrix::from_fn(2, 2, |r, c| m[(r, c)]);
    Ok(result_from(dense, &lambda, params))
}

/// Eigenvalues of each diagonal photon-sector block `(n_left, n_right)`.
#[derive(Debug, Clone, Serialize)]
pub struct SectorSpectrum {
    pub left: usize,
    pub right: usize,
    pub eigenvalues: Vec<C>,
}

fn sector_indices(basis: &TwoModeBasis) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for k in 0..basis.liouville_dim() {
        map.entry(basis.dyad_sector(k)).or_default().push(k);
    }
    map
}

/// Spectrum of a sector-block-triangular superoperator, block by block.
pub fn sector_spectra(u: &CMatrix, basis: &TwoModeBasis) -> Vec<SectorSpectrum> {
    sector_indices(basis)
        .into_iter()
        .map(|((left, right), idx)| {
            let block = CMatrix::from_fn(idx.len(), idx.len(), |r, c| u[(idx[r], idx[c])]);
            SectorSpectrum {
                left,
                right,
                eigenvalues: eigenvalues(&block),
            }
        })
        .collect()
}

/// Largest entry above the sector-triangular structure (zero for any
/// propagator of this model).
pub fn sector_leakage(u: &CMatrix, basis: &TwoModeBasis) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..u.ncols() {
        let (a, b) = basis.dyad_sector(c);
        for r in 0..u.nrows() {
            let (a2, b2) = basis.dyad_sector(r);
            if a2 > a || b2 > b {
                worst = worst.max(u[(r, c)].norm());
            }
        }
    }
    worst
}

/// Floquet analysis of the full Liouville-space monodromy from the product
/// expansion.
pub fn monodromy_full(
    params: &CouplerParams,
    basis: &TwoModeBasis,
    opts: &WeiNormanOptions,
) -> Result<FloquetResult> {
    let u = propagator(params, params.period(), basis, opts)?.total();
    let spectrum: Vec<C> = sector_spectra(&u, basis)
        .into_iter()
        .flat_map(|s| s.eigenvalues)
        .collect();
    if spectrum.iter().any(|l| l.norm() == 0.0 || !l.is_finite()) {
        return Err(Error::NonFinite("full monodromy spectrum".into()));
    }
    Ok(result_from(u, &spectrum, params))
}

/// Products `prod(lambda_a) * conj(prod(lambda_b))` over `n_left` and `n_right`
/// single-photon multipliers, i.e. the expected spectrum of sector block
/// `(n_left, n_right)`.
pub fn predicted_sector_eigenvalues(lambda: [C; 2], n_left: usize, n_right: usize) -> Vec<C> {
    let powers = |n: usize| -> Vec<C> {
        (0..=n)
            .map(|a| lambda[0].powu(a as u32) * lambda[1].powu((n - a) as u32))
            .collect()
    };
    let l = powers(n_left);
    let r = powers(n_right);
    l.iter()
        .flat_map(|x| r.iter().map(move |y| x * y.conj()))
        .collect()
}

/// Worst mismatch between the sector spectra of `u` and the products of the
/// single-photon multipliers, over sectors with both photon numbers `<= n`.
pub fn sector_product_residual(
    u: &CMatrix,
    basis: &TwoModeBasis,
    lambda: [C; 2],
    n: usize,
) -> f64 {
    sector_spectra(u, basis)
        .iter()
        .filter(|s| s.left <= n && s.right <= n)
        .map(|s| {
            let want = predicted_sector_eigenvalues(lambda, s.left, s.right);
            multiset_distance(&s.eigenvalues, &want)
        })
        .fold(0.0, f64::max)
}

/// Broken iff the two Lyapunov exponents differ by more than `eps_split`.
pub fn classify_pt(result: &FloquetResult, eps_split: f64) -> PtPhase {
    let split = result.splitting();
    if split > eps_split {
        PtPhase::Broken
    } else {
        debug_assert!(
            result
                .lyapunov
                .iter()
                .all(|l| (l - result.mean_loss_ref).abs() <= 10.0 * eps_split.max(1e-12)),
            "symmetric exponents {:?} away from {}",
            result.lyapunov,
            result.mean_loss_ref
        );
        PtPhase::Symmetric
    }
}

/// Evenly spaced sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && n >= 2 && max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "axis [{min}, {max}] with {n} points needs 0 < min < max and n >= 2"
            )));
        }
        Ok(Self { min, max, n })
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n)
            .map(|k| if k + 1 == self.n { self.max } else { self.min + step * k as f64 })
            .collect()
    }
}

/// Sweep configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramSpec {
    pub omega: Axis,
    pub gamma_max: Axis,
    pub kappa: f64,
    pub min_ratio: f64,
    pub eps_split: f64,
    pub floquet: FloquetOptions,
}

impl Default for PhaseDiagramSpec {
    fn default() -> Self {
        Self {
            omega: Axis { min: 0.2, max: 3.0, n: 141 },
            gamma_max: Axis { min: 0.01, max: 2.5, n: 125 },
            kappa: 1.0,
            min_ratio: DEFAULT_MIN_RATIO,
            eps_split: DEFAULT_EPS_SPLIT,
            floquet: FloquetOptions::default(),
        }
    }
}

/// Classification of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub omega: f64,
    pub gamma_max: f64,
    pub beta: f64,
    pub phase: Option<PtPhase>,
    pub splitting: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseDiagram {
    pub spec: PhaseDiagramSpec,
    pub omega: Vec<f64>,
    pub gamma_max: Vec<f64>,
    /// Row-major over `(omega, gamma_max)`.
    pub points: Vec<GridPoint>,
}

impl PhaseDiagram {
    pub fn point(&self, i_omega: usize, i_gamma: usize) -> &GridPoint {
        &self.points[i_omega * self.gamma_max.len() + i_gamma]
    }

    /// Smallest `gamma_max` classified broken in column `i_omega`.
    pub fn broken_threshold(&self, i_omega: usize) -> Option<f64> {
        (0..self.gamma_max.len())
            .map(|j| self.point(i_omega, j))
            .find(|p| p.phase == Some(PtPhase::Broken))
            .map(|p| p.gamma_max)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

fn classify_point(spec: &PhaseDiagramSpec, omega: f64, gamma_max: f64) -> GridPoint {
    let run = || -> Result<(f64, f64, PtPhase)> {
        let params = CouplerParams::modulated(spec.kappa, gamma_max, omega, spec.min_ratio)?;
        let beta = match params.loss {
            Loss::Modulated(p) => p.beta,
            Loss::Constant { .. } => 0.0,
        };
        let result = monodromy_2x2(&params, &spec.floquet)?;
        let eps = spec.eps_split * spec.kappa;
        Ok((beta, result.splitting() / spec.kappa, classify_pt(&result, eps)))
    };
    match run() {
        Ok((beta, splitting, phase)) => GridPoint {
            omega,
            gamma_max,
            beta,
            phase: Some(phase),
            splitting,
            error: None,
        },
        Err(e) => GridPoint {
            omega,
            gamma_max,
            beta: f64::NAN,
            phase: None,
            splitting: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Classifies every grid point independently (in parallel on the current
/// rayon pool). Failures are recorded per point.
pub fn phase_diagram(spec: &PhaseDiagramSpec) -> Result<PhaseDiagram> {
    Axis::new(spec.omega.min, spec.omega.max, spec.omega.n)?;
    Axis::new(spec.gamma_max.min, spec.gamma_max.max, spec.gamma_max.n)?;
    let omega = spec.omega.values();
    let gamma_max = spec.gamma_max.values();
    let n_g = gamma_max.len();
    let points = (0..omega.len() * n_g)
        .into_par_iter()
        .map(|k| classify_point(spec, omega[k / n_g], gamma_max[k % n_g]))
        .collect();
    Ok(PhaseDiagram {
        spec: *spec,
        omega,
        gamma_max,
        points,
    })
}

/// Onset of Lyapunov splitting for constant loss, by bisection on the rate.
pub fn static_threshold(kappa: f64, eps_split: f64, opts: &FloquetOptions) -> Result<f64> {
    let broken = |gamma: f64| -> Result<bool> {
        let params = CouplerParams::new(kappa, Loss::constant(gamma, 1.0 / kappa)?)?;
        Ok(classify_pt(&monodromy_2x2(&params, opts)?, eps_split) == PtPhase::Broken)
    };
    let (mut lo, mut hi) = (0.0, 4.0 * kappa);
    if broken(lo)? || !broken(hi)? {
        return Err(Error::NoConvergence(
            "static splitting onset not bracketed".into(),
        ));
    }
    while hi - lo > 1e-10 * kappa {
        let mid = 0.5 * (lo + hi);
        if broken(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// States at each of the ascending `z_samples`, using
/// `U(z) = U(z mod T) U(T)^floor(z/T)`.
pub fn propagate_state(
    params: &CouplerParams,
    rho0: &DensityMatrix,
    z_samples: &[f64],
    opts: &WeiNormanOptions,
) -> Result<Vec<DensityMatrix>> {
    check_ascending(z_samples)?;
    let basis = rho0.basis();
    let period = params.period();
    let generators = FactorGenerators::new(basis);
    let v0 = vectorize(rho0).into_data();
    let needs_monodromy = z_samples.iter().any(|&z| z >= period * (1.0 - 1e-12));
    let monodromy = if needs_monodromy {
        Some(propagator(params, period, basis, opts)?.total())
    } else {
        None
    };
    let mut powered: BTreeMap<u64, DVector<C>> = BTreeMap::new();
    let mut states = Vec::with_capacity(z_samples.len());
    for &z in z_samples {
        let mut cycles = (z / period).floor();
        let mut phase = z - cycles * period;
        if period - phase <= 1e-12 * period {
            cycles += 1.0;
            phase = 0.0;
        } else if phase <= 1e-12 * period {
            phase = 0.0;
        }
        let k = cycles as u64;
        let start = match powered.get(&k) {
            Some(v) => v.clone(),
            None => {
                let v = if k == 0 {
                    v0.clone()
                } else {
                    matrix_power(monodromy.as_ref().unwrap(), k) * &v0
                };
                powered.insert(k, v.clone());
                v
            }
        };
        let v = if phase > 0.0 {
            evolve_vector(params, &generators, &start, 0.0, phase, opts)?
        } else {
            start
        };
        states.push(devectorize(&LiouvilleVector::new(basis, v)?));
    }
    Ok(states)
}

/// `P(n, h; z)` for every basis state, one row per sample.
#[derive(Debug, Clone, Serialize)]
pub struct OccupationTable {
    pub states: Vec<(usize, usize)>,
    pub z: Vec<f64>,
    /// `rows[k][i]` is the occupation of `states[i]` at `z[k]`.
    pub rows: Vec<Vec<f64>>,
    pub trace: Vec<f64>,
}

impl OccupationTable {
    pub fn column(&self, n: usize, h: usize) -> Option<Vec<f64>> {
        let i = self.states.iter().position(|&s| s == (n, h))?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Total population of the `n`-photon subspace at each sample.
    pub fn sector(&self, n: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| {
                self.states
                    .iter()
                    .zip(r)
                    .filter(|((m, _), _)| *m == n)
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect()
    }
}

pub fn occupation_table(states: &[DensityMatrix], z: &[f64]) -> Result<OccupationTable> {
    let Some(first) = states.first() else {
        return Err(Error::InvalidParameter("no states to tabulate".into()));
    };
    let basis = first.basis();
    let labels: Vec<(usize, usize)> = (0..=basis.n_max())
        .flat_map(|n| (0..=n).map(move |h| (n, h)))
        .collect();
    let rows = states
        .iter()
        .map(|rho| {
            labels
                .iter()
                .map(|&(n, h)| rho.occupation(n, h))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OccupationTable {
        states: labels,
        z: z.to_vec(),
        rows,
        trace: states.iter().map(|r| r.trace().re).collect(),
    })
}

/// Occupation trajectories on `n_samples` evenly spaced points of `[0, z_max]`.
pub fn occupation_trajectories(
    params: &CouplerParams,
    rho0: &DensityMatrix,
    z_max: f64,
    n_samples: usize,
    opts: &WeiNormanOptions,
) -> Result<OccupationTable> {
    if !(z_max >= 0.0 && z_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("z_max = {z_max} must be >= 0")));
    }
    let z: Vec<f64> = if z_max == 0.0 || n_samples <= 1 {
        vec![0.0]
    } else {
        (0..n_samples)
            .map(|k| z_max * k as f64 / (n_samples - 1) as f64)
            .collect()
    };
    let states = propagate_state(params, rho0, &z, opts)?;
    occupation_table(&states, &z)
}

/// Least-squares slope and intercept of `ln y` against `z`.
pub fn log_linear_fit(z: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = z
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.0)
        .map(|(a, v)| (*a, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::EmptyFitWindow {
            start: z.first().copied().unwrap_or(f64::NAN),
            end: z.last().copied().unwrap_or(f64::NAN),
        });
    }
    let n = pts.len() as f64;
    let (mz, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mz) * (y - my), b + (x - mz) * (x - mz))
    });
    if sxx == 0.0 {
        return Err(Error::EmptyFitWindow {
            start: mz,
            end: mz,
        });
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mz))
}

/// Fit window (in periods) for the strongly damped strand.
pub const FAST_STRAND_WINDOW: (usize, usize) = (10, 30);
/// Fit window (in periods) for the weakly damped strand.
pub const SLOW_STRAND_WINDOW: (usize, usize) = (80, 120);

/// Fitted decay rates of the two single-photon strands.
#[derive(Debug, Clone, Serialize)]
pub struct StrandSplitting {
    /// Decay rate of the lossy-guide occupation `P(1,0)`.
    pub fast_rate: f64,
    /// Decay rate of the lossless-guide occupation `P(1,1)`.
    pub slow_rate: f64,
    pub fast_window: (usize, usize),
    pub slow_window: (usize, usize),
}

impl StrandSplitting {
    pub fn splitting(&self) -> f64 {
        (self.fast_rate - self.slow_rate).abs()
    }
}

/// Fits exponential envelopes to the single-photon occupations sampled once
/// per period (`z = kT`, which removes the intra-period ripple).
///
/// The damped strand is fitted over `fast_window` (in periods), while it still
/// dominates its own occupation; the weakly damped one over `slow_window`,
/// after feeding from the higher photon sectors has died out.
pub fn strand_splitting(
    params: &CouplerParams,
    rho0: &DensityMatrix,
    fast_window: (usize, usize),
    slow_window: (usize, usize),
    opts: &WeiNormanOptions,
) -> Result<StrandSplitting> {
    let t = params.period();
    let fit = |(a, b): (usize, usize), h: usize| -> Result<f64> {
        if b <= a {
            return Err(Error::EmptyFitWindow {
                start: a as f64 * t,
                end: b as f64 * t,
            });
        }
        let z: Vec<f64> = (a..=b).map(|k| k as f64 * t).collect();
        let states = propagate_state(params, rho0, &z, opts)?;
        let p = states
            .iter()
            .map(|s| s.occupation(1, h))
            .collect::<Result<Vec<f64>>>()?;
        Ok(-log_linear_fit(&z, &p)?.0)
    };
    Ok(StrandSplitting {
        fast_rate: fit(fast_window, 0)?,
        slow_rate: fit(slow_window, 1)?,
        fast_window,
        slow_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::superposition_state;
    use crate::linalg::max_abs;
    use crate::loss::LossProfile;
    use crate::oracle::{LindbladOracle, OracleOptions};
    use proptest::prelude::*;

    fn reference_coupler(omega: f64) -> CouplerParams {
        CouplerParams::modulated(1.0, 0.25, omega, 1e-3).unwrap()
    }

    #[test]
    fn lossless_multipliers() {
        let t = 2.3;
        let p = CouplerParams::new(1.0, Loss::lossless(t)).unwrap();
        let r = monodromy_2x2(&p, &FloquetOptions::default()).unwrap();
        let mut got = r.multipliers();
        let want = [C::new(0.0, -t).exp(), C::new(0.0, t).exp()];
        assert!(multiset_distance(&got, &want) < 1e-9);
        assert!(r.lyapunov.iter().all(|l| l.abs() < 1e-9));
        assert_eq!(classify_pt(&r, DEFAULT_EPS_SPLIT), PtPhase::Symmetric);
        got.clear();
    }

    #[test]
    fn static_exceptional_point() {
        let p = CouplerParams::new(1.0, Loss::constant(2.0, 1.0).unwrap()).unwrap();
        let r = monodromy_2x2(&p, &FloquetOptions::default()).unwrap();
        let l = r.multipliers();
        assert!((l[0] - l[1]).norm() < 1e-4);
        let t = static_threshold(1.0, DEFAULT_EPS_SPLIT, &FloquetOptions::default()).unwrap();
        assert!((t - 2.0).abs() < 0.02);
    }

    #[test]
    fn determinant_is_abel_factor() {
        let p = reference_coupler(1.7);
        let m = amplitude_monodromy(&p, &FloquetOptions::default()).unwrap();
        let want = (-p.loss.integral(0.0, p.period())).exp();
        assert!((m.determinant() - C::from(want)).norm() < 1e-9);
    }

    #[test]
    fn labelled_phase_points() {
        let sym = monodromy_2x2(&reference_coupler(1.5), &FloquetOptions::default()).unwrap();
        let brk = monodromy_2x2(&reference_coupler(2.0), &FloquetOptions::default()).unwrap();
        assert_eq!(classify_pt(&sym, DEFAULT_EPS_SPLIT), PtPhase::Symmetric);
        assert_eq!(classify_pt(&brk, DEFAULT_EPS_SPLIT), PtPhase::Broken);
    }

    #[test]
    fn exponent_ordering() {
        let mu = sorted_exponents(
            &[C::new(0.5, 0.1), C::new(2.0, 0.0), C::new(0.5, -0.1)],
            1.0,
        );
        assert!(mu[0].re > mu[1].re);
        assert!((mu[1].re - mu[2].re).abs() < 1e-15 && mu[1].im < mu[2].im);
    }

    #[test]
    fn full_spectrum_contains_one_and_products() {
        let basis = TwoModeBasis::new(2);
        let p = reference_coupler(2.0);
        let opts = WeiNormanOptions::default();
        let full = monodromy_full(&p, &basis, &opts).unwrap();
        assert!(full.multipliers().iter().any(|l| (l - C::new(1.0, 0.0)).norm() < 1e-10));
        let two = monodromy_2x2(&p, &FloquetOptions::default()).unwrap();
        let m = two.multipliers();
        let res = sector_product_residual(&full.monodromy, &basis, [m[0], m[1]], 2);
        assert!(res < 1e-8, "{res:e}");
        assert_eq!(sector_leakage(&full.monodromy, &basis), 0.0);
    }

    #[test]
    fn lossless_full_spectrum_on_unit_circle() {
        let basis = TwoModeBasis::new(2);
        let p = CouplerParams::new(1.0, Loss::lossless(1.9)).unwrap();
        let full = monodromy_full(&p, &basis, &WeiNormanOptions::default()).unwrap();
        for l in full.multipliers() {
            assert!((l.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn predicted_products_count() {
        let l = [C::new(0.9, 0.1), C::new(0.5, -0.2)];
        assert_eq!(predicted_sector_eigenvalues(l, 3, 2).len(), 12);
        assert_eq!(predicted_sector_eigenvalues(l, 0, 0), vec![C::new(1.0, 0.0)]);
    }

    #[test]
    fn small_sweep_is_deterministic() {
        let spec = PhaseDiagramSpec {
            omega: Axis::new(1.5, 2.0, 2).unwrap(),
            gamma_max: Axis::new(0.05, 0.25, 2).unwrap(),
            ..PhaseDiagramSpec::default()
        };
        let a = phase_diagram(&spec).unwrap();
        let b = phase_diagram(&spec).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 4);
        assert_eq!(a.point(1, 1).phase, Some(PtPhase::Broken));
        assert_eq!(a.point(0, 1).phase, Some(PtPhase::Symmetric));
        assert_eq!(a.failures(), 0);
        assert!(Axis::new(1.0, 0.5, 3).is_err());
    }

    #[test]
    fn propagation_matches_oracle_over_many_periods() {
        let basis = TwoModeBasis::new(3);
        let p = reference_coupler(2.0);
        let rho = superposition_state(&basis, 3).unwrap();
        let t = p.period();
        let zs = [0.0, 0.4 * t, t, 2.0 * t, 3.3 * t, 10.0 * t];
        let mine = propagate_state(&p, &rho, &zs, &WeiNormanOptions::default()).unwrap();
        let theirs = LindbladOracle::new(&p, &basis, OracleOptions::default())
            .trajectory(&rho, &zs)
            .unwrap();
        assert_eq!(mine[0], rho);
        for (a, b) in mine.iter().zip(&theirs) {
            assert!(max_abs(&(a.elements() - b.elements())) < 1e-7);
        }
    }

    #[test]
    fn occupations_sum_to_one() {
        let basis = TwoModeBasis::new(3);
        let p = reference_coupler(1.5);
        let rho = superposition_state(&basis, 3).unwrap();
        let table = occupation_trajectories(&p, &rho, 3.0 * p.period(), 31, &WeiNormanOptions::default())
            .unwrap();
        assert_eq!(table.rows.len(), 31);
        for (row, tr) in table.rows.iter().zip(&table.trace) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!((tr - 1.0).abs() < 1e-8);
        }
        let vac = table.column(0, 0).unwrap();
        assert!(vac.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let single = occupation_trajectories(&p, &rho, 0.0, 10, &WeiNormanOptions::default()).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!((single.column(3, 0).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_fit_recovers_exponential() {
        let z: Vec<f64> = (0..20).map(|k| 0.5 * k as f64).collect();
        let y: Vec<f64> = z.iter().map(|x| 3.0 * (-0.7 * x).exp()).collect();
        let (slope, icpt) = log_linear_fit(&z, &y).unwrap();
        assert!((slope + 0.7).abs() < 1e-12 && (icpt - 3f64.ln()).abs() < 1e-12);
        assert!(log_linear_fit(&[1.0], &[1.0]).is_err());
        assert!(log_linear_fit(&[1.0, 2.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn broken_phase_strands_split_by_twice_the_lyapunov_gap() {
        let p = reference_coupler(2.0);
        let rho = superposition_state(&TwoModeBasis::new(3), 3).unwrap();
        let s = strand_splitting(
            &p,
            &rho,
            FAST_STRAND_WINDOW,
            SLOW_STRAND_WINDOW,
            &WeiNormanOptions::default(),
        )
        .unwrap();
        let want = 2.0 * monodromy_2x2(&p, &FloquetOptions::default()).unwrap().splitting();
        assert!((s.splitting() - want).abs() < 0.1 * want);
        assert!(s.fast_rate > s.slow_rate);
        assert!(strand_splitting(&p, &rho, (3, 3), (4, 9), &WeiNormanOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sum_rule(g in 0.01f64..2.5, omega in 0.3f64..3.0, beta in 0.1f64..5.0) {
            // positive root of 4x^2 + g^2 x - g^2 = 0, with x = B^2
            let b2 = (-g * g + (g.powi(4) + 16.0 * g * g).sqrt()) / 8.0;
            let profile = LossProfile::new(b2.sqrt(), beta, omega).unwrap();
            let p = CouplerParams::new(1.0, Loss::Modulated(profile)).unwrap();
            let r = monodromy_2x2(&p, &FloquetOptions::default()).unwrap();
            let sum: f64 = r.lyapunov.iter().sum();
            prop_assert!((sum + profile.mean_loss()).abs() < 1e-8);
        }
    }
}

//! Product-of-exponentials propagator.
//!
//! The Liouvillian splits into two commuting sl(2) copies (left and right
//! multiplication) plus a solvable part spanned by the number superoperators
//! `ML`, `MR` and the four jumps `Lj-Rk-`. With
//!
//! ```text
//! K+ = L1+L2-,  K- = L2+L1-,  K0 = L1+L1- - L2+L2-
//! ```
//!
//! the left copy has coefficients `c+ = c- = -i kappa`, `c0 = -gamma/2`, and the
//! right copy the complex conjugates. The evolution is written as
//!
//! ```text
//! U = e^{f+ K+L} e^{f0 K0L} e^{f- K-L}  e^{f+* K+R} e^{f0* K0R} e^{f-* K-R}
//!     e^{a1 ML} e^{a2 MR} e^{a3 J11} e^{a4 J22} e^{a5 J21} e^{a6 J12}
//! ```
//!
//! with `Jjk = Lj-Rk-`. The `f` obey a Riccati system that blows up where the
//! product coordinates break down, so the evolution is cut into segments, each
//! restarted from the identity.
//!
//! The `f` also follow from the 2x2 fundamental matrix `M' = [[c0, c+], [c-, -c0]] M`
//! via `f+ = M12/M22`, `f- = M21/M22`, `f0 = -ln M22`. `M` is the single-photon
//! propagator of the non-Hermitian part, and the jump weights satisfy
//! `a_jk' = 2 gamma exp(-int gamma) M_1j conj(M_1k)`.

use nalgebra::{DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{LiouvilleVector, TwoModeBasis};
use crate::linalg::{expm, CMatrix, ZERO};
use crate::ode::Dopri5;
use crate::superop::{generator_for, CouplerParams, GeneratorLabel, Superoperator};

/// Default bound on `|f+|`, `|f-|` (and `ln` of it on `|Re f0|`) before a new
/// segment is started.
pub const DEFAULT_CHART_BOUND: f64 = 10.0;

type C = Complex64;

const I: C = C::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeiNormanOptions {
    pub rtol: f64,
    pub atol: f64,
    pub chart_bound: f64,
}

impl Default for WeiNormanOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            chart_bound: DEFAULT_CHART_BOUND,
        }
    }
}

impl WeiNormanOptions {
    pub fn with_tol(rtol: f64) -> Self {
        Self {
            rtol,
            atol: rtol * 1e-2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.chart_bound > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "chart bound {} must exceed 1",
                self.chart_bound
            )));
        }
        Ok(())
    }

    fn dopri(&self) -> Dopri5 {
        Dopri5::new(self.rtol, self.atol)
    }
}

/// `f+`, `f0`, `f-` of one sl(2) copy at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sl2Coefficients {
    pub f_plus: C,
    pub f_zero: C,
    pub f_minus: C,
}

impl Sl2Coefficients {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Coefficients of the right copy.
    pub fn conj(&self) -> Self {
        Self {
            f_plus: self.f_plus.conj(),
            f_zero: self.f_zero.conj(),
            f_minus: self.f_minus.conj(),
        }
    }

    pub fn within_chart(&self, bound: f64) -> bool {
        self.f_plus.norm() <= bound
            && self.f_minus.norm() <= bound
            && self.f_zero.re.abs() <= bound.ln()
            && self.f_plus.is_finite()
            && self.f_zero.is_finite()
            && self.f_minus.is_finite()
    }

    /// `e^{f+ K+} e^{f0 K0} e^{f- K-}` in the defining 2x2 representation.
    pub fn to_fundamental(&self) -> Matrix2<C> {
        let ep = self.f_zero.exp();
        let em = (-self.f_zero).exp();
        Matrix2::new(
            ep + self.f_plus * self.f_minus * em,
            self.f_plus * em,
            self.f_minus * em,
            em,
        )
    }

    /// Inverse of [`to_fundamental`](Self::to_fundamental); `None` where `M22 = 0`.
    pub fn from_fundamental(m: &Matrix2<C>) -> Option<Self> {
        let m22 = m[(1, 1)];
        if m22.norm() == 0.0 {
            return None;
        }
        Some(Self {
            f_plus: m[(0, 1)] / m22,
            f_zero: -m22.ln(),
            f_minus: m[(1, 0)] / m22,
        })
    }

    fn as_array(&self) -> [C; 3] {
        [self.f_plus, self.f_zero, self.f_minus]
    }

    fn from_slice(y: &[C]) -> Self {
        Self {
            f_plus: y[0],
            f_zero: y[1],
            f_minus: y[2],
        }
    }
}

/// Derivatives of the left-copy coefficients at `z`.
pub fn sl2_rhs(z: f64, f: &Sl2Coefficients, params: &CouplerParams) -> Sl2Coefficients {
    let c_pm = -I * params.kappa;
    let c0 = C::from(-0.5 * params.gamma(z));
    Sl2Coefficients {
        f_plus: c_pm + f.f_plus * (c0 * 2.0) - c_pm * f.f_plus * f.f_plus,
        f_zero: c0 - c_pm * f.f_plus,
        f_minus: c_pm * (f.f_zero * 2.0).exp(),
    }
}

/// Sampled coefficient run, possibly cut short at a chart boundary.
#[derive(Debug, Clone)]
pub struct Sl2Trajectory {
    pub z: Vec<f64>,
    pub coefficients: Vec<Sl2Coefficients>,
    /// Last abscissa reached; below the target if the chart bound was hit.
    pub reached: f64,
    pub stopped_early: bool,
}

impl Sl2Trajectory {
    pub fn last(&self) -> Sl2Coefficients {
        *self.coefficients.last().unwrap()
    }
}

/// Integrates the Riccati system from zero data at `z0` towards `z1`, stopping
/// early if the coefficients would leave the chart. Samples at `outputs`
/// (or every accepted step when empty) plus the end point.
pub fn integrate_sl2(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
    outputs: &[f64],
) -> Result<Sl2Trajectory> {
    opts.validate()?;
    let mut zs = vec![z0];
    let mut cs = vec![Sl2Coefficients::zero()];
    let bound = opts.chart_bound;
    let run = opts.dopri().solve_guarded(
        |z, y, dy| {
            let d = sl2_rhs(z, &Sl2Coefficients::from_slice(y), params);
            dy.copy_from_slice(&d.as_array());
        },
        z0,
        &[ZERO; 3],
        z1,
        outputs,
        |y| Sl2Coefficients::from_slice(y).within_chart(bound),
        |z, y| {
            zs.push(z);
            cs.push(Sl2Coefficients::from_slice(y));
        },
    )?;
    if *zs.last().unwrap() != run.z {
        zs.push(run.z);
        cs.push(Sl2Coefficients::from_slice(&run.y));
    }
    Ok(Sl2Trajectory {
        z: zs,
        coefficients: cs,
        reached: run.z,
        stopped_early: run.stopped_early,
    })
}

fn generator_2x2(params: &CouplerParams, z: f64) -> Matrix2<C> {
    let c_pm = -I * params.kappa;
    let c0 = C::from(-0.5 * params.gamma(z));
    Matrix2::new(c0, c_pm, c_pm, -c0)
}

fn mat_from(y: &[C]) -> Matrix2<C> {
    Matrix2::new(y[0], y[1], y[2], y[3])
}

/// Fundamental matrix of the 2x2 linear system over `[z0, z1]`.
pub fn integrate_sl2_linear(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
) -> Result<Matrix2<C>> {
    opts.validate()?;
    let one = C::new(1.0, 0.0);
    let run = opts.dopri().solve(
        |z, y, dy| {
            let d = generator_2x2(params, z) * mat_from(y);
            dy.copy_from_slice(&[d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]]);
        },
        z0,
        &[one, ZERO, ZERO, one],
        z1,
        &[],
        |_, _| {},
    )?;
    Ok(mat_from(&run.y))
}

/// `a1 ... a6` at one point: mean-loss exponents and the weights of
/// `J11`, `J22`, `J21`, `J12` in that order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolvableCoefficients {
    pub a: [C; 6],
}

impl SolvableCoefficients {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite())
    }
}

/// How the jump weights are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvablePath {
    /// Closed-form adjoint action through the 2x2 fundamental matrix.
    Adjoint,
    /// Explicit conjugation of the jump generator by the semisimple propagator
    /// on the one-photon truncation, followed by coefficient extraction.
    Conjugation,
}

/// Solvable coefficients over `[z0, z1]` together with the 2x2 fundamental
/// matrix of the segment.
#[derive(Debug, Clone, Copy)]
pub struct SolvableRun {
    pub coefficients: SolvableCoefficients,
    pub fundamental: Matrix2<C>,
}

pub fn integrate_solvable(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
    path: SolvablePath,
) -> Result<SolvableRun> {
    opts.validate()?;
    let half_integral = -0.5 * params.loss.integral(z0, z1);
    let run = match path {
        SolvablePath::Adjoint => solvable_adjoint(params, z0, z1, opts)?,
        SolvablePath::Conjugation => solvable_conjugation(params, z0, z1, opts)?,
    };
    let mut coefficients = run.coefficients;
    coefficients.a[0] = C::from(half_integral);
    coefficients.a[1] = C::from(half_integral);
    if !coefficients.is_finite() {
        return Err(Error::NonFinite(format!(
            "solvable coefficients on [{z0}, {z1}]"
        )));
    }
    Ok(SolvableRun {
        coefficients,
        fundamental: run.fundamental,
    })
}

// state: M (4), g = int gamma, a11, a22, a21, a12
fn solvable_adjoint(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
) -> Result<SolvableRun> {
    let one = C::new(1.0, 0.0);
    let mut y0 = [ZERO; 9];
    y0[0] = one;
    y0[3] = one;
    let run = opts.dopri().solve(
        |z, y, dy| {
            let m = mat_from(y);
            let gamma = params.gamma(z);
            let d = generator_2x2(params, z) * m;
            dy[..4].copy_from_slice(&[d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]]);
            dy[4] = C::from(gamma);
            let w = 2.0 * gamma * (-y[4].re).exp();
            let (m11, m12) = (m[(0, 0)], m[(0, 1)]);
            dy[5] = m11 * m11.conj() * w;
            dy[6] = m12 * m12.conj() * w;
            dy[7] = m12 * m11.conj() * w;
            dy[8] = m11 * m12.conj() * w;
        },
        z0,
        &y0,
        z1,
        &[],
        |_, _| {},
    )?;
    let y = run.y;
    Ok(SolvableRun {
        coefficients: SolvableCoefficients {
            a: [
                C::from(-0.5 * y[4].re),
                C::from(-0.5 * y[4].re),
                y[5],
                y[6],
                y[7],
                y[8],
            ],
        },
        fundamental: mat_from(&y),
    })
}

fn solvable_conjugation(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
) -> Result<SolvableRun> {
    let basis = TwoModeBasis::new(1);
    let n = basis.liouville_dim();
    let dense = |l: GeneratorLabel| generator_for(l, &basis).into_dense();
    let number = dense(GeneratorLabel::NumberLeft) + dense(GeneratorLabel::NumberRight);
    let jump = dense(GeneratorLabel::Jump { left: 1, right: 1 });
    let one = C::new(1.0, 0.0);

    // semisimple propagator on the one-photon truncation: rho -> V rho V^dag
    let semisimple = |m: &Matrix2<C>| -> CMatrix {
        let mut v = CMatrix::zeros(3, 3);
        v[(0, 0)] = one;
        for r in 0..2 {
            for c in 0..2 {
                v[(r + 1, c + 1)] = m[(r, c)];
            }
        }
        v.map(|x| x.conj()).kronecker(&v)
    };

    let mut y0 = vec![ZERO; 4 + n * n];
    y0[0] = one;
    y0[3] = one;
    for k in 0..n {
        y0[4 + k + n * k] = one;
    }
    let run = opts.dopri().solve(
        |z, y, dy| {
            let m = mat_from(y);
            let gamma = params.gamma(z);
            let d = generator_2x2(params, z) * m;
            dy[..4].copy_from_slice(&[d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]]);
            let u = semisimple(&m);
            let u_inv = u.clone().try_inverse().expect("semisimple propagator is invertible");
            let g = &number * C::from(-0.5 * gamma) + &jump * C::from(2.0 * gamma);
            let x = u_inv * g * u;
            let w = CMatrix::from_column_slice(n, n, &y[4..]);
            let dw = x * w;
            dy[4..].copy_from_slice(dw.as_slice());
        },
        z0,
        &y0,
        z1,
        &[],
        |_, _| {},
    )?;
    let w = CMatrix::from_column_slice(n, n, &run.y[4..]);
    let vac = basis.dyad_index(0, 0);
    let one_photon = |m: usize, h: usize| basis.index(m, h).unwrap();
    let (s1, s2) = (one_photon(1, 0), one_photon(0, 1));
    let weight = |j: usize, k: usize| w[(vac, basis.dyad_index(j, k))];
    let a1 = w[(basis.dyad_index(s1, vac), basis.dyad_index(s1, vac))].ln();
    Ok(SolvableRun {
        coefficients: SolvableCoefficients {
            a: [a1, a1, weight(s1, s1), weight(s2, s2), weight(s2, s1), weight(s1, s2)],
        },
        fundamental: mat_from(&run.y),
    })
}

/// The twelve generator matrices in product order.
#[derive(Debug, Clone)]
pub struct FactorGenerators {
    basis: TwoModeBasis,
    mats: Vec<CMatrix>,
    // diagonal of each generator that is diagonal; the others are nilpotent
    diagonals: Vec<Option<Vec<C>>>,
}

impl FactorGenerators {
    pub fn new(basis: &TwoModeBasis) -> Self {
        use GeneratorLabel::*;
        let g = |l: GeneratorLabel| generator_for(l, basis).into_dense();
        let mats = vec![
            g(Left { to: 1, from: 2 }),
            g(Left { to: 1, from: 1 }) - g(Left { to: 2, from: 2 }),
            g(Left { to: 2, from: 1 }),
            g(Right { raise: 1, lower: 2 }),
            g(Right { raise: 1, lower: 1 }) - g(Right { raise: 2, lower: 2 }),
            g(Right { raise: 2, lower: 1 }),
            g(NumberLeft),
            g(NumberRight),
            g(Jump { left: 1, right: 1 }),
            g(Jump { left: 2, right: 2 }),
            g(Jump { left: 2, right: 1 }),
            g(Jump { left: 1, right: 2 }),
        ];
        let diagonals = mats
            .iter()
            .map(|m| {
                let off = m
                    .iter()
                    .enumerate()
                    .any(|(k, x)| k % m.nrows() != k / m.nrows() && *x != ZERO);
                (!off).then(|| m.diagonal().iter().copied().collect())
            })
            .collect();
        Self {
            basis: basis.clone(),
            mats,
            diagonals,
        }
    }

    /// `exp(c G_k) v` without forming the exponential: elementwise for the
    /// diagonal generators, a terminating series for the nilpotent ones.
    fn exp_apply(&self, k: usize, c: C, v: DVector<C>) -> DVector<C> {
        if c == ZERO {
            return v;
        }
        if let Some(d) = &self.diagonals[k] {
            return DVector::from_iterator(v.len(), v.iter().zip(d).map(|(x, g)| x * (g * c).exp()));
        }
        let mut term = v.clone();
        let mut sum = v;
        for j in 1..=self.mats[k].nrows() {
            term = &self.mats[k] * term * (c / j as f64);
            if term.iter().all(|x| *x == ZERO) {
                break;
            }
            sum += &term;
        }
        sum
    }

    pub fn basis(&self) -> &TwoModeBasis {
        &self.basis
    }

    fn weights(left: &Sl2Coefficients, right: &Sl2Coefficients, s: &SolvableCoefficients) -> [C; 12] {
        [
            left.f_plus,
            left.f_zero,
            left.f_minus,
            right.f_plus,
            right.f_zero,
            right.f_minus,
            s.a[0],
            s.a[1],
            s.a[2],
            s.a[3],
            s.a[4],
            s.a[5],
        ]
    }

    /// The twelve exponentials, leftmost first.
    pub fn factors(
        &self,
        left: &Sl2Coefficients,
        right: &Sl2Coefficients,
        solvable: &SolvableCoefficients,
    ) -> Result<Vec<CMatrix>> {
        let w = Self::weights(left, right, solvable);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("propagator coefficients".into()));
        }
        Ok(self
            .mats
            .iter()
            .zip(w)
            .map(|(g, c)| expm(&(g * c)))
            .collect())
    }
}

/// Product of the twelve exponentials in the order written in the module docs.
pub fn assemble_propagator(
    left: &Sl2Coefficients,
    right: &Sl2Coefficients,
    solvable: &SolvableCoefficients,
    generators: &FactorGenerators,
) -> Result<Superoperator> {
    let factors = generators.factors(left, right, solvable)?;
    let n = generators.basis.liouville_dim();
    let product = factors
        .iter()
        .fold(CMatrix::identity(n, n), |acc, f| acc * f);
    Superoperator::from_dense(&generators.basis, "wei-norman", product)
}

/// Applies the factors one by one, rightmost first, without forming any
/// matrix exponential.
pub fn apply_factors(
    left: &Sl2Coefficients,
    right: &Sl2Coefficients,
    solvable: &SolvableCoefficients,
    generators: &FactorGenerators,
    v: &DVector<C>,
) -> Result<DVector<C>> {
    let w = FactorGenerators::weights(left, right, solvable);
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("propagator coefficients".into()));
    }
    Ok((0..12)
        .rev()
        .fold(v.clone(), |acc, k| generators.exp_apply(k, w[k], acc)))
}

/// One segment of the evolution, restarted from the identity at `z0`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub z0: f64,
    pub z1: f64,
    pub sl2: Sl2Coefficients,
    pub solvable: SolvableCoefficients,
    pub matrix: CMatrix,
}

#[derive(Debug, Clone)]
pub struct SegmentedPropagator {
    basis: TwoModeBasis,
    start: f64,
    segments: Vec<Segment>,
}

impl SegmentedPropagator {
    pub fn basis(&self) -> &TwoModeBasis {
        &self.basis
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.segments.last().map_or(self.start, |s| s.z1)
    }

    /// Composed propagator, later segments applied last.
    pub fn total(&self) -> CMatrix {
        let n = self.basis.liouville_dim();
        self.segments
            .iter()
            .fold(CMatrix::identity(n, n), |acc, s| &s.matrix * acc)
    }

    pub fn to_superoperator(&self) -> Superoperator {
        Superoperator::from_dense(&self.basis, "propagator", self.total())
            .expect("segment matrices match the basis")
    }

    pub fn apply(&self, v: &LiouvilleVector) -> Result<LiouvilleVector> {
        if v.basis() != &self.basis {
            return Err(Error::DimensionMismatch {
                expected: self.basis.liouville_dim(),
                found: v.data().len(),
            });
        }
        let out = self
            .segments
            .iter()
            .fold(v.data().clone(), |acc, s| &s.matrix * acc);
        LiouvilleVector::new(&self.basis, out)
    }
}

/// Coefficients of one segment starting at `z0` and ending at `z1` or
/// earlier at a chart boundary: `(end, f, a)`.
pub fn segment_coefficients(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
) -> Result<(f64, Sl2Coefficients, SolvableCoefficients)> {
    let sl2 = integrate_sl2(params, z0, z1, opts, &[z1])?;
    let end = sl2.reached;
    if end <= z0 {
        return Err(Error::NoConvergence(format!(
            "coefficient integration made no progress from z = {z0}"
        )));
    }
    let solvable = integrate_solvable(params, z0, end, opts, SolvablePath::Adjoint)?.coefficients;
    Ok((end, sl2.last(), solvable))
}

/// Builds one segment starting at `z0`, ending at `z1` or earlier at a chart
/// boundary.
pub fn segment(
    params: &CouplerParams,
    z0: f64,
    z1: f64,
    opts: &WeiNormanOptions,
    generators: &FactorGenerators,
) -> Result<Segment> {
    let (end, left, solvable) = segment_coefficients(params, z0, z1, opts)?;
    let matrix = assemble_propagator(&left, &left.conj(), &solvable, generators)?.into_dense();
    Ok(Segment {
        z0,
        z1: end,
        sl2: left,
        solvable,
        matrix,
    })
}

/// Next stop for a segment starting at `z`: the following period boundary or
/// `z_end`, whichever comes first.
fn segment_target(z: f64, z_end: f64, period: f64) -> f64 {
    let next_boundary = ((z / period).floor() + 1.0) * period;
    if next_boundary - z < 1e-12 * period {
        (next_boundary + period).min(z_end)
    } else {
        next_boundary.min(z_end)
    }
}

fn snap(stop: f64, reached: f64) -> f64 {
    if (stop - reached).abs() <= 1e-14 * stop.abs().max(1.0) {
        stop
    } else {
        reached
    }
}

/// Evolves a Liouville vector over `[z_start, z_end]` segment by segment,
/// applying the factors directly to the vector.
pub fn evolve_vector(
    params: &CouplerParams,
    generators: &FactorGenerators,
    v: &DVector<C>,
    z_start: f64,
    z_end: f64,
    opts: &WeiNormanOptions,
) -> Result<DVector<C>> {
    opts.validate()?;
    let period = params.period();
    let mut z = z_start;
    let mut out = v.clone();
    while z < z_end {
        let stop = segment_target(z, z_end, period);
        let (end, left, solvable) = segment_coefficients(params, z, stop, opts)?;
        out = apply_factors(&left, &left.conj(), &solvable, generators, &out)?;
        z = snap(stop, end);
    }
    Ok(out)
}

/// Propagator over `[z_start, z_end]`, cut at chart boundaries and at every
/// multiple of the loss period.
pub fn propagator_between(
    params: &CouplerParams,
    z_start: f64,
    z_end: f64,
    basis: &TwoModeBasis,
    opts: &WeiNormanOptions,
) -> Result<SegmentedPropagator> {
    opts.validate()?;
    if !(z_end >= z_start) {
        return Err(Error::InvalidParameter(format!(
            "propagation interval [{z_start}, {z_end}] is reversed"
        )));
    }
    let generators = FactorGenerators::new(basis);
    let period = params.period();
    let mut segments = Vec::new();
    let mut z = z_start;
    while z < z_end {
        let stop = segment_target(z, z_end, period);
        let seg = segment(params, z, stop, opts, &generators)?;
        z = snap(stop, seg.z1);
        segments.push(seg);
    }
    Ok(SegmentedPropagator {
        basis: basis.clone(),
        start: z_start,
        segments,
    })
}

/// Propagator `U(z)` from `0`.
pub fn propagator(
    params: &CouplerParams,
    z: f64,
    basis: &TwoModeBasis,
    opts: &WeiNormanOptions,
) -> Result<SegmentedPropagator> {
    if z < 0.0 {
        return Err(Error::InvalidParameter(format!("z = {z} must be >= 0")));
    }
    propagator_between(params, 0.0, z, basis, opts)
}

/// Coefficient record for inspection: segment index, abscissa and the
/// segment-local coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSample {
    pub segment: usize,
    pub z: f64,
    pub sl2: Sl2Coefficients,
    pub solvable: SolvableCoefficients,
}

/// Coefficients sampled at `n_samples` evenly spaced points of one period.
pub fn coefficient_dump(
    params: &CouplerParams,
    n_samples: usize,
    opts: &WeiNormanOptions,
) -> Result<Vec<CoefficientSample>> {
    opts.validate()?;
    let period = params.period();
    let n = n_samples.max(2);
    let targets: Vec<f64> = (0..n).map(|k| period * k as f64 / (n - 1) as f64).collect();
    let mut out = Vec::with_capacity(n);
    let mut seg_start = 0.0;
    let mut seg_index = 0;
    for &z in &targets {
        loop {
            let traj = integrate_sl2(params, seg_start, z, opts, &[])?;
            if !traj.stopped_early {
                let solvable =
                    integrate_solvable(params, seg_start, z, opts, SolvablePath::Adjoint)?.coefficients;
                out.push(CoefficientSample {
                    segment: seg_index,
                    z,
                    sl2: traj.last(),
                    solvable,
                });
                break;
            }
            if traj.reached <= seg_start {
                return Err(Error::NoConvergence(format!(
                    "coefficient integration made no progress from z = {seg_start}"
                )));
            }
            seg_start = traj.reached;
            seg_index += 1;
        }
    }
    Ok(out)
}

//! Truncated two-mode Fock space, density matrices and their vectorisation.
//!
//! States `|m, h>` carry `m` photons in waveguide 1 (the lossy one) and `h` in
//! waveguide 2, with `m + h <= n_max`. The truncation is exact for this model:
//! the coupler Hamiltonian conserves the total photon number and the loss only
//! lowers it, so nothing ever leaks above `n_max`.
//!
//! Ordering is by ascending total photon number `n`, then ascending `h`, so
//! index `n (n + 1) / 2 + h` addresses `|n - h, h>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{min_hermitian_eigenvalue, CMatrix, ZERO};

/// Default truncation, enough for the three-photon experiment.
pub const DEFAULT_NMAX: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoModeBasis {
    n_max: usize,
    states: Vec<(usize, usize)>,
}

impl TwoModeBasis {
    pub fn new(n_max: usize) -> Self {
        let states = (0..=n_max)
            .flat_map(|n| (0..=n).map(move |h| (n - h, h)))
            .collect();
        Self { n_max, states }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Hilbert-space dimension `(n_max + 1)(n_max + 2) / 2`.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Liouville-space dimension `dim^2`.
    pub fn liouville_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn states(&self) -> &[(usize, usize)] {
        &self.states
    }

    /// `(m, h)` occupation numbers of basis state `i`.
    pub fn state(&self, i: usize) -> (usize, usize) {
        self.states[i]
    }

    pub fn index(&self, m: usize, h: usize) -> Option<usize> {
        let n = m + h;
        (n <= self.n_max).then(|| n * (n + 1) / 2 + h)
    }

    /// Total photon number of basis state `i`.
    pub fn photons(&self, i: usize) -> usize {
        let (m, h) = self.states[i];
        m + h
    }

    /// Liouville index of the dyad `|i><j|` (column-major stacking).
    pub fn dyad_index(&self, i: usize, j: usize) -> usize {
        i + self.dim() * j
    }

    /// Inverse of [`dyad_index`](Self::dyad_index).
    pub fn dyad(&self, k: usize) -> (usize, usize) {
        (k % self.dim(), k / self.dim())
    }

    /// Left and right photon numbers of Liouville basis element `k`.
    pub fn dyad_sector(&self, k: usize) -> (usize, usize) {
        let (i, j) = self.dyad(k);
        (self.photons(i), self.photons(j))
    }
}

/// Build the canonical basis for photon numbers up to `n_max`.
pub fn build_basis(n_max: usize) -> TwoModeBasis {
    TwoModeBasis::new(n_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: TwoModeBasis,
    elements: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: &TwoModeBasis, elements: CMatrix) -> Result<Self> {
        let d = basis.dim();
        if elements.nrows() != d || elements.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: elements.nrows().max(elements.ncols()),
            });
        }
        Ok(Self {
            basis: basis.clone(),
            elements,
        })
    }

    /// `|psi><psi|` for the given amplitudes (not normalised here).
    pub fn from_pure(basis: &TwoModeBasis, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        let psi = DVector::from_column_slice(amplitudes);
        Self::new(basis, &psi * psi.adjoint())
    }

    /// Fock state `|m, h><m, h|`.
    pub fn fock(basis: &TwoModeBasis, m: usize, h: usize) -> Result<Self> {
        let i = basis.index(m, h).ok_or_else(|| {
            Error::OutOfRange(format!("|{m},{h}> exceeds n_max = {}", basis.n_max()))
        })?;
        let mut rho = CMatrix::zeros(basis.dim(), basis.dim());
        rho[(i, i)] = Complex64::new(1.0, 0.0);
        Self::new(basis, rho)
    }

    pub fn basis(&self) -> &TwoModeBasis {
        &self.basis
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn trace(&self) -> Complex64 {
        self.elements.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.elements - self.elements.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.elements)
    }

    /// Population `<n-h, h| rho |n-h, h>`.
    pub fn occupation(&self, n: usize, h: usize) -> Result<f64> {
        occupation(self, n, h)
    }

    /// Sum of all populations with total photon number `n`.
    pub fn sector_population(&self, n: usize) -> f64 {
        if n > self.basis.n_max() {
            return 0.0;
        }
        (0..=n)
            .map(|h| {
                let i = self.basis.index(n - h, h).unwrap();
                self.elements[(i, i)].re
            })
            .sum()
    }

    /// Mean total photon number `tr(N rho)`.
    pub fn mean_photons(&self) -> f64 {
        (0..self.basis.dim())
            .map(|i| self.basis.photons(i) as f64 * self.elements[(i, i)].re)
            .sum()
    }

    pub fn vectorize(&self) -> LiouvilleVector {
        vectorize(self)
    }
}

/// Column-major stacking of a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleVector {
    basis: TwoModeBasis,
    data: DVector<Complex64>,
}

impl LiouvilleVector {
    pub fn new(basis: &TwoModeBasis, data: DVector<Complex64>) -> Result<Self> {
        if data.len() != basis.liouville_dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.liouville_dim(),
                found: data.len(),
            });
        }
        Ok(Self {
            basis: basis.clone(),
            data,
        })
    }

    pub fn basis(&self) -> &TwoModeBasis {
        &self.basis
    }

    pub fn data(&self) -> &DVector<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> DVector<Complex64> {
        self.data
    }

    /// Vectorised identity operator, the left null vector of any
    /// trace-preserving generator.
    pub fn identity(basis: &TwoModeBasis) -> Self {
        let mut data = DVector::from_element(basis.liouville_dim(), ZERO);
        for i in 0..basis.dim() {
            data[basis.dyad_index(i, i)] = Complex64::new(1.0, 0.0);
        }
        Self {
            basis: basis.clone(),
            data,
        }
    }

    pub fn devectorize(&self) -> DensityMatrix {
        devectorize(self)
    }
}

pub fn vectorize(rho: &DensityMatrix) -> LiouvilleVector {
    LiouvilleVector {
        basis: rho.basis.clone(),
        data: DVector::from_column_slice(rho.elements.as_slice()),
    }
}

pub fn devectorize(v: &LiouvilleVector) -> DensityMatrix {
    let d = v.basis.dim();
    DensityMatrix {
        basis: v.basis.clone(),
        elements: DMatrix::from_column_slice(d, d, v.data.as_slice()),
    }
}

/// Population of `|n - h, h>`. Fails if `h > n` or `n > n_max`, or if the
/// diagonal element carries an imaginary part above `1e-12`.
pub fn occupation(rho: &DensityMatrix, n: usize, h: usize) -> Result<f64> {
    if h > n || n > rho.basis.n_max() {
        return Err(Error::OutOfRange(format!(
            "occupation (n = {n}, h = {h}) outside 0 <= h <= n <= {}",
            rho.basis.n_max()
        )));
    }
    let i = rho.basis.index(n - h, h).unwrap();
    let value = rho.elements[(i, i)];
    if value.im.abs() > 1e-12 {
        return Err(Error::NonFinite(format!(
            "diagonal element of |{},{}> has imaginary part {:e}",
            n - h,
            h,
            value.im
        )));
    }
    Ok(value.re)
}

/// `(|0, n> + |n, 0>) / sqrt(2)` as a density matrix.
pub fn superposition_state(basis: &TwoModeBasis, n: usize) -> Result<DensityMatrix> {
    if n == 0 || n > basis.n_max() {
        return Err(Error::OutOfRange(format!(
            "superposition photon number {n} outside 1..={}",
            basis.n_max()
        )));
    }
    let mut psi = vec![ZERO; basis.dim()];
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    psi[basis.index(0, n).unwrap()] = amp;
    psi[basis.index(n, 0).unwrap()] = amp;
    DensityMatrix::from_pure(basis, &psi)
}

/// Random full-rank state `G G^dag / tr(G G^dag)` from a complex Ginibre matrix
/// with standard normal entries.
pub fn random_density_matrix<R: rand::Rng + ?Sized>(basis: &TwoModeBasis, rng: &mut R) -> DensityMatrix {
    use rand_distr::StandardNormal;
    let d = basis.dim();
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let mut rho = &g * g.adjoint();
    let tr = rho.trace();
    rho /= tr;
    DensityMatrix {
        basis: basis.clone(),
        elements: rho,
    }
}

//! Brute-force reference: direct integration of `d|rho>>/dz = L(z) |rho>>`
//! with the 8th-order stepper. Shares only the basis and the generator
//! matrices with the product-of-exponentials path.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{devectorize, vectorize, DensityMatrix, LiouvilleVector, TwoModeBasis};
use crate::linalg::{CMatrix, ZERO};
use crate::ode::Dop853;
use crate::superop::{coherent_part, dissipator, CouplerParams, Superoperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
        }
    }
}

/// `L(z) = coherent + gamma(z) * dissipator`, kept as two fixed matrices.
#[derive(Debug, Clone)]
pub struct LindbladOracle {
    params: CouplerParams,
    coherent: Superoperator,
    dissipator: Superoperator,
    opts: OracleOptions,
}

impl LindbladOracle {
    pub fn new(params: &CouplerParams, basis: &TwoModeBasis, opts: OracleOptions) -> Self {
        Self {
            params: *params,
            coherent: coherent_part(params.kappa, basis),
            dissipator: dissipator(basis),
            opts,
        }
    }

    pub fn basis(&self) -> &TwoModeBasis {
        self.coherent.basis()
    }

    fn stepper(&self) -> Dop853 {
        Dop853::new(self.opts.rtol, self.opts.atol)
    }

    /// Integrates a raw Liouville vector over `[z0, z1]`, reporting the state
    /// at each of `outputs`.
    pub fn evolve_raw(
        &self,
        v: &[Complex64],
        z0: f64,
        z1: f64,
        outputs: &[f64],
        mut on_output: impl FnMut(f64, &[Complex64]),
    ) -> Result<Vec<Complex64>> {
        let n = self.coherent.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        let mut tmp = vec![ZERO; n];
        let run = self.stepper().solve(
            |z, y, dy| {
                self.coherent.apply_into(y, dy);
                let g = self.params.gamma(z);
                if g != 0.0 {
                    self.dissipator.apply_into(y, &mut tmp);
                    for (d, t) in dy.iter_mut().zip(&tmp) {
                        *d += t * g;
                    }
                }
            },
            z0,
            v,
            z1,
            outputs,
            |z, y| on_output(z, y),
        )?;
        Ok(run.y)
    }

    pub fn propagate(&self, rho0: &DensityMatrix, z: f64) -> Result<DensityMatrix> {
        check_basis(self.basis(), rho0.basis())?;
        let v = vectorize(rho0);
        let out = self.evolve_raw(v.data().as_slice(), 0.0, z, &[], |_, _| {})?;
        Ok(devectorize(&LiouvilleVector::new(
            self.basis(),
            DVector::from_vec(out),
        )?))
    }

    /// States at each of the ascending `z_samples`.
    pub fn trajectory(&self, rho0: &DensityMatrix, z_samples: &[f64]) -> Result<Vec<DensityMatrix>> {
        check_basis(self.basis(), rho0.basis())?;
        check_ascending(z_samples)?;
        let v = vectorize(rho0);
        let mut states = Vec::with_capacity(z_samples.len());
        let mut sampled: Vec<(f64, Vec<Complex64>)> = Vec::new();
        let z_end = z_samples.last().copied().unwrap_or(0.0);
        self.evolve_raw(v.data().as_slice(), 0.0, z_end, z_samples, |z, y| {
            sampled.push((z, y.to_vec()))
        })?;
        let mut it = sampled.into_iter().peekable();
        for &z in z_samples {
            let data = if z <= 0.0 {
                v.data().clone()
            } else {
                while it.peek().is_some_and(|(zz, _)| *zz < z) {
                    it.next();
                }
                let (_, y) = it.peek().ok_or_else(|| {
                    Error::NoConvergence(format!("oracle produced no sample at z = {z}"))
                })?;
                DVector::from_column_slice(y)
            };
            states.push(devectorize(&LiouvilleVector::new(self.basis(), data)?));
        }
        Ok(states)
    }

    /// Propagator over `[z0, z1]`, one column per canonical basis vector,
    /// columns integrated in parallel.
    pub fn propagator_between(&self, z0: f64, z1: f64) -> Result<CMatrix> {
        let n = self.coherent.dim();
        let columns: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![ZERO; n];
                e[k] = Complex64::new(1.0, 0.0);
                self.evolve_raw(&e, z0, z1, &[], |_, _| {})
            })
            .collect::<Result<_>>()?;
        Ok(CMatrix::from_fn(n, n, |r, c| columns[c][r]))
    }
}

fn check_basis(expected: &TwoModeBasis, found: &TwoModeBasis) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            expected: expected.dim(),
            found: found.dim(),
        });
    }
    Ok(())
}

pub(crate) fn check_ascending(z: &[f64]) -> Result<()> {
    if z.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || z.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "sample positions must be finite, non-negative and ascending".into(),
        ));
    }
    Ok(())
}

pub fn oracle_propagate(
    params: &CouplerParams,
    rho0: &DensityMatrix,
    z: f64,
    opts: OracleOptions,
) -> Result<DensityMatrix> {
    LindbladOracle::new(params, rho0.basis(), opts).propagate(rho0, z)
}

/// One-period propagator `U(T)` by direct integration.
pub fn oracle_monodromy(
    params: &CouplerParams,
    basis: &TwoModeBasis,
    opts: OracleOptions,
) -> Result<Superoperator> {
    let m = LindbladOracle::new(params, basis, opts).propagator_between(0.0, params.period())?;
    Superoperator::from_dense(basis, "oracle-monodromy", m)
}

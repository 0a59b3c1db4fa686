//! Liouville-space generators of the lossy coupler.
//!
//! Left and right multiplication by ladder operators are written as
//!
//! ```text
//! L_k^- A = a_k A,   L_k^+ A = a_k^dag A,   R_k^- A = A a_k^dag,   R_k^+ A = A a_k
//! ```
//!
//! so that `Lj+Lk-` multiplies by `a_j^dag a_k` from the left, `Rj+Rk-`
//! multiplies by `a_k^dag a_j` from the right and `Lj-Rk-` is the jump
//! `A -> a_j A a_k^dag`. The coupler Liouvillian is
//!
//! ```text
//! -i kappa (L1+L2- + L2+L1- - R1+R2- - R2+R1-) + 2 gamma L1-R1- - gamma (R1+R1- + L1+L1-)
//! ```
//!
//! Matrices are assembled by acting on every dyad `|i><j|` directly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{LiouvilleVector, TwoModeBasis};
use crate::linalg::{CMatrix, ZERO};
use crate::loss::{profile_for_target, Loss, LossProfile};

/// Liouville dimension below which matrices are stored densely.
pub const DENSE_BELOW: usize = 400;

/// Which single-mode ladder operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ladder {
    Raise,
    Lower,
}

/// Action of `a_mode` or `a_mode^dag` on basis state `i`. `None` for a zero
/// result or a result above the truncation.
fn ladder(basis: &TwoModeBasis, i: usize, mode: usize, op: Ladder) -> Option<(usize, f64)> {
    let (m, h) = basis.state(i);
    let occ = if mode == 1 { m } else { h };
    match op {
        Ladder::Lower => {
            if occ == 0 {
                return None;
            }
            let (m2, h2) = if mode == 1 { (m - 1, h) } else { (m, h - 1) };
            Some((basis.index(m2, h2)?, (occ as f64).sqrt()))
        }
        Ladder::Raise => {
            let (m2, h2) = if mode == 1 { (m + 1, h) } else { (m, h + 1) };
            Some((basis.index(m2, h2)?, ((occ + 1) as f64).sqrt()))
        }
    }
}

/// `a_j^dag a_k |i>`.
fn hop(basis: &TwoModeBasis, i: usize, to: usize, from: usize) -> Option<(usize, f64)> {
    let (mid, c1) = ladder(basis, i, from, Ladder::Lower)?;
    let (out, c2) = ladder(basis, mid, to, Ladder::Raise)?;
    Some((out, c1 * c2))
}

/// Symbolic name of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratorLabel {
    /// `Lj+Lk-`: left multiplication by `a_j^dag a_k`.
    Left { to: u8, from: u8 },
    /// `Rj+Rk-`: right multiplication by `a_k^dag a_j`.
    Right { raise: u8, lower: u8 },
    /// `Lj-Rk-`: `A -> a_j A a_k^dag`.
    Jump { left: u8, right: u8 },
    /// `L1+L1- + L2+L2-`.
    NumberLeft,
    /// `R1+R1- + R2+R2-`.
    NumberRight,
}

impl fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorLabel::Left { to, from } => write!(f, "L{to}+L{from}-"),
            GeneratorLabel::Right { raise, lower } => write!(f, "R{raise}+R{lower}-"),
            GeneratorLabel::Jump { left, right } => write!(f, "L{left}-R{right}-"),
            GeneratorLabel::NumberLeft => write!(f, "ML"),
            GeneratorLabel::NumberRight => write!(f, "MR"),
        }
    }
}

impl FromStr for GeneratorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownLabel(s.to_string());
        match s {
            "ML" => return Ok(GeneratorLabel::NumberLeft),
            "MR" => return Ok(GeneratorLabel::NumberRight),
            _ => {}
        }
        let b = s.as_bytes();
        if b.len() != 6 {
            return Err(unknown());
        }
        let mode = |c: u8| match c {
            b'1' => Ok(1u8),
            b'2' => Ok(2u8),
            _ => Err(unknown()),
        };
        let (i, j) = (mode(b[1])?, mode(b[4])?);
        match (b[0], b[2], b[3], b[5]) {
            (b'L', b'+', b'L', b'-') => Ok(GeneratorLabel::Left { to: i, from: j }),
            (b'R', b'+', b'R', b'-') => Ok(GeneratorLabel::Right { raise: i, lower: j }),
            (b'L', b'-', b'R', b'-') => Ok(GeneratorLabel::Jump { left: i, right: j }),
            _ => Err(unknown()),
        }
    }
}

/// Compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl Csr {
    fn from_entries(n: usize, entries: &BTreeMap<(usize, usize), Complex64>) -> Self {
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (&(r, c), &v) in entries {
            if v == ZERO {
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            values.push(v);
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.values[k];
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(CMatrix),
    Sparse(Csr),
}

/// A linear map on vectorised density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    basis: TwoModeBasis,
    label: String,
    storage: Storage,
}

impl Superoperator {
    fn from_entries(
        basis: &TwoModeBasis,
        label: String,
        entries: &BTreeMap<(usize, usize), Complex64>,
    ) -> Self {
        let n = basis.liouville_dim();
        let storage = if n < DENSE_BELOW {
            let mut m = CMatrix::zeros(n, n);
            for (&(r, c), &v) in entries {
                m[(r, c)] = v;
            }
            Storage::Dense(m)
        } else {
            Storage::Sparse(Csr::from_entries(n, entries))
        };
        Self {
            basis: basis.clone(),
            label,
            storage,
        }
    }

    /// Wraps a dense matrix, checking its shape against the basis.
    pub fn from_dense(basis: &TwoModeBasis, label: impl Into<String>, m: CMatrix) -> Result<Self> {
        let n = basis.liouville_dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows().max(m.ncols()),
            });
        }
        Ok(Self {
            basis: basis.clone(),
            label: label.into(),
            storage: Storage::Dense(m),
        })
    }

    pub fn basis(&self) -> &TwoModeBasis {
        &self.basis
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.basis.liouville_dim()
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn to_dense(&self) -> CMatrix {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    pub fn into_dense(self) -> CMatrix {
        match self.storage {
            Storage::Dense(m) => m,
            Storage::Sparse(s) => s.to_dense(),
        }
    }

    /// `y = S x` on raw slices of length `dim()`.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        match &self.storage {
            Storage::Dense(m) => {
                let n = m.nrows();
                for (r, yr) in y.iter_mut().enumerate().take(n) {
                    let mut acc = ZERO;
                    for (c, xc) in x.iter().enumerate() {
                        acc += m[(r, c)] * xc;
                    }
                    *yr = acc;
                }
            }
            Storage::Sparse(s) => s.matvec(x, y),
        }
    }

    pub fn apply(&self, v: &LiouvilleVector) -> Result<LiouvilleVector> {
        if v.basis() != &self.basis {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.data().len(),
            });
        }
        let mut out = vec![ZERO; self.dim()];
        self.apply_into(v.data().as_slice(), &mut out);
        LiouvilleVector::new(&self.basis, DVector::from_vec(out))
    }
}

fn entries_for(basis: &TwoModeBasis, label: GeneratorLabel) -> BTreeMap<(usize, usize), Complex64> {
    let d = basis.dim();
    let mut entries = BTreeMap::new();
    let mut put = |row: usize, col: usize, v: f64| {
        *entries.entry((row, col)).or_insert(ZERO) += Complex64::new(v, 0.0);
    };
    for j in 0..d {
        for i in 0..d {
            let col = basis.dyad_index(i, j);
            match label {
                GeneratorLabel::Left { to, from } => {
                    if let Some((i2, c)) = hop(basis, i, to as usize, from as usize) {
                        put(basis.dyad_index(i2, j), col, c);
                    }
                }
                GeneratorLabel::Right { raise, lower } => {
                    // |i><j| a_lower^dag a_raise = |i> (a_raise^dag a_lower |j>)^dag
                    if let Some((j2, c)) = hop(basis, j, raise as usize, lower as usize) {
                        put(basis.dyad_index(i, j2), col, c);
                    }
                }
                GeneratorLabel::Jump { left, right } => {
                    let l = ladder(basis, i, left as usize, Ladder::Lower);
                    let r = ladder(basis, j, right as usize, Ladder::Lower);
                    if let (Some((i2, c1)), Some((j2, c2))) = (l, r) {
                        put(basis.dyad_index(i2, j2), col, c1 * c2);
                    }
                }
                GeneratorLabel::NumberLeft => {
                    let n = basis.photons(i);
                    if n > 0 {
                        put(col, col, n as f64);
                    }
                }
                GeneratorLabel::NumberRight => {
                    let n = basis.photons(j);
                    if n > 0 {
                        put(col, col, n as f64);
                    }
                }
            }
        }
    }
    entries
}

/// Matrix of the generator named `label` (e.g. `"L1+L2-"`, `"L1-R1-"`, `"ML"`).
pub fn generator(label: &str, basis: &TwoModeBasis) -> Result<Superoperator> {
    let parsed: GeneratorLabel = label.parse()?;
    Ok(generator_for(parsed, basis))
}

pub fn generator_for(label: GeneratorLabel, basis: &TwoModeBasis) -> Superoperator {
    Superoperator::from_entries(basis, label.to_string(), &entries_for(basis, label))
}

fn combination(
    basis: &TwoModeBasis,
    label: String,
    terms: &[(Complex64, GeneratorLabel)],
) -> Superoperator {
    let mut total: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for &(w, g) in terms {
        for (k, v) in entries_for(basis, g) {
            *total.entry(k).or_insert(ZERO) += w * v;
        }
    }
    Superoperator::from_entries(basis, label, &total)
}

/// Coupling constant and loss model of the coupler. Loss acts on waveguide 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerParams {
    pub kappa: f64,
    pub loss: Loss,
}

impl CouplerParams {
    pub fn new(kappa: f64, loss: Loss) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be > 0")));
        }
        Ok(Self { kappa, loss })
    }

    /// Modulated coupler with peak loss `gamma_max * kappa` and frequency
    /// `omega * kappa`, the minimum loss held at `min_ratio` of the peak.
    pub fn modulated(kappa: f64, gamma_max: f64, omega: f64, min_ratio: f64) -> Result<Self> {
        let unit = profile_for_target(gamma_max, omega, min_ratio)?;
        let profile = LossProfile::new(unit.b, unit.beta, omega * kappa)?.with_scale(kappa);
        Self::new(kappa, Loss::Modulated(profile))
    }

    pub fn gamma(&self, z: f64) -> f64 {
        self.loss.rate(z)
    }

    pub fn period(&self) -> f64 {
        self.loss.period()
    }
}

const L12: GeneratorLabel = GeneratorLabel::Left { to: 1, from: 2 };
const L21: GeneratorLabel = GeneratorLabel::Left { to: 2, from: 1 };
const L11: GeneratorLabel = GeneratorLabel::Left { to: 1, from: 1 };
const L22: GeneratorLabel = GeneratorLabel::Left { to: 2, from: 2 };
const R12: GeneratorLabel = GeneratorLabel::Right { raise: 1, lower: 2 };
const R21: GeneratorLabel = GeneratorLabel::Right { raise: 2, lower: 1 };
const R11: GeneratorLabel = GeneratorLabel::Right { raise: 1, lower: 1 };
const R22: GeneratorLabel = GeneratorLabel::Right { raise: 2, lower: 2 };
const J11: GeneratorLabel = GeneratorLabel::Jump { left: 1, right: 1 };

/// `-i kappa (L1+L2- + L2+L1- - R1+R2- - R2+R1-)`.
pub fn coherent_part(kappa: f64, basis: &TwoModeBasis) -> Superoperator {
    let w = Complex64::new(0.0, -kappa);
    combination(
        basis,
        "coherent".into(),
        &[(w, L12), (w, L21), (-w, R12), (-w, R21)],
    )
}

/// Dissipator per unit loss rate: `2 L1-R1- - R1+R1- - L1+L1-`.
pub fn dissipator(basis: &TwoModeBasis) -> Superoperator {
    let one = Complex64::new(1.0, 0.0);
    combination(
        basis,
        "dissipator".into(),
        &[(one * 2.0, J11), (-one, R11), (-one, L11)],
    )
}

/// Liouvillian at a fixed loss rate.
pub fn liouvillian(params: &CouplerParams, gamma: f64, basis: &TwoModeBasis) -> Superoperator {
    let w = Complex64::new(0.0, -params.kappa);
    let g = Complex64::new(gamma, 0.0);
    combination(
        basis,
        format!("liouvillian(gamma={gamma})"),
        &[
            (w, L12),
            (w, L21),
            (-w, R12),
            (-w, R21),
            (g * 2.0, J11),
            (-g, R11),
            (-g, L11),
        ],
    )
}

/// One entry of the commutator check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutatorCheck {
    pub relation: String,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub n_max: usize,
    pub checks: Vec<CommutatorCheck>,
    pub max_residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Verifies the algebra behind the product expansion on the interior sectors
/// (both photon numbers at most `n_max - 1`).
pub fn commutator_table(basis: &TwoModeBasis) -> Result<CommutatorReport> {
    let n_max = basis.n_max();
    if n_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "commutator table needs n_max >= 2, got {n_max}"
        )));
    }
    let g = |l: GeneratorLabel| generator_for(l, basis).into_dense();
    let one = Complex64::new(1.0, 0.0);
    let interior: Vec<usize> = (0..basis.liouville_dim())
        .filter(|&k| {
            let (a, b) = basis.dyad_sector(k);
            a < n_max && b < n_max
        })
        .collect();
    let residual = |m: &CMatrix| {
        let mut worst: f64 = 0.0;
        for &r in &interior {
            for &c in &interior {
                worst = worst.max(m[(r, c)].norm());
            }
        }
        worst
    };
    let comm = |a: &CMatrix, b: &CMatrix| a * b - b * a;

    let kp_l = g(L12);
    let km_l = g(L21);
    let k0_l = g(L11) - g(L22);
    let kp_r = g(R12);
    let km_r = g(R21);
    let k0_r = g(R11) - g(R22);
    let ml = g(GeneratorLabel::NumberLeft);
    let mr = g(GeneratorLabel::NumberRight);
    let jumps: Vec<(String, CMatrix)> = [(1u8, 1u8), (2, 2), (2, 1), (1, 2)]
        .iter()
        .map(|&(l, r)| {
            let lab = GeneratorLabel::Jump { left: l, right: r };
            (lab.to_string(), g(lab))
        })
        .collect();

    let mut checks = Vec::new();
    let mut push = |relation: String, m: CMatrix| {
        checks.push(CommutatorCheck {
            relation,
            residual: residual(&m),
        });
    };
    for (side, kp, km, k0) in [("L", &kp_l, &km_l, &k0_l), ("R", &kp_r, &km_r, &k0_r)] {
        push(format!("[K0{side}, K+{side}] = 2 K+{side}"), comm(k0, kp) - kp * (one * 2.0));
        push(format!("[K0{side}, K-{side}] = -2 K-{side}"), comm(k0, km) + km * (one * 2.0));
        push(format!("[K+{side}, K-{side}] = K0{side}"), comm(kp, km) - k0);
    }
    for (ln, l) in [("K+L", &kp_l), ("K-L", &km_l), ("K0L", &k0_l), ("ML", &ml)] {
        for (rn, r) in [("K+R", &kp_r), ("K-R", &km_r), ("K0R", &k0_r), ("MR", &mr)] {
            push(format!("[{ln}, {rn}] = 0"), comm(l, r));
        }
    }
    for a in 0..jumps.len() {
        for b in a + 1..jumps.len() {
            push(
                format!("[{}, {}] = 0", jumps[a].0, jumps[b].0),
                comm(&jumps[a].1, &jumps[b].1),
            );
        }
    }
    for (name, j) in &jumps {
        push(format!("[ML, {name}] = -{name}"), comm(&ml, j) + j);
        push(format!("[MR, {name}] = -{name}"), comm(&mr, j) + j);
    }

    let threshold = 1e-12;
    let max_residual = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(CommutatorReport {
        n_max,
        checks,
        max_residual,
        threshold,
        passed: max_residual <= threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{vectorize, DensityMatrix};
    use crate::linalg::{eigenvalues, max_abs};
    use crate::loss::LossProfile;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Hilbert-space matrix of `a_mode`.
    fn annihilator(basis: &TwoModeBasis, mode: usize) -> CMatrix {
        let d = basis.dim();
        CMatrix::from_fn(d, d, |r, col| {
            let (m, h) = basis.state(col);
            let (m2, h2) = basis.state(r);
            let ok = if mode == 1 {
                m >= 1 && m2 == m - 1 && h2 == h
            } else {
                h >= 1 && h2 == h - 1 && m2 == m
            };
            if ok {
                c(((if mode == 1 { m } else { h }) as f64).sqrt())
            } else {
                ZERO
            }
        })
    }

    /// vec(A X B) = (B^T kron A) vec(X).
    fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    fn oracle(basis: &TwoModeBasis, label: &str) -> CMatrix {
        let d = basis.dim();
        let id = CMatrix::identity(d, d);
        let a = [annihilator(basis, 1), annihilator(basis, 2)];
        let ad = [a[0].adjoint(), a[1].adjoint()];
        let md = |x: u8| (x - 1) as usize;
        match label.parse::<GeneratorLabel>().unwrap() {
            GeneratorLabel::Left { to, from } => kron(&id, &(&ad[md(to)] * &a[md(from)])),
            GeneratorLabel::Right { raise, lower } => {
                kron(&(&ad[md(lower)] * &a[md(raise)]).transpose(), &id)
            }
            GeneratorLabel::Jump { left, right } => {
                kron(&ad[md(right)].transpose(), &a[md(left)])
            }
            GeneratorLabel::NumberLeft => {
                kron(&id, &(&ad[0] * &a[0] + &ad[1] * &a[1]))
            }
            GeneratorLabel::NumberRight => {
                kron(&(&ad[0] * &a[0] + &ad[1] * &a[1]).transpose(), &id)
            }
        }
    }

    const LABELS: [&str; 14] = [
        "L1+L1-", "L1+L2-", "L2+L1-", "L2+L2-", "R1+R1-", "R1+R2-", "R2+R1-", "R2+R2-",
        "L1-R1-", "L1-R2-", "L2-R1-", "L2-R2-", "ML", "MR",
    ];

    #[test]
    fn matches_kronecker_construction() {
        for n_max in [1, 3, 5] {
            let basis = TwoModeBasis::new(n_max);
            for label in LABELS {
                let s = generator(label, &basis).unwrap();
                assert_eq!(s.label(), label);
                let diff = max_abs(&(s.to_dense() - oracle(&basis, label)));
                assert!(diff < 1e-14, "{label} n_max={n_max}: {diff}");
            }
        }
    }

    #[test]
    fn unknown_labels_rejected() {
        let basis = TwoModeBasis::new(2);
        for bad in ["", "L3+L1-", "L1+R2-", "X", "L1+L2+", "ml"] {
            assert!(matches!(generator(bad, &basis), Err(Error::UnknownLabel(_))), "{bad}");
        }
    }

    #[test]
    fn documented_actions() {
        let basis = TwoModeBasis::new(3);
        let d = basis.dim();
        let dyad = |p: (usize, usize), q: (usize, usize)| {
            basis.dyad_index(basis.index(p.0, p.1).unwrap(), basis.index(q.0, q.1).unwrap())
        };
        let n11 = generator("L1+L1-", &basis).unwrap().to_dense();
        let k = dyad((1, 0), (1, 0));
        assert_eq!(n11[(k, k)], c(1.0));
        let jump = generator("L1-R1-", &basis).unwrap().to_dense();
        assert_eq!(jump[(dyad((0, 0), (0, 0)), k)], c(1.0));
        let hop = generator("L1+L2-", &basis).unwrap().to_dense();
        let from = dyad((0, 2), (0, 2));
        let col = hop.column(from);
        assert!((col[dyad((1, 1), (0, 2))] - c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(col.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(d, 10);
    }

    #[test]
    fn sparse_storage_for_large_bases() {
        let small = generator("ML", &TwoModeBasis::new(3)).unwrap();
        assert!(!small.is_sparse());
        let big_basis = TwoModeBasis::new(6);
        let big = generator("L1+L2-", &big_basis).unwrap();
        assert!(big.is_sparse());
        assert!(max_abs(&(big.to_dense() - oracle(&big_basis, "L1+L2-"))) < 1e-14);
    }

    fn params(gamma: f64) -> CouplerParams {
        CouplerParams::new(1.0, Loss::constant(gamma, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn vacuum_is_stationary() {
        let basis = TwoModeBasis::new(3);
        let l = liouvillian(&params(0.7), 0.7, &basis);
        let vac = vectorize(&DensityMatrix::fock(&basis, 0, 0).unwrap());
        let out = l.apply(&vac).unwrap();
        assert!(out.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn refill_matrix_element() {
        let basis = TwoModeBasis::new(3);
        let gamma = 0.37;
        let l = liouvillian(&params(gamma), gamma, &basis).to_dense();
        let one = basis.index(1, 0).unwrap();
        let elem = l[(basis.dyad_index(0, 0), basis.dyad_index(one, one))];
        assert!((elem - c(2.0 * gamma)).norm() < 1e-15);
        let d = basis.dim();
        let id = CMatrix::identity(d, d);
        let a1 = annihilator(&basis, 1);
        let a2 = annihilator(&basis, 2);
        let h = (&a1.adjoint() * &a2 + &a2.adjoint() * &a1) * c(1.0);
        let n1 = &a1.adjoint() * &a1;
        let kron_l = (kron(&id, &h) - kron(&h.transpose(), &id)) * Complex64::new(0.0, -1.0)
            + kron(&a1.adjoint().transpose(), &a1) * c(2.0 * gamma)
            - (kron(&n1.transpose(), &id) + kron(&id, &n1)) * c(gamma);
        assert!(max_abs(&(l - kron_l)) < 1e-14);
    }

    #[test]
    fn parts_sum_to_liouvillian() {
        let basis = TwoModeBasis::new(4);
        let p = params(0.3);
        let whole = liouvillian(&p, 0.3, &basis).to_dense();
        let parts = coherent_part(1.0, &basis).to_dense() + dissipator(&basis).to_dense() * c(0.3);
        assert!(max_abs(&(whole - parts)) < 1e-15);
    }

    #[test]
    fn block_lower_triangular_exactly() {
        let basis = TwoModeBasis::new(4);
        let mut mats: Vec<CMatrix> = LABELS
            .iter()
            .map(|l| generator(l, &basis).unwrap().to_dense())
            .collect();
        mats.push(liouvillian(&params(1.3), 1.3, &basis).to_dense());
        for m in &mats {
            for col in 0..basis.liouville_dim() {
                let (a, b) = basis.dyad_sector(col);
                for row in 0..basis.liouville_dim() {
                    let (a2, b2) = basis.dyad_sector(row);
                    if a2 > a || b2 > b {
                        assert_eq!(m[(row, col)], ZERO);
                    }
                }
            }
        }
    }

    #[test]
    fn lossless_spectrum_is_imaginary() {
        let basis = TwoModeBasis::new(3);
        let l = liouvillian(&params(0.0), 0.0, &basis).to_dense();
        assert!(max_abs(&(&l + l.adjoint())) < 1e-15);
        for ev in eigenvalues(&l) {
            assert!(ev.re.abs() < 1e-12, "{ev}");
        }
    }

    #[test]
    fn commutators_hold() {
        for n_max in [2, 3, 4] {
            let report = commutator_table(&TwoModeBasis::new(n_max)).unwrap();
            assert!(report.passed, "{report:?}");
            assert!(report.checks.len() > 20);
        }
        assert!(commutator_table(&TwoModeBasis::new(1)).is_err());
    }

    #[test]
    fn modulated_params() {
        let p = CouplerParams::new(1.0, Loss::Modulated(LossProfile::new(0.3, 1.0, 2.0).unwrap()))
            .unwrap();
        assert!((p.period() - std::f64::consts::PI).abs() < 1e-15);
        assert!(CouplerParams::new(0.0, p.loss).is_err());
    }

    #[test]
    fn modulated_scales_with_kappa() {
        let unit = CouplerParams::modulated(1.0, 0.25, 2.0, 1e-3).unwrap();
        let fast = CouplerParams::modulated(2.0, 0.25, 2.0, 1e-3).unwrap();
        assert!((fast.loss.peak() - 0.5).abs() < 1e-12);
        assert!((fast.period() - 0.5 * unit.period()).abs() < 1e-15);
        assert!((fast.gamma(0.3) - 2.0 * unit.gamma(0.6)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn trace_is_left_null(gamma in 0.0f64..5.0, kappa in 0.1f64..3.0) {
            let basis = TwoModeBasis::new(3);
            let p = CouplerParams::new(kappa, Loss::constant(gamma, 1.0).unwrap()).unwrap();
            let l = liouvillian(&p, gamma, &basis).to_dense();
            let id = LiouvilleVector::identity(&basis);
            let row = id.data().transpose() * &l;
            prop_assert!(row.iter().all(|z| z.norm() < 1e-13));
        }
    }
}

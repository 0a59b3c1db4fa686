//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, Matrix2, Schur};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Induced 1-norm (max column sum).
pub fn norm1(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn pade_low(a: &CMatrix, coeffs: &[f64]) -> (CMatrix, CMatrix) {
    // U = A * sum_odd b_k A^(k-1), V = sum_even b_k A^k
    let n = a.nrows();
    let a2 = a * a;
    let mut power = CMatrix::identity(n, n);
    let mut u_inner = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for pair in coeffs.chunks(2) {
        v += &power * Complex64::from(pair[0]);
        u_inner += &power * Complex64::from(pair[1]);
        power = &power * &a2;
    }
    (a * u_inner, v)
}

fn pade_13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let b = |k: usize| Complex64::from(PADE_13[k]);
    let id = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = a * (inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let inner_v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + id * b(0);
    (u, v)
}

fn pade_solve(u: CMatrix, v: CMatrix) -> CMatrix {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Pade denominator is singular for an exponential-ready argument")
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants (Higham 2005, degrees 3..13).
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return CMatrix::identity(n, n);
    }
    for (m, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            let (u, v) = pade_low(a, coeffs);
            return pade_solve(u, v);
        }
    }
    let s = ((norm / THETA_13).log2().ceil()).max(0.0) as i32;
    let scaled = a * Complex64::from(0.5f64.powi(s));
    let (u, v) = pade_13(&scaled);
    let mut x = pade_solve(u, v);
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

/// `a^k` by repeated squaring.
pub fn matrix_power(a: &CMatrix, mut k: u64) -> CMatrix {
    let n = a.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Eigenvalues of a general complex matrix via the complex Schur form.
///
/// The QR iteration stalls on spectra that are symmetric about the origin
/// (the lossless Liouvillian is one), so a failed attempt is retried on
/// `A + s I` for a few complex shifts `s` and the shift is taken back out.
pub fn eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    let scale = norm1(a).max(f64::MIN_POSITIVE);
    let shifts = [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.137, 0.071),
        Complex64::new(-0.29, 0.53),
        Complex64::new(0.71, -0.41),
    ];
    for s in shifts {
        let shift = s * scale;
        let shifted = a + CMatrix::identity(n, n) * shift;
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 200 * n.max(10)) {
            let (_, t) = schur.unpack();
            return (0..n).map(|i| t[(i, i)] - shift).collect();
        }
    }
    panic!("complex Schur iteration did not converge for a {n}x{n} matrix")
}

/// Eigenvalues of a 2x2 complex matrix from the characteristic polynomial,
/// using the cancellation-free form for the smaller root.
pub fn eigenvalues_2x2(m: &Matrix2<Complex64>) -> [Complex64; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let half = tr * 0.5;
    let disc = (half * half - det).sqrt();
    let big = if (half + disc).norm() >= (half - disc).norm() {
        half + disc
    } else {
        half - disc
    };
    if big.norm() == 0.0 {
        return [ZERO, ZERO];
    }
    [big, det / big]
}

/// Smallest eigenvalue of a Hermitian matrix (the anti-Hermitian part is ignored).
pub fn min_hermitian_eigenvalue(a: &CMatrix) -> f64 {
    let h = (a + a.adjoint()) * Complex64::from(0.5);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Greedy nearest matching of two multisets of complex numbers. Returns the
/// largest matched distance, or infinity if the sizes differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut pool: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    // match the most isolated values first
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| b_gap(a, i).partial_cmp(&b_gap(a, j)).unwrap().reverse());
    for i in order {
        let (best, d) = pool
            .iter()
            .enumerate()
            .map(|(k, z)| (k, (a[i] - z).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        worst = worst.max(d);
        pool.swap_remove(best);
    }
    worst
}

fn b_gap(a: &[Complex64], i: usize) -> f64 {
    a.iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, z)| (a[i] - z).norm())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp(t [[0,-i],[-i,0]]) = [[cos t, -i sin t], [-i sin t, cos t]]
        for &t in &[0.01, 0.7, 3.0, 25.0] {
            let a = CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -t), c(0.0, -t), ZERO]);
            let e = expm(&a);
            let want =
                CMatrix::from_row_slice(2, 2, &[c(t.cos(), 0.0), c(0.0, -t.sin()), c(0.0, -t.sin()), c(t.cos(), 0.0)]);
            assert!(max_abs(&(e - want)) < 1e-13 * (1.0 + t), "t = {t}");
        }
    }

    #[test]
    fn expm_of_nilpotent_is_finite_series() {
        let mut a = CMatrix::zeros(4, 4);
        a[(0, 1)] = c(3.0, 1.0);
        a[(1, 2)] = c(-2.0, 0.5);
        a[(2, 3)] = c(0.0, 4.0);
        let a2 = &a * &a;
        let a3 = &a2 * &a;
        let series = CMatrix::identity(4, 4) + &a + &a2 * c(0.5, 0.0) + &a3 * c(1.0 / 6.0, 0.0);
        let e = expm(&a);
        assert!(max_abs(&(e - &series)) < 1e-12 * max_abs(&series));
    }

    #[test]
    fn expm_inverse_property() {
        let a = CMatrix::from_fn(5, 5, |i, j| c((i as f64 - 2.0 * j as f64) * 0.3, (i * j) as f64 * 0.1));
        let p = expm(&a) * expm(&(-&a));
        assert!(max_abs(&(p - CMatrix::identity(5, 5))) < 1e-10);
    }

    #[test]
    fn power_by_squaring() {
        let a = CMatrix::from_fn(3, 3, |i, j| c(0.1 * (i + j) as f64, 0.05 * i as f64));
        let mut naive = CMatrix::identity(3, 3);
        for _ in 0..13 {
            naive = &naive * &a;
        }
        assert!(max_abs(&(matrix_power(&a, 13) - naive)) < 1e-14);
        assert_eq!(matrix_power(&a, 0), CMatrix::identity(3, 3));
    }

    #[test]
    fn eig_2x2_matches_schur() {
        let m = Matrix2::new(c(-0.4, 0.1), c(0.0, -1.0), c(0.3, -1.0), c(0.2, 0.0));
        let mine = eigenvalues_2x2(&m);
        let dense = CMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
        let theirs = eigenvalues(&dense);
        assert!(multiset_distance(&mine, &theirs) < 1e-13);
    }

    #[test]
    fn eigenvalues_of_symmetric_spectrum() {
        // spectrum {-2i, 0, 2i}, which stalls the unshifted iteration
        let s2 = 2f64.sqrt();
        let h = CMatrix::from_row_slice(3, 3, &[ZERO, c(s2, 0.0), ZERO, c(s2, 0.0), ZERO, c(s2, 0.0), ZERO, c(s2, 0.0), ZERO]);
        let ev = eigenvalues(&(h * c(0.0, -1.0)));
        let want = [c(0.0, -2.0), ZERO, c(0.0, 2.0)];
        assert!(multiset_distance(&ev, &want) < 1e-13, "{ev:?}");
    }

    #[test]
    fn multiset_matching() {
        let a = [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        let b = [c(0.0, 1.0), c(1.0, 1e-9), c(1.0, 0.0)];
        assert!(multiset_distance(&a, &b) < 2e-9);
        let d = [c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)];
        assert!(multiset_distance(&a, &d) > 0.5);
    }
}

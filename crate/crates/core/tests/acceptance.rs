//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL verdict
//! line (written straight to stdout so it shows up even when captured), and
//! the test fails if any criterion does.
//!
//! Reference values come from oracles defined here: a fixed-step RK4
//! integration of the master equation in Hilbert space, the analytic lossless
//! coefficients, trapezoidal averages of the loss profile, and the explicit
//! closed-form loss rate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptcoupler::floquet::{
    classify_pt, monodromy_2x2, monodromy_full, occupation_trajectories, phase_diagram,
    propagate_state, sector_spectra, static_threshold,
    strand_splitting, FloquetOptions, PhaseDiagramSpec, PtPhase, DEFAULT_EPS_SPLIT,
    FAST_STRAND_WINDOW, SLOW_STRAND_WINDOW,
};
use ptcoupler::fock::{random_density_matrix, superposition_state, DensityMatrix, TwoModeBasis};
use ptcoupler::loss::{Loss, DEFAULT_MIN_RATIO};
use ptcoupler::reservoir::{
    coupling_profile, decay_comparison, decay_rate, full_system_comparison, Guide, ReservoirConfig,
};
use ptcoupler::superop::CouplerParams;
use ptcoupler::validate::random_coupler;
use ptcoupler::wei_norman::{integrate_sl2, propagator, WeiNormanOptions};

type CM = DMatrix<C>;

const I: C = C::new(0.0, 1.0);

fn reference_coupler(omega: f64) -> CouplerParams {
    CouplerParams::modulated(1.0, 0.25, omega, DEFAULT_MIN_RATIO).unwrap()
}

// ---------------------------------------------------------------------------
// Oracles

/// Lowering operators of both guides on the truncated two-mode basis.
fn ladder(basis: &TwoModeBasis) -> (CM, CM) {
    let d = basis.dim();
    let mut a1 = CM::zeros(d, d);
    let mut a2 = CM::zeros(d, d);
    for (j, &(m, h)) in basis.states().iter().enumerate() {
        if m > 0 {
            a1[(basis.index(m - 1, h).unwrap(), j)] = C::from((m as f64).sqrt());
        }
        if h > 0 {
            a2[(basis.index(m, h - 1).unwrap(), j)] = C::from((h as f64).sqrt());
        }
    }
    (a1, a2)
}

/// Master equation `d rho/dz = -i[H, rho] + gamma(z) (2 a1 rho a1^+ - {a1^+ a1, rho})`
/// with `H = kappa (a1^+ a2 + a2^+ a1)`, integrated by classical RK4 with
/// Richardson extrapolation over `steps` and `2 steps` equal steps. A few
/// hundred steps per period already put the error near 1e-11.
struct HilbertOracle {
    h: CM,
    a1: CM,
    a1d: CM,
    n1: CM,
    params: CouplerParams,
}

impl HilbertOracle {
    fn new(params: &CouplerParams, basis: &TwoModeBasis) -> Self {
        let (a1, a2) = ladder(basis);
        let a1d = a1.adjoint();
        let a2d = a2.adjoint();
        let h = (&a1d * &a2 + &a2d * &a1) * C::from(params.kappa);
        let n1 = &a1d * &a1;
        Self {
            h,
            a1,
            a1d,
            n1,
            params: *params,
        }
    }

    fn rhs(&self, z: f64, rho: &CM) -> CM {
        let g = self.params.gamma(z);
        let comm = &self.h * rho - rho * &self.h;
        let jump = &self.a1 * rho * &self.a1d * C::from(2.0);
        let anti = &self.n1 * rho + rho * &self.n1;
        comm * (-I) + (jump - anti) * C::from(g)
    }

    fn rk4(&self, rho: &CM, z0: f64, z1: f64, steps: usize) -> CM {
        let dz = (z1 - z0) / steps as f64;
        let mut y = rho.clone();
        for k in 0..steps {
            let z = z0 + k as f64 * dz;
            let k1 = self.rhs(z, &y);
            let k2 = self.rhs(z + 0.5 * dz, &(&y + &k1 * C::from(0.5 * dz)));
            let k3 = self.rhs(z + 0.5 * dz, &(&y + &k2 * C::from(0.5 * dz)));
            let k4 = self.rhs(z + dz, &(&y + &k3 * C::from(dz)));
            y += (k1 + k2 * C::from(2.0) + k3 * C::from(2.0) + k4) * C::from(dz / 6.0);
        }
        y
    }

    fn propagate(&self, rho: &CM, z1: f64, steps: usize) -> CM {
        let coarse = self.rk4(rho, 0.0, z1, steps);
        let fine = self.rk4(rho, 0.0, z1, 2 * steps);
        (fine * C::from(16.0) - coarse) * C::from(1.0 / 15.0)
    }
}

/// Single-photon amplitude monodromy `da/dz = [[-gamma, -i kappa], [-i kappa, 0]] a`
/// by RK4 with Richardson extrapolation; returns the two Lyapunov exponents
/// (descending).
fn amplitude_lyapunov(params: &CouplerParams, steps: usize) -> [f64; 2] {
    let t = params.period();
    let k = C::new(0.0, -params.kappa);
    let f = |z: f64, m: &Matrix2<C>| Matrix2::new(C::from(-params.gamma(z)), k, k, C::from(0.0)) * m;
    let run = |n: usize| {
        let dz = t / n as f64;
        let mut m = Matrix2::<C>::identity();
        for i in 0..n {
            let z = i as f64 * dz;
            let k1 = f(z, &m);
            let k2 = f(z + 0.5 * dz, &(m + k1 * C::from(0.5 * dz)));
            let k3 = f(z + 0.5 * dz, &(m + k2 * C::from(0.5 * dz)));
            let k4 = f(z + dz, &(m + k3 * C::from(dz)));
            m += (k1 + k2 * C::from(2.0) + k3 * C::from(2.0) + k4) * C::from(dz / 6.0);
        }
        m
    };
    let m = (run(2 * steps) * C::from(16.0) - run(steps)) * C::from(1.0 / 15.0);
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = (tr * tr - det * C::from(4.0)).sqrt();
    let mut l = [
        ((tr + disc) * 0.5).norm().ln() / t,
        ((tr - disc) * 0.5).norm().ln() / t,
    ];
    l.sort_by(|a, b| b.partial_cmp(a).unwrap());
    l
}

/// Period-averaged loss by the trapezoidal rule, exponentially accurate for a
/// smooth periodic integrand.
fn trapezoid_mean_loss(params: &CouplerParams, n: usize) -> f64 {
    let t = params.period();
    (0..n).map(|k| params.gamma(t * k as f64 / n as f64)).sum::<f64>() / n as f64
}

/// Distance between two equally sized multisets of complex numbers under the
/// best pairing (exhaustive for small sets, greedy otherwise).
fn multiset_distance(a: &[C], b: &[C]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.partial_cmp(&q.1).unwrap())
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

// ---------------------------------------------------------------------------
// Harness

struct Verdict {
    passed: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self {
            passed,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn detail(mut self, line: impl Into<String>) -> Self {
        self.details.push(line.into());
        self
    }
}

fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn run(id: usize, name: &str, check: impl FnOnce() -> Verdict) -> bool {
    let started = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Verdict::new(false, format!("panicked: {msg}"))
    });
    let secs = started.elapsed().as_secs_f64();
    report(&format!(
        "{} criterion {id:>2} {name}: {} ({secs:.1} s)",
        if verdict.passed { "PASS" } else { "FAIL" },
        verdict.summary
    ));
    for d in &verdict.details {
        report(&format!("      {d}"));
    }
    verdict.passed
}

// ---------------------------------------------------------------------------
// Criteria

fn oracle_equivalence() -> Verdict {
    let basis = TwoModeBasis::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut v = Verdict::new(true, "");
    for omega in [1.5, 2.0] {
        let p = reference_coupler(omega);
        let u = propagator(&p, p.period(), &basis, &WeiNormanOptions::default())
            .unwrap()
            .total();
        let oracle = HilbertOracle::new(&p, &basis);
        let mut w: f64 = 0.0;
        for _ in 0..100 {
            let rho = random_density_matrix(&basis, &mut rng);
            let wn = &u * rho.vectorize().data();
            let want = oracle.propagate(rho.elements(), p.period(), 600);
            // column-major vec: the Frobenius norm of the difference is the
            // 2-norm of the vectorized difference
            let got = CM::from_column_slice(basis.dim(), basis.dim(), wn.as_slice());
            w = w.max((got - want).norm());
        }
        v = v.detail(format!("omega = {omega}: max ||U_WN v - U_oracle v|| = {w:.2e}"));
        worst = worst.max(w);
    }
    v.passed = worst <= 1e-8;
    v.summary = format!("max discrepancy {worst:.2e} over 2 x 100 states (limit 1e-8)");
    v
}

fn labelled_points() -> Verdict {
    let opts = FloquetOptions::default();
    let mut ok = true;
    let mut v = Verdict::new(true, "");
    for (omega, want) in [(1.5, PtPhase::Symmetric), (2.0, PtPhase::Broken)] {
        let r = monodromy_2x2(&reference_coupler(omega), &opts).unwrap();
        let got = classify_pt(&r, DEFAULT_EPS_SPLIT);
        let reference = amplitude_lyapunov(&reference_coupler(omega), 4000);
        ok &= got == want;
        v = v.detail(format!(
            "omega = {omega}: {got} (expected {want}); Lyapunov {:.6} {:.6}, oracle {:.6} {:.6}",
            r.lyapunov[0], r.lyapunov[1], reference[0], reference[1]
        ));
    }
    v.passed = ok;
    v.summary = if ok { "both labels match".into() } else { "label mismatch".into() };
    v
}

fn static_threshold_check() -> Verdict {
    let t = static_threshold(1.0, DEFAULT_EPS_SPLIT, &FloquetOptions::default()).unwrap();
    let rel = (t - 2.0).abs() / 2.0;
    Verdict::new(rel <= 0.01, format!("onset at gamma = {t:.6} kappa, {:.3}% from 2 kappa (limit 1%)", rel * 100.0))
}

fn phase_diagram_checks() -> (Verdict, Verdict) {
    let spec = PhaseDiagramSpec::default();
    let started = Instant::now();
    let d = phase_diagram(&spec).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let thresholds: Vec<(f64, Option<f64>)> = (0..d.omega.len())
        .map(|i| (d.omega[i], d.broken_threshold(i)))
        .collect();
    let band = thresholds
        .iter()
        .filter(|(w, _)| (1.95..=2.05).contains(w))
        .filter_map(|(_, t)| *t)
        .fold(f64::INFINITY, f64::min);
    let high = thresholds
        .iter()
        .filter(|(w, _)| (2.5..=3.0).contains(w))
        .map(|(_, t)| t.unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min);
    let dip = Verdict::new(
        band <= 0.25 && high > 1.0 && d.failures() == 0,
        format!(
            "min broken gamma_bar {band:.4} in omega [1.95, 2.05] (limit 0.25), {} in [2.5, 3] (must exceed 1)",
            if high.is_finite() { format!("{high:.4}") } else { "none broken".into() }
        ),
    )
    .detail(format!(
        "{} x {} grid, {} failed points, {secs:.1} s",
        d.omega.len(),
        d.gamma_max.len(),
        d.failures()
    ));
    let tongue = thresholds
        .iter()
        .filter(|(w, t)| *w < 1.8 && t.is_some_and(|t| t < 1.9))
        .map(|(w, t)| (*w, t.unwrap()))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let tongue = match tongue {
        Some((w, t)) => Verdict::new(true, format!("omega = {w:.3}: threshold {t:.4} < 1.9")),
        None => Verdict::new(false, "no omega < 1.8 with threshold < 1.9"),
    };
    (dip, tongue)
}

fn sum_rule() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let opts = FloquetOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let kappa = rng.random_range(0.5..2.0);
        let p = random_coupler(&mut rng, kappa, DEFAULT_MIN_RATIO).unwrap();
        let r = monodromy_2x2(&p, &opts).unwrap();
        let lhs: f64 = r.lyapunov.iter().sum();
        let rhs = -trapezoid_mean_loss(&p, 20_000);
        let err = (lhs - rhs).abs();
        if err.is_nan() {
            worst = f64::NAN;
            break;
        }
        worst = worst.max(err);
    }
    Verdict::new(worst <= 1e-8, format!("max |sum Re mu + mean loss| = {worst:.2e} at 50 points (limit 1e-8)"))
}

fn sector_products() -> Verdict {
    let basis = TwoModeBasis::new(3);
    let mut worst: f64 = 0.0;
    let mut v = Verdict::new(true, "");
    for omega in [1.5, 2.0] {
        let p = reference_coupler(omega);
        let full = monodromy_full(&p, &basis, &WeiNormanOptions::default()).unwrap();
        let two = monodromy_2x2(&p, &FloquetOptions::default()).unwrap().multipliers();
        let mut w: f64 = 0.0;
        for s in sector_spectra(&full.monodromy, &basis) {
            let pow = |n: usize| -> Vec<C> {
                (0..=n).map(|a| two[0].powu(a as u32) * two[1].powu((n - a) as u32)).collect()
            };
            let want: Vec<C> = pow(s.left)
                .iter()
                .flat_map(|x| pow(s.right).into_iter().map(move |y| x * y.conj()))
                .collect();
            w = w.max(multiset_distance(&s.eigenvalues, &want));
        }
        v = v.detail(format!("omega = {omega}: worst sector mismatch {w:.2e}"));
        worst = worst.max(w);
    }
    v.passed = worst <= 1e-7;
    v.summary = format!("max eigenvalue mismatch {worst:.2e} over all 16 sectors (limit 1e-7)");
    v
}

fn three_photon_dynamics() -> Verdict {
    let basis = TwoModeBasis::new(3);
    let rho0 = superposition_state(&basis, 3).unwrap();
    let opts = WeiNormanOptions::default();
    let mut v = Verdict::new(true, "");
    let (mut a, mut b, mut c) = (true, true, true);
    for omega in [1.5, 2.0] {
        let p = reference_coupler(omega);
        let t = p.period();
        let table = occupation_trajectories(&p, &rho0, 10.0 * t, 2001, &opts).unwrap();
        let trace_err = table.trace.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        let vac = table.column(0, 0).unwrap();
        let worst_drop = vac.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
        a &= trace_err <= 1e-8;
        // a rounding-level dip is not a decrease
        b &= worst_drop <= 1e-12;
        v = v.detail(format!(
            "omega = {omega}: (a) max |tr - 1| = {trace_err:.2e}; (b) largest drop of P(0,0) = {:.2e}",
            worst_drop.max(0.0)
        ));
        for n in [1, 2] {
            let pop = table.sector(n);
            let (imax, max) = pop
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
            let last = *pop.last().unwrap();
            let ok = pop[0].abs() < 1e-12 && imax > 0 && imax < pop.len() - 1 && last < 0.1 * max;
            c &= ok;
            v = v.detail(format!(
                "omega = {omega}: (c) n = {n}: start {:.1e}, max {max:.4} at z = {:.2}, at 10T {last:.4} ({:.0}% of max)",
                pop[0],
                table.z[imax],
                100.0 * last / max
            ));
        }
    }
    let p = reference_coupler(2.0);
    let r = monodromy_2x2(&p, &FloquetOptions::default()).unwrap();
    let lyap = amplitude_lyapunov(&p, 4000);
    let want = 2.0 * (lyap[0] - lyap[1]).abs();
    let s = strand_splitting(&p, &rho0, FAST_STRAND_WINDOW, SLOW_STRAND_WINDOW, &opts).unwrap();
    let rel = (s.splitting() - want).abs() / want;
    let d = rel <= 0.1;
    v = v.detail(format!(
        "(d) fitted strand rates {:.5} / {:.5}, splitting {:.5} vs 2|dRe mu| = {want:.5} (library {:.5}): {:.1}% (limit 10%)",
        s.fast_rate,
        s.slow_rate,
        s.splitting(),
        2.0 * r.splitting(),
        rel * 100.0
    ));
    let tag = |ok: bool| if ok { "ok" } else { "FAIL" };
    v.passed = a && b && c && d;
    v.summary = format!("(a) {} (b) {} (c) {} (d) {}", tag(a), tag(b), tag(c), tag(d));
    v
}

fn closed_form() -> Verdict {
    let p = CouplerParams::new(1.0, Loss::lossless(2.0 * PI)).unwrap();
    let opts = WeiNormanOptions::default();
    let grid: Vec<f64> = (0..=140).map(|k| k as f64 * 0.01).collect();
    let traj = integrate_sl2(&p, 0.0, 1.4, &opts, &grid).unwrap();
    let mut coeff_err: f64 = 0.0;
    for (z, f) in traj.z.iter().zip(&traj.coefficients) {
        let tan = C::new(0.0, -z.tan());
        let f0 = C::from(-z.cos().ln());
        coeff_err = coeff_err
            .max((f.f_plus - tan).norm())
            .max((f.f_minus - tan).norm())
            .max((f.f_zero - f0).norm());
    }
    let single_chart = !traj.stopped_early;

    let basis = TwoModeBasis::new(3);
    let z_end = 2.0;
    let prop = propagator(&p, z_end, &basis, &opts).unwrap();
    let segments = prop.segments().len();
    let u = prop.total();
    let oracle = HilbertOracle::new(&p, &basis);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut prop_err: f64 = 0.0;
    for _ in 0..20 {
        let rho = random_density_matrix(&basis, &mut rng);
        let got = &u * rho.vectorize().data();
        let got = CM::from_column_slice(basis.dim(), basis.dim(), got.as_slice());
        prop_err = prop_err.max((got - oracle.propagate(rho.elements(), z_end, 400)).norm());
    }
    // the tangent pole at pi/2 forces at least one restart before it
    let crossed = z_end > FRAC_PI_2 && prop.segments().iter().any(|s| s.z1 < FRAC_PI_2);
    Verdict::new(
        coeff_err <= 1e-9 && single_chart && segments > 1 && crossed && prop_err <= 1e-8,
        format!(
            "coefficient error {coeff_err:.2e} on [0, 1.4] (limit 1e-9); {segments} segments to kappa z = {z_end}, oracle error {prop_err:.2e} (limit 1e-8)"
        ),
    )
}

fn reservoir_checks() -> Verdict {
    let cfg = ReservoirConfig::reference(0.0).unwrap();
    let single = decay_comparison(&cfg).unwrap();
    let cfg2 = ReservoirConfig::reference(0.5).unwrap();
    let system = full_system_comparison(&cfg2, Guide::Lossy, &WeiNormanOptions::default()).unwrap();
    let a = single.max_deviation <= 0.05;
    let b = system.max_deviation <= 0.10;
    Verdict::new(
        a && b,
        format!(
            "max deviation before z = {}: single guide {:.1}% (limit 5%), coupled system {:.1}% (limit 10%)",
            single.recurrence,
            single.max_deviation * 100.0,
            system.max_deviation * 100.0
        ),
    )
    .detail(format!(
        "array norm drift {:.1e} / {:.1e}; fit window {:?}",
        single.trajectory.max_norm_error(),
        system.trajectory.max_norm_error(),
        single.analytic.fit_window
    ))
}

fn rate_identity() -> Verdict {
    let cfg = ReservoirConfig::reference(0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = rng.random_range(0.0..10.0 * cfg.loss().unwrap().period());
        let rate = decay_rate(coupling_profile(&cfg, z), cfg.kappa_b).unwrap();
        let x = cfg.b * cfg.b * (-cfg.beta * (1.0 - (cfg.omega * z).cos())).exp();
        let want = cfg.kappa_b * 2.0 * x / (1.0 - x).sqrt();
        worst = worst.max((rate - want).abs() / want.max(1e-300));
    }
    Verdict::new(worst <= 1e-12, format!("max relative mismatch {worst:.2e} at 100 points (limit 1e-12)"))
}

#[test]
fn acceptance_criteria() {
    report("");
    let mut results = vec![
        run(1, "oracle equivalence", oracle_equivalence),
        run(2, "labelled phase points", labelled_points),
        run(3, "static threshold", static_threshold_check),
    ];
    let mut tongue = None;
    results.push(run(4, "resonance dip", || {
        let (dip, t) = phase_diagram_checks();
        tongue = Some(t);
        dip
    }));
    results.push(run(5, "sub-resonant tongue", || {
        tongue.unwrap_or_else(|| Verdict::new(false, "phase diagram did not complete"))
    }));
    results.push(run(6, "Floquet sum rule", sum_rule));
    results.push(run(7, "sector products", sector_products));
    results.push(run(8, "three-photon dynamics", three_photon_dynamics));
    results.push(run(9, "lossless closed form", closed_form));
    results.push(run(10, "reservoir", reservoir_checks));
    results.push(run(11, "rate identity", rate_identity));
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    report(&format!("{} of 11 criteria passed", 11 - failed.len()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

#[test]
fn oracle_agrees_with_propagation_of_states() {
    // sanity check of the test oracle itself against the library's
    // state propagation over several periods
    let basis = TwoModeBasis::new(2);
    let p = reference_coupler(2.0);
    let rho = DensityMatrix::fock(&basis, 1, 1).unwrap();
    let z = 3.0 * p.period() + 0.7;
    let got = propagate_state(&p, &rho, &[z], &WeiNormanOptions::default()).unwrap();
    let want = HilbertOracle::new(&p, &basis).propagate(rho.elements(), z, 2000);
    assert!((got[0].elements() - want).norm() < 1e-8);
}


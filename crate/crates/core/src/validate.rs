//! On-demand consistency suite: algebra, product expansion against brute
//! force, Floquet sum rule and sector structure.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::floquet::{monodromy_2x2, sector_leakage, sector_product_residual, FloquetOptions};
use crate::fock::{random_density_matrix, vectorize, DensityMatrix, LiouvilleVector, TwoModeBasis};
use crate::linalg::CMatrix;
use crate::loss::DEFAULT_MIN_RATIO;
use crate::oracle::{oracle_monodromy, OracleOptions};
use crate::superop::{commutator_table, CouplerParams};
use crate::wei_norman::{propagator, WeiNormanOptions};

pub const ORACLE_THRESHOLD: f64 = 1e-8;
pub const SUM_RULE_THRESHOLD: f64 = 1e-8;
pub const SECTOR_THRESHOLD: f64 = 1e-7;
pub const TRACE_THRESHOLD: f64 = 1e-9;

/// Loss peaks and frequencies are in units of `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub kappa: f64,
    pub gamma_max: f64,
    pub omegas: Vec<f64>,
    pub min_ratio: f64,
    pub n_max: usize,
    pub wei_norman: WeiNormanOptions,
    pub oracle: OracleOptions,
    pub floquet: FloquetOptions,
    /// Random density matrices per oracle comparison.
    pub n_states: usize,
    /// Random parameter points for the sum rule, on top of the configured ones.
    pub n_sum_rule: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            gamma_max: 0.25,
            omegas: vec![1.5, 2.0],
            min_ratio: DEFAULT_MIN_RATIO,
            n_max: 3,
            wei_norman: WeiNormanOptions::default(),
            oracle: OracleOptions::default(),
            floquet: FloquetOptions::default(),
            n_states: 20,
            n_sum_rule: 20,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            threshold,
            // NaN residuals fail
            passed: residual <= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            writeln!(
                f,
                "{}  {:<width$}  residual {:.3e}  threshold {:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.threshold,
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

/// Largest `||(a - b) v||_2` over the given states.
pub fn propagator_discrepancy(a: &CMatrix, b: &CMatrix, states: &[DensityMatrix]) -> f64 {
    let diff = a - b;
    states
        .iter()
        .map(|rho| (&diff * vectorize(rho).data()).norm())
        .fold(0.0, f64::max)
}

/// `||1^T U - 1^T||_inf`: how far `U` is from preserving the trace.
pub fn trace_defect(u: &CMatrix, basis: &TwoModeBasis) -> f64 {
    let id = LiouvilleVector::identity(basis);
    let row = id.data().transpose() * u - id.data().transpose();
    row.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `|sum Re mu + mean_loss|` for the 2x2 problem.
pub fn sum_rule_residual(params: &CouplerParams, opts: &FloquetOptions) -> Result<f64> {
    let r = monodromy_2x2(params, opts)?;
    Ok((r.lyapunov.iter().sum::<f64>() + params.loss.mean()).abs())
}

/// Random modulated coupler with peak loss in `[0.01, 2.5]` and frequency in
/// `[0.3, 3]`, both in units of `kappa`.
pub fn random_coupler<R: Rng + ?Sized>(rng: &mut R, kappa: f64, min_ratio: f64) -> Result<CouplerParams> {
    let gamma_max = rng.random_range(0.01..2.5);
    let omega = rng.random_range(0.3..3.0);
    CouplerParams::modulated(kappa, gamma_max, omega, min_ratio)
}

/// Maximum that keeps NaN, so a failed point cannot hide behind good ones.
fn worst(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn failed(name: String) -> Check {
    Check::new(name, f64::NAN, 0.0)
}

pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationReport> {
    cfg.wei_norman.validate()?;
    let basis = TwoModeBasis::new(cfg.n_max);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    match commutator_table(&basis) {
        Ok(t) => checks.push(Check::new(
            format!("commutator table (n_max = {})", cfg.n_max),
            t.max_residual,
            t.threshold,
        )),
        Err(_) => checks.push(failed(format!("commutator table (n_max = {})", cfg.n_max))),
    }

    let states: Vec<DensityMatrix> = (0..cfg.n_states)
        .map(|_| random_density_matrix(&basis, &mut rng))
        .collect();
    let mut sum_rule: f64 = 0.0;
    for &omega in &cfg.omegas {
        let tag = format!("gamma_max = {}, omega = {}", cfg.gamma_max, omega);
        let params = CouplerParams::modulated(cfg.kappa, cfg.gamma_max, omega, cfg.min_ratio)?;
        let wn = propagator(&params, params.period(), &basis, &cfg.wei_norman).map(|p| p.total());
        let Ok(wn) = wn else {
            checks.push(failed(format!("oracle match ({tag})")));
            continue;
        };
        let oracle = oracle_monodromy(&params, &basis, cfg.oracle)?.into_dense();
        checks.push(Check::new(
            format!("oracle match ({tag})"),
            propagator_discrepancy(&wn, &oracle, &states),
            ORACLE_THRESHOLD,
        ));
        checks.push(Check::new(
            format!("trace preservation ({tag})"),
            trace_defect(&wn, &basis),
            TRACE_THRESHOLD,
        ));
        checks.push(Check::new(
            format!("sector triangularity ({tag})"),
            sector_leakage(&wn, &basis),
            0.0,
        ));
        match monodromy_2x2(&params, &cfg.floquet) {
            Ok(two) => {
                let m = two.multipliers();
                checks.push(Check::new(
                    format!("sector products ({tag})"),
                    sector_product_residual(&wn, &basis, [m[0], m[1]], cfg.n_max.min(3)),
                    SECTOR_THRESHOLD,
                ));
                sum_rule = worst(sum_rule, sum_rule_residual(&params, &cfg.floquet)?);
            }
            Err(_) => checks.push(failed(format!("sector products ({tag})"))),
        }
    }
    for _ in 0..cfg.n_sum_rule {
        let params = random_coupler(&mut rng, cfg.kappa, cfg.min_ratio)?;
        sum_rule = worst(sum_rule, sum_rule_residual(&params, &cfg.floquet).unwrap_or(f64::NAN));
    }
    checks.push(Check::new(
        format!("floquet sum rule ({} points)", cfg.omegas.len() + cfg.n_sum_rule),
        sum_rule,
        SUM_RULE_THRESHOLD,
    ));

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        config: cfg.clone(),
        checks,
        passed,
    })
}

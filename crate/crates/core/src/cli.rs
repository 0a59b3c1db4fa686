//! Command-line front end. Settings come from built-in defaults, then an
//! optional `key = value` file, then flags (flags win). Every output carries
//! the fully resolved settings so a run can be reproduced from its artifacts.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::floquet::{
    occupation_trajectories, phase_diagram, Axis, FloquetOptions, PhaseDiagramSpec,
};
use crate::fock::{superposition_state, DensityMatrix, TwoModeBasis};
use crate::loss::Loss;
use crate::reservoir::{
    analytic_decay, full_system_comparison, max_before, recurrence_estimate, relative_deviation,
    simulate_array, Excitation, Guide, ReservoirConfig,
};
use crate::superop::CouplerParams;
use crate::validate::{run_validation, ValidationConfig};
use crate::wei_norman::{coefficient_dump, WeiNormanOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ptcoupler", version, about = "Passive PT-symmetric Floquet coupler simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the PT phase over an (omega, gamma_max) grid.
    PhaseDiagram(Flags),
    /// Propagate a photon state and tabulate all occupations.
    Evolve(Flags),
    /// Simulate the waveguide-array reservoir against its Markovian limit.
    Reservoir(Flags),
    /// Run the consistency suite; exit status 1 if any check fails.
    Validate(Flags),
    /// Dump the product-expansion coefficients over one period.
    Coeffs(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::PhaseDiagram(_) => "phase-diagram",
            Command::Evolve(_) => "evolve",
            Command::Reservoir(_) => "reservoir",
            Command::Validate(_) => "validate",
            Command::Coeffs(_) => "coeffs",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::PhaseDiagram(f)
            | Command::Evolve(f)
            | Command::Reservoir(f)
            | Command::Validate(f)
            | Command::Coeffs(f) => f,
        }
    }
}

/// Flags are kept as text and parsed together with the file values, so both
/// sources get the same validation and messages.
#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// key = value settings file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path (CSV; JSON for validate). The JSON sidecar sits next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub kappa: Option<String>,
    /// Peak loss, in units of kappa (kappa_b for the reservoir)
    #[arg(long = "gamma-max")]
    pub gamma_max: Option<String>,
    /// Modulation frequency; comma-separated list for validate
    #[arg(long)]
    pub omega: Option<String>,
    /// gamma_min / gamma_max of the loss profile
    #[arg(long = "min-ratio")]
    pub min_ratio: Option<String>,
    /// Photon-number truncation
    #[arg(long)]
    pub nmax: Option<String>,
    /// Relative integration tolerance
    #[arg(long)]
    pub tol: Option<String>,
    /// Lyapunov splitting threshold, in units of kappa
    #[arg(long = "eps-split")]
    pub eps_split: Option<String>,
    /// Worker threads for the phase-diagram sweep
    #[arg(long)]
    pub jobs: Option<String>,
    #[arg(long = "n-bath")]
    pub n_bath: Option<String>,
    #[arg(long = "kappa-b")]
    pub kappa_b: Option<String>,
    /// Propagation length
    #[arg(long)]
    pub zmax: Option<String>,
    /// "min,max" of the omega axis (phase-diagram)
    #[arg(long = "omega-range")]
    pub omega_range: Option<String>,
    /// "min,max" of the gamma_max axis (phase-diagram)
    #[arg(long = "gamma-range")]
    pub gamma_range: Option<String>,
    #[arg(long = "n-omega")]
    pub n_omega: Option<String>,
    #[arg(long = "n-gamma")]
    pub n_gamma: Option<String>,
    /// superposition:N | fock:M,H | amplitudes:c0,c1,... (evolve)
    #[arg(long)]
    pub state: Option<String>,
    /// Number of output samples (evolve, coeffs)
    #[arg(long)]
    pub samples: Option<String>,
    /// Output spacing (reservoir)
    #[arg(long)]
    pub dz: Option<String>,
    /// lossy | lossless: guide holding the photon (reservoir with kappa > 0)
    #[arg(long)]
    pub input: Option<String>,
    /// Random states per oracle comparison (validate)
    #[arg(long = "n-states")]
    pub n_states: Option<String>,
    /// RNG seed (validate)
    #[arg(long)]
    pub seed: Option<String>,
}

const KEYS: &[&str] = &[
    "out", "kappa", "gamma-max", "omega", "min-ratio", "nmax", "tol", "eps-split", "jobs",
    "n-bath", "kappa-b", "zmax", "omega-range", "gamma-range", "n-omega", "n-gamma", "state",
    "samples", "dz", "input", "n-states", "seed",
];

impl Flags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("kappa", self.kappa.clone()),
            ("gamma-max", self.gamma_max.clone()),
            ("omega", self.omega.clone()),
            ("min-ratio", self.min_ratio.clone()),
            ("nmax", self.nmax.clone()),
            ("tol", self.tol.clone()),
            ("eps-split", self.eps_split.clone()),
            ("jobs", self.jobs.clone()),
            ("n-bath", self.n_bath.clone()),
            ("kappa-b", self.kappa_b.clone()),
            ("zmax", self.zmax.clone()),
            ("omega-range", self.omega_range.clone()),
            ("gamma-range", self.gamma_range.clone()),
            ("n-omega", self.n_omega.clone()),
            ("n-gamma", self.n_gamma.clone()),
            ("state", self.state.clone()),
            ("samples", self.samples.clone()),
            ("dz", self.dz.clone()),
            ("input", self.input.clone()),
            ("n-states", self.n_states.clone()),
            ("seed", self.seed.clone()),
        ]
    }
}

/// Parses `key = value` lines; `#` starts a comment, `_` and `-` are
/// interchangeable in keys.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got `{raw}`", no + 1)));
        };
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key `{}`", no + 1, k.trim())));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

/// Settings after merging file and flags, with typed access. Every value read
/// (including defaults) is recorded for the output metadata.
struct Settings {
    raw: BTreeMap<String, String>,
    resolved: BTreeMap<String, Value>,
}

impl Settings {
    fn new(flags: &Flags) -> Result<Self> {
        let mut raw = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in flags.pairs() {
            if let Some(v) = v {
                raw.insert(k.to_string(), v);
            }
        }
        Ok(Self {
            raw,
            resolved: BTreeMap::new(),
        })
    }

    fn parsed<T>(&mut self, key: &str, default: T, what: &str) -> Result<T>
    where
        T: FromStr + Into<Value> + Clone,
    {
        let v = match self.raw.get(key) {
            Some(s) => s.parse::<T>().map_err(|_| {
                Error::Config(format!("`{key}` expects {what}, got `{s}`"))
            })?,
            None => default,
        };
        self.resolved.insert(key.to_string(), v.clone().into());
        Ok(v)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.parsed(key, default, "a number")?;
        if !v.is_finite() {
            return Err(Error::Config(format!("`{key}` must be finite, got {v}")));
        }
        Ok(v)
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64(key, default)?;
        if v <= 0.0 {
            return Err(Error::Config(format!("`{key}` must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let v: u64 = self.parsed(key, default as u64, "a non-negative integer")?;
        Ok(v as usize)
    }

    fn text(&mut self, key: &str, default: &str) -> String {
        let v = self.raw.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.resolved.insert(key.to_string(), Value::String(v.clone()));
        v
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.raw.get(key) {
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::Config(format!("`{key}` expects comma-separated numbers, got `{s}`")))?,
            None => default.to_vec(),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("`{key}` needs finite values")));
        }
        self.resolved.insert(key.to_string(), json!(v));
        Ok(v)
    }

    fn range(&mut self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        let v = self.list(key, &[default.0, default.1])?;
        match v.as_slice() {
            [a, b] if *a > 0.0 && b > a => Ok((*a, *b)),
            _ => Err(Error::Config(format!("`{key}` expects `min,max` with 0 < min < max"))),
        }
    }

    fn out(&mut self, default: &str) -> PathBuf {
        PathBuf::from(self.text("out", default))
    }

    fn tol(&mut self) -> Result<f64> {
        let t = self.positive("tol", 1e-10)?;
        if t >= 1.0 {
            return Err(Error::Config(format!("`tol` must be < 1, got {t}")));
        }
        Ok(t)
    }

    /// Settings as `# key = value` lines for the CSV preamble.
    fn preamble(&self, command: &str) -> String {
        let mut s = format!("# ptcoupler {} {}\n", env!("CARGO_PKG_VERSION"), command);
        for (k, v) in &self.resolved {
            let shown = match v {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(s, "# {k} = {shown}");
        }
        s
    }
}

/// Full double precision in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut p = out.as_os_str().to_owned();
        p.push(".meta.json");
        PathBuf::from(p)
    } else {
        out.with_extension("json")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn metadata(command: &str, settings: &Settings, started: Instant, extra: Value) -> Value {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": settings.resolved,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "unix_time": stamp,
        "results": extra,
    })
}

fn finish(
    command: &str,
    settings: &Settings,
    out: &Path,
    csv: String,
    started: Instant,
    extra: Value,
) -> Result<()> {
    let body = settings.preamble(command) + &csv;
    write_file(out, &body)?;
    let meta = metadata(command, settings, started, extra);
    write_file(&sidecar_path(out), &(serde_json::to_string_pretty(&meta).unwrap() + "\n"))?;
    Ok(())
}

fn coupler(settings: &mut Settings, omega_default: f64) -> Result<CouplerParams> {
    let kappa = settings.positive("kappa", 1.0)?;
    let gamma_max = settings.positive("gamma-max", 0.25)?;
    let omega = settings.positive("omega", omega_default)?;
    let min_ratio = settings.positive("min-ratio", crate::loss::DEFAULT_MIN_RATIO)?;
    CouplerParams::modulated(kappa, gamma_max, omega, min_ratio)
}

fn cmd_phase_diagram(settings: &mut Settings, started: Instant) -> Result<i32> {
    let out = settings.out("phase_diagram.csv");
    let d = PhaseDiagramSpec::default();
    let kappa = settings.positive("kappa", d.kappa)?;
    let min_ratio = settings.positive("min-ratio", d.min_ratio)?;
    let eps_split = settings.positive("eps-split", d.eps_split)?;
    let tol = settings.tol()?;
    let (w0, w1) = settings.range("omega-range", (d.omega.min, d.omega.max))?;
    let nw = settings.usize("n-omega", d.omega.n)?;
    let (g0, g1) = settings.range("gamma-range", (d.gamma_max.min, d.gamma_max.max))?;
    let ng = settings.usize("n-gamma", d.gamma_max.n)?;
    let default_jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let jobs = settings.usize("jobs", default_jobs)?.max(1);
    let spec = PhaseDiagramSpec {
        omega: Axis::new(w0, w1, nw)?,
        gamma_max: Axis::new(g0, g1, ng)?,
        kappa,
        min_ratio,
        eps_split,
        floquet: FloquetOptions {
            rtol: tol,
            atol: tol * 1e-2,
        },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let diagram = pool.install(|| phase_diagram(&spec))?;
    let mut csv = String::from("omega_over_kappa,gammabar_over_kappa,classification,splitting\n");
    for p in &diagram.points {
        let class = p.phase.map_or("failed".to_string(), |ph| ph.to_string());
        let _ = writeln!(csv, "{},{},{},{}", num(p.omega), num(p.gamma_max), class, num(p.splitting));
    }
    let thresholds: Vec<Value> = (0..diagram.omega.len())
        .map(|i| json!({"omega": diagram.omega[i], "broken_threshold": diagram.broken_threshold(i)}))
        .collect();
    let failures: Vec<Value> = diagram
        .points
        .iter()
        .filter_map(|p| p.error.as_ref().map(|e| json!({"omega": p.omega, "gamma_max": p.gamma_max, "error": e})))
        .collect();
    let extra = json!({
        "spec": spec,
        "beta": diagram.points.iter().map(|p| p.beta).collect::<Vec<_>>(),
        "broken_thresholds": thresholds,
        "failures": failures,
    });
    finish("phase-diagram", settings, &out, csv, started, extra)?;
    eprintln!(
        "{} points, {} failures -> {}",
        diagram.points.len(),
        diagram.failures(),
        out.display()
    );
    Ok(EXIT_OK)
}

/// `superposition:N`, `fock:M,H` (photons per guide) or
/// `amplitudes:c0,c1,...` in basis order (`1.0`, `0.5-0.5i`, ...).
pub fn parse_state(spec: &str, basis: &TwoModeBasis) -> Result<DensityMatrix> {
    let bad = |m: String| Error::Config(format!("state `{spec}`: {m}"));
    let (kind, args) = spec.split_once(':').ok_or_else(|| bad("expected kind:arguments".into()))?;
    let ints = || -> Result<Vec<usize>> {
        args.split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| bad(format!("`{x}` is not a count"))))
            .collect()
    };
    let state = match kind.trim() {
        "superposition" => match ints()?.as_slice() {
            [n] => superposition_state(basis, *n),
            _ => return Err(bad("expected one photon number".into())),
        },
        "fock" => match ints()?.as_slice() {
            [m, h] => DensityMatrix::fock(basis, *m, *h),
            _ => return Err(bad("expected two photon numbers".into())),
        },
        "amplitudes" => {
            let amps = args
                .split(',')
                .map(|x| {
                    Complex64::from_str(x.trim()).map_err(|_| bad(format!("`{x}` is not a complex number")))
                })
                .collect::<Result<Vec<_>>>()?;
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(bad(format!("amplitudes have norm {norm}, expected 1")));
            }
            DensityMatrix::from_pure(basis, &amps)
        }
        other => return Err(bad(format!("unknown kind `{other}`"))),
    };
    state.map_err(|e| bad(e.to_string()))
}

fn cmd_evolve(settings: &mut Settings, started: Instant) -> Result<i32> {
    let out = settings.out("evolve.csv");
    let params = coupler(settings, 1.5)?;
    let n_max = settings.usize("nmax", crate::fock::DEFAULT_NMAX)?;
    let tol = settings.tol()?;
    let basis = TwoModeBasis::new(n_max);
    let state = settings.text("state", "superposition:3");
    let rho0 = parse_state(&state, &basis)?;
    let z_max = settings.f64("zmax", 10.0 * params.period())?;
    if z_max < 0.0 {
        return Err(Error::Config(format!("`zmax` must be >= 0, got {z_max}")));
    }
    let samples = settings.usize("samples", 401)?;
    let table = occupation_trajectories(&params, &rho0, z_max, samples, &WeiNormanOptions::with_tol(tol))?;
    let mut csv = String::from("z");
    for (n, h) in &table.states {
        let _ = write!(csv, ",P_{n}_{h}");
    }
    csv.push_str(",trace\n");
    for ((z, row), tr) in table.z.iter().zip(&table.rows).zip(&table.trace) {
        csv.push_str(&num(*z));
        for p in row {
            csv.push(',');
            csv.push_str(&num(*p));
        }
        let _ = writeln!(csv, ",{}", num(*tr));
    }
    let extra = json!({
        "period": params.period(),
        "loss": params.loss,
        "states": table.states,
        "max_trace_error": table.trace.iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max),
    });
    finish("evolve", settings, &out, csv, started, extra)?;
    Ok(EXIT_OK)
}

fn cmd_reservoir(settings: &mut Settings, started: Instant) -> Result<i32> {
    let out = settings.out("reservoir.csv");
    let n_bath = settings.usize("n-bath", 200)?;
    let kappa_b = settings.positive("kappa-b", 1.0)?;
    let kappa = settings.f64("kappa", 0.0)?;
    let gamma_max = settings.f64("gamma-max", 0.125)?;
    let omega = settings.positive("omega", kappa_b)?;
    let min_ratio = settings.positive("min-ratio", crate::loss::DEFAULT_MIN_RATIO)?;
    let tol = settings.tol()?;
    let base = if gamma_max == 0.0 {
        ReservoirConfig {
            n_bath,
            kappa_b,
            kappa,
            b: 0.0,
            beta: 0.0,
            omega,
            z_max: n_bath as f64 / (2.0 * kappa_b),
            dz_out: 0.1 / kappa_b,
            rtol: tol,
        }
    } else {
        ReservoirConfig::for_target(n_bath, kappa_b, kappa, gamma_max, omega, min_ratio)?
    };
    let z_rec = recurrence_estimate(&base);
    let cfg = ReservoirConfig {
        z_max: settings.f64("zmax", z_rec)?,
        dz_out: settings.positive("dz", base.dz_out)?,
        rtol: tol,
        ..base
    };
    cfg.validate()?;
    let (z, sim, reference, note) = if cfg.kappa > 0.0 {
        let input = match settings.text("input", "lossy").as_str() {
            "lossy" => Guide::Lossy,
            "lossless" => Guide::Lossless,
            other => return Err(Error::Config(format!("`input` must be lossy or lossless, got `{other}`"))),
        };
        let r = full_system_comparison(&cfg, input, &WeiNormanOptions::with_tol(tol.max(1e-12)))?;
        (
            r.trajectory.z,
            r.trajectory.system_population,
            r.lindblad,
            json!({"reference": "one-photon population of the equivalent master equation (loss rate halved)"}),
        )
    } else {
        let t = simulate_array(&cfg, &Excitation::Mode(cfg.lossy_mode()))?;
        let a = analytic_decay(&cfg, &t.z, &t.system_population)?;
        let note = json!({
            "reference": "C exp(-int gamma)",
            "normalization": a.normalization,
            "fit_window": a.fit_window,
            "fit_method": a.fit_method,
        });
        (t.z, t.system_population, a.population, note)
    };
    let dev = relative_deviation(&sim, &reference);
    let mut csv = String::from("z,system_population,analytic_decay,relative_deviation\n");
    for i in 0..z.len() {
        let _ = writeln!(csv, "{},{},{},{}", num(z[i]), num(sim[i]), num(reference[i]), num(dev[i]));
    }
    let max_dev = max_before(&z, &dev, z_rec);
    let extra = json!({
        "array": cfg,
        "recurrence_cutoff": z_rec,
        "max_deviation_before_cutoff": max_dev,
        "comparison": note,
    });
    finish("reservoir", settings, &out, csv, started, extra)?;
    eprintln!("max relative deviation before z = {z_rec}: {max_dev:.4}");
    Ok(EXIT_OK)
}

fn cmd_validate(settings: &mut Settings, _started: Instant) -> Result<i32> {
    let out = settings.out("validate.json");
    let d = ValidationConfig::default();
    let tol = settings.tol()?;
    let cfg = ValidationConfig {
        kappa: settings.positive("kappa", d.kappa)?,
        gamma_max: settings.positive("gamma-max", d.gamma_max)?,
        omegas: settings.list("omega", &d.omegas)?,
        min_ratio: settings.positive("min-ratio", d.min_ratio)?,
        n_max: settings.usize("nmax", d.n_max)?,
        wei_norman: WeiNormanOptions::with_tol(tol),
        n_states: settings.usize("n-states", d.n_states)?,
        seed: settings.parsed("seed", d.seed, "an integer")?,
        ..d
    };
    if cfg.omegas.iter().any(|w| *w <= 0.0) {
        return Err(Error::Config("`omega` values must be > 0".into()));
    }
    let report = run_validation(&cfg)?;
    println!("{report}");
    let meta = json!({
        "command": "validate",
        "version": env!("CARGO_PKG_VERSION"),
        "config": settings.resolved,
        "report": report,
    });
    write_file(&out, &(serde_json::to_string_pretty(&meta).unwrap() + "\n"))?;
    Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_coeffs(settings: &mut Settings, started: Instant) -> Result<i32> {
    let out = settings.out("coeffs.csv");
    let params = coupler(settings, 2.0)?;
    let tol = settings.tol()?;
    let samples = settings.usize("samples", 201)?;
    let dump = coefficient_dump(&params, samples, &WeiNormanOptions::with_tol(tol))?;
    let names = ["f_plus", "f_zero", "f_minus", "a1", "a2", "a3", "a4", "a5", "a6"];
    let mut csv = String::from("segment,z");
    for n in names {
        let _ = write!(csv, ",re_{n},im_{n}");
    }
    csv.push('\n');
    for s in &dump {
        let _ = write!(csv, "{},{}", s.segment, num(s.z));
        let values = [s.sl2.f_plus, s.sl2.f_zero, s.sl2.f_minus]
            .into_iter()
            .chain(s.solvable.a);
        for v in values {
            let _ = write!(csv, ",{},{}", num(v.re), num(v.im));
        }
        csv.push('\n');
    }
    let loss = match params.loss {
        Loss::Modulated(p) => json!(p),
        other => json!(other),
    };
    let extra = json!({
        "period": params.period(),
        "loss": loss,
        "segments": dump.last().map_or(0, |s| s.segment + 1),
    });
    finish("coeffs", settings, &out, csv, started, extra)?;
    Ok(EXIT_OK)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::OutOfRange(_)
        | Error::UnknownLabel(_)
        | Error::DimensionMismatch { .. } => EXIT_BAD_INPUT,
        _ => EXIT_VALIDATION,
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
        }
    };
    let started = Instant::now();
    let command = cli.command.name();
    let result = Settings::new(cli.command.flags()).and_then(|mut s| match &cli.command {
        Command::PhaseDiagram(_) => cmd_phase_diagram(&mut s, started),
        Command::Evolve(_) => cmd_evolve(&mut s, started),
        Command::Reservoir(_) => cmd_reservoir(&mut s, started),
        Command::Validate(_) => cmd_validate(&mut s, started),
        Command::Coeffs(_) => cmd_coeffs(&mut s, started),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ptcoupler {command}: {e}");
            exit_code(&e)
        }
    }
}

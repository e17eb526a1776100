use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use conjugate::estimate::{c1_hat, r_hat, true_r_grid, EmpiricalCdf, KernelFile, Provenance};
use conjugate::harness::{run_c1_experiment, run_rate_experiment, ExperimentConfig, ExperimentKind, DEFAULT_SEED};
use conjugate::latent::{generate_latent, LatentSequence, TwoPointLatentConfig};
use conjugate::mixing::{factorization_max_gap, psi_coefficient, FiniteConjugateModel, Probability, PsiEstimate, Which};
use conjugate::observe::{simulate_conjugate, simulate_paths, CtmcConfig, SamplingScheme};
use conjugate::quadrature::build_grid;
use conjugate::rng::StreamKey;
use conjugate::spectral::{eigendecompose, hs_norm, SpectrumFile, DEFAULT_TOL};
use conjugate::{ExactToyModel, Kernel, Measure, ToyModel};
use serde::{Deserialize, Serialize};

use crate::config::resolve;
use crate::CliError;

pub struct Options<'a> {
    pub config: Option<&'a Path>,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub full: bool,
    pub set: &'a [String],
}

impl Options<'_> {
    fn resolve<T: Serialize + serde::de::DeserializeOwned>(&self, defaults: &T, seed_key: &str) -> Result<T, CliError> {
        let mut set = self.set.to_vec();
        if let Some(seed) = self.seed {
            set.push(format!("{seed_key}={seed}"));
        }
        resolve(defaults, self.config, &set)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        Ok((path, BufWriter::new(file)))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(conjugate::Error::from)?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// CSV whose first line is `# config: <json>`.
    fn write_csv(
        &self,
        name: &str,
        config: &impl Serialize,
        body: impl FnOnce(&mut BufWriter<File>) -> conjugate::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let (path, mut w) = self.create(name)?;
        let line = serde_json::to_string(config).map_err(conjugate::Error::from)?;
        writeln!(w, "# config: {line}").map_err(|e| io_err(&path, e))?;
        body(&mut w)?;
        w.flush().map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_io(e: csv::Error) -> conjugate::Error {
    conjugate::Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_days: usize,
    pub q0: f64,
    pub seed: u64,
    /// Finite equiprobable support for ϑ; absent means uniform on [0, 1).
    pub theta_levels: Option<Vec<f64>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_days: 4,
            q0: 10.0,
            seed: DEFAULT_SEED,
            theta_levels: None,
        }
    }
}

/// Writes `simulate.csv` (time, state, day_index; a row at every day start,
/// every jump and the final instant) and `latent.csv`.
pub fn simulate(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let cfg: SimulateConfig = opts.resolve(&SimulateConfig::default(), "seed")?;
    if cfg.n_days == 0 {
        return Err(CliError::Config("n_days must be >= 1".into()));
    }
    let latent_cfg = TwoPointLatentConfig {
        seed: cfg.seed,
        theta_levels: cfg.theta_levels.clone(),
    };
    // cycles 1..=n_days are the plotted days 0..n_days-1
    let latent = generate_latent(&latent_cfg, cfg.n_days)?;
    let paths = simulate_paths(&latent, 1..=cfg.n_days, &CtmcConfig::new(cfg.q0)?, StreamKey::from(cfg.seed))?;

    let path_csv = opts.write_csv("simulate.csv", &cfg, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "state", "day_index"]).map_err(csv_io)?;
        for (day, seg) in paths.iter().enumerate() {
            let start = day as f64;
            out.serialize((start, seg.states[0], day)).map_err(csv_io)?;
            for (tau, s) in seg.jump_times.iter().zip(&seg.states[1..]) {
                out.serialize((start + tau, s, day)).map_err(csv_io)?;
            }
            if day + 1 == paths.len() {
                out.serialize((start + 1.0, seg.states.last(), day)).map_err(csv_io)?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    let latent_csv = opts.write_csv("latent.csv", &cfg, |w| latent.write_csv(w))?;
    Ok(vec![path_csv, latent_csv])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub n: usize,
    pub q_t: usize,
    pub q0: f64,
    pub measure: Measure,
    pub m: usize,
    pub seed: u64,
    /// Use the latent measures themselves instead of empirical CDFs.
    pub oracle_mode: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            q_t: 1,
            q0: 10.0,
            measure: Measure::default(),
            m: 64,
            seed: DEFAULT_SEED,
            oracle_mode: false,
        }
    }
}

fn estimate_kernels(cfg: &EstimateConfig) -> Result<(Kernel, Kernel), CliError> {
    let grid = build_grid(cfg.measure, cfg.m)?;
    let latent: LatentSequence = generate_latent(&TwoPointLatentConfig::continuous(cfg.seed), cfg.n)?;
    let c1 = if cfg.oracle_mode {
        c1_hat(&latent.states[1..], &grid)?
    } else {
        let scheme = SamplingScheme::equispaced(cfg.q_t)?;
        let samples = simulate_conjugate(&latent, &CtmcConfig::new(cfg.q0)?, &scheme, StreamKey::from(cfg.seed))?;
        let cdfs = samples.into_iter().map(EmpiricalCdf::new).collect::<conjugate::Result<Vec<_>>>()?;
        c1_hat(&cdfs, &grid)?
    };
    let c1 = c1.with_provenance(Provenance {
        seed: cfg.seed,
        n: cfg.n,
        q_t: cfg.q_t,
        oracle_mode: cfg.oracle_mode,
    });
    let r = r_hat(&c1)?;
    r.check_invariants().map_err(|e| CliError::Assertion(e.to_string()))?;
    Ok((c1, r))
}

#[derive(Serialize)]
struct KernelReport<'a, C> {
    config: &'a C,
    kernel: KernelFile<f64>,
}

/// Writes `c1_hat.{csv,json}` and `r_hat.{csv,json}`.
pub fn estimate(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let cfg: EstimateConfig = opts.resolve(&EstimateConfig::default(), "seed")?;
    let (c1, r) = estimate_kernels(&cfg)?;
    let mut written = Vec::new();
    for (stem, k) in [("c1_hat", &c1), ("r_hat", &r)] {
        written.push(opts.write_csv(&format!("{stem}.csv"), &cfg, |w| k.write_csv(w))?);
        let report = KernelReport {
            config: &cfg,
            kernel: k.to_file(),
        };
        written.push(opts.write_json(&format!("{stem}.json"), &report)?);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSource {
    /// The population operator with kernel `(1/48)^2 μ([0,1))` on `[0,1)^2`.
    Population,
    /// `R̂` from a simulated sample.
    Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub source: KernelSource,
    pub tol: f64,
    pub n: usize,
    pub q_t: usize,
    pub q0: f64,
    pub measure: Measure,
    pub m: usize,
    pub seed: u64,
    pub oracle_mode: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        let e = EstimateConfig::default();
        Self {
            source: KernelSource::Estimate,
            tol: DEFAULT_TOL,
            n: e.n,
            q_t: e.q_t,
            q0: e.q0,
            measure: e.measure,
            m: e.m,
            seed: e.seed,
            oracle_mode: e.oracle_mode,
        }
    }
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    config: &'a SpectrumConfig,
    hs_norm: f64,
    spectrum: SpectrumFile<f64>,
}

/// Writes `spectrum.json`.
pub fn spectrum(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let cfg: SpectrumConfig = opts.resolve(&SpectrumConfig::default(), "seed")?;
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(CliError::Config("tol must be positive".into()));
    }
    let kernel = match cfg.source {
        KernelSource::Population => true_r_grid(&build_grid(cfg.measure, cfg.m)?),
        KernelSource::Estimate => {
            let e = EstimateConfig {
                n: cfg.n,
                q_t: cfg.q_t,
                q0: cfg.q0,
                measure: cfg.measure,
                m: cfg.m,
                seed: cfg.seed,
                oracle_mode: cfg.oracle_mode,
            };
            estimate_kernels(&e)?.1
        }
    };
    let spectrum = eigendecompose(&kernel, cfg.tol)?;
    let report = SpectrumReport {
        config: &cfg,
        hs_norm: hs_norm(&kernel),
        spectrum: spectrum.to_file(),
    };
    Ok(vec![opts.write_json("spectrum.json", &report)?])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    /// Support of ϑ and its probabilities.
    pub levels: Vec<f64>,
    pub probs: Vec<f64>,
    pub k_max: usize,
    pub w_max: usize,
    /// Random cylinder configurations for the factorization check.
    pub trials: usize,
    pub seed: u64,
    /// Enumerate in exact rational arithmetic instead of f64.
    pub exact: bool,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.25, 0.75],
            probs: vec![0.5, 0.5],
            k_max: 3,
            w_max: 2,
            trials: 100,
            seed: DEFAULT_SEED,
            exact: true,
        }
    }
}

#[derive(Serialize)]
struct Atoms {
    past: Vec<f64>,
    future: Vec<f64>,
}

#[derive(Serialize)]
struct AttainedAtoms {
    latent: Option<Atoms>,
    observed: Option<Atoms>,
}

#[derive(Serialize)]
struct MixingEntry {
    k: usize,
    w: usize,
    psi_latent: f64,
    psi_observed: f64,
    /// Exact values as reduced fractions when enumerating exactly.
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_latent_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi_observed_exact: Option<String>,
    attained_atoms: AttainedAtoms,
    factorization_max_abs_gap: f64,
}

#[derive(Serialize)]
struct MixingReport<'a> {
    config: &'a MixingConfig,
    entries: Vec<MixingEntry>,
}

fn mixing_entries<P: Probability>(model: &FiniteConjugateModel<P>, cfg: &MixingConfig) -> Result<Vec<MixingEntry>, CliError> {
    let gap = factorization_max_gap(model, cfg.trials, cfg.seed)?;
    let gap = gap.to_f64().unwrap_or(f64::NAN);
    let exact = cfg.exact;
    let atoms = |p: &PsiEstimate<P>| p.attained_values(model).map(|(past, future)| Atoms { past, future });
    let mut entries = Vec::new();
    for k in 1..=cfg.k_max {
        for w in 1..=cfg.w_max {
            let lat = psi_coefficient(model, k, w, Which::Latent)?;
            let obs = psi_coefficient(model, k, w, Which::Observed)?;
            // conditional independence given ξ: the observed sequence cannot mix worse
            if obs.value > lat.value.clone() + P::tolerance() {
                return Err(CliError::Assertion(format!(
                    "psi_observed({k},{w}) = {} exceeds psi_latent = {}",
                    obs.value, lat.value
                )));
            }
            entries.push(MixingEntry {
                k,
                w,
                psi_latent: lat.value.to_f64().unwrap_or(f64::NAN),
                psi_observed: obs.value.to_f64().unwrap_or(f64::NAN),
                psi_latent_exact: exact.then(|| lat.value.to_string()),
                psi_observed_exact: exact.then(|| obs.value.to_string()),
                attained_atoms: AttainedAtoms {
                    latent: atoms(&lat),
                    observed: atoms(&obs),
                },
                factorization_max_abs_gap: gap,
            });
        }
    }
    Ok(entries)
}

/// Writes `mixing.json`.
pub fn mixing(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let cfg: MixingConfig = opts.resolve(&MixingConfig::default(), "seed")?;
    if cfg.k_max == 0 || cfg.w_max == 0 {
        return Err(CliError::Config("k_max and w_max must be >= 1".into()));
    }
    let entries = if cfg.exact {
        mixing_entries(&ExactToyModel::from_f64(&cfg.levels, &cfg.probs)?, &cfg)?
    } else {
        mixing_entries(&ToyModel::from_f64(&cfg.levels, &cfg.probs)?, &cfg)?
    };
    let report = MixingReport { config: &cfg, entries };
    Ok(vec![opts.write_json("mixing.json", &report)?])
}

/// Writes `montecarlo_replications.csv` and `montecarlo_summary.json`.
pub fn montecarlo(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let defaults = if opts.full {
        ExperimentConfig::c1_boxplot_full()
    } else {
        ExperimentConfig::c1_boxplot()
    };
    let cfg: ExperimentConfig = opts.resolve(&defaults, "master_seed")?;
    let report = run_c1_experiment(&cfg)?;
    let (csv_path, w) = opts.create("montecarlo_replications.csv")?;
    report.write_replications_csv(w)?;
    let json_path = opts.write_json("montecarlo_summary.json", &report)?;
    Ok(vec![csv_path, json_path])
}

/// Writes `rate_replications.csv` and `rate_summary.json`.
pub fn rate(opts: &Options) -> Result<Vec<PathBuf>, CliError> {
    let cfg: ExperimentConfig = opts.resolve(&ExperimentConfig::rate(ExperimentKind::RateHs), "master_seed")?;
    let report = run_rate_experiment(&cfg)?;
    let (csv_path, w) = opts.create("rate_replications.csv")?;
    report.write_replications_csv(w)?;
    let json_path = opts.write_json("rate_summary.json", &report)?;
    Ok(vec![csv_path, json_path])
}

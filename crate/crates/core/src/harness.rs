//! Monte Carlo replication driver.
//!
//! Replication `r` at sample size `n` draws every random number from streams
//! keyed by `(master_seed, experiment, n, r)` and the cycle index, so results
//! do not depend on the number of worker threads or on scheduling. Work runs
//! on the ambient rayon pool; install a sized pool to control parallelism.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Error, Result};
use crate::estimate::{c1_hat, c1_hat_at, r_hat, true_c1_grid, EmpiricalCdf, StepCdf};
use crate::latent::{csv_err, generate_latent_keyed, LatentSequence, TwoPointLatentConfig, LAG1_COVARIANCE};
use crate::measure::MeasureSpec;
use crate::observe::{simulate_conjugate, CtmcConfig, SamplingScheme};
use crate::quadrature::{build_grid, QuadratureGrid};
use crate::rng::StreamKey;
use crate::spectral::{eigendecompose, hs_distance, spectrum_distance, Spectrum, DEFAULT_TOL};
use crate::Kernel;

pub const DEFAULT_SEED: u64 = 20_160_401;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    C1Boxplot,
    RateHs,
    RateEigen,
}

impl ExperimentKind {
    fn code(self) -> u64 {
        match self {
            ExperimentKind::C1Boxplot => 1,
            ExperimentKind::RateHs => 2,
            ExperimentKind::RateEigen => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n_values: Vec<usize>,
    pub replications: usize,
    pub q_t: usize,
    pub q0: f64,
    pub measure: MeasureSpec<f64>,
    pub m: usize,
    pub master_seed: u64,
    pub oracle_mode: bool,
}

impl ExperimentConfig {
    /// Desk-scale boxplot study: n ∈ {100, 1000, 10000}, 1000 replications.
    pub fn c1_boxplot() -> Self {
        Self {
            experiment: ExperimentKind::C1Boxplot,
            n_values: vec![100, 1000, 10_000],
            replications: 1000,
            q_t: 1,
            q0: 10.0,
            measure: MeasureSpec::default(),
            m: 256,
            master_seed: DEFAULT_SEED,
            oracle_mode: false,
        }
    }

    /// Boxplot study at its original size, 10000 replications per n.
    pub fn c1_boxplot_full() -> Self {
        Self {
            replications: 10_000,
            ..Self::c1_boxplot()
        }
    }

    /// Oracle-mode rate study: n ∈ {250, 1000, 4000, 16000}, 200 replications, m = 64.
    pub fn rate(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            n_values: vec![250, 1000, 4000, 16_000],
            replications: 200,
            q_t: 1,
            q0: 10.0,
            measure: MeasureSpec::default(),
            m: 64,
            master_seed: DEFAULT_SEED,
            oracle_mode: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() {
            return config("n_values must be nonempty");
        }
        if !self.n_values.windows(2).all(|w| w[0] < w[1]) {
            return config("n_values must be strictly ascending");
        }
        if self.n_values[0] < 2 {
            return config("every n must be at least 2");
        }
        if self.replications == 0 {
            return config("replications must be >= 1");
        }
        if self.q_t == 0 || self.m == 0 {
            return config("q_t and m must be >= 1");
        }
        CtmcConfig::new(self.q0)?;
        self.measure.validated()?;
        Ok(())
    }

    fn key(&self, n: usize, r: usize) -> StreamKey {
        StreamKey::new([self.master_seed, self.experiment.code(), n as u64, r as u64])
    }
}

/// Boxplot summary of one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme values within 1.5 IQR of the quartiles.
    pub whisker_low: f64,
    pub whisker_high: f64,
}

impl SummaryStats {
    pub fn from_values(n: usize, values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return usage("summary needs a nonempty list of finite values");
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let mean = sorted.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let (q1, median, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let whisker_low = *sorted.iter().find(|&&v| v >= lo_fence).expect("q1 lies above the fence");
        let whisker_high = *sorted.iter().rev().find(|&&v| v <= hi_fence).expect("q3 lies below the fence");
        Ok(Self {
            n,
            count,
            mean,
            std,
            std_error: std / (count as f64).sqrt(),
            min: sorted[0],
            q1,
            median,
            q3,
            max: sorted[count - 1],
            whisker_low,
            whisker_high,
        })
    }
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationValue {
    pub n: usize,
    pub rep: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Report {
    pub config: ExperimentConfig,
    pub reference_value: f64,
    pub summaries: Vec<SummaryStats>,
    #[serde(skip)]
    pub replications: Vec<ReplicationValue>,
}

impl C1Report {
    pub fn write_replications_csv<W: Write>(&self, out: W) -> Result<()> {
        write_csv_with_config(out, &self.config, &["n", "rep", "value"], |w| {
            for r in &self.replications {
                w.serialize((r.n, r.rep, r.value)).map_err(csv_err)?;
            }
            Ok(())
        })
    }
}

fn write_csv_with_config<W: Write>(
    mut out: W,
    config: &ExperimentConfig,
    header: &[&str],
    body: impl FnOnce(&mut csv::Writer<&mut W>) -> Result<()>,
) -> Result<()> {
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(header).map_err(csv_err)?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn latent_for(cfg: &ExperimentConfig, key: StreamKey, n: usize) -> Result<LatentSequence> {
    generate_latent_keyed(&TwoPointLatentConfig::continuous(cfg.master_seed), key, n)
}

fn empirical_cdfs(cfg: &ExperimentConfig, latent: &LatentSequence, key: StreamKey) -> Result<Vec<EmpiricalCdf>> {
    let scheme = SamplingScheme::equispaced(cfg.q_t)?;
    simulate_conjugate(latent, &CtmcConfig::new(cfg.q0)?, &scheme, key)?
        .into_iter()
        .map(EmpiricalCdf::new)
        .collect()
}

/// Runs `f` on cycles `1..=n` of replication `(n, r)`, as latent CDFs in
/// oracle mode and as empirical CDFs otherwise.
fn with_cycle_cdfs<T>(
    cfg: &ExperimentConfig,
    n: usize,
    r: usize,
    f: impl FnOnce(&dyn CycleCdfs) -> Result<T>,
) -> Result<T> {
    let key = cfg.key(n, r);
    let latent = latent_for(cfg, key, n)?;
    if cfg.oracle_mode {
        f(&&latent.states[1..])
    } else {
        let cdfs = empirical_cdfs(cfg, &latent, key)?;
        f(&cdfs.as_slice())
    }
}

/// Object-safe view over the two CDF flavours.
trait CycleCdfs {
    fn c1_at(&self, x: f64, y: f64) -> Result<f64>;
    fn c1_grid(&self, grid: &QuadratureGrid<f64>) -> Result<Kernel>;
}

impl<C: StepCdf<f64> + Sync> CycleCdfs for &[C] {
    fn c1_at(&self, x: f64, y: f64) -> Result<f64> {
        c1_hat_at(self, x, y)
    }

    fn c1_grid(&self, grid: &QuadratureGrid<f64>) -> Result<Kernel> {
        c1_hat(self, grid)
    }
}

/// Ĉ₁(0, 0) across replications for each n.
pub fn run_c1_experiment(cfg: &ExperimentConfig) -> Result<C1Report> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::C1Boxplot {
        return usage("run_c1_experiment needs experiment = c1_boxplot");
    }
    let mut summaries = Vec::new();
    let mut replications = Vec::new();
    for &n in &cfg.n_values {
        let values: Vec<f64> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| with_cycle_cdfs(cfg, n, r, |c| c.c1_at(0.0, 0.0)))
            .collect::<Result<_>>()?;
        summaries.push(SummaryStats::from_values(n, &values)?);
        replications.extend(values.into_iter().enumerate().map(|(rep, value)| ReplicationValue { n, rep, value }));
    }
    Ok(C1Report {
        config: cfg.clone(),
        reference_value: LAG1_COVARIANCE,
        summaries,
        replications,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub log_n: Vec<f64>,
    pub log_rmse: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log rmse` on `log n`.
pub fn fit_rate(ns: &[usize], rmse: &[f64]) -> Result<RateFit> {
    if ns.len() != rmse.len() {
        return usage("fit_rate: n and RMSE lists differ in length");
    }
    if ns.len() < 3 {
        return usage(format!("rate fit needs at least 3 sample sizes, got {}", ns.len()));
    }
    if let Some((n, e)) = ns.iter().zip(rmse).find(|(_, e)| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Numeric(format!(
            "rate fit rejected: RMSE {e} at n = {n} has no logarithm (estimate equals the target?)"
        )));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = rmse.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return usage("rate fit needs distinct sample sizes");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        log_n: x,
        log_rmse: y,
        slope,
        intercept,
        r_squared,
    })
}

/// Errors of one replication against the population operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReplication {
    pub n: usize,
    pub rep: usize,
    pub hs_distance: f64,
    pub sup_eigenvalue_gap: f64,
    /// Sign-aligned ‖ψ̂₁ - ψ₁‖ in L²(μ).
    pub eigenfunction_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub rmse: f64,
    pub eigenfunction_gap_mean: f64,
    pub eigenfunction_gap_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub config: ExperimentConfig,
    /// Leading eigenvalue of the discretized population operator.
    pub theta1: f64,
    pub fit: RateFit,
    pub points: Vec<RatePoint>,
    #[serde(skip)]
    pub replications: Vec<RateReplication>,
}

impl RateReport {
    pub fn write_replications_csv<W: Write>(&self, out: W) -> Result<()> {
        let header = ["n", "rep", "value", "hs_distance", "sup_eigenvalue_gap", "eigenfunction_gap"];
        let pick = statistic(self.config.experiment);
        write_csv_with_config(out, &self.config, &header, |w| {
            for r in &self.replications {
                w.serialize((r.n, r.rep, pick(r), r.hs_distance, r.sup_eigenvalue_gap, r.eigenfunction_gap))
                    .map_err(csv_err)?;
            }
            Ok(())
        })
    }
}

fn statistic(kind: ExperimentKind) -> fn(&RateReplication) -> f64 {
    match kind {
        ExperimentKind::RateEigen => |r| r.sup_eigenvalue_gap,
        _ => |r| r.hs_distance,
    }
}

/// The population operator on the grid, discretized the same way as the
/// estimate (quadrature composition of the true `C_1`).
pub fn population_operator(grid: &QuadratureGrid<f64>) -> Result<(Kernel, Spectrum)> {
    let r = r_hat(&true_c1_grid(grid))?;
    let s = eigendecompose(&r, DEFAULT_TOL)?;
    Ok((r, s))
}

/// RMSE of `‖R̂ - R‖_HS` (rate_hs) or `sup_j |θ̂_j - θ_j|` (rate_eigen) per n,
/// and the log-log fit of RMSE against n.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    if cfg.experiment == ExperimentKind::C1Boxplot {
        return usage("run_rate_experiment needs experiment = rate_hs or rate_eigen");
    }
    if cfg.n_values.len() < 3 {
        return usage(format!("rate fit needs at least 3 sample sizes, got {}", cfg.n_values.len()));
    }
    let grid = build_grid(cfg.measure, cfg.m)?;
    let (truth, truth_spectrum) = population_operator(&grid)?;

    let mut replications = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.n_values {
        let reps: Vec<RateReplication> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let c1 = with_cycle_cdfs(cfg, n, rep, |c| c.c1_grid(&grid))?;
                let r = r_hat(&c1)?;
                let spectrum = eigendecompose(&r, DEFAULT_TOL)?;
                let gap = spectrum_distance(&spectrum, &truth_spectrum)?;
                Ok(RateReplication {
                    n,
                    rep,
                    hs_distance: hs_distance(&r, &truth)?,
                    sup_eigenvalue_gap: gap.sup_eigenvalue_gap,
                    eigenfunction_gap: gap.eigenfunction_gaps[0],
                })
            })
            .collect::<Result<_>>()?;
        let pick = statistic(cfg.experiment);
        let k = reps.len() as f64;
        let rmse = (reps.iter().map(|r| pick(r).powi(2)).sum::<f64>() / k).sqrt();
        let gaps: Vec<f64> = reps.iter().map(|r| r.eigenfunction_gap).collect();
        let mean = gaps.iter().sum::<f64>() / k;
        let se = if reps.len() > 1 {
            (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
        } else {
            0.0
        };
        points.push(RatePoint {
            n,
            rmse,
            eigenfunction_gap_mean: mean,
            eigenfunction_gap_se: se,
        });
        replications.extend(reps);
    }
    let rmses: Vec<f64> = points.iter().map(|p| p.rmse).collect();
    let fit = fit_rate(&cfg.n_values, &rmses)?;
    Ok(RateReport {
        config: cfg.clone(),
        theta1: truth_spectrum.eigenvalues()[0],
        fit,
        points,
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_one_value_is_degenerate() {
        let s = SummaryStats::from_values(100, &[0.3]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (0.3, 0.3, 0.3, 0.3, 0.3));
        assert_eq!((s.whisker_low, s.whisker_high, s.std, s.count), (0.3, 0.3, 0.0, 1));
    }

    #[test]
    fn summary_quartiles_and_whiskers() {
        // quartiles by linear interpolation: 1..=9 -> 3, 5, 7; outlier 100 beyond 7 + 1.5·4
        let mut v: Vec<f64> = (1..=8).map(f64::from).collect();
        v.push(100.0);
        let s = SummaryStats::from_values(10, &v).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (3.0, 5.0, 7.0));
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 8.0));
        assert_eq!(s.max, 100.0);
        assert!(SummaryStats::from_values(1, &[]).is_err());
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let ns = [10, 100, 1000, 10_000];
        let e: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.5)).collect();
        let f = fit_rate(&ns, &e).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejections() {
        assert!(matches!(fit_rate(&[1, 2], &[1.0, 0.5]), Err(Error::Usage(_))));
        assert!(matches!(fit_rate(&[1, 2, 3], &[0.0, 0.0, 0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn self_distance_is_zero_and_unfittable() {
        let grid = build_grid(MeasureSpec::default(), 16).unwrap();
        let (truth, _) = population_operator(&grid).unwrap();
        let d = hs_distance(&truth, &truth).unwrap();
        assert_eq!(d, 0.0);
        assert!(fit_rate(&[10, 20, 40], &[d, d, d]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::c1_boxplot();
        assert!(c.validate().is_ok());
        c.n_values = vec![1000, 100];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::c1_boxplot();
        c.replications = 0;
        assert!(run_c1_experiment(&c).is_err());
        let c = ExperimentConfig::rate(ExperimentKind::RateHs);
        assert!(run_c1_experiment(&c).is_err());
        let mut c = ExperimentConfig::rate(ExperimentKind::RateHs);
        c.n_values = vec![10, 20];
        assert!(matches!(run_rate_experiment(&c), Err(Error::Usage(_))));
    }

    #[test]
    fn single_replication_boxplot() {
        let mut c = ExperimentConfig::c1_boxplot();
        c.n_values = vec![100];
        c.replications = 1;
        let rep = run_c1_experiment(&c).unwrap();
        let s = &rep.summaries[0];
        assert_eq!(s.count, 1);
        assert_eq!(s.q1, s.q3);
        assert_eq!(rep.replications.len(), 1);
        assert_eq!(rep.reference_value, 1.0 / 48.0);
    }

    #[test]
    fn key_derivation_is_injective_over_its_fields() {
        let c = ExperimentConfig::c1_boxplot();
        let mut e = c.clone();
        e.experiment = ExperimentKind::RateHs;
        let keys = [c.key(100, 0), c.key(100, 1), c.key(1000, 0), e.key(100, 0)];
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert_ne!(keys[i], keys[j]);
            }
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let mut c = ExperimentConfig::c1_boxplot();
        c.n_values = vec![50, 200];
        c.replications = 40;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_c1_experiment(&c).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.replications, b.replications);
        assert_eq!(a.summaries, b.summaries);

        let mut r = ExperimentConfig::rate(ExperimentKind::RateEigen);
        r.n_values = vec![50, 100, 200];
        r.replications = 5;
        r.m = 16;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_rate_experiment(&r).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn csv_carries_config() {
        let mut c = ExperimentConfig::c1_boxplot();
        c.n_values = vec![20];
        c.replications = 3;
        let rep = run_c1_experiment(&c).unwrap();
        let mut buf = Vec::new();
        rep.write_replications_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# config: {"));
        assert_eq!(lines.next(), Some("n,rep,value"));
        assert_eq!(lines.count(), 3);
    }
}

//! Monte Carlo studies of linear spectral statistics and the local law.
//!
//! Replicas are farmed out to a rayon pool; every replica draws from its own
//! stream and results are collected in replica order, so summaries do not
//! depend on the number of workers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clt::{clt_parameters, ContourOptions, TestFunction};
use crate::error::{Error, Result};
use crate::freeconv::FreeConvolution;
use crate::measures::{check_regularity, DiagonalMode};
use crate::quadrature::pairwise_sum;
use crate::rmt_sim::{centering_integral_with, lss_s, lss_t, resolvent_trace, simulate_spectrum, EnsembleConfig};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "WIGNERLAB_THREADS";

const MIN_REPLICAS_FOR_VERDICT: usize = 100;
const MIN_REPLICAS_FOR_KS: usize = 1000;
const KS_CRITICAL_1PCT: f64 = 1.63;
const DEGENERATE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    /// `Σ φ(λ_i) − N ∫ φ dρ̂_fc`
    T,
    /// `(Σ φ(λ_i) − N ∫ φ dρ_fc)/(√N ϑ)`
    S,
}

impl Statistic {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "T" | "t" => Ok(Statistic::T),
            "S" | "s" => Ok(Statistic::S),
            _ => Err(Error::Parse(format!("statistic must be T or S, got `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleConfig,
    pub phi: TestFunction,
    pub replicas: usize,
    pub statistic: Statistic,
    pub probe_points: Vec<Complex64>,
    pub output_path: Option<PathBuf>,
    pub contour: ContourOptions,
    /// Margin `ϖ` in the regularity requirement `inf ∫(v − x)⁻² dν ≥ 1 + ϖ`.
    pub varpi: f64,
    /// Requested worker count; `None` uses all cores. Always capped by
    /// [`THREADS_ENV`].
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleConfig, phi: TestFunction, replicas: usize, statistic: Statistic) -> Self {
        Self {
            ensemble,
            phi,
            replicas,
            statistic,
            probe_points: Vec::new(),
            output_path: None,
            contour: ContourOptions::default(),
            varpi: 0.1,
            workers: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// The statistic is identically zero and so is the theory.
    PassTrivial,
    /// Not enough replicas, or no theory value for this test function.
    Skipped,
}

impl Verdict {
    pub fn is_failure(self) -> bool {
        self == Verdict::Fail
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub mean: Verdict,
    pub variance: Verdict,
    pub ks: Verdict,
}

impl Verdicts {
    pub fn any_failure(&self) -> bool {
        self.mean.is_failure() || self.variance.is_failure() || self.ks.is_failure()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub measure: String,
    pub theta: f64,
    pub n: usize,
    pub replicas: usize,
    pub statistic: Statistic,
    pub v_mode: DiagonalMode,
    pub entries: String,
    pub w2: f64,
    pub w4: f64,
    pub master_seed: u64,
    pub phi: String,
    pub sample_mean: f64,
    pub sample_var: f64,
    pub se_mean: f64,
    pub se_var: f64,
    pub theory_m: Option<f64>,
    pub theory_v: Option<f64>,
    pub quad_error: Option<f64>,
    /// Extra allowance added to the mean band (`10/√N` for `T`).
    pub bias_allowance: f64,
    pub ks_stat: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub verdicts: Verdicts,
    pub warnings: Vec<String>,
}

/// Worker count after applying the [`THREADS_ENV`] cap.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut w = requested.unwrap_or(default).max(1);
    if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()) {
        if cap > 0 {
            w = w.min(cap);
        }
    }
    w
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_workers(workers))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Sample moments of a replica vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    /// Unbiased (`M − 1`) sample variance.
    pub var: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

pub fn sample_stats(xs: &[f64]) -> SampleStats {
    let m = xs.len() as f64;
    let mean = pairwise_sum(xs) / m;
    let central = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / m;
    let m2 = central(2);
    let var = if xs.len() > 1 { m2 * m / (m - 1.0) } else { 0.0 };
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (Some(central(3) / m2.powf(1.5)), Some(central(4) / (m2 * m2) - 3.0))
    } else {
        (None, None)
    };
    SampleStats {
        mean,
        var,
        skewness,
        excess_kurtosis,
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov–Smirnov distance between the standardized sample and `N(0, 1)`.
pub fn ks_statistic(xs: &[f64]) -> Option<f64> {
    let s = sample_stats(xs);
    if !(s.var > 0.0) {
        return None;
    }
    let sd = s.var.sqrt();
    let mut z: Vec<f64> = xs.iter().map(|x| (x - s.mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let m = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let f = normal_cdf(zi);
            f64::max((i as f64 + 1.0) / m - f, f - i as f64 / m)
        })
        .fold(0.0, f64::max);
    Some(d)
}

/// Replica values of `T_N` or `S_N` plus the summary.
pub fn run_clt_samples(config: &ExperimentConfig) -> Result<(ExperimentSummary, Vec<f64>)> {
    let ens = &config.ensemble;
    let mut warnings = ens.validate()?;
    if config.replicas < 2 {
        return Err(Error::Domain(format!("need at least 2 replicas, got {}", config.replicas)));
    }
    if config.statistic == Statistic::S && !(ens.theta > 0.0) {
        return Err(Error::Domain("the S statistic needs theta > 0".into()));
    }
    check_regularity(&ens.measure, config.varpi).into_result()?;
    if config.statistic == Statistic::T && ens.v_mode == DiagonalMode::IidSample {
        warnings.push("T statistic with iid diagonal: centered on the realized measure (exploratory)".into());
    }

    let (w2, w4) = (ens.entry.w2(), ens.entry.w4());
    let phi = &config.phi;
    let n = ens.n;
    let nf = n as f64;

    let (summary, samples) = with_pool(config.workers, || -> Result<_> {
        let theory = if phi.is_analytic() {
            Some(clt_parameters(&ens.measure, ens.theta, w2, w4, phi, config.contour)?)
        } else {
            warnings.push(format!("{} is not analytic: no theory values", phi.descriptor()));
            None
        };
        let (theory_m, theory_v) = match (config.statistic, theory) {
            (_, None) => (None, None),
            (Statistic::T, Some(p)) => (Some(p.m_phi), Some(p.v_phi)),
            (Statistic::S, Some(p)) => (Some(0.0), p.vtilde_phi),
        };

        // Fixed centering, when one value serves all replicas.
        let fixed = match (config.statistic, ens.deterministic_diag()) {
            (Statistic::S, _) => Some(centering_integral_with(&ens.measure, ens.theta, phi, config.contour)?),
            (Statistic::T, Some(v)) => Some(nf * centering_integral_with(&v, ens.theta, phi, config.contour)?),
            (Statistic::T, None) => None,
        };

        let samples = (0..config.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let spec = simulate_spectrum(ens, r)?;
                match config.statistic {
                    Statistic::S => lss_s(&spec.eigenvalues, phi, fixed.expect("set for S"), ens.theta, n),
                    Statistic::T => {
                        let c = match fixed {
                            Some(c) => c,
                            None => nf * centering_integral_with(&spec.v_used, ens.theta, phi, config.contour)?,
                        };
                        Ok(lss_t(&spec.eigenvalues, phi, c))
                    }
                }
            })
            .collect::<Result<Vec<f64>>>()?;

        let summary = summarize(config, &samples, theory_m, theory_v, theory.map(|p| p.quad_error), warnings);
        Ok((summary, samples))
    })??;

    if let Some(path) = &config.output_path {
        persist(&summary, path)?;
    }
    Ok((summary, samples))
}

pub fn run_clt_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    Ok(run_clt_samples(config)?.0)
}

fn summarize(
    config: &ExperimentConfig,
    samples: &[f64],
    theory_m: Option<f64>,
    theory_v: Option<f64>,
    quad_error: Option<f64>,
    warnings: Vec<String>,
) -> ExperimentSummary {
    let ens = &config.ensemble;
    let m = samples.len();
    let mf = m as f64;
    let stats = sample_stats(samples);
    let se_mean = (stats.var / mf).sqrt();
    let se_var = stats.var * (2.0 / (mf - 1.0)).sqrt();
    let bias_allowance = match config.statistic {
        Statistic::T => 10.0 / (ens.n as f64).sqrt(),
        Statistic::S => 0.0,
    };
    let ks_stat = ks_statistic(samples);
    let var_band = 4.0 * (2.0 / mf).sqrt();

    let verdicts = match (theory_m, theory_v) {
        _ if m < MIN_REPLICAS_FOR_VERDICT => Verdicts {
            mean: Verdict::Skipped,
            variance: Verdict::Skipped,
            ks: Verdict::Skipped,
        },
        (Some(tm), Some(tv)) if stats.var <= DEGENERATE * DEGENERATE => {
            let ok = (stats.mean - tm).abs() <= DEGENERATE && tv.abs() <= DEGENERATE;
            let v = if ok { Verdict::PassTrivial } else { Verdict::Fail };
            Verdicts {
                mean: v,
                variance: v,
                ks: Verdict::Skipped,
            }
        }
        (tm, tv) => {
            let mean = tm.map_or(Verdict::Skipped, |tm| {
                Verdict::from_bool((stats.mean - tm).abs() <= 4.0 * se_mean + bias_allowance)
            });
            let variance = tv.map_or(Verdict::Skipped, |tv| {
                if tv.abs() <= DEGENERATE {
                    // relative band undefined; use it as an absolute band
                    Verdict::from_bool((stats.var - tv).abs() <= var_band)
                } else {
                    Verdict::from_bool((stats.var / tv - 1.0).abs() <= var_band)
                }
            });
            let ks = match ks_stat {
                Some(d) if m >= MIN_REPLICAS_FOR_KS => Verdict::from_bool(d <= KS_CRITICAL_1PCT / mf.sqrt()),
                _ => Verdict::Skipped,
            };
            Verdicts { mean, variance, ks }
        }
    };

    ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        measure: ens.measure.descriptor(),
        theta: ens.theta,
        n: ens.n,
        replicas: m,
        statistic: config.statistic,
        v_mode: ens.v_mode,
        entries: ens.entry.descriptor(),
        w2: ens.entry.w2(),
        w4: ens.entry.w4(),
        master_seed: ens.master_seed,
        phi: config.phi.descriptor(),
        sample_mean: stats.mean,
        sample_var: stats.var,
        se_mean,
        se_var,
        theory_m,
        theory_v,
        quad_error,
        bias_allowance,
        ks_stat,
        skewness: stats.skewness,
        excess_kurtosis: stats.excess_kurtosis,
        verdicts,
        warnings,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLawRow {
    pub n: usize,
    pub z: Complex64,
    /// Median over replicas of `|m_N(z) − m̂_fc(z)|`.
    pub median_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub rows: Vec<LocalLawRow>,
    /// Least-squares slope of `log median` against `log N`, per probe point.
    pub slopes: Vec<(Complex64, f64)>,
}

pub const LOCAL_LAW_SIZES: [usize; 4] = [250, 500, 1000, 2000];

/// Deviation of the empirical Stieltjes transform from `m̂_fc`, built from
/// the realized diagonal of each replica. `ensemble.n` is overridden by
/// each entry of `sizes`.
pub fn local_law_probe(
    ensemble: &EnsembleConfig,
    sizes: &[usize],
    z_grid: &[Complex64],
    replicas: usize,
    workers: Option<usize>,
) -> Result<LocalLawReport> {
    if z_grid.is_empty() || sizes.len() < 2 || replicas == 0 {
        return Err(Error::Domain("local law probe needs probe points, >= 2 sizes and >= 1 replica".into()));
    }
    for z in z_grid {
        if z.im.abs() < 0.1 {
            return Err(Error::Domain(format!("probe point {z} is closer than 0.1 to the real axis")));
        }
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let ens = EnsembleConfig { n, ..ensemble.clone() };
        ens.validate()?;
        let per_replica: Vec<Vec<f64>> = with_pool(workers, || {
            (0..replicas as u64)
                .into_par_iter()
                .map(|r| {
                    let spec = simulate_spectrum(&ens, r)?;
                    let fc = FreeConvolution::new(&spec.v_used, ens.theta)?;
                    z_grid
                        .iter()
                        .map(|&z| Ok((resolvent_trace(&spec.eigenvalues, z) - fc.solve(z)?.m).norm()))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for (k, &z) in z_grid.iter().enumerate() {
            let mut devs: Vec<f64> = per_replica.iter().map(|d| d[k]).collect();
            rows.push(LocalLawRow {
                n,
                z,
                median_deviation: median(&mut devs),
            });
        }
    }
    let slopes = z_grid
        .iter()
        .map(|&z| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.z == z)
                .map(|r| ((r.n as f64).ln(), r.median_deviation.ln()))
                .collect();
            (z, ls_slope(&pts))
        })
        .collect();
    Ok(LocalLawReport { rows, slopes })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Writes the summary as versioned JSON.
pub fn persist(summary: &ExperimentSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ExperimentSummary> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("schema_version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => Ok(serde_json::from_value(value)?),
        Some(v) => Err(Error::SchemaMismatch {
            found: v.to_string(),
            expected: SCHEMA_VERSION,
        }),
        None => Err(Error::SchemaMismatch {
            found: "none".into(),
            expected: SCHEMA_VERSION,
        }),
    }
}

/// CSV `replica,value`.
pub fn write_samples_csv(path: &Path, samples: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "replica,value")?;
    for (r, x) in samples.iter().enumerate() {
        writeln!(f, "{r},{x:e}")?;
    }
    f.flush()?;
    Ok(())
}

/// CSV `replica,index,lambda` for the first `replicas` replicas.
pub fn write_spectra_csv(path: &Path, ensemble: &EnsembleConfig, replicas: usize) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "replica,index,lambda")?;
    for r in 0..replicas {
        let spec = simulate_spectrum(ensemble, r as u64)?;
        for (i, l) in spec.eigenvalues.iter().enumerate() {
            writeln!(f, "{r},{i},{l:e}")?;
        }
    }
    f.flush()?;
    Ok(())
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 a
//! verification check failed.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Deserialize;

use crate::clt::{clt_parameters, ContourOptions, TestFunction};
use crate::error::{Error, Result};
use crate::experiments::{
    local_law_probe, persist, run_clt_samples, write_samples_csv, write_spectra_csv, ExperimentConfig,
    ExperimentSummary, Statistic, Verdict, LOCAL_LAW_SIZES,
};
use crate::freeconv::FreeConvolution;
use crate::measures::{check_regularity, DiagonalMode, SpectralMeasure};
use crate::rmt_sim::{EnsembleConfig, EntryDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "wignerlab",
    version,
    about = "Deformed semicircle law, CLT parameters of linear spectral statistics, and Monte Carlo checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Density of the deformed semicircle law on a grid, as CSV `E,rho`.
    Density {
        #[command(flatten)]
        params: Params,
        /// Left end of the grid [default: L- - 0.5]
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        /// Right end of the grid [default: L+ + 0.5]
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        /// Number of grid points
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Imaginary part at which the density is read off, in [1e-9, 1e-3]
        #[arg(long, default_value_t = 1e-9)]
        eta: f64,
    },
    /// Support edges L- and L+.
    Edges {
        #[command(flatten)]
        params: Params,
    },
    /// Limiting mean M, variance V and random-deformation variance Vtilde, as JSON.
    CltParams {
        #[command(flatten)]
        params: Params,
    },
    /// Monte Carlo replicas of T_N or S_N; prints the JSON summary.
    Simulate {
        #[command(flatten)]
        params: Params,
        /// Write the replica values as CSV `replica,value`
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Write spectra as CSV `replica,index,lambda`
        #[arg(long)]
        spectra: Option<PathBuf>,
        /// Number of replicas whose spectra are written
        #[arg(long, default_value_t = 10)]
        spectra_replicas: usize,
    },
    /// Monte Carlo run with pass/fail verdicts against the theory; exits 3 if a check fails.
    Verify {
        #[command(flatten)]
        params: Params,
    },
    /// Median |m_N(z) - m_fc(z)| across matrix sizes and its log-log slope, as CSV.
    Locallaw {
        #[command(flatten)]
        params: Params,
        /// Probe point `re,im` (repeatable) [default: 0,2]
        #[arg(long = "z", allow_hyphen_values = true)]
        z: Vec<String>,
        /// Comma-separated matrix sizes [default: 250,500,1000,2000]
        #[arg(long)]
        sizes: Option<String>,
    },
}

/// Parameters shared by all subcommands; any of them may also come from
/// `--config`, with flags taking precedence.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Params {
    /// Deformation law: `two_point:a`, `uniform:a` or `discrete:path`
    #[arg(long)]
    pub measure: Option<String>,
    /// Coupling theta >= 0 [default: 0]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Diagonal entry variance w2 [default: 2]
    #[arg(long)]
    pub w2: Option<f64>,
    /// Off-diagonal fourth moment W4 [default: implied by --entries, 3 for the CLT formulas]
    #[arg(long)]
    #[serde(alias = "W4")]
    pub w4: Option<f64>,
    /// Test function: `poly:c0,c1,...` (ascending powers) or `bump:center,halfwidth,amplitude` [default: poly:0,0,1]
    #[arg(long)]
    pub phi: Option<String>,
    /// Matrix size N [default: 500]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of Monte Carlo replicas M [default: 1000; 32 for locallaw]
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Statistic `T` (deterministic centering) or `S` (random deformation) [default: T]
    #[arg(long)]
    pub statistic: Option<String>,
    /// Diagonal of the deformation: `quantile` or `iid` [default: quantile]
    #[arg(long)]
    #[serde(alias = "v_mode")]
    pub v_mode: Option<String>,
    /// Contour distance beyond the support edges [default: 0.5]
    #[arg(long)]
    pub margin: Option<f64>,
    /// Contour half-height [default: 0.5]
    #[arg(long)]
    pub v0: Option<f64>,
    /// Quadrature nodes per contour side [default: 64]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Write the result to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Entry law: `gaussian`, `rademacher` or `fourth:W4` [default: gaussian]
    #[arg(long)]
    pub entries: Option<String>,
    /// Regularity margin varpi: require inf of the inverse-square moment >= 1 + varpi [default: 0.1]
    #[arg(long)]
    pub varpi: Option<f64>,
    /// Worker threads (also capped by WIGNERLAB_THREADS) [default: all cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// TOML file with any of the keys above (kebab-case)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Params {
    /// Fills unset fields from the `--config` file.
    fn resolve(self) -> Result<Params> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = fs::read_to_string(&path)?;
        let file: Params =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.message())))?;
        macro_rules! pick {
            ($($f:ident),*) => { Params { $($f: self.$f.or(file.$f),)* config: self.config } };
        }
        Ok(pick!(
            measure, theta, w2, w4, phi, n, replicas, seed, statistic, v_mode, margin, v0, nodes, out, entries,
            varpi, workers
        ))
    }

    fn measure(&self) -> Result<SpectralMeasure> {
        let desc = self
            .measure
            .as_deref()
            .ok_or_else(|| Error::Domain("--measure is required".into()))?;
        SpectralMeasure::from_descriptor(desc)
    }

    fn theta(&self) -> Result<f64> {
        let t = self.theta.unwrap_or(0.0);
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain(format!("--theta must be finite and >= 0, got {t}")));
        }
        Ok(t)
    }

    fn phi(&self) -> Result<TestFunction> {
        TestFunction::parse(self.phi.as_deref().unwrap_or("poly:0,0,1"))
    }

    fn w2(&self) -> Result<f64> {
        let w2 = self.w2.unwrap_or(2.0);
        if !(w2.is_finite() && w2 > 0.0) {
            return Err(Error::Domain(format!("--w2 must be > 0, got {w2}")));
        }
        Ok(w2)
    }

    fn contour(&self) -> ContourOptions {
        let d = ContourOptions::default();
        ContourOptions {
            margin: self.margin.unwrap_or(d.margin),
            v0: self.v0.unwrap_or(d.v0),
            nodes_per_side: self.nodes.unwrap_or(d.nodes_per_side),
        }
    }

    fn entries(&self) -> Result<EntryDistribution> {
        let e = EntryDistribution::parse(self.entries.as_deref().unwrap_or("gaussian"), self.w2()?)?;
        if let Some(w4) = self.w4 {
            if w4 != e.w4() {
                return Err(Error::Domain(format!(
                    "--w4 {w4} contradicts --entries {} (fourth moment {}); use --entries fourth:{w4}",
                    e.descriptor(),
                    e.w4()
                )));
            }
        }
        Ok(e)
    }

    fn v_mode(&self) -> Result<DiagonalMode> {
        match self.v_mode.as_deref().unwrap_or("quantile") {
            "quantile" => Ok(DiagonalMode::DeterministicQuantile),
            "iid" => Ok(DiagonalMode::IidSample),
            other => Err(Error::Parse(format!("--v-mode must be `quantile` or `iid`, got `{other}`"))),
        }
    }

    fn ensemble(&self) -> Result<EnsembleConfig> {
        Ok(EnsembleConfig {
            n: self.n.unwrap_or(500),
            theta: self.theta()?,
            measure: self.measure()?,
            v_mode: self.v_mode()?,
            entry: self.entries()?,
            master_seed: self.seed.unwrap_or(0),
        })
    }

    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(
            self.ensemble()?,
            self.phi()?,
            self.replicas.unwrap_or(1000),
            Statistic::parse(self.statistic.as_deref().unwrap_or("T"))?,
        );
        cfg.contour = self.contour();
        cfg.varpi = self.varpi.unwrap_or(0.1);
        cfg.workers = self.workers;
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text)?,
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()?;
            }
        }
        Ok(())
    }
}

/// `x` with 9 significant digits.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..9).contains(&e) {
        format!("{:.*}", (8 - e).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

/// `x` rounded to 9 significant digits, as a JSON number.
fn round9(x: f64) -> serde_json::Value {
    let r: f64 = format!("{x:.8e}").parse::<f64>().unwrap_or(x) + 0.0;
    serde_json::Number::from_f64(r).map_or(serde_json::Value::Null, serde_json::Value::Number)
}

fn parse_point(s: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("probe point `{s}`: expected `re,im`"));
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    Ok(Complex64::new(
        re.trim().parse().map_err(|_| bad())?,
        im.trim().parse().map_err(|_| bad())?,
    ))
}

fn density_cmd(params: &Params, from: Option<f64>, to: Option<f64>, points: usize, eta: f64) -> Result<()> {
    let law = params.measure()?;
    let theta = params.theta()?;
    let fc = FreeConvolution::new(&law, theta)?;
    if points < 2 {
        return Err(Error::Domain("--points must be >= 2".into()));
    }
    let (lo, hi) = match (from, to) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let e = fc.edges()?;
            (from.unwrap_or(e.l_minus - 0.5), to.unwrap_or(e.l_plus + 0.5))
        }
    };
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty grid [{lo}, {hi}]")));
    }
    let mut text = String::from("E,rho\n");
    for k in 0..points {
        let e = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        text += &format!("{},{}\n", fmt9(e), fmt9(fc.density(e, eta)?));
    }
    params.emit(&text)
}

fn edges_cmd(params: &Params) -> Result<()> {
    let law = params.measure()?;
    let e = FreeConvolution::new(&law, params.theta()?)?.edges()?;
    params.emit(&format!("L- = {:.9} L+ = {:.9}\n", e.l_minus, e.l_plus))
}

fn clt_params_cmd(params: &Params) -> Result<()> {
    let law = params.measure()?;
    let theta = params.theta()?;
    let w2 = params.w2()?;
    let w4 = params.w4.unwrap_or(3.0);
    let phi = params.phi()?;
    let p = clt_parameters(&law, theta, w2, w4, &phi, params.contour())?;
    let record = serde_json::json!({
        "measure": law.descriptor(),
        "theta": theta,
        "w2": w2,
        "W4": w4,
        "phi": phi.descriptor(),
        "M": round9(p.m_phi),
        "V": round9(p.v_phi),
        "Vtilde": p.vtilde_phi.map_or(serde_json::Value::Null, round9),
        "quad_error": round9(p.quad_error),
    });
    params.emit(&format!("{record}\n"))
}

fn simulate_cmd(params: &Params, samples: Option<&PathBuf>, spectra: Option<&PathBuf>, k: usize) -> Result<()> {
    let cfg = params.experiment()?;
    let (summary, values) = run_clt_samples(&cfg)?;
    warn(&summary);
    if let Some(p) = samples {
        write_samples_csv(p, &values)?;
    }
    if let Some(p) = spectra {
        write_spectra_csv(p, &cfg.ensemble, k.min(cfg.replicas))?;
    }
    match &params.out {
        Some(p) => persist(&summary, p),
        None => params.emit(&(serde_json::to_string_pretty(&summary)? + "\n")),
    }
}

fn warn(summary: &ExperimentSummary) {
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::PassTrivial => "PASS (trivial)",
        Verdict::Skipped => "SKIPPED",
    }
}

fn verify_cmd(params: &Params) -> Result<bool> {
    let cfg = params.experiment()?;
    // fail fast, before any simulation
    check_regularity(&cfg.ensemble.measure, cfg.varpi).into_result()?;
    let summary = run_clt_samples(&cfg)?.0;
    warn(&summary);
    let s = &summary;
    let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), fmt9);
    let mut text = String::new();
    text += &format!(
        "mean      {:<15} sample {} theory {} se {} allowance {}\n",
        verdict_word(s.verdicts.mean),
        fmt9(s.sample_mean),
        opt(s.theory_m),
        fmt9(s.se_mean),
        fmt9(s.bias_allowance)
    );
    text += &format!(
        "variance  {:<15} sample {} theory {} band {}\n",
        verdict_word(s.verdicts.variance),
        fmt9(s.sample_var),
        opt(s.theory_v),
        fmt9(4.0 * (2.0 / s.replicas as f64).sqrt())
    );
    text += &format!(
        "ks        {:<15} D {} critical {}\n",
        verdict_word(s.verdicts.ks),
        opt(s.ks_stat),
        fmt9(1.63 / (s.replicas as f64).sqrt())
    );
    match &params.out {
        Some(p) => {
            persist(&summary, p)?;
            print!("{text}");
        }
        None => params.emit(&text)?,
    }
    Ok(!s.verdicts.any_failure())
}

fn locallaw_cmd(params: &Params, z: &[String], sizes: Option<&str>) -> Result<()> {
    let ensemble = EnsembleConfig {
        n: 2,
        ..params.ensemble()?
    };
    let points = if z.is_empty() {
        vec![Complex64::new(0.0, 2.0)]
    } else {
        z.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>>>()?
    };
    let sizes = match sizes {
        None => LOCAL_LAW_SIZES.to_vec(),
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("--sizes: `{t}` is not a positive integer")))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let report = local_law_probe(&ensemble, &sizes, &points, params.replicas.unwrap_or(32), params.workers)?;
    let mut text = String::from("N,z_re,z_im,median_deviation\n");
    for r in &report.rows {
        text += &format!("{},{},{},{}\n", r.n, fmt9(r.z.re), fmt9(r.z.im), fmt9(r.median_deviation));
    }
    for (z, slope) in &report.slopes {
        text += &format!("# slope at z = {}{:+}i: {}\n", fmt9(z.re), z.im, fmt9(*slope));
    }
    params.emit(&text)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Density {
            params,
            from,
            to,
            points,
            eta,
        } => density_cmd(&params.resolve()?, from, to, points, eta)?,
        Command::Edges { params } => edges_cmd(&params.resolve()?)?,
        Command::CltParams { params } => clt_params_cmd(&params.resolve()?)?,
        Command::Simulate {
            params,
            samples,
            spectra,
            spectra_replicas,
        } => simulate_cmd(&params.resolve()?, samples.as_ref(), spectra.as_ref(), spectra_replicas)?,
        Command::Verify { params } => {
            if !verify_cmd(&params.resolve()?)? {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Locallaw { params, z, sizes } => locallaw_cmd(&params.resolve()?, &z, sizes.as_deref())?,
    }
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = match &cli.command {
        Command::Density { .. } => "density",
        Command::Edges { .. } => "edges",
        Command::CltParams { .. } => "clt-params",
        Command::Simulate { .. } => "simulate",
        Command::Verify { .. } => "verify",
        Command::Locallaw { .. } => "locallaw",
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wignerlab {name}: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            }
        }
    }
}

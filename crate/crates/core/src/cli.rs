//! Command-line front end. Every command writes its outputs once, atomically,
//! into `--out`. Exit codes: 0 success, 1 contract or tolerance failure,
//! 2 usage or I/O error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::bohr_sommerfeld::{
    decay_sweep, predict, verify, ActionProfile, BohrSommerfeldError, Predictor, ProfileOptions,
    VerificationReport, DEFAULT_AREA_RESOLUTION, DEFAULT_GRID_SIZE,
};
use crate::io::{fmt_f64, write_atomic};
use crate::spectral::{eigh, SpectralError};
use crate::symbols::{sample_grid, SymbolError, SymplecticNormalization, TrigSymbol};
use crate::theta::{mass_concentration, ThetaBasis, ThetaError};
use crate::torus::{weyl_quantize, QuantumTorusParams};
use crate::Execution;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "BS_SPECTRA_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    SymbolFile { path: PathBuf, source: SymbolError },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    BohrSommerfeld(#[from] BohrSommerfeldError),
    #[error(transparent)]
    Theta(#[from] ThetaError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Usage(_) | CliError::SymbolFile { .. } => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "bs-spectra", version, about = "Quantized torus spectra and Bohr-Sommerfeld checks")]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full spectrum: `spectrum.csv` (k,j,lambda,residual).
    Spectrum(SpectrumArgs),
    /// Predicted vs computed low eigenvalues: `verify_k{K}.csv`,
    /// `zoom_k{K}.csv` and `verify_summary.json`.
    Verify(VerifyArgs),
    /// Eigenfunction modulus on the torus: `eigfun_k{K}.csv` (q,p,value).
    Eigfun(EigfunArgs),
    /// Residual decay exponents across k: `sweep.csv` (j,slope,intercept).
    Sweep(SweepArgs),
    /// Tabulated action: `profile.csv` (E,c0,f0).
    Profile(ProfileArgs),
    /// Nonzero matrix entries: `operator_k{K}.csv` (row,col,re,im).
    Operator(OperatorArgs),
    /// Symbol samples for contour plots: `symbol_grid.csv` (q,p,value).
    SymbolGrid(SymbolGridArgs),
}

#[derive(Debug, Args)]
pub struct SymbolArg {
    /// Symbol file with lines `m n re im`; the Harper symbol when omitted.
    #[arg(long)]
    pub symbol: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), conflicts_with = "k_list")]
    pub k: Option<u32>,
    /// Comma-separated list of k.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
    pub k_list: Vec<u32>,
}

impl KArgs {
    /// Ascending, without repeats.
    fn values(&self, default: &[u32]) -> Vec<usize> {
        let mut ks: Vec<usize> = match (self.k, self.k_list.is_empty()) {
            (Some(k), _) => vec![k as usize],
            (None, false) => self.k_list.iter().map(|&k| k as usize).collect(),
            (None, true) => default.iter().map(|&k| k as usize).collect(),
        };
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Args)]
pub struct ProfileSettings {
    /// Upper end of the prediction window; the midpoint between the minimum
    /// and the first critical value above it when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub e_cap: Option<f64>,
    /// Area-quadrature grid nodes per side.
    #[arg(long, default_value_t = DEFAULT_AREA_RESOLUTION)]
    pub resolution: usize,
    /// Number of energies in the action table.
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[command(flatten)]
    pub k: KArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[command(flatten)]
    pub k: KArgs,
    #[command(flatten)]
    pub profile: ProfileSettings,
    /// Energies for the counting check; `E_cap` when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct EigfunArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    /// Target energy; `a₀(0.7, 0.6)` when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Field grid points per side.
    #[arg(long, default_value_t = 512)]
    pub resolution: usize,
    /// Tube half-width for the reported concentration.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredictorKind {
    /// Harmonic approximation at the minimum.
    NearMin,
    /// Inverse of the tabulated action.
    Profile,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[command(flatten)]
    pub k: KArgs,
    #[arg(long, default_value_t = 9)]
    pub j_max: usize,
    #[arg(long, value_enum, default_value_t = PredictorKind::NearMin)]
    pub predictor: PredictorKind,
    /// Subprincipal value at the minimum for the near-minimum predictor.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a1: f64,
    #[command(flatten)]
    pub profile: ProfileSettings,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[command(flatten)]
    pub profile: ProfileSettings,
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
}

#[derive(Debug, Args)]
pub struct SymbolGridArgs {
    #[command(flatten)]
    pub symbol: SymbolArg,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
}

fn load_symbol(arg: &SymbolArg) -> Result<TrigSymbol> {
    match &arg.symbol {
        None => Ok(TrigSymbol::harper()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            TrigSymbol::parse(&text).map_err(|source| CliError::SymbolFile {
                path: path.clone(),
                source,
            })
        }
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn build_profile(sym: &TrigSymbol, s: &ProfileSettings, exec: Execution) -> Result<ActionProfile> {
    if s.resolution < 8 {
        return Err(CliError::Usage(format!("--resolution must be at least 8, got {}", s.resolution)));
    }
    Ok(ActionProfile::build(
        sym,
        SymplecticNormalization::torus(),
        ProfileOptions {
            e_cap: s.e_cap,
            grid_size: s.grid_size,
            area_resolution: s.resolution,
            exec,
        },
    )?)
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.clone(),
        source,
    })?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Spectrum(a) => cmd_spectrum(a, out, exec),
        Command::Verify(a) => cmd_verify(a, out, exec),
        Command::Eigfun(a) => cmd_eigfun(a, out, exec),
        Command::Sweep(a) => cmd_sweep(a, out, exec),
        Command::Profile(a) => cmd_profile(a, out, exec),
        Command::Operator(a) => cmd_operator(a, out),
        Command::SymbolGrid(a) => cmd_symbol_grid(a, out, exec),
    }
}

fn params(k: usize) -> QuantumTorusParams {
    QuantumTorusParams::new(k as i64).expect("k validated by the parser")
}

pub fn cmd_spectrum(a: &SpectrumArgs, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let ks = a.k.values(&[50]);
    let spectra = exec.map_slice(&ks, |&k| eigh(weyl_quantize(&sym, params(k)).matrix(), false));
    let mut csv = String::from("k,j,lambda,residual\n");
    for (k, s) in ks.iter().zip(spectra) {
        s?.append_csv_rows(*k, &mut csv);
    }
    Ok(vec![write_out(out, "spectrum.csv", &csv)?])
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingSummary {
    pub level: f64,
    pub count: usize,
    pub weyl: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZoomSummary {
    pub lo: f64,
    pub hi: f64,
    pub eigenvalues: usize,
    pub predictions: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRunSummary {
    pub k: usize,
    pub predictions: usize,
    pub rows: usize,
    pub unpaired_eigenvalues: usize,
    pub max_residual: f64,
    pub max_eigen_residual: f64,
    /// Mean of the first ten gap ratios (fewer if fewer rows).
    pub gap_ratio_mean_low: Option<f64>,
    pub gap_ratio_min_low: Option<f64>,
    pub gap_ratio_max_low: Option<f64>,
    pub counting: Vec<CountingSummary>,
    pub zoom: ZoomSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifySummary {
    pub e_min: f64,
    pub e_sep: f64,
    pub e_cap: f64,
    pub c0_prime_min: f64,
    pub c0_secant_at_min: f64,
    pub area_resolution: usize,
    pub grid_size: usize,
    pub runs: Vec<VerifyRunSummary>,
}

fn zoom_csv(report: &VerificationReport, hi: f64) -> (String, usize, usize) {
    let mut zoomed = report.clone();
    zoomed.rows.retain(|r| r.lambda <= hi);
    let preds = report.rows.iter().filter(|r| r.e_pred <= hi).count();
    let n = zoomed.rows.len();
    (zoomed.to_csv(), n, preds)
}

pub fn cmd_verify(a: &VerifyArgs, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let profile = build_profile(&sym, &a.profile, exec)?;
    let ks = a.k.values(&[50]);
    let levels = if a.levels.is_empty() {
        vec![profile.e_cap()]
    } else {
        a.levels.clone()
    };
    let spectra = exec.map_slice(&ks, |&k| eigh(weyl_quantize(&sym, params(k)).matrix(), false));
    let mut written = Vec::new();
    let mut runs = Vec::new();
    for (&k, spectrum) in ks.iter().zip(spectra) {
        let spectrum = spectrum?;
        let preds = predict(&profile, k)?;
        let report = verify(&spectrum, &preds, &profile, &levels)?;
        written.push(write_out(out, &format!("verify_k{k}.csv"), &report.to_csv())?);
        let (lo, hi) = profile.zoom_window(k);
        let (zcsv, zrows, zpreds) = zoom_csv(&report, hi);
        written.push(write_out(out, &format!("zoom_k{k}.csv"), &zcsv)?);
        let low: Vec<f64> = report.gap_ratios().into_iter().take(10).collect();
        let stat = |f: fn(f64, f64) -> f64| low.iter().copied().reduce(f);
        runs.push(VerifyRunSummary {
            k,
            predictions: preds.len(),
            rows: report.rows.len(),
            unpaired_eigenvalues: report.unpaired_eigenvalues,
            max_residual: report.max_residual(),
            max_eigen_residual: spectrum.max_residual(),
            gap_ratio_mean_low: (!low.is_empty()).then(|| low.iter().sum::<f64>() / low.len() as f64),
            gap_ratio_min_low: stat(f64::min),
            gap_ratio_max_low: stat(f64::max),
            counting: report
                .counting
                .iter()
                .map(|c| CountingSummary {
                    level: c.level,
                    count: c.count,
                    weyl: c.weyl,
                    defect: c.defect,
                })
                .collect(),
            zoom: ZoomSummary {
                lo,
                hi,
                eigenvalues: zrows,
                predictions: zpreds,
            },
        });
    }
    let summary = VerifySummary {
        e_min: profile.e_min(),
        e_sep: profile.geometry().separatrix(),
        e_cap: profile.e_cap(),
        c0_prime_min: profile.c0_prime_min(),
        c0_secant_at_min: profile.c0_secant_at_min(),
        area_resolution: profile.area_resolution(),
        grid_size: profile.e_grid().len(),
        runs,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary is plain data") + "\n";
    written.push(write_out(out, "verify_summary.json", &json)?);
    Ok(written)
}

pub fn cmd_eigfun(a: &EigfunArgs, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let k = a.k as usize;
    if a.resolution < 2 {
        return Err(CliError::Usage(format!("--resolution must be at least 2, got {}", a.resolution)));
    }
    let energy = a.energy.unwrap_or_else(|| sym.eval(0.7, 0.6));
    let s = eigh(weyl_quantize(&sym, params(k)).matrix(), true)?;
    let j = (0..s.dim())
        .min_by(|&x, &y| (s.eigenvalues[x] - energy).abs().total_cmp(&(s.eigenvalues[y] - energy).abs()))
        .expect("spectrum is nonempty");
    let vectors = s.eigenvectors.as_ref().expect("vectors requested");
    let v: Vec<Complex64> = vectors.column(j).iter().copied().collect();
    let basis = ThetaBasis::build(k as i64, a.resolution)?;
    let field = basis.eigenfunction_modulus(&v, exec)?;
    let frac = mass_concentration(&field, &sym, energy, a.delta)?;
    eprintln!(
        "k={k} j={j} lambda={} mass={} concentration={}",
        fmt_f64(s.eigenvalues[j]),
        fmt_f64(field.mass()),
        fmt_f64(frac)
    );
    Ok(vec![write_out(out, &format!("eigfun_k{k}.csv"), &field.to_csv())?])
}

pub fn cmd_sweep(a: &SweepArgs, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let ks = a.k.values(&[50, 100, 200, 400]);
    let norm = SymplecticNormalization::torus();
    let sweep = match a.predictor {
        PredictorKind::NearMin => {
            let geometry = crate::symbols::LevelGeometry::new(&sym, norm);
            decay_sweep(&geometry, &ks, a.j_max, Predictor::NearMinimum { a1_at_min: a.a1 }, exec)?
        }
        PredictorKind::Profile => {
            let profile = build_profile(&sym, &a.profile, exec)?;
            decay_sweep(profile.geometry(), &ks, a.j_max, Predictor::Profile(&profile), exec)?
        }
    };
    Ok(vec![write_out(out, "sweep.csv", &sweep.to_csv())?])
}

pub fn cmd_profile(a: &ProfileArgs, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let profile = build_profile(&sym, &a.profile, exec)?;
    let mut csv = String::from("E,c0,f0\n");
    let _ = writeln!(csv, "{},{},{}", fmt_f64(profile.e_min()), fmt_f64(0.0), fmt_f64(0.0));
    for ((e, c), f) in profile.e_grid().iter().zip(profile.c0()).zip(profile.f0_samples()) {
        let _ = writeln!(csv, "{},{},{}", fmt_f64(*e), fmt_f64(*c), fmt_f64(*f));
    }
    Ok(vec![write_out(out, "profile.csv", &csv)?])
}

pub fn cmd_operator(a: &OperatorArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let k = a.k as usize;
    let op = weyl_quantize(&sym, params(k));
    Ok(vec![write_out(out, &format!("operator_k{k}.csv"), &op.to_csv())?])
}

pub fn cmd_symbol_grid(a: &SymbolGridArgs, out: &Path, exec: Execution) -> Result<Vec<PathBuf>> {
    let sym = load_symbol(&a.symbol)?;
    let r = a.resolution;
    if r < 2 {
        return Err(CliError::Usage(format!("--resolution must be at least 2, got {r}")));
    }
    let values = sample_grid(&sym, r, exec);
    let mut csv = String::with_capacity(r * r * 72 + 16);
    csv.push_str("q,p,value\n");
    for i in 0..r {
        let q = fmt_f64(i as f64 / r as f64);
        for j in 0..r {
            let _ = writeln!(csv, "{q},{},{}", fmt_f64(j as f64 / r as f64), fmt_f64(values[i * r + j]));
        }
    }
    Ok(vec![write_out(out, "symbol_grid.csv", &csv)?])
}

/// Applies `BS_SPECTRA_THREADS` if set; returns an error text for bad values.
pub fn apply_thread_env() -> std::result::Result<(), String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(()),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                crate::par::configure_threads(n);
                Ok(())
            }
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got {v:?}")),
        },
    }
}

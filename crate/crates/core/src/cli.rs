//! Command-line front end.
//!
//! Exit status: 0 on success, 1 for usage and I/O errors, 2 when a numeric
//! guard trips (oracle size limit, `σ` too small for the recursive smoother).

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bank::{compute_bank, fig1_frequencies, BankSpec, SigmaRule};
use crate::bench::{check_report, run_bench, with_threads, BenchConfig, BenchRow, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::gabor::{gabor_filter, GaborParams};
use crate::image::RealImage;
use crate::io::{load_grayscale, write_bank_container, write_magnitude, write_sdft_container};
use crate::metrics::{format_db, per_pixel_counts, ser, OpCounters, Part};
use crate::oracle::{fir_gabor, OracleConfig};
use crate::sdft::{sdft_full, SdftSpec};
use crate::smoothing::SmootherKind;

/// Largest image `compare` accepts without `--force`.
pub const ORACLE_PIXEL_LIMIT: usize = 1 << 18;

#[derive(Debug, Parser)]
#[command(name = "fastgabor", version, about = "Fast 2-D complex Gabor filter banks and localized sliding DFTs")]
pub struct Cli {
    /// Worker threads (default: all cores, or 1 for `bench`).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter an image with a Gabor bank and write a GBNK container.
    Bank(BankArgs),
    /// Compute every bin of the localized sliding DFT.
    Sdft(SdftArgs),
    /// Sweep (ω, θ) and report SER of the fast path against the oracle as CSV.
    Compare(CompareArgs),
    /// Time reuse against no-reuse schedules and write a CSV report.
    Bench(BenchArgs),
    /// Validate a bench report and summarise it.
    CheckReport {
        /// Report written by `bench`.
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmootherArg {
    Iir,
    Fir,
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    /// Frequency sweep at θ = 60° followed by the orientation sweep at λ = 13.
    Full,
    Freq,
    Orient,
}

#[derive(Debug, Args)]
pub struct BankArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `fig1` or a comma-separated list of ω in rad/pixel.
    #[arg(long, default_value = "fig1")]
    pub frequencies: String,
    #[arg(long, default_value_t = 8)]
    pub orientations: usize,
    /// `rule` (σ = 2π/ω), one σ for every frequency, or one σ per frequency.
    #[arg(long, default_value = "rule")]
    pub sigma: String,
    #[arg(long, value_enum, default_value_t = SmootherArg::Iir)]
    pub smoother: SmootherArg,
    /// Also write one magnitude PGM per output into this directory.
    #[arg(long)]
    pub magnitudes: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SdftArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// `M` for a square window or `MyxMx`.
    #[arg(long, default_value = "8")]
    pub window: String,
    /// `rule` (⌊min(Mx, My)/2⌋/3) or a value.
    #[arg(long, default_value = "rule")]
    pub sigma: String,
    #[arg(long, value_enum, default_value_t = SmootherArg::Iir)]
    pub smoother: SmootherArg,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SweepArg::Full)]
    pub sweep: SweepArg,
    /// Fast-path smoother.
    #[arg(long, value_enum, default_value_t = SmootherArg::Iir)]
    pub smoother: SmootherArg,
    /// `rule` (σ = 2π/ω) or a fixed value.
    #[arg(long, default_value = "rule")]
    pub sigma: String,
    /// Run the oracle on images above the size limit.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Comma-separated orientation counts.
    #[arg(long, default_value = "8,14,20,26,32")]
    pub orientations: String,
    #[arg(long, default_value_t = 0.5)]
    pub omega: f64,
    #[arg(long, default_value_t = 7)]
    pub runs: usize,
    /// Side of the sliding-DFT image; 0 skips that sweep.
    #[arg(long, default_value_t = 256)]
    pub sdft_size: usize,
    /// Comma-separated window sides for the sliding-DFT sweep.
    #[arg(long, default_value = "4,8,16")]
    pub windows: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

/// Parses arguments and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric_guard() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    // bench defaults to one worker so timings compare schedules, not cores
    let threads = match (&cli.command, cli.threads) {
        (_, Some(0)) => return Err(Error::param("--threads must be at least 1")),
        (_, Some(t)) => Some(t),
        (Command::Bench(_), None) => Some(1),
        _ => None,
    };
    match threads {
        Some(t) => with_threads(t, move || dispatch(cli.command))?,
        None => dispatch(cli.command),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Bank(a) => cmd_bank(&a),
        Command::Sdft(a) => cmd_sdft(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::CheckReport { path } => cmd_check_report(&path),
    }
}

fn gaussian_smoother(arg: SmootherArg) -> Result<SmootherKind> {
    match arg {
        SmootherArg::Iir => Ok(SmootherKind::RecursiveIir),
        SmootherArg::Fir => Ok(SmootherKind::exact_fir()),
        SmootherArg::Box => Err(Error::param(
            "the box smoother is only available for the sliding DFT",
        )),
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::param(format!("bad {what} value {t:?}")))
        })
        .collect()
}

fn parse_counts(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::param(format!("bad {what} value {t:?}")))
        })
        .collect()
}

/// Bank schedule from the `--frequencies`, `--orientations` and `--sigma`
/// flags.
pub fn bank_spec_from_flags(frequencies: &str, orientations: usize, sigma: &str) -> Result<BankSpec> {
    let freqs = match frequencies.trim() {
        "fig1" => fig1_frequencies(),
        s => parse_list(s, "frequency")?,
    };
    let rule = match sigma.trim() {
        "rule" => SigmaRule::Wavelength,
        s => {
            let v = parse_list(s, "sigma")?;
            match v.len() {
                1 => SigmaRule::Explicit(vec![v[0]; freqs.len()]),
                _ => SigmaRule::Explicit(v),
            }
        }
    };
    BankSpec::new(freqs, orientations, rule)
}

/// `"8"` → (8, 8); `"4x8"` → (Mx, My) = (8, 4).
pub fn parse_window(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::param(format!("bad window {s:?}; expected M or MyxMx"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    match s.split_once(['x', 'X']) {
        Some((my, mx)) => Ok((parse(mx)?, parse(my)?)),
        None => {
            let m = parse(s)?;
            Ok((m, m))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn print_counters(c: &OpCounters, w: usize, h: usize) -> Result<()> {
    let pp = per_pixel_counts(c, w, h)?;
    println!("{c}");
    println!(
        "per_pixel multiplications={:.3} additions={:.3}",
        pp.multiplications, pp.additions
    );
    Ok(())
}

fn cmd_bank(a: &BankArgs) -> Result<()> {
    let spec = bank_spec_from_flags(&a.frequencies, a.orientations, &a.sigma)?;
    let kind = gaussian_smoother(a.smoother)?;
    let img = load_grayscale(&a.input)?;
    let mut counters = OpCounters::default();
    let out = compute_bank(&img, &spec, kind, &mut counters)?;
    write_bank_container(&out.entries, &a.output)?;
    if let Some(dir) = &a.magnitudes {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let n = spec.orientations;
        for (idx, (_, f)) in out.entries.iter().enumerate() {
            write_magnitude(f, dir.join(format!("f{}_o{}.pgm", idx / n, idx % n)))?;
        }
    }
    println!(
        "wrote {} outputs ({} frequencies x {} orientations) to {}",
        out.entries.len(),
        spec.frequencies.len(),
        spec.orientations,
        a.output.display()
    );
    print_counters(&counters, img.width(), img.height())
}

fn cmd_sdft(a: &SdftArgs) -> Result<()> {
    let (mx, my) = parse_window(&a.window)?;
    let kind = match a.smoother {
        SmootherArg::Box => SmootherKind::box_window(mx),
        s => gaussian_smoother(s)?,
    };
    let mut spec = SdftSpec::new(mx, my, kind)?;
    if a.sigma.trim() != "rule" {
        let s = a
            .sigma
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::param(format!("bad sigma value {:?}", a.sigma)))?;
        spec = spec.with_sigma(s)?;
    }
    let img = load_grayscale(&a.input)?;
    let mut counters = OpCounters::default();
    let out = sdft_full(&img, &spec, &mut counters)?;
    write_sdft_container(&out, &a.output)?;
    println!("wrote {} bins ({my}x{mx} window) to {}", mx * my, a.output.display());
    print_counters(&counters, img.width(), img.height())
}

/// Wavelengths of the frequency sweep, in pixels.
pub const SWEEP_WAVELENGTHS: [f64; 11] = [3.5, 3.9, 4.4, 4.9, 5.5, 6.2, 7.0, 7.9, 8.8, 9.8, 13.0];
/// Orientations of the orientation sweep, in degrees.
pub const SWEEP_DEGREES: [f64; 9] = [18.0, 36.0, 54.0, 72.0, 90.0, 108.0, 126.0, 144.0, 162.0];

/// One `(λ, θ)` sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub wavelength: f64,
    pub theta: f64,
}

pub fn sweep_points(sweep: SweepArg) -> Vec<SweepPoint> {
    let freq = SWEEP_WAVELENGTHS.iter().map(|&wavelength| SweepPoint {
        wavelength,
        theta: PI / 3.0,
    });
    let orient = SWEEP_DEGREES.iter().map(|d| SweepPoint {
        wavelength: 13.0,
        theta: d.to_radians(),
    });
    match sweep {
        SweepArg::Freq => freq.collect(),
        SweepArg::Orient => orient.collect(),
        SweepArg::Full => freq.chain(orient).collect(),
    }
}

/// SER of the fast path and of the exact-FIR control against the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub params: GaborParams,
    pub ser_real: f64,
    pub ser_imag: f64,
    pub control_real: f64,
    pub control_imag: f64,
}

/// Runs the sweep. `sigma` of `None` applies `σ = 2π/ω`.
pub fn compare_rows(
    img: &RealImage,
    points: &[SweepPoint],
    kind: SmootherKind,
    sigma: Option<f64>,
    force: bool,
) -> Result<Vec<CompareRow>> {
    let pixels = img.width() * img.height();
    if pixels > ORACLE_PIXEL_LIMIT && !force {
        return Err(Error::OracleGuard {
            pixels,
            limit: ORACLE_PIXEL_LIMIT,
        });
    }
    points
        .iter()
        .map(|pt| {
            let omega = TAU / pt.wavelength;
            let p = GaborParams::new(omega, pt.theta, sigma.unwrap_or(TAU / omega))?;
            let truth = fir_gabor(img, p, &OracleConfig::default())?;
            let mut c = OpCounters::default();
            let fast = gabor_filter(img, p, kind, &mut c)?;
            let control = gabor_filter(img, p, SmootherKind::exact_fir(), &mut c)?;
            Ok(CompareRow {
                params: p,
                ser_real: ser(&fast, &truth, Part::Real)?,
                ser_imag: ser(&fast, &truth, Part::Imag)?,
                control_real: ser(&control, &truth, Part::Real)?,
                control_imag: ser(&control, &truth, Part::Imag)?,
            })
        })
        .collect()
}

pub const COMPARE_HEADER: [&str; 9] = [
    "omega",
    "wavelength",
    "theta_deg",
    "sigma",
    "ser_real_db",
    "ser_imag_db",
    "control_real_db",
    "control_imag_db",
    "image",
];

pub fn write_compare_csv(rows: &[CompareRow], image_id: &str, out: impl Write) -> Result<()> {
    let err = |e: csv::Error| Error::param(format!("writing compare report: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_HEADER).map_err(err)?;
    for r in rows {
        let p = r.params;
        w.write_record([
            format!("{:.6}", p.omega()),
            format!("{:.4}", TAU / p.omega()),
            format!("{:.4}", p.theta().to_degrees()),
            format!("{:.6}", p.sigma()),
            format_db(r.ser_real),
            format_db(r.ser_imag),
            format_db(r.control_real),
            format_db(r.control_imag),
            image_id.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::param(format!("writing compare report: {e}")))
}

fn output_sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let kind = gaussian_smoother(a.smoother)?;
    let sigma = match a.sigma.trim() {
        "rule" => None,
        s => Some(
            s.parse::<f64>()
                .map_err(|_| Error::param(format!("bad sigma value {s:?}")))?,
        ),
    };
    let img = load_grayscale(&a.input)?;
    let rows = compare_rows(&img, &sweep_points(a.sweep), kind, sigma, a.force)?;
    let id = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    write_compare_csv(&rows, &id, output_sink(&a.output)?)
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        size: a.size,
        orientations: parse_counts(&a.orientations, "orientation count")?,
        omega: a.omega,
        runs: a.runs,
        sdft_size: a.sdft_size,
        windows: parse_counts(&a.windows, "window")?,
        smoother: SmootherKind::RecursiveIir,
        seed: a.seed,
    };
    if cfg.size == 0 || cfg.runs == 0 {
        return Err(Error::param("--size and --runs must be positive"));
    }
    let rows = run_bench(&cfg, |r: &BenchRow| {
        eprintln!(
            "{:?} {}: reuse {:.1} ms, no-reuse {:.1} ms, speedup {:.3}",
            r.family, r.param, r.reuse_ms, r.noreuse_ms, r.speedup
        );
    })?;
    crate::bench::write_report(&rows, output_sink(&a.output)?)
}

fn cmd_check_report(path: &Path) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let s = check_report(file)?;
    println!("rows={}", s.rows);
    for (n, sp) in &s.bank_speedups {
        println!("bank N={n} speedup={sp:.4}");
    }
    if let (Some(m), Some(a)) = (s.rm_reuse_fit, s.ra_reuse_fit) {
        println!(
            "reuse R_M slope={:.3} intercept={:.3} r2={:.6}",
            m.slope, m.intercept, m.r_squared
        );
        println!(
            "reuse R_A slope={:.3} intercept={:.3} r2={:.6}",
            a.slope, a.intercept, a.r_squared
        );
    }
    if let Some(m) = s.rm_noreuse_fit {
        println!("no-reuse R_M slope={:.3} r2={:.6}", m.slope, m.r_squared);
    }
    println!("speedup_monotone={}", s.speedup_monotone());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_flags() {
        assert_eq!(parse_window("8").unwrap(), (8, 8));
        assert_eq!(parse_window("4x16").unwrap(), (16, 4));
        assert!(parse_window("4x").is_err());
    }

    #[test]
    fn bank_flags() {
        let s = bank_spec_from_flags("fig1", 8, "rule").unwrap();
        assert_eq!(s.len(), 40);
        let s = bank_spec_from_flags("0.5,0.25", 4, "3").unwrap();
        assert_eq!(s.sigma_rule, SigmaRule::Explicit(vec![3.0, 3.0]));
        assert!(bank_spec_from_flags("0.5,x", 4, "rule").is_err());
        assert!(bank_spec_from_flags("0.5,0.25", 4, "1,2,3").is_err());
    }

    #[test]
    fn sweep_grid() {
        assert_eq!(sweep_points(SweepArg::Full).len(), 20);
        let f = sweep_points(SweepArg::Freq);
        assert!(f.iter().all(|p| (p.theta - PI / 3.0).abs() < 1e-15));
        assert!((sweep_points(SweepArg::Orient)[8].theta - 0.9 * PI).abs() < 1e-12);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["fastgabor", "bank"]), 1);
        assert_eq!(main_with_args(["fastgabor", "--help"]), 0);
    }

    #[test]
    fn oracle_guard() {
        let big = RealImage::zeros(1024, 512);
        let err = compare_rows(&big, &sweep_points(SweepArg::Freq), SmootherKind::RecursiveIir, None, false)
            .unwrap_err();
        assert!(err.is_numeric_guard());
    }
}

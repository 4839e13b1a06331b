//! Timing and operation-count sweeps, and the CSV report they produce.

use std::hint::black_box;
use std::io::{Read, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bank::{for_each_bank_output, BankSpec, Schedule, SigmaRule};
use crate::error::{Error, Result};
use crate::image::RealImage;
use crate::metrics::{fit_affine, per_pixel_counts, AffineFit, OpCounters};
use crate::sdft::{sdft_each, sdft_noreuse_each, SdftSpec};
use crate::smoothing::SmootherKind;

pub const DEFAULT_SEED: u64 = 0x5eed_6ab0;

/// Deterministic pseudo-random image, samples uniform in `[0, 255]`.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> RealImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealImage::from_fn(width, height, |_, _| rng.gen_range(0.0..=255.0))
}

/// Keeps freed heap memory mapped for the rest of the process, so repeated
/// runs reuse pages instead of faulting in fresh ones. Only has an effect
/// with glibc.
pub fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator tunables.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
    }
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(format!("cannot build a {threads}-thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Side of the square bank image.
    pub size: usize,
    pub orientations: Vec<usize>,
    /// Bank frequency; `σ = 2π/ω`.
    pub omega: f64,
    pub runs: usize,
    /// Side of the square sliding-DFT image; 0 skips the sliding-DFT sweep.
    pub sdft_size: usize,
    pub windows: Vec<usize>,
    pub smoother: SmootherKind,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            size: 1024,
            orientations: vec![8, 14, 20, 26, 32],
            omega: 0.5,
            runs: 7,
            sdft_size: 256,
            windows: vec![4, 8, 16],
            smoother: SmootherKind::RecursiveIir,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bank,
    Sdft,
}

impl Family {
    fn as_str(self) -> &'static str {
        match self {
            Family::Bank => "bank",
            Family::Sdft => "sdft",
        }
    }
}

/// One sweep point: orientation count `N` for the bank, window side `M`
/// for the sliding DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub family: Family,
    pub param: usize,
    pub width: usize,
    pub height: usize,
    pub runs: usize,
    pub reuse_ms: f64,
    pub noreuse_ms: f64,
    /// Median `noreuse / reuse` time ratio over consecutive pairs of
    /// interleaved runs.
    pub speedup: f64,
    pub rm_reuse: f64,
    pub ra_reuse: f64,
    pub rm_noreuse: f64,
    pub ra_noreuse: f64,
}

const HEADER: [&str; 12] = [
    "family",
    "param",
    "width",
    "height",
    "runs",
    "reuse_ms",
    "noreuse_ms",
    "speedup",
    "rm_reuse",
    "ra_reuse",
    "rm_noreuse",
    "ra_noreuse",
];

fn single_bank(n: usize, omega: f64) -> Result<BankSpec> {
    BankSpec::new(vec![omega], n, SigmaRule::Wavelength)
}

/// Counters of one bank run; outputs are discarded.
pub fn bank_counts(
    f: &RealImage,
    spec: &BankSpec,
    kind: SmootherKind,
    schedule: Schedule,
) -> Result<OpCounters> {
    let mut c = OpCounters::default();
    for_each_bank_output(f, spec, kind, schedule, &mut c, |_, _, _, img| {
        black_box(&img);
    })?;
    Ok(c)
}

/// Counters of one sliding-DFT run; outputs are discarded.
pub fn sdft_counts(f: &RealImage, spec: &SdftSpec, reuse: bool) -> Result<OpCounters> {
    let mut c = OpCounters::default();
    let sink = |_: usize, _: usize, img: crate::image::ComplexImage| {
        black_box(&img);
    };
    if reuse {
        sdft_each(f, spec, &mut c, sink)?;
    } else {
        sdft_noreuse_each(f, spec, &mut c, sink)?;
    }
    Ok(c)
}

struct PairTiming {
    reuse_ms: f64,
    noreuse_ms: f64,
    speedup: f64,
    reuse: OpCounters,
    noreuse: OpCounters,
}

/// Times `reuse` and `noreuse` alternately, `runs` times each after one
/// untimed warm-up pair. Durations are medians in milliseconds; the speedup
/// is the median ratio over consecutive pairs of pairs.
fn time_pair(
    runs: usize,
    mut reuse: impl FnMut() -> Result<OpCounters>,
    mut noreuse: impl FnMut() -> Result<OpCounters>,
) -> Result<PairTiming> {
    retain_freed_memory();
    let runs = runs.max(1);
    let (mut ta, mut tb) = (Vec::with_capacity(runs), Vec::with_capacity(runs));
    let (mut ca, mut cb) = (OpCounters::default(), OpCounters::default());
    let timed = |f: &mut dyn FnMut() -> Result<OpCounters>| -> Result<(f64, OpCounters)> {
        let start = Instant::now();
        let c = f()?;
        Ok((start.elapsed().as_secs_f64() * 1e3, c))
    };
    reuse()?;
    noreuse()?;
    for r in 0..runs {
        // alternate which schedule goes first to cancel slow drift
        if r % 2 == 0 {
            let (t, c) = timed(&mut reuse)?;
            ta.push(t);
            ca = c;
            let (t, c) = timed(&mut noreuse)?;
            tb.push(t);
            cb = c;
        } else {
            let (t, c) = timed(&mut noreuse)?;
            tb.push(t);
            cb = c;
            let (t, c) = timed(&mut reuse)?;
            ta.push(t);
            ca = c;
        }
    }
    // consecutive pairs run A B B A, so each quad's ratio cancels linear drift
    let ratios: Vec<f64> = if runs >= 2 {
        ta.chunks_exact(2)
            .zip(tb.chunks_exact(2))
            .map(|(a, b)| (b[0] + b[1]) / (a[0] + a[1]))
            .collect()
    } else {
        vec![tb[0] / ta[0]]
    };
    Ok(PairTiming {
        reuse_ms: median(&ta),
        noreuse_ms: median(&tb),
        speedup: median(&ratios),
        reuse: ca,
        noreuse: cb,
    })
}

fn row(
    family: Family,
    param: usize,
    f: &RealImage,
    runs: usize,
    t: PairTiming,
) -> Result<BenchRow> {
    let (w, h) = f.dims();
    let (a, b) = (per_pixel_counts(&t.reuse, w, h)?, per_pixel_counts(&t.noreuse, w, h)?);
    Ok(BenchRow {
        family,
        param,
        width: w,
        height: h,
        runs,
        reuse_ms: t.reuse_ms,
        noreuse_ms: t.noreuse_ms,
        speedup: t.speedup,
        rm_reuse: a.multiplications,
        ra_reuse: a.additions,
        rm_noreuse: b.multiplications,
        ra_noreuse: b.additions,
    })
}

pub fn bench_bank(
    f: &RealImage,
    n: usize,
    omega: f64,
    kind: SmootherKind,
    runs: usize,
) -> Result<BenchRow> {
    let spec = single_bank(n, omega)?;
    let timing = time_pair(
        runs,
        || bank_counts(f, &spec, kind, Schedule::Reuse),
        || bank_counts(f, &spec, kind, Schedule::NoReuse),
    )?;
    row(Family::Bank, n, f, runs, timing)
}

pub fn bench_sdft(f: &RealImage, m: usize, kind: SmootherKind, runs: usize) -> Result<BenchRow> {
    let spec = SdftSpec::new(m, m, kind)?;
    let timing = time_pair(
        runs,
        || sdft_counts(f, &spec, true),
        || sdft_counts(f, &spec, false),
    )?;
    row(Family::Sdft, m, f, runs, timing)
}

/// Full sweep; `progress` sees each row as it completes.
pub fn run_bench(cfg: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    let img = synthetic_image(cfg.size, cfg.size, cfg.seed);
    for &n in &cfg.orientations {
        let r = bench_bank(&img, n, cfg.omega, cfg.smoother, cfg.runs)?;
        progress(&r);
        rows.push(r);
    }
    if cfg.sdft_size > 0 {
        let img = synthetic_image(cfg.sdft_size, cfg.sdft_size, cfg.seed);
        for &m in &cfg.windows {
            let r = bench_sdft(&img, m, cfg.smoother, cfg.runs)?;
            progress(&r);
            rows.push(r);
        }
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::CorruptContainer(format!("bench report: {e}"))
}

pub fn write_report(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.family.as_str().to_string(),
            r.param.to_string(),
            r.width.to_string(),
            r.height.to_string(),
            r.runs.to_string(),
            format!("{:.4}", r.reuse_ms),
            format!("{:.4}", r.noreuse_ms),
            format!("{:.6}", r.speedup),
            format!("{:.6}", r.rm_reuse),
            format!("{:.6}", r.ra_reuse),
            format!("{:.6}", r.rm_noreuse),
            format!("{:.6}", r.ra_noreuse),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::CorruptContainer(format!("bench report: {e}")))
}

pub fn read_report(input: impl Read) -> Result<Vec<BenchRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::CorruptContainer(format!(
            "bench report: unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |field: &str| {
            Error::CorruptContainer(format!("bench report row {}: bad {field}", line + 1))
        };
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(HEADER[i]));
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| bad(HEADER[i]))
        };
        let family = match &rec[0] {
            "bank" => Family::Bank,
            "sdft" => Family::Sdft,
            _ => return Err(bad("family")),
        };
        rows.push(BenchRow {
            family,
            param: int(1)?,
            width: int(2)?,
            height: int(3)?,
            runs: int(4)?,
            reuse_ms: num(5)?,
            noreuse_ms: num(6)?,
            speedup: num(7)?,
            rm_reuse: num(8)?,
            ra_reuse: num(9)?,
            rm_noreuse: num(10)?,
            ra_noreuse: num(11)?,
        });
    }
    Ok(rows)
}

/// What the report checker derives from a bench report.
#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub rows: usize,
    /// `(N, speedup)` for the bank rows, in file order.
    pub bank_speedups: Vec<(usize, f64)>,
    pub rm_reuse_fit: Option<AffineFit>,
    pub ra_reuse_fit: Option<AffineFit>,
    pub rm_noreuse_fit: Option<AffineFit>,
}

impl ReportSummary {
    /// Speedup never decreases as `N` grows.
    pub fn speedup_monotone(&self) -> bool {
        let mut s = self.bank_speedups.clone();
        s.sort_by_key(|p| p.0);
        s.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// Validates a report and fits the per-pixel bank counts against `N`.
pub fn check_report(input: impl Read) -> Result<ReportSummary> {
    let rows = read_report(input)?;
    if rows.is_empty() {
        return Err(Error::CorruptContainer("bench report has no rows".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        let timings_ok = [r.reuse_ms, r.noreuse_ms].iter().all(|t| t.is_finite() && *t >= 0.0);
        if !timings_ok || !(r.speedup.is_finite() && r.speedup > 0.0) {
            return Err(Error::CorruptContainer(format!(
                "bench report row {}: bad timing or speedup {}",
                i + 1,
                r.speedup
            )));
        }
    }
    let bank: Vec<&BenchRow> = rows.iter().filter(|r| r.family == Family::Bank).collect();
    let xs: Vec<f64> = bank.iter().map(|r| r.param as f64).collect();
    let fit = |f: fn(&BenchRow) -> f64| -> Result<Option<AffineFit>> {
        if bank.len() < 2 {
            return Ok(None);
        }
        let ys: Vec<f64> = bank.iter().map(|r| f(r)).collect();
        fit_affine(&xs, &ys).map(Some)
    };
    Ok(ReportSummary {
        rows: rows.len(),
        bank_speedups: bank.iter().map(|r| (r.param, r.speedup)).collect(),
        rm_reuse_fit: fit(|r| r.rm_reuse)?,
        ra_reuse_fit: fit(|r| r.ra_reuse)?,
        rm_noreuse_fit: fit(|r| r.rm_noreuse)?,
    })
}

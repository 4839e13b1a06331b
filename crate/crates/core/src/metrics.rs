//! Signal-to-error ratio, arithmetic-operation counters and complexity fits.
//!
//! # Counting convention
//!
//! * Every real multiplication counts as one multiplication and every real
//!   addition or subtraction as one addition. A fused multiply-add counts as
//!   one of each.
//! * A recursive smoothing counts the coefficient multiplies and the
//!   accumulating adds of each recursion step, in each direction, plus the
//!   per-line boundary initialisation.
//! * Cosine/sine table construction is excluded; tables are built once per
//!   axis and shared by every line.
//! * Conjugate fills (copy and negate) are not filtering work and are not
//!   counted.
//!
//! Per-pixel figures divide the totals by `width · height`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::image::ComplexImage;

/// Arithmetic and smoothing tallies for one run. Mergeable by addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpCounters {
    pub multiplications: u64,
    pub additions: u64,
    /// 1-D smoothings performed along rows.
    pub smoothings_h: u64,
    /// 1-D smoothings performed along columns.
    pub smoothings_v: u64,
}

impl OpCounters {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub(crate) fn ops(&mut self, mults: u64, adds: u64) {
        self.multiplications += mults;
        self.additions += adds;
    }

    pub fn merge(&mut self, other: &OpCounters) {
        *self += *other;
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.multiplications += rhs.multiplications;
        self.additions += rhs.additions;
        self.smoothings_h += rhs.smoothings_h;
        self.smoothings_v += rhs.smoothings_v;
    }
}

impl Add for OpCounters {
    type Output = OpCounters;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl Sum for OpCounters {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(OpCounters::default(), Add::add)
    }
}

impl fmt::Display for OpCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "multiplications={} additions={} smoothings_h={} smoothings_v={}",
            self.multiplications, self.additions, self.smoothings_h, self.smoothings_v
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Real,
    Imag,
}

/// `10·log10(Σ truth² / Σ (approx − truth)²)` over one part of the planes.
///
/// Zero error gives `+∞`; an all-zero truth with nonzero error gives `−∞`.
pub fn ser(approx: &ComplexImage, truth: &ComplexImage, part: Part) -> Result<f64> {
    if approx.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            expected: truth.dims(),
            found: approx.dims(),
        });
    }
    let (a, t) = match part {
        Part::Real => (approx.re(), truth.re()),
        Part::Imag => (approx.im(), truth.im()),
    };
    let mut signal = 0.0;
    let mut error = 0.0;
    for (a, t) in a.iter().zip(t) {
        signal += t * t;
        error += (a - t) * (a - t);
    }
    Ok(if error == 0.0 {
        f64::INFINITY
    } else if signal == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (signal / error).log10()
    })
}

/// What a [`SerReport`] was measured on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SerSubject {
    Gabor(GaborParams),
    Bin { u: usize, v: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerReport {
    pub image_id: String,
    pub subject: SerSubject,
    pub ser_real: f64,
    pub ser_imag: f64,
}

impl SerReport {
    pub fn measure(
        image_id: impl Into<String>,
        subject: SerSubject,
        approx: &ComplexImage,
        truth: &ComplexImage,
    ) -> Result<Self> {
        Ok(Self {
            image_id: image_id.into(),
            subject,
            ser_real: ser(approx, truth, Part::Real)?,
            ser_imag: ser(approx, truth, Part::Imag)?,
        })
    }

    /// Line-oriented `key=value` form.
    pub fn to_kv_line(&self) -> String {
        let subject = match self.subject {
            SerSubject::Gabor(p) => format!(
                "omega={} theta={} sigma={}",
                p.omega(),
                p.theta(),
                p.sigma()
            ),
            SerSubject::Bin { u, v } => format!("u={u} v={v}"),
        };
        format!(
            "image={} {} ser_real={} ser_imag={}",
            self.image_id,
            subject,
            format_db(self.ser_real),
            format_db(self.ser_imag)
        )
    }
}

/// Formats a dB value for reports; infinite sentinels print as `inf`/`-inf`.
pub fn format_db(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.4}")
    }
}

/// Parses values written by [`format_db`].
pub fn parse_db(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok().filter(|v: &f64| v.is_finite()),
    }
}

/// Per-pixel operation counts `(R_M, R_A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerPixel {
    pub multiplications: f64,
    pub additions: f64,
}

pub fn per_pixel_counts(counters: &OpCounters, width: usize, height: usize) -> Result<PerPixel> {
    let pixels = width * height;
    if pixels == 0 {
        return Err(Error::param("per-pixel counts need a non-empty image"));
    }
    Ok(PerPixel {
        multiplications: counters.multiplications as f64 / pixels as f64,
        additions: counters.additions as f64 / pixels as f64,
    })
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<AffineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("affine fit needs at least two paired samples"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("affine fit needs at least two distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let predicted: Vec<f64> = xs.iter().map(|x| slope * x + intercept).collect();
    Ok(AffineFit {
        slope,
        intercept,
        r_squared: r_squared(ys, &predicted),
    })
}

/// Least-squares fit of `y = a·p + b·q` (no intercept).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTermFit {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
}

pub fn fit_two_term(p: &[f64], q: &[f64], ys: &[f64]) -> Result<TwoTermFit> {
    if p.len() != ys.len() || q.len() != ys.len() || ys.len() < 2 {
        return Err(Error::param("two-term fit needs at least two samples"));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (spp, sqq, spq) = (dot(p, p), dot(q, q), dot(p, q));
    let (spy, sqy) = (dot(p, ys), dot(q, ys));
    let det = spp * sqq - spq * spq;
    if det.abs() <= f64::EPSILON * spp * sqq {
        return Err(Error::param("two-term fit regressors are collinear"));
    }
    let a = (spy * sqq - sqy * spq) / det;
    let b = (sqy * spp - spy * spq) / det;
    let predicted: Vec<f64> = p.iter().zip(q).map(|(p, q)| a * p + b * q).collect();
    Ok(TwoTermFit {
        a,
        b,
        r_squared: r_squared(ys, &predicted),
    })
}

fn r_squared(ys: &[f64], predicted: &[f64]) -> f64 {
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = ys.iter().zip(predicted).map(|(y, p)| (y - p) * (y - p)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

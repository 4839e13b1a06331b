//! Brute-force references.
//!
//! Everything here is a direct 2-D sum per output pixel, with complex
//! exponentials evaluated from a 2-D table of the full phase rather than
//! from per-axis factors. Gaussian weights are unit-sum sampled kernels
//! truncated at `radius·σ`. Off-image taps take the clamped sample value
//! together with the phase of the clamped position, the same replicate
//! convention as the smoothing engine.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::image::{ComplexImage, RealImage};
use crate::sdft::SdftSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Gaussian support in multiples of `σ`; at least 3.
    pub radius: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { radius: 6.0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 3.0 && self.radius.is_finite()) {
            return Err(Error::param(format!(
                "oracle radius must be at least 3, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

/// Weights for offsets `−R..=R`.
fn gaussian_weights(sigma: f64, radius: f64) -> Vec<f64> {
    let r = (radius * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|d| (-0.5 * (d as f64 / sigma).powi(2)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

#[inline]
fn clamp(i: i64, n: usize) -> usize {
    i.clamp(0, n as i64 - 1) as usize
}

/// Table of `phase(a, b)` for `a ∈ [−(W−1), W−1]`, `b ∈ [−(H−1), H−1]`.
struct PhaseTable {
    w: usize,
    h: usize,
    cells: Vec<Complex64>,
}

impl PhaseTable {
    fn new(w: usize, h: usize, angle: impl Fn(i64, i64) -> f64) -> Self {
        let mut cells = Vec::with_capacity((2 * w - 1) * (2 * h - 1));
        for b in -(h as i64 - 1)..=(h as i64 - 1) {
            for a in -(w as i64 - 1)..=(w as i64 - 1) {
                cells.push(Complex64::from_polar(1.0, angle(a, b)));
            }
        }
        Self { w, h, cells }
    }

    #[inline]
    fn at(&self, a: i64, b: i64) -> Complex64 {
        let col = (a + self.w as i64 - 1) as usize;
        let row = (b + self.h as i64 - 1) as usize;
        self.cells[row * (2 * self.w - 1) + col]
    }
}

/// `out(x, y) = Σ_{dx,dy} g(dx)·g(dy)·f(c(x−dx), c(y−dy))·E(x − c(x−dx), y − c(y−dy))`,
/// where `c` clamps to the image and `ref_x`, `ref_y` shift the phase origin.
fn gaussian_sum(
    f: &RealImage,
    gx: &[f64],
    gy: &[f64],
    table: &PhaseTable,
    ref_x: i64,
    ref_y: i64,
) -> ComplexImage {
    let (w, h) = f.dims();
    let (rx, ry) = ((gx.len() / 2) as i64, (gy.len() / 2) as i64);
    let rows: Vec<Vec<Complex64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, wy) in gy.iter().enumerate() {
                        let n = clamp(y as i64 - (j as i64 - ry), h);
                        for (i, wx) in gx.iter().enumerate() {
                            let m = clamp(x as i64 - (i as i64 - rx), w);
                            let e = table.at(x as i64 - ref_x - m as i64, y as i64 - ref_y - n as i64);
                            acc += e * (wx * wy * f.get(m, n));
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    into_image(w, h, rows)
}

fn into_image(w: usize, h: usize, rows: Vec<Vec<Complex64>>) -> ComplexImage {
    let mut out = ComplexImage::zeros(w, h);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, z) in row.into_iter().enumerate() {
            out.set(x, y, (z.re, z.im));
        }
    }
    out
}

/// Direct 2-D complex Gabor filtering.
pub fn fir_gabor(f: &RealImage, p: GaborParams, cfg: &OracleConfig) -> Result<ComplexImage> {
    cfg.validate()?;
    let (w, h) = f.dims();
    let (c, s) = (p.omega() * p.theta().cos(), p.omega() * p.theta().sin());
    let table = PhaseTable::new(w, h, |a, b| c * a as f64 + s * b as f64);
    let g = gaussian_weights(p.sigma(), cfg.radius);
    Ok(gaussian_sum(f, &g, &g, &table, 0, 0))
}

/// Direct localized DFT for bin `(u, v)`: Gaussian weights, or unit weights
/// over the window when `spec` selects the box smoother.
pub fn localized_dft(
    f: &RealImage,
    u: usize,
    v: usize,
    spec: &SdftSpec,
    cfg: &OracleConfig,
) -> Result<ComplexImage> {
    spec.validate()?;
    cfg.validate()?;
    if u >= spec.mx || v >= spec.my {
        return Err(Error::param(format!(
            "bin ({u}, {v}) outside {}x{} window",
            spec.mx, spec.my
        )));
    }
    let (w, h) = f.dims();
    let (mx, my) = (spec.mx as i64, spec.my as i64);
    let table = PhaseTable::new(w + spec.mx, h + spec.my, |a, b| {
        let ax = (u as i64 * a).rem_euclid(mx) as f64 / mx as f64;
        let by = (v as i64 * b).rem_euclid(my) as f64 / my as f64;
        TAU * (ax + by)
    });
    let (ref_x, ref_y) = (mx / 2, my / 2);
    if !spec.smoother.is_box() {
        let g = gaussian_weights(spec.sigma, cfg.radius);
        return Ok(gaussian_sum(f, &g, &g, &table, ref_x, ref_y));
    }
    let rows: Vec<Vec<Complex64>> = (0..h as i64)
        .into_par_iter()
        .map(|y| {
            (0..w as i64)
                .map(|x| {
                    let (x0, y0) = (x - ref_x, y - ref_y);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for n in (y0..y0 + my).filter(|n| (0..h as i64).contains(n)) {
                        for m in (x0..x0 + mx).filter(|m| (0..w as i64).contains(m)) {
                            acc += table.at(x0 - m, y0 - n) * f.get(m as usize, n as usize);
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    Ok(into_image(w, h, rows))
}

/// Per-window DFT `X(x, y) = Σ_{j<Mx, k<My} f(x̂ + j, ŷ + k)·e^{−2πi(uj/Mx + vk/My)}`,
/// samples outside the image taken as zero.
pub fn windowed_dft(
    f: &RealImage,
    u: usize,
    v: usize,
    mx: usize,
    my: usize,
) -> Result<ComplexImage> {
    if mx == 0 || my == 0 || u >= mx || v >= my {
        return Err(Error::param(format!("bin ({u}, {v}) outside {mx}x{my} window")));
    }
    let (w, h) = f.dims();
    let mut out = ComplexImage::zeros(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let (x0, y0) = (x - (mx / 2) as i64, y - (my / 2) as i64);
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..my {
                for j in 0..mx {
                    let (m, n) = (x0 + j as i64, y0 + k as i64);
                    if m < 0 || n < 0 || m >= w as i64 || n >= h as i64 {
                        continue;
                    }
                    let angle = -TAU * ((u * j) as f64 / mx as f64 + (v * k) as f64 / my as f64);
                    acc += Complex64::from_polar(f.get(m as usize, n as usize), angle);
                }
            }
            out.set(x as usize, y as usize, (acc.re, acc.im));
        }
    }
    Ok(out)
}

//! Single 2-D complex Gabor filter via the separable kernel decomposition.
//!
//! `F(x, y) = Σ G(x − k)·G(y − l)·f(k, l)·exp(i(ω_c(x − k) + ω_s(y − l)))`
//! with `ω_c = ω cos θ` and `ω_s = ω sin θ`, evaluated as a horizontal pass
//! producing `J` followed by a vertical pass over `J`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};
use crate::metrics::OpCounters;
use crate::smoothing::{Smoother, SmootherKind};
use crate::stage::{column_pass, row_pass, AxisModulation, Planes};

/// Frequency (rad/pixel), orientation (rad, in `[0, π)`) and Gaussian scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    omega: f64,
    theta: f64,
    sigma: f64,
}

impl GaborParams {
    /// Validates `omega > 0` and `sigma > 0` and folds `theta` into `[0, π)`.
    pub fn new(omega: f64, theta: f64, sigma: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::param(format!("omega must be positive, got {omega}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {sigma}")));
        }
        if !theta.is_finite() {
            return Err(Error::param(format!("theta must be finite, got {theta}")));
        }
        let mut theta = theta.rem_euclid(PI);
        if theta >= PI {
            theta = 0.0;
        }
        Ok(Self {
            omega,
            theta,
            sigma,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `ω cos θ`, the horizontal modulation frequency.
    pub fn omega_c(&self) -> f64 {
        self.omega * self.theta.cos()
    }

    /// `ω sin θ`, the vertical modulation frequency.
    pub fn omega_s(&self) -> f64 {
        self.omega * self.theta.sin()
    }
}

/// Output of the horizontal pass, kept for the vertical pass and for
/// conjugate reuse.
#[derive(Debug, Clone)]
pub struct HorizontalStage {
    j: ComplexImage,
    params: GaborParams,
    smoother: Smoother,
}

impl HorizontalStage {
    pub fn j(&self) -> &ComplexImage {
        &self.j
    }

    pub fn params(&self) -> GaborParams {
        self.params
    }

    pub fn smoother(&self) -> SmootherKind {
        self.smoother.kind()
    }

    pub fn into_j(self) -> ComplexImage {
        self.j
    }

    /// Vertical pass over `J` (or `conj(J)`) at frequency `ω_s`.
    pub(crate) fn vertical(&self, conj: bool, counters: &mut OpCounters) -> ComplexImage {
        let (w, h) = self.j.dims();
        let md = AxisModulation::gabor(self.params.omega_s(), h);
        let (out, c) = column_pass(Planes::complex(&self.j, conj), w, h, &md, &self.smoother);
        *counters += c;
        out
    }
}

/// Filters every row of `f` at `ω_c`, giving `J`.
pub fn horizontal_stage(
    f: &RealImage,
    p: GaborParams,
    kind: SmootherKind,
    counters: &mut OpCounters,
) -> Result<HorizontalStage> {
    let smoother = Smoother::new(kind, p.sigma())?;
    let (w, h) = f.dims();
    let md = AxisModulation::gabor(p.omega_c(), w);
    let (j, c) = row_pass(Planes::real(f.data()), w, h, &md, &smoother);
    *counters += c;
    Ok(HorizontalStage {
        j,
        params: p,
        smoother,
    })
}

/// Filters every column of `J` at `ω_s`, giving the Gabor output `F`.
pub fn vertical_stage(h: &HorizontalStage, counters: &mut OpCounters) -> Result<ComplexImage> {
    Ok(h.vertical(false, counters))
}

/// Horizontal then vertical pass.
pub fn gabor_filter(
    f: &RealImage,
    p: GaborParams,
    kind: SmootherKind,
    counters: &mut OpCounters,
) -> Result<ComplexImage> {
    let h = horizontal_stage(f, p, kind, counters)?;
    vertical_stage(&h, counters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{fir_taps, smooth_1d};

    fn noise(w: usize, h: usize, seed: u64) -> RealImage {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        RealImage::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 255.0
        })
    }

    #[test]
    fn params_fold_theta() {
        let p = GaborParams::new(0.5, PI + 0.25, 3.0).unwrap();
        assert!((p.theta() - 0.25).abs() < 1e-15);
        assert_eq!(GaborParams::new(0.5, PI, 3.0).unwrap().theta(), 0.0);
        assert!(GaborParams::new(0.0, 0.0, 3.0).is_err());
        assert!(GaborParams::new(0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn vertical_orientation_leaves_rows_unmodulated() {
        let f = noise(17, 9, 3);
        let p = GaborParams::new(0.7, PI / 2.0, 2.0).unwrap();
        let mut c = OpCounters::default();
        let h = horizontal_stage(&f, p, SmootherKind::exact_fir(), &mut c).unwrap();
        for y in 0..9 {
            let direct = smooth_1d(f.row(y), SmootherKind::exact_fir(), 2.0, &mut c).unwrap();
            for x in 0..17 {
                let (re, im) = h.j().get(x, y);
                assert!((re - direct[x]).abs() < 1e-12);
                assert!(im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_response_has_closed_form() {
        let (w, h, x0, y0) = (41, 37, 20, 17);
        let sigma = 2.5;
        let mut f = RealImage::zeros(w, h);
        f.set(x0, y0, 1.0);
        let taps = fir_taps(sigma, 6.0);
        let g = |d: i64| taps.get(d.unsigned_abs() as usize).copied().unwrap_or(0.0);
        let p = GaborParams::new(0.6, 1.1, sigma).unwrap();
        let mut c = OpCounters::default();
        let stage = horizontal_stage(&f, p, SmootherKind::exact_fir(), &mut c).unwrap();
        let out = vertical_stage(&stage, &mut c).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as i64 - x0 as i64, y as i64 - y0 as i64);
                let (jr, ji) = stage.j().get(x, y);
                let jw = if y == y0 { g(dx) } else { 0.0 };
                let a = p.omega_c() * dx as f64;
                assert!((jr - jw * a.cos()).abs() < 1e-12 && (ji - jw * a.sin()).abs() < 1e-12);
                let amp = g(dx) * g(dy);
                let phase = p.omega_c() * dx as f64 + p.omega_s() * dy as f64;
                let (re, im) = out.get(x, y);
                assert!((re - amp * phase.cos()).abs() < 1e-10);
                assert!((im - amp * phase.sin()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_input_zero_output() {
        let f = RealImage::zeros(8, 5);
        let p = GaborParams::new(0.3, 0.4, 6.0).unwrap();
        let mut c = OpCounters::default();
        let out = gabor_filter(&f, p, SmootherKind::RecursiveIir, &mut c).unwrap();
        assert!(out.re().iter().chain(out.im()).all(|v| *v == 0.0));
    }

    #[test]
    fn two_smoothings_per_line() {
        let f = noise(13, 7, 1);
        let p = GaborParams::new(0.3, 0.4, 6.0).unwrap();
        let mut c = OpCounters::default();
        gabor_filter(&f, p, SmootherKind::RecursiveIir, &mut c).unwrap();
        assert_eq!(c.smoothings_h, 2 * 7);
        assert_eq!(c.smoothings_v, 2 * 13);
    }

    #[test]
    fn horizontal_orientation_only_smooths_columns() {
        let f = noise(11, 19, 5);
        let p = GaborParams::new(0.9, 0.0, 1.5).unwrap();
        let mut c = OpCounters::default();
        let stage = horizontal_stage(&f, p, SmootherKind::exact_fir(), &mut c).unwrap();
        let out = vertical_stage(&stage, &mut c).unwrap();
        for x in 0..11 {
            let col_re: Vec<f64> = (0..19).map(|y| stage.j().get(x, y).0).collect();
            let col_im: Vec<f64> = (0..19).map(|y| stage.j().get(x, y).1).collect();
            let sr = smooth_1d(&col_re, SmootherKind::exact_fir(), 1.5, &mut c).unwrap();
            let si = smooth_1d(&col_im, SmootherKind::exact_fir(), 1.5, &mut c).unwrap();
            for y in 0..19 {
                let (re, im) = out.get(x, y);
                assert!((re - sr[y]).abs() < 1e-12 && (im - si[y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_sigma_iir_is_a_numeric_guard() {
        let f = noise(4, 4, 2);
        let p = GaborParams::new(0.3, 0.0, 0.3).unwrap();
        let err = gabor_filter(&f, p, SmootherKind::RecursiveIir, &mut OpCounters::default())
            .unwrap_err();
        assert!(err.is_numeric_guard());
    }
}

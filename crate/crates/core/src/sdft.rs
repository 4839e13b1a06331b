//! Gaussian-windowed 2-D localized sliding DFT.
//!
//! Bin `(u, v)` at pixel `(x, y)` is
//! `F_{u,v}(x, y) = Σ_{m,n} G(x − m)·G(y − n)·f(m, n)·exp(i(ω_x u(x̂ − m) + ω_y v(ŷ − n)))`
//! with `ω_x = 2π/Mx`, `ω_y = 2π/My`, `x̂ = x − ⌊Mx/2⌋` and `ŷ = y − ⌊My/2⌋`.
//! With the box smoother the weights are 1 over `[x̂, x̂ + Mx − 1] × [ŷ, ŷ + My − 1]`,
//! which is the conventional per-window DFT.
//!
//! For real input, `J_{Mx−u} = conj(J_u)` and `F_{u,v} = conj(F_{Mx−u, My−v})`
//! (indices mod `M`), so only `⌊Mx/2⌋ + 1` horizontal passes and
//! `Mx·(⌊My/2⌋ + 1)` vertical passes are run. When `My < Mx` the roles of
//! the axes swap.

use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{ComplexImage, RealImage};
use crate::metrics::OpCounters;
use crate::smoothing::{Smoother, SmootherKind};
use crate::stage::{column_pass, row_pass, AxisModulation, Planes};

/// Window size, Gaussian scale and smoother.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdftSpec {
    pub mx: usize,
    pub my: usize,
    pub sigma: f64,
    /// With [`SmootherKind::Box`], the window extents come from `mx` and
    /// `my` and the box's own extents are ignored.
    pub smoother: SmootherKind,
}

impl SdftSpec {
    /// Spec with the default `σ = ⌊min(Mx, My)/2⌋ / 3`.
    pub fn new(mx: usize, my: usize, smoother: SmootherKind) -> Result<Self> {
        let spec = Self {
            mx,
            my,
            sigma: Self::default_sigma(mx, my),
            smoother,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn default_sigma(mx: usize, my: usize) -> f64 {
        (mx.min(my) / 2) as f64 / 3.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.mx == 0 || self.my == 0 {
            return Err(Error::param(format!(
                "window must be at least 1x1, got {}x{}",
                self.my, self.mx
            )));
        }
        if !self.smoother.is_box() && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::param(format!(
                "sigma must be positive, got {} (window {}x{})",
                self.sigma, self.my, self.mx
            )));
        }
        self.smoother.validate()
    }

    fn axis_smoother(&self, m: usize) -> Result<Smoother> {
        match self.smoother {
            SmootherKind::Box { .. } => Smoother::new(SmootherKind::box_window(m), 1.0),
            kind => Smoother::new(kind, self.sigma),
        }
    }
}

/// All `Mx·My` bins of one image.
#[derive(Debug, Clone)]
pub struct SdftOutput {
    mx: usize,
    my: usize,
    sigma: f64,
    bins: Vec<ComplexImage>,
    pub counters: OpCounters,
}

impl SdftOutput {
    pub fn mx(&self) -> usize {
        self.mx
    }

    pub fn my(&self) -> usize {
        self.my
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bin(&self, u: usize, v: usize) -> &ComplexImage {
        assert!(u < self.mx && v < self.my, "bin ({u}, {v}) out of range");
        &self.bins[u * self.my + v]
    }

    /// Bins as `(u, v, image)`, `u`-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &ComplexImage)> + '_ {
        self.bins
            .iter()
            .enumerate()
            .map(move |(i, b)| (i / self.my, i % self.my, b))
    }
}

/// Horizontal pass at bin `u`.
pub fn sdft_horizontal(
    f: &RealImage,
    u: usize,
    spec: &SdftSpec,
    counters: &mut OpCounters,
) -> Result<ComplexImage> {
    spec.validate()?;
    check_bin(u, spec.mx, "u")?;
    let (w, h) = f.dims();
    let (j, c) = row_pass(
        Planes::real(f.data()),
        w,
        h,
        &AxisModulation::sdft(u, spec.mx, w),
        &spec.axis_smoother(spec.mx)?,
    );
    *counters += c;
    Ok(j)
}

/// One bin, computed directly with a horizontal then a vertical pass.
pub fn sdft_bin(
    f: &RealImage,
    u: usize,
    v: usize,
    spec: &SdftSpec,
    counters: &mut OpCounters,
) -> Result<ComplexImage> {
    check_bin(v, spec.my, "v")?;
    let j = sdft_horizontal(f, u, spec, counters)?;
    let (w, h) = f.dims();
    let (out, c) = column_pass(
        Planes::complex(&j, false),
        w,
        h,
        &AxisModulation::sdft(v, spec.my, h),
        &spec.axis_smoother(spec.my)?,
    );
    *counters += c;
    Ok(out)
}

fn check_bin(b: usize, m: usize, name: &str) -> Result<()> {
    if b >= m {
        return Err(Error::param(format!("bin {name}={b} outside 0..{m}")));
    }
    Ok(())
}

/// All bins with horizontal reuse, conjugate reuse and the final conjugate
/// fill. Counters cover only the computed bins.
pub fn sdft_full(f: &RealImage, spec: &SdftSpec, counters: &mut OpCounters) -> Result<SdftOutput> {
    let (mx, my) = (spec.mx, spec.my);
    let slots: Mutex<Vec<Option<ComplexImage>>> = Mutex::new((0..mx * my).map(|_| None).collect());
    let mut local = OpCounters::default();
    sdft_each(f, spec, &mut local, |u, v, img| {
        slots.lock().expect("sdft output lock poisoned")[u * my + v] = Some(img);
    })?;
    *counters += local;
    let bins = slots
        .into_inner()
        .expect("sdft output lock poisoned")
        .into_iter()
        .map(|s| s.expect("every bin filled"))
        .collect();
    Ok(SdftOutput {
        mx,
        my,
        sigma: spec.sigma,
        bins,
        counters: local,
    })
}

/// Streaming form of [`sdft_full`]: each bin goes to `sink(u, v, image)` as
/// soon as it is ready, a conjugate-filled bin right after its partner.
/// `sink` may be called from several threads at once.
pub fn sdft_each<S>(f: &RealImage, spec: &SdftSpec, counters: &mut OpCounters, sink: S) -> Result<()>
where
    S: Fn(usize, usize, ComplexImage) + Sync,
{
    spec.validate()?;
    let (w, h) = f.dims();
    let (mx, my) = (spec.mx, spec.my);
    let sx = spec.axis_smoother(mx)?;
    let sy = spec.axis_smoother(my)?;
    // the axis with the smaller window goes first
    let x_first = my >= mx;
    let (m1, m2) = if x_first { (mx, my) } else { (my, mx) };
    let emit = |a: usize, b: usize, img: ComplexImage| {
        if x_first {
            sink(a, b, img)
        } else {
            sink(b, a, img)
        }
    };

    let first: Vec<(ComplexImage, OpCounters)> = (0..=m1 / 2)
        .into_par_iter()
        .map(|b| {
            if x_first {
                row_pass(Planes::real(f.data()), w, h, &AxisModulation::sdft(b, mx, w), &sx)
            } else {
                column_pass(Planes::real(f.data()), w, h, &AxisModulation::sdft(b, my, h), &sy)
            }
        })
        .collect();
    let mut local: OpCounters = first.iter().map(|(_, c)| *c).sum();

    let tasks: Vec<(usize, usize)> = (0..m1)
        .flat_map(|a| (0..=m2 / 2).map(move |b| (a, b)))
        .collect();
    local += tasks
        .par_iter()
        .map(|&(a, b)| {
            let (src, conj) = if a <= m1 / 2 {
                (&first[a].0, false)
            } else {
                (&first[m1 - a].0, true)
            };
            let (img, c) = if x_first {
                column_pass(Planes::complex(src, conj), w, h, &AxisModulation::sdft(b, my, h), &sy)
            } else {
                row_pass(Planes::complex(src, conj), w, h, &AxisModulation::sdft(b, mx, w), &sx)
            };
            if b > 0 && m2 - b > m2 / 2 {
                emit((m1 - a) % m1, m2 - b, img.conj());
            }
            emit(a, b, img);
            c
        })
        .sum::<OpCounters>();
    *counters += local;
    Ok(())
}

/// Every bin computed directly and independently, handed to `sink(u, v,
/// image)` as it completes. Baseline for timing.
pub fn sdft_noreuse_each<S>(
    f: &RealImage,
    spec: &SdftSpec,
    counters: &mut OpCounters,
    sink: S,
) -> Result<()>
where
    S: Fn(usize, usize, ComplexImage) + Sync,
{
    spec.validate()?;
    let c = (0..spec.mx * spec.my)
        .into_par_iter()
        .map(|i| -> Result<OpCounters> {
            let (u, v) = (i / spec.my, i % spec.my);
            let mut c = OpCounters::default();
            sink(u, v, sdft_bin(f, u, v, spec, &mut c)?);
            Ok(c)
        })
        .try_reduce(OpCounters::default, |a, b| Ok(a + b))?;
    *counters += c;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> RealImage {
        let mut s = seed.wrapping_add(0x2545f4914f6cdd1d);
        RealImage::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(0x5851f42d4c957f2d).wrapping_add(14057);
            ((s >> 33) % 1000) as f64 / 4.0
        })
    }

    #[test]
    fn default_sigma_follows_cutoff_rule() {
        assert!((SdftSpec::default_sigma(8, 8) - 4.0 / 3.0).abs() < 1e-15);
        assert!((SdftSpec::default_sigma(16, 4) - 2.0 / 3.0).abs() < 1e-15);
        assert!(SdftSpec::new(1, 1, SmootherKind::exact_fir()).is_err());
        assert!(SdftSpec::new(1, 1, SmootherKind::box_window(1)).is_ok());
    }

    #[test]
    fn zero_bin_is_a_plain_row_smoothing() {
        let f = noise(12, 5, 1);
        let spec = SdftSpec::new(4, 4, SmootherKind::exact_fir()).unwrap();
        let mut c = OpCounters::default();
        let j = sdft_horizontal(&f, 0, &spec, &mut c).unwrap();
        for y in 0..5 {
            let direct =
                crate::smoothing::smooth_1d(f.row(y), SmootherKind::exact_fir(), spec.sigma, &mut c)
                    .unwrap();
            for x in 0..12 {
                assert!((j.get(x, y).0 - direct[x]).abs() < 1e-12);
                assert_eq!(j.get(x, y).1, 0.0);
            }
        }
    }

    #[test]
    fn box_impulse_gives_window_phases() {
        // window [x − 2, x + 1]; an impulse at m contributes e^{−iπ(m − x̂)/2}
        let mut f = RealImage::zeros(9, 1);
        f.set(4, 0, 1.0);
        let spec = SdftSpec::new(4, 1, SmootherKind::box_window(4)).unwrap();
        let j = sdft_horizontal(&f, 1, &spec, &mut OpCounters::default()).unwrap();
        for x in 0..9 {
            let xhat = x as i64 - 2;
            let k = 4 - xhat;
            let (re, im) = j.get(x, 0);
            if (0..4).contains(&k) {
                let a = -std::f64::consts::FRAC_PI_2 * k as f64;
                assert!((re - a.cos()).abs() < 1e-12 && (im - a.sin()).abs() < 1e-12);
            } else {
                assert!(re.abs() < 1e-12 && im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn horizontal_conjugate_symmetry() {
        let f = noise(16, 6, 4);
        let spec = SdftSpec::new(8, 8, SmootherKind::RecursiveIir).unwrap();
        let mut c = OpCounters::default();
        for u in 1..8 {
            let a = sdft_horizontal(&f, u, &spec, &mut c).unwrap();
            let b = sdft_horizontal(&f, 8 - u, &spec, &mut c).unwrap();
            assert!(a.max_relative_error(&b.conj()) <= 1e-12);
        }
    }

    #[test]
    fn constant_image_box_spectrum() {
        let f = RealImage::from_fn(12, 12, |_, _| 3.0);
        let spec = SdftSpec::new(4, 4, SmootherKind::box_window(4)).unwrap();
        let out = sdft_full(&f, &spec, &mut OpCounters::default()).unwrap();
        for (u, v, img) in out.iter() {
            for y in 2..11 {
                for x in 2..11 {
                    let (re, im) = img.get(x, y);
                    let expect = if (u, v) == (0, 0) { 48.0 } else { 0.0 };
                    assert!((re - expect).abs() < 1e-10 && im.abs() < 1e-10, "({u},{v})");
                }
            }
        }
    }

    #[test]
    fn full_matches_single_bins_both_orders() {
        let f = noise(14, 11, 8);
        for (mx, my) in [(4, 4), (4, 8), (8, 4), (3, 5), (6, 2)] {
            let spec = SdftSpec::new(mx, my, SmootherKind::exact_fir())
                .unwrap()
                .with_sigma(1.3)
                .unwrap();
            let full = sdft_full(&f, &spec, &mut OpCounters::default()).unwrap();
            for u in 0..mx {
                for v in 0..my {
                    let single = sdft_bin(&f, u, v, &spec, &mut OpCounters::default()).unwrap();
                    let err = full.bin(u, v).max_relative_error(&single);
                    assert!(err <= 1e-12, "{mx}x{my} ({u},{v}): {err}");
                }
            }
        }
    }

    #[test]
    fn smoothing_count_law() {
        let (w, h) = (10, 7);
        let f = noise(w, h, 3);
        for (mx, my) in [(4usize, 4usize), (4, 8), (8, 8), (5, 7)] {
            let spec = SdftSpec::new(mx, my, SmootherKind::exact_fir()).unwrap();
            let mut c = OpCounters::default();
            sdft_full(&f, &spec, &mut c).unwrap();
            assert_eq!(c.smoothings_h, (2 * h * (mx / 2 + 1)) as u64);
            assert_eq!(c.smoothings_v, (2 * w * mx * (my / 2 + 1)) as u64);
        }
        let spec = SdftSpec::new(8, 4, SmootherKind::exact_fir()).unwrap();
        let mut c = OpCounters::default();
        sdft_full(&f, &spec, &mut c).unwrap();
        assert_eq!(c.smoothings_v, (2 * w * 3) as u64);
        assert_eq!(c.smoothings_h, (2 * h * 4 * 5) as u64);
    }

    #[test]
    fn noreuse_baseline_matches() {
        let f = noise(9, 9, 2);
        let spec = SdftSpec::new(4, 4, SmootherKind::RecursiveIir).unwrap();
        let full = sdft_full(&f, &spec, &mut OpCounters::default()).unwrap();
        let mut c = OpCounters::default();
        let errs = std::sync::Mutex::new(Vec::new());
        sdft_noreuse_each(&f, &spec, &mut c, |u, v, img| {
            errs.lock().unwrap().push(img.max_relative_error(full.bin(u, v)));
        })
        .unwrap();
        let errs = errs.into_inner().unwrap();
        assert_eq!(errs.len(), 16);
        assert!(errs.iter().all(|e| *e <= 1e-12));
        assert_eq!(c.smoothings_h, 2 * 9 * 16);
    }
}

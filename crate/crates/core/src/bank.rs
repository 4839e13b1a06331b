//! Gabor filter banks with conjugate reuse across orientations.
//!
//! For real input, the horizontal intermediate of orientation `π − θ` is the
//! complex conjugate of that of `θ`. With `N_h = ⌊N/2⌋`, orientations
//! `k = 0..=N_h` are computed directly and every `k > N_h` runs only the
//! vertical pass, over the conjugated intermediate of `N − k`.

use std::f64::consts::{PI, TAU};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gabor::{horizontal_stage, GaborParams, HorizontalStage};
use crate::image::{ComplexImage, RealImage};
use crate::metrics::OpCounters;
use crate::smoothing::SmootherKind;

/// How `σ` is chosen for each frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaRule {
    /// `σ = 2π/ω`.
    Wavelength,
    /// One `σ` per frequency.
    Explicit(Vec<f64>),
}

/// Frequencies `Ω` and orientation count `N` (`θ_k = kπ/N`).
#[derive(Debug, Clone, PartialEq)]
pub struct BankSpec {
    pub frequencies: Vec<f64>,
    pub orientations: usize,
    pub sigma_rule: SigmaRule,
}

impl BankSpec {
    pub fn new(frequencies: Vec<f64>, orientations: usize, sigma_rule: SigmaRule) -> Result<Self> {
        let spec = Self {
            frequencies,
            orientations,
            sigma_rule,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Five octave-spaced frequencies `ω_i = 2^{−(i+2)/2}`, eight
    /// orientations, `σ = 2π/ω`.
    pub fn fig1() -> Self {
        Self {
            frequencies: fig1_frequencies(),
            orientations: 8,
            sigma_rule: SigmaRule::Wavelength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orientations == 0 {
            return Err(Error::param("a bank needs at least one orientation"));
        }
        if self.frequencies.is_empty() {
            return Err(Error::param("a bank needs at least one frequency"));
        }
        if let Some(w) = self.frequencies.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::param(format!("frequencies must be positive, got {w}")));
        }
        if let SigmaRule::Explicit(s) = &self.sigma_rule {
            if s.len() != self.frequencies.len() {
                return Err(Error::param(format!(
                    "{} sigma values given for {} frequencies",
                    s.len(),
                    self.frequencies.len()
                )));
            }
            if let Some(v) = s.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::param(format!("sigma must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self, i: usize) -> f64 {
        match &self.sigma_rule {
            SigmaRule::Wavelength => TAU / self.frequencies[i],
            SigmaRule::Explicit(s) => s[i],
        }
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * PI / self.orientations as f64
    }

    pub fn params(&self, i: usize, k: usize) -> Result<GaborParams> {
        GaborParams::new(self.frequencies[i], self.theta(k), self.sigma(i))
    }

    /// Number of outputs, `|Ω|·N`.
    pub fn len(&self) -> usize {
        self.frequencies.len() * self.orientations
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn fig1_frequencies() -> Vec<f64> {
    (0..5).map(|i| 2f64.powf(-((i + 2) as f64) / 2.0)).collect()
}

/// Bank outputs ordered frequency-major, then by orientation.
#[derive(Debug, Clone)]
pub struct BankOutput {
    pub entries: Vec<(GaborParams, ComplexImage)>,
    pub counters: OpCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Conjugate reuse of the horizontal intermediate.
    Reuse,
    /// Full two-pass pipeline for every orientation.
    NoReuse,
}

/// Real plane copied, imaginary plane negated.
pub fn conjugate_image(j: &ComplexImage) -> ComplexImage {
    j.conj()
}

/// Output at orientation `π − θ` from the intermediate computed at `θ`.
pub fn vertical_stage_conjugate(
    h: &HorizontalStage,
    counters: &mut OpCounters,
) -> Result<ComplexImage> {
    Ok(h.vertical(true, counters))
}

/// Runs the bank and hands each output to `sink(frequency_index,
/// orientation_index, params, image)` as soon as it is ready. `sink` may be
/// called from several threads at once, in any order.
pub fn for_each_bank_output<S>(
    f: &RealImage,
    spec: &BankSpec,
    kind: SmootherKind,
    schedule: Schedule,
    counters: &mut OpCounters,
    sink: S,
) -> Result<()>
where
    S: Fn(usize, usize, GaborParams, ComplexImage) + Sync,
{
    spec.validate()?;
    let n = spec.orientations;
    let direct = match schedule {
        Schedule::Reuse => n / 2 + 1,
        Schedule::NoReuse => n,
    }
    .min(n);
    for i in 0..spec.frequencies.len() {
        let c = (0..direct)
            .into_par_iter()
            .map(|k| -> Result<OpCounters> {
                let mut c = OpCounters::default();
                let p = spec.params(i, k)?;
                let stage = horizontal_stage(f, p, kind, &mut c)?;
                sink(i, k, p, stage.vertical(false, &mut c));
                let partner = n - k;
                if schedule == Schedule::Reuse && k > 0 && partner >= direct {
                    let out = vertical_stage_conjugate(&stage, &mut c)?;
                    sink(i, partner, spec.params(i, partner)?, out);
                }
                Ok(c)
            })
            .try_reduce(OpCounters::default, |a, b| Ok(a + b))?;
        *counters += c;
    }
    Ok(())
}

fn collect(
    f: &RealImage,
    spec: &BankSpec,
    kind: SmootherKind,
    schedule: Schedule,
    counters: &mut OpCounters,
) -> Result<BankOutput> {
    let n = spec.orientations;
    let slots: Mutex<Vec<Option<(GaborParams, ComplexImage)>>> =
        Mutex::new((0..spec.len()).map(|_| None).collect());
    let mut local = OpCounters::default();
    for_each_bank_output(f, spec, kind, schedule, &mut local, |i, k, p, img| {
        slots.lock().expect("bank output lock poisoned")[i * n + k] = Some((p, img));
    })?;
    *counters += local;
    let entries = slots
        .into_inner()
        .expect("bank output lock poisoned")
        .into_iter()
        .map(|e| e.expect("every bank slot is filled"))
        .collect();
    Ok(BankOutput {
        entries,
        counters: local,
    })
}

/// Bank with conjugate reuse.
pub fn compute_bank(
    f: &RealImage,
    spec: &BankSpec,
    kind: SmootherKind,
    counters: &mut OpCounters,
) -> Result<BankOutput> {
    collect(f, spec, kind, Schedule::Reuse, counters)
}

/// Bank computing every orientation independently.
pub fn compute_bank_noreuse(
    f: &RealImage,
    spec: &BankSpec,
    kind: SmootherKind,
    counters: &mut OpCounters,
) -> Result<BankOutput> {
    collect(f, spec, kind, Schedule::NoReuse, counters)
}

//! 1-D Gaussian smoothing engine.
//!
//! Three interchangeable implementations share one interface:
//!
//! * [`SmootherKind::RecursiveIir`]: constant cost per sample regardless of
//!   `σ`. For `σ ≥ 5` this is the third-order Young–van Vliet recursion, run
//!   causally and then anticausally. For `0.5 ≤ σ < 5`, where no third-order
//!   design stays within 1e-3 of the sampled Gaussian, it is Deriche's
//!   fourth-order causal + anticausal recursion.
//! * [`SmootherKind::ExactFir`]: direct convolution with the unit-sum sampled
//!   Gaussian truncated at `radius · σ`.
//! * [`SmootherKind::Box`]: unnormalised moving sum over a fixed window.
//!
//! Gaussian kinds extend lines by replicating the edge samples. The box kind
//! treats samples outside the line as zero.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrics::OpCounters;

/// Smallest `σ` accepted by the recursive engine.
pub const RECURSIVE_MIN_SIGMA: f64 = 0.5;
/// From this `σ` upwards the recursive engine uses the third-order design.
pub const THIRD_ORDER_MIN_SIGMA: f64 = 5.0;
/// Default FIR truncation radius, in multiples of `σ`.
pub const DEFAULT_FIR_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    RecursiveIir,
    /// Truncation radius in multiples of `σ` (at least 3).
    ExactFir { radius: f64 },
    /// `out[x] = Σ in[m]` for `m ∈ [x − before, x + after]`, zero outside.
    Box { before: usize, after: usize },
}

impl SmootherKind {
    pub fn exact_fir() -> Self {
        SmootherKind::ExactFir {
            radius: DEFAULT_FIR_RADIUS,
        }
    }

    /// Symmetric box of `2·half_width + 1` taps.
    pub fn box_half_width(half_width: usize) -> Self {
        SmootherKind::Box {
            before: half_width,
            after: half_width,
        }
    }

    /// Box covering the `len` samples `[x − ⌊len/2⌋, x − ⌊len/2⌋ + len − 1]`.
    pub fn box_window(len: usize) -> Self {
        assert!(len > 0, "box window must be non-empty");
        SmootherKind::Box {
            before: len / 2,
            after: len - 1 - len / 2,
        }
    }

    pub fn is_box(&self) -> bool {
        matches!(self, SmootherKind::Box { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SmootherKind::ExactFir { radius } if !(radius >= 3.0 && radius.is_finite()) => Err(
                Error::param(format!("FIR truncation radius must be at least 3, got {radius}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Coefficients of the recursive Gaussian for one `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCoeffs {
    sigma: f64,
    design: RecursiveDesign,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecursiveDesign {
    /// `w[n] = gain·x[n] + Σ feedback[i]·w[n−1−i]` forwards, then the same
    /// recursion backwards. `tail` maps the last three causal outputs, taken
    /// relative to the final input sample, to the anticausal state beyond
    /// the line end. This is what a constant extension of the line would
    /// produce.
    ThirdOrder {
        feedback: [f64; 3],
        gain: f64,
        tail: [[f64; 3]; 3],
    },
    /// `y⁺[n] = Σ causal[k]·x[n−k] − Σ feedback[k]·y⁺[n−1−k]`,
    /// `y⁻[n] = Σ anticausal[k]·x[n+1+k] − Σ feedback[k]·y⁻[n+1+k]`,
    /// output `y⁺ + y⁻`.
    Deriche {
        causal: [f64; 4],
        anticausal: [f64; 4],
        feedback: [f64; 4],
    },
}

impl GaussianCoeffs {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn design(&self) -> &RecursiveDesign {
        &self.design
    }

    /// Steady-state response to a constant unit input.
    pub fn dc_gain(&self) -> f64 {
        match &self.design {
            RecursiveDesign::ThirdOrder { feedback, gain, .. } => {
                let g = gain / (1.0 - feedback.iter().sum::<f64>());
                g * g
            }
            RecursiveDesign::Deriche {
                causal,
                anticausal,
                feedback,
            } => {
                (causal.iter().sum::<f64>() + anticausal.iter().sum::<f64>())
                    / (1.0 + feedback.iter().sum::<f64>())
            }
        }
    }

    fn line_cost(&self, len: usize) -> (u64, u64) {
        let n = len as u64;
        match self.design {
            // 4 mul + 3 add per sample and direction; boundary: 3×3 matrix
            // product (9 mul, 6 add) plus 6 offset adds
            RecursiveDesign::ThirdOrder { .. } => (8 * n + 9, 6 * n + 12),
            // 8 mul + 7 add per sample and direction, one add to combine;
            // boundary: two steady-state products
            RecursiveDesign::Deriche { .. } => (16 * n + 2, 15 * n),
        }
    }
}

/// Recursive Gaussian coefficients for `sigma`.
pub fn make_coeffs(sigma: f64) -> Result<GaussianCoeffs> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    if sigma < RECURSIVE_MIN_SIGMA {
        return Err(Error::SigmaTooSmall(sigma));
    }
    let design = if sigma >= THIRD_ORDER_MIN_SIGMA {
        third_order(sigma)
    } else {
        deriche(sigma)
    };
    let coeffs = GaussianCoeffs { sigma, design };

    let constant = [7.0; 64];
    let mut out = [0.0; 64];
    let mut scratch = Scratch::default();
    recursive_line(&coeffs, &constant, &mut out, &mut scratch);
    if out.iter().any(|v| (v - 7.0).abs() > 7e-6) || (coeffs.dc_gain() - 1.0).abs() > 1e-6 {
        return Err(Error::param(format!(
            "recursive design for sigma {sigma} does not have unit DC gain"
        )));
    }
    Ok(coeffs)
}

// Base poles of the third-order design (van Vliet, Young & Verbeek), scaled
// by q so that the forward+backward impulse response has variance σ².
const THIRD_ORDER_POLES: [(f64, f64); 3] = [(1.40098, 1.00236), (1.40098, -1.00236), (1.85132, 0.0)];

fn third_order(sigma: f64) -> RecursiveDesign {
    let poles_for = |q: f64| -> [Complex64; 3] {
        THIRD_ORDER_POLES.map(|(re, im)| (-Complex64::new(re, im).ln() / q).exp())
    };
    let variance = |q: f64| -> f64 {
        2.0 * poles_for(q)
            .iter()
            .map(|z| z / ((1.0 - z) * (1.0 - z)))
            .sum::<Complex64>()
            .re
    };
    // variance grows monotonically with q
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e5f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if variance(mid.exp()) < sigma * sigma {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = poles_for((0.5 * (lo + hi)).exp());

    // (1 − z₀x)(1 − z₁x)(1 − z₂x) = 1 − a₁x − a₂x² − a₃x³
    let a1 = (z[0] + z[1] + z[2]).re;
    let a2 = -(z[0] * z[1] + z[0] * z[2] + z[1] * z[2]).re;
    let a3 = (z[0] * z[1] * z[2]).re;
    let feedback = [a1, a2, a3];
    let gain = 1.0 - a1 - a2 - a3;

    // Anticausal state beyond the end, as a linear map of the causal
    // deviation from the constant extension. Built column by column from the
    // homogeneous response, which decays below 1e-20 within `steps`.
    let slowest = z.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let steps = ((1e-20f64).ln() / slowest.ln()).ceil() as usize + 16;
    let mut tail = [[0.0; 3]; 3];
    let mut u = vec![0.0; steps + 3];
    let mut v = vec![0.0; steps + 3];
    for j in 0..3 {
        // u[0..3] holds the state (u[N−3], u[N−2], u[N−1])
        u.iter_mut().for_each(|s| *s = 0.0);
        u[2 - j] = 1.0;
        for n in 3..steps + 3 {
            u[n] = a1 * u[n - 1] + a2 * u[n - 2] + a3 * u[n - 3];
        }
        v.iter_mut().for_each(|s| *s = 0.0);
        for n in (3..steps).rev() {
            v[n] = gain * u[n] + a1 * v[n + 1] + a2 * v[n + 2] + a3 * v[n + 3];
        }
        for k in 0..3 {
            tail[k][j] = v[3 + k];
        }
    }
    RecursiveDesign::ThirdOrder {
        feedback,
        gain,
        tail,
    }
}

// Deriche's fit of the Gaussian by two damped sinusoid pairs:
// g(t) ≈ Σ (α cos(ωt/σ) + β sin(ωt/σ))·exp(−b·t/σ), t ≥ 0.
const DERICHE_TERMS: [(f64, f64, f64, f64); 2] =
    [(1.680, 3.735, 1.783, 0.6318), (-0.6803, -0.2598, 1.723, 1.997)];

fn deriche(sigma: f64) -> RecursiveDesign {
    // pole/residue form of the causal half: h⁺(n) = Σ r·pⁿ
    let mut poles = Vec::with_capacity(4);
    let mut residues = Vec::with_capacity(4);
    for (alpha, beta, b, w) in DERICHE_TERMS {
        let p = Complex64::new(-b / sigma, w / sigma).exp();
        let r = Complex64::new(alpha, -beta) * 0.5;
        poles.extend([p, p.conj()]);
        residues.extend([r, r.conj()]);
    }

    let linear = |p: Complex64| vec![Complex64::new(1.0, 0.0), -p];
    let mut denom = vec![Complex64::new(1.0, 0.0)];
    for &p in &poles {
        denom = poly_mul(&denom, &linear(p));
    }
    let mut causal_num = [Complex64::new(0.0, 0.0); 4];
    let mut anti_num = [Complex64::new(0.0, 0.0); 5];
    for j in 0..4 {
        let mut others = vec![Complex64::new(1.0, 0.0)];
        for (k, &p) in poles.iter().enumerate() {
            if k != j {
                others = poly_mul(&others, &linear(p));
            }
        }
        for (i, c) in others.iter().enumerate() {
            causal_num[i] += residues[j] * c;
            // anticausal half: Σ_{n≥1} h⁺(n)·zⁿ = Σ r·p·z / (1 − p·z)
            anti_num[i + 1] += residues[j] * poles[j] * c;
        }
    }

    let mut causal = [0.0; 4];
    let mut anticausal = [0.0; 4];
    let mut feedback = [0.0; 4];
    for k in 0..4 {
        causal[k] = causal_num[k].re;
        anticausal[k] = anti_num[k + 1].re;
        feedback[k] = denom[k + 1].re;
    }
    let dc = (causal.iter().sum::<f64>() + anticausal.iter().sum::<f64>())
        / (1.0 + feedback.iter().sum::<f64>());
    causal.iter_mut().for_each(|c| *c /= dc);
    anticausal.iter_mut().for_each(|c| *c /= dc);
    RecursiveDesign::Deriche {
        causal,
        anticausal,
        feedback,
    }
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Unit-sum sampled Gaussian, one-sided: `taps[d]` weights offset `±d`.
pub fn fir_taps(sigma: f64, radius: f64) -> Vec<f64> {
    let reach = (radius * sigma).ceil() as usize;
    let mut taps: Vec<f64> = (0..=reach)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum = taps[0] + 2.0 * taps[1..].iter().sum::<f64>();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Reusable buffers for line and column smoothing.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

fn sized(buf: &mut Vec<f64>, len: usize) -> &mut [f64] {
    buf.clear();
    buf.resize(len, 0.0);
    buf
}

/// `(feedback, gain, tail)` of a third-order design.
pub(crate) type ThirdOrderView<'a> = (&'a [f64; 3], f64, &'a [[f64; 3]; 3]);

#[derive(Debug, Clone)]
enum Engine {
    Recursive(GaussianCoeffs),
    Fir(Vec<f64>),
    Box { before: usize, after: usize },
}

/// A smoother prepared for one `σ`.
#[derive(Debug, Clone)]
pub struct Smoother {
    kind: SmootherKind,
    sigma: f64,
    engine: Engine,
}

impl Smoother {
    pub fn new(kind: SmootherKind, sigma: f64) -> Result<Self> {
        kind.validate()?;
        let engine = match kind {
            SmootherKind::RecursiveIir => Engine::Recursive(make_coeffs(sigma)?),
            SmootherKind::ExactFir { radius } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::param(format!("sigma must be positive, got {sigma}")));
                }
                Engine::Fir(fir_taps(sigma, radius))
            }
            SmootherKind::Box { before, after } => Engine::Box { before, after },
        };
        Ok(Self {
            kind,
            sigma,
            engine,
        })
    }

    pub fn kind(&self) -> SmootherKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `(multiplications, additions)` for smoothing one line of `len` samples.
    pub fn line_cost(&self, len: usize) -> (u64, u64) {
        let n = len as u64;
        match &self.engine {
            Engine::Recursive(c) => c.line_cost(len),
            Engine::Fir(taps) => {
                let width = 2 * taps.len() as u64 - 1;
                (width * n, (width - 1) * n)
            }
            // running prefix sum and one difference per output
            Engine::Box { .. } => (0, 2 * n),
        }
    }

    fn charge(&self, len: usize, lines: usize, counters: &mut OpCounters) {
        let (m, a) = self.line_cost(len);
        counters.ops(m * lines as u64, a * lines as u64);
    }

    /// Smooths one row-direction line.
    pub(crate) fn smooth_line(
        &self,
        input: &[f64],
        out: &mut [f64],
        scratch: &mut Scratch,
        counters: &mut OpCounters,
    ) {
        debug_assert_eq!(input.len(), out.len());
        match &self.engine {
            Engine::Recursive(c) => recursive_line(c, input, out, scratch),
            Engine::Fir(taps) => fir_line(taps, input, out, scratch),
            Engine::Box { before, after } => box_line(*before, *after, input, out, scratch),
        }
        self.charge(input.len(), 1, counters);
        counters.smoothings_h += 1;
    }

    /// Smooths two row-direction lines of equal length.
    pub(crate) fn smooth_line_pair(
        &self,
        a: &[f64],
        b: &[f64],
        out_a: &mut [f64],
        out_b: &mut [f64],
        scratch: &mut Scratch,
        counters: &mut OpCounters,
    ) {
        match &self.engine {
            Engine::Recursive(GaussianCoeffs {
                design:
                    RecursiveDesign::ThirdOrder {
                        feedback,
                        gain,
                        tail,
                    },
                ..
            }) if a.len() == b.len() => {
                third_order_line_pair(feedback, *gain, tail, a, b, out_a, out_b);
                self.charge(a.len(), 2, counters);
                counters.smoothings_h += 2;
            }
            _ => {
                self.smooth_line(a, out_a, scratch, counters);
                self.smooth_line(b, out_b, scratch, counters);
            }
        }
    }

    /// `(feedback, gain, tail)` when the third-order design is in use.
    pub(crate) fn third_order(&self) -> Option<ThirdOrderView<'_>> {
        match &self.engine {
            Engine::Recursive(GaussianCoeffs {
                design:
                    RecursiveDesign::ThirdOrder {
                        feedback,
                        gain,
                        tail,
                    },
                ..
            }) => Some((feedback, *gain, tail)),
            _ => None,
        }
    }

    /// Charges the smoothing of `width` columns of length `height`, for
    /// callers that run the column recursion themselves.
    pub(crate) fn charge_columns(&self, width: usize, height: usize, counters: &mut OpCounters) {
        self.charge(height, width, counters);
        counters.smoothings_v += width as u64;
    }

    /// Smooths every column of a row-major `width × height` buffer in place.
    pub(crate) fn smooth_columns(
        &self,
        buf: &mut [f64],
        width: usize,
        height: usize,
        scratch: &mut Scratch,
        counters: &mut OpCounters,
    ) {
        debug_assert_eq!(buf.len(), width * height);
        match &self.engine {
            Engine::Recursive(c) => match &c.design {
                RecursiveDesign::ThirdOrder {
                    feedback,
                    gain,
                    tail,
                } => third_order_columns(feedback, *gain, tail, buf, width, height, scratch),
                RecursiveDesign::Deriche {
                    causal,
                    anticausal,
                    feedback,
                } => deriche_columns(causal, anticausal, feedback, buf, width, height, scratch),
            },
            Engine::Fir(taps) => fir_columns(taps, buf, width, height, scratch),
            Engine::Box { before, after } => {
                box_columns(*before, *after, buf, width, height, scratch)
            }
        }
        self.charge_columns(width, height, counters);
    }
}

/// Smooths `signal` with a freshly prepared smoother.
pub fn smooth_1d(
    signal: &[f64],
    kind: SmootherKind,
    sigma: f64,
    counters: &mut OpCounters,
) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::param("cannot smooth an empty signal"));
    }
    let smoother = Smoother::new(kind, sigma)?;
    let mut out = vec![0.0; signal.len()];
    smoother.smooth_line(signal, &mut out, &mut Scratch::default(), counters);
    Ok(out)
}

/// Smooths two signals with the same smoother: the two Gaussian smoothings of
/// one decomposition stage.
pub fn smooth_pair_1d(
    a: &[f64],
    b: &[f64],
    kind: SmootherKind,
    sigma: f64,
    counters: &mut OpCounters,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("cannot smooth an empty signal"));
    }
    let smoother = Smoother::new(kind, sigma)?;
    let mut out_a = vec![0.0; a.len()];
    let mut out_b = vec![0.0; b.len()];
    smoother.smooth_line_pair(a, b, &mut out_a, &mut out_b, &mut Scratch::default(), counters);
    Ok((out_a, out_b))
}

fn recursive_line(c: &GaussianCoeffs, input: &[f64], out: &mut [f64], scratch: &mut Scratch) {
    match &c.design {
        RecursiveDesign::ThirdOrder {
            feedback,
            gain,
            tail,
        } => third_order_line(feedback, *gain, tail, input, out),
        RecursiveDesign::Deriche {
            causal,
            anticausal,
            feedback,
        } => deriche_line(causal, anticausal, feedback, input, out, scratch),
    }
}

/// Anticausal state `(v[N], v[N+1], v[N+2])` from the causal outputs.
#[inline]
pub(crate) fn third_order_tail(tail: &[[f64; 3]; 3], last: [f64; 3], x_end: f64) -> [f64; 3] {
    let dev = [last[0] - x_end, last[1] - x_end, last[2] - x_end];
    [0, 1, 2].map(|k| x_end + tail[k][0] * dev[0] + tail[k][1] * dev[1] + tail[k][2] * dev[2])
}

fn third_order_line(
    feedback: &[f64; 3],
    gain: f64,
    tail: &[[f64; 3]; 3],
    input: &[f64],
    out: &mut [f64],
) {
    let [a1, a2, a3] = *feedback;
    let n = input.len();
    let x0 = input[0];
    let (mut w1, mut w2, mut w3) = (x0, x0, x0);
    for i in 0..n {
        let w = gain * input[i] + a3 * w3 + a2 * w2 + a1 * w1;
        out[i] = w;
        w3 = w2;
        w2 = w1;
        w1 = w;
    }
    let at = |i: isize| if i >= 0 { out[i as usize] } else { x0 };
    let last = [at(n as isize - 1), at(n as isize - 2), at(n as isize - 3)];
    let [mut v1, mut v2, mut v3] = third_order_tail(tail, last, input[n - 1]);
    for i in (0..n).rev() {
        let v = gain * out[i] + a3 * v3 + a2 * v2 + a1 * v1;
        out[i] = v;
        v3 = v2;
        v2 = v1;
        v1 = v;
    }
}

/// Two independent lines through the same recursion, interleaved so the
/// two dependency chains overlap.
fn third_order_line_pair(
    feedback: &[f64; 3],
    gain: f64,
    tail: &[[f64; 3]; 3],
    a: &[f64],
    b: &[f64],
    out_a: &mut [f64],
    out_b: &mut [f64],
) {
    let [a1, a2, a3] = *feedback;
    let n = a.len();
    let (xa, xb) = (a[0], b[0]);
    let (mut p1, mut p2, mut p3) = (xa, xa, xa);
    let (mut q1, mut q2, mut q3) = (xb, xb, xb);
    for i in 0..n {
        let p = gain * a[i] + a3 * p3 + a2 * p2 + a1 * p1;
        let q = gain * b[i] + a3 * q3 + a2 * q2 + a1 * q1;
        out_a[i] = p;
        out_b[i] = q;
        p3 = p2;
        p2 = p1;
        p1 = p;
        q3 = q2;
        q2 = q1;
        q1 = q;
    }
    let last = |out: &[f64], x0: f64| {
        let at = |i: isize| if i >= 0 { out[i as usize] } else { x0 };
        [at(n as isize - 1), at(n as isize - 2), at(n as isize - 3)]
    };
    let [mut p1, mut p2, mut p3] = third_order_tail(tail, last(out_a, xa), a[n - 1]);
    let [mut q1, mut q2, mut q3] = third_order_tail(tail, last(out_b, xb), b[n - 1]);
    for i in (0..n).rev() {
        let p = gain * out_a[i] + a3 * p3 + a2 * p2 + a1 * p1;
        let q = gain * out_b[i] + a3 * q3 + a2 * q2 + a1 * q1;
        out_a[i] = p;
        out_b[i] = q;
        p3 = p2;
        p2 = p1;
        p1 = p;
        q3 = q2;
        q2 = q1;
        q1 = q;
    }
}

fn third_order_columns(
    feedback: &[f64; 3],
    gain: f64,
    tail: &[[f64; 3]; 3],
    buf: &mut [f64],
    w: usize,
    h: usize,
    scratch: &mut Scratch,
) {
    let [a1, a2, a3] = *feedback;
    // causal pass into rows 3..h+3 of `fwd`; rows 0..3 replicate the first
    // input row
    let fwd = sized(&mut scratch.a, (h + 3) * w);
    for r in 0..3 {
        fwd[r * w..(r + 1) * w].copy_from_slice(&buf[..w]);
    }
    for y in 0..h {
        let (done, rest) = fwd.split_at_mut((y + 3) * w);
        let (p3, p2, p1) = (
            &done[y * w..(y + 1) * w],
            &done[(y + 1) * w..(y + 2) * w],
            &done[(y + 2) * w..(y + 3) * w],
        );
        let cur = &mut rest[..w];
        let x = &buf[y * w..(y + 1) * w];
        for i in 0..w {
            cur[i] = gain * x[i] + a3 * p3[i] + a2 * p2[i] + a1 * p1[i];
        }
    }

    // anticausal pass; rows h..h+3 of `bwd` hold the boundary state
    let bwd = sized(&mut scratch.b, (h + 3) * w);
    let x_end = &buf[(h - 1) * w..h * w];
    let causal_row = |r: isize| -> &[f64] {
        // causal output at input row r (r < 0 reads the replicated head)
        let row = (r + 3) as usize;
        &fwd[row * w..(row + 1) * w]
    };
    let (l1, l2, l3) = (
        causal_row(h as isize - 1),
        causal_row(h as isize - 2),
        causal_row(h as isize - 3),
    );
    for i in 0..w {
        let t = third_order_tail(tail, [l1[i], l2[i], l3[i]], x_end[i]);
        for k in 0..3 {
            bwd[(h + k) * w + i] = t[k];
        }
    }
    for y in (0..h).rev() {
        let (head, later) = bwd.split_at_mut((y + 1) * w);
        let cur = &mut head[y * w..];
        let (n1, n2, n3) = (&later[..w], &later[w..2 * w], &later[2 * w..3 * w]);
        let u = &fwd[(y + 3) * w..(y + 4) * w];
        for i in 0..w {
            cur[i] = gain * u[i] + a3 * n3[i] + a2 * n2[i] + a1 * n1[i];
        }
    }
    buf.copy_from_slice(&bwd[..h * w]);
}

fn deriche_line(
    causal: &[f64; 4],
    anticausal: &[f64; 4],
    feedback: &[f64; 4],
    input: &[f64],
    out: &mut [f64],
    scratch: &mut Scratch,
) {
    let n = input.len();
    let (x0, xe) = (input[0], input[n - 1]);
    let dc_norm = 1.0 + feedback.iter().sum::<f64>();
    // padded input: 4 replicated samples either side
    let xp = sized(&mut scratch.a, n + 8);
    xp[..4].fill(x0);
    xp[4..n + 4].copy_from_slice(input);
    xp[n + 4..].fill(xe);

    let yc = sized(&mut scratch.b, n + 4);
    yc[..4].fill(x0 * causal.iter().sum::<f64>() / dc_norm);
    for i in 0..n {
        let j = i + 4;
        yc[j] = causal[0] * xp[j] + causal[1] * xp[j - 1] + causal[2] * xp[j - 2]
            + causal[3] * xp[j - 3]
            - feedback[0] * yc[j - 1]
            - feedback[1] * yc[j - 2]
            - feedback[2] * yc[j - 3]
            - feedback[3] * yc[j - 4];
    }
    let ya = sized(&mut scratch.c, n + 4);
    ya[n..].fill(xe * anticausal.iter().sum::<f64>() / dc_norm);
    for i in (0..n).rev() {
        let j = i + 4;
        ya[i] = anticausal[0] * xp[j + 1] + anticausal[1] * xp[j + 2] + anticausal[2] * xp[j + 3]
            + anticausal[3] * xp[j + 4]
            - feedback[0] * ya[i + 1]
            - feedback[1] * ya[i + 2]
            - feedback[2] * ya[i + 3]
            - feedback[3] * ya[i + 4];
    }
    for i in 0..n {
        out[i] = yc[i + 4] + ya[i];
    }
}

fn deriche_columns(
    causal: &[f64; 4],
    anticausal: &[f64; 4],
    feedback: &[f64; 4],
    buf: &mut [f64],
    w: usize,
    h: usize,
    scratch: &mut Scratch,
) {
    let dc_norm = 1.0 + feedback.iter().sum::<f64>();
    let (sc, sa) = (
        causal.iter().sum::<f64>() / dc_norm,
        anticausal.iter().sum::<f64>() / dc_norm,
    );
    let xp = sized(&mut scratch.a, (h + 8) * w);
    for r in 0..4 {
        xp[r * w..(r + 1) * w].copy_from_slice(&buf[..w]);
        xp[(h + 4 + r) * w..(h + 5 + r) * w].copy_from_slice(&buf[(h - 1) * w..]);
    }
    xp[4 * w..(h + 4) * w].copy_from_slice(buf);
    let row = |r: usize| &xp[r * w..(r + 1) * w];

    let yc = sized(&mut scratch.b, (h + 4) * w);
    for r in 0..4 {
        for i in 0..w {
            yc[r * w + i] = sc * xp[i];
        }
    }
    for y in 0..h {
        let j = y + 4;
        let (done, rest) = yc.split_at_mut(j * w);
        let cur = &mut rest[..w];
        let (y1, y2, y3, y4) = (
            &done[(j - 1) * w..j * w],
            &done[(j - 2) * w..(j - 1) * w],
            &done[(j - 3) * w..(j - 2) * w],
            &done[(j - 4) * w..(j - 3) * w],
        );
        let (x0, x1, x2, x3) = (row(j), row(j - 1), row(j - 2), row(j - 3));
        for i in 0..w {
            cur[i] = causal[0] * x0[i] + causal[1] * x1[i] + causal[2] * x2[i] + causal[3] * x3[i]
                - feedback[0] * y1[i]
                - feedback[1] * y2[i]
                - feedback[2] * y3[i]
                - feedback[3] * y4[i];
        }
    }

    let ya = sized(&mut scratch.c, (h + 4) * w);
    let x_end = &buf[(h - 1) * w..];
    for r in h..h + 4 {
        for i in 0..w {
            ya[r * w + i] = sa * x_end[i];
        }
    }
    for y in (0..h).rev() {
        let j = y + 4;
        let (head, later) = ya.split_at_mut((y + 1) * w);
        let cur = &mut head[y * w..];
        let (y1, y2, y3, y4) = (
            &later[..w],
            &later[w..2 * w],
            &later[2 * w..3 * w],
            &later[3 * w..4 * w],
        );
        let (x1, x2, x3, x4) = (row(j + 1), row(j + 2), row(j + 3), row(j + 4));
        for i in 0..w {
            cur[i] = anticausal[0] * x1[i]
                + anticausal[1] * x2[i]
                + anticausal[2] * x3[i]
                + anticausal[3] * x4[i]
                - feedback[0] * y1[i]
                - feedback[1] * y2[i]
                - feedback[2] * y3[i]
                - feedback[3] * y4[i];
        }
    }
    for y in 0..h {
        let out = &mut buf[y * w..(y + 1) * w];
        let (c, a) = (&yc[(y + 4) * w..(y + 5) * w], &ya[y * w..(y + 1) * w]);
        for i in 0..w {
            out[i] = c[i] + a[i];
        }
    }
}

fn fir_line(taps: &[f64], input: &[f64], out: &mut [f64], scratch: &mut Scratch) {
    let n = input.len();
    let r = taps.len() - 1;
    let padded = sized(&mut scratch.a, n + 2 * r);
    padded[..r].fill(input[0]);
    padded[r..r + n].copy_from_slice(input);
    padded[r + n..].fill(input[n - 1]);
    for (x, o) in out.iter_mut().enumerate() {
        let c = x + r;
        let mut acc = taps[0] * padded[c];
        for d in 1..=r {
            acc += taps[d] * padded[c - d] + taps[d] * padded[c + d];
        }
        *o = acc;
    }
}

fn fir_columns(taps: &[f64], buf: &mut [f64], w: usize, h: usize, scratch: &mut Scratch) {
    let r = taps.len() - 1;
    let padded = sized(&mut scratch.a, (h + 2 * r) * w);
    for k in 0..r {
        padded[k * w..(k + 1) * w].copy_from_slice(&buf[..w]);
        padded[(h + r + k) * w..(h + r + k + 1) * w].copy_from_slice(&buf[(h - 1) * w..]);
    }
    padded[r * w..(h + r) * w].copy_from_slice(buf);
    for y in 0..h {
        let c = y + r;
        let out = &mut buf[y * w..(y + 1) * w];
        let centre = &padded[c * w..(c + 1) * w];
        for i in 0..w {
            out[i] = taps[0] * centre[i];
        }
        for d in 1..=r {
            let up = &padded[(c - d) * w..(c - d + 1) * w];
            let down = &padded[(c + d) * w..(c + d + 1) * w];
            let t = taps[d];
            for i in 0..w {
                out[i] += t * up[i] + t * down[i];
            }
        }
    }
}

fn box_line(before: usize, after: usize, input: &[f64], out: &mut [f64], scratch: &mut Scratch) {
    let n = input.len();
    let prefix = sized(&mut scratch.a, n + 1);
    for i in 0..n {
        prefix[i + 1] = prefix[i] + input[i];
    }
    for (x, o) in out.iter_mut().enumerate() {
        let hi = (x + after + 1).min(n);
        let lo = x.saturating_sub(before).min(hi);
        *o = prefix[hi] - prefix[lo];
    }
}

fn box_columns(
    before: usize,
    after: usize,
    buf: &mut [f64],
    w: usize,
    h: usize,
    scratch: &mut Scratch,
) {
    let prefix = sized(&mut scratch.a, (h + 1) * w);
    for y in 0..h {
        let (done, rest) = prefix.split_at_mut((y + 1) * w);
        let prev = &done[y * w..];
        let cur = &mut rest[..w];
        let x = &buf[y * w..(y + 1) * w];
        for i in 0..w {
            cur[i] = prev[i] + x[i];
        }
    }
    for y in 0..h {
        let hi = (y + after + 1).min(h);
        let lo = y.saturating_sub(before).min(hi);
        let (top, bottom) = (&prefix[hi * w..(hi + 1) * w], &prefix[lo * w..(lo + 1) * w]);
        let out = &mut buf[y * w..(y + 1) * w];
        for i in 0..w {
            out[i] = top[i] - bottom[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn impulse(n: usize, at: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        v
    }

    /// Unit-sum Gaussian sampled at `x − centre`, computed independently of
    /// [`fir_taps`].
    fn sampled_gaussian(n: usize, centre: usize, sigma: f64) -> Vec<f64> {
        let raw: Vec<f64> = (0..n)
            .map(|x| {
                let d = x as f64 - centre as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn coefficient_preconditions() {
        assert!(matches!(make_coeffs(0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_coeffs(-1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_coeffs(0.3), Err(Error::SigmaTooSmall(_))));
        assert!(make_coeffs(0.5).is_ok());
        assert!(matches!(
            make_coeffs(THIRD_ORDER_MIN_SIGMA).unwrap().design(),
            RecursiveDesign::ThirdOrder { .. }
        ));
        assert!(matches!(
            make_coeffs(2.0).unwrap().design(),
            RecursiveDesign::Deriche { .. }
        ));
    }

    #[test]
    fn recursive_impulse_response_tracks_sampled_gaussian() {
        let mut counters = OpCounters::default();
        for sigma in [1.0, 2.0, 3.5, 5.0, 7.5, 10.0, 25.0] {
            let n = (24.0 * sigma) as usize + 41;
            let c = n / 2;
            let iir = smooth_1d(&impulse(n, c), SmootherKind::RecursiveIir, sigma, &mut counters)
                .unwrap();
            let err = max_abs_diff(&iir, &sampled_gaussian(n, c, sigma));
            assert!(err <= 1e-3, "sigma {sigma}: {err}");
        }
    }

    #[test]
    fn fir_impulse_response_is_the_sampled_kernel() {
        let mut counters = OpCounters::default();
        let out = smooth_1d(&impulse(64, 32), SmootherKind::exact_fir(), 2.0, &mut counters)
            .unwrap();
        // kernel support is ±⌈6σ⌉ = ±12 samples
        let mut expect = vec![0.0; 64];
        expect[20..=44].copy_from_slice(&sampled_gaussian(25, 12, 2.0));
        let err = max_abs_diff(&out, &expect);
        assert!(err < 1e-15, "{err}");
    }

    #[test]
    fn recursive_and_fir_agree_on_impulses() {
        let mut counters = OpCounters::default();
        for sigma in [1.0, 2.0, 4.0, 6.0, 10.0] {
            let n = (24.0 * sigma) as usize + 41;
            let x = impulse(n, n / 2);
            let iir = smooth_1d(&x, SmootherKind::RecursiveIir, sigma, &mut counters).unwrap();
            let fir = smooth_1d(&x, SmootherKind::exact_fir(), sigma, &mut counters).unwrap();
            assert!(max_abs_diff(&iir, &fir) <= 1e-3, "sigma {sigma}");
        }
    }

    #[test]
    fn box_moving_sum_with_zero_padding() {
        let mut counters = OpCounters::default();
        let out = smooth_1d(&[1.0; 5], SmootherKind::box_half_width(1), 1.0, &mut counters)
            .unwrap();
        assert_eq!(out, vec![2.0, 3.0, 3.0, 3.0, 2.0]);
        // 4-tap window [x−2, x+1]
        let out = smooth_1d(&[1.0; 6], SmootherKind::box_window(4), 1.0, &mut counters).unwrap();
        assert_eq!(out, vec![2.0, 3.0, 4.0, 4.0, 4.0, 3.0]);
    }

    #[test]
    fn constants_pass_through_gaussian_kinds() {
        let mut counters = OpCounters::default();
        for sigma in [0.5, 1.0, 3.0, 5.0, 12.0, 40.0] {
            for kind in [SmootherKind::RecursiveIir, SmootherKind::exact_fir()] {
                let out = smooth_1d(&[7.0; 50], kind, sigma, &mut counters).unwrap();
                assert!(out.iter().all(|v| (v - 7.0).abs() < 1e-9), "{kind:?} {sigma}");
            }
        }
        let out = smooth_1d(&[7.0; 9], SmootherKind::box_half_width(2), 1.0, &mut counters)
            .unwrap();
        assert_eq!(out[4], 35.0);
    }

    #[test]
    fn replicate_boundary_equals_explicit_extension() {
        // filtering a line padded with many replicated samples must match
        // the boundary-initialised recursion on the original samples
        let mut counters = OpCounters::default();
        let line: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64) - 3.0 + 0.1 * i as f64).collect();
        for sigma in [1.5, 6.0] {
            for kind in [SmootherKind::RecursiveIir, SmootherKind::exact_fir()] {
                let pad = (40.0 * sigma) as usize;
                let mut long = vec![line[0]; pad];
                long.extend_from_slice(&line);
                long.extend(std::iter::repeat_n(line[39], pad));
                let full = smooth_1d(&long, kind, sigma, &mut counters).unwrap();
                let short = smooth_1d(&line, kind, sigma, &mut counters).unwrap();
                let err = max_abs_diff(&short, &full[pad..pad + 40]);
                assert!(err < 1e-9, "{kind:?} sigma {sigma}: {err}");
            }
        }
    }

    #[test]
    fn column_sweep_matches_line_smoothing() {
        let (w, h) = (5, 23);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 7919) % 97) as f64).collect();
        for (kind, sigma) in [
            (SmootherKind::RecursiveIir, 1.3),
            (SmootherKind::RecursiveIir, 6.5),
            (SmootherKind::exact_fir(), 2.0),
            (SmootherKind::box_window(4), 1.0),
        ] {
            let s = Smoother::new(kind, sigma).unwrap();
            let mut scratch = Scratch::default();
            let mut cols = data.clone();
            let mut c1 = OpCounters::default();
            s.smooth_columns(&mut cols, w, h, &mut scratch, &mut c1);
            let mut c2 = OpCounters::default();
            for x in 0..w {
                let col: Vec<f64> = (0..h).map(|y| data[y * w + x]).collect();
                let mut out = vec![0.0; h];
                s.smooth_line(&col, &mut out, &mut scratch, &mut c2);
                for y in 0..h {
                    assert!((out[y] - cols[y * w + x]).abs() < 1e-12, "{kind:?}");
                }
            }
            assert_eq!(c1.multiplications, c2.multiplications);
            assert_eq!(c1.additions, c2.additions);
            assert_eq!(c1.smoothings_v, w as u64);
            assert_eq!(c2.smoothings_h, w as u64);
        }
    }

    #[test]
    fn pair_smoothing_costs_twice_a_single_smoothing() {
        for (kind, sigma) in [
            (SmootherKind::RecursiveIir, 2.0),
            (SmootherKind::RecursiveIir, 8.0),
            (SmootherKind::exact_fir(), 1.5),
            (SmootherKind::box_half_width(3), 1.0),
        ] {
            let n = 33;
            let mut single = OpCounters::default();
            smooth_1d(&impulse(n, 3), kind, sigma, &mut single).unwrap();
            let mut pair = OpCounters::default();
            let (a, b) = smooth_pair_1d(&impulse(n, 16), &vec![0.0; n], kind, sigma, &mut pair)
                .unwrap();
            assert_eq!(pair.multiplications, 2 * single.multiplications);
            assert_eq!(pair.additions, 2 * single.additions);
            assert_eq!(pair.smoothings_h, 2);
            assert!(b.iter().all(|v| *v == 0.0));
            let direct = smooth_1d(&impulse(n, 16), kind, sigma, &mut single).unwrap();
            assert!(max_abs_diff(&a, &direct) < 1e-15);
        }
    }

    #[test]
    fn symmetric_input_gives_symmetric_interior() {
        let n = 301;
        let half: Vec<f64> = (0..=150).map(|i| ((i * 13) % 17) as f64).collect();
        let sig: Vec<f64> = (0..n).map(|i| half[if i <= 150 { i } else { 300 - i }]).collect();
        let mut counters = OpCounters::default();
        for kind in [SmootherKind::RecursiveIir, SmootherKind::exact_fir()] {
            let out = smooth_1d(&sig, kind, 4.0, &mut counters).unwrap();
            for d in 0..100 {
                assert!((out[150 - d] - out[150 + d]).abs() < 1e-9);
            }
        }
    }

    fn any_kind() -> impl Strategy<Value = (SmootherKind, f64)> {
        prop_oneof![
            (0.5f64..12.0).prop_map(|s| (SmootherKind::RecursiveIir, s)),
            (0.3f64..6.0).prop_map(|s| (SmootherKind::exact_fir(), s)),
            (0usize..4, 0usize..4).prop_map(|(b, a)| (SmootherKind::Box { before: b, after: a }, 1.0)),
        ]
    }

    proptest! {
        #[test]
        fn smoothing_is_linear(
            (kind, sigma) in any_kind(),
            pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..80),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let mut c = OpCounters::default();
            let sa = smooth_1d(&a, kind, sigma, &mut c).unwrap();
            let sb = smooth_1d(&b, kind, sigma, &mut c).unwrap();
            let sm = smooth_1d(&mix, kind, sigma, &mut c).unwrap();
            let scale = sm.iter().chain(&sa).chain(&sb).fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..a.len() {
                let expected = alpha * sa[i] + beta * sb[i];
                prop_assert!((sm[i] - expected).abs() <= 1e-10 * scale);
            }
        }
    }
}

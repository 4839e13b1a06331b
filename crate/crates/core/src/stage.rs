//! Row and column passes shared by the Gabor and sliding-DFT pipelines.
//!
//! A pass demodulates its input along one axis, smooths the two resulting
//! real signals and remodulates them. For an input `I` and angle tables
//! `φ_in`, `φ_out`, the output is
//! `O(t) = Σ_k S(t − k)·I(k)·exp(i·(φ_out(t) − φ_in(k)))`.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::image::ComplexImage;
use crate::metrics::OpCounters;
use crate::smoothing::{third_order_tail, Scratch, Smoother, ThirdOrderView};

/// Columns per strip in the generic column pass, sized so its four strip
/// buffers stay in L2.
const STRIP: usize = 32;

/// Strip width bounds for the fused third-order column pass, which keeps
/// only two strip buffers.
const FUSED_STRIP: (usize, usize) = (64, 512);

/// Cosine/sine of the input and output angles along one axis.
#[derive(Debug, Clone)]
pub(crate) struct AxisModulation {
    cos_in: Vec<f64>,
    sin_in: Vec<f64>,
    cos_out: Vec<f64>,
    sin_out: Vec<f64>,
}

impl AxisModulation {
    /// `φ_in(k) = freq·k`, `φ_out(t) = freq·t`.
    pub(crate) fn gabor(freq: f64, len: usize) -> Self {
        let cos: Vec<f64> = (0..len).map(|t| (freq * t as f64).cos()).collect();
        let sin: Vec<f64> = (0..len).map(|t| (freq * t as f64).sin()).collect();
        Self {
            cos_in: cos.clone(),
            sin_in: sin.clone(),
            cos_out: cos,
            sin_out: sin,
        }
    }

    /// `φ_in(k) = 2π·bin·k/m`, `φ_out(t) = 2π·bin·(t − ⌊m/2⌋)/m`, with the
    /// products reduced modulo `m` before scaling.
    pub(crate) fn sdft(bin: usize, m: usize, len: usize) -> Self {
        let angle = |t: i64| TAU * ((bin as i64 * t).rem_euclid(m as i64)) as f64 / m as f64;
        let shift = (m / 2) as i64;
        let (mut cos_in, mut sin_in, mut cos_out, mut sin_out) =
            (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for t in 0..len {
            let (a, b) = (angle(t as i64), angle(t as i64 - shift));
            cos_in[t] = a.cos();
            sin_in[t] = a.sin();
            cos_out[t] = b.cos();
            sin_out[t] = b.sin();
        }
        Self {
            cos_in,
            sin_in,
            cos_out,
            sin_out,
        }
    }
}

/// Input planes of a pass. `conj` makes the pass read `re − i·im`.
#[derive(Clone, Copy)]
pub(crate) struct Planes<'a> {
    pub re: &'a [f64],
    pub im: Option<&'a [f64]>,
    pub conj: bool,
}

impl<'a> Planes<'a> {
    pub(crate) fn real(re: &'a [f64]) -> Self {
        Self {
            re,
            im: None,
            conj: false,
        }
    }

    pub(crate) fn complex(img: &'a ComplexImage, conj: bool) -> Self {
        Self {
            re: img.re(),
            im: Some(img.im()),
            conj,
        }
    }
}

/// Demodulated pair: `p = Re(I·e^{−iφ})`, `q = −Im(I·e^{−iφ})`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn demodulate(
    re: &[f64],
    im: Option<&[f64]>,
    conj: bool,
    c: impl Fn(usize) -> f64,
    s: impl Fn(usize) -> f64,
    p: &mut [f64],
    q: &mut [f64],
    counters: &mut OpCounters,
) {
    let n = p.len();
    match im {
        None => {
            for i in 0..n {
                p[i] = re[i] * c(i);
                q[i] = re[i] * s(i);
            }
            counters.ops(2 * n as u64, 0);
        }
        Some(im) if conj => {
            for i in 0..n {
                p[i] = re[i] * c(i) - im[i] * s(i);
                q[i] = re[i] * s(i) + im[i] * c(i);
            }
            counters.ops(4 * n as u64, 2 * n as u64);
        }
        Some(im) => {
            for i in 0..n {
                p[i] = re[i] * c(i) + im[i] * s(i);
                q[i] = re[i] * s(i) - im[i] * c(i);
            }
            counters.ops(4 * n as u64, 2 * n as u64);
        }
    }
}

#[derive(Default)]
struct RowBufs {
    p: Vec<f64>,
    q: Vec<f64>,
    sp: Vec<f64>,
    sq: Vec<f64>,
    scratch: Scratch,
}

/// Filters every row of a `w × h` input.
pub(crate) fn row_pass(
    input: Planes<'_>,
    w: usize,
    h: usize,
    md: &AxisModulation,
    smoother: &Smoother,
) -> (ComplexImage, OpCounters) {
    let mut re = vec![0.0; w * h];
    let mut im = vec![0.0; w * h];
    let counters = re
        .par_chunks_mut(w)
        .zip(im.par_chunks_mut(w))
        .enumerate()
        .map_init(RowBufs::default, |b, (y, (out_re, out_im))| {
            let mut c = OpCounters::default();
            for v in [&mut b.p, &mut b.q, &mut b.sp, &mut b.sq] {
                v.resize(w, 0.0);
            }
            let row = y * w..(y + 1) * w;
            demodulate(
                &input.re[row.clone()],
                input.im.map(|im| &im[row]),
                input.conj,
                |i| md.cos_in[i],
                |i| md.sin_in[i],
                &mut b.p,
                &mut b.q,
                &mut c,
            );
            smoother.smooth_line_pair(&b.p, &b.q, &mut b.sp, &mut b.sq, &mut b.scratch, &mut c);
            for x in 0..w {
                let (co, so) = (md.cos_out[x], md.sin_out[x]);
                out_re[x] = co * b.sp[x] + so * b.sq[x];
                out_im[x] = so * b.sp[x] - co * b.sq[x];
            }
            c.ops(4 * w as u64, 2 * w as u64);
            c
        })
        .reduce(OpCounters::default, |a, b| a + b);
    (ComplexImage::from_planes_unchecked(w, h, re, im), counters)
}

/// Raw output plane shared by strip workers that write disjoint columns.
#[derive(Clone, Copy)]
struct SharedPlane(*mut f64);

// SAFETY: every strip worker writes only the columns of its own strip.
unsafe impl Send for SharedPlane {}
unsafe impl Sync for SharedPlane {}

#[derive(Default)]
struct StripBufs {
    p: Vec<f64>,
    q: Vec<f64>,
    scratch: Scratch,
    /// Anticausal state rows for the fused third-order kernel.
    state: Vec<f64>,
}

/// Output plane pointers plus the strip a worker owns.
#[derive(Clone, Copy)]
struct StripOut {
    re: SharedPlane,
    im: SharedPlane,
    w: usize,
    x0: usize,
}

impl StripOut {
    /// Row `y` of the strip in both output planes.
    ///
    /// # Safety
    /// The caller must own columns `x0..x0 + sw`, the planes must outlive
    /// `'a`, and no other slice of the same row span may be live.
    #[inline]
    unsafe fn row<'a>(self, y: usize, sw: usize) -> (&'a mut [f64], &'a mut [f64]) {
        let at = y * self.w + self.x0;
        (
            std::slice::from_raw_parts_mut(self.re.0.add(at), sw),
            std::slice::from_raw_parts_mut(self.im.0.add(at), sw),
        )
    }
}

/// Filters every column of a `w × h` input, strip by strip so each strip's
/// working set stays in cache.
pub(crate) fn column_pass(
    input: Planes<'_>,
    w: usize,
    h: usize,
    md: &AxisModulation,
    smoother: &Smoother,
) -> (ComplexImage, OpCounters) {
    let mut re = vec![0.0; w * h];
    let mut im = vec![0.0; w * h];
    let (out_re, out_im) = (SharedPlane(re.as_mut_ptr()), SharedPlane(im.as_mut_ptr()));
    let strip = match smoother.third_order() {
        Some(_) => w
            .div_ceil(rayon::current_num_threads())
            .next_multiple_of(8)
            .clamp(FUSED_STRIP.0, FUSED_STRIP.1),
        None => STRIP,
    };
    let counters = (0..w.div_ceil(strip))
        .into_par_iter()
        .map_init(StripBufs::default, |b, s| {
            let x0 = s * strip;
            let sw = strip.min(w - x0);
            let out = StripOut { re: out_re, im: out_im, w, x0 };
            let mut c = OpCounters::default();
            match smoother.third_order() {
                Some((feedback, gain, tail)) => {
                    fused_third_order_strip(input, h, md, (feedback, gain, tail), b, out, sw, &mut c);
                    smoother.charge_columns(2 * sw, h, &mut c);
                }
                None => generic_strip(input, h, md, smoother, b, out, sw, &mut c),
            }
            c.ops(4 * (sw * h) as u64, 2 * (sw * h) as u64);
            c
        })
        .reduce(OpCounters::default, |a, b| a + b);
    (ComplexImage::from_planes_unchecked(w, h, re, im), counters)
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn demodulate_strip_row(
    input: Planes<'_>,
    out: StripOut,
    y: usize,
    sw: usize,
    md: &AxisModulation,
    p: &mut [f64],
    q: &mut [f64],
    c: &mut OpCounters,
) {
    let src = y * out.w + out.x0..y * out.w + out.x0 + sw;
    let (ci, si) = (md.cos_in[y], md.sin_in[y]);
    demodulate(
        &input.re[src.clone()],
        input.im.map(|im| &im[src]),
        input.conj,
        |_| ci,
        |_| si,
        p,
        q,
        c,
    );
}

#[allow(clippy::too_many_arguments)]
fn generic_strip(
    input: Planes<'_>,
    h: usize,
    md: &AxisModulation,
    smoother: &Smoother,
    b: &mut StripBufs,
    out: StripOut,
    sw: usize,
    c: &mut OpCounters,
) {
    b.p.resize(sw * h, 0.0);
    b.q.resize(sw * h, 0.0);
    for y in 0..h {
        let rows = y * sw..(y + 1) * sw;
        demodulate_strip_row(input, out, y, sw, md, &mut b.p[rows.clone()], &mut b.q[rows], c);
    }
    smoother.smooth_columns(&mut b.p, sw, h, &mut b.scratch, c);
    smoother.smooth_columns(&mut b.q, sw, h, &mut b.scratch, c);
    for y in 0..h {
        let (co, so) = (md.cos_out[y], md.sin_out[y]);
        let (p, q) = (&b.p[y * sw..(y + 1) * sw], &b.q[y * sw..(y + 1) * sw]);
        // SAFETY: columns x0..x0+sw of row y belong to this strip alone, and
        // the planes outlive the parallel loop.
        let (dst_re, dst_im) = unsafe { out.row(y, sw) };
        for i in 0..sw {
            dst_re[i] = co * p[i] + so * q[i];
            dst_im[i] = so * p[i] - co * q[i];
        }
    }
}

/// Demodulation folded into the causal sweep and remodulation into the
/// anticausal one, so the strip is read and written once.
#[allow(clippy::too_many_arguments)]
fn fused_third_order_strip(
    input: Planes<'_>,
    h: usize,
    md: &AxisModulation,
    (feedback, gain, tail): ThirdOrderView<'_>,
    b: &mut StripBufs,
    out: StripOut,
    sw: usize,
    c: &mut OpCounters,
) {
    let [a1, a2, a3] = *feedback;
    // causal outputs at rows 3..h+3; rows 0..3 replicate the first input row
    b.p.resize((h + 3) * sw, 0.0);
    b.q.resize((h + 3) * sw, 0.0);
    b.state.resize(8 * sw, 0.0);
    let (dp, rest) = b.state.split_at_mut(sw);
    let (dq, rest) = rest.split_at_mut(sw);
    for y in 0..h {
        demodulate_strip_row(input, out, y, sw, md, dp, dq, c);
        if y == 0 {
            for r in 0..3 {
                b.p[r * sw..(r + 1) * sw].copy_from_slice(dp);
                b.q[r * sw..(r + 1) * sw].copy_from_slice(dq);
            }
        }
        causal_row([gain, a1, a2, a3], dp, &mut b.p[y * sw..(y + 4) * sw]);
        causal_row([gain, a1, a2, a3], dq, &mut b.q[y * sw..(y + 4) * sw]);
    }

    // `dp`, `dq` still hold the last demodulated row; `np`, `nq` hold three
    // state rows each, used as a ring
    let (np, nq) = rest.split_at_mut(3 * sw);
    for (buf, x, n) in [(&b.p, &*dp, &mut *np), (&b.q, &*dq, &mut *nq)] {
        for i in 0..sw {
            let last = [buf[(h + 2) * sw + i], buf[(h + 1) * sw + i], buf[h * sw + i]];
            let t = third_order_tail(tail, last, x[i]);
            for k in 0..3 {
                n[k * sw + i] = t[k];
            }
        }
    }
    let coef = [gain, a1, a2, a3];
    for (step, y) in (0..h).rev().enumerate() {
        let (co, so) = (md.cos_out[y], md.sin_out[y]);
        let (up, uq) = (&b.p[(y + 3) * sw..(y + 4) * sw], &b.q[(y + 3) * sw..(y + 4) * sw]);
        let (n1p, n2p, n3p) = ring(np, sw, step);
        let (n1q, n2q, n3q) = ring(nq, sw, step);
        // SAFETY: columns x0..x0+sw of row y belong to this strip alone, and
        // the planes outlive the parallel loop.
        let (dst_re, dst_im) = unsafe { out.row(y, sw) };
        anticausal_row(coef, up, n1p, n2p, n3p);
        anticausal_row(coef, uq, n1q, n2q, n3q);
        for i in 0..sw {
            let (sp, sq) = (n3p[i], n3q[i]);
            dst_re[i] = co * sp + so * sq;
            dst_im[i] = so * sp - co * sq;
        }
    }
}

/// Fills the last of four consecutive rows in `rows` from the three before
/// it and the input `x`.
#[inline]
fn causal_row([g, a1, a2, a3]: [f64; 4], x: &[f64], rows: &mut [f64]) {
    let n = x.len();
    let (done, cur) = rows.split_at_mut(3 * n);
    let (p3, p2, p1, cur) = (&done[..n], &done[n..2 * n], &done[2 * n..3 * n], &mut cur[..n]);
    for i in 0..n {
        cur[i] = g * x[i] + a3 * p3[i] + a2 * p2[i] + a1 * p1[i];
    }
}

/// `n3 ← g·u + a3·n3 + a2·n2 + a1·n1`; the caller then treats `n3` as the
/// newest row.
#[inline]
fn anticausal_row([g, a1, a2, a3]: [f64; 4], u: &[f64], n1: &[f64], n2: &[f64], n3: &mut [f64]) {
    let n = n3.len();
    let (u, n1, n2) = (&u[..n], &n1[..n], &n2[..n]);
    for i in 0..n {
        n3[i] = g * u[i] + a3 * n3[i] + a2 * n2[i] + a1 * n1[i];
    }
}

/// Ring of three rows: at `step` returns `(newest, middle, oldest)`, the
/// oldest being the slot to overwrite next.
#[inline]
fn ring(buf: &mut [f64], sw: usize, step: usize) -> (&[f64], &[f64], &mut [f64]) {
    let (r0, rest) = buf.split_at_mut(sw);
    let (r1, r2) = rest.split_at_mut(sw);
    let r2 = &mut r2[..sw];
    // rows start as (n1, n2, n3) = (r0, r1, r2); each step the oldest slot
    // receives the new row
    match step % 3 {
        0 => (r0, r1, r2),
        1 => (r2, r0, r1),
        _ => (r1, r2, r0),
    }
}

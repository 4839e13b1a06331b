use std::f64::consts::PI;

use fastgabor::bank::{BankSpec, SigmaRule};
use fastgabor::io::{decode_container, encode_container, read_bank_container, write_bank_container, ContainerKind};
use fastgabor::oracle::{fir_gabor, localized_dft, windowed_dft, OracleConfig};
use fastgabor::{
    compute_bank, compute_bank_noreuse, gabor_filter, sdft_bin, sdft_full, ComplexImage, GaborParams,
    OpCounters, RealImage, SdftSpec, SmootherKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(w: usize, h: usize, seed: u64) -> RealImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RealImage::from_fn(w, h, |_, _| rng.gen_range(0.0..255.0))
}

fn fir(f: &RealImage, p: GaborParams) -> ComplexImage {
    gabor_filter(f, p, SmootherKind::exact_fir(), &mut OpCounters::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fast_fir_path_equals_oracle(
        seed in any::<u64>(),
        omega in 0.01f64..3.1,
        theta in 0.0f64..PI,
        sigma in 0.6f64..4.0,
    ) {
        let f = noise(32, 32, seed);
        let p = GaborParams::new(omega, theta, sigma).unwrap();
        let truth = fir_gabor(&f, p, &OracleConfig::default()).unwrap();
        prop_assert!(fir(&f, p).max_relative_error(&truth) <= 1e-10);
    }

    #[test]
    fn filtering_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (f, g) = (noise(24, 20, seed), noise(24, 20, seed ^ 0x55));
        let mix = RealImage::from_fn(24, 20, |x, y| a * f.get(x, y) + b * g.get(x, y));
        let p = GaborParams::new(0.7, 1.1, 3.0).unwrap();
        let (kf, kg, km) = (fir(&f, p), fir(&g, p), fir(&mix, p));
        let want = ComplexImage::from_fn(24, 20, |x, y| {
            let (fr, fi) = kf.get(x, y);
            let (gr, gi) = kg.get(x, y);
            (a * fr + b * gr, a * fi + b * gi)
        });
        prop_assert!(km.max_relative_error(&want) <= 1e-10);
    }
}

#[test]
fn shifting_the_input_shifts_the_output_away_from_borders() {
    let (w, h, sx, sy) = (64, 60, 5, 3);
    let f = noise(w, h, 11);
    let shifted = RealImage::from_fn(w, h, |x, y| f.get(x.saturating_sub(sx), y.saturating_sub(sy)));
    let sigma = 1.5;
    let p = GaborParams::new(0.9, 0.6, sigma).unwrap();
    let (a, b) = (fir(&f, p), fir(&shifted, p));
    let r = (6.0 * sigma) as usize + 1;
    for y in r + sy..h - r {
        for x in r + sx..w - r {
            let (ar, ai) = a.get(x - sx, y - sy);
            let (br, bi) = b.get(x, y);
            assert!((br - ar).abs() < 1e-9 && (bi - ai).abs() < 1e-9, "({x}, {y})");
        }
    }
}

#[test]
fn bank_reuse_matches_no_reuse_for_even_counts() {
    let f = noise(40, 36, 5);
    for n in (4..=16).step_by(2) {
        let spec = BankSpec::new(vec![0.6, 1.3], n, SigmaRule::Explicit(vec![2.5, 1.5])).unwrap();
        for kind in [SmootherKind::exact_fir(), SmootherKind::RecursiveIir] {
            let a = compute_bank(&f, &spec, kind, &mut OpCounters::default()).unwrap();
            let b = compute_bank_noreuse(&f, &spec, kind, &mut OpCounters::default()).unwrap();
            assert_eq!(a.entries.len(), 2 * n);
            for ((pa, ia), (pb, ib)) in a.entries.iter().zip(&b.entries) {
                assert_eq!(pa, pb);
                assert!(ia.max_relative_error(ib) <= 1e-10, "N={n} {kind:?} {pa:?}");
            }
            assert!(a.counters.smoothings_h < b.counters.smoothings_h);
            assert_eq!(a.counters.smoothings_v, b.counters.smoothings_v);
        }
    }
}

#[test]
fn sliding_dft_matches_localized_oracle() {
    let cfg = OracleConfig::default();
    for m in [4, 8] {
        for kind in [SmootherKind::exact_fir(), SmootherKind::box_window(m)] {
            let spec = SdftSpec::new(m, m, kind).unwrap();
            let f = noise(16, 16, m as u64);
            let full = sdft_full(&f, &spec, &mut OpCounters::default()).unwrap();
            for (u, v, bin) in full.iter() {
                let truth = localized_dft(&f, u, v, &spec, &cfg).unwrap();
                assert!(bin.max_relative_error(&truth) <= 1e-10, "M={m} ({u}, {v}) {kind:?}");
            }
        }
    }
}

#[test]
fn non_square_windows_match_single_bins() {
    let f = noise(18, 14, 9);
    for (mx, my) in [(4, 8), (8, 4), (3, 5)] {
        let spec = SdftSpec::new(mx, my, SmootherKind::exact_fir()).unwrap();
        let full = sdft_full(&f, &spec, &mut OpCounters::default()).unwrap();
        for (u, v, bin) in full.iter() {
            let single = sdft_bin(&f, u, v, &spec, &mut OpCounters::default()).unwrap();
            assert!(bin.max_relative_error(&single) <= 1e-12, "{mx}x{my} ({u}, {v})");
        }
    }
}

#[test]
fn box_mode_equals_windowed_dft_in_the_interior() {
    let (w, h) = (20, 16);
    let f = noise(w, h, 21);
    for m in [4, 8] {
        let spec = SdftSpec::new(m, m, SmootherKind::box_window(m)).unwrap();
        for (u, v) in [(0, 0), (1, 3), (m - 1, m / 2), (m / 2, 1)] {
            let a = sdft_bin(&f, u, v, &spec, &mut OpCounters::default()).unwrap();
            let b = windowed_dft(&f, u, v, m, m).unwrap();
            for y in m / 2..h - m / 2 {
                for x in m / 2..w - m / 2 {
                    let (ar, ai) = a.get(x, y);
                    let (br, bi) = b.get(x, y);
                    assert!((ar - br).hypot(ai - bi) <= 1e-10 * br.hypot(bi).max(1.0));
                }
            }
        }
    }
}

#[test]
fn impulse_phase_is_referenced_to_the_window_centre() {
    let (w, h, x0, y0) = (16, 16, 8, 7);
    let mut f = RealImage::zeros(w, h);
    f.set(x0, y0, 1.0);
    let m = 4;
    let spec = SdftSpec::new(m, m, SmootherKind::box_window(m)).unwrap();
    for (u, v) in [(1, 0), (0, 1), (3, 2)] {
        let out = sdft_bin(&f, u, v, &spec, &mut OpCounters::default()).unwrap();
        // window starting at (x − M/2, y − M/2) sees the impulse at offset
        // (x0 − x + M/2, y0 − y + M/2)
        for y in y0 + 1 - m / 2..=y0 + m / 2 {
            for x in x0 + 1 - m / 2..=x0 + m / 2 {
                let (j, k) = (x0 + m / 2 - x, y0 + m / 2 - y);
                let angle = -2.0 * PI * ((u * j) as f64 / m as f64 + (v * k) as f64 / m as f64);
                let (re, im) = out.get(x, y);
                assert!((re - angle.cos()).abs() < 1e-12 && (im - angle.sin()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn fig1_bank_container_round_trips() {
    let f = noise(32, 24, 3);
    let out = compute_bank(&f, &BankSpec::fig1(), SmootherKind::RecursiveIir, &mut OpCounters::default())
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.gbnk");
    write_bank_container(&out.entries, &path).unwrap();
    let back = read_bank_container(&path).unwrap();
    assert_eq!(back, out.entries);
    let bytes = std::fs::read(&path).unwrap();
    let (kind, raw) = decode_container(&bytes).unwrap();
    assert_eq!(kind, ContainerKind::GaborBank);
    let again = encode_container(kind, raw.iter().map(|(p, img)| (*p, img))).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn truncated_container_is_rejected() {
    let f = noise(8, 8, 1);
    let spec = BankSpec::new(vec![0.8], 2, SigmaRule::Wavelength).unwrap();
    let out = compute_bank(&f, &spec, SmootherKind::RecursiveIir, &mut OpCounters::default()).unwrap();
    let bytes = encode_container(
        ContainerKind::GaborBank,
        out.entries.iter().map(|(p, img)| ([p.omega(), p.theta(), p.sigma()], img)),
    )
    .unwrap();
    for cut in [0, 4, bytes.len() / 2, bytes.len() - 1] {
        assert!(decode_container(&bytes[..cut]).is_err(), "cut at {cut}");
    }
}

//! Binary PGM input, magnitude visualisation and the GBNK output container.
//!
//! GBNK layout (all little-endian):
//!
//! ```text
//! magic   "GBNK"                      4 bytes
//! version u32                         low 24 bits = 1, high byte = kind flag
//!                                     (0 = Gabor bank, 1 = sliding-DFT bins)
//! width   u32
//! height  u32
//! count   u32
//! count × {
//!     p0 f64, p1 f64, p2 f64          (omega, theta, sigma) or (u, v, sigma)
//!     re  width·height × f64          row-major
//!     im  width·height × f64          row-major
//! }
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gabor::GaborParams;
use crate::image::{ComplexImage, RealImage};
use crate::sdft::SdftOutput;

pub const GBNK_MAGIC: &[u8; 4] = b"GBNK";
pub const GBNK_VERSION: u32 = 1;
const KIND_SHIFT: u32 = 24;
const HEADER_LEN: usize = 20;

/// Reads a binary (P5) PGM. Samples keep their native range `0..=maxval`.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<RealImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Decodes an in-memory binary PGM.
pub fn decode_pgm(bytes: &[u8]) -> Result<RealImage> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedHeader("missing PNM magic".into()));
    }
    match bytes[1] {
        b'5' => {}
        b'1'..=b'4' | b'6' | b'7' => {
            return Err(Error::UnsupportedFormat(format!(
                "P{} (only binary grayscale P5 is supported)",
                bytes[1] as char
            )))
        }
        _ => return Err(Error::MalformedHeader("unknown PNM magic".into())),
    }

    let mut pos = 2;
    let width = header_number(bytes, &mut pos)?;
    let height = header_number(bytes, &mut pos)?;
    let maxval = header_number(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(Error::MalformedHeader("missing whitespace after maxval".into())),
        None => return Err(Error::UnexpectedEof),
    }

    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("image too large".into()))?;
    let bps = if maxval < 256 { 1 } else { 2 };
    let raster = &bytes[pos..];
    if raster.len() < n * bps {
        return Err(Error::UnexpectedEof);
    }
    let data: Vec<f64> = if bps == 1 {
        raster[..n].iter().map(|&b| f64::from(b)).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])))
            .collect()
    };
    RealImage::new(width, height, data)
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    // skip whitespace and '#' comments
    loop {
        match bytes.get(*pos) {
            None => return Err(Error::UnexpectedEof),
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&c) = bytes.get(*pos) {
                    *pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(match bytes.get(*pos) {
            None => Error::UnexpectedEof,
            Some(_) => Error::MalformedHeader("expected a decimal number".into()),
        });
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedHeader("number out of range".into()))
}

/// Writes a real image as binary PGM. Samples are rounded and clamped to
/// `0..=maxval`.
pub fn save_grayscale(img: &RealImage, maxval: u16, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if maxval == 0 {
        return Err(Error::param("maxval must be positive"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval).into_bytes();
    let quantise = |v: f64| (v + 0.5).floor().clamp(0.0, f64::from(maxval)) as u16;
    for &v in img.data() {
        let q = quantise(v);
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// 8-bit magnitude image, `round(255 · |F| / max|F|)` with halves rounded up.
/// An all-zero input maps to an all-zero image.
pub fn magnitude_pixels(img: &ComplexImage) -> Vec<u8> {
    let mag = img.magnitude();
    let peak = mag.iter().cloned().fold(0.0f64, f64::max);
    if peak == 0.0 {
        return vec![0; mag.len()];
    }
    mag.iter()
        .map(|m| (255.0 * m / peak + 0.5).floor().min(255.0) as u8)
        .collect()
}

pub fn write_magnitude(img: &ComplexImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(magnitude_pixels(img));
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// What the three parameter slots of a container entry mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    /// `(omega, theta, sigma)`
    GaborBank,
    /// `(u, v, sigma)`
    Sdft,
}

impl ContainerKind {
    fn flag(self) -> u32 {
        match self {
            ContainerKind::GaborBank => 0,
            ContainerKind::Sdft => 1,
        }
    }
}

/// Parameters of one sliding-DFT bin as stored in a container.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdftBinParams {
    pub u: usize,
    pub v: usize,
    pub sigma: f64,
}

/// One decoded container entry: its three parameters and its image.
pub type RawEntry = ([f64; 3], ComplexImage);

/// Serialises entries into GBNK bytes.
pub fn encode_container<'a, I>(kind: ContainerKind, entries: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = ([f64; 3], &'a ComplexImage)>,
{
    let entries: Vec<_> = entries.into_iter().collect();
    let Some((_, first)) = entries.first() else {
        return Err(Error::param("container needs at least one entry"));
    };
    let dims = first.dims();
    for (_, img) in &entries {
        if img.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: img.dims(),
            });
        }
    }
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::param(format!("{what} {v} does not fit in u32")))
    };

    let plane = dims.0 * dims.1;
    let mut out = Vec::with_capacity(HEADER_LEN + entries.len() * (24 + 16 * plane));
    out.extend_from_slice(GBNK_MAGIC);
    out.extend_from_slice(&(GBNK_VERSION | (kind.flag() << KIND_SHIFT)).to_le_bytes());
    out.extend_from_slice(&to_u32(dims.0, "width")?.to_le_bytes());
    out.extend_from_slice(&to_u32(dims.1, "height")?.to_le_bytes());
    out.extend_from_slice(&to_u32(entries.len(), "entry count")?.to_le_bytes());
    for (params, img) in entries {
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for v in img.re().iter().chain(img.im()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses GBNK bytes.
pub fn decode_container(bytes: &[u8]) -> Result<(ContainerKind, Vec<RawEntry>)> {
    if bytes.len() < 4 || &bytes[..4] != GBNK_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedContainer);
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    let kind = match (version & ((1 << KIND_SHIFT) - 1), version >> KIND_SHIFT) {
        (GBNK_VERSION, 0) => ContainerKind::GaborBank,
        (GBNK_VERSION, 1) => ContainerKind::Sdft,
        _ => return Err(Error::VersionMismatch(version)),
    };
    let width = word(8) as usize;
    let height = word(12) as usize;
    let count = word(16) as usize;
    if width == 0 || height == 0 || count == 0 {
        return Err(Error::CorruptContainer(format!(
            "empty container ({width}x{height}, {count} entries)"
        )));
    }

    let plane = width * height;
    let entry_len = 24 + 16 * plane;
    let body = &bytes[HEADER_LEN..];
    let needed = entry_len
        .checked_mul(count)
        .ok_or_else(|| Error::CorruptContainer("entry size overflows".into()))?;
    if body.len() < needed {
        return Err(Error::TruncatedContainer);
    }
    if body.len() > needed {
        return Err(Error::CorruptContainer(format!(
            "{} trailing bytes",
            body.len() - needed
        )));
    }

    let read_f64s = |chunk: &[u8]| -> Vec<f64> {
        chunk
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let mut entries = Vec::with_capacity(count);
    for entry in body.chunks_exact(entry_len) {
        let p = read_f64s(&entry[..24]);
        let re = read_f64s(&entry[24..24 + 8 * plane]);
        let im = read_f64s(&entry[24 + 8 * plane..]);
        let img = ComplexImage::new(width, height, re, im)?;
        entries.push(([p[0], p[1], p[2]], img));
    }
    Ok((kind, entries))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_bank_container(
    outputs: &[(GaborParams, ComplexImage)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode_container(
        ContainerKind::GaborBank,
        outputs
            .iter()
            .map(|(p, img)| ([p.omega(), p.theta(), p.sigma()], img)),
    )?;
    write_bytes(path.as_ref(), &bytes)
}

pub fn read_bank_container(path: impl AsRef<Path>) -> Result<Vec<(GaborParams, ComplexImage)>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (kind, entries) = decode_container(&bytes)?;
    if kind != ContainerKind::GaborBank {
        return Err(Error::CorruptContainer(
            "container holds sliding-DFT bins, not a Gabor bank".into(),
        ));
    }
    entries
        .into_iter()
        .map(|([omega, theta, sigma], img)| Ok((GaborParams::new(omega, theta, sigma)?, img)))
        .collect()
}

pub fn write_sdft_container(out: &SdftOutput, path: impl AsRef<Path>) -> Result<()> {
    let sigma = out.sigma();
    let bytes = encode_container(
        ContainerKind::Sdft,
        out.iter()
            .map(|(u, v, img)| ([u as f64, v as f64, sigma], img)),
    )?;
    write_bytes(path.as_ref(), &bytes)
}

pub fn read_sdft_container(path: impl AsRef<Path>) -> Result<Vec<(SdftBinParams, ComplexImage)>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (kind, entries) = decode_container(&bytes)?;
    if kind != ContainerKind::Sdft {
        return Err(Error::CorruptContainer(
            "container holds a Gabor bank, not sliding-DFT bins".into(),
        ));
    }
    let index = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
            Ok(v as usize)
        } else {
            Err(Error::CorruptContainer(format!("bad bin index {v}")))
        }
    };
    entries
        .into_iter()
        .map(|([u, v, sigma], img)| {
            Ok((
                SdftBinParams {
                    u: index(u)?,
                    v: index(v)?,
                    sigma,
                },
                img,
            ))
        })
        .collect()
}

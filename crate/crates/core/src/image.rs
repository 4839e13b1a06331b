//! Real and complex planar images.

use crate::error::{Error, Result};

/// Row-major grid of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("image samples must be finite"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Copies the `w × h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x0 + w > self.width || y0 + h > self.height {
            return Err(Error::param(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }
}

/// Planar complex image: separate row-major real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    width: usize,
    height: usize,
    pub(crate) re: Vec<f64>,
    pub(crate) im: Vec<f64>,
}

impl ComplexImage {
    pub fn new(width: usize, height: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        check_dims(width, height, re.len())?;
        check_dims(width, height, im.len())?;
        if re.iter().chain(im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("image samples must be finite"));
        }
        Ok(Self {
            width,
            height,
            re,
            im,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            re: vec![0.0; width * height],
            im: vec![0.0; width * height],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Self {
        let mut img = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    /// A complex image with `re` as the real plane and a zero imaginary plane.
    pub fn from_real(img: &RealImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            re: img.data.clone(),
            im: vec![0.0; img.data.len()],
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn re(&self) -> &[f64] {
        &self.re
    }

    #[inline]
    pub fn im(&self) -> &[f64] {
        &self.im
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.re[i], self.im[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: (f64, f64)) {
        let i = y * self.width + x;
        self.re[i] = v.0;
        self.im[i] = v.1;
    }

    /// Per-pixel modulus `|F(x, y)|`, row-major.
    pub fn magnitude(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| r.hypot(*i))
            .collect()
    }

    /// Complex conjugate: real plane copied, imaginary plane negated.
    pub fn conj(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            re: self.re.clone(),
            im: self.im.iter().map(|v| -v).collect(),
        }
    }

    pub fn into_planes(self) -> (Vec<f64>, Vec<f64>) {
        (self.re, self.im)
    }

    /// Largest modulus difference to `other`, divided by the largest modulus
    /// of `other`. Returns 0 when both images are identically zero.
    pub fn max_relative_error(&self, other: &ComplexImage) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..self.re.len() {
            let d = (self.re[i] - other.re[i]).hypot(self.im[i] - other.im[i]);
            err = err.max(d);
            scale = scale.max(other.re[i].hypot(other.im[i]));
        }
        if err == 0.0 {
            0.0
        } else if scale == 0.0 {
            f64::INFINITY
        } else {
            err / scale
        }
    }

    pub(crate) fn from_planes_unchecked(
        width: usize,
        height: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(re.len(), width * height);
        debug_assert_eq!(im.len(), width * height);
        Self {
            width,
            height,
            re,
            im,
        }
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::param(format!(
            "plane holds {len} samples, expected {width}x{height}"
        )));
    }
    Ok(())
}

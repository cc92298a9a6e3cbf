//! Real and complex 2D grids in row-major storage, with the padding/cropping
//! pair used to realize spatial oversampling and its adjoint.
//!
//! Grids are plain value types: every operation is pure and returns a new
//! grid, so values can be shared freely across threads.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use num_complex::Complex;

/// Real-valued height x width grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Complex-valued height x width grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid<T> {
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

fn check_dims(context: &'static str, height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::dimension(context, (height.max(1), width.max(1)), (height, width)));
    }
    if len != height * width {
        return Err(Error::parameter(
            "data",
            format!("{context}: data length {len} does not equal {height}x{width}"),
        ));
    }
    Ok(())
}

impl<T: Scalar> RealGrid<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        check_dims("RealGrid::new", height, width, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter("data", "non-finite entry in RealGrid"));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![T::zero(); height * width] }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.width + c] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Entry-wise clamp into `[lo, hi]`.
    pub fn clamp(&self, lo: T, hi: T) -> Self {
        self.map(|v| if v < lo { lo } else if v > hi { hi } else { v })
    }

    /// Embed into a larger zero canvas at the top-left corner.
    pub fn zero_pad(&self, canvas_h: usize, canvas_w: usize) -> Result<Self> {
        if canvas_h < self.height || canvas_w < self.width {
            return Err(Error::dimension(
                "zero_pad",
                (self.height, self.width),
                (canvas_h, canvas_w),
            ));
        }
        let mut out = Self::zeros(canvas_h, canvas_w);
        for r in 0..self.height {
            let src = &self.data[r * self.width..(r + 1) * self.width];
            out.data[r * canvas_w..r * canvas_w + self.width].copy_from_slice(src);
        }
        Ok(out)
    }

    /// Top-left sub-block of the requested size; the adjoint of `zero_pad`.
    pub fn crop(&self, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h > self.height || out_w > self.width || out_h == 0 || out_w == 0 {
            return Err(Error::dimension("crop", (out_h, out_w), (self.height, self.width)));
        }
        let mut data = Vec::with_capacity(out_h * out_w);
        for r in 0..out_h {
            data.extend_from_slice(&self.data[r * self.width..r * self.width + out_w]);
        }
        Ok(Self { height: out_h, width: out_w, data })
    }

    /// Circular shift moving content down by `dr` rows and right by `dc`
    /// columns (negative values shift the other way).
    pub fn circular_shift(&self, dr: isize, dc: isize) -> Self {
        let h = self.height as isize;
        let w = self.width as isize;
        Self::from_fn(self.height, self.width, |r, c| {
            let sr = (r as isize - dr).rem_euclid(h) as usize;
            let sc = (c as isize - dc).rem_euclid(w) as usize;
            self.at(sr, sc)
        })
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.at(r, self.width - 1 - c))
    }

    /// Mirror top-bottom.
    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.at(self.height - 1 - r, c))
    }

    pub fn rotate_180(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| {
            self.at(self.height - 1 - r, self.width - 1 - c)
        })
    }

    pub fn to_complex(&self) -> ComplexGrid<T> {
        ComplexGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }
}

impl<T: Scalar> ComplexGrid<T> {
    pub fn new(height: usize, width: usize, data: Vec<Complex<T>>) -> Result<Self> {
        check_dims("ComplexGrid::new", height, width, data.len())?;
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![Complex::new(T::zero(), T::zero()); height * width],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn at(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.width + c]
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn map(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    /// Entry-wise product with a real grid.
    pub fn mul_real(&self, other: &RealGrid<T>) -> Self {
        debug_assert_eq!(self.dims(), other.dims());
        Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&z, &r)| z * r)
                .collect(),
        }
    }

    /// Entry-wise moduli |z|.
    pub fn modulus(&self) -> RealGrid<T> {
        RealGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    /// Entry-wise squared moduli |z|^2.
    pub fn modulus_sq(&self) -> RealGrid<T> {
        RealGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn real_part(&self) -> RealGrid<T> {
        RealGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    /// Entry-wise Re(conj(self) * other), the real inner-product density.
    pub fn re_conj_mul(&self, other: &Self) -> RealGrid<T> {
        debug_assert_eq!(self.dims(), other.dims());
        RealGrid {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a.conj() * b).re)
                .collect(),
        }
    }

    /// Complex inner product sum(conj(self) * other).
    pub fn inner(&self, other: &Self) -> Complex<T> {
        debug_assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn crop(&self, out_h: usize, out_w: usize) -> Result<Self> {
        if out_h > self.height || out_w > self.width || out_h == 0 || out_w == 0 {
            return Err(Error::dimension("crop", (out_h, out_w), (self.height, self.width)));
        }
        let mut data = Vec::with_capacity(out_h * out_w);
        for r in 0..out_h {
            data.extend_from_slice(&self.data[r * self.width..r * self.width + out_w]);
        }
        Ok(Self { height: out_h, width: out_w, data })
    }

    pub fn zero_pad(&self, canvas_h: usize, canvas_w: usize) -> Result<Self> {
        if canvas_h < self.height || canvas_w < self.width {
            return Err(Error::dimension(
                "zero_pad",
                (self.height, self.width),
                (canvas_h, canvas_w),
            ));
        }
        let mut out = Self::zeros(canvas_h, canvas_w);
        for r in 0..self.height {
            let src = &self.data[r * self.width..(r + 1) * self.width];
            out.data[r * canvas_w..r * canvas_w + self.width].copy_from_slice(src);
        }
        Ok(out)
    }
}

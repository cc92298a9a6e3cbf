//! Unitary 2D discrete Fourier transform.
//!
//! Both directions carry a 1/sqrt(height*width) factor, so the transform is
//! unitary: the adjoint equals the inverse and Parseval holds exactly (up to
//! rounding). Any grid size >= 1 per side is supported.

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::scalar::Scalar;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Precomputed plan for one grid geometry. Cheap to clone (shared plans) and
/// safe to use from multiple threads.
#[derive(Clone)]
pub struct Fft2<T: Scalar> {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> std::fmt::Debug for Fft2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl<T: Scalar> Fft2<T> {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::dimension("Fft2::new", (1, 1), (height, width)));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Forward unitary transform.
    pub fn forward(&self, g: &ComplexGrid<T>) -> Result<ComplexGrid<T>> {
        self.transform(g, true)
    }

    /// Inverse unitary transform; exact adjoint of `forward`.
    pub fn inverse(&self, g: &ComplexGrid<T>) -> Result<ComplexGrid<T>> {
        self.transform(g, false)
    }

    fn transform(&self, g: &ComplexGrid<T>, forward: bool) -> Result<ComplexGrid<T>> {
        if g.dims() != (self.height, self.width) {
            return Err(Error::dimension("Fft2", (self.height, self.width), g.dims()));
        }
        let (row_plan, col_plan) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };

        let mut buf: Vec<Complex<T>> = g.data().to_vec();
        for row in buf.chunks_exact_mut(self.width) {
            row_plan.process(row);
        }
        let mut tr = transpose(&buf, self.height, self.width);
        for col in tr.chunks_exact_mut(self.height) {
            col_plan.process(col);
        }
        let mut out = transpose(&tr, self.width, self.height);

        // rustfft leaves both directions unnormalized
        let scale = T::of_f64(1.0 / ((self.height * self.width) as f64).sqrt());
        for v in &mut out {
            *v = *v * scale;
        }
        ComplexGrid::new(self.height, self.width, out)
    }
}

fn transpose<T: Scalar>(src: &[Complex<T>], height: usize, width: usize) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut dst = vec![zero; src.len()];
    for r in 0..height {
        for c in 0..width {
            dst[c * height + r] = src[r * width + c];
        }
    }
    dst
}

/// One-shot forward unitary 2D DFT (plans internally; prefer [`Fft2`] in loops).
pub fn fft2<T: Scalar>(g: &ComplexGrid<T>) -> Result<ComplexGrid<T>> {
    Fft2::new(g.height(), g.width())?.forward(g)
}

/// One-shot inverse unitary 2D DFT.
pub fn ifft2<T: Scalar>(g: &ComplexGrid<T>) -> Result<ComplexGrid<T>> {
    Fft2::new(g.height(), g.width())?.inverse(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RealGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force O(N^2) DFT under the same unitary convention, written
    /// independently of the FFT path.
    fn dft2_unitary(g: &ComplexGrid<f64>, inverse: bool) -> ComplexGrid<f64> {
        let (h, w) = g.dims();
        let sign = if inverse { 1.0 } else { -1.0 };
        let scale = 1.0 / ((h * w) as f64).sqrt();
        ComplexGrid::from_fn(h, w, |kr, kc| {
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ang = sign
                        * 2.0
                        * std::f64::consts::PI
                        * ((kr * r) as f64 / h as f64 + (kc * c) as f64 / w as f64);
                    acc += g.at(r, c) * Complex::new(ang.cos(), ang.sin());
                }
            }
            acc * scale
        })
    }

    fn random_grid(h: usize, w: usize, seed: u64) -> ComplexGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexGrid::from_fn(h, w, |_, _| {
            Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    fn max_abs_diff(a: &ComplexGrid<f64>, b: &ComplexGrid<f64>) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn impulse_becomes_flat_spectrum() {
        let mut g = ComplexGrid::<f64>::zeros(2, 2);
        g.data_mut()[0] = Complex::new(1.0, 0.0);
        let f = fft2(&g).unwrap();
        for v in f.data() {
            assert!((v - Complex::new(0.5, 0.0)).norm() < 1e-12);
        }
        // and back: constant 0.5 -> unit impulse at (0,0)
        let back = ifft2(&f).unwrap();
        assert!((back.at(0, 0) - Complex::new(1.0, 0.0)).norm() < 1e-12);
        assert!(back.at(0, 1).norm() < 1e-12);
    }

    #[test]
    fn round_trip_identity() {
        let g = random_grid(8, 8, 7);
        let rt = ifft2(&fft2(&g).unwrap()).unwrap();
        assert!(max_abs_diff(&g, &rt) < 1e-10);
    }

    #[test]
    fn matches_brute_force_dft_various_sizes() {
        for (i, &(h, w)) in [(2, 2), (3, 5), (4, 4), (6, 6), (8, 8), (8, 16), (12, 12), (16, 16)]
            .iter()
            .enumerate()
        {
            let g = random_grid(h, w, 100 + i as u64);
            let fast = fft2(&g).unwrap();
            let slow = dft2_unitary(&g, false);
            assert!(
                max_abs_diff(&fast, &slow) < 1e-10,
                "fft mismatch at {h}x{w}"
            );
            let fast_inv = ifft2(&g).unwrap();
            let slow_inv = dft2_unitary(&g, true);
            assert!(
                max_abs_diff(&fast_inv, &slow_inv) < 1e-10,
                "ifft mismatch at {h}x{w}"
            );
        }
    }

    #[test]
    fn parseval_energy_preserved() {
        let g = random_grid(16, 8, 3);
        let f = fft2(&g).unwrap();
        let rel = (f.norm_sq() - g.norm_sq()).abs() / g.norm_sq();
        assert!(rel < 1e-12);
    }

    #[test]
    fn linearity() {
        let a = random_grid(8, 8, 11);
        let b = random_grid(8, 8, 12);
        let alpha = 1.7;
        let combo = ComplexGrid::from_fn(8, 8, |r, c| a.at(r, c) * alpha + b.at(r, c));
        let lhs = fft2(&combo).unwrap();
        let fa = fft2(&a).unwrap();
        let fb = fft2(&b).unwrap();
        let rhs = ComplexGrid::from_fn(8, 8, |r, c| fa.at(r, c) * alpha + fb.at(r, c));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn adjoint_identity_fft_ifft() {
        // <fft2(a), b> == <a, ifft2(b)>
        let a = random_grid(8, 8, 21);
        let b = random_grid(8, 8, 22);
        let lhs = fft2(&a).unwrap().inner(&b);
        let rhs = a.inner(&ifft2(&b).unwrap());
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let plan = Fft2::<f64>::new(4, 4).unwrap();
        let g = ComplexGrid::<f64>::zeros(4, 8);
        assert!(plan.forward(&g).is_err());
        assert!(Fft2::<f64>::new(0, 4).is_err());
    }

    #[test]
    fn f32_round_trip_within_single_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = ComplexGrid::<f32>::from_fn(8, 8, |_, _| {
            Complex::new(rng.gen::<f32>() - 0.5, rng.gen::<f32>() - 0.5)
        });
        let rt = ifft2(&fft2(&g).unwrap()).unwrap();
        let max = g
            .data()
            .iter()
            .zip(rt.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f32, f32::max);
        assert!(max < 1e-5);
    }

    #[test]
    fn pad_then_crop_adjoint_through_grids() {
        // the RealGrid pad/crop pair composes with the FFT as used by the
        // measurement operator; sanity-check energies here
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = RealGrid::<f64>::from_fn(4, 4, |_, _| rng.gen());
        let padded = g.zero_pad(8, 8).unwrap();
        let f = fft2(&padded.to_complex()).unwrap();
        assert!((f.norm_sq() - g.norm_sq()).abs() < 1e-12);
    }
}

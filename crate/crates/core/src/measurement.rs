//! Phaseless forward measurement model: y = |A x + B u| + noise, with
//! A = B = the unitary 2D Fourier transform of the signal embedded in a
//! canvas twice its size per side (4x spatial oversampling), clamped
//! nonnegative after noise.

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::{ComplexGrid, RealGrid};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Whether measurements are moduli |z| or squared moduli |z|^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementMode {
    Amplitude,
    SquaredAmplitude,
}

impl std::fmt::Display for MeasurementMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasurementMode::Amplitude => write!(f, "amplitude"),
            MeasurementMode::SquaredAmplitude => write!(f, "squared_amplitude"),
        }
    }
}

/// Oversampled Fourier measurement operator (serves as both A and B).
#[derive(Debug, Clone)]
pub struct MeasurementOperator<T: Scalar> {
    signal_h: usize,
    signal_w: usize,
    canvas_h: usize,
    canvas_w: usize,
    mode: MeasurementMode,
    plan: Fft2<T>,
}

impl<T: Scalar> MeasurementOperator<T> {
    /// Canvas dimensions are fixed at exactly twice the signal dimensions.
    pub fn new(signal_h: usize, signal_w: usize, mode: MeasurementMode) -> Result<Self> {
        if signal_h == 0 || signal_w == 0 {
            return Err(Error::dimension("MeasurementOperator::new", (1, 1), (signal_h, signal_w)));
        }
        let canvas_h = 2 * signal_h;
        let canvas_w = 2 * signal_w;
        Ok(Self {
            signal_h,
            signal_w,
            canvas_h,
            canvas_w,
            mode,
            plan: Fft2::new(canvas_h, canvas_w)?,
        })
    }

    pub fn signal_dims(&self) -> (usize, usize) {
        (self.signal_h, self.signal_w)
    }

    pub fn canvas_dims(&self) -> (usize, usize) {
        (self.canvas_h, self.canvas_w)
    }

    pub fn mode(&self) -> MeasurementMode {
        self.mode
    }

    /// A g = fft2(zero_pad(g)): signal grid to complex canvas spectrum.
    pub fn apply(&self, g: &RealGrid<T>) -> Result<ComplexGrid<T>> {
        if g.dims() != (self.signal_h, self.signal_w) {
            return Err(Error::dimension("apply", (self.signal_h, self.signal_w), g.dims()));
        }
        let padded = g.zero_pad(self.canvas_h, self.canvas_w)?;
        self.plan.forward(&padded.to_complex())
    }

    /// A* c = Re(crop(ifft2(c))): the adjoint of `apply` restricted to the
    /// real-valued signal domain.
    pub fn adjoint(&self, c: &ComplexGrid<T>) -> Result<RealGrid<T>> {
        if c.dims() != (self.canvas_h, self.canvas_w) {
            return Err(Error::dimension("adjoint", (self.canvas_h, self.canvas_w), c.dims()));
        }
        let spatial = self.plan.inverse(c)?;
        Ok(spatial.crop(self.signal_h, self.signal_w)?.real_part())
    }

    /// Noise-free measurement magnitudes of a precomputed field z = A x + B u.
    pub(crate) fn clean_from_field(&self, z: &ComplexGrid<T>) -> RealGrid<T> {
        match self.mode {
            MeasurementMode::Amplitude => z.modulus(),
            MeasurementMode::SquaredAmplitude => z.modulus_sq(),
        }
    }

    /// Synthesize measurements y = max(0, clean + eta) for target x and
    /// reference u.
    pub fn forward(
        &self,
        x: &RealGrid<T>,
        u: &RealGrid<T>,
        noise: &NoiseModel<T>,
    ) -> Result<AmplitudeMeasurements<T>> {
        if x.dims() != (self.signal_h, self.signal_w) {
            return Err(Error::dimension("forward(x)", (self.signal_h, self.signal_w), x.dims()));
        }
        if u.dims() != (self.signal_h, self.signal_w) {
            return Err(Error::dimension("forward(u)", (self.signal_h, self.signal_w), u.dims()));
        }
        let z = self.apply(x)?.add(&self.apply(u)?);
        let clean = self.clean_from_field(&z);
        let noisy = noise.corrupt(&clean, &z.modulus());
        Ok(AmplitudeMeasurements {
            values: noisy.map(|v| if v < T::zero() { T::zero() } else { v }),
            mode: self.mode,
        })
    }
}

/// Measurement noise synthesis. The Poisson case is the Gaussian surrogate
/// eta(i) ~ N(0, lambda*|z(i)|), applied to amplitudes of the clean field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone)]
pub struct NoiseModel<T: Scalar> {
    pub kind: NoiseKind,
    pub sigma: T,
    pub lambda: T,
    pub seed: u64,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, sigma: T::zero(), lambda: T::zero(), seed: 0 }
    }

    pub fn gaussian(sigma: T, seed: u64) -> Result<Self> {
        if sigma < T::zero() || !sigma.is_finite() {
            return Err(Error::parameter("sigma", "must be finite and nonnegative"));
        }
        Ok(Self { kind: NoiseKind::Gaussian, sigma, lambda: T::zero(), seed })
    }

    pub fn poisson(lambda: T, seed: u64) -> Result<Self> {
        if lambda < T::zero() || !lambda.is_finite() {
            return Err(Error::parameter("lambda", "must be finite and nonnegative"));
        }
        Ok(Self { kind: NoiseKind::Poisson, sigma: T::zero(), lambda, seed })
    }

    /// Add one noise realization to `clean`. `field_amplitude` carries |z(i)|
    /// for the Poisson variance model. Entries are visited row-major with one
    /// standard-normal draw each, so a given (seed, kind) pair is bit-stable.
    fn corrupt(&self, clean: &RealGrid<T>, field_amplitude: &RealGrid<T>) -> RealGrid<T> {
        match self.kind {
            NoiseKind::None => clean.clone(),
            NoiseKind::Gaussian => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let sigma = self.sigma.as_f64();
                clean.map(|v| {
                    let n: f64 = rng.sample(StandardNormal);
                    v + T::of_f64(sigma * n)
                })
            }
            NoiseKind::Poisson => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let lambda = self.lambda.as_f64();
                clean.zip_map(field_amplitude, |v, amp| {
                    let n: f64 = rng.sample(StandardNormal);
                    v + T::of_f64((lambda * amp.as_f64()).sqrt() * n)
                })
            }
        }
    }
}

/// Observed nonnegative measurement magnitudes on the canvas.
#[derive(Debug, Clone)]
pub struct AmplitudeMeasurements<T: Scalar> {
    values: RealGrid<T>,
    mode: MeasurementMode,
}

impl<T: Scalar> AmplitudeMeasurements<T> {
    pub fn new(values: RealGrid<T>, mode: MeasurementMode) -> Result<Self> {
        if values.data().iter().any(|&v| v < T::zero()) {
            return Err(Error::parameter("values", "measurements must be nonnegative"));
        }
        Ok(Self { values, mode })
    }

    pub fn values(&self) -> &RealGrid<T> {
        &self.values
    }

    pub fn mode(&self) -> MeasurementMode {
        self.mode
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;
    use rand::Rng;

    fn random_real(h: usize, w: usize, seed: u64) -> RealGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealGrid::from_fn(h, w, |_, _| rng.gen())
    }

    fn random_complex(h: usize, w: usize, seed: u64) -> ComplexGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexGrid::from_fn(h, w, |_, _| Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn canvas_is_twice_signal() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        assert_eq!(op.canvas_dims(), (16, 16));
    }

    #[test]
    fn apply_zero_gives_zero() {
        let op = MeasurementOperator::<f64>::new(4, 4, MeasurementMode::Amplitude).unwrap();
        let c = op.apply(&RealGrid::zeros(4, 4)).unwrap();
        assert!(c.norm() < 1e-15);
    }

    #[test]
    fn apply_is_isometric() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let g = random_real(8, 8, 1);
        let c = op.apply(&g).unwrap();
        assert!((c.norm_sq() - g.norm_sq()).abs() / g.norm_sq() < 1e-12);
    }

    #[test]
    fn adjoint_apply_is_identity_on_signal() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let g = random_real(8, 8, 2);
        let back = op.adjoint(&op.apply(&g).unwrap()).unwrap();
        let err = back.sub(&g).norm() / g.norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let op = MeasurementOperator::<f64>::new(4, 4, MeasurementMode::Amplitude).unwrap();
        let z = op.adjoint(&ComplexGrid::zeros(8, 8)).unwrap();
        assert!(z.norm() < 1e-15);
    }

    #[test]
    fn adjoint_inner_product_identity() {
        // Re<apply(a), c> == <a, adjoint(c)>
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let a = random_real(8, 8, 3);
        let c = random_complex(16, 16, 4);
        let lhs = op.apply(&a).unwrap().inner(&c).re;
        let rhs = a.dot(&op.adjoint(&c).unwrap());
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn apply_matches_brute_force_dft_of_padded_grid() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let g = random_real(8, 8, 5);
        let fast = op.apply(&g).unwrap();
        let padded = g.zero_pad(16, 16).unwrap();
        let (h, w) = (16usize, 16usize);
        let scale = 1.0 / ((h * w) as f64).sqrt();
        let slow = ComplexGrid::from_fn(h, w, |kr, kc| {
            let mut acc = Complex::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ang = -2.0
                        * std::f64::consts::PI
                        * ((kr * r) as f64 / h as f64 + (kc * c) as f64 / w as f64);
                    acc += Complex::new(padded.at(r, c), 0.0) * Complex::new(ang.cos(), ang.sin());
                }
            }
            acc * scale
        });
        let max = fast
            .data()
            .iter()
            .zip(slow.data())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-10);
    }

    #[test]
    fn forward_zero_inputs_zero_measurements() {
        let op = MeasurementOperator::<f64>::new(4, 4, MeasurementMode::Amplitude).unwrap();
        let y = op
            .forward(&RealGrid::zeros(4, 4), &RealGrid::zeros(4, 4), &NoiseModel::none())
            .unwrap();
        assert!(y.values().norm() < 1e-15);
    }

    #[test]
    fn forward_parseval_noise_free() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let x = random_real(8, 8, 6);
        let u = random_real(8, 8, 7);
        let y = op.forward(&x, &u, &NoiseModel::none()).unwrap();
        let sum_sq = y.values().norm_sq();
        let expect = x.add(&u).norm_sq();
        assert!((sum_sq - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn forward_noise_bit_reproducible() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let x = random_real(8, 8, 8);
        let u = random_real(8, 8, 9);
        let noise = NoiseModel::gaussian(0.1, 42).unwrap();
        let y1 = op.forward(&x, &u, &noise).unwrap();
        let y2 = op.forward(&x, &u, &noise).unwrap();
        assert_eq!(y1.values().data(), y2.values().data());
    }

    #[test]
    fn forward_never_negative_under_noise() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let x = random_real(8, 8, 10);
        let u = RealGrid::zeros(8, 8);
        for seed in 0..20 {
            let y = op.forward(&x, &u, &NoiseModel::gaussian(0.5, seed).unwrap()).unwrap();
            assert!(y.values().data().iter().all(|&v| v >= 0.0));
            let yp = op.forward(&x, &u, &NoiseModel::poisson(0.5, seed).unwrap()).unwrap();
            assert!(yp.values().data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn amplitude_invariant_to_global_phase_of_field() {
        let op = MeasurementOperator::<f64>::new(8, 8, MeasurementMode::Amplitude).unwrap();
        let x = random_real(8, 8, 11);
        let u = random_real(8, 8, 12);
        let z = op.apply(&x).unwrap().add(&op.apply(&u).unwrap());
        let rot = Complex::from_polar(1.0, 0.7);
        let z_rot = z.map(|v| v * rot);
        let d = z
            .modulus()
            .sub(&z_rot.modulus())
            .data()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(d < 1e-12);
    }

    #[test]
    fn amplitude_invariant_to_circular_shift_of_padded_signal() {
        // the trivial shift ambiguity, asserted on the canvas
        let x = random_real(8, 8, 13);
        let padded = x.zero_pad(16, 16).unwrap();
        let shifted = padded.circular_shift(5, -3);
        let m1 = crate::fft::fft2(&padded.to_complex()).unwrap().modulus();
        let m2 = crate::fft::fft2(&shifted.to_complex()).unwrap().modulus();
        let d = m1.sub(&m2).data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(d < 1e-10);
    }

    #[test]
    fn dimension_mismatches_rejected() {
        let op = MeasurementOperator::<f64>::new(4, 4, MeasurementMode::Amplitude).unwrap();
        assert!(op.apply(&RealGrid::<f64>::zeros(5, 4)).is_err());
        assert!(op.adjoint(&ComplexGrid::<f64>::zeros(4, 4)).is_err());
        assert!(op
            .forward(&RealGrid::zeros(4, 4), &RealGrid::zeros(8, 8), &NoiseModel::none())
            .is_err());
    }

    #[test]
    fn noise_parameters_validated() {
        assert!(NoiseModel::<f64>::gaussian(-0.1, 0).is_err());
        assert!(NoiseModel::<f64>::poisson(f64::NAN, 0).is_err());
    }
}

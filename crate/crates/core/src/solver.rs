//! Fixed-depth unrolled gradient solver for phase retrieval with an additive
//! reference, plus the classical hybrid input-output baseline and simple
//! reference generators.
//!
//! One layer performs x <- x - alpha * 2 A*[p . (|z| - y)] with
//! z = A x + B u and p the guarded phase z / max(|z|, eps). In squared
//! measurement mode p is replaced by z itself and the residual by |z|^2 - y.

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, RealGrid};
use crate::measurement::{AmplitudeMeasurements, MeasurementMode, MeasurementOperator};
use crate::scalar::Scalar;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Step size for the unrolled layers: one shared scalar or one value per layer.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSize<T> {
    Shared(T),
    PerLayer(Vec<T>),
}

impl<T: Scalar> StepSize<T> {
    pub fn at(&self, layer: usize) -> T {
        match self {
            StepSize::Shared(a) => *a,
            StepSize::PerLayer(v) => v[layer],
        }
    }
}

/// Configuration of the unrolled solver.
#[derive(Debug, Clone)]
pub struct SolverConfig<T: Scalar> {
    pub layers: usize,
    pub step: StepSize<T>,
    pub epsilon_phase: T,
    pub mode: MeasurementMode,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(layers: usize, step: StepSize<T>, epsilon_phase: T, mode: MeasurementMode) -> Result<Self> {
        match &step {
            StepSize::Shared(a) => {
                if *a <= T::zero() || !a.is_finite() {
                    return Err(Error::parameter("alpha", "step size must be positive and finite"));
                }
            }
            StepSize::PerLayer(v) => {
                if v.len() != layers {
                    return Err(Error::parameter(
                        "alpha",
                        format!("per-layer step list has {} entries, expected {}", v.len(), layers),
                    ));
                }
                if v.iter().any(|a| *a <= T::zero() || !a.is_finite()) {
                    return Err(Error::parameter("alpha", "all step sizes must be positive and finite"));
                }
            }
        }
        if epsilon_phase <= T::zero() {
            return Err(Error::parameter("epsilon_phase", "must be positive"));
        }
        Ok(Self { layers, step, epsilon_phase, mode })
    }

    /// K layers with the default shared step 0.25 and phase guard 1e-12.
    pub fn with_defaults(layers: usize, mode: MeasurementMode) -> Self {
        Self {
            layers,
            step: StepSize::Shared(T::of_f64(0.25)),
            epsilon_phase: T::of_f64(1e-12),
            mode,
        }
    }
}

/// Per-layer record of a solve.
#[derive(Debug, Clone)]
pub struct SolveTrace<T: Scalar> {
    /// x^0 .. x^K when recording was requested.
    pub iterates: Option<Vec<RealGrid<T>>>,
    /// Guarded phases p^0 .. p^{K-1} when recording was requested.
    pub phases: Option<Vec<ComplexGrid<T>>>,
    /// Data-fit loss per layer, K+1 entries (including the final iterate).
    pub residual_norms: Vec<T>,
}

/// Entry-wise guarded phase z / max(|z|, epsilon); total, 0 at 0.
pub fn phase<T: Scalar>(z: &ComplexGrid<T>, epsilon: T) -> ComplexGrid<T> {
    z.map(|v| {
        let m = v.norm();
        let denom = if m < epsilon { epsilon } else { m };
        v / denom
    })
}

/// Residual field r for the gradient: |z| - y (amplitude) or |z|^2 - y
/// (squared), as a real canvas grid.
fn residual<T: Scalar>(
    z: &ComplexGrid<T>,
    y: &AmplitudeMeasurements<T>,
    mode: MeasurementMode,
) -> RealGrid<T> {
    match mode {
        MeasurementMode::Amplitude => z.modulus().sub(y.values()),
        MeasurementMode::SquaredAmplitude => z.modulus_sq().sub(y.values()),
    }
}

/// Gradient direction from a precomputed field z = A x + B u.
fn gradient_from_field<T: Scalar>(
    z: &ComplexGrid<T>,
    y: &AmplitudeMeasurements<T>,
    op: &MeasurementOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<(RealGrid<T>, RealGrid<T>)> {
    let r = residual(z, y, cfg.mode);
    let w = match cfg.mode {
        MeasurementMode::Amplitude => phase(z, cfg.epsilon_phase).mul_real(&r),
        MeasurementMode::SquaredAmplitude => z.mul_real(&r),
    };
    let g = op.adjoint(&w)?.scale(T::of_f64(2.0));
    Ok((g, r))
}

fn check_solver_inputs<T: Scalar>(
    y: &AmplitudeMeasurements<T>,
    op: &MeasurementOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<()> {
    if y.dims() != op.canvas_dims() {
        return Err(Error::dimension("solver(y)", op.canvas_dims(), y.dims()));
    }
    if y.mode() != cfg.mode {
        return Err(Error::parameter(
            "mode",
            format!("measurements are {} but solver is configured for {}", y.mode(), cfg.mode),
        ));
    }
    Ok(())
}

/// Data-fit gradient with respect to x at (x, u). Amplitude mode evaluates
/// 2 A*[p . (|z| - y)], which is the simplified form of
/// 2 A*[p . (p* . z - y)]; squared mode evaluates 2 A*[z . (|z|^2 - y)].
pub fn grad_x<T: Scalar>(
    x: &RealGrid<T>,
    u: &RealGrid<T>,
    y: &AmplitudeMeasurements<T>,
    op: &MeasurementOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<RealGrid<T>> {
    check_solver_inputs(y, op, cfg)?;
    let z = op.apply(x)?.add(&op.apply(u)?);
    let (g, _) = gradient_from_field(&z, y, op, cfg)?;
    Ok(g)
}

/// The unsimplified amplitude-mode gradient 2 A*[p . (p* . z - y)], kept as an
/// independent algebraic route for cross-checking `grad_x`.
pub fn grad_x_unsimplified<T: Scalar>(
    x: &RealGrid<T>,
    u: &RealGrid<T>,
    y: &AmplitudeMeasurements<T>,
    op: &MeasurementOperator<T>,
    cfg: &SolverConfig<T>,
) -> Result<RealGrid<T>> {
    check_solver_inputs(y, op, cfg)?;
    let z = op.apply(x)?.add(&op.apply(u)?);
    let p = phase(&z, cfg.epsilon_phase);
    // p* . z - y, a real grid up to rounding in its imaginary part
    let inner = p.re_conj_mul(&z).sub(y.values());
    let w = p.mul_real(&inner);
    Ok(op.adjoint(&w)?.scale(T::of_f64(2.0)))
}

/// Run the K-layer unrolled solver from x^0 = 0. Returns the final iterate
/// and a trace whose residual_norms always has K+1 entries; iterates and
/// phases are filled only when `record` is set.
pub fn solve_unrolled<T: Scalar>(
    y: &AmplitudeMeasurements<T>,
    u: &RealGrid<T>,
    op: &MeasurementOperator<T>,
    cfg: &SolverConfig<T>,
    record: bool,
) -> Result<(RealGrid<T>, SolveTrace<T>)> {
    check_solver_inputs(y, op, cfg)?;
    if u.dims() != op.signal_dims() {
        return Err(Error::dimension("solve_unrolled(u)", op.signal_dims(), u.dims()));
    }
    let c_u = op.apply(u)?;
    let (h, w) = op.signal_dims();
    let mut x = RealGrid::zeros(h, w);

    let mut residual_norms = Vec::with_capacity(cfg.layers + 1);
    let mut iterates = record.then(|| vec![x.clone()]);
    let mut phases = record.then(Vec::new);

    for k in 0..cfg.layers {
        let z = op.apply(&x)?.add(&c_u);
        let (g, r) = gradient_from_field(&z, y, op, cfg)?;
        residual_norms.push(r.norm_sq());
        if let Some(ps) = phases.as_mut() {
            ps.push(phase(&z, cfg.epsilon_phase));
        }
        x = x.sub(&g.scale(cfg.step.at(k)));
        if !x.is_finite() {
            return Err(Error::Diverged { layer: k, sample: None });
        }
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
    }

    // residual at the final iterate
    let z = op.apply(&x)?.add(&c_u);
    residual_norms.push(residual(&z, y, cfg.mode).norm_sq());

    Ok((x, SolveTrace { iterates, phases, residual_norms }))
}

/// Fienup hybrid input-output on the oversampled canvas, with the signal's
/// top-left n x n region as support and nonnegativity on the support. The
/// Fourier modulus is initialized with uniformly random phases drawn from
/// `seed`. Squared-amplitude measurements are converted to amplitudes first.
pub fn solve_hio<T: Scalar>(
    y: &AmplitudeMeasurements<T>,
    op: &MeasurementOperator<T>,
    iters: usize,
    beta_hio: T,
    seed: u64,
) -> Result<RealGrid<T>> {
    if y.dims() != op.canvas_dims() {
        return Err(Error::dimension("solve_hio(y)", op.canvas_dims(), y.dims()));
    }
    if iters < 1 {
        return Err(Error::parameter("iters", "must be at least 1"));
    }
    if beta_hio <= T::zero() || beta_hio >= T::one() {
        return Err(Error::parameter("beta_hio", "must lie strictly between 0 and 1"));
    }
    let amplitude = match y.mode() {
        MeasurementMode::Amplitude => y.values().clone(),
        MeasurementMode::SquaredAmplitude => y.values().map(|v| v.sqrt()),
    };
    let (sh, sw) = op.signal_dims();
    let (ch, cw) = op.canvas_dims();
    let plan = crate::fft::Fft2::new(ch, cw)?;
    let eps = T::of_f64(1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut init = ComplexGrid::zeros(ch, cw);
    for (v, &a) in init.data_mut().iter_mut().zip(amplitude.data()) {
        let phi = two_pi * rng.gen::<f64>();
        *v = Complex::from_polar(a, T::of_f64(phi));
    }
    let mut g = plan.inverse(&init)?.real_part();
    let mut g_constrained = RealGrid::zeros(ch, cw);

    for _ in 0..iters {
        let spectrum = plan.forward(&g.to_complex())?;
        let matched = phase(&spectrum, eps).mul_real(&amplitude);
        g_constrained = plan.inverse(&matched)?.real_part();

        let mut next = g_constrained.clone();
        for r in 0..ch {
            for c in 0..cw {
                let inside = r < sh && c < sw;
                let v = g_constrained.at(r, c);
                if !(inside && v >= T::zero()) {
                    next.set(r, c, g.at(r, c) - beta_hio * v);
                }
            }
        }
        g = next;
    }

    // final object-domain projection of the Fourier-constrained estimate
    let out = g_constrained.crop(sh, sw)?;
    Ok(out.map(|v| if v < T::zero() { T::zero() } else { v }))
}

/// Baseline reference kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Flat,
    Random,
    Zero,
}

/// Build a baseline reference grid: flat at the midpoint of the range,
/// i.i.d. uniform over the range, or all zeros.
pub fn make_reference<T: Scalar>(
    kind: ReferenceKind,
    height: usize,
    width: usize,
    range: (T, T),
    seed: u64,
) -> Result<RealGrid<T>> {
    let (lo, hi) = range;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::parameter("value_range", "requires finite lo <= hi"));
    }
    Ok(match kind {
        ReferenceKind::Flat => {
            RealGrid::filled(height, width, (lo + hi) * T::of_f64(0.5))
        }
        ReferenceKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let span = (hi - lo).as_f64();
            RealGrid::from_fn(height, width, |_, _| {
                lo + T::of_f64(span * rng.gen::<f64>())
            })
        }
        ReferenceKind::Zero => RealGrid::zeros(height, width),
    })
}

//! Reconstruction quality metrics: PSNR with peak 1, and the
//! ambiguity-resolved variant that searches all circular shifts, flips and
//! 180-degree rotation of the estimate (used only for reference-free
//! baselines, whose measurements cannot distinguish those transforms).

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::RealGrid;
use crate::scalar::Scalar;

/// The PSNR value used when tabulating an exact match (mse == 0).
pub const PSNR_CAP_DB: f64 = 160.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    None,
    Horizontal,
    Vertical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    R0,
    R180,
}

/// The transform of the estimate that best matched the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedTransform {
    pub shift: (usize, usize),
    pub flip: Flip,
    pub rotation: Rotation,
}

impl std::fmt::Display for ResolvedTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let flip = match self.flip {
            Flip::None => "none",
            Flip::Horizontal => "horizontal",
            Flip::Vertical => "vertical",
            Flip::Both => "both",
        };
        let rot = match self.rotation {
            Rotation::R0 => "0",
            Rotation::R180 => "180",
        };
        write!(f, "shift=({},{}) flip={} rot={}", self.shift.0, self.shift.1, flip, rot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult<T> {
    /// 10 log10(peak^2 / mse); +infinity when mse == 0.
    pub psnr_db: T,
    pub mse: T,
    pub resolved_transform: Option<ResolvedTransform>,
}

impl<T: Scalar> MetricResult<T> {
    /// PSNR capped at [`PSNR_CAP_DB`] for tabulation.
    pub fn psnr_db_capped(&self) -> T {
        let cap = T::of_f64(PSNR_CAP_DB);
        if self.psnr_db > cap {
            cap
        } else {
            self.psnr_db
        }
    }
}

fn mse<T: Scalar>(a: &RealGrid<T>, b: &RealGrid<T>) -> T {
    let n = T::of_f64((a.height() * a.width()) as f64);
    a.sub(b).norm_sq() / n
}

fn psnr_from_mse<T: Scalar>(mse: T, peak: T) -> T {
    if mse == T::zero() {
        T::infinity()
    } else {
        T::of_f64(10.0) * (peak * peak / mse).log10()
    }
}

/// Plain PSNR between same-size grids.
pub fn psnr<T: Scalar>(a: &RealGrid<T>, b: &RealGrid<T>, peak: T) -> Result<MetricResult<T>> {
    if a.dims() != b.dims() {
        return Err(Error::dimension("psnr", a.dims(), b.dims()));
    }
    if peak <= T::zero() {
        return Err(Error::parameter("peak", "must be positive"));
    }
    let m = mse(a, b);
    Ok(MetricResult { psnr_db: psnr_from_mse(m, peak), mse: m, resolved_transform: None })
}

fn apply_flip_rot<T: Scalar>(g: &RealGrid<T>, flip: Flip, rot: Rotation) -> RealGrid<T> {
    let flipped = match flip {
        Flip::None => g.clone(),
        Flip::Horizontal => g.flip_horizontal(),
        Flip::Vertical => g.flip_vertical(),
        Flip::Both => g.flip_horizontal().flip_vertical(),
    };
    match rot {
        Rotation::R0 => flipped,
        Rotation::R180 => flipped.rotate_180(),
    }
}

const FLIPS: [Flip; 4] = [Flip::None, Flip::Horizontal, Flip::Vertical, Flip::Both];
const ROTATIONS: [Rotation; 2] = [Rotation::R0, Rotation::R180];

/// Best circular shift of `candidate` against `truth`, by maximizing the
/// cross-correlation over all shifts. Since circular shifting preserves
/// ||candidate||, the correlation argmax is exactly the mse argmin.
fn best_shift<T: Scalar>(candidate: &RealGrid<T>, truth: &RealGrid<T>) -> (usize, usize) {
    let (h, w) = candidate.dims();
    let fc = fft::fft2(&candidate.to_complex()).expect("dims valid");
    let ft = fft::fft2(&truth.to_complex()).expect("dims valid");
    // corr(s) = sum_m truth(m) candidate(m - s) = ifft2(fft(truth) . conj(fft(candidate)))
    let cross = crate::grid::ComplexGrid::from_fn(h, w, |r, c| ft.at(r, c) * fc.at(r, c).conj());
    let corr = fft::ifft2(&cross).expect("dims valid");
    let mut best = (T::neg_infinity(), (0usize, 0usize));
    for r in 0..h {
        for c in 0..w {
            let v = corr.at(r, c).re;
            if v > best.0 {
                best = (v, (r, c));
            }
        }
    }
    best.1
}

fn shift_mse_direct<T: Scalar>(
    candidate: &RealGrid<T>,
    truth: &RealGrid<T>,
    shift: (usize, usize),
) -> T {
    let shifted = candidate.circular_shift(shift.0 as isize, shift.1 as isize);
    mse(&shifted, truth)
}

/// PSNR maximized over all circular shifts, flips and 180-degree rotations of
/// the estimate. The shift search is FFT-accelerated; the reported mse is
/// re-evaluated directly at the winning shift.
pub fn psnr_ambiguity_resolved<T: Scalar>(
    estimate: &RealGrid<T>,
    truth: &RealGrid<T>,
) -> Result<MetricResult<T>> {
    if estimate.dims() != truth.dims() {
        return Err(Error::dimension("psnr_ambiguity_resolved", estimate.dims(), truth.dims()));
    }
    let mut best: Option<(T, ResolvedTransform)> = None;
    for flip in FLIPS {
        for rot in ROTATIONS {
            let candidate = apply_flip_rot(estimate, flip, rot);
            let shift = best_shift(&candidate, truth);
            let m = shift_mse_direct(&candidate, truth, shift);
            let better = match &best {
                None => true,
                Some((cur, _)) => m < *cur,
            };
            if better {
                best = Some((m, ResolvedTransform { shift, flip, rotation: rot }));
            }
        }
    }
    let (m, transform) = best.expect("at least one candidate");
    Ok(MetricResult {
        psnr_db: psnr_from_mse(m, T::one()),
        mse: m,
        resolved_transform: Some(transform),
    })
}

/// Exhaustive search over every shift, flip and rotation; the oracle for the
/// FFT-accelerated path and usable directly at small sizes.
pub fn psnr_ambiguity_resolved_exhaustive<T: Scalar>(
    estimate: &RealGrid<T>,
    truth: &RealGrid<T>,
) -> Result<MetricResult<T>> {
    if estimate.dims() != truth.dims() {
        return Err(Error::dimension("psnr_ambiguity_resolved", estimate.dims(), truth.dims()));
    }
    let (h, w) = estimate.dims();
    let mut best: Option<(T, ResolvedTransform)> = None;
    for flip in FLIPS {
        for rot in ROTATIONS {
            let candidate = apply_flip_rot(estimate, flip, rot);
            for dr in 0..h {
                for dc in 0..w {
                    let m = shift_mse_direct(&candidate, truth, (dr, dc));
                    let better = match &best {
                        None => true,
                        Some((cur, _)) => m < *cur,
                    };
                    if better {
                        best = Some((m, ResolvedTransform { shift: (dr, dc), flip, rotation: rot }));
                    }
                }
            }
        }
    }
    let (m, transform) = best.expect("at least one candidate");
    Ok(MetricResult {
        psnr_db: psnr_from_mse(m, T::one()),
        mse: m,
        resolved_transform: Some(transform),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(n: usize, seed: u64) -> RealGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealGrid::from_fn(n, n, |_, _| rng.gen())
    }

    #[test]
    fn identical_grids_hit_the_cap() {
        let a = random_grid(8, 1);
        let m = psnr(&a, &a, 1.0).unwrap();
        assert_eq!(m.mse, 0.0);
        assert!(m.psnr_db.is_infinite());
        assert_eq!(m.psnr_db_capped(), PSNR_CAP_DB);
    }

    #[test]
    fn constant_offset_gives_twenty_db() {
        let a = random_grid(8, 2);
        let b = a.map(|v| v + 0.1);
        let m = psnr(&a, &b, 1.0).unwrap();
        assert!((m.mse - 0.01).abs() < 1e-12);
        assert!((m.psnr_db - 20.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_and_shift_invariant_in_common_offset() {
        let a = random_grid(8, 3);
        let b = random_grid(8, 4);
        let ab = psnr(&a, &b, 1.0).unwrap();
        let ba = psnr(&b, &a, 1.0).unwrap();
        assert_eq!(ab.psnr_db, ba.psnr_db);
        let a2 = a.map(|v| v + 0.3);
        let b2 = b.map(|v| v + 0.3);
        let m2 = psnr(&a2, &b2, 1.0).unwrap();
        assert!((m2.mse - ab.mse).abs() < 1e-12);
    }

    #[test]
    fn resolves_pure_shift() {
        let truth = random_grid(8, 5);
        let estimate = truth.circular_shift(3, 5);
        let m = psnr_ambiguity_resolved(&estimate, &truth).unwrap();
        assert!(m.mse < 1e-24);
        assert_eq!(m.psnr_db_capped(), PSNR_CAP_DB);
        let t = m.resolved_transform.unwrap();
        // inverse shift is (-3, -5) mod 8 = (5, 3)
        assert_eq!(t.shift, (5, 3));
        assert_eq!(t.flip, Flip::None);
    }

    #[test]
    fn resolves_flip() {
        let truth = random_grid(8, 6);
        let estimate = truth.flip_horizontal();
        let m = psnr_ambiguity_resolved(&estimate, &truth).unwrap();
        assert!(m.mse < 1e-24);
        let t = m.resolved_transform.unwrap();
        assert!(matches!(t.flip, Flip::Horizontal) || matches!(t.rotation, Rotation::R180));
    }

    #[test]
    fn fft_search_matches_exhaustive_oracle() {
        for seed in 0..10 {
            let a = random_grid(8, 100 + seed);
            let b = random_grid(8, 200 + seed);
            let fast = psnr_ambiguity_resolved(&a, &b).unwrap();
            let slow = psnr_ambiguity_resolved_exhaustive(&a, &b).unwrap();
            assert!(
                (fast.mse - slow.mse).abs() < 1e-15,
                "mse mismatch: {} vs {}",
                fast.mse,
                slow.mse
            );
        }
    }

    #[test]
    fn resolved_never_below_plain() {
        for seed in 0..10 {
            let a = random_grid(8, 300 + seed);
            let b = random_grid(8, 400 + seed);
            let plain = psnr(&a, &b, 1.0).unwrap();
            let resolved = psnr_ambiguity_resolved(&a, &b).unwrap();
            assert!(resolved.psnr_db >= plain.psnr_db - 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = random_grid(8, 7);
        let b = random_grid(4, 8);
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(psnr_ambiguity_resolved(&a, &b).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }
}

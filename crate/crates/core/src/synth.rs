//! Deterministic synthetic toy datasets in [0, 1]: a sparse stroke class
//! (digit-like) and a smooth low-frequency class (texture-like). These stand
//! in for external image collections so the full pipeline runs without any
//! dataset downloads.

use crate::grid::RealGrid;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthClass {
    Digits,
    Textures,
}

impl std::fmt::Display for SynthClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SynthClass::Digits => write!(f, "digits"),
            SynthClass::Textures => write!(f, "textures"),
        }
    }
}

/// Generate `count` images of the given class and size, deterministically
/// from `seed`.
pub fn generate<T: Scalar>(class: SynthClass, n: usize, count: usize, seed: u64) -> Vec<RealGrid<T>> {
    (0..count)
        .map(|i| {
            let child = crate::seed::split_seed(seed, "synth", i as u64);
            match class {
                SynthClass::Digits => digit_like(n, child),
                SynthClass::Textures => texture_like(n, child),
            }
        })
        .collect()
}

/// Sparse bright strokes on a dark background: a few curved random walks
/// stamped with a small splat, then lightly blurred.
fn digit_like<T: Scalar>(n: usize, seed: u64) -> RealGrid<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = vec![0.0f64; n * n];
    let strokes = rng.gen_range(2..=4);
    let margin = (n as f64 / 6.0).max(1.0);

    for _ in 0..strokes {
        let mut r = margin + rng.gen::<f64>() * (n as f64 - 2.0 * margin);
        let mut c = margin + rng.gen::<f64>() * (n as f64 - 2.0 * margin);
        let mut theta = rng.gen::<f64>() * std::f64::consts::TAU;
        let len = rng.gen_range(n / 3..=(2 * n) / 3).max(2);
        let brightness = 0.7 + 0.3 * rng.gen::<f64>();

        for _ in 0..len {
            stamp(&mut img, n, r, c, brightness);
            let turn: f64 = rng.sample(StandardNormal);
            theta += 0.35 * turn;
            r += theta.sin();
            c += theta.cos();
            if r < 1.0 || c < 1.0 || r > n as f64 - 2.0 || c > n as f64 - 2.0 {
                break;
            }
        }
    }

    let blurred = blur3(&img, n);
    RealGrid::from_fn(n, n, |r, c| T::of_f64(blurred[r * n + c].clamp(0.0, 1.0)))
}

fn stamp(img: &mut [f64], n: usize, r: f64, c: f64, v: f64) {
    let ri = r.round() as isize;
    let ci = c.round() as isize;
    for dr in -1..=1isize {
        for dc in -1..=1isize {
            let rr = ri + dr;
            let cc = ci + dc;
            if rr >= 0 && cc >= 0 && (rr as usize) < n && (cc as usize) < n {
                let w = if dr == 0 && dc == 0 { 1.0 } else { 0.45 };
                let cell = &mut img[rr as usize * n + cc as usize];
                *cell = cell.max(v * w);
            }
        }
    }
}

fn blur3(img: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    let rr = r as isize + dr;
                    let cc = c as isize + dc;
                    if rr >= 0 && cc >= 0 && (rr as usize) < n && (cc as usize) < n {
                        let w = if dr == 0 && dc == 0 { 4.0 } else if dr == 0 || dc == 0 { 2.0 } else { 1.0 };
                        acc += w * img[rr as usize * n + cc as usize];
                        wsum += w;
                    }
                }
            }
            out[r * n + c] = acc / wsum;
        }
    }
    out
}

/// Smooth random field: a handful of low-frequency cosines, min-max
/// normalized into [0, 1].
fn texture_like<T: Scalar>(n: usize, seed: u64) -> RealGrid<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let kr = rng.gen_range(0..=3) as f64;
            let kc = rng.gen_range(0..=3) as f64;
            let phase = rng.gen::<f64>() * std::f64::consts::TAU;
            let amp = 0.5 + rng.gen::<f64>();
            (kr, kc, phase, amp)
        })
        .collect();

    let mut vals = vec![0.0f64; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut v = 0.0;
            for &(kr, kc, phase, amp) in &waves {
                let ang = std::f64::consts::TAU * (kr * r as f64 + kc * c as f64) / n as f64 + phase;
                v += amp * ang.cos();
            }
            vals[r * n + c] = v;
        }
    }
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    RealGrid::from_fn(n, n, |r, c| {
        if span > 0.0 {
            T::of_f64((vals[r * n + c] - min) / span)
        } else {
            T::of_f64(0.5)
        }
    })
}

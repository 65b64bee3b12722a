#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use otfs_link::channel::TapProfile;
use otfs_link::{DelayDopplerGrid, FrameConfig};

/// N_l = 8, N_ν = 4, L = 3 at 78.125 kHz spacing.
pub fn fig1_config() -> FrameConfig {
    FrameConfig::new(8, 4, 3, 2, 625e3).unwrap()
}

pub fn fig1_profile() -> TapProfile {
    TapProfile::new(vec![0, 1, 2], vec![-3.0, 0.0, -2.0])
        .unwrap()
        .normalized()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

pub fn random_grid(cfg: &FrameConfig, rng: &mut ChaCha8Rng) -> DelayDopplerGrid {
    DelayDopplerGrid {
        data: DMatrix::from_fn(cfg.n_doppler_bins, cfg.n_subcarriers, |_, _| {
            random_complex(rng)
        }),
    }
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn rel_frobenius(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

/// Composite Simpson rule on [a, b] with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Bessel J₀ from its integral form `(1/π) ∫_0^π cos(x sin θ) dθ`.
pub fn bessel_j0(x: f64) -> f64 {
    simpson(|t| (x * t.sin()).cos(), 0.0, PI, 2000) / PI
}

/// Gaussian tail via Craig's form `(1/π) ∫_0^{π/2} exp(-x²/(2 sin²θ)) dθ`.
pub fn q_function(x: f64) -> f64 {
    simpson(
        |t| {
            let s = t.sin();
            if s == 0.0 {
                0.0
            } else {
                (-x * x / (2.0 * s * s)).exp()
            }
        },
        0.0,
        PI / 2.0,
        4000,
    ) / PI
}

/// QPSK bit error probability on AWGN at per-symbol SNR `snr_db`.
pub fn qpsk_awgn_ber(snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    q_function((2.0 * snr / 2.0).sqrt())
}

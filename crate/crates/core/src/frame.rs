//! Frame geometry, symbol grids and the QPSK mapper.
//!
//! Grids vectorize column by column. A delay-Doppler grid has `N_ν` rows
//! (Doppler) and `N_l` columns (delay), so its vector is `N_l` consecutive
//! blocks of `N_ν` Doppler entries. A time-frequency grid has `N_l` rows
//! (subcarrier) and `N_ν` columns (OFDM symbol), one symbol per block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{OtfsError, Result};

/// Static frame geometry shared by every stage of the chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    /// Subcarriers per OFDM symbol (`N_l`), also the delay-bin count.
    pub n_subcarriers: usize,
    /// OFDM symbols per frame (`N_ν`), also the Doppler-bin count.
    pub n_doppler_bins: usize,
    /// Channel memory `L` in samples; taps sit at delays `0..L`.
    pub max_delay_taps: usize,
    /// Cyclic prefix per OFDM symbol, in samples.
    pub cp_len: usize,
    /// Sample rate in Hz.
    pub sample_rate: f64,
    /// Carrier frequency in Hz. Only used to convert speed to Doppler.
    #[serde(default = "default_carrier")]
    pub carrier_freq: f64,
}

fn default_carrier() -> f64 {
    5.8e9
}

impl FrameConfig {
    pub fn new(
        n_subcarriers: usize,
        n_doppler_bins: usize,
        max_delay_taps: usize,
        cp_len: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        let cfg = FrameConfig {
            n_subcarriers,
            n_doppler_bins,
            max_delay_taps,
            cp_len,
            sample_rate,
            carrier_freq: default_carrier(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers == 0 || self.n_doppler_bins == 0 {
            return Err(OtfsError::Config(format!(
                "frame must be non-empty, got {}x{}",
                self.n_subcarriers, self.n_doppler_bins
            )));
        }
        if self.max_delay_taps == 0 || self.max_delay_taps > self.n_subcarriers {
            return Err(OtfsError::Config(format!(
                "max_delay_taps must lie in 1..={}, got {}",
                self.n_subcarriers, self.max_delay_taps
            )));
        }
        if self.cp_len + 1 < self.max_delay_taps {
            return Err(OtfsError::Config(format!(
                "cp_len {} cannot absorb {} delay taps",
                self.cp_len, self.max_delay_taps
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(OtfsError::Config(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// `N_l · N_ν`, the number of symbols (and CP-free samples) per frame.
    pub fn frame_len(&self) -> usize {
        self.n_subcarriers * self.n_doppler_bins
    }

    pub fn symbol_len_with_cp(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    pub fn frame_len_with_cp(&self) -> usize {
        self.n_doppler_bins * self.symbol_len_with_cp()
    }

    pub fn subcarrier_spacing(&self) -> f64 {
        self.sample_rate / self.n_subcarriers as f64
    }

    /// Useful (CP-free) OFDM symbol duration in seconds.
    pub fn symbol_duration(&self) -> f64 {
        self.n_subcarriers as f64 / self.sample_rate
    }

    pub fn bits_per_frame(&self) -> usize {
        2 * self.frame_len()
    }

    /// Maximum Doppler shift for a terminal moving at `speed_mps`.
    pub fn doppler_for_speed(&self, speed_mps: f64) -> f64 {
        speed_mps * self.carrier_freq / 299_792_458.0
    }
}

/// Column-major vectorization: entry `(r, c)` lands at `c * rows + r`.
pub fn vectorize(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.as_slice().to_vec()
}

pub fn devectorize(rows: usize, cols: usize, v: &[Complex64]) -> Result<DMatrix<Complex64>> {
    if v.len() != rows * cols {
        return Err(OtfsError::dim("devectorize", rows * cols, v.len()));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v))
}

/// Delay-Doppler symbols `x(ν, l)`: `N_ν` rows by `N_l` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayDopplerGrid {
    pub data: DMatrix<Complex64>,
}

impl DelayDopplerGrid {
    pub fn zeros(cfg: &FrameConfig) -> Self {
        DelayDopplerGrid {
            data: DMatrix::zeros(cfg.n_doppler_bins, cfg.n_subcarriers),
        }
    }

    pub fn from_matrix(cfg: &FrameConfig, data: DMatrix<Complex64>) -> Result<Self> {
        check_shape(
            "delay-Doppler grid",
            &data,
            cfg.n_doppler_bins,
            cfg.n_subcarriers,
        )?;
        Ok(DelayDopplerGrid { data })
    }

    pub fn devectorize(cfg: &FrameConfig, v: &[Complex64]) -> Result<Self> {
        Ok(DelayDopplerGrid {
            data: devectorize(cfg.n_doppler_bins, cfg.n_subcarriers, v)?,
        })
    }

    pub fn vectorize(&self) -> Vec<Complex64> {
        vectorize(&self.data)
    }

    pub fn n_doppler(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_delay(&self) -> usize {
        self.data.ncols()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub(crate) fn check(&self, cfg: &FrameConfig) -> Result<()> {
        check_shape(
            "delay-Doppler grid",
            &self.data,
            cfg.n_doppler_bins,
            cfg.n_subcarriers,
        )
    }
}

/// Time-frequency symbols `x(k, n)`: `N_l` rows by `N_ν` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrequencyGrid {
    pub data: DMatrix<Complex64>,
}

impl TimeFrequencyGrid {
    pub fn zeros(cfg: &FrameConfig) -> Self {
        TimeFrequencyGrid {
            data: DMatrix::zeros(cfg.n_subcarriers, cfg.n_doppler_bins),
        }
    }

    pub fn from_matrix(cfg: &FrameConfig, data: DMatrix<Complex64>) -> Result<Self> {
        check_shape(
            "time-frequency grid",
            &data,
            cfg.n_subcarriers,
            cfg.n_doppler_bins,
        )?;
        Ok(TimeFrequencyGrid { data })
    }

    pub fn devectorize(cfg: &FrameConfig, v: &[Complex64]) -> Result<Self> {
        Ok(TimeFrequencyGrid {
            data: devectorize(cfg.n_subcarriers, cfg.n_doppler_bins, v)?,
        })
    }

    pub fn vectorize(&self) -> Vec<Complex64> {
        vectorize(&self.data)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub(crate) fn check(&self, cfg: &FrameConfig) -> Result<()> {
        check_shape(
            "time-frequency grid",
            &self.data,
            cfg.n_subcarriers,
            cfg.n_doppler_bins,
        )
    }
}

fn check_shape(what: &'static str, m: &DMatrix<Complex64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows {
        return Err(OtfsError::dim(what, rows, m.nrows()));
    }
    if m.ncols() != cols {
        return Err(OtfsError::dim(what, cols, m.ncols()));
    }
    Ok(())
}

/// Sequential time samples of one frame, with or without cyclic prefixes.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSignal {
    pub data: Vec<Complex64>,
    pub has_cp: bool,
}

impl TimeSignal {
    pub fn new(cfg: &FrameConfig, data: Vec<Complex64>, has_cp: bool) -> Result<Self> {
        let expected = if has_cp {
            cfg.frame_len_with_cp()
        } else {
            cfg.frame_len()
        };
        if data.len() != expected {
            return Err(OtfsError::dim("time signal", expected, data.len()));
        }
        Ok(TimeSignal { data, has_cp })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Hard bits, one `u8` (0 or 1) per bit. Always an even count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if !bits.len().is_multiple_of(2) {
            return Err(OtfsError::dim(
                "bit stream (must be even)",
                bits.len() + 1,
                bits.len(),
            ));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(OtfsError::Config("bit values must be 0 or 1".into()));
        }
        Ok(BitStream { bits })
    }

    pub fn random<R: Rng + ?Sized>(n_bits: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n_bits).map(|_| rng.random_range(0..2u8)).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of positions where the two streams differ.
    pub fn count_errors(&self, other: &BitStream) -> Result<u64> {
        if self.len() != other.len() {
            return Err(OtfsError::dim("bit comparison", self.len(), other.len()));
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count() as u64)
    }
}

/// Gray-coded unit-energy QPSK: `(b0, b1) -> ((1-2b0) + j(1-2b1)) / √2`.
pub fn qpsk_symbols(bits: &BitStream) -> Vec<Complex64> {
    bits.bits
        .chunks_exact(2)
        .map(|p| {
            Complex64::new(
                (1.0 - 2.0 * p[0] as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * p[1] as f64) * FRAC_1_SQRT_2,
            )
        })
        .collect()
}

/// Map one frame of bits onto the delay-Doppler grid in vectorization order.
pub fn qpsk_map(cfg: &FrameConfig, bits: &BitStream) -> Result<DelayDopplerGrid> {
    if bits.len() != cfg.bits_per_frame() {
        return Err(OtfsError::dim(
            "qpsk_map bits",
            cfg.bits_per_frame(),
            bits.len(),
        ));
    }
    DelayDopplerGrid::devectorize(cfg, &qpsk_symbols(bits))
}

/// Quadrant decisions. Returns the hard bits and the nearest constellation
/// points. A coordinate of exactly zero counts as positive.
pub fn qpsk_slice(symbols: &[Complex64]) -> (BitStream, Vec<Complex64>) {
    let mut bits = Vec::with_capacity(2 * symbols.len());
    let mut points = Vec::with_capacity(symbols.len());
    for z in symbols {
        let b0 = u8::from(z.re < 0.0);
        let b1 = u8::from(z.im < 0.0);
        bits.push(b0);
        bits.push(b1);
        points.push(Complex64::new(
            (1.0 - 2.0 * b0 as f64) * FRAC_1_SQRT_2,
            (1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2,
        ));
    }
    (BitStream { bits }, points)
}

//! Deterministic linear transforms of the OTFS chain.
//!
//! Every DFT here is unitary (scaled by `1/√N`), so each operator below is
//! unitary or a permutation and the pipeline identities hold exactly rather
//! than up to scale.
//!
//! Three vector layouts appear:
//!
//! * delay-Doppler: index `l·N_ν + ν` (column-major [`DelayDopplerGrid`]);
//! * interleaved: index `l·N_ν + n` for time samples and `k·N_ν + n` for
//!   subcarriers, i.e. the `N_l` samples of OFDM symbol `n` sit at stride
//!   `N_ν`. The extended FFT `F̄ = F_{N_l} ⊗ I_{N_ν}` acts in this layout;
//! * sequential: index `n·N_l + l`, the order samples go on air.
//!
//! The reorder permutation `Ξ` maps interleaved to sequential.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{OtfsError, Result};
use crate::frame::{DelayDopplerGrid, FrameConfig, TimeFrequencyGrid, TimeSignal};

/// Forward and inverse plans of one size with unitary scaling.
#[derive(Clone)]
pub struct UnitaryFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl UnitaryFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        UnitaryFft {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Transforms `buf` in place; its length must be a multiple of the size.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        if inverse {
            self.inverse.process(buf);
        } else {
            self.forward.process(buf);
        }
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }
}

/// Dense unitary DFT matrix, entry `(k, l) = e^{-j2πkl/N} / √N`.
#[derive(Clone, Debug, PartialEq)]
pub struct DftMatrix {
    pub size: usize,
    pub data: DMatrix<Complex64>,
}

impl DftMatrix {
    pub fn new(size: usize) -> Self {
        let s = 1.0 / (size as f64).sqrt();
        let data = DMatrix::from_fn(size, size, |k, l| {
            // reduce the exponent first so large sizes keep full precision
            let e = ((k * l) % size) as f64;
            Complex64::from_polar(s, -2.0 * PI * e / size as f64)
        });
        DftMatrix { size, data }
    }

    pub fn adjoint(&self) -> DMatrix<Complex64> {
        self.data.adjoint()
    }
}

/// The permutation `Ξ`: `(Ξ x)[i] = x[π(i)]` with
/// `π(i) = ⌊i / N_l⌋ + (i mod N_l)·N_ν`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReorderMatrix {
    perm: Vec<usize>,
}

impl ReorderMatrix {
    pub fn new(cfg: &FrameConfig) -> Self {
        let (nl, nv) = (cfg.n_subcarriers, cfg.n_doppler_bins);
        ReorderMatrix {
            perm: (0..nl * nv).map(|i| i / nl + (i % nl) * nv).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// `Ξ x`: interleaved to sequential.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(x)?;
        Ok(self.perm.iter().map(|&j| x[j]).collect())
    }

    /// `Ξ^T y`: sequential to interleaved.
    pub fn apply_transpose(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(y)?;
        let mut out = vec![Complex64::default(); y.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            out[j] = y[i];
        }
        Ok(out)
    }

    pub fn dense(&self) -> DMatrix<Complex64> {
        let n = self.perm.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &j) in self.perm.iter().enumerate() {
            m[(i, j)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    fn check(&self, x: &[Complex64]) -> Result<()> {
        if x.len() != self.perm.len() {
            return Err(OtfsError::dim("reorder", self.perm.len(), x.len()));
        }
        Ok(())
    }
}

pub fn reorder_indices(cfg: &FrameConfig) -> ReorderMatrix {
    ReorderMatrix::new(cfg)
}

/// The extended FFT `F̄`: an `N_l`-point DFT on each of the `N_ν` strided
/// sub-sequences of an interleaved vector.
#[derive(Clone)]
pub struct ExtendedFft {
    n_subcarriers: usize,
    n_doppler_bins: usize,
    fft: UnitaryFft,
}

impl ExtendedFft {
    pub fn new(cfg: &FrameConfig) -> Self {
        ExtendedFft {
            n_subcarriers: cfg.n_subcarriers,
            n_doppler_bins: cfg.n_doppler_bins,
            fft: UnitaryFft::new(cfg.n_subcarriers),
        }
    }

    pub fn apply(&self, x: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
        let (nl, nv) = (self.n_subcarriers, self.n_doppler_bins);
        if x.len() != nl * nv {
            return Err(OtfsError::dim("extended FFT", nl * nv, x.len()));
        }
        let mut out = vec![Complex64::default(); x.len()];
        let mut buf = vec![Complex64::default(); nl];
        for n in 0..nv {
            for (l, b) in buf.iter_mut().enumerate() {
                *b = x[l * nv + n];
            }
            self.fft.process(&mut buf, inverse);
            for (k, b) in buf.iter().enumerate() {
                out[k * nv + n] = *b;
            }
        }
        Ok(out)
    }

    /// Dense `F_{N_l} ⊗ I_{N_ν}`.
    pub fn dense(&self) -> DMatrix<Complex64> {
        DftMatrix::new(self.n_subcarriers)
            .data
            .kronecker(&DMatrix::<Complex64>::identity(
                self.n_doppler_bins,
                self.n_doppler_bins,
            ))
    }
}

pub fn extended_fft_apply(
    x: &[Complex64],
    cfg: &FrameConfig,
    inverse: bool,
) -> Result<Vec<Complex64>> {
    ExtendedFft::new(cfg).apply(x, inverse)
}

/// `(I_{N_l} ⊗ F_{N_ν})` (or its adjoint when `inverse`) on a delay-Doppler
/// ordered vector: a DFT over each contiguous block of `N_ν` entries.
pub fn doppler_blocks_apply(
    x: &[Complex64],
    cfg: &FrameConfig,
    inverse: bool,
) -> Result<Vec<Complex64>> {
    if x.len() != cfg.frame_len() {
        return Err(OtfsError::dim(
            "Doppler block DFT",
            cfg.frame_len(),
            x.len(),
        ));
    }
    let mut out = x.to_vec();
    let fft = UnitaryFft::new(cfg.n_doppler_bins);
    fft.process(&mut out, inverse);
    Ok(out)
}

fn fft_columns(m: &mut DMatrix<Complex64>, inverse: bool) {
    let fft = UnitaryFft::new(m.nrows());
    fft.process(m.as_mut_slice(), inverse);
}

/// `X_kn = F_{N_l} (F^H_{N_ν} X_νl)^T`.
pub fn dsft_forward(x_dd: &DelayDopplerGrid, cfg: &FrameConfig) -> Result<TimeFrequencyGrid> {
    x_dd.check(cfg)?;
    let mut m = x_dd.data.clone();
    fft_columns(&mut m, true);
    let mut t = m.transpose();
    fft_columns(&mut t, false);
    Ok(TimeFrequencyGrid { data: t })
}

/// `X_νl = F_{N_ν} (F^H_{N_l} X_kn)^T`, the exact inverse of [`dsft_forward`].
pub fn dsft_inverse(y_tf: &TimeFrequencyGrid, cfg: &FrameConfig) -> Result<DelayDopplerGrid> {
    y_tf.check(cfg)?;
    let mut m = y_tf.data.clone();
    fft_columns(&mut m, true);
    let mut t = m.transpose();
    fft_columns(&mut t, false);
    Ok(DelayDopplerGrid { data: t })
}

/// Time-frequency grid from an interleaved (`k·N_ν + n`) vector.
pub fn tf_grid_from_interleaved(cfg: &FrameConfig, v: &[Complex64]) -> Result<TimeFrequencyGrid> {
    if v.len() != cfg.frame_len() {
        return Err(OtfsError::dim(
            "interleaved vector",
            cfg.frame_len(),
            v.len(),
        ));
    }
    let nv = cfg.n_doppler_bins;
    Ok(TimeFrequencyGrid {
        data: DMatrix::from_fn(cfg.n_subcarriers, nv, |k, n| v[k * nv + n]),
    })
}

pub fn tf_grid_to_interleaved(
    grid: &TimeFrequencyGrid,
    cfg: &FrameConfig,
) -> Result<Vec<Complex64>> {
    grid.check(cfg)?;
    // row-major of the N_l x N_ν grid
    Ok(grid.data.transpose().as_slice().to_vec())
}

/// Prefix each `N_l`-sample OFDM symbol with its last `cp_len` samples.
pub fn cp_add(x: &TimeSignal, cfg: &FrameConfig) -> Result<TimeSignal> {
    if x.has_cp || x.len() != cfg.frame_len() {
        return Err(OtfsError::dim("cp_add input", cfg.frame_len(), x.len()));
    }
    let (nl, cp) = (cfg.n_subcarriers, cfg.cp_len);
    let mut out = Vec::with_capacity(cfg.frame_len_with_cp());
    for sym in x.data.chunks_exact(nl) {
        out.extend_from_slice(&sym[nl - cp..]);
        out.extend_from_slice(sym);
    }
    Ok(TimeSignal {
        data: out,
        has_cp: true,
    })
}

pub fn cp_remove(y: &TimeSignal, cfg: &FrameConfig) -> Result<TimeSignal> {
    if !y.has_cp || y.len() != cfg.frame_len_with_cp() {
        return Err(OtfsError::dim(
            "cp_remove input",
            cfg.frame_len_with_cp(),
            y.len(),
        ));
    }
    let cp = cfg.cp_len;
    let data = y
        .data
        .chunks_exact(cfg.symbol_len_with_cp())
        .flat_map(|sym| sym[cp..].iter().copied())
        .collect();
    Ok(TimeSignal {
        data,
        has_cp: false,
    })
}

fn strip_cp(y: &TimeSignal, cfg: &FrameConfig) -> Result<Vec<Complex64>> {
    if y.has_cp {
        Ok(cp_remove(y, cfg)?.data)
    } else if y.len() == cfg.frame_len() {
        Ok(y.data.clone())
    } else {
        Err(OtfsError::dim("time signal", cfg.frame_len(), y.len()))
    }
}

/// Full transmit chain: `x_kn = F̄ (I ⊗ F^H) x_νl`, `x_t = F̄^H x_kn`,
/// `x̃_t = Ξ x_t`, then per-symbol cyclic prefix.
pub fn otfs_modulate(x_dd: &DelayDopplerGrid, cfg: &FrameConfig) -> Result<TimeSignal> {
    x_dd.check(cfg)?;
    let fbar = ExtendedFft::new(cfg);
    let spread = doppler_blocks_apply(&x_dd.vectorize(), cfg, true)?;
    let x_kn = fbar.apply(&spread, false)?;
    let x_t = fbar.apply(&x_kn, true)?;
    let seq = ReorderMatrix::new(cfg).apply(&x_t)?;
    cp_add(
        &TimeSignal {
            data: seq,
            has_cp: false,
        },
        cfg,
    )
}

/// Simplified transmitter `x̃_t = Ξ (I ⊗ F^H) x_νl`: the extended FFT pair
/// cancels, leaving one IFFT per delay bin and a permutation.
pub fn otfs_modulate_fast(x_dd: &DelayDopplerGrid, cfg: &FrameConfig) -> Result<TimeSignal> {
    x_dd.check(cfg)?;
    let spread = doppler_blocks_apply(&x_dd.vectorize(), cfg, true)?;
    let seq = ReorderMatrix::new(cfg).apply(&spread)?;
    cp_add(
        &TimeSignal {
            data: seq,
            has_cp: false,
        },
        cfg,
    )
}

/// `y_kn = F̄ Ξ^T y_t`, as a grid. Strips the CP first when present.
pub fn tf_stage(y: &TimeSignal, cfg: &FrameConfig) -> Result<TimeFrequencyGrid> {
    let seq = strip_cp(y, cfg)?;
    let inter = ReorderMatrix::new(cfg).apply_transpose(&seq)?;
    let y_kn = ExtendedFft::new(cfg).apply(&inter, false)?;
    tf_grid_from_interleaved(cfg, &y_kn)
}

/// Full receive chain: `y_νl = (I ⊗ F) F̄^H F̄ Ξ^T y_t`.
pub fn otfs_demodulate(y: &TimeSignal, cfg: &FrameConfig) -> Result<DelayDopplerGrid> {
    let seq = strip_cp(y, cfg)?;
    let fbar = ExtendedFft::new(cfg);
    let inter = ReorderMatrix::new(cfg).apply_transpose(&seq)?;
    let y_kn = fbar.apply(&inter, false)?;
    let back = fbar.apply(&y_kn, true)?;
    DelayDopplerGrid::devectorize(cfg, &doppler_blocks_apply(&back, cfg, false)?)
}

/// Simplified receiver `y_νl = (I ⊗ F) Ξ^T y_t`.
pub fn otfs_demodulate_fast(y: &TimeSignal, cfg: &FrameConfig) -> Result<DelayDopplerGrid> {
    let seq = strip_cp(y, cfg)?;
    let inter = ReorderMatrix::new(cfg).apply_transpose(&seq)?;
    DelayDopplerGrid::devectorize(cfg, &doppler_blocks_apply(&inter, cfg, false)?)
}

/// Plain OFDM transmitter: per-symbol IFFT of the time-frequency grid, with
/// CP. No symplectic spreading.
pub fn ofdm_modulate(x_tf: &TimeFrequencyGrid, cfg: &FrameConfig) -> Result<TimeSignal> {
    x_tf.check(cfg)?;
    let mut m = x_tf.data.clone();
    fft_columns(&mut m, true);
    cp_add(
        &TimeSignal {
            data: m.as_slice().to_vec(),
            has_cp: false,
        },
        cfg,
    )
}

/// Dense forms of the four bracketed operator products around `H_tl` in the
/// full equivalent-channel expression `P_1 P_0 H_tl Q_0 Q_1`.
#[derive(Clone, Debug)]
pub struct ComposedOperators {
    /// `(I ⊗ F_{N_ν}) F̄^H`
    pub p1: DMatrix<Complex64>,
    /// `F̄ Ξ^T`
    pub p0: DMatrix<Complex64>,
    /// `Ξ F̄^H`
    pub q0: DMatrix<Complex64>,
    /// `F̄ (I ⊗ F^H_{N_ν})`
    pub q1: DMatrix<Complex64>,
}

impl ComposedOperators {
    pub fn new(cfg: &FrameConfig) -> Self {
        let fbar = ExtendedFft::new(cfg).dense();
        let xi = ReorderMatrix::new(cfg).dense();
        let doppler = doppler_kron(cfg);
        ComposedOperators {
            p1: &doppler * fbar.adjoint(),
            p0: &fbar * xi.transpose(),
            q0: &xi * fbar.adjoint(),
            q1: &fbar * doppler.adjoint(),
        }
    }
}

/// Dense `I_{N_l} ⊗ F_{N_ν}`.
pub fn doppler_kron(cfg: &FrameConfig) -> DMatrix<Complex64> {
    DMatrix::<Complex64>::identity(cfg.n_subcarriers, cfg.n_subcarriers)
        .kronecker(&DftMatrix::new(cfg.n_doppler_bins).data)
}

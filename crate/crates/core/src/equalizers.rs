//! Two-stage OTFS receiver and its baselines.
//!
//! Stage one is a single-tap equalizer per time-frequency bin (FDE). Stage
//! two works in the delay-Doppler domain (DDE): a matched filter through
//! `H_eq` minus the interference rebuilt from the sliced stage-one output,
//! `x̂ = H_eq^H y_νl − R̄_HH ⌈ỹ_νl⌋`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::frame::TimeSignal;
use crate::frame::{qpsk_slice, BitStream, DelayDopplerGrid, FrameConfig, TimeFrequencyGrid};
use crate::linalg;
use crate::transforms::{dsft_inverse, otfs_demodulate_fast, DftMatrix};

/// Denominator of the single-tap coefficient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdeMode {
    /// `G = H* / (|H| + γ)`.
    Paper,
    /// `G = H* / (|H|² + γ)`.
    #[default]
    Mmse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdeCoefficients {
    /// `N_l x N_ν` taps, one per subcarrier and OFDM symbol.
    pub g: DMatrix<Complex64>,
    pub gamma_fd: f64,
    pub mode: FdeMode,
}

/// Single-tap coefficients from the CFR. Where the denominator vanishes
/// (`H = 0`, `γ = 0`) the coefficient is zero.
pub fn fde_build(cfr: &DMatrix<Complex64>, gamma_fd: f64, mode: FdeMode) -> FdeCoefficients {
    let g = cfr.map(|h| {
        let denom = match mode {
            FdeMode::Paper => h.norm() + gamma_fd,
            FdeMode::Mmse => h.norm_sqr() + gamma_fd,
        };
        if denom == 0.0 {
            Complex64::default()
        } else {
            h.conj() / denom
        }
    });
    FdeCoefficients { g, gamma_fd, mode }
}

pub fn fde_apply(y_tf: &TimeFrequencyGrid, coeffs: &FdeCoefficients) -> Result<TimeFrequencyGrid> {
    if y_tf.data.shape() != coeffs.g.shape() {
        return Err(OtfsError::dim("fde_apply", coeffs.g.len(), y_tf.data.len()));
    }
    Ok(TimeFrequencyGrid {
        data: y_tf.data.component_mul(&coeffs.g),
    })
}

/// Take the equalized time-frequency grid back to delay-Doppler.
pub fn fde_to_dd(y_tf: &TimeFrequencyGrid, cfg: &FrameConfig) -> Result<DelayDopplerGrid> {
    dsft_inverse(y_tf, cfg)
}

/// The clipped, zero-diagonal Gram matrix `R̄_HH` used for cancellation.
#[derive(Clone, Debug, PartialEq)]
pub struct CancellationMatrix {
    pub r_bar: DMatrix<Complex64>,
    pub clip_threshold: f64,
    /// `Re R_HH(m, m)`, the matched-filter gain of each symbol.
    pub gram_diag: Vec<f64>,
}

/// Entries of `R_HH` at or below this fraction of its largest magnitude are
/// treated as exact zeros.
pub const NUMERICAL_ZERO: f64 = 1e-12;

/// `R_HH = H_eq^H H_eq`; drop its diagonal and every entry below
/// `clip_threshold` times the largest off-diagonal magnitude.
pub fn dde_build(
    h_eq: &DMatrix<Complex64>,
    cfg: &FrameConfig,
    clip_threshold: f64,
) -> Result<CancellationMatrix> {
    if !(0.0..=1.0).contains(&clip_threshold) {
        return Err(OtfsError::Config(format!(
            "clip_threshold must lie in [0, 1], got {clip_threshold}"
        )));
    }
    let n = h_eq.nrows();
    if h_eq.ncols() != n {
        return Err(OtfsError::dim("dde_build (square)", n, h_eq.ncols()));
    }
    let bs = cfg.n_doppler_bins;
    let r = if bs > 0 && n.is_multiple_of(bs) {
        linalg::block_gram(h_eq, bs)
    } else {
        h_eq.ad_mul(h_eq)
    };
    let gram_diag = (0..n).map(|m| r[(m, m)].re).collect();
    // round-off level: a unitary H_eq must give R̄ = 0, not R̄ ≈ 1e-16
    let zero_floor = NUMERICAL_ZERO * r.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let max_off = (0..n)
        .flat_map(|c| (0..n).filter(move |&i| i != c).map(move |i| (i, c)))
        .map(|(i, c)| r[(i, c)].norm())
        .filter(|&m| m > zero_floor)
        .fold(0.0f64, f64::max);
    let clip = clip_threshold * max_off;
    let mut r_bar = r;
    for c in 0..n {
        for i in 0..n {
            let m = r_bar[(i, c)].norm();
            if i == c || m <= zero_floor || m < clip {
                r_bar[(i, c)] = Complex64::default();
            }
        }
    }
    Ok(CancellationMatrix {
        r_bar,
        clip_threshold,
        gram_diag,
    })
}

/// One cancellation pass: `H_eq^H y_dd − R̄ ⌈y_fde_dd⌋`, optionally divided
/// entrywise by `Re R_HH(m, m)`. The scaling never changes QPSK decisions.
pub fn dde_equalize(
    y_dd: &DelayDopplerGrid,
    y_fde_dd: &DelayDopplerGrid,
    h_eq: &DMatrix<Complex64>,
    cancel: &CancellationMatrix,
    normalize: bool,
) -> Result<DelayDopplerGrid> {
    let (_, decisions) = qpsk_slice(y_fde_dd.data.as_slice());
    cancel_with_decisions(y_dd, &decisions, h_eq, cancel, normalize)
}

/// [`dde_equalize`] with explicit constellation decisions in place of the
/// sliced stage-one output.
pub fn cancel_with_decisions(
    y_dd: &DelayDopplerGrid,
    decisions: &[Complex64],
    h_eq: &DMatrix<Complex64>,
    cancel: &CancellationMatrix,
    normalize: bool,
) -> Result<DelayDopplerGrid> {
    let n = h_eq.nrows();
    if y_dd.data.len() != n {
        return Err(OtfsError::dim("dde observation", n, y_dd.data.len()));
    }
    if decisions.len() != n {
        return Err(OtfsError::dim("dde decisions", n, decisions.len()));
    }
    if cancel.r_bar.shape() != h_eq.shape() {
        return Err(OtfsError::dim(
            "dde cancellation matrix",
            n,
            cancel.r_bar.nrows(),
        ));
    }
    let y = DVector::from_column_slice(y_dd.data.as_slice());
    let s = DVector::from_column_slice(decisions);
    let mut x = h_eq.ad_mul(&y) - &cancel.r_bar * s;
    if normalize {
        for (v, &d) in x.iter_mut().zip(&cancel.gram_diag) {
            if d > 0.0 {
                *v /= d;
            }
        }
    }
    Ok(DelayDopplerGrid {
        data: DMatrix::from_column_slice(y_dd.n_doppler(), y_dd.n_delay(), x.as_slice()),
    })
}

/// Repeat the cancellation `iterations` times, re-slicing the previous
/// output each round. One iteration is exactly [`dde_equalize`].
pub fn dde_iterate(
    y_dd: &DelayDopplerGrid,
    y_fde_dd: &DelayDopplerGrid,
    h_eq: &DMatrix<Complex64>,
    cancel: &CancellationMatrix,
    normalize: bool,
    iterations: usize,
) -> Result<DelayDopplerGrid> {
    let mut est = dde_equalize(y_dd, y_fde_dd, h_eq, cancel, normalize)?;
    for _ in 1..iterations {
        est = dde_equalize(y_dd, &est, h_eq, cancel, normalize)?;
    }
    Ok(est)
}

/// OFDM baseline: one MMSE tap per bin, then hard decisions in grid
/// vectorization order.
pub fn ofdm_single_tap(
    y_tf: &TimeFrequencyGrid,
    cfr: &DMatrix<Complex64>,
    noise_var: f64,
) -> Result<BitStream> {
    let coeffs = fde_build(cfr, noise_var, FdeMode::Mmse);
    let eq = fde_apply(y_tf, &coeffs)?;
    Ok(qpsk_slice(eq.data.as_slice()).0)
}

/// `x̂ = (H^H H + σ² I)^{-1} H^H y`.
pub fn full_mmse(
    h: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    noise_var: f64,
) -> Result<DVector<Complex64>> {
    if h.nrows() != h.ncols() {
        return Err(OtfsError::dim("full_mmse (square)", h.nrows(), h.ncols()));
    }
    if y.len() != h.nrows() {
        return Err(OtfsError::dim("full_mmse observation", h.nrows(), y.len()));
    }
    let gram = h.ad_mul(h);
    solve_regularized(gram, &h.ad_mul(y), noise_var)
}

fn solve_regularized(
    mut gram: DMatrix<Complex64>,
    rhs: &DVector<Complex64>,
    noise_var: f64,
) -> Result<DVector<Complex64>> {
    if noise_var.is_nan() || noise_var < 0.0 {
        return Err(OtfsError::Config(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    for i in 0..gram.nrows() {
        gram[(i, i)] += noise_var;
    }
    linalg::hermitian_solve(&gram, rhs).map_err(|e| match e {
        OtfsError::Singular(_) => OtfsError::Singular("full_mmse"),
        other => other,
    })
}

/// Whole-frame MMSE on `H_eq`.
///
/// `H_eq = U H_tl U^H` with unitary `U = (I ⊗ F) Ξ^T`, so the estimate
/// equals `U` applied to the time-domain MMSE estimate. Solving there lets
/// the per-symbol block structure of `H_tl^H H_tl` decouple the system.
pub fn otfs_full_mmse(
    h_tl: &DMatrix<Complex64>,
    y_t: &[Complex64],
    cfg: &FrameConfig,
    noise_var: f64,
) -> Result<DelayDopplerGrid> {
    let n = cfg.frame_len();
    if h_tl.nrows() != n || h_tl.ncols() != n {
        return Err(OtfsError::dim("H_tl", n, h_tl.nrows()));
    }
    if y_t.len() != n {
        return Err(OtfsError::dim("otfs_full_mmse observation", n, y_t.len()));
    }
    let gram = linalg::block_gram(h_tl, cfg.n_subcarriers);
    let rhs = h_tl.ad_mul(&DVector::from_column_slice(y_t));
    let x_t = solve_regularized(gram, &rhs, noise_var)?;
    otfs_demodulate_fast(
        &TimeSignal {
            data: x_t.as_slice().to_vec(),
            has_cp: false,
        },
        cfg,
    )
}

/// OFDM baseline: per-symbol MMSE with the full `N_l x N_l` frequency-domain
/// matrix `F H_tl(n) F^H`, which keeps the inter-carrier terms.
pub fn ofdm_full_mmse(
    y_tf: &TimeFrequencyGrid,
    h_tl: &DMatrix<Complex64>,
    cfg: &FrameConfig,
    noise_var: f64,
) -> Result<BitStream> {
    y_tf.check(cfg)?;
    let nl = cfg.n_subcarriers;
    if h_tl.nrows() != cfg.frame_len() || h_tl.ncols() != cfg.frame_len() {
        return Err(OtfsError::dim("H_tl", cfg.frame_len(), h_tl.nrows()));
    }
    let f = DftMatrix::new(nl);
    let f_h = f.adjoint();
    let mut est = DMatrix::zeros(nl, cfg.n_doppler_bins);
    for n in 0..cfg.n_doppler_bins {
        let block = h_tl.view((n * nl, n * nl), (nl, nl));
        let h_f = &f.data * block * &f_h;
        let y = DVector::from_iterator(nl, y_tf.data.column(n).iter().copied());
        est.set_column(n, &full_mmse(&h_f, &y, noise_var)?);
    }
    Ok(qpsk_slice(est.as_slice()).0)
}

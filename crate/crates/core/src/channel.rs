//! Time-varying multipath channels and their delay-Doppler equivalent.
//!
//! Fading taps come from a sum-of-sinusoids Clarke generator. The
//! time-domain channel matrix `H_tl` acts on the CP-free sequential frame;
//! the equivalent channel is `H_eq = (I ⊗ F) Ξ^T H_tl Ξ (I ⊗ F^H)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{OtfsError, Result};
use crate::frame::{FrameConfig, TimeSignal};
use crate::linalg;
use crate::seed::mix_seed;
use crate::transforms::{ComposedOperators, DftMatrix, ReorderMatrix, UnitaryFft};

/// Sinusoids per fading tap.
pub const SINUSOIDS_PER_TAP: usize = 32;

/// Power-delay profile in physical units, as stored in JSON files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapProfileSpec {
    pub delays_us: Vec<f64>,
    pub powers_db: Vec<f64>,
}

impl TapProfileSpec {
    /// COST 207 Typical Urban, six taps, 5 μs spread.
    pub fn cost207_tu6() -> Self {
        TapProfileSpec {
            delays_us: vec![0.0, 0.2, 0.5, 1.6, 2.3, 5.0],
            powers_db: vec![-3.0, 0.0, -2.0, -6.0, -8.0, -10.0],
        }
    }

    /// TU6 powers on a compressed delay axis, for short CP-limited frames at
    /// 5 MHz: taps at 0, 1, 2, 4, 5 and 7 samples.
    pub fn tu6_scaled() -> Self {
        TapProfileSpec {
            delays_us: vec![0.0, 0.2, 0.4, 0.8, 1.0, 1.4],
            powers_db: vec![-3.0, 0.0, -2.0, -6.0, -8.0, -10.0],
        }
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| OtfsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| OtfsError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Round delays to the nearest sample and normalize.
    pub fn to_samples(&self, sample_rate: f64) -> Result<TapProfile> {
        if self.delays_us.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(OtfsError::Config(
                "tap delays must be finite and >= 0".into(),
            ));
        }
        let delays = self
            .delays_us
            .iter()
            .map(|d| (d * 1e-6 * sample_rate).round() as usize)
            .collect();
        Ok(TapProfile::new(delays, self.powers_db.clone())?.normalized())
    }
}

/// Power-delay profile on the sample grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TapProfile {
    pub delays: Vec<usize>,
    pub powers_db: Vec<f64>,
    pub normalized: bool,
}

impl TapProfile {
    /// Taps sharing a delay are merged by adding their linear powers.
    pub fn new(delays: Vec<usize>, powers_db: Vec<f64>) -> Result<Self> {
        if delays.len() != powers_db.len() {
            return Err(OtfsError::Config(format!(
                "profile has {} delays but {} powers",
                delays.len(),
                powers_db.len()
            )));
        }
        if delays.is_empty() {
            return Err(OtfsError::Config("profile has no taps".into()));
        }
        if powers_db.iter().any(|p| !p.is_finite()) {
            return Err(OtfsError::Config("tap powers must be finite".into()));
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (&d, &p) in delays.iter().zip(&powers_db) {
            let lin = 10f64.powf(p / 10.0);
            match merged.iter_mut().find(|(md, _)| *md == d) {
                Some(slot) => slot.1 += lin,
                None => merged.push((d, lin)),
            }
        }
        merged.sort_by_key(|(d, _)| *d);
        Ok(TapProfile {
            delays: merged.iter().map(|(d, _)| *d).collect(),
            powers_db: merged.iter().map(|(_, p)| 10.0 * p.log10()).collect(),
            normalized: false,
        })
    }

    /// A single unit-power tap at delay zero.
    pub fn flat() -> Self {
        TapProfile {
            delays: vec![0],
            powers_db: vec![0.0],
            normalized: true,
        }
    }

    pub fn linear_powers(&self) -> Vec<f64> {
        self.powers_db
            .iter()
            .map(|p| 10f64.powf(p / 10.0))
            .collect()
    }

    /// Rescale so the linear powers sum to one.
    pub fn normalized(&self) -> Self {
        let total: f64 = self.linear_powers().iter().sum();
        let shift = 10.0 * total.log10();
        TapProfile {
            delays: self.delays.clone(),
            powers_db: self.powers_db.iter().map(|p| p - shift).collect(),
            normalized: true,
        }
    }

    pub fn max_delay(&self) -> usize {
        self.delays.iter().copied().max().unwrap_or(0)
    }

    pub fn check(&self, cfg: &FrameConfig) -> Result<()> {
        if self.max_delay() >= cfg.max_delay_taps {
            return Err(OtfsError::Config(format!(
                "profile delay {} exceeds channel memory of {} taps",
                self.max_delay(),
                cfg.max_delay_taps
            )));
        }
        Ok(())
    }
}

/// Per-tap complex gains over the whole CP-extended frame.
///
/// Column `t` is physical sample `t` of the transmitted frame including
/// every cyclic prefix; row `d` is the tap at delay `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeVaryingCir {
    pub gains: DMatrix<Complex64>,
    pub doppler_hz: f64,
    pub rng_seed: u64,
    n_subcarriers: usize,
    cp_len: usize,
}

impl TimeVaryingCir {
    /// Build from explicit gains, `L` rows by `N_ν(N_l + cp)` columns.
    pub fn from_gains(cfg: &FrameConfig, gains: DMatrix<Complex64>) -> Result<Self> {
        if gains.nrows() != cfg.max_delay_taps {
            return Err(OtfsError::dim(
                "CIR taps",
                cfg.max_delay_taps,
                gains.nrows(),
            ));
        }
        if gains.ncols() != cfg.frame_len_with_cp() {
            return Err(OtfsError::dim(
                "CIR samples",
                cfg.frame_len_with_cp(),
                gains.ncols(),
            ));
        }
        Ok(TimeVaryingCir {
            gains,
            doppler_hz: 0.0,
            rng_seed: 0,
            n_subcarriers: cfg.n_subcarriers,
            cp_len: cfg.cp_len,
        })
    }

    /// Time-invariant taps; `taps[d]` is the gain at delay `d`.
    pub fn static_taps(cfg: &FrameConfig, taps: &[Complex64]) -> Result<Self> {
        if taps.len() > cfg.max_delay_taps {
            return Err(OtfsError::dim(
                "static taps",
                cfg.max_delay_taps,
                taps.len(),
            ));
        }
        let gains = DMatrix::from_fn(cfg.max_delay_taps, cfg.frame_len_with_cp(), |d, _| {
            taps.get(d).copied().unwrap_or_default()
        });
        Self::from_gains(cfg, gains)
    }

    pub fn n_taps(&self) -> usize {
        self.gains.nrows()
    }

    /// Column of the extended timeline holding CP-free sample `i`.
    pub fn body_column(&self, i: usize) -> usize {
        let n = i / self.n_subcarriers;
        n * (self.n_subcarriers + self.cp_len) + self.cp_len + i % self.n_subcarriers
    }

    /// Gain of tap `d` seen by CP-free output sample `i`.
    pub fn body_gain(&self, d: usize, i: usize) -> Complex64 {
        self.gains[(d, self.body_column(i))]
    }
}

/// Draw one Clarke-model realization of every tap in `profile`.
///
/// Each tap is `√(p/M) Σ_m exp(j(2π f_d cos(α_m) t + φ_m))` with `M = 32`
/// independent uniform arrival angles and phases, so the ensemble
/// autocorrelation is `p·J₀(2π f_d τ)`.
pub fn generate_cir(
    profile: &TapProfile,
    doppler_hz: f64,
    cfg: &FrameConfig,
    seed: u64,
) -> Result<TimeVaryingCir> {
    if !(doppler_hz.is_finite() && doppler_hz >= 0.0) {
        return Err(OtfsError::Config(format!(
            "Doppler must be finite and >= 0, got {doppler_hz}"
        )));
    }
    profile.check(cfg)?;
    let norm_doppler = doppler_hz * cfg.symbol_duration();
    if norm_doppler >= 0.5 {
        log::warn!(
            "normalized Doppler {norm_doppler:.3} >= 0.5 subcarrier spacings; \
             the per-symbol channel model is questionable here"
        );
    }
    let n_time = cfg.frame_len_with_cp();
    let mut gains = DMatrix::zeros(cfg.max_delay_taps, n_time);
    let dt = 1.0 / cfg.sample_rate;
    for (tap, (&d, p)) in profile
        .delays
        .iter()
        .zip(profile.linear_powers())
        .enumerate()
    {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, tap as u64]));
        let amp = (p / SINUSOIDS_PER_TAP as f64).sqrt();
        let rays: Vec<(f64, f64)> = (0..SINUSOIDS_PER_TAP)
            .map(|_| {
                let alpha = rng.random::<f64>() * 2.0 * PI;
                let phi = rng.random::<f64>() * 2.0 * PI;
                (2.0 * PI * doppler_hz * alpha.cos() * dt, phi)
            })
            .collect();
        for t in 0..n_time {
            let tf = t as f64;
            let h: Complex64 = rays
                .iter()
                .map(|&(w, phi)| Complex64::from_polar(amp, w * tf + phi))
                .sum();
            gains[(d, t)] += h;
        }
    }
    Ok(TimeVaryingCir {
        gains,
        doppler_hz,
        rng_seed: seed,
        n_subcarriers: cfg.n_subcarriers,
        cp_len: cfg.cp_len,
    })
}

/// Non-fading taps: tap `d` is the constant `√p_d`. With a single 0 dB tap
/// this is the pure AWGN channel.
pub fn static_cir(profile: &TapProfile, cfg: &FrameConfig) -> Result<TimeVaryingCir> {
    profile.check(cfg)?;
    let mut taps = vec![Complex64::default(); cfg.max_delay_taps];
    for (&d, p) in profile.delays.iter().zip(profile.linear_powers()) {
        taps[d] += Complex64::new(p.sqrt(), 0.0);
    }
    TimeVaryingCir::static_taps(cfg, &taps)
}

/// How the CP-free frame is circularized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Circularization {
    /// Each OFDM symbol wraps onto itself: what CP insertion and removal
    /// actually produce.
    #[default]
    PerSymbol,
    /// The whole `N_l N_ν` frame wraps, `j < 0 -> j + N_l N_ν`.
    Frame,
}

/// `H_tl` with the default per-symbol circularization.
pub fn build_time_channel_matrix(
    cir: &TimeVaryingCir,
    cfg: &FrameConfig,
) -> Result<DMatrix<Complex64>> {
    build_time_channel_matrix_with(cir, cfg, Circularization::PerSymbol)
}

/// `H_tl(i, j) = h_d(i)` where `j` is `i - d` wrapped per symbol or per
/// frame.
pub fn build_time_channel_matrix_with(
    cir: &TimeVaryingCir,
    cfg: &FrameConfig,
    mode: Circularization,
) -> Result<DMatrix<Complex64>> {
    if cir.n_taps() != cfg.max_delay_taps || cir.gains.ncols() != cfg.frame_len_with_cp() {
        return Err(OtfsError::dim(
            "CIR samples",
            cfg.frame_len_with_cp(),
            cir.gains.ncols(),
        ));
    }
    let n = cfg.frame_len();
    let nl = cfg.n_subcarriers;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for d in 0..cfg.max_delay_taps {
            let j = match mode {
                Circularization::PerSymbol => (i / nl) * nl + (i % nl + nl - d) % nl,
                Circularization::Frame => (i + n - d) % n,
            };
            h[(i, j)] += cir.body_gain(d, i);
        }
    }
    Ok(h)
}

/// `σ²` for unit-energy symbols; `+∞` dB gives a noiseless link.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Circular complex Gaussian samples with variance `var`.
pub fn awgn<R: Rng + ?Sized>(len: usize, var: f64, rng: &mut R) -> Vec<Complex64> {
    let s = (var / 2.0).sqrt();
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(s * re, s * im)
        })
        .collect()
}

/// Physical path: sample-by-sample time-varying linear convolution of the
/// CP-extended frame, then AWGN at `snr_db` against unit signal energy.
pub fn apply_channel(
    x: &TimeSignal,
    cir: &TimeVaryingCir,
    snr_db: f64,
    seed: u64,
) -> Result<TimeSignal> {
    if !x.has_cp {
        return Err(OtfsError::Config(
            "apply_channel expects a CP-extended signal".into(),
        ));
    }
    if x.len() != cir.gains.ncols() {
        return Err(OtfsError::dim("apply_channel", cir.gains.ncols(), x.len()));
    }
    let mut y: Vec<Complex64> = (0..x.len())
        .map(|t| {
            (0..cir.n_taps().min(t + 1))
                .map(|d| cir.gains[(d, t)] * x.data[t - d])
                .sum()
        })
        .collect();
    let var = noise_variance(snr_db);
    if var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (s, n) in y.iter_mut().zip(awgn(x.len(), var, &mut rng)) {
            *s += n;
        }
    }
    Ok(TimeSignal {
        data: y,
        has_cp: true,
    })
}

/// Matrix path: `y_t = H_tl x̃_t + n` on the CP-free frame.
pub fn apply_matrix_channel(
    h_tl: &DMatrix<Complex64>,
    x: &[Complex64],
    noise: &[Complex64],
) -> Result<Vec<Complex64>> {
    if x.len() != h_tl.ncols() {
        return Err(OtfsError::dim(
            "apply_matrix_channel",
            h_tl.ncols(),
            x.len(),
        ));
    }
    if noise.len() != h_tl.nrows() {
        return Err(OtfsError::dim("noise vector", h_tl.nrows(), noise.len()));
    }
    let y = h_tl * DVector::from_column_slice(x);
    Ok(y.iter().zip(noise).map(|(a, b)| a + b).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EquivalentMode {
    /// Dense composition `P_1 P_0 H_tl Q_0 Q_1` of the full chain.
    Full,
    /// `(I ⊗ F) Ξ^T H_tl Ξ (I ⊗ F^H)`, evaluated block by block.
    Simplified,
}

pub fn build_equivalent_channel(
    h_tl: &DMatrix<Complex64>,
    cfg: &FrameConfig,
    mode: EquivalentMode,
) -> Result<DMatrix<Complex64>> {
    let n = cfg.frame_len();
    if h_tl.nrows() != n || h_tl.ncols() != n {
        return Err(OtfsError::dim("H_tl", n, h_tl.nrows().max(h_tl.ncols())));
    }
    Ok(match mode {
        EquivalentMode::Full => {
            let ops = ComposedOperators::new(cfg);
            &ops.p1 * &ops.p0 * h_tl * &ops.q0 * &ops.q1
        }
        EquivalentMode::Simplified => {
            let perm = ReorderMatrix::new(cfg);
            let dd = linalg::permute_congruence(h_tl, perm.indices());
            linalg::block_conjugate(
                &dd,
                cfg.n_doppler_bins,
                &DftMatrix::new(cfg.n_doppler_bins).data,
            )
        }
    })
}

/// Channel frequency response `H_0(k, n)`: the diagonal of
/// `F H_tl(n) F^H` for each `N_l x N_l` diagonal block of `H_tl`.
pub fn extract_cfr(h_tl: &DMatrix<Complex64>, cfg: &FrameConfig) -> Result<DMatrix<Complex64>> {
    let (nl, nv) = (cfg.n_subcarriers, cfg.n_doppler_bins);
    if h_tl.nrows() != nl * nv || h_tl.ncols() != nl * nv {
        return Err(OtfsError::dim(
            "H_tl",
            nl * nv,
            h_tl.nrows().max(h_tl.ncols()),
        ));
    }
    let fft = UnitaryFft::new(nl);
    let scale = 1.0 / (nl as f64).sqrt();
    let mut cfr = DMatrix::zeros(nl, nv);
    let mut diag_sums = vec![Complex64::default(); nl];
    for n in 0..nv {
        let base = n * nl;
        // diag(F B F^H)_k = (1/N) Σ_d e^{-j2πkd/N} Σ_l B(l, l-d mod N)
        for (d, s) in diag_sums.iter_mut().enumerate() {
            *s = (0..nl)
                .map(|l| h_tl[(base + l, base + (l + nl - d) % nl)])
                .sum();
        }
        fft.process(&mut diag_sums, false);
        for k in 0..nl {
            cfr[(k, n)] = diag_sums[k] * scale;
        }
    }
    Ok(cfr)
}

/// Where the significant entries of `H_eq` sit relative to the delay band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandSupport {
    /// `N_ν` times the shortest cyclic run of delay-block offsets holding
    /// every entry above the tolerance.
    pub band_width: usize,
    /// Largest magnitude at a delay-block offset outside `0..=L`, the
    /// `N_ν(L + 1)` band.
    pub max_out_of_band: f64,
}

pub fn claimed_band(cfg: &FrameConfig) -> usize {
    cfg.n_doppler_bins * (cfg.max_delay_taps + 1)
}

pub fn band_support(h_eq: &DMatrix<Complex64>, cfg: &FrameConfig, tol: f64) -> BandSupport {
    let (nl, nv) = (cfg.n_subcarriers, cfg.n_doppler_bins);
    let mut present = vec![false; nl];
    let mut max_out = 0.0f64;
    for c in 0..h_eq.ncols() {
        for r in 0..h_eq.nrows() {
            let mag = h_eq[(r, c)].norm();
            let offset = (r / nv + nl - c / nv) % nl;
            if mag > tol {
                present[offset] = true;
            }
            if offset > cfg.max_delay_taps {
                max_out = max_out.max(mag);
            }
        }
    }
    let offsets: Vec<usize> = (0..nl).filter(|&o| present[o]).collect();
    let arc = match offsets.len() {
        0 => 0,
        m => {
            let largest_gap = (0..m)
                .map(|i| {
                    let next = if i + 1 < m {
                        offsets[i + 1]
                    } else {
                        offsets[0] + nl
                    };
                    next - offsets[i]
                })
                .max()
                .unwrap_or(nl);
            nl - largest_gap + 1
        }
    };
    BandSupport {
        band_width: nv * arc,
        max_out_of_band: max_out,
    }
}

/// `H_tl`, `H_eq` and the noise variance of one realization.
#[derive(Clone, Debug)]
pub struct ChannelMatrices {
    pub h_tl: DMatrix<Complex64>,
    pub h_eq: DMatrix<Complex64>,
    pub noise_var: f64,
}

impl ChannelMatrices {
    pub fn new(cir: &TimeVaryingCir, cfg: &FrameConfig, noise_var: f64) -> Result<Self> {
        let h_tl = build_time_channel_matrix(cir, cfg)?;
        let h_eq = build_equivalent_channel(&h_tl, cfg, EquivalentMode::Simplified)?;
        Ok(ChannelMatrices {
            h_tl,
            h_eq,
            noise_var,
        })
    }
}

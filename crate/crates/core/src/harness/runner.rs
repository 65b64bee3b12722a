use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BerRecord, EqualizerKind, ExperimentConfig};
use crate::channel::{
    apply_matrix_channel, awgn, build_equivalent_channel, build_time_channel_matrix_with,
    extract_cfr, generate_cir, noise_variance, static_cir, EquivalentMode, TimeVaryingCir,
};
use crate::equalizers::{
    dde_build, dde_iterate, fde_apply, fde_build, fde_to_dd, ofdm_full_mmse, ofdm_single_tap,
    otfs_full_mmse,
};
use crate::error::Result;
use crate::frame::{qpsk_map, qpsk_slice, qpsk_symbols, BitStream, TimeFrequencyGrid, TimeSignal};
use crate::seed::mix_seed;
use crate::transforms::{
    cp_remove, ofdm_modulate, otfs_demodulate_fast, otfs_modulate_fast, tf_stage,
};

/// One (SNR, Doppler) cell of a sweep, with its indices for seeding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub snr_index: usize,
    pub doppler_index: usize,
    pub snr_db: f64,
    pub doppler_hz: f64,
}

impl SweepPoint {
    pub fn new(snr_db: f64, doppler_hz: f64) -> Self {
        SweepPoint {
            snr_index: 0,
            doppler_index: 0,
            snr_db,
            doppler_hz,
        }
    }
}

/// Bit errors of each configured equalizer on one shared frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bits: u64,
    pub errors: Vec<(EqualizerKind, u64)>,
}

impl TrialOutcome {
    pub fn errors_for(&self, kind: EqualizerKind) -> Option<u64> {
        self.errors
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, e)| *e)
    }
}

fn realize_channel(cfg: &ExperimentConfig, doppler_hz: f64, seed: u64) -> Result<TimeVaryingCir> {
    let profile = cfg.tap_profile()?;
    if cfg.fading {
        generate_cir(&profile, doppler_hz, &cfg.frame, seed)
    } else {
        static_cir(&profile, &cfg.frame)
    }
}

pub fn trial_seed(base_seed: u64, point: &SweepPoint, trial_index: u64) -> u64 {
    mix_seed(&[
        base_seed,
        point.snr_index as u64,
        point.doppler_index as u64,
        trial_index,
    ])
}

/// Run one frame through the channel and every configured equalizer.
///
/// All equalizers see the same bits, channel realization and noise vector.
/// OTFS and OFDM transmit different waveforms of the same bits.
pub fn run_trial(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    trial_index: u64,
) -> Result<TrialOutcome> {
    let frame = &cfg.frame;
    let seed = trial_seed(cfg.base_seed, point, trial_index);
    let bits = BitStream::random(
        frame.bits_per_frame(),
        &mut ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0])),
    )?;
    let cir = realize_channel(cfg, point.doppler_hz, mix_seed(&[seed, 1]))?;
    let h_tl = build_time_channel_matrix_with(&cir, frame, cfg.circularization)?;
    let noise_var = noise_variance(point.snr_db);
    let noise = if noise_var > 0.0 {
        awgn(
            frame.frame_len(),
            noise_var,
            &mut ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 2])),
        )
    } else {
        vec![Complex64::default(); frame.frame_len()]
    };
    let cfr = extract_cfr(&h_tl, frame)?;

    let x_dd = qpsk_map(frame, &bits)?;
    let x_otfs = cp_remove(&otfs_modulate_fast(&x_dd, frame)?, frame)?;
    let y_otfs = TimeSignal {
        data: apply_matrix_channel(&h_tl, &x_otfs.data, &noise)?,
        has_cp: false,
    };

    let mut ofdm_rx: Option<TimeFrequencyGrid> = None;
    let mut h_eq: Option<DMatrix<Complex64>> = None;
    let mut errors = Vec::with_capacity(cfg.equalizers.len());
    for &kind in &cfg.equalizers {
        let decided = match kind {
            EqualizerKind::OfdmSingleTap | EqualizerKind::OfdmFullMmse => {
                if ofdm_rx.is_none() {
                    let x_tf = TimeFrequencyGrid::devectorize(frame, &qpsk_symbols(&bits))?;
                    let x_t = cp_remove(&ofdm_modulate(&x_tf, frame)?, frame)?;
                    let y = TimeSignal {
                        data: apply_matrix_channel(&h_tl, &x_t.data, &noise)?,
                        has_cp: false,
                    };
                    ofdm_rx = Some(tf_stage(&y, frame)?);
                }
                let y_tf = ofdm_rx.as_ref().expect("set above");
                if kind == EqualizerKind::OfdmSingleTap {
                    ofdm_single_tap(y_tf, &cfr, noise_var)?
                } else {
                    ofdm_full_mmse(y_tf, &h_tl, frame, noise_var)?
                }
            }
            EqualizerKind::OtfsFde | EqualizerKind::OtfsFdeDde => {
                let gamma = cfg.gamma_fd.unwrap_or(noise_var);
                let coeffs = fde_build(&cfr, gamma, cfg.fde_mode);
                let fde_dd = fde_to_dd(&fde_apply(&tf_stage(&y_otfs, frame)?, &coeffs)?, frame)?;
                if kind == EqualizerKind::OtfsFde {
                    qpsk_slice(fde_dd.data.as_slice()).0
                } else {
                    if h_eq.is_none() {
                        h_eq = Some(build_equivalent_channel(
                            &h_tl,
                            frame,
                            EquivalentMode::Simplified,
                        )?);
                    }
                    let h_eq = h_eq.as_ref().expect("set above");
                    let cancel = dde_build(h_eq, frame, cfg.clip_threshold)?;
                    let y_dd = otfs_demodulate_fast(&y_otfs, frame)?;
                    let est = dde_iterate(
                        &y_dd,
                        &fde_dd,
                        h_eq,
                        &cancel,
                        cfg.dde_normalize,
                        cfg.dde_iterations,
                    )?;
                    qpsk_slice(est.data.as_slice()).0
                }
            }
            EqualizerKind::OtfsFullMmse => {
                let est = otfs_full_mmse(&h_tl, &y_otfs.data, frame, noise_var)?;
                qpsk_slice(est.data.as_slice()).0
            }
        };
        errors.push((kind, bits.count_errors(&decided)?));
    }
    Ok(TrialOutcome {
        bits: bits.len() as u64,
        errors,
    })
}

/// Every (SNR, Doppler) pair times `n_trials`, aggregated per equalizer and
/// sorted by (equalizer, SNR, Doppler). Counts are summed, so the result
/// does not depend on how rayon schedules the trials.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let mut records = Vec::new();
    for (si, &snr_db) in cfg.snr_db_list.iter().enumerate() {
        for (di, &doppler_hz) in cfg.doppler_hz_list.iter().enumerate() {
            let point = SweepPoint {
                snr_index: si,
                doppler_index: di,
                snr_db,
                doppler_hz,
            };
            let outcomes: Vec<TrialOutcome> = (0..cfg.n_trials as u64)
                .into_par_iter()
                .map(|t| run_trial(cfg, &point, t))
                .collect::<Result<_>>()?;
            for &kind in &cfg.equalizers {
                let bit_errors = outcomes
                    .iter()
                    .map(|o| o.errors_for(kind).unwrap_or(0))
                    .sum();
                let bits = outcomes.iter().map(|o| o.bits).sum();
                records.push(BerRecord::new(
                    kind,
                    snr_db,
                    doppler_hz,
                    outcomes.len() as u64,
                    bits,
                    bit_errors,
                    cfg.base_seed,
                ));
            }
        }
    }
    records.sort_by(|a, b| {
        a.equalizer
            .cmp(&b.equalizer)
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.doppler_hz.total_cmp(&b.doppler_hz))
    });
    Ok(records)
}

/// One channel realization's `H_eq` for the configured frame and profile.
pub fn inspect_channel(
    cfg: &ExperimentConfig,
    doppler_hz: f64,
    seed: u64,
) -> Result<DMatrix<Complex64>> {
    let cir = realize_channel(cfg, doppler_hz, seed)?;
    let h_tl = build_time_channel_matrix_with(&cir, &cfg.frame, cfg.circularization)?;
    build_equivalent_channel(&h_tl, &cfg.frame, EquivalentMode::Simplified)
}

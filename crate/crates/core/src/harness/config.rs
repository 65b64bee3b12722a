use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::{Circularization, TapProfile, TapProfileSpec};
use crate::equalizers::FdeMode;
use crate::error::{OtfsError, Result};
use crate::frame::FrameConfig;

/// Receivers a sweep can compare. Declaration order is the CSV sort order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualizerKind {
    OfdmSingleTap,
    OfdmFullMmse,
    OtfsFde,
    OtfsFdeDde,
    OtfsFullMmse,
}

impl EqualizerKind {
    pub const ALL: [EqualizerKind; 5] = [
        EqualizerKind::OfdmSingleTap,
        EqualizerKind::OfdmFullMmse,
        EqualizerKind::OtfsFde,
        EqualizerKind::OtfsFdeDde,
        EqualizerKind::OtfsFullMmse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EqualizerKind::OfdmSingleTap => "ofdm_single_tap",
            EqualizerKind::OfdmFullMmse => "ofdm_full_mmse",
            EqualizerKind::OtfsFde => "otfs_fde",
            EqualizerKind::OtfsFdeDde => "otfs_fde_dde",
            EqualizerKind::OtfsFullMmse => "otfs_full_mmse",
        }
    }
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EqualizerKind {
    type Err = OtfsError;

    fn from_str(s: &str) -> Result<Self> {
        EqualizerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| OtfsError::Config(format!("unknown equalizer '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 64 x 16 frame at 5 MHz with a compressed TU6 profile.
    Desk,
    /// 512 x 16 frame at 40 MHz with the full TU6 profile.
    Table2,
}

impl FromStr for Preset {
    type Err = OtfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "table2" => Ok(Preset::Table2),
            other => Err(OtfsError::Config(format!("unknown preset '{other}'"))),
        }
    }
}

fn default_clip() -> f64 {
    0.02
}

fn default_iterations() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Everything one sweep needs. Loaded from JSON; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub frame: FrameConfig,
    pub profile: TapProfileSpec,
    pub snr_db_list: Vec<f64>,
    pub doppler_hz_list: Vec<f64>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub equalizers: Vec<EqualizerKind>,
    #[serde(default)]
    pub fde_mode: FdeMode,
    /// FDE regularizer; the noise variance when absent.
    #[serde(default)]
    pub gamma_fd: Option<f64>,
    #[serde(default = "default_clip")]
    pub clip_threshold: f64,
    #[serde(default = "default_iterations")]
    pub dde_iterations: usize,
    /// Divide DDE outputs by the matched-filter gain before slicing.
    #[serde(default = "default_true")]
    pub dde_normalize: bool,
    #[serde(default)]
    pub circularization: Circularization,
    /// Clarke fading when true; constant `√p` taps when false.
    #[serde(default = "default_true")]
    pub fading: bool,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => ExperimentConfig {
                frame: FrameConfig {
                    n_subcarriers: 64,
                    n_doppler_bins: 16,
                    max_delay_taps: 8,
                    cp_len: 8,
                    sample_rate: 5e6,
                    carrier_freq: 5.8e9,
                },
                profile: TapProfileSpec::tu6_scaled(),
                snr_db_list: vec![0.0, 5.0, 10.0, 15.0, 20.0],
                doppler_hz_list: vec![0.0, 1000.0, 3000.0, 6000.0],
                n_trials: 100,
                base_seed: 1,
                equalizers: EqualizerKind::ALL.to_vec(),
                fde_mode: FdeMode::default(),
                gamma_fd: None,
                clip_threshold: default_clip(),
                dde_iterations: 1,
                dde_normalize: true,
                circularization: Circularization::default(),
                fading: true,
            },
            Preset::Table2 => ExperimentConfig {
                frame: FrameConfig {
                    n_subcarriers: 512,
                    n_doppler_bins: 16,
                    max_delay_taps: 201,
                    cp_len: 256,
                    sample_rate: 40e6,
                    carrier_freq: 5.8e9,
                },
                profile: TapProfileSpec::cost207_tu6(),
                snr_db_list: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
                doppler_hz_list: vec![6000.0],
                n_trials: 5000,
                ..Self::preset(Preset::Desk)
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| OtfsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|source| OtfsError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tap_profile(&self) -> Result<TapProfile> {
        self.profile.to_samples(self.frame.sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.tap_profile()?.check(&self.frame)?;
        let bad = |m: &str| Err(OtfsError::Config(m.to_string()));
        if self.snr_db_list.is_empty() || self.doppler_hz_list.is_empty() {
            return bad("snr_db_list and doppler_hz_list must be non-empty");
        }
        if self
            .snr_db_list
            .iter()
            .any(|s| s.is_nan() || *s == f64::NEG_INFINITY)
        {
            return bad("snr_db_list entries must be numbers");
        }
        if self
            .doppler_hz_list
            .iter()
            .any(|d| !d.is_finite() || *d < 0.0)
        {
            return bad("doppler_hz_list entries must be finite and >= 0");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1");
        }
        if self.equalizers.is_empty() {
            return bad("at least one equalizer is required");
        }
        let mut seen = self.equalizers.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.equalizers.len() {
            return bad("equalizers must not repeat");
        }
        if !(0.0..=1.0).contains(&self.clip_threshold) {
            return bad("clip_threshold must lie in [0, 1]");
        }
        if self.dde_iterations == 0 {
            return bad("dde_iterations must be >= 1");
        }
        if let Some(g) = self.gamma_fd {
            if !(g.is_finite() && g >= 0.0) {
                return bad("gamma_fd must be finite and >= 0");
            }
        }
        Ok(())
    }
}

//! C ABI over `otfs-link`.
//!
//! Every fallible call returns an [`OtfsStatus`]; on failure the message is
//! kept per thread and read back with [`otfs_last_error_message`]. Frames and
//! channel realizations are opaque handles owned by the caller and released
//! with their `_free` function. Sample buffers are arrays of [`OtfsComplex`]
//! with an explicit length; delay-Doppler grids use the column-major
//! vectorization (index `l * n_doppler_bins + nu`).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use otfs_link::channel::{
    apply_channel, generate_cir, ChannelMatrices, TapProfile, TimeVaryingCir,
};
use otfs_link::frame::{qpsk_map, qpsk_slice};
use otfs_link::harness::{run_sweep, write_csv, ExperimentConfig};
use otfs_link::transforms::{otfs_demodulate_fast, otfs_modulate_fast};
use otfs_link::{BitStream, DelayDopplerGrid, FrameConfig, OtfsError, TimeSignal};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OtfsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Layout-compatible with `double _Complex` and `std::complex<double>`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OtfsComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for OtfsComplex {
    fn from(z: Complex64) -> Self {
        OtfsComplex { re: z.re, im: z.im }
    }
}

impl From<OtfsComplex> for Complex64 {
    fn from(z: OtfsComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Frame geometry.
pub struct OtfsFrame {
    cfg: FrameConfig,
}

/// One channel realization together with its frame.
pub struct OtfsChannel {
    cfg: FrameConfig,
    cir: TimeVaryingCir,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(OtfsStatus, String);

impl From<OtfsError> for Failure {
    fn from(e: OtfsError) -> Self {
        let status = match e {
            OtfsError::Dimension { .. } => OtfsStatus::DimensionMismatch,
            OtfsError::Config(_) | OtfsError::Json { .. } => OtfsStatus::InvalidArgument,
            OtfsError::Singular(_) => OtfsStatus::Numerical,
            OtfsError::Io { .. } | OtfsError::Csv(_) => OtfsStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

/// Run `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OtfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OtfsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside otfs-link".into());
            OtfsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(OtfsStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(
    p: *mut T,
    len: usize,
    expected: usize,
    what: &str,
) -> Result<&'a mut [T], Failure> {
    if len != expected {
        return Err(Failure(
            OtfsStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {len}"),
        ));
    }
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn to_complex(v: &[OtfsComplex]) -> Vec<Complex64> {
    v.iter().map(|&z| z.into()).collect()
}

fn write_complex(dst: &mut [OtfsComplex], src: &[Complex64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s.into();
    }
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn otfs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Create a frame. `*out` receives a handle to release with
/// [`otfs_frame_free`].
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn otfs_frame_new(
    n_subcarriers: usize,
    n_doppler_bins: usize,
    max_delay_taps: usize,
    cp_len: usize,
    sample_rate: f64,
    out: *mut *mut OtfsFrame,
) -> OtfsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = FrameConfig::new(
            n_subcarriers,
            n_doppler_bins,
            max_delay_taps,
            cp_len,
            sample_rate,
        )?;
        *out = Box::into_raw(Box::new(OtfsFrame { cfg }));
        Ok(())
    })
}

/// # Safety
/// `frame` must be NULL or a handle from [`otfs_frame_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_frame_free(frame: *mut OtfsFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Symbols per frame, `N_l * N_nu`; 0 for a NULL handle.
///
/// # Safety
/// `frame` must be NULL or a live frame handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_frame_len(frame: *const OtfsFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.cfg.frame_len())
}

/// Transmitted samples per frame including every cyclic prefix.
///
/// # Safety
/// `frame` must be NULL or a live frame handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_frame_len_with_cp(frame: *const OtfsFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.cfg.frame_len_with_cp())
}

/// QPSK bits carried by one frame.
///
/// # Safety
/// `frame` must be NULL or a live frame handle.
#[no_mangle]
pub unsafe extern "C" fn otfs_frame_bits(frame: *const OtfsFrame) -> usize {
    frame.as_ref().map_or(0, |f| f.cfg.bits_per_frame())
}

/// Gray-mapped unit-energy QPSK: `bits` (0/1 bytes, `otfs_frame_bits` of
/// them) to `otfs_frame_len` delay-Doppler symbols.
///
/// # Safety
/// Pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otfs_qpsk_map(
    frame: *const OtfsFrame,
    bits: *const u8,
    n_bits: usize,
    symbols: *mut OtfsComplex,
    n_symbols: usize,
) -> OtfsStatus {
    guard(|| {
        let cfg = &handle(frame, "frame")?.cfg;
        let bits = BitStream::new(slice_in(bits, n_bits, "bits")?.to_vec())?;
        let out = slice_out(symbols, n_symbols, cfg.frame_len(), "symbols")?;
        write_complex(out, &qpsk_map(cfg, &bits)?.vectorize());
        Ok(())
    })
}

/// Hard QPSK decisions: `n_symbols` symbols to `2 * n_symbols` bits.
///
/// # Safety
/// Pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otfs_qpsk_slice(
    symbols: *const OtfsComplex,
    n_symbols: usize,
    bits: *mut u8,
    n_bits: usize,
) -> OtfsStatus {
    guard(|| {
        let sym = to_complex(slice_in(symbols, n_symbols, "symbols")?);
        let out = slice_out(bits, n_bits, 2 * n_symbols, "bits")?;
        out.copy_from_slice(qpsk_slice(&sym).0.bits());
        Ok(())
    })
}

/// Delay-Doppler grid to the CP-extended time signal.
///
/// # Safety
/// Pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otfs_modulate(
    frame: *const OtfsFrame,
    dd: *const OtfsComplex,
    n_dd: usize,
    tx: *mut OtfsComplex,
    n_tx: usize,
) -> OtfsStatus {
    guard(|| {
        let cfg = &handle(frame, "frame")?.cfg;
        let grid = DelayDopplerGrid::devectorize(cfg, &to_complex(slice_in(dd, n_dd, "dd")?))?;
        let out = slice_out(tx, n_tx, cfg.frame_len_with_cp(), "tx")?;
        write_complex(out, &otfs_modulate_fast(&grid, cfg)?.data);
        Ok(())
    })
}

/// CP-extended received signal to the delay-Doppler grid.
///
/// # Safety
/// Pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otfs_demodulate(
    frame: *const OtfsFrame,
    rx: *const OtfsComplex,
    n_rx: usize,
    dd: *mut OtfsComplex,
    n_dd: usize,
) -> OtfsStatus {
    guard(|| {
        let cfg = &handle(frame, "frame")?.cfg;
        let signal = TimeSignal::new(cfg, to_complex(slice_in(rx, n_rx, "rx")?), true)?;
        let out = slice_out(dd, n_dd, cfg.frame_len(), "dd")?;
        write_complex(out, &otfs_demodulate_fast(&signal, cfg)?.vectorize());
        Ok(())
    })
}

/// Draw a fading channel: taps at sample delays `delays` with powers
/// `powers_db` (normalized to unit total), maximum Doppler `doppler_hz`.
///
/// # Safety
/// `delays` and `powers_db` must hold `n_taps` values; `out` must be valid
/// for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_generate(
    frame: *const OtfsFrame,
    delays: *const usize,
    powers_db: *const f64,
    n_taps: usize,
    doppler_hz: f64,
    seed: u64,
    out: *mut *mut OtfsChannel,
) -> OtfsStatus {
    guard(|| {
        let cfg = handle(frame, "frame")?.cfg.clone();
        if out.is_null() {
            return Err(null("out"));
        }
        let profile = TapProfile::new(
            slice_in(delays, n_taps, "delays")?.to_vec(),
            slice_in(powers_db, n_taps, "powers_db")?.to_vec(),
        )?
        .normalized();
        let cir = generate_cir(&profile, doppler_hz, &cfg, seed)?;
        *out = Box::into_raw(Box::new(OtfsChannel { cfg, cir }));
        Ok(())
    })
}

/// # Safety
/// `channel` must be NULL or a handle from [`otfs_channel_generate`] not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_free(channel: *mut OtfsChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Pass a CP-extended signal through the channel and add noise at
/// `snr_db` (`INFINITY` for none).
///
/// # Safety
/// Pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_apply(
    channel: *const OtfsChannel,
    tx: *const OtfsComplex,
    n_tx: usize,
    snr_db: f64,
    seed: u64,
    rx: *mut OtfsComplex,
    n_rx: usize,
) -> OtfsStatus {
    guard(|| {
        let ch = handle(channel, "channel")?;
        let signal = TimeSignal::new(&ch.cfg, to_complex(slice_in(tx, n_tx, "tx")?), true)?;
        let out = slice_out(rx, n_rx, ch.cfg.frame_len_with_cp(), "rx")?;
        write_complex(out, &apply_channel(&signal, &ch.cir, snr_db, seed)?.data);
        Ok(())
    })
}

/// The delay-Doppler equivalent channel, `N x N` column-major with
/// `N = otfs_frame_len`.
///
/// # Safety
/// `h_eq` must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn otfs_channel_equivalent(
    channel: *const OtfsChannel,
    h_eq: *mut OtfsComplex,
    n: usize,
) -> OtfsStatus {
    guard(|| {
        let ch = handle(channel, "channel")?;
        let len = ch.cfg.frame_len();
        let out = slice_out(h_eq, n, len * len, "h_eq")?;
        let m = ChannelMatrices::new(&ch.cir, &ch.cfg, 0.0)?;
        write_complex(out, m.h_eq.as_slice());
        Ok(())
    })
}

/// Run a sweep described by a JSON experiment config and return the BER
/// table as CSV text in `*csv_out`, released with [`otfs_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `csv_out` must be valid
/// for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn otfs_run_experiment_json(
    config_json: *const c_char,
    csv_out: *mut *mut c_char,
) -> OtfsStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        if csv_out.is_null() {
            return Err(null("csv_out"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| {
            Failure(
                OtfsStatus::InvalidArgument,
                format!("config is not UTF-8: {e}"),
            )
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Failure(OtfsStatus::InvalidArgument, format!("config: {e}")))?;
        let records = run_sweep(&cfg)?;
        let mut buf = Vec::new();
        write_csv(&records, &mut buf)?;
        let csv = CString::new(buf).expect("CSV output has no NUL bytes");
        *csv_out = csv.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otfs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

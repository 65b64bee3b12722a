use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::EqualizerKind;
use crate::error::{OtfsError, Result};

pub const CSV_HEADER: [&str; 8] = [
    "equalizer",
    "snr_db",
    "doppler_hz",
    "frames",
    "bits",
    "bit_errors",
    "ber",
    "seed",
];

/// Aggregated result of one (equalizer, SNR, Doppler) sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub equalizer: EqualizerKind,
    pub snr_db: f64,
    pub doppler_hz: f64,
    pub frames: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub seed: u64,
}

impl BerRecord {
    pub fn new(
        equalizer: EqualizerKind,
        snr_db: f64,
        doppler_hz: f64,
        frames: u64,
        bits: u64,
        bit_errors: u64,
        seed: u64,
    ) -> Self {
        let ber = if bits == 0 {
            0.0
        } else {
            bit_errors as f64 / bits as f64
        };
        BerRecord {
            equalizer,
            snr_db,
            doppler_hz,
            frames,
            bits,
            bit_errors,
            ber,
            seed,
        }
    }
}

/// Header line, then one row per record. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(records: &[BerRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| OtfsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(records, BufWriter::new(file))
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<BerRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(OtfsError::Config(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    rdr.deserialize()
        .map(|row| row.map_err(OtfsError::from))
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let file = File::open(path).map_err(|source| OtfsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(file)
}

/// `|H_eq|` as a dense row-major grid, one matrix row per line.
pub fn write_heatmap(h_eq: &DMatrix<Complex64>, path: &Path) -> Result<()> {
    let io_err = |source| OtfsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for r in 0..h_eq.nrows() {
        let line: Vec<String> = h_eq.row(r).iter().map(|z| z.norm().to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<BerRecord> {
        vec![
            BerRecord::new(EqualizerKind::OtfsFde, 10.0, 6000.0, 3, 6144, 17, 42),
            BerRecord::new(EqualizerKind::OfdmSingleTap, 0.1, 0.0, 1, 2048, 1, 42),
        ]
    }

    #[test]
    fn empty_list_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "equalizer,snr_db,doppler_hz,frames,bits,bit_errors,ber,seed\n"
        );
    }

    #[test]
    fn roundtrip_and_column_count() {
        let recs = sample();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 8);
        }
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn ber_is_ratio_of_counts() {
        let r = BerRecord::new(EqualizerKind::OtfsFde, 0.0, 0.0, 2, 4096, 3, 0);
        assert_eq!(r.ber, 3.0 / 4096.0);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(parse_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}

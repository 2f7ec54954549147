//! CSV readers and writers for signals and benchmark tables.
//!
//! Signal files hold one sample per row, either a bare value column or an
//! `index,value` pair, with an optional `index,value` header line. Numbers
//! are written in shortest round-trip scientific notation.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::synth::BenchmarkTable;

/// Header line of signal files.
pub const SIGNAL_HEADER: [&str; 2] = ["index", "value"];

/// Header line of benchmark tables.
pub const BENCHMARK_HEADER: [&str; 8] = [
    "realization",
    "seed",
    "snr_s",
    "tsnr_s",
    "snr_t",
    "snr_pi",
    "iterations",
    "stop_reason",
];

fn sci<T: Scalar>(v: T) -> String {
    format!("{:e}", v.as_f64())
}

fn bad_row(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::InvalidSignal(format!("line {line}: {msg}"))
}

/// Parses signal samples from CSV text.
pub fn read_signal_from<T: Scalar, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row_no as u64 + 1, |p| p.line());
        if row_no == 0 && rec.iter().eq(SIGNAL_HEADER) {
            continue;
        }
        let value_field = match rec.len() {
            1 => &rec[0],
            2 => {
                let idx: usize = rec[0].parse().map_err(|_| {
                    bad_row(
                        line,
                        format!("index `{}` is not a nonnegative integer", &rec[0]),
                    )
                })?;
                if idx != out.len() {
                    return Err(bad_row(
                        line,
                        format!("expected index {}, found {idx}", out.len()),
                    ));
                }
                &rec[1]
            }
            n => return Err(bad_row(line, format!("expected 1 or 2 fields, found {n}"))),
        };
        let v: f64 = value_field
            .parse()
            .map_err(|_| bad_row(line, format!("value `{value_field}` is not a number")))?;
        if !v.is_finite() {
            return Err(bad_row(line, "value is not finite"));
        }
        out.push(T::lit(v));
    }
    if out.is_empty() {
        return Err(Error::InvalidSignal("no samples".into()));
    }
    Ok(out)
}

pub fn read_signal<T: Scalar>(path: &Path) -> Result<Vec<T>> {
    read_signal_from(File::open(path)?)
}

/// Writes `index,value` rows with a header.
pub fn write_signal_to<T: Scalar, W: Write>(writer: W, samples: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(SIGNAL_HEADER)?;
    for (i, &v) in samples.iter().enumerate() {
        wtr.write_record([i.to_string(), sci(v)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_signal<T: Scalar>(path: &Path, samples: &[T]) -> Result<()> {
    write_signal_to(File::create(path)?, samples)
}

pub fn write_benchmark_to<W: Write>(writer: W, table: &BenchmarkTable) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(BENCHMARK_HEADER)?;
    for r in &table.rows {
        wtr.write_record([
            r.realization.to_string(),
            r.seed.to_string(),
            sci(r.snr_s),
            sci(r.tsnr_s),
            sci(r.snr_t),
            sci(r.snr_pi),
            r.iterations.to_string(),
            r.stop_reason.as_str().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_benchmark(path: &Path, table: &BenchmarkTable) -> Result<()> {
    write_benchmark_to(File::create(path)?, table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_both_layouts() {
        let bare: Vec<f64> = read_signal_from("1.5\n-2e-3\n0\n".as_bytes()).unwrap();
        assert_eq!(bare, vec![1.5, -2e-3, 0.0]);
        let indexed: Vec<f64> =
            read_signal_from("index,value\n0,1.5\n1, -2e-3\n2,0\n".as_bytes()).unwrap();
        assert_eq!(indexed, bare);
        let headless: Vec<f64> = read_signal_from("0,4\n1,5\n".as_bytes()).unwrap();
        assert_eq!(headless, vec![4.0, 5.0]);
    }

    #[test]
    fn rejects_malformed_rows() {
        let err = read_signal_from::<f64, _>("index,value\n0,1\n2,3\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("line 3") && err.contains("expected index 1"),
            "{err}"
        );
        let err = read_signal_from::<f64, _>("0,1\n1,abc\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2") && err.contains("abc"), "{err}");
        assert!(read_signal_from::<f64, _>("0,nan\n".as_bytes()).is_err());
        assert!(read_signal_from::<f64, _>("index,value\n".as_bytes()).is_err());
        assert!(read_signal_from::<f64, _>("0,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let samples = vec![std::f64::consts::PI, -1e-300, 0.0, 123456.789, 1.0 / 3.0];
        let mut buf = Vec::new();
        write_signal_to(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("index,value\n0,3.141592653589793e0\n"),
            "{text}"
        );
        let back: Vec<f64> = read_signal_from(buf.as_slice()).unwrap();
        assert_eq!(back, samples);
    }
}

//! Plain EDF reader/writer and a CSV fallback for [`Recording`]s.
//!
//! Only the original EDF container is supported: 16-bit little-endian samples,
//! one shared sampling rate across signals. EDF+ annotation signals are skipped
//! on read.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::recording::Recording;

const MAIN_HEADER_LEN: usize = 256;
const SIGNAL_HEADER_LEN: usize = 256;
const DIGITAL_MIN: i32 = -32768;
const DIGITAL_MAX: i32 = 32767;
const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, Clone, PartialEq)]
pub struct SignalHeader {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl SignalHeader {
    /// Physical value of one digital step.
    pub fn quantization_step(&self) -> f64 {
        (self.physical_max - self.physical_min) / f64::from(self.digital_max - self.digital_min)
    }

    pub fn to_physical(&self, digital: i16) -> f64 {
        self.physical_min + f64::from(i32::from(digital) - self.digital_min) * self.quantization_step()
    }

    fn to_digital(&self, physical: f64) -> i16 {
        let d = (physical - self.physical_min) / self.quantization_step() + f64::from(self.digital_min);
        d.round().clamp(f64::from(self.digital_min), f64::from(self.digital_max)) as i16
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub n_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    /// Bytes occupied by the main header and all signal headers.
    pub fn expected_header_bytes(n_signals: usize) -> usize {
        MAIN_HEADER_LEN + SIGNAL_HEADER_LEN * n_signals
    }

    fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| 2 * s.samples_per_record).sum()
    }
}

/// Options for [`write_edf_with`].
#[derive(Debug, Clone, Default)]
pub struct EdfWriteOptions {
    /// Shared physical range for every signal. Derived from the data when `None`.
    pub physical_range: Option<(f64, f64)>,
    pub physical_dimension: Option<String>,
}

struct Fields<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Fields<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<String> {
        let end = self.pos + len;
        let raw = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Edf(format!("header truncated while reading {what}")))?;
        self.pos = end;
        if !raw.iter().all(|b| (0x20..=0x7e).contains(b)) {
            return Err(Error::Edf(format!("{what} contains non-ASCII bytes")));
        }
        Ok(String::from_utf8_lossy(raw).trim().to_string())
    }

    fn number<T: std::str::FromStr>(&mut self, len: usize, what: &str) -> Result<T> {
        let s = self.take(len, what)?;
        s.parse().map_err(|_| Error::Edf(format!("{what} is not numeric: {s:?}")))
    }

    fn per_signal<T>(
        &mut self,
        ns: usize,
        mut field: impl FnMut(&mut Self, usize) -> Result<T>,
    ) -> Result<Vec<T>> {
        (0..ns).map(|i| field(self, i)).collect()
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<EdfHeader> {
    let mut f = Fields { bytes, pos: 0 };
    let version = f.take(8, "version")?;
    let patient_id = f.take(80, "patient id")?;
    let recording_id = f.take(80, "recording id")?;
    let start_date = f.take(8, "start date")?;
    let start_time = f.take(8, "start time")?;
    let header_bytes: usize = f.number(8, "header byte count")?;
    f.take(44, "reserved")?;
    let n_records: i64 = f.number(8, "record count")?;
    let record_duration_s: f64 = f.number(8, "record duration")?;
    let ns: usize = f.number(4, "signal count")?;

    if ns == 0 {
        return Err(Error::Edf("file declares no signals".into()));
    }
    if header_bytes != EdfHeader::expected_header_bytes(ns) {
        return Err(Error::Edf(format!(
            "header size {header_bytes} does not match 256 * (1 + {ns})"
        )));
    }
    if !(record_duration_s.is_finite() && record_duration_s > 0.0) {
        return Err(Error::Edf(format!("record duration must be positive, got {record_duration_s}")));
    }

    let labels = f.per_signal(ns, |f, i| f.take(16, &format!("label {i}")))?;
    let transducers = f.per_signal(ns, |f, i| f.take(80, &format!("transducer {i}")))?;
    let dims = f.per_signal(ns, |f, i| f.take(8, &format!("physical dimension {i}")))?;
    let pmins: Vec<f64> = f.per_signal(ns, |f, i| f.number(8, &format!("physical min {i}")))?;
    let pmaxs: Vec<f64> = f.per_signal(ns, |f, i| f.number(8, &format!("physical max {i}")))?;
    let dmins: Vec<i32> = f.per_signal(ns, |f, i| f.number(8, &format!("digital min {i}")))?;
    let dmaxs: Vec<i32> = f.per_signal(ns, |f, i| f.number(8, &format!("digital max {i}")))?;
    let prefilters = f.per_signal(ns, |f, i| f.take(80, &format!("prefiltering {i}")))?;
    let sprs: Vec<usize> = f.per_signal(ns, |f, i| f.number(8, &format!("samples per record {i}")))?;
    f.per_signal(ns, |f, i| f.take(32, &format!("reserved {i}")))?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if dmins[i] >= dmaxs[i] {
            return Err(Error::Edf(format!("signal {i}: digital min must be below digital max")));
        }
        if sprs[i] == 0 {
            return Err(Error::Edf(format!("signal {i}: zero samples per record")));
        }
        if pmins[i] == pmaxs[i] {
            return Err(Error::Edf(format!("signal {i}: empty physical range")));
        }
        signals.push(SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmins[i],
            physical_max: pmaxs[i],
            digital_min: dmins[i],
            digital_max: dmaxs[i],
            prefiltering: prefilters[i].clone(),
            samples_per_record: sprs[i],
        });
    }

    let mut header = EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes,
        n_records: 0,
        record_duration_s,
        signals,
    };
    let available = bytes.len().saturating_sub(header_bytes) / header.record_bytes().max(1);
    header.n_records = if n_records < 0 {
        available
    } else {
        n_records as usize
    };
    Ok(header)
}

pub fn read_edf(path: impl AsRef<Path>) -> Result<Recording> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut file| file.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut rec = decode_edf(&bytes)?;
    rec.meta.insert("source".into(), path.display().to_string());
    Ok(rec)
}

/// Decodes an in-memory EDF image.
pub fn decode_edf(bytes: &[u8]) -> Result<Recording> {
    let header = parse_header(bytes)?;
    let data_bytes = header.n_records * header.record_bytes();
    if bytes.len() < header.header_bytes + data_bytes {
        return Err(Error::Edf(format!(
            "file truncated: {} data bytes declared, {} present",
            data_bytes,
            bytes.len() - header.header_bytes
        )));
    }

    let kept: Vec<usize> = (0..header.n_signals())
        .filter(|&i| header.signals[i].label != ANNOTATION_LABEL)
        .collect();
    if kept.is_empty() {
        return Err(Error::Edf("no ordinary signals".into()));
    }
    let spr = header.signals[kept[0]].samples_per_record;
    if let Some(&odd) = kept.iter().find(|&&i| header.signals[i].samples_per_record != spr) {
        return Err(Error::Edf(format!(
            "mixed sampling rates: signal {:?} has {} samples per record, expected {spr}",
            header.signals[odd].label, header.signals[odd].samples_per_record
        )));
    }
    let fs = spr as f64 / header.record_duration_s;

    let n_samples = header.n_records * spr;
    let mut data = Array2::<f64>::zeros((kept.len(), n_samples));
    let mut offset = header.header_bytes;
    for record in 0..header.n_records {
        for (signal_idx, signal) in header.signals.iter().enumerate() {
            let len = 2 * signal.samples_per_record;
            if let Some(row) = kept.iter().position(|&k| k == signal_idx) {
                let chunk = &bytes[offset..offset + len];
                for (j, pair) in chunk.chunks_exact(2).enumerate() {
                    let digital = i16::from_le_bytes([pair[0], pair[1]]);
                    data[[row, record * spr + j]] = signal.to_physical(digital);
                }
            }
            offset += len;
        }
    }

    let channels = kept.iter().map(|&i| header.signals[i].label.clone()).collect();
    let mut rec = Recording::new(channels, fs, data)?;
    rec.meta.insert("patient_id".into(), header.patient_id.clone());
    rec.meta.insert("recording_id".into(), header.recording_id.clone());
    rec.meta.insert("start_date".into(), header.start_date.clone());
    rec.meta.insert("start_time".into(), header.start_time.clone());
    if let Some(site) = header.recording_id.split_whitespace().find_map(|t| t.strip_prefix("site=")) {
        rec.meta.insert("site_id".into(), site.to_string());
    }
    if !header.patient_id.is_empty() && header.patient_id != "X" {
        rec.meta.insert("subject_id".into(), header.patient_id.clone());
    }
    Ok(rec)
}

pub fn write_edf(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    write_edf_with(rec, path, &EdfWriteOptions::default())
}

pub fn write_edf_with(rec: &Recording, path: impl AsRef<Path>, opts: &EdfWriteOptions) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_edf(rec, opts)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Encodes a recording as an EDF image.
pub fn encode_edf(rec: &Recording, opts: &EdfWriteOptions) -> Result<Vec<u8>> {
    rec.validate()?;
    if rec.n_samples() == 0 {
        return Err(Error::Recording("cannot write a recording without samples".into()));
    }
    let (n_records, spr, duration) = record_layout(rec.n_samples(), rec.fs)?;

    let signals: Vec<SignalHeader> = (0..rec.n_channels())
        .map(|ch| {
            let row = rec.data.row(ch);
            let (pmin, pmax) = match opts.physical_range {
                Some((lo, hi)) => {
                    if !(lo < hi) {
                        return Err(Error::invalid(format!("physical range [{lo}, {hi}] is empty")));
                    }
                    if let Some(v) = row.iter().find(|&&v| !(v >= lo && v <= hi)) {
                        return Err(Error::Recording(format!(
                            "channel {:?} sample {v} outside physical range [{lo}, {hi}]",
                            rec.channels[ch]
                        )));
                    }
                    (lo, hi)
                }
                None => data_range(row.iter().copied(), &rec.channels[ch])?,
            };
            Ok(SignalHeader {
                label: rec.channels[ch].clone(),
                transducer: String::new(),
                physical_dimension: opts.physical_dimension.clone().unwrap_or_else(|| "uV".into()),
                physical_min: pmin,
                physical_max: pmax,
                digital_min: DIGITAL_MIN,
                digital_max: DIGITAL_MAX,
                prefiltering: String::new(),
                samples_per_record: spr,
            })
        })
        .collect::<Result<_>>()?;

    let ns = signals.len();
    let header_bytes = EdfHeader::expected_header_bytes(ns);
    let mut out = Vec::with_capacity(header_bytes + 2 * ns * rec.n_samples());

    let patient = rec.meta.get("subject_id").map(String::as_str).unwrap_or("X");
    let recording = match rec.meta.get("site_id") {
        Some(site) => format!("Startdate X X X site={site}"),
        None => "Startdate X X X".to_string(),
    };
    push_field(&mut out, "0", 8)?;
    push_field(&mut out, patient, 80)?;
    push_field(&mut out, &recording, 80)?;
    push_field(&mut out, rec.meta.get("start_date").map(String::as_str).unwrap_or("01.01.00"), 8)?;
    push_field(&mut out, rec.meta.get("start_time").map(String::as_str).unwrap_or("00.00.00"), 8)?;
    push_field(&mut out, &header_bytes.to_string(), 8)?;
    push_field(&mut out, "", 44)?;
    push_field(&mut out, &n_records.to_string(), 8)?;
    push_field(&mut out, &duration, 8)?;
    push_field(&mut out, &ns.to_string(), 4)?;
    for s in &signals {
        push_field(&mut out, &s.label, 16)?;
    }
    for s in &signals {
        push_field(&mut out, &s.transducer, 80)?;
    }
    for s in &signals {
        push_field(&mut out, &s.physical_dimension, 8)?;
    }
    for s in &signals {
        push_field(&mut out, &format_bound(s.physical_min, Rounding::Down)?, 8)?;
    }
    for s in &signals {
        push_field(&mut out, &format_bound(s.physical_max, Rounding::Up)?, 8)?;
    }
    for s in &signals {
        push_field(&mut out, &s.digital_min.to_string(), 8)?;
    }
    for s in &signals {
        push_field(&mut out, &s.digital_max.to_string(), 8)?;
    }
    for s in &signals {
        push_field(&mut out, &s.prefiltering, 80)?;
    }
    for s in &signals {
        push_field(&mut out, &s.samples_per_record.to_string(), 8)?;
    }
    for _ in &signals {
        push_field(&mut out, "", 32)?;
    }
    debug_assert_eq!(out.len(), header_bytes);

    // The header stores rounded physical bounds; quantize against exactly those.
    let parsed: Vec<SignalHeader> = signals
        .iter()
        .map(|s| -> Result<SignalHeader> {
            let mut s = s.clone();
            s.physical_min = format_bound(s.physical_min, Rounding::Down)?.parse().unwrap();
            s.physical_max = format_bound(s.physical_max, Rounding::Up)?.parse().unwrap();
            Ok(s)
        })
        .collect::<Result<_>>()?;
    for record in 0..n_records {
        for (ch, signal) in parsed.iter().enumerate() {
            let row = rec.data.row(ch);
            for j in 0..spr {
                let d = signal.to_digital(row[record * spr + j]);
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn data_range(values: impl Iterator<Item = f64>, label: &str) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        if !v.is_finite() {
            return Err(Error::Recording(format!("channel {label:?} has a non-finite sample")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo < 1e-6 {
        Ok((lo - 1.0, hi + 1.0))
    } else {
        Ok((lo, hi))
    }
}

/// Picks `(n_records, samples_per_record, duration_field)` so that the duration
/// field round-trips the sampling rate exactly. Prefers a single record.
fn record_layout(n_samples: usize, fs: f64) -> Result<(usize, usize, String)> {
    let exact = |spr: usize| -> Option<String> {
        let duration = spr as f64 / fs;
        let text = format_plain(duration, 8)?;
        let parsed: f64 = text.parse().ok()?;
        ((spr as f64 / parsed - fs).abs() <= 1e-9 * fs).then_some(text)
    };
    if let Some(text) = exact(n_samples) {
        return Ok((1, n_samples, text));
    }
    if fs.fract() == 0.0 {
        let spr = fs as usize;
        if n_samples % spr == 0 {
            if let Some(text) = exact(spr) {
                return Ok((n_samples / spr, spr, text));
            }
        }
    }
    Err(Error::invalid(format!(
        "{n_samples} samples at {fs} Hz cannot be laid out in whole EDF records"
    )))
}

#[derive(Clone, Copy)]
enum Rounding {
    Down,
    Up,
}

/// Shortest decimal representation fitting `width` chars that parses back exactly.
fn format_plain(v: f64, width: usize) -> Option<String> {
    (0..=7).find_map(|decimals| {
        let s = trim_decimal(format!("{v:.decimals$}"));
        (s.len() <= width && s.parse::<f64>().ok() == Some(v)).then_some(s)
    })
}

/// Formats a physical bound into 8 characters, rounding away from the data.
fn format_bound(v: f64, dir: Rounding) -> Result<String> {
    if let Some(s) = format_plain(v, 8) {
        return Ok(s);
    }
    for decimals in (0..=6).rev() {
        let scale = 10f64.powi(decimals);
        let r = match dir {
            Rounding::Down => (v * scale).floor() / scale,
            Rounding::Up => (v * scale).ceil() / scale,
        };
        let s = trim_decimal(format!("{r:.*}", decimals as usize));
        if s.len() <= 8 {
            let parsed: f64 = s.parse().unwrap();
            let ok = match dir {
                Rounding::Down => parsed <= v,
                Rounding::Up => parsed >= v,
            };
            if ok {
                return Ok(s);
            }
        }
    }
    Err(Error::invalid(format!("physical bound {v} does not fit an 8-character EDF field")))
}

fn trim_decimal(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

fn push_field(out: &mut Vec<u8>, value: &str, width: usize) -> Result<()> {
    if !value.is_ascii() {
        return Err(Error::invalid(format!("EDF header field {value:?} is not ASCII")));
    }
    let bytes = value.as_bytes();
    let len = bytes.len().min(width);
    out.extend_from_slice(&bytes[..len]);
    out.extend(std::iter::repeat_n(b' ', width - len));
    Ok(())
}

/// Reads a comma-separated file whose first row holds the channel labels and
/// whose remaining rows are one time sample each.
pub fn read_csv(path: impl AsRef<Path>, fs: f64) -> Result<Recording> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let channels: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Csv { line, msg: e.to_string() })?;
        if row.len() != channels.len() {
            return Err(Error::Csv {
                line,
                msg: format!("{} cells, expected {}", row.len(), channels.len()),
            });
        }
        for (col, cell) in columns.iter_mut().zip(row.iter()) {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Csv { line, msg: format!("non-numeric cell {cell:?}") })?;
            col.push(v);
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::Csv { line: 1, msg: "no samples after the header row".into() });
    }
    let mut data = Array2::zeros((channels.len(), n));
    for (ch, col) in columns.iter().enumerate() {
        data.row_mut(ch).iter_mut().zip(col).for_each(|(d, v)| *d = *v);
    }
    Recording::new(channels, fs, data)
}

pub fn write_csv(rec: &Recording, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", rec.channels.join(",")).map_err(io)?;
    for t in 0..rec.n_samples() {
        let line: Vec<String> = rec.data.column(t).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n_ch: usize, n: usize, fs: f64, f: impl Fn(usize, usize) -> f64) -> Recording {
        let channels = (0..n_ch).map(|i| format!("C{i}")).collect();
        Recording::new(channels, fs, Array2::from_shape_fn((n_ch, n), |(c, t)| f(c, t))).unwrap()
    }

    #[test]
    fn digital_min_maps_to_physical_min() {
        let s = SignalHeader {
            label: "Cz".into(),
            transducer: String::new(),
            physical_dimension: "uV".into(),
            physical_min: -200.0,
            physical_max: 200.0,
            digital_min: -2048,
            digital_max: 2047,
            prefiltering: String::new(),
            samples_per_record: 256,
        };
        assert_eq!(s.to_physical(-2048), -200.0);
        assert!((s.to_physical(2047) - 200.0).abs() < 1e-12);
    }

    #[test]
    fn zero_recording_file_size() {
        let r = rec(19, 1280, 128.0, |_, _| 0.0);
        let bytes = encode_edf(&r, &EdfWriteOptions::default()).unwrap();
        assert_eq!(bytes.len(), 256 + 256 * 19 + 2 * 19 * 1280);
        let header = parse_header(&bytes).unwrap();
        assert_eq!(header.n_records, 1);
        assert_eq!(header.record_duration_s, 10.0);
    }

    #[test]
    fn out_of_range_sample_is_rejected() {
        let r = rec(1, 128, 128.0, |_, t| t as f64);
        let opts = EdfWriteOptions { physical_range: Some((-10.0, 10.0)), ..Default::default() };
        assert!(matches!(encode_edf(&r, &opts), Err(Error::Recording(_))));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let r = rec(2, 256, 128.0, |c, t| (c + t) as f64);
        let bytes = encode_edf(&r, &EdfWriteOptions::default()).unwrap();
        assert!(matches!(decode_edf(&bytes[..bytes.len() - 3]), Err(Error::Edf(_))));
        assert!(matches!(decode_edf(&bytes[..100]), Err(Error::Edf(_))));
    }

    #[test]
    fn non_numeric_header_field_is_rejected() {
        let r = rec(1, 128, 128.0, |_, _| 1.0);
        let mut bytes = encode_edf(&r, &EdfWriteOptions::default()).unwrap();
        bytes[236..244].copy_from_slice(b"abc     ");
        let err = decode_edf(&bytes).unwrap_err();
        assert!(err.to_string().contains("record count"), "{err}");
    }

    #[test]
    fn mixed_rates_are_rejected() {
        let r = rec(2, 256, 128.0, |_, _| 0.0);
        let mut bytes = encode_edf(&r, &EdfWriteOptions::default()).unwrap();
        // samples-per-record field of the second signal
        let spr_offset = 256 + 2 * (16 + 80 + 8 + 8 + 8 + 8 + 8 + 80) + 8;
        bytes[spr_offset..spr_offset + 8].copy_from_slice(b"128     ");
        let err = decode_edf(&bytes).unwrap_err();
        assert!(err.to_string().contains("mixed sampling rates"), "{err}");
    }

    #[test]
    fn bound_formatting_rounds_outward() {
        assert_eq!(format_bound(-123.456789012, Rounding::Down).unwrap(), "-123.457");
        assert_eq!(format_bound(123.456789012, Rounding::Up).unwrap(), "123.4568");
        assert_eq!(format_bound(0.0, Rounding::Up).unwrap(), "0");
    }

    #[test]
    fn multi_record_layout_for_fractional_durations() {
        // 1000 samples at 256 Hz is 3.90625 s, representable; 1/3 s records are not.
        assert_eq!(record_layout(1000, 256.0).unwrap().0, 1);
        assert!(record_layout(1001, 3.0).is_err());
        assert_eq!(record_layout(300, 3.0).unwrap(), (1, 300, "100".into()));
    }
}

//! EDF (European Data Format) reading and writing.
//!
//! Only plain EDF is handled: a 256-byte fixed header, 256 bytes of header per
//! signal, then `n_records` data records of 2-byte little-endian
//! two's-complement samples. EDF+ annotation channels are not decoded.
//!
//! The writer emits the same layout so synthetic recordings and real ones go
//! through one parser.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{err, Error, Result};

const MODULE: &str = "edf";
const FIXED_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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
    /// Linear map from digital to physical units.
    pub fn gain_offset(&self) -> (f64, f64) {
        let gain = (self.physical_max - self.physical_min)
            / f64::from(self.digital_max - self.digital_min);
        let offset = self.physical_min - gain * f64::from(self.digital_min);
        (gain, offset)
    }

    pub fn to_physical(&self, d: i16) -> f64 {
        let (gain, offset) = self.gain_offset();
        gain * f64::from(d) + offset
    }

    /// Nearest digital value for a physical value, clamped to the digital range.
    pub fn to_digital(&self, x: f64) -> i16 {
        let (gain, offset) = self.gain_offset();
        let d = ((x - offset) / gain).round();
        d.clamp(f64::from(self.digital_min), f64::from(self.digital_max)) as i16
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub reserved: String,
    pub n_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<SignalHeader>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }

    pub fn fs(&self, signal: usize) -> f64 {
        self.signals[signal].samples_per_record as f64 / self.record_duration_s
    }

    pub fn duration_s(&self) -> f64 {
        self.n_records as f64 * self.record_duration_s
    }
}

/// A parsed EDF file with samples kept at the digital level.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub digital: Vec<Vec<i16>>,
}

impl EdfFile {
    pub fn physical(&self, signal: usize) -> Vec<f64> {
        let h = &self.header.signals[signal];
        let (gain, offset) = h.gain_offset();
        self.digital[signal]
            .iter()
            .map(|&d| gain * f64::from(d) + offset)
            .collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.header
            .signals
            .iter()
            .map(|s| s.label.as_str())
            .collect()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, width: usize) -> Result<(usize, &'a str)> {
        let start = self.pos;
        let end = start + width;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                offset: self.bytes.len(),
                expected: end,
                actual: self.bytes.len(),
            });
        }
        self.pos = end;
        let raw = &self.bytes[start..end];
        let text = std::str::from_utf8(raw).map_err(|_| Error::Format {
            offset: start,
            msg: "header field is not ASCII".into(),
        })?;
        if !text.is_ascii() {
            return Err(Error::Format {
                offset: start,
                msg: "header field is not ASCII".into(),
            });
        }
        Ok((start, text.trim()))
    }

    fn string(&mut self, width: usize) -> Result<String> {
        Ok(self.field(width)?.1.to_string())
    }

    fn number<T: std::str::FromStr>(&mut self, width: usize, what: &str) -> Result<T> {
        let (offset, text) = self.field(width)?;
        text.parse::<T>().map_err(|_| Error::Format {
            offset,
            msg: format!("cannot parse {what} from `{text}`"),
        })
    }
}

fn parse_header(bytes: &[u8]) -> Result<EdfHeader> {
    let mut c = Cursor { bytes, pos: 0 };
    let version = c.string(8)?;
    let patient_id = c.string(80)?;
    let recording_id = c.string(80)?;
    let start_date = c.string(8)?;
    let start_time = c.string(8)?;
    let header_bytes: usize = c.number(8, "header byte count")?;
    let reserved = c.string(44)?;
    let n_records_off = c.pos;
    let n_records: i64 = c.number(8, "number of data records")?;
    let duration_off = c.pos;
    let record_duration_s: f64 = c.number(8, "data record duration")?;
    let n_signals: usize = c.number(4, "number of signals")?;

    let expected_header = FIXED_HEADER + SIGNAL_HEADER * n_signals;
    if header_bytes != expected_header {
        return Err(Error::Format {
            offset: 184,
            msg: format!(
                "header byte count {header_bytes} does not match 256 + 256 x {n_signals} signals = {expected_header}"
            ),
        });
    }
    if bytes.len() < expected_header {
        return Err(Error::Truncated {
            offset: bytes.len(),
            expected: expected_header,
            actual: bytes.len(),
        });
    }
    if !(record_duration_s.is_finite() && record_duration_s > 0.0) {
        return Err(Error::Format {
            offset: duration_off,
            msg: format!("data record duration must be > 0, got {record_duration_s}"),
        });
    }

    let ns = n_signals;
    let mut cols =
        |width: usize| -> Result<Vec<String>> { (0..ns).map(|_| c.string(width)).collect() };
    let labels = cols(16)?;
    let transducers = cols(80)?;
    let dims = cols(8)?;
    let pmin_off = c.pos;
    let pmin: Vec<f64> = (0..ns)
        .map(|_| c.number(8, "physical minimum"))
        .collect::<Result<_>>()?;
    let pmax: Vec<f64> = (0..ns)
        .map(|_| c.number(8, "physical maximum"))
        .collect::<Result<_>>()?;
    let dmin_off = c.pos;
    let dmin: Vec<i32> = (0..ns)
        .map(|_| c.number(8, "digital minimum"))
        .collect::<Result<_>>()?;
    let dmax: Vec<i32> = (0..ns)
        .map(|_| c.number(8, "digital maximum"))
        .collect::<Result<_>>()?;
    let mut cols =
        |width: usize| -> Result<Vec<String>> { (0..ns).map(|_| c.string(width)).collect() };
    let prefilter = cols(80)?;
    let spr_off = c.pos;
    let spr: Vec<usize> = (0..ns)
        .map(|_| c.number(8, "samples per record"))
        .collect::<Result<_>>()?;
    let _reserved: Vec<String> = (0..ns).map(|_| c.string(32)).collect::<Result<_>>()?;

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if !(dmin[i] < dmax[i]) || dmin[i] < i32::from(i16::MIN) || dmax[i] > i32::from(i16::MAX) {
            return Err(Error::Format {
                offset: dmin_off + 8 * i,
                msg: format!(
                    "signal {i} ({}): digital range [{}, {}] must be increasing and within 16 bits",
                    labels[i], dmin[i], dmax[i]
                ),
            });
        }
        if !(pmin[i].is_finite() && pmax[i].is_finite()) || pmin[i] == pmax[i] {
            return Err(Error::Format {
                offset: pmin_off + 8 * i,
                msg: format!("signal {i} ({}): physical range is degenerate", labels[i]),
            });
        }
        if spr[i] == 0 {
            return Err(Error::Format {
                offset: spr_off + 8 * i,
                msg: format!("signal {i} ({}): samples per record must be > 0", labels[i]),
            });
        }
        signals.push(SignalHeader {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            physical_dimension: dims[i].clone(),
            physical_min: pmin[i],
            physical_max: pmax[i],
            digital_min: dmin[i],
            digital_max: dmax[i],
            prefiltering: prefilter[i].clone(),
            samples_per_record: spr[i],
        });
    }

    let record_bytes: usize = signals.iter().map(|s| s.samples_per_record * 2).sum();
    let data_len = bytes.len() - header_bytes;
    let n_records = if n_records == -1 {
        if record_bytes == 0 || !data_len.is_multiple_of(record_bytes) {
            return Err(Error::Format {
                offset: header_bytes,
                msg: format!(
                    "data section of {data_len} bytes is not a whole number of {record_bytes}-byte records"
                ),
            });
        }
        data_len / record_bytes
    } else if n_records < 0 {
        return Err(Error::Format {
            offset: n_records_off,
            msg: format!("number of data records must be >= 0 or -1, got {n_records}"),
        });
    } else {
        n_records as usize
    };

    Ok(EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes,
        reserved,
        n_records,
        record_duration_s,
        signals,
    })
}

/// Parses a complete EDF byte stream into digital samples.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile> {
    let header = parse_header(bytes)?;
    let record_bytes = header.record_bytes();
    let expected = record_bytes
        .checked_mul(header.n_records)
        .and_then(|d| d.checked_add(header.header_bytes))
        .ok_or_else(|| Error::Format {
            offset: 236,
            msg: "declared data size overflows".into(),
        })?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            offset: bytes.len(),
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            offset: expected,
            msg: format!(
                "{} trailing bytes after the {} declared data records (not a whole number of samples per record)",
                bytes.len() - expected,
                header.n_records
            ),
        });
    }

    let mut digital: Vec<Vec<i16>> = header
        .signals
        .iter()
        .map(|s| Vec::with_capacity(s.samples_per_record * header.n_records))
        .collect();
    let mut pos = header.header_bytes;
    for _ in 0..header.n_records {
        for (sig, out) in header.signals.iter().zip(digital.iter_mut()) {
            let chunk = &bytes[pos..pos + sig.samples_per_record * 2];
            out.extend(
                chunk
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]])),
            );
            pos += chunk.len();
        }
    }
    Ok(EdfFile { header, digital })
}

pub fn read_edf_file(path: &Path) -> Result<EdfFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_edf(&bytes)
}

fn put_field(out: &mut Vec<u8>, text: &str, width: usize) {
    let mut t: Vec<u8> = text.bytes().filter(u8::is_ascii).take(width).collect();
    t.resize(width, b' ');
    out.extend_from_slice(&t);
}

/// Shortest decimal rendering of `v` that fits `width` characters.
fn fit_number(v: f64, width: usize) -> String {
    let plain = format!("{v}");
    if plain.len() <= width {
        return plain;
    }
    for prec in (0..width).rev() {
        let s = format!("{v:.prec$}");
        if s.len() <= width {
            return s;
        }
    }
    format!("{}", v.round() as i64)
}

/// Serializes `file` into EDF bytes. Header counts are recomputed from the
/// samples, so `header.header_bytes` and `header.n_records` are ignored.
pub fn write_edf(file: &EdfFile) -> Result<Vec<u8>> {
    let h = &file.header;
    let ns = h.signals.len();
    if file.digital.len() != ns {
        return Err(err!(
            Validation,
            MODULE,
            "{} signal headers but {} sample vectors",
            ns,
            file.digital.len()
        ));
    }
    let mut n_records = None;
    for (s, d) in h.signals.iter().zip(&file.digital) {
        if s.samples_per_record == 0 || d.len() % s.samples_per_record != 0 {
            return Err(err!(
                Validation,
                MODULE,
                "signal {}: {} samples is not a whole number of {}-sample records",
                s.label,
                d.len(),
                s.samples_per_record
            ));
        }
        let n = d.len() / s.samples_per_record;
        if *n_records.get_or_insert(n) != n {
            return Err(err!(
                Validation,
                MODULE,
                "signals span different numbers of records"
            ));
        }
    }
    let n_records = n_records.unwrap_or(0);
    let header_bytes = FIXED_HEADER + SIGNAL_HEADER * ns;

    let mut out = Vec::with_capacity(header_bytes + n_records * h.record_bytes());
    put_field(&mut out, &h.version, 8);
    put_field(&mut out, &h.patient_id, 80);
    put_field(&mut out, &h.recording_id, 80);
    put_field(&mut out, &h.start_date, 8);
    put_field(&mut out, &h.start_time, 8);
    put_field(&mut out, &header_bytes.to_string(), 8);
    put_field(&mut out, &h.reserved, 44);
    put_field(&mut out, &n_records.to_string(), 8);
    put_field(&mut out, &fit_number(h.record_duration_s, 8), 8);
    put_field(&mut out, &ns.to_string(), 4);
    for s in &h.signals {
        put_field(&mut out, &s.label, 16);
    }
    for s in &h.signals {
        put_field(&mut out, &s.transducer, 80);
    }
    for s in &h.signals {
        put_field(&mut out, &s.physical_dimension, 8);
    }
    for s in &h.signals {
        put_field(&mut out, &fit_number(s.physical_min, 8), 8);
    }
    for s in &h.signals {
        put_field(&mut out, &fit_number(s.physical_max, 8), 8);
    }
    for s in &h.signals {
        put_field(&mut out, &s.digital_min.to_string(), 8);
    }
    for s in &h.signals {
        put_field(&mut out, &s.digital_max.to_string(), 8);
    }
    for s in &h.signals {
        put_field(&mut out, &s.prefiltering, 80);
    }
    for s in &h.signals {
        put_field(&mut out, &s.samples_per_record.to_string(), 8);
    }
    for _ in &h.signals {
        put_field(&mut out, "", 32);
    }
    debug_assert_eq!(out.len(), header_bytes);

    for r in 0..n_records {
        for (s, d) in h.signals.iter().zip(&file.digital) {
            let spr = s.samples_per_record;
            for v in &d[r * spr..(r + 1) * spr] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn write_edf_file(path: &Path, file: &EdfFile) -> Result<()> {
    let bytes = write_edf(file)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// What to do when a wanted label occurs more than once in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    #[default]
    Error,
    /// Use the first occurrence.
    First,
}

/// The 18 bipolar channels shared by every CHB-MIT recording.
pub const CHB_MIT_COMMON_CHANNELS: [&str; 18] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4",
    "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ",
];

/// Indices of `wanted` labels in `file`, in `wanted` order.
pub fn channel_indices(
    file: &EdfFile,
    wanted: &[String],
    policy: DuplicatePolicy,
) -> Result<Vec<usize>> {
    let mut positions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in file.header.signals.iter().enumerate() {
        positions.entry(s.label.as_str()).or_default().push(i);
    }
    wanted
        .iter()
        .map(|w| match positions.get(w.as_str()).map(Vec::as_slice) {
            None | Some([]) => Err(err!(
                Lookup,
                MODULE,
                "channel `{w}` not found; available: {}",
                file.labels().join(", ")
            )),
            Some([i]) => Ok(*i),
            Some(many) => match policy {
                DuplicatePolicy::First => Ok(many[0]),
                DuplicatePolicy::Error => Err(err!(
                    Lookup,
                    MODULE,
                    "channel `{w}` occurs {} times (signals {many:?}); disambiguate the file or select the first occurrence explicitly",
                    many.len()
                )),
            },
        })
        .collect()
}

/// Signals reordered into the wanted order, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub channels: Vec<String>,
    pub fs: f64,
    pub data: Vec<Vec<f64>>,
}

pub fn select_channels(
    file: &EdfFile,
    wanted: &[String],
    policy: DuplicatePolicy,
) -> Result<SignalMatrix> {
    let idx = channel_indices(file, wanted, policy)?;
    let fs = idx.first().map(|&i| file.header.fs(i)).unwrap_or(0.0);
    if let Some(&bad) = idx.iter().find(|&&i| file.header.fs(i) != fs) {
        return Err(err!(
            Validation,
            MODULE,
            "selected channels have different sampling rates ({} vs {fs})",
            file.header.fs(bad)
        ));
    }
    Ok(SignalMatrix {
        channels: wanted.to_vec(),
        fs,
        data: idx.iter().map(|&i| file.physical(i)).collect(),
    })
}

/// Header for a set of equally sampled channels with a shared physical range.
pub fn uniform_header(
    labels: &[String],
    fs: f64,
    record_duration_s: f64,
    physical_range: (f64, f64),
    dimension: &str,
) -> Result<EdfHeader> {
    let spr = fs * record_duration_s;
    if spr.fract() != 0.0 || spr < 1.0 {
        return Err(err!(
            Validation,
            MODULE,
            "fs {fs} x record duration {record_duration_s} is not a whole number of samples"
        ));
    }
    Ok(EdfHeader {
        version: "0".into(),
        patient_id: "X X X X".into(),
        recording_id: "Startdate X X X X".into(),
        start_date: "01.01.00".into(),
        start_time: "00.00.00".into(),
        header_bytes: FIXED_HEADER + SIGNAL_HEADER * labels.len(),
        reserved: String::new(),
        n_records: 0,
        record_duration_s,
        signals: labels
            .iter()
            .map(|l| SignalHeader {
                label: l.clone(),
                transducer: String::new(),
                physical_dimension: dimension.into(),
                physical_min: physical_range.0,
                physical_max: physical_range.1,
                digital_min: i32::from(i16::MIN),
                digital_max: i32::from(i16::MAX),
                prefiltering: String::new(),
                samples_per_record: spr as usize,
            })
            .collect(),
    })
}

//! File formats: PTF1 tensors, JSON results documents and trace CSVs.
//!
//! PTF1 layout: bytes 0..4 are the magic `PTF1`, bytes 4..16 hold `n_pool`,
//! `k` and `c` as little-endian `u32`, followed by `n_pool * k * c`
//! little-endian `f64` values in `(point, sample, class)` order. There is no
//! padding and no trailer.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::AlTrace;
use crate::tensor::PosteriorTensor;

pub const PTF1_MAGIC: &[u8; 4] = b"PTF1";
pub const PTF1_HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic {found:?} at byte offset {offset}, expected \"PTF1\"")]
    BadMagic { offset: usize, found: Vec<u8> },
    #[error("truncated header: {len} bytes, need {PTF1_HEADER_LEN} (offset {offset})")]
    TruncatedHeader { offset: usize, len: usize },
    #[error("dimensions {n_pool}x{k}x{c} overflow the payload size (header offset {offset})")]
    DimensionOverflow {
        offset: usize,
        n_pool: u32,
        k: u32,
        c: u32,
    },
    #[error("truncated payload at byte offset {offset}: expected {expected} bytes, found {actual}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{extra} unexpected trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("tensor dimension {value} does not fit in a u32 header field")]
    DimensionTooLarge { value: usize },
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write an empty trace")]
    EmptyTrace,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Serializes a tensor into PTF1 bytes.
pub fn encode_tensor(t: &PosteriorTensor) -> Result<Vec<u8>, FormatError> {
    let mut out = Vec::with_capacity(PTF1_HEADER_LEN + 8 * t.as_slice().len());
    out.extend_from_slice(PTF1_MAGIC);
    for dim in [t.n_pool(), t.k(), t.c()] {
        let v = u32::try_from(dim).map_err(|_| FormatError::DimensionTooLarge { value: dim })?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &p in t.as_slice() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

/// Parses PTF1 bytes. The payload length must match the header exactly.
pub fn decode_tensor(bytes: &[u8]) -> Result<PosteriorTensor, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != PTF1_MAGIC {
        if bytes.len() >= 4 {
            return Err(FormatError::BadMagic {
                offset: 0,
                found: bytes[..4].to_vec(),
            });
        }
        if !PTF1_MAGIC.starts_with(bytes) {
            return Err(FormatError::BadMagic {
                offset: 0,
                found: bytes.to_vec(),
            });
        }
        return Err(FormatError::TruncatedHeader {
            offset: bytes.len(),
            len: bytes.len(),
        });
    }
    if bytes.len() < PTF1_HEADER_LEN {
        return Err(FormatError::TruncatedHeader {
            offset: bytes.len(),
            len: bytes.len(),
        });
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (n_pool, k, c) = (dim(4), dim(8), dim(12));
    let payload_len = (n_pool as usize)
        .checked_mul(k as usize)
        .and_then(|v| v.checked_mul(c as usize))
        .and_then(|v| v.checked_mul(8))
        .ok_or(FormatError::DimensionOverflow {
            offset: 4,
            n_pool,
            k,
            c,
        })?;
    let payload = &bytes[PTF1_HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(FormatError::TruncatedPayload {
            offset: bytes.len(),
            expected: payload_len,
            actual: payload.len(),
        });
    }
    if payload.len() > payload_len {
        return Err(FormatError::TrailingBytes {
            offset: PTF1_HEADER_LEN + payload_len,
            extra: payload.len() - payload_len,
        });
    }
    let probs = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    // Shape already checked against the header.
    Ok(PosteriorTensor::new(n_pool as usize, k as usize, c as usize, probs)
        .expect("payload length matches header"))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<PosteriorTensor, IoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(decode_tensor(&bytes)?)
}

pub fn write_tensor(t: &PosteriorTensor, path: impl AsRef<Path>) -> Result<(), IoError> {
    let bytes = encode_tensor(t)?;
    write_atomic(path.as_ref(), &bytes)
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_owned());
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_err(path, e));
    }
    Ok(())
}

/// The JSON record of one acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub strategy: String,
    pub b: usize,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub exact_limit: usize,
    pub acquired: Vec<usize>,
    pub scores: Vec<f64>,
    pub step_ms: Vec<f64>,
}

impl ResultsDocument {
    pub fn to_json(&self) -> Result<String, IoError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), IoError> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }
}

pub const TRACE_CSV_HEADER: &str =
    "round,train_size,test_accuracy,acquired_indices,label_entropy_nats,strategy,seed";

/// Formats the trace rows (without header).
pub fn trace_csv_rows(trace: &AlTrace, out: &mut String) {
    for r in &trace.rounds {
        let acquired = r
            .acquired
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{:.6},{},{}",
            r.round,
            r.train_size,
            r.test_accuracy,
            acquired,
            r.label_entropy,
            trace.strategy.name(),
            trace.seed
        );
    }
}

/// Renders a trace as CSV, one row per round, with fixed decimal places.
pub fn trace_to_csv(trace: &AlTrace) -> Result<String, IoError> {
    if trace.rounds.is_empty() {
        return Err(IoError::EmptyTrace);
    }
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    trace_csv_rows(trace, &mut out);
    Ok(out)
}

pub fn emit_trace_csv(trace: &AlTrace, path: impl AsRef<Path>) -> Result<(), IoError> {
    let csv = trace_to_csv(trace)?;
    write_atomic(path.as_ref(), csv.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Strategy;
    use crate::sim::RoundRecord;

    fn small_tensor() -> PosteriorTensor {
        PosteriorTensor::from_fn(3, 2, 2, |i, j, y| {
            let p = 0.125 * (1 + i + 2 * j) as f64;
            if y == 0 {
                p
            } else {
                1.0 - p
            }
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let t = small_tensor();
        let bytes = encode_tensor(&t).unwrap();
        assert_eq!(bytes.len(), 16 + 12 * 8);
        assert_eq!(decode_tensor(&bytes).unwrap(), t);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ptf");
        write_tensor(&t, &path).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), t);
        assert_eq!(fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut bytes = encode_tensor(&small_tensor()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        match decode_tensor(&bytes) {
            Err(FormatError::BadMagic { offset, found }) => {
                assert_eq!(offset, 0);
                assert_eq!(found, b"XXXX");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_payload_is_truncation() {
        let mut bytes = Vec::from(&PTF1_MAGIC[..]);
        for d in [4u32, 2, 2] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        for _ in 0..8 {
            bytes.extend_from_slice(&0.5f64.to_le_bytes());
        }
        match decode_tensor(&bytes) {
            Err(FormatError::TruncatedPayload {
                offset,
                expected,
                actual,
            }) => {
                assert_eq!(offset, 16 + 64);
                assert_eq!(expected, 128);
                assert_eq!(actual, 64);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_and_trailer_errors() {
        assert!(matches!(
            decode_tensor(b"PTF1\x01\x00"),
            Err(FormatError::TruncatedHeader { len: 6, .. })
        ));
        assert!(matches!(
            decode_tensor(b"PT"),
            Err(FormatError::TruncatedHeader { len: 2, .. })
        ));
        assert!(matches!(
            decode_tensor(b""),
            Err(FormatError::TruncatedHeader { len: 0, .. })
        ));
        let mut bytes = encode_tensor(&small_tensor()).unwrap();
        bytes.push(0);
        assert!(matches!(
            decode_tensor(&bytes),
            Err(FormatError::TrailingBytes { offset: 112, extra: 1 })
        ));
    }

    #[cfg(target_pointer_width = "32")]
    #[test]
    fn huge_header_overflows() {
        let mut bytes = Vec::from(&PTF1_MAGIC[..]);
        for d in [u32::MAX, u32::MAX, u32::MAX] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        assert!(matches!(
            decode_tensor(&bytes),
            Err(FormatError::DimensionOverflow { offset: 4, .. })
        ));
    }

    #[cfg(target_pointer_width = "64")]
    #[test]
    fn huge_header_is_truncation_not_allocation() {
        let mut bytes = Vec::from(&PTF1_MAGIC[..]);
        for d in [u32::MAX, 2, 2] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        assert!(matches!(
            decode_tensor(&bytes),
            Err(FormatError::TruncatedPayload { .. })
        ));
        // 2^32 * 2^32 * 2^32 * 8 does not fit in 64 bits.
        let mut bytes = Vec::from(&PTF1_MAGIC[..]);
        for d in [u32::MAX, u32::MAX, u32::MAX] {
            bytes.extend_from_slice(&d.to_le_bytes());
        }
        assert!(matches!(
            decode_tensor(&bytes),
            Err(FormatError::DimensionOverflow { offset: 4, .. })
        ));
    }

    fn trace_with(rounds: usize) -> AlTrace {
        AlTrace {
            strategy: Strategy::Random,
            seed: 7,
            rounds: (0..rounds)
                .map(|r| RoundRecord {
                    round: r,
                    train_size: 2 * r,
                    test_accuracy: 0.5,
                    acquired: if r == 0 { vec![] } else { vec![r, r + 10] },
                    label_entropy: std::f64::consts::LN_2,
                    class_counts: vec![r, r],
                })
                .collect(),
        }
    }

    #[test]
    fn trace_csv_layout() {
        let csv = trace_to_csv(&trace_with(1)).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), TRACE_CSV_HEADER);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "0,0,0.500000,,0.693147,random,7"
        );

        let csv = trace_to_csv(&trace_with(10)).unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.contains("\n3,6,0.500000,3;13,0.693147,random,7\n"));

        assert!(matches!(
            trace_to_csv(&trace_with(0)),
            Err(IoError::EmptyTrace)
        ));
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_trace_csv(&trace_with(0), dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn results_document_keys() {
        let doc = ResultsDocument {
            strategy: "batchbald".into(),
            b: 2,
            k: 4,
            m: 100,
            seed: 1,
            exact_limit: 10_000,
            acquired: vec![0, 2],
            scores: vec![0.5, 1.0],
            step_ms: vec![0.1, 0.2],
        };
        let v: serde_json::Value = serde_json::from_str(&doc.to_json().unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "acquired",
                "b",
                "exact_limit",
                "k",
                "m",
                "scores",
                "seed",
                "step_ms",
                "strategy"
            ]
        );
    }
}

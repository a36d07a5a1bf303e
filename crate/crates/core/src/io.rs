//! Run headers, binary spectral snapshots and two-column plot data.
//!
//! A snapshot file is little-endian throughout:
//!
//! ```text
//! magic      8 bytes   "KDVBSNAP"
//! layout     u32       currently 1
//! meta_len   u32       length of the metadata block
//! meta       meta_len  UTF-8 text, one `key value` pair per line
//! records    until EOF, each:
//!     n      u64       grid size (power of two)
//!     Λ      f64       half width of the torus
//!     t      f64       time
//!     n × (re f64, im f64), ascending in frequency k/Λ, k = -n/2 … n/2-1
//! ```

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid1D, GridError, SpectralField};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"KDVBSNAP";
pub const SNAPSHOT_LAYOUT: u32 = 1;

const RECORD_HEAD: usize = 24;
const MAX_META: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("not a snapshot file")]
    BadMagic,
    #[error("unsupported snapshot layout {0}")]
    UnsupportedLayout(u32),
    #[error("truncated input: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("metadata block of {0} bytes is too large")]
    MetaTooLarge(usize),
    #[error("metadata is not UTF-8")]
    MetaEncoding,
    #[error("record at offset {offset}: {source}")]
    BadGrid { offset: usize, source: GridError },
    #[error("record at offset {offset}: non-finite time")]
    BadTime { offset: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Provenance carried by every output: program version, the resolved configuration
/// with its digest, and the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Single-line rendering of the configuration.
    pub config: String,
}

impl RunHeader {
    pub fn new(config: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            version: format!("kdvb {}", env!("CARGO_PKG_VERSION")),
            config_hash: config_hash.into(),
            seed,
            config: config.into(),
        }
    }

    /// `key value` lines.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("version {}", self.version),
            format!("config-sha256 {}", self.config_hash),
            format!("seed {}", self.seed),
            format!("config {}", self.config),
        ]
    }

    /// The header as `# `-prefixed comment lines.
    pub fn write_comments(&self, w: &mut impl Write) -> io::Result<()> {
        for l in self.lines() {
            writeln!(w, "# {l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: SpectralField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub meta: String,
    pub records: Vec<Snapshot>,
}

pub fn write_snapshot_preamble(w: &mut impl Write, meta: &str) -> io::Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_LAYOUT.to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta.as_bytes())
}

pub fn write_snapshot(w: &mut impl Write, t: f64, field: &SpectralField) -> io::Result<()> {
    let g = field.grid();
    w.write_all(&(g.n() as u64).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    for (_, c) in field.ascending() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn encode_snapshots(meta: &str, records: &[Snapshot]) -> Vec<u8> {
    let mut out = Vec::new();
    write_snapshot_preamble(&mut out, meta).expect("writing to memory");
    for r in records {
        write_snapshot(&mut out, r.t, &r.field).expect("writing to memory");
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8], SnapshotError> {
        let end = self.pos.checked_add(k).filter(|&e| e <= self.data.len());
        match end {
            Some(e) => {
                let s = &self.data[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(SnapshotError::Truncated {
                offset: self.pos,
                needed: k,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, SnapshotError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

pub fn decode_snapshots(data: &[u8]) -> Result<SnapshotFile, SnapshotError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(8).map_err(|_| SnapshotError::BadMagic)? != SNAPSHOT_MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let layout = r.u32()?;
    if layout != SNAPSHOT_LAYOUT {
        return Err(SnapshotError::UnsupportedLayout(layout));
    }
    let meta_len = r.u32()? as usize;
    if meta_len > MAX_META {
        return Err(SnapshotError::MetaTooLarge(meta_len));
    }
    let meta = std::str::from_utf8(r.take(meta_len)?)
        .map_err(|_| SnapshotError::MetaEncoding)?
        .to_owned();

    let mut records = Vec::new();
    while r.remaining() > 0 {
        let offset = r.pos;
        let n = r.u64()?;
        let half_width = r.f64()?;
        let t = r.f64()?;
        // check the payload length before trusting n for an allocation
        let needed = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(16))
            .filter(|&b| b <= r.remaining())
            .ok_or(SnapshotError::Truncated {
                offset: offset + RECORD_HEAD,
                needed: usize::MAX,
            })?;
        let grid = Grid1D::new(n as usize, half_width).map_err(|source| SnapshotError::BadGrid { offset, source })?;
        if !t.is_finite() {
            return Err(SnapshotError::BadTime { offset });
        }
        let n = n as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        let payload = r.take(needed)?;
        for (j, pair) in payload.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
            let k = j as i64 - (n / 2) as i64;
            coeffs[grid.index_of(k).expect("in range")] = Complex64::new(re, im);
        }
        let field = SpectralField::from_coeffs(grid, coeffs).expect("length n");
        records.push(Snapshot { t, field });
    }
    Ok(SnapshotFile { meta, records })
}

/// Plain whitespace-separated columns behind `# ` comment lines, as read by gnuplot.
pub fn write_plot_data(w: &mut impl Write, header: &RunHeader, labels: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    header.write_comments(w)?;
    writeln!(w, "# {}", labels.join(" "))?;
    for row in rows {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", cols.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(n: usize, hw: f64) -> SpectralField {
        let g = Grid1D::new(n, hw).unwrap();
        SpectralField::from_fn(g, |xi| Complex64::new((-xi * xi).exp(), xi.sin()))
    }

    #[test]
    fn roundtrip() {
        let recs = vec![
            Snapshot {
                t: 0.0,
                field: field(8, 1.0),
            },
            Snapshot {
                t: 0.5,
                field: field(16, 2.5),
            },
        ];
        let bytes = encode_snapshots("seed 7\n", &recs);
        assert_eq!(bytes.len(), 16 + 7 + 2 * RECORD_HEAD + 16 * (8 + 16));
        let back = decode_snapshots(&bytes).unwrap();
        assert_eq!(back.meta, "seed 7\n");
        assert_eq!(back.records, recs);
    }

    #[test]
    fn layout_is_ascending_little_endian() {
        let g = Grid1D::new(4, 1.0).unwrap();
        let f = SpectralField::from_fn(g, |xi| Complex64::new(xi, -xi));
        let bytes = encode_snapshots("", &[Snapshot { t: 2.0, field: f }]);
        let body = &bytes[16..];
        assert_eq!(u64::from_le_bytes(body[..8].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(body[16..24].try_into().unwrap()), 2.0);
        let first_re = f64::from_le_bytes(body[24..32].try_into().unwrap());
        let first_im = f64::from_le_bytes(body[32..40].try_into().unwrap());
        assert_eq!((first_re, first_im), (-2.0, 2.0));
    }

    #[test]
    fn rejects_damage() {
        let bytes = encode_snapshots("m", &[Snapshot {
            t: 1.0,
            field: field(8, 1.0),
        }]);
        assert!(matches!(decode_snapshots(b"KDVB"), Err(SnapshotError::BadMagic)));
        assert!(matches!(
            decode_snapshots(&bytes[..bytes.len() - 1]),
            Err(SnapshotError::Truncated { .. })
        ));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode_snapshots(&bad), Err(SnapshotError::UnsupportedLayout(9))));
        let mut bad = bytes.clone();
        bad[17..25].copy_from_slice(&6u64.to_le_bytes());
        assert!(decode_snapshots(&bad).is_err());
        let mut huge = bytes[..17].to_vec();
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&[0; 16]);
        assert!(matches!(decode_snapshots(&huge), Err(SnapshotError::Truncated { .. })));
    }

    #[test]
    fn empty_file_has_no_records() {
        let back = decode_snapshots(&encode_snapshots("", &[])).unwrap();
        assert!(back.records.is_empty());
    }

    #[test]
    fn plot_data_layout() {
        let h = RunHeader {
            version: "v".into(),
            config_hash: "ab".into(),
            seed: 3,
            config: "{}".into(),
        };
        let mut out = Vec::new();
        write_plot_data(&mut out, &h, &["x", "y"], &[vec![1.0, 2.0]]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "# version v\n# config-sha256 ab\n# seed 3\n# config {}\n# x y\n1.00000000000000000e0 2.00000000000000000e0\n"
        );
    }
}

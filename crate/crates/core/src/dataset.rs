//! ARDS snapshot datasets and their JSON-lines truth sidecars.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "ARDS"            4 bytes magic
//! version           u16 (= 1)
//! M                 u16 elements per record
//! count             u64 records
//! count * M * (f32 re, f32 im)
//! ```
//!
//! The sidecar `<name>.truth.jsonl` holds one JSON object per record:
//! `{"index":..,"targets":[{"angle_deg":..,"rcs_db":..,"phase_rad":..}],"snr_db":..,"seed":..}`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::scene_sim::Scene;
use crate::{Error, Result};

pub const ARDS_MAGIC: &[u8; 4] = b"ARDS";
pub const ARDS_VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 2 + 8;
const COUNT_OFFSET: u64 = 8;

/// `train.ards` -> `train.truth.jsonl`.
pub fn truth_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("truth.jsonl")
}

pub struct DatasetWriter {
    path: PathBuf,
    out: BufWriter<File>,
    num_elements: usize,
    count: u64,
}

impl DatasetWriter {
    pub fn create(path: &Path, num_elements: usize) -> Result<Self> {
        let m = u16::try_from(num_elements)
            .ok()
            .filter(|m| *m > 0)
            .ok_or_else(|| Error::Config(format!("{num_elements} elements do not fit the ARDS header")))?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut header = Vec::with_capacity(HEADER_LEN as usize);
        header.extend_from_slice(ARDS_MAGIC);
        header.extend_from_slice(&ARDS_VERSION.to_le_bytes());
        header.extend_from_slice(&m.to_le_bytes());
        header.extend_from_slice(&0u64.to_le_bytes());
        out.write_all(&header).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            num_elements,
            count: 0,
        })
    }

    pub fn push(&mut self, samples: &[Complex64]) -> Result<()> {
        if samples.len() != self.num_elements {
            return Err(Error::Config(format!(
                "record of length {} in a dataset of {} elements",
                samples.len(),
                self.num_elements
            )));
        }
        let mut buf = Vec::with_capacity(8 * samples.len());
        for s in samples {
            buf.extend_from_slice(&(s.re as f32).to_le_bytes());
            buf.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
        self.out.write_all(&buf).map_err(|e| Error::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    /// Patch the record count into the header and flush. Returns the count.
    pub fn finish(mut self) -> Result<usize> {
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.out.seek(SeekFrom::Start(COUNT_OFFSET)).map_err(io)?;
        self.out.write_all(&self.count.to_le_bytes()).map_err(io)?;
        let file = self.out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        file.sync_all().map_err(io)?;
        Ok(self.count as usize)
    }
}

/// In-memory ARDS dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub num_elements: usize,
    pub records: Vec<Vec<Complex64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn write_dataset(path: &Path, num_elements: usize, records: &[Vec<Complex64>]) -> Result<usize> {
    let mut w = DatasetWriter::create(path, num_elements)?;
    for r in records {
        w.push(r)?;
    }
    w.finish()
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN as usize {
        return Err(Error::format(path, "file shorter than the ARDS header"));
    }
    if &bytes[0..4] != ARDS_MAGIC {
        return Err(Error::format(path, "bad magic, not an ARDS dataset"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != ARDS_VERSION {
        return Err(Error::format(path, format!("unsupported ARDS version {version}")));
    }
    let m = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    if m == 0 {
        return Err(Error::format(path, "header announces zero elements per record"));
    }
    let body = &bytes[HEADER_LEN as usize..];
    let record_len = m * 8;
    let expected = (count as u128) * (record_len as u128);
    if body.len() as u128 != expected {
        return Err(Error::format(
            path,
            format!("header announces {count} records of {m} elements but body has {} bytes", body.len()),
        ));
    }
    let f32_at = |b: &[u8], i: usize| f32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes")) as f64;
    let records = body
        .chunks_exact(record_len.max(1))
        .take(count as usize)
        .map(|rec| {
            (0..m)
                .map(|k| Complex64::new(f32_at(rec, 8 * k), f32_at(rec, 8 * k + 4)))
                .collect()
        })
        .collect();
    Ok(Dataset {
        num_elements: m,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub index: u64,
    #[serde(flatten)]
    pub scene: Scene,
}

pub struct TruthWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TruthWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn push(&mut self, index: u64, scene: &Scene) -> Result<()> {
        let rec = TruthRecord {
            index,
            scene: scene.clone(),
        };
        let line = serde_json::to_string(&rec).expect("truth records serialize");
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(self) -> Result<()> {
        let path = self.path;
        let file = self.out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        file.sync_all().map_err(|e| Error::io(&path, e))
    }
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TruthRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::AngleDeg;
    use crate::scene_sim::Target;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dataset_roundtrip_at_f32_precision(
            m in 2usize..40,
            vals in prop::collection::vec((-1e3f32..1e3, -1e3f32..1e3), 0..200),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.ards");
            let records: Vec<Vec<Complex64>> = vals
                .chunks_exact(m)
                .map(|c| c.iter().map(|&(r, i)| Complex64::new(r as f64, i as f64)).collect())
                .collect();
            let n = write_dataset(&path, m, &records).unwrap();
            prop_assert_eq!(n, records.len());
            let back = read_dataset(&path).unwrap();
            prop_assert_eq!(back.num_elements, m);
            prop_assert_eq!(back.records, records);
        }
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.ards");
        let rec = vec![vec![Complex64::new(1.0, 2.0); 4]; 3];
        write_dataset(&path, 4, &rec).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format { .. })));

        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format { .. })));

        let mut zero_m = bytes[..16].to_vec();
        zero_m[6] = 0;
        zero_m[7] = 0;
        std::fs::write(&path, &zero_m).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format { .. })));
        assert!(matches!(write_dataset(&path, 0, &[]), Err(Error::Config(_))));

        assert!(matches!(read_dataset(&dir.path().join("missing.ards")), Err(Error::Io { .. })));
    }

    #[test]
    fn record_length_checked() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = DatasetWriter::create(&dir.path().join("d.ards"), 4).unwrap();
        assert!(w.push(&[Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn truth_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.truth.jsonl");
        let scene = Scene {
            targets: vec![Target {
                angle: AngleDeg::new(-12.5).unwrap(),
                rcs_db: 3.25,
                phase_rad: 0.5,
            }],
            snr_db: 15.0,
            seed: 77,
        };
        let mut w = TruthWriter::create(&path).unwrap();
        w.push(0, &scene).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"angle_deg\":-12.5"));
        let back = read_truth(&path).unwrap();
        assert_eq!(back, vec![TruthRecord { index: 0, scene }]);
    }

    #[test]
    fn truth_sidecar_name() {
        assert_eq!(truth_path(Path::new("/a/train.ards")), PathBuf::from("/a/train.truth.jsonl"));
    }
}

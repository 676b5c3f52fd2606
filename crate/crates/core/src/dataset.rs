//! Ground-truth manifests.
//!
//! A manifest has one record per line, `crop_path,label,source_image_id`,
//! optionally preceded by that header line. Lines starting with `#` are
//! comments. The item id of a record is the file stem of its crop path.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotation::{CellClass, ItemId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub item_id: ItemId,
    pub true_label: CellClass,
    pub source_image_id: String,
    pub crop_path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate item id {item_id}")]
    Duplicate { line: u64, item_id: ItemId },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestOptions {
    /// Fail with [`DatasetError::MissingFile`] when a crop does not exist.
    /// Relative crop paths resolve against the manifest's directory.
    pub verify_crops: bool,
}

/// Validated ground truth, indexed by item id.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    records: Vec<GroundTruthRecord>,
    index: HashMap<ItemId, usize>,
}

impl Dataset {
    pub fn from_records(
        records: impl IntoIterator<Item = GroundTruthRecord>,
    ) -> Result<Self, DatasetError> {
        let mut ds = Dataset::default();
        for (i, r) in records.into_iter().enumerate() {
            ds.insert(r, i as u64 + 1)?;
        }
        Ok(ds)
    }

    fn insert(&mut self, record: GroundTruthRecord, line: u64) -> Result<(), DatasetError> {
        if self.index.contains_key(&record.item_id) {
            return Err(DatasetError::Duplicate {
                line,
                item_id: record.item_id,
            });
        }
        self.index.insert(record.item_id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn get(&self, item_id: &ItemId) -> Option<&GroundTruthRecord> {
        self.index.get(item_id).map(|&i| &self.records[i])
    }

    pub fn label_of(&self, item_id: &ItemId) -> Option<CellClass> {
        self.get(item_id).map(|r| r.true_label)
    }

    pub fn records(&self) -> &[GroundTruthRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Items per true class, indexed by [`CellClass::index`].
    pub fn class_histogram(&self) -> [usize; 3] {
        let mut h = [0; 3];
        for r in &self.records {
            h[r.true_label.index()] += 1;
        }
        h
    }

    pub fn write_manifest<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["crop_path", "label", "source_image_id"])?;
        for r in &self.records {
            w.write_record([
                r.crop_path.to_string_lossy().as_ref(),
                r.true_label.as_str(),
                r.source_image_id.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn ingest_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    ingest_dataset_with(path, IngestOptions::default())
}

pub fn ingest_dataset_with(
    path: impl AsRef<Path>,
    options: IngestOptions,
) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DatasetError::MissingFile(path.to_path_buf()),
        _ => DatasetError::Io(e),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    read_manifest(file, base, options)
}

pub fn read_manifest<R: Read>(
    reader: R,
    base: &Path,
    options: IngestOptions,
) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut ds = Dataset::default();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DatasetError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if i == 0 && record.get(0) == Some("crop_path") {
            continue;
        }
        if record.len() != 3 {
            return Err(DatasetError::Parse {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let crop_path = PathBuf::from(&record[0]);
        let item_id = crop_path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty())
            .map(ItemId::from)
            .ok_or_else(|| DatasetError::Parse {
                line,
                message: format!("cannot derive an item id from {:?}", &record[0]),
            })?;
        let true_label: CellClass = record[1].parse().map_err(|e| DatasetError::Parse {
            line,
            message: format!("{e}"),
        })?;
        if options.verify_crops {
            let resolved = if crop_path.is_absolute() {
                crop_path.clone()
            } else {
                base.join(&crop_path)
            };
            if !resolved.exists() {
                return Err(DatasetError::MissingFile(resolved));
            }
        }
        ds.insert(
            GroundTruthRecord {
                item_id,
                true_label,
                source_image_id: record[2].to_string(),
                crop_path,
            },
            line,
        )?;
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset, DatasetError> {
        read_manifest(text.as_bytes(), Path::new("."), IngestOptions::default())
    }

    #[test]
    fn three_line_manifest() {
        let ds = parse(
            "crops/a.png,circular,img1\n\
             crops/b.png,elongated,img1\n\
             crops/c.png,other,img2\n",
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.label_of(&"b".into()), Some(CellClass::Elongated));
        assert_eq!(ds.class_histogram(), [1, 1, 1]);
    }

    #[test]
    fn header_and_comments_are_skipped() {
        let ds = parse("crop_path,label,source_image_id\n# note\nx.png,other,s\n").unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn duplicate_item_is_named() {
        let err = parse("a.png,circular,s1\nsub/a.png,other,s2\n").unwrap_err();
        match err {
            DatasetError::Duplicate { line, item_id } => {
                assert_eq!(line, 2);
                assert_eq!(item_id, ItemId::from("a"));
                assert!(DatasetError::Duplicate { line, item_id }
                    .to_string()
                    .contains("duplicate item id a"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line() {
        let err = parse("a.png,circular,s1\nb.png,round,s1\n").unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 2, .. }));
        let err = parse("a.png,circular\n").unwrap_err();
        assert!(matches!(err, DatasetError::Parse { line: 1, .. }));
    }

    #[test]
    fn missing_manifest_and_crops() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            ingest_dataset(&missing),
            Err(DatasetError::MissingFile(p)) if p == missing
        ));
        let manifest = dir.path().join("m.csv");
        std::fs::write(&manifest, "a.png,circular,s\n").unwrap();
        assert_eq!(ingest_dataset(&manifest).unwrap().len(), 1);
        assert!(matches!(
            ingest_dataset_with(&manifest, IngestOptions { verify_crops: true }),
            Err(DatasetError::MissingFile(_))
        ));
        std::fs::write(dir.path().join("a.png"), b"").unwrap();
        assert!(ingest_dataset_with(&manifest, IngestOptions { verify_crops: true }).is_ok());
    }

    #[test]
    fn class_balance_manifest() {
        let mut text = String::new();
        for (class, n) in [("circular", 617), ("elongated", 181), ("other", 50)] {
            for i in 0..n {
                text.push_str(&format!("crops/{class}_{i}.png,{class},smear_{}\n", i % 30));
            }
        }
        let ds = parse(&text).unwrap();
        assert_eq!(ds.len(), 848);
        assert_eq!(ds.class_histogram(), [617, 181, 50]);
    }

    #[test]
    fn manifest_round_trip() {
        let ds = parse("a.png,circular,s1\nb.png,other,s2\n").unwrap();
        let mut buf = Vec::new();
        ds.write_manifest(&mut buf).unwrap();
        let again = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again.records(), ds.records());
    }
}

//! Model outputs as read from prediction files.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::image::SoftMask;

/// Largest allowed gap between a stated `seg_max` and the maximum of the
/// stored segmentation map (one 8-bit quantization step).
pub const SEG_MAX_TOLERANCE: f64 = 1.0 / 255.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    pub cls_score: f64,
    /// Maximum pixel of the segmentation output.
    pub seg_max: f64,
    pub seg_map: Option<SoftMask>,
}

fn check_score(what: &'static str, id: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("sample {id}: {v} outside [0, 1]")))
    }
}

impl PredictionRecord {
    /// A record with scores only.
    pub fn new(id: impl Into<String>, cls_score: f64, seg_max: f64) -> Result<Self> {
        let id = id.into();
        check_score("cls_score", &id, cls_score)?;
        check_score("seg_max", &id, seg_max)?;
        Ok(PredictionRecord { id, cls_score, seg_max, seg_map: None })
    }

    /// A record whose `seg_max` is taken from the map.
    pub fn with_map(id: impl Into<String>, cls_score: f64, seg_map: SoftMask) -> Result<Self> {
        let id = id.into();
        check_score("cls_score", &id, cls_score)?;
        Ok(PredictionRecord { id, cls_score, seg_max: seg_map.max(), seg_map: Some(seg_map) })
    }
}

#[derive(Deserialize)]
struct Row {
    id: String,
    cls_score: f64,
    seg_max: f64,
    #[serde(default)]
    seg_path: Option<String>,
}

/// One run's predictions keyed by sample id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictionSet {
    records: BTreeMap<String, PredictionRecord>,
}

impl PredictionSet {
    pub fn new(records: impl IntoIterator<Item = PredictionRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            if map.contains_key(&r.id) {
                return Err(Error::invalid("predictions", format!("duplicate prediction for sample {}", r.id)));
            }
            map.insert(r.id.clone(), r);
        }
        Ok(PredictionSet { records: map })
    }

    pub fn get(&self, id: &str) -> Option<&PredictionRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.records.values()
    }

    /// Reads `id,cls_score,seg_max[,seg_path]`. Segmentation maps are 8-bit
    /// PNGs resolved against the CSV's directory; their maximum replaces the
    /// stated `seg_max` after a consistency check.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let dir = path.parent().unwrap_or(Path::new(""));
        let mut records = BTreeMap::new();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let line = records.len() + 2;
            let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line, message };
            if records.contains_key(&row.id) {
                return Err(Error::DuplicateId { path: path.to_path_buf(), line, id: row.id });
            }
            let record = match row.seg_path.as_deref().filter(|p| !p.is_empty()) {
                None => PredictionRecord::new(row.id.clone(), row.cls_score, row.seg_max),
                Some(p) => {
                    let map = SoftMask::load_png(&dir.join(p))?;
                    if (map.max() - row.seg_max).abs() > SEG_MAX_TOLERANCE + 1e-12 {
                        return Err(parse_err(format!(
                            "seg_max {} disagrees with maximum {} of {p}",
                            row.seg_max,
                            map.max()
                        )));
                    }
                    PredictionRecord::with_map(row.id.clone(), row.cls_score, map)
                }
            }
            .map_err(|e| parse_err(e.to_string()))?;
            records.insert(row.id, record);
        }
        Ok(PredictionSet { records })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse { path: path.to_path_buf(), line, message: format!("{kind:?}") },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn loads_scores_and_maps() {
        let dir = tempfile::tempdir().unwrap();
        let map = SoftMask::new(2, 2, vec![0.0, 0.2, 0.8, 0.4]).unwrap();
        map.save_png(&dir.path().join("a.png")).unwrap();
        let csv = dir.path().join("run.csv");
        fs::write(&csv, "id,cls_score,seg_max,seg_path\na,0.9,0.8,a.png\nb,0.1,0.3,\n").unwrap();
        let set = PredictionSet::load_csv(&csv).unwrap();
        assert_eq!(set.len(), 2);
        let a = set.get("a").unwrap();
        assert!((a.seg_max - 204.0 / 255.0).abs() < 1e-12);
        assert!(a.seg_map.is_some());
        assert_eq!(set.get("b").unwrap().seg_max, 0.3);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        SoftMask::new(1, 1, vec![0.5]).unwrap().save_png(&dir.path().join("m.png")).unwrap();
        let cases = [
            "id,cls_score,seg_max\na,0.9,0.8\na,0.1,0.1\n",
            "id,cls_score,seg_max\na,1.5,0.8\n",
            "id,cls_score,seg_max\na,x,0.8\n",
            "id,cls_score,seg_max,seg_path\na,0.5,0.9,m.png\n",
        ];
        for (i, text) in cases.iter().enumerate() {
            let p = dir.path().join(format!("{i}.csv"));
            fs::write(&p, text).unwrap();
            let err = PredictionSet::load_csv(&p).unwrap_err();
            assert!(!err.is_io(), "{i}: {err}");
        }
        assert!(PredictionSet::load_csv(&dir.path().join("missing.csv")).unwrap_err().is_io());
    }

    #[test]
    fn duplicate_records_rejected() {
        let r = PredictionRecord::new("x", 0.1, 0.2).unwrap();
        assert!(PredictionSet::new([r.clone(), r]).is_err());
        assert!(PredictionRecord::new("x", 0.1, -0.2).is_err());
    }
}

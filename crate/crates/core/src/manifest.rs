//! Line-delimited JSON dataset manifests.
//!
//! The first line is a header `{"name", "split", "version": 1}`; each following
//! non-blank line is one sample record. Paths inside records are stored as
//! written and resolved against the manifest's directory by callers.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// Non-dysplastic Barrett's esophagus.
    Ndbe,
    Neoplasia,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::Ndbe => 0,
            Label::Neoplasia => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Neoplasia
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Ndbe),
            1 => Some(Label::Neoplasia),
            _ => None,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Image,
    HQFrame,
    MQFrame,
    LQFrame,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Image, Tier::HQFrame, Tier::MQFrame, Tier::LQFrame];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Image => "Image",
            Tier::HQFrame => "HQFrame",
            Tier::MQFrame => "MQFrame",
            Tier::LQFrame => "LQFrame",
        }
    }

    pub fn parse(s: &str) -> Option<Tier> {
        Tier::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Paths of one expert's Lower- and Higher-Likelihood delineation masks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelineationRef {
    pub expert_id: String,
    pub ll_path: String,
    pub hl_path: String,
}

/// Paths of precomputed consensus ground-truth masks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusRefs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plausible: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub patient_id: String,
    pub label: Label,
    pub tier: Tier,
    pub image_path: String,
    /// Central active region `[x, y, w, h]` of the raw frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<[u32; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delineations: Option<Vec<DelineationRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusRefs>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    name: String,
    split: Split,
    version: u32,
}

/// Same shape as [`SampleRecord`] but with a free-form tier so that unknown
/// tiers get their own error.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    patient_id: String,
    label: Label,
    tier: String,
    image_path: String,
    #[serde(default)]
    crop: Option<[u32; 4]>,
    #[serde(default)]
    delineations: Option<Vec<DelineationRef>>,
    #[serde(default)]
    consensus: Option<ConsensusRefs>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub split: Split,
    pub records: Vec<SampleRecord>,
}

impl DatasetManifest {
    /// Builds a manifest, rejecting duplicate ids.
    pub fn new(name: impl Into<String>, split: Split, records: Vec<SampleRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId {
                    path: PathBuf::new(),
                    line: i + 2,
                    id: r.id.clone(),
                });
            }
        }
        Ok(Self { name: name.into(), split, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn patients(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.patient_id.as_str()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            name: self.name.clone(),
            split: self.split,
            version: MANIFEST_VERSION,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, htext) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "empty manifest (missing header)".into(),
        })?;
        let header: Header = serde_json::from_str(htext).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: hline + 1,
            message: format!("header: {e}"),
        })?;
        if header.version != MANIFEST_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: hline + 1,
                message: format!("unsupported manifest version {}", header.version),
            });
        }

        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (idx, text) in lines {
            let line = idx + 1;
            let raw: RawRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            let tier = Tier::parse(&raw.tier).ok_or_else(|| Error::UnknownTier {
                path: path.to_path_buf(),
                line,
                tier: raw.tier.clone(),
            })?;
            if !seen.insert(raw.id.clone()) {
                return Err(Error::DuplicateId {
                    path: path.to_path_buf(),
                    line,
                    id: raw.id,
                });
            }
            records.push(SampleRecord {
                id: raw.id,
                patient_id: raw.patient_id,
                label: raw.label,
                tier,
                image_path: raw.image_path,
                crop: raw.crop,
                delineations: raw.delineations,
                consensus: raw.consensus,
            });
        }
        Ok(Self {
            name: header.name,
            split: header.split,
            records,
        })
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DatasetManifest::parse(&text, path)
}

pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(manifest.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
}

/// Resolves a path stored in a manifest relative to the manifest file.
pub fn resolve_path(manifest_path: &Path, stored: &str) -> PathBuf {
    let p = Path::new(stored);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    manifest_path.parent().unwrap_or(Path::new("")).join(p)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitViolation {
    pub patient_id: String,
    /// `(manifest name, split)` of every manifest containing the patient.
    pub manifests: Vec<(String, Split)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    pub violations: Vec<SplitViolation>,
}

impl SplitReport {
    pub fn is_disjoint(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Split role -> manifests it appears in, for one patient.
type PatientRoles = BTreeMap<u8, Vec<(String, Split)>>;

/// Lists every patient occurring in more than one of train / validation /
/// test. Overlap between two test manifests is allowed.
pub fn validate_patient_split(
    train: &DatasetManifest,
    val: &DatasetManifest,
    tests: &[DatasetManifest],
) -> SplitReport {
    let mut seen: BTreeMap<&str, PatientRoles> = BTreeMap::new();
    let roles = [(0u8, train), (1u8, val)]
        .into_iter()
        .chain(tests.iter().map(|t| (2u8, t)));
    for (role, m) in roles {
        for p in m.patients() {
            seen.entry(p)
                .or_default()
                .entry(role)
                .or_default()
                .push((m.name.clone(), m.split));
        }
    }
    let violations = seen
        .into_iter()
        .filter(|(_, roles)| roles.len() > 1)
        .map(|(patient, roles)| SplitViolation {
            patient_id: patient.to_string(),
            manifests: roles.into_values().flatten().collect(),
        })
        .collect();
    SplitReport { violations }
}

//! Ground-truth masks for manifest records.

use std::collections::BTreeMap;
use std::path::Path;

use crate::consensus::{build_consensus, select_best_pair, ConsensusSet, ExpertDelineation, GtStrategy};
use crate::error::{Error, Result};
use crate::image::BinaryMask;
use crate::manifest::{resolve_path, DatasetManifest, SampleRecord};

/// Loads every expert delineation listed for a record.
pub fn load_delineations(record: &SampleRecord, manifest_path: &Path) -> Result<Vec<ExpertDelineation>> {
    let Some(refs) = &record.delineations else {
        return Ok(Vec::new());
    };
    refs.iter()
        .map(|d| {
            let ll = BinaryMask::load_png(&resolve_path(manifest_path, &d.ll_path))?;
            let hl = BinaryMask::load_png(&resolve_path(manifest_path, &d.hl_path))?;
            ExpertDelineation::new(d.expert_id.clone(), ll, hl)
                .map_err(|e| Error::invalid("delineation", format!("sample {}: {e}", record.id)))
        })
        .collect()
}

/// Consensus masks from a record's delineations. With three experts the pair
/// with the best HL agreement is used; a single expert is paired with itself.
pub fn consensus_from_delineations(id: &str, ds: &[ExpertDelineation]) -> Result<Option<ConsensusSet>> {
    match ds {
        [] => Ok(None),
        [a] => build_consensus(a, a).map(Some),
        [a, b] => build_consensus(a, b).map(Some),
        [a, b, c] => {
            let ((i, j), _) = select_best_pair(a, b, c)?;
            build_consensus(&ds[i], &ds[j]).map(Some)
        }
        _ => Err(Error::invalid("delineations", format!("sample {id} has {} experts; at most 3 are supported", ds.len()))),
    }
}

fn stored_path(record: &SampleRecord, strategy: GtStrategy) -> Option<&str> {
    let c = record.consensus.as_ref()?;
    match strategy {
        GtStrategy::SoftSpot => c.soft.as_deref(),
        GtStrategy::PlausibleSpot => c.plausible.as_deref(),
        GtStrategy::SweetSpot => c.sweet.as_deref(),
        GtStrategy::HardSpot => c.hard.as_deref(),
        _ => None,
    }
}

/// The evaluation mask of one record, if it has one. Stored consensus masks
/// take precedence over recomputation from delineations.
pub fn ground_truth_mask(record: &SampleRecord, manifest_path: &Path, strategy: GtStrategy) -> Result<Option<BinaryMask>> {
    let pick = |set: ConsensusSet| match strategy {
        GtStrategy::SoftSpot => set.soft,
        GtStrategy::PlausibleSpot => set.plausible,
        GtStrategy::SweetSpot => set.sweet,
        _ => set.hard,
    };
    if !matches!(strategy, GtStrategy::SoftSpot | GtStrategy::PlausibleSpot | GtStrategy::SweetSpot | GtStrategy::HardSpot) {
        return Err(Error::invalid(
            "evaluation ground truth",
            format!("{strategy} is a training strategy; use soft, plausible, sweet or hard"),
        ));
    }
    if let Some(p) = stored_path(record, strategy) {
        return BinaryMask::load_png(&resolve_path(manifest_path, p)).map(Some);
    }
    let ds = load_delineations(record, manifest_path)?;
    Ok(consensus_from_delineations(&record.id, &ds)?.map(pick))
}

/// Masks of every GT-bearing record in the manifest.
pub fn load_ground_truth(
    manifest: &DatasetManifest,
    manifest_path: &Path,
    strategy: GtStrategy,
) -> Result<BTreeMap<String, BinaryMask>> {
    let mut out = BTreeMap::new();
    for r in &manifest.records {
        if let Some(m) = ground_truth_mask(r, manifest_path, strategy)? {
            out.insert(r.id.clone(), m);
        }
    }
    Ok(out)
}

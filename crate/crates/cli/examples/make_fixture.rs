//! Writes the 12-image end-to-end fixture used by the cli tests.
//!
//! `cargo run -p cade-cli --example make_fixture -- crates/cli/tests/fixtures/mini12`
//!
//! Images 01-06 are neoplastic and carry two experts' delineations; 07-12 are
//! non-dysplastic. Two models ("ref", "baseline") each have two prediction
//! runs with segmentation maps for the neoplastic images.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cade_core::manifest::{save_manifest, DelineationRef, SampleRecord};
use cade_core::{BinaryMask, DatasetManifest, Label, RgbImage, SoftMask, Split, Tier};

const SIDE: usize = 32;

fn rect(x0: usize, x1: usize, y0: usize, y1: usize) -> BinaryMask {
    BinaryMask::from_fn(SIDE, SIDE, |x, y| (x0..x1).contains(&x) && (y0..y1).contains(&y))
}

/// Classification scores of the six positives then the six negatives.
struct Run {
    name: &'static str,
    pos_cls: [f64; 6],
    neg_cls: [f64; 6],
    neg_seg: [f64; 6],
    /// Rows of the plausible square the segmentation map covers.
    seg_rows: usize,
}

const RUNS: [Run; 4] = [
    Run {
        name: "ref_run1",
        pos_cls: [0.95, 0.9, 0.85, 0.8, 0.75, 0.7],
        neg_cls: [0.3, 0.25, 0.2, 0.15, 0.1, 0.05],
        neg_seg: [0.3, 0.25, 0.2, 0.15, 0.1, 0.05],
        seg_rows: 12,
    },
    Run {
        name: "ref_run2",
        pos_cls: [0.95, 0.9, 0.85, 0.8, 0.75, 0.2],
        neg_cls: [0.3, 0.25, 0.22, 0.15, 0.1, 0.05],
        neg_seg: [0.3, 0.25, 0.2, 0.15, 0.1, 0.05],
        seg_rows: 6,
    },
    Run {
        name: "baseline_run1",
        pos_cls: [0.9, 0.8, 0.7, 0.6, 0.5, 0.4],
        neg_cls: [0.45, 0.35, 0.3, 0.2, 0.1, 0.05],
        neg_seg: [0.3, 0.25, 0.2, 0.15, 0.1, 0.05],
        seg_rows: 9,
    },
    Run {
        name: "baseline_run2",
        pos_cls: [0.9, 0.8, 0.7, 0.6, 0.5, 0.4],
        neg_cls: [0.55, 0.45, 0.3, 0.2, 0.1, 0.05],
        neg_seg: [0.3, 0.25, 0.2, 0.15, 0.1, 0.05],
        seg_rows: 3,
    },
];

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "crates/cli/tests/fixtures/mini12".into());
    let root = Path::new(&out);
    for dir in ["images", "delineations", "preds"] {
        fs::create_dir_all(root.join(dir)).unwrap();
    }
    let mut records = Vec::new();
    for i in 1..=12usize {
        let id = format!("img{i:02}");
        let positive = i <= 6;
        let tint = 0.05 * i as f64;
        let data = (0..SIDE * SIDE)
            .flat_map(|p| {
                let (x, y) = ((p % SIDE) as f64 / SIDE as f64, (p / SIDE) as f64 / SIDE as f64);
                [0.55 + 0.3 * x, 0.3 + 0.2 * y + tint / 2.0, 0.25 + tint / 3.0]
            })
            .collect();
        RgbImage::new(SIDE, SIDE, data).unwrap().save_png(&root.join(format!("images/{id}.png"))).unwrap();
        let mut delineations = None;
        if positive {
            let o = i - 1;
            let masks = [
                ("e1", rect(4 + o, 20 + o, 4 + o, 20 + o), rect(8 + o, 14 + o, 8 + o, 14 + o)),
                ("e2", rect(8 + o, 24 + o, 8 + o, 24 + o), rect(10 + o, 16 + o, 10 + o, 16 + o)),
            ];
            let mut refs = Vec::new();
            for (expert, ll, hl) in masks {
                let (ll_path, hl_path) =
                    (format!("delineations/{id}_{expert}_ll.png"), format!("delineations/{id}_{expert}_hl.png"));
                ll.save_png(&root.join(&ll_path)).unwrap();
                hl.save_png(&root.join(&hl_path)).unwrap();
                refs.push(DelineationRef { expert_id: expert.into(), ll_path, hl_path });
            }
            delineations = Some(refs);
        }
        records.push(SampleRecord {
            id,
            patient_id: format!("P{i:02}"),
            label: if positive { Label::Neoplasia } else { Label::Ndbe },
            tier: Tier::Image,
            image_path: format!("images/img{i:02}.png"),
            crop: None,
            delineations,
            consensus: None,
        });
    }
    let manifest = DatasetManifest::new("mini12", Split::Test, records).unwrap();
    save_manifest(&manifest, &root.join("manifest.jsonl")).unwrap();

    for run in &RUNS {
        let dir = root.join("preds").join(run.name);
        fs::create_dir_all(&dir).unwrap();
        let mut csv = String::from("id,cls_score,seg_max,seg_path\n");
        for i in 1..=6usize {
            let o = i - 1;
            let seg = rect(8 + o, 20 + o, 8 + o, 8 + o + run.seg_rows);
            let file = format!("{}/img{i:02}.png", run.name);
            SoftMask::from(&seg).save_png(&root.join("preds").join(&file)).unwrap();
            writeln!(csv, "img{i:02},{},1,{file}", run.pos_cls[i - 1]).unwrap();
        }
        for i in 7..=12usize {
            writeln!(csv, "img{i:02},{},{},", run.neg_cls[i - 7], run.neg_seg[i - 7]).unwrap();
        }
        fs::write(root.join("preds").join(format!("{}.csv", run.name)), csv).unwrap();
    }
    println!("fixture written to {}", root.display());
}

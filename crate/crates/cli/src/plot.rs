//! Bar plots with error bars and an optional dashed reference band, as SVG.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::{write_file, CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Bar {
    pub label: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub bars: Vec<Bar>,
    /// Reference `(mean, std)`: a dashed line with a shaded ±std band.
    pub reference: Option<(f64, f64)>,
    pub y_range: (f64, f64),
}

const HEIGHT: f64 = 360.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 300.0;
const LEFT: f64 = 60.0;
const SLOT: f64 = 80.0;
const BAR: f64 = 48.0;
const CAP: f64 = 8.0;

impl PlotSpec {
    pub fn validate(&self) -> CliResult<()> {
        let (lo, hi) = self.y_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::Validation(format!("plot y-range [{lo}, {hi}] is empty")));
        }
        let mut seen = BTreeSet::new();
        for b in &self.bars {
            if !seen.insert(&b.label) {
                return Err(CliError::Validation(format!("duplicate bar label {:?}", b.label)));
            }
            if !(b.mean.is_finite() && b.std.is_finite() && b.std >= 0.0) {
                return Err(CliError::Validation(format!("bar {:?} needs a finite mean and std >= 0", b.label)));
            }
        }
        if let Some((m, s)) = self.reference {
            if !(m.is_finite() && s.is_finite() && s >= 0.0) {
                return Err(CliError::Validation("reference needs a finite mean and std >= 0".into()));
            }
        }
        Ok(())
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        BOTTOM - t * (BOTTOM - TOP)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// The SVG document. Identical specs give identical bytes.
pub fn render_svg(spec: &PlotSpec) -> CliResult<String> {
    spec.validate()?;
    let width = LEFT + SLOT * spec.bars.len().max(1) as f64 + 20.0;
    let right = width - 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{HEIGHT:.0}" viewBox="0 0 {width:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(&spec.title));
    let _ = writeln!(s, r#"<path class="axis" d="M{LEFT:.1} {TOP:.1} V{BOTTOM:.1} H{right:.1}" stroke="black" fill="none"/>"#);
    let (lo, hi) = spec.y_range;
    for i in 0..=5 {
        let v = lo + (hi - lo) * i as f64 / 5.0;
        let y = spec.y(v);
        let _ = writeln!(
            s,
            r#"<path class="tick" d="M{:.1} {y:.2} H{LEFT:.1}" stroke="black"/><text x="{:.1}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    if let Some((m, sd)) = spec.reference {
        let (y0, y1) = (spec.y(m + sd), spec.y(m - sd));
        let _ = writeln!(
            s,
            r##"<path class="reference-band" d="M{LEFT:.1} {y0:.2} H{right:.1} V{y1:.2} H{LEFT:.1} Z" fill="#888888" fill-opacity="0.25" stroke="none"/>"##
        );
        let ym = spec.y(m);
        let _ = writeln!(
            s,
            r##"<line class="reference" x1="{LEFT:.1}" y1="{ym:.2}" x2="{right:.1}" y2="{ym:.2}" stroke="#444444" stroke-dasharray="6 4"/>"##
        );
    }
    for (i, b) in spec.bars.iter().enumerate() {
        let cx = LEFT + SLOT * (i as f64 + 0.5);
        let top = spec.y(b.mean);
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{:.1}" y="{top:.2}" width="{BAR:.1}" height="{:.2}" fill="#4c72b0"/>"##,
            cx - BAR / 2.0,
            BOTTOM - top
        );
        let (e0, e1) = (spec.y(b.mean + b.std), spec.y(b.mean - b.std));
        let _ = writeln!(
            s,
            r#"<path class="error-bar" d="M{cx:.1} {e0:.2} V{e1:.2} M{:.1} {e0:.2} H{:.1} M{:.1} {e1:.2} H{:.1}" stroke="black" fill="none"/>"#,
            cx - CAP / 2.0,
            cx + CAP / 2.0,
            cx - CAP / 2.0,
            cx + CAP / 2.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            BOTTOM + 16.0,
            escape(&b.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_barplot(spec: &PlotSpec, path: &Path) -> CliResult<()> {
    let svg = render_svg(spec)?;
    write_file(path, svg.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(stds: [f64; 2], reference: bool) -> PlotSpec {
        PlotSpec {
            title: "AUROC <BM Test>".into(),
            bars: vec![
                Bar { label: "ours".into(), mean: 0.97, std: stds[0] },
                Bar { label: "other".into(), mean: 0.91, std: stds[1] },
            ],
            reference: reference.then_some((0.95, 0.01)),
            y_range: (0.5, 1.0),
        }
    }

    #[test]
    fn element_counts() {
        let svg = render_svg(&spec([0.01, 0.02], true)).unwrap();
        assert_eq!(svg.matches("<rect").count(), 2);
        assert_eq!(svg.matches(r#"class="error-bar""#).count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert_eq!(svg.matches(r#"class="reference-band""#).count(), 1);
        assert!(svg.contains("&lt;BM Test&gt;"));
        let plain = render_svg(&spec([0.01, 0.02], false)).unwrap();
        assert_eq!(plain.matches("stroke-dasharray").count(), 0);
    }

    #[test]
    fn zero_std_still_drawn() {
        let svg = render_svg(&spec([0.0, 0.0], false)).unwrap();
        assert_eq!(svg.matches(r#"class="error-bar""#).count(), 2);
    }

    #[test]
    fn byte_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        render_barplot(&spec([0.01, 0.03], true), &a).unwrap();
        render_barplot(&spec([0.01, 0.03], true), &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec([0.01, 0.01], false);
        s.bars[1].label = "ours".into();
        assert!(render_svg(&s).is_err());
        let mut s = spec([-0.01, 0.01], false);
        assert!(render_svg(&s).is_err());
        s = spec([0.01, 0.01], false);
        s.y_range = (1.0, 1.0);
        assert!(render_svg(&s).is_err());
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = render_barplot(&spec([0.0, 0.0], false), &blocker.join("p.svg")).unwrap_err();
        assert_eq!(err.exit_code(), crate::EXIT_IO);
    }
}

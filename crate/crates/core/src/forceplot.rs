//! Static SVG forceplots of decomposed scores.
//!
//! Each entry is a waterfall of three signed segments: the standalone value (gray), the
//! interaction surplus (green) and the negated dependencies (purple). Segments point up
//! when they add to the score and down when they subtract. A horizontal line marks the
//! entry's score. Two slim bars to the right show the negated cross-predictability and
//! covariance parts of the dependencies.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DipError, Result};
use crate::report::{write_atomic, Report, ReportBody};

pub const WIDTH: f64 = 1000.0;
pub const HEIGHT: f64 = 600.0;
pub const GRAY: &str = "#9e9e9e";
pub const GREEN: &str = "#2e7d32";
pub const PURPLE: &str = "#6a1b9a";
/// Lighter purples for the slim cross-predictability and covariance bars.
pub const PURPLE_CP: &str = "#9c4dcc";
pub const PURPLE_CO: &str = "#ce93d8";

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 90.0;

/// Numbers drawn for one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceEntry {
    pub label: String,
    pub standalone: f64,
    pub interaction: f64,
    pub dependencies: f64,
    pub cross_pred: f64,
    pub covariance: f64,
    pub score: f64,
}

/// Entries of a report in drawing order. Two-group decompositions show `v_j + v_jbar` as standalone.
pub fn force_entries(report: &Report) -> Vec<ForceEntry> {
    let from_terms = |label: String, t: &crate::dip::DipTerms<f64>| ForceEntry {
        label,
        standalone: t.v_j + t.v_jbar,
        interaction: t.interaction_surplus,
        dependencies: t.dep,
        cross_pred: t.cross_pred,
        covariance: t.covariance,
        score: t.v_joint,
    };
    match &report.body {
        ReportBody::Decompose { result } => vec![from_terms("J vs rest".into(), &result.terms)],
        ReportBody::Pairwise { cells } => cells
            .iter()
            .map(|c| from_terms(format!("{} | {}", c.names.0, c.names.1), &c.result.terms))
            .collect(),
        ReportBody::Loco { report, .. } => report
            .entries
            .iter()
            .map(|e| ForceEntry {
                label: e.name.clone(),
                standalone: e.standalone,
                interaction: e.interaction,
                dependencies: e.dependencies,
                cross_pred: e.cross_pred,
                covariance: e.covariance,
                score: e.loco,
            })
            .collect(),
        // SAGE averages do not carry a split of the dependencies
        ReportBody::Sage { report } => report
            .entries
            .iter()
            .map(|e| ForceEntry {
                label: e.name.clone(),
                standalone: e.standalone,
                interaction: e.avg_interaction,
                dependencies: e.avg_dependencies,
                cross_pred: 0.0,
                covariance: 0.0,
                score: e.phi,
            })
            .collect(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Scale {
    lo: f64,
    hi: f64,
}

impl Scale {
    fn y(&self, v: f64) -> f64 {
        let plot = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        MARGIN_TOP + (self.hi - v) / (self.hi - self.lo) * plot
    }
}

fn rect(svg: &mut String, class: &str, color: &str, x: f64, w: f64, from: f64, to: f64, s: &Scale, title: &str) {
    let (top, bottom) = (s.y(from.max(to)), s.y(from.min(to)));
    let _ = writeln!(
        svg,
        r#"<rect class="{class}" x="{x:.2}" y="{top:.2}" width="{w:.2}" height="{:.2}" fill="{color}"><title>{}</title></rect>"#,
        bottom - top,
        escape(title)
    );
}

/// Render the forceplot of `report` as an SVG document.
pub fn forceplot_svg(report: &Report) -> Result<String> {
    let entries = force_entries(report);
    if entries.is_empty() {
        return Err(DipError::EmptyData("report has no entries to plot"));
    }
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for e in &entries {
        let steps = [e.standalone, e.standalone + e.interaction, e.standalone + e.interaction - e.dependencies];
        for v in steps.into_iter().chain([e.score, -e.cross_pred, -e.covariance]) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let s = Scale { lo: lo - pad, hi: hi + pad };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect class="background" x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let units = if report.normalized { "share of Var(Y)" } else { "raw units" };
    let _ = writeln!(svg, r#"<text x="{MARGIN_LEFT}" y="24" font-size="14">{} ({units})</text>"#, escape(&report.command));
    let zero = s.y(0.0);
    let _ = writeln!(
        svg,
        r##"<line class="axis" x1="{MARGIN_LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#000" stroke-width="1"/>"##,
        WIDTH - MARGIN_RIGHT
    );
    for tick in [s.lo, 0.0, s.hi] {
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{tick:.3}</text>"#,
            MARGIN_LEFT - 6.0,
            s.y(tick) + 4.0
        );
    }

    let slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / entries.len() as f64;
    for (i, e) in entries.iter().enumerate() {
        let x0 = MARGIN_LEFT + i as f64 * slot;
        let main_x = x0 + 0.12 * slot;
        let main_w = 0.5 * slot;
        let _ = writeln!(svg, r#"<g class="entry" data-label="{}">"#, escape(&e.label));
        let a = e.standalone;
        let b = a + e.interaction;
        let c = b - e.dependencies;
        rect(&mut svg, "standalone", GRAY, main_x, main_w, 0.0, a, &s, &format!("standalone {a:.4}"));
        rect(&mut svg, "interaction", GREEN, main_x, main_w, a, b, &s, &format!("interaction {:.4}", e.interaction));
        rect(&mut svg, "dependencies", PURPLE, main_x, main_w, b, c, &s, &format!("dependencies {:.4}", e.dependencies));
        let slim_w = 0.1 * slot;
        let slim_x = main_x + main_w + 0.04 * slot;
        rect(&mut svg, "cross-pred", PURPLE_CP, slim_x, slim_w, 0.0, -e.cross_pred, &s, &format!("cross-predictability {:.4}", e.cross_pred));
        rect(&mut svg, "covariance", PURPLE_CO, slim_x + slim_w, slim_w, 0.0, -e.covariance, &s, &format!("covariance {:.4}", e.covariance));
        let y = s.y(e.score);
        let _ = writeln!(
            svg,
            r##"<line class="joint-line" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#000" stroke-width="2" stroke-dasharray="6 3"/>"##,
            x0 + 0.06 * slot,
            x0 + 0.94 * slot
        );
        let lx = x0 + 0.5 * slot;
        let ly = HEIGHT - MARGIN_BOTTOM + 16.0;
        let _ = writeln!(
            svg,
            r#"<text class="label" x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-35 {lx:.2} {ly:.2})">{}</text>"#,
            escape(&e.label)
        );
        let _ = writeln!(svg, "</g>");
    }
    let legend_y = HEIGHT - 14.0;
    for (k, (name, color)) in [("standalone", GRAY), ("interaction", GREEN), ("dependencies", PURPLE), ("cross-pred", PURPLE_CP), ("covariance", PURPLE_CO)]
        .iter()
        .enumerate()
    {
        let x = MARGIN_LEFT + k as f64 * 150.0;
        let _ = writeln!(svg, r#"<rect class="legend" x="{x}" y="{:.2}" width="12" height="12" fill="{color}"/>"#, legend_y - 10.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{legend_y:.2}">{name}</text>"#, x + 16.0);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render_forceplot(report: &Report, out: impl AsRef<Path>) -> Result<()> {
    write_atomic(out, forceplot_svg(report)?.as_bytes())
}

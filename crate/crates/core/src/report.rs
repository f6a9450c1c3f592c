//! Aggregated-evidence reports: the summary table and the forest plot.
//!
//! The forest plot follows the synthesis reading of a meta-analysis
//! plot: evidence rows show the raw relative-improvement estimate with
//! its confidence interval, while the aggregated row per effect sits at
//! the center of the decided intensity bands and spans their extent.
//! Rendering is deliberately hand-rolled (no templating, fixed number
//! formatting) so that identical inputs always produce identical bytes.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::aggregation::{effect_groups, AggregatedModel, AggregationRecord, JoinMap};
use crate::estimation::IntensityThresholds;
use crate::model::{EvidenceModel, Glossary};
use crate::scale::HypothesisSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("nothing to render: no evidence models were given")]
    NothingToRender,
}

/// Fixed metadata stamped into every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMeta {
    /// Generation timestamp (callers may pin it for reproducible runs).
    pub generated_at: String,
    /// Name of the generating tool.
    pub tool: String,
}

/// A raw-evidence point estimate: mean improvement and its 95% CI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PointEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One evidence line of a forest group.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvidenceRow {
    /// Evidence model id.
    pub label: String,
    pub samples: usize,
    pub belief: f64,
    /// Absent when the study published no raw statistics; the row is
    /// then rendered with a "no raw data" marker.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<PointEstimate>,
}

/// The synthesized line of a forest group, placed on band geometry
/// rather than raw statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregatedRow {
    pub intensity: HypothesisSet,
    pub belief: f64,
    pub conflict: f64,
    /// Total samples across the group's evidence rows.
    pub samples: usize,
    /// Center of the decided intensity bands.
    pub mean: f64,
    /// Extent of the decided intensity bands.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ForestGroup {
    pub effect: String,
    pub rows: Vec<EvidenceRow>,
    pub aggregated: AggregatedRow,
}

/// Everything a renderer needs; rendering is a pure function of this.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportDocument {
    pub title: String,
    pub thresholds: IntensityThresholds,
    pub groups: Vec<ForestGroup>,
    pub meta: ReportMeta,
}

/// The improvement interval a single scale point covers on the plot
/// axis. The outer bands extend to the +/-100% plot bounds.
pub fn band_extent(
    thresholds: &IntensityThresholds,
    point: crate::scale::IntensityPoint,
) -> (f64, f64) {
    use crate::scale::IntensityPoint::*;
    let t = thresholds;
    match point {
        StronglyNegative => (-1.0, -t.t_moderate),
        Negative => (-t.t_moderate, -t.t_weak),
        WeaklyNegative => (-t.t_weak, -t.t_indifferent),
        Indifferent => (-t.t_indifferent, t.t_indifferent),
        WeaklyPositive => (t.t_indifferent, t.t_weak),
        Positive => (t.t_weak, t.t_moderate),
        StronglyPositive => (t.t_moderate, 1.0),
    }
}

/// The axis interval covered by a hypothesis set: from the lower edge
/// of its lowest band to the upper edge of its highest.
pub fn set_extent(thresholds: &IntensityThresholds, set: HypothesisSet) -> (f64, f64) {
    let (low, _) = band_extent(thresholds, set.min_point());
    let (_, high) = band_extent(thresholds, set.max_point());
    (low, high)
}

/// Assemble the forest document for an aggregation over `models`.
/// Groups follow the aggregated records (sorted by effect); evidence
/// rows within a group are sorted by model id.
pub fn build_document(
    models: &[EvidenceModel],
    agg: &AggregatedModel,
    glossary: &Glossary,
    joins: &JoinMap,
    thresholds: &IntensityThresholds,
    meta: ReportMeta,
) -> Result<ReportDocument, ReportError> {
    if models.is_empty() {
        return Err(ReportError::NothingToRender);
    }
    let groups_by_effect = effect_groups(models, glossary, joins);
    let mut groups = Vec::with_capacity(agg.records.len());
    for record in &agg.records {
        let contributions = groups_by_effect
            .get(&record.effect_name)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let mut rows: Vec<EvidenceRow> = contributions
            .iter()
            .map(|(model, effect)| EvidenceRow {
                label: model.id.clone(),
                samples: effect.sample_count,
                belief: effect.belief,
                point: effect.stats.as_ref().map(|s| PointEstimate {
                    mean: s.mean,
                    ci_low: s.ci95.0,
                    ci_high: s.ci95.1,
                }),
            })
            .collect();
        rows.sort_by(|a, b| a.label.cmp(&b.label));
        let samples = rows.iter().map(|r| r.samples).sum();
        let (ci_low, ci_high) = set_extent(thresholds, record.intensity);
        groups.push(ForestGroup {
            effect: record.effect_name.clone(),
            rows,
            aggregated: AggregatedRow {
                intensity: record.intensity,
                belief: record.belief,
                conflict: record.conflict,
                samples,
                mean: (ci_low + ci_high) / 2.0,
                ci_low,
                ci_high,
            },
        });
    }
    Ok(ReportDocument {
        title: format!("Effects of {}", agg.cause.name),
        thresholds: *thresholds,
        groups,
        meta,
    })
}

// ---------------------------------------------------------------------
// number formatting
// ---------------------------------------------------------------------

/// Belief as a whole percent ("90%"). Halves round away from zero.
pub fn fmt_belief(value: f64) -> String {
    let percent = (value * 100.0).round();
    if percent == 0.0 {
        "0%".to_string()
    } else {
        format!("{percent}%")
    }
}

/// Conflict with two decimals; exact zero renders as "-".
pub fn fmt_conflict(value: f64) -> String {
    if value == 0.0 {
        "-".to_string()
    } else {
        format!("{value:.2}")
    }
}

/// Signed percent with at most one decimal place and no trailing ".0":
/// 0.24 -> "24%", -0.017 -> "-1.7%". Positive values carry no sign.
pub fn fmt_difference(value: f64) -> String {
    let tenths = (value * 1000.0).round() / 10.0;
    if tenths == 0.0 {
        return "0%".to_string();
    }
    format!("{tenths}%")
}

/// Compact coordinate: two decimals with trailing zeros trimmed, so
/// "362.00" becomes "362" and "12.50" becomes "12.5".
fn coord(value: f64) -> String {
    let mut s = format!("{value:.2}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

// ---------------------------------------------------------------------
// summary table
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryFormat {
    Text,
    Csv,
}

fn summary_cells(record: &AggregationRecord) -> [String; 8] {
    [
        record.effect_name.clone(),
        record.study_ids.join(", "),
        record.study_ids.len().to_string(),
        record.model_count.to_string(),
        record.intensity.notation(),
        fmt_belief(record.belief),
        fmt_conflict(record.conflict),
        fmt_difference(record.difference),
    ]
}

const SUMMARY_HEADERS: [&str; 8] = [
    "Effect",
    "Studies",
    "#Studies",
    "#Models",
    "Intensity",
    "Belief",
    "Conflict",
    "Difference",
];

/// Render the aggregation as a table, one row per effect record.
pub fn render_summary(agg: &AggregatedModel, format: SummaryFormat) -> String {
    match format {
        SummaryFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(SUMMARY_HEADERS)
                .expect("in-memory write");
            for record in &agg.records {
                writer
                    .write_record(summary_cells(record))
                    .expect("in-memory write");
            }
            String::from_utf8(writer.into_inner().expect("in-memory flush"))
                .expect("csv output is UTF-8")
        }
        SummaryFormat::Text => {
            let rows: Vec<[String; 8]> = agg.records.iter().map(summary_cells).collect();
            let mut widths: Vec<usize> = SUMMARY_HEADERS.iter().map(|h| h.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row.iter()) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let write_row = |out: &mut String, cells: &[String]| {
                let mut line = String::new();
                for (i, cell) in cells.iter().enumerate() {
                    if i > 0 {
                        line.push_str("  ");
                    }
                    // Numeric-ish columns right-align, names left-align.
                    if i >= 2 {
                        let _ = write!(line, "{cell:>width$}", width = widths[i]);
                    } else {
                        let _ = write!(line, "{cell:<width$}", width = widths[i]);
                    }
                }
                out.push_str(line.trim_end());
                out.push('\n');
            };
            let headers: Vec<String> = SUMMARY_HEADERS.iter().map(|h| h.to_string()).collect();
            write_row(&mut out, &headers);
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            write_row(&mut out, &rule);
            for row in &rows {
                write_row(&mut out, row);
            }
            out
        }
    }
}

// ---------------------------------------------------------------------
// forest plot, SVG
// ---------------------------------------------------------------------

const MARGIN: f64 = 16.0;
const LABEL_W: f64 = 230.0;
const N_W: f64 = 44.0;
const BELIEF_W: f64 = 56.0;
const PLOT_W: f64 = 420.0;
const ROW_H: f64 = 18.0;
const GROUP_GAP: f64 = 10.0;
const HEADER_H: f64 = 68.0;
const AXIS_H: f64 = 44.0;

fn plot_x0() -> f64 {
    MARGIN + LABEL_W + N_W + BELIEF_W + MARGIN
}

/// Affine axis map: improvement value (clamped to +/-1) to pixel x.
fn x_of(value: f64) -> f64 {
    plot_x0() + (value.clamp(-1.0, 1.0) + 1.0) / 2.0 * PLOT_W
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForestFormat {
    Svg,
    Text,
}

/// Render the forest plot for an aggregation.
///
/// Convenience wrapper over [`build_document`] plus the chosen
/// renderer; both renderers are deterministic byte-for-byte.
pub fn render_forest(
    models: &[EvidenceModel],
    agg: &AggregatedModel,
    glossary: &Glossary,
    joins: &JoinMap,
    thresholds: &IntensityThresholds,
    meta: ReportMeta,
    format: ForestFormat,
) -> Result<String, ReportError> {
    let document = build_document(models, agg, glossary, joins, thresholds, meta)?;
    Ok(match format {
        ForestFormat::Svg => document.to_svg(),
        ForestFormat::Text => document.to_text(),
    })
}

impl ReportDocument {
    fn content_height(&self) -> f64 {
        let rows: usize = self
            .groups
            .iter()
            .map(|g| g.rows.len() + 2) // group header + aggregated row
            .sum();
        rows as f64 * ROW_H + self.groups.len().saturating_sub(1) as f64 * GROUP_GAP
    }

    /// Serialize as a standalone SVG image.
    pub fn to_svg(&self) -> String {
        let width = plot_x0() + PLOT_W + MARGIN;
        let content_h = self.content_height();
        let height = HEADER_H + content_h + AXIS_H;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
            w = coord(width),
            h = coord(height)
        );
        svg.push_str(
            "<style>\n\
             text { font: 12px 'DejaVu Sans', 'Helvetica Neue', sans-serif; fill: #24292f; }\n\
             .title { font-size: 16px; font-weight: bold; }\n\
             .meta, .colhead { font-size: 11px; fill: #656d76; }\n\
             .group { font-weight: bold; }\n\
             .tick { font-size: 10px; fill: #656d76; }\n\
             .nodata { font-size: 11px; fill: #8c959f; font-style: italic; }\n\
             .rule { stroke: #d0d7de; stroke-dasharray: 3 3; }\n\
             .rule-zero { stroke: #57606a; }\n\
             .ci { stroke: #37474f; stroke-width: 1.4; }\n\
             .mark { fill: #37474f; }\n\
             .clamp { fill: #37474f; }\n\
             .agg-ci { stroke: #9a3412; stroke-width: 2.6; }\n\
             .agg-mark { fill: #9a3412; }\n\
             </style>\n",
        );
        let _ = writeln!(
            svg,
            "<text class=\"title\" x=\"{}\" y=\"24\">{}</text>",
            coord(MARGIN),
            escape_xml(&self.title)
        );
        let _ = writeln!(
            svg,
            "<text class=\"meta\" x=\"{}\" y=\"41\">generated {} by {}</text>",
            coord(MARGIN),
            escape_xml(&self.meta.generated_at),
            escape_xml(&self.meta.tool)
        );
        let _ = writeln!(
            svg,
            "<text class=\"colhead\" x=\"{}\" y=\"60\">Evidence</text>",
            coord(MARGIN)
        );
        let _ = writeln!(
            svg,
            "<text class=\"colhead\" x=\"{}\" y=\"60\" text-anchor=\"end\">N</text>",
            coord(MARGIN + LABEL_W + N_W - 6.0)
        );
        let _ = writeln!(
            svg,
            "<text class=\"colhead\" x=\"{}\" y=\"60\" text-anchor=\"end\">Belief</text>",
            coord(MARGIN + LABEL_W + N_W + BELIEF_W - 6.0)
        );
        let _ = writeln!(
            svg,
            "<text class=\"colhead\" x=\"{}\" y=\"60\" text-anchor=\"middle\">Relative improvement</text>",
            coord(plot_x0() + PLOT_W / 2.0)
        );

        let content_top = HEADER_H;
        let content_bottom = HEADER_H + content_h;

        // Reference rules: thresholds (dashed) and the 0% rule.
        let t = &self.thresholds;
        for threshold in [
            -t.t_moderate,
            -t.t_weak,
            -t.t_indifferent,
            t.t_indifferent,
            t.t_weak,
            t.t_moderate,
        ] {
            let x = coord(x_of(threshold));
            let _ = writeln!(
                svg,
                "<line class=\"rule\" x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\"/>",
                coord(content_top - 4.0),
                coord(content_bottom + 4.0)
            );
        }
        let zero_x = coord(x_of(0.0));
        let _ = writeln!(
            svg,
            "<line class=\"rule-zero\" x1=\"{zero_x}\" y1=\"{}\" x2=\"{zero_x}\" y2=\"{}\"/>",
            coord(content_top - 4.0),
            coord(content_bottom + 4.0)
        );

        // Rows.
        let text_x = coord(MARGIN);
        let n_x = coord(MARGIN + LABEL_W + N_W - 6.0);
        let belief_x = coord(MARGIN + LABEL_W + N_W + BELIEF_W - 6.0);
        let mut y = content_top;
        for group in &self.groups {
            let _ = writeln!(
                svg,
                "<text class=\"group\" x=\"{text_x}\" y=\"{}\">{}</text>",
                coord(y + 13.0),
                escape_xml(&group.effect)
            );
            y += ROW_H;
            for row in &group.rows {
                let mid = y + ROW_H / 2.0;
                let _ = writeln!(
                    svg,
                    "<text x=\"{text_x}\" y=\"{}\">{}</text>",
                    coord(y + 13.0),
                    escape_xml(&row.label)
                );
                let _ = writeln!(
                    svg,
                    "<text x=\"{n_x}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                    coord(y + 13.0),
                    row.samples
                );
                let _ = writeln!(
                    svg,
                    "<text x=\"{belief_x}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                    coord(y + 13.0),
                    fmt_belief(row.belief)
                );
                match &row.point {
                    Some(point) => {
                        svg.push_str(&evidence_marks(point, mid));
                    }
                    None => {
                        let _ = writeln!(
                            svg,
                            "<text class=\"nodata\" x=\"{}\" y=\"{}\">no raw data</text>",
                            coord(plot_x0() + 6.0),
                            coord(y + 13.0)
                        );
                    }
                }
                y += ROW_H;
            }
            // Aggregated row.
            let agg = &group.aggregated;
            let mid = y + ROW_H / 2.0;
            let _ = writeln!(
                svg,
                "<text class=\"group\" x=\"{text_x}\" y=\"{}\">Aggregated ({})</text>",
                coord(y + 13.0),
                escape_xml(&agg.intensity.notation())
            );
            let _ = writeln!(
                svg,
                "<text x=\"{n_x}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                coord(y + 13.0),
                agg.samples
            );
            let _ = writeln!(
                svg,
                "<text x=\"{belief_x}\" y=\"{}\" text-anchor=\"end\">{}</text>",
                coord(y + 13.0),
                fmt_belief(agg.belief)
            );
            let x1 = x_of(agg.ci_low);
            let x2 = x_of(agg.ci_high);
            let _ = writeln!(
                svg,
                "<line class=\"agg-ci\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
                coord(x1),
                coord(mid),
                coord(x2),
                coord(mid)
            );
            let cx = x_of(agg.mean);
            let _ = writeln!(
                svg,
                "<polygon class=\"agg-mark\" points=\"{}\"/>",
                diamond_points(cx, mid, 6.0)
            );
            y += ROW_H + GROUP_GAP;
        }

        // Axis ticks and caption.
        let tick_y = coord(content_bottom + 18.0);
        for (value, label) in [
            (-1.0, "-100%"),
            (-0.5, "-50%"),
            (0.0, "0%"),
            (0.5, "50%"),
            (1.0, "100%"),
        ] {
            let _ = writeln!(
                svg,
                "<text class=\"tick\" x=\"{}\" y=\"{tick_y}\" text-anchor=\"middle\">{label}</text>",
                coord(x_of(value))
            );
        }
        let _ = writeln!(
            svg,
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">squares: study estimates with 95% CI - diamonds: aggregated intensity extent</text>",
            coord(plot_x0() + PLOT_W / 2.0),
            coord(content_bottom + 36.0)
        );
        svg.push_str("</svg>\n");
        svg
    }

    /// Serialize as a plain-text plot for terminals and logs.
    pub fn to_text(&self) -> String {
        let label_width = self
            .groups
            .iter()
            .flat_map(|g| {
                g.rows
                    .iter()
                    .map(|r| r.label.len() + 2)
                    .chain(std::iter::once(
                        format!("Aggregated ({})", g.aggregated.intensity).len() + 2,
                    ))
                    .chain(std::iter::once(g.effect.len()))
            })
            .max()
            .unwrap_or(20)
            .max(20);
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(
            out,
            "generated {} by {}",
            self.meta.generated_at, self.meta.tool
        );
        let _ = writeln!(
            out,
            "axis spans -100% .. +100% of relative improvement; '|' marks 0%"
        );
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<label_width$}  {:>4}  {:>6}  ",
            "Evidence", "N", "Belief"
        );
        for group in &self.groups {
            let _ = writeln!(out, "{}", group.effect);
            for row in &group.rows {
                let axis = match &row.point {
                    Some(p) => text_axis(p.ci_low, p.ci_high, p.mean, '-', '#'),
                    None => "(no raw data)".to_string(),
                };
                let _ = writeln!(
                    out,
                    "{:<label_width$}  {:>4}  {:>6}  {}",
                    format!("  {}", row.label),
                    row.samples,
                    fmt_belief(row.belief),
                    axis
                );
            }
            let agg = &group.aggregated;
            let axis = text_axis(agg.ci_low, agg.ci_high, agg.mean, '=', '@');
            let _ = writeln!(
                out,
                "{:<label_width$}  {:>4}  {:>6}  {}",
                format!("  Aggregated ({})", agg.intensity),
                agg.samples,
                fmt_belief(agg.belief),
                axis
            );
            out.push('\n');
        }
        out
    }
}

/// Evidence-row marks: CI segment, mean square, clamp chevrons.
fn evidence_marks(point: &PointEstimate, mid: f64) -> String {
    let mut out = String::new();
    let x1 = x_of(point.ci_low);
    let x2 = x_of(point.ci_high);
    let _ = writeln!(
        out,
        "<line class=\"ci\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>",
        coord(x1),
        coord(mid),
        coord(x2),
        coord(mid)
    );
    let cx = x_of(point.mean);
    let _ = writeln!(
        out,
        "<rect class=\"mark\" x=\"{}\" y=\"{}\" width=\"7\" height=\"7\"/>",
        coord(cx - 3.5),
        coord(mid - 3.5)
    );
    // Intervals reaching past the axis bounds get clamp chevrons.
    if point.ci_low < -1.0 {
        let _ = writeln!(
            out,
            "<polygon class=\"clamp\" points=\"{}\"/>",
            chevron_points(x_of(-1.0), mid, -1.0)
        );
    }
    if point.ci_high > 1.0 {
        let _ = writeln!(
            out,
            "<polygon class=\"clamp\" points=\"{}\"/>",
            chevron_points(x_of(1.0), mid, 1.0)
        );
    }
    out
}

fn diamond_points(cx: f64, cy: f64, r: f64) -> String {
    format!(
        "{},{} {},{} {},{} {},{}",
        coord(cx),
        coord(cy - r),
        coord(cx + r),
        coord(cy),
        coord(cx),
        coord(cy + r),
        coord(cx - r),
        coord(cy)
    )
}

/// A small triangle pointing outward at a clamped interval end.
fn chevron_points(x: f64, cy: f64, direction: f64) -> String {
    let tip = x + 5.0 * direction;
    format!(
        "{},{} {},{} {},{}",
        coord(x),
        coord(cy - 4.0),
        coord(x),
        coord(cy + 4.0),
        coord(tip),
        coord(cy)
    )
}

const TEXT_AXIS_COLS: usize = 61;

fn text_col(value: f64) -> usize {
    let unit = (value.clamp(-1.0, 1.0) + 1.0) / 2.0;
    (unit * (TEXT_AXIS_COLS - 1) as f64).round() as usize
}

/// One 61-column axis line: span between the CI bounds, a marker at the
/// mean, the zero rule where nothing covers it, clamp arrows at cut
/// ends.
fn text_axis(ci_low: f64, ci_high: f64, mean: f64, span: char, marker: char) -> String {
    let mut cells = vec![' '; TEXT_AXIS_COLS];
    let (lo, hi) = (text_col(ci_low), text_col(ci_high));
    for cell in cells.iter_mut().take(hi + 1).skip(lo) {
        *cell = span;
    }
    cells[text_col(mean)] = marker;
    let zero = text_col(0.0);
    if cells[zero] == ' ' {
        cells[zero] = '|';
    }
    if ci_low < -1.0 {
        cells[0] = '<';
    }
    if ci_high > 1.0 {
        cells[TEXT_AXIS_COLS - 1] = '>';
    }
    cells.into_iter().collect()
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

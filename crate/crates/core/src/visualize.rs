//! Attention-driven stroke transforms and plot files.
//!
//! Strokes whose mean attention per session reaches the threshold keep full
//! opacity and colour. Below it, the opacity transform hides them and the
//! saturation transform pulls their colour toward its own luma, so a bright
//! stroke stays bright while losing chroma.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::analytics::WalkMetrics;
use crate::fsutil::write_atomic;
use crate::ingest::BrushCatalogue;
use crate::model::{BrushId, ColourOrder, GazeEvent, Rgba};

pub const DEFAULT_THRESHOLD_S: f64 = 1.0;
pub const ATTENTION_CSV_HEADER: &str = "brush_id,total_s,count,mean_s,alpha";
pub const WALK_STROKE: &str = "#ff8c00";
pub const OUTLINE_STROKE: &str = "#1f4fff";

#[derive(Debug, Error)]
pub enum VisualizeError {
    #[error("walk has no points")]
    EmptyTrace,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrokeAttention {
    pub brush_id: BrushId,
    pub total_duration_s: f64,
    pub gaze_count: u64,
    /// Total divided by every session in the study, viewers or not.
    pub mean_duration_per_session_s: f64,
}

/// Per-stroke attention keyed by the formatted brush id.
pub type BrushAttention = BTreeMap<String, StrokeAttention>;

/// Sums attention per stroke. With a catalogue, unviewed strokes are
/// present with zeros.
pub fn aggregate_brush_attention(
    events: &[GazeEvent],
    n_sessions: usize,
    catalogue: Option<&BrushCatalogue>,
) -> BrushAttention {
    assert!(n_sessions >= 1, "attention needs at least one session");
    let mut out = BrushAttention::new();
    let blank = |id: &BrushId| StrokeAttention {
        brush_id: id.clone(),
        total_duration_s: 0.0,
        gaze_count: 0,
        mean_duration_per_session_s: 0.0,
    };
    if let Some(cat) = catalogue {
        for (key, id) in cat.iter() {
            out.insert(key.to_string(), blank(id));
        }
    }
    for e in events {
        let entry = out
            .entry(e.brush_id.to_string())
            .or_insert_with(|| blank(&e.brush_id));
        entry.total_duration_s += e.duration_s;
        entry.gaze_count += 1;
    }
    for a in out.values_mut() {
        a.mean_duration_per_session_s = a.total_duration_s / n_sessions as f64;
    }
    out
}

fn mean_of(attention: &BrushAttention, key: &str) -> f64 {
    attention
        .get(key)
        .map_or(0.0, |a| a.mean_duration_per_session_s)
}

/// Alpha 1 iff mean attention per session is at least `threshold_s`.
pub fn opacity_transform(
    attention: &BrushAttention,
    catalogue: &BrushCatalogue,
    threshold_s: f64,
) -> BTreeMap<String, u8> {
    catalogue
        .iter()
        .map(|(key, _)| {
            (
                key.to_string(),
                u8::from(mean_of(attention, key) >= threshold_s),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ramp {
    #[default]
    Linear,
    Sqrt,
}

impl FromStr for Ramp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Ramp::Linear),
            "sqrt" => Ok(Ramp::Sqrt),
            other => Err(format!("unknown ramp {other:?} (expected linear or sqrt)")),
        }
    }
}

/// Saturation factor in `[0, 1]`, non-decreasing in `mean_s`.
pub fn saturation_factor(mean_s: f64, threshold_s: f64, ramp: Ramp) -> f64 {
    let s = (mean_s / threshold_s).clamp(0.0, 1.0);
    match ramp {
        Ramp::Linear => s,
        Ramp::Sqrt => s.sqrt(),
    }
}

/// Moves each channel toward the colour's luma by `1 - s`. Alpha is kept.
pub fn desaturate(colour: Rgba, s: f64) -> Rgba {
    let y = colour.luma();
    let ch = |c: u8| (y + s * (f64::from(c) - y)).round().clamp(0.0, 255.0) as u8;
    Rgba::new(ch(colour.r), ch(colour.g), ch(colour.b), colour.a)
}

pub fn saturation_transform(
    attention: &BrushAttention,
    catalogue: &BrushCatalogue,
    threshold_s: f64,
    ramp: Ramp,
    order: ColourOrder,
) -> BTreeMap<String, Rgba> {
    assert!(threshold_s > 0.0, "saturation threshold must be positive");
    catalogue
        .iter()
        .map(|(key, id)| {
            let s = saturation_factor(mean_of(attention, key), threshold_s, ramp);
            (key.to_string(), desaturate(id.colour(order), s))
        })
        .collect()
}

#[derive(Serialize)]
struct AnnotatedRecord<'a> {
    id: &'a str,
    brush_type: &'a str,
    start_colour_packed: u32,
    artwork_ref: &'a str,
    seq: u64,
    attention_total_s: f64,
    attention_count: u64,
    alpha: u8,
    colour_desaturated: u32,
}

/// Metadata JSON with attention fields appended to each stroke. The
/// desaturated colour is packed in the same layout as the input.
pub fn annotated_metadata_json(
    catalogue: &BrushCatalogue,
    attention: &BrushAttention,
    threshold_s: f64,
    ramp: Ramp,
    order: ColourOrder,
) -> String {
    let alpha = opacity_transform(attention, catalogue, threshold_s);
    let colours = saturation_transform(attention, catalogue, threshold_s, ramp, order);
    let records: Vec<AnnotatedRecord> = catalogue
        .iter()
        .map(|(key, id)| {
            let a = attention.get(key);
            AnnotatedRecord {
                id: key,
                brush_type: &id.brush_type,
                start_colour_packed: id.start_colour_packed,
                artwork_ref: &id.artwork_ref,
                seq: id.seq,
                attention_total_s: a.map_or(0.0, |a| a.total_duration_s),
                attention_count: a.map_or(0, |a| a.gaze_count),
                alpha: alpha[key],
                colour_desaturated: colours[key].pack(order),
            }
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("annotated records serialise")
}

pub fn export_annotated_metadata(
    path: &Path,
    catalogue: &BrushCatalogue,
    attention: &BrushAttention,
    threshold_s: f64,
    ramp: Ramp,
    order: ColourOrder,
) -> Result<(), VisualizeError> {
    let json = annotated_metadata_json(catalogue, attention, threshold_s, ramp, order);
    write_atomic(path, json.as_bytes()).map_err(|source| VisualizeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn attention_csv(attention: &BrushAttention, threshold_s: f64) -> String {
    let mut out = format!("{ATTENTION_CSV_HEADER}\n");
    for (key, a) in attention {
        let alpha = u8::from(a.mean_duration_per_session_s >= threshold_s);
        let _ = writeln!(
            out,
            "{key},{},{},{},{alpha}",
            a.total_duration_s, a.gaze_count, a.mean_duration_per_session_s
        );
    }
    out
}

fn bounds<'a>(pts: impl Iterator<Item = &'a (f64, f64)>) -> (f64, f64, f64, f64) {
    pts.fold(
        (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
        |(x0, y0, x1, y1), &(x, y)| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
    )
}

/// Top-down SVG of a walk. The view box covers the walk and the optional
/// outline with a 5% margin on every side.
pub fn render_walk_svg(
    metrics: &WalkMetrics,
    outline: Option<&[(f64, f64)]>,
) -> Result<String, VisualizeError> {
    if metrics.points.is_empty() {
        return Err(VisualizeError::EmptyTrace);
    }
    let outline = outline.unwrap_or(&[]);
    let (x0, y0, x1, y1) = bounds(metrics.points.iter().chain(outline));
    let span = (x1 - x0).max(y1 - y0);
    let margin = if span > 0.0 { 0.05 * span } else { 0.5 };
    let (vx, vy) = (x0 - margin, y0 - margin);
    let (vw, vh) = (x1 - x0 + 2.0 * margin, y1 - y0 + 2.0 * margin);
    let stroke_w = (vw.max(vh) / 200.0).max(1e-3);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{vx} {vy} {vw} {vh}">"#
    );
    if outline.len() >= 2 {
        let _ = writeln!(
            svg,
            r#"  <polygon class="outline" points="{}" fill="none" stroke="{OUTLINE_STROKE}" stroke-width="{stroke_w}"/>"#,
            points_attr(outline)
        );
    }
    if let [(x, y)] = metrics.points.as_slice() {
        let _ = writeln!(
            svg,
            r#"  <circle class="walk" cx="{x}" cy="{y}" r="{}" fill="{WALK_STROKE}"/>"#,
            stroke_w * 3.0
        );
    } else {
        let _ = writeln!(
            svg,
            r#"  <polyline class="walk" points="{}" fill="none" stroke="{WALK_STROKE}" stroke-width="{stroke_w}"/>"#,
            points_attr(&metrics.points)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn points_attr(points: &[(f64, f64)]) -> String {
    let mut s = String::with_capacity(points.len() * 16);
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x},{y}");
    }
    s
}

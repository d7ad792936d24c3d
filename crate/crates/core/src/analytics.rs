//! Movement, elevation, eye-orientation, colour and correlation analyses.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{BrushCatalogue, SessionTrace};
use crate::model::{
    ColourOrder, GazeEvent, ParticipantProfile, ProfileField, Rgba, SessionEvents, TelemetryFrame,
};

pub const DEFAULT_DIP_THRESHOLD_M: f64 = 0.3;
pub const DEFAULT_MIN_DIP_MS: u64 = 500;
pub const DEFAULT_N_THETA: usize = 18;
pub const DEFAULT_N_PHI: usize = 36;
pub const DEFAULT_TOP_N: usize = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("trace has no frames")]
    EmptyTrace,
    #[error("event references brush {0} which is not in the catalogue")]
    UnknownBrush(String),
    #[error("no profile for participant {0}")]
    UnknownParticipant(String),
    #[error("correlation needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

// ---------------------------------------------------------------------------
// Walk

/// Top-down movement summary in the `(head_x, head_z)` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkMetrics {
    pub points: Vec<(f64, f64)>,
    pub path_length_m: f64,
    pub bbox_area_m2: f64,
    pub hull_area_m2: f64,
}

pub fn walk_metrics(trace: &SessionTrace) -> Result<WalkMetrics, AnalyticsError> {
    let points: Vec<(f64, f64)> = trace.frames.iter().map(|f| (f.head.x, f.head.z)).collect();
    walk_metrics_from_points(points)
}

pub fn walk_metrics_from_points(points: Vec<(f64, f64)>) -> Result<WalkMetrics, AnalyticsError> {
    if points.is_empty() {
        return Err(AnalyticsError::EmptyTrace);
    }
    let path_length_m = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1))
        .sum();
    let (mut min_x, mut max_x, mut min_z, mut max_z) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, z) in &points {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_z = min_z.min(z);
        max_z = max_z.max(z);
    }
    let hull = convex_hull(&points);
    Ok(WalkMetrics {
        path_length_m,
        bbox_area_m2: (max_x - min_x) * (max_z - min_z),
        hull_area_m2: polygon_area(&hull),
        points,
    })
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without
/// repeating the first vertex; collinear points are dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = poly
        .iter()
        .zip(poly.iter().cycle().skip(1))
        .map(|(a, b)| a.0 * b.1 - b.0 * a.1)
        .sum();
    twice.abs() / 2.0
}

// ---------------------------------------------------------------------------
// Head elevation

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dip {
    pub start_ms: u64,
    pub end_ms: u64,
    pub min_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElevationMetrics {
    /// Median `head_y` of the session.
    pub baseline_m: f64,
    pub dips: Vec<Dip>,
    pub dip_threshold_m: f64,
    pub min_dip_duration_ms: u64,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// Finds maximal runs of frames with `head_y < baseline - threshold` that
/// last at least `min_dip_duration_ms` (first to last frame of the run).
pub fn elevation_metrics(
    trace: &SessionTrace,
    dip_threshold_m: f64,
    min_dip_duration_ms: u64,
) -> Result<ElevationMetrics, AnalyticsError> {
    let ys: Vec<f64> = trace.frames.iter().map(|f| f.head.y).collect();
    let baseline_m = median(&ys).ok_or(AnalyticsError::EmptyTrace)?;
    let cutoff = baseline_m - dip_threshold_m;

    let mut dips = Vec::new();
    let mut run: Option<Dip> = None;
    let close = |run: Option<Dip>, dips: &mut Vec<Dip>| {
        if let Some(d) = run {
            if d.end_ms - d.start_ms >= min_dip_duration_ms {
                dips.push(d);
            }
        }
    };
    for f in &trace.frames {
        if f.head.y < cutoff {
            match run.as_mut() {
                Some(d) => {
                    d.end_ms = f.timestamp_ms;
                    d.min_y = d.min_y.min(f.head.y);
                }
                None => {
                    run = Some(Dip {
                        start_ms: f.timestamp_ms,
                        end_ms: f.timestamp_ms,
                        min_y: f.head.y,
                    })
                }
            }
        } else {
            close(run.take(), &mut dips);
        }
    }
    close(run.take(), &mut dips);

    Ok(ElevationMetrics {
        baseline_m,
        dips,
        dip_threshold_m,
        min_dip_duration_ms,
    })
}

// ---------------------------------------------------------------------------
// Eye orientation

/// Counts of gaze onsets binned by inclination `theta = acos(eye_y)` and
/// azimuth `phi = atan2(eye_z, eye_x)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientationHistogram {
    pub n_theta: usize,
    pub n_phi: usize,
    /// Row-major, `counts[theta_band * n_phi + phi_sector]`.
    pub counts: Vec<u64>,
}

impl OrientationHistogram {
    pub fn get(&self, theta_band: usize, phi_sector: usize) -> u64 {
        self.counts[theta_band * self.n_phi + phi_sector]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn theta_band_total(&self, theta_band: usize) -> u64 {
        self.counts[theta_band * self.n_phi..(theta_band + 1) * self.n_phi]
            .iter()
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta_band,phi_sector,count\n");
        for t in 0..self.n_theta {
            for p in 0..self.n_phi {
                let _ = writeln!(out, "{t},{p},{}", self.get(t, p));
            }
        }
        out
    }
}

/// `(theta_band, phi_sector)` of a direction.
pub fn orientation_bin(x: f64, y: f64, z: f64, n_theta: usize, n_phi: usize) -> (usize, usize) {
    let theta = y.clamp(-1.0, 1.0).acos();
    let phi = z.atan2(x);
    let band = ((theta / PI * n_theta as f64).floor() as usize).min(n_theta - 1);
    let sector = (((phi + PI) / (2.0 * PI) * n_phi as f64).floor() as usize).min(n_phi - 1);
    (band, sector)
}

pub fn orientation_histogram(
    events: &[GazeEvent],
    n_theta: usize,
    n_phi: usize,
) -> OrientationHistogram {
    assert!(
        n_theta > 0 && n_phi > 0,
        "histogram needs at least one bin per axis"
    );
    let mut counts = vec![0u64; n_theta * n_phi];
    for e in events {
        let d = e.eye_at_start;
        let (t, p) = orientation_bin(d.x, d.y, d.z, n_theta, n_phi);
        counts[t * n_phi + p] += 1;
    }
    OrientationHistogram {
        n_theta,
        n_phi,
        counts,
    }
}

// ---------------------------------------------------------------------------
// Colour encounter

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColourTotals {
    /// Decoded colour with alpha forced to 255.
    pub colour: Rgba,
    pub total_duration_s: f64,
    pub gaze_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColourStats {
    /// Keyed by [`Rgba::rgb_key`].
    pub per_colour: BTreeMap<u32, ColourTotals>,
    pub top_by_duration: Vec<Rgba>,
    pub top_by_count: Vec<Rgba>,
}

impl ColourStats {
    fn add(&mut self, colour: Rgba, duration_s: f64) {
        let opaque = Rgba { a: 255, ..colour };
        let entry = self
            .per_colour
            .entry(opaque.rgb_key())
            .or_insert(ColourTotals {
                colour: opaque,
                total_duration_s: 0.0,
                gaze_count: 0,
            });
        entry.total_duration_s += duration_s;
        entry.gaze_count += 1;
    }

    fn rank(&mut self, top_n: usize) {
        let mut by_duration: Vec<&ColourTotals> = self.per_colour.values().collect();
        // BTreeMap order is already rgb-key ascending; stable sorts keep it for ties.
        by_duration.sort_by(|a, b| b.total_duration_s.total_cmp(&a.total_duration_s));
        self.top_by_duration = by_duration.iter().take(top_n).map(|t| t.colour).collect();
        let mut by_count: Vec<&ColourTotals> = self.per_colour.values().collect();
        by_count.sort_by(|a, b| b.gaze_count.cmp(&a.gaze_count));
        self.top_by_count = by_count.iter().take(top_n).map(|t| t.colour).collect();
    }

    pub fn total_duration_s(&self) -> f64 {
        self.per_colour.values().map(|t| t.total_duration_s).sum()
    }

    pub fn total_count(&self) -> u64 {
        self.per_colour.values().map(|t| t.gaze_count).sum()
    }
}

/// Per-group colour totals. With `group_by = None` everything lands in the
/// single group `"all"`.
pub fn colour_aggregation(
    sessions: &[SessionEvents],
    catalogue: &BrushCatalogue,
    profiles: &[ParticipantProfile],
    group_by: Option<ProfileField>,
    top_n: usize,
    order: ColourOrder,
) -> Result<BTreeMap<String, ColourStats>, AnalyticsError> {
    let mut groups: BTreeMap<String, ColourStats> = BTreeMap::new();
    for session in sessions {
        let group = match group_by {
            None => "all".to_string(),
            Some(field) => profiles
                .iter()
                .find(|p| p.participant_id == session.participant_id)
                .map(|p| p.category_token(field).to_string())
                .ok_or_else(|| {
                    AnalyticsError::UnknownParticipant(session.participant_id.clone())
                })?,
        };
        let stats = groups.entry(group).or_default();
        for e in &session.events {
            if !catalogue.contains(&e.brush_id) {
                return Err(AnalyticsError::UnknownBrush(e.brush_id.to_string()));
            }
            stats.add(e.brush_id.colour(order), e.duration_s);
        }
    }
    for stats in groups.values_mut() {
        stats.rank(top_n);
    }
    Ok(groups)
}

pub fn colour_stats_csv(groups: &BTreeMap<String, ColourStats>) -> String {
    let mut out =
        String::from("group,colour,total_duration_s,gaze_count,rank_duration,rank_count\n");
    for (group, stats) in groups {
        let rank = |list: &[Rgba], c: Rgba| {
            list.iter()
                .position(|x| *x == c)
                .map(|i| (i + 1).to_string())
                .unwrap_or_default()
        };
        for t in stats.per_colour.values() {
            let _ = writeln!(
                out,
                "{group},{},{},{},{},{}",
                t.colour.hex(),
                t.total_duration_s,
                t.gaze_count,
                rank(&stats.top_by_duration, t.colour),
                rank(&stats.top_by_count, t.colour)
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Correlation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    EyeX,
    EyeY,
    EyeZ,
    HeadX,
    HeadY,
    HeadZ,
    PlayerX,
    PlayerY,
    PlayerZ,
    Timestamp,
}

impl Channel {
    pub const ALL: [Channel; 10] = [
        Channel::EyeX,
        Channel::EyeY,
        Channel::EyeZ,
        Channel::HeadX,
        Channel::HeadY,
        Channel::HeadZ,
        Channel::PlayerX,
        Channel::PlayerY,
        Channel::PlayerZ,
        Channel::Timestamp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::EyeX => "eye_x",
            Channel::EyeY => "eye_y",
            Channel::EyeZ => "eye_z",
            Channel::HeadX => "head_x",
            Channel::HeadY => "head_y",
            Channel::HeadZ => "head_z",
            Channel::PlayerX => "player_x",
            Channel::PlayerY => "player_y",
            Channel::PlayerZ => "player_z",
            Channel::Timestamp => "timestamp",
        }
    }

    pub fn value(self, f: &TelemetryFrame) -> f64 {
        match self {
            Channel::EyeX => f.eye.x,
            Channel::EyeY => f.eye.y,
            Channel::EyeZ => f.eye.z,
            Channel::HeadX => f.head.x,
            Channel::HeadY => f.head.y,
            Channel::HeadZ => f.head.z,
            Channel::PlayerX => f.player.x,
            Channel::PlayerY => f.player.y,
            Channel::PlayerZ => f.player.z,
            Channel::Timestamp => f.timestamp_ms as f64,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.name() == s || (s == "timestamp_ms" && *c == Channel::Timestamp))
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

/// Symmetric Pearson matrix. `None` marks pairs involving a constant channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
    pub constant: Vec<String>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.values) {
            out.push_str(name);
            for v in row {
                out.push(',');
                if let Some(r) = v {
                    let _ = write!(out, "{r}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson correlation of named series. Diagonal entries of non-constant
/// series are exactly 1.
pub fn pearson_matrix(
    names: Vec<String>,
    series: &[Vec<f64>],
) -> Result<CorrelationMatrix, AnalyticsError> {
    let n = series.first().map_or(0, Vec::len);
    if n < 2 {
        return Err(AnalyticsError::TooFewSamples(n));
    }
    let centred: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|x| x - mean).collect()
        })
        .collect();
    // A channel is constant when every sample is identical; the centred sum
    // of squares can be a tiny positive rounding residue in that case.
    let ss: Vec<f64> = series
        .iter()
        .zip(&centred)
        .map(|(s, c)| {
            if s.iter().all(|x| *x == s[0]) {
                0.0
            } else {
                c.iter().map(|x| x * x).sum()
            }
        })
        .collect();
    let m = series.len();
    let mut values = vec![vec![None; m]; m];
    for i in 0..m {
        if ss[i] <= 0.0 {
            continue;
        }
        values[i][i] = Some(1.0);
        for j in (i + 1)..m {
            if ss[j] <= 0.0 {
                continue;
            }
            let sxy: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let r = (sxy / (ss[i] * ss[j]).sqrt()).clamp(-1.0, 1.0);
            values[i][j] = Some(r);
            values[j][i] = Some(r);
        }
    }
    let constant = names
        .iter()
        .zip(&ss)
        .filter(|(_, &s)| s <= 0.0)
        .map(|(n, _)| n.clone())
        .collect();
    Ok(CorrelationMatrix {
        names,
        values,
        constant,
    })
}

/// Correlation over the gaze-signal frames of all traces pooled together.
pub fn correlation_matrix(
    traces: &[SessionTrace],
    channels: &[Channel],
) -> Result<CorrelationMatrix, AnalyticsError> {
    let frames: Vec<&TelemetryFrame> = traces
        .iter()
        .flat_map(|t| t.frames.iter())
        .filter(|f| f.signal.is_gaze())
        .collect();
    let series: Vec<Vec<f64>> = channels
        .iter()
        .map(|c| frames.iter().map(|f| c.value(f)).collect())
        .collect();
    pearson_matrix(
        channels.iter().map(|c| c.name().to_string()).collect(),
        &series,
    )
}

pub fn walk_csv(participant_id: &str, m: &WalkMetrics) -> String {
    format!(
        "participant_id,n_points,path_length_m,bbox_area_m2,hull_area_m2\n{participant_id},{},{},{},{}\n",
        m.points.len(),
        m.path_length_m,
        m.bbox_area_m2,
        m.hull_area_m2
    )
}

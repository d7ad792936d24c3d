//! Gaze event segmentation.
//!
//! The headset emits `FOCUS_IN` when a brushstroke starts being looked at, a
//! `NORMAL_FRAME` heartbeat every 30 ms while the gaze continues, and
//! `FOCUS_OUT` when attention moves away. One event is produced per matched
//! IN/OUT pair. Blinks can cut one long gaze into two; [`bridge_blink_gaps`]
//! stitches those back together.

use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

use crate::ingest::SessionTrace;
use crate::model::{duration_s, BrushId, EyeDirection, GazeEvent, HeadPose, Signal};

/// Heartbeat period of `NORMAL_FRAME` signals.
pub const HEARTBEAT_MS: u64 = 30;
pub const DEFAULT_MAX_GAP_MS: u64 = 400;

pub const EVENTS_HEADER: &str = "brush_id,start_ms,end_ms,duration_s,bridged";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("row {row}: FOCUS_OUT on {got} while gaze on {open} is open")]
    BrushMismatch {
        row: usize,
        open: BrushId,
        got: BrushId,
    },
}

/// Segmentation output plus counters for the recoverable anomalies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segmentation {
    pub events: Vec<GazeEvent>,
    /// Frame indices of `FOCUS_OUT` signals with no open gaze. Skipped.
    pub orphan_focus_out: Vec<usize>,
    /// Heartbeats outside an open gaze or on a different brush. Ignored.
    pub stray_heartbeats: usize,
    /// IN/OUT pairs with identical timestamps. Skipped.
    pub zero_length: usize,
    /// Gazes closed without a `FOCUS_OUT` (stream end or a new `FOCUS_IN`).
    pub unterminated: usize,
}

struct OpenGaze {
    brush: BrushId,
    start_ms: u64,
    last_seen_ms: u64,
    head: HeadPose,
    eye: EyeDirection,
}

impl OpenGaze {
    fn into_event(self, end_ms: u64) -> GazeEvent {
        GazeEvent::new(self.brush, self.start_ms, end_ms, self.head, self.eye)
    }
}

pub fn segment_gaze_events(trace: &SessionTrace) -> Result<Segmentation, SegmentError> {
    let mut out = Segmentation::default();
    let mut open: Option<OpenGaze> = None;

    let close_unterminated = |gaze: OpenGaze, out: &mut Segmentation| {
        out.unterminated += 1;
        let end = gaze.last_seen_ms + HEARTBEAT_MS;
        out.events.push(gaze.into_event(end));
    };

    for (row, frame) in trace.frames.iter().enumerate() {
        let brush = frame.brush_id.as_ref();
        match frame.signal {
            Signal::FocusIn => {
                if let Some(prev) = open.take() {
                    close_unterminated(prev, &mut out);
                }
                let brush = brush.expect("ingest guarantees gaze rows carry a brush id");
                open = Some(OpenGaze {
                    brush: brush.clone(),
                    start_ms: frame.timestamp_ms,
                    last_seen_ms: frame.timestamp_ms,
                    head: frame.head,
                    eye: frame.eye,
                });
            }
            Signal::NormalFrame => match open.as_mut() {
                Some(gaze) if Some(&gaze.brush) == brush => gaze.last_seen_ms = frame.timestamp_ms,
                _ => out.stray_heartbeats += 1,
            },
            Signal::FocusOut => match open.take() {
                None => out.orphan_focus_out.push(row),
                Some(gaze) => {
                    let got = brush.expect("ingest guarantees gaze rows carry a brush id");
                    if *got != gaze.brush {
                        return Err(SegmentError::BrushMismatch {
                            row,
                            open: gaze.brush,
                            got: got.clone(),
                        });
                    }
                    if frame.timestamp_ms > gaze.start_ms {
                        out.events.push(gaze.into_event(frame.timestamp_ms));
                    } else {
                        out.zero_length += 1;
                    }
                }
            },
            Signal::BlinkStart | Signal::BlinkEnd => {}
        }
    }
    if let Some(gaze) = open.take() {
        close_unterminated(gaze, &mut out);
    }
    out.events.sort_by_key(|e| e.start_ms);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BridgeOptions {
    pub max_gap_ms: u64,
    /// When false, any short same-brush gap is bridged, blink or not.
    pub require_blink: bool,
}

impl Default for BridgeOptions {
    fn default() -> Self {
        BridgeOptions {
            max_gap_ms: DEFAULT_MAX_GAP_MS,
            require_blink: true,
        }
    }
}

/// `(BLINK_START, BLINK_END)` timestamp pairs, in stream order.
pub fn blink_intervals(trace: &SessionTrace) -> Vec<(u64, u64)> {
    let mut pairs = Vec::new();
    let mut started: Option<u64> = None;
    for frame in &trace.frames {
        match frame.signal {
            Signal::BlinkStart => started = Some(frame.timestamp_ms),
            Signal::BlinkEnd => {
                if let Some(s) = started.take() {
                    pairs.push((s, frame.timestamp_ms));
                }
            }
            _ => {}
        }
    }
    pairs
}

/// Merges consecutive same-brush events whose gap is at most
/// `max_gap_ms` and (by default) contains a complete blink. Merging is
/// transitive left to right: a merged event can absorb the next one too.
pub fn bridge_blink_gaps(
    events: &[GazeEvent],
    trace: &SessionTrace,
    opts: BridgeOptions,
) -> Vec<GazeEvent> {
    let blinks = blink_intervals(trace);
    let blink_within = |from: u64, to: u64| {
        let first = blinks.partition_point(|&(s, _)| s < from);
        blinks.get(first).is_some_and(|&(_, e)| e <= to)
    };

    let mut out: Vec<GazeEvent> = Vec::with_capacity(events.len());
    for ev in events {
        if let Some(cur) = out.last_mut() {
            let mergeable = cur.brush_id == ev.brush_id
                && ev.start_ms >= cur.end_ms
                && ev.start_ms - cur.end_ms <= opts.max_gap_ms
                && (!opts.require_blink || blink_within(cur.end_ms, ev.start_ms));
            if mergeable {
                cur.end_ms = cur.end_ms.max(ev.end_ms);
                cur.duration_s = duration_s(cur.start_ms, cur.end_ms);
                cur.bridged = true;
                continue;
            }
        }
        out.push(ev.clone());
    }
    out
}

pub fn events_csv(events: &[GazeEvent]) -> String {
    let mut out = String::with_capacity(64 * (events.len() + 1));
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.brush_id, e.start_ms, e.end_ms, e.duration_s, e.bridged
        );
    }
    out
}

#[derive(Debug, Error)]
pub enum EventsCsvError {
    #[error("events CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("events CSV line {line}: {message}")]
    Value { line: u64, message: String },
}

/// Reads an events CSV. Head pose and eye direction are not part of the
/// export and come back as defaults.
pub fn parse_events_csv<R: Read>(reader: R) -> Result<Vec<GazeEvent>, EventsCsvError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(EVENTS_HEADER.split(',')) {
        return Err(EventsCsvError::Value {
            line: 1,
            message: format!("expected header `{EVENTS_HEADER}`"),
        });
    }
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec?;
        let bad = |message: String| EventsCsvError::Value { line, message };
        let brush_id = BrushId::parse(&rec[0]).map_err(|e| bad(e.to_string()))?;
        let start_ms: u64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("bad start_ms {:?}", &rec[1])))?;
        let end_ms: u64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("bad end_ms {:?}", &rec[2])))?;
        if end_ms <= start_ms {
            return Err(bad("end_ms must be after start_ms".into()));
        }
        let bridged: bool = rec[4]
            .parse()
            .map_err(|_| bad(format!("bad bridged {:?}", &rec[4])))?;
        let mut ev = GazeEvent::new(
            brush_id,
            start_ms,
            end_ms,
            HeadPose::default(),
            EyeDirection::default(),
        );
        ev.bridged = bridged;
        events.push(ev);
    }
    Ok(events)
}

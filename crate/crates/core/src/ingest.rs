//! Readers and writers for the three input files: per-session trace CSV,
//! brushstroke metadata JSON, and participant profile CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AgeGroup, ArtKnowledge, BrushId, Category, CategoryError, EyeDirection, GameExp, Gender,
    HeadPose, ParticipantProfile, PlayerPose, Signal, TelemetryFrame, VrExp,
    QUATERNION_NORM_TOLERANCE,
};

pub const TRACE_HEADER: [&str; 17] = [
    "timestamp_ms",
    "signal",
    "brush_id",
    "eye_x",
    "eye_y",
    "eye_z",
    "head_x",
    "head_y",
    "head_z",
    "player_x",
    "player_y",
    "player_z",
    "rot_x",
    "rot_y",
    "rot_z",
    "rot_w",
    "valid",
];

pub const PROFILE_HEADER: [&str; 6] = [
    "participant_id",
    "gender",
    "age_group",
    "game_exp",
    "vr_exp",
    "art_knowledge",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: schema error: {message}")]
    Schema { line: u64, message: String },
    #[error("line {line}: timestamp {timestamp_ms} is earlier than preceding {previous_ms}")]
    NonMonotonicTime {
        line: u64,
        timestamp_ms: u64,
        previous_ms: u64,
    },
    #[error("line {line}: {message}")]
    Value { line: u64, message: String },
    #[error("invalid metadata JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate brush id {0}")]
    DuplicateId(String),
    #[error("metadata entry {id}: fields disagree with the identifier")]
    InconsistentEntry { id: String },
    #[error("line {line}: {source}")]
    UnknownCategory {
        line: u64,
        #[source]
        source: CategoryError,
    },
    #[error("duplicate participant {0}")]
    DuplicateParticipant(String),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl IngestError {
    /// Attaches the file path to errors that only carry a line number.
    pub fn in_file(self, path: &Path) -> FileError {
        FileError {
            path: path.to_path_buf(),
            source: self,
        }
    }
}

#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct FileError {
    pub path: PathBuf,
    #[source]
    pub source: IngestError,
}

/// All retained frames of one participant session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub participant_id: String,
    pub frames: Vec<TelemetryFrame>,
    /// Rows marked invalid by the headset and dropped on load.
    pub discarded_invalid: usize,
}

impl SessionTrace {
    pub fn new(participant_id: impl Into<String>, frames: Vec<TelemetryFrame>) -> Self {
        SessionTrace {
            participant_id: participant_id.into(),
            frames,
            discarded_invalid: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Participant id taken from a trace file name, e.g. `p101.csv` -> `p101`.
pub fn participant_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_session_trace(path: &Path) -> Result<SessionTrace, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_session_trace(file, &participant_id_from_path(path))
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64, IngestError> {
    let v: f64 = field.trim().parse().map_err(|_| IngestError::Value {
        line,
        message: format!("{name}: cannot parse {field:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::Value {
            line,
            message: format!("{name}: non-finite value {field:?}"),
        });
    }
    Ok(v)
}

pub fn parse_session_trace<R: Read>(
    reader: R,
    participant_id: &str,
) -> Result<SessionTrace, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    match records.next() {
        Some(header) => {
            let header = header.map_err(|e| schema_from_csv(e, 1))?;
            if header.iter().ne(TRACE_HEADER.iter().copied()) {
                return Err(IngestError::Schema {
                    line: 1,
                    message: format!("expected header `{}`", TRACE_HEADER.join(",")),
                });
            }
        }
        None => {
            return Err(IngestError::Schema {
                line: 1,
                message: "missing header row".into(),
            });
        }
    }

    let mut frames = Vec::new();
    let mut discarded = 0usize;
    let mut previous: Option<u64> = None;
    for (i, record) in records.enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| schema_from_csv(e, line))?;
        let field = |idx: usize| record.get(idx).unwrap_or("");

        let ts_text = field(0);
        let timestamp_ms: u64 = ts_text.trim().parse().map_err(|_| IngestError::Value {
            line,
            message: format!("timestamp_ms: cannot parse {ts_text:?} as a non-negative integer"),
        })?;
        if let Some(prev) = previous {
            if timestamp_ms < prev {
                return Err(IngestError::NonMonotonicTime {
                    line,
                    timestamp_ms,
                    previous_ms: prev,
                });
            }
        }
        previous = Some(timestamp_ms);

        let signal: Signal = field(1)
            .parse()
            .map_err(|message| IngestError::Value { line, message })?;
        let valid = match field(16) {
            "true" => true,
            "false" => false,
            other => {
                return Err(IngestError::Value {
                    line,
                    message: format!("valid: expected true|false, got {other:?}"),
                })
            }
        };
        if !valid {
            discarded += 1;
            continue;
        }

        let brush_id = match field(2) {
            "" if signal.is_gaze() => {
                return Err(IngestError::Value {
                    line,
                    message: format!("{signal} row requires a brush_id"),
                })
            }
            "" => None,
            text => Some(BrushId::parse(text).map_err(|e| IngestError::Value {
                line,
                message: e.to_string(),
            })?),
        };

        let mut nums = [0.0f64; 9];
        for (k, name) in TRACE_HEADER[3..12].iter().enumerate() {
            nums[k] = parse_f64(field(3 + k), name, line)?;
        }
        let eye = EyeDirection::new(nums[0], nums[1], nums[2]);
        if signal.is_gaze() && !eye.is_unit() {
            return Err(IngestError::Value {
                line,
                message: format!(
                    "eye direction norm {:.6} is not on the unit sphere",
                    eye.norm()
                ),
            });
        }

        let rot_fields: Vec<&str> = (12..16).map(|k| field(k).trim()).collect();
        let rot = if rot_fields.iter().all(|f| f.is_empty()) {
            HeadPose::IDENTITY_ROTATION
        } else {
            let mut q = [0.0; 4];
            for (k, name) in TRACE_HEADER[12..16].iter().enumerate() {
                q[k] = parse_f64(rot_fields[k], name, line)?;
            }
            q
        };
        let head = HeadPose {
            x: nums[3],
            y: nums[4],
            z: nums[5],
            rot,
        };
        if (head.rotation_norm() - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(IngestError::Value {
                line,
                message: format!(
                    "rotation quaternion norm {:.6} is not 1",
                    head.rotation_norm()
                ),
            });
        }

        frames.push(TelemetryFrame {
            timestamp_ms,
            signal,
            brush_id,
            eye,
            head,
            player: PlayerPose {
                x: nums[6],
                y: nums[7],
                z: nums[8],
            },
            valid,
        });
    }

    Ok(SessionTrace {
        participant_id: participant_id.to_string(),
        frames,
        discarded_invalid: discarded,
    })
}

fn schema_from_csv(e: csv::Error, line: u64) -> IngestError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => IngestError::Schema {
            line,
            message: format!("expected {expected_len} columns, found {len}"),
        },
        _ => IngestError::Schema {
            line,
            message: e.to_string(),
        },
    }
}

/// Serialises a trace in the trace CSV format. Floats use the shortest
/// representation that parses back to the same value.
pub fn session_trace_csv(trace: &SessionTrace) -> String {
    let mut out = String::with_capacity(trace.frames.len() * 160);
    out.push_str(&TRACE_HEADER.join(","));
    out.push('\n');
    for f in &trace.frames {
        let brush = f
            .brush_id
            .as_ref()
            .map(ToString::to_string)
            .unwrap_or_default();
        let [qx, qy, qz, qw] = f.head.rot;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f.timestamp_ms,
            f.signal,
            brush,
            f.eye.x,
            f.eye.y,
            f.eye.z,
            f.head.x,
            f.head.y,
            f.head.z,
            f.player.x,
            f.player.y,
            f.player.z,
            qx,
            qy,
            qz,
            qw,
            f.valid
        );
    }
    out
}

/// Brushstroke metadata keyed by formatted identifier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BrushCatalogue {
    strokes: BTreeMap<String, BrushId>,
}

impl BrushCatalogue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids(ids: impl IntoIterator<Item = BrushId>) -> Result<Self, IngestError> {
        let mut cat = BrushCatalogue::new();
        for id in ids {
            cat.insert(id)?;
        }
        Ok(cat)
    }

    pub fn insert(&mut self, id: BrushId) -> Result<(), IngestError> {
        let key = id.to_string();
        if self.strokes.contains_key(&key) {
            return Err(IngestError::DuplicateId(key));
        }
        self.strokes.insert(key, id);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&BrushId> {
        self.strokes.get(key)
    }

    pub fn contains(&self, id: &BrushId) -> bool {
        self.strokes.contains_key(&id.to_string())
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    /// Strokes in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &BrushId)> {
        self.strokes.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &BrushId> {
        self.strokes.values()
    }
}

/// One object of the metadata JSON array. Unknown fields are ignored, so
/// annotated exports load back as plain metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeRecord {
    pub id: String,
    pub brush_type: String,
    pub start_colour_packed: u32,
    pub artwork_ref: String,
    pub seq: u64,
}

impl From<&BrushId> for StrokeRecord {
    fn from(id: &BrushId) -> Self {
        StrokeRecord {
            id: id.to_string(),
            brush_type: id.brush_type.clone(),
            start_colour_packed: id.start_colour_packed,
            artwork_ref: id.artwork_ref.clone(),
            seq: id.seq,
        }
    }
}

pub fn load_brush_metadata(path: &Path) -> Result<BrushCatalogue, IngestError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_brush_metadata(&text)
}

pub fn parse_brush_metadata(json: &str) -> Result<BrushCatalogue, IngestError> {
    let records: Vec<StrokeRecord> = serde_json::from_str(json)?;
    let mut cat = BrushCatalogue::new();
    for rec in records {
        let id = BrushId::parse(&rec.id)
            .map_err(|_| IngestError::InconsistentEntry { id: rec.id.clone() })?;
        if id.brush_type != rec.brush_type
            || id.start_colour_packed != rec.start_colour_packed
            || id.artwork_ref != rec.artwork_ref
            || id.seq != rec.seq
        {
            return Err(IngestError::InconsistentEntry { id: rec.id });
        }
        cat.insert(id)?;
    }
    Ok(cat)
}

pub fn brush_metadata_json(catalogue: &BrushCatalogue) -> String {
    let records: Vec<StrokeRecord> = catalogue.ids().map(StrokeRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("metadata records serialise")
}

pub fn load_profiles(path: &Path) -> Result<Vec<ParticipantProfile>, IngestError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_profiles(file)
}

pub fn parse_profiles<R: Read>(reader: R) -> Result<Vec<ParticipantProfile>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or(IngestError::Schema {
            line: 1,
            message: "missing header row".into(),
        })?
        .map_err(|e| schema_from_csv(e, 1))?;
    if header.iter().ne(PROFILE_HEADER.iter().copied()) {
        return Err(IngestError::Schema {
            line: 1,
            message: format!("expected header `{}`", PROFILE_HEADER.join(",")),
        });
    }

    let mut seen = BTreeSet::new();
    let mut profiles = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| schema_from_csv(e, line))?;
        let f = |idx: usize| record.get(idx).unwrap_or("").trim();
        let cat = |source| IngestError::UnknownCategory { line, source };
        let participant_id = f(0).to_string();
        if participant_id.is_empty() {
            return Err(IngestError::Value {
                line,
                message: "empty participant_id".into(),
            });
        }
        let profile = ParticipantProfile {
            gender: Gender::parse_token(f(1)).map_err(cat)?,
            age_group: AgeGroup::parse_token(f(2)).map_err(cat)?,
            game_exp: GameExp::parse_token(f(3)).map_err(cat)?,
            vr_exp: VrExp::parse_token(f(4)).map_err(cat)?,
            art_knowledge: ArtKnowledge::parse_token(f(5)).map_err(cat)?,
            participant_id,
        };
        if !seen.insert(profile.participant_id.clone()) {
            return Err(IngestError::DuplicateParticipant(profile.participant_id));
        }
        profiles.push(profile);
    }
    Ok(profiles)
}

pub fn profiles_csv(profiles: &[ParticipantProfile]) -> String {
    let mut out = PROFILE_HEADER.join(",");
    out.push('\n');
    for p in profiles {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.participant_id, p.gender, p.age_group, p.game_exp, p.vr_exp, p.art_knowledge
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "timestamp_ms,signal,brush_id,eye_x,eye_y,eye_z,head_x,head_y,head_z,player_x,player_y,player_z,rot_x,rot_y,rot_z,rot_w,valid\n";
    const B: &str = "OilPaint_4278853398_peacock_5251";

    fn row(ts: u64, signal: &str, brush: &str, valid: bool) -> String {
        format!("{ts},{signal},{brush},0,1,0,-12.5,9.87,8.3,1,2,3,0,0,0,1,{valid}\n")
    }

    #[test]
    fn drops_invalid_rows() {
        let text = format!(
            "{HEADER}{}{}{}",
            row(0, "FOCUS_IN", B, true),
            row(30, "NORMAL_FRAME", B, false),
            row(60, "FOCUS_OUT", B, true)
        );
        let trace = parse_session_trace(text.as_bytes(), "p1").unwrap();
        assert_eq!(trace.frames.len(), 2);
        assert_eq!(trace.discarded_invalid, 1);
        assert_eq!(trace.frames[1].timestamp_ms, 60);
    }

    #[test]
    fn header_only_is_empty_trace() {
        let trace = parse_session_trace(HEADER.as_bytes(), "p1").unwrap();
        assert!(trace.is_empty());
        assert_eq!(trace.discarded_invalid, 0);
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let text = format!(
            "{HEADER}{}{}",
            row(100, "FOCUS_IN", B, true),
            row(50, "FOCUS_OUT", B, true)
        );
        let err = parse_session_trace(text.as_bytes(), "p1").unwrap_err();
        assert!(matches!(
            err,
            IngestError::NonMonotonicTime {
                line: 3,
                timestamp_ms: 50,
                previous_ms: 100
            }
        ));
    }

    #[test]
    fn equal_timestamps_are_allowed() {
        let text = format!(
            "{HEADER}{}{}",
            row(30, "FOCUS_IN", B, true),
            row(30, "FOCUS_OUT", B, true)
        );
        assert_eq!(parse_session_trace(text.as_bytes(), "p").unwrap().len(), 2);
    }

    #[test]
    fn schema_and_value_errors() {
        let bad_header = "timestamp,signal\n";
        assert!(matches!(
            parse_session_trace(bad_header.as_bytes(), "p"),
            Err(IngestError::Schema { line: 1, .. })
        ));

        let short_row = format!("{HEADER}0,FOCUS_IN,{B},0,1\n");
        assert!(matches!(
            parse_session_trace(short_row.as_bytes(), "p"),
            Err(IngestError::Schema { line: 2, .. })
        ));

        let bad_signal = format!("{HEADER}{}", row(0, "GLANCE", B, true));
        assert!(matches!(
            parse_session_trace(bad_signal.as_bytes(), "p"),
            Err(IngestError::Value { line: 2, .. })
        ));

        let bad_number = format!(
            "{HEADER}{}",
            row(0, "FOCUS_IN", B, true).replace("9.87", "tall")
        );
        assert!(matches!(
            parse_session_trace(bad_number.as_bytes(), "p"),
            Err(IngestError::Value { .. })
        ));

        let missing_brush = format!("{HEADER}{}", row(0, "FOCUS_IN", "", true));
        assert!(matches!(
            parse_session_trace(missing_brush.as_bytes(), "p"),
            Err(IngestError::Value { .. })
        ));

        let off_sphere = format!(
            "{HEADER}{}",
            row(0, "FOCUS_IN", B, true).replace(",0,1,0,", ",0,2,0,")
        );
        assert!(matches!(
            parse_session_trace(off_sphere.as_bytes(), "p"),
            Err(IngestError::Value { .. })
        ));
    }

    #[test]
    fn blink_rows_need_no_brush_and_missing_rotation_is_identity() {
        let text = format!("{HEADER}10,BLINK_START,,0,0,0,1,1.7,1,0,0,0,,,,,true\n");
        let trace = parse_session_trace(text.as_bytes(), "p").unwrap();
        assert_eq!(trace.frames[0].brush_id, None);
        assert_eq!(trace.frames[0].head.rot, HeadPose::IDENTITY_ROTATION);
    }

    #[test]
    fn metadata_loads_and_rejects_duplicates() {
        let one = format!(
            r#"[{{"id":"{B}","brush_type":"OilPaint","start_colour_packed":4278853398,"artwork_ref":"peacock","seq":5251}}]"#
        );
        let cat = parse_brush_metadata(&one).unwrap();
        assert_eq!(cat.len(), 1);
        assert!(cat.get(B).is_some());

        assert!(parse_brush_metadata("[]").unwrap().is_empty());

        let dup = format!("[{0},{0}]", &one[1..one.len() - 1]);
        assert!(matches!(
            parse_brush_metadata(&dup),
            Err(IngestError::DuplicateId(_))
        ));

        let inconsistent = one.replace("\"seq\":5251", "\"seq\":1");
        assert!(matches!(
            parse_brush_metadata(&inconsistent),
            Err(IngestError::InconsistentEntry { .. })
        ));

        assert!(matches!(
            parse_brush_metadata("{"),
            Err(IngestError::Json(_))
        ));
    }

    #[test]
    fn profiles_validate_categories() {
        let ok = "participant_id,gender,age_group,game_exp,vr_exp,art_knowledge\np101,Female,16-25,RL,some,familiar\n";
        let profiles = parse_profiles(ok.as_bytes()).unwrap();
        assert_eq!(profiles[0].gender, Gender::Female);
        assert_eq!(profiles[0].game_exp, GameExp::Rarely);

        let bad = ok.replace(",RL,", ",XX,");
        let err = parse_profiles(bad.as_bytes()).unwrap_err();
        assert!(
            matches!(err, IngestError::UnknownCategory { line: 2, ref source } if source.field == "game_exp")
        );

        let dup = format!("{ok}p101,Male,26-35,MD,none,none\n");
        assert!(matches!(
            parse_profiles(dup.as_bytes()),
            Err(IngestError::DuplicateParticipant(_))
        ));
    }

    #[test]
    fn thirty_five_profiles() {
        let mut text =
            String::from("participant_id,gender,age_group,game_exp,vr_exp,art_knowledge\n");
        for i in 0..35 {
            let gender = if i < 20 { "Female" } else { "Male" };
            text.push_str(&format!("p{i},{gender},16-25,NA,none,familiar\n"));
        }
        let profiles = parse_profiles(text.as_bytes()).unwrap();
        assert_eq!(profiles.len(), 35);
        assert_eq!(
            parse_profiles(profiles_csv(&profiles).as_bytes()).unwrap(),
            profiles
        );
    }
}

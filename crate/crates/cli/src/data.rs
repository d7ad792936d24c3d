//! Loading a data directory: `traces/<pid>.csv`, `metadata.json` and
//! `profiles.csv`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use gazelens_core::fsutil::write_atomic;
use gazelens_core::ingest::{
    load_brush_metadata, load_profiles, load_session_trace, BrushCatalogue, SessionTrace,
};
use gazelens_core::model::{ParticipantProfile, SessionEvents};
use gazelens_core::segment::{bridge_blink_gaps, segment_gaze_events, BridgeOptions, Segmentation};

pub const TRACES_DIR: &str = "traces";
pub const METADATA_FILE: &str = "metadata.json";
pub const PROFILES_FILE: &str = "profiles.csv";

/// Trace files under `dir/traces`, sorted by name.
pub fn trace_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let traces = dir.join(TRACES_DIR);
    let entries = std::fs::read_dir(&traces)
        .with_context(|| format!("{}: cannot list traces", traces.display()))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .with_context(|| format!("{}: cannot list traces", traces.display()))?
            .path();
        if path.extension().is_some_and(|e| e == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(anyhow!("{}: no trace files", traces.display()));
    }
    Ok(paths)
}

pub fn load_trace(path: &Path) -> Result<SessionTrace> {
    load_session_trace(path).map_err(|e| anyhow!(e.in_file(path)))
}

pub fn load_traces(dir: &Path) -> Result<Vec<SessionTrace>> {
    trace_paths(dir)?
        .par_iter()
        .map(|p| load_trace(p))
        .collect()
}

pub fn load_catalogue(dir: &Path) -> Result<BrushCatalogue> {
    let path = dir.join(METADATA_FILE);
    load_brush_metadata(&path).map_err(|e| anyhow!(e.in_file(&path)))
}

pub fn load_profile_table(dir: &Path) -> Result<Vec<ParticipantProfile>> {
    let path = dir.join(PROFILES_FILE);
    load_profiles(&path).map_err(|e| anyhow!(e.in_file(&path)))
}

pub fn trace_file(trace: &SessionTrace) -> String {
    format!("{TRACES_DIR}/{}.csv", trace.participant_id)
}

pub fn segment_trace(trace: &SessionTrace) -> Result<Segmentation> {
    segment_gaze_events(trace).with_context(|| trace_file(trace))
}

/// Gaze events per session, bridged when `bridge` is given.
pub fn session_events(
    traces: &[SessionTrace],
    bridge: Option<BridgeOptions>,
) -> Result<Vec<SessionEvents>> {
    traces
        .par_iter()
        .map(|trace| {
            let seg = segment_trace(trace)?;
            let events = match bridge {
                Some(opts) => bridge_blink_gaps(&seg.events, trace, opts),
                None => seg.events,
            };
            Ok(SessionEvents {
                participant_id: trace.participant_id.clone(),
                events,
            })
        })
        .collect()
}

/// Every event must reference a stroke in the catalogue.
pub fn check_brushes(sessions: &[SessionEvents], catalogue: &BrushCatalogue) -> Result<()> {
    for s in sessions {
        if let Some(e) = s.events.iter().find(|e| !catalogue.contains(&e.brush_id)) {
            return Err(anyhow!(
                "{TRACES_DIR}/{}.csv: brush {} is not in {METADATA_FILE}",
                s.participant_id,
                e.brush_id
            ));
        }
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("{}: cannot write", path.display()))
}

//! Subcommand arguments and their implementations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use rayon::prelude::*;

use gazelens_classify::persist::save_model;
use gazelens_classify::tensor::build_session_tensor;
use gazelens_classify::{experiment, run_experiment, Architecture, ExperimentConfig, Hyperparams};
use gazelens_core::analytics::{
    colour_aggregation, colour_stats_csv, convex_hull, correlation_matrix, elevation_metrics,
    orientation_histogram, walk_csv, walk_metrics, Channel, DEFAULT_DIP_THRESHOLD_M,
    DEFAULT_MIN_DIP_MS, DEFAULT_N_PHI, DEFAULT_N_THETA, DEFAULT_TOP_N,
};
use gazelens_core::attention::{distinct_count, kmeans_1d, wcss_csv, KMeansConfig, DEFAULT_K};
use gazelens_core::model::{ColourOrder, GazeEvent, ProfileField, Signal};
use gazelens_core::segment::{bridge_blink_gaps, events_csv, BridgeOptions, DEFAULT_MAX_GAP_MS};
use gazelens_core::synth::{generate_cohort_with, write_cohort, DEFAULT_EVENTS_PER_SESSION};
use gazelens_core::visualize::{
    aggregate_brush_attention, attention_csv, export_annotated_metadata, render_walk_svg, Ramp,
    DEFAULT_THRESHOLD_S,
};

use crate::data::{
    check_brushes, load_catalogue, load_profile_table, load_trace, load_traces, segment_trace,
    session_events, trace_file, write_text,
};

#[derive(Args, Debug, Clone)]
pub struct BridgeArgs {
    /// Longest same-stroke gap, in ms, that bridging may close.
    #[arg(long, default_value_t = DEFAULT_MAX_GAP_MS)]
    pub max_gap_ms: u64,
    /// Bridge short same-stroke gaps even without a recorded blink.
    #[arg(long)]
    pub bridge_any_gap: bool,
    /// Keep raw events; no bridging.
    #[arg(long)]
    pub no_bridge: bool,
}

impl BridgeArgs {
    pub fn options(&self) -> Option<BridgeOptions> {
        (!self.no_bridge).then_some(BridgeOptions {
            max_gap_ms: self.max_gap_ms,
            require_blink: !self.bridge_any_gap,
        })
    }
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Args, Debug, Clone)]
pub struct IngestArgs {
    /// Data directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Per-session summary CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let traces = load_traces(&args.data)?;
    let catalogue = load_catalogue(&args.data)?;
    let profiles = load_profile_table(&args.data)?;
    let sessions = session_events(&traces, None)?;
    check_brushes(&sessions, &catalogue)?;

    let mut csv =
        String::from("participant_id,frames,discarded_invalid,focus_in,gaze_events,has_profile\n");
    let (mut frames, mut focus_in, mut events) = (0, 0, 0);
    for (trace, session) in traces.iter().zip(&sessions) {
        let n_in = trace
            .frames
            .iter()
            .filter(|f| f.signal == Signal::FocusIn)
            .count();
        let has_profile = profiles
            .iter()
            .any(|p| p.participant_id == trace.participant_id);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            trace.participant_id,
            trace.frames.len(),
            trace.discarded_invalid,
            n_in,
            session.events.len(),
            has_profile
        );
        frames += trace.frames.len();
        focus_in += n_in;
        events += session.events.len();
    }
    println!("sessions: {}", traces.len());
    println!("frames: {frames}");
    println!("focus-in signals: {focus_in}");
    println!("gaze events: {events}");
    println!("strokes: {}", catalogue.len());
    println!("profiles: {}", profiles.len());
    if let Some(out) = &args.out {
        write_text(out, &csv)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// segment

#[derive(Args, Debug, Clone)]
pub struct SegmentArgs {
    /// A single trace CSV; `--out` is then the events CSV.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub trace: Option<PathBuf>,
    /// Data directory; `--out` is then a directory of `<pid>.csv` files.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

fn segment_events(
    trace: &gazelens_core::ingest::SessionTrace,
    bridge: Option<BridgeOptions>,
) -> Result<Vec<GazeEvent>> {
    let seg = segment_trace(trace)?;
    Ok(match bridge {
        Some(opts) => bridge_blink_gaps(&seg.events, trace, opts),
        None => seg.events,
    })
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    let bridge = args.bridge.options();
    if let Some(path) = &args.trace {
        let trace = load_trace(path)?;
        let events = segment_events(&trace, bridge)?;
        println!("{}: {} gaze events", trace.participant_id, events.len());
        return write_text(&args.out, &events_csv(&events));
    }
    let data = args.data.as_ref().expect("clap requires --trace or --data");
    let traces = load_traces(data)?;
    let sessions = session_events(&traces, bridge)?;
    for s in &sessions {
        write_text(
            &args.out.join(format!("{}.csv", s.participant_id)),
            &events_csv(&s.events),
        )?;
    }
    println!(
        "{} sessions, {} gaze events",
        sessions.len(),
        sessions.iter().map(|s| s.events.len()).sum::<usize>()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// cluster

#[derive(Args, Debug, Clone)]
pub struct ClusterArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Largest k on the WCSS curve.
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

pub fn cluster(args: &ClusterArgs) -> Result<()> {
    let traces = load_traces(&args.data)?;
    let sessions = session_events(&traces, args.bridge.options())?;
    let durations: Vec<f64> = sessions
        .iter()
        .flat_map(|s| s.events.iter().map(|e| e.duration_s))
        .collect();
    if durations.is_empty() {
        return Err(anyhow!(
            "{}: no gaze events to cluster",
            args.data.display()
        ));
    }

    let k_max = args.k_max.min(distinct_count(&durations));
    let curve = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let cfg = KMeansConfig {
                restarts: args.restarts,
                ..KMeansConfig::new(k, args.seed)
            };
            kmeans_1d(&durations, &cfg).map(|fit| (k, fit.wcss))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = KMeansConfig {
        restarts: args.restarts,
        ..KMeansConfig::new(args.k, args.seed)
    };
    let fit = kmeans_1d(&durations, &cfg).context("clustering gaze durations")?;

    let mut centroids = String::from("cluster,label,centroid_s,size\n");
    for (i, (c, label)) in fit
        .model
        .centroids
        .iter()
        .zip(&fit.model.labels)
        .enumerate()
    {
        let size = fit.assignments.iter().filter(|&&a| a == i).count();
        let _ = writeln!(centroids, "{i},{label},{c},{size}");
    }
    let mut labelled =
        String::from("participant_id,brush_id,start_ms,end_ms,duration_s,cluster,label\n");
    let mut idx = 0;
    for s in &sessions {
        for e in &s.events {
            let c = fit.assignments[idx];
            idx += 1;
            let _ = writeln!(
                labelled,
                "{},{},{},{},{},{c},{}",
                s.participant_id,
                e.brush_id,
                e.start_ms,
                e.end_ms,
                e.duration_s,
                fit.model.labels[c]
            );
        }
    }
    write_text(&args.out.join("wcss.csv"), &wcss_csv(&curve))?;
    write_text(&args.out.join("centroids.csv"), &centroids)?;
    write_text(&args.out.join("labelled_events.csv"), &labelled)?;
    println!(
        "{} durations, centroids (s): {:?}",
        durations.len(),
        fit.model.centroids
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Args, Debug, Clone)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Head-height drop below the session median, in metres, that counts as a dip.
    #[arg(long, default_value_t = DEFAULT_DIP_THRESHOLD_M)]
    pub dip_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_DIP_MS)]
    pub min_dip_ms: u64,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    pub top_n: usize,
    /// Profile field to group colour statistics by.
    #[arg(long)]
    pub group_by: Option<ProfileField>,
    #[arg(long, default_value = "alpha-high")]
    pub colour_order: ColourOrder,
    #[arg(long, default_value_t = DEFAULT_N_THETA)]
    pub n_theta: usize,
    #[arg(long, default_value_t = DEFAULT_N_PHI)]
    pub n_phi: usize,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    if args.n_theta == 0 || args.n_phi == 0 {
        return Err(anyhow!("--n-theta and --n-phi must be positive"));
    }
    let traces = load_traces(&args.data)?;
    let catalogue = load_catalogue(&args.data)?;
    let profiles = match args.group_by {
        Some(_) => load_profile_table(&args.data)?,
        None => Vec::new(),
    };
    let sessions = session_events(&traces, args.bridge.options())?;
    check_brushes(&sessions, &catalogue)?;

    let mut walk = String::new();
    let mut elevation = String::from("participant_id,baseline_m,dips,dip_threshold_m,min_dip_ms\n");
    let mut dips = String::from("participant_id,start_ms,end_ms,duration_ms,min_y\n");
    for trace in &traces {
        let m = walk_metrics(trace).with_context(|| trace_file(trace))?;
        let table = walk_csv(&trace.participant_id, &m);
        let (header, row) = table.split_once('\n').expect("walk table has a header");
        if walk.is_empty() {
            walk = format!("{header}\n");
        }
        walk.push_str(row);
        let hull = convex_hull(&m.points);
        let svg = render_walk_svg(&m, Some(&hull)).with_context(|| trace_file(trace))?;
        write_text(
            &args
                .out
                .join("walks")
                .join(format!("{}.svg", trace.participant_id)),
            &svg,
        )?;

        let elev = elevation_metrics(trace, args.dip_threshold, args.min_dip_ms)
            .with_context(|| trace_file(trace))?;
        let _ = writeln!(
            elevation,
            "{},{},{},{},{}",
            trace.participant_id,
            elev.baseline_m,
            elev.dips.len(),
            elev.dip_threshold_m,
            elev.min_dip_duration_ms
        );
        for d in &elev.dips {
            let _ = writeln!(
                dips,
                "{},{},{},{},{}",
                trace.participant_id,
                d.start_ms,
                d.end_ms,
                d.end_ms - d.start_ms,
                d.min_y
            );
        }
    }

    let all_events: Vec<GazeEvent> = sessions
        .iter()
        .flat_map(|s| s.events.iter().cloned())
        .collect();
    let orientation = orientation_histogram(&all_events, args.n_theta, args.n_phi);
    let colours = colour_aggregation(
        &sessions,
        &catalogue,
        &profiles,
        args.group_by,
        args.top_n,
        args.colour_order,
    )
    .with_context(|| format!("{}: colour statistics", args.data.display()))?;
    let correlation = correlation_matrix(&traces, &Channel::ALL)
        .with_context(|| format!("{}: channel correlation", args.data.display()))?;

    write_text(&args.out.join("walk.csv"), &walk)?;
    write_text(&args.out.join("elevation.csv"), &elevation)?;
    write_text(&args.out.join("dips.csv"), &dips)?;
    write_text(&args.out.join("orientation.csv"), &orientation.to_csv())?;
    write_text(&args.out.join("colours.csv"), &colour_stats_csv(&colours))?;
    write_text(&args.out.join("correlation.csv"), &correlation.to_csv())?;
    println!(
        "{} sessions, {} gaze events analysed",
        traces.len(),
        all_events.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// classify

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Profile field to predict.
    #[arg(long)]
    pub target: ProfileField,
    #[arg(long, default_value = "cnn")]
    pub arch: Architecture,
    /// Run `r` uses seed `seed + r` for its split and training.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[arg(long, default_value_t = experiment::DEFAULT_TRAIN_FRACTION)]
    pub train_fraction: f64,
    /// Zero-pad sessions with fewer events than the sequence length.
    #[arg(long)]
    pub pad: bool,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
}

pub fn classify(args: &ClassifyArgs) -> Result<()> {
    if args.runs == 0 {
        return Err(anyhow!("--runs must be at least 1"));
    }
    let traces = load_traces(&args.data)?;
    let profiles = load_profile_table(&args.data)?;
    let sessions = session_events(&traces, None)?;
    let tensors = sessions
        .iter()
        .map(|s| {
            let profile = profiles
                .iter()
                .find(|p| p.participant_id == s.participant_id)
                .ok_or_else(|| {
                    anyhow!(
                        "{}: no profile for participant {}",
                        crate::data::PROFILES_FILE,
                        s.participant_id
                    )
                })?;
            build_session_tensor(&s.events, profile, args.pad)
                .with_context(|| format!("{}/{}.csv", crate::data::TRACES_DIR, s.participant_id))
        })
        .collect::<Result<Vec<_>>>()?;

    let config = ExperimentConfig {
        hyper: Hyperparams {
            max_epochs: args.max_epochs,
            patience: args.patience,
            batch_size: args.batch_size,
            learning_rate: args.learning_rate,
            ..Hyperparams::default()
        },
        train_fraction: args.train_fraction,
        ..ExperimentConfig::new(args.target, args.arch)
    };
    let results = (0..args.runs)
        .into_par_iter()
        .map(|r| run_experiment(&tensors, &config, r, args.seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut splits = String::from("run,participant_id,role\n");
    for (m, model) in &results {
        save_model(
            model,
            &args.out.join("models").join(format!("run_{}.json", m.run)),
        )?;
        for (ids, role) in [(&m.train_ids, "train"), (&m.validation_ids, "validation")] {
            for id in ids {
                let _ = writeln!(splits, "{},{id},{role}", m.run);
            }
        }
        println!("run {}: top1 {:.3} top2 {:.3}", m.run, m.top1, m.top2);
    }
    let metrics: Vec<_> = results.into_iter().map(|(m, _)| m).collect();
    write_text(
        &args.out.join("metrics.csv"),
        &experiment::metrics_csv(&metrics),
    )?;
    write_text(&args.out.join("splits.csv"), &splits)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// visualize

#[derive(Args, Debug, Clone)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Mean attention per session, in seconds, at which a stroke is fully shown.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_S)]
    pub threshold: f64,
    #[arg(long, default_value = "linear")]
    pub ramp: Ramp,
    #[arg(long, default_value = "alpha-high")]
    pub colour_order: ColourOrder,
    #[command(flatten)]
    pub bridge: BridgeArgs,
}

pub fn visualize(args: &VisualizeArgs) -> Result<()> {
    if !(args.threshold.is_finite() && args.threshold > 0.0) {
        return Err(anyhow!("--threshold must be a positive number of seconds"));
    }
    let traces = load_traces(&args.data)?;
    let catalogue = load_catalogue(&args.data)?;
    let sessions = session_events(&traces, args.bridge.options())?;
    check_brushes(&sessions, &catalogue)?;
    let events: Vec<GazeEvent> = sessions.into_iter().flat_map(|s| s.events).collect();
    let attention = aggregate_brush_attention(&events, traces.len(), Some(&catalogue));

    let path = args.out.join("annotated_metadata.json");
    export_annotated_metadata(
        &path,
        &catalogue,
        &attention,
        args.threshold,
        args.ramp,
        args.colour_order,
    )?;
    write_text(
        &args.out.join("attention.csv"),
        &attention_csv(&attention, args.threshold),
    )?;
    let shown = attention
        .values()
        .filter(|a| a.mean_duration_per_session_s >= args.threshold)
        .count();
    println!(
        "{} strokes, {shown} at or above {} s per session",
        attention.len(),
        args.threshold
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Number of participants.
    #[arg(long)]
    pub n: usize,
    /// Probability that a participant's movement archetype follows their gender.
    #[arg(long)]
    pub coupling: f64,
    #[arg(long)]
    pub seed: u64,
    /// Output data directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Gaze events per session.
    #[arg(long, default_value_t = DEFAULT_EVENTS_PER_SESSION)]
    pub events: usize,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cohort = generate_cohort_with(args.n, args.coupling, args.seed, args.events)?;
    write_cohort(&cohort, &args.out)?;
    let mut by_archetype: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &cohort.members {
        *by_archetype.entry(m.archetype.name()).or_default() += 1;
    }
    println!(
        "{} participants, {} strokes, archetypes {by_archetype:?}",
        cohort.members.len(),
        cohort.catalogue.len()
    );
    Ok(())
}

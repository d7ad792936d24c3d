//! Core pipeline for VR art-encounter telemetry.
//!
//! The crate is organised bottom-up: [`model`] holds the shared domain types
//! and the brushstroke identifier codec, [`ingest`] reads the three input
//! files, [`segment`] turns raw gaze signals into [`model::GazeEvent`]s,
//! [`attention`] clusters gaze durations, [`analytics`] computes movement,
//! orientation, colour and correlation summaries, [`visualize`] produces the
//! attention-driven opacity and saturation transforms, and [`synth`]
//! generates seeded synthetic sessions and cohorts.

pub mod analytics;
pub mod attention;
pub mod fsutil;
pub mod ingest;
pub mod model;
pub mod segment;
pub mod synth;
pub mod visualize;

pub use model::{
    BrushId, ColourOrder, EyeDirection, GazeEvent, HeadPose, ParticipantProfile, PlayerPose, Rgba,
    Signal, TelemetryFrame,
};

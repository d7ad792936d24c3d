//! Domain types shared across the pipeline.
//!
//! Brushstrokes are identified by strings of the form
//! `brushtype_startingcolour_artworkref_seq`, e.g.
//! `OilPaint_4278853398_peacock_5251`. [`BrushId`] is the parsed form and
//! round-trips losslessly through [`BrushId::parse`] / [`fmt::Display`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the eye-direction norm (sensor noise around the unit sphere).
pub const EYE_NORM_TOLERANCE: f64 = 1e-2;
/// Tolerance on the head-rotation quaternion norm.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("malformed brush id {id:?}: {reason}")]
    MalformedId { id: String, reason: &'static str },
    #[error("invalid token {token:?}: tokens must be non-empty and alphanumeric")]
    InvalidToken { token: String },
}

/// Parsed brushstroke identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BrushId {
    pub brush_type: String,
    pub start_colour_packed: u32,
    pub artwork_ref: String,
    pub seq: u64,
}

fn valid_token(t: &str) -> bool {
    !t.is_empty() && t.chars().all(char::is_alphanumeric)
}

/// Canonical unsigned decimal: digits only, no leading zeros except "0".
fn canonical_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'))
}

impl BrushId {
    pub fn new(
        brush_type: impl Into<String>,
        start_colour_packed: u32,
        artwork_ref: impl Into<String>,
        seq: u64,
    ) -> Result<Self, IdError> {
        let id = BrushId {
            brush_type: brush_type.into(),
            start_colour_packed,
            artwork_ref: artwork_ref.into(),
            seq,
        };
        id.validate()?;
        Ok(id)
    }

    pub fn validate(&self) -> Result<(), IdError> {
        for token in [&self.brush_type, &self.artwork_ref] {
            if !valid_token(token) {
                return Err(IdError::InvalidToken {
                    token: token.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn parse(s: &str) -> Result<Self, IdError> {
        let malformed = |reason| IdError::MalformedId {
            id: s.to_string(),
            reason,
        };
        let fields: Vec<&str> = s.split('_').collect();
        if fields.len() != 4 {
            return Err(malformed(
                "expected exactly four underscore-separated fields",
            ));
        }
        let (brush_type, colour, artwork_ref, seq) = (fields[0], fields[1], fields[2], fields[3]);
        if !valid_token(brush_type) || !valid_token(artwork_ref) {
            return Err(malformed(
                "brush type and artwork reference must be non-empty alphanumeric",
            ));
        }
        if !canonical_digits(colour) {
            return Err(malformed(
                "starting colour is not a canonical unsigned integer",
            ));
        }
        if !canonical_digits(seq) {
            return Err(malformed(
                "sequence number is not a canonical unsigned integer",
            ));
        }
        let start_colour_packed = colour
            .parse::<u32>()
            .map_err(|_| malformed("starting colour does not fit in 32 bits"))?;
        let seq = seq
            .parse::<u64>()
            .map_err(|_| malformed("sequence number out of range"))?;
        Ok(BrushId {
            brush_type: brush_type.to_string(),
            start_colour_packed,
            artwork_ref: artwork_ref.to_string(),
            seq,
        })
    }

    /// Formats the identifier, rejecting tokens that would not parse back.
    pub fn format(&self) -> Result<String, IdError> {
        self.validate()?;
        Ok(self.to_string())
    }

    pub fn colour(&self, order: ColourOrder) -> Rgba {
        Rgba::unpack(self.start_colour_packed, order)
    }
}

impl fmt::Display for BrushId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}_{}_{}",
            self.brush_type, self.start_colour_packed, self.artwork_ref, self.seq
        )
    }
}

impl FromStr for BrushId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BrushId::parse(s)
    }
}

/// Byte layout of a packed 32-bit colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColourOrder {
    /// `0xAARRGGBB`: every observed value has `0xFF` in the top byte.
    #[default]
    AlphaHigh,
    /// `0xRRGGBBAA`, the literal reading of the "RGBA" label.
    RgbaHigh,
}

impl FromStr for ColourOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha-high" | "argb" => Ok(ColourOrder::AlphaHigh),
            "rgba-high" | "rgba" => Ok(ColourOrder::RgbaHigh),
            other => Err(format!(
                "unknown colour order {other:?} (expected alpha-high or rgba-high)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const fn new(r: u8, g: u8, b: u8, a: u8) -> Self {
        Rgba { r, g, b, a }
    }

    pub fn unpack(packed: u32, order: ColourOrder) -> Self {
        let [b3, b2, b1, b0] = packed.to_be_bytes();
        match order {
            ColourOrder::AlphaHigh => Rgba::new(b2, b1, b0, b3),
            ColourOrder::RgbaHigh => Rgba::new(b3, b2, b1, b0),
        }
    }

    pub fn pack(self, order: ColourOrder) -> u32 {
        let bytes = match order {
            ColourOrder::AlphaHigh => [self.a, self.r, self.g, self.b],
            ColourOrder::RgbaHigh => [self.r, self.g, self.b, self.a],
        };
        u32::from_be_bytes(bytes)
    }

    /// `0xRRGGBB`, used as a stable sort key when alpha is ignored.
    pub fn rgb_key(self) -> u32 {
        u32::from_be_bytes([0, self.r, self.g, self.b])
    }

    /// Rec. 709 luma on 8-bit channel values.
    pub fn luma(self) -> f64 {
        0.2126 * f64::from(self.r) + 0.7152 * f64::from(self.g) + 0.0722 * f64::from(self.b)
    }

    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

/// Decodes a packed starting colour with the default (alpha-high) layout.
pub fn decode_packed_colour(packed: u32) -> Rgba {
    Rgba::unpack(packed, ColourOrder::AlphaHigh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Signal {
    FocusIn,
    NormalFrame,
    FocusOut,
    BlinkStart,
    BlinkEnd,
}

impl Signal {
    pub const ALL: [Signal; 5] = [
        Signal::FocusIn,
        Signal::NormalFrame,
        Signal::FocusOut,
        Signal::BlinkStart,
        Signal::BlinkEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Signal::FocusIn => "FOCUS_IN",
            Signal::NormalFrame => "NORMAL_FRAME",
            Signal::FocusOut => "FOCUS_OUT",
            Signal::BlinkStart => "BLINK_START",
            Signal::BlinkEnd => "BLINK_END",
        }
    }

    /// Gaze signals must carry a brush id; blink signals need not.
    pub fn is_gaze(self) -> bool {
        matches!(
            self,
            Signal::FocusIn | Signal::NormalFrame | Signal::FocusOut
        )
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Signal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Signal::ALL
            .into_iter()
            .find(|sig| sig.as_str() == s)
            .ok_or_else(|| format!("unknown signal token {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EyeDirection {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EyeDirection {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        EyeDirection { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= EYE_NORM_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Rotation quaternion `(x, y, z, w)`.
    pub rot: [f64; 4],
}

impl HeadPose {
    pub const IDENTITY_ROTATION: [f64; 4] = [0.0, 0.0, 0.0, 1.0];

    pub const fn at(x: f64, y: f64, z: f64) -> Self {
        HeadPose {
            x,
            y,
            z,
            rot: Self::IDENTITY_ROTATION,
        }
    }

    pub fn rotation_norm(&self) -> f64 {
        self.rot.iter().map(|q| q * q).sum::<f64>().sqrt()
    }
}

impl Default for HeadPose {
    fn default() -> Self {
        HeadPose::at(0.0, 0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlayerPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// One row of raw telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryFrame {
    /// Milliseconds since session start.
    pub timestamp_ms: u64,
    pub signal: Signal,
    pub brush_id: Option<BrushId>,
    pub eye: EyeDirection,
    pub head: HeadPose,
    pub player: PlayerPose,
    pub valid: bool,
}

/// A contiguous interval of attention on one brushstroke.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeEvent {
    pub brush_id: BrushId,
    pub start_ms: u64,
    pub end_ms: u64,
    pub duration_s: f64,
    pub head_at_start: HeadPose,
    pub eye_at_start: EyeDirection,
    /// Set when the event was merged across a blink.
    pub bridged: bool,
}

impl GazeEvent {
    /// Builds an event; `end_ms` must be strictly after `start_ms`.
    pub fn new(
        brush_id: BrushId,
        start_ms: u64,
        end_ms: u64,
        head_at_start: HeadPose,
        eye_at_start: EyeDirection,
    ) -> Self {
        debug_assert!(end_ms > start_ms, "gaze event must have positive length");
        GazeEvent {
            brush_id,
            start_ms,
            end_ms,
            duration_s: duration_s(start_ms, end_ms),
            head_at_start,
            eye_at_start,
            bridged: false,
        }
    }
}

/// Gaze events of one participant session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionEvents {
    pub participant_id: String,
    pub events: Vec<GazeEvent>,
}

pub fn duration_s(start_ms: u64, end_ms: u64) -> f64 {
    (end_ms - start_ms) as f64 / 1000.0
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {field} category {value:?}")]
pub struct CategoryError {
    pub field: &'static str,
    pub value: String,
}

/// Closed categorical sets used by the questionnaire.
pub trait Category: Sized + Copy + Eq + 'static {
    const FIELD: &'static str;
    const ALL: &'static [Self];

    fn token(self) -> &'static str;

    fn parse_token(s: &str) -> Result<Self, CategoryError> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.token() == s)
            .ok_or_else(|| CategoryError {
                field: Self::FIELD,
                value: s.to_string(),
            })
    }

    fn index(self) -> usize {
        Self::ALL
            .iter()
            .position(|c| *c == self)
            .expect("category listed in ALL")
    }
}

macro_rules! category {
    ($name:ident, $field:literal, { $($variant:ident => $tok:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl Category for $name {
            const FIELD: &'static str = $field;
            const ALL: &'static [Self] = &[$($name::$variant),+];

            fn token(self) -> &'static str {
                match self { $($name::$variant => $tok),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

category!(Gender, "gender", { Female => "Female", Male => "Male" });
category!(AgeGroup, "age_group", {
    From16To25 => "16-25",
    From26To35 => "26-35",
    From36To45 => "36-45",
    Over45 => "46+",
});
category!(GameExp, "game_exp", {
    ManyTimesDaily => "MD",
    OnceADay => "OD",
    OnceAWeek => "OW",
    Rarely => "RL",
    NotAtAll => "NA",
});
category!(VrExp, "vr_exp", { Never => "none", Some => "some", Very => "very" });
category!(ArtKnowledge, "art_knowledge", {
    Unfamiliar => "none",
    Familiar => "familiar",
    Extensive => "extensive",
});

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub participant_id: String,
    pub gender: Gender,
    pub age_group: AgeGroup,
    pub game_exp: GameExp,
    pub vr_exp: VrExp,
    pub art_knowledge: ArtKnowledge,
}

/// A questionnaire field, used for grouping and as a classification target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileField {
    Gender,
    AgeGroup,
    GameExp,
    VrExp,
    ArtKnowledge,
}

impl ProfileField {
    pub const ALL: [ProfileField; 5] = [
        ProfileField::Gender,
        ProfileField::AgeGroup,
        ProfileField::GameExp,
        ProfileField::VrExp,
        ProfileField::ArtKnowledge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileField::Gender => Gender::FIELD,
            ProfileField::AgeGroup => AgeGroup::FIELD,
            ProfileField::GameExp => GameExp::FIELD,
            ProfileField::VrExp => VrExp::FIELD,
            ProfileField::ArtKnowledge => ArtKnowledge::FIELD,
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            ProfileField::Gender => Gender::ALL.len(),
            ProfileField::AgeGroup => AgeGroup::ALL.len(),
            ProfileField::GameExp => GameExp::ALL.len(),
            ProfileField::VrExp => VrExp::ALL.len(),
            ProfileField::ArtKnowledge => ArtKnowledge::ALL.len(),
        }
    }
}

impl FromStr for ProfileField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProfileField::ALL
            .into_iter()
            .find(|f| f.name() == s || (*f == ProfileField::AgeGroup && s == "age"))
            .ok_or_else(|| format!("unknown profile field {s:?}"))
    }
}

impl fmt::Display for ProfileField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ParticipantProfile {
    /// Class index of `field` within its closed category set.
    pub fn class_index(&self, field: ProfileField) -> usize {
        match field {
            ProfileField::Gender => self.gender.index(),
            ProfileField::AgeGroup => self.age_group.index(),
            ProfileField::GameExp => self.game_exp.index(),
            ProfileField::VrExp => self.vr_exp.index(),
            ProfileField::ArtKnowledge => self.art_knowledge.index(),
        }
    }

    pub fn category_token(&self, field: ProfileField) -> &'static str {
        match field {
            ProfileField::Gender => self.gender.token(),
            ProfileField::AgeGroup => self.age_group.token(),
            ProfileField::GameExp => self.game_exp.token(),
            ProfileField::VrExp => self.vr_exp.token(),
            ProfileField::ArtKnowledge => self.art_knowledge.token(),
        }
    }
}

//! Seeded synthetic sessions and cohorts.
//!
//! A session is a head random walk that reflects at the walls of its zone,
//! with gaze events laid out back to back in time. Each event becomes
//! `FOCUS_IN`, heartbeats every 30 ms and `FOCUS_OUT`. Some events are cut in
//! two by a short blink; [`SessionTruth`] keeps the uncut events so bridging
//! can be checked exactly.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::ingest::{
    brush_metadata_json, profiles_csv, session_trace_csv, BrushCatalogue, SessionTrace,
};
use crate::model::{
    AgeGroup, ArtKnowledge, BrushId, Category, EyeDirection, GameExp, GazeEvent, Gender, HeadPose,
    ParticipantProfile, PlayerPose, Signal, TelemetryFrame, VrExp,
};
use crate::segment::HEARTBEAT_MS;

pub const ZONE_WIDTH_M: f64 = 3.0;
pub const ZONE_DEPTH_M: f64 = 4.0;
pub const STATIONARY_BOX_M: f64 = 0.5;
pub const DEFAULT_EVENTS_PER_SESSION: usize = 600;
pub const DEFAULT_CATALOGUE_COLOURS: usize = 64;
pub const DEFAULT_STROKES_PER_COLOUR: usize = 3;
pub const ARTWORK_REF: &str = "synthart";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("brush catalogue is empty")]
    EmptyCatalogue,
    #[error("catalogue needs at least two strokes so consecutive gazes can differ")]
    SingleStrokeCatalogue,
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("cohort needs at least 2 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("coupling must lie in [0, 1], got {0}")]
    InvalidCoupling(f64),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Archetype {
    /// Roams the whole walk zone.
    Wanderer,
    /// Moves slowly across the zone, stopping often.
    Explorer,
    /// Stays inside a small box around the start point.
    Stationary,
}

impl Archetype {
    pub const ALL: [Archetype; 3] = [
        Archetype::Wanderer,
        Archetype::Explorer,
        Archetype::Stationary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::Wanderer => "wanderer",
            Archetype::Explorer => "explorer",
            Archetype::Stationary => "stationary",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Archetype {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Archetype::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown archetype {s:?}"))
    }
}

/// Four-component normal mixture of gaze durations in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeMixture {
    pub weights: [f64; 4],
    pub means_s: [f64; 4],
    pub stds_s: [f64; 4],
}

impl Default for GazeMixture {
    fn default() -> Self {
        GazeMixture {
            weights: [0.50, 0.38, 0.10, 0.02],
            means_s: [0.047, 0.338, 0.953, 2.488],
            stds_s: [0.01, 0.08, 0.2, 0.5],
        }
    }
}

impl GazeMixture {
    pub fn validate(&self) -> Result<(), SynthError> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(SynthError::InvalidParams(format!(
                "mixture weights must be in [0,1] and sum to 1, got {sum}"
            )));
        }
        if self.means_s.iter().any(|m| !(*m > 0.0)) || self.stds_s.iter().any(|s| !(*s >= 0.0)) {
            return Err(SynthError::InvalidParams(
                "mixture means must be positive and stds non-negative".into(),
            ));
        }
        Ok(())
    }

    /// One duration in whole milliseconds, at least 1.
    pub fn sample_ms<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = 3;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = i;
                break;
            }
        }
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let s = self.means_s[comp] + self.stds_s[comp] * z;
        ((s * 1000.0).round().max(1.0)) as u64
    }
}

/// Behaviour parameters of one synthetic session.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchetypeParams {
    pub archetype: Archetype,
    /// Mean walking speed in m/s; per-step lengths are `speed * dt` scaled by
    /// a lognormal factor.
    pub speed_mps: f64,
    /// Heading diffusion in rad per sqrt(second).
    pub turn_rate: f64,
    /// Zone width (x) and depth (z) in metres, centred on the origin.
    pub zone: (f64, f64),
    /// Side of the box the walk is confined to around its start point. `None`
    /// uses the whole zone.
    pub local_box_m: Option<f64>,
    pub mixture: GazeMixture,
    pub events_per_session: usize,
    /// Mean pause between gazes in ms.
    pub mean_gap_ms: f64,
    /// Probability that a pause between gazes contains a blink.
    pub blink_rate: f64,
    /// Probability that an event of at least 300 ms is cut by a blink.
    pub split_rate: f64,
    /// Crouches per minute.
    pub dip_rate_per_min: f64,
    /// Mean inclination of gaze directions, radians from straight up.
    pub gaze_inclination: f64,
}

impl ArchetypeParams {
    pub fn for_archetype(archetype: Archetype) -> Self {
        let base = ArchetypeParams {
            archetype,
            speed_mps: 0.6,
            turn_rate: 1.0,
            zone: (ZONE_WIDTH_M, ZONE_DEPTH_M),
            local_box_m: None,
            mixture: GazeMixture::default(),
            events_per_session: DEFAULT_EVENTS_PER_SESSION,
            mean_gap_ms: 250.0,
            blink_rate: 0.15,
            split_rate: 0.03,
            dip_rate_per_min: 0.5,
            gaze_inclination: 1.75,
        };
        match archetype {
            Archetype::Wanderer => base,
            Archetype::Explorer => ArchetypeParams {
                speed_mps: 0.25,
                turn_rate: 1.5,
                dip_rate_per_min: 1.5,
                gaze_inclination: FRAC_PI_2,
                ..base
            },
            Archetype::Stationary => ArchetypeParams {
                speed_mps: 0.08,
                turn_rate: 2.0,
                local_box_m: Some(STATIONARY_BOX_M),
                gaze_inclination: 1.30,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.mixture.validate()?;
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        if !(self.zone.0 > 0.0 && self.zone.1 > 0.0) {
            return bad("zone bounds must be positive");
        }
        if let Some(b) = self.local_box_m {
            if !(b > 0.0 && b <= self.zone.0 && b <= self.zone.1) {
                return bad("local box must be positive and fit inside the zone");
            }
        }
        if !(self.speed_mps >= 0.0
            && self.turn_rate >= 0.0
            && self.mean_gap_ms >= 0.0
            && self.dip_rate_per_min >= 0.0)
        {
            return bad("rates must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.blink_rate) || !(0.0..=1.0).contains(&self.split_rate) {
            return bad("blink and split rates are probabilities");
        }
        if self.events_per_session == 0 {
            return bad("events_per_session must be positive");
        }
        Ok(())
    }
}

/// What the generator planted, before any blink splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTruth {
    pub events: Vec<GazeEvent>,
    /// Events cut in two by a blink.
    pub split_events: usize,
    /// All blink pairs, including those in pauses.
    pub blink_pairs: usize,
}

/// `n_colours` distinct opaque colours, `per_colour` strokes each.
pub fn generate_catalogue(n_colours: usize, per_colour: usize, seed: u64) -> BrushCatalogue {
    const TYPES: [&str; 4] = ["OilPaint", "Ink", "Marker", "Light"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut colours: Vec<u32> = Vec::with_capacity(n_colours);
    while colours.len() < n_colours.min(1 << 24) {
        let c = 0xFF00_0000 | (rng.random::<u32>() & 0x00FF_FFFF);
        if !colours.contains(&c) {
            colours.push(c);
        }
    }
    let mut cat = BrushCatalogue::new();
    let mut seq = 1;
    for &colour in &colours {
        for _ in 0..per_colour {
            let ty = TYPES[rng.random_range(0..TYPES.len())];
            let id = BrushId::new(ty, colour, ARTWORK_REF, seq)
                .expect("generated tokens are alphanumeric");
            cat.insert(id).expect("sequence numbers are unique");
            seq += 1;
        }
    }
    cat
}

struct Walker {
    x: f64,
    z: f64,
    heading: f64,
    t_ms: u64,
    bounds: (f64, f64, f64, f64),
}

impl Walker {
    fn reflect(v: f64, lo: f64, hi: f64) -> (f64, bool) {
        let mut v = v;
        let mut flipped = false;
        while v < lo || v > hi {
            v = if v < lo { 2.0 * lo - v } else { 2.0 * hi - v };
            flipped = !flipped;
        }
        (v, flipped)
    }

    fn advance<R: Rng>(&mut self, t_ms: u64, p: &ArchetypeParams, rng: &mut R) {
        const SUBSTEP_S: f64 = 0.1;
        let total = (t_ms - self.t_ms) as f64 / 1000.0;
        self.t_ms = t_ms;
        let steps = (total / SUBSTEP_S).ceil() as usize;
        if steps == 0 {
            return;
        }
        let dt = total / steps as f64;
        for _ in 0..steps {
            let turn: f64 = rng.sample(rand_distr::StandardNormal);
            self.heading += p.turn_rate * dt.sqrt() * turn;
            let jitter: f64 = rng.sample(rand_distr::StandardNormal);
            let len = p.speed_mps * dt * (0.3 * jitter).exp();
            let (x0, z0, x1, z1) = self.bounds;
            let (x, fx) = Self::reflect(self.x + len * self.heading.cos(), x0, x1);
            let (z, fz) = Self::reflect(self.z + len * self.heading.sin(), z0, z1);
            if fx {
                self.heading = PI - self.heading;
            }
            if fz {
                self.heading = -self.heading;
            }
            self.x = x;
            self.z = z;
            self.heading = self.heading.rem_euclid(2.0 * PI);
        }
    }

    fn rotation(&self) -> [f64; 4] {
        let h = self.heading / 2.0;
        [0.0, h.sin(), 0.0, h.cos()]
    }
}

struct Height {
    baseline: f64,
    noise: Normal<f64>,
    dips: Exp<f64>,
    dip_start_ms: f64,
    dip_end_ms: f64,
    next_dip_ms: f64,
    depth: f64,
}

impl Height {
    fn at<R: Rng>(&mut self, t_ms: u64, rng: &mut R) -> f64 {
        let t = t_ms as f64;
        while t >= self.dip_end_ms && t >= self.next_dip_ms {
            self.dip_start_ms = self.next_dip_ms;
            self.dip_end_ms = self.dip_start_ms + rng.random_range(800.0..3000.0);
            self.depth = rng.random_range(0.4..0.8);
            self.next_dip_ms = self.dip_end_ms + self.dips.sample(rng);
        }
        let dip = if (self.dip_start_ms..self.dip_end_ms).contains(&t) {
            self.depth
        } else {
            0.0
        };
        self.baseline - dip + self.noise.sample(rng)
    }
}

struct Emitter<'a> {
    params: &'a ArchetypeParams,
    rng: ChaCha8Rng,
    walker: Walker,
    height: Height,
    player_offset: (f64, f64),
    eye_incl: Normal<f64>,
    frames: Vec<TelemetryFrame>,
    last_eye: EyeDirection,
}

impl Emitter<'_> {
    fn gaze_direction(&mut self) -> EyeDirection {
        let theta = self.eye_incl.sample(&mut self.rng).clamp(0.05, PI - 0.05);
        let phi = self.rng.random_range(-PI..PI);
        EyeDirection::new(
            theta.sin() * phi.cos(),
            theta.cos(),
            theta.sin() * phi.sin(),
        )
    }

    fn frame(
        &mut self,
        t_ms: u64,
        signal: Signal,
        brush: Option<&BrushId>,
        eye: EyeDirection,
    ) -> TelemetryFrame {
        self.walker.advance(t_ms, self.params, &mut self.rng);
        let y = self.height.at(t_ms, &mut self.rng);
        let eye = if signal.is_gaze() {
            let mut n = || self.rng.random_range(-0.002..0.002);
            EyeDirection::new(eye.x + n(), eye.y + n(), eye.z + n())
        } else {
            eye
        };
        let head = HeadPose {
            x: self.walker.x,
            y,
            z: self.walker.z,
            rot: self.walker.rotation(),
        };
        let player = PlayerPose {
            x: self.walker.x + self.player_offset.0,
            y: 0.0,
            z: self.walker.z + self.player_offset.1,
        };
        let frame = TelemetryFrame {
            timestamp_ms: t_ms,
            signal,
            brush_id: brush.cloned(),
            eye,
            head,
            player,
            valid: true,
        };
        self.frames.push(frame.clone());
        frame
    }

    /// Emits one IN/heartbeat/OUT run over `[start, end]`.
    fn gaze_run(
        &mut self,
        brush: &BrushId,
        start: u64,
        end: u64,
        dir: EyeDirection,
    ) -> TelemetryFrame {
        let first = self.frame(start, Signal::FocusIn, Some(brush), dir);
        let mut t = start + HEARTBEAT_MS;
        while t < end {
            self.frame(t, Signal::NormalFrame, Some(brush), dir);
            t += HEARTBEAT_MS;
        }
        self.frame(end, Signal::FocusOut, Some(brush), dir);
        self.last_eye = dir;
        first
    }

    fn blink(&mut self, start: u64, end: u64) {
        let eye = self.last_eye;
        self.frame(start, Signal::BlinkStart, None, eye);
        self.frame(end, Signal::BlinkEnd, None, eye);
    }
}

pub fn generate_session(
    participant_id: &str,
    params: &ArchetypeParams,
    catalogue: &BrushCatalogue,
    seed: u64,
) -> Result<SessionTrace, SynthError> {
    generate_session_with_truth(participant_id, params, catalogue, seed).map(|(t, _)| t)
}

pub fn generate_session_with_truth(
    participant_id: &str,
    params: &ArchetypeParams,
    catalogue: &BrushCatalogue,
    seed: u64,
) -> Result<(SessionTrace, SessionTruth), SynthError> {
    params.validate()?;
    let strokes: Vec<&BrushId> = catalogue.ids().collect();
    match strokes.len() {
        0 => return Err(SynthError::EmptyCatalogue),
        1 => return Err(SynthError::SingleStrokeCatalogue),
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (w, d) = params.zone;
    let zone = (-w / 2.0, -d / 2.0, w / 2.0, d / 2.0);
    let bounds = match params.local_box_m {
        None => zone,
        Some(b) => {
            let cx = rng.random_range(zone.0 + b / 2.0..=zone.2 - b / 2.0);
            let cz = rng.random_range(zone.1 + b / 2.0..=zone.3 - b / 2.0);
            (cx - b / 2.0, cz - b / 2.0, cx + b / 2.0, cz + b / 2.0)
        }
    };
    let walker = Walker {
        x: rng.random_range(bounds.0..=bounds.2),
        z: rng.random_range(bounds.1..=bounds.3),
        heading: rng.random_range(0.0..2.0 * PI),
        t_ms: 0,
        bounds,
    };
    let dip_gap_mean_ms = if params.dip_rate_per_min > 0.0 {
        60_000.0 / params.dip_rate_per_min
    } else {
        f64::INFINITY
    };
    let dips =
        Exp::new(1.0 / dip_gap_mean_ms).map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    let height = Height {
        baseline: rng.random_range(1.45..1.80),
        noise: Normal::new(0.0, 0.01).expect("constant std"),
        next_dip_ms: dips.sample(&mut rng),
        dips,
        dip_start_ms: 0.0,
        dip_end_ms: 0.0,
        depth: 0.0,
    };
    let player_offset = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
    let eye_incl = Normal::new(params.gaze_inclination, 0.3)
        .map_err(|e| SynthError::InvalidParams(e.to_string()))?;
    let gap = Exp::new(1.0 / params.mean_gap_ms.max(1.0))
        .map_err(|e| SynthError::InvalidParams(e.to_string()))?;

    let mut em = Emitter {
        params,
        rng,
        walker,
        height,
        player_offset,
        eye_incl,
        frames: Vec::with_capacity(params.events_per_session * 14),
        last_eye: EyeDirection::new(0.0, 0.0, 1.0),
    };
    let mut truth = SessionTruth {
        events: Vec::with_capacity(params.events_per_session),
        split_events: 0,
        blink_pairs: 0,
    };
    let mut t = 100 + em.rng.random_range(0..400u64);
    let mut prev: Option<usize> = None;

    for _ in 0..params.events_per_session {
        let mut pick = em.rng.random_range(0..strokes.len() - 1);
        if let Some(p) = prev {
            if pick >= p {
                pick += 1;
            }
        } else {
            pick = em.rng.random_range(0..strokes.len());
        }
        prev = Some(pick);
        let brush = strokes[pick];
        let dur = params.mixture.sample_ms(&mut em.rng);
        let (start, end) = (t, t + dur);
        let dir = em.gaze_direction();

        let first = if dur >= 300 && em.rng.random_bool(params.split_rate) {
            let hole = em.rng.random_range(60..=(dur - 120).min(350));
            let cut = start + em.rng.random_range(40..=dur - hole - 40);
            let first = em.gaze_run(brush, start, cut, dir);
            em.blink(cut + 10, cut + hole - 10);
            em.gaze_run(brush, cut + hole, end, dir);
            truth.split_events += 1;
            truth.blink_pairs += 1;
            first
        } else {
            em.gaze_run(brush, start, end, dir)
        };
        truth.events.push(GazeEvent::new(
            brush.clone(),
            start,
            end,
            first.head,
            first.eye,
        ));

        let pause = 20 + gap.sample(&mut em.rng).round() as u64;
        if pause >= 120 && em.rng.random_bool(params.blink_rate) {
            let len = em.rng.random_range(80..=(pause - 20).min(300));
            let b0 = end + em.rng.random_range(1..=pause - len - 10);
            em.blink(b0, b0 + len);
            truth.blink_pairs += 1;
        }
        t = end + pause;
    }

    Ok((SessionTrace::new(participant_id, em.frames), truth))
}

/// A profile with every field drawn uniformly, independent of behaviour.
pub fn draw_profile<R: Rng>(
    participant_id: &str,
    gender: Gender,
    rng: &mut R,
) -> ParticipantProfile {
    fn pick<C: Category, R: Rng>(rng: &mut R) -> C {
        C::ALL[rng.random_range(0..C::ALL.len())]
    }
    ParticipantProfile {
        participant_id: participant_id.to_string(),
        gender,
        age_group: pick::<AgeGroup, _>(rng),
        game_exp: pick::<GameExp, _>(rng),
        vr_exp: pick::<VrExp, _>(rng),
        art_knowledge: pick::<ArtKnowledge, _>(rng),
    }
}

/// With probability `coupling` the archetype follows gender (female
/// wanderer, male stationary); otherwise it is uniform over all three.
pub fn assign_archetype<R: Rng>(gender: Gender, coupling: f64, rng: &mut R) -> Archetype {
    if rng.random_bool(coupling) {
        match gender {
            Gender::Female => Archetype::Wanderer,
            Gender::Male => Archetype::Stationary,
        }
    } else {
        Archetype::ALL[rng.random_range(0..Archetype::ALL.len())]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub profile: ParticipantProfile,
    pub archetype: Archetype,
    pub session_seed: u64,
    pub trace: SessionTrace,
    pub truth: SessionTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub catalogue: BrushCatalogue,
    pub members: Vec<CohortMember>,
}

impl Cohort {
    pub fn profiles(&self) -> Vec<ParticipantProfile> {
        self.members.iter().map(|m| m.profile.clone()).collect()
    }

    pub fn traces(&self) -> Vec<SessionTrace> {
        self.members.iter().map(|m| m.trace.clone()).collect()
    }
}

pub fn participant_id(index: usize) -> String {
    format!("p{}", 101 + index)
}

/// `n` participants with balanced genders in shuffled order.
pub fn generate_cohort(n: usize, coupling: f64, seed: u64) -> Result<Cohort, SynthError> {
    generate_cohort_with(n, coupling, seed, DEFAULT_EVENTS_PER_SESSION)
}

pub fn generate_cohort_with(
    n: usize,
    coupling: f64,
    seed: u64,
    events_per_session: usize,
) -> Result<Cohort, SynthError> {
    if n < 2 {
        return Err(SynthError::TooFewParticipants(n));
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(SynthError::InvalidCoupling(coupling));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalogue = generate_catalogue(
        DEFAULT_CATALOGUE_COLOURS,
        DEFAULT_STROKES_PER_COLOUR,
        rng.random(),
    );
    let mut genders: Vec<Gender> = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                Gender::Female
            } else {
                Gender::Male
            }
        })
        .collect();
    genders.shuffle(&mut rng);

    let mut members = Vec::with_capacity(n);
    for (i, gender) in genders.into_iter().enumerate() {
        let pid = participant_id(i);
        let profile = draw_profile(&pid, gender, &mut rng);
        let archetype = assign_archetype(gender, coupling, &mut rng);
        let session_seed: u64 = rng.random();
        let params = ArchetypeParams {
            events_per_session,
            ..ArchetypeParams::for_archetype(archetype)
        };
        let (trace, truth) = generate_session_with_truth(&pid, &params, &catalogue, session_seed)?;
        members.push(CohortMember {
            profile,
            archetype,
            session_seed,
            trace,
            truth,
        });
    }
    Ok(Cohort { catalogue, members })
}

pub fn archetypes_csv(cohort: &Cohort) -> String {
    let mut out = String::from("participant_id,archetype,session_seed\n");
    for m in &cohort.members {
        let _ = writeln!(
            out,
            "{},{},{}",
            m.profile.participant_id, m.archetype, m.session_seed
        );
    }
    out
}

/// Writes `traces/<pid>.csv`, `metadata.json`, `profiles.csv` and
/// `archetypes.csv` under `dir`.
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> Result<(), SynthError> {
    let write = |path: &Path, text: &str| {
        write_atomic(path, text.as_bytes()).map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    for m in &cohort.members {
        let path = dir
            .join("traces")
            .join(format!("{}.csv", m.profile.participant_id));
        write(&path, &session_trace_csv(&m.trace))?;
    }
    write(
        &dir.join("metadata.json"),
        &brush_metadata_json(&cohort.catalogue),
    )?;
    write(&dir.join("profiles.csv"), &profiles_csv(&cohort.profiles()))?;
    write(&dir.join("archetypes.csv"), &archetypes_csv(cohort))
}

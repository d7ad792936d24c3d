//! Fixed-shape session tensors, channel normalisation and participant splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use gazelens_core::model::{GazeEvent, ParticipantProfile};

use crate::ClassifyError;

pub const N_CHANNELS: usize = 6;
pub const SEQ_LEN: usize = 450;
pub const CHANNEL_NAMES: [&str; N_CHANNELS] =
    ["eye_x", "eye_y", "eye_z", "head_x", "head_y", "head_z"];

/// Gaze onsets of one session as a `steps x 6` matrix, step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTensor {
    pub participant_id: String,
    /// `data[step * N_CHANNELS + channel]`.
    pub data: Vec<f64>,
    /// Steps before this index hold real events; the rest is zero padding.
    pub valid_steps: usize,
    pub profile: ParticipantProfile,
}

impl SessionTensor {
    pub fn steps(&self) -> usize {
        self.data.len() / N_CHANNELS
    }

    pub fn get(&self, step: usize, channel: usize) -> f64 {
        self.data[step * N_CHANNELS + channel]
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.steps()).map(|s| s < self.valid_steps).collect()
    }
}

/// Tensor from the first `SEQ_LEN` events in start order.
pub fn build_session_tensor(
    events: &[GazeEvent],
    profile: &ParticipantProfile,
    pad: bool,
) -> Result<SessionTensor, ClassifyError> {
    build_session_tensor_with_len(events, profile, SEQ_LEN, pad)
}

pub fn build_session_tensor_with_len(
    events: &[GazeEvent],
    profile: &ParticipantProfile,
    steps: usize,
    pad: bool,
) -> Result<SessionTensor, ClassifyError> {
    if events.len() < steps && !pad {
        return Err(ClassifyError::TooFewEvents {
            participant_id: profile.participant_id.clone(),
            got: events.len(),
            need: steps,
        });
    }
    let mut ordered: Vec<&GazeEvent> = events.iter().collect();
    ordered.sort_by_key(|e| e.start_ms);
    let mut data = vec![0.0; steps * N_CHANNELS];
    let valid_steps = ordered.len().min(steps);
    for (row, e) in data.chunks_exact_mut(N_CHANNELS).zip(&ordered) {
        row.copy_from_slice(&[
            e.eye_at_start.x,
            e.eye_at_start.y,
            e.eye_at_start.z,
            e.head_at_start.x,
            e.head_at_start.y,
            e.head_at_start.z,
        ]);
    }
    Ok(SessionTensor {
        participant_id: profile.participant_id.clone(),
        data,
        valid_steps,
        profile: profile.clone(),
    })
}

/// Per-channel population mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: [f64; N_CHANNELS],
    pub std: [f64; N_CHANNELS],
}

impl ChannelStats {
    /// Statistics over the valid steps of `tensors`.
    pub fn fit(tensors: &[SessionTensor]) -> Self {
        assert!(
            !tensors.is_empty(),
            "normalisation needs at least one training tensor"
        );
        let mut sum = [0.0; N_CHANNELS];
        let mut n = 0usize;
        for t in tensors {
            for row in t.data.chunks_exact(N_CHANNELS).take(t.valid_steps) {
                for c in 0..N_CHANNELS {
                    sum[c] += row[c];
                }
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        let mean = sum.map(|s| s / n);
        let mut sq = [0.0; N_CHANNELS];
        for t in tensors {
            for row in t.data.chunks_exact(N_CHANNELS).take(t.valid_steps) {
                for c in 0..N_CHANNELS {
                    sq[c] += (row[c] - mean[c]).powi(2);
                }
            }
        }
        ChannelStats {
            mean,
            std: sq.map(|s| (s / n).sqrt()),
        }
    }

    /// Z-scores the valid steps in place. Zero-variance channels become 0.
    pub fn apply(&self, tensor: &mut SessionTensor) {
        for row in tensor
            .data
            .chunks_exact_mut(N_CHANNELS)
            .take(tensor.valid_steps)
        {
            for c in 0..N_CHANNELS {
                row[c] = if self.std[c] > 0.0 {
                    (row[c] - self.mean[c]) / self.std[c]
                } else {
                    0.0
                };
            }
        }
    }
}

/// Fits statistics on `train` and applies them to both sets.
pub fn normalize_channels(
    train: &[SessionTensor],
    apply_to: &[SessionTensor],
) -> (Vec<SessionTensor>, Vec<SessionTensor>, ChannelStats) {
    let stats = ChannelStats::fit(train);
    let norm = |ts: &[SessionTensor]| {
        ts.iter()
            .map(|t| {
                let mut t = t.clone();
                stats.apply(&mut t);
                t
            })
            .collect::<Vec<_>>()
    };
    (norm(train), norm(apply_to), stats)
}

/// Indices into the original list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Size of the training side: `floor(fraction * n)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    // The epsilon keeps products such as 0.7 * 10 from rounding down a step.
    (fraction * n as f64 + 1e-9).floor() as usize
}

/// Random split at participant granularity.
pub fn participant_split(n: usize, train_fraction: f64, seed: u64) -> Result<Split, ClassifyError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ClassifyError::InvalidFraction(train_fraction));
    }
    let n_train = train_size(n, train_fraction);
    if n_train == 0 || n_train == n {
        return Err(ClassifyError::DegenerateSplit { n, train: n_train });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    Ok(Split { train, validation })
}

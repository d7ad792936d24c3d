//! Acceptance suite. Runs each criterion in sequence, prints one PASS/FAIL
//! line per criterion with its measured values and runtime, and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{Binomial, DiscreteCDF};

use gazelens_classify::nn::{Architecture, Hyperparams, Network};
use gazelens_classify::tensor::{
    build_session_tensor, participant_split, train_size, SessionTensor,
};
use gazelens_classify::train::{gradient_check, LossTarget};
use gazelens_classify::{run_experiment, ExperimentConfig, RunMetrics};
use gazelens_core::analytics::pearson_matrix;
use gazelens_core::attention::{kmeans_1d, AttentionModel, KMeansConfig};
use gazelens_core::ingest::{
    parse_brush_metadata, parse_session_trace, session_trace_csv, BrushCatalogue, SessionTrace,
};
use gazelens_core::model::{
    BrushId, ColourOrder, EyeDirection, HeadPose, PlayerPose, ProfileField, Rgba, Signal,
    TelemetryFrame,
};
use gazelens_core::segment::{bridge_blink_gaps, segment_gaze_events, BridgeOptions};
use gazelens_core::synth::{
    generate_catalogue, generate_cohort, generate_session_with_truth, Archetype, ArchetypeParams,
};
use gazelens_core::visualize::{
    aggregate_brush_attention, annotated_metadata_json, desaturate, opacity_transform,
    saturation_factor, saturation_transform, BrushAttention, Ramp, StrokeAttention,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. Segmentation against a brute-force pairing oracle

fn gaze_frame(ts: u64, signal: Signal, brush: Option<BrushId>) -> TelemetryFrame {
    TelemetryFrame {
        timestamp_ms: ts,
        signal,
        brush_id: brush,
        eye: EyeDirection::new(0.0, 1.0, 0.0),
        head: HeadPose::at(0.0, 1.6, 0.0),
        player: PlayerPose::default(),
        valid: true,
    }
}

fn fuzz_stream(seed: u64) -> Vec<TelemetryFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<BrushId> = (0..3)
        .map(|i| BrushId::new("Ink", 4278190080 + i, "art", i as u64).unwrap())
        .collect();
    let n = rng.random_range(1..300);
    let mut t = 0u64;
    let mut last_in: Option<BrushId> = None;
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        t += if rng.random_bool(0.1) {
            0
        } else {
            rng.random_range(1..60)
        };
        let any = pool[rng.random_range(0..pool.len())].clone();
        let u: f64 = rng.random();
        let frame = if u < 0.3 {
            last_in = Some(any.clone());
            gaze_frame(t, Signal::FocusIn, Some(any))
        } else if u < 0.7 {
            let b = match &last_in {
                Some(b) if rng.random_bool(0.8) => b.clone(),
                _ => any,
            };
            gaze_frame(t, Signal::NormalFrame, Some(b))
        } else if u < 0.9 {
            // Always the last FOCUS_IN's stroke, so a closing signal never mismatches.
            gaze_frame(t, Signal::FocusOut, Some(last_in.clone().unwrap_or(any)))
        } else {
            let s = if rng.random_bool(0.5) {
                Signal::BlinkStart
            } else {
                Signal::BlinkEnd
            };
            gaze_frame(t, s, None)
        };
        frames.push(frame);
    }
    frames
}

/// For each FOCUS_IN, scan forward to the next FOCUS_IN/FOCUS_OUT.
fn pairing_oracle(frames: &[TelemetryFrame]) -> Vec<(BrushId, u64, u64)> {
    let mut out = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        if f.signal != Signal::FocusIn {
            continue;
        }
        let brush = f.brush_id.clone().unwrap();
        let next = (i + 1..frames.len())
            .find(|&k| matches!(frames[k].signal, Signal::FocusIn | Signal::FocusOut));
        match next {
            Some(k) if frames[k].signal == Signal::FocusOut => {
                if frames[k].timestamp_ms > f.timestamp_ms {
                    out.push((brush, f.timestamp_ms, frames[k].timestamp_ms));
                }
            }
            _ => {
                let stop = next.unwrap_or(frames.len());
                let last = frames[i + 1..stop]
                    .iter()
                    .filter(|g| {
                        g.signal == Signal::NormalFrame && g.brush_id.as_ref() == Some(&brush)
                    })
                    .map(|g| g.timestamp_ms)
                    .max()
                    .unwrap_or(f.timestamp_ms);
                out.push((brush, f.timestamp_ms, last + 30));
            }
        }
    }
    out
}

fn segmentation_oracle() -> Outcome {
    let mut events = 0;
    for seed in 0..1000 {
        let trace = SessionTrace::new("fuzz", fuzz_stream(seed));
        let csv = session_trace_csv(&trace);
        let loaded = parse_session_trace(csv.as_bytes(), "fuzz")
            .map_err(|e| format!("stream {seed}: {e}"))?;
        let seg = segment_gaze_events(&loaded).map_err(|e| format!("stream {seed}: {e}"))?;
        let got: Vec<_> = seg
            .events
            .iter()
            .map(|e| (e.brush_id.clone(), e.start_ms, e.end_ms))
            .collect();
        let want = pairing_oracle(&trace.frames);
        ensure(got == want, || {
            format!(
                "stream {seed}: {} events vs oracle {}",
                got.len(),
                want.len()
            )
        })?;
        events += got.len();
    }
    Ok(format!(
        "1000 streams, {events} events, all match the oracle"
    ))
}

// ---------------------------------------------------------------------------
// 2. Blink bridging restores planted events

fn blink_bridging() -> Outcome {
    let cat = generate_catalogue(64, 3, 21);
    let mut splits = 0;
    let mut cases_with_splits = 0;
    for case in 0..100u64 {
        let archetype = [
            Archetype::Wanderer,
            Archetype::Explorer,
            Archetype::Stationary,
        ][case as usize % 3];
        let params = ArchetypeParams {
            events_per_session: 150,
            ..ArchetypeParams::for_archetype(archetype)
        };
        let (trace, truth) = generate_session_with_truth("p", &params, &cat, 500 + case)
            .map_err(|e| e.to_string())?;
        let raw = segment_gaze_events(&trace)
            .map_err(|e| e.to_string())?
            .events;
        ensure(raw.len() == truth.events.len() + truth.split_events, || {
            format!("case {case}: split count")
        })?;
        let bridged = bridge_blink_gaps(&raw, &trace, BridgeOptions::default());
        let key = |e: &gazelens_core::GazeEvent| (e.brush_id.clone(), e.start_ms, e.end_ms);
        let got: Vec<_> = bridged.iter().map(key).collect();
        let want: Vec<_> = truth.events.iter().map(key).collect();
        ensure(got == want, || {
            format!("case {case}: bridged events differ from the planted set")
        })?;
        splits += truth.split_events;
        cases_with_splits += usize::from(truth.split_events > 0);
    }
    ensure(cases_with_splits >= 50, || {
        format!("only {cases_with_splits} cases contain a split")
    })?;
    Ok(format!(
        "100 cases exact, {splits} split events restored ({cases_with_splits} cases with splits)"
    ))
}

// ---------------------------------------------------------------------------
// 3. Clustering recovers planted centroids

fn clustering_recovery() -> Outcome {
    let reference = AttentionModel::reference().centroids;
    let weights = [0.50, 0.38, 0.10, 0.02];
    let stds = [0.01, 0.08, 0.2, 0.5];
    let comps: Vec<Normal<f64>> = reference
        .iter()
        .zip(stds)
        .map(|(&m, s)| Normal::new(m, s).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let data: Vec<f64> = (0..60_000)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let c = weights.iter().position(|w| {
                acc += w;
                u < acc
            });
            comps[c.unwrap_or(3)].sample(&mut rng).max(0.001)
        })
        .collect();
    let fit4 = kmeans_1d(
        &data,
        &KMeansConfig {
            restarts: 5,
            ..KMeansConfig::new(4, 1)
        },
    )
    .map_err(|e| e.to_string())?;
    let fit3 = kmeans_1d(
        &data,
        &KMeansConfig {
            restarts: 5,
            ..KMeansConfig::new(3, 1)
        },
    )
    .map_err(|e| e.to_string())?;
    let errs: Vec<f64> = fit4
        .model
        .centroids
        .iter()
        .zip(&reference)
        .map(|(c, r)| (c - r).abs() / r)
        .collect();
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    let ratio = fit4.wcss / fit3.wcss;
    let summary = format!(
        "centroids {:?}, worst relative error {:.3}, WCSS4/WCSS3 {:.3}",
        fit4.model
            .centroids
            .iter()
            .map(|c| (c * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        worst,
        ratio
    );
    ensure(worst <= 0.15 && ratio < 0.5, || summary.clone())?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// 4. Gradient verification

fn gradient_verification() -> Outcome {
    let hp = Hyperparams {
        dense_units: vec![7, 5, 4],
        conv_filters: vec![3, 4],
        kernel_size: 3,
        pool_size: 2,
        lstm_units: vec![4, 3],
        ..Hyperparams::default()
    };
    let mut report = Vec::new();
    for (arch, seq_len) in [
        (Architecture::Fdn, 5),
        (Architecture::Cnn, 16),
        (Architecture::Lstm, 7),
    ] {
        let mut worst: f64 = 0.0;
        for n_out in [1, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + n_out as u64);
            let net = Network::build(arch, &hp, seq_len, 6, n_out).map_err(|e| e.to_string())?;
            let params = net.init_params(&mut rng);
            let batch: Vec<(Vec<f64>, LossTarget)> = (0..3)
                .map(|i| {
                    let x = (0..net.input_len())
                        .map(|_| rng.random_range(-1.5..1.5))
                        .collect();
                    let t = if n_out == 1 {
                        LossTarget::Binary(i % 2)
                    } else {
                        LossTarget::Categorical(i % n_out)
                    };
                    (x, t)
                })
                .collect();
            worst = worst.max(gradient_check(&net, &params, &batch, 1e-5));
        }
        report.push(format!("{} {worst:.1e}", arch.name()));
        ensure(worst <= 1e-4, || {
            format!("{}: max relative error {worst:e}", arch.name())
        })?;
    }
    Ok(format!("max relative error {}", report.join(", ")))
}

// ---------------------------------------------------------------------------
// 5/6. Classifier signal detection, top-k monotonicity and split hygiene

const COHORT_N: usize = 40;
const COHORT_SEED: u64 = 11;

fn cohort_tensors(n: usize, coupling: f64, seed: u64) -> Vec<SessionTensor> {
    let cohort = generate_cohort(n, coupling, seed).unwrap();
    cohort
        .members
        .iter()
        .map(|m| {
            let events = segment_gaze_events(&m.trace).unwrap().events;
            build_session_tensor(&events, &m.profile, false).unwrap()
        })
        .collect()
}

/// Exact two-sided 95% acceptance region of Binomial(n, p).
fn binomial_interval(n: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, n).unwrap();
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.025).unwrap();
    let hi = (0..=n).find(|&k| b.cdf(k) >= 0.975).unwrap();
    (lo, hi)
}

struct ClassifierRuns {
    coupled: RunMetrics,
    shuffled: Vec<RunMetrics>,
}

fn classifier_runs() -> ClassifierRuns {
    let tensors = cohort_tensors(COHORT_N, 1.0, COHORT_SEED);
    let config = ExperimentConfig::new(ProfileField::Gender, Architecture::Cnn);
    let (coupled, _) = run_experiment(&tensors, &config, 0, 1).unwrap();

    let shuffled = (0..10)
        .map(|r| {
            let mut profiles: Vec<_> = tensors.iter().map(|t| t.profile.clone()).collect();
            profiles.shuffle(&mut ChaCha8Rng::seed_from_u64(1000 + r as u64));
            let permuted: Vec<SessionTensor> = tensors
                .iter()
                .zip(profiles)
                .map(|(t, p)| SessionTensor {
                    profile: p,
                    ..t.clone()
                })
                .collect();
            run_experiment(&permuted, &config, r, 100 + r as u64)
                .unwrap()
                .0
        })
        .collect();
    ClassifierRuns { coupled, shuffled }
}

fn signal_detection(runs: &ClassifierRuns) -> Outcome {
    let n_val = runs.coupled.validation_ids.len() as u64;
    let trials = n_val * runs.shuffled.len() as u64;
    let correct: u64 = runs
        .shuffled
        .iter()
        .map(|m| (m.top1 * m.validation_ids.len() as f64).round() as u64)
        .sum();
    let (lo, hi) = binomial_interval(trials, 0.5);
    let per_run: Vec<String> = runs
        .shuffled
        .iter()
        .map(|m| format!("{:.2}", m.top1))
        .collect();
    let summary = format!(
        "coupled top1 {:.3}; shuffled pooled {correct}/{trials} = {:.3}, chance interval [{lo}, {hi}]; per run [{}]",
        runs.coupled.top1,
        correct as f64 / trials as f64,
        per_run.join(" ")
    );
    ensure(
        runs.coupled.top1 >= 0.9 && (lo..=hi).contains(&correct),
        || summary.clone(),
    )?;
    Ok(summary)
}

fn check_split(m: &RunMetrics, all: &BTreeSet<String>) -> Result<(), String> {
    let train: BTreeSet<_> = m.train_ids.iter().cloned().collect();
    let val: BTreeSet<_> = m.validation_ids.iter().cloned().collect();
    ensure(
        train.len() == m.train_ids.len() && val.len() == m.validation_ids.len(),
        || format!("run {}: duplicate ids", m.run),
    )?;
    ensure(train.is_disjoint(&val), || {
        format!("run {}: train and validation overlap", m.run)
    })?;
    let union: BTreeSet<_> = train.union(&val).cloned().collect();
    ensure(&union == all, || {
        format!("run {}: split is not exhaustive", m.run)
    })
}

fn topk_and_splits(runs: &ClassifierRuns) -> Outcome {
    let split = participant_split(35, 0.7, 0).map_err(|e| e.to_string())?;
    ensure(
        split.train.len() == 24 && split.validation.len() == 11,
        || {
            format!(
                "split(35, 0.7) = {}/{}",
                split.train.len(),
                split.validation.len()
            )
        },
    )?;
    for n in 2..80 {
        for (i, f) in [0.5, 0.6, 0.7, 0.8].into_iter().enumerate() {
            if train_size(n, f) == 0 || train_size(n, f) == n {
                continue;
            }
            let s = participant_split(n, f, (n * 10 + i) as u64).map_err(|e| e.to_string())?;
            let mut all: Vec<usize> = s.train.iter().chain(&s.validation).copied().collect();
            all.sort_unstable();
            ensure(all == (0..n).collect::<Vec<_>>(), || {
                format!("split({n}, {f}) not a partition")
            })?;
        }
    }

    // Multi-class evaluations where Top-2 is not trivially 1.
    let tensors = cohort_tensors(24, 0.5, 5);
    let hyper = Hyperparams {
        max_epochs: 20,
        ..Hyperparams::default()
    };
    let mut evaluations: Vec<RunMetrics> = vec![runs.coupled.clone()];
    evaluations.extend(runs.shuffled.iter().cloned());
    for (r, target) in [
        ProfileField::AgeGroup,
        ProfileField::GameExp,
        ProfileField::ArtKnowledge,
    ]
    .into_iter()
    .enumerate()
    {
        let config = ExperimentConfig {
            hyper: hyper.clone(),
            ..ExperimentConfig::new(target, Architecture::Fdn)
        };
        evaluations.push(
            run_experiment(&tensors, &config, r, 7 + r as u64)
                .map_err(|e| e.to_string())?
                .0,
        );
    }
    let cohort_ids = |m: &RunMetrics| {
        m.train_ids
            .iter()
            .chain(&m.validation_ids)
            .cloned()
            .collect::<BTreeSet<_>>()
    };
    let big: BTreeSet<String> = (0..COHORT_N)
        .map(gazelens_core::synth::participant_id)
        .collect();
    let small: BTreeSet<String> = (0..24).map(gazelens_core::synth::participant_id).collect();
    for m in &evaluations {
        ensure(m.top2 >= m.top1, || {
            format!(
                "run {} ({}): top2 {} < top1 {}",
                m.run, m.target, m.top2, m.top1
            )
        })?;
        let all = if cohort_ids(m).len() > 24 {
            &big
        } else {
            &small
        };
        check_split(m, all)?;
    }
    Ok(format!(
        "{} evaluations with top2 >= top1 and clean splits; split(35, 0.7) = 24/11",
        evaluations.len()
    ))
}

// ---------------------------------------------------------------------------
// 7. Visual transforms

fn visual_transforms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let c = Rgba::new(rng.random(), rng.random(), rng.random(), rng.random());
        let ramp = if rng.random_bool(0.5) {
            Ramp::Linear
        } else {
            Ramp::Sqrt
        };
        let s = saturation_factor(rng.random_range(0.0..3.0), rng.random_range(0.1..2.0), ramp);
        let d = desaturate(c, s);
        worst = worst.max((d.luma() - c.luma()).abs());
        ensure(d.a == c.a, || "alpha changed".into())?;
    }
    ensure(worst <= 1.5, || format!("luma drift {worst}"))?;

    for g in 0..=255u8 {
        for s in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let gray = Rgba::new(g, g, g, 200);
            ensure(desaturate(gray, s) == gray, || {
                format!("gray {g} moved at s = {s}")
            })?;
        }
    }

    // Strokes with mean attention just below, exactly at and above the threshold.
    let threshold: f64 = 0.7;
    let below = f64::from_bits(threshold.to_bits() - 1);
    let means = [
        0.0,
        below,
        threshold,
        f64::from_bits(threshold.to_bits() + 1),
        5.0,
    ];
    let ids: Vec<BrushId> = (0..means.len())
        .map(|i| BrushId::new("Ink", 4278190080 + i as u32 * 77, "art", i as u64).unwrap())
        .collect();
    let cat = BrushCatalogue::from_ids(ids.clone()).map_err(|e| e.to_string())?;
    let attention: BrushAttention = ids
        .iter()
        .zip(means)
        .map(|(id, m)| {
            let a = StrokeAttention {
                brush_id: id.clone(),
                total_duration_s: m,
                gaze_count: 1,
                mean_duration_per_session_s: m,
            };
            (id.to_string(), a)
        })
        .collect();
    let alpha = opacity_transform(&attention, &cat, threshold);
    let got: Vec<u8> = ids.iter().map(|id| alpha[&id.to_string()]).collect();
    ensure(got == [0, 0, 1, 1, 1], || {
        format!("opacity at boundary {got:?}")
    })?;
    let colours = saturation_transform(
        &attention,
        &cat,
        threshold,
        Ramp::Linear,
        ColourOrder::AlphaHigh,
    );
    for (id, m) in ids.iter().zip(means) {
        let want = desaturate(id.colour(ColourOrder::AlphaHigh), (m / threshold).min(1.0));
        ensure(colours[&id.to_string()] == want, || {
            format!("{id}: saturation transform disagrees")
        })?;
    }
    Ok(format!(
        "max luma drift {worst:.3} over 10000 colours; opacity boundary exact; 256 grays fixed"
    ))
}

// ---------------------------------------------------------------------------
// 8. Correlation sanity

fn two_pass_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn correlation_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..10_000)
        .map(|_| normal.sample(&mut rng) * 3.0 + 1.5)
        .collect();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let noise: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let names = ["x", "neg", "noise"].map(String::from).to_vec();
    let m = pearson_matrix(names, &[x.clone(), neg, noise.clone()]).map_err(|e| e.to_string())?;
    let get = |i, j| m.get(i, j).ok_or_else(|| format!("missing r({i},{j})"));
    for i in 0..3 {
        ensure((get(i, i)? - 1.0).abs() <= 1e-12, || {
            format!("self-correlation {}", m.get(i, i).unwrap())
        })?;
    }
    let r_neg = get(0, 1)?;
    ensure((r_neg + 1.0).abs() <= 1e-12, || {
        format!("x vs -x = {r_neg}")
    })?;
    let r_noise = get(0, 2)?;
    ensure(r_noise.abs() < 0.05, || {
        format!("independent noise r = {r_noise}")
    })?;
    let oracle = two_pass_pearson(&x, &noise);
    ensure((r_noise - oracle).abs() <= 1e-12, || {
        format!("r {r_noise} vs oracle {oracle}")
    })?;
    Ok(format!(
        "self 1.0, x vs -x {r_neg:.15}, noise r {r_noise:.4}"
    ))
}

// ---------------------------------------------------------------------------
// 9. Format round trips

fn random_token(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[char] = &['a', 'Z', 'q', '0', '7', 'é', 'ß', 'Ж', '字', 'M', 'x', '3'];
    (0..rng.random_range(1..9))
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect()
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let id = BrushId::new(
            random_token(&mut rng),
            rng.random(),
            random_token(&mut rng),
            rng.random(),
        )
        .unwrap();
        let s = id.to_string();
        let back: BrushId = s.parse().map_err(|e| format!("{s}: {e}"))?;
        ensure(back == id && back.to_string() == s, || {
            format!("{s} did not round trip")
        })?;
    }
    // Mutated ids: whatever parses must format back to itself.
    let mut accepted = 0;
    for _ in 0..10_000 {
        let id = BrushId::new(
            random_token(&mut rng),
            rng.random(),
            random_token(&mut rng),
            rng.random(),
        )
        .unwrap();
        let mut chars: Vec<char> = id.to_string().chars().collect();
        for _ in 0..rng.random_range(1..3) {
            let c = ['_', '0', '1', 'a', '-', ' ', '+', 'é'][rng.random_range(0..8)];
            let at = rng.random_range(0..chars.len());
            match rng.random_range(0..3) {
                0 => chars.insert(at, c),
                1 => chars[at] = c,
                _ => {
                    chars.remove(at);
                }
            }
            if chars.is_empty() {
                break;
            }
        }
        let s: String = chars.into_iter().collect();
        if let Ok(id) = s.parse::<BrushId>() {
            accepted += 1;
            ensure(id.to_string() == s, || {
                format!("{s:?} parsed but formats as {id}")
            })?;
        }
    }

    let cat = generate_catalogue(64, 3, 31);
    let mut traces = 0;
    let mut all_events = Vec::new();
    for (i, archetype) in [
        Archetype::Wanderer,
        Archetype::Explorer,
        Archetype::Stationary,
    ]
    .into_iter()
    .enumerate()
    {
        let params = ArchetypeParams {
            events_per_session: 200,
            ..ArchetypeParams::for_archetype(archetype)
        };
        let (trace, _) = generate_session_with_truth("p7", &params, &cat, 90 + i as u64)
            .map_err(|e| e.to_string())?;
        let back = parse_session_trace(session_trace_csv(&trace).as_bytes(), "p7")
            .map_err(|e| e.to_string())?;
        ensure(back == trace, || {
            format!("{} trace changed on round trip", archetype.name())
        })?;
        ensure(
            session_trace_csv(&back) == session_trace_csv(&trace),
            || "trace CSV not stable".into(),
        )?;
        all_events.extend(
            segment_gaze_events(&trace)
                .map_err(|e| e.to_string())?
                .events,
        );
        traces += 1;
    }

    let attention = aggregate_brush_attention(&all_events, 3, Some(&cat));
    for (ramp, order) in [
        (Ramp::Linear, ColourOrder::AlphaHigh),
        (Ramp::Sqrt, ColourOrder::RgbaHigh),
    ] {
        let json = annotated_metadata_json(&cat, &attention, 0.4, ramp, order);
        let back = parse_brush_metadata(&json).map_err(|e| e.to_string())?;
        ensure(back.ids().eq(cat.ids()), || {
            "annotated metadata lost strokes".into()
        })?;
        let records: Vec<serde_json::Value> =
            serde_json::from_str(&json).map_err(|e| e.to_string())?;
        let alpha = opacity_transform(&attention, &cat, 0.4);
        let colours = saturation_transform(&attention, &cat, 0.4, ramp, order);
        for rec in &records {
            let key = rec["id"].as_str().unwrap();
            let a = &attention[key];
            ensure(
                rec["attention_total_s"].as_f64() == Some(a.total_duration_s),
                || format!("{key}: total changed"),
            )?;
            ensure(
                rec["attention_count"].as_u64() == Some(a.gaze_count),
                || format!("{key}: count changed"),
            )?;
            ensure(rec["alpha"].as_u64() == Some(u64::from(alpha[key])), || {
                format!("{key}: alpha changed")
            })?;
            let packed = rec["colour_desaturated"].as_u64().unwrap() as u32;
            ensure(Rgba::unpack(packed, order) == colours[key], || {
                format!("{key}: colour changed")
            })?;
        }
        ensure(
            annotated_metadata_json(&back, &attention, 0.4, ramp, order) == json,
            || "re-export differs".into(),
        )?;
    }
    Ok(format!("10000 ids round trip ({accepted} of 10000 mutated ids still parse, all canonical); {traces} traces and annotated metadata lossless"))
}

// ---------------------------------------------------------------------------
// 10. End-to-end determinism

fn files_under(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = "n = 6\ncoupling = 1.0\nseed = 13\nevents = 460\ntarget = gender\narch = fdn\n\
                  runs = 2\nmax_epochs = 8\ngroup_by = gender\n";
    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let cfg = dir.path().join(format!("{name}.conf"));
        std::fs::write(&cfg, format!("out = {name}\n{config}")).map_err(|e| e.to_string())?;
        let code =
            gazelens_cli::execute(["gazelens", "pipeline", "--config", cfg.to_str().unwrap()]);
        ensure(code == 0, || format!("pipeline exited with {code}"))?;
        outputs.push(files_under(&dir.path().join(name)));
    }
    let names = |o: &[(String, Vec<u8>)]| o.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    ensure(names(&outputs[0]) == names(&outputs[1]), || {
        "different file sets".into()
    })?;
    for ((name, a), (_, b)) in outputs[0].iter().zip(&outputs[1]) {
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    let bytes: usize = outputs[0].iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "{} files, {bytes} bytes, byte-identical",
        outputs[0].len()
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut failed = 0;
    let mut report =
        |n: usize, name: &str, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
            let start = Instant::now();
            let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
                Err(p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".into()))
            });
            let elapsed = start.elapsed();
            let outcome = match (outcome, budget) {
                (Ok(msg), Some(b)) if elapsed > b => Err(format!(
                    "{msg}; runtime {:.1} s exceeds {} s",
                    elapsed.as_secs_f64(),
                    b.as_secs()
                )),
                (o, _) => o,
            };
            let (tag, msg) = match &outcome {
                Ok(m) => ("PASS", m),
                Err(m) => ("FAIL", m),
            };
            println!(
                "{tag} [{n:>2}] {name}: {msg} ({:.1} s)",
                elapsed.as_secs_f64()
            );
            failed += usize::from(outcome.is_err());
        };
    let secs = |s| Some(Duration::from_secs(s));

    report(
        1,
        "segmentation oracle equivalence",
        secs(10),
        &mut segmentation_oracle,
    );
    report(2, "blink bridging", None, &mut blink_bridging);
    report(3, "clustering recovery", secs(30), &mut clustering_recovery);
    report(
        4,
        "gradient verification",
        secs(60),
        &mut gradient_verification,
    );

    let start = Instant::now();
    let runs = catch_unwind(classifier_runs);
    let classifier_time = start.elapsed();
    match &runs {
        Ok(runs) => {
            report(5, "classifier signal detection", None, &mut || {
                let out = signal_detection(runs)?;
                ensure(classifier_time <= Duration::from_secs(300), || {
                    format!(
                        "{out}; runtime {:.1} s exceeds 300 s",
                        classifier_time.as_secs_f64()
                    )
                })?;
                Ok(format!(
                    "{out}; {:.1} s training",
                    classifier_time.as_secs_f64()
                ))
            });
            report(6, "top-k monotonicity and split hygiene", None, &mut || {
                topk_and_splits(runs)
            });
        }
        Err(_) => {
            report(5, "classifier signal detection", None, &mut || {
                Err("training panicked".into())
            });
            report(6, "top-k monotonicity and split hygiene", None, &mut || {
                Err("training panicked".into())
            });
        }
    }

    report(7, "visual transforms", None, &mut visual_transforms);
    report(8, "correlation sanity", None, &mut correlation_sanity);
    report(9, "format round trips", None, &mut format_round_trips);
    report(
        10,
        "end-to-end determinism",
        None,
        &mut pipeline_determinism,
    );

    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

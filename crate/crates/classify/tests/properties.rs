use gazelens_classify::nn::{Architecture, Hyperparams};
use gazelens_classify::tensor::{
    normalize_channels, participant_split, train_size, SessionTensor, N_CHANNELS,
};
use gazelens_classify::train::{
    predict_proba, top_k_accuracy, train_on_samples, ClassifierSpec, Sample,
};
use gazelens_core::model::{
    AgeGroup, ArtKnowledge, Category, GameExp, Gender, ParticipantProfile, ProfileField, VrExp,
};
use proptest::prelude::*;

fn profile(id: usize) -> ParticipantProfile {
    ParticipantProfile {
        participant_id: format!("p{id}"),
        gender: if id % 2 == 0 {
            Gender::Female
        } else {
            Gender::Male
        },
        age_group: AgeGroup::ALL[id % AgeGroup::ALL.len()],
        game_exp: GameExp::ALL[0],
        vr_exp: VrExp::ALL[0],
        art_knowledge: ArtKnowledge::ALL[0],
    }
}

fn tensor(id: usize, steps: usize, valid: usize, values: &[f64]) -> SessionTensor {
    let mut data = vec![0.0; steps * N_CHANNELS];
    for (i, v) in data.iter_mut().take(valid * N_CHANNELS).enumerate() {
        *v = values[(i + id * 7) % values.len()] * (1.0 + (i % N_CHANNELS) as f64);
    }
    SessionTensor {
        participant_id: format!("p{id}"),
        data,
        valid_steps: valid,
        profile: profile(id),
    }
}

fn normalised(probs: Vec<f64>) -> Vec<f64> {
    let sum: f64 = probs.iter().sum();
    probs.into_iter().map(|p| p / sum).collect()
}

proptest! {
    #[test]
    fn top_k_is_monotone_in_k(
        rows in prop::collection::vec(prop::collection::vec(0.001f64..1.0, 5), 1..40),
        labels in prop::collection::vec(0usize..5, 40),
    ) {
        let preds: Vec<Vec<f64>> = rows.into_iter().map(normalised).collect();
        let labels = &labels[..preds.len()];
        let mut prev = 0.0;
        for k in 1..=5 {
            let acc = top_k_accuracy(&preds, labels, k).unwrap();
            prop_assert!(acc >= prev);
            prev = acc;
        }
        prop_assert_eq!(prev, 1.0);
    }

    #[test]
    fn binary_top_two_is_always_one(ps in prop::collection::vec(0.0f64..=1.0, 1..30), seed in 0usize..1000) {
        let preds: Vec<Vec<f64>> = ps.iter().map(|&p| vec![p]).collect();
        let labels: Vec<usize> = (0..preds.len()).map(|i| (i * 31 + seed) % 2).collect();
        prop_assert!(top_k_accuracy(&preds, &labels, 2).unwrap() >= top_k_accuracy(&preds, &labels, 1).unwrap());
        prop_assert_eq!(top_k_accuracy(&preds, &labels, 2).unwrap(), 1.0);
    }

    #[test]
    fn splits_partition_participants(n in 2usize..200, fraction in 0.05f64..0.95, seed: u64) {
        let k = train_size(n, fraction);
        prop_assume!(k > 0 && k < n);
        let split = participant_split(n, fraction, seed).unwrap();
        prop_assert_eq!(split.train.len(), k);
        let mut all: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn training_channels_are_standardised(
        values in prop::collection::vec(-50.0f64..50.0, 7..40),
        valid in prop::collection::vec(2usize..12, 2..6),
    ) {
        let train: Vec<SessionTensor> = valid.iter().enumerate().map(|(i, &v)| tensor(i, 12, v, &values)).collect();
        let (normed, _, stats) = normalize_channels(&train, &[]);
        let n: usize = valid.iter().sum();
        for c in 0..N_CHANNELS {
            prop_assume!(stats.std[c] > 1e-6);
            let xs: Vec<f64> = normed
                .iter()
                .flat_map(|t| t.data.chunks_exact(N_CHANNELS).take(t.valid_steps).map(move |r| r[c]))
                .collect();
            prop_assert_eq!(xs.len(), n);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            prop_assert!(mean.abs() <= 1e-9, "mean {}", mean);
            prop_assert!((std - 1.0).abs() <= 1e-9, "std {}", std);
        }
        // Padding stays zero.
        for t in &normed {
            prop_assert!(t.data[t.valid_steps * N_CHANNELS..].iter().all(|&x| x == 0.0));
        }
    }
}

fn random_samples(seed: u64, n: usize, len: usize) -> Vec<Sample> {
    let mut state = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    (0..n)
        .map(|i| {
            let class = i % 2;
            let input = (0..len)
                .map(|j| next() + if j == 0 { class as f64 * 0.8 } else { 0.0 })
                .collect();
            Sample { input, class }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn best_epoch_has_lowest_validation_loss_and_training_is_deterministic(seed in 0u64..1000) {
        let hyper = Hyperparams { dense_units: vec![6, 4], max_epochs: 40, patience: 5, batch_size: 4, ..Hyperparams::default() };
        let spec = ClassifierSpec { architecture: Architecture::Fdn, hyper, seed };
        let train = random_samples(seed, 16, 2 * N_CHANNELS);
        let val = random_samples(seed + 7_000, 8, 2 * N_CHANNELS);
        let model = train_on_samples(&spec, &train, &val, 2, N_CHANNELS, ProfileField::Gender).unwrap();

        let best = &model.history[model.best_epoch];
        prop_assert_eq!(best.epoch, model.best_epoch);
        prop_assert!(model.history.iter().all(|h| best.val_loss <= h.val_loss));

        // The stored weights reproduce the best epoch's validation loss.
        let bce: f64 = val
            .iter()
            .map(|s| {
                let p = predict_proba(&model, &s.input).unwrap()[0];
                if s.class == 1 { -p.ln() } else { -(1.0 - p).ln() }
            })
            .sum::<f64>()
            / val.len() as f64;
        prop_assert!((bce - best.val_loss).abs() <= 1e-9 * (1.0 + bce), "{} vs {}", bce, best.val_loss);

        let again = train_on_samples(&spec, &train, &val, 2, N_CHANNELS, ProfileField::Gender).unwrap();
        prop_assert_eq!(&again.params, &model.params);
        prop_assert_eq!(&again.history, &model.history);
    }
}

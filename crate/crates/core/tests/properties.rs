use nalgebra::DMatrix;
use panos_core::control::{reactive_update, V_MAX, V_MIN};
use panos_core::dataset::{form_sequences, shuffle_batches};
use panos_core::metrics::{jerk_series, mean_jerk, pca_report};
use panos_core::network::{attend, select_by_score, ModelConfig, ModelParams, VisualTokens};
use panos_core::simworld::{make_terrain, rollout, TerrainClass};
use panos_core::training::losses_from_values;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn accel_trace(len: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jerk_ignores_constant_offsets(trace in accel_trace(20), offset in prop::array::uniform3(-100.0f64..100.0)) {
        let shifted: Vec<[f64; 3]> = trace.iter().map(|a| [a[0] + offset[0], a[1] + offset[1], a[2] + offset[2]]).collect();
        let a = jerk_series(&trace, 0.01).unwrap();
        let b = jerk_series(&shifted, 0.01).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
    }

    #[test]
    fn jerk_scales_with_absolute_factor(trace in accel_trace(15), k in -10.0f64..10.0) {
        let scaled: Vec<[f64; 3]> = trace.iter().map(|a| [k * a[0], k * a[1], k * a[2]]).collect();
        let a = jerk_series(&trace, 0.01).unwrap();
        let b = jerk_series(&scaled, 0.01).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((k.abs() * x - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn mean_jerk_is_permutation_invariant(traces in prop::collection::vec(accel_trace(12), 5), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let permuted: Vec<Vec<[f64; 3]>> = perm.iter().map(|&i| traces[i].clone()).collect();
        let a = mean_jerk(&traces, 0.01).unwrap().mean;
        let b = mean_jerk(&permuted, 0.01).unwrap().mean;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn pca_is_invariant_to_column_offsets(seed in any::<u64>(), col in 0usize..6, offset in -1e3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..6).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect()).collect();
        let mut shifted = rows.clone();
        shifted.iter_mut().for_each(|r| r[col] += offset);
        let a = pca_report(&rows).unwrap();
        let b = pca_report(&shifted).unwrap();
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(a.windows(2).all(|w| w[0] >= w[1]));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn shuffle_is_a_bijection(n in 0usize..200, batch in 1usize..40, seed in any::<u64>()) {
        let items = vec![(); n];
        let batches = shuffle_batches(&items, batch, seed).unwrap();
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        prop_assert!(batches.iter().all(|b| !b.indices.is_empty() && b.indices.len() <= batch));
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn total_loss_is_never_negative(
        v_hat in prop::collection::vec(0.0f64..3.0, 1..20),
        alpha in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<f64> = v_hat.iter().map(|_| rng.random_range(0.0..3.0)).collect();
        let slips: Vec<f64> = v_hat.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let l = losses_from_values(&v_hat, &labels, &slips, alpha).unwrap();
        prop_assert!(l.total >= 0.0 && l.velocity_loss >= 0.0);
        prop_assert!((0.0..=1.0).contains(&l.slip_loss));
        prop_assert_eq!(l.total, (l.velocity_loss - alpha * l.slip_loss).max(0.0));
    }

    #[test]
    fn selection_keeps_a_sequence_whose_confidence_rises(
        scores in prop::collection::vec(0.0f64..1.0, 1..30),
        pick in any::<prop::sample::Index>(),
        bump in 0.0f64..1.0,
        fraction in 0.05f64..1.0,
    ) {
        let k = ((fraction * scores.len() as f64).ceil() as usize).min(scores.len());
        let i = pick.index(scores.len());
        let before = select_by_score(&scores, k);
        let mut raised = scores.clone();
        raised[i] = (raised[i] + bump).min(1.0);
        let after = select_by_score(&raised, k);
        prop_assert_eq!(after.len(), k);
        if before.contains(&i) {
            prop_assert!(after.contains(&i));
        }
    }

    #[test]
    fn reactive_command_stays_in_range(v in 0.0f64..3.0, gain in 0.0f64..5.0, slip in 0.0f64..1.0) {
        let next = reactive_update(v, gain, slip);
        prop_assert!((V_MIN..=V_MAX).contains(&next));
        if slip <= 0.2 {
            prop_assert_eq!(next, v.clamp(V_MIN, V_MAX));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attention_is_a_convex_combination(seed in any::<u64>(), scale in 0.1f64..30.0) {
        let params = ModelParams::new(ModelConfig { param_seed: seed, ..ModelConfig::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tokens = VisualTokens {
            n_v: 16,
            d_v: 64,
            data: (0..16 * 64).map(|_| rng.random_range(-1.0..1.0) * scale).collect(),
        };
        let features: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (weights, context, _) = attend(&features, &tokens, &params).unwrap();
        prop_assert!(weights.iter().all(|&a| a >= 0.0));
        prop_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        for j in 0..64 {
            let col = (0..16).map(|i| tokens.token(i)[j]);
            let lo = col.clone().fold(f64::INFINITY, f64::min);
            let hi = col.fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(context[j] >= lo - 1e-12 && context[j] <= hi + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sequence_count_is_floor_of_duration(tenths in 11u32..60, seed in any::<u64>()) {
        let duration = tenths as f64 / 10.0;
        let log = rollout(&make_terrain(TerrainClass::Grass, seed), |_| 1.0, 1.0, duration, seed).unwrap();
        let seqs = form_sequences(&log, 1.0).unwrap();
        prop_assert_eq!(seqs.len(), (duration / 1.0).floor() as usize);
    }
}

#[test]
fn pca_matches_svd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            (0..60)
                .map(|j| rng.random_range(-1.0..1.0) * (1.0 + (j % 7) as f64))
                .collect()
        })
        .collect();
    let got = pca_report(&rows).unwrap();

    let n = rows.len();
    let means: Vec<f64> = (0..60)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let m = DMatrix::from_fn(n, 60, |i, j| rows[i][j] - means[j]);
    let svd = m.svd(false, false);
    let mut sq: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
    let total: f64 = sq.iter().sum();
    sq.iter_mut().for_each(|v| *v /= total);
    sq.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(got.len(), sq.len());
    for (a, b) in got.iter().zip(&sq) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

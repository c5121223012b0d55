use keypad_auth::classify::{train_avg, train_prob, ProbModel};
use keypad_auth::features::features_of;
use keypad_auth::simulate::{gen_entry, gen_press, gen_study, KeyStyle, StudyConfig, UserArchetype};
use keypad_auth::store;
use keypad_auth::{Characteristic, EntryAttempt, FeatureVector, KeyLabel, Password};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn entries(seed: u64, n: usize, password: &Password) -> Vec<EntryAttempt> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let archetype = UserArchetype::random(&mut rng);
    (0..n).map(|_| gen_entry(&archetype, password, &mut rng)).collect()
}

fn feature_rows(entries: &[EntryAttempt]) -> Vec<Vec<FeatureVector>> {
    entries
        .iter()
        .map(|e| e.presses().iter().map(|p| features_of(&p.samples).unwrap()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_factor_matches_literal_replication(seed in any::<u64>(), n_train in 1usize..6, k in 1usize..6, bands in 2usize..12) {
        let password: Password = "4071".parse().unwrap();
        let train = feature_rows(&entries(seed, n_train, &password));
        let bg = feature_rows(&entries(seed ^ 0x5555, n_train * k, &password));
        let weighted = ProbModel::from_features(password.clone(), &bg, &train, bands).unwrap();
        prop_assert_eq!(weighted.norm_factor, k as f64);

        let replicated: Vec<_> = train.iter().flat_map(|r| std::iter::repeat_n(r.clone(), k)).collect();
        let literal = ProbModel::from_features(password, &bg, &replicated, bands).unwrap();
        prop_assert_eq!(literal.norm_factor, 1.0);
        for probe in bg.iter().chain(&train) {
            for (d, f) in probe.iter().enumerate() {
                for c in Characteristic::ALL {
                    prop_assert_eq!(weighted.band_ratio(d, c, f.get(c)), literal.band_ratio(d, c, f.get(c)));
                }
            }
        }
    }

    #[test]
    fn training_is_order_independent(seed in any::<u64>(), order in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle()) {
        let password: Password = "6193225307".parse().unwrap();
        let train = entries(seed, 8, &password);
        let bg = entries(seed.wrapping_add(1), 12, &password);
        let shuffled: Vec<_> = order.iter().map(|&i| train[i].clone()).collect();
        let mut bg_shuffled = bg.clone();
        bg_shuffled.rotate_left(order[0]);
        prop_assert_eq!(train_avg(&train).unwrap(), train_avg(&shuffled).unwrap());
        prop_assert_eq!(train_prob(&bg, &train, 10).unwrap(), train_prob(&bg_shuffled, &shuffled, 10).unwrap());
    }
}

#[test]
fn default_archetypes_hold_plateaus_between_50_and_300() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let password: Password = "6193225307".parse().unwrap();
    let (mut inside, mut total) = (0usize, 0usize);
    for _ in 0..30 {
        let archetype = UserArchetype::random(&mut rng);
        for _ in 0..10 {
            for p in gen_entry(&archetype, &password, &mut rng).presses() {
                let plateau = features_of(&p.samples).unwrap().plateau;
                inside += usize::from((50..=300).contains(&plateau));
                total += 1;
            }
        }
    }
    let share = inside as f64 / total as f64;
    assert!(share >= 0.9, "only {share:.3} of {total} plateaus in range");
}

fn style(len_mean: f64, len_std: f64) -> KeyStyle {
    KeyStyle {
        depth_mean: 600.0,
        depth_std: 40.0,
        press_len_mean: len_mean,
        press_len_std: len_std,
        plateau_frac_mean: 0.3,
        plateau_frac_std: 0.04,
        attack_frac: 0.2,
        jitter_amp: 1,
    }
}

#[test]
fn separated_archetypes_cluster_by_press_length() {
    let key = KeyLabel::new(3).unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (sa, sb) = (25.0, 35.0);
        let gap = 6.0 * f64::hypot(sa, sb);
        let a = UserArchetype::uniform(style(300.0, sa)).unwrap();
        let b = UserArchetype::uniform(style(300.0 + gap, sb)).unwrap();
        let lens = |arch: &UserArchetype, rng: &mut ChaCha8Rng| {
            let v: Vec<usize> = (0..100)
                .map(|_| features_of(&gen_press(arch, key, rng)).unwrap().t_max)
                .collect();
            (*v.iter().min().unwrap(), *v.iter().max().unwrap())
        };
        let (a_lo, a_hi) = lens(&a, &mut rng);
        let (b_lo, b_hi) = lens(&b, &mut rng);
        assert!(a_hi < b_lo, "seed {seed}: [{a_lo}, {a_hi}] overlaps [{b_lo}, {b_hi}]");
    }
}

#[test]
fn dataset_files_are_seed_deterministic() {
    let config = StudyConfig {
        n_background_users: 3,
        n_genuine_users: 2,
        reps_per_background: 3,
        training_reps: 3,
        genuine_test_reps: 3,
        impostor_test_reps: 3,
        ..StudyConfig::default()
    };
    let bytes = |seed| {
        let study = gen_study(&StudyConfig { seed, ..config.clone() }).unwrap();
        let mut out = Vec::new();
        store::write_dataset_to(&mut out, &study.to_dataset()).unwrap();
        out
    };
    assert_eq!(bytes(21), bytes(21));
    assert_ne!(bytes(21), bytes(22));
}

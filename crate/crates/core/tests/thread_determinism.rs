//! The worker-thread cap is process-global, so runs that change it live in
//! this dedicated test binary instead of the library's unit tests.

use advclaim_core::attacks::{random_noise_attack, AttackConfig};
use advclaim_core::attribution::global_importance;
use advclaim_core::data::{synth_generate, SynthConfig};
use advclaim_core::models::{train_gbt, train_knn, GbtConfig, KnnConfig};
use advclaim_core::parallel;
use std::sync::Mutex;

/// Serializes the tests in this binary; they all mutate the global cap.
static CAP_LOCK: Mutex<()> = Mutex::new(());

#[test]
fn noise_attack_output_is_independent_of_the_thread_cap() {
    let _guard = CAP_LOCK.lock().expect("cap lock");
    let ds = synth_generate(&SynthConfig {
        n_samples: 200,
        n_features: 5,
        class_separation: 1.5,
        fraud_fraction: 0.5,
        seed: 51,
    })
    .expect("synth");
    let model = train_knn(&ds, &KnnConfig { k: 5 }).expect("train");
    let (x, y) = ds.test_xy();
    let cfg = AttackConfig {
        epsilon: 0.4,
        max_iters: 12,
        seed: 6,
        ..Default::default()
    };

    parallel::set_max_threads(1);
    let serial = random_noise_attack(&model, &x, &y, &cfg).expect("serial attack");
    parallel::set_max_threads(4);
    let threaded = random_noise_attack(&model, &x, &y, &cfg).expect("threaded attack");
    parallel::set_max_threads(1);

    for (a, b) in serial
        .adversarial
        .data()
        .iter()
        .zip(threaded.adversarial.data())
    {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(serial.per_sample_flipped, threaded.per_sample_flipped);
    assert_eq!(serial.accuracy_after, threaded.accuracy_after);
}

#[test]
fn shapley_ranking_is_independent_of_the_thread_cap() {
    let _guard = CAP_LOCK.lock().expect("cap lock");
    let ds = synth_generate(&SynthConfig {
        n_samples: 240,
        n_features: 4,
        class_separation: 2.0,
        fraud_fraction: 0.5,
        seed: 63,
    })
    .expect("synth");
    let model = train_gbt(
        &ds,
        &GbtConfig {
            n_trees: 6,
            ..Default::default()
        },
    )
    .expect("train");

    parallel::set_max_threads(1);
    let serial = global_importance(&model, &ds, 4, 120, 3).expect("serial ranking");
    parallel::set_max_threads(3);
    let threaded = global_importance(&model, &ds, 4, 120, 3).expect("threaded ranking");
    parallel::set_max_threads(1);

    assert_eq!(serial, threaded);
}

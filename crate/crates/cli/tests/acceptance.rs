//! Acceptance gate for the whole workspace.
//!
//! Each test checks one release criterion end to end and prints a single
//! `<label>: PASS` line on success (or `SKIP` where an optional input is
//! absent). Heavy tests serialize on a shared lock so per-criterion time
//! limits stay meaningful on a single-core runner.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use advclaim_cli::commands::{
    cmd_attack, cmd_eval, cmd_explain, cmd_gan_attack, cmd_prepare, cmd_train, Context,
};
use advclaim_cli::config::load_config;
use advclaim_cli::layout::Layout;
use advclaim_core::attacks::{fgsm, sweep, AttackConfig, AttackKind};
use advclaim_core::attribution::mc_shapley;
use advclaim_core::data::{synth_generate, SynthConfig};
use advclaim_core::error::Result;
use advclaim_core::ganrl::{DiscriminatorNet, GeneratorNet};
use advclaim_core::metrics::{accuracy, asr, confusion, f1, AsrMode, BatchOutcome, Ratio};
use advclaim_core::models::{
    predict_labels, train_birecurrent, train_gbt, train_knn, train_margin, BiRecurrent,
    Classifier, GbtConfig, Growth, KnnConfig, KnnModel, MarginConfig, RecurrentConfig,
};
use advclaim_core::numkit::{bce_loss, finite_diff_grad, SplitMix64};
use advclaim_core::{Error, Matrix};

/// Serializes the compute-heavy criteria so their measured runtimes are
/// not distorted by the harness running tests concurrently.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// The shared synthetic benchmark: 1000 rows, 12 features, separation
/// 2.0, seed 7.
fn benchmark() -> advclaim_core::data::Dataset {
    synth_generate(&SynthConfig {
        n_samples: 1000,
        n_features: 12,
        class_separation: 2.0,
        fraud_fraction: 0.25,
        seed: 7,
    })
    .expect("synthetic benchmark")
}

fn assert_within(elapsed: Duration, limit: Duration, label: &str) {
    assert!(
        elapsed <= limit,
        "{label} took {elapsed:?}, over the {limit:?} budget"
    );
}

const REL_TOL: f64 = 1e-4;

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

// --- gradient correctness ---------------------------------------------

/// Finite-difference check of the recurrent model's input and parameter
/// gradients plus both adversarial networks' backward passes.
#[test]
fn gradients_match_finite_differences() {
    let _guard = heavy();
    let started = Instant::now();

    for instance in 0..10u64 {
        check_recurrent_gradients(instance);
        check_mlp_gradients(MlpSide::Generator, instance);
        check_mlp_gradients(MlpSide::Discriminator, instance);
    }

    assert_within(started.elapsed(), Duration::from_secs(30), "gradient checks");
    println!("gradient correctness: PASS");
}

fn check_recurrent_gradients(instance: u64) {
    let cfg = RecurrentConfig {
        hidden_size: 6,
        ..RecurrentConfig::default()
    };
    let n_features = 5;
    let mut model: BiRecurrent<f64> =
        BiRecurrent::init(n_features, &cfg, 900 + instance).expect("init");
    let mut rng = SplitMix64::new(7_000 + instance);
    let x: Matrix = rng.sample_uniform(3, n_features, 0.05, 0.95);
    let y: Vec<u8> = (0..3).map(|_| (rng.next_u64() & 1) as u8).collect();

    let grads = model.batch_gradients(&x, &y, None).expect("gradients");

    // Input gradient against central differences of the public loss.
    let numeric = finite_diff_grad(|m| model.loss(m, &y), &x, 1e-5).expect("fd");
    for (a, n) in grads.inputs.data().iter().zip(numeric.data()) {
        assert!(
            rel_error(*a, *n) < REL_TOL,
            "recurrent input gradient {a} vs {n}"
        );
    }

    // Parameter gradients, one tensor at a time through the mutable view.
    let h = 1e-5;
    for (t_idx, (name, values)) in grads.tensors.iter().enumerate() {
        for i in 0..values.len() {
            let base = model.tensors()[t_idx].1[i];
            model.tensors_mut()[t_idx].1[i] = base + h;
            let plus = model.loss(&x, &y).expect("loss");
            model.tensors_mut()[t_idx].1[i] = base - h;
            let minus = model.loss(&x, &y).expect("loss");
            model.tensors_mut()[t_idx].1[i] = base;
            let numeric = (plus - minus) / (2.0 * h);
            assert!(
                rel_error(values[i], numeric) < REL_TOL,
                "recurrent {name}[{i}]: {} vs {numeric}",
                values[i]
            );
        }
    }
}

enum MlpSide {
    Generator,
    Discriminator,
}

/// Both adversarial nets keep their production trunk, so full-parameter
/// differencing is out of reach; a seeded coordinate sample plus the full
/// input gradient still pins every layer's backward code.
fn check_mlp_gradients(side: MlpSide, instance: u64) {
    let (net, in_width) = match side {
        MlpSide::Generator => {
            let gen: GeneratorNet<f64> = GeneratorNet::init(4, 3, 40 + instance).expect("init");
            (gen.net, 4)
        }
        MlpSide::Discriminator => {
            let disc: DiscriminatorNet<f64> =
                DiscriminatorNet::init(3, 60 + instance).expect("init");
            (disc.net, 3)
        }
    };
    let mut net = net;
    let mut rng = SplitMix64::new(11_000 + instance);
    let x: Matrix = rng.sample_uniform(2, in_width, 0.0, 1.0);
    let out_width = net.output_width();
    let targets: Vec<f64> = (0..2 * out_width)
        .map(|_| (rng.next_u64() & 1) as f64)
        .collect();

    let loss_of = |net: &advclaim_core::ganrl::Mlp<f64>, x: &Matrix| -> Result<f64> {
        let out = net.output(x)?;
        Ok(bce_loss(out.data(), &targets)?.0)
    };

    let cache = net.forward(&x).expect("forward");
    let (_, d_probs) = bce_loss(cache.output().data(), &targets).expect("loss");
    let d_out = Matrix::from_vec(2, out_width, d_probs).expect("shape");
    let grads = net.backward(&cache, &d_out).expect("backward");

    let numeric_input = finite_diff_grad(|m| loss_of(&net, m), &x, 1e-5).expect("fd");
    for (a, n) in grads.d_input.data().iter().zip(numeric_input.data()) {
        assert!(rel_error(*a, *n) < REL_TOL, "net input gradient {a} vs {n}");
    }

    let mut params = net.params();
    let n_params = params.len();
    let h = 1e-5;
    for probe in 0..200 {
        let i = SplitMix64::substream(12_345 + instance, probe).next_index(n_params);
        let base = params[i];
        params[i] = base + h;
        net.set_params(&params).expect("params");
        let plus = loss_of(&net, &x).expect("loss");
        params[i] = base - h;
        net.set_params(&params).expect("params");
        let minus = loss_of(&net, &x).expect("loss");
        params[i] = base;
        net.set_params(&params).expect("params");
        let numeric = (plus - minus) / (2.0 * h);
        assert!(
            rel_error(grads.flat[i], numeric) < REL_TOL,
            "net param[{i}]: {} vs {numeric}",
            grads.flat[i]
        );
    }
}

// --- attack invariants --------------------------------------------------

/// Budget, range, and the two exact attack equivalences over 200 samples.
#[test]
fn attack_budget_and_equivalence_invariants() {
    let _guard = heavy();
    let started = Instant::now();

    let n_features = 5;
    let cfg = RecurrentConfig {
        hidden_size: 6,
        ..RecurrentConfig::default()
    };
    let model: BiRecurrent<f64> = BiRecurrent::init(n_features, &cfg, 31).expect("init");
    let mut rng = SplitMix64::new(404);
    let x: Matrix = rng.sample_uniform(200, n_features, 0.0, 1.0);
    let y: Vec<u8> = (0..200).map(|_| (rng.next_u64() & 1) as u8).collect();

    for &epsilon in &[0.05, 0.25, 0.5] {
        let base = AttackConfig {
            epsilon,
            seed: 99,
            ..AttackConfig::default()
        };

        for kind in AttackKind::ALL {
            let outcome = kind.run(&model, &x, &y, &base).expect("attack");
            assert_budget_and_range(&x, &outcome.adversarial, epsilon);
        }

        // One signed step of the iterated attack is exactly the one-shot
        // attack when the step length equals the whole budget.
        let single_step = AttackConfig {
            steps: 1,
            step_size: Some(epsilon),
            ..base.clone()
        };
        let bim_one = AttackKind::Bim
            .run(&model, &x, &y, &single_step)
            .expect("bim");
        let fgsm_ref = fgsm(&model, &x, &y, &single_step).expect("fgsm");
        assert_bit_identical(&bim_one.adversarial, &fgsm_ref.adversarial, "bim(1) vs fgsm");

        // Projected descent without a random start iterates exactly like
        // the iterated signed attack.
        let pgd_plain = AttackKind::Pgd.run(&model, &x, &y, &base).expect("pgd");
        let bim_ref = AttackKind::Bim.run(&model, &x, &y, &base).expect("bim");
        assert_bit_identical(
            &pgd_plain.adversarial,
            &bim_ref.adversarial,
            "pgd(no random start) vs bim",
        );
    }

    assert_within(started.elapsed(), Duration::from_secs(60), "attack invariants");
    println!("attack invariants: PASS");
}

fn assert_budget_and_range(clean: &Matrix, adv: &Matrix, epsilon: f64) {
    assert_eq!(clean.shape(), adv.shape());
    for (c, a) in clean.data().iter().zip(adv.data()) {
        assert!(
            (a - c).abs() <= epsilon + 1e-9,
            "budget violated: |{a} - {c}| > {epsilon}"
        );
        assert!((0.0..=1.0).contains(a), "output {a} outside [0,1]");
    }
}

fn assert_bit_identical(left: &Matrix, right: &Matrix, what: &str) {
    assert_eq!(left.shape(), right.shape(), "{what}: shape");
    for (l, r) in left.data().iter().zip(right.data()) {
        assert_eq!(l.to_bits(), r.to_bits(), "{what}: {l} vs {r}");
    }
}

// --- attack effectiveness ------------------------------------------------

/// On the benchmark the trained recurrent model must be accurate when
/// clean, lose at least 0.30 accuracy under projected descent at the top
/// of the grid, and degrade monotonically along it (small tolerance).
#[test]
fn recurrent_accuracy_degrades_under_projected_descent() {
    let _guard = heavy();
    let started = Instant::now();

    let dataset = benchmark();
    let model = train_birecurrent(&dataset, &RecurrentConfig::default(), 7).expect("train");
    let (x_test, y_test) = dataset.test_xy();

    let grid: Vec<f64> = (1..=10).map(|i| i as f64 * 0.05).collect();
    let cfg = AttackConfig {
        seed: 7,
        ..AttackConfig::default()
    };
    let result = sweep(&model, &x_test, &y_test, AttackKind::Pgd, &grid, &cfg).expect("sweep");
    assert!(
        result.failures.is_empty(),
        "grid points failed: {:?}",
        result.failures
    );

    assert!(
        result.clean_accuracy >= 0.85,
        "clean accuracy {} below 0.85",
        result.clean_accuracy
    );
    let at_half = result.points.last().expect("grid point").accuracy_after;
    assert!(
        result.clean_accuracy - at_half >= 0.30,
        "accuracy only dropped {} ({} -> {at_half})",
        result.clean_accuracy - at_half,
        result.clean_accuracy
    );
    for pair in result.points.windows(2) {
        assert!(
            pair[1].accuracy_after <= pair[0].accuracy_after + 0.03,
            "accuracy rose along the grid: {} -> {} at epsilon {}",
            pair[0].accuracy_after,
            pair[1].accuracy_after,
            pair[1].epsilon
        );
    }

    assert_within(started.elapsed(), Duration::from_secs(300), "attack effectiveness");
    println!("attack effectiveness: PASS");
}

// --- generator evasion headline ------------------------------------------

const BENCHMARK_TOML: &str = r#"
seed = 7

[dataset.synth]
n_samples = 1000
n_features = 12
class_separation = 2.0

[models]
families = ["boosted_level_wise", "bi_recurrent"]

[ganrl]
eval_batches = 25

[ganrl.refine]
episodes = 30
es_samples = 8
"#;

/// Runs the full generator pipeline against the boosted and recurrent
/// targets; each must end with at least 95% of generated records slipping
/// past the detector, reached through the metered score interface alone.
#[test]
fn generator_refinement_evades_both_targets() {
    let _guard = heavy();
    let dir = tempfile::tempdir().expect("tempdir");

    let ctx = context_for(dir.path(), BENCHMARK_TOML, "exp.toml", "run");
    cmd_prepare(&ctx).expect("prepare");
    let train_outcome = cmd_train(&ctx).expect("train");
    assert!(!train_outcome.partial, "training failed");

    for target in ["boosted_level_wise", "bi_recurrent"] {
        let toml = BENCHMARK_TOML.replace(
            "[ganrl]",
            &format!("[ganrl]\ntargets = [\"{target}\"]"),
        );
        let ctx = context_for(dir.path(), &toml, &format!("{target}.toml"), "run");
        let started = Instant::now();
        let outcome = cmd_gan_attack(&ctx).expect("gan attack");
        assert_within(
            started.elapsed(),
            Duration::from_secs(600),
            &format!("generator attack on {target}"),
        );
        assert!(!outcome.partial, "gan attack on {target} had failures");

        let report: serde_json::Value = read_json(
            &ctx.layout.report("gan_attack_report.json"),
        );
        let entry = &report["targets"][0];
        assert_eq!(entry["target"], target);
        let evasion = entry["asr_sample_rate_value"].as_f64().expect("rate");
        assert!(
            evasion >= 0.95,
            "{target}: evasion rate {evasion} below 0.95"
        );
        let detector = entry["detector_accuracy_value"].as_f64().expect("rate");
        assert!(
            detector <= 0.05,
            "{target}: detector accuracy {detector} above 0.05"
        );
        let queries = entry["surrogate_queries"].as_u64().expect("queries");
        assert!(queries > 0, "{target}: no queries were metered");
        // The handle used by the refinement loop is score-only: it offers
        // no parameter or gradient access to take, so a false flag here is
        // the only way parameters could have been touched.
        assert_eq!(entry["differentiable_surrogate"], false);
        println!(
            "generator evasion headline ({target}): PASS ({}/{} rows evaded, {queries} score queries, no parameter access)",
            entry["rows_scored_as_target"], entry["generated_rows"]
        );
    }
}

// --- metric oracle equivalence --------------------------------------------

/// Accuracy, F1, and both batch success readings recounted from scratch
/// with exact rational comparisons, plus the complement identity inside a
/// real generator-attack report.
#[test]
fn metric_ratios_match_brute_force_recounts() {
    let mut rng = SplitMix64::new(1234);
    for case in 0..1000 {
        let n = 1 + rng.next_index(40);
        let labels: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();
        let predicted: Vec<u8> = (0..n).map(|_| (rng.next_u64() & 1) as u8).collect();

        let counts = confusion(&labels, &predicted).expect("counts");
        let correct = labels
            .iter()
            .zip(&predicted)
            .filter(|(l, p)| l == p)
            .count() as u64;
        let expected = Ratio::new(correct, n as u64).expect("ratio");
        let got = accuracy(&counts).expect("accuracy");
        assert!(
            got.eq_exact(&expected),
            "case {case}: accuracy {got:?} vs recount {expected:?}"
        );

        let tp = labels
            .iter()
            .zip(&predicted)
            .filter(|(l, p)| **l == 1 && **p == 1)
            .count() as u64;
        let fp = predicted.iter().filter(|&&p| p == 1).count() as u64 - tp;
        let fn_ = labels.iter().filter(|&&l| l == 1).count() as u64 - tp;
        match f1(&counts) {
            Ok(got) => {
                let expected = Ratio::new(2 * tp, 2 * tp + fp + fn_).expect("ratio");
                assert!(
                    got.eq_exact(&expected),
                    "case {case}: f1 {got:?} vs recount {expected:?}"
                );
            }
            Err(Error::UndefinedMetric(_)) => {
                assert_eq!(2 * tp + fp + fn_, 0, "case {case}: f1 refused but defined");
            }
            Err(other) => panic!("case {case}: {other}"),
        }

        let n_batches = 1 + rng.next_index(8);
        let batches: Vec<BatchOutcome> = (0..n_batches)
            .map(|_| {
                let total = 1 + rng.next_index(20) as u64;
                let hits = rng.next_index(total as usize + 1) as u64;
                BatchOutcome { hits, total }
            })
            .collect();
        let hits_sum: u64 = batches.iter().map(|b| b.hits).sum();
        let total_sum: u64 = batches.iter().map(|b| b.total).sum();
        let all_count = batches.iter().filter(|b| b.hits == b.total).count() as u64;

        let sample = asr(&batches, AsrMode::SampleRate).expect("asr");
        assert!(
            sample.eq_exact(&Ratio::new(hits_sum, total_sum).expect("ratio")),
            "case {case}: sample-rate recount"
        );
        let batch_all = asr(&batches, AsrMode::BatchAll).expect("asr");
        assert!(
            batch_all.eq_exact(&Ratio::new(all_count, n_batches as u64).expect("ratio")),
            "case {case}: batch-all recount"
        );
    }

    // The complement identity must hold exactly in a produced report.
    let dir = tempfile::tempdir().expect("tempdir");
    let ctx = context_for(dir.path(), SMALL_PIPELINE_TOML, "exp.toml", "run");
    cmd_prepare(&ctx).expect("prepare");
    assert!(!cmd_train(&ctx).expect("train").partial);
    assert!(!cmd_gan_attack(&ctx).expect("gan attack").partial);
    let report: serde_json::Value = read_json(&ctx.layout.report("gan_attack_report.json"));
    for entry in report["targets"].as_array().expect("targets") {
        let rate_num = entry["asr_sample_rate"]["numerator"].as_u64().expect("n");
        let rate_den = entry["asr_sample_rate"]["denominator"].as_u64().expect("d");
        let acc_num = entry["detector_accuracy"]["numerator"].as_u64().expect("n");
        let acc_den = entry["detector_accuracy"]["denominator"].as_u64().expect("d");
        assert_eq!(rate_den, acc_den, "complement identity: denominators");
        assert_eq!(
            rate_num + acc_num,
            rate_den,
            "complement identity: numerators"
        );
    }

    println!("metric oracle equivalence: PASS");
}

// --- model zoo sanity -------------------------------------------------------

/// Every family must clear 0.80 on the benchmark, the two boosted growth
/// modes must agree closely, and the neighbour model must match an
/// independent recount of its vote.
#[test]
fn model_zoo_reaches_benchmark_accuracy() {
    let _guard = heavy();
    let dataset = benchmark();
    let (x_test, y_test) = dataset.test_xy();

    let knn_model = train_knn(&dataset, &KnnConfig::default()).expect("knn");
    let level = train_gbt(
        &dataset,
        &GbtConfig {
            growth: Growth::LevelWise,
            ..GbtConfig::default()
        },
    )
    .expect("level-wise");
    let leaf = train_gbt(
        &dataset,
        &GbtConfig {
            growth: Growth::LeafWise,
            ..GbtConfig::default()
        },
    )
    .expect("leaf-wise");
    let models: Vec<(&str, Box<dyn Classifier<f64>>)> = vec![
        (
            "bi_recurrent",
            Box::new(train_birecurrent(&dataset, &RecurrentConfig::default(), 7).expect("train")),
        ),
        ("boosted_level_wise", Box::new(level)),
        ("boosted_leaf_wise", Box::new(leaf)),
        ("knn", Box::new(knn_model.clone())),
        (
            "margin",
            Box::new(train_margin(&dataset, &MarginConfig::default(), 7).expect("train")),
        ),
    ];

    let mut accuracies = std::collections::BTreeMap::new();
    for (name, model) in &models {
        let predicted = predict_labels(model.as_ref(), &x_test).expect("predict");
        let counts = confusion(&y_test, &predicted).expect("counts");
        let acc = accuracy(&counts).expect("accuracy").value();
        assert!(acc >= 0.80, "{name}: test accuracy {acc} below 0.80");
        accuracies.insert(*name, acc);
    }
    let gap = (accuracies["boosted_level_wise"] - accuracies["boosted_leaf_wise"]).abs();
    assert!(gap <= 0.05, "boosted growth modes differ by {gap}");

    // Independent neighbour oracle: repeated minimum extraction with the
    // same (distance, index) order, majority over k labels.
    let queries = &x_test;
    let scores = knn_model.predict_proba(queries).expect("scores");
    for q in 0..100.min(queries.rows()) {
        let oracle = knn_vote_oracle(&knn_model, queries.row(q));
        let expected = oracle as f64 / knn_model.k as f64;
        assert_eq!(
            scores[q].to_bits(),
            expected.to_bits(),
            "query {q}: knn score {} vs oracle {expected}",
            scores[q]
        );
    }

    println!(
        "model zoo sanity: PASS ({})",
        accuracies
            .iter()
            .map(|(k, v)| format!("{k} {v:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
}

fn knn_vote_oracle(model: &KnnModel<f64>, query: &[f64]) -> usize {
    let n = model.train_features.rows();
    let mut picked = vec![false; n];
    let mut votes = 0;
    for _ in 0..model.k {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if picked[i] {
                continue;
            }
            let d: f64 = model
                .train_features
                .row(i)
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let better = match best {
                None => true,
                Some((bd, bi)) => d < bd || (d == bd && i < bi),
            };
            if better {
                best = Some((d, i));
            }
        }
        let (_, idx) = best.expect("k <= n");
        picked[idx] = true;
        if model.train_labels[idx] == 1 {
            votes += 1;
        }
    }
    votes
}

// --- attribution correctness -------------------------------------------------

/// Monte-Carlo Shapley against the closed form of an affine scorer, the
/// efficiency identity, and first rank for the only informative feature.
#[test]
fn shapley_matches_linear_closed_form() {
    struct Affine {
        w: Vec<f64>,
        b: f64,
    }
    impl Classifier<f64> for Affine {
        fn family(&self) -> &'static str {
            "affine_probe"
        }
        fn n_features(&self) -> usize {
            self.w.len()
        }
        fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
            Ok((0..x.rows())
                .map(|r| {
                    x.row(r)
                        .iter()
                        .zip(&self.w)
                        .map(|(v, w)| v * w)
                        .sum::<f64>()
                        + self.b
                })
                .collect())
        }
    }

    let model = Affine {
        w: vec![0.20, -0.15, 0.10, 0.05],
        b: 0.5,
    };
    let names: Vec<String> = (0..4).map(|j| format!("f{j:02}")).collect();
    let mut rng = SplitMix64::new(2024);
    let background: Matrix = rng.sample_uniform(64, 4, 0.0, 1.0);
    let x = [0.95, 0.05, 0.90, 0.02];

    let result = mc_shapley(&model, &x, &background, &names, 2000, 5).expect("shapley");

    let mu: Vec<f64> = (0..4)
        .map(|j| (0..64).map(|r| background.get(r, j)).sum::<f64>() / 64.0)
        .collect();
    for (j, (name, value)) in result.per_feature.iter().enumerate() {
        let closed = model.w[j] * (x[j] - mu[j]);
        assert!(
            (value - closed).abs() <= 0.05 * closed.abs(),
            "{name}: estimate {value} vs closed form {closed}"
        );
    }

    // Efficiency: contributions plus the base value recover the score.
    let score = model
        .predict_proba(&Matrix::from_vec(1, 4, x.to_vec()).expect("shape"))
        .expect("score")[0];
    let gap = (result.base_value + result.total() - score).abs();
    assert!(
        gap <= 3.0 * result.efficiency_standard_error.max(1e-12),
        "efficiency gap {gap} exceeds 3 standard errors ({})",
        result.efficiency_standard_error
    );

    // A detector that only reads one feature must rank it first.
    let single = Affine {
        w: vec![0.0, 0.0, 0.45, 0.0],
        b: 0.3,
    };
    let sx = [0.9, 0.2, 0.85, 0.4];
    let single_result = mc_shapley(&single, &sx, &background, &names, 500, 9).expect("shapley");
    let top = single_result
        .per_feature
        .iter()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"))
        .expect("feature");
    assert_eq!(top.0, "f02", "informative feature not ranked first");

    println!("attribution correctness: PASS");
}

// --- reference data reproduction ----------------------------------------------

/// Full pipeline over the real claims table when it is present; skipped
/// (not failed) when it is not.
#[test]
fn reference_data_reproduction() {
    let Some(csv) = reference_csv_path() else {
        println!("reference data reproduction: SKIP (claims CSV not present)");
        return;
    };
    let _guard = heavy();
    let dir = tempfile::tempdir().expect("tempdir");
    let toml = format!(
        r#"
seed = 7

[dataset]
csv = "{}"

[models]
families = ["boosted_level_wise", "bi_recurrent"]

[explain]
model = "boosted_level_wise"
"#,
        csv.display()
    );
    let ctx = context_for(dir.path(), &toml, "exp.toml", "run");
    cmd_prepare(&ctx).expect("prepare");
    assert!(!cmd_train(&ctx).expect("train").partial);
    cmd_explain(&ctx).expect("explain");

    let report: serde_json::Value = read_json(&ctx.layout.report("train_report.json"));
    let mut boosted_acc = None;
    let mut boosted_f1 = None;
    let mut recurrent_acc = None;
    for entry in report["models"].as_array().expect("models") {
        match entry["model_id"].as_str() {
            Some("boosted_level_wise") => {
                boosted_acc = entry["accuracy"].as_f64();
                boosted_f1 = entry["f1"].as_f64();
            }
            Some("bi_recurrent") => recurrent_acc = entry["accuracy"].as_f64(),
            _ => {}
        }
    }
    let boosted_acc = boosted_acc.expect("boosted accuracy");
    let boosted_f1 = boosted_f1.expect("boosted f1");
    let recurrent_acc = recurrent_acc.expect("recurrent accuracy");
    assert!(
        (boosted_acc - 0.825).abs() <= 0.08,
        "boosted accuracy {boosted_acc} outside 0.825 +/- 0.08"
    );
    assert!(
        (boosted_f1 - 0.819).abs() <= 0.08,
        "boosted f1 {boosted_f1} outside 0.819 +/- 0.08"
    );
    assert!(
        (recurrent_acc - 0.750).abs() <= 0.08,
        "recurrent accuracy {recurrent_acc} outside 0.750 +/- 0.08"
    );

    let importance =
        std::fs::read_to_string(ctx.layout.report("importance_boosted_level_wise.csv"))
            .expect("importance csv");
    let top3: Vec<&str> = importance
        .lines()
        .skip(1)
        .take(3)
        .map(|line| line.split(',').next().expect("feature column"))
        .collect();
    assert!(
        top3.iter().any(|f| *f == "incident_severity"),
        "incident_severity not in top 3: {top3:?}"
    );

    println!("reference data reproduction: PASS");
}

fn reference_csv_path() -> Option<PathBuf> {
    if let Ok(path) = std::env::var("ADVCLAIM_REFERENCE_CSV") {
        let path = PathBuf::from(path);
        return path.exists().then_some(path);
    }
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let fallback = workspace.join("data/insurance_claims.csv");
    fallback.exists().then_some(fallback)
}

// --- determinism -----------------------------------------------------------

const SMALL_PIPELINE_TOML: &str = r#"
seed = 11

[dataset.synth]
n_samples = 200
n_features = 6

[models]
families = ["bi_recurrent", "boosted_level_wise", "knn", "margin"]

[models.recurrent]
hidden_size = 16
epochs = 3

[ganrl]
targets = ["boosted_level_wise"]
eval_batches = 5

[ganrl.pretrain]
epochs = 5
latent_width = 8

[ganrl.refine]
episodes = 3
horizon = 4
batch = 8
es_samples = 2
"#;

/// Every command run twice with the same config and seed must leave
/// byte-identical artifacts; only the wall-clock log may differ.
#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    for run in ["run_a", "run_b"] {
        let ctx = context_for(dir.path(), SMALL_PIPELINE_TOML, "exp.toml", run);
        cmd_prepare(&ctx).expect("prepare");
        assert!(!cmd_train(&ctx).expect("train").partial);
        assert!(!cmd_attack(&ctx).expect("attack").partial);
        assert!(!cmd_gan_attack(&ctx).expect("gan attack").partial);
        assert!(!cmd_eval(&ctx).expect("eval").partial);
        cmd_explain(&ctx).expect("explain");
    }

    let mut compared = 0;
    compare_trees(
        &dir.path().join("run_a"),
        &dir.path().join("run_b"),
        &mut compared,
    );
    assert!(compared >= 15, "only {compared} artifact files compared");

    println!("determinism: PASS ({compared} files byte-identical)");
}

fn compare_trees(left: &Path, right: &Path, compared: &mut usize) {
    let mut names: Vec<String> = std::fs::read_dir(left)
        .expect("read dir")
        .map(|e| e.expect("entry").file_name().into_string().expect("name"))
        .collect();
    names.sort();
    for name in names {
        if name == "run.log" {
            continue;
        }
        let l = left.join(&name);
        let r = right.join(&name);
        if l.is_dir() {
            assert!(r.is_dir(), "{} missing from second run", r.display());
            compare_trees(&l, &r, compared);
        } else {
            let lb = std::fs::read(&l).expect("read");
            let rb = std::fs::read(&r).unwrap_or_else(|_| {
                panic!("{} missing from second run", r.display())
            });
            assert_eq!(lb, rb, "{name} differs between identical runs");
            *compared += 1;
        }
    }
}

// --- shared plumbing ---------------------------------------------------------

/// Builds a command context exactly the way the binary does: parse the
/// config from disk, hash its bytes, resolve the run directory.
fn context_for(base: &Path, toml: &str, config_name: &str, run_dir: &str) -> Context {
    let config_path = base.join(config_name);
    std::fs::write(&config_path, toml).expect("write config");
    let (config, config_hash) = load_config(&config_path).expect("load config");
    let seed = config.seed;
    let layout = Layout::new(base.join(run_dir));
    layout.ensure().expect("layout");
    Context {
        config,
        config_hash,
        seed,
        layout,
        allow_mismatch: false,
        verify: false,
        top_k: None,
    }
}

fn read_json(path: &Path) -> serde_json::Value {
    let bytes = std::fs::read(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_slice(&bytes).expect("valid json")
}

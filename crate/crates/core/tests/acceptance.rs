//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails or exceeds its time budget.

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, RngAlgorithm, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use berbench::bounds::{noisy_ber, ClassCount, EnvelopeCurve, ErrorRate, EstimateInterval, NoiseLevel};
use berbench::data::{
    generate_gaussian_mixture, inject_label_noise, Dataset, FeatureMatrix, GaussianMixtureSpec, LabelVector, NoiseSpec,
    Split,
};
use berbench::estimators::{estimate_cached, fit_extrapolation, ghp, EstimatorConfig, FeatureCache};
use berbench::harness::{
    execute_trials, read_trials, run_experiment, score_rows, score_table, write_synthetic, ExperimentConfig, ScoreRow,
    TrialRow, SYNTH_EVAL_FILE, SYNTH_TRAIN_FILE,
};
use berbench::mst::build_mst;
use berbench::neighbors::{knn_error, knn_query, pairwise_distance, DistanceMetric, QueryMode};
use berbench::scoring::{score_trials, TrialResult};
use berbench::seed::{noise_seed, rng_from_seed, trial_seed, EVAL_STREAM, TRAIN_STREAM};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn grid11() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn binary_gaussian(dim: usize, n_train: usize, n_eval: usize) -> GaussianMixtureSpec {
    let mut far = vec![0.0; dim];
    far[0] = 2.0;
    GaussianMixtureSpec {
        num_classes: ClassCount::new(2).unwrap(),
        dim,
        means: vec![vec![0.0; dim], far],
        std: 1.0,
        priors: vec![0.5, 0.5],
        train_samples: n_train,
        eval_samples: n_eval,
    }
}

// 1. Noisy Bayes error against brute force over random discrete joints.

fn bayes_error(joint: &[Vec<f64>]) -> f64 {
    1.0 - joint.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum::<f64>()
}

fn noisy_ber_identity() -> Check {
    let joint = (prop_oneof![Just(2usize), Just(3), Just(10)], 1usize..=10).prop_flat_map(|(c, nx)| {
        proptest::collection::vec(proptest::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], c), nx)
            .prop_filter("non-degenerate", |w| w.iter().flatten().sum::<f64>() > 1e-3)
    });
    let config = ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let worst = Cell::new(0.0f64);
    let cases = Cell::new(0usize);
    runner
        .run(&joint, |weights| {
            let c = weights[0].len();
            let total: f64 = weights.iter().flatten().sum();
            let p: Vec<Vec<f64>> = weights.iter().map(|r| r.iter().map(|w| w / total).collect()).collect();
            let r_star = ErrorRate::clamped(bayes_error(&p));
            for rho in grid11() {
                let noisy: Vec<Vec<f64>> = p
                    .iter()
                    .map(|row| {
                        let px: f64 = row.iter().sum();
                        row.iter().map(|v| (1.0 - rho) * v + rho * px / c as f64).collect()
                    })
                    .collect();
                let got = noisy_ber(r_star, NoiseLevel::new(rho).unwrap(), ClassCount::new(c).unwrap()).unwrap().get();
                let err = (got - bayes_error(&noisy)).abs();
                worst.set(worst.get().max(err));
                prop_assert!(err <= 1e-12, "C = {c}, rho = {rho}: {got} vs {}", bayes_error(&noisy));
            }
            cases.set(cases.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{} joints x 11 noise levels, max deviation {:.1e}", cases.get(), worst.get()))
}

// 2. Calibration identities of the area scores.

fn constant_trials(f: impl Fn(f64) -> (f64, f64)) -> Vec<TrialResult> {
    grid11()
        .into_iter()
        .map(|rho| {
            let (l, u) = f(rho);
            TrialResult {
                rho: NoiseLevel::new(rho).unwrap(),
                seed: 1,
                estimate: EstimateInterval::new(ErrorRate::clamped(l), ErrorRate::clamped(u)).unwrap(),
                wall_time_ms: 0,
            }
        })
        .collect()
}

fn calibration() -> Check {
    let mut lines = Vec::new();
    for c in [2usize, 3, 10] {
        let cc = ClassCount::new(c).unwrap();
        let chance = cc.chance_error();
        let r = score_trials(&constant_trials(|_| (chance, chance)), cc, ErrorRate::ZERO).map_err(|e| e.to_string())?;
        ensure((r.l - 1.0).abs() <= 1e-9 && (r.u - 1.0).abs() <= 1e-9, || {
            format!("chance estimator, C = {c}: L = {}, U = {}", r.l, r.u)
        })?;

        for sota in [0.0, 0.05, 0.3 * chance] {
            let s = ErrorRate::new(sota).unwrap();
            let env = EnvelopeCurve::new(cc, s).unwrap();
            let zero =
                score_trials(&constant_trials(|rho| (0.0, env.upper_at(rho))), cc, s).map_err(|e| e.to_string())?;
            ensure((zero.l - 1.0).abs() <= 1e-9, || {
                format!("zero lower bound, C = {c}, sota = {sota}: L = {}", zero.l)
            })?;

            let exact = |rho: f64| noisy_ber(s, NoiseLevel::new(rho).unwrap(), cc).unwrap().get();
            let perfect =
                score_trials(&constant_trials(|rho| (exact(rho), exact(rho))), cc, s).map_err(|e| e.to_string())?;
            ensure(perfect.l.abs() <= 1e-9 && perfect.u.abs() <= 1e-9, || {
                format!("perfect curve, C = {c}, sota = {sota}: L = {}, U = {}", perfect.l, perfect.u)
            })?;
        }
        lines.push(format!("C={c}"));
    }
    Ok(format!("chance = 1, zero lower = 1, perfect = 0 for {}", lines.join(", ")))
}

// 3. Neighbor search and spanning tree against brute-force oracles.

fn random_matrix(n: usize, d: usize, integer: bool, seed: u64) -> FeatureMatrix {
    let mut rng = rng_from_seed(seed);
    let values = (0..n * d)
        .map(|_| if integer { rng.random_range(-2i32..=2) as f32 } else { rng.random_range(-1.0f32..1.0) })
        .collect();
    FeatureMatrix::new(n, d, values).unwrap()
}

/// Straightforward distance with no shared code for integer data; integer
/// coordinates make every sum exact so the results must agree bit for bit.
fn naive_distance(a: &[f32], b: &[f32], metric: DistanceMetric) -> f64 {
    let (a, b): (Vec<f64>, Vec<f64>) = (a.iter().map(|&v| v as f64).collect(), b.iter().map(|&v| v as f64).collect());
    match metric {
        DistanceMetric::SquaredEuclidean => a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum(),
        DistanceMetric::Cosine => {
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let (na, nb) = (a.iter().map(|x| x * x).sum::<f64>().sqrt(), b.iter().map(|x| x * x).sum::<f64>().sqrt());
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
            }
        }
    }
}

fn oracle_distance(a: &[f32], b: &[f32], metric: DistanceMetric, integer: bool) -> f64 {
    if integer {
        naive_distance(a, b, metric)
    } else {
        pairwise_distance(a, b, metric).unwrap()
    }
}

/// Every reference sorted by (distance, index).
fn sorted_neighbors(
    reference: &FeatureMatrix,
    query: &[f32],
    skip: Option<usize>,
    metric: DistanceMetric,
    integer: bool,
) -> Vec<(f64, u32)> {
    let mut all: Vec<(f64, u32)> = (0..reference.n())
        .filter(|&j| Some(j) != skip)
        .map(|j| (oracle_distance(query, reference.row(j), metric, integer), j as u32))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all
}

fn check_queries(
    reference: &FeatureMatrix,
    queries: &FeatureMatrix,
    integer: bool,
) -> std::result::Result<usize, String> {
    let mut compared = 0;
    for metric in [DistanceMetric::SquaredEuclidean, DistanceMetric::Cosine] {
        for mode in [QueryMode::Standard, QueryMode::LeaveOneOut, QueryMode::Resubstitution] {
            let q = if mode == QueryMode::Standard { queries } else { reference };
            let oracle: Vec<Vec<(f64, u32)>> = (0..q.n())
                .map(|i| {
                    let skip = (mode != QueryMode::Standard).then_some(i);
                    let mut list = sorted_neighbors(reference, q.row(i), skip, metric, integer);
                    if mode == QueryMode::Resubstitution {
                        list.insert(0, (0.0, i as u32));
                    }
                    list
                })
                .collect();
            for k in [1usize, 5, 10] {
                let got = knn_query(reference, q, k, metric, mode).map_err(|e| e.to_string())?;
                for (i, expected) in oracle.iter().enumerate() {
                    let want_idx: Vec<u32> = expected[..k].iter().map(|p| p.1).collect();
                    let want_dist: Vec<f64> = expected[..k].iter().map(|p| p.0).collect();
                    ensure(got.indices(i) == want_idx.as_slice() && got.distances(i) == want_dist.as_slice(), || {
                        format!(
                            "{metric} {mode:?} k={k} n={} d={} query {i}: {:?} vs {:?}",
                            reference.n(),
                            reference.d(),
                            got.indices(i),
                            want_idx
                        )
                    })?;
                    compared += 1;
                }
            }
        }
    }
    Ok(compared)
}

fn kruskal_weight(features: &FeatureMatrix, integer: bool) -> f64 {
    let n = features.n();
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let sq = oracle_distance(features.row(i), features.row(j), DistanceMetric::SquaredEuclidean, integer);
            edges.push((sq, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut weights = Vec::with_capacity(n - 1);
    for (sq, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            weights.push(sq.sqrt());
        }
    }
    weights.sort_by(f64::total_cmp);
    weights.iter().sum()
}

fn oracle_equivalence() -> Check {
    let mut compared = 0;
    let mut seed = 0;
    for (n, d) in [(12, 1), (60, 2), (300, 7), (1000, 3), (400, 32), (1000, 32)] {
        for integer in [true, false] {
            seed += 1;
            let reference = random_matrix(n, d, integer, seed);
            let queries = random_matrix(n / 2 + 1, d, integer, seed + 1000);
            compared += check_queries(&reference, &queries, integer)?;
        }
    }

    let mut trees = 0;
    for (n, d) in [(2, 1), (10, 2), (50, 3), (200, 2), (200, 16)] {
        for integer in [true, false] {
            seed += 1;
            let features = random_matrix(n, d, integer, seed);
            let edges = build_mst(&features).map_err(|e| e.to_string())?;
            ensure(edges.len() == n - 1, || format!("n = {n}: {} edges", edges.len()))?;
            let mut weights: Vec<f64> = edges.iter().map(|e| e.weight).collect();
            weights.sort_by(f64::total_cmp);
            let got: f64 = weights.iter().sum();
            let want = kruskal_weight(&features, integer);
            ensure(got == want, || format!("MST n = {n}, d = {d}, integer = {integer}: {got} vs {want}"))?;
            trees += 1;
        }
    }
    Ok(format!("{compared} neighbor lists and {trees} spanning trees identical"))
}

// 4. Estimators at full label noise.

fn shared_cache(train: &Dataset, eval: &Dataset, configs: &[EstimatorConfig]) -> FeatureCache {
    let reqs: Vec<_> = configs.iter().flat_map(|c| c.requirements(train.n()).unwrap()).collect();
    FeatureCache::build(train.shared_features().clone(), eval.shared_features().clone(), &reqs).unwrap()
}

fn noise_endpoint() -> Check {
    let splits = generate_gaussian_mixture(&binary_gaussian(2, 5000, 5000), 404).map_err(|e| e.to_string())?;
    // the seeds a harness run with master seed 4 uses for its first repeat at rho = 1
    let full = NoiseLevel::new(1.0).unwrap();
    let trial = trial_seed(4, 0);
    let train = inject_label_noise(&splits.train, NoiseSpec { rho: full, seed: noise_seed(trial, 10, TRAIN_STREAM) });
    let eval = inject_label_noise(&splits.eval, NoiseSpec { rho: full, seed: noise_seed(trial, 10, EVAL_STREAM) });

    let l2 = DistanceMetric::SquaredEuclidean;
    let loo = knn_error(&eval, &eval, 1, l2, QueryMode::LeaveOneOut).map_err(|e| e.to_string())?.get();
    ensure((loo - 0.5).abs() <= 0.03, || format!("1NN leave-one-out error {loo:.4}"))?;

    let configs = vec![
        EstimatorConfig::OneNn { metric: l2 },
        EstimatorConfig::Knn { k: 5, metric: l2 },
        EstimatorConfig::KnnLoo { k: 1, metric: l2 },
        EstimatorConfig::DeKnn { k: 100, metric: l2 },
        EstimatorConfig::OneNnKnn { k: 10, metric: l2 },
        EstimatorConfig::Kde { bandwidth: 0.25 },
        EstimatorConfig::Ghp,
        EstimatorConfig::KnnExtrapolate { k: 1, metric: l2, schedule: None, expansion_dim: None, subsample_seed: 9 },
        EstimatorConfig::ScaledClassifier { scaling: 0.8 },
    ];
    let cache = shared_cache(&train, &eval, &configs);
    let mut worst = (0.0f64, String::new());
    for cfg in &configs {
        let upper = estimate_cached(&cache, &train, &eval, cfg).map_err(|e| format!("{cfg}: {e}"))?.upper().get();
        ensure((upper - 0.5).abs() <= 0.05, || format!("{cfg}: upper {upper:.4} at rho = 1"))?;
        if (upper - 0.5).abs() >= worst.0 {
            worst = ((upper - 0.5).abs(), cfg.to_string());
        }
    }
    Ok(format!("1NN LOO error {loo:.4}; {} uppers within {:.4} of 0.5 (widest {})", configs.len(), worst.0, worst.1))
}

// 5. Bounds and scores against the Gaussian oracle.

fn experiment(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(body).expect("valid acceptance config")
}

fn best(rows: &[ScoreRow], method: &str) -> std::result::Result<ScoreRow, String> {
    rows.iter().find(|r| r.method == method).cloned().ok_or_else(|| format!("no score for {method}"))
}

fn gaussian_oracle() -> Check {
    let splits = generate_gaussian_mixture(&binary_gaussian(1, 20000, 5000), 505).map_err(|e| e.to_string())?;
    let oracle = splits.oracle.true_ber.get();
    ensure((oracle - 0.15866).abs() < 1e-5, || format!("oracle {oracle}"))?;
    let config = experiment(&format!(
        r#"
        sota = {oracle}
        repeats = 3
        master_seed = 5
        [dataset]
        name = "gauss"
        train = "unused"
        eval = "unused"
        format = "bin"
        classes = 2
        [[estimators]]
        method = "one_nn"
        metric = "squared_l2"
        [[estimators]]
        method = "knn"
        metric = "squared_l2"
        [[estimators]]
        method = "knn_loo"
        metric = "squared_l2"
        [[estimators]]
        method = "ghp"
        "#
    ));
    let rows = execute_trials(&config, &splits.train, &splits.eval).map_err(|e| e.to_string())?;
    for r in rows.iter().filter(|r| r.rho == 0.0) {
        let (lower, upper) = (r.lower.ok_or("missing lower")?, r.upper.ok_or("missing upper")?);
        ensure(lower <= oracle + 0.02 && upper >= oracle - 0.02, || {
            format!("{}[{}] at rho = 0: [{lower:.4}, {upper:.4}]", r.method, r.variant)
        })?;
    }
    let outcome = score_rows(&rows, &config.envelope().unwrap(), &grid11()).map_err(|e| e.to_string())?;
    ensure(outcome.rejected.is_empty(), || format!("rejected: {:?}", outcome.rejected))?;
    let mut parts = Vec::new();
    for method in ["one_nn", "knn", "knn_loo", "ghp"] {
        let b = best(&outcome.best_l, method)?;
        ensure(b.l <= 0.15, || format!("{method}[{}]: L = {:.4}", b.variant, b.l))?;
        parts.push(format!("{method} L={:.3}", b.l));
    }
    Ok(format!("all rho = 0 bounds bracket {oracle:.5}; best {}", parts.join(", ")))
}

// 6. Scaled-down raw MNIST.

fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR").map_or_else(|| PathBuf::from("/root/data/mnist"), PathBuf::from)
}

fn mnist_proxy() -> Check {
    let dir = mnist_dir();
    let train = dir.join("train-images-idx3-ubyte");
    let eval = dir.join("t10k-images-idx3-ubyte");
    ensure(train.exists() && eval.exists(), || {
        format!("MNIST IDX files not found in {} (set MNIST_DIR)", dir.display())
    })?;
    let config = experiment(&format!(
        r#"
        sota = 0.0013
        repeats = 3
        master_seed = 6
        [dataset]
        name = "mnist"
        train = "{}"
        eval = "{}"
        format = "idx"
        classes = 10
        train_subsample = 10000
        eval_subsample = 2000
        [[estimators]]
        method = "knn"
        "#,
        train.display(),
        eval.display()
    ));
    let (train, eval) = config.load_datasets().map_err(|e| e.to_string())?;
    let rows = execute_trials(&config, &train, &eval).map_err(|e| e.to_string())?;
    let outcome = score_rows(&rows, &config.envelope().unwrap(), &grid11()).map_err(|e| e.to_string())?;
    let (bl, bu) = (best(&outcome.best_l, "knn")?, best(&outcome.best_u, "knn")?);
    let both = outcome.scores.iter().any(|s| s.l <= 0.15 && s.u <= 0.25);
    let detail = format!(
        "best L = {:.4} [{}], best U = {:.4} [{}]; one variant meets both: {both}",
        bl.l, bl.variant, bu.u, bu.variant
    );
    ensure(bl.l <= 0.15 && bu.u <= 0.25, || detail.clone())?;
    Ok(detail)
}

// 7. Extrapolation intercept recovery.

fn extrapolation_fit() -> Check {
    let sizes = [500usize, 1000, 2000, 4000, 8000];
    let (a, b) = (0.1, 0.5);
    let curve = |m: usize, d: usize| a + b * (m as f64).powf(-2.0 / d as f64);
    let mut exact_worst = 0.0f64;
    for d in [1usize, 2, 3, 5, 10, 32] {
        let errors: Vec<f64> = sizes.iter().map(|&m| curve(m, d)).collect();
        let fit = fit_extrapolation(&sizes, &errors, d).map_err(|e| e.to_string())?;
        exact_worst = exact_worst.max((fit.intercept - a).abs());
    }
    ensure(exact_worst <= 1e-9, || format!("exact sequences: |a_hat - a| = {exact_worst:.2e}"))?;

    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut noisy_worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = rng_from_seed(seed);
        let errors: Vec<f64> = sizes.iter().map(|&m| curve(m, 2) + noise.sample(&mut rng)).collect();
        let fit = fit_extrapolation(&sizes, &errors, 2).map_err(|e| e.to_string())?;
        noisy_worst = noisy_worst.max((fit.intercept - a).abs());
    }
    ensure(noisy_worst <= 0.03, || format!("noisy sequences: worst |a_hat - a| = {noisy_worst:.4}"))?;
    Ok(format!("exact worst {exact_worst:.1e}, noisy worst over 100 seeds {noisy_worst:.4}"))
}

// 8. Reproducible tables.

const ALL_METHODS: &str = r#"
    [[estimators]]
    method = "one_nn"
    [[estimators]]
    method = "knn"
    k = [1, 3]
    [[estimators]]
    method = "knn_loo"
    k = 1
    [[estimators]]
    method = "de_knn"
    k = 5
    metric = "squared_l2"
    [[estimators]]
    method = "one_nn_knn"
    k = 5
    metric = "cosine"
    [[estimators]]
    method = "kde"
    bandwidth = 0.25
    [[estimators]]
    method = "ghp"
    [[estimators]]
    method = "knn_extrapolate"
    k = 1
    metric = "squared_l2"
    [[estimators]]
    method = "scaled_classifier"
"#;

fn run_in_pool(threads: usize, config: &ExperimentConfig, out: &Path) -> std::result::Result<Vec<u8>, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let summary = pool.install(|| run_experiment(config, out)).map_err(|e| e.to_string())?;
    std::fs::read(summary.trials_path).map_err(|e| e.to_string())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_synthetic(&binary_gaussian(2, 300, 300), 808, dir.path()).map_err(|e| e.to_string())?;
    let config = experiment(&format!(
        r#"
        sota = 0.1587
        repeats = 2
        master_seed = 8
        [dataset]
        train = "{}"
        eval = "{}"
        format = "bin"
        classes = 2
        {ALL_METHODS}
        "#,
        dir.path().join(SYNTH_TRAIN_FILE).display(),
        dir.path().join(SYNTH_EVAL_FILE).display()
    ));
    let first = run_in_pool(1, &config, &dir.path().join("a"))?;
    let second = run_in_pool(3, &config, &dir.path().join("b"))?;
    ensure(first == second, || "trial tables differ between runs".into())?;

    let rows: Vec<TrialRow> = read_trials(&dir.path().join("a").join("trials.csv")).map_err(|e| e.to_string())?;
    let mut shuffled = rows.clone();
    shuffled.shuffle(&mut rng_from_seed(88));
    score_table(&config, &rows, &dir.path().join("s1")).map_err(|e| e.to_string())?;
    score_table(&config, &shuffled, &dir.path().join("s2")).map_err(|e| e.to_string())?;
    for file in ["scores.csv", "best_L.csv", "best_U.csv"] {
        let (x, y) = (std::fs::read(dir.path().join("s1").join(file)), std::fs::read(dir.path().join("s2").join(file)));
        ensure(x.map_err(|e| e.to_string())? == y.map_err(|e| e.to_string())?, || {
            format!("{file} depends on row order")
        })?;
    }
    Ok(format!("{} trial rows byte-identical across 1 and 3 threads; scores invariant to row order", rows.len()))
}

// 9. GHP at the extremes.

fn dataset(features: Vec<f32>, d: usize, labels: Vec<u32>, c: usize) -> Dataset {
    let n = labels.len();
    Dataset::new(
        FeatureMatrix::new(n, d, features).unwrap(),
        LabelVector::new(labels),
        ClassCount::new(c).unwrap(),
        Split::Eval,
    )
    .unwrap()
}

fn ghp_extremes() -> Check {
    let mut rng = rng_from_seed(909);
    let unit = Normal::new(0.0f32, 1.0).unwrap();
    let n = 2000;
    let labels: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
    let features: Vec<f32> =
        labels.iter().flat_map(|&y| [unit.sample(&mut rng) + 50.0 * y as f32, unit.sample(&mut rng)]).collect();
    let sep = ghp(&dataset(features, 2, labels, 2)).map_err(|e| e.to_string())?;
    ensure(sep.lower().get() <= 0.02 && sep.upper().get() <= 0.02, || format!("separable: {sep:?}"))?;

    let mut parts = vec![format!("separable [{:.4}, {:.4}]", sep.lower().get(), sep.upper().get())];
    let mut misses = Vec::new();
    for c in [2usize, 5, 10] {
        let n = 5000;
        let d = 3;
        let features: Vec<f32> = (0..n * d).map(|_| rng.random::<f32>()).collect();
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..c as u32)).collect();
        let est = ghp(&dataset(features, d, labels, c)).map_err(|e| e.to_string())?;
        let chance = 1.0 - 1.0 / c as f64;
        let (lo, hi) = (est.lower().get(), est.upper().get());
        parts.push(format!("C={c} [{lo:.4}, {hi:.4}] vs {chance:.4}"));
        if (lo - chance).abs() > 0.05 || (hi - chance).abs() > 0.05 {
            misses.push(c);
        }
    }
    let detail = parts.join("; ");
    ensure(misses.is_empty(), || format!("random labels off by more than 0.05 for C = {misses:?}: {detail}"))?;
    Ok(detail)
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    check: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "noisy Bayes error identity",
            budget: Duration::from_secs(1),
            check: noisy_ber_identity,
        },
        Criterion { id: 2, name: "score calibration", budget: Duration::from_secs(1), check: calibration },
        Criterion { id: 3, name: "oracle equivalence", budget: Duration::from_secs(30), check: oracle_equivalence },
        Criterion { id: 4, name: "full-noise endpoint", budget: Duration::from_secs(300), check: noise_endpoint },
        Criterion { id: 5, name: "Gaussian oracle sanity", budget: Duration::from_secs(900), check: gaussian_oracle },
        Criterion { id: 6, name: "raw MNIST proxy", budget: Duration::from_secs(7200), check: mnist_proxy },
        Criterion { id: 7, name: "extrapolation fit", budget: Duration::from_secs(10), check: extrapolation_fit },
        Criterion { id: 8, name: "determinism", budget: Duration::from_secs(60), check: determinism },
        Criterion { id: 9, name: "GHP extremes", budget: Duration::from_secs(300), check: ghp_extremes },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match &result {
            Ok(detail) => println!("criterion {} {:<28} PASS ({:.2?}) {detail}", c.id, c.name, elapsed),
            Err(reason) => {
                failed += 1;
                println!("criterion {} {:<28} FAIL ({:.2?}) {reason}", c.id, c.name, elapsed)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

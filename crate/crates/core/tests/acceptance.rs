//! End-to-end acceptance checks. Each test prints one `ACCEPTANCE` line with
//! its verdict before asserting.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sing::dataset::{ClassId, Dataset, Feature, Sample, Schema};
use sing::grouping::{pulse_psi, DeltaVector, GroupStore, Prediction, UNKNOWN};
use sing::mlp::weight_count;
use sing::most::{self, suite, MostConfig};
use sing::protocol::{self, Benchmark, SingSettings, REPRODUCE_SEEDS};

fn data_path(bench: Benchmark) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(bench.file_name())
}

fn load(bench: Benchmark) -> Dataset {
    bench.load(data_path(bench)).expect("benchmark data present")
}

/// Written to the process stdout directly so the line survives output capture.
fn verdict(name: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "ACCEPTANCE [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" })
        .expect("stdout writable");
}

/// Published held-out rows: features, species code, predicted code and the
/// three counts. Codes: 1 setosa, 2 versicolor, 3 virginica.
const GOLDEN_ROWS: [([f64; 4], u32, u32, [u32; 3]); 30] = [
    ([5.0, 3.5, 1.3, 0.3], 1, 1, [38, 0, 0]),
    ([4.5, 2.3, 1.3, 0.3], 1, 1, [6, 0, 0]),
    ([4.4, 3.2, 1.3, 0.2], 1, 1, [27, 0, 0]),
    ([5.0, 3.5, 1.6, 0.6], 1, 1, [38, 0, 0]),
    ([5.1, 3.8, 1.9, 0.4], 1, 1, [33, 0, 0]),
    ([4.8, 3.0, 1.4, 0.3], 1, 1, [32, 0, 0]),
    ([5.1, 3.8, 1.6, 0.2], 1, 1, [34, 0, 0]),
    ([4.6, 3.2, 1.4, 0.2], 1, 1, [29, 0, 0]),
    ([5.3, 3.7, 1.5, 0.2], 1, 1, [37, 0, 0]),
    ([5.0, 3.3, 1.4, 0.2], 1, 1, [36, 0, 0]),
    ([5.5, 2.6, 4.4, 1.2], 2, 2, [0, 20, 0]),
    ([6.1, 3.0, 4.6, 1.4], 2, 2, [0, 29, 0]),
    ([5.8, 2.6, 4.0, 1.2], 2, 2, [0, 26, 0]),
    ([5.0, 2.3, 3.3, 1.0], 2, 2, [0, 10, 0]),
    ([5.6, 2.7, 4.2, 1.3], 2, 2, [0, 27, 0]),
    ([5.7, 3.0, 4.2, 1.2], 2, 2, [0, 25, 0]),
    ([5.7, 2.9, 4.2, 1.3], 2, 2, [0, 28, 0]),
    ([6.2, 2.9, 4.3, 1.3], 2, 2, [0, 33, 0]),
    ([5.1, 2.5, 3.0, 1.1], 2, 2, [0, 5, 0]),
    ([5.7, 2.8, 4.1, 1.3], 2, 2, [0, 27, 0]),
    ([6.7, 3.1, 5.6, 2.4], 3, 3, [0, 0, 15]),
    ([6.9, 3.1, 5.1, 2.3], 3, 3, [0, 0, 17]),
    ([5.8, 2.7, 5.1, 1.9], 3, 3, [0, 0, 21]),
    ([6.8, 3.2, 5.9, 2.3], 3, 3, [0, 0, 20]),
    ([6.7, 3.3, 5.7, 2.5], 3, 3, [0, 0, 13]),
    ([6.7, 3.0, 5.2, 2.3], 3, 3, [0, 0, 20]),
    ([6.3, 2.5, 5.0, 1.9], 3, 3, [0, 0, 22]),
    ([6.5, 3.0, 5.2, 2.0], 3, 3, [0, 0, 24]),
    ([6.2, 3.4, 5.4, 2.3], 3, 3, [0, 0, 22]),
    ([5.9, 3.0, 5.1, 1.8], 3, 3, [0, 0, 18]),
];

const GOLDEN_SPECIES: [&str; 3] = ["Iris-setosa", "Iris-versicolor", "Iris-virginica"];

fn golden_class(code: u32, data: &Dataset) -> ClassId {
    data.schema()
        .class_id(GOLDEN_SPECIES[code as usize - 1])
        .expect("species present")
}

fn golden_store() -> (Dataset, GroupStore, Duration, Vec<Prediction>) {
    let iris = load(Benchmark::Iris);
    let start = Instant::now();
    let delta = DeltaVector::new(Benchmark::Iris.reference().delta.to_vec()).unwrap();
    let store = GroupStore::build(&iris, delta).unwrap();
    let predictions = GOLDEN_ROWS.iter().map(|row| store.predict(&row.0)).collect();
    (iris, store, start.elapsed(), predictions)
}

#[test]
fn iris_golden_predictions() {
    let (iris, _, elapsed, predictions) = golden_store();
    let mut matches = 0;
    let mut true_count_positive = 0;
    for (row, p) in GOLDEN_ROWS.iter().zip(&predictions) {
        let truth = golden_class(row.1, &iris);
        matches += usize::from(p.label == golden_class(row.2, &iris));
        true_count_positive += usize::from(p.counts[truth as usize - 1] > 0);
    }
    let pass = matches == 30 && true_count_positive == 30 && elapsed < Duration::from_secs(1);
    verdict(
        "Iris golden predictions",
        pass,
        &format!("{matches}/30 predictions match, P(true)>0 in {true_count_positive}/30, {elapsed:?}"),
    );
    assert!(pass);
}

#[test]
fn iris_golden_off_class_counts_are_zero() {
    let (iris, _, _, predictions) = golden_store();
    let mut agree = 0;
    let mut mismatched = Vec::new();
    for (i, (row, p)) in GOLDEN_ROWS.iter().zip(&predictions).enumerate() {
        let truth = golden_class(row.1, &iris) as usize - 1;
        let published_zero = row.3.iter().enumerate().all(|(k, &c)| k + 1 == row.1 as usize || c == 0);
        let ours_zero = p.counts.iter().enumerate().all(|(k, &c)| k == truth || c == 0);
        if published_zero == ours_zero {
            agree += 1;
        } else {
            mismatched.push(i + 1);
        }
    }
    let pass = agree == 30;
    verdict(
        "Iris golden off-class count pattern",
        pass,
        &format!("{agree}/30 rows agree; rows with off-class groups: {mismatched:?}"),
    );
    assert!(pass);
}

fn sing_runs(bench: Benchmark) -> Vec<protocol::SingRun> {
    let data = load(bench);
    REPRODUCE_SEEDS
        .iter()
        .map(|&seed| protocol::run_sing(&data, bench, &SingSettings::for_benchmark(bench, seed)).unwrap())
        .collect()
}

fn end_to_end(bench: Benchmark, label: &str, check_delta: bool) {
    let runs = sing_runs(bench);
    let t = bench.thresholds();
    let test: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let teach: Vec<f64> = runs.iter().map(|r| r.fit.teaching_accuracy).collect();
    let (med_test, med_teach) = (protocol::median(&test), protocol::median(&teach));
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap();

    let mut checks = vec![
        (format!("median test {med_test:.4} >= {}", t.sing_test), med_test >= t.sing_test),
        (
            format!("slowest seed {slowest:.1?} < {}s", t.seconds_per_seed),
            slowest < Duration::from_secs(t.seconds_per_seed),
        ),
    ];
    if let Some(min) = t.sing_teaching {
        checks.push((format!("median teaching {med_teach:.4} >= {min}"), med_teach >= min));
    }
    if bench == Benchmark::Abalone {
        let baseline = bench.reference().baseline_test;
        checks.push((format!("median test above external {baseline}"), med_test > baseline));
    }
    if check_delta {
        let reference = bench.reference().delta;
        let agree: Vec<usize> = runs
            .iter()
            .map(|r| protocol::delta_agreement(r.delta().as_slice(), reference, 0.25))
            .collect();
        checks.push((
            format!("delta within 0.25 of published in >= 3 coordinates for every seed {agree:?}"),
            agree.iter().all(|&a| a >= 3),
        ));
    }
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|(d, ok)| format!("{}{d}", if *ok { "" } else { "MISS " }))
        .collect();
    verdict(
        label,
        pass,
        &format!("{}; per-seed test {test:.4?}, teaching {teach:.4?}", detail.join("; ")),
    );
    assert!(pass);
}

#[test]
fn iris_end_to_end() {
    end_to_end(Benchmark::Iris, "Iris end-to-end", true);
}

#[test]
fn car_end_to_end() {
    end_to_end(Benchmark::Car, "Car end-to-end", false);
}

#[test]
fn abalone_end_to_end() {
    end_to_end(Benchmark::Abalone, "Abalone end-to-end", false);
}

#[test]
fn nn_baseline() {
    let bench = Benchmark::Iris;
    let data = load(bench);
    let spec = bench.nn_spec().unwrap();
    let car_spec = Benchmark::Car.nn_spec().unwrap();
    let mut test = Vec::new();
    for &seed in &REPRODUCE_SEEDS {
        let most = MostConfig {
            mc_samples: bench.nn_mc_samples(),
            seed,
            ..MostConfig::default()
        };
        let run = protocol::run_nn(&data, bench, &most, false).unwrap().unwrap();
        test.push(run.test_accuracy);
    }
    let med = protocol::median(&test);
    let counts = (weight_count(&spec), weight_count(&car_spec));
    let pass = med >= 0.85 && counts == (27, 194);
    verdict(
        "NN baseline",
        pass,
        &format!("median iris test {med:.4} >= 0.85 (per seed {test:.4?}); weight counts {counts:?}"),
    );
    assert!(pass);
}

#[test]
fn most_correctness_suite() {
    let mut failures = Vec::new();
    let mut runs = 0;
    for tf in suite::all() {
        let domain = tf.domain();
        let oracle = most::grid_oracle(&tf.f, &domain, tf.oracle_points).unwrap();
        let band = 1e-3 * (oracle.value_range.1 - oracle.value_range.0);
        for seed in 1..=5 {
            runs += 1;
            let config = MostConfig {
                mc_samples: tf.mc_samples,
                seed,
                ..MostConfig::default()
            };
            let report = most::optimize(&tf.f, &domain, &config).unwrap();
            let value = (tf.f)(&report.best_point);
            if value > oracle.best_value + band {
                failures.push(format!("{} seed {seed}: {value} vs oracle {}", tf.name, oracle.best_value));
            }
            for j in 0..tf.dim() {
                let rel = report.final_widths[j] / domain.width(j);
                if rel >= 1e-6 {
                    failures.push(format!("{} seed {seed}: width {rel:e} in variable {j}", tf.name));
                }
                let expected = domain.width(j) / config.initial_divisions as f64
                    * 0.5f64.powi(report.bisections[j] as i32);
                if report.final_widths[j] != expected {
                    failures.push(format!("{} seed {seed}: width schedule off in variable {j}", tf.name));
                }
                let actual = report.final_upper[j] - report.final_lower[j];
                if (actual - expected).abs() > 1e-9 * domain.width(j) {
                    failures.push(format!("{} seed {seed}: interval {actual:e} vs {expected:e}", tf.name));
                }
            }
            let replay = most::optimize(&tf.f, &domain, &config).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            if replay.trace_csv() != report.trace_csv() || bits(&replay.best_point) != bits(&report.best_point) {
                failures.push(format!("{} seed {seed}: replay differs", tf.name));
            }
        }
    }
    let pass = failures.is_empty();
    verdict(
        "MOST correctness suite",
        pass,
        &format!("{runs} runs over {} functions; failures: {failures:?}", suite::all().count()),
    );
    assert!(pass);
}

type Instance = (Vec<(Vec<f64>, ClassId)>, Vec<f64>, Vec<f64>, usize);

/// Random store contents on a 0.1 grid, a delta on a 0.05 grid, and a probe.
fn instance() -> impl Strategy<Value = Instance> {
    (1usize..5, 2usize..5).prop_flat_map(|(m, k)| {
        let row = (prop::collection::vec(-20i32..20, m), 1..=k as ClassId)
            .prop_map(|(c, l)| (c.into_iter().map(|v| v as f64 * 0.1).collect::<Vec<_>>(), l));
        (
            prop::collection::vec(row, 1..50),
            prop::collection::vec(1i32..20, m).prop_map(|d| d.into_iter().map(|v| v as f64 * 0.05).collect()),
            prop::collection::vec(-25i32..25, m).prop_map(|x| x.into_iter().map(|v| v as f64 * 0.1).collect()),
            Just(k),
        )
    })
}

fn store_of(rows: &[(Vec<f64>, ClassId)], delta: &[f64], k: usize) -> GroupStore {
    let schema = Schema::new(
        "random",
        (0..delta.len()).map(|j| Feature::numeric(format!("x{j}"))).collect(),
        (1..=k).map(|c| format!("c{c}")).collect(),
    )
    .unwrap();
    let samples = rows.iter().map(|(x, l)| Sample::new(x.clone(), *l)).collect();
    let data = Dataset::new(schema, samples).unwrap();
    GroupStore::build(&data, DeltaVector::new(delta.to_vec()).unwrap()).unwrap()
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> (String, bool) {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        ..Config::default()
    });
    match runner.run(&strategy, test) {
        Ok(()) => (format!("{name} ok"), true),
        Err(e) => (format!("{name} FAILED {e}"), false),
    }
}

#[test]
fn sing_invariant_suite() {
    let results = vec![
        run_property(
            "pulse edges",
            (-1e3f64..1e3, 1e-3f64..1e2),
            |(c, d)| {
                prop_assert_eq!(pulse_psi(c - d, c, d), 1);
                prop_assert_eq!(pulse_psi(c + d, c, d), 0);
                prop_assert_eq!(pulse_psi(c, c, d), 1);
                prop_assert_eq!(pulse_psi(c + 2.0 * d, c, d), 0);
                Ok(())
            },
        ),
        run_property(
            "monotone in delta",
            (instance(), 0usize..4, 1i32..20),
            |((rows, delta, x, k), j, grow)| {
                let j = j % delta.len();
                let mut wider = delta.clone();
                wider[j] += grow as f64 * 0.05;
                let a = store_of(&rows, &delta, k).predict(&x);
                let b = store_of(&rows, &wider, k).predict(&x);
                for (s, l) in a.counts.iter().zip(&b.counts) {
                    prop_assert!(s <= l);
                }
                Ok(())
            },
        ),
        run_property(
            "permutation invariant",
            (instance(), any::<u64>()),
            |((rows, delta, x, k), seed)| {
                let mut shuffled = rows.clone();
                shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                prop_assert_eq!(store_of(&rows, &delta, k).predict(&x), store_of(&shuffled, &delta, k).predict(&x));
                Ok(())
            },
        ),
        run_property("tie-break", instance(), |(rows, delta, x, k)| {
            let store = store_of(&rows, &delta, k);
            let p = store.predict(&x);
            prop_assert_eq!(&p, &store.predict(&x));
            let max = *p.counts.iter().max().unwrap();
            let expected = if max == 0 {
                UNKNOWN
            } else {
                p.counts.iter().position(|&c| c == max).unwrap() as ClassId + 1
            };
            prop_assert_eq!(p.label, expected);
            Ok(())
        }),
        run_property(
            "relearning growth",
            (instance(), prop::collection::vec(prop::collection::vec(-40i32..40, 4), 1..25)),
            |((rows, delta, _x, k), probes)| {
                let mut store = store_of(&rows, &delta, k);
                let m = delta.len();
                let samples: Vec<Sample> = probes
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Sample::new(p[..m].iter().map(|&v| v as f64 * 0.1).collect(), 1 + (i % k) as ClassId))
                    .collect();
                let test = Dataset::new(store.schema().clone(), samples).unwrap();
                let before = store.len();
                let e = store.evaluate(&test, true).unwrap();
                prop_assert_eq!(store.len() - before, e.unknown_count());
                Ok(())
            },
        ),
    ];
    let pass = results.iter().all(|r| r.1);
    let detail: Vec<&str> = results.iter().map(|r| r.0.as_str()).collect();
    verdict(
        "SiNG invariant suite",
        pass,
        &format!("1000 cases each: {}", detail.join("; ")),
    );
    assert!(pass);
}

//! Benchmark presets and the end-to-end runs shared by the command line and
//! the acceptance tests.

use std::path::Path;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::dataset::{self, Dataset, DatasetError, SplitSpec};
use crate::grouping::{self, DeltaVector, SingError, SingFit, SingTrainConfig};
use crate::mlp::{self, MlpError, MlpSpec, NnFit};
use crate::most::MostConfig;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sing(#[from] SingError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

pub type Result<T, E = ProtocolError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Iris,
    Car,
    Abalone,
}

/// Published accuracies for one benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub sing_teaching: f64,
    pub sing_test: f64,
    /// Second published test figure where the text and table disagree.
    pub sing_test_alt: Option<f64>,
    pub baseline: &'static str,
    pub baseline_teaching: Option<f64>,
    pub baseline_test: f64,
    /// Published per-feature deltas.
    pub delta: &'static [f64],
}

/// Pass marks for the reproduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub sing_test: f64,
    pub sing_teaching: Option<f64>,
    pub nn_test: Option<f64>,
    pub seconds_per_seed: u64,
}

pub const REPRODUCE_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Iris, Benchmark::Car, Benchmark::Abalone];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Iris => "iris",
            Benchmark::Car => "car",
            Benchmark::Abalone => "abalone",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Benchmark::Iris => "iris.data",
            Benchmark::Car => "car.data",
            Benchmark::Abalone => "abalone.data",
        }
    }

    pub fn load(self, path: impl AsRef<Path>) -> Result<Dataset> {
        Ok(match self {
            Benchmark::Iris => dataset::load_iris(path)?,
            Benchmark::Car => dataset::load_car(path)?,
            Benchmark::Abalone => dataset::load_abalone(path, true)?,
        })
    }

    /// Held-out sample count: ten per iris class, fixed totals otherwise.
    /// Training takes every remaining sample.
    pub fn split_spec(self, seed: u64) -> SplitSpec {
        match self {
            Benchmark::Iris => SplitSpec::per_class(seed, 10),
            Benchmark::Car => SplitSpec::total(seed, 729),
            Benchmark::Abalone => SplitSpec::total(seed, 2117),
        }
    }

    /// Upper end of each delta search interval.
    pub fn delta_max(self) -> f64 {
        match self {
            Benchmark::Iris => 1.0,
            Benchmark::Car => 5.0,
            Benchmark::Abalone => 1.5,
        }
    }

    /// Comparison network, where one is run.
    pub fn nn_spec(self) -> Option<MlpSpec> {
        let sizes = match self {
            Benchmark::Iris => vec![4, 3, 3],
            Benchmark::Car => vec![6, 10, 8, 4],
            Benchmark::Abalone => return None,
        };
        Some(MlpSpec::new(sizes, 2.0).expect("static spec"))
    }

    pub fn nn_mc_samples(self) -> usize {
        match self {
            Benchmark::Iris => 200,
            _ => 50,
        }
    }

    pub fn reference(self) -> Reference {
        match self {
            Benchmark::Iris => Reference {
                sing_teaching: 1.0,
                sing_test: 1.0,
                sing_test_alt: None,
                baseline: "nn-most",
                baseline_teaching: Some(0.99),
                baseline_test: 0.93,
                delta: &[0.75, 0.75, 0.75, 0.5],
            },
            Benchmark::Car => Reference {
                sing_teaching: 1.0,
                sing_test: 0.94,
                sing_test_alt: None,
                baseline: "nn-most",
                baseline_teaching: Some(0.84),
                baseline_test: 0.81,
                delta: &[2.55, 0.1, 2.55, 0.1, 0.1, 0.1],
            },
            Benchmark::Abalone => Reference {
                sing_teaching: 1.0,
                sing_test: 0.86,
                sing_test_alt: Some(0.85),
                baseline: "external-ffnn",
                baseline_teaching: None,
                baseline_test: 0.79,
                delta: &[1.125, 0.25, 0.25, 0.1, 0.375, 0.375, 0.375, 0.375],
            },
        }
    }

    pub fn thresholds(self) -> Thresholds {
        match self {
            Benchmark::Iris => Thresholds {
                sing_test: 0.93,
                sing_teaching: Some(0.99),
                nn_test: Some(0.85),
                seconds_per_seed: 30,
            },
            Benchmark::Car => Thresholds {
                sing_test: 0.90,
                sing_teaching: Some(0.98),
                nn_test: Some(0.75),
                seconds_per_seed: 300,
            },
            Benchmark::Abalone => Thresholds {
                sing_test: 0.80,
                sing_teaching: None,
                nn_test: None,
                seconds_per_seed: 600,
            },
        }
    }
}

/// Knobs of one SiNG run.
#[derive(Debug, Clone, PartialEq)]
pub struct SingSettings {
    pub seed: u64,
    pub delta_max: f64,
    pub most: MostConfig,
    /// Relearn unknown test samples during the final evaluation.
    pub relearn: bool,
    pub relearn_during_fit: bool,
    pub leak_test_from_full: bool,
}

impl SingSettings {
    pub fn for_benchmark(bench: Benchmark, seed: u64) -> Self {
        Self {
            seed,
            delta_max: bench.delta_max(),
            most: MostConfig {
                seed,
                ..MostConfig::default()
            },
            relearn: true,
            relearn_during_fit: false,
            leak_test_from_full: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingRun {
    pub seed: u64,
    pub fit: SingFit,
    pub train_len: usize,
    pub test_len: usize,
    /// Headline test accuracy, under the configured relearning mode.
    pub test_accuracy: f64,
    pub test_accuracy_relearn: f64,
    pub test_accuracy_static: f64,
    pub relearned_groups: usize,
    pub elapsed: Duration,
}

impl SingRun {
    pub fn delta(&self) -> &DeltaVector {
        &self.fit.delta
    }
}

pub fn split(data: &Dataset, bench: Benchmark, seed: u64, leak: bool) -> Result<(Dataset, Dataset)> {
    let mut spec = bench.split_spec(seed);
    spec.leak_test_from_full = leak;
    Ok(dataset::split(data, &spec)?)
}

/// Split, fit delta, then score the held-out samples with and without
/// relearning.
pub fn run_sing(data: &Dataset, bench: Benchmark, settings: &SingSettings) -> Result<SingRun> {
    let start = Instant::now();
    let (train, test) = split(data, bench, settings.seed, settings.leak_test_from_full)?;
    let config = SingTrainConfig {
        delta_max: vec![settings.delta_max; data.schema().feature_count()],
        most: settings.most.clone(),
        relearn_during_fit: settings.relearn_during_fit,
        seed: settings.seed,
    };
    let fit = grouping::train_sing(&train, &config)?;
    let with_relearn = fit.store.clone().evaluate(&test, true)?;
    let without = fit.store.clone().evaluate(&test, false)?;
    let test_accuracy = if settings.relearn {
        with_relearn.accuracy
    } else {
        without.accuracy
    };
    Ok(SingRun {
        seed: settings.seed,
        train_len: train.len(),
        test_len: test.len(),
        test_accuracy,
        test_accuracy_relearn: with_relearn.accuracy,
        test_accuracy_static: without.accuracy,
        relearned_groups: with_relearn.relearned,
        fit,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct NnRun {
    pub seed: u64,
    pub spec: MlpSpec,
    pub fit: NnFit,
    pub test_accuracy: f64,
    pub elapsed: Duration,
}

/// Fits the benchmark's comparison network on the same split as
/// [`run_sing`]. `None` when the benchmark has no network.
pub fn run_nn(data: &Dataset, bench: Benchmark, most: &MostConfig, leak: bool) -> Result<Option<NnRun>> {
    let Some(spec) = bench.nn_spec() else {
        return Ok(None);
    };
    let start = Instant::now();
    let (train, test) = split(data, bench, most.seed, leak)?;
    let fit = mlp::train_nn(&train, Some(&test), &spec, most)?;
    Ok(Some(NnRun {
        seed: most.seed,
        test_accuracy: fit.test_accuracy.unwrap_or_default(),
        spec,
        fit,
        elapsed: start.elapsed(),
    }))
}

/// Median of a non-empty list; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Number of coordinates within `tolerance` of the published deltas.
pub fn delta_agreement(delta: &[f64], reference: &[f64], tolerance: f64) -> usize {
    delta
        .iter()
        .zip(reference)
        .filter(|(a, b)| (*a - *b).abs() <= tolerance)
        .count()
}

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use sing::dataset::Dataset;
use sing::grouping::{GroupStore, SingError};
use sing::most::{self, suite, MostConfig, MostError};
use sing::protocol::{self, Benchmark, NnRun, ProtocolError, SingRun, SingSettings};

use crate::table::Table;
use crate::{DataArgs, DemoArgs, EvalArgs, FitArgs, OptimizerArgs, ReproduceArgs, SingArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sing(#[from] SingError),
    #[error(transparent)]
    Most(#[from] MostError),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    BelowThreshold,
}

fn acc(v: f64) -> String {
    format!("{v:.4}")
}

fn joined(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.6}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn load(args: &DataArgs) -> Result<(Benchmark, Dataset)> {
    let bench = args.dataset.benchmark();
    Ok((bench, bench.load(args.path())?))
}

fn most_config(args: &OptimizerArgs, seed: u64, mc_default: usize) -> Result<MostConfig> {
    let config = MostConfig {
        initial_divisions: args.divisions,
        mc_samples: args.mc_samples.unwrap_or(mc_default),
        tolerance: args.tolerance,
        max_sweeps: args.max_sweeps,
        seed,
        use_initial_scan: !args.no_initial_scan,
    };
    config.validate()?;
    Ok(config)
}

fn sing_settings(
    bench: Benchmark,
    seed: u64,
    data: &DataArgs,
    optimizer: &OptimizerArgs,
    sing_args: &SingArgs,
) -> Result<SingSettings> {
    let mut settings = SingSettings::for_benchmark(bench, seed);
    settings.most = most_config(optimizer, seed, settings.most.mc_samples)?;
    if let Some(d) = sing_args.delta_max {
        if !(d.is_finite() && d > 0.0) {
            return Err(CliError::Invalid(format!("--delta-max must be positive, got {d}")));
        }
        settings.delta_max = d;
    }
    settings.relearn = !sing_args.no_relearn;
    settings.relearn_during_fit = sing_args.relearn_during_fit;
    settings.leak_test_from_full = data.leak_test_from_full;
    Ok(settings)
}

fn config_line(s: &SingSettings) -> String {
    format!(
        "config: delta_max={} mc_samples={} divisions={} tolerance={:e} max_sweeps={} initial_scan={} relearn={} relearn_during_fit={} leak_test_from_full={}",
        s.delta_max,
        s.most.mc_samples,
        s.most.initial_divisions,
        s.most.tolerance,
        s.most.max_sweeps,
        s.most.use_initial_scan,
        s.relearn,
        s.relearn_during_fit,
        s.leak_test_from_full
    )
}

const RESULT_COLUMNS: [&str; 7] = [
    "method",
    "seed",
    "teaching_accuracy",
    "test_accuracy",
    "test_accuracy_no_relearn",
    "relearned_groups",
    "parameters",
];

fn sing_row(method: &str, run: &SingRun) -> Vec<String> {
    vec![
        method.into(),
        run.seed.to_string(),
        acc(run.fit.teaching_accuracy),
        acc(run.test_accuracy),
        acc(run.test_accuracy_static),
        run.relearned_groups.to_string(),
        format!("delta={}", joined(run.delta().as_slice())),
    ]
}

fn nn_row(run: &NnRun) -> Vec<String> {
    vec![
        "nn-most".into(),
        run.seed.to_string(),
        acc(run.fit.train_accuracy),
        acc(run.test_accuracy),
        "-".into(),
        "-".into(),
        format!("weights={}", run.spec.weight_count()),
    ]
}

fn timing_table() -> Table {
    Table::new(&["method", "seed", "seconds"])
}

fn timing_row(method: &str, seed: u64, elapsed: std::time::Duration) -> Vec<String> {
    vec![method.into(), seed.to_string(), format!("{:.3}", elapsed.as_secs_f64())]
}

pub fn fit(args: &FitArgs) -> Result<Status> {
    let (bench, data) = load(&args.data)?;
    let settings = sing_settings(bench, args.seed, &args.data, &args.optimizer, &args.sing)?;
    let preamble = vec![
        format!("sing {VERSION}"),
        format!(
            "command: fit dataset={} data={} seed={}",
            bench.name(),
            args.data.path().display(),
            args.seed
        ),
        config_line(&settings),
    ];
    let run = protocol::run_sing(&data, bench, &settings)?;
    let stem = format!("{}-seed{}", bench.name(), args.seed);
    let out = &args.output_dir;
    write(out, &format!("{stem}.model"), &run.fit.store.dump())?;
    write(out, &format!("{stem}-fold-I.csv"), &run.fit.report_i.trace_csv())?;
    write(out, &format!("{stem}-fold-II.csv"), &run.fit.report_ii.trace_csv())?;

    let mut results = Table::new(&RESULT_COLUMNS);
    let mut timings = timing_table();
    results.push(sing_row("sing", &run));
    timings.push(timing_row("sing", args.seed, run.elapsed));

    if args.nn {
        let mc = args.optimizer.mc_samples.unwrap_or(bench.nn_mc_samples());
        let mut most = most_config(&args.optimizer, args.seed, mc)?;
        most.mc_samples = mc;
        match protocol::run_nn(&data, bench, &most, settings.leak_test_from_full)? {
            Some(nn) => {
                write(out, &format!("{stem}-nn-weights.csv"), &nn.fit.weights.dump(&nn.spec))?;
                write(out, &format!("{stem}-nn-trace.csv"), &nn.fit.report.trace_csv())?;
                results.push(nn_row(&nn));
                timings.push(timing_row("nn-most", args.seed, nn.elapsed));
            }
            None => log::warn!("no comparison network defined for {}", bench.name()),
        }
    }
    write(out, &format!("{stem}-results.csv"), &results.to_csv(&preamble))?;
    write(out, &format!("{stem}-results.txt"), &results.to_text(&preamble))?;
    write(out, &format!("{stem}-timings.csv"), &timings.to_csv(&preamble))?;
    print!("{}", results.to_text(&preamble));
    Ok(Status::Pass)
}

pub fn eval(args: &EvalArgs) -> Result<Status> {
    let (bench, data) = load(&args.data)?;
    let text = fs::read_to_string(&args.model).map_err(|source| CliError::Read {
        path: args.model.clone(),
        source,
    })?;
    let mut store = GroupStore::parse(&text)?;
    if store.schema() != data.schema() {
        return Err(CliError::Invalid(format!(
            "model {} was not built for {}",
            args.model.display(),
            bench.name()
        )));
    }
    let target = if args.all {
        data
    } else {
        protocol::split(&data, bench, args.seed, args.data.leak_test_from_full)?.1
    };
    let relearn = !args.no_relearn;
    let evaluation = store.evaluate(&target, relearn)?;

    let k = target.schema().class_count();
    let mut header = vec!["index".to_string(), "truth".into(), "predicted".into()];
    header.extend((1..=k).map(|c| format!("p{c}")));
    let mut predictions = Table {
        header,
        rows: Vec::new(),
    };
    for (i, (s, p)) in target.samples().iter().zip(&evaluation.predictions).enumerate() {
        let mut row = vec![i.to_string(), s.label.to_string(), p.label.to_string()];
        row.extend(p.counts.iter().map(|c| c.to_string()));
        predictions.push(row);
    }
    let preamble = vec![
        format!("sing {VERSION}"),
        format!(
            "command: eval dataset={} data={} model={} seed={} all={} relearn={relearn}",
            bench.name(),
            args.data.path().display(),
            args.model.display(),
            args.seed,
            args.all
        ),
        format!(
            "accuracy={} error={} relearned_groups={}",
            acc(evaluation.accuracy),
            evaluation.error,
            evaluation.relearned
        ),
    ];
    let stem = format!("{}-seed{}-eval", bench.name(), args.seed);
    write(&args.output_dir, &format!("{stem}.csv"), &predictions.to_csv(&preamble))?;
    println!(
        "accuracy {} on {} samples ({} relearned)",
        acc(evaluation.accuracy),
        target.len(),
        evaluation.relearned
    );
    Ok(Status::Pass)
}

pub fn reproduce(args: &ReproduceArgs) -> Result<Status> {
    if args.seeds.is_empty() {
        return Err(CliError::Invalid("--seeds is empty".into()));
    }
    let (bench, data) = load(&args.data)?;
    let base = sing_settings(bench, args.seeds[0], &args.data, &args.optimizer, &args.sing)?;
    let nn_mc = args.nn_mc_samples.unwrap_or(bench.nn_mc_samples());
    let seeds: Vec<String> = args.seeds.iter().map(u64::to_string).collect();
    let mut preamble = vec![
        format!("sing {VERSION}"),
        format!(
            "command: reproduce dataset={} data={} seeds={}",
            bench.name(),
            args.data.path().display(),
            seeds.join(";")
        ),
        config_line(&base),
    ];
    let run_nn = !args.skip_nn && bench.nn_spec().is_some();
    if run_nn {
        preamble.push(format!("nn: mc_samples={nn_mc}"));
    }

    let mut results = Table::new(&RESULT_COLUMNS);
    let mut timings = timing_table();
    let (mut teach, mut test, mut nn_test) = (Vec::new(), Vec::new(), Vec::new());
    for &seed in &args.seeds {
        let settings = sing_settings(bench, seed, &args.data, &args.optimizer, &args.sing)?;
        let run = protocol::run_sing(&data, bench, &settings)?;
        log::info!("seed {seed}: test accuracy {:.4}", run.test_accuracy);
        teach.push(run.fit.teaching_accuracy);
        test.push(run.test_accuracy);
        results.push(sing_row("sing", &run));
        timings.push(timing_row("sing", seed, run.elapsed));
        if run_nn {
            let mut most = most_config(&args.optimizer, seed, nn_mc)?;
            most.mc_samples = nn_mc;
            if let Some(nn) = protocol::run_nn(&data, bench, &most, settings.leak_test_from_full)? {
                nn_test.push(nn.test_accuracy);
                results.push(nn_row(&nn));
                timings.push(timing_row("nn-most", seed, nn.elapsed));
            }
        }
    }

    let dash = || "-".to_string();
    results.push(vec![
        "sing-median".into(),
        dash(),
        acc(protocol::median(&teach)),
        acc(protocol::median(&test)),
        dash(),
        dash(),
        dash(),
    ]);
    if !nn_test.is_empty() {
        results.push(vec![
            "nn-most-median".into(),
            dash(),
            dash(),
            acc(protocol::median(&nn_test)),
            dash(),
            dash(),
            dash(),
        ]);
    }
    let reference = bench.reference();
    results.push(vec![
        "published-sing".into(),
        dash(),
        acc(reference.sing_teaching),
        acc(reference.sing_test),
        dash(),
        dash(),
        match reference.sing_test_alt {
            Some(alt) => format!("delta={};text_test={}", joined(reference.delta), acc(alt)),
            None => format!("delta={}", joined(reference.delta)),
        },
    ]);
    results.push(vec![
        format!("published-{}", reference.baseline),
        dash(),
        reference.baseline_teaching.map(acc).unwrap_or_else(dash),
        acc(reference.baseline_test),
        dash(),
        dash(),
        dash(),
    ]);

    let thresholds = bench.thresholds();
    let mut checks = Table::new(&["check", "value", "threshold", "status"]);
    let mut check = |name: &str, value: f64, threshold: f64| {
        let pass = value >= threshold;
        checks.push(vec![
            name.into(),
            acc(value),
            acc(threshold),
            if pass { "pass" } else { "fail" }.into(),
        ]);
        pass
    };
    let mut all_pass = check("sing median test accuracy", protocol::median(&test), thresholds.sing_test);
    if let Some(t) = thresholds.sing_teaching {
        all_pass &= check("sing median teaching accuracy", protocol::median(&teach), t);
    }
    if bench == Benchmark::Abalone {
        all_pass &= check(
            "sing median test accuracy above external baseline",
            protocol::median(&test),
            reference.baseline_test + 1e-9,
        );
    }
    if let (Some(t), false) = (thresholds.nn_test, nn_test.is_empty()) {
        all_pass &= check("nn median test accuracy", protocol::median(&nn_test), t);
    }

    let stem = format!("{}-reproduce", bench.name());
    let out = &args.output_dir;
    write(out, &format!("{stem}.csv"), &results.to_csv(&preamble))?;
    write(out, &format!("{stem}.txt"), &results.to_text(&preamble))?;
    write(out, &format!("{stem}-checks.csv"), &checks.to_csv(&preamble))?;
    write(out, &format!("{stem}-timings.csv"), &timings.to_csv(&preamble))?;
    print!("{}", results.to_text(&preamble));
    print!("{}", checks.to_text(&[]));
    Ok(if all_pass { Status::Pass } else { Status::BelowThreshold })
}

pub fn most_demo(args: &DemoArgs) -> Result<Status> {
    let preamble = vec![
        format!("sing {VERSION}"),
        format!(
            "command: most-demo seed={} mc_samples={} divisions={} tolerance={:e} max_sweeps={} initial_scan={}",
            args.seed,
            args.optimizer
                .mc_samples
                .map_or("per-function".to_string(), |m| m.to_string()),
            args.optimizer.divisions,
            args.optimizer.tolerance,
            args.optimizer.max_sweeps,
            !args.optimizer.no_initial_scan
        ),
    ];
    let mut summary = Table::new(&[
        "function",
        "dim",
        "best_point",
        "best_value",
        "oracle_value",
        "value_range",
        "within_bound",
        "max_relative_width",
        "converged",
    ]);
    let mut all_pass = true;
    for tf in suite::all() {
        let config = most_config(&args.optimizer, args.seed, tf.mc_samples)?;
        let domain = tf.domain();
        let report = most::optimize(&tf.f, &domain, &config)?;
        let oracle = most::grid_oracle(&tf.f, &domain, tf.oracle_points)?;
        let range = oracle.value_range.1 - oracle.value_range.0;
        let value = (tf.f)(&report.best_point);
        let within = value <= oracle.best_value + 1e-3 * range;
        all_pass &= within;
        let max_rel = (0..domain.dim())
            .map(|j| report.final_widths[j] / domain.width(j))
            .fold(0.0, f64::max);
        write(&args.output_dir, &format!("most-{}.csv", tf.name), &report.trace_csv())?;
        summary.push(vec![
            tf.name.into(),
            tf.dim().to_string(),
            joined(&report.best_point),
            format!("{value:.6e}"),
            format!("{:.6e}", oracle.best_value),
            format!("{range:.6e}"),
            within.to_string(),
            format!("{max_rel:.3e}"),
            report.converged.to_string(),
        ]);
    }
    write(&args.output_dir, "most-demo.csv", &summary.to_csv(&preamble))?;
    write(&args.output_dir, "most-demo.txt", &summary.to_text(&preamble))?;
    print!("{}", summary.to_text(&preamble));
    Ok(if all_pass { Status::Pass } else { Status::BelowThreshold })
}

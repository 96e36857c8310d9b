//! Hyperbox groups: one box per training sample, prediction by counting
//! the boxes of each class that contain a point.
//!
//! A group covers `x` when every coordinate satisfies
//! `center_j - delta_j <= x_j < center_j + delta_j`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dataset::{self, ClassId, Dataset, DatasetError, Schema};
use crate::most::{self, MostConfig, MostError, Objective, OptimizeReport, SearchDomain};

/// Label reported when no group covers a point.
pub const UNKNOWN: ClassId = 0;

#[derive(Debug, Error)]
pub enum SingError {
    #[error("no training samples")]
    Empty,
    #[error("expected {expected} features, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid delta: {0}")]
    InvalidDelta(String),
    #[error("label {label} outside 1..={classes}")]
    Label { label: ClassId, classes: usize },
    #[error("invalid training setup: {0}")]
    Config(String),
    #[error("model line {line}: {message}")]
    Model { line: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Most(#[from] MostError),
}

pub type Result<T, E = SingError> = std::result::Result<T, E>;

/// Step function with `U(0) = 1`.
pub fn unit_step(x: f64) -> u32 {
    u32::from(x >= 0.0)
}

/// Pulse of width `2 * delta` around `center`, written as the difference
/// of two shifted steps.
pub fn pulse_psi(x: f64, center: f64, delta: f64) -> u32 {
    unit_step(x - (center - delta)) - unit_step(x - (center + delta))
}

/// Interval test equivalent to [`pulse_psi`]; `x - y >= 0` iff `x >= y` for
/// finite floats.
#[inline]
fn covers(x: f64, center: f64, delta: f64) -> bool {
    center - delta <= x && x < center + delta
}

/// Per-feature half-widths shared by all groups. Components are finite and
/// strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVector(Vec<f64>);

impl DeltaVector {
    pub fn new(delta: Vec<f64>) -> Result<Self> {
        if delta.is_empty() {
            return Err(SingError::InvalidDelta("empty".into()));
        }
        if let Some(d) = delta.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(SingError::InvalidDelta(format!("component {d} is not positive")));
        }
        Ok(Self(delta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Initial,
    Relearned,
}

impl Origin {
    fn as_str(self) -> &'static str {
        match self {
            Origin::Initial => "initial",
            Origin::Relearned => "relearned",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub center: Vec<f64>,
    pub label: ClassId,
    pub origin: Origin,
}

/// `group.label` where the box covers `x`, zero elsewhere.
pub fn phi(x: &[f64], group: &Group, delta: &DeltaVector) -> ClassId {
    let inside: u32 = x
        .iter()
        .zip(&group.center)
        .zip(delta.as_slice())
        .map(|((&v, &c), &d)| pulse_psi(v, c, d))
        .product();
    group.label * inside
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    /// [`UNKNOWN`] iff every count is zero.
    pub label: ClassId,
    /// `counts[k - 1]` covering groups of class `k`.
    pub counts: Vec<u32>,
    pub matched_groups: u32,
}

impl Prediction {
    /// Largest count wins; ties go to the smallest class.
    pub fn from_counts(counts: Vec<u32>) -> Self {
        let mut label = UNKNOWN;
        let mut best = 0;
        for (k, &c) in counts.iter().enumerate() {
            if c > best {
                best = c;
                label = k as ClassId + 1;
            }
        }
        let matched_groups = counts.iter().sum();
        Self {
            label,
            counts,
            matched_groups,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Half the sum of squared label differences, unknown counted as 0.
    pub error: f64,
    pub predictions: Vec<Prediction>,
    /// Groups appended by relearning during this pass.
    pub relearned: usize,
}

impl Evaluation {
    pub fn unknown_count(&self) -> usize {
        self.predictions.iter().filter(|p| p.label == UNKNOWN).count()
    }
}

pub fn squared_label_error(truth: ClassId, predicted: ClassId) -> f64 {
    let d = truth as f64 - predicted as f64;
    0.5 * d * d
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStore {
    groups: Vec<Group>,
    delta: DeltaVector,
    schema: Schema,
}

fn check_dim(schema: &Schema, found: usize) -> Result<()> {
    let expected = schema.feature_count();
    if expected != found {
        return Err(SingError::Dimension { expected, found });
    }
    Ok(())
}

impl GroupStore {
    /// One group per training sample, in sample order.
    pub fn build(train: &Dataset, delta: DeltaVector) -> Result<Self> {
        if train.is_empty() {
            return Err(SingError::Empty);
        }
        check_dim(train.schema(), delta.len())?;
        let groups = train
            .samples()
            .iter()
            .map(|s| Group {
                center: s.features.clone(),
                label: s.label,
                origin: Origin::Initial,
            })
            .collect();
        Ok(Self {
            groups,
            delta,
            schema: train.schema().clone(),
        })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn delta(&self) -> &DeltaVector {
        &self.delta
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups whose center and label repeat an earlier group.
    pub fn duplicate_groups(&self) -> usize {
        let mut keys: Vec<(ClassId, Vec<u64>)> = self
            .groups
            .iter()
            .map(|g| (g.label, g.center.iter().map(|v| v.to_bits()).collect()))
            .collect();
        keys.sort_unstable();
        keys.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// `x` must have one value per feature.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        debug_assert_eq!(x.len(), self.schema.feature_count());
        let delta = self.delta.as_slice();
        let mut counts = vec![0u32; self.schema.class_count()];
        for g in &self.groups {
            let inside = x
                .iter()
                .zip(&g.center)
                .zip(delta)
                .all(|((&v, &c), &d)| covers(v, c, d));
            if inside {
                counts[g.label as usize - 1] += 1;
            }
        }
        Prediction::from_counts(counts)
    }

    /// Appends `x` as a relearned group.
    pub fn relearn(&mut self, x: &[f64], label: ClassId) -> Result<()> {
        check_dim(&self.schema, x.len())?;
        if label == UNKNOWN || label as usize > self.schema.class_count() {
            return Err(SingError::Label {
                label,
                classes: self.schema.class_count(),
            });
        }
        self.groups.push(Group {
            center: x.to_vec(),
            label,
            origin: Origin::Relearned,
        });
        Ok(())
    }

    /// Scores `data` in order. With `relearn`, each sample predicted as
    /// unknown is appended after it is scored.
    pub fn evaluate(&mut self, data: &Dataset, relearn: bool) -> Result<Evaluation> {
        check_dim(&self.schema, data.schema().feature_count())?;
        let mut predictions = Vec::with_capacity(data.len());
        let mut error = 0.0;
        let mut correct = 0usize;
        let mut relearned = 0;
        for s in data.samples() {
            let p = self.predict(&s.features);
            error += squared_label_error(s.label, p.label);
            correct += usize::from(p.label == s.label);
            if relearn && p.label == UNKNOWN {
                self.relearn(&s.features, s.label)?;
                relearned += 1;
            }
            predictions.push(p);
        }
        Ok(Evaluation {
            accuracy: if data.is_empty() { 0.0 } else { correct as f64 / data.len() as f64 },
            error,
            predictions,
            relearned,
        })
    }

    /// Text dump: schema header, delta, then `label,origin,c_1,...,c_M`
    /// per group. Floats use shortest round-trip formatting.
    pub fn dump(&self) -> String {
        let mut out = self.schema.to_header();
        out.push('\n');
        out.push_str(&join(self.delta.as_slice()));
        out.push('\n');
        for g in &self.groups {
            let _ = writeln!(out, "{},{},{}", g.label, g.origin.as_str(), join(&g.center));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, message: String| SingError::Model { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty model".into()))?;
        let schema = Schema::from_header(header)?;
        let (_, delta_line) = lines.next().ok_or_else(|| bad(2, "missing delta".into()))?;
        let delta = DeltaVector::new(parse_floats(delta_line).map_err(|m| bad(2, m))?)?;
        check_dim(&schema, delta.len())?;
        let mut store = Self {
            groups: Vec::new(),
            delta,
            schema,
        };
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, ',');
            let (label, origin, rest) = match (fields.next(), fields.next(), fields.next()) {
                (Some(l), Some(o), Some(r)) => (l, o, r),
                _ => return Err(bad(i + 1, "expected label,origin,center".into())),
            };
            let label: ClassId = label
                .parse()
                .map_err(|_| bad(i + 1, format!("bad label `{label}`")))?;
            let origin = match origin {
                "initial" => Origin::Initial,
                "relearned" => Origin::Relearned,
                other => return Err(bad(i + 1, format!("bad origin `{other}`"))),
            };
            let center = parse_floats(rest).map_err(|m| bad(i + 1, m))?;
            check_dim(&store.schema, center.len())?;
            if label == UNKNOWN || label as usize > store.schema.class_count() {
                return Err(bad(i + 1, format!("label {label} out of range")));
            }
            store.groups.push(Group {
                center,
                label,
                origin,
            });
        }
        Ok(store)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_floats(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad number `{t}`"))
        })
        .collect()
}

/// Read-only index over fixed group centers, answering vote counts for any
/// delta. Centers are sorted per feature, so the groups covering `x_j` form
/// one contiguous run in that feature's order; the shortest run is scanned
/// and the other features are checked directly. Counts equal those of
/// [`GroupStore::predict`] exactly.
#[derive(Debug, Clone)]
pub struct CoverIndex {
    centers: Vec<Vec<f64>>,
    labels: Vec<ClassId>,
    /// Per feature: `(center_j, group)` sorted by center.
    sorted: Vec<Vec<(f64, usize)>>,
    classes: usize,
}

impl CoverIndex {
    pub fn new(data: &Dataset) -> Self {
        let m = data.schema().feature_count();
        let centers: Vec<Vec<f64>> = data.samples().iter().map(|s| s.features.clone()).collect();
        let labels = data.samples().iter().map(|s| s.label).collect();
        let sorted = (0..m)
            .map(|j| {
                let mut col: Vec<(f64, usize)> =
                    centers.iter().enumerate().map(|(i, c)| (c[j], i)).collect();
                col.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                col
            })
            .collect();
        Self {
            centers,
            labels,
            sorted,
            classes: data.schema().class_count(),
        }
    }

    /// Fills `counts[k - 1]` with the covering groups of class `k`.
    pub fn counts_into(&self, x: &[f64], delta: &[f64], counts: &mut [u32]) {
        counts.fill(0);
        let mut best = (0, 0, usize::MAX);
        for (j, col) in self.sorted.iter().enumerate() {
            let (v, d) = (x[j], delta[j]);
            // c - d and c + d are monotone in c, so both predicates split
            // the sorted column.
            let lo = col.partition_point(|&(c, _)| c + d <= v);
            let hi = col.partition_point(|&(c, _)| c - d <= v);
            let len = hi.saturating_sub(lo);
            if len < best.2 {
                best = (j, lo, len);
                if len == 0 {
                    return;
                }
            }
        }
        let (j0, lo, len) = best;
        for &(_, g) in &self.sorted[j0][lo..lo + len] {
            let c = &self.centers[g];
            let inside = (0..x.len())
                .filter(|&j| j != j0)
                .all(|j| covers(x[j], c[j], delta[j]));
            if inside {
                counts[self.labels[g] as usize - 1] += 1;
            }
        }
    }

    pub fn predict(&self, x: &[f64], delta: &[f64]) -> Prediction {
        let mut counts = vec![0; self.classes];
        self.counts_into(x, delta, &mut counts);
        Prediction::from_counts(counts)
    }
}

/// Fold error as a function of delta: groups from one fold, scored on the
/// other.
pub struct FoldObjective<'a> {
    groups: &'a Dataset,
    eval: &'a Dataset,
    index: CoverIndex,
    relearn: bool,
}

impl<'a> FoldObjective<'a> {
    pub fn new(groups: &'a Dataset, eval: &'a Dataset, relearn: bool) -> Self {
        Self {
            groups,
            eval,
            index: CoverIndex::new(groups),
            relearn,
        }
    }

    pub fn error(&self, delta: &[f64]) -> f64 {
        if self.relearn {
            let delta = DeltaVector::new(delta.to_vec()).expect("optimizer keeps delta positive");
            let mut store = GroupStore::build(self.groups, delta).expect("fold checked");
            return store.evaluate(self.eval, true).expect("fold checked").error;
        }
        let mut counts = vec![0; self.index.classes];
        let mut error = 0.0;
        for s in self.eval.samples() {
            self.index.counts_into(&s.features, delta, &mut counts);
            let label = Prediction::from_counts(counts.clone()).label;
            error += squared_label_error(s.label, label);
        }
        error
    }
}

impl Objective for FoldObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.error(x)
    }
}

#[derive(Debug, Clone)]
pub struct SingTrainConfig {
    /// Upper end of each feature's search interval `[0, delta_max_j]`.
    pub delta_max: Vec<f64>,
    pub most: MostConfig,
    /// Relearn unknown fold samples while scoring a candidate delta.
    pub relearn_during_fit: bool,
    /// Seed of the fold halving.
    pub seed: u64,
}

impl SingTrainConfig {
    pub fn uniform(features: usize, delta_max: f64, most: MostConfig, seed: u64) -> Self {
        Self {
            delta_max: vec![delta_max; features],
            most,
            relearn_during_fit: false,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingFit {
    /// Element-wise maximum of the two fold optima.
    pub delta: DeltaVector,
    /// Optimum with groups from fold I, scored on fold II.
    pub delta_i: Vec<f64>,
    /// Optimum with groups from fold II, scored on fold I.
    pub delta_ii: Vec<f64>,
    pub report_i: OptimizeReport,
    pub report_ii: OptimizeReport,
    /// Accuracy of the full training set on its own groups.
    pub teaching_accuracy: f64,
    pub duplicate_groups: usize,
    /// Groups from the full training set with the final delta.
    pub store: GroupStore,
}

/// Halves `train`, fits delta in both fold directions and keeps the larger
/// value per feature.
pub fn train_sing(train: &Dataset, config: &SingTrainConfig) -> Result<SingFit> {
    let m = train.schema().feature_count();
    check_dim(train.schema(), config.delta_max.len())?;
    if train.len() < 2 {
        return Err(SingError::Config("need at least two samples".into()));
    }
    if train.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SingError::Config("need at least two classes".into()));
    }
    let domain = SearchDomain::new(vec![0.0; m], config.delta_max.clone())?;
    let (fold_i, fold_ii) = dataset::halve(train, config.seed)?;

    let forward = FoldObjective::new(&fold_i, &fold_ii, config.relearn_during_fit);
    let report_i = most::optimize(&forward, &domain, &config.most)?;
    let backward = FoldObjective::new(&fold_ii, &fold_i, config.relearn_during_fit);
    let most_ii = MostConfig {
        seed: config.most.seed.wrapping_add(1),
        ..config.most.clone()
    };
    let report_ii = most::optimize(&backward, &domain, &most_ii)?;

    let delta: Vec<f64> = report_i
        .best_point
        .iter()
        .zip(&report_ii.best_point)
        .map(|(a, b)| a.max(*b))
        .collect();
    let delta = DeltaVector::new(delta)?;
    let mut store = GroupStore::build(train, delta.clone())?;
    let teaching_accuracy = store.clone().evaluate(train, false)?.accuracy;
    let duplicate_groups = store.duplicate_groups();
    if duplicate_groups > 0 {
        log::info!("{duplicate_groups} duplicate groups in training set");
    }
    store.groups.shrink_to_fit();
    Ok(SingFit {
        delta,
        delta_i: report_i.best_point.clone(),
        delta_ii: report_ii.best_point.clone(),
        report_i,
        report_ii,
        teaching_accuracy,
        duplicate_groups,
        store,
    })
}

//! Benchmark tables: loading, categorical encodings, seeded splits.
//!
//! The loaders accept the comma-separated files as distributed by the UCI
//! repository (`iris.data`, `car.data`, `abalone.data`). Every categorical
//! column is mapped to an ordinal number recorded in the [`Schema`], so an
//! encoded value can always be decoded back to its token.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Class id. Real classes are numbered `1..=K`; `0` is reserved for "unknown".
pub type ClassId = u32;

/// Characters that may not appear in feature, class or category names
/// because the text formats use them as separators.
const RESERVED: &[char] = &[',', ';', '|', '=', ':', '\n', '\r'];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown token `{token}` in column `{column}`")]
    Encoding {
        line: usize,
        column: String,
        token: String,
    },
    #[error("no samples")]
    NoSamples,
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("sample {index}: {message}")]
    Sample { index: usize, message: String },
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// How a feature column is turned into a number.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Numeric,
    /// Ordered `(token, code)` pairs.
    Categorical(Vec<(String, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, levels: &[(&str, f64)]) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical(
                levels.iter().map(|(t, c)| (t.to_string(), *c)).collect(),
            ),
        }
    }

    /// Encodes a raw field. Numeric columns parse as `f64`; categorical
    /// columns look the token up. Returns `None` for anything unknown.
    pub fn encode(&self, token: &str) -> Option<f64> {
        match &self.kind {
            FeatureKind::Numeric => token.parse::<f64>().ok().filter(|v| v.is_finite()),
            FeatureKind::Categorical(levels) => levels
                .iter()
                .find(|(t, _)| t == token)
                .map(|(_, code)| *code),
        }
    }

    /// Inverse of [`Feature::encode`] for categorical columns.
    pub fn decode(&self, code: f64) -> Option<&str> {
        match &self.kind {
            FeatureKind::Numeric => None,
            FeatureKind::Categorical(levels) => levels
                .iter()
                .find(|(_, c)| *c == code)
                .map(|(t, _)| t.as_str()),
        }
    }
}

/// Column and class metadata shared by every sample of a [`Dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub name: String,
    pub features: Vec<Feature>,
    /// `class_names[k - 1]` names class `k`.
    pub class_names: Vec<String>,
}

fn check_name(what: &str, name: &str) -> Result<()> {
    if name.is_empty() || name.contains(RESERVED) {
        return Err(DatasetError::Schema(format!("invalid {what} name `{name}`")));
    }
    Ok(())
}

impl Schema {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Feature>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        check_name("dataset", &name)?;
        if features.is_empty() {
            return Err(DatasetError::Schema("at least one feature required".into()));
        }
        if class_names.len() < 2 {
            return Err(DatasetError::Schema("at least two classes required".into()));
        }
        for f in &features {
            check_name("feature", &f.name)?;
            if let FeatureKind::Categorical(levels) = &f.kind {
                if levels.is_empty() {
                    return Err(DatasetError::Schema(format!(
                        "categorical feature `{}` has no levels",
                        f.name
                    )));
                }
                for (i, (token, code)) in levels.iter().enumerate() {
                    check_name("category", token)?;
                    if !code.is_finite() {
                        return Err(DatasetError::Schema(format!(
                            "non-finite code for `{token}`"
                        )));
                    }
                    if levels[..i].iter().any(|(t, c)| t == token || c == code) {
                        return Err(DatasetError::Schema(format!(
                            "duplicate level `{token}` in `{}`",
                            f.name
                        )));
                    }
                }
            }
        }
        for c in &class_names {
            check_name("class", c)?;
        }
        Ok(Self {
            name,
            features,
            class_names,
        })
    }

    /// Number of features `M`.
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    /// Number of classes `K`.
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn class_name(&self, label: ClassId) -> Option<&str> {
        let k = label as usize;
        (k >= 1 && k <= self.class_names.len()).then(|| self.class_names[k - 1].as_str())
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.class_names
            .iter()
            .position(|c| c == name)
            .map(|i| i as ClassId + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: ClassId,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: ClassId) -> Self {
        Self { features, label }
    }
}

/// One-line schema encoding: `name;feature|feature:token=code:...;class|class`.
impl Schema {
    pub fn to_header(&self) -> String {
        let features: Vec<String> = self
            .features
            .iter()
            .map(|f| match &f.kind {
                FeatureKind::Numeric => f.name.clone(),
                FeatureKind::Categorical(levels) => {
                    let mut out = f.name.clone();
                    for (token, code) in levels {
                        out.push_str(&format!(":{token}={code}"));
                    }
                    out
                }
            })
            .collect();
        format!(
            "{};{};{}",
            self.name,
            features.join("|"),
            self.class_names.join("|")
        )
    }

    pub fn from_header(line: &str) -> Result<Self> {
        let bad = |m: &str| DatasetError::Schema(format!("header: {m}"));
        let parts: Vec<&str> = line.trim_end().split(';').collect();
        let [name, features, classes] = parts[..] else {
            return Err(bad("expected three `;`-separated parts"));
        };
        let mut out = Vec::new();
        for spec in features.split('|') {
            let mut pieces = spec.split(':');
            let fname = pieces.next().unwrap_or_default();
            let mut levels = Vec::new();
            for level in pieces {
                let (token, code) = level.split_once('=').ok_or_else(|| bad(level))?;
                let code: f64 = code.parse().map_err(|_| bad(level))?;
                levels.push((token.to_string(), code));
            }
            out.push(Feature {
                name: fname.to_string(),
                kind: if levels.is_empty() {
                    FeatureKind::Numeric
                } else {
                    FeatureKind::Categorical(levels)
                },
            });
        }
        Schema::new(name, out, classes.split('|').map(String::from).collect())
    }
}

/// Encoded feature matrix with labels, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(schema: Schema, samples: Vec<Sample>) -> Result<Self> {
        let m = schema.feature_count();
        let k = schema.class_count() as ClassId;
        for (index, s) in samples.iter().enumerate() {
            if s.features.len() != m {
                return Err(DatasetError::Sample {
                    index,
                    message: format!("{} features, schema expects {m}", s.features.len()),
                });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::Sample {
                    index,
                    message: "non-finite feature value".into(),
                });
            }
            if s.label < 1 || s.label > k {
                return Err(DatasetError::Sample {
                    index,
                    message: format!("label {} outside 1..={k}", s.label),
                });
            }
        }
        Ok(Self { schema, samples })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-class sample counts; entry `k - 1` counts class `k`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.schema.class_count()];
        for s in &self.samples {
            counts[s.label as usize - 1] += 1;
        }
        counts
    }

    /// New dataset holding the samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.schema.class_count()];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.label as usize - 1].push(i);
        }
        by_class
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits non-blank lines into trimmed fields, checking the column count.
fn records(text: &str, columns: usize) -> impl Iterator<Item = Result<(usize, Vec<&str>)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| {
            let line = i + 1;
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != columns {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("expected {columns} fields, found {}", fields.len()),
                });
            }
            if let Some(pos) = fields.iter().position(|f| f.is_empty() || *f == "?") {
                return Err(DatasetError::Parse {
                    line,
                    message: format!("missing value in field {}", pos + 1),
                });
            }
            Ok((line, fields))
        })
}

/// Encodes every feature field of one record against the schema.
fn encode_row(schema: &Schema, line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    schema
        .features
        .iter()
        .zip(fields)
        .map(|(feature, token)| {
            feature.encode(token).ok_or_else(|| match feature.kind {
                FeatureKind::Numeric => DatasetError::Parse {
                    line,
                    message: format!("`{token}` is not a number (column `{}`)", feature.name),
                },
                FeatureKind::Categorical(_) => DatasetError::Encoding {
                    line,
                    column: feature.name.clone(),
                    token: token.to_string(),
                },
            })
        })
        .collect()
}

fn finish(schema: Schema, samples: Vec<Sample>) -> Result<Dataset> {
    if samples.is_empty() {
        return Err(DatasetError::NoSamples);
    }
    Dataset::new(schema, samples)
}

pub fn iris_schema() -> Schema {
    Schema::new(
        "iris",
        vec![
            Feature::numeric("sepal_length"),
            Feature::numeric("sepal_width"),
            Feature::numeric("petal_length"),
            Feature::numeric("petal_width"),
        ],
        vec![
            "Iris-versicolor".into(),
            "Iris-setosa".into(),
            "Iris-virginica".into(),
        ],
    )
    .expect("static schema")
}

/// Parses `iris.data` text. Versicolor is class 1, Setosa 2, Virginica 3.
pub fn parse_iris(text: &str) -> Result<Dataset> {
    let schema = iris_schema();
    let mut samples = Vec::new();
    for rec in records(text, 5) {
        let (line, fields) = rec?;
        let features = encode_row(&schema, line, &fields[..4])?;
        let label = schema
            .class_id(fields[4])
            .ok_or_else(|| DatasetError::Encoding {
                line,
                column: "species".into(),
                token: fields[4].to_string(),
            })?;
        samples.push(Sample::new(features, label));
    }
    finish(schema, samples)
}

pub fn load_iris(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_iris(&read(path.as_ref())?)
}

pub fn car_schema() -> Schema {
    let price = [("low", 1.0), ("med", 2.0), ("high", 3.0), ("vhigh", 4.0)];
    Schema::new(
        "car",
        vec![
            Feature::categorical("buying", &price),
            Feature::categorical("maint", &price),
            Feature::categorical("doors", &[("2", 2.0), ("3", 3.0), ("4", 4.0), ("5more", 5.0)]),
            Feature::categorical("persons", &[("2", 2.0), ("4", 4.0), ("more", 5.0)]),
            Feature::categorical("lug_boot", &[("small", 1.0), ("med", 2.0), ("big", 3.0)]),
            Feature::categorical("safety", &[("low", 1.0), ("med", 2.0), ("high", 3.0)]),
        ],
        vec!["unacc".into(), "acc".into(), "good".into(), "vgood".into()],
    )
    .expect("static schema")
}

/// Parses `car.data` text with 1-based ordinal encodings for every column.
pub fn parse_car(text: &str) -> Result<Dataset> {
    let schema = car_schema();
    let mut samples = Vec::new();
    for rec in records(text, 7) {
        let (line, fields) = rec?;
        let features = encode_row(&schema, line, &fields[..6])?;
        let label = schema
            .class_id(fields[6])
            .ok_or_else(|| DatasetError::Encoding {
                line,
                column: "class".into(),
                token: fields[6].to_string(),
            })?;
        samples.push(Sample::new(features, label));
    }
    finish(schema, samples)
}

pub fn load_car(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_car(&read(path.as_ref())?)
}

/// Upper bound (inclusive) of the rings count in the abalone table.
pub const MAX_RINGS: u32 = 29;

pub fn abalone_schema(bin_rings: bool) -> Schema {
    let class_names = if bin_rings {
        vec!["young".into(), "adult".into(), "old".into()]
    } else {
        (1..=MAX_RINGS).map(|r| r.to_string()).collect()
    };
    Schema::new(
        if bin_rings { "abalone" } else { "abalone-rings" },
        vec![
            Feature::categorical("sex", &[("M", 1.0), ("F", 2.0), ("I", 3.0)]),
            Feature::numeric("length"),
            Feature::numeric("diameter"),
            Feature::numeric("height"),
            Feature::numeric("whole_weight"),
            Feature::numeric("shucked_weight"),
            Feature::numeric("viscera_weight"),
            Feature::numeric("shell_weight"),
        ],
        class_names,
    )
    .expect("static schema")
}

/// Three age bands: `< 9`, `9..18`, `>= 18` rings.
pub fn ring_band(rings: u32) -> ClassId {
    match rings {
        0..=8 => 1,
        9..=17 => 2,
        _ => 3,
    }
}

/// Parses `abalone.data`. With `bin_rings` the label is [`ring_band`],
/// otherwise the raw ring count.
pub fn parse_abalone(text: &str, bin_rings: bool) -> Result<Dataset> {
    let schema = abalone_schema(bin_rings);
    let mut samples = Vec::new();
    for rec in records(text, 9) {
        let (line, fields) = rec?;
        let features = encode_row(&schema, line, &fields[..8])?;
        let rings: u32 = fields[8].parse().map_err(|_| DatasetError::Parse {
            line,
            message: format!("rings `{}` is not a non-negative integer", fields[8]),
        })?;
        if !(1..=MAX_RINGS).contains(&rings) {
            return Err(DatasetError::Parse {
                line,
                message: format!("rings {rings} outside 1..={MAX_RINGS}"),
            });
        }
        let label = if bin_rings { ring_band(rings) } else { rings };
        samples.push(Sample::new(features, label));
    }
    finish(schema, samples)
}

pub fn load_abalone(path: impl AsRef<Path>, bin_rings: bool) -> Result<Dataset> {
    parse_abalone(&read(path.as_ref())?, bin_rings)
}

/// Size of the held-out part of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestSize {
    /// Exactly this many samples from every class.
    PerClass(usize),
    /// This many samples in total; allocated proportionally to class
    /// sizes when the split is stratified.
    Total(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub seed: u64,
    pub test_size: TestSize,
    pub stratified: bool,
    /// Draw the test rows but keep every row, test rows included, in train.
    pub leak_test_from_full: bool,
}

impl SplitSpec {
    pub fn per_class(seed: u64, n: usize) -> Self {
        Self {
            seed,
            test_size: TestSize::PerClass(n),
            stratified: true,
            leak_test_from_full: false,
        }
    }

    pub fn total(seed: u64, n: usize) -> Self {
        Self {
            seed,
            test_size: TestSize::Total(n),
            stratified: true,
            leak_test_from_full: false,
        }
    }
}

/// Largest-remainder apportionment of `total` over classes of the given
/// sizes; leftover units go to the largest remainders, ties to lower class ids.
fn proportional_quota(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut rest: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(k, &s)| ((s * total) % n, k))
        .collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = total - quota.iter().sum::<usize>();
    for &(_, k) in rest.iter().take(missing) {
        quota[k] += 1;
    }
    quota
}

/// Seeded train/test split. Both outputs keep the original sample order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut by_class = dataset.indices_by_class();
    let mut test: Vec<usize> = match spec.test_size {
        TestSize::PerClass(n) => {
            for (k, idx) in by_class.iter().enumerate() {
                if idx.len() < n {
                    return Err(DatasetError::InfeasibleSplit(format!(
                        "class {} has {} samples, {n} requested",
                        k + 1,
                        idx.len()
                    )));
                }
            }
            by_class
                .iter_mut()
                .flat_map(|idx| {
                    idx.shuffle(&mut rng);
                    idx[..n].to_vec()
                })
                .collect()
        }
        TestSize::Total(n) => {
            if n > dataset.len() {
                return Err(DatasetError::InfeasibleSplit(format!(
                    "{n} test samples requested from {}",
                    dataset.len()
                )));
            }
            if spec.stratified {
                let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
                let quota = proportional_quota(&sizes, n);
                by_class
                    .iter_mut()
                    .zip(quota)
                    .flat_map(|(idx, q)| {
                        idx.shuffle(&mut rng);
                        idx[..q].to_vec()
                    })
                    .collect()
            } else {
                let mut all: Vec<usize> = (0..dataset.len()).collect();
                all.shuffle(&mut rng);
                all.truncate(n);
                all
            }
        }
    };
    test.sort_unstable();
    let train: Vec<usize> = if spec.leak_test_from_full {
        (0..dataset.len()).collect()
    } else {
        let mut in_test = vec![false; dataset.len()];
        for &i in &test {
            in_test[i] = true;
        }
        (0..dataset.len()).filter(|&i| !in_test[i]).collect()
    };
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Stratified halving into groups of `ceil(N/2)` and `floor(N/2)` samples.
///
/// Each class is shuffled, the classes are concatenated and the result is
/// dealt alternately into the two groups, so per-class counts differ by at
/// most one between the halves.
pub fn halve(train: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    if train.len() < 2 {
        return Err(DatasetError::InfeasibleSplit(format!(
            "cannot halve {} samples",
            train.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dealt = Vec::with_capacity(train.len());
    for mut idx in train.indices_by_class() {
        idx.shuffle(&mut rng);
        dealt.extend(idx);
    }
    let mut first: Vec<usize> = dealt.iter().copied().step_by(2).collect();
    let mut second: Vec<usize> = dealt.iter().copied().skip(1).step_by(2).collect();
    first.sort_unstable();
    second.sort_unstable();
    let (a, b) = (train.subset(&first), train.subset(&second));
    for (name, half) in [("I", &a), ("II", &b)] {
        if half.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
            log::warn!("fold {name} contains a single class");
        }
    }
    Ok((a, b))
}

//! Small feed-forward baseline whose flattened weights are fitted by
//! [`crate::most`] instead of backpropagation.
//!
//! Layer transforms by position: the first is ReLU, the second softmax and
//! an optional third is linear. Weights are stored layer by layer, one row
//! per output neuron, each row holding its input weights followed by the
//! bias.

use thiserror::Error;

use crate::dataset::{ClassId, Dataset};
use crate::most::{self, MostConfig, MostError, Objective, OptimizeReport, SearchDomain};

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("expected {expected} values, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("weight file line {line}: {message}")]
    Dump { line: usize, message: String },
    #[error(transparent)]
    Most(#[from] MostError),
}

pub type Result<T, E = MlpError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softmax,
    Identity,
}

const TRANSFORMS: [Activation; 3] = [Activation::Relu, Activation::Softmax, Activation::Identity];

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    /// Input width followed by one to three layer widths.
    pub layer_sizes: Vec<usize>,
    /// Weights are searched in `[-weight_bound, weight_bound]`.
    pub weight_bound: f64,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, weight_bound: f64) -> Result<Self> {
        if !(2..=TRANSFORMS.len() + 1).contains(&layer_sizes.len()) {
            return Err(MlpError::Spec(format!(
                "{} layer sizes given, expected 2 to 4",
                layer_sizes.len()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(MlpError::Spec("empty layer".into()));
        }
        if !(weight_bound.is_finite() && weight_bound > 0.0) {
            return Err(MlpError::Spec(format!("weight bound {weight_bound}")));
        }
        Ok(Self {
            layer_sizes,
            weight_bound,
        })
    }

    pub fn inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Width of the last layer, one score per class.
    pub fn outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn activations(&self) -> &'static [Activation] {
        &TRANSFORMS[..self.layer_sizes.len() - 1]
    }

    pub fn weight_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Search box `[-B, B]` in every weight.
    pub fn domain(&self) -> SearchDomain {
        SearchDomain::uniform(self.weight_count(), -self.weight_bound, self.weight_bound)
            .expect("validated bound")
    }
}

pub fn weight_count(spec: &MlpSpec) -> usize {
    spec.weight_count()
}

/// Flat weights; length equals the spec's weight count.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(spec: &MlpSpec, weights: Vec<f64>) -> Result<Self> {
        let expected = spec.weight_count();
        if weights.len() != expected {
            return Err(MlpError::Dimension {
                expected,
                found: weights.len(),
            });
        }
        Ok(Self(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Header line `layers=a,b,c bound=B`, then one weight per line.
    pub fn dump(&self, spec: &MlpSpec) -> String {
        let layers: Vec<String> = spec.layer_sizes.iter().map(|n| n.to_string()).collect();
        let mut out = format!("layers={} bound={}\n", layers.join(","), spec.weight_bound);
        for w in &self.0 {
            out.push_str(&format!("{w}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<(MlpSpec, Self)> {
        let bad = |line: usize, message: &str| MlpError::Dump {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let (layers, bound) = header
            .strip_prefix("layers=")
            .and_then(|h| h.split_once(" bound="))
            .ok_or_else(|| bad(1, "malformed header"))?;
        let layers = layers
            .split(',')
            .map(|n| n.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad(1, "bad layer size"))?;
        let bound: f64 = bound.parse().map_err(|_| bad(1, "bad bound"))?;
        let spec = MlpSpec::new(layers, bound)?;
        let weights = lines
            .enumerate()
            .map(|(i, l)| l.trim().parse::<f64>().map_err(|_| bad(i + 2, "bad weight")))
            .collect::<Result<Vec<_>>>()?;
        let weights = Self::new(&spec, weights)?;
        Ok((spec, weights))
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Activations of every layer after the input, in order.
pub fn forward_layers(spec: &MlpSpec, weights: &[f64], x: &[f64]) -> Vec<Vec<f64>> {
    debug_assert_eq!(weights.len(), spec.weight_count());
    debug_assert_eq!(x.len(), spec.inputs());
    let mut layers = Vec::with_capacity(spec.layer_sizes.len() - 1);
    let mut offset = 0;
    let mut input = x.to_vec();
    for (w, act) in spec.layer_sizes.windows(2).zip(spec.activations()) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let mut z: Vec<f64> = (0..fan_out)
            .map(|o| {
                let row = &weights[offset + o * (fan_in + 1)..offset + (o + 1) * (fan_in + 1)];
                row[..fan_in].iter().zip(&input).map(|(a, b)| a * b).sum::<f64>() + row[fan_in]
            })
            .collect();
        offset += (fan_in + 1) * fan_out;
        match act {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Softmax => softmax_in_place(&mut z),
            Activation::Identity => {}
        }
        layers.push(z.clone());
        input = z;
    }
    layers
}

/// Scores of the last layer.
pub fn forward(spec: &MlpSpec, weights: &[f64], x: &[f64]) -> Vec<f64> {
    forward_layers(spec, weights, x).pop().expect("at least one layer")
}

/// Index of the largest score plus one; ties go to the smallest class.
pub fn predicted_class(scores: &[f64]) -> ClassId {
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = k;
        }
    }
    best as ClassId + 1
}

/// Half the summed squared distance between scores and one-hot targets.
pub fn nn_loss(spec: &MlpSpec, weights: &[f64], data: &Dataset) -> f64 {
    data.samples()
        .iter()
        .map(|s| {
            let scores = forward(spec, weights, &s.features);
            scores
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let target = if k as ClassId + 1 == s.label { 1.0 } else { 0.0 };
                    (v - target).powi(2)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        * 0.5
}

pub fn accuracy(spec: &MlpSpec, weights: &[f64], data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let correct = data
        .samples()
        .iter()
        .filter(|s| predicted_class(&forward(spec, weights, &s.features)) == s.label)
        .count();
    correct as f64 / data.len() as f64
}

struct LossObjective<'a> {
    spec: &'a MlpSpec,
    data: &'a Dataset,
}

impl Objective for LossObjective<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        nn_loss(self.spec, x, self.data)
    }
}

#[derive(Debug, Clone)]
pub struct NnFit {
    pub weights: WeightVector,
    pub report: OptimizeReport,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

fn check_data(spec: &MlpSpec, data: &Dataset) -> Result<()> {
    let (m, k) = (data.schema().feature_count(), data.schema().class_count());
    if m != spec.inputs() {
        return Err(MlpError::Dimension {
            expected: spec.inputs(),
            found: m,
        });
    }
    if k != spec.outputs() {
        return Err(MlpError::Dimension {
            expected: spec.outputs(),
            found: k,
        });
    }
    Ok(())
}

/// Minimizes [`nn_loss`] on `train` over the spec's weight box.
pub fn train_nn(
    train: &Dataset,
    test: Option<&Dataset>,
    spec: &MlpSpec,
    config: &MostConfig,
) -> Result<NnFit> {
    check_data(spec, train)?;
    if let Some(t) = test {
        check_data(spec, t)?;
    }
    let objective = LossObjective { spec, data: train };
    let report = most::optimize(&objective, &spec.domain(), config)?;
    let weights = WeightVector::new(spec, report.best_point.clone())?;
    let train_accuracy = accuracy(spec, weights.as_slice(), train);
    let test_accuracy = test.map(|t| accuracy(spec, weights.as_slice(), t));
    Ok(NnFit {
        weights,
        report,
        train_accuracy,
        test_accuracy,
    })
}

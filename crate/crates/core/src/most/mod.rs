//! MOST: Monte Carlo region scoring with coordinate-wise bisection.
//!
//! The minimizer never looks at gradients. Each candidate region of the
//! search box is scored by the mean of the objective over uniformly drawn
//! points; the region with the smaller score survives. An optional initial
//! scan splits every variable's interval into `initial_divisions` parts and
//! keeps the best part, which steers the search away from local minima.
//! Bisection then proceeds one variable at a time (sweeping `x_1 .. x_n`),
//! so each sweep costs `2 n` region scores instead of `2^n`.
//!
//! Scores are arithmetic means. For two subregions of equal volume the mean,
//! the integral and the volume-normalized Monte Carlo sum rank identically,
//! and only the ranking is ever used.

mod oracle;
pub mod suite;

use std::fmt::Write as _;

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use oracle::{grid_oracle, OracleResult, ORACLE_BUDGET};

#[derive(Debug, Error, PartialEq)]
pub enum MostError {
    #[error("invalid search domain: {0}")]
    InvalidDomain(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("objective returned {value} at {point:?}")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("grid oracle needs {evaluations} evaluations, budget is {budget}")]
    OracleBudget { evaluations: u128, budget: u128 },
}

pub type Result<T, E = MostError> = std::result::Result<T, E>;

/// A scalar function of `n` real variables.
///
/// Must be deterministic for a fixed input; the optimizer's reproducibility
/// contract depends on it.
pub trait Objective: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Axis-aligned box `[lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(MostError::InvalidDomain("zero variables".into()));
        }
        if lower.len() != upper.len() {
            return Err(MostError::InvalidDomain(format!(
                "{} lower bounds, {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !a.is_finite() || !b.is_finite() || a >= b {
                return Err(MostError::InvalidDomain(format!(
                    "variable {j}: [{a}, {b}] is not a finite interval with lower < upper"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lower, upper]` for each of `n` variables.
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| a <= v && v <= b)
    }

    /// Copy of `self` with variable `j` restricted to `[lower, upper]`.
    /// No validation: the bisection may produce degenerate intervals once
    /// widths approach the floating-point resolution.
    fn with_interval(&self, j: usize, lower: f64, upper: f64) -> Self {
        let mut region = self.clone();
        region.lower[j] = lower;
        region.upper[j] = upper;
        region
    }

    /// Uniform draw from the open box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| {
                let u: f64 = Open01.sample(rng);
                a + (b - a) * u
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MostConfig {
    /// Parts per variable in the initial scan.
    pub initial_divisions: usize,
    /// Points per region score.
    pub mc_samples: usize,
    /// Convergence threshold relative to each variable's original width.
    pub tolerance: f64,
    /// Safety cap on bisection sweeps.
    pub max_sweeps: usize,
    pub seed: u64,
    pub use_initial_scan: bool,
}

impl Default for MostConfig {
    fn default() -> Self {
        Self {
            initial_divisions: 20,
            mc_samples: 50,
            tolerance: 1e-6,
            max_sweeps: 60,
            seed: 0,
            use_initial_scan: true,
        }
    }
}

impl MostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_divisions == 0 {
            return Err(MostError::InvalidConfig("initial_divisions must be >= 1".into()));
        }
        if self.mc_samples == 0 {
            return Err(MostError::InvalidConfig("mc_samples must be >= 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(MostError::InvalidConfig(format!(
                "relative tolerance {} must lie in (0, 1)",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Lower,
    Upper,
}

impl Half {
    fn as_str(self) -> &'static str {
        match self {
            Half::Lower => "low",
            Half::Upper => "high",
        }
    }
}

/// Names the random stream behind one region score. Every score in a run
/// gets its own stream, derived from the run seed and this key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKey {
    Scan { variable: usize, division: usize },
    Bisect { sweep: usize, variable: usize, half: Half },
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    fn id(self) -> u64 {
        let (tag, a, b, c) = match self {
            StreamKey::Scan { variable, division } => (1, variable as u64, division as u64, 0),
            StreamKey::Bisect {
                sweep,
                variable,
                half,
            } => (2, sweep as u64, variable as u64, half as u64),
        };
        splitmix(splitmix(splitmix(tag) ^ a) ^ b) ^ c
    }

    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.id());
        rng
    }
}

fn checked(point: &[f64], value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(MostError::NonFinite {
            point: point.to_vec(),
            value,
        })
    }
}

/// Mean of `objective` over `samples` uniform points of `region`.
///
/// All points are drawn before any evaluation and summed in draw order, so
/// the result depends only on the generator state.
pub fn mc_score<O, R>(objective: &O, region: &SearchDomain, samples: usize, rng: &mut R) -> Result<f64>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    assert!(samples > 0, "mc_score needs at least one sample");
    let points: Vec<Vec<f64>> = (0..samples).map(|_| region.sample(rng)).collect();
    let mut sum = 0.0;
    for p in &points {
        sum += checked(p, objective.evaluate(p))?;
    }
    Ok(sum / samples as f64)
}

/// Strategy for scoring a candidate region.
pub trait RegionScorer {
    fn score(&self, objective: &dyn Objective, region: &SearchDomain, key: StreamKey) -> Result<f64>;
}

/// The default scorer: [`mc_score`] on a per-key random stream.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
}

impl RegionScorer for MonteCarlo {
    fn score(&self, objective: &dyn Objective, region: &SearchDomain, key: StreamKey) -> Result<f64> {
        mc_score(objective, region, self.samples, &mut key.rng(self.seed))
    }
}

/// Deterministic product midpoint rule; mostly useful to take sampling
/// noise out of the picture in tests.
#[derive(Debug, Clone, Copy)]
pub struct MidpointRule {
    pub points_per_axis: usize,
}

impl RegionScorer for MidpointRule {
    fn score(&self, objective: &dyn Objective, region: &SearchDomain, _key: StreamKey) -> Result<f64> {
        let n = region.dim();
        let p = self.points_per_axis.max(1);
        let total = p.pow(n as u32);
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        let mut sum = 0.0;
        for _ in 0..total {
            for j in 0..n {
                let a = region.lower[j];
                let w = region.upper[j] - a;
                x[j] = a + w * (idx[j] as f64 + 0.5) / p as f64;
            }
            sum += checked(&x, objective.evaluate(&x))?;
            for d in idx.iter_mut() {
                *d += 1;
                if *d < p {
                    break;
                }
                *d = 0;
            }
        }
        Ok(sum / total as f64)
    }
}

/// Result of the initial scan of one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub variable: usize,
    /// Index of the selected part.
    pub division: usize,
    pub lower: f64,
    pub upper: f64,
    /// Score of every part, in order.
    pub scores: Vec<f64>,
}

/// Bounds of part `i` of `[a, b]` cut into `parts` equal pieces.
fn part(a: f64, b: f64, parts: usize, i: usize) -> (f64, f64) {
    let w = b - a;
    let lo = a + w * (i as f64 / parts as f64);
    let hi = if i + 1 == parts {
        b
    } else {
        a + w * ((i + 1) as f64 / parts as f64)
    };
    (lo, hi)
}

/// Cuts variable `j` of `domain` into `config.initial_divisions` equal parts
/// and returns the part with the smallest Monte Carlo score (lowest index on
/// ties). The other variables are sampled over their current intervals.
pub fn initial_scan<O: Objective>(
    objective: &O,
    domain: &SearchDomain,
    config: &MostConfig,
    variable: usize,
) -> Result<ScanOutcome> {
    config.validate()?;
    let scorer = MonteCarlo {
        samples: config.mc_samples,
        seed: config.seed,
    };
    initial_scan_with(objective, domain, config.initial_divisions, variable, &scorer)
}

pub fn initial_scan_with<O: Objective, S: RegionScorer + ?Sized>(
    objective: &O,
    domain: &SearchDomain,
    divisions: usize,
    variable: usize,
    scorer: &S,
) -> Result<ScanOutcome> {
    assert!(variable < domain.dim(), "variable {variable} out of range");
    let divisions = divisions.max(1);
    let (a, b) = (domain.lower[variable], domain.upper[variable]);
    let mut scores = Vec::with_capacity(divisions);
    for i in 0..divisions {
        let (lo, hi) = part(a, b, divisions, i);
        let region = domain.with_interval(variable, lo, hi);
        scores.push(scorer.score(objective, &region, StreamKey::Scan { variable, division: i })?);
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    let (lower, upper) = part(a, b, divisions, best);
    Ok(ScanOutcome {
        variable,
        division: best,
        lower,
        upper,
        scores,
    })
}

/// One bisection step of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BisectionRecord {
    pub sweep: usize,
    pub variable: usize,
    /// Interval before the cut.
    pub lower: f64,
    pub upper: f64,
    pub score_low: f64,
    pub score_high: f64,
    pub kept: Half,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    /// Midpoints of the final intervals.
    pub best_point: Vec<f64>,
    /// Objective at `best_point`.
    pub best_value: f64,
    pub final_lower: Vec<f64>,
    pub final_upper: Vec<f64>,
    /// Nominal interval widths: each bisection halves them exactly.
    pub final_widths: Vec<f64>,
    /// Bisections applied to each variable.
    pub bisections: Vec<usize>,
    pub sweeps_used: usize,
    /// False when `max_sweeps` stopped the search before every width fell
    /// below the tolerance.
    pub converged: bool,
    pub region_scores: usize,
    pub scan_trace: Vec<ScanOutcome>,
    pub region_trace: Vec<BisectionRecord>,
}

pub const TRACE_HEADER: &str = "sweep,variable,lower,upper,score_low,score_high,kept";

impl OptimizeReport {
    /// Bisection trace as CSV, header included.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.region_trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.sweep,
                r.variable,
                r.lower,
                r.upper,
                r.score_low,
                r.score_high,
                r.kept.as_str()
            );
        }
        out
    }
}

/// Minimizes `objective` over `domain` with Monte Carlo region scores.
pub fn optimize<O: Objective>(
    objective: &O,
    domain: &SearchDomain,
    config: &MostConfig,
) -> Result<OptimizeReport> {
    let scorer = MonteCarlo {
        samples: config.mc_samples,
        seed: config.seed,
    };
    optimize_with(objective, domain, config, &scorer)
}

/// [`optimize`] with a caller-chosen region scorer. `config.mc_samples` and
/// `config.seed` are ignored by scorers that do not use them.
pub fn optimize_with<O: Objective, S: RegionScorer + ?Sized>(
    objective: &O,
    domain: &SearchDomain,
    config: &MostConfig,
    scorer: &S,
) -> Result<OptimizeReport> {
    config.validate()?;
    let n = domain.dim();
    let thresholds: Vec<f64> = (0..n).map(|j| config.tolerance * domain.width(j)).collect();
    let mut current = domain.clone();
    let mut region_scores = 0;

    let mut scan_trace = Vec::new();
    let scanned = config.use_initial_scan && config.initial_divisions > 1;
    if scanned {
        for j in 0..n {
            let outcome =
                initial_scan_with(objective, &current, config.initial_divisions, j, scorer)?;
            region_scores += outcome.scores.len();
            current.lower[j] = outcome.lower;
            current.upper[j] = outcome.upper;
            scan_trace.push(outcome);
        }
    }

    // Nominal widths: exact powers of two times the division width.
    let divisions = if scanned { config.initial_divisions as f64 } else { 1.0 };
    let mut widths: Vec<f64> = (0..n).map(|j| domain.width(j) / divisions).collect();
    let mut bisections = vec![0; n];
    let mut region_trace = Vec::new();
    let mut sweeps_used = 0;
    let open = |w: &[f64]| w.iter().zip(&thresholds).any(|(w, t)| w >= t);

    while sweeps_used < config.max_sweeps && open(&widths) {
        let sweep = sweeps_used;
        sweeps_used += 1;
        for j in 0..n {
            if widths[j] < thresholds[j] {
                continue;
            }
            let (lo, hi) = (current.lower[j], current.upper[j]);
            let half = widths[j] / 2.0;
            let mid = (lo + half).clamp(lo, hi);
            let low = current.with_interval(j, lo, mid);
            let high = current.with_interval(j, mid, hi);
            let score_low = scorer.score(
                objective,
                &low,
                StreamKey::Bisect { sweep, variable: j, half: Half::Lower },
            )?;
            let score_high = scorer.score(
                objective,
                &high,
                StreamKey::Bisect { sweep, variable: j, half: Half::Upper },
            )?;
            region_scores += 2;
            let kept = if score_low <= score_high {
                Half::Lower
            } else {
                Half::Upper
            };
            region_trace.push(BisectionRecord {
                sweep,
                variable: j,
                lower: lo,
                upper: hi,
                score_low,
                score_high,
                kept,
            });
            current = if kept == Half::Lower { low } else { high };
            widths[j] = half;
            bisections[j] += 1;
        }
    }

    let best_point: Vec<f64> = (0..n)
        .map(|j| {
            let (a, b) = (current.lower[j], current.upper[j]);
            (a + (b - a) / 2.0).clamp(domain.lower[j], domain.upper[j])
        })
        .collect();
    let best_value = checked(&best_point, objective.evaluate(&best_point))?;
    Ok(OptimizeReport {
        best_point,
        best_value,
        final_lower: current.lower,
        final_upper: current.upper,
        converged: !open(&widths),
        final_widths: widths,
        bisections,
        sweeps_used,
        region_scores,
        scan_trace,
        region_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> SearchDomain {
        SearchDomain::uniform(n, 0.0, 1.0).unwrap()
    }

    #[test]
    fn domain_validation() {
        assert!(SearchDomain::new(vec![], vec![]).is_err());
        assert!(SearchDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(SearchDomain::new(vec![1.0], vec![0.0]).is_err());
        assert!(SearchDomain::new(vec![0.0], vec![f64::INFINITY]).is_err());
        assert!(SearchDomain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(unit(3).contains(&[0.0, 0.5, 1.0]));
    }

    #[test]
    fn config_validation() {
        assert!(MostConfig::default().validate().is_ok());
        let bad = [
            MostConfig { initial_divisions: 0, ..Default::default() },
            MostConfig { mc_samples: 0, ..Default::default() },
            MostConfig { tolerance: 0.0, ..Default::default() },
            MostConfig { tolerance: 1.5, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn constant_mean_is_exact() {
        let f = |_: &[f64]| 2.75;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = SearchDomain::new(vec![-4.0, 10.0], vec![7.0, 11.0]).unwrap();
        assert_eq!(mc_score(&f, &d, 17, &mut rng).unwrap(), 2.75);
    }

    #[test]
    fn mc_mean_matches_integrals() {
        // E[x] on [0,1] is 1/2; sd is 1/sqrt(12), so 1e5 samples give SE ~ 9e-4.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = mc_score(&|x: &[f64]| x[0], &unit(1), 100_000, &mut rng).unwrap();
        assert!((m - 0.5).abs() < 0.01, "{m}");
        let m = mc_score(&|x: &[f64]| x[0] + x[1], &unit(2), 100_000, &mut rng).unwrap();
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match mc_score(&f, &unit(1), 100, &mut rng) {
            Err(MostError::NonFinite { point, .. }) => assert!(point[0] > 0.5),
            other => panic!("{other:?}"),
        }
        assert!(optimize(&f, &unit(1), &MostConfig::default()).is_err());
    }

    #[test]
    fn scan_picks_lowest_part() {
        // Segment means of an increasing function increase with the index.
        let f = |x: &[f64]| x[0].powi(3) + x[0];
        let config = MostConfig { initial_divisions: 4, ..Default::default() };
        let s = initial_scan(&f, &unit(1), &config, 0).unwrap();
        assert_eq!(s.division, 0);
        assert_eq!((s.lower, s.upper), (0.0, 0.25));

        let flat = |_: &[f64]| 1.0;
        let s = initial_scan(&flat, &unit(1), &MostConfig::default(), 0).unwrap();
        assert_eq!(s.division, 0);
        assert_eq!(s.scores.len(), 20);
    }

    #[test]
    fn quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2);
        let config = MostConfig { mc_samples: 200, seed: 5, ..Default::default() };
        let r = optimize(&f, &unit(1), &config).unwrap();
        assert!(r.converged);
        assert!((r.best_point[0] - 0.3).abs() < 1e-5, "{:?}", r.best_point);
        assert!(r.final_widths[0] < 1e-6);
    }

    #[test]
    fn separable_ten_dimensional() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>();
        // The scan of the first variable sees the other nine spread over
        // [0, 1]; the sample count keeps that noise below the part spacing.
        let config = MostConfig { mc_samples: 20_000, seed: 2, ..Default::default() };
        let r = optimize(&f, &unit(10), &config).unwrap();
        for v in &r.best_point {
            assert!((v - 0.5).abs() < 1e-4, "{:?}", r.best_point);
        }
        // 20 scan parts plus two halves per bisection, per variable.
        let per_var: Vec<usize> = r.bisections.clone();
        assert_eq!(r.region_scores, 10 * 20 + 2 * per_var.iter().sum::<usize>());
        assert!(per_var.iter().all(|&k| k <= 20));
    }

    #[test]
    fn constant_objective_converges() {
        let f = |_: &[f64]| 0.0;
        let r = optimize(&f, &unit(3), &MostConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.final_widths.iter().all(|w| *w < 1e-6));
        assert!(r.region_trace.iter().all(|t| t.kept == Half::Lower));
        assert_eq!(r.best_point.len(), 3);
    }

    #[test]
    fn sweep_cap_is_flagged() {
        let f = |x: &[f64]| x[0];
        let config = MostConfig { max_sweeps: 3, use_initial_scan: false, ..Default::default() };
        let r = optimize(&f, &unit(1), &config).unwrap();
        assert!(!r.converged);
        assert_eq!(r.sweeps_used, 3);
        assert_eq!(r.final_widths[0], 0.125);
    }

    #[test]
    fn trace_csv_shape() {
        let f = |x: &[f64]| (x[0] - 0.7).abs();
        let config = MostConfig { use_initial_scan: false, ..Default::default() };
        let r = optimize(&f, &unit(1), &config).unwrap();
        let csv = r.trace_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.count(), r.region_trace.len());
        assert_eq!(r.region_trace.len(), 20);
    }

    #[test]
    fn pure_bisection_with_single_division() {
        let f = |x: &[f64]| (x[0] - 0.8).powi(2);
        let config = MostConfig { initial_divisions: 1, ..Default::default() };
        let r = optimize(&f, &unit(1), &config).unwrap();
        assert!(r.scan_trace.is_empty());
        assert!((r.best_point[0] - 0.8).abs() < 1e-3);
    }

    #[test]
    fn midpoint_rule_is_exact_for_linear() {
        let f = |x: &[f64]| 2.0 * x[0] - x[1];
        let d = SearchDomain::new(vec![0.0, 1.0], vec![2.0, 3.0]).unwrap();
        let key = StreamKey::Scan { variable: 0, division: 0 };
        let s = MidpointRule { points_per_axis: 7 }.score(&f, &d, key).unwrap();
        assert!((s - 0.0).abs() < 1e-12);
    }
}

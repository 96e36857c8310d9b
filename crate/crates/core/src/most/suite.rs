//! Multimodal test functions with lattice-checkable minima. In each, the
//! lowest-mean initial division holds the global minimizer.

use super::SearchDomain;

#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub lower: &'static [f64],
    pub upper: &'static [f64],
    pub f: fn(&[f64]) -> f64,
    /// Lattice points per axis for the reference grid search.
    pub oracle_points: usize,
    /// Samples per region score; larger where the other variables add noise.
    pub mc_samples: usize,
}

impl TestFunction {
    pub fn domain(&self) -> SearchDomain {
        SearchDomain::new(self.lower.to_vec(), self.upper.to_vec()).expect("static domain")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

fn tilted_double_well(x: &[f64]) -> f64 {
    let v = x[0];
    4.0 * (v - 0.6).powi(2) * (v - 1.9).powi(2) + 0.15 * v
}

fn sine_bowl(x: &[f64]) -> f64 {
    let v = x[0];
    (6.0 * v).sin() + 0.5 * (v - 1.4).powi(2)
}

fn narrow_well(x: &[f64]) -> f64 {
    let v = x[0];
    0.3 * (4.0 * v).sin() - 1.5 * (-((v - 1.43) / 0.05).powi(2)).exp()
}

fn ripple_parabola(x: &[f64]) -> f64 {
    let v = x[0];
    (v - 1.1).powi(2) + 0.25 * (9.0 * v).sin()
}

fn rippled_kink(x: &[f64]) -> f64 {
    let v = x[0];
    (v - 1.7).abs() + 0.1 * (15.0 * v).cos()
}

fn shifted_sphere(x: &[f64]) -> f64 {
    const C: [f64; 3] = [0.2, 0.55, 0.8];
    x.iter().zip(C).map(|(v, c)| (v - c).powi(2)).sum()
}

fn rastrigin(x: &[f64]) -> f64 {
    x.iter()
        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
        .sum()
}

fn styblinski_tang(x: &[f64]) -> f64 {
    0.5 * x
        .iter()
        .map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v)
        .sum::<f64>()
}

/// Five one-dimensional functions on `[0, 2.5]` with several local minima.
pub const ONE_DIMENSIONAL: [TestFunction; 5] = [
    TestFunction { name: "tilted_double_well", lower: &[0.0], upper: &[2.5], f: tilted_double_well, oracle_points: 250_001, mc_samples: 200 },
    TestFunction { name: "sine_bowl", lower: &[0.0], upper: &[2.5], f: sine_bowl, oracle_points: 250_001, mc_samples: 200 },
    TestFunction { name: "narrow_well", lower: &[0.0], upper: &[2.5], f: narrow_well, oracle_points: 250_001, mc_samples: 200 },
    TestFunction { name: "ripple_parabola", lower: &[0.0], upper: &[2.5], f: ripple_parabola, oracle_points: 250_001, mc_samples: 200 },
    TestFunction { name: "rippled_kink", lower: &[0.0], upper: &[2.5], f: rippled_kink, oracle_points: 250_001, mc_samples: 200 },
];

/// Three separable functions in two and three variables.
pub const SEPARABLE: [TestFunction; 3] = [
    TestFunction { name: "shifted_sphere_3d", lower: &[0.0, 0.0, 0.0], upper: &[1.0, 1.0, 1.0], f: shifted_sphere, oracle_points: 101, mc_samples: 20_000 },
    TestFunction { name: "rastrigin_2d", lower: &[-2.3625, -2.3625], upper: &[2.1375, 2.1375], f: rastrigin, oracle_points: 1001, mc_samples: 20_000 },
    TestFunction { name: "styblinski_tang_2d", lower: &[-5.0, -5.0], upper: &[5.0, 5.0], f: styblinski_tang, oracle_points: 1001, mc_samples: 20_000 },
];

pub fn all() -> impl Iterator<Item = &'static TestFunction> {
    ONE_DIMENSIONAL.iter().chain(SEPARABLE.iter())
}

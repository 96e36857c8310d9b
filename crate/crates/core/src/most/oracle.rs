use super::{checked, MostError, Objective, Result, SearchDomain};

/// Largest lattice the oracle will walk.
pub const ORACLE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Smallest and largest value seen on the lattice.
    pub value_range: (f64, f64),
    pub evaluations: usize,
}

/// Exhaustive search over a regular lattice with `points_per_axis` points
/// per variable, endpoints included. The first lattice point attaining the
/// minimum wins.
pub fn grid_oracle<O: Objective + ?Sized>(
    objective: &O,
    domain: &SearchDomain,
    points_per_axis: usize,
) -> Result<OracleResult> {
    let n = domain.dim();
    let p = points_per_axis.max(1);
    let evaluations = (p as u128)
        .checked_pow(n as u32)
        .filter(|&e| e <= ORACLE_BUDGET)
        .ok_or_else(|| MostError::OracleBudget {
            evaluations: (p as u128).saturating_pow(n as u32),
            budget: ORACLE_BUDGET,
        })? as usize;

    let coord = |j: usize, i: usize| -> f64 {
        let (a, b) = (domain.lower()[j], domain.upper()[j]);
        if p == 1 {
            a + (b - a) / 2.0
        } else {
            (a + (b - a) * (i as f64 / (p - 1) as f64)).min(b)
        }
    };

    let mut idx = vec![0usize; n];
    let mut x: Vec<f64> = (0..n).map(|j| coord(j, 0)).collect();
    let mut best_point = x.clone();
    let mut best_value = f64::INFINITY;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..evaluations {
        let v = checked(&x, objective.evaluate(&x))?;
        if v < best_value {
            best_value = v;
            best_point.copy_from_slice(&x);
        }
        range = (range.0.min(v), range.1.max(v));
        for (j, d) in idx.iter_mut().enumerate() {
            *d += 1;
            if *d < p {
                x[j] = coord(j, *d);
                break;
            }
            *d = 0;
            x[j] = coord(j, 0);
        }
    }
    Ok(OracleResult {
        best_point,
        best_value,
        value_range: range,
        evaluations,
    })
}

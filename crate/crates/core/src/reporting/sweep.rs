//! Subcritical approach `q ↗ 2n/(n−2)` of the rigidity threshold.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model_space::{ModelSpace, ScalarField};
use crate::sobolev::{critical_exponent, sharp_constants};
use crate::variational::{dual_dimension, minimize_subcritical, rigidity_threshold, MinimizeOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub q: f64,
    pub d_prime: f64,
    pub a_star: f64,
    /// `I(A*(d′))`, which equals 1 when constants minimize.
    pub i_value: f64,
    pub constancy: f64,
    pub el_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalLimit {
    pub rows: Vec<SweepRow>,
    /// Polynomial extrapolation of `A*(d′)` to `d′ = n`; `None` with fewer
    /// than two rows.
    pub extrapolated: Option<f64>,
    /// `A*(n) = 4(n−1)/(n(n−2)ρ)`.
    pub limit: f64,
    pub warnings: Vec<String>,
}

/// Neville's algorithm: value at `x = 0` of the polynomial through `(x_i, y_i)`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (xs[i], xs[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

/// For every `q` (strictly ascending, strictly subcritical) evaluates
/// `A*(d′(q))`, minimizes `I(A)` at that threshold and finally extrapolates
/// the thresholds to the critical exponent.
pub fn critical_limit_sweep(
    space: &ModelSpace,
    q_list: &[f64],
    init: &ScalarField,
    opts: &MinimizeOptions,
) -> Result<CriticalLimit> {
    let n = space.n();
    let (_, limit) = sharp_constants(n, space.rho())?;
    let crit = critical_exponent(n);
    if q_list.is_empty() {
        return Err(Error::InvalidConfig("q_list must not be empty".into()));
    }
    if let Some(&q) = q_list.iter().find(|&&q| !(q > 2.0 && q < crit * (1.0 - 1e-12))) {
        return Err(Error::InvalidExponent { q, reason: "sweep exponents must lie strictly inside (2, 2n/(n-2))" });
    }
    if q_list.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidConfig("q_list must be strictly ascending".into()));
    }
    let rows = q_list
        .iter()
        .map(|&q| {
            let d_prime = dual_dimension(q);
            let a_star = rigidity_threshold(d_prime, space.rho());
            let r = minimize_subcritical(space, a_star, q, init, opts)?;
            Ok(SweepRow {
                q,
                d_prime,
                a_star,
                i_value: r.i_value,
                constancy: r.constancy,
                el_residual: r.el_residual_norm,
                iterations: r.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    let extrapolated = if rows.len() < 2 {
        warnings.push("a single exponent gives no extrapolation".to_string());
        None
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| r.d_prime - n).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.a_star).collect();
        Some(extrapolate_to_zero(&xs, &ys))
    };
    Ok(CriticalLimit { rows, extrapolated, limit, warnings })
}

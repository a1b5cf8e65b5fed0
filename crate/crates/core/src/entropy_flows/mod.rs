//! Entropy gradient flows: a finite-dimensional flow `Ṡ = −∇F(S)` with its
//! convexity inequality, and the fast-diffusion equation viewed as the
//! gradient flow of the Rényi entropy.

mod finite;
mod renyi;

pub use finite::{condition_margin, convexity_inequality_margin, fd_flow, log_slope, Family, FiniteDimProblem, GChoice};
pub use renyi::{
    convexity_relation_margin, entropy_inequality, entropy_inequality_margin, fast_diffusion_flow,
    fast_diffusion_step, hessian_along_transport_path, renyi_entropy, renyi_entropy_excess, renyi_grad_norm_sq, renyi_hessian_quadform,
    EntropyInequality, FastDiffusionOptions, FlowSummary,
};

use serde::Serialize;

use crate::io::CsvTable;

/// Recorded history of a gradient flow.
///
/// For the finite-dimensional flow `entropy` is `F(S_t)`, `companion` is
/// `G(S_t)` and `mass` is empty; for fast diffusion they are `R_α(μ_t)`,
/// `R_β(μ_t)` and `∫μ_t dν`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub entropy: Vec<f64>,
    /// `entropy − entropy(equilibrium)`, computed without cancellation.
    pub entropy_excess: Vec<f64>,
    pub grad_norm_sq: Vec<f64>,
    pub companion: Vec<f64>,
    /// `|dE/dt + grad_norm_sq|` with `dE/dt` from five-point differences of
    /// the recorded excess.
    pub dissipation_residual: Vec<f64>,
    pub sup_dist: Vec<f64>,
    pub mass: Vec<f64>,
    pub steps: usize,
    /// True when the flow stopped at equilibrium before the final time.
    pub converged: bool,
}

impl FlowTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, t: f64, entropy: f64, excess: f64, grad: f64, companion: f64, dist: f64, mass: Option<f64>) {
        self.times.push(t);
        self.entropy.push(entropy);
        self.entropy_excess.push(excess);
        self.grad_norm_sq.push(grad);
        self.companion.push(companion);
        self.sup_dist.push(dist);
        if let Some(m) = mass {
            self.mass.push(m);
        }
    }

    /// Time derivative of the entropy at every record, from the quartic
    /// through the five nearest records (fewer when the trace is shorter).
    pub fn entropy_rate(&self) -> Vec<f64> {
        let t = &self.times;
        let e = &self.entropy_excess;
        let n = t.len();
        if n < 2 {
            return vec![0.0; n];
        }
        let width = n.min(5);
        (0..n)
            .map(|i| {
                let start = i.saturating_sub(width / 2).min(n - width);
                let range = start..start + width;
                lagrange_derivative(&t[range.clone()], &e[range], t[i])
            })
            .collect()
    }

    fn finish(&mut self) {
        let rate = self.entropy_rate();
        self.dissipation_residual = rate.iter().zip(&self.grad_norm_sq).map(|(r, g)| (r + g).abs()).collect();
    }

    /// CSV with columns `t, entropy, grad_norm_sq, companion_entropy,
    /// dissipation_residual, sup_dist, mass`.
    pub fn to_csv(&self) -> String {
        let mut table = CsvTable::new(&[
            "t",
            "entropy",
            "grad_norm_sq",
            "companion_entropy",
            "dissipation_residual",
            "sup_dist",
            "mass",
        ]);
        for i in 0..self.len() {
            table.push(vec![
                self.times[i].into(),
                self.entropy[i].into(),
                self.grad_norm_sq[i].into(),
                self.companion[i].into(),
                self.dissipation_residual[i].into(),
                self.sup_dist[i].into(),
                self.mass.get(i).copied().unwrap_or(f64::NAN).into(),
            ]);
        }
        table.render()
    }
}

/// Derivative at `x` of the interpolating polynomial through `(t_j, e_j)`.
fn lagrange_derivative(t: &[f64], e: &[f64], x: f64) -> f64 {
    let k = t.len();
    (0..k)
        .map(|j| {
            let denom: f64 = (0..k).filter(|&m| m != j).map(|m| t[j] - t[m]).product();
            let numer: f64 = (0..k)
                .filter(|&m| m != j)
                .map(|m| (0..k).filter(|&l| l != j && l != m).map(|l| x - t[l]).product::<f64>())
                .sum();
            e[j] * numer / denom
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_rule_is_exact_on_quartics() {
        let f = |x: f64| x.powi(4) - 3.0 * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 4.0 * x.powi(3) - 6.0 * x - 2.0;
        let t = [0.1, 0.25, 0.7, 0.8, 1.3];
        let e: Vec<f64> = t.iter().map(|&x| f(x)).collect();
        for &x in &t {
            assert!((lagrange_derivative(&t, &e, x) - df(x)).abs() < 1e-10);
        }
        let mut tr = FlowTrace::default();
        for &x in &t {
            tr.push(x, f(x), f(x), 0.0, 0.0, 0.0, None);
        }
        for (r, &x) in tr.entropy_rate().iter().zip(&t) {
            assert!((r - df(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_has_fixed_columns() {
        let mut tr = FlowTrace::default();
        tr.push(0.0, 1.0, 1.0, 2.0, 1.0, 0.5, None);
        tr.push(0.1, 0.8, 0.8, 1.6, 0.8, 0.4, None);
        tr.finish();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,entropy,grad_norm_sq,companion_entropy,dissipation_residual,sup_dist,mass\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().ends_with("NaN"));
    }
}

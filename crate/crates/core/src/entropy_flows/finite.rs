use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::FlowTrace;
use crate::error::{Error, Result};

/// Entropy family; `F(x) = ½ xᵀQx (+ ε Σ x_j⁴)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Quadratic { q: Vec<Vec<f64>> },
    QuarticPerturbed { q: Vec<Vec<f64>>, eps: f64 },
}

/// Companion functional `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GChoice {
    SameAsF,
    /// `G(x) = ½ xᵀPx` with `P` symmetric positive semidefinite.
    Quadratic { p: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
pub struct FiniteDimProblem {
    dim: usize,
    q: DMatrix<f64>,
    eps: f64,
    g: Option<DMatrix<f64>>,
    rho: f64,
}

fn to_matrix(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidParameter(format!("{what} must be {dim}x{dim}")));
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} has non-finite entries")));
    }
    if (0..dim).any(|i| (0..i).any(|j| m[(i, j)] != m[(j, i)])) {
        return Err(Error::InvalidParameter(format!("{what} must be symmetric")));
    }
    Ok(m)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

impl FiniteDimProblem {
    /// Validates the data. For a quadratic `F` with `G = F` the smallest
    /// eigenvalue of `Q` must be at least `ρ`; in every case `Q` must be
    /// positive definite so that `x* = 0` is the unique minimizer.
    pub fn new(dim: usize, family: Family, g: GChoice, rho: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
        }
        let (q, eps, quadratic) = match family {
            Family::Quadratic { q } => (to_matrix(&q, dim, "Q")?, 0.0, true),
            Family::QuarticPerturbed { q, eps } => {
                if !(eps >= 0.0) || !eps.is_finite() {
                    return Err(Error::InvalidParameter(format!("eps = {eps} must be nonnegative")));
                }
                (to_matrix(&q, dim, "Q")?, eps, false)
            }
        };
        let lmin = min_eigenvalue(&q);
        if !(lmin > 0.0) {
            return Err(Error::InvalidParameter(format!("Q must be positive definite (min eigenvalue {lmin})")));
        }
        let g = match g {
            GChoice::SameAsF => {
                if quadratic && lmin < rho * (1.0 - 1e-12) {
                    return Err(Error::InvalidParameter(format!(
                        "min eigenvalue of Q ({lmin}) is below rho = {rho}"
                    )));
                }
                None
            }
            GChoice::Quadratic { p } => {
                let p = to_matrix(&p, dim, "P")?;
                if min_eigenvalue(&p) < -1e-12 {
                    return Err(Error::InvalidParameter("P must be positive semidefinite".into()));
                }
                Some(p)
            }
        };
        Ok(FiniteDimProblem { dim, q, eps, g, rho })
    }

    /// `F = ρ|x|²/2` in dimension `m`, with `G = F`.
    pub fn isotropic(dim: usize, rho: f64) -> Result<Self> {
        let q = (0..dim).map(|i| (0..dim).map(|j| if i == j { rho } else { 0.0 }).collect()).collect();
        Self::new(dim, Family::Quadratic { q }, GChoice::SameAsF, rho)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The minimizer of `F`, always the origin for the shipped families.
    pub fn minimizer(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn vec(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::InvalidParameter(format!("point has dimension {}, expected {}", x.len(), self.dim)));
        }
        Ok(DVector::from_column_slice(x))
    }

    fn f_raw(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.eps * x.iter().map(|v| v.powi(4)).sum::<f64>()
    }

    fn grad_raw(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + x.map(|v| 4.0 * self.eps * v.powi(3))
    }

    fn hess_raw(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = self.q.clone();
        for i in 0..self.dim {
            h[(i, i)] += 12.0 * self.eps * x[i] * x[i];
        }
        h
    }

    fn g_raw(&self, x: &DVector<f64>) -> f64 {
        match &self.g {
            None => self.f_raw(x),
            Some(p) => 0.5 * x.dot(&(p * x)),
        }
    }

    fn g_grad_raw(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.g {
            None => self.grad_raw(x),
            Some(p) => p * x,
        }
    }

    pub fn f(&self, x: &[f64]) -> Result<f64> {
        Ok(self.f_raw(&self.vec(x)?))
    }

    pub fn grad_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.grad_raw(&self.vec(x)?).as_slice().to_vec())
    }

    pub fn g(&self, x: &[f64]) -> Result<f64> {
        Ok(self.g_raw(&self.vec(x)?))
    }
}

/// `∇F·∇²F∇F + ρ∇F·∇G` at `x`.
pub fn condition_margin(problem: &FiniteDimProblem, x: &[f64]) -> Result<f64> {
    let x = problem.vec(x)?;
    let gf = problem.grad_raw(&x);
    let h = problem.hess_raw(&x);
    Ok(gf.dot(&(&h * &gf)) + problem.rho * gf.dot(&problem.g_grad_raw(&x)))
}

/// `|∇F(x)|²/(2ρ) + G(x) − G(x*)`; fails when the convexity condition does
/// not hold at `x`.
pub fn convexity_inequality_margin(problem: &FiniteDimProblem, x: &[f64]) -> Result<f64> {
    let cond = condition_margin(problem, x)?;
    let v = problem.vec(x)?;
    let gf = problem.grad_raw(&v);
    let scale = gf.norm_squared() * (problem.hess_raw(&v).norm() + problem.rho);
    if cond < -1e-12 * scale {
        return Err(Error::ConditionViolated { margin: cond });
    }
    let gstar = problem.g_raw(&DVector::from_vec(problem.minimizer()));
    Ok(gf.norm_squared() / (2.0 * problem.rho) + problem.g_raw(&v) - gstar)
}

/// Classical RK4 for `Ṡ = −∇F(S)` up to time `T`, recording every step.
pub fn fd_flow(problem: &FiniteDimProblem, x0: &[f64], t_end: f64, dt: f64) -> Result<FlowTrace> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("T = {t_end} must be at least dt = {dt}")));
    }
    let mut x = problem.vec(x0)?;
    let fstar = problem.f_raw(&DVector::from_vec(problem.minimizer()));
    let mut trace = FlowTrace::default();
    let record = |trace: &mut FlowTrace, t: f64, x: &DVector<f64>| {
        let f = problem.f_raw(x);
        trace.push(t, f, f - fstar, problem.grad_raw(x).norm_squared(), problem.g_raw(x), x.amax(), None);
    };
    record(&mut trace, 0.0, &x);
    let steps = (t_end / dt).round().max(1.0) as usize;
    for k in 1..=steps {
        let k1 = -problem.grad_raw(&x);
        let k2 = -problem.grad_raw(&(&x + &k1 * (0.5 * dt)));
        let k3 = -problem.grad_raw(&(&x + &k2 * (0.5 * dt)));
        let k4 = -problem.grad_raw(&(&x + &k3 * dt));
        let next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let before = problem.f_raw(&x);
        let after = problem.f_raw(&next);
        if after - before > 1e-10 * before.abs() {
            return Err(Error::StepUnstable { t: k as f64 * dt, before, after });
        }
        x = next;
        record(&mut trace, k as f64 * dt, &x);
    }
    trace.steps = steps;
    trace.converged = trace.grad_norm_sq.last().is_some_and(|g| g.sqrt() <= 1e-8);
    trace.finish();
    Ok(trace)
}

/// Least-squares slope of `log y` against `t` over the points with `y > 0`.
pub fn log_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Vec<Vec<f64>> {
        (0..v.len()).map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect()).collect()
    }

    #[test]
    fn validation() {
        assert!(FiniteDimProblem::isotropic(0, 1.0).is_err());
        assert!(FiniteDimProblem::isotropic(2, 0.0).is_err());
        let q = diag(&[1.0, 3.0]);
        assert!(FiniteDimProblem::new(2, Family::Quadratic { q: q.clone() }, GChoice::SameAsF, 1.5).is_err());
        assert!(FiniteDimProblem::new(2, Family::Quadratic { q: q.clone() }, GChoice::SameAsF, 1.0).is_ok());
        let asym = vec![vec![2.0, 1.0], vec![0.0, 2.0]];
        assert!(FiniteDimProblem::new(2, Family::Quadratic { q: asym }, GChoice::SameAsF, 1.0).is_err());
        assert!(FiniteDimProblem::new(2, Family::QuarticPerturbed { q, eps: -1.0 }, GChoice::SameAsF, 1.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let q = vec![vec![2.0, 0.3, 0.0], vec![0.3, 2.5, -0.2], vec![0.0, -0.2, 3.0]];
        let p = FiniteDimProblem::new(3, Family::QuarticPerturbed { q, eps: 0.1 }, GChoice::SameAsF, 1.0).unwrap();
        let x = [0.4, -0.7, 1.1];
        let g = p.grad_f(&x).unwrap();
        for j in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (p.f(&xp).unwrap() - p.f(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "{fd} vs {}", g[j]);
        }
    }

    #[test]
    fn stationary_at_minimizer() {
        let p = FiniteDimProblem::isotropic(3, 2.0).unwrap();
        let tr = fd_flow(&p, &[0.0; 3], 1.0, 0.1).unwrap();
        assert!(tr.grad_norm_sq.iter().all(|&g| g == 0.0));
        assert!(tr.entropy.iter().all(|&f| f == 0.0));
        assert_eq!(condition_margin(&p, &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(convexity_inequality_margin(&p, &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn isotropic_margin_is_rho_x_squared() {
        let p = FiniteDimProblem::isotropic(2, 0.5).unwrap();
        let m = convexity_inequality_margin(&p, &[1.0, -2.0]).unwrap();
        assert!((m - 0.5 * 5.0).abs() < 1e-15);
    }

    #[test]
    fn violated_condition_is_reported() {
        // ∇F·∇G = xᵀQPx is negative at (1, ½), and a large ρ lets it dominate.
        let make = |rho| {
            FiniteDimProblem::new(
                2,
                Family::Quadratic { q: diag(&[1.0, 10.0]) },
                GChoice::Quadratic { p: vec![vec![1.0, -0.9], vec![-0.9, 1.0]] },
                rho,
            )
            .unwrap()
        };
        let x = [1.0, 0.5];
        assert!((condition_margin(&make(1.0), &x).unwrap() - (251.0 - 1.45)).abs() < 1e-12);
        assert!(convexity_inequality_margin(&make(1.0), &x).is_ok());
        assert!(matches!(
            convexity_inequality_margin(&make(200.0), &x),
            Err(Error::ConditionViolated { .. })
        ));
        assert!(FiniteDimProblem::new(
            1,
            Family::Quadratic { q: vec![vec![1.0]] },
            GChoice::Quadratic { p: vec![vec![-1.0]] },
            1.0
        )
        .is_err());
    }

    #[test]
    fn flow_argument_checks() {
        let p = FiniteDimProblem::isotropic(2, 1.0).unwrap();
        assert!(fd_flow(&p, &[1.0, 1.0], 1.0, 0.0).is_err());
        assert!(fd_flow(&p, &[1.0, 1.0], 0.01, 0.1).is_err());
        assert!(fd_flow(&p, &[1.0], 1.0, 0.1).is_err());
    }

    #[test]
    fn log_slope_of_exponential() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
        assert!((log_slope(&t, &y).unwrap() + 1.7).abs() < 1e-12);
        assert!(log_slope(&[1.0], &[1.0]).is_none());
    }
}

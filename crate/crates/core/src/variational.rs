//! The subcritical minimization problem
//! `I(A) = inf { A‖∇v‖₂² + ‖v‖₂² : ‖v‖_q = 1 }`, its Euler–Lagrange and
//! pressure equations, the Γ₂ integral identity and the rigidity scan.
//!
//! The discrete energy is `A·E_D(v) + Σ w_i v_i²` with `E_D` the flux-form
//! Dirichlet energy of the space, so its exact discrete gradient is
//! `2(−A L_c v + v)` and the Euler–Lagrange residual can be driven to
//! roundoff. Descent runs in the `H¹_A` metric `⟨u, v⟩ = Σ w u (I − A L_c) v`,
//! which makes each step one tridiagonal solve and keeps the iteration count
//! independent of the grid.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model_space::{ModelSpace, ScalarField, SpaceKind};
use crate::sobolev::{critical_exponent, lq_norm};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeOptions {
    /// Stop when `sup |−A L_c v + v − I v^{q−1}| < tol · (1 + I)`.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Backtracking factor.
    pub armijo_factor: f64,
    /// Sufficient-decrease constant in the Armijo test.
    pub sufficient_decrease: f64,
    pub record_history: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-9,
            max_iter: 200_000,
            initial_step: 1.0,
            armijo_factor: 0.5,
            sufficient_decrease: 1e-4,
            record_history: false,
        }
    }
}

/// Outcome of [`minimize_subcritical`].
#[derive(Debug, Clone)]
pub struct MinimizerReport {
    pub a: f64,
    pub q: f64,
    pub d_prime: f64,
    pub lambda: f64,
    pub c: f64,
    /// Normalized minimizer, `‖v‖_q = 1`, `v ≥ 0`.
    pub minimizer: ScalarField,
    /// `I^{1/(q−2)} v`, which solves `−A L v + v = v^{q−1}`.
    pub el_solution: ScalarField,
    pub i_value: f64,
    pub el_residual_norm: f64,
    pub constancy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted step (empty unless requested).
    pub energy_history: Vec<f64>,
    /// Largest `|‖v‖_q − 1|` seen after any projection.
    pub max_constraint_drift: f64,
}

/// `d′ = 2q/(q−2)`.
pub fn dual_dimension(q: f64) -> f64 {
    2.0 * q / (q - 2.0)
}

/// `A*(d′) = 4(d′−1)/(d′(d′−2)ρ)`.
pub fn rigidity_threshold(d_prime: f64, rho: f64) -> f64 {
    4.0 * (d_prime - 1.0) / (d_prime * (d_prime - 2.0) * rho)
}

fn check_subcritical(space: &ModelSpace, q: f64) -> Result<()> {
    let crit = critical_exponent(space.n());
    if !(q > 2.0) {
        return Err(Error::InvalidExponent { q, reason: "q must exceed 2" });
    }
    if q >= crit * (1.0 - 1e-12) {
        return Err(Error::InvalidExponent { q, reason: "q must be strictly below 2n/(n-2)" });
    }
    Ok(())
}

/// Solves `(I − A L_c) z = rhs`.
fn solve_shifted(space: &ModelSpace, a: f64, rhs: &[f64]) -> Vec<f64> {
    let (down, up) = space.conservative_coefficients();
    let n = rhs.len();
    let sub: Vec<f64> = down.iter().map(|d| -a * d).collect();
    let sup: Vec<f64> = up.iter().map(|u| -a * u).collect();
    let diag: Vec<f64> = (0..n).map(|i| 1.0 + a * (down[i] + up[i])).collect();
    match space.kind() {
        SpaceKind::Circle => solve_cyclic(&sub, &diag, &sup, rhs),
        _ => solve_tridiagonal(&sub, &diag, &sup, rhs),
    }
}

/// Thomas algorithm; `sub[0]` and `sup[n−1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Periodic tridiagonal solve by Sherman–Morrison; `sub[0]` couples node 0
/// to node n−1 and `sup[n−1]` couples node n−1 to node 0.
fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &b, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &b, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

struct Problem<'a> {
    space: &'a ModelSpace,
    a: f64,
    q: f64,
}

impl Problem<'_> {
    fn energy(&self, v: &[f64]) -> f64 {
        let mass: f64 = self.space.quad_weights().iter().zip(v).map(|(w, x)| w * x * x).sum();
        self.a * self.space.dirichlet_energy_values(v) + mass
    }

    fn lq(&self, v: &[f64]) -> f64 {
        let s: f64 = self.space.quad_weights().iter().zip(v).map(|(w, x)| w * x.abs().powf(self.q)).sum();
        s.powf(1.0 / self.q)
    }

    /// `|u|` rescaled onto the unit `L^q` sphere.
    fn project(&self, u: &[f64]) -> Vec<f64> {
        let abs: Vec<f64> = u.iter().map(|x| x.abs()).collect();
        let norm = self.lq(&abs);
        abs.iter().map(|x| x / norm).collect()
    }

    /// `−A L_c v + v − μ v^{q−1}`.
    fn el_residual(&self, v: &[f64], mu: f64) -> Vec<f64> {
        let lv = self.space.l_conservative_values(v);
        v.iter()
            .zip(&lv)
            .map(|(&x, &l)| -self.a * l + x - mu * x.powf(self.q - 1.0))
            .collect()
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn constancy(space: &ModelSpace, v: &[f64]) -> f64 {
    let mean = space.integrate_values(v);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / mean
}

/// Projected descent for the subcritical minimization problem.
pub fn minimize_subcritical(
    space: &ModelSpace,
    a: f64,
    q: f64,
    init: &ScalarField,
    opts: &MinimizeOptions,
) -> Result<MinimizerReport> {
    check_subcritical(space, q)?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("A = {a} must be positive")));
    }
    space.check(init)?;
    if !(init.sup_norm() > 0.0) {
        return Err(Error::InvalidParameter("initial guess vanishes identically".into()));
    }
    let prob = Problem { space, a, q };
    let weights = space.quad_weights();

    let mut v = prob.project(init.values());
    let mut energy = prob.energy(&v);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(energy);
    }
    let mut max_drift = (prob.lq(&v) - 1.0).abs();
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;

    while iterations <= opts.max_iter {
        residual = sup(&prob.el_residual(&v, energy));
        if residual < opts.tol * (1.0 + energy.abs()) {
            converged = true;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        iterations += 1;

        let vq1: Vec<f64> = v.iter().map(|x| x.powf(q - 1.0)).collect();
        let z = solve_shifted(space, a, &vq1);
        let denom: f64 = weights.iter().zip(z.iter().zip(&vq1)).map(|(w, (a, b))| w * a * b).sum();
        let dir: Vec<f64> = v.iter().zip(&z).map(|(x, zi)| x - zi / denom).collect();
        // ⟨p, p⟩ in the H¹_A metric equals I(v) − 1/denom.
        let slope = (energy - 1.0 / denom).max(0.0);

        // Energy differences below this are roundoff; without the slack the
        // Armijo test stalls once the residual nears the tolerance.
        let noise = 1e-14 * energy.abs();
        let mut step = opts.initial_step;
        let mut accepted = None;
        while step > 1e-12 {
            let trial: Vec<f64> = v.iter().zip(&dir).map(|(x, p)| x - step * p).collect();
            let cand = prob.project(&trial);
            let e = prob.energy(&cand);
            if e <= energy - opts.sufficient_decrease * step * 2.0 * slope + noise {
                accepted = Some((cand, e));
                break;
            }
            step *= opts.armijo_factor;
        }
        match accepted {
            Some((cand, e)) => {
                v = cand;
                energy = e;
                max_drift = max_drift.max((prob.lq(&v) - 1.0).abs());
                if opts.record_history {
                    history.push(energy);
                }
            }
            None => {
                // No representable decrease left; accept the current point
                // if it already meets a slightly relaxed residual test.
                converged = residual < 10.0 * opts.tol * (1.0 + energy.abs());
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, residual });
    }

    let scale = energy.powf(1.0 / (q - 2.0));
    let el: Vec<f64> = v.iter().map(|x| scale * x).collect();
    let el_residual_norm = sup(&prob.el_residual(&el, 1.0));
    let d_prime = dual_dimension(q);
    let lambda = (q - 2.0) / (2.0 * a);
    Ok(MinimizerReport {
        a,
        q,
        d_prime,
        lambda,
        c: 2.0 * lambda * (d_prime - 1.0),
        constancy: constancy(space, &v),
        minimizer: space.wrap(v),
        el_solution: space.wrap(el),
        i_value: energy,
        el_residual_norm,
        iterations,
        converged,
        energy_history: history,
        max_constraint_drift: max_drift,
    })
}

/// `Φ = v^{−(q−2)/2}`.
pub fn pressure_transform(v: &ScalarField, q: f64) -> Result<ScalarField> {
    v.require_positive()?;
    if !(q > 2.0) {
        return Err(Error::InvalidExponent { q, reason: "q must exceed 2" });
    }
    let e = -(q - 2.0) / 2.0;
    Ok(v.map(|x| x.powf(e)))
}

/// Inverse of [`pressure_transform`]: `v = Φ^{−2/(q−2)}`.
pub fn inverse_pressure(phi: &ScalarField, q: f64) -> Result<ScalarField> {
    phi.require_positive()?;
    let e = -2.0 / (q - 2.0);
    Ok(phi.map(|x| x.powf(e)))
}

/// `sup |Φ LΦ − (d′/2) Γ(Φ) + λ(Φ² − 1)|`.
pub fn pressure_pde_residual(space: &ModelSpace, phi: &ScalarField, d_prime: f64, lambda: f64) -> Result<f64> {
    space.check(phi)?;
    phi.require_positive()?;
    let p = phi.values();
    let lp = space.l_values(p);
    let g = space.gamma_values(p, p);
    Ok((0..p.len())
        .map(|i| (p[i] * lp[i] - 0.5 * d_prime * g[i] + lambda * (p[i] * p[i] - 1.0)).abs())
        .fold(0.0, f64::max))
}

/// Value and natural scale of `∫(Γ₂(Φ) − (LΦ)²/d′ − cΓ(Φ)/d′) Φ^{1−d′} dν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityBalance {
    pub value: f64,
    /// `∫(|Γ₂(Φ)| + (LΦ)²/d′ + c Γ(Φ)/d′) Φ^{1−d′} dν`.
    pub scale: f64,
}

impl IdentityBalance {
    /// `|value| / scale`, with the scale floored at `1e−10` so that constant
    /// fields (where both vanish up to roundoff) report a roundoff-sized ratio.
    pub fn relative(&self) -> f64 {
        self.value.abs() / self.scale.max(1e-10)
    }
}

pub fn gamma2_identity(space: &ModelSpace, phi: &ScalarField, d_prime: f64, c: f64) -> Result<IdentityBalance> {
    space.check(phi)?;
    phi.require_positive()?;
    if !(d_prime > 2.0) {
        return Err(Error::InvalidParameter(format!("d' = {d_prime} must exceed 2")));
    }
    let p = phi.values();
    let g = space.gamma_values(p, p);
    let g2 = space.gamma2_values(p);
    let lp = space.l_values(p);
    let mut value = 0.0;
    let mut scale = 0.0;
    for i in 0..p.len() {
        let w = space.quad_weights()[i] * p[i].powf(1.0 - d_prime);
        let lsq = lp[i] * lp[i] / d_prime;
        let cg = c * g[i] / d_prime;
        value += w * (g2[i] - lsq - cg);
        scale += w * (g2[i].abs() + lsq + cg.abs());
    }
    Ok(IdentityBalance { value, scale })
}

/// `|∫(Γ₂(Φ) − (LΦ)²/d′ − cΓ(Φ)/d′) Φ^{1−d′} dν|`.
pub fn gamma2_identity_residual(space: &ModelSpace, phi: &ScalarField, d_prime: f64, c: f64) -> Result<f64> {
    Ok(gamma2_identity(space, phi, d_prime, c)?.value.abs())
}

/// Nonlinearity `f` in `−A L v + v = v^{q−1} f(v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Constant,
    /// `f(v) = (1 + v)^{−s}`, `s ≥ 0`.
    InversePower { s: f64 },
}

impl Nonlinearity {
    pub fn value(&self, v: f64) -> f64 {
        match *self {
            Nonlinearity::Constant => 1.0,
            Nonlinearity::InversePower { s } => (1.0 + v).powf(-s),
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        match *self {
            Nonlinearity::Constant => 0.0,
            Nonlinearity::InversePower { s } => -s * (1.0 + v).powf(-s - 1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Nonlinearity::InversePower { s } if !(s >= 0.0) || !s.is_finite() => {
                Err(Error::InvalidParameter(format!("s = {s} must be nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

/// The three integrals of the rigidity identity, weighted by `Φ^{1−d′}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RigidityTerms {
    /// `∫(Γ₂(Φ) − ρΓ(Φ) − (LΦ)²/d′) Φ^{1−d′} dν`, nonnegative under CD(ρ, n).
    pub curvature: f64,
    /// `(ρ − c/d′) ∫Γ(Φ) Φ^{1−d′} dν`.
    pub threshold: f64,
    /// `λ ∫ f′(v) Φ² Γ(v, Φ^{1−d′}) dν`, nonnegative for nonincreasing f.
    pub nonlinearity: f64,
}

pub fn rigidity_terms(space: &ModelSpace, report: &MinimizerReport, f: &Nonlinearity) -> Result<RigidityTerms> {
    let v = &report.el_solution;
    let phi = pressure_transform(v, report.q)?;
    let p = phi.values();
    let dp = report.d_prime;
    let rho = space.rho();
    let g = space.gamma_values(p, p);
    let g2 = space.gamma2_values(p);
    let lp = space.l_values(p);
    let weight: Vec<f64> = p.iter().map(|x| x.powf(1.0 - dp)).collect();
    let cross = space.gamma_values(v.values(), &weight);
    let w = space.quad_weights();
    let mut curvature = 0.0;
    let mut grad = 0.0;
    let mut nonlinearity = 0.0;
    for i in 0..p.len() {
        curvature += w[i] * (g2[i] - rho * g[i] - lp[i] * lp[i] / dp) * weight[i];
        grad += w[i] * g[i] * weight[i];
        nonlinearity += w[i] * f.derivative(v.values()[i]) * p[i] * p[i] * cross[i];
    }
    Ok(RigidityTerms {
        curvature,
        threshold: (rho - report.c / dp) * grad,
        nonlinearity: report.lambda * nonlinearity,
    })
}

/// One row of a rigidity scan.
#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub report: MinimizerReport,
    pub a_over_astar: f64,
    pub identity: IdentityBalance,
    pub terms: RigidityTerms,
}

/// Minimizes at every `A` in `a_values` (ascending) and evaluates the
/// rigidity identity at each minimizer.
pub fn rigidity_scan(
    space: &ModelSpace,
    q: f64,
    a_values: &[f64],
    f: &Nonlinearity,
    init: &ScalarField,
    opts: &MinimizeOptions,
) -> Result<Vec<ScanEntry>> {
    check_subcritical(space, q)?;
    f.validate()?;
    if space.kind() == SpaceKind::Circle {
        return Err(Error::UnsupportedKind { op: "rigidity_scan", kind: space.kind() });
    }
    if a_values.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidParameter("A values must be strictly ascending".into()));
    }
    let astar = rigidity_threshold(dual_dimension(q), space.rho());
    a_values
        .iter()
        .map(|&a| {
            let report = minimize_subcritical(space, a, q, init, opts)?;
            let phi = pressure_transform(&report.el_solution, q)?;
            let identity = gamma2_identity(space, &phi, report.d_prime, report.c)?;
            let terms = rigidity_terms(space, &report, f)?;
            Ok(ScanEntry { a_over_astar: a / astar, report, identity, terms })
        })
        .collect()
}

/// Brackets the transition from nonconstant to constant minimizers along an
/// ascending scan: the last `A` whose minimizer has constancy above
/// `threshold` and the first `A` after it whose minimizer is below.
pub fn constancy_bracket(entries: &[ScanEntry], threshold: f64) -> Option<(f64, f64)> {
    entries
        .windows(2)
        .rfind(|p| p[0].report.constancy > threshold && p[1].report.constancy <= threshold)
        .map(|p| (p[0].report.a, p[1].report.a))
}

/// `‖v‖_q` of a field, exposed for report checks.
pub fn constraint_value(space: &ModelSpace, v: &ScalarField, q: f64) -> Result<f64> {
    lq_norm(space, v, q)
}

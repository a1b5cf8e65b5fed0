//! Rényi entropy `R_α(μ) = (α(α−1))⁻¹ ∫μ^α dν` on a model space, its Otto
//! gradient and Hessian, and the fast-diffusion flow it generates.
//!
//! The flow `∂_t μ = α⁻¹ L(μ^α)` is discretized in the flux form of the
//! space, which conserves mass to roundoff and makes the semi-discrete
//! entropy decay exactly. Gradient norms use the identity
//! `∫Γ(μ^{α−1}/(α−1)) μ dν = (α−½)⁻² ∫Γ(μ^{α−½}) dν`; for `α = 1 − 1/n` the
//! inner function is the Sobolev profile `μ^{(n−2)/(2n)}`, which is what ties
//! the entropy inequality to the Sobolev deficit.

use serde::Serialize;

use super::FlowTrace;
use crate::error::{Error, Result};
use crate::model_space::{ModelSpace, ScalarField, SpaceKind};

const MASS_TOL: f64 = 1e-8;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

fn check_density(space: &ModelSpace, mu: &ScalarField) -> Result<()> {
    space.check(mu)?;
    mu.require_positive()?;
    let mass = space.integrate_values(mu.values());
    if (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::NotAProbabilityDensity { mass });
    }
    Ok(())
}

fn entropy_raw(space: &ModelSpace, mu: &[f64], alpha: f64) -> f64 {
    let s: f64 = space.quad_weights().iter().zip(mu).map(|(w, m)| w * m.powf(alpha)).sum();
    s / (alpha * (alpha - 1.0))
}

/// `((1+x)^α − 1 − αx) / (α(α−1))`, accurate for small `x`.
fn excess_density(x: f64, alpha: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut coeff = 0.5;
        let mut power = x * x;
        let mut sum = 0.0;
        for k in 2..40 {
            let term = coeff * power;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coeff *= (alpha - k as f64) / (k as f64 + 1.0);
            power *= x;
        }
        sum
    } else {
        ((1.0 + x).powf(alpha) - 1.0 - alpha * x) / (alpha * (alpha - 1.0))
    }
}

fn excess_raw(space: &ModelSpace, mu: &[f64], alpha: f64) -> f64 {
    space.quad_weights().iter().zip(mu).map(|(w, m)| w * excess_density(m - 1.0, alpha)).sum()
}

fn grad_norm_raw(space: &ModelSpace, mu: &[f64], alpha: f64) -> f64 {
    let p = alpha - 0.5;
    if p.abs() < 1e-12 {
        let g: Vec<f64> = mu.iter().map(|m| m.ln()).collect();
        return space.integrate_values(&space.gamma_values(&g, &g));
    }
    let f: Vec<f64> = mu.iter().map(|m| m.powf(p)).collect();
    space.integrate_values(&space.gamma_values(&f, &f)) / (p * p)
}

/// `R_α(μ) = (α(α−1))⁻¹ ∫μ^α dν`.
pub fn renyi_entropy(space: &ModelSpace, mu: &ScalarField, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_density(space, mu)?;
    Ok(entropy_raw(space, mu.values(), alpha))
}

/// `R_α(μ) − R_α(1)` evaluated as `(α(α−1))⁻¹ ∫[μ^α − 1 − α(μ−1)] dν`,
/// which stays accurate when `μ` is close to the uniform density.
pub fn renyi_entropy_excess(space: &ModelSpace, mu: &ScalarField, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_density(space, mu)?;
    Ok(excess_raw(space, mu.values(), alpha))
}

/// Squared Otto norm of the gradient, `∫Γ(Φ) μ dν` with
/// `Φ = μ^{α−1}/(α−1)`.
pub fn renyi_grad_norm_sq(space: &ModelSpace, mu: &ScalarField, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_density(space, mu)?;
    Ok(grad_norm_raw(space, mu.values(), alpha))
}

fn hessian_raw(space: &ModelSpace, mu: &[f64], alpha: f64, phi: &[f64]) -> f64 {
    let lp = space.l_values(phi);
    let g2 = space.gamma2_values(phi);
    let s: f64 = (0..mu.len())
        .map(|i| space.quad_weights()[i] * ((alpha - 1.0) * lp[i] * lp[i] + g2[i]) * mu[i].powf(alpha))
        .sum();
    s / alpha
}

/// `α⁻¹ ∫[(α−1)(Lφ)² + Γ₂(φ)] μ^α dν`.
pub fn renyi_hessian_quadform(space: &ModelSpace, mu: &ScalarField, alpha: f64, phi: &ScalarField) -> Result<f64> {
    check_alpha(alpha)?;
    check_density(space, mu)?;
    space.check(phi)?;
    Ok(hessian_raw(space, mu.values(), alpha, phi.values()))
}

/// `Hess R_α(∇Φ, ∇Φ) − (ρ/α) ∫Γ(Φ) μ^α dν` at `Φ = μ^{α−1}/(α−1)`,
/// `α = 1 − 1/n`.
pub fn convexity_relation_margin(space: &ModelSpace, mu: &ScalarField, dim_param: f64) -> Result<f64> {
    if !(dim_param > 1.0) || !dim_param.is_finite() {
        return Err(Error::InvalidParameter(format!("dimension parameter {dim_param} must exceed 1")));
    }
    let alpha = 1.0 - 1.0 / dim_param;
    check_density(space, mu)?;
    let m = mu.values();
    let phi: Vec<f64> = m.iter().map(|x| x.powf(alpha - 1.0) / (alpha - 1.0)).collect();
    let gamma = space.gamma_values(&phi, &phi);
    let weighted: f64 = (0..m.len()).map(|i| space.quad_weights()[i] * gamma[i] * m[i].powf(alpha)).sum();
    Ok(hessian_raw(space, m, alpha, &phi) - space.rho() / alpha * weighted)
}

/// Both sides of `−R_β(1) ≤ (α/(2ρ)) |grad R_α|²_μ − R_β(μ)` with
/// `α = 1 − 1/n`, `β = 1 − 2/n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyInequality {
    pub alpha: f64,
    pub beta: f64,
    pub n: f64,
    pub rho: f64,
    pub grad_norm_sq: f64,
    /// `(α/(2ρ)) |grad R_α|²_μ`.
    pub grad_term: f64,
    pub r_beta: f64,
    pub r_beta_uniform: f64,
    pub margin: f64,
    /// `grad_term + |R_β(μ) − R_β(1)|`.
    pub scale: f64,
}

pub fn entropy_inequality(space: &ModelSpace, mu: &ScalarField) -> Result<EntropyInequality> {
    if space.kind() == SpaceKind::Circle {
        return Err(Error::UnsupportedKind { op: "entropy_inequality", kind: space.kind() });
    }
    let n = space.n();
    let rho = space.rho();
    let alpha = 1.0 - 1.0 / n;
    let beta = 1.0 - 2.0 / n;
    check_density(space, mu)?;
    let grad_norm_sq = grad_norm_raw(space, mu.values(), alpha);
    let grad_term = alpha / (2.0 * rho) * grad_norm_sq;
    let r_beta = entropy_raw(space, mu.values(), beta);
    let r_beta_uniform = 1.0 / (beta * (beta - 1.0));
    Ok(EntropyInequality {
        alpha,
        beta,
        n,
        rho,
        grad_norm_sq,
        grad_term,
        r_beta,
        r_beta_uniform,
        margin: grad_term - r_beta + r_beta_uniform,
        scale: grad_term + (r_beta - r_beta_uniform).abs(),
    })
}

pub fn entropy_inequality_margin(space: &ModelSpace, mu: &ScalarField) -> Result<f64> {
    Ok(entropy_inequality(space, mu)?.margin)
}

/// `div_ν(g ∇ψ) = g Lψ + Γ(g, ψ)` by centered differences.
fn weighted_divergence(space: &ModelSpace, g: &[f64], psi: &[f64]) -> Vec<f64> {
    let lpsi = space.l_values(psi);
    let cross = space.gamma_values(g, psi);
    (0..g.len()).map(|i| g[i] * lpsi[i] + cross[i]).collect()
}

/// Second derivative of `R_α` at `s = 0` along the transport path
/// `∂_s μ + div(μ∇φ_s) = 0`, `∂_s φ + ½Γ(φ) = 0`, by central differences
/// with step `ds`.
///
/// The path is expanded to second order in `s`,
/// `μ_s = μ − s div(μ∇φ) + (s²/2)[div(div(μ∇φ)∇φ) + div(μ∇(½Γ(φ)))]`,
/// which is all a second difference can see.
pub fn hessian_along_transport_path(
    space: &ModelSpace,
    mu: &ScalarField,
    alpha: f64,
    phi: &ScalarField,
    ds: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_density(space, mu)?;
    space.check(phi)?;
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(Error::InvalidParameter(format!("ds = {ds} must be positive")));
    }
    let m = mu.values();
    let p = phi.values();
    let flux = weighted_divergence(space, m, p);
    let half_gamma: Vec<f64> = space.gamma_values(p, p).iter().map(|g| 0.5 * g).collect();
    let a = weighted_divergence(space, &flux, p);
    let b = weighted_divergence(space, m, &half_gamma);
    let at = |s: f64| -> Result<f64> {
        let path: Vec<f64> = (0..m.len()).map(|i| m[i] - s * flux[i] + 0.5 * s * s * (a[i] + b[i])).collect();
        let min = path.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NonPositiveField { min });
        }
        Ok(entropy_raw(space, &path, alpha))
    };
    Ok((at(ds)? - 2.0 * at(0.0)? + at(-ds)?) / (ds * ds))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastDiffusionOptions {
    /// Step bound `cfl · h² / max μ^{α−1}`.
    pub cfl: f64,
    /// Step bound `stability / (‖L_c‖ · max μ^{α−1})`, with `‖L_c‖` the
    /// Gershgorin bound; keeps RK4 stable in the pole cells, where the flux
    /// form is stiffer than `4/h²`.
    pub stability: f64,
    pub floor: f64,
    /// Stop once `|grad R_α|²_μ` falls below this at a record.
    pub stop_grad_norm_sq: f64,
    /// Target number of records over `[0, T]`.
    pub records: usize,
    pub diss_tol: f64,
}

impl Default for FastDiffusionOptions {
    fn default() -> Self {
        FastDiffusionOptions {
            cfl: 0.4,
            stability: 2.5,
            floor: 1e-8,
            stop_grad_norm_sq: 1e-12,
            records: 1000,
            diss_tol: 1e-3,
        }
    }
}

fn rhs(space: &ModelSpace, mu: &[f64], alpha: f64, out: &mut [f64]) {
    let pow: Vec<f64> = mu.iter().map(|m| m.max(0.0).powf(alpha)).collect();
    space.l_conservative_into(&pow, out);
    for o in out.iter_mut() {
        *o /= alpha;
    }
}

fn rk4_step(space: &ModelSpace, mu: &[f64], alpha: f64, dt: f64) -> Vec<f64> {
    let n = mu.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs(space, mu, alpha, &mut k1);
    for i in 0..n {
        tmp[i] = mu[i] + 0.5 * dt * k1[i];
    }
    rhs(space, &tmp, alpha, &mut k2);
    for i in 0..n {
        tmp[i] = mu[i] + 0.5 * dt * k2[i];
    }
    rhs(space, &tmp, alpha, &mut k3);
    for i in 0..n {
        tmp[i] = mu[i] + dt * k3[i];
    }
    rhs(space, &tmp, alpha, &mut k4);
    (0..n).map(|i| mu[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// One classical RK4 step of size `dt` for `∂_t μ = α⁻¹ L_c(μ^α)`.
pub fn fast_diffusion_step(space: &ModelSpace, mu: &ScalarField, alpha: f64, dt: f64) -> Result<ScalarField> {
    check_alpha(alpha)?;
    space.check(mu)?;
    mu.require_positive()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    Ok(space.wrap(rk4_step(space, mu.values(), alpha, dt)))
}

fn stable_dt(space: &ModelSpace, mu: &[f64], alpha: f64, opts: &FastDiffusionOptions) -> f64 {
    let min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let mobility = min.powf(alpha - 1.0);
    let h = space.spacing();
    (opts.cfl * h * h / mobility).min(opts.stability / (space.conservative_spectral_bound() * mobility))
}

/// Integrates the fast-diffusion equation on `[0, T]` by explicit RK4.
pub fn fast_diffusion_flow(
    space: &ModelSpace,
    mu0: &ScalarField,
    alpha: f64,
    t_end: f64,
    opts: &FastDiffusionOptions,
) -> Result<FlowTrace> {
    check_alpha(alpha)?;
    if alpha >= 1.0 {
        return Err(Error::InvalidAlpha(alpha));
    }
    check_density(space, mu0)?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("T = {t_end} must be positive")));
    }
    if opts.records == 0 || !(opts.cfl > 0.0) || !(opts.stability > 0.0) {
        return Err(Error::InvalidParameter("records, cfl and stability must be positive".into()));
    }
    let beta = 2.0 * alpha - 1.0;
    let mut trace = FlowTrace::default();
    let record = |trace: &mut FlowTrace, t: f64, mu: &[f64]| -> f64 {
        let grad = grad_norm_raw(space, mu, alpha);
        let companion = if beta == 0.0 { f64::NAN } else { entropy_raw(space, mu, beta) };
        let dist = mu.iter().fold(0.0_f64, |m, x| m.max((x - 1.0).abs()));
        trace.push(
            t,
            entropy_raw(space, mu, alpha),
            excess_raw(space, mu, alpha),
            grad,
            companion,
            dist,
            Some(space.integrate_values(mu)),
        );
        grad
    };

    let mut mu = mu0.values().to_vec();
    let mut t = 0.0;
    let mut grad = record(&mut trace, t, &mu);
    let stride = (t_end / (opts.records as f64 * stable_dt(space, &mu, alpha, opts))).ceil().max(1.0) as usize;
    let mut steps = 0;
    let mut excess = excess_raw(space, &mu, alpha);
    let mut converged = grad < opts.stop_grad_norm_sq;
    while !converged && t < t_end {
        let dt = stable_dt(space, &mu, alpha, opts).min(t_end - t);
        let next = rk4_step(space, &mu, alpha, dt);
        t = if t_end - t <= dt { t_end } else { t + dt };
        steps += 1;
        let min = next.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= opts.floor) {
            return Err(Error::PositivityLost { t, min });
        }
        let next_excess = excess_raw(space, &next, alpha);
        if next_excess > excess + 1e-10 * excess.abs() + 1e-300 {
            return Err(Error::StepUnstable { t, before: excess, after: next_excess });
        }
        mu = next;
        excess = next_excess;
        if steps % stride == 0 || t >= t_end {
            grad = record(&mut trace, t, &mu);
            converged = grad < opts.stop_grad_norm_sq;
        }
    }
    if trace.times.last() != Some(&t) {
        grad = record(&mut trace, t, &mu);
        converged = grad < opts.stop_grad_norm_sq;
    }
    trace.steps = steps;
    trace.converged = converged;
    trace.finish();
    Ok(trace)
}

/// JSON run summary of a fast-diffusion trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub alpha: f64,
    pub beta: f64,
    pub n: f64,
    pub rho: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub steps: usize,
    pub converged: bool,
    pub final_sup_dist: f64,
}

impl FlowSummary {
    pub fn new(space: &ModelSpace, alpha: f64, t_end: f64, trace: &FlowTrace) -> Self {
        FlowSummary {
            alpha,
            beta: 2.0 * alpha - 1.0,
            n: space.n(),
            rho: space.rho(),
            t_end,
            steps: trace.steps,
            converged: trace.converged,
            final_sup_dist: trace.sup_dist.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere3(n: usize) -> ModelSpace {
        ModelSpace::build(SpaceKind::SphereRadial, 3, 3.0, n).unwrap()
    }

    fn normalized(space: &ModelSpace, f: impl Fn(f64) -> f64) -> ScalarField {
        let raw = space.field_from_fn(f);
        let z = space.integrate(&raw).unwrap();
        raw.scale(1.0 / z)
    }

    #[test]
    fn uniform_density_values() {
        let s = sphere3(64);
        let one = s.constant(1.0);
        assert!((renyi_entropy(&s, &one, 2.0 / 3.0).unwrap() + 4.5).abs() < 1e-13);
        assert!((renyi_entropy(&s, &one, 2.0).unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(renyi_grad_norm_sq(&s, &one, 2.0 / 3.0).unwrap(), 0.0);
        assert_eq!(renyi_entropy_excess(&s, &one, 2.0 / 3.0).unwrap(), 0.0);
        assert_eq!(convexity_relation_margin(&s, &one, 3.0).unwrap(), 0.0);
        assert!(entropy_inequality_margin(&s, &one).unwrap().abs() < 1e-14);
    }

    #[test]
    fn argument_validation() {
        let s = sphere3(64);
        let one = s.constant(1.0);
        assert!(matches!(renyi_entropy(&s, &one, 1.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(renyi_entropy(&s, &one, 0.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(renyi_entropy(&s, &s.constant(2.0), 0.5), Err(Error::NotAProbabilityDensity { .. })));
        assert!(matches!(renyi_entropy(&s, &s.constant(0.0), 0.5), Err(Error::NonPositiveField { .. })));
        assert!(fast_diffusion_flow(&s, &one, 1.5, 1.0, &FastDiffusionOptions::default()).is_err());
        let c = ModelSpace::build(SpaceKind::Circle, 1, 3.0, 64).unwrap();
        assert!(matches!(entropy_inequality(&c, &c.constant(1.0)), Err(Error::UnsupportedKind { .. })));
    }

    #[test]
    fn excess_series_matches_closed_forms() {
        for &x in &[-0.099, -0.03, 1e-4, -1e-7, 0.05, 0.0999] {
            // α = 2: exactly x²/2.
            assert!((excess_density(x, 2.0) - 0.5 * x * x).abs() <= 1e-15 * x * x);
            // α = ½: −4(√(1+x) − 1 − x/2) = 2x²/(√(1+x) + 1)².
            let closed = 2.0 * x * x / ((1.0 + x).sqrt() + 1.0).powi(2);
            assert!((excess_density(x, 0.5) - closed).abs() <= 1e-14 * closed, "{x}");
        }
        // Away from zero the direct formula is accurate and must agree.
        for &alpha in &[0.5, 2.0 / 3.0, 0.8] {
            let x: f64 = 0.0999;
            let direct = ((1.0 + x).powf(alpha) - 1.0 - alpha * x) / (alpha * (alpha - 1.0));
            assert!((direct - excess_density(x, alpha)).abs() <= 1e-11 * direct);
        }
    }

    #[test]
    fn excess_equals_entropy_difference() {
        let s = sphere3(128);
        let mu = normalized(&s, |t| 1.0 + 0.5 * t.cos());
        let a = 2.0 / 3.0;
        let diff = renyi_entropy(&s, &mu, a).unwrap() - renyi_entropy(&s, &s.constant(1.0), a).unwrap();
        assert!((renyi_entropy_excess(&s, &mu, a).unwrap() - diff).abs() < 1e-13);
    }

    #[test]
    fn grad_norm_matches_direct_composition_to_second_order() {
        let a = 2.0 / 3.0;
        let mut errs = Vec::new();
        for &n in &[256, 512] {
            let s = sphere3(n);
            let mu = normalized(&s, |t| 1.0 + 0.5 * t.cos());
            let phi = mu.map(|m| m.powf(a - 1.0) / (a - 1.0));
            let g = s.gamma(&phi, &phi).unwrap();
            let direct = s.integrate(&g.zip_map(&mu, |x, y| x * y).unwrap()).unwrap();
            let chain = renyi_grad_norm_sq(&s, &mu, a).unwrap();
            errs.push((chain - direct).abs() / direct);
        }
        assert!(errs[1] < 1e-4 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn stationary_flow_at_equilibrium() {
        let s = sphere3(64);
        let tr = fast_diffusion_flow(&s, &s.constant(1.0), 2.0 / 3.0, 1.0, &FastDiffusionOptions::default()).unwrap();
        assert_eq!(tr.steps, 0);
        assert!(tr.converged);
        assert_eq!(tr.sup_dist, vec![0.0]);
        assert!((tr.entropy[0] + 4.5).abs() < 1e-13);
    }

    #[test]
    fn one_step_conserves_mass() {
        let s = sphere3(128);
        let mu = normalized(&s, |t| 1.0 + 0.5 * t.cos());
        let next = fast_diffusion_step(&s, &mu, 2.0 / 3.0, 1e-4).unwrap();
        assert!((s.integrate(&next).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn summary_keys() {
        let s = sphere3(64);
        let tr = fast_diffusion_flow(&s, &s.constant(1.0), 2.0 / 3.0, 1.0, &FastDiffusionOptions::default()).unwrap();
        let v = serde_json::to_value(FlowSummary::new(&s, 2.0 / 3.0, 1.0, &tr)).unwrap();
        for k in ["alpha", "beta", "n", "rho", "T", "steps", "converged", "final_sup_dist"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }
}

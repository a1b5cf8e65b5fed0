//! Sobolev norms, deficits and the sharp constants on CD(ρ, n) model spaces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model_space::{ModelSpace, ScalarField, SpaceKind};

/// Smallest admissible `β − 1` for the extremal family.
pub const EXTREMAL_BETA_MARGIN: f64 = 1e-6;

/// Both sides of the sharp Sobolev inequality for one field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevReport {
    pub q: f64,
    pub n: f64,
    pub rho: f64,
    pub lq_norm_sq: f64,
    pub l2_norm_sq: f64,
    pub grad_norm_sq: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub deficit_rel: f64,
}

/// `2n/(n−2)`.
pub fn critical_exponent(n: f64) -> f64 {
    2.0 * n / (n - 2.0)
}

/// `(∫|v|^q dν)^{1/q}`.
pub fn lq_norm(space: &ModelSpace, v: &ScalarField, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidExponent { q, reason: "q must be at least 1" });
    }
    space.check(v)?;
    let s: f64 = space
        .quad_weights()
        .iter()
        .zip(v.values())
        .map(|(w, x)| w * x.abs().powf(q))
        .sum();
    Ok(s.powf(1.0 / q))
}

/// Sobolev coefficient `(n−1)/(nρ)` and rigidity threshold
/// `A* = 4(n−1)/(n(n−2)ρ)`.
pub fn sharp_constants(n: f64, rho: f64) -> Result<(f64, f64)> {
    if !(n > 2.0) || !n.is_finite() {
        return Err(Error::InvalidParameter(format!("n = {n} must exceed 2")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be positive")));
    }
    Ok(((n - 1.0) / (n * rho), 4.0 * (n - 1.0) / (n * (n - 2.0) * rho)))
}

/// Deficit `rhs − lhs` of
/// `(‖v‖_q² − ‖v‖₂²)/(q−2) ≤ (n−1)/(nρ) ‖∇v‖₂²`, with
/// `‖∇v‖₂² = ∫Γ(v) dν`.
pub fn sobolev_deficit(space: &ModelSpace, v: &ScalarField, q: f64) -> Result<SobolevReport> {
    if space.kind() == SpaceKind::Circle {
        return Err(Error::UnsupportedKind { op: "sobolev_deficit", kind: space.kind() });
    }
    let n = space.n();
    let crit = critical_exponent(n);
    if !(q > 2.0) || q > crit * (1.0 + 1e-12) {
        return Err(Error::InvalidExponent { q, reason: "q must lie in (2, 2n/(n-2)]" });
    }
    space.check(v)?;
    let (coeff, _) = sharp_constants(n, space.rho())?;
    let vals = v.values();
    let lq_norm_sq = lq_norm(space, v, q)?.powi(2);
    let l2_norm_sq = space.integrate_values(&vals.iter().map(|x| x * x).collect::<Vec<_>>());
    let grad_norm_sq = space.integrate_values(&space.gamma_values(vals, vals));
    let lhs = (lq_norm_sq - l2_norm_sq) / (q - 2.0);
    let rhs = coeff * grad_norm_sq;
    let deficit = rhs - lhs;
    let deficit_rel = if rhs > 0.0 { deficit / rhs } else { 0.0 };
    Ok(SobolevReport {
        q,
        n,
        rho: space.rho(),
        lq_norm_sq,
        l2_norm_sq,
        grad_norm_sq,
        lhs,
        rhs,
        deficit,
        deficit_rel,
    })
}

/// `θ ↦ (β − cos θ)^{−(d−2)/2}`, the equality family on the round sphere.
pub fn extremal_field(space: &ModelSpace, beta: f64) -> Result<ScalarField> {
    if space.kind() != SpaceKind::SphereRadial {
        return Err(Error::UnsupportedKind { op: "extremal_field", kind: space.kind() });
    }
    if space.d() < 3 {
        return Err(Error::InvalidParameter(format!("extremal family needs d >= 3, got {}", space.d())));
    }
    if !(beta > 1.0 + EXTREMAL_BETA_MARGIN) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta = {beta} must exceed 1")));
    }
    let exponent = -(f64::from(space.d()) - 2.0) / 2.0;
    Ok(space.field_from_fn(|t| (beta - t.cos()).powf(exponent)))
}

//! Discretized 1-D weighted measure spaces.
//!
//! A [`ModelSpace`] is a cell-centered grid on `(0, π)` (or the full circle)
//! carrying the normalized measure `dν = e^{-W} dθ / Z` and the generator
//! `L = d²/dθ² − W′ d/dθ`. For the sphere-radial and Jacobi kinds
//! `W(θ) = −(n−1) log sin θ`, so `L f = f″ + (n−1) cot θ f′`; on the sphere
//! with `n = d` this is the radial part of the Laplace–Beltrami operator.
//!
//! Two discretizations of `L` are provided:
//!
//! * [`ModelSpace::apply_l`], centered differences with the drift evaluated
//!   analytically. This is the operator the Γ-calculus is built on.
//! * [`ModelSpace::apply_l_conservative`], the flux form generated by the
//!   discrete Dirichlet form [`ModelSpace::dirichlet_energy`]. It is exactly
//!   symmetric in the discrete `ν` inner product, which makes discrete energy
//!   minimization and mass-conserving flows possible.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible grid resolution.
pub const MIN_RESOLUTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    SphereRadial,
    Jacobi,
    Circle,
}

impl SpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceKind::SphereRadial => "sphere_radial",
            SpaceKind::Jacobi => "jacobi",
            SpaceKind::Circle => "circle",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of a model space; two spaces built from the same parameters
/// share an id, so fields can move freely between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId {
    kind: SpaceKind,
    d: u32,
    n_bits: u64,
    resolution: usize,
}

/// Grid nodes, weights and operator coefficients of a 1-D model space.
#[derive(Debug, Clone)]
pub struct ModelSpace {
    kind: SpaceKind,
    d: u32,
    n: f64,
    rho: f64,
    h: f64,
    grid: Vec<f64>,
    log_weight: Vec<f64>,
    weights: Vec<f64>,
    z: f64,
    // −W′(θ_i), evaluated analytically.
    drift: Vec<f64>,
    // Flux-form coefficients: ω_{i±½} / (w_i h²).
    flux_up: Vec<f64>,
    flux_down: Vec<f64>,
    // ω_{i+½}/h² for the face between node i and its right neighbor.
    face_stiffness: Vec<f64>,
    id: SpaceId,
}

/// Immutable field sampled on the nodes of one model space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
    space: SpaceId,
}

/// Serialized summary of a model space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub kind: SpaceKind,
    pub d: u32,
    pub n: f64,
    pub rho: f64,
    pub resolution: usize,
    #[serde(rename = "Z")]
    pub z: f64,
}

impl ModelSpace {
    /// Builds a model space of the given kind.
    ///
    /// `rho` is `d − 1` on the sphere and `n − 1` on the Jacobi model; the
    /// circle carries no positive curvature bound and gets `rho = 0`.
    pub fn build(kind: SpaceKind, d: u32, n: f64, resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidConfig(format!(
                "resolution {resolution} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidConfig("dimension d must be at least 1".into()));
        }
        if !n.is_finite() {
            return Err(Error::InvalidConfig(format!("n = {n} is not finite")));
        }
        let rho = match kind {
            SpaceKind::SphereRadial => {
                if n != f64::from(d) {
                    return Err(Error::InvalidConfig(format!(
                        "sphere_radial requires n = d (got n = {n}, d = {d})"
                    )));
                }
                if n <= 2.0 {
                    return Err(Error::InvalidConfig(format!("n = {n} must exceed 2")));
                }
                f64::from(d) - 1.0
            }
            SpaceKind::Jacobi => {
                if n <= 2.0 {
                    return Err(Error::InvalidConfig(format!("n = {n} must exceed 2")));
                }
                if n < f64::from(d) {
                    return Err(Error::InvalidConfig(format!("n = {n} is below d = {d}")));
                }
                n - 1.0
            }
            SpaceKind::Circle => {
                if n <= 0.0 {
                    return Err(Error::InvalidConfig(format!("n = {n} must be positive")));
                }
                0.0
            }
        };

        let length = match kind {
            SpaceKind::Circle => 2.0 * PI,
            _ => PI,
        };
        let h = length / resolution as f64;
        let grid: Vec<f64> = (0..resolution).map(|i| (i as f64 + 0.5) * h).collect();

        let power = n - 1.0;
        let log_weight: Vec<f64> = match kind {
            SpaceKind::Circle => vec![0.0; resolution],
            _ => grid.iter().map(|&t| -power * t.sin().ln()).collect(),
        };
        let drift: Vec<f64> = match kind {
            SpaceKind::Circle => vec![0.0; resolution],
            _ => grid.iter().map(|&t| power * t.cos() / t.sin()).collect(),
        };

        let raw: Vec<f64> = log_weight.iter().map(|&w| (-w).exp() * h).collect();
        let z: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|&r| r / z).collect();

        // Face j sits between node j and node j+1 (periodically wrapped on
        // the circle). On the interval the faces at θ = 0 and θ = π carry
        // zero weight, which is the natural Neumann closure.
        let face_weight: Vec<f64> = match kind {
            SpaceKind::Circle => vec![h / z; resolution],
            _ => (0..resolution)
                .map(|j| {
                    if j + 1 == resolution {
                        0.0
                    } else {
                        ((j + 1) as f64 * h).sin().powf(power) * h / z
                    }
                })
                .collect(),
        };
        let h2 = h * h;
        let face_stiffness: Vec<f64> = face_weight.iter().map(|&w| w / h2).collect();
        let flux_up: Vec<f64> = (0..resolution)
            .map(|i| face_weight[i] / (weights[i] * h2))
            .collect();
        let flux_down: Vec<f64> = (0..resolution)
            .map(|i| {
                let left = match (kind, i) {
                    (SpaceKind::Circle, 0) => face_weight[resolution - 1],
                    (_, 0) => 0.0,
                    _ => face_weight[i - 1],
                };
                left / (weights[i] * h2)
            })
            .collect();

        Ok(ModelSpace {
            kind,
            d,
            n,
            rho,
            h,
            grid,
            log_weight,
            weights,
            z,
            drift,
            flux_up,
            flux_down,
            face_stiffness,
            id: SpaceId { kind, d, n_bits: n.to_bits(), resolution },
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Effective dimension in CD(ρ, n).
    pub fn n(&self) -> f64 {
        self.n
    }

    /// Curvature lower bound in CD(ρ, n).
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn resolution(&self) -> usize {
        self.grid.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn log_weight(&self) -> &[f64] {
        &self.log_weight
    }

    /// Normalized quadrature weights of ν.
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalization(&self) -> f64 {
        self.z
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn summary(&self) -> SpaceSummary {
        SpaceSummary {
            kind: self.kind,
            d: self.d,
            n: self.n,
            rho: self.rho,
            resolution: self.resolution(),
            z: self.z,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// Samples `f` at every grid node.
    pub fn field_from_fn(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { values: self.grid.iter().map(|&t| f(t)).collect(), space: self.id }
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField { values: vec![c; self.resolution()], space: self.id }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != self.resolution() {
            return Err(Error::SpaceMismatch);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite field value {bad}")));
        }
        Ok(ScalarField { values, space: self.id })
    }

    pub(crate) fn wrap(&self, values: Vec<f64>) -> ScalarField {
        debug_assert_eq!(values.len(), self.resolution());
        ScalarField { values, space: self.id }
    }

    pub fn check(&self, f: &ScalarField) -> Result<()> {
        if f.space == self.id {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    #[inline]
    fn neighbors(&self, i: usize) -> (usize, usize) {
        let last = self.resolution() - 1;
        match self.kind {
            SpaceKind::Circle => {
                (if i == 0 { last } else { i - 1 }, if i == last { 0 } else { i + 1 })
            }
            // Even reflection: the ghost value equals the boundary value.
            _ => (i.saturating_sub(1), (i + 1).min(last)),
        }
    }

    /// Quadrature of `∫ f dν`.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.check(f)?;
        Ok(self.integrate_values(&f.values))
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub(crate) fn derivative_values(&self, f: &[f64]) -> Vec<f64> {
        let inv = 0.5 / self.h;
        (0..f.len())
            .map(|i| {
                let (im, ip) = self.neighbors(i);
                (f[ip] - f[im]) * inv
            })
            .collect()
    }

    pub(crate) fn second_derivative_values(&self, f: &[f64]) -> Vec<f64> {
        let inv = 1.0 / (self.h * self.h);
        (0..f.len())
            .map(|i| {
                let (im, ip) = self.neighbors(i);
                (f[ip] - 2.0 * f[i] + f[im]) * inv
            })
            .collect()
    }

    pub(crate) fn l_values(&self, f: &[f64]) -> Vec<f64> {
        let inv2 = 1.0 / (self.h * self.h);
        let inv1 = 0.5 / self.h;
        (0..f.len())
            .map(|i| {
                let (im, ip) = self.neighbors(i);
                (f[ip] - 2.0 * f[i] + f[im]) * inv2 + self.drift[i] * (f[ip] - f[im]) * inv1
            })
            .collect()
    }

    pub(crate) fn gamma_values(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let df = self.derivative_values(f);
        if std::ptr::eq(f, g) {
            return df.iter().map(|a| a * a).collect();
        }
        let dg = self.derivative_values(g);
        df.iter().zip(&dg).map(|(a, b)| a * b).collect()
    }

    pub(crate) fn gamma2_values(&self, f: &[f64]) -> Vec<f64> {
        let gf = self.gamma_values(f, f);
        let lf = self.l_values(f);
        let l_gf = self.l_values(&gf);
        let cross = self.gamma_values(f, &lf);
        l_gf.iter().zip(&cross).map(|(a, b)| 0.5 * a - b).collect()
    }

    /// `L f = f″ − W′ f′` by centered differences.
    pub fn apply_l(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(self.wrap(self.l_values(&f.values)))
    }

    /// Carré du champ `Γ(f, g) = f′ g′`.
    pub fn gamma(&self, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.wrap(self.gamma_values(&f.values, &g.values)))
    }

    /// Iterated carré du champ `Γ₂(f) = ½ L Γ(f) − Γ(f, L f)`.
    pub fn gamma2(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(self.wrap(self.gamma2_values(&f.values)))
    }

    /// Centered first derivative, same closure as [`apply_l`](Self::apply_l).
    pub fn derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(self.wrap(self.derivative_values(&f.values)))
    }

    /// Centered second derivative.
    pub fn second_derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(self.wrap(self.second_derivative_values(&f.values)))
    }

    /// Integration-by-parts defect
    /// `max(|∫(Lu)v + ∫Γ(u,v)|, |∫(Lu)v − ∫u(Lv)|)`.
    pub fn ibp_residual(&self, u: &ScalarField, v: &ScalarField) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let lu = self.l_values(&u.values);
        let lv = self.l_values(&v.values);
        let g = self.gamma_values(&u.values, &v.values);
        let lu_v: f64 = self.weights.iter().zip(lu.iter().zip(&v.values)).map(|(w, (a, b))| w * a * b).sum();
        let u_lv: f64 = self.weights.iter().zip(u.values.iter().zip(&lv)).map(|(w, (a, b))| w * a * b).sum();
        let gam = self.integrate_values(&g);
        Ok((lu_v + gam).abs().max((lu_v - u_lv).abs()))
    }

    /// Flux-form generator, the exact discrete `ν`-adjoint partner of
    /// [`dirichlet_energy`](Self::dirichlet_energy):
    /// `Σ w_i g_i (L_c f)_i = −Σ_faces ω (Δf)(Δg)/h²`.
    pub fn apply_l_conservative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        Ok(self.wrap(self.l_conservative_values(&f.values)))
    }

    pub(crate) fn l_conservative_values(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.l_conservative_into(f, &mut out);
        out
    }

    pub(crate) fn l_conservative_into(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (im, ip) = self.neighbors(i);
            *o = self.flux_up[i] * (f[ip] - f[i]) - self.flux_down[i] * (f[i] - f[im]);
        }
    }

    /// Discrete Dirichlet form `Σ_faces ω_{i+½} ((f_{i+1} − f_i)/h)²`.
    pub fn dirichlet_energy(&self, f: &ScalarField) -> Result<f64> {
        self.check(f)?;
        Ok(self.dirichlet_energy_values(&f.values))
    }

    pub(crate) fn dirichlet_energy_values(&self, f: &[f64]) -> f64 {
        let n = f.len();
        (0..n)
            .map(|j| {
                let next = if j + 1 == n { 0 } else { j + 1 };
                let diff = f[next] - f[j];
                self.face_stiffness[j] * diff * diff
            })
            .sum()
    }

    /// Tridiagonal (cyclic on the circle) coefficients of `L_c`:
    /// `(L_c f)_i = down_i f_{i−1} − (down_i + up_i) f_i + up_i f_{i+1}`.
    pub(crate) fn conservative_coefficients(&self) -> (&[f64], &[f64]) {
        (&self.flux_down, &self.flux_up)
    }

    /// Gershgorin bound on the spectral radius of `L_c`.
    pub fn conservative_spectral_bound(&self) -> f64 {
        self.flux_up
            .iter()
            .zip(&self.flux_down)
            .map(|(u, d)| 2.0 * (u + d))
            .fold(0.0, f64::max)
    }
}

impl ScalarField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space_id(&self) -> SpaceId {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { values: self.values.iter().map(|&v| f(v)).collect(), space: self.space }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch);
        }
        Ok(ScalarField {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            space: self.space,
        })
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn require_positive(&self) -> Result<()> {
        let min = self.min();
        if min > 0.0 {
            Ok(())
        } else {
            Err(Error::NonPositiveField { min })
        }
    }

    /// CSV with a `theta,value` header and 17 significant digits.
    pub fn to_csv(&self, space: &ModelSpace) -> Result<String> {
        space.check(self)?;
        let mut out = String::from("theta,value\n");
        for (t, v) in space.grid().iter().zip(&self.values) {
            out.push_str(&crate::io::fmt_f64(*t));
            out.push(',');
            out.push_str(&crate::io::fmt_f64(*v));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_csv(space: &ModelSpace, text: &str) -> Result<ScalarField> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "theta,value" => {}
            other => {
                return Err(Error::InvalidConfig(format!("expected header theta,value, got {other:?}")))
            }
        }
        let mut values = Vec::with_capacity(space.resolution());
        for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::InvalidConfig(format!("row {k}: missing column")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("row {k}: {e}")))
            };
            let theta = parse(cols.next())?;
            let value = parse(cols.next())?;
            let expected = space.grid().get(k).copied().unwrap_or(f64::NAN);
            if (theta - expected).abs() > 1e-12 * (1.0 + expected.abs()) {
                return Err(Error::SpaceMismatch);
            }
            values.push(value);
        }
        space.field(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere3(n: usize) -> ModelSpace {
        ModelSpace::build(SpaceKind::SphereRadial, 3, 3.0, n).unwrap()
    }

    #[test]
    fn sphere_space_invariants() {
        let s = sphere3(256);
        assert_eq!(s.rho(), 2.0);
        let total: f64 = s.quad_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(s.quad_weights().iter().all(|&w| w > 0.0));
        assert!(s.grid().windows(2).all(|p| p[0] < p[1]));
        assert!(s.grid()[0] > 0.0 && *s.grid().last().unwrap() < PI);
    }

    #[test]
    fn jacobi_weight_formula() {
        let s = ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 256).unwrap();
        assert_eq!(s.rho(), 3.5);
        for (t, w) in s.grid().iter().zip(s.log_weight()) {
            assert!((w + 3.5 * t.sin().ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_weights_are_uniform() {
        let s = ModelSpace::build(SpaceKind::Circle, 1, 3.0, 64).unwrap();
        assert!(s.quad_weights().iter().all(|&w| (w - 1.0 / 64.0).abs() < 1e-16));
    }

    #[test]
    fn invalid_configurations() {
        assert!(matches!(
            ModelSpace::build(SpaceKind::SphereRadial, 3, 4.0, 64),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(ModelSpace::build(SpaceKind::Jacobi, 1, 2.0, 64), Err(Error::InvalidConfig(_))));
        assert!(matches!(ModelSpace::build(SpaceKind::Jacobi, 1, 4.0, 8), Err(Error::InvalidConfig(_))));
        assert!(matches!(ModelSpace::build(SpaceKind::SphereRadial, 2, 2.0, 64), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn integrate_constants_and_symmetry() {
        let s = sphere3(256);
        assert_eq!(s.integrate(&s.constant(1.0)).unwrap(), s.quad_weights().iter().sum::<f64>());
        assert!((s.integrate(&s.constant(1.0)).unwrap() - 1.0).abs() < 1e-14);
        let c = s.field_from_fn(f64::cos);
        assert!(s.integrate(&c).unwrap().abs() < 1e-10);
    }

    #[test]
    fn space_mismatch_is_rejected() {
        let a = sphere3(64);
        let b = sphere3(128);
        let f = b.constant(1.0);
        assert_eq!(a.integrate(&f), Err(Error::SpaceMismatch));
        assert_eq!(a.apply_l(&f).unwrap_err(), Error::SpaceMismatch);
        // Same parameters, same identity.
        let a2 = sphere3(64);
        assert!(a2.integrate(&a.constant(2.0)).is_ok());
    }

    #[test]
    fn operators_vanish_on_constants() {
        for s in [
            sphere3(64),
            ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 64).unwrap(),
            ModelSpace::build(SpaceKind::Circle, 1, 3.0, 64).unwrap(),
        ] {
            let c = s.constant(1.7);
            let f = s.field_from_fn(|t| (2.0 * t).cos());
            assert_eq!(s.apply_l(&c).unwrap().sup_norm(), 0.0);
            assert_eq!(s.gamma(&c, &f).unwrap().sup_norm(), 0.0);
            assert_eq!(s.gamma2(&c).unwrap().sup_norm(), 0.0);
            assert_eq!(s.apply_l_conservative(&c).unwrap().sup_norm(), 0.0);
        }
    }

    #[test]
    fn ibp_with_constant_reduces_to_mass_of_lv() {
        // Lc = 0 and Γ(c, v) = 0, so only c ∫ Lv dν survives; the centered
        // operator conserves mass up to O(h²) only.
        let mut last = f64::INFINITY;
        for n in [64, 128, 256] {
            let s = sphere3(n);
            let c = s.constant(1.0);
            let v = s.field_from_fn(|t| (2.0 * t).cos());
            let r = s.ibp_residual(&c, &v).unwrap();
            let mass = s.integrate(&s.apply_l(&v).unwrap()).unwrap();
            assert!((r - mass.abs()).abs() < 1e-14);
            assert!(r < last / 3.5);
            last = r;
        }
        let circle = ModelSpace::build(SpaceKind::Circle, 1, 3.0, 64).unwrap();
        let r = circle
            .ibp_residual(&circle.constant(1.0), &circle.field_from_fn(|t| (3.0 * t).cos()))
            .unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn circle_linear_ramp_has_unit_gamma() {
        let s = ModelSpace::build(SpaceKind::Circle, 1, 3.0, 64).unwrap();
        // A ramp is not periodic; check the interior where centered
        // differences do not straddle the seam.
        let f = s.field_from_fn(|t| t);
        let g = s.gamma(&f, &f).unwrap();
        for v in &g.values()[1..63] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conservative_operator_is_symmetric() {
        let s = ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 128).unwrap();
        let f = s.field_from_fn(|t| t.cos() + 0.3 * (3.0 * t).cos());
        let g = s.field_from_fn(|t| (2.0 * t).cos() - 0.2 * t.cos());
        let lf = s.apply_l_conservative(&f).unwrap();
        let lg = s.apply_l_conservative(&g).unwrap();
        let a = s.integrate(&lf.zip_map(&g, |x, y| x * y).unwrap()).unwrap();
        let b = s.integrate(&lg.zip_map(&f, |x, y| x * y).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
        let e = s.dirichlet_energy(&f).unwrap();
        let lf_f = s.integrate(&lf.zip_map(&f, |x, y| x * y).unwrap()).unwrap();
        assert!((e + lf_f).abs() < 1e-11 * e);
    }

    #[test]
    fn csv_round_trip() {
        let s = sphere3(32);
        let f = s.field_from_fn(|t| 1.0 + 0.25 * t.cos());
        let text = f.to_csv(&s).unwrap();
        assert!(text.starts_with("theta,value\n"));
        let back = ScalarField::from_csv(&s, &text).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn summary_json_keys() {
        let s = sphere3(64);
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        for key in ["kind", "d", "n", "rho", "resolution", "Z"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["kind"], "sphere_radial");
    }
}

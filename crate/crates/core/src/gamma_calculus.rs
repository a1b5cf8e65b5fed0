//! Pointwise curvature-dimension certificates.
//!
//! For a test field Φ the CD(ρ, n) margin is
//! `Γ₂(Φ) − ρ Γ(Φ) − (LΦ)²/n`, evaluated node by node. On the sphere-radial
//! model the same quantity splits into a Hessian Cauchy–Schwarz defect plus
//! the Ricci term, which [`bochner_residual`] and [`cauchy_schwarz_margin`]
//! expose separately.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model_space::{ModelSpace, ScalarField, SpaceKind};

/// Γ, Γ₂, LΦ and the CD margin of one test field.
#[derive(Debug, Clone)]
pub struct GammaReport {
    pub gamma_field: ScalarField,
    pub gamma2_field: ScalarField,
    pub l_field: ScalarField,
    pub cd_margin_field: ScalarField,
    pub cd_margin_min: f64,
    /// Node index at which the minimum is attained.
    pub argmin: usize,
    pub rho: f64,
    pub n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaSummary {
    pub cd_margin_min: f64,
    pub rho: f64,
    pub n: f64,
}

impl GammaReport {
    pub fn summary(&self) -> GammaSummary {
        GammaSummary { cd_margin_min: self.cd_margin_min, rho: self.rho, n: self.n }
    }

    pub fn to_csv(&self, space: &ModelSpace) -> String {
        let mut t = CsvTable::new(&["theta", "gamma", "gamma2", "Lphi", "cd_margin"]);
        for i in 0..space.resolution() {
            t.push(vec![
                space.grid()[i].into(),
                self.gamma_field.values()[i].into(),
                self.gamma2_field.values()[i].into(),
                self.l_field.values()[i].into(),
                self.cd_margin_field.values()[i].into(),
            ]);
        }
        t.render()
    }
}

fn require_curved(space: &ModelSpace, op: &'static str) -> Result<()> {
    match space.kind() {
        SpaceKind::Circle => Err(Error::UnsupportedKind { op, kind: space.kind() }),
        _ => Ok(()),
    }
}

fn require_sphere(space: &ModelSpace, op: &'static str) -> Result<()> {
    match space.kind() {
        SpaceKind::SphereRadial => Ok(()),
        kind => Err(Error::UnsupportedKind { op, kind }),
    }
}

/// Evaluates the CD(ρ, n) margin of `f` with the space's own ρ and n.
pub fn cd_margin(space: &ModelSpace, f: &ScalarField) -> Result<GammaReport> {
    require_curved(space, "cd_margin")?;
    cd_margin_with(space, f, space.rho(), space.n())
}

/// CD margin for explicit (ρ, n); used for monotonicity sweeps in `n`.
pub fn cd_margin_with(space: &ModelSpace, f: &ScalarField, rho: f64, n: f64) -> Result<GammaReport> {
    space.check(f)?;
    if !(n > 0.0) {
        return Err(Error::InvalidParameter(format!("n = {n} must be positive")));
    }
    let v = f.values();
    let gamma = space.gamma_values(v, v);
    let gamma2 = space.gamma2_values(v);
    let l = space.l_values(v);
    let margin: Vec<f64> = (0..v.len()).map(|i| gamma2[i] - rho * gamma[i] - l[i] * l[i] / n).collect();
    let (argmin, cd_margin_min) = margin
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, m)| if m < best.1 { (i, m) } else { best });
    Ok(GammaReport {
        gamma_field: space.wrap(gamma),
        gamma2_field: space.wrap(gamma2),
        l_field: space.wrap(l),
        cd_margin_field: space.wrap(margin),
        cd_margin_min,
        argmin,
        rho,
        n,
    })
}

/// Like [`cd_margin`] but fails with [`Error::CdViolation`] when the margin
/// drops below `−tol` anywhere on the grid.
pub fn certify_cd(space: &ModelSpace, f: &ScalarField, tol: f64) -> Result<GammaReport> {
    let report = cd_margin(space, f)?;
    if report.cd_margin_min < -tol {
        return Err(Error::CdViolation {
            margin: report.cd_margin_min,
            tol,
            theta: space.grid()[report.argmin],
        });
    }
    Ok(report)
}

/// Nodes whose stencils stay clear of the boundary closure.
pub(crate) const BOUNDARY_LAYER: usize = 2;

/// Sup over interior nodes of `Γ₂(f)` minus the radial Bochner bracket
/// `(f″)² + (d−1)(cot θ f′)² + (d−1)(f′)²`.
pub fn bochner_residual(space: &ModelSpace, f: &ScalarField) -> Result<f64> {
    require_sphere(space, "bochner_residual")?;
    space.check(f)?;
    let v = f.values();
    let g2 = space.gamma2_values(v);
    let d1 = space.derivative_values(v);
    let d2 = space.second_derivative_values(v);
    let ricci = f64::from(space.d()) - 1.0;
    let n = space.resolution();
    Ok((BOUNDARY_LAYER..n - BOUNDARY_LAYER)
        .map(|i| {
            let t = space.grid()[i];
            let cot = t.cos() / t.sin();
            let bracket = d2[i] * d2[i] + ricci * (cot * d1[i]).powi(2) + ricci * d1[i] * d1[i];
            (g2[i] - bracket).abs()
        })
        .fold(0.0, f64::max))
}

/// Radial Hilbert–Schmidt defect `‖∇²f‖² − (Δf)²/d`.
pub fn cauchy_schwarz_margin(space: &ModelSpace, f: &ScalarField) -> Result<ScalarField> {
    require_sphere(space, "cauchy_schwarz_margin")?;
    space.check(f)?;
    let v = f.values();
    let d1 = space.derivative_values(v);
    let d2 = space.second_derivative_values(v);
    let dim = f64::from(space.d());
    let out = (0..v.len())
        .map(|i| {
            let t = space.grid()[i];
            let tangential = t.cos() / t.sin() * d1[i];
            let hs = d2[i] * d2[i] + (dim - 1.0) * tangential * tangential;
            let trace = d2[i] + (dim - 1.0) * tangential;
            hs - trace * trace / dim
        })
        .collect();
    Ok(space.wrap(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(d: u32, n: usize) -> ModelSpace {
        ModelSpace::build(SpaceKind::SphereRadial, d, f64::from(d), n).unwrap()
    }

    #[test]
    fn report_fields_satisfy_the_margin_identity() {
        let s = ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 128).unwrap();
        let f = s.field_from_fn(|t| (2.0 * t).cos() + 0.3 * t.cos());
        let r = cd_margin(&s, &f).unwrap();
        for i in 0..s.resolution() {
            let expect = r.gamma2_field.values()[i]
                - r.rho * r.gamma_field.values()[i]
                - r.l_field.values()[i].powi(2) / r.n;
            assert_eq!(r.cd_margin_field.values()[i], expect);
        }
        assert_eq!(r.cd_margin_min, r.cd_margin_field.min());
    }

    #[test]
    fn constants_have_zero_margin() {
        let s = sphere(3, 64);
        let r = cd_margin(&s, &s.constant(3.0)).unwrap();
        assert_eq!(r.cd_margin_field.sup_norm(), 0.0);
        assert!(bochner_residual(&s, &s.constant(3.0)).unwrap() < 1e-12);
        assert_eq!(cauchy_schwarz_margin(&s, &s.constant(3.0)).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn circle_is_unsupported() {
        let s = ModelSpace::build(SpaceKind::Circle, 1, 3.0, 64).unwrap();
        let f = s.constant(1.0);
        assert!(matches!(cd_margin(&s, &f), Err(Error::UnsupportedKind { .. })));
        let j = ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 64).unwrap();
        assert!(matches!(bochner_residual(&j, &j.constant(1.0)), Err(Error::UnsupportedKind { .. })));
        assert!(matches!(cauchy_schwarz_margin(&j, &j.constant(1.0)), Err(Error::UnsupportedKind { .. })));
    }

    #[test]
    fn certify_flags_negative_margins() {
        let s = sphere(3, 256);
        let f = s.field_from_fn(f64::cos);
        assert!(certify_cd(&s, &f, 5e-3).is_ok());
        // Pretending the curvature is larger than it is must trip the check.
        let bogus = cd_margin_with(&s, &f, 2.5, 3.0).unwrap();
        assert!(bogus.cd_margin_min < -0.4);
    }

    #[test]
    fn margin_is_monotone_in_dimension() {
        let s = ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 128).unwrap();
        let f = s.field_from_fn(|t| (3.0 * t).cos() - 0.4 * (2.0 * t).cos());
        let mut last = f64::NEG_INFINITY;
        for n in [3.0, 4.0, 4.5, 6.0, 10.0] {
            let m = cd_margin_with(&s, &f, 3.5, n).unwrap().cd_margin_min;
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn summary_and_csv_shape() {
        let s = sphere(3, 32);
        let r = cd_margin(&s, &s.field_from_fn(f64::cos)).unwrap();
        let csv = r.to_csv(&s);
        assert!(csv.starts_with("theta,gamma,gamma2,Lphi,cd_margin\n"));
        assert_eq!(csv.lines().count(), 33);
        let json = serde_json::to_value(r.summary()).unwrap();
        assert_eq!(json["rho"], 2.0);
    }
}

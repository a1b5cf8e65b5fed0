//! Seeded corpora of low-degree trigonometric polynomials in `cos kθ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model_space::{ModelSpace, ScalarField};

pub const MAX_DEGREE: usize = 5;

/// `θ ↦ offset + amplitude · Σ a_k cos kθ / Σ|a_k|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigPoly {
    pub offset: f64,
    pub amplitude: f64,
    /// `a_1, …, a_K`.
    pub coeffs: Vec<f64>,
}

impl TrigPoly {
    pub fn eval(&self, theta: f64) -> f64 {
        let norm: f64 = self.coeffs.iter().map(|a| a.abs()).sum();
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| a * ((k + 1) as f64 * theta).cos())
            .sum();
        self.offset + self.amplitude * s / norm
    }

    pub fn sample(&self, space: &ModelSpace) -> ScalarField {
        space.field_from_fn(|t| self.eval(t))
    }

    /// Degree of the highest nonzero harmonic.
    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }
}

fn draw_coeffs(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let degree = rng.gen_range(1..=MAX_DEGREE);
    let mut coeffs: Vec<f64> = (0..degree).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    // Keep the top harmonic visible so the degree is what it claims.
    if coeffs[degree - 1].abs() < 0.1 {
        coeffs[degree - 1] = 0.1_f64.copysign(coeffs[degree - 1]);
    }
    coeffs
}

/// Strictly positive fields `1 + s Σ a_k cos kθ / Σ|a_k|`, `s ∈ [0.05, 0.9)`.
pub fn positive_corpus(seed: u64, count: usize) -> Vec<TrigPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coeffs = draw_coeffs(&mut rng);
            TrigPoly { offset: 1.0, amplitude: rng.gen_range(0.05..0.9), coeffs }
        })
        .collect()
}

/// Zero-offset test fields `Σ a_k cos kθ / Σ|a_k|` for curvature checks.
pub fn test_field_corpus(seed: u64, count: usize) -> Vec<TrigPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| TrigPoly { offset: 0.0, amplitude: 1.0, coeffs: draw_coeffs(&mut rng) })
        .collect()
}

/// `f/∫f dν` for a positive field.
pub fn normalize_density(space: &ModelSpace, f: &ScalarField) -> ScalarField {
    let mass = space.integrate_values(f.values());
    f.scale(1.0 / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_space::SpaceKind;

    #[test]
    fn seeded_and_reproducible() {
        assert_eq!(positive_corpus(7, 20), positive_corpus(7, 20));
        assert_ne!(positive_corpus(7, 20), positive_corpus(8, 20));
        assert_eq!(positive_corpus(7, 5)[..], positive_corpus(7, 20)[..5]);
    }

    #[test]
    fn positive_members_stay_bounded_away_from_zero() {
        let s = ModelSpace::build(SpaceKind::SphereRadial, 3, 3.0, 256).unwrap();
        for p in positive_corpus(1, 200) {
            assert!((1..=MAX_DEGREE).contains(&p.degree()));
            assert!(p.sample(&s).min() >= 0.1 - 1e-12);
        }
    }

    #[test]
    fn normalized_density_has_unit_mass() {
        let s = ModelSpace::build(SpaceKind::Jacobi, 1, 4.5, 128).unwrap();
        let p = &positive_corpus(3, 1)[0];
        let mu = normalize_density(&s, &p.sample(&s));
        assert!((s.integrate(&mu).unwrap() - 1.0).abs() < 1e-14);
    }
}

//! Magnon systems: chain length, momenta and the scattering amplitude.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::DEGENERACY_TOL;

/// XXZ two-magnon scattering amplitude `s(x_1, x_2) = 1 + x_1 x_2 - 2Δ x_2`.
pub fn scattering_amplitude(x1: Complex64, x2: Complex64, delta: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) + x1 * x2 - 2.0 * delta * x2
}

/// Two-magnon S matrix `S = -s_12 / s_21`.
pub fn s_matrix(x1: Complex64, x2: Complex64, delta: f64) -> Complex64 {
    -scattering_amplitude(x1, x2, delta) / scattering_amplitude(x2, x1, delta)
}

/// Choice of scattering amplitude. The circuit construction works for any
/// two-body amplitude; the XXZ form is the shipped default and `Free` (`s ≡ 1`)
/// is the convention used throughout the free-fermion specialisation.
#[derive(Clone)]
pub enum Scattering {
    /// `s(x_1, x_2) = 1 + x_1 x_2 - 2Δ x_2` with Δ taken from the system.
    Xxz,
    /// `s ≡ 1`.
    Free,
    /// Arbitrary amplitude `s(x_1, x_2)`.
    Custom(Arc<dyn Fn(Complex64, Complex64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for Scattering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scattering::Xxz => write!(f, "Xxz"),
            Scattering::Free => write!(f, "Free"),
            Scattering::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A chain of `N` qubits carrying `M` magnons with momentum variables
/// `x_a = e^(i p_a)` and anisotropy Δ.
///
/// Momenta may be arbitrary nonzero complex numbers; unimodularity is not
/// required. Coincident momenta make the wavefunction vanish identically, so
/// construction-level operations reject them.
#[derive(Debug, Clone)]
pub struct MagnonSystem {
    n: usize,
    x: Vec<Complex64>,
    delta: f64,
    scattering: Scattering,
}

#[derive(Deserialize)]
struct SystemJson {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: Option<usize>,
    delta: f64,
    momenta: Option<Vec<ComplexJson>>,
    x: Option<Vec<ComplexJson>>,
}

#[derive(Deserialize)]
struct ComplexJson {
    re: f64,
    im: f64,
}

impl MagnonSystem {
    /// System from momentum variables `x_a` directly.
    pub fn new(n: usize, x: Vec<Complex64>, delta: f64) -> Result<Self> {
        if x.len() > n {
            return Err(Error::System(format!(
                "magnon count {} exceeds chain length {n}",
                x.len()
            )));
        }
        if let Some(a) = x.iter().position(|z| z.norm() == 0.0) {
            return Err(Error::System(format!("momentum variable x_{} is zero", a + 1)));
        }
        Ok(Self {
            n,
            x,
            delta,
            scattering: Scattering::Xxz,
        })
    }

    /// System from magnon momenta `p_a`, exponentiated to `x_a = e^(i p_a)`.
    pub fn from_momenta(n: usize, momenta: &[Complex64], delta: f64) -> Result<Self> {
        let x = momenta
            .iter()
            .map(|p| (Complex64::i() * p).exp())
            .collect();
        Self::new(n, x, delta)
    }

    /// Seeded random system: `p_a = U(-π, π) + i U(-0.3, 0.3)`.
    pub fn random(n: usize, m: usize, delta: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let momenta: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.random_range(-PI..PI), rng.random_range(-0.3..0.3)))
            .collect();
        Self::from_momenta(n, &momenta, delta).expect("random momenta are nonzero")
    }

    /// Parses `{"N":…, "M":…, "delta":…, "momenta":[{"re":…,"im":…},…]}` or
    /// the same document with `"x"` in place of `"momenta"`. Exactly one of
    /// the two momentum keys must be present.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: SystemJson = serde_json::from_str(text)?;
        let sys = match (doc.momenta, doc.x) {
            (Some(ps), None) => {
                let ps: Vec<Complex64> = ps.iter().map(|c| Complex64::new(c.re, c.im)).collect();
                Self::from_momenta(doc.n, &ps, doc.delta)?
            }
            (None, Some(xs)) => {
                let xs = xs.iter().map(|c| Complex64::new(c.re, c.im)).collect();
                Self::new(doc.n, xs, doc.delta)?
            }
            _ => {
                return Err(Error::System(
                    "exactly one of \"momenta\" and \"x\" must be given".into(),
                ))
            }
        };
        if let Some(m) = doc.m {
            if m != sys.magnons() {
                return Err(Error::System(format!(
                    "declared M={m} does not match {} momenta",
                    sys.magnons()
                )));
            }
        }
        Ok(sys)
    }

    pub fn with_scattering(mut self, scattering: Scattering) -> Self {
        self.scattering = scattering;
        self
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn magnons(&self) -> usize {
        self.x.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn momenta(&self) -> &[Complex64] {
        &self.x
    }

    /// Momentum variable `x_a`, 1-based.
    pub fn x(&self, a: usize) -> Complex64 {
        self.x[a - 1]
    }

    pub fn scattering(&self) -> &Scattering {
        &self.scattering
    }

    /// Scattering amplitude on momentum values.
    pub fn s(&self, x1: Complex64, x2: Complex64) -> Complex64 {
        match &self.scattering {
            Scattering::Xxz => scattering_amplitude(x1, x2, self.delta),
            Scattering::Free => Complex64::new(1.0, 0.0),
            Scattering::Custom(f) => f(x1, x2),
        }
    }

    /// Scattering amplitude between magnons `a` and `b` (1-based slots).
    pub fn s_between(&self, a: usize, b: usize) -> Complex64 {
        self.s(self.x(a), self.x(b))
    }

    /// Rejects coincident momenta among the selected slots (or among all `M`
    /// slots when `slots` is empty).
    pub fn check_nondegenerate(&self, slots: &[usize]) -> Result<()> {
        let all: Vec<usize>;
        let slots = if slots.is_empty() {
            all = (1..=self.magnons()).collect();
            &all
        } else {
            slots
        };
        for (i, &a) in slots.iter().enumerate() {
            for &b in &slots[i + 1..] {
                let xa = self.x(a);
                let xb = self.x(b);
                if (xa - xb).norm() < DEGENERACY_TOL * xa.norm().max(xb.norm()) {
                    return Err(Error::DegenerateMomenta { a, b });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn amplitude_closed_form() {
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(scattering_amplitude(one, one, 1.0), Complex64::new(0.0, 0.0));

        // Δ=0 makes the amplitude symmetric and the S matrix a sign flip.
        let x1 = Complex64::from_polar(1.0, 0.3);
        let x2 = Complex64::from_polar(1.0, 1.1);
        assert!((scattering_amplitude(x1, x2, 0.0) - scattering_amplitude(x2, x1, 0.0)).norm() < 1e-15);
        assert!((s_matrix(x1, x2, 0.0) + 1.0).norm() < 1e-14);

        // Generic point against direct arithmetic.
        let s = scattering_amplitude(x1, x2, 0.5);
        let expect = Complex64::new(1.0, 0.0) + x1 * x2 - Complex64::new(1.0, 0.0) * x2;
        assert!((s - expect).norm() < 1e-15);
    }

    #[test]
    fn json_roundtrip_and_key_exclusivity() {
        let sys = MagnonSystem::from_json_str(
            r#"{"N": 6, "M": 2, "delta": 0.5,
                "momenta": [{"re": 0.7, "im": 0.0}, {"re": -0.3, "im": 0.1}]}"#,
        )
        .unwrap();
        assert_eq!(sys.qubits(), 6);
        assert_eq!(sys.magnons(), 2);
        let p = Complex64::new(0.7, 0.0);
        assert!((sys.x(1) - (Complex64::i() * p).exp()).norm() < 1e-15);

        let sys2 = MagnonSystem::from_json_str(
            r#"{"N": 4, "delta": 1.0, "x": [{"re": 0.9, "im": 0.1}]}"#,
        )
        .unwrap();
        assert!((sys2.x(1) - Complex64::new(0.9, 0.1)).norm() < 1e-15);

        assert!(MagnonSystem::from_json_str(r#"{"N": 4, "delta": 1.0}"#).is_err());
        assert!(MagnonSystem::from_json_str(
            r#"{"N": 4, "delta": 1.0, "x": [{"re": 1.0, "im": 0.0}],
                "momenta": [{"re": 1.0, "im": 0.0}]}"#
        )
        .is_err());
    }

    #[test]
    fn degeneracy_guard() {
        let x = Complex64::new(0.3, 0.4);
        let sys = MagnonSystem::new(5, vec![x, x * (1.0 + 1e-14)], 0.5).unwrap();
        assert!(matches!(
            sys.check_nondegenerate(&[]),
            Err(Error::DegenerateMomenta { a: 1, b: 2 })
        ));
        let sys = MagnonSystem::new(5, vec![x, -x], 0.5).unwrap();
        assert!(sys.check_nondegenerate(&[]).is_ok());
    }

    #[test]
    fn random_systems_are_seed_deterministic() {
        let a = MagnonSystem::random(8, 3, 0.5, 7);
        let b = MagnonSystem::random(8, 3, 0.5, 7);
        assert_eq!(a.momenta(), b.momenta());
        let c = MagnonSystem::random(8, 3, 0.5, 8);
        assert_ne!(a.momenta(), c.momenta());
    }

    #[test]
    fn rejects_oversized_and_zero_momenta() {
        assert!(MagnonSystem::new(2, vec![Complex64::new(1.0, 0.0); 3], 0.0).is_err());
        assert!(MagnonSystem::new(4, vec![Complex64::new(0.0, 0.0)], 0.0).is_err());
    }
}

//! Bethe wavefunctions by brute force and by the tensor network.
//!
//! Two deliberately independent routes produce the same states. The direct
//! sum over magnon permutations computes signs by counting transpositions,
//! while the level-by-level network accumulates them through ordered magnon
//! removals. Each route validates the other.

use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sectors::SectorBasis;
use crate::system::MagnonSystem;

/// Complex amplitudes of a state restricted to one symmetry sector.
///
/// Amplitudes follow the sector basis order. No normalisation is implied;
/// Bethe wavefunctions come out of the construction unnormalised.
#[derive(Debug, Clone)]
pub struct SectorVector {
    basis: SectorBasis,
    amps: Vec<Complex64>,
}

impl SectorVector {
    pub fn zeros(basis: SectorBasis) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); basis.len()];
        Self { basis, amps }
    }

    pub fn from_amps(basis: SectorBasis, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::Domain(format!(
                "amplitude count {} does not match sector dimension {}",
                amps.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, amps })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// Amplitude of the basis state with 1-based sector index `a`.
    pub fn amp(&self, a: usize) -> Complex64 {
        self.amps[a - 1]
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.basis != other.basis {
            return Err(Error::Domain("inner product across different sectors".into()));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for z in &mut self.amps {
                *z /= n;
            }
        }
    }

    /// `|⟨self|other⟩|` for unit vectors; normalises internally.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let nn = self.norm() * other.norm();
        Ok(self.inner(other)?.norm() / nn)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Squared norm of the one-magnon wavefunction on `k` qubits,
/// `C_k = Σ_{n=0}^{k-1} |x|^(2n)`.
pub fn one_magnon_norm(k: usize, x: Complex64) -> f64 {
    let q = x.norm_sqr();
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..k {
        acc += pow;
        pow *= q;
    }
    acc
}

/// Iterates over all permutations of `0..r` with their signs, in a fixed
/// deterministic order (Heap's algorithm; each step is one transposition).
fn for_each_permutation<F: FnMut(&[usize], i32)>(r: usize, mut f: F) {
    let mut perm: Vec<usize> = (0..r).collect();
    let mut sign = 1i32;
    let mut c = vec![0usize; r];
    f(&perm, sign);
    let mut i = 0;
    while i < r {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            f(&perm, sign);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Unnormalised Bethe wavefunction of the magnons selected by `positions`,
/// supported on `k` qubits, by direct summation.
///
/// `positions` picks the momentum subset `y_a = x_{n_a}`; the coefficient of
/// the basis tuple `(m_1, …, m_r)` is the signed sum over permutations of the
/// selected magnons, weighted by the pairwise scattering amplitudes and the
/// plane-wave powers `y^(m-1)`. Cost is `r! · d(r, k)`; this is the oracle
/// the rest of the crate is tested against.
pub fn cba_wavefunction(positions: &[usize], k: usize, sys: &MagnonSystem) -> Result<SectorVector> {
    let r = positions.len();
    if r > k {
        return Err(Error::Domain(format!("{r} magnons do not fit on {k} qubits")));
    }
    for &n in positions {
        if n < 1 || n > sys.magnons() {
            return Err(Error::Domain(format!("momentum slot {n} outside 1..={}", sys.magnons())));
        }
    }
    sys.check_nondegenerate(positions)?;
    Ok(cba_wavefunction_unchecked(positions, k, sys))
}

/// Same as [`cba_wavefunction`] without the degeneracy guard; coincident
/// momenta yield the zero vector.
pub fn cba_wavefunction_unchecked(positions: &[usize], k: usize, sys: &MagnonSystem) -> SectorVector {
    let r = positions.len();
    let basis = SectorBasis::new(r, k).expect("validated above");
    let y: Vec<Complex64> = positions.iter().map(|&n| sys.x(n)).collect();

    // y[a]^e for e = 0..k, reused across all permutations and tuples.
    let powers: Vec<Vec<Complex64>> = y
        .iter()
        .map(|&ya| {
            let mut row = Vec::with_capacity(k);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..k {
                row.push(acc);
                acc *= ya;
            }
            row
        })
        .collect();

    let mut amps = vec![Complex64::new(0.0, 0.0); basis.len()];
    for_each_permutation(r, |perm, sign| {
        // Pairwise amplitude factor of this permutation, independent of the
        // position tuple.
        let mut w = Complex64::new(sign as f64, 0.0);
        for p in 0..r {
            for q in 0..p {
                w *= sys.s(y[perm[p]], y[perm[q]]);
            }
        }
        for (idx, tuple) in basis.iter().enumerate() {
            let mut term = w;
            for (j, &m) in tuple.iter().enumerate() {
                term *= powers[perm[j]][m - 1];
            }
            amps[idx] += term;
        }
    });

    SectorVector { basis, amps }
}

/// The same wavefunction built by the level network: starting from the
/// selected magnons on the auxiliary register, each of the `k` levels either
/// shifts every remaining magnon one site (collecting its momentum factor
/// and emitting `|0⟩`) or removes one magnon (collecting its scattering
/// factors against the others and emitting `|1⟩`). Projecting the final
/// auxiliary register on the reference state leaves the physical state.
pub fn network_wavefunction(
    positions: &[usize],
    k: usize,
    sys: &MagnonSystem,
) -> Result<SectorVector> {
    let r = positions.len();
    if r > k {
        return Err(Error::Domain(format!("{r} magnons do not fit on {k} qubits")));
    }
    sys.check_nondegenerate(positions)?;
    let basis = SectorBasis::new(r, k)?;

    // Keyed by (emitted positions, remaining magnons) as bitmasks.
    let mut layers: BTreeMap<(u64, u64), Complex64> = BTreeMap::new();
    let start: u64 = positions.iter().map(|&n| 1u64 << (n - 1)).sum();
    layers.insert((0, start), Complex64::new(1.0, 0.0));

    for level in 1..=k {
        let mut next: BTreeMap<(u64, u64), Complex64> = BTreeMap::new();
        for (&(emitted, remaining), &amp) in &layers {
            let magnons: Vec<usize> = (0..64)
                .filter(|b| remaining >> b & 1 == 1)
                .map(|b| b + 1)
                .collect();

            // Shift: every remaining magnon advances one site.
            let mut shift = amp;
            for &n in &magnons {
                shift *= sys.x(n);
            }
            *next.entry((emitted, remaining)).or_default() += shift;

            // Removal of the m-th remaining magnon emits |1⟩ at this level.
            for (m, &nm) in magnons.iter().enumerate() {
                let mut term = amp * ((-1.0f64).powi(m as i32)); // (-1)^(m+1), m here 0-based
                for &nj in &magnons {
                    if nj != nm {
                        term *= sys.s(sys.x(nj), sys.x(nm));
                    }
                }
                let rest = remaining & !(1u64 << (nm - 1));
                for b in 0..64 {
                    if rest >> b & 1 == 1 {
                        term *= sys.x(b + 1);
                    }
                }
                let key = (emitted | 1u64 << (level - 1), rest);
                *next.entry(key).or_default() += term;
            }
        }
        layers = next;
    }

    let mut out = SectorVector::zeros(basis);
    for (&(emitted, remaining), &amp) in &layers {
        if remaining != 0 {
            continue; // auxiliary register projected on the reference state
        }
        let tuple: Vec<usize> = (0..64)
            .filter(|b| emitted >> b & 1 == 1)
            .map(|b| b + 1)
            .collect();
        let a = out.basis.index_of(&tuple)?;
        out.amps[a - 1] += amp;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Scattering;

    fn test_system(n: usize, m: usize, delta: f64) -> MagnonSystem {
        MagnonSystem::random(n, m, delta, 11)
    }

    #[test]
    fn one_magnon_norm_values() {
        let x = Complex64::new(2.0, 0.0);
        assert_eq!(one_magnon_norm(3, x), 21.0); // 1 + 4 + 16
        assert_eq!(one_magnon_norm(1, x), 1.0);
        let u = Complex64::from_polar(1.0, 0.4);
        assert!((one_magnon_norm(7, u) - 7.0).abs() < 1e-12);
        // C_k = |x|^2 C_{k-1} + 1
        let x = Complex64::new(0.8, 0.3);
        for k in 2..8 {
            let rec = x.norm_sqr() * one_magnon_norm(k - 1, x) + 1.0;
            assert!((one_magnon_norm(k, x) - rec).abs() < 1e-12);
        }
    }

    #[test]
    fn single_magnon_is_a_plane_wave() {
        let sys = test_system(6, 1, 0.5);
        let psi = cba_wavefunction(&[1], 6, &sys).unwrap();
        let x = sys.x(1);
        for n in 1..=6 {
            assert!((psi.amp(n) - x.powi(n as i32 - 1)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_magnon_closed_forms() {
        let sys = test_system(5, 3, 0.7);
        let (x1, x2, x3) = (sys.x(1), sys.x(2), sys.x(3));
        let s = |a: Complex64, b: Complex64| sys.s(a, b);

        // Coefficient of |13⟩ with momenta (p_1, p_2).
        let psi = cba_wavefunction(&[1, 2], 5, &sys).unwrap();
        let a13 = psi.amp(psi.basis().index_of(&[1, 3]).unwrap());
        let expect = s(x2, x1) * x2 * x2 - s(x1, x2) * x1 * x1;
        assert!((a13 - expect).norm() < 1e-12 * expect.norm());

        // Same component with the subset (p_1, p_3).
        let psi = cba_wavefunction(&[1, 3], 5, &sys).unwrap();
        let a13 = psi.amp(psi.basis().index_of(&[1, 3]).unwrap());
        let expect = s(x3, x1) * x3 * x3 - s(x1, x3) * x1 * x1;
        assert!((a13 - expect).norm() < 1e-12 * expect.norm());
    }

    #[test]
    fn swapping_momenta_flips_the_sign() {
        let mut xs = test_system(6, 3, 1.0).momenta().to_vec();
        let sys = MagnonSystem::new(6, xs.clone(), 1.0).unwrap();
        xs.swap(0, 2);
        let swapped = MagnonSystem::new(6, xs, 1.0).unwrap();
        let a = cba_wavefunction(&[1, 2, 3], 6, &sys).unwrap();
        let b = cba_wavefunction(&[1, 2, 3], 6, &swapped).unwrap();
        for i in 1..=a.basis().len() {
            assert!((a.amp(i) + b.amp(i)).norm() < 1e-10 * a.norm());
        }
    }

    #[test]
    fn coincident_momenta_sum_to_zero() {
        let x = Complex64::new(0.6, 0.2);
        let sys = MagnonSystem::new(5, vec![x, x], 0.5).unwrap();
        assert!(cba_wavefunction(&[1, 2], 5, &sys).is_err());
        let raw = cba_wavefunction_unchecked(&[1, 2], 5, &sys);
        assert!(raw.norm() < 1e-12);
    }

    #[test]
    fn network_matches_direct_sum() {
        for m in 1..=4 {
            let sys = test_system(8, m, 0.5);
            for k in m..=8 {
                // All subsets, all sizes r <= m.
                for r in 0..=m {
                    let basis = SectorBasis::new(r, m).unwrap();
                    for tuple in basis.iter() {
                        let a = cba_wavefunction(tuple, k, &sys).unwrap();
                        let b = network_wavefunction(tuple, k, &sys).unwrap();
                        let scale = a.norm().max(1e-30);
                        assert!(
                            a.max_abs_diff(&b) < 1e-12 * scale,
                            "mismatch at m={m} k={k} tuple={tuple:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn network_zero_magnons_is_reference_state() {
        let sys = test_system(5, 2, 0.3);
        let psi = network_wavefunction(&[], 5, &sys).unwrap();
        assert_eq!(psi.basis().len(), 1);
        assert!((psi.amp(1) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn free_amplitude_factorizes() {
        // With s ≡ 1 the wavefunction equals the symmetric-amplitude one
        // divided by the product of pairwise amplitudes.
        let sys = test_system(6, 3, 0.0);
        let free = sys.clone().with_scattering(Scattering::Free);
        let full = cba_wavefunction(&[1, 2, 3], 6, &sys).unwrap();
        let bare = cba_wavefunction(&[1, 2, 3], 6, &free).unwrap();
        let mut prefactor = Complex64::new(1.0, 0.0);
        for p in 1..=3 {
            for q in 1..p {
                prefactor *= sys.s_between(p, q);
            }
        }
        for i in 1..=full.basis().len() {
            assert!((full.amp(i) - prefactor * bare.amp(i)).norm() < 1e-10 * full.norm());
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn momentum() -> impl Strategy<Value = Complex64> {
            (-3.1f64..3.1, -0.3f64..0.3).prop_map(|(re, im)| {
                (Complex64::i() * Complex64::new(re, im)).exp()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn network_equals_direct(xs in proptest::collection::vec(momentum(), 1..=3),
                                     delta in -1.5f64..1.5,
                                     k in 1usize..=6) {
                let m = xs.len();
                prop_assume!(k >= m);
                let sys = MagnonSystem::new(k, xs, delta).unwrap();
                if sys.check_nondegenerate(&[]).is_err() {
                    return Ok(());
                }
                let tuple: Vec<usize> = (1..=m).collect();
                let a = cba_wavefunction(&tuple, k, &sys).unwrap();
                let b = network_wavefunction(&tuple, k, &sys).unwrap();
                prop_assert!(a.max_abs_diff(&b) <= 1e-10 * a.norm().max(1.0));
            }
        }
    }
}

//! XXZ Hamiltonian restricted to a magnon sector.
//!
//! `H = Σ_j (σx_j σx_(j+1) + σy_j σy_(j+1) + Δ σz_j σz_(j+1))`. The XX + YY
//! part hops a magnon across a bond with weight 2; the ZZ part is diagonal,
//! contributing `+Δ` on aligned bonds and `-Δ` on domain walls.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::Result;
use crate::states::SectorVector;

/// Applies the Hamiltonian to a sector state. The periodic flag includes the
/// bond between the last and first sites.
pub fn apply_hamiltonian(state: &SectorVector, delta: f64, periodic: bool) -> Result<SectorVector> {
    let basis = state.basis().clone();
    let n = basis.qubits();
    let index_of: HashMap<u64, usize> = (1..=basis.len()).map(|a| (basis.key(a), a)).collect();

    let bond_count = if periodic { n } else { n.saturating_sub(1) };
    let mut out = SectorVector::zeros(basis.clone());
    for a in 1..=basis.len() {
        let amp = state.amp(a);
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mask = basis.key(a);
        let mut zz = 0.0;
        for j in 0..bond_count {
            let site = j;
            let next = (j + 1) % n;
            let bi = mask >> site & 1;
            let bj = mask >> next & 1;
            if bi == bj {
                zz += delta;
            } else {
                zz -= delta;
                // Hop: swap the bond's occupations.
                let flipped = mask ^ (1 << site) ^ (1 << next);
                let target = index_of[&flipped];
                out.amps_mut()[target - 1] += 2.0 * amp;
            }
        }
        out.amps_mut()[a - 1] += zz * amp;
    }
    Ok(out)
}

/// Energy expectation `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn energy(state: &SectorVector, delta: f64, periodic: bool) -> Result<Complex64> {
    let h = apply_hamiltonian(state, delta, periodic)?;
    Ok(state.inner(&h)? / state.inner(state)?)
}

/// Energy variance `⟨H²⟩ - ⟨H⟩²`; vanishes exactly on eigenstates.
pub fn energy_variance(state: &SectorVector, delta: f64, periodic: bool) -> Result<f64> {
    let h = apply_hamiltonian(state, delta, periodic)?;
    let norm2 = state.inner(state)?.re;
    let e = state.inner(&h)?.re / norm2;
    let e2 = h.inner(&h)?.re / norm2;
    Ok(e2 - e * e)
}

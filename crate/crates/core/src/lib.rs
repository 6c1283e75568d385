//! Deterministic quantum circuits for Bethe wavefunctions of the XXZ chain.
//!
//! An `M`-magnon Bethe wavefunction on `N` qubits is a signed superposition of
//! plane waves whose coefficients are weighted by two-body scattering
//! amplitudes. This crate constructs, gate by gate and in closed form, the
//! staircase circuit that prepares the normalised wavefunction from the
//! product state `|1…1 0…0⟩`, and provides everything needed to check the
//! construction against brute-force references:
//!
//! - [`sectors`]: U(1) symmetry-sector combinatorics (dimensions, basis
//!   enumeration, ranking of magnon-position tuples).
//! - [`system`]: magnon systems (momenta, anisotropy, scattering amplitude).
//! - [`states`]: brute-force Bethe wavefunctions and the equivalent
//!   tensor-network construction, used as independent oracles.
//! - [`lambda`]: the sparse shift/scattering tensors that encode the
//!   wavefunction as a matrix product state.
//! - [`unitarize`]: overlap (Gram) matrices, their size recursion, and the
//!   determinant-form Cholesky factors that orthonormalise the network.
//! - [`circuit`]: gate assembly, unitary completion, the sector-blocked
//!   statevector simulator, and unitarity verification.
//! - [`hamiltonian`]: the XXZ Hamiltonian restricted to a magnon sector.
//! - [`aba`]: the R-matrix route to the same circuit and the gauge
//!   transformation connecting the two constructions.
//! - [`matchgate`]: the free-fermion specialisation into single layers of
//!   two-qubit matchgates.
//!
//! States are stored per symmetry sector throughout; the only dense objects
//! are the gate unitaries themselves.
//!
//! # Example
//!
//! ```
//! use bethe_circuit::circuit::{build_circuit, simulate};
//! use bethe_circuit::states::cba_wavefunction;
//! use bethe_circuit::system::MagnonSystem;
//!
//! let sys = MagnonSystem::random(6, 2, 0.5, 42);
//! let circ = build_circuit(&sys).unwrap();
//! let out = simulate(&circ).unwrap();
//!
//! let mut oracle = cba_wavefunction(&[1, 2], 6, &sys).unwrap();
//! oracle.normalize();
//! assert!((out.fidelity(&oracle).unwrap() - 1.0).abs() < 1e-9);
//! ```

pub mod aba;
pub mod circuit;
mod dd;
pub mod error;
pub mod hamiltonian;
pub mod lambda;
pub mod matchgate;
pub mod sectors;
pub mod states;
pub mod system;
pub mod unitarize;

pub use circuit::{CircuitDescription, GateBlock};
pub use error::{Error, Result};
pub use lambda::LambdaBlock;
pub use sectors::SectorBasis;
pub use states::SectorVector;
pub use system::{MagnonSystem, Scattering};
pub use unitarize::{CholeskyPair, OverlapMatrix};

use num_complex::Complex64;

/// Dense complex matrix used for sector blocks and gate unitaries.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Relative tolerance below which two momenta count as coincident.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Pivot floor for Cholesky sweeps of diagonally equilibrated overlap
/// matrices. Pivots that fall below this (rounding noise on near-singular
/// inputs) are clamped rather than rejected; the factor pair stays mutually
/// consistent, which is what the circuit construction relies on.
pub const SINGULARITY_TOL: f64 = 1e-10;

/// Tolerance on the orthonormality of completed gate columns.
pub const COMPLETION_TOL: f64 = 1e-9;

/// Largest absolute value over the entries of a matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry of the difference of two equally sized matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in comparison");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

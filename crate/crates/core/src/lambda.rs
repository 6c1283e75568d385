//! The sparse tensors that encode Bethe wavefunctions as a matrix product.
//!
//! Acting on `w` auxiliary slots, the tensor has two physical branches. The
//! `|0⟩` branch is diagonal and multiplies each sector configuration by its
//! collective momentum (every magnon advances one site). The `|1⟩` branch
//! removes one magnon, collecting the scattering amplitudes of the removed
//! magnon against the remaining ones and the antisymmetrisation sign of the
//! removal. For long gates `w` equals the magnon number; short gates use the
//! ghost-leg convention `w = k + 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sectors::{charge_offsets, drop_position, SectorBasis};
use crate::system::MagnonSystem;
use crate::CMatrix;

/// Product of the momentum variables selected by `positions`; `1` for the
/// empty tuple.
pub fn collective_momentum(positions: &[usize], sys: &MagnonSystem) -> Complex64 {
    positions.iter().map(|&n| sys.x(n)).product()
}

/// One sector block of the tensor: maps the `r`-magnon sector of `w` slots to
/// the `(r - i)`-magnon sector.
#[derive(Debug, Clone)]
pub struct LambdaBlock {
    pub i: usize,
    pub r: usize,
    pub w: usize,
    pub matrix: CMatrix,
}

/// Sector block of the tensor for output bit `i` and input sector `r` on `w`
/// slots.
pub fn lambda_block(i: usize, r: usize, w: usize, sys: &MagnonSystem) -> Result<LambdaBlock> {
    if r > w {
        return Err(Error::Domain(format!("sector {r} exceeds width {w}")));
    }
    if i > 1 || i > r {
        return Err(Error::Domain(format!(
            "output bit {i} invalid for sector {r}: no magnon to emit"
        )));
    }
    let cols = SectorBasis::new(r, w)?;
    let rows = SectorBasis::new(r - i, w)?;
    let mut matrix = CMatrix::zeros(rows.len(), cols.len());

    if i == 0 {
        for (a, tuple) in cols.iter().enumerate() {
            matrix[(a, a)] = collective_momentum(tuple, sys);
        }
    } else {
        for (a, tuple) in cols.iter().enumerate() {
            for m in 1..=r {
                let (rest, sign) = drop_position(tuple, m)?;
                let nm = tuple[m - 1];
                let mut entry = Complex64::new(sign as f64, 0.0);
                for &nj in &rest {
                    entry *= sys.s(sys.x(nj), sys.x(nm));
                }
                entry *= collective_momentum(&rest, sys);
                let row = rows.index_of(&rest)?;
                matrix[(row - 1, a)] = entry;
            }
        }
    }
    Ok(LambdaBlock { i, r, w, matrix })
}

/// All-sector tensor on `w` slots in the charge-ordered layout: output bit
/// `0` is block diagonal, output bit `1` links each sector to the one below.
pub fn lambda_full(i: usize, w: usize, sys: &MagnonSystem) -> Result<CMatrix> {
    let offsets = charge_offsets(w)?;
    let total = 1usize << w;
    let mut out = CMatrix::zeros(total, total);
    for r in i..=w {
        let block = lambda_block(i, r, w, sys)?;
        let (row0, col0) = (offsets[r - i], offsets[r]);
        for a in 0..block.matrix.nrows() {
            for b in 0..block.matrix.ncols() {
                out[(row0 + a, col0 + b)] = block.matrix[(a, b)];
            }
        }
    }
    Ok(out)
}

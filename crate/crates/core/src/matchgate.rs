//! Free-fermion specialisation: at the symmetric point of the scattering
//! amplitude each gate collapses to a single layer of two-qubit matchgates.
//!
//! With `s ≡ 1` the one-magnon sector of a gate has nested columns built
//! from parameter pairs `(u_j, v_j)` with `|u|² + |v|² = 1`, and the layer
//! `F_1 F_2 ⋯` of two-qubit unitaries carrying those pairs reproduces every
//! sector of the gate's defined action. Short gates additionally pick up a
//! diagonal phase on their rightmost qubit. Overlap matrices reduce to
//! determinants of one-magnon overlaps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sectors::{dim, SectorBasis};
use crate::system::MagnonSystem;
use crate::unitarize::OverlapMatrix;
use crate::CMatrix;

/// Matchgate parameters of one gate: `(u_j, v_j)` pairs plus, for short
/// gates, the unimodular tail phase on the rightmost qubit.
#[derive(Debug, Clone)]
pub struct MatchgateLayer {
    pub k: usize,
    pub params: Vec<(Complex64, Complex64)>,
    pub tail_phase: Option<Complex64>,
}

impl MatchgateLayer {
    /// Number of qubits the composed layer acts on.
    pub fn width(&self) -> usize {
        self.params.len() + 1
    }

    /// Worst deviation of `|u|² + |v|²` from one.
    pub fn normalization_residual(&self) -> f64 {
        let pairs = self
            .params
            .iter()
            .map(|(u, v)| (u.norm_sqr() + v.norm_sqr() - 1.0).abs());
        let tail = self.tail_phase.iter().map(|t| (t.norm() - 1.0).abs());
        pairs.chain(tail).fold(0.0, f64::max)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let gates: Vec<_> = self
            .params
            .iter()
            .enumerate()
            .map(|(idx, (u, v))| {
                serde_json::json!({
                    "j": idx + 1,
                    "u": [u.re, u.im],
                    "v": [v.re, v.im],
                })
            })
            .collect();
        let mut doc = serde_json::json!({ "k": self.k, "matchgates": gates });
        if let Some(t) = self.tail_phase {
            doc["tail_phase"] = serde_json::json!([t.re, t.im]);
        }
        doc
    }
}

/// Extracts the layer parameters from the one-magnon blocks of gate `k`:
/// `v_j` sits on the diagonal of the `|0⟩` branch and `u_j` on the first row
/// of the `|1⟩` branch, deflated by the conjugate `v` prefix.
pub fn extract_params(k: usize, p11: &CMatrix, p01: &CMatrix) -> Result<MatchgateLayer> {
    let cols = p01.ncols();
    let rows = p01.nrows();
    if p11.nrows() != 1 || p11.ncols() != cols {
        return Err(Error::Domain("emission block must be a single row".into()));
    }
    let short = cols == rows + 1;
    if !short && cols != rows {
        return Err(Error::Domain(format!(
            "one-magnon blocks of shape {rows}x{cols} are not a gate sector"
        )));
    }
    let mut params = Vec::with_capacity(rows);
    let mut v_prefix = Complex64::new(1.0, 0.0);
    for j in 0..rows {
        let v = p01[(j, j)];
        if v.norm() < 1e-12 {
            return Err(Error::VanishingDiagonal { j: j + 1 });
        }
        let u = p11[(0, j)] / v_prefix;
        params.push((u, v));
        v_prefix *= v.conj();
    }
    let tail_phase = if short {
        Some(p11[(0, cols - 1)] / v_prefix)
    } else {
        None
    };
    Ok(MatchgateLayer { k, params, tail_phase })
}

/// One-magnon blocks of gate `k`, convenience entry point for extraction.
pub fn extract_params_for_gate(k: usize, sys: &MagnonSystem) -> Result<MatchgateLayer> {
    let p11 = crate::circuit::gate_block(k, 1, 1, sys)?.matrix;
    let p01 = crate::circuit::gate_block(k, 0, 1, sys)?.matrix;
    extract_params(k, &p11, &p01)
}

// Inner block [[u, v*], [v, -u*]] with determinant -1; the matchgate
// condition fixes the doubly occupied amplitude to -1 as well, and the
// composed layer reproduces the upper charge sectors only with that sign.
fn matchgate(u: Complex64, v: Complex64) -> CMatrix {
    let mut f = CMatrix::zeros(4, 4);
    f[(0, 0)] = Complex64::new(1.0, 0.0);
    f[(3, 3)] = Complex64::new(-1.0, 0.0);
    f[(1, 1)] = u;
    f[(1, 2)] = v.conj();
    f[(2, 1)] = v;
    f[(2, 2)] = -u.conj();
    f
}

/// Embeds a two-qubit gate on qubits `(j, j+1)` of a `width`-qubit register.
fn embed_two_qubit(f: &CMatrix, j: usize, width: usize) -> CMatrix {
    let total = 1usize << width;
    let mut out = CMatrix::zeros(total, total);
    let (lo, hi) = (1usize << (j - 1), 1usize << j);
    for col in 0..total {
        let local_in = ((col & lo != 0) as usize) + 2 * ((col & hi != 0) as usize);
        let rest = col & !(lo | hi);
        for local_out in 0..4 {
            let amp = f[(local_out, local_in)];
            if amp.norm() == 0.0 {
                continue;
            }
            let row = rest | if local_out & 1 != 0 { lo } else { 0 } | if local_out & 2 != 0 { hi } else { 0 };
            out[(row, col)] = amp;
        }
    }
    out
}

/// Composes the layer into a dense unitary on `width` qubits: the staircase
/// runs right to left, with the tail phase (short gates) applied first.
pub fn compose_layer(layer: &MatchgateLayer, width: usize) -> Result<CMatrix> {
    if width != layer.width() {
        return Err(Error::Domain(format!(
            "layer of {} pairs does not fit {width} qubits",
            layer.params.len()
        )));
    }
    let total = 1usize << width;
    let mut u = CMatrix::identity(total, total);
    if let Some(phase) = layer.tail_phase {
        let bit = 1usize << (width - 1);
        for col in 0..total {
            if col & bit != 0 {
                u[(col, col)] = phase;
            }
        }
    }
    for (idx, &(uj, vj)) in layer.params.iter().enumerate().rev() {
        let f = embed_two_qubit(&matchgate(uj, vj), idx + 1, width);
        u = f * u;
    }
    Ok(u)
}

/// Overlap matrix from the fermionic determinant identity: entry `(a, b)`
/// is the determinant of the one-magnon overlaps between the two momentum
/// subsets. Valid at the symmetric point (`s ≡ 1`).
pub fn wick_overlap(r: usize, k: usize, sys: &MagnonSystem) -> Result<OverlapMatrix> {
    let slots = k.min(sys.magnons());
    if r > slots {
        return Err(Error::Domain(format!(
            "sector r={r} exceeds momentum window {slots}"
        )));
    }
    // One-magnon overlaps Σ_l conj(x_n)^l x_m^l for l < k.
    let mut c1 = CMatrix::zeros(slots, slots);
    for n in 1..=slots {
        for m in 1..=slots {
            let q = sys.x(n).conj() * sys.x(m);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut pow = Complex64::new(1.0, 0.0);
            for _ in 0..k {
                acc += pow;
                pow *= q;
            }
            c1[(n - 1, m - 1)] = acc;
        }
    }

    let subsets = SectorBasis::new(r, slots)?;
    let d = dim(r, slots)?;
    let mut mat = CMatrix::zeros(d, d);
    for (a, rows) in subsets.iter().enumerate() {
        for (b, cols) in subsets.iter().enumerate() {
            let minor = CMatrix::from_fn(r, r, |i, j| c1[(rows[i] - 1, cols[j] - 1)]);
            mat[(a, b)] = det(&minor);
        }
    }
    Ok(OverlapMatrix { r, k, slots, mat })
}

fn det(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut a = m.clone();
    let mut out = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))
            .unwrap();
        if a[(pivot, col)].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            out = -out;
        }
        out *= a[(col, col)];
        for i in (col + 1)..n {
            let f = a[(i, col)] / a[(col, col)];
            for j in col..n {
                let v = a[(col, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{assemble_unitary, gate_block};
    use crate::sectors::SectorBasis;
    use crate::states::one_magnon_norm;
    use crate::system::Scattering;
    use crate::unitarize::gram_matrix;
    use crate::{max_abs, max_abs_diff};

    fn free_system(n: usize, m: usize, seed: u64) -> MagnonSystem {
        MagnonSystem::random(n, m, 0.0, seed).with_scattering(Scattering::Free)
    }

    #[test]
    fn one_magnon_parameters_closed_form() {
        let sys = free_system(5, 1, 3);
        let x = sys.x(1);
        for k in 1..5 {
            let layer = extract_params_for_gate(k, &sys).unwrap();
            let (u, v) = layer.params[0];
            let ck = one_magnon_norm(k, x);
            let ck1 = one_magnon_norm(k + 1, x);
            assert!((u - 1.0 / ck1.sqrt()).norm() < 1e-12);
            assert!((v - x * ck.sqrt() / ck1.sqrt()).norm() < 1e-12);
            assert!(layer.normalization_residual() < 1e-12);
        }
    }

    #[test]
    fn one_magnon_layer_equals_assembled_gate_blocks() {
        let sys = free_system(5, 1, 4);
        for k in 1..5 {
            let layer = extract_params_for_gate(k, &sys).unwrap();
            let composed = compose_layer(&layer, 2).unwrap();
            let assembled = assemble_unitary(k, &sys).unwrap();
            // The defined action (rightmost input |0⟩) matches exactly.
            for row in 0..4 {
                for col in [0usize, 1] {
                    assert!((composed[(row, col)] - assembled[(row, col)]).norm() < 1e-12);
                }
            }
            // Both are unitary, so the completed columns agree up to a phase.
            let got = [composed[(1, 2)], composed[(2, 2)]];
            let want = [assembled[(1, 2)], assembled[(2, 2)]];
            let phase = got[1] / want[1];
            assert!((phase.norm() - 1.0).abs() < 1e-10);
            assert!((got[0] - phase * want[0]).norm() < 1e-10);
        }
    }

    #[test]
    fn nested_structure_reconstructs_the_one_magnon_sector() {
        let sys = free_system(8, 3, 5);
        for k in 1..7 {
            let p11 = gate_block(k, 1, 1, &sys).unwrap().matrix;
            let p01 = gate_block(k, 0, 1, &sys).unwrap().matrix;
            let layer = extract_params(k, &p11, &p01).unwrap();
            assert!(layer.normalization_residual() < 1e-10, "k={k}");

            // Rebuild the nested columns from the parameters.
            let cols = p01.ncols();
            let mut rebuilt_p11 = CMatrix::zeros(1, cols);
            let mut rebuilt_p01 = CMatrix::zeros(p01.nrows(), cols);
            let all: Vec<(Complex64, Complex64)> = layer
                .params
                .iter()
                .copied()
                .chain(layer.tail_phase.map(|t| (t, Complex64::new(0.0, 0.0))))
                .collect();
            for j in 0..cols {
                let (uj, _) = all[j];
                let mut prefix = Complex64::new(1.0, 0.0);
                for (ui, vi) in &all[..j] {
                    let _ = ui;
                    prefix *= vi.conj();
                }
                rebuilt_p11[(0, j)] = prefix * uj;
                for i in 0..p01.nrows() {
                    use std::cmp::Ordering::*;
                    rebuilt_p01[(i, j)] = match i.cmp(&j) {
                        Greater => Complex64::new(0.0, 0.0),
                        Equal => all[j].1,
                        Less => {
                            let (ui, _) = all[i];
                            let mut mid = Complex64::new(1.0, 0.0);
                            for (_, vl) in &all[i + 1..j] {
                                mid *= vl.conj();
                            }
                            -ui.conj() * mid * uj
                        }
                    };
                }
            }
            assert!(max_abs_diff(&rebuilt_p11, &p11) < 1e-10, "k={k} emission row");
            assert!(max_abs_diff(&rebuilt_p01, &p01) < 1e-10, "k={k} nested block");
        }
    }

    #[test]
    fn layer_reproduces_gates_in_all_sectors() {
        for (m, n, seed) in [(2usize, 6usize, 6u64), (3, 7, 7), (4, 8, 8)] {
            let sys = free_system(n, m, seed);
            for k in 1..n {
                let layer = extract_params_for_gate(k, &sys).unwrap();
                let width = if k >= m { m + 1 } else { k + 1 };
                let composed = compose_layer(&layer, width).unwrap();
                let assembled = assemble_unitary(k, &sys).unwrap();
                if k >= m {
                    // Long gates: compare the defined action, i.e. columns
                    // with the rightmost input qubit at |0⟩.
                    let half = 1usize << m;
                    for col in 0..half {
                        for row in 0..(2 * half) {
                            assert!(
                                (composed[(row, col)] - assembled[(row, col)]).norm() < 1e-9,
                                "m={m} k={k} entry ({row},{col})"
                            );
                        }
                    }
                } else {
                    assert!(
                        max_abs_diff(&composed, &assembled) < 1e-9,
                        "m={m} short gate k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn short_gate_tail_is_a_phase() {
        let sys = free_system(7, 4, 9);
        for k in 1..4 {
            let layer = extract_params_for_gate(k, &sys).unwrap();
            let tail = layer.tail_phase.expect("short gates carry a tail");
            assert!((tail.norm() - 1.0).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn wick_determinants_match_brute_force_overlaps() {
        for (m, seed) in [(2usize, 10u64), (3, 11), (4, 12)] {
            let sys = free_system(8, m, seed);
            for k in 1..=8usize {
                for r in 0..=k.min(m) {
                    let wick = wick_overlap(r, k, &sys).unwrap();
                    let brute = gram_matrix(r, k, &sys, false).unwrap();
                    let scale = max_abs(&brute.mat).max(1.0);
                    assert!(
                        max_abs_diff(&wick.mat, &brute.mat) < 1e-10 * scale,
                        "m={m} k={k} r={r}"
                    );
                }
            }
        }
    }

    #[test]
    fn wick_single_magnon_is_the_plain_overlap() {
        let sys = free_system(6, 2, 13);
        let wick = wick_overlap(1, 5, &sys).unwrap();
        let brute = gram_matrix(1, 5, &sys, false).unwrap();
        assert!(max_abs_diff(&wick.mat, &brute.mat) < 1e-10);
        // Diagonal entries are norms: positive reals.
        for a in 0..wick.mat.nrows() {
            assert!(wick.mat[(a, a)].re > 0.0);
            assert!(wick.mat[(a, a)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn layer_json_shape() {
        let sys = free_system(6, 3, 14);
        let layer = extract_params_for_gate(2, &sys).unwrap();
        let doc = layer.to_json_value();
        assert_eq!(doc["k"], 2);
        assert_eq!(doc["matchgates"].as_array().unwrap().len(), 2);
        assert!(doc["tail_phase"].is_array());
        let sector = SectorBasis::new(1, 3).unwrap();
        assert_eq!(sector.len(), 3);
    }
}

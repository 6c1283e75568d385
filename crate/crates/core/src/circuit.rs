//! Gate assembly, the staircase circuit, and the sector-blocked simulator.
//!
//! Every gate factorises as `A Λ B`: the inverse Cholesky factor `B` of the
//! incoming overlap matrix rotates to an orthonormal basis, the tensor `Λ`
//! advances the wavefunction by one site, and the Cholesky factor `A` of the
//! outgoing overlap matrix rotates back. Gates with index `k ≥ M` (long) act
//! on `M + 1` qubits and are specified only on inputs whose rightmost qubit
//! is `|0⟩`; the remaining columns are completed deterministically by
//! Gram-Schmidt inside each charge sector. Gates with `k < M` (short) act on
//! `k + 1` qubits and are full unitaries as built.
//!
//! The circuit applies `P_(N-1), …, P_1` in that order to `|1_M 0_(N-M)⟩`;
//! gate `P_k` starts at qubit `N - k` and its leftmost output qubit is
//! final.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::lambda::lambda_block;
use crate::sectors::{dim, SectorBasis};
use crate::states::SectorVector;
use crate::system::MagnonSystem;
use crate::dd::Cdd;
use crate::unitarize::{cholesky_dd, gram_chain_dd, recursive_cholesky, upper_triangular_inverse, DdMat, DdPair};
use crate::{max_abs_diff, CMatrix, COMPLETION_TOL, DEGENERACY_TOL};

/// One sector block `P(i, r)` of gate `k`: inputs in sector `r`, leftmost
/// output qubit `i`, remaining outputs in sector `r - i`.
#[derive(Debug, Clone)]
pub struct GateBlock {
    pub k: usize,
    pub i: usize,
    pub r: usize,
    pub matrix: CMatrix,
}

/// Per-gate sector blocks for one system, computed once per build.
///
/// The raw ansatz products are polished in a single upward sweep: each
/// gate's stacked sector isometry `S` is replaced by `S G⁻¹` with
/// `G = chol(S†S)`, and `G` is absorbed into the output side of the next
/// gate before that one is polished in turn. The sweep leaves the operator
/// product of the staircase untouched up to a global scalar on the
/// reference input, while pinning every stored gate to an isometry at
/// machine precision even where the overlap matrices are ill-conditioned.
pub(crate) struct Factors {
    /// Polished sector blocks `(i, r)` of every gate, keyed by `(k, i, r)`.
    blocks: BTreeMap<(usize, usize, usize), CMatrix>,
}

impl Factors {
    pub(crate) fn build(sys: &MagnonSystem, k_max: usize) -> Result<Self> {
        let m = sys.magnons();

        // Extended-precision Cholesky pairs of every overlap matrix the
        // ansatz needs; the factors stay in double-double form until the
        // gate products are assembled.
        let mut long: BTreeMap<(usize, usize), DdPair> = BTreeMap::new();
        let mut short_a: BTreeMap<(usize, usize), DdPair> = BTreeMap::new();
        let mut short_b: BTreeMap<(usize, usize), DdPair> = BTreeMap::new();
        let chain = gram_chain_dd(m, k_max.max(m), sys)?;
        for (k, by_sector) in chain.iter().enumerate().skip(m) {
            for r in 0..=m {
                let mat = &by_sector[&r];
                long.insert((k, r), cholesky_dd(mat, r, k, mat.rows)?);
            }
        }
        for k in 1..m.min(k_max) {
            let chain = gram_chain_dd(k + 1, k + 1, sys)?;
            for r in 0..=k {
                let rank = dim(r, k)?;
                short_a.insert((k, r), cholesky_dd(&chain[k][&r], r, k, rank)?);
            }
            for r in 0..=(k + 1) {
                let mat = &chain[k + 1][&r];
                short_b.insert((k + 1, r), cholesky_dd(mat, r, k + 1, mat.rows)?);
            }
        }
        let factor_a = |k: usize, r: usize| -> &DdPair {
            if k >= m {
                &long[&(k, r)]
            } else {
                &short_a[&(k, r)]
            }
        };
        let factor_b = |k: usize, r: usize| -> &DdPair {
            if k >= m {
                &long[&(k, r)]
            } else {
                &short_b[&(k, r)]
            }
        };

        // Raw products, then the polish sweep from gate 1 upward. `carry`
        // holds the multiplier to absorb into the next gate's outputs,
        // indexed by output sector.
        let mut blocks = BTreeMap::new();
        let mut carry: BTreeMap<usize, CMatrix> = BTreeMap::new();
        for k in 1..k_max {
            let in_w = if k >= m { m } else { k + 1 };
            let out_w = if k >= m { m } else { k };
            let mut next_carry: BTreeMap<usize, CMatrix> = BTreeMap::new();
            for r in 0..=in_w {
                let mut stacked: Vec<(usize, CMatrix)> = Vec::new();
                for i in 0..=1.min(r) {
                    if r - i > out_w {
                        continue;
                    }
                    let lam = lambda_block(i, r, in_w, sys)?.matrix;
                    let mut p =
                        triple_product_dd(&factor_a(k, r - i).a, &lam, &factor_b(k + 1, r).b);
                    if let Some(g) = carry.get(&(r - i)) {
                        p = g * p;
                    }
                    stacked.push((i, p));
                }
                // Polish the stacked isometry of this input sector.
                let d_in = dim(r, in_w)?;
                let mut t = CMatrix::zeros(d_in, d_in);
                for (_, p) in &stacked {
                    t += p.adjoint() * p;
                }
                let g = recursive_cholesky(&t).ok_or(Error::Completion {
                    k,
                    q: r,
                    residual: max_abs_diff(&t, &CMatrix::identity(d_in, d_in)),
                })?;
                let g_inv = upper_triangular_inverse(&g);
                for (i, p) in stacked {
                    blocks.insert((k, i, r), p * &g_inv);
                }
                next_carry.insert(r, g);
            }
            carry = next_carry;
        }
        Ok(Self { blocks })
    }

    fn block(&self, k: usize, i: usize, r: usize) -> Option<&CMatrix> {
        self.blocks.get(&(k, i, r))
    }
}

/// `A · Λ · B` with `A`, `B` in double-double form, exploiting the sparsity
/// of the tensor and the triangularity of `B`; the result is rounded once.
fn triple_product_dd(a: &DdMat, lam: &CMatrix, b: &DdMat) -> CMatrix {
    let rows = a.rows;
    let mid = lam.ncols();
    let mut u = DdMat::zeros(rows, mid);
    for col in 0..mid {
        for p in 0..lam.nrows() {
            let l = lam[(p, col)];
            if l == Complex64::new(0.0, 0.0) {
                continue;
            }
            let lc = Cdd::from_c64(l);
            for i in 0..rows {
                u.set(i, col, u.at(i, col).add(a.at(i, p).mul(lc)));
            }
        }
    }
    let n = b.rows;
    let mut out = CMatrix::zeros(rows, n);
    for i in 0..rows {
        for col in 0..n {
            let mut acc = Cdd::ZERO;
            for q in 0..=col {
                acc = acc.add(u.at(i, q).mul(b.at(q, col)));
            }
            out[(i, col)] = acc.to_c64();
        }
    }
    out
}

pub(crate) fn gate_block_with(
    factors: &Factors,
    k: usize,
    i: usize,
    r: usize,
    sys: &MagnonSystem,
) -> Result<GateBlock> {
    let m = sys.magnons();
    let w = if k >= m { m } else { k + 1 };
    if r > w {
        return Err(Error::Domain(format!("sector r={r} exceeds gate width {w}")));
    }
    if i > 1 || i > r {
        return Err(Error::Domain(format!(
            "output bit {i} invalid for sector {r}"
        )));
    }
    let matrix = factors
        .block(k, i, r)
        .ok_or_else(|| Error::Domain(format!("no block (i={i}, r={r}) on gate {k}")))?
        .clone();
    Ok(GateBlock { k, i, r, matrix })
}

/// Sector block `P(i, r)` of gate `k`, built from scratch.
pub fn gate_block(k: usize, i: usize, r: usize, sys: &MagnonSystem) -> Result<GateBlock> {
    sys.check_nondegenerate(&[])?;
    let factors = Factors::build(sys, k + 1)?;
    gate_block_with(&factors, k, i, r, sys)
}

/// Bit key of a position tuple: qubit `n` carries weight `2^(n-1)`.
fn key_of(tuple: &[usize]) -> usize {
    tuple.iter().map(|&n| 1usize << (n - 1)).sum()
}

pub(crate) fn assemble_with(factors: &Factors, k: usize, sys: &MagnonSystem) -> Result<CMatrix> {
    let m = sys.magnons();
    if k >= m {
        assemble_long(factors, k, sys)
    } else {
        assemble_short(factors, k, sys)
    }
}

fn assemble_long(factors: &Factors, k: usize, sys: &MagnonSystem) -> Result<CMatrix> {
    let m = sys.magnons();
    let w = m + 1;
    let dim_total = 1usize << w;
    let mut u = CMatrix::zeros(dim_total, dim_total);

    // Columns with the rightmost input qubit at |0⟩ come from the blocks.
    for r in 0..=m {
        let cols = SectorBasis::new(r, m)?;
        for i in 0..=1.min(r) {
            let block = gate_block_with(factors, k, i, r, sys)?;
            let rows = SectorBasis::new(r - i, m)?;
            for (b, tuple_in) in cols.iter().enumerate() {
                let col = key_of(tuple_in);
                for (a, tuple_out) in rows.iter().enumerate() {
                    let row = i + (key_of(tuple_out) << 1);
                    u[(row, col)] = block.matrix[(a, b)];
                }
            }
        }
    }

    // Remaining columns: deterministic Gram-Schmidt completion inside each
    // charge sector, seeded by canonical basis vectors in index order.
    for q in 0..=w {
        let sector = SectorBasis::new(q, w)?;
        let keys: Vec<usize> = (1..=sector.len()).map(|a| sector.key(a) as usize).collect();
        let mut columns: Vec<Vec<Complex64>> = Vec::new();
        let mut missing: Vec<usize> = Vec::new();
        for &col in &keys {
            if col & (1 << m) == 0 {
                columns.push(keys.iter().map(|&row| u[(row, col)]).collect());
            } else {
                missing.push(col);
            }
        }
        for col in missing {
            let mut chosen = None;
            for t in 0..keys.len() {
                let mut v = vec![Complex64::new(0.0, 0.0); keys.len()];
                v[t] = Complex64::new(1.0, 0.0);
                // Two projection passes keep the completed columns
                // orthogonal to rounding level even for nearly dependent
                // seeds.
                for _ in 0..2 {
                    for existing in &columns {
                        let overlap: Complex64 =
                            existing.iter().zip(&v).map(|(e, x)| e.conj() * x).sum();
                        for (vi, ei) in v.iter_mut().zip(existing) {
                            *vi -= overlap * ei;
                        }
                    }
                }
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 1e-6 {
                    for vi in &mut v {
                        *vi /= norm;
                    }
                    chosen = Some(v);
                    break;
                }
            }
            let v = chosen.ok_or(Error::Completion {
                k,
                q,
                residual: f64::NAN,
            })?;
            for (t, &row) in keys.iter().enumerate() {
                u[(row, col)] = v[t];
            }
            columns.push(v);
        }

        // Isometry check on the finished sector.
        let d = keys.len();
        let mut block = CMatrix::zeros(d, d);
        for (a, &row) in keys.iter().enumerate() {
            for (b, &col) in keys.iter().enumerate() {
                block[(a, b)] = u[(row, col)];
            }
        }
        let residual = max_abs_diff(&(block.adjoint() * &block), &CMatrix::identity(d, d));
        if residual > COMPLETION_TOL {
            return Err(Error::Completion { k, q, residual });
        }
    }
    Ok(u)
}

fn assemble_short(factors: &Factors, k: usize, sys: &MagnonSystem) -> Result<CMatrix> {
    let w = k + 1;
    let dim_total = 1usize << w;
    let mut u = CMatrix::zeros(dim_total, dim_total);
    for r in 0..=w {
        let cols = SectorBasis::new(r, w)?;
        for i in 0..=1.min(r) {
            if r - i > k {
                continue; // no output configuration on k qubits
            }
            let block = gate_block_with(factors, k, i, r, sys)?;
            let rows = SectorBasis::new(r - i, k)?;
            for (b, tuple_in) in cols.iter().enumerate() {
                let col = key_of(tuple_in);
                for (a, tuple_out) in rows.iter().enumerate() {
                    let row = i + (key_of(tuple_out) << 1);
                    u[(row, col)] = block.matrix[(a, b)];
                }
            }
        }
        let d = cols.len();
        let keys: Vec<usize> = (1..=d).map(|a| cols.key(a) as usize).collect();
        let mut block = CMatrix::zeros(d, d);
        for (a, &row) in keys.iter().enumerate() {
            for (b, &col) in keys.iter().enumerate() {
                block[(a, b)] = u[(row, col)];
            }
        }
        let residual = max_abs_diff(&(block.adjoint() * &block), &CMatrix::identity(d, d));
        if residual > COMPLETION_TOL {
            return Err(Error::Completion { k, q: r, residual });
        }
    }
    Ok(u)
}

/// Dense unitary of gate `k`, built from scratch.
pub fn assemble_unitary(k: usize, sys: &MagnonSystem) -> Result<CMatrix> {
    sys.check_nondegenerate(&[])?;
    let factors = Factors::build(sys, k + 1)?;
    assemble_with(&factors, k, sys)
}

/// One placed gate: index, 1-based qubit span, dense unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGate {
    pub k: usize,
    pub qubits: Vec<usize>,
    pub unitary: CMatrix,
}

/// A fully constructed circuit, with enough metadata to reproduce it.
///
/// Gates are stored in index order `P_1 … P_(N-1)`; application order is the
/// reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitDescription {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    /// Momentum variables `x_a`.
    pub momenta: Vec<Complex64>,
    pub gates: Vec<CircuitGate>,
}

impl CircuitDescription {
    /// Reconstructs the magnon system (XXZ amplitude) this circuit encodes.
    pub fn system(&self) -> Result<MagnonSystem> {
        MagnonSystem::new(self.n, self.momenta.clone(), self.delta)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let momenta: Vec<_> = self
            .momenta
            .iter()
            .map(|x| json!({ "re": x.re, "im": x.im }))
            .collect();
        let gates: Vec<_> = self
            .gates
            .iter()
            .map(|g| {
                let dim = g.unitary.nrows();
                let rows: Vec<Vec<[f64; 2]>> = (0..dim)
                    .map(|a| {
                        (0..dim)
                            .map(|b| [g.unitary[(a, b)].re, g.unitary[(a, b)].im])
                            .collect()
                    })
                    .collect();
                json!({
                    "k": g.k,
                    "qubits": g.qubits,
                    "unitary": { "dim": dim, "rows": rows },
                })
            })
            .collect();
        json!({
            "version": 1,
            "N": self.n,
            "M": self.m,
            "delta": self.delta,
            "momenta": momenta,
            "gates": gates,
            "meta": {
                "library": concat!("bethe-circuit ", env!("CARGO_PKG_VERSION")),
                "degeneracy_tol": DEGENERACY_TOL,
                "completion_tol": COMPLETION_TOL,
            },
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("circuit serialises")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let get = |key: &str| {
            v.get(key)
                .ok_or_else(|| Error::Domain(format!("circuit JSON missing \"{key}\"")))
        };
        let n = get("N")?.as_u64().unwrap_or(0) as usize;
        let m = get("M")?.as_u64().unwrap_or(0) as usize;
        let delta = get("delta")?
            .as_f64()
            .ok_or_else(|| Error::Domain("delta must be a number".into()))?;
        let momenta = get("momenta")?
            .as_array()
            .ok_or_else(|| Error::Domain("momenta must be an array".into()))?
            .iter()
            .map(|c| {
                Ok(Complex64::new(
                    c["re"]
                        .as_f64()
                        .ok_or_else(|| Error::Domain("bad momentum entry".into()))?,
                    c["im"]
                        .as_f64()
                        .ok_or_else(|| Error::Domain("bad momentum entry".into()))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut gates = Vec::new();
        for g in get("gates")?
            .as_array()
            .ok_or_else(|| Error::Domain("gates must be an array".into()))?
        {
            let k = g["k"].as_u64().unwrap_or(0) as usize;
            let qubits: Vec<usize> = g["qubits"]
                .as_array()
                .ok_or_else(|| Error::Domain("gate qubits must be an array".into()))?
                .iter()
                .map(|q| q.as_u64().unwrap_or(0) as usize)
                .collect();
            let dim = g["unitary"]["dim"].as_u64().unwrap_or(0) as usize;
            if dim != 1usize << qubits.len() {
                return Err(Error::Domain(format!(
                    "gate {k}: dimension {dim} does not match {} qubits",
                    qubits.len()
                )));
            }
            let rows = g["unitary"]["rows"]
                .as_array()
                .ok_or_else(|| Error::Domain("unitary rows must be an array".into()))?;
            if rows.len() != dim {
                return Err(Error::Domain(format!("gate {k}: wrong row count")));
            }
            let mut unitary = CMatrix::zeros(dim, dim);
            for (a, row) in rows.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| Error::Domain("unitary row must be an array".into()))?;
                if row.len() != dim {
                    return Err(Error::Domain(format!("gate {k}: wrong column count")));
                }
                for (b, z) in row.iter().enumerate() {
                    unitary[(a, b)] = Complex64::new(
                        z[0].as_f64().ok_or_else(|| Error::Domain("bad entry".into()))?,
                        z[1].as_f64().ok_or_else(|| Error::Domain("bad entry".into()))?,
                    );
                }
            }
            gates.push(CircuitGate { k, qubits, unitary });
        }
        Ok(Self { n, m, delta, momenta, gates })
    }
}

/// Qubit span of gate `k` in a circuit on `n` qubits with `m` magnons.
pub fn gate_span(k: usize, n: usize, m: usize) -> Vec<usize> {
    let start = n - k;
    let end = (n - k + m).min(n);
    (start..=end).collect()
}

/// Builds the full staircase `P_1 … P_(N-1)` for the given system.
pub fn build_circuit(sys: &MagnonSystem) -> Result<CircuitDescription> {
    let (n, m) = (sys.qubits(), sys.magnons());
    if m < 1 {
        return Err(Error::System("circuit needs at least one magnon".into()));
    }
    if n <= m {
        return Err(Error::System(format!(
            "circuit needs more qubits than magnons, got N={n}, M={m}"
        )));
    }
    sys.check_nondegenerate(&[])?;
    let factors = Factors::build(sys, n)?;
    let mut gates = Vec::with_capacity(n - 1);
    for k in 1..n {
        gates.push(CircuitGate {
            k,
            qubits: gate_span(k, n, m),
            unitary: assemble_with(&factors, k, sys)?,
        });
    }
    Ok(CircuitDescription {
        n,
        m,
        delta: sys.delta(),
        momenta: sys.momenta().to_vec(),
        gates,
    })
}

/// Sector blocks of a dense gate unitary, indexed by charge.
fn charge_blocks(unitary: &CMatrix, w: usize) -> Result<Vec<CMatrix>> {
    let mut blocks = Vec::with_capacity(w + 1);
    for q in 0..=w {
        let sector = SectorBasis::new(q, w)?;
        let keys: Vec<usize> = (1..=sector.len()).map(|a| sector.key(a) as usize).collect();
        let d = keys.len();
        let mut block = CMatrix::zeros(d, d);
        for (a, &row) in keys.iter().enumerate() {
            for (b, &col) in keys.iter().enumerate() {
                block[(a, b)] = unitary[(row, col)];
            }
        }
        blocks.push(block);
    }
    #[cfg(debug_assertions)]
    {
        // Charge conservation: nothing outside the sector blocks.
        for row in 0..unitary.nrows() {
            for col in 0..unitary.ncols() {
                if (row as u64).count_ones() != (col as u64).count_ones() {
                    debug_assert!(
                        unitary[(row, col)].norm() < 1e-12,
                        "charge-violating entry at ({row}, {col})"
                    );
                }
            }
        }
    }
    Ok(blocks)
}

/// Applies a placed gate to sector amplitudes: every basis state splits into
/// an in-span and an out-of-span part, and states sharing the latter mix
/// through the gate's charge block.
fn apply_placed_gate(
    amps: &[Complex64],
    basis: &SectorBasis,
    unitary: &CMatrix,
    start: usize,
    w: usize,
) -> Result<Vec<Complex64>> {
    let span_mask: u64 = ((1u64 << w) - 1) << (start - 1);
    let blocks = charge_blocks(unitary, w)?;

    // Local colex rank of each in-span key, per charge.
    let mut local_rank: Vec<HashMap<u64, usize>> = Vec::with_capacity(w + 1);
    for q in 0..=w {
        let sector = SectorBasis::new(q, w)?;
        local_rank.push((1..=sector.len()).map(|a| (sector.key(a), a - 1)).collect());
    }

    let mut groups: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for a in 1..=basis.len() {
        let mask = basis.key(a);
        let outside = mask & !span_mask;
        let local = (mask & span_mask) >> (start - 1);
        let q = local.count_ones() as usize;
        groups
            .entry(outside)
            .or_default()
            .push((a - 1, local_rank[q][&local]));
    }

    let mut next = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (outside, members) in &groups {
        let q = basis.magnons() - outside.count_ones() as usize;
        let block = &blocks[q];
        let mut x = vec![Complex64::new(0.0, 0.0); block.ncols()];
        for &(global, local) in members {
            x[local] = amps[global];
        }
        for &(global, local) in members {
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, xb) in x.iter().enumerate() {
                acc += block[(local, b)] * xb;
            }
            next[global] = acc;
        }
    }
    Ok(next)
}

/// Applies the circuit to `|1_M 0_(N-M)⟩`, keeping the state inside the
/// `M`-magnon sector of `N` qubits throughout.
pub fn simulate(circ: &CircuitDescription) -> Result<SectorVector> {
    let basis = SectorBasis::new(circ.m, circ.n)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); basis.len()];
    let seed: Vec<usize> = (1..=circ.m).collect();
    amps[basis.index_of(&seed)? - 1] = Complex64::new(1.0, 0.0);

    for gate in circ.gates.iter().rev() {
        amps = apply_placed_gate(&amps, &basis, &gate.unitary, gate.qubits[0], gate.qubits.len())?;
    }
    SectorVector::from_amps(basis, amps)
}

/// Fidelity of the simulated circuit output against the normalised
/// brute-force wavefunction of the same system.
pub fn simulation_fidelity(circ: &CircuitDescription) -> Result<f64> {
    let sys = circ.system()?;
    let tuple: Vec<usize> = (1..=circ.m).collect();
    let oracle = crate::states::cba_wavefunction(&tuple, circ.n, &sys)?;
    simulate(circ)?.fidelity(&oracle)
}

/// Runs the truncated staircase of short gates `P_(k-1) … P_1` on a
/// `k`-qubit register prepared in the sector basis state `positions`.
///
/// When the construction is consistent this equals the orthonormalised
/// combination `Σ_a B_(k, a b) |Ψ_a⟩` of the `k`-qubit Bethe wavefunctions
/// with momenta drawn from the first `k` slots; see
/// [`crate::unitarize::cholesky_det`] for `B`.
pub fn short_subcircuit_state(
    positions: &[usize],
    k: usize,
    sys: &MagnonSystem,
) -> Result<SectorVector> {
    let m = sys.magnons();
    if k > m {
        return Err(Error::Domain(format!(
            "truncated short staircase needs k <= M, got k={k}, M={m}"
        )));
    }
    let r = positions.len();
    let basis = SectorBasis::new(r, k)?;
    let start_index = basis.index_of(positions)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); basis.len()];
    amps[start_index - 1] = Complex64::new(1.0, 0.0);

    let factors = Factors::build(sys, k)?;
    for j in (1..k).rev() {
        let unitary = assemble_with(&factors, j, sys)?;
        // Gate P_j occupies the last j + 1 qubits of the register.
        amps = apply_placed_gate(&amps, &basis, &unitary, k - j, j + 1)?;
    }
    SectorVector::from_amps(basis, amps)
}

/// Per-gate, per-sector unitarity residual of the stacked blocks.
#[derive(Debug, Clone)]
pub struct SectorResidual {
    pub k: usize,
    pub r: usize,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct UnitarityReport {
    pub tol: f64,
    pub max_residual: f64,
    pub sectors: Vec<SectorResidual>,
    pub pass: bool,
}

/// Checks `Σ_i P(i, r)† P(i, r) = 1` for every gate and sector of a circuit,
/// reading the blocks back from the dense unitaries.
pub fn verify_unitarity(circ: &CircuitDescription, tol: f64) -> Result<UnitarityReport> {
    let m = circ.m;
    let mut sectors = Vec::new();
    let mut max_residual: f64 = 0.0;
    for gate in &circ.gates {
        let k = gate.k;
        let long = k >= m;
        let in_w = if long { m } else { k + 1 };
        let out_w = if long { m } else { k };
        for r in 0..=in_w {
            let cols = SectorBasis::new(r, in_w)?;
            let d_in = cols.len();
            let mut sum = CMatrix::zeros(d_in, d_in);
            for i in 0..=1.min(r) {
                if r - i > out_w {
                    continue;
                }
                let rows = SectorBasis::new(r - i, out_w)?;
                let mut block = CMatrix::zeros(rows.len(), d_in);
                for (b, tuple_in) in cols.iter().enumerate() {
                    let col = key_of(tuple_in);
                    for (a, tuple_out) in rows.iter().enumerate() {
                        let row = i + (key_of(tuple_out) << 1);
                        block[(a, b)] = gate.unitary[(row, col)];
                    }
                }
                sum += block.adjoint() * block;
            }
            let residual = max_abs_diff(&sum, &CMatrix::identity(d_in, d_in));
            max_residual = max_residual.max(residual);
            sectors.push(SectorResidual { k, r, residual });
        }
    }
    Ok(UnitarityReport {
        tol,
        max_residual,
        pass: max_residual < tol,
        sectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::max_abs;
    use crate::states::{cba_wavefunction, one_magnon_norm};
    use crate::unitarize::{cholesky_det, gram_chain};

    #[test]
    fn one_magnon_gate_closed_form() {
        let sys = MagnonSystem::random(6, 1, 0.5, 31);
        let x = sys.x(1);
        for k in 1..6 {
            let ck = one_magnon_norm(k, x);
            let ck1 = one_magnon_norm(k + 1, x);
            let p1 = gate_block(k, 1, 1, &sys).unwrap();
            let p0 = gate_block(k, 0, 1, &sys).unwrap();
            assert!((p1.matrix[(0, 0)] - 1.0 / ck1.sqrt()).norm() < 1e-12);
            // The free phase reproduces the momentum: the |0⟩ branch carries x.
            assert!((p0.matrix[(0, 0)] - x * ck.sqrt() / ck1.sqrt()).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_sector_block_is_one() {
        let sys = MagnonSystem::random(5, 2, 1.0, 32);
        let p = gate_block(2, 0, 0, &sys).unwrap();
        assert_eq!(p.matrix.shape(), (1, 1));
        assert!((p.matrix[(0, 0)] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn long_gate_unitary_is_unitary() {
        let sys = MagnonSystem::random(8, 3, 0.5, 33);
        for k in 3..6 {
            let u = assemble_unitary(k, &sys).unwrap();
            let id = CMatrix::identity(u.nrows(), u.ncols());
            assert!(max_abs_diff(&(u.adjoint() * &u), &id) < 1e-10, "k={k}");
        }
    }

    #[test]
    fn one_magnon_completion_matches_closed_form_up_to_phase() {
        let sys = MagnonSystem::random(5, 1, 0.5, 34);
        let x = sys.x(1);
        let k = 3;
        let u = assemble_unitary(k, &sys).unwrap();
        let ck = one_magnon_norm(k, x);
        let ck1 = one_magnon_norm(k + 1, x);
        // Completed column for input |01⟩: proportional to
        // (x* sqrt(C_k), -1)/sqrt(C_(k+1)) in the (|10⟩, |01⟩) basis.
        let got = [u[(1, 2)], u[(2, 2)]];
        let want = [
            x.conj() * ck.sqrt() / ck1.sqrt(),
            Complex64::new(-1.0, 0.0) / ck1.sqrt(),
        ];
        let phase = got[1] / want[1];
        assert!((phase.norm() - 1.0).abs() < 1e-10);
        assert!((got[0] - phase * want[0]).norm() < 1e-10);
    }

    #[test]
    fn build_rejects_degenerate_and_trivial() {
        let x = Complex64::new(0.5, 0.1);
        let sys = MagnonSystem::new(4, vec![x, x], 0.5).unwrap();
        assert!(build_circuit(&sys).is_err());
        let sys = MagnonSystem::random(3, 3, 0.5, 35);
        assert!(build_circuit(&sys).is_err()); // N == M
    }

    #[test]
    fn circuit_shapes_follow_the_staircase() {
        let sys = MagnonSystem::random(6, 3, 0.5, 36);
        let circ = build_circuit(&sys).unwrap();
        assert_eq!(circ.gates.len(), 5);
        let dims: Vec<usize> = circ.gates.iter().map(|g| g.unitary.nrows()).collect();
        assert_eq!(dims, vec![4, 8, 16, 16, 16]);
        assert_eq!(circ.gates[0].qubits, vec![5, 6]); // P_1 on the last two qubits
        assert_eq!(circ.gates[4].qubits, vec![1, 2, 3, 4]); // P_5 on the first M+1
    }

    #[test]
    fn simulate_prepares_the_plane_wave() {
        let sys = MagnonSystem::random(4, 1, 0.7, 37);
        let x = sys.x(1);
        let circ = build_circuit(&sys).unwrap();
        let out = simulate(&circ).unwrap();
        let c4 = one_magnon_norm(4, x);
        for n in 1..=4usize {
            let want = x.powi(n as i32 - 1) / c4.sqrt();
            assert!((out.amp(n) - want).norm() < 1e-10);
        }
    }

    #[test]
    fn simulate_matches_oracle_small_cases() {
        for (n, m, delta, seed) in [
            (2usize, 1usize, 0.5f64, 1u64),
            (3, 2, 0.5, 2),
            (5, 2, 1.0, 3),
            (5, 4, 0.0, 4),
            (6, 3, 2.0, 5),
            (5, 4, 1.0, 6), // M = N - 1 edge
        ] {
            let sys = MagnonSystem::random(n, m, delta, seed);
            let circ = build_circuit(&sys).unwrap();
            let out = simulate(&circ).unwrap();
            let tuple: Vec<usize> = (1..=m).collect();
            let oracle = cba_wavefunction(&tuple, n, &sys).unwrap();
            let f = out.fidelity(&oracle).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "fidelity {f} at N={n} M={m}");
        }
    }

    #[test]
    fn builds_are_bit_identical() {
        let sys = MagnonSystem::random(6, 2, 0.5, 38);
        let a = build_circuit(&sys).unwrap();
        let b = build_circuit(&sys).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn json_roundtrip_preserves_simulation() {
        let sys = MagnonSystem::random(5, 2, 1.5, 39);
        let circ = build_circuit(&sys).unwrap();
        let text = circ.to_json_string();
        let back = CircuitDescription::from_json_str(&text).unwrap();
        assert_eq!(circ, back);
        let a = simulate(&circ).unwrap();
        let b = simulate(&back).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn unitarity_report_flags_corruption() {
        let sys = MagnonSystem::random(5, 2, 0.5, 40);
        let mut circ = build_circuit(&sys).unwrap();
        let report = verify_unitarity(&circ, 1e-10).unwrap();
        assert!(report.pass, "max residual {}", report.max_residual);
        // The r = 0 sector is the scalar 1: residual exactly zero.
        assert!(report
            .sectors
            .iter()
            .filter(|s| s.r == 0)
            .all(|s| s.residual == 0.0));

        circ.gates[2].unitary[(1, 1)] += Complex64::new(1e-3, 0.0);
        let report = verify_unitarity(&circ, 1e-10).unwrap();
        assert!(!report.pass);
        assert!(report.max_residual > 5e-4 && report.max_residual < 5e-2);
    }

    #[test]
    fn truncated_short_staircase_builds_orthonormalized_wavefunctions() {
        // The k-qubit truncated circuit equals the Λ-network route composed
        // with the basis change B, including the worked identities of the
        // three-site case.
        let sys = MagnonSystem::random(8, 5, 0.8, 77);
        for k in 1..=5usize {
            let chain = gram_chain(k, k, &sys).unwrap();
            for r in 0..=k {
                let pair = cholesky_det(&chain[k][&r]).unwrap();
                let subsets = SectorBasis::new(r, k).unwrap();
                for b in 1..=subsets.len() {
                    let got = short_subcircuit_state(subsets.positions(b), k, &sys).unwrap();
                    let mut want = SectorVector::zeros(SectorBasis::new(r, k).unwrap());
                    for a in 1..=subsets.len() {
                        let psi =
                            cba_wavefunction(subsets.positions(a), k, &sys).unwrap();
                        let coeff = pair.b[(a - 1, b - 1)];
                        for (w, p) in want.amps_mut().iter_mut().zip(psi.amps()) {
                            *w += coeff * p;
                        }
                    }
                    let scale = want.norm().max(1.0);
                    assert!(
                        got.max_abs_diff(&want) < 1e-9 * scale,
                        "k={k} r={r} input {:?}",
                        subsets.positions(b)
                    );
                }
            }
        }
    }

    #[test]
    fn gates_do_not_depend_on_chain_length() {
        let xs = MagnonSystem::random(9, 2, 0.5, 41).momenta().to_vec();
        let small = MagnonSystem::new(5, xs.clone(), 0.5).unwrap();
        let large = MagnonSystem::new(9, xs, 0.5).unwrap();
        let a = build_circuit(&small).unwrap();
        let b = build_circuit(&large).unwrap();
        for k in 1..5 {
            assert!(
                max_abs(&(&a.gates[k - 1].unitary - &b.gates[k - 1].unitary)) < 1e-12,
                "gate {k} differs between N=5 and N=9"
            );
        }
    }
}

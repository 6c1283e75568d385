//! Overlap matrices of partial Bethe wavefunctions and their Cholesky
//! factors.
//!
//! The states entering a gate at step `k` are Bethe wavefunctions on `k`
//! qubits whose momenta are drawn, configuration by configuration, from a
//! window of `slots` momenta. Their Gram matrix `C` is Hermitian positive
//! definite, and the pair `A` (upper Cholesky factor) and `B = A⁻¹` performs
//! the change to an orthonormal basis. Below the magnon number the momentum
//! window is one slot wider than the qubit support, the Gram matrix `Ĉ`
//! becomes positive *semidefinite*, and `A` turns upper rectangular with
//! `d(r, k)` rows.
//!
//! Two computation paths coexist on purpose: [`gram_matrix`] builds overlaps
//! by brute-force inner products of oracle wavefunctions, while
//! [`gram_recursion_step`] grows them one qubit at a time through the sparse
//! tensors of [`crate::lambda`]. Likewise the closed determinant formulas for
//! `A` and `B` are cross-checked against a textbook recursive Cholesky on
//! every call.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde_json::json;

use crate::dd::{Cdd, Dd};
use crate::error::{Error, Result};
use crate::lambda::lambda_block;
use crate::sectors::{dim, SectorBasis};
use crate::states::cba_wavefunction;
use crate::system::MagnonSystem;
use crate::{max_abs_diff, CMatrix, SINGULARITY_TOL};

/// Gram matrix of the `r`-magnon Bethe wavefunctions on `k` qubits with
/// momentum subsets drawn from `1..=slots`.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    pub r: usize,
    pub k: usize,
    /// Width of the momentum window; `min(k, M)` for plain matrices,
    /// `k + 1` for extended ones.
    pub slots: usize,
    pub mat: CMatrix,
}

impl OverlapMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Rank of the matrix: full for plain kinds, `d(r, k)` for extended.
    pub fn rank(&self) -> Result<usize> {
        if self.is_extended() {
            Ok(dim(self.r, self.k)?.min(self.dim()))
        } else {
            Ok(self.dim())
        }
    }

    pub fn is_extended(&self) -> bool {
        self.slots == self.k + 1
    }

    /// Deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> f64 {
        max_abs_diff(&self.mat, &self.mat.adjoint())
    }
}

fn momentum_window(r: usize, k: usize, sys: &MagnonSystem, extended: bool) -> Result<usize> {
    let m = sys.magnons();
    if extended && k >= m {
        return Err(Error::Domain(format!(
            "extended overlap requested at k={k} >= M={m}"
        )));
    }
    let slots = if extended { k + 1 } else { k.min(m) };
    if r > slots {
        return Err(Error::Domain(format!(
            "sector r={r} exceeds momentum window {slots}"
        )));
    }
    Ok(slots)
}

/// Overlap matrix by brute force: every entry is an inner product of two
/// oracle wavefunctions. Reference path; cost `d² · r! · d(r, k)`.
pub fn gram_matrix(r: usize, k: usize, sys: &MagnonSystem, extended: bool) -> Result<OverlapMatrix> {
    let slots = momentum_window(r, k, sys, extended)?;
    let subsets = SectorBasis::new(r, slots)?;
    let states: Vec<_> = subsets
        .iter()
        .map(|tuple| cba_wavefunction(tuple, k, sys))
        .collect::<Result<_>>()?;
    let d = states.len();
    let mut mat = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            mat[(a, b)] = states[a].inner(&states[b])?;
        }
    }
    Ok(OverlapMatrix { r, k, slots, mat })
}

/// One step of the overlap recursion at fixed momentum window: from all
/// sectors at size `k` to all sectors at size `k + 1`,
/// `C_(k+1) = Σ_i Λ(i)† C_k Λ(i)`.
///
/// In the short regime the input matrices are the extended kind (window
/// `k + 1`), matching the ghost-leg width of the tensors.
pub fn gram_recursion_step(
    prev: &BTreeMap<usize, OverlapMatrix>,
    k: usize,
    sys: &MagnonSystem,
) -> Result<BTreeMap<usize, OverlapMatrix>> {
    let w = prev
        .values()
        .next()
        .ok_or_else(|| Error::Domain("empty overlap map".into()))?
        .slots;
    let mut out = BTreeMap::new();
    for r in 0..=w {
        let mut acc = CMatrix::zeros(dim(r, w)?, dim(r, w)?);
        for i in 0..=1.min(r) {
            let lam = lambda_block(i, r, w, sys)?.matrix;
            let c = prev
                .get(&(r - i))
                .ok_or_else(|| Error::Domain(format!("missing sector {} at size {k}", r - i)))?;
            if c.slots != w || c.k != k {
                return Err(Error::Domain(format!(
                    "inconsistent overlap map entry (r={}, k={}, slots={})",
                    r - i,
                    c.k,
                    c.slots
                )));
            }
            acc += lam.adjoint() * &c.mat * &lam;
        }
        out.insert(
            r,
            OverlapMatrix {
                r,
                k: k + 1,
                slots: w,
                mat: acc,
            },
        );
    }
    Ok(out)
}

/// Overlap matrices for all sectors and sizes `0..=k_max` at a fixed
/// momentum window `w`. The base case is the empty chain, where only the
/// zero-magnon sector carries a state; every other sector starts as the Gram
/// matrix of zero vectors.
///
/// The recursion is accumulated in double-double precision and rounded per
/// snapshot: entries of the later matrices combine terms across tens of
/// orders of magnitude, and plain f64 accumulation leaves the small entries
/// dominated by cancellation noise at large magnon numbers.
/// Dense matrix with double-double entries, used on the internal
/// high-precision path.
#[derive(Debug, Clone)]
pub(crate) struct DdMat {
    pub rows: usize,
    pub cols: usize,
    e: Vec<Cdd>,
}

impl DdMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            e: vec![Cdd::ZERO; rows * cols],
        }
    }

    pub fn from_cmatrix(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, Cdd::from_c64(m[(i, j)]));
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Cdd {
        self.e[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Cdd) {
        self.e[i * self.cols + j] = v;
    }

    pub fn to_cmatrix(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j).to_c64())
    }
}

/// Overlap matrices for every sector and size `0..=k_max` at a fixed
/// momentum window `w`, carried in double-double precision. The base case is
/// the empty chain, where only the zero-magnon sector holds a state; every
/// other sector starts as the Gram matrix of zero vectors.
///
/// Entries of the later matrices combine terms across tens of orders of
/// magnitude; plain f64 accumulation leaves the small entries dominated by
/// cancellation noise at large magnon numbers, which is why the whole chain
/// runs at extended precision internally.
pub(crate) fn gram_chain_dd(
    w: usize,
    k_max: usize,
    sys: &MagnonSystem,
) -> Result<Vec<BTreeMap<usize, DdMat>>> {
    // Sparse tensors once per sector: the diagonal branch and the
    // per-column nonzeros of the emission branch.
    let mut diag: Vec<Vec<Complex64>> = Vec::with_capacity(w + 1);
    let mut emit: Vec<Vec<Vec<(usize, Complex64)>>> = Vec::with_capacity(w + 1);
    for r in 0..=w {
        let l0 = lambda_block(0, r, w, sys)?.matrix;
        diag.push((0..l0.ncols()).map(|a| l0[(a, a)]).collect());
        if r == 0 {
            emit.push(Vec::new());
        } else {
            let l1 = lambda_block(1, r, w, sys)?.matrix;
            let cols = (0..l1.ncols())
                .map(|b| {
                    (0..l1.nrows())
                        .filter(|&a| l1[(a, b)] != Complex64::new(0.0, 0.0))
                        .map(|a| (a, l1[(a, b)]))
                        .collect()
                })
                .collect();
            emit.push(cols);
        }
    }

    let dims: Vec<usize> = (0..=w).map(|r| dim(r, w)).collect::<Result<_>>()?;
    let mut state: Vec<DdMat> = dims.iter().map(|&d| DdMat::zeros(d, d)).collect();
    state[0].set(0, 0, Cdd::from_c64(Complex64::new(1.0, 0.0)));

    let snapshot = |state: &[DdMat]| {
        (0..=w).map(|r| (r, state[r].clone())).collect::<BTreeMap<_, _>>()
    };

    let mut chain = vec![snapshot(&state)];
    for _ in 0..k_max {
        let mut next: Vec<DdMat> = dims.iter().map(|&d| DdMat::zeros(d, d)).collect();
        for r in 0..=w {
            let d = dims[r];
            // Diagonal branch: conj(λ_a) C_ab λ_b.
            for a in 0..d {
                let la = Cdd::from_c64(diag[r][a].conj());
                for b in 0..d {
                    let lb = Cdd::from_c64(diag[r][b]);
                    next[r].set(a, b, la.mul(state[r].at(a, b)).mul(lb));
                }
            }
            // Emission branch through the sector below, in two sparse
            // stages: T = C Λ then Λ† T.
            if r > 0 {
                let dl = dims[r - 1];
                let mut t = DdMat::zeros(dl, d);
                for p in 0..dl {
                    for b in 0..d {
                        let mut acc = Cdd::ZERO;
                        for &(q, lqb) in &emit[r][b] {
                            acc = acc.add(state[r - 1].at(p, q).mul(Cdd::from_c64(lqb)));
                        }
                        t.set(p, b, acc);
                    }
                }
                for a in 0..d {
                    for b in 0..d {
                        let mut acc = next[r].at(a, b);
                        for &(p, lpa) in &emit[r][a] {
                            acc = acc.add(Cdd::from_c64(lpa.conj()).mul(t.at(p, b)));
                        }
                        next[r].set(a, b, acc);
                    }
                }
            }
        }
        state = next;
        chain.push(snapshot(&state));
    }
    Ok(chain)
}

/// Overlap matrices for all sectors and sizes `0..=k_max` at a fixed
/// momentum window `w`, rounded to f64 from the extended-precision chain.
pub fn gram_chain(
    w: usize,
    k_max: usize,
    sys: &MagnonSystem,
) -> Result<Vec<BTreeMap<usize, OverlapMatrix>>> {
    let chain = gram_chain_dd(w, k_max, sys)?;
    Ok(chain
        .into_iter()
        .enumerate()
        .map(|(k, by_sector)| {
            by_sector
                .into_iter()
                .map(|(r, m)| {
                    (
                        r,
                        OverlapMatrix {
                            r,
                            k,
                            slots: w,
                            mat: m.to_cmatrix(),
                        },
                    )
                })
                .collect()
        })
        .collect())
}

/// Extended overlap from the plain one, `Ĉ = L† C L`.
pub fn extended_from_plain(c: &OverlapMatrix, l: &CMatrix) -> OverlapMatrix {
    OverlapMatrix {
        r: c.r,
        k: c.k,
        slots: c.slots + 1,
        mat: l.adjoint() * &c.mat * l,
    }
}

const DD_PIVOT_FLOOR: f64 = 1e-26;

/// Unit-lower-triangular factorisation `C̃ = L D L†` of the leading block of
/// the diagonally equilibrated matrix `C̃ = S⁻¹ C S⁻¹`, `S = diag(√C_jj)`,
/// carried in double-double precision. The pivots `d_a` are the ratios of
/// consecutive leading minors of `C̃`.
///
/// Overlap matrices of many magnons span an enormous dynamic range (state
/// norms grow with powers of the scattering amplitudes); equilibration keeps
/// every pivot O(1) and the extended precision keeps the factor pair
/// mutually consistent even when the conditioning exceeds what f64 can
/// represent.
struct DdSweep {
    l: DdMat,
    d: Vec<Dd>,
    /// Equilibration scales √C_jj over all columns of the input.
    scales: Vec<Dd>,
    /// Index of the first floored pivot, if any.
    first_clamped: Option<usize>,
    /// Index of the first pivot below 1e-3, if any. Bug guards (the
    /// indefiniteness error and the route cross-check) only act on the
    /// well-conditioned prefix before it.
    first_soft: Option<usize>,
}

/// Entry `(i, j)` of the equilibrated matrix; diagonals are exactly one
/// (Gram diagonals are real, their imaginary residue is rounding noise).
fn scaled_entry(mat: &DdMat, scales: &[Dd], i: usize, j: usize) -> Cdd {
    if i == j {
        Cdd::from_c64(Complex64::new(1.0, 0.0))
    } else {
        mat.at(i, j).div_real(scales[i]).div_real(scales[j])
    }
}

fn dd_sweep(mat: &DdMat, meta_r: usize, meta_k: usize, size: usize) -> Result<DdSweep> {
    let mut scales = Vec::with_capacity(mat.cols);
    for j in 0..mat.cols {
        let diag = mat.at(j, j).re;
        if diag.hi <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                r: meta_r,
                k: meta_k,
                minor: j + 1,
            });
        }
        scales.push(diag.sqrt());
    }

    let one = Cdd::from_c64(Complex64::new(1.0, 0.0));
    let mut l = DdMat::zeros(size, size);
    for i in 0..size {
        l.set(i, i, one);
    }
    let mut d = vec![Dd::ZERO; size];
    let mut first_clamped = None;
    let mut first_soft = None;
    for j in 0..size {
        let mut dj = Dd::from_f64(1.0); // unit diagonal after scaling
        for s in 0..j {
            let ls = l.at(j, s);
            let mag = ls.re.mul(ls.re).add(ls.im.mul(ls.im));
            dj = dj.sub(mag.mul(d[s]));
        }
        let djf = dj.to_f64();
        if djf <= -1e-3 && first_soft.is_none() {
            // Genuinely indefinite input; once conditioning has collapsed
            // negative pivots are rounding noise in gauge directions and are
            // floored instead.
            return Err(Error::NotPositiveDefinite {
                r: meta_r,
                k: meta_k,
                minor: j + 1,
            });
        }
        if djf < DD_PIVOT_FLOOR && first_clamped.is_none() {
            first_clamped = Some(j);
        }
        if djf < 1e-3 && first_soft.is_none() {
            first_soft = Some(j);
        }
        // Pivots at or below representable noise are floored. The factors
        // then describe a positive definite matrix a tiny distance away;
        // pair consistency (B A = 1) survives, which is all the staircase
        // needs to prepare the exact state, and the gate polish restores
        // unitarity.
        d[j] = if djf < DD_PIVOT_FLOOR {
            Dd::from_f64(DD_PIVOT_FLOOR)
        } else {
            dj
        };
        for i in (j + 1)..size {
            let mut acc = scaled_entry(mat, &scales, i, j);
            for s in 0..j {
                acc = acc.sub(l.at(i, s).mul(l.at(j, s).conj()).mul_real(d[s]));
            }
            l.set(i, j, acc.div_real(d[j]));
        }
    }
    Ok(DdSweep {
        l,
        d,
        scales,
        first_clamped,
        first_soft,
    })
}

impl DdSweep {
    /// Column `b` of the equilibrated matrix, first `size` entries.
    fn scaled_column(&self, mat: &DdMat, b: usize, size: usize) -> Vec<Cdd> {
        (0..size).map(|i| scaled_entry(mat, &self.scales, i, b)).collect()
    }

    /// `y = L⁻¹ v` on the first `size` components.
    fn forward(&self, v: &[Cdd], size: usize) -> Vec<Cdd> {
        let mut y = v[..size].to_vec();
        for i in 0..size {
            for j in 0..i {
                y[i] = y[i].sub(self.l.at(i, j).mul(y[j]));
            }
        }
        y
    }

    /// Solves the leading `size × size` block against `v`.
    fn solve_leading(&self, v: &[Cdd], size: usize) -> Vec<Cdd> {
        let mut y = self.forward(v, size);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = yi.div_real(self.d[i]);
        }
        for i in (0..size).rev() {
            for j in (i + 1)..size {
                let lji = self.l.at(j, i).conj();
                y[i] = y[i].sub(lji.mul(y[j]));
            }
        }
        y
    }
}

/// Upper Cholesky factor `A` (so that `A† A = C`) and its inverse `B`.
///
/// For extended inputs `A` is upper rectangular with `d(r, k)` rows and `B`
/// inverts its leading square block.
#[derive(Debug, Clone)]
pub struct CholeskyPair {
    pub r: usize,
    pub k: usize,
    pub a: CMatrix,
    pub b: CMatrix,
}

/// Textbook recursive Cholesky, upper-factor form. Kept independent of the
/// determinant route as a cross-check.
pub fn recursive_cholesky(mat: &CMatrix) -> Option<CMatrix> {
    recursive_cholesky_floored(mat, 0.0)
}

/// Recursive Cholesky with a pivot floor, so the cross-check stays
/// comparable to the determinant route on near-singular inputs.
fn recursive_cholesky_floored(mat: &CMatrix, floor: f64) -> Option<CMatrix> {
    let n = mat.nrows();
    let mut u = CMatrix::zeros(n, n);
    for a in 0..n {
        let mut diag = mat[(a, a)];
        for s in 0..a {
            diag -= u[(s, a)].conj() * u[(s, a)];
        }
        let pivot = diag.re.max(floor);
        if pivot <= 0.0 {
            return None;
        }
        let uaa = pivot.sqrt();
        u[(a, a)] = Complex64::new(uaa, 0.0);
        for b in (a + 1)..n {
            let mut acc = mat[(a, b)];
            for s in 0..a {
                acc -= u[(s, a)].conj() * u[(s, b)];
            }
            u[(a, b)] = acc / uaa;
        }
    }
    Some(u)
}

/// Extended-precision Cholesky pair, unscaled, with the conditioning
/// markers of the sweep.
pub(crate) struct DdPair {
    pub rank: usize,
    pub a: DdMat,
    pub b: DdMat,
    pub first_soft: Option<usize>,
    pub scales_f64: Vec<f64>,
}

/// Determinant-form Cholesky pair in double-double arithmetic.
///
/// Entry `(a, b)` of `A` is the order-`a` leading minor of `C` with column
/// `a` replaced by column `b`, normalised by the square roots of the
/// neighbouring minors; `B` carries the analogous order-`(b-1)` minors with
/// the opposite sign. Minor determinants are evaluated once per matrix
/// through a single triangular sweep and reused across entries.
pub(crate) fn cholesky_dd(
    mat: &DdMat,
    meta_r: usize,
    meta_k: usize,
    rank: usize,
) -> Result<DdPair> {
    let cols = mat.cols;
    let sweep = dd_sweep(mat, meta_r, meta_k, rank)?;

    // A_{ab} = det_a C_{a→b} / sqrt(det_{a-1} det_a). Through the sweep the
    // leading block collapses to √d_a · conj(L_ba), which stays the exact
    // inverse partner of B even when pivots were floored; the rectangular
    // extension is the leading-block solve of the extra columns.
    let mut a = DdMat::zeros(rank, cols);
    for i in 0..rank {
        let root = sweep.d[i].sqrt();
        for b in i..rank {
            let v = sweep.l.at(b, i).conj().mul_real(root).mul_real(sweep.scales[b]);
            a.set(i, b, v);
        }
    }
    for b in rank..cols {
        let col = sweep.scaled_column(mat, b, rank);
        let y = sweep.forward(&col, rank);
        for i in 0..rank {
            let v = y[i].div_real(sweep.d[i].sqrt()).mul_real(sweep.scales[b]);
            a.set(i, b, v);
        }
    }

    // B_{bb} = sqrt(det_{b-1} / det_b) = 1 / sqrt(d_b);
    // B_{ab} = -det_{b-1} C_{a→b} / sqrt(det_{b-1} det_b) above the diagonal.
    let mut bm = DdMat::zeros(rank, rank);
    for b in 0..rank {
        let inv_sqrt = Dd::from_f64(1.0).div(sweep.d[b].sqrt());
        bm.set(
            b,
            b,
            Cdd {
                re: inv_sqrt.div(sweep.scales[b]),
                im: Dd::ZERO,
            },
        );
        if b > 0 {
            let col = sweep.scaled_column(mat, b, b);
            let z = sweep.solve_leading(&col, b);
            let denom = sweep.d[b].sqrt();
            for (i, zi) in z.iter().enumerate() {
                let v = zi.div_real(denom).div_real(sweep.scales[i]).neg();
                bm.set(i, b, v);
            }
        }
    }

    Ok(DdPair {
        rank,
        a,
        b: bm,
        first_soft: sweep.first_soft,
        scales_f64: sweep.scales.iter().map(|s| s.to_f64()).collect(),
    })
}

/// Cholesky pair from the closed determinant formulas, computed at extended
/// precision and rounded. A textbook recursive Cholesky of the same matrix
/// is computed alongside and the two factors are required to agree on the
/// well-conditioned block.
pub fn cholesky_det(c: &OverlapMatrix) -> Result<CholeskyPair> {
    let cols = c.dim();
    let rank = c.rank()?;
    let mat = DdMat::from_cmatrix(&c.mat);
    let pair = cholesky_dd(&mat, c.r, c.k, rank)?;
    let a_mat = pair.a.to_cmatrix();
    let b_mat = pair.b.to_cmatrix();
    let scales = &pair.scales_f64;

    // Independent route: recursive Cholesky of the equilibrated f64 block.
    // Beyond the well-conditioned prefix the f64 route carries conditioning
    // noise, so the comparison stops there.
    let compare = pair.first_soft.unwrap_or(rank);
    let scaled_leading = CMatrix::from_fn(rank, rank, |i, j| {
        if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            c.mat[(i, j)] / (scales[i] * scales[j])
        }
    });
    match recursive_cholesky_floored(&scaled_leading, SINGULARITY_TOL) {
        Some(u) => {
            let diff = (0..compare)
                .flat_map(|x| (x..compare).map(move |y| (x, y)))
                .map(|(x, y)| (a_mat[(x, y)] / scales[y] - u[(x, y)]).norm())
                .fold(0.0, f64::max);
            if diff > 1e-6 {
                return Err(Error::Domain(format!(
                    "determinant-form and recursive Cholesky disagree by {diff:.3e} (r={}, k={})",
                    c.r, c.k
                )));
            }
        }
        None => {
            return Err(Error::NotPositiveDefinite {
                r: c.r,
                k: c.k,
                minor: rank,
            })
        }
    }

    if c.is_extended() && pair.first_soft.is_none() {
        // With a nonsingular leading block the rectangular factor must
        // reproduce the full semidefinite matrix; a large residual means the
        // rank assumption d(r, k) failed.
        let mut residual: f64 = 0.0;
        for x in 0..cols {
            for y in 0..cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for s in 0..rank {
                    acc += a_mat[(s, x)].conj() * a_mat[(s, y)];
                }
                let want = if x == y {
                    Complex64::new(1.0, 0.0)
                } else {
                    c.mat[(x, y)] / (scales[x] * scales[y])
                };
                residual = residual.max((acc / (scales[x] * scales[y]) - want).norm());
            }
        }
        if residual > 1e-6 {
            return Err(Error::RankMismatch {
                r: c.r,
                k: c.k,
                residual,
            });
        }
    }

    Ok(CholeskyPair {
        r: c.r,
        k: c.k,
        a: a_mat,
        b: b_mat,
    })
}

/// Inverse of an upper-triangular matrix by back-substitution.
pub(crate) fn upper_triangular_inverse(g: &CMatrix) -> CMatrix {
    let n = g.nrows();
    let mut inv = CMatrix::zeros(n, n);
    for b in (0..n).rev() {
        inv[(b, b)] = Complex64::new(1.0, 0.0) / g[(b, b)];
        for a in (0..b).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in (a + 1)..=b {
                acc += g[(a, c)] * inv[(c, b)];
            }
            inv[(a, b)] = -acc / g[(a, a)];
        }
    }
    inv
}

/// Bridge matrix between `k + 1`-slot and `k`-slot configurations,
/// `L_{ab} = det C_{a→b} / det C` with the replacement column drawn from the
/// extended overlap. Its leading square block is the identity.
pub fn l_matrix(r: usize, k: usize, sys: &MagnonSystem) -> Result<CMatrix> {
    let m = sys.magnons();
    if k >= m {
        return Err(Error::Domain(format!(
            "bridge matrix only defined below the magnon number (k={k}, M={m})"
        )));
    }
    if r > k {
        return Err(Error::Domain(format!("sector r={r} exceeds k={k}")));
    }
    let chain = gram_chain(k + 1, k, sys)?;
    l_matrix_from_overlap(&chain[k][&r])
}

/// Same as [`l_matrix`] but from an already computed extended overlap.
pub fn l_matrix_from_overlap(ext: &OverlapMatrix) -> Result<CMatrix> {
    if !ext.is_extended() {
        return Err(Error::Domain("bridge matrix needs the extended overlap".into()));
    }
    let d = ext.rank()?;
    let cols = ext.dim();
    let mat = DdMat::from_cmatrix(&ext.mat);
    let sweep = dd_sweep(&mat, ext.r, ext.k, d)?;
    let mut l = CMatrix::zeros(d, cols);
    for b in 0..cols {
        let col = sweep.scaled_column(&mat, b, d);
        let z = sweep.solve_leading(&col, d);
        for (i, zi) in z.iter().enumerate() {
            l[(i, b)] = zi.mul_real(sweep.scales[b]).div_real(sweep.scales[i]).to_c64();
        }
    }
    Ok(l)
}

/// Serialises every overlap matrix and factor up to `k_max` into a JSON
/// document keyed `"C/r/k"` (and `"Chat"`, `"A"`, `"B"`, `"L"`) with
/// row-major `[re, im]` pairs; intended for external test harnesses.
pub fn dump_factors_json(sys: &MagnonSystem, k_max: usize) -> Result<serde_json::Value> {
    let m = sys.magnons();
    let mut doc = serde_json::Map::new();
    let mut put = |key: String, mat: &CMatrix| {
        let rows: Vec<Vec<[f64; 2]>> = (0..mat.nrows())
            .map(|i| (0..mat.ncols()).map(|j| [mat[(i, j)].re, mat[(i, j)].im]).collect())
            .collect();
        doc.insert(
            key,
            json!({ "rows": mat.nrows(), "cols": mat.ncols(), "data": rows }),
        );
    };

    for k in 1..=k_max {
        let w = k.min(m);
        let chain = gram_chain(w, k, sys)?;
        for r in 0..=w {
            let c = &chain[k][&r];
            put(format!("C/{r}/{k}"), &c.mat);
            let pair = cholesky_det(c)?;
            put(format!("A/{r}/{k}"), &pair.a);
            put(format!("B/{r}/{k}"), &pair.b);
        }
        if k < m {
            let ext_chain = gram_chain(k + 1, k, sys)?;
            for r in 0..=k {
                let ext = &ext_chain[k][&r];
                put(format!("Chat/{r}/{k}"), &ext.mat);
                put(format!("L/{r}/{k}"), &l_matrix_from_overlap(ext)?);
                let pair = cholesky_det(ext)?;
                put(format!("Ahat/{r}/{k}"), &pair.a);
            }
        }
    }
    Ok(serde_json::Value::Object(doc))
}

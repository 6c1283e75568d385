//! The R-matrix route to the same circuit, and the gauge map connecting it
//! to the construction of [`crate::lambda`].
//!
//! A column of `M` R matrices, one per magnon, contracts into tensors `Γ⁰`
//! and `Γ¹` on the auxiliary register. These build the same wavefunctions as
//! the tensors `Λ⁰`, `Λ¹`, so an invertible, charge-preserving, site
//! independent map `X` with `Γⁱ = X⁻¹ Λⁱ X` must exist. Solving for `X`
//! overdetermines its diagonal part, and the solvability condition is
//! exactly the integrability constraint `y² = 1 + x² - 2Δx` together with
//! the XXZ form of the scattering amplitude.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lambda::lambda_full;
use crate::sectors::charge_ordered_masks;
use crate::system::MagnonSystem;
use crate::{max_abs, max_abs_diff, CMatrix};

/// Principal branch of `y = sqrt(1 + x² - 2Δx)`. Both branches satisfy the
/// integrability constraint and differ by a gauge.
pub fn integrable_y(x: Complex64, delta: f64) -> Complex64 {
    (Complex64::new(1.0, 0.0) + x * x - 2.0 * delta * x).sqrt()
}

/// The XXZ R matrix for one magnon: identity on aligned configurations,
/// `y` on the diagonal of the mixed block and `x` on its off-diagonal.
#[derive(Debug, Clone)]
pub struct RMatrix {
    pub x: Complex64,
    pub y: Complex64,
    pub entries: CMatrix,
}

impl RMatrix {
    pub fn new(x: Complex64, delta: f64) -> Self {
        Self::with_y(x, integrable_y(x, delta))
    }

    /// Off-shell variant with an arbitrary `y`; used to probe how the gauge
    /// equations fail when the integrability constraint is violated.
    pub fn with_y(x: Complex64, y: Complex64) -> Self {
        let mut entries = CMatrix::zeros(4, 4);
        entries[(0, 0)] = Complex64::new(1.0, 0.0);
        entries[(3, 3)] = Complex64::new(1.0, 0.0);
        entries[(1, 1)] = y;
        entries[(2, 2)] = y;
        entries[(1, 2)] = x;
        entries[(2, 1)] = x;
        Self { x, y, entries }
    }

    /// Residual of the integrability constraint at anisotropy Δ.
    pub fn constraint_residual(&self, delta: f64) -> f64 {
        (self.y * self.y - (Complex64::new(1.0, 0.0) + self.x * self.x - 2.0 * delta * self.x))
            .norm()
    }
}

/// `y` values for all magnons of a system, principal branch.
pub fn integrable_ys(sys: &MagnonSystem) -> Vec<Complex64> {
    sys.momenta()
        .iter()
        .map(|&x| integrable_y(x, sys.delta()))
        .collect()
}

/// Tensor `Γ^i` on the auxiliary register, charge-ordered layout.
///
/// The physical leg enters the R matrix of the last magnon and exits at the
/// first; entry `(α, β)` sums every path that starts with auxiliary
/// configuration `β` and physical input `|0⟩` and ends in `α` with physical
/// output `|i⟩`.
pub fn gamma_tensor(i: usize, sys: &MagnonSystem, ys: &[Complex64]) -> Result<CMatrix> {
    let m = sys.magnons();
    if i > 1 {
        return Err(Error::Domain(format!("physical output bit {i} must be 0 or 1")));
    }
    if ys.len() != m {
        return Err(Error::Domain("one y per magnon required".into()));
    }
    let masks = charge_ordered_masks(m);
    let index_of: HashMap<u64, usize> = masks.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let total = 1usize << m;
    let mut out = CMatrix::zeros(total, total);

    for (col, &beta) in masks.iter().enumerate() {
        // Amplitudes over (physical bit, auxiliary mask).
        let mut amp: HashMap<(u8, u64), Complex64> = HashMap::new();
        amp.insert((0, beta), Complex64::new(1.0, 0.0));
        for a in (1..=m).rev() {
            let (xa, ya) = (sys.x(a), ys[a - 1]);
            let bit = 1u64 << (a - 1);
            let mut next: HashMap<(u8, u64), Complex64> = HashMap::new();
            for (&(p, mask), &w) in &amp {
                let b = (mask & bit != 0) as u8;
                match (p, b) {
                    (0, 0) | (1, 1) => {
                        *next.entry((p, mask)).or_default() += w;
                    }
                    (0, 1) => {
                        *next.entry((0, mask)).or_default() += w * xa;
                        *next.entry((1, mask & !bit)).or_default() += w * ya;
                    }
                    (1, 0) => {
                        *next.entry((1, mask)).or_default() += w * xa;
                        *next.entry((0, mask | bit)).or_default() += w * ya;
                    }
                    _ => unreachable!(),
                }
            }
            amp = next;
        }
        for (&(p, mask), &w) in &amp {
            if p as usize == i {
                out[(index_of[&mask], col)] = w;
            }
        }
    }
    Ok(out)
}

/// The change of auxiliary basis relating the two tensor families:
/// `X = D X⁰` with `X⁰` upper unit-triangular and `D` diagonal with leading
/// entry 1.
#[derive(Debug, Clone)]
pub struct GaugeTransform {
    pub x0: CMatrix,
    pub d: Vec<Complex64>,
    pub x: CMatrix,
    /// Worst normalised violation of the diagonal-part equations; positive
    /// when the amplitude is not integrable.
    pub residual: f64,
    /// The `y` branch used for the R matrices.
    pub ys: Vec<Complex64>,
}

fn upper_unit_inverse(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let mut inv = CMatrix::identity(n, n);
    for b in 0..n {
        for a in (0..b).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in (a + 1)..=b {
                acc += x[(a, c)] * inv[(c, b)];
            }
            inv[(a, b)] = -acc;
        }
    }
    inv
}

/// Solves the gauge equations for the given `y` branch.
pub fn solve_gauge_with_ys(sys: &MagnonSystem, ys: &[Complex64]) -> Result<GaugeTransform> {
    let m = sys.magnons();
    let gamma0 = gamma_tensor(0, sys, ys)?;
    let gamma1 = gamma_tensor(1, sys, ys)?;
    let lambda1 = lambda_full(1, m, sys)?;
    let total = 1usize << m;
    let masks = charge_ordered_masks(m);

    // X⁰ diagonalises the upper-triangular Γ⁰ with unit diagonal:
    // X⁰ Γ⁰ = diag(Γ⁰) X⁰, solved column by column.
    let diag: Vec<Complex64> = (0..total).map(|p| gamma0[(p, p)]).collect();
    let scale = diag.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut x0 = CMatrix::identity(total, total);
    for b in 0..total {
        for a in (0..b).rev() {
            if masks[a].count_ones() != masks[b].count_ones() {
                continue; // charge-preserving: off-sector entries stay zero
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for c in a..b {
                acc += x0[(a, c)] * gamma0[(c, b)];
            }
            if acc.norm() == 0.0 {
                continue;
            }
            let gap = diag[a] - diag[b];
            if gap.norm() < 1e-12 * scale {
                return Err(Error::Gauge(format!(
                    "coincident collective momenta at indices {a}, {b}"
                )));
            }
            x0[(a, b)] = acc / gap;
        }
    }

    // Diagonal part: D Y = Λ¹ D with Y = X⁰ Γ¹ (X⁰)⁻¹, propagated from
    // d_1 = 1 through the nonzero entries; the system is overdetermined and
    // the worst leftover violation is reported.
    let x0_inv = upper_unit_inverse(&x0);
    let y_mat = &x0 * &gamma1 * &x0_inv;
    let watermark = max_abs(&lambda1).max(max_abs(&y_mat)).max(1.0);
    let mut d: Vec<Option<Complex64>> = vec![None; total];
    d[0] = Some(Complex64::new(1.0, 0.0));
    let mut changed = true;
    while changed {
        changed = false;
        for a in 0..total {
            for b in 0..total {
                let (ya, la) = (y_mat[(a, b)], lambda1[(a, b)]);
                if ya.norm() < 1e-10 * watermark || la.norm() < 1e-10 * watermark {
                    continue;
                }
                match (d[a], d[b]) {
                    (None, Some(db)) => {
                        d[a] = Some(la * db / ya);
                        changed = true;
                    }
                    (Some(da), None) => {
                        d[b] = Some(da * ya / la);
                        changed = true;
                    }
                    _ => {}
                }
            }
        }
    }
    let d: Vec<Complex64> = d
        .into_iter()
        .map(|v| v.unwrap_or(Complex64::new(1.0, 0.0)))
        .collect();

    let mut residual: f64 = 0.0;
    for a in 0..total {
        for b in 0..total {
            let violation = (d[a] * y_mat[(a, b)] - lambda1[(a, b)] * d[b]).norm();
            residual = residual.max(violation / watermark);
        }
    }

    let mut x = x0.clone();
    for a in 0..total {
        for b in 0..total {
            x[(a, b)] *= d[a];
        }
    }
    Ok(GaugeTransform {
        x0,
        d,
        x,
        residual,
        ys: ys.to_vec(),
    })
}

/// Solves the gauge equations with the principal integrable `y` branch.
pub fn solve_gauge(sys: &MagnonSystem) -> Result<GaugeTransform> {
    solve_gauge_with_ys(sys, &integrable_ys(sys))
}

/// One pairwise integrability check: the amplitude ratio `s_ba / s_ab`
/// against its closed form in `x_a`, `x_b` and `y_a`.
#[derive(Debug, Clone)]
pub struct ConsistencyCheck {
    pub a: usize,
    pub b: usize,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

/// Full equivalence report for a system.
#[derive(Debug, Clone)]
pub struct AbaCbaReport {
    /// `max |Γⁱ - X⁻¹ Λⁱ X|`, normalised, for i = 0, 1.
    pub gamma_residuals: [f64; 2],
    /// Overdetermination residual of the diagonal gauge part.
    pub gauge_residual: f64,
    pub consistency: Vec<ConsistencyCheck>,
    pub ys: Vec<Complex64>,
}

impl AbaCbaReport {
    pub fn max_gamma_residual(&self) -> f64 {
        self.gamma_residuals[0].max(self.gamma_residuals[1])
    }

    pub fn max_consistency_residual(&self) -> f64 {
        self.consistency.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn pass(&self, tol: f64) -> bool {
        self.max_gamma_residual() < tol
            && self.gauge_residual < tol
            && self.max_consistency_residual() < tol
    }
}

/// Verifies `Γⁱ = X⁻¹ Λⁱ X` for both physical outputs and the pairwise
/// amplitude-ratio identity implied by the integrability constraint.
pub fn verify_equivalence(sys: &MagnonSystem) -> Result<AbaCbaReport> {
    let ys = integrable_ys(sys);
    let gauge = solve_gauge_with_ys(sys, &ys)?;
    let m = sys.magnons();
    let x_inv = {
        let x0_inv = upper_unit_inverse(&gauge.x0);
        let mut inv = x0_inv;
        for a in 0..inv.nrows() {
            for b in 0..inv.ncols() {
                inv[(a, b)] /= gauge.d[b];
            }
        }
        inv
    };

    let mut gamma_residuals = [0.0f64; 2];
    for i in 0..=1 {
        let gamma = gamma_tensor(i, sys, &ys)?;
        let lambda = lambda_full(i, m, sys)?;
        let mapped = &x_inv * lambda * &gauge.x;
        let scale = max_abs(&gamma).max(1.0);
        gamma_residuals[i] = max_abs_diff(&gamma, &mapped) / scale;
    }

    let mut consistency = Vec::new();
    for a in 1..=m {
        for b in (a + 1)..=m {
            let (xa, xb) = (sys.x(a), sys.x(b));
            let ya = ys[a - 1];
            let lhs = sys.s(xb, xa) / sys.s(xa, xb);
            let rhs = (xa * ya * ya - xa * xa * (xa - xb)) / (xb * ya * ya + xa - xb);
            let residual = (lhs - rhs).norm() / (1.0 + rhs.norm());
            consistency.push(ConsistencyCheck { a, b, lhs, rhs, residual });
        }
    }

    Ok(AbaCbaReport {
        gamma_residuals,
        gauge_residual: gauge.residual,
        consistency,
        ys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Scattering;
    use std::sync::Arc;

    fn two_magnons(seed: u64) -> MagnonSystem {
        MagnonSystem::random(4, 2, 0.7, seed)
    }

    #[test]
    fn r_matrix_structure_and_constraint() {
        let x = Complex64::new(0.4, 0.3);
        let r = RMatrix::new(x, 0.7);
        assert!(r.constraint_residual(0.7) < 1e-12);
        assert_eq!(r.entries[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(r.entries[(3, 3)], Complex64::new(1.0, 0.0));
        assert_eq!(r.entries[(1, 2)], x);
        assert_eq!(r.entries[(2, 1)], x);
        assert_eq!(r.entries[(1, 1)], r.y);
        let off = RMatrix::with_y(x, r.y + 0.1);
        assert!(off.constraint_residual(0.7) > 1e-3);
    }

    #[test]
    fn gamma_matches_displayed_two_magnon_forms() {
        let sys = two_magnons(3);
        let ys = integrable_ys(&sys);
        let (x1, x2) = (sys.x(1), sys.x(2));
        let (y1, y2) = (ys[0], ys[1]);

        let g0 = gamma_tensor(0, &sys, &ys).unwrap();
        let mut want0 = CMatrix::zeros(4, 4);
        want0[(0, 0)] = Complex64::new(1.0, 0.0);
        want0[(1, 1)] = x1;
        want0[(1, 2)] = y1 * y2;
        want0[(2, 2)] = x2;
        want0[(3, 3)] = x1 * x2;
        assert!(max_abs_diff(&g0, &want0) < 1e-13);

        let g1 = gamma_tensor(1, &sys, &ys).unwrap();
        let mut want1 = CMatrix::zeros(4, 4);
        want1[(0, 1)] = y1;
        want1[(0, 2)] = x1 * y2;
        want1[(1, 3)] = y2;
        want1[(2, 3)] = x2 * y1;
        assert!(max_abs_diff(&g1, &want1) < 1e-13);
    }

    #[test]
    fn gamma_single_magnon() {
        let sys = MagnonSystem::random(3, 1, 0.4, 5);
        let ys = integrable_ys(&sys);
        let g0 = gamma_tensor(0, &sys, &ys).unwrap();
        assert!((g0[(0, 0)] - 1.0).norm() < 1e-14);
        assert!((g0[(1, 1)] - sys.x(1)).norm() < 1e-14);
        let g1 = gamma_tensor(1, &sys, &ys).unwrap();
        assert!((g1[(0, 1)] - ys[0]).norm() < 1e-14);
        assert!(g1[(1, 0)].norm() < 1e-14);
    }

    #[test]
    fn gauge_closed_forms_for_two_magnons() {
        let sys = two_magnons(7);
        let ys = integrable_ys(&sys);
        let (x1, x2) = (sys.x(1), sys.x(2));
        let (y1, y2) = (ys[0], ys[1]);
        let gauge = solve_gauge(&sys).unwrap();

        let want_x0 = y1 * y2 / (x1 - x2);
        assert!((gauge.x0[(1, 2)] - want_x0).norm() < 1e-12 * want_x0.norm().max(1.0));

        let want_d = [
            Complex64::new(1.0, 0.0),
            y1,
            sys.s_between(2, 1) * y2 / (x2 - x1),
            y1 * y2 / (x2 - x1),
        ];
        for (i, want) in want_d.iter().enumerate() {
            assert!(
                (gauge.d[i] - want).norm() < 1e-10 * want.norm().max(1.0),
                "d[{i}]: got {}, want {}",
                gauge.d[i],
                want
            );
        }
        assert!(gauge.residual < 1e-10);
    }

    #[test]
    fn equivalence_holds_on_shell() {
        for seed in [1u64, 2, 3] {
            let sys = two_magnons(seed);
            let report = verify_equivalence(&sys).unwrap();
            assert!(report.max_gamma_residual() < 1e-10, "seed {seed}");
            assert!(report.gauge_residual < 1e-10);
            assert!(report.max_consistency_residual() < 1e-10);
        }
    }

    #[test]
    fn off_shell_y_breaks_the_overdetermined_system() {
        let sys = two_magnons(11);
        let mut ys = integrable_ys(&sys);
        ys[0] += Complex64::new(0.2, 0.0);
        let gauge = solve_gauge_with_ys(&sys, &ys).unwrap();
        assert!(gauge.residual > 1e-4);
    }

    #[test]
    fn symmetric_rescaling_of_the_amplitude_is_a_gauge() {
        // s -> s · f with symmetric f keeps the equivalence, with a rescaled D.
        let sys = two_magnons(13);
        let delta = sys.delta();
        let rescaled = sys.clone().with_scattering(Scattering::Custom(Arc::new(
            move |xa: Complex64, xb: Complex64| {
                let f = 1.0 + 0.3 * (xa * xb); // symmetric in (xa, xb)
                (Complex64::new(1.0, 0.0) + xa * xb - 2.0 * delta * xb) * f
            },
        )));
        let report = verify_equivalence(&rescaled).unwrap();
        assert!(report.max_gamma_residual() < 1e-9);
        assert!(report.gauge_residual < 1e-9);
        assert!(report.max_consistency_residual() < 1e-9);
    }

    #[test]
    fn non_integrable_amplitude_fails_the_ratio_check() {
        let sys = two_magnons(17);
        let delta = sys.delta();
        let broken = sys.clone().with_scattering(Scattering::Custom(Arc::new(
            move |xa: Complex64, xb: Complex64| {
                Complex64::new(1.0, 0.0) + xa * xb - 2.0 * delta * xb + 0.1 * xa
            },
        )));
        let report = verify_equivalence(&broken).unwrap();
        assert!(report.max_consistency_residual() > 1e-3);
    }

    #[test]
    fn three_magnon_gauge_is_numerically_consistent() {
        let sys = MagnonSystem::random(5, 3, 0.6, 19);
        let report = verify_equivalence(&sys).unwrap();
        assert!(report.max_gamma_residual() < 1e-9);
        assert!(report.gauge_residual < 1e-9);
    }
}

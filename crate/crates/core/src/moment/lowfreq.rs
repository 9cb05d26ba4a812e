//! Low-frequency branch: minimum-norm solve of finitely many moment,
//! polynomial-moment, and terminal boundary constraints.
//!
//! The control is represented as u = B_k(w) (k-fold primitive of a core w),
//! every constraint is pulled back to an explicit linear functional of the
//! core samples through the adjoint of the discrete primitive operator, and
//! ‖w‖_{L²} is minimized by solving the Gram system of the constraint rows.
//! Because the rows are built from the same discrete primitive/Filon
//! operators used everywhere else, the constraints are satisfied at the
//! discrete level to solver precision, not merely up to quadrature error.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::config::Tolerances;
use crate::error::Error;
use crate::quad::{filon_weights, trapezoid_primitive_adjoint, trapezoid_weights};
use crate::signal::{ControlSignal, TimeGrid};
use crate::{Result, Scalar};

use super::{FrequencyLadder, MomentVector};

/// One trigonometric moment constraint ∫ u e^{iωt} dt = target.
#[derive(Debug, Clone, Copy)]
pub struct MomentConstraint<S> {
    pub omega: S,
    pub target: Complex<S>,
}

/// Minimum-H^k_0-norm control satisfying the given constraints.
///
/// Always enforces the terminal derivative conditions u^{(m)}(T) = 0 for
/// m < k (the left-endpoint ones hold exactly by the core representation).
/// `terminal_primitives` adds conditions u_q(T) = target on iterated
/// primitives. Returns the signal and the Gram condition number.
pub fn solve_constrained<S: Scalar>(
    grid: TimeGrid<S>,
    k: usize,
    moments: &[MomentConstraint<S>],
    poly: &[(u32, S)],
    terminal_primitives: &[(usize, S)],
    cfg: &Tolerances,
) -> Result<(ControlSignal<S>, f64)> {
    let n_nodes = grid.n_nodes();
    let dt = grid.dt();

    let adjoint_pow = |mut row: Vec<S>, times: usize| -> Vec<S> {
        for _ in 0..times {
            row = trapezoid_primitive_adjoint(&row, dt);
        }
        row
    };

    let mut rows: Vec<Vec<S>> = Vec::new();
    let mut rhs: Vec<S> = Vec::new();

    for mc in moments {
        let fw = filon_weights(n_nodes, dt, mc.omega);
        let re: Vec<S> = fw.iter().map(|z| z.re).collect();
        rows.push(adjoint_pow(re, k));
        rhs.push(mc.target.re);
        if mc.omega != S::zero() {
            let im: Vec<S> = fw.iter().map(|z| z.im).collect();
            rows.push(adjoint_pow(im, k));
            rhs.push(mc.target.im);
        }
    }

    let tw = trapezoid_weights(n_nodes, dt);
    for &(q, target) in poly {
        let row: Vec<S> = (0..n_nodes)
            .map(|i| tw[i] * grid.node(i).powi(q as i32))
            .collect();
        rows.push(adjoint_pow(row, k));
        rhs.push(target);
    }

    let terminal = |order: usize| -> Vec<S> {
        let mut e = vec![S::zero(); n_nodes];
        e[n_nodes - 1] = S::one();
        adjoint_pow(e, order)
    };
    for m in 0..k {
        rows.push(terminal(k - m));
        rhs.push(S::zero());
    }
    for &(q, target) in terminal_primitives {
        rows.push(terminal(k + q));
        rhs.push(target);
    }

    if rows.is_empty() {
        return Ok((ControlSignal::zero(grid, k), 1.0));
    }

    // Minimize Σ W_i w_i² subject to C w = b. Substituting y = W^{1/2}w turns
    // this into the minimum-norm solution of (CW^{-1/2})y = b, computed from
    // the SVD of the weighted constraint matrix directly: forming the Gram
    // CW⁻¹Cᵀ would square its condition number, which matters because the
    // primitive pullbacks leave high-frequency rows nearly parallel.
    let weights = trapezoid_weights::<S>(n_nodes, dt);
    let sqrt_w: Vec<S> = weights.iter().map(|&w| w.sqrt()).collect();
    let r = rows.len();
    let mut c = DMatrix::<S>::zeros(r, n_nodes);
    let mut scale = vec![S::zero(); r];
    for a in 0..r {
        let mut nrm2 = S::zero();
        for i in 0..n_nodes {
            let v = rows[a][i] / sqrt_w[i];
            c[(a, i)] = v;
            nrm2 += v * v;
        }
        if nrm2 <= S::zero() {
            return Err(Error::SingularGram {
                cond: f64::INFINITY,
                max: cfg.gram_cond_max,
            });
        }
        // Equilibrate: row scales differ by powers of ω after the pullbacks,
        // and the minimum-norm solution is unchanged by row scaling.
        scale[a] = nrm2.sqrt();
        for i in 0..n_nodes {
            c[(a, i)] /= scale[a];
        }
    }
    let svd = c.svd(true, true);
    let smax = svd.singular_values.iter().fold(S::zero(), |x, &y| x.max(y));
    let smin = svd
        .singular_values
        .iter()
        .fold(S::max_value().unwrap(), |x, &y| x.min(y));
    let cond = (smax / smin).to_f64().unwrap_or(f64::INFINITY);
    if !cond.is_finite() || cond > cfg.gram_cond_max {
        return Err(Error::SingularGram {
            cond,
            max: cfg.gram_cond_max,
        });
    }
    let b = DVector::from_iterator(r, rhs.iter().zip(&scale).map(|(&v, &d)| v / d));
    let y = svd
        .solve(&b, S::default_epsilon())
        .map_err(|e| Error::Parse(format!("SVD solve failed: {e}")))?;

    let core: Vec<S> = (0..n_nodes).map(|i| y[i] / sqrt_w[i]).collect();
    Ok((ControlSignal::from_core(grid, k, core), cond))
}

/// Moment problem with finitely many active targets: moments d_j for
/// j < n_cut, zero moments for n_cut ≤ j < zero_upto, polynomial moments
/// from `d.poly`, all in minimum H^k_0 norm.
pub fn low_freq_solver<S: Scalar>(
    d: &MomentVector<S>,
    n_cut: usize,
    zero_upto: usize,
    k: usize,
    ladder: &FrequencyLadder<S>,
    grid: TimeGrid<S>,
    cfg: &Tolerances,
) -> Result<ControlSignal<S>> {
    for (j, dj) in d.d.iter().enumerate().skip(n_cut) {
        if dj.re != S::zero() || dj.im != S::zero() {
            return Err(Error::UnsupportedIndexRange {
                index: j,
                cutoff: n_cut,
            });
        }
    }
    let zero_upto = zero_upto.min(ladder.len());
    let mut moments = Vec::new();
    for j in 0..zero_upto.max(n_cut.min(ladder.len())) {
        let target = if j < n_cut {
            d.d[j]
        } else {
            Complex::new(S::zero(), S::zero())
        };
        moments.push(MomentConstraint {
            omega: ladder.omega(j),
            target,
        });
    }
    let poly: Vec<(u32, S)> = d
        .poly
        .iter()
        .enumerate()
        .map(|(i, &t)| ((i + 1) as u32, t))
        .collect();
    let (u, _cond) = solve_constrained(grid, k, &moments, &poly, &[], cfg)?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment::op_ln;
    use approx::assert_abs_diff_eq;

    fn setup() -> (FrequencyLadder<f64>, TimeGrid<f64>, Tolerances) {
        (
            FrequencyLadder::schrodinger(16),
            TimeGrid::new(1.0, 4096),
            Tolerances::default(),
        )
    }

    #[test]
    fn zero_targets_give_zero_control() {
        let (ladder, grid, cfg) = setup();
        let d = MomentVector::zero(16);
        let u = low_freq_solver(&d, 4, 16, 1, &ladder, grid, &cfg).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn mean_target_with_zeroed_high_moments() {
        let (ladder, grid, cfg) = setup();
        let mut d = MomentVector::zero(16);
        d.d[0] = Complex::new(1.0, 0.0);
        let u = low_freq_solver(&d, 1, 12, 0, &ladder, grid, &cfg).unwrap();
        let m = op_ln(&u, 0, &ladder, &cfg).unwrap();
        assert_abs_diff_eq!(m.d[0].re, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.d[0].im, 0.0, epsilon = 1e-12);
        for j in 1..12 {
            assert!(m.d[j].norm() < 1e-9, "j={} moment {}", j, m.d[j].norm());
        }
    }

    #[test]
    fn poly_only_target() {
        let (ladder, grid, cfg) = setup();
        let mut d = MomentVector::zero(16);
        d.poly = vec![1.0];
        let u = low_freq_solver(&d, 1, 8, 0, &ladder, grid, &cfg).unwrap();
        // ∫ t·u dt = 1 within 1e-8, ∫u = 0.
        let tw = trapezoid_weights(grid.n_nodes(), grid.dt());
        let tm: f64 = u
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| tw[i] * grid.node(i) * v)
            .sum();
        assert_abs_diff_eq!(tm, 1.0, epsilon = 1e-8);
        let m = op_ln(&u, 0, &ladder, &cfg).unwrap();
        assert!(m.d[0].norm() < 1e-9);
    }

    #[test]
    fn rejects_high_frequency_targets() {
        let (ladder, grid, cfg) = setup();
        let mut d = MomentVector::zero(16);
        d.d[9] = Complex::new(1.0, 0.0);
        assert!(matches!(
            low_freq_solver(&d, 4, 16, 0, &ladder, grid, &cfg),
            Err(Error::UnsupportedIndexRange { index: 9, .. })
        ));
    }

    #[test]
    fn terminal_conditions_hold_at_k2() {
        let (ladder, grid, cfg) = setup();
        let moments = [
            MomentConstraint {
                omega: ladder.omega(1),
                target: Complex::new(0.5, -0.25),
            },
            MomentConstraint {
                omega: ladder.omega(0),
                target: Complex::new(1.0, 0.0),
            },
        ];
        let (u, cond) = solve_constrained(grid, 2, &moments, &[], &[(2, 0.0)], &cfg).unwrap();
        assert!(cond < 1e12);
        // u'(T), u(T) ≈ 0 (H²_0 terminal conditions).
        for m in 0..2 {
            let v = u.derivative_samples(m).unwrap();
            let sup = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            assert!(v[v.len() - 1].abs() <= 1e-9 * sup.max(1e-300));
        }
        // Terminal second primitive pinned to zero.
        let u2 = u.primitive(2, &cfg).unwrap();
        assert!(u2[u2.len() - 1].abs() <= 1e-10 * u.l2_norm());
        // Moments delivered.
        let mvec = op_ln(&u, 0, &ladder, &cfg).unwrap();
        assert!((mvec.d[1] - moments[0].target).norm() < 1e-9);
        assert!((mvec.d[0] - moments[1].target).norm() < 1e-9);
    }

    #[test]
    fn gram_singularity_detected() {
        let (ladder, grid, cfg) = setup();
        // Duplicate constraints make the Gram matrix exactly singular.
        let mc = MomentConstraint {
            omega: ladder.omega(1),
            target: Complex::new(1.0, 0.0),
        };
        let res = solve_constrained(grid, 0, &[mc, mc], &[], &[], &cfg);
        assert!(matches!(res, Err(Error::SingularGram { .. })));
    }
}

//! High-frequency branch: the moment operator L_N, the bump-modulated
//! synthesis P_N, the Neumann almost-inverse iteration, and the contraction
//! probe used to pick the cutoff.
//!
//! The Neumann iteration is run against the *discrete* moment operator (Filon
//! moments of the sampled basis signals), so the final residual it reports is
//! exactly the residual any later verification with `op_ln` on the same grid
//! will see. The smooth-kernel operator built from χ cross-moments is kept
//! separately in [`contraction_probe`] for cutoff diagnostics, where the
//! continuum contraction rate is the quantity of interest.

use nalgebra::ComplexField;
use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::config::Tolerances;
use crate::error::Error;
use crate::quad::filon_moment;
use crate::signal::{BumpChi, ControlSignal};
use crate::{s, Result, Scalar};

use super::{FrequencyLadder, MomentVector, SolverReport};

/// L_N: moments of `u` on the ladder from index N up; entries below N are
/// zero-filled.
pub fn op_ln<S: Scalar>(
    u: &ControlSignal<S>,
    n_cut: usize,
    ladder: &FrequencyLadder<S>,
    cfg: &Tolerances,
) -> Result<MomentVector<S>> {
    let mut d = MomentVector::zero(ladder.len());
    for j in n_cut..ladder.len() {
        d.d[j] = u.oscillatory_moment(ladder.omega(j), cfg)?;
    }
    Ok(d)
}

fn binomial<S: Scalar>(n: usize, r: usize) -> S {
    let mut acc = 1.0f64;
    for i in 0..r {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    s(acc)
}

/// Materialize the real signal Σ_{|j| ≥ N} d_j ξ̃_j, ξ̃_j = (1/T)e^{−iω_j t}χ,
/// with Hermitian extension d_{−j} = conj(d_j), as a `ControlSignal` of
/// declared regularity `reg`.
///
/// Values and the reg-th derivative core are evaluated analytically (Leibniz
/// on e^{−iωt}·χ with the χ-jet), so membership in H^reg_0 is exact: the sum
/// inherits the compact support of χ.
fn materialize<S: Scalar>(
    terms: &[(usize, Complex<S>)],
    reg: usize,
    chi: &BumpChi<S>,
    ladder: &FrequencyLadder<S>,
) -> ControlSignal<S> {
    let grid = *chi.grid();
    let n_nodes = grid.n_nodes();
    let t_final = grid.t_final();
    let mut values = vec![S::zero(); n_nodes];
    let mut core = vec![S::zero(); n_nodes];
    let two = s::<S>(2.0);
    for i in 0..n_nodes {
        if chi.samples()[i] == S::zero() && i > 0 && i < n_nodes - 1 {
            // χ-jets vanish identically outside the support.
            if chi.samples()[i - 1] == S::zero() && chi.samples()[i + 1] == S::zero() {
                continue;
            }
        }
        let jet = chi.jet(i, reg);
        let t = grid.node(i);
        let mut val = S::zero();
        let mut der = S::zero();
        for &(j, dj) in terms {
            let omega = ladder.omega(j);
            let e = Complex::new(S::zero(), -omega * t).exp();
            // d^reg/dt^reg [e^{−iωt}χ] = Σ_r C(reg,r)(−iω)^r e^{−iωt} χ^{(reg−r)}.
            let mut deriv = Complex::new(S::zero(), S::zero());
            let mut pow = Complex::new(S::one(), S::zero());
            let miw = Complex::new(S::zero(), -omega);
            for r in 0..=reg {
                deriv += pow * (binomial::<S>(reg, r) * jet.derivative(reg - r));
                pow *= miw;
            }
            deriv *= e;
            let weight = if j == 0 { S::one() } else { two };
            val += weight * (dj * e).re * jet.value();
            der += weight * (dj * deriv).re;
        }
        values[i] = val / t_final;
        core[i] = der / t_final;
    }
    ControlSignal::from_core_and_values(grid, reg, core, values)
}

/// P_N: synthesize the bump-modulated exponential sum for targets supported
/// on j ≥ N, declared at regularity `reg`.
pub fn op_pn<S: Scalar>(
    d: &MomentVector<S>,
    n_cut: usize,
    reg: usize,
    chi: &BumpChi<S>,
    ladder: &FrequencyLadder<S>,
) -> Result<ControlSignal<S>> {
    for (j, dj) in d.d.iter().enumerate().take(n_cut.min(d.d.len())) {
        if dj.norm_sqr() != S::zero() {
            return Err(Error::UnsupportedIndexRange {
                index: j,
                cutoff: n_cut,
            });
        }
    }
    let terms: Vec<(usize, Complex<S>)> = d
        .d
        .iter()
        .enumerate()
        .skip(n_cut)
        .filter(|(_, dj)| dj.norm_sqr() != S::zero())
        .map(|(j, &dj)| (j, dj))
        .collect();
    Ok(materialize(&terms, reg, chi, ladder))
}

/// Internal outcome of the Neumann iteration, including the full discrete
/// moment vector of the synthesized signal (all ladder indices, also below
/// the cutoff) for downstream correction.
pub(crate) struct NeumannOutcome<S: Scalar> {
    pub u: ControlSignal<S>,
    pub full_moments: Vec<Complex<S>>,
    pub iters: usize,
    pub rho: f64,
}

/// Neumann inversion of the discrete moment operator restricted to j ≥ N.
///
/// Iterates r⁰ = d, accumulate coefficients += rᵖ, rᵖ⁺¹ = rᵖ − Ĝ rᵖ where Ĝ
/// is the matrix of discrete Filon moments of the materialized basis signals
/// (a real-linear operator: one column per real and imaginary coefficient
/// part). Stops at ‖rᵖ‖ ≤ tol·‖d‖.
pub(crate) fn neumann_inverse_inner<S: Scalar>(
    d: &MomentVector<S>,
    n_cut: usize,
    reg: usize,
    chi: &BumpChi<S>,
    ladder: &FrequencyLadder<S>,
    tol: S,
    cfg: &Tolerances,
) -> Result<NeumannOutcome<S>> {
    let len = ladder.len();
    if d.d.len() != len {
        return Err(Error::Dimension {
            expected: len,
            got: d.d.len(),
        });
    }
    for (j, dj) in d.d.iter().enumerate().take(n_cut) {
        if dj.norm_sqr() != S::zero() {
            return Err(Error::UnsupportedIndexRange {
                index: j,
                cutoff: n_cut,
            });
        }
    }
    let grid = *chi.grid();
    let dt = grid.dt();
    let d_norm = d.h0_norm();
    if d_norm == S::zero() || n_cut >= len {
        return Ok(NeumannOutcome {
            u: ControlSignal::zero(grid, reg),
            full_moments: vec![Complex::new(S::zero(), S::zero()); len],
            iters: 0,
            rho: 0.0,
        });
    }

    // Column layout: for each j ≥ n_cut, a "re" column (coefficient 1) and,
    // for j ≥ 1, an "im" column (coefficient i). Each column stores the
    // discrete moments of its materialized basis signal at every ladder
    // index.
    struct Column<S: Scalar> {
        j: usize,
        imaginary: bool,
        moments: Vec<Complex<S>>,
    }
    let mut columns: Vec<Column<S>> = Vec::new();
    for j in n_cut..len {
        let parts: &[bool] = if j == 0 { &[false] } else { &[false, true] };
        for &imaginary in parts {
            let unit = if imaginary {
                Complex::new(S::zero(), S::one())
            } else {
                Complex::new(S::one(), S::zero())
            };
            let sigv = materialize(&[(j, unit)], 0, chi, ladder);
            let moments = (0..len)
                .map(|p| filon_moment(sigv.values(), dt, ladder.omega(p)))
                .collect();
            columns.push(Column {
                j,
                imaginary,
                moments,
            });
        }
    }

    let mut coeff = vec![S::zero(); columns.len()];
    let mut r: Vec<Complex<S>> = d.d[n_cut..].to_vec();
    let mut rho: f64 = 0.0;
    let mut iters = 0usize;
    let mut r_norm = d_norm;
    while r_norm > tol * d_norm {
        if iters >= cfg.max_neumann_iters {
            return Err(Error::NoContraction {
                rho,
                ceiling: cfg.contraction_ceiling,
                cutoff: n_cut,
            });
        }
        // coefficient update from the current residual
        let mut delta = vec![S::zero(); columns.len()];
        for (c, col) in columns.iter().enumerate() {
            let rj = r[col.j - n_cut];
            delta[c] = if col.imaginary { rj.im } else { rj.re };
            coeff[c] += delta[c];
        }
        // residual update r -= Ĝ·delta
        for (c, col) in columns.iter().enumerate() {
            if delta[c] == S::zero() {
                continue;
            }
            for p in n_cut..len {
                r[p - n_cut] -= col.moments[p] * delta[c];
            }
        }
        iters += 1;
        let new_norm = r
            .iter()
            .map(|z| z.norm_sqr())
            .fold(S::zero(), |a, b| a + b)
            .sqrt();
        let ratio = (new_norm / r_norm).to_f64().unwrap_or(f64::INFINITY);
        rho = rho.max(ratio);
        r_norm = new_norm;
        if iters >= cfg.probe_iters && rho >= cfg.contraction_ceiling {
            return Err(Error::NoContraction {
                rho,
                ceiling: cfg.contraction_ceiling,
                cutoff: n_cut,
            });
        }
    }

    // Assemble the solution's coefficients and its exact discrete moments
    // (linear in the coefficients, so reuse the stored columns).
    let mut terms: Vec<(usize, Complex<S>)> = Vec::new();
    {
        let mut acc: Vec<Complex<S>> = vec![Complex::new(S::zero(), S::zero()); len];
        for (c, col) in columns.iter().enumerate() {
            if col.imaginary {
                acc[col.j] += Complex::new(S::zero(), coeff[c]);
            } else {
                acc[col.j] += Complex::new(coeff[c], S::zero());
            }
        }
        for (j, a) in acc.iter().enumerate() {
            if a.norm_sqr() != S::zero() {
                terms.push((j, *a));
            }
        }
    }
    let mut full_moments = vec![Complex::new(S::zero(), S::zero()); len];
    for (c, col) in columns.iter().enumerate() {
        if coeff[c] == S::zero() {
            continue;
        }
        for p in 0..len {
            full_moments[p] += col.moments[p] * coeff[c];
        }
    }
    let u = materialize(&terms, reg, chi, ladder);
    Ok(NeumannOutcome {
        u,
        full_moments,
        iters,
        rho,
    })
}

/// Public Neumann inversion: solve the restricted moment problem on j ≥ N.
pub fn neumann_inverse<S: Scalar>(
    d: &MomentVector<S>,
    n_cut: usize,
    chi: &BumpChi<S>,
    ladder: &FrequencyLadder<S>,
    tol: S,
    cfg: &Tolerances,
) -> Result<(ControlSignal<S>, SolverReport)> {
    let out = neumann_inverse_inner(d, n_cut, 0, chi, ladder, tol, cfg)?;
    let residuals: Vec<f64> = d
        .d
        .iter()
        .zip(&out.full_moments)
        .enumerate()
        .map(|(j, (target, got))| {
            if j < n_cut {
                0.0
            } else {
                crate::cmod(got - target).to_f64().unwrap_or(f64::NAN)
            }
        })
        .collect();
    let report = SolverReport {
        residuals,
        norms: vec![(0, out.u.l2_norm().to_f64().unwrap_or(f64::NAN))],
        neumann_iters: out.iters,
        contraction: Some(out.rho),
        cutoff: Some(n_cut),
        ..SolverReport::default()
    };
    Ok((out.u, report))
}

/// Measure the contraction factor of Σ = L_N∘P_N − Id at cutoff `n_cut`
/// using the continuum cross-moment kernel C(ω) = (1/T)∫χe^{iωt}dt.
///
/// Iterates a few random unit targets and returns the worst step ratio
/// ‖Σr‖/‖r‖ observed. This is the quantity the cutoff search thresholds; it
/// is free of time-grid discretization bias.
pub fn contraction_probe<S: Scalar>(
    n_cut: usize,
    ladder: &FrequencyLadder<S>,
    chi: &BumpChi<S>,
    iters: usize,
    seed: u64,
) -> f64 {
    let len = ladder.len();
    if n_cut >= len {
        return 0.0;
    }
    let lo = n_cut.max(1);
    let m = len - lo;
    // Cross-moment tables: diff[a][b] = C(ω_{lo+a} − ω_{lo+b}), sum likewise.
    let mut diff = vec![vec![Complex::new(S::zero(), S::zero()); m]; m];
    let mut sum = vec![vec![Complex::new(S::zero(), S::zero()); m]; m];
    for a in 0..m {
        for b in 0..m {
            diff[a][b] = chi.cross_moment(ladder.omega(lo + a) - ladder.omega(lo + b));
            sum[a][b] = chi.cross_moment(ladder.omega(lo + a) + ladder.omega(lo + b));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let mut r: Vec<Complex<S>> = (0..m)
            .map(|_| {
                Complex::new(
                    s::<S>(rng.gen_range(-1.0..1.0)),
                    s::<S>(rng.gen_range(-1.0..1.0)),
                )
            })
            .collect();
        let mut r_norm = r
            .iter()
            .map(|z| z.norm_sqr())
            .fold(S::zero(), |x, y| x + y)
            .sqrt();
        for _ in 0..iters {
            // Σr = L(P(r)) − r
            let mut next = vec![Complex::new(S::zero(), S::zero()); m];
            for a in 0..m {
                let mut acc = Complex::new(S::zero(), S::zero());
                for b in 0..m {
                    acc += r[b] * diff[a][b] + r[b].conj() * sum[a][b];
                }
                next[a] = r[a] - acc;
            }
            let n_norm = next
                .iter()
                .map(|z| z.norm_sqr())
                .fold(S::zero(), |x, y| x + y)
                .sqrt();
            let ratio = (n_norm / r_norm).to_f64().unwrap_or(f64::INFINITY);
            worst = worst.max(ratio);
            r = next;
            r_norm = n_norm;
            if r_norm == S::zero() {
                break;
            }
        }
    }
    worst
}

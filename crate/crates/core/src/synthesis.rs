//! Control synthesis: the linearized right inverse of the projected
//! end-point map differential, the nonlinear fixed-point loop, and the
//! estimate-ratio sweep.

use nalgebra::ComplexField;
use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::Error;
use crate::moment::{weak_estimate_solver, FrequencyLadder, MomentVector, SolverReport};
use crate::signal::{BumpChi, ControlSignal};
use crate::sim::Scenario;
use crate::spectral::ModalState;
use crate::{s, Result, Scalar};

/// A nonlinear steering task: drive ψ₀ (near the ground state) so that the
/// projected final state P_Jψ(T) hits `psif` (supported on J).
#[derive(Debug, Clone)]
pub struct ControlTask<S> {
    pub psi0: ModalState<S>,
    pub psif: ModalState<S>,
    /// Neighborhood radius δ both endpoints must respect in H^{2(p+k)+3}.
    pub delta: f64,
    /// Stopping tolerance on ‖P_Jψ(T) − ψ_f‖_{H^{2p+3}}.
    pub tol: f64,
    pub max_iters: usize,
    /// Damping θ ∈ (0, 1] of the fixed-point increment; 1 = pure iteration.
    pub theta: f64,
}

impl<S: Scalar> ControlTask<S> {
    pub fn new(psi0: ModalState<S>, psif: ModalState<S>, delta: f64) -> Self {
        Self {
            psi0,
            psif,
            delta,
            tol: 1e-8,
            max_iters: 10,
            theta: 1.0,
        }
    }
}

/// Synthesis diagnostics: norms, estimate ratios, boundary values, and the
/// fixed-point history.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SynthesisReport {
    /// ‖u‖_{H^m_0} for m ∈ [−(k+1), k].
    pub control_norms: Vec<(i64, f64)>,
    /// ‖ψ₀-part‖ + ‖ψ_f-part‖ in H^{2(p+m)+3} per m.
    pub data_norms: Vec<(i64, f64)>,
    /// control norm / data norm per m (omitted when the data norm vanishes).
    pub ratios: Vec<(i64, f64)>,
    /// u_2(T) … u_{k+1}(T).
    pub boundary_values: Vec<f64>,
    /// Residual per fixed-point iterate (nonlinear mode).
    pub iteration_history: Vec<f64>,
    /// Worst residual decrease ratio across accepted iterations.
    pub contraction: Option<f64>,
    /// Final verification error of the projected end state.
    pub projection_error: f64,
    /// Re⟨ψ(T), ψ₁(T)⟩, the sphere component the projection discards.
    pub re_overlap_mode1: Option<f64>,
    pub converged: bool,
    /// Moment-solver diagnostics of the (last) linearized solve.
    pub solver: SolverReport,
}

fn check_tangent<S: Scalar>(xi: &ModalState<S>, psi: &ModalState<S>) -> Result<()> {
    let defect = xi.inner(psi).re.abs();
    let tol = s::<S>(1e-10) * xi.norm().max(S::one());
    if defect > tol {
        return Err(Error::TangencyViolation {
            defect: defect.to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

fn check_supported<S: Scalar>(state: &ModalState<S>, scn: &Scenario<S>) -> Result<()> {
    let off = state.project_complement(&scn.j_set).norm();
    let tol = s::<S>(1e-12) * state.norm().max(S::one());
    if off > tol {
        return Err(Error::SupportViolation {
            off_mass: off.to_f64().unwrap_or(f64::NAN),
            tol: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// Right inverse of the linearized end-point map: build the moment data
/// d_{j−1} = (⟨ψ_f, ψ_j(T)⟩ − ⟨ψ₀, φ_j⟩)/(i·b_j) on J and hand it to the
/// weak-estimate solver.
///
/// `psi0_tangent` must be tangent at φ₁, `psif_tangent` tangent at ψ₁(T) and
/// supported on J. The output control is verified by the explicit linearized
/// flow; the report carries per-m norms and estimate ratios.
pub fn linearized_control<S: Scalar>(
    scn: &Scenario<S>,
    psi0_tangent: &ModalState<S>,
    psif_tangent: &ModalState<S>,
    chi: &BumpChi<S>,
    cfg: &Tolerances,
) -> Result<(ControlSignal<S>, SynthesisReport)> {
    let n = scn.dim();
    let t_final = scn.grid.t_final();
    let phi1 = ModalState::basis_vector(n, 1);
    let psi1t = scn.psi1(t_final);
    check_tangent(psi0_tangent, &phi1)?;
    check_tangent(psif_tangent, &psi1t)?;
    check_supported(psif_tangent, scn)?;
    if scn.dipole.decay_constant.is_none() {
        return Err(Error::DecayViolation {
            min_product: 0.0,
            floor: cfg.decay_floor,
            worst_j: 0,
        });
    }

    let ladder = FrequencyLadder::<S>::schrodinger(n);
    let mut d = MomentVector::zero(n);
    for &j in scn.j_set.indices() {
        let overlap_f = psif_tangent.coeffs[j - 1]
            * Complex::new(S::zero(), scn.basis.lambda(j) * t_final).exp();
        let numer = overlap_f - psi0_tangent.coeffs[j - 1];
        let denom = Complex::new(S::zero(), scn.dipole.b_coeff(j));
        d.d[j - 1] = numer / denom;
    }
    // Tangency makes d_0 real up to roundoff; clamp the dust so the solver's
    // realness invariant holds exactly.
    d.d[0].im = S::zero();

    let (u, solver) = weak_estimate_solver(&d, scn.k, &ladder, chi, cfg)?;

    let psi_lin = scn.propagate_linearized(&u, psi0_tangent, cfg)?;
    let projection_error = psi_lin
        .project(&scn.j_set)
        .sub(psif_tangent)
        .norm()
        .to_f64()
        .unwrap_or(f64::NAN);

    let mut control_norms = Vec::new();
    let mut data_norms = Vec::new();
    let mut ratios = Vec::new();
    for m in -(scn.k as i64 + 1)..=scn.k as i64 {
        let cn = u
            .sobolev_norm(m, cfg)
            .map(|x| x.to_f64().unwrap_or(f64::NAN))
            .unwrap_or(f64::NAN);
        let sob = 2.0 * (scn.p as f64 + m as f64) + 3.0;
        let dn = (psi0_tangent.hs_norm(sob) + psif_tangent.hs_norm(sob))
            .to_f64()
            .unwrap_or(f64::NAN);
        control_norms.push((m, cn));
        data_norms.push((m, dn));
        if dn > 0.0 {
            ratios.push((m, cn / dn));
        }
    }
    let report = SynthesisReport {
        control_norms,
        data_norms,
        ratios,
        boundary_values: solver.boundary_values.clone(),
        iteration_history: Vec::new(),
        contraction: None,
        projection_error,
        re_overlap_mode1: None,
        converged: true,
        solver,
    };
    Ok((u, report))
}

/// Nonlinear steering by fixed-point iteration: repeatedly apply the
/// linearized right inverse to the tangential defect of the projected end
/// state.
pub fn nonlinear_control<S: Scalar>(
    scn: &Scenario<S>,
    task: &ControlTask<S>,
    chi: &BumpChi<S>,
    cfg: &Tolerances,
) -> Result<(ControlSignal<S>, SynthesisReport)> {
    let n = scn.dim();
    let t_final = scn.grid.t_final();
    let phi1 = ModalState::basis_vector(n, 1);
    let psi1t = scn.psi1(t_final);
    check_supported(&task.psif, scn)?;
    let dev = (task.psi0.norm() - S::one()).abs();
    if dev > s(cfg.sphere_tol) {
        return Err(Error::NotOnSphere {
            deviation: dev.to_f64().unwrap_or(f64::NAN),
            tol: cfg.sphere_tol,
        });
    }
    let sob = 2.0 * (scn.p + scn.k) as f64 + 3.0;
    let r0 = task.psi0.sub(&phi1).hs_norm(sob).to_f64().unwrap_or(f64::NAN);
    let rf = task
        .psif
        .sub(&psi1t.project(&scn.j_set))
        .hs_norm(sob)
        .to_f64()
        .unwrap_or(f64::NAN);
    if r0 >= task.delta || rf >= task.delta {
        return Err(Error::Parse(format!(
            "task data outside the delta-neighborhood: {r0:.3e} / {rf:.3e} vs delta {:.3e}",
            task.delta
        )));
    }

    let target_tangent = task.psif.project_tangent(&psi1t, cfg)?;
    let sob_stop = 2.0 * scn.p as f64 + 3.0;

    let mut u = ControlSignal::zero(scn.grid, scn.k);
    let mut history: Vec<f64> = Vec::new();
    let mut contraction: Option<f64> = None;
    let mut last_solver = SolverReport::default();
    for iter in 0..=task.max_iters {
        let traj = scn.propagate_nonlinear(&u, &task.psi0, cfg)?;
        let psi_t = traj.last().unwrap();
        let last_overlap = psi_t.inner(&psi1t).re.to_f64().unwrap_or(f64::NAN);
        let proj = psi_t.project(&scn.j_set);
        let residual = proj
            .sub(&task.psif)
            .hs_norm(sob_stop)
            .to_f64()
            .unwrap_or(f64::NAN);
        if let Some(&prev) = history.last() {
            if prev > 0.0 {
                let ratio = residual / prev;
                contraction = Some(contraction.map_or(ratio, |c: f64| c.max(ratio)));
            }
        }
        history.push(residual);
        if residual <= task.tol {
            let report = final_report(
                scn, &u, &task.psi0, &task.psif, &history, contraction, residual, last_overlap,
                last_solver, true, cfg,
            );
            return Ok((u, report));
        }
        if iter == task.max_iters {
            break;
        }
        let defect = proj.project_tangent(&psi1t, cfg)?.sub(&target_tangent);
        let (correction, rep) =
            linearized_control(scn, &ModalState::zero(n), &defect, chi, cfg)?;
        last_solver = rep.solver;
        u = u.add(&correction.scale(-s::<S>(task.theta)))?;
    }

    Err(Error::NoConvergence {
        iters: task.max_iters,
        residual: *history.last().unwrap(),
        tol: task.tol,
        history,
    })
}

#[allow(clippy::too_many_arguments)]
fn final_report<S: Scalar>(
    scn: &Scenario<S>,
    u: &ControlSignal<S>,
    psi0: &ModalState<S>,
    psif: &ModalState<S>,
    history: &[f64],
    contraction: Option<f64>,
    projection_error: f64,
    re_overlap: f64,
    solver: SolverReport,
    converged: bool,
    cfg: &Tolerances,
) -> SynthesisReport {
    let n = scn.dim();
    let phi1 = ModalState::basis_vector(n, 1);
    let psi1t_proj = scn.psi1(scn.grid.t_final()).project(&scn.j_set);
    let mut control_norms = Vec::new();
    let mut data_norms = Vec::new();
    let mut ratios = Vec::new();
    for m in -(scn.k as i64 + 1)..=scn.k as i64 {
        let cn = u
            .sobolev_norm(m, cfg)
            .map(|x| x.to_f64().unwrap_or(f64::NAN))
            .unwrap_or(f64::NAN);
        let sob = 2.0 * (scn.p as f64 + m as f64) + 3.0;
        let dn = (psi0.sub(&phi1).hs_norm(sob) + psif.sub(&psi1t_proj).hs_norm(sob))
            .to_f64()
            .unwrap_or(f64::NAN);
        control_norms.push((m, cn));
        data_norms.push((m, dn));
        if dn > 0.0 {
            ratios.push((m, cn / dn));
        }
    }
    let boundary_values = (2..=scn.k + 1)
        .map(|q| {
            u.primitive(q, cfg)
                .map(|v| v[v.len() - 1].to_f64().unwrap_or(f64::NAN))
                .unwrap_or(f64::NAN)
        })
        .collect();
    SynthesisReport {
        control_norms,
        data_norms,
        ratios,
        boundary_values,
        iteration_history: history.to_vec(),
        contraction,
        projection_error,
        re_overlap_mode1: Some(re_overlap),
        converged,
        solver,
    }
}

/// One row per Sobolev order of the estimate-ratio sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: i64,
    /// Max ratio over the first half of the samples.
    pub max_ratio_half: f64,
    /// Max ratio over all samples.
    pub max_ratio_full: f64,
    /// Growth of the max under doubling: full / half.
    pub growth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// True when every sample was degenerate (zero data).
    pub empty: bool,
    pub n_samples: usize,
}

/// Draw a random tangential perturbation with rapidly decaying coefficients,
/// normalized to `radius` in H^{sob}.
fn random_tangent<S: Scalar>(
    dim: usize,
    sob: f64,
    radius: S,
    rng: &mut ChaCha8Rng,
) -> ModalState<S> {
    let active = dim.min(6);
    let mut xi = ModalState::zero(dim);
    for j in 1..=active {
        let decay = s::<S>(((j) as f64).powf(-(sob.max(0.0) + 1.0)));
        let re = if j == 1 {
            S::zero()
        } else {
            s::<S>(rng.gen_range(-1.0..1.0)) * decay
        };
        let im = s::<S>(rng.gen_range(-1.0..1.0)) * decay;
        xi.coeffs[j - 1] = Complex::new(re, im);
    }
    let nrm = xi.hs_norm(sob);
    if nrm == S::zero() {
        return xi;
    }
    xi.scale(radius / nrm)
}

/// Generate an admissible random task at radius `delta`: perturb the ground
/// state tangentially, steer with a small synthesized control, and take the
/// projected end state as the (reachable by construction) target.
pub fn random_task<S: Scalar>(
    scn: &Scenario<S>,
    delta: f64,
    chi: &BumpChi<S>,
    cfg: &Tolerances,
    seed: u64,
) -> Result<ControlTask<S>> {
    let n = scn.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sob = 2.0 * (scn.p + scn.k) as f64 + 3.0;
    let phi1 = ModalState::basis_vector(n, 1);
    let xi = random_tangent(n, sob, s::<S>(0.3 * delta), &mut rng);
    let psi0_raw = phi1.add(&xi);
    let psi0 = psi0_raw.scale(S::one() / psi0_raw.norm());

    // A generating control: right inverse applied to a random tangential
    // J-supported target, then pushed through the nonlinear flow.
    let psi1t = scn.psi1(scn.grid.t_final());
    let target = random_tangent(n, sob, s::<S>(0.3 * delta), &mut rng)
        .project(&scn.j_set)
        .project_tangent(&psi1t, cfg)?;
    let (u_gen, _) = linearized_control(scn, &ModalState::zero(n), &target, chi, cfg)?;
    let traj = scn.propagate_nonlinear(&u_gen, &psi0, cfg)?;
    let psif = traj.last().unwrap().project(&scn.j_set);
    Ok(ControlTask::new(psi0, psif, delta))
}

/// Estimate-ratio sweep: random admissible tasks at radius `delta`, one
/// nonlinear synthesis each, and per-m max-ratio stability under doubling
/// the sample count.
pub fn estimate_ratio_sweep<S: Scalar>(
    scn: &Scenario<S>,
    n_samples: usize,
    delta: f64,
    chi: &BumpChi<S>,
    cfg: &Tolerances,
    seed: u64,
) -> Result<SweepTable> {
    assert!(n_samples >= 2);
    let reports: Vec<SynthesisReport> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let task = random_task(scn, delta, chi, cfg, seed.wrapping_add(i as u64))?;
            let (_, report) = nonlinear_control(scn, &task, chi, cfg)?;
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;

    let orders: Vec<i64> = (-(scn.k as i64 + 1)..=scn.k as i64).collect();
    let max_ratio = |upto: usize, m: i64| -> Option<f64> {
        let mut best: Option<f64> = None;
        for rep in &reports[..upto] {
            for &(mm, r) in &rep.ratios {
                if mm == m && r.is_finite() {
                    best = Some(best.map_or(r, |b: f64| b.max(r)));
                }
            }
        }
        best
    };
    let mut rows = Vec::new();
    for &m in &orders {
        let half = max_ratio(n_samples / 2, m);
        let full = max_ratio(n_samples, m);
        if let (Some(h), Some(f)) = (half, full) {
            rows.push(SweepRow {
                m,
                max_ratio_half: h,
                max_ratio_full: f,
                growth: if h > 0.0 { f / h } else { f64::NAN },
            });
        }
    }
    let empty = rows.is_empty();
    Ok(SweepTable {
        rows,
        empty,
        n_samples,
    })
}

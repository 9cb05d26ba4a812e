//! Named invariant checks bundled for the verification command: each check
//! returns a measured defect and its threshold so reports stay
//! machine-readable.

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::moment::FrequencyLadder;
use crate::quad::filon_moment;
use crate::signal::{BumpChi, ControlSignal, TimeGrid};
use crate::sim::Scenario;
use crate::spectral::ModalState;
use crate::{Result, Scalar};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

fn outcome(name: &str, measured: f64, threshold: f64) -> VerifyOutcome {
    VerifyOutcome {
        name: name.into(),
        pass: measured.is_finite() && measured <= threshold,
        measured,
        threshold,
    }
}

/// Run the invariant suite on a scenario. All checks are reported; the suite
/// passes iff every entry does.
pub fn run_suite<S: Scalar>(
    scn: &Scenario<S>,
    chi: &BumpChi<S>,
    cfg: &Tolerances,
    seed: u64,
) -> Result<Vec<VerifyOutcome>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = scn.dim();

    out.push(outcome(
        "basis_orthonormality",
        scn.basis.orthonormality_defect().to_f64().unwrap_or(f64::NAN),
        1e-10,
    ));

    // Gap arithmetic of the Schrödinger ladder at this truncation.
    let ladder = FrequencyLadder::<S>::schrodinger(n);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let gap_defect = (0..n - 1)
        .map(|j| {
            let gap = (ladder.omega(j + 1) - ladder.omega(j)).to_f64().unwrap_or(f64::NAN);
            (gap - (2 * j + 3) as f64 * pi2).abs()
        })
        .fold(0.0f64, f64::max);
    out.push(outcome("ladder_gap_arithmetic", gap_defect, 1e-8));

    // Dipole symmetry.
    let mut sym = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            sym = sym.max(
                (scn.dipole.matrix[(j, k)] - scn.dipole.matrix[(k, j)])
                    .to_f64()
                    .unwrap_or(f64::NAN)
                    .abs(),
            );
        }
    }
    out.push(outcome("dipole_symmetry", sym, 1e-12));

    // Projection Pythagoras on a random state.
    let state = ModalState::<S>::new(
        (0..n)
            .map(|_| {
                Complex::new(
                    crate::s(rng.gen_range(-1.0..1.0)),
                    crate::s(rng.gen_range(-1.0..1.0)),
                )
            })
            .collect(),
    );
    let inside = state.project(&scn.j_set).hs_norm(2.0);
    let outside = state.project_complement(&scn.j_set).hs_norm(2.0);
    let total = state.hs_norm(2.0);
    let pyth = ((inside * inside + outside * outside - total * total).abs() / (total * total))
        .to_f64()
        .unwrap_or(f64::NAN);
    out.push(outcome("projection_pythagoras", pyth, 1e-12));

    // Tangential projection orthogonality.
    let psi1t = scn.psi1(scn.grid.t_final());
    let tang = state.project_tangent(&psi1t, cfg)?;
    out.push(outcome(
        "tangent_orthogonality",
        tang.inner(&psi1t).re.abs().to_f64().unwrap_or(f64::NAN),
        1e-12,
    ));

    // Bump normalization ∫χ = T.
    let integral = crate::quad::trapezoid(chi.samples(), chi.grid().dt());
    out.push(outcome(
        "bump_normalization",
        (integral - chi.grid().t_final()).abs().to_f64().unwrap_or(f64::NAN),
        1e-10,
    ));

    // Filon exactness on a random piecewise-linear signal at high frequency.
    let small_grid = TimeGrid::<S>::new(chi.grid().t_final(), 64);
    let vals: Vec<S> = (0..small_grid.n_nodes())
        .map(|_| crate::s(rng.gen_range(-1.0..1.0)))
        .collect();
    let omega: S = crate::s(9871.0);
    let coarse = filon_moment(&vals, small_grid.dt(), omega);
    // Refine by splitting each interval: the interpolant is unchanged, so
    // the moment must be bit-comparable.
    let mut fine_vals = Vec::with_capacity(2 * vals.len() - 1);
    for w in vals.windows(2) {
        fine_vals.push(w[0]);
        fine_vals.push((w[0] + w[1]) / crate::s(2.0));
    }
    fine_vals.push(vals[vals.len() - 1]);
    let fine_grid = TimeGrid::<S>::new(chi.grid().t_final(), 128);
    let fine = filon_moment(&fine_vals, fine_grid.dt(), omega);
    out.push(outcome(
        "filon_piecewise_linear_exactness",
        crate::cmod(coarse - fine).to_f64().unwrap_or(f64::NAN),
        1e-12,
    ));

    // Unitarity of the propagator under a bounded drive.
    let drive: Vec<S> = scn
        .grid
        .nodes()
        .iter()
        .map(|&t| (crate::s::<S>(17.0) * t).sin())
        .collect();
    let u = ControlSignal::from_samples(scn.grid, drive);
    let psi0 = ModalState::basis_vector(n, 1);
    let traj = scn.propagate_nonlinear(&u, &psi0, cfg)?;
    let unit_defect = traj
        .iter()
        .map(|st| (st.norm() - S::one()).abs().to_f64().unwrap_or(f64::NAN))
        .fold(0.0f64, f64::max);
    out.push(outcome("propagator_unitarity", unit_defect, 1e-9));

    // Free flight exactness.
    let free = scn.propagate_nonlinear(&ControlSignal::zero(scn.grid, 0), &psi0, cfg)?;
    let want = scn.psi1(scn.grid.t_final());
    out.push(outcome(
        "free_flight_exactness",
        free.last().unwrap().sub(&want).norm().to_f64().unwrap_or(f64::NAN),
        1e-12,
    ));

    // Dipole decay certificate presence.
    let decay = scn
        .dipole
        .decay_constant
        .map(|c| c.to_f64().unwrap_or(f64::NAN))
        .unwrap_or(0.0);
    out.push(VerifyOutcome {
        name: "dipole_decay_constant".into(),
        pass: decay > cfg.decay_floor,
        measured: decay,
        threshold: cfg.decay_floor,
    });

    Ok(out)
}

//! Subcommand implementations. Every artifact goes through the atomic
//! writer and carries the config hash + toolkit version.

use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use qmoment_core::io::{
    atomic_write, control_from_csv, control_sidecar, control_to_csv, moments_from_csv,
    trajectory_to_csv, ArtifactMeta, ControlSidecar,
};
use qmoment_core::moment::{contraction_probe, weak_estimate_solver, FrequencyLadder};
use qmoment_core::signal::ControlSignal;
use qmoment_core::spectral::ModalState;
use qmoment_core::synthesis::{
    estimate_ratio_sweep, linearized_control, nonlinear_control, ControlTask,
};
use qmoment_core::verify::run_suite;
use qmoment_core::{Error, Real};

use crate::config::{ControlConfig, ScenarioConfig};
use crate::{CliError, ControlMode};

fn meta(cfg: &ScenarioConfig) -> ArtifactMeta {
    ArtifactMeta::new(cfg.hash())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::input(format!("serialization failed: {e}")))?;
    text.push('\n');
    atomic_write(path, &text)?;
    Ok(())
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn load_control(
    cfg: &ScenarioConfig,
    n_steps: usize,
) -> Result<ControlSignal<Real>, CliError> {
    let grid = qmoment_core::signal::TimeGrid::new(cfg.duration(), n_steps);
    match &cfg.control {
        None => Ok(ControlSignal::zero(grid, 0)),
        Some(ControlConfig::Wave { amplitude, omega }) => {
            let vals: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&t| amplitude * (omega * t).sin())
                .collect();
            Ok(ControlSignal::from_samples(grid, vals))
        }
        Some(ControlConfig::File { file }) => {
            let csv = std::fs::read_to_string(file)
                .map_err(|e| CliError::input(format!("control {}: {e}", file.display())))?;
            let sc_path = file.with_extension("csv.json");
            let sc_text = std::fs::read_to_string(&sc_path).map_err(|e| {
                CliError::input(format!("control sidecar {}: {e}", sc_path.display()))
            })?;
            let sc: ControlSidecar = serde_json::from_str(&sc_text)
                .map_err(|e| CliError::input(format!("control sidecar: {e}")))?;
            let u = control_from_csv(&csv, &sc)?;
            if u.grid().n_steps() != n_steps {
                return Err(CliError::input(format!(
                    "control file has {} steps, scenario expects {n_steps}",
                    u.grid().n_steps()
                )));
            }
            Ok(u)
        }
    }
}

#[derive(Serialize)]
struct ConservationReport {
    max_norm_defect: f64,
    endpoint_norm: f64,
    n_steps: usize,
    config_hash: String,
    version: String,
}

pub fn simulate(cfg: &ScenarioConfig, out: &Path, dt_halve: bool) -> Result<(), CliError> {
    let meta = meta(cfg);
    let run_at = |n_steps: usize| -> Result<(Vec<ModalState<Real>>, ControlSignal<Real>), CliError> {
        let scn = cfg.build_scenario(n_steps)?;
        let u = load_control(cfg, n_steps)?;
        let psi0 = ModalState::basis_vector(cfg.j_max, cfg.psi0_mode);
        Ok((scn.propagate_nonlinear(&u, &psi0, &cfg.tolerances)?, u))
    };

    let (traj, _u) = run_at(cfg.n_steps)?;
    let grid = qmoment_core::signal::TimeGrid::new(cfg.duration(), cfg.n_steps);
    atomic_write(
        &out.join("trajectory.csv"),
        &trajectory_to_csv(&grid, &traj, &meta),
    )?;
    let max_norm_defect = traj
        .iter()
        .map(|st| (st.norm() - 1.0).abs())
        .fold(0.0f64, f64::max);
    write_json(
        &out.join("conservation.json"),
        &ConservationReport {
            max_norm_defect,
            endpoint_norm: traj.last().unwrap().norm(),
            n_steps: cfg.n_steps,
            config_hash: meta.config_hash.clone(),
            version: meta.version.clone(),
        },
    )?;

    if dt_halve {
        // Self-convergence: endpoint differences under dt halving. The
        // control is resampled on each finer grid, so the piecewise-linear
        // waveform itself is refined, not just the propagator.
        let mut endpoints = vec![traj.last().unwrap().clone()];
        for factor in [2usize, 4] {
            let (t, _) = run_at(cfg.n_steps * factor)?;
            endpoints.push(t.last().unwrap().clone());
        }
        let mut csv = format!(
            "# config_hash: {}\n# version: {}\nn_steps,endpoint_diff_to_next\n",
            meta.config_hash, meta.version
        );
        for (i, factor) in [1usize, 2].iter().enumerate() {
            use std::fmt::Write as _;
            let diff = endpoints[i].sub(&endpoints[i + 1]).norm();
            let _ = writeln!(csv, "{},{:.17e}", cfg.n_steps * factor, diff);
        }
        atomic_write(&out.join("dt_convergence.csv"), &csv)?;
    }
    Ok(())
}

pub fn solve_moment(cfg: &ScenarioConfig, out: &Path, targets: &Path) -> Result<(), CliError> {
    let meta = meta(cfg);
    let text = std::fs::read_to_string(targets)
        .map_err(|e| CliError::input(format!("targets {}: {e}", targets.display())))?;
    let d = moments_from_csv(&text, cfg.j_max)?;
    let ladder = FrequencyLadder::<Real>::schrodinger(cfg.j_max);
    let chi = cfg.bump(cfg.n_steps)?;
    let (u, report) = weak_estimate_solver(&d, cfg.k, &ladder, &chi, &cfg.tolerances)?;
    atomic_write(&out.join("control.csv"), &control_to_csv(&u, &meta))?;
    write_json(
        &out.join("control.csv.json"),
        &control_sidecar(&u, true, &meta),
    )?;
    write_json(&out.join("solver_report.json"), &report)?;
    Ok(())
}

#[derive(Deserialize)]
struct EndpointFile {
    psi0: Vec<[f64; 2]>,
    psif: Vec<[f64; 2]>,
}

fn parse_state(raw: &[[f64; 2]], dim: usize, name: &str) -> Result<ModalState<Real>, CliError> {
    if raw.len() != dim {
        return Err(CliError::input(format!(
            "{name}: expected {dim} modes, got {}",
            raw.len()
        )));
    }
    Ok(ModalState::new(
        raw.iter().map(|c| Complex::new(c[0], c[1])).collect(),
    ))
}

pub fn control(
    cfg: &ScenarioConfig,
    out: &Path,
    mode: ControlMode,
    endpoints: &Path,
) -> Result<(), CliError> {
    let meta = meta(cfg);
    let text = std::fs::read_to_string(endpoints)
        .map_err(|e| CliError::input(format!("endpoints {}: {e}", endpoints.display())))?;
    let ep: EndpointFile = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("endpoints: {e}")))?;
    let psi0 = parse_state(&ep.psi0, cfg.j_max, "psi0")?;
    let psif = parse_state(&ep.psif, cfg.j_max, "psif")?;
    let scn = cfg.build_scenario(cfg.n_steps)?;
    let chi = cfg.bump(cfg.n_steps)?;
    let result = match mode {
        ControlMode::Linear => linearized_control(&scn, &psi0, &psif, &chi, &cfg.tolerances),
        ControlMode::Nonlinear => {
            let task = ControlTask::new(psi0, psif, cfg.delta);
            nonlinear_control(&scn, &task, &chi, &cfg.tolerances)
        }
    };
    match result {
        Ok((u, report)) => {
            atomic_write(&out.join("control.csv"), &control_to_csv(&u, &meta))?;
            write_json(
                &out.join("control.csv.json"),
                &control_sidecar(&u, true, &meta),
            )?;
            write_json(&out.join("synthesis_report.json"), &report)?;
            Ok(())
        }
        Err(Error::NoConvergence {
            iters,
            residual,
            tol,
            history,
        }) => {
            #[derive(Serialize)]
            struct FailureReport {
                iters: usize,
                residual: f64,
                tol: f64,
                history: Vec<f64>,
            }
            write_json(
                &out.join("synthesis_failure.json"),
                &FailureReport {
                    iters,
                    residual,
                    tol,
                    history,
                },
            )?;
            Err(CliError::NoConvergence(format!(
                "no convergence after {iters} iterations (residual {residual:.3e} > {tol:.3e}); \
                 history written to synthesis_failure.json"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn verify(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let scn = cfg.build_scenario(cfg.n_steps)?;
    let chi = cfg.bump(cfg.n_steps)?;
    let outcomes = run_suite(&scn, &chi, &cfg.tolerances, cfg.seed)?;
    write_json(&out.join("verify.json"), &outcomes)?;
    let mut failed = Vec::new();
    for o in &outcomes {
        println!(
            "{}: {} (measured {:.3e}, threshold {:.3e})",
            o.name,
            if o.pass { "pass" } else { "FAIL" },
            o.measured,
            o.threshold
        );
        if !o.pass {
            failed.push(o.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            outcomes.len(),
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct SweepSummary {
    remainder_slope: Option<f64>,
    ratio_growth_max: Option<f64>,
    contraction_min: Option<f64>,
    errors: Vec<String>,
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    use std::fmt::Write as _;
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::input("sweep: config has no sweep block"))?;
    let meta = meta(cfg);
    let header = format!(
        "# config_hash: {}\n# version: {}\n",
        meta.config_hash, meta.version
    );
    let mut errors = Vec::new();

    // Remainder scaling in the drive amplitude.
    let mut remainder_slope = None;
    match cfg.build_scenario(cfg.n_steps) {
        Ok(scn) => {
            let omega1 = 3.0 * std::f64::consts::PI * std::f64::consts::PI;
            let vals: Vec<f64> = scn
                .grid
                .nodes()
                .iter()
                .map(|&t| (omega1 * t).sin())
                .collect();
            let u = ControlSignal::from_samples(scn.grid, vals);
            let phi1 = ModalState::basis_vector(cfg.j_max, 1);
            let mut csv = header.clone();
            csv.push_str("epsilon,remainder_norm\n");
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &e in &sw.epsilons {
                match scn.quadratic_remainder(&phi1, &u.scale(e), &cfg.tolerances) {
                    Ok(r) => {
                        let n = r.norm();
                        let _ = writeln!(csv, "{e:.17e},{n:.17e}");
                        xs.push(e.ln());
                        ys.push(n.ln());
                    }
                    Err(err) => {
                        let _ = writeln!(csv, "{e:.17e},nan");
                        errors.push(format!("remainder sweep at epsilon {e}: {err}"));
                    }
                }
            }
            if xs.len() >= 2 {
                remainder_slope = Some(fit_slope(&xs, &ys));
            }
            atomic_write(&out.join("remainder_sweep.csv"), &csv)?;
        }
        Err(e) => errors.push(format!("remainder sweep: {}", e.message())),
    }

    // Estimate-ratio stability under sample doubling.
    let mut ratio_growth_max = None;
    match cfg.build_scenario(cfg.n_steps).and_then(|scn| {
        let chi = cfg.bump(cfg.n_steps)?;
        Ok(estimate_ratio_sweep(
            &scn,
            sw.n_samples,
            sw.delta,
            &chi,
            &cfg.tolerances,
            cfg.seed,
        )?)
    }) {
        Ok(table) => {
            let mut csv = header.clone();
            csv.push_str("m,max_ratio_half,max_ratio_full,growth\n");
            for row in &table.rows {
                let _ = writeln!(
                    csv,
                    "{},{:.17e},{:.17e},{:.17e}",
                    row.m, row.max_ratio_half, row.max_ratio_full, row.growth
                );
            }
            atomic_write(&out.join("ratio_sweep.csv"), &csv)?;
            ratio_growth_max = table
                .rows
                .iter()
                .map(|r| r.growth)
                .fold(None, |acc: Option<f64>, g| {
                    Some(acc.map_or(g, |a| a.max(g)))
                });
        }
        Err(e) => errors.push(format!("ratio sweep: {}", e.message())),
    }

    // Neumann contraction factor against the cutoff.
    let ladder = FrequencyLadder::<Real>::schrodinger(sw.ladder_len);
    let chi = cfg.bump(cfg.n_steps)?;
    let mut csv = header.clone();
    csv.push_str("n_cut,rho\n");
    let mut contraction_min = None;
    for &n_cut in &sw.cutoffs {
        let rho = contraction_probe(n_cut, &ladder, &chi, cfg.tolerances.probe_iters, cfg.seed);
        let _ = writeln!(csv, "{n_cut},{rho:.17e}");
        contraction_min = Some(contraction_min.map_or(rho, |a: f64| a.min(rho)));
    }
    atomic_write(&out.join("contraction_sweep.csv"), &csv)?;

    write_json(
        &out.join("sweep_summary.json"),
        &SweepSummary {
            remainder_slope,
            ratio_growth_max,
            contraction_min,
            errors: errors.clone(),
        },
    )?;
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} sweep point(s) errored; see sweep_summary.json",
            errors.len()
        )))
    }
}

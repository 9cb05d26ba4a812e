//! Scenario configuration: TOML primary, JSON accepted, validated with
//! field-level diagnostics before anything numerical runs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qmoment_core::signal::{BumpChi, TimeGrid};
use qmoment_core::sim::Scenario;
use qmoment_core::spectral::{build_dipole, EigenBasis, MuSpec, ProjectionSet};
use qmoment_core::{Real, Tolerances};

use crate::CliError;

/// Projection index set: explicit list or inclusive range string "a..b".
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JSpec {
    Indices(Vec<usize>),
    Expr(String),
}

impl JSpec {
    pub fn resolve(&self) -> Result<Vec<usize>, CliError> {
        match self {
            Self::Indices(v) => {
                if v.is_empty() {
                    return Err(CliError::input("J: index list is empty"));
                }
                Ok(v.clone())
            }
            Self::Expr(e) => {
                let (a, b) = e
                    .split_once("..")
                    .ok_or_else(|| CliError::input(format!("J: bad range expression {e:?}")))?;
                let a: usize = a.trim().parse().map_err(|_| {
                    CliError::input(format!("J: unparseable range start in {e:?}"))
                })?;
                let b: usize = b.trim().parse().map_err(|_| {
                    CliError::input(format!("J: unparseable range end in {e:?}"))
                })?;
                if a == 0 || b < a {
                    return Err(CliError::input(format!("J: empty or zero-based range {e:?}")));
                }
                Ok((a..=b).collect())
            }
        }
    }
}

/// Coupling profile: builtin name ("x", "x2", "1") or polynomial coefficients
/// c_0 + c_1 x + ….
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuConfig {
    Named(String),
    Coeffs(Vec<f64>),
}

impl MuConfig {
    pub fn to_spec(&self) -> Result<MuSpec<Real>, CliError> {
        match self {
            Self::Named(n) => match n.as_str() {
                "x" => Ok(MuSpec::linear()),
                "x2" => Ok(MuSpec::quadratic()),
                "1" => Ok(MuSpec::one()),
                other => Err(CliError::input(format!(
                    "mu: unknown builtin {other:?} (expected \"x\", \"x2\", \"1\", or coefficients)"
                ))),
            },
            Self::Coeffs(c) => {
                if c.is_empty() {
                    return Err(CliError::input("mu: empty coefficient list"));
                }
                Ok(MuSpec::Poly(c.clone()))
            }
        }
    }
}

/// Builtin drive for `simulate`: zero when absent, file import, or a sine.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlConfig {
    File { file: PathBuf },
    Wave { amplitude: f64, omega: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_samples: usize,
    pub delta: f64,
    /// Amplitudes for the remainder-scaling sweep.
    pub epsilons: Vec<f64>,
    /// High-frequency cutoffs for the contraction sweep.
    pub cutoffs: Vec<usize>,
    /// Ladder length used by the contraction sweep.
    pub ladder_len: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_samples: 16,
            delta: 1e-3,
            epsilons: vec![1e-1, 1e-1 / 3.0, 1e-2, 1e-2 / 3.0, 1e-3],
            cutoffs: vec![8, 16, 32, 64],
            ladder_len: 96,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T0", default)]
    pub t0: f64,
    pub j_max: usize,
    pub n_steps: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(rename = "J")]
    pub j: JSpec,
    pub mu: MuConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub control: Option<ControlConfig>,
    /// Initial state for `simulate`: the eigenmode index.
    #[serde(default = "default_k")]
    pub psi0_mode: usize,
    /// Neighborhood radius for nonlinear control tasks.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    1
}

fn default_delta() -> f64 {
    1e-3
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.t0 >= 0.0 && self.t > self.t0) {
            return Err(CliError::input(format!(
                "T/T0: need T > T0 >= 0, got T = {}, T0 = {}",
                self.t, self.t0
            )));
        }
        if self.p < self.k {
            return Err(CliError::input(format!(
                "p/k: need p >= k, got p = {}, k = {}",
                self.p, self.k
            )));
        }
        if self.j_max == 0 || self.n_steps == 0 {
            return Err(CliError::input("j_max/n_steps: must be positive"));
        }
        let indices = self.j.resolve()?;
        let max_j = indices.iter().copied().max().unwrap_or(0);
        if max_j > self.j_max {
            return Err(CliError::input(format!(
                "J/j_max: max(J) = {max_j} exceeds j_max = {}",
                self.j_max
            )));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tol", t.tol),
            ("bc_tol", t.bc_tol),
            ("sphere_tol", t.sphere_tol),
            ("contraction_ceiling", t.contraction_ceiling),
            ("gram_cond_max", t.gram_cond_max),
        ] {
            if !(v > 0.0) {
                return Err(CliError::input(format!(
                    "tolerances.{name}: must be positive, got {v}"
                )));
            }
        }
        if self.psi0_mode == 0 || self.psi0_mode > self.j_max {
            return Err(CliError::input(format!(
                "psi0_mode: must lie in 1..=j_max, got {}",
                self.psi0_mode
            )));
        }
        if !(self.delta > 0.0) {
            return Err(CliError::input("delta: must be positive"));
        }
        self.mu.to_spec().map(|_| ())
    }

    /// Control horizon; T0 only shifts the time origin.
    pub fn duration(&self) -> f64 {
        self.t - self.t0
    }

    /// Hash of the canonical JSON form, stamped into every artifact. The
    /// output directory is excluded: it addresses where artifacts land, not
    /// what they contain.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.out_dir = None;
        let canonical = serde_json::to_string(&hashed).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_scenario(&self, n_steps: usize) -> Result<Scenario<Real>, CliError> {
        let basis = EigenBasis::new(self.j_max);
        let j_set = ProjectionSet::new(self.j.resolve()?, self.j_max)?;
        let mu = self.mu.to_spec()?;
        let dipole = build_dipole(&mu, &basis, self.p, &j_set, &self.tolerances)?;
        let grid = TimeGrid::new(self.duration(), n_steps);
        Ok(Scenario::new(basis, dipole, grid, j_set, self.p, self.k)?)
    }

    pub fn bump(&self, n_steps: usize) -> Result<BumpChi<Real>, CliError> {
        Ok(BumpChi::with_default_margin(TimeGrid::new(
            self.duration(),
            n_steps,
        ))?)
    }
}

//! Artifact plumbing: CSV/JSON emission and ingestion for controls,
//! trajectories, dipole matrices, and moment targets.
//!
//! All files carry a metadata header (config hash + toolkit version) and are
//! written atomically (temp file + rename). The functions here work on the
//! default `f64` instantiation, which is what the command-line front end
//! drives.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::moment::MomentVector;
use crate::signal::{ControlSignal, TimeGrid};
use crate::spectral::{DipoleOperator, ModalState};
use crate::{Real, Result};

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub config_hash: String,
    pub version: String,
}

impl ArtifactMeta {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Self {
            config_hash: config_hash.into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    fn header(&self) -> String {
        format!(
            "# config_hash: {}\n# version: {}\n",
            self.config_hash, self.version
        )
    }
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "artifact".into())
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// JSON sidecar for an exported control.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlSidecar {
    pub k: usize,
    pub t_final: f64,
    pub n_steps: usize,
    pub h_k0: bool,
    pub config_hash: String,
    pub version: String,
}

/// Two-column CSV (t, u(t)) with the metadata header.
pub fn control_to_csv(u: &ControlSignal<Real>, meta: &ArtifactMeta) -> String {
    let mut out = meta.header();
    out.push_str("t,u\n");
    let grid = u.grid();
    for (i, &v) in u.values().iter().enumerate() {
        let _ = writeln!(out, "{:.17e},{:.17e}", grid.node(i), v);
    }
    out
}

pub fn control_sidecar(
    u: &ControlSignal<Real>,
    h_k0: bool,
    meta: &ArtifactMeta,
) -> ControlSidecar {
    ControlSidecar {
        k: u.k(),
        t_final: u.grid().t_final(),
        n_steps: u.grid().n_steps(),
        h_k0,
        config_hash: meta.config_hash.clone(),
        version: meta.version.clone(),
    }
}

/// Parse a control CSV plus sidecar back into a sample-level signal.
///
/// The samples alone cannot restore the derivative core, so the imported
/// signal is declared at k = 0; the sidecar's k records the original order.
pub fn control_from_csv(csv: &str, sidecar: &ControlSidecar) -> Result<ControlSignal<Real>> {
    let mut values = Vec::new();
    for line in csv.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
            continue;
        }
        let mut parts = line.split(',');
        let _t: f64 = parse_field(parts.next(), "t")?;
        let u: f64 = parse_field(parts.next(), "u")?;
        values.push(u);
    }
    if values.len() != sidecar.n_steps + 1 {
        return Err(Error::Parse(format!(
            "control CSV has {} samples, sidecar declares {} steps",
            values.len(),
            sidecar.n_steps
        )));
    }
    let grid = TimeGrid::new(sidecar.t_final, sidecar.n_steps);
    Ok(ControlSignal::from_samples(grid, values))
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Parse(format!("missing field {name}")))?
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("unparseable field {name}")))
}

/// Trajectory CSV: t followed by Re/Im column blocks per mode.
pub fn trajectory_to_csv(
    grid: &TimeGrid<Real>,
    traj: &[ModalState<Real>],
    meta: &ArtifactMeta,
) -> String {
    let dim = traj.first().map(|s| s.dim()).unwrap_or(0);
    let mut out = meta.header();
    out.push('t');
    for j in 1..=dim {
        let _ = write!(out, ",re_c{j},im_c{j}");
    }
    out.push('\n');
    for (i, st) in traj.iter().enumerate() {
        let _ = write!(out, "{:.17e}", grid.node(i));
        for c in &st.coeffs {
            let _ = write!(out, ",{:.17e},{:.17e}", c.re, c.im);
        }
        out.push('\n');
    }
    out
}

/// Dipole matrix CSV for inspection.
pub fn dipole_to_csv(dip: &DipoleOperator<Real>, meta: &ArtifactMeta) -> String {
    let n = dip.matrix.nrows();
    let mut out = meta.header();
    out.push_str("j,k,value\n");
    for j in 0..n {
        for k in 0..n {
            let _ = writeln!(out, "{},{},{:.17e}", j + 1, k + 1, dip.matrix[(j, k)]);
        }
    }
    out
}

/// Moment targets from CSV rows `index,re,im`. Nonnegative indices address
/// the trigonometric targets d_j; a negative index −q addresses the
/// polynomial target d_{−q} (whose imaginary part must be zero).
pub fn moments_from_csv(csv: &str, len: usize) -> Result<MomentVector<Real>> {
    let mut d = MomentVector::zero(len);
    for line in csv.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let mut parts = line.split(',');
        let idx: i64 = parse_field(parts.next(), "index")?;
        let re: f64 = parse_field(parts.next(), "re")?;
        let im: f64 = parse_field(parts.next(), "im")?;
        if idx >= 0 {
            let j = idx as usize;
            if j >= len {
                return Err(Error::Parse(format!(
                    "moment index {j} exceeds ladder length {len}"
                )));
            }
            d.d[j] = Complex::new(re, im);
        } else {
            let q = (-idx) as usize;
            if im != 0.0 {
                return Err(Error::Parse(format!(
                    "polynomial target d_{{-{q}}} must be real"
                )));
            }
            if d.poly.len() < q {
                d.poly.resize(q, 0.0);
            }
            d.poly[q - 1] = re;
        }
    }
    Ok(d)
}

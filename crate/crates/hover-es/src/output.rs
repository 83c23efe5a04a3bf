//! Result persistence: trajectory CSV, metrics and stability JSON, and the
//! generated plot script.
//!
//! Every JSON output embeds a metadata block (tool version, species file
//! checksums, fully resolved configuration) so any figure can be rebuilt
//! from its own outputs. CSV files stay pure tabular data with the fixed
//! header; their metadata lives in the sibling metrics document. All floats
//! are written with the shortest round-trip formatting, locale-independent.

use crate::esc::EscConfig;
use crate::sim::{HoverMetrics, SimOptions, Trajectory};
use crate::species::{ModelCoefficients, Species};
use crate::stability::StabilityReport;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Metadata block embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool_version: String,
    pub species_checksums: BTreeMap<String, String>,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(species: &[&Species], config: serde_json::Value) -> Metadata {
        let mut checksums = BTreeMap::new();
        for sp in species {
            if let Some(raw) = crate::species::bundled::raw(&sp.name) {
                checksums.insert(sp.name.clone(), sha256_hex(raw.as_bytes()));
            }
        }
        Metadata {
            tool_version: crate::VERSION.to_string(),
            species_checksums: checksums,
            config,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Writes the trajectory as CSV with header
/// `t,z,phi,w,phidot,tauhat,J,lift_ratio`, optionally decimated by `stride`.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    cfg: &EscConfig,
    coeffs: &ModelCoefficients,
    stride: usize,
) -> std::io::Result<()> {
    let stride = stride.max(1);
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "t,z,phi,w,phidot,tauhat,J,lift_ratio")?;
    for i in (0..traj.states.len()).step_by(stride) {
        let x = &traj.states[i];
        let (j, ratio) = traj.channels(i, cfg, coeffs);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            traj.time(i),
            x.plant.z,
            x.plant.phi,
            x.plant.w,
            x.plant.phidot,
            x.tau_hat,
            j,
            ratio
        )?;
    }
    out.flush()
}

/// Metrics JSON mirroring [`HoverMetrics`] plus run context.
pub fn metrics_json(
    metrics: &HoverMetrics,
    diverged_at: Option<f64>,
    opts: &SimOptions,
    metadata: &Metadata,
) -> serde_json::Value {
    json!({
        "metrics": metrics,
        "diverged_at": diverged_at,
        "options": opts,
        "metadata": metadata,
    })
}

/// Stability report JSON: equilibrium, Jacobian (row-major), eigenvalues as
/// {re, im} pairs, verdict, and the analysis switches.
pub fn stability_json(report: &StabilityReport, cfg: &EscConfig, metadata: &Metadata) -> serde_json::Value {
    let jac: Vec<f64> = report.jacobian.iter().flatten().copied().collect();
    let eigenvalues: Vec<serde_json::Value> = report
        .eigenvalues
        .iter()
        .map(|e| json!({"re": e.re, "im": e.im}))
        .collect();
    json!({
        "species": report.species,
        "objective": report.objective,
        "equilibrium": {
            "w": report.equilibrium[0],
            "phidot": report.equilibrium[1],
            "tauhat": report.equilibrium[2],
        },
        "residual_norm": report.residual_norm,
        "jacobian": jac,
        "eigenvalues": eigenvalues,
        "verdict": if report.verdict { "stable" } else { "unstable" },
        "n_smooth": report.n_smooth,
        "a_placement": report.a_placement.key(),
        "ill_conditioned": report.ill_conditioned,
        "tauhat_law": cfg.tauhat_law.key(),
        "metadata": metadata,
    })
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text)
}

/// Emits a self-contained Python script that renders the six trajectory
/// panels (z, w, phidot, tauhat, J, lift ratio) from the CSV next to it.
pub fn write_plot_script(path: &Path, csv_name: &str, title: &str) -> std::io::Result<()> {
    let script = format!(
        r#"#!/usr/bin/env python3
"""Renders the hover trajectory panels from {csv}."""
import csv
import os.path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
cols = {{}}
with open(os.path.join(here, "{csv}")) as fh:
    reader = csv.DictReader(fh)
    for row in reader:
        for key, value in row.items():
            cols.setdefault(key, []).append(float(value))

panels = [
    ("z", "altitude z [m]"),
    ("w", "vertical velocity w [m/s]"),
    ("phidot", "flapping rate [rad/s]"),
    ("tauhat", "mean torque estimate [N m]"),
    ("J", "objective J"),
    ("lift_ratio", "lift / weight"),
]
fig, axes = plt.subplots(3, 2, figsize=(11, 9), sharex=True)
for ax, (key, label) in zip(axes.flat, panels):
    ax.plot(cols["t"], cols[key], lw=0.7)
    ax.set_ylabel(label)
    ax.grid(alpha=0.3)
for ax in axes[-1]:
    ax.set_xlabel("time [s]")
fig.suptitle({title:?})
fig.tight_layout()
out = os.path.join(here, "{stem}.png")
fig.savefig(out, dpi=150)
print(out)
"#,
        csv = csv_name,
        title = title,
        stem = csv_name.trim_end_matches(".csv"),
    );
    std::fs::write(path, script)
}

//! Command-line interface: species inspection, hover simulation, sweeps,
//! stability analysis, and the consolidated reproduction driver.
//!
//! Exit codes are stable: 0 success, 1 acceptance failure, 2 configuration
//! error, 3 divergence, 4 analysis failure.

use crate::esc::{EscConfig, LiftModel, Objective, TauHatLaw};
use crate::output::{
    metrics_json, stability_json, write_json, write_plot_script, write_trajectory_csv, Metadata,
};
use crate::reproduce::{evaluate, summary_json, summary_text, ReproduceOptions};
use crate::sim::{run_hover, run_open_loop, sweep, SimOptions};
use crate::species::{bundled, load_species_file, Species};
use crate::stability::{analyze, AnalysisOptions, APlacement};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ACCEPTANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_ANALYSIS: i32 = 4;

#[derive(Parser)]
#[command(
    name = "hover-es",
    version,
    about = "Flapping-flight hover simulation and extremum-seeking stability analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Inspect species records and coefficient derivation
    Species {
        #[command(subcommand)]
        action: SpeciesAction,
    },
    /// Run one hover experiment and export trajectory, metrics, and plot script
    Simulate(SimulateArgs),
    /// Run the species x objective grid and export the metrics table
    Sweep(SweepArgs),
    /// Averaged-system stability analysis with eigenvalue verdicts
    Stability(StabilityArgs),
    /// Regenerate all verification tables and the consolidated summary
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand)]
pub enum SpeciesAction {
    /// List available species
    List(DataArgs),
    /// Print morphology and resolved coefficients for one species
    Show {
        name: String,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Derive coefficients from morphology and compare with the stored set
    Derive {
        /// Species name or path to a species JSON file
        source: String,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Args, Clone, Default)]
pub struct DataArgs {
    /// Directory of species JSON files overriding the bundled records
    /// (HOVER_ES_DATA is honored when the flag is absent)
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub species: String,
    #[arg(long, default_value = "altitude")]
    pub objective: Objective,
    /// Initial vertical-velocity disturbance, m/s
    #[arg(long, allow_negative_numbers = true)]
    pub w0: Option<f64>,
    #[arg(long)]
    pub duration_periods: Option<u32>,
    #[arg(long)]
    pub steps_per_period: Option<u32>,
    /// Zero the integrator gain (pure modulation)
    #[arg(long)]
    pub open_loop: bool,
    /// Integrate the smoothed plant
    #[arg(long)]
    pub smoothed: bool,
    #[arg(long)]
    pub n_smooth: Option<u32>,
    /// Override the modulation amplitude a, N m s
    #[arg(long, allow_negative_numbers = true)]
    pub amplitude: Option<f64>,
    /// Override the integrator gain K
    #[arg(long, allow_negative_numbers = true)]
    pub gain: Option<f64>,
    /// Override the modulation angular frequency, rad/s
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub tauhat_law: Option<TauHatLaw>,
    #[arg(long)]
    pub lift_model: Option<LiftModel>,
    /// Keep every n-th sample in the CSV
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Exit 0 on completion even when the run did not settle
    #[arg(long)]
    pub no_assert: bool,
    #[arg(long, default_value = "hover-es-output")]
    pub output: PathBuf,
    /// Comma-separated writers: csv, json
    #[arg(long, default_value = "csv,json")]
    pub format: String,
    /// Run-configuration JSON file (flags take precedence over its fields)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Comma-separated species names, or "all"
    #[arg(long, default_value = "all")]
    pub species: String,
    /// altitude, lift_balance, or both
    #[arg(long, default_value = "both")]
    pub objective: String,
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    pub w0: f64,
    #[arg(long)]
    pub duration_periods: Option<u32>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "hover-es-output")]
    pub output: PathBuf,
    #[arg(long, default_value = "csv,json")]
    pub format: String,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args)]
pub struct StabilityArgs {
    /// Analyze every bundled species and objective
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub species: Option<String>,
    #[arg(long)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub n_smooth: Option<u32>,
    #[arg(long, default_value = "squared")]
    pub a_placement: APlacement,
    #[arg(long)]
    pub tauhat_law: Option<TauHatLaw>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "hover-es-output")]
    pub output: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 1000)]
    pub duration_periods: u32,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "hover-es-output")]
    pub output: PathBuf,
}

/// Optional run-configuration file; command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    w0: Option<f64>,
    duration_periods: Option<u32>,
    steps_per_period: Option<u32>,
    n_smooth: Option<u32>,
    amplitude: Option<f64>,
    gain: Option<f64>,
    omega: Option<f64>,
    tauhat_law: Option<String>,
    lift_model: Option<String>,
    open_loop: Option<bool>,
    smoothed: Option<bool>,
    stride: Option<usize>,
}

fn fail(code: i32, message: impl std::fmt::Display) -> i32 {
    eprintln!("error: {message}");
    code
}

fn data_dir(args: &DataArgs) -> Option<PathBuf> {
    args.data_dir
        .clone()
        .or_else(|| std::env::var_os("HOVER_ES_DATA").map(PathBuf::from))
}

fn resolve_species(source: &str, data: &DataArgs) -> Result<Species, String> {
    let as_path = Path::new(source);
    if as_path.is_file() {
        return load_species_file(as_path).map_err(|e| e.to_string());
    }
    if let Some(dir) = data_dir(data) {
        let candidate = dir.join(format!("{source}.json"));
        if candidate.is_file() {
            return load_species_file(&candidate).map_err(|e| e.to_string());
        }
    }
    bundled::load(source).map_err(|e| format!("unknown species '{source}': {e}"))
}

fn list_species(data: &DataArgs) -> Vec<String> {
    let mut names: Vec<String> = bundled::NAMES.iter().map(|s| s.to_string()).collect();
    if let Some(dir) = data_dir(data) {
        if let Ok(entries) = std::fs::read_dir(&dir) {
            let mut extra: Vec<String> = entries
                .flatten()
                .filter_map(|e| {
                    let p = e.path();
                    (p.extension().is_some_and(|x| x == "json"))
                        .then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
                })
                .filter(|n| !names.contains(n))
                .collect();
            extra.sort();
            names.extend(extra);
        }
    }
    names
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Species { action } => run_species(action),
        Command::Simulate(args) => run_simulate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Stability(args) => run_stability(args),
        Command::Reproduce(args) => run_reproduce(args),
    }
}

fn run_species(action: SpeciesAction) -> i32 {
    match action {
        SpeciesAction::List(data) => {
            for name in list_species(&data) {
                match resolve_species(&name, &data) {
                    Ok(sp) => println!(
                        "{:<12} f = {:6.1} Hz, m = {:9.4} g, overridden coefficients: {}",
                        sp.name,
                        sp.morphology.flap_hz,
                        sp.morphology.mass * 1e3,
                        sp.coefficients_overridden
                    ),
                    Err(e) => println!("{name:<12} (unreadable: {e})"),
                }
            }
            EXIT_OK
        }
        SpeciesAction::Show { name, data } => match resolve_species(&name, &data) {
            Ok(sp) => {
                let m = &sp.morphology;
                let c = &sp.coefficients;
                println!("species: {}", sp.name);
                println!(
                    "morphology: f = {} Hz, amplitude = {:.4} rad, S = {:.4e} m^2, R = {:.4e} m",
                    m.flap_hz, m.flap_amplitude, m.wing_area, m.wing_radius
                );
                println!(
                    "            r1_hat = {}, r2_hat = {}, m = {:.4e} kg, alpha_m = {:.4} rad",
                    m.r1_hat, m.r2_hat, m.mass, m.mean_aoa
                );
                println!(
                    "coefficients ({}): k_d1 = {}, k_l = {}, k_d2 = {}, k_d3 = {}, i_f = {:e}",
                    if sp.coefficients_overridden { "file override" } else { "derived" },
                    c.k_d1,
                    c.k_l,
                    c.k_d2,
                    c.k_d3,
                    c.i_f
                );
                println!(
                    "coupling identity residual: {:+.4}%",
                    100.0 * c.coupling_identity_residual()
                );
                println!(
                    "esc gains: altitude (a = {:e}, k = {}), lift_balance (a = {:e}, k = {})",
                    sp.esc.altitude.a, sp.esc.altitude.k, sp.esc.lift_balance.a, sp.esc.lift_balance.k
                );
                EXIT_OK
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
        SpeciesAction::Derive { source, data } => match resolve_species(&source, &data) {
            Ok(sp) => match sp.derive_coefficients() {
                Ok(d) => {
                    let r = &sp.coefficients;
                    println!("species: {} (stored set: {})", sp.name, if sp.coefficients_overridden { "file override" } else { "derived" });
                    println!("  coefficient      derived        stored         deviation");
                    for (name, dv, rv) in [
                        ("k_d1", d.k_d1, r.k_d1),
                        ("k_l", d.k_l, r.k_l),
                        ("k_d2", d.k_d2, r.k_d2),
                        ("k_d3", d.k_d3, r.k_d3),
                        ("i_f", d.i_f, r.i_f),
                    ] {
                        println!(
                            "  {:<12} {:>14.6e} {:>14.6e} {:>+9.2}%",
                            name,
                            dv,
                            rv,
                            100.0 * (dv / rv - 1.0)
                        );
                    }
                    println!(
                        "  coupling identity residual: derived {:+.2e}, stored {:+.4}%",
                        d.coupling_identity_residual(),
                        100.0 * r.coupling_identity_residual()
                    );
                    EXIT_OK
                }
                Err(e) => fail(EXIT_ANALYSIS, e),
            },
            Err(e) => fail(EXIT_CONFIG, e),
        },
    }
}

fn build_config(sp: &Species, args: &SimulateArgs, file: &RunConfigFile) -> Result<EscConfig, String> {
    let mut cfg = EscConfig::for_species(sp, args.objective);
    if let Some(v) = file.amplitude {
        cfg.amplitude = v;
    }
    if let Some(v) = file.gain {
        cfg.gain = v;
    }
    if let Some(v) = file.omega {
        cfg.omega = v;
    }
    if let Some(v) = file.n_smooth {
        cfg.n_smooth = v;
    }
    if let Some(v) = &file.tauhat_law {
        cfg.tauhat_law = v.parse()?;
    }
    if let Some(v) = &file.lift_model {
        cfg.lift_model = v.parse()?;
    }
    if let Some(v) = args.amplitude {
        cfg.amplitude = v;
    }
    if let Some(v) = args.gain {
        cfg.gain = v;
    }
    if let Some(v) = args.omega {
        cfg.omega = v;
    }
    if let Some(v) = args.n_smooth {
        cfg.n_smooth = v;
    }
    if let Some(v) = args.tauhat_law {
        cfg.tauhat_law = v;
    }
    if let Some(v) = args.lift_model {
        cfg.lift_model = v;
    }
    if !(cfg.amplitude.is_finite() && cfg.omega > 0.0 && cfg.omega.is_finite()) {
        return Err("amplitude and omega overrides must be finite (omega positive)".into());
    }
    Ok(cfg)
}

fn run_simulate(args: SimulateArgs) -> i32 {
    let file: RunConfigFile = match &args.config {
        Some(path) => match std::fs::read_to_string(path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
        {
            Ok(f) => f,
            Err(e) => return fail(EXIT_CONFIG, format!("{}: {e}", path.display())),
        },
        None => RunConfigFile::default(),
    };
    let sp = match resolve_species(&args.species, &args.data) {
        Ok(sp) => sp,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let cfg = match build_config(&sp, &args, &file) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let opts = SimOptions {
        duration_periods: args
            .duration_periods
            .or(file.duration_periods)
            .unwrap_or(crate::sim::DEFAULT_DURATION_PERIODS),
        steps_per_period: args
            .steps_per_period
            .or(file.steps_per_period)
            .unwrap_or(crate::sim::DEFAULT_STEPS_PER_PERIOD),
        smoothed: args.smoothed || file.smoothed.unwrap_or(false),
    };
    if opts.steps_per_period < 100 {
        eprintln!(
            "warning: steps_per_period = {} is coarser than one hundredth of the flapping \
             period; integration accuracy is degraded",
            opts.steps_per_period
        );
    }
    let w0 = args.w0.or(file.w0).unwrap_or(0.2);
    let open_loop = args.open_loop || file.open_loop.unwrap_or(false);
    let stride = if args.stride != 1 {
        args.stride
    } else {
        file.stride.unwrap_or(1)
    };

    let run = if open_loop {
        run_open_loop(&sp, &cfg, w0, &opts)
    } else {
        run_hover(&sp, &cfg, w0, &opts)
    };

    if let Err(e) = std::fs::create_dir_all(&args.output) {
        return fail(EXIT_CONFIG, format!("{}: {e}", args.output.display()));
    }
    let label = format!(
        "{}_{}{}",
        sp.name,
        cfg.objective.key(),
        if open_loop { "_open" } else { "" }
    );
    let metadata = Metadata::new(
        &[&sp],
        json!({
            "species": sp.name,
            "objective": cfg.objective,
            "w0": w0,
            "open_loop": open_loop,
            "esc": cfg,
            "options": opts,
            "stride": stride,
        }),
    );
    let formats: Vec<&str> = args.format.split(',').map(str::trim).collect();
    if formats.contains(&"csv") {
        let csv_path = args.output.join(format!("{label}.csv"));
        if let Err(e) = write_trajectory_csv(&csv_path, &run.trajectory, &cfg, &sp.coefficients, stride)
        {
            return fail(EXIT_CONFIG, format!("{}: {e}", csv_path.display()));
        }
        let plot_path = args.output.join(format!("{label}_plot.py"));
        if let Err(e) = write_plot_script(
            &plot_path,
            &format!("{label}.csv"),
            &format!("{} / {} hover response", sp.name, cfg.objective),
        ) {
            return fail(EXIT_CONFIG, format!("{}: {e}", plot_path.display()));
        }
    }
    if formats.contains(&"json") {
        let metrics_path = args.output.join(format!("{label}_metrics.json"));
        let value = metrics_json(&run.metrics, run.diverged_at, &opts, &metadata);
        if let Err(e) = write_json(&metrics_path, &value) {
            return fail(EXIT_CONFIG, format!("{}: {e}", metrics_path.display()));
        }
    }

    let m = &run.metrics;
    println!(
        "{label}: settled = {}, mean_w = {:+.5} m/s, z_drift = {:+.5} m/s, lift = {:.4}, \
         amplitude = {}",
        m.settled,
        m.mean_w_tail,
        m.z_drift_rate,
        m.mean_lift_ratio,
        m.phi_amplitude
            .map(|a| format!("{a:.4} rad"))
            .unwrap_or_else(|| "n/a".into()),
    );
    if let Some(t) = run.diverged_at {
        eprintln!("error: integration diverged at t = {t:.6} s");
        return EXIT_DIVERGENCE;
    }
    if args.no_assert || m.settled {
        EXIT_OK
    } else {
        EXIT_ACCEPTANCE
    }
}

fn run_sweep(args: SweepArgs) -> i32 {
    let names: Vec<String> = if args.species == "all" {
        bundled::NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.species.split(',').map(|s| s.trim().to_string()).collect()
    };
    let mut species = Vec::new();
    for name in &names {
        match resolve_species(name, &args.data) {
            Ok(sp) => species.push(sp),
            Err(e) => return fail(EXIT_CONFIG, e),
        }
    }
    let objectives: Vec<Objective> = match args.objective.as_str() {
        "both" => Objective::ALL.to_vec(),
        other => match other.parse() {
            Ok(o) => vec![o],
            Err(e) => return fail(EXIT_CONFIG, e),
        },
    };
    let opts = SimOptions {
        duration_periods: args.duration_periods.unwrap_or(crate::sim::DEFAULT_DURATION_PERIODS),
        ..Default::default()
    };
    let cells = sweep(
        &species,
        &objectives,
        &[args.w0],
        &opts,
        EscConfig::for_species,
        args.jobs,
    );

    if let Err(e) = std::fs::create_dir_all(&args.output) {
        return fail(EXIT_CONFIG, format!("{}: {e}", args.output.display()));
    }
    let refs: Vec<&Species> = species.iter().collect();
    let metadata = Metadata::new(
        &refs,
        json!({"w0": args.w0, "options": opts, "objectives": objectives}),
    );
    let formats: Vec<&str> = args.format.split(',').map(str::trim).collect();
    if formats.contains(&"json") {
        let value = json!({"cells": cells, "metadata": metadata});
        if let Err(e) = write_json(&args.output.join("sweep.json"), &value) {
            return fail(EXIT_CONFIG, e);
        }
    }
    if formats.contains(&"csv") {
        let mut text = String::from(
            "species,objective,w0,mean_w,z_drift_rate,mean_lift_ratio,phi_amplitude,settled,error\n",
        );
        for c in &cells {
            let m = c.metrics.as_ref();
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                c.species,
                c.objective,
                c.w0,
                m.map(|m| m.mean_w_tail.to_string()).unwrap_or_default(),
                m.map(|m| m.z_drift_rate.to_string()).unwrap_or_default(),
                m.map(|m| m.mean_lift_ratio.to_string()).unwrap_or_default(),
                m.and_then(|m| m.phi_amplitude).map(|a| a.to_string()).unwrap_or_default(),
                m.map(|m| m.settled.to_string()).unwrap_or_default(),
                c.error.clone().unwrap_or_default()
            ));
        }
        if let Err(e) = std::fs::write(args.output.join("sweep.csv"), text) {
            return fail(EXIT_CONFIG, e);
        }
    }
    for c in &cells {
        let status = match (&c.error, c.metrics.as_ref()) {
            (Some(err), _) => err.clone(),
            (None, Some(m)) => format!(
                "settled = {}, mean_w = {:+.5}, lift = {:.4}",
                m.settled, m.mean_w_tail, m.mean_lift_ratio
            ),
            _ => "no result".into(),
        };
        println!("{:<12} {:<13} w0 = {:+.2}: {status}", c.species, c.objective.to_string(), c.w0);
    }
    EXIT_OK
}

fn run_stability(args: StabilityArgs) -> i32 {
    let pairs: Vec<(String, Objective)> = if args.all {
        bundled::NAMES
            .iter()
            .flat_map(|n| Objective::ALL.map(|o| (n.to_string(), o)))
            .collect()
    } else {
        match (&args.species, args.objective) {
            (Some(s), Some(o)) => vec![(s.clone(), o)],
            (Some(s), None) => Objective::ALL.map(|o| (s.clone(), o)).to_vec(),
            _ => {
                return fail(
                    EXIT_CONFIG,
                    "pass --all, or --species with an optional --objective",
                )
            }
        }
    };

    if let Err(e) = std::fs::create_dir_all(&args.output) {
        return fail(EXIT_CONFIG, format!("{}: {e}", args.output.display()));
    }

    let mut any_unstable = false;
    for (name, objective) in &pairs {
        let sp = match resolve_species(name, &args.data) {
            Ok(sp) => sp,
            Err(e) => return fail(EXIT_CONFIG, e),
        };
        let mut cfg = EscConfig::for_species(&sp, *objective);
        if let Some(n) = args.n_smooth {
            cfg.n_smooth = n;
        }
        if let Some(law) = args.tauhat_law {
            cfg.tauhat_law = law;
        }
        let options = AnalysisOptions {
            placement: args.a_placement,
            seed: None,
        };
        match analyze(&sp, &cfg, &options) {
            Ok(report) => {
                let eigs: Vec<String> = report
                    .eigenvalues
                    .iter()
                    .map(|e| format!("{:+.4e}{:+.3e}i", e.re, e.im))
                    .collect();
                println!(
                    "{:<12} {:<13} verdict = {:<8} eigenvalues = [{}]{}",
                    report.species,
                    report.objective.to_string(),
                    if report.verdict { "stable" } else { "unstable" },
                    eigs.join(", "),
                    if report.ill_conditioned { " (ill-conditioned)" } else { "" }
                );
                if !report.verdict {
                    any_unstable = true;
                }
                let metadata = Metadata::new(&[&sp], json!({"esc": cfg, "a_placement": args.a_placement}));
                let value = stability_json(&report, &cfg, &metadata);
                let path = args
                    .output
                    .join(format!("stability_{}_{}.json", report.species, report.objective.key()));
                if let Err(e) = write_json(&path, &value) {
                    return fail(EXIT_CONFIG, format!("{}: {e}", path.display()));
                }
            }
            Err(e) => return fail(EXIT_ANALYSIS, format!("{name}/{objective}: {e}")),
        }
    }
    if any_unstable {
        EXIT_ACCEPTANCE
    } else {
        EXIT_OK
    }
}

fn run_reproduce(args: ReproduceArgs) -> i32 {
    let opts = ReproduceOptions {
        duration_periods: args.duration_periods,
        jobs: args.jobs,
    };
    let report = evaluate(&opts);
    if let Err(e) = std::fs::create_dir_all(&args.output) {
        return fail(EXIT_CONFIG, format!("{}: {e}", args.output.display()));
    }
    let json_text = summary_json(&report);
    let text = summary_text(&report);
    if let Err(e) = std::fs::write(args.output.join("summary.json"), &json_text) {
        return fail(EXIT_CONFIG, e);
    }
    if let Err(e) = std::fs::write(args.output.join("summary.txt"), &text) {
        return fail(EXIT_CONFIG, e);
    }
    print!("{text}");
    for criterion in &report.criteria {
        if !criterion.passed {
            let failing: Vec<&str> = criterion
                .cells
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.label.as_str())
                .collect();
            eprintln!(
                "criterion {} failed: {} [{}]",
                criterion.id,
                criterion.name,
                failing.join("; ")
            );
        }
    }
    if report.passed {
        EXIT_OK
    } else {
        EXIT_ACCEPTANCE
    }
}

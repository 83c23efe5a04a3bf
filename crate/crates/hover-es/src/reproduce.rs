//! Consolidated verification driver.
//!
//! Eight acceptance checks cover the full pipeline: closed-loop settling for
//! every species and objective, the open-loop contrast case, flapping
//! amplitudes against the reference column, averaged-system stability
//! verdicts against the reference eigenvalues, smoothing fidelity, the
//! species-module identities, the numerical oracles, and determinism.
//! The driver reports every cell individually and never aborts early, so a
//! red criterion still yields a complete summary.

use crate::esc::{EscConfig, Objective};
use crate::output::Metadata;
use crate::sim::{run_hover, run_open_loop, HoverRun, SimOptions};
use crate::species::{bundled, Species};
use crate::stability::{analyze, AnalysisOptions};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

/// Reference flapping-angle amplitudes (rad) per species.
pub const REFERENCE_AMPLITUDES: [(&str, f64); 6] = [
    ("hawkmoth", 1.07),
    ("cranefly", 1.03),
    ("bumblebee", 0.98),
    ("dragonfly", 0.91),
    ("hoverfly", 0.75),
    ("hummingbird", 1.19),
];

/// Reference eigenvalues of the reduced averaged system, per species and
/// objective (altitude first, lift balance second).
pub const REFERENCE_EIGENVALUES: [(&str, [f64; 3], [f64; 3]); 6] = [
    ("hawkmoth", [-9.98, -5.54e5, -1.95e4], [-143.25, -1.86e4, -5.25e5]),
    ("cranefly", [-7.34, -8.91e4, -1.44e6], [-1.18e3, -1.04e5, -3.24e6]),
    ("bumblebee", [-1.55, -1.05e5, -1.23e7], [-1.82e3, -1.69e5, -9.78e6]),
    ("dragonfly", [-1.69, -1.38e5, -3.99e6], [-1.55e3, -9.17e4, -2.12e7]),
    ("hoverfly", [-1.05, -1.21e5, -7.80e6], [-3.87e3, -1.20e5, -1.55e7]),
    ("hummingbird", [-2.36, -1.73e5, -2.90e6], [-1.60e3, -2.49e4, -4.16e6]),
];

/// Lift-ratio acceptance band for settled hover.
pub const LIFT_BAND: (f64, f64) = (0.95, 1.05);
/// Amplitude acceptance tolerance, relative.
pub const AMPLITUDE_TOL: f64 = 0.10;
/// Eigenvalue magnitude ratio window against the reference values.
pub const EIGEN_RATIO_WINDOW: (f64, f64) = (0.1, 10.0);
/// Wall-clock budget per hover run, seconds.
pub const RUN_BUDGET_S: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub struct ReproduceOptions {
    /// Hover-run length used by the settling checks.
    pub duration_periods: u32,
    pub jobs: usize,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            duration_periods: 1000,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellOutcome {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub cells: Vec<CellOutcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub species: String,
    /// Percent deviation of derived vs reference coefficients
    /// (kd1, kl, kd2, kd3, i_f).
    pub derived_deviation_pct: [f64; 5],
    /// Relative violation of kd3 = 2 m kl / i_f inside the reference set.
    pub reference_identity_residual: f64,
    /// Same identity evaluated on the derived set (zero to roundoff).
    pub derived_identity_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryReport {
    pub metadata: Metadata,
    pub coefficient_table: Vec<CoefficientRow>,
    pub criteria: Vec<CriterionReport>,
    pub passed: bool,
}

fn cell(label: impl Into<String>, passed: bool, detail: String) -> CellOutcome {
    CellOutcome {
        label: label.into(),
        passed,
        detail,
    }
}

struct HoverCell {
    species: String,
    objective: Objective,
    w0: f64,
    run: HoverRun,
    runtime_ok: bool,
}

fn hover_grid(species: &[Species], opts: &ReproduceOptions) -> Vec<HoverCell> {
    let sim = SimOptions {
        duration_periods: opts.duration_periods,
        ..Default::default()
    };
    let grid: Vec<(usize, Objective, f64)> = species
        .iter()
        .enumerate()
        .flat_map(|(i, _)| {
            Objective::ALL
                .into_iter()
                .flat_map(move |o| [0.2, -0.2].into_iter().map(move |w0| (i, o, w0)))
        })
        .collect();
    let run_one = |&(i, objective, w0): &(usize, Objective, f64)| -> HoverCell {
        let sp = &species[i];
        let cfg = EscConfig::for_species(sp, objective);
        let started = std::time::Instant::now();
        let run = run_hover(sp, &cfg, w0, &sim);
        let runtime_ok = started.elapsed().as_secs_f64() < RUN_BUDGET_S;
        HoverCell {
            species: sp.name.clone(),
            objective,
            w0,
            run,
            runtime_ok,
        }
    };
    if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("thread pool");
        pool.install(|| grid.par_iter().map(run_one).collect())
    } else {
        grid.iter().map(run_one).collect()
    }
}

fn criterion_1(cells: &[HoverCell]) -> CriterionReport {
    let outcomes: Vec<CellOutcome> = cells
        .iter()
        .map(|c| {
            let m = &c.run.metrics;
            let lift_ok = m.mean_lift_ratio > LIFT_BAND.0 && m.mean_lift_ratio < LIFT_BAND.1;
            let passed = m.settled && lift_ok && c.runtime_ok && c.run.diverged_at.is_none();
            let detail = match c.run.diverged_at {
                Some(t) => format!("diverged at t = {t:.3} s"),
                None => format!(
                    "mean_w = {:+.5} m/s, z_drift = {:+.5} m/s, lift = {:.4}, settled = {}",
                    m.mean_w_tail, m.z_drift_rate, m.mean_lift_ratio, m.settled
                ),
            };
            cell(
                format!("{}/{}/w0={:+.1}", c.species, c.objective, c.w0),
                passed,
                detail,
            )
        })
        .collect();
    CriterionReport {
        id: 1,
        name: "closed-loop hover settling".into(),
        passed: outcomes.iter().all(|c| c.passed),
        cells: outcomes,
    }
}

fn criterion_2(species: &[Species], opts: &ReproduceOptions) -> CriterionReport {
    let hawkmoth = species.iter().find(|s| s.name == "hawkmoth").expect("bundled hawkmoth");
    let cfg = EscConfig::for_species(hawkmoth, Objective::AltitudeSquared);
    let sim = SimOptions {
        duration_periods: opts.duration_periods.min(400),
        ..Default::default()
    };
    let open = run_open_loop(hawkmoth, &cfg, -1.0, &sim);
    let om = &open.metrics;
    let open_ok = open.diverged_at.is_none()
        && om.mean_w_tail.abs() > 0.05
        && om.z_drift_rate.abs() > 0.05;
    let mut cells = vec![cell(
        "open-loop hawkmoth/altitude/w0=-1",
        open_ok,
        format!(
            "mean_w = {:+.4} m/s, z_drift = {:+.4} m/s (steady non-hover climb expected)",
            om.mean_w_tail, om.z_drift_rate
        ),
    )];
    let sim_long = SimOptions {
        duration_periods: opts.duration_periods,
        ..Default::default()
    };
    let closed = run_hover(hawkmoth, &cfg, -1.0, &sim_long);
    let cm = &closed.metrics;
    let closed_ok = closed.diverged_at.is_none() && cm.settled;
    cells.push(cell(
        "closed-loop hawkmoth/altitude/w0=-1",
        closed_ok,
        match closed.diverged_at {
            Some(t) => format!("diverged at t = {t:.3} s"),
            None => format!(
                "mean_w = {:+.5} m/s, z_drift = {:+.5} m/s, settled = {}",
                cm.mean_w_tail, cm.z_drift_rate, cm.settled
            ),
        },
    ));
    CriterionReport {
        id: 2,
        name: "open-loop contrast".into(),
        passed: cells.iter().all(|c| c.passed),
        cells,
    }
}

fn criterion_3(cells: &[HoverCell]) -> CriterionReport {
    let outcomes: Vec<CellOutcome> = REFERENCE_AMPLITUDES
        .iter()
        .map(|&(name, reference)| {
            // Prefer the settled altitude run, fall back to lift balance.
            let candidate = [Objective::AltitudeSquared, Objective::LiftBalance]
                .into_iter()
                .flat_map(|obj| {
                    cells.iter().find(|c| {
                        c.species == name
                            && c.objective == obj
                            && c.w0 > 0.0
                            && c.run.metrics.settled
                    })
                })
                .next();
            match candidate.and_then(|c| c.run.metrics.phi_amplitude.map(|a| (c, a))) {
                Some((c, amp)) => {
                    let err = (amp - reference) / reference;
                    cell(
                        format!("{name} amplitude"),
                        err.abs() <= AMPLITUDE_TOL,
                        format!(
                            "measured {:.4} rad ({} run), reference {:.2} rad, error {:+.2}%",
                            amp,
                            c.objective,
                            reference,
                            100.0 * err
                        ),
                    )
                }
                None => cell(
                    format!("{name} amplitude"),
                    false,
                    "no settled closed-loop run to measure".into(),
                ),
            }
        })
        .collect();
    CriterionReport {
        id: 3,
        name: "flapping amplitudes".into(),
        passed: outcomes.iter().all(|c| c.passed),
        cells: outcomes,
    }
}

fn criterion_4(species: &[Species]) -> CriterionReport {
    let mut outcomes = Vec::new();
    for (name, ref_alt, ref_lb) in REFERENCE_EIGENVALUES {
        let sp = species.iter().find(|s| s.name == name).expect("bundled species");
        for (objective, reference) in [
            (Objective::AltitudeSquared, ref_alt),
            (Objective::LiftBalance, ref_lb),
        ] {
            let cfg = EscConfig::for_species(sp, objective);
            let label = format!("{name}/{objective} eigenvalues");
            match analyze(sp, &cfg, &AnalysisOptions::default()) {
                Ok(report) => {
                    let mut got: Vec<f64> = report.eigenvalues.iter().map(|e| e.norm()).collect();
                    got.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    let mut want: Vec<f64> = reference.iter().map(|v| v.abs()).collect();
                    want.sort_by(|x, y| x.partial_cmp(y).unwrap());
                    let ratios: Vec<f64> = got
                        .iter()
                        .zip(&want)
                        .map(|(g, w)| g / w)
                        .collect();
                    let ratio_ok = ratios
                        .iter()
                        .all(|r| *r >= EIGEN_RATIO_WINDOW.0 && *r <= EIGEN_RATIO_WINDOW.1);
                    let eigs: Vec<String> = report
                        .eigenvalues
                        .iter()
                        .map(|e| format!("{:+.4e}{:+.2e}i", e.re, e.im))
                        .collect();
                    outcomes.push(cell(
                        label,
                        report.verdict && ratio_ok,
                        format!(
                            "verdict = {}, eigenvalues = [{}], magnitude ratios vs reference = \
                             [{:.3}, {:.3}, {:.3}]",
                            if report.verdict { "stable" } else { "unstable" },
                            eigs.join(", "),
                            ratios[0],
                            ratios[1],
                            ratios[2]
                        ),
                    ));
                }
                Err(e) => outcomes.push(cell(label, false, format!("analysis failed: {e}"))),
            }
        }
    }
    CriterionReport {
        id: 4,
        name: "averaged-system stability".into(),
        passed: outcomes.iter().all(|c| c.passed),
        cells: outcomes,
    }
}

fn criterion_5(species: &[Species]) -> CriterionReport {
    let hawkmoth = species.iter().find(|s| s.name == "hawkmoth").expect("bundled hawkmoth");
    let cfg = EscConfig::for_species(hawkmoth, Objective::AltitudeSquared);
    let window_s = 0.1;
    let periods = (window_s / cfg.period()).ceil() as u32 + 1;
    let opts_exact = SimOptions {
        duration_periods: periods,
        ..Default::default()
    };
    let opts_smooth = SimOptions {
        smoothed: true,
        ..opts_exact
    };
    let exact = run_hover(hawkmoth, &cfg, 0.0, &opts_exact);
    let smooth = run_hover(hawkmoth, &cfg, 0.0, &opts_smooth);
    let n = ((window_s / exact.trajectory.dt).floor() as usize + 1)
        .min(exact.trajectory.states.len())
        .min(smooth.trajectory.states.len());
    let rms = |select: fn(&crate::esc::EsState) -> f64| -> f64 {
        let mut diff = 0.0;
        let mut norm = 0.0;
        for i in 0..n {
            let a = select(&exact.trajectory.states[i]);
            let b = select(&smooth.trajectory.states[i]);
            diff += (a - b) * (a - b);
            norm += a * a;
        }
        (diff / norm.max(f64::MIN_POSITIVE)).sqrt()
    };
    let rms_w = rms(|x| x.plant.w);
    let rms_q = rms(|x| x.plant.phidot);
    let passed = rms_w < 0.05 && rms_q < 0.05;
    CriterionReport {
        id: 5,
        name: "smoothing fidelity".into(),
        passed,
        cells: vec![cell(
            "hawkmoth/altitude exact vs smoothed (n = 50)",
            passed,
            format!(
                "relative RMS over {window_s} s: w = {:.4}%, phidot = {:.4}%",
                100.0 * rms_w,
                100.0 * rms_q
            ),
        )],
    }
}

fn criterion_6(species: &[Species]) -> (CriterionReport, Vec<CoefficientRow>) {
    let mut outcomes = Vec::new();
    let mut table = Vec::new();
    for sp in species {
        let m = &sp.morphology;
        let name = &sp.name;

        // Chord normalization: I_01 = 2 S.
        let i01 = m.chord_moment(0, 1);
        let norm_err = i01
            .as_ref()
            .map(|v| (v / (2.0 * m.wing_area) - 1.0).abs())
            .unwrap_or(f64::INFINITY);
        outcomes.push(cell(
            format!("{name} chord normalization"),
            norm_err <= 1e-6,
            format!("relative error {norm_err:.2e}"),
        ));

        // Moment recovery: r1_hat and r2_hat from the profile integrals.
        let r1 = m
            .chord_moment(1, 1)
            .map(|v| v / (2.0 * m.wing_area * m.wing_radius))
            .unwrap_or(f64::NAN);
        let r2 = m
            .chord_moment(2, 1)
            .map(|v| (v / (2.0 * m.wing_area * m.wing_radius.powi(2))).sqrt())
            .unwrap_or(f64::NAN);
        let rec_err = ((r1 / m.r1_hat - 1.0).abs()).max((r2 / m.r2_hat - 1.0).abs());
        outcomes.push(cell(
            format!("{name} moment recovery"),
            rec_err <= 1e-6,
            format!("r1 -> {r1:.8}, r2 -> {r2:.8}, worst relative error {rec_err:.2e}"),
        ));

        // Identity on derived and reference coefficient sets.
        match sp.derive_coefficients() {
            Ok(derived) => {
                let derived_resid = derived.coupling_identity_residual();
                let ref_resid = sp.coefficients.coupling_identity_residual();
                outcomes.push(cell(
                    format!("{name} coupling identity"),
                    derived_resid.abs() <= 1e-12 && ref_resid.abs() <= 0.15,
                    format!(
                        "derived residual {derived_resid:.2e}, reference residual {:+.4}%",
                        100.0 * ref_resid
                    ),
                ));
                let r = sp.coefficients;
                table.push(CoefficientRow {
                    species: name.clone(),
                    derived_deviation_pct: [
                        100.0 * (derived.k_d1 / r.k_d1 - 1.0),
                        100.0 * (derived.k_l / r.k_l - 1.0),
                        100.0 * (derived.k_d2 / r.k_d2 - 1.0),
                        100.0 * (derived.k_d3 / r.k_d3 - 1.0),
                        100.0 * (derived.i_f / r.i_f - 1.0),
                    ],
                    reference_identity_residual: ref_resid,
                    derived_identity_residual: derived_resid,
                });
            }
            Err(e) => outcomes.push(cell(
                format!("{name} coupling identity"),
                false,
                format!("derivation failed: {e}"),
            )),
        }
    }
    let report = CriterionReport {
        id: 6,
        name: "species-module identities".into(),
        passed: outcomes.iter().all(|c| c.passed),
        cells: outcomes,
    };
    (report, table)
}

fn criterion_7() -> CriterionReport {
    let mut cells_out = Vec::new();

    // RK4 order on the scalar drag test w' = g - c w^2.
    let rhs = |_: f64, x: &crate::esc::EsState| crate::esc::EsState {
        plant: crate::dynamics::PlantState {
            w: 9.81 - 0.7 * x.plant.w * x.plant.w,
            ..Default::default()
        },
        tau_hat: 0.0,
    };
    let t_end = 0.5;
    let solve = |dt: f64| {
        crate::sim::integrate(rhs, crate::esc::EsState::default(), 0.0, t_end, dt)
            .unwrap()
            .states
            .last()
            .unwrap()
            .plant
            .w
    };
    let reference = solve(t_end / 512.0 / 64.0);
    let err_h = (solve(t_end / 256.0) - reference).abs();
    let err_h2 = (solve(t_end / 512.0) - reference).abs();
    let ratio = err_h / err_h2;
    cells_out.push(cell(
        "RK4 order-4 convergence",
        (12.0..20.0).contains(&ratio),
        format!("error ratio on dt halving = {ratio:.2} (expect ~16)"),
    ));

    // Lie bracket vs matrix commutator on seeded random linear fields.
    let mut rng = Xorshift::new(0xDEADBEEFCAFE1234);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let a: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.next_signed()));
        let b: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.next_signed()));
        let f = move |x: &[f64; 3]| mat_vec(&a, x);
        let g = move |x: &[f64; 3]| mat_vec(&b, x);
        let x: [f64; 3] = std::array::from_fn(|_| 2.0 * rng.next_signed());
        let steps = crate::stability::default_fd_steps(&x);
        let got = crate::stability::lie_bracket(&f, &g, &x, &steps);
        let comm = commutator(&b, &a);
        let want = mat_vec(&comm, &x);
        for i in 0..3 {
            worst = worst.max((got[i] - want[i]).abs() / want[i].abs().max(1.0));
        }
    }
    cells_out.push(cell(
        "Lie bracket commutator oracle",
        worst <= 1e-6,
        format!("worst relative deviation {worst:.2e} over 50 random linear fields"),
    ));

    // Cubic eigenvalues vs companion-matrix roots on 1000 random matrices.
    let mut rng = Xorshift::new(0x0123456789ABCDEF);
    let mut failures = 0usize;
    for _ in 0..1000 {
        let m: [[f64; 3]; 3] =
            std::array::from_fn(|_| std::array::from_fn(|_| 10.0 * rng.next_signed()));
        if crate::eigen::eigenvalues3(&m, 1e-9).is_err() {
            failures += 1;
        }
    }
    cells_out.push(cell(
        "cubic vs companion eigenvalues",
        failures == 0,
        format!("{failures} mismatches over 1000 random matrices at 1e-9"),
    ));

    CriterionReport {
        id: 7,
        name: "numerical oracles".into(),
        passed: cells_out.iter().all(|c| c.passed),
        cells: cells_out,
    }
}

fn criterion_8(species: &[Species]) -> CriterionReport {
    // Representative subset executed twice; byte-identical serialization
    // required. The CLI test additionally runs the full command twice.
    let digest = || -> String {
        let hb = species.iter().find(|s| s.name == "hummingbird").expect("bundled");
        let cfg = EscConfig::for_species(hb, Objective::AltitudeSquared);
        let opts = SimOptions {
            duration_periods: 100,
            ..Default::default()
        };
        let run = run_hover(hb, &cfg, 0.2, &opts);
        let cf = species.iter().find(|s| s.name == "cranefly").expect("bundled");
        let cfg2 = EscConfig::for_species(cf, Objective::LiftBalance);
        let report = analyze(cf, &cfg2, &AnalysisOptions::default()).ok();
        let value = json!({
            "tail": run.trajectory.states.last().map(|x| x.to_array()),
            "metrics": run.metrics,
            "stability": report.map(|r| (r.equilibrium, r.verdict)),
        });
        crate::output::sha256_hex(serde_json::to_string(&value).unwrap().as_bytes())
    };
    let a = digest();
    let b = digest();
    let passed = a == b;
    CriterionReport {
        id: 8,
        name: "determinism".into(),
        passed,
        cells: vec![cell(
            "repeated pipeline digest",
            passed,
            format!("digest A = {a}, digest B = {b}"),
        )],
    }
}

/// Runs every acceptance check and assembles the summary report.
pub fn evaluate(opts: &ReproduceOptions) -> SummaryReport {
    let species = bundled::all().expect("bundled species parse");
    let refs: Vec<&Species> = species.iter().collect();
    let metadata = Metadata::new(
        &refs,
        json!({
            "duration_periods": opts.duration_periods,
            "steps_per_period": crate::sim::DEFAULT_STEPS_PER_PERIOD,
            "tail_periods": crate::sim::TAIL_PERIODS,
            "w_settle_tol": crate::sim::W_SETTLE_TOL,
            "z_drift_tol": crate::sim::Z_DRIFT_TOL,
            "tauhat_law": "direct",
            "a_placement": "squared",
            "n_smooth": 50,
        }),
    );

    let hover_cells = hover_grid(&species, opts);
    let c1 = criterion_1(&hover_cells);
    let c2 = criterion_2(&species, opts);
    let c3 = criterion_3(&hover_cells);
    let c4 = criterion_4(&species);
    let c5 = criterion_5(&species);
    let (c6, coefficient_table) = criterion_6(&species);
    let c7 = criterion_7();
    let c8 = criterion_8(&species);

    let criteria = vec![c1, c2, c3, c4, c5, c6, c7, c8];
    let passed = criteria.iter().all(|c| c.passed);
    SummaryReport {
        metadata,
        coefficient_table,
        criteria,
        passed,
    }
}

/// Deterministic JSON rendering of the summary.
pub fn summary_json(report: &SummaryReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("serializable");
    text.push('\n');
    text
}

/// Human-readable table with one line per criterion cell.
pub fn summary_text(report: &SummaryReport) -> String {
    let mut out = String::new();
    out.push_str("hover-es verification summary\n");
    out.push_str("=============================\n\n");
    out.push_str("derived-coefficient consistency (percent deviation from reference):\n");
    out.push_str("  species       kd1       kl        kd2       kd3       i_f     identity\n");
    for row in &report.coefficient_table {
        let d = row.derived_deviation_pct;
        out.push_str(&format!(
            "  {:<12} {:+8.2}% {:+8.2}% {:+8.2}% {:+8.2}% {:+8.2}%  {:+6.2}%\n",
            row.species,
            d[0],
            d[1],
            d[2],
            d[3],
            d[4],
            100.0 * row.reference_identity_residual
        ));
    }
    out.push('\n');
    for criterion in &report.criteria {
        out.push_str(&format!(
            "criterion {}: {} - {}\n",
            criterion.id,
            if criterion.passed { "PASS" } else { "FAIL" },
            criterion.name
        ));
        for cell in &criterion.cells {
            out.push_str(&format!(
                "  [{}] {}: {}\n",
                if cell.passed { "ok" } else { "FAIL" },
                cell.label,
                cell.detail
            ));
        }
    }
    out.push_str(&format!(
        "\noverall: {}\n",
        if report.passed { "PASS" } else { "FAIL" }
    ));
    out
}

struct Xorshift(u64);

impl Xorshift {
    fn new(seed: u64) -> Self {
        Xorshift(seed.max(1))
    }

    fn next_signed(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545f4914f6cdd1d) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

fn mat_vec(m: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2])
}

fn commutator(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j] - b[i][k] * a[k][j];
            }
        }
    }
    out
}

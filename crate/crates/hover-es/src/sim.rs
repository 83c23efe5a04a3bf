//! Fixed-step time integration, hover experiments, and hover metrics.
//!
//! Integration is classical fourth-order Runge-Kutta on a uniform grid, so
//! identical inputs produce bit-identical trajectories on one platform.

use crate::esc::{closed_loop_rhs, lift_value, objective_value, EsState, EscConfig, Objective};
use crate::species::{ModelCoefficients, Species};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Default integration resolution: steps per flapping period.
pub const DEFAULT_STEPS_PER_PERIOD: u32 = 200;
/// Default run length in flapping periods.
pub const DEFAULT_DURATION_PERIODS: u32 = 200;
/// Metrics window: trailing flapping periods.
pub const TAIL_PERIODS: u32 = 20;
/// Settling threshold on the trailing-window mean vertical velocity, m/s.
pub const W_SETTLE_TOL: f64 = 0.01;
/// Settling threshold on the trailing-window altitude drift rate, m/s.
pub const Z_DRIFT_TOL: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("integration diverged at t = {t:.6} s (last finite state: {state:?})")]
    Diverged { t: f64, state: EsState },
    #[error("insufficient data: {cycles} full flapping cycles in window, need at least 5")]
    InsufficientCycles { cycles: usize },
    #[error("invalid step: {message}")]
    InvalidStep { message: String },
}

/// A uniformly sampled closed-loop trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<EsState>,
}

impl Trajectory {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn last_time(&self) -> f64 {
        self.time(self.states.len().saturating_sub(1))
    }

    /// Objective and lift-ratio channels at sample `i`.
    pub fn channels(&self, i: usize, cfg: &EscConfig, coeffs: &ModelCoefficients) -> (f64, f64) {
        let x = &self.states[i];
        let j = objective_value(x, cfg, coeffs);
        let ratio = lift_value(x, cfg, coeffs) / (coeffs.mass * coeffs.gravity);
        (j, ratio)
    }
}

/// Integrates `rhs` from `x0` over [t0, t_end] with fixed step `dt` (RK4).
///
/// Stops with [`SimError::Diverged`] if any state component leaves the
/// finite range; the partial trajectory up to the last finite state is
/// carried inside the error's metadata by the run wrappers.
pub fn integrate<F>(mut rhs: F, x0: EsState, t0: f64, t_end: f64, dt: f64) -> Result<Trajectory, SimError>
where
    F: FnMut(f64, &EsState) -> EsState,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidStep {
            message: format!("dt must be positive and finite, got {dt}"),
        });
    }
    let steps = ((t_end - t0) / dt).round() as usize;
    if steps < 2 {
        return Err(SimError::InvalidStep {
            message: format!("time span {t0}..{t_end} too short for dt = {dt}"),
        });
    }
    let mut traj = Trajectory {
        t0,
        dt,
        states: Vec::with_capacity(steps + 1),
    };
    traj.states.push(x0);
    let mut x = x0.to_array();
    for i in 0..steps {
        let t = t0 + i as f64 * dt;
        x = rk4_step(&mut rhs, t, &x, dt);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SimError::Diverged {
                t: t + dt,
                state: *traj.states.last().expect("at least x0"),
            });
        }
        traj.states.push(EsState::from_array(&x));
    }
    Ok(traj)
}

fn rk4_step<F>(rhs: &mut F, t: f64, x: &[f64; 5], dt: f64) -> [f64; 5]
where
    F: FnMut(f64, &EsState) -> EsState,
{
    // Stage states are checked before each field evaluation: the field
    // contract requires finite inputs, and a blowing-up trajectory must
    // surface as a divergence, not a panic inside the field.
    let mut eval = |t: f64, x: &[f64; 5]| -> Option<[f64; 5]> {
        x.iter()
            .all(|v| v.is_finite())
            .then(|| rhs(t, &EsState::from_array(x)).to_array())
    };
    let stages = (|| {
        let k1 = eval(t, x)?;
        let k2 = eval(t + dt / 2.0, &add_scaled(x, &k1, dt / 2.0))?;
        let k3 = eval(t + dt / 2.0, &add_scaled(x, &k2, dt / 2.0))?;
        let k4 = eval(t + dt, &add_scaled(x, &k3, dt))?;
        Some((k1, k2, k3, k4))
    })();
    match stages {
        Some((k1, k2, k3, k4)) => {
            let mut out = *x;
            for i in 0..5 {
                out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            out
        }
        None => [f64::NAN; 5],
    }
}

fn add_scaled(x: &[f64; 5], k: &[f64; 5], s: f64) -> [f64; 5] {
    let mut out = *x;
    for i in 0..5 {
        out[i] += s * k[i];
    }
    out
}

/// Hover-condition metrics over the trailing window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HoverMetrics {
    /// Mean vertical velocity over the trailing window, m/s.
    pub mean_w_tail: f64,
    /// Linear-fit slope of altitude over the trailing window, m/s.
    pub z_drift_rate: f64,
    /// Mean lift-to-weight ratio over the trailing window.
    pub mean_lift_ratio: f64,
    /// Flapping-angle amplitude from extrema of phi, rad (absent when fewer
    /// than five full cycles were available).
    pub phi_amplitude: Option<f64>,
    /// True when both velocity and drift fall inside the settling bands.
    pub settled: bool,
}

/// One hover experiment: trajectory plus metrics, with the divergence time
/// when the integration blew up before the requested duration.
#[derive(Debug, Clone)]
pub struct HoverRun {
    pub trajectory: Trajectory,
    pub metrics: HoverMetrics,
    pub diverged_at: Option<f64>,
}

/// Protocol knobs for a hover run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimOptions {
    pub duration_periods: u32,
    pub steps_per_period: u32,
    /// Integrate the smoothed plant instead of the exact one.
    pub smoothed: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            duration_periods: DEFAULT_DURATION_PERIODS,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            smoothed: false,
        }
    }
}

impl SimOptions {
    /// Step size for a loop running at angular frequency `omega`.
    pub fn dt(&self, omega: f64) -> f64 {
        2.0 * std::f64::consts::PI / omega / f64::from(self.steps_per_period)
    }
}

/// Runs the closed-loop hover experiment from the standard initial state
/// `(z, phi, w, phidot, tauhat) = (0, 0, w0, 0, 0)`.
pub fn run_hover(species: &Species, cfg: &EscConfig, w0: f64, opts: &SimOptions) -> HoverRun {
    let coeffs = species.coefficients;
    let dt = opts.dt(cfg.omega);
    let t_end = f64::from(opts.duration_periods) * cfg.period();
    let x0 = EsState {
        plant: crate::dynamics::PlantState {
            w: w0,
            ..Default::default()
        },
        ..Default::default()
    };
    let smoothed = opts.smoothed;
    let result = integrate(
        |t, x| closed_loop_rhs(t, x, cfg, &coeffs, smoothed),
        x0,
        0.0,
        t_end,
        dt,
    );
    finish_run(result, cfg, &coeffs, opts)
}

/// Same experiment with the integrator gain forced to zero (pure modulation).
pub fn run_open_loop(species: &Species, cfg: &EscConfig, w0: f64, opts: &SimOptions) -> HoverRun {
    let mut open = *cfg;
    open.gain = 0.0;
    run_hover(species, &open, w0, opts)
}

fn finish_run(
    result: Result<Trajectory, SimError>,
    cfg: &EscConfig,
    coeffs: &ModelCoefficients,
    opts: &SimOptions,
) -> HoverRun {
    match result {
        Ok(traj) => {
            let metrics = compute_metrics(&traj, cfg, coeffs, opts, false);
            HoverRun {
                trajectory: traj,
                metrics,
                diverged_at: None,
            }
        }
        Err(SimError::Diverged { t, state }) => {
            // Keep whatever finite prefix exists; metrics are forced
            // unsettled.
            let traj = Trajectory {
                t0: 0.0,
                dt: opts.dt(cfg.omega),
                states: vec![EsState::default(), state],
            };
            let metrics = compute_metrics(&traj, cfg, coeffs, opts, true);
            HoverRun {
                trajectory: traj,
                metrics,
                diverged_at: Some(t),
            }
        }
        Err(e) => panic!("hover run setup error: {e}"),
    }
}

fn compute_metrics(
    traj: &Trajectory,
    cfg: &EscConfig,
    coeffs: &ModelCoefficients,
    opts: &SimOptions,
    diverged: bool,
) -> HoverMetrics {
    let window = (TAIL_PERIODS * opts.steps_per_period) as usize;
    let n = traj.states.len();
    let start = n.saturating_sub(window.min(n - 1).max(1));
    let tail = &traj.states[start..];
    let count = tail.len() as f64;

    let mean_w = tail.iter().map(|x| x.plant.w).sum::<f64>() / count;
    let mean_lift = tail
        .iter()
        .map(|x| lift_value(x, cfg, coeffs) / (coeffs.mass * coeffs.gravity))
        .sum::<f64>()
        / count;

    // Least-squares slope of z against time over the window.
    let mean_t = (count - 1.0) / 2.0 * traj.dt;
    let mean_z = tail.iter().map(|x| x.plant.z).sum::<f64>() / count;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (i, x) in tail.iter().enumerate() {
        let dt_i = i as f64 * traj.dt - mean_t;
        cov += dt_i * (x.plant.z - mean_z);
        var += dt_i * dt_i;
    }
    let drift = if var > 0.0 { cov / var } else { f64::NAN };

    let phi_amplitude = measure_phi_amplitude_window(traj, start).ok();
    let settled = !diverged && mean_w.abs() < W_SETTLE_TOL && drift.abs() < Z_DRIFT_TOL;
    HoverMetrics {
        mean_w_tail: mean_w,
        z_drift_rate: drift,
        mean_lift_ratio: mean_lift,
        phi_amplitude,
        settled,
    }
}

/// Flapping-angle amplitude over the trailing window of a settled run:
/// successive extrema of phi, refined by parabolic interpolation, averaged
/// as half the peak-to-trough swing.
pub fn measure_phi_amplitude(traj: &Trajectory, opts: &SimOptions) -> Result<f64, SimError> {
    let window = (TAIL_PERIODS * opts.steps_per_period) as usize;
    let start = traj.states.len().saturating_sub(window.min(traj.states.len() - 1).max(1));
    measure_phi_amplitude_window(traj, start)
}

fn measure_phi_amplitude_window(traj: &Trajectory, start: usize) -> Result<f64, SimError> {
    let phi: Vec<f64> = traj.states[start..].iter().map(|x| x.plant.phi).collect();
    let mut extrema = Vec::new();
    for i in 1..phi.len().saturating_sub(1) {
        let left = phi[i] - phi[i - 1];
        let right = phi[i + 1] - phi[i];
        if left * right < 0.0 {
            // Parabola through the three samples; vertex refines the
            // extremum value beyond grid resolution.
            let denom = phi[i - 1] - 2.0 * phi[i] + phi[i + 1];
            let value = if denom != 0.0 {
                phi[i] - (phi[i - 1] - phi[i + 1]).powi(2) / (8.0 * denom)
            } else {
                phi[i]
            };
            extrema.push(value);
        }
    }
    let cycles = extrema.len().saturating_sub(1) / 2;
    if cycles < 5 {
        return Err(SimError::InsufficientCycles { cycles });
    }
    let swings: Vec<f64> = extrema.windows(2).map(|p| (p[0] - p[1]).abs() / 2.0).collect();
    Ok(swings.iter().sum::<f64>() / swings.len() as f64)
}

// ---------------------------------------------------------------------------
// Sweep harness
// ---------------------------------------------------------------------------

/// One sweep cell result; failures are recorded, never panicked.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub species: String,
    pub objective: Objective,
    pub w0: f64,
    pub metrics: Option<HoverMetrics>,
    pub diverged_at: Option<f64>,
    pub error: Option<String>,
}

/// Runs every (species, objective, w0) cell independently. Results are keyed
/// and ordered by grid coordinates regardless of execution order; `jobs > 1`
/// runs cells concurrently.
pub fn sweep(
    species: &[Species],
    objectives: &[Objective],
    w0s: &[f64],
    opts: &SimOptions,
    configure: impl Fn(&Species, Objective) -> EscConfig + Sync,
    jobs: usize,
) -> Vec<SweepCell> {
    let grid: Vec<(usize, usize, usize)> = (0..species.len())
        .flat_map(|s| {
            (0..objectives.len()).flat_map(move |o| (0..w0s.len()).map(move |w| (s, o, w)))
        })
        .collect();

    let run_cell = |&(si, oi, wi): &(usize, usize, usize)| -> SweepCell {
        let sp = &species[si];
        let objective = objectives[oi];
        let w0 = w0s[wi];
        let cfg = configure(sp, objective);
        let run = run_hover(sp, &cfg, w0, opts);
        SweepCell {
            species: sp.name.clone(),
            objective,
            w0,
            metrics: Some(run.metrics),
            diverged_at: run.diverged_at,
            error: run
                .diverged_at
                .map(|t| format!("integration diverged at t = {t:.6} s")),
        }
    };

    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| grid.par_iter().map(run_cell).collect())
    } else {
        grid.iter().map(run_cell).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esc::{EscConfig, Objective};
    use crate::species::bundled;
    use approx::assert_relative_eq;

    #[test]
    fn free_fall_matches_closed_form() {
        let sp = bundled::load("hawkmoth").unwrap();
        let coeffs = sp.coefficients;
        let mut cfg = EscConfig::for_species(&sp, Objective::AltitudeSquared);
        cfg.amplitude = 0.0;
        cfg.gain = 0.0;
        let traj = integrate(
            |t, x| closed_loop_rhs(t, x, &cfg, &coeffs, false),
            EsState::default(),
            0.0,
            0.01,
            1e-5,
        )
        .unwrap();
        let last = traj.states.last().unwrap();
        assert_relative_eq!(last.plant.w, 9.81 * 0.01, max_relative = 1e-8);
    }

    #[test]
    fn harmonic_energy_drift_is_small() {
        // x'' = -omega^2 x embedded in the (z, w) slots.
        let omega = 5.0;
        let period = 2.0 * std::f64::consts::PI / omega;
        let dt = period / 200.0;
        let x0 = EsState {
            plant: crate::dynamics::PlantState {
                z: 1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let traj = integrate(
            |_, x| EsState {
                plant: crate::dynamics::PlantState {
                    z: x.plant.w,
                    phi: 0.0,
                    w: -omega * omega * x.plant.z,
                    phidot: 0.0,
                },
                tau_hat: 0.0,
            },
            x0,
            0.0,
            1e4 * dt,
            dt,
        )
        .unwrap();
        let energy = |x: &EsState| 0.5 * x.plant.w.powi(2) + 0.5 * omega * omega * x.plant.z.powi(2);
        let e0 = energy(&traj.states[0]);
        let e1 = energy(traj.states.last().unwrap());
        assert!(((e1 - e0) / e0).abs() < 1e-6, "drift {}", (e1 - e0) / e0);
    }

    #[test]
    fn rk4_fourth_order_on_drag_test() {
        // w' = g - c w^2, solved at several dt; halving dt cuts the global
        // error by about 16.
        let g = 9.81;
        let c = 0.7;
        let rhs = |_: f64, x: &EsState| EsState {
            plant: crate::dynamics::PlantState {
                w: g - c * x.plant.w * x.plant.w,
                ..Default::default()
            },
            tau_hat: 0.0,
        };
        let t_end = 0.5;
        let solve = |dt: f64| {
            integrate(rhs, EsState::default(), 0.0, t_end, dt)
                .unwrap()
                .states
                .last()
                .unwrap()
                .plant
                .w
        };
        let reference = solve(t_end / 65536.0);
        let err_h = (solve(t_end / 256.0) - reference).abs();
        let err_h2 = (solve(t_end / 512.0) - reference).abs();
        let ratio = err_h / err_h2;
        assert!(
            (12.0..20.0).contains(&ratio),
            "expected ~16x error reduction, got {ratio}"
        );
    }

    #[test]
    fn synthetic_amplitude_recovery() {
        let omega = 2.0 * std::f64::consts::PI * 26.3;
        let opts = SimOptions::default();
        let dt = opts.dt(omega);
        let n = (DEFAULT_DURATION_PERIODS * DEFAULT_STEPS_PER_PERIOD) as usize;
        let states: Vec<EsState> = (0..=n)
            .map(|i| EsState {
                plant: crate::dynamics::PlantState {
                    phi: 1.07 * (omega * i as f64 * dt).sin(),
                    ..Default::default()
                },
                ..Default::default()
            })
            .collect();
        let traj = Trajectory {
            t0: 0.0,
            dt,
            states,
        };
        let amp = measure_phi_amplitude(&traj, &opts).unwrap();
        assert_relative_eq!(amp, 1.07, epsilon = 1e-6);
    }

    #[test]
    fn amplitude_needs_five_cycles() {
        let omega = 100.0;
        let dt = 2.0 * std::f64::consts::PI / omega / 200.0;
        let states: Vec<EsState> = (0..=600)
            .map(|i| EsState {
                plant: crate::dynamics::PlantState {
                    phi: (omega * i as f64 * dt).sin(),
                    ..Default::default()
                },
                ..Default::default()
            })
            .collect();
        let traj = Trajectory {
            t0: 0.0,
            dt,
            states,
        };
        let opts = SimOptions {
            duration_periods: 3,
            ..Default::default()
        };
        assert!(matches!(
            measure_phi_amplitude(&traj, &opts),
            Err(SimError::InsufficientCycles { .. })
        ));
    }

    #[test]
    fn hummingbird_hover_settles() {
        let sp = bundled::load("hummingbird").unwrap();
        let cfg = EscConfig::for_species(&sp, Objective::AltitudeSquared);
        let run = run_hover(&sp, &cfg, 0.2, &SimOptions::default());
        assert!(run.diverged_at.is_none());
        assert!(run.metrics.settled, "metrics: {:?}", run.metrics);
        assert!(run.metrics.mean_lift_ratio > 0.95 && run.metrics.mean_lift_ratio < 1.05);
    }

    #[test]
    fn hawkmoth_open_loop_ascends_steadily() {
        // With the bundled hawkmoth gains the pure-modulation lift exceeds
        // weight, so the open loop settles about a constant ascent rate.
        let sp = bundled::load("hawkmoth").unwrap();
        let cfg = EscConfig::for_species(&sp, Objective::AltitudeSquared);
        let run = run_open_loop(&sp, &cfg, -1.0, &SimOptions::default());
        assert!(run.diverged_at.is_none());
        assert!(run.metrics.mean_w_tail < -0.05);
        assert!(run.metrics.z_drift_rate < -0.05);
        assert!(!run.metrics.settled);
    }

    #[test]
    fn hawkmoth_closed_loop_winds_up() {
        // Documented: the bundled hawkmoth gain pair over-lifts the plant at
        // every constant torque offset, so the feedback integrator winds up
        // and the run diverges instead of settling.
        let sp = bundled::load("hawkmoth").unwrap();
        let cfg = EscConfig::for_species(&sp, Objective::AltitudeSquared);
        let run = run_hover(&sp, &cfg, 0.2, &SimOptions::default());
        assert!(run.diverged_at.is_some());
        assert!(!run.metrics.settled);
    }

    #[test]
    fn tauhat_integrator_converges_when_settled() {
        // Over the trailing window the mean-torque estimate is finite and
        // purely periodic: period-aligned half-window means agree far
        // below the ripple scale. (The settled mean itself is ~0, so drift
        // is measured against the ripple amplitude.)
        for (name, objective) in [
            ("hummingbird", Objective::AltitudeSquared),
            ("dragonfly", Objective::LiftBalance),
        ] {
            let sp = bundled::load(name).unwrap();
            let cfg = EscConfig::for_species(&sp, objective);
            let opts = SimOptions {
                duration_periods: 600,
                ..Default::default()
            };
            let run = run_hover(&sp, &cfg, 0.2, &opts);
            assert!(run.metrics.settled);
            let window = (TAIL_PERIODS * opts.steps_per_period) as usize;
            let tail: Vec<f64> = run.trajectory.states[run.trajectory.states.len() - window..]
                .iter()
                .map(|x| x.tau_hat)
                .collect();
            assert!(tail.iter().all(|v| v.is_finite()));
            let half = window / 2;
            let m1 = tail[..half].iter().sum::<f64>() / half as f64;
            let m2 = tail[half..].iter().sum::<f64>() / (window - half) as f64;
            let ripple = tail.iter().cloned().fold(f64::MIN, f64::max)
                - tail.iter().cloned().fold(f64::MAX, f64::min);
            let scale = (ripple / 2.0).max(m1.abs());
            assert!(
                (m2 - m1).abs() <= 0.01 * scale,
                "{name}/{objective}: tau_hat still drifting ({m1} -> {m2}, ripple {ripple})"
            );
        }
    }

    #[test]
    fn open_loop_ignores_gain_value() {
        let sp = bundled::load("dragonfly").unwrap();
        let mut cfg = EscConfig::for_species(&sp, Objective::AltitudeSquared);
        let opts = SimOptions {
            duration_periods: 60,
            ..Default::default()
        };
        let a = run_open_loop(&sp, &cfg, -0.1, &opts);
        cfg.gain *= 17.0;
        let b = run_open_loop(&sp, &cfg, -0.1, &opts);
        assert_eq!(a.metrics.mean_w_tail, b.metrics.mean_w_tail);
    }

    #[test]
    fn determinism_bitwise() {
        let sp = bundled::load("bumblebee").unwrap();
        let cfg = EscConfig::for_species(&sp, Objective::LiftBalance);
        let opts = SimOptions {
            duration_periods: 40,
            ..Default::default()
        };
        let a = run_hover(&sp, &cfg, 0.2, &opts);
        let b = run_hover(&sp, &cfg, 0.2, &opts);
        assert_eq!(a.trajectory.states.len(), b.trajectory.states.len());
        for (x, y) in a.trajectory.states.iter().zip(&b.trajectory.states) {
            assert_eq!(x.to_array(), y.to_array());
        }
    }

    #[test]
    fn sweep_is_deterministically_ordered() {
        let species = vec![
            bundled::load("dragonfly").unwrap(),
            bundled::load("hoverfly").unwrap(),
        ];
        let opts = SimOptions {
            duration_periods: 30,
            ..Default::default()
        };
        let cells_seq = sweep(
            &species,
            &Objective::ALL,
            &[0.2],
            &opts,
            EscConfig::for_species,
            1,
        );
        let cells_par = sweep(
            &species,
            &Objective::ALL,
            &[0.2],
            &opts,
            EscConfig::for_species,
            4,
        );
        assert_eq!(cells_seq.len(), 4);
        for (a, b) in cells_seq.iter().zip(&cells_par) {
            assert_eq!(a.species, b.species);
            assert_eq!(a.objective, b.objective);
            assert_eq!(
                a.metrics.as_ref().unwrap().mean_w_tail,
                b.metrics.as_ref().unwrap().mean_w_tail
            );
        }
    }
}

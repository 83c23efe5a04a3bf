//! The extremum-seeking layer around the flapping plant.
//!
//! The loop superimposes the high-amplitude modulation torque
//! `a*Omega*cos(Omega t)` on the mean-torque estimate `tauhat`, measures the
//! hover objective, demodulates it with the same signal, and integrates the
//! product into `tauhat`. No filters sit anywhere in the loop.

use crate::dynamics::{plant_rhs, plant_rhs_smooth, PlantState, SmoothingOrder};
use crate::species::{ModelCoefficients, Species};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Hover objective measured by the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// J = z^2: squared altitude deviation from the hover datum.
    AltitudeSquared,
    /// J = (L/(m g) - 1)^2: squared lift-to-weight imbalance.
    LiftBalance,
}

impl Objective {
    pub const ALL: [Objective; 2] = [Objective::AltitudeSquared, Objective::LiftBalance];

    pub fn key(&self) -> &'static str {
        match self {
            Objective::AltitudeSquared => "altitude",
            Objective::LiftBalance => "lift_balance",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "altitude" | "z2" => Ok(Objective::AltitudeSquared),
            "lift_balance" | "lift-balance" => Ok(Objective::LiftBalance),
            other => Err(format!("unknown objective '{other}' (expected altitude | lift_balance)")),
        }
    }
}

/// Lift model used inside the lift-balance objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftModel {
    /// L = m k_l phidot^2 (wing flapping alone).
    WingOnly,
    /// L = m (k_d1 |phidot| w + k_l phidot^2), mass-scaled so both models
    /// yield forces.
    BodyPlusWing,
}

impl FromStr for LiftModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wing" | "wing_only" => Ok(LiftModel::WingOnly),
            "body_wing" | "body_plus_wing" => Ok(LiftModel::BodyPlusWing),
            other => Err(format!("unknown lift model '{other}' (expected wing | body_wing)")),
        }
    }
}

/// Which integrator law drives the mean-torque estimate.
///
/// `Scaled` divides the demodulated update by the flapping inertia
/// (`dtauhat/dt = K J (a/I_F) Omega cos`), `Direct` does not
/// (`dtauhat/dt = K J a Omega cos`). The bundled gain tables are only
/// consistent with `Direct`; `Scaled` is exposed for sensitivity studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauHatLaw {
    /// dtauhat/dt = K J a Omega cos(Omega t)
    #[default]
    Direct,
    /// dtauhat/dt = K J (a / I_F) Omega cos(Omega t)
    Scaled,
}

impl FromStr for TauHatLaw {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(TauHatLaw::Direct),
            "scaled" => Ok(TauHatLaw::Scaled),
            other => Err(format!("unknown tauhat law '{other}' (expected direct | scaled)")),
        }
    }
}

impl TauHatLaw {
    pub fn key(&self) -> &'static str {
        match self {
            TauHatLaw::Direct => "direct",
            TauHatLaw::Scaled => "scaled",
        }
    }
}

/// Full extremum-seeking loop configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscConfig {
    /// Modulation amplitude `a`, N m s.
    pub amplitude: f64,
    /// Integrator gain `K`.
    pub gain: f64,
    /// Modulation angular frequency, rad/s.
    pub omega: f64,
    pub objective: Objective,
    pub lift_model: LiftModel,
    /// Smoothing order for smoothed evaluations.
    pub n_smooth: u32,
    pub tauhat_law: TauHatLaw,
}

impl EscConfig {
    /// Builds the default loop configuration for a species and objective:
    /// the bundled gain pair for that objective and `Omega = 2 pi f`.
    pub fn for_species(species: &Species, objective: Objective) -> EscConfig {
        let gains = match objective {
            Objective::AltitudeSquared => species.esc.altitude,
            Objective::LiftBalance => species.esc.lift_balance,
        };
        EscConfig {
            amplitude: gains.a,
            gain: gains.k,
            omega: species.omega(),
            objective,
            lift_model: LiftModel::WingOnly,
            n_smooth: SmoothingOrder::default().get(),
            tauhat_law: TauHatLaw::default(),
        }
    }

    pub fn smoothing(&self) -> SmoothingOrder {
        SmoothingOrder::new(self.n_smooth)
    }

    /// Flapping period of the modulation, s.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

/// Closed-loop state: the plant plus the mean-torque estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EsState {
    pub plant: PlantState,
    /// Mean torque estimate, N m.
    pub tau_hat: f64,
}

impl EsState {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.plant.z,
            self.plant.phi,
            self.plant.w,
            self.plant.phidot,
            self.tau_hat,
        ]
    }

    pub fn from_array(x: &[f64; 5]) -> EsState {
        EsState {
            plant: PlantState {
                z: x[0],
                phi: x[1],
                w: x[2],
                phidot: x[3],
            },
            tau_hat: x[4],
        }
    }
}

/// Lift force seen by the objective, N.
pub fn lift_value(x: &EsState, cfg: &EscConfig, coeffs: &ModelCoefficients) -> f64 {
    let q = x.plant.phidot;
    match cfg.lift_model {
        LiftModel::WingOnly => coeffs.mass * coeffs.k_l * q * q,
        LiftModel::BodyPlusWing => {
            coeffs.mass * (coeffs.k_d1 * q.abs() * x.plant.w + coeffs.k_l * q * q)
        }
    }
}

/// Objective value at the current state.
pub fn objective_value(x: &EsState, cfg: &EscConfig, coeffs: &ModelCoefficients) -> f64 {
    match cfg.objective {
        Objective::AltitudeSquared => x.plant.z * x.plant.z,
        Objective::LiftBalance => {
            let ratio = lift_value(x, cfg, coeffs) / (coeffs.mass * coeffs.gravity);
            (ratio - 1.0) * (ratio - 1.0)
        }
    }
}

/// Modulation torque `a Omega cos(Omega t)`, N m.
pub fn modulation(t: f64, cfg: &EscConfig) -> f64 {
    cfg.amplitude * cfg.omega * (cfg.omega * t).cos()
}

fn tauhat_rate(j: f64, carrier: f64, cfg: &EscConfig, coeffs: &ModelCoefficients) -> f64 {
    match cfg.tauhat_law {
        TauHatLaw::Direct => cfg.gain * j * cfg.amplitude * carrier,
        TauHatLaw::Scaled => cfg.gain * j * (cfg.amplitude / coeffs.i_f) * carrier,
    }
}

/// Time derivative of the closed-loop state at time `t`.
pub fn closed_loop_rhs(
    t: f64,
    x: &EsState,
    cfg: &EscConfig,
    coeffs: &ModelCoefficients,
    smoothed: bool,
) -> EsState {
    let tau = x.tau_hat + modulation(t, cfg);
    let plant = if smoothed {
        plant_rhs_smooth(&x.plant, tau, coeffs, cfg.smoothing())
    } else {
        plant_rhs(&x.plant, tau, coeffs)
    };
    let j = objective_value(x, cfg, coeffs);
    let carrier = cfg.omega * (cfg.omega * t).cos();
    EsState {
        plant,
        tau_hat: tauhat_rate(j, carrier, cfg, coeffs),
    }
}

/// Control-affine decomposition: drift `Z` and control direction `G` such
/// that `Z + G * modulation(t)` reproduces [`closed_loop_rhs`] for every t.
pub fn affine_decomposition(
    x: &EsState,
    cfg: &EscConfig,
    coeffs: &ModelCoefficients,
    smoothed: bool,
) -> ([f64; 5], [f64; 5]) {
    let plant_drift = if smoothed {
        plant_rhs_smooth(&x.plant, x.tau_hat, coeffs, cfg.smoothing())
    } else {
        plant_rhs(&x.plant, x.tau_hat, coeffs)
    };
    let drift = [
        plant_drift.z,
        plant_drift.phi,
        plant_drift.w,
        plant_drift.phidot,
        0.0,
    ];
    let j = objective_value(x, cfg, coeffs);
    let g5 = match cfg.tauhat_law {
        TauHatLaw::Direct => j * cfg.gain,
        TauHatLaw::Scaled => j * cfg.gain / coeffs.i_f,
    };
    let control = [0.0, 0.0, 0.0, 1.0 / coeffs.i_f, g5];
    (drift, control)
}

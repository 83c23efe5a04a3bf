//! Species morphology, plant-coefficient derivation, and the species file format.
//!
//! Files carry the field measurement units (mm, mg, Hz, degrees); everything
//! behind the loader is strict SI (m, kg, s, rad). The chord distribution is
//! the Beta-shaped profile pinned down by the first two nondimensional chord
//! moments, scaled so the single-wing area integral is exact.

use crate::quadrature::{beta_weighted, QuadratureError, MOMENT_REL_TOL};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_AIR_DENSITY: f64 = 1.225;
pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum SpeciesError {
    #[error("{path}: schema error: {message}")]
    Schema { path: String, message: String },
    #[error("{field}: invariant violated: {message}")]
    Invariant { field: String, message: String },
    #[error("chord_at: spanwise station {r} outside [0, {radius}]")]
    Domain { r: f64, radius: f64 },
    #[error("integration of {symbol} failed: {source}")]
    Integration {
        symbol: String,
        #[source]
        source: QuadratureError,
    },
    #[error("{path}: io error: {message}")]
    Io { path: String, message: String },
    #[error("unknown species '{name}'")]
    UnknownSpecies { name: String },
}

/// Raw measurable wing/body parameters of one species, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Morphology {
    /// Flapping frequency, Hz.
    pub flap_hz: f64,
    /// Reported flapping-angle amplitude, rad.
    pub flap_amplitude: f64,
    /// Single-wing area, m^2.
    pub wing_area: f64,
    /// Wing radius (span of one wing), m.
    pub wing_radius: f64,
    /// Reported mean chord, m (informational; the chord profile is scaled
    /// by area/radius so that the area integral is exact).
    pub mean_chord: f64,
    /// First moment of the chord distribution, dimensionless.
    pub r1_hat: f64,
    /// Second moment of the chord distribution, dimensionless.
    pub r2_hat: f64,
    /// Total body+wing mass, kg.
    pub mass: f64,
    /// Body pitch inertia, kg m^2 (unused by the 2-DOF plant).
    pub body_pitch_inertia: f64,
    /// Mean angle of attack, rad.
    pub mean_aoa: f64,
    /// Single-wing mass, kg.
    pub wing_mass: f64,
    /// Hinge-to-CG distance normalized by chord, dimensionless.
    pub d_hat: f64,
    /// 2-D airfoil lift-curve slope, per rad.
    pub airfoil_slope: f64,
    /// Air density, kg/m^3.
    pub air_density: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
}

/// Derived plant constants of the 2-DOF model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCoefficients {
    /// Vertical-damping coefficient (multiplies |phidot| w), s/rad.
    pub k_d1: f64,
    /// Lift coefficient (multiplies phidot^2), m/rad^2.
    pub k_l: f64,
    /// Flap-damping coefficient, per rad.
    pub k_d2: f64,
    /// Flap-body coupling coefficient (multiplies w phidot).
    pub k_d3: f64,
    /// Flapping moment of inertia, kg m^2.
    pub i_f: f64,
    /// Total mass, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
}

impl ModelCoefficients {
    /// Relative residual of the coupling identity `k_d3 = 2 m k_l / i_f`.
    ///
    /// Zero (to roundoff) for coefficients derived from morphology; reference
    /// coefficient sets may violate it by a few percent.
    pub fn coupling_identity_residual(&self) -> f64 {
        self.k_d3 * self.i_f / (2.0 * self.mass * self.k_l) - 1.0
    }

    /// Flapping rate that balances weight with wing lift alone: sqrt(g/k_l).
    pub fn balance_rate(&self) -> f64 {
        (self.gravity / self.k_l).sqrt()
    }
}

/// Extremum-seeking gain pair bound to one objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscGains {
    /// Modulation amplitude `a`, N m s.
    pub a: f64,
    /// Integrator gain `k` (negative for the bundled species).
    pub k: f64,
}

/// Per-objective gain table shipped with each species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscTable {
    pub altitude: EscGains,
    pub lift_balance: EscGains,
}

/// A fully loaded species: morphology, resolved coefficients, gain table.
#[derive(Debug, Clone)]
pub struct Species {
    pub name: String,
    pub morphology: Morphology,
    /// Resolved plant coefficients (file override when present, else derived).
    pub coefficients: ModelCoefficients,
    /// True when `coefficients` came from a file override.
    pub coefficients_overridden: bool,
    pub esc: EscTable,
}

impl Species {
    /// Re-derives coefficients from morphology (independent of any override).
    pub fn derive_coefficients(&self) -> Result<ModelCoefficients, SpeciesError> {
        self.morphology.derive_coefficients()
    }

    /// Modulation angular frequency: 2*pi*f of the species.
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.morphology.flap_hz
    }
}

/// Beta-kernel chord profile parameters computed from (r1_hat, r2_hat).
#[derive(Debug, Clone, Copy)]
pub struct ChordShape {
    pub kappa: f64,
    pub gamma: f64,
    /// Normalization integral of the kernel over [0, 1].
    pub beta: f64,
    /// Chord scale, m (area / radius).
    pub scale: f64,
    pub radius: f64,
}

impl ChordShape {
    /// Chord length at spanwise station `r` (meters).
    pub fn chord_at(&self, r: f64) -> Result<f64, SpeciesError> {
        if !(0.0..=self.radius).contains(&r) {
            return Err(SpeciesError::Domain {
                r,
                radius: self.radius,
            });
        }
        let u = r / self.radius;
        Ok(self.scale / self.beta * u.powf(self.kappa - 1.0) * (1.0 - u).powf(self.gamma - 1.0))
    }
}

impl Morphology {
    pub fn validate(&self) -> Result<(), SpeciesError> {
        let positive = [
            ("f_hz", self.flap_hz),
            ("phi_deg", self.flap_amplitude),
            ("S_mm2", self.wing_area),
            ("R_mm", self.wing_radius),
            ("cbar_mm", self.mean_chord),
            ("m_mg", self.mass),
            ("Iy_mg_cm2", self.body_pitch_inertia),
            ("mw_mg", self.wing_mass),
            ("d_hat", self.d_hat),
            ("a0_per_rad", self.airfoil_slope),
            ("rho_kg_m3", self.air_density),
            ("g_m_s2", self.gravity),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SpeciesError::Invariant {
                    field: field.into(),
                    message: format!("must be strictly positive and finite, got {v}"),
                });
            }
        }
        if !(self.r1_hat > 0.0 && self.r1_hat < self.r2_hat && self.r2_hat < 1.0) {
            return Err(SpeciesError::Invariant {
                field: "morphology.r1_hat/r2_hat".into(),
                message: format!(
                    "need 0 < r1_hat < r2_hat < 1, got r1_hat={}, r2_hat={}",
                    self.r1_hat, self.r2_hat
                ),
            });
        }
        if self.shape_factor() <= 1.0 {
            return Err(SpeciesError::Invariant {
                field: "morphology.r1_hat/r2_hat".into(),
                message: format!(
                    "chord-moment combination r1(1-r1)/(r2^2-r1^2) = {} must exceed 1 \
                     for positive kernel exponents",
                    self.shape_factor()
                ),
            });
        }
        if !(self.mean_aoa > 0.0 && self.mean_aoa < std::f64::consts::FRAC_PI_2) {
            return Err(SpeciesError::Invariant {
                field: "auxiliary.alpha_m_deg".into(),
                message: format!("mean angle of attack must lie in (0, 90) deg, got {} rad", self.mean_aoa),
            });
        }
        // The reported mean chord should agree with area/radius; a large gap
        // indicates mismatched units.
        let implied = self.wing_area / self.wing_radius;
        if (self.mean_chord / implied - 1.0).abs() > 0.05 {
            return Err(SpeciesError::Invariant {
                field: "morphology.cbar_mm".into(),
                message: format!(
                    "mean chord {} m deviates more than 5% from area/radius = {} m",
                    self.mean_chord, implied
                ),
            });
        }
        Ok(())
    }

    fn shape_factor(&self) -> f64 {
        self.r1_hat * (1.0 - self.r1_hat) / (self.r2_hat * self.r2_hat - self.r1_hat * self.r1_hat)
    }

    /// Chord-profile parameters: kernel exponents and normalization.
    pub fn chord_shape(&self) -> Result<ChordShape, SpeciesError> {
        let f = self.shape_factor() - 1.0;
        let kappa = self.r1_hat * f;
        let gamma = (1.0 - self.r1_hat) * f;
        if kappa <= 0.0 || gamma <= 0.0 {
            return Err(SpeciesError::Invariant {
                field: "morphology.r1_hat/r2_hat".into(),
                message: format!("kernel exponents must be positive, got kappa={kappa}, gamma={gamma}"),
            });
        }
        let beta = beta_weighted(kappa, gamma, |_| 1.0, MOMENT_REL_TOL).map_err(|e| {
            SpeciesError::Integration {
                symbol: "beta".into(),
                source: e,
            }
        })?;
        Ok(ChordShape {
            kappa,
            gamma,
            beta,
            scale: self.wing_area / self.wing_radius,
            radius: self.wing_radius,
        })
    }

    /// Wing aspect ratio R^2 / S.
    pub fn aspect_ratio(&self) -> f64 {
        self.wing_radius * self.wing_radius / self.wing_area
    }

    /// Finite-wing lift-curve slope from the 2-D slope and aspect ratio.
    pub fn lift_curve_slope(&self) -> f64 {
        let pi_ar = std::f64::consts::PI * self.aspect_ratio();
        pi_ar / (1.0 + ((pi_ar / self.airfoil_slope).powi(2) + 1.0).sqrt())
    }

    /// Chord-distribution moment `I_mn = 2 int_0^R r^m c^n(r) dr`, SI.
    pub fn chord_moment(&self, m_exp: u32, n_exp: u32) -> Result<f64, SpeciesError> {
        let shape = self.chord_shape()?;
        let n = n_exp as f64;
        let m = m_exp as f64;
        let p = m + n * (shape.kappa - 1.0) + 1.0;
        let q = n * (shape.gamma - 1.0) + 1.0;
        let symbol = format!("I_{m_exp}{n_exp}");
        let kernel = beta_weighted(p, q, |_| 1.0, MOMENT_REL_TOL).map_err(|e| {
            SpeciesError::Integration {
                symbol,
                source: e,
            }
        })?;
        Ok(2.0
            * self.wing_radius.powi(m_exp as i32 + 1)
            * (shape.scale / shape.beta).powi(n_exp as i32)
            * kernel)
    }

    /// Flapping moment of inertia from wing areal mass and the chord profile.
    pub fn flapping_inertia(&self) -> Result<f64, SpeciesError> {
        let areal = self.wing_mass / (2.0 * self.wing_area);
        let i_x = areal * self.chord_moment(2, 1)?;
        let i_y = areal * self.d_hat * self.d_hat * self.chord_moment(0, 3)?;
        let i_z = i_x + i_y;
        let (sa, ca) = self.mean_aoa.sin_cos();
        Ok(i_x * sa * sa + i_z * ca * ca)
    }

    /// Derives the full plant coefficient set from morphology.
    pub fn derive_coefficients(&self) -> Result<ModelCoefficients, SpeciesError> {
        self.validate()?;
        let c_la = self.lift_curve_slope();
        let i11 = self.chord_moment(1, 1)?;
        let i21 = self.chord_moment(2, 1)?;
        let i31 = self.chord_moment(3, 1)?;
        let i_f = self.flapping_inertia()?;
        let (sa, ca) = self.mean_aoa.sin_cos();
        let rho = self.air_density;
        // Shared factor keeps the k_d3 = 2 m k_l / i_f identity exact.
        let lift_factor = rho * c_la * i21 * sa * ca;
        Ok(ModelCoefficients {
            k_d1: rho * c_la * i11 * ca * ca / (2.0 * self.mass),
            k_l: lift_factor / (2.0 * self.mass),
            k_d2: rho * c_la * i31 * sa * sa / i_f,
            k_d3: lift_factor / i_f,
            i_f,
            mass: self.mass,
            gravity: self.gravity,
        })
    }
}

/// Chord length at spanwise station `r` (meters) for a validated morphology.
pub fn chord_at(r: f64, morph: &Morphology) -> Result<f64, SpeciesError> {
    morph.chord_shape()?.chord_at(r)
}

/// Chord-distribution moment `I_mn`; see [`Morphology::chord_moment`].
pub fn chord_moment(m_exp: u32, n_exp: u32, morph: &Morphology) -> Result<f64, SpeciesError> {
    morph.chord_moment(m_exp, n_exp)
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesFile {
    name: String,
    morphology: MorphologyFile,
    auxiliary: AuxiliaryFile,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients_override: Option<CoefficientsFile>,
    esc: EscTable,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MorphologyFile {
    f_hz: f64,
    phi_deg: f64,
    #[serde(rename = "S_mm2")]
    s_mm2: f64,
    #[serde(rename = "R_mm")]
    r_mm: f64,
    cbar_mm: f64,
    r1_hat: f64,
    r2_hat: f64,
    m_mg: f64,
    #[serde(rename = "Iy_mg_cm2")]
    iy_mg_cm2: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuxiliaryFile {
    alpha_m_deg: f64,
    mw_mg: f64,
    d_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    a0_per_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_kg_m3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_m_s2: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientsFile {
    kd1: f64,
    #[serde(rename = "kL")]
    k_l: f64,
    kd2: f64,
    kd3: f64,
    #[serde(rename = "IF_kg_m2")]
    i_f: f64,
}

/// Parses and validates a species document.
///
/// `origin` names the source (file path or "bundled:<name>") in errors.
pub fn load_species_str(json: &str, origin: &str) -> Result<Species, SpeciesError> {
    let file: SpeciesFile = serde_json::from_str(json).map_err(|e| SpeciesError::Schema {
        path: origin.into(),
        message: e.to_string(),
    })?;
    species_from_file(file)
}

/// Loads a species JSON document from disk.
pub fn load_species_file(path: &Path) -> Result<Species, SpeciesError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpeciesError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_species_str(&text, &path.display().to_string())
}

/// Re-serializes a species document in canonical form (used by the
/// round-trip stability check and `species show`).
pub fn canonical_json(json: &str, origin: &str) -> Result<String, SpeciesError> {
    let file: SpeciesFile = serde_json::from_str(json).map_err(|e| SpeciesError::Schema {
        path: origin.into(),
        message: e.to_string(),
    })?;
    let mut out = serde_json::to_string_pretty(&file).expect("serializable");
    out.push('\n');
    Ok(out)
}

fn species_from_file(file: SpeciesFile) -> Result<Species, SpeciesError> {
    let m = &file.morphology;
    let aux = &file.auxiliary;
    let gravity = aux.g_m_s2.unwrap_or(DEFAULT_GRAVITY);
    let morphology = Morphology {
        flap_hz: m.f_hz,
        flap_amplitude: m.phi_deg.to_radians(),
        wing_area: m.s_mm2 * 1e-6,
        wing_radius: m.r_mm * 1e-3,
        mean_chord: m.cbar_mm * 1e-3,
        r1_hat: m.r1_hat,
        r2_hat: m.r2_hat,
        mass: m.m_mg * 1e-6,
        body_pitch_inertia: m.iy_mg_cm2 * 1e-10,
        mean_aoa: aux.alpha_m_deg.to_radians(),
        wing_mass: aux.mw_mg * 1e-6,
        d_hat: aux.d_hat,
        airfoil_slope: aux.a0_per_rad.unwrap_or(2.0 * std::f64::consts::PI),
        air_density: aux.rho_kg_m3.unwrap_or(DEFAULT_AIR_DENSITY),
        gravity,
    };
    morphology.validate()?;
    let (coefficients, overridden) = match &file.coefficients_override {
        Some(c) => {
            let coeffs = ModelCoefficients {
                k_d1: c.kd1,
                k_l: c.k_l,
                k_d2: c.kd2,
                k_d3: c.kd3,
                i_f: c.i_f,
                mass: morphology.mass,
                gravity,
            };
            for (field, v) in [
                ("coefficients_override.kd1", coeffs.k_d1),
                ("coefficients_override.kL", coeffs.k_l),
                ("coefficients_override.kd2", coeffs.k_d2),
                ("coefficients_override.kd3", coeffs.k_d3),
                ("coefficients_override.IF_kg_m2", coeffs.i_f),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(SpeciesError::Invariant {
                        field: field.into(),
                        message: format!("must be strictly positive and finite, got {v}"),
                    });
                }
            }
            (coeffs, true)
        }
        None => (morphology.derive_coefficients()?, false),
    };
    Ok(Species {
        name: file.name,
        morphology,
        coefficients,
        coefficients_overridden: overridden,
        esc: file.esc,
    })
}

// ---------------------------------------------------------------------------
// Bundled species
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn bundled_records_load_with_reference_values() {
        let bb = bundled::load("bumblebee").unwrap();
        assert!(bb.coefficients_overridden);
        assert_eq!(bb.coefficients.k_d2, 0.2826);
        assert_eq!(bb.coefficients.i_f, 9.453e-11);

        let hb = bundled::load("hummingbird").unwrap();
        assert_eq!(hb.morphology.flap_hz, 48.0);
        assert_relative_eq!(hb.morphology.mass, 4.32e-3, max_relative = 1e-12);

        let hm = bundled::load("hawkmoth").unwrap();
        assert_eq!(hm.coefficients.k_d3, 17.3331);
        assert_relative_eq!(hm.omega(), 165.24777357882311, max_relative = 1e-13);
    }

    #[test]
    fn moment_ordering_invariant_rejected() {
        let mut doc: serde_json::Value =
            serde_json::from_str(bundled::raw("hawkmoth").unwrap()).unwrap();
        doc["morphology"]["r1_hat"] = 0.6.into();
        doc["morphology"]["r2_hat"] = 0.55.into();
        let err = load_species_str(&doc.to_string(), "test").unwrap_err();
        assert!(matches!(err, SpeciesError::Invariant { ref field, .. } if field.contains("r1_hat")));
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let mut doc: serde_json::Value =
            serde_json::from_str(bundled::raw("cranefly").unwrap()).unwrap();
        doc["morphology"]["wingspan_m"] = 1.0.into();
        let err = load_species_str(&doc.to_string(), "user.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("user.json"), "{msg}");
        assert!(msg.contains("wingspan_m"), "{msg}");
    }

    #[test]
    fn auxiliary_defaults_apply() {
        let mut doc: serde_json::Value =
            serde_json::from_str(bundled::raw("dragonfly").unwrap()).unwrap();
        let aux = doc["auxiliary"].as_object_mut().unwrap();
        aux.remove("a0_per_rad");
        aux.remove("rho_kg_m3");
        let sp = load_species_str(&doc.to_string(), "test").unwrap();
        assert_eq!(sp.morphology.airfoil_slope, 2.0 * std::f64::consts::PI);
        assert_eq!(sp.morphology.air_density, DEFAULT_AIR_DENSITY);
        assert_eq!(sp.morphology.gravity, DEFAULT_GRAVITY);
    }

    #[test]
    fn canonical_serialization_is_idempotent() {
        for name in bundled::NAMES {
            let raw = bundled::raw(name).unwrap();
            let once = canonical_json(raw, name).unwrap();
            let twice = canonical_json(&once, name).unwrap();
            assert_eq!(once, twice, "round trip for {name}");
        }
    }

    #[test]
    fn chord_normalization_and_moment_recovery() {
        for name in bundled::NAMES {
            let sp = bundled::load(name).unwrap();
            let m = &sp.morphology;
            let i01 = m.chord_moment(0, 1).unwrap();
            assert_relative_eq!(i01, 2.0 * m.wing_area, max_relative = 1e-6);
            let i11 = m.chord_moment(1, 1).unwrap();
            assert_relative_eq!(
                i11 / (2.0 * m.wing_area * m.wing_radius),
                m.r1_hat,
                max_relative = 1e-6
            );
            let i21 = m.chord_moment(2, 1).unwrap();
            assert_relative_eq!(
                (i21 / (2.0 * m.wing_area * m.wing_radius.powi(2))).sqrt(),
                m.r2_hat,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn hawkmoth_first_moment_reproduces_r1() {
        // int r c(r) dr / (S R) recovers the first chord moment 0.440.
        let sp = bundled::load("hawkmoth").unwrap();
        let m = &sp.morphology;
        let i11 = m.chord_moment(1, 1).unwrap();
        assert_relative_eq!(i11 / (2.0 * m.wing_area * m.wing_radius), 0.440, max_relative = 1e-9);
    }

    #[test]
    fn hawkmoth_second_moment_regression_and_trapezoid_oracle() {
        // Frozen value of I_21 for the hawkmoth profile; independently
        // confirmed by a high-resolution trapezoid sum over the chord.
        let sp = bundled::load("hawkmoth").unwrap();
        let m = &sp.morphology;
        let i21 = m.chord_moment(2, 1).unwrap();
        assert_relative_eq!(i21, 1.4073432113475004e-6, max_relative = 1e-9);

        let shape = m.chord_shape().unwrap();
        let n = 2_000_000usize;
        let h = m.wing_radius / n as f64;
        let mut acc = 0.0;
        for i in 1..n {
            let r = i as f64 * h;
            acc += r * r * shape.chord_at(r).unwrap();
        }
        let trapezoid = 2.0 * acc * h; // endpoint values vanish
        assert_relative_eq!(i21, trapezoid, max_relative = 1e-5);
    }

    #[test]
    fn symmetric_profile_is_symmetric() {
        // r1 = 0.5 makes the kernel exponents equal, so the chord profile is
        // mirror-symmetric about midspan.
        let sp = bundled::load("hawkmoth").unwrap();
        let mut m = sp.morphology.clone();
        m.r1_hat = 0.5;
        m.r2_hat = 0.58;
        let shape = m.chord_shape().unwrap();
        let r_half = m.wing_radius / 2.0;
        for frac in [0.1, 0.25, 0.4] {
            let dx = frac * m.wing_radius;
            assert_relative_eq!(
                shape.chord_at(r_half - dx).unwrap(),
                shape.chord_at(r_half + dx).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn chord_domain_errors() {
        let sp = bundled::load("hoverfly").unwrap();
        let m = &sp.morphology;
        assert!(matches!(
            chord_at(-1e-6, m),
            Err(SpeciesError::Domain { .. })
        ));
        assert!(matches!(
            chord_at(m.wing_radius * 1.001, m),
            Err(SpeciesError::Domain { .. })
        ));
    }

    #[test]
    fn lift_curve_slope_reference_and_limits() {
        let sp = bundled::load("hawkmoth").unwrap();
        let mut m = sp.morphology.clone();
        m.airfoil_slope = 2.0 * std::f64::consts::PI;
        // AR = 2.84196: pi*AR / (1 + sqrt((AR/2)^2 + 1))
        assert_relative_eq!(m.lift_curve_slope(), 3.261377327078291, max_relative = 1e-12);

        // Monotone in AR, asymptote a0 from below.
        let mut last = 0.0;
        for scale in [1.0, 4.0, 16.0, 64.0, 256.0] {
            let mut wide = m.clone();
            wide.wing_radius = m.wing_radius * scale;
            let v = wide.lift_curve_slope();
            assert!(v > last && v < m.airfoil_slope);
            last = v;
        }
        // AR = a0/pi gives exactly a0/(1 + sqrt(2)).
        let mut special = m.clone();
        special.wing_area = special.wing_radius * special.wing_radius * std::f64::consts::PI
            / special.airfoil_slope;
        // keep the chord-consistency validation out of the way: slope only
        assert_relative_eq!(
            special.lift_curve_slope(),
            special.airfoil_slope / (1.0 + 2.0_f64.sqrt()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn flapping_inertia_angle_limits() {
        let sp = bundled::load("hawkmoth").unwrap();
        let m = sp.morphology.clone();
        let areal = m.wing_mass / (2.0 * m.wing_area);
        let i_x = areal * m.chord_moment(2, 1).unwrap();
        let i_y = areal * m.d_hat * m.d_hat * m.chord_moment(0, 3).unwrap();

        let mut vertical = m.clone();
        vertical.mean_aoa = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(vertical.flapping_inertia().unwrap(), i_x, max_relative = 1e-12);

        let mut flat = m.clone();
        flat.mean_aoa = 0.0;
        assert_relative_eq!(flat.flapping_inertia().unwrap(), i_x + i_y, max_relative = 1e-12);
    }

    #[test]
    fn vanishing_angle_of_attack_kills_lift_terms() {
        let sp = bundled::load("cranefly").unwrap();
        let mut m = sp.morphology.clone();
        m.mean_aoa = 1e-12;
        let d = m.derive_coefficients().unwrap();
        assert!(d.k_l < 1e-12 * d.k_d1);
        assert!(d.k_d2 < 1e-20 * d.k_d3.max(1.0));
        assert!(d.k_d3 < 1e-6);
        assert!(d.k_d1 > 0.0);
    }

    #[test]
    fn derived_identity_is_exact() {
        for name in bundled::NAMES {
            let sp = bundled::load(name).unwrap();
            let d = sp.derive_coefficients().unwrap();
            assert_abs_diff_eq!(d.coupling_identity_residual(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn derivation_matches_reference_within_policy() {
        // Five insects reproduce the reference coefficient set within the
        // 15% consistency tolerance from the calibrated auxiliary inputs.
        for name in ["hawkmoth", "cranefly", "bumblebee", "dragonfly", "hoverfly"] {
            let sp = bundled::load(name).unwrap();
            let d = sp.derive_coefficients().unwrap();
            let r = &sp.coefficients;
            for (label, dv, rv) in [
                ("k_d1", d.k_d1, r.k_d1),
                ("k_l", d.k_l, r.k_l),
                ("k_d2", d.k_d2, r.k_d2),
                ("k_d3", d.k_d3, r.k_d3),
                ("i_f", d.i_f, r.i_f),
            ] {
                let dev = (dv / rv - 1.0).abs();
                assert!(dev <= 0.15, "{name} {label}: deviation {dev:.4}");
            }
        }
        // The hummingbird reference k_d1 is not reachable from its blade
        // morphology (the required first-moment damping exceeds what the
        // wing geometry provides); the other four coefficients calibrate.
        let sp = bundled::load("hummingbird").unwrap();
        let d = sp.derive_coefficients().unwrap();
        let r = &sp.coefficients;
        for (label, dv, rv) in [
            ("k_l", d.k_l, r.k_l),
            ("k_d2", d.k_d2, r.k_d2),
            ("k_d3", d.k_d3, r.k_d3),
            ("i_f", d.i_f, r.i_f),
        ] {
            let dev = (dv / rv - 1.0).abs();
            assert!(dev <= 0.15, "hummingbird {label}: deviation {dev:.4}");
        }
        assert!(d.k_d1 / r.k_d1 < 0.2, "documented k_d1 gap vanished?");
    }

    #[test]
    fn reference_identity_violation_bounded() {
        for name in bundled::NAMES {
            let sp = bundled::load(name).unwrap();
            let resid = sp.coefficients.coupling_identity_residual();
            assert!(resid.abs() <= 0.15, "{name}: {resid}");
        }
    }

    #[test]
    fn hawkmoth_inertia_consistency() {
        let sp = bundled::load("hawkmoth").unwrap();
        let i_f = sp.morphology.flapping_inertia().unwrap();
        assert_relative_eq!(i_f, 1.3179e-7, max_relative = 0.15);
    }

    #[test]
    fn cubed_chord_moment_converges() {
        // n = 3 moments hit the strongest endpoint singularity the bundled
        // profiles produce (3 kappa - 2 = 0.645 for the hawkmoth).
        let sp = bundled::load("hawkmoth").unwrap();
        let i03 = sp.morphology.chord_moment(0, 3).unwrap();
        assert!(i03 > 0.0 && i03.is_finite());
    }

    #[test]
    fn non_integrable_moment_reports_error() {
        let sp = bundled::load("hawkmoth").unwrap();
        let mut m = sp.morphology.clone();
        // kappa = 0.88 -> with n = 9 the left exponent 9(kappa-1)+1 < 0.
        let err = m.chord_moment(0, 9).unwrap_err();
        assert!(matches!(err, SpeciesError::Integration { .. }), "{err}");
        m.r1_hat = 0.44;
        assert!(m.chord_moment(0, 1).is_ok());
    }
}

pub mod bundled {
    //! The six species records shipped with the toolkit.

    use super::{load_species_str, Species, SpeciesError};

    pub const NAMES: [&str; 6] = [
        "hawkmoth",
        "cranefly",
        "bumblebee",
        "dragonfly",
        "hoverfly",
        "hummingbird",
    ];

    /// Raw JSON document for a bundled species.
    pub fn raw(name: &str) -> Option<&'static str> {
        match name {
            "hawkmoth" => Some(include_str!("../data/hawkmoth.json")),
            "cranefly" => Some(include_str!("../data/cranefly.json")),
            "bumblebee" => Some(include_str!("../data/bumblebee.json")),
            "dragonfly" => Some(include_str!("../data/dragonfly.json")),
            "hoverfly" => Some(include_str!("../data/hoverfly.json")),
            "hummingbird" => Some(include_str!("../data/hummingbird.json")),
            _ => None,
        }
    }

    pub fn load(name: &str) -> Result<Species, SpeciesError> {
        let json = raw(name).ok_or_else(|| SpeciesError::UnknownSpecies { name: name.into() })?;
        load_species_str(json, &format!("bundled:{name}"))
    }

    pub fn all() -> Result<Vec<Species>, SpeciesError> {
        NAMES.iter().map(|n| load(n)).collect()
    }
}

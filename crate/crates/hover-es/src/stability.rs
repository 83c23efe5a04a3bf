//! Vibrational averaging of the smoothed closed loop and eigenvalue-based
//! stability verdicts.
//!
//! The loop `xdot = Z(x) + G(x) u` driven by `u = a Omega cos(Omega t)`
//! averages (variation-of-constants, one double-bracket term) to
//! `xdot = Z(x) + (a^2/4) [G, [G, Z]](x)` with the bracket convention
//! `[f, g] = (dg/dx) f - (df/dx) g`. Altitude and flapping angle are
//! ignorable coordinates: the reduced analysis freezes them at zero and
//! works on (w, phidot, tauhat).
//!
//! Brackets and Jacobians use central finite differences. The default step
//! rule `max(1e-6 |x_i|, 1e-9)` is fine for generic fields at generic
//! points, but at the hover equilibrium the state is near zero while the
//! fields mix magnitudes across twelve decades; there the nested
//! differences cancel below the floating-point floor. The analysis path
//! therefore passes explicit characteristic scales (1 for z, phi, w; the
//! modulation rate a/I_F for phidot; the modulation torque a*Omega for
//! tauhat) and a relative step of 3e-6, which keeps the smoothing-induced
//! curvature resolved while staying above the cancellation floor.

use crate::eigen::{eigenvalues3, Complex64, EigenError};
use crate::esc::{affine_decomposition, EsState, EscConfig, Objective};
use crate::species::{ModelCoefficients, Species};
use serde::Serialize;
use thiserror::Error;

/// Relative FD step used by the averaging analysis.
pub const ANALYSIS_STEP_REL: f64 = 3e-6;
/// Scaled-residual convergence threshold for the equilibrium search. The
/// nested-difference noise floor sits near 5e-7, so demanding much less
/// than 1e-6 is not attainable in double precision.
pub const NEWTON_TOL: f64 = 1e-6;
pub const NEWTON_MAX_ITERS: u32 = 200;
/// Jacobian condition estimate beyond which the report is flagged.
pub const CONDITION_FLAG: f64 = 1e12;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("no equilibrium found: best scaled residual {best_residual:.3e} over {seeds} seeds")]
    NoEquilibrium { best_residual: f64, seeds: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Placement of the modulation amplitude in the averaged correction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum APlacement {
    /// Correction (a^2/4) [G, [G, Z]]: the standard second-order term.
    #[default]
    Squared,
    /// Correction (a^2/4) [aG, [aG, Z]] = (a^4/4) [G, [G, Z]]: the literal
    /// nesting of the amplitude-scaled direction, for sensitivity studies.
    Literal,
}

impl std::str::FromStr for APlacement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared" => Ok(APlacement::Squared),
            "literal" => Ok(APlacement::Literal),
            other => Err(format!("unknown a-placement '{other}' (expected squared | literal)")),
        }
    }
}

impl APlacement {
    pub fn key(&self) -> &'static str {
        match self {
            APlacement::Squared => "squared",
            APlacement::Literal => "literal",
        }
    }
}

/// Central-difference Jacobian of `f` at `x` with per-component steps.
pub fn fd_jacobian<const N: usize>(
    f: &dyn Fn(&[f64; N]) -> [f64; N],
    x: &[f64; N],
    steps: &[f64; N],
) -> [[f64; N]; N] {
    let mut jac = [[0.0; N]; N];
    for col in 0..N {
        let h = steps[col];
        let mut xp = *x;
        let mut xm = *x;
        xp[col] += h;
        xm[col] -= h;
        let fp = f(&xp);
        let fm = f(&xm);
        for row in 0..N {
            jac[row][col] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    jac
}

/// Default per-component FD steps: `max(1e-6 |x_i|, 1e-9)`.
pub fn default_fd_steps<const N: usize>(x: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| (1e-6 * x[i].abs()).max(1e-9))
}

/// Lie bracket `[f, g](x) = (dg/dx) f(x) - (df/dx) g(x)` via central
/// finite differences with the given per-component steps.
pub fn lie_bracket<const N: usize>(
    f: &dyn Fn(&[f64; N]) -> [f64; N],
    g: &dyn Fn(&[f64; N]) -> [f64; N],
    x: &[f64; N],
    steps: &[f64; N],
) -> [f64; N] {
    let jf = fd_jacobian(f, x, steps);
    let jg = fd_jacobian(g, x, steps);
    let fx = f(x);
    let gx = g(x);
    std::array::from_fn(|i| {
        let mut acc = 0.0;
        for k in 0..N {
            acc += jg[i][k] * fx[k] - jf[i][k] * gx[k];
        }
        acc
    })
}

/// The averaging context for one (config, coefficients) pair.
pub struct Averaging<'a> {
    pub cfg: &'a EscConfig,
    pub coeffs: &'a ModelCoefficients,
    pub placement: APlacement,
}

impl<'a> Averaging<'a> {
    pub fn new(cfg: &'a EscConfig, coeffs: &'a ModelCoefficients) -> Self {
        Averaging {
            cfg,
            coeffs,
            placement: APlacement::default(),
        }
    }

    pub fn with_placement(mut self, placement: APlacement) -> Self {
        self.placement = placement;
        self
    }

    /// Characteristic per-component scales of the closed-loop state.
    pub fn state_scales(&self) -> [f64; 5] {
        let rate = self.cfg.amplitude / self.coeffs.i_f;
        let torque = self.cfg.amplitude * self.cfg.omega;
        [1.0, 1.0, 1.0, rate, torque]
    }

    fn fd_steps(&self, x: &[f64; 5]) -> [f64; 5] {
        let scales = self.state_scales();
        std::array::from_fn(|i| ANALYSIS_STEP_REL * x[i].abs().max(scales[i]).max(1e-9))
    }

    fn drift(&self, x: &[f64; 5]) -> [f64; 5] {
        let state = EsState::from_array(x);
        affine_decomposition(&state, self.cfg, self.coeffs, true).0
    }

    fn control(&self, x: &[f64; 5]) -> [f64; 5] {
        let state = EsState::from_array(x);
        affine_decomposition(&state, self.cfg, self.coeffs, true).1
    }

    /// Averaged field `Z + coef * [G, [G, Z]]` at `x` (smoothed dynamics).
    pub fn field(&self, x: &[f64; 5]) -> [f64; 5] {
        let steps = self.fd_steps(x);
        let drift = |y: &[f64; 5]| self.drift(y);
        let control = |y: &[f64; 5]| self.control(y);
        let inner = |y: &[f64; 5]| {
            let steps_inner = self.fd_steps(y);
            lie_bracket(&control, &drift, y, &steps_inner)
        };
        let double = lie_bracket(&control, &inner, x, &steps);
        let a2 = self.cfg.amplitude * self.cfg.amplitude;
        let coef = match self.placement {
            APlacement::Squared => a2 / 4.0,
            APlacement::Literal => a2 * a2 / 4.0,
        };
        let z = self.drift(x);
        std::array::from_fn(|i| z[i] + coef * double[i])
    }

    /// Reduced averaged field on (w, phidot, tauhat) with z = phi = 0.
    pub fn reduced_field(&self, r: &[f64; 3]) -> [f64; 3] {
        let full = self.field(&[0.0, 0.0, r[0], r[1], r[2]]);
        [full[2], full[3], full[4]]
    }

    /// Row scales for the reduced residual: gravity for the w row, the
    /// modulation acceleration for the phidot row, the demodulation rate
    /// scale for the tauhat row.
    pub fn residual_scales(&self) -> [f64; 3] {
        let accel = self.cfg.amplitude / self.coeffs.i_f * self.cfg.omega;
        let demod = (self.cfg.gain.abs() * self.cfg.amplitude * self.cfg.omega).max(1e-30);
        [self.coeffs.gravity, accel, demod]
    }
}

/// A converged reduced equilibrium.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Equilibrium {
    /// (w*, phidot*, tauhat*), SI.
    pub state: [f64; 3],
    /// Max scaled residual of the reduced averaged field.
    pub residual: f64,
    /// Index of the seed that converged.
    pub seed_index: usize,
    pub iterations: u32,
}

/// Damped Newton on the reduced averaged field from a seed grid.
///
/// Seeds: the origin first (the symmetric-flapping hover branch), then the
/// sign-symmetric rotating branches near `phidot = sqrt(g/k_l)` with the
/// matching steady flap-damping torque.
pub fn find_equilibrium(
    avg: &Averaging<'_>,
    extra_seeds: &[[f64; 3]],
) -> Result<Equilibrium, StabilityError> {
    let c = avg.coeffs;
    let balance = c.balance_rate();
    let osc = avg.cfg.amplitude / c.i_f;
    // Rotating-branch rate seed: what is left for the mean rate once the
    // oscillation carries most of the lift.
    let residual_rate = (c.gravity / c.k_l - 0.5 * osc * osc).max(0.01 * c.gravity / c.k_l).sqrt();
    let torque = c.k_d2 * c.i_f * c.gravity / c.k_l;
    let mut seeds = extra_seeds.to_vec();
    seeds.extend_from_slice(&[
        [0.0, 0.0, 0.0],
        [0.0, residual_rate, torque * (residual_rate / balance).powi(2)],
        [0.0, -residual_rate, -torque * (residual_rate / balance).powi(2)],
        [0.0, balance, torque],
        [0.0, -balance, -torque],
    ]);

    let scales = avg.residual_scales();
    let mut best = f64::INFINITY;
    for (seed_index, seed) in seeds.iter().enumerate() {
        if let Some((state, residual, iterations)) = newton(avg, *seed, &scales) {
            return Ok(Equilibrium {
                state,
                residual,
                seed_index,
                iterations,
            });
        }
        let r = scaled_residual(&avg.reduced_field(seed), &scales);
        best = best.min(r);
    }
    Err(StabilityError::NoEquilibrium {
        best_residual: best,
        seeds: seeds.len(),
    })
}

fn scaled_residual(f: &[f64; 3], scales: &[f64; 3]) -> f64 {
    f.iter()
        .zip(scales)
        .map(|(v, s)| v.abs() / s)
        .fold(0.0, f64::max)
}

fn newton(avg: &Averaging<'_>, seed: [f64; 3], scales: &[f64; 3]) -> Option<([f64; 3], f64, u32)> {
    let state_scales = avg.state_scales();
    let mut r = seed;
    for it in 0..NEWTON_MAX_ITERS {
        let f = avg.reduced_field(&r);
        let res = scaled_residual(&f, scales);
        if res < NEWTON_TOL {
            return Some((r, res, it));
        }
        let steps: [f64; 3] = std::array::from_fn(|i| {
            ANALYSIS_STEP_REL * r[i].abs().max(state_scales[2 + i]).max(1e-9)
        });
        let jac = fd_jacobian(&|y: &[f64; 3]| avg.reduced_field(y), &r, &steps);
        // Least-squares step: the tauhat row can vanish identically (the
        // altitude objective sees no reduced-state dependence), leaving a
        // rank-deficient system with an equilibrium family.
        let step = least_squares_step(&jac, &f)?;
        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..30 {
            let candidate = [
                r[0] + lambda * step[0],
                r[1] + lambda * step[1],
                r[2] + lambda * step[2],
            ];
            if scaled_residual(&avg.reduced_field(&candidate), scales) < res {
                r = candidate;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            // Stagnated at the evaluation noise floor.
            return (res < 10.0 * NEWTON_TOL).then_some((r, res, it));
        }
    }
    let f = avg.reduced_field(&r);
    let res = scaled_residual(&f, scales);
    (res < NEWTON_TOL).then_some((r, res, NEWTON_MAX_ITERS))
}

fn least_squares_step(jac: &[[f64; 3]; 3], f: &[f64; 3]) -> Option<[f64; 3]> {
    let m = nalgebra::Matrix3::from_fn(|i, j| jac[i][j]);
    let rhs = nalgebra::Vector3::new(-f[0], -f[1], -f[2]);
    let svd = m.svd(true, true);
    svd.solve(&rhs, 1e-13).ok().map(|s| [s[0], s[1], s[2]])
}

/// Full stability report for one (species, objective) pair.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub species: String,
    pub objective: Objective,
    /// Reduced equilibrium (w*, phidot*, tauhat*).
    pub equilibrium: [f64; 3],
    pub residual_norm: f64,
    /// Reduced Jacobian, row-major.
    pub jacobian: [[f64; 3]; 3],
    #[serde(serialize_with = "serialize_eigenvalues")]
    pub eigenvalues: [Complex64; 3],
    /// True iff every eigenvalue has strictly negative real part.
    pub verdict: bool,
    pub n_smooth: u32,
    pub a_placement: APlacement,
    /// Condition estimate of the Jacobian exceeded the flag threshold.
    pub ill_conditioned: bool,
}

fn serialize_eigenvalues<S: serde::Serializer>(
    eig: &[Complex64; 3],
    ser: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = ser.serialize_seq(Some(3))?;
    for e in eig {
        seq.serialize_element(&serde_json::json!({"re": e.re, "im": e.im}))?;
    }
    seq.end()
}

/// Options for [`analyze`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AnalysisOptions {
    pub placement: APlacement,
    /// Extra Newton seeds tried after the built-in grid.
    pub seed: Option<[f64; 3]>,
}

/// Averaged field at a full closed-loop state (exposed for diagnostics).
pub fn averaged_field(
    x: &EsState,
    cfg: &EscConfig,
    coeffs: &ModelCoefficients,
    placement: APlacement,
) -> [f64; 5] {
    Averaging::new(cfg, coeffs).with_placement(placement).field(&x.to_array())
}

/// Finds the reduced equilibrium, linearizes, and issues the verdict.
pub fn analyze(
    species: &Species,
    cfg: &EscConfig,
    options: &AnalysisOptions,
) -> Result<StabilityReport, StabilityError> {
    let coeffs = species.coefficients;
    let avg = Averaging::new(cfg, &coeffs).with_placement(options.placement);
    let extra: Vec<[f64; 3]> = options.seed.into_iter().collect();
    let eq = find_equilibrium(&avg, &extra)?;

    let state_scales = avg.state_scales();
    let steps: [f64; 3] = std::array::from_fn(|i| {
        ANALYSIS_STEP_REL * eq.state[i].abs().max(state_scales[2 + i]).max(1e-9)
    });
    let jacobian = fd_jacobian(&|y: &[f64; 3]| avg.reduced_field(y), &eq.state, &steps);
    let eigenvalues = eigenvalues3(&jacobian, 1e-9)?;
    let verdict = eigenvalues.iter().all(|e| e.re < 0.0);
    let ill_conditioned = condition_estimate(&jacobian) > CONDITION_FLAG;
    Ok(StabilityReport {
        species: species.name.clone(),
        objective: cfg.objective,
        equilibrium: eq.state,
        residual_norm: eq.residual,
        jacobian,
        eigenvalues,
        verdict,
        n_smooth: cfg.n_smooth,
        a_placement: options.placement,
        ill_conditioned,
    })
}

fn condition_estimate(m: &[[f64; 3]; 3]) -> f64 {
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let svd = mat.svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

//! The open-loop 2-DOF flapping plant, in exact and smoothed forms.
//!
//! State: altitude `z`, flapping angle `phi`, vertical velocity `w`, and
//! flapping rate `phidot`. Positive `w` points along gravity (free fall from
//! rest gives `wdot = +g`), so `z` grows while descending.

use crate::species::ModelCoefficients;

/// The four plant states. All fields are finite by caller contract; the
/// vector field itself is total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Altitude coordinate, m (grows along gravity).
    pub z: f64,
    /// Flapping angle, rad.
    pub phi: f64,
    /// Vertical velocity, m/s.
    pub w: f64,
    /// Flapping angular rate, rad/s.
    pub phidot: f64,
}

impl PlantState {
    fn debug_check(&self) {
        debug_assert!(
            self.z.is_finite() && self.phi.is_finite() && self.w.is_finite() && self.phidot.is_finite(),
            "non-finite plant state: {self:?}"
        );
    }
}

/// Sharpness of the arctan absolute-value surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingOrder(u32);

impl SmoothingOrder {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1, "smoothing order must be at least 1");
        SmoothingOrder(n)
    }

    pub fn get(&self) -> u32 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        f64::from(self.0)
    }
}

impl Default for SmoothingOrder {
    fn default() -> Self {
        SmoothingOrder(50)
    }
}

/// Smooth surrogate for |v|: `v * (2/pi) * atan(n v)`.
///
/// Even in `v`, bounded above by |v|, and pointwise convergent to |v| as
/// the order grows.
pub fn abs_smooth(v: f64, n: SmoothingOrder) -> f64 {
    v * std::f64::consts::FRAC_2_PI * (n.as_f64() * v).atan()
}

fn plant_rhs_with(x: &PlantState, tau: f64, c: &ModelCoefficients, abs_phidot: f64) -> PlantState {
    x.debug_check();
    let q = x.phidot;
    PlantState {
        z: x.w,
        phi: q,
        w: c.gravity - c.k_d1 * abs_phidot * x.w - c.k_l * q * q,
        phidot: -c.k_d2 * abs_phidot * q - c.k_d3 * x.w * q + tau / c.i_f,
    }
}

/// Time derivative of the plant under torque `tau`, exact |phidot|.
pub fn plant_rhs(x: &PlantState, tau: f64, coeffs: &ModelCoefficients) -> PlantState {
    plant_rhs_with(x, tau, coeffs, x.phidot.abs())
}

/// Time derivative with every |phidot| replaced by the smooth surrogate.
pub fn plant_rhs_smooth(
    x: &PlantState,
    tau: f64,
    coeffs: &ModelCoefficients,
    n: SmoothingOrder,
) -> PlantState {
    plant_rhs_with(x, tau, coeffs, abs_smooth(x.phidot, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn hawkmoth_coeffs() -> ModelCoefficients {
        ModelCoefficients {
            k_d1: 0.0354,
            k_l: 6.216e-4,
            k_d2: 0.3492,
            k_d3: 17.3331,
            i_f: 1.3179e-7,
            mass: 1.648e-3,
            gravity: 9.81,
        }
    }

    #[test]
    fn free_fall_from_rest() {
        let c = hawkmoth_coeffs();
        let d = plant_rhs(&PlantState::default(), 0.0, &c);
        assert_eq!((d.z, d.phi, d.w, d.phidot), (0.0, 0.0, 9.81, 0.0));
    }

    #[test]
    fn lift_weight_balance() {
        let c = hawkmoth_coeffs();
        let x = PlantState {
            phidot: c.balance_rate(),
            ..Default::default()
        };
        let d = plant_rhs(&x, 0.0, &c);
        assert_abs_diff_eq!(d.w, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hawkmoth_reference_point() {
        // x = (0, 0, 0.2, 100), tau = 0:
        //   wdot = 9.81 - 0.0354*100*0.2 - 6.216e-4*100^2 = 2.886
        //   qdot = -0.3492*100^2 - 17.3331*0.2*100 = -3838.662
        let c = hawkmoth_coeffs();
        let x = PlantState {
            w: 0.2,
            phidot: 100.0,
            ..Default::default()
        };
        let d = plant_rhs(&x, 0.0, &c);
        assert_relative_eq!(d.w, 2.886, max_relative = 1e-12);
        assert_relative_eq!(d.phidot, -3838.662, max_relative = 1e-12);
    }

    #[test]
    fn abs_smooth_reference_values() {
        assert_eq!(abs_smooth(0.0, SmoothingOrder::default()), 0.0);
        // (2/pi) atan(50)
        assert_relative_eq!(
            abs_smooth(1.0, SmoothingOrder::default()),
            0.9872693017980544,
            max_relative = 1e-14
        );
    }

    #[test]
    fn abs_smooth_even_and_bounded() {
        let n = SmoothingOrder::default();
        for v in [-3.0, -0.7, -1e-3, 1e-3, 0.4, 12.0] {
            assert_eq!(abs_smooth(v, n), abs_smooth(-v, n));
            assert!(abs_smooth(v, n) <= v.abs());
            assert!(abs_smooth(v, n) >= 0.0);
        }
    }

    #[test]
    fn smooth_matches_exact_at_zero_rate() {
        let c = hawkmoth_coeffs();
        let x = PlantState {
            w: 0.3,
            ..Default::default()
        };
        let a = plant_rhs(&x, 1e-4, &c);
        let b = plant_rhs_smooth(&x, 1e-4, &c, SmoothingOrder::default());
        assert_eq!(a, b);
    }

    #[test]
    fn smoothing_error_bound_at_unit_rate() {
        // For |phidot| >= 1 and n = 50 the damping terms deviate by at most
        // 1 - (2/pi) atan(50) ~ 1.28% in relative terms.
        let c = hawkmoth_coeffs();
        let n = SmoothingOrder::default();
        let bound = 1.0 - std::f64::consts::FRAC_2_PI * 50.0_f64.atan();
        assert!(bound < 0.013);
        for q in [1.0, 2.5, 40.0, 180.0] {
            let x = PlantState {
                w: 0.1,
                phidot: q,
                ..Default::default()
            };
            let exact_damp = c.k_d1 * q.abs() * x.w;
            let smooth_damp = c.k_d1 * abs_smooth(q, n) * x.w;
            assert!((exact_damp - smooth_damp).abs() <= bound * exact_damp.abs() + 1e-15);
        }
    }

    #[test]
    fn smoothing_converges_pointwise() {
        let c = hawkmoth_coeffs();
        let x = PlantState {
            w: -0.4,
            phidot: 0.9,
            ..Default::default()
        };
        let exact = plant_rhs(&x, 2e-4, &c);
        let mut last_err = f64::INFINITY;
        for n in [50, 500, 5000] {
            let s = plant_rhs_smooth(&x, 2e-4, &c, SmoothingOrder::new(n));
            let err = (s.w - exact.w).abs() + (s.phidot - exact.phidot).abs();
            assert!(err < last_err);
            last_err = err;
        }
        // n = 1e6 sweep bound: below 1e-4 relative for |phidot| > 0.1
        for q in [0.11, 0.5, -2.0, 7.5] {
            let x = PlantState {
                w: 0.2,
                phidot: q,
                ..Default::default()
            };
            let exact = plant_rhs(&x, 0.0, &c);
            let s = plant_rhs_smooth(&x, 0.0, &c, SmoothingOrder::new(1_000_000));
            for (a, b) in [(s.w, exact.w), (s.phidot, exact.phidot)] {
                assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn symmetry_of_plant_rows() {
        // phidot -> -phidot, tau -> -tau flips the phidot row and leaves the
        // w row unchanged.
        let c = hawkmoth_coeffs();
        let x = PlantState {
            z: 0.1,
            phi: 0.2,
            w: 0.15,
            phidot: 37.0,
        };
        let mirrored = PlantState {
            phidot: -x.phidot,
            ..x
        };
        let d1 = plant_rhs(&x, 3e-4, &c);
        let d2 = plant_rhs(&mirrored, -3e-4, &c);
        assert_relative_eq!(d1.w, d2.w, max_relative = 1e-14);
        assert_relative_eq!(d1.phidot, -d2.phidot, max_relative = 1e-14);
    }

    #[test]
    fn flap_damping_opposes_motion() {
        let c = hawkmoth_coeffs();
        for q in [-200.0_f64, -1.0, 0.5, 150.0] {
            assert!(q * (-c.k_d2 * q.abs() * q) <= 0.0);
        }
    }
}

use std::f64::consts::PI;

use super::{click_from_mean, detector_means, ChannelModel, GroundTruth, ObservedCounts};
use crate::error::Result;
use crate::protocol::{slice_half_width, ProtocolParams};
use crate::quadrature::GaussLegendre;

/// Probabilities of a D0-only and a D1-only event.
#[inline]
fn effective(m0: f64, m1: f64, p_d: f64) -> (f64, f64) {
    let c0 = click_from_mean(m0, p_d);
    let c1 = click_from_mean(m1, p_d);
    (c0 * (1.0 - c1), c1 * (1.0 - c0))
}

/// `1/(2 pi) int_{-theta}^{theta} g(delta) d delta` for an even integrand.
fn phase_average<F: FnMut(f64) -> (f64, f64)>(theta: f64, g: F) -> (f64, f64) {
    let (a, b) = GaussLegendre::standard().integrate_pair(0.0, theta, g);
    (a / PI, b / PI)
}

/// Per-window detection probabilities for fixed intensity, slice and channel.
/// Independent of the basis and send probabilities, so one model serves a
/// whole `(epsilon, p_x)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableModel {
    /// Slice acceptance `theta / pi`.
    acceptance: f64,
    /// Slice-averaged D0-only / D1-only probabilities, weighted by acceptance.
    x0: f64,
    x1: f64,
    /// Single-sender D0-only / D1-only probabilities.
    c0: f64,
    c1: f64,
    /// Either-detector effective probability with both pulses, phase uniform.
    both: f64,
    dark: f64,
}

impl ObservableModel {
    pub fn new(mu: f64, lambda: f64, ch: &ChannelModel) -> Result<Self> {
        ch.validate()?;
        let eta = ch.arm_transmittance()?;
        let v = ch.visibility();
        let half = 0.5 * mu;
        let p_d = ch.p_d;
        let theta = slice_half_width(lambda)?;

        // c_X: both pulses present, phase difference restricted to the slice
        let (x0, x1) = phase_average(theta, |d| {
            let (m0, m1) = detector_means(half, half, d, eta, v);
            effective(m0, m1, p_d)
        });
        // Set C: one pulse, no interference
        let (c0, c1) = {
            let (m0, m1) = detector_means(half, 0.0, 0.0, eta, v);
            effective(m0, m1, p_d)
        };
        // Both sent in Z: phase difference uniform over the circle
        let (b0, b1) = phase_average(PI, |d| {
            let (m0, m1) = detector_means(half, half, d, eta, v);
            effective(m0, m1, p_d)
        });
        Ok(ObservableModel {
            acceptance: theta / PI,
            x0,
            x1,
            c0,
            c1,
            both: b0 + b1,
            dark: p_d * (1.0 - p_d),
        })
    }

    /// Expected tallies for the given send and basis probabilities. `mu`,
    /// `lambda` and the channel are those the model was built with.
    pub fn counts(&self, n_windows: u64, epsilon: f64, p_x: f64) -> ObservedCounts {
        let n = n_windows as f64;
        let p_xx = p_x * p_x;
        let p_zz = (1.0 - p_x) * (1.0 - p_x);
        let eps = epsilon;
        let n_c = n * p_zz * 2.0 * eps * (1.0 - eps);
        let n_both = n * p_zz * eps * eps;
        let n_00 = n * p_zz * (1.0 - eps) * (1.0 - eps);
        let both_eff = n_both * self.both;
        let k00 = n_00 * self.dark;
        let n_z0 = n_c * self.c0;
        let n_z1 = n_c * self.c1;
        ObservedCounts {
            windows: n,
            n_x: n * p_xx * self.acceptance,
            n_z: n_c,
            n_x0: n * p_xx * self.x0,
            n_x1: n * p_xx * self.x1,
            n_z0,
            n_z1,
            n_t: n_z0 + n_z1 + both_eff + 2.0 * k00,
            n_err_z: both_eff + 2.0 * k00,
            n_c,
            n_00,
            k00_0: k00,
            k00_1: k00,
        }
    }
}

/// Expected tallies over `params.n_windows` windows.
pub fn expected_observables(params: &ProtocolParams, ch: &ChannelModel) -> Result<ObservedCounts> {
    params.validate()?;
    let model = ObservableModel::new(params.mu, params.lambda, ch)?;
    Ok(model.counts(params.n_windows, params.epsilon, params.p_x))
}

/// Expected single-photon tallies for a Poisson source, the mean of what
/// [`super::monte_carlo_observables`] records as ground truth.
pub fn expected_ground_truth(params: &ProtocolParams, ch: &ChannelModel) -> Result<GroundTruth> {
    params.validate()?;
    ch.validate()?;
    let n = params.n_windows as f64;
    let eta = ch.arm_transmittance()?;
    let v = ch.visibility();
    let p_d = ch.p_d;
    let theta = slice_half_width(params.lambda)?;
    let dark_alone = p_d * (1.0 - p_d);

    // One photon: reaches D0 w.p. eta q0, D1 w.p. eta q1, is lost otherwise.
    let one_photon = |q0: f64| {
        let q1 = 1.0 - q0;
        let d0 = eta * q0 * (1.0 - p_d) + (1.0 - eta) * dark_alone;
        let d1 = eta * q1 * (1.0 - p_d) + (1.0 - eta) * dark_alone;
        (d0, d1)
    };

    let p_xx = params.p_x * params.p_x;
    let x_pairs = n * p_xx * theta / PI;
    let x_single = x_pairs * params.mu * (-params.mu).exp();
    let (x0, x1) = phase_average(theta, |d| one_photon(0.5 * (1.0 + v * d.cos())));
    let acceptance = theta / PI;

    let eps = params.epsilon;
    let n_c = n * params.p_z() * params.p_z() * 2.0 * eps * (1.0 - eps);
    let half = 0.5 * params.mu;
    let z_single = n_c * half * (-half).exp();
    let (z0, z1) = one_photon(0.5);

    Ok(GroundTruth {
        x_single_pulses: x_single,
        x_single_d0: x_single * x0 / acceptance,
        x_single_d1: x_single * x1 / acceptance,
        z_single_pulses: z_single,
        z_single_d0: z_single * z0,
        z_single_d1: z_single * z1,
        true_n1: z_single * (z0 + z1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LossLaw;

    #[test]
    fn nothing_sent_and_no_darks_gives_empty_z() {
        let ch = ChannelModel {
            p_d: 0.0,
            ..ChannelModel::paper(20.0, 0.1)
        };
        let params = ProtocolParams::new(0.3, 1e-300, 0.2, 0.5);
        let c = expected_observables(&params, &ch).unwrap();
        assert!(c.n_z0 + c.n_z1 + c.n_t + c.n_err_z + c.k00_0 + c.k00_1 < 1e-250);
        assert!(c.n_x0 > 0.0);
    }

    #[test]
    fn x_error_vanishes_with_narrow_slice() {
        let ch = ChannelModel {
            distance_km: 0.0,
            loss: LossLaw::PAPER,
            eta_d: 1.0,
            p_d: 0.0,
            e_a: 0.0,
        };
        let mut last = f64::INFINITY;
        for lambda in [1.0, 0.3, 0.05, 1e-3, 1e-6] {
            let c =
                expected_observables(&ProtocolParams::new(0.01, 0.1, 0.3, lambda), &ch).unwrap();
            let err = c.n_x1 / (c.n_x0 + c.n_x1);
            // Single photons err with sin^2(d/2); the slice average bounds it.
            let theta = (1.0 - lambda).acos();
            assert!(err <= (theta / 2.0).sin().powi(2) + 1e-12);
            assert!(err <= last);
            last = err;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn invariants_hold_on_expectations() {
        for &l in &[0.0, 50.0, 200.0, 400.0] {
            for &ea in &[0.0, 0.1, 0.3, 0.5] {
                let c = expected_observables(
                    &ProtocolParams::new(0.4, 0.05, 0.2, 0.3),
                    &ChannelModel::paper(l, ea),
                )
                .unwrap();
                c.check_invariants(1e-6).unwrap();
            }
        }
    }

    #[test]
    fn z_error_rate_tracks_epsilon() {
        // At high loss both-sent windows click twice as often as set-C
        // windows, so E_Z -> eps.
        let params = ProtocolParams::new(0.01, 0.02, 0.1, 0.5);
        let c = expected_observables(&params, &ChannelModel::paper(300.0, 0.1)).unwrap();
        assert!((c.z_error_rate() - 0.02).abs() < 2e-4);
    }

    #[test]
    fn ground_truth_consistency() {
        let params = ProtocolParams::new(0.4, 0.05, 0.2, 0.3);
        let ch = ChannelModel::paper(50.0, 0.1);
        let gt = expected_ground_truth(&params, &ch).unwrap();
        let obs = expected_observables(&params, &ch).unwrap();
        assert!(gt.x_single_d0 <= obs.n_x0 && gt.x_single_d1 <= obs.n_x1);
        assert!(gt.z_single_d0 <= obs.n_z0 && gt.z_single_d1 <= obs.n_z1);
        assert!((gt.true_n1 - gt.z_single_d0 - gt.z_single_d1).abs() < 1e-6);
        // single-photon error rate = slice average of (1 - V cos d) / 2
        let theta = (1.0 - 0.3f64).acos();
        let expected = 0.5 * (1.0 - 0.8 * theta.sin() / theta);
        assert!((gt.x_single_error_rate() - expected).abs() < 1e-9);
    }
}

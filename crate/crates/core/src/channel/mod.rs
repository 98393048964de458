//! Physical model from the two sources to Charlie's announcement: symmetric
//! lossy arms, a balanced beamsplitter with imperfect visibility and two
//! threshold detectors with dark counts.

mod analytic;
mod monte_carlo;

pub use analytic::{expected_ground_truth, expected_observables, ObservableModel};
pub use monte_carlo::{monte_carlo_observables, MonteCarlo, PhotonStatistics, BATCH_WINDOWS};

use crate::error::{domain, Result};
use crate::math::{channel_transmittance, LossLaw, Probability};

/// Detector efficiency used for the headline simulations.
pub const PAPER_DETECTOR_EFFICIENCY: f64 = 0.8;
/// Dark-count probability per detector per window.
pub const PAPER_DARK_COUNT: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    /// Alice-Bob distance; Charlie sits in the middle.
    pub distance_km: f64,
    pub loss: LossLaw,
    /// Detector efficiency.
    pub eta_d: f64,
    /// Dark-count probability per detector per window.
    pub p_d: f64,
    /// Single-photon interference misalignment error.
    pub e_a: f64,
}

impl ChannelModel {
    /// 0.1 dB/km fiber, 80% detectors, 1e-11 dark counts.
    pub fn paper(distance_km: f64, e_a: f64) -> Self {
        ChannelModel {
            distance_km,
            loss: LossLaw::PAPER,
            eta_d: PAPER_DETECTOR_EFFICIENCY,
            p_d: PAPER_DARK_COUNT,
            e_a,
        }
    }

    pub fn at_distance(self, distance_km: f64) -> Self {
        ChannelModel {
            distance_km,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(domain("L", self.distance_km, "finite and >= 0"));
        }
        for (name, v) in [("eta_d", self.eta_d), ("p_d", self.p_d), ("E_a", self.e_a)] {
            Probability::new(v).map_err(|_| domain(name, v, "[0, 1]"))?;
        }
        if !(self.loss.exponent_per_km >= 0.0) {
            return Err(domain(
                "loss_exponent_per_km",
                self.loss.exponent_per_km,
                ">= 0",
            ));
        }
        Ok(())
    }

    /// Per-arm transmittance including the detector, `eta_d sqrt(eta_ch)`.
    pub fn arm_transmittance(&self) -> Result<f64> {
        let eta = channel_transmittance(self.distance_km, self.loss)?;
        Ok(self.eta_d * eta.get().sqrt())
    }

    /// Interference visibility `V = 1 - 2 E_a`.
    #[inline]
    pub fn visibility(&self) -> f64 {
        1.0 - 2.0 * self.e_a
    }
}

/// Mean photon numbers arriving at `(D0, D1)`.
#[inline]
pub(crate) fn detector_means(
    i_a: f64,
    i_b: f64,
    delta: f64,
    eta_arm: f64,
    visibility: f64,
) -> (f64, f64) {
    let common = 0.5 * (i_a + i_b) * eta_arm;
    let cross = visibility * (i_a * i_b).sqrt() * eta_arm * delta.cos();
    ((common + cross).max(0.0), (common - cross).max(0.0))
}

#[inline]
pub(crate) fn click_from_mean(mean: f64, p_d: f64) -> f64 {
    // 1 - (1 - p_d) e^{-m}, rearranged to keep precision for tiny m
    -(-mean).exp_m1() + p_d * (-mean).exp()
}

/// Click probabilities of `(D0, D1)` for source intensities `i_a`, `i_b`
/// (before loss) interfering with relative phase `delta`.
pub fn click_probabilities(
    i_a: f64,
    i_b: f64,
    delta: f64,
    ch: &ChannelModel,
) -> Result<(Probability, Probability)> {
    if !(i_a >= 0.0) {
        return Err(domain("I_A", i_a, ">= 0"));
    }
    if !(i_b >= 0.0) {
        return Err(domain("I_B", i_b, ">= 0"));
    }
    ch.validate()?;
    let (m0, m1) = detector_means(i_a, i_b, delta, ch.arm_transmittance()?, ch.visibility());
    Ok((
        Probability::saturating(click_from_mean(m0, ch.p_d)),
        Probability::saturating(click_from_mean(m1, ch.p_d)),
    ))
}

/// Measurable tallies over `windows` windows. Carried as reals so analytic
/// expectations and Monte Carlo integers share one type.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservedCounts {
    pub windows: f64,
    /// Slice-accepted X-X pairs (the pool `c_X`).
    pub n_x: f64,
    /// Set-C pulses available as the pool `c_Z`.
    pub n_z: f64,
    /// Effective D0-only / D1-only events from `c_X`.
    pub n_x0: f64,
    pub n_x1: f64,
    /// Effective D0-only / D1-only events from `c_Z`.
    pub n_z0: f64,
    pub n_z1: f64,
    /// All effective Z-Z events.
    pub n_t: f64,
    /// Effective Z-Z events whose bits disagree (both sent or neither sent).
    pub n_err_z: f64,
    /// Total set-C windows.
    pub n_c: f64,
    /// Neither-sent Z-Z windows.
    pub n_00: f64,
    pub k00_0: f64,
    pub k00_1: f64,
}

impl ObservedCounts {
    pub const FIELD_NAMES: [&'static str; 12] = [
        "N_X", "N_Z", "n_X0", "n_X1", "n_Z0", "n_Z1", "n_t", "n_err_Z", "N_C", "N_00", "k_00_0",
        "k_00_1",
    ];

    /// Tallies in [`Self::FIELD_NAMES`] order.
    pub fn tallies(&self) -> [f64; 12] {
        [
            self.n_x,
            self.n_z,
            self.n_x0,
            self.n_x1,
            self.n_z0,
            self.n_z1,
            self.n_t,
            self.n_err_z,
            self.n_c,
            self.n_00,
            self.k00_0,
            self.k00_1,
        ]
    }

    /// Observed Z-basis bit error rate.
    pub fn z_error_rate(&self) -> f64 {
        if self.n_t > 0.0 {
            self.n_err_z / self.n_t
        } else {
            0.0
        }
    }

    /// Checks the ordering relations between tallies, with `slack` absolute
    /// tolerance for real-valued expectations.
    pub fn check_invariants(&self, slack: f64) -> Result<(), String> {
        let t = self.tallies();
        if let Some((name, v)) = Self::FIELD_NAMES
            .iter()
            .zip(t)
            .find(|(_, v)| !(*v >= -slack))
        {
            return Err(format!("{name} = {v} is negative"));
        }
        let rel = [
            (self.n_x0 + self.n_x1, self.n_x, "n_X0 + n_X1 <= N_X"),
            (self.n_z0 + self.n_z1, self.n_z, "n_Z0 + n_Z1 <= N_Z"),
            (self.n_err_z, self.n_t, "n_err_Z <= n_t"),
            (self.k00_0 + self.k00_1, self.n_00, "k_00 <= N_00"),
        ];
        for (lhs, rhs, what) in rel {
            if lhs > rhs + slack {
                return Err(format!("{what} violated: {lhs} > {rhs}"));
            }
        }
        Ok(())
    }
}

/// Photon-number-resolved tallies only a simulator can know.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundTruth {
    /// Slice-accepted X-X pairs carrying exactly one photon.
    pub x_single_pulses: f64,
    /// D0-only / D1-only effective events from single-photon pairs in `c_X`.
    pub x_single_d0: f64,
    pub x_single_d1: f64,
    /// Set-C pulses carrying exactly one photon.
    pub z_single_pulses: f64,
    /// D0-only / D1-only effective events from single-photon set-C pulses.
    pub z_single_d0: f64,
    pub z_single_d1: f64,
    /// Effective set-C events from single-photon pulses.
    pub true_n1: f64,
}

impl GroundTruth {
    /// Restricts the tallies to random subsets holding the given fractions of
    /// `c_X` and `c_Z` (asymptotic expectation of a uniform subsample).
    pub fn matched(&self, x_fraction: f64, z_fraction: f64) -> SinglePhotonTallies {
        SinglePhotonTallies {
            plus0: self.x_single_d0 * x_fraction,
            plus1: self.x_single_d1 * x_fraction,
            z0: self.z_single_d0 * z_fraction,
            z1: self.z_single_d1 * z_fraction,
        }
    }

    /// X-basis error rate of the single-photon pairs, measured directly.
    pub fn x_single_error_rate(&self) -> f64 {
        let total = self.x_single_d0 + self.x_single_d1;
        if total > 0.0 {
            self.x_single_d1 / total
        } else {
            0.0
        }
    }
}

/// Single-photon counts on matched subsets `F_+` (from `c_X`) and `F_Z` (from
/// `c_Z`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SinglePhotonTallies {
    /// Correct (D0) clicks from `F_+`.
    pub plus0: f64,
    /// Wrong (D1) clicks from `F_+`.
    pub plus1: f64,
    pub z0: f64,
    pub z1: f64,
}

impl SinglePhotonTallies {
    /// Wrong clicks of the virtual `|x->` half of `F_Z`.
    pub fn minus0(&self) -> f64 {
        self.z0 - self.plus0
    }

    pub fn z_total(&self) -> f64 {
        self.z0 + self.z1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ideal(distance_km: f64) -> ChannelModel {
        ChannelModel {
            distance_km,
            loss: LossLaw::PAPER,
            eta_d: 1.0,
            p_d: 0.0,
            e_a: 0.0,
        }
    }

    #[test]
    fn vacuum_clicks_are_dark_counts() {
        let ch = ChannelModel::paper(30.0, 0.1);
        let (p0, p1) = click_probabilities(0.0, 0.0, 0.4, &ch).unwrap();
        assert!((p0.get() - 1e-11).abs() < 1e-24);
        assert!((p1.get() - 1e-11).abs() < 1e-24);
    }

    #[test]
    fn perfect_destructive_interference() {
        let mu = 0.4;
        let (p0, p1) = click_probabilities(mu / 2.0, mu / 2.0, 0.0, &ideal(50.0)).unwrap();
        assert_eq!(p1.get(), 0.0);
        assert!(p0.get() > 0.0);
    }

    #[test]
    fn single_sender_splits_evenly() {
        let ch = ChannelModel::paper(80.0, 0.2);
        let mu = 0.3;
        let eta = 0.8 * 10f64.powf(-0.4);
        let m = mu / 4.0 * eta;
        let expected = 1.0 - (1.0 - 1e-11) * (-m).exp();
        for delta in [0.0, 1.0, 3.0] {
            let (p0, p1) = click_probabilities(mu / 2.0, 0.0, delta, &ch).unwrap();
            assert!((p0.get() - expected).abs() < 1e-15);
            assert!((p1.get() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_negative_intensity() {
        let ch = ChannelModel::paper(0.0, 0.0);
        assert!(click_probabilities(-0.1, 0.0, 0.0, &ch).is_err());
        assert!(click_probabilities(0.0, -0.1, 0.0, &ch).is_err());
    }

    #[test]
    fn misalignment_sets_single_photon_error() {
        // A weak pulse pair at zero phase: the wrong-detector fraction of the
        // arriving light equals E_a.
        let (m0, m1) = detector_means(0.5, 0.5, 0.0, 1.0, 1.0 - 2.0 * 0.13);
        assert!((m1 / (m0 + m1) - 0.13).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn energy_conservation(ia in 0.0..2.0f64, ib in 0.0..2.0f64, d in -7.0..7.0f64, eta in 0.0..1.0f64, v in -1.0..1.0f64) {
            let (m0, m1) = detector_means(ia, ib, d, eta, v);
            prop_assert!((m0 + m1 - (ia + ib) * eta).abs() < 1e-12);
            let (s0, s1) = detector_means(ia, ib, d + std::f64::consts::PI, eta, v);
            prop_assert!((s0 - m1).abs() < 1e-12 && (s1 - m0).abs() < 1e-12);
        }

        #[test]
        fn clicks_bounded_and_monotone(
            ia in 0.0..2.0f64, ib in 0.0..2.0f64, d in -7.0..7.0f64,
            bump in 0.0..0.5f64, pd in 0.0..0.1f64, l in 0.0..300.0f64, ea in 0.0..0.5f64,
        ) {
            let ch = ChannelModel { p_d: pd, ..ChannelModel::paper(l, ea) };
            let (p0, p1) = click_probabilities(ia, ib, d, &ch).unwrap();
            prop_assert!(p0.get() <= 1.0 && p1.get() <= 1.0);
            let darker = ChannelModel { p_d: pd + bump * 0.1, ..ch };
            let (q0, q1) = click_probabilities(ia, ib, d, &darker).unwrap();
            prop_assert!(q0.get() >= p0.get() - 1e-15 && q1.get() >= p1.get() - 1e-15);
            // With a second pulse present, destructive interference can lower
            // a port as intensity grows, so monotonicity is checked per sender.
            let (r0, r1) = click_probabilities(ia + bump, 0.0, d, &ch).unwrap();
            let (s0, s1) = click_probabilities(ia, 0.0, d, &ch).unwrap();
            prop_assert!(r0.get() >= s0.get() - 1e-15 && r1.get() >= s1.get() - 1e-15);
        }
    }
}

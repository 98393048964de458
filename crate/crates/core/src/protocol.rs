//! Source-side protocol: window sampling, classification, phase-slice
//! post-selection, bit mapping and the source-equivalence checks.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use crate::density::{density_distance, z0, z1, DensityOperator2Mode, Ket};
use crate::error::{domain, Error, Result};
use crate::math::Probability;

/// Error-correction inefficiency used throughout the numerical results.
pub const DEFAULT_EC_EFFICIENCY: f64 = 1.16;

/// Window count used by the analytic (asymptotic) pipeline. Large enough that
/// integer rounding of the matched subsets is negligible.
pub const DEFAULT_WINDOWS: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Mean photon number of the pulse pair; each side emits `mu / 2`.
    pub mu: f64,
    /// Probability that a Z-window party sends its pulse.
    pub epsilon: f64,
    /// Per-side probability of an X-window (`p_z = 1 - p_x`).
    pub p_x: f64,
    /// Phase-slice half-width parameter, `1 - cos(dA - dB) <= lambda`.
    pub lambda: f64,
    /// Error-correction efficiency.
    pub f: f64,
    pub n_windows: u64,
    /// Upper bound on the pulse-pair intensity under source fluctuation.
    pub mu_max: Option<f64>,
    /// Fraction of Z-windows disclosed for parameter estimation.
    pub test_fraction: f64,
}

impl ProtocolParams {
    pub fn new(mu: f64, epsilon: f64, p_x: f64, lambda: f64) -> Self {
        ProtocolParams {
            mu,
            epsilon,
            p_x,
            lambda,
            f: DEFAULT_EC_EFFICIENCY,
            n_windows: DEFAULT_WINDOWS,
            mu_max: None,
            test_fraction: 0.0,
        }
    }

    pub fn with_windows(mut self, n_windows: u64) -> Self {
        self.n_windows = n_windows;
        self
    }

    pub fn with_mu_max(mut self, mu_max: Option<f64>) -> Self {
        self.mu_max = mu_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(domain("mu", self.mu, "> 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(domain("epsilon", self.epsilon, "(0, 1]"));
        }
        if !(0.0..1.0).contains(&self.p_x) {
            return Err(domain("p_x", self.p_x, "[0, 1)"));
        }
        check_lambda(self.lambda)?;
        if !(self.f >= 1.0 && self.f.is_finite()) {
            return Err(domain("f", self.f, ">= 1"));
        }
        if self.n_windows == 0 {
            return Err(domain("n_windows", 0.0, ">= 1"));
        }
        if let Some(m) = self.mu_max {
            if !(m >= self.mu && m.is_finite()) {
                return Err(domain("mu_max", m, ">= mu"));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(domain("test_fraction", self.test_fraction, "[0, 1)"));
        }
        Ok(())
    }

    /// Intensity the worst-case bounds assume for the source.
    pub fn source_mu(&self) -> f64 {
        self.mu_max.unwrap_or(self.mu)
    }

    pub fn p_z(&self) -> f64 {
        1.0 - self.p_x
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 2.0 {
        Ok(())
    } else {
        Err(domain("lambda", lambda, "(0, 2]"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowOutcome {
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    pub alice_sent: bool,
    pub bob_sent: bool,
    /// Global phases of the two weak coherent pulses.
    pub rho_a: f64,
    pub rho_b: f64,
    /// Offsets between each party's signal laser and reference laser.
    pub delta_a: f64,
    pub delta_b: f64,
}

impl WindowOutcome {
    /// Relative phase of the two pulses at the beamsplitter once the reference
    /// light has been used for compensation.
    #[inline]
    pub fn phase_difference(&self) -> f64 {
        self.delta_a - self.delta_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowClass {
    XxPair,
    SetCAliceSent,
    SetCBobSent,
    ZzBothSent,
    ZzNoneSent,
    MixedBasis,
}

impl WindowClass {
    pub const ALL: [WindowClass; 6] = [
        WindowClass::XxPair,
        WindowClass::SetCAliceSent,
        WindowClass::SetCBobSent,
        WindowClass::ZzBothSent,
        WindowClass::ZzNoneSent,
        WindowClass::MixedBasis,
    ];

    pub fn is_set_c(self) -> bool {
        matches!(self, WindowClass::SetCAliceSent | WindowClass::SetCBobSent)
    }

    pub fn is_zz(self) -> bool {
        !matches!(self, WindowClass::XxPair | WindowClass::MixedBasis)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Draws one window. Consumes exactly six uniforms plus one per Z-side send
/// decision.
pub fn sample_window<R: Rng + ?Sized>(params: &ProtocolParams, rng: &mut R) -> WindowOutcome {
    let side = |rng: &mut R| {
        if rng.gen::<f64>() < params.p_x {
            (Basis::X, true)
        } else {
            (Basis::Z, rng.gen::<f64>() < params.epsilon)
        }
    };
    let (alice_basis, alice_sent) = side(rng);
    let (bob_basis, bob_sent) = side(rng);
    WindowOutcome {
        alice_basis,
        bob_basis,
        alice_sent,
        bob_sent,
        rho_a: rng.gen::<f64>() * TAU,
        rho_b: rng.gen::<f64>() * TAU,
        delta_a: rng.gen::<f64>() * TAU,
        delta_b: rng.gen::<f64>() * TAU,
    }
}

pub fn classify_window(w: &WindowOutcome) -> WindowClass {
    match (w.alice_basis, w.bob_basis) {
        (Basis::X, Basis::X) => WindowClass::XxPair,
        (Basis::Z, Basis::Z) => match (w.alice_sent, w.bob_sent) {
            (true, false) => WindowClass::SetCAliceSent,
            (false, true) => WindowClass::SetCBobSent,
            (true, true) => WindowClass::ZzBothSent,
            (false, false) => WindowClass::ZzNoneSent,
        },
        _ => WindowClass::MixedBasis,
    }
}

/// X-window post-selection: keep the pair iff `1 - cos(dA - dB) <= |lambda|`.
#[inline]
pub fn phase_slice_accept(delta_a: f64, delta_b: f64, lambda: f64) -> bool {
    1.0 - (delta_a - delta_b).cos() <= lambda.abs()
}

/// Half-width `theta` of the accepted arc `|dA - dB| <= theta`.
pub fn slice_half_width(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok((1.0 - lambda).acos())
}

/// Measure of uniformly distributed phase differences that pass the slice.
pub fn slice_acceptance_probability(lambda: f64) -> Result<Probability> {
    Ok(Probability::saturating(slice_half_width(lambda)? / PI))
}

/// Z-basis bit for an effective event. Alice reads "sent" as 1, Bob reads
/// "sent" as 0, so set-C events give agreeing bits.
pub fn bit_value(w: &WindowOutcome, party: Party) -> Result<u8> {
    if w.alice_basis != Basis::Z || w.bob_basis != Basis::Z {
        return Err(Error::Contract(
            "bit values exist only for Z-Z windows".into(),
        ));
    }
    Ok(match party {
        Party::Alice => u8::from(w.alice_sent),
        Party::Bob => u8::from(!w.bob_sent),
    })
}

/// Outcome of [`check_source_equivalence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceCheck {
    /// Trace distance between the X-mixture and the Z-mixture.
    pub trace_distance: f64,
    /// Largest deviation of the phase map from a unitary taking the ideal
    /// `|x+>` onto the real one.
    pub map_deviation: f64,
}

/// Checks that `1/2(|x+><x+| + |x-><x-|)` equals `1/2(|z0><z0| + |z1><z1|)`
/// for `|x+-> = (e^{i rho_B}|z0> +- e^{i rho_A}|z1>)/sqrt 2`, and that the map
/// `|z_k> -> e^{i d_k}|z_k>` is unitary and produces `|x+>` from the ideal
/// state.
pub fn check_source_equivalence(rho_a: f64, rho_b: f64) -> EquivalenceCheck {
    let alpha = Complex64::from_polar(FRAC_1_SQRT_2, rho_b);
    let beta = Complex64::from_polar(FRAC_1_SQRT_2, rho_a);
    let trace_distance = x_mixture_distance(alpha, beta)
        .expect("unit-norm kets always form valid density operators");

    // Phase map diag(e^{i rho_B}, e^{i rho_A}); U^dagger U - I.
    let u = [
        Complex64::from_polar(1.0, rho_b),
        Complex64::from_polar(1.0, rho_a),
    ];
    let unitarity = u
        .iter()
        .map(|d| (d.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max);
    let ideal = FRAC_1_SQRT_2;
    let mapped = [u[0] * ideal, u[1] * ideal];
    let target = [alpha, beta];
    let image = mapped
        .iter()
        .zip(target.iter())
        .map(|(m, t)| (m - t).norm())
        .fold(0.0, f64::max);

    EquivalenceCheck {
        trace_distance,
        map_deviation: unitarity.max(image),
    }
}

/// Trace distance between the equal mixture of `alpha|z0> +- beta|z1>` and the
/// equal mixture of `|z0>`, `|z1>`. Zero iff `|alpha| = |beta|`.
pub fn x_mixture_distance(alpha: Complex64, beta: Complex64) -> Result<f64> {
    let plus: Ket = [alpha, beta];
    let minus: Ket = [alpha, -beta];
    let x_mix = DensityOperator2Mode::mixture(&[
        (0.5, DensityOperator2Mode::pure(plus)?),
        (0.5, DensityOperator2Mode::pure(minus)?),
    ])?;
    let z_mix = DensityOperator2Mode::mixture(&[
        (0.5, DensityOperator2Mode::pure(z0())?),
        (0.5, DensityOperator2Mode::pure(z1())?),
    ])?;
    Ok(density_distance(&x_mix, &z_mix))
}

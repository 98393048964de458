//! Scalar numerics shared by the rest of the crate: binary entropy, Poisson
//! photon statistics and fiber transmittance.

use std::fmt;

use crate::error::{domain, Result};

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(domain("probability", value, "[0, 1]"))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to zero.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Binary Shannon entropy in bits, `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("x", x, "[0, 1]"));
    }
    Ok(binary_entropy_unchecked(x))
}

#[inline]
pub(crate) fn binary_entropy_unchecked(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// `e^{-mu} mu^k / k!`, evaluated in log space so large `k` does not overflow.
pub fn poisson_pmf(k: u32, mu: f64) -> Result<Probability> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(domain("mu", mu, "finite and >= 0"));
    }
    if mu == 0.0 {
        return Ok(if k == 0 {
            Probability::ONE
        } else {
            Probability::ZERO
        });
    }
    let log_p = -mu + f64::from(k) * mu.ln() - ln_factorial(k);
    Ok(Probability::saturating(log_p.exp()))
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| f64::from(i).ln()).sum()
}

/// Fraction of a pulse's multi-photon weight, `1 - e^{-mu} - mu e^{-mu}`.
///
/// Written with `exp_m1` so it stays accurate for tiny `mu`, where the naive
/// form cancels catastrophically.
#[inline]
pub fn multi_photon_probability(mu: f64) -> f64 {
    // 1 - e^{-mu}(1 + mu) = -expm1(-mu) - mu e^{-mu}
    let value = -(-mu).exp_m1() - mu * (-mu).exp();
    value.max(0.0)
}

/// Exponential attenuation law `eta = 10^{-c L}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossLaw {
    /// Decadic exponent per kilometre (`0.02` is 0.2 dB/km).
    pub exponent_per_km: f64,
}

impl LossLaw {
    /// `eta = 10^{-L / 100 km}`, the 0.1 dB/km channel used for the headline
    /// distance claims.
    pub const PAPER: LossLaw = LossLaw {
        exponent_per_km: 0.01,
    };

    /// 0.2 dB/km telecom fiber.
    pub const STANDARD_FIBER: LossLaw = LossLaw {
        exponent_per_km: 0.02,
    };

    pub fn from_db_per_km(db: f64) -> Self {
        LossLaw {
            exponent_per_km: db / 10.0,
        }
    }

    pub fn db_per_km(self) -> f64 {
        self.exponent_per_km * 10.0
    }
}

impl Default for LossLaw {
    fn default() -> Self {
        LossLaw::STANDARD_FIBER
    }
}

/// End-to-end channel transmittance over `distance_km`.
pub fn channel_transmittance(distance_km: f64, law: LossLaw) -> Result<Probability> {
    if !(distance_km >= 0.0) || !distance_km.is_finite() {
        return Err(domain("L", distance_km, "finite and >= 0"));
    }
    if !(law.exponent_per_km >= 0.0) {
        return Err(domain("loss_exponent_per_km", law.exponent_per_km, ">= 0"));
    }
    Probability::new(10f64.powf(-law.exponent_per_km * distance_km))
}

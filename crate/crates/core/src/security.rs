//! Worst-case estimation chain from observed tallies to final key length.
//!
//! Multi-photon pulses are conceded to the adversary: every term that cannot
//! be attributed to a single photon is bounded by the largest contribution it
//! could make, using only the source photon-number statistics and the
//! measured vacuum yields.

use std::fmt;

use crate::channel::{ObservedCounts, SinglePhotonTallies};
use crate::error::{domain, Error, Result};
use crate::math::{binary_entropy_unchecked, multi_photon_probability, Probability};
use crate::protocol::ProtocolParams;

/// Tallies restricted to the matched subsets `c_X` and `c_Z`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatchedCounts {
    pub n_x: f64,
    pub n_z: f64,
    pub n_x0: f64,
    pub n_x1: f64,
    pub n_z0: f64,
    pub n_z1: f64,
}

/// Vacuum yields `(Y00^0, Y00^1)`: probabilities that only D0 (only D1)
/// clicks when neither party sent light.
pub fn vacuum_yields(counts: &ObservedCounts) -> Result<(Probability, Probability)> {
    if !(counts.n_00 > 0.0) {
        return Err(Error::NoVacuumWindows);
    }
    Ok((
        Probability::new(counts.k00_0 / counts.n_00)?,
        Probability::new(counts.k00_1 / counts.n_00)?,
    ))
}

/// Sizes of the matched subsets. `c_Z` must hold twice as many single-photon
/// pulses as `c_X`: `N_Z (mu/2) e^{-mu/2} = 2 N_X mu e^{-mu}`, i.e.
/// `N_Z = 4 N_X e^{-mu/2}`.
pub fn subset_sizes(avail_x: u64, avail_z: u64, mu: f64) -> Result<(u64, u64)> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(domain("mu", mu, "> 0"));
    }
    if avail_x == 0 {
        return Err(Error::EmptyPool("X"));
    }
    if avail_z == 0 {
        return Err(Error::EmptyPool("Z"));
    }
    let ratio = 4.0 * (-0.5 * mu).exp();
    let z_for = |x: u64| (ratio * x as f64).round() as u64;
    let n_z = z_for(avail_x);
    if n_z <= avail_z {
        return Ok((avail_x, n_z));
    }
    let n_x = (avail_z as f64 / ratio).floor() as u64;
    if n_x == 0 {
        return Err(Error::EmptyPool("X (after matching)"));
    }
    Ok((n_x, z_for(n_x).min(avail_z)))
}

/// Lower bound on correct (D0) single-photon clicks in `c_X`.
pub fn bound_n_plus0(m: &MatchedCounts, y00_0: f64, mu: f64) -> f64 {
    let vacuum = y00_0 * m.n_x * (-mu).exp();
    let multi = m.n_x * multi_photon_probability(mu);
    (m.n_x0 - vacuum - multi).max(0.0)
}

/// Upper bound on wrong (D1) single-photon clicks in `c_X`.
pub fn bound_n_plus1(m: &MatchedCounts, y00_1: f64, mu: f64) -> f64 {
    (m.n_x1 - y00_1 * m.n_x * (-mu).exp()).max(0.0)
}

/// Lower bound on single-photon clicks in `c_Z`; `y00` is the total vacuum
/// yield. Each set-C pulse has intensity `mu / 2`.
pub fn bound_n_tilde_z(m: &MatchedCounts, y00: f64, mu: f64) -> f64 {
    let half = 0.5 * mu;
    let multi = m.n_z * multi_photon_probability(half);
    let vacuum = y00 * m.n_z * (-half).exp();
    (m.n_z0 + m.n_z1 - multi - vacuum).max(0.0)
}

/// Upper bound on the phase-flip error rate of the untagged bits.
pub fn bound_e1ph(m: &MatchedCounts, n_plus0_l: f64, n_tilde_z_l: f64) -> Result<Probability> {
    if !(n_tilde_z_l > 0.0) {
        return Err(Error::DivisionByZero(
            "e1ph upper bound (no single-photon Z counts)",
        ));
    }
    Ok(Probability::saturating(
        (m.n_x1 + m.n_z0 - n_plus0_l) / n_tilde_z_l,
    ))
}

/// Phase-flip error rate evaluated on exact single-photon tallies.
pub fn single_photon_e1ph(t: &SinglePhotonTallies) -> Result<Probability> {
    let total = t.z_total();
    if !(total > 0.0) {
        return Err(Error::DivisionByZero("single-photon e1ph"));
    }
    Ok(Probability::saturating((t.plus1 + t.minus0()) / total))
}

/// Extrapolates the single-photon yield of `c_Z` to the whole of set C.
pub fn bound_n1(n_tilde_z_l: f64, n_z: f64, n_c: f64) -> Result<f64> {
    if !(n_z > 0.0) {
        return Err(Error::DivisionByZero("n1 (empty c_Z)"));
    }
    Ok(n_tilde_z_l / n_z * n_c)
}

/// Final key length `n1 (1 - H(e1ph)) - n_t f H(E_Z)`, clamped at zero.
///
/// `e1ph` is an upper bound, so the privacy term uses `H(min(e1ph, 1/2))`,
/// the worst entropy compatible with it.
pub fn key_length(n1: f64, e1ph: f64, n_t: f64, ez: f64, f: f64) -> f64 {
    let phase = binary_entropy_unchecked(e1ph.clamp(0.0, 0.5));
    let leak = if ez > 0.0 {
        n_t * f * binary_entropy_unchecked(ez.min(1.0))
    } else {
        0.0
    };
    (n1 * (1.0 - phase) - leak).max(0.0)
}

/// Deliberate corruption of the estimation chain, for exercising the
/// soundness checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BoundFault {
    #[default]
    None,
    /// Inflate the correct-click lower bound `n_plus0_L` by this relative
    /// amount, which shrinks the phase-error numerator.
    InflateCorrectClicks(f64),
}

/// Why a key rate was forced to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collapse {
    /// The single-photon lower bound on `c_Z` reached zero.
    NoSinglePhotonCounts,
}

impl fmt::Display for Collapse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Collapse::NoSinglePhotonCounts => {
                f.write_str("single-photon Z-count lower bound collapsed to zero")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityBounds {
    pub y00_0: f64,
    pub y00_1: f64,
    /// Matched subset sizes.
    pub n_x: u64,
    pub n_z: u64,
    /// Fractions of the `c_X` / `c_Z` pools kept by the matching.
    pub x_fraction: f64,
    pub z_fraction: f64,
    pub n_plus0_l: f64,
    pub n_plus1_u: f64,
    pub n_tilde_z_l: f64,
    pub e1ph_u: f64,
    pub n1_l: f64,
    pub n_t: f64,
    pub ez: f64,
    pub n_f: f64,
    /// Final bits per window.
    pub rate: f64,
    pub collapse: Option<Collapse>,
}

pub fn analyze(counts: &ObservedCounts, params: &ProtocolParams) -> Result<SecurityBounds> {
    analyze_with_fault(counts, params, BoundFault::None)
}

pub fn analyze_with_fault(
    counts: &ObservedCounts,
    params: &ProtocolParams,
    fault: BoundFault,
) -> Result<SecurityBounds> {
    params.validate()?;
    if !(counts.windows > 0.0) {
        return Err(domain("windows", counts.windows, "> 0"));
    }
    let mu = params.source_mu();
    let (y00_0, y00_1) = vacuum_yields(counts)?;
    let (y00_0, y00_1) = (y00_0.get(), y00_1.get());

    let (n_x, n_z) = subset_sizes(counts.n_x.floor() as u64, counts.n_z.floor() as u64, mu)?;
    let x_fraction = n_x as f64 / counts.n_x;
    let z_fraction = n_z as f64 / counts.n_z;
    let m = MatchedCounts {
        n_x: n_x as f64,
        n_z: n_z as f64,
        n_x0: counts.n_x0 * x_fraction,
        n_x1: counts.n_x1 * x_fraction,
        n_z0: counts.n_z0 * z_fraction,
        n_z1: counts.n_z1 * z_fraction,
    };

    let mut n_plus0_l = bound_n_plus0(&m, y00_0, mu);
    if let BoundFault::InflateCorrectClicks(by) = fault {
        n_plus0_l *= 1.0 + by;
    }
    let n_plus1_u = bound_n_plus1(&m, y00_1, mu);
    let n_tilde_z_l = bound_n_tilde_z(&m, y00_0 + y00_1, mu);

    let kept = 1.0 - params.test_fraction;
    let n_t = counts.n_t * kept;
    let ez = counts.z_error_rate();

    let mut out = SecurityBounds {
        y00_0,
        y00_1,
        n_x,
        n_z,
        x_fraction,
        z_fraction,
        n_plus0_l,
        n_plus1_u,
        n_tilde_z_l,
        e1ph_u: 1.0,
        n1_l: 0.0,
        n_t,
        ez,
        n_f: 0.0,
        rate: 0.0,
        collapse: None,
    };
    if !(n_tilde_z_l > 0.0) {
        out.collapse = Some(Collapse::NoSinglePhotonCounts);
        return Ok(out);
    }
    out.e1ph_u = bound_e1ph(&m, n_plus0_l, n_tilde_z_l)?.get();
    out.n1_l = bound_n1(n_tilde_z_l, m.n_z, counts.n_c)? * kept;
    out.n_f = key_length(out.n1_l, out.e1ph_u, n_t, ez, params.f);
    out.rate = out.n_f / counts.windows;
    Ok(out)
}

//! Invariant suites: source equivalence, Monte Carlo agreement with the
//! analytic model and soundness of the worst-case bounds against simulated
//! ground truth.

use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{
    expected_ground_truth, expected_observables, ChannelModel, GroundTruth, MonteCarlo,
    ObservedCounts,
};
use crate::error::Result;
use crate::protocol::{check_source_equivalence, ProtocolParams};
use crate::security::{analyze_with_fault, single_photon_e1ph, BoundFault};

/// Largest trace distance accepted as equality of the two mixtures.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;
/// Fraction of seeded runs in which every bound must hold.
pub const SOUNDNESS_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckLine {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckLine>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub params: ProtocolParams,
    pub channel: ChannelModel,
    pub seed: u64,
    /// Seeded runs in the soundness suite.
    pub trials: usize,
    /// Random phase pairs in the equivalence suite.
    pub equivalence_pairs: usize,
    /// Agreement threshold in standard deviations.
    pub sigma: f64,
    pub fault: BoundFault,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            params: ProtocolParams::new(0.05, 0.2, 0.5, 0.5).with_windows(10_000_000),
            channel: ChannelModel::paper(50.0, 0.1),
            seed: 1,
            trials: 20,
            equivalence_pairs: 1000,
            sigma: 4.0,
            fault: BoundFault::None,
        }
    }
}

/// Runs every suite and collects one line per check.
pub fn run_verify(cfg: &VerifyConfig) -> Result<Report> {
    let mut checks = vec![check_equivalence(cfg.equivalence_pairs, cfg.seed)];
    let agreement = check_agreement(&cfg.params, &cfg.channel, cfg.seed, cfg.sigma)?;
    checks.push(agreement.line());
    let sound = check_soundness(&cfg.params, &cfg.channel, cfg.trials, cfg.seed, cfg.fault)?;
    checks.push(sound.line());
    Ok(Report { checks })
}

/// Worst trace distance and phase-map deviation over `pairs` random
/// `(rho_A, rho_B)`.
pub fn check_equivalence(pairs: usize, seed: u64) -> CheckLine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dist, mut map) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        let c = check_source_equivalence(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        dist = dist.max(c.trace_distance);
        map = map.max(c.map_deviation);
    }
    CheckLine::new(
        "source equivalence",
        pairs > 0 && dist < EQUIVALENCE_TOLERANCE && map < EQUIVALENCE_TOLERANCE,
        format!("{pairs} phase pairs, max trace distance {dist:.3e}, max map deviation {map:.3e}"),
    )
}

/// One simulated tally compared with its expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct TallyDeviation {
    pub name: &'static str,
    pub observed: f64,
    pub expected: f64,
    /// `(observed - expected) / sigma`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    pub deviations: Vec<TallyDeviation>,
    pub sigma: f64,
}

impl Agreement {
    pub fn worst(&self) -> Option<&TallyDeviation> {
        self.deviations
            .iter()
            .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
    }

    pub fn passed(&self) -> bool {
        self.deviations.iter().all(|d| d.z.abs() <= self.sigma)
    }

    pub fn line(&self) -> CheckLine {
        let detail = match self.worst() {
            Some(w) => format!(
                "{} tallies within {}σ, worst {} = {} vs {:.6e} ({:+.2}σ)",
                self.deviations.len(),
                self.sigma,
                w.name,
                w.observed,
                w.expected,
                w.z
            ),
            None => "no tallies".to_string(),
        };
        CheckLine::new("monte carlo vs analytic", self.passed(), detail)
    }
}

/// Standard score of a tally that counts windows with some property, i.e. a
/// binomial over `windows` trials. A variance floor of a quarter count keeps
/// one stray event of a vanishing expectation inside 4σ.
pub fn binomial_z(observed: f64, expected: f64, windows: f64) -> f64 {
    let p = (expected / windows).clamp(0.0, 1.0);
    let var = (windows * p * (1.0 - p)).max(0.25);
    (observed - expected) / var.sqrt()
}

/// Compares a simulated run with the analytic expectations, tally by tally.
pub fn compare_counts(
    observed: &ObservedCounts,
    expected: &ObservedCounts,
    truth: Option<(&GroundTruth, &GroundTruth)>,
    sigma: f64,
) -> Agreement {
    let n = expected.windows;
    let mut deviations: Vec<TallyDeviation> = ObservedCounts::FIELD_NAMES
        .iter()
        .zip(observed.tallies().iter().zip(expected.tallies()))
        .map(|(&name, (&o, e))| TallyDeviation {
            name,
            observed: o,
            expected: e,
            z: binomial_z(o, e, n),
        })
        .collect();
    if let Some((o, e)) = truth {
        let pairs = [
            ("x_single", o.x_single_pulses, e.x_single_pulses),
            ("x_single_d0", o.x_single_d0, e.x_single_d0),
            ("x_single_d1", o.x_single_d1, e.x_single_d1),
            ("z_single", o.z_single_pulses, e.z_single_pulses),
            ("z_single_d0", o.z_single_d0, e.z_single_d0),
            ("z_single_d1", o.z_single_d1, e.z_single_d1),
            ("true_n1", o.true_n1, e.true_n1),
        ];
        deviations.extend(pairs.into_iter().map(|(name, o, e)| TallyDeviation {
            name,
            observed: o,
            expected: e,
            z: binomial_z(o, e, n),
        }));
    }
    Agreement { deviations, sigma }
}

/// Simulates `params.n_windows` windows and scores every tally, including the
/// photon-number ground truth.
pub fn check_agreement(
    params: &ProtocolParams,
    ch: &ChannelModel,
    seed: u64,
    sigma: f64,
) -> Result<Agreement> {
    let expected = expected_observables(params, ch)?;
    let expected_truth = expected_ground_truth(params, ch)?;
    let (observed, truth) = MonteCarlo::new(*params, *ch).run(seed)?;
    Ok(compare_counts(
        &observed,
        &expected,
        Some((&truth, &expected_truth)),
        sigma,
    ))
}

/// Bound-versus-truth outcome of one seeded run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub n1_l: f64,
    pub n1_true: f64,
    pub e1ph_u: f64,
    pub e1ph_true: f64,
    pub n_plus0_l: f64,
    pub n_plus0_true: f64,
    pub n_plus1_u: f64,
    pub n_plus1_true: f64,
    pub n_tilde_z_l: f64,
    pub n_tilde_z_true: f64,
}

impl TrialOutcome {
    pub fn n1_holds(&self) -> bool {
        self.n1_l <= self.n1_true
    }

    pub fn e1ph_holds(&self) -> bool {
        self.e1ph_u >= self.e1ph_true
    }

    /// The intermediate single-photon bounds.
    pub fn tallies_hold(&self) -> bool {
        self.n_plus0_l <= self.n_plus0_true
            && self.n_plus1_u >= self.n_plus1_true
            && self.n_tilde_z_l <= self.n_tilde_z_true
    }

    pub fn holds(&self) -> bool {
        self.n1_holds() && self.e1ph_holds() && self.tallies_hold()
    }

    /// Relative 1σ counting error of the single-photon Z tally.
    pub fn relative_error(&self) -> f64 {
        if self.n_tilde_z_true > 0.0 {
            self.n_tilde_z_true.sqrt().recip()
        } else {
            f64::INFINITY
        }
    }
}

/// Runs the estimation chain on one simulated data set and sets it against
/// the photon-number ground truth of the same run.
pub fn soundness_trial(
    params: &ProtocolParams,
    ch: &ChannelModel,
    seed: u64,
    fault: BoundFault,
) -> Result<TrialOutcome> {
    let (counts, truth) = MonteCarlo::new(*params, *ch).run(seed)?;
    let b = analyze_with_fault(&counts, params, fault)?;
    let matched = truth.matched(b.x_fraction, b.z_fraction);
    let e1ph_true = single_photon_e1ph(&matched)?.get();
    Ok(TrialOutcome {
        seed,
        n1_l: b.n1_l,
        n1_true: truth.true_n1 * (1.0 - params.test_fraction),
        e1ph_u: b.e1ph_u,
        e1ph_true,
        n_plus0_l: b.n_plus0_l,
        n_plus0_true: matched.plus0,
        n_plus1_u: b.n_plus1_u,
        n_plus1_true: matched.plus1,
        n_tilde_z_l: b.n_tilde_z_l,
        n_tilde_z_true: matched.z_total(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Soundness {
    pub trials: Vec<TrialOutcome>,
    pub fault: BoundFault,
}

impl Soundness {
    pub fn holding(&self) -> usize {
        self.trials.iter().filter(|t| t.holds()).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.trials.is_empty() {
            0.0
        } else {
            self.holding() as f64 / self.trials.len() as f64
        }
    }

    pub fn passed(&self) -> bool {
        !self.trials.is_empty() && self.fraction() >= SOUNDNESS_THRESHOLD
    }

    /// Largest relative counting error over the runs.
    pub fn max_relative_error(&self) -> f64 {
        self.trials
            .iter()
            .map(TrialOutcome::relative_error)
            .fold(0.0, f64::max)
    }

    pub fn line(&self) -> CheckLine {
        let count = |f: fn(&TrialOutcome) -> bool| self.trials.iter().filter(|t| f(t)).count();
        let name = match self.fault {
            BoundFault::None => "bound soundness".to_string(),
            BoundFault::InflateCorrectClicks(by) => {
                format!("bound soundness (injected fault +{:.0}%)", 100.0 * by)
            }
        };
        CheckLine::new(
            name,
            self.passed(),
            format!(
                "{}/{} runs sound (n1 {}, e1ph {}, tallies {}), max relative error {:.2}%",
                self.holding(),
                self.trials.len(),
                count(TrialOutcome::n1_holds),
                count(TrialOutcome::e1ph_holds),
                count(TrialOutcome::tallies_hold),
                100.0 * self.max_relative_error()
            ),
        )
    }
}

/// `trials` independent runs seeded `seed, seed + 1, ...`.
pub fn check_soundness(
    params: &ProtocolParams,
    ch: &ChannelModel,
    trials: usize,
    seed: u64,
    fault: BoundFault,
) -> Result<Soundness> {
    let trials = (0..trials as u64)
        .map(|i| soundness_trial(params, ch, seed.wrapping_add(i), fault))
        .collect::<Result<Vec<_>>>()?;
    Ok(Soundness { trials, fault })
}

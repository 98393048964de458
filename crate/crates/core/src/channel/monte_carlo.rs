//! Seeded, batch-parallel photon-level simulation.
//!
//! Windows are cut into fixed batches of [`BATCH_WINDOWS`]; batch `b` draws
//! from ChaCha stream `b` of the master seed. Tallies are integer sums, so the
//! merged result is independent of how rayon schedules the batches.

use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{detector_means, ChannelModel, GroundTruth, ObservedCounts};
use crate::error::Result;
use crate::protocol::{
    classify_window, phase_slice_accept, sample_window, ProtocolParams, WindowClass,
};

pub const BATCH_WINDOWS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhotonStatistics {
    /// Phase-randomised coherent pulses.
    #[default]
    Poisson,
    /// Every emitting window carries exactly one photon. Used to check the
    /// single-photon error relation in isolation.
    SinglePhoton,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    class: [u64; 6],
    n_x: u64,
    n_x0: u64,
    n_x1: u64,
    n_z0: u64,
    n_z1: u64,
    both_eff: u64,
    k00_0: u64,
    k00_1: u64,
    x_single: u64,
    x_single_d0: u64,
    x_single_d1: u64,
    z_single: u64,
    z_single_d0: u64,
    z_single_d1: u64,
}

impl AddAssign for Tally {
    fn add_assign(&mut self, o: Tally) {
        for (a, b) in self.class.iter_mut().zip(o.class) {
            *a += b;
        }
        self.n_x += o.n_x;
        self.n_x0 += o.n_x0;
        self.n_x1 += o.n_x1;
        self.n_z0 += o.n_z0;
        self.n_z1 += o.n_z1;
        self.both_eff += o.both_eff;
        self.k00_0 += o.k00_0;
        self.k00_1 += o.k00_1;
        self.x_single += o.x_single;
        self.x_single_d0 += o.x_single_d0;
        self.x_single_d1 += o.x_single_d1;
        self.z_single += o.z_single;
        self.z_single_d0 += o.z_single_d0;
        self.z_single_d1 += o.z_single_d1;
    }
}

/// Builder for a Monte Carlo run.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    params: ProtocolParams,
    channel: ChannelModel,
    photons: PhotonStatistics,
}

/// Which detectors fired in one window.
#[derive(Debug, Clone, Copy)]
struct Detection {
    photons: u32,
    d0: bool,
    d1: bool,
}

impl Detection {
    fn effective(&self) -> Option<usize> {
        match (self.d0, self.d1) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }
}

struct Engine {
    half: f64,
    eta: f64,
    visibility: f64,
    p_d: f64,
    lambda: f64,
    vacuum_half: f64,
    vacuum_full: f64,
    photons: PhotonStatistics,
}

impl Engine {
    fn poisson<R: Rng>(&self, rng: &mut R, mean: f64, vacuum: f64) -> u32 {
        let u: f64 = rng.gen();
        let mut k = 0u32;
        let mut p = vacuum;
        let mut cdf = p;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / f64::from(k);
            cdf += p;
        }
        k
    }

    fn detect<R: Rng>(&self, rng: &mut R, i_a: f64, i_b: f64, delta: f64) -> Detection {
        let total = i_a + i_b;
        let photons = if total == 0.0 {
            0
        } else {
            match self.photons {
                PhotonStatistics::SinglePhoton => 1,
                PhotonStatistics::Poisson if i_a > 0.0 && i_b > 0.0 => {
                    self.poisson(rng, total, self.vacuum_full)
                }
                PhotonStatistics::Poisson => self.poisson(rng, total, self.vacuum_half),
            }
        };
        let (mut hit0, mut hit1) = (false, false);
        if photons > 0 {
            // Per-photon routing reproduces the independent Poisson ports of
            // the interfering coherent states by thinning.
            let (m0, _) = detector_means(i_a, i_b, delta, 1.0, self.visibility);
            let to_d0 = m0 / total;
            for _ in 0..photons {
                if rng.gen::<f64>() < self.eta {
                    if rng.gen::<f64>() < to_d0 {
                        hit0 = true;
                    } else {
                        hit1 = true;
                    }
                }
            }
        }
        let dark0 = rng.gen::<f64>() < self.p_d;
        let dark1 = rng.gen::<f64>() < self.p_d;
        Detection {
            photons,
            d0: hit0 || dark0,
            d1: hit1 || dark1,
        }
    }

    fn run_batch(&self, params: &ProtocolParams, seed: u64, batch: u64, windows: u64) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(batch);
        let mut t = Tally::default();
        for _ in 0..windows {
            let w = sample_window(params, &mut rng);
            let class = classify_window(&w);
            t.class[class.index()] += 1;
            let delta = w.phase_difference();
            match class {
                WindowClass::MixedBasis => {}
                WindowClass::XxPair => {
                    if !phase_slice_accept(w.delta_a, w.delta_b, self.lambda) {
                        continue;
                    }
                    t.n_x += 1;
                    let det = self.detect(&mut rng, self.half, self.half, delta);
                    let single = det.photons == 1;
                    t.x_single += u64::from(single);
                    match det.effective() {
                        Some(0) => {
                            t.n_x0 += 1;
                            t.x_single_d0 += u64::from(single);
                        }
                        Some(_) => {
                            t.n_x1 += 1;
                            t.x_single_d1 += u64::from(single);
                        }
                        None => {}
                    }
                }
                WindowClass::SetCAliceSent | WindowClass::SetCBobSent => {
                    let (i_a, i_b) = if class == WindowClass::SetCAliceSent {
                        (self.half, 0.0)
                    } else {
                        (0.0, self.half)
                    };
                    let det = self.detect(&mut rng, i_a, i_b, delta);
                    let single = det.photons == 1;
                    t.z_single += u64::from(single);
                    match det.effective() {
                        Some(0) => {
                            t.n_z0 += 1;
                            t.z_single_d0 += u64::from(single);
                        }
                        Some(_) => {
                            t.n_z1 += 1;
                            t.z_single_d1 += u64::from(single);
                        }
                        None => {}
                    }
                }
                WindowClass::ZzBothSent => {
                    let det = self.detect(&mut rng, self.half, self.half, delta);
                    t.both_eff += u64::from(det.effective().is_some());
                }
                WindowClass::ZzNoneSent => match self.detect(&mut rng, 0.0, 0.0, delta).effective()
                {
                    Some(0) => t.k00_0 += 1,
                    Some(_) => t.k00_1 += 1,
                    None => {}
                },
            }
        }
        t
    }
}

impl MonteCarlo {
    pub fn new(params: ProtocolParams, channel: ChannelModel) -> Self {
        MonteCarlo {
            params,
            channel,
            photons: PhotonStatistics::Poisson,
        }
    }

    pub fn photons(mut self, photons: PhotonStatistics) -> Self {
        self.photons = photons;
        self
    }

    /// Simulates `params.n_windows` windows on the current rayon pool.
    pub fn run(&self, seed: u64) -> Result<(ObservedCounts, GroundTruth)> {
        self.params.validate()?;
        self.channel.validate()?;
        let half = 0.5 * self.params.mu;
        let engine = Engine {
            half,
            eta: self.channel.arm_transmittance()?,
            visibility: self.channel.visibility(),
            p_d: self.channel.p_d,
            lambda: self.params.lambda,
            vacuum_half: (-half).exp(),
            vacuum_full: (-self.params.mu).exp(),
            photons: self.photons,
        };
        let n = self.params.n_windows;
        let batches = n.div_ceil(BATCH_WINDOWS);
        let params = self.params;
        let t = (0..batches)
            .into_par_iter()
            .map(|b| {
                let size = BATCH_WINDOWS.min(n - b * BATCH_WINDOWS);
                engine.run_batch(&params, seed, b, size)
            })
            .reduce(Tally::default, |mut a, b| {
                a += b;
                a
            });
        Ok(finish(n, &t))
    }
}

fn finish(n: u64, t: &Tally) -> (ObservedCounts, GroundTruth) {
    let f = |v: u64| v as f64;
    let n_c =
        t.class[WindowClass::SetCAliceSent.index()] + t.class[WindowClass::SetCBobSent.index()];
    let n_00 = t.class[WindowClass::ZzNoneSent.index()];
    let n_err = t.both_eff + t.k00_0 + t.k00_1;
    let counts = ObservedCounts {
        windows: f(n),
        n_x: f(t.n_x),
        n_z: f(n_c),
        n_x0: f(t.n_x0),
        n_x1: f(t.n_x1),
        n_z0: f(t.n_z0),
        n_z1: f(t.n_z1),
        n_t: f(t.n_z0 + t.n_z1 + n_err),
        n_err_z: f(n_err),
        n_c: f(n_c),
        n_00: f(n_00),
        k00_0: f(t.k00_0),
        k00_1: f(t.k00_1),
    };
    let truth = GroundTruth {
        x_single_pulses: f(t.x_single),
        x_single_d0: f(t.x_single_d0),
        x_single_d1: f(t.x_single_d1),
        z_single_pulses: f(t.z_single),
        z_single_d0: f(t.z_single_d0),
        z_single_d1: f(t.z_single_d1),
        true_n1: f(t.z_single_d0 + t.z_single_d1),
    };
    (counts, truth)
}

/// Poisson-source simulation of `params.n_windows` windows.
pub fn monte_carlo_observables(
    params: &ProtocolParams,
    ch: &ChannelModel,
    seed: u64,
) -> Result<(ObservedCounts, GroundTruth)> {
    MonteCarlo::new(*params, *ch).run(seed)
}

//! Key-rate maximisation over `(mu, epsilon, lambda, p_x)`: a coarse grid
//! scan followed by a bounded Nelder-Mead refinement, and per-distance
//! sweeps built on top of it.
//!
//! The objective is the analytic rate, so every evaluation is deterministic
//! and the reductions below break ties on the parameter tuple rather than on
//! evaluation order.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::channel::{ChannelModel, ObservableModel};
use crate::error::{domain, Result};
use crate::protocol::{ProtocolParams, DEFAULT_EC_EFFICIENCY, DEFAULT_WINDOWS};
use crate::security::{analyze, SecurityBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisScale {
    Linear,
    Log,
}

/// A closed search interval with its grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64, points: usize) -> Self {
        Axis {
            lo,
            hi,
            points,
            scale: AxisScale::Linear,
        }
    }

    pub fn log(lo: f64, hi: f64, points: usize) -> Self {
        Axis {
            lo,
            hi,
            points,
            scale: AxisScale::Log,
        }
    }

    pub fn fixed(value: f64) -> Self {
        Axis::linear(value, value, 1)
    }

    fn validate(&self, name: &'static str, outer_hi: f64) -> Result<()> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi <= outer_hi) {
            return Err(domain(name, self.lo, "0 < lo <= hi <= outer bound"));
        }
        if self.points == 0 {
            return Err(domain(name, 0.0, "at least one grid point"));
        }
        Ok(())
    }

    fn is_free(&self) -> bool {
        self.hi > self.lo && self.points > 1
    }

    /// Maps `u` in `[0, 1]` onto the interval.
    pub fn at(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u == 0.0 {
            return self.lo;
        }
        if u == 1.0 {
            return self.hi;
        }
        let v = match self.scale {
            AxisScale::Linear => self.lo + u * (self.hi - self.lo),
            AxisScale::Log => (self.lo.ln() + u * (self.hi / self.lo).ln()).exp(),
        };
        v.clamp(self.lo, self.hi)
    }

    fn grid_coordinates(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.0];
        }
        let last = (self.points - 1) as f64;
        (0..self.points).map(|i| i as f64 / last).collect()
    }

    fn step(&self) -> f64 {
        if self.points > 1 {
            1.0 / (self.points - 1) as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub mu: Axis,
    pub epsilon: Axis,
    pub lambda: Axis,
    pub p_x: Axis,
    /// Error-correction efficiency of every candidate.
    pub f: f64,
    pub n_windows: u64,
    pub test_fraction: f64,
    /// Intensity upper bound; grid points with `mu > mu_max` score zero.
    pub mu_max: Option<f64>,
    /// Relative spread of the simplex values at which refinement stops.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            mu: Axis::log(1e-4, 1.5, 20),
            epsilon: Axis::log(1e-4, 0.5, 20),
            lambda: Axis::linear(0.01, 2.0, 20),
            p_x: Axis::linear(0.01, 0.5, 20),
            f: DEFAULT_EC_EFFICIENCY,
            n_windows: DEFAULT_WINDOWS,
            test_fraction: 0.0,
            mu_max: None,
            tolerance: 1e-4,
            max_evaluations: 4000,
        }
    }
}

impl SearchSpace {
    pub const MU_MAX: f64 = 1.5;
    pub const EPSILON_MAX: f64 = 0.5;
    pub const LAMBDA_MAX: f64 = 2.0;
    pub const P_X_MAX: f64 = 0.5;

    pub fn validate(&self) -> Result<()> {
        self.mu.validate("mu", Self::MU_MAX)?;
        self.epsilon.validate("epsilon", Self::EPSILON_MAX)?;
        self.lambda.validate("lambda", Self::LAMBDA_MAX)?;
        self.p_x.validate("p_x", Self::P_X_MAX)?;
        if !(self.tolerance > 0.0) {
            return Err(domain("tolerance", self.tolerance, "> 0"));
        }
        Ok(())
    }

    fn axes(&self) -> [&Axis; 4] {
        [&self.mu, &self.epsilon, &self.lambda, &self.p_x]
    }

    /// Protocol parameters at unit-cube coordinates `u`.
    pub fn params_at(&self, u: [f64; 4]) -> ProtocolParams {
        ProtocolParams {
            mu: self.mu.at(u[0]),
            epsilon: self.epsilon.at(u[1]),
            lambda: self.lambda.at(u[2]),
            p_x: self.p_x.at(u[3]),
            f: self.f,
            n_windows: self.n_windows,
            mu_max: self.mu_max,
            test_fraction: self.test_fraction,
        }
    }

    pub fn contains(&self, p: &ProtocolParams) -> bool {
        let inside = |a: &Axis, v: f64| v >= a.lo && v <= a.hi;
        inside(&self.mu, p.mu)
            && inside(&self.epsilon, p.epsilon)
            && inside(&self.lambda, p.lambda)
            && inside(&self.p_x, p.p_x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeResult {
    pub params: ProtocolParams,
    /// `None` only if the analysis itself failed at the returned point.
    pub bounds: Option<SecurityBounds>,
    pub rate: f64,
    /// Best rate seen on the coarse grid.
    pub grid_rate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    rate: f64,
    key: [f64; 4],
    bounds: Option<SecurityBounds>,
}

impl Candidate {
    /// Higher rate wins; equal rates go to the lexicographically smaller
    /// parameter tuple. A total order, so parallel reduction is deterministic.
    fn better(self, other: Candidate) -> Candidate {
        match self.rate.partial_cmp(&other.rate) {
            Some(Ordering::Greater) => self,
            Some(Ordering::Less) => other,
            _ => {
                if lexicographic(&self.key, &other.key) != Ordering::Greater {
                    self
                } else {
                    other
                }
            }
        }
    }
}

fn lexicographic(a: &[f64; 4], b: &[f64; 4]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn score(params: &ProtocolParams, model: &ObservableModel) -> (f64, Option<SecurityBounds>) {
    if params.validate().is_err() {
        return (0.0, None);
    }
    let counts = model.counts(params.n_windows, params.epsilon, params.p_x);
    match analyze(&counts, params) {
        Ok(b) => (b.rate, Some(b)),
        Err(_) => (0.0, None),
    }
}

/// Analytic key rate at a single parameter point.
pub fn evaluate(params: &ProtocolParams, ch: &ChannelModel) -> Result<SecurityBounds> {
    params.validate()?;
    let model = ObservableModel::new(params.mu, params.lambda, ch)?;
    analyze(
        &model.counts(params.n_windows, params.epsilon, params.p_x),
        params,
    )
}

struct Objective<'a> {
    space: &'a SearchSpace,
    ch: &'a ChannelModel,
    evaluations: usize,
}

impl Objective<'_> {
    fn eval(&mut self, u: [f64; 4]) -> Candidate {
        self.evaluations += 1;
        let params = self.space.params_at(u);
        let (rate, bounds) = match ObservableModel::new(params.mu, params.lambda, self.ch) {
            Ok(model) => score(&params, &model),
            Err(_) => (0.0, None),
        };
        Candidate {
            rate,
            key: [params.mu, params.epsilon, params.lambda, params.p_x],
            bounds,
        }
    }
}

fn grid_scan(ch: &ChannelModel, space: &SearchSpace) -> (Candidate, [f64; 4], usize) {
    let mu_u = space.mu.grid_coordinates();
    let lam_u = space.lambda.grid_coordinates();
    let eps_u = space.epsilon.grid_coordinates();
    let px_u = space.p_x.grid_coordinates();
    let outer: Vec<(f64, f64)> = mu_u
        .iter()
        .flat_map(|&m| lam_u.iter().map(move |&l| (m, l)))
        .collect();
    let evaluations = outer.len() * eps_u.len() * px_u.len();

    let (best, at) = outer
        .par_iter()
        .map(|&(um, ul)| {
            let probe = space.params_at([um, 0.0, ul, 0.0]);
            let model = ObservableModel::new(probe.mu, probe.lambda, ch).ok();
            let mut local: Option<(Candidate, [f64; 4])> = None;
            for &ue in &eps_u {
                for &up in &px_u {
                    let u = [um, ue, ul, up];
                    let params = space.params_at(u);
                    let (rate, bounds) = match &model {
                        Some(m) => score(&params, m),
                        None => (0.0, None),
                    };
                    let cand = Candidate {
                        rate,
                        key: [params.mu, params.epsilon, params.lambda, params.p_x],
                        bounds,
                    };
                    local = Some(match local {
                        None => (cand, u),
                        Some((best, bu)) => {
                            let winner = best.better(cand);
                            if std::ptr::eq(&winner, &best) || winner.key == best.key {
                                (best, bu)
                            } else {
                                (cand, u)
                            }
                        }
                    });
                }
            }
            local.expect("grid axes have at least one point")
        })
        .reduce_with(|a, b| {
            let w = a.0.better(b.0);
            if w.key == a.0.key {
                a
            } else {
                b
            }
        })
        .expect("grid has at least one point");
    (best, at, evaluations)
}

/// Bounded Nelder-Mead on the unit cube over the free axes, maximising rate.
fn refine(
    obj: &mut Objective<'_>,
    start: [f64; 4],
    start_cand: Candidate,
) -> (Candidate, [f64; 4]) {
    let free: Vec<usize> = obj
        .space
        .axes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_free())
        .map(|(i, _)| i)
        .collect();
    let mut best = (start_cand, start);
    if free.is_empty() || start_cand.rate <= 0.0 {
        return best;
    }
    let dim = free.len();
    let axes = obj.space.axes();

    let embed = |x: &[f64]| {
        let mut u = start;
        for (k, &i) in free.iter().enumerate() {
            u[i] = x[k].clamp(0.0, 1.0);
        }
        u
    };

    let x0: Vec<f64> = free.iter().map(|&i| start[i]).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.clone(), -start_cand.rate));
    for (k, &i) in free.iter().enumerate() {
        let step = axes[i].step().max(1e-3);
        let mut x = x0.clone();
        x[k] = if x[k] + step <= 1.0 {
            x[k] + step
        } else {
            x[k] - step
        };
        let u = embed(&x);
        let c = obj.eval(u);
        if c.rate > best.0.rate {
            best = (c, u);
        }
        simplex.push((x, -c.rate));
    }

    let visit = |x: &[f64], obj: &mut Objective<'_>, best: &mut (Candidate, [f64; 4])| {
        let clamped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let u = embed(&clamped);
        let c = obj.eval(u);
        if c.rate > best.0.rate {
            *best = (c, u);
        }
        (clamped, -c.rate)
    };

    while obj.evaluations < obj.space.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let f_best = simplex[0].1;
        let f_worst = simplex[dim].1;
        let spread = (f_worst - f_best).abs();
        let size = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread <= obj.space.tolerance * f_best.abs() && size < 1e-3) || size < 1e-9 {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let worst = simplex[dim].0.clone();

        let reflected = visit(&toward(1.0, &worst), obj, &mut best);
        if reflected.1 < simplex[0].1 {
            let expanded = visit(&toward(2.0, &worst), obj, &mut best);
            simplex[dim] = if expanded.1 < reflected.1 {
                expanded
            } else {
                reflected
            };
        } else if reflected.1 < simplex[dim - 1].1 {
            simplex[dim] = reflected;
        } else {
            let contracted = if reflected.1 < simplex[dim].1 {
                visit(&toward(0.5, &worst), obj, &mut best)
            } else {
                visit(&toward(-0.5, &worst), obj, &mut best)
            };
            if contracted.1 < simplex[dim].1.min(reflected.1) {
                simplex[dim] = contracted;
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = anchor
                        .iter()
                        .zip(&vertex.0)
                        .map(|(a, v)| a + 0.5 * (v - a))
                        .collect();
                    *vertex = visit(&shrunk, obj, &mut best);
                }
            }
        }
    }
    best
}

/// Maximises the analytic key rate for one channel.
pub fn optimize(ch: &ChannelModel, space: &SearchSpace) -> Result<OptimizeResult> {
    ch.validate()?;
    space.validate()?;
    let (grid_best, at, grid_evals) = grid_scan(ch, space);
    let mut obj = Objective {
        space,
        ch,
        evaluations: 0,
    };
    let (best, u) = refine(&mut obj, at, grid_best);
    Ok(OptimizeResult {
        params: space.params_at(u),
        bounds: best.bounds,
        rate: best.rate,
        grid_rate: grid_best.rate,
        evaluations: grid_evals + obj.evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub distance_km: f64,
    pub result: OptimizeResult,
}

impl SweepRow {
    pub fn e1ph_u(&self) -> f64 {
        self.result.bounds.map_or(1.0, |b| b.e1ph_u)
    }

    pub fn ez(&self) -> f64 {
        self.result.bounds.map_or(0.0, |b| b.ez)
    }

    /// Lower bound on untagged bits per window.
    pub fn n1_per_window(&self) -> f64 {
        self.result
            .bounds
            .map_or(0.0, |b| b.n1_l / self.result.params.n_windows as f64)
    }
}

/// Optimises every distance independently; rows follow input order.
pub fn sweep(distances: &[f64], ch: &ChannelModel, space: &SearchSpace) -> Result<Vec<SweepRow>> {
    space.validate()?;
    for &d in distances {
        ch.at_distance(d).validate()?;
    }
    distances
        .par_iter()
        .map(|&d| {
            optimize(&ch.at_distance(d), space).map(|result| SweepRow {
                distance_km: d,
                result,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_space() -> SearchSpace {
        SearchSpace {
            mu: Axis::log(1e-3, 1.5, 8),
            epsilon: Axis::log(1e-3, 0.5, 8),
            lambda: Axis::linear(0.05, 2.0, 4),
            p_x: Axis::linear(0.02, 0.5, 4),
            ..SearchSpace::default()
        }
    }

    #[test]
    fn axis_mapping() {
        let a = Axis::log(1e-4, 1.0, 5);
        assert!((a.at(0.0) - 1e-4).abs() < 1e-18);
        assert!((a.at(0.5) - 1e-2).abs() < 1e-15);
        assert_eq!(a.at(1.0), 1.0);
        assert_eq!(a.at(7.0), 1.0);
        let l = Axis::linear(0.0, 2.0, 3);
        assert_eq!(l.at(0.25), 0.5);
        assert_eq!(Axis::fixed(0.3).at(0.9), 0.3);
    }

    #[test]
    fn rejects_bad_space() {
        let mut s = SearchSpace::default();
        s.mu.hi = 2.0;
        assert!(s.validate().is_err());
        let mut s = SearchSpace::default();
        s.epsilon.lo = 0.0;
        assert!(s.validate().is_err());
        let mut s = SearchSpace::default();
        s.p_x.points = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn refinement_beats_grid_and_stays_inside() {
        let space = small_space();
        for &l in &[0.0, 100.0, 250.0] {
            let r = optimize(&ChannelModel::paper(l, 0.1), &space).unwrap();
            assert!(r.rate >= r.grid_rate);
            assert!(r.rate > 0.0);
            assert!(space.contains(&r.params), "{:?}", r.params);
        }
    }

    #[test]
    fn fixed_axes_are_respected() {
        let space = SearchSpace {
            lambda: Axis::fixed(0.3),
            p_x: Axis::fixed(0.2),
            ..small_space()
        };
        let r = optimize(&ChannelModel::paper(50.0, 0.1), &space).unwrap();
        assert_eq!(r.params.lambda, 0.3);
        assert_eq!(r.params.p_x, 0.2);
    }

    #[test]
    fn zero_everywhere_returns_zero() {
        let r = optimize(&ChannelModel::paper(50.0, 0.5), &small_space()).unwrap();
        assert_eq!(r.rate, 0.0);
        assert_eq!(r.grid_rate, 0.0);
        // smallest tuple wins the tie
        assert_eq!(r.params.mu, 1e-3);
        assert_eq!(r.params.epsilon, 1e-3);
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let space = small_space();
        let ch = ChannelModel::paper(0.0, 0.1);
        let a = sweep(&[0.0, 120.0, 240.0], &ch, &space).unwrap();
        let b = sweep(&[240.0, 0.0, 120.0], &ch, &space).unwrap();
        assert_eq!(a[0].result, b[1].result);
        assert_eq!(a[1].result, b[2].result);
        assert_eq!(a[2].result, b[0].result);
        let single = optimize(&ch.at_distance(120.0), &space).unwrap();
        assert_eq!(a[1].result, single);
        let one_thread = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sweep(&[0.0, 120.0, 240.0], &ch, &space).unwrap());
        assert_eq!(a, one_thread);
    }

    #[test]
    fn mu_cap_excludes_large_intensities() {
        let space = SearchSpace {
            mu_max: Some(0.01),
            ..small_space()
        };
        let r = optimize(&ChannelModel::paper(0.0, 0.1), &space).unwrap();
        assert!(r.params.mu <= 0.01);
    }
}

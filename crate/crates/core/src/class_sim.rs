//! Quasi-Grover evolution on invalid-count classes.
//!
//! Both the phase oracle `e^{i·b·ℓ·β}` and inversion about the mean treat
//! all assignments with the same invalid count `ℓ` identically, so the state
//! is one amplitude per class. With `β = 2π/L` this makes eloily-scale
//! evolution cost `O(L)` per query.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::classical::{Assignment, DistributionSource, InvalidDistribution};

pub const DEFAULT_T_MAX: usize = 1000;
const TIE_TOLERANCE: f64 = 1e-12;
const STALL_TOLERANCE: f64 = 1e-6;
const STALL_QUERIES: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassSimError {
    #[error("multiplier {b} outside 0..{lines}")]
    MultiplierOutOfRange { b: usize, lines: usize },
    #[error("target {target} outside 0..={lines}")]
    TargetOutOfRange { target: usize, lines: usize },
    #[error("distribution has no assignments")]
    EmptyDistribution,
    #[error("distribution has {got} classes, expected {expected}")]
    ClassMismatch { expected: usize, got: usize },
    #[error("shots must be positive")]
    NoShots,
    #[error("invalid schedule entry on line {line}: {message}")]
    ScheduleParse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassState {
    lines: usize,
    beta: f64,
    counts: Vec<f64>,
    n: f64,
    amps: Vec<Complex64>,
}

impl ClassState {
    /// The uniform superposition `1/√n` on every class (empty classes carry
    /// a formal amplitude that never contributes probability).
    pub fn uniform(dist: &InvalidDistribution) -> Result<Self, ClassSimError> {
        let n: f64 = dist.counts.iter().sum();
        if n <= 0.0 {
            return Err(ClassSimError::EmptyDistribution);
        }
        let lines = dist.num_lines();
        Ok(Self {
            lines,
            beta: 2.0 * PI / lines.max(1) as f64,
            counts: dist.counts.clone(),
            n,
            amps: vec![Complex64::new(1.0 / n.sqrt(), 0.0); lines + 1],
        })
    }

    pub fn num_lines(&self) -> usize {
        self.lines
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn amplitude(&self, ell: usize) -> Complex64 {
        self.amps[ell]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probability(&self, ell: usize) -> f64 {
        self.counts[ell] * self.amps[ell].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..=self.lines).map(|e| self.probability(e)).collect()
    }

    pub fn norm(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    fn check_multiplier(&self, b: usize) -> Result<(), ClassSimError> {
        if b >= self.lines.max(1) {
            return Err(ClassSimError::MultiplierOutOfRange {
                b,
                lines: self.lines,
            });
        }
        Ok(())
    }

    fn phased(&self, b: usize) -> Vec<Complex64> {
        self.amps
            .iter()
            .enumerate()
            .map(|(ell, a)| a * Complex64::from_polar(1.0, (b * ell) as f64 * self.beta))
            .collect()
    }

    fn mean(&self, amps: &[Complex64]) -> Complex64 {
        amps.iter()
            .zip(&self.counts)
            .map(|(a, c)| a * c)
            .sum::<Complex64>()
            / self.n
    }

    /// One query: phase `e^{i·b·ℓ·β}` on every class, then inversion about the mean.
    pub fn apply_query(&mut self, b: usize) -> Result<(), ClassSimError> {
        self.check_multiplier(b)?;
        let phased = self.phased(b);
        let mean = self.mean(&phased);
        self.amps = phased.into_iter().map(|a| 2.0 * mean - a).collect();
        Ok(())
    }

    /// `|ᾱ − α_target|` after the phase step with multiplier `b`.
    pub fn distance(&self, b: usize, target: usize) -> Result<f64, ClassSimError> {
        self.check_multiplier(b)?;
        let phased = self.phased(b);
        Ok((self.mean(&phased) - phased[target]).norm())
    }
}

fn check_target(dist: &InvalidDistribution, target: usize) -> Result<(), ClassSimError> {
    if target > dist.num_lines() {
        return Err(ClassSimError::TargetOutOfRange {
            target,
            lines: dist.num_lines(),
        });
    }
    Ok(())
}

/// First index whose value is within tolerance of the maximum.
fn first_argmax(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= max - TIE_TOLERANCE)
        .unwrap_or(0)
}

/// `P(ℓ)` after every query; row 0 is the uniform state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub geometry: String,
    pub target: usize,
    pub probabilities: Vec<Vec<f64>>,
}

impl Trajectory {
    fn record(dist: &InvalidDistribution, target: usize) -> Self {
        Self {
            geometry: dist.geometry.clone(),
            target,
            probabilities: Vec::new(),
        }
    }

    pub fn queries(&self) -> usize {
        self.probabilities.len().saturating_sub(1)
    }

    /// `P(target)` at each query count.
    pub fn target_curve(&self) -> Vec<f64> {
        self.probabilities.iter().map(|p| p[self.target]).collect()
    }

    pub fn target_probability(&self, t: usize) -> f64 {
        self.probabilities[t][self.target]
    }

    /// First `t` with `P(t−1) < P(t) ≥ P(t+1)`.
    pub fn first_local_max(&self) -> Option<usize> {
        let p = self.target_curve();
        (1..p.len().saturating_sub(1)).find(|&t| p[t - 1] < p[t] && p[t] >= p[t + 1])
    }

    /// Earliest query count attaining the maximum of `P(target)`.
    pub fn argmax(&self) -> usize {
        first_argmax(&self.target_curve())
    }

    /// `t,ell,P` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,ell,P\n");
        for (t, row) in self.probabilities.iter().enumerate() {
            for (ell, p) in row.iter().enumerate() {
                writeln!(s, "{t},{ell},{p}").unwrap();
            }
        }
        s
    }
}

/// Fixed-β result: trajectory plus the first local maximum of `P(target)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedEvolution {
    pub trajectory: Trajectory,
    pub t_opt: Option<usize>,
    pub p_opt: Option<f64>,
}

/// Evolves with multiplier 1 for `t_max` queries.
pub fn evolve_fixed(
    dist: &InvalidDistribution,
    target: usize,
    t_max: usize,
) -> Result<FixedEvolution, ClassSimError> {
    let trajectory = replay(dist, target, &vec![1; t_max])?;
    let t_opt = trajectory.first_local_max();
    Ok(FixedEvolution {
        p_opt: t_opt.map(|t| trajectory.target_probability(t)),
        t_opt,
        trajectory,
    })
}

/// Evolves the uniform state of `dist` under `multipliers`.
pub fn replay(
    dist: &InvalidDistribution,
    target: usize,
    multipliers: &[usize],
) -> Result<Trajectory, ClassSimError> {
    check_target(dist, target)?;
    let mut state = ClassState::uniform(dist)?;
    let mut traj = Trajectory::record(dist, target);
    traj.probabilities.push(state.probabilities());
    for &b in multipliers {
        state.apply_query(b)?;
        traj.probabilities.push(state.probabilities());
    }
    Ok(traj)
}

/// Greedy query-dependent multipliers; entries past the schedule are `0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSchedule {
    pub multipliers: Vec<usize>,
    pub target: usize,
    pub t_opt_prime: usize,
    pub max_probability: f64,
    pub trained_on: DistributionSource,
}

impl BetaSchedule {
    /// The multipliers up to `t′_opt` followed by one trailing zero.
    pub fn display_prefix(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .multipliers
            .iter()
            .take(self.t_opt_prime)
            .copied()
            .collect();
        v.push(0);
        v
    }

    /// `t,b_t` CSV, `t` starting at 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,b_t\n");
        for (t, b) in self.multipliers.iter().enumerate() {
            writeln!(s, "{},{b}", t + 1).unwrap();
        }
        s
    }

    /// Reads multipliers from a `t,b_t` CSV (header optional) or one value per line.
    pub fn parse_multipliers(text: &str) -> Result<Vec<usize>, ClassSimError> {
        let mut out = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('t') {
                continue;
            }
            let field = line.rsplit(',').next().unwrap_or(line).trim();
            let b = field.parse().map_err(|_| ClassSimError::ScheduleParse {
                line: i + 1,
                message: format!("expected an integer, got {field:?}"),
            })?;
            out.push(b);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedRun {
    pub schedule: BetaSchedule,
    pub trajectory: Trajectory,
}

/// Greedy β optimization: at every query, the multiplier maximizing
/// `|ᾱ − α_target|` after the phase step (smallest `b` among ties). Stops once
/// `P(target)` has not improved for three consecutive queries, or at `t_max`.
pub fn optimize_betas(
    dist: &InvalidDistribution,
    target: usize,
    t_max: usize,
) -> Result<OptimizedRun, ClassSimError> {
    check_target(dist, target)?;
    let mut state = ClassState::uniform(dist)?;
    let lines = state.num_lines().max(1);
    let mut traj = Trajectory::record(dist, target);
    traj.probabilities.push(state.probabilities());
    let mut multipliers = Vec::new();
    let mut best = state.probability(target);
    let mut stalled = 0;
    while multipliers.len() < t_max && stalled < STALL_QUERIES {
        let mut pick = (0, f64::NEG_INFINITY);
        for b in 0..lines {
            let d = state.distance(b, target)?;
            if d > pick.1 + TIE_TOLERANCE {
                pick = (b, d);
            }
        }
        state.apply_query(pick.0)?;
        multipliers.push(pick.0);
        let p = state.probability(target);
        if p > best + STALL_TOLERANCE {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best = best.max(p);
        traj.probabilities.push(state.probabilities());
    }
    let t_opt_prime = traj.argmax();
    Ok(OptimizedRun {
        schedule: BetaSchedule {
            multipliers,
            target,
            t_opt_prime,
            max_probability: traj.target_probability(t_opt_prime),
            trained_on: dist.source,
        },
        trajectory: traj,
    })
}

/// Shots from a class state, binned by invalid count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementSample {
    pub histogram_by_ell: BTreeMap<usize, usize>,
    /// One concrete assignment per sampled class, when known.
    pub witnesses: BTreeMap<usize, String>,
    /// Smallest `min(ℓ, L−ℓ)` over all shots.
    pub min_folded: usize,
}

/// Samples `shots` measurements with class probabilities `|j_ℓ|·|α_ℓ|²`.
pub fn sample_measurement(
    state: &ClassState,
    witnesses: &[Option<Assignment>],
    shots: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MeasurementSample, ClassSimError> {
    if shots == 0 {
        return Err(ClassSimError::NoShots);
    }
    let probs = state.probabilities();
    let sampler = WeightedIndex::new(&probs).map_err(|_| ClassSimError::EmptyDistribution)?;
    let l = state.num_lines();
    let mut histogram_by_ell = BTreeMap::new();
    let mut min_folded = usize::MAX;
    for _ in 0..shots {
        let ell = sampler.sample(rng);
        *histogram_by_ell.entry(ell).or_insert(0) += 1;
        min_folded = min_folded.min(ell.min(l - ell));
    }
    let witnesses = histogram_by_ell
        .keys()
        .filter_map(|&ell| {
            witnesses
                .get(ell)
                .and_then(|w| w.as_ref())
                .map(|a| (ell, a.to_bit_string()))
        })
        .collect();
    Ok(MeasurementSample {
        histogram_by_ell,
        witnesses,
        min_folded,
    })
}

/// One targeted round of the degree search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionRound {
    pub ell_prime: usize,
    /// Class actually targeted (the exact model moves to the nearest
    /// nonempty class at or below `ell_prime`).
    pub target: Option<usize>,
    pub t_opt: usize,
    pub schedule: Vec<usize>,
    pub attempts: usize,
    pub observed: Option<usize>,
    pub lo: usize,
    pub hi: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeSearch {
    pub geometry: String,
    pub model: DistributionSource,
    pub seed: u64,
    pub shots: usize,
    pub initial_observed: usize,
    pub rounds: Vec<BisectionRound>,
    pub estimate: usize,
}

impl DegreeSearch {
    /// One `round ell_prime=… t_opt=… observed=… bracket=[lo,hi]` line per round.
    pub fn audit_log(&self) -> String {
        let mut s = String::new();
        for r in &self.rounds {
            let observed = r.observed.map_or("none".to_string(), |o| o.to_string());
            writeln!(
                s,
                "round ell_prime={} t_opt={} observed={} bracket=[{},{}]",
                r.ell_prime, r.t_opt, observed, r.lo, r.hi
            )
            .unwrap();
        }
        s
    }
}

/// Bisection for the degree. The actual state always evolves on `exact`;
/// schedules are trained on `model` (which may be `exact` itself or its
/// binomial estimate). Each round targets the bracket midpoint and
/// measures up to `⌈log₂ shots⌉` times; seeing `min(ℓ, L−ℓ) ≤ ℓ′` lowers the
/// upper end, otherwise the lower end moves past `ℓ′`.
pub fn find_degree_bisection(
    exact: &InvalidDistribution,
    witnesses: &[Option<Assignment>],
    model: &InvalidDistribution,
    shots: usize,
    seed: u64,
    t_max: usize,
) -> Result<DegreeSearch, ClassSimError> {
    if shots == 0 {
        return Err(ClassSimError::NoShots);
    }
    if model.counts.len() != exact.counts.len() {
        return Err(ClassSimError::ClassMismatch {
            expected: exact.counts.len(),
            got: model.counts.len(),
        });
    }
    let l = exact.num_lines();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = ClassState::uniform(exact)?;
    let initial = sample_measurement(&uniform, witnesses, shots, &mut rng)?;
    let mut hi = initial.min_folded.min(l / 2);
    let mut lo = 0;
    let attempts_per_round = (usize::BITS - (shots - 1).leading_zeros()).max(1) as usize;
    let mut rounds = Vec::new();

    while lo < hi {
        let ell_prime = (lo + hi) / 2;
        let target = match model.source {
            DistributionSource::Exact => (0..=ell_prime).rev().find(|&e| model.count(e) > 0.0),
            DistributionSource::Binomial => Some(ell_prime),
        };
        let Some(target) = target else {
            lo = ell_prime + 1;
            rounds.push(BisectionRound {
                ell_prime,
                target: None,
                t_opt: 0,
                schedule: Vec::new(),
                attempts: 0,
                observed: None,
                lo,
                hi,
                success: false,
            });
            continue;
        };
        let run = optimize_betas(model, target, t_max)?;
        let t_opt = run.schedule.t_opt_prime;
        let schedule: Vec<usize> = run.schedule.multipliers[..t_opt].to_vec();
        let mut state = ClassState::uniform(exact)?;
        for &b in &schedule {
            state.apply_query(b)?;
        }
        let mut observed = None::<usize>;
        let mut attempts = 0;
        let mut success = false;
        while attempts < attempts_per_round {
            attempts += 1;
            let s = sample_measurement(&state, witnesses, shots, &mut rng)?;
            observed = Some(observed.map_or(s.min_folded, |o| o.min(s.min_folded)));
            hi = hi.min(s.min_folded);
            if s.min_folded <= ell_prime {
                success = true;
                break;
            }
        }
        if !success {
            lo = ell_prime + 1;
        }
        rounds.push(BisectionRound {
            ell_prime,
            target: Some(target),
            t_opt,
            schedule,
            attempts,
            observed,
            lo,
            hi,
            success,
        });
    }

    Ok(DegreeSearch {
        geometry: exact.geometry.clone(),
        model: model.source,
        seed,
        shots,
        initial_observed: initial.min_folded,
        rounds,
        estimate: hi,
    })
}

//! Dense statevector simulation of the Grover threshold search.
//!
//! Qubit `q` is bit `q` of the basis index. The search circuit uses the
//! registers, in this order from qubit 0:
//!
//! * `V` — one qubit per point (hidden-variable values),
//! * `L` — one qubit per line, `|1⟩` when the line is invalid,
//! * `X` — binary count of invalid lines, most significant bit first,
//! * `Y` — the threshold `y`, same width and ordering as `X`,
//! * one flag qubit prepared in `|−⟩` that receives the comparison result.
//!
//! Multi-controlled gates act natively on the amplitudes; there is no
//! ancilla decomposition.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::classical::{invalid_count, Assignment, InvalidDistribution};
use crate::geometry::Geometry;

/// Default cap on simulated qubits (2^24 amplitudes, 256 MiB).
pub const DEFAULT_QUBIT_LIMIT: usize = 24;

/// Literal subset counters are only emitted up to this many lines.
pub const LITERAL_COUNTER_LINE_LIMIT: usize = 12;

const PAR_MIN_LEN: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateSimError {
    #[error("gate touches qubit {qubit} but the state has {num_qubits} qubits")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate uses qubit {0} more than once")]
    RepeatedQubit(usize),
    #[error("circuit needs {needed} qubits, limit is {limit}")]
    QubitLimit { needed: usize, limit: usize },
    #[error("register widths differ: {x} vs {y}")]
    WidthMismatch { x: usize, y: usize },
    #[error("{lines} lines cannot be counted in a {width}-bit register")]
    CounterOverflow { lines: usize, width: usize },
    #[error("threshold {y} outside 0..={lines}")]
    ThresholdOutOfRange { y: usize, lines: usize },
    #[error("literal counter layout is limited to {limit} lines, geometry has {lines}")]
    LiteralCounterTooLarge { lines: usize, limit: usize },
    #[error("geometry has lines with {0} points; only 2 or 3 are supported")]
    UnsupportedLine(usize),
    #[error("shots must be positive")]
    NoShots,
    #[error(transparent)]
    Classical(#[from] crate::classical::ClassicalError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    /// NOT on `target` when every `controls` qubit is `|1⟩` and every
    /// `flipped` qubit is `|0⟩`.
    Mcx {
        controls: Vec<usize>,
        flipped: Vec<usize>,
        target: usize,
    },
    /// Phase `-1` when every listed qubit is `|1⟩`.
    Mcz(Vec<usize>),
    /// Phase `e^{iθ}` when both qubits are `|1⟩`.
    Cp {
        control: usize,
        target: usize,
        theta: f64,
    },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) => vec![*q],
            Gate::Mcx {
                controls,
                flipped,
                target,
            } => controls
                .iter()
                .chain(flipped)
                .copied()
                .chain(std::iter::once(*target))
                .collect(),
            Gate::Mcz(qs) => qs.clone(),
            Gate::Cp {
                control, target, ..
            } => vec![*control, *target],
        }
    }

    fn inverse(&self) -> Gate {
        match self {
            Gate::Cp {
                control,
                target,
                theta,
            } => Gate::Cp {
                control: *control,
                target: *target,
                theta: -theta,
            },
            g => g.clone(),
        }
    }
}

/// An ordered gate list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn h(&mut self, q: usize) -> &mut Self {
        self.gates.push(Gate::H(q));
        self
    }

    pub fn x(&mut self, q: usize) -> &mut Self {
        self.gates.push(Gate::X(q));
        self
    }

    pub fn cx(&mut self, control: usize, target: usize) -> &mut Self {
        self.mcx(&[control], target)
    }

    pub fn mcx(&mut self, controls: &[usize], target: usize) -> &mut Self {
        self.mcx_var(&[], controls, target)
    }

    /// Multi-controlled NOT with `flipped` controls active on `|0⟩`.
    pub fn mcx_var(&mut self, flipped: &[usize], controls: &[usize], target: usize) -> &mut Self {
        self.gates.push(Gate::Mcx {
            controls: controls.to_vec(),
            flipped: flipped.to_vec(),
            target,
        });
        self
    }

    pub fn mcz(&mut self, qubits: &[usize]) -> &mut Self {
        self.gates.push(Gate::Mcz(qubits.to_vec()));
        self
    }

    pub fn cp(&mut self, control: usize, target: usize, theta: f64) -> &mut Self {
        self.gates.push(Gate::Cp {
            control,
            target,
            theta,
        });
        self
    }

    pub fn append(&mut self, other: &Circuit) -> &mut Self {
        self.gates.extend(other.gates.iter().cloned());
        self
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// Highest qubit index used plus one.
    pub fn width(&self) -> usize {
        self.gates
            .iter()
            .flat_map(|g| g.qubits())
            .max()
            .map_or(0, |q| q + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl QuantumState {
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.par_iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability of each value of the low `bits` qubits, summed over the rest.
    pub fn marginal_low(&self, bits: usize) -> Vec<f64> {
        let mask = (1usize << bits) - 1;
        let mut out = vec![0.0; 1 << bits];
        for (i, a) in self.amps.iter().enumerate() {
            out[i & mask] += a.norm_sqr();
        }
        out
    }

    fn check(&self, gate: &Gate) -> Result<(), GateSimError> {
        let qs = gate.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(GateSimError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
            if qs[..i].contains(&q) {
                return Err(GateSimError::RepeatedQubit(q));
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<(), GateSimError> {
        self.check(gate)?;
        match gate {
            Gate::H(q) => {
                let t = 1usize << q;
                self.amps
                    .par_chunks_mut(2 * t)
                    .with_min_len(PAR_MIN_LEN / (2 * t) + 1)
                    .for_each(|chunk| {
                        let (lo, hi) = chunk.split_at_mut(t);
                        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                            let (u, v) = (*a, *b);
                            *a = (u + v) * FRAC_1_SQRT_2;
                            *b = (u - v) * FRAC_1_SQRT_2;
                        }
                    });
            }
            Gate::X(q) => self.controlled_swap(0, 0, *q),
            Gate::Mcx {
                controls,
                flipped,
                target,
            } => {
                let on = mask_of(controls);
                let off = mask_of(flipped);
                self.controlled_swap(on | off, on, *target);
            }
            Gate::Mcz(qs) => {
                let m = mask_of(qs);
                self.amps
                    .par_iter_mut()
                    .with_min_len(PAR_MIN_LEN)
                    .enumerate()
                    .for_each(|(i, a)| {
                        if i & m == m {
                            *a = -*a;
                        }
                    });
            }
            Gate::Cp {
                control,
                target,
                theta,
            } => {
                let m = (1 << control) | (1 << target);
                let phase = Complex64::from_polar(1.0, *theta);
                self.amps
                    .par_iter_mut()
                    .with_min_len(PAR_MIN_LEN)
                    .enumerate()
                    .for_each(|(i, a)| {
                        if i & m == m {
                            *a *= phase;
                        }
                    });
            }
        }
        Ok(())
    }

    /// Swaps the target-0 and target-1 amplitudes wherever `i & care == want`.
    fn controlled_swap(&mut self, care: usize, want: usize, target: usize) {
        let t = 1usize << target;
        self.amps
            .par_chunks_mut(2 * t)
            .with_min_len(PAR_MIN_LEN / (2 * t) + 1)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * 2 * t;
                let (lo, hi) = chunk.split_at_mut(t);
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    if (base + k) & care == want {
                        std::mem::swap(a, b);
                    }
                }
            });
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<(), GateSimError> {
        for g in &circuit.gates {
            self.apply(g)?;
        }
        Ok(())
    }
}

fn mask_of(qs: &[usize]) -> usize {
    qs.iter().fold(0, |m, &q| m | 1 << q)
}

/// Which gate layout fills the `X` counter.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterLayout {
    /// One controlled `+1` per line qubit, as a carry chain of multi-controlled NOTs.
    #[default]
    Ripple,
    /// For each bit `k`, one multi-controlled NOT per `2^k`-subset of line qubits.
    /// Bit `k` flips `C(c, 2^k)` times for `c` invalid lines, which is odd exactly
    /// when bit `k` of `c` is set.
    Literal,
}

/// Qubit positions of the Grover search registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroverLayout {
    pub points: usize,
    pub lines: usize,
    /// Width of both the `X` and `Y` registers.
    pub width: usize,
}

/// `⌈log₂(L+1)⌉`, at least 1: enough bits to hold any count `0..=L`.
pub fn counter_width(lines: usize) -> usize {
    (usize::BITS - lines.leading_zeros()).max(1) as usize
}

impl GroverLayout {
    pub fn for_geometry(g: &Geometry) -> Self {
        Self {
            points: g.num_points,
            lines: g.num_lines(),
            width: counter_width(g.num_lines()),
        }
    }

    pub fn with_width(g: &Geometry, width: usize) -> Result<Self, GateSimError> {
        if width >= usize::BITS as usize || g.num_lines() >= 1 << width {
            return Err(GateSimError::CounterOverflow {
                lines: g.num_lines(),
                width,
            });
        }
        Ok(Self {
            points: g.num_points,
            lines: g.num_lines(),
            width,
        })
    }

    pub fn v(&self, point: usize) -> usize {
        point
    }

    pub fn l(&self, line: usize) -> usize {
        self.points + line
    }

    /// `X` qubit `k`, where `k = 0` is the most significant bit.
    pub fn x(&self, k: usize) -> usize {
        self.points + self.lines + k
    }

    pub fn y(&self, k: usize) -> usize {
        self.points + self.lines + self.width + k
    }

    pub fn flag(&self) -> usize {
        self.points + self.lines + 2 * self.width
    }

    pub fn num_qubits(&self) -> usize {
        self.points + self.lines + 2 * self.width + 1
    }

    pub fn v_qubits(&self) -> Vec<usize> {
        (0..self.points).collect()
    }

    pub fn x_qubits(&self) -> Vec<usize> {
        (0..self.width).map(|k| self.x(k)).collect()
    }

    pub fn y_qubits(&self) -> Vec<usize> {
        (0..self.width).map(|k| self.y(k)).collect()
    }

    /// Reads a register value (MSB first) out of a basis index.
    pub fn read(&self, index: usize, qubits: &[usize]) -> usize {
        qubits
            .iter()
            .fold(0, |acc, &q| (acc << 1) | (index >> q & 1))
    }
}

/// Parity cascade setting `target` to `|1⟩` iff the line is invalid.
fn line_check(
    c: &mut Circuit,
    g: &Geometry,
    line: usize,
    point_qubit: impl Fn(usize) -> usize,
    target: usize,
) {
    let l = &g.lines[line];
    for &p in &l.points {
        c.cx(point_qubit(p), target);
    }
    if l.is_negative() {
        c.x(target);
    }
}

fn check_lines(g: &Geometry) -> Result<(), GateSimError> {
    match g.lines.iter().find(|l| !(2..=3).contains(&l.points.len())) {
        Some(l) => Err(GateSimError::UnsupportedLine(l.points.len())),
        None => Ok(()),
    }
}

/// Computes per-line validity into `L` and the invalid count into `X`.
pub fn build_ug(
    g: &Geometry,
    layout: &GroverLayout,
    counter: CounterLayout,
) -> Result<Circuit, GateSimError> {
    check_lines(g)?;
    if g.num_lines() >= 1 << layout.width {
        return Err(GateSimError::CounterOverflow {
            lines: g.num_lines(),
            width: layout.width,
        });
    }
    let mut c = Circuit::new();
    for i in 0..g.num_lines() {
        line_check(&mut c, g, i, |p| layout.v(p), layout.l(i));
    }
    let w = layout.width;
    match counter {
        CounterLayout::Ripple => {
            for i in 0..g.num_lines() {
                // +1 on X controlled by L_i: bit k flips when all lower bits are set
                for k in 0..w {
                    let mut controls = vec![layout.l(i)];
                    controls.extend((k + 1..w).map(|j| layout.x(j)));
                    c.mcx(&controls, layout.x(k));
                }
            }
        }
        CounterLayout::Literal => {
            if g.num_lines() > LITERAL_COUNTER_LINE_LIMIT {
                return Err(GateSimError::LiteralCounterTooLarge {
                    lines: g.num_lines(),
                    limit: LITERAL_COUNTER_LINE_LIMIT,
                });
            }
            for k in 0..w {
                let size = 1usize << k;
                let target = layout.x(w - 1 - k);
                for subset in subsets_of_size(g.num_lines(), size) {
                    let controls: Vec<usize> = subset.iter().map(|&i| layout.l(i)).collect();
                    c.mcx(&controls, target);
                }
            }
        }
    }
    Ok(c)
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Ancilla-free comparator: flips `flag` iff `x ≤ y` (both MSB first).
/// Leaves `Y` holding `x XOR y`; follow with [`build_uc_prime`].
pub fn build_uc(x: &[usize], y: &[usize], flag: usize) -> Result<Circuit, GateSimError> {
    if x.len() != y.len() {
        return Err(GateSimError::WidthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let mut c = Circuit::new();
    c.x(flag);
    for i in 0..x.len() {
        // y_0..y_{i-1} now hold x_j XOR y_j: all zero means the prefixes agree
        c.mcx_var(&y[..=i], &[x[i]], flag);
        c.cx(x[i], y[i]);
    }
    Ok(c)
}

/// Restores `Y` after [`build_uc`].
pub fn build_uc_prime(x: &[usize], y: &[usize]) -> Result<Circuit, GateSimError> {
    if x.len() != y.len() {
        return Err(GateSimError::WidthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let mut c = Circuit::new();
    for i in (0..x.len()).rev() {
        c.cx(x[i], y[i]);
    }
    Ok(c)
}

/// Inversion about the mean on `qubits`, up to a global phase of `-1`.
pub fn build_diffusion(qubits: &[usize]) -> Circuit {
    let mut c = Circuit::new();
    for &q in qubits {
        c.h(q);
    }
    for &q in qubits {
        c.x(q);
    }
    if !qubits.is_empty() {
        c.mcz(qubits);
    }
    for &q in qubits {
        c.x(q);
    }
    for &q in qubits {
        c.h(q);
    }
    c
}

/// Loads the binary value `y` (MSB first) into `Y` from `|0…0⟩`.
pub fn assign_threshold(layout: &GroverLayout, y: usize) -> Circuit {
    let mut c = Circuit::new();
    for k in 0..layout.width {
        if y >> (layout.width - 1 - k) & 1 == 1 {
            c.x(layout.y(k));
        }
    }
    c
}

/// The marking oracle `U_G† · U_C' · U_C · U_G`.
pub fn build_oracle(
    g: &Geometry,
    layout: &GroverLayout,
    counter: CounterLayout,
) -> Result<Circuit, GateSimError> {
    let ug = build_ug(g, layout, counter)?;
    let xs = layout.x_qubits();
    let ys = layout.y_qubits();
    let mut c = ug.clone();
    c.append(&build_uc(&xs, &ys, layout.flag())?)
        .append(&build_uc_prime(&xs, &ys)?)
        .append(&ug.inverse());
    Ok(c)
}

/// Iteration plan for one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroverPlan {
    pub y: usize,
    pub sigma: f64,
    pub z: f64,
    pub m_over_n: f64,
    pub t_g: usize,
    pub t_a: usize,
}

/// Chooses `t_G = ⌊(π/4)·√(n/m)⌋` (at least 1). The marked fraction `m/n` is
/// exact when a distribution is given, otherwise the normal estimate
/// `Φ((y - L/2)/σ)` with `σ = √L/2`.
pub fn plan_iterations(
    g: &Geometry,
    y: usize,
    hint: Option<&InvalidDistribution>,
) -> Result<GroverPlan, GateSimError> {
    let l = g.num_lines();
    if y > l {
        return Err(GateSimError::ThresholdOutOfRange { y, lines: l });
    }
    let sigma = (l as f64).sqrt() / 2.0;
    let z = if sigma > 0.0 {
        (y as f64 - l as f64 / 2.0) / sigma
    } else {
        0.0
    };
    let m_over_n = if y >= l {
        1.0
    } else if let Some(d) = hint {
        d.fraction_at_most(y)
    } else {
        Normal::standard().cdf(z)
    };
    let n = 2f64.powi(g.num_points as i32);
    // nothing marked: fall back to the single-marked iteration count
    let ratio = if m_over_n > 0.0 { 1.0 / m_over_n } else { n };
    let t_g = ((PI / 4.0) * ratio.sqrt()).floor().max(1.0) as usize;
    Ok(GroverPlan {
        y,
        sigma,
        z,
        m_over_n,
        t_g,
        t_a: counter_width(l),
    })
}

#[derive(Debug, Clone)]
pub struct GroverOptions {
    /// Initial threshold; defaults to the number of negative lines.
    pub y0: Option<usize>,
    pub shots: usize,
    pub seed: u64,
    /// Overrides the planned number of Grover iterations per round (0 = control run).
    pub t_g: Option<usize>,
    /// Overrides the number of adaptive rounds.
    pub rounds: Option<usize>,
    /// Exact distribution for the marked fraction; the normal estimate is used otherwise.
    pub dist_hint: Option<InvalidDistribution>,
    pub counter: CounterLayout,
    pub qubit_limit: usize,
}

impl Default for GroverOptions {
    fn default() -> Self {
        Self {
            y0: None,
            shots: 2048,
            seed: 0,
            t_g: None,
            rounds: None,
            dist_hint: None,
            counter: CounterLayout::Ripple,
            qubit_limit: DEFAULT_QUBIT_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroverRound {
    pub y_in: usize,
    pub t_g: usize,
    pub m_over_n: f64,
    /// Exact probability of measuring each invalid count.
    pub probability_by_ell: BTreeMap<usize, f64>,
    pub histogram_by_ell: BTreeMap<usize, usize>,
    pub modal_assignment: String,
    pub x: usize,
    pub y_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroverReport {
    pub geometry: String,
    pub num_qubits: usize,
    pub y0: usize,
    pub sigma: f64,
    #[serde(rename = "t_G")]
    pub t_g: usize,
    #[serde(rename = "t_A")]
    pub t_a: usize,
    pub seed: u64,
    pub shots: usize,
    pub counter: CounterLayout,
    pub per_round: Vec<GroverRound>,
    pub final_y: usize,
}

impl GroverReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `ell,count` CSV of the last round's shots.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("ell,count\n");
        if let Some(r) = self.per_round.last() {
            for (ell, n) in &r.histogram_by_ell {
                s.push_str(&format!("{ell},{n}\n"));
            }
        }
        s
    }
}

/// Invalid count of every `V`-register basis value.
pub fn invalid_counts_table(g: &Geometry) -> Result<Vec<usize>, GateSimError> {
    (0..1u64 << g.num_points)
        .map(|a| Ok(invalid_count(g, &Assignment::new(a, g.num_points))?))
        .collect()
}

/// Runs the adaptive threshold search: each round prepares the uniform
/// superposition, applies `t_G` oracle + diffusion steps, samples the `V`
/// register and lowers the threshold to the best count seen in the modal
/// outcome or its bit-flipped complement.
pub fn run_grover(g: &Geometry, opts: &GroverOptions) -> Result<GroverReport, GateSimError> {
    if opts.shots == 0 {
        return Err(GateSimError::NoShots);
    }
    let layout = GroverLayout::for_geometry(g);
    let nq = layout.num_qubits();
    if nq > opts.qubit_limit {
        return Err(GateSimError::QubitLimit {
            needed: nq,
            limit: opts.qubit_limit,
        });
    }
    let l = g.num_lines();
    let y0 = opts.y0.unwrap_or_else(|| g.negative_count());
    if y0 > l {
        return Err(GateSimError::ThresholdOutOfRange { y: y0, lines: l });
    }
    let oracle = build_oracle(g, &layout, opts.counter)?;
    let diffusion = build_diffusion(&layout.v_qubits());
    let ells = invalid_counts_table(g)?;
    let first_plan = plan_iterations(g, y0, opts.dist_hint.as_ref())?;
    let rounds = opts.rounds.unwrap_or(first_plan.t_a);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut y = y0;
    let mut per_round = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let plan = plan_iterations(g, y, opts.dist_hint.as_ref())?;
        let t_g = opts.t_g.unwrap_or(plan.t_g);

        let mut prep = Circuit::new();
        for q in layout.v_qubits() {
            prep.h(q);
        }
        prep.append(&assign_threshold(&layout, y));
        prep.x(layout.flag()).h(layout.flag());

        let mut state = QuantumState::zero(nq);
        state.apply_circuit(&prep)?;
        for _ in 0..t_g {
            state.apply_circuit(&oracle)?;
            state.apply_circuit(&diffusion)?;
        }

        let marginal = state.marginal_low(g.num_points);
        let mut probability_by_ell = BTreeMap::new();
        for (a, p) in marginal.iter().enumerate() {
            *probability_by_ell.entry(ells[a]).or_insert(0.0) += p;
        }
        let sampler = WeightedIndex::new(&marginal).expect("probabilities are finite and nonzero");
        let mut histogram_by_ell = BTreeMap::new();
        let mut by_assignment: HashMap<usize, usize> = HashMap::new();
        for _ in 0..opts.shots {
            let a = sampler.sample(&mut rng);
            *histogram_by_ell.entry(ells[a]).or_insert(0) += 1;
            *by_assignment.entry(a).or_insert(0) += 1;
        }
        let (&modal, _) = by_assignment
            .iter()
            .max_by(|(a1, c1), (a2, c2)| c1.cmp(c2).then(a2.cmp(a1)))
            .expect("at least one shot");
        let x = ells[modal];
        let flipped = Assignment::new(modal as u64, g.num_points).complement();
        let y_out = y.min(x).min(ells[flipped.bits() as usize]);
        per_round.push(GroverRound {
            y_in: y,
            t_g,
            m_over_n: plan.m_over_n,
            probability_by_ell,
            histogram_by_ell,
            modal_assignment: Assignment::new(modal as u64, g.num_points).to_bit_string(),
            x,
            y_out,
        });
        y = y_out;
    }

    Ok(GroverReport {
        geometry: g.name.clone(),
        num_qubits: nq,
        y0,
        sigma: first_plan.sigma,
        t_g: opts.t_g.unwrap_or(first_plan.t_g),
        t_a: rounds,
        seed: opts.seed,
        shots: opts.shots,
        counter: opts.counter,
        per_round,
        final_y: y,
    })
}

/// Qubits of the quasi-Grover circuit: `V` points, then one line qubit and
/// one constant `|1⟩` qubit that receives the phase kickback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuasiLayout {
    pub points: usize,
}

impl QuasiLayout {
    pub fn line_qubit(&self) -> usize {
        self.points
    }

    pub fn phase_qubit(&self) -> usize {
        self.points + 1
    }

    pub fn num_qubits(&self) -> usize {
        self.points + 2
    }
}

/// One query: every line's validity is computed into the line qubit, a
/// controlled phase `e^{iθ}` is kicked back, and the check is undone; then
/// diffusion on `V`.
pub fn build_quasi_query(g: &Geometry, theta: f64) -> Result<Circuit, GateSimError> {
    check_lines(g)?;
    let layout = QuasiLayout {
        points: g.num_points,
    };
    let mut c = Circuit::new();
    for i in 0..g.num_lines() {
        let mut check = Circuit::new();
        line_check(&mut check, g, i, |p| p, layout.line_qubit());
        c.append(&check)
            .cp(layout.line_qubit(), layout.phase_qubit(), theta)
            .append(&check.inverse());
    }
    c.append(&build_diffusion(&(0..g.num_points).collect::<Vec<_>>()));
    Ok(c)
}

/// Gate-level quasi-Grover evolution. Returns `P(ℓ)` after each query
/// (index 0 is the uniform state), using phase `b_t · 2π/L` at query `t`.
pub fn quasi_grover_trajectory(
    g: &Geometry,
    multipliers: &[usize],
    qubit_limit: usize,
) -> Result<Vec<Vec<f64>>, GateSimError> {
    let layout = QuasiLayout {
        points: g.num_points,
    };
    if layout.num_qubits() > qubit_limit {
        return Err(GateSimError::QubitLimit {
            needed: layout.num_qubits(),
            limit: qubit_limit,
        });
    }
    let l = g.num_lines();
    let beta = 2.0 * PI / l.max(1) as f64;
    let ells = invalid_counts_table(g)?;
    let mut state = QuantumState::zero(layout.num_qubits());
    for q in 0..g.num_points {
        state.apply(&Gate::H(q))?;
    }
    state.apply(&Gate::X(layout.phase_qubit()))?;
    let p_of = |s: &QuantumState| {
        let mut p = vec![0.0; l + 1];
        for (a, m) in s.marginal_low(g.num_points).iter().enumerate() {
            p[ells[a]] += m;
        }
        p
    };
    let mut out = vec![p_of(&state)];
    for &b in multipliers {
        state.apply_circuit(&build_quasi_query(g, b as f64 * beta)?)?;
        out.push(p_of(&state));
    }
    Ok(out)
}

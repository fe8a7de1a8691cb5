//! Exact classical evaluation of hidden-variable assignments.
//!
//! An assignment gives every point a bit `a_v` (value `(-1)^{a_v}`); line `i`
//! is invalid when the parity of its points differs from its sign bit. The
//! full distribution of invalid-line counts over all `2^V` assignments is
//! computed by a Gray-code walk that updates the count incrementally.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::Geometry;

/// Largest point count accepted by the brute-force enumeration by default.
pub const DEFAULT_POINT_LIMIT: usize = 30;

/// Number of high bits fixed per independent Gray-code block.
const BLOCK_BITS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClassicalError {
    #[error("assignment has {found} bits but the geometry has {expected} points")]
    LengthMismatch { expected: usize, found: usize },
    #[error("geometry has {points} points, brute force is limited to {limit}")]
    TooManyPoints { points: usize, limit: usize },
}

/// One hidden-variable configuration: bit `v` is the value of point `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Assignment {
    bits: u64,
    len: usize,
}

impl Assignment {
    pub fn new(bits: u64, len: usize) -> Self {
        assert!(len <= 64, "assignments hold at most 64 points");
        let mask = if len == 64 {
            u64::MAX
        } else {
            (1u64 << len) - 1
        };
        Self {
            bits: bits & mask,
            len,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(0, len)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, point: usize) -> bool {
        self.bits >> point & 1 == 1
    }

    /// Every point value flipped.
    pub fn complement(&self) -> Self {
        Self::new(!self.bits, self.len)
    }

    /// Point values as a string, point 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|p| if self.get(p) { '1' } else { '0' })
            .collect()
    }
}

/// Where the counts of an [`InvalidDistribution`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionSource {
    Exact,
    Binomial,
}

impl DistributionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DistributionSource::Exact => "exact",
            DistributionSource::Binomial => "binomial",
        }
    }
}

/// Map `ℓ → |j_ℓ|`, the number of assignments with `ℓ` invalid lines.
///
/// Counts are `f64` because the binomial model is non-integral when `L > V`;
/// exact counts stay below `2^53` and are represented exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvalidDistribution {
    pub geometry: String,
    pub num_points: usize,
    pub counts: Vec<f64>,
    pub source: DistributionSource,
}

impl InvalidDistribution {
    pub fn from_counts(
        geometry: impl Into<String>,
        num_points: usize,
        counts: Vec<f64>,
        source: DistributionSource,
    ) -> Self {
        Self {
            geometry: geometry.into(),
            num_points,
            counts,
            source,
        }
    }

    pub fn num_lines(&self) -> usize {
        self.counts.len().saturating_sub(1)
    }

    /// `n = 2^V`.
    pub fn total(&self) -> f64 {
        2f64.powi(self.num_points as i32)
    }

    pub fn count(&self, ell: usize) -> f64 {
        self.counts.get(ell).copied().unwrap_or(0.0)
    }

    pub fn probability(&self, ell: usize) -> f64 {
        self.count(ell) / self.total()
    }

    /// Smallest `ℓ` with a nonzero count.
    pub fn degree(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c > 0.0)
    }

    /// Fraction of assignments with at most `y` invalid lines.
    pub fn fraction_at_most(&self, y: usize) -> f64 {
        self.counts.iter().take(y + 1).sum::<f64>() / self.total()
    }

    pub fn is_symmetric(&self) -> bool {
        let l = self.num_lines();
        (0..=l).all(|e| self.counts[e] == self.counts[l - e])
    }

    /// `ell,count` CSV with a `# geometry=… n=… source=…` comment header.
    /// Only nonzero counts are listed.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# geometry={} n={} source={}\nell,count\n",
            self.geometry,
            self.total(),
            self.source.as_str()
        );
        for (ell, &c) in self.counts.iter().enumerate() {
            if c != 0.0 {
                writeln!(s, "{ell},{c}").unwrap();
            }
        }
        s
    }
}

/// Exact distribution plus, per invalid count, the lowest assignment reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub distribution: InvalidDistribution,
    pub witnesses: Vec<Option<Assignment>>,
}

impl BruteForce {
    pub fn degree(&self) -> Degree {
        let d = self
            .distribution
            .degree()
            .expect("a complete enumeration has at least one class");
        Degree {
            d,
            witness: self.witnesses[d].expect("nonempty class has a witness"),
        }
    }

    pub fn witness(&self, ell: usize) -> Option<Assignment> {
        self.witnesses.get(ell).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Degree {
    pub d: usize,
    pub witness: Assignment,
}

/// Per-line point masks and sign bits, for fast parity evaluation.
struct LineMasks {
    masks: Vec<u64>,
    signs: Vec<u32>,
}

impl LineMasks {
    fn new(g: &Geometry) -> Self {
        let masks = g
            .lines
            .iter()
            .map(|l| l.points.iter().fold(0u64, |m, &p| m | 1 << p))
            .collect();
        let signs = g.lines.iter().map(|l| l.sign.parity() as u32).collect();
        Self { masks, signs }
    }

    fn invalid_bits(&self, bits: u64) -> Vec<u64> {
        let mut state = vec![0u64; self.masks.len().div_ceil(64).max(1)];
        for (i, (&m, &s)) in self.masks.iter().zip(&self.signs).enumerate() {
            if ((bits & m).count_ones() ^ s) & 1 == 1 {
                state[i / 64] |= 1 << (i % 64);
            }
        }
        state
    }
}

pub fn invalid_count(g: &Geometry, a: &Assignment) -> Result<usize, ClassicalError> {
    if a.len() != g.num_points {
        return Err(ClassicalError::LengthMismatch {
            expected: g.num_points,
            found: a.len(),
        });
    }
    let count = g
        .lines
        .iter()
        .filter(|l| {
            let parity = l.points.iter().filter(|&&p| a.get(p)).count() as u8 & 1;
            parity != l.sign.parity()
        })
        .count();
    Ok(count)
}

pub fn invalid_distribution(g: &Geometry) -> Result<InvalidDistribution, ClassicalError> {
    Ok(brute_force(g)?.distribution)
}

pub fn degree_of(g: &Geometry) -> Result<Degree, ClassicalError> {
    Ok(brute_force(g)?.degree())
}

pub fn brute_force(g: &Geometry) -> Result<BruteForce, ClassicalError> {
    brute_force_with_limit(g, DEFAULT_POINT_LIMIT)
}

/// Exact enumeration of all `2^V` assignments, split into independent
/// Gray-code blocks over the low bits that run in parallel.
pub fn brute_force_with_limit(g: &Geometry, limit: usize) -> Result<BruteForce, ClassicalError> {
    let v = g.num_points;
    if v > limit || v > 62 {
        return Err(ClassicalError::TooManyPoints {
            points: v,
            limit: limit.min(62),
        });
    }
    let l = g.num_lines();
    let masks = LineMasks::new(g);
    // per point: which lines toggle when the point flips
    let words = l.div_ceil(64).max(1);
    let mut toggles = vec![vec![0u64; words]; v];
    for (i, line) in g.lines.iter().enumerate() {
        for &p in &line.points {
            toggles[p][i / 64] ^= 1 << (i % 64);
        }
    }

    let high = BLOCK_BITS.min(v);
    let low = v - high;
    let partials: Vec<Partial> = (0..1u64 << high)
        .into_par_iter()
        .map(|block| {
            let base = block << low;
            if words == 1 {
                walk_single(&masks, &toggles, base, low, l)
            } else {
                walk_multi(&masks, &toggles, base, low, l)
            }
        })
        .collect();

    let mut counts = vec![0u64; l + 1];
    let mut witness = vec![u64::MAX; l + 1];
    for part in partials {
        for e in 0..=l {
            counts[e] += part.counts[e];
            witness[e] = witness[e].min(part.witness[e]);
        }
    }
    Ok(BruteForce {
        distribution: InvalidDistribution {
            geometry: g.name.clone(),
            num_points: v,
            counts: counts.into_iter().map(|c| c as f64).collect(),
            source: DistributionSource::Exact,
        },
        witnesses: witness
            .into_iter()
            .map(|w| (w != u64::MAX).then(|| Assignment::new(w, v)))
            .collect(),
    })
}

struct Partial {
    counts: Vec<u64>,
    witness: Vec<u64>,
}

impl Partial {
    fn new(l: usize) -> Self {
        Self {
            counts: vec![0; l + 1],
            witness: vec![u64::MAX; l + 1],
        }
    }

    #[inline]
    fn record(&mut self, ell: usize, a: u64) {
        self.counts[ell] += 1;
        if a < self.witness[ell] {
            self.witness[ell] = a;
        }
    }
}

fn walk_single(
    masks: &LineMasks,
    toggles: &[Vec<u64>],
    base: u64,
    low: usize,
    l: usize,
) -> Partial {
    let mut part = Partial::new(l);
    let mut a = base;
    let mut state = masks.invalid_bits(a)[0];
    let mut ell = state.count_ones() as usize;
    part.record(ell, a);
    let flips: Vec<u64> = toggles.iter().map(|t| t[0]).collect();
    for i in 1..1u64 << low {
        let bit = i.trailing_zeros() as usize;
        a ^= 1 << bit;
        state ^= flips[bit];
        ell = state.count_ones() as usize;
        part.record(ell, a);
    }
    part
}

fn walk_multi(masks: &LineMasks, toggles: &[Vec<u64>], base: u64, low: usize, l: usize) -> Partial {
    let mut part = Partial::new(l);
    let mut a = base;
    let mut state = masks.invalid_bits(a);
    let mut ell: usize = state.iter().map(|w| w.count_ones() as usize).sum();
    part.record(ell, a);
    for i in 1..1u64 << low {
        let bit = i.trailing_zeros() as usize;
        a ^= 1 << bit;
        for (s, &t) in state.iter_mut().zip(&toggles[bit]) {
            let before = (*s & t).count_ones() as isize;
            let total = t.count_ones() as isize;
            // invalid lines become valid, valid ones invalid
            ell = (ell as isize + total - 2 * before) as usize;
            *s ^= t;
        }
        part.record(ell, a);
    }
    part
}

/// `|j_ℓ| ≈ C(L,ℓ)·2^{V-L}`.
pub fn binomial_distribution(g: &Geometry) -> InvalidDistribution {
    binomial_counts(&g.name, g.num_points, g.num_lines())
}

pub fn binomial_counts(name: &str, num_points: usize, num_lines: usize) -> InvalidDistribution {
    let scale = 2f64.powi(num_points as i32 - num_lines as i32);
    let mut counts = Vec::with_capacity(num_lines + 1);
    let mut c = 1.0f64;
    for ell in 0..=num_lines {
        counts.push(c * scale);
        c = c * (num_lines - ell) as f64 / (ell + 1) as f64;
    }
    InvalidDistribution {
        geometry: name.to_string(),
        num_points,
        counts,
        source: DistributionSource::Binomial,
    }
}

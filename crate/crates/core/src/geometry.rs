//! Point-line geometries with signed lines.
//!
//! Points are indexed `0..V`. Each line carries 2 or 3 points and a sign: a
//! positive line requires the parity of its point values to be 0, a negative
//! one requires parity 1. Geometries built from Pauli operators keep the
//! operator labels so the signs can be re-derived.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::str::FromStr;

use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;
use thiserror::Error;

use crate::pauli::{context_sign, ContextSign, PauliError, PauliOperator};

/// Largest `N` accepted by [`build_symplectic`] unless a larger limit is given.
pub const DEFAULT_SYMPLECTIC_LIMIT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("unknown geometry name {0:?} (expected triangle, grid, doily, two_spread or eloily)")]
    UnknownName(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("operator {label} appears more than once")]
    DuplicateOperator { label: String },
    #[error("the identity operator cannot be a point")]
    IdentityOperator,
    #[error("symplectic space requested for N={n}, allowed range is 1..={limit}")]
    SymplecticLimit { n: usize, limit: usize },
    #[error("geometry has no spread")]
    NoSpread,
    #[error("{0}")]
    Bounds(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("geometry has no lines")]
    EmptyLineSet,
    #[error("invalid geometry: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Line {
    pub points: Vec<usize>,
    pub sign: ContextSign,
}

impl Line {
    pub fn new(points: impl Into<Vec<usize>>, sign: ContextSign) -> Self {
        Self {
            points: points.into(),
            sign,
        }
    }

    pub fn is_negative(&self) -> bool {
        self.sign == ContextSign::Negative
    }

    fn sorted_points(&self) -> Vec<usize> {
        let mut p = self.points.clone();
        p.sort_unstable();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Geometry {
    pub name: String,
    pub num_points: usize,
    pub lines: Vec<Line>,
    pub labels: Option<Vec<PauliOperator>>,
}

/// The example geometries that can be built by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedGeometry {
    Triangle,
    Grid,
    Doily,
    TwoSpread,
    Eloily,
}

impl NamedGeometry {
    pub const ALL: [NamedGeometry; 5] = [
        NamedGeometry::Triangle,
        NamedGeometry::Grid,
        NamedGeometry::Doily,
        NamedGeometry::TwoSpread,
        NamedGeometry::Eloily,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NamedGeometry::Triangle => "triangle",
            NamedGeometry::Grid => "grid",
            NamedGeometry::Doily => "doily",
            NamedGeometry::TwoSpread => "two_spread",
            NamedGeometry::Eloily => "eloily",
        }
    }
}

impl fmt::Display for NamedGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NamedGeometry {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "triangle" => Ok(NamedGeometry::Triangle),
            "grid" => Ok(NamedGeometry::Grid),
            "doily" => Ok(NamedGeometry::Doily),
            "two_spread" | "twospread" => Ok(NamedGeometry::TwoSpread),
            "eloily" => Ok(NamedGeometry::Eloily),
            _ => Err(GeometryError::UnknownName(s.to_string())),
        }
    }
}

/// A broken [`Geometry`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    IndexOutOfRange { line: usize, point: usize },
    BadLineSize { line: usize, size: usize },
    RepeatedPoint { line: usize, point: usize },
    DuplicateLine { line: usize, first: usize },
    LabelCount { expected: usize, found: usize },
    LabelDimension { point: usize },
    NotAContext { line: usize },
    SignMismatch { line: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexOutOfRange { line, point } => {
                write!(f, "line {line}: index out of range ({point})")
            }
            Violation::BadLineSize { line, size } => {
                write!(f, "line {line}: has {size} points, expected 2 or 3")
            }
            Violation::RepeatedPoint { line, point } => {
                write!(f, "line {line}: repeated point {point}")
            }
            Violation::DuplicateLine { line, first } => {
                write!(f, "line {line}: duplicate of line {first}")
            }
            Violation::LabelCount { expected, found } => {
                write!(f, "label count {found} does not match {expected} points")
            }
            Violation::LabelDimension { point } => {
                write!(f, "point {point}: label qubit count differs from point 0")
            }
            Violation::NotAContext { line } => write!(f, "line {line}: labels are not a context"),
            Violation::SignMismatch { line } => write!(f, "line {line}: line sign mismatch"),
        }
    }
}

/// Classical bounds derived from the degree of contextuality.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ContextualityBounds {
    /// `L - 2d`.
    pub chi_bound: i64,
    /// Line-line game bound; `None` when points have differing line counts.
    pub omega_ll: Option<f64>,
    /// Point-line game bound `1 - (d/L)/3`.
    pub omega_pl: f64,
}

impl Geometry {
    pub fn new(name: impl Into<String>, num_points: usize, lines: Vec<Line>) -> Self {
        Self {
            name: name.into(),
            num_points,
            lines,
            labels: None,
        }
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn negative_count(&self) -> usize {
        self.lines.iter().filter(|l| l.is_negative()).count()
    }

    /// Number of lines through each point.
    pub fn lines_per_point(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_points];
        for line in &self.lines {
            for &p in &line.points {
                if p < self.num_points {
                    counts[p] += 1;
                }
            }
        }
        counts
    }

    /// Common number of lines per point, if every point has the same count.
    pub fn uniform_lines_per_point(&self) -> Option<usize> {
        let counts = self.lines_per_point();
        let first = *counts.first()?;
        counts.iter().all(|&c| c == first).then_some(first)
    }

    /// Line indices through each point.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.num_points];
        for (i, line) in self.lines.iter().enumerate() {
            for &p in &line.points {
                inc[p].push(i);
            }
        }
        inc
    }

    /// Every line has an odd number of points, so flipping all point values
    /// toggles every line.
    pub fn has_odd_lines(&self) -> bool {
        self.lines.iter().all(|l| l.points.len() % 2 == 1)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
        for (i, line) in self.lines.iter().enumerate() {
            if !(2..=3).contains(&line.points.len()) {
                out.push(Violation::BadLineSize {
                    line: i,
                    size: line.points.len(),
                });
            }
            for &p in &line.points {
                if p >= self.num_points {
                    out.push(Violation::IndexOutOfRange { line: i, point: p });
                }
            }
            let sorted = line.sorted_points();
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                out.push(Violation::RepeatedPoint {
                    line: i,
                    point: w[0],
                });
            }
            if let Some(&first) = seen.get(&sorted) {
                out.push(Violation::DuplicateLine { line: i, first });
            } else {
                seen.insert(sorted, i);
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.num_points {
                out.push(Violation::LabelCount {
                    expected: self.num_points,
                    found: labels.len(),
                });
                return out;
            }
            let n = labels.first().map(|l| l.n_qubits()).unwrap_or(0);
            let mut dims_ok = true;
            for (p, l) in labels.iter().enumerate() {
                if l.n_qubits() != n {
                    out.push(Violation::LabelDimension { point: p });
                    dims_ok = false;
                }
            }
            if !dims_ok {
                return out;
            }
            for (i, line) in self.lines.iter().enumerate() {
                if line.points.iter().any(|&p| p >= self.num_points) {
                    continue;
                }
                match label_line_sign(labels, &line.points) {
                    None => out.push(Violation::NotAContext { line: i }),
                    Some(s) if s != line.sign => out.push(Violation::SignMismatch { line: i }),
                    Some(_) => {}
                }
            }
        }
        out
    }

    /// Returns `self` unchanged if it satisfies every invariant.
    pub fn validated(self) -> Result<Self, GeometryError> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(GeometryError::Invalid(v))
        }
    }

    pub fn contextuality_bounds(
        &self,
        degree: usize,
        players: usize,
    ) -> Result<ContextualityBounds, GeometryError> {
        let l = self.num_lines();
        if degree > l {
            return Err(GeometryError::Bounds(format!(
                "degree {degree} exceeds line count {l}"
            )));
        }
        if players == 0 {
            return Err(GeometryError::Bounds(
                "player count must be positive".into(),
            ));
        }
        let chi_bound = l as i64 - 2 * degree as i64;
        let omega_pl = if l == 0 {
            1.0
        } else {
            1.0 - (degree as f64 / l as f64) / 3.0
        };
        let omega_ll = match self.uniform_lines_per_point() {
            Some(lp) => {
                if players > lp {
                    return Err(GeometryError::Bounds(format!(
                        "player count {players} exceeds lines per point {lp}"
                    )));
                }
                let ratio = (lp as f64 - 1.0) / binomial(lp as u64, players as u64);
                Some(1.0 - ratio * degree as f64 / self.num_points as f64)
            }
            None => None,
        };
        Ok(ContextualityBounds {
            chi_bound,
            omega_ll,
            omega_pl,
        })
    }

    /// Bipartite point/line incidence graph. Node weights are `None` for
    /// points and `Some(sign)` for lines.
    pub fn incidence_graph(&self) -> UnGraph<Option<ContextSign>, ()> {
        let mut g = UnGraph::with_capacity(self.num_points + self.num_lines(), 0);
        let points: Vec<_> = (0..self.num_points).map(|_| g.add_node(None)).collect();
        for line in &self.lines {
            let ln = g.add_node(Some(line.sign));
            for &p in &line.points {
                g.add_edge(points[p], ln, ());
            }
        }
        g
    }

    /// Labelling-independent hash of the signed incidence structure
    /// (colour refinement). Isomorphic geometries hash equal.
    pub fn invariant_hash(&self, with_signs: bool) -> u64 {
        let g = self.incidence_graph();
        let mut colours: Vec<u64> = g
            .node_weights()
            .map(|w| match w {
                None => 1,
                Some(s) if with_signs => 2 + s.parity() as u64,
                Some(_) => 2,
            })
            .collect();
        let rounds = g.node_count().min(8);
        for _ in 0..rounds {
            let next: Vec<u64> = g
                .node_indices()
                .map(|v| {
                    let mut nb: Vec<u64> = g.neighbors(v).map(|u| colours[u.index()]).collect();
                    nb.sort_unstable();
                    let mut h = DefaultHasher::new();
                    colours[v.index()].hash(&mut h);
                    nb.hash(&mut h);
                    h.finish()
                })
                .collect();
            colours = next;
        }
        colours.sort_unstable();
        let mut h = DefaultHasher::new();
        colours.hash(&mut h);
        h.finish()
    }

    /// Incidence isomorphism, optionally requiring line signs to match.
    pub fn is_isomorphic_to(&self, other: &Geometry, with_signs: bool) -> bool {
        if self.num_points != other.num_points
            || self.num_lines() != other.num_lines()
            || self.invariant_hash(with_signs) != other.invariant_hash(with_signs)
        {
            return false;
        }
        let a = self.incidence_graph();
        let b = other.incidence_graph();
        is_isomorphic_matching(
            &a,
            &b,
            |x, y| match (x, y) {
                (None, None) => true,
                (Some(s), Some(t)) => !with_signs || s == t,
                _ => false,
            },
            |_, _| true,
        )
    }

    /// Indices of `k` pairwise-disjoint lines covering every point, found by
    /// backtracking over lines in order. Returns the first one found.
    pub fn find_spread(&self) -> Option<Vec<usize>> {
        let sizes: HashSet<usize> = self.lines.iter().map(|l| l.points.len()).collect();
        if sizes.len() != 1 {
            return None;
        }
        let size = *sizes.iter().next()?;
        if size == 0 || !self.num_points.is_multiple_of(size) {
            return None;
        }
        let need = self.num_points / size;
        let mut chosen = Vec::with_capacity(need);
        let mut covered = vec![false; self.num_points];
        self.spread_search(0, need, &mut chosen, &mut covered)
            .then_some(chosen)
    }

    fn spread_search(
        &self,
        start: usize,
        need: usize,
        chosen: &mut Vec<usize>,
        covered: &mut [bool],
    ) -> bool {
        if chosen.len() == need {
            return true;
        }
        // the lowest uncovered point must lie on the next chosen line
        let Some(target) = covered.iter().position(|&c| !c) else {
            return false;
        };
        for i in start..self.lines.len() {
            let line = &self.lines[i];
            if !line.points.contains(&target) || line.points.iter().any(|&p| covered[p]) {
                continue;
            }
            for &p in &line.points {
                covered[p] = true;
            }
            chosen.push(i);
            if self.spread_search(0, need, chosen, covered) {
                return true;
            }
            chosen.pop();
            for &p in &line.points {
                covered[p] = false;
            }
        }
        false
    }

    /// Serializes to the line-oriented text format read by [`Geometry::parse_text`].
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "geometry {} points={} lines={}\n",
            self.name.replace(char::is_whitespace, "_"),
            self.num_points,
            self.num_lines()
        );
        if let Some(labels) = &self.labels {
            let ls: Vec<String> = labels.iter().map(|l| l.label()).collect();
            s.push_str(&format!("labels {}\n", ls.join(" ")));
        }
        for line in &self.lines {
            let pts: Vec<String> = line.points.iter().map(|p| p.to_string()).collect();
            s.push_str(&format!(
                "line {} sign={}\n",
                pts.join(" "),
                line.sign.symbol()
            ));
        }
        s
    }

    /// Parses the text format. Blank lines and `#` comments are ignored. The
    /// result must satisfy every geometry invariant and have at least one line.
    pub fn parse_text(text: &str) -> Result<Self, GeometryError> {
        let perr = |line: usize, message: String| GeometryError::Parse { line, message };
        let mut header: Option<(String, usize, usize)> = None;
        let mut labels: Option<Vec<PauliOperator>> = None;
        let mut lines = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let no = no + 1;
            let row = raw.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            let mut tok = row.split_whitespace();
            match tok.next() {
                Some("geometry") => {
                    if header.is_some() {
                        return Err(perr(no, "repeated geometry header".into()));
                    }
                    let name = tok
                        .next()
                        .ok_or_else(|| perr(no, "missing geometry name".into()))?;
                    let mut points = None;
                    let mut nlines = None;
                    for t in tok {
                        let (k, v) = t
                            .split_once('=')
                            .ok_or_else(|| perr(no, format!("expected key=value, got {t:?}")))?;
                        let v: usize = v
                            .parse()
                            .map_err(|_| perr(no, format!("bad number in {t:?}")))?;
                        match k {
                            "points" => points = Some(v),
                            "lines" => nlines = Some(v),
                            _ => return Err(perr(no, format!("unknown header field {k:?}"))),
                        }
                    }
                    let points = points.ok_or_else(|| perr(no, "missing points=".into()))?;
                    let nlines = nlines.ok_or_else(|| perr(no, "missing lines=".into()))?;
                    header = Some((name.to_string(), points, nlines));
                }
                Some("labels") => {
                    if header.is_none() {
                        return Err(perr(no, "labels before geometry header".into()));
                    }
                    let ops = tok
                        .map(PauliOperator::parse_label)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| perr(no, e.to_string()))?;
                    labels = Some(ops);
                }
                Some("line") => {
                    if header.is_none() {
                        return Err(perr(no, "line before geometry header".into()));
                    }
                    let mut pts = Vec::new();
                    let mut sign = None;
                    for t in tok {
                        if let Some(s) = t.strip_prefix("sign=") {
                            sign = Some(match s {
                                "+" => ContextSign::Positive,
                                "-" => ContextSign::Negative,
                                _ => return Err(perr(no, format!("bad sign {s:?}"))),
                            });
                        } else {
                            pts.push(
                                t.parse::<usize>()
                                    .map_err(|_| perr(no, format!("bad point index {t:?}")))?,
                            );
                        }
                    }
                    let sign = sign.ok_or_else(|| perr(no, "missing sign=".into()))?;
                    lines.push(Line::new(pts, sign));
                }
                Some(other) => return Err(perr(no, format!("unknown record {other:?}"))),
                None => unreachable!(),
            }
        }
        let (name, points, nlines) =
            header.ok_or_else(|| perr(0, "missing geometry header".into()))?;
        if lines.len() != nlines {
            return Err(perr(
                0,
                format!("header declares {nlines} lines but {} given", lines.len()),
            ));
        }
        if lines.is_empty() {
            return Err(GeometryError::EmptyLineSet);
        }
        let g = Geometry {
            name,
            num_points: points,
            lines,
            labels,
        };
        g.validated()
    }
}

fn label_line_sign(labels: &[PauliOperator], points: &[usize]) -> Option<ContextSign> {
    match points {
        [a, b, c] => context_sign(&labels[*a], &labels[*b], &labels[*c])
            .ok()
            .flatten(),
        [a, b] => {
            // two-operator context: commuting pair with product ±𝟙
            let (a, b) = (&labels[*a], &labels[*b]);
            if !a.commutes(b).ok()? {
                return None;
            }
            let prod = a.multiply(b).ok()?;
            if !prod.is_identity_up_to_phase() {
                return None;
            }
            match prod.phase_exp() {
                0 => Some(ContextSign::Positive),
                2 => Some(ContextSign::Negative),
                _ => None,
            }
        }
        _ => None,
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All labels over `IXYZ` of length `n` in lexicographic order, identity excluded.
fn nontrivial_labels(n: usize) -> impl Iterator<Item = String> {
    const ALPHABET: [char; 4] = ['I', 'X', 'Y', 'Z'];
    (1..4usize.pow(n as u32)).map(move |mut idx| {
        let mut chars = vec!['I'; n];
        for k in (0..n).rev() {
            chars[k] = ALPHABET[idx % 4];
            idx /= 4;
        }
        chars.into_iter().collect()
    })
}

fn parse_all(
    labels: impl IntoIterator<Item = impl AsRef<str>>,
) -> Result<Vec<PauliOperator>, GeometryError> {
    labels
        .into_iter()
        .map(|l| PauliOperator::parse_label(l.as_ref()).map_err(GeometryError::from))
        .collect()
}

/// Every 3-element context among `ops`. Points keep the order of `ops`; lines
/// are sorted lexicographically by point index.
pub fn contexts_from_operators(
    name: impl Into<String>,
    ops: Vec<PauliOperator>,
) -> Result<Geometry, GeometryError> {
    let mut index: HashMap<(Vec<u64>, Vec<u64>), usize> = HashMap::with_capacity(ops.len());
    if let Some(first) = ops.first() {
        for op in &ops {
            if op.n_qubits() != first.n_qubits() {
                return Err(PauliError::DimensionMismatch {
                    left: first.n_qubits(),
                    right: op.n_qubits(),
                }
                .into());
            }
        }
    }
    for (i, op) in ops.iter().enumerate() {
        if op.is_identity_up_to_phase() {
            return Err(GeometryError::IdentityOperator);
        }
        let key = (op.x_words().to_vec(), op.z_words().to_vec());
        if index.insert(key, i).is_some() {
            return Err(GeometryError::DuplicateOperator { label: op.label() });
        }
    }
    let mut lines = Vec::new();
    for i in 0..ops.len() {
        for j in (i + 1)..ops.len() {
            if !ops[i].commutes(&ops[j])? {
                continue;
            }
            // a third member must carry the support of the product
            let prod = ops[i].multiply(&ops[j])?;
            let key = (prod.x_words().to_vec(), prod.z_words().to_vec());
            let Some(&k) = index.get(&key) else { continue };
            if k <= j {
                continue;
            }
            if let Some(sign) = context_sign(&ops[i], &ops[j], &ops[k])? {
                lines.push(Line::new(vec![i, j, k], sign));
            }
        }
    }
    lines.sort_by(|a, b| a.points.cmp(&b.points));
    Ok(Geometry {
        name: name.into(),
        num_points: ops.len(),
        lines,
        labels: Some(ops),
    })
}

pub fn build_symplectic(n: usize) -> Result<Geometry, GeometryError> {
    build_symplectic_with_limit(n, DEFAULT_SYMPLECTIC_LIMIT)
}

/// All `4^n - 1` nontrivial `n`-qubit operators with every context.
pub fn build_symplectic_with_limit(n: usize, limit: usize) -> Result<Geometry, GeometryError> {
    if n == 0 || n > limit {
        return Err(GeometryError::SymplecticLimit { n, limit });
    }
    let ops = parse_all(nontrivial_labels(n))?;
    contexts_from_operators(format!("W{}", 2 * n - 1), ops)
}

/// Expected `(points, lines, lines per point)` for the symplectic space on `n` qubits.
pub fn symplectic_counts(n: u32) -> (u64, u64, u64) {
    let p = 4u64.pow(n) - 1;
    let q = 4u64.pow(n - 1) - 1;
    (p, p * q / 3, q)
}

pub fn build_named(which: NamedGeometry) -> Geometry {
    match which {
        NamedGeometry::Triangle => Geometry::new(
            "triangle",
            3,
            vec![
                Line::new(vec![0, 1], ContextSign::Positive),
                Line::new(vec![1, 2], ContextSign::Positive),
                Line::new(vec![0, 2], ContextSign::Negative),
            ],
        ),
        NamedGeometry::Grid => grid(),
        NamedGeometry::Doily => {
            let ops = parse_all(nontrivial_labels(2)).expect("static labels");
            contexts_from_operators("doily", ops).expect("static operators")
        }
        NamedGeometry::TwoSpread => {
            let doily = build_named(NamedGeometry::Doily);
            let spread = doily.find_spread().expect("the doily has spreads");
            let lines = doily
                .lines
                .iter()
                .enumerate()
                .filter(|(i, _)| !spread.contains(i))
                .map(|(_, l)| l.clone())
                .collect();
            Geometry {
                name: "two_spread".into(),
                num_points: doily.num_points,
                lines,
                labels: doily.labels,
            }
        }
        NamedGeometry::Eloily => {
            let ops = parse_all(nontrivial_labels(3).filter(|l| l.matches('I').count() == 1))
                .expect("static labels");
            contexts_from_operators("eloily", ops).expect("static operators")
        }
    }
}

pub fn build_named_str(name: &str) -> Result<Geometry, GeometryError> {
    Ok(build_named(name.parse()?))
}

/// The magic square: rows are positive lines, columns negative.
fn grid() -> Geometry {
    let labels = ["YZ", "ZY", "XX", "ZX", "XZ", "YY", "XY", "YX", "ZZ"];
    let mut lines = Vec::with_capacity(6);
    for r in 0..3 {
        lines.push(Line::new(
            vec![3 * r, 3 * r + 1, 3 * r + 2],
            ContextSign::Positive,
        ));
    }
    for c in 0..3 {
        lines.push(Line::new(vec![c, c + 3, c + 6], ContextSign::Negative));
    }
    Geometry {
        name: "grid".into(),
        num_points: 9,
        lines,
        labels: Some(parse_all(labels).expect("static labels")),
    }
}

/// Counts `(V, L, |L_neg|, lines per point)` used in summaries.
pub fn summary(g: &Geometry) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("name", g.name.clone());
    m.insert("points", g.num_points.to_string());
    m.insert("lines", g.num_lines().to_string());
    m.insert("negative_lines", g.negative_count().to_string());
    m.insert(
        "lines_per_point",
        g.uniform_lines_per_point()
            .map(|x| x.to_string())
            .unwrap_or_else(|| "non-uniform".into()),
    );
    m.insert("labelled", g.labels.is_some().to_string());
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(g: &Geometry) -> (usize, usize, usize, Option<usize>) {
        (
            g.num_points,
            g.num_lines(),
            g.negative_count(),
            g.uniform_lines_per_point(),
        )
    }

    #[test]
    fn named_counts() {
        assert_eq!(
            counts(&build_named(NamedGeometry::Grid)),
            (9, 6, 3, Some(2))
        );
        assert_eq!(
            counts(&build_named(NamedGeometry::Doily)),
            (15, 15, 3, Some(3))
        );
        assert_eq!(
            counts(&build_named(NamedGeometry::Eloily)),
            (27, 45, 9, Some(5))
        );
        let t = build_named(NamedGeometry::Triangle);
        assert_eq!(counts(&t), (3, 3, 1, Some(2)));
        assert!(t.labels.is_none());
        let ts = build_named(NamedGeometry::TwoSpread);
        assert_eq!((ts.num_points, ts.num_lines()), (15, 10));
        assert_eq!(ts.uniform_lines_per_point(), Some(2));
    }

    #[test]
    fn named_geometries_validate() {
        for which in NamedGeometry::ALL {
            let g = build_named(which);
            assert!(g.validate().is_empty(), "{which}: {:?}", g.validate());
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            build_named_str("hexagon"),
            Err(GeometryError::UnknownName(_))
        ));
        assert_eq!(
            "two-spread".parse::<NamedGeometry>().unwrap(),
            NamedGeometry::TwoSpread
        );
    }

    #[test]
    fn flipped_sign_is_reported() {
        let mut g = build_named(NamedGeometry::Grid);
        g.lines[4].sign = g.lines[4].sign.flipped();
        assert_eq!(g.validate(), vec![Violation::SignMismatch { line: 4 }]);
        assert!(g.validate()[0].to_string().contains("line sign mismatch"));
    }

    #[test]
    fn out_of_range_and_duplicates() {
        let mut g = build_named(NamedGeometry::Triangle);
        g.lines.push(Line::new(vec![0, 3], ContextSign::Positive));
        g.lines.push(Line::new(vec![1, 0], ContextSign::Negative));
        g.lines.push(Line::new(vec![2, 2], ContextSign::Positive));
        let v = g.validate();
        assert!(v.contains(&Violation::IndexOutOfRange { line: 3, point: 3 }));
        assert!(v.contains(&Violation::DuplicateLine { line: 4, first: 0 }));
        assert!(v.contains(&Violation::RepeatedPoint { line: 5, point: 2 }));
        assert!(v[0].to_string().contains("index out of range"));
    }

    #[test]
    fn contexts_small_cases() {
        let ops = parse_all(["X", "Z"]).unwrap();
        let g = contexts_from_operators("xz", ops).unwrap();
        assert_eq!((g.num_points, g.num_lines()), (2, 0));

        let dup = parse_all(["XI", "IX", "XI"]).unwrap();
        assert!(matches!(
            contexts_from_operators("dup", dup),
            Err(GeometryError::DuplicateOperator { .. })
        ));
        let id = parse_all(["XI", "II"]).unwrap();
        assert_eq!(
            contexts_from_operators("id", id),
            Err(GeometryError::IdentityOperator)
        );
    }

    #[test]
    fn symplectic_n1_has_no_lines() {
        let g = build_symplectic(1).unwrap();
        assert_eq!((g.num_points, g.num_lines()), (3, 0));
        assert_eq!(symplectic_counts(1), (3, 0, 0));
        assert!(matches!(
            build_symplectic(5),
            Err(GeometryError::SymplecticLimit { n: 5, limit: 4 })
        ));
        assert!(build_symplectic(0).is_err());
    }

    #[test]
    fn symplectic_n2_n3() {
        let g2 = build_symplectic(2).unwrap();
        assert_eq!(counts(&g2), (15, 15, 3, Some(3)));
        let g3 = build_symplectic(3).unwrap();
        assert_eq!(
            (g3.num_points, g3.num_lines(), g3.uniform_lines_per_point()),
            (63, 315, Some(15))
        );
    }

    #[test]
    fn spread_is_disjoint_cover() {
        let doily = build_named(NamedGeometry::Doily);
        let spread = doily.find_spread().unwrap();
        assert_eq!(spread.len(), 5);
        let mut seen = [0; 15];
        for &i in &spread {
            for &p in &doily.lines[i].points {
                seen[p] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn bounds() {
        let grid = build_named(NamedGeometry::Grid);
        assert_eq!(grid.contextuality_bounds(1, 2).unwrap().chi_bound, 4);
        let zero = grid.contextuality_bounds(0, 1).unwrap();
        assert_eq!(zero.chi_bound, 6);
        assert_eq!(zero.omega_ll, Some(1.0));
        assert_eq!(zero.omega_pl, 1.0);

        let doily = build_named(NamedGeometry::Doily);
        let b = doily.contextuality_bounds(3, 2).unwrap();
        assert!((b.omega_pl - 14.0 / 15.0).abs() < 1e-15);
        // (3-1)/C(3,2) * 3/15
        assert!((b.omega_ll.unwrap() - 13.0 / 15.0).abs() < 1e-15);

        assert!(doily.contextuality_bounds(16, 1).is_err());
        assert!(doily.contextuality_bounds(3, 4).is_err());
        assert!(doily.contextuality_bounds(3, 0).is_err());
    }

    #[test]
    fn bounds_non_uniform() {
        let mut g = build_named(NamedGeometry::Triangle);
        g.lines.pop();
        let b = g.contextuality_bounds(1, 1).unwrap();
        assert_eq!(b.omega_ll, None);
        assert_eq!(b.chi_bound, 0);
        assert!((b.omega_pl - (1.0 - 1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        for which in NamedGeometry::ALL {
            let g = build_named(which);
            let back = Geometry::parse_text(&g.to_text()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn text_rejects_bad_documents() {
        let empty = "geometry empty points=3 lines=0\n";
        assert_eq!(
            Geometry::parse_text(empty),
            Err(GeometryError::EmptyLineSet)
        );
        let short = "geometry g points=3 lines=2\nline 0 1 sign=+\n";
        assert!(matches!(
            Geometry::parse_text(short),
            Err(GeometryError::Parse { .. })
        ));
        let oob = "geometry g points=3 lines=1\nline 0 3 sign=+\n";
        assert!(matches!(
            Geometry::parse_text(oob),
            Err(GeometryError::Invalid(_))
        ));
        let badsign = "geometry g points=3 lines=1\nlabels XX YY ZZ\nline 0 1 2 sign=+\n";
        assert!(matches!(
            Geometry::parse_text(badsign),
            Err(GeometryError::Invalid(_))
        ));
        let junk = "geometry g points=3 lines=1\nlnie 0 1 sign=+\n";
        assert!(matches!(
            Geometry::parse_text(junk),
            Err(GeometryError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn isomorphism_detects_relabelling() {
        let g = build_named(NamedGeometry::Grid);
        // permute points by reversing indices
        let perm = |p: usize| 8 - p;
        let mut h = g.clone();
        h.labels = None;
        for l in &mut h.lines {
            l.points = l.points.iter().map(|&p| perm(p)).collect();
        }
        h.lines.reverse();
        assert!(g.is_isomorphic_to(&h, true));
        h.lines[0].sign = h.lines[0].sign.flipped();
        assert!(!g.is_isomorphic_to(&h, true));
        assert!(g.is_isomorphic_to(&h, false));
    }
}

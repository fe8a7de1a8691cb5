//! N-qubit Pauli operators in the binary symplectic representation.
//!
//! An operator is stored as `i^phase · X^x · Z^z`, where `X^x` and `Z^z` are
//! tensor products over qubits and `x`, `z` are bit-vectors packed into
//! 64-bit words. Qubit `k` lives in bit `k % 64` of word `k / 64`; label
//! character `k` (left to right) is qubit `k`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PauliError {
    #[error("empty Pauli label")]
    EmptyLabel,
    #[error("invalid character {ch:?} at position {position} in Pauli label")]
    InvalidCharacter { position: usize, ch: char },
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Sign of a context: the product of its operators is `+𝟙` or `-𝟙`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextSign {
    Positive,
    Negative,
}

impl ContextSign {
    /// Parity bit `b` of the classical constraint: 0 for positive, 1 for negative.
    pub fn parity(self) -> u8 {
        match self {
            ContextSign::Positive => 0,
            ContextSign::Negative => 1,
        }
    }

    pub fn from_parity(bit: u8) -> Self {
        if bit & 1 == 0 {
            ContextSign::Positive
        } else {
            ContextSign::Negative
        }
    }

    pub fn flipped(self) -> Self {
        Self::from_parity(self.parity() ^ 1)
    }

    pub fn symbol(self) -> char {
        match self {
            ContextSign::Positive => '+',
            ContextSign::Negative => '-',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    n_qubits: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    phase: u8,
}

fn words_for(n_qubits: usize) -> usize {
    n_qubits.div_ceil(64)
}

fn popcount_and(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(u, v)| (u & v).count_ones()).sum()
}

impl PauliOperator {
    pub fn identity(n_qubits: usize) -> Self {
        let w = words_for(n_qubits);
        Self {
            n_qubits,
            x: vec![0; w],
            z: vec![0; w],
            phase: 0,
        }
    }

    /// Builds `i^phase · X^x · Z^z` from raw bit masks (qubit `k` is bit `k`).
    /// Only available for up to 64 qubits.
    pub fn from_bits(n_qubits: usize, x: u64, z: u64, phase: u8) -> Self {
        assert!(n_qubits <= 64, "from_bits supports at most 64 qubits");
        let mask = if n_qubits == 64 {
            u64::MAX
        } else {
            (1u64 << n_qubits) - 1
        };
        let w = words_for(n_qubits).max(1);
        let mut op = Self {
            n_qubits,
            x: vec![0; w],
            z: vec![0; w],
            phase: phase & 3,
        };
        if n_qubits > 0 {
            op.x[0] = x & mask;
            op.z[0] = z & mask;
        }
        op.x.truncate(words_for(n_qubits));
        op.z.truncate(words_for(n_qubits));
        op
    }

    /// The Hermitian operator with the given X/Z support: the phase is set to
    /// the number of `Y` factors so that the result squares to `+𝟙`.
    pub fn hermitian_from_bits(n_qubits: usize, x: u64, z: u64) -> Self {
        let mut op = Self::from_bits(n_qubits, x, z, 0);
        op.phase = (popcount_and(&op.x, &op.z) % 4) as u8;
        op
    }

    pub fn parse_label(label: &str) -> Result<Self, PauliError> {
        let chars: Vec<char> = label.chars().collect();
        if chars.is_empty() {
            return Err(PauliError::EmptyLabel);
        }
        let mut op = Self::identity(chars.len());
        let mut y_count = 0u32;
        for (k, &ch) in chars.iter().enumerate() {
            let (xb, zb) = match ch {
                'I' => (false, false),
                'X' => (true, false),
                'Y' => (true, true),
                'Z' => (false, true),
                _ => return Err(PauliError::InvalidCharacter { position: k, ch }),
            };
            if xb {
                op.x[k / 64] |= 1 << (k % 64);
            }
            if zb {
                op.z[k / 64] |= 1 << (k % 64);
            }
            if xb && zb {
                y_count += 1;
            }
        }
        // Y = i·X·Z, so each Y contributes one factor of i.
        op.phase = (y_count % 4) as u8;
        Ok(op)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_words(&self) -> &[u64] {
        &self.x
    }

    pub fn z_words(&self) -> &[u64] {
        &self.z
    }

    /// Power of `i` multiplying the bare `X^x·Z^z` word.
    pub fn phase_exp(&self) -> u8 {
        self.phase
    }

    pub fn x_bit(&self, qubit: usize) -> bool {
        self.x[qubit / 64] >> (qubit % 64) & 1 == 1
    }

    pub fn z_bit(&self, qubit: usize) -> bool {
        self.z[qubit / 64] >> (qubit % 64) & 1 == 1
    }

    /// True when the X and Z parts are both zero (any phase).
    pub fn is_identity_up_to_phase(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.is_identity_up_to_phase() && self.phase == 0
    }

    /// Same X/Z support, ignoring phase.
    pub fn same_support(&self, other: &Self) -> bool {
        self.n_qubits == other.n_qubits && self.x == other.x && self.z == other.z
    }

    fn check_dims(&self, other: &Self) -> Result<(), PauliError> {
        if self.n_qubits != other.n_qubits {
            return Err(PauliError::DimensionMismatch {
                left: self.n_qubits,
                right: other.n_qubits,
            });
        }
        Ok(())
    }

    /// Operator product `self · other` with exact phase tracking.
    pub fn multiply(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_dims(other)?;
        // (X^a Z^b)(X^c Z^d) = (-1)^{b·c} X^{a⊕c} Z^{b⊕d}
        let swaps = popcount_and(&self.z, &other.x);
        let phase = (self.phase as u32 + other.phase as u32 + 2 * swaps) % 4;
        Ok(Self {
            n_qubits: self.n_qubits,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
            phase: phase as u8,
        })
    }

    /// Symplectic inner product `<x1,z2> + <z1,x2>` mod 2.
    pub fn symplectic_product(&self, other: &Self) -> Result<u8, PauliError> {
        self.check_dims(other)?;
        let s = popcount_and(&self.x, &other.z) + popcount_and(&self.z, &other.x);
        Ok((s & 1) as u8)
    }

    pub fn commutes(&self, other: &Self) -> Result<bool, PauliError> {
        Ok(self.symplectic_product(other)? == 0)
    }

    /// Tensor-product label, e.g. `XYI`. The phase is not shown; use
    /// `Display` for the full operator.
    pub fn label(&self) -> String {
        (0..self.n_qubits)
            .map(|k| match (self.x_bit(k), self.z_bit(k)) {
                (false, false) => 'I',
                (true, false) => 'X',
                (true, true) => 'Y',
                (false, true) => 'Z',
            })
            .collect()
    }

    /// Phase relative to the Hermitian operator with the same label, as a
    /// power of `i` (0 → `+`, 1 → `+i`, 2 → `-`, 3 → `-i`).
    pub fn relative_phase(&self) -> u8 {
        let ys = popcount_and(&self.x, &self.z);
        ((self.phase as u32 + 4 - ys % 4) % 4) as u8
    }
}

impl FromStr for PauliOperator {
    type Err = PauliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_label(s)
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.relative_phase() {
            0 => "",
            1 => "i",
            2 => "-",
            _ => "-i",
        };
        write!(f, "{prefix}{}", self.label())
    }
}

/// Sign of the context formed by three operators, or `None` when they do not
/// pairwise commute or their product is not `±𝟙`.
pub fn context_sign(
    a: &PauliOperator,
    b: &PauliOperator,
    c: &PauliOperator,
) -> Result<Option<ContextSign>, PauliError> {
    if !(a.commutes(b)? && a.commutes(c)? && b.commutes(c)?) {
        return Ok(None);
    }
    let prod = a.multiply(b)?.multiply(c)?;
    if !prod.is_identity_up_to_phase() {
        return Ok(None);
    }
    Ok(match prod.phase_exp() {
        0 => Some(ContextSign::Positive),
        2 => Some(ContextSign::Negative),
        _ => None,
    })
}

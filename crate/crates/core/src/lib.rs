//! Degree of contextuality for Pauli-operator geometries.
//!
//! Geometries of signed lines are built from N-qubit Pauli operators
//! ([`pauli`], [`geometry`]); their degree of contextuality is computed by
//! exhaustive enumeration ([`classical`]) and by simulating two quantum search
//! procedures: a gate-level Grover threshold search ([`gate_sim`]) and the
//! class-amplitude quasi-Grover evolution with phase-graded marking
//! ([`class_sim`]).

pub mod class_sim;
pub mod classical;
pub mod gate_sim;
pub mod geometry;
pub mod pauli;
pub mod repro;

pub use classical::{
    binomial_distribution, brute_force, degree_of, invalid_count, invalid_distribution, Assignment,
    BruteForce, Degree, DistributionSource, InvalidDistribution,
};
pub use geometry::{
    build_named, build_symplectic, contexts_from_operators, Geometry, Line, NamedGeometry,
};
pub use pauli::{context_sign, ContextSign, PauliOperator};

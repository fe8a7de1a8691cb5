//! Shared fixtures for the criterion benchmarks.

use ctxdeg::classical::{brute_force, InvalidDistribution};
use ctxdeg::geometry::{build_named, NamedGeometry};

pub fn exact_distribution(which: NamedGeometry) -> InvalidDistribution {
    brute_force(&build_named(which))
        .expect("named geometries are small enough to enumerate")
        .distribution
}

//! Constructed geometries against combinatorial models built from scratch.

use ctxdeg::geometry::{
    build_named, build_symplectic, symplectic_counts, Geometry, Line, NamedGeometry,
};
use ctxdeg::pauli::{context_sign, ContextSign, PauliOperator};

/// Points are the 15 two-element subsets of {0..5}; lines are the 15 ways
/// to split {0..5} into three such pairs.
fn duad_syntheme_model() -> Geometry {
    let mut duads = Vec::new();
    for a in 0..6 {
        for b in a + 1..6 {
            duads.push((a, b));
        }
    }
    let disjoint =
        |p: (usize, usize), q: (usize, usize)| p.0 != q.0 && p.0 != q.1 && p.1 != q.0 && p.1 != q.1;
    let mut lines = Vec::new();
    for i in 0..15 {
        for j in i + 1..15 {
            for k in j + 1..15 {
                if disjoint(duads[i], duads[j])
                    && disjoint(duads[i], duads[k])
                    && disjoint(duads[j], duads[k])
                {
                    lines.push(Line::new(vec![i, j, k], ContextSign::Positive));
                }
            }
        }
    }
    Geometry::new("duad_syntheme", 15, lines)
}

#[test]
fn doily_is_the_duad_syntheme_quadrangle() {
    let model = duad_syntheme_model();
    assert_eq!(model.num_lines(), 15);
    assert!(build_named(NamedGeometry::Doily).is_isomorphic_to(&model, false));
    assert!(!build_named(NamedGeometry::TwoSpread).is_isomorphic_to(&model, false));
}

#[test]
fn two_spread_is_a_double_cover() {
    let g = build_named(NamedGeometry::TwoSpread);
    assert_eq!((g.num_points, g.num_lines()), (15, 10));
    assert!(g.lines_per_point().iter().all(|&k| k == 2));
    let doily = build_named(NamedGeometry::Doily);
    let doily_sets: Vec<Vec<usize>> = doily.lines.iter().map(|l| sorted(&l.points)).collect();
    let kept: Vec<Vec<usize>> = g.lines.iter().map(|l| sorted(&l.points)).collect();
    let removed: Vec<&Vec<usize>> = doily_sets.iter().filter(|s| !kept.contains(s)).collect();
    assert_eq!(removed.len(), 5);
    let mut covered: Vec<usize> = removed.iter().flat_map(|s| s.iter().copied()).collect();
    covered.sort_unstable();
    assert_eq!(covered, (0..15).collect::<Vec<_>>());
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Every line's sign recomputed from the operator labels.
fn signs_agree(g: &Geometry) {
    let labels = g.labels.as_ref().expect("labelled geometry");
    for line in &g.lines {
        let ops: Vec<&PauliOperator> = line.points.iter().map(|&p| &labels[p]).collect();
        let sign = context_sign(ops[0], ops[1], ops[2]).unwrap();
        assert_eq!(sign, Some(line.sign), "{:?}", line.points);
    }
}

#[test]
fn named_geometry_counts_and_signs() {
    let cases = [
        (NamedGeometry::Grid, 9, 6, 3, Some(2)),
        (NamedGeometry::Doily, 15, 15, 3, Some(3)),
        (NamedGeometry::TwoSpread, 15, 10, 1, Some(2)),
        (NamedGeometry::Eloily, 27, 45, 9, Some(5)),
        (NamedGeometry::Triangle, 3, 3, 1, Some(2)),
    ];
    for (which, v, l, neg, lp) in cases {
        let g = build_named(which);
        assert_eq!(g.num_points, v, "{which}");
        assert_eq!(g.num_lines(), l, "{which}");
        assert_eq!(g.negative_count(), neg, "{which}");
        assert_eq!(g.uniform_lines_per_point(), lp, "{which}");
        assert!(g.validate().is_empty(), "{which}");
        if which != NamedGeometry::Triangle {
            signs_agree(&g);
        }
    }
}

#[test]
fn grid_rows_positive_columns_negative() {
    let g = build_named(NamedGeometry::Grid);
    for line in &g.lines {
        let labels: Vec<String> = line
            .points
            .iter()
            .map(|&p| g.labels.as_ref().unwrap()[p].label())
            .collect();
        if labels.iter().any(|l| l == "XX") && labels.iter().any(|l| l == "YY") {
            assert_eq!(line.sign, ContextSign::Negative);
        }
    }
}

#[test]
fn symplectic_counts_small() {
    for n in 2..=3u32 {
        let g = build_symplectic(n as usize).unwrap();
        let (p, l, per) = symplectic_counts(n);
        assert_eq!(g.num_points as u64, p);
        assert_eq!(g.num_lines() as u64, l);
        assert_eq!(g.uniform_lines_per_point().map(|k| k as u64), Some(per));
        signs_agree(&g);
    }
    assert_eq!(symplectic_counts(2), (15, 15, 3));
    assert_eq!(symplectic_counts(3), (63, 315, 15));
    assert_eq!(symplectic_counts(4), (255, 5355, 63));
    assert_eq!(build_symplectic(1).unwrap().num_lines(), 0);
}

#[test]
fn symplectic_two_qubits_is_the_doily() {
    let w = build_symplectic(2).unwrap();
    assert!(w.is_isomorphic_to(&build_named(NamedGeometry::Doily), true));
}

#[test]
fn text_format_round_trips_every_named_geometry() {
    for which in NamedGeometry::ALL {
        let g = build_named(which);
        let back = Geometry::parse_text(&g.to_text()).unwrap();
        assert_eq!(back.lines, g.lines);
        assert_eq!(back.num_points, g.num_points);
    }
}

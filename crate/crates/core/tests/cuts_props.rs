use gbdp::cuts::{fit_hyperplane, z_points, CutStack, Hyperplane, PlaneSet};
use gbdp::model::StateVector;
use proptest::prelude::*;

fn arb_plane(n: usize) -> impl Strategy<Value = Hyperplane> {
    (proptest::collection::vec(-5.0f64..5.0, n), -10.0f64..10.0).prop_map(|(a, b)| Hyperplane { a, b })
}

fn arb_set(n: usize, max: usize) -> impl Strategy<Value = PlaneSet> {
    proptest::collection::vec(arb_plane(n), 1..=max).prop_map(PlaneSet::from_planes)
}

/// Reference check written against plain integer vectors.
fn brute_submodular(planes: &[Hyperplane], points: &[Vec<i64>]) -> bool {
    let f = |x: &[i64]| {
        planes
            .iter()
            .map(|h| h.b + h.a.iter().zip(x).map(|(a, v)| a * *v as f64).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    for i in 0..points.len() {
        for k in 0..points.len() {
            if i == k || points[i] == points[k] {
                continue;
            }
            let (y, z) = (&points[i], &points[k]);
            let hi: Vec<i64> = y.iter().zip(z).map(|(a, b)| *a.max(b)).collect();
            let lo: Vec<i64> = y.iter().zip(z).map(|(a, b)| *a.min(b)).collect();
            if f(&hi) + f(&lo) > f(y) + f(z) + 1e-9 {
                return false;
            }
        }
    }
    true
}

fn z_reference(x: &[u32]) -> Vec<Vec<i64>> {
    let n = x.len();
    let mut out: Vec<Vec<i64>> = Vec::new();
    for s in 0..=n {
        for r in 0..=n {
            let mut y: Vec<i64> = x.iter().map(|&v| i64::from(v)).collect();
            if s > 0 {
                y[s - 1] += 1;
            }
            if r > 0 {
                y[r - 1] += 1;
            }
            if !out.contains(&y) {
                out.push(y);
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn gate_agrees_with_reference(
        (n, set, x) in (1usize..=3).prop_flat_map(|n| (Just(n), arb_set(n, 5), proptest::collection::vec(0u32..4, n)))
    ) {
        let _ = n;
        let z = z_points(&x);
        let reference = z_reference(&x);
        prop_assert_eq!(z.len(), reference.len());
        prop_assert_eq!(set.is_submodular_on(&z), brute_submodular(set.planes(), &reference));
    }

    #[test]
    fn fitted_plane_interpolates(
        (x, values) in (1usize..=6).prop_flat_map(|n| (
            proptest::collection::vec(0u32..8, n),
            proptest::collection::vec(-1e3f64..1e3, n + 1),
        ))
    ) {
        let h = fit_hyperplane(&x, &values).unwrap();
        let base = StateVector(x.clone());
        for (k, v) in values.iter().enumerate() {
            let y = base.step(k.checked_sub(1));
            let got = h.eval(&y);
            prop_assert!((got - v).abs() <= 1e-12 * v.abs().max(1.0), "{} vs {}", got, v);
        }
    }

    #[test]
    fn adding_a_cut_never_raises_values(
        (set, extra, states) in (1usize..=4).prop_flat_map(|n| (
            arb_set(n, 4),
            arb_plane(n),
            proptest::collection::vec(proptest::collection::vec(0u32..10, n), 100),
        ))
    ) {
        let mut after = set.clone();
        after.add_cut(extra);
        for x in &states {
            prop_assert!(after.evaluate(x).unwrap() <= set.evaluate(x).unwrap());
        }
    }

    #[test]
    fn store_round_trip_is_bitwise(planes in proptest::collection::vec(arb_plane(3), 1..6)) {
        let mut stack = CutStack::new(3, 2, planes[0].clone(), Hyperplane::constant(3, 0.0));
        for h in &planes[1..] {
            stack.stage_mut(1).add_cut(h.clone());
            stack.stage_mut(2).add_cut(Hyperplane { a: h.a.iter().map(|v| v / 3.0).collect(), b: h.b * 1e-7 });
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cuts.store");
        stack.save(&path).unwrap();
        let back = CutStack::load(&path).unwrap();
        for t in 1..=3 {
            let (a, b) = (stack.stage(t).planes(), back.stage(t).planes());
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(b) {
                prop_assert_eq!(p.b.to_bits(), q.b.to_bits());
                for (u, v) in p.a.iter().zip(&q.a) {
                    prop_assert_eq!(u.to_bits(), v.to_bits());
                }
            }
        }
    }
}

#[test]
fn neighbourhood_of_seventeen_slots_has_171_points() {
    assert_eq!(z_points(&[1; 17]).len(), 171);
}

#[test]
fn store_rejects_shape_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.store");
    std::fs::write(&path, r#"{"version":1,"n":2,"horizon":1,"cuts":{"1":[{"a":[1.0],"b":0.0}],"2":[{"a":[0.0,0.0],"b":0.0}]}}"#).unwrap();
    assert!(CutStack::load(&path).is_err());
    std::fs::write(&path, r#"{"version":9,"n":1,"horizon":1,"cuts":{"1":[{"a":[1.0],"b":0.0}],"2":[{"a":[0.0],"b":0.0}]}}"#).unwrap();
    assert!(CutStack::load(&path).is_err());
}

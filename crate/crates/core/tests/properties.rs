use proptest::prelude::*;

use santalo_core::conjugate;
use santalo_core::density::LogConcaveDensity;
use santalo_core::functionals::santalo_product;
use santalo_core::lp;
use santalo_core::maxaffine::MaxAffine;
use santalo_core::measure::DiscreteMeasure;
use santalo_core::moment::{moment_measure_pushforward, MomentObjective};
use santalo_core::report::fmt_sig;
use santalo_core::spec::{Family, FunctionSpec};
use santalo_core::transport;
use santalo_core::{Axis, GridFunction, Symmetry};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

/// `a x²/2 + s x + t |x - m|` on `[-4, 4]`.
fn convex(a: f64, s: f64, t: f64, m: f64, lo: f64, hi: f64) -> GridFunction {
    let axis = Axis::new(lo, hi, 257).unwrap();
    GridFunction::from_fn_1d(axis, Symmetry::None, |x| 0.5 * a * x * x + s * x + t * (x - m).abs()).unwrap()
}

fn measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (1..=max_atoms)
        .prop_flat_map(move |m| {
            (
                prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), m),
                prop::collection::vec(0.05..1.0f64, m),
            )
        })
        .prop_map(|(atoms, w)| DiscreteMeasure::normalized(atoms, w).unwrap())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn fenchel_young(a in 0.1..2.0f64, s in -1.0..1.0f64, t in 0.0..1.5f64, m in -1.0..1.0f64) {
        let f = convex(a, s, t, m, -4.0, 4.0);
        let g = conjugate::legendre(&f).unwrap();
        for k in (0..g.len()).step_by(7) {
            let y = g.point(k)[0];
            let gy = g.values()[k];
            for j in 0..f.len() {
                let x = f.point(j)[0];
                prop_assert!(f.values()[j] + gy >= x * y - 1e-9 * (1.0 + (x * y).abs()));
            }
        }
    }

    #[test]
    fn biconjugate_is_a_lower_approximation(a in 0.1..2.0f64, s in -1.0..1.0f64, t in 0.0..1.5f64, m in -1.0..1.0f64) {
        let f = convex(a, s, t, m, -4.0, 4.0);
        let h = conjugate::legendre(&f).unwrap().axis(0).h();
        let ff = conjugate::biconjugate(&f).unwrap();
        // interpolating f* between dual nodes costs at most h² f*''/8 = h²/(8a)
        let bound = h * h / (8.0 * a) + 1e-9;
        for j in 0..f.len() {
            let x = f.point(j);
            let gap = f.values()[j] - ff.eval(&x);
            prop_assert!(gap >= -1e-12 && gap <= bound, "x = {:?}: gap {gap}, bound {bound}", x);
        }
    }

    #[test]
    fn conjugate_of_shift(a in 0.1..2.0f64, s in -1.0..1.0f64, c in -3.0..3.0f64) {
        let f = convex(a, s, 0.3, 0.1, -4.0, 4.0);
        let g = conjugate::legendre(&f).unwrap();
        let shifted = f.map_values(|_, v| v + c).unwrap();
        let gs = conjugate::legendre_values(&shifted, g.axes()).unwrap();
        for (u, v) in g.values().iter().zip(gs.values()) {
            if u.is_finite() {
                prop_assert!((u - c - v).abs() < 1e-9 * (1.0 + u.abs()));
            } else {
                prop_assert_eq!(u, v);
            }
        }
    }

    #[test]
    fn santalo_product_is_dilation_invariant(a in 0.5..2.0f64, lambda in 0.5..2.0f64) {
        let f = convex(a, 0.0, 0.0, 0.0, -12.0, 12.0);
        let axis = Axis::new(-12.0 / lambda, 12.0 / lambda, 257).unwrap();
        let fl = GridFunction::new(vec![axis], f.values().to_vec(), Symmetry::None).unwrap();
        let (p, q) = (santalo_product(&f).unwrap().value, santalo_product(&fl).unwrap().value);
        prop_assert!((p - q).abs() < 1e-9 * p, "{p} vs {q}");
    }

    #[test]
    fn santalo_product_ignores_constants(c in -5.0..5.0f64) {
        let f = convex(1.0, 0.2, 0.5, 0.0, -12.0, 12.0);
        let fc = f.map_values(|_, v| v + c).unwrap();
        let (p, q) = (santalo_product(&f).unwrap().value, santalo_product(&fc).unwrap().value);
        prop_assert!((p - q).abs() < 1e-8 * p);
    }

    #[test]
    fn measure_text_roundtrip(nu in measure(2, 9)) {
        let back = DiscreteMeasure::parse(&nu.to_text()).unwrap();
        prop_assert_eq!(back, nu);
    }

    #[test]
    fn spec_text_roundtrip(a in 0.1..5.0f64, lo in -10.0..-1.0f64, hi in 1.0..10.0f64, steps in 3usize..400) {
        let spec = FunctionSpec::new("q", Family::Quadratic { a }, vec![Axis::new(lo, hi, steps).unwrap()], Symmetry::None);
        prop_assert_eq!(FunctionSpec::parse(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn correlation_is_symmetric_and_bounded(a in measure(2, 8), b in measure(2, 8)) {
        let (tab, c) = transport::max_correlation_cost(&a, &b).unwrap();
        let (tba, _) = transport::max_correlation_cost(&b, &a).unwrap();
        prop_assert!((tab - tba).abs() < 1e-10 * (1.0 + tab.abs()));
        prop_assert!(tab <= (a.second_moment() * b.second_moment()).sqrt() + 1e-10);
        prop_assert!(c.marginal_error() < 1e-12);
        let (w, _) = transport::w2_squared(&a, &b).unwrap();
        prop_assert!(w >= -1e-10);
        prop_assert!(transport::tw_identity_check(&a, &b).unwrap().passed());
    }

    #[test]
    fn self_transport_vanishes(a in measure(1, 12)) {
        let (w, _) = transport::w2_squared(&a, &a).unwrap();
        prop_assert!(w.abs() < 1e-10);
    }

    #[test]
    fn lp_matches_vertex_enumeration(
        s in prop::collection::vec(0.1..1.0f64, 1..=4),
        t in prop::collection::vec(0.1..1.0f64, 1..=4),
        seed in prop::collection::vec(-2.0..2.0f64, 16),
    ) {
        let (ss, st): (f64, f64) = (s.iter().sum(), t.iter().sum());
        let t: Vec<f64> = t.iter().map(|x| x * ss / st).collect();
        let cost = &seed[..s.len() * t.len()];
        let v = lp::solve(&s, &t, cost).unwrap().value;
        let e = lp::enumerate_vertices(&s, &t, cost).unwrap();
        prop_assert!((v - e).abs() <= 1e-12 * (1.0 + e.abs()));
    }

    #[test]
    fn moment_measures_are_centered(
        slopes in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 3..=8),
        b in prop::collection::vec(-1.0..1.0f64, 8),
    ) {
        let m = slopes.len();
        let Ok(v) = MaxAffine::new(slopes, b[..m].to_vec()) else { return Ok(()) };
        prop_assume!(v.inradius() > 0.2);
        let eta = LogConcaveDensity::from_max_affine("p", v, Symmetry::None).unwrap();
        let nu = moment_measure_pushforward(&eta).unwrap();
        let total: f64 = nu.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for c in nu.barycenter() {
            prop_assert!(c.abs() < 1e-9, "barycenter {c}");
        }
    }

    #[test]
    fn moment_objective_is_concave(
        lo in 0.2..3.0f64,
        hi in 0.2..3.0f64,
        u in prop::collection::vec(-1.0..1.0f64, 3),
        w in prop::collection::vec(-1.0..1.0f64, 3),
    ) {
        let p = hi / (lo + hi);
        let nu = DiscreteMeasure::new(vec![vec![-lo], vec![0.0], vec![hi]], vec![p * 0.5, 0.5, (1.0 - p) * 0.5]).unwrap();
        let obj = MomentObjective::new(&nu);
        let mid: Vec<f64> = u.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fu, fw, fm) = (obj.value(&u).unwrap(), obj.value(&w).unwrap(), obj.value(&mid).unwrap());
        prop_assert!(fm >= 0.5 * (fu + fw) - 1e-10 * (1.0 + fm.abs()));
    }

    #[test]
    fn formatted_numbers_keep_twelve_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }
}

use fgl_forge::bounds::{bound_b, lens_bound, LandweberFiltration};
use fgl_forge::euler::{euler_of_weights, leading_form, LineBundleWeights};
use fgl_forge::fgl::FormalGroupLaw;
use fgl_forge::morse::{assemble, check_morse_equality, FixedComponentDatum, MomentValue, MorseRing};
use fgl_forge::ringcore::{CoefElem, RingSpec};
use fgl_forge::series::{int_series, USeries};
use proptest::prelude::*;
use std::sync::OnceLock;

fn k41() -> &'static FormalGroupLaw {
    static LAW: OnceLock<FormalGroupLaw> = OnceLock::new();
    LAW.get_or_init(|| FormalGroupLaw::kpr(2, 2, 1, 12).unwrap())
}

fn small_series(spec: RingSpec, t: usize) -> impl Strategy<Value = USeries> {
    prop::collection::vec(-5i64..5, t).prop_map(move |c| int_series(spec, t, &c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn series_products_commute_and_associate(
        a in small_series(RingSpec::kpr(3, 2, 1).unwrap(), 8),
        b in small_series(RingSpec::kpr(3, 2, 1).unwrap(), 8),
        c in small_series(RingSpec::kpr(3, 2, 1).unwrap(), 8),
    ) {
        prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        prop_assert_eq!(a.add(&b).unwrap().mul(&c).unwrap(), a.mul(&c).unwrap().add(&b.mul(&c).unwrap()).unwrap());
    }

    #[test]
    fn l_series_compose_multiplicatively(a in -4i64..5, b in -4i64..5) {
        let f = k41();
        let lhs = f.l_series(a).unwrap().compose(&f.l_series(b).unwrap()).unwrap();
        prop_assert_eq!(lhs, f.l_series(a * b).unwrap());
    }

    #[test]
    fn l_series_add(a in -4i64..5, b in -4i64..5) {
        let f = k41();
        let sum = f.add(&f.l_series(a).unwrap(), &f.l_series(b).unwrap()).unwrap();
        prop_assert_eq!(sum, f.l_series(a + b).unwrap());
    }

    #[test]
    fn coefficient_text_round_trips(c in -20i64..20, e1 in -3i32..4) {
        let spec = RingSpec::kpr(3, 2, 1).unwrap();
        let x = CoefElem::monomial(spec, num_rational::BigRational::from_integer(c.into()), &[e1]).unwrap();
        prop_assert_eq!(CoefElem::parse(spec, &x.to_string()).unwrap(), x);
    }

    #[test]
    fn leading_exponent_is_additive(w in prop::collection::vec(prop_oneof![-8i64..0, 1i64..9], 1..4)) {
        let f = FormalGroupLaw::kpr(2, 1, 1, 24).unwrap();
        let wts = LineBundleWeights::new(2, &w).unwrap();
        let k: usize = w.iter().map(|&x| LineBundleWeights::new(2, &[x]).unwrap().leading_exponent(1)).sum();
        let lf = leading_form(&euler_of_weights(&f, &wts).unwrap()).unwrap();
        prop_assert_eq!(lf.k, k);
        prop_assert!(lf.x.is_unit());
    }

    #[test]
    fn bounds_are_additive_over_slices(
        e in prop::collection::vec(0u32..4, 0..4),
        h1 in prop::collection::vec(0usize..4, 0..3),
        h2 in prop::collection::vec(0usize..4, 0..3),
    ) {
        let both: Vec<usize> = h1.iter().chain(&h2).copied().collect();
        let b = |h: &[usize]| bound_b(3, &e, &LandweberFiltration::new(h)).unwrap();
        prop_assert_eq!(b(&both), b(&h1) + b(&h2));
        let c = |h: &[usize]| lens_bound(2, 4, 1, &LandweberFiltration::new(h)).unwrap();
        prop_assert_eq!(c(&both).c, c(&h1).c + c(&h2).c);
        prop_assert_eq!(c(&both).r_min, 12 * c(&both).c);
    }

    #[test]
    fn assembly_is_additive(
        comps in prop::collection::vec(
            (prop::collection::vec(0i64..4, 0..3), 0i64..3, prop::collection::vec(prop_oneof![-4i64..0, 1i64..5], 0..3)),
            0..5,
        )
    ) {
        let data: Vec<FixedComponentDatum> = comps
            .iter()
            .enumerate()
            .map(|(i, (d, l, w))| FixedComponentDatum {
                name: format!("F{i}"),
                generator_degrees: d.iter().map(|x| 2 * x).collect(),
                morse_index: 2 * l,
                normal_weights: w.clone(),
                moment_value: MomentValue::Text(format!("{}/3", comps.len() - i)),
            })
            .collect();
        let m = assemble(&data, MorseRing { p: 2, r: 2, n: 1 }).unwrap();
        let total: usize = data.iter().map(|c| c.generator_degrees.len()).sum();
        prop_assert_eq!(m.rank(), total);
        let cert = check_morse_equality(&data, &m);
        prop_assert!(cert.passed());
        prop_assert_eq!(cert.degenerate, data.is_empty());
        if total > 0 {
            prop_assert!(!check_morse_equality(&data, &m.corrupted_drop(0)).equality);
        }
    }
}

use proptest::prelude::*;
use snowcircle::builders;
use snowcircle::metric::distance;
use snowcircle::rohde;
use snowcircle::verify::{assouad_estimate, bilip_report, Mapped};
use snowcircle::{
    build_theorem_a, CirclePoint, Curve, DiameterFunction, DoublingVerdict, DyadicArc, GeneralArc, NamedRule, Param,
    SubdivisionTree,
};

fn rule_strategy() -> impl Strategy<Value = NamedRule> {
    prop_oneof![
        Just(NamedRule::AllSnow),
        Just(NamedRule::AllHalf),
        any::<bool>().prop_map(|first_snow| NamedRule::Alternating { first_snow }),
        (0.0..=1.0f64).prop_map(|p_snow| NamedRule::RandomBernoulli { p_snow }),
    ]
}

/// Dyadic models with parameter `k/20` in `[1/2, 1)`.
fn model_strategy() -> impl Strategy<Value = DiameterFunction> {
    (10u32..20, rule_strategy(), any::<u64>()).prop_map(|(k, rule, seed)| {
        DiameterFunction::rule(1, Param::parse(&format!("{k}/20")).unwrap(), rule, seed).unwrap()
    })
}

fn point(level: u32) -> impl Strategy<Value = CirclePoint> {
    (0..1u64 << level).prop_map(move |k| CirclePoint::dyadic(k, level).unwrap())
}

fn identity(s: &CirclePoint) -> snowcircle::Result<Mapped> {
    Ok((*s, 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_metric_is_a_metric(df in model_strategy(), x in point(8), y in point(8), z in point(8)) {
        let d = |a: &CirclePoint, b: &CirclePoint| distance(&df, a, b, 8).unwrap();
        let (xy, yx, xz, zy) = (d(&x, &y), d(&y, &x), d(&x, &z), d(&z, &y));
        prop_assert_eq!(xy.upper, yx.upper);
        prop_assert!(xy.lower <= xy.upper);
        prop_assert_eq!(xy.upper == 0.0, x == y);
        prop_assert!(xy.lower <= xz.upper + zy.upper + 1e-12);
    }

    #[test]
    fn distance_bounded_by_covering_arc(df in model_strategy(), g in 1u32..6, k in any::<u64>(), a in 0u64..64, b in 0u64..64) {
        let arc = DyadicArc::new(g, k % (1 << g)).unwrap();
        let span = 1u64 << (10 - g);
        let at = |u: u64| CirclePoint::dyadic(arc.start_units(10) + u % (span + 1), 10).unwrap();
        let d = distance(&df, &at(a), &at(b), 10).unwrap();
        prop_assert!(d.lower <= df.value(&arc).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn diameter_distance_dominates_point_distance(
        pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..8),
        s in 0.0..1.0f64,
        t in 0.0..1.0f64,
    ) {
        let curve = match Curve::polyline(pts.iter().map(|&(x, y)| [x, y]).collect()) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let (s, t) = (CirclePoint::from_f64(s).unwrap(), CirclePoint::from_f64(t).unwrap());
        let p = curve.point_distance(&s, &t).unwrap();
        let d = curve.diameter_distance(&s, &t, 1e-9).unwrap();
        prop_assert!(d.upper >= p.lower - 1e-12);
    }

    #[test]
    fn doubling_index_halves(k in 10u32..20, seed in any::<u64>()) {
        let df = DiameterFunction::rule(1, Param::parse(&format!("{k}/20")).unwrap(), NamedRule::AllSnow, seed).unwrap();
        let sigma = f64::from(k) / 20.0;
        match df.doubling_test(8) {
            DoublingVerdict::Doubling { n0, .. } => {
                prop_assert!(sigma.powi(n0 as i32) <= 0.5 + 1e-15);
                prop_assert!(n0 == 1 || sigma.powi(n0 as i32 - 1) > 0.5);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn model_json_round_trips(k in 10u32..20, m in 1u32..4, rule in rule_strategy(), seed in any::<u64>()) {
        let df = DiameterFunction::rule(m, Param::parse(&format!("{k}/20")).unwrap(), rule, seed).unwrap();
        let mut models = vec![df.clone()];
        if m > 1 {
            models.push(df.extend_to_dyadic().unwrap());
        }
        for df in models {
            let text = df.to_json_value().to_string();
            prop_assert_eq!(DiameterFunction::from_json_str(&text).unwrap(), df);
        }
    }

    #[test]
    fn curve_json_round_trips(eps in 0.3..1.0f64, pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..6)) {
        let mut curves = vec![Curve::RoundCircle, Curve::snowflake_power(eps).unwrap()];
        if let Ok(c) = Curve::polyline(pts.iter().map(|&(x, y)| [x, y]).collect()) {
            curves.push(c);
        }
        for c in curves {
            prop_assert_eq!(Curve::from_json_value(&c.to_json_value()).unwrap(), c);
        }
    }

    #[test]
    fn rohde_edges_match_diameters(k in 26u32..50, seed in any::<u64>()) {
        let text = format!("{k}/100");
        let df = DiameterFunction::rule(2, Param::parse(&text).unwrap(), NamedRule::RandomBernoulli { p_snow: 0.5 }, seed).unwrap();
        let p = f64::from(k) / 100.0;
        let polys = rohde::generate(p, &df, 4).unwrap();
        prop_assert!(rohde::diameter_defect(&polys[3], &df).unwrap() < 1e-12);
        let r = rohde::triangles(&polys[2], &polys[3], p).unwrap();
        prop_assert!(r.holds(1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn equal_split_has_small_spread(start in 0.0..1.0f64, len in 0.05..0.95f64, n in 2usize..6) {
        let a = CirclePoint::from_f64(start).unwrap();
        let b = CirclePoint::from_f64((start + len).fract()).unwrap();
        let arc = GeneralArc::new(a, b).unwrap();
        let split = Curve::RoundCircle.equal_diameter_split(&arc, n, 1e-9).unwrap();
        prop_assert!(split.spread <= 1e-9);
        prop_assert_eq!(split.points.len(), n - 1);
        let offsets: Vec<f64> = split.points.iter().map(|p| arc.offset(p)).collect();
        prop_assert!(offsets.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn subdivision_diameters_shrink(eps in 0.5..1.0f64, depth in 2u32..6) {
        let curve = Curve::snowflake_power(eps).unwrap();
        let tree = SubdivisionTree::build(&curve, 2, depth, 1e-9, CirclePoint::ZERO).unwrap();
        let max = tree.max_diameters();
        prop_assert!(max.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn theorem_a_sandwich_on_snowflake_powers(eps in 0.5..1.0f64) {
        let curve = Curve::snowflake_power(eps).unwrap();
        let r = build_theorem_a(&curve, 6).unwrap();
        for e in &r.sandwich_log {
            prop_assert!(0.5 * e.delta <= e.diam * (1.0 + 1e-12) && e.diam <= 2.0 * e.delta * (1.0 + 1e-12));
        }
        let rep = builders::distortion(&r, &curve, 300, 1).unwrap();
        prop_assert!(rep.l_est <= 8.0 && rep.violations == 0);
    }

    #[test]
    fn swapping_metrics_inverts_ratios(a in model_strategy(), b in model_strategy(), seed in any::<u64>()) {
        let (a, b) = (Curve::model(a), Curve::model(b));
        let ab = bilip_report(&a, &b, &identity, 60, 1e6, seed, Some(8)).unwrap();
        let ba = bilip_report(&b, &a, &identity, 60, 1e6, seed, Some(8)).unwrap();
        prop_assert!((ab.max_ratio * ba.min_ratio - 1.0).abs() < 1e-9);
        prop_assert!((ab.l_est - ba.l_est).abs() < 1e-9 * ab.l_est);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn assouad_estimate_grows_with_sigma(k in 11u32..14, seed in 0u64..100) {
        let est = |p: &str| {
            let df = DiameterFunction::rule(1, Param::parse(p).unwrap(), NamedRule::AllSnow, 0).unwrap();
            assouad_estimate(&Curve::model(df), 0.25, 4, 2, seed).unwrap().alpha
        };
        let low = est(&format!("{k}/20"));
        let high = est(&format!("{}/20", k + 2));
        prop_assert!(low <= high + 0.05, "{} vs {}", low, high);
    }
}

use pohozaev::criteria::{
    biharmonic_check, classify_hyperbola, general_condition, mitidieri_condition, theorem2_condition, CheckOptions,
    HyperbolaClass, Method, Outcome, PowerSpec,
};
use pohozaev::expr::{parse, ExprNode, SymbolSet};
use proptest::prelude::*;

fn power_h(p: f64, q: f64, n: usize) -> ExprNode {
    let set = SymbolSet::general(n, 1).constant("p", p).constant("q", q);
    parse("u^(q+1)/(q+1) + v^(p+1)/(p+1)", &set).unwrap()
}

fn power_g(q: f64, n: usize) -> ExprNode {
    parse("u^q", &SymbolSet::scalar(n).constant("q", q)).unwrap()
}

fn hyperbola(n: usize, p: f64, q: f64) -> bool {
    classify_hyperbola(PowerSpec::new(n, p, q).unwrap()).1.is_nonexistence()
}

#[test]
fn power_reductions_agree_with_the_hyperbola() {
    let opts = CheckOptions::default();
    let exps: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let mut checked = 0;
    for n in 3..=6 {
        for &p in &exps {
            for &q in &exps {
                let expected = hyperbola(n, p, q);
                let t2 = theorem2_condition(&power_g(q, n), p, n, &opts).unwrap();
                let mit = mitidieri_condition(&power_h(p, q, n), n, &opts).unwrap();
                assert_eq!(t2.is_nonexistence(), expected, "theorem2 at n={n} p={p} q={q}");
                assert_eq!(mit.is_nonexistence(), expected, "mitidieri at n={n} p={p} q={q}");
                if p == 1.0 && n >= 5 {
                    assert_eq!(biharmonic_check(q, n).is_nonexistence(), expected, "biharmonic at n={n} q={q}");
                }
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 6400);
}

#[test]
fn sampled_checks_agree_away_from_the_hyperbola() {
    let forced = CheckOptions { force_sampling: true, ..CheckOptions::default() };
    let exps = [0.5, 1.0, 2.0, 3.0, 4.5, 6.0, 9.0, 14.0];
    for n in [3, 4, 5] {
        for &p in &exps {
            for &q in &exps {
                let nf = n as f64;
                let delta = (nf - 2.0) / nf - 1.0 / (p + 1.0) - 1.0 / (q + 1.0);
                if delta.abs() < 1e-3 {
                    continue;
                }
                let expected = delta > 0.0;
                let mit = mitidieri_condition(&power_h(p, q, n), n, &forced).unwrap();
                assert_eq!(mit.method, Method::Sampled);
                assert_eq!(mit.is_nonexistence(), expected, "mitidieri n={n} p={p} q={q}: {mit:?}");
                let t2 = theorem2_condition(&power_g(q, n), p, n, &forced).unwrap();
                assert_eq!(t2.is_nonexistence(), expected, "theorem2 n={n} p={p} q={q}");
            }
        }
    }
}

#[test]
fn decoupled_pairs_use_per_pair_alphas() {
    let set = SymbolSet::general(3, 2);
    let h = parse("u1^7/7 + v1^7/7 + u2^9/9 + v2^6/6", &set).unwrap();
    let both = general_condition(&h, 3, 2, &CheckOptions::default()).unwrap();
    assert!(both.is_nonexistence());
    let alphas = both.witness.unwrap().values;
    for (k, text) in ["u^7/7 + v^7/7", "u^9/9 + v^6/6"].iter().enumerate() {
        let single =
            mitidieri_condition(&parse(text, &SymbolSet::general(3, 1)).unwrap(), 3, &CheckOptions::default()).unwrap();
        assert!(single.is_nonexistence());
        assert!((single.witness.unwrap().values[0] - alphas[k]).abs() < 1e-12);
    }
    let forced = CheckOptions { force_sampling: true, ..CheckOptions::default() };
    let sampled = general_condition(&h, 3, 2, &forced).unwrap();
    assert!(sampled.is_nonexistence(), "{sampled:?}");
    assert_eq!(sampled.method, Method::Sampled);
}

#[test]
fn one_pair_general_condition_matches_mitidieri() {
    let forced = CheckOptions { force_sampling: true, ..CheckOptions::default() };
    let h = power_h(6.0, 6.0, 3);
    let a = general_condition(&h, 3, 1, &forced).unwrap();
    let b = mitidieri_condition(&h, 3, &forced).unwrap();
    assert_eq!(a, b);
    assert!(a.is_nonexistence());
    assert!((a.witness.unwrap().values[0] - 0.5).abs() < 1e-6);
}

#[test]
fn growing_weight_breaks_the_condition_near_the_rim() {
    let h = parse("(1 + r^2)*(u^7/7 + v^7/7)", &SymbolSet::general(3, 1)).unwrap();
    let v = general_condition(&h, 3, 1, &CheckOptions::default()).unwrap();
    assert_eq!(v.outcome, Outcome::ConditionViolatedAt);
    let x = v.point.unwrap().x;
    // The quantity is (u^7/7 + v^7/7)(3|x|^2 - 1)/2 at alpha = 1/2.
    assert!(x.iter().map(|c| c * c).sum::<f64>() > 1.0 / 3.0);
}

proptest! {
    #[test]
    fn raising_p_never_loses_nonexistence(n in 3usize..9, p in 0.05f64..30.0, dp in 0.0f64..10.0, q in 0.05f64..30.0) {
        let before = classify_hyperbola(PowerSpec::new(n, p, q).unwrap()).0;
        let after = classify_hyperbola(PowerSpec::new(n, p + dp, q).unwrap()).0;
        if before == HyperbolaClass::Supercritical {
            prop_assert_eq!(after, HyperbolaClass::Supercritical);
        }
    }

    #[test]
    fn biharmonic_is_the_p_equals_one_slice(n in 5usize..12, q in 0.05f64..40.0) {
        prop_assert_eq!(biharmonic_check(q, n).is_nonexistence(), hyperbola(n, 1.0, q));
    }
}

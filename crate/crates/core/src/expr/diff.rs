use super::{ExprNode, Symbol};

pub(super) fn differentiate(e: &ExprNode, var: Symbol) -> ExprNode {
    raw(e, var).simplify()
}

fn raw(e: &ExprNode, var: Symbol) -> ExprNode {
    if !e.depends_on(var) {
        return ExprNode::Const(0.0);
    }
    match e {
        ExprNode::Const(_) => ExprNode::Const(0.0),
        ExprNode::Var(s) => ExprNode::Const(if *s == var { 1.0 } else { 0.0 }),
        ExprNode::Sum(xs) => ExprNode::Sum(xs.iter().map(|x| raw(x, var)).collect()),
        ExprNode::Product(xs) => {
            let mut terms = Vec::with_capacity(xs.len());
            for (i, xi) in xs.iter().enumerate() {
                if !xi.depends_on(var) {
                    continue;
                }
                let mut factors: Vec<ExprNode> = xs.clone();
                factors[i] = raw(xi, var);
                terms.push(ExprNode::Product(factors));
            }
            ExprNode::Sum(terms)
        }
        ExprNode::Quotient(a, b) => {
            if !b.depends_on(var) {
                return ExprNode::div(raw(a, var), (**b).clone());
            }
            let num =
                ExprNode::sub(ExprNode::mul(raw(a, var), (**b).clone()), ExprNode::mul((**a).clone(), raw(b, var)));
            ExprNode::div(num, ExprNode::pow((**b).clone(), ExprNode::Const(2.0)))
        }
        ExprNode::Power(base, exponent) => {
            if !exponent.depends_on(var) {
                let reduced = ExprNode::Sum(vec![(**exponent).clone(), ExprNode::Const(-1.0)]);
                ExprNode::Product(vec![(**exponent).clone(), ExprNode::pow((**base).clone(), reduced), raw(base, var)])
            } else {
                // d(b^e) = b^e (e' ln b + e b'/b)
                let inner = ExprNode::add(
                    ExprNode::mul(raw(exponent, var), ExprNode::log((**base).clone())),
                    ExprNode::div(ExprNode::mul((**exponent).clone(), raw(base, var)), (**base).clone()),
                );
                ExprNode::mul(e.clone(), inner)
            }
        }
        ExprNode::Exp(a) => ExprNode::mul(e.clone(), raw(a, var)),
        ExprNode::Log(a) => ExprNode::div(raw(a, var), (**a).clone()),
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Binding, ExprNode, Symbol, SymbolSet};
    use proptest::prelude::*;

    fn uv() -> SymbolSet {
        SymbolSet::pair(1)
    }

    #[test]
    fn power_rule() {
        let d = parse("u^3", &uv()).unwrap().differentiate(Symbol::U(0));
        let b = Binding::new().with(Symbol::U(0), 2.0);
        assert_eq!(d.evaluate(&b).unwrap(), 12.0);
        assert_eq!(d, parse("3*u^2", &uv()).unwrap().simplify());
    }

    #[test]
    fn partials_of_a_separable_hamiltonian() {
        let set = uv().constant("p", 3.0).constant("q", 2.5);
        let e = parse("v^p + u^q", &set).unwrap();
        let dv = e.differentiate(Symbol::V(0));
        let du = e.differentiate(Symbol::U(0));
        let b = Binding::new().with(Symbol::U(0), 1.3).with(Symbol::V(0), 2.0);
        assert_eq!(dv.evaluate(&b).unwrap(), 12.0);
        assert!((du.evaluate(&b).unwrap() - 2.5 * 1.3f64.powf(1.5)).abs() < 1e-14);
        assert!(!dv.depends_on(Symbol::U(0)));
    }

    #[test]
    fn product_rule_with_coordinate() {
        let e = parse("(1+x1/2)*u", &SymbolSet::scalar(1)).unwrap();
        let d = e.differentiate(Symbol::X(0));
        let b = Binding::new().with(Symbol::U(0), 3.0).with(Symbol::X(0), 7.0);
        assert_eq!(d.evaluate(&b).unwrap(), 1.5);
        assert!(!d.depends_on(Symbol::X(0)));
    }

    #[test]
    fn second_partials_by_repetition() {
        let e = parse("u^2*v^3", &uv()).unwrap();
        let duv = e.differentiate(Symbol::U(0)).differentiate(Symbol::V(0));
        let b = Binding::new().with(Symbol::U(0), 2.0).with(Symbol::V(0), 3.0);
        assert_eq!(duv.evaluate(&b).unwrap(), 2.0 * 2.0 * 3.0 * 9.0);
    }

    #[test]
    fn variable_exponent() {
        let e = parse("u^v", &uv()).unwrap();
        let dv = e.differentiate(Symbol::V(0));
        let b = Binding::new().with(Symbol::U(0), 2.0).with(Symbol::V(0), 3.0);
        assert!((dv.evaluate(&b).unwrap() - 8.0 * 2f64.ln()).abs() < 1e-14);
    }

    /// Random trees over {u, v} built from operations that stay in-domain on
    /// the positive box the property samples.
    fn arb_expr() -> impl Strategy<Value = ExprNode> {
        let leaf = prop_oneof![
            (0.5f64..2.0).prop_map(ExprNode::Const),
            Just(ExprNode::Var(Symbol::U(0))),
            Just(ExprNode::Var(Symbol::V(0))),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 2..4).prop_map(ExprNode::Sum),
                prop::collection::vec(inner.clone(), 2..3).prop_map(ExprNode::Product),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                    // denominators kept away from zero
                    ExprNode::div(a, ExprNode::add(ExprNode::Const(1.0), ExprNode::mul(b.clone(), b)))
                }),
                (inner.clone(), -2.0f64..3.0).prop_map(|(a, c)| {
                    ExprNode::pow(ExprNode::add(ExprNode::Const(0.5), ExprNode::mul(a.clone(), a)), ExprNode::Const(c))
                }),
                inner.clone().prop_map(|a| ExprNode::exp(ExprNode::div(a, ExprNode::Const(4.0)))),
                inner.prop_map(|a| ExprNode::log(ExprNode::add(ExprNode::Const(1.0), ExprNode::mul(a.clone(), a)))),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn derivative_matches_centered_differences(
            e in arb_expr(),
            u in 0.5f64..2.0,
            v in 0.5f64..2.0,
            wrt_u in any::<bool>(),
        ) {
            let var = if wrt_u { Symbol::U(0) } else { Symbol::V(0) };
            let d = e.differentiate(var);
            let at = |du: f64| {
                let mut b = Binding::new().with(Symbol::U(0), u).with(Symbol::V(0), v);
                b.set(var, b.get(var).unwrap() + du);
                b
            };
            let exact = d.evaluate(&at(0.0)).unwrap();
            let step = 1.0e-5;
            let fd = (e.evaluate(&at(step)).unwrap() - e.evaluate(&at(-step)).unwrap()) / (2.0 * step);
            let scale = exact.abs().max(e.evaluate(&at(0.0)).unwrap().abs()).max(1.0);
            prop_assert!((exact - fd).abs() <= 1.0e-6 * scale, "{} vs {} for {}", exact, fd, e);
        }
    }
}

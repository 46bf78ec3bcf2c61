use super::{power, ExprNode};

/// Constant folding plus removal of additive zeros and multiplicative ones.
/// Not a canonicalizer: `u*v` and `v*u` stay distinct.
pub(super) fn simplify(e: &ExprNode) -> ExprNode {
    match e {
        ExprNode::Const(_) | ExprNode::Var(_) => e.clone(),
        ExprNode::Sum(xs) => {
            let mut constant = 0.0;
            let mut terms = Vec::new();
            for x in xs.iter().map(simplify) {
                match x {
                    ExprNode::Const(c) => constant += c,
                    ExprNode::Sum(inner) => {
                        for t in inner {
                            match t {
                                ExprNode::Const(c) => constant += c,
                                t => terms.push(t),
                            }
                        }
                    }
                    t => terms.push(t),
                }
            }
            if constant != 0.0 {
                terms.push(ExprNode::Const(constant));
            }
            match terms.len() {
                0 => ExprNode::Const(0.0),
                1 => terms.pop().unwrap(),
                _ => ExprNode::Sum(terms),
            }
        }
        ExprNode::Product(xs) => {
            let mut constant = 1.0;
            let mut factors = Vec::new();
            for x in xs.iter().map(simplify) {
                match x {
                    ExprNode::Const(c) => constant *= c,
                    ExprNode::Product(inner) => {
                        for t in inner {
                            match t {
                                ExprNode::Const(c) => constant *= c,
                                t => factors.push(t),
                            }
                        }
                    }
                    t => factors.push(t),
                }
            }
            if constant == 0.0 {
                return ExprNode::Const(0.0);
            }
            if factors.is_empty() {
                return ExprNode::Const(constant);
            }
            if constant != 1.0 {
                factors.insert(0, ExprNode::Const(constant));
            }
            if factors.len() == 1 {
                factors.pop().unwrap()
            } else {
                ExprNode::Product(factors)
            }
        }
        ExprNode::Quotient(a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (&a, &b) {
                (_, ExprNode::Const(d)) if *d == 1.0 => a,
                (ExprNode::Const(n), ExprNode::Const(d)) if *d != 0.0 => ExprNode::Const(n / d),
                (ExprNode::Const(n), _) if *n == 0.0 => ExprNode::Const(0.0),
                (_, ExprNode::Const(d)) if *d != 0.0 => simplify(&ExprNode::Product(vec![ExprNode::Const(1.0 / d), a])),
                _ => ExprNode::div(a, b),
            }
        }
        ExprNode::Power(base, exponent) => {
            let (base, exponent) = (simplify(base), simplify(exponent));
            match (&base, &exponent) {
                (_, ExprNode::Const(c)) if *c == 1.0 => base,
                (_, ExprNode::Const(c)) if *c == 0.0 => ExprNode::Const(1.0),
                (ExprNode::Const(b), _) if *b == 1.0 => ExprNode::Const(1.0),
                (ExprNode::Const(b), ExprNode::Const(c)) => match power(*b, *c) {
                    Ok(v) => ExprNode::Const(v),
                    Err(_) => ExprNode::pow(base, exponent),
                },
                _ => ExprNode::pow(base, exponent),
            }
        }
        ExprNode::Exp(a) => match simplify(a) {
            ExprNode::Const(c) => ExprNode::Const(c.exp()),
            a => ExprNode::exp(a),
        },
        ExprNode::Log(a) => match simplify(a) {
            ExprNode::Const(c) if c > 0.0 => ExprNode::Const(c.ln()),
            a => ExprNode::log(a),
        },
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Binding, ExprNode, Symbol, SymbolSet};
    use proptest::prelude::*;

    fn s(text: &str) -> ExprNode {
        parse(text, &SymbolSet::pair(1)).unwrap().simplify()
    }

    #[test]
    fn removes_identities() {
        assert_eq!(s("0*u + 1*v"), ExprNode::Var(Symbol::V(0)));
        assert_eq!(s("u^1"), ExprNode::Var(Symbol::U(0)));
        assert_eq!(s("2+3"), ExprNode::Const(5.0));
        assert_eq!(s("u^0"), ExprNode::Const(1.0));
        assert_eq!(s("exp(0)*log(1) + u/1"), ExprNode::Var(Symbol::U(0)));
    }

    #[test]
    fn keeps_domain_errors_unfolded() {
        assert!(matches!(s("(-1)^0.5"), ExprNode::Power(_, _)));
        assert!(matches!(s("log(0)"), ExprNode::Log(_)));
    }

    fn arb_expr() -> impl Strategy<Value = ExprNode> {
        let leaf = prop_oneof![
            (-3i32..4).prop_map(|c| ExprNode::Const(c as f64)),
            (0.1f64..3.0).prop_map(ExprNode::Const),
            Just(ExprNode::Var(Symbol::U(0))),
            Just(ExprNode::Var(Symbol::V(0))),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 1..4).prop_map(ExprNode::Sum),
                prop::collection::vec(inner.clone(), 1..4).prop_map(ExprNode::Product),
                (inner.clone(), 0i32..3).prop_map(|(a, c)| ExprNode::pow(a, ExprNode::Const(c as f64))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                    ExprNode::div(a, ExprNode::add(ExprNode::Const(2.0), ExprNode::mul(b.clone(), b)))
                }),
                inner.prop_map(|a| ExprNode::exp(ExprNode::div(a, ExprNode::Const(8.0)))),
            ]
        })
    }

    proptest! {
        #[test]
        fn simplify_preserves_values(e in arb_expr(), u in -2.0f64..2.0, v in -2.0f64..2.0) {
            let b = Binding::new().with(Symbol::U(0), u).with(Symbol::V(0), v);
            let before = e.evaluate(&b);
            let after = e.simplify().evaluate(&b);
            if let (Ok(x), Ok(y)) = (before, after) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{} vs {} for {}", x, y, e);
            }
        }
    }
}

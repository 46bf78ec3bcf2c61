use super::{ExprNode, Symbol};

/// Result of [`antiderivative_in`].
#[derive(Clone, Debug, PartialEq)]
pub enum Antiderivative {
    /// Closed form that vanishes at `var = 0`.
    Exact(ExprNode),
    /// No closed form in the supported grammar; integrate numerically from 0.
    Numeric,
}

/// `∫_0^s e dt` in `var`, for sums of terms `c * var^k` (k > -1),
/// `c * exp(a*var + b)` (a constant) and var-free `c`, where `c` is free of
/// `var`. Anything else yields [`Antiderivative::Numeric`].
pub fn antiderivative_in(e: &ExprNode, var: Symbol) -> Antiderivative {
    let e = e.simplify();
    let terms: Vec<ExprNode> = match e {
        ExprNode::Sum(xs) => xs,
        other => vec![other],
    };
    let mut parts = Vec::with_capacity(terms.len());
    for t in &terms {
        match term(t, var) {
            Some(p) => parts.push(p),
            None => return Antiderivative::Numeric,
        }
    }
    Antiderivative::Exact(ExprNode::Sum(parts).simplify())
}

fn term(t: &ExprNode, var: Symbol) -> Option<ExprNode> {
    if !t.depends_on(var) {
        return Some(ExprNode::mul(t.clone(), ExprNode::Var(var)));
    }
    match t {
        ExprNode::Var(s) if *s == var => {
            Some(ExprNode::div(ExprNode::pow(ExprNode::Var(var), ExprNode::Const(2.0)), ExprNode::Const(2.0)))
        }
        ExprNode::Power(base, exponent) if **base == ExprNode::Var(var) => {
            let k = exponent.as_const()?;
            if k <= -1.0 {
                return None;
            }
            Some(ExprNode::div(ExprNode::pow(ExprNode::Var(var), ExprNode::Const(k + 1.0)), ExprNode::Const(k + 1.0)))
        }
        ExprNode::Exp(arg) => {
            let slope = arg.differentiate(var).as_const()?;
            if slope == 0.0 || arg.differentiate(var).differentiate(var) != ExprNode::Const(0.0) {
                return None;
            }
            let at_zero = ExprNode::exp(arg.substitute(var, &ExprNode::Const(0.0)));
            Some(ExprNode::div(ExprNode::sub(t.clone(), at_zero), ExprNode::Const(slope)))
        }
        ExprNode::Quotient(a, b) if !b.depends_on(var) => term(a, var).map(|ia| ExprNode::div(ia, (**b).clone())),
        ExprNode::Product(xs) => {
            let (dependent, free): (Vec<&ExprNode>, Vec<&ExprNode>) = xs.iter().partition(|x| x.depends_on(var));
            if dependent.len() != 1 {
                return None;
            }
            let inner = term(dependent[0], var)?;
            let mut factors: Vec<ExprNode> = free.into_iter().cloned().collect();
            factors.push(inner);
            Some(ExprNode::Product(factors))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Binding, SymbolSet};

    fn set() -> SymbolSet {
        SymbolSet::pair(2).constant("p", 2.5)
    }

    fn exact(text: &str, var: Symbol) -> ExprNode {
        match antiderivative_in(&parse(text, &set()).unwrap(), var) {
            Antiderivative::Exact(e) => e,
            Antiderivative::Numeric => panic!("expected a closed form for {text}"),
        }
    }

    #[test]
    fn power_antiderivative() {
        let f = exact("v^p", Symbol::V(0));
        let b = Binding::new().with(Symbol::V(0), 2.0);
        assert!((f.evaluate(&b).unwrap() - 2f64.powf(3.5) / 3.5).abs() < 1e-14);
    }

    #[test]
    fn coefficient_in_x() {
        let f = exact("1 + x1/2", Symbol::U(0));
        let b = Binding::new().with(Symbol::U(0), 3.0).with(Symbol::X(0), 2.0);
        assert_eq!(f.evaluate(&b).unwrap(), 6.0);
    }

    #[test]
    fn exponential_term_vanishes_at_zero() {
        let f = exact("x1*exp(2*u + 1) - 3*u^2", Symbol::U(0));
        let b = Binding::new().with(Symbol::U(0), 0.0).with(Symbol::X(0), 1.3);
        assert_eq!(f.evaluate(&b).unwrap(), 0.0);
        let b = Binding::new().with(Symbol::U(0), 0.7).with(Symbol::X(0), 1.3);
        let expected = 1.3 * ((2.4f64).exp() - 1f64.exp()) / 2.0 - 0.7f64.powi(3);
        assert!((f.evaluate(&b).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn unsupported_forms_fall_back_to_quadrature() {
        let numeric = |text: &str| antiderivative_in(&parse(text, &set()).unwrap(), Symbol::U(0));
        assert_eq!(numeric("exp(u*u)"), Antiderivative::Numeric);
        assert_eq!(numeric("u^(-1)"), Antiderivative::Numeric);
        assert_eq!(numeric("u^-2 + 1"), Antiderivative::Numeric);
        assert_eq!(numeric("u*exp(u)"), Antiderivative::Numeric);
        assert_eq!(numeric("1/(1+u)"), Antiderivative::Numeric);
    }

    #[test]
    fn derivative_of_antiderivative_recovers_the_integrand() {
        let texts = ["3*u^2 + x1*u + 2", "u^0.5/(1+x1^2)", "exp(-u/3)*x2 + u^p", "4"];
        for text in texts {
            let e = parse(text, &set()).unwrap();
            let f = exact(text, Symbol::U(0));
            for (u, x1, x2) in [(0.3, 0.1, -1.0), (1.7, 2.0, 0.5), (4.0, -0.3, 3.0)] {
                let b = Binding::new().with(Symbol::U(0), u).with(Symbol::X(0), x1).with(Symbol::X(1), x2);
                let lhs = f.differentiate(Symbol::U(0)).evaluate(&b).unwrap();
                let rhs = e.evaluate(&b).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{text}: {lhs} vs {rhs}");
                let zero = b.clone().with(Symbol::U(0), 0.0);
                assert_eq!(f.evaluate(&zero).unwrap(), 0.0, "{text}");
            }
        }
    }
}

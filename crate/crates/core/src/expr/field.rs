use super::{antiderivative_in, Antiderivative, Binding, ExprError, ExprNode, Symbol};
use crate::quadrature::gauss_kronrod;

/// Absolute tolerance of the adaptive quadrature behind numeric antiderivatives.
pub const ANTIDERIVATIVE_ABS_TOL: f64 = 1.0e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Exact(ExprNode),
    /// `∫_0^{var} integrand dt`, with the other variables held fixed.
    Quadrature {
        integrand: ExprNode,
        var: Symbol,
    },
}

/// A scalar function of the bound variables: a sum of closed-form parts and
/// quadrature-defined antiderivatives. Partial derivatives stay in this form,
/// so `F_{x_i}` of a numeric `F` is again a quadrature of `f_{x_i}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Field {
    parts: Vec<Primitive>,
}

impl Field {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn exact(e: ExprNode) -> Self {
        let e = e.simplify();
        if e.is_zero() {
            return Self::zero();
        }
        Field { parts: vec![Primitive::Exact(e)] }
    }

    /// `∫_0^{var} e dt`, symbolic when possible.
    pub fn antiderivative(e: &ExprNode, var: Symbol) -> Self {
        match antiderivative_in(e, var) {
            Antiderivative::Exact(a) => Self::exact(a),
            Antiderivative::Numeric => Field { parts: vec![Primitive::Quadrature { integrand: e.simplify(), var }] },
        }
    }

    pub fn parts(&self) -> &[Primitive] {
        &self.parts
    }

    pub fn is_exact(&self) -> bool {
        self.parts.iter().all(|p| matches!(p, Primitive::Exact(_)))
    }

    /// The closed form, if every part has one.
    pub fn as_expr(&self) -> Option<ExprNode> {
        let mut terms = Vec::new();
        for p in &self.parts {
            match p {
                Primitive::Exact(e) => terms.push(e.clone()),
                Primitive::Quadrature { .. } => return None,
            }
        }
        Some(ExprNode::Sum(terms).simplify())
    }

    pub fn plus(mut self, other: Field) -> Self {
        self.parts.extend(other.parts);
        self
    }

    pub fn depends_on(&self, s: Symbol) -> bool {
        self.parts.iter().any(|p| match p {
            Primitive::Exact(e) => e.depends_on(s),
            Primitive::Quadrature { integrand, var } => *var == s || integrand.depends_on(s),
        })
    }

    pub fn rename(&self, map: &impl Fn(Symbol) -> Symbol) -> Self {
        let parts = self
            .parts
            .iter()
            .map(|p| match p {
                Primitive::Exact(e) => Primitive::Exact(e.rename(map)),
                Primitive::Quadrature { integrand, var } => {
                    Primitive::Quadrature { integrand: integrand.rename(map), var: map(*var) }
                }
            })
            .collect();
        Field { parts }
    }

    pub fn partial(&self, s: Symbol) -> Self {
        let mut out = Field::zero();
        for p in &self.parts {
            let d = match p {
                Primitive::Exact(e) => Field::exact(e.differentiate(s)),
                Primitive::Quadrature { integrand, var } if *var == s => Field::exact(integrand.clone()),
                Primitive::Quadrature { integrand, var } => {
                    let di = integrand.differentiate(s);
                    if di.is_zero() {
                        Field::zero()
                    } else {
                        Field { parts: vec![Primitive::Quadrature { integrand: di, var: *var }] }
                    }
                }
            };
            out = out.plus(d);
        }
        out
    }

    /// `Σ_i x_i ∂/∂x_i + r ∂/∂r` over `x1..xn`: the radial derivative
    /// `x·∇` applied to the explicit coordinate dependence.
    pub fn euler(&self, n: usize) -> Self {
        let mut out = Field::zero();
        let mut coords: Vec<Symbol> = (0..n).map(|i| Symbol::X(i as u8)).collect();
        coords.push(Symbol::R);
        for c in coords {
            if !self.depends_on(c) {
                continue;
            }
            for p in self.partial(c).parts {
                out.parts.push(match p {
                    Primitive::Exact(e) => Primitive::Exact(ExprNode::mul(ExprNode::Var(c), e).simplify()),
                    Primitive::Quadrature { integrand, var } => {
                        Primitive::Quadrature { integrand: ExprNode::mul(ExprNode::Var(c), integrand).simplify(), var }
                    }
                });
            }
        }
        out
    }

    pub fn evaluate(&self, b: &Binding) -> Result<f64, ExprError> {
        let mut total = 0.0;
        for p in &self.parts {
            total += match p {
                Primitive::Exact(e) => e.evaluate(b)?,
                Primitive::Quadrature { integrand, var } => {
                    let upper = b.get(*var).ok_or(ExprError::Unbound(*var))?;
                    let mut inner = b.clone();
                    let mut failure = None;
                    let value = gauss_kronrod(
                        |t| {
                            inner.set(*var, t);
                            match integrand.evaluate(&inner) {
                                Ok(y) => y,
                                Err(e) => {
                                    failure.get_or_insert(e);
                                    0.0
                                }
                            }
                        },
                        0.0,
                        upper,
                        ANTIDERIVATIVE_ABS_TOL,
                    );
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    value.map_err(|e| ExprError::Quadrature(e.to_string()))?
                }
            };
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, SymbolSet};

    #[test]
    fn numeric_antiderivative_matches_known_integral() {
        let e = parse("exp(u*u)", &SymbolSet::scalar(1)).unwrap();
        let f = Field::antiderivative(&e, Symbol::U(0));
        assert!(!f.is_exact());
        // ∫_0^1 exp(t²) dt
        let v = f.evaluate(&Binding::new().with(Symbol::U(0), 1.0)).unwrap();
        assert!((v - 1.462_651_745_907_181_6).abs() < 1e-12);
        assert_eq!(f.partial(Symbol::U(0)).as_expr(), Some(e.simplify()));
    }

    #[test]
    fn partial_in_coordinate_differentiates_under_the_integral() {
        let e = parse("x1*exp(u*u)", &SymbolSet::scalar(1)).unwrap();
        let f = Field::antiderivative(&e, Symbol::U(0));
        let fx = f.partial(Symbol::X(0));
        let b = Binding::new().with(Symbol::U(0), 1.0).with(Symbol::X(0), 5.0);
        assert!((fx.evaluate(&b).unwrap() - 1.462_651_745_907_181_6).abs() < 1e-12);
        let euler = f.euler(1);
        assert!((euler.evaluate(&b).unwrap() - 5.0 * 1.462_651_745_907_181_6).abs() < 1e-11);
    }

    #[test]
    fn euler_operator_on_radius_and_coordinates() {
        let set = SymbolSet::general(2, 1);
        let h = Field::exact(parse("(1 + r^2/4)*u + x1*x2*v", &set).unwrap());
        let b = Binding::new()
            .with(Symbol::R, 2.0)
            .with(Symbol::X(0), 1.0)
            .with(Symbol::X(1), 3.0)
            .with(Symbol::U(0), 1.5)
            .with(Symbol::V(0), 0.5);
        // r * (r/2) u + (x1 x2 + x1 x2) v
        assert!((h.euler(2).evaluate(&b).unwrap() - (2.0 * 1.0 * 1.5 + 2.0 * 3.0 * 0.5)).abs() < 1e-14);
    }

    #[test]
    fn domain_errors_inside_quadrature_propagate() {
        let e = parse("log(u - 1) * exp(u*u)", &SymbolSet::scalar(1)).unwrap();
        let f = Field::antiderivative(&e, Symbol::U(0));
        assert!(matches!(f.evaluate(&Binding::new().with(Symbol::U(0), 2.0)), Err(ExprError::Domain(_))));
    }
}

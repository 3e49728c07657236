//! Coefficient fields defined by expressions: the symmetric order field
//! `s(x, y)`, symmetric exponent fields `p(x, y)` and scalar fields such as
//! `q(x)` and `beta(x)`.

use crate::error::{Error, Result};
use crate::expr::{Expression, Var};

/// Closed interval on which fields are sampled for their bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// `n + 1` equispaced points including both ends.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let n = n.max(1);
        (0..=n).map(move |k| {
            if k == n {
                self.hi
            } else {
                self.lo + self.len() * k as f64 / n as f64
            }
        })
    }
}

pub(crate) const BOUND_SAMPLES: usize = 64;

/// A field `f(x, y)` made symmetric by averaging `expr(x, y)` and
/// `expr(y, x)`. Floating-point addition commutes, so the result is
/// bit-exactly symmetric.
#[derive(Debug, Clone)]
pub struct SymmetricField {
    expr: Expression,
}

impl SymmetricField {
    pub fn new(expr: Expression) -> SymmetricField {
        SymmetricField { expr }
    }

    pub fn constant(value: f64) -> SymmetricField {
        SymmetricField::new(Expression::constant(value))
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        let a = self.expr.eval(x, y)?;
        let b = self.expr.eval(y, x)?;
        Ok(0.5 * (a + b))
    }

    /// Sampled (min, max) over `domain x domain`.
    pub fn bounds(&self, domain: Interval) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in domain.grid(BOUND_SAMPLES) {
            for y in domain.grid(BOUND_SAMPLES) {
                let v = self.value(x, y)?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok((lo, hi))
    }
}

/// Variable order `s(x, y)` with values in `(0, 1)`.
#[derive(Debug, Clone)]
pub struct OrderField {
    field: SymmetricField,
    pub s_minus: f64,
    pub s_plus: f64,
}

impl OrderField {
    /// Builds the field and samples `s-`, `s+` over `domain x domain`.
    pub fn new(expr: Expression, domain: Interval) -> Result<OrderField> {
        let field = SymmetricField::new(expr);
        let (lo, hi) = field.bounds(domain)?;
        if !(lo > 0.0 && hi < 1.0) {
            return Err(Error::InvalidOrder(format!(
                "s = {} takes values in [{lo}, {hi}], outside (0, 1)",
                field.expression()
            )));
        }
        Ok(OrderField {
            field,
            s_minus: lo,
            s_plus: hi,
        })
    }

    pub fn constant(s: f64, domain: Interval) -> Result<OrderField> {
        OrderField::new(Expression::constant(s), domain)
    }

    pub fn expression(&self) -> &Expression {
        self.field.expression()
    }

    /// Symmetrized order at `(x, y)`; values outside `(0, 1)` are an error,
    /// never clamped.
    pub fn value(&self, x: f64, y: f64) -> Result<f64> {
        let s = self.field.value(x, y)?;
        if s > 0.0 && s < 1.0 {
            Ok(s)
        } else {
            Err(Error::InvalidOrder(format!(
                "s({x}, {y}) = {s} outside (0, 1)"
            )))
        }
    }
}

/// Scalar field of `x` alone, such as the reaction exponent or `beta`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expression,
}

impl ScalarField {
    pub fn new(expr: Expression) -> Result<ScalarField> {
        if expr.uses(Var::Y) {
            return Err(Error::Config(format!("field {expr} may only depend on x")));
        }
        Ok(ScalarField { expr })
    }

    pub fn constant(value: f64) -> ScalarField {
        ScalarField {
            expr: Expression::constant(value),
        }
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.expr.eval(x, x)?)
    }

    pub fn bounds(&self, domain: Interval) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in domain.grid(BOUND_SAMPLES * 4) {
            let v = self.value(x)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(-1.0, 2.0)
    }

    #[test]
    fn constant_order() {
        let s = OrderField::new(Expression::parse("0.5").unwrap(), unit()).unwrap();
        assert_eq!(s.value(0.3, 1.7).unwrap(), 0.5);
        assert_eq!((s.s_minus, s.s_plus), (0.5, 0.5));
    }

    #[test]
    fn order_at_unit_separation() {
        let s = OrderField::new(Expression::parse("0.4+0.1*abs(x-y)").unwrap(), unit()).unwrap();
        assert_eq!(s.value(0.0, 1.0).unwrap(), 0.5);
        assert!((s.s_minus - 0.4).abs() < 1e-15);
        assert!((s.s_plus - 0.7).abs() < 1e-15);
    }

    #[test]
    fn order_out_of_range_is_rejected() {
        let err = OrderField::new(Expression::parse("1.2").unwrap(), unit()).unwrap_err();
        assert!(matches!(err, Error::InvalidOrder(_)));
        let s = OrderField::new(Expression::parse("0.5").unwrap(), unit()).unwrap();
        assert!(s.value(0.0, 0.0).is_ok());
    }

    #[test]
    fn nonsymmetric_expression_is_symmetrized() {
        let s = OrderField::new(
            Expression::parse("0.3 + 0.2*x").unwrap(),
            Interval::new(0.0, 1.0),
        )
        .unwrap();
        assert_eq!(s.value(0.0, 1.0).unwrap(), s.value(1.0, 0.0).unwrap());
        assert!((s.value(0.0, 1.0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn scalar_field_rejects_y() {
        assert!(ScalarField::new(Expression::parse("x + y").unwrap()).is_err());
        let q = ScalarField::new(Expression::parse("2 + x").unwrap()).unwrap();
        assert_eq!(q.value(0.5).unwrap(), 2.5);
        assert_eq!(q.bounds(Interval::new(0.0, 1.0)).unwrap(), (2.0, 3.0));
    }

    proptest::proptest! {
        #[test]
        fn symmetrized_field_is_exactly_symmetric(x in -1.0f64..2.0, y in -1.0f64..2.0) {
            for text in ["0.4+0.1*abs(x-y)", "0.3+0.1*x+0.05*y*y", "0.5+0.1*sin(x-2*y)"] {
                let f = SymmetricField::new(Expression::parse(text).unwrap());
                proptest::prop_assert_eq!(f.value(x, y).unwrap(), f.value(y, x).unwrap());
            }
        }
    }
}

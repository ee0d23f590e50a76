use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use meval::{ContextProvider, FuncEvalError};

/// Closed-form scalar expression over `x1, x2, x3` and `t`.
#[derive(Clone)]
pub struct Expression {
    source: String,
    expr: meval::Expr,
    uses_t: bool,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({:?})", self.source)
    }
}

struct Env<'a> {
    x: &'a [f64],
    t: f64,
    saw_t: Cell<bool>,
}

impl ContextProvider for Env<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        let coord = |i: usize| Some(self.x.get(i).copied().unwrap_or(0.0));
        match name {
            "x1" => coord(0),
            "x2" => coord(1),
            "x3" => coord(2),
            "t" => {
                self.saw_t.set(true);
                Some(self.t)
            }
            "pi" => Some(std::f64::consts::PI),
            "e" => Some(std::f64::consts::E),
            _ => None,
        }
    }

    fn eval_func(&self, name: &str, args: &[f64]) -> Result<f64, FuncEvalError> {
        let unary = |f: fn(f64) -> f64| match args.len() {
            1 => Ok(f(args[0])),
            0 => Err(FuncEvalError::TooFewArguments),
            _ => Err(FuncEvalError::TooManyArguments),
        };
        match name {
            "sin" => unary(f64::sin),
            "cos" => unary(f64::cos),
            "tan" => unary(f64::tan),
            "exp" => unary(f64::exp),
            "ln" => unary(f64::ln),
            "sqrt" => unary(f64::sqrt),
            "abs" => unary(f64::abs),
            "sinh" => unary(f64::sinh),
            "cosh" => unary(f64::cosh),
            "tanh" => unary(f64::tanh),
            _ => Err(FuncEvalError::UnknownFunction),
        }
    }
}

impl Expression {
    /// Parses `source` and probes it once so unknown names fail here, not
    /// mid-run. `field` names the config entry in error messages.
    pub fn parse(field: &str, source: &str) -> Result<Self, String> {
        let normalized: String = source
            .chars()
            .map(|c| match c {
                '\u{00d7}' => '*',
                '\u{00f7}' => '/',
                '\u{2212}' => '-',
                c => c,
            })
            .collect();
        let expr = meval::Expr::from_str(&normalized).map_err(|e| format!("{field}: {e}"))?;
        let env = Env { x: &[0.1, 0.2, 0.3], t: 0.0, saw_t: Cell::new(false) };
        expr.eval_with_context(&env).map_err(|e| format!("{field}: {e}"))?;
        Ok(Self { source: source.to_string(), expr, uses_t: env.saw_t.get() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn uses_t(&self) -> bool {
        self.uses_t
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        let env = Env { x, t, saw_t: Cell::new(false) };
        self.expr.eval_with_context(&env).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_coordinates_and_functions() {
        let e = Expression::parse("f", "1 + 0.5*sin(x1)^2 - cos(x2)/2 + x3").unwrap();
        let x = [0.7, 1.3, 0.25];
        let exact = 1.0 + 0.5 * 0.7f64.sin().powi(2) - 1.3f64.cos() / 2.0 + 0.25;
        assert!((e.eval(&x, 0.0) - exact).abs() < 1e-15);
        assert!(!e.uses_t());
    }

    #[test]
    fn detects_time_dependence() {
        let e = Expression::parse("f", "exp(-t) * sin(x2)").unwrap();
        assert!(e.uses_t());
        assert!((e.eval(&[0.0, 1.0], 1.0) - (-1.0f64).exp() * 1.0f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn accepts_typographic_operators() {
        let e = Expression::parse("f", "2 \u{00d7} x1 \u{2212} 1 \u{00f7} 4").unwrap();
        assert_eq!(e.eval(&[1.0], 0.0), 1.75);
    }

    #[test]
    fn rejects_unknown_names_with_field() {
        let err = Expression::parse("initial_data.rho0", "1 + y").unwrap_err();
        assert!(err.starts_with("initial_data.rho0"), "{err}");
        assert!(err.contains('y'));
        assert!(Expression::parse("f", "foo(x1)").is_err());
        assert!(Expression::parse("f", "1 +").is_err());
    }
}

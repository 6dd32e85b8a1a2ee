//! Functions of x given on the command line.
//!
//! Accepted forms: a named density (`h11`, `h00`, `h01`, `h0m<k>`), `@path`
//! for a CSV written by `write_function`, or an arithmetic expression in `x`
//! such as `1 - (1-x)^3` or `math::exp(-x)`. Integer literals are read as
//! floats, so `1/2` is one half.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value,
};
use wfren_core::branching::Density;
use wfren_core::io::read_function;
use wfren_core::loglaplace::CatalyzingFunction;

use crate::config::usage;

pub enum FunctionSpec {
    Density(Density),
    Table(CatalyzingFunction),
    Expr(Node<DefaultNumericTypes>),
}

pub fn parse_function(s: &str) -> Result<FunctionSpec> {
    let s = s.trim();
    if let Ok(d) = s.parse::<Density>() {
        return Ok(FunctionSpec::Density(d));
    }
    if let Some(path) = s.strip_prefix('@') {
        let f = read_function(PathBuf::from(path)).with_context(|| format!("reading {path}"))?;
        return Ok(FunctionSpec::Table(f));
    }
    let node = match build_operator_tree::<DefaultNumericTypes>(&floatify(s)) {
        Ok(node) => FunctionSpec::Expr(node),
        Err(e) => return usage(format!("cannot parse function {s:?}: {e}")),
    };
    // some malformed input only fails on evaluation
    if let Err(e) = node.eval(0.5) {
        return usage(format!("cannot evaluate function {s:?}: {e}"));
    }
    Ok(node)
}

impl FunctionSpec {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            FunctionSpec::Density(d) => Ok(d.eval(x)),
            FunctionSpec::Table(f) => Ok(f.eval(x)),
            FunctionSpec::Expr(node) => {
                let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
                ctx.set_value("x".into(), Value::Float(x)).map_err(|e| anyhow!("{e}"))?;
                node.eval_number_with_context(&ctx).map_err(|e| anyhow!("evaluating at x = {x}: {e}"))
            }
        }
    }

    /// Values on the M+1 uniform nodes; must be finite and nonnegative.
    pub fn grid(&self, m: usize) -> Result<CatalyzingFunction> {
        if let FunctionSpec::Table(f) = self {
            if f.intervals() == m {
                return Ok(f.clone());
            }
        }
        let mut v = Vec::with_capacity(m + 1);
        for i in 0..=m {
            let x = i as f64 / m as f64;
            let y = self.eval(x)?;
            if !y.is_finite() || y < 0.0 {
                return usage(format!("function value {y} at x = {x} is not a finite nonnegative number"));
            }
            v.push(y);
        }
        Ok(CatalyzingFunction::new(v)?)
    }
}

/// Appends `.0` to integer literals so that evalexpr does float arithmetic.
fn floatify(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let in_word = i > 0 && (chars[i - 1].is_alphanumeric() || chars[i - 1] == '_' || chars[i - 1] == '.');
        if c.is_ascii_digit() && !in_word {
            let start = i;
            let digits = |mut j: usize| {
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                j
            };
            i = digits(i);
            let mut is_float = false;
            if chars.get(i) == Some(&'.') {
                is_float = true;
                i = digits(i + 1);
            }
            if matches!(chars.get(i), Some('e') | Some('E')) {
                let mut j = i + 1;
                if matches!(chars.get(j), Some('+') | Some('-')) {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    is_float = true;
                    i = digits(j);
                }
            }
            out.extend(&chars[start..i]);
            if !is_float {
                out.push_str(".0");
            }
            continue;
        }
        out.push(c);
        i += 1;
    }
    out
}

/// Comma-separated list of numbers.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| anyhow!("not a number: {t:?}")))
        .collect::<Result<Vec<_>>>()
        .or_else(|e| usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_literals_become_floats() {
        assert_eq!(floatify("1/2 + x/4"), "1.0/2.0 + x/4.0");
        assert_eq!(floatify("2.5e3*x^2 + 1e-3"), "2.5e3*x^2.0 + 1e-3");
        assert_eq!(floatify("h2o"), "h2o");
    }

    #[test]
    fn expressions_and_names() {
        let f = parse_function("1/2 + x/4").unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 0.75);
        let g = parse_function("1 - (1-x)^3").unwrap();
        assert!((g.eval(0.5).unwrap() - 0.875).abs() < 1e-15);
        let h = parse_function("h00").unwrap();
        assert_eq!(h.grid(4).unwrap().values()[2], 0.25);
        assert_eq!(parse_function("2").unwrap().eval(0.3).unwrap(), 2.0);
        assert!(parse_function("x - 1").unwrap().grid(4).is_err());
        assert!(parse_function("x +").is_err());
        assert!(parse_function("y").is_err());
        assert!((parse_function("1e-3 * x").unwrap().eval(1.0).unwrap() - 1e-3).abs() < 1e-18);
    }
}

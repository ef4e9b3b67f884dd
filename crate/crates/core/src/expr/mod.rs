//! Scalar expressions over ambient coordinates, with forward-mode AD.
//!
//! ```
//! use ralm_core::expr::ExprAst;
//!
//! let vars = ["x", "y"].map(String::from);
//! let e = ExprAst::parse("x*y + y^2", &vars).unwrap();
//! let (v, g) = e.eval_grad(&[3.0, 4.0]).unwrap();
//! assert_eq!(v, 28.0);
//! assert_eq!(g.as_slice(), &[4.0, 11.0]);
//! ```

mod parser;

use std::fmt;

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} is not an integer literal")]
    NonIntegerExponent { offset: usize },
    #[error("domain error at node {node}: {message}")]
    Domain { node: usize, message: &'static str },
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid variable list: {0}")]
    Variables(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// A parsed expression together with the variable names it was parsed against.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprAst {
    root: Expr,
    vars: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: 0.0 }
    }
}

impl ExprAst {
    pub fn parse(text: &str, vars: &[String]) -> Result<Self, ExprError> {
        if vars.is_empty() {
            return Err(ExprError::Variables("no variables declared".into()));
        }
        for (i, v) in vars.iter().enumerate() {
            let valid = v
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(ExprError::Variables(format!("`{v}` is not an identifier")));
            }
            if vars[..i].contains(v) {
                return Err(ExprError::Variables(format!("`{v}` declared twice")));
            }
        }
        let root = parser::Parser::new(text, vars).parse()?;
        Ok(Self {
            root,
            vars: vars.to_vec(),
        })
    }

    /// Wraps an already-built tree. Variable indices must be below `vars.len()`.
    pub fn from_expr(root: Expr, vars: &[String]) -> Result<Self, ExprError> {
        let max = max_var(&root);
        if max.is_some_and(|m| m >= vars.len()) {
            return Err(ExprError::Variables(format!(
                "variable index {} out of range",
                max.unwrap()
            )));
        }
        Ok(Self {
            root,
            vars: vars.to_vec(),
        })
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() != self.vars.len() {
            return Err(ExprError::Dimension {
                expected: self.vars.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.check_dim(x)?;
        let mut node = 0;
        Ok(eval_dual(&self.root, x, None, &mut node)?.v)
    }

    /// Value and exact gradient, one dual-number pass per variable.
    pub fn eval_grad(&self, x: &[f64]) -> Result<(f64, DVector<f64>), ExprError> {
        self.check_dim(x)?;
        let mut grad = DVector::zeros(x.len());
        let mut value = {
            let mut node = 0;
            eval_dual(&self.root, x, None, &mut node)?.v
        };
        for i in 0..x.len() {
            let mut node = 0;
            let d = eval_dual(&self.root, x, Some(i), &mut node)?;
            grad[i] = d.d;
            value = d.v;
        }
        Ok((value, grad))
    }
}

fn max_var(e: &Expr) -> Option<usize> {
    match e {
        Expr::Var(i) => Some(*i),
        Expr::Const(_) => None,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            max_var(a).max(max_var(b))
        }
        Expr::Pow(a, _)
        | Expr::Neg(a)
        | Expr::Exp(a)
        | Expr::Sin(a)
        | Expr::Cos(a)
        | Expr::Sqrt(a) => max_var(a),
    }
}

fn mul(a: Dual, b: Dual) -> Dual {
    Dual {
        v: a.v * b.v,
        d: a.d * b.v + a.v * b.d,
    }
}

fn int_pow(base: Dual, n: u32) -> Dual {
    let mut acc = Dual::constant(1.0);
    for _ in 0..n {
        acc = mul(acc, base);
    }
    acc
}

// `node` counts nodes in pre-order so domain errors can name their location.
fn eval_dual(e: &Expr, x: &[f64], dir: Option<usize>, node: &mut usize) -> Result<Dual, ExprError> {
    let here = *node;
    *node += 1;
    let mut sub = |c: &Expr| eval_dual(c, x, dir, node);
    Ok(match e {
        Expr::Var(i) => Dual {
            v: x[*i],
            d: if dir == Some(*i) { 1.0 } else { 0.0 },
        },
        Expr::Const(c) => Dual::constant(*c),
        Expr::Add(a, b) => {
            let (a, b) = (sub(a)?, sub(b)?);
            Dual {
                v: a.v + b.v,
                d: a.d + b.d,
            }
        }
        Expr::Sub(a, b) => {
            let (a, b) = (sub(a)?, sub(b)?);
            Dual {
                v: a.v - b.v,
                d: a.d - b.d,
            }
        }
        Expr::Mul(a, b) => {
            let (a, b) = (sub(a)?, sub(b)?);
            mul(a, b)
        }
        Expr::Div(a, b) => {
            let (a, b) = (sub(a)?, sub(b)?);
            if b.v == 0.0 {
                return Err(ExprError::Domain {
                    node: here,
                    message: "division by zero",
                });
            }
            Dual {
                v: a.v / b.v,
                d: (a.d * b.v - a.v * b.d) / (b.v * b.v),
            }
        }
        Expr::Pow(a, n) => {
            let a = sub(a)?;
            let p = int_pow(a, n.unsigned_abs());
            if *n >= 0 {
                p
            } else if p.v == 0.0 {
                return Err(ExprError::Domain {
                    node: here,
                    message: "zero raised to a negative power",
                });
            } else {
                Dual {
                    v: 1.0 / p.v,
                    d: -p.d / (p.v * p.v),
                }
            }
        }
        Expr::Neg(a) => {
            let a = sub(a)?;
            Dual { v: -a.v, d: -a.d }
        }
        Expr::Exp(a) => {
            let a = sub(a)?;
            let v = a.v.exp();
            Dual { v, d: v * a.d }
        }
        Expr::Sin(a) => {
            let a = sub(a)?;
            Dual {
                v: a.v.sin(),
                d: a.v.cos() * a.d,
            }
        }
        Expr::Cos(a) => {
            let a = sub(a)?;
            Dual {
                v: a.v.cos(),
                d: -a.v.sin() * a.d,
            }
        }
        Expr::Sqrt(a) => {
            let a = sub(a)?;
            if a.v < 0.0 {
                return Err(ExprError::Domain {
                    node: here,
                    message: "square root of a negative number",
                });
            }
            let v = a.v.sqrt();
            if a.d == 0.0 {
                Dual { v, d: 0.0 }
            } else if v == 0.0 {
                return Err(ExprError::Domain {
                    node: here,
                    message: "square root is not differentiable at zero",
                });
            } else {
                Dual {
                    v,
                    d: a.d / (2.0 * v),
                }
            }
        }
    })
}

struct Printer<'a>(&'a Expr, &'a [String]);

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars = self.1;
        let p = |e: &Expr| Printer(e, vars).to_string();
        match self.0 {
            Expr::Var(i) => write!(f, "{}", vars[*i]),
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{})", -c)
            }
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Add(a, b) => write!(f, "({} + {})", p(a), p(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", p(a), p(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", p(a), p(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", p(a), p(b)),
            Expr::Pow(a, n) => write!(f, "({}^{n})", p(a)),
            Expr::Neg(a) => write!(f, "(-{})", p(a)),
            Expr::Exp(a) => write!(f, "exp({})", p(a)),
            Expr::Sin(a) => write!(f, "sin({})", p(a)),
            Expr::Cos(a) => write!(f, "cos({})", p(a)),
            Expr::Sqrt(a) => write!(f, "sqrt({})", p(a)),
        }
    }
}

/// Fully parenthesized form that parses back to the same tree.
impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer(&self.root, &self.vars).fmt(f)
    }
}

//! Closed-form expression trees for utility and cost oracles.
//!
//! Expressions are evaluated against a priced allocation `(price, attrs)` and,
//! for utilities, the evaluating type's parameter vector. They serialize as
//! externally tagged JSON, e.g. `{"add": [{"mul": [{"param": 0}, {"attr": 0}]}, {"neg": "price"}]}`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    Price,
    Attr(usize),
    Param(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
    Max(Vec<Expr>),
    Min(Vec<Expr>),
    /// `base^exponent` with a constant exponent.
    Pow(Box<Expr>, f64),
}

/// Evaluation inputs.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx<'a> {
    pub price: f64,
    pub attrs: &'a [f64],
    pub params: &'a [f64],
}

/// Largest indices an expression touches, for validation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExprUsage {
    pub uses_price: bool,
    pub max_attr: Option<usize>,
    pub max_param: Option<usize>,
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        Expr::Add(terms)
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        Expr::Mul(factors)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        Expr::Pow(Box::new(base), exponent)
    }

    /// `Σ_j param[offset + j] · attr[j]` for `j < dim`.
    pub fn dot_params_attrs(offset: usize, dim: usize) -> Expr {
        Expr::Add(
            (0..dim)
                .map(|j| Expr::Mul(vec![Expr::Param(offset + j), Expr::Attr(j)]))
                .collect(),
        )
    }

    /// `‖(attr[start], …, attr[start+dim-1])‖₂ ^ exponent`.
    pub fn attr_norm_pow(start: usize, dim: usize, exponent: f64) -> Expr {
        let squares = (start..start + dim)
            .map(|j| Expr::Pow(Box::new(Expr::Abs(Box::new(Expr::Attr(j)))), 2.0))
            .collect();
        Expr::Pow(Box::new(Expr::Add(squares)), exponent / 2.0)
    }

    pub fn eval(&self, ctx: &EvalCtx<'_>) -> f64 {
        match self {
            Expr::Const(v) => *v,
            Expr::Price => ctx.price,
            Expr::Attr(i) => ctx.attrs[*i],
            Expr::Param(i) => ctx.params[*i],
            Expr::Add(terms) => terms.iter().fold(0.0, |acc, t| acc + t.eval(ctx)),
            Expr::Mul(factors) => factors.iter().fold(1.0, |acc, t| acc * t.eval(ctx)),
            Expr::Neg(e) => -e.eval(ctx),
            Expr::Abs(e) => e.eval(ctx).abs(),
            Expr::Max(terms) => terms
                .iter()
                .map(|t| t.eval(ctx))
                .fold(f64::NEG_INFINITY, f64::max),
            Expr::Min(terms) => terms
                .iter()
                .map(|t| t.eval(ctx))
                .fold(f64::INFINITY, f64::min),
            Expr::Pow(base, exponent) => {
                let b = base.eval(ctx);
                if *exponent == 1.0 {
                    b
                } else if *exponent == 2.0 {
                    b * b
                } else {
                    b.powf(*exponent)
                }
            }
        }
    }

    pub fn usage(&self) -> ExprUsage {
        let mut u = ExprUsage::default();
        self.collect_usage(&mut u);
        u
    }

    fn collect_usage(&self, u: &mut ExprUsage) {
        match self {
            Expr::Const(_) => {}
            Expr::Price => u.uses_price = true,
            Expr::Attr(i) => u.max_attr = Some(u.max_attr.map_or(*i, |m| m.max(*i))),
            Expr::Param(i) => u.max_param = Some(u.max_param.map_or(*i, |m| m.max(*i))),
            Expr::Add(v) | Expr::Mul(v) | Expr::Max(v) | Expr::Min(v) => {
                v.iter().for_each(|e| e.collect_usage(u))
            }
            Expr::Neg(e) | Expr::Abs(e) | Expr::Pow(e, _) => e.collect_usage(u),
        }
    }
}

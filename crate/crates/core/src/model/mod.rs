//! Problem data: types, allocation grid, utility and cost oracles, the model
//! variant, and contracts.

mod contract;
pub mod expr;
mod instance;

pub(crate) use contract::cost_unchecked;
pub use contract::{contract_cost, Contract, ContractDoc};
pub use expr::{EvalCtx, Expr};
pub use instance::{load_instance, Instance, InstanceDoc, Point, DEFAULT_TOL};

use serde::{Deserialize, Serialize};

use crate::numeric::ExtReal;

/// Finite type space with probability masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeSpace {
    pub ids: Vec<String>,
    pub weights: Vec<f64>,
}

/// One allocation of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// Opaque label, only seen through table oracles.
    Abstract(String),
    /// Price and attribute vector `(p, q)`.
    Priced { price: f64, attrs: Vec<f64> },
}

impl Payload {
    pub fn priced(price: f64, attrs: Vec<f64>) -> Payload {
        Payload::Priced { price, attrs }
    }

    pub fn price(&self) -> Option<f64> {
        match self {
            Payload::Priced { price, .. } => Some(*price),
            Payload::Abstract(_) => None,
        }
    }

    pub fn attrs(&self) -> Option<&[f64]> {
        match self {
            Payload::Priced { attrs, .. } => Some(attrs),
            Payload::Abstract(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationGrid {
    pub allocations: Vec<Payload>,
    pub outside_index: usize,
}

/// Agent utility `U(type, allocation)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityOracle {
    /// `table[type][alloc]`.
    Table(Vec<Vec<f64>>),
    /// One expression shared by all types; `params[type]` feeds `Expr::Param`.
    Expr { expr: Expr, params: Vec<Vec<f64>> },
}

/// Principal cost `C(allocation)`, possibly `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostOracle {
    Table(Vec<ExtReal>),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetPoint {
    #[serde(rename = "type")]
    pub type_id: String,
    pub budget: f64,
    pub weight: f64,
}

/// Which principal program the instance poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// Every type must participate (IR + IC).
    Full,
    /// Reservation utility per type; cost counts only on the participation set.
    Partial { reservation: Vec<f64> },
    /// Points `(type, budget)` with weights; prices must be affordable.
    Budget {
        points: Vec<BudgetPoint>,
        /// Lower end of the budget range; defaults to the outside option's price.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        floor: Option<f64>,
    },
}

/// Variant tag without data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Full,
    Partial,
    Budget,
}

impl Variant {
    pub fn kind(&self) -> VariantKind {
        match self {
            Variant::Full => VariantKind::Full,
            Variant::Partial { .. } => VariantKind::Partial,
            Variant::Budget { .. } => VariantKind::Budget,
        }
    }
}

impl std::fmt::Display for VariantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VariantKind::Full => "full",
            VariantKind::Partial => "partial",
            VariantKind::Budget => "budget",
        })
    }
}

impl std::str::FromStr for VariantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(VariantKind::Full),
            "partial" => Ok(VariantKind::Partial),
            "budget" => Ok(VariantKind::Budget),
            other => Err(format!("unknown variant `{other}`")),
        }
    }
}

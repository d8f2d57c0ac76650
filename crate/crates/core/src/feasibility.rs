//! Individual rationality, incentive compatibility, budget-constrained
//! incentive compatibility, indirect utilities, and best responses.
//!
//! Utility comparisons allow the instance tolerance on the non-strict side;
//! budget affordability `p ≤ y` is always exact.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Contract, Instance, VariantKind};

/// Nonempty sorted set of allocation indices offered by the principal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Menu {
    items: Vec<usize>,
}

impl Menu {
    pub fn new(items: impl IntoIterator<Item = usize>) -> Result<Menu> {
        let mut items: Vec<usize> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        if items.is_empty() {
            return Err(Error::EmptyMenu);
        }
        Ok(Menu { items })
    }

    /// The whole grid.
    pub fn full(instance: &Instance) -> Menu {
        Menu {
            items: (0..instance.n_allocs()).collect(),
        }
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, alloc: usize) -> bool {
        self.items.binary_search(&alloc).is_ok()
    }

    pub fn check(&self, instance: &Instance) -> Result<()> {
        match self.items.iter().find(|&&a| a >= instance.n_allocs()) {
            Some(bad) => Err(Error::Shape(format!("menu item {bad} out of range"))),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<usize>> for Menu {
    type Error = Error;

    fn try_from(items: Vec<usize>) -> Result<Menu> {
        Menu::new(items)
    }
}

impl From<Menu> for Vec<usize> {
    fn from(menu: Menu) -> Vec<usize> {
        menu.items
    }
}

/// Deterministic selection order among items: higher utility first, then
/// lower principal cost, then lower index.
#[inline]
fn prefers(instance: &Instance, type_index: usize, a: usize, b: usize) -> bool {
    let (ua, ub) = (instance.utility(type_index, a), instance.utility(type_index, b));
    if ua != ub {
        return ua > ub;
    }
    match instance.cost(a).total_cmp(&instance.cost(b)) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a < b,
    }
}

/// Best item of `candidates` for `type_index` under the deterministic
/// selection order, or `None` if `candidates` is empty.
pub(crate) fn select<I: IntoIterator<Item = usize>>(instance: &Instance, type_index: usize, candidates: I) -> Option<usize> {
    candidates
        .into_iter()
        .reduce(|best, a| if prefers(instance, type_index, a, best) { a } else { best })
}

/// `v_A(x) = max_{z ∈ A} U(x, z)`.
pub fn indirect_utility(instance: &Instance, menu: &Menu, type_index: usize) -> Result<f64> {
    menu.check(instance)?;
    Ok(menu
        .items()
        .iter()
        .map(|&a| instance.utility(type_index, a))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// An argmax of `U(x, ·)` over the menu; ties go to lower cost, then lower index.
pub fn best_response(instance: &Instance, menu: &Menu, type_index: usize) -> Result<usize> {
    menu.check(instance)?;
    select(instance, type_index, menu.items().iter().copied()).ok_or(Error::EmptyMenu)
}

/// `max { U(x, z) : z ∈ A, p(z) ≤ y }`, or `None` (−∞) if nothing is affordable.
pub fn budget_indirect_utility(instance: &Instance, menu: &Menu, type_index: usize, budget: f64) -> Result<Option<f64>> {
    if instance.kind() != VariantKind::Budget {
        return Err(Error::Variant { expected: "budget" });
    }
    menu.check(instance)?;
    Ok(menu
        .items()
        .iter()
        .filter(|&&a| instance.price(a).is_some_and(|p| p <= budget))
        .map(|&a| instance.utility(type_index, a))
        .reduce(f64::max))
}

/// Taxation principle: every point picks its best (affordable) menu item.
pub fn menu_to_contract(instance: &Instance, menu: &Menu) -> Result<Contract> {
    menu.check(instance)?;
    let assignment = instance
        .points()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            select(
                instance,
                p.type_index,
                menu.items().iter().copied().filter(|&a| instance.affordable(j, a)),
            )
            .ok_or_else(|| Error::NoAffordableItem { point: p.label.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Contract::new(assignment))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrViolation {
    pub point: String,
    /// `U(x, z0) − U(x, z(x))`.
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcViolation {
    /// The deviating point.
    pub point: String,
    /// The point whose allocation it prefers.
    pub other: String,
    /// `U(x, z(x′)) − U(x, z(x))`.
    pub deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetViolation {
    pub point: String,
    pub price: f64,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub ir_violations: Vec<IrViolation>,
    pub ic_violations: Vec<IcViolation>,
    pub budget_violations: Vec<BudgetViolation>,
}

/// Checks the variant's constraints: Full — IR and IC; Partial — IC only;
/// Budget — affordability, IR, and budget-constrained IC (a point only
/// compares itself with allocations it can afford). Violations are listed in
/// point order.
pub fn check_feasible(instance: &Instance, contract: &Contract) -> Result<FeasibilityReport> {
    contract.check_shape(instance)?;
    let tol = instance.tol();
    let points = instance.points();
    let z0 = instance.outside();
    let kind = instance.kind();

    let mut budget_violations = Vec::new();
    let mut ir_violations = Vec::new();
    let mut ic_violations = Vec::new();

    for (j, p) in points.iter().enumerate() {
        let own = contract.get(j);
        if !instance.affordable(j, own) {
            budget_violations.push(BudgetViolation {
                point: p.label.clone(),
                price: instance.price(own).unwrap_or(f64::NAN),
                budget: p.budget.unwrap_or(f64::NAN),
            });
        }
        let u_own = instance.utility(p.type_index, own);
        if kind != VariantKind::Partial {
            let u_out = instance.utility(p.type_index, z0);
            if u_own < u_out - tol {
                ir_violations.push(IrViolation {
                    point: p.label.clone(),
                    deficit: u_out - u_own,
                });
            }
        }
        for (k, q) in points.iter().enumerate() {
            let other = contract.get(k);
            if k == j || other == own {
                continue;
            }
            if kind == VariantKind::Budget && !instance.affordable(j, other) {
                continue;
            }
            let u_other = instance.utility(p.type_index, other);
            if u_own < u_other - tol {
                ic_violations.push(IcViolation {
                    point: p.label.clone(),
                    other: q.label.clone(),
                    deficit: u_other - u_own,
                });
            }
        }
    }

    Ok(FeasibilityReport {
        feasible: ir_violations.is_empty() && ic_violations.is_empty() && budget_violations.is_empty(),
        ir_violations,
        ic_violations,
        budget_violations,
    })
}

/// `{x : U(x, z(x)) ≥ u0(x) − tol}` as sorted type indices.
pub fn participation_set(instance: &Instance, contract: &Contract) -> Result<Vec<usize>> {
    if instance.kind() != VariantKind::Partial {
        return Err(Error::Variant { expected: "partial" });
    }
    contract.check_shape(instance)?;
    Ok(instance
        .points()
        .iter()
        .zip(contract.assignment())
        .filter(|(p, &a)| instance.participates(p.type_index, a))
        .map(|(p, _)| p.type_index)
        .collect())
}

//! Contract-improvement operators: map a feasible contract to one valued in
//! the admissible set without raising any point's (counted) cost.
//!
//! Each operator maximizes over the admissible part of the original range
//! (plus the outside option where it applies) and keeps the original
//! allocation wherever it is already cheap. The keep rule is applied before
//! the utility maximization, which makes pointwise dominance literal and the
//! operators idempotent.

use serde::{Deserialize, Serialize};

use crate::coercivity::admissible_set;
use crate::error::{Error, Result};
use crate::feasibility::{check_feasible, select};
use crate::model::{Contract, Instance, VariantKind};
use crate::numeric::ExtReal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrace {
    pub point: String,
    pub input: usize,
    pub output: usize,
    /// Counted cost before (the participation indicator applies in the
    /// partial variant).
    pub input_cost: ExtReal,
    pub output_cost: ExtReal,
    pub kept: bool,
    /// The allocation was kept although another item of the maximization set
    /// gave at least the same utility: the keep rule decided.
    pub kept_over_tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTrace {
    pub points: Vec<PointTrace>,
    /// Labels of points whose allocation was retained.
    pub kept: Vec<String>,
    /// The admissible items the operator maximized over.
    pub menu_used: Vec<usize>,
    /// Set when the operator fell back to a constant contract.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<usize>,
}

fn counted_cost(instance: &Instance, type_index: usize, alloc: usize) -> ExtReal {
    if instance.participates(type_index, alloc) {
        instance.cost(alloc)
    } else {
        ExtReal::ZERO
    }
}

fn build_trace(instance: &Instance, input: &Contract, output: &Contract, keep: &[bool], menu: &[usize], constant: Option<usize>) -> ImprovementTrace {
    let mut points = Vec::with_capacity(input.len());
    let mut kept = Vec::new();
    for (j, p) in instance.points().iter().enumerate() {
        let (a, b) = (input.get(j), output.get(j));
        let kept_over_tie = keep[j]
            && menu
                .iter()
                .any(|&z| z != a && instance.affordable(j, z) && instance.utility(p.type_index, z) >= instance.utility(p.type_index, a));
        if keep[j] {
            kept.push(p.label.clone());
        }
        points.push(PointTrace {
            point: p.label.clone(),
            input: a,
            output: b,
            input_cost: counted_cost(instance, p.type_index, a),
            output_cost: counted_cost(instance, p.type_index, b),
            kept: keep[j],
            kept_over_tie,
        });
    }
    ImprovementTrace {
        points,
        kept,
        menu_used: menu.to_vec(),
        constant,
    }
}

fn require_feasible(instance: &Instance, contract: &Contract) -> Result<()> {
    let report = check_feasible(instance, contract)?;
    if report.feasible {
        Ok(())
    } else {
        Err(Error::InfeasibleInput(format!(
            "{} IR, {} IC, {} budget violations",
            report.ir_violations.len(),
            report.ic_violations.len(),
            report.budget_violations.len()
        )))
    }
}

/// Shared core: `keep[j]` decides retention, the rest maximize over `menu`
/// (restricted to affordable items for budget points).
fn reassign(instance: &Instance, contract: &Contract, keep: &[bool], menu: &[usize]) -> Result<Contract> {
    let assignment = instance
        .points()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            if keep[j] {
                return Ok(contract.get(j));
            }
            select(
                instance,
                p.type_index,
                menu.iter().copied().filter(|&z| instance.affordable(j, z)),
            )
            .ok_or_else(|| Error::NoAffordableItem { point: p.label.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Contract::new(assignment))
}

/// Full participation. If no point is assigned something at most as costly
/// as `z0`, returns the constant `z0` contract. Otherwise each point keeps
/// `z(x)` when `C(z(x)) ≤ C(z0)` and otherwise takes its best item of
/// `({z0} ∪ range(z)) ∩ K`.
pub fn improve_full(instance: &Instance, contract: &Contract) -> Result<(Contract, ImprovementTrace)> {
    if instance.kind() != VariantKind::Full {
        return Err(Error::Variant { expected: "full" });
    }
    require_feasible(instance, contract)?;
    let z0 = instance.outside();
    let c0 = instance.cost(z0);
    let keep: Vec<bool> = contract.assignment().iter().map(|&a| instance.cost(a).le(c0)).collect();
    if !keep.iter().any(|&k| k) {
        let out = Contract::constant(instance, z0);
        let trace = build_trace(instance, contract, &out, &keep, &[z0], Some(z0));
        return Ok((out, trace));
    }
    let mask = admissible_set(instance)?;
    let mut menu = contract.range();
    menu.push(z0);
    menu.sort_unstable();
    menu.dedup();
    menu.retain(|&z| mask.contains(z));
    let out = reassign(instance, contract, &keep, &menu)?;
    let trace = build_trace(instance, contract, &out, &keep, &menu, None);
    Ok((out, trace))
}

/// Partial participation. If no assigned item lies in `F0`, returns the
/// constant witness contract. Otherwise participating points with
/// `C(z(x)) ≤ 0` keep `z(x)` and the rest take their best item of
/// `range(z) ∩ F0`. Pointwise, the counted cost never increases.
pub fn improve_partial(instance: &Instance, contract: &Contract) -> Result<(Contract, ImprovementTrace)> {
    if instance.kind() != VariantKind::Partial {
        return Err(Error::Variant { expected: "partial" });
    }
    require_feasible(instance, contract)?;
    let mask = admissible_set(instance)?;
    let witness = mask.witness.expect("F0 masks carry a witness");
    let mut menu = contract.range();
    menu.retain(|&z| mask.contains(z));
    let keep: Vec<bool> = instance
        .points()
        .iter()
        .zip(contract.assignment())
        .map(|(p, &a)| !menu.is_empty() && instance.participates(p.type_index, a) && instance.cost(a).le(ExtReal::ZERO))
        .collect();
    if menu.is_empty() {
        let out = Contract::constant(instance, witness);
        let trace = build_trace(instance, contract, &out, &keep, &[witness], Some(witness));
        return Ok((out, trace));
    }
    let out = reassign(instance, contract, &keep, &menu)?;
    let trace = build_trace(instance, contract, &out, &keep, &menu, None);
    Ok((out, trace))
}

/// Budget constraints. Each point keeps its allocation when
/// `C ≤ C(p0, q0)` and otherwise takes its best affordable item of
/// `({(p0, q0)} ∪ range) ∩ Γ`; the outside option is always affordable.
pub fn improve_budget(instance: &Instance, contract: &Contract) -> Result<(Contract, ImprovementTrace)> {
    if instance.kind() != VariantKind::Budget {
        return Err(Error::Variant { expected: "budget" });
    }
    require_feasible(instance, contract)?;
    let z0 = instance.outside();
    let c0 = instance.cost(z0);
    let mask = admissible_set(instance)?;
    let mut menu = contract.range();
    menu.push(z0);
    menu.sort_unstable();
    menu.dedup();
    menu.retain(|&z| mask.contains(z));
    let keep: Vec<bool> = contract.assignment().iter().map(|&a| instance.cost(a).le(c0)).collect();
    let out = reassign(instance, contract, &keep, &menu)?;
    let trace = build_trace(instance, contract, &out, &keep, &menu, None);
    Ok((out, trace))
}

/// Dispatches on the instance variant.
pub fn improve(instance: &Instance, contract: &Contract) -> Result<(Contract, ImprovementTrace)> {
    match instance.kind() {
        VariantKind::Full => improve_full(instance, contract),
        VariantKind::Partial => improve_partial(instance, contract),
        VariantKind::Budget => improve_budget(instance, contract),
    }
}

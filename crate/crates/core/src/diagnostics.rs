//! Numerical counterparts of the existence arguments: Hausdorff distance
//! between menus, limit extraction from minimizing sequences, the budget
//! singular set, and the penalized indirect utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{budget_indirect_utility, Menu};
use crate::model::{Contract, ContractDoc, Instance, Payload, VariantKind};
use crate::numeric::{exact_sum, next_up, ExtReal};

/// Distance between two allocations: the instance's distance table if it
/// has one, otherwise the Euclidean distance between `(p, q)` vectors.
pub fn allocation_distance(instance: &Instance, a: usize, b: usize) -> Result<f64> {
    if let Some(table) = instance.distance_table() {
        return Ok(table[a][b]);
    }
    match (instance.payload(a), instance.payload(b)) {
        (Payload::Priced { price: pa, attrs: qa }, Payload::Priced { price: pb, attrs: qb }) => {
            let sq = (pa - pb) * (pa - pb) + qa.iter().zip(qb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            Ok(sq.sqrt())
        }
        _ => Err(Error::NoMetric),
    }
}

/// `max(sup_{b∈B} dist(A, b), sup_{a∈A} dist(B, a))`.
pub fn hausdorff(instance: &Instance, a: &Menu, b: &Menu) -> Result<f64> {
    a.check(instance)?;
    b.check(instance)?;
    let directed = |from: &Menu, to: &Menu| -> Result<f64> {
        let mut sup = 0.0f64;
        for &y in to.items() {
            let mut inf = f64::INFINITY;
            for &x in from.items() {
                inf = inf.min(allocation_distance(instance, x, y)?);
            }
            sup = sup.max(inf);
        }
        Ok(sup)
    };
    Ok(directed(a, b)?.max(directed(b, a)?))
}

/// Ordered menus `A_n` with optional contracts `z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuSequence {
    pub menus: Vec<Menu>,
    pub contracts: Option<Vec<Contract>>,
}

/// JSON form of a [`MenuSequence`]; contracts map point labels to indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuSequenceDoc {
    pub menus: Vec<Menu>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contracts: Option<Vec<ContractDoc>>,
}

impl MenuSequence {
    pub fn to_doc(&self, instance: &Instance) -> MenuSequenceDoc {
        MenuSequenceDoc {
            menus: self.menus.clone(),
            contracts: self
                .contracts
                .as_ref()
                .map(|cs| cs.iter().map(|c| c.to_doc(instance)).collect()),
        }
    }

    pub fn from_doc(instance: &Instance, doc: &MenuSequenceDoc) -> Result<MenuSequence> {
        let contracts = doc
            .contracts
            .as_ref()
            .map(|cs| cs.iter().map(|c| Contract::from_doc(instance, c)).collect::<Result<Vec<_>>>())
            .transpose()?;
        Ok(MenuSequence {
            menus: doc.menus.clone(),
            contracts,
        })
    }
}

/// Limit menu and contract extracted from the tail of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Limit {
    pub menu: Menu,
    pub contract: Contract,
    pub value: ExtReal,
}

/// Point `j`'s contribution to the objective at `alloc` (the participation
/// indicator applies in the partial variant).
fn counted_cost(instance: &Instance, j: usize, alloc: usize) -> ExtReal {
    if instance.participates(instance.points()[j].type_index, alloc) {
        instance.cost(alloc)
    } else {
        ExtReal::ZERO
    }
}

/// Limit of the last `⌈tail_fraction·len⌉` entries: the menu is the set of
/// items present in every tail menu; for each point, the contract takes the
/// item with the lowest counted cost among those the tail assigns it, ties
/// by index. Because the final contract's own item is a candidate, the limit
/// contract never costs more than the last contract of the sequence.
pub fn extract_limit(instance: &Instance, seq: &MenuSequence, tail_fraction: f64) -> Result<Limit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument("tail fraction must lie in (0, 1]".into()));
    }
    let len = seq.menus.len();
    if len < 2 {
        return Err(Error::InvalidArgument("a menu sequence needs at least two entries".into()));
    }
    let contracts = seq
        .contracts
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("the menu sequence carries no contracts".into()))?;
    if contracts.len() != len {
        return Err(Error::InvalidArgument(format!(
            "{} menus but {} contracts",
            len,
            contracts.len()
        )));
    }
    for (menu, contract) in seq.menus.iter().zip(contracts) {
        menu.check(instance)?;
        contract.check_shape(instance)?;
    }
    let tail = ((tail_fraction * len as f64).ceil() as usize).clamp(1, len);
    let start = len - tail;

    let common: Vec<usize> = seq.menus[start]
        .items()
        .iter()
        .copied()
        .filter(|&z| seq.menus[start + 1..].iter().all(|m| m.contains(z)))
        .collect();
    let menu = Menu::new(common).map_err(|_| Error::EmptyTail)?;

    let assignment: Vec<usize> = (0..instance.n_points())
        .map(|j| {
            let mut seen: Vec<usize> = contracts[start..].iter().map(|c| c.get(j)).collect();
            seen.sort_unstable();
            seen.dedup();
            seen.into_iter()
                .min_by(|&a, &b| {
                    counted_cost(instance, j, a)
                        .total_cmp(&counted_cost(instance, j, b))
                        .then(a.cmp(&b))
                })
                .expect("tail is nonempty")
        })
        .collect();
    let contract = Contract::new(assignment);
    let value = crate::model::contract_cost(instance, &contract)?;
    Ok(Limit { menu, contract, value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub point: String,
    #[serde(rename = "type")]
    pub type_id: String,
    pub budget: f64,
    pub weight: f64,
    /// `v*(x, y)`: best utility over items priced at most `y`.
    pub v_star: f64,
    /// `v*_-(x, y)`: best utility over items priced strictly below `y`
    /// (equal to `v*` at the budget floor).
    pub v_star_minus: f64,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    /// Labels of singular points.
    pub singular_points: Vec<String>,
    /// Total weight of the singular points.
    pub theta_mass: f64,
    /// Total weight of points sitting exactly at the budget floor, where the
    /// left limit is defined to equal `v*`.
    pub floor_mass: f64,
    pub floor: f64,
    pub jumps: Vec<Jump>,
}

/// Budget points where the indirect utility of `menu` jumps at the point's
/// budget: `v*(x, y) > v*_-(x, y) + tol`. The menu must contain the outside
/// option, which every budget affords.
pub fn singular_set(instance: &Instance, menu: &Menu) -> Result<SingularReport> {
    if instance.kind() != VariantKind::Budget {
        return Err(Error::Variant { expected: "budget" });
    }
    menu.check(instance)?;
    if !menu.contains(instance.outside()) {
        return Err(Error::InvalidArgument("the menu must contain the outside option".into()));
    }
    let floor = instance.budget_floor().expect("budget instances have a floor");
    let tol = instance.tol();
    let mut jumps = Vec::with_capacity(instance.n_points());
    for p in instance.points() {
        let y = p.budget.expect("budget points carry budgets");
        let v_star = budget_indirect_utility(instance, menu, p.type_index, y)?.expect("outside option is affordable");
        let v_star_minus = if y == floor {
            v_star
        } else {
            menu.items()
                .iter()
                .filter(|&&z| instance.price(z).is_some_and(|price| price < y))
                .map(|&z| instance.utility(p.type_index, z))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        jumps.push(Jump {
            point: p.label.clone(),
            type_id: instance.type_ids()[p.type_index].clone(),
            budget: y,
            weight: p.weight,
            v_star,
            v_star_minus,
            singular: v_star > v_star_minus + tol,
        });
    }
    let singular: Vec<&Jump> = jumps.iter().filter(|j| j.singular).collect();
    let theta_mass = exact_sum(&singular.iter().map(|j| j.weight).collect::<Vec<_>>());
    let floor_mass = exact_sum(
        &jumps
            .iter()
            .filter(|j| j.budget == floor)
            .map(|j| j.weight)
            .collect::<Vec<_>>(),
    );
    Ok(SingularReport {
        singular_points: singular.iter().map(|j| j.point.clone()).collect(),
        theta_mass,
        floor_mass,
        floor,
        jumps,
    })
}

/// Copy of `instance` with the prices of `menu`'s items shifted by `delta`
/// (utilities and costs are re-evaluated from the shifted payloads).
pub fn shift_menu_prices(instance: &Instance, menu: &Menu, delta: f64) -> Result<Instance> {
    menu.check(instance)?;
    let mut doc = instance.to_doc();
    for &z in menu.items() {
        match &mut doc.grid.allocations[z] {
            Payload::Priced { price, .. } => *price += delta,
            Payload::Abstract(_) => {
                return Err(Error::InvalidArgument("price shifts need priced allocations".into()))
            }
        }
    }
    Instance::new(doc)
}

fn require_budget(instance: &Instance, menu: &Menu, lambda: f64) -> Result<()> {
    if instance.kind() != VariantKind::Budget {
        return Err(Error::Variant { expected: "budget" });
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    menu.check(instance)
}

/// `v_A^λ(x, y) = max_{z∈A} U(x, z) − λ·max(p(z) − y, 0)`.
pub fn penalized_indirect_utility(instance: &Instance, menu: &Menu, type_index: usize, budget: f64, lambda: f64) -> Result<f64> {
    require_budget(instance, menu, lambda)?;
    Ok(menu
        .items()
        .iter()
        .map(|&z| {
            let price = instance.price(z).unwrap_or(f64::NEG_INFINITY);
            instance.utility(type_index, z) - lambda * (price - budget).max(0.0)
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest `λ*` (in floating point) such that the penalized utility equals
/// the budget indirect utility for every `λ ≥ λ*`; `None` if no menu item is
/// affordable, in which case the budget indirect utility is `−∞` and the
/// penalized one never reaches it.
pub fn penalty_threshold(instance: &Instance, menu: &Menu, type_index: usize, budget: f64) -> Result<Option<f64>> {
    require_budget(instance, menu, 0.0)?;
    let Some(v) = budget_indirect_utility(instance, menu, type_index, budget)? else {
        return Ok(None);
    };
    let mut threshold = 0.0f64;
    for &z in menu.items() {
        let price = instance.price(z).unwrap_or(f64::NEG_INFINITY);
        let u = instance.utility(type_index, z);
        if price <= budget || u <= v {
            continue;
        }
        let gap = price - budget;
        let mut lambda = (u - v) / gap;
        while u - lambda * gap > v {
            lambda = next_up(lambda);
        }
        threshold = threshold.max(lambda);
    }
    Ok(Some(threshold))
}

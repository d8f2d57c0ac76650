//! Optimization of the principal's program over the grid.
//!
//! * [`solve_bruteforce`] enumerates assignments with incremental
//!   constraint pruning (exact, small instances only);
//! * [`solve_menu_enum`] enumerates menus drawn from the admissible set and
//!   lets every point pick its best item (exact once menus may hold one item
//!   per point);
//! * [`solve_local_search`] runs seeded add/remove/swap descent over menus.
//!
//! All three break ties deterministically, so serial and parallel runs
//! return identical reports.

mod brute;
mod local;
mod menu_enum;

pub use brute::solve_bruteforce;
pub use local::{solve_local_search, solve_local_search_traced};
pub use menu_enum::solve_menu_enum;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::coercivity::admissible_set;
use crate::error::{Error, Result};
use crate::feasibility::{select, Menu};
use crate::model::{Contract, ContractDoc, Instance, VariantKind};
use crate::numeric::ExtReal;

/// Default cap on enumerated assignments or menus.
pub const DEFAULT_NODE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// Provably optimal over the grid.
    Exact,
    /// Best contract found; no optimality claim.
    HeuristicBest,
}

/// Which moves local search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub add: bool,
    pub remove: bool,
    pub swap: bool,
}

impl Default for Neighborhood {
    fn default() -> Self {
        Neighborhood {
            add: true,
            remove: true,
            swap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Largest menu considered; `None` means one item per point.
    pub max_menu_size: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub neighborhood: Neighborhood,
    /// Cap on enumerated assignments (brute force) or menus (menu enumeration).
    pub node_cap: u128,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            max_menu_size: None,
            restarts: 8,
            seed: 0,
            neighborhood: Neighborhood::default(),
            node_cap: DEFAULT_NODE_CAP,
        }
    }
}

impl SearchParams {
    pub(crate) fn menu_size(&self, instance: &Instance) -> Result<usize> {
        let k = self.max_menu_size.unwrap_or_else(|| instance.n_points());
        if k == 0 {
            return Err(Error::InvalidArgument("max_menu_size must be at least 1".into()));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Search-tree nodes (brute force) or accepted moves (local search).
    pub nodes: u64,
    /// Menus whose induced contract was evaluated.
    pub menus_evaluated: u64,
    pub restarts: usize,
    /// Wall-clock time; reported on standard error only, never serialized.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solver: &'static str,
    pub contract: Contract,
    /// `contract_cost(contract)`, bit for bit.
    pub value: ExtReal,
    pub menu: Menu,
    /// Participating type indices (partial variant).
    pub participation: Option<Vec<usize>>,
    pub status: SolveStatus,
    pub stats: SolveStats,
}

/// Serializable form of a [`SolveReport`] with point and type labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReportDoc {
    pub solver: String,
    pub contract: ContractDoc,
    pub value: ExtReal,
    pub menu: Menu,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participation: Option<Vec<String>>,
    pub status: SolveStatus,
    pub stats: SolveStats,
    /// Allocation → total weight of points assigned to it.
    pub uptake: BTreeMap<usize, f64>,
}

impl SolveReport {
    pub fn to_doc(&self, instance: &Instance) -> SolveReportDoc {
        SolveReportDoc {
            solver: self.solver.into(),
            contract: self.contract.to_doc(instance),
            value: self.value,
            menu: self.menu.clone(),
            participation: self
                .participation
                .as_ref()
                .map(|p| p.iter().map(|&t| instance.type_ids()[t].clone()).collect()),
            status: self.status,
            stats: self.stats.clone(),
            uptake: uptake(instance, &self.contract),
        }
    }
}

/// Total point weight per assigned allocation (correctly rounded sums).
pub fn uptake(instance: &Instance, contract: &Contract) -> BTreeMap<usize, f64> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (p, &a) in instance.points().iter().zip(contract.assignment()) {
        groups.entry(a).or_default().push(p.weight);
    }
    groups
        .into_iter()
        .map(|(a, w)| (a, crate::numeric::exact_sum(&w)))
        .collect()
}

/// Items menu search draws from: the admissible set plus the outside option
/// (full and budget variants) or the admissible set alone (partial).
/// Infinite-cost items never qualify.
pub(crate) fn candidates(instance: &Instance) -> Result<Vec<usize>> {
    let mask = admissible_set(instance)?;
    let mut items = mask.members;
    if instance.kind() != VariantKind::Partial {
        items.push(instance.outside());
        items.sort_unstable();
        items.dedup();
    }
    items.retain(|&z| instance.cost(z).is_finite());
    Ok(items)
}

/// Contract induced by a menu and its value, or `None` when some point has
/// no affordable item or the induced contract violates IR (possible when the
/// menu omits the outside option). Induced contracts are IC by construction.
pub(crate) fn evaluate_menu(instance: &Instance, items: &[usize]) -> Option<(ExtReal, Vec<usize>)> {
    let z0 = instance.outside();
    let tol = instance.tol();
    let check_ir = instance.kind() != VariantKind::Partial;
    let mut assignment = Vec::with_capacity(instance.n_points());
    for (j, p) in instance.points().iter().enumerate() {
        let a = select(
            instance,
            p.type_index,
            items.iter().copied().filter(|&z| instance.affordable(j, z)),
        )?;
        if check_ir && instance.utility(p.type_index, a) < instance.utility(p.type_index, z0) - tol {
            return None;
        }
        assignment.push(a);
    }
    let value = crate::model::cost_unchecked(instance, &assignment);
    Some((value, assignment))
}

pub(crate) fn participation(instance: &Instance, contract: &Contract) -> Option<Vec<usize>> {
    (instance.kind() == VariantKind::Partial).then(|| {
        crate::feasibility::participation_set(instance, contract).expect("shape-checked partial contract")
    })
}

/// Best-so-far candidate under the deterministic order (value, then menu).
#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub value: ExtReal,
    pub menu: Vec<usize>,
    pub assignment: Vec<usize>,
}

impl Candidate {
    pub fn better_than(&self, other: &Candidate) -> bool {
        match self.value.total_cmp(&other.value) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.menu < other.menu,
        }
    }

    pub fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.better_than(&a) { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

use std::time::Instant;

use super::{participation, SearchParams, SolveReport, SolveStats, SolveStatus};
use crate::error::{Error, Result};
use crate::feasibility::Menu;
use crate::model::{cost_unchecked, Contract, Instance, VariantKind};
use crate::numeric::ExtReal;

/// Variant constraints on single points and on pairs of points.
struct Rules<'a> {
    instance: &'a Instance,
    kind: VariantKind,
    tol: f64,
}

impl Rules<'_> {
    /// Constraints involving one point only: affordability and IR.
    fn unary(&self, j: usize, a: usize) -> bool {
        let inst = self.instance;
        let x = inst.points()[j].type_index;
        match self.kind {
            VariantKind::Partial => true,
            VariantKind::Full => inst.utility(x, a) >= inst.utility(x, inst.outside()) - self.tol,
            VariantKind::Budget => {
                inst.affordable(j, a) && inst.utility(x, a) >= inst.utility(x, inst.outside()) - self.tol
            }
        }
    }

    /// Point `j` holding `a` does not envy another point holding `b`.
    fn no_envy(&self, j: usize, a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        let inst = self.instance;
        if self.kind == VariantKind::Budget && !inst.affordable(j, b) {
            return true;
        }
        let x = inst.points()[j].type_index;
        inst.utility(x, a) >= inst.utility(x, b) - self.tol
    }
}

/// Exhaustive search over all assignments of grid allocations to points.
///
/// Points are assigned in order with allocations in increasing index, and
/// every partial assignment is pruned as soon as a unary or pairwise
/// constraint fails. Among optimal contracts the lexicographically smallest
/// assignment is returned. The reported menu is the contract's range plus
/// the outside option (range only in the partial variant).
pub fn solve_bruteforce(instance: &Instance, params: &SearchParams) -> Result<SolveReport> {
    let start = Instant::now();
    let (n, m) = (instance.n_points(), instance.n_allocs());
    let size = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > params.node_cap {
        return Err(Error::TooLarge {
            size,
            cap: params.node_cap,
        });
    }
    let rules = Rules {
        instance,
        kind: instance.kind(),
        tol: instance.tol(),
    };
    let allowed: Vec<Vec<usize>> = (0..n).map(|j| (0..m).filter(|&a| rules.unary(j, a)).collect()).collect();

    let mut search = Search {
        rules: &rules,
        allowed: &allowed,
        current: Vec::with_capacity(n),
        best: None,
        nodes: 0,
    };
    search.descend();
    let Search { best, nodes, .. } = search;
    let (value, assignment) = best.ok_or(Error::Infeasible)?;

    let contract = Contract::new(assignment);
    let mut items = contract.range();
    if instance.kind() != VariantKind::Partial {
        items.push(instance.outside());
    }
    Ok(SolveReport {
        solver: "brute",
        participation: participation(instance, &contract),
        value,
        menu: Menu::new(items)?,
        contract,
        status: SolveStatus::Exact,
        stats: SolveStats {
            nodes,
            menus_evaluated: 0,
            restarts: 0,
            wall_time: start.elapsed(),
        },
    })
}

struct Search<'a> {
    rules: &'a Rules<'a>,
    allowed: &'a [Vec<usize>],
    current: Vec<usize>,
    best: Option<(ExtReal, Vec<usize>)>,
    nodes: u64,
}

impl Search<'_> {
    fn descend(&mut self) {
        let j = self.current.len();
        if j == self.allowed.len() {
            let value = cost_unchecked(self.rules.instance, &self.current);
            if self.best.as_ref().map_or(true, |(b, _)| value.total_cmp(b).is_lt()) {
                self.best = Some((value, self.current.clone()));
            }
            return;
        }
        for &a in &self.allowed[j] {
            self.nodes += 1;
            let compatible = self
                .current
                .iter()
                .enumerate()
                .all(|(k, &b)| self.rules.no_envy(j, a, b) && self.rules.no_envy(k, b, a));
            if compatible {
                self.current.push(a);
                self.descend();
                self.current.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{toy_a, toy_b, toy_c};
    use crate::feasibility::check_feasible;
    use crate::model::{contract_cost, AllocationGrid, CostOracle, InstanceDoc, Payload, TypeSpace, UtilityOracle, Variant};

    #[test]
    fn toy_a_optimum() {
        let r = solve_bruteforce(&toy_a(), &SearchParams::default()).unwrap();
        assert_eq!(r.value, ExtReal::Finite(-0.5));
        assert_eq!(r.contract.assignment(), &[0, 3]);
        assert_eq!(r.menu.items(), &[0, 3]);
        assert_eq!(r.status, SolveStatus::Exact);
    }

    #[test]
    fn toy_c_optimum_excludes_x1() {
        let inst = toy_c();
        let r = solve_bruteforce(&inst, &SearchParams::default()).unwrap();
        assert_eq!(r.value, ExtReal::Finite(-0.5));
        assert_eq!(contract_cost(&inst, &r.contract).unwrap(), r.value);
    }

    #[test]
    fn toy_b_optimum_is_feasible() {
        let inst = toy_b();
        let r = solve_bruteforce(&inst, &SearchParams::default()).unwrap();
        assert!(check_feasible(&inst, &r.contract).unwrap().feasible);
        assert_eq!(contract_cost(&inst, &r.contract).unwrap(), r.value);
    }

    #[test]
    fn single_allocation_grid() {
        let inst = Instance::new(InstanceDoc {
            types: TypeSpace {
                ids: vec!["only".into()],
                weights: vec![1.0],
            },
            grid: AllocationGrid {
                allocations: vec![Payload::Abstract("z0".into())],
                outside_index: 0,
            },
            utility: UtilityOracle::Table(vec![vec![0.0]]),
            cost: CostOracle::Table(vec![ExtReal::Finite(0.3)]),
            variant: Variant::Full,
            distance: None,
            family: None,
            tol: 1e-9,
        })
        .unwrap();
        let r = solve_bruteforce(&inst, &SearchParams::default()).unwrap();
        assert_eq!(r.contract.assignment(), &[0]);
        assert_eq!(r.value, ExtReal::Finite(0.3));
    }

    #[test]
    fn node_cap_is_enforced() {
        let params = SearchParams {
            node_cap: 24,
            ..SearchParams::default()
        };
        let err = solve_bruteforce(&toy_a(), &params).unwrap_err();
        assert_eq!(err, Error::TooLarge { size: 25, cap: 24 });
        assert_eq!(err.exit_code(), 3);
    }
}

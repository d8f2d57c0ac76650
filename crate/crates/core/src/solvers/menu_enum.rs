use std::time::Instant;

use rayon::prelude::*;

use super::{candidates, evaluate_menu, participation, Candidate, SearchParams, SolveReport, SolveStats, SolveStatus};
use crate::error::{Error, Result};
use crate::feasibility::Menu;
use crate::model::{Contract, Instance};

/// `Σ_{s=1..k} C(n, s)`, saturating.
fn menu_count(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 1..=k.min(n) {
        binom = binom.saturating_mul((n - s + 1) as u128) / s as u128;
        total = total.saturating_add(binom);
    }
    total
}

/// Exhaustive search over menus of at most `max_menu_size` items drawn from
/// the admissible set (plus the outside option in the full and budget
/// variants). Every point picks its best affordable item; menus whose
/// induced contract leaves a point without an affordable item or violates
/// IR are skipped.
///
/// Any optimal contract can be moved into the admissible set without loss,
/// and its range is a menu inducing a contract at least as cheap, so the
/// search is exact once `max_menu_size` reaches the number of points.
/// Ties go to the lexicographically smallest menu.
pub fn solve_menu_enum(instance: &Instance, params: &SearchParams) -> Result<SolveReport> {
    let start = Instant::now();
    let k = params.menu_size(instance)?;
    let items = candidates(instance)?;
    let total = menu_count(items.len(), k);
    if total > params.node_cap {
        return Err(Error::TooLarge {
            size: total,
            cap: params.node_cap,
        });
    }

    let best = (0..items.len())
        .into_par_iter()
        .map(|first| {
            let mut best = None;
            let mut menu = vec![items[first]];
            extend(instance, &items, first + 1, k, &mut menu, &mut best);
            best
        })
        .reduce(|| None, Candidate::pick);
    let best = best.ok_or(Error::Infeasible)?;

    let contract = Contract::new(best.assignment);
    Ok(SolveReport {
        solver: "menu",
        participation: participation(instance, &contract),
        value: best.value,
        menu: Menu::new(best.menu)?,
        contract,
        status: if k >= instance.n_points() || k >= items.len() {
            SolveStatus::Exact
        } else {
            SolveStatus::HeuristicBest
        },
        stats: SolveStats {
            nodes: 0,
            menus_evaluated: total as u64,
            restarts: 0,
            wall_time: start.elapsed(),
        },
    })
}

/// Evaluates `menu`, then every extension by items `items[from..]` up to size `k`.
fn extend(instance: &Instance, items: &[usize], from: usize, k: usize, menu: &mut Vec<usize>, best: &mut Option<Candidate>) {
    if let Some((value, assignment)) = evaluate_menu(instance, menu) {
        let cand = Candidate {
            value,
            menu: menu.clone(),
            assignment,
        };
        *best = Candidate::pick(best.take(), Some(cand));
    }
    if menu.len() == k {
        return;
    }
    for next in from..items.len() {
        menu.push(items[next]);
        extend(instance, items, next + 1, k, menu, best);
        menu.pop();
    }
}

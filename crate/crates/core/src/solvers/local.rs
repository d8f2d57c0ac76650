use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{candidates, evaluate_menu, participation, Candidate, SearchParams, SolveReport, SolveStats, SolveStatus};
use crate::diagnostics::MenuSequence;
use crate::error::{Error, Result};
use crate::feasibility::Menu;
use crate::model::{Contract, Instance};
use crate::numeric::ExtReal;

/// Seeded multi-restart steepest descent over menus drawn from the
/// admissible set (plus the outside option outside the partial variant).
///
/// Run 0 starts from the outside option alone (the lowest-cost admissible
/// item in the partial variant when the outside option is not admissible);
/// runs `1..=restarts` start from random menus of uniformly drawn size. Each
/// step moves to the best add/remove/swap neighbor if it lowers the induced
/// cost by more than the instance tolerance. Runs are independent and
/// reduced under the order (value, menu), so results depend on the seed only.
pub fn solve_local_search(instance: &Instance, params: &SearchParams) -> Result<SolveReport> {
    solve_local_search_traced(instance, params).map(|(report, _)| report)
}

/// As [`solve_local_search`], also returning the best-so-far menus and
/// contracts in the order the runs (taken in index order) improved on them.
pub fn solve_local_search_traced(instance: &Instance, params: &SearchParams) -> Result<(SolveReport, MenuSequence)> {
    let start = Instant::now();
    let k = params.menu_size(instance)?;
    let items = candidates(instance)?;
    if items.is_empty() {
        return Err(Error::Infeasible);
    }
    let runs: Vec<Run> = (0..=params.restarts)
        .into_par_iter()
        .map(|r| descend(instance, params, &items, k, initial_menu(instance, params, &items, k, r)))
        .collect();

    let mut best: Option<Candidate> = None;
    let mut menus = Vec::new();
    let mut contracts = Vec::new();
    let mut stats = SolveStats {
        restarts: params.restarts,
        ..SolveStats::default()
    };
    for run in runs {
        stats.nodes += run.moves;
        stats.menus_evaluated += run.evaluated;
        for cand in run.path {
            if best.as_ref().map_or(true, |b| cand.better_than(b)) {
                menus.push(Menu::new(cand.menu.iter().copied())?);
                contracts.push(Contract::new(cand.assignment.clone()));
                best = Some(cand);
            }
        }
    }
    let best = best.ok_or(Error::Infeasible)?;
    stats.wall_time = start.elapsed();

    let contract = Contract::new(best.assignment);
    let report = SolveReport {
        solver: "local",
        participation: participation(instance, &contract),
        value: best.value,
        menu: Menu::new(best.menu)?,
        contract,
        status: SolveStatus::HeuristicBest,
        stats,
    };
    Ok((
        report,
        MenuSequence {
            menus,
            contracts: Some(contracts),
        },
    ))
}

fn initial_menu(instance: &Instance, params: &SearchParams, items: &[usize], k: usize, run: usize) -> Vec<usize> {
    if run == 0 {
        let z0 = instance.outside();
        if items.contains(&z0) {
            return vec![z0];
        }
        let cheapest = items
            .iter()
            .copied()
            .min_by(|&a, &b| instance.cost(a).total_cmp(&instance.cost(b)).then(a.cmp(&b)))
            .expect("nonempty candidate set");
        return vec![cheapest];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(run as u64));
    let size = rng.random_range(1..=k.min(items.len()));
    let mut menu: Vec<usize> = sample(&mut rng, items.len(), size).into_iter().map(|i| items[i]).collect();
    menu.sort_unstable();
    menu
}

struct Run {
    /// Accepted candidates in order; the last is the run's result.
    path: Vec<Candidate>,
    moves: u64,
    evaluated: u64,
}

fn improves(new: ExtReal, old: Option<ExtReal>, tol: f64) -> bool {
    match (new, old) {
        (_, None) => true,
        (ExtReal::Finite(a), Some(ExtReal::Finite(b))) => a < b - tol,
        (ExtReal::Finite(_), Some(ExtReal::Infinite)) => true,
        (ExtReal::Infinite, _) => false,
    }
}

fn neighbors(params: &SearchParams, items: &[usize], k: usize, menu: &[usize]) -> Vec<Vec<usize>> {
    let outside: Vec<usize> = items.iter().copied().filter(|z| !menu.contains(z)).collect();
    let mut out = Vec::new();
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    if params.neighborhood.add && menu.len() < k {
        for &z in &outside {
            out.push(sorted(menu.iter().copied().chain([z]).collect()));
        }
    }
    if params.neighborhood.remove && menu.len() > 1 {
        for i in 0..menu.len() {
            out.push(menu.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &z)| z).collect());
        }
    }
    if params.neighborhood.swap {
        for i in 0..menu.len() {
            for &z in &outside {
                let mut v = menu.to_vec();
                v[i] = z;
                out.push(sorted(v));
            }
        }
    }
    out
}

fn descend(instance: &Instance, params: &SearchParams, items: &[usize], k: usize, start: Vec<usize>) -> Run {
    let tol = instance.tol();
    let mut evaluated = 1;
    let mut current_menu = start;
    let mut current: Option<Candidate> = evaluate_menu(instance, &current_menu).map(|(value, assignment)| Candidate {
        value,
        menu: current_menu.clone(),
        assignment,
    });
    let mut path: Vec<Candidate> = current.iter().cloned().collect();
    let mut moves = 0;
    loop {
        let mut best: Option<Candidate> = None;
        for menu in neighbors(params, items, k, &current_menu) {
            evaluated += 1;
            if let Some((value, assignment)) = evaluate_menu(instance, &menu) {
                best = Candidate::pick(best, Some(Candidate { value, menu, assignment }));
            }
        }
        match best {
            Some(b) if improves(b.value, current.as_ref().map(|c| c.value), tol) => {
                moves += 1;
                current_menu = b.menu.clone();
                path.push(b.clone());
                current = Some(b);
            }
            _ => break,
        }
    }
    Run { path, moves, evaluated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{toy_a, toy_b, toy_c};
    use crate::feasibility::check_feasible;
    use crate::model::contract_cost;
    use crate::solvers::solve_bruteforce;

    #[test]
    fn toy_a_reaches_the_optimum() {
        let params = SearchParams {
            seed: 1,
            restarts: 5,
            ..SearchParams::default()
        };
        let r = solve_local_search(&toy_a(), &params).unwrap();
        assert_eq!(r.value, ExtReal::Finite(-0.5));
        assert_eq!(r.status, SolveStatus::HeuristicBest);
    }

    #[test]
    fn no_restarts_and_no_moves_stays_at_outside_option() {
        let params = SearchParams {
            restarts: 0,
            neighborhood: super::super::Neighborhood {
                add: false,
                remove: false,
                swap: false,
            },
            ..SearchParams::default()
        };
        let inst = toy_a();
        let r = solve_local_search(&inst, &params).unwrap();
        assert_eq!(r.menu.items(), &[0]);
        assert_eq!(r.value, inst.cost(0));
    }

    #[test]
    fn results_are_feasible_and_never_below_exact() {
        for inst in [toy_a(), toy_b(), toy_c()] {
            let exact = solve_bruteforce(&inst, &SearchParams::default()).unwrap();
            for seed in 0..5 {
                let params = SearchParams {
                    seed,
                    restarts: 3,
                    ..SearchParams::default()
                };
                let r = solve_local_search(&inst, &params).unwrap();
                assert!(check_feasible(&inst, &r.contract).unwrap().feasible);
                assert_eq!(contract_cost(&inst, &r.contract).unwrap(), r.value);
                assert!(exact.value.le(r.value));
            }
        }
    }

    #[test]
    fn trace_ends_at_the_reported_menu() {
        let params = SearchParams {
            seed: 3,
            restarts: 4,
            ..SearchParams::default()
        };
        let (r, seq) = solve_local_search_traced(&toy_b(), &params).unwrap();
        assert_eq!(seq.menus.last(), Some(&r.menu));
        assert_eq!(seq.contracts.as_ref().unwrap().last(), Some(&r.contract));
    }
}

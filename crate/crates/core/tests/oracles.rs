//! Library results against independent oracles: a naive exhaustive solver
//! written from the constraint definitions, and hand-computed values on the
//! shipped fixtures.

use screenline::diagnostics::{
    extract_limit, hausdorff, penalized_indirect_utility, penalty_threshold, singular_set, MenuSequence,
};
use screenline::families::{random_instance, toy_a, toy_b, toy_c, RandomShape};
use screenline::{
    admissible_set, best_response, budget_indirect_utility, check_feasible, contract_cost, improve, indirect_utility,
    menu_to_contract, participation_set, solve_bruteforce, solve_local_search, solve_menu_enum, Contract, Error, ExtReal,
    Instance, Menu, SearchParams, Variant, VariantKind,
};

fn menu(items: &[usize]) -> Menu {
    Menu::new(items.iter().copied()).unwrap()
}

/// Feasibility straight from the definitions of the three programs.
fn oracle_feasible(inst: &Instance, a: &[usize]) -> bool {
    let tol = inst.tol();
    let z0 = inst.outside();
    let points = inst.points();
    for (j, p) in points.iter().enumerate() {
        let x = p.type_index;
        let u = inst.utility(x, a[j]);
        let budget_ok = |z: usize| p.budget.map_or(true, |y| inst.price(z).unwrap() <= y);
        if !budget_ok(a[j]) {
            return false;
        }
        if inst.kind() != VariantKind::Partial && u < inst.utility(x, z0) - tol {
            return false;
        }
        for &other in a {
            if budget_ok(other) && u < inst.utility(x, other) - tol {
                return false;
            }
        }
    }
    true
}

fn oracle_value(inst: &Instance, a: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    for (j, p) in inst.points().iter().enumerate() {
        if let Variant::Partial { reservation } = inst.variant() {
            if inst.utility(p.type_index, a[j]) < reservation[p.type_index] - inst.tol() {
                continue;
            }
        }
        total += p.weight * inst.cost(a[j]).finite()?;
    }
    Some(total)
}

/// Minimum over all `m^n` assignments, by odometer.
fn naive_optimum(inst: &Instance) -> Option<f64> {
    let (n, m) = (inst.n_points(), inst.n_allocs());
    let mut a = vec![0; n];
    let mut best: Option<f64> = None;
    loop {
        if oracle_feasible(inst, &a) {
            if let Some(v) = oracle_value(inst, &a) {
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
        let mut i = 0;
        while i < n && a[i] + 1 == m {
            a[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
        a[i] += 1;
    }
}

#[test]
fn exact_solvers_match_the_naive_oracle() {
    for variant in [VariantKind::Full, VariantKind::Partial, VariantKind::Budget] {
        for seed in 0..40u64 {
            let n = 1 + (seed as usize % 4);
            let m = 2 + (seed as usize % 6);
            let inst = random_instance(seed, RandomShape::new(n, m, variant)).unwrap();
            let expected = naive_optimum(&inst).expect("the outside option (or witness) is feasible");
            let brute = solve_bruteforce(&inst, &SearchParams::default()).unwrap();
            let enumerated = solve_menu_enum(&inst, &SearchParams::default()).unwrap();
            for (name, r) in [("brute", &brute), ("menu", &enumerated)] {
                let v = r.value.finite().unwrap();
                assert!((v - expected).abs() <= 1e-12, "{variant} seed {seed} {name}: {v} vs oracle {expected}");
                assert!(oracle_feasible(&inst, r.contract.assignment()), "{variant} seed {seed} {name}");
            }
        }
    }
}

#[test]
fn local_search_never_beats_the_oracle() {
    for seed in 0..30u64 {
        let inst = random_instance(seed, RandomShape::new(3, 7, VariantKind::Full)).unwrap();
        let expected = naive_optimum(&inst).unwrap();
        let r = solve_local_search(&inst, &SearchParams { seed, ..SearchParams::default() }).unwrap();
        assert!(r.value.finite().unwrap() >= expected - 1e-12);
        assert!(oracle_feasible(&inst, r.contract.assignment()));
    }
}

#[test]
fn fixture_objectives() {
    let a = toy_a();
    assert_eq!(contract_cost(&a, &Contract::new(vec![0, 3])).unwrap(), ExtReal::Finite(-0.5));
    assert_eq!(contract_cost(&a, &Contract::constant(&a, 0)).unwrap(), ExtReal::Finite(0.0));
    let c = toy_c();
    assert_eq!(contract_cost(&c, &Contract::constant(&c, 3)).unwrap(), ExtReal::Finite(-0.5));
}

#[test]
fn fixture_menus_and_best_responses() {
    let a = toy_a();
    let (x1, x2) = (0, 1);
    assert_eq!(indirect_utility(&a, &menu(&[0, 2, 3]), x2).unwrap(), 1.0);
    assert_eq!(indirect_utility(&a, &menu(&[0]), x1).unwrap(), 0.0);
    assert!((indirect_utility(&a, &menu(&[0, 1, 2, 3, 4]), x1).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(best_response(&a, &menu(&[0, 2, 3]), x2).unwrap(), 3);
    assert_eq!(best_response(&a, &menu(&[0, 4]), x1).unwrap(), 0);

    let b = toy_b();
    assert_eq!(budget_indirect_utility(&b, &menu(&[0, 2, 3]), x2, 0.5).unwrap(), Some(0.0));
    assert_eq!(budget_indirect_utility(&b, &menu(&[0, 2, 3]), x2, 2.0).unwrap(), Some(1.0));
    assert_eq!(budget_indirect_utility(&b, &menu(&[2]), x1, 0.5).unwrap(), None);

    assert_eq!(menu_to_contract(&a, &menu(&[0, 3])).unwrap().assignment(), &[0, 3]);
    assert_eq!(menu_to_contract(&b, &menu(&[0, 3])).unwrap().assignment(), &[0, 0, 0, 3]);
}

#[test]
fn fixture_feasibility_reports() {
    let a = toy_a();
    assert!(check_feasible(&a, &Contract::new(vec![0, 3])).unwrap().feasible);
    let r = check_feasible(&a, &Contract::new(vec![3, 2])).unwrap();
    assert!(!r.feasible);
    assert!(r.ir_violations.iter().any(|v| v.point == "x1" && (v.deficit - 1.0).abs() < 1e-12));
    assert!(r.ic_violations.iter().any(|v| v.point == "x2" && v.other == "x1"));

    let b = toy_b();
    let r = check_feasible(&b, &Contract::new(vec![2, 0, 0, 0])).unwrap();
    assert!(r.budget_violations.iter().any(|v| v.point == "x1@0.5"));

    let c = toy_c();
    assert_eq!(participation_set(&c, &Contract::constant(&c, 3)).unwrap(), vec![1]);
    assert_eq!(participation_set(&c, &Contract::constant(&c, 0)).unwrap(), vec![0, 1]);
    let shifted = c
        .with_variant(Variant::Partial {
            reservation: vec![0.2, 0.0],
        })
        .unwrap();
    assert_eq!(participation_set(&shifted, &Contract::constant(&shifted, 0)).unwrap(), vec![1]);
}

#[test]
fn fixture_admissible_sets() {
    assert_eq!(admissible_set(&toy_a()).unwrap().members, vec![0, 2, 3]);
    let f0 = admissible_set(&toy_c()).unwrap();
    assert_eq!((f0.members, f0.witness), (vec![0, 2, 3], Some(3)));
    assert_eq!(admissible_set(&toy_b()).unwrap().members, vec![0, 2, 3, 5]);
}

#[test]
fn fixture_improvements() {
    let a = toy_a();
    assert_eq!(improve(&a, &Contract::constant(&a, 1)).unwrap().0, Contract::constant(&a, 0));
    let (out, trace) = improve(&a, &Contract::new(vec![0, 3])).unwrap();
    assert_eq!(out.assignment(), &[0, 3]);
    assert_eq!(trace.kept, vec!["x1", "x2"]);

    let c = toy_c();
    assert_eq!(improve(&c, &Contract::constant(&c, 1)).unwrap().0, Contract::constant(&c, 3));
    assert_eq!(improve(&c, &Contract::constant(&c, 3)).unwrap().0, Contract::constant(&c, 3));
    assert_eq!(improve(&c, &Contract::new(vec![0, 3])).unwrap().0.assignment(), &[0, 3]);

    let b = toy_b();
    assert_eq!(improve(&b, &Contract::constant(&b, 1)).unwrap().0, Contract::constant(&b, 0));
    let from_menu = menu_to_contract(&b, &menu(&[0, 3])).unwrap();
    assert_eq!(improve(&b, &from_menu).unwrap().0, from_menu);
}

#[test]
fn fixture_solver_values() {
    let params = SearchParams::default();
    for inst in [toy_a(), toy_c()] {
        let r = solve_bruteforce(&inst, &params).unwrap();
        assert_eq!(r.value, ExtReal::Finite(-0.5));
    }
    let two = SearchParams {
        max_menu_size: Some(2),
        ..params.clone()
    };
    let r = solve_menu_enum(&toy_a(), &two).unwrap();
    assert_eq!((r.value, r.menu.items()), (ExtReal::Finite(-0.5), &[0usize, 3][..]));
    let b = toy_b();
    let four = SearchParams {
        max_menu_size: Some(4),
        ..params.clone()
    };
    assert_eq!(
        solve_menu_enum(&b, &four).unwrap().value,
        solve_bruteforce(&b, &params).unwrap().value
    );
}

#[test]
fn fixture_hausdorff() {
    let a = toy_a();
    assert_eq!(hausdorff(&a, &menu(&[0, 3]), &menu(&[0, 3])).unwrap(), 0.0);
    let root5 = (2f64 * 2.0 + 1.0).sqrt();
    assert!((hausdorff(&a, &menu(&[0]), &menu(&[3])).unwrap() - root5).abs() < 1e-12);
    assert!((hausdorff(&a, &menu(&[0, 3]), &menu(&[0])).unwrap() - root5).abs() < 1e-12);
}

#[test]
fn fixture_limits() {
    let a = toy_a();
    let constant = MenuSequence {
        menus: vec![menu(&[0, 3]); 5],
        contracts: Some(vec![Contract::new(vec![0, 3]); 5]),
    };
    let l = extract_limit(&a, &constant, 0.5).unwrap();
    assert_eq!((l.menu.items(), l.contract.assignment()), (&[0usize, 3][..], &[0usize, 3][..]));

    let alternating = MenuSequence {
        menus: (0..6).map(|i| if i % 2 == 0 { menu(&[0, 3]) } else { menu(&[0, 2, 3]) }).collect(),
        contracts: Some(vec![Contract::new(vec![0, 3]); 6]),
    };
    let l = extract_limit(&a, &alternating, 1.0).unwrap();
    assert_eq!((l.menu.items(), l.contract.assignment()), (&[0usize, 3][..], &[0usize, 3][..]));

    let flipping = MenuSequence {
        menus: vec![menu(&[0, 2, 3]); 6],
        contracts: Some((0..6).map(|i| Contract::new(vec![0, if i % 2 == 0 { 2 } else { 3 }])).collect()),
    };
    assert_eq!(extract_limit(&a, &flipping, 0.5).unwrap().contract.get(1), 3);
}

#[test]
fn fixture_singular_sets() {
    let b = toy_b();
    let r = singular_set(&b, &menu(&[0, 5])).unwrap();
    assert_eq!(r.singular_points, vec!["x2@0.5"]);
    assert_eq!(r.theta_mass, 0.25);
    let x2 = r.jumps.iter().find(|j| j.point == "x2@0.5").unwrap();
    assert_eq!((x2.v_star, x2.v_star_minus), (1.0, 0.0));
    let x1 = r.jumps.iter().find(|j| j.point == "x1@0.5").unwrap();
    assert!(!x1.singular);

    // z3 is priced exactly at the budget 2 and x2 strictly prefers it to z0.
    let r = singular_set(&b, &menu(&[0, 3])).unwrap();
    assert_eq!(r.singular_points, vec!["x2@2"]);
    assert_eq!(r.theta_mass, 0.25);
}

#[test]
fn fixture_penalized_utility() {
    let b = toy_b();
    let m = menu(&[0, 2]);
    let x2 = 1;
    assert_eq!(penalized_indirect_utility(&b, &m, x2, 0.5, 0.0).unwrap(), 0.5);
    assert_eq!(penalized_indirect_utility(&b, &m, x2, 0.5, 10.0).unwrap(), 0.0);
    assert_eq!(penalty_threshold(&b, &m, x2, 0.5).unwrap(), Some(1.0));
    for lambda in [1.0, 1.5, 3.0, 1e6] {
        assert_eq!(penalized_indirect_utility(&b, &m, x2, 0.5, lambda).unwrap(), 0.0);
    }
}

#[test]
fn document_validation_examples() {
    let mut doc = toy_a().to_doc();
    doc.types.weights = vec![0.7, 0.7];
    match Instance::new(doc) {
        Err(Error::Validation { message, .. }) => assert!(message.contains("1.4"), "{message}"),
        other => panic!("expected a validation error, got {other:?}"),
    }

    let mut doc = toy_b().to_doc();
    if let screenline::Payload::Priced { price, .. } = &mut doc.grid.allocations[0] {
        *price = 1.0;
    }
    assert!(matches!(Instance::new(doc), Err(Error::Validation { .. })));
}

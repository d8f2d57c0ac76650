//! Screening (adverse-selection) problems on finite type spaces and finite
//! allocation grids.
//!
//! A principal offers allocations to privately informed agents and minimizes
//! expected cost subject to incentive compatibility. Three variants are
//! supported: full participation (IR + IC), partial participation (IC only,
//! cost counted on the participation set), and budget-constrained agents
//! (prices must be affordable, deviations restricted to affordable items).
//!
//! The crate provides:
//!
//! * [`model`]: instances, oracles, contracts, and the principal's objective;
//! * [`families`]: parametric families, fixtures, and random generation;
//! * [`feasibility`]: IR/IC checks, best responses, and menus;
//! * [`coercivity`]: admissible sets and analytic boundedness certificates;
//! * [`improvement`]: operators that move contracts into the admissible set
//!   without raising cost at any point;
//! * [`solvers`]: exhaustive, menu-enumeration, and local-search solvers;
//! * [`diagnostics`]: Hausdorff distance, limit extraction, budget singular
//!   sets, and penalized indirect utilities.

pub mod coercivity;
pub mod diagnostics;
pub mod error;
pub mod families;
pub mod feasibility;
pub mod improvement;
pub mod json;
pub mod model;
pub mod numeric;
pub mod solvers;

pub use coercivity::{admissible_set, bound_certificate, AdmissibleMask, BoundCertificate, MaskKind};
pub use error::{Error, Result};
pub use feasibility::{
    best_response, budget_indirect_utility, check_feasible, indirect_utility, menu_to_contract,
    participation_set, FeasibilityReport, Menu,
};
pub use improvement::{improve, improve_budget, improve_full, improve_partial, ImprovementTrace};
pub use model::{
    contract_cost, load_instance, Contract, ContractDoc, Instance, InstanceDoc, Payload, Variant, VariantKind,
};
pub use numeric::ExtReal;
pub use solvers::{
    solve_bruteforce, solve_local_search, solve_menu_enum, SearchParams, SolveReport, SolveStatus,
};
